//! Translate, compile, back-translate and judge: the per-item validation
//! loop plus the benchmark runner over a JSONL file of informal statements.

use std::path::Path;
use std::thread;
use std::time::Duration;

use herald_core::validate::{
    back_translation_prompt, formalization_prompt, nli_prompt, parse_verdict, summarize, BenchmarkSummary,
    CandidateResult, CompileOutcome, SummaryError, ValidationReport,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, CompilerBackend};
use crate::gateway::{GatewayError, RoleClient};
use crate::jsonl::{write_json, write_jsonl, JsonlError};

#[derive(Debug, Error)]
pub enum ValidateError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    File(#[from] JsonlError),
    #[error(transparent)]
    Summary(#[from] SummaryError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// One benchmark line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchItem {
    pub id: String,
    pub informal_text: String,
    /// Extra source lines (imports, `open`s) placed before the candidate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub header: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidatorConfig {
    pub k: u32,
    pub short_circuit: bool,
    pub candidate_parallelism: usize,
    pub item_parallelism: usize,
    pub compile_timeout: Duration,
    pub header_prelude: String,
}

impl Default for ValidatorConfig {
    fn default() -> Self {
        ValidatorConfig {
            k: 1,
            short_circuit: true,
            candidate_parallelism: 4,
            item_parallelism: 2,
            compile_timeout: Duration::from_secs(60),
            header_prelude: "import Mathlib\n".into(),
        }
    }
}

pub struct Validator<'a> {
    pub translator: RoleClient,
    pub back_translator: RoleClient,
    pub judge: RoleClient,
    pub backend: &'a dyn CompilerBackend,
    pub config: ValidatorConfig,
}

/// Lean code inside the first fenced block, or the whole answer.
pub fn extract_lean(output: &str) -> String {
    if let Some(start) = output.find("```") {
        let after = &output[start + 3..];
        let after = after.split_once('\n').map_or("", |(_, rest)| rest);
        let end = after.find("```").unwrap_or(after.len());
        return after[..end].trim().to_string();
    }
    output.trim().to_string()
}

pub fn back_translate(client: &RoleClient, formal: &str) -> Result<String, ValidateError> {
    if formal.trim().is_empty() {
        return Err(ValidateError::InvalidInput("cannot back-translate an empty statement".into()));
    }
    Ok(client.ask(&back_translation_prompt(formal))?.trim().to_string())
}

impl Validator<'_> {
    pub fn compile_check(&self, candidate: &str, header: Option<&str>) -> Result<CompileOutcome, BackendError> {
        let mut source = self.config.header_prelude.clone();
        if let Some(h) = header.filter(|h| !h.trim().is_empty()) {
            source.push_str(h.trim_end());
            source.push('\n');
        }
        source.push('\n');
        source.push_str(candidate);
        source.push('\n');
        self.backend.check(&source, self.config.compile_timeout)
    }

    fn evaluate(&self, item: &BenchItem, candidate: &str) -> Result<CandidateResult, ValidateError> {
        match self.compile_check(candidate, item.header.as_deref())? {
            CompileOutcome::Pass => {}
            CompileOutcome::Fail(d) => return Ok(CandidateResult::compile_failed(candidate, d)),
            CompileOutcome::Skipped => return Ok(CandidateResult::skipped(candidate)),
        }
        let back = back_translate(&self.back_translator, candidate)?;
        let verdict = parse_verdict(&self.judge.ask(&nli_prompt(&item.informal_text, &back))?);
        Ok(CandidateResult::compiled(candidate, Some((back, verdict))))
    }

    /// `k` candidates, each compiled then (if it compiles) back-translated
    /// and judged. With short-circuit on, candidates after the first success
    /// are recorded as skipped.
    pub fn validate_item(&self, item: &BenchItem) -> Result<ValidationReport, ValidateError> {
        if item.informal_text.trim().is_empty() {
            return Err(ValidateError::InvalidInput(format!("item `{}` has empty informal_text", item.id)));
        }
        let k = self.config.k;
        let candidates: Vec<String> = self
            .translator
            .complete(&formalization_prompt(&item.informal_text), k)?
            .into_iter()
            .map(|c| extract_lean(&c.text))
            .collect();

        let width = self.config.candidate_parallelism.max(1);
        let mut results: Vec<CandidateResult> = Vec::with_capacity(candidates.len());
        for chunk in candidates.chunks(width) {
            if self.config.short_circuit && results.iter().any(|r| r.is_final) {
                results.extend(chunk.iter().map(|c| CandidateResult::skipped(c.as_str())));
                continue;
            }
            let evaluated: Vec<Result<CandidateResult, ValidateError>> = thread::scope(|s| {
                let handles: Vec<_> = chunk.iter().map(|c| s.spawn(move || self.evaluate(item, c))).collect();
                handles.into_iter().map(|h| h.join().expect("candidate worker panicked")).collect()
            });
            for r in evaluated {
                results.push(r?);
            }
        }
        if self.config.short_circuit {
            if let Some(first) = results.iter().position(|r| r.is_final) {
                for r in &mut results[first + 1..] {
                    *r = CandidateResult::skipped(r.candidate_text.clone());
                }
            }
        }
        Ok(ValidationReport::from_candidates(item.id.clone(), k, self.config.short_circuit, results))
    }

    /// Validates every item (several at once), then writes `reports.jsonl`
    /// in input order and `summary.json` into `out_dir`.
    pub fn run_benchmark(&self, items: &[BenchItem], dataset_name: &str, out_dir: &Path) -> Result<BenchmarkSummary, ValidateError> {
        let mut reports = Vec::with_capacity(items.len());
        for chunk in items.chunks(self.config.item_parallelism.max(1)) {
            let done: Vec<Result<ValidationReport, ValidateError>> = thread::scope(|s| {
                let handles: Vec<_> = chunk.iter().map(|i| s.spawn(move || self.validate_item(i))).collect();
                handles.into_iter().map(|h| h.join().expect("item worker panicked")).collect()
            });
            for r in done {
                reports.push(r?);
            }
        }
        let summary = summarize(&reports, dataset_name)?;
        write_jsonl(&out_dir.join("reports.jsonl"), &reports)?;
        write_json(&out_dir.join("summary.json"), &summary)?;
        Ok(summary)
    }
}
