//! Candidate outcomes, pass@k reports, benchmark summaries and the prompt
//! contracts of the translate / back-translate / judge roles.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "diagnostic", rename_all = "snake_case")]
pub enum CompileOutcome {
    Pass,
    Fail(String),
    Skipped,
}

impl CompileOutcome {
    pub fn is_pass(&self) -> bool {
        matches!(self, CompileOutcome::Pass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NliVerdict {
    Accept,
    Reject,
    Skipped,
}

/// One candidate's trip through compile, back-translation and judgement.
/// Constructors keep `final` consistent with the two checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub candidate_text: String,
    pub compile: CompileOutcome,
    pub back_translation: Option<String>,
    pub nli: NliVerdict,
    #[serde(rename = "final")]
    pub is_final: bool,
    /// The judge answered without a verdict token.
    #[serde(default)]
    pub nli_parse_failure: bool,
}

impl CandidateResult {
    pub fn compile_failed(candidate_text: impl Into<String>, diagnostic: impl Into<String>) -> Self {
        CandidateResult {
            candidate_text: candidate_text.into(),
            compile: CompileOutcome::Fail(diagnostic.into()),
            back_translation: None,
            nli: NliVerdict::Skipped,
            is_final: false,
            nli_parse_failure: false,
        }
    }

    /// Not evaluated because an earlier candidate already succeeded.
    pub fn skipped(candidate_text: impl Into<String>) -> Self {
        CandidateResult {
            candidate_text: candidate_text.into(),
            compile: CompileOutcome::Skipped,
            back_translation: None,
            nli: NliVerdict::Skipped,
            is_final: false,
            nli_parse_failure: false,
        }
    }

    /// Compiled; `judged` is `None` when back-translation and judgement were
    /// not run.
    pub fn compiled(candidate_text: impl Into<String>, judged: Option<(String, Verdict)>) -> Self {
        let (back_translation, nli, nli_parse_failure) = match judged {
            Some((bt, v)) => (Some(bt), v.verdict, v.parse_failure),
            None => (None, NliVerdict::Skipped, false),
        };
        CandidateResult {
            candidate_text: candidate_text.into(),
            compile: CompileOutcome::Pass,
            back_translation,
            is_final: nli == NliVerdict::Accept,
            nli,
            nli_parse_failure,
        }
    }

    /// The state-machine invariants: final iff pass and accept; no verdict
    /// without a passing compile.
    pub fn is_consistent(&self) -> bool {
        let fin = self.compile.is_pass() && self.nli == NliVerdict::Accept;
        let gated = self.nli == NliVerdict::Skipped || self.compile.is_pass();
        self.is_final == fin && gated
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub item_id: String,
    pub k: u32,
    pub candidates: Vec<CandidateResult>,
    pub success: bool,
    /// Whether evaluation stopped after the first successful candidate.
    pub short_circuit: bool,
    pub nli_parse_failures: u32,
}

impl ValidationReport {
    pub fn from_candidates(item_id: impl Into<String>, k: u32, short_circuit: bool, candidates: Vec<CandidateResult>) -> Self {
        let success = candidates.iter().any(|c| c.is_final);
        let nli_parse_failures = candidates.iter().filter(|c| c.nli_parse_failure).count() as u32;
        ValidationReport { item_id: item_id.into(), k, candidates, success, short_circuit, nli_parse_failures }
    }

    pub fn is_consistent(&self) -> bool {
        self.candidates.len() <= self.k as usize
            && self.success == self.candidates.iter().any(|c| c.is_final)
            && self.candidates.iter().all(CandidateResult::is_consistent)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SummaryError {
    #[error("no reports to summarize")]
    Empty,
    #[error("reports disagree on k: {0} and {1}")]
    MixedK(u32, u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub dataset_name: String,
    pub total: u32,
    pub succeeded: u32,
    pub accuracy: f64,
    pub k: u32,
}

impl BenchmarkSummary {
    pub fn render_table(&self) -> String {
        let pct = alloc::format!("{:.1}%", self.accuracy * 100.0);
        let header = ["dataset", "k", "succeeded", "total", "accuracy"];
        let row = [
            self.dataset_name.clone(),
            alloc::format!("Pass@{}", self.k),
            self.succeeded.to_string(),
            self.total.to_string(),
            pct,
        ];
        let widths: Vec<usize> =
            header.iter().zip(&row).map(|(h, r)| h.chars().count().max(r.chars().count())).collect();
        let mut out = String::new();
        for (cells, sep) in [(header.map(String::from), ' '), (row, ' ')] {
            let line: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| alloc::format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", line.join(&alloc::format!(" {sep} ")).trim_end());
        }
        out
    }
}

pub fn summarize(reports: &[ValidationReport], dataset_name: &str) -> Result<BenchmarkSummary, SummaryError> {
    let first = reports.first().ok_or(SummaryError::Empty)?;
    if let Some(other) = reports.iter().find(|r| r.k != first.k) {
        return Err(SummaryError::MixedK(first.k, other.k));
    }
    let total = reports.len() as u32;
    let succeeded = reports.iter().filter(|r| r.success).count() as u32;
    Ok(BenchmarkSummary {
        dataset_name: dataset_name.into(),
        total,
        succeeded,
        accuracy: f64::from(succeeded) / f64::from(total),
        k: first.k,
    })
}

/// Any-of success over the first `k` entries of a candidate pool.
pub fn pass_at_k_prefix(finals: &[bool], k: usize) -> bool {
    finals.iter().take(k).any(|&f| f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdict {
    pub verdict: NliVerdict,
    pub parse_failure: bool,
}

/// Reads the judge's answer. Only a first token of `ACCEPT` or `REJECT`
/// (case-insensitive, trailing punctuation ignored) counts; anything else
/// is a reject flagged as a parse failure.
pub fn parse_verdict(output: &str) -> Verdict {
    let token = output
        .split_whitespace()
        .next()
        .unwrap_or("")
        .trim_matches(|c: char| !c.is_alphanumeric());
    if token.eq_ignore_ascii_case("ACCEPT") {
        Verdict { verdict: NliVerdict::Accept, parse_failure: false }
    } else if token.eq_ignore_ascii_case("REJECT") {
        Verdict { verdict: NliVerdict::Reject, parse_failure: false }
    } else {
        Verdict { verdict: NliVerdict::Reject, parse_failure: true }
    }
}

pub const INPUT_MARKER: &str = "### Input\n";
pub const ORIGINAL_MARKER: &str = "### Original\n";
pub const BACK_MARKER: &str = "### Back-translation\n";

pub fn formalization_prompt(informal: &str) -> String {
    alloc::format!(
        "Translate the following mathematical statement into a Lean 4 theorem with Mathlib. \
         Answer with the Lean code only, ending the theorem with `:= by sorry`.\n\n{INPUT_MARKER}{}\n",
        informal.trim()
    )
}

pub fn back_translation_prompt(formal: &str) -> String {
    alloc::format!(
        "Translate the following Lean 4 statement into a natural-language mathematical statement. \
         Answer with the statement only.\n\n{INPUT_MARKER}{}\n",
        formal.trim()
    )
}

pub fn nli_prompt(original: &str, back: &str) -> String {
    alloc::format!(
        "Decide whether the two statements below say the same mathematical thing. \
         Answer with exactly one word: ACCEPT if they are equivalent, REJECT otherwise.\n\n\
         {ORIGINAL_MARKER}{}\n\n{BACK_MARKER}{}\n",
        original.trim(),
        back.trim()
    )
}

/// Text after `marker` up to the next `### ` heading or the end.
pub fn section_after<'a>(prompt: &'a str, marker: &str) -> Option<&'a str> {
    let start = prompt.find(marker)? + marker.len();
    let rest = &prompt[start..];
    let end = rest.find("\n\n### ").unwrap_or(rest.len());
    Some(rest[..end].trim())
}
