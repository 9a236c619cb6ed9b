//! Level-ordered statement informalization followed by stepwise proof
//! informalization, with a crash-safe completed-id ledger.
//!
//! Output directory layout:
//!
//! ```text
//! manifest.json               config digest, counts, completion flag
//! ledger.jsonl                one {"id": ...} per finished record
//! statements_level_000.jsonl  NL-FL pairs, one file per dependency level
//! proofs.jsonl                proof pairs (id "<name>#proof")
//! prompts.jsonl               dry runs only
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;

use herald_core::corpus::{CorpusError, CorpusIndex, ProofStep};
use herald_core::dataset::{Direction, NLFLPair, Provenance, RecordType};
use herald_core::depgraph::{build_graph, schedule, stratify, GraphError, LevelAssignment};
use herald_core::prompt::{
    assemble_proof_prompt, assemble_statement_prompt_within, summarize_steps_prompt, PromptError, ProofContext,
    RetrievedExample, StatementContext, TemplateRegistry,
};
use herald_core::retrieval::{embed, EmbeddingProvider, ExampleStore, RetrievalError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{GatewayError, RoleClient};
use crate::jsonl::{io_err, read_json, read_jsonl_or_empty, write_json, write_jsonl, Appender, JsonlError};

#[derive(Debug, Error)]
pub enum InformalizeError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    File(#[from] JsonlError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{dir} was produced with config digest {recorded}, current config is {current}; rerun with --fresh to start over")]
    ConfigMismatch { dir: PathBuf, recorded: String, current: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InformalizeManifest {
    pub config_digest: String,
    pub levels: usize,
    pub statements: usize,
    pub proofs: usize,
    pub complete: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LedgerEntry {
    id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub level: u32,
    pub template_id: String,
    pub context_digest: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stop {
    #[default]
    Finished,
    /// `limit` new records were written.
    Limit,
    /// The interrupt flag was raised; the in-flight batch was flushed.
    Interrupted,
}

pub struct Informalizer<'a> {
    pub index: &'a CorpusIndex,
    pub registry: &'a TemplateRegistry,
    pub tactic_notes: &'a BTreeMap<String, String>,
    pub store: Option<(&'a ExampleStore, &'a (dyn EmbeddingProvider + Sync))>,
    pub client: &'a RoleClient,
    pub retrieval_k: usize,
    pub neighbor_limit: usize,
    pub max_prompt_chars: usize,
    pub batch_size: usize,
    pub config_digest: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions<'a> {
    pub limit: Option<usize>,
    pub fresh: bool,
    pub dry_run: bool,
    pub interrupt: Option<&'a AtomicBool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunSummary {
    pub stop: Stop,
    pub written: usize,
    pub manifest: Option<InformalizeManifest>,
}

pub fn level_file(level: usize) -> String {
    format!("statements_level_{level:03}.jsonl")
}

pub fn proof_id(name: &str) -> String {
    format!("{name}#proof")
}

/// Formal proof text: the signature followed by the tactic script.
pub fn formal_proof_text(signature: &str, steps: &[ProofStep]) -> String {
    let mut out = format!("{signature} := by");
    for s in steps {
        out.push_str("\n  ");
        out.push_str(s.tactic_text.trim());
    }
    out
}

pub fn levels_of(index: &CorpusIndex) -> Result<LevelAssignment, GraphError> {
    stratify(&build_graph(index).graph)
}

/// Every pair already written under `dir`, statements (by level) then proofs.
pub fn read_outputs(dir: &Path) -> Result<Vec<NLFLPair>, JsonlError> {
    let mut files: Vec<PathBuf> = match fs::read_dir(dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("statements_level_")))
            .collect(),
        Err(_) => Vec::new(),
    };
    files.sort();
    files.push(dir.join("proofs.jsonl"));
    let mut out = Vec::new();
    for f in files {
        out.extend(read_jsonl_or_empty::<NLFLPair>(&f)?);
    }
    Ok(out)
}

fn interrupted(opts: &RunOptions<'_>) -> bool {
    opts.interrupt.is_some_and(|f| f.load(Ordering::SeqCst))
}

impl Informalizer<'_> {
    pub fn statement_context(
        &self,
        name: &str,
        levels: &LevelAssignment,
        translations: &BTreeMap<String, String>,
    ) -> Result<StatementContext, InformalizeError> {
        let subject = self.index.get(name).ok_or_else(|| CorpusError::UnknownDeclaration(name.into()))?.clone();
        let neighbors = self.index.resolve_neighbors(name, self.neighbor_limit)?;
        let retrieved = match self.store {
            Some((store, embedder)) if !store.is_empty() => {
                let q = embed(&subject.signature, embedder)?;
                store.query_knn(&q, self.retrieval_k)?.into_iter().map(RetrievedExample::from).collect()
            }
            _ => Vec::new(),
        };
        Ok(StatementContext {
            head_statements: self.index.head_statement_for(&subject.file_path).unwrap_or("").to_string(),
            dependent_translations: StatementContext::dependents_of(&subject, &levels.level_of, translations),
            neighbors: StatementContext::neighbor_entries(self.index, &neighbors),
            retrieved,
            subject,
        })
    }

    fn translate_statement(
        &self,
        name: &str,
        levels: &LevelAssignment,
        translations: &BTreeMap<String, String>,
    ) -> Result<NLFLPair, InformalizeError> {
        let ctx = self.statement_context(name, levels, translations)?;
        let (prompt, _) = assemble_statement_prompt_within(&ctx, self.registry, self.max_prompt_chars)?;
        let text = self.client.ask(&prompt.text)?;
        Ok(NLFLPair {
            id: name.into(),
            formal_text: ctx.subject.signature.clone(),
            informal_text: text.trim().to_string(),
            direction: Direction::NlToFl,
            provenance: Provenance::Original,
            source_name: Some(name.into()),
            level: levels.level_of.get(name).copied(),
            kind: Some(ctx.subject.kind),
            record_type: RecordType::Statement,
        })
    }

    /// One call per step (focused on that step), then one summary call.
    pub fn translate_proof(&self, name: &str, informal_statement: &str) -> Result<NLFLPair, InformalizeError> {
        let decl = self.index.get(name).ok_or_else(|| CorpusError::UnknownDeclaration(name.into()))?;
        let steps = self.index.proof_of(name).unwrap_or(&[]).to_vec();
        let mut ctx = ProofContext {
            formal_statement: decl.signature.clone(),
            informal_statement: informal_statement.into(),
            steps,
            tactic_notes: self.tactic_notes.clone(),
            focus_step: None,
        };
        let mut stepwise = Vec::with_capacity(ctx.steps.len());
        for i in 0..ctx.steps.len() {
            ctx.focus_step = Some(i);
            let prompt = assemble_proof_prompt(&ctx, self.registry)?;
            stepwise.push(self.client.ask(&prompt.text)?.trim().to_string());
        }
        ctx.focus_step = None;
        let summary = summarize_steps_prompt(&stepwise, &ctx, self.registry)?;
        let text = self.client.ask(&summary.text)?;
        Ok(NLFLPair {
            id: proof_id(name),
            formal_text: formal_proof_text(&decl.signature, &ctx.steps),
            informal_text: text.trim().to_string(),
            direction: Direction::NlToFl,
            provenance: Provenance::Original,
            source_name: Some(name.into()),
            level: None,
            kind: Some(decl.kind),
            record_type: RecordType::Proof,
        })
    }

    /// Writes every statement prompt (dependency translations unknown, so
    /// left out) without calling the gateway.
    pub fn dry_run(&self, out: &Path) -> Result<usize, InformalizeError> {
        let levels = levels_of(self.index)?;
        let empty = BTreeMap::new();
        let mut records = Vec::new();
        for batch in schedule(&levels, self.batch_size) {
            for name in batch {
                let ctx = self.statement_context(&name, &levels, &empty)?;
                let (p, _) = assemble_statement_prompt_within(&ctx, self.registry, self.max_prompt_chars)?;
                records.push(PromptRecord {
                    level: levels.level_of[&name],
                    id: name,
                    template_id: p.template_id,
                    context_digest: p.context_digest,
                    text: p.text,
                });
            }
        }
        write_jsonl(&out.join("prompts.jsonl"), &records)?;
        Ok(records.len())
    }

    /// Loads the ledger and drops output records that it does not cover.
    fn recover(&self, out: &Path) -> Result<BTreeSet<String>, InformalizeError> {
        let done: BTreeSet<String> =
            read_jsonl_or_empty::<LedgerEntry>(&out.join("ledger.jsonl"))?.into_iter().map(|e| e.id).collect();
        let mut files: Vec<PathBuf> = fs::read_dir(out)
            .map_err(io_err(out))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("statements_level_") || n == "proofs.jsonl")
            })
            .collect();
        files.sort();
        for f in files {
            let records: Vec<NLFLPair> = read_jsonl_or_empty(&f)?;
            let mut seen = BTreeSet::new();
            let kept: Vec<&NLFLPair> = records.iter().filter(|r| done.contains(&r.id) && seen.insert(r.id.clone())).collect();
            if kept.len() != records.len() {
                write_jsonl(&f, &kept)?;
            }
        }
        Ok(done)
    }

    pub fn run(&self, out: &Path, opts: RunOptions<'_>) -> Result<RunSummary, InformalizeError> {
        if opts.fresh && out.exists() {
            fs::remove_dir_all(out).map_err(io_err(out))?;
        }
        fs::create_dir_all(out).map_err(io_err(out))?;
        if opts.dry_run {
            self.dry_run(out)?;
            return Ok(RunSummary::default());
        }

        let manifest_path = out.join("manifest.json");
        if manifest_path.exists() {
            let m: InformalizeManifest = read_json(&manifest_path)?;
            if m.config_digest != self.config_digest {
                return Err(InformalizeError::ConfigMismatch {
                    dir: out.into(),
                    recorded: m.config_digest,
                    current: self.config_digest.clone(),
                });
            }
        }
        let levels = levels_of(self.index)?;
        let mut manifest = InformalizeManifest {
            config_digest: self.config_digest.clone(),
            levels: levels.depth(),
            statements: 0,
            proofs: 0,
            complete: false,
        };
        write_json(&manifest_path, &manifest)?;

        let mut done = self.recover(out)?;
        let mut translations: BTreeMap<String, String> = read_outputs(out)?
            .into_iter()
            .filter(|p| p.record_type == RecordType::Statement)
            .map(|p| (p.id, p.informal_text))
            .collect();
        let mut ledger = Appender::open(&out.join("ledger.jsonl"))?;
        let mut written = 0usize;
        let budget_left = |written: usize| opts.limit.map_or(usize::MAX, |l| l.saturating_sub(written));

        let mut stop = Stop::Finished;
        'levels: for (lvl, names) in levels.levels.iter().enumerate() {
            let mut pending: Vec<&String> = names.iter().filter(|n| !done.contains(*n)).collect();
            pending.sort();
            if pending.is_empty() {
                continue;
            }
            let mut file = Appender::open(&out.join(level_file(lvl)))?;
            for batch in pending.chunks(self.batch_size.max(1)) {
                if interrupted(&opts) {
                    stop = Stop::Interrupted;
                    break 'levels;
                }
                let room = budget_left(written);
                if room == 0 {
                    stop = Stop::Limit;
                    break 'levels;
                }
                let batch = &batch[..batch.len().min(room)];
                let results = self.parallel(batch, |name| self.translate_statement(name, &levels, &translations));
                // flush what succeeded before surfacing the first error
                let mut first_err = None;
                for r in results {
                    match r {
                        Ok(pair) => {
                            file.append(&pair)?;
                            ledger.append(&LedgerEntry { id: pair.id.clone() })?;
                            done.insert(pair.id.clone());
                            translations.insert(pair.id.clone(), pair.informal_text);
                            written += 1;
                        }
                        Err(e) => {
                            first_err.get_or_insert(e);
                        }
                    }
                }
                if let Some(e) = first_err {
                    return Err(e);
                }
            }
        }

        if stop == Stop::Finished {
            let mut proofs: Vec<String> = self
                .index
                .tactic_proofs()
                .map(|(d, _)| d.full_name.clone())
                .filter(|n| translations.contains_key(n) && !done.contains(&proof_id(n)))
                .collect();
            proofs.sort();
            let mut file = Appender::open(&out.join("proofs.jsonl"))?;
            for batch in proofs.chunks(self.batch_size.max(1)) {
                if interrupted(&opts) {
                    stop = Stop::Interrupted;
                    break;
                }
                let room = budget_left(written);
                if room == 0 {
                    stop = Stop::Limit;
                    break;
                }
                let batch: Vec<&String> = batch[..batch.len().min(room)].iter().collect();
                let results = self.parallel(&batch, |name| self.translate_proof(name, &translations[name.as_str()]));
                let mut first_err = None;
                for r in results {
                    match r {
                        Ok(pair) => {
                            file.append(&pair)?;
                            ledger.append(&LedgerEntry { id: pair.id.clone() })?;
                            done.insert(pair.id.clone());
                            written += 1;
                        }
                        Err(e) => {
                            first_err.get_or_insert(e);
                        }
                    }
                }
                if let Some(e) = first_err {
                    return Err(e);
                }
            }
        }

        let all = read_outputs(out)?;
        manifest.statements = all.iter().filter(|p| p.record_type == RecordType::Statement).count();
        manifest.proofs = all.len() - manifest.statements;
        manifest.complete = stop == Stop::Finished;
        write_json(&manifest_path, &manifest)?;
        Ok(RunSummary { stop, written, manifest: Some(manifest) })
    }

    /// Runs `f` on every name at once; results come back in input order.
    fn parallel<F>(&self, names: &[&String], f: F) -> Vec<Result<NLFLPair, InformalizeError>>
    where
        F: Fn(&String) -> Result<NLFLPair, InformalizeError> + Sync,
    {
        thread::scope(|s| {
            let handles: Vec<_> = names.iter().map(|n| s.spawn(|| f(n))).collect();
            handles.into_iter().map(|h| h.join().expect("informalize worker panicked")).collect()
        })
    }
}
