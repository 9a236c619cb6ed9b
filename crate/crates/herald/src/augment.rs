//! Augmentation drivers: compile-filtered tactic-state statements and
//! strategy-driven informal variants.

use std::thread;
use std::time::Duration;

use herald_core::augment::{
    accept_variant, dedup_sample, synthesize_from_state, variant_prompt, AugmentationStrategy, NLVariant,
    SynthesizedStatement, VariantTally,
};
use herald_core::corpus::{CorpusIndex, DeclKind, DeclarationRecord, LineSpan};
use herald_core::dataset::{Direction, NLFLPair, Provenance, RecordType};
use herald_core::prompt::{assemble_statement_prompt_within, PromptError, StatementContext, TemplateRegistry};
use herald_core::validate::CompileOutcome;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, CompilerBackend};
use crate::gateway::{GatewayError, RoleClient};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// A synthesized statement the compiler refused, with its diagnostic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedCandidate {
    pub name: String,
    pub formal_text: String,
    pub diagnostic: String,
}

/// Settings shared by the compile filter.
#[derive(Debug, Clone)]
pub struct FilterSettings {
    pub header_prelude: String,
    pub timeout: Duration,
    pub parallelism: usize,
}

/// `open` line for the origin's namespace, so that short names used in the
/// proof state resolve outside the origin file.
pub fn origin_preamble(decl: &DeclarationRecord) -> String {
    if decl.namespace_path.is_empty() {
        String::new()
    } else {
        format!("open {}\n", decl.namespace_path.join("."))
    }
}

/// Every statement from every open goal of every `state_before` of every
/// tactic proof, in (origin, step, goal) order.
pub fn synthesize_corpus(index: &CorpusIndex) -> Vec<SynthesizedStatement> {
    let mut out = Vec::new();
    for (decl, steps) in index.tactic_proofs() {
        let preamble = origin_preamble(decl);
        for step in steps {
            for mut s in synthesize_from_state(&step.state_before, &decl.full_name, step.step_index) {
                s.context_preamble = preamble.clone();
                out.push(s);
            }
        }
    }
    out
}

/// Splits candidates into those that elaborate and those that do not.
/// Order within each side follows the input.
pub fn compile_filter(
    candidates: &[SynthesizedStatement],
    backend: &dyn CompilerBackend,
    settings: &FilterSettings,
) -> Result<(Vec<SynthesizedStatement>, Vec<RejectedCandidate>), BackendError> {
    let mut valid = Vec::new();
    let mut rejected = Vec::new();
    for chunk in candidates.chunks(settings.parallelism.max(1)) {
        let outcomes: Vec<Result<CompileOutcome, BackendError>> = thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|c| {
                    s.spawn(move || {
                        let source = format!("{}{}\n{}\n", settings.header_prelude, c.context_preamble, c.formal_text);
                        backend.check(&source, settings.timeout)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("compile worker panicked")).collect()
        });
        for (c, outcome) in chunk.iter().zip(outcomes) {
            match outcome? {
                CompileOutcome::Pass => valid.push(c.clone()),
                CompileOutcome::Fail(d) => {
                    rejected.push(RejectedCandidate { name: c.name.clone(), formal_text: c.formal_text.clone(), diagnostic: d })
                }
                CompileOutcome::Skipped => rejected.push(RejectedCandidate {
                    name: c.name.clone(),
                    formal_text: c.formal_text.clone(),
                    diagnostic: "skipped".into(),
                }),
            }
        }
    }
    Ok((valid, rejected))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TacticAugmentation {
    pub synthesized: Vec<SynthesizedStatement>,
    pub valid: Vec<SynthesizedStatement>,
    pub rejected: Vec<RejectedCandidate>,
    pub sampled: Vec<SynthesizedStatement>,
    /// Theorems in the corpus; the sample size target.
    pub n_original: usize,
}

pub fn tactic_augment(
    index: &CorpusIndex,
    backend: &dyn CompilerBackend,
    settings: &FilterSettings,
    seed: u64,
) -> Result<TacticAugmentation, BackendError> {
    let synthesized = synthesize_corpus(index);
    let (valid, rejected) = compile_filter(&synthesized, backend, settings)?;
    let n_original = index.declarations().values().filter(|d| d.kind == DeclKind::Theorem).count();
    let sampled = dedup_sample(&valid, n_original, seed);
    Ok(TacticAugmentation { synthesized, valid, rejected, sampled, n_original })
}

/// Informal statements for sampled synthesized statements, through the
/// theorem template with the origin file's head statement as context.
pub fn informalize_synthesized(
    sampled: &[SynthesizedStatement],
    index: &CorpusIndex,
    registry: &TemplateRegistry,
    informalizer: &RoleClient,
    max_prompt_chars: usize,
) -> Result<Vec<NLFLPair>, AugmentError> {
    sampled
        .iter()
        .map(|s| {
            let origin = index.get(&s.origin);
            let subject = DeclarationRecord {
                full_name: s.name.clone(),
                kind: DeclKind::Theorem,
                signature: s.formal_text.clone(),
                docstring: None,
                namespace_path: origin.map(|o| o.namespace_path.clone()).unwrap_or_default(),
                file_path: origin.map(|o| o.file_path.clone()).unwrap_or_default(),
                line_span: origin.map_or(LineSpan::new(1, 1), |o| o.line_span),
                dependencies: Default::default(),
                is_tactic_proof: false,
            };
            let head = index.head_statement_for(&subject.file_path).unwrap_or("").to_string();
            let ctx = StatementContext {
                subject,
                head_statements: head,
                dependent_translations: vec![],
                neighbors: vec![],
                retrieved: vec![],
            };
            let (prompt, _) = assemble_statement_prompt_within(&ctx, registry, max_prompt_chars)?;
            let informal = informalizer.ask(&prompt.text)?;
            Ok(NLFLPair {
                id: s.name.clone(),
                formal_text: s.formal_text.clone(),
                informal_text: informal.trim().to_string(),
                direction: Direction::NlToFl,
                provenance: Provenance::TacticAug,
                source_name: Some(s.origin.clone()),
                level: None,
                kind: Some(DeclKind::Theorem),
                record_type: RecordType::Statement,
            })
        })
        .collect()
}

/// One call per strategy; identical or empty outputs are dropped and counted.
pub fn informal_variants(
    pair: &NLFLPair,
    strategies: &[AugmentationStrategy],
    informalizer: &RoleClient,
    tally: &mut VariantTally,
) -> Result<Vec<NLVariant>, GatewayError> {
    let mut out = Vec::new();
    for &strategy in strategies {
        let answer = informalizer.ask(&variant_prompt(strategy, &pair.informal_text))?;
        let kept = accept_variant(&pair.id, strategy, &pair.informal_text, &answer);
        tally.record(kept.is_some());
        out.extend(kept);
    }
    Ok(out)
}

/// Dataset record for a kept variant: the original formal text with the
/// rewritten informal text.
pub fn variant_pair(origin: &NLFLPair, v: &NLVariant) -> NLFLPair {
    NLFLPair {
        id: format!("{}~{}", origin.id, v.strategy.tag()),
        formal_text: origin.formal_text.clone(),
        informal_text: v.informal_text.clone(),
        direction: Direction::NlToFl,
        provenance: Provenance::InformalAug,
        source_name: origin.source_name.clone(),
        level: origin.level,
        kind: origin.kind,
        record_type: RecordType::Statement,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::MockBackend;
    use crate::gateway::{Gateway, GatewayConfig, MockBehaviour, MockProvider};
    use herald_core::corpus::{Hypothesis, ProofState, ProofStep};
    use std::collections::BTreeMap;
    use std::sync::Arc;

    fn informalizer() -> RoleClient {
        let g = Gateway::new(Arc::new(MockProvider::new("i", MockBehaviour::Informalizer, 0)), GatewayConfig::default());
        RoleClient { role: "informalizer".into(), gateway: Arc::new(g), model_id: "m".into(), temperature: 1.0, max_output_tokens: 64 }
    }

    fn settings() -> FilterSettings {
        FilterSettings { header_prelude: "import Mathlib\n".into(), timeout: Duration::from_secs(5), parallelism: 3 }
    }

    fn state(goals: &[&str]) -> ProofState {
        ProofState {
            hypotheses: vec![Hypothesis::new("p", "Prop"), Hypothesis::new("h", "p")],
            goals: goals.iter().map(|g| g.to_string()).collect(),
        }
    }

    fn corpus() -> CorpusIndex {
        let decl = DeclarationRecord {
            full_name: "Demo.t".into(),
            kind: DeclKind::Theorem,
            signature: "theorem Demo.t (p : Prop) (h : p) : p ∧ p".into(),
            docstring: None,
            namespace_path: vec!["Demo".into()],
            file_path: "Demo.lean".into(),
            line_span: LineSpan::new(1, 3),
            dependencies: Default::default(),
            is_tactic_proof: true,
        };
        let steps = vec![
            ProofStep { tactic_text: "constructor".into(), state_before: state(&["p ∧ p"]), state_after: state(&["p", "p"]), step_index: 0 },
            ProofStep { tactic_text: "exact h".into(), state_before: state(&["p", ""]), state_after: state(&["p"]), step_index: 1 },
            ProofStep { tactic_text: "exact h".into(), state_before: state(&["p"]), state_after: state(&[]), step_index: 2 },
        ];
        let proofs = [("Demo.t".to_string(), steps)].into_iter().collect();
        CorpusIndex::build(vec![decl], proofs, BTreeMap::new()).unwrap().0
    }

    #[test]
    fn synthesize_filter_sample() {
        let index = corpus();
        let aug = tactic_augment(&index, &MockBackend::new(), &settings(), 7).unwrap();
        assert_eq!(aug.synthesized.len(), 4);
        assert_eq!(aug.synthesized[0].name, "Demo.t_tac_0");
        assert_eq!(aug.synthesized[0].context_preamble, "open Demo\n");
        // the empty goal yields a statement with no type
        assert_eq!(aug.rejected.len(), 1);
        assert_eq!(aug.rejected[0].name, "Demo.t_tac_1_g1");
        assert!(!aug.rejected[0].diagnostic.is_empty());
        assert_eq!(aug.valid.len() + aug.rejected.len(), aug.synthesized.len());
        assert_eq!(aug.sampled.len(), 1);
        assert_eq!(aug.sampled, tactic_augment(&index, &MockBackend::new(), &settings(), 7).unwrap().sampled);
    }

    #[test]
    fn empty_filter_and_outage() {
        assert_eq!(compile_filter(&[], &MockBackend::new(), &settings()).unwrap(), (vec![], vec![]));
        let aug = synthesize_corpus(&corpus());
        assert!(compile_filter(&aug, &MockBackend::unavailable(), &settings()).is_err());
    }

    #[test]
    fn tactic_pairs_and_variants() {
        let index = corpus();
        let reg: TemplateRegistry = serde_json::from_str(crate::config::DEFAULT_TEMPLATES).unwrap();
        let aug = tactic_augment(&index, &MockBackend::new(), &settings(), 1).unwrap();
        let pairs = informalize_synthesized(&aug.sampled, &index, &reg, &informalizer(), 10_000).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].provenance, Provenance::TacticAug);
        assert!(pairs[0].informal_text.contains(&aug.sampled[0].formal_text));

        let mut tally = VariantTally::default();
        let vs = informal_variants(&pairs[0], &AugmentationStrategy::ALL, &informalizer(), &mut tally).unwrap();
        assert_eq!((tally.attempted, tally.kept, tally.dropped), (6, 6, 0));
        assert!(vs[3].informal_text.starts_with("[multi_linguistic_translation:zh]"));
        let vp = variant_pair(&pairs[0], &vs[0]);
        assert_eq!(vp.id, format!("{}~logical_equivalence_rewriting", pairs[0].id));
        assert_eq!(vp.provenance, Provenance::InformalAug);
    }
}
