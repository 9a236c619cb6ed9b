//! Augmentation: standalone statements from intermediate proof states,
//! seeded deduplication sampling, and the informal rewriting strategies.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ProofState;
use crate::text::{collapse_whitespace, normalize_for_comparison};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesizedStatement {
    pub name: String,
    pub formal_text: String,
    pub origin: String,
    pub origin_step: u32,
    pub goal_index: u32,
    /// Lines to place before the statement when compiling it outside its
    /// origin file (imports and `open`s).
    #[serde(default)]
    pub context_preamble: String,
}

fn is_inaccessible(name: &str) -> bool {
    name.is_empty() || name == "_" || name.contains('✝')
}

fn bracketed(type_expr: &str) -> Option<&str> {
    let t = type_expr.trim();
    t.strip_prefix('[').and_then(|r| r.strip_suffix(']')).map(str::trim)
}

/// Instance binders come from `inst✝`-style names or from types already
/// written in square brackets.
fn binder(name: &str, type_expr: &str, fresh: &mut impl FnMut() -> String) -> String {
    let ty = collapse_whitespace(type_expr);
    if let Some(inner) = bracketed(&ty) {
        return alloc::format!("[{inner}]");
    }
    if name.starts_with("inst") && is_inaccessible(name) {
        return alloc::format!("[{ty}]");
    }
    let name = if is_inaccessible(name) { fresh() } else { name.to_string() };
    alloc::format!("({name} : {ty})")
}

/// One `theorem … := by sorry` per open goal of `state`. Hypotheses become
/// binders in order; nothing else is inferred.
pub fn synthesize_from_state(state: &ProofState, origin: &str, step: u32) -> Vec<SynthesizedStatement> {
    let taken: BTreeSet<&str> = state.hypotheses.iter().map(|h| h.name.as_str()).collect();
    let mut counter = 0usize;
    let mut fresh = || loop {
        counter += 1;
        let candidate = alloc::format!("h{counter}");
        if !taken.contains(candidate.as_str()) {
            return candidate;
        }
    };
    let binders: Vec<String> = state.hypotheses.iter().map(|h| binder(&h.name, &h.type_expr, &mut fresh)).collect();
    let base = alloc::format!("{origin}_tac_{step}");

    state
        .goals
        .iter()
        .enumerate()
        .map(|(i, goal)| {
            let name = if i == 0 { base.clone() } else { alloc::format!("{base}_g{i}") };
            let mut text = alloc::format!("theorem {name}");
            for b in &binders {
                text.push(' ');
                text.push_str(b);
            }
            text.push_str(" : ");
            text.push_str(&collapse_whitespace(goal));
            text.push_str(" := by sorry");
            SynthesizedStatement {
                name,
                formal_text: text,
                origin: origin.into(),
                origin_step: step,
                goal_index: i as u32,
                context_preamble: String::new(),
            }
        })
        .collect()
}

/// Uniform sample without replacement of `min(n_original, len)` items,
/// deterministic in `seed`, keeping input order.
pub fn dedup_sample<T: Clone>(augmented: &[T], n_original: usize, seed: u64) -> Vec<T> {
    let n = n_original.min(augmented.len());
    if n == augmented.len() {
        return augmented.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, augmented.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| augmented[i].clone()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Language {
    Zh,
    Fr,
    Ru,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::Zh => "zh",
            Language::Fr => "fr",
            Language::Ru => "ru",
        }
    }

    fn english_name(self) -> &'static str {
        match self {
            Language::Zh => "Chinese",
            Language::Fr => "French",
            Language::Ru => "Russian",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown augmentation strategy `{0}`")]
pub struct UnknownStrategy(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AugmentationStrategy {
    LogicalEquivalenceRewriting,
    AbstractConceptSubstitution,
    OmissionOfImplicitCondition,
    MultiLinguisticTranslation(Language),
}

impl AugmentationStrategy {
    pub const ALL: [AugmentationStrategy; 6] = [
        AugmentationStrategy::LogicalEquivalenceRewriting,
        AugmentationStrategy::AbstractConceptSubstitution,
        AugmentationStrategy::OmissionOfImplicitCondition,
        AugmentationStrategy::MultiLinguisticTranslation(Language::Zh),
        AugmentationStrategy::MultiLinguisticTranslation(Language::Fr),
        AugmentationStrategy::MultiLinguisticTranslation(Language::Ru),
    ];

    pub fn tag(self) -> String {
        match self {
            AugmentationStrategy::LogicalEquivalenceRewriting => "logical_equivalence_rewriting".into(),
            AugmentationStrategy::AbstractConceptSubstitution => "abstract_concept_substitution".into(),
            AugmentationStrategy::OmissionOfImplicitCondition => "omission_of_implicit_condition".into(),
            AugmentationStrategy::MultiLinguisticTranslation(l) => {
                alloc::format!("multi_linguistic_translation:{}", l.as_str())
            }
        }
    }

    /// Instruction and worked example for the strategy.
    fn guidance(self) -> (String, &'static str, &'static str) {
        match self {
            AugmentationStrategy::LogicalEquivalenceRewriting => (
                "Rewrite the statement into a logically equivalent form with different phrasing or structure.".into(),
                "If A, then B.",
                "B holds given A.",
            ),
            AugmentationStrategy::AbstractConceptSubstitution => (
                "Replace a concept with an equivalent characterisation of it.".into(),
                "Let A be an invertible matrix. Then the determinant of A is nonzero.",
                "Let A be a non-degenerate matrix. Then the determinant of A is nonzero.",
            ),
            AugmentationStrategy::OmissionOfImplicitCondition => (
                "Leave out a condition that a mathematician would consider implied by context.".into(),
                "Let x be a real number with x > 0. Then the square root of x squared equals x.",
                "For positive x, the square root of x squared equals x.",
            ),
            AugmentationStrategy::MultiLinguisticTranslation(l) => (
                alloc::format!("Translate the statement into {}, keeping all formulas unchanged.", l.english_name()),
                "If A, then B.",
                "",
            ),
        }
    }
}

impl fmt::Display for AugmentationStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

impl FromStr for AugmentationStrategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AugmentationStrategy::ALL
            .into_iter()
            .find(|a| a.tag() == s)
            .ok_or_else(|| UnknownStrategy(s.into()))
    }
}

impl Serialize for AugmentationStrategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.tag())
    }
}

impl<'de> Deserialize<'de> for AugmentationStrategy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Marks the start of the text to rewrite inside a variant prompt.
pub const VARIANT_INPUT_MARKER: &str = "### Statement\n";

pub fn variant_prompt(strategy: AugmentationStrategy, informal_text: &str) -> String {
    let (instruction, before, after) = strategy.guidance();
    let mut out = alloc::format!("Strategy: {}\n{instruction}\n", strategy.tag());
    if !after.is_empty() {
        out.push_str(&alloc::format!("Example: \"{before}\" becomes \"{after}\"\n"));
    }
    out.push_str("Answer with the rewritten statement only.\n\n");
    out.push_str(VARIANT_INPUT_MARKER);
    out.push_str(informal_text.trim());
    out.push('\n');
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NLVariant {
    pub origin_pair_id: String,
    pub strategy: AugmentationStrategy,
    pub informal_text: String,
}

/// `Some` when the model output is non-empty and differs from the source
/// after whitespace and case normalisation.
pub fn accept_variant(origin_pair_id: &str, strategy: AugmentationStrategy, source: &str, output: &str) -> Option<NLVariant> {
    let out = output.trim();
    if out.is_empty() || normalize_for_comparison(out) == normalize_for_comparison(source) {
        return None;
    }
    Some(NLVariant { origin_pair_id: origin_pair_id.into(), strategy, informal_text: out.into() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VariantTally {
    pub attempted: usize,
    pub kept: usize,
    pub dropped: usize,
}

impl VariantTally {
    pub fn record(&mut self, kept: bool) {
        self.attempted += 1;
        if kept {
            self.kept += 1;
        } else {
            self.dropped += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DeclKind, Hypothesis};
    use crate::scan::scan_declarations;
    use alloc::vec;
    use proptest::prelude::*;

    fn state(hyps: &[(&str, &str)], goals: &[&str]) -> ProofState {
        ProofState {
            hypotheses: hyps.iter().map(|(n, t)| Hypothesis::new(*n, *t)).collect(),
            goals: goals.iter().map(|g| g.to_string()).collect(),
        }
    }

    #[test]
    fn running_example() {
        let s = state(&[("p", "Prop"), ("q", "Prop"), ("r", "Prop"), ("h", "p ∧ q ∧ r")], &["q ∧ p ∧ r"]);
        let out = synthesize_from_state(&s, "ex", 0);
        assert_eq!(out.len(), 1);
        assert_eq!(
            out[0].formal_text,
            "theorem ex_tac_0 (p : Prop) (q : Prop) (r : Prop) (h : p ∧ q ∧ r) : q ∧ p ∧ r := by sorry"
        );
        assert_eq!(out[0].name, "ex_tac_0");
    }

    #[test]
    fn closed_and_multi_goal() {
        assert!(synthesize_from_state(&state(&[("p", "Prop")], &[]), "ex", 3).is_empty());
        let out = synthesize_from_state(&state(&[], &["a = a", "b = b"]), "N.x", 4);
        assert_eq!(out.iter().map(|s| s.goal_index).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(out[0].name, "N.x_tac_4");
        assert_eq!(out[1].name, "N.x_tac_4_g1");
    }

    #[test]
    fn instance_and_anonymous_binders() {
        let s = state(
            &[("F", "Type u_1"), ("inst✝", "Field F"), ("x✝", "F"), ("h1", "x = x"), ("_", "[Fintype F]")],
            &["True"],
        );
        let text = &synthesize_from_state(&s, "o", 0)[0].formal_text;
        assert_eq!(text, "theorem o_tac_0 (F : Type u_1) [Field F] (h2 : F) (h1 : x = x) [Fintype F] : True := by sorry");
    }

    #[test]
    fn dedup_sizes_and_determinism() {
        let items: Vec<u32> = (0..10).collect();
        assert_eq!(dedup_sample(&items, 10, 1), items);
        assert_eq!(dedup_sample(&items, 50, 1), items);
        let items: Vec<u32> = (0..100).collect();
        let a = dedup_sample(&items, 20, 7);
        assert_eq!(a, dedup_sample(&items, 20, 7));
        assert_eq!(a.len(), 20);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(dedup_sample::<u32>(&[], 5, 0).is_empty());
    }

    // Per-item inclusion counts over many seeds follow Binomial(seeds, n/pool).
    // A chi-square over all items checks uniformity as a whole.
    #[test]
    fn dedup_inclusion_is_uniform_in_aggregate() {
        let pool: Vec<usize> = (0..200).collect();
        let (n, seeds) = (50usize, 2000u64);
        let mut counts = vec![0u32; pool.len()];
        for seed in 0..seeds {
            for i in dedup_sample(&pool, n, seed) {
                counts[i] += 1;
            }
        }
        let expect = seeds as f64 * n as f64 / pool.len() as f64;
        let var = expect * (1.0 - n as f64 / pool.len() as f64);
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect) * (c as f64 - expect) / var).sum();
        // 199 degrees of freedom; 0.999 quantile is about 267
        assert!(chi2 < 267.0, "chi2 = {chi2}");
    }

    #[test]
    fn strategy_tags_round_trip() {
        for s in AugmentationStrategy::ALL {
            assert_eq!(s.tag().parse::<AugmentationStrategy>().unwrap(), s);
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(serde_json::from_str::<AugmentationStrategy>(&json).unwrap(), s);
        }
        assert!("multi_linguistic_translation:de".parse::<AugmentationStrategy>().is_err());
    }

    #[test]
    fn variant_prompts_carry_exemplars() {
        let p = variant_prompt(AugmentationStrategy::LogicalEquivalenceRewriting, "If A, then B.");
        assert!(p.contains("B holds given A"));
        assert!(p.ends_with("### Statement\nIf A, then B.\n"));
        let p = variant_prompt(AugmentationStrategy::AbstractConceptSubstitution, "x");
        assert!(p.contains("non-degenerate"));
        assert!(variant_prompt(AugmentationStrategy::MultiLinguisticTranslation(Language::Ru), "x").contains("Russian"));
    }

    #[test]
    fn variant_non_identity() {
        let s = AugmentationStrategy::LogicalEquivalenceRewriting;
        assert!(accept_variant("p", s, "If A, then B.", "  if a,   THEN b. ").is_none());
        assert!(accept_variant("p", s, "If A, then B.", "").is_none());
        let v = accept_variant("p", s, "If A, then B.", "B holds given A.").unwrap();
        assert_eq!(v.strategy, s);
    }

    fn ident() -> impl Strategy<Value = String> {
        "[a-z][a-z0-9]{0,5}".prop_filter("not a keyword", |s| !matches!(s.as_str(), "by" | "at" | "fun" | "do" | "in" | "if" | "then" | "else" | "let" | "have" | "show" | "from"))
    }

    fn type_expr() -> impl Strategy<Value = String> {
        prop_oneof![
            Just("Prop".to_string()),
            Just("ℕ".to_string()),
            Just("Type u_1".to_string()),
            Just("[Field F]".to_string()),
            (ident(), ident()).prop_map(|(a, b)| alloc::format!("{a} ∧ {b}")),
            (ident(), ident()).prop_map(|(a, b)| alloc::format!("f ({a} + {b}) = {b}")),
        ]
    }

    proptest! {
        #[test]
        fn synthesized_statements_rescan_as_one_theorem(
            hyps in proptest::collection::btree_map(ident(), type_expr(), 0..6),
            goals in proptest::collection::vec(type_expr(), 1..3),
            step in 0u32..500,
        ) {
            let s = ProofState {
                hypotheses: hyps.iter().map(|(n, t)| Hypothesis::new(n.clone(), t.clone())).collect(),
                goals,
            };
            let out = synthesize_from_state(&s, "Orig.thm", step);
            prop_assert_eq!(out.len(), s.goals.len());
            let names: BTreeSet<&str> = out.iter().map(|o| o.name.as_str()).collect();
            prop_assert_eq!(names.len(), out.len());
            for o in &out {
                prop_assert!(o.formal_text.ends_with("by sorry"));
                let recs = scan_declarations(&o.formal_text);
                prop_assert_eq!(recs.len(), 1);
                prop_assert_eq!(recs[0].kind, DeclKind::Theorem);
                prop_assert_eq!(&recs[0].full_name, &o.name);
                // binders appear in hypothesis order
                let mut cursor = 0;
                for h in &s.hypotheses {
                    let b = binder(&h.name, &h.type_expr, &mut || -> String { unreachable!() });
                    let at = o.formal_text[cursor..].find(&b);
                    prop_assert!(at.is_some(), "{} missing from {}", b, o.formal_text);
                    cursor += at.unwrap() + b.len();
                }
            }
        }

        #[test]
        fn dedup_is_a_subsequence(len in 0usize..200, n in 0usize..250, seed in any::<u64>()) {
            let items: Vec<usize> = (0..len).collect();
            let out = dedup_sample(&items, n, seed);
            prop_assert_eq!(out.len(), n.min(len));
            prop_assert!(out.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(out.iter().all(|&i| i < len));
        }

        #[test]
        fn tally_conserves(outcomes in proptest::collection::vec(any::<bool>(), 0..50)) {
            let mut t = VariantTally::default();
            for k in &outcomes {
                t.record(*k);
            }
            prop_assert_eq!(t.attempted, t.kept + t.dropped);
            prop_assert_eq!(t.attempted, outcomes.len());
        }
    }
}
