//! Normalized corpus records: declarations, tactic proof steps and the
//! immutable [`CorpusIndex`] they live in.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The eight declaration kinds the pipeline distinguishes. Anything else in
/// an input is rejected rather than coerced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DeclKind {
    Theorem,
    Instance,
    Definition,
    Structure,
    Class,
    Inductive,
    ClassInductive,
    Opaque,
}

impl DeclKind {
    pub const ALL: [DeclKind; 8] = [
        DeclKind::Theorem,
        DeclKind::Instance,
        DeclKind::Definition,
        DeclKind::Structure,
        DeclKind::Class,
        DeclKind::Inductive,
        DeclKind::ClassInductive,
        DeclKind::Opaque,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DeclKind::Theorem => "theorem",
            DeclKind::Instance => "instance",
            DeclKind::Definition => "definition",
            DeclKind::Structure => "structure",
            DeclKind::Class => "class",
            DeclKind::Inductive => "inductive",
            DeclKind::ClassInductive => "classInductive",
            DeclKind::Opaque => "opaque",
        }
    }

    pub fn parse(name: &str) -> Option<DeclKind> {
        DeclKind::ALL.into_iter().find(|k| k.as_str() == name)
    }

    /// Only theorems and instances carry tactic proofs in the index.
    pub fn has_proof(self) -> bool {
        matches!(self, DeclKind::Theorem | DeclKind::Instance)
    }
}

impl fmt::Display for DeclKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineSpan {
    pub start: u32,
    pub end: u32,
}

impl LineSpan {
    pub fn new(start: u32, end: u32) -> Self {
        LineSpan { start, end }
    }

    pub fn is_valid(self) -> bool {
        self.start >= 1 && self.start <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclarationRecord {
    pub full_name: String,
    pub kind: DeclKind,
    pub signature: String,
    #[serde(default)]
    pub docstring: Option<String>,
    pub namespace_path: Vec<String>,
    pub file_path: String,
    pub line_span: LineSpan,
    pub dependencies: BTreeSet<String>,
    pub is_tactic_proof: bool,
}

impl DeclarationRecord {
    /// Dot-separated components of the full name.
    pub fn name_components(&self) -> Vec<&str> {
        self.full_name.split('.').collect()
    }
}

/// One local hypothesis, serialized as a `[name, type]` pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(String, String)", into = "(String, String)")]
pub struct Hypothesis {
    pub name: String,
    pub type_expr: String,
}

impl Hypothesis {
    pub fn new(name: impl Into<String>, type_expr: impl Into<String>) -> Self {
        Hypothesis { name: name.into(), type_expr: type_expr.into() }
    }
}

impl From<(String, String)> for Hypothesis {
    fn from((name, type_expr): (String, String)) -> Self {
        Hypothesis { name, type_expr }
    }
}

impl From<Hypothesis> for (String, String) {
    fn from(h: Hypothesis) -> Self {
        (h.name, h.type_expr)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProofState {
    pub hypotheses: Vec<Hypothesis>,
    pub goals: Vec<String>,
}

impl ProofState {
    pub fn is_closed(&self) -> bool {
        self.goals.is_empty()
    }

    fn duplicate_hypothesis(&self) -> Option<&str> {
        let mut seen = BTreeSet::new();
        self.hypotheses
            .iter()
            .find(|h| !seen.insert(h.name.as_str()))
            .map(|h| h.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProofStep {
    pub tactic_text: String,
    pub state_before: ProofState,
    pub state_after: ProofState,
    pub step_index: u32,
}

impl ProofStep {
    /// Leading tactic keyword, with focusing bullets and `?`/`!` variants
    /// stripped: `"· simp only [foo]"` gives `"simp"`.
    pub fn tactic_name(&self) -> &str {
        tactic_name(&self.tactic_text)
    }
}

pub fn tactic_name(tactic_text: &str) -> &str {
    let trimmed = tactic_text.trim_start_matches(|c: char| c.is_whitespace() || c == '·' || c == '.');
    let end = trimmed
        .find(|c: char| c.is_whitespace() || matches!(c, '[' | '(' | '{' | ';' | '<'))
        .unwrap_or(trimmed.len());
    trimmed[..end].trim_end_matches(['?', '!'])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum CorpusWarning {
    /// A dependency names a declaration outside the index. Kept on the record.
    DanglingDependency { declaration: String, dependency: String },
}

impl fmt::Display for CorpusWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusWarning::DanglingDependency { declaration, dependency } => {
                write!(f, "{declaration}: dependency `{dependency}` is not in the corpus")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("declaration `{0}` appears more than once")]
    DuplicateDeclaration(String),
    #[error("declaration `{0}` lists itself as a dependency")]
    SelfDependency(String),
    #[error("declaration `{name}` has an invalid line span {start}..{end}")]
    InvalidLineSpan { name: String, start: u32, end: u32 },
    #[error("proof attached to unknown declaration `{0}`")]
    UnknownProofOwner(String),
    #[error("proof attached to `{name}`, which is a {kind} (only theorems and instances carry proofs)")]
    ProofOnNonTheorem { name: String, kind: DeclKind },
    #[error("proof of `{name}`: step indices must run 0,1,2,… (found {found} at position {position})")]
    NonContiguousSteps { name: String, position: usize, found: u32 },
    #[error("proof of `{name}`, step {step}: hypothesis `{hypothesis}` is bound twice")]
    DuplicateHypothesis { name: String, step: u32, hypothesis: String },
    #[error("unknown declaration `{0}`")]
    UnknownDeclaration(String),
    #[error("neighbour limit must be at least 1")]
    ZeroLimit,
}

/// Immutable, validated corpus. Construct with [`CorpusIndex::build`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorpusIndex {
    declarations: BTreeMap<String, DeclarationRecord>,
    proofs: BTreeMap<String, Vec<ProofStep>>,
    head_statements: BTreeMap<String, String>,
}

impl CorpusIndex {
    /// Validates every index invariant. Dangling dependencies are reported as
    /// warnings, everything else is an error.
    pub fn build(
        declarations: Vec<DeclarationRecord>,
        proofs: BTreeMap<String, Vec<ProofStep>>,
        head_statements: BTreeMap<String, String>,
    ) -> Result<(CorpusIndex, Vec<CorpusWarning>), CorpusError> {
        let mut by_name = BTreeMap::new();
        for decl in declarations {
            if decl.dependencies.contains(&decl.full_name) {
                return Err(CorpusError::SelfDependency(decl.full_name));
            }
            if !decl.line_span.is_valid() {
                return Err(CorpusError::InvalidLineSpan {
                    name: decl.full_name,
                    start: decl.line_span.start,
                    end: decl.line_span.end,
                });
            }
            if by_name.contains_key(&decl.full_name) {
                return Err(CorpusError::DuplicateDeclaration(decl.full_name));
            }
            by_name.insert(decl.full_name.clone(), decl);
        }

        for (name, steps) in &proofs {
            let owner = by_name
                .get(name)
                .ok_or_else(|| CorpusError::UnknownProofOwner(name.clone()))?;
            if !owner.kind.has_proof() {
                return Err(CorpusError::ProofOnNonTheorem { name: name.clone(), kind: owner.kind });
            }
            for (position, step) in steps.iter().enumerate() {
                if step.step_index as usize != position {
                    return Err(CorpusError::NonContiguousSteps {
                        name: name.clone(),
                        position,
                        found: step.step_index,
                    });
                }
                for state in [&step.state_before, &step.state_after] {
                    if let Some(hyp) = state.duplicate_hypothesis() {
                        return Err(CorpusError::DuplicateHypothesis {
                            name: name.clone(),
                            step: step.step_index,
                            hypothesis: hyp.to_string(),
                        });
                    }
                }
            }
        }

        let mut warnings = Vec::new();
        for decl in by_name.values() {
            for dep in &decl.dependencies {
                if !by_name.contains_key(dep) {
                    warnings.push(CorpusWarning::DanglingDependency {
                        declaration: decl.full_name.clone(),
                        dependency: dep.clone(),
                    });
                }
            }
        }

        Ok((CorpusIndex { declarations: by_name, proofs, head_statements }, warnings))
    }

    pub fn declarations(&self) -> &BTreeMap<String, DeclarationRecord> {
        &self.declarations
    }

    pub fn proofs(&self) -> &BTreeMap<String, Vec<ProofStep>> {
        &self.proofs
    }

    pub fn head_statements(&self) -> &BTreeMap<String, String> {
        &self.head_statements
    }

    pub fn get(&self, full_name: &str) -> Option<&DeclarationRecord> {
        self.declarations.get(full_name)
    }

    pub fn proof_of(&self, full_name: &str) -> Option<&[ProofStep]> {
        self.proofs.get(full_name).map(Vec::as_slice)
    }

    pub fn head_statement_for(&self, file_path: &str) -> Option<&str> {
        self.head_statements.get(file_path).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.declarations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.declarations.is_empty()
    }

    /// Tactic proofs eligible for proof informalization and augmentation.
    pub fn tactic_proofs(&self) -> impl Iterator<Item = (&DeclarationRecord, &[ProofStep])> {
        self.proofs.iter().filter_map(|(name, steps)| {
            let decl = &self.declarations[name];
            (decl.is_tactic_proof && !steps.is_empty()).then_some((decl, steps.as_slice()))
        })
    }

    /// Neighbour statements of `subject`. See [`NeighborSet`] for the ordering
    /// rules.
    pub fn resolve_neighbors(&self, subject: &str, limit: usize) -> Result<NeighborSet, CorpusError> {
        if limit == 0 {
            return Err(CorpusError::ZeroLimit);
        }
        let me = self
            .declarations
            .get(subject)
            .ok_or_else(|| CorpusError::UnknownDeclaration(subject.to_string()))?;
        let others = || self.declarations.values().filter(|d| d.full_name != me.full_name);

        let mut same_namespace: Vec<&str> = if me.namespace_path.is_empty() {
            Vec::new()
        } else {
            others()
                .filter(|d| d.namespace_path == me.namespace_path)
                .map(|d| d.full_name.as_str())
                .collect()
        };
        same_namespace.truncate(limit);

        let mut same_file: Vec<&DeclarationRecord> =
            others().filter(|d| d.file_path == me.file_path).collect();
        same_file.sort_by(|a, b| {
            let da = a.line_span.start.abs_diff(me.line_span.start);
            let db = b.line_span.start.abs_diff(me.line_span.start);
            da.cmp(&db).then_with(|| a.full_name.cmp(&b.full_name))
        });
        same_file.truncate(limit);

        let mine = me.name_components();
        let mut name_prefix_shared = Vec::new();
        for width in (1..mine.len()).rev() {
            let prefix = &mine[..width];
            let matches: Vec<&str> = others()
                .filter(|d| {
                    let theirs = d.name_components();
                    theirs.len() > width && theirs[..width] == *prefix
                })
                .map(|d| d.full_name.as_str())
                .collect();
            if !matches.is_empty() {
                name_prefix_shared = matches;
                break;
            }
        }
        name_prefix_shared.truncate(limit);

        let owned = |v: Vec<&str>| v.into_iter().map(String::from).collect();
        Ok(NeighborSet {
            same_namespace: owned(same_namespace),
            same_file: same_file.into_iter().map(|d| d.full_name.clone()).collect(),
            name_prefix_shared: owned(name_prefix_shared),
        })
    }
}

/// Declarations related to a subject by namespace, file or name prefix.
///
/// `same_file` is ordered by line distance from the subject, then name; the
/// other two lists are in name order. `name_prefix_shared` uses the longest
/// proper dot-prefix of the subject's name that at least one other
/// declaration extends.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NeighborSet {
    pub same_namespace: Vec<String>,
    pub same_file: Vec<String>,
    pub name_prefix_shared: Vec<String>,
}

impl NeighborSet {
    /// All distinct names across the three lists, in first-seen order.
    pub fn distinct(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.same_namespace
            .iter()
            .chain(&self.same_file)
            .chain(&self.name_prefix_shared)
            .map(String::as_str)
            .filter(|n| seen.insert(*n))
            .collect()
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use alloc::vec;

    #[test]
    fn duplicate_names_rejected() {
        let err = CorpusIndex::build(
            vec![decl("A.b", "f", 1, &[]), decl("A.b", "g", 3, &[])],
            BTreeMap::new(),
            BTreeMap::new(),
        )
        .unwrap_err();
        assert_eq!(err, CorpusError::DuplicateDeclaration("A.b".into()));
    }

    #[test]
    fn dangling_dependencies_are_warnings() {
        let (index, warnings) = CorpusIndex::build(
            vec![decl("A", "f", 1, &["Mathlib.missing"]), decl("B", "f", 4, &["A"])],
            BTreeMap::new(),
            BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(index.len(), 2);
        assert_eq!(warnings.len(), 1);
        assert!(index.get("A").unwrap().dependencies.contains("Mathlib.missing"));
    }

    #[test]
    fn self_dependency_rejected() {
        let err = CorpusIndex::build(vec![decl("A", "f", 1, &["A"])], BTreeMap::new(), BTreeMap::new())
            .unwrap_err();
        assert_eq!(err, CorpusError::SelfDependency("A".into()));
    }

    #[test]
    fn proof_invariants() {
        let mut d = decl("A", "f", 1, &[]);
        d.kind = DeclKind::Definition;
        let mut proofs = BTreeMap::new();
        proofs.insert("A".to_string(), vec![step(0)]);
        assert!(matches!(
            CorpusIndex::build(vec![d.clone()], proofs.clone(), BTreeMap::new()),
            Err(CorpusError::ProofOnNonTheorem { .. })
        ));

        d.kind = DeclKind::Theorem;
        proofs.insert("A".to_string(), vec![step(0), step(2)]);
        assert!(matches!(
            CorpusIndex::build(vec![d.clone()], proofs.clone(), BTreeMap::new()),
            Err(CorpusError::NonContiguousSteps { position: 1, found: 2, .. })
        ));

        let mut bad = step(0);
        bad.state_before.hypotheses = vec![Hypothesis::new("h", "p"), Hypothesis::new("h", "q")];
        proofs.insert("A".to_string(), vec![bad]);
        assert!(matches!(
            CorpusIndex::build(vec![d], proofs, BTreeMap::new()),
            Err(CorpusError::DuplicateHypothesis { .. })
        ));
    }

    #[test]
    fn neighbors_of_two_siblings() {
        let index = index(vec![decl("A.b", "F.lean", 1, &[]), decl("A.c", "F.lean", 5, &[])]);
        let n = index.resolve_neighbors("A.b", 5).unwrap();
        assert_eq!(n.same_namespace, vec!["A.c"]);
        assert_eq!(n.same_file, vec!["A.c"]);
        assert_eq!(n.name_prefix_shared, vec!["A.c"]);
    }

    #[test]
    fn root_namespace_has_no_namespace_siblings() {
        let index = index(vec![decl("foo", "F.lean", 1, &[]), decl("bar", "G.lean", 5, &[])]);
        let n = index.resolve_neighbors("foo", 5).unwrap();
        assert!(n.same_namespace.is_empty());
        assert!(n.same_file.is_empty());
        assert!(n.name_prefix_shared.is_empty());
    }

    #[test]
    fn prefix_falls_back_to_shorter_prefix() {
        let index = index(vec![
            decl("A.B.c", "F.lean", 1, &[]),
            decl("A.d", "G.lean", 1, &[]),
            decl("A.B", "G.lean", 9, &[]),
        ]);
        let n = index.resolve_neighbors("A.B.c", 5).unwrap();
        // nothing else extends `A.B.`, so the shared prefix is `A.`
        assert_eq!(n.name_prefix_shared, vec!["A.B", "A.d"]);
    }

    #[test]
    fn same_file_ordered_by_line_distance() {
        let index = index(vec![
            decl("s", "F.lean", 50, &[]),
            decl("far", "F.lean", 1, &[]),
            decl("near", "F.lean", 60, &[]),
            decl("b_tie", "F.lean", 40, &[]),
            decl("a_tie", "F.lean", 40, &[]),
        ]);
        let n = index.resolve_neighbors("s", 3).unwrap();
        assert_eq!(n.same_file, vec!["a_tie", "b_tie", "near"]);
    }

    #[test]
    fn unknown_subject_and_zero_limit() {
        let index = index(vec![decl("A", "F", 1, &[])]);
        assert_eq!(
            index.resolve_neighbors("B", 1).unwrap_err(),
            CorpusError::UnknownDeclaration("B".into())
        );
        assert_eq!(index.resolve_neighbors("A", 0).unwrap_err(), CorpusError::ZeroLimit);
    }

    #[test]
    fn tactic_names() {
        assert_eq!(tactic_name("rw [foo]"), "rw");
        assert_eq!(tactic_name("  · simp only [a]"), "simp");
        assert_eq!(tactic_name("simp?"), "simp");
        assert_eq!(tactic_name("exact mod_cast Or.inr hp"), "exact");
        assert_eq!(tactic_name("norm_num"), "norm_num");
    }

    #[test]
    fn unknown_kind_is_rejected_by_serde() {
        let err = serde_json::from_str::<DeclKind>("\"axiom\"").unwrap_err();
        assert!(err.to_string().contains("axiom"));
        assert_eq!(serde_json::from_str::<DeclKind>("\"classInductive\"").unwrap(), DeclKind::ClassInductive);
    }
}
