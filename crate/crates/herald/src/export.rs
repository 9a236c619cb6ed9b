//! Corpus export format (schema version "1").
//!
//! ```json
//! {
//!   "schema_version": "1",
//!   "declarations": [ { "full_name": "...", "kind": "theorem", ... } ],
//!   "proofs": { "Foo.bar": [ { "tactic_text": "intro h",
//!                              "state_before": { "hypotheses": [["h", "p"]], "goals": ["q"] },
//!                              "state_after":  { "hypotheses": [], "goals": [] } } ] },
//!   "head_statements": { "Foo.lean": "module commentary" }
//! }
//! ```
//!
//! Declaration objects carry exactly the `DeclarationRecord` fields. Proof
//! steps may carry `step_index`; when absent it is the position in the list.

use std::collections::BTreeMap;

use herald_core::corpus::{CorpusError, CorpusIndex, CorpusWarning, DeclarationRecord, ProofState, ProofStep};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EXPORT_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("unsupported schema_version `{0}` (expected \"1\")")]
    Version(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExportStep {
    tactic_text: String,
    state_before: ProofState,
    state_after: ProofState,
    #[serde(default)]
    step_index: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExportDocument {
    schema_version: String,
    declarations: Vec<DeclarationRecord>,
    #[serde(default)]
    proofs: BTreeMap<String, Vec<ExportStep>>,
    #[serde(default)]
    head_statements: BTreeMap<String, String>,
}

/// Parses an export into an index plus warnings for dependencies that point
/// outside the export.
pub fn parse_jixia_export(raw: &[u8]) -> Result<(CorpusIndex, Vec<CorpusWarning>), ExportError> {
    let de = &mut serde_json::Deserializer::from_slice(raw);
    let doc: ExportDocument = serde_path_to_error::deserialize(de).map_err(|e| ExportError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    if doc.schema_version != EXPORT_SCHEMA_VERSION {
        return Err(ExportError::Version(doc.schema_version));
    }
    let proofs = doc
        .proofs
        .into_iter()
        .map(|(name, steps)| {
            let steps = steps
                .into_iter()
                .enumerate()
                .map(|(i, s)| ProofStep {
                    tactic_text: s.tactic_text,
                    state_before: s.state_before,
                    state_after: s.state_after,
                    step_index: s.step_index.unwrap_or(i as u32),
                })
                .collect();
            (name, steps)
        })
        .collect();
    Ok(CorpusIndex::build(doc.declarations, proofs, doc.head_statements)?)
}

/// Canonical export of an index: declarations in name order, explicit step
/// indices, pretty-printed with a trailing newline.
pub fn serialize_index(index: &CorpusIndex) -> String {
    let doc = ExportDocument {
        schema_version: EXPORT_SCHEMA_VERSION.into(),
        declarations: index.declarations().values().cloned().collect(),
        proofs: index
            .proofs()
            .iter()
            .map(|(name, steps)| {
                let steps = steps
                    .iter()
                    .map(|s| ExportStep {
                        tactic_text: s.tactic_text.clone(),
                        state_before: s.state_before.clone(),
                        state_after: s.state_after.clone(),
                        step_index: Some(s.step_index),
                    })
                    .collect();
                (name.clone(), steps)
            })
            .collect(),
        head_statements: index.head_statements().clone(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("export document serializes");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use herald_core::corpus::{DeclKind, Hypothesis, LineSpan};
    use proptest::prelude::*;

    const TWO: &str = r#"{
      "schema_version": "1",
      "declarations": [
        {"full_name": "A.a", "kind": "theorem", "signature": "theorem A.a : True", "namespace_path": ["A"],
         "file_path": "A.lean", "line_span": {"start": 1, "end": 2}, "dependencies": [], "is_tactic_proof": true},
        {"full_name": "A.b", "kind": "theorem", "signature": "theorem A.b : True", "docstring": "B.",
         "namespace_path": ["A"], "file_path": "A.lean", "line_span": {"start": 4, "end": 5},
         "dependencies": ["A.a", "Mathlib.Missing"], "is_tactic_proof": false}
      ],
      "proofs": {"A.a": [{"tactic_text": "trivial", "state_before": {"hypotheses": [], "goals": ["True"]},
                          "state_after": {"hypotheses": [], "goals": []}}]}
    }"#;

    #[test]
    fn two_theorems() {
        let (idx, warnings) = parse_jixia_export(TWO.as_bytes()).unwrap();
        assert_eq!(idx.len(), 2);
        assert!(idx.get("A.b").unwrap().dependencies.contains("A.a"));
        assert_eq!(warnings.len(), 1);
        assert_eq!(idx.proof_of("A.a").unwrap()[0].step_index, 0);
    }

    #[test]
    fn unknown_kind_names_the_path() {
        let bad = TWO.replacen("\"theorem\"", "\"axiom\"", 1);
        match parse_jixia_export(bad.as_bytes()) {
            Err(ExportError::Schema { path, message }) => {
                assert_eq!(path, "declarations[0].kind");
                assert!(message.contains("axiom"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_field_and_duplicate() {
        let bad = TWO.replacen("\"is_tactic_proof\": true", "\"is_tactic_proo\": true", 1);
        assert!(matches!(parse_jixia_export(bad.as_bytes()), Err(ExportError::Schema { .. })));
        let dup = TWO
            .replace("\"A.b\", \"kind\"", "\"A.a\", \"kind\"")
            .replace("[\"A.a\", \"Mathlib.Missing\"]", "[]");
        let r = parse_jixia_export(dup.as_bytes());
        assert!(matches!(r, Err(ExportError::Corpus(CorpusError::DuplicateDeclaration(_)))), "{r:?}");
        let v2 = TWO.replace("\"schema_version\": \"1\"", "\"schema_version\": \"2\"");
        assert!(matches!(parse_jixia_export(v2.as_bytes()), Err(ExportError::Version(_))));
    }

    #[test]
    fn canonical_round_trip() {
        let (idx, _) = parse_jixia_export(TWO.as_bytes()).unwrap();
        let text = serialize_index(&idx);
        let (again, _) = parse_jixia_export(text.as_bytes()).unwrap();
        assert_eq!(again, idx);
        assert_eq!(serialize_index(&again), text);
    }

    fn name() -> impl Strategy<Value = String> {
        "[A-Z][a-z]{0,3}(\\.[a-z][a-z0-9_]{0,4}){0,2}"
    }

    fn export_doc() -> impl Strategy<Value = String> {
        proptest::collection::btree_map(name(), (0usize..8, 1u32..50, any::<bool>(), proptest::option::of("[ -~]{0,12}")), 1..12)
            .prop_flat_map(|decls| {
                let names: Vec<String> = decls.keys().cloned().collect();
                let n = names.len();
                (Just(decls), Just(names), proptest::collection::vec(proptest::collection::vec(0..n + 2, 0..3), n))
            })
            .prop_map(|(decls, names, deps)| {
                let mut records = Vec::new();
                let mut proofs = BTreeMap::new();
                for (i, (name, (kind, line, tactic, doc))) in decls.iter().enumerate() {
                    let kind = DeclKind::ALL[*kind];
                    let comps: Vec<&str> = name.split('.').collect();
                    let dependencies = deps[i]
                        .iter()
                        .map(|&d| names.get(d).cloned().unwrap_or_else(|| format!("External.x{d}")))
                        .filter(|d| d != name)
                        .collect();
                    records.push(DeclarationRecord {
                        full_name: name.clone(),
                        kind,
                        signature: format!("{} {name} : True", kind.as_str()),
                        docstring: doc.clone(),
                        namespace_path: comps[..comps.len() - 1].iter().map(|s| s.to_string()).collect(),
                        file_path: format!("F{}.lean", i % 3),
                        line_span: LineSpan::new(*line, line + 3),
                        dependencies,
                        is_tactic_proof: *tactic && kind.has_proof(),
                    });
                    if *tactic && kind.has_proof() {
                        proofs.insert(
                            name.clone(),
                            vec![ExportStep {
                                tactic_text: "simp".into(),
                                state_before: ProofState { hypotheses: vec![Hypothesis::new("h", "p")], goals: vec!["q".into()] },
                                state_after: ProofState::default(),
                                step_index: None,
                            }],
                        );
                    }
                }
                let doc = ExportDocument {
                    schema_version: "1".into(),
                    declarations: records,
                    proofs,
                    head_statements: [("F0.lean".to_string(), "Preamble.".to_string())].into_iter().collect(),
                };
                serde_json::to_string(&doc).unwrap()
            })
    }

    proptest! {
        #[test]
        fn well_formed_exports_parse_and_round_trip(doc in export_doc()) {
            let (idx, _) = parse_jixia_export(doc.as_bytes()).unwrap();
            let (again, _) = parse_jixia_export(serialize_index(&idx).as_bytes()).unwrap();
            prop_assert_eq!(again, idx);
        }
    }
}
