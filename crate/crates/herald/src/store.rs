//! Exemplar store on disk: a directory holding `meta.json` and
//! `examples.jsonl` (one annotated example per line, embedding as a number
//! array).

use std::path::Path;

use herald_core::retrieval::{embed, AnnotatedExample, EmbeddingProvider, ExampleStore, RetrievalError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{read_json, read_jsonl, write_json, write_jsonl, JsonlError};

pub const STORE_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    File(#[from] JsonlError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("store meta says {meta} examples of dim {dim}, found {found}")]
    MetaMismatch { meta: usize, dim: usize, found: usize },
    #[error("unsupported store schema_version `{0}`")]
    Version(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub schema_version: String,
    pub dim: usize,
    pub count: usize,
    #[serde(default)]
    pub provider: Option<String>,
}

/// Annotated input line before embedding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawExample {
    pub id: String,
    pub formal_text: String,
    pub informal_text: String,
}

/// Embeds each example's formal text. Nothing is written here, so a provider
/// failure leaves no partial store behind.
pub fn index_examples<P: EmbeddingProvider + ?Sized>(raw: &[RawExample], provider: &P) -> Result<ExampleStore, RetrievalError> {
    let examples = raw
        .iter()
        .map(|r| {
            Ok(AnnotatedExample {
                id: r.id.clone(),
                formal_text: r.formal_text.clone(),
                informal_text: r.informal_text.clone(),
                embedding: embed(&r.formal_text, provider)?,
            })
        })
        .collect::<Result<Vec<_>, RetrievalError>>()?;
    ExampleStore::new(provider.dim(), examples)
}

pub fn write_store(dir: &Path, store: &ExampleStore, provider: Option<&str>) -> Result<(), StoreError> {
    write_jsonl(&dir.join("examples.jsonl"), store.examples())?;
    let meta = StoreMeta {
        schema_version: STORE_SCHEMA_VERSION.into(),
        dim: store.dim(),
        count: store.len(),
        provider: provider.map(str::to_string),
    };
    write_json(&dir.join("meta.json"), &meta)?;
    Ok(())
}

pub fn read_store(dir: &Path) -> Result<(ExampleStore, StoreMeta), StoreError> {
    let meta: StoreMeta = read_json(&dir.join("meta.json"))?;
    if meta.schema_version != STORE_SCHEMA_VERSION {
        return Err(StoreError::Version(meta.schema_version));
    }
    let examples: Vec<AnnotatedExample> = read_jsonl(&dir.join("examples.jsonl"))?;
    if examples.len() != meta.count {
        return Err(StoreError::MetaMismatch { meta: meta.count, dim: meta.dim, found: examples.len() });
    }
    let store = ExampleStore::new(meta.dim, examples)?;
    Ok((store, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use herald_core::retrieval::MockEmbedder;

    fn raw(n: usize) -> Vec<RawExample> {
        (0..n)
            .map(|i| RawExample {
                id: format!("ex{i:04}"),
                formal_text: format!("theorem t{i} (n : ℕ) : n + {i} = {i} + n"),
                informal_text: format!("Addition with {i} commutes."),
            })
            .collect()
    }

    #[test]
    fn thousand_examples_round_trip() {
        let store = index_examples(&raw(1000), &MockEmbedder::new(64, 0)).unwrap();
        assert_eq!((store.len(), store.dim()), (1000, 64));
        let dir = tempfile::tempdir().unwrap();
        write_store(dir.path(), &store, Some("mock")).unwrap();
        let (back, meta) = read_store(dir.path()).unwrap();
        assert_eq!(back, store);
        assert_eq!((meta.count, meta.dim), (1000, 64));
    }

    #[test]
    fn empty_store() {
        let store = index_examples(&[], &MockEmbedder::new(8, 0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_store(dir.path(), &store, None).unwrap();
        assert!(read_store(dir.path()).unwrap().0.is_empty());
    }

    struct Down;
    impl EmbeddingProvider for Down {
        fn provider_id(&self) -> String {
            "remote".into()
        }
        fn dim(&self) -> usize {
            8
        }
        fn embed_text(&self, _: &str) -> Result<Vec<f64>, String> {
            Err("503".into())
        }
    }

    #[test]
    fn provider_outage_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let err = index_examples(&raw(3), &Down).unwrap_err();
        assert!(matches!(err, RetrievalError::ProviderError { .. }));
        assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
    }
}
