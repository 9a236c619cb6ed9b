//! Exemplar retrieval: embedding vectors, cosine similarity and exact k-NN.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::fnv1a64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetrievalError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("zero-norm vector")]
    ZeroVector,
    #[error("vector has a non-finite component at index {0}")]
    NonFinite(usize),
    #[error("empty vector")]
    EmptyVector,
    #[error("duplicate example id `{0}`")]
    DuplicateId(String),
    #[error("example `{0}` has an empty text field")]
    EmptyText(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("cannot embed empty text")]
    EmptyInput,
    #[error("embedding provider `{provider}` failed: {message}")]
    ProviderError { provider: String, message: String },
}

/// A finite, non-empty vector of `f64` components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, RetrievalError> {
        if values.is_empty() {
            return Err(RetrievalError::EmptyVector);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(RetrievalError::NonFinite(i));
        }
        Ok(EmbeddingVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(dot(&self.0, &self.0))
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, RetrievalError> {
        EmbeddingVector::new(self.0.iter().map(|v| v * factor).collect())
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = RetrievalError;
    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        EmbeddingVector::new(values)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, RetrievalError> {
    if u.dim() != v.dim() {
        return Err(RetrievalError::DimensionMismatch { expected: u.dim(), found: v.dim() });
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(RetrievalError::ZeroVector);
    }
    Ok(clamp_unit(dot(&u.0, &v.0) / (nu * nv)))
}

// keeps symmetric rounding error from leaving [-1, 1]
fn clamp_unit(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotatedExample {
    pub id: String,
    pub formal_text: String,
    pub informal_text: String,
    pub embedding: EmbeddingVector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredExample<'a> {
    pub example: &'a AnnotatedExample,
    pub score: f64,
}

/// Immutable set of exemplars sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleStore {
    dim: usize,
    examples: Vec<AnnotatedExample>,
    norms: Vec<f64>,
}

impl ExampleStore {
    pub fn new(dim: usize, examples: Vec<AnnotatedExample>) -> Result<Self, RetrievalError> {
        if dim == 0 {
            return Err(RetrievalError::EmptyVector);
        }
        let mut ids = BTreeSet::new();
        let mut norms = Vec::with_capacity(examples.len());
        for ex in &examples {
            if !ids.insert(ex.id.as_str()) {
                return Err(RetrievalError::DuplicateId(ex.id.clone()));
            }
            if ex.formal_text.is_empty() || ex.informal_text.is_empty() {
                return Err(RetrievalError::EmptyText(ex.id.clone()));
            }
            if ex.embedding.dim() != dim {
                return Err(RetrievalError::DimensionMismatch { expected: dim, found: ex.embedding.dim() });
            }
            let n = ex.embedding.norm();
            if n == 0.0 {
                return Err(RetrievalError::ZeroVector);
            }
            norms.push(n);
        }
        Ok(ExampleStore { dim, examples, norms })
    }

    /// Infers the dimension from the first example.
    pub fn from_examples(examples: Vec<AnnotatedExample>) -> Result<Self, RetrievalError> {
        let dim = examples.first().map_or(1, |e| e.embedding.dim());
        ExampleStore::new(dim, examples)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[AnnotatedExample] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<AnnotatedExample> {
        self.examples
    }

    /// The `min(k, len)` most similar exemplars, highest score first, ties by
    /// ascending id.
    pub fn query_knn(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<ScoredExample<'_>>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::ZeroK);
        }
        if query.dim() != self.dim {
            return Err(RetrievalError::DimensionMismatch { expected: self.dim, found: query.dim() });
        }
        if self.examples.is_empty() {
            return Ok(Vec::new());
        }
        let qn = query.norm();
        if qn == 0.0 {
            return Err(RetrievalError::ZeroVector);
        }
        let mut scored: Vec<ScoredExample<'_>> = self
            .examples
            .iter()
            .zip(&self.norms)
            .map(|(ex, &n)| ScoredExample {
                example: ex,
                score: clamp_unit(dot(&query.0, &ex.embedding.0) / (qn * n)),
            })
            .collect();
        scored.sort_by(rank_order);
        scored.truncate(k);
        Ok(scored)
    }
}

/// Descending score, then ascending id.
pub fn rank_order(a: &ScoredExample<'_>, b: &ScoredExample<'_>) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.example.id.cmp(&b.example.id))
}

/// Source of embeddings for exemplar indexing and queries.
pub trait EmbeddingProvider {
    /// Identity reported in errors and store metadata.
    fn provider_id(&self) -> String;
    fn dim(&self) -> usize;
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, String>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn provider_id(&self) -> String {
        (**self).provider_id()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, String> {
        (**self).embed_text(text)
    }
}

pub fn embed<P: EmbeddingProvider + ?Sized>(text: &str, provider: &P) -> Result<EmbeddingVector, RetrievalError> {
    if text.trim().is_empty() {
        return Err(RetrievalError::EmptyInput);
    }
    let fail = |message: String| RetrievalError::ProviderError { provider: provider.provider_id(), message };
    let values = provider.embed_text(text).map_err(fail)?;
    if values.len() != provider.dim() {
        return Err(fail(alloc::format!(
            "returned {} components, declared {}",
            values.len(),
            provider.dim()
        )));
    }
    EmbeddingVector::new(values).map_err(|e| fail(e.to_string()))
}

/// Deterministic hashed bag of unigrams and bigrams, L2-normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MockEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl MockEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        MockEmbedder { dim: dim.max(1), seed }
    }

    fn bump(&self, acc: &mut [f64], parts: &[&[u8]]) {
        let h = fnv1a64(self.seed, parts);
        let bucket = (h >> 1) as usize % self.dim;
        acc[bucket] += if h & 1 == 0 { 1.0 } else { -1.0 };
    }
}

/// Alphanumeric runs and single symbols; whitespace separates.
fn tokens(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() || c == '_' || c == '.' && start.is_some() {
            start.get_or_insert(i);
            continue;
        }
        if let Some(s) = start.take() {
            out.push(&text[s..i]);
        }
        if !c.is_whitespace() {
            out.push(&text[i..i + c.len_utf8()]);
        }
    }
    if let Some(s) = start {
        out.push(&text[s..]);
    }
    out
}

impl EmbeddingProvider for MockEmbedder {
    fn provider_id(&self) -> String {
        alloc::format!("mock-hash-{}d", self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>, String> {
        let mut acc = alloc::vec![0.0f64; self.dim];
        let toks = tokens(text);
        for t in &toks {
            self.bump(&mut acc, &[b"1", t.as_bytes()]);
        }
        for w in toks.windows(2) {
            self.bump(&mut acc, &[b"2", w[0].as_bytes(), w[1].as_bytes()]);
        }
        if acc.iter().all(|v| *v == 0.0) {
            self.bump(&mut acc, &[b"raw", text.as_bytes()]);
        }
        let n = libm::sqrt(dot(&acc, &acc));
        Ok(acc.into_iter().map(|v| v / n).collect())
    }
}

impl fmt::Display for MockEmbedder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.provider_id())
    }
}
