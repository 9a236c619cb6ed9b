//! Allocation-only core of the Herald NL-FL dataset pipeline.
//!
//! Everything in this crate is a pure function over in-memory values: no file
//! system, no network, no threads. The `herald` companion crate layers IO,
//! provider transports, the compiler backends and the CLI on top.
//!
//! Module map:
//!
//! - [`corpus`]: declaration and proof-step records, the corpus index and
//!   neighbour resolution.
//! - [`scan`]: a best-effort Lean 4 header scanner for raw source fixtures.
//! - [`depgraph`]: dependency DAG, cycle detection, level stratification and
//!   batch scheduling.
//! - [`retrieval`]: embeddings, cosine similarity and exact k-NN over
//!   annotated exemplars.
//! - [`prompt`]: template registry and prompt assembly for statements and
//!   proofs.
//! - [`augment`]: tactic-state statement synthesis, deduplication sampling and
//!   informal augmentation strategies.
//! - [`validate`]: candidate state machine, pass@k reports and benchmark
//!   summaries.
//! - [`dataset`]: NL-FL pair records, direction mirroring, ratio mixing and
//!   dataset statistics.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod augment;
pub mod corpus;
pub mod dataset;
pub mod depgraph;
pub mod digest;
pub mod prompt;
pub mod retrieval;
pub mod scan;
pub mod text;
pub mod validate;

pub use corpus::{
    CorpusError, CorpusIndex, CorpusWarning, DeclKind, DeclarationRecord, Hypothesis, LineSpan,
    NeighborSet, ProofState, ProofStep,
};
pub use depgraph::{DepGraph, LevelAssignment};
pub use digest::digest;
