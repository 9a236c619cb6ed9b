//! Dataset files: NL-FL pair JSONL (one pair per line, fixed field order)
//! and statistics over them.

use std::path::Path;

use herald_core::dataset::{DatasetStats, NLFLPair};

use crate::jsonl::{read_jsonl, write_jsonl, JsonlError};

pub const DATASET_SCHEMA_VERSION: &str = "1";

/// Writes `pairs` (atomically, fsynced) and returns the record count.
pub fn write_pairs(pairs: &[NLFLPair], path: &Path) -> Result<usize, JsonlError> {
    write_jsonl(path, pairs)
}

pub fn read_pairs(path: &Path) -> Result<Vec<NLFLPair>, JsonlError> {
    read_jsonl(path)
}

/// Counts over every record of a dataset file.
pub fn stats_file(path: &Path) -> Result<DatasetStats, JsonlError> {
    Ok(DatasetStats::from_pairs(&read_pairs(path)?))
}
