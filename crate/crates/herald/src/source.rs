//! Builds a corpus index straight from `.lean` files with the header scanner.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use herald_core::corpus::{CorpusError, CorpusIndex, CorpusWarning};
use herald_core::scan::{scan_source, ScanNote};
use thiserror::Error;
use walkdir::WalkDir;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("walking {0}: {1}")]
    Walk(PathBuf, walkdir::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Default)]
pub struct FileDiagnostics {
    pub file: String,
    pub skipped: usize,
    pub notes: Vec<ScanNote>,
}

#[derive(Debug)]
pub struct SourceIngest {
    pub index: CorpusIndex,
    pub warnings: Vec<CorpusWarning>,
    pub diagnostics: Vec<FileDiagnostics>,
}

impl SourceIngest {
    pub fn skipped(&self) -> usize {
        self.diagnostics.iter().map(|d| d.skipped).sum()
    }
}

/// Every `.lean` file under `root`, in path order. `file_path` on each record
/// is relative to `root` with `/` separators.
pub fn ingest_source_dir(root: &Path) -> Result<SourceIngest, SourceError> {
    let mut files = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| SourceError::Walk(root.to_path_buf(), e))?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "lean") {
            files.push(entry.into_path());
        }
    }
    if root.is_file() {
        files = vec![root.to_path_buf()];
    }

    let mut declarations = Vec::new();
    let mut heads = BTreeMap::new();
    let mut diagnostics = Vec::new();
    for path in files {
        let text = fs::read_to_string(&path).map_err(|source| SourceError::Io { path: path.clone(), source })?;
        let rel = relative_name(root, &path);
        let out = scan_source(&text, &rel);
        if let Some(doc) = out.module_doc {
            heads.insert(rel.clone(), doc);
        }
        diagnostics.push(FileDiagnostics { file: rel, skipped: out.diagnostics.skipped, notes: out.diagnostics.notes });
        declarations.extend(out.declarations);
    }
    let (index, warnings) = CorpusIndex::build(declarations, BTreeMap::new(), heads)?;
    Ok(SourceIngest { index, warnings, diagnostics })
}

fn relative_name(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).ok().filter(|r| !r.as_os_str().is_empty());
    let rel = rel.unwrap_or_else(|| Path::new(path.file_name().unwrap_or_default()));
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walks_nested_files_in_order() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("sub")).unwrap();
        fs::write(dir.path().join("b.lean"), "/-! Head of b. -/\ntheorem b1 : True := trivial\n").unwrap();
        fs::write(dir.path().join("sub/a.lean"), "theorem a1 : True := by trivial\n").unwrap();
        fs::write(dir.path().join("notes.txt"), "theorem ignored : True := trivial\n").unwrap();
        let got = ingest_source_dir(dir.path()).unwrap();
        assert_eq!(got.index.len(), 2);
        assert_eq!(got.index.get("a1").unwrap().file_path, "sub/a.lean");
        assert_eq!(got.index.head_statement_for("b.lean"), Some("Head of b."));
        assert_eq!(got.diagnostics.iter().map(|d| d.file.as_str()).collect::<Vec<_>>(), vec!["b.lean", "sub/a.lean"]);
    }

    #[test]
    fn single_file_root() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("one.lean");
        fs::write(&f, "theorem t (p : Prop) : p → p := by intro h; exact h\n").unwrap();
        let got = ingest_source_dir(&f).unwrap();
        assert_eq!(got.index.get("t").unwrap().file_path, "one.lean");
    }
}
