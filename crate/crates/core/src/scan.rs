//! Best-effort scanner for Lean 4 source, used when no analyzer export is
//! available. It recognises top-level declaration headers, their doc comments,
//! namespaces and module docs. It does not elaborate anything: dependencies
//! are always empty.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::corpus::{DeclKind, DeclarationRecord, LineSpan};
use crate::text::{collapse_whitespace, Depth};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanNote {
    pub line: u32,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanDiagnostics {
    /// Regions the scanner could not make sense of and skipped.
    pub skipped: usize,
    pub notes: Vec<ScanNote>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanOutput {
    pub declarations: Vec<DeclarationRecord>,
    /// `/-! ... -/` module documentation, joined by blank lines.
    pub module_doc: Option<String>,
    pub diagnostics: ScanDiagnostics,
}

/// Scans `source` and returns only the declaration records (file path left
/// empty).
pub fn scan_declarations(source: &str) -> Vec<DeclarationRecord> {
    scan_source(source, "").declarations
}

pub fn scan_source(source: &str, file_path: &str) -> ScanOutput {
    Scanner::new(source, file_path).run()
}

const COMMANDS: &[&str] = &[
    "import", "open", "variable", "variables", "universe", "universes", "set_option", "attribute",
    "export", "notation", "notation3", "infix", "infixl", "infixr", "prefix", "postfix", "macro",
    "macro_rules", "syntax", "elab", "elab_rules", "deriving", "initialize", "include", "omit",
    "alias", "run_cmd", "assert_not_exists", "suppress_compilation", "compile_inductive",
    "add_decl_doc", "library_note", "unseal", "seal", "declare_syntax_cat", "register_option",
];

const MODIFIERS: &[&str] = &[
    "private", "protected", "noncomputable", "partial", "unsafe", "nonrec", "scoped", "local",
];

const HEADER_KEYWORDS: &[&str] = &[
    "theorem", "lemma", "def", "abbrev", "instance", "structure", "class", "inductive", "opaque",
    "example", "axiom",
];

#[derive(Debug)]
enum Frame {
    Namespace(Vec<String>),
    Section,
}

struct Scanner<'a> {
    lines: Vec<&'a str>,
    file_path: &'a str,
    frames: Vec<Frame>,
    pending_doc: Option<String>,
    module_docs: Vec<String>,
    out: Vec<DeclarationRecord>,
    diagnostics: ScanDiagnostics,
}

enum Terminator {
    Assign,
    Other,
    None,
}

impl<'a> Scanner<'a> {
    fn new(source: &'a str, file_path: &'a str) -> Self {
        Scanner {
            lines: source.lines().collect(),
            file_path,
            frames: Vec::new(),
            pending_doc: None,
            module_docs: Vec::new(),
            out: Vec::new(),
            diagnostics: ScanDiagnostics::default(),
        }
    }

    fn skip(&mut self, line: usize, reason: &str) {
        self.diagnostics.skipped += 1;
        self.diagnostics.notes.push(ScanNote { line: line as u32 + 1, reason: reason.to_string() });
    }

    fn run(mut self) -> ScanOutput {
        let mut i = 0;
        while i < self.lines.len() {
            let line = self.lines[i];
            let t = line.trim();
            if t.is_empty() || t.starts_with("--") {
                i += 1;
                continue;
            }
            if t.starts_with("/-") {
                match self.read_block(i) {
                    Some((content, next)) => {
                        if t.starts_with("/--") {
                            self.pending_doc = Some(content);
                        } else if t.starts_with("/-!") {
                            self.pending_doc = None;
                            if !content.is_empty() {
                                self.module_docs.push(content);
                            }
                        }
                        i = next;
                    }
                    None => {
                        self.skip(i, "unterminated comment");
                        break;
                    }
                }
                continue;
            }
            if line.starts_with(char::is_whitespace) {
                // continuation of a command we do not model
                i += 1;
                continue;
            }
            let rest = strip_prefixes(t);
            if rest.is_empty() {
                // attribute-only line, keeps the pending doc comment
                i += 1;
                continue;
            }
            let word = first_word(rest);
            match word {
                "namespace" => {
                    let name = rest["namespace".len()..].trim();
                    self.frames.push(Frame::Namespace(name.split('.').map(String::from).collect()));
                    self.pending_doc = None;
                    i += 1;
                }
                "section" | "mutual" => {
                    if word == "section" {
                        self.frames.push(Frame::Section);
                    }
                    self.pending_doc = None;
                    i += 1;
                }
                "end" => {
                    self.frames.pop();
                    self.pending_doc = None;
                    i += 1;
                }
                w if HEADER_KEYWORDS.contains(&w) => {
                    i = self.declaration(i, rest);
                }
                w if COMMANDS.contains(&w) || w.starts_with('#') => {
                    self.pending_doc = None;
                    i += 1;
                }
                _ => {
                    self.skip(i, "unrecognised top-level line");
                    self.pending_doc = None;
                    i += 1;
                }
            }
        }
        let module_doc = (!self.module_docs.is_empty()).then(|| self.module_docs.join("\n\n"));
        ScanOutput { declarations: self.out, module_doc, diagnostics: self.diagnostics }
    }

    /// Reads a `/- ... -/` block starting on line `start`. Returns the cleaned
    /// inner text and the next line to scan. Text after the closer on the
    /// same line is kept for scanning.
    fn read_block(&mut self, start: usize) -> Option<(String, usize)> {
        let first = self.lines[start].trim_start();
        let opener_len = if first.starts_with("/--") || first.starts_with("/-!") { 3 } else { 2 };
        let mut body: Vec<&str> = Vec::new();
        let mut text = &first[opener_len..];
        let mut j = start;
        loop {
            if let Some(close) = text.find("-/") {
                body.push(&text[..close]);
                let tail = text[close + 2..].trim();
                let content = clean_doc(&body);
                if tail.is_empty() {
                    return Some((content, j + 1));
                }
                self.lines[j] = tail;
                return Some((content, j));
            }
            body.push(text);
            j += 1;
            if j >= self.lines.len() {
                return None;
            }
            text = self.lines[j];
        }
    }

    fn namespace(&self) -> Vec<String> {
        self.frames
            .iter()
            .filter_map(|f| match f {
                Frame::Namespace(parts) => Some(parts.iter().cloned()),
                Frame::Section => None,
            })
            .flatten()
            .collect()
    }

    fn is_item_start(line: &str) -> bool {
        if line.is_empty() || line.starts_with(char::is_whitespace) {
            return false;
        }
        let t = line.trim();
        if t.starts_with("/-") || t.starts_with("@[") {
            return true;
        }
        let w = first_word(strip_prefixes(t));
        HEADER_KEYWORDS.contains(&w)
            || COMMANDS.contains(&w)
            || w.starts_with('#')
            || matches!(w, "namespace" | "section" | "end" | "mutual")
    }

    /// Parses the declaration whose header starts on line `start` (with
    /// attributes and modifiers already stripped into `head`). Returns the
    /// next line to scan.
    fn declaration(&mut self, start: usize, head: &'a str) -> usize {
        let doc = self.pending_doc.take();
        let (header, terminator, term_line, after) = self.collect_header(start, head);
        let signature = collapse_whitespace(&header);

        // body extent
        let mut end = term_line;
        let mut next = term_line + 1;
        if !matches!(terminator, Terminator::None) {
            let mut prev_blank = false;
            while next < self.lines.len() {
                let line = self.lines[next];
                let t = line.trim();
                if t.is_empty() {
                    prev_blank = true;
                    next += 1;
                    continue;
                }
                if Self::is_item_start(line) {
                    break;
                }
                let col0 = !line.starts_with(char::is_whitespace);
                if col0 && t.starts_with("--") {
                    next += 1;
                    continue;
                }
                if col0 && prev_blank {
                    break;
                }
                end = next;
                prev_blank = false;
                next += 1;
            }
        }

        let is_tactic_proof = matches!(terminator, Terminator::Assign) && {
            let a = after.trim_start();
            if a.is_empty() {
                self.lines[term_line + 1..=end.max(term_line)]
                    .iter()
                    .map(|l| l.trim())
                    .find(|l| !l.is_empty())
                    .is_some_and(starts_with_by)
            } else {
                starts_with_by(a)
            }
        };

        let Some((kind, name)) = parse_kind_and_name(&signature, start) else {
            self.skip(start, "declaration header without a name");
            return next;
        };
        let Some(kind) = kind else {
            // `example` and `axiom` are recognised but not recorded
            if first_word(&signature) == "axiom" {
                self.skip(start, "axiom declarations are not a supported kind");
            }
            return next;
        };

        let (full_name, components) = match name.strip_prefix("_root_.") {
            Some(root) => (root.to_string(), root.split('.').map(String::from).collect::<Vec<_>>()),
            None => {
                let mut parts = self.namespace();
                parts.extend(name.split('.').map(String::from));
                (parts.join("."), parts)
            }
        };
        let namespace_path = components[..components.len().saturating_sub(1)].to_vec();
        self.out.push(DeclarationRecord {
            full_name,
            kind,
            signature,
            docstring: doc.filter(|d| !d.is_empty()),
            namespace_path,
            file_path: self.file_path.to_string(),
            line_span: LineSpan::new(start as u32 + 1, end as u32 + 1),
            dependencies: BTreeSet::new(),
            is_tactic_proof,
        });
        next
    }

    /// Accumulates header text from line `start` until `:=`, `where`, a
    /// leading `|`, a blank line, a new item or EOF.
    fn collect_header(&self, start: usize, head: &'a str) -> (String, Terminator, usize, &'a str) {
        let mut header = String::new();
        let mut depth = Depth::default();
        let mut j = start;
        let mut text: &'a str = head;
        loop {
            if j > start {
                let line = self.lines[j];
                let t = line.trim();
                if t.is_empty() || Self::is_item_start(line) {
                    return (header, Terminator::None, j - 1, "");
                }
                if t.starts_with('|') && depth.at_top() {
                    return (header, Terminator::Other, j - 1, "");
                }
                text = t;
                header.push(' ');
            }
            let mut prev = ' ';
            let mut iter = text.char_indices().peekable();
            while let Some((pos, c)) = iter.next() {
                if c == '-' && iter.peek().map(|&(_, n)| n) == Some('-') {
                    break;
                }
                if depth.at_top() {
                    if c == ':' && iter.peek().map(|&(_, n)| n) == Some('=') {
                        return (header, Terminator::Assign, j, &text[pos + 2..]);
                    }
                    if text[pos..].starts_with("where")
                        && !is_ident_char(prev)
                        && !text[pos + 5..].starts_with(is_ident_char)
                    {
                        return (header, Terminator::Other, j, &text[pos + 5..]);
                    }
                }
                depth.feed(c);
                header.push(c);
                prev = c;
            }
            j += 1;
            if j >= self.lines.len() {
                return (header, Terminator::None, j - 1, "");
            }
        }
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '\'' | '.' | '!' | '?')
}

fn starts_with_by(text: &str) -> bool {
    text.strip_prefix("by").is_some_and(|rest| rest.is_empty() || rest.starts_with(char::is_whitespace))
}

fn first_word(text: &str) -> &str {
    text.split(|c: char| c.is_whitespace()).next().unwrap_or("")
}

/// Strips `@[...]` attributes and declaration modifiers from the front of a
/// line.
fn strip_prefixes(mut t: &str) -> &str {
    loop {
        t = t.trim_start();
        if t.starts_with("@[") {
            let mut depth = Depth::default();
            let mut cut = None;
            for (pos, c) in t.char_indices().skip(1) {
                depth.feed(c);
                if depth.at_top() {
                    cut = Some(pos + c.len_utf8());
                    break;
                }
            }
            match cut {
                Some(cut) => t = &t[cut..],
                None => return "",
            }
            continue;
        }
        let w = first_word(t);
        if MODIFIERS.contains(&w) && !matches!(t[w.len()..].trim_start(), "") {
            // a bare trailing word (`noncomputable` alone) is left for the caller
            t = &t[w.len()..];
            continue;
        }
        return t;
    }
}

/// Kind and declared name from a collapsed header. `Some((None, _))` means a
/// recognised but unrecorded keyword.
fn parse_kind_and_name(signature: &str, line: usize) -> Option<(Option<DeclKind>, String)> {
    let keyword = first_word(signature);
    let mut rest = signature[keyword.len()..].trim_start();
    let kind = match keyword {
        "theorem" | "lemma" => Some(DeclKind::Theorem),
        "def" | "abbrev" => Some(DeclKind::Definition),
        "instance" => Some(DeclKind::Instance),
        "structure" => Some(DeclKind::Structure),
        "class" => {
            if first_word(rest) == "inductive" {
                rest = rest["inductive".len()..].trim_start();
                Some(DeclKind::ClassInductive)
            } else {
                Some(DeclKind::Class)
            }
        }
        "inductive" => Some(DeclKind::Inductive),
        "opaque" => Some(DeclKind::Opaque),
        "example" => return Some((None, String::new())),
        "axiom" => None,
        _ => return None,
    };
    // instance priority, e.g. `instance (priority := 100) foo : ...`
    if kind == Some(DeclKind::Instance) && rest.starts_with("(priority") {
        if let Some(close) = rest.find(')') {
            rest = rest[close + 1..].trim_start();
        }
    }
    let end = rest
        .find(|c: char| c.is_whitespace() || matches!(c, '(' | '[' | '{' | '⦃' | '⟨' | ':'))
        .unwrap_or(rest.len());
    let mut name = &rest[..end];
    if let Some(univ) = name.find(".{") {
        name = &name[..univ];
    }
    if name.is_empty() {
        if kind == Some(DeclKind::Instance) {
            return Some((kind, alloc::format!("instance_L{}", line + 1)));
        }
        return None;
    }
    Some((kind, name.to_string()))
}

/// Inner text of a comment block with common indentation removed.
fn clean_doc(lines: &[&str]) -> String {
    let indent = lines
        .iter()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    let mut out: Vec<&str> = Vec::with_capacity(lines.len());
    for (n, l) in lines.iter().enumerate() {
        if n == 0 {
            out.push(l.trim());
        } else if l.len() >= indent && l.is_char_boundary(indent) {
            out.push(l[indent..].trim_end());
        } else {
            out.push(l.trim());
        }
    }
    out.join("\n").trim().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn single_tactic_theorem() {
        let decls = scan_declarations("theorem t (p : Prop) : p → p := by intro h; exact h");
        assert_eq!(decls.len(), 1);
        let d = &decls[0];
        assert_eq!(d.full_name, "t");
        assert_eq!(d.kind, DeclKind::Theorem);
        assert!(d.is_tactic_proof);
        assert_eq!(d.signature, "theorem t (p : Prop) : p → p");
        assert!(d.dependencies.is_empty());
        assert_eq!(d.line_span, LineSpan::new(1, 1));
    }

    #[test]
    fn empty_file() {
        let out = scan_source("", "Empty.lean");
        assert!(out.declarations.is_empty());
        assert_eq!(out.diagnostics.skipped, 0);
        assert_eq!(out.module_doc, None);
    }

    #[test]
    fn term_proofs_are_not_tactic_proofs() {
        let src = "example (p q r : Prop) (h : p ∧ q ∧ r) : q ∧ p ∧ r :=\n  And.intro h.right.left (And.intro h.left h.right.right)\n\ntheorem swap (p q : Prop) (h : p ∧ q) : q ∧ p :=\n  ⟨h.2, h.1⟩\n";
        let decls = scan_declarations(src);
        assert_eq!(decls.len(), 1);
        assert!(!decls[0].is_tactic_proof);
        assert_eq!(decls[0].line_span, LineSpan::new(4, 5));
    }

    #[test]
    fn namespaces_docs_and_attributes() {
        let src = "\
/-! # Congruence subgroups

Some context. -/

namespace CongruenceSubgroup

/-- The level zero subgroup
    is trivial. -/
@[simp]
theorem Gamma_zero_bot : Gamma 0 = ⊥ := by
  ext
  simp

section
variable (n : ℕ)
protected def level : ℕ := n
end

end CongruenceSubgroup

def _root_.topLevel : ℕ := 3
";
        let out = scan_source(src, "Mathlib/Gamma.lean");
        assert_eq!(out.diagnostics.skipped, 0, "{:?}", out.diagnostics);
        assert_eq!(out.module_doc.as_deref(), Some("# Congruence subgroups\n\nSome context."));
        let names: Vec<&str> = out.declarations.iter().map(|d| d.full_name.as_str()).collect();
        assert_eq!(names, vec!["CongruenceSubgroup.Gamma_zero_bot", "CongruenceSubgroup.level", "topLevel"]);
        let gamma = &out.declarations[0];
        assert_eq!(gamma.docstring.as_deref(), Some("The level zero subgroup\nis trivial."));
        assert_eq!(gamma.namespace_path, vec!["CongruenceSubgroup".to_string()]);
        assert!(gamma.is_tactic_proof);
        assert_eq!(gamma.line_span, LineSpan::new(10, 12));
        assert_eq!(out.declarations[1].kind, DeclKind::Definition);
        assert!(out.declarations[1].docstring.is_none());
        assert!(out.declarations[2].namespace_path.is_empty());
    }

    #[test]
    fn kinds() {
        let src = "\
structure Point where
  x : ℕ
  y : ℕ

class Foo (α : Type) where
  foo : α

class inductive Bar : Prop
  | mk : Bar

inductive Color
  | red
  | green

instance : Foo ℕ := ⟨0⟩

instance (priority := 100) fooNat' : Foo ℕ where
  foo := 1

opaque secret : ℕ

abbrev N := ℕ
";
        let decls = scan_declarations(src);
        let got: Vec<(&str, DeclKind)> = decls.iter().map(|d| (d.full_name.as_str(), d.kind)).collect();
        assert_eq!(
            got,
            vec![
                ("Point", DeclKind::Structure),
                ("Foo", DeclKind::Class),
                ("Bar", DeclKind::ClassInductive),
                ("Color", DeclKind::Inductive),
                ("instance_L15", DeclKind::Instance),
                ("fooNat'", DeclKind::Instance),
                ("secret", DeclKind::Opaque),
                ("N", DeclKind::Definition),
            ]
        );
        assert_eq!(decls[0].signature, "structure Point");
        assert_eq!(decls[3].line_span, LineSpan::new(11, 13));
    }

    #[test]
    fn multi_line_header_with_column_zero_continuations() {
        let src = "\
theorem tower (F E K : Type*) [Field F] [Field E] [Algebra F E]
[Field K] [Algebra F K] :
Normal E K := by
  exact foo

theorem other : a ↔ b := by
sorry
";
        let decls = scan_declarations(src);
        assert_eq!(decls.len(), 2);
        assert_eq!(
            decls[0].signature,
            "theorem tower (F E K : Type*) [Field F] [Field E] [Algebra F E] [Field K] [Algebra F K] : Normal E K"
        );
        assert_eq!(decls[0].line_span, LineSpan::new(1, 4));
        assert_eq!(decls[1].line_span, LineSpan::new(6, 7));
        assert!(decls[1].is_tactic_proof);
    }

    #[test]
    fn by_on_next_line_and_default_binders() {
        let src = "theorem f (x : ℕ := 0) : x = x :=\n  by rfl\n";
        let d = &scan_declarations(src)[0];
        assert!(d.is_tactic_proof);
        assert_eq!(d.signature, "theorem f (x : ℕ := 0) : x = x");
    }

    #[test]
    fn unparseable_regions_are_counted() {
        let src = "garbage line\ntheorem : p := rfl\naxiom ax : False\n/- never closed";
        let out = scan_source(src, "");
        assert!(out.declarations.is_empty());
        assert_eq!(out.diagnostics.skipped, 4, "{:?}", out.diagnostics);
    }

    #[test]
    fn doc_on_same_line_as_header() {
        let d = &scan_declarations("/-- doc -/ theorem x : True := trivial")[0];
        assert_eq!(d.docstring.as_deref(), Some("doc"));
        assert_eq!(d.full_name, "x");
    }

    #[test]
    fn abs_bars_do_not_end_a_header() {
        let d = &scan_declarations("theorem abs_le' : |a| ≤ b ↔ -b ≤ a ∧ a ≤ b := by\n  simp")[0];
        assert_eq!(d.signature, "theorem abs_le' : |a| ≤ b ↔ -b ≤ a ∧ a ≤ b");
    }
}
