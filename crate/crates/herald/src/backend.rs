//! Compiler backends that type-check candidate Lean source.
//!
//! [`ReplBackend`] drives a long-lived subprocess over a JSON-lines
//! protocol: one `{"cmd":"check","id":n,"source":...}` request per line in,
//! one `{"id":n,"ok":bool,"diagnostics":[...]}` reply per line out.
//! [`MockBackend`] applies [`syntax_check`] in-process.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use herald_core::digest::digest;
use herald_core::validate::CompileOutcome;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("compiler backend `{backend}` unavailable: {message}")]
    Unavailable { backend: String, message: String },
}

pub trait CompilerBackend: Send + Sync {
    fn id(&self) -> String;
    fn check(&self, source: &str, timeout: Duration) -> Result<CompileOutcome, BackendError>;
}

const DECL_KEYWORDS: [&str; 6] = ["theorem", "lemma", "def", "example", "instance", "abbrev"];
const MODIFIERS: [&str; 6] = ["private", "protected", "noncomputable", "nonrec", "partial", "unsafe"];

fn is_preamble(line: &str) -> bool {
    let t = line.trim();
    t.is_empty()
        || ["import ", "open ", "set_option ", "namespace ", "section", "end", "variable ", "universe ", "--", "@["]
            .iter()
            .any(|p| t.starts_with(p))
}

/// Drops comments (line and nested block, including doc comments).
fn strip_comments(src: &str) -> String {
    let mut out = String::with_capacity(src.len());
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut depth) = (0, 0usize);
    while i < chars.len() {
        let two = (chars[i], chars.get(i + 1).copied().unwrap_or('\0'));
        if two == ('/', '-') {
            depth += 1;
            i += 2;
        } else if depth > 0 && two == ('-', '/') {
            depth -= 1;
            i += 2;
        } else if depth > 0 {
            if chars[i] == '\n' {
                out.push('\n');
            }
            i += 1;
        } else if two == ('-', '-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else {
            out.push(chars[i]);
            i += 1;
        }
    }
    out
}

/// Structural well-formedness of a single Lean declaration. Returns the
/// first problem found. This is not type checking.
pub fn syntax_check(source: &str) -> Result<(), String> {
    let stripped = strip_comments(source);
    let body: String = stripped
        .lines()
        .skip_while(|l| is_preamble(l))
        .collect::<Vec<_>>()
        .join("\n");
    let body = body.trim();
    if body.is_empty() {
        return Err("no declaration found".into());
    }
    let mut words = body.split_whitespace().skip_while(|w| MODIFIERS.contains(w));
    let keyword = words.next().unwrap_or("");
    if !DECL_KEYWORDS.contains(&keyword) {
        return Err(format!("expected a declaration keyword, found `{keyword}`"));
    }

    let mut stack = Vec::new();
    let mut assign = None;
    let mut last_colon = None;
    let chars: Vec<(usize, char)> = body.char_indices().collect();
    for (k, &(pos, c)) in chars.iter().enumerate() {
        match c {
            '(' | '[' | '{' | '⟨' => stack.push(c),
            ')' | ']' | '}' | '⟩' => {
                let want = match c {
                    ')' => '(',
                    ']' => '[',
                    '}' => '{',
                    _ => '⟨',
                };
                if stack.pop() != Some(want) {
                    return Err(format!("unbalanced `{c}` at byte {pos}"));
                }
            }
            ':' if stack.is_empty() && assign.is_none() => {
                if chars.get(k + 1).map(|x| x.1) == Some('=') {
                    assign = Some(pos);
                } else {
                    last_colon = Some(pos);
                }
            }
            _ => {}
        }
    }
    if let Some(open) = stack.last() {
        return Err(format!("unclosed `{open}`"));
    }
    let assign = assign.ok_or("missing `:=`")?;
    if keyword != "example" && keyword != "instance" {
        let colon = last_colon.ok_or("missing type ascription")?;
        if body[colon + 1..assign].trim().is_empty() {
            return Err("empty type after `:`".into());
        }
    }
    let value = body[assign + 2..].trim();
    if value.is_empty() || value == "by" {
        return Err("empty proof term".into());
    }
    Ok(())
}

/// In-process backend for tests and offline runs.
#[derive(Default)]
pub struct MockBackend {
    overrides: BTreeMap<String, CompileOutcome>,
    unavailable: bool,
    checks: AtomicU64,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fixes the outcome for one exact source text.
    pub fn with_override(mut self, source: &str, outcome: CompileOutcome) -> Self {
        self.overrides.insert(digest(source), outcome);
        self
    }

    pub fn unavailable() -> Self {
        MockBackend { unavailable: true, ..Self::default() }
    }

    pub fn checks(&self) -> u64 {
        self.checks.load(Ordering::SeqCst)
    }
}

impl CompilerBackend for MockBackend {
    fn id(&self) -> String {
        "mock".into()
    }

    fn check(&self, source: &str, _timeout: Duration) -> Result<CompileOutcome, BackendError> {
        if self.unavailable {
            return Err(BackendError::Unavailable { backend: self.id(), message: "configured unavailable".into() });
        }
        self.checks.fetch_add(1, Ordering::SeqCst);
        if let Some(o) = self.overrides.get(&digest(source)) {
            return Ok(o.clone());
        }
        Ok(match syntax_check(source) {
            Ok(()) => CompileOutcome::Pass,
            Err(e) => CompileOutcome::Fail(e),
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Reply {
    id: u64,
    ok: bool,
    #[serde(default)]
    diagnostics: Vec<String>,
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    replies: Receiver<String>,
}

impl Session {
    fn spawn(program: &str, args: &[String]) -> std::io::Result<Session> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, replies) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Session { child, stdin, replies })
    }

    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.kill();
    }
}

/// Subprocess backend. Checks are serialised over one session; a timeout
/// kills the process and the next check starts a fresh one.
pub struct ReplBackend {
    program: String,
    args: Vec<String>,
    session: Mutex<Option<Session>>,
    next_id: AtomicU64,
}

impl ReplBackend {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        ReplBackend { program: program.into(), args, session: Mutex::new(None), next_id: AtomicU64::new(0) }
    }

    /// Parses a whitespace-separated command line.
    pub fn from_command(command: &str) -> Option<Self> {
        let mut parts = command.split_whitespace().map(str::to_string);
        let program = parts.next()?;
        Some(Self::new(program, parts.collect()))
    }

    fn unavailable(&self, message: impl Into<String>) -> BackendError {
        BackendError::Unavailable { backend: self.id(), message: message.into() }
    }
}

impl CompilerBackend for ReplBackend {
    fn id(&self) -> String {
        format!("repl:{}", self.program)
    }

    fn check(&self, source: &str, timeout: Duration) -> Result<CompileOutcome, BackendError> {
        let mut guard = self.session.lock().expect("session lock");
        if guard.is_none() {
            *guard = Some(Session::spawn(&self.program, &self.args).map_err(|e| self.unavailable(e.to_string()))?);
        }
        let session = guard.as_mut().expect("session present");
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let mut line = json!({"cmd": "check", "id": id, "source": source}).to_string();
        line.push('\n');
        if let Err(e) = session.stdin.write_all(line.as_bytes()).and_then(|_| session.stdin.flush()) {
            *guard = None;
            return Err(self.unavailable(format!("write failed: {e}")));
        }
        loop {
            match session.replies.recv_timeout(timeout) {
                Ok(text) => {
                    let Ok(reply) = serde_json::from_str::<Reply>(&text) else { continue };
                    if reply.id != id {
                        continue;
                    }
                    return Ok(if reply.ok {
                        CompileOutcome::Pass
                    } else {
                        CompileOutcome::Fail(reply.diagnostics.join("\n"))
                    });
                }
                Err(RecvTimeoutError::Timeout) => {
                    *guard = None;
                    return Ok(CompileOutcome::Fail(format!("timeout after {} ms", timeout.as_millis())));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    *guard = None;
                    return Err(self.unavailable("process exited"));
                }
            }
        }
    }
}

/// Request handler of the stand-in REPL: syntax check, plus a
/// `-- mock:sleep <ms>` directive to simulate slow elaboration.
pub fn mock_repl_reply(request_line: &str) -> Option<String> {
    let v: serde_json::Value = serde_json::from_str(request_line).ok()?;
    let id = v.get("id")?.as_u64()?;
    let source = v.get("source")?.as_str()?;
    for line in source.lines() {
        if let Some(ms) = line.trim().strip_prefix("-- mock:sleep ").and_then(|m| m.trim().parse::<u64>().ok()) {
            thread::sleep(Duration::from_millis(ms));
        }
    }
    let reply = match syntax_check(source) {
        Ok(()) => Reply { id, ok: true, diagnostics: vec![] },
        Err(e) => Reply { id, ok: false, diagnostics: vec![e] },
    };
    Some(serde_json::to_string(&reply).expect("reply serializes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed_declarations() {
        for ok in [
            "theorem t : True := by sorry",
            "import Mathlib\nopen Real\n\n/-- doc -/\ntheorem t (x : ℝ) (h : 0 < x) : x ≠ 0 := by\n  positivity",
            "lemma l {α : Type} [Group α] (a : α) : a * 1 = a := mul_one a",
            "noncomputable def f : ℕ → ℕ := fun n => n + 1",
            "example : (2 : ℕ) + 2 = 4 := rfl",
            "theorem s : ∃ n : ℕ, n = ⟨0, by simp⟩.1 := ⟨0, rfl⟩",
        ] {
            assert_eq!(syntax_check(ok), Ok(()), "{ok}");
        }
    }

    #[test]
    fn malformed_declarations() {
        for bad in [
            "",
            "import Mathlib",
            "hello world",
            "theorem t : := by",
            "theorem t : True := by",
            "theorem t : True",
            "theorem t (x : ℕ : x = x := rfl",
            "theorem t : (x = x)) := rfl",
            "theorem t := rfl",
        ] {
            assert!(syntax_check(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn comments_are_ignored() {
        assert!(syntax_check("-- theorem x : True := trivial").is_err());
        assert!(syntax_check("/- ( -/ theorem t : True := trivial").is_ok());
    }

    #[test]
    fn mock_overrides_and_outage() {
        let b = MockBackend::new().with_override("x", CompileOutcome::Pass);
        assert_eq!(b.check("x", Duration::from_secs(1)).unwrap(), CompileOutcome::Pass);
        assert!(matches!(b.check("y", Duration::from_secs(1)).unwrap(), CompileOutcome::Fail(_)));
        assert_eq!(b.checks(), 2);
        assert!(MockBackend::unavailable().check("x", Duration::from_secs(1)).is_err());
    }

    #[test]
    fn missing_program_is_unavailable() {
        let b = ReplBackend::new("/nonexistent/repl-binary", vec![]);
        assert!(matches!(b.check("theorem t : True := trivial", Duration::from_secs(1)), Err(BackendError::Unavailable { .. })));
    }

    #[test]
    fn mock_reply_shape() {
        let r = mock_repl_reply(r#"{"cmd":"check","id":7,"source":"theorem t : True := trivial"}"#).unwrap();
        assert_eq!(r, r#"{"id":7,"ok":true,"diagnostics":[]}"#);
        assert!(mock_repl_reply("garbage").is_none());
    }
}
