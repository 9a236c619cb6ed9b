//! Template registry and prompt assembly.
//!
//! A template is an ordered list of segments. Literal segments are copied
//! as-is; field segments pull one named value out of a statement or proof
//! context. A field that renders empty is omitted together with its heading,
//! unless the template marks it required, in which case assembly fails.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusIndex, DeclKind, DeclarationRecord, NeighborSet, ProofState, ProofStep};
use crate::digest::digest;

pub const REGISTRY_SCHEMA_VERSION: &str = "1";
pub const NO_NOTE: &str = "(no note for this tactic)";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("registry schema_version `{0}` is not supported")]
    SchemaVersion(String),
    #[error("duplicate template id `{0}`")]
    DuplicateTemplate(String),
    #[error("template `{template}` uses field `{field}`, which belongs to a different context")]
    ForeignField { template: String, field: Field },
    #[error("statement template `{0}` has no principles")]
    NoPrinciples(String),
    #[error("template `{0}` applies to nothing")]
    EmptyAppliesTo(String),
    #[error("default template `{0}` is not in the registry")]
    UnknownDefault(String),
    #[error("no template for `{0}` and no default")]
    NoTemplate(TemplateTarget),
    #[error("template `{template}` requires field `{field}`, which is empty")]
    MissingField { template: String, field: Field },
    #[error("{translations} stepwise translation(s) for {steps} step(s)")]
    LengthMismatch { steps: usize, translations: usize },
    #[error("proof context has no steps")]
    NoSteps,
    #[error("proof context has an empty informal statement")]
    NoInformalStatement,
    #[error("focus step {focus} out of range for {steps} step(s)")]
    FocusOutOfRange { focus: usize, steps: usize },
}

/// What a template can be selected for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TemplateTarget {
    Kind(DeclKind),
    Proof,
    ProofSummary,
}

impl TemplateTarget {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "proof" => Some(TemplateTarget::Proof),
            "proof_summary" => Some(TemplateTarget::ProofSummary),
            other => DeclKind::parse(other).map(TemplateTarget::Kind),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateTarget::Kind(k) => k.as_str(),
            TemplateTarget::Proof => "proof",
            TemplateTarget::ProofSummary => "proof_summary",
        }
    }

    fn family(self) -> Family {
        match self {
            TemplateTarget::Kind(_) => Family::Statement,
            TemplateTarget::Proof => Family::Proof,
            TemplateTarget::ProofSummary => Family::Summary,
        }
    }
}

impl fmt::Display for TemplateTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for TemplateTarget {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for TemplateTarget {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        TemplateTarget::parse(&s).ok_or_else(|| serde::de::Error::custom(alloc::format!("unknown template target `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Statement,
    Proof,
    Summary,
}

/// Context values a field segment can name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Principles,
    Retrieved,
    HeadStatements,
    Docstring,
    DependentTranslations,
    Neighbors,
    Signature,
    Kind,
    Name,
    FormalStatement,
    InformalStatement,
    Steps,
    FocusStep,
    StepwiseTranslations,
}

impl Field {
    fn usable_in(self, family: Family) -> bool {
        use Field::*;
        match self {
            Principles => true,
            Retrieved | HeadStatements | Docstring | DependentTranslations | Neighbors | Signature | Kind | Name => {
                family == Family::Statement
            }
            FormalStatement | InformalStatement => family != Family::Statement,
            Steps | FocusStep => family == Family::Proof,
            StepwiseTranslations => family == Family::Summary,
        }
    }

    fn as_str(self) -> &'static str {
        use Field::*;
        match self {
            Principles => "principles",
            Retrieved => "retrieved",
            HeadStatements => "head_statements",
            Docstring => "docstring",
            DependentTranslations => "dependent_translations",
            Neighbors => "neighbors",
            Signature => "signature",
            Kind => "kind",
            Name => "name",
            FormalStatement => "formal_statement",
            InformalStatement => "informal_statement",
            Steps => "steps",
            FocusStep => "focus_step",
            StepwiseTranslations => "stepwise_translations",
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Segment {
    Text {
        text: String,
    },
    Field {
        field: Field,
        #[serde(default)]
        required: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        heading: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    pub id: String,
    pub applies_to: BTreeSet<TemplateTarget>,
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub principles: Vec<String>,
}

impl PromptTemplate {
    fn family(&self) -> Option<Family> {
        self.applies_to.iter().next().map(|t| t.family())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateRegistry {
    pub schema_version: String,
    #[serde(default)]
    pub default_template: Option<String>,
    pub templates: Vec<PromptTemplate>,
}

impl TemplateRegistry {
    /// Checks structure; call once after deserializing.
    pub fn validate(&self) -> Result<(), PromptError> {
        if self.schema_version != REGISTRY_SCHEMA_VERSION {
            return Err(PromptError::SchemaVersion(self.schema_version.clone()));
        }
        let mut ids = BTreeSet::new();
        for t in &self.templates {
            if !ids.insert(t.id.as_str()) {
                return Err(PromptError::DuplicateTemplate(t.id.clone()));
            }
            if t.applies_to.is_empty() {
                return Err(PromptError::EmptyAppliesTo(t.id.clone()));
            }
            let statement = t.applies_to.iter().any(|a| a.family() == Family::Statement);
            for target in &t.applies_to {
                for seg in &t.segments {
                    if let Segment::Field { field, .. } = seg {
                        if !field.usable_in(target.family()) {
                            return Err(PromptError::ForeignField { template: t.id.clone(), field: *field });
                        }
                    }
                }
            }
            if statement && t.principles.iter().all(|p| p.trim().is_empty()) {
                return Err(PromptError::NoPrinciples(t.id.clone()));
            }
        }
        if let Some(d) = &self.default_template {
            if !ids.contains(d.as_str()) {
                return Err(PromptError::UnknownDefault(d.clone()));
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&PromptTemplate> {
        self.templates.iter().find(|t| t.id == id)
    }

    /// The template with the smallest `applies_to` containing `target`
    /// (first in file order on equal size), else the registry default.
    pub fn select_template(&self, target: TemplateTarget) -> Result<&PromptTemplate, PromptError> {
        self.templates
            .iter()
            .filter(|t| t.applies_to.contains(&target))
            .min_by_key(|t| t.applies_to.len())
            .or_else(|| {
                let d = self.get(self.default_template.as_deref()?)?;
                // a statement default never serves proofs and vice versa
                (d.family() == Some(target.family())).then_some(d)
            })
            .ok_or(PromptError::NoTemplate(target))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependentTranslation {
    pub full_name: String,
    pub level: u32,
    pub informal_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborEntry {
    pub full_name: String,
    pub signature: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedExample {
    pub id: String,
    pub formal_text: String,
    pub informal_text: String,
    pub score: f64,
}

impl From<crate::retrieval::ScoredExample<'_>> for RetrievedExample {
    fn from(s: crate::retrieval::ScoredExample<'_>) -> Self {
        RetrievedExample {
            id: s.example.id.clone(),
            formal_text: s.example.formal_text.clone(),
            informal_text: s.example.informal_text.clone(),
            score: s.score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementContext {
    pub subject: DeclarationRecord,
    pub head_statements: String,
    pub dependent_translations: Vec<DependentTranslation>,
    pub neighbors: Vec<NeighborEntry>,
    pub retrieved: Vec<RetrievedExample>,
}

impl StatementContext {
    /// Dependencies of `subject` with a strictly lower level and a known
    /// translation, ordered by (level, name).
    pub fn dependents_of(
        subject: &DeclarationRecord,
        level_of: &BTreeMap<String, u32>,
        translations: &BTreeMap<String, String>,
    ) -> Vec<DependentTranslation> {
        let own = level_of.get(&subject.full_name).copied().unwrap_or(u32::MAX);
        let mut out: Vec<DependentTranslation> = subject
            .dependencies
            .iter()
            .filter_map(|d| {
                let level = *level_of.get(d)?;
                let text = translations.get(d)?;
                (level < own).then(|| DependentTranslation {
                    full_name: d.clone(),
                    level,
                    informal_text: text.clone(),
                })
            })
            .collect();
        sort_dependents(&mut out);
        out
    }

    /// Signatures for the distinct names of a neighbour set.
    pub fn neighbor_entries(index: &CorpusIndex, set: &NeighborSet) -> Vec<NeighborEntry> {
        set.distinct()
            .into_iter()
            .filter_map(|n| index.get(n))
            .map(|d| NeighborEntry { full_name: d.full_name.clone(), signature: d.signature.clone() })
            .collect()
    }
}

fn sort_dependents(deps: &mut [DependentTranslation]) {
    deps.sort_by(|a, b| a.level.cmp(&b.level).then_with(|| a.full_name.cmp(&b.full_name)));
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofContext {
    pub formal_statement: String,
    pub informal_statement: String,
    pub steps: Vec<ProofStep>,
    pub tactic_notes: BTreeMap<String, String>,
    /// Index of the step the prompt asks to translate, when translating one
    /// step at a time.
    #[serde(default)]
    pub focus_step: Option<usize>,
}

impl ProofContext {
    fn check(&self) -> Result<(), PromptError> {
        if self.steps.is_empty() {
            return Err(PromptError::NoSteps);
        }
        if self.informal_statement.trim().is_empty() {
            return Err(PromptError::NoInformalStatement);
        }
        if let Some(f) = self.focus_step {
            if f >= self.steps.len() {
                return Err(PromptError::FocusOutOfRange { focus: f, steps: self.steps.len() });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub template_id: String,
    pub context_digest: String,
}

impl RenderedPrompt {
    fn new(template_id: &str, text: String) -> Self {
        let mut keyed = String::with_capacity(template_id.len() + 1 + text.len());
        keyed.push_str(template_id);
        keyed.push('\0');
        keyed.push_str(&text);
        RenderedPrompt { context_digest: digest(&keyed), template_id: template_id.into(), text }
    }
}

/// What budget truncation removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Truncation {
    pub neighbors_dropped: usize,
    pub head_statements_dropped: bool,
    /// Still longer than the budget after every droppable part is gone.
    pub over_budget: bool,
}

fn render(template: &PromptTemplate, value: impl Fn(Field) -> String) -> Result<RenderedPrompt, PromptError> {
    let mut text = String::new();
    for seg in &template.segments {
        match seg {
            Segment::Text { text: literal } => text.push_str(literal),
            Segment::Field { field, required, heading } => {
                let v = value(*field);
                if v.trim().is_empty() {
                    if *required {
                        return Err(PromptError::MissingField { template: template.id.clone(), field: *field });
                    }
                    continue;
                }
                if let Some(h) = heading {
                    text.push_str(h);
                    text.push('\n');
                }
                text.push_str(v.trim_end());
                text.push_str("\n\n");
            }
        }
    }
    let trimmed = text.trim_end().len();
    text.truncate(trimmed);
    text.push('\n');
    Ok(RenderedPrompt::new(&template.id, text))
}

fn numbered(items: &[String]) -> String {
    let mut out = String::new();
    for (i, p) in items.iter().filter(|p| !p.trim().is_empty()).enumerate() {
        let _ = writeln!(out, "{}. {}", i + 1, p.trim());
    }
    out
}

fn statement_value(template: &PromptTemplate, ctx: &StatementContext, field: Field) -> String {
    match field {
        Field::Principles => numbered(&template.principles),
        Field::Retrieved => {
            let mut out = String::new();
            for (i, ex) in ctx.retrieved.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                let _ = writeln!(out, "Formal statement:\n{}\nInformal statement:\n{}", ex.formal_text, ex.informal_text);
            }
            out
        }
        Field::HeadStatements => ctx.head_statements.clone(),
        Field::Docstring => ctx.subject.docstring.clone().unwrap_or_default(),
        Field::DependentTranslations => {
            let mut deps = ctx.dependent_translations.clone();
            sort_dependents(&mut deps);
            let mut out = String::new();
            for d in &deps {
                let _ = writeln!(out, "- {}: {}", d.full_name, d.informal_text);
            }
            out
        }
        Field::Neighbors => {
            let mut out = String::new();
            for n in &ctx.neighbors {
                let _ = writeln!(out, "{}", n.signature);
            }
            out
        }
        Field::Signature => ctx.subject.signature.clone(),
        Field::Kind => ctx.subject.kind.as_str().to_string(),
        Field::Name => ctx.subject.full_name.clone(),
        _ => String::new(),
    }
}

fn render_state(out: &mut String, label: &str, state: &ProofState) {
    let _ = writeln!(out, "{label}:");
    if state.goals.is_empty() && state.hypotheses.is_empty() {
        out.push_str("  no goals\n");
        return;
    }
    for h in &state.hypotheses {
        let _ = writeln!(out, "  {} : {}", h.name, h.type_expr);
    }
    if state.goals.is_empty() {
        out.push_str("  no goals\n");
    }
    for g in &state.goals {
        let _ = writeln!(out, "  ⊢ {g}");
    }
}

fn step_block(out: &mut String, position: usize, step: &ProofStep, notes: &BTreeMap<String, String>) {
    let _ = writeln!(out, "Step {}: {}", position + 1, step.tactic_text);
    let note = notes.get(step.tactic_name()).map_or(NO_NOTE, String::as_str);
    let _ = writeln!(out, "Tactic note: {note}");
    render_state(out, "State before", &step.state_before);
    render_state(out, "State after", &step.state_after);
}

fn proof_value(template: &PromptTemplate, ctx: &ProofContext, translations: &[String], field: Field) -> String {
    match field {
        Field::Principles => numbered(&template.principles),
        Field::FormalStatement => ctx.formal_statement.clone(),
        Field::InformalStatement => ctx.informal_statement.clone(),
        Field::Steps => {
            let mut out = String::new();
            for (i, step) in ctx.steps.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                step_block(&mut out, i, step, &ctx.tactic_notes);
            }
            out
        }
        Field::FocusStep => match ctx.focus_step {
            Some(i) => alloc::format!("Step {}: {}", i + 1, ctx.steps[i].tactic_text),
            None => String::new(),
        },
        Field::StepwiseTranslations => {
            let mut out = String::new();
            for (i, t) in translations.iter().enumerate() {
                let _ = writeln!(out, "Step {} ({}): {}", i + 1, ctx.steps[i].tactic_text, t.trim());
            }
            out
        }
        _ => String::new(),
    }
}

pub fn assemble_statement_prompt(ctx: &StatementContext, registry: &TemplateRegistry) -> Result<RenderedPrompt, PromptError> {
    let template = registry.select_template(TemplateTarget::Kind(ctx.subject.kind))?;
    render(template, |f| statement_value(template, ctx, f))
}

/// Like [`assemble_statement_prompt`], dropping neighbours (last first) and
/// then the head statements until the text fits in `max_chars` characters.
/// Dependent translations and the subject are never dropped.
pub fn assemble_statement_prompt_within(
    ctx: &StatementContext,
    registry: &TemplateRegistry,
    max_chars: usize,
) -> Result<(RenderedPrompt, Truncation), PromptError> {
    let mut work = ctx.clone();
    let mut note = Truncation::default();
    loop {
        let prompt = assemble_statement_prompt(&work, registry)?;
        if prompt.text.chars().count() <= max_chars {
            return Ok((prompt, note));
        }
        if work.neighbors.pop().is_some() {
            note.neighbors_dropped += 1;
        } else if !work.head_statements.is_empty() {
            work.head_statements.clear();
            note.head_statements_dropped = true;
        } else {
            note.over_budget = true;
            return Ok((prompt, note));
        }
    }
}

pub fn assemble_proof_prompt(ctx: &ProofContext, registry: &TemplateRegistry) -> Result<RenderedPrompt, PromptError> {
    ctx.check()?;
    let template = registry.select_template(TemplateTarget::Proof)?;
    render(template, |f| proof_value(template, ctx, &[], f))
}

pub fn summarize_steps_prompt(
    stepwise_translations: &[String],
    ctx: &ProofContext,
    registry: &TemplateRegistry,
) -> Result<RenderedPrompt, PromptError> {
    ctx.check()?;
    if stepwise_translations.len() != ctx.steps.len() {
        return Err(PromptError::LengthMismatch { steps: ctx.steps.len(), translations: stepwise_translations.len() });
    }
    let template = registry.select_template(TemplateTarget::ProofSummary)?;
    render(template, |f| proof_value(template, ctx, stepwise_translations, f))
}


#[cfg(test)]
mod tests {
    use super::fixtures::registry;
    use super::*;
    use crate::corpus::fixtures::decl;
    use crate::corpus::Hypothesis;
    use alloc::vec;
    use proptest::prelude::*;

    fn ctx() -> StatementContext {
        StatementContext {
            subject: decl("A.b", "f", 1, &[]),
            head_statements: String::new(),
            dependent_translations: vec![],
            neighbors: vec![],
            retrieved: vec![],
        }
    }

    fn proof_ctx(n: usize) -> ProofContext {
        let steps = (0..n)
            .map(|i| ProofStep {
                tactic_text: if i == 0 { "rw [foo]".into() } else { "frobnicate".into() },
                state_before: ProofState { hypotheses: vec![Hypothesis::new("x", "ℂ")], goals: vec!["P x".into()] },
                state_after: ProofState::default(),
                step_index: i as u32,
            })
            .collect();
        ProofContext {
            formal_statement: "theorem t (x : ℂ) : P x".into(),
            informal_statement: "P holds.".into(),
            steps,
            tactic_notes: [("rw".to_string(), "Rewrites with an equation.".to_string())].into_iter().collect(),
            focus_step: None,
        }
    }

    #[test]
    fn registry_validates() {
        registry().validate().unwrap();
        let mut r = registry();
        r.templates[0].principles.clear();
        assert_eq!(r.validate(), Err(PromptError::NoPrinciples("statement".into())));
        let mut r = registry();
        r.templates[2].segments.push(Segment::Field { field: Field::Signature, required: false, heading: None });
        assert!(matches!(r.validate(), Err(PromptError::ForeignField { .. })));
    }

    #[test]
    fn selection() {
        let r = registry();
        assert_eq!(r.select_template(TemplateTarget::Kind(DeclKind::Theorem)).unwrap().id, "theorem");
        assert_eq!(r.select_template(TemplateTarget::Kind(DeclKind::Opaque)).unwrap().id, "statement");
        assert_eq!(r.select_template(TemplateTarget::Proof).unwrap().id, "proof");
        let only_default = TemplateRegistry { templates: vec![r.templates[0].clone()], ..r.clone() };
        assert_eq!(only_default.select_template(TemplateTarget::Kind(DeclKind::Opaque)).unwrap().id, "statement");
        assert!(matches!(only_default.select_template(TemplateTarget::Proof), Err(PromptError::NoTemplate(_))));
        let none = TemplateRegistry { default_template: None, templates: vec![], ..r };
        assert!(matches!(none.select_template(TemplateTarget::Kind(DeclKind::Opaque)), Err(PromptError::NoTemplate(_))));
    }

    #[test]
    fn targets_round_trip_as_strings() {
        let json = serde_json::to_string(&TemplateTarget::Kind(DeclKind::ClassInductive)).unwrap();
        assert_eq!(json, "\"classInductive\"");
        let back: TemplateTarget = serde_json::from_str("\"proof_summary\"").unwrap();
        assert_eq!(back, TemplateTarget::ProofSummary);
        assert!(serde_json::from_str::<TemplateTarget>("\"axiom\"").is_err());
    }

    #[test]
    fn minimal_context_has_only_principles_and_signature() {
        let p = assemble_statement_prompt(&ctx(), &registry()).unwrap();
        assert!(p.text.contains("Principles:\n1. State hypotheses first."));
        assert!(p.text.contains("Statement:\ntheorem A.b : True"));
        for absent in ["Examples:", "File context:", "Docstring:", "Dependencies:", "Related declarations:"] {
            assert!(!p.text.contains(absent), "{absent}");
        }
        assert_eq!(p.template_id, "theorem");
        assert_eq!(p.context_digest.len(), 64);
    }

    #[test]
    fn dependency_translation_included_verbatim() {
        let mut c = ctx();
        c.dependent_translations.push(DependentTranslation {
            full_name: "A.a".into(),
            level: 0,
            informal_text: "Every widget is a gadget.".into(),
        });
        let p = assemble_statement_prompt(&c, &registry()).unwrap();
        assert!(p.text.contains("Every widget is a gadget."));
    }

    #[test]
    fn required_empty_field_is_missing() {
        let mut c = ctx();
        c.subject.signature = "  ".into();
        assert!(matches!(
            assemble_statement_prompt(&c, &registry()),
            Err(PromptError::MissingField { field: Field::Signature, .. })
        ));
    }

    #[test]
    fn dependents_filtered_and_ordered() {
        let subject = decl("Z", "f", 9, &["b", "a", "c", "gone"]);
        let level_of: BTreeMap<String, u32> =
            [("a", 1), ("b", 0), ("c", 3), ("Z", 3)].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        let tr: BTreeMap<String, String> =
            ["a", "b", "c", "gone"].into_iter().map(|k| (k.to_string(), alloc::format!("text {k}"))).collect();
        let deps = StatementContext::dependents_of(&subject, &level_of, &tr);
        let names: Vec<&str> = deps.iter().map(|d| d.full_name.as_str()).collect();
        assert_eq!(names, vec!["b", "a"]);
    }

    #[test]
    fn proof_prompt_steps_and_notes() {
        let p = assemble_proof_prompt(&proof_ctx(2), &registry()).unwrap();
        assert!(p.text.contains("Step 1: rw [foo]\nTactic note: Rewrites with an equation."));
        assert!(p.text.contains(&alloc::format!("Step 2: frobnicate\nTactic note: {NO_NOTE}")));
        assert!(p.text.contains("  x : ℂ\n  ⊢ P x"));
        assert!(p.text.contains("State after:\n  no goals"));
        assert!(!p.text.contains("Translate this step:"));

        let mut focused = proof_ctx(2);
        focused.focus_step = Some(1);
        let p = assemble_proof_prompt(&focused, &registry()).unwrap();
        assert!(p.text.contains("Translate this step:\nStep 2: frobnicate"));
        focused.focus_step = Some(2);
        assert!(matches!(assemble_proof_prompt(&focused, &registry()), Err(PromptError::FocusOutOfRange { .. })));
    }

    #[test]
    fn summary_length_checks() {
        let r = registry();
        assert!(summarize_steps_prompt(&["one".into()], &proof_ctx(1), &r).is_ok());
        assert_eq!(
            summarize_steps_prompt(&["a".into(), "b".into()], &proof_ctx(3), &r),
            Err(PromptError::LengthMismatch { steps: 3, translations: 2 })
        );
    }

    #[test]
    fn proof_context_invariants() {
        let mut c = proof_ctx(1);
        c.informal_statement.clear();
        assert_eq!(assemble_proof_prompt(&c, &registry()), Err(PromptError::NoInformalStatement));
        assert_eq!(assemble_proof_prompt(&proof_ctx(0), &registry()), Err(PromptError::NoSteps));
    }

    #[test]
    fn budget_drops_neighbors_then_head() {
        let mut c = ctx();
        c.head_statements = "H".repeat(100);
        c.neighbors = (0..5).map(|i| NeighborEntry { full_name: alloc::format!("n{i}"), signature: "N".repeat(50) }).collect();
        c.dependent_translations.push(DependentTranslation { full_name: "d".into(), level: 0, informal_text: "D".repeat(40) });
        let full = assemble_statement_prompt(&c, &registry()).unwrap().text.chars().count();
        let (p, t) = assemble_statement_prompt_within(&c, &registry(), full - 60).unwrap();
        assert_eq!((t.neighbors_dropped, t.head_statements_dropped), (2, false));
        assert!(p.text.chars().count() <= full - 60);
        let (p, t) = assemble_statement_prompt_within(&c, &registry(), 100).unwrap();
        assert_eq!((t.neighbors_dropped, t.head_statements_dropped), (5, true));
        assert!(p.text.contains(&"D".repeat(40)));
        assert!(t.over_budget);
    }

    fn text() -> impl Strategy<Value = String> {
        "[a-zA-Z0-9∀∃→]([a-zA-Z0-9 ∀∃→]{0,22}[a-zA-Z0-9∀∃→])?"
    }

    proptest! {
        #[test]
        fn statement_rendering_is_deterministic_and_complete(
            doc in proptest::option::of(text()),
            head in text(),
            deps in proptest::collection::vec((text(), 0u32..3, text()), 0..4),
            neigh in proptest::collection::vec(text(), 0..3),
        ) {
            let mut c = ctx();
            c.subject.docstring = doc.clone();
            c.head_statements = head.clone();
            c.dependent_translations = deps
                .iter()
                .map(|(n, l, t)| DependentTranslation { full_name: n.clone(), level: *l, informal_text: t.clone() })
                .collect();
            c.neighbors = neigh.iter().map(|s| NeighborEntry { full_name: "x".into(), signature: s.clone() }).collect();
            let a = assemble_statement_prompt(&c, &registry()).unwrap();
            let b = assemble_statement_prompt(&c.clone(), &registry()).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!(a.text.contains(head.trim_end()));
            if let Some(d) = &doc {
                prop_assert!(a.text.contains(d.trim_end()));
            }
            for (_, _, t) in &deps {
                prop_assert!(a.text.contains(t.as_str()));
            }
            for s in &neigh {
                prop_assert!(a.text.contains(s.trim_end()));
            }

            // dependency lines appear in (level, name) order
            let mut sorted = c.dependent_translations.clone();
            sort_dependents(&mut sorted);
            let mut cursor = 0;
            for d in &sorted {
                let line = alloc::format!("- {}: {}", d.full_name, d.informal_text);
                let at = a.text[cursor..].find(&line);
                prop_assert!(at.is_some());
                cursor += at.unwrap() + line.len();
            }
        }

        #[test]
        fn equal_digest_means_equal_text(s1 in text(), s2 in text()) {
            let mut c1 = ctx();
            c1.subject.signature = s1;
            let mut c2 = ctx();
            c2.subject.signature = s2;
            let (a, b) = (assemble_statement_prompt(&c1, &registry()).unwrap(), assemble_statement_prompt(&c2, &registry()).unwrap());
            prop_assert_eq!(a.context_digest == b.context_digest, a.text == b.text);
        }
    }
}
