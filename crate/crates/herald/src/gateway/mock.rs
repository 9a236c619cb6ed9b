use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use herald_core::augment::VARIANT_INPUT_MARKER;
use herald_core::digest::digest;
use herald_core::text::{collapse_whitespace, fnv1a64, normalize_for_comparison};
use herald_core::validate::{section_after, BACK_MARKER, INPUT_MARKER, ORIGINAL_MARKER};

use super::{Completion, CompletionRequest, Provider, ProviderFailure};

/// Counts concurrent calls into a provider.
#[derive(Debug, Default)]
pub struct InFlightProbe {
    current: AtomicUsize,
    peak: AtomicUsize,
    total: AtomicU64,
}

impl InFlightProbe {
    pub fn peak(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    pub fn total(&self) -> u64 {
        self.total.load(Ordering::SeqCst)
    }

    fn enter(&self) {
        let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        self.total.fetch_add(1, Ordering::SeqCst);
    }

    fn leave(&self) {
        self.current.fetch_sub(1, Ordering::SeqCst);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockBehaviour {
    /// Writes a natural-language line from the prompt's last paragraph;
    /// rewrites variant prompts with a strategy prefix.
    Informalizer,
    /// Produces a compilable candidate carrying the informal text in a doc
    /// comment, or (with the given per-mille rate) a malformed one.
    Translator { corrupt_per_mille: u32 },
    /// Recovers the doc-comment text of a candidate.
    BackTranslator,
    /// ACCEPT when one normalised statement contains the other.
    NliJudge,
    /// Fixed outputs keyed by prompt digest, cycling over the sample index.
    Scripted { outputs: BTreeMap<String, Vec<String>>, fallback: String },
}

impl MockBehaviour {
    pub fn for_role(role: &str) -> Option<Self> {
        Some(match role {
            "informalizer" => MockBehaviour::Informalizer,
            "translator" => MockBehaviour::Translator { corrupt_per_mille: 0 },
            "back_translator" => MockBehaviour::BackTranslator,
            "nli_judge" => MockBehaviour::NliJudge,
            _ => return None,
        })
    }
}

/// Deterministic offline provider: every output is a pure function of the
/// prompt, the sample index, the model id and the seed.
pub struct MockProvider {
    id: String,
    behaviour: MockBehaviour,
    seed: u64,
    latency: Option<Duration>,
    probe: Option<Arc<InFlightProbe>>,
}

impl MockProvider {
    pub fn new(id: impl Into<String>, behaviour: MockBehaviour, seed: u64) -> Self {
        MockProvider { id: id.into(), behaviour, seed, latency: None, probe: None }
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = Some(latency);
        self
    }

    pub fn with_probe(mut self, probe: Arc<InFlightProbe>) -> Self {
        self.probe = Some(probe);
        self
    }

    fn hash(&self, req: &CompletionRequest, index: u32) -> u64 {
        fnv1a64(self.seed, &[req.prompt_text.as_bytes(), req.model_id.as_bytes(), &index.to_le_bytes()])
    }

    fn respond(&self, req: &CompletionRequest, index: u32) -> String {
        let prompt = req.prompt_text.as_str();
        match &self.behaviour {
            MockBehaviour::Informalizer => informalize(prompt, index),
            MockBehaviour::Translator { corrupt_per_mille } => {
                let informal = section_after(prompt, INPUT_MARKER).unwrap_or(prompt);
                let h = self.hash(req, index);
                let name = format!("cand_{:08x}", h as u32);
                if (h >> 32) % 1000 < u64::from(*corrupt_per_mille) {
                    format!("theorem {name} : := by")
                } else {
                    format!("/-- {} -/\ntheorem {name} : True := by sorry", collapse_whitespace(informal))
                }
            }
            MockBehaviour::BackTranslator => {
                let formal = section_after(prompt, INPUT_MARKER).unwrap_or(prompt);
                back_translate(formal)
            }
            MockBehaviour::NliJudge => {
                let original = normalize_for_comparison(section_after(prompt, ORIGINAL_MARKER).unwrap_or(""));
                let back = normalize_for_comparison(section_after(prompt, BACK_MARKER).unwrap_or(""));
                let same = !back.is_empty() && (original.contains(&back) || back.contains(&original));
                if same { "ACCEPT" } else { "REJECT" }.into()
            }
            MockBehaviour::Scripted { outputs, fallback } => match outputs.get(&digest(prompt)) {
                Some(list) if !list.is_empty() => list[index as usize % list.len()].clone(),
                _ => fallback.clone(),
            },
        }
    }
}

fn informalize(prompt: &str, index: u32) -> String {
    if let Some(source) = section_after(prompt, VARIANT_INPUT_MARKER) {
        let tag = prompt.lines().next().and_then(|l| l.strip_prefix("Strategy: ")).unwrap_or("variant");
        return format!("[{tag}] {source}");
    }
    let last = prompt.trim_end().rsplit("\n\n").next().unwrap_or("");
    let body = collapse_whitespace(last);
    if index == 0 {
        format!("Informally: {body}")
    } else {
        format!("Informally ({index}): {body}")
    }
}

fn back_translate(formal: &str) -> String {
    if let (Some(start), Some(end)) = (formal.find("/--"), formal.find("-/")) {
        if start < end {
            return collapse_whitespace(&formal[start + 3..end]);
        }
    }
    let text = collapse_whitespace(formal);
    text.trim_end_matches(":= by sorry").trim().to_string()
}

impl Provider for MockProvider {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn sample(&self, req: &CompletionRequest, index: u32) -> Result<Completion, ProviderFailure> {
        if let Some(p) = &self.probe {
            p.enter();
        }
        if let Some(d) = self.latency {
            thread::sleep(d);
        }
        let text = self.respond(req, index);
        if let Some(p) = &self.probe {
            p.leave();
        }
        Ok(Completion::stop(text))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use herald_core::augment::{variant_prompt, AugmentationStrategy};
    use herald_core::validate::{back_translation_prompt, formalization_prompt, nli_prompt};

    fn ask(b: MockBehaviour, prompt: &str) -> String {
        let req = CompletionRequest {
            prompt_text: prompt.into(),
            sample_count: 1,
            temperature: 1.0,
            max_output_tokens: 16,
            model_id: "m".into(),
        };
        MockProvider::new("mock", b, 0).sample(&req, 0).unwrap().text
    }

    #[test]
    fn translation_round_trip_is_consistent() {
        let informal = "Every prime greater than two is odd.";
        let formal = ask(MockBehaviour::Translator { corrupt_per_mille: 0 }, &formalization_prompt(informal));
        assert!(formal.contains(":= by sorry"));
        let back = ask(MockBehaviour::BackTranslator, &back_translation_prompt(&formal));
        assert_eq!(back, informal);
        assert_eq!(ask(MockBehaviour::NliJudge, &nli_prompt(informal, &back)), "ACCEPT");
        assert_eq!(ask(MockBehaviour::NliJudge, &nli_prompt(informal, "Something else.")), "REJECT");
    }

    #[test]
    fn fully_corrupt_translator() {
        let out = ask(MockBehaviour::Translator { corrupt_per_mille: 1000 }, &formalization_prompt("x"));
        assert!(out.ends_with(": := by"));
    }

    #[test]
    fn variant_differs_from_source() {
        let s = AugmentationStrategy::ALL[3];
        let out = ask(MockBehaviour::Informalizer, &variant_prompt(s, "If A, then B."));
        assert_eq!(out, "[multi_linguistic_translation:zh] If A, then B.");
    }

    #[test]
    fn scripted_cycles() {
        let prompt = "p";
        let mut outputs = BTreeMap::new();
        outputs.insert(digest(prompt), vec!["a".to_string(), "b".to_string()]);
        let p = MockProvider::new("s", MockBehaviour::Scripted { outputs, fallback: "z".into() }, 0);
        let req = CompletionRequest { prompt_text: prompt.into(), sample_count: 3, temperature: 0.0, max_output_tokens: 1, model_id: "m".into() };
        let got: Vec<String> = (0..3).map(|i| p.sample(&req, i).unwrap().text).collect();
        assert_eq!(got, ["a", "b", "a"]);
        assert_eq!(ask(MockBehaviour::Scripted { outputs: BTreeMap::new(), fallback: "z".into() }, "q"), "z");
    }
}
