use alloc::string::String;
use alloc::vec::Vec;

use super::{
    BackendError, ChatMessage, ExtractorBackend, NerBackend, NliBackend, NliLabel, NliVerdict, PredicateObject,
    PredicateObjectBackend,
};
use crate::text::{is_one_of, words, AUXILIARIES, DETERMINERS, NEGATIONS, NON_VERBS, PREPOSITIONS};

/// Rule-based NLI: exact substring means entailment; two texts equal up to
/// an odd number of negation tokens contradict; anything else is neutral.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleNli;

fn strip_negation(text: &str) -> (Vec<String>, usize) {
    let mut kept = Vec::new();
    let mut negations = 0;
    for w in words(text) {
        if is_one_of(&w, NEGATIONS) {
            negations += 1;
            continue;
        }
        let base = match w.as_str() {
            "can't" | "cannot" => Some("can"),
            "won't" => Some("will"),
            _ => w.strip_suffix("n't"),
        };
        match base {
            Some(b) => {
                negations += 1;
                if !b.is_empty() {
                    kept.push(b.into());
                }
            }
            None => kept.push(w),
        }
    }
    (kept, negations)
}

impl NliBackend for RuleNli {
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, BackendError> {
        let label = if premise.contains(hypothesis) {
            NliLabel::Entailment
        } else {
            let (p, pn) = strip_negation(premise);
            let (h, hn) = strip_negation(hypothesis);
            if !p.is_empty() && p == h && pn % 2 != hn % 2 {
                NliLabel::Contradiction
            } else {
                NliLabel::Neutral
            }
        };
        Ok(NliVerdict { label, confidence: 1.0 })
    }
}

fn stops_phrase(w: &str) -> bool {
    is_one_of(w, DETERMINERS) || is_one_of(w, PREPOSITIONS) || is_one_of(w, AUXILIARIES) || is_one_of(w, NEGATIONS)
}

/// Noun phrases introduced by a determiner ("the desired dishes" gives
/// "desired dishes"), ending at the next function word or punctuation.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicNer;

impl NerBackend for HeuristicNer {
    fn entities(&self, text: &str) -> Vec<String> {
        let raw: Vec<&str> = text.split_whitespace().collect();
        let mut out: Vec<String> = Vec::new();
        let mut i = 0;
        while i < raw.len() {
            let w = raw[i].trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
            if !is_one_of(&w, DETERMINERS) {
                i += 1;
                continue;
            }
            let mut phrase: Vec<String> = Vec::new();
            let mut j = i + 1;
            while j < raw.len() {
                let tok = raw[j];
                let clean = tok.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
                if clean.is_empty() || stops_phrase(&clean) {
                    break;
                }
                phrase.push(clean);
                j += 1;
                if tok.ends_with(|c: char| !c.is_alphanumeric()) {
                    break;
                }
            }
            if !phrase.is_empty() {
                let p = phrase.join(" ");
                if !out.contains(&p) {
                    out.push(p);
                }
            }
            i = j.max(i + 1);
        }
        out
    }
}

/// Predicate = first verb-like token; object = the following noun phrase up
/// to a preposition, without leading determiners.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicPredicateObject;

fn strip_determiners(tokens: &[String]) -> &[String] {
    let skip = tokens.iter().take_while(|t| is_one_of(t, DETERMINERS)).count();
    &tokens[skip..]
}

impl HeuristicPredicateObject {
    pub fn parse(action: &str) -> PredicateObject {
        let tokens = words(action);
        let lead = tokens.iter().take_while(|t| is_one_of(t, NON_VERBS)).count();
        let tokens = &tokens[lead..];
        let Some(first) = tokens.first() else {
            return PredicateObject {
                predicate: String::new(),
                object: String::new(),
                low_confidence: true,
            };
        };
        let verb_like = !stops_phrase(first) && !first.chars().all(|c| c.is_ascii_digit());
        if !verb_like {
            return PredicateObject {
                predicate: first.clone(),
                object: strip_determiners(&tokens[1..]).join(" "),
                low_confidence: true,
            };
        }
        let mut rest = &tokens[1..];
        // "fill in the form": a particle straight after the verb is skipped
        if rest.first().is_some_and(|t| is_one_of(t, PREPOSITIONS)) {
            rest = &rest[1..];
        }
        let end = rest.iter().position(|t| is_one_of(t, PREPOSITIONS)).unwrap_or(rest.len());
        PredicateObject {
            predicate: first.clone(),
            object: strip_determiners(&rest[..end]).join(" "),
            low_confidence: false,
        }
    }
}

impl PredicateObjectBackend for HeuristicPredicateObject {
    fn extract(&self, action: &str) -> Result<PredicateObject, BackendError> {
        Ok(HeuristicPredicateObject::parse(action))
    }
}

/// Replays a fixed list of responses; the last one repeats.
#[derive(Debug, Clone, Default)]
pub struct ScriptedExtractor {
    pub responses: Vec<String>,
    pub calls: usize,
}

impl ScriptedExtractor {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        ScriptedExtractor {
            responses: responses.into_iter().map(Into::into).collect(),
            calls: 0,
        }
    }
}

impl ExtractorBackend for ScriptedExtractor {
    fn extract(&mut self, _conversation: &[ChatMessage]) -> Result<String, BackendError> {
        let Some(last) = self.responses.len().checked_sub(1) else {
            return Err(BackendError::FixtureMiss("scripted extractor has no responses".into()));
        };
        let r = self.responses[self.calls.min(last)].clone();
        self.calls += 1;
        Ok(r)
    }
}
