//! Self-refinement: an extractor proposes a graph, two verifiers check its
//! gateways, and their findings go back to the extractor as a new turn.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{
    BackendError, ChatMessage, ExtractorBackend, HeuristicPredicateObject, NliBackend, NliLabel, PredicateObject,
    PredicateObjectBackend,
};
use crate::dotlang::{parse, ParseError};
use crate::graph::{EdgeKind, GatewayType, NodeId, NodeKind, ProceduralGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeedbackKind {
    XorShouldBeOr,
    OrShouldBeXor,
    InvalidParallel,
    MissingParallel,
}

impl FeedbackKind {
    pub const ALL: [FeedbackKind; 4] = [
        FeedbackKind::XorShouldBeOr,
        FeedbackKind::OrShouldBeXor,
        FeedbackKind::InvalidParallel,
        FeedbackKind::MissingParallel,
    ];

    /// Template file stem.
    pub fn file_stem(self) -> &'static str {
        match self {
            FeedbackKind::XorShouldBeOr => "xor_should_be_or",
            FeedbackKind::OrShouldBeXor => "or_should_be_xor",
            FeedbackKind::InvalidParallel => "invalid_parallel",
            FeedbackKind::MissingParallel => "missing_parallel",
        }
    }

    /// Elements expected: the gateway for condition findings; gateway and two
    /// actions for an invalid parallel; two actions for a missing one.
    fn arity(self) -> usize {
        match self {
            FeedbackKind::XorShouldBeOr | FeedbackKind::OrShouldBeXor => 1,
            FeedbackKind::InvalidParallel => 3,
            FeedbackKind::MissingParallel => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackElement {
    pub id: NodeId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub kind: FeedbackKind,
    pub elements: Vec<FeedbackElement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditions: Option<(String, String)>,
    /// Shared object (invalid parallel) or shared predicate (missing parallel).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub rendered: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackTemplates {
    pub xor_should_be_or: String,
    pub or_should_be_xor: String,
    pub invalid_parallel: String,
    pub missing_parallel: String,
}

impl Default for FeedbackTemplates {
    fn default() -> Self {
        FeedbackTemplates {
            xor_should_be_or: include_str!("../templates/xor_should_be_or.txt").into(),
            or_should_be_xor: include_str!("../templates/or_should_be_xor.txt").into(),
            invalid_parallel: include_str!("../templates/invalid_parallel.txt").into(),
            missing_parallel: include_str!("../templates/missing_parallel.txt").into(),
        }
    }
}

impl FeedbackTemplates {
    pub fn get(&self, kind: FeedbackKind) -> &str {
        match kind {
            FeedbackKind::XorShouldBeOr => &self.xor_should_be_or,
            FeedbackKind::OrShouldBeXor => &self.or_should_be_xor,
            FeedbackKind::InvalidParallel => &self.invalid_parallel,
            FeedbackKind::MissingParallel => &self.missing_parallel,
        }
    }

    pub fn set(&mut self, kind: FeedbackKind, text: String) {
        match kind {
            FeedbackKind::XorShouldBeOr => self.xor_should_be_or = text,
            FeedbackKind::OrShouldBeXor => self.or_should_be_xor = text,
            FeedbackKind::InvalidParallel => self.invalid_parallel = text,
            FeedbackKind::MissingParallel => self.missing_parallel = text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefineError {
    #[error("nli-unavailable: {0}")]
    NliUnavailable(BackendError),
    #[error("{kind:?} takes {expected} element(s), got {got}")]
    Arity { kind: FeedbackKind, expected: usize, got: usize },
    #[error("{0:?} is missing its condition pair")]
    MissingConditions(FeedbackKind),
    #[error("no template for {0:?}")]
    MissingTemplate(FeedbackKind),
    #[error("extractor failed: {0}")]
    Extractor(BackendError),
}

/// Fill the template for `kind`.
pub fn render_feedback(
    kind: FeedbackKind,
    elements: &[FeedbackElement],
    conditions: Option<&(String, String)>,
    detail: Option<&str>,
    templates: &FeedbackTemplates,
) -> Result<String, RefineError> {
    if elements.len() != kind.arity() {
        return Err(RefineError::Arity {
            kind,
            expected: kind.arity(),
            got: elements.len(),
        });
    }
    let template = templates.get(kind).trim_end();
    if template.is_empty() {
        return Err(RefineError::MissingTemplate(kind));
    }
    let mut vars: Vec<(&str, &str)> = Vec::new();
    match kind {
        FeedbackKind::XorShouldBeOr | FeedbackKind::OrShouldBeXor => {
            let (c1, c2) = conditions.ok_or(RefineError::MissingConditions(kind))?;
            vars.extend([("gateway", elements[0].text.as_str()), ("condition1", c1), ("condition2", c2)]);
        }
        FeedbackKind::InvalidParallel => {
            vars.extend([
                ("gateway", elements[0].text.as_str()),
                ("action1", elements[1].text.as_str()),
                ("action2", elements[2].text.as_str()),
                ("object", detail.unwrap_or_default()),
            ]);
        }
        FeedbackKind::MissingParallel => {
            vars.extend([
                ("action1", elements[0].text.as_str()),
                ("action2", elements[1].text.as_str()),
                ("predicate", detail.unwrap_or_default()),
            ]);
        }
    }
    // single pass, so substituted text is never expanded again
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}').and_then(|close| {
            let name = &after[..close];
            vars.iter().find(|(k, _)| *k == name).map(|(_, v)| (close, *v))
        }) {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

fn feedback(
    kind: FeedbackKind,
    elements: Vec<FeedbackElement>,
    conditions: Option<(String, String)>,
    detail: Option<String>,
    templates: &FeedbackTemplates,
) -> Result<Feedback, RefineError> {
    let rendered = render_feedback(kind, &elements, conditions.as_ref(), detail.as_deref(), templates)?;
    Ok(Feedback {
        kind,
        elements,
        conditions,
        detail,
        rendered,
    })
}

/// How many condition pairs of an exclusive gateway must conflict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusiveRule {
    /// One conflicting pair is enough.
    #[default]
    AnyPair,
    /// Every pair must conflict.
    AllPairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    /// Refinement rounds after the first extraction.
    pub max_iters: usize,
    /// A contradiction above this confidence counts as a conflict.
    pub conflict_threshold: f64,
    pub exclusive_rule: ExclusiveRule,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            max_iters: 3,
            conflict_threshold: 0.5,
            exclusive_rule: ExclusiveRule::AnyPair,
        }
    }
}

fn element(graph: &ProceduralGraph, id: &NodeId) -> FeedbackElement {
    let text = graph
        .node(id)
        .filter(|n| !n.text.is_empty())
        .map_or_else(|| id.as_str().to_string(), |n| n.text.clone());
    FeedbackElement { id: id.clone(), text }
}

fn conflict(nli: &dyn NliBackend, a: &str, b: &str, threshold: f64) -> Result<bool, RefineError> {
    for (p, h) in [(a, b), (b, a)] {
        let v = nli.nli(p, h).map_err(RefineError::NliUnavailable)?;
        if v.label == NliLabel::Contradiction && v.confidence > threshold {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Check every exclusive and inclusive branch against its conditions. At
/// most one finding per gateway.
pub fn condition_verify(
    graph: &ProceduralGraph,
    nli: &dyn NliBackend,
    cfg: &RefineConfig,
    templates: &FeedbackTemplates,
) -> Result<Vec<Feedback>, RefineError> {
    let mut out = Vec::new();
    for gw in graph.nodes.iter().filter(|n| n.is_branch()) {
        let ty = match gw.gateway_type {
            Some(t @ (GatewayType::Exclusive | GatewayType::Inclusive)) => t,
            _ => continue,
        };
        let conds: Vec<&str> = graph
            .outgoing(&gw.id)
            .filter(|e| e.kind == EdgeKind::ConditionFlow)
            .filter_map(|e| e.condition.as_deref())
            .collect();
        let mut pairs = Vec::new();
        for i in 0..conds.len() {
            for j in i + 1..conds.len() {
                pairs.push((conds[i], conds[j]));
            }
        }
        if pairs.is_empty() {
            continue;
        }
        let mut first_conflict = None;
        let mut first_free = None;
        for &(a, b) in &pairs {
            if conflict(nli, a, b, cfg.conflict_threshold)? {
                first_conflict.get_or_insert((a, b));
            } else {
                first_free.get_or_insert((a, b));
            }
        }
        let finding = match ty {
            GatewayType::Inclusive => first_conflict.map(|p| (FeedbackKind::OrShouldBeXor, p)),
            _ => match cfg.exclusive_rule {
                ExclusiveRule::AnyPair if first_conflict.is_none() => Some((FeedbackKind::XorShouldBeOr, pairs[0])),
                ExclusiveRule::AllPairs => first_free.map(|p| (FeedbackKind::XorShouldBeOr, p)),
                ExclusiveRule::AnyPair => None,
            },
        };
        if let Some((kind, (a, b))) = finding {
            let conditions = Some((a.to_string(), b.to_string()));
            out.push(feedback(kind, vec![element(graph, &gw.id)], conditions, None, templates)?);
        }
    }
    Ok(out)
}

fn predicate_object(parser: &dyn PredicateObjectBackend, text: &str) -> PredicateObject {
    parser
        .extract(text)
        .unwrap_or_else(|_| HeuristicPredicateObject::parse(text))
}

/// Parallel branches acting on one object, and sequences applying one
/// predicate to different objects.
pub fn parallel_verify(
    graph: &ProceduralGraph,
    parser: &dyn PredicateObjectBackend,
    templates: &FeedbackTemplates,
) -> Result<Vec<Feedback>, RefineError> {
    let mut out = Vec::new();
    let is_action = |id: &NodeId| graph.node(id).is_some_and(|n| n.kind == NodeKind::Action);
    for gw in graph
        .nodes
        .iter()
        .filter(|n| n.is_branch() && n.gateway_type == Some(GatewayType::Parallel))
    {
        let actions: Vec<&NodeId> = graph
            .outgoing(&gw.id)
            .filter(|e| e.kind.is_control() && is_action(&e.target))
            .map(|e| &e.target)
            .collect();
        let parsed: Vec<PredicateObject> = actions
            .iter()
            .map(|id| predicate_object(parser, graph.node(id).map(|n| n.text.as_str()).unwrap_or_default()))
            .collect();
        'pairs: for i in 0..actions.len() {
            for j in i + 1..actions.len() {
                let (a, b) = (&parsed[i], &parsed[j]);
                if !a.object.is_empty() && a.object == b.object && actions[i] != actions[j] {
                    let elements = vec![element(graph, &gw.id), element(graph, actions[i]), element(graph, actions[j])];
                    out.push(feedback(FeedbackKind::InvalidParallel, elements, None, Some(a.object.clone()), templates)?);
                    break 'pairs;
                }
            }
        }
    }
    for e in graph.edges_of(EdgeKind::SequenceFlow) {
        if !is_action(&e.source) || !is_action(&e.target) {
            continue;
        }
        let text = |id: &NodeId| graph.node(id).map(|n| n.text.clone()).unwrap_or_default();
        let a = predicate_object(parser, &text(&e.source));
        let b = predicate_object(parser, &text(&e.target));
        let confident = !a.low_confidence && !b.low_confidence;
        if confident && a.predicate == b.predicate && !a.object.is_empty() && !b.object.is_empty() && a.object != b.object {
            let elements = vec![element(graph, &e.source), element(graph, &e.target)];
            out.push(feedback(FeedbackKind::MissingParallel, elements, None, Some(a.predicate.clone()), templates)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIters,
    /// Two unreadable answers in a row.
    Unparseable,
    /// The extractor stopped answering after at least one answer.
    ExtractorFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub response: String,
    pub graph: ProceduralGraph,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parse_errors: Vec<ParseError>,
    pub feedback: Vec<Feedback>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Iteration {
    fn readable(&self) -> bool {
        !self.graph.edges.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineTrace {
    /// The first extraction followed by one entry per refinement round.
    pub iterations: Vec<Iteration>,
    pub terminated_by: Termination,
}

impl RefineTrace {
    pub fn rounds(&self) -> usize {
        self.iterations.len().saturating_sub(1)
    }
}

pub const UNREADABLE_REPLY: &str =
    "The answer above could not be read as a graph. Reply with one `Element -> (condition) Element` line per flow.";

pub struct Verifiers<'a> {
    pub nli: &'a dyn NliBackend,
    pub parser: &'a dyn PredicateObjectBackend,
    pub templates: &'a FeedbackTemplates,
}

/// Run both verifiers. A failing NLI service skips the condition check and
/// is reported in the returned notes.
pub fn verify(graph: &ProceduralGraph, v: &Verifiers<'_>, cfg: &RefineConfig) -> Result<(Vec<Feedback>, Vec<String>), RefineError> {
    let mut notes = Vec::new();
    let mut fb = match condition_verify(graph, v.nli, cfg, v.templates) {
        Ok(f) => f,
        Err(e @ RefineError::NliUnavailable(_)) => {
            notes.push(format!("condition check skipped: {}", e));
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    fb.extend(parallel_verify(graph, v.parser, v.templates)?);
    Ok((fb, notes))
}

/// Extract, verify, feed findings back, repeat. `conversation` holds the
/// opening messages (instruction, examples, document).
pub fn refine_loop(
    mut conversation: Vec<ChatMessage>,
    system1: &mut dyn ExtractorBackend,
    verifiers: &Verifiers<'_>,
    cfg: &RefineConfig,
) -> Result<(ProceduralGraph, RefineTrace), RefineError> {
    let mut iterations: Vec<Iteration> = Vec::new();
    let mut unreadable_run = 0;
    let terminated_by = loop {
        let response = match system1.extract(&conversation) {
            Ok(r) => r,
            Err(e) if iterations.is_empty() => return Err(RefineError::Extractor(e)),
            Err(e) => {
                if let Some(last) = iterations.last_mut() {
                    last.notes.push(format!("extractor failed: {}", e));
                }
                break Termination::ExtractorFailed;
            }
        };
        let parsed = parse(&response);
        let mut it = Iteration {
            response: response.clone(),
            graph: parsed.graph,
            parse_errors: parsed.errors,
            feedback: Vec::new(),
            notes: Vec::new(),
        };
        let reply = if it.readable() {
            unreadable_run = 0;
            let (fb, notes) = verify(&it.graph, verifiers, cfg)?;
            it.feedback = fb;
            it.notes = notes;
            it.feedback.iter().map(|f| f.rendered.as_str()).collect::<Vec<_>>().join("\n")
        } else {
            unreadable_run += 1;
            it.notes.push("no flows could be read from the answer".into());
            UNREADABLE_REPLY.to_string()
        };
        let done = it.readable() && it.feedback.is_empty();
        iterations.push(it);
        if done {
            break Termination::Converged;
        }
        if unreadable_run >= 2 {
            break Termination::Unparseable;
        }
        if iterations.len() > cfg.max_iters {
            break Termination::MaxIters;
        }
        conversation.push(ChatMessage::assistant(response));
        conversation.push(ChatMessage::user(reply));
    };
    // the last readable graph, or the one with the fewest parse errors
    let graph = match terminated_by {
        Termination::Unparseable | Termination::ExtractorFailed => iterations
            .iter()
            .filter(|i| i.readable())
            .min_by_key(|i| i.parse_errors.len())
            .or(iterations.last())
            .map(|i| i.graph.clone())
            .unwrap_or_default(),
        _ => iterations.last().map(|i| i.graph.clone()).unwrap_or_default(),
    };
    Ok((graph, RefineTrace { iterations, terminated_by }))
}
