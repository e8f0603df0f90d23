//! Graph → units → fragments.
//!
//! Each Start is walked breadth-first. Every control flow leaving a visited
//! node becomes a unit; an action reached through a condition and continuing
//! to another action is therefore walked twice ("If C, then X." and
//! "X, then Y."). Flows into gateways carry no template of their own and are
//! folded into the gateway's units.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{validate, EdgeKind, GatewayType, GraphIndex, NodeId, NodeKind, ProceduralGraph, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UnitKind {
    StartToAction,
    StartToBranch,
    ActionToAction,
    ActionToEnd,
    BranchXorConditionToAction,
    BranchXorConditionToBranch,
    BranchXorConditionToMergeAction,
    BranchXorConditionToEnd,
    BranchOrConditionToAction,
    BranchOrConditionToBranch,
    BranchOrConditionToMergeAction,
    BranchOrConditionToEnd,
    BranchAndTwoWay,
    BranchAndThreeWay,
    MergeToAction,
    MergeToEnd,
    ActionProducesData,
    DataRequiredByAction,
    ActionHasNote,
}

impl UnitKind {
    pub const ALL: [UnitKind; 19] = [
        UnitKind::StartToAction,
        UnitKind::StartToBranch,
        UnitKind::ActionToAction,
        UnitKind::ActionToEnd,
        UnitKind::BranchXorConditionToAction,
        UnitKind::BranchXorConditionToBranch,
        UnitKind::BranchXorConditionToMergeAction,
        UnitKind::BranchXorConditionToEnd,
        UnitKind::BranchOrConditionToAction,
        UnitKind::BranchOrConditionToBranch,
        UnitKind::BranchOrConditionToMergeAction,
        UnitKind::BranchOrConditionToEnd,
        UnitKind::BranchAndTwoWay,
        UnitKind::BranchAndThreeWay,
        UnitKind::MergeToAction,
        UnitKind::MergeToEnd,
        UnitKind::ActionProducesData,
        UnitKind::DataRequiredByAction,
        UnitKind::ActionHasNote,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UnitKind::StartToAction => "StartToAction",
            UnitKind::StartToBranch => "StartToBranch",
            UnitKind::ActionToAction => "ActionToAction",
            UnitKind::ActionToEnd => "ActionToEnd",
            UnitKind::BranchXorConditionToAction => "BranchXorConditionToAction",
            UnitKind::BranchXorConditionToBranch => "BranchXorConditionToBranch",
            UnitKind::BranchXorConditionToMergeAction => "BranchXorConditionToMergeAction",
            UnitKind::BranchXorConditionToEnd => "BranchXorConditionToEnd",
            UnitKind::BranchOrConditionToAction => "BranchOrConditionToAction",
            UnitKind::BranchOrConditionToBranch => "BranchOrConditionToBranch",
            UnitKind::BranchOrConditionToMergeAction => "BranchOrConditionToMergeAction",
            UnitKind::BranchOrConditionToEnd => "BranchOrConditionToEnd",
            UnitKind::BranchAndTwoWay => "BranchAndTwoWay",
            UnitKind::BranchAndThreeWay => "BranchAndThreeWay",
            UnitKind::MergeToAction => "MergeToAction",
            UnitKind::MergeToEnd => "MergeToEnd",
            UnitKind::ActionProducesData => "ActionProducesData",
            UnitKind::DataRequiredByAction => "DataRequiredByAction",
            UnitKind::ActionHasNote => "ActionHasNote",
        }
    }

    pub fn template(self) -> &'static str {
        use UnitKind::*;
        match self {
            StartToAction => "In the beginning, {Action}.",
            StartToBranch => "In the beginning,",
            ActionToAction => "{Action1}, then {Action2}.",
            ActionToEnd => "{Action}, and the procedure ends.",
            BranchXorConditionToAction | BranchOrConditionToAction => "If {condition}, then {Action}.",
            BranchXorConditionToBranch | BranchOrConditionToBranch => "If {condition},",
            BranchXorConditionToMergeAction | BranchOrConditionToMergeAction => "If {condition}, then {Action}.",
            BranchXorConditionToEnd | BranchOrConditionToEnd => "If {condition}, then the procedure ends.",
            BranchAndTwoWay => "{*1}, at the same time, {*2}.",
            BranchAndThreeWay => "{*1}, at the same time, {*2}, meanwhile, {*3}.",
            MergeToAction => "{Action}.",
            MergeToEnd => "The procedure ends.",
            ActionProducesData => "\"{Action}\" produce \"{DataConstraint}\".",
            DataRequiredByAction => "\"{Action}\" require access to \"{DataConstraint}\".",
            ActionHasNote => "For {Action}, pay attention to that {ActionConstraint}.",
        }
    }

    /// Placeholder names in slot order.
    pub fn slot_names(self) -> &'static [&'static str] {
        use UnitKind::*;
        match self {
            StartToBranch | MergeToEnd => &[],
            StartToAction | ActionToEnd | MergeToAction => &["Action"],
            ActionToAction => &["Action1", "Action2"],
            BranchXorConditionToBranch | BranchOrConditionToBranch | BranchXorConditionToEnd | BranchOrConditionToEnd => {
                &["condition"]
            }
            BranchXorConditionToAction
            | BranchOrConditionToAction
            | BranchXorConditionToMergeAction
            | BranchOrConditionToMergeAction => &["condition", "Action"],
            BranchAndTwoWay => &["*1", "*2"],
            BranchAndThreeWay => &["*1", "*2", "*3"],
            ActionProducesData | DataRequiredByAction => &["Action", "DataConstraint"],
            ActionHasNote => &["Action", "ActionConstraint"],
        }
    }

    pub fn is_condition(self) -> bool {
        use UnitKind::*;
        matches!(
            self,
            BranchXorConditionToAction
                | BranchXorConditionToBranch
                | BranchXorConditionToMergeAction
                | BranchXorConditionToEnd
                | BranchOrConditionToAction
                | BranchOrConditionToBranch
                | BranchOrConditionToMergeAction
                | BranchOrConditionToEnd
        )
    }

    pub fn is_parallel(self) -> bool {
        matches!(self, UnitKind::BranchAndTwoWay | UnitKind::BranchAndThreeWay)
    }

    pub fn is_constraint(self) -> bool {
        matches!(
            self,
            UnitKind::ActionProducesData | UnitKind::DataRequiredByAction | UnitKind::ActionHasNote
        )
    }

    fn condition_unit(ty: GatewayType, to: Reached) -> UnitKind {
        use UnitKind::*;
        let xor = ty == GatewayType::Exclusive;
        match (to, xor) {
            (Reached::Action, true) => BranchXorConditionToAction,
            (Reached::Branch, true) => BranchXorConditionToBranch,
            (Reached::MergeAction, true) => BranchXorConditionToMergeAction,
            (Reached::End, true) => BranchXorConditionToEnd,
            (Reached::Action, false) => BranchOrConditionToAction,
            (Reached::Branch, false) => BranchOrConditionToBranch,
            (Reached::MergeAction, false) => BranchOrConditionToMergeAction,
            (Reached::End, false) => BranchOrConditionToEnd,
        }
    }
}

impl fmt::Display for UnitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UnitKind {
    type Err = DecomposeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        UnitKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| DecomposeError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Reached {
    Action,
    Branch,
    MergeAction,
    End,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecomposeError {
    #[error("invalid-graph: {} violation(s)", .0.violations.len())]
    InvalidGraph(ValidationReport),
    #[error("unreachable: {0}")]
    Unreachable(NodeId),
    #[error("unknown unit kind {0:?}")]
    UnknownKind(String),
    #[error("{kind} expects {expected} slot(s), got {got}")]
    Arity { kind: UnitKind, expected: usize, got: usize },
    #[error("{kind} has an empty slot")]
    EmptySlot { kind: UnitKind },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unit {
    pub kind: UnitKind,
    /// Texts bound to the template placeholders, in order.
    pub slots: Vec<String>,
    /// Every node the unit covers, including gateway entries folded in.
    pub source_ids: Vec<NodeId>,
    pub actor: Option<String>,
    /// Node the unit continues from.
    pub lead: Option<NodeId>,
    /// Predecessors of `lead` whose flows this unit covers.
    #[serde(default)]
    pub entries: Vec<NodeId>,
    /// Nodes the unit hands over to.
    #[serde(default)]
    pub tails: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fragment {
    pub text: String,
    /// Index of the unit this fragment was rendered from.
    pub unit_ref: usize,
    pub actor: Option<String>,
    pub group: Option<usize>,
    pub order_in_group: Option<usize>,
    pub sentence_cluster: Option<usize>,
    pub kind: UnitKind,
    pub source_ids: Vec<NodeId>,
    pub lead: Option<NodeId>,
    #[serde(default)]
    pub entries: Vec<NodeId>,
    #[serde(default)]
    pub tails: Vec<NodeId>,
}

/// Fill a template. Parallel units with more than three branches extend the
/// three-way pattern with further ", meanwhile, " clauses.
pub fn render_text(kind: UnitKind, slots: &[String]) -> Result<String, DecomposeError> {
    let names = kind.slot_names();
    let arity_ok = if kind == UnitKind::BranchAndThreeWay {
        slots.len() >= 3
    } else {
        slots.len() == names.len()
    };
    if !arity_ok {
        return Err(DecomposeError::Arity {
            kind,
            expected: names.len(),
            got: slots.len(),
        });
    }
    if slots.iter().any(|s| s.is_empty()) {
        return Err(DecomposeError::EmptySlot { kind });
    }
    if kind == UnitKind::BranchAndThreeWay && slots.len() > 3 {
        let mut out = String::new();
        out.push_str(&slots[0]);
        out.push_str(", at the same time, ");
        out.push_str(&slots[1]);
        for s in &slots[2..] {
            out.push_str(", meanwhile, ");
            out.push_str(s);
        }
        out.push('.');
        return Ok(out);
    }
    let template = kind.template();
    let mut out = String::with_capacity(template.len() + slots.iter().map(String::len).sum::<usize>());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let close = open + rest[open..].find('}').expect("templates are well formed");
        let name = &rest[open + 1..close];
        let slot = names.iter().position(|n| *n == name).expect("placeholder has a slot");
        out.push_str(&slots[slot]);
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

pub fn render(unit: &Unit, unit_ref: usize) -> Result<Fragment, DecomposeError> {
    Ok(Fragment {
        text: render_text(unit.kind, &unit.slots)?,
        unit_ref,
        actor: unit.actor.clone(),
        group: None,
        order_in_group: None,
        sentence_cluster: None,
        kind: unit.kind,
        source_ids: unit.source_ids.clone(),
        lead: unit.lead.clone(),
        entries: unit.entries.clone(),
        tails: unit.tails.clone(),
    })
}

pub fn render_all(units: &[Unit]) -> Result<Vec<Fragment>, DecomposeError> {
    units.iter().enumerate().map(|(i, u)| render(u, i)).collect()
}

struct Walker<'g> {
    ix: GraphIndex<'g>,
    units: Vec<Unit>,
}

fn push_unique(v: &mut Vec<NodeId>, id: &NodeId) {
    if !v.contains(id) {
        v.push(id.clone());
    }
}

impl<'g> Walker<'g> {
    fn id(&self, i: usize) -> &'g NodeId {
        &self.ix.node(i).id
    }

    fn kind(&self, i: usize) -> NodeKind {
        self.ix.node(i).kind
    }

    fn is_branch(&self, i: usize) -> bool {
        self.ix.node(i).is_branch()
    }

    fn is_merge(&self, i: usize) -> bool {
        self.kind(i) == NodeKind::Gateway && !self.ix.node(i).is_branch()
    }

    fn control_targets(&self, i: usize) -> Vec<usize> {
        self.ix.control_out(i).map(|e| self.ix.tgt(e)).collect()
    }

    /// A merge emits units only when it leads to an action or an End.
    fn merge_is_silent(&self, m: usize) -> bool {
        self.control_targets(m)
            .iter()
            .all(|&t| self.kind(t) == NodeKind::Gateway)
    }

    /// Predecessors of `i`, looking through merges that have no unit.
    fn entries(&self, i: usize, out: &mut Vec<NodeId>) {
        for e in self.ix.control_in(i) {
            let p = self.ix.src(e);
            if out.contains(self.id(p)) {
                continue;
            }
            out.push(self.id(p).clone());
            if self.is_merge(p) && self.merge_is_silent(p) {
                self.entries(p, out);
            }
        }
    }

    /// Follow merges forward until an action, End or branch.
    fn through_merges(&self, mut i: usize, passed: &mut Vec<NodeId>) -> Option<usize> {
        while self.is_merge(i) {
            push_unique(passed, self.id(i));
            i = *self.control_targets(i).first()?;
        }
        Some(i)
    }

    /// Text standing for whatever follows a parallel branch.
    fn describe(&self, i: usize, covered: &mut Vec<NodeId>, tails: &mut Vec<NodeId>) -> String {
        push_unique(covered, self.id(i));
        let node = self.ix.node(i);
        match node.kind {
            NodeKind::Action => {
                push_unique(tails, &node.id);
                node.text.clone()
            }
            NodeKind::End => {
                push_unique(tails, &node.id);
                "the procedure ends".into()
            }
            NodeKind::Gateway if node.is_branch() => {
                push_unique(tails, &node.id);
                let joiner = match node.gateway_type {
                    Some(GatewayType::Exclusive) => " or ",
                    Some(GatewayType::Inclusive) => " and/or ",
                    _ => " and ",
                };
                let mut ignore = Vec::new();
                let parts: Vec<String> = self
                    .control_targets(i)
                    .into_iter()
                    .map(|t| self.describe(t, &mut ignore, &mut Vec::new()))
                    .collect();
                parts.join(joiner)
            }
            NodeKind::Gateway => match self.control_targets(i).first() {
                Some(&t) => self.describe(t, covered, tails),
                None => "the procedure ends".into(),
            },
            _ => node.text.clone(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn unit(&mut self, kind: UnitKind, slots: Vec<String>, lead: usize, entries: Vec<NodeId>, covered: Vec<NodeId>, tails: Vec<NodeId>, actor: Option<String>) {
        let mut source_ids = vec![self.id(lead).clone()];
        for id in entries.iter().chain(&covered) {
            push_unique(&mut source_ids, id);
        }
        self.units.push(Unit {
            kind,
            slots,
            source_ids,
            actor,
            lead: Some(self.id(lead).clone()),
            entries,
            tails,
        });
    }

    fn actor_of(&self, i: usize, fallback: &Option<String>) -> Option<String> {
        self.ix.node(i).actor.clone().or_else(|| fallback.clone())
    }

    fn visit(&mut self, n: usize, lane: &Option<String>) {
        let node = self.ix.node(n);
        match node.kind {
            NodeKind::Start => {
                for t in self.control_targets(n) {
                    let actor = self.actor_of(n, lane);
                    let tid = self.id(t).clone();
                    match self.kind(t) {
                        NodeKind::Action => {
                            let text = self.ix.node(t).text.clone();
                            self.unit(UnitKind::StartToAction, vec![text], n, vec![], vec![tid.clone()], vec![tid], actor);
                        }
                        NodeKind::End => {
                            self.unit(UnitKind::MergeToEnd, vec![], n, vec![], vec![tid.clone()], vec![tid], actor);
                        }
                        NodeKind::Gateway if self.is_branch(t) => {
                            self.unit(UnitKind::StartToBranch, vec![], n, vec![], vec![tid.clone()], vec![tid], actor);
                        }
                        _ => {}
                    }
                }
            }
            NodeKind::Action => {
                let actor = self.actor_of(n, lane);
                for t in self.control_targets(n) {
                    let tid = self.id(t).clone();
                    match self.kind(t) {
                        NodeKind::Action => {
                            let slots = vec![node.text.clone(), self.ix.node(t).text.clone()];
                            self.unit(UnitKind::ActionToAction, slots, n, vec![], vec![tid.clone()], vec![tid], actor.clone());
                        }
                        NodeKind::End => {
                            self.unit(UnitKind::ActionToEnd, vec![node.text.clone()], n, vec![], vec![tid.clone()], vec![tid], actor.clone());
                        }
                        _ => {}
                    }
                }
                for &e in &self.ix.out[n].clone() {
                    if self.ix.edge(e).kind != EdgeKind::ConstraintFlow {
                        continue;
                    }
                    let t = self.ix.tgt(e);
                    let kind = if self.kind(t) == NodeKind::DataConstraint {
                        UnitKind::ActionProducesData
                    } else {
                        UnitKind::ActionHasNote
                    };
                    let slots = vec![node.text.clone(), self.ix.node(t).text.clone()];
                    let tid = self.id(t).clone();
                    self.unit(kind, slots, n, vec![], vec![tid], vec![], actor.clone());
                }
                for &e in &self.ix.inc[n].clone() {
                    if self.ix.edge(e).kind != EdgeKind::ConstraintFlow {
                        continue;
                    }
                    let s = self.ix.src(e);
                    let slots = vec![node.text.clone(), self.ix.node(s).text.clone()];
                    let sid = self.id(s).clone();
                    self.unit(UnitKind::DataRequiredByAction, slots, n, vec![], vec![sid], vec![], actor.clone());
                }
            }
            NodeKind::Gateway if node.is_branch() => {
                let mut entries = Vec::new();
                self.entries(n, &mut entries);
                let actor = lane.clone();
                let ty = node.gateway_type.unwrap_or(GatewayType::Exclusive);
                if ty == GatewayType::Parallel {
                    let mut covered = Vec::new();
                    let mut tails = Vec::new();
                    let slots: Vec<String> = self
                        .control_targets(n)
                        .into_iter()
                        .map(|t| self.describe(t, &mut covered, &mut tails))
                        .collect();
                    let kind = if slots.len() == 2 {
                        UnitKind::BranchAndTwoWay
                    } else {
                        UnitKind::BranchAndThreeWay
                    };
                    self.unit(kind, slots, n, entries, covered, tails, actor);
                    return;
                }
                for e in self.ix.control_out(n).collect::<Vec<_>>() {
                    let edge = self.ix.edge(e);
                    let t = self.ix.tgt(e);
                    let Some(cond) = edge.condition.clone() else {
                        self.follow_plain(n, t, entries.clone(), actor.clone());
                        continue;
                    };
                    let mut covered = Vec::new();
                    let Some(r) = self.through_merges(t, &mut covered) else {
                        self.unit(UnitKind::condition_unit(ty, Reached::End), vec![cond], n, entries.clone(), covered, vec![], actor.clone());
                        continue;
                    };
                    push_unique(&mut covered, self.id(r));
                    let via_merge = self.is_merge(t);
                    let rid = self.id(r).clone();
                    let (reached, slots) = match self.kind(r) {
                        NodeKind::Action if via_merge => (Reached::MergeAction, vec![cond, self.ix.node(r).text.clone()]),
                        NodeKind::Action => (Reached::Action, vec![cond, self.ix.node(r).text.clone()]),
                        NodeKind::End => (Reached::End, vec![cond]),
                        _ => (Reached::Branch, vec![cond]),
                    };
                    self.unit(UnitKind::condition_unit(ty, reached), slots, n, entries.clone(), covered, vec![rid], actor.clone());
                }
            }
            NodeKind::Gateway => {
                if self.merge_is_silent(n) {
                    return;
                }
                let mut entries = Vec::new();
                self.entries(n, &mut entries);
                for t in self.control_targets(n) {
                    self.follow_plain(n, t, entries.clone(), lane.clone());
                }
            }
            _ => {}
        }
    }

    /// Unconditioned flow out of a gateway.
    fn follow_plain(&mut self, g: usize, t: usize, entries: Vec<NodeId>, actor: Option<String>) {
        let tid = self.id(t).clone();
        match self.kind(t) {
            NodeKind::Action => {
                let text = self.ix.node(t).text.clone();
                self.unit(UnitKind::MergeToAction, vec![text], g, entries, vec![tid.clone()], vec![tid], actor);
            }
            NodeKind::End => self.unit(UnitKind::MergeToEnd, vec![], g, entries, vec![tid.clone()], vec![tid], actor),
            _ => {}
        }
    }
}

/// Break a valid graph into units, in breadth-first discovery order.
pub fn decompose(graph: &ProceduralGraph) -> Result<Vec<Unit>, DecomposeError> {
    let report = validate(graph);
    if !report.ok {
        return Err(DecomposeError::InvalidGraph(report));
    }
    let mut w = Walker {
        ix: GraphIndex::new(graph),
        units: Vec::new(),
    };
    let n = graph.nodes.len();
    let mut seen = vec![false; n];
    for s in (0..n).filter(|&i| graph.nodes[i].kind == NodeKind::Start) {
        let lane = graph.nodes[s].actor.clone();
        let mut queue = VecDeque::from([s]);
        seen[s] = true;
        while let Some(i) = queue.pop_front() {
            w.visit(i, &lane);
            for t in w.control_targets(i) {
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
    }
    if let Some(i) = (0..n).find(|&i| !seen[i] && graph.nodes[i].kind.is_control()) {
        return Err(DecomposeError::Unreachable(graph.nodes[i].id.clone()));
    }
    Ok(w.units)
}

/// Drop units that add nothing: exact repeats, and a bare "The procedure
/// ends." after a merge when a condition already ended at the same End. The
/// surviving unit takes over the dropped unit's node ids.
pub fn filter_units(units: Vec<Unit>) -> Vec<Unit> {
    let mut kept: Vec<Unit> = Vec::with_capacity(units.len());
    let mut seen: BTreeSet<(UnitKind, Vec<String>, Vec<NodeId>)> = BTreeSet::new();
    for u in units {
        if seen.insert((u.kind, u.slots.clone(), u.source_ids.clone())) {
            kept.push(u);
        }
    }
    let ends_by_condition = |u: &Unit| {
        matches!(u.kind, UnitKind::BranchXorConditionToEnd | UnitKind::BranchOrConditionToEnd)
    };
    let mut out: Vec<Unit> = Vec::with_capacity(kept.len());
    let mut absorbed: Vec<(usize, Vec<NodeId>)> = Vec::new();
    for (i, u) in kept.iter().enumerate() {
        // a merge unit always has entries; Start -> End does not
        if u.kind == UnitKind::MergeToEnd && !u.entries.is_empty() {
            let host = kept
                .iter()
                .position(|v| ends_by_condition(v) && u.tails.iter().any(|e| v.tails.contains(e)));
            if let Some(h) = host.filter(|&h| h != i) {
                absorbed.push((h, u.source_ids.clone()));
                continue;
            }
        }
        out.push(u.clone());
    }
    for (h, ids) in absorbed {
        if let Some(host) = out.iter_mut().find(|v| **v == kept[h]) {
            for id in &ids {
                push_unique(&mut host.source_ids, id);
            }
        }
    }
    out
}
