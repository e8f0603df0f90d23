//! Graph data model and structural validation.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opaque node identifier, unique within one graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.into())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Start,
    End,
    Action,
    Gateway,
    DataConstraint,
    ActionConstraint,
}

impl NodeKind {
    /// Nodes that take part in sequence/condition flow.
    pub fn is_control(self) -> bool {
        !self.is_constraint()
    }

    pub fn is_constraint(self) -> bool {
        matches!(self, NodeKind::DataConstraint | NodeKind::ActionConstraint)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GatewayType {
    Exclusive,
    Inclusive,
    Parallel,
}

impl GatewayType {
    pub const ALL: [GatewayType; 3] = [
        GatewayType::Exclusive,
        GatewayType::Inclusive,
        GatewayType::Parallel,
    ];

    /// Label prefix used in the line format.
    pub fn abbreviation(self) -> &'static str {
        match self {
            GatewayType::Exclusive => "XOR",
            GatewayType::Inclusive => "OR",
            GatewayType::Parallel => "AND",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GatewayRole {
    Branch,
    Merge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    #[serde(default)]
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gateway_type: Option<GatewayType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gateway_role: Option<GatewayRole>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_id: Option<String>,
}

impl Node {
    fn bare(id: impl Into<NodeId>, kind: NodeKind) -> Self {
        Node {
            id: id.into(),
            kind,
            text: String::new(),
            actor: None,
            gateway_type: None,
            gateway_role: None,
            pair_id: None,
        }
    }

    pub fn start(id: impl Into<NodeId>, actor: impl Into<String>) -> Self {
        Node {
            actor: Some(actor.into()),
            ..Node::bare(id, NodeKind::Start)
        }
    }

    pub fn end(id: impl Into<NodeId>, actor: impl Into<String>) -> Self {
        Node {
            actor: Some(actor.into()),
            ..Node::bare(id, NodeKind::End)
        }
    }

    pub fn action(id: impl Into<NodeId>, text: impl Into<String>, actor: impl Into<String>) -> Self {
        Node {
            text: text.into(),
            actor: Some(actor.into()),
            ..Node::bare(id, NodeKind::Action)
        }
    }

    pub fn gateway(
        id: impl Into<NodeId>,
        ty: GatewayType,
        role: GatewayRole,
        pair_id: impl Into<String>,
    ) -> Self {
        Node {
            gateway_type: Some(ty),
            gateway_role: Some(role),
            pair_id: Some(pair_id.into()),
            ..Node::bare(id, NodeKind::Gateway)
        }
    }

    pub fn data(id: impl Into<NodeId>, text: impl Into<String>) -> Self {
        Node {
            text: text.into(),
            ..Node::bare(id, NodeKind::DataConstraint)
        }
    }

    pub fn note(id: impl Into<NodeId>, text: impl Into<String>) -> Self {
        Node {
            text: text.into(),
            ..Node::bare(id, NodeKind::ActionConstraint)
        }
    }

    pub fn is_branch(&self) -> bool {
        self.kind == NodeKind::Gateway && self.gateway_role == Some(GatewayRole::Branch)
    }

    pub fn is_merge(&self) -> bool {
        self.kind == NodeKind::Gateway && self.gateway_role == Some(GatewayRole::Merge)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    SequenceFlow,
    ConditionFlow,
    ConstraintFlow,
}

impl EdgeKind {
    pub fn is_control(self) -> bool {
        self != EdgeKind::ConstraintFlow
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub source: NodeId,
    pub target: NodeId,
    pub kind: EdgeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
}

impl Edge {
    pub fn sequence(source: impl Into<NodeId>, target: impl Into<NodeId>) -> Self {
        Edge {
            source: source.into(),
            target: target.into(),
            kind: EdgeKind::SequenceFlow,
            condition: None,
        }
    }

    pub fn condition(
        source: impl Into<NodeId>,
        target: impl Into<NodeId>,
        condition: impl Into<String>,
    ) -> Self {
        Edge {
            source: source.into(),
            target: target.into(),
            kind: EdgeKind::ConditionFlow,
            condition: Some(condition.into()),
        }
    }

    pub fn constraint(source: impl Into<NodeId>, target: impl Into<NodeId>) -> Self {
        Edge {
            source: source.into(),
            target: target.into(),
            kind: EdgeKind::ConstraintFlow,
            condition: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ProceduralGraph {
    #[serde(default)]
    pub nodes: Vec<Node>,
    #[serde(default)]
    pub edges: Vec<Edge>,
}

impl ProceduralGraph {
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>) -> Self {
        ProceduralGraph { nodes, edges }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.edges.is_empty()
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.iter().find(|n| &n.id == id)
    }

    /// Actors named by any node, sorted.
    pub fn actors(&self) -> BTreeSet<String> {
        self.nodes
            .iter()
            .filter_map(|n| n.actor.clone())
            .filter(|a| !a.is_empty())
            .collect()
    }

    pub fn nodes_of(&self, kind: NodeKind) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(move |n| n.kind == kind)
    }

    pub fn edges_of(&self, kind: EdgeKind) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.kind == kind)
    }

    pub fn outgoing<'a>(&'a self, id: &'a NodeId) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| &e.source == id)
    }

    pub fn incoming<'a>(&'a self, id: &'a NodeId) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| &e.target == id)
    }
}

/// Index-based adjacency over a graph. Edges whose endpoints are missing are
/// left out of the adjacency lists.
pub(crate) struct GraphIndex<'g> {
    pub graph: &'g ProceduralGraph,
    pub by_id: BTreeMap<&'g str, usize>,
    /// Per node, indices into `graph.edges`.
    pub out: Vec<Vec<usize>>,
    pub inc: Vec<Vec<usize>>,
}

impl<'g> GraphIndex<'g> {
    pub fn new(graph: &'g ProceduralGraph) -> Self {
        let mut by_id = BTreeMap::new();
        for (i, n) in graph.nodes.iter().enumerate() {
            by_id.entry(n.id.as_str()).or_insert(i);
        }
        let mut out = vec![Vec::new(); graph.nodes.len()];
        let mut inc = vec![Vec::new(); graph.nodes.len()];
        for (ei, e) in graph.edges.iter().enumerate() {
            if let (Some(&s), Some(&t)) = (by_id.get(e.source.as_str()), by_id.get(e.target.as_str())) {
                out[s].push(ei);
                inc[t].push(ei);
            }
        }
        GraphIndex { graph, by_id, out, inc }
    }

    pub fn idx(&self, id: &NodeId) -> Option<usize> {
        self.by_id.get(id.as_str()).copied()
    }

    pub fn node(&self, i: usize) -> &'g Node {
        &self.graph.nodes[i]
    }

    pub fn edge(&self, ei: usize) -> &'g Edge {
        &self.graph.edges[ei]
    }

    pub fn src(&self, ei: usize) -> usize {
        self.by_id[self.graph.edges[ei].source.as_str()]
    }

    pub fn tgt(&self, ei: usize) -> usize {
        self.by_id[self.graph.edges[ei].target.as_str()]
    }

    /// Outgoing control edges of node `i`, in stored edge order.
    pub fn control_out(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.out[i]
            .iter()
            .copied()
            .filter(move |&ei| self.graph.edges[ei].kind.is_control())
    }

    pub fn control_in(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.inc[i]
            .iter()
            .copied()
            .filter(move |&ei| self.graph.edges[ei].kind.is_control())
    }

    /// Nodes reachable from `roots` over control edges (roots included).
    pub fn reach(&self, roots: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.graph.nodes.len()];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &r in roots {
            if !seen[r] {
                seen[r] = true;
                queue.push_back(r);
            }
        }
        while let Some(n) = queue.pop_front() {
            for ei in self.control_out(n) {
                let t = self.tgt(ei);
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        seen
    }

    /// Control nodes lying on a directed cycle (or between two cycles).
    pub fn cyclic_nodes(&self) -> Vec<usize> {
        let n = self.graph.nodes.len();
        let mut alive: Vec<bool> = self.graph.nodes.iter().map(|x| x.kind.is_control()).collect();
        // peel sources, then sinks, until nothing changes
        loop {
            let mut changed = false;
            for i in 0..n {
                if !alive[i] {
                    continue;
                }
                let has_in = self.control_in(i).any(|ei| alive[self.src(ei)]);
                let has_out = self.control_out(i).any(|ei| alive[self.tgt(ei)]);
                if !has_in || !has_out {
                    alive[i] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        (0..n).filter(|&i| alive[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: String,
    pub message: String,
    pub ids: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn has(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, rule: &str, message: String, ids: Vec<NodeId>) {
        self.0.push(Violation {
            rule: rule.to_string(),
            message,
            ids,
        });
    }
}

/// Check every structural rule of the graph model. Pure; violations are
/// sorted by rule id, then by their first offending node id.
pub fn validate(graph: &ProceduralGraph) -> ValidationReport {
    let ix = GraphIndex::new(graph);
    let mut v = Collector(Vec::new());

    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for node in &graph.nodes {
        if node.id.as_str().is_empty() {
            v.push("empty-id", "node with empty id".into(), vec![node.id.clone()]);
        } else if !seen.insert(node.id.as_str()) {
            v.push("duplicate-id", format!("id {} used more than once", node.id), vec![node.id.clone()]);
        }
        check_node_fields(node, &mut v);
    }

    for edge in &graph.edges {
        check_edge(&ix, edge, &mut v);
    }

    for (i, node) in graph.nodes.iter().enumerate() {
        if node.kind.is_constraint()
            && !ix.out[i].iter().chain(&ix.inc[i]).any(|&ei| ix.edge(ei).kind == EdgeKind::ConstraintFlow)
        {
            v.push(
                "dangling-constraint",
                format!("constraint {} is not attached to any action", node.id),
                vec![node.id.clone()],
            );
        }
    }

    check_starts_and_ends(&ix, &mut v);
    check_gateways(&ix, &mut v);

    let cyclic = ix.cyclic_nodes();
    if !cyclic.is_empty() {
        let mut ids: Vec<NodeId> = cyclic.iter().map(|&i| ix.node(i).id.clone()).collect();
        ids.sort();
        v.push("control-cycle", "control flow contains a cycle".into(), ids);
    }

    let starts: Vec<usize> = (0..graph.nodes.len())
        .filter(|&i| graph.nodes[i].kind == NodeKind::Start)
        .collect();
    let reached = ix.reach(&starts);
    for (i, node) in graph.nodes.iter().enumerate() {
        if node.kind.is_control() && node.kind != NodeKind::Start && !reached[i] {
            v.push(
                "unreachable",
                format!("{} cannot be reached from any Start", node.id),
                vec![node.id.clone()],
            );
        }
    }

    let mut violations = v.0;
    for viol in &mut violations {
        viol.ids.dedup();
    }
    violations.sort_by(|a, b| a.rule.cmp(&b.rule).then_with(|| a.ids.first().cmp(&b.ids.first())));
    ValidationReport {
        ok: violations.is_empty(),
        violations,
    }
}

fn blank(s: &str) -> bool {
    s.trim().is_empty()
}

fn check_node_fields(node: &Node, v: &mut Collector) {
    let id = || vec![node.id.clone()];
    let gw_fields = [
        node.gateway_type.is_some(),
        node.gateway_role.is_some(),
        node.pair_id.is_some(),
    ];
    match node.kind {
        NodeKind::Action => {
            if blank(&node.text) {
                v.push("action-text", format!("action {} has no text", node.id), id());
            }
            if node.actor.as_deref().is_none_or(blank) {
                v.push("action-actor", format!("action {} has no actor", node.id), id());
            }
        }
        NodeKind::Gateway => {
            if gw_fields.iter().any(|f| !f) || node.pair_id.as_deref().is_some_and(blank) {
                v.push(
                    "gateway-fields",
                    format!("gateway {} needs gateway_type, gateway_role and pair_id", node.id),
                    id(),
                );
            }
        }
        NodeKind::DataConstraint | NodeKind::ActionConstraint => {
            if blank(&node.text) {
                v.push("constraint-text", format!("constraint {} has no text", node.id), id());
            }
            if node.actor.is_some() {
                v.push("constraint-actor", format!("constraint {} carries an actor", node.id), id());
            }
        }
        NodeKind::Start | NodeKind::End => {}
    }
    if node.kind != NodeKind::Gateway && gw_fields.iter().any(|f| *f) {
        v.push(
            "non-gateway-fields",
            format!("{} is not a gateway but has gateway fields", node.id),
            id(),
        );
    }
}

fn check_edge(ix: &GraphIndex<'_>, edge: &Edge, v: &mut Collector) {
    let ids = || vec![edge.source.clone(), edge.target.clone()];
    let (s, t) = match (ix.idx(&edge.source), ix.idx(&edge.target)) {
        (Some(s), Some(t)) => (ix.node(s), ix.node(t)),
        _ => {
            v.push(
                "dangling-edge",
                format!("edge {} -> {} has a missing endpoint", edge.source, edge.target),
                ids(),
            );
            return;
        }
    };
    match edge.kind {
        EdgeKind::ConditionFlow => {
            if edge.condition.as_deref().is_none_or(blank) {
                v.push("condition-missing", format!("condition flow {} -> {} has no condition", s.id, t.id), ids());
            }
            let ok_source = s.is_branch()
                && matches!(s.gateway_type, Some(GatewayType::Exclusive | GatewayType::Inclusive));
            if !ok_source {
                v.push(
                    "condition-source",
                    format!("condition flow must leave an exclusive or inclusive branch, not {}", s.id),
                    ids(),
                );
            }
        }
        _ => {
            if edge.condition.is_some() {
                v.push(
                    "condition-unexpected",
                    format!("{:?} {} -> {} carries a condition", edge.kind, s.id, t.id),
                    ids(),
                );
            }
        }
    }
    if edge.kind == EdgeKind::ConstraintFlow {
        let ok = matches!(
            (s.kind, t.kind),
            (NodeKind::Action, NodeKind::DataConstraint)
                | (NodeKind::DataConstraint, NodeKind::Action)
                | (NodeKind::Action, NodeKind::ActionConstraint)
        );
        if !ok {
            v.push(
                "constraint-flow-endpoints",
                format!("constraint flow {} -> {} must join an action and a constraint", s.id, t.id),
                ids(),
            );
        }
    } else if s.kind.is_constraint() || t.kind.is_constraint() {
        v.push(
            "control-flow-endpoints",
            format!("{:?} {} -> {} touches a constraint", edge.kind, s.id, t.id),
            ids(),
        );
    }
}

fn check_starts_and_ends(ix: &GraphIndex<'_>, v: &mut Collector) {
    let graph = ix.graph;
    let mut starts_by_actor: BTreeMap<Option<&str>, Vec<usize>> = BTreeMap::new();
    for (i, n) in graph.nodes.iter().enumerate() {
        if n.kind == NodeKind::Start {
            starts_by_actor.entry(n.actor.as_deref()).or_default().push(i);
        }
    }
    if starts_by_actor.is_empty() {
        v.push("missing-start", "graph has no Start node".into(), Vec::new());
    }
    for actor in graph.actors() {
        if !starts_by_actor.contains_key(&Some(actor.as_str())) {
            let ids = graph
                .nodes
                .iter()
                .filter(|n| n.actor.as_deref() == Some(actor.as_str()))
                .map(|n| n.id.clone())
                .take(1)
                .collect();
            v.push("missing-start", format!("actor \"{}\" has no Start", actor), ids);
        }
    }
    for (actor, starts) in &starts_by_actor {
        if starts.len() > 1 {
            v.push(
                "duplicate-start",
                format!("actor {:?} has {} Start nodes", actor, starts.len()),
                starts.iter().map(|&i| graph.nodes[i].id.clone()).collect(),
            );
        }
        for &s in starts {
            let reached = ix.reach(&[s]);
            let has_end = (0..graph.nodes.len()).any(|i| reached[i] && graph.nodes[i].kind == NodeKind::End);
            if !has_end {
                v.push(
                    "missing-end",
                    format!("no End is reachable from {}", graph.nodes[s].id),
                    vec![graph.nodes[s].id.clone()],
                );
            }
        }
    }
}

fn check_gateways(ix: &GraphIndex<'_>, v: &mut Collector) {
    let graph = ix.graph;
    let mut by_pair: BTreeMap<&str, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, n) in graph.nodes.iter().enumerate() {
        if n.kind != NodeKind::Gateway {
            continue;
        }
        if let (Some(pair), Some(role)) = (n.pair_id.as_deref(), n.gateway_role) {
            let slot = by_pair.entry(pair).or_default();
            match role {
                GatewayRole::Branch => slot.0.push(i),
                GatewayRole::Merge => slot.1.push(i),
            }
        }
        if n.is_branch() {
            let (want, label) = match n.gateway_type {
                Some(GatewayType::Parallel) => (EdgeKind::SequenceFlow, "sequence"),
                _ => (EdgeKind::ConditionFlow, "condition"),
            };
            let count = ix.out[i].iter().filter(|&&ei| ix.edge(ei).kind == want).count();
            if count < 2 {
                v.push(
                    "branch-fanout",
                    format!("branch {} has {} outgoing {} flows, needs at least 2", n.id, count, label),
                    vec![n.id.clone()],
                );
            }
        }
    }
    for (pair, (branches, merges)) in &by_pair {
        let mut ids: Vec<NodeId> = branches.iter().chain(merges).map(|&i| graph.nodes[i].id.clone()).collect();
        ids.sort();
        if branches.len() != 1 || merges.len() != 1 {
            v.push(
                "gateway-pair",
                format!(
                    "pair {} has {} branch and {} merge gateways, needs exactly one of each",
                    pair,
                    branches.len(),
                    merges.len()
                ),
                ids,
            );
        } else if graph.nodes[branches[0]].gateway_type != graph.nodes[merges[0]].gateway_type {
            v.push(
                "gateway-pair-type",
                format!("pair {} joins gateways of different types", pair),
                ids,
            );
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("broken-pair: gateway pair {0:?} does not resolve to one branch and one merge")]
    BrokenPair(String),
}

/// Branch/merge node ids per pair id, sorted by pair id.
pub fn gateway_pairs(graph: &ProceduralGraph) -> Result<Vec<(NodeId, NodeId)>, GraphError> {
    let mut by_pair: BTreeMap<&str, (Vec<&NodeId>, Vec<&NodeId>)> = BTreeMap::new();
    for n in graph.nodes_of(NodeKind::Gateway) {
        let pair = n
            .pair_id
            .as_deref()
            .ok_or_else(|| GraphError::BrokenPair(n.id.to_string()))?;
        let slot = by_pair.entry(pair).or_default();
        match n.gateway_role {
            Some(GatewayRole::Branch) => slot.0.push(&n.id),
            Some(GatewayRole::Merge) => slot.1.push(&n.id),
            None => return Err(GraphError::BrokenPair(pair.to_string())),
        }
    }
    by_pair
        .into_iter()
        .map(|(pair, (b, m))| match (b.as_slice(), m.as_slice()) {
            ([b], [m]) => Ok(((*b).clone(), (*m).clone())),
            _ => Err(GraphError::BrokenPair(pair.to_string())),
        })
        .collect()
}

/// Node signature compared by [`isomorphic`]; ids and pair ids are ignored.
type NodeSig<'a> = (NodeKind, &'a str, Option<&'a str>, Option<GatewayType>, Option<GatewayRole>);
type EdgeSig<'a> = (EdgeKind, Option<&'a str>);

fn node_sig(n: &Node) -> NodeSig<'_> {
    (n.kind, n.text.as_str(), n.actor.as_deref(), n.gateway_type, n.gateway_role)
}

struct IsoSide<'g> {
    sigs: Vec<NodeSig<'g>>,
    adj: BTreeMap<(usize, usize), Vec<EdgeSig<'g>>>,
    neighbours: Vec<BTreeSet<usize>>,
    partner: Vec<Option<usize>>,
}

impl<'g> IsoSide<'g> {
    fn build(g: &'g ProceduralGraph) -> Option<Self> {
        let ix = GraphIndex::new(g);
        if ix.by_id.len() != g.nodes.len() {
            return None;
        }
        let mut adj: BTreeMap<(usize, usize), Vec<EdgeSig<'g>>> = BTreeMap::new();
        let mut neighbours = vec![BTreeSet::new(); g.nodes.len()];
        for e in &g.edges {
            let (s, t) = (ix.idx(&e.source)?, ix.idx(&e.target)?);
            adj.entry((s, t)).or_default().push((e.kind, e.condition.as_deref()));
            neighbours[s].insert(t);
            neighbours[t].insert(s);
        }
        for sigs in adj.values_mut() {
            sigs.sort();
        }
        let mut partner = vec![None; g.nodes.len()];
        let mut by_pair: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, n) in g.nodes.iter().enumerate() {
            if let (NodeKind::Gateway, Some(p)) = (n.kind, n.pair_id.as_deref()) {
                by_pair.entry(p).or_default().push(i);
            }
        }
        for members in by_pair.values() {
            if let [a, b] = members.as_slice() {
                partner[*a] = Some(*b);
                partner[*b] = Some(*a);
            }
        }
        Some(IsoSide {
            sigs: g.nodes.iter().map(node_sig).collect(),
            adj,
            neighbours,
            partner,
        })
    }
}

/// Structural equality up to node ids: kinds, texts, actors, gateway
/// type/role, edge kinds, conditions and the branch/merge pairing must all
/// correspond under some bijection of nodes.
pub fn isomorphic(a: &ProceduralGraph, b: &ProceduralGraph) -> bool {
    if a.nodes.len() != b.nodes.len() || a.edges.len() != b.edges.len() {
        return false;
    }
    let (Some(sa), Some(sb)) = (IsoSide::build(a), IsoSide::build(b)) else {
        return false;
    };
    let mut ca: Vec<NodeSig<'_>> = sa.sigs.clone();
    let mut cb: Vec<NodeSig<'_>> = sb.sigs.clone();
    ca.sort();
    cb.sort();
    if ca != cb {
        return false;
    }
    let n = a.nodes.len();
    let candidates: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| sa.sigs[i] == sb.sigs[j]).collect())
        .collect();

    // connectivity-first order keeps the search shallow
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    while order.len() < n {
        let frontier = (0..n)
            .filter(|&i| !placed[i] && sa.neighbours[i].iter().any(|&j| placed[j]))
            .min_by_key(|&i| candidates[i].len());
        let next = frontier.unwrap_or_else(|| {
            (0..n)
                .filter(|&i| !placed[i])
                .min_by_key(|&i| candidates[i].len())
                .unwrap_or(0)
        });
        placed[next] = true;
        order.push(next);
    }

    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    iso_search(&sa, &sb, &order, &candidates, 0, &mut map, &mut used)
}

fn iso_search(
    sa: &IsoSide<'_>,
    sb: &IsoSide<'_>,
    order: &[usize],
    candidates: &[Vec<usize>],
    depth: usize,
    map: &mut [usize],
    used: &mut [bool],
) -> bool {
    if depth == order.len() {
        return true;
    }
    let u = order[depth];
    for &c in &candidates[u] {
        if used[c] || !iso_consistent(sa, sb, order, depth, u, c, map) {
            continue;
        }
        map[u] = c;
        used[c] = true;
        if iso_search(sa, sb, order, candidates, depth + 1, map, used) {
            return true;
        }
        map[u] = usize::MAX;
        used[c] = false;
    }
    false
}

fn iso_consistent(
    sa: &IsoSide<'_>,
    sb: &IsoSide<'_>,
    order: &[usize],
    depth: usize,
    u: usize,
    c: usize,
    map: &[usize],
) -> bool {
    fn edges<'s, 'g>(side: &'s IsoSide<'g>, x: usize, y: usize) -> &'s [EdgeSig<'g>] {
        side.adj.get(&(x, y)).map_or(&[], Vec::as_slice)
    }
    if edges(sa, u, u) != edges(sb, c, c) {
        return false;
    }
    for &w in &order[..depth] {
        let mw = map[w];
        if edges(sa, u, w) != edges(sb, c, mw) || edges(sa, w, u) != edges(sb, mw, c) {
            return false;
        }
    }
    match (sa.partner[u], sb.partner[c]) {
        (None, None) => true,
        (Some(pu), Some(pc)) => map[pu] == usize::MAX || map[pu] == pc,
        _ => false,
    }
}
