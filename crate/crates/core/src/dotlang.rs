//! Line format exchanged with language models:
//!
//! ```text
//! Start -> OR1
//! OR1 -> (need dishes) choose the desired dishes
//! pay the bill -> "receipt" [data]
//!
//! Actors: Start = customer
//! Actors: choose the desired dishes = customer
//! ```
//!
//! One edge per line. Gateways are `XOR<n>`, `OR<n>`, `AND<n>`; constraint
//! nodes carry a `[data]` or `[note]` suffix; actors follow in a trailing
//! block. Branch/merge roles and pairing are not written out, [`parse`]
//! infers them from the shape of the flows.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    validate, Edge, EdgeKind, GatewayRole, GatewayType, GraphIndex, Node, NodeId, NodeKind, ProceduralGraph,
    ValidationReport,
};

/// Classified element label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Start(Option<u32>),
    End(Option<u32>),
    Gateway(GatewayType, u32),
    Data(String),
    Note(String),
    Action(String),
}

impl Label {
    pub fn kind(&self) -> NodeKind {
        match self {
            Label::Start(_) => NodeKind::Start,
            Label::End(_) => NodeKind::End,
            Label::Gateway(..) => NodeKind::Gateway,
            Label::Data(_) => NodeKind::DataConstraint,
            Label::Note(_) => NodeKind::ActionConstraint,
            Label::Action(_) => NodeKind::Action,
        }
    }
}

fn numbered(s: &str, prefix: &str) -> Option<Option<u32>> {
    let head = s.get(..prefix.len())?;
    if !head.eq_ignore_ascii_case(prefix) {
        return None;
    }
    let rest = &s[prefix.len()..];
    if rest.is_empty() {
        return Some(None);
    }
    if rest.bytes().all(|b| b.is_ascii_digit()) {
        return rest.parse().ok().map(Some);
    }
    None
}

fn strip_suffix_ci<'a>(s: &'a str, suffix: &str) -> Option<&'a str> {
    let cut = s.len().checked_sub(suffix.len())?;
    let tail = s.get(cut..)?;
    tail.eq_ignore_ascii_case(suffix).then(|| &s[..cut])
}

fn unquote(s: &str) -> &str {
    if s.len() >= 2 && s.starts_with('"') && s.ends_with('"') {
        &s[1..s.len() - 1]
    } else {
        s
    }
}

/// Classify a raw label; `None` when it is empty.
pub fn classify_label(raw: &str) -> Option<Label> {
    let s = raw.trim();
    if s.is_empty() {
        return None;
    }
    if let Some(n) = numbered(s, "start") {
        return Some(Label::Start(n));
    }
    if let Some(n) = numbered(s, "end") {
        return Some(Label::End(n));
    }
    for ty in [GatewayType::Exclusive, GatewayType::Parallel, GatewayType::Inclusive] {
        if let Some(Some(n)) = numbered(s, ty.abbreviation()) {
            return Some(Label::Gateway(ty, n));
        }
    }
    for (suffix, data) in [("[data]", true), ("[note]", false)] {
        if let Some(inner) = strip_suffix_ci(s, suffix) {
            let text = unquote(inner.trim()).trim();
            if text.is_empty() {
                return None;
            }
            return Some(if data { Label::Data(text.into()) } else { Label::Note(text.into()) });
        }
    }
    let text = unquote(s).trim();
    if text.is_empty() {
        return None;
    }
    Some(Label::Action(text.into()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DotLine {
    pub source_label: String,
    pub condition: Option<String>,
    pub target_label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParseErrorKind {
    MissingArrow,
    UnbalancedCondition,
    EmptyLabel,
    EmptyCondition,
    BadActorLine,
    UnknownActorLabel,
    ConflictingGatewayRole,
    UnpairedGateway,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    /// 1-based line number.
    pub line: usize,
    pub kind: ParseErrorKind,
    pub message: String,
}

/// What each input line contributed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineStatus {
    Blank,
    Edge,
    ActorHeader,
    Actor,
    Error,
}

/// Split one edge line into its parts. `(` and `)` inside a condition
/// either nest or are escaped with a backslash.
pub fn parse_line(line: &str) -> Result<DotLine, ParseErrorKind> {
    let pos = line.find("->").ok_or(ParseErrorKind::MissingArrow)?;
    let source = line[..pos].trim();
    let rest = line[pos + 2..].trim_start();
    let (condition, target) = if let Some(body) = rest.strip_prefix('(') {
        let mut cond = String::new();
        let mut depth = 0usize;
        let mut end = None;
        let mut chars = body.char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '\\' => match chars.next() {
                    Some((_, n)) => cond.push(n),
                    None => cond.push('\\'),
                },
                '(' => {
                    depth += 1;
                    cond.push(c);
                }
                ')' if depth == 0 => {
                    end = Some(i);
                    break;
                }
                ')' => {
                    depth -= 1;
                    cond.push(c);
                }
                _ => cond.push(c),
            }
        }
        let end = end.ok_or(ParseErrorKind::UnbalancedCondition)?;
        let cond = cond.trim();
        if cond.is_empty() {
            return Err(ParseErrorKind::EmptyCondition);
        }
        (Some(cond.to_string()), body[end + 1..].trim())
    } else {
        (None, rest.trim())
    };
    if source.is_empty() || target.is_empty() {
        return Err(ParseErrorKind::EmptyLabel);
    }
    Ok(DotLine {
        source_label: source.into(),
        condition,
        target_label: target.into(),
    })
}

/// Where each label ended up in the parsed graph. A gateway label that was
/// split into a branch and its merge has two entries.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTable {
    pub entries: Vec<LabelEntry>,
    /// Label as written → actor.
    pub actors: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub label: String,
    pub kind: NodeKind,
    pub gateway_type: Option<GatewayType>,
    pub gateway_role: Option<GatewayRole>,
    pub ordinal: Option<u32>,
    pub node: NodeId,
}

impl LabelTable {
    pub fn lookup<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a LabelEntry> + 'a {
        self.entries.iter().filter(move |e| e.label == label)
    }

    /// Label of a node, for quoting it back to a model.
    pub fn label_of(&self, id: &NodeId) -> Option<&str> {
        self.entries.iter().find(|e| &e.node == id).map(|e| e.label.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseOutput {
    pub graph: ProceduralGraph,
    pub errors: Vec<ParseError>,
    /// One status per input line.
    pub lines: Vec<LineStatus>,
    pub labels: LabelTable,
}

struct Proto {
    label: Label,
    written: String,
    line: usize,
    role: Option<GatewayRole>,
    actor: Option<String>,
    id: String,
}

struct ProtoEdge {
    src: usize,
    tgt: usize,
    cond: Option<String>,
}

struct Builder {
    nodes: Vec<Proto>,
    edges: Vec<ProtoEdge>,
    interned: BTreeMap<Label, usize>,
    errors: Vec<ParseError>,
    counters: [u32; 3],
}

impl Builder {
    fn intern(&mut self, label: Label, written: &str, line: usize) -> usize {
        if let Some(&i) = self.interned.get(&label) {
            return i;
        }
        let id = match &label {
            Label::Start(None) => "Start".to_string(),
            Label::Start(Some(n)) => format!("Start{}", n),
            Label::End(None) => "End".to_string(),
            Label::End(Some(n)) => format!("End{}", n),
            Label::Gateway(ty, n) => format!("{}{}", ty.abbreviation(), n),
            Label::Action(_) => {
                self.counters[0] += 1;
                format!("a{}", self.counters[0])
            }
            Label::Data(_) => {
                self.counters[1] += 1;
                format!("d{}", self.counters[1])
            }
            Label::Note(_) => {
                self.counters[2] += 1;
                format!("n{}", self.counters[2])
            }
        };
        let i = self.nodes.len();
        self.nodes.push(Proto {
            label: label.clone(),
            written: written.trim().into(),
            line,
            role: None,
            actor: None,
            id,
        });
        self.interned.insert(label, i);
        i
    }

    fn error(&mut self, line: usize, kind: ParseErrorKind, message: String) {
        self.errors.push(ParseError { line, kind, message });
    }

    fn is_control_edge(&self, e: &ProtoEdge) -> bool {
        !self.nodes[e.src].label.kind().is_constraint() && !self.nodes[e.tgt].label.kind().is_constraint()
    }

    fn control_out(&self, n: usize) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| self.edges[e].src == n && self.is_control_edge(&self.edges[e]))
            .collect()
    }

    fn control_in(&self, n: usize) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| self.edges[e].tgt == n && self.is_control_edge(&self.edges[e]))
            .collect()
    }

    /// Nodes reachable from `from` over control edges without entering `avoid`.
    fn reach(&self, from: &[usize], avoid: Option<usize>) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::new();
        for &f in from {
            if Some(f) != avoid && !seen[f] {
                seen[f] = true;
                queue.push_back(f);
            }
        }
        while let Some(n) = queue.pop_front() {
            for e in self.control_out(n) {
                let t = self.edges[e].tgt;
                if Some(t) != avoid && !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        seen
    }

    fn infer_roles(&mut self) {
        let gateways: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| matches!(self.nodes[i].label, Label::Gateway(..)))
            .collect();
        for g in gateways {
            let outs = self.control_out(g);
            let ins = self.control_in(g);
            let conditioned = outs.iter().any(|&e| self.edges[e].cond.is_some());
            let branch_sig = outs.len() >= 2 || conditioned;
            let merge_sig = ins.len() >= 2;
            if !branch_sig {
                self.nodes[g].role = Some(GatewayRole::Merge);
                continue;
            }
            self.nodes[g].role = Some(GatewayRole::Branch);
            if !merge_sig {
                continue;
            }
            // the same label used for a branch and for its merge
            let in_sources: Vec<usize> = ins.iter().map(|&e| self.edges[e].src).collect();
            let (branch_outs, merge_outs): (Vec<usize>, Vec<usize>) = if conditioned {
                outs.iter().partition(|&&e| self.edges[e].cond.is_some())
            } else {
                outs.iter().partition(|&&e| {
                    let r = self.reach(&[self.edges[e].tgt], Some(g));
                    in_sources.iter().any(|&s| r[s])
                })
            };
            let targets: Vec<usize> = branch_outs.iter().map(|&e| self.edges[e].tgt).collect();
            let within = self.reach(&targets, Some(g));
            let loop_back: Vec<usize> = ins.iter().copied().filter(|&e| within[self.edges[e].src]).collect();
            if loop_back.is_empty() {
                continue;
            }
            if merge_outs.len() > 1 || branch_outs.len() < 2 {
                let (line, label) = (self.nodes[g].line, self.nodes[g].written.clone());
                self.error(
                    line,
                    ParseErrorKind::ConflictingGatewayRole,
                    format!("gateway {} is used both as a branch and as a merge and cannot be split", label),
                );
                continue;
            }
            let twin = self.nodes.len();
            let p = &self.nodes[g];
            let twin_node = Proto {
                label: p.label.clone(),
                written: p.written.clone(),
                line: p.line,
                role: Some(GatewayRole::Merge),
                actor: p.actor.clone(),
                id: format!("{}/merge", p.id),
            };
            self.nodes.push(twin_node);
            for e in loop_back {
                self.edges[e].tgt = twin;
            }
            for e in merge_outs {
                self.edges[e].src = twin;
            }
        }
    }

    /// Kahn order over control edges, ties by creation index; nodes on
    /// cycles go last.
    fn topo_positions(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        for e in &self.edges {
            if self.is_control_edge(e) {
                indeg[e.tgt] += 1;
            }
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut pos = vec![usize::MAX; n];
        let mut next = 0;
        while let Some(i) = ready.pop_first() {
            pos[i] = next;
            next += 1;
            for e in self.control_out(i) {
                let t = self.edges[e].tgt;
                indeg[t] -= 1;
                if indeg[t] == 0 {
                    ready.insert(t);
                }
            }
        }
        for p in pos.iter_mut().filter(|p| **p == usize::MAX) {
            *p = next;
            next += 1;
        }
        pos
    }

    /// Pair each branch with the merge of its type that most of its paths
    /// reach, nearest first. Inner branches are paired before outer ones.
    fn pair(&mut self) -> BTreeMap<usize, String> {
        let pos = self.topo_positions();
        let ty = |p: &Proto| match p.label {
            Label::Gateway(t, _) => Some(t),
            _ => None,
        };
        let mut branches: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| ty(&self.nodes[i]).is_some() && self.nodes[i].role == Some(GatewayRole::Branch))
            .collect();
        branches.sort_by_key(|&b| core::cmp::Reverse(pos[b]));
        let mut free: BTreeSet<usize> = (0..self.nodes.len())
            .filter(|&i| ty(&self.nodes[i]).is_some() && self.nodes[i].role == Some(GatewayRole::Merge))
            .collect();
        let mut pair_of: BTreeMap<usize, String> = BTreeMap::new();
        for b in branches {
            let targets: Vec<usize> = self.control_out(b).iter().map(|&e| self.edges[e].tgt).collect();
            let reaches: Vec<Vec<bool>> = targets.iter().map(|&t| self.reach(&[t], None)).collect();
            let best = free
                .iter()
                .copied()
                .filter(|&m| ty(&self.nodes[m]) == ty(&self.nodes[b]))
                .map(|m| (reaches.iter().filter(|r| r[m]).count(), m))
                .filter(|&(count, _)| count > 0)
                .max_by(|a, b| a.0.cmp(&b.0).then_with(|| pos[b.1].cmp(&pos[a.1])));
            let pair_id = self.nodes[b].written.clone();
            match best {
                Some((_, m)) => {
                    free.remove(&m);
                    pair_of.insert(b, pair_id.clone());
                    pair_of.insert(m, pair_id);
                }
                None => {
                    let (line, label) = (self.nodes[b].line, self.nodes[b].written.clone());
                    self.error(line, ParseErrorKind::UnpairedGateway, format!("branch {} has no reachable merge", label));
                }
            }
        }
        for m in free {
            let (line, label) = (self.nodes[m].line, self.nodes[m].written.clone());
            self.error(line, ParseErrorKind::UnpairedGateway, format!("merge {} closes no branch", label));
        }
        pair_of
    }

    /// Start takes the actor of the nearest action after it, End of the
    /// nearest action before it.
    fn infer_terminal_actors(&mut self) {
        for i in 0..self.nodes.len() {
            let forward = match self.nodes[i].label {
                Label::Start(_) => true,
                Label::End(_) => false,
                _ => continue,
            };
            if self.nodes[i].actor.is_some() {
                continue;
            }
            let mut seen = vec![false; self.nodes.len()];
            let mut queue = VecDeque::from([i]);
            seen[i] = true;
            let mut found = None;
            while let Some(n) = queue.pop_front() {
                if n != i && matches!(self.nodes[n].label, Label::Action(_)) && self.nodes[n].actor.is_some() {
                    found = self.nodes[n].actor.clone();
                    break;
                }
                let next: Vec<usize> = if forward {
                    self.control_out(n).iter().map(|&e| self.edges[e].tgt).collect()
                } else {
                    self.control_in(n).iter().map(|&e| self.edges[e].src).collect()
                };
                for m in next {
                    if !seen[m] {
                        seen[m] = true;
                        queue.push_back(m);
                    }
                }
            }
            self.nodes[i].actor = found;
        }
    }
}

fn split_actor_line(s: &str) -> Option<(&str, &str)> {
    let pos = s.rfind('=')?;
    let (label, actor) = (s[..pos].trim(), s[pos + 1..].trim());
    (!label.is_empty() && !actor.is_empty()).then_some((label, actor))
}

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    let head = s.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix).then(|| &s[prefix.len()..])
}

/// Parse model output into a graph. Never fails: malformed lines are
/// reported in `errors` and skipped.
pub fn parse(text: &str) -> ParseOutput {
    let mut b = Builder {
        nodes: Vec::new(),
        edges: Vec::new(),
        interned: BTreeMap::new(),
        errors: Vec::new(),
        counters: [0; 3],
    };
    let mut lines = Vec::new();
    let mut actor_lines: Vec<(usize, String, String)> = Vec::new();
    let mut in_actor_block = false;

    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            lines.push(LineStatus::Blank);
            continue;
        }
        if let Some(rest) = strip_prefix_ci(line, "actors:") {
            let rest = rest.trim();
            if rest.is_empty() {
                in_actor_block = true;
                lines.push(LineStatus::ActorHeader);
            } else if let Some((label, actor)) = split_actor_line(rest) {
                actor_lines.push((ln, label.into(), actor.into()));
                lines.push(LineStatus::Actor);
            } else {
                b.error(ln, ParseErrorKind::BadActorLine, format!("expected `Actors: <label> = <actor>`, got {:?}", line));
                lines.push(LineStatus::Error);
            }
            continue;
        }
        if !line.contains("->") {
            if in_actor_block {
                if let Some((label, actor)) = split_actor_line(line) {
                    actor_lines.push((ln, label.into(), actor.into()));
                    lines.push(LineStatus::Actor);
                    continue;
                }
                b.error(ln, ParseErrorKind::BadActorLine, format!("expected `<label> = <actor>`, got {:?}", line));
            } else {
                b.error(ln, ParseErrorKind::MissingArrow, format!("no `->` in {:?}", line));
            }
            lines.push(LineStatus::Error);
            continue;
        }
        match parse_line(line) {
            Ok(dl) => {
                let (Some(sl), Some(tl)) = (classify_label(&dl.source_label), classify_label(&dl.target_label)) else {
                    b.error(ln, ParseErrorKind::EmptyLabel, format!("empty element label in {:?}", line));
                    lines.push(LineStatus::Error);
                    continue;
                };
                let s = b.intern(sl, &dl.source_label, ln);
                let t = b.intern(tl, &dl.target_label, ln);
                b.edges.push(ProtoEdge {
                    src: s,
                    tgt: t,
                    cond: dl.condition,
                });
                lines.push(LineStatus::Edge);
            }
            Err(kind) => {
                let message = match kind {
                    ParseErrorKind::UnbalancedCondition => format!("condition is not closed in {:?}", line),
                    ParseErrorKind::EmptyCondition => format!("empty condition in {:?}", line),
                    _ => format!("empty element label in {:?}", line),
                };
                b.error(ln, kind, message);
                lines.push(LineStatus::Error);
            }
        }
    }

    b.infer_roles();
    let pairs = b.pair();

    let mut labels = LabelTable::default();
    for (ln, label, actor) in actor_lines {
        let targets: Vec<usize> = match classify_label(&label) {
            Some(l) => (0..b.nodes.len()).filter(|&i| b.nodes[i].label == l).collect(),
            None => Vec::new(),
        };
        if targets.is_empty() {
            b.error(ln, ParseErrorKind::UnknownActorLabel, format!("actor given for unknown element {:?}", label));
            if let Some(LineStatus::Actor) = lines.get(ln - 1) {
                lines[ln - 1] = LineStatus::Error;
            }
            continue;
        }
        for i in targets {
            b.nodes[i].actor = Some(actor.clone());
        }
        labels.actors.insert(label, actor);
    }
    b.infer_terminal_actors();

    let mut graph = ProceduralGraph::default();
    for (i, p) in b.nodes.iter().enumerate() {
        let id = NodeId::new(p.id.clone());
        let mut node = match &p.label {
            Label::Start(_) => Node::start(id, ""),
            Label::End(_) => Node::end(id, ""),
            Label::Gateway(ty, _) => Node::gateway(
                id,
                *ty,
                p.role.unwrap_or(GatewayRole::Merge),
                pairs.get(&i).cloned().unwrap_or_else(|| p.id.clone()),
            ),
            Label::Action(t) => Node::action(id, t.clone(), ""),
            Label::Data(t) => Node::data(id, t.clone()),
            Label::Note(t) => Node::note(id, t.clone()),
        };
        node.actor = p.actor.clone();
        labels.entries.push(LabelEntry {
            label: p.written.clone(),
            kind: node.kind,
            gateway_type: node.gateway_type,
            gateway_role: node.gateway_role,
            ordinal: match p.label {
                Label::Start(n) | Label::End(n) => n,
                Label::Gateway(_, n) => Some(n),
                _ => None,
            },
            node: node.id.clone(),
        });
        graph.nodes.push(node);
    }
    for e in &b.edges {
        let (s, t) = (&b.nodes[e.src], &b.nodes[e.tgt]);
        let kind = if e.cond.is_some() {
            EdgeKind::ConditionFlow
        } else if s.label.kind().is_constraint() || t.label.kind().is_constraint() {
            EdgeKind::ConstraintFlow
        } else {
            EdgeKind::SequenceFlow
        };
        graph.edges.push(Edge {
            source: NodeId::new(s.id.clone()),
            target: NodeId::new(t.id.clone()),
            kind,
            condition: e.cond.clone(),
        });
    }
    b.errors.sort_by_key(|e| e.line);
    ParseOutput {
        graph,
        errors: b.errors,
        lines,
        labels,
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DotError {
    #[error("invalid-graph: {} violation(s)", .0.violations.len())]
    InvalidGraph(ValidationReport),
    #[error("unrepresentable-label: {text:?} ({reason})")]
    Unrepresentable { text: String, reason: &'static str },
}

fn check_plain(text: &str) -> Result<(), &'static str> {
    if text.trim() != text || text.is_empty() {
        return Err("leading or trailing whitespace");
    }
    if text.contains(['\n', '\r']) {
        return Err("line break");
    }
    if text.contains("->") {
        return Err("contains `->`");
    }
    Ok(())
}

fn check_action_text(text: &str) -> Result<(), &'static str> {
    check_plain(text)?;
    if text.starts_with('(') {
        return Err("starts with `(`");
    }
    if strip_prefix_ci(text, "actors:").is_some() {
        return Err("starts with `Actors:`");
    }
    if classify_label(text) != Some(Label::Action(text.into())) {
        return Err("reads as a reserved label");
    }
    Ok(())
}

fn escape_condition(c: &str) -> String {
    let mut out = String::with_capacity(c.len());
    for ch in c.chars() {
        if matches!(ch, '\\' | '(' | ')') {
            out.push('\\');
        }
        out.push(ch);
    }
    out
}

/// Write a valid graph as lines, in topological then lexical order.
pub fn serialize(graph: &ProceduralGraph) -> Result<String, DotError> {
    let report = validate(graph);
    if !report.ok {
        return Err(DotError::InvalidGraph(report));
    }
    let ix = GraphIndex::new(graph);
    let n = graph.nodes.len();
    let unrep = |text: &str, reason| DotError::Unrepresentable { text: text.into(), reason };

    // topological rank of control nodes, ties by (text, id)
    let mut indeg = vec![0usize; n];
    for i in 0..n {
        for ei in ix.control_out(i) {
            indeg[ix.tgt(ei)] += 1;
        }
    }
    let key = |i: usize| (graph.nodes[i].text.as_str(), graph.nodes[i].id.as_str(), i);
    let mut ready: BTreeSet<(&str, &str, usize)> =
        (0..n).filter(|&i| graph.nodes[i].kind.is_control() && indeg[i] == 0).map(key).collect();
    let mut rank = vec![usize::MAX; n];
    let mut next = 0;
    while let Some((_, _, i)) = ready.pop_first() {
        rank[i] = next;
        next += 1;
        for ei in ix.control_out(i) {
            let t = ix.tgt(ei);
            indeg[t] -= 1;
            if indeg[t] == 0 {
                ready.insert(key(t));
            }
        }
    }

    let mut order: Vec<(usize, u8, usize, &str, usize)> = Vec::with_capacity(graph.edges.len());
    for (ei, e) in graph.edges.iter().enumerate() {
        let (s, t) = (ix.src(ei), ix.tgt(ei));
        if e.kind.is_control() {
            order.push((rank[s], 0, rank[t], e.condition.as_deref().unwrap_or(""), ei));
        } else {
            let (anchor, other) = if graph.nodes[s].kind == NodeKind::Action { (s, t) } else { (t, s) };
            order.push((rank[anchor], 1, 0, graph.nodes[other].text.as_str(), ei));
        }
    }
    order.sort();

    let multi = |kind| graph.nodes_of(kind).count() > 1;
    let (multi_start, multi_end) = (multi(NodeKind::Start), multi(NodeKind::End));
    let mut labels: Vec<Option<String>> = vec![None; n];
    let mut appearance: Vec<usize> = Vec::new();
    let mut counters = [0u32; 5];
    let mut used: BTreeSet<String> = BTreeSet::new();
    let mut label_of = |i: usize, appearance: &mut Vec<usize>| -> Result<String, DotError> {
        if let Some(l) = &labels[i] {
            return Ok(l.clone());
        }
        let node = &graph.nodes[i];
        let mut bump = |slot: usize| {
            counters[slot] += 1;
            counters[slot]
        };
        let label = match node.kind {
            NodeKind::Start if multi_start => format!("Start{}", bump(3)),
            NodeKind::Start => "Start".into(),
            NodeKind::End if multi_end => format!("End{}", bump(4)),
            NodeKind::End => "End".into(),
            NodeKind::Gateway => {
                let ty = node.gateway_type.unwrap_or(GatewayType::Exclusive);
                let slot = GatewayType::ALL.iter().position(|t| *t == ty).unwrap_or(0);
                format!("{}{}", ty.abbreviation(), bump(slot))
            }
            NodeKind::Action => {
                check_action_text(&node.text).map_err(|r| unrep(&node.text, r))?;
                node.text.clone()
            }
            NodeKind::DataConstraint | NodeKind::ActionConstraint => {
                check_plain(&node.text).map_err(|r| unrep(&node.text, r))?;
                let tag = if node.kind == NodeKind::DataConstraint { "data" } else { "note" };
                format!("\"{}\" [{}]", node.text, tag)
            }
        };
        if !used.insert(label.clone()) {
            return Err(unrep(&label, "two elements share this label"));
        }
        labels[i] = Some(label.clone());
        appearance.push(i);
        Ok(label)
    };

    let mut out = String::new();
    for &(_, _, _, _, ei) in &order {
        let e = &graph.edges[ei];
        let s = label_of(ix.src(ei), &mut appearance)?;
        let t = label_of(ix.tgt(ei), &mut appearance)?;
        match &e.condition {
            Some(c) if e.kind == EdgeKind::ConditionFlow => {
                if c.contains(['\n', '\r']) || c.trim() != c {
                    return Err(unrep(c, "condition with line break or outer whitespace"));
                }
                out.push_str(&format!("{} -> ({}) {}\n", s, escape_condition(c), t));
            }
            _ => out.push_str(&format!("{} -> {}\n", s, t)),
        }
    }

    let mut actor_block = String::new();
    for &i in &appearance {
        if let Some(actor) = graph.nodes[i].actor.as_deref() {
            if actor.contains(['\n', '\r', '=']) || actor.trim() != actor || actor.is_empty() {
                return Err(unrep(actor, "actor with `=`, line break or outer whitespace"));
            }
            let label = labels[i].as_deref().unwrap_or_default();
            actor_block.push_str(&format!("Actors: {} = {}\n", label, actor));
        }
    }
    if !actor_block.is_empty() {
        out.push('\n');
        out.push_str(&actor_block);
    }
    Ok(out)
}
