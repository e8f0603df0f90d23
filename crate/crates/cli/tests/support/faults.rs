//! Seeded fault injection for the refinement loop, and an extractor that
//! repairs exactly what the feedback names.

use procgraph_core::backends::{BackendError, ChatMessage, ExtractorBackend, Role};
use procgraph_core::dotlang::{parse, serialize};
use procgraph_core::{Edge, EdgeKind, GatewayRole, GatewayType, Node, NodeId, ProceduralGraph};
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    /// Inclusive choice with compatible conditions.
    Inclusive,
    /// Exclusive choice with contradictory conditions.
    Exclusive,
    /// Two steps on one object, in sequence.
    SameObject,
    /// One predicate on two objects, in parallel.
    SamePredicate,
}

const BLOCKS: [Block; 4] = [Block::Inclusive, Block::Exclusive, Block::SameObject, Block::SamePredicate];
const FILLER_VERBS: [&str; 6] = ["log", "stamp", "scan", "weigh", "label", "photograph"];
const THINGS: [&str; 12] = [
    "profile", "meal", "tableware", "invoice", "parcel", "ticket", "contract", "badge", "report", "sample", "device",
    "voucher",
];

pub struct Case {
    pub gold: ProceduralGraph,
    pub faulty: ProceduralGraph,
    pub faults: usize,
}

struct Build {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    last: NodeId,
    next: usize,
}

impl Build {
    fn id(&mut self, p: &str) -> NodeId {
        self.next += 1;
        NodeId::new(format!("{}{}", p, self.next))
    }

    fn action(&mut self, text: String) -> NodeId {
        let id = self.id("a");
        self.nodes.push(Node::action(id.clone(), text, "clerk"));
        id
    }

    fn step(&mut self, text: String) {
        let id = self.action(text);
        self.edges.push(Edge::sequence(self.last.clone(), id.clone()));
        self.last = id;
    }

    fn gateway(&mut self, ty: GatewayType, arms: Vec<(Option<String>, String)>) {
        let b = self.id("g");
        let m = self.id("g");
        let pair = b.to_string();
        self.nodes.push(Node::gateway(b.clone(), ty, GatewayRole::Branch, pair.clone()));
        self.nodes.push(Node::gateway(m.clone(), ty, GatewayRole::Merge, pair));
        self.edges.push(Edge::sequence(self.last.clone(), b.clone()));
        for (cond, text) in arms {
            let a = self.action(text);
            self.edges.push(match cond {
                Some(c) => Edge::condition(b.clone(), a.clone(), c),
                None => Edge::sequence(b.clone(), a.clone()),
            });
            self.edges.push(Edge::sequence(a, m.clone()));
        }
        self.last = m;
    }

    fn pair(&mut self, parallel: bool, a: String, b: String) {
        if parallel {
            self.gateway(GatewayType::Parallel, vec![(None, a), (None, b)]);
        } else {
            self.step(a);
            self.step(b);
        }
    }
}

fn build(blocks: &[(Block, bool)], things: &[&str]) -> ProceduralGraph {
    let mut b = Build {
        nodes: vec![Node::start("s", "clerk")],
        edges: Vec::new(),
        last: NodeId::new("s"),
        next: 0,
    };
    for (i, &(block, faulty)) in blocks.iter().enumerate() {
        b.step(format!("{} the entry {}", FILLER_VERBS[i % FILLER_VERBS.len()], i + 1));
        let (x, y) = (things[2 * i], things[2 * i + 1]);
        match block {
            Block::Inclusive => {
                let ty = if faulty { GatewayType::Exclusive } else { GatewayType::Inclusive };
                b.gateway(
                    ty,
                    vec![
                        (Some(format!("need a {}", x)), format!("order the {}", x)),
                        (Some(format!("need a {}", y)), format!("book the {}", y)),
                    ],
                );
            }
            Block::Exclusive => {
                let ty = if faulty { GatewayType::Inclusive } else { GatewayType::Exclusive };
                b.gateway(
                    ty,
                    vec![
                        (Some(format!("the {} is valid", x)), format!("accept the {}", x)),
                        (Some(format!("the {} is not valid", x)), format!("return the {}", x)),
                    ],
                );
            }
            Block::SameObject => b.pair(faulty, format!("create the {}", x), format!("send the {}", x)),
            Block::SamePredicate => b.pair(!faulty, format!("prepare the {}", x), format!("prepare the {}", y)),
        }
    }
    let end = b.id("e");
    b.nodes.push(Node::end(end.clone(), "clerk"));
    b.edges.push(Edge::sequence(b.last.clone(), end));
    ProceduralGraph::new(b.nodes, b.edges)
}

/// Case `seed`: three or four blocks, between one and three of them faulty.
pub fn case<R: Rng>(rng: &mut R) -> Case {
    let n = rng.gen_range(3..=4);
    let blocks: Vec<Block> = (0..n).map(|_| *BLOCKS.choose(rng).unwrap()).collect();
    let k = rng.gen_range(1..=3.min(n));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let faulty: Vec<bool> = (0..n).map(|i| order[..k].contains(&i)).collect();
    let mut things = THINGS.to_vec();
    things.shuffle(rng);
    let gold_spec: Vec<(Block, bool)> = blocks.iter().map(|&b| (b, false)).collect();
    let bad_spec: Vec<(Block, bool)> = blocks.iter().copied().zip(faulty).collect();
    Case {
        gold: build(&gold_spec, &things),
        faulty: build(&bad_spec, &things),
        faults: k,
    }
}

/// Answers with the faulty graph, then applies each fix named in the
/// feedback to its own previous answer.
pub struct Fixer {
    pub first: String,
    /// Ignore feedback entirely.
    pub stubborn: bool,
    pub calls: usize,
}

impl Fixer {
    pub fn new(faulty: &ProceduralGraph, stubborn: bool) -> Self {
        Fixer {
            first: serialize(faulty).expect("faulty graph serializes"),
            stubborn,
            calls: 0,
        }
    }
}

fn quoted(line: &str) -> Vec<&str> {
    line.split('"').skip(1).step_by(2).collect()
}

fn gateway_label(line: &str) -> Option<&str> {
    line.split(|c: char| c.is_whitespace() || c == ',' || c == '.').find(|w| {
        ["XOR", "OR", "AND"]
            .iter()
            .any(|p| w.strip_prefix(p).is_some_and(|n| !n.is_empty() && n.chars().all(|c| c.is_ascii_digit())))
    })
}

fn by_text(g: &ProceduralGraph, text: &str) -> NodeId {
    g.nodes.iter().find(|n| n.text == text).expect("named action exists").id.clone()
}

fn retype(g: &mut ProceduralGraph, label: &str, ty: GatewayType) {
    let pair = g.node(&NodeId::new(label)).and_then(|n| n.pair_id.clone()).expect("named gateway exists");
    for n in g.nodes.iter_mut().filter(|n| n.pair_id.as_deref() == Some(pair.as_str())) {
        n.gateway_type = Some(ty);
    }
}

fn control_in(g: &ProceduralGraph, id: &NodeId) -> Vec<usize> {
    (0..g.edges.len()).filter(|&i| g.edges[i].target == *id && g.edges[i].kind != EdgeKind::ConstraintFlow).collect()
}

fn control_out(g: &ProceduralGraph, id: &NodeId) -> Vec<usize> {
    (0..g.edges.len()).filter(|&i| g.edges[i].source == *id && g.edges[i].kind != EdgeKind::ConstraintFlow).collect()
}

/// `pred -> AND(a, b) -> succ` becomes `pred -> a -> b -> succ`.
fn serialise_block(g: &mut ProceduralGraph, label: &str, a: &str, b: &str) {
    let branch = NodeId::new(label);
    let pair = g.node(&branch).and_then(|n| n.pair_id.clone()).unwrap();
    let merge = g
        .nodes
        .iter()
        .find(|n| n.pair_id.as_deref() == Some(pair.as_str()) && n.gateway_role == Some(GatewayRole::Merge))
        .unwrap()
        .id
        .clone();
    let (a, b) = (by_text(g, a), by_text(g, b));
    for i in control_in(g, &branch) {
        g.edges[i].target = a.clone();
    }
    for i in control_out(g, &merge) {
        g.edges[i].source = b.clone();
    }
    g.edges.retain(|e| e.source != branch && e.target != merge);
    g.edges.push(Edge::sequence(a, b));
    g.nodes.retain(|n| n.id != branch && n.id != merge);
}

/// `pred -> a -> b -> succ` becomes `pred -> AND(a, b) -> succ`.
fn parallelise(g: &mut ProceduralGraph, a: &str, b: &str, n: usize) {
    let (a, b) = (by_text(g, a), by_text(g, b));
    let pair = format!("fix{}", n);
    let (br, mg) = (NodeId::new(format!("{}/branch", pair)), NodeId::new(format!("{}/merge", pair)));
    g.edges.retain(|e| !(e.source == a && e.target == b));
    for i in control_in(g, &a) {
        g.edges[i].target = br.clone();
    }
    for i in control_out(g, &b) {
        g.edges[i].source = mg.clone();
    }
    g.nodes.push(Node::gateway(br.clone(), GatewayType::Parallel, GatewayRole::Branch, pair.clone()));
    g.nodes.push(Node::gateway(mg.clone(), GatewayType::Parallel, GatewayRole::Merge, pair));
    for x in [a, b] {
        g.edges.push(Edge::sequence(br.clone(), x.clone()));
        g.edges.push(Edge::sequence(x, mg.clone()));
    }
}

impl ExtractorBackend for Fixer {
    fn extract(&mut self, conversation: &[ChatMessage]) -> Result<String, BackendError> {
        self.calls += 1;
        let last_answer = conversation.iter().rev().find(|m| m.role == Role::Assistant);
        let (Some(answer), false) = (last_answer, self.stubborn) else {
            return Ok(self.first.clone());
        };
        let feedback = &conversation.last().unwrap().content;
        let mut g = parse(&answer.content).graph;
        for (n, line) in feedback.lines().enumerate() {
            let q = quoted(line);
            if line.contains("into an inclusive gateway") {
                retype(&mut g, gateway_label(line).unwrap(), GatewayType::Inclusive);
            } else if line.contains("into an exclusive gateway") {
                retype(&mut g, gateway_label(line).unwrap(), GatewayType::Exclusive);
            } else if line.contains("cannot run in parallel") {
                serialise_block(&mut g, gateway_label(line).unwrap(), q[0], q[1]);
            } else if line.contains("likely to run in parallel") {
                parallelise(&mut g, q[0], q[1], n);
            }
        }
        serialize(&g).map_err(|e| BackendError::Malformed(e.to_string()))
    }
}
