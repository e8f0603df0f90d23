//! Random valid graphs for property tests.
//!
//! Graphs are built block by block: an action, or a gateway whose branches
//! are themselves short block sequences closed by the paired merge.
//! Exclusive and inclusive branches may end the procedure early.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::{Edge, GatewayRole, GatewayType, Node, NodeId, ProceduralGraph};

#[derive(Debug, Clone)]
pub struct GenConfig {
    /// Upper bound on nodes, constraints included.
    pub max_nodes: usize,
    pub max_lanes: usize,
    pub max_depth: usize,
    pub gateway_prob: f64,
    pub constraint_prob: f64,
    /// Allow a branch to end the procedure instead of reaching its merge.
    pub early_end: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_nodes: 20,
            max_lanes: 2,
            max_depth: 2,
            gateway_prob: 0.4,
            constraint_prob: 0.2,
            early_end: true,
        }
    }
}

const ACTORS: [&str; 4] = ["clerk", "manager", "customer", "warehouse"];
const VERBS: [&str; 20] = [
    "check", "approve", "send", "review", "prepare", "record", "ship", "verify", "file", "sign", "pack", "notify",
    "collect", "update", "archive", "inspect", "schedule", "assign", "close", "confirm",
];
const OBJECTS: [&str; 10] = [
    "the order", "the invoice", "the request", "the form", "the parcel", "the report", "the payment", "the contract",
    "the account", "the ticket",
];
const SUBJECTS: [&str; 8] = [
    "the amount", "the customer", "the item", "the address", "the budget", "the deadline", "the stock", "the score",
];
const STATES: [&str; 8] = ["high", "new", "valid", "missing", "late", "urgent", "approved", "complete"];
const DATA: [&str; 8] = ["receipt", "order details", "shipping label", "audit log", "quote", "signature", "id card", "manual"];
const NOTES: [&str; 6] = [
    "it must be done within a day",
    "a second person must sign off",
    "the customer must be informed",
    "copies are kept for a year",
    "the room must be locked",
    "gloves must be worn",
];

type Pending = Vec<(NodeId, Option<String>)>;

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    cfg: &'r GenConfig,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    used: BTreeSet<String>,
    next_id: usize,
    pairs: usize,
    reserve: usize,
}

impl<R: Rng> Gen<'_, R> {
    /// Nodes still available, keeping one End per unfinished lane.
    fn room(&self) -> usize {
        self.cfg.max_nodes.saturating_sub(self.nodes.len() + self.reserve)
    }

    fn fresh_id(&mut self, prefix: &str) -> NodeId {
        self.next_id += 1;
        NodeId::new(format!("{}{}", prefix, self.next_id))
    }

    fn unique_text(&mut self, make: impl Fn(&mut R) -> String) -> String {
        for _ in 0..64 {
            let t = make(self.rng);
            if self.used.insert(t.clone()) {
                return t;
            }
        }
        // fall back to a numbered text once the word lists run dry
        let t = format!("{} {}", make(self.rng), self.next_id);
        self.used.insert(t.clone());
        t
    }

    fn connect(&mut self, pending: Pending, target: &NodeId) {
        for (src, cond) in pending {
            self.edges.push(match cond {
                Some(c) => Edge::condition(src, target.clone(), c),
                None => Edge::sequence(src, target.clone()),
            });
        }
    }

    fn action(&mut self, pending: Pending, actor: &str) -> Pending {
        let text = self.unique_text(|r| format!("{} {}", VERBS.choose(r).unwrap(), OBJECTS.choose(r).unwrap()));
        let id = self.fresh_id("a");
        self.nodes.push(Node::action(id.clone(), text, actor));
        self.connect(pending, &id);
        if self.room() > 0 && self.rng.gen_bool(self.cfg.constraint_prob) {
            let cid = self.fresh_id("c");
            match self.rng.gen_range(0..3) {
                0 | 1 => {
                    let t = self.unique_text(|r| String::from(*DATA.choose(r).unwrap()));
                    self.nodes.push(Node::data(cid.clone(), t));
                    self.edges.push(if self.rng.gen_bool(0.5) {
                        Edge::constraint(id.clone(), cid)
                    } else {
                        Edge::constraint(cid, id.clone())
                    });
                }
                _ => {
                    let t = self.unique_text(|r| String::from(*NOTES.choose(r).unwrap()));
                    self.nodes.push(Node::note(cid.clone(), t));
                    self.edges.push(Edge::constraint(id.clone(), cid));
                }
            }
        }
        vec![(id, None)]
    }

    fn condition(&mut self) -> String {
        self.unique_text(|r| {
            let neg = if r.gen_bool(0.3) { "not " } else { "" };
            format!("{} is {}{}", SUBJECTS.choose(r).unwrap(), neg, STATES.choose(r).unwrap())
        })
    }

    fn gateway(&mut self, pending: Pending, actor: &str, depth: usize) -> Pending {
        let ty = *GatewayType::ALL.choose(self.rng).unwrap();
        let ways = if self.room() >= 8 && self.rng.gen_bool(0.3) { 3 } else { 2 };
        self.pairs += 1;
        let pair = format!("p{}", self.pairs);
        let b = self.fresh_id("g");
        let m = self.fresh_id("g");
        self.nodes.push(Node::gateway(b.clone(), ty, GatewayRole::Branch, pair.clone()));
        self.nodes.push(Node::gateway(m.clone(), ty, GatewayRole::Merge, pair));
        self.connect(pending, &b);
        let mut joined: Pending = Vec::new();
        let mut empty_used = false;
        // hold one node per branch so later branches are not starved
        self.reserve += ways;
        for way in 0..ways {
            self.reserve -= 1;
            let cond = (ty != GatewayType::Parallel).then(|| self.condition());
            let mut p = vec![(b.clone(), cond)];
            let len = if !empty_used && self.rng.gen_bool(0.2) { 0 } else { self.rng.gen_range(1..=2) };
            empty_used |= len == 0;
            for _ in 0..len {
                p = self.block(p, actor, depth + 1);
            }
            let can_end = self.cfg.early_end
                && ty != GatewayType::Parallel
                && way > 0
                && !joined.is_empty()
                && self.room() > 0
                && self.rng.gen_bool(0.25);
            if can_end {
                let e = self.fresh_id("e");
                self.nodes.push(Node::end(e.clone(), actor));
                self.connect(p, &e);
            } else {
                joined.extend(p);
            }
        }
        self.connect(joined, &m);
        vec![(m, None)]
    }

    fn block(&mut self, pending: Pending, actor: &str, depth: usize) -> Pending {
        let nested_ok = depth < self.cfg.max_depth && self.room() >= 4;
        if nested_ok && self.rng.gen_bool(self.cfg.gateway_prob) {
            self.gateway(pending, actor, depth)
        } else if self.room() > 0 {
            self.action(pending, actor)
        } else {
            pending
        }
    }
}

/// A random graph that passes validation.
pub fn random_graph<R: Rng>(rng: &mut R, cfg: &GenConfig) -> ProceduralGraph {
    let lanes = rng.gen_range(1..=cfg.max_lanes.clamp(1, ACTORS.len()));
    let mut actors: Vec<&str> = ACTORS.to_vec();
    actors.shuffle(rng);
    let mut g = Gen {
        rng,
        cfg,
        nodes: Vec::new(),
        edges: Vec::new(),
        used: BTreeSet::new(),
        next_id: 0,
        pairs: 0,
        reserve: lanes,
    };
    for (lane, actor) in actors.iter().take(lanes).enumerate() {
        let budget_end = cfg.max_nodes * (lane + 1) / lanes;
        if g.room() < 2 {
            break;
        }
        let s = g.fresh_id("s");
        g.nodes.push(Node::start(s.clone(), *actor));
        let mut pending: Pending = vec![(s, None)];
        pending = g.action(pending, actor);
        let steps = g.rng.gen_range(1..=4);
        for _ in 0..steps {
            if g.nodes.len() + g.reserve + 2 > budget_end {
                break;
            }
            pending = g.block(pending, actor, 0);
        }
        let e = g.fresh_id("e");
        g.reserve -= 1;
        g.nodes.push(Node::end(e.clone(), *actor));
        g.connect(pending, &e);
    }
    ProceduralGraph::new(g.nodes, g.edges)
}
