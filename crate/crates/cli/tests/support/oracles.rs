//! Brute-force reference scorers. They share only `bleu` with the library
//! and search every one-to-one assignment instead of solving it.

use procgraph_core::metrics::{bleu, MatchConfig};
use procgraph_core::{Edge, EdgeKind, GatewayType, Node, NodeKind, ProceduralGraph};
use rand::seq::SliceRandom;
use rand::Rng;

/// (precision, recall, f1) with the empty-side conventions.
pub fn prf(tp: f64, p: usize, g: usize) -> (f64, f64, f64) {
    match (p, g) {
        (0, 0) => (1.0, 1.0, 1.0),
        (0, _) | (_, 0) => (0.0, 0.0, 0.0),
        _ => f_from(tp / p as f64, tp / g as f64),
    }
}

fn f_from(p: f64, r: f64) -> (f64, f64, f64) {
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f)
}

/// Largest total weight over all partial one-to-one assignments, by
/// exhaustive recursion over rows with the set of used columns.
pub fn best_assignment(w: &[Vec<f64>]) -> f64 {
    fn go(w: &[Vec<f64>], row: usize, used: u64) -> f64 {
        if row == w.len() {
            return 0.0;
        }
        let mut best = go(w, row + 1, used);
        for (j, &x) in w[row].iter().enumerate() {
            if used & (1 << j) == 0 && x > 0.0 {
                best = best.max(x + go(w, row + 1, used | (1 << j)));
            }
        }
        best
    }
    let cols = w.first().map_or(0, Vec::len);
    assert!(cols <= 20, "oracle limited to 20 columns");
    go(w, 0, 0)
}

pub fn element_oracle(pred: &[&str], gold: &[&str], cfg: &MatchConfig) -> (f64, f64, f64) {
    if pred.is_empty() && gold.is_empty() {
        return (1.0, 1.0, 1.0);
    }
    if pred.is_empty() || gold.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    // each side is the BLEU candidate when it is the one being scored
    let fwd: Vec<Vec<f64>> = pred.iter().map(|p| gold.iter().map(|g| bleu(p, g, cfg)).collect()).collect();
    let back: Vec<Vec<f64>> = gold.iter().map(|g| pred.iter().map(|p| bleu(g, p, cfg)).collect()).collect();
    let row_best: f64 = fwd.iter().map(|r| r.iter().cloned().fold(0.0, f64::max)).sum();
    let col_best: f64 = back.iter().map(|r| r.iter().cloned().fold(0.0, f64::max)).sum();
    f_from(row_best / pred.len() as f64, col_best / gold.len() as f64)
}

fn same_element(a: &Node, b: &Node, cfg: &MatchConfig) -> bool {
    a.kind == b.kind
        && match a.kind {
            NodeKind::Start | NodeKind::End => true,
            NodeKind::Gateway => a.gateway_type == b.gateway_type,
            _ => bleu(&a.text, &b.text, cfg) >= cfg.bleu_threshold,
        }
}

fn node<'g>(g: &'g ProceduralGraph, id: &procgraph_core::NodeId) -> Option<&'g Node> {
    g.nodes.iter().find(|n| &n.id == id)
}

fn is_control(e: &Edge) -> bool {
    matches!(e.kind, EdgeKind::SequenceFlow | EdgeKind::ConditionFlow)
}

/// Gateways of one type match when some control flow leaves (or enters)
/// both of them from (or to) matching elements.
pub fn gateway_oracle(pred: &ProceduralGraph, gold: &ProceduralGraph, ty: GatewayType, cfg: &MatchConfig) -> (f64, f64, f64) {
    let of = |g: &'_ ProceduralGraph| -> Vec<usize> {
        (0..g.nodes.len())
            .filter(|&i| g.nodes[i].kind == NodeKind::Gateway && g.nodes[i].gateway_type == Some(ty))
            .collect()
    };
    let (pg, gg) = (of(pred), of(gold));
    let linked = |p: &Node, g: &Node| -> bool {
        for ep in pred.edges.iter().filter(|e| is_control(e)) {
            for eg in gold.edges.iter().filter(|e| is_control(e)) {
                let out = ep.source == p.id && eg.source == g.id;
                let inc = ep.target == p.id && eg.target == g.id;
                let other = if out {
                    (node(pred, &ep.target), node(gold, &eg.target))
                } else if inc {
                    (node(pred, &ep.source), node(gold, &eg.source))
                } else {
                    continue;
                };
                if let (Some(a), Some(b)) = other {
                    if same_element(a, b, cfg) {
                        return true;
                    }
                }
            }
        }
        false
    };
    let w: Vec<Vec<f64>> = pg
        .iter()
        .map(|&i| gg.iter().map(|&j| if linked(&pred.nodes[i], &gold.nodes[j]) { 1.0 } else { 0.0 }).collect())
        .collect();
    prf(best_assignment(&w), pg.len(), gg.len())
}

pub fn flow_oracle(pred: &ProceduralGraph, gold: &ProceduralGraph, kind: EdgeKind, cfg: &MatchConfig) -> (f64, f64, f64) {
    let pf: Vec<&Edge> = pred.edges.iter().filter(|e| e.kind == kind).collect();
    let gf: Vec<&Edge> = gold.edges.iter().filter(|e| e.kind == kind).collect();
    let weight = |a: &Edge, b: &Edge| -> f64 {
        let ends = (node(pred, &a.source), node(pred, &a.target), node(gold, &b.source), node(gold, &b.target));
        let (Some(ps), Some(pt), Some(gs), Some(gt)) = ends else {
            return 0.0;
        };
        if !(same_element(ps, gs, cfg) && same_element(pt, gt, cfg)) {
            return 0.0;
        }
        match kind {
            EdgeKind::ConditionFlow => bleu(
                a.condition.as_deref().unwrap_or(""),
                b.condition.as_deref().unwrap_or(""),
                cfg,
            ),
            _ => 1.0,
        }
    };
    let w: Vec<Vec<f64>> = pf.iter().map(|a| gf.iter().map(|b| weight(a, b)).collect()).collect();
    prf(best_assignment(&w), pf.len(), gf.len())
}

const SWAPS: [&str; 8] = ["check", "the", "form", "order", "send", "quickly", "report", "new"];

fn mutate_text<R: Rng>(rng: &mut R, text: &str) -> String {
    let mut words: Vec<&str> = text.split_whitespace().collect();
    match rng.gen_range(0..4) {
        0 if words.len() > 1 => {
            let i = rng.gen_range(0..words.len());
            words.remove(i);
        }
        1 if !words.is_empty() => {
            let i = rng.gen_range(0..words.len());
            words[i] = SWAPS.choose(rng).unwrap();
        }
        2 => words.push(SWAPS.choose(rng).unwrap()),
        _ => return format!("{} {}", SWAPS.choose(rng).unwrap(), SWAPS.choose(rng).unwrap()),
    }
    words.join(" ")
}

/// A noisy copy of `gold`: texts edited, gateway types changed, flows
/// dropped and spurious flows added. The result need not be valid.
pub fn perturb<R: Rng>(rng: &mut R, gold: &ProceduralGraph) -> ProceduralGraph {
    let mut g = gold.clone();
    for n in &mut g.nodes {
        if !n.text.is_empty() && rng.gen_bool(0.35) {
            n.text = mutate_text(rng, &n.text);
        }
        if n.kind == NodeKind::Gateway && rng.gen_bool(0.25) {
            n.gateway_type = GatewayType::ALL.choose(rng).copied();
        }
        if n.kind == NodeKind::Action && rng.gen_bool(0.15) {
            n.actor = Some("someone".into());
        }
    }
    g.edges.retain(|_| !rng.gen_bool(0.15));
    for e in &mut g.edges {
        if let Some(c) = &e.condition {
            if rng.gen_bool(0.3) {
                e.condition = Some(mutate_text(rng, c));
            }
        }
    }
    let extra = rng.gen_range(0..3);
    for _ in 0..extra {
        let a = g.nodes.choose(rng).unwrap().id.clone();
        let b = g.nodes.choose(rng).unwrap().id.clone();
        g.edges.push(match rng.gen_range(0..3) {
            0 => Edge::sequence(a, b),
            1 => Edge::condition(a, b, mutate_text(rng, "the item is new")),
            _ => Edge::constraint(a, b),
        });
    }
    g.edges.shuffle(rng);
    g
}
