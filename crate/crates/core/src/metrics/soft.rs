use alloc::vec::Vec;

use super::{bleu, MatchConfig, Prf};
use crate::assign::max_weight_assignment;
use crate::graph::{EdgeKind, GatewayType, GraphIndex, Node, NodeKind, ProceduralGraph};

/// Mean best-BLEU precision and recall between two lists of element texts.
pub fn element_f1<P: AsRef<str>, G: AsRef<str>>(predicted: &[P], gold: &[G], cfg: &MatchConfig) -> Prf {
    if predicted.is_empty() && gold.is_empty() {
        return Prf::perfect();
    }
    if predicted.is_empty() || gold.is_empty() {
        return Prf::zero();
    }
    let best = |x: &str, others: &mut dyn Iterator<Item = &str>| -> f64 {
        others.map(|o| bleu(x, o, cfg)).fold(0.0, f64::max)
    };
    let p: f64 = predicted
        .iter()
        .map(|x| best(x.as_ref(), &mut gold.iter().map(AsRef::as_ref)))
        .sum::<f64>()
        / predicted.len() as f64;
    let r: f64 = gold
        .iter()
        .map(|x| best(x.as_ref(), &mut predicted.iter().map(AsRef::as_ref)))
        .sum::<f64>()
        / gold.len() as f64;
    Prf::from_pr(p, r)
}

fn actions(g: &ProceduralGraph) -> Vec<&Node> {
    g.nodes_of(NodeKind::Action).collect()
}

/// Actor of each action scored against the actor of its most similar action
/// on the other side.
pub fn actor_f1(predicted: &ProceduralGraph, gold: &ProceduralGraph, cfg: &MatchConfig) -> Prf {
    let (pa, ga) = (actions(predicted), actions(gold));
    if pa.is_empty() && ga.is_empty() {
        return Prf::perfect();
    }
    if pa.is_empty() || ga.is_empty() {
        return Prf::zero();
    }
    let side = |from: &[&Node], to: &[&Node]| -> f64 {
        let total: f64 = from
            .iter()
            .map(|a| {
                let mut best = to[0];
                let mut best_score = f64::NEG_INFINITY;
                for b in to {
                    let s = bleu(&a.text, &b.text, cfg);
                    if s > best_score {
                        best_score = s;
                        best = b;
                    }
                }
                match (a.actor.as_deref(), best.actor.as_deref()) {
                    (Some(x), Some(y)) if !x.trim().is_empty() && !y.trim().is_empty() => bleu(x, y, cfg),
                    _ => 0.0,
                }
            })
            .sum();
        total / from.len() as f64
    };
    Prf::from_pr(side(&pa, &ga), side(&ga, &pa))
}

/// Element-level match used for gateway neighbours and flow endpoints:
/// same kind, and BLEU of the texts at or above the threshold. Gateways only
/// need the same gateway type; Start/End only the same kind.
pub fn elements_match(pred: &Node, gold: &Node, cfg: &MatchConfig) -> bool {
    if pred.kind != gold.kind {
        return false;
    }
    match pred.kind {
        NodeKind::Gateway => pred.gateway_type == gold.gateway_type,
        NodeKind::Start | NodeKind::End => true,
        _ => bleu(&pred.text, &gold.text, cfg) >= cfg.bleu_threshold,
    }
}

fn gateways_of(g: &ProceduralGraph, ty: GatewayType) -> Vec<usize> {
    (0..g.nodes.len())
        .filter(|&i| g.nodes[i].kind == NodeKind::Gateway && g.nodes[i].gateway_type == Some(ty))
        .collect()
}

/// Neighbours over control flow as (is_outgoing, node index).
fn neighbours(ix: &GraphIndex<'_>, i: usize) -> Vec<(bool, usize)> {
    ix.control_out(i)
        .map(|ei| (true, ix.tgt(ei)))
        .chain(ix.control_in(i).map(|ei| (false, ix.src(ei))))
        .collect()
}

/// Whether predicted gateway `p` and gold gateway `g` count as a match:
/// same type and at least one flow-connected element matching in the same
/// direction.
pub fn gateway_match(
    predicted: &ProceduralGraph,
    p: usize,
    gold: &ProceduralGraph,
    g: usize,
    cfg: &MatchConfig,
) -> bool {
    let (pix, gix) = (GraphIndex::new(predicted), GraphIndex::new(gold));
    gateway_match_with(predicted, p, &neighbours(&pix, p), gold, g, &neighbours(&gix, g), cfg)
}

fn gateway_match_with(
    predicted: &ProceduralGraph,
    p: usize,
    pnb: &[(bool, usize)],
    gold: &ProceduralGraph,
    g: usize,
    gnb: &[(bool, usize)],
    cfg: &MatchConfig,
) -> bool {
    let (pn, gn) = (&predicted.nodes[p], &gold.nodes[g]);
    if pn.kind != NodeKind::Gateway || gn.kind != NodeKind::Gateway || pn.gateway_type != gn.gateway_type {
        return false;
    }
    pnb.iter().any(|&(pd, x)| {
        gnb.iter()
            .any(|&(gd, y)| pd == gd && elements_match(&predicted.nodes[x], &gold.nodes[y], cfg))
    })
}

/// Gateway F1 for one gateway type, over every gateway node of that type
/// (branch and merge), with a maximum one-to-one assignment of matches.
pub fn gateway_f1(predicted: &ProceduralGraph, gold: &ProceduralGraph, ty: GatewayType, cfg: &MatchConfig) -> Prf {
    let (pg, gg) = (gateways_of(predicted, ty), gateways_of(gold, ty));
    let (pix, gix) = (GraphIndex::new(predicted), GraphIndex::new(gold));
    let pnb: Vec<_> = pg.iter().map(|&p| neighbours(&pix, p)).collect();
    let gnb: Vec<_> = gg.iter().map(|&g| neighbours(&gix, g)).collect();
    let w: Vec<Vec<f64>> = pg
        .iter()
        .zip(&pnb)
        .map(|(&p, pn)| {
            gg.iter()
                .zip(&gnb)
                .map(|(&g, gn)| {
                    if gateway_match_with(predicted, p, pn, gold, g, gn, cfg) {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let tp = max_weight_assignment(&w).len() as f64;
    Prf::from_counts(tp, pg.len(), gg.len())
}

/// Weight of matching predicted flow `pe` with gold flow `ge`: zero unless
/// kinds and both endpoints match; condition flows weigh the condition BLEU.
pub fn flow_weight(
    predicted: &ProceduralGraph,
    pe: usize,
    gold: &ProceduralGraph,
    ge: usize,
    cfg: &MatchConfig,
) -> f64 {
    let (a, b) = (&predicted.edges[pe], &gold.edges[ge]);
    if a.kind != b.kind {
        return 0.0;
    }
    let ends = (
        predicted.node(&a.source),
        predicted.node(&a.target),
        gold.node(&b.source),
        gold.node(&b.target),
    );
    let (Some(ps), Some(pt), Some(gs), Some(gt)) = ends else {
        return 0.0;
    };
    if !elements_match(ps, gs, cfg) || !elements_match(pt, gt, cfg) {
        return 0.0;
    }
    if a.kind == EdgeKind::ConditionFlow {
        bleu(
            a.condition.as_deref().unwrap_or(""),
            b.condition.as_deref().unwrap_or(""),
            cfg,
        )
    } else {
        1.0
    }
}

/// Soft flow F1 for one flow kind: the true-positive mass is the total weight
/// of a maximum-weight one-to-one assignment.
pub fn flow_f1(predicted: &ProceduralGraph, gold: &ProceduralGraph, kind: EdgeKind, cfg: &MatchConfig) -> Prf {
    let pf: Vec<usize> = (0..predicted.edges.len()).filter(|&i| predicted.edges[i].kind == kind).collect();
    let gf: Vec<usize> = (0..gold.edges.len()).filter(|&i| gold.edges[i].kind == kind).collect();
    let w: Vec<Vec<f64>> = pf
        .iter()
        .map(|&p| gf.iter().map(|&g| flow_weight(predicted, p, gold, g, cfg)).collect())
        .collect();
    let tp: f64 = max_weight_assignment(&w).iter().map(|&(i, j)| w[i][j]).sum();
    Prf::from_counts(tp, pf.len(), gf.len())
}
