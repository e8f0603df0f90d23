use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{actor_f1, element_f1, flow_f1, gateway_f1, MatchConfig, Prf};
use crate::graph::{EdgeKind, GatewayType, NodeKind, ProceduralGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Actor,
    Action,
    DataConstraint,
    ActionConstraint,
    Exclusive,
    Inclusive,
    Parallel,
    SequenceFlow,
    ConditionFlow,
    ConstraintFlow,
}

impl Dimension {
    pub const ALL: [Dimension; 10] = [
        Dimension::Actor,
        Dimension::Action,
        Dimension::DataConstraint,
        Dimension::ActionConstraint,
        Dimension::Exclusive,
        Dimension::Inclusive,
        Dimension::Parallel,
        Dimension::SequenceFlow,
        Dimension::ConditionFlow,
        Dimension::ConstraintFlow,
    ];

    fn short(self) -> &'static str {
        match self {
            Dimension::Actor => "Actor",
            Dimension::Action => "Action",
            Dimension::DataConstraint => "Data",
            Dimension::ActionConstraint => "Action",
            Dimension::Exclusive => "Exclusive",
            Dimension::Inclusive => "Inclusive",
            Dimension::Parallel => "Parallel",
            Dimension::SequenceFlow => "Sequence",
            Dimension::ConditionFlow => "Condition",
            Dimension::ConstraintFlow => "Constraint",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionScore {
    pub dimension: Dimension,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True-positive mass (soft for BLEU-weighted dimensions).
    pub matched: f64,
    pub predicted: usize,
    pub gold: usize,
}

impl DimensionScore {
    /// A dimension with no elements on either side carries no signal.
    pub fn populated(&self) -> bool {
        self.predicted + self.gold > 0
    }

    pub fn prf(&self) -> Prf {
        Prf {
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scores: Vec<DimensionScore>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl EvalReport {
    pub fn get(&self, d: Dimension) -> &DimensionScore {
        self.scores
            .iter()
            .find(|s| s.dimension == d)
            .expect("every report carries all ten dimensions")
    }

    /// Report for a prediction that could not be read: every dimension the
    /// gold graph populates scores zero.
    pub fn unparseable(gold: &ProceduralGraph, note: impl Into<String>) -> Self {
        let mut r = evaluate(&ProceduralGraph::default(), gold, &MatchConfig::default());
        r.notes.push(note.into());
        r
    }
}

fn texts(g: &ProceduralGraph, kind: NodeKind) -> Vec<&str> {
    g.nodes_of(kind).map(|n| n.text.as_str()).collect()
}

fn gateway_count(g: &ProceduralGraph, ty: GatewayType) -> usize {
    g.nodes_of(NodeKind::Gateway).filter(|n| n.gateway_type == Some(ty)).count()
}

/// Score a predicted graph against gold on all ten dimensions.
pub fn evaluate(predicted: &ProceduralGraph, gold: &ProceduralGraph, cfg: &MatchConfig) -> EvalReport {
    let mut scores = Vec::with_capacity(10);
    let mut push = |dimension, prf: Prf, matched: f64, p: usize, g: usize| {
        scores.push(DimensionScore {
            dimension,
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
            matched,
            predicted: p,
            gold: g,
        })
    };
    let pa = predicted.nodes_of(NodeKind::Action).count();
    let ga = gold.nodes_of(NodeKind::Action).count();
    let actor = actor_f1(predicted, gold, cfg);
    push(Dimension::Actor, actor, actor.precision * pa as f64, pa, ga);
    for (d, kind) in [
        (Dimension::Action, NodeKind::Action),
        (Dimension::DataConstraint, NodeKind::DataConstraint),
        (Dimension::ActionConstraint, NodeKind::ActionConstraint),
    ] {
        let (p, g) = (texts(predicted, kind), texts(gold, kind));
        let prf = element_f1(&p, &g, cfg);
        push(d, prf, prf.precision * p.len() as f64, p.len(), g.len());
    }
    for (d, ty) in [
        (Dimension::Exclusive, GatewayType::Exclusive),
        (Dimension::Inclusive, GatewayType::Inclusive),
        (Dimension::Parallel, GatewayType::Parallel),
    ] {
        let (p, g) = (gateway_count(predicted, ty), gateway_count(gold, ty));
        let prf = gateway_f1(predicted, gold, ty, cfg);
        push(d, prf, prf.precision * p as f64, p, g);
    }
    for (d, kind) in [
        (Dimension::SequenceFlow, EdgeKind::SequenceFlow),
        (Dimension::ConditionFlow, EdgeKind::ConditionFlow),
        (Dimension::ConstraintFlow, EdgeKind::ConstraintFlow),
    ] {
        let p = predicted.edges_of(kind).count();
        let g = gold.edges_of(kind).count();
        let prf = flow_f1(predicted, gold, kind, cfg);
        push(d, prf, prf.precision * p as f64, p, g);
    }
    EvalReport {
        scores,
        notes: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroScore {
    pub dimension: Dimension,
    /// `None` when no pair populates the dimension.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    /// Number of pairs averaged.
    pub pairs: usize,
}

/// Per-dimension mean over the reports that populate that dimension.
pub fn macro_average(reports: &[EvalReport]) -> Vec<MacroScore> {
    Dimension::ALL
        .iter()
        .map(|&d| {
            let rows: Vec<&DimensionScore> = reports.iter().map(|r| r.get(d)).filter(|s| s.populated()).collect();
            let mean = |f: fn(&DimensionScore) -> f64| {
                (!rows.is_empty()).then(|| rows.iter().map(|s| f(s)).sum::<f64>() / rows.len() as f64)
            };
            MacroScore {
                dimension: d,
                precision: mean(|s| s.precision),
                recall: mean(|s| s.recall),
                f1: mean(|s| s.f1),
                pairs: rows.len(),
            }
        })
        .collect()
}

/// Plain-text F1 table, one row per named system, in the column layout
/// Actor | Action | Constraint (Data, Action) | Gateway (Exclusive,
/// Inclusive, Parallel) | Flow (Sequence, Condition, Constraint).
pub fn render_table(rows: &[(String, Vec<MacroScore>)]) -> String {
    let name_w = rows.iter().map(|(n, _)| n.chars().count()).max().unwrap_or(0).max(6);
    let widths: Vec<usize> = Dimension::ALL.iter().map(|d| d.short().len().max(6)).collect();
    let mut out = String::new();

    let span = |a: usize, b: usize| widths[a..b].iter().sum::<usize>() + 3 * (b - a - 1);
    let _ = writeln!(
        out,
        "{:<nw$} | {:<w0$} | {:<w1$} | {:<wc$} | {:<wg$} | Flow",
        "",
        "",
        "",
        "Constraint",
        "Gateway",
        nw = name_w,
        w0 = widths[0],
        w1 = widths[1],
        wc = span(2, 4),
        wg = span(4, 7),
    );
    let mut header = format!("{:<nw$}", "System", nw = name_w);
    for (d, w) in Dimension::ALL.iter().zip(&widths) {
        let _ = write!(header, " | {:<w$}", d.short(), w = *w);
    }
    let _ = writeln!(out, "{}", header.trim_end());
    let rule_len = header.trim_end().chars().count();
    let _ = writeln!(out, "{}", "-".repeat(rule_len));
    for (name, scores) in rows {
        let mut line = format!("{:<nw$}", name, nw = name_w);
        for (d, w) in Dimension::ALL.iter().zip(&widths) {
            let cell = scores
                .iter()
                .find(|s| s.dimension == *d)
                .and_then(|s| s.f1)
                .map_or_else(|| String::from("-"), |f| format!("{:.3}", f));
            let _ = write!(line, " | {:>w$}", cell, w = *w);
        }
        let _ = writeln!(out, "{}", line);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Node};
    use alloc::string::ToString;
    use alloc::vec;

    fn toy() -> ProceduralGraph {
        ProceduralGraph::new(
            vec![
                Node::start("s", "x"),
                Node::action("a", "fill the form", "x"),
                Node::data("d", "form"),
                Node::end("e", "x"),
            ],
            vec![Edge::sequence("s", "a"), Edge::sequence("a", "e"), Edge::constraint("a", "d")],
        )
    }

    #[test]
    fn identity_scores_one_where_populated() {
        let r = evaluate(&toy(), &toy(), &MatchConfig::default());
        assert_eq!(r.scores.len(), 10);
        for s in &r.scores {
            assert_eq!(s.f1, 1.0, "{:?}", s.dimension);
        }
        assert!(!r.get(Dimension::Exclusive).populated());
        assert!(r.get(Dimension::ConstraintFlow).populated());
    }

    #[test]
    fn empty_prediction_is_zero_on_populated() {
        let r = EvalReport::unparseable(&toy(), "no edges");
        for s in r.scores.iter().filter(|s| s.populated()) {
            assert_eq!(s.f1, 0.0);
        }
        assert_eq!(r.notes, ["no edges"]);
    }

    #[test]
    fn macro_skips_unpopulated() {
        let a = evaluate(&toy(), &toy(), &MatchConfig::default());
        let b = EvalReport::unparseable(&toy(), "x");
        let m = macro_average(&[a, b]);
        let action = m.iter().find(|s| s.dimension == Dimension::Action).unwrap();
        assert_eq!((action.f1, action.pairs), (Some(0.5), 2));
        let xor = m.iter().find(|s| s.dimension == Dimension::Exclusive).unwrap();
        assert_eq!((xor.f1, xor.pairs), (None, 0));
        let table = render_table(&[("toy".to_string(), m)]);
        assert!(table.contains("0.500"));
        assert!(table.contains(" - "));
        assert!(table.lines().next().unwrap().contains("Gateway"));
    }
}
