//! Property tests over random graphs and inputs.

mod support;

use std::collections::BTreeMap;

use proptest::prelude::*;

use procgraph::split::{split_indices, split_sizes, Ratio};
use procgraph_core::assemble::{
    aggregate, generate, group, order, Assembler, HeuristicAggregation, HeuristicBoundary, OrderingScorer, Smoother,
    DEFAULT_THRESHOLD,
};
use procgraph_core::backends::{ChatMessage, HeuristicPredicateObject, RuleNli};
use procgraph_core::decompose::{decompose, filter_units, render_all, Fragment, UnitKind};
use procgraph_core::dotlang::{parse, serialize};
use procgraph_core::graph::{isomorphic, validate};
use procgraph_core::metrics::{bleu, element_f1, elements_match, evaluate, icc, MatchConfig, ScoreMatrix};
use procgraph_core::refine::{condition_verify, refine_loop, FeedbackKind, FeedbackTemplates, RefineConfig, Verifiers};
use procgraph_core::testgen::{random_graph, GenConfig};
use procgraph_core::{Edge, EdgeKind, GatewayRole, GatewayType, Node, NodeKind, ProceduralGraph};

fn graph_from(seed: u64) -> ProceduralGraph {
    random_graph(&mut support::rng(seed), &GenConfig::default())
}

fn fragments(g: &ProceduralGraph) -> Vec<Fragment> {
    render_all(&filter_units(decompose(g).unwrap())).unwrap()
}

fn texts<'a>(fs: impl IntoIterator<Item = &'a Fragment>) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for f in fs {
        *m.entry(f.text.clone()).or_insert(0) += 1;
    }
    m
}

/// Applies a fixed shuffle keyed by the group size.
struct Shuffled(u64);

impl OrderingScorer for Shuffled {
    fn order(&self, fragments: &[Fragment]) -> Vec<usize> {
        use rand::seq::SliceRandom;
        let mut idx: Vec<usize> = (0..fragments.len()).collect();
        idx.shuffle(&mut support::rng(self.0 ^ fragments.len() as u64));
        idx
    }
}

const WORDS: [&str; 8] = ["stock", "paid", "urgent", "member", "fragile", "late", "signed", "local"];

fn phrase() -> impl Strategy<Value = Vec<&'static str>> {
    prop::collection::vec(prop::sample::select(&WORDS[..]), 1..4)
}

/// Conditions as word lists, each with an optional position for one "not".
fn conditions() -> impl Strategy<Value = Vec<(Vec<&'static str>, Option<usize>)>> {
    prop::collection::vec((phrase(), prop::option::of(0usize..4)), 2..4)
}

fn inclusive_branch(conds: &[String]) -> ProceduralGraph {
    let mut nodes = vec![
        Node::start("s", "clerk"),
        Node::gateway("b", GatewayType::Inclusive, GatewayRole::Branch, "p"),
        Node::gateway("m", GatewayType::Inclusive, GatewayRole::Merge, "p"),
        Node::end("e", "clerk"),
    ];
    let mut edges = vec![Edge::sequence("s", "b"), Edge::sequence("m", "e")];
    for (i, c) in conds.iter().enumerate() {
        let id = format!("a{}", i);
        nodes.push(Node::action(id.as_str(), format!("handle case {}", i), "clerk"));
        edges.push(Edge::condition("b", id.as_str(), c.as_str()));
        edges.push(Edge::sequence(id.as_str(), "m"));
    }
    ProceduralGraph::new(nodes, edges)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_graphs_validate_with_paired_gateways(seed in any::<u64>()) {
        let g = graph_from(seed);
        let report = validate(&g);
        prop_assert!(report.ok, "{:?}", report.violations);
        prop_assert_eq!(validate(&g), report);
        for ty in GatewayType::ALL {
            let count = |role| g.nodes.iter().filter(|n| n.gateway_type == Some(ty) && n.gateway_role == Some(role)).count();
            prop_assert_eq!(count(GatewayRole::Branch), count(GatewayRole::Merge));
        }
    }

    #[test]
    fn dot_round_trip(seed in any::<u64>()) {
        let g = graph_from(seed);
        let text = serialize(&g).unwrap();
        let back = parse(&text);
        prop_assert!(back.errors.is_empty(), "{:?}", back.errors);
        prop_assert!(isomorphic(&g, &back.graph), "{}", text);
    }

    #[test]
    fn parse_accounts_for_every_line(text in "([a-zA-Z0-9 ():>\\-\"]{0,30}\n){0,8}") {
        let out = parse(&text);
        prop_assert_eq!(out.lines.len(), text.lines().count());
        prop_assert!(out.errors.len() <= out.lines.len());
    }

    #[test]
    fn decomposition_covers_control_flow(seed in any::<u64>()) {
        let g = graph_from(seed);
        let units = filter_units(decompose(&g).unwrap());
        for e in g.edges.iter().filter(|e| e.kind.is_control()) {
            prop_assert!(
                units.iter().any(|u| u.source_ids.contains(&e.source) && u.source_ids.contains(&e.target)),
                "{} -> {} uncovered", e.source, e.target
            );
        }
        for e in g.edges_of(EdgeKind::SequenceFlow) {
            let (s, t) = (g.node(&e.source).unwrap(), g.node(&e.target).unwrap());
            if s.kind == NodeKind::Action && t.kind == NodeKind::Action {
                prop_assert!(units.iter().any(|u| u.kind == UnitKind::ActionToAction && u.slots == [s.text.clone(), t.text.clone()]));
            }
        }
    }

    #[test]
    fn assembly_keeps_every_fragment_within_its_group(seed in any::<u64>(), shuffle in any::<u64>()) {
        let frags = fragments(&graph_from(seed));
        let before = texts(&frags);
        let groups = group(frags, &HeuristicBoundary, DEFAULT_THRESHOLD);
        let mut after = Vec::new();
        for g in groups {
            let members = texts(&g);
            let ordered = order(g, &Shuffled(shuffle));
            prop_assert_eq!(texts(&ordered), members);
            let clusters = aggregate(ordered, &HeuristicAggregation, DEFAULT_THRESHOLD);
            after.extend(clusters.into_iter().flatten());
        }
        prop_assert_eq!(texts(&after), before);
    }

    #[test]
    fn identity_document_contains_every_action(seed in any::<u64>()) {
        let g = graph_from(seed);
        let doc = generate(&g, &Assembler::default(), &Smoother::Identity).unwrap().document;
        for a in g.nodes_of(NodeKind::Action) {
            prop_assert!(doc.contains(&a.text), "{:?} missing", a.text);
        }
        let again = generate(&g, &Assembler::default(), &Smoother::Identity).unwrap().document;
        prop_assert_eq!(doc, again);
    }

    #[test]
    fn self_evaluation_is_perfect(seed in any::<u64>()) {
        let g = graph_from(seed);
        let r = evaluate(&g, &g, &MatchConfig::default());
        for s in r.scores.iter().filter(|s| s.populated()) {
            prop_assert!((s.f1 - 1.0).abs() < 1e-12, "{:?}", s);
        }
    }

    #[test]
    fn bleu_is_bounded(a in "[a-c ]{0,16}", b in "[a-c ]{0,16}") {
        let v = bleu(&a, &b, &MatchConfig::default());
        prop_assert!((0.0..=1.0).contains(&v), "{}", v);
    }

    #[test]
    fn threshold_is_inclusive(a in "[a-c]{1,3}( [a-c]{1,3}){0,4}", b in "[a-c]{1,3}( [a-c]{1,3}){0,4}") {
        let v = bleu(&a, &b, &MatchConfig::default());
        prop_assume!(v > 0.0);
        let cfg = MatchConfig::with_threshold(v).unwrap();
        prop_assert!(elements_match(&Node::action("p", a.as_str(), "x"), &Node::action("g", b.as_str(), "x"), &cfg));
    }

    #[test]
    fn removing_a_prediction_never_raises_recall(
        gold in prop::collection::vec("[a-d]{1,3}( [a-d]{1,3}){0,3}", 1..6),
        pick in prop::collection::vec(any::<bool>(), 6),
        drop in any::<prop::sample::Index>(),
    ) {
        let pred: Vec<&String> = gold.iter().zip(&pick).filter(|(_, k)| **k).map(|(g, _)| g).collect();
        prop_assume!(!pred.is_empty());
        let cfg = MatchConfig::default();
        let full = element_f1(&pred, &gold, &cfg).recall;
        let mut fewer = pred.clone();
        fewer.remove(drop.index(fewer.len()));
        prop_assert!(element_f1(&fewer, &gold, &cfg).recall <= full + 1e-12);
    }

    #[test]
    fn icc_stays_in_range(k in 2usize..5, n in 2usize..8, cells in prop::collection::vec(0u8..11, 40)) {
        let ratings: Vec<Vec<f64>> = (0..k).map(|r| (0..n).map(|j| f64::from(cells[r * n + j])).collect()).collect();
        let v = icc(&ScoreMatrix::new(ratings).unwrap());
        let floor = -1.0 / (k as f64 - 1.0);
        prop_assert!(v >= floor - 1e-9 && v <= 1.0 + 1e-9, "{} for k={}", v, k);
    }

    #[test]
    fn negated_pair_drives_inclusive_feedback(conds in conditions()) {
        let rendered: Vec<String> = conds
            .iter()
            .map(|(ws, neg)| {
                let mut ws: Vec<&str> = ws.clone();
                if let Some(at) = neg {
                    ws.insert((*at).min(ws.len()), "not");
                }
                ws.join(" ")
            })
            .collect();
        let expected = (0..conds.len()).any(|i| {
            (0..conds.len()).any(|j| i != j && conds[i].0 == conds[j].0 && conds[i].1.is_some() != conds[j].1.is_some())
        });
        let g = inclusive_branch(&rendered);
        prop_assert!(validate(&g).ok);
        let before = g.clone();
        let found = condition_verify(&g, &RuleNli, &RefineConfig::default(), &FeedbackTemplates::default()).unwrap();
        prop_assert_eq!(&g, &before);
        prop_assert!(found.len() <= 1);
        prop_assert_eq!(found.iter().any(|f| f.kind == FeedbackKind::OrShouldBeXor), expected, "{:?}", rendered);
    }

    #[test]
    fn refine_trace_is_bounded(seed in any::<u64>(), max_iters in 0usize..5, stubborn in any::<bool>()) {
        let case = support::faults::case(&mut support::rng(seed));
        let templates = FeedbackTemplates::default();
        let verifiers = Verifiers { nli: &RuleNli, parser: &HeuristicPredicateObject, templates: &templates };
        let cfg = RefineConfig { max_iters, ..RefineConfig::default() };
        let mut fixer = support::faults::Fixer::new(&case.faulty, stubborn);
        let (_, trace) = refine_loop(vec![ChatMessage::user("Extract the graph.")], &mut fixer, &verifiers, &cfg).unwrap();
        prop_assert!(trace.iterations.len() <= max_iters + 1);
    }

    #[test]
    fn split_partitions_indices(n in 0usize..400, a in 0u32..5, b in 0u32..5, c in 1u32..5, seed in any::<u64>()) {
        let ratio = Ratio(a, b, c);
        let parts = split_indices(n, ratio, seed);
        let (tr, va, te) = split_sizes(n, ratio);
        prop_assert_eq!([parts[0].len(), parts[1].len(), parts[2].len()], [tr, va, te]);
        let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(split_indices(n, ratio, seed), parts);
    }
}
