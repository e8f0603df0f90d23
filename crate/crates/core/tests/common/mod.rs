#![allow(dead_code)]

use procgraph_core::{Edge, GatewayRole, GatewayType, Node, ProceduralGraph};

/// The restaurant example: a customer lane with an inclusive choice and a
/// restaurant lane with an exclusive choice followed by a parallel block.
pub fn restaurant() -> ProceduralGraph {
    use GatewayRole::{Branch, Merge};
    use GatewayType::{Exclusive, Inclusive, Parallel};
    let nodes = vec![
        Node::start("s1", "customer"),
        Node::gateway("g1", Inclusive, Branch, "G-1"),
        Node::action("a1", "choose the desired dishes", "customer"),
        Node::action("a2", "specify the taste", "customer"),
        Node::action("a3", "order drinks", "customer"),
        Node::action("a4", "specify the size", "customer"),
        Node::gateway("g2", Inclusive, Merge, "G-1"),
        Node::action("a5", "pay the bill", "customer"),
        Node::data("d1", "receipt"),
        Node::end("e1", "customer"),
        Node::start("s2", "restaurant"),
        Node::action("b1", "receive the order", "restaurant"),
        Node::data("d2", "order details"),
        Node::gateway("g3", Exclusive, Branch, "G-3"),
        Node::action("b2", "cook the dishes", "restaurant"),
        Node::action("b3", "recommend other dishes", "restaurant"),
        Node::gateway("g4", Exclusive, Merge, "G-3"),
        Node::gateway("g5", Parallel, Branch, "G-5"),
        Node::action("b4", "prepare the tableware", "restaurant"),
        Node::action("b5", "heat the soup", "restaurant"),
        Node::gateway("g6", Parallel, Merge, "G-5"),
        Node::action("b6", "serve the food", "restaurant"),
        Node::note("n1", "the food must be served hot"),
        Node::end("e2", "restaurant"),
    ];
    let edges = vec![
        Edge::sequence("s1", "g1"),
        Edge::condition("g1", "a1", "need dishes"),
        Edge::sequence("a1", "a2"),
        Edge::condition("g1", "a3", "need drinks"),
        Edge::sequence("a3", "a4"),
        Edge::sequence("a2", "g2"),
        Edge::sequence("a4", "g2"),
        Edge::sequence("g2", "a5"),
        Edge::constraint("a5", "d1"),
        Edge::sequence("a5", "e1"),
        Edge::sequence("s2", "b1"),
        Edge::constraint("d2", "b1"),
        Edge::sequence("b1", "g3"),
        Edge::condition("g3", "b2", "the dishes are available"),
        Edge::condition("g3", "b3", "the dishes are sold out"),
        Edge::sequence("b2", "g4"),
        Edge::sequence("b3", "g4"),
        Edge::sequence("g4", "g5"),
        Edge::sequence("g5", "b4"),
        Edge::sequence("g5", "b5"),
        Edge::sequence("b4", "g6"),
        Edge::sequence("b5", "g6"),
        Edge::sequence("g6", "b6"),
        Edge::constraint("b6", "n1"),
        Edge::sequence("b6", "e2"),
    ];
    ProceduralGraph::new(nodes, edges)
}

/// Golden rows: (kind, template, slots, rendered).
pub fn template_rows() -> Vec<(String, String, Vec<String>, String)> {
    include_str!("../fixtures/templates.tsv")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let cols: Vec<&str> = l.split('\t').collect();
            assert_eq!(cols.len(), 4, "bad fixture row {:?}", l);
            let slots = if cols[2].is_empty() {
                Vec::new()
            } else {
                cols[2].split(" | ").map(str::to_owned).collect()
            };
            (cols[0].to_owned(), cols[1].to_owned(), slots, cols[3].to_owned())
        })
        .collect()
}
