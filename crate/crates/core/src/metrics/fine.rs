use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::backends::{NerBackend, NliBackend, NliLabel};
use crate::graph::{NodeKind, ProceduralGraph};
use crate::text::fold;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FineScore {
    /// Share of fragments entailed by the document.
    pub omission: f64,
    /// Share of document sentences entailed by the fragments.
    pub hallucination: f64,
}

/// Sentences of a document: split at newlines and at `.`, `?` or `!`
/// followed by whitespace. Segments ending in `:` are headings (actor
/// prefixes) and are skipped.
pub fn split_sentences(document: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for line in document.lines() {
        let mut start = 0;
        let mut chars = line.char_indices().peekable();
        while let Some((i, c)) = chars.next() {
            let boundary = matches!(c, '.' | '?' | '!')
                && chars.peek().is_none_or(|&(_, next)| next.is_whitespace());
            if boundary {
                let end = i + c.len_utf8();
                out.push(&line[start..end]);
                start = end;
            }
        }
        out.push(&line[start..]);
    }
    out.into_iter()
        .map(str::trim)
        .filter(|s| !s.is_empty() && !s.ends_with(':'))
        .collect()
}

/// NLI-based omission and hallucination scores. `fragments` should be in
/// document order: their space-joined concatenation is the premise for the
/// hallucination direction.
pub fn fine<S: AsRef<str>>(document: &str, fragments: &[S], nli: &dyn NliBackend) -> Result<FineScore, MetricError> {
    let entailed = |premise: &str, hypothesis: &str| -> Result<bool, MetricError> {
        nli.nli(premise, hypothesis)
            .map(|v| v.label == NliLabel::Entailment)
            .map_err(MetricError::NliUnavailable)
    };
    let omission = if fragments.is_empty() {
        1.0
    } else {
        let mut hit = 0usize;
        for f in fragments {
            hit += entailed(document, f.as_ref())? as usize;
        }
        hit as f64 / fragments.len() as f64
    };
    let sentences = split_sentences(document);
    let hallucination = if sentences.is_empty() {
        1.0
    } else {
        let premise = fragments.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ");
        let mut hit = 0usize;
        for s in &sentences {
            hit += entailed(&premise, s)? as usize;
        }
        hit as f64 / sentences.len() as f64
    };
    Ok(FineScore { omission, hallucination })
}

/// Case-folded, de-duplicated action texts and named entities of a graph,
/// in first-seen order.
pub fn esa_items(graph: &ProceduralGraph, ner: &dyn NerBackend) -> Vec<String> {
    let mut items: Vec<String> = Vec::new();
    let mut add = |s: &str| {
        let f = fold(s.trim());
        if !f.is_empty() && !items.contains(&f) {
            items.push(f);
        }
    };
    for n in graph.nodes_of(NodeKind::Action) {
        add(&n.text);
    }
    for n in &graph.nodes {
        if matches!(n.kind, NodeKind::Action | NodeKind::DataConstraint | NodeKind::ActionConstraint) {
            for e in ner.entities(&n.text) {
                add(&e);
            }
        }
    }
    items
}

/// Share of the graph's actions and entities found verbatim (case-folded)
/// in the document. A graph with nothing to cover scores 1.
pub fn esa(document: &str, graph: &ProceduralGraph, ner: &dyn NerBackend) -> f64 {
    let items = esa_items(graph, ner);
    if items.is_empty() {
        return 1.0;
    }
    let doc = fold(document);
    let covered = items.iter().filter(|i| doc.contains(i.as_str())).count();
    covered as f64 / items.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{HeuristicNer, RuleNli};
    use crate::graph::{Edge, Node};
    use alloc::vec;

    struct NoEntities;
    impl NerBackend for NoEntities {
        fn entities(&self, _: &str) -> Vec<String> {
            Vec::new()
        }
    }

    #[test]
    fn sentences() {
        let doc = "For the clerk:\nIn the beginning, pay. Then rest! Why? e.g.x\n\n";
        assert_eq!(split_sentences(doc), ["In the beginning, pay.", "Then rest!", "Why?", "e.g.x"]);
        assert!(split_sentences("").is_empty());
    }

    #[test]
    fn concatenation_is_lossless_under_substring_nli() {
        let frags = ["In the beginning, pay.", "pay, then leave."];
        let doc = frags.join(" ");
        let s = fine(&doc, &frags, &RuleNli).unwrap();
        assert_eq!((s.omission, s.hallucination), (1.0, 1.0));
    }

    #[test]
    fn empty_document() {
        let s = fine("", &["pay."], &RuleNli).unwrap();
        assert_eq!((s.omission, s.hallucination), (0.0, 1.0));
    }

    #[test]
    fn three_fragment_hand_count() {
        // fragment 3 is missing from the document; sentence 2 is invented
        let frags = ["Pay the bill.", "Leave the shop.", "Close the door."];
        let doc = "Pay the bill. Sing a song. Leave the shop.";
        let s = fine(doc, &frags, &RuleNli).unwrap();
        assert!((s.omission - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.hallucination - 2.0 / 3.0).abs() < 1e-12);
    }

    fn four_actions() -> ProceduralGraph {
        ProceduralGraph::new(
            vec![
                Node::start("s", "x"),
                Node::action("a", "open the box", "x"),
                Node::action("b", "take the key", "x"),
                Node::action("c", "lock the door", "x"),
                Node::action("d", "leave", "x"),
                Node::end("e", "x"),
            ],
            vec![
                Edge::sequence("s", "a"),
                Edge::sequence("a", "b"),
                Edge::sequence("b", "c"),
                Edge::sequence("c", "d"),
                Edge::sequence("d", "e"),
            ],
        )
    }

    #[test]
    fn esa_counts_missing_action() {
        let g = four_actions();
        let doc = "Open the box, take the key and lock the door.";
        assert_eq!(esa(doc, &g, &NoEntities), 0.75);
        assert_eq!(esa("open the box take the key lock the door leave", &g, &NoEntities), 1.0);
    }

    #[test]
    fn esa_with_heuristic_entities() {
        // items: 4 actions + entities "box", "key", "door"
        let g = four_actions();
        assert_eq!(esa_items(&g, &HeuristicNer).len(), 7);
        let doc = "Open the box. Take the key. Then leave the door.";
        // covered: open the box, take the key, leave, box, key, door
        assert!((esa(doc, &g, &HeuristicNer) - 6.0 / 7.0).abs() < 1e-12);
    }
}
