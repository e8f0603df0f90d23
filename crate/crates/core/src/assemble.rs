//! Fragments → document: grouping, ordering, aggregation, smoothing.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backends::{ChatBackend, ChatMessage, ChatParams};
use crate::decompose::{decompose, filter_units, render_all, DecomposeError, Fragment, UnitKind};
use crate::graph::{NodeId, ProceduralGraph};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const SEP: &str = "<SEP>";

/// Probability that a boundary precedes `right`, given what came before it.
pub trait BoundaryScorer {
    fn score(&self, left: &[Fragment], right: &Fragment) -> f64;
}

/// A permutation of the given fragments, as indices.
pub trait OrderingScorer {
    fn order(&self, fragments: &[Fragment]) -> Vec<usize>;
}

/// Sub-procedure boundaries: a change of actor, or a gateway opening that
/// does not continue anything already in the group.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicBoundary;

impl BoundaryScorer for HeuristicBoundary {
    fn score(&self, left: &[Fragment], right: &Fragment) -> f64 {
        let Some(last) = left.last() else { return 0.0 };
        if last.actor != right.actor {
            return 1.0;
        }
        if right.kind.is_condition() || right.kind.is_parallel() {
            let Some(gw) = &right.lead else { return 0.0 };
            let continues = left.iter().any(|f| f.tails.contains(gw) || f.lead.as_ref() == Some(gw));
            return if continues { 0.0 } else { 1.0 };
        }
        0.0
    }
}

/// Sentence clusters: a condition fragment absorbs the one sequence fragment
/// that continues from its action.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicAggregation;

impl BoundaryScorer for HeuristicAggregation {
    fn score(&self, left: &[Fragment], right: &Fragment) -> f64 {
        match left {
            [only] if only.kind.is_condition() && right.kind == UnitKind::ActionToAction => {
                let joins = right.lead.as_ref().is_some_and(|l| only.tails.contains(l));
                if joins {
                    0.0
                } else {
                    1.0
                }
            }
            _ => 1.0,
        }
    }
}

/// Follows the flow: after a fragment, the fragments that continue from it
/// come next, before unrelated siblings. Ties keep input order, so an
/// ordered group is a fixpoint.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicOrdering;

fn precedes(p: &Fragment, f: &Fragment) -> bool {
    p.tails
        .iter()
        .any(|t| f.lead.as_ref() == Some(t) || f.entries.contains(t))
}

impl OrderingScorer for HeuristicOrdering {
    fn order(&self, fragments: &[Fragment]) -> Vec<usize> {
        let n = fragments.len();
        let preds: Vec<Vec<usize>> = (0..n)
            .map(|f| (0..n).filter(|&p| p != f && precedes(&fragments[p], &fragments[f])).collect())
            .collect();
        let mut placed = vec![false; n];
        let mut out: Vec<usize> = Vec::with_capacity(n);
        let ready = |i: usize, placed: &[bool]| !placed[i] && preds[i].iter().all(|&p| placed[p]);
        while out.len() < n {
            let follow = out
                .last()
                .and_then(|&last| (0..n).find(|&i| ready(i, &placed) && preds[i].contains(&last)));
            let next = follow
                .or_else(|| (0..n).find(|&i| ready(i, &placed)))
                .or_else(|| (0..n).find(|&i| !placed[i]))
                .expect("an unplaced fragment remains");
            placed[next] = true;
            out.push(next);
        }
        out
    }
}

fn split_by(fragments: Vec<Fragment>, scorer: &dyn BoundaryScorer, threshold: f64) -> Vec<Vec<Fragment>> {
    let mut out: Vec<Vec<Fragment>> = Vec::new();
    for f in fragments {
        match out.last_mut() {
            Some(cur) if scorer.score(cur, &f) <= threshold => cur.push(f),
            _ => out.push(vec![f]),
        }
    }
    out
}

/// Split into sub-procedures where the scorer exceeds `threshold`.
pub fn group(fragments: Vec<Fragment>, scorer: &dyn BoundaryScorer, threshold: f64) -> Vec<Vec<Fragment>> {
    let mut groups = split_by(fragments, scorer, threshold);
    for (g, frags) in groups.iter_mut().enumerate() {
        for f in frags {
            f.group = Some(g);
        }
    }
    groups
}

/// Reorder one group. A scorer answer that is not a permutation is ignored.
pub fn order(group: Vec<Fragment>, scorer: &dyn OrderingScorer) -> Vec<Fragment> {
    let perm = scorer.order(&group);
    let is_perm = perm.len() == group.len() && perm.iter().collect::<BTreeSet<_>>().len() == group.len()
        && perm.iter().all(|&i| i < group.len());
    let mut slots: Vec<Option<Fragment>> = group.into_iter().map(Some).collect();
    let order: Vec<usize> = if is_perm { perm } else { (0..slots.len()).collect() };
    order
        .into_iter()
        .enumerate()
        .map(|(pos, i)| {
            let mut f = slots[i].take().expect("permutation visits each index once");
            f.order_in_group = Some(pos);
            f
        })
        .collect()
}

/// Cluster an ordered group into sentences.
pub fn aggregate(group: Vec<Fragment>, scorer: &dyn BoundaryScorer, threshold: f64) -> Vec<Vec<Fragment>> {
    let mut clusters = split_by(group, scorer, threshold);
    for (c, frags) in clusters.iter_mut().enumerate() {
        for f in frags {
            f.sentence_cluster = Some(c);
        }
    }
    clusters
}

type ActorBlock<'d> = (Option<&'d str>, Vec<&'d Vec<Vec<Fragment>>>);

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentDraft {
    /// Groups of sentence clusters of fragments.
    pub groups: Vec<Vec<Vec<Fragment>>>,
    pub actor_prefixes: BTreeMap<String, String>,
}

impl DocumentDraft {
    pub fn fragments(&self) -> impl Iterator<Item = &Fragment> {
        self.groups.iter().flatten().flatten()
    }

    fn group_actor(group: &[Vec<Fragment>]) -> Option<&str> {
        group.iter().flatten().find_map(|f| f.actor.as_deref())
    }

    /// Contiguous runs of groups sharing an actor.
    fn actor_blocks(&self) -> Vec<ActorBlock<'_>> {
        let mut blocks: Vec<ActorBlock<'_>> = Vec::new();
        for g in &self.groups {
            let actor = Self::group_actor(g);
            match blocks.last_mut() {
                Some((a, gs)) if *a == actor => gs.push(g),
                _ => blocks.push((actor, vec![g])),
            }
        }
        blocks
    }

    fn prefix(&self, actor: Option<&str>) -> Option<&str> {
        actor.and_then(|a| self.actor_prefixes.get(a)).map(String::as_str)
    }
}

/// "For the customer:"; a leading article in the actor name is not doubled.
pub fn actor_prefix(actor: &str) -> String {
    let a = actor.trim();
    let bare = a
        .get(..4)
        .filter(|h| h.eq_ignore_ascii_case("the "))
        .map_or(a, |_| &a[4..]);
    format!("For the {}:", bare)
}

pub struct Assembler<'a> {
    pub boundary: &'a dyn BoundaryScorer,
    pub ordering: &'a dyn OrderingScorer,
    pub aggregation: &'a dyn BoundaryScorer,
    pub threshold: f64,
}

static HEURISTIC_BOUNDARY: HeuristicBoundary = HeuristicBoundary;
static HEURISTIC_ORDERING: HeuristicOrdering = HeuristicOrdering;
static HEURISTIC_AGGREGATION: HeuristicAggregation = HeuristicAggregation;

impl Default for Assembler<'static> {
    fn default() -> Self {
        Assembler {
            boundary: &HEURISTIC_BOUNDARY,
            ordering: &HEURISTIC_ORDERING,
            aggregation: &HEURISTIC_AGGREGATION,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl Assembler<'_> {
    pub fn draft(&self, fragments: Vec<Fragment>) -> DocumentDraft {
        let mut actor_prefixes = BTreeMap::new();
        for a in fragments.iter().filter_map(|f| f.actor.as_deref()) {
            actor_prefixes.entry(a.to_string()).or_insert_with(|| actor_prefix(a));
        }
        let groups = group(fragments, self.boundary, self.threshold)
            .into_iter()
            .map(|g| aggregate(order(g, self.ordering), self.aggregation, self.threshold))
            .collect();
        DocumentDraft { groups, actor_prefixes }
    }
}

/// One heading per actor block, one line per group.
pub fn identity_text(draft: &DocumentDraft) -> String {
    let mut blocks: Vec<String> = Vec::new();
    for (actor, groups) in draft.actor_blocks() {
        let mut lines: Vec<String> = Vec::new();
        if let Some(p) = draft.prefix(actor) {
            lines.push(p.to_string());
        }
        for g in groups {
            let text: Vec<&str> = g.iter().flatten().map(|f| f.text.as_str()).collect();
            lines.push(text.join(" "));
        }
        blocks.push(lines.join("\n"));
    }
    blocks.join("\n\n")
}

/// What the rephrasing model sees: clusters separated by `<SEP>`, each
/// actor block opened by its heading.
pub fn separated_text(draft: &DocumentDraft) -> String {
    let mut blocks: Vec<String> = Vec::new();
    for (actor, groups) in draft.actor_blocks() {
        let clusters: Vec<String> = groups
            .iter()
            .flat_map(|g| g.iter())
            .map(|c| c.iter().map(|f| f.text.as_str()).collect::<Vec<_>>().join(" "))
            .collect();
        let body = clusters.join(&format!(" {} ", SEP));
        blocks.push(match draft.prefix(actor) {
            Some(p) => format!("{} {}", p, body),
            None => body,
        });
    }
    blocks.join("\n")
}

pub enum Smoother<'a> {
    Identity,
    Chat {
        backend: &'a dyn ChatBackend,
        params: &'a ChatParams,
        /// Prompt with a `{fragments}` placeholder.
        template: &'a str,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Smoothed {
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn sentences(line: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        let boundary = matches!(b, b'.' | b'?' | b'!') && bytes.get(i + 1).is_none_or(|n| n.is_ascii_whitespace());
        if boundary {
            let s = line[start..=i].trim();
            if !s.is_empty() {
                out.push(s);
            }
            start = i + 1;
        }
    }
    let tail = line[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

/// Drop leftover separators and repeated sentences.
pub fn tidy(text: &str) -> String {
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut lines = Vec::new();
    for line in text.lines() {
        let clean = line.replace(SEP, " ");
        let collapsed: Vec<&str> = clean.split_whitespace().collect();
        let clean = collapsed.join(" ");
        let kept: Vec<&str> = sentences(&clean)
            .into_iter()
            .filter(|s| s.ends_with(':') || seen.insert(s.to_string()))
            .collect();
        lines.push(kept.join(" "));
    }
    let joined = lines.join("\n");
    joined.trim().to_string()
}

pub fn smooth(draft: &DocumentDraft, smoother: &Smoother<'_>) -> Smoothed {
    if draft.groups.is_empty() {
        return Smoothed::default();
    }
    match smoother {
        Smoother::Identity => Smoothed {
            text: identity_text(draft),
            warnings: Vec::new(),
        },
        Smoother::Chat { backend, params, template } => {
            let prompt = template.replace("{fragments}", &separated_text(draft));
            match backend.chat(&[ChatMessage::user(prompt)], params) {
                Ok(reply) if !reply.trim().is_empty() => Smoothed {
                    text: tidy(&reply),
                    warnings: Vec::new(),
                },
                Ok(_) => Smoothed {
                    text: identity_text(draft),
                    warnings: vec!["rephrase returned nothing; kept the template text".into()],
                },
                Err(e) => Smoothed {
                    text: identity_text(draft),
                    warnings: vec![format!("rephrase failed ({}); kept the template text", e)],
                },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generated {
    pub document: String,
    /// Fragment texts in document order.
    pub fragments: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// decompose → filter → group → order → aggregate → smooth.
pub fn generate(
    graph: &ProceduralGraph,
    assembler: &Assembler<'_>,
    smoother: &Smoother<'_>,
) -> Result<Generated, DecomposeError> {
    let units = filter_units(decompose(graph)?);
    let draft = assembler.draft(render_all(&units)?);
    let smoothed = smooth(&draft, smoother);
    Ok(Generated {
        document: smoothed.text,
        fragments: draft.fragments().map(|f| f.text.clone()).collect(),
        warnings: smoothed.warnings,
    })
}

/// Ids of every node the fragments mention, for coverage checks.
pub fn mentioned_ids(draft: &DocumentDraft) -> BTreeSet<NodeId> {
    draft.fragments().flat_map(|f| f.source_ids.iter().cloned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::BackendError;
    use crate::graph::{Edge, Node};

    fn chain() -> ProceduralGraph {
        let ids = ["a", "b", "c", "d", "e"];
        let mut nodes = vec![Node::start("s", "clerk")];
        nodes.extend(ids.iter().map(|i| Node::action(*i, format!("do {}", i), "clerk")));
        nodes.push(Node::end("z", "clerk"));
        let mut edges = vec![Edge::sequence("s", "a")];
        edges.extend(ids.windows(2).map(|w| Edge::sequence(w[0], w[1])));
        edges.push(Edge::sequence("e", "z"));
        ProceduralGraph::new(nodes, edges)
    }

    fn fragments(g: &ProceduralGraph) -> Vec<Fragment> {
        render_all(&filter_units(decompose(g).unwrap())).unwrap()
    }

    #[test]
    fn ordered_input_is_a_fixpoint() {
        let f = fragments(&chain());
        let once = order(f.clone(), &HeuristicOrdering);
        let twice = order(once.clone(), &HeuristicOrdering);
        let texts = |v: &[Fragment]| v.iter().map(|f| f.text.clone()).collect::<Vec<_>>();
        assert_eq!(texts(&once), texts(&f));
        assert_eq!(texts(&twice), texts(&once));
    }

    #[test]
    fn reversed_chain_is_restored() {
        let f = fragments(&chain());
        let mut rev = f.clone();
        rev.reverse();
        let back = order(rev, &HeuristicOrdering);
        let texts = |v: &[Fragment]| v.iter().map(|f| f.text.clone()).collect::<Vec<_>>();
        assert_eq!(texts(&back), texts(&f));
    }

    struct Never;
    impl BoundaryScorer for Never {
        fn score(&self, _: &[Fragment], _: &Fragment) -> f64 {
            0.0
        }
    }

    #[test]
    fn zero_scorer_makes_one_group() {
        let f = fragments(&chain());
        let n = f.len();
        let groups = group(f, &Never, DEFAULT_THRESHOLD);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].len(), n);
    }

    #[test]
    fn prefixes() {
        assert_eq!(actor_prefix("customer"), "For the customer:");
        assert_eq!(actor_prefix("The restaurant"), "For the restaurant:");
    }

    #[test]
    fn identity_document() {
        let g = chain();
        let out = generate(&g, &Assembler::default(), &Smoother::Identity).unwrap();
        assert!(out.document.starts_with("For the clerk:\nIn the beginning, do a. do a, then do b."));
        for f in &out.fragments {
            assert!(out.document.contains(f.as_str()));
        }
    }

    struct Down;
    impl ChatBackend for Down {
        fn chat(&self, _: &[ChatMessage], _: &ChatParams) -> Result<String, BackendError> {
            Err(BackendError::unavailable("chat", "connection refused"))
        }
    }

    struct Echo;
    impl ChatBackend for Echo {
        fn chat(&self, m: &[ChatMessage], _: &ChatParams) -> Result<String, BackendError> {
            Ok(m[0].content.clone())
        }
    }

    #[test]
    fn chat_smoothing() {
        let g = chain();
        let draft = Assembler::default().draft(fragments(&g));
        let params = ChatParams::default();
        let failed = smooth(&draft, &Smoother::Chat { backend: &Down, params: &params, template: "{fragments}" });
        assert_eq!(failed.text, identity_text(&draft));
        assert_eq!(failed.warnings.len(), 1);
        let echoed = smooth(&draft, &Smoother::Chat { backend: &Echo, params: &params, template: "{fragments}" });
        assert!(!echoed.text.contains(SEP));
        assert!(echoed.text.starts_with("For the clerk: In the beginning, do a."));
        assert!(smooth(&DocumentDraft::default(), &Smoother::Identity).text.is_empty());
    }

    #[test]
    fn tidy_drops_repeats() {
        assert_eq!(tidy("A b. <SEP> A b. C d."), "A b. C d.");
    }
}
