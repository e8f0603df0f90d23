//! Per-pair work behind each command.

use std::collections::{BTreeMap, BTreeSet};

use procgraph_core::assemble::{generate, Assembler, Smoother};
use procgraph_core::backends::{ChatBackend, ChatExtractor, ChatMessage, ChatParams};
use procgraph_core::dotlang::parse;
use procgraph_core::graph::{validate, ValidationReport};
use procgraph_core::metrics::{evaluate, macro_average, EvalReport, MacroScore, MatchConfig};
use procgraph_core::refine::{refine_loop, RefineConfig, RefineError, Verifiers};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use crate::io::{DocumentRecord, GeneratedRecord, PairReport, Pair, Prediction};
use crate::templates::{extract_prompt, graph_section};

/// Map in parallel, keeping input order.
pub fn par_map<T: Sync, U: Send>(pool: &ThreadPool, items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    pool.install(|| items.par_iter().map(&f).collect())
}

pub fn pool(jobs: usize) -> ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationLine {
    pub id: String,
    #[serde(flatten)]
    pub report: ValidationReport,
}

pub fn validate_pair(pair: &Pair) -> ValidationLine {
    ValidationLine {
        id: pair.id.clone(),
        report: validate(&pair.graph),
    }
}

pub fn generate_pair(pair: &Pair, assembler: &Assembler<'_>, smoother: &Smoother<'_>) -> Result<GeneratedRecord, String> {
    let g = generate(&pair.graph, assembler, smoother).map_err(|e| e.to_string())?;
    Ok(GeneratedRecord {
        id: pair.id.clone(),
        document: g.document,
        fragments: g.fragments,
        warnings: g.warnings,
    })
}

pub struct ExtractSetup<'a> {
    pub chat: &'a dyn ChatBackend,
    pub params: ChatParams,
    pub template: &'a str,
    /// Present when self-refinement is on.
    pub refine: Option<(Verifiers<'a>, RefineConfig)>,
}

/// Outcome of one extraction; `unavailable` marks a backend failure.
#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub prediction: Prediction,
    pub unavailable: bool,
}

fn failed(id: &str, e: impl ToString) -> Extracted {
    Extracted {
        prediction: Prediction {
            id: id.to_string(),
            dotlang: None,
            graph: None,
            trace: None,
            error: Some(e.to_string()),
        },
        unavailable: true,
    }
}

pub fn extract_document(doc: &DocumentRecord, setup: &ExtractSetup<'_>) -> Extracted {
    let conversation = vec![ChatMessage::user(extract_prompt(setup.template, &doc.document))];
    match &setup.refine {
        None => match setup.chat.chat(&conversation, &setup.params) {
            Ok(answer) => Extracted {
                prediction: Prediction {
                    id: doc.id.clone(),
                    dotlang: Some(graph_section(&answer).trim().to_string()),
                    graph: None,
                    trace: None,
                    error: None,
                },
                unavailable: false,
            },
            Err(e) => failed(&doc.id, e),
        },
        Some((verifiers, cfg)) => {
            let mut system1 = ChatExtractor {
                backend: setup.chat,
                params: setup.params.clone(),
            };
            match refine_loop(conversation, &mut system1, verifiers, cfg) {
                Ok((_, trace)) => {
                    let last = trace.iterations.last().map(|i| i.response.as_str()).unwrap_or("");
                    Extracted {
                        prediction: Prediction {
                            id: doc.id.clone(),
                            dotlang: Some(graph_section(last).trim().to_string()),
                            graph: None,
                            trace: Some(trace),
                            error: None,
                        },
                        unavailable: false,
                    }
                }
                Err(e @ (RefineError::Extractor(_) | RefineError::NliUnavailable(_))) => failed(&doc.id, e),
                Err(e) => Extracted {
                    unavailable: false,
                    ..failed(&doc.id, e)
                },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationOutput {
    pub pairs: Vec<PairReport>,
    #[serde(rename = "macro")]
    pub macro_scores: Vec<MacroScore>,
    /// Gold ids without a prediction; scored against an empty graph.
    pub missing: Vec<String>,
    /// Prediction ids absent from gold; skipped.
    pub extra: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn score_prediction(gold: &Pair, pred: Option<&Prediction>, cfg: &MatchConfig) -> EvalReport {
    let Some(pred) = pred else {
        return EvalReport::unparseable(&gold.graph, "no prediction");
    };
    let graph = match (&pred.graph, &pred.dotlang) {
        (Some(g), _) => g.clone(),
        (None, Some(text)) => {
            let out = parse(text);
            if out.graph.edges.is_empty() && !gold.graph.edges.is_empty() {
                return EvalReport::unparseable(&gold.graph, "prediction has no readable flows");
            }
            let mut r = evaluate(&out.graph, &gold.graph, cfg);
            if !out.errors.is_empty() {
                r.notes.push(format!("{} unreadable line(s) skipped", out.errors.len()));
            }
            return r;
        }
        (None, None) => {
            let why = pred.error.clone().unwrap_or_else(|| "empty prediction".into());
            return EvalReport::unparseable(&gold.graph, why);
        }
    };
    evaluate(&graph, &gold.graph, cfg)
}

pub fn evaluate_sets(gold: &[Pair], preds: &[Prediction], cfg: &MatchConfig, pool: &ThreadPool) -> EvaluationOutput {
    let by_id: BTreeMap<&str, &Prediction> = preds.iter().map(|p| (p.id.as_str(), p)).collect();
    let gold_ids: BTreeSet<&str> = gold.iter().map(|p| p.id.as_str()).collect();
    let mut warnings = Vec::new();
    if preds.is_empty() {
        warnings.push("predictions file is empty; every pair scores zero".to_string());
    }
    let missing: Vec<String> = gold
        .iter()
        .filter(|p| !by_id.contains_key(p.id.as_str()))
        .map(|p| p.id.clone())
        .collect();
    let extra: Vec<String> = preds
        .iter()
        .filter(|p| !gold_ids.contains(p.id.as_str()))
        .map(|p| p.id.clone())
        .collect();
    let reports = par_map(pool, gold, |g| PairReport {
        id: g.id.clone(),
        report: score_prediction(g, by_id.get(g.id.as_str()).copied(), cfg),
    });
    let plain: Vec<EvalReport> = reports.iter().map(|r| r.report.clone()).collect();
    EvaluationOutput {
        macro_scores: macro_average(&plain),
        pairs: reports,
        missing,
        extra,
        warnings,
    }
}
