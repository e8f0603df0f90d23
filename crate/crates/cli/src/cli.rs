//! Argument parsing and command dispatch.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use procgraph_core::assemble::{Assembler, Smoother};
use procgraph_core::backends::{
    ChatBackend, ChatParams, HeuristicPredicateObject, NliBackend, PredicateObjectBackend, RuleNli,
};
use procgraph_core::metrics::{render_table, MatchConfig};
use procgraph_core::refine::{RefineConfig, Verifiers};

use crate::fixtures::FixtureChat;
use crate::http::{HttpChatBackend, HttpNli, HttpPredicateObject, JsonClient, RetryPolicy, DEFAULT_IN_FLIGHT};
use crate::io::{read_jsonl, require_file, write_json, write_jsonl, DocumentRecord, Pair, Prediction};
use crate::pipeline::{evaluate_sets, extract_document, generate_pair, par_map, pool, validate_pair, ExtractSetup};
use crate::split::{split_ids, Ratio};
use crate::templates::{extract_template, feedback_templates, rephrase_template};
use crate::{CliError, Exit};

#[derive(Debug, Parser)]
#[command(name = "procgraph", version, about = "Procedural graph extraction and evaluation toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Worker threads; output order always follows input order.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, global = true, default_value = "gpt-3.5-turbo")]
    pub model: String,
    /// Environment variable that holds the bearer token for HTTP backends.
    #[arg(long, global = true, default_value = "PROCGRAPH_API_KEY")]
    pub api_key_env: String,
    #[arg(long, global = true, default_value_t = 4)]
    pub max_retries: u32,
    /// Per-request timeout in seconds.
    #[arg(long, global = true, default_value_t = 60)]
    pub timeout: u64,
    /// Concurrent requests per HTTP client.
    #[arg(long, global = true, default_value_t = DEFAULT_IN_FLIGHT)]
    pub in_flight: usize,
}

#[derive(Debug, Args)]
pub struct ChatSource {
    /// Base URL of an OpenAI-compatible server.
    #[arg(long, conflicts_with = "stub_fixtures")]
    pub chat_endpoint: Option<String>,
    /// Directory with chat.jsonl replay fixtures.
    #[arg(long)]
    pub stub_fixtures: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the graph of every pair; one JSON report per line on stdout.
    Validate { input: PathBuf },
    /// Turn graphs into documents.
    Generate {
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        /// Keep the template text (the default when no chat source is given).
        #[arg(long, conflicts_with_all = ["chat_endpoint", "stub_fixtures"])]
        identity_smooth: bool,
        #[command(flatten)]
        chat: ChatSource,
        #[arg(long)]
        rephrase_prompt: Option<PathBuf>,
    },
    /// Extract graphs from documents.
    Extract {
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[command(flatten)]
        chat: ChatSource,
        #[arg(long)]
        extract_prompt: Option<PathBuf>,
        /// Verify gateways and feed findings back to the model.
        #[arg(long)]
        refine: bool,
        #[arg(long, default_value_t = 3)]
        max_iters: usize,
        /// NLI service URL; the rule-based checker is used otherwise.
        #[arg(long)]
        nli_endpoint: Option<String>,
        /// Predicate/object parser URL; the heuristic parser is used otherwise.
        #[arg(long)]
        parser_endpoint: Option<String>,
        /// Directory holding the four feedback template files.
        #[arg(long)]
        feedback_templates: Option<PathBuf>,
    },
    /// Score predictions against gold pairs.
    Evaluate {
        gold: PathBuf,
        predictions: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        bleu_threshold: f64,
        /// Write per-pair and macro scores as JSON.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Shuffle pairs with a seed and cut them into train/validation/test.
    Split {
        input: PathBuf,
        #[arg(long, default_value = "3:1:2")]
        ratio: Ratio,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Parse arguments, run, and report. Never panics on bad input.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> Exit
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { Exit::Usage } else { Exit::Ok };
        }
    };
    match dispatch(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e);
            e.exit()
        }
    }
}

fn transport(common: &Common) -> Result<JsonClient, CliError> {
    let retry = RetryPolicy {
        max_retries: common.max_retries,
        per_try_timeout: Duration::from_secs(common.timeout.max(1)),
        ..RetryPolicy::default()
    };
    JsonClient::new(retry, common.api_key_env.clone(), common.in_flight).map_err(|e| CliError::Usage(e.to_string()))
}

fn chat_params(common: &Common, endpoint: Option<&str>) -> ChatParams {
    ChatParams {
        model: common.model.clone(),
        endpoint: endpoint.unwrap_or_default().to_string(),
        api_key_env: common.api_key_env.clone(),
        ..ChatParams::default()
    }
}

fn chat_backend(common: &Common, src: &ChatSource) -> Result<Option<Box<dyn ChatBackend>>, CliError> {
    if let Some(dir) = &src.stub_fixtures {
        return Ok(Some(Box::new(FixtureChat::load(dir)?)));
    }
    if src.chat_endpoint.is_some() {
        return Ok(Some(Box::new(HttpChatBackend { transport: transport(common)? })));
    }
    Ok(None)
}

/// Decode a JSONL file, reporting bad lines; returns rows and whether any
/// line failed.
fn load_rows<T: serde::de::DeserializeOwned>(path: &Path, err: &mut dyn Write) -> Result<(Vec<T>, bool), CliError> {
    require_file(path)?;
    let mut rows = Vec::new();
    let mut bad = false;
    for r in read_jsonl::<T>(path)? {
        match r {
            Ok(v) => rows.push(v),
            Err(e) => {
                bad = true;
                let _ = writeln!(err, "{}:{}: {}", path.display(), e.line, e.message);
            }
        }
    }
    Ok((rows, bad))
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<Exit, CliError> {
    let common = &cli.common;
    let workers = pool(common.jobs);
    match &cli.command {
        Command::Validate { input } => {
            require_file(input)?;
            let mut failed = false;
            let mut pairs = Vec::new();
            for r in read_jsonl::<Pair>(input)? {
                match r {
                    Ok(p) => pairs.push(p),
                    Err(e) => {
                        failed = true;
                        let line = serde_json::json!({"line": e.line, "error": e.message});
                        let _ = writeln!(out, "{}", line);
                    }
                }
            }
            for line in par_map(&workers, &pairs, validate_pair) {
                failed |= !line.report.ok;
                let _ = writeln!(out, "{}", serde_json::to_string(&line).map_err(|e| CliError::Json(e.to_string()))?);
            }
            Ok(if failed { Exit::Failed } else { Exit::Ok })
        }
        Command::Generate {
            input,
            output,
            identity_smooth: _,
            chat,
            rephrase_prompt,
        } => {
            let (pairs, bad) = load_rows::<Pair>(input, err)?;
            let template = rephrase_template(rephrase_prompt.as_deref())?;
            let backend = chat_backend(common, chat)?;
            let params = chat_params(common, chat.chat_endpoint.as_deref());
            let smoother = match &backend {
                Some(b) => Smoother::Chat {
                    backend: b.as_ref(),
                    params: &params,
                    template: &template,
                },
                None => Smoother::Identity,
            };
            let results = par_map(&workers, &pairs, |p| generate_pair(p, &Assembler::default(), &smoother));
            let mut rows = Vec::new();
            let mut failed = bad;
            for (p, r) in pairs.iter().zip(results) {
                match r {
                    Ok(rec) => {
                        for w in &rec.warnings {
                            warn!("{}: {}", rec.id, w);
                        }
                        rows.push(rec);
                    }
                    Err(e) => {
                        failed = true;
                        let _ = writeln!(err, "{}: {}", p.id, e);
                    }
                }
            }
            write_jsonl(output, &rows)?;
            info!("wrote {} documents to {}", rows.len(), output.display());
            Ok(if failed { Exit::Failed } else { Exit::Ok })
        }
        Command::Extract {
            input,
            output,
            chat,
            extract_prompt,
            refine,
            max_iters,
            nli_endpoint,
            parser_endpoint,
            feedback_templates: fb_dir,
        } => {
            let template = extract_template(extract_prompt.as_deref())?;
            let templates = feedback_templates(fb_dir.as_deref())?;
            let (docs, bad) = load_rows::<DocumentRecord>(input, err)?;
            let Some(backend) = chat_backend(common, chat)? else {
                return Err(CliError::Usage("extract needs --chat-endpoint or --stub-fixtures".into()));
            };
            let nli: Box<dyn NliBackend> = match nli_endpoint {
                Some(url) => Box::new(HttpNli {
                    transport: transport(common)?,
                    url: url.clone(),
                }),
                None => Box::new(RuleNli),
            };
            let parser: Box<dyn PredicateObjectBackend> = match parser_endpoint {
                Some(url) => Box::new(HttpPredicateObject {
                    transport: transport(common)?,
                    url: url.clone(),
                }),
                None => Box::new(HeuristicPredicateObject),
            };
            let setup = ExtractSetup {
                chat: backend.as_ref(),
                params: chat_params(common, chat.chat_endpoint.as_deref()),
                template: &template,
                refine: refine.then(|| {
                    (
                        Verifiers {
                            nli: nli.as_ref(),
                            parser: parser.as_ref(),
                            templates: &templates,
                        },
                        RefineConfig {
                            max_iters: *max_iters,
                            ..RefineConfig::default()
                        },
                    )
                }),
            };
            let results = par_map(&workers, &docs, |d| extract_document(d, &setup));
            let unavailable = results.iter().any(|r| r.unavailable);
            let errored = results.iter().any(|r| r.prediction.error.is_some());
            for r in results.iter().filter_map(|r| r.prediction.error.as_ref().map(|e| (&r.prediction.id, e))) {
                let _ = writeln!(err, "{}: {}", r.0, r.1);
            }
            let rows: Vec<Prediction> = results.into_iter().map(|r| r.prediction).collect();
            write_jsonl(output, &rows)?;
            Ok(if unavailable {
                Exit::Unavailable
            } else if bad || errored {
                Exit::Failed
            } else {
                Exit::Ok
            })
        }
        Command::Evaluate {
            gold,
            predictions,
            bleu_threshold,
            output,
        } => {
            let cfg = MatchConfig::with_threshold(*bleu_threshold).map_err(|e| CliError::Usage(e.to_string()))?;
            let (gold_rows, bad_gold) = load_rows::<Pair>(gold, err)?;
            let (pred_rows, bad_pred) = load_rows::<Prediction>(predictions, err)?;
            let result = evaluate_sets(&gold_rows, &pred_rows, &cfg, &workers);
            for w in &result.warnings {
                let _ = writeln!(err, "warning: {}", w);
            }
            if !result.missing.is_empty() {
                let _ = writeln!(err, "warning: no prediction for {}", result.missing.join(", "));
            }
            if !result.extra.is_empty() {
                let _ = writeln!(err, "warning: skipped unknown ids {}", result.extra.join(", "));
            }
            let name = predictions
                .file_stem()
                .map_or_else(|| "predictions".to_string(), |s| s.to_string_lossy().into_owned());
            let _ = write!(out, "{}", render_table(&[(name, result.macro_scores.clone())]));
            if let Some(path) = output {
                write_json(path, &result)?;
            }
            Ok(if bad_gold || bad_pred { Exit::Failed } else { Exit::Ok })
        }
        Command::Split {
            input,
            ratio,
            seed,
            out_dir,
        } => {
            let (pairs, bad) = load_rows::<serde_json::Value>(input, err)?;
            if bad {
                return Ok(Exit::Failed);
            }
            let ids: Vec<String> = pairs
                .iter()
                .enumerate()
                .map(|(i, v)| v.get("id").and_then(|x| x.as_str()).map_or_else(|| format!("#{}", i + 1), str::to_owned))
                .collect();
            let mut seen = std::collections::BTreeSet::new();
            if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
                return Err(CliError::Usage(format!("duplicate id {:?}", dup)));
            }
            let split = split_ids(&ids, *ratio, *seed);
            std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
            let index: std::collections::BTreeMap<&str, &serde_json::Value> =
                ids.iter().map(String::as_str).zip(&pairs).collect();
            for (name, part) in [("train", &split.train), ("validation", &split.validation), ("test", &split.test)] {
                let rows: Vec<&serde_json::Value> = part.iter().map(|id| index[id.as_str()]).collect();
                write_jsonl(&out_dir.join(format!("{}.jsonl", name)), &rows)?;
            }
            write_json(&out_dir.join("split.json"), &split)?;
            let _ = writeln!(
                out,
                "train {} / validation {} / test {}",
                split.train.len(),
                split.validation.len(),
                split.test.len()
            );
            Ok(Exit::Ok)
        }
    }
}
