//! Prompt templates: built-in defaults or files given on the command line.

use std::path::Path;

use procgraph_core::refine::{FeedbackKind, FeedbackTemplates};

use crate::io::read_text;
use crate::CliError;

pub const EXTRACT_TEMPLATE: &str = include_str!("../templates/extract.txt");
pub const REPHRASE_TEMPLATE: &str = include_str!("../templates/rephrase.txt");

pub const DOCUMENT_SLOT: &str = "{document}";
pub const FRAGMENTS_SLOT: &str = "{fragments}";

fn load(path: Option<&Path>, default: &str, slot: &str) -> Result<String, CliError> {
    let text = match path {
        Some(p) => read_text(p).map_err(|_| CliError::Usage(format!("cannot read template {}", p.display())))?,
        None => default.to_string(),
    };
    if !text.contains(slot) {
        return Err(CliError::Usage(format!("template lacks the {} placeholder", slot)));
    }
    Ok(text)
}

pub fn extract_template(path: Option<&Path>) -> Result<String, CliError> {
    load(path, EXTRACT_TEMPLATE, DOCUMENT_SLOT)
}

pub fn rephrase_template(path: Option<&Path>) -> Result<String, CliError> {
    load(path, REPHRASE_TEMPLATE, FRAGMENTS_SLOT)
}

pub fn extract_prompt(template: &str, document: &str) -> String {
    template.replacen(DOCUMENT_SLOT, document, 1)
}

/// Feedback templates from `<dir>/<stem>.txt`, all four required.
pub fn feedback_templates(dir: Option<&Path>) -> Result<FeedbackTemplates, CliError> {
    let mut t = FeedbackTemplates::default();
    let Some(dir) = dir else {
        return Ok(t);
    };
    for kind in FeedbackKind::ALL {
        let p = dir.join(format!("{}.txt", kind.file_stem()));
        let text = read_text(&p).map_err(|_| CliError::Usage(format!("missing feedback template {}", p.display())))?;
        t.set(kind, text);
    }
    Ok(t)
}

/// The dot lines of a model answer: whatever follows the last `Graph:`
/// line, or the whole answer when there is none.
pub fn graph_section(answer: &str) -> &str {
    let mut start = 0;
    let mut pos = 0;
    for line in answer.split_inclusive('\n') {
        pos += line.len();
        if line.trim().eq_ignore_ascii_case("graph:") {
            start = pos;
        }
    }
    &answer[start..]
}
