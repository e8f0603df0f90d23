//! Replayed chat answers for offline runs.
//!
//! `<dir>/chat.jsonl` holds one `{"match": ..., "responses": [...]}` object
//! per line. The first entry whose `match` occurs in the first user message
//! answers; the n-th assistant turn of a conversation gets `responses[n]`.

use std::path::Path;

use procgraph_core::backends::{BackendError, ChatBackend, ChatMessage, ChatParams, Role};
use serde::{Deserialize, Serialize};

use crate::io::read_jsonl;
use crate::CliError;

pub const CHAT_FIXTURE_FILE: &str = "chat.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    #[serde(rename = "match")]
    pub needle: String,
    pub responses: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct FixtureChat {
    pub entries: Vec<FixtureEntry>,
}

impl FixtureChat {
    pub fn new(entries: Vec<FixtureEntry>) -> Self {
        FixtureChat { entries }
    }

    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(CHAT_FIXTURE_FILE);
        if !path.is_file() {
            return Err(CliError::Usage(format!("fixture file {} not found", path.display())));
        }
        let mut entries = Vec::new();
        for row in read_jsonl::<FixtureEntry>(&path)? {
            let row = row.map_err(|e| CliError::Usage(format!("{} line {}: {}", path.display(), e.line, e.message)))?;
            entries.push(row);
        }
        Ok(FixtureChat { entries })
    }
}

impl ChatBackend for FixtureChat {
    fn chat(&self, messages: &[ChatMessage], _params: &ChatParams) -> Result<String, BackendError> {
        let key = messages
            .iter()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let turn = messages.iter().filter(|m| m.role == Role::Assistant).count();
        let entry = self
            .entries
            .iter()
            .find(|e| key.contains(&e.needle))
            .ok_or_else(|| BackendError::FixtureMiss(key.chars().take(80).collect()))?;
        entry
            .responses
            .get(turn)
            .cloned()
            .ok_or_else(|| BackendError::FixtureMiss(format!("{:?} has no answer for turn {}", entry.needle, turn)))
    }
}
