//! Transcript persistence: line-delimited records, one entry per line, so
//! recordings can be appended to while a run is live and diffed in review.

use super::{GatewayError, ModelResponse};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const TRANSCRIPT_FORMAT_VERSION: u32 = 1;

/// One recorded exchange: the request's fingerprint and the response it
/// produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub fingerprint: String,
    pub model_id: String,
    pub response: ModelResponse,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum TranscriptLine {
    Meta {
        format_version: u32,
        created_at: String,
    },
    Entry(TranscriptEntry),
}

/// The serialized request/response stream of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transcript {
    pub created_at: String,
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn new(created_at: impl Into<String>) -> Self {
        Transcript {
            created_at: created_at.into(),
            entries: Vec::new(),
        }
    }

    /// Model ids seen in the transcript, unique, in first-seen order.
    pub fn model_ids(&self) -> Vec<String> {
        let mut ids = Vec::new();
        for entry in &self.entries {
            if !ids.contains(&entry.model_id) {
                ids.push(entry.model_id.clone());
            }
        }
        ids
    }

    pub fn meta_line(created_at: &str) -> String {
        serde_json::to_string(&TranscriptLine::Meta {
            format_version: TRANSCRIPT_FORMAT_VERSION,
            created_at: created_at.to_string(),
        })
        .expect("meta line serializes")
    }

    pub fn entry_line(entry: &TranscriptEntry) -> String {
        serde_json::to_string(&TranscriptLine::Entry(entry.clone())).expect("entry serializes")
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = Self::meta_line(&self.created_at);
        out.push('\n');
        for entry in &self.entries {
            out.push_str(&Self::entry_line(entry));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, GatewayError> {
        let mut transcript = Transcript::default();
        let mut saw_meta = false;
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: TranscriptLine = serde_json::from_str(line).map_err(|e| {
                GatewayError::Transcript(format!("line {}: {e}", idx + 1))
            })?;
            match parsed {
                TranscriptLine::Meta {
                    format_version,
                    created_at,
                } => {
                    if format_version != TRANSCRIPT_FORMAT_VERSION {
                        return Err(GatewayError::Transcript(format!(
                            "unsupported transcript format version {format_version} (expected {TRANSCRIPT_FORMAT_VERSION})"
                        )));
                    }
                    transcript.created_at = created_at;
                    saw_meta = true;
                }
                TranscriptLine::Entry(entry) => transcript.entries.push(entry),
            }
        }
        if !saw_meta {
            return Err(GatewayError::Transcript(
                "transcript has no meta line".to_string(),
            ));
        }
        Ok(transcript)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            GatewayError::Transcript(format!("{}: {e}", path.as_ref().display()))
        })?;
        Self::from_jsonl(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GatewayError> {
        std::fs::write(path.as_ref(), self.to_jsonl()).map_err(|e| {
            GatewayError::Transcript(format!("{}: {e}", path.as_ref().display()))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::{ChatMessage, Usage};
    use super::*;

    fn entry(model: &str, text: &str) -> TranscriptEntry {
        TranscriptEntry {
            fingerprint: format!("fp-{text}"),
            model_id: model.to_string(),
            response: ModelResponse {
                message: ChatMessage::assistant(text),
                usage: Usage::default(),
            },
        }
    }

    #[test]
    fn jsonl_roundtrip() {
        let mut transcript = Transcript::new("2025-11-03T00:00:00Z");
        transcript.entries.push(entry("verifier", "a"));
        transcript.entries.push(entry("expert", "b"));
        let text = transcript.to_jsonl();
        assert_eq!(text.lines().count(), 3);
        let parsed = Transcript::from_jsonl(&text).unwrap();
        assert_eq!(parsed, transcript);
        assert_eq!(parsed.model_ids(), vec!["verifier", "expert"]);
    }

    #[test]
    fn missing_meta_is_an_error() {
        let line = Transcript::entry_line(&entry("m", "x"));
        let err = Transcript::from_jsonl(&line).unwrap_err();
        assert!(err.to_string().contains("meta"));
    }

    #[test]
    fn malformed_line_is_cited_by_number() {
        let mut text = Transcript::meta_line("t");
        text.push_str("\n{broken\n");
        let err = Transcript::from_jsonl(&text).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn future_format_version_is_refused() {
        let text = r#"{"type":"meta","format_version":99,"created_at":"t"}"#;
        let err = Transcript::from_jsonl(text).unwrap_err();
        assert!(err.to_string().contains("99"));
    }
}
