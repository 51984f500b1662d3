//! Shared helpers for integration tests: the mini fixture and a scripted
//! model that answers translation prompts from reference translations.

#![allow(dead_code)]

use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use transbench::model::{NetworkError, Transport, TransportRequest, TransportResponse};
use transbench::orchestrator::{load_plan, ExperimentPlan};

pub fn mini_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini")
}

pub fn mini_plan() -> ExperimentPlan {
    load_plan(&mini_dir().join("plan.toml")).expect("mini plan loads")
}

/// Answers like a model would, deterministically:
/// IR requests get a short description that carries the snippet marker;
/// code requests get the reference translation in one of several
/// response shapes, and occasionally a broken program.
pub struct ScriptedModel {
    translations: PathBuf,
    pub requests: AtomicU64,
    /// Set once a request carried an API key.
    pub saw_key: AtomicBool,
}

impl ScriptedModel {
    pub fn new() -> Self {
        ScriptedModel {
            translations: mini_dir().join("translations"),
            requests: AtomicU64::new(0),
            saw_key: AtomicBool::new(false),
        }
    }

    pub fn answer(&self, prompt: &str) -> String {
        let marker = find_marker(prompt).expect("prompt carries a snippet marker");
        if prompt.contains("Do not write any code.") {
            return format!(
                "The program (snippet: {marker}) reads standard input and prints the result.\n"
            );
        }
        let fence = prompt
            .rsplit("starts with ```")
            .next()
            .and_then(|s| s.split_whitespace().next())
            .expect("prompt names the target fence");
        let (lang, ext) = match fence {
            "python" => ("python", "py"),
            "c" => ("c", "c"),
            other => panic!("scripted model has no {other} translations"),
        };
        let id = marker.split('/').nth(1).unwrap();
        let code = std::fs::read_to_string(self.translations.join(lang).join(format!("{id}.{ext}")))
            .expect("reference translation");
        let roll = Sha256::digest(prompt.as_bytes())[0] % 5;
        match roll {
            0 => {
                let broken = if lang == "python" {
                    format!("{code}print(0)\n")
                } else {
                    "int main(void) { return 3; }\n".to_string()
                };
                format!("```{fence}\n{broken}```\n")
            }
            1 => format!("Here is the translated program:\n```{fence}\n{code}```\nIt reads stdin.\n"),
            2 => format!("{code}End of Code\n"),
            _ => format!("```{fence}\n{code}```\n"),
        }
    }
}

fn find_marker(prompt: &str) -> Option<String> {
    let at = prompt.find("snippet: ")?;
    let rest = &prompt[at + "snippet: ".len()..];
    let end = rest
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '/' || c == '_'))
        .unwrap_or(rest.len());
    Some(rest[..end].to_string())
}

impl Transport for ScriptedModel {
    fn send(&self, request: &TransportRequest) -> Result<TransportResponse, NetworkError> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        if request.api_key.is_some() {
            self.saw_key.store(true, Ordering::SeqCst);
        }
        let prompt = request.body["messages"][0]["content"]
            .as_str()
            .expect("chat request");
        let body = serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": self.answer(prompt)}}],
            "usage": {"prompt_tokens": prompt.len() / 4, "completion_tokens": 64}
        });
        Ok(TransportResponse {
            status: 200,
            body: body.to_string(),
        })
    }
}

/// An empty results root.
pub fn fresh_results() -> tempfile::TempDir {
    tempfile::tempdir().expect("temp dir")
}
