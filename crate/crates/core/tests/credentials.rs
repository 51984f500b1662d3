//! The API credential is read from the environment at call time and must
//! never reach the cache, the plan file or the records.

mod common;

use std::fs;
use std::path::Path;
use std::sync::atomic::Ordering;
use std::sync::Arc;
use transbench::model::Mode;
use transbench::orchestrator::{run_experiment, Engine, RunOptions};

const SECRET: &str = "sk-test-5f1d2c9e-do-not-store";

fn files_containing(root: &Path, needle: &str) -> Vec<String> {
    let mut hits = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if fs::read_to_string(&path).is_ok_and(|t| t.contains(needle)) {
                hits.push(path.display().to_string());
            }
        }
    }
    hits
}

#[test]
fn record_mode_never_persists_the_key() {
    let key_env = "TRANSBENCH_CREDENTIAL_TEST_KEY";
    std::env::set_var(key_env, SECRET);
    let work = tempfile::tempdir().unwrap();
    let mut plan = common::mini_plan();
    plan.mode = Mode::Record;
    plan.cache_dir = Some(work.path().join("cache"));
    plan.strategies = vec!["0SP".parse().unwrap(), "2S-NL".parse().unwrap()];
    plan.models[0].api_key_env = key_env.into();
    let model = Arc::new(common::ScriptedModel::new());
    let engine = Engine::from_plan(&plan, model.clone()).unwrap();
    let results = work.path().join("runs");
    let summary = run_experiment(&plan, &results, &engine, &RunOptions::default()).unwrap();
    assert_eq!(summary.written, 12);
    assert!(model.saw_key.load(Ordering::SeqCst), "key was sent to the provider");
    assert!(files_containing(work.path(), SECRET).is_empty());
    assert!(!files_containing(work.path(), key_env).is_empty(), "env var name is recorded");
}
