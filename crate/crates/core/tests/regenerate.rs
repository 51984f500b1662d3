//! Rebuilds the shipped response cache of the mini fixture:
//! `cargo test --test regenerate -- --ignored`.

mod common;

use std::sync::Arc;
use transbench::model::Mode;
use transbench::orchestrator::{run_experiment, Engine, RunOptions};

#[test]
#[ignore]
fn regenerate_mini_cache() {
    let mut plan = common::mini_plan();
    let cache = plan.cache_dir.clone().unwrap();
    if cache.exists() {
        std::fs::remove_dir_all(&cache).unwrap();
    }
    plan.mode = Mode::Record;
    let model = Arc::new(common::ScriptedModel::new());
    let engine = Engine::from_plan(&plan, model.clone()).unwrap();
    let results = common::fresh_results();
    let summary = run_experiment(&plan, results.path(), &engine, &RunOptions::default()).unwrap();
    assert_eq!(summary.written, 60);
    assert_eq!(engine.client.call_count(), 84);
}
