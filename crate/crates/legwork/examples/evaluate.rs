//! Evaluates the scripted baseline over paired-seed episodes and prints the
//! metrics row. Pass a checkpoint path to also evaluate a trained model
//! against that same baseline (same environment seeds, so returns are
//! directly comparable).
//!
//! Run: cargo run -p legwork --release --example evaluate [model.bin]

use legwork::env::config::{RewardParams, TaskConfig};
use legwork::metrics::{evaluate, evaluate_heuristic, EvalConfig, MetricsReport};
use legwork::model::checkpoint::Checkpoint;

fn print_report(tag: &str, r: &MetricsReport) {
    println!(
        "{tag:<10} AR {:>6.3}  ASR {:>5.2}  AS {:>6.2}  ({} episodes)",
        r.ar, r.asr, r.as_, r.n_episodes
    );
}

fn main() -> legwork::Result<()> {
    let task = TaskConfig::square_table();
    let reward = RewardParams::default();
    let cfg = EvalConfig { n_episodes: 10, seed: 2, ..EvalConfig::default() };

    let (report, records) = evaluate_heuristic(&task, &reward, &cfg)?;
    print_report("heuristic", &report);
    // AR normalizes by the baseline's own mean return, so the baseline
    // scores exactly 1.0 whenever any episode earns reward.
    println!("  per-skill mean steps: {:?}", report.per_skill_steps.map(|v| (v * 10.0).round() / 10.0));
    println!("  successes: {}/{}", records.iter().filter(|r| r.success).count(), records.len());

    if let Some(path) = std::env::args().nth(1) {
        let ck = Checkpoint::load(std::path::Path::new(&path))?;
        let ev = evaluate(&task, &reward, &ck, &cfg)?;
        print_report("model", &ev.model);
        println!("  csv: {}", MetricsReport::csv_header());
        println!("       {}", ev.model.csv_row());
    } else {
        println!("\n(pass a checkpoint path to evaluate a trained model, e.g.");
        println!(" cargo run -p legwork --release --example train && \\");
        println!(" cargo run -p legwork --release --example evaluate runs/example_train/model.bin)");
    }
    Ok(())
}
