//! Trains a quick model, then rolls one episode with the learned controller
//! and one with the scripted controller from the same initial state, and
//! prints both phase sequences side by side.
//!
//! The learned controller queries the transition head at each skill
//! boundary and feeds its own return-to-go: starting from the checkpoint's
//! rtg_init, each executed step subtracts the online reward (floored at
//! zero).
//!
//! Run: cargo run -p legwork --release --example rollout

use legwork::env::config::TaskConfig;
use legwork::heuristic::{collect_with, CollectOptions, HeuristicConfig};
use legwork::model::featurize::BatchOptions;
use legwork::model::net::ModelConfig;
use legwork::rollout::{rollout, EpisodeRecord, HeuristicController, ModelController, RolloutConfig};
use legwork::train::{train, TrainConfig};

fn describe(tag: &str, rec: &EpisodeRecord) {
    println!(
        "{tag:<10} success {:<5} steps {:>3}  phases {} done / {} failed  return {:+.3}",
        rec.success, rec.steps, rec.completed_phases, rec.failed_phases, rec.raw_return
    );
    for seg in &rec.trajectory.segments {
        print!("  {}[{}]", seg.skill.name(), seg.end - seg.start);
    }
    println!();
    if !rec.rtg_trace.is_empty() {
        let head: Vec<String> =
            rec.rtg_trace.iter().take(6).map(|v| format!("{v:.2}")).collect();
        println!("  rtg trace: {} ...", head.join(" "));
    }
}

fn main() -> legwork::Result<()> {
    let task = TaskConfig::square_table();
    let opts = CollectOptions {
        num_trajectories: 120,
        seed: 5,
        full_task_fraction: 0.5,
        randomize_speed: true,
    };
    let ds = collect_with(&task, &HeuristicConfig::default(), &opts)?;
    println!("training...");
    let cfg = TrainConfig { iterations: 6, trajectories_per_iter: 96, ..TrainConfig::default() };
    let out = train(&ds, &cfg, ModelConfig::default(), BatchOptions::default())?;

    // Same env seed: both controllers face the identical initial state and
    // vision noise stream. Only the policy differs.
    let rc = RolloutConfig { env_seed: 42, policy_seed: 1, ..RolloutConfig::default() };

    let mut model_ctrl = ModelController::new(&out.checkpoint);
    let model_rec = rollout(&task, &ds.reward, &mut model_ctrl, &rc)?;

    let hcfg = HeuristicConfig::default();
    let mut heur_ctrl = HeuristicController::new(hcfg);
    let hrc = RolloutConfig {
        max_phases: legwork::heuristic::MAX_PHASES,
        per_skill_cap: hcfg.max_steps_per_skill,
        ..rc
    };
    let heur_rec = rollout(&task, &ds.reward, &mut heur_ctrl, &hrc)?;

    describe("model", &model_rec);
    describe("heuristic", &heur_rec);
    Ok(())
}
