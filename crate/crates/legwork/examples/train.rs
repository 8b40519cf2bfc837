//! Trains a small model on a freshly collected corpus and saves the
//! checkpoint to runs/example_train/model.bin. Use --release; the debug
//! build is an order of magnitude slower.
//!
//! Run: cargo run -p legwork --release --example train

use legwork::env::config::TaskConfig;
use legwork::heuristic::{collect_with, CollectOptions, HeuristicConfig};
use legwork::model::featurize::BatchOptions;
use legwork::model::net::ModelConfig;
use legwork::train::{train, TrainConfig};

fn main() -> legwork::Result<()> {
    let task = TaskConfig::square_table();
    let opts = CollectOptions {
        num_trajectories: 120,
        seed: 5,
        full_task_fraction: 0.5,
        randomize_speed: true,
    };
    println!("collecting {} trajectories...", opts.num_trajectories);
    let ds = collect_with(&task, &HeuristicConfig::default(), &opts)?;

    let cfg = TrainConfig {
        iterations: 4,
        trajectories_per_iter: 96,
        ..TrainConfig::default()
    };
    println!(
        "training {} iterations of {} trajectories each (batch {}, horizon {})",
        cfg.iterations, cfg.trajectories_per_iter, cfg.batch_size, cfg.horizon
    );

    let out = train(&ds, &cfg, ModelConfig::default(), BatchOptions::default())?;
    println!("\niter   l_stm    l_tepo   stm_acc  action_mse");
    for it in &out.log.iterations {
        println!(
            "{:>4}  {:>7.4}  {:>7.3}  {:>7}  {:>9}",
            it.iteration,
            it.l_stm,
            it.l_tepo,
            it.stm_accuracy.map_or("-".into(), |v| format!("{v:.3}")),
            it.action_mse.map_or("-".into(), |v| format!("{v:.5}")),
        );
    }

    let dir = std::path::Path::new("runs/example_train");
    std::fs::create_dir_all(dir).expect("create output dir");
    let path = dir.join("model.bin");
    out.checkpoint.save(&path)?;
    println!(
        "\nsaved {} (rtg_init {:.3}, {} holdout trajectories)",
        path.display(),
        out.checkpoint.rtg_init,
        out.holdout_indices.len()
    );
    Ok(())
}
