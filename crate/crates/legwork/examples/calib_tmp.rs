//! Temporary calibration probe. Not part of the deliverable.

use std::time::Instant;

use legwork::env::config::{RewardParams, TaskConfig};
use legwork::heuristic::{collect_with, CollectOptions, HeuristicConfig};
use legwork::metrics::{
    ablation_suite, evaluate, generalization_eval, noise_sweep, sweep_csv, EvalConfig,
    SWEEP_SIGMAS,
};
use legwork::model::featurize::BatchOptions;
use legwork::model::net::ModelConfig;
use legwork::train::{holdout_eval, train, TrainConfig};

fn main() -> legwork::Result<()> {
    let t0 = Instant::now();
    let task = TaskConfig::square_table();
    let opts = CollectOptions {
        num_trajectories: 2000,
        seed: 0,
        full_task_fraction: 0.5,
        randomize_speed: true,
    };
    let ds = collect_with(&task, &HeuristicConfig::default(), &opts)?;
    let steps: usize = ds.trajectories.iter().map(|t| t.len()).sum();
    println!("collect: {} trajs {} steps in {:.1}s", ds.trajectories.len(), steps, t0.elapsed().as_secs_f64());

    let t1 = Instant::now();
    let cfg = TrainConfig::default();
    let out = train(&ds, &cfg, ModelConfig::default(), BatchOptions::default())?;
    println!("train: {:.1}s", t1.elapsed().as_secs_f64());
    for it in &out.log.iterations {
        println!(
            "  iter {:>2} l_stm {:.4} l_tepo {:+.3} acc {:?} mse {:?}",
            it.iteration, it.l_stm, it.l_tepo, it.stm_accuracy, it.action_mse
        );
    }

    // Criterion 7 analog: full holdout eval.
    let mut labeled = ds.clone();
    legwork::data::label_dataset(&mut labeled);
    let holdout = legwork::data::Dataset {
        task: labeled.task,
        reward: labeled.reward,
        trajectories: out
            .holdout_indices
            .iter()
            .map(|&i| labeled.trajectories[i].clone())
            .collect(),
    };
    let t2 = Instant::now();
    let rep = holdout_eval(&out.checkpoint, &holdout)?;
    println!(
        "holdout: acc {:?} over {} boundaries, mse {:.5} ({:.1}s)",
        rep.stm_accuracy, rep.n_boundaries, rep.action_mse, t2.elapsed().as_secs_f64()
    );

    // Criterion 8.
    let t3 = Instant::now();
    let reward = RewardParams::default();
    let ecfg = EvalConfig { n_episodes: 10, seed: 0, ..EvalConfig::default() };
    let ev = evaluate(&task, &reward, &out.checkpoint, &ecfg)?;
    println!(
        "eval ({:.1}s): model ASR {} AS {:.2} AR {:.3} | heur ASR {} AS {:.2}",
        t3.elapsed().as_secs_f64(),
        ev.model.asr,
        ev.model.as_,
        ev.model.ar,
        ev.heuristic.asr,
        ev.heuristic.as_
    );

    // Criterion 10.
    let t4 = Instant::now();
    let trained = legwork::metrics::dataset_skill_set(&ds);
    let gen = generalization_eval(&TaskConfig::stool(), &reward, &out.checkpoint, &ecfg, &trained)?;
    println!(
        "stool ({:.1}s): ASR {} (table {}), subset_ok {}",
        t4.elapsed().as_secs_f64(),
        gen.evaluation.model.asr,
        ev.model.asr,
        gen.subset_ok
    );

    // Criterion 11.
    let t5 = Instant::now();
    let rows = noise_sweep(&task, &reward, &out.checkpoint, &ecfg, &SWEEP_SIGMAS)?;
    println!("sweep ({:.1}s):\n{}", t5.elapsed().as_secs_f64(), sweep_csv(&rows));

    // Criterion 9.
    let t6 = Instant::now();
    let abl = ablation_suite(&ds, &cfg, ModelConfig::default(), &ecfg);
    println!("ablations ({:.1}s):", t6.elapsed().as_secs_f64());
    for row in &abl {
        match &row.outcome {
            Ok(e) => println!("  {:<10} ASR {} AS {:.2} AR {:.3}", row.variant, e.model.asr, e.model.as_, e.model.ar),
            Err(e) => println!("  {:<10} failed: {e}", row.variant),
        }
    }
    println!("total {:.1}s", t0.elapsed().as_secs_f64());
    Ok(())
}
