//! Sweeps vision-noise levels and reports how the scripted baseline
//! degrades. Pass a checkpoint path to sweep a trained model instead (the
//! baseline is re-run at each level either way, on the same seeds).
//!
//! Run: cargo run -p legwork --release --example noise_sweep [model.bin]

use legwork::env::config::{RewardParams, TaskConfig};
use legwork::metrics::{evaluate_heuristic, noise_sweep, sweep_csv, EvalConfig, SWEEP_SIGMAS};
use legwork::model::checkpoint::Checkpoint;

fn main() -> legwork::Result<()> {
    let task = TaskConfig::square_table();
    let reward = RewardParams::default();
    let cfg = EvalConfig { n_episodes: 10, seed: 3, ..EvalConfig::default() };

    match std::env::args().nth(1) {
        Some(path) => {
            let ck = Checkpoint::load(std::path::Path::new(&path))?;
            let rows = noise_sweep(&task, &reward, &ck, &cfg, &SWEEP_SIGMAS)?;
            print!("{}", sweep_csv(&rows));
        }
        None => {
            println!("sigma_m,asr,as");
            for sigma in SWEEP_SIGMAS {
                let mut noisy = task;
                noisy.noise_sigma = sigma;
                let (report, _) = evaluate_heuristic(&noisy, &reward, &cfg)?;
                println!("{sigma},{},{}", report.asr, report.as_);
            }
        }
    }
    Ok(())
}
