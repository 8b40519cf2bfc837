//! Collects a small demonstration corpus with the scripted controller and
//! saves it to runs/example_collect/dataset.bin.
//!
//! Half the episodes run the whole task from Pick, the rest exercise single
//! skills from random mid-task states. Collection is deterministic in the
//! seed: the same call produces byte-identical files.
//!
//! Run: cargo run -p legwork --example collect

use legwork::data::Dataset;
use legwork::env::config::{RewardParams, TaskConfig};
use legwork::env::skill::{self, ALL_SKILLS};
use legwork::heuristic::{collect_with, CollectOptions, HeuristicConfig};

fn main() -> legwork::Result<()> {
    let task = TaskConfig::square_table();
    let opts = CollectOptions {
        num_trajectories: 40,
        seed: 11,
        full_task_fraction: 0.5,
        randomize_speed: true,
    };
    let ds = collect_with(&task, &HeuristicConfig::default(), &opts)?;

    let total_steps: usize = ds.trajectories.iter().map(|t| t.len()).sum();
    let successes = ds
        .trajectories
        .iter()
        .filter(|t| skill::success(&t.final_state, &task))
        .count();
    let truncated = ds.trajectories.iter().filter(|t| t.truncated).count();
    println!(
        "{} trajectories, {} steps, {} full-task successes, {} truncated",
        ds.trajectories.len(),
        total_steps,
        successes,
        truncated
    );

    let mut per_skill = [0usize; ALL_SKILLS.len()];
    for traj in &ds.trajectories {
        for s in &traj.steps {
            per_skill[s.skill.index()] += 1;
        }
    }
    for (skill, n) in ALL_SKILLS.iter().zip(per_skill) {
        println!("  {:<7} {:>6} steps", skill.name(), n);
    }

    let dir = std::path::Path::new("runs/example_collect");
    std::fs::create_dir_all(dir).expect("create output dir");
    let path = dir.join("dataset.bin");
    ds.save(&path)?;

    // Task geometry and reward params travel inside the file, so training
    // needs nothing beyond the dataset path.
    let back = Dataset::load(&path)?;
    assert_eq!(back.trajectories.len(), ds.trajectories.len());
    assert_eq!(back.reward, RewardParams::default());
    println!("saved and re-read {}", path.display());
    Ok(())
}
