//! Shows the dataset machinery on one collected trajectory: reward labeling,
//! the return-to-go recursion, and hindsight relabeling of a failed segment.
//!
//! Run: cargo run -p legwork --example relabel

use legwork::data::{augment, extract_segment, label_dataset, relabel};
use legwork::env::config::TaskConfig;
use legwork::heuristic::{collect_with, CollectOptions, HeuristicConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> legwork::Result<()> {
    let task = TaskConfig::square_table();
    let opts = CollectOptions {
        num_trajectories: 12,
        seed: 4,
        full_task_fraction: 1.0,
        randomize_speed: true,
    };
    let mut ds = collect_with(&task, &HeuristicConfig::default(), &opts)?;
    label_dataset(&mut ds);

    let traj = &ds.trajectories[0];
    println!("trajectory 0: {} steps, {} segments", traj.len(), traj.segments.len());
    for seg in &traj.segments {
        println!(
            "  {:<7} steps {:>3}..{:<3} entry rtg {:+8.3}",
            seg.skill.name(),
            seg.start,
            seg.end,
            traj.steps[seg.start].rtg
        );
    }

    // rtg[t] = reward[t] + rtg[t+1], rtg[last] = reward[last].
    let t = traj.len() / 2;
    let lhs = traj.steps[t].rtg;
    let rhs = traj.steps[t].reward + traj.steps[t + 1].rtg;
    println!("recursion at t={t}: {lhs:.6} vs {rhs:.6} (diff {:.1e})", (lhs - rhs).abs());

    // Hindsight relabel: the reached end state becomes the goal, so the same
    // motion reads as a success under the substituted rewards.
    let seg = extract_segment(traj, traj.segments.len() - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let re = relabel(&seg, &ds.task, &ds.reward, &mut rng)?;
    println!(
        "\nrelabeled final {} segment: entry rtg {:+.3} -> {:+.3}, relabeled flag {}",
        seg.segments[0].skill.name(),
        seg.steps[0].rtg,
        re.steps[0].rtg,
        re.relabeled
    );

    // augment() does this wholesale: one relabeled copy per skill segment.
    let before = ds.trajectories.len();
    let added = augment(&mut ds, 1, &mut rng)?;
    println!("augment added {added} relabeled segments ({before} -> {} trajectories)", ds.trajectories.len());
    Ok(())
}
