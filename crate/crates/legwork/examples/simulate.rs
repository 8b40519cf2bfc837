//! Steps the simulator by hand through a full assembly, driven by the
//! scripted controller, printing the world state as each skill terminates.
//!
//! Run: cargo run -p legwork --example simulate

use legwork::env::config::{RewardParams, TaskConfig};
use legwork::env::skill::{self, SkillId};
use legwork::env::Env;
use legwork::heuristic::{Heuristic, HeuristicConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let task = TaskConfig::square_table();
    let rp = RewardParams::default();
    let hcfg = HeuristicConfig::default();

    let (mut env, mut obs) = Env::reset(task, SkillId::Pick, 7);
    let mut heur = Heuristic::new(hcfg);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut skill = SkillId::Pick;

    println!("task: {} (theta_done {:.3} rad)", task.furniture.name(), task.theta_done);
    let s = env.state();
    println!(
        "start: ee ({:+.3}, {:+.3}, {:+.2}), leg ({:+.3}, {:+.3}), socket ({:+.3}, {:+.3})\n",
        s.ee.x, s.ee.y, s.ee.theta, s.leg.x, s.leg.y,
        s.table.x + task.socket_offset.x, s.table.y + task.socket_offset.y
    );

    'assembly: for phase in 0.. {
        heur.begin_skill();
        // The goal is fixed at skill entry, matching how demonstrations and
        // rollouts label rewards.
        let goal = skill::natural_goal(env.state(), skill, &task);
        let mut ret = 0.0;
        for step in 0..hcfg.max_steps_per_skill {
            let action = heur.act(env.state(), &obs, skill, &task, &mut rng);
            let out = env.step(&action, skill, &goal, &rp);
            obs = out.obs;
            ret += out.reward;
            if out.terminated {
                let s = &out.state;
                println!(
                    "phase {phase} {:<7} done in {:>3} steps  return {:+8.3}  ee ({:+.3}, {:+.3})  grasped {:<5} thread {:.3}",
                    skill.name(),
                    step + 1,
                    ret,
                    s.ee.x,
                    s.ee.y,
                    s.grasped.is_some(),
                    s.thread_angle
                );
                match skill::next_skill(&out.state, skill, &task) {
                    Some(next) => {
                        skill = next;
                        continue 'assembly;
                    }
                    None => {
                        println!("\nassembled: thread {:.3} >= {:.3}", s.thread_angle, task.theta_done);
                        break 'assembly;
                    }
                }
            }
        }
        println!("phase {phase} {} hit the step cap, giving up", skill.name());
        break;
    }
}
