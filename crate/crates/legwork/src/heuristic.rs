//! Scripted goal-reaching policies, the tactile safety check, and the
//! demonstration collector.
//!
//! The policy is a small finite-state machine per skill. It drives on vision
//! estimates, never on true poses, so its demonstrations inherit the sensor
//! noise. Waypoints carry a held perturbation that is resampled every
//! `replan_interval` steps: near tight tolerances this makes the scripted
//! policy hunt around the target, which is exactly the inefficiency a learned
//! policy should average away.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{label_dataset, Dataset, Segment, Step, Trajectory};
use crate::env::{
    skill, Action, Env, GripperCmd, Observation, RewardParams, SkillId, TaskConfig, WorldState,
};
use crate::error::Error;
use crate::pose::ang_diff;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct HeuristicConfig {
    /// Std of the held waypoint perturbation, meters.
    pub waypoint_noise: f64,
    /// Proportional gain toward the waypoint, in (0, 1].
    pub action_gain: f64,
    /// Fraction of the per-step motion caps the policy will use, in (0, 1].
    /// Must stay above the thread-engagement fraction or screwing stalls.
    pub speed_cap: f64,
    /// Steps between waypoint re-perturbations.
    pub replan_interval: usize,
    /// Truncation limit per skill phase.
    pub max_steps_per_skill: usize,
    /// Slip-flow level treated as a safety violation.
    pub slip_threshold: f64,
    /// Estimated gripper-to-shaft distance at which a grasp is attempted.
    pub close_threshold: f64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            waypoint_noise: 0.0075,
            action_gain: 0.4,
            speed_cap: 0.35,
            replan_interval: 7,
            max_steps_per_skill: 100,
            slip_threshold: 0.35,
            close_threshold: 0.006,
        }
    }
}

impl HeuristicConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |b: bool, msg: &str| {
            if b {
                Ok(())
            } else {
                Err(Error::Config(msg.to_string()))
            }
        };
        ok(self.waypoint_noise >= 0.0, "waypoint_noise must be >= 0")?;
        ok(self.action_gain > 0.0 && self.action_gain <= 1.0, "action_gain must be in (0, 1]")?;
        ok(self.speed_cap > 0.0 && self.speed_cap <= 1.0, "speed_cap must be in (0, 1]")?;
        ok(self.replan_interval >= 1, "replan_interval must be >= 1")?;
        ok(self.max_steps_per_skill >= 1, "max_steps_per_skill must be >= 1")?;
        ok(self.slip_threshold > 0.0, "slip_threshold must be > 0")?;
        ok(self.close_threshold > 0.0, "close_threshold must be > 0")?;
        Ok(())
    }
}

/// True when the tactile stream reports slip beyond the configured level
/// (strictly; the boundary itself is tolerated).
pub fn safety_violation(obs: &Observation, cfg: &HeuristicConfig) -> bool {
    obs.tactile.slip_flow > cfg.slip_threshold
}

/// Per-skill FSM with working memory (held waypoint bias and its age).
#[derive(Debug, Clone)]
pub struct Heuristic {
    pub cfg: HeuristicConfig,
    bias: (f64, f64),
    since_replan: usize,
}

impl Heuristic {
    pub fn new(cfg: HeuristicConfig) -> Self {
        Heuristic { cfg, bias: (0.0, 0.0), since_replan: usize::MAX }
    }

    /// Clears per-phase memory; call when a new skill phase starts.
    pub fn begin_skill(&mut self) {
        self.bias = (0.0, 0.0);
        self.since_replan = usize::MAX;
    }

    fn refresh_bias(&mut self, rng: &mut ChaCha8Rng) {
        if self.since_replan >= self.cfg.replan_interval {
            let nx: f64 = StandardNormal.sample(rng);
            let ny: f64 = StandardNormal.sample(rng);
            self.bias = (nx * self.cfg.waypoint_noise, ny * self.cfg.waypoint_noise);
            self.since_replan = 0;
        }
        self.since_replan += 1;
    }

    /// One control step. Drives on `obs` (vision estimates and proprio); the
    /// true state is consulted only to detect broken preconditions, which
    /// yield a no-op Hold.
    pub fn act(
        &mut self,
        state: &WorldState,
        obs: &Observation,
        skill_id: SkillId,
        task: &TaskConfig,
        rng: &mut ChaCha8Rng,
    ) -> Action {
        self.refresh_bias(rng);
        let cap_pos = self.cfg.speed_cap * task.max_step_pos;
        let cap_rot = self.cfg.speed_cap * task.max_step_rot;
        let gain = self.cfg.action_gain;
        let ee = obs.proprio.ee;
        let leg = obs.vision.leg_est;
        let socket = obs.vision.table_est;

        let raw = match skill_id {
            SkillId::Pick => {
                if state.is_grasped() {
                    return Action::HOLD;
                }
                let dist = ((leg.x - ee.x).powi(2) + (leg.y - ee.y).powi(2)).sqrt();
                if dist <= self.cfg.close_threshold {
                    Action::new(0.0, 0.0, 0.0, GripperCmd::Close)
                } else {
                    let tx = leg.x + self.bias.0;
                    let ty = leg.y + self.bias.1;
                    Action::new(gain * (tx - ee.x), gain * (ty - ee.y), 0.0, GripperCmd::Hold)
                }
            }
            SkillId::Reach | SkillId::Insert => {
                if !state.is_grasped() {
                    return Action::HOLD;
                }
                let target = if skill_id == SkillId::Reach {
                    socket.compose(&task.approach_offset)
                } else {
                    socket
                };
                let tx = target.x + self.bias.0;
                let ty = target.y + self.bias.1;
                Action::new(
                    gain * (tx - leg.x),
                    gain * (ty - leg.y),
                    gain * ang_diff(target.theta, leg.theta),
                    GripperCmd::Hold,
                )
            }
            SkillId::Screw => {
                if !state.is_grasped() {
                    return Action::HOLD;
                }
                // Fixed-sign rotation at the full allowed rate.
                Action::new(0.0, 0.0, cap_rot, GripperCmd::Hold)
            }
            SkillId::Adjust => {
                if state.is_grasped() {
                    // Let go first, then re-center on the shaft.
                    Action::new(0.0, 0.0, 0.0, GripperCmd::Open)
                } else {
                    let dist = ((leg.x - ee.x).powi(2) + (leg.y - ee.y).powi(2)).sqrt();
                    if dist <= 0.5 * task.regrasp_tol {
                        Action::new(0.0, 0.0, 0.0, GripperCmd::Close)
                    } else {
                        // No bias here: re-centering is a precision move.
                        Action::new(gain * (leg.x - ee.x), gain * (leg.y - ee.y), 0.0, GripperCmd::Hold)
                    }
                }
            }
        };
        clip_to(&raw, cap_pos, cap_rot)
    }
}

/// One-shot FSM step with no phase memory: the waypoint perturbation is drawn
/// fresh, everything else matches [`Heuristic::act`].
pub fn fsm_action(
    state: &WorldState,
    obs: &Observation,
    skill_id: SkillId,
    cfg: &HeuristicConfig,
    task: &TaskConfig,
    rng: &mut ChaCha8Rng,
) -> Action {
    Heuristic::new(*cfg).act(state, obs, skill_id, task, rng)
}

fn clip_to(action: &Action, cap_pos: f64, cap_rot: f64) -> Action {
    let norm = (action.dx * action.dx + action.dy * action.dy).sqrt();
    let (dx, dy) = if norm > cap_pos {
        let k = cap_pos / norm;
        (action.dx * k, action.dy * k)
    } else {
        (action.dx, action.dy)
    };
    Action { dx, dy, dtheta: action.dtheta.clamp(-cap_rot, cap_rot), gripper: action.gripper }
}

// ---------------------------------------------------------------------------
// Collection.

/// Collector knobs beyond the base policy config.
#[derive(Debug, Clone, Copy)]
pub struct CollectOptions {
    pub num_trajectories: usize,
    pub seed: u64,
    /// Fraction of episodes that run the full task graph from Pick; the rest
    /// are single-skill segments from random initial states.
    pub full_task_fraction: f64,
    /// Draw per-trajectory speed and gain from the collection ranges instead
    /// of using the config values. Evaluation baselines keep this off.
    pub randomize_speed: bool,
}

impl CollectOptions {
    pub fn new(num_trajectories: usize, seed: u64) -> Self {
        CollectOptions { num_trajectories, seed, full_task_fraction: 0.5, randomize_speed: true }
    }
}

/// Per-trajectory speed randomization ranges used when
/// `CollectOptions::randomize_speed` is set.
const GAIN_RANGE: (f64, f64) = (0.35, 0.85);
const CAP_RANGE: (f64, f64) = (0.35, 1.0);

/// Consecutive no-progress screw steps before the collector re-plans the
/// grasp.
pub const SCREW_STALL_LIMIT: usize = 4;

/// Hard bound on phases per episode; guards against Adjust/Screw ping-pong.
pub const MAX_PHASES: usize = 12;

/// Runs the scripted policy and returns a fully labeled dataset: a
/// `full_task_fraction` of episodes walk the task graph from Pick, the rest
/// run one uniformly drawn skill from a sampled initial state. Rewards,
/// goals, and returns-to-go are labeled before returning.
///
/// Bit-reproducible for a fixed `(task, cfg, options)` tuple: every
/// trajectory derives its own RNG streams from `options.seed` and its index.
pub fn collect_with(
    task: &TaskConfig,
    cfg: &HeuristicConfig,
    options: &CollectOptions,
) -> Result<Dataset> {
    task.validate()?;
    cfg.validate()?;
    if options.num_trajectories < 1 {
        return Err(Error::Invalid("num_trajectories must be >= 1".to_string()));
    }
    if !(0.0..=1.0).contains(&options.full_task_fraction) {
        return Err(Error::Invalid("full_task_fraction must be in [0, 1]".to_string()));
    }

    let mut ds = Dataset::new(*task, RewardParams::default());
    let mut full_quota = 0.0;
    for index in 0..options.num_trajectories {
        // Bresenham mix: emits exactly round(fraction * n) full-task episodes,
        // interleaved.
        full_quota += options.full_task_fraction;
        let full_task = full_quota >= 1.0;
        if full_task {
            full_quota -= 1.0;
        }
        ds.trajectories.push(collect_one(
            task,
            cfg,
            options.seed,
            index as u64,
            full_task,
            options.randomize_speed,
        )?);
    }
    label_dataset(&mut ds);
    Ok(ds)
}

/// [`collect_with`] under default options (50/50 mix, randomized speeds).
pub fn collect(
    task: &TaskConfig,
    cfg: &HeuristicConfig,
    num_trajectories: usize,
    seed: u64,
) -> Result<Dataset> {
    collect_with(task, cfg, &CollectOptions::new(num_trajectories, seed))
}

fn collect_one(
    task: &TaskConfig,
    base_cfg: &HeuristicConfig,
    seed: u64,
    index: u64,
    full_task: bool,
    randomize_speed: bool,
) -> Result<Trajectory> {
    let mut policy_rng = ChaCha8Rng::seed_from_u64(seed);
    policy_rng.set_stream(2 * index + 1);

    let mut cfg = *base_cfg;
    if randomize_speed {
        // Per-trajectory character: some demonstrations are brisk, some
        // cautious. The learned policy sees the whole range.
        cfg.action_gain = policy_rng.gen_range(GAIN_RANGE.0..GAIN_RANGE.1);
        cfg.speed_cap = policy_rng.gen_range(CAP_RANGE.0..CAP_RANGE.1);
    }

    let start_skill = if full_task {
        SkillId::Pick
    } else {
        skill::ALL_SKILLS[policy_rng.gen_range(0..skill::SKILL_COUNT)]
    };

    let env_seed = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    let (mut env, mut obs) = Env::reset(*task, start_skill, env_seed);
    let rp = RewardParams::default();

    let mut heur = Heuristic::new(cfg);
    let mut steps: Vec<Step> = Vec::new();
    let mut segments: Vec<Segment> = Vec::new();
    let mut truncated = false;

    let mut z = start_skill;
    let mut seg_start = 0usize;
    let mut steps_in_phase = 0usize;
    let mut stall = 0usize;
    let mut phases = 0usize;
    heur.begin_skill();

    'episode: loop {
        let pre_state = *env.state();
        let pre_obs = obs;
        let goal = skill::natural_goal(&pre_state, z, task);
        let action = heur.act(&pre_state, &pre_obs, z, task, &mut policy_rng);
        // Rewards are recomputed during labeling; the step reward against the
        // natural goal is discarded here.
        let out = env.step(&action, z, &goal, &rp);
        obs = out.obs;
        steps.push(Step {
            obs: pre_obs,
            state: pre_state,
            action,
            reward: 0.0,
            skill: z,
            rtg: 0.0,
        });
        steps_in_phase += 1;

        if z == SkillId::Screw {
            stall = if out.state.thread_angle > pre_state.thread_angle { 0 } else { stall + 1 };
        }

        fn close_segment(segments: &mut Vec<Segment>, z: SkillId, start: usize, end: usize) {
            segments.push(Segment {
                skill: z,
                start,
                end,
                goal: crate::pose::Pose::IDENTITY,
                achieved: false,
            });
        }

        if out.terminated {
            close_segment(&mut segments, z, seg_start, steps.len());
            phases += 1;
            if !full_task {
                break 'episode;
            }
            match skill::next_skill(&out.state, z, task) {
                None => break 'episode,
                Some(next) => {
                    if phases >= MAX_PHASES {
                        truncated = true;
                        break 'episode;
                    }
                    z = next;
                    seg_start = steps.len();
                    steps_in_phase = 0;
                    stall = 0;
                    heur.begin_skill();
                }
            }
        } else if z == SkillId::Screw
            && (safety_violation(&obs, &cfg) || stall >= SCREW_STALL_LIMIT)
        {
            // The grasp is slipping under thread torque: re-center it.
            close_segment(&mut segments, z, seg_start, steps.len());
            phases += 1;
            if !full_task || phases >= MAX_PHASES {
                truncated = true;
                break 'episode;
            }
            z = SkillId::Adjust;
            seg_start = steps.len();
            steps_in_phase = 0;
            stall = 0;
            heur.begin_skill();
        } else if steps_in_phase >= cfg.max_steps_per_skill {
            close_segment(&mut segments, z, seg_start, steps.len());
            truncated = true;
            break 'episode;
        }
    }

    let traj = Trajectory {
        steps,
        final_state: *env.state(),
        segments,
        relabeled: false,
        truncated,
    };
    traj.validate()?;
    Ok(traj)
}
