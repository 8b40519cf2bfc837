//! Trajectory storage: goal-conditioned reward labeling, reward-to-go,
//! hindsight goal relabeling, context-window extraction, and a checksummed
//! binary file format.
//!
//! Conventions used throughout:
//! - `Step` holds the observation and true state *before* its action, and the
//!   reward evaluated on the state *after* it; the state after step `t` is
//!   `steps[t + 1].state`, or `Trajectory::final_state` for the last step.
//! - Goals are controlled-frame poses (see `env::skill::controlled_frame`).
//! - A segment's goal is its last termination-satisfying post-action state;
//!   when none exists the segment keeps its final state as the goal and is
//!   flagged unachieved.

pub mod codec;
pub mod container;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{
    skill, Action, GripperCmd, Observation, Part, Proprio, RewardParams, SkillId, Tactile,
    TaskConfig, Vision, WorldState,
};
use crate::error::Error;
use crate::pose::Pose;
use crate::Result;
use codec::{Dec, Enc};
use container::{from_container_bytes, read_container, write_container, DATASET_MAGIC};

/// Dataset file format version.
pub const DATASET_VERSION: u32 = 1;

const MAX_ITEMS: usize = 50_000_000;

/// One environment transition plus its training annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub obs: Observation,
    pub state: WorldState,
    pub action: Action,
    /// Reward of this action, evaluated on the post-action state. May be
    /// negative; only inference clamps returns-to-go at zero.
    pub reward: f64,
    pub skill: SkillId,
    pub rtg: f64,
}

/// Contiguous run of steps executed under one skill. `start..end` indexes
/// into the owning trajectory's steps, end-exclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub skill: SkillId,
    pub start: usize,
    pub end: usize,
    /// Controlled-frame goal the segment's rewards are conditioned on.
    pub goal: Pose,
    /// False when no state in the segment satisfied the skill's termination
    /// predicate (the goal then defaults to the segment's final state).
    pub achieved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    /// State after the last action.
    pub final_state: WorldState,
    /// Ordered, contiguous partition of `0..steps.len()`.
    pub segments: Vec<Segment>,
    /// True when the goal/rewards were replaced by hindsight relabeling.
    pub relabeled: bool,
    /// True when collection hit the per-skill step cap and gave up.
    pub truncated: bool,
}

impl Trajectory {
    /// State after action `t`.
    pub fn post_state(&self, t: usize) -> &WorldState {
        self.steps.get(t + 1).map_or(&self.final_state, |s| &s.state)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Goal of the last segment; the trajectory-level goal for single-skill
    /// trajectories.
    pub fn goal(&self) -> Pose {
        self.segments.last().map_or(Pose::IDENTITY, |s| s.goal)
    }

    /// Structural invariants: segments partition the step range in order and
    /// every step's skill label matches its segment.
    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() || self.segments.is_empty() {
            return Err(Error::EmptySegment);
        }
        let mut cursor = 0usize;
        for seg in &self.segments {
            if seg.start != cursor || seg.end <= seg.start || seg.end > self.steps.len() {
                return Err(Error::Invalid(format!(
                    "segment {}..{} breaks the partition at {}",
                    seg.start, seg.end, cursor
                )));
            }
            for step in &self.steps[seg.start..seg.end] {
                if step.skill != seg.skill {
                    return Err(Error::Invalid(format!(
                        "step labeled {} inside a {} segment",
                        step.skill, seg.skill
                    )));
                }
            }
            cursor = seg.end;
        }
        if cursor != self.steps.len() {
            return Err(Error::Invalid(format!(
                "segments cover {cursor} of {} steps",
                self.steps.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub task: TaskConfig,
    pub reward: RewardParams,
    pub trajectories: Vec<Trajectory>,
}

impl Dataset {
    pub fn new(task: TaskConfig, reward: RewardParams) -> Self {
        Dataset { task, reward, trajectories: Vec::new() }
    }

    pub fn num_segments(&self) -> usize {
        self.trajectories.iter().map(|t| t.segments.len()).sum()
    }

    pub fn num_steps(&self) -> usize {
        self.trajectories.iter().map(|t| t.len()).sum()
    }
}

// ---------------------------------------------------------------------------
// Reward labeling.

/// Index of the last step in `start..end` whose post-action state satisfies
/// the skill's termination predicate.
fn last_satisfying(
    traj: &Trajectory,
    start: usize,
    end: usize,
    skill_id: SkillId,
    task: &TaskConfig,
) -> Option<usize> {
    (start..end).rev().find(|&t| skill::termination(traj.post_state(t), skill_id, task))
}

/// Assigns each segment its goal (last termination-satisfying state, else the
/// segment's final state flagged unachieved) and writes per-step rewards
/// `-penalty - d(s', g) + bonus * [d <= arrival_tol]` evaluated on
/// post-action states.
pub fn label_rewards(traj: &mut Trajectory, task: &TaskConfig, rp: &RewardParams) {
    let seg_meta: Vec<(usize, usize, SkillId)> =
        traj.segments.iter().map(|s| (s.start, s.end, s.skill)).collect();
    for (i, (start, end, skill_id)) in seg_meta.into_iter().enumerate() {
        let (goal_state, achieved) = match last_satisfying(traj, start, end, skill_id, task) {
            Some(t) => (*traj.post_state(t), true),
            None => (*traj.post_state(end - 1), false),
        };
        let goal = skill::controlled_frame(&goal_state, skill_id);
        traj.segments[i].goal = goal;
        traj.segments[i].achieved = achieved;
        relabel_segment_rewards(traj, start, end, skill_id, &goal, task, rp);
    }
    reward_to_go(traj);
}

fn relabel_segment_rewards(
    traj: &mut Trajectory,
    start: usize,
    end: usize,
    skill_id: SkillId,
    goal: &Pose,
    task: &TaskConfig,
    rp: &RewardParams,
) {
    for t in start..end {
        let d = skill::distance(traj.post_state(t), goal, skill_id, task);
        let bonus = if d <= rp.arrival_tol { rp.alpha } else { 0.0 };
        traj.steps[t].reward = -rp.r_penalty - d + bonus;
    }
}

/// Undiscounted suffix sums: `rtg_t = r_t + rtg_{t+1}` over the trajectory as
/// stored, so full-task episodes sum across segment boundaries. Rewards are
/// then canonicalized to the stored differences `r_t = rtg_t - rtg_{t+1}`
/// (a <= 1 ulp adjustment) so that identity holds bit-exactly, not just up
/// to rounding.
pub fn reward_to_go(traj: &mut Trajectory) {
    let mut acc = 0.0;
    for step in traj.steps.iter_mut().rev() {
        let next = acc;
        acc += step.reward;
        step.rtg = acc;
        step.reward = acc - next;
    }
}

/// Labels every trajectory with the dataset's embedded task and reward
/// parameters.
pub fn label_dataset(ds: &mut Dataset) {
    let task = ds.task;
    let rp = ds.reward;
    for traj in &mut ds.trajectories {
        label_rewards(traj, &task, &rp);
    }
}

// ---------------------------------------------------------------------------
// Hindsight relabeling.

/// Replaces a single-skill trajectory's goal with the controlled-frame
/// projection of a uniformly drawn visited (post-action) state, recomputing
/// rewards and returns-to-go. Observations, states, actions, and skill labels
/// are untouched.
pub fn relabel(traj: &Trajectory, task: &TaskConfig, rp: &RewardParams, rng: &mut ChaCha8Rng) -> Result<Trajectory> {
    if traj.is_empty() || traj.segments.is_empty() {
        return Err(Error::EmptySegment);
    }
    if traj.segments.len() != 1 {
        return Err(Error::Invalid(format!(
            "hindsight relabeling needs a single-skill trajectory, got {} segments",
            traj.segments.len()
        )));
    }
    let skill_id = traj.segments[0].skill;
    let pick = rng.gen_range(0..traj.len());
    let goal = skill::controlled_frame(traj.post_state(pick), skill_id);

    let mut out = traj.clone();
    out.segments[0].goal = goal;
    // The drawn state is itself at distance zero, so the new goal is reached
    // within the segment by construction.
    out.segments[0].achieved = true;
    out.relabeled = true;
    let end = out.len();
    relabel_segment_rewards(&mut out, 0, end, skill_id, &goal, task, rp);
    reward_to_go(&mut out);
    Ok(out)
}

/// Copies a segment out of a trajectory as a standalone single-skill
/// trajectory (step indices rebased, post-state chain preserved).
pub fn extract_segment(traj: &Trajectory, seg_index: usize) -> Trajectory {
    let seg = &traj.segments[seg_index];
    let steps = traj.steps[seg.start..seg.end].to_vec();
    let final_state = *traj.post_state(seg.end - 1);
    Trajectory {
        steps,
        final_state,
        segments: vec![Segment {
            skill: seg.skill,
            start: 0,
            end: seg.end - seg.start,
            goal: seg.goal,
            achieved: seg.achieved,
        }],
        relabeled: traj.relabeled,
        truncated: traj.truncated,
    }
}

/// Appends `copies_per_segment` hindsight-relabeled copies of every segment;
/// originals are retained. Returns the number of trajectories added.
pub fn augment(ds: &mut Dataset, copies_per_segment: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
    let task = ds.task;
    let rp = ds.reward;
    let originals = ds.trajectories.len();
    let mut added = 0;
    for ti in 0..originals {
        for si in 0..ds.trajectories[ti].segments.len() {
            let seg_traj = extract_segment(&ds.trajectories[ti], si);
            for _ in 0..copies_per_segment {
                let relabeled = relabel(&seg_traj, &task, &rp, rng)?;
                ds.trajectories.push(relabeled);
                added += 1;
            }
        }
    }
    Ok(added)
}

// ---------------------------------------------------------------------------
// Context windows.

/// One model-input timestep. Pad entries carry zeroed content and are masked
/// out by the sequence model.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextStep {
    pub rtg: f64,
    pub obs: Observation,
    pub state: WorldState,
    /// `None` on pad entries and at an inference query step, where the action
    /// is the unknown being predicted. Training windows keep every action.
    pub action: Option<Action>,
    pub skill: SkillId,
    pub pad: bool,
}

/// Fixed-length causal window ending at the query step. `steps.len() == h`
/// always; positions before the trajectory start are pads.
#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    pub steps: Vec<ContextStep>,
}

impl Context {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// The skill conditioning the query step.
    pub fn query_skill(&self) -> SkillId {
        self.steps.last().expect("context is never empty").skill
    }

    pub fn num_real(&self) -> usize {
        self.steps.iter().filter(|s| !s.pad).count()
    }
}

pub(crate) fn pad_step(skill_id: SkillId) -> ContextStep {
    let zero_pose = Pose::IDENTITY;
    ContextStep {
        rtg: 0.0,
        obs: Observation {
            proprio: Proprio { ee: zero_pose, aperture: 0.0 },
            vision: Vision { table_est: zero_pose, leg_est: zero_pose, valid: false },
            tactile: Tactile { contact: false, normal_force: 0.0, slip_flow: 0.0 },
        },
        state: WorldState {
            table: zero_pose,
            leg: zero_pose,
            ee: zero_pose,
            aperture: 0.0,
            grasped: None,
            thread_angle: 0.0,
            assembled: false,
        },
        action: None,
        skill: skill_id,
        pad: true,
    }
}

/// The `<= h`-step window ending at step `t`, left-padded to exactly `h`
/// entries. Every real step keeps its action; inference assembles its own
/// window with the query action absent.
pub fn sample_context(traj: &Trajectory, t: usize, h: usize) -> Context {
    assert!(t < traj.len(), "context query {t} out of range {}", traj.len());
    assert!(h >= 1);
    let start = (t + 1).saturating_sub(h);
    let mut steps = Vec::with_capacity(h);
    for _ in 0..h - (t + 1 - start) {
        steps.push(pad_step(traj.steps[start].skill));
    }
    for k in start..=t {
        let s = &traj.steps[k];
        steps.push(ContextStep {
            rtg: s.rtg,
            obs: s.obs,
            state: s.state,
            action: Some(s.action),
            skill: s.skill,
            pad: false,
        });
    }
    Context { steps }
}

// ---------------------------------------------------------------------------
// Serialization.

fn enc_pose(e: &mut Enc, p: &Pose) {
    e.f64(p.x);
    e.f64(p.y);
    e.f64(p.theta);
}

fn dec_pose(d: &mut Dec) -> Result<Pose> {
    let x = d.f64()?;
    let y = d.f64()?;
    let theta = d.f64()?;
    Ok(Pose { x, y, theta })
}

fn enc_state(e: &mut Enc, s: &WorldState) {
    enc_pose(e, &s.table);
    enc_pose(e, &s.leg);
    enc_pose(e, &s.ee);
    e.f64(s.aperture);
    e.u8(match s.grasped {
        None => 0,
        Some(Part::Leg) => 1,
    });
    e.f64(s.thread_angle);
    e.bool(s.assembled);
}

fn dec_state(d: &mut Dec) -> Result<WorldState> {
    let table = dec_pose(d)?;
    let leg = dec_pose(d)?;
    let ee = dec_pose(d)?;
    let aperture = d.f64()?;
    let grasped = match d.u8()? {
        0 => None,
        1 => Some(Part::Leg),
        v => return Err(d.bad(&format!("grasped tag {v}"))),
    };
    let thread_angle = d.f64()?;
    let assembled = d.bool()?;
    Ok(WorldState { table, leg, ee, aperture, grasped, thread_angle, assembled })
}

fn enc_obs(e: &mut Enc, o: &Observation) {
    enc_pose(e, &o.proprio.ee);
    e.f64(o.proprio.aperture);
    enc_pose(e, &o.vision.table_est);
    enc_pose(e, &o.vision.leg_est);
    e.bool(o.vision.valid);
    e.bool(o.tactile.contact);
    e.f64(o.tactile.normal_force);
    e.f64(o.tactile.slip_flow);
}

fn dec_obs(d: &mut Dec) -> Result<Observation> {
    let ee = dec_pose(d)?;
    let aperture = d.f64()?;
    let table_est = dec_pose(d)?;
    let leg_est = dec_pose(d)?;
    let valid = d.bool()?;
    let contact = d.bool()?;
    let normal_force = d.f64()?;
    let slip_flow = d.f64()?;
    Ok(Observation {
        proprio: Proprio { ee, aperture },
        vision: Vision { table_est, leg_est, valid },
        tactile: Tactile { contact, normal_force, slip_flow },
    })
}

fn enc_action(e: &mut Enc, a: &Action) {
    e.f64(a.dx);
    e.f64(a.dy);
    e.f64(a.dtheta);
    e.u8(match a.gripper {
        GripperCmd::Open => 0,
        GripperCmd::Hold => 1,
        GripperCmd::Close => 2,
    });
}

fn dec_action(d: &mut Dec) -> Result<Action> {
    let dx = d.f64()?;
    let dy = d.f64()?;
    let dtheta = d.f64()?;
    let gripper = match d.u8()? {
        0 => GripperCmd::Open,
        1 => GripperCmd::Hold,
        2 => GripperCmd::Close,
        v => return Err(d.bad(&format!("gripper tag {v}"))),
    };
    Ok(Action { dx, dy, dtheta, gripper })
}

fn enc_skill(e: &mut Enc, s: SkillId) {
    e.u8(s.index() as u8);
}

fn dec_skill(d: &mut Dec) -> Result<SkillId> {
    let raw = d.u8()?;
    SkillId::from_index(raw as usize).ok_or_else(|| d.bad(&format!("skill id {raw}")))
}

fn enc_trajectory(e: &mut Enc, t: &Trajectory) {
    e.u64(t.steps.len() as u64);
    for s in &t.steps {
        enc_obs(e, &s.obs);
        enc_state(e, &s.state);
        enc_action(e, &s.action);
        e.f64(s.reward);
        enc_skill(e, s.skill);
        e.f64(s.rtg);
    }
    enc_state(e, &t.final_state);
    e.u64(t.segments.len() as u64);
    for seg in &t.segments {
        enc_skill(e, seg.skill);
        e.u64(seg.start as u64);
        e.u64(seg.end as u64);
        enc_pose(e, &seg.goal);
        e.bool(seg.achieved);
    }
    e.bool(t.relabeled);
    e.bool(t.truncated);
}

fn dec_trajectory(d: &mut Dec) -> Result<Trajectory> {
    let n = d.len(MAX_ITEMS)?;
    let mut steps = Vec::with_capacity(n);
    for _ in 0..n {
        let obs = dec_obs(d)?;
        let state = dec_state(d)?;
        let action = dec_action(d)?;
        let reward = d.f64()?;
        let skill_id = dec_skill(d)?;
        let rtg = d.f64()?;
        steps.push(Step { obs, state, action, reward, skill: skill_id, rtg });
    }
    let final_state = dec_state(d)?;
    let m = d.len(MAX_ITEMS)?;
    let mut segments = Vec::with_capacity(m);
    for _ in 0..m {
        let skill_id = dec_skill(d)?;
        let start = d.len(MAX_ITEMS)?;
        let end = d.len(MAX_ITEMS)?;
        let goal = dec_pose(d)?;
        let achieved = d.bool()?;
        segments.push(Segment { skill: skill_id, start, end, goal, achieved });
    }
    let relabeled = d.bool()?;
    let truncated = d.bool()?;
    Ok(Trajectory { steps, final_state, segments, relabeled, truncated })
}

impl Dataset {
    pub fn to_payload(&self) -> Result<Vec<u8>> {
        let mut e = Enc::new();
        let task_toml = toml::to_string(&self.task)
            .map_err(|err| Error::Invalid(format!("task config does not serialize: {err}")))?;
        let reward_toml = toml::to_string(&self.reward)
            .map_err(|err| Error::Invalid(format!("reward params do not serialize: {err}")))?;
        e.str(&task_toml);
        e.str(&reward_toml);
        e.u64(self.trajectories.len() as u64);
        for t in &self.trajectories {
            enc_trajectory(&mut e, t);
        }
        Ok(e.into_bytes())
    }

    pub fn from_payload(payload: &[u8], path: &str) -> Result<Dataset> {
        let mut d = Dec::new(payload, path);
        let task_toml = d.str(MAX_ITEMS)?;
        let reward_toml = d.str(MAX_ITEMS)?;
        let task: TaskConfig =
            toml::from_str(&task_toml).map_err(|err| d.bad(&format!("task config: {err}")))?;
        let reward: RewardParams =
            toml::from_str(&reward_toml).map_err(|err| d.bad(&format!("reward params: {err}")))?;
        let n = d.len(MAX_ITEMS)?;
        let mut trajectories = Vec::with_capacity(n);
        for _ in 0..n {
            trajectories.push(dec_trajectory(&mut d)?);
        }
        d.finish()?;
        Ok(Dataset { task, reward, trajectories })
    }

    /// Full container bytes as written to disk. Byte-identical for equal
    /// datasets, which is what the pipeline determinism checks compare.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        Ok(container::to_container_bytes(DATASET_MAGIC, DATASET_VERSION, &self.to_payload()?))
    }

    pub fn from_bytes(bytes: &[u8], path: &str) -> Result<Dataset> {
        let (_, payload) = from_container_bytes(DATASET_MAGIC, DATASET_VERSION, bytes, path)?;
        Dataset::from_payload(payload, path)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        write_container(path, DATASET_MAGIC, DATASET_VERSION, &self.to_payload()?)
    }

    pub fn load(path: &std::path::Path) -> Result<Dataset> {
        let payload = read_container(path, DATASET_MAGIC, DATASET_VERSION)?;
        Dataset::from_payload(&payload, &path.to_string_lossy())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn base_state(task: &TaskConfig) -> WorldState {
        WorldState {
            table: Pose::new(0.01, -0.02, 0.3),
            leg: Pose::new(-0.1, 0.05, 0.2),
            ee: Pose::new(-0.1, 0.05, 0.0),
            aperture: task.aperture_max,
            grasped: None,
            thread_angle: 0.0,
            assembled: false,
        }
    }

    /// Hand-built 3-step pick trajectory whose post-states approach the leg;
    /// the last one grasps it.
    fn toy_pick_trajectory(task: &TaskConfig) -> Trajectory {
        let mut states = Vec::new();
        let mut s = base_state(task);
        s.ee = Pose::new(-0.13, 0.05, 0.0);
        states.push(s);
        for k in 1..=3 {
            let mut next = states[k - 1];
            next.ee = Pose::new(-0.13 + 0.01 * k as f64, 0.05, 0.0);
            if k == 3 {
                next.grasped = Some(Part::Leg);
                next.aperture = 0.9 * task.leg_diameter;
            }
            states.push(next);
        }
        let steps = (0..3)
            .map(|t| Step {
                obs: obs_of(&states[t]),
                state: states[t],
                action: Action::new(0.01, 0.0, 0.0, GripperCmd::Hold),
                reward: 0.0,
                skill: SkillId::Pick,
                rtg: 0.0,
            })
            .collect();
        Trajectory {
            steps,
            final_state: states[3],
            segments: vec![Segment {
                skill: SkillId::Pick,
                start: 0,
                end: 3,
                goal: Pose::IDENTITY,
                achieved: false,
            }],
            relabeled: false,
            truncated: false,
        }
    }

    fn obs_of(s: &WorldState) -> Observation {
        Observation {
            proprio: Proprio { ee: s.ee, aperture: s.aperture },
            vision: Vision { table_est: s.table, leg_est: s.leg, valid: true },
            tactile: Tactile { contact: s.is_grasped(), normal_force: 0.0, slip_flow: 0.0 },
        }
    }

    fn toy_dataset() -> Dataset {
        let task = TaskConfig::square_table();
        let mut ds = Dataset::new(task, RewardParams::default());
        ds.trajectories.push(toy_pick_trajectory(&task));
        label_dataset(&mut ds);
        ds
    }

    #[test]
    fn labeling_marks_the_terminal_state_as_goal() {
        let ds = toy_dataset();
        let traj = &ds.trajectories[0];
        let seg = &traj.segments[0];
        assert!(seg.achieved);
        let expect = skill::controlled_frame(&traj.final_state, SkillId::Pick);
        assert_eq!(seg.goal, expect);
    }

    #[test]
    fn reward_at_goal_is_bonus_minus_penalty() {
        let ds = toy_dataset();
        let traj = &ds.trajectories[0];
        let rp = ds.reward;
        // The final step's post-state IS the goal: distance zero.
        let last = traj.steps.last().unwrap();
        assert!((last.reward - (-rp.r_penalty + rp.alpha)).abs() < 1e-12);
    }

    #[test]
    fn reward_beyond_tolerance_is_penalty_plus_distance() {
        let task = TaskConfig::square_table();
        let rp = RewardParams::default();
        let mut traj = toy_pick_trajectory(&task);
        label_rewards(&mut traj, &task, &rp);
        // First step's post-state is 0.02 m from the grasp point, outside the
        // arrival band, so no bonus fires.
        let d = skill::distance(traj.post_state(0), &traj.segments[0].goal, SkillId::Pick, &task);
        assert!(d > rp.arrival_tol);
        assert!((traj.steps[0].reward - (-rp.r_penalty - d)).abs() < 1e-12);
    }

    #[test]
    fn unachieved_segment_keeps_final_state_as_goal() {
        let task = TaskConfig::square_table();
        let rp = RewardParams::default();
        let mut traj = toy_pick_trajectory(&task);
        // Remove the grasp so no state satisfies pick termination.
        traj.final_state.grasped = None;
        traj.final_state.aperture = 0.0;
        label_rewards(&mut traj, &task, &rp);
        let seg = &traj.segments[0];
        assert!(!seg.achieved);
        assert_eq!(seg.goal, skill::controlled_frame(&traj.final_state, SkillId::Pick));
    }

    #[test]
    fn rtg_is_the_suffix_sum_and_satisfies_the_recursion() {
        let mut traj = toy_pick_trajectory(&TaskConfig::square_table());
        for (i, s) in traj.steps.iter_mut().enumerate() {
            s.reward = -1.0 - i as f64;
        }
        reward_to_go(&mut traj);
        assert_eq!(traj.steps[2].rtg, -3.0);
        assert_eq!(traj.steps[1].rtg, -5.0);
        assert_eq!(traj.steps[0].rtg, -6.0);
        for t in 0..traj.len() - 1 {
            assert_eq!(traj.steps[t].rtg - traj.steps[t + 1].rtg, traj.steps[t].reward);
        }
    }

    #[test]
    fn uniform_negative_rewards_count_down() {
        let task = TaskConfig::square_table();
        let mut traj = toy_pick_trajectory(&task);
        traj.steps = std::iter::repeat(traj.steps[0].clone()).take(5).collect();
        traj.segments[0].end = 5;
        for s in &mut traj.steps {
            s.reward = -1.0;
        }
        reward_to_go(&mut traj);
        let rtgs: Vec<f64> = traj.steps.iter().map(|s| s.rtg).collect();
        assert_eq!(rtgs, vec![-5.0, -4.0, -3.0, -2.0, -1.0]);
    }

    #[test]
    fn relabel_is_a_fixed_point_at_the_original_goal() {
        let ds = toy_dataset();
        let task = ds.task;
        let rp = ds.reward;
        let traj = &ds.trajectories[0];
        // Find a seed whose uniform draw picks the terminal state (the
        // original goal).
        let mut found = false;
        for seed in 0..64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = relabel(traj, &task, &rp, &mut rng).unwrap();
            if out.segments[0].goal == traj.segments[0].goal {
                for t in 0..traj.len() {
                    assert_eq!(out.steps[t].reward, traj.steps[t].reward);
                    assert_eq!(out.steps[t].rtg, traj.steps[t].rtg);
                }
                found = true;
                break;
            }
        }
        assert!(found, "no seed drew the original goal state");
    }

    #[test]
    fn relabel_matches_independent_recomputation() {
        let ds = toy_dataset();
        let task = ds.task;
        let rp = ds.reward;
        let traj = &ds.trajectories[0];
        let tol = rp.arrival_tol;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = relabel(traj, &task, &rp, &mut rng).unwrap();
            let goal = out.segments[0].goal;
            for t in 0..out.len() {
                let d = skill::distance(out.post_state(t), &goal, SkillId::Pick, &task);
                let expect = -rp.r_penalty - d + if d <= tol { rp.alpha } else { 0.0 };
                assert!((out.steps[t].reward - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn relabel_touches_only_goal_rewards_and_flags() {
        let ds = toy_dataset();
        let traj = &ds.trajectories[0];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let out = relabel(traj, &ds.task, &ds.reward, &mut rng).unwrap();
        assert!(out.relabeled);
        for t in 0..traj.len() {
            assert_eq!(out.steps[t].obs, traj.steps[t].obs);
            assert_eq!(out.steps[t].state, traj.steps[t].state);
            assert_eq!(out.steps[t].action, traj.steps[t].action);
            assert_eq!(out.steps[t].skill, traj.steps[t].skill);
        }
        assert_eq!(out.final_state, traj.final_state);
    }

    #[test]
    fn relabel_rejects_multi_segment_and_empty_trajectories() {
        let ds = toy_dataset();
        let task = ds.task;
        let rp = ds.reward;
        let mut rng = ChaCha8Rng::seed_from_u64(0);

        let mut two = ds.trajectories[0].clone();
        two.segments = vec![
            Segment { skill: SkillId::Pick, start: 0, end: 1, goal: Pose::IDENTITY, achieved: false },
            Segment { skill: SkillId::Pick, start: 1, end: 3, goal: Pose::IDENTITY, achieved: false },
        ];
        assert!(matches!(relabel(&two, &task, &rp, &mut rng), Err(Error::Invalid(_))));

        let mut empty = ds.trajectories[0].clone();
        empty.steps.clear();
        empty.segments.clear();
        assert!(matches!(relabel(&empty, &task, &rp, &mut rng), Err(Error::EmptySegment)));
    }

    #[test]
    fn augment_grows_by_copies_times_segments_and_keeps_originals() {
        let mut ds = toy_dataset();
        let original = ds.trajectories.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let added = augment(&mut ds, 2, &mut rng).unwrap();
        assert_eq!(added, 2 * original.len());
        assert_eq!(ds.trajectories.len(), original.len() + added);
        assert_eq!(&ds.trajectories[..original.len()], &original[..]);
        let relabeled = ds.trajectories.iter().filter(|t| t.relabeled).count();
        assert_eq!(relabeled, added);

        let mut unchanged = toy_dataset();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(augment(&mut unchanged, 0, &mut rng).unwrap(), 0);
        assert_eq!(unchanged.trajectories.len(), 1);
    }

    #[test]
    fn context_at_start_is_mostly_pads() {
        let ds = toy_dataset();
        let ctx = sample_context(&ds.trajectories[0], 0, 4);
        assert_eq!(ctx.horizon(), 4);
        assert_eq!(ctx.num_real(), 1);
        assert!(ctx.steps[..3].iter().all(|s| s.pad && s.action.is_none()));
        assert!(!ctx.steps[3].pad);
        assert!(ctx.steps[3].action.is_some());
    }

    #[test]
    fn full_window_has_no_pads_and_keeps_every_action() {
        let ds = toy_dataset();
        let ctx = sample_context(&ds.trajectories[0], 2, 3);
        assert_eq!(ctx.num_real(), 3);
        assert!(ctx.steps.iter().all(|s| s.action.is_some()));
        assert_eq!(ctx.query_skill(), SkillId::Pick);
    }

    #[test]
    fn context_reproduces_stored_fields() {
        let ds = toy_dataset();
        let traj = &ds.trajectories[0];
        let ctx = sample_context(traj, 1, 2);
        assert_eq!(ctx.steps[0].obs, traj.steps[0].obs);
        assert_eq!(ctx.steps[1].state, traj.steps[1].state);
        assert_eq!(ctx.steps[0].rtg, traj.steps[0].rtg);
    }

    #[test]
    fn dataset_round_trips_byte_exactly() {
        let ds = toy_dataset();
        let bytes = ds.to_bytes().unwrap();
        let back = Dataset::from_bytes(&bytes, "mem").unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn empty_dataset_round_trips() {
        let ds = Dataset::new(TaskConfig::square_table(), RewardParams::default());
        let bytes = ds.to_bytes().unwrap();
        let back = Dataset::from_bytes(&bytes, "mem").unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn dataset_files_survive_save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.lwd");
        let ds = toy_dataset();
        ds.save(&path).unwrap();
        let back = Dataset::load(&path).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn validate_catches_partition_and_label_breaks() {
        let ds = toy_dataset();
        let good = &ds.trajectories[0];
        good.validate().unwrap();

        let mut gap = good.clone();
        gap.segments[0].end = 2;
        assert!(gap.validate().is_err());

        let mut mislabeled = good.clone();
        mislabeled.steps[1].skill = SkillId::Screw;
        assert!(mislabeled.validate().is_err());
    }
}
