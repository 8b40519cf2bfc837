//! Skill vocabulary: termination predicates, goal frames, per-skill distance
//! metrics, initial-set membership, and the task graph that chains skills
//! into a full assembly.

use serde::{Deserialize, Serialize};

use crate::env::config::TaskConfig;
use crate::env::world::WorldState;
use crate::pose::{ang_diff, Pose};

/// The five manipulation skills, in task-graph order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum SkillId {
    Pick = 0,
    Reach = 1,
    Insert = 2,
    Screw = 3,
    Adjust = 4,
}

pub const SKILL_COUNT: usize = 5;

pub const ALL_SKILLS: [SkillId; SKILL_COUNT] =
    [SkillId::Pick, SkillId::Reach, SkillId::Insert, SkillId::Screw, SkillId::Adjust];

impl SkillId {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<SkillId> {
        ALL_SKILLS.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            SkillId::Pick => "pick",
            SkillId::Reach => "reach",
            SkillId::Insert => "insert",
            SkillId::Screw => "screw",
            SkillId::Adjust => "adjust",
        }
    }
}

impl std::fmt::Display for SkillId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Socket feature frame in world coordinates.
pub fn socket_pose(state: &WorldState, cfg: &TaskConfig) -> Pose {
    state.table.compose(&cfg.socket_offset)
}

/// Pre-insertion staging frame in world coordinates.
pub fn approach_pose(state: &WorldState, cfg: &TaskConfig) -> Pose {
    socket_pose(state, cfg).compose(&cfg.approach_offset)
}

/// Whether the leg sits within the socket's seating tolerance.
pub fn seated(state: &WorldState, cfg: &TaskConfig) -> bool {
    let socket = socket_pose(state, cfg);
    state.leg.position_distance(&socket) <= cfg.eps_pos
        && state.leg.heading_distance(&socket) <= cfg.eps_rot
}

/// The frame a skill controls, as a pose. Hindsight goals are drawn from
/// this projection of visited states, so it fully determines the reward a
/// skill segment can be labeled with.
///
/// * `Pick` — end-effector pose (heading unweighted by the metric).
/// * `Reach`, `Insert` — leg shaft pose.
/// * `Screw` — thread engagement packed into `x` (`y`, `theta` zero).
/// * `Adjust` — leg-to-gripper offset packed into `x`, `y` (`theta` zero).
pub fn controlled_frame(state: &WorldState, skill: SkillId) -> Pose {
    match skill {
        SkillId::Pick => state.ee,
        SkillId::Reach | SkillId::Insert => state.leg,
        SkillId::Screw => Pose::new(state.thread_angle, 0.0, 0.0),
        SkillId::Adjust => {
            Pose::new(state.ee.x - state.leg.x, state.ee.y - state.leg.y, 0.0)
        }
    }
}

/// Per-skill distance between a state and a goal expressed in that skill's
/// controlled frame. Meters; heading errors are folded in at `w_rot` meters
/// per radian where the skill cares about heading.
pub fn distance(state: &WorldState, goal: &Pose, skill: SkillId, cfg: &TaskConfig) -> f64 {
    let frame = controlled_frame(state, skill);
    match skill {
        SkillId::Pick | SkillId::Adjust => frame.position_distance(goal),
        SkillId::Reach | SkillId::Insert => {
            frame.position_distance(goal) + cfg.w_rot * frame.heading_distance(goal)
        }
        SkillId::Screw => cfg.w_thread * (goal.x - frame.x).abs(),
    }
}

/// Arrival threshold for a skill, consistent with its termination predicate:
/// any state with `termination(state, skill) == true` has
/// `distance(state, natural_goal, skill) <= distance_threshold(skill)`.
pub fn distance_threshold(skill: SkillId, cfg: &TaskConfig) -> f64 {
    match skill {
        SkillId::Pick => cfg.grasp_tol,
        SkillId::Reach => 2.0 * cfg.eps_pos + cfg.w_rot * 2.0 * cfg.eps_rot,
        SkillId::Insert => cfg.eps_pos + cfg.w_rot * cfg.eps_rot,
        SkillId::Screw => cfg.w_thread * cfg.thread_pitch,
        SkillId::Adjust => cfg.regrasp_tol,
    }
}

/// The skill's nominal target in its controlled frame, computed from the
/// true state. Used for evaluation-time rewards; dataset labeling replaces
/// it with the segment's terminal state.
pub fn natural_goal(state: &WorldState, skill: SkillId, cfg: &TaskConfig) -> Pose {
    match skill {
        SkillId::Pick => Pose::new(state.leg.x, state.leg.y, state.ee.theta),
        SkillId::Reach => approach_pose(state, cfg),
        SkillId::Insert => socket_pose(state, cfg),
        SkillId::Screw => Pose::new(cfg.theta_done, 0.0, 0.0),
        SkillId::Adjust => Pose::IDENTITY,
    }
}

/// Termination predicate of a skill, evaluated on the true state.
pub fn termination(state: &WorldState, skill: SkillId, cfg: &TaskConfig) -> bool {
    match skill {
        SkillId::Pick => state.is_grasped(),
        SkillId::Reach => {
            let target = approach_pose(state, cfg);
            state.is_grasped()
                && state.leg.position_distance(&target) <= 2.0 * cfg.eps_pos
                && state.leg.heading_distance(&target) <= 2.0 * cfg.eps_rot
        }
        SkillId::Insert => seated(state, cfg),
        SkillId::Screw => state.thread_angle >= cfg.theta_done,
        SkillId::Adjust => state.is_grasped() && state.grasp_offset() <= cfg.regrasp_tol,
    }
}

/// Episode success: the leg is fully threaded in.
pub fn success(state: &WorldState, cfg: &TaskConfig) -> bool {
    state.thread_angle >= cfg.theta_done
}

/// Task-graph successor, given the state at the moment the current skill
/// terminated. `None` once the assembly is complete. The `Insert` successor
/// branches on grasp quality: a sloppy grasp must be re-centered before the
/// thread will bite.
pub fn next_skill(state: &WorldState, current: SkillId, cfg: &TaskConfig) -> Option<SkillId> {
    if success(state, cfg) {
        return None;
    }
    match current {
        SkillId::Pick => Some(SkillId::Reach),
        SkillId::Reach => Some(SkillId::Insert),
        SkillId::Insert | SkillId::Adjust => {
            if state.is_grasped() && state.grasp_offset() <= cfg.regrasp_tol {
                Some(SkillId::Screw)
            } else {
                Some(SkillId::Adjust)
            }
        }
        SkillId::Screw => {
            // Only reachable when screwing stalled (slipping grasp).
            Some(SkillId::Adjust)
        }
    }
}

/// Membership test for a skill's set of valid starting states. Kept
/// deliberately wider than the sampler in `reset` so that every terminal
/// state of a predecessor skill belongs to its successor's initial set.
pub fn in_initial_set(state: &WorldState, skill: SkillId, cfg: &TaskConfig) -> bool {
    match skill {
        SkillId::Pick => !state.is_grasped() && state.thread_angle == 0.0,
        SkillId::Reach => state.is_grasped() && state.grasp_offset() <= cfg.grasp_tol,
        SkillId::Insert => {
            let target = approach_pose(state, cfg);
            state.is_grasped()
                && state.leg.position_distance(&target) <= 3.0 * cfg.eps_pos
                && state.leg.heading_distance(&target) <= 3.0 * cfg.eps_rot
        }
        SkillId::Screw => {
            seated(state, cfg)
                && state.is_grasped()
                && state.grasp_offset() <= cfg.regrasp_tol
                && !state.assembled
        }
        SkillId::Adjust => {
            seated(state, cfg) && state.is_grasped() && state.grasp_offset() > cfg.regrasp_tol
        }
    }
}

/// Heading error from the leg to the socket seat, signed.
pub fn seat_heading_error(state: &WorldState, cfg: &TaskConfig) -> f64 {
    ang_diff(socket_pose(state, cfg).theta, state.leg.theta)
}
