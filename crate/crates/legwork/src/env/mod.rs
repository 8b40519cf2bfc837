//! Kinematic top-down simulator for single-leg furniture assembly.
//!
//! The scene is planar SE(2): a tabletop with a threaded socket, a leg shaft
//! standing on the bench, and a gripper. Skills move the gripper, carry the
//! grasped leg, seat it in the socket, and turn it until the thread is fully
//! engaged. The only stochastic element is vision noise; given a seed, every
//! rollout is bit-reproducible.

pub mod config;
pub mod skill;
pub mod world;

pub use config::{Furniture, RewardParams, TaskConfig};
pub use skill::{SkillId, ALL_SKILLS, SKILL_COUNT};
pub use world::{Action, GripperCmd, Observation, Part, Proprio, Tactile, Vision, WorldState};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::pose::{wrap_angle, Pose};

/// Result of one simulator step.
#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    /// State after the action.
    pub state: WorldState,
    /// Observation of the post-step state (fresh vision noise).
    pub obs: Observation,
    /// Reward of the post-step state against the supplied goal.
    pub reward: f64,
    /// Whether the active skill's termination predicate fired.
    pub terminated: bool,
}

/// Simulator instance: task config, true state, and the vision-noise stream.
#[derive(Debug, Clone)]
pub struct Env {
    pub cfg: TaskConfig,
    state: WorldState,
    rng: ChaCha8Rng,
    last_slip: f64,
}

impl Env {
    /// Samples a starting state from the initial set of `skill` and returns
    /// the environment together with the first observation.
    pub fn reset(cfg: TaskConfig, skill: SkillId, seed: u64) -> (Env, Observation) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = sample_initial_state(&cfg, skill, &mut rng);
        let mut env = Env { cfg, state, rng, last_slip: 0.0 };
        let obs = env.observe();
        (env, obs)
    }

    /// Rebuilds an environment around an explicit state (used by tests and
    /// by scripted scenarios).
    pub fn from_state(cfg: TaskConfig, state: WorldState, seed: u64) -> Env {
        Env { cfg, state, rng: ChaCha8Rng::seed_from_u64(seed), last_slip: 0.0 }
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    /// Observation of the current state with fresh vision noise. Slip flow
    /// reports the most recent step.
    pub fn observe(&mut self) -> Observation {
        let sigma = self.cfg.noise_sigma;
        let rot_sigma = sigma * self.cfg.rot_noise_per_m;
        let mut noisy_pose = |p: &Pose| -> Pose {
            let nx: f64 = StandardNormal.sample(&mut self.rng);
            let ny: f64 = StandardNormal.sample(&mut self.rng);
            let nt: f64 = StandardNormal.sample(&mut self.rng);
            Pose::new(p.x + sigma * nx, p.y + sigma * ny, p.theta + rot_sigma * nt)
        };
        let socket = skill::socket_pose(&self.state, &self.cfg);
        let table_est = noisy_pose(&socket);
        let leg_est = noisy_pose(&self.state.leg);
        let grasped = self.state.is_grasped();
        let contact =
            grasped || self.state.grasp_offset() <= 0.5 * self.cfg.leg_diameter;
        let normal_force = if grasped {
            (self.cfg.leg_diameter - self.state.aperture) / (0.1 * self.cfg.leg_diameter)
        } else {
            0.0
        };
        Observation {
            proprio: Proprio { ee: self.state.ee, aperture: self.state.aperture },
            vision: Vision { table_est, leg_est, valid: true },
            tactile: Tactile {
                contact,
                normal_force: normal_force.max(0.0),
                slip_flow: if contact { self.last_slip } else { 0.0 },
            },
        }
    }

    /// Advances the world by one action and scores the resulting state
    /// against `goal` with the skill's metric:
    /// `r = -penalty - d + bonus * 1[d <= skill threshold]`.
    ///
    /// Within a step: rotation is applied first, then translation, then the
    /// gripper command.
    pub fn step(
        &mut self,
        action: &Action,
        skill: SkillId,
        goal: &Pose,
        rp: &RewardParams,
    ) -> StepOutcome {
        let cfg = self.cfg;
        let clipped = clip_action(action, &cfg);
        let mut s = self.state;
        let mut slip_m = 0.0;

        // Engagement is judged on the pre-motion state: the thread bites while
        // the torque is applied, before the heading has turned away from the
        // seat alignment.
        let pinned = s.thread_angle > 0.0;
        let engageable = s.is_grasped() && (pinned || skill::seated(&s, &cfg));
        let offset_ok = s.is_grasped() && s.grasp_offset() <= cfg.regrasp_tol;
        let engaging = clipped.dtheta.abs() >= cfg.min_rot_step * cfg.max_step_rot;

        // Rotation.
        if clipped.dtheta != 0.0 {
            if pinned {
                if s.is_grasped() {
                    if offset_ok {
                        // Turning a pinned leg: both bodies rotate about the
                        // socket axis, preserving the grasp exactly.
                        let pivot = (s.leg.x, s.leg.y);
                        s.ee = s.ee.rotated_about(pivot, clipped.dtheta);
                        s.leg = s.leg.rotated_about(pivot, clipped.dtheta);
                    } else {
                        // Sloppy grasp: the pads spin around the shaft.
                        s.ee = Pose::new(s.ee.x, s.ee.y, s.ee.theta + clipped.dtheta);
                        slip_m += clipped.dtheta.abs() * s.grasp_offset();
                    }
                } else {
                    s.ee = Pose::new(s.ee.x, s.ee.y, s.ee.theta + clipped.dtheta);
                }
            } else if s.is_grasped() {
                let pivot = (s.ee.x, s.ee.y);
                s.leg = s.leg.rotated_about(pivot, clipped.dtheta);
                s.ee = Pose::new(s.ee.x, s.ee.y, s.ee.theta + clipped.dtheta);
            } else {
                s.ee = Pose::new(s.ee.x, s.ee.y, s.ee.theta + clipped.dtheta);
            }
        }

        // Thread engagement.
        if engaging && engageable {
            if offset_ok {
                if clipped.dtheta > 0.0 {
                    if s.thread_angle == 0.0 {
                        // First bite: the shaft drops onto the thread start.
                        let socket = skill::socket_pose(&s, &cfg);
                        s.leg = Pose::new(socket.x, socket.y, s.leg.theta);
                    }
                    s.thread_angle += cfg.thread_pitch;
                } else {
                    s.thread_angle = (s.thread_angle - cfg.thread_pitch).max(0.0);
                }
            }
            // A sloppy grasp slips instead of advancing; the rotation slip
            // was already charged above when the leg was pinned.
        }

        // Translation.
        if clipped.dx != 0.0 || clipped.dy != 0.0 {
            if s.thread_angle > 0.0 && s.is_grasped() {
                // The leg is threaded in; dragging it laterally only strains
                // the pads.
                slip_m += (clipped.dx * clipped.dx + clipped.dy * clipped.dy).sqrt();
            } else {
                let nx = (s.ee.x + clipped.dx).clamp(-cfg.workspace_half, cfg.workspace_half);
                let ny = (s.ee.y + clipped.dy).clamp(-cfg.workspace_half, cfg.workspace_half);
                let (mx, my) = (nx - s.ee.x, ny - s.ee.y);
                s.ee = Pose::new(nx, ny, s.ee.theta);
                if s.is_grasped() {
                    s.leg = Pose::new(s.leg.x + mx, s.leg.y + my, s.leg.theta);
                }
            }
        }

        // Gripper.
        match clipped.gripper {
            GripperCmd::Hold => {}
            GripperCmd::Open => {
                s.grasped = None;
                s.aperture = cfg.aperture_max;
            }
            GripperCmd::Close => {
                if s.grasp_offset() <= cfg.grasp_tol {
                    s.grasped = Some(Part::Leg);
                    s.aperture = 0.9 * cfg.leg_diameter;
                } else {
                    s.grasped = None;
                    s.aperture = 0.0;
                }
            }
        }

        s.assembled = s.thread_angle >= cfg.theta_done;

        self.state = s;
        self.last_slip = slip_m * cfg.slip_scale;

        let d = skill::distance(&s, goal, skill, &cfg);
        let arrived = d <= rp.arrival_tol;
        let reward = -rp.r_penalty - d + if arrived { rp.alpha } else { 0.0 };
        let obs = self.observe();
        StepOutcome { state: s, obs, reward, terminated: skill::termination(&s, skill, &cfg) }
    }
}

/// Clips an action to the per-step motion caps: translation by norm,
/// rotation by magnitude.
pub fn clip_action(action: &Action, cfg: &TaskConfig) -> Action {
    let norm = (action.dx * action.dx + action.dy * action.dy).sqrt();
    let (dx, dy) = if norm > cfg.max_step_pos {
        let k = cfg.max_step_pos / norm;
        (action.dx * k, action.dy * k)
    } else {
        (action.dx, action.dy)
    };
    Action {
        dx,
        dy,
        dtheta: action.dtheta.clamp(-cfg.max_step_rot, cfg.max_step_rot),
        gripper: action.gripper,
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

/// Uniform point in a disc of radius `r`.
fn disc(rng: &mut ChaCha8Rng, r: f64) -> (f64, f64) {
    let angle = uniform(rng, -std::f64::consts::PI, std::f64::consts::PI);
    let radius = r * uniform(rng, 0.0, 1.0f64).sqrt();
    (radius * angle.cos(), radius * angle.sin())
}

/// Folded-normal offset vector with magnitude capped at `cap`.
fn grasp_offset_vec(rng: &mut ChaCha8Rng, sigma: f64, cap: f64) -> (f64, f64) {
    let angle = uniform(rng, -std::f64::consts::PI, std::f64::consts::PI);
    let n: f64 = StandardNormal.sample(rng);
    let mag = (n * sigma).abs().min(cap);
    (mag * angle.cos(), mag * angle.sin())
}

/// Pose at distance in `[r_lo, r_hi]` from `center`, position clamped to the
/// `span` box.
fn offset_on_annulus(
    rng: &mut ChaCha8Rng,
    center: &Pose,
    r_lo: f64,
    r_hi: f64,
    span: f64,
    heading: f64,
) -> Pose {
    let angle = uniform(rng, -std::f64::consts::PI, std::f64::consts::PI);
    let radius = uniform(rng, r_lo, r_hi);
    Pose::new(
        (center.x + radius * angle.cos()).clamp(-span, span),
        (center.y + radius * angle.sin()).clamp(-span, span),
        heading,
    )
}

/// Draws a starting state from the initial set of `skill`.
///
/// Sampling cores are kept tighter than [`skill::in_initial_set`] so that
/// membership always holds with margin; the wider membership test is what
/// ties successive skills together.
pub fn sample_initial_state(cfg: &TaskConfig, skill_id: SkillId, rng: &mut ChaCha8Rng) -> WorldState {
    let table = Pose::new(uniform(rng, -0.06, 0.06), uniform(rng, -0.06, 0.06), uniform(rng, -0.4, 0.4));
    let mut state = WorldState {
        table,
        leg: Pose::IDENTITY,
        ee: Pose::IDENTITY,
        aperture: cfg.aperture_max,
        grasped: None,
        thread_angle: 0.0,
        assembled: false,
    };
    let socket = skill::socket_pose(&state, cfg);
    let span = 0.7 * cfg.workspace_half;
    let leg_heading = |rng: &mut ChaCha8Rng| wrap_angle(socket.theta + uniform(rng, -1.0, 1.0));

    match skill_id {
        SkillId::Pick => {
            // Leg on an annulus around the socket, gripper nearby: keeps
            // worst-case approach travel bounded so honest per-skill step
            // caps exist even at conservative speeds.
            let heading = leg_heading(rng);
            state.leg = offset_on_annulus(rng, &socket, 0.08, 0.16, span, heading);
            let (dx, dy) = disc(rng, 0.10);
            state.ee = Pose::new(
                (state.leg.x + dx).clamp(-span, span),
                (state.leg.y + dy).clamp(-span, span),
                uniform(rng, -0.5, 0.5),
            );
        }
        SkillId::Reach => {
            let heading = leg_heading(rng);
            state.leg = offset_on_annulus(rng, &socket, 0.05, 0.14, span, heading);
            let (ox, oy) = grasp_offset_vec(rng, 0.004, 0.8 * cfg.grasp_tol);
            state.ee = Pose::new(state.leg.x + ox, state.leg.y + oy, uniform(rng, -0.5, 0.5));
            state.grasped = Some(Part::Leg);
            state.aperture = 0.9 * cfg.leg_diameter;
        }
        SkillId::Insert => {
            let target = socket.compose(&cfg.approach_offset);
            let (px, py) = disc(rng, 0.9 * 2.0 * cfg.eps_pos);
            let heading = wrap_angle(target.theta + uniform(rng, -0.9, 0.9) * 2.0 * cfg.eps_rot);
            state.leg = Pose::new(target.x + px, target.y + py, heading);
            let (ox, oy) = if uniform(rng, 0.0, 1.0) < 0.7 {
                grasp_offset_vec(rng, 0.002, 0.9 * cfg.regrasp_tol)
            } else {
                let angle = uniform(rng, -std::f64::consts::PI, std::f64::consts::PI);
                let mag = uniform(rng, 1.05, 1.8) * cfg.regrasp_tol;
                let mag = mag.min(0.9 * cfg.grasp_tol);
                (mag * angle.cos(), mag * angle.sin())
            };
            state.ee = Pose::new(state.leg.x + ox, state.leg.y + oy, uniform(rng, -0.5, 0.5));
            state.grasped = Some(Part::Leg);
            state.aperture = 0.9 * cfg.leg_diameter;
        }
        SkillId::Screw | SkillId::Adjust => {
            let partial = match skill_id {
                SkillId::Screw => uniform(rng, 0.0, 1.0) < 0.4,
                _ => uniform(rng, 0.0, 1.0) < 0.5,
            };
            let heading = wrap_angle(socket.theta + uniform(rng, -0.9, 0.9) * cfg.eps_rot);
            if partial {
                // Thread only ever advances in pitch increments.
                let turns = 1 + (uniform(rng, 0.0, 1.0) * 3.0).floor() as u32;
                state.thread_angle = f64::from(turns) * cfg.thread_pitch;
                state.leg = Pose::new(socket.x, socket.y, heading);
            } else {
                let (px, py) = disc(rng, 0.9 * cfg.eps_pos);
                state.leg = Pose::new(socket.x + px, socket.y + py, heading);
            }
            let (ox, oy) = if skill_id == SkillId::Screw {
                grasp_offset_vec(rng, 0.002, 0.9 * cfg.regrasp_tol)
            } else {
                let angle = uniform(rng, -std::f64::consts::PI, std::f64::consts::PI);
                let mag = uniform(rng, 1.1, 1.9) * cfg.regrasp_tol;
                let mag = mag.min(0.9 * cfg.grasp_tol);
                (mag * angle.cos(), mag * angle.sin())
            };
            state.ee = Pose::new(state.leg.x + ox, state.leg.y + oy, uniform(rng, -0.5, 0.5));
            state.grasped = Some(Part::Leg);
            state.aperture = 0.9 * cfg.leg_diameter;
        }
    }
    debug_assert!(skill::in_initial_set(&state, skill_id, cfg));
    state
}

/// True when the observation reports the grasped part sliding against the
/// pads harder than `threshold`.
pub fn slip_violation(obs: &Observation, threshold: f64) -> bool {
    obs.tactile.contact && obs.tactile.slip_flow > threshold
}
