//! World state, observations, and actions for the planar assembly task.

use serde::{Deserialize, Serialize};

use crate::pose::Pose;

/// The single movable part in the scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Part {
    Leg,
}

/// Discrete gripper command carried by an action.
///
/// The policy head emits a continuous logit for this slot; it is discretized
/// with [`Action::gripper_from_logit`] at execution time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GripperCmd {
    Open,
    Hold,
    Close,
}

impl GripperCmd {
    /// Encoding used for action tokens and regression targets.
    pub fn logit(self) -> f64 {
        match self {
            GripperCmd::Open => -1.0,
            GripperCmd::Hold => 0.0,
            GripperCmd::Close => 1.0,
        }
    }
}

/// One control step: a world-frame end-effector displacement, a rotation,
/// and a gripper command. Displacements beyond the per-step caps are clipped
/// by the simulator, not rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
    pub gripper: GripperCmd,
}

impl Action {
    pub const HOLD: Action = Action { dx: 0.0, dy: 0.0, dtheta: 0.0, gripper: GripperCmd::Hold };

    pub fn new(dx: f64, dy: f64, dtheta: f64, gripper: GripperCmd) -> Self {
        Action { dx, dy, dtheta, gripper }
    }

    /// Thresholds a continuous gripper logit into a command. The dead zone
    /// around zero maps to `Hold` so a regression head that hovers near its
    /// targets produces clean commands.
    pub fn gripper_from_logit(logit: f64) -> GripperCmd {
        if logit >= 0.5 {
            GripperCmd::Close
        } else if logit <= -0.5 {
            GripperCmd::Open
        } else {
            GripperCmd::Hold
        }
    }
}

/// Full simulator state. Everything downstream of the simulator sees only
/// [`Observation`]; the true state is kept for termination checks, reward
/// labeling, and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    /// Tabletop frame.
    pub table: Pose,
    /// Leg shaft frame; doubles as the grasp feature and the insertion
    /// feature (the shaft is vertical in this top-down view).
    pub leg: Pose,
    /// End-effector frame.
    pub ee: Pose,
    /// Gripper opening in meters.
    pub aperture: f64,
    /// Which part the gripper holds, if any.
    pub grasped: Option<Part>,
    /// Accumulated thread engagement in radians; `> 0` pins the leg to the
    /// socket.
    pub thread_angle: f64,
    /// True exactly when `thread_angle >= theta_done`.
    pub assembled: bool,
}

impl WorldState {
    pub fn is_grasped(&self) -> bool {
        self.grasped.is_some()
    }

    /// Distance between the gripper center and the leg shaft; while grasped
    /// this is the grasp offset that decides whether screwing slips.
    pub fn grasp_offset(&self) -> f64 {
        self.ee.position_distance(&self.leg)
    }
}

/// Joint-side sensing: exact end-effector pose and gripper opening.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proprio {
    pub ee: Pose,
    pub aperture: f64,
}

/// Camera-side pose estimates. `table_est` tracks the table's socket feature
/// frame (the fiducial sits next to the hole) and `leg_est` tracks the leg
/// shaft frame, so the estimates stay meaningful when the furniture geometry
/// changes. Position noise has std `noise_sigma`; heading noise std scales as
/// `noise_sigma * rot_noise_per_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vision {
    pub table_est: Pose,
    pub leg_est: Pose,
    /// Reserved dropout flag; the current simulator always reports `true`.
    pub valid: bool,
}

/// Gripper-pad sensing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tactile {
    pub contact: bool,
    /// Unitless squeeze force, about 1.0 for a settled grasp.
    pub normal_force: f64,
    /// Optical-flow magnitude of the part slipping against the pads during
    /// the last step. Zero whenever nothing blocked the commanded motion.
    pub slip_flow: f64,
}

/// Everything a policy is allowed to see at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub proprio: Proprio,
    pub vision: Vision,
    pub tactile: Tactile,
}
