//! Task geometry, motion limits, and reward constants.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::pose::Pose;
use crate::Result;

/// The two assembly targets. They share the skill set and differ only in
/// geometry: socket placement, seat orientation, leg shaft diameter, and
/// thread parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Furniture {
    SquareTable,
    Stool,
}

impl Furniture {
    pub fn parse(name: &str) -> Result<Furniture> {
        match name {
            "square_table" => Ok(Furniture::SquareTable),
            "stool" => Ok(Furniture::Stool),
            other => Err(Error::Config(format!(
                "unknown furniture '{other}' (expected 'square_table' or 'stool')"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Furniture::SquareTable => "square_table",
            Furniture::Stool => "stool",
        }
    }
}

/// Static description of one assembly task instance.
///
/// Distances are meters, angles radians. Defaults are listed in the README's
/// configuration table; tests pin against these values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskConfig {
    pub furniture: Furniture,
    /// Vision position noise std in meters. The only stochastic element of
    /// the simulator.
    pub noise_sigma: f64,
    /// Heading noise std per meter of position noise: std_rot = noise_sigma
    /// * rot_noise_per_m.
    pub rot_noise_per_m: f64,
    /// Reachable square is `[-workspace_half, workspace_half]^2`.
    pub workspace_half: f64,
    /// Per-step translation cap (norm of (dx, dy)).
    pub max_step_pos: f64,
    /// Per-step rotation cap.
    pub max_step_rot: f64,
    /// Position tolerance for seating the leg in the socket.
    pub eps_pos: f64,
    /// Heading tolerance for seating the leg in the socket.
    pub eps_rot: f64,
    /// Socket feature frame expressed in the table frame; its heading is the
    /// thread start orientation the leg must match.
    pub socket_offset: Pose,
    /// Pre-insertion staging frame expressed in the socket frame.
    pub approach_offset: Pose,
    pub leg_diameter: f64,
    /// Thread engagement gained per qualifying rotation step.
    pub thread_pitch: f64,
    /// Thread engagement at which the assembly is complete.
    pub theta_done: f64,
    /// Fully open gripper aperture.
    pub aperture_max: f64,
    /// A Close command attaches the leg when the gripper center is within
    /// this distance of the shaft.
    pub grasp_tol: f64,
    /// Grasp offsets above this slip under thread torque; also the pass
    /// threshold for a re-centered grasp.
    pub regrasp_tol: f64,
    /// Distance weight for heading error, meters per radian.
    pub w_rot: f64,
    /// Distance weight for remaining thread angle, meters per radian.
    pub w_thread: f64,
    /// Fraction of `max_step_rot` a rotation step must exceed to engage the
    /// thread.
    pub min_rot_step: f64,
    /// Converts blocked part motion in meters into slip-flow units.
    pub slip_scale: f64,
}

impl TaskConfig {
    pub fn square_table() -> Self {
        TaskConfig {
            furniture: Furniture::SquareTable,
            noise_sigma: 0.002,
            rot_noise_per_m: 10.0,
            workspace_half: 0.25,
            max_step_pos: 0.01,
            max_step_rot: 0.1,
            eps_pos: 0.005,
            eps_rot: 0.05,
            socket_offset: Pose::new(0.11, 0.07, 0.5),
            approach_offset: Pose::new(-0.03, 0.0, 0.0),
            leg_diameter: 0.016,
            // Dyadic values so repeated per-step accumulation lands on
            // theta_done exactly: 6 * 0.375 == 2.25 in f64.
            thread_pitch: 0.375,
            theta_done: 2.25,
            aperture_max: 0.08,
            grasp_tol: 0.012,
            regrasp_tol: 0.006,
            w_rot: 0.05,
            w_thread: 0.05,
            min_rot_step: 0.2,
            slip_scale: 1000.0,
        }
    }

    /// Same skills, different geometry: the socket sits elsewhere on the
    /// plate with a different thread-start orientation, the legs are thicker,
    /// and the thread is finer.
    pub fn stool() -> Self {
        TaskConfig {
            furniture: Furniture::Stool,
            socket_offset: Pose::new(-0.09, 0.10, -0.4),
            leg_diameter: 0.022,
            // Finer thread, same dyadic exactness: 6 * 0.3125 == 1.875.
            thread_pitch: 0.3125,
            theta_done: 1.875,
            ..TaskConfig::square_table()
        }
    }

    pub fn for_furniture(furniture: Furniture) -> Self {
        match furniture {
            Furniture::SquareTable => TaskConfig::square_table(),
            Furniture::Stool => TaskConfig::stool(),
        }
    }

    /// Checks the numeric fields hold values the simulator can work with.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("workspace_half", self.workspace_half),
            ("max_step_pos", self.max_step_pos),
            ("max_step_rot", self.max_step_rot),
            ("eps_pos", self.eps_pos),
            ("eps_rot", self.eps_rot),
            ("leg_diameter", self.leg_diameter),
            ("thread_pitch", self.thread_pitch),
            ("theta_done", self.theta_done),
            ("aperture_max", self.aperture_max),
            ("grasp_tol", self.grasp_tol),
            ("regrasp_tol", self.regrasp_tol),
            ("w_rot", self.w_rot),
            ("w_thread", self.w_thread),
            ("slip_scale", self.slip_scale),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("task.{name} must be finite and > 0, got {v}")));
            }
        }
        if self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return Err(Error::Config(format!(
                "task.noise_sigma must be finite and >= 0, got {}",
                self.noise_sigma
            )));
        }
        if self.regrasp_tol >= self.grasp_tol {
            return Err(Error::Config(
                "task.regrasp_tol must be smaller than task.grasp_tol".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.min_rot_step) {
            return Err(Error::Config(format!(
                "task.min_rot_step must be in [0, 1), got {}",
                self.min_rot_step
            )));
        }
        Ok(())
    }
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig::square_table()
    }
}

/// Constants of the per-step reward
/// `r = -r_penalty - d(state, goal) + alpha * 1[d <= arrival_tol]`.
///
/// `alpha` is sized so a successful phase nets a positive return while an
/// extra step of hunting near the goal still costs more than the arrival
/// band pays; if it were much larger, lingering in the band would out-earn
/// finishing. `arrival_tol` matches the seating position tolerance: an exact
/// hit (distance zero) is measure-zero in continuous space, so the indicator
/// needs a band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    pub r_penalty: f64,
    pub alpha: f64,
    pub arrival_tol: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams { r_penalty: 0.1, alpha: 1.0, arrival_tol: 0.005 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TaskConfig::square_table().validate().unwrap();
        TaskConfig::stool().validate().unwrap();
    }

    #[test]
    fn unknown_furniture_is_a_config_error() {
        let err = Furniture::parse("bookshelf").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn stool_differs_only_in_geometry() {
        let table = TaskConfig::square_table();
        let stool = TaskConfig::stool();
        assert_ne!(stool.socket_offset, table.socket_offset);
        assert_ne!(stool.leg_diameter, table.leg_diameter);
        assert_ne!(stool.thread_pitch, table.thread_pitch);
        assert_eq!(stool.eps_pos, table.eps_pos);
        assert_eq!(stool.max_step_pos, table.max_step_pos);
        assert_eq!(stool.noise_sigma, table.noise_sigma);
    }

    #[test]
    fn bad_values_are_rejected() {
        let mut cfg = TaskConfig::square_table();
        cfg.eps_pos = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = TaskConfig::square_table();
        cfg.regrasp_tol = cfg.grasp_tol;
        assert!(cfg.validate().is_err());
    }
}
