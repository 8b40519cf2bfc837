//! SE(2) poses and the handful of frame operations the simulator needs.

use serde::{Deserialize, Serialize};

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut t = theta % two_pi;
    if t <= -std::f64::consts::PI {
        t += two_pi;
    } else if t > std::f64::consts::PI {
        t -= two_pi;
    }
    t
}

/// Signed shortest rotation from `from` to `to`, in `(-pi, pi]`.
pub fn ang_diff(to: f64, from: f64) -> f64 {
    wrap_angle(to - from)
}

/// A planar rigid-body pose: position in meters, heading in radians.
///
/// `theta` is kept in `(-pi, pi]` by every constructor and operation here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub const IDENTITY: Pose = Pose { x: 0.0, y: 0.0, theta: 0.0 };

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose { x, y, theta: wrap_angle(theta) }
    }

    /// Composition `self * rhs`: interprets `rhs` in this pose's frame and
    /// returns it in the parent frame.
    pub fn compose(&self, rhs: &Pose) -> Pose {
        let (s, c) = self.theta.sin_cos();
        Pose {
            x: self.x + c * rhs.x - s * rhs.y,
            y: self.y + s * rhs.x + c * rhs.y,
            theta: wrap_angle(self.theta + rhs.theta),
        }
    }

    /// Inverse transform: `self.inverse().compose(self) == IDENTITY`.
    pub fn inverse(&self) -> Pose {
        let (s, c) = self.theta.sin_cos();
        Pose {
            x: -(c * self.x + s * self.y),
            y: -(-s * self.x + c * self.y),
            theta: wrap_angle(-self.theta),
        }
    }

    /// `other` expressed in this pose's frame: `self.relative_to(other)` is
    /// the `r` with `other == self * r`.
    pub fn relative_of(&self, other: &Pose) -> Pose {
        self.inverse().compose(other)
    }

    /// Euclidean distance between the two positions.
    pub fn position_distance(&self, other: &Pose) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    /// Magnitude of the shortest rotation between the two headings.
    pub fn heading_distance(&self, other: &Pose) -> f64 {
        ang_diff(other.theta, self.theta).abs()
    }

    /// Translates by a world-frame delta and rotates by `dtheta`.
    pub fn offset(&self, dx: f64, dy: f64, dtheta: f64) -> Pose {
        Pose::new(self.x + dx, self.y + dy, self.theta + dtheta)
    }

    /// Rotates this pose's position about `pivot` by `dtheta`, and adds
    /// `dtheta` to the heading. This is how a grasped body moves when the
    /// gripper rotates in place.
    pub fn rotated_about(&self, pivot: (f64, f64), dtheta: f64) -> Pose {
        let (s, c) = dtheta.sin_cos();
        let rx = self.x - pivot.0;
        let ry = self.y - pivot.1;
        Pose {
            x: pivot.0 + c * rx - s * ry,
            y: pivot.1 + s * rx + c * ry,
            theta: wrap_angle(self.theta + dtheta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn wrap_angle_covers_boundaries() {
        assert!(close(wrap_angle(std::f64::consts::PI), std::f64::consts::PI));
        assert!(close(wrap_angle(-std::f64::consts::PI), std::f64::consts::PI));
        assert!(close(wrap_angle(3.0 * std::f64::consts::PI), std::f64::consts::PI));
        assert!(close(wrap_angle(0.0), 0.0));
    }

    #[test]
    fn compose_then_relative_roundtrips() {
        let a = Pose::new(0.1, -0.2, 0.7);
        let b = Pose::new(-0.05, 0.3, -2.9);
        let c = a.compose(&b);
        let r = a.relative_of(&c);
        assert!(close(r.x, b.x) && close(r.y, b.y) && close(r.theta, b.theta));
    }

    #[test]
    fn inverse_is_identity() {
        let a = Pose::new(0.02, 0.15, 2.2);
        let i = a.inverse().compose(&a);
        assert!(close(i.x, 0.0) && close(i.y, 0.0) && close(i.theta, 0.0));
    }

    #[test]
    fn rotation_about_pivot_preserves_pivot_distance() {
        let p = Pose::new(0.1, 0.1, 0.0);
        let q = p.rotated_about((0.05, 0.05), 1.3);
        let d0 = ((p.x - 0.05f64).powi(2) + (p.y - 0.05f64).powi(2)).sqrt();
        let d1 = ((q.x - 0.05f64).powi(2) + (q.y - 0.05f64).powi(2)).sqrt();
        assert!((d0 - d1).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn wrapped_angles_stay_in_range(t in -50.0f64..50.0) {
            let w = wrap_angle(t);
            prop_assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
        }

        #[test]
        fn ang_diff_is_antisymmetric_mod_wrap(a in -6.0f64..6.0, b in -6.0f64..6.0) {
            let d1 = ang_diff(a, b);
            let d2 = ang_diff(b, a);
            // Equal magnitudes except at the pi boundary, where both map to pi.
            prop_assert!((d1 + d2).abs() < 1e-9 || (d1.abs() - std::f64::consts::PI).abs() < 1e-9);
        }

        #[test]
        fn compose_inverse_roundtrip(x in -0.5f64..0.5, y in -0.5f64..0.5, t in -3.0f64..3.0) {
            let p = Pose::new(x, y, t);
            let r = p.compose(&p.inverse());
            prop_assert!(r.x.abs() < 1e-12 && r.y.abs() < 1e-12 && r.theta.abs() < 1e-12);
        }
    }
}
