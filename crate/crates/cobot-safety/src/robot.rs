//! Kinematic stand-in for the 7-DoF manipulator.
//!
//! A serial chain of revolute joints maps a joint configuration to the 3-D
//! positions of nine monitored keypoints (EE, J7..J1, Base). Only keypoint
//! positions and distances feed the safety pipeline, so the chain is a
//! stylized geometry with the correct total reach rather than a vendor model.

use nalgebra::{Point3, Rotation3, Unit, Vector3};

use crate::error::{Error, Result};
use crate::keypoints::RobotKeypoint;

pub const DOF: usize = 7;

/// Per-joint velocity and acceleration limits.
#[derive(Clone, Debug, PartialEq)]
pub struct JointLimits {
    /// Max |velocity| per joint, rad/s.
    pub velocity: Vec<f64>,
    /// Most negative admissible acceleration per joint, rad/s² (< 0).
    pub accel_min: Vec<f64>,
    /// Most positive admissible acceleration per joint, rad/s² (> 0).
    pub accel_max: Vec<f64>,
}

impl JointLimits {
    pub fn uniform(dof: usize, velocity: f64, accel: f64) -> Self {
        Self {
            velocity: vec![velocity; dof],
            accel_min: vec![-accel; dof],
            accel_max: vec![accel; dof],
        }
    }

    pub fn dof(&self) -> usize {
        self.velocity.len()
    }

    /// Uniformly scaled copy: velocities by `k`, accelerations by `k²`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            velocity: self.velocity.iter().map(|v| v * k).collect(),
            accel_min: self.accel_min.iter().map(|a| a * k * k).collect(),
            accel_max: self.accel_max.iter().map(|a| a * k * k).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.accel_min.len() != self.dof() || self.accel_max.len() != self.dof() {
            return Err(Error::Config("joint limit arrays differ in length".into()));
        }
        for j in 0..self.dof() {
            if !(self.velocity[j] > 0.0) {
                return Err(Error::Config(format!(
                    "joint {j}: velocity limit must be positive"
                )));
            }
            if !(self.accel_min[j] < 0.0 && self.accel_max[j] > 0.0) {
                return Err(Error::Config(format!(
                    "joint {j}: acceleration limits must satisfy a_min < 0 < a_max"
                )));
            }
        }
        Ok(())
    }
}

/// Kinematic model: link offsets, joint axes, limits and reach.
#[derive(Clone, Debug)]
pub struct RobotModel {
    /// Translation from each keypoint frame to the next, expressed in the
    /// preceding frame: Base->J1, J1->J2, ..., J7->EE (8 entries).
    pub link_offsets: Vec<Vector3<f64>>,
    /// Rotation axis of each joint in its local frame (7 entries).
    pub joint_axes: Vec<Unit<Vector3<f64>>>,
    pub joint_lower: Vec<f64>,
    pub joint_upper: Vec<f64>,
    pub limits: JointLimits,
    /// Maximum EE-to-base distance over all configurations, meters.
    pub reach: f64,
}

/// A timestamped joint-space state.
#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    pub t: f64,
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
}

impl JointState {
    pub fn new(model: &RobotModel, t: f64, q: Vec<f64>, qd: Vec<f64>) -> Result<Self> {
        if q.len() != DOF || qd.len() != DOF {
            return Err(Error::InvalidParameter(format!(
                "joint state must have {DOF} entries"
            )));
        }
        model.check_joint_limits(&q)?;
        for (j, v) in qd.iter().enumerate() {
            if v.abs() > model.limits.velocity[j] + 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "joint {j} velocity {v} exceeds limit {}",
                    model.limits.velocity[j]
                )));
            }
        }
        Ok(Self { t, q, qd })
    }
}

impl RobotModel {
    pub fn new(
        link_offsets: Vec<Vector3<f64>>,
        joint_axes: Vec<Unit<Vector3<f64>>>,
        joint_lower: Vec<f64>,
        joint_upper: Vec<f64>,
        limits: JointLimits,
        reach: f64,
    ) -> Result<Self> {
        if link_offsets.len() != DOF + 1 {
            return Err(Error::Config(format!(
                "expected {} link offsets, got {}",
                DOF + 1,
                link_offsets.len()
            )));
        }
        if joint_axes.len() != DOF {
            return Err(Error::Config(format!(
                "expected {DOF} joint axes, got {}",
                joint_axes.len()
            )));
        }
        if joint_lower.len() != DOF || joint_upper.len() != DOF {
            return Err(Error::Config("joint limit arrays must have 7 entries".into()));
        }
        for j in 0..DOF {
            if joint_lower[j] >= joint_upper[j] {
                return Err(Error::Config(format!(
                    "joint {j}: lower limit must be below upper limit"
                )));
            }
        }
        if limits.dof() != DOF {
            return Err(Error::Config("joint limits must have 7 entries".into()));
        }
        limits.validate()?;
        if !(reach > 0.0) {
            return Err(Error::Config("reach must be positive".into()));
        }
        let chain: f64 = link_offsets.iter().map(|o| o.norm()).sum();
        if (chain - reach).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "link offsets sum to {chain} m but reach is configured as {reach} m"
            )));
        }
        Ok(Self {
            link_offsets,
            joint_axes,
            joint_lower,
            joint_upper,
            limits,
            reach,
        })
    }

    pub fn check_joint_limits(&self, q: &[f64]) -> Result<()> {
        if q.len() != DOF {
            return Err(Error::InvalidParameter(format!(
                "expected {DOF} joint positions, got {}",
                q.len()
            )));
        }
        for j in 0..DOF {
            if q[j] < self.joint_lower[j] - 1e-9 || q[j] > self.joint_upper[j] + 1e-9 {
                return Err(Error::JointLimit {
                    joint: j + 1,
                    value: q[j],
                    min: self.joint_lower[j],
                    max: self.joint_upper[j],
                });
            }
        }
        Ok(())
    }

    /// Keypoint positions for configuration `q`, ordered per
    /// [`RobotKeypoint::ALL`] (EE first, Base last). The base keypoint is
    /// the frame origin.
    pub fn forward_keypoints(&self, q: &[f64]) -> Result<Vec<Point3<f64>>> {
        self.check_joint_limits(q)?;
        Ok(self.keypoint_positions_unchecked(q))
    }

    /// Same as [`forward_keypoints`](Self::forward_keypoints) without the
    /// limit check; used internally for finite differencing near bounds.
    pub fn keypoint_positions_unchecked(&self, q: &[f64]) -> Vec<Point3<f64>> {
        // Chain order: Base, J1..J7, EE; then reversed into ALL order.
        let mut positions = Vec::with_capacity(DOF + 2);
        let mut p = Point3::origin();
        let mut r = Rotation3::identity();
        positions.push(p); // Base
        for j in 0..DOF {
            p += r * self.link_offsets[j];
            positions.push(p); // J1..J7 at their joint frames
            r *= Rotation3::from_axis_angle(&self.joint_axes[j], q[j]);
        }
        p += r * self.link_offsets[DOF];
        positions.push(p); // EE

        positions.reverse();
        positions
    }

    /// Convenience: labelled keypoints for `q`.
    pub fn labelled_keypoints(&self, q: &[f64]) -> Result<Vec<(RobotKeypoint, Point3<f64>)>> {
        let pts = self.forward_keypoints(q)?;
        Ok(RobotKeypoint::ALL.iter().copied().zip(pts).collect())
    }

    /// Cartesian EE speed by central finite difference over `dt` seconds
    /// (1 ms default via [`ee_cartesian_speed`]).
    pub fn ee_speed(&self, state: &JointState, dt: f64) -> f64 {
        let h = dt / 2.0;
        let qp: Vec<f64> = state.q.iter().zip(&state.qd).map(|(q, v)| q + v * h).collect();
        let qm: Vec<f64> = state.q.iter().zip(&state.qd).map(|(q, v)| q - v * h).collect();
        let pp = self.keypoint_positions_unchecked(&qp)[RobotKeypoint::Ee.index()];
        let pm = self.keypoint_positions_unchecked(&qm)[RobotKeypoint::Ee.index()];
        (pp - pm).norm() / dt
    }
}

/// Default finite-difference step for Cartesian speed, seconds.
pub const EE_SPEED_DT: f64 = 1e-3;

/// Cartesian EE speed of `state` using the default 1 ms differencing step.
pub fn ee_cartesian_speed(model: &RobotModel, state: &JointState) -> f64 {
    model.ee_speed(state, EE_SPEED_DT)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn model() -> RobotModel {
        Config::default().build_robot_model().unwrap()
    }

    fn random_q(model: &RobotModel, rng: &mut impl rand::Rng) -> Vec<f64> {
        (0..DOF)
            .map(|j| rng.random_range(model.joint_lower[j]..model.joint_upper[j]))
            .collect()
    }

    #[test]
    fn zero_configuration_is_a_straight_vertical_chain() {
        let m = model();
        let pts = m.forward_keypoints(&[0.0; DOF]).unwrap();
        let base = pts[RobotKeypoint::Base.index()];
        let ee = pts[RobotKeypoint::Ee.index()];
        assert_eq!(base, Point3::origin());
        for p in &pts {
            assert!(p.x.abs() < 1e-12 && p.y.abs() < 1e-12, "colinear on z axis");
        }
        let chain: f64 = m.link_offsets.iter().map(|o| o.norm()).sum();
        assert_relative_eq!((ee - base).norm(), chain, epsilon = 1e-12);
    }

    #[test]
    fn ee_never_exceeds_reach() {
        let m = model();
        let mut rng = rand::rngs::mock::StepRng::new(42, 0x9e37_79b9_7f4a_7c15);
        for _ in 0..200 {
            let q = random_q(&m, &mut rng);
            let pts = m.forward_keypoints(&q).unwrap();
            let d = (pts[RobotKeypoint::Ee.index()] - pts[RobotKeypoint::Base.index()]).norm();
            assert!(d <= m.reach + 1e-9, "EE at {d} m exceeds reach {}", m.reach);
        }
    }

    #[test]
    fn base_rotation_rotates_all_keypoints() {
        let m = model();
        let mut q = vec![0.0, 0.9, 0.2, -0.7, 0.1, 0.4, 0.0];
        let before = m.forward_keypoints(&q).unwrap();
        q[0] = std::f64::consts::PI - 0.3; // stay inside the joint-1 limit
        let after = m.forward_keypoints(&q).unwrap();
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), std::f64::consts::PI - 0.3);
        for (a, b) in before.iter().zip(&after) {
            let expected = rot * a;
            assert_relative_eq!((expected - b).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn joint_limit_violation_is_rejected() {
        let m = model();
        let mut q = vec![0.0; DOF];
        q[1] = m.joint_upper[1] + 0.1;
        assert!(matches!(
            m.forward_keypoints(&q),
            Err(Error::JointLimit { joint: 2, .. })
        ));
    }

    #[test]
    fn stationary_state_has_zero_ee_speed() {
        let m = model();
        let s = JointState::new(&m, 0.0, vec![0.1; DOF], vec![0.0; DOF]).unwrap();
        assert_eq!(ee_cartesian_speed(&m, &s), 0.0);
    }

    #[test]
    fn single_revolute_speed_matches_v_equals_r_omega() {
        // One joint spinning at 2 rad/s with the EE at 0.5 m radius: 1.0 m/s.
        let offsets = vec![
            Vector3::zeros(),
            Vector3::zeros(),
            Vector3::zeros(),
            Vector3::zeros(),
            Vector3::zeros(),
            Vector3::zeros(),
            Vector3::zeros(),
            Vector3::new(0.5, 0.0, 0.0),
        ];
        let axes = vec![Vector3::z_axis(); DOF];
        let limits = JointLimits::uniform(DOF, 4.0, 4.0);
        let m = RobotModel::new(offsets, axes, vec![-3.0; DOF], vec![3.0; DOF], limits, 0.5)
            .unwrap();
        let mut qd = vec![0.0; DOF];
        qd[6] = 2.0;
        let s = JointState::new(&m, 0.0, vec![0.0; DOF], qd).unwrap();
        assert_relative_eq!(ee_cartesian_speed(&m, &s), 1.0, epsilon = 1e-6);
        // Finite difference converges as dt shrinks.
        assert_relative_eq!(m.ee_speed(&s, 1e-5), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn adjacent_keypoint_distances_are_rigid() {
        let m = model();
        let mut rng = rand::rngs::mock::StepRng::new(7, 0x9e37_79b9_7f4a_7c15);
        let reference = m.forward_keypoints(&[0.0; DOF]).unwrap();
        for _ in 0..100 {
            let q = random_q(&m, &mut rng);
            let pts = m.forward_keypoints(&q).unwrap();
            for w in 0..pts.len() - 1 {
                let d = (pts[w] - pts[w + 1]).norm();
                let d0 = (reference[w] - reference[w + 1]).norm();
                assert_relative_eq!(d, d0, epsilon = 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn forward_kinematics_is_lipschitz(seed in 0u64..1000, joint in 0usize..DOF, dq in -1e-3f64..1e-3) {
            let m = model();
            let mut rng = rand::rngs::mock::StepRng::new(seed, 0x9e37_79b9_7f4a_7c15);
            let q = random_q(&m, &mut rng);
            let mut q2 = q.clone();
            q2[joint] = (q2[joint] + dq).clamp(m.joint_lower[joint], m.joint_upper[joint]);
            let a = m.keypoint_positions_unchecked(&q);
            let b = m.keypoint_positions_unchecked(&q2);
            let dq_norm: f64 = q.iter().zip(&q2).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            let lipschitz = m.reach * DOF as f64;
            for (pa, pb) in a.iter().zip(&b) {
                prop_assert!((pa - pb).norm() <= lipschitz * dq_norm + 1e-12);
            }
        }

        #[test]
        fn ee_speed_is_nonnegative(seed in 0u64..1000) {
            let m = model();
            let mut rng = rand::rngs::mock::StepRng::new(seed, 0x9e37_79b9_7f4a_7c15);
            let q = random_q(&m, &mut rng);
            let qd: Vec<f64> = (0..DOF).map(|j| rng.random_range(-m.limits.velocity[j]..m.limits.velocity[j])).collect();
            let s = JointState { t: 0.0, q, qd };
            prop_assert!(ee_cartesian_speed(&m, &s) >= 0.0);
        }
    }
}
