//! Time-parameterized joint trajectories and speed modulation.
//!
//! Nominal motion is planned as proportional trapezoids (see [`profile`]).
//! A running trajectory can be replaced by a stopping trajectory with linear
//! velocity decay, scaled down to a reduced speed with ramp stitching, or
//! accelerated back to full speed. All outputs live on a fixed tick grid.

pub mod executor;
pub mod profile;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::robot::{JointLimits, RobotModel};

pub use executor::TrajectoryExecutor;
pub use profile::{MotionProfile, ProfileHandle, SampledMotion, TaskProfile, TrapezoidProfile};

/// Timing assumptions of the control loop.
#[derive(Clone, Debug, PartialEq)]
pub struct TimingBudget {
    /// Worst-case stop-plan computation time, seconds.
    pub t_calc: f64,
    /// System reaction time assumed by the separation math, seconds.
    pub t_r: f64,
    /// Sample tick, seconds.
    pub tick: f64,
}

impl Default for TimingBudget {
    fn default() -> Self {
        Self {
            t_calc: 0.02,
            t_r: 0.1,
            tick: 0.005,
        }
    }
}

impl TimingBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_calc > 0.0 && self.t_r > 0.0 && self.tick > 0.0) {
            return Err(Error::Config("timing budget entries must be positive".into()));
        }
        if self.t_calc >= self.t_r {
            return Err(Error::Config("t_calc must be below the reaction time".into()));
        }
        Ok(())
    }

    /// Ticks covered by the computation budget (rounded up).
    pub fn calc_ticks(&self) -> usize {
        (self.t_calc / self.tick - 1e-9).ceil().max(1.0) as usize
    }
}

/// Whole microseconds for a tick given in seconds; rejects ticks that do not
/// round-trip, so sample times print exactly with six decimals.
pub(crate) fn tick_microseconds(tick: f64) -> Result<u64> {
    let us = (tick * 1e6).round();
    if !(us >= 1.0) || (us * 1e-6 - tick).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "tick {tick} s is not a whole number of microseconds"
        )));
    }
    Ok(us as u64)
}

pub(crate) fn grid_time(tick_us: u64, k: usize) -> f64 {
    (k as u64 * tick_us) as f64 * 1e-6
}

/// One trajectory sample on the tick grid. `path_time` and `path_rate`
/// locate the sample on the underlying nominal path and record the current
/// velocity scale, which is what makes later speed modulation stitchable.
#[derive(Clone, Debug)]
pub struct TrajectorySample {
    pub t: f64,
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    pub qdd: Vec<f64>,
    pub path_time: f64,
    pub path_rate: f64,
}

/// Fixed-tick joint trajectory with the limits it was planned against.
#[derive(Clone)]
pub struct JointTrajectory {
    tick: f64,
    tick_us: u64,
    samples: Vec<TrajectorySample>,
    pub limits: JointLimits,
    profile: Option<ProfileHandle>,
}

impl std::fmt::Debug for JointTrajectory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JointTrajectory")
            .field("tick", &self.tick)
            .field("samples", &self.samples.len())
            .field("duration", &self.duration())
            .finish()
    }
}

impl JointTrajectory {
    /// Sample an analytic profile at full speed.
    pub fn from_profile(profile: Arc<TaskProfile>, limits: JointLimits, tick: f64) -> Result<Self> {
        let tick_us = tick_microseconds(tick)?;
        let n = (profile.duration() / tick).round() as usize;
        if (n as f64 * tick - profile.duration()).abs() > 1e-6 {
            return Err(Error::InvalidParameter(
                "profile duration is not a whole number of ticks".into(),
            ));
        }
        let mut samples = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let u = (k as f64 * tick).min(profile.duration());
            let (q, qd, qdd) = profile.eval(u);
            samples.push(TrajectorySample {
                t: grid_time(tick_us, k),
                q,
                qd,
                qdd,
                path_time: u,
                path_rate: 1.0,
            });
        }
        Ok(Self {
            tick,
            tick_us,
            samples,
            limits,
            profile: Some(profile),
        })
    }

    /// Build from raw per-tick samples (positions, velocities,
    /// accelerations); used for hand-made trajectories in tests and for
    /// external inputs.
    pub fn from_parts(
        tick: f64,
        limits: JointLimits,
        q: Vec<Vec<f64>>,
        qd: Vec<Vec<f64>>,
        qdd: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let tick_us = tick_microseconds(tick)?;
        if q.is_empty() || q.len() != qd.len() || q.len() != qdd.len() {
            return Err(Error::InvalidParameter(
                "sample arrays must be non-empty and equally sized".into(),
            ));
        }
        let dof = q[0].len();
        if limits.dof() != dof {
            return Err(Error::InvalidParameter("limits do not match sample dof".into()));
        }
        let samples = q
            .into_iter()
            .zip(qd)
            .zip(qdd)
            .enumerate()
            .map(|(k, ((q, qd), qdd))| TrajectorySample {
                t: grid_time(tick_us, k),
                q,
                qd,
                qdd,
                path_time: grid_time(tick_us, k),
                path_rate: 1.0,
            })
            .collect();
        Ok(Self {
            tick,
            tick_us,
            samples,
            limits,
            profile: None,
        })
    }

    pub(crate) fn from_samples_with(
        tick: f64,
        limits: JointLimits,
        samples: Vec<TrajectorySample>,
        profile: Option<ProfileHandle>,
    ) -> Result<Self> {
        let tick_us = tick_microseconds(tick)?;
        if samples.is_empty() {
            return Err(Error::InvalidParameter("empty trajectory".into()));
        }
        Ok(Self {
            tick,
            tick_us,
            samples,
            limits,
            profile,
        })
    }

    pub fn tick(&self) -> f64 {
        self.tick
    }

    pub fn dof(&self) -> usize {
        self.samples[0].q.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map(|s| s.t).unwrap_or(0.0)
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn sample(&self, k: usize) -> &TrajectorySample {
        &self.samples[k.min(self.samples.len() - 1)]
    }

    pub(crate) fn profile_handle(&self) -> Option<ProfileHandle> {
        self.profile.clone()
    }

    /// Index of the earliest sample with `t >= t_target`, if any.
    pub fn index_at_or_after(&self, t_target: f64) -> Option<usize> {
        let k = ((t_target / self.tick) - 1e-9).ceil().max(0.0) as usize;
        (k < self.samples.len()).then_some(k)
    }

    /// Verify velocity and acceleration limits on every sample.
    pub fn check_limits(&self, tol: f64) -> Result<()> {
        for s in &self.samples {
            for j in 0..self.dof() {
                if s.qd[j].abs() > self.limits.velocity[j] + tol {
                    return Err(Error::Invariant(format!(
                        "velocity limit exceeded at t={}: joint {} at {}",
                        s.t,
                        j + 1,
                        s.qd[j]
                    )));
                }
                if s.qdd[j] < self.limits.accel_min[j] - tol
                    || s.qdd[j] > self.limits.accel_max[j] + tol
                {
                    return Err(Error::Invariant(format!(
                        "acceleration limit exceeded at t={}: joint {} at {}",
                        s.t,
                        j + 1,
                        s.qdd[j]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest |central difference - stored velocity| over interior ticks
    /// whose neighbourhood stays within one constant-acceleration piece.
    pub fn max_velocity_inconsistency(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 1..self.samples.len().saturating_sub(1) {
            for j in 0..self.dof() {
                if (self.samples[k - 1].qdd[j] - self.samples[k].qdd[j]).abs() > 1e-9 {
                    continue;
                }
                let central =
                    (self.samples[k + 1].q[j] - self.samples[k - 1].q[j]) / (2.0 * self.tick);
                worst = worst.max((central - self.samples[k].qd[j]).abs());
            }
        }
        worst
    }

    /// CSV dump: `t,q1..qN,qd1..qdN`.
    pub fn to_csv_string(&self) -> String {
        let dof = self.dof();
        let mut out = String::from("t");
        for j in 1..=dof {
            out.push_str(&format!(",q{j}"));
        }
        for j in 1..=dof {
            out.push_str(&format!(",qd{j}"));
        }
        out.push('\n');
        for s in &self.samples {
            out.push_str(&format!("{:.6}", s.t));
            for v in &s.q {
                out.push_str(&format!(",{v}"));
            }
            for v in &s.qd {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Minimal time for one joint to reach zero velocity under its acceleration
/// limits: the most negative acceleration brakes positive velocity, the most
/// positive brakes negative velocity.
pub fn stop_time_per_joint(qd_ref: f64, a_min: f64, a_max: f64) -> Result<f64> {
    if !(a_min < 0.0 && a_max > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "acceleration limits must satisfy a_min < 0 < a_max (got {a_min}, {a_max})"
        )));
    }
    Ok(if qd_ref >= 0.0 {
        (0.0 - qd_ref) / a_min
    } else {
        (0.0 - qd_ref) / a_max
    })
}

/// A stopping trajectory: quadratic positions, linear velocities, all joints
/// reaching zero simultaneously at `t_e` with the binding joint at its
/// maximal deceleration.
#[derive(Clone, Debug)]
pub struct StopPlan {
    pub t_ref: f64,
    pub q_ref: Vec<f64>,
    pub qd_ref: Vec<f64>,
    /// Overall stopping time, the max over per-joint stop times.
    pub t_e: f64,
    /// Per joint (b0, b1, b2) with q(tau) = b0 + b1 tau + b2 tau².
    pub coefficients: Vec<(f64, f64, f64)>,
}

impl StopPlan {
    pub fn position(&self, tau: f64) -> Vec<f64> {
        let tau = tau.clamp(0.0, self.t_e.max(0.0));
        self.coefficients
            .iter()
            .map(|(b0, b1, b2)| b0 + b1 * tau + b2 * tau * tau)
            .collect()
    }

    pub fn velocity(&self, tau: f64) -> Vec<f64> {
        if self.t_e <= 0.0 || tau >= self.t_e {
            return vec![0.0; self.coefficients.len()];
        }
        let tau = tau.max(0.0);
        self.coefficients
            .iter()
            .map(|(_, b1, b2)| b1 + 2.0 * b2 * tau)
            .collect()
    }

    pub fn is_noop(&self) -> bool {
        self.t_e <= 0.0
    }
}

/// Plan a stop for the trajectory executing at `t_now`. The reference state
/// is the earliest sample no sooner than `t_now + t_calc`, so everything the
/// controller has already committed to stays untouched. Returns `None` when
/// `t_now` is already past the trajectory end.
pub fn plan_stop(
    traj: &JointTrajectory,
    t_now: f64,
    budget: &TimingBudget,
) -> Result<Option<StopPlan>> {
    if t_now < -1e-9 {
        return Err(Error::InvalidParameter("t_now before trajectory start".into()));
    }
    if t_now > traj.duration() + 1e-9 {
        return Ok(None);
    }
    let ref_idx = traj
        .index_at_or_after(t_now + budget.t_calc)
        .unwrap_or(traj.len() - 1);
    let r = traj.sample(ref_idx);
    let mut t_e = 0.0f64;
    for j in 0..traj.dof() {
        t_e = t_e.max(stop_time_per_joint(
            r.qd[j],
            traj.limits.accel_min[j],
            traj.limits.accel_max[j],
        )?);
    }
    let coefficients = (0..traj.dof())
        .map(|j| {
            let b2 = if t_e > 0.0 { -r.qd[j] / (2.0 * t_e) } else { 0.0 };
            (r.q[j], r.qd[j], b2)
        })
        .collect();
    Ok(Some(StopPlan {
        t_ref: r.t,
        q_ref: r.q.clone(),
        qd_ref: r.qd.clone(),
        t_e,
        coefficients,
    }))
}

/// Materialize a stop plan: the original trajectory up to the reference
/// state, the quadratic stopping arc, then a short hold.
pub fn apply_stop_plan(traj: &JointTrajectory, plan: &StopPlan) -> Result<JointTrajectory> {
    let ref_idx = traj
        .index_at_or_after(plan.t_ref)
        .ok_or_else(|| Error::InvalidParameter("stop plan reference beyond trajectory".into()))?;
    let mut samples: Vec<TrajectorySample> = traj.samples[..=ref_idx].to_vec();
    let end_idx = ref_idx + ((plan.t_e / traj.tick) + 1e-9).ceil() as usize + 1;
    let decel: Vec<f64> = if plan.t_e > 0.0 {
        plan.qd_ref.iter().map(|v| -v / plan.t_e).collect()
    } else {
        vec![0.0; traj.dof()]
    };
    for k in ref_idx + 1..=end_idx {
        let tau = (k - ref_idx) as f64 * traj.tick;
        let qdd = if tau < plan.t_e { decel.clone() } else { vec![0.0; traj.dof()] };
        samples.push(TrajectorySample {
            t: grid_time(traj.tick_us, k),
            q: plan.position(tau),
            qd: plan.velocity(tau),
            qdd,
            path_time: samples[ref_idx].path_time,
            path_rate: 0.0,
        });
    }
    JointTrajectory::from_samples_with(traj.tick, traj.limits.clone(), samples, traj.profile.clone())
}

/// Trapezoidal point-to-point trajectory through `waypoints`, planned with
/// `vel_limits` and the model's acceleration limits.
pub fn plan_pick_and_place(
    model: &RobotModel,
    waypoints: &[Vec<f64>],
    vel_limits: &[f64],
    budget: &TimingBudget,
) -> Result<JointTrajectory> {
    if waypoints.is_empty() {
        return Err(Error::InvalidParameter("at least one waypoint required".into()));
    }
    for w in waypoints {
        model
            .check_joint_limits(w)
            .map_err(|e| Error::InvalidParameter(format!("unreachable waypoint: {e}")))?;
    }
    if vel_limits.len() != model.limits.dof() {
        return Err(Error::InvalidParameter("vel_limits must cover every joint".into()));
    }
    for (j, v) in vel_limits.iter().enumerate() {
        if !(*v > 0.0) || *v > model.limits.velocity[j] + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "velocity limit for joint {} outside (0, {}]",
                j + 1,
                model.limits.velocity[j]
            )));
        }
    }
    let plan_limits = JointLimits {
        velocity: vel_limits.to_vec(),
        accel_min: model.limits.accel_min.clone(),
        accel_max: model.limits.accel_max.clone(),
    };
    let profile = Arc::new(TaskProfile::point_to_point(
        waypoints,
        &plan_limits,
        &[],
        budget.tick,
    )?);
    JointTrajectory::from_profile(profile, model.limits.clone(), budget.tick)
}

/// Decelerate to `speed_scale` of nominal speed: a linear ramp with the
/// stop-plan slope down to the scaled speed, then the remainder of the path
/// uniformly time-scaled and stitched on without a position jump.
pub fn plan_reduce_speed(
    traj: &JointTrajectory,
    t_now: f64,
    speed_scale: f64,
    budget: &TimingBudget,
) -> Result<JointTrajectory> {
    if !(speed_scale > 0.0 && speed_scale < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "speed scale must lie in (0, 1), got {speed_scale}"
        )));
    }
    modulate(traj, t_now, speed_scale, budget)
}

/// Accelerate back to nominal speed; the mirror image of
/// [`plan_reduce_speed`].
pub fn plan_resume(traj: &JointTrajectory, t_now: f64, budget: &TimingBudget) -> Result<JointTrajectory> {
    modulate(traj, t_now, 1.0, budget)
}

fn modulate(
    traj: &JointTrajectory,
    t_now: f64,
    target_rate: f64,
    budget: &TimingBudget,
) -> Result<JointTrajectory> {
    if t_now < -1e-9 || t_now > traj.duration() + 1e-9 {
        return Err(Error::InvalidParameter("t_now outside trajectory span".into()));
    }
    let profile: ProfileHandle = match traj.profile_handle() {
        Some(p) => p,
        None => Arc::new(SampledMotion::new(
            traj.tick,
            traj.samples.iter().map(|s| s.q.clone()).collect(),
            traj.samples.iter().map(|s| s.qd.clone()).collect(),
            traj.samples.iter().map(|s| s.qdd.clone()).collect(),
        )),
    };
    let mut ex = TrajectoryExecutor::from_plan(
        profile,
        traj.limits.clone(),
        budget,
        traj.samples.clone(),
    )?;
    let ref_idx = traj
        .index_at_or_after(t_now + budget.t_calc)
        .unwrap_or(traj.len() - 1);
    ex.apply_command_at(ref_idx, target_rate);
    ex.run_to_path_end();
    ex.into_trajectory()
}
