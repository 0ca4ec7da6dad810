//! Analytic motion profiles in path time.
//!
//! A [`TaskProfile`] is a sequence of point-to-point moves and dwells. Each
//! move advances all joints along a straight joint-space line with one shared
//! normalized trapezoid, so joint velocities stay proportional throughout a
//! segment and any speed modulation (stopping, scaling) remains on the
//! original path.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::robot::JointLimits;

/// Normalized time-scaling profile: s moves 0 -> 1 with a symmetric
/// trapezoidal (or triangular) rate profile. Phase durations are snapped up
/// to whole ticks so every breakpoint falls on the sample grid.
#[derive(Clone, Debug)]
pub struct TrapezoidProfile {
    pub t_accel: f64,
    pub t_cruise: f64,
    pub peak_rate: f64,
    pub accel: f64,
}

impl TrapezoidProfile {
    /// Plan with normalized rate cap `rate_max` (1/s) and acceleration cap
    /// `accel_max` (1/s²).
    pub fn plan(rate_max: f64, accel_max: f64, tick: f64) -> Result<Self> {
        if !(rate_max > 0.0 && accel_max > 0.0 && tick > 0.0) {
            return Err(Error::InvalidParameter(
                "trapezoid caps and tick must be positive".into(),
            ));
        }
        // Unsnapped minimum-time profile over unit distance.
        let (t_a, t_c) = if rate_max * rate_max / accel_max >= 1.0 {
            ((1.0 / accel_max).sqrt(), 0.0)
        } else {
            let t_a = rate_max / accel_max;
            (t_a, 1.0 / rate_max - t_a)
        };
        let ceil_ticks = |t: f64| -> f64 {
            if t <= 0.0 {
                0.0
            } else {
                (t / tick - 1e-9).ceil().max(1.0) * tick
            }
        };
        let t_accel = ceil_ticks(t_a);
        let t_cruise = ceil_ticks(t_c);
        // Re-solve the rates for the snapped (longer) durations; both end up
        // at or below the requested caps.
        let peak_rate = 1.0 / (t_accel + t_cruise);
        let accel = peak_rate / t_accel;
        Ok(Self {
            t_accel,
            t_cruise,
            peak_rate,
            accel,
        })
    }

    pub fn duration(&self) -> f64 {
        2.0 * self.t_accel + self.t_cruise
    }

    pub fn s(&self, tau: f64) -> f64 {
        let t = tau.clamp(0.0, self.duration());
        if t < self.t_accel {
            0.5 * self.accel * t * t
        } else if t < self.t_accel + self.t_cruise {
            0.5 * self.accel * self.t_accel * self.t_accel + self.peak_rate * (t - self.t_accel)
        } else {
            let r = self.duration() - t;
            1.0 - 0.5 * self.accel * r * r
        }
    }

    pub fn ds(&self, tau: f64) -> f64 {
        let t = tau.clamp(0.0, self.duration());
        if t < self.t_accel {
            self.accel * t
        } else if t < self.t_accel + self.t_cruise {
            self.peak_rate
        } else {
            self.accel * (self.duration() - t)
        }
    }

    pub fn dds(&self, tau: f64) -> f64 {
        if tau < 0.0 || tau >= self.duration() {
            0.0
        } else if tau < self.t_accel {
            self.accel
        } else if tau < self.t_accel + self.t_cruise {
            0.0
        } else {
            -self.accel
        }
    }

    /// Inverse of `s`: the profile time at which path coordinate `s` is
    /// reached. `s` is clamped to [0, 1].
    pub fn time_at_s(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        let s_accel = 0.5 * self.accel * self.t_accel * self.t_accel;
        if s <= s_accel {
            (2.0 * s / self.accel).sqrt()
        } else if s <= s_accel + self.peak_rate * self.t_cruise {
            self.t_accel + (s - s_accel) / self.peak_rate
        } else {
            self.duration() - (2.0 * (1.0 - s) / self.accel).sqrt()
        }
    }
}

#[derive(Clone, Debug)]
pub enum Segment {
    Move {
        start: f64,
        q0: Vec<f64>,
        delta: Vec<f64>,
        trap: TrapezoidProfile,
    },
    Dwell {
        start: f64,
        duration: f64,
        q: Vec<f64>,
    },
}

impl Segment {
    fn start(&self) -> f64 {
        match self {
            Segment::Move { start, .. } | Segment::Dwell { start, .. } => *start,
        }
    }

    fn duration(&self) -> f64 {
        match self {
            Segment::Move { trap, .. } => trap.duration(),
            Segment::Dwell { duration, .. } => *duration,
        }
    }
}

/// Joint-space motion evaluated in path time. Implementations guarantee that
/// positions, velocities and accelerations are mutually consistent.
pub trait MotionProfile: Send + Sync {
    fn dof(&self) -> usize;
    fn duration(&self) -> f64;
    /// (q, qd, qdd) at path time `u`, clamped to the profile span.
    fn eval(&self, u: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>);
    /// True when `u` falls inside a dwell (zero-motion) phase.
    fn in_dwell(&self, u: f64) -> bool;
    /// Path time whose position equals `pos(u_ref) + vel(u_ref) * w`, i.e.
    /// the point reached by moving `w` seconds along the path at the
    /// reference speed. Stays within the current motion segment.
    fn advance_on_path(&self, u_ref: f64, w: f64) -> f64;
}

/// Piecewise moves and dwells built from waypoints.
#[derive(Clone, Debug)]
pub struct TaskProfile {
    dof: usize,
    segments: Vec<Segment>,
    total: f64,
}

impl TaskProfile {
    /// Point-to-point profile through `waypoints` with an optional dwell
    /// after arriving at each waypoint beyond the first. Dwells are rounded
    /// up to whole ticks.
    pub fn point_to_point(
        waypoints: &[Vec<f64>],
        limits: &JointLimits,
        dwell_after: &[f64],
        tick: f64,
    ) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::InvalidParameter("at least one waypoint required".into()));
        }
        let dof = waypoints[0].len();
        if waypoints.iter().any(|w| w.len() != dof) {
            return Err(Error::InvalidParameter("waypoint lengths differ".into()));
        }
        if limits.dof() != dof {
            return Err(Error::InvalidParameter(
                "joint limits do not match waypoint dof".into(),
            ));
        }
        if !dwell_after.is_empty() && dwell_after.len() != waypoints.len() - 1 {
            return Err(Error::InvalidParameter(
                "dwell_after must have one entry per waypoint transition".into(),
            ));
        }
        limits.validate()?;

        let mut segments = Vec::new();
        let mut cursor = 0.0;
        for (i, pair) in waypoints.windows(2).enumerate() {
            let q0 = pair[0].clone();
            let q1 = pair[1].clone();
            let delta: Vec<f64> = q1.iter().zip(&q0).map(|(b, a)| b - a).collect();
            let moved = delta.iter().any(|d| d.abs() > 1e-12);
            if moved {
                let mut rate_max = f64::INFINITY;
                let mut accel_max = f64::INFINITY;
                for j in 0..dof {
                    let d = delta[j].abs();
                    if d > 1e-12 {
                        rate_max = rate_max.min(limits.velocity[j] / d);
                        accel_max =
                            accel_max.min(limits.accel_min[j].abs().min(limits.accel_max[j]) / d);
                    }
                }
                let trap = TrapezoidProfile::plan(rate_max, accel_max, tick)?;
                let dur = trap.duration();
                segments.push(Segment::Move {
                    start: cursor,
                    q0,
                    delta,
                    trap,
                });
                cursor += dur;
            }
            let dwell = dwell_after.get(i).copied().unwrap_or(0.0);
            if dwell > 0.0 {
                let dur = (dwell / tick - 1e-9).ceil().max(1.0) * tick;
                segments.push(Segment::Dwell {
                    start: cursor,
                    duration: dur,
                    q: q1.clone(),
                });
                cursor += dur;
            }
        }
        Ok(Self {
            dof,
            segments,
            total: cursor,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    fn segment_at(&self, u: f64) -> Option<&Segment> {
        if self.segments.is_empty() {
            return None;
        }
        let idx = match self
            .segments
            .binary_search_by(|seg| seg.start().partial_cmp(&u).expect("finite"))
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        // A segment boundary belongs to the following segment, except at the
        // profile end.
        let seg = &self.segments[idx];
        if u >= seg.start() + seg.duration() && idx + 1 < self.segments.len() {
            Some(&self.segments[idx + 1])
        } else {
            Some(seg)
        }
    }
}

impl MotionProfile for TaskProfile {
    fn dof(&self) -> usize {
        self.dof
    }

    fn duration(&self) -> f64 {
        self.total
    }

    fn eval(&self, u: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let Some(seg) = self.segment_at(u.clamp(0.0, self.total)) else {
            return (vec![0.0; self.dof], vec![0.0; self.dof], vec![0.0; self.dof]);
        };
        match seg {
            Segment::Dwell { q, .. } => (q.clone(), vec![0.0; self.dof], vec![0.0; self.dof]),
            Segment::Move {
                start, q0, delta, trap, ..
            } => {
                let tau = (u - start).clamp(0.0, trap.duration());
                let s = trap.s(tau);
                let ds = trap.ds(tau);
                let dds = trap.dds(tau);
                let q = q0.iter().zip(delta).map(|(a, d)| a + d * s).collect();
                let qd = delta.iter().map(|d| d * ds).collect();
                let qdd = delta.iter().map(|d| d * dds).collect();
                (q, qd, qdd)
            }
        }
    }

    fn in_dwell(&self, u: f64) -> bool {
        match self.segment_at(u.clamp(0.0, self.total)) {
            Some(Segment::Dwell { .. }) | None => true,
            Some(Segment::Move { .. }) => false,
        }
    }

    fn advance_on_path(&self, u_ref: f64, w: f64) -> f64 {
        let u_ref = u_ref.clamp(0.0, self.total);
        match self.segment_at(u_ref) {
            Some(Segment::Move {
                start, trap, ..
            }) => {
                let tau = (u_ref - start).clamp(0.0, trap.duration());
                let target = trap.s(tau) + trap.ds(tau) * w;
                start + trap.time_at_s(target)
            }
            _ => u_ref,
        }
    }
}

/// Motion profile reconstructed from uniformly ticked samples; lets the
/// speed-modulation machinery operate on externally supplied trajectories.
/// Evaluation is a per-interval second-order Taylor step, which is exact for
/// sample sets generated from piecewise-quadratic profiles.
pub struct SampledMotion {
    tick: f64,
    q: Vec<Vec<f64>>,
    qd: Vec<Vec<f64>>,
    qdd: Vec<Vec<f64>>,
}

impl SampledMotion {
    pub fn new(tick: f64, q: Vec<Vec<f64>>, qd: Vec<Vec<f64>>, qdd: Vec<Vec<f64>>) -> Self {
        assert!(!q.is_empty(), "sampled motion needs at least one sample");
        Self { tick, q, qd, qdd }
    }

    fn clamp_index(&self, u: f64) -> (usize, f64) {
        if u <= 0.0 {
            return (0, 0.0);
        }
        let k = (u / self.tick).floor() as usize;
        if k >= self.q.len() - 1 {
            return (self.q.len() - 1, 0.0);
        }
        (k, u - k as f64 * self.tick)
    }
}

impl MotionProfile for SampledMotion {
    fn dof(&self) -> usize {
        self.q[0].len()
    }

    fn duration(&self) -> f64 {
        (self.q.len() - 1) as f64 * self.tick
    }

    fn eval(&self, u: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (k, h) = self.clamp_index(u);
        let q = (0..self.dof())
            .map(|j| self.q[k][j] + self.qd[k][j] * h + 0.5 * self.qdd[k][j] * h * h)
            .collect();
        let qd = (0..self.dof())
            .map(|j| self.qd[k][j] + self.qdd[k][j] * h)
            .collect();
        (q, qd, self.qdd[k].clone())
    }

    fn in_dwell(&self, u: f64) -> bool {
        let (k, _) = self.clamp_index(u);
        self.qd[k].iter().all(|v| v.abs() < 1e-9) && self.qdd[k].iter().all(|a| a.abs() < 1e-9)
    }

    fn advance_on_path(&self, u_ref: f64, w: f64) -> f64 {
        let (_, qd_ref, _) = self.eval(u_ref);
        let (binding, v_ref) = qd_ref
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).expect("finite"))
            .unwrap_or((0, 0.0));
        if v_ref.abs() < 1e-12 {
            return u_ref;
        }
        let (q_ref, _, _) = self.eval(u_ref);
        let target = q_ref[binding] + v_ref * w;
        let dir = v_ref.signum();
        // Walk forward sample by sample while the binding joint is still
        // short of the target, then solve the quadratic inside the interval.
        let (mut k, _) = self.clamp_index(u_ref);
        let mut lo = u_ref;
        loop {
            if k + 1 >= self.q.len() {
                return self.duration();
            }
            let next_u = (k + 1) as f64 * self.tick;
            let (q_next, qd_next, _) = self.eval(next_u);
            if (q_next[binding] - target) * dir >= 0.0 {
                // Bisect inside [lo, next_u]; the interval is tick-sized so a
                // short bisection reaches fp precision.
                let mut a = lo;
                let mut b = next_u;
                for _ in 0..64 {
                    let m = 0.5 * (a + b);
                    let (qm, _, _) = self.eval(m);
                    if (qm[binding] - target) * dir >= 0.0 {
                        b = m;
                    } else {
                        a = m;
                    }
                }
                return 0.5 * (a + b);
            }
            if qd_next[binding] * dir <= 0.0 {
                // Direction reversed before reaching the target: clamp here.
                return next_u;
            }
            lo = next_u;
            k += 1;
        }
    }
}

/// Shared handle to any motion profile.
pub type ProfileHandle = Arc<dyn MotionProfile>;
