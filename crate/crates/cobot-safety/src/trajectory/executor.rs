//! Tick-by-tick execution of a motion profile with speed modulation.
//!
//! The executor owns the currently committed sample plan. Speed commands
//! rewrite the plan from a reference state at least `t_calc` in the future:
//! a stop replaces the remainder with the quadratic stopping arc, a rate
//! change ramps the path rate linearly and then tracks the nominal path at
//! the new rate. Each sample records its path time and path rate, so any
//! later command can stitch on without position or velocity jumps.

use crate::error::{Error, Result};
use crate::robot::JointLimits;
use crate::trajectory::profile::ProfileHandle;
use crate::trajectory::{
    grid_time, stop_time_per_joint, tick_microseconds, JointTrajectory, TimingBudget,
    TrajectorySample,
};

enum GenPhase {
    /// Follow the nominal path at `gen_rate`, ramping toward the target.
    Track,
    /// Quadratic stopping arc from a captured reference state.
    StopPoly {
        q_ref: Vec<f64>,
        qd_ref: Vec<f64>,
        u_ref: f64,
        rate_ref: f64,
        t_e: f64,
        next_tau: f64,
    },
    /// Stationary; `u` is the frozen path time.
    Hold { q: Vec<f64>, u: f64 },
}

pub struct TrajectoryExecutor {
    profile: ProfileHandle,
    limits: JointLimits,
    tick: f64,
    tick_us: u64,
    calc_ticks: usize,
    plan: Vec<TrajectorySample>,
    phase: GenPhase,
    gen_u: f64,
    gen_rate: f64,
    ramp_slope: f64,
    target: f64,
}

impl TrajectoryExecutor {
    pub fn new(
        profile: ProfileHandle,
        limits: JointLimits,
        budget: &TimingBudget,
        initial_rate: f64,
    ) -> Result<Self> {
        budget.validate()?;
        let tick_us = tick_microseconds(budget.tick)?;
        if limits.dof() != profile.dof() {
            return Err(Error::Config("limits do not match profile dof".into()));
        }
        let phase = if initial_rate > 0.0 {
            GenPhase::Track
        } else {
            let (q, _, _) = profile.eval(0.0);
            GenPhase::Hold { q, u: 0.0 }
        };
        Ok(Self {
            profile,
            limits,
            tick: budget.tick,
            tick_us,
            calc_ticks: budget.calc_ticks(),
            plan: Vec::new(),
            phase,
            gen_u: 0.0,
            gen_rate: initial_rate,
            ramp_slope: 0.0,
            target: initial_rate,
        })
    }

    /// Executor seeded with an existing committed plan; generation continues
    /// past its last sample.
    pub fn from_plan(
        profile: ProfileHandle,
        limits: JointLimits,
        budget: &TimingBudget,
        plan: Vec<TrajectorySample>,
    ) -> Result<Self> {
        let mut ex = Self::new(profile, limits, budget, 1.0)?;
        if let Some(last) = plan.last() {
            ex.gen_u = last.path_time + last.path_rate * ex.tick;
            ex.gen_rate = last.path_rate;
            ex.target = last.path_rate;
            ex.phase = GenPhase::Track;
        }
        ex.plan = plan;
        Ok(ex)
    }

    pub fn tick(&self) -> f64 {
        self.tick
    }

    pub fn target_rate(&self) -> f64 {
        self.target
    }

    pub fn path_duration(&self) -> f64 {
        self.profile.duration()
    }

    /// The committed sample for tick `k`, generating as needed.
    pub fn sample(&mut self, k: usize) -> &TrajectorySample {
        self.extend_to(k);
        &self.plan[k]
    }

    /// True once the sample at tick `k` has reached the end of the path.
    pub fn cycle_complete(&mut self, k: usize) -> bool {
        let duration = self.profile.duration();
        self.sample(k).path_time >= duration - 1e-9
    }

    /// Command a new speed target (1.0 full, scale in (0,1) reduced, 0.0
    /// stop), observed at tick `now_k`. The plan is rewritten from the first
    /// tick at least `t_calc` ahead; everything before is already committed.
    pub fn apply_command(&mut self, target_rate: f64, now_k: usize) {
        if (target_rate - self.target).abs() < 1e-12 {
            return;
        }
        self.regenerate(now_k + self.calc_ticks, target_rate);
    }

    /// Like [`apply_command`](Self::apply_command) with an explicit
    /// reference tick.
    pub fn apply_command_at(&mut self, ref_k: usize, target_rate: f64) {
        self.regenerate(ref_k, target_rate);
    }

    /// Rewind the path to its start for the next task cycle, keeping the
    /// committed history up to `now_k` intact.
    pub fn restart_cycle(&mut self, now_k: usize) {
        self.extend_to(now_k);
        self.plan.truncate(now_k + 1);
        if self.target > 0.0 {
            self.phase = GenPhase::Track;
            self.gen_rate = self.target;
            self.gen_u = self.target * self.tick;
            self.ramp_slope = 0.0;
        } else {
            let (q, _, _) = self.profile.eval(0.0);
            self.phase = GenPhase::Hold { q, u: 0.0 };
            self.gen_rate = 0.0;
            self.gen_u = 0.0;
        }
    }

    /// Generate until the plan reaches the end of the path; errors if the
    /// target rate cannot get there.
    pub fn run_to_path_end(&mut self) -> Result<()> {
        let duration = self.profile.duration();
        let cap = self.plan.len()
            + ((duration / self.tick) / self.target.max(0.05)) as usize
            + 4096;
        while self
            .plan
            .last()
            .map(|s| s.path_time < duration - 1e-9)
            .unwrap_or(true)
        {
            if self.plan.len() > cap {
                return Err(Error::Invariant(
                    "speed modulation failed to reach the path end".into(),
                ));
            }
            self.extend_one();
        }
        Ok(())
    }

    pub fn into_trajectory(self) -> Result<JointTrajectory> {
        JointTrajectory::from_samples_with(
            self.tick,
            self.limits.clone(),
            self.plan,
            Some(self.profile),
        )
    }

    fn extend_to(&mut self, k: usize) {
        while self.plan.len() <= k {
            self.extend_one();
        }
    }

    fn regenerate(&mut self, ref_k: usize, target_rate: f64) {
        self.extend_to(ref_k);
        let ref_s = self.plan[ref_k].clone();
        self.plan.truncate(ref_k); // the next emission recreates tick ref_k
        self.target = target_rate;
        if target_rate <= 0.0 {
            let moving = ref_s.qd.iter().any(|v| v.abs() > 1e-12);
            if !moving {
                self.phase = GenPhase::Hold {
                    q: ref_s.q,
                    u: ref_s.path_time,
                };
                self.gen_rate = 0.0;
                self.gen_u = ref_s.path_time;
                return;
            }
            let mut t_e = 0.0f64;
            for j in 0..self.limits.dof() {
                t_e = t_e.max(
                    stop_time_per_joint(
                        ref_s.qd[j],
                        self.limits.accel_min[j],
                        self.limits.accel_max[j],
                    )
                    .expect("validated limits"),
                );
            }
            self.phase = GenPhase::StopPoly {
                q_ref: ref_s.q,
                qd_ref: ref_s.qd,
                u_ref: ref_s.path_time,
                rate_ref: ref_s.path_rate,
                t_e,
                next_tau: 0.0,
            };
            return;
        }
        // Rate ramp: slope chosen so the binding joint uses its full
        // acceleration budget in the ramp direction.
        let (_, qd_prof, _) = self.profile.eval(ref_s.path_time);
        let rising = target_rate > ref_s.path_rate;
        let mut t_full = 0.0f64;
        for j in 0..self.limits.dof() {
            let a = if rising {
                self.limits.accel_max[j]
            } else {
                self.limits.accel_min[j].abs()
            };
            t_full = t_full.max(qd_prof[j].abs() / a);
        }
        self.phase = GenPhase::Track;
        self.gen_u = ref_s.path_time;
        if t_full < 1e-9 {
            // At rest on the path (dwell or waypoint): adopt the rate
            // directly; the nominal profile itself accelerates from zero.
            self.gen_rate = target_rate;
            self.ramp_slope = 0.0;
        } else {
            self.gen_rate = ref_s.path_rate;
            self.ramp_slope = 1.0 / t_full;
        }
    }

    fn push(&mut self, q: Vec<f64>, qd: Vec<f64>, qdd: Vec<f64>, path_time: f64, path_rate: f64) {
        let t = grid_time(self.tick_us, self.plan.len());
        self.plan.push(TrajectorySample {
            t,
            q,
            qd,
            qdd,
            path_time,
            path_rate,
        });
    }

    fn extend_one(&mut self) {
        let dof = self.limits.dof();
        let tick = self.tick;
        match &mut self.phase {
            GenPhase::Hold { q, u } => {
                let (q, u) = (q.clone(), *u);
                self.push(q, vec![0.0; dof], vec![0.0; dof], u, 0.0);
            }
            GenPhase::StopPoly {
                q_ref,
                qd_ref,
                u_ref,
                rate_ref,
                t_e,
                next_tau,
            } => {
                let tau = *next_tau;
                *next_tau += tick;
                if tau >= *t_e - 1e-12 {
                    let w_end = *t_e / 2.0;
                    let q_end: Vec<f64> = q_ref
                        .iter()
                        .zip(qd_ref.iter())
                        .map(|(q, v)| q + v * w_end)
                        .collect();
                    let u_end = self.profile.advance_on_path(*u_ref, *rate_ref * w_end);
                    self.phase = GenPhase::Hold {
                        q: q_end.clone(),
                        u: u_end,
                    };
                    self.push(q_end, vec![0.0; dof], vec![0.0; dof], u_end, 0.0);
                } else {
                    let te = *t_e;
                    let w = tau - tau * tau / (2.0 * te);
                    let factor = 1.0 - tau / te;
                    let q: Vec<f64> = q_ref
                        .iter()
                        .zip(qd_ref.iter())
                        .map(|(q, v)| q + v * w)
                        .collect();
                    let qd: Vec<f64> = qd_ref.iter().map(|v| v * factor).collect();
                    let qdd: Vec<f64> = qd_ref.iter().map(|v| -v / te).collect();
                    let u = self.profile.advance_on_path(*u_ref, *rate_ref * w);
                    // Velocity scale relative to the nominal path at u, taken
                    // from the fastest reference joint.
                    let (binding, v_bind) = qd_ref
                        .iter()
                        .copied()
                        .enumerate()
                        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).expect("finite"))
                        .expect("non-empty");
                    let (_, qd_prof, _) = self.profile.eval(u);
                    let rate = if qd_prof[binding].abs() > 1e-9 {
                        (v_bind * factor / qd_prof[binding]).abs()
                    } else {
                        0.0
                    };
                    self.push(q, qd, qdd, u, rate);
                }
            }
            GenPhase::Track => {
                let duration = self.profile.duration();
                let u = self.gen_u;
                let rate = self.gen_rate;
                if u >= duration - 1e-9 {
                    let (q, _, _) = self.profile.eval(duration);
                    self.phase = GenPhase::Hold {
                        q: q.clone(),
                        u: duration,
                    };
                    self.push(q, vec![0.0; dof], vec![0.0; dof], duration, 0.0);
                    return;
                }
                if self.profile.in_dwell(u) {
                    // Dwells consume wall time one-to-one regardless of the
                    // speed scale; rate changes are free while stationary.
                    self.gen_rate = self.target;
                    let (q, _, _) = self.profile.eval(u);
                    let r = self.gen_rate;
                    self.push(q, vec![0.0; dof], vec![0.0; dof], u, r);
                    self.gen_u = u + tick;
                    return;
                }
                let (q, qd_prof, qdd_prof) = self.profile.eval(u);
                let wanted = if (rate - self.target).abs() < 1e-12 {
                    0.0
                } else if rate < self.target {
                    self.ramp_slope
                } else {
                    -self.ramp_slope
                };
                // Per-joint acceleration budget left after the nominal
                // profile term caps the rate slope.
                let mut lo = f64::NEG_INFINITY;
                let mut hi = f64::INFINITY;
                for j in 0..dof {
                    let v = qd_prof[j];
                    if v.abs() < 1e-9 {
                        continue;
                    }
                    let nominal = rate * rate * qdd_prof[j];
                    let rem_min = self.limits.accel_min[j] - nominal;
                    let rem_max = self.limits.accel_max[j] - nominal;
                    if v > 0.0 {
                        lo = lo.max(rem_min / v);
                        hi = hi.min(rem_max / v);
                    } else {
                        lo = lo.max(rem_max / v);
                        hi = hi.min(rem_min / v);
                    }
                }
                if lo > hi {
                    let mid = 0.5 * (lo + hi);
                    lo = mid;
                    hi = mid;
                }
                let mut sdd = wanted.clamp(lo.min(0.0), hi.max(0.0));
                let mut rate_next = rate + sdd * tick;
                let crossed = (rate < self.target && rate_next >= self.target)
                    || (rate > self.target && rate_next <= self.target);
                if crossed {
                    rate_next = self.target;
                    sdd = (rate_next - rate) / tick;
                }
                let qd: Vec<f64> = qd_prof.iter().map(|v| v * rate).collect();
                let qdd: Vec<f64> = qd_prof
                    .iter()
                    .zip(qdd_prof.iter())
                    .map(|(v, a)| sdd * v + rate * rate * a)
                    .collect();
                self.push(q, qd, qdd, u, rate);
                self.gen_u = u + 0.5 * (rate + rate_next) * tick;
                self.gen_rate = rate_next;
            }
        }
    }
}
