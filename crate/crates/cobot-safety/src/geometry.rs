//! Separation-distance and impact-limit numerics.
//!
//! Everything here is a pure function of its parameters: the protective
//! separation distance and its terms, the transient-contact speed limit from
//! the reduced two-body mass, keypoint bounding-sphere compensation tables,
//! and the per-pair separation matrices combining all of them.

use std::collections::BTreeMap;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::keypoints::{BodyClass, HumanKeypoint, RobotKeypoint};
use crate::operator::KeypointFrame;

/// Inputs to the protective separation distance.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparationParams {
    /// Directed human walking speed, m/s.
    pub human_speed: f64,
    /// Maximum robot (EE) speed, m/s.
    pub robot_max_speed: f64,
    /// Average robot speed over the stopping motion, m/s.
    pub robot_avg_speed: f64,
    /// Time to react to a stop status, s.
    pub reaction_time: f64,
    /// Time to come to rest once braking, s.
    pub stopping_time: f64,
    /// Intrusion distance before detection, m.
    pub intrusion: f64,
    /// Operator position measurement uncertainty, m.
    pub operator_uncertainty: f64,
    /// Robot position measurement uncertainty, m.
    pub robot_uncertainty: f64,
}

impl Default for SeparationParams {
    fn default() -> Self {
        let robot_max_speed = 1.0;
        Self {
            human_speed: 1.6,
            robot_max_speed,
            robot_avg_speed: robot_max_speed / 2.0,
            reaction_time: 0.1,
            stopping_time: 0.43,
            intrusion: 0.0,
            operator_uncertainty: 0.0,
            robot_uncertainty: 0.0001,
        }
    }
}

impl SeparationParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("human_speed", self.human_speed),
            ("robot_max_speed", self.robot_max_speed),
            ("robot_avg_speed", self.robot_avg_speed),
            ("reaction_time", self.reaction_time),
            ("stopping_time", self.stopping_time),
            ("intrusion", self.intrusion),
            ("operator_uncertainty", self.operator_uncertainty),
            ("robot_uncertainty", self.robot_uncertainty),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "separation parameter {name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Operator-motion term: distance the human covers while the robot
    /// reacts and brakes.
    pub fn term_human(&self) -> f64 {
        (self.reaction_time + self.stopping_time) * self.human_speed
    }

    /// Robot-reaction term.
    pub fn term_reaction(&self) -> f64 {
        self.reaction_time * self.robot_max_speed
    }

    /// Robot-stopping term, using the average speed over the braking arc.
    pub fn term_stopping(&self) -> f64 {
        self.stopping_time * self.robot_avg_speed
    }
}

/// Protective separation distance: the sum of the operator-motion,
/// robot-reaction and robot-stopping contributions plus intrusion and
/// measurement uncertainties.
pub fn protective_separation_distance(p: &SeparationParams) -> Result<f64> {
    p.validate()?;
    Ok(p.term_human()
        + p.term_reaction()
        + p.term_stopping()
        + p.intrusion
        + p.operator_uncertainty
        + p.robot_uncertainty)
}

/// Transient-contact (power-and-force-limiting) parameters for the worst
/// body region the application can hit.
#[derive(Clone, Debug, PartialEq)]
pub struct PflParams {
    /// Total moving robot mass, kg.
    pub robot_mass: f64,
    /// Payload mass, kg.
    pub payload_mass: f64,
    /// Effective mass of the struck human body region, kg.
    pub body_mass: f64,
    /// Maximum permissible contact pressure, Pa.
    pub max_pressure: f64,
    /// Assumed contact area, m².
    pub contact_area: f64,
    /// Effective spring constant of the body region, N/m.
    pub spring_constant: f64,
}

impl Default for PflParams {
    fn default() -> Self {
        // Chest contact with at least 1 cm² of contact surface.
        Self {
            robot_mass: 23.9,
            payload_mass: 0.0,
            body_mass: 40.0,
            max_pressure: 2.4e6,
            contact_area: 1e-4,
            spring_constant: 2.5e4,
        }
    }
}

impl PflParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.robot_mass > 0.0 && self.body_mass > 0.0) {
            return Err(Error::InvalidParameter("masses must be positive".into()));
        }
        if !(self.payload_mass >= 0.0) {
            return Err(Error::InvalidParameter("payload mass must be non-negative".into()));
        }
        if !(self.max_pressure > 0.0 && self.contact_area > 0.0 && self.spring_constant > 0.0) {
            return Err(Error::InvalidParameter(
                "pressure, area and spring constant must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Reduced mass of the two-body robot/human system. The effective robot
/// mass is half the moving mass plus the payload.
pub fn pfl_reduced_mass(body_mass: f64, robot_mass: f64, payload_mass: f64) -> Result<f64> {
    if !(body_mass > 0.0 && robot_mass > 0.0) || !(payload_mass >= 0.0) {
        return Err(Error::InvalidParameter("masses must be positive".into()));
    }
    let effective_robot = robot_mass / 2.0 + payload_mass;
    Ok(1.0 / (1.0 / body_mass + 1.0 / effective_robot))
}

/// Maximum relative contact speed for a transient impact:
/// `p_max * A / sqrt(mu * K)`.
pub fn pfl_max_relative_speed(p: &PflParams) -> Result<f64> {
    p.validate()?;
    let mu = pfl_reduced_mass(p.body_mass, p.robot_mass, p.payload_mass)?;
    Ok(p.max_pressure * p.contact_area / (mu * p.spring_constant).sqrt())
}

/// Per-keypoint bounding-sphere radii: the farthest body point assigned to
/// each keypoint, so keypoint distances bound true surface distances.
#[derive(Clone, Debug, PartialEq)]
pub struct CompensationTable {
    pub robot: BTreeMap<RobotKeypoint, f64>,
    pub human: BTreeMap<BodyClass, f64>,
}

impl Default for CompensationTable {
    fn default() -> Self {
        let robot = [
            (RobotKeypoint::Ee, 0.01),
            (RobotKeypoint::J7, 0.11),
            (RobotKeypoint::J6, 0.15),
            (RobotKeypoint::J5, 0.15),
            (RobotKeypoint::J4, 0.15),
            (RobotKeypoint::J3, 0.15),
            (RobotKeypoint::J2, 0.15),
            (RobotKeypoint::J1, 0.14),
            (RobotKeypoint::Base, 0.10),
        ]
        .into_iter()
        .collect();
        let human = [
            (BodyClass::Nose, 0.10),
            (BodyClass::Neck, 0.25),
            (BodyClass::Eye, 0.10),
            (BodyClass::Ear, 0.10),
            (BodyClass::Arm, 0.15),
            (BodyClass::Elbow, 0.15),
            (BodyClass::Wrist, 0.15),
        ]
        .into_iter()
        .collect();
        Self { robot, human }
    }
}

impl CompensationTable {
    pub fn validate(&self) -> Result<()> {
        for kp in RobotKeypoint::ALL {
            match self.robot.get(&kp) {
                Some(r) if *r >= 0.0 => {}
                Some(r) => {
                    return Err(Error::Config(format!(
                        "robot compensation for {kp} must be non-negative, got {r}"
                    )))
                }
                None => {
                    return Err(Error::Config(format!("missing robot compensation for {kp}")))
                }
            }
        }
        for class in BodyClass::ALL {
            match self.human.get(&class) {
                Some(r) if *r >= 0.0 => {}
                Some(r) => {
                    return Err(Error::Config(format!(
                        "human compensation for {class} must be non-negative, got {r}"
                    )))
                }
                None => {
                    return Err(Error::Config(format!("missing human compensation for {class}")))
                }
            }
        }
        Ok(())
    }

    pub fn robot_radius(&self, kp: RobotKeypoint) -> f64 {
        *self.robot.get(&kp).expect("validated table")
    }

    pub fn human_radius(&self, kp: HumanKeypoint) -> f64 {
        *self.human.get(&kp.body_class()).expect("validated table")
    }
}

/// Uncompensated regime-transition distances shared by every pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaseDistances {
    /// Category-2 stop from full speed, m.
    pub stop_from_full: f64,
    /// Slow-down margin from full to reduced speed, m.
    pub full_to_reduced: f64,
    /// Stop from reduced speed, m.
    pub reduced_to_stop: f64,
}

impl Default for BaseDistances {
    fn default() -> Self {
        Self {
            stop_from_full: 1.17,
            full_to_reduced: 0.73,
            reduced_to_stop: 0.60,
        }
    }
}

impl BaseDistances {
    pub fn validate(&self) -> Result<()> {
        if !(self.stop_from_full > 0.0 && self.full_to_reduced > 0.0 && self.reduced_to_stop > 0.0)
        {
            return Err(Error::Config("base distances must be positive".into()));
        }
        Ok(())
    }
}

/// Thresholds for one human/robot keypoint pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairThresholds {
    /// Stop while running at full speed, m.
    pub stop_from_full: f64,
    /// Switch from full to reduced speed, m.
    pub reduce: f64,
    /// Stop while running at reduced speed, m.
    pub stop_from_reduced: f64,
}

/// Effective keypoint-pair protective separation distances.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparationMatrix {
    thresholds: BTreeMap<(HumanKeypoint, RobotKeypoint), PairThresholds>,
    base: BaseDistances,
}

impl SeparationMatrix {
    pub fn get(&self, human: HumanKeypoint, robot: RobotKeypoint) -> PairThresholds {
        *self.thresholds.get(&(human, robot)).expect("complete matrix")
    }

    pub fn base(&self) -> BaseDistances {
        self.base
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(HumanKeypoint, RobotKeypoint), &PairThresholds)> {
        self.thresholds.iter()
    }

    /// CSV matching the published layout: one row per robot keypoint, with
    /// the three transition distances for a Nose-class and a Wrist-class
    /// human keypoint.
    pub fn to_table_csv(&self) -> String {
        let mut out = String::from(
            "robot_kp,stop_full_nose,stop_full_wrist,reduce_nose,reduce_wrist,stop_reduced_nose,stop_reduced_wrist\n",
        );
        for rkp in RobotKeypoint::ALL {
            let nose = self.get(HumanKeypoint::Nose, rkp);
            let wrist = self.get(HumanKeypoint::WristR, rkp);
            out.push_str(&format!(
                "{},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2}\n",
                rkp.label(),
                nose.stop_from_full,
                wrist.stop_from_full,
                nose.reduce,
                wrist.reduce,
                nose.stop_from_reduced,
                wrist.stop_from_reduced,
            ));
        }
        out
    }
}

/// Per-pair matrix: each transition distance is the base distance plus both
/// bounding-sphere radii; the reduce threshold additionally absorbs the
/// full-to-reduced margin on top of the reduced-speed stop.
pub fn build_separation_matrix(
    base: &BaseDistances,
    comp: &CompensationTable,
) -> Result<SeparationMatrix> {
    base.validate()?;
    comp.validate()?;
    let mut thresholds = BTreeMap::new();
    for hkp in HumanKeypoint::ALL {
        let h = comp.human_radius(hkp);
        for rkp in RobotKeypoint::ALL {
            let r = comp.robot_radius(rkp);
            let stop_from_reduced = h + base.reduced_to_stop + r;
            thresholds.insert(
                (hkp, rkp),
                PairThresholds {
                    stop_from_full: h + base.stop_from_full + r,
                    reduce: base.full_to_reduced + stop_from_reduced,
                    stop_from_reduced,
                },
            );
        }
    }
    Ok(SeparationMatrix {
        thresholds,
        base: *base,
    })
}

/// Euclidean distances for every tracked human keypoint against every
/// monitored robot keypoint. An empty frame yields an empty map (no
/// operator detected).
pub fn pairwise_distances(
    human: &KeypointFrame,
    robot: &[(RobotKeypoint, Point3<f64>)],
) -> BTreeMap<(HumanKeypoint, RobotKeypoint), f64> {
    let mut out = BTreeMap::new();
    for (hkp, obs) in human.keypoints() {
        for (rkp, pos) in robot {
            out.insert((*hkp, *rkp), (obs.position - pos).norm());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn protective_separation_distance_matches_published_sum() {
        let p = SeparationParams::default();
        let s = protective_separation_distance(&p).unwrap();
        // Exact per-term values: 0.848 + 0.1 + 0.215 + 0.0001 = 1.1631,
        // published with per-term rounding as 1.17.
        assert_relative_eq!(p.term_human(), 0.848, epsilon = 1e-12);
        assert_relative_eq!(p.term_reaction(), 0.1, epsilon = 1e-12);
        assert_relative_eq!(p.term_stopping(), 0.215, epsilon = 1e-12);
        assert_relative_eq!(s, 1.1631, epsilon = 1e-12);
        assert!((s - 1.17).abs() <= 0.01);
    }

    #[test]
    fn zero_times_leave_only_uncertainties() {
        let p = SeparationParams {
            reaction_time: 0.0,
            stopping_time: 0.0,
            ..SeparationParams::default()
        };
        assert_relative_eq!(
            protective_separation_distance(&p).unwrap(),
            0.0001,
            epsilon = 1e-15
        );
    }

    #[test]
    fn static_world_reduces_to_intrusion_and_uncertainty() {
        let p = SeparationParams {
            human_speed: 0.0,
            robot_max_speed: 0.0,
            robot_avg_speed: 0.0,
            intrusion: 0.05,
            operator_uncertainty: 0.02,
            ..SeparationParams::default()
        };
        assert_relative_eq!(
            protective_separation_distance(&p).unwrap(),
            0.05 + 0.02 + 0.0001,
            epsilon = 1e-15
        );
    }

    #[test]
    fn negative_inputs_are_rejected() {
        let p = SeparationParams {
            human_speed: -1.0,
            ..SeparationParams::default()
        };
        assert!(protective_separation_distance(&p).is_err());
    }

    #[test]
    fn reduced_mass_matches_chest_case() {
        let mu = pfl_reduced_mass(40.0, 23.9, 0.0).unwrap();
        assert_relative_eq!(mu, 9.201155624759524, epsilon = 1e-12);
        assert!((mu - 9.20).abs() < 0.01);
    }

    #[test]
    fn reduced_mass_symmetric_and_limit_cases() {
        // Equal masses: mu = m/2.
        let mu = pfl_reduced_mass(11.95, 23.9, 0.0).unwrap();
        assert_relative_eq!(mu, 11.95 / 2.0, epsilon = 1e-12);
        // Huge human mass: mu approaches the effective robot mass.
        let mu = pfl_reduced_mass(1e12, 23.9, 0.0).unwrap();
        assert_relative_eq!(mu, 11.95, epsilon = 1e-6);
    }

    #[test]
    fn max_relative_speed_matches_chest_case() {
        let p = PflParams::default();
        let v = pfl_max_relative_speed(&p).unwrap();
        assert!((v - 0.50).abs() < 0.005, "v_rel_max = {v}");
        // The configured reduced speed is conservative.
        assert!(0.42 < v);
    }

    #[test]
    fn quadrupling_stiffness_halves_the_speed() {
        let p = PflParams::default();
        let stiff = PflParams {
            spring_constant: 4.0 * p.spring_constant,
            ..p.clone()
        };
        let v0 = pfl_max_relative_speed(&p).unwrap();
        let v1 = pfl_max_relative_speed(&stiff).unwrap();
        assert_relative_eq!(v1, v0 / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn matrix_matches_published_end_effector_row() {
        let m = build_separation_matrix(&BaseDistances::default(), &CompensationTable::default())
            .unwrap();
        let nose_ee = m.get(HumanKeypoint::Nose, RobotKeypoint::Ee);
        assert!((nose_ee.stop_from_full - 1.28).abs() < 0.01);
        assert!((nose_ee.reduce - 1.44).abs() < 0.01);
        assert!((nose_ee.stop_from_reduced - 0.71).abs() < 0.01);
        let wrist_ee = m.get(HumanKeypoint::WristR, RobotKeypoint::Ee);
        assert!((wrist_ee.stop_from_full - 1.33).abs() < 0.01);
        assert!((wrist_ee.reduce - 1.49).abs() < 0.01);
        assert!((wrist_ee.stop_from_reduced - 0.76).abs() < 0.01);
    }

    #[test]
    fn zero_compensation_collapses_to_base_distances() {
        let mut comp = CompensationTable::default();
        for v in comp.robot.values_mut() {
            *v = 0.0;
        }
        for v in comp.human.values_mut() {
            *v = 0.0;
        }
        let base = BaseDistances::default();
        let m = build_separation_matrix(&base, &comp).unwrap();
        for (_, th) in m.iter() {
            assert_relative_eq!(th.stop_from_full, base.stop_from_full, epsilon = 1e-12);
            assert_relative_eq!(th.stop_from_reduced, base.reduced_to_stop, epsilon = 1e-12);
            assert_relative_eq!(
                th.reduce,
                base.full_to_reduced + base.reduced_to_stop,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn missing_keypoint_is_rejected() {
        let mut comp = CompensationTable::default();
        comp.robot.remove(&RobotKeypoint::J4);
        assert!(build_separation_matrix(&BaseDistances::default(), &comp).is_err());
    }

    #[test]
    fn matrix_consistency_reduce_minus_stop_is_constant() {
        let base = BaseDistances::default();
        let m = build_separation_matrix(&base, &CompensationTable::default()).unwrap();
        for (_, th) in m.iter() {
            assert_relative_eq!(
                th.reduce - th.stop_from_reduced,
                base.full_to_reduced,
                epsilon = 1e-12
            );
            assert!(th.reduce > th.stop_from_reduced);
        }
    }

    #[test]
    fn pairwise_distances_match_brute_force() {
        use crate::operator::KeypointObservation;
        let mut frame = KeypointFrame::new(0.0);
        let pts = [
            (HumanKeypoint::Nose, Point3::new(1.0, 0.2, 1.5)),
            (HumanKeypoint::WristL, Point3::new(0.4, -0.6, 0.8)),
            (HumanKeypoint::ElbowR, Point3::new(2.0, 0.0, 0.0)),
        ];
        for (kp, p) in pts {
            frame.insert(kp, KeypointObservation::new(p, 1.0));
        }
        let robot = vec![
            (RobotKeypoint::Ee, Point3::new(0.5, 0.0, 0.2)),
            (RobotKeypoint::Base, Point3::origin()),
        ];
        let got = pairwise_distances(&frame, &robot);
        assert_eq!(got.len(), 6);
        for (hkp, hp) in pts {
            for (rkp, rp) in &robot {
                let expected =
                    ((hp.x - rp.x).powi(2) + (hp.y - rp.y).powi(2) + (hp.z - rp.z).powi(2)).sqrt();
                assert_relative_eq!(got[&(hkp, *rkp)], expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn empty_frame_gives_empty_map() {
        let frame = KeypointFrame::new(0.0);
        let robot = vec![(RobotKeypoint::Ee, Point3::origin())];
        assert!(pairwise_distances(&frame, &robot).is_empty());
    }

    #[test]
    fn coincident_points_have_zero_distance() {
        use crate::operator::KeypointObservation;
        let mut frame = KeypointFrame::new(0.0);
        let p = Point3::new(2.0, 0.0, 0.0);
        frame.insert(HumanKeypoint::Nose, KeypointObservation::new(p, 1.0));
        let robot = vec![
            (RobotKeypoint::Ee, p),
            (RobotKeypoint::Base, Point3::origin()),
        ];
        let got = pairwise_distances(&frame, &robot);
        assert_eq!(got[&(HumanKeypoint::Nose, RobotKeypoint::Ee)], 0.0);
        assert_eq!(got[&(HumanKeypoint::Nose, RobotKeypoint::Base)], 2.0);
    }

    /// Bounding-sphere guarantee: any surface point near a human keypoint
    /// and any surface point near a robot keypoint stay at least the
    /// compensated keypoint distance apart.
    #[test]
    fn sphere_surfaces_respect_compensated_distance() {
        let comp = CompensationTable::default();
        let h = comp.human_radius(HumanKeypoint::Neck);
        let r = comp.robot_radius(RobotKeypoint::J5);
        let hc = Point3::new(1.4, 0.3, 1.2);
        let rc = Point3::new(0.2, -0.1, 0.5);
        let kp_dist = (hc - rc).norm();
        // Deterministic sphere sampling via spherical Fibonacci points.
        let sphere = |c: Point3<f64>, radius: f64, i: usize, n: usize| -> Point3<f64> {
            let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - y * y).sqrt();
            let th = golden * i as f64;
            c + radius * nalgebra::Vector3::new(rho * th.cos(), y, rho * th.sin())
        };
        for i in 0..64 {
            for j in 0..64 {
                let ph = sphere(hc, h, i, 64);
                let pr = sphere(rc, r, j, 64);
                assert!((ph - pr).norm() >= kp_dist - h - r - 1e-9);
            }
        }
    }

    proptest! {
        /// Monotonicity: growing any input never shrinks the distance.
        #[test]
        fn separation_distance_is_monotone(
            dh in 0.0f64..1.0, dv in 0.0f64..1.0, dr in 0.0f64..0.5,
            dt in 0.0f64..0.5, ds in 0.0f64..0.5,
        ) {
            let base = SeparationParams::default();
            let bigger = SeparationParams {
                human_speed: base.human_speed + dh,
                robot_max_speed: base.robot_max_speed + dv,
                robot_avg_speed: base.robot_avg_speed + dv / 2.0,
                reaction_time: base.reaction_time + dr,
                stopping_time: base.stopping_time + dt,
                intrusion: base.intrusion + ds,
                ..base.clone()
            };
            let s0 = protective_separation_distance(&base).unwrap();
            let s1 = protective_separation_distance(&bigger).unwrap();
            prop_assert!(s1 >= s0 - 1e-12);
        }

        /// Scaling laws: degree 1 in pressure and area, degree -1/2 in
        /// stiffness and reduced mass.
        #[test]
        fn pfl_speed_scaling_laws(
            p_scale in 0.5f64..3.0, a_scale in 0.5f64..3.0,
            k_scale in 0.5f64..3.0, m_scale in 0.5f64..3.0,
        ) {
            let base = PflParams::default();
            let v0 = pfl_max_relative_speed(&base).unwrap();
            let scaled = PflParams {
                max_pressure: base.max_pressure * p_scale,
                contact_area: base.contact_area * a_scale,
                spring_constant: base.spring_constant * k_scale,
                // Scaling both masses scales mu linearly.
                robot_mass: base.robot_mass * m_scale,
                body_mass: base.body_mass * m_scale,
                payload_mass: 0.0,
            };
            let v1 = pfl_max_relative_speed(&scaled).unwrap();
            let expected = v0 * p_scale * a_scale / (k_scale * m_scale).sqrt();
            prop_assert!((v1 - expected).abs() < 1e-9 * expected.max(1.0));
        }
    }
}
