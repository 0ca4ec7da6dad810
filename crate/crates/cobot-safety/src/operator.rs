//! Simulated and replayed human keypoint streams.
//!
//! Stands in for the RGB-D + pose-extraction pipeline: a scripted torso path
//! carries a posture template of upper-body keypoints, with optional reach
//! articulation, Gaussian position noise and confidence dropouts. Frames can
//! also be replayed from a line-delimited text format.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::keypoints::HumanKeypoint;

/// One detected keypoint: position in the robot base frame plus detection
/// confidence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KeypointObservation {
    pub position: Point3<f64>,
    pub confidence: f64,
}

impl KeypointObservation {
    pub fn new(position: Point3<f64>, confidence: f64) -> Self {
        Self {
            position,
            confidence,
        }
    }
}

/// Timestamped set of labelled keypoints.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct KeypointFrame {
    pub t: f64,
    keypoints: BTreeMap<HumanKeypoint, KeypointObservation>,
}

impl KeypointFrame {
    pub fn new(t: f64) -> Self {
        Self {
            t,
            keypoints: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, kp: HumanKeypoint, obs: KeypointObservation) {
        self.keypoints.insert(kp, obs);
    }

    pub fn get(&self, kp: HumanKeypoint) -> Option<&KeypointObservation> {
        self.keypoints.get(&kp)
    }

    pub fn keypoints(&self) -> impl Iterator<Item = (&HumanKeypoint, &KeypointObservation)> {
        self.keypoints.iter()
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }
}

/// Drop keypoints whose confidence falls below `threshold` (false positives
/// are common below it).
pub fn filter_confidence(frame: &KeypointFrame, threshold: f64) -> KeypointFrame {
    let mut out = KeypointFrame::new(frame.t);
    for (kp, obs) in frame.keypoints() {
        if obs.confidence >= threshold {
            out.insert(*kp, *obs);
        }
    }
    out
}

/// Rigid offsets from the torso anchor to each keypoint, expressed in the
/// operator's facing frame (x forward, y left, z up). `reach` offsets are
/// added on top, scaled by the scripted reach factor, to articulate the
/// arms.
#[derive(Clone, Debug)]
pub struct PostureTemplate {
    pub offsets: BTreeMap<HumanKeypoint, Vector3<f64>>,
    pub reach: BTreeMap<HumanKeypoint, Vector3<f64>>,
}

impl PostureTemplate {
    /// Standing operator at a table-mounted robot: the torso anchor sits at
    /// neck height, head keypoints above, arms hanging toward table level
    /// (z = 0 is the robot base plane).
    pub fn standing() -> Self {
        let offsets = [
            (HumanKeypoint::Nose, Vector3::new(0.08, 0.0, 0.12)),
            (HumanKeypoint::Neck, Vector3::new(0.0, 0.0, 0.0)),
            (HumanKeypoint::ShoulderR, Vector3::new(0.0, -0.20, -0.12)),
            (HumanKeypoint::ElbowR, Vector3::new(0.15, -0.25, -0.37)),
            (HumanKeypoint::WristR, Vector3::new(0.35, -0.22, -0.47)),
            (HumanKeypoint::ShoulderL, Vector3::new(0.0, 0.20, -0.12)),
            (HumanKeypoint::ElbowL, Vector3::new(0.15, 0.25, -0.37)),
            (HumanKeypoint::WristL, Vector3::new(0.35, 0.22, -0.47)),
            (HumanKeypoint::EyeR, Vector3::new(0.09, -0.033, 0.17)),
            (HumanKeypoint::EyeL, Vector3::new(0.09, 0.033, 0.17)),
            (HumanKeypoint::EarR, Vector3::new(0.02, -0.08, 0.13)),
            (HumanKeypoint::EarL, Vector3::new(0.02, 0.08, 0.13)),
        ]
        .into_iter()
        .collect();
        let reach = [
            (HumanKeypoint::ElbowR, Vector3::new(0.20, 0.10, -0.02)),
            (HumanKeypoint::WristR, Vector3::new(0.35, 0.12, -0.03)),
        ]
        .into_iter()
        .collect();
        Self { offsets, reach }
    }

    /// Same posture with the arms kept at the sides (no reach articulation);
    /// used by the adversarial fixtures.
    pub fn arms_down() -> Self {
        let mut p = Self::standing();
        p.reach.clear();
        for kp in [
            HumanKeypoint::WristR,
            HumanKeypoint::WristL,
            HumanKeypoint::ElbowR,
            HumanKeypoint::ElbowL,
        ] {
            if let Some(v) = p.offsets.get_mut(&kp) {
                v.x = 0.05;
            }
        }
        p
    }
}

/// Forward-extension window: the reach factor ramps 0 -> 1 over `ramp`,
/// holds for `hold`, and ramps back.
#[derive(Clone, Copy, Debug)]
pub struct ReachWindow {
    pub start: f64,
    pub ramp: f64,
    pub hold: f64,
}

impl ReachWindow {
    pub fn factor(&self, t: f64) -> f64 {
        let dt = t - self.start;
        if dt <= 0.0 || dt >= 2.0 * self.ramp + self.hold {
            0.0
        } else if dt < self.ramp {
            dt / self.ramp
        } else if dt < self.ramp + self.hold {
            1.0
        } else {
            (2.0 * self.ramp + self.hold - dt) / self.ramp
        }
    }

    pub fn end(&self) -> f64 {
        self.start + 2.0 * self.ramp + self.hold
    }
}

/// Script producing keypoint frames: torso waypoints, posture, reach
/// windows, sensor-noise model and seed. When `period` is set the script
/// repeats forever.
#[derive(Clone, Debug)]
pub struct OperatorScript {
    pub waypoints: Vec<(f64, Point3<f64>)>,
    pub posture: PostureTemplate,
    pub reach_windows: Vec<ReachWindow>,
    /// Facing: `None` keeps the facing aimed at the origin (robot base);
    /// `Some(dir)` fixes it.
    pub facing: Option<Vector3<f64>>,
    pub speed_cap: f64,
    pub noise_sigma: f64,
    pub dropout_prob: f64,
    pub seed: u64,
    pub period: Option<f64>,
}

impl OperatorScript {
    pub fn new(waypoints: Vec<(f64, Point3<f64>)>, posture: PostureTemplate) -> Result<Self> {
        let script = Self {
            waypoints,
            posture,
            reach_windows: Vec::new(),
            facing: None,
            speed_cap: 1.6,
            noise_sigma: 0.0,
            dropout_prob: 0.0,
            seed: 0,
            period: None,
        };
        script.validate()?;
        Ok(script)
    }

    pub fn validate(&self) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(Error::Config("operator script needs waypoints".into()));
        }
        for w in self.waypoints.windows(2) {
            let dt = w[1].0 - w[0].0;
            if dt <= 0.0 {
                return Err(Error::Config("waypoint times must increase".into()));
            }
            let speed = (w[1].1 - w[0].1).norm() / dt;
            if speed > self.speed_cap + 1e-9 {
                return Err(Error::Config(format!(
                    "waypoint speed {speed:.3} m/s exceeds the cap {}",
                    self.speed_cap
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.dropout_prob) || self.noise_sigma < 0.0 {
            return Err(Error::Config("noise parameters out of range".into()));
        }
        Ok(())
    }

    fn span(&self) -> (f64, f64) {
        (
            self.waypoints.first().expect("validated").0,
            self.waypoints.last().expect("validated").0,
        )
    }

    fn torso_at(&self, t: f64) -> Point3<f64> {
        let wps = &self.waypoints;
        if t <= wps[0].0 {
            return wps[0].1;
        }
        for w in wps.windows(2) {
            if t <= w[1].0 {
                let f = (t - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + (w[1].1 - w[0].1) * f;
            }
        }
        wps.last().expect("validated").1
    }

    fn reach_factor(&self, t: f64) -> f64 {
        self.reach_windows
            .iter()
            .map(|w| w.factor(t))
            .fold(0.0, f64::max)
    }

    /// Straight-line sprint at the walking speed through `target` and on
    /// past the origin, with the arms down: the worst-case approach used by
    /// the safety acceptance runs.
    pub fn adversarial_sprint(target: Point3<f64>, azimuth: f64, speed: f64) -> Result<Self> {
        let dir = Vector3::new(azimuth.cos(), azimuth.sin(), 0.0);
        let start = Point3::new(target.x, target.y, 0.45) + dir * 3.0;
        // Continue past the target and the base so the body sweeps the
        // whole arm region, then park there.
        let end = Point3::new(0.0, 0.0, 0.45) - dir * 0.15;
        let dist = (end - start).norm();
        let t_walk = dist / speed;
        let script = Self {
            waypoints: vec![(0.0, start), (t_walk, end), (t_walk + 30.0, end)],
            posture: PostureTemplate::arms_down(),
            reach_windows: Vec::new(),
            facing: Some(-dir),
            speed_cap: speed,
            noise_sigma: 0.0,
            dropout_prob: 0.0,
            seed: 0,
            period: None,
        };
        script.validate()?;
        Ok(script)
    }
}

/// Generate the frame at time `t`. Outside the script span (and without a
/// period) the operator is absent and the frame is empty. Deterministic for
/// a given script and seed.
pub fn generate_frame(script: &OperatorScript, t: f64) -> KeypointFrame {
    let (start, end) = script.span();
    let local_t = match script.period {
        Some(p) if p > 0.0 => start + (t - start).rem_euclid(p),
        _ => {
            if t < start - 1e-9 || t > end + 1e-9 {
                return KeypointFrame::new(t);
            }
            t
        }
    };
    let torso = script.torso_at(local_t);
    let facing = match script.facing {
        Some(dir) => dir,
        None => {
            let to_base = Vector3::new(-torso.x, -torso.y, 0.0);
            if to_base.norm() > 1e-9 {
                to_base.normalize()
            } else {
                Vector3::x()
            }
        }
    };
    let left = Vector3::new(-facing.y, facing.x, 0.0);
    let up = Vector3::z();
    let reach = script.reach_factor(local_t);

    let mut rng = ChaCha8Rng::seed_from_u64(script.seed ^ t.to_bits());
    let noise = if script.noise_sigma > 0.0 {
        Some(Normal::new(0.0, script.noise_sigma).expect("validated sigma"))
    } else {
        None
    };

    let mut frame = KeypointFrame::new(t);
    for kp in HumanKeypoint::ALL {
        let Some(base_off) = script.posture.offsets.get(&kp) else {
            continue;
        };
        let mut off = *base_off;
        if reach > 0.0 {
            if let Some(r) = script.posture.reach.get(&kp) {
                off += r * reach;
            }
        }
        let mut pos = torso + facing * off.x + left * off.y + up * off.z;
        if let Some(n) = &noise {
            pos += Vector3::new(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng));
        }
        // A dropout shows up as a low-confidence detection that the 0.6
        // threshold removes downstream.
        let dropped: bool = rng.random::<f64>() < script.dropout_prob;
        let confidence = if dropped {
            0.3 * rng.random::<f64>()
        } else {
            0.6 + 0.4 * rng.random::<f64>()
        };
        frame.insert(kp, KeypointObservation::new(pos, confidence));
    }
    frame
}

/// Serialize frames to the replay format: one keypoint per line,
/// `t,label,x,y,z,confidence`, frames delimited by a change of `t`.
pub fn write_replay<W: Write>(frames: &[KeypointFrame], mut w: W) -> Result<()> {
    writeln!(w, "# t,label,x,y,z,confidence")?;
    for frame in frames {
        for (kp, obs) in frame.keypoints() {
            writeln!(
                w,
                "{:.6},{},{},{},{},{}",
                frame.t, kp, obs.position.x, obs.position.y, obs.position.z, obs.confidence
            )?;
        }
    }
    Ok(())
}

pub fn write_replay_file(frames: &[KeypointFrame], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_replay(frames, std::io::BufWriter::new(f))
}

/// Parse a replay stream. Frames must be in non-decreasing time order;
/// malformed rows are reported with their line number.
pub fn read_replay<R: Read>(r: R) -> Result<Vec<KeypointFrame>> {
    let mut frames: Vec<KeypointFrame> = Vec::new();
    for (idx, line) in BufReader::new(r).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Replay {
                line: line_no,
                message: format!("expected 6 comma-separated fields, got {}", fields.len()),
            });
        }
        let parse_f64 = |s: &str, name: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| Error::Replay {
                line: line_no,
                message: format!("field {name} is not a number: {s:?}"),
            })
        };
        let t = parse_f64(fields[0], "t")?;
        let kp: HumanKeypoint = fields[1].trim().parse().map_err(|_| Error::Replay {
            line: line_no,
            message: format!("unknown keypoint label {:?}", fields[1]),
        })?;
        let x = parse_f64(fields[2], "x")?;
        let y = parse_f64(fields[3], "y")?;
        let z = parse_f64(fields[4], "z")?;
        let confidence = parse_f64(fields[5], "confidence")?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Replay {
                line: line_no,
                message: format!("confidence {confidence} outside [0, 1]"),
            });
        }
        match frames.last_mut() {
            Some(last) if (last.t - t).abs() < 5e-7 => {
                last.insert(kp, KeypointObservation::new(Point3::new(x, y, z), confidence));
            }
            Some(last) if t < last.t => {
                return Err(Error::Replay {
                    line: line_no,
                    message: format!("timestamp {t} goes backwards (previous {})", last.t),
                });
            }
            _ => {
                let mut f = KeypointFrame::new(t);
                f.insert(kp, KeypointObservation::new(Point3::new(x, y, z), confidence));
                frames.push(f);
            }
        }
    }
    Ok(frames)
}

pub fn read_replay_file(path: &Path) -> Result<Vec<KeypointFrame>> {
    let f = std::fs::File::open(path)?;
    read_replay(BufReader::new(f))
}
