//! Keypoint labels for the robot and the tracked human upper body.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Monitored robot keypoints, ordered end-effector first, base last.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RobotKeypoint {
    Ee,
    J7,
    J6,
    J5,
    J4,
    J3,
    J2,
    J1,
    Base,
}

impl RobotKeypoint {
    pub const ALL: [RobotKeypoint; 9] = [
        RobotKeypoint::Ee,
        RobotKeypoint::J7,
        RobotKeypoint::J6,
        RobotKeypoint::J5,
        RobotKeypoint::J4,
        RobotKeypoint::J3,
        RobotKeypoint::J2,
        RobotKeypoint::J1,
        RobotKeypoint::Base,
    ];

    /// Keypoints that can move in Cartesian space. `Base`, `J1` and `J2`
    /// sit on the first joint axis and stay fixed for any configuration.
    pub const MOVABLE: [RobotKeypoint; 6] = [
        RobotKeypoint::Ee,
        RobotKeypoint::J7,
        RobotKeypoint::J6,
        RobotKeypoint::J5,
        RobotKeypoint::J4,
        RobotKeypoint::J3,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|k| *k == self).expect("member of ALL")
    }

    pub fn label(self) -> &'static str {
        match self {
            RobotKeypoint::Ee => "EE",
            RobotKeypoint::J7 => "J7",
            RobotKeypoint::J6 => "J6",
            RobotKeypoint::J5 => "J5",
            RobotKeypoint::J4 => "J4",
            RobotKeypoint::J3 => "J3",
            RobotKeypoint::J2 => "J2",
            RobotKeypoint::J1 => "J1",
            RobotKeypoint::Base => "Base",
        }
    }
}

impl fmt::Display for RobotKeypoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for RobotKeypoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .iter()
            .find(|k| k.label().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("unknown robot keypoint {s:?}")))
    }
}

/// Tracked human keypoints: the COCO upper-body subset (ids 0-7 and 14-17).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HumanKeypoint {
    Nose,
    Neck,
    ShoulderR,
    ElbowR,
    WristR,
    ShoulderL,
    ElbowL,
    WristL,
    EyeR,
    EyeL,
    EarR,
    EarL,
}

/// Body-part class a keypoint belongs to; compensation radii are assigned
/// per class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BodyClass {
    Nose,
    Neck,
    Arm,
    Elbow,
    Wrist,
    Eye,
    Ear,
}

impl BodyClass {
    pub const ALL: [BodyClass; 7] = [
        BodyClass::Nose,
        BodyClass::Neck,
        BodyClass::Arm,
        BodyClass::Elbow,
        BodyClass::Wrist,
        BodyClass::Eye,
        BodyClass::Ear,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BodyClass::Nose => "Nose",
            BodyClass::Neck => "Neck",
            BodyClass::Arm => "Arm",
            BodyClass::Elbow => "Elbow",
            BodyClass::Wrist => "Wrist",
            BodyClass::Eye => "Eye",
            BodyClass::Ear => "Ear",
        }
    }
}

impl fmt::Display for BodyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for BodyClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .iter()
            .find(|c| c.label().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("unknown body class {s:?}")))
    }
}

impl HumanKeypoint {
    pub const ALL: [HumanKeypoint; 12] = [
        HumanKeypoint::Nose,
        HumanKeypoint::Neck,
        HumanKeypoint::ShoulderR,
        HumanKeypoint::ElbowR,
        HumanKeypoint::WristR,
        HumanKeypoint::ShoulderL,
        HumanKeypoint::ElbowL,
        HumanKeypoint::WristL,
        HumanKeypoint::EyeR,
        HumanKeypoint::EyeL,
        HumanKeypoint::EarR,
        HumanKeypoint::EarL,
    ];

    /// COCO pose-model keypoint id.
    pub fn coco_id(self) -> u8 {
        match self {
            HumanKeypoint::Nose => 0,
            HumanKeypoint::Neck => 1,
            HumanKeypoint::ShoulderR => 2,
            HumanKeypoint::ElbowR => 3,
            HumanKeypoint::WristR => 4,
            HumanKeypoint::ShoulderL => 5,
            HumanKeypoint::ElbowL => 6,
            HumanKeypoint::WristL => 7,
            HumanKeypoint::EyeR => 14,
            HumanKeypoint::EyeL => 15,
            HumanKeypoint::EarR => 16,
            HumanKeypoint::EarL => 17,
        }
    }

    pub fn body_class(self) -> BodyClass {
        match self {
            HumanKeypoint::Nose => BodyClass::Nose,
            HumanKeypoint::Neck => BodyClass::Neck,
            HumanKeypoint::ShoulderR | HumanKeypoint::ShoulderL => BodyClass::Arm,
            HumanKeypoint::ElbowR | HumanKeypoint::ElbowL => BodyClass::Elbow,
            HumanKeypoint::WristR | HumanKeypoint::WristL => BodyClass::Wrist,
            HumanKeypoint::EyeR | HumanKeypoint::EyeL => BodyClass::Eye,
            HumanKeypoint::EarR | HumanKeypoint::EarL => BodyClass::Ear,
        }
    }

    /// Nose, eyes and ears make up the head for keypoint discrimination.
    pub fn is_head(self) -> bool {
        matches!(
            self,
            HumanKeypoint::Nose
                | HumanKeypoint::EyeR
                | HumanKeypoint::EyeL
                | HumanKeypoint::EarR
                | HumanKeypoint::EarL
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            HumanKeypoint::Nose => "Nose",
            HumanKeypoint::Neck => "Neck",
            HumanKeypoint::ShoulderR => "ShoulderR",
            HumanKeypoint::ElbowR => "ElbowR",
            HumanKeypoint::WristR => "WristR",
            HumanKeypoint::ShoulderL => "ShoulderL",
            HumanKeypoint::ElbowL => "ElbowL",
            HumanKeypoint::WristL => "WristL",
            HumanKeypoint::EyeR => "EyeR",
            HumanKeypoint::EyeL => "EyeL",
            HumanKeypoint::EarR => "EarR",
            HumanKeypoint::EarL => "EarL",
        }
    }
}

impl fmt::Display for HumanKeypoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for HumanKeypoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .iter()
            .find(|k| k.label().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("unknown human keypoint {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coco_ids_match_upper_body_subset() {
        let ids: Vec<u8> = HumanKeypoint::ALL.iter().map(|k| k.coco_id()).collect();
        assert_eq!(ids, vec![0, 1, 2, 3, 4, 5, 6, 7, 14, 15, 16, 17]);
    }

    #[test]
    fn head_set_is_nose_eyes_ears() {
        let head: Vec<HumanKeypoint> = HumanKeypoint::ALL
            .iter()
            .copied()
            .filter(|k| k.is_head())
            .collect();
        assert_eq!(
            head,
            vec![
                HumanKeypoint::Nose,
                HumanKeypoint::EyeR,
                HumanKeypoint::EyeL,
                HumanKeypoint::EarR,
                HumanKeypoint::EarL,
            ]
        );
    }

    #[test]
    fn labels_round_trip() {
        for kp in RobotKeypoint::ALL {
            assert_eq!(kp.label().parse::<RobotKeypoint>().unwrap(), kp);
        }
        for kp in HumanKeypoint::ALL {
            assert_eq!(kp.label().parse::<HumanKeypoint>().unwrap(), kp);
        }
    }
}
