//! Scripted hopping controller used to record demonstrations.

use super::walker::{WalkerState, KNEE_MAX, LEG_REACH};

/// Gait parameters of the scripted controller.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gait {
    /// Leg angle the foot is swung forward to.
    pub reach: f64,
    /// Leg angle at which stance ends.
    pub push: f64,
    /// Knee flexion during stance.
    pub stance_knee: f64,
    /// Knee flexion while the leg swings forward.
    pub swing_knee: f64,
}

impl Default for Gait {
    fn default() -> Self {
        Gait {
            reach: 0.45,
            push: -0.45,
            stance_knee: 0.3,
            swing_knee: 1.5,
        }
    }
}

impl Gait {
    /// Leg angle and knee targets for the current phase, read off the state: the leg
    /// pushes back while loaded, tucks and swings forward once the hip
    /// reaches the end of stance, and extends again before touchdown.
    pub fn targets(&self, s: &WalkerState) -> [f64; 2] {
        let hip = s.leg_angle();
        let swinging = s.leg_angle_rate() > 0.1;
        if swinging {
            if hip < 0.6 * self.reach {
                [self.reach, self.swing_knee]
            } else {
                [self.reach, self.stance_knee]
            }
        } else if s.in_contact() {
            if hip <= self.push + 0.05 {
                [self.reach, self.swing_knee]
            } else {
                [self.push - 0.1, self.stance_knee]
            }
        } else {
            [self.reach, self.stance_knee]
        }
    }

    /// Normalized action that makes the joint servos track the targets.
    pub fn action(&self, s: &WalkerState) -> [f64; 2] {
        let [h, k] = self.targets(s);
        [(h / LEG_REACH).clamp(-1.0, 1.0), (2.0 * k / KNEE_MAX - 1.0).clamp(-1.0, 1.0)]
    }
}

/// The default scripted expert.
pub fn scripted_expert(s: &WalkerState) -> [f64; 2] {
    Gait::default().action(s)
}
