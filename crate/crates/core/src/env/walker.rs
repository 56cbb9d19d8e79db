//! Planar one-legged hopper: a point-mass body on a two-segment leg with
//! torque-limited servo joints, a spring-damper ground with regularized
//! Coulomb friction, and semi-implicit Euler integration. The ground
//! reaction at the foot accelerates the body and loads the joints through
//! the leg Jacobian.

use crate::math;

/// Control period in seconds.
pub const DT: f64 = 0.05;
/// Integration substeps per control step.
pub const SUBSTEPS: usize = 25;
/// Episode length in control steps.
pub const HORIZON: usize = 500;
/// The episode ends once the body drops below this height.
pub const FALL_HEIGHT: f64 = 0.55;

pub const GRAVITY: f64 = 9.81;
pub const MASS: f64 = 1.0;
pub const THIGH: f64 = 0.5;
pub const SHIN: f64 = 0.5;
pub const HIP_LIMIT: f64 = 1.6;
/// Leg angle reached at full action.
pub const LEG_REACH: f64 = 0.8;
pub const KNEE_MAX: f64 = 2.4;

const JOINT_INERTIA: f64 = 0.05;
const JOINT_DAMPING: f64 = 0.2;
const SERVO_KP: f64 = 60.0;
const SERVO_KD: f64 = 4.0;
/// Torque limits `[hip, knee]`.
const TORQUE_MAX: [f64; 2] = [12.0, 15.0];
const GROUND_K: f64 = 3000.0;
const GROUND_C: f64 = 80.0;
const FRICTION_C: f64 = 30.0;
const FRICTION_MU: f64 = 1.0;
const AIR_DRAG: f64 = 0.5;

/// Initial body height: the foot starts slightly above the ground.
pub const START_HEIGHT: f64 = 1.05;
const START_KNEE: f64 = 0.4;

/// Full simulator state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WalkerState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    /// `[hip, knee]`: hip from the downward vertical (positive puts the
    /// foot forward), knee flexion in `[0, KNEE_MAX]`.
    pub joints: [f64; 2],
    pub joint_vel: [f64; 2],
    pub t: usize,
}

/// Outcome of one control step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Running,
    /// The body fell: an absorbing state.
    Fallen,
    /// The time limit was reached.
    TimeUp,
}

impl Status {
    pub fn is_done(self) -> bool {
        self != Status::Running
    }
}

impl WalkerState {
    /// The standard initial state. The seed jitters the joints by at most
    /// 0.02 rad; seed 0 is the unperturbed pose.
    pub fn reset(seed: u64) -> WalkerState {
        let mut r = crate::rng::seeded(seed);
        let j = |r: &mut crate::rng::Rng64| {
            if seed == 0 {
                0.0
            } else {
                crate::rng::uniform(r, -0.02, 0.02)
            }
        };
        let hip = j(&mut r);
        let knee = START_KNEE + j(&mut r);
        WalkerState {
            x: 0.0,
            y: START_HEIGHT,
            vx: 0.0,
            vy: 0.0,
            joints: [hip, knee],
            joint_vel: [0.0; 2],
            t: 0,
        }
    }

    /// Knee and foot positions in world coordinates.
    pub fn leg_points(&self) -> [(f64, f64); 2] {
        let [hip, knee] = self.joints;
        let kx = self.x + THIGH * math::sin(hip);
        let ky = self.y - THIGH * math::cos(hip);
        let shin = hip - knee;
        [(kx, ky), (kx + SHIN * math::sin(shin), ky - SHIN * math::cos(shin))]
    }

    /// Partial derivatives of the foot position with respect to the hip and
    /// knee angles.
    fn jacobian(&self) -> [(f64, f64); 2] {
        let [hip, knee] = self.joints;
        let shin = hip - knee;
        let (cs, ss) = (math::cos(shin), math::sin(shin));
        [
            (THIGH * math::cos(hip) + SHIN * cs, THIGH * math::sin(hip) + SHIN * ss),
            (-SHIN * cs, -SHIN * ss),
        ]
    }

    /// Foot velocity from the body velocity and the joint rates.
    fn foot_velocity(&self) -> (f64, f64) {
        let j = self.jacobian();
        let [wh, wk] = self.joint_vel;
        (
            self.vx + j[0].0 * wh + j[1].0 * wk,
            self.vy + j[0].1 * wh + j[1].1 * wk,
        )
    }

    /// Ground reaction on the foot `(fx, fy)`; zero without contact.
    pub fn contact_force(&self) -> (f64, f64) {
        let (_, fy) = self.leg_points()[1];
        if fy >= 0.0 {
            return (0.0, 0.0);
        }
        let (vx, vy) = self.foot_velocity();
        let normal = (GROUND_K * -fy - GROUND_C * vy).max(0.0);
        let limit = FRICTION_MU * normal;
        let tangential = (-FRICTION_C * vx).clamp(-limit, limit);
        (tangential, normal)
    }

    pub fn in_contact(&self) -> bool {
        self.leg_points()[1].1 < 0.0
    }

    fn substep(&mut self, target: [f64; 2], h: f64) {
        let (fx, fy) = self.contact_force();
        let jac = self.jacobian();
        self.vx += h * (fx / MASS - AIR_DRAG * self.vx);
        self.vy += h * (fy / MASS - GRAVITY);
        self.x += h * self.vx;
        self.y += h * self.vy;
        let limits = [(-HIP_LIMIT, HIP_LIMIT), (0.0, KNEE_MAX)];
        for j in 0..2 {
            let servo = (SERVO_KP * (target[j] - self.joints[j]) - SERVO_KD * self.joint_vel[j])
                .clamp(-TORQUE_MAX[j], TORQUE_MAX[j]);
            let load = jac[j].0 * fx + jac[j].1 * fy;
            let acc = (servo + load - JOINT_DAMPING * self.joint_vel[j]) / JOINT_INERTIA;
            self.joint_vel[j] += h * acc;
            self.joints[j] += h * self.joint_vel[j];
            let (lo, hi) = limits[j];
            if self.joints[j] < lo || self.joints[j] > hi {
                self.joints[j] = self.joints[j].clamp(lo, hi);
                self.joint_vel[j] = 0.0;
            }
        }
    }

    /// Angle of the hip-to-foot line from the downward vertical.
    pub fn leg_angle(&self) -> f64 {
        self.joints[0] - 0.5 * self.joints[1]
    }

    pub fn leg_angle_rate(&self) -> f64 {
        self.joint_vel[0] - 0.5 * self.joint_vel[1]
    }

    /// Advance one control step. Actions are clipped to `[-1, 1]`: `a₀`
    /// sets the leg angle target `a₀·LEG_REACH`, `a₁` the knee flexion
    /// target `(a₁ + 1)·KNEE_MAX/2`; the hip servo tracks the leg angle plus
    /// half the knee flexion.
    pub fn step(&mut self, action: [f64; 2]) -> Status {
        let a = action.map(|v| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) });
        let knee = (a[1] + 1.0) * 0.5 * KNEE_MAX;
        let target = [a[0] * LEG_REACH + 0.5 * knee, knee];
        let h = DT / SUBSTEPS as f64;
        for _ in 0..SUBSTEPS {
            self.substep(target, h);
        }
        self.t += 1;
        if self.y < FALL_HEIGHT {
            Status::Fallen
        } else if self.t >= HORIZON {
            Status::TimeUp
        } else {
            Status::Running
        }
    }

    /// Forward progress since the standard start.
    pub fn progress(&self) -> f64 {
        self.x
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.vx, self.vy]
            .iter()
            .chain(&self.joints)
            .chain(&self.joint_vel)
            .all(|v| v.is_finite())
    }
}
