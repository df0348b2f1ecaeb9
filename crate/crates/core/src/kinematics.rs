//! Four-wheel mecanum kinematics.
//!
//! Wheel numbering is fixed throughout the crate:
//!
//! | index | wheel       |
//! |-------|-------------|
//! | 1     | front-left  |
//! | 2     | front-right |
//! | 3     | rear-left   |
//! | 4     | rear-right  |
//!
//! With this numbering the forward map is
//!
//! ```text
//! [vx]          [  1   1   1   1 ] [w1]
//! [vy]  = r/4 * [ -1   1   1  -1 ] [w2]
//! [wz]          [ -k   k  -k   k ] [w3]
//!                                  [w4]
//! ```
//!
//! with `k = 1 / (l_fr + l_rl)`. Positive `vx`, `vy`, `wz` are forward, left
//! and anticlockwise respectively.

use std::f64::consts::TAU;

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Wheel radius and half-distances between wheel contact points, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MecanumGeometry {
    wheel_radius: f64,
    half_wheelbase: f64,
    half_track: f64,
}

impl MecanumGeometry {
    /// `half_wheelbase` is half the front-rear distance, `half_track` half the
    /// left-right distance.
    pub fn new(wheel_radius: f64, half_wheelbase: f64, half_track: f64) -> Result<Self> {
        ensure_positive("wheel radius", wheel_radius)?;
        ensure_positive("half wheelbase", half_wheelbase)?;
        ensure_positive("half track", half_track)?;
        Ok(Self {
            wheel_radius,
            half_wheelbase,
            half_track,
        })
    }

    pub fn wheel_radius(&self) -> f64 {
        self.wheel_radius
    }

    pub fn half_wheelbase(&self) -> f64 {
        self.half_wheelbase
    }

    pub fn half_track(&self) -> f64 {
        self.half_track
    }

    /// `l_fr + l_rl`, the lever arm that couples yaw rate to wheel speed.
    pub fn lever_arm(&self) -> f64 {
        self.half_wheelbase + self.half_track
    }
}

impl Default for MecanumGeometry {
    /// 46.875 mm wheels, 135 mm half wheelbase, 125 mm half track.
    fn default() -> Self {
        Self {
            wheel_radius: 0.046875,
            half_wheelbase: 0.135,
            half_track: 0.125,
        }
    }
}

/// Wheel angular velocities in rad/s, indexed front-left, front-right,
/// rear-left, rear-right.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WheelSpeeds(pub [f64; 4]);

impl WheelSpeeds {
    pub fn new(w1: f64, w2: f64, w3: f64, w4: f64) -> Self {
        Self([w1, w2, w3, w4])
    }
}

/// Body-frame velocity: `vx` forward (m/s), `vy` left (m/s), `omega`
/// anticlockwise (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyTwist {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl BodyTwist {
    pub const ZERO: BodyTwist = BodyTwist {
        vx: 0.0,
        vy: 0.0,
        omega: 0.0,
    };

    pub fn new(vx: f64, vy: f64, omega: f64) -> Self {
        Self { vx, vy, omega }
    }

    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.omega.is_finite()
    }
}

impl std::ops::Neg for BodyTwist {
    type Output = BodyTwist;

    fn neg(self) -> BodyTwist {
        BodyTwist::new(-self.vx, -self.vy, -self.omega)
    }
}

/// Signed encoder counts accumulated by each wheel over one sample interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderTicks {
    pub counts: [i64; 4],
    /// Interval length, seconds.
    pub dt: f64,
    /// Pulses per wheel revolution.
    pub ppr: f64,
}

pub const DEFAULT_PPR: f64 = 1700.0;

pub fn forward_kinematics(ws: &WheelSpeeds, g: &MecanumGeometry) -> Result<BodyTwist> {
    ensure_finite("wheel speeds", &ws.0)?;
    let [w1, w2, w3, w4] = ws.0;
    let q = g.wheel_radius / 4.0;
    Ok(BodyTwist {
        vx: q * (w1 + w2 + w3 + w4),
        vy: q * (-w1 + w2 + w3 - w4),
        omega: q / g.lever_arm() * (-w1 + w2 - w3 + w4),
    })
}

/// Right-inverse of [`forward_kinematics`]: the wheel speeds that realize `t`.
pub fn inverse_kinematics(t: &BodyTwist, g: &MecanumGeometry) -> Result<WheelSpeeds> {
    if !t.is_finite() {
        return Err(Error::invalid(format!("twist must be finite, got {t:?}")));
    }
    let spin = g.lever_arm() * t.omega;
    let inv_r = 1.0 / g.wheel_radius;
    Ok(WheelSpeeds([
        inv_r * (t.vx - t.vy - spin),
        inv_r * (t.vx + t.vy + spin),
        inv_r * (t.vx + t.vy - spin),
        inv_r * (t.vx - t.vy + spin),
    ]))
}

pub fn ticks_to_wheel_speeds(e: &EncoderTicks) -> Result<WheelSpeeds> {
    ensure_positive("encoder interval dt", e.dt)?;
    ensure_positive("encoder ppr", e.ppr)?;
    let scale = TAU / (e.ppr * e.dt);
    Ok(WheelSpeeds(e.counts.map(|c| c as f64 * scale)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn uniform_speed_drives_forward() {
        let t =
            forward_kinematics(&WheelSpeeds::new(1.0, 1.0, 1.0, 1.0), &Default::default()).unwrap();
        assert_eq!(t, BodyTwist::new(0.046875, 0.0, 0.0));
    }

    #[test]
    fn zero_wheels_zero_twist() {
        let t = forward_kinematics(&WheelSpeeds::default(), &Default::default()).unwrap();
        assert_eq!(t, BodyTwist::ZERO);
    }

    #[test]
    fn strafe_pattern_drives_left() {
        let t = forward_kinematics(&WheelSpeeds::new(-1.0, 1.0, 1.0, -1.0), &Default::default())
            .unwrap();
        assert!(close(t.vx, 0.0, 1e-15));
        assert!(close(t.vy, 0.046875, 1e-15));
        assert!(close(t.omega, 0.0, 1e-15));
    }

    #[test]
    fn right_wheels_forward_turns_anticlockwise() {
        let g = MecanumGeometry::default();
        let t = forward_kinematics(&WheelSpeeds::new(-1.0, 1.0, -1.0, 1.0), &g).unwrap();
        assert!(t.omega > 0.0);
        assert!(close(t.omega, g.wheel_radius() / g.lever_arm(), 1e-15));
    }

    #[test]
    fn inverse_of_uniform_forward() {
        let ws =
            inverse_kinematics(&BodyTwist::new(0.046875, 0.0, 0.0), &Default::default()).unwrap();
        for w in ws.0 {
            assert!(close(w, 1.0, 1e-12));
        }
        let ws = inverse_kinematics(&BodyTwist::ZERO, &Default::default()).unwrap();
        assert_eq!(ws, WheelSpeeds::default());
    }

    #[test]
    fn rejects_non_finite() {
        let g = MecanumGeometry::default();
        assert!(matches!(
            forward_kinematics(&WheelSpeeds::new(f64::NAN, 0.0, 0.0, 0.0), &g),
            Err(Error::InvalidInput(_))
        ));
        assert!(inverse_kinematics(&BodyTwist::new(0.0, f64::INFINITY, 0.0), &g).is_err());
    }

    #[test]
    fn geometry_must_be_positive() {
        assert!(MecanumGeometry::new(0.0, 0.1, 0.1).is_err());
        assert!(MecanumGeometry::new(0.05, -0.1, 0.1).is_err());
        assert!(MecanumGeometry::new(0.05, 0.1, f64::NAN).is_err());
    }

    #[test]
    fn encoder_ticks() {
        let one_rev = EncoderTicks {
            counts: [1700; 4],
            dt: 1.0,
            ppr: DEFAULT_PPR,
        };
        assert_eq!(ticks_to_wheel_speeds(&one_rev).unwrap().0, [TAU; 4]);

        let quarter = EncoderTicks {
            counts: [425; 4],
            dt: 0.25,
            ppr: DEFAULT_PPR,
        };
        for w in ticks_to_wheel_speeds(&quarter).unwrap().0 {
            assert!(close(w, TAU, 1e-12));
        }

        let idle = EncoderTicks {
            counts: [0; 4],
            ..one_rev
        };
        assert_eq!(
            ticks_to_wheel_speeds(&idle).unwrap(),
            WheelSpeeds::default()
        );

        assert!(ticks_to_wheel_speeds(&EncoderTicks { dt: 0.0, ..one_rev }).is_err());
        assert!(ticks_to_wheel_speeds(&EncoderTicks {
            ppr: 0.0,
            ..one_rev
        })
        .is_err());
    }
}
