//! Dead reckoning: Euler integration of body twists into world-frame poses.

use std::f64::consts::{PI, TAU};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::kinematics::BodyTwist;

/// Planar pose in the world frame. `theta` is kept in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub const ORIGIN: Pose2D = Pose2D {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    pub fn distance_to(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let a = theta.rem_euclid(TAU);
    if a > PI {
        a - TAU
    } else {
        a
    }
}

/// One Euler step of the dead-reckoning model.
pub fn integrate_pose(p: &Pose2D, t: &BodyTwist, dt: f64) -> Result<Pose2D> {
    ensure_positive("dt", dt)?;
    ensure_finite("pose", &[p.x, p.y, p.theta])?;
    if !t.is_finite() {
        return Err(Error::invalid(format!("twist must be finite, got {t:?}")));
    }
    let (s, c) = p.theta.sin_cos();
    Ok(Pose2D {
        x: p.x + dt * (t.vx * c - t.vy * s),
        y: p.y + dt * (t.vx * s + t.vy * c),
        theta: normalize_angle(p.theta + dt * t.omega),
    })
}

/// Integrates a sequence of `(twist, dt)` steps from `start`, returning the
/// pose after each step.
pub fn accumulate<'a, I>(start: Pose2D, steps: I) -> Result<Vec<Pose2D>>
where
    I: IntoIterator<Item = &'a (BodyTwist, f64)>,
{
    let mut pose = start;
    steps
        .into_iter()
        .map(|(twist, dt)| {
            pose = integrate_pose(&pose, twist, *dt)?;
            Ok(pose)
        })
        .collect()
}

/// Pose at time `t` on a time-ordered track, interpolated linearly between
/// neighbouring samples. Heading follows the shorter arc. A `t` that equals a
/// sample time returns that sample exactly.
pub fn interpolate_pose(track: &[(f64, Pose2D)], t: f64) -> Result<Pose2D> {
    let (first, last) = match (track.first(), track.last()) {
        (Some(f), Some(l)) => (f.0, l.0),
        _ => return Err(Error::invalid("cannot interpolate an empty track")),
    };
    if !(t >= first && t <= last) {
        return Err(Error::OutOfRange {
            t,
            start: first,
            end: last,
        });
    }
    let idx = track.partition_point(|(ts, _)| *ts < t);
    let (t1, p1) = track[idx];
    if t1 == t || idx == 0 {
        return Ok(p1);
    }
    let (t0, p0) = track[idx - 1];
    let a = (t - t0) / (t1 - t0);
    Ok(Pose2D {
        x: p0.x + a * (p1.x - p0.x),
        y: p0.y + a * (p1.y - p0.y),
        theta: normalize_angle(p0.theta + a * normalize_angle(p1.theta - p0.theta)),
    })
}
