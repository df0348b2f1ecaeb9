//! Simulated ultrasonic indoor positioning system.
//!
//! Stationary beacons at known 3-D positions range the mobile beacon by time
//! of flight. Ranges are noised and then solved back to a planar fix by
//! damped Gauss-Newton with the mobile beacon height held fixed.

use nalgebra::{Matrix2, Vector2, Vector3};
use rand::{Rng, RngExt};
use rand_distr::{Distribution, Normal};

use crate::ekf::PositionFix;
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::odometry::{interpolate_pose, Pose2D};

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;
pub const DEFAULT_MOBILE_HEIGHT: f64 = 0.2;
pub const MAX_ITERATIONS: usize = 50;
pub const STEP_TOLERANCE: f64 = 1e-9;
/// Relative decrease of the squared-residual sum below which iteration stops.
pub const COST_TOLERANCE: f64 = 1e-14;

/// Smallest range the simulated receiver will report, meters.
const MIN_RANGE: f64 = 1e-3;
/// Twice the minimum triangle area (m^2) for the ground projections to count
/// as non-collinear.
const MIN_SPAN: f64 = 1e-6;

/// Positions of the stationary beacons.
#[derive(Debug, Clone, PartialEq)]
pub struct BeaconLayout {
    beacons: Vec<Vector3<f64>>,
    speed_of_sound: f64,
}

impl BeaconLayout {
    pub fn new(beacons: Vec<[f64; 3]>, speed_of_sound: f64) -> Result<Self> {
        ensure_positive("speed of sound", speed_of_sound)?;
        if beacons.len() < 3 {
            return Err(Error::DegenerateGeometry(format!(
                "need at least 3 beacons, got {}",
                beacons.len()
            )));
        }
        for b in &beacons {
            ensure_finite("beacon position", b)?;
            if b[2] < 0.0 {
                return Err(Error::DegenerateGeometry(format!(
                    "beacon below the floor at z={}",
                    b[2]
                )));
            }
        }
        let span = max_triangle_span(&beacons);
        if span < MIN_SPAN {
            return Err(Error::DegenerateGeometry(
                "beacon ground projections are collinear".into(),
            ));
        }
        Ok(Self {
            beacons: beacons.into_iter().map(Vector3::from).collect(),
            speed_of_sound,
        })
    }

    /// One beacon above each corner of the axis-aligned square
    /// `[x_min, x_min + side] x [y_min, y_min + side]`.
    pub fn square_arena(x_min: f64, y_min: f64, side: f64, height: f64) -> Result<Self> {
        ensure_positive("arena side", side)?;
        Self::new(
            vec![
                [x_min, y_min, height],
                [x_min + side, y_min, height],
                [x_min + side, y_min + side, height],
                [x_min, y_min + side, height],
            ],
            DEFAULT_SPEED_OF_SOUND,
        )
    }

    pub fn beacons(&self) -> &[Vector3<f64>] {
        &self.beacons
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    /// Mean ground projection of the beacons.
    pub fn centroid(&self) -> (f64, f64) {
        let n = self.beacons.len() as f64;
        let sum = self
            .beacons
            .iter()
            .fold(Vector2::zeros(), |acc, b| acc + b.xy());
        (sum.x / n, sum.y / n)
    }
}

impl Default for BeaconLayout {
    /// Four beacons 2 m above the corners of the 3 m test square traced by the
    /// default trajectory (start at the origin, first leg along +x, second
    /// along -y).
    fn default() -> Self {
        Self::square_arena(0.0, -3.0, 3.0, 2.0).expect("default layout is valid")
    }
}

fn max_triangle_span(beacons: &[[f64; 3]]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..beacons.len() {
        for j in i + 1..beacons.len() {
            for k in j + 1..beacons.len() {
                let (a, b, c) = (beacons[i], beacons[j], beacons[k]);
                let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
                best = best.max(cross.abs());
            }
        }
    }
    best
}

/// Slant ranges from the mobile beacon to each stationary beacon.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeSet {
    pub ranges: Vec<f64>,
    pub timestamp: f64,
}

impl RangeSet {
    /// Converts time-of-flight readings (seconds) to ranges.
    pub fn from_time_of_flight(tof: &[f64], layout: &BeaconLayout, timestamp: f64) -> Result<Self> {
        let ranges: Vec<f64> = tof.iter().map(|t| t * layout.speed_of_sound).collect();
        if ranges.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::invalid("time of flight must be positive and finite"));
        }
        Ok(Self { ranges, timestamp })
    }
}

fn slant_range(x: f64, y: f64, z: f64, beacon: &Vector3<f64>) -> f64 {
    (Vector3::new(x, y, z) - beacon).norm()
}

/// Noisy ranges from `true_pos` at height `mobile_z` to every beacon.
///
/// Readings are clamped to at least 1 mm.
pub fn simulate_ranges<R: Rng + ?Sized>(
    true_pos: (f64, f64),
    mobile_z: f64,
    layout: &BeaconLayout,
    sigma_range: f64,
    timestamp: f64,
    rng: &mut R,
) -> Result<RangeSet> {
    ensure_finite("position", &[true_pos.0, true_pos.1, mobile_z])?;
    if !(sigma_range >= 0.0 && sigma_range.is_finite()) {
        return Err(Error::invalid(format!(
            "sigma_range must be >= 0, got {sigma_range}"
        )));
    }
    let noise = Normal::new(0.0, sigma_range).map_err(|e| Error::invalid(e.to_string()))?;
    let ranges = layout
        .beacons
        .iter()
        .map(|b| {
            let r = slant_range(true_pos.0, true_pos.1, mobile_z, b) + noise.sample(rng);
            r.max(MIN_RANGE)
        })
        .collect();
    Ok(RangeSet { ranges, timestamp })
}

/// Output of [`trilaterate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trilateration {
    pub fix: PositionFix,
    pub iterations: usize,
    /// RMS range residual at the solution, meters.
    pub rms_residual: f64,
}

fn residuals(p: &Vector2<f64>, z: f64, layout: &BeaconLayout, ranges: &[f64]) -> Vec<f64> {
    layout
        .beacons
        .iter()
        .zip(ranges)
        .map(|(b, r)| slant_range(p.x, p.y, z, b) - r)
        .collect()
}

fn cost(res: &[f64]) -> f64 {
    res.iter().map(|r| r * r).sum()
}

/// Least-squares planar position from slant ranges.
///
/// Each iteration takes a Gauss-Newton step and halves it until the sum of
/// squared residuals stops increasing. Converges when the accepted step is
/// shorter than [`STEP_TOLERANCE`] or the cost stops decreasing
/// ([`COST_TOLERANCE`]).
pub fn trilaterate(
    rs: &RangeSet,
    layout: &BeaconLayout,
    mobile_z: f64,
    initial_guess: (f64, f64),
) -> Result<Trilateration> {
    if rs.ranges.len() != layout.beacons.len() {
        return Err(Error::invalid(format!(
            "{} ranges for {} beacons",
            rs.ranges.len(),
            layout.beacons.len()
        )));
    }
    ensure_finite("ranges", &rs.ranges)?;
    ensure_finite(
        "initial guess",
        &[initial_guess.0, initial_guess.1, mobile_z],
    )?;

    let mut p = Vector2::new(initial_guess.0, initial_guess.1);
    let mut res = residuals(&p, mobile_z, layout, &rs.ranges);
    let mut current = cost(&res);

    for iteration in 1..=MAX_ITERATIONS {
        let mut jtj = Matrix2::zeros();
        let mut jtr = Vector2::zeros();
        for (b, r) in layout.beacons.iter().zip(&res) {
            let d = slant_range(p.x, p.y, mobile_z, b).max(f64::MIN_POSITIVE);
            let row = Vector2::new((p.x - b.x) / d, (p.y - b.y) / d);
            jtj += row * row.transpose();
            jtr += row * *r;
        }
        // Tiny ridge keeps the normal matrix invertible directly under a beacon.
        jtj += Matrix2::identity() * 1e-12 * (1.0 + jtj.trace());
        let Some(inv) = jtj.try_inverse() else {
            break;
        };
        let full = -(inv * jtr);

        let mut scale = 1.0;
        let mut step = full;
        let mut accepted = false;
        let mut decrease = 0.0;
        for _ in 0..30 {
            step = full * scale;
            let trial = p + step;
            let trial_res = residuals(&trial, mobile_z, layout, &rs.ranges);
            let trial_cost = cost(&trial_res);
            if trial_cost <= current {
                decrease = current - trial_cost;
                p = trial;
                res = trial_res;
                current = trial_cost;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        // Noisy ranges leave large residuals and Gauss-Newton then converges
        // only linearly; stop once the cost no longer moves.
        let stalled = decrease <= COST_TOLERANCE * (current + decrease);
        if !accepted || step.norm() < STEP_TOLERANCE || stalled {
            return Ok(Trilateration {
                fix: PositionFix::new(p.x, p.y, rs.timestamp),
                iterations: iteration,
                rms_residual: (current / res.len() as f64).sqrt(),
            });
        }
    }
    Err(Error::SolverFailure {
        iterations: MAX_ITERATIONS,
        residual: (current / res.len() as f64).sqrt(),
    })
}

/// How simulated fixes are corrupted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IpsNoise {
    /// Gaussian noise on each range, then trilateration.
    Range { sigma_range: f64 },
    /// Gaussian noise added directly to the true `(x, y)`; no ranging.
    Direct { sigma_xy: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpsConfig {
    pub layout: BeaconLayout,
    pub mobile_z: f64,
    pub rate_hz: f64,
    pub noise: IpsNoise,
    pub dropout_prob: f64,
}

impl Default for IpsConfig {
    fn default() -> Self {
        Self {
            layout: BeaconLayout::default(),
            mobile_z: DEFAULT_MOBILE_HEIGHT,
            rate_hz: 8.0,
            noise: IpsNoise::Range { sigma_range: 0.02 },
            dropout_prob: 0.0,
        }
    }
}

/// Fixes produced over a trajectory, plus the samples whose solve failed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FixStream {
    pub fixes: Vec<PositionFix>,
    pub failures: Vec<(f64, Error)>,
}

/// Samples `truth` at `cfg.rate_hz`, simulates one fix per sample and drops
/// each independently with probability `cfg.dropout_prob`.
pub fn fix_stream<R: Rng + ?Sized>(
    truth: &[(f64, Pose2D)],
    cfg: &IpsConfig,
    rng: &mut R,
) -> Result<FixStream> {
    ensure_positive("ips rate_hz", cfg.rate_hz)?;
    if !(0.0..1.0).contains(&cfg.dropout_prob) {
        return Err(Error::invalid(format!(
            "dropout_prob must be in [0, 1), got {}",
            cfg.dropout_prob
        )));
    }
    let (Some(&(t0, _)), Some(&(t_end, _))) = (truth.first(), truth.last()) else {
        return Ok(FixStream::default());
    };
    let count = ((t_end - t0) * cfg.rate_hz + 1e-9).floor() as usize + 1;
    let direct = match cfg.noise {
        IpsNoise::Direct { sigma_xy } => {
            Some(Normal::new(0.0, sigma_xy).map_err(|e| Error::invalid(e.to_string()))?)
        }
        IpsNoise::Range { .. } => None,
    };

    let mut out = FixStream::default();
    for k in 0..count {
        let t = (t0 + k as f64 / cfg.rate_hz).min(t_end);
        let pose = interpolate_pose(truth, t)?;
        let solved = match (cfg.noise, &direct) {
            (IpsNoise::Direct { .. }, Some(n)) => Ok(PositionFix::new(
                pose.x + n.sample(rng),
                pose.y + n.sample(rng),
                t,
            )),
            (IpsNoise::Range { sigma_range }, _) => {
                let rs = simulate_ranges(
                    (pose.x, pose.y),
                    cfg.mobile_z,
                    &cfg.layout,
                    sigma_range,
                    t,
                    rng,
                )?;
                trilaterate(&rs, &cfg.layout, cfg.mobile_z, cfg.layout.centroid()).map(|s| s.fix)
            }
            _ => unreachable!("direct noise always has a distribution"),
        };
        let dropped = rng.random::<f64>() < cfg.dropout_prob;
        match solved {
            Ok(fix) if !dropped => out.fixes.push(fix),
            Ok(_) => {}
            Err(e) => out.failures.push((t, e)),
        }
    }
    Ok(out)
}
