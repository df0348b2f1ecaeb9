//! Scripted square-loop experiment: commanded motion, wheel slip, encoder
//! quantization and the resulting sensor streams.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ekf::{PositionFix, SensorEvent};
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::ips::{fix_stream, IpsConfig};
use crate::kinematics::{
    forward_kinematics, inverse_kinematics, ticks_to_wheel_speeds, BodyTwist, EncoderTicks,
    MecanumGeometry, WheelSpeeds, DEFAULT_PPR,
};
use crate::odometry::{integrate_pose, Pose2D};

/// Ground truth is integrated this many times finer than the sensor period.
pub const TRUTH_SUBSTEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPlan {
    pub side_length: f64,
    pub cruise_speed: f64,
    pub dt: f64,
    pub laps: usize,
}

impl TrajectoryPlan {
    pub fn new(side_length: f64, cruise_speed: f64, dt: f64, laps: usize) -> Result<Self> {
        let plan = Self {
            side_length,
            cruise_speed,
            dt,
            laps,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("side_length", self.side_length)?;
        ensure_positive("cruise_speed", self.cruise_speed)?;
        ensure_positive("dt", self.dt)?;
        if self.laps == 0 {
            return Err(Error::invalid("laps must be >= 1"));
        }
        Ok(())
    }

    /// Sensor steps per leg. The commanded speed is adjusted slightly so that
    /// each leg covers exactly `side_length`.
    pub fn steps_per_leg(&self) -> usize {
        ((self.side_length / (self.cruise_speed * self.dt)).round() as usize).max(1)
    }

    fn leg_speed(&self) -> f64 {
        self.side_length / (self.steps_per_leg() as f64 * self.dt)
    }

    pub fn duration(&self) -> f64 {
        (4 * self.steps_per_leg() * self.laps) as f64 * self.dt
    }
}

impl Default for TrajectoryPlan {
    fn default() -> Self {
        Self {
            side_length: 3.0,
            cruise_speed: 0.5,
            dt: 0.02,
            laps: 2,
        }
    }
}

/// One sample of the commanded plan. `twist` is the command over the
/// interval ending at `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanSample {
    pub t: f64,
    pub twist: BodyTwist,
    pub pose: Pose2D,
}

/// Square loop at constant heading: +x, then -y, then -x, then +y.
pub fn generate_square_trajectory(plan: &TrajectoryPlan) -> Result<Vec<PlanSample>> {
    plan.validate()?;
    let v = plan.leg_speed();
    let legs = [
        BodyTwist::new(v, 0.0, 0.0),
        BodyTwist::new(0.0, -v, 0.0),
        BodyTwist::new(-v, 0.0, 0.0),
        BodyTwist::new(0.0, v, 0.0),
    ];
    let n = plan.steps_per_leg();
    let total = 4 * n * plan.laps;
    let mut out = Vec::with_capacity(total + 1);
    let mut pose = Pose2D::ORIGIN;
    out.push(PlanSample {
        t: 0.0,
        twist: BodyTwist::ZERO,
        pose,
    });
    for k in 1..=total {
        let twist = legs[((k - 1) / n) % 4];
        pose = integrate_pose(&pose, &twist, plan.dt)?;
        out.push(PlanSample {
            t: k as f64 * plan.dt,
            twist,
            pose,
        });
    }
    Ok(out)
}

/// Which side of the wheel/ground interface the slip shows up on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlipMode {
    /// The wheels turn as commanded and the encoders count that, but the
    /// robot moves by the slipped wheel rates.
    UnderReport,
    /// The robot moves as commanded while the wheels spin at the slipped rates
    /// and the encoders count the spin.
    OverReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipModel {
    /// Multiplicative factor per wheel; 1.0 means no slip.
    pub factors: [f64; 4],
    /// Per-step standard deviation of additive jitter on each factor.
    pub jitter_std: f64,
    pub mode: SlipMode,
}

impl SlipModel {
    pub const NONE: SlipModel = SlipModel {
        factors: [1.0; 4],
        jitter_std: 0.0,
        mode: SlipMode::UnderReport,
    };

    pub fn validate(&self) -> Result<()> {
        for f in self.factors {
            ensure_positive("slip factor", f)?;
        }
        if !(self.jitter_std >= 0.0 && self.jitter_std.is_finite()) {
            return Err(Error::invalid(format!(
                "slip jitter must be >= 0, got {}",
                self.jitter_std
            )));
        }
        Ok(())
    }
}

impl Default for SlipModel {
    /// Front wheels slipping 2%, light jitter.
    fn default() -> Self {
        Self {
            factors: [1.02, 1.02, 1.0, 1.0],
            jitter_std: 0.005,
            mode: SlipMode::UnderReport,
        }
    }
}

/// Encoder counts for one interval and the twist the robot really executed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderReading {
    pub ticks: EncoderTicks,
    pub actual: BodyTwist,
}

fn rates_to_ticks(ws: &WheelSpeeds, dt: f64, ppr: f64) -> [i64; 4] {
    ws.0.map(|w| (w * dt * ppr / TAU).round() as i64)
}

pub fn simulate_encoders<R: Rng + ?Sized>(
    commanded: &BodyTwist,
    g: &MecanumGeometry,
    slip: &SlipModel,
    ppr: f64,
    dt: f64,
    rng: &mut R,
) -> Result<EncoderReading> {
    ensure_positive("dt", dt)?;
    ensure_positive("ppr", ppr)?;
    slip.validate()?;
    let nominal = inverse_kinematics(commanded, g)?;
    let jitter = Normal::new(0.0, slip.jitter_std).map_err(|e| Error::invalid(e.to_string()))?;
    let mut slipped = nominal;
    for (w, s) in slipped.0.iter_mut().zip(slip.factors) {
        *w *= s + jitter.sample(rng);
    }
    let (counted, actual) = match slip.mode {
        SlipMode::UnderReport => (nominal, forward_kinematics(&slipped, g)?),
        SlipMode::OverReport => (slipped, *commanded),
    };
    Ok(EncoderReading {
        ticks: EncoderTicks {
            counts: rates_to_ticks(&counted, dt, ppr),
            dt,
            ppr,
        },
        actual,
    })
}

/// Additive white noise on the odometry twist, per control channel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TwistNoise {
    pub sigma_vx: f64,
    pub sigma_vy: f64,
    pub sigma_omega: f64,
}

impl TwistNoise {
    fn validate(&self) -> Result<()> {
        let all = [self.sigma_vx, self.sigma_vy, self.sigma_omega];
        ensure_finite("twist noise", &all)?;
        if all.iter().any(|s| *s < 0.0) {
            return Err(Error::invalid("twist noise must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub geometry: MecanumGeometry,
    pub plan: TrajectoryPlan,
    pub slip: SlipModel,
    pub ppr: f64,
    pub twist_noise: TwistNoise,
    pub ips: IpsConfig,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            geometry: MecanumGeometry::default(),
            plan: TrajectoryPlan::default(),
            slip: SlipModel::default(),
            ppr: DEFAULT_PPR,
            twist_noise: TwistNoise::default(),
            ips: IpsConfig::default(),
        }
    }
}

/// Everything one simulated run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTrace {
    /// True pose at every integration substep, starting at t = 0.
    pub truth: Vec<(f64, Pose2D)>,
    /// Odometry twists decoded from the encoders, one per sensor step. The
    /// first entry (t = 0) is the robot at rest.
    pub twists: Vec<(f64, BodyTwist)>,
    pub fixes: Vec<PositionFix>,
    /// IPS samples that failed to trilaterate.
    pub fix_failures: Vec<(f64, Error)>,
    /// Twists and fixes merged in time order; twists first on ties.
    pub events: Vec<SensorEvent>,
}

/// Simulates one full experiment. The trace is a pure function of
/// `(cfg, seed)`; encoder and IPS noise use separate random streams.
pub fn run_world(cfg: &WorldConfig, seed: u64) -> Result<ExperimentTrace> {
    ensure_positive("ppr", cfg.ppr)?;
    cfg.slip.validate()?;
    cfg.twist_noise.validate()?;
    let plan = generate_square_trajectory(&cfg.plan)?;

    let mut motion_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ips_rng = ChaCha8Rng::seed_from_u64(seed);
    ips_rng.set_stream(1);

    let noise = |s: f64| Normal::new(0.0, s).map_err(|e| Error::invalid(e.to_string()));
    let (nvx, nvy, nw) = (
        noise(cfg.twist_noise.sigma_vx)?,
        noise(cfg.twist_noise.sigma_vy)?,
        noise(cfg.twist_noise.sigma_omega)?,
    );

    let mut pose = plan[0].pose;
    let mut truth = Vec::with_capacity(plan.len() * TRUTH_SUBSTEPS + 1);
    truth.push((plan[0].t, pose));
    let mut twists = Vec::with_capacity(plan.len());
    twists.push((plan[0].t, BodyTwist::ZERO));

    for w in plan.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        let dt = cur.t - prev.t;
        let reading = simulate_encoders(
            &cur.twist,
            &cfg.geometry,
            &cfg.slip,
            cfg.ppr,
            dt,
            &mut motion_rng,
        )?;

        let h = dt / TRUTH_SUBSTEPS as f64;
        for j in 1..=TRUTH_SUBSTEPS {
            pose = integrate_pose(&pose, &reading.actual, h)?;
            let t = if j == TRUTH_SUBSTEPS {
                cur.t
            } else {
                prev.t + j as f64 * h
            };
            truth.push((t, pose));
        }

        let decoded = forward_kinematics(&ticks_to_wheel_speeds(&reading.ticks)?, &cfg.geometry)?;
        let reported = BodyTwist::new(
            decoded.vx + nvx.sample(&mut motion_rng),
            decoded.vy + nvy.sample(&mut motion_rng),
            decoded.omega + nw.sample(&mut motion_rng),
        );
        twists.push((cur.t, reported));
    }

    let fixes = fix_stream(&truth, &cfg.ips, &mut ips_rng)?;
    let events = merge_events(&twists, &fixes.fixes);
    Ok(ExperimentTrace {
        truth,
        twists,
        fixes: fixes.fixes,
        fix_failures: fixes.failures,
        events,
    })
}

/// Merges twist samples and fixes by timestamp; a twist precedes a fix with
/// the same timestamp.
pub fn merge_events(twists: &[(f64, BodyTwist)], fixes: &[PositionFix]) -> Vec<SensorEvent> {
    let mut out = Vec::with_capacity(twists.len() + fixes.len());
    let (mut i, mut j) = (0, 0);
    while i < twists.len() || j < fixes.len() {
        let take_twist = match (twists.get(i), fixes.get(j)) {
            (Some(tw), Some(fx)) => tw.0 <= fx.timestamp,
            (Some(_), None) => true,
            _ => false,
        };
        if take_twist {
            let (t, twist) = twists[i];
            out.push(SensorEvent::Twist { t, twist });
            i += 1;
        } else {
            out.push(SensorEvent::Fix(fixes[j]));
            j += 1;
        }
    }
    out
}
