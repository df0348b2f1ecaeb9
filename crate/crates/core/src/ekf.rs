//! Extended Kalman filter over the planar pose `(x, y, theta)`.
//!
//! Prediction is driven by body twists from wheel odometry; correction by
//! direct `(x, y)` position fixes from the indoor positioning system.
//! Process noise is specified per control channel and mapped into state
//! space through the control Jacobian, `Q = B diag(s_vx^2, s_vy^2, s_w^2) B^T`.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, SymmetricEigen, Vector2, Vector3};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::kinematics::BodyTwist;
use crate::odometry::{normalize_angle, Pose2D};

/// NIS above which a fix is discarded when gating is enabled (99.9% point of
/// chi-square with 2 degrees of freedom).
pub const DEFAULT_GATE: f64 = 13.8;

/// Largest acceptable condition number of the innovation covariance.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

/// Symmetry tolerance enforced on every covariance the filter produces.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

const OBSERVATION: Matrix2x3<f64> = Matrix2x3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0);

/// Pose estimate and its 3x3 covariance (m^2, m^2, rad^2 on the diagonal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub pose: Pose2D,
    pub covariance: Matrix3<f64>,
}

impl FilterState {
    /// Validates that `covariance` is symmetric and positive definite.
    pub fn new(pose: Pose2D, covariance: Matrix3<f64>) -> Result<Self> {
        ensure_finite("pose", &[pose.x, pose.y, pose.theta])?;
        if asymmetry(&covariance) >= SYMMETRY_TOLERANCE {
            return Err(Error::invalid("initial covariance is not symmetric"));
        }
        check_positive_definite(&covariance)?;
        Ok(Self { pose, covariance })
    }

    /// Diagonal initial covariance with the given variances.
    pub fn with_variances(pose: Pose2D, variances: [f64; 3]) -> Result<Self> {
        Self::new(pose, Matrix3::from_diagonal(&Vector3::from(variances)))
    }

    pub fn variances(&self) -> [f64; 3] {
        let d = self.covariance.diagonal();
        [d[0], d[1], d[2]]
    }

    /// Position block of the covariance.
    pub fn position_covariance(&self) -> Matrix2<f64> {
        self.covariance.fixed_view::<2, 2>(0, 0).into_owned()
    }
}

/// Control-space standard deviations of the odometry twist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessNoise {
    pub sigma_vx: f64,
    pub sigma_vy: f64,
    pub sigma_omega: f64,
}

impl ProcessNoise {
    pub fn new(sigma_vx: f64, sigma_vy: f64, sigma_omega: f64) -> Result<Self> {
        ensure_positive("sigma_vx", sigma_vx)?;
        ensure_positive("sigma_vy", sigma_vy)?;
        ensure_positive("sigma_omega", sigma_omega)?;
        Ok(Self {
            sigma_vx,
            sigma_vy,
            sigma_omega,
        })
    }

    fn control_covariance(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(
            self.sigma_vx.powi(2),
            self.sigma_vy.powi(2),
            self.sigma_omega.powi(2),
        ))
    }
}

/// Standard deviation of an IPS fix, applied to x and y alike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementNoise {
    pub sigma_ips: f64,
}

impl MeasurementNoise {
    pub fn new(sigma_ips: f64) -> Result<Self> {
        ensure_positive("sigma_ips", sigma_ips)?;
        Ok(Self { sigma_ips })
    }
}

/// An absolute `(x, y)` position reported by the positioning system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionFix {
    pub x: f64,
    pub y: f64,
    pub timestamp: f64,
}

impl PositionFix {
    pub fn new(x: f64, y: f64, timestamp: f64) -> Self {
        Self { x, y, timestamp }
    }
}

/// Same motion model as [`crate::odometry::integrate_pose`], owned by the filter.
pub fn process_model(pose: &Pose2D, u: &BodyTwist, dt: f64) -> Result<Pose2D> {
    validate_step(pose, u, dt)?;
    let (s, c) = pose.theta.sin_cos();
    Ok(Pose2D {
        x: pose.x + dt * (u.vx * c - u.vy * s),
        y: pose.y + dt * (u.vx * s + u.vy * c),
        theta: normalize_angle(pose.theta + dt * u.omega),
    })
}

/// Jacobian of [`process_model`] with respect to the state.
pub fn process_jacobian(pose: &Pose2D, u: &BodyTwist, dt: f64) -> Result<Matrix3<f64>> {
    validate_step(pose, u, dt)?;
    let (s, c) = pose.theta.sin_cos();
    #[rustfmt::skip]
    let f = Matrix3::new(
        1.0, 0.0, -dt * (u.vx * s + u.vy * c),
        0.0, 1.0,  dt * (u.vx * c - u.vy * s),
        0.0, 0.0, 1.0,
    );
    Ok(f)
}

/// Jacobian of [`process_model`] with respect to the twist.
pub fn control_jacobian(pose: &Pose2D, dt: f64) -> Result<Matrix3<f64>> {
    ensure_positive("dt", dt)?;
    ensure_finite("pose", &[pose.x, pose.y, pose.theta])?;
    let (s, c) = pose.theta.sin_cos();
    #[rustfmt::skip]
    let b = Matrix3::new(
        c, -s, 0.0,
        s,  c, 0.0,
        0.0, 0.0, 1.0,
    );
    Ok(b * dt)
}

fn validate_step(pose: &Pose2D, u: &BodyTwist, dt: f64) -> Result<()> {
    ensure_positive("dt", dt)?;
    ensure_finite("pose", &[pose.x, pose.y, pose.theta])?;
    ensure_finite("twist", &[u.vx, u.vy, u.omega])
}

fn asymmetry(p: &Matrix3<f64>) -> f64 {
    (p - p.transpose()).abs().max()
}

fn symmetrize(p: &Matrix3<f64>) -> Matrix3<f64> {
    (p + p.transpose()) * 0.5
}

fn check_positive_definite(p: &Matrix3<f64>) -> Result<()> {
    let min = SymmetricEigen::new(*p).eigenvalues.min();
    if min > 0.0 && min.is_finite() {
        Ok(())
    } else {
        Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
        })
    }
}

pub fn predict(s: &FilterState, u: &BodyTwist, dt: f64, q: &ProcessNoise) -> Result<FilterState> {
    let f = process_jacobian(&s.pose, u, dt)?;
    let b = control_jacobian(&s.pose, dt)?;
    let pose = process_model(&s.pose, u, dt)?;
    let p = f * s.covariance * f.transpose() + b * q.control_covariance() * b.transpose();
    let covariance = symmetrize(&p);
    check_positive_definite(&covariance)?;
    Ok(FilterState { pose, covariance })
}

/// Result of a position update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateOutcome {
    pub state: FilterState,
    /// `z - H x`, meters.
    pub innovation: Vector2<f64>,
    /// Normalized innovation squared, `y^T S^-1 y`.
    pub nis: f64,
}

pub fn update_position(
    s: &FilterState,
    z: &PositionFix,
    r: &MeasurementNoise,
) -> Result<UpdateOutcome> {
    ensure_finite("position fix", &[z.x, z.y])?;
    let h = OBSERVATION;
    let p = s.covariance;
    let x = Vector3::new(s.pose.x, s.pose.y, s.pose.theta);

    let innovation = Vector2::new(z.x, z.y) - h * x;
    let s_mat = h * p * h.transpose() + Matrix2::identity() * r.sigma_ips.powi(2);

    let eig = SymmetricEigen::new(s_mat).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if lo.is_nan() || lo <= 0.0 || hi / lo > MAX_INNOVATION_CONDITION {
        return Err(Error::UpdateRejected(format!(
            "innovation covariance is ill-conditioned (eigenvalues {lo:e}, {hi:e})"
        )));
    }
    let s_inv = s_mat
        .try_inverse()
        .ok_or_else(|| Error::UpdateRejected("innovation covariance is singular".into()))?;

    let gain = p * h.transpose() * s_inv;
    let x_new = x + gain * innovation;
    let p_new = symmetrize(&((Matrix3::identity() - gain * h) * p));
    check_positive_definite(&p_new)?;

    let nis = (innovation.transpose() * s_inv * innovation)[(0, 0)];
    Ok(UpdateOutcome {
        state: FilterState {
            pose: Pose2D {
                x: x_new[0],
                y: x_new[1],
                theta: normalize_angle(x_new[2]),
            },
            covariance: p_new,
        },
        innovation,
        nis,
    })
}

/// One timestamped sensor input to the filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SensorEvent {
    /// Odometry twist describing motion over the interval ending at `t`.
    Twist {
        t: f64,
        twist: BodyTwist,
    },
    Fix(PositionFix),
}

impl SensorEvent {
    pub fn timestamp(&self) -> f64 {
        match self {
            SensorEvent::Twist { t, .. } => *t,
            SensorEvent::Fix(f) => f.timestamp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub process: ProcessNoise,
    pub measurement: MeasurementNoise,
    /// Mahalanobis gate on NIS; `None` accepts every fix.
    pub gate: Option<f64>,
}

/// What the filter did with one event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepKind {
    Predicted,
    Updated {
        nis: f64,
    },
    /// Fix discarded by the NIS gate.
    Gated {
        nis: f64,
    },
    /// Fix discarded because the innovation covariance was ill-conditioned.
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterStep {
    pub t: f64,
    pub state: FilterState,
    pub kind: StepKind,
}

/// Sequential EKF driven by time-ordered sensor events.
///
/// Between a twist sample and a later fix the last twist is held constant.
#[derive(Debug, Clone)]
pub struct Ekf {
    config: FilterConfig,
    state: FilterState,
    last_t: Option<f64>,
    held_twist: BodyTwist,
    events_seen: usize,
}

impl Ekf {
    pub fn new(init: FilterState, config: FilterConfig) -> Self {
        Self {
            config,
            state: init,
            last_t: None,
            held_twist: BodyTwist::ZERO,
            events_seen: 0,
        }
    }

    pub fn state(&self) -> &FilterState {
        &self.state
    }

    pub fn handle(&mut self, event: &SensorEvent) -> Result<FilterStep> {
        let t = event.timestamp();
        if !t.is_finite() {
            return Err(Error::invalid(format!(
                "event {} has non-finite time",
                self.events_seen
            )));
        }
        let elapsed = match self.last_t {
            Some(prev) if t < prev => {
                return Err(Error::StreamOrder {
                    index: self.events_seen,
                    t,
                    previous: prev,
                })
            }
            Some(prev) => t - prev,
            None => 0.0,
        };
        self.events_seen += 1;
        self.last_t = Some(t);

        let kind = match event {
            SensorEvent::Twist { twist, .. } => {
                if elapsed > 0.0 {
                    self.state = predict(&self.state, twist, elapsed, &self.config.process)?;
                }
                self.held_twist = *twist;
                StepKind::Predicted
            }
            SensorEvent::Fix(fix) => {
                if elapsed > 0.0 {
                    self.state =
                        predict(&self.state, &self.held_twist, elapsed, &self.config.process)?;
                }
                match update_position(&self.state, fix, &self.config.measurement) {
                    Ok(out) if self.config.gate.is_some_and(|g| out.nis > g) => {
                        StepKind::Gated { nis: out.nis }
                    }
                    Ok(out) => {
                        self.state = out.state;
                        StepKind::Updated { nis: out.nis }
                    }
                    Err(Error::UpdateRejected(_)) => StepKind::Rejected,
                    Err(e) => return Err(e),
                }
            }
        };
        Ok(FilterStep {
            t,
            state: self.state,
            kind,
        })
    }
}

/// Runs the filter over a whole event stream, one output step per event.
pub fn run_filter<'a, I>(
    init: FilterState,
    events: I,
    config: &FilterConfig,
) -> Result<Vec<FilterStep>>
where
    I: IntoIterator<Item = &'a SensorEvent>,
{
    let mut ekf = Ekf::new(init, *config);
    events.into_iter().map(|e| ekf.handle(e)).collect()
}
