//! Runs the three estimators (odometry only, IPS only, EKF fusion) over one
//! shared sensor trace and tabulates the result row by row.

use std::collections::BTreeMap;

use crate::ekf::{Ekf, FilterConfig, FilterState, SensorEvent, StepKind};
use crate::error::{Error, Result};
use crate::kinematics::BodyTwist;
use crate::metrics::{distance_error_series, summarize, ErrorSeries, Source, Summary};
use crate::odometry::{integrate_pose, interpolate_pose, Pose2D};
use crate::world::ExperimentTrace;

/// Filter tuning plus the initial covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSettings {
    pub filter: FilterConfig,
    pub initial_variances: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Twist,
    Fix,
}

impl RowKind {
    pub fn label(&self) -> &'static str {
        match self {
            RowKind::Twist => "twist",
            RowKind::Fix => "fix",
        }
    }
}

/// One log row: the state of every estimator right after one sensor event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub kind: RowKind,
    pub truth: Pose2D,
    /// Odometry twist consumed at this row (twist rows only).
    pub twist: Option<BodyTwist>,
    /// Dead-reckoned pose (twist rows only).
    pub odometry: Option<Pose2D>,
    /// Raw IPS fix (fix rows only).
    pub ips: Option<(f64, f64)>,
    pub ekf: Pose2D,
    /// Diagonal of the EKF covariance.
    pub variances: [f64; 3],
    /// NIS of the fix at this row, if it was processed.
    pub nis: Option<f64>,
}

impl TrajectoryRecord {
    pub fn event(&self) -> Result<SensorEvent> {
        match (self.kind, self.twist, self.ips) {
            (RowKind::Twist, Some(twist), _) => Ok(SensorEvent::Twist { t: self.t, twist }),
            (RowKind::Fix, _, Some((x, y))) => {
                Ok(SensorEvent::Fix(crate::ekf::PositionFix::new(x, y, self.t)))
            }
            _ => Err(Error::invalid(format!(
                "row at t={} lacks its sensor columns",
                self.t
            ))),
        }
    }
}

/// Initial filter state at the trajectory start.
pub fn initial_state(settings: &FilterSettings, start: Pose2D) -> Result<FilterState> {
    FilterState::with_variances(start, settings.initial_variances)
}

/// Estimator outputs for a simulated trace.
pub fn run_estimators(
    trace: &ExperimentTrace,
    settings: &FilterSettings,
) -> Result<Vec<TrajectoryRecord>> {
    let start = trace
        .truth
        .first()
        .map(|(_, p)| *p)
        .ok_or_else(|| Error::invalid("trace has no ground truth"))?;
    let truth_at = |t: f64| interpolate_pose(&trace.truth, t);
    let skeleton = trace
        .events
        .iter()
        .map(|e| {
            Ok(TrajectoryRecord {
                t: e.timestamp(),
                kind: match e {
                    SensorEvent::Twist { .. } => RowKind::Twist,
                    SensorEvent::Fix(_) => RowKind::Fix,
                },
                truth: truth_at(e.timestamp())?,
                twist: match e {
                    SensorEvent::Twist { twist, .. } => Some(*twist),
                    SensorEvent::Fix(_) => None,
                },
                odometry: None,
                ips: match e {
                    SensorEvent::Fix(f) => Some((f.x, f.y)),
                    SensorEvent::Twist { .. } => None,
                },
                ekf: start,
                variances: [0.0; 3],
                nis: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    replay(skeleton, start, settings)
}

/// Recomputes the odometry and EKF columns of `rows` from their sensor
/// columns. Ground truth and raw fixes are kept as they are.
pub fn replay(
    mut rows: Vec<TrajectoryRecord>,
    start: Pose2D,
    settings: &FilterSettings,
) -> Result<Vec<TrajectoryRecord>> {
    let mut ekf = Ekf::new(initial_state(settings, start)?, settings.filter);
    let mut odom = start;
    let mut last_twist_t: Option<f64> = None;
    for row in rows.iter_mut() {
        let event = row.event()?;
        if let SensorEvent::Twist { t, twist } = event {
            if let Some(prev) = last_twist_t {
                if t > prev {
                    odom = integrate_pose(&odom, &twist, t - prev)?;
                }
            }
            last_twist_t = Some(t);
            row.odometry = Some(odom);
        } else {
            row.odometry = None;
        }
        let step = ekf.handle(&event)?;
        row.ekf = step.state.pose;
        row.variances = step.state.variances();
        row.nis = match step.kind {
            StepKind::Updated { nis } | StepKind::Gated { nis } => Some(nis),
            _ => None,
        };
    }
    Ok(rows)
}

/// Ground-truth track carried by the rows.
pub fn truth_track(rows: &[TrajectoryRecord]) -> Vec<(f64, Pose2D)> {
    rows.iter().map(|r| (r.t, r.truth)).collect()
}

/// Distance-error series for every estimator present in `rows`.
pub fn error_series(rows: &[TrajectoryRecord]) -> Result<Vec<ErrorSeries>> {
    let truth = truth_track(rows);
    let odom = rows
        .iter()
        .filter_map(|r| r.odometry.map(|p| (r.t, p.x, p.y)));
    let ips = rows.iter().filter_map(|r| r.ips.map(|(x, y)| (r.t, x, y)));
    let ekf = rows.iter().map(|r| (r.t, r.ekf.x, r.ekf.y));
    let all = [
        distance_error_series(Source::Odometry, odom, &truth)?,
        distance_error_series(Source::Ips, ips, &truth)?,
        distance_error_series(Source::Ekf, ekf, &truth)?,
    ];
    Ok(all.into_iter().filter(|s| !s.is_empty()).collect())
}

/// Max / RMSE / final error for every estimator present in `rows`.
pub fn summaries(rows: &[TrajectoryRecord]) -> Result<BTreeMap<Source, Summary>> {
    error_series(rows)?
        .iter()
        .map(|s| Ok((s.source, summarize(s)?)))
        .collect()
}
