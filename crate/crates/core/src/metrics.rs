//! Trajectory error and filter consistency statistics.

use std::fmt;

use nalgebra::Vector2;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::ekf::FilterState;
use crate::error::{Error, Result};
use crate::odometry::{interpolate_pose, normalize_angle, Pose2D};

/// Which estimator an error series belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Odometry,
    Ips,
    Ekf,
}

impl Source {
    pub const ALL: [Source; 3] = [Source::Odometry, Source::Ips, Source::Ekf];

    pub fn label(&self) -> &'static str {
        match self {
            Source::Odometry => "odometry",
            Source::Ips => "ips",
            Source::Ekf => "ekf",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Planar distance from ground truth at each estimate timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    pub source: Source,
    pub timestamps: Vec<f64>,
    pub distance_error: Vec<f64>,
}

impl ErrorSeries {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

/// Euclidean `(x, y)` error of each `(t, x, y)` estimate against `truth`,
/// interpolated linearly to the estimate time.
pub fn distance_error_series<I>(
    source: Source,
    estimates: I,
    truth: &[(f64, Pose2D)],
) -> Result<ErrorSeries>
where
    I: IntoIterator<Item = (f64, f64, f64)>,
{
    let mut timestamps = Vec::new();
    let mut distance_error = Vec::new();
    for (t, x, y) in estimates {
        let p = interpolate_pose(truth, t)?;
        timestamps.push(t);
        distance_error.push((x - p.x).hypot(y - p.y));
    }
    Ok(ErrorSeries {
        source,
        timestamps,
        distance_error,
    })
}

/// Absolute heading error (radians) of each `(t, theta)` estimate.
pub fn heading_error_series<I>(estimates: I, truth: &[(f64, Pose2D)]) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    estimates
        .into_iter()
        .map(|(t, theta)| Ok(normalize_angle(theta - interpolate_pose(truth, t)?.theta).abs()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub max: f64,
    pub rmse: f64,
    pub final_error: f64,
}

pub fn summarize(e: &ErrorSeries) -> Result<Summary> {
    let Some(&final_error) = e.distance_error.last() else {
        return Err(Error::invalid(format!(
            "{} error series is empty",
            e.source
        )));
    };
    let n = e.distance_error.len() as f64;
    let max = e.distance_error.iter().copied().fold(0.0, f64::max);
    let rmse = (e.distance_error.iter().map(|d| d * d).sum::<f64>() / n).sqrt();
    Ok(Summary {
        max,
        rmse,
        final_error,
    })
}

/// Position NEES `e^T P^-1 e` for a single 2-D error and position covariance.
pub fn position_nees(error: Vector2<f64>, state: &FilterState) -> Result<f64> {
    let p = state.position_covariance();
    let det = p.determinant();
    if !(det > 0.0 && det.is_finite()) {
        return Err(Error::Consistency(format!(
            "position covariance has determinant {det:e}"
        )));
    }
    let inv = p
        .try_inverse()
        .ok_or_else(|| Error::Consistency("position covariance is not invertible".into()))?;
    Ok((error.transpose() * inv * error)[(0, 0)])
}

/// Position NEES of each `(t, state)` against `truth`.
pub fn nees_series(states: &[(f64, FilterState)], truth: &[(f64, Pose2D)]) -> Result<Vec<f64>> {
    states
        .iter()
        .map(|(t, s)| {
            let p = interpolate_pose(truth, *t)?;
            position_nees(Vector2::new(s.pose.x - p.x, s.pose.y - p.y), s)
        })
        .collect()
}

/// Two-sided acceptance band for the average of `runs` independent
/// chi-square(`dof`) statistics at the given confidence.
pub fn chi_square_mean_band(dof: usize, runs: usize, confidence: f64) -> Result<(f64, f64)> {
    if dof == 0 || runs == 0 || !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid(
            "chi-square band needs dof, runs > 0 and confidence in (0, 1)",
        ));
    }
    let total = (dof * runs) as f64;
    let dist = ChiSquared::new(total).map_err(|e| Error::invalid(e.to_string()))?;
    let tail = (1.0 - confidence) / 2.0;
    Ok((
        dist.inverse_cdf(tail) / runs as f64,
        dist.inverse_cdf(1.0 - tail) / runs as f64,
    ))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
