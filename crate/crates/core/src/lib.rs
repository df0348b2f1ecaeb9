//! Planar localization for a four-mecanum-wheel robot.
//!
//! The crate covers the whole chain of a desk-scale reproduction of an
//! odometry + ultrasonic-beacon fusion experiment:
//!
//! - [`kinematics`]: wheel rates to body twist and back, encoder decoding
//! - [`odometry`]: dead-reckoning pose integration
//! - [`ips`]: beacon ranging and Gauss-Newton trilateration
//! - [`ekf`]: extended Kalman filter fusing twists with position fixes
//! - [`world`]: scripted square-loop run with wheel slip and sensor noise
//! - [`metrics`]: distance error, RMSE and NEES/NIS statistics
//! - [`harness`]: config and log formats plus the CLI commands

pub mod ekf;
pub mod error;
pub mod harness;
pub mod ips;
pub mod kinematics;
pub mod metrics;
pub mod odometry;
pub mod world;

pub use ekf::{
    FilterConfig, FilterState, MeasurementNoise, PositionFix, ProcessNoise, SensorEvent,
};
pub use error::{Error, Result};
pub use ips::{BeaconLayout, IpsConfig, IpsNoise, RangeSet};
pub use kinematics::{BodyTwist, EncoderTicks, MecanumGeometry, WheelSpeeds};
pub use metrics::{ErrorSeries, Source, Summary};
pub use odometry::Pose2D;
pub use world::{ExperimentTrace, SlipMode, SlipModel, TrajectoryPlan, WorldConfig};
