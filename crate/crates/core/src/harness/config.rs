//! Experiment config file.
//!
//! A sectioned key/value file (TOML syntax) where every key carries its unit.
//! Missing keys take the platform defaults; unknown keys are rejected.
//!
//! ```toml
//! seed = 7
//! runs = 1
//!
//! [geometry]
//! wheel_radius_mm = 46.875
//! half_wheelbase_mm = 135.0
//! half_track_mm = 125.0
//! encoder_ppr = 1700
//!
//! [trajectory]
//! side_length_m = 3.0
//! cruise_speed_mps = 0.5
//! odometry_rate_hz = 50.0
//! laps = 2
//!
//! [slip]
//! mode = "under_report"
//! factors = [1.02, 1.02, 1.0, 1.0]
//! jitter_std = 0.005
//!
//! [odometry_noise]
//! sigma_vx_mps = 0.0
//! sigma_vy_mps = 0.0
//! sigma_omega_radps = 0.0
//!
//! [ips]
//! noise_mode = "range"
//! sigma_range_m = 0.3
//! sigma_xy_m = 0.1
//! rate_hz = 8.0
//! dropout_prob = 0.0
//! mobile_height_m = 0.2
//! speed_of_sound_mps = 343.0
//! beacons_m = [[0.0, -3.0, 2.0], [3.0, -3.0, 2.0], [3.0, 0.0, 2.0], [0.0, 0.0, 2.0]]
//!
//! [filter]
//! sigma_vx_mps = 0.05
//! sigma_vy_mps = 0.05
//! sigma_omega_radps = 0.05
//! sigma_ips_m = 0.3
//! initial_variance = [0.01, 0.01, 0.01]
//! gate = false
//! gate_threshold = 13.8
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::ekf::{FilterConfig, MeasurementNoise, ProcessNoise, DEFAULT_GATE};
use crate::error::{Error, Result};
use crate::harness::experiment::FilterSettings;
use crate::ips::{
    BeaconLayout, IpsConfig, IpsNoise, DEFAULT_MOBILE_HEIGHT, DEFAULT_SPEED_OF_SOUND,
};
use crate::kinematics::{MecanumGeometry, DEFAULT_PPR};
use crate::world::{SlipMode, SlipModel, TrajectoryPlan, TwistNoise, WorldConfig};

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    seed: u64,
    runs: usize,
    geometry: RawGeometry,
    trajectory: RawTrajectory,
    slip: RawSlip,
    odometry_noise: RawTwistNoise,
    ips: RawIps,
    filter: RawFilter,
}

impl Default for RawConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            runs: 1,
            geometry: RawGeometry::default(),
            trajectory: RawTrajectory::default(),
            slip: RawSlip::default(),
            odometry_noise: RawTwistNoise::default(),
            ips: RawIps::default(),
            filter: RawFilter::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawGeometry {
    wheel_radius_mm: f64,
    half_wheelbase_mm: f64,
    half_track_mm: f64,
    encoder_ppr: f64,
}

impl Default for RawGeometry {
    fn default() -> Self {
        Self {
            wheel_radius_mm: 46.875,
            half_wheelbase_mm: 135.0,
            half_track_mm: 125.0,
            encoder_ppr: DEFAULT_PPR,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawTrajectory {
    side_length_m: f64,
    cruise_speed_mps: f64,
    odometry_rate_hz: f64,
    laps: usize,
}

impl Default for RawTrajectory {
    fn default() -> Self {
        Self {
            side_length_m: 3.0,
            cruise_speed_mps: 0.5,
            odometry_rate_hz: 50.0,
            laps: 2,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSlip {
    mode: String,
    factors: [f64; 4],
    jitter_std: f64,
}

impl Default for RawSlip {
    fn default() -> Self {
        let s = SlipModel::default();
        Self {
            mode: "under_report".into(),
            factors: s.factors,
            jitter_std: s.jitter_std,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawTwistNoise {
    sigma_vx_mps: f64,
    sigma_vy_mps: f64,
    sigma_omega_radps: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawIps {
    noise_mode: String,
    sigma_range_m: f64,
    sigma_xy_m: f64,
    rate_hz: f64,
    dropout_prob: f64,
    mobile_height_m: f64,
    speed_of_sound_mps: f64,
    beacons_m: Vec<[f64; 3]>,
}

impl Default for RawIps {
    fn default() -> Self {
        Self {
            noise_mode: "range".into(),
            sigma_range_m: 0.3,
            sigma_xy_m: 0.1,
            rate_hz: 8.0,
            dropout_prob: 0.0,
            mobile_height_m: DEFAULT_MOBILE_HEIGHT,
            speed_of_sound_mps: DEFAULT_SPEED_OF_SOUND,
            beacons_m: vec![
                [0.0, -3.0, 2.0],
                [3.0, -3.0, 2.0],
                [3.0, 0.0, 2.0],
                [0.0, 0.0, 2.0],
            ],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawFilter {
    sigma_vx_mps: f64,
    sigma_vy_mps: f64,
    sigma_omega_radps: f64,
    sigma_ips_m: f64,
    initial_variance: [f64; 3],
    gate: bool,
    gate_threshold: f64,
}

impl Default for RawFilter {
    fn default() -> Self {
        Self {
            sigma_vx_mps: 0.05,
            sigma_vy_mps: 0.05,
            sigma_omega_radps: 0.05,
            sigma_ips_m: 0.3,
            initial_variance: [0.01; 3],
            gate: false,
            gate_threshold: DEFAULT_GATE,
        }
    }
}

/// Fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub world: WorldConfig,
    pub filter: FilterSettings,
    pub seed: u64,
    pub runs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        RawConfig::default()
            .validate()
            .expect("default config is valid")
    }
}

fn field<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Config {
        field: name.to_string(),
        message: match e {
            Error::InvalidInput(m) | Error::DegenerateGeometry(m) => m,
            other => other.to_string(),
        },
    })
}

fn check(name: &str, ok: bool, message: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config {
            field: name.to_string(),
            message: message.into(),
        })
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    check(
        name,
        v > 0.0 && v.is_finite(),
        format!("must be a positive number, got {v}"),
    )
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    check(
        name,
        v >= 0.0 && v.is_finite(),
        format!("must be >= 0, got {v}"),
    )
}

impl RawConfig {
    fn validate(self) -> Result<ExperimentConfig> {
        check("runs", self.runs >= 1, "must be >= 1")?;

        let g = &self.geometry;
        positive("geometry.wheel_radius_mm", g.wheel_radius_mm)?;
        positive("geometry.half_wheelbase_mm", g.half_wheelbase_mm)?;
        positive("geometry.half_track_mm", g.half_track_mm)?;
        positive("geometry.encoder_ppr", g.encoder_ppr)?;
        let geometry = MecanumGeometry::new(
            g.wheel_radius_mm / 1000.0,
            g.half_wheelbase_mm / 1000.0,
            g.half_track_mm / 1000.0,
        )?;

        let tr = &self.trajectory;
        positive("trajectory.side_length_m", tr.side_length_m)?;
        positive("trajectory.cruise_speed_mps", tr.cruise_speed_mps)?;
        positive("trajectory.odometry_rate_hz", tr.odometry_rate_hz)?;
        check("trajectory.laps", tr.laps >= 1, "must be >= 1")?;
        let plan = TrajectoryPlan::new(
            tr.side_length_m,
            tr.cruise_speed_mps,
            1.0 / tr.odometry_rate_hz,
            tr.laps,
        )?;

        let mode = match self.slip.mode.as_str() {
            "under_report" => SlipMode::UnderReport,
            "over_report" => SlipMode::OverReport,
            other => {
                return Err(Error::Config {
                    field: "slip.mode".into(),
                    message: format!("expected \"under_report\" or \"over_report\", got {other:?}"),
                })
            }
        };
        for (i, f) in self.slip.factors.iter().enumerate() {
            positive(&format!("slip.factors[{i}]"), *f)?;
        }
        non_negative("slip.jitter_std", self.slip.jitter_std)?;
        let slip = SlipModel {
            factors: self.slip.factors,
            jitter_std: self.slip.jitter_std,
            mode,
        };

        let n = &self.odometry_noise;
        non_negative("odometry_noise.sigma_vx_mps", n.sigma_vx_mps)?;
        non_negative("odometry_noise.sigma_vy_mps", n.sigma_vy_mps)?;
        non_negative("odometry_noise.sigma_omega_radps", n.sigma_omega_radps)?;
        let twist_noise = TwistNoise {
            sigma_vx: n.sigma_vx_mps,
            sigma_vy: n.sigma_vy_mps,
            sigma_omega: n.sigma_omega_radps,
        };

        let ips = &self.ips;
        let noise = match ips.noise_mode.as_str() {
            "range" => {
                non_negative("ips.sigma_range_m", ips.sigma_range_m)?;
                IpsNoise::Range {
                    sigma_range: ips.sigma_range_m,
                }
            }
            "direct" => {
                non_negative("ips.sigma_xy_m", ips.sigma_xy_m)?;
                IpsNoise::Direct {
                    sigma_xy: ips.sigma_xy_m,
                }
            }
            other => {
                return Err(Error::Config {
                    field: "ips.noise_mode".into(),
                    message: format!("expected \"range\" or \"direct\", got {other:?}"),
                })
            }
        };
        positive("ips.rate_hz", ips.rate_hz)?;
        check(
            "ips.dropout_prob",
            (0.0..1.0).contains(&ips.dropout_prob),
            format!("must be in [0, 1), got {}", ips.dropout_prob),
        )?;
        non_negative("ips.mobile_height_m", ips.mobile_height_m)?;
        positive("ips.speed_of_sound_mps", ips.speed_of_sound_mps)?;
        let layout = field(
            "ips.beacons_m",
            BeaconLayout::new(ips.beacons_m.clone(), ips.speed_of_sound_mps),
        )?;
        let ips = IpsConfig {
            layout,
            mobile_z: ips.mobile_height_m,
            rate_hz: ips.rate_hz,
            noise,
            dropout_prob: ips.dropout_prob,
        };

        let f = &self.filter;
        positive("filter.sigma_vx_mps", f.sigma_vx_mps)?;
        positive("filter.sigma_vy_mps", f.sigma_vy_mps)?;
        positive("filter.sigma_omega_radps", f.sigma_omega_radps)?;
        positive("filter.sigma_ips_m", f.sigma_ips_m)?;
        for (i, v) in f.initial_variance.iter().enumerate() {
            positive(&format!("filter.initial_variance[{i}]"), *v)?;
        }
        positive("filter.gate_threshold", f.gate_threshold)?;
        let filter = FilterSettings {
            filter: FilterConfig {
                process: ProcessNoise::new(f.sigma_vx_mps, f.sigma_vy_mps, f.sigma_omega_radps)?,
                measurement: MeasurementNoise::new(f.sigma_ips_m)?,
                gate: f.gate.then_some(f.gate_threshold),
            },
            initial_variances: f.initial_variance,
        };

        Ok(ExperimentConfig {
            world: WorldConfig {
                geometry,
                plan,
                slip,
                ppr: g.encoder_ppr,
                twist_noise,
                ips,
            },
            filter,
            seed: self.seed,
            runs: self.runs,
        })
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let field = e
                .span()
                .map(|s| {
                    let line = text[..s.start].matches('\n').count() + 1;
                    format!("line {line}")
                })
                .unwrap_or_else(|| "<file>".into());
            Error::Config { field, message }
        })?;
        raw.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            field: "<file>".into(),
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_platform_defaults() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg.world.geometry, MecanumGeometry::default());
        assert_eq!(cfg.world.ppr, 1700.0);
        assert_eq!(cfg.world.plan, TrajectoryPlan::default());
        assert_eq!(cfg.world.ips.layout, BeaconLayout::default());
        assert_eq!(cfg.filter.filter.gate, None);
        assert_eq!(cfg.runs, 1);
    }

    #[test]
    fn overrides_apply() {
        let cfg = ExperimentConfig::parse(
            "seed = 9\n[trajectory]\nlaps = 4\n[ips]\nnoise_mode = \"direct\"\nsigma_xy_m = 0.2\n[filter]\ngate = true\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.world.plan.laps, 4);
        assert_eq!(cfg.world.ips.noise, IpsNoise::Direct { sigma_xy: 0.2 });
        assert_eq!(cfg.filter.filter.gate, Some(DEFAULT_GATE));
    }

    #[test]
    fn errors_name_the_field() {
        let err = ExperimentConfig::parse("[geometry]\nwheel_radius_mm = -1.0\n").unwrap_err();
        assert!(
            matches!(&err, Error::Config { field, .. } if field == "geometry.wheel_radius_mm"),
            "{err}"
        );
        assert_eq!(err.exit_code(), 2);

        let err = ExperimentConfig::parse("[slip]\nmode = \"sideways\"\n").unwrap_err();
        assert!(matches!(&err, Error::Config { field, .. } if field == "slip.mode"));

        let err =
            ExperimentConfig::parse("[ips]\nbeacons_m = [[0.0, 0.0, 2.0], [1.0, 1.0, 2.0]]\n")
                .unwrap_err();
        assert!(matches!(&err, Error::Config { field, .. } if field == "ips.beacons_m"));

        let err = ExperimentConfig::parse("[filter]\nsigma_ipz_m = 0.3\n").unwrap_err();
        assert!(err.to_string().contains("sigma_ipz_m"), "{err}");
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
