//! Experiment configuration: one TOML file with a section per subsystem.
//! Every field has a default, so an empty file is a valid Table-1 setup.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::atmosphere::AtmosphereParams;
use crate::channel::{Geometry, TransportConfig};
use crate::error::{Error, Result};
use crate::localization::BenchmarkSpec;
use crate::signal::{SourceDetectorParams, DEFAULT_BOUNDARY_FRACTION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelRun {
    pub realizations: usize,
    /// Threshold fraction for the reported broadening.
    pub threshold_fraction: f64,
}

impl Default for ChannelRun {
    fn default() -> Self {
        ChannelRun {
            realizations: 1,
            threshold_fraction: DEFAULT_BOUNDARY_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Receiver elevations, rad.
    pub elevations: Vec<f64>,
    pub realizations: usize,
    pub threshold_fraction: f64,
}

/// `π/12, 2π/12, …, π/2`.
pub fn default_elevations() -> Vec<f64> {
    (1..=6)
        .map(|k| (k as f64 * PI / 12.0).min(PI / 2.0))
        .collect()
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            elevations: default_elevations(),
            realizations: 20,
            threshold_fraction: DEFAULT_BOUNDARY_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BerConfig {
    pub lambda_s: Vec<f64>,
    /// Processing windows T_1, s.
    pub window_lengths: Vec<f64>,
    /// Monte Carlo trials per grid point; 0 skips the simulated column.
    pub monte_carlo_trials: u64,
}

impl Default for BerConfig {
    fn default() -> Self {
        BerConfig {
            lambda_s: vec![50.0, 75.0, 100.0],
            window_lengths: (1..=20).map(|k| k as f64 / 1e4).collect(),
            monte_carlo_trials: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateConfig {
    pub realizations: usize,
    pub chip_duration: f64,
    pub boundary_fraction: f64,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        TemplateConfig {
            realizations: 100,
            chip_duration: 20e-9,
            boundary_fraction: DEFAULT_BOUNDARY_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Baselines to calibrate, m.
    pub distances: Vec<f64>,
    pub target_lambda_s: f64,
    /// Channel realizations averaged per distance.
    pub realizations: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            distances: vec![5000.0, 6000.0, 7000.0, 8000.0, 9000.0],
            target_lambda_s: 50.0,
            realizations: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Not part of the provenance record, so relocating outputs does not
    /// change them.
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
    pub geometry: Geometry,
    pub atmosphere: AtmosphereParams,
    pub source: SourceDetectorParams,
    pub transport: TransportConfig,
    pub channel: ChannelRun,
    pub sweep: SweepConfig,
    pub ber: BerConfig,
    pub template: TemplateConfig,
    pub benchmark: BenchmarkSpec,
    pub calibration: CalibrationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            output_dir: PathBuf::from("out"),
            geometry: Geometry::default(),
            atmosphere: AtmosphereParams::default(),
            source: SourceDetectorParams::default(),
            transport: TransportConfig::default(),
            channel: ChannelRun::default(),
            sweep: SweepConfig::default(),
            ber: BerConfig::default(),
            template: TemplateConfig::default(),
            benchmark: BenchmarkSpec::default(),
            calibration: CalibrationConfig::default(),
        }
    }
}

/// Prefix the field name of a validation error with its section.
fn section<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidParameter { field, reason } => Error::InvalidParameter {
            field: format!("{name}.{field}"),
            reason,
        },
        Error::Empty(what) => Error::InvalidParameter {
            field: name.to_owned(),
            reason: format!("empty {what}"),
        },
        other => Error::InvalidParameter {
            field: name.to_owned(),
            reason: other.to_string(),
        },
    })
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be > 0, got {v}")))
    }
}

fn at_least_one(field: &str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(Error::invalid(field, "must be >= 1"))
    }
}

fn fraction(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            format!("must lie in (0, 1), got {v}"),
        ))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidParameter {
            field: "config".into(),
            reason: e.message().to_owned(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidParameter {
            field: "config".into(),
            reason: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::from_toml_str(&text)
    }

    /// Check every section. Errors name the offending field as
    /// `section.field`.
    pub fn validate(&self) -> Result<()> {
        section("geometry", self.geometry.validate())?;
        section("atmosphere", self.atmosphere.validate())?;
        section("source", self.source.validate())?;
        section("transport", self.transport.validate())?;

        section(
            "channel",
            at_least_one("realizations", self.channel.realizations),
        )?;
        section(
            "channel",
            fraction("threshold_fraction", self.channel.threshold_fraction),
        )?;

        let s = &self.sweep;
        if s.elevations.is_empty() {
            return Err(Error::invalid("sweep.elevations", "must not be empty"));
        }
        for &e in &s.elevations {
            section(
                "sweep",
                Geometry {
                    rx_elevation: e,
                    ..self.geometry
                }
                .validate()
                .map_err(|_| Error::invalid("elevations", format!("{e} outside [0, pi/2]"))),
            )?;
        }
        section("sweep", at_least_one("realizations", s.realizations))?;
        section(
            "sweep",
            fraction("threshold_fraction", s.threshold_fraction),
        )?;

        let b = &self.ber;
        if b.lambda_s.is_empty() {
            return Err(Error::invalid("ber.lambda_s", "must not be empty"));
        }
        if b.window_lengths.is_empty() {
            return Err(Error::invalid("ber.window_lengths", "must not be empty"));
        }
        for &l in &b.lambda_s {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::invalid(
                    "ber.lambda_s",
                    format!("must be >= 0, got {l}"),
                ));
            }
        }
        for &t in &b.window_lengths {
            section("ber", positive("window_lengths", t))?;
        }

        let t = &self.template;
        section("template", at_least_one("realizations", t.realizations))?;
        section("template", positive("chip_duration", t.chip_duration))?;
        section(
            "template",
            fraction("boundary_fraction", t.boundary_fraction),
        )?;

        section("benchmark", self.benchmark_spec().validate())?;

        let c = &self.calibration;
        if c.distances.is_empty() {
            return Err(Error::invalid("calibration.distances", "must not be empty"));
        }
        for &d in &c.distances {
            section("calibration", positive("distances", d))?;
        }
        section(
            "calibration",
            positive("target_lambda_s", c.target_lambda_s),
        )?;
        section("calibration", at_least_one("realizations", c.realizations))?;
        Ok(())
    }

    /// Benchmark settings with the experiment-wide transport knobs.
    pub fn benchmark_spec(&self) -> BenchmarkSpec {
        BenchmarkSpec {
            transport: self.transport,
            ..self.benchmark.clone()
        }
    }

    /// SHA-256 of the canonical JSON form of the configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(json.as_bytes()))
    }
}
