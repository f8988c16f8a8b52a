//! Command-line front end: argument parsing, experiment orchestration and
//! file output. Every artifact is written as CSV plus a JSON provenance
//! envelope carrying the config hash and master seed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::channel::{
    average_impulse_responses, broadening_elevation_sweep, pulse_broadening,
    simulate_impulse_response, Geometry, ImpulseResponse,
};
use crate::config::ExperimentConfig;
use crate::detection::{ber_curve, ook_ber_monte_carlo, OokOperatingPoint};
use crate::error::Error;
use crate::localization::{build_template, localization_benchmark, DeviationSummary};
use crate::seeding::{tags, SeedTree};
use crate::signal::{calibrate_pulse_energy, mean_signal_count, signal_rate, SourceDetectorParams};

#[derive(Debug, Parser)]
#[command(
    name = "nlos-uv",
    version,
    about = "Pulse-laser NLOS ultraviolet link experiments"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Photons per channel realization (overrides the config).
    #[arg(long, global = true)]
    pub photons: Option<u64>,
    /// Realizations for the selected command (overrides the config).
    #[arg(long, global = true)]
    pub realizations: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Impulse responses for the configured geometry.
    SimulateChannel,
    /// Averaged-response broadening against receiver elevation.
    BroadeningSweep,
    /// OOK bit error rate over the (λ_s, T_1) grid.
    BerCurve,
    /// Counting vs correlation pulse localization.
    LocalizeBench,
    /// Pulse template from averaged channel realizations.
    BuildTemplate,
    /// Pulse energy that yields the target mean signal count.
    CalibrateEnergy,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SimulateChannel => "simulate-channel",
            Command::BroadeningSweep => "broadening-sweep",
            Command::BerCurve => "ber-curve",
            Command::LocalizeBench => "localize-bench",
            Command::BuildTemplate => "build-template",
            Command::CalibrateEnergy => "calibrate-energy",
        }
    }
}

/// Failure classes mapped to process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(Error),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Load the config, apply flag overrides and validate.
pub fn resolve_config(command: Command, args: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path).map_err(CliError::Config)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(photons) = args.photons {
        cfg.transport.photons = photons;
    }
    if let Some(r) = args.realizations {
        match command {
            Command::SimulateChannel => cfg.channel.realizations = r,
            Command::BroadeningSweep => cfg.sweep.realizations = r,
            Command::LocalizeBench => cfg.benchmark.realizations = r,
            Command::BuildTemplate => cfg.template.realizations = r,
            Command::CalibrateEnergy => cfg.calibration.realizations = r,
            Command::BerCurve => cfg.ber.monte_carlo_trials = r as u64,
        }
    }
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

/// Run one command with the given flags. Returns the files written.
pub fn run(command: Command, args: &CommonArgs) -> Result<Vec<PathBuf>, CliError> {
    if args.threads == Some(0) {
        return Err(CliError::Config(Error::InvalidParameter {
            field: "threads".into(),
            reason: "must be >= 1".into(),
        }));
    }
    let cfg = resolve_config(command, args)?;
    let work = || execute(command, &cfg);
    match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .install(work),
        None => work(),
    }
}

fn execute(command: Command, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(&cfg.output_dir)?;
    let mut out = Output::new(command, cfg);
    match command {
        Command::SimulateChannel => simulate_channel(cfg, &mut out)?,
        Command::BroadeningSweep => broadening_sweep(cfg, &mut out)?,
        Command::BerCurve => ber(cfg, &mut out)?,
        Command::LocalizeBench => localize_bench(cfg, &mut out)?,
        Command::BuildTemplate => template(cfg, &mut out)?,
        Command::CalibrateEnergy => calibrate(cfg, &mut out)?,
    }
    out.finish()
}

/// Collects CSV files and results, then writes the provenance envelope.
struct Output<'a> {
    command: Command,
    cfg: &'a ExperimentConfig,
    files: Vec<PathBuf>,
    results: serde_json::Value,
}

impl<'a> Output<'a> {
    fn new(command: Command, cfg: &'a ExperimentConfig) -> Self {
        Output {
            command,
            cfg,
            files: Vec::new(),
            results: serde_json::Value::Null,
        }
    }

    fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<(), CliError> {
        let mut text = format!(
            "# {} seed={} config_sha256={}\n{}\n",
            self.command.name(),
            self.cfg.seed,
            self.cfg.hash(),
            header.join(",")
        );
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            let _ = writeln!(text, "{}", row.join(","));
        }
        self.write(name, text)
    }

    fn write(&mut self, name: &str, text: String) -> Result<(), CliError> {
        let path = self.cfg.output_dir.join(name);
        fs::write(&path, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(path);
        Ok(())
    }

    fn finish(mut self) -> Result<Vec<PathBuf>, CliError> {
        let names: Vec<String> = self
            .files
            .iter()
            .map(|p| {
                p.file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default()
            })
            .collect();
        let envelope = json!({
            "command": self.command.name(),
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.cfg.seed,
            "config_sha256": self.cfg.hash(),
            "config": self.cfg,
            "files": names,
            "results": self.results,
        });
        let text = serde_json::to_string_pretty(&envelope).expect("envelope serializes") + "\n";
        let name = format!("{}.json", self.command.name());
        self.write(&name, text)?;
        Ok(self.files)
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn ir_rows(ir: &ImpulseResponse) -> Vec<Vec<String>> {
    ir.bins
        .iter()
        .enumerate()
        .map(|(i, &b)| vec![num(ir.bin_start(i)), num(b), num(ir.variance[i].sqrt())])
        .collect()
}

const IR_HEADER: [&str; 3] = ["bin_start_s", "arrival_probability", "std_error"];

#[derive(Serialize)]
struct ResponseSummary {
    total_arrival: f64,
    reachable: bool,
    left_boundary: Option<f64>,
    right_boundary: Option<f64>,
    broadening: Option<f64>,
}

fn summarize(ir: &ImpulseResponse, frac: f64) -> ResponseSummary {
    let b = pulse_broadening(ir, frac).ok();
    ResponseSummary {
        total_arrival: ir.total(),
        reachable: ir.reachable,
        left_boundary: b.map(|b| b.left_boundary),
        right_boundary: b.map(|b| b.right_boundary),
        broadening: b.map(|b| b.broadening),
    }
}

fn channel_realizations(
    cfg: &ExperimentConfig,
    geometry: &Geometry,
    root: SeedTree,
    count: usize,
) -> Result<Vec<ImpulseResponse>, Error> {
    (0..count as u64)
        .map(|r| {
            simulate_impulse_response(
                geometry,
                &cfg.atmosphere,
                &cfg.transport,
                root.child(r).seed(),
            )
        })
        .collect()
}

fn simulate_channel(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let irs = channel_realizations(
        cfg,
        &cfg.geometry,
        SeedTree::new(cfg.seed).child(tags::CHANNEL),
        cfg.channel.realizations,
    )?;
    let frac = cfg.channel.threshold_fraction;
    let mut per = Vec::new();
    for (i, ir) in irs.iter().enumerate() {
        out.csv(&format!("channel_r{i:04}.csv"), &IR_HEADER, ir_rows(ir))?;
        per.push(summarize(ir, frac));
    }
    let mean = average_impulse_responses(&irs)?;
    out.csv("channel_mean.csv", &IR_HEADER, ir_rows(&mean))?;
    out.results = json!({ "realizations": per, "mean": summarize(&mean, frac) });
    Ok(())
}

fn broadening_sweep(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let s = &cfg.sweep;
    let rows = broadening_elevation_sweep(
        &cfg.geometry,
        &cfg.atmosphere,
        &s.elevations,
        s.realizations,
        &cfg.transport,
        s.threshold_fraction,
        cfg.seed,
    )?;
    out.csv(
        "broadening_sweep.csv",
        &[
            "elevation_rad",
            "broadening_s",
            "left_boundary_s",
            "right_boundary_s",
            "total_arrival",
        ],
        rows.iter().map(|r| {
            vec![
                num(r.elevation),
                num(r.broadening),
                num(r.left_boundary),
                num(r.right_boundary),
                num(r.total_arrival),
            ]
        }),
    )?;
    let b: Vec<f64> = rows.iter().map(|r| r.broadening).collect();
    let max = b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = b.iter().copied().fold(f64::INFINITY, f64::min);
    out.results = json!({ "rows": rows, "max_min_ratio": max / min });
    Ok(())
}

fn ber(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let b = &cfg.ber;
    let rate = cfg.source.background_rate;
    let points = ber_curve(&b.lambda_s, rate, &b.window_lengths)?;
    let root = SeedTree::new(cfg.seed).child(tags::BER);
    let mut rows = Vec::with_capacity(points.len());
    let mut records = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let mc = if b.monte_carlo_trials > 0 {
            let op = OokOperatingPoint::new(p.lambda_s, rate, p.window_length)?;
            Some(ook_ber_monte_carlo(
                &op,
                b.monte_carlo_trials,
                root.child(i as u64).seed(),
            )?)
        } else {
            None
        };
        rows.push(vec![
            num(p.lambda_s),
            num(p.window_length),
            num(rate * p.window_length),
            p.threshold.map(|t| t.to_string()).unwrap_or_default(),
            num(p.ber),
            opt(mc.map(|m| m.ber)),
            opt(mc.map(|m| m.std_error)),
            mc.map(|m| m.trials.to_string()).unwrap_or_default(),
        ]);
        records.push(json!({ "analytic": p, "monte_carlo": mc }));
    }
    out.csv(
        "ber_curve.csv",
        &[
            "lambda_s",
            "window_length_s",
            "lambda_b",
            "threshold",
            "ber_analytic",
            "ber_monte_carlo",
            "mc_std_error",
            "mc_trials",
        ],
        rows,
    )?;
    out.results = json!({ "points": records });
    Ok(())
}

fn localize_bench(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let rows = localization_benchmark(
        &cfg.geometry,
        &cfg.atmosphere,
        &cfg.source,
        &cfg.benchmark_spec(),
        cfg.seed,
    )?;
    let e = |s: &Option<DeviationSummary>| s.map(|s| s.e_m);
    let nf = |s: &Option<DeviationSummary>, total: usize| {
        s.map(|s| s.not_found).unwrap_or(total).to_string()
    };
    out.csv(
        "localization_benchmark.csv",
        &[
            "distance_m",
            "P_L",
            "P_L1_hat",
            "P_L2_hat",
            "P_R",
            "P_R1_hat",
            "P_R2_hat",
            "e_M_counting_s",
            "e_M_correlation_s",
            "not_found_counting",
            "not_found_correlation",
            "empty_realizations",
            "pulse_energy_J",
            "template_chips",
        ],
        rows.iter().map(|r| {
            let s = r.sample.as_ref();
            let total = cfg.benchmark.realizations - r.empty_realizations;
            vec![
                num(r.distance),
                opt(s.map(|s| s.truth.0)),
                opt(s.and_then(|s| s.counting).map(|w| w.start)),
                opt(s.and_then(|s| s.correlation).map(|w| w.start)),
                opt(s.map(|s| s.truth.1)),
                opt(s.and_then(|s| s.counting).map(|w| w.end)),
                opt(s.and_then(|s| s.correlation).map(|w| w.end)),
                opt(e(&r.counting)),
                opt(e(&r.correlation)),
                nf(&r.counting, total),
                nf(&r.correlation, total),
                r.empty_realizations.to_string(),
                num(r.pulse_energy),
                r.template_chips.to_string(),
            ]
        }),
    )?;
    let wins = rows
        .iter()
        .filter(|r| matches!((e(&r.counting), e(&r.correlation)), (Some(c), Some(m)) if m < c))
        .count();
    out.results = json!({ "rows": rows, "correlation_wins": wins });
    Ok(())
}

fn template(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let t = &cfg.template;
    let irs = channel_realizations(
        cfg,
        &cfg.geometry,
        SeedTree::new(cfg.seed).child(tags::TEMPLATE),
        t.realizations,
    )?;
    let template = build_template(&irs, t.chip_duration, t.boundary_fraction)?;
    out.csv(
        "template.csv",
        &["chip", "time_s", "value"],
        template.values.iter().enumerate().map(|(i, &v)| {
            vec![
                i.to_string(),
                num(template.lead_time + i as f64 * template.chip_duration),
                num(v),
            ]
        }),
    )?;
    out.results = json!({
        "chips": template.len(),
        "chip_duration": template.chip_duration,
        "lead_time": template.lead_time,
        "duration": template.duration(),
    });
    Ok(())
}

fn calibrate(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let c = &cfg.calibration;
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (di, &d) in c.distances.iter().enumerate() {
        let geometry = Geometry {
            baseline_distance: d,
            ..cfg.geometry
        };
        let root = SeedTree::new(cfg.seed)
            .child(tags::CALIBRATION)
            .child(di as u64);
        let irs = channel_realizations(cfg, &geometry, root, c.realizations)?;
        let mean = average_impulse_responses(&irs)?;
        let energy = calibrate_pulse_energy(&mean, &cfg.source, c.target_lambda_s)?;
        let source = SourceDetectorParams {
            pulse_energy: energy,
            ..cfg.source
        };
        let lambda_s = mean_signal_count(&signal_rate(&mean, &source)?);
        rows.push(vec![num(d), num(mean.total()), num(energy), num(lambda_s)]);
        records.push(json!({
            "distance": d,
            "total_arrival": mean.total(),
            "pulse_energy": energy,
            "lambda_s": lambda_s,
        }));
    }
    out.csv(
        "calibration.csv",
        &["distance_m", "total_arrival", "pulse_energy_J", "lambda_s"],
        rows,
    )?;
    out.results = json!({ "distances": records, "target_lambda_s": c.target_lambda_s });
    Ok(())
}

/// Convenience for tests and embedding: run with defaults written to `dir`.
pub fn default_args(dir: &Path) -> CommonArgs {
    CommonArgs {
        config: None,
        seed: None,
        out: Some(dir.to_path_buf()),
        threads: None,
        photons: None,
        realizations: None,
    }
}
