//! On-off keying detection by photoelectron counting in a processing window.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poisson;
use crate::seeding::{tags, SeedTree};

const MC_BLOCK: u64 = 1 << 16;

/// Signal and background levels for one processing window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OokOperatingPoint {
    /// Mean signal photoelectrons per pulse.
    pub lambda_s: f64,
    /// Background photoelectron rate, 1/s.
    pub background_rate: f64,
    /// Processing window T_1, s.
    pub window_length: f64,
}

impl OokOperatingPoint {
    pub fn new(lambda_s: f64, background_rate: f64, window_length: f64) -> Result<Self> {
        let p = OokOperatingPoint {
            lambda_s,
            background_rate,
            window_length,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_s.is_finite() && self.lambda_s >= 0.0) {
            return Err(Error::invalid("lambda_s", "must be >= 0"));
        }
        if !(self.background_rate.is_finite() && self.background_rate >= 0.0) {
            return Err(Error::invalid("background_rate", "must be >= 0"));
        }
        if !(self.window_length.is_finite() && self.window_length > 0.0) {
            return Err(Error::invalid("window_length", "must be > 0"));
        }
        Ok(())
    }

    /// Mean background photoelectrons in the window.
    pub fn lambda_b(&self) -> f64 {
        self.background_rate * self.window_length
    }
}

/// Error probability of deciding "on" iff the count is at least `n`, with
/// equiprobable bits.
pub fn error_probability(lambda_s: f64, lambda_b: f64, n: u64) -> f64 {
    0.5 * (poisson::cdf_below(n, lambda_s + lambda_b) + poisson::sf_at_least(n, lambda_b))
}

/// Maximum-likelihood count threshold: decide "on" iff `N ≥ n`.
///
/// The error sum changes by `p_on(n) - p_off(n)` when the threshold moves from
/// `n` to `n + 1`, and the likelihood ratio is increasing in `n`, so the
/// optimum is the first `n` with `p_on(n) ≥ p_off(n)`, i.e.
/// `n ≥ λ_s / ln(1 + λ_s/λ_b)`. Ties resolve to the smaller `n`.
pub fn ml_threshold(point: &OokOperatingPoint) -> Result<u64> {
    point.validate()?;
    if point.lambda_s <= 0.0 {
        return Err(Error::invalid("lambda_s", "must be > 0 for a threshold"));
    }
    let lb = point.lambda_b();
    if lb <= 0.0 {
        return Ok(1);
    }
    let ls = point.lambda_s;
    let log_ratio = (ls / lb).ln_1p();
    // ln p_on(n) - ln p_off(n) = n ln(1 + λs/λb) - λs
    let on_wins = |n: u64| n as f64 * log_ratio - ls >= 0.0;
    let mut n = (ls / log_ratio).ceil().max(0.0) as u64;
    while n > 0 && on_wins(n - 1) {
        n -= 1;
    }
    while !on_wins(n) {
        n += 1;
    }
    Ok(n)
}

/// Analytic BER of the ML counting detector.
pub fn ook_ber_analytic(point: &OokOperatingPoint) -> Result<f64> {
    point.validate()?;
    if point.lambda_s == 0.0 {
        return Ok(0.5);
    }
    let n = ml_threshold(point)?;
    Ok(error_probability(point.lambda_s, point.lambda_b(), n).min(0.5))
}

/// Empirical BER and its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerEstimate {
    pub ber: f64,
    pub std_error: f64,
    pub errors: u64,
    pub trials: u64,
}

/// Monte Carlo BER: equiprobable random bits, Poisson window counts, ML
/// threshold.
pub fn ook_ber_monte_carlo(
    point: &OokOperatingPoint,
    trials: u64,
    seed: u64,
) -> Result<BerEstimate> {
    point.validate()?;
    if trials == 0 {
        return Err(Error::invalid("trials", "must be >= 1"));
    }
    let threshold = if point.lambda_s > 0.0 {
        ml_threshold(point)?
    } else {
        1
    };
    let lb = point.lambda_b();
    let lon = lb + point.lambda_s;
    let streams = SeedTree::new(seed).child(tags::BER);
    let blocks = trials.div_ceil(MC_BLOCK);
    let errors: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = streams.rng(b);
            let n = MC_BLOCK.min(trials - b * MC_BLOCK);
            let mut errs = 0u64;
            for _ in 0..n {
                let on: bool = rng.random();
                let count = poisson::sample(&mut rng, if on { lon } else { lb });
                if (count >= threshold) != on {
                    errs += 1;
                }
            }
            errs
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let ber = errors as f64 / trials as f64;
    let std_error = (ber * (1.0 - ber) / trials as f64).sqrt();
    Ok(BerEstimate {
        ber,
        std_error,
        errors,
        trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub lambda_s: f64,
    pub window_length: f64,
    pub threshold: Option<u64>,
    pub ber: f64,
}

/// Analytic BER over the `λ_s × T_1` grid, `λ_s`-major.
pub fn ber_curve(
    lambda_s_values: &[f64],
    background_rate: f64,
    window_lengths: &[f64],
) -> Result<Vec<BerPoint>> {
    if lambda_s_values.is_empty() {
        return Err(Error::Empty("lambda_s list".into()));
    }
    if window_lengths.is_empty() {
        return Err(Error::Empty("window length list".into()));
    }
    let mut out = Vec::with_capacity(lambda_s_values.len() * window_lengths.len());
    for &ls in lambda_s_values {
        for &t1 in window_lengths {
            let p = OokOperatingPoint::new(ls, background_rate, t1)?;
            let threshold = if ls > 0.0 {
                Some(ml_threshold(&p)?)
            } else {
                None
            };
            out.push(BerPoint {
                lambda_s: ls,
                window_length: t1,
                threshold,
                ber: ook_ber_analytic(&p)?,
            });
        }
    }
    Ok(out)
}

/// Pulse-laser vs continuous-laser comparison at equal energy per symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub symbol_rate: f64,
    pub pulse_energy: f64,
    pub background_rate: f64,
    pub lambda_s: f64,
    pub pulse_window: f64,
    pub pulse_lambda_b: f64,
    pub pulse_ber: f64,
    pub continuous_window: f64,
    pub continuous_lambda_b: f64,
    pub continuous_ber: f64,
    /// True when the pulse window is shorter than the symbol period.
    pub pulse_advantage: bool,
}

/// Compare the pulse system (window `pulse_window`) with a continuous laser
/// of power `E R` integrated over the whole symbol period `1/R`.
///
/// `channel_scale` converts transmitted energy to expected photoelectrons.
pub fn continuous_laser_benchmark(
    symbol_rate: f64,
    pulse_energy: f64,
    background_rate: f64,
    channel_scale: f64,
    pulse_window: f64,
) -> Result<BenchmarkRecord> {
    if !(symbol_rate.is_finite() && symbol_rate > 0.0) {
        return Err(Error::invalid("symbol_rate", "must be > 0"));
    }
    if !(pulse_energy.is_finite() && pulse_energy > 0.0) {
        return Err(Error::invalid("pulse_energy", "must be > 0"));
    }
    if !(channel_scale.is_finite() && channel_scale >= 0.0) {
        return Err(Error::invalid("channel_scale", "must be >= 0"));
    }
    let lambda_s = pulse_energy * channel_scale;
    let period = 1.0 / symbol_rate;
    let pulse = OokOperatingPoint::new(lambda_s, background_rate, pulse_window)?;
    let cont = OokOperatingPoint::new(lambda_s, background_rate, period)?;
    Ok(BenchmarkRecord {
        symbol_rate,
        pulse_energy,
        background_rate,
        lambda_s,
        pulse_window,
        pulse_lambda_b: pulse.lambda_b(),
        pulse_ber: ook_ber_analytic(&pulse)?,
        continuous_window: period,
        continuous_lambda_b: cont.lambda_b(),
        continuous_ber: ook_ber_analytic(&cont)?,
        pulse_advantage: pulse_window < period,
    })
}
