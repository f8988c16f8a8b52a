//! Photoelectron statistics at the detector: signal rate from the channel
//! response, and chip-binned Poisson traces.

use serde::{Deserialize, Serialize};

use crate::channel::{support_boundaries, ImpulseResponse, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::poisson;
use crate::seeding::{tags, SeedTree};

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626e-34;

/// Fraction of the peak rate that delimits the pulse support.
pub const DEFAULT_BOUNDARY_FRACTION: f64 = 0.01;

/// Transmitter pulse and detector parameters.
///
/// The quantum efficiency default of 0.2 is a typical solar-blind PMT value,
/// not a measured one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceDetectorParams {
    /// Energy per transmitted pulse, J.
    pub pulse_energy: f64,
    pub quantum_efficiency: f64,
    /// Wavelength, m.
    pub wavelength: f64,
    /// Background photoelectron rate, 1/s.
    pub background_rate: f64,
}

impl Default for SourceDetectorParams {
    fn default() -> Self {
        SourceDetectorParams {
            pulse_energy: 0.1,
            quantum_efficiency: 0.2,
            wavelength: 266e-9,
            background_rate: 5e4,
        }
    }
}

impl SourceDetectorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pulse_energy.is_finite() && self.pulse_energy > 0.0) {
            return Err(Error::invalid("pulse_energy", "must be > 0"));
        }
        if !(self.quantum_efficiency > 0.0 && self.quantum_efficiency <= 1.0) {
            return Err(Error::invalid("quantum_efficiency", "must lie in (0, 1]"));
        }
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(Error::invalid("wavelength", "must be > 0"));
        }
        if !(self.background_rate.is_finite() && self.background_rate >= 0.0) {
            return Err(Error::invalid("background_rate", "must be >= 0"));
        }
        Ok(())
    }

    /// Photon energy `h c / λ`, J.
    pub fn photon_energy(&self) -> f64 {
        PLANCK * SPEED_OF_LIGHT / self.wavelength
    }
}

/// Time-binned photoelectron arrival rate, 1/s, with time measured from
/// pulse emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRate {
    pub bin_width: f64,
    pub time_origin: f64,
    pub rates: Vec<f64>,
}

impl SignalRate {
    /// Expected photoelectrons in each bin.
    pub fn bin_means(&self) -> impl Iterator<Item = f64> + '_ {
        self.rates.iter().map(move |r| r * self.bin_width)
    }
}

/// Photoelectron rate `η g(t) / E_p`, with received power
/// `g = E × (bin arrival probability) / bin_width`.
pub fn signal_rate(ir: &ImpulseResponse, params: &SourceDetectorParams) -> Result<SignalRate> {
    params.validate()?;
    let scale =
        params.quantum_efficiency * params.pulse_energy / (ir.bin_width * params.photon_energy());
    Ok(SignalRate {
        bin_width: ir.bin_width,
        time_origin: ir.time_origin,
        rates: ir.bins.iter().map(|p| p * scale).collect(),
    })
}

/// Expected signal photoelectrons per pulse, `Σ Λ_s Δt`.
pub fn mean_signal_count(rate: &SignalRate) -> f64 {
    rate.bin_means().sum()
}

/// Pulse energy that yields `target_lambda_s` expected photoelectrons through
/// `ir`, all other parameters held.
pub fn calibrate_pulse_energy(
    ir: &ImpulseResponse,
    params: &SourceDetectorParams,
    target_lambda_s: f64,
) -> Result<f64> {
    if !(target_lambda_s > 0.0 && target_lambda_s.is_finite()) {
        return Err(Error::invalid("target_lambda_s", "must be > 0"));
    }
    let total = ir.total();
    if total <= 0.0 {
        return Err(Error::NoSignal);
    }
    Ok(target_lambda_s * params.photon_energy() / (params.quantum_efficiency * total))
}

/// Redistribute piecewise-constant masses onto a chip grid starting at 0.
///
/// Bin `k` covers `[start + k w, start + (k+1) w)`; mass falling outside
/// `[0, n_chips × chip)` is dropped.
pub(crate) fn rebin(
    masses: &[f64],
    bin_width: f64,
    start: f64,
    chip: f64,
    n_chips: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; n_chips];
    let frame_end = n_chips as f64 * chip;
    for (k, &m) in masses.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let a = start + k as f64 * bin_width;
        let b = a + bin_width;
        let lo = a.max(0.0);
        let hi = b.min(frame_end);
        if hi <= lo {
            continue;
        }
        let density = m / bin_width;
        let mut i = (lo / chip).floor() as usize;
        while i < n_chips {
            let c0 = i as f64 * chip;
            let c1 = c0 + chip;
            if c0 >= hi {
                break;
            }
            let overlap = c1.min(hi) - c0.max(lo);
            if overlap > 0.0 {
                out[i] += density * overlap;
            }
            i += 1;
        }
    }
    out
}

/// Chip count for a frame, tolerant of `frame_length / chip` landing an ulp
/// above an integer.
pub(crate) fn chips_in(length: f64, chip: f64) -> usize {
    let r = length / chip;
    let n = r.round();
    if (r - n).abs() < 1e-9 * n.max(1.0) {
        n as usize
    } else {
        r.ceil() as usize
    }
}

/// Per-chip photoelectron counts over one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotoelectronTrace {
    /// Chip duration τ_c, s.
    pub chip_duration: f64,
    pub counts: Vec<u32>,
    /// True pulse start and end, s, when known.
    pub truth_window: Option<(f64, f64)>,
}

impl PhotoelectronTrace {
    pub fn frame_length(&self) -> f64 {
        self.counts.len() as f64 * self.chip_duration
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

/// Frame layout for trace synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameSpec {
    /// Frame length, s.
    pub frame_length: f64,
    /// Where the pulse's leading boundary is placed, s.
    pub pulse_offset: f64,
    /// Chip duration τ_c, s.
    pub chip_duration: f64,
    /// Fraction of the peak rate delimiting the pulse support.
    pub boundary_fraction: f64,
}

impl Default for FrameSpec {
    fn default() -> Self {
        FrameSpec {
            frame_length: 100e-6,
            pulse_offset: 8e-6,
            chip_duration: 20e-9,
            boundary_fraction: DEFAULT_BOUNDARY_FRACTION,
        }
    }
}

impl FrameSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.chip_duration.is_finite() && self.chip_duration > 0.0) {
            return Err(Error::invalid("chip_duration", "must be > 0"));
        }
        if !(self.frame_length.is_finite() && self.frame_length >= self.chip_duration) {
            return Err(Error::invalid("frame_length", "must be at least one chip"));
        }
        if !(self.pulse_offset.is_finite() && self.pulse_offset >= 0.0) {
            return Err(Error::invalid("pulse_offset", "must be >= 0"));
        }
        if !(self.boundary_fraction > 0.0 && self.boundary_fraction < 1.0) {
            return Err(Error::invalid("boundary_fraction", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Expected count per chip: the signal rate placed so that its leading
/// boundary sits at `pulse_offset`, plus constant background. Also returns
/// the true pulse window, `None` when the signal is identically zero.
#[allow(clippy::type_complexity)]
pub fn expected_chip_means(
    rate: &SignalRate,
    params: &SourceDetectorParams,
    frame: &FrameSpec,
) -> Result<(Vec<f64>, Option<(f64, f64)>)> {
    params.validate()?;
    frame.validate()?;
    let n = chips_in(frame.frame_length, frame.chip_duration);
    let bg = params.background_rate * frame.chip_duration;
    let masses: Vec<f64> = rate.bin_means().collect();
    match support_boundaries(
        &rate.rates,
        rate.bin_width,
        rate.time_origin,
        frame.boundary_fraction,
    ) {
        Err(Error::NoSignal) => Ok((vec![bg; n], None)),
        Err(e) => Err(e),
        Ok((left, right)) => {
            let duration = right - left;
            let end = frame.pulse_offset + duration;
            if end > frame.frame_length * (1.0 + 1e-12) {
                return Err(Error::FrameTooShort {
                    needed: end,
                    available: frame.frame_length,
                });
            }
            let shift = frame.pulse_offset - left;
            let mut means = rebin(
                &masses,
                rate.bin_width,
                rate.time_origin + shift,
                frame.chip_duration,
                n,
            );
            for m in &mut means {
                *m += bg;
            }
            Ok((means, Some((frame.pulse_offset, end))))
        }
    }
}

/// Draw a chip-binned photoelectron trace; each chip is an independent
/// Poisson count of its integrated rate.
pub fn generate_trace(
    rate: &SignalRate,
    params: &SourceDetectorParams,
    frame: &FrameSpec,
    seed: u64,
) -> Result<PhotoelectronTrace> {
    let (means, truth) = expected_chip_means(rate, params, frame)?;
    let mut rng = SeedTree::new(seed).child(tags::TRACE).rng(0);
    let counts = means
        .iter()
        .map(|&m| poisson::sample(&mut rng, m) as u32)
        .collect();
    Ok(PhotoelectronTrace {
        chip_duration: frame.chip_duration,
        counts,
        truth_window: truth,
    })
}
