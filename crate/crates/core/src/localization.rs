//! Pulse-window localization in photoelectron traces.
//!
//! Two estimators:
//! * counting: a sliding window of fixed length over the chip counts; the
//!   pulse starts where the windowed count first exceeds a threshold and ends
//!   where it next drops below it.
//! * correlation: sliding correlation of the counts with a pulse template;
//!   the start is the correlation maximum within the first above-threshold
//!   excursion and the end is the first subsequent offset at which the
//!   correlation is exactly zero.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atmosphere::AtmosphereParams;
use crate::channel::{
    average_impulse_responses, simulate_impulse_response, support_boundaries, Geometry,
    ImpulseResponse, TransportConfig,
};
use crate::error::{Error, Result};
use crate::poisson;
use crate::seeding::{tags, SeedTree};
use crate::signal::{
    calibrate_pulse_energy, chips_in, generate_trace, mean_signal_count, rebin, signal_rate,
    FrameSpec, PhotoelectronTrace, SourceDetectorParams, DEFAULT_BOUNDARY_FRACTION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Counting,
    Correlation,
}

/// Estimated pulse window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowEstimate {
    /// Estimated start, s.
    pub start: f64,
    /// Estimated end, s.
    pub end: f64,
    pub method: Method,
    /// The end criterion never fired; `end` is the frame end.
    pub end_clamped: bool,
}

/// Unit-sum pulse shape sampled on the chip grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseTemplate {
    pub chip_duration: f64,
    pub values: Vec<f64>,
    /// Time of the first template chip relative to pulse emission, s.
    pub lead_time: f64,
}

impl PulseTemplate {
    /// Normalizes `values` to unit sum.
    pub fn new(chip_duration: f64, values: Vec<f64>) -> Result<Self> {
        if !(chip_duration.is_finite() && chip_duration > 0.0) {
            return Err(Error::invalid("chip_duration", "must be > 0"));
        }
        if values.is_empty() {
            return Err(Error::Empty("template values".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(
                "values",
                "template values must be finite and >= 0",
            ));
        }
        let sum: f64 = values.iter().sum();
        if sum <= 0.0 {
            return Err(Error::NoSignal);
        }
        Ok(PulseTemplate {
            chip_duration,
            values: values.into_iter().map(|v| v / sum).collect(),
            lead_time: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.values.len() as f64 * self.chip_duration
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

fn same_chip(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// Sliding-window counting localizer.
///
/// Window `i` covers chips `[i, i + window_chips)`; the reported time of a
/// window is its leading edge `(i + window_chips) τ_c`. Returns `Ok(None)`
/// when no window exceeds the threshold.
pub fn localize_counting(
    trace: &PhotoelectronTrace,
    window_chips: usize,
    threshold: u64,
) -> Result<Option<WindowEstimate>> {
    if window_chips == 0 {
        return Err(Error::invalid("window_chips", "must be >= 1"));
    }
    if threshold == 0 {
        return Err(Error::invalid("threshold", "must be >= 1"));
    }
    let n = trace.counts.len();
    if n < window_chips {
        return Err(Error::TraceTooShort {
            len: n,
            needed: window_chips,
        });
    }
    let tau = trace.chip_duration;
    let mut sum: u64 = trace.counts[..window_chips].iter().map(|&c| c as u64).sum();
    let mut start = None;
    for i in 0..=n - window_chips {
        if i > 0 {
            sum = sum + trace.counts[i + window_chips - 1] as u64 - trace.counts[i - 1] as u64;
        }
        match start {
            None if sum > threshold => start = Some(i),
            Some(s) if sum < threshold => {
                return Ok(Some(WindowEstimate {
                    start: (s + window_chips) as f64 * tau,
                    end: (i + window_chips) as f64 * tau,
                    method: Method::Counting,
                    end_clamped: false,
                }));
            }
            _ => {}
        }
    }
    Ok(start.map(|s| WindowEstimate {
        start: (s + window_chips) as f64 * tau,
        end: trace.frame_length(),
        method: Method::Counting,
        end_clamped: true,
    }))
}

/// Smallest `n` with `P(Poisson(Λ_b T) > n) ≤ false_alarm_probability`.
pub fn neyman_pearson_threshold(
    background_rate: f64,
    window_duration: f64,
    false_alarm_probability: f64,
) -> Result<u64> {
    if !(false_alarm_probability > 0.0 && false_alarm_probability < 1.0) {
        return Err(Error::invalid(
            "false_alarm_probability",
            "must lie in (0, 1)",
        ));
    }
    if !(background_rate.is_finite() && background_rate >= 0.0) {
        return Err(Error::invalid("background_rate", "must be >= 0"));
    }
    if !(window_duration.is_finite() && window_duration >= 0.0) {
        return Err(Error::invalid("window_duration", "must be >= 0"));
    }
    let mean = background_rate * window_duration;
    let exceeds = |n: u64| poisson::sf_at_least(n + 1, mean) <= false_alarm_probability;
    let mut hi = (mean + 40.0 * mean.sqrt() + 50.0).ceil() as u64;
    while !exceeds(hi) {
        hi *= 2;
    }
    let mut lo = 0;
    if exceeds(lo) {
        return Ok(0);
    }
    // exceeds(lo) is false, exceeds(hi) is true
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if exceeds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Template from the mean of several channel realizations, spanning the union
/// of the realizations' supports.
pub fn build_template(
    responses: &[ImpulseResponse],
    chip_duration: f64,
    boundary_fraction: f64,
) -> Result<PulseTemplate> {
    if !(chip_duration.is_finite() && chip_duration > 0.0) {
        return Err(Error::invalid("chip_duration", "must be > 0"));
    }
    let avg = average_impulse_responses(responses)?;
    let mut left = f64::INFINITY;
    let mut right = f64::NEG_INFINITY;
    for r in responses {
        match support_boundaries(&r.bins, r.bin_width, r.time_origin, boundary_fraction) {
            Ok((l, rr)) => {
                left = left.min(l);
                right = right.max(rr);
            }
            Err(Error::NoSignal) => {}
            Err(e) => return Err(e),
        }
    }
    if !left.is_finite() {
        return Err(Error::NoSignal);
    }
    let m = chips_in(right - left, chip_duration).max(1);
    let values = rebin(
        &avg.bins,
        avg.bin_width,
        avg.time_origin - left,
        chip_duration,
        m,
    );
    let mut t = PulseTemplate::new(chip_duration, values)?;
    t.lead_time = left;
    Ok(t)
}

/// `C(i) = Σ_m Z[i+m] S[m]` for every chip offset `i` of the trace; chips past
/// the end of the trace count as zero.
pub fn sliding_correlation(
    trace: &PhotoelectronTrace,
    template: &PulseTemplate,
) -> Result<Vec<f64>> {
    if !same_chip(trace.chip_duration, template.chip_duration) {
        return Err(Error::BinWidthMismatch(
            trace.chip_duration,
            template.chip_duration,
        ));
    }
    let n = trace.counts.len();
    let m = template.len();
    if n < m {
        return Err(Error::TraceTooShort { len: n, needed: m });
    }
    let mut out = vec![0.0; n];
    // Counts are sparse; scatter each photon chip into the offsets it touches.
    for (j, &z) in trace.counts.iter().enumerate() {
        if z == 0 {
            continue;
        }
        let z = z as f64;
        let lo = j.saturating_sub(m - 1);
        for (i, c) in out[lo..=j].iter_mut().enumerate() {
            *c += z * template.values[j - lo - i];
        }
    }
    Ok(out)
}

/// How the correlation end estimate is referenced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationEnd {
    /// Report the first zero-correlation offset itself. Offsets index the
    /// window's first chip, so this is the first chip past the last count.
    #[default]
    WindowStart,
    /// Report the far edge of that window (offset plus template length).
    WindowEnd,
}

/// Default correlation threshold: three times the mean pure-background
/// correlation, and never below three single-photon template peaks.
pub fn default_correlation_threshold(template: &PulseTemplate, background_rate: f64) -> f64 {
    let sum: f64 = template.values.iter().sum();
    let background = background_rate * template.chip_duration * sum;
    (3.0 * background).max(3.0 * template.peak())
}

/// Template-matching localizer. Returns `Ok(None)` when the correlation never
/// exceeds `threshold`.
pub fn localize_correlation(
    trace: &PhotoelectronTrace,
    template: &PulseTemplate,
    threshold: f64,
    end_rule: CorrelationEnd,
) -> Result<Option<WindowEstimate>> {
    let corr = sliding_correlation(trace, template)?;
    let Some(first) = corr.iter().position(|&c| c > threshold) else {
        return Ok(None);
    };
    let mut best = first;
    let mut i = first;
    while i < corr.len() && corr[i] > threshold {
        if corr[i] > corr[best] {
            best = i;
        }
        i += 1;
    }
    let tau = trace.chip_duration;
    let start = best as f64 * tau;
    let zero = corr[best + 1..]
        .iter()
        .position(|&c| c == 0.0)
        .map(|k| best + 1 + k);
    let (end, end_clamped) = match zero {
        Some(z) => {
            let chips = match end_rule {
                CorrelationEnd::WindowStart => z,
                CorrelationEnd::WindowEnd => z + template.len(),
            };
            ((chips as f64 * tau).min(trace.frame_length()), false)
        }
        None => (trace.frame_length(), true),
    };
    Ok(Some(WindowEstimate {
        start,
        end,
        method: Method::Correlation,
        end_clamped,
    }))
}

/// Mean absolute boundary deviation over the found estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationSummary {
    /// `mean ½(|P̂_L - P_L| + |P̂_R - P_R|)`, s.
    pub e_m: f64,
    pub start_deviation: f64,
    pub end_deviation: f64,
    pub used: usize,
    pub not_found: usize,
}

pub fn mean_absolute_deviation(
    estimates: &[Option<WindowEstimate>],
    truths: &[(f64, f64)],
) -> Result<DeviationSummary> {
    if estimates.len() != truths.len() {
        return Err(Error::invalid(
            "truths",
            format!("{} estimates vs {} truths", estimates.len(), truths.len()),
        ));
    }
    let mut used = 0;
    let mut ds = 0.0;
    let mut de = 0.0;
    for (e, &(pl, pr)) in estimates.iter().zip(truths) {
        if let Some(e) = e {
            used += 1;
            ds += (e.start - pl).abs();
            de += (e.end - pr).abs();
        }
    }
    if used == 0 {
        return Err(Error::Empty("no found estimates".into()));
    }
    let n = used as f64;
    Ok(DeviationSummary {
        e_m: 0.5 * (ds + de) / n,
        start_deviation: ds / n,
        end_deviation: de / n,
        used,
        not_found: estimates.len() - used,
    })
}

/// Everything the localization benchmark needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSpec {
    /// Baseline distances, m.
    pub distances: Vec<f64>,
    pub realizations: usize,
    pub template_realizations: usize,
    /// Photons per channel realization and binning. Not read from config
    /// files; the experiment-wide transport settings are used there.
    #[serde(skip)]
    pub transport: TransportConfig,
    /// When set, the pulse energy is recalibrated per distance so the mean
    /// template response yields this many signal photoelectrons.
    pub target_lambda_s: Option<f64>,
    pub chip_duration: f64,
    /// True pulse start within the frame, s.
    pub pulse_offset: f64,
    pub boundary_fraction: f64,
    pub counting_window_chips: usize,
    pub counting_threshold: u64,
    /// `None` selects [`default_correlation_threshold`].
    pub correlation_threshold: Option<f64>,
    pub correlation_end: CorrelationEnd,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            distances: vec![5000.0, 6000.0, 7000.0, 8000.0, 9000.0],
            realizations: 1000,
            template_realizations: 100,
            transport: TransportConfig::default(),
            target_lambda_s: Some(50.0),
            chip_duration: 20e-9,
            pulse_offset: 8e-6,
            boundary_fraction: DEFAULT_BOUNDARY_FRACTION,
            counting_window_chips: 100,
            counting_threshold: 2,
            correlation_threshold: None,
            correlation_end: CorrelationEnd::WindowStart,
        }
    }
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.distances.is_empty() {
            return Err(Error::Empty("distances".into()));
        }
        if self.distances.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::invalid("distances", "must all be > 0"));
        }
        if self.realizations == 0 {
            return Err(Error::invalid("realizations", "must be >= 1"));
        }
        if self.template_realizations == 0 {
            return Err(Error::invalid("template_realizations", "must be >= 1"));
        }
        self.transport.validate()?;
        if let Some(t) = self.target_lambda_s {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::invalid("target_lambda_s", "must be > 0"));
            }
        }
        if self.counting_window_chips == 0 {
            return Err(Error::invalid("counting_window_chips", "must be >= 1"));
        }
        if self.counting_threshold == 0 {
            return Err(Error::invalid("counting_threshold", "must be >= 1"));
        }
        FrameSpec {
            frame_length: self.pulse_offset + self.chip_duration,
            pulse_offset: self.pulse_offset,
            chip_duration: self.chip_duration,
            boundary_fraction: self.boundary_fraction,
        }
        .validate()
    }
}

/// One benchmark realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizationOutcome {
    pub truth: (f64, f64),
    pub counting: Option<WindowEstimate>,
    pub correlation: Option<WindowEstimate>,
    pub lambda_s: f64,
}

/// Per-distance benchmark result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub distance: f64,
    pub pulse_energy: f64,
    /// Mean signal photoelectrons of the template response.
    pub template_lambda_s: f64,
    pub template_chips: usize,
    pub correlation_threshold: f64,
    pub counting: Option<DeviationSummary>,
    pub correlation: Option<DeviationSummary>,
    /// Realizations whose response carried no signal.
    pub empty_realizations: usize,
    /// First realization with a pulse, for the sample columns.
    pub sample: Option<RealizationOutcome>,
}

fn run_realization(
    spec: &BenchmarkSpec,
    geometry: &Geometry,
    atmosphere: &AtmosphereParams,
    source: &SourceDetectorParams,
    template: &PulseTemplate,
    corr_threshold: f64,
    node: SeedTree,
) -> Result<Option<RealizationOutcome>> {
    let ir =
        simulate_impulse_response(geometry, atmosphere, &spec.transport, node.child(0).seed())?;
    let rate = signal_rate(&ir, source)?;
    let (left, right) = match support_boundaries(
        &rate.rates,
        rate.bin_width,
        rate.time_origin,
        spec.boundary_fraction,
    ) {
        Ok(b) => b,
        Err(Error::NoSignal) => return Ok(None),
        Err(e) => return Err(e),
    };
    let tail = template.duration().max(right - left)
        + spec.counting_window_chips as f64 * spec.chip_duration;
    let frame = FrameSpec {
        frame_length: spec.pulse_offset + (right - left) + tail + 2e-6,
        pulse_offset: spec.pulse_offset,
        chip_duration: spec.chip_duration,
        boundary_fraction: spec.boundary_fraction,
    };
    let trace = generate_trace(&rate, source, &frame, node.child(1).seed())?;
    let truth = trace.truth_window.ok_or(Error::NoSignal)?;
    Ok(Some(RealizationOutcome {
        truth,
        counting: localize_counting(&trace, spec.counting_window_chips, spec.counting_threshold)?,
        correlation: localize_correlation(&trace, template, corr_threshold, spec.correlation_end)?,
        lambda_s: mean_signal_count(&rate),
    }))
}

/// Run the counting-vs-correlation benchmark at every distance.
///
/// Per distance, a template is built from `template_realizations` channel
/// draws; each benchmark realization then draws a fresh channel, synthesizes
/// a trace with a known window and runs both localizers. Realization seeds
/// derive from `(seed, distance index, realization index)`.
pub fn localization_benchmark(
    geometry: &Geometry,
    atmosphere: &AtmosphereParams,
    source: &SourceDetectorParams,
    spec: &BenchmarkSpec,
    seed: u64,
) -> Result<Vec<BenchmarkRow>> {
    geometry.validate()?;
    atmosphere.validate()?;
    source.validate()?;
    spec.validate()?;
    let root = SeedTree::new(seed);
    spec.distances
        .iter()
        .enumerate()
        .map(|(di, &distance)| {
            let geometry = Geometry {
                baseline_distance: distance,
                ..*geometry
            };
            let tnode = root.child(tags::TEMPLATE).child(di as u64);
            let template_irs = (0..spec.template_realizations as u64)
                .map(|t| {
                    simulate_impulse_response(
                        &geometry,
                        atmosphere,
                        &spec.transport,
                        tnode.child(t).seed(),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let template =
                build_template(&template_irs, spec.chip_duration, spec.boundary_fraction)?;
            let mean_ir = average_impulse_responses(&template_irs)?;
            let source = match spec.target_lambda_s {
                Some(target) => SourceDetectorParams {
                    pulse_energy: calibrate_pulse_energy(&mean_ir, source, target)?,
                    ..*source
                },
                None => *source,
            };
            let template_lambda_s = mean_signal_count(&signal_rate(&mean_ir, &source)?);
            let corr_threshold = spec.correlation_threshold.unwrap_or_else(|| {
                default_correlation_threshold(&template, source.background_rate)
            });
            let bnode = root.child(tags::BENCH).child(di as u64);
            let outcomes = (0..spec.realizations as u64)
                .into_par_iter()
                .map(|r| {
                    run_realization(
                        spec,
                        &geometry,
                        atmosphere,
                        &source,
                        &template,
                        corr_threshold,
                        bnode.child(r),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let empty_realizations = outcomes.iter().filter(|o| o.is_none()).count();
            let found: Vec<&RealizationOutcome> = outcomes.iter().flatten().collect();
            let truths: Vec<(f64, f64)> = found.iter().map(|o| o.truth).collect();
            let summarize = |pick: fn(&RealizationOutcome) -> Option<WindowEstimate>| {
                let est: Vec<_> = found.iter().map(|o| pick(o)).collect();
                mean_absolute_deviation(&est, &truths).ok()
            };
            Ok(BenchmarkRow {
                distance,
                pulse_energy: source.pulse_energy,
                template_lambda_s,
                template_chips: template.len(),
                correlation_threshold: corr_threshold,
                counting: summarize(|o| o.counting),
                correlation: summarize(|o| o.correlation),
                empty_realizations,
                sample: found.first().map(|o| **o),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(counts: Vec<u32>) -> PhotoelectronTrace {
        PhotoelectronTrace {
            chip_duration: 1.0,
            counts,
            truth_window: None,
        }
    }

    #[test]
    fn counting_not_found_on_empty() {
        assert_eq!(
            localize_counting(&trace(vec![0; 500]), 10, 2).unwrap(),
            None
        );
    }

    #[test]
    fn counting_hand_walk() {
        let mut c = vec![0u32; 400];
        for v in &mut c[100..200] {
            *v = 1;
        }
        let e = localize_counting(&trace(c), 10, 2).unwrap().unwrap();
        // First window with 3 counts is [93, 103); first later window with
        // fewer than 2 is [199, 209).
        assert_eq!(e.start, 103.0);
        assert_eq!(e.end, 209.0);
        assert!((90.0..=110.0).contains(&e.start));
        assert!((200.0..=210.0).contains(&e.end));
        assert!(!e.end_clamped);
    }

    #[test]
    fn counting_clamps_unterminated_pulse() {
        let mut c = vec![0u32; 50];
        for v in &mut c[30..] {
            *v = 2;
        }
        let e = localize_counting(&trace(c), 5, 2).unwrap().unwrap();
        assert!(e.end_clamped);
        assert_eq!(e.end, 50.0);
    }

    #[test]
    fn counting_errors() {
        assert!(localize_counting(&trace(vec![0; 5]), 10, 2).is_err());
        assert!(localize_counting(&trace(vec![0; 50]), 0, 2).is_err());
        assert!(localize_counting(&trace(vec![0; 50]), 10, 0).is_err());
    }

    #[test]
    fn np_threshold_tiny_mean() {
        assert_eq!(neyman_pearson_threshold(5e4, 1e-12, 1e-3).unwrap(), 0);
        assert!(neyman_pearson_threshold(5e4, 2e-6, 0.0).is_err());
    }

    #[test]
    fn np_threshold_tail_oracle() {
        // λ = 0.1: P(N > n) by direct summation of the pmf.
        let lam: f64 = 0.1;
        let pmf =
            |k: u32| (-lam).exp() * lam.powi(k as i32) / (1..=k).map(f64::from).product::<f64>();
        let sf = |n: u32| 1.0 - (0..=n).map(pmf).sum::<f64>();
        let oracle = (0..).find(|&n| sf(n) <= 1e-3).unwrap();
        assert_eq!(oracle, 2);
        assert_eq!(
            neyman_pearson_threshold(5e4, 2e-6, 1e-3).unwrap(),
            oracle as u64
        );
    }

    #[test]
    fn correlation_sifting() {
        let t = PulseTemplate::new(1.0, vec![0.5, 0.25, 0.125, 0.125]).unwrap();
        let mut c = vec![0u32; 20];
        c[10] = 1;
        let corr = sliding_correlation(&trace(c), &t).unwrap();
        for (i, v) in corr.iter().enumerate() {
            let expect = if (7..=10).contains(&i) {
                t.values[10 - i]
            } else {
                0.0
            };
            assert_eq!(*v, expect, "offset {i}");
        }
    }

    #[test]
    fn self_correlation_peak() {
        let t = PulseTemplate::new(1.0, vec![0.25, 0.5, 0.25]).unwrap();
        let k = 4u32;
        let counts = vec![k, 2 * k, k, 0, 0, 0, 0];
        let corr = sliding_correlation(&trace(counts.clone()), &t).unwrap();
        let energy: f64 = t.values.iter().map(|s| s * s).sum();
        // counts = 4k × template
        assert_eq!(corr[0], 4.0 * k as f64 * energy);
        let argmax = corr
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 0);
    }

    #[test]
    fn chip_mismatch_rejected() {
        let t = PulseTemplate::new(2.0, vec![1.0]).unwrap();
        assert!(matches!(
            sliding_correlation(&trace(vec![0; 4]), &t),
            Err(Error::BinWidthMismatch(..))
        ));
    }

    #[test]
    fn correlation_zero_trace_not_found() {
        let t = PulseTemplate::new(1.0, vec![0.5, 0.5]).unwrap();
        let c = localize_correlation(&trace(vec![0; 30]), &t, 0.1, CorrelationEnd::WindowStart)
            .unwrap();
        assert_eq!(c, None);
    }

    #[test]
    fn noiseless_shift_recovery() {
        let shape = [1u32, 3, 6, 8, 6, 4, 3, 2, 1, 1];
        let t = PulseTemplate::new(1.0, shape.iter().map(|&v| v as f64).collect()).unwrap();
        for k in [0usize, 5, 17, 40] {
            let mut c = vec![0u32; 80];
            for (m, &v) in shape.iter().enumerate() {
                c[k + m] = v;
            }
            let e = localize_correlation(&trace(c), &t, 0.5, CorrelationEnd::WindowStart)
                .unwrap()
                .unwrap();
            assert!((e.start - k as f64).abs() <= 1.0, "k={k} start={}", e.start);
            assert_eq!(e.end, (k + shape.len()) as f64);
            let e2 = localize_correlation(
                &trace({
                    let mut c = vec![0u32; 80];
                    for (m, &v) in shape.iter().enumerate() {
                        c[k + m] = v;
                    }
                    c
                }),
                &t,
                0.5,
                CorrelationEnd::WindowEnd,
            )
            .unwrap()
            .unwrap();
            assert_eq!(e2.end, ((k + 2 * shape.len()) as f64).min(80.0));
        }
    }

    #[test]
    fn mad_examples() {
        let est = |s: f64, e: f64| {
            Some(WindowEstimate {
                start: s,
                end: e,
                method: Method::Counting,
                end_clamped: false,
            })
        };
        let truths = [(1.0, 2.0), (3.0, 5.0)];
        let perfect = mean_absolute_deviation(&[est(1.0, 2.0), est(3.0, 5.0)], &truths).unwrap();
        assert_eq!(perfect.e_m, 0.0);
        let shifted = mean_absolute_deviation(&[est(1.25, 2.25)], &truths[..1]).unwrap();
        assert_eq!(shifted.e_m, 0.25);
        let partial = mean_absolute_deviation(&[None, est(3.5, 5.5)], &truths).unwrap();
        assert_eq!(partial.used, 1);
        assert_eq!(partial.not_found, 1);
        assert_eq!(partial.e_m, 0.5);
        assert!(mean_absolute_deviation(&[None], &truths[..1]).is_err());
        assert!(mean_absolute_deviation(&[], &[]).is_err());
    }

    #[test]
    fn template_from_rectangle_is_uniform() {
        let mut ir = ImpulseResponse::zeros(1.0, 12, 1);
        for v in &mut ir.bins[4..8] {
            *v = 3.0;
        }
        let t = build_template(&[ir], 1.0, 0.01).unwrap();
        assert_eq!(t.values, vec![0.25; 4]);
        assert_eq!(t.lead_time, 4.0);
    }

    #[test]
    fn template_rejects_mixed_bins() {
        let a = ImpulseResponse::zeros(1.0, 3, 1);
        let b = ImpulseResponse::zeros(2.0, 3, 1);
        assert!(build_template(&[a, b], 1.0, 0.01).is_err());
    }
}
