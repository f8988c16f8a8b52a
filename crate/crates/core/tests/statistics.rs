//! Monte Carlo oracles for trace synthesis, detection and localization.

use nlos_uv::atmosphere::{sample_azimuth, AtmosphereParams};
use nlos_uv::channel::{simulate_impulse_response, Geometry, ImpulseResponse, TransportConfig};
use nlos_uv::detection::{ook_ber_analytic, ook_ber_monte_carlo, OokOperatingPoint};
use nlos_uv::localization::{
    build_template, default_correlation_threshold, localization_benchmark, localize_correlation,
    localize_counting, neyman_pearson_threshold, BenchmarkSpec, CorrelationEnd, PulseTemplate,
};
use nlos_uv::seeding::SeedTree;
use nlos_uv::signal::{
    calibrate_pulse_energy, generate_trace, signal_rate, FrameSpec, PhotoelectronTrace, SignalRate,
    SourceDetectorParams,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CHIP: f64 = 20e-9;

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (
        m,
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0),
    )
}

/// A 1 µs rectangular pulse carrying `lambda_s` photoelectrons.
fn rectangle(lambda_s: f64) -> SignalRate {
    SignalRate {
        bin_width: CHIP,
        time_origin: 0.0,
        rates: vec![lambda_s / 1e-6; 50],
    }
}

fn source(background_rate: f64) -> SourceDetectorParams {
    SourceDetectorParams {
        background_rate,
        ..SourceDetectorParams::default()
    }
}

fn frame(len: f64) -> FrameSpec {
    FrameSpec {
        frame_length: len,
        pulse_offset: 8e-6,
        chip_duration: CHIP,
        ..FrameSpec::default()
    }
}

fn window_total(t: &PhotoelectronTrace, a: f64, b: f64) -> f64 {
    let (i, j) = ((a / CHIP).round() as usize, (b / CHIP).round() as usize);
    t.counts[i..j].iter().map(|&c| c as f64).sum()
}

#[test]
fn pure_background_count_has_poisson_moments() {
    // 1 ms of 5e4 /s background: mean and variance 50
    let zero = SignalRate {
        bin_width: CHIP,
        time_origin: 0.0,
        rates: vec![0.0; 4],
    };
    let f = frame(1e-3);
    let totals: Vec<f64> = (0..10_000)
        .map(|s| {
            generate_trace(&zero, &source(5e4), &f, s)
                .unwrap()
                .total_count() as f64
        })
        .collect();
    let (m, v) = moments(&totals);
    let n = totals.len() as f64;
    assert!((m - 50.0).abs() < 3.0 * (50.0 / n).sqrt(), "mean {m}");
    // var of the sample variance of a Poisson(50): (μ + 2μ²(n/(n-1)))/n
    let v_se = ((50.0 + 2.0 * 2500.0) / n).sqrt();
    assert!((v - 50.0).abs() < 3.0 * v_se, "variance {v}");
}

#[test]
fn pulse_window_count_is_signal_plus_background() {
    let rate = rectangle(30.0);
    let f = frame(20e-6);
    let totals: Vec<f64> = (0..10_000)
        .map(|s| {
            let t = generate_trace(&rate, &source(5e4), &f, s).unwrap();
            let (a, b) = t.truth_window.unwrap();
            window_total(&t, a, b)
        })
        .collect();
    let (m, _) = moments(&totals);
    let expect = 30.0 + 5e4 * 1e-6;
    assert!(
        (m - expect).abs() < 3.0 * (expect / totals.len() as f64).sqrt(),
        "mean {m}"
    );
}

#[test]
fn superposition_matches_in_first_two_moments() {
    let rate = rectangle(20.0);
    let f = frame(20e-6);
    let n = 10_000u64;
    let mut joint = Vec::new();
    let mut split = Vec::new();
    for s in 0..n {
        let both = generate_trace(&rate, &source(2e6), &f, s).unwrap();
        let sig = generate_trace(&rate, &source(0.0), &f, n + s).unwrap();
        let bg = generate_trace(&rectangle(0.0), &source(2e6), &f, 2 * n + s).unwrap();
        joint.push(window_total(&both, 7e-6, 10e-6));
        split.push(window_total(&sig, 7e-6, 10e-6) + window_total(&bg, 7e-6, 10e-6));
    }
    let (mj, vj) = moments(&joint);
    let (ms, vs) = moments(&split);
    let nf = n as f64;
    // both sums are Poisson(26): var of the mean is μ/n, var of the variance about (μ + 2μ²)/n
    let mu = 20.0 + 2e6 * 3e-6;
    let mean_sd = (2.0 * mu / nf).sqrt();
    let var_sd = (2.0 * (mu + 2.0 * mu * mu) / nf).sqrt();
    assert!((mj - ms).abs() < 3.0 * mean_sd, "means {mj} vs {ms}");
    assert!((vj - vs).abs() < 3.0 * var_sd, "variances {vj} vs {vs}");
}

#[test]
fn constant_rate_chips_have_unit_dispersion() {
    let rate = rectangle(0.0);
    let f = frame(100e-6);
    let mut pooled = Vec::new();
    for s in 0..200 {
        let t = generate_trace(&rate, &source(5e7), &f, s).unwrap();
        pooled.extend(t.counts.iter().map(|&c| c as f64));
    }
    let (m, v) = moments(&pooled);
    let d = v / m;
    // dispersion of n Poisson draws has sd about sqrt(2/n)
    let sd = (2.0 / pooled.len() as f64).sqrt();
    assert!((d - 1.0).abs() < 3.0 * sd, "dispersion {d}, mean {m}");
}

#[test]
fn counting_false_alarms_respect_union_bound() {
    let window = 100;
    let pfa = 1e-5;
    let rate = 5e4;
    let thr = neyman_pearson_threshold(rate, window as f64 * CHIP, pfa).unwrap();
    let f = frame(100e-6);
    let zero = rectangle(0.0);
    let traces = 2000;
    let mut hits = 0;
    let mut positions = 0;
    for s in 0..traces {
        let t = generate_trace(&zero, &source(rate), &f, s).unwrap();
        positions = t.counts.len() - window + 1;
        if localize_counting(&t, window, thr).unwrap().is_some() {
            hits += 1;
        }
    }
    let frac = hits as f64 / traces as f64;
    let budget = pfa * positions as f64;
    assert!(
        frac <= 2.0 * budget,
        "false-alarm fraction {frac}, union bound {budget}"
    );
}

#[test]
fn monte_carlo_ber_tracks_analytic() {
    let point = OokOperatingPoint::new(8.0, 5e4, 2e-4).unwrap();
    let exact = ook_ber_analytic(&point).unwrap();
    let runs = 500;
    let outside = (0..runs)
        .filter(|&s| {
            let est = ook_ber_monte_carlo(&point, 20_000, s).unwrap();
            (est.ber - exact).abs() >= 3.0 * est.std_error
        })
        .count();
    // at most 1% of runs may land outside 3 standard errors
    assert!(
        outside * 100 <= runs as usize,
        "{outside} of {runs} runs outside 3 se (BER {exact:e})"
    );
}

#[test]
fn azimuth_mean_is_pi() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 100_000;
    let mean = (0..n)
        .map(|_| sample_azimuth(rng.random::<f64>()))
        .sum::<f64>()
        / n as f64;
    assert!((mean / std::f64::consts::PI - 1.0).abs() < 0.01);
}

fn small_transport() -> TransportConfig {
    TransportConfig {
        photons: 20_000,
        ..TransportConfig::default()
    }
}

/// Cosine similarity of two templates aligned on the absolute chip grid.
fn cosine(a: &PulseTemplate, b: &PulseTemplate) -> f64 {
    let off = |t: &PulseTemplate| (t.lead_time / t.chip_duration).round() as i64;
    let (oa, ob) = (off(a), off(b));
    let at = |t: &PulseTemplate, o: i64, k: i64| {
        let i = k - o;
        if i >= 0 && (i as usize) < t.len() {
            t.values[i as usize]
        } else {
            0.0
        }
    };
    let lo = oa.min(ob);
    let hi = (oa + a.len() as i64).max(ob + b.len() as i64);
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for k in lo..hi {
        let (x, y) = (at(a, oa, k), at(b, ob, k));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    dot / (na * nb).sqrt()
}

#[test]
fn templates_from_disjoint_seeds_agree() {
    // full transport: the template is meant to be built from production-size runs
    let tree = SeedTree::new(77);
    let realizations = |t: SeedTree| -> Vec<ImpulseResponse> {
        (0..100)
            .map(|i| {
                simulate_impulse_response(
                    &Geometry::default(),
                    &AtmosphereParams::default(),
                    &TransportConfig::default(),
                    t.child(i).seed(),
                )
                .unwrap()
            })
            .collect()
    };
    let a = build_template(&realizations(tree.child(0)), CHIP, 0.01).unwrap();
    let b = build_template(&realizations(tree.child(1)), CHIP, 0.01).unwrap();
    let c = cosine(&a, &b);
    let coarse = |t: &PulseTemplate| {
        let k = 25;
        let w = t.chip_duration * k as f64;
        PulseTemplate {
            chip_duration: w,
            values: t.values.chunks(k).map(|c| c.iter().sum()).collect(),
            lead_time: (t.lead_time / w).round() * w,
        }
    };
    assert!(
        c > 0.95,
        "cosine similarity {c} on the chip grid ({} on a 500 ns grid)",
        cosine(&coarse(&a), &coarse(&b))
    );
}

#[test]
fn clean_rectangular_pulse_is_localized_by_both_methods() {
    let rate = rectangle(2000.0);
    let f = frame(20e-6);
    let trace = generate_trace(&rate, &source(0.0), &f, 4).unwrap();
    let (p_l, p_r) = trace.truth_window.unwrap();
    let template = PulseTemplate::new(CHIP, vec![1.0; 50]).unwrap();
    let window = 5;
    let count = localize_counting(&trace, window, 3).unwrap().unwrap();
    let corr = localize_correlation(
        &trace,
        &template,
        default_correlation_threshold(&template, 0.0),
        CorrelationEnd::WindowStart,
    )
    .unwrap()
    .unwrap();
    let chips = |x: f64| (x / CHIP).abs().round();
    assert!(chips(count.start - p_l) <= 3.0, "{count:?}");
    // the counting end is a window's leading edge, so it trails by up to a window
    assert!(chips(count.end - p_r) <= window as f64, "{count:?}");
    assert!(chips(corr.start - p_l) <= 1.0, "{corr:?}");
    assert!(chips(corr.end - p_r) <= 1.0, "{corr:?}");
}

#[test]
fn high_snr_trace_is_localized_by_both_methods() {
    let ir = simulate_impulse_response(
        &Geometry::default(),
        &AtmosphereParams::default(),
        &small_transport(),
        11,
    )
    .unwrap();
    let mut src = source(0.0);
    src.pulse_energy = calibrate_pulse_energy(&ir, &src, 5000.0).unwrap();
    let rate = signal_rate(&ir, &src).unwrap();
    let f = frame(60e-6);
    let trace = generate_trace(&rate, &src, &f, 12).unwrap();
    let (p_l, p_r) = trace.truth_window.unwrap();

    let window = 5;
    let count = localize_counting(&trace, window, 3).unwrap().unwrap();
    let template = build_template(std::slice::from_ref(&ir), CHIP, 0.01).unwrap();
    let thr = default_correlation_threshold(&template, src.background_rate);
    let corr = localize_correlation(&trace, &template, thr, CorrelationEnd::WindowStart)
        .unwrap()
        .unwrap();
    // Only the starts are checked here: the channel tail runs past the 1%
    // support boundary, so both end estimates depend on the tail rather than
    // on the estimator.
    assert!(count.end > count.start && corr.end > corr.start && p_r > p_l);
    let chips = |x: f64| (x / CHIP).abs().round();
    assert!(chips(count.start - p_l) <= 3.0, "counting start {count:?}");
    assert!(chips(corr.start - p_l) <= 3.0, "correlation start {corr:?}");
}

#[test]
fn benchmark_is_deterministic() {
    let spec = BenchmarkSpec {
        distances: vec![5000.0],
        realizations: 4,
        template_realizations: 4,
        transport: small_transport(),
        ..BenchmarkSpec::default()
    };
    let run = || {
        localization_benchmark(
            &Geometry::default(),
            &AtmosphereParams::default(),
            &SourceDetectorParams::default(),
            &spec,
            21,
        )
        .unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    assert_eq!(a.len(), 1);
}
