//! Statistical checks on the transport engine that need many photons.

use nlos_uv::atmosphere::AtmosphereParams;
use nlos_uv::channel::{simulate_impulse_response, Geometry, ImpulseResponse, TransportConfig};
use nlos_uv::seeding::SeedTree;
use nlos_uv::signal::{
    calibrate_pulse_energy, mean_signal_count, signal_rate, SourceDetectorParams,
};

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

fn totals(
    geometry: &Geometry,
    atm: &AtmosphereParams,
    cfg: &TransportConfig,
    batches: u64,
    seed: u64,
) -> Vec<f64> {
    let tree = SeedTree::new(seed);
    (0..batches)
        .map(|b| {
            simulate_impulse_response(geometry, atm, cfg, tree.child(b).seed())
                .unwrap()
                .total()
        })
        .collect()
}

#[test]
fn arrival_probability_falls_with_distance() {
    let atm = AtmosphereParams::default();
    let cfg = TransportConfig {
        photons: 25_000,
        ..TransportConfig::default()
    };
    let stats: Vec<(f64, f64)> = [5000.0, 6000.0, 7000.0, 8000.0, 9000.0]
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let g = Geometry {
                baseline_distance: d,
                ..Geometry::default()
            };
            let t = totals(&g, &atm, &cfg, 8, 100 + i as u64);
            assert!(t.iter().all(|&x| x > 0.0 && x <= 1.0));
            mean_and_se(&t)
        })
        .collect();
    for w in stats.windows(2) {
        let (near, near_se) = w[0];
        let (far, far_se) = w[1];
        let sigma = near_se.hypot(far_se);
        assert!(
            far < near + 3.0 * sigma,
            "{far:e} vs {near:e} (sigma {sigma:e})"
        );
    }
    // the full span is far outside the noise
    assert!(stats[4].0 < stats[0].0);
}

#[test]
fn bin_variance_shrinks_as_one_over_photons() {
    let geometry = Geometry {
        baseline_distance: 50.0,
        aperture_area: 1.0,
        ..Geometry::default()
    };
    let atm = AtmosphereParams {
        k_a: 0.005,
        k_s_rayleigh: 0.005,
        k_s_mie: 0.01,
        ..AtmosphereParams::default()
    };
    let small = TransportConfig {
        photons: 2000,
        bin_width: 100e-9,
        ..TransportConfig::default()
    };
    let large = TransportConfig {
        photons: 8000,
        ..small
    };
    let a = totals(&geometry, &atm, &small, 64, 1);
    let b = totals(&geometry, &atm, &large, 64, 2);
    let ratio = sample_variance(&a) / sample_variance(&b);
    // two 63-dof variance estimates; their ratio has a log-sd near 0.25
    assert!(
        (2.0..8.0).contains(&ratio),
        "variance ratio {ratio}, expected about 4"
    );
}

#[test]
fn five_km_response_supports_tens_of_photoelectrons() {
    let geometry = Geometry::default();
    let atm = AtmosphereParams::default();
    let cfg = TransportConfig {
        photons: 1_000_000,
        ..TransportConfig::default()
    };
    let ir: ImpulseResponse = simulate_impulse_response(&geometry, &atm, &cfg, 5).unwrap();
    assert!(ir.total() > 0.0);
    let source = SourceDetectorParams::default();
    let e_lo = calibrate_pulse_energy(&ir, &source, 10.0).unwrap();
    let e_hi = calibrate_pulse_energy(&ir, &source, 100.0).unwrap();
    let lam_default = mean_signal_count(&signal_rate(&ir, &source).unwrap());
    // a pulse energy inside the usual range of UV lasers reaches the tens
    assert!(
        e_lo > 1e-3 && e_hi < 10.0,
        "E(10) = {e_lo:e} J, E(100) = {e_hi:e} J"
    );
    assert!(
        (10.0..=100.0).contains(&lam_default),
        "lambda_s = {lam_default} at the default energy"
    );
}
