//! Monte Carlo photon transport for the NLOS link and impulse-response
//! post-processing.
//!
//! Frame: transmitter at the origin, receiver on the +x axis at the baseline
//! distance, both optical axes in the x-z plane with elevations measured from
//! the horizontal. The receiver is modelled as a sphere of cross-section
//! `aperture_area` so that its solid angle from a scattering point is
//! independent of the arrival direction; for any realistic distance this is
//! `A / d²`.

use std::f64::consts::PI;

use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atmosphere::{AtmosphereParams, ScatteringSampler};
use crate::error::{Error, Result};
use crate::seeding::{tags, SeedTree};
use crate::vec3::Vec3;

/// Speed of light used for time-of-flight, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

/// Photons below this weight are dropped.
pub const WEIGHT_CUTOFF: f64 = 1e-12;

const PHOTON_BLOCK: u64 = 2048;

/// Transmitter/receiver placement and optics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    /// Ground distance between transmitter and receiver, m.
    pub baseline_distance: f64,
    /// Beam elevation, rad.
    pub tx_elevation: f64,
    /// Receiver axis elevation, rad.
    pub rx_elevation: f64,
    /// Half-angle of the receiver acceptance cone, rad.
    pub rx_fov: f64,
    /// Receiver collecting area, m².
    pub aperture_area: f64,
    /// Half-angle of the transmitted beam, rad.
    pub tx_divergence: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            baseline_distance: 5000.0,
            tx_elevation: PI / 3.0,
            rx_elevation: PI / 3.0,
            rx_fov: PI / 6.0,
            aperture_area: 1.77e-4,
            tx_divergence: 1e-3,
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.baseline_distance.is_finite() && self.baseline_distance > 0.0) {
            return Err(Error::invalid("baseline_distance", "must be > 0"));
        }
        if !(self.aperture_area.is_finite() && self.aperture_area > 0.0) {
            return Err(Error::invalid("aperture_area", "must be > 0"));
        }
        for (name, v) in [
            ("tx_elevation", self.tx_elevation),
            ("rx_elevation", self.rx_elevation),
        ] {
            if !(0.0..=PI / 2.0).contains(&v) {
                return Err(Error::invalid(
                    name,
                    format!("must lie in [0, pi/2], got {v}"),
                ));
            }
        }
        if !(self.rx_fov > 0.0 && self.rx_fov <= PI / 2.0) {
            return Err(Error::invalid(
                "rx_fov",
                format!("must lie in (0, pi/2], got {}", self.rx_fov),
            ));
        }
        if !(0.0..=PI / 4.0).contains(&self.tx_divergence) {
            return Err(Error::invalid(
                "tx_divergence",
                format!("must lie in [0, pi/4], got {}", self.tx_divergence),
            ));
        }
        Ok(())
    }

    pub fn tx_axis(&self) -> Vec3 {
        Vec3::new(self.tx_elevation.cos(), 0.0, self.tx_elevation.sin())
    }

    pub fn rx_position(&self) -> Vec3 {
        Vec3::new(self.baseline_distance, 0.0, 0.0)
    }

    /// Receiver look direction (towards the transmitter side).
    pub fn rx_axis(&self) -> Vec3 {
        Vec3::new(-self.rx_elevation.cos(), 0.0, self.rx_elevation.sin())
    }

    /// Radius of the sphere with cross-section `aperture_area`.
    pub fn receiver_radius(&self) -> f64 {
        (self.aperture_area / PI).sqrt()
    }

    /// Whether the beam cone and the receiver FOV cone share any volume.
    pub fn single_scatter_reachable(&self) -> bool {
        let axis = self.tx_axis();
        let mut rays = vec![axis];
        if self.tx_divergence > 0.0 {
            let mu = self.tx_divergence.cos();
            rays.extend((0..16).map(|i| axis.scatter(mu, 2.0 * PI * i as f64 / 16.0)));
        }
        rays.into_iter()
            .any(|v| ray_meets_cone(v, self.rx_position(), self.rx_axis(), self.rx_fov.cos()))
    }
}

/// Does the ray `t v, t > 0` enter the cone with apex `apex`, unit axis `a`
/// and half-angle cosine `c`?
fn ray_meets_cone(v: Vec3, apex: Vec3, a: Vec3, c: f64) -> bool {
    let va = v.dot(a);
    let pa = apex.dot(a);
    let vp = v.dot(apex);
    let pp = apex.dot(apex);
    let c2 = c * c;
    // q(t) = (w.a)^2 - c^2 |w|^2 with w = t v - apex.
    let qa = va * va - c2;
    let qb = -2.0 * va * pa + 2.0 * c2 * vp;
    let qc = pa * pa - c2 * pp;
    let inside = |t: f64| {
        let h = t * va - pa;
        h >= 0.0 && qa * t * t + qb * t + qc >= 0.0
    };
    let mut crit = vec![0.0];
    if qa.abs() > 1e-15 {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let s = disc.sqrt();
            crit.push((-qb - s) / (2.0 * qa));
            crit.push((-qb + s) / (2.0 * qa));
        }
    } else if qb.abs() > 1e-300 {
        crit.push(-qc / qb);
    }
    if va.abs() > 1e-15 {
        crit.push(pa / va);
    }
    let mut crit: Vec<f64> = crit
        .into_iter()
        .filter(|t| t.is_finite() && *t >= 0.0)
        .collect();
    crit.sort_by(f64::total_cmp);
    let far = crit.last().copied().unwrap_or(0.0) * 2.0 + pp.sqrt() * 10.0 + 1.0;
    crit.push(far);
    crit.windows(2).any(|w| inside(0.5 * (w[0] + w[1]))) || crit.iter().skip(1).any(|&t| inside(t))
}

/// How receiver arrivals are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Expected contribution at every scattering event.
    #[default]
    LocalEstimate,
    /// Score only photons whose sampled flight crosses the receiver.
    AnalogAperture,
}

/// Knobs for one transport run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportConfig {
    pub photons: u64,
    /// Time bin width, s.
    pub bin_width: f64,
    pub max_scatters: u32,
    pub estimator: Estimator,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            photons: 100_000,
            bin_width: 20e-9,
            max_scatters: 10,
            estimator: Estimator::LocalEstimate,
        }
    }
}

impl TransportConfig {
    pub fn validate(&self) -> Result<()> {
        if self.photons == 0 {
            return Err(Error::invalid("photons", "must be >= 1"));
        }
        if !(self.bin_width.is_finite() && self.bin_width > 0.0) {
            return Err(Error::invalid("bin_width", "must be > 0"));
        }
        if self.max_scatters == 0 {
            return Err(Error::invalid("max_scatters", "must be >= 1"));
        }
        Ok(())
    }
}

/// Received energy per launched photon, binned in time since emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseResponse {
    /// Bin width, s.
    pub bin_width: f64,
    /// Expected fraction of launched energy arriving in each bin.
    pub bins: Vec<f64>,
    /// Squared standard error of each bin mean.
    pub variance: Vec<f64>,
    pub photons_launched: u64,
    /// Emission time, s.
    pub time_origin: f64,
    /// False when the beam and FOV cones do not intersect; the response is
    /// then identically zero.
    pub reachable: bool,
}

impl ImpulseResponse {
    pub fn zeros(bin_width: f64, len: usize, photons: u64) -> Self {
        ImpulseResponse {
            bin_width,
            bins: vec![0.0; len],
            variance: vec![0.0; len],
            photons_launched: photons,
            time_origin: 0.0,
            reachable: true,
        }
    }

    /// Total arrival probability per launched photon.
    pub fn total(&self) -> f64 {
        self.bins.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.bins.iter().all(|&b| b == 0.0)
    }

    pub fn bin_start(&self, i: usize) -> f64 {
        self.time_origin + i as f64 * self.bin_width
    }

    /// Index of the first non-zero bin.
    pub fn first_nonzero(&self) -> Option<usize> {
        self.bins.iter().position(|&b| b > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BroadeningResult {
    pub left_boundary: f64,
    pub right_boundary: f64,
    pub broadening: f64,
}

/// Precomputed per-run quantities shared by every photon.
struct Scene<'a> {
    sampler: &'a ScatteringSampler,
    k_e: f64,
    albedo: f64,
    rx: Vec3,
    rx_axis: Vec3,
    cos_fov: f64,
    radius2: f64,
}

impl<'a> Scene<'a> {
    fn new(geometry: &Geometry, sampler: &'a ScatteringSampler) -> Self {
        let atm = sampler.params();
        Scene {
            sampler,
            k_e: atm.k_e(),
            albedo: atm.albedo(),
            rx: geometry.rx_position(),
            rx_axis: geometry.rx_axis(),
            cos_fov: geometry.rx_fov.cos(),
            radius2: geometry.aperture_area / PI,
        }
    }

    /// Local estimate at `pos` for a photon travelling along `dir`. Returns
    /// the probability and the distance to the receiver.
    #[inline]
    fn local_estimate(&self, pos: Vec3, dir: Vec3) -> (f64, f64) {
        let to_rx = self.rx - pos;
        let d = to_rx.norm();
        if d == 0.0 {
            return (0.0, 0.0);
        }
        // Arrival direction seen from the receiver.
        if (-to_rx).dot(self.rx_axis) < self.cos_fov * d {
            return (0.0, d);
        }
        let mu = (dir.dot(to_rx) / d).clamp(-1.0, 1.0);
        let phase = crate::atmosphere::combined_phase_unchecked(mu, self.sampler.params());
        (
            phase * receiver_solid_angle(self.radius2, d) * (-self.k_e * d).exp(),
            d,
        )
    }

    /// Distance along the flight at which it crosses the receiver, if it does
    /// so before the next collision at `s`.
    #[inline]
    fn analog_hit(&self, pos: Vec3, dir: Vec3, s: f64) -> Option<f64> {
        let w = self.rx - pos;
        let t = w.dot(dir);
        if t <= 0.0 || t > s {
            return None;
        }
        let d2 = w.dot(w);
        if d2 - t * t > self.radius2 {
            return None;
        }
        if (-w).dot(self.rx_axis) < self.cos_fov * d2.sqrt() {
            return None;
        }
        Some(t)
    }
}

/// Solid angle of a sphere of squared radius `r2` seen from distance `d`.
#[inline]
fn receiver_solid_angle(r2: f64, d: f64) -> f64 {
    let x = r2 / (d * d);
    if x >= 1.0 {
        return 2.0 * PI;
    }
    // 2π(1 - sqrt(1 - x)) without cancellation.
    2.0 * PI * x / (1.0 + (1.0 - x).sqrt())
}

/// Expected-value arrival probability for one scattering event.
///
/// `P(μ_r) · ΔΩ · exp(-k_e d)` where `μ_r` is the cosine between the incident
/// direction and the direction to the receiver, `ΔΩ` the receiver solid angle
/// and `d` the distance; zero outside the receiver FOV.
pub fn local_estimate_arrival(
    scatter_position: Vec3,
    incident_direction: Vec3,
    geometry: &Geometry,
    atmosphere: &AtmosphereParams,
) -> Result<f64> {
    if !scatter_position.is_finite() {
        return Err(Error::Domain("scatter position is not finite".into()));
    }
    geometry.validate()?;
    let sampler = ScatteringSampler::new(atmosphere)?;
    let scene = Scene::new(geometry, &sampler);
    if (scene.rx - scatter_position).norm() == 0.0 {
        return Err(Error::Domain(
            "scatter position coincides with the receiver".into(),
        ));
    }
    Ok(scene
        .local_estimate(scatter_position, incident_direction.normalized())
        .0)
}

#[derive(Default)]
struct Tally {
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Tally {
    fn add(&mut self, bin: usize, v: f64) {
        if bin >= self.sum.len() {
            self.sum.resize(bin + 1, 0.0);
            self.sq.resize(bin + 1, 0.0);
        }
        self.sum[bin] += v;
        self.sq[bin] += v * v;
    }

    fn merge(&mut self, other: &Tally) {
        if other.sum.len() > self.sum.len() {
            self.sum.resize(other.sum.len(), 0.0);
            self.sq.resize(other.sum.len(), 0.0);
        }
        for (i, (s, q)) in other.sum.iter().zip(&other.sq).enumerate() {
            self.sum[i] += s;
            self.sq[i] += q;
        }
    }
}

fn launch_direction<R: Rng>(rng: &mut R, axis: Vec3, divergence: f64) -> Vec3 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    if divergence == 0.0 {
        return axis;
    }
    let mu = 1.0 - u1 * (1.0 - divergence.cos());
    axis.scatter(mu, 2.0 * PI * u2)
}

fn trace_photon<R: Rng>(
    rng: &mut R,
    scene: &Scene,
    geometry: &Geometry,
    cfg: &TransportConfig,
    hits: &mut Vec<(usize, f64)>,
) {
    let inv_c_bin = 1.0 / (SPEED_OF_LIGHT * cfg.bin_width);
    let mut dir = launch_direction(rng, geometry.tx_axis(), geometry.tx_divergence);
    let mut pos = Vec3::new(0.0, 0.0, 0.0);
    let mut weight = 1.0;
    let s: f64 = -rng.sample::<f64, _>(Open01).ln() / scene.k_e;
    pos = pos + dir * s;
    let mut path = s;
    let mut events = 0;
    loop {
        events += 1;
        weight *= scene.albedo;
        let last = events >= cfg.max_scatters || weight < WEIGHT_CUTOFF;
        if cfg.estimator == Estimator::LocalEstimate {
            let (p, d) = scene.local_estimate(pos, dir);
            if p > 0.0 {
                hits.push((((path + d) * inv_c_bin) as usize, weight * p));
            }
            if last {
                break;
            }
        }
        let mu = scene.sampler.sample_mu(rng.random());
        let phi = 2.0 * PI * rng.random::<f64>();
        dir = dir.scatter(mu, phi);
        let s: f64 = -rng.sample::<f64, _>(Open01).ln() / scene.k_e;
        if cfg.estimator == Estimator::AnalogAperture {
            if let Some(t) = scene.analog_hit(pos, dir, s) {
                hits.push((((path + t) * inv_c_bin) as usize, weight));
                break;
            }
            if last {
                break;
            }
        }
        pos = pos + dir * s;
        path += s;
    }
}

/// Simulate the channel impulse response by Monte Carlo photon transport.
///
/// Photon `i` draws from its own counter-based substream of `seed` and block
/// tallies are reduced in index order, so the result does not depend on the
/// number of worker threads.
pub fn simulate_impulse_response(
    geometry: &Geometry,
    atmosphere: &AtmosphereParams,
    cfg: &TransportConfig,
    seed: u64,
) -> Result<ImpulseResponse> {
    geometry.validate()?;
    cfg.validate()?;
    let sampler = ScatteringSampler::new(atmosphere)?;
    if !geometry.single_scatter_reachable() {
        let mut ir = ImpulseResponse::zeros(cfg.bin_width, 0, cfg.photons);
        ir.reachable = false;
        return Ok(ir);
    }
    let scene = Scene::new(geometry, &sampler);
    let streams = SeedTree::new(seed).child(tags::CHANNEL);
    let n_blocks = cfg.photons.div_ceil(PHOTON_BLOCK);
    let blocks: Vec<Tally> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut tally = Tally::default();
            let mut hits = Vec::with_capacity(cfg.max_scatters as usize + 1);
            let end = ((b + 1) * PHOTON_BLOCK).min(cfg.photons);
            for photon in b * PHOTON_BLOCK..end {
                let mut rng = streams.rng(photon);
                hits.clear();
                trace_photon(&mut rng, &scene, geometry, cfg, &mut hits);
                if hits.is_empty() {
                    continue;
                }
                hits.sort_unstable_by_key(|h| h.0);
                let mut i = 0;
                while i < hits.len() {
                    let bin = hits[i].0;
                    let mut v = 0.0;
                    while i < hits.len() && hits[i].0 == bin {
                        v += hits[i].1;
                        i += 1;
                    }
                    tally.add(bin, v);
                }
            }
            tally
        })
        .collect();
    let mut total = Tally::default();
    for t in &blocks {
        total.merge(t);
    }
    let n = cfg.photons as f64;
    let bins: Vec<f64> = total.sum.iter().map(|s| s / n).collect();
    let variance = total
        .sum
        .iter()
        .zip(&total.sq)
        .map(|(s, q)| {
            if cfg.photons < 2 {
                0.0
            } else {
                ((q - s * s / n) / (n * (n - 1.0))).max(0.0)
            }
        })
        .collect();
    Ok(ImpulseResponse {
        bin_width: cfg.bin_width,
        bins,
        variance,
        photons_launched: cfg.photons,
        time_origin: 0.0,
        reachable: true,
    })
}

/// Bin-wise mean of several responses, padded to the longest.
pub fn average_impulse_responses(responses: &[ImpulseResponse]) -> Result<ImpulseResponse> {
    let first = responses
        .first()
        .ok_or_else(|| Error::Empty("no impulse responses to average".into()))?;
    let bw = first.bin_width;
    for r in responses {
        if (r.bin_width - bw).abs() > 1e-12 * bw {
            return Err(Error::BinWidthMismatch(bw, r.bin_width));
        }
    }
    let len = responses.iter().map(|r| r.bins.len()).max().unwrap_or(0);
    let k = responses.len() as f64;
    let mut out = ImpulseResponse::zeros(bw, len, 0);
    for r in responses {
        for (i, (b, v)) in r.bins.iter().zip(&r.variance).enumerate() {
            out.bins[i] += b;
            out.variance[i] += v;
        }
        out.photons_launched += r.photons_launched;
    }
    for (b, v) in out.bins.iter_mut().zip(out.variance.iter_mut()) {
        *b /= k;
        *v /= k * k;
    }
    out.time_origin = first.time_origin;
    out.reachable = responses.iter().any(|r| r.reachable);
    Ok(out)
}

/// Left/right boundaries: the span of bins at or above
/// `threshold_fraction × peak`.
pub fn pulse_broadening(ir: &ImpulseResponse, threshold_fraction: f64) -> Result<BroadeningResult> {
    if !(threshold_fraction > 0.0 && threshold_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "threshold fraction {threshold_fraction} outside (0, 1)"
        )));
    }
    let (left, right) =
        support_boundaries(&ir.bins, ir.bin_width, ir.time_origin, threshold_fraction)?;
    Ok(BroadeningResult {
        left_boundary: left,
        right_boundary: right,
        broadening: right - left,
    })
}

/// Start of the first and end of the last bin whose value is at least
/// `fraction` of the peak.
pub(crate) fn support_boundaries(
    values: &[f64],
    bin_width: f64,
    origin: f64,
    fraction: f64,
) -> Result<(f64, f64)> {
    let peak = values.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(Error::NoSignal);
    }
    let level = fraction * peak;
    let first = values
        .iter()
        .position(|&b| b >= level)
        .ok_or(Error::NoSignal)?;
    let last = values
        .iter()
        .rposition(|&b| b >= level)
        .ok_or(Error::NoSignal)?;
    Ok((
        origin + first as f64 * bin_width,
        origin + (last + 1) as f64 * bin_width,
    ))
}

/// One row of an elevation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub elevation: f64,
    pub left_boundary: f64,
    pub right_boundary: f64,
    pub broadening: f64,
    pub total_arrival: f64,
}

/// Seed of realization `index` under the substream `tag` of `master`.
pub fn realization_seed(master: u64, tag: u64, index: u64) -> u64 {
    SeedTree::new(master).child(tag).child(index).seed()
}

/// Receiver-elevation sweep of the averaged-response broadening.
///
/// Realization `r` uses the same seed at every elevation, so repeated
/// elevations give identical rows.
pub fn broadening_elevation_sweep(
    geometry_base: &Geometry,
    atmosphere: &AtmosphereParams,
    elevations: &[f64],
    realizations_per_point: usize,
    cfg: &TransportConfig,
    threshold_fraction: f64,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if elevations.is_empty() {
        return Err(Error::Empty("elevation list".into()));
    }
    if realizations_per_point == 0 {
        return Err(Error::invalid("realizations", "must be >= 1"));
    }
    elevations
        .iter()
        .map(|&elevation| {
            let geometry = Geometry {
                rx_elevation: elevation,
                ..*geometry_base
            };
            let irs = (0..realizations_per_point as u64)
                .map(|r| {
                    simulate_impulse_response(
                        &geometry,
                        atmosphere,
                        cfg,
                        realization_seed(seed, tags::SWEEP, r),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let avg = average_impulse_responses(&irs)?;
            let b = pulse_broadening(&avg, threshold_fraction)?;
            Ok(SweepRow {
                elevation,
                left_boundary: b.left_boundary,
                right_boundary: b.right_boundary,
                broadening: b.broadening,
                total_arrival: avg.total(),
            })
        })
        .collect()
}
