//! Scattering phase functions and the per-event samplers used by photon
//! transport.
//!
//! The scattering phase function is a convex mix of a generalized Rayleigh
//! term and a Henyey-Greenstein-based Mie term, weighted by the respective
//! scattering coefficients. All densities are per steradian, so
//! `2π ∫₋₁¹ P(μ) dμ = 1`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes in the tabulated scattering-angle CDF.
pub const CDF_TABLE_NODES: usize = 4096;

/// Atmospheric optical properties at the operating wavelength.
///
/// `f` and `gamma` default to 0.5 and 0.017; these are common values for
/// solar-blind UV links, not measured quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtmosphereParams {
    /// Absorption coefficient, 1/m.
    pub k_a: f64,
    /// Rayleigh scattering coefficient, 1/m.
    pub k_s_rayleigh: f64,
    /// Mie scattering coefficient, 1/m.
    pub k_s_mie: f64,
    /// Mie asymmetry parameter (mean scattering cosine).
    pub g: f64,
    /// Mie shape parameter.
    pub f: f64,
    /// Rayleigh shape parameter.
    pub gamma: f64,
    /// Wavelength, m.
    pub wavelength: f64,
}

impl Default for AtmosphereParams {
    fn default() -> Self {
        AtmosphereParams {
            k_a: 0.74e-3,
            k_s_rayleigh: 0.2456e-3,
            k_s_mie: 0.25e-3,
            g: 0.72,
            f: 0.5,
            gamma: 0.017,
            wavelength: 266e-9,
        }
    }
}

impl AtmosphereParams {
    /// Total scattering coefficient.
    pub fn k_s(&self) -> f64 {
        self.k_s_rayleigh + self.k_s_mie
    }

    /// Extinction coefficient (absorption plus scattering).
    pub fn k_e(&self) -> f64 {
        self.k_a + self.k_s()
    }

    /// Single-scattering albedo `k_s / k_e`.
    pub fn albedo(&self) -> f64 {
        self.k_s() / self.k_e()
    }

    pub fn rayleigh_weight(&self) -> f64 {
        self.k_s_rayleigh / self.k_s()
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(
                    name,
                    format!("must be finite and >= 0, got {v}"),
                ))
            }
        };
        nonneg("k_a", self.k_a)?;
        nonneg("k_s_rayleigh", self.k_s_rayleigh)?;
        nonneg("k_s_mie", self.k_s_mie)?;
        if self.k_s() <= 0.0 {
            return Err(Error::invalid(
                "k_s_rayleigh",
                "total scattering coefficient must be positive",
            ));
        }
        if !(self.g.abs() < 1.0) {
            return Err(Error::invalid(
                "g",
                format!("|g| must be < 1, got {}", self.g),
            ));
        }
        if !self.f.is_finite() {
            return Err(Error::invalid("f", "must be finite"));
        }
        if !(self.gamma.is_finite() && self.gamma > -0.5) {
            return Err(Error::invalid(
                "gamma",
                format!("must be > -1/2, got {}", self.gamma),
            ));
        }
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(Error::invalid("wavelength", "must be > 0"));
        }
        // The shape parameters can drive the mixed density negative; sampling
        // needs a monotone CDF.
        let n = 512;
        for i in 0..=n {
            let mu = -1.0 + 2.0 * i as f64 / n as f64;
            if combined_phase_unchecked(mu, self) < 0.0 {
                let field = if self.k_s_mie > 0.0 { "f" } else { "gamma" };
                return Err(Error::invalid(
                    field,
                    format!("phase function is negative at mu = {mu:.4}"),
                ));
            }
        }
        Ok(())
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&mu) {
        Ok(())
    } else {
        Err(Error::Domain(format!("mu = {mu} outside [-1, 1]")))
    }
}

#[inline]
fn rayleigh_unchecked(mu: f64, gamma: f64) -> f64 {
    3.0 * (1.0 + 3.0 * gamma + (1.0 - gamma) * mu * mu) / (16.0 * PI * (1.0 + 2.0 * gamma))
}

#[inline]
fn mie_unchecked(mu: f64, g: f64, f: f64) -> f64 {
    let g2 = g * g;
    let hg = (1.0 + g2 - 2.0 * g * mu).powf(-1.5);
    let shape = f * (3.0 * mu * mu - 1.0) / (2.0 * (1.0 + g2).powf(1.5));
    (1.0 - g2) / (4.0 * PI) * (hg + shape)
}

#[inline]
pub(crate) fn combined_phase_unchecked(mu: f64, p: &AtmosphereParams) -> f64 {
    let wr = p.rayleigh_weight();
    let mut v = 0.0;
    if p.k_s_rayleigh > 0.0 {
        v += wr * rayleigh_unchecked(mu, p.gamma);
    }
    if p.k_s_mie > 0.0 {
        v += (1.0 - wr) * mie_unchecked(mu, p.g, p.f);
    }
    v
}

/// Generalized Rayleigh phase function.
pub fn rayleigh_phase(mu: f64, gamma: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok(rayleigh_unchecked(mu, gamma))
}

/// Mie phase function: Henyey-Greenstein plus a `(3μ² - 1)` shape correction.
pub fn mie_phase(mu: f64, g: f64, f: f64) -> Result<f64> {
    check_mu(mu)?;
    if !(g.abs() < 1.0) {
        return Err(Error::Domain(format!("|g| must be < 1, got {g}")));
    }
    Ok(mie_unchecked(mu, g, f))
}

/// Coefficient-weighted mix of the Rayleigh and Mie phase functions.
pub fn combined_phase(mu: f64, params: &AtmosphereParams) -> Result<f64> {
    check_mu(mu)?;
    if !(params.g.abs() < 1.0) {
        return Err(Error::Domain(format!("|g| must be < 1, got {}", params.g)));
    }
    if params.k_s() <= 0.0 {
        return Err(Error::Domain("total scattering coefficient is zero".into()));
    }
    Ok(combined_phase_unchecked(mu, params))
}

/// Closed-form `2π ∫₋₁^μ P(μ') dμ'` for the combined phase function.
pub(crate) fn combined_cdf(mu: f64, p: &AtmosphereParams) -> f64 {
    let wr = p.rayleigh_weight();
    let mut c = 0.0;
    if p.k_s_rayleigh > 0.0 {
        let gm = p.gamma;
        let r = 3.0 / (8.0 * (1.0 + 2.0 * gm))
            * ((1.0 + 3.0 * gm) * (mu + 1.0) + (1.0 - gm) * (mu * mu * mu + 1.0) / 3.0);
        c += wr * r;
    }
    if p.k_s_mie > 0.0 {
        let g = p.g;
        let g2 = g * g;
        let hg = if g.abs() < 1e-12 {
            0.5 * (mu + 1.0)
        } else {
            (1.0 - g2) / (2.0 * g) * (1.0 / (1.0 + g2 - 2.0 * g * mu).sqrt() - 1.0 / (1.0 + g))
        };
        let shape = (1.0 - g2) * p.f / (4.0 * (1.0 + g2).powf(1.5)) * (mu * mu * mu - mu);
        c += (1.0 - wr) * (hg + shape);
    }
    c
}

/// Draw a free path length `-ln(ξ) / k_e`.
///
/// Takes the extinction coefficient explicitly; collisions include absorption
/// events, so the scattering coefficient alone would overestimate the range.
pub fn sample_free_distance(uniform_draw: f64, k_e: f64) -> Result<f64> {
    if !(uniform_draw > 0.0 && uniform_draw < 1.0) {
        return Err(Error::Domain(format!(
            "uniform draw {uniform_draw} outside (0, 1)"
        )));
    }
    if !(k_e > 0.0 && k_e.is_finite()) {
        return Err(Error::Domain(format!(
            "extinction coefficient {k_e} must be > 0"
        )));
    }
    Ok(-uniform_draw.ln() / k_e)
}

/// Azimuth of the scattered direction, uniform on `[0, 2π)`.
pub fn sample_azimuth(uniform_draw: f64) -> f64 {
    2.0 * PI * uniform_draw
}

/// Inverse-CDF sampler for the scattering cosine.
///
/// Holds the CDF tabulated on a uniform μ grid; a draw is bracketed by binary
/// search and then polished with safeguarded Newton steps on the closed-form
/// CDF. Immutable after construction, so one instance can be shared by all
/// transport workers.
#[derive(Debug, Clone)]
pub struct ScatteringSampler {
    params: AtmosphereParams,
    cdf: Vec<f64>,
}

impl ScatteringSampler {
    pub fn new(params: &AtmosphereParams) -> Result<Self> {
        params.validate()?;
        let n = CDF_TABLE_NODES;
        let mut cdf: Vec<f64> = (0..n)
            .map(|i| combined_cdf(Self::node(i), params))
            .collect();
        cdf[0] = 0.0;
        cdf[n - 1] = 1.0;
        // Rounding can make flat stretches dip by an ulp.
        for i in 1..n {
            if cdf[i] < cdf[i - 1] {
                cdf[i] = cdf[i - 1];
            }
        }
        Ok(ScatteringSampler {
            params: *params,
            cdf,
        })
    }

    #[inline]
    fn node(i: usize) -> f64 {
        -1.0 + 2.0 * i as f64 / (CDF_TABLE_NODES - 1) as f64
    }

    pub fn params(&self) -> &AtmosphereParams {
        &self.params
    }

    /// The μ with `CDF(μ) = ξ`. `ξ ≤ 0` maps to -1 and `ξ ≥ 1` to +1.
    pub fn sample_mu(&self, uniform_draw: f64) -> f64 {
        if uniform_draw <= 0.0 {
            return -1.0;
        }
        if uniform_draw >= 1.0 {
            return 1.0;
        }
        let xi = uniform_draw;
        // First node with cdf > xi.
        let hi = self
            .cdf
            .partition_point(|&c| c <= xi)
            .clamp(1, CDF_TABLE_NODES - 1);
        let lo = hi - 1;
        let (mut a, mut b) = (Self::node(lo), Self::node(hi));
        let (ca, cb) = (self.cdf[lo], self.cdf[hi]);
        let mut mu = if cb > ca {
            a + (b - a) * (xi - ca) / (cb - ca)
        } else {
            0.5 * (a + b)
        };
        for _ in 0..50 {
            let resid = combined_cdf(mu, &self.params) - xi;
            if resid.abs() <= 1e-13 {
                break;
            }
            if resid > 0.0 {
                b = mu;
            } else {
                a = mu;
            }
            let dens = 2.0 * PI * combined_phase_unchecked(mu, &self.params);
            let newton = mu - resid / dens;
            mu = if dens > 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if b - a < 1e-15 {
                break;
            }
        }
        mu.clamp(-1.0, 1.0)
    }
}

/// Free-standing form of [`ScatteringSampler::sample_mu`] for one-off draws.
pub fn sample_scattering_mu(uniform_draw: f64, params: &AtmosphereParams) -> Result<f64> {
    Ok(ScatteringSampler::new(params)?.sample_mu(uniform_draw))
}
