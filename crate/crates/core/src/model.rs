//! Distance-dependent quenching of a donor emitter by an acceptor sheet.
//!
//! A donor at depth `z` below the surface gains a non-radiative decay channel
//! `γ_nr(z) = γ_rad·(R/z)^n`, where `R` is the Förster radius and
//! `γ_rad = 1/τ_bulk`. Everything else in this module follows from that rate.

use crate::error::{Error, Result};
use crate::special::normal_cdf;

/// Power law of the donor-acceptor coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceExponent {
    /// Point donor coupled to a delocalized two-dimensional acceptor (`1/z⁴`).
    Sheet,
    /// Point donor coupled to a point acceptor (`1/z⁶`).
    Point,
}

impl DistanceExponent {
    pub fn power(self) -> i32 {
        match self {
            DistanceExponent::Sheet => 4,
            DistanceExponent::Point => 6,
        }
    }
}

impl TryFrom<u32> for DistanceExponent {
    type Error = Error;

    fn try_from(n: u32) -> Result<Self> {
        match n {
            4 => Ok(DistanceExponent::Sheet),
            6 => Ok(DistanceExponent::Point),
            other => Err(Error::Domain(format!("distance_exponent must be 4 or 6, got {other}"))),
        }
    }
}

/// Photophysical constants of one donor/acceptor pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub foerster_radius_nm: f64,
    pub bulk_lifetime_ns: f64,
    pub distance_exponent: DistanceExponent,
    pub depth_mean_nm: f64,
    pub depth_sigma_nm: f64,
    pub unquenched_intensity: f64,
}

impl ModelParams {
    /// NV ensemble under a WSe₂ monolayer: R = 13 nm, τ_bulk = 12 ns,
    /// depth (6.5 ± 2.7) nm.
    pub fn nv_wse2() -> Self {
        ModelParams {
            foerster_radius_nm: 13.0,
            bulk_lifetime_ns: 12.0,
            distance_exponent: DistanceExponent::Sheet,
            depth_mean_nm: 6.5,
            depth_sigma_nm: 2.7,
            unquenched_intensity: 1.0,
        }
    }

    pub fn with_radius(mut self, radius_nm: f64) -> Self {
        self.foerster_radius_nm = radius_nm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.foerster_radius_nm,
            self.bulk_lifetime_ns,
            self.depth_mean_nm,
            self.depth_sigma_nm,
            self.unquenched_intensity,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("model parameters must be finite".into()));
        }
        if self.foerster_radius_nm < 0.0 {
            return Err(Error::Domain("foerster_radius_nm must be >= 0".into()));
        }
        if self.bulk_lifetime_ns <= 0.0 {
            return Err(Error::Domain("bulk_lifetime_ns must be > 0".into()));
        }
        if self.depth_mean_nm <= 0.0 || self.depth_sigma_nm <= 0.0 {
            return Err(Error::Domain("depth_mean_nm and depth_sigma_nm must be > 0".into()));
        }
        if self.unquenched_intensity <= 0.0 {
            return Err(Error::Domain("unquenched_intensity must be > 0".into()));
        }
        Ok(())
    }

    /// Radiative rate in ns⁻¹.
    pub fn radiative_rate(&self) -> f64 {
        1.0 / self.bulk_lifetime_ns
    }

    /// The depth distribution implied by `depth_mean_nm` / `depth_sigma_nm`
    /// with the default truncation window.
    pub fn depth_distribution(&self) -> Result<DepthDistribution> {
        DepthDistribution::new(self.depth_mean_nm, self.depth_sigma_nm)
    }

    /// `(R/z)^n`, the ratio of the transfer rate to the radiative rate.
    fn coupling(&self, z_nm: f64) -> Result<f64> {
        if !(z_nm > 0.0) {
            return Err(Error::Domain(format!(
                "donor depth must be > 0 nm (below the surface), got {z_nm}"
            )));
        }
        Ok((self.foerster_radius_nm / z_nm).powi(self.distance_exponent.power()))
    }
}

/// Non-radiative (transfer) rate in ns⁻¹ at depth `z_nm`.
pub fn nonradiative_rate(z_nm: f64, p: &ModelParams) -> Result<f64> {
    Ok(p.radiative_rate() * p.coupling(z_nm)?)
}

/// Excited-state lifetime in ns of a donor at depth `z_nm`.
pub fn quenched_lifetime(z_nm: f64, p: &ModelParams) -> Result<f64> {
    Ok(p.bulk_lifetime_ns / (1.0 + p.coupling(z_nm)?))
}

/// Fraction of excitations transferred to the acceptor.
pub fn fret_efficiency(z_nm: f64, p: &ModelParams) -> Result<f64> {
    let c = p.coupling(z_nm)?;
    Ok(c / (1.0 + c))
}

/// Time-integrated emission of a donor at depth `z_nm`, in units of `I₀`.
pub fn quenched_intensity(z_nm: f64, p: &ModelParams) -> Result<f64> {
    Ok(p.unquenched_intensity / (1.0 + p.coupling(z_nm)?))
}

/// Depth that produces the given single-donor lifetime (closed-form inverse of
/// [`quenched_lifetime`]).
pub fn depth_for_lifetime(tau_ns: f64, p: &ModelParams) -> Result<f64> {
    if !(tau_ns > 0.0 && tau_ns < p.bulk_lifetime_ns) {
        return Err(Error::Domain(format!(
            "lifetime must lie in (0, {}) ns, got {tau_ns}",
            p.bulk_lifetime_ns
        )));
    }
    if p.foerster_radius_nm == 0.0 {
        return Err(Error::Domain(
            "no finite depth is quenched when the Förster radius is zero".into(),
        ));
    }
    let ratio = p.bulk_lifetime_ns / tau_ns - 1.0;
    Ok(p.foerster_radius_nm / ratio.powf(1.0 / p.distance_exponent.power() as f64))
}

/// Gaussian donor depth profile truncated to a finite window below the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthDistribution {
    pub mean_nm: f64,
    pub sigma_nm: f64,
    pub z_min_nm: f64,
    pub z_max_nm: f64,
    norm: f64,
}

impl DepthDistribution {
    /// Truncates to `[max(0.5 nm, μ − 4σ), μ + 4σ]`.
    pub fn new(mean_nm: f64, sigma_nm: f64) -> Result<Self> {
        let lo = (mean_nm - 4.0 * sigma_nm).max(0.5);
        let hi = mean_nm + 4.0 * sigma_nm;
        Self::with_window(mean_nm, sigma_nm, lo, hi)
    }

    pub fn with_window(mean_nm: f64, sigma_nm: f64, z_min_nm: f64, z_max_nm: f64) -> Result<Self> {
        if !(sigma_nm > 0.0 && sigma_nm.is_finite()) {
            return Err(Error::Domain("depth sigma must be > 0".into()));
        }
        if !(z_min_nm > 0.0 && z_min_nm < mean_nm && mean_nm < z_max_nm && z_max_nm.is_finite()) {
            return Err(Error::Domain(format!(
                "depth window must satisfy 0 < z_min < mean < z_max, got [{z_min_nm}, {z_max_nm}] with mean {mean_nm}"
            )));
        }
        let norm = normal_cdf((z_max_nm - mean_nm) / sigma_nm) - normal_cdf((z_min_nm - mean_nm) / sigma_nm);
        Ok(DepthDistribution {
            mean_nm,
            sigma_nm,
            z_min_nm,
            z_max_nm,
            norm,
        })
    }

    pub fn contains(&self, z_nm: f64) -> bool {
        z_nm >= self.z_min_nm && z_nm <= self.z_max_nm
    }
}

/// Probability density (nm⁻¹) of finding a donor at depth `z_nm`; zero outside
/// the truncation window.
pub fn depth_density(z_nm: f64, d: &DepthDistribution) -> f64 {
    if !d.contains(z_nm) {
        return 0.0;
    }
    let u = (z_nm - d.mean_nm) / d.sigma_nm;
    (-0.5 * u * u).exp() / (d.sigma_nm * (2.0 * std::f64::consts::PI).sqrt() * d.norm)
}
