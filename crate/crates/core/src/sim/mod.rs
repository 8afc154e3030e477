//! Forward simulation of donor/acceptor photoluminescence decays and
//! photon-counting histograms.

mod csv;
mod ensemble;
mod irf;
mod sample;
mod scene;

pub use ensemble::{ensemble_decay, ensemble_decay_with_nodes, QUADRATURE_NODES};
pub use irf::{compose_signal, irf_convolve, mono_exponential};
pub use sample::{sample_histogram, sample_histogram_with_rng};
pub use scene::{coverage_map, simulate_flim_cube, FlimScene, Polygon};

use crate::error::{Error, Result};

/// Uniform TCSPC time axis. Bin `i` spans `[i·w, (i+1)·w)` picoseconds from the
/// start of the record; the excitation pulse sits at `origin_ps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub bin_width_ps: f64,
    pub n_bins: usize,
    pub origin_ps: f64,
    pub repetition_period_ps: Option<f64>,
}

impl TimeGrid {
    pub fn new(bin_width_ps: f64, n_bins: usize, origin_ps: f64) -> Result<Self> {
        let g = TimeGrid {
            bin_width_ps,
            n_bins,
            origin_ps,
            repetition_period_ps: None,
        };
        g.validate()?;
        Ok(g)
    }

    /// 4096 bins of 32 ps with the pulse at the start of bin 128.
    pub fn tcspc_default() -> Self {
        TimeGrid {
            bin_width_ps: 32.0,
            n_bins: 4096,
            origin_ps: 128.0 * 32.0,
            repetition_period_ps: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width_ps > 0.0 && self.bin_width_ps.is_finite()) {
            return Err(Error::Domain("bin_width_ps must be > 0".into()));
        }
        if self.n_bins < 2 {
            return Err(Error::Domain("a time grid needs at least 2 bins".into()));
        }
        if !self.origin_ps.is_finite() {
            return Err(Error::Domain("origin_ps must be finite".into()));
        }
        if let Some(period) = self.repetition_period_ps {
            if self.span_ps() > period * (1.0 + 1e-12) {
                return Err(Error::Domain(format!(
                    "grid span {} ps exceeds the repetition period {period} ps",
                    self.span_ps()
                )));
            }
        }
        Ok(())
    }

    pub fn span_ps(&self) -> f64 {
        self.bin_width_ps * self.n_bins as f64
    }

    pub fn bin_start_ps(&self, i: usize) -> f64 {
        i as f64 * self.bin_width_ps
    }

    /// Bin centre in ns, measured from the excitation pulse.
    pub fn center_ns(&self, i: usize) -> f64 {
        ((i as f64 + 0.5) * self.bin_width_ps - self.origin_ps) * 1e-3
    }

    pub fn centers_ns(&self) -> Vec<f64> {
        (0..self.n_bins).map(|i| self.center_ns(i)).collect()
    }

    pub fn bin_width_ns(&self) -> f64 {
        self.bin_width_ps * 1e-3
    }

    /// Index of the bin containing `t_ns` (relative to the pulse), clamped to the grid.
    pub fn bin_of_ns(&self, t_ns: f64) -> usize {
        let x = (t_ns * 1e3 + self.origin_ps) / self.bin_width_ps;
        if x <= 0.0 {
            0
        } else {
            (x.floor() as usize).min(self.n_bins - 1)
        }
    }

    pub(crate) fn same_as(&self, other: &TimeGrid) -> bool {
        self.n_bins == other.n_bins
            && (self.bin_width_ps - other.bin_width_ps).abs() <= 1e-9 * self.bin_width_ps
            && (self.origin_ps - other.origin_ps).abs() <= 1e-9 * self.bin_width_ps
    }
}

/// Deterministic model intensity sampled at the bin centres of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayCurve {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl DecayCurve {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.n_bins {
            return Err(Error::Usage(format!(
                "curve has {} values for a grid of {} bins",
                values.len(),
                grid.n_bins
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Numerical(
                "decay curve values must be finite and non-negative".into(),
            ));
        }
        Ok(DecayCurve { grid, values })
    }

    /// Sum of the bin values times the bin width (ns).
    pub fn area(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.bin_width_ns()
    }

    /// `Σ wᵢ·curveᵢ` over curves that share one grid.
    pub fn weighted_sum(terms: &[(f64, &DecayCurve)]) -> Result<DecayCurve> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Usage("weighted sum of zero curves".into()))?
            .1;
        let mut out = vec![0.0; first.values.len()];
        for (w, c) in terms {
            if !c.grid.same_as(&first.grid) {
                return Err(Error::Usage("curves are defined on different time grids".into()));
            }
            for (o, v) in out.iter_mut().zip(&c.values) {
                *o += w * v;
            }
        }
        DecayCurve::new(first.grid, out)
    }
}

/// Gaussian instrument response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrfSpec {
    pub fwhm_ps: f64,
    /// Offset of the response maximum from the excitation pulse.
    pub center_ps: f64,
}

impl IrfSpec {
    pub fn new(fwhm_ps: f64, center_ps: f64) -> Result<Self> {
        if !(fwhm_ps > 0.0 && fwhm_ps.is_finite()) || !center_ps.is_finite() {
            return Err(Error::Domain(format!("IRF FWHM must be > 0, got {fwhm_ps}")));
        }
        Ok(IrfSpec { fwhm_ps, center_ps })
    }

    /// 326 ps FWHM, centred on the pulse.
    pub fn measured_setup() -> Self {
        IrfSpec {
            fwhm_ps: 326.0,
            center_ps: 0.0,
        }
    }

    pub fn sigma_ps(&self) -> f64 {
        crate::special::fwhm_to_sigma(self.fwhm_ps)
    }

    pub fn sigma_ns(&self) -> f64 {
        self.sigma_ps() * 1e-3
    }
}

/// Relative weights of the signal sources seen in one detection volume.
///
/// Donor and acceptor weights scale curves whose value at the pulse is 1;
/// `background_rate` is a constant added to every bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalComposition {
    pub donor_weight: f64,
    pub acceptor_weight: f64,
    pub background_rate: f64,
    pub acceptor_lifetime_ns: f64,
}

impl SignalComposition {
    /// Donor ensemble plus a bright WSe₂ exciton decay (τ = 0.41 ns).
    pub fn on_flake() -> Self {
        SignalComposition {
            donor_weight: 1.0,
            acceptor_weight: 4.0,
            background_rate: 0.0,
            acceptor_lifetime_ns: 0.41,
        }
    }

    pub fn donor_only() -> Self {
        SignalComposition {
            donor_weight: 1.0,
            acceptor_weight: 0.0,
            background_rate: 0.0,
            acceptor_lifetime_ns: 0.41,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = [self.donor_weight, self.acceptor_weight, self.background_rate];
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain(
                "composition weights and background must be finite and >= 0".into(),
            ));
        }
        if !(self.acceptor_lifetime_ns > 0.0 && self.acceptor_lifetime_ns.is_finite()) {
            return Err(Error::Domain("acceptor_lifetime_ns must be > 0".into()));
        }
        Ok(())
    }
}

/// Photon counts per time bin.
#[derive(Debug, Clone, PartialEq)]
pub struct TcspcHistogram {
    pub grid: TimeGrid,
    pub counts: Vec<u32>,
}

impl TcspcHistogram {
    pub fn new(grid: TimeGrid, counts: Vec<u32>) -> Result<Self> {
        grid.validate()?;
        if counts.len() != grid.n_bins {
            return Err(Error::Format(format!(
                "histogram has {} counts for a grid of {} bins",
                counts.len(),
                grid.n_bins
            )));
        }
        Ok(TcspcHistogram { grid, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn counts_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_layout() {
        let g = TimeGrid::tcspc_default();
        assert!((g.span_ps() - 131_072.0).abs() < 1e-9);
        assert!((g.center_ns(128) - 0.016).abs() < 1e-12);
        assert_eq!(g.bin_of_ns(0.0), 128);
        assert_eq!(g.bin_of_ns(-100.0), 0);
        assert_eq!(g.bin_of_ns(1e6), 4095);
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(0.0, 10, 0.0).is_err());
        assert!(TimeGrid::new(32.0, 1, 0.0).is_err());
        let mut g = TimeGrid::tcspc_default();
        g.repetition_period_ps = Some(125_000.0);
        assert!(g.validate().is_err());
        g.n_bins = 3900;
        assert!(g.validate().is_ok());
    }

    #[test]
    fn weighted_sum_rejects_mismatched_grids() {
        let a = DecayCurve::new(TimeGrid::new(32.0, 4, 0.0).unwrap(), vec![1.0; 4]).unwrap();
        let b = DecayCurve::new(TimeGrid::new(16.0, 4, 0.0).unwrap(), vec![1.0; 4]).unwrap();
        assert!(matches!(
            DecayCurve::weighted_sum(&[(1.0, &a), (1.0, &b)]),
            Err(Error::Usage(_))
        ));
        let s = DecayCurve::weighted_sum(&[(2.0, &a), (0.5, &a)]).unwrap();
        assert_eq!(s.values, vec![2.5; 4]);
    }

    #[test]
    fn negative_curve_values_are_rejected() {
        let g = TimeGrid::new(32.0, 2, 0.0).unwrap();
        assert!(DecayCurve::new(g, vec![1.0, -1.0]).is_err());
        assert!(DecayCurve::new(g, vec![1.0, f64::NAN]).is_err());
    }
}
