use super::{DecayCurve, TimeGrid};
use crate::error::{Error, Result};
use crate::model::{depth_density, quenched_intensity, quenched_lifetime, DepthDistribution, ModelParams};
use crate::special::gauss_legendre_on;

pub const QUADRATURE_NODES: usize = 129;

const CONVERGENCE_TOL: f64 = 1e-6;
// Values below this fraction of S(0) are not used for the convergence check.
const CONVERGENCE_FLOOR: f64 = 1e-12;

/// The depth integral `S(t) = ∫ D(z)·I(z)·exp(−t/τ(z)) dz / ∫ D(z)·I(z) dz`
/// reduced to a weighted sum of exponentials.
struct EnsembleKernel {
    terms: Vec<(f64, f64)>,
}

impl EnsembleKernel {
    fn new(p: &ModelParams, d: &DepthDistribution, nodes: usize) -> Result<Self> {
        let mut terms = Vec::with_capacity(nodes);
        let mut norm = 0.0;
        for (z, w) in gauss_legendre_on(nodes, d.z_min_nm, d.z_max_nm) {
            let weight = w * depth_density(z, d) * quenched_intensity(z, p)?;
            norm += weight;
            terms.push((weight, quenched_lifetime(z, p)?));
        }
        if !(norm > 0.0) {
            return Err(Error::Numerical("ensemble has zero total intensity".into()));
        }
        for t in &mut terms {
            t.0 /= norm;
        }
        Ok(EnsembleKernel { terms })
    }

    fn value(&self, t_ns: f64) -> f64 {
        if t_ns < 0.0 {
            return 0.0;
        }
        self.terms.iter().map(|(w, tau)| w * (-t_ns / tau).exp()).sum()
    }

    fn sample(&self, grid: &TimeGrid) -> Vec<f64> {
        (0..grid.n_bins).map(|i| self.value(grid.center_ns(i))).collect()
    }
}

/// Ensemble photoluminescence decay of donors distributed in depth, sampled at
/// the bin centres of `grid` and normalized to 1 at the excitation pulse.
///
/// Uses a 129-node Gauss-Legendre rule over the truncation window of `d` and
/// fails if doubling the node count moves any sample by more than 1e-6
/// (relative).
pub fn ensemble_decay(p: &ModelParams, d: &DepthDistribution, grid: &TimeGrid) -> Result<DecayCurve> {
    let curve = ensemble_decay_with_nodes(p, d, grid, QUADRATURE_NODES)?;
    let check = ensemble_decay_with_nodes(p, d, grid, 2 * QUADRATURE_NODES)?;
    let worst = curve
        .values
        .iter()
        .zip(&check.values)
        .filter(|(_, fine)| **fine > CONVERGENCE_FLOOR)
        .map(|(coarse, fine)| (coarse - fine).abs() / fine)
        .fold(0.0, f64::max);
    if worst > CONVERGENCE_TOL {
        return Err(Error::Numerical(format!(
            "depth quadrature did not converge: relative change {worst:.3e} on node doubling"
        )));
    }
    Ok(curve)
}

/// [`ensemble_decay`] with an explicit node count and no convergence check.
pub fn ensemble_decay_with_nodes(
    p: &ModelParams,
    d: &DepthDistribution,
    grid: &TimeGrid,
    nodes: usize,
) -> Result<DecayCurve> {
    p.validate()?;
    grid.validate()?;
    let kernel = EnsembleKernel::new(p, d, nodes)?;
    DecayCurve::new(*grid, kernel.sample(grid))
}
