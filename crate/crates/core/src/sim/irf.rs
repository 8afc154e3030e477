use super::{DecayCurve, IrfSpec, SignalComposition, TimeGrid};
use crate::error::{Error, Result};
use crate::special::normal_cdf;

/// Discrete kernel of a unit-area Gaussian integrated over each bin, for the
/// curve treated as piecewise constant. Returns `(first_offset, weights)`.
fn gaussian_kernel(grid: &TimeGrid, irf: &IrfSpec) -> (i64, Vec<f64>) {
    let bw = grid.bin_width_ps;
    let sigma = irf.sigma_ps();
    let reach = ((irf.center_ps.abs() + 9.0 * sigma) / bw).ceil() as i64 + 1;
    let mut weights = Vec::with_capacity((2 * reach + 1) as usize);
    for k in -reach..=reach {
        let hi = ((k as f64 + 0.5) * bw - irf.center_ps) / sigma;
        let lo = ((k as f64 - 0.5) * bw - irf.center_ps) / sigma;
        weights.push(normal_cdf(hi) - normal_cdf(lo));
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    (-reach, weights)
}

/// Convolves `curve` with the Gaussian instrument response.
///
/// The convolution is circular over the grid span, as for a histogram recorded
/// under periodic excitation, so the summed intensity is conserved exactly.
/// Needs `bin_width ≤ FWHM/4`; a response narrower than one bin acts as a delta
/// function.
pub fn irf_convolve(curve: &DecayCurve, irf: &IrfSpec) -> Result<DecayCurve> {
    let grid = &curve.grid;
    let bw = grid.bin_width_ps;
    if irf.fwhm_ps >= bw && bw > irf.fwhm_ps / 4.0 {
        return Err(Error::Precondition(format!(
            "bin width {bw} ps is too coarse for an IRF of {} ps FWHM (needs <= FWHM/4)",
            irf.fwhm_ps
        )));
    }
    let n = grid.n_bins as i64;
    let (k0, kernel) = gaussian_kernel(grid, irf);
    let mut out = vec![0.0; grid.n_bins];
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (m, w) in kernel.iter().enumerate() {
            let src = (j as i64 - (k0 + m as i64)).rem_euclid(n) as usize;
            acc += w * curve.values[src];
        }
        *o = acc.max(0.0);
    }
    DecayCurve::new(*grid, out)
}

/// `exp(−t/τ)` for `t ≥ 0` at the bin centres, zero before the pulse.
pub fn mono_exponential(grid: &TimeGrid, lifetime_ns: f64) -> Result<DecayCurve> {
    if !(lifetime_ns > 0.0) {
        return Err(Error::Domain(format!("lifetime must be > 0, got {lifetime_ns}")));
    }
    let values = (0..grid.n_bins)
        .map(|i| {
            let t = grid.center_ns(i);
            if t < 0.0 {
                0.0
            } else {
                (-t / lifetime_ns).exp()
            }
        })
        .collect();
    DecayCurve::new(*grid, values)
}

/// Donor curve plus acceptor exciton decay plus constant background, with the
/// two decays passed through the instrument response.
pub fn compose_signal(donor: &DecayCurve, comp: &SignalComposition, irf: &IrfSpec) -> Result<DecayCurve> {
    comp.validate()?;
    let donor = irf_convolve(donor, irf)?;
    let acceptor = irf_convolve(&mono_exponential(&donor.grid, comp.acceptor_lifetime_ns)?, irf)?;
    let mut out = DecayCurve::weighted_sum(&[(comp.donor_weight, &donor), (comp.acceptor_weight, &acceptor)])?;
    for v in &mut out.values {
        *v += comp.background_rate;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::fwhm_to_sigma;

    fn fine_grid() -> TimeGrid {
        // 1 ps bins, pulse at 2 ns, 40 ns span
        TimeGrid::new(1.0, 40_000, 2_000.0).unwrap()
    }

    #[test]
    fn conserves_area() {
        let grid = TimeGrid::tcspc_default();
        let c = mono_exponential(&grid, 12.0).unwrap();
        let out = irf_convolve(&c, &IrfSpec::measured_setup()).unwrap();
        let before: f64 = c.values.iter().sum();
        let after: f64 = out.values.iter().sum();
        assert!((before - after).abs() / before < 1e-9);
    }

    #[test]
    fn sub_bin_irf_is_identity() {
        let grid = TimeGrid::tcspc_default();
        let c = mono_exponential(&grid, 3.0).unwrap();
        let out = irf_convolve(&c, &IrfSpec::new(1.0, 0.0).unwrap()).unwrap();
        for (a, b) in c.values.iter().zip(&out.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let grid = TimeGrid::new(100.0, 100, 0.0).unwrap();
        let c = mono_exponential(&grid, 3.0).unwrap();
        assert!(matches!(
            irf_convolve(&c, &IrfSpec::measured_setup()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn matches_closed_form_on_fine_grid() {
        // Closed form of exp(-t/τ) ⊗ Gaussian written out directly here,
        // independent of the fit module.
        let grid = fine_grid();
        let tau = 2.0;
        let irf = IrfSpec::measured_setup();
        let s = fwhm_to_sigma(irf.fwhm_ps) * 1e-3;
        let c = mono_exponential(&grid, tau).unwrap();
        let out = irf_convolve(&c, &irf).unwrap();
        let peak = out.values.iter().cloned().fold(0.0, f64::max);
        for i in (0..grid.n_bins).step_by(37) {
            let t = grid.center_ns(i);
            let exact = 0.5
                * (s * s / (2.0 * tau * tau) - t / tau).exp()
                * statrs::function::erf::erfc((s / tau - t / s) / std::f64::consts::SQRT_2);
            if exact < 1e-3 * peak {
                continue;
            }
            let rel = (out.values[i] - exact).abs() / exact;
            assert!(rel < 1e-6, "t={t}: {rel}");
        }
    }

    #[test]
    fn composition_limits() {
        let grid = TimeGrid::tcspc_default();
        let irf = IrfSpec::measured_setup();
        let donor = mono_exponential(&grid, 5.0).unwrap();
        let only_donor = compose_signal(&donor, &SignalComposition::donor_only(), &irf).unwrap();
        assert_eq!(only_donor, irf_convolve(&donor, &irf).unwrap());

        let delta = IrfSpec::new(0.5, 0.0).unwrap();
        let untouched = compose_signal(&donor, &SignalComposition::donor_only(), &delta).unwrap();
        for (a, b) in untouched.values.iter().zip(&donor.values) {
            assert!((a - b).abs() < 1e-12);
        }

        let acc = SignalComposition {
            donor_weight: 0.0,
            ..SignalComposition::on_flake()
        };
        let pure = compose_signal(&donor, &acc, &irf).unwrap();
        let reference = irf_convolve(&mono_exponential(&grid, 0.41).unwrap(), &irf).unwrap();
        for (a, b) in pure.values.iter().zip(&reference.values) {
            assert!((a - 4.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn background_adds_a_constant() {
        let grid = TimeGrid::tcspc_default();
        let donor = mono_exponential(&grid, 5.0).unwrap();
        let comp = SignalComposition {
            background_rate: 0.25,
            ..SignalComposition::donor_only()
        };
        let irf = IrfSpec::measured_setup();
        let with = compose_signal(&donor, &comp, &irf).unwrap();
        let without = compose_signal(&donor, &SignalComposition::donor_only(), &irf).unwrap();
        for (a, b) in with.values.iter().zip(&without.values) {
            assert!((a - b - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_weights_fast_then_slow() {
        let grid = TimeGrid::tcspc_default();
        let irf = IrfSpec::measured_setup();
        let donor = mono_exponential(&grid, 5.1).unwrap();
        let comp = SignalComposition {
            donor_weight: 1.0,
            acceptor_weight: 1.0,
            background_rate: 0.0,
            acceptor_lifetime_ns: 0.41,
        };
        let total = compose_signal(&donor, &comp, &irf).unwrap();
        let slow = irf_convolve(&donor, &irf).unwrap();
        // derivative just after the rise is dominated by the fast component
        let i = grid.bin_of_ns(0.6);
        let slope_total = (total.values[i + 1] - total.values[i]) / total.values[i];
        let slope_slow = (slow.values[i + 1] - slow.values[i]) / slow.values[i];
        assert!(slope_total < 3.0 * slope_slow);
        // at 10 ns the fast part is below 1e-9 of the slow one
        let j = grid.bin_of_ns(10.0);
        assert!((total.values[j] - slow.values[j]) / slow.values[j] < 1e-8);
    }
}
