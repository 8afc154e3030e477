use super::{fit_series, FitModelSpec, Objective};
use crate::error::{Error, Result};
use crate::sim::{DecayCurve, IrfSpec, TcspcHistogram, TimeGrid};

/// Restriction of a decay to its donor-dominated part: skip `head_cut_ns`
/// after the peak and stop where the signal falls below
/// `tail_threshold_fraction` of its level at the start of the kept range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateSpec {
    pub head_cut_ns: f64,
    pub tail_threshold_fraction: f64,
}

impl Default for GateSpec {
    /// 3 ns head cut, 1 % tail threshold.
    fn default() -> Self {
        GateSpec {
            head_cut_ns: 3.0,
            tail_threshold_fraction: 0.01,
        }
    }
}

impl GateSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.head_cut_ns >= 0.0 && self.head_cut_ns.is_finite()) {
            return Err(Error::Domain("head_cut_ns must be >= 0".into()));
        }
        if !(self.tail_threshold_fraction > 0.0 && self.tail_threshold_fraction < 1.0) {
            return Err(Error::Domain("tail_threshold_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Number of leading bins averaged to define the level the tail threshold
/// refers to.
const LEVEL_BINS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct GatedHistogram {
    /// The retained bins, on a grid that keeps the original pulse position.
    pub histogram: TcspcHistogram,
    pub peak_bin: usize,
    pub start_bin: usize,
    pub end_bin: usize,
    pub start_level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct GateRange {
    pub peak: usize,
    pub start: usize,
    pub end: usize,
    pub level: f64,
}

pub(crate) fn gate_range(values: &[f64], grid: &TimeGrid, g: &GateSpec) -> Result<GateRange> {
    g.validate()?;
    let n = values.len();
    let peak = (0..n).fold(0, |best, i| if values[i] > values[best] { i } else { best });
    if !(values[peak] >= 10.0) {
        return Err(Error::Precondition(format!(
            "no identifiable peak: maximum bin holds {} counts (needs >= 10)",
            values[peak]
        )));
    }
    let cut = grid.center_ns(peak) + g.head_cut_ns;
    let start = (peak..n)
        .find(|&i| grid.center_ns(i) >= cut - 1e-9)
        .ok_or_else(|| Error::Gating(format!("head cut of {} ns runs past the histogram", g.head_cut_ns)))?;
    let hi = (start + LEVEL_BINS).min(n);
    let level = values[start..hi].iter().sum::<f64>() / (hi - start) as f64;
    let threshold = g.tail_threshold_fraction * level;
    let end = (start..n)
        .rev()
        .find(|&i| values[i] >= threshold && values[i] > 0.0)
        .ok_or_else(|| Error::Gating("no bins above the tail threshold".into()))?;
    if end <= start {
        return Err(Error::Gating(format!(
            "gated range is empty (start bin {start}, end bin {end})"
        )));
    }
    Ok(GateRange {
        peak,
        start,
        end,
        level,
    })
}

/// Keeps the bins from `peak + head_cut` to the last bin at or above the
/// tail threshold.
pub fn gate_histogram(h: &TcspcHistogram, g: &GateSpec) -> Result<GatedHistogram> {
    let r = gate_range(&h.counts_f64(), &h.grid, g)?;
    let grid = TimeGrid {
        n_bins: r.end - r.start + 1,
        origin_ps: h.grid.origin_ps - r.start as f64 * h.grid.bin_width_ps,
        ..h.grid
    };
    Ok(GatedHistogram {
        histogram: TcspcHistogram::new(grid, h.counts[r.start..=r.end].to_vec())?,
        peak_bin: r.peak,
        start_bin: r.start,
        end_bin: r.end,
        start_level: r.level,
    })
}

/// A value with its 1σ uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

fn gated_mono_fit(values: &[f64], grid: &TimeGrid, g: &GateSpec, irf: Option<&IrfSpec>) -> Result<Estimate> {
    let r = gate_range(values, grid, g)?;
    let mut spec = FitModelSpec::new(1, irf.copied())
        .with_window(r.start, r.end)
        .with_fixed_background(0.0)
        .with_objective(Objective::PoissonMle);
    spec.frozen.t0 = true;
    spec.t0_ps = Some(match irf {
        // plain exponential anchored at the first retained bin
        None => grid.center_ns(r.start) * 1e3,
        // the excitation pulse, with the IRF centred on it
        Some(_) => 0.0,
    });
    let fit = fit_series(grid, values, &spec)?;
    if !fit.converged {
        return Err(Error::Numerical(format!(
            "effective-lifetime fit did not converge after {} iterations",
            fit.iterations
        )));
    }
    let c = fit.components[0];
    Ok(Estimate {
        value: c.lifetime_ns,
        sigma: c.lifetime_sigma_ns,
    })
}

/// Mono-exponential lifetime of the gated part of a decay. With `irf = None`
/// the gated bins are fitted with a bare exponential.
pub fn effective_lifetime(h: &TcspcHistogram, g: &GateSpec, irf: Option<&IrfSpec>) -> Result<Estimate> {
    gated_mono_fit(&h.counts_f64(), &h.grid, g, irf)
}

/// [`effective_lifetime`] of a noise-free model curve, treated as the
/// expectation of a histogram holding `1e6` photons.
pub fn effective_lifetime_of_curve(curve: &DecayCurve, g: &GateSpec, irf: Option<&IrfSpec>) -> Result<Estimate> {
    let sum: f64 = curve.values.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::Precondition("curve has zero intensity".into()));
    }
    let scaled: Vec<f64> = curve.values.iter().map(|v| v * 1e6 / sum).collect();
    gated_mono_fit(&scaled, &curve.grid, g, irf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{compose_signal, irf_convolve, mono_exponential, sample_histogram, SignalComposition};

    fn grid() -> TimeGrid {
        TimeGrid::tcspc_default()
    }

    #[test]
    fn no_cut_and_tiny_threshold_keep_everything_after_the_peak() {
        let c = mono_exponential(&grid(), 5.0).unwrap();
        let vals: Vec<f64> = c.values.iter().map(|v| v * 1e4).collect();
        let g = GateSpec {
            head_cut_ns: 0.0,
            tail_threshold_fraction: 1e-12,
        };
        let r = gate_range(&vals, &grid(), &g).unwrap();
        assert_eq!(r.start, r.peak);
        assert_eq!(r.end, grid().n_bins - 1);
    }

    #[test]
    fn default_gate_removes_the_acceptor_component() {
        let irf = IrfSpec::measured_setup();
        let donor = mono_exponential(&grid(), 5.1).unwrap();
        let comp = SignalComposition::on_flake();
        let total = compose_signal(&donor, &comp, &irf).unwrap();
        let acceptor_only = compose_signal(
            &donor,
            &SignalComposition {
                donor_weight: 0.0,
                ..comp
            },
            &irf,
        )
        .unwrap();
        let r = gate_range(
            &total.values.iter().map(|v| v * 1e4).collect::<Vec<_>>(),
            &grid(),
            &GateSpec::default(),
        )
        .unwrap();
        let kept: f64 = total.values[r.start..=r.end].iter().sum();
        let fast: f64 = acceptor_only.values[r.start..=r.end].iter().sum();
        assert!(fast / kept < 0.02, "{}", fast / kept);
    }

    #[test]
    fn noise_has_no_peak() {
        let counts = vec![3u32; grid().n_bins];
        let h = TcspcHistogram::new(grid(), counts).unwrap();
        assert!(matches!(
            gate_histogram(&h, &GateSpec::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn gated_histogram_keeps_pulse_reference() {
        let c = mono_exponential(&grid(), 5.0).unwrap();
        let h = sample_histogram(&c, 1e5, 1).unwrap();
        let gh = gate_histogram(&h, &GateSpec::default()).unwrap();
        assert!((gh.histogram.grid.center_ns(0) - grid().center_ns(gh.start_bin)).abs() < 1e-12);
        assert!(gh.histogram.grid.center_ns(0) >= grid().center_ns(gh.peak_bin) + 3.0 - 1e-9);
    }

    #[test]
    fn pure_exponential_self_consistency() {
        let irf = IrfSpec::measured_setup();
        let model = irf_convolve(&mono_exponential(&grid(), 7.0).unwrap(), &irf).unwrap();
        let h = sample_histogram(&model, 1e6, 4).unwrap();
        let e = effective_lifetime(&h, &GateSpec::default(), None).unwrap();
        assert!((e.value - 7.0).abs() / 7.0 < 0.01, "{e:?}");
        let with_irf = effective_lifetime(&h, &GateSpec::default(), Some(&irf)).unwrap();
        assert!((with_irf.value - 7.0).abs() / 7.0 < 0.01, "{with_irf:?}");
    }

    #[test]
    fn invalid_gate() {
        let g = GateSpec {
            head_cut_ns: -1.0,
            ..GateSpec::default()
        };
        assert!(g.validate().is_err());
        let g = GateSpec {
            tail_threshold_fraction: 1.0,
            ..GateSpec::default()
        };
        assert!(g.validate().is_err());
    }
}
