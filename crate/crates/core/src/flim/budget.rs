use crate::error::{Error, Result};
use crate::fit::{fit_decay, FitModelSpec};
use crate::sim::{irf_convolve, mono_exponential, sample_histogram_with_rng, IrfSpec, TimeGrid};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Dwell time in seconds needed to collect `min_photons` at `count_rate_cps`.
pub fn photon_budget(count_rate_cps: f64, min_photons: f64) -> Result<f64> {
    if !(count_rate_cps > 0.0 && count_rate_cps.is_finite()) {
        return Err(Error::Domain(format!("count rate must be > 0, got {count_rate_cps}")));
    }
    if !(min_photons >= 0.0 && min_photons.is_finite()) {
        return Err(Error::Domain(format!("photon count must be >= 0, got {min_photons}")));
    }
    Ok(min_photons / count_rate_cps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinPhotonsSpec {
    pub tau_true_ns: f64,
    pub irf: IrfSpec,
    pub grid: TimeGrid,
    pub target_rel_error: f64,
    pub trials: usize,
    pub seed: u64,
}

impl MinPhotonsSpec {
    pub fn new(tau_true_ns: f64, target_rel_error: f64, seed: u64) -> Self {
        MinPhotonsSpec {
            tau_true_ns,
            irf: IrfSpec::measured_setup(),
            grid: TimeGrid::tcspc_default(),
            target_rel_error,
            trials: 200,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderRung {
    pub photons: u64,
    /// Relative standard deviation of the fitted lifetime; `None` when some
    /// trial could not be fitted at all.
    pub rel_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinPhotonsResult {
    pub photons: u64,
    pub rel_std: f64,
    pub ladder: Vec<LadderRung>,
}

pub const LADDER_MAX: u64 = 10_000_000;

/// 10, 20, 50, 100, … up to [`LADDER_MAX`].
pub fn ladder() -> Vec<u64> {
    let mut out = Vec::new();
    let mut decade = 10u64;
    while decade <= LADDER_MAX {
        for m in [1, 2, 5] {
            if m * decade <= LADDER_MAX {
                out.push(m * decade);
            }
        }
        decade *= 10;
    }
    out
}

/// Smallest ladder rung whose Monte Carlo spread of the fitted lifetime
/// (over `trials` simulated histograms) meets the target.
pub fn empirical_min_photons(spec: &MinPhotonsSpec) -> Result<MinPhotonsResult> {
    if !(spec.target_rel_error > 0.0 && spec.target_rel_error < 1.0) {
        return Err(Error::Domain(format!(
            "target relative error must lie in (0, 1), got {}",
            spec.target_rel_error
        )));
    }
    if spec.trials < 2 {
        return Err(Error::Domain("need at least 2 trials".into()));
    }
    let model = irf_convolve(&mono_exponential(&spec.grid, spec.tau_true_ns)?, &spec.irf)?;
    // the simulated histograms carry no background
    let fit_spec = FitModelSpec::new(1, Some(spec.irf)).with_fixed_background(0.0);
    let mut rungs = Vec::new();
    for (rung, photons) in ladder().into_iter().enumerate() {
        let taus: Result<Vec<f64>> = (0..spec.trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                rng.set_stream((rung * spec.trials + trial) as u64);
                let h = sample_histogram_with_rng(&model, photons as f64, &mut rng)?;
                Ok(fit_decay(&h, &fit_spec)?.components[0].lifetime_ns)
            })
            .collect();
        let taus = match taus {
            Ok(t) => t,
            Err(Error::Precondition(_)) => {
                rungs.push(LadderRung { photons, rel_std: None });
                continue;
            }
            Err(e) => return Err(e),
        };
        let n = taus.len() as f64;
        let mean = taus.iter().sum::<f64>() / n;
        let var = taus.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let rel_std = var.sqrt() / spec.tau_true_ns;
        rungs.push(LadderRung {
            photons,
            rel_std: Some(rel_std),
        });
        if rel_std <= spec.target_rel_error {
            return Ok(MinPhotonsResult {
                photons,
                rel_std,
                ladder: rungs,
            });
        }
    }
    Err(Error::Search(format!(
        "relative error {} not reached within {LADDER_MAX} photons",
        spec.target_rel_error
    )))
}
