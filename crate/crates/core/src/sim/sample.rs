use super::{DecayCurve, TcspcHistogram};
use crate::error::{Error, Result};
use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

/// Draws an independent Poisson count per bin, with means proportional to
/// `model` and summing to `total_photons`.
///
/// The stream is ChaCha8 seeded from `seed`, so equal seeds give equal histograms.
pub fn sample_histogram(model: &DecayCurve, total_photons: f64, seed: u64) -> Result<TcspcHistogram> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_histogram_with_rng(model, total_photons, &mut rng)
}

pub fn sample_histogram_with_rng<R: Rng + ?Sized>(
    model: &DecayCurve,
    total_photons: f64,
    rng: &mut R,
) -> Result<TcspcHistogram> {
    if !(total_photons > 0.0 && total_photons.is_finite()) {
        return Err(Error::Precondition(format!(
            "total_photons must be > 0, got {total_photons}"
        )));
    }
    let sum: f64 = model.values.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::Precondition("model curve has zero intensity".into()));
    }
    let scale = total_photons / sum;
    let mut counts = Vec::with_capacity(model.values.len());
    for &v in &model.values {
        let mean = v * scale;
        let c = if mean <= 0.0 {
            0.0
        } else {
            Poisson::new(mean)
                .map_err(|e| Error::Precondition(format!("bin mean {mean}: {e}")))?
                .sample(rng)
        };
        if c > u32::MAX as f64 {
            return Err(Error::Precondition(format!(
                "bin count {c} does not fit a 32-bit counter"
            )));
        }
        counts.push(c as u32);
    }
    TcspcHistogram::new(model.grid, counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{mono_exponential, TimeGrid};

    fn model() -> DecayCurve {
        mono_exponential(&TimeGrid::tcspc_default(), 5.0).unwrap()
    }

    #[test]
    fn same_seed_same_histogram() {
        let m = model();
        assert_eq!(
            sample_histogram(&m, 1e5, 7).unwrap(),
            sample_histogram(&m, 1e5, 7).unwrap()
        );
        assert_ne!(
            sample_histogram(&m, 1e5, 7).unwrap(),
            sample_histogram(&m, 1e5, 8).unwrap()
        );
    }

    #[test]
    fn total_is_within_five_sigma() {
        let m = model();
        for seed in 0..20 {
            let n = 1e5;
            let h = sample_histogram(&m, n, seed).unwrap();
            assert!((h.total() as f64 - n).abs() < 5.0 * n.sqrt());
        }
    }

    #[test]
    fn per_bin_variance_matches_mean() {
        let m = model();
        let n = 2e5;
        let reps = 1000;
        let nb = m.values.len();
        let mut s1 = vec![0.0; nb];
        let mut s2 = vec![0.0; nb];
        for seed in 0..reps {
            let h = sample_histogram(&m, n, seed).unwrap();
            for (i, &c) in h.counts.iter().enumerate() {
                s1[i] += c as f64;
                s2[i] += (c as f64).powi(2);
            }
        }
        let sum: f64 = m.values.iter().sum();
        let (mut checked, mut inside) = (0, 0);
        let (mut pooled_var, mut pooled_mean) = (0.0, 0.0);
        for i in 0..nb {
            let expected = m.values[i] / sum * n;
            if expected < 50.0 {
                continue;
            }
            let mean = s1[i] / reps as f64;
            let var = (s2[i] - reps as f64 * mean * mean) / (reps as f64 - 1.0);
            pooled_var += var;
            pooled_mean += mean;
            checked += 1;
            if (0.9..=1.1).contains(&(var / mean)) {
                inside += 1;
            }
        }
        assert!(checked > 100);
        // A single ratio from 1000 draws has ~4.5 % relative spread, so a few
        // bins fall outside the band by chance; the pooled ratio must not.
        let pooled = pooled_var / pooled_mean;
        assert!((0.9..=1.1).contains(&pooled), "pooled {pooled}");
        assert!(inside as f64 >= 0.95 * checked as f64, "{inside}/{checked}");
    }

    #[test]
    fn rejects_non_positive_photon_budget() {
        assert!(sample_histogram(&model(), 0.0, 1).is_err());
    }
}
