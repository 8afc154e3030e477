use super::{LifetimeMap, PixelClass};
use crate::error::{Error, Result};
use crate::fit::lm::{self, Bounds, Model, Objective, Options};
use crate::fit::Estimate;
use crate::special::{normal_cdf, sigma_to_fwhm};
use std::f64::consts::PI;

/// Straight line between two points given as `(row, col)` pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeLine {
    pub start: (f64, f64),
    pub end: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeProfileResult {
    /// Distance from the line start, nm.
    pub edge_position_nm: Estimate,
    pub psf_fwhm_nm: Estimate,
    /// Lifetime level where the line starts.
    pub plateau_start_ns: Estimate,
    /// Lifetime level where the line ends.
    pub plateau_end_ns: Estimate,
    pub residual_norm: f64,
    /// `(distance_nm, sampled value)` along the line.
    pub samples: Vec<(f64, f64)>,
    /// Fitted step at each sample.
    pub fitted: Vec<f64>,
}

pub const MIN_SAMPLES_PER_SIDE: usize = 8;

/// Per-pixel quantity sampled along the line, and the step model it is
/// fitted with. Coverage of the end side is `c = Φ((x − x0)/s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgeSignal {
    /// `τ_slow`, fitted as `(1 − c)·τ_start + c·τ_end`. The bi-exponential
    /// readout is not linear in coverage, so the width comes out narrow.
    TauSlow,
    /// First-moment lifetime. Photons from both sides add, so a mixed pixel
    /// reads `((1 − c)·τ_start + c·k·τ_end) / ((1 − c) + c·k)` with `k` the
    /// fitted ratio of photon yields.
    #[default]
    MeanArrival,
}

/// Blurred step with parameters `[τ_start, τ_end, x0, ln s]` (plus `ln k`
/// for [`EdgeSignal::MeanArrival`]).
struct Step {
    x: Vec<f64>,
    signal: EdgeSignal,
}

impl Model for Step {
    fn n_params(&self) -> usize {
        match self.signal {
            EdgeSignal::TauSlow => 4,
            EdgeSignal::MeanArrival => 5,
        }
    }

    fn eval(&self, th: &[f64], mu: &mut [f64], jac: &mut [Vec<f64>]) {
        let (ts, te, x0, s) = (th[0], th[1], th[2], th[3].exp());
        for (i, &x) in self.x.iter().enumerate() {
            let z = (x - x0) / s;
            let c = normal_cdf(z);
            let pdf = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
            let d_c = match self.signal {
                EdgeSignal::TauSlow => {
                    mu[i] = ts + (te - ts) * c;
                    jac[0][i] = 1.0 - c;
                    jac[1][i] = c;
                    te - ts
                }
                EdgeSignal::MeanArrival => {
                    let k = th[4].exp();
                    let den = (1.0 - c) + c * k;
                    let tau = ((1.0 - c) * ts + c * k * te) / den;
                    mu[i] = tau;
                    jac[0][i] = (1.0 - c) / den;
                    jac[1][i] = c * k / den;
                    jac[4][i] = c * k * (te - tau) / den;
                    (k * te - ts - tau * (k - 1.0)) / den
                }
            };
            jac[2][i] = -d_c * pdf / s;
            jac[3][i] = -d_c * pdf * z;
        }
    }
}

/// Samples `signal` every pixel along `line`, averaging over `halfwidth_px`
/// pixels on either side, and fits a Gaussian-blurred step.
pub fn edge_profile(
    map: &LifetimeMap,
    line: &EdgeLine,
    halfwidth_px: usize,
    signal: EdgeSignal,
) -> Result<EdgeProfileResult> {
    let (r0, c0) = line.start;
    let (r1, c1) = line.end;
    let length = ((r1 - r0).powi(2) + (c1 - c0).powi(2)).sqrt();
    if !(length >= 1.0) {
        return Err(Error::Usage("edge line must be at least one pixel long".into()));
    }
    let (dr, dc) = ((r1 - r0) / length, (c1 - c0) / length);
    let n = length.floor() as usize + 1;
    let mut xs = Vec::new();
    let mut taus = Vec::new();
    let (mut on, mut off) = (0, 0);
    for k in 0..n {
        let (pr, pc) = (r0 + dr * k as f64, c0 + dc * k as f64);
        let (mut sum, mut m, mut n_on) = (0.0, 0usize, 0usize);
        let hw = halfwidth_px as i64;
        for j in -hw..=hw {
            let rr = (pr - dc * j as f64).round();
            let cc = (pc + dr * j as f64).round();
            if rr < 0.0 || cc < 0.0 || rr >= map.height_px as f64 || cc >= map.width_px as f64 {
                continue;
            }
            let rec = map.get(rr as usize, cc as usize);
            let value = match signal {
                EdgeSignal::TauSlow => rec.tau_slow.map(|e| e.value),
                EdgeSignal::MeanArrival => rec.tau_mean_ns,
            };
            if let (Some(t), true) = (value, rec.class != PixelClass::LowSignal) {
                sum += t;
                m += 1;
                n_on += usize::from(rec.class == PixelClass::OnFlake);
            }
        }
        if m == 0 {
            continue;
        }
        if 2 * n_on > m {
            on += 1;
        } else {
            off += 1;
        }
        xs.push(k as f64 * map.pixel_size_nm);
        taus.push(sum / m as f64);
    }
    if on < MIN_SAMPLES_PER_SIDE || off < MIN_SAMPLES_PER_SIDE {
        return Err(Error::Usage(format!(
            "line must cross the flake edge with >= {MIN_SAMPLES_PER_SIDE} samples per side; \
             found {on} on-flake and {off} off-flake samples"
        )));
    }

    let k = taus.len();
    let head = 5.min(k / 2);
    let a0 = taus[..head].iter().sum::<f64>() / head as f64;
    let b0 = taus[k - head..].iter().sum::<f64>() / head as f64;
    let mid = 0.5 * (a0 + b0);
    let cross = (1..k)
        .find(|&i| (taus[i - 1] - mid) * (taus[i] - mid) <= 0.0)
        .unwrap_or(k / 2);
    let x0 = 0.5 * (xs[cross - 1] + xs[cross]);
    let px = map.pixel_size_nm;
    let span = xs[k - 1] - xs[0];
    let mut theta0 = vec![a0, b0, x0, (2.0 * px).ln()];
    let mut bounds = Bounds {
        lower: vec![f64::NEG_INFINITY, f64::NEG_INFINITY, xs[0], (0.01 * px).ln()],
        upper: vec![f64::INFINITY, f64::INFINITY, xs[k - 1], span.ln()],
        free: vec![true; 4],
    };
    if signal == EdgeSignal::MeanArrival {
        theta0.push(0.0);
        bounds.lower.push(-10.0);
        bounds.upper.push(10.0);
        bounds.free.push(true);
    }
    let step = Step { x: xs.clone(), signal };
    let out = lm::minimize(
        &step,
        &taus,
        &theta0,
        &bounds,
        Objective::LeastSquares,
        &Options::default(),
    );
    if !out.converged {
        return Err(Error::Numerical(format!(
            "edge fit did not converge after {} iterations",
            out.iterations
        )));
    }
    let mut fitted = vec![0.0; k];
    let mut scratch = vec![vec![0.0; k]; step.n_params()];
    step.eval(&out.theta, &mut fitted, &mut scratch);
    let s = out.theta[3].exp();
    let fwhm = sigma_to_fwhm(s);
    Ok(EdgeProfileResult {
        edge_position_nm: Estimate {
            value: out.theta[2],
            sigma: out.sigma[2],
        },
        psf_fwhm_nm: Estimate {
            value: fwhm,
            sigma: fwhm * out.sigma[3],
        },
        plateau_start_ns: Estimate {
            value: out.theta[0],
            sigma: out.sigma[0],
        },
        plateau_end_ns: Estimate {
            value: out.theta[1],
            sigma: out.sigma[1],
        },
        residual_norm: out.objective.sqrt(),
        samples: xs.into_iter().zip(taus).collect(),
        fitted,
    })
}
