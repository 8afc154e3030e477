//! Fitting of mono- and bi-exponential decay models to photon-counting data.

mod expgauss;
pub(crate) mod gate;
pub(crate) mod lm;

pub use expgauss::{exp_gauss_gradient, exp_gauss_model, exp_gauss_term, ExpGaussTerm};
pub use gate::{effective_lifetime, effective_lifetime_of_curve, gate_histogram, Estimate, GateSpec, GatedHistogram};
pub use lm::Objective;

use crate::error::{Error, Result};
use crate::sim::{IrfSpec, TcspcHistogram, TimeGrid};
use lm::{Bounds, Model, Options};

const MIN_LIFETIME_NS: f64 = 1e-3;
const MAX_LIFETIME_NS: f64 = 1e3;

/// One exponential term: `amplitude·exp(−t/lifetime)` before the IRF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpComponent {
    pub amplitude: f64,
    pub lifetime_ns: f64,
}

impl ExpComponent {
    pub fn new(amplitude: f64, lifetime_ns: f64) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::Domain(format!("amplitude must be >= 0, got {amplitude}")));
        }
        if !(lifetime_ns > 0.0 && lifetime_ns.is_finite()) {
            return Err(Error::Domain(format!("lifetime must be > 0, got {lifetime_ns}")));
        }
        Ok(ExpComponent { amplitude, lifetime_ns })
    }
}

/// Parameters held fixed at their initial values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrozenMask {
    pub amplitudes: [bool; 2],
    pub lifetimes: [bool; 2],
    pub background: bool,
    pub t0: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitModelSpec {
    pub n_components: usize,
    /// Starting values; derived from the data when `None`.
    pub initial: Option<Vec<ExpComponent>>,
    /// `None` fits bare exponentials switched on at `t0` (which is then held fixed).
    pub irf: Option<IrfSpec>,
    pub background: Option<f64>,
    pub t0_ps: Option<f64>,
    pub frozen: FrozenMask,
    pub objective: Objective,
    pub max_iterations: usize,
    /// Inclusive bin range to fit; the whole histogram when `None`.
    pub window: Option<(usize, usize)>,
    /// Upper bound on the faster lifetime of a two-component model.
    pub fast_lifetime_max_ns: Option<f64>,
}

impl FitModelSpec {
    pub fn new(n_components: usize, irf: Option<IrfSpec>) -> Self {
        FitModelSpec {
            n_components,
            initial: None,
            irf,
            background: None,
            t0_ps: None,
            frozen: FrozenMask::default(),
            objective: Objective::PoissonMle,
            max_iterations: 500,
            window: None,
            fast_lifetime_max_ns: None,
        }
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }

    pub fn with_window(mut self, first: usize, last: usize) -> Self {
        self.window = Some((first, last));
        self
    }

    /// Holds the background fixed at `value`.
    pub fn with_fixed_background(mut self, value: f64) -> Self {
        self.background = Some(value);
        self.frozen.background = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.n_components) {
            return Err(Error::Usage(format!(
                "only 1 or 2 exponential components are supported, got {}",
                self.n_components
            )));
        }
        if let Some(init) = &self.initial {
            if init.len() != self.n_components {
                return Err(Error::Usage(format!(
                    "{} initial components given for a {}-component model",
                    init.len(),
                    self.n_components
                )));
            }
        }
        if let Some(m) = self.fast_lifetime_max_ns {
            if !(m > MIN_LIFETIME_NS && m <= MAX_LIFETIME_NS) {
                return Err(Error::Domain(format!("fast lifetime cap {m} ns is out of range")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::Usage("max_iterations must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedComponent {
    pub amplitude: f64,
    pub amplitude_sigma: f64,
    pub lifetime_ns: f64,
    pub lifetime_sigma_ns: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Sorted by ascending lifetime.
    pub components: Vec<FittedComponent>,
    pub background: f64,
    pub background_sigma: f64,
    pub t0_ps: f64,
    pub t0_sigma_ps: f64,
    pub objective: Objective,
    /// Reduced χ² for least squares, deviance for Poisson likelihood.
    pub goodness: f64,
    pub iterations: usize,
    pub converged: bool,
    pub window: (usize, usize),
    pub total_counts: f64,
}

impl FitResult {
    /// Expected counts of the fitted model in every bin of `grid`; `irf` must
    /// be the response the fit was made with.
    pub fn predicted(&self, grid: &TimeGrid, irf: Option<&IrfSpec>) -> Vec<f64> {
        let (sigma, shift) = irf.map_or((0.0, 0.0), |i| (i.sigma_ns(), i.center_ps * 1e-3));
        let t0 = self.t0_ps * 1e-3;
        (0..grid.n_bins)
            .map(|i| {
                let u = grid.center_ns(i) - t0 - shift;
                self.background
                    + self
                        .components
                        .iter()
                        .map(|c| c.amplitude * exp_gauss_term(u, c.lifetime_ns, sigma).value)
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn slowest(&self) -> &FittedComponent {
        self.components.last().expect("at least one component")
    }

    pub fn fastest(&self) -> &FittedComponent {
        &self.components[0]
    }
}

/// Sum of exponential ⊗ Gaussian terms plus a constant, parameterized as
/// `[a₁, ln τ₁, (a₂, ln τ₂,) background, t0]` with times in ns.
struct DecayModel {
    t: Vec<f64>,
    n_comp: usize,
    sigma_ns: f64,
    shift_ns: f64,
}

impl Model for DecayModel {
    fn n_params(&self) -> usize {
        2 * self.n_comp + 2
    }

    fn eval(&self, th: &[f64], mu: &mut [f64], jac: &mut [Vec<f64>]) {
        let bg = th[2 * self.n_comp];
        let t0 = th[2 * self.n_comp + 1];
        let taus: [f64; 2] = std::array::from_fn(|k| if k < self.n_comp { th[2 * k + 1].exp() } else { 0.0 });
        for (i, &t) in self.t.iter().enumerate() {
            let u = t - t0 - self.shift_ns;
            let mut m = bg;
            let mut d_t0 = 0.0;
            for k in 0..self.n_comp {
                let a = th[2 * k];
                let tau = taus[k];
                let term = exp_gauss_term(u, tau, self.sigma_ns);
                m += a * term.value;
                jac[2 * k][i] = term.value;
                jac[2 * k + 1][i] = a * tau * term.d_tau;
                d_t0 -= a * term.d_t;
            }
            mu[i] = m;
            jac[2 * self.n_comp][i] = 1.0;
            jac[2 * self.n_comp + 1][i] = d_t0;
        }
    }
}

/// Fits `spec` to a photon-counting histogram.
pub fn fit_decay(h: &TcspcHistogram, spec: &FitModelSpec) -> Result<FitResult> {
    fit_series(&h.grid, &h.counts_f64(), spec)
}

/// Weighted linear regression of `ln(y)` on `t` with weights `y`.
fn log_linear(t: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let (mut sw, mut st, mut sl, mut stt, mut stl) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut n = 0;
    for (&ti, &yi) in t.iter().zip(y) {
        if yi <= 0.5 {
            continue;
        }
        let l = yi.ln();
        sw += yi;
        st += yi * ti;
        sl += yi * l;
        stt += yi * ti * ti;
        stl += yi * ti * l;
        n += 1;
    }
    if n < 2 {
        return None;
    }
    let den = sw * stt - st * st;
    if den.abs() < 1e-300 {
        return None;
    }
    let slope = (sw * stl - st * sl) / den;
    let intercept = (sl - slope * st) / sw;
    (slope < 0.0).then_some((slope, intercept))
}

struct Guess {
    components: Vec<ExpComponent>,
    background: f64,
    t0_ns: f64,
}

/// Deterministic starting values: t0 from the first crossing of half maximum, lifetimes
/// from log-linear regression on an early and a late part of the decay,
/// amplitudes from the peak height.
fn initial_guess(t: &[f64], y: &[f64], n_comp: usize, sigma_ns: f64, bw_ns: f64) -> Guess {
    let n = y.len();
    // peak and rising edge are located on a boxcar-smoothed copy so that
    // sparse histograms do not latch onto a single noisy bin
    let half_w = ((sigma_ns / bw_ns).ceil() as usize).max(1).min(n / 2);
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let (lo, hi) = (i.saturating_sub(half_w), (i + half_w + 1).min(n));
            y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let p = (0..n).fold(0, |best, i| if smooth[i] > smooth[best] { i } else { best });
    let peak = if half_w > 1 { smooth[p] } else { y[p] };
    let y_edge = if half_w > 1 { &smooth } else { y };
    let quiet_before = t[p] - 5.0 * sigma_ns - 1.0;
    let pre: Vec<f64> = (0..p).filter(|&i| t[i] < quiet_before).map(|i| y[i]).collect();
    let background = if pre.len() >= 5 {
        pre.iter().sum::<f64>() / pre.len() as f64
    } else {
        0.0
    };
    let height = (peak - background).max(1.0);

    let t0_ns = if sigma_ns > 0.0 {
        let half = background + 0.5 * height;
        let j = (0..=p).find(|&i| y_edge[i] >= half).unwrap_or(p);
        if j == 0 {
            t[0]
        } else {
            let (ya, yb) = (y_edge[j - 1], y_edge[j]);
            let frac = if yb > ya { (half - ya) / (yb - ya) } else { 0.5 };
            t[j - 1] + frac * (t[j] - t[j - 1])
        }
    } else {
        t[p] - 0.5 * bw_ns
    };

    let mut end = n - 1;
    for i in p + 1..n {
        let hi = (i + 5).min(n);
        let avg = y[i..hi].iter().sum::<f64>() / (hi - i) as f64;
        if avg - background < 0.01 * height {
            end = i;
            break;
        }
    }
    let start = (p + (2.0 * sigma_ns / bw_ns).ceil() as usize).min(n - 1);
    let end = end.max((start + 4).min(n - 1));
    let net: Vec<f64> = y.iter().map(|v| v - background).collect();
    let clamp_tau = |tau: f64| tau.clamp(0.005, 500.0);

    let single = |from: usize, to: usize| -> Option<(f64, f64)> {
        let (slope, icpt) = log_linear(&t[from..=to], &net[from..=to])?;
        Some((clamp_tau(-1.0 / slope), (icpt + slope * t0_ns).exp()))
    };

    let components = if n_comp == 1 {
        let (tau, a) = single(start, end).unwrap_or((2.0, height));
        vec![ExpComponent {
            amplitude: a.min(10.0 * height),
            lifetime_ns: tau,
        }]
    } else {
        let mid = start + (end - start) / 2;
        let (tau_s, a_s) = single(mid, end).unwrap_or((2.0, 0.3 * height));
        let early_end = (start + ((end - start) / 5).max(3)).min(end);
        let resid: Vec<f64> = (start..=early_end)
            .map(|i| net[i] - a_s * (-(t[i] - t0_ns) / tau_s).exp())
            .collect();
        let fast = log_linear(&t[start..=early_end], &resid)
            .map(|(slope, icpt)| (clamp_tau(-1.0 / slope), (icpt + slope * t0_ns).exp()))
            .filter(|(tau_f, _)| *tau_f < 0.5 * tau_s);
        let (tau_f, a_f) = fast.unwrap_or((tau_s / 10.0, (height - a_s).max(0.1 * height)));
        vec![
            ExpComponent {
                amplitude: a_f.min(10.0 * height),
                lifetime_ns: tau_f,
            },
            ExpComponent {
                amplitude: a_s.min(10.0 * height),
                lifetime_ns: tau_s,
            },
        ]
    };
    Guess {
        components,
        background,
        t0_ns,
    }
}

/// Fits real-valued data on `grid` (histogram counts or a scaled model curve).
pub(crate) fn fit_series(grid: &TimeGrid, data: &[f64], spec: &FitModelSpec) -> Result<FitResult> {
    spec.validate()?;
    if data.len() != grid.n_bins {
        return Err(Error::Usage("data length does not match the time grid".into()));
    }
    let (first, last) = spec.window.unwrap_or((0, grid.n_bins - 1));
    if first > last || last >= grid.n_bins {
        return Err(Error::Usage(format!(
            "fit window [{first}, {last}] is outside the {}-bin histogram",
            grid.n_bins
        )));
    }
    let y = &data[first..=last];
    let t: Vec<f64> = (first..=last).map(|i| grid.center_ns(i)).collect();
    let nonzero = y.iter().filter(|&&v| v > 0.0).count();
    let total: f64 = y.iter().sum();
    if nonzero < 10 || total < 100.0 {
        return Err(Error::Precondition(format!(
            "fit needs at least 10 non-empty bins and 100 counts, got {nonzero} bins and {total} counts"
        )));
    }

    let nc = spec.n_components;
    let sigma_ns = spec.irf.map_or(0.0, |i| i.sigma_ns());
    let shift_ns = spec.irf.map_or(0.0, |i| i.center_ps * 1e-3);
    let guess = initial_guess(&t, y, nc, sigma_ns, grid.bin_width_ns());
    let mut components = spec.initial.clone().unwrap_or(guess.components);
    let fast_cap = spec.fast_lifetime_max_ns.filter(|_| nc == 2);
    if let Some(cap) = fast_cap {
        components[0].lifetime_ns = components[0].lifetime_ns.min(0.5 * cap);
        components[1].lifetime_ns = components[1].lifetime_ns.max(cap);
    }
    let background = spec.background.unwrap_or(guess.background);
    let t0 = spec.t0_ps.map_or(guess.t0_ns, |v| v * 1e-3);

    let mut theta = Vec::with_capacity(2 * nc + 2);
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut free = Vec::new();
    for (k, c) in components.iter().enumerate() {
        theta.push(c.amplitude);
        theta.push(c.lifetime_ns.clamp(MIN_LIFETIME_NS, MAX_LIFETIME_NS).ln());
        let tau_max = if k == 0 {
            fast_cap.unwrap_or(MAX_LIFETIME_NS)
        } else {
            MAX_LIFETIME_NS
        };
        lower.extend([0.0, MIN_LIFETIME_NS.ln()]);
        upper.extend([f64::INFINITY, tau_max.ln()]);
        free.extend([!spec.frozen.amplitudes[k], !spec.frozen.lifetimes[k]]);
    }
    theta.push(background.max(0.0));
    lower.push(0.0);
    upper.push(f64::INFINITY);
    free.push(!spec.frozen.background);
    theta.push(t0);
    lower.push(t[0] - 10.0);
    upper.push(t[t.len() - 1]);
    free.push(!spec.frozen.t0 && spec.irf.is_some());

    let model = DecayModel {
        t,
        n_comp: nc,
        sigma_ns,
        shift_ns,
    };
    let bounds = Bounds { lower, upper, free };
    let opts = Options {
        max_iterations: spec.max_iterations,
        ..Options::default()
    };
    let out = lm::minimize(&model, y, &theta, &bounds, spec.objective, &opts);

    let mut comps: Vec<FittedComponent> = (0..nc)
        .map(|k| {
            let tau = out.theta[2 * k + 1].exp();
            FittedComponent {
                amplitude: out.theta[2 * k],
                amplitude_sigma: out.sigma[2 * k],
                lifetime_ns: tau,
                lifetime_sigma_ns: tau * out.sigma[2 * k + 1],
            }
        })
        .collect();
    comps.sort_by(|a, b| a.lifetime_ns.total_cmp(&b.lifetime_ns));
    let n_free = bounds.free.iter().filter(|&&f| f).count() as f64;
    let goodness = match spec.objective {
        Objective::PoissonMle => out.objective,
        _ => out.objective / (out.n_points as f64 - n_free).max(1.0),
    };
    Ok(FitResult {
        components: comps,
        background: out.theta[2 * nc],
        background_sigma: out.sigma[2 * nc],
        t0_ps: out.theta[2 * nc + 1] * 1e3,
        t0_sigma_ps: out.sigma[2 * nc + 1] * 1e3,
        objective: spec.objective,
        goodness,
        iterations: out.iterations,
        converged: out.converged,
        window: (first, last),
        total_counts: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{compose_signal, mono_exponential, sample_histogram, SignalComposition};

    fn irf() -> IrfSpec {
        IrfSpec::measured_setup()
    }

    fn bi_exp_histogram(photons: f64, seed: u64) -> TcspcHistogram {
        let grid = TimeGrid::tcspc_default();
        let donor = mono_exponential(&grid, 5.1).unwrap();
        let comp = SignalComposition {
            acceptor_lifetime_ns: 0.42,
            ..SignalComposition::on_flake()
        };
        let model = compose_signal(&donor, &comp, &irf()).unwrap();
        sample_histogram(&model, photons, seed).unwrap()
    }

    #[test]
    fn single_component_round_trip() {
        let grid = TimeGrid::tcspc_default();
        let model = crate::sim::irf_convolve(&mono_exponential(&grid, 12.0).unwrap(), &irf()).unwrap();
        let h = sample_histogram(&model, 1e5, 3).unwrap();
        let r = fit_decay(&h, &FitModelSpec::new(1, Some(irf()))).unwrap();
        assert!(r.converged);
        let tau = r.components[0].lifetime_ns;
        assert!((tau - 12.0).abs() / 12.0 < 0.02, "{tau} {r:?}");
        assert!(r.components[0].lifetime_sigma_ns > 0.0);
        assert!(r.t0_ps.abs() < 30.0, "{}", r.t0_ps);
    }

    #[test]
    fn two_component_round_trip_sorted() {
        let h = bi_exp_histogram(1e5, 11);
        for obj in [Objective::PoissonMle, Objective::WeightedLeastSquares] {
            let r = fit_decay(&h, &FitModelSpec::new(2, Some(irf())).with_objective(obj)).unwrap();
            assert!(r.converged, "{obj:?}");
            let fast = r.components[0].lifetime_ns;
            let slow = r.components[1].lifetime_ns;
            assert!(fast < slow);
            assert!((fast - 0.42).abs() / 0.42 < 0.05, "{obj:?} fast {fast}");
            assert!((slow - 5.1).abs() / 5.1 < 0.05, "{obj:?} slow {slow}");
        }
    }

    #[test]
    fn single_spike_is_rejected() {
        let grid = TimeGrid::tcspc_default();
        let mut counts = vec![0; grid.n_bins];
        counts[200] = 10_000;
        let h = TcspcHistogram::new(grid, counts).unwrap();
        assert!(matches!(
            fit_decay(&h, &FitModelSpec::new(1, Some(irf()))),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn three_components_are_unsupported() {
        let h = bi_exp_histogram(1e4, 1);
        assert!(matches!(
            fit_decay(&h, &FitModelSpec::new(3, Some(irf()))),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn frozen_lifetime_stays_put() {
        let h = bi_exp_histogram(1e5, 5);
        let mut spec = FitModelSpec::new(1, Some(irf()));
        spec.initial = Some(vec![ExpComponent::new(100.0, 4.0).unwrap()]);
        spec.frozen.lifetimes[0] = true;
        let r = fit_decay(&h, &spec).unwrap();
        assert_eq!(r.components[0].lifetime_ns, 4.0);
        assert_eq!(r.components[0].lifetime_sigma_ns, 0.0);
    }

    #[test]
    fn background_is_recovered() {
        let grid = TimeGrid::tcspc_default();
        let donor = mono_exponential(&grid, 3.0).unwrap();
        let comp = SignalComposition {
            background_rate: 0.01,
            ..SignalComposition::donor_only()
        };
        let model = compose_signal(&donor, &comp, &irf()).unwrap();
        let sum: f64 = model.values.iter().sum();
        let h = sample_histogram(&model, 2e5, 2).unwrap();
        let r = fit_decay(&h, &FitModelSpec::new(1, Some(irf()))).unwrap();
        let expected_bg = 0.01 / sum * 2e5;
        assert!(
            (r.background - expected_bg).abs() < 4.0 * r.background_sigma,
            "{} vs {expected_bg}",
            r.background
        );
        assert!((r.components[0].lifetime_ns - 3.0).abs() < 0.05);
    }
}
