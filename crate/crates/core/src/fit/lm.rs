//! Bounded Levenberg-Marquardt minimizer for Poisson deviance and weighted
//! least squares, written in iteratively-reweighted form.
//!
//! Each iteration linearizes the model, `μ(θ+δ) ≈ μ + Jδ`, and solves
//! `(H + λ·diag H)·δ = b` with `H = Jᵀ V⁻¹ J`, `b = Jᵀ V⁻¹ (y − μ)`. The
//! variance `V` is `μ` for Poisson deviance (Fisher scoring), `max(y, 1)` for
//! Neyman-weighted least squares and 1 for plain least squares.

use nalgebra::{DMatrix, DVector};

const MU_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    PoissonMle,
    WeightedLeastSquares,
    /// Unweighted residuals; covariance is scaled by the residual variance.
    LeastSquares,
}

impl Objective {
    pub(crate) fn value(self, y: &[f64], mu: &[f64]) -> f64 {
        match self {
            Objective::PoissonMle => {
                let mut d = 0.0;
                for (&yi, &mi) in y.iter().zip(mu) {
                    if yi > 0.0 {
                        // floored so a start with empty model bins under data stays finite
                        let mi = mi.max(MU_FLOOR);
                        d += mi - yi + yi * (yi / mi).ln();
                    } else {
                        d += mi;
                    }
                }
                2.0 * d
            }
            Objective::WeightedLeastSquares => y.iter().zip(mu).map(|(&yi, &mi)| (yi - mi).powi(2) / yi.max(1.0)).sum(),
            Objective::LeastSquares => y.iter().zip(mu).map(|(&yi, &mi)| (yi - mi).powi(2)).sum(),
        }
    }

    fn variance(self, y: f64, mu: f64) -> f64 {
        match self {
            Objective::PoissonMle => mu.max(MU_FLOOR),
            Objective::WeightedLeastSquares => y.max(1.0),
            Objective::LeastSquares => 1.0,
        }
    }
}

/// Model evaluation: fills `mu[i]` and the Jacobian `jac[p][i] = ∂μᵢ/∂θₚ`.
pub(crate) trait Model {
    fn n_params(&self) -> usize;
    fn eval(&self, theta: &[f64], mu: &mut [f64], jac: &mut [Vec<f64>]);
}

#[derive(Debug, Clone)]
pub(crate) struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub free: Vec<bool>,
}

#[derive(Debug, Clone)]
pub(crate) struct Options {
    pub max_iterations: usize,
    pub xtol: f64,
    pub ftol: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            max_iterations: 500,
            xtol: 1e-8,
            ftol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub theta: Vec<f64>,
    /// 1σ per parameter; 0 for frozen ones, infinite where unidentifiable.
    pub sigma: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n_points: usize,
}

struct Workspace {
    mu: Vec<f64>,
    jac: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(n_params: usize, n: usize) -> Self {
        Workspace {
            mu: vec![0.0; n],
            jac: vec![vec![0.0; n]; n_params],
        }
    }
}

fn normal_equations(y: &[f64], ws: &Workspace, idx: &[usize], objective: Objective) -> (DMatrix<f64>, DVector<f64>) {
    let k = idx.len();
    let mut h = DMatrix::zeros(k, k);
    let mut b = DVector::zeros(k);
    for (i, &yi) in y.iter().enumerate() {
        let w = 1.0 / objective.variance(yi, ws.mu[i]);
        let r = yi - ws.mu[i];
        for (a, &pa) in idx.iter().enumerate() {
            let ja = ws.jac[pa][i] * w;
            if ja == 0.0 {
                continue;
            }
            b[a] += ja * r;
            for (c, &pc) in idx.iter().enumerate().skip(a) {
                h[(a, c)] += ja * ws.jac[pc][i];
            }
        }
    }
    for a in 0..k {
        for c in 0..a {
            h[(a, c)] = h[(c, a)];
        }
    }
    (h, b)
}

fn solve_damped(h: &DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let mut a = h.clone();
    let scale = h.diagonal().iter().cloned().fold(0.0, f64::max).max(1e-300);
    for i in 0..a.nrows() {
        a[(i, i)] += lambda * h[(i, i)].max(1e-12 * scale);
    }
    a.cholesky().map(|c| c.solve(b))
}

pub(crate) fn minimize<M: Model>(
    model: &M,
    y: &[f64],
    theta0: &[f64],
    bounds: &Bounds,
    objective: Objective,
    opts: &Options,
) -> Outcome {
    let np = model.n_params();
    let n = y.len();
    let clamp = |j: usize, v: f64| v.max(bounds.lower[j]).min(bounds.upper[j]);
    let mut theta: Vec<f64> = (0..np).map(|j| clamp(j, theta0[j])).collect();
    let mut ws = Workspace::new(np, n);
    let mut trial = Workspace::new(np, n);
    model.eval(&theta, &mut ws.mu, &mut ws.jac);
    let mut f = objective.value(y, &ws.mu);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let free: Vec<usize> = (0..np).filter(|&j| bounds.free[j]).collect();

    'outer: while iterations < opts.max_iterations {
        iterations += 1;
        loop {
            // drop parameters pinned at a bound whose step would push outward
            let mut active = free.clone();
            let step = loop {
                let (h, b) = normal_equations(y, &ws, &active, objective);
                let Some(delta) = solve_damped(&h, &b, lambda) else {
                    break None;
                };
                let pinned: Vec<usize> = active
                    .iter()
                    .enumerate()
                    .filter(|&(a, &j)| {
                        (theta[j] <= bounds.lower[j] && delta[a] < 0.0)
                            || (theta[j] >= bounds.upper[j] && delta[a] > 0.0)
                    })
                    .map(|(_, &j)| j)
                    .collect();
                if pinned.is_empty() || pinned.len() == active.len() {
                    let pred = delta.dot(&b);
                    break Some((active.clone(), delta, pred));
                }
                active.retain(|j| !pinned.contains(j));
            };
            let Some((active, delta, predicted)) = step else {
                lambda *= 10.0;
                if lambda > 1e16 {
                    break 'outer;
                }
                continue;
            };
            let mut next = theta.clone();
            for (a, &j) in active.iter().enumerate() {
                next[j] = clamp(j, theta[j] + delta[a]);
            }
            model.eval(&next, &mut trial.mu, &mut trial.jac);
            let f_next = objective.value(y, &trial.mu);
            if f_next.is_finite() && f_next <= f {
                let rel_x = active
                    .iter()
                    .map(|&j| (next[j] - theta[j]).abs() / theta[j].abs().max(1e-12))
                    .fold(0.0, f64::max);
                let rel_f = (f - f_next) / f.abs().max(1.0);
                theta = next;
                std::mem::swap(&mut ws, &mut trial);
                f = f_next;
                // heavily damped steps are short by construction, so alone
                // they only count when nothing moves at all (roundoff floor)
                let undamped = lambda < 1.0;
                lambda = (lambda * 0.1).max(1e-12);
                let stalled = rel_x < opts.xtol && rel_f < opts.ftol;
                if f.is_finite() && (stalled || (undamped && (rel_x < opts.xtol || rel_f < opts.ftol))) {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // no step reduces the objective: accept as a minimum only when
                // the undamped model also predicts no meaningful decrease
                converged = f.is_finite() && predicted.abs() <= 1e-8 * f.abs().max(1.0);
                break 'outer;
            }
        }
    }

    let sigma = covariance_sigma(y, &ws, &free, objective, f, np);
    Outcome {
        theta,
        sigma,
        objective: f,
        iterations,
        converged,
        n_points: n,
    }
}

/// 1σ from the inverse curvature matrix. Parameters whose Jacobian column
/// vanishes are unidentifiable and get an infinite σ.
fn covariance_sigma(y: &[f64], ws: &Workspace, free: &[usize], objective: Objective, f: f64, np: usize) -> Vec<f64> {
    let mut sigma = vec![0.0; np];
    let (h_all, _) = normal_equations(y, ws, free, objective);
    let max_diag = h_all.diagonal().iter().cloned().fold(0.0, f64::max);
    let mut keep = Vec::new();
    for (a, &j) in free.iter().enumerate() {
        if h_all[(a, a)] > 1e-14 * max_diag && h_all[(a, a)] > 0.0 {
            keep.push(j);
        } else {
            sigma[j] = f64::INFINITY;
        }
    }
    if keep.is_empty() {
        return sigma;
    }
    let (h, _) = normal_equations(y, ws, &keep, objective);
    let d: Vec<f64> = (0..keep.len()).map(|a| h[(a, a)].sqrt()).collect();
    let scaled = DMatrix::from_fn(keep.len(), keep.len(), |a, c| h[(a, c)] / (d[a] * d[c]));
    let inv = match scaled.clone().cholesky() {
        Some(ch) => Some(ch.inverse()),
        None => scaled.pseudo_inverse(1e-12).ok(),
    };
    let dof = (y.len() as f64 - keep.len() as f64).max(1.0);
    let scale = match objective {
        Objective::LeastSquares => f / dof,
        _ => 1.0,
    };
    for (a, &j) in keep.iter().enumerate() {
        sigma[j] = match &inv {
            Some(m) if m[(a, a)] > 0.0 => (m[(a, a)] * scale).sqrt() / d[a],
            _ => f64::INFINITY,
        };
    }
    sigma
}
