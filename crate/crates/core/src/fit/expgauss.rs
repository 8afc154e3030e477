//! Exponential decay convolved with a Gaussian instrument response.
//!
//! For amplitude `a`, lifetime `τ`, IRF width `σ` and shift `u = t − t0`:
//!
//! `f(t) = (a/2)·exp(σ²/(2τ²) − u/τ)·erfc(σ/(√2τ) − u/(√2σ))`
//!
//! Evaluated through `erfcx` where the exponential prefactor would overflow.

use crate::special::erfcx;
use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

use super::ExpComponent;
use crate::sim::IrfSpec;

/// Value and partial derivatives of a unit-amplitude component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpGaussTerm {
    pub value: f64,
    pub d_tau: f64,
    /// Derivative with respect to `t` (the negative of ∂/∂t0).
    pub d_t: f64,
}

/// Unit-amplitude exponential ⊗ Gaussian at `u = t − t0` (ns) with `sigma` in ns.
/// `sigma = 0` gives the bare exponential switched on at `u = 0`.
pub fn exp_gauss_term(u: f64, tau: f64, sigma: f64) -> ExpGaussTerm {
    if sigma <= 0.0 {
        if u < 0.0 {
            return ExpGaussTerm {
                value: 0.0,
                d_tau: 0.0,
                d_t: 0.0,
            };
        }
        let v = (-u / tau).exp();
        return ExpGaussTerm {
            value: v,
            d_tau: v * u / (tau * tau),
            d_t: -v / tau,
        };
    }
    let x = sigma / (SQRT_2 * tau) - u / (SQRT_2 * sigma);
    let gauss = (-0.5 * (u / sigma).powi(2)).exp() / ((2.0 * PI).sqrt() * sigma);
    let value = if x > 0.0 {
        0.5 * (-0.5 * (u / sigma).powi(2)).exp() * erfcx(x)
    } else {
        let e = (0.5 * (sigma / tau).powi(2) - u / tau).exp();
        // erfc(x) = 2 - erfc(-x); for x < -6 the correction is below 1e-17
        let c = if x < -6.0 { 2.0 } else { erfc(x) };
        0.5 * e * c
    };
    ExpGaussTerm {
        value,
        d_tau: value * (u / (tau * tau) - sigma * sigma / tau.powi(3)) + (sigma / tau).powi(2) * gauss,
        d_t: gauss - value / tau,
    }
}

/// Closed-form intensity at time `t_ns` of component `c` seen through `irf`,
/// with the excitation pulse at `t0_ns`. The IRF centre offset shifts the curve.
pub fn exp_gauss_model(t_ns: f64, c: &ExpComponent, irf: &IrfSpec, t0_ns: f64) -> f64 {
    let u = t_ns - t0_ns - irf.center_ps * 1e-3;
    c.amplitude * exp_gauss_term(u, c.lifetime_ns, irf.sigma_ns()).value
}

/// Analytic gradient of [`exp_gauss_model`] with respect to
/// `(amplitude, lifetime, t0)`.
pub fn exp_gauss_gradient(t_ns: f64, c: &ExpComponent, irf: &IrfSpec, t0_ns: f64) -> [f64; 3] {
    let u = t_ns - t0_ns - irf.center_ps * 1e-3;
    let term = exp_gauss_term(u, c.lifetime_ns, irf.sigma_ns());
    [term.value, c.amplitude * term.d_tau, -c.amplitude * term.d_t]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_irf_limit() {
        let c = ExpComponent::new(2.0, 3.0).unwrap();
        let irf = IrfSpec::new(1e-6, 0.0).unwrap();
        assert!((exp_gauss_model(1.5, &c, &irf, 0.5) - 2.0 * (-1.0f64 / 3.0).exp()).abs() < 1e-9);
        assert!(exp_gauss_model(0.4, &c, &irf, 0.5).abs() < 1e-12);
    }

    #[test]
    fn no_overflow_far_before_and_after_the_pulse() {
        let irf = IrfSpec::measured_setup();
        for tau in [0.01, 0.41, 12.0] {
            let c = ExpComponent::new(1.0, tau).unwrap();
            for t in [-50.0, -1.0, 0.0, 0.01, 5.0, 100.0, 1000.0] {
                let v = exp_gauss_model(t, &c, &irf, 0.0);
                assert!(v.is_finite() && v >= 0.0, "tau={tau} t={t}: {v}");
                let g = exp_gauss_gradient(t, &c, &irf, 0.0);
                assert!(g.iter().all(|x| x.is_finite()));
            }
        }
    }

    #[test]
    fn branches_agree_at_the_switch_point() {
        let sigma = 0.138;
        let tau = 0.5;
        // x = 0 at u = σ²/τ
        let u0 = sigma * sigma / tau;
        let a = exp_gauss_term(u0 - 1e-9, tau, sigma).value;
        let b = exp_gauss_term(u0 + 1e-9, tau, sigma).value;
        assert!((a - b).abs() < 1e-8);
    }
}
