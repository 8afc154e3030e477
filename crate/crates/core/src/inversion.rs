//! Calibration curve τ_eff(R) and its inverse.

use crate::error::{Error, Result};
use crate::fit::{effective_lifetime_of_curve, Estimate, GateSpec};
use crate::model::{DepthDistribution, ModelParams};
use crate::sim::{ensemble_decay, irf_convolve, IrfSpec, TimeGrid};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;

/// Everything except the radius that determines a calibration point.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSettings {
    /// The radius field is ignored.
    pub params: ModelParams,
    pub depth: DepthDistribution,
    pub gate: GateSpec,
    pub grid: TimeGrid,
    /// Response the simulated decays are blurred with.
    pub irf: IrfSpec,
    /// Include the IRF in the mono-exponential fit (plain exponential otherwise).
    pub fit_with_irf: bool,
}

impl CurveSettings {
    pub fn nv_wse2() -> Result<Self> {
        let params = ModelParams::nv_wse2();
        Ok(CurveSettings {
            depth: params.depth_distribution()?,
            params,
            gate: GateSpec::default(),
            grid: TimeGrid::tcspc_default(),
            irf: IrfSpec::measured_setup(),
            fit_with_irf: false,
        })
    }

    /// Noise-free effective lifetime at radius `r_nm`.
    pub fn tau_eff(&self, r_nm: f64) -> Result<Estimate> {
        let p = self.params.with_radius(r_nm);
        let decay = irf_convolve(&ensemble_decay(&p, &self.depth, &self.grid)?, &self.irf)?;
        let fit_irf = self.fit_with_irf.then_some(&self.irf);
        effective_lifetime_of_curve(&decay, &self.gate, fit_irf)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiusCurve {
    pub r_nm: Vec<f64>,
    pub tau_eff_ns: Vec<f64>,
    /// `None` for curves loaded from file.
    pub settings: Option<CurveSettings>,
}

pub const DEFAULT_R_MIN_NM: f64 = 5.0;
pub const DEFAULT_R_MAX_NM: f64 = 30.0;
pub const DEFAULT_POINTS: usize = 26;

/// Samples τ_eff on `n_points` radii spaced evenly over `[r_min, r_max]`.
pub fn tau_eff_curve(r_min_nm: f64, r_max_nm: f64, n_points: usize, s: &CurveSettings) -> Result<RadiusCurve> {
    if !(r_min_nm > 0.0 && r_max_nm > r_min_nm && r_max_nm.is_finite()) {
        return Err(Error::Domain(format!(
            "radius range must satisfy 0 < r_min < r_max, got [{r_min_nm}, {r_max_nm}]"
        )));
    }
    if n_points < 2 {
        return Err(Error::Domain(format!("need at least 2 curve points, got {n_points}")));
    }
    let step = (r_max_nm - r_min_nm) / (n_points - 1) as f64;
    let r_nm: Vec<f64> = (0..n_points).map(|i| r_min_nm + step * i as f64).collect();
    let tau_eff_ns = r_nm
        .par_iter()
        .map(|&r| s.tau_eff(r).map(|e| e.value))
        .collect::<Result<Vec<_>>>()?;
    let curve = RadiusCurve {
        r_nm,
        tau_eff_ns,
        settings: Some(s.clone()),
    };
    curve.check_monotone()?;
    Ok(curve)
}

impl RadiusCurve {
    pub fn check_monotone(&self) -> Result<()> {
        if self.r_nm.len() != self.tau_eff_ns.len() || self.r_nm.len() < 2 {
            return Err(Error::Format("radius curve needs at least 2 (R, τ) pairs".into()));
        }
        let bad_r: Vec<usize> = (1..self.r_nm.len())
            .filter(|&i| self.r_nm[i] <= self.r_nm[i - 1])
            .collect();
        if !bad_r.is_empty() {
            return Err(Error::Numerical(format!(
                "radius grid not strictly increasing at indices {bad_r:?}"
            )));
        }
        let bad_t: Vec<usize> = (1..self.tau_eff_ns.len())
            .filter(|&i| self.tau_eff_ns[i] >= self.tau_eff_ns[i - 1])
            .collect();
        if !bad_t.is_empty() {
            return Err(Error::Numerical(format!(
                "effective lifetime not strictly decreasing at indices {bad_t:?}"
            )));
        }
        Ok(())
    }

    pub fn tau_range(&self) -> (f64, f64) {
        (self.tau_eff_ns[self.tau_eff_ns.len() - 1], self.tau_eff_ns[0])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("r_nm,tau_eff_ns\n");
        for (r, t) in self.r_nm.iter().zip(&self.tau_eff_ns) {
            let _ = writeln!(s, "{},{}", sig6(*r), sig6(*t));
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some("r_nm,tau_eff_ns") => {}
            other => {
                return Err(Error::Format(format!(
                    "radius curve header must be `r_nm,tau_eff_ns`, got {other:?}"
                )))
            }
        }
        let (mut r_nm, mut tau_eff_ns) = (Vec::new(), Vec::new());
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Format(format!("radius curve line {}: `{line}`", n + 2));
            let (a, b) = line.split_once(',').ok_or_else(bad)?;
            r_nm.push(a.trim().parse::<f64>().map_err(|_| bad())?);
            tau_eff_ns.push(b.trim().parse::<f64>().map_err(|_| bad())?);
        }
        let curve = RadiusCurve {
            r_nm,
            tau_eff_ns,
            settings: None,
        };
        curve.check_monotone().map_err(|e| Error::Format(e.to_string()))?;
        Ok(curve)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// Six significant digits, shortest decimal form.
pub fn sig6(x: f64) -> String {
    let rounded: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    format!("{rounded}")
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    /// `x` strictly increasing.
    fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let h: Vec<f64> = (0..n - 1).map(|i| x[i + 1] - x[i]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Pchip { x, y, d }
    }

    /// Value and first derivative at `t` (inside the knot range).
    fn eval(&self, t: f64) -> (f64, f64) {
        let n = self.x.len();
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            k => (k - 1).min(n - 2),
        };
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (y0, y1, d0, d1) = (self.y[i], self.y[i + 1], self.d[i], self.d[i + 1]);
        let h00 = (1.0 + 2.0 * s) * (1.0 - s).powi(2);
        let h10 = s * (1.0 - s).powi(2);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        let dh00 = 6.0 * s * (s - 1.0) / h;
        let dh10 = (1.0 - s) * (1.0 - 3.0 * s);
        let dh01 = -dh00;
        let dh11 = s * (3.0 * s - 2.0);
        let slope = dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1;
        (value, slope)
    }
}

/// Three-point end derivative, limited to keep the interpolant monotone.
fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

/// Radius at which the curve reaches `tau_eff_ns`, with `sigma` propagated
/// through the local slope of the inverse map.
pub fn invert_radius(tau_eff_ns: f64, sigma_ns: f64, curve: &RadiusCurve) -> Result<Estimate> {
    curve.check_monotone()?;
    if !(sigma_ns >= 0.0) {
        return Err(Error::Domain(format!(
            "lifetime uncertainty must be >= 0, got {sigma_ns}"
        )));
    }
    let (min, max) = curve.tau_range();
    if !(tau_eff_ns >= min && tau_eff_ns <= max) {
        return Err(Error::Range {
            value: tau_eff_ns,
            min,
            max,
        });
    }
    // τ decreases along the R grid; interpolate R as a function of increasing τ
    let x: Vec<f64> = curve.tau_eff_ns.iter().rev().copied().collect();
    let y: Vec<f64> = curve.r_nm.iter().rev().copied().collect();
    let (r, slope) = Pchip::new(x, y).eval(tau_eff_ns);
    Ok(Estimate {
        value: r,
        sigma: slope.abs() * sigma_ns,
    })
}
