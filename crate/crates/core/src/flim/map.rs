use super::FlimCube;
use crate::error::{Error, Result};
use crate::fit::{fit_decay, gate::gate_range, Estimate, FitModelSpec, FitResult, GateSpec};
use crate::sim::{IrfSpec, TcspcHistogram};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelClass {
    OnFlake,
    OffFlake,
    LowSignal,
}

impl PixelClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PixelClass::OnFlake => "on-flake",
            PixelClass::OffFlake => "off-flake",
            PixelClass::LowSignal => "low-signal",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "on-flake" => Some(PixelClass::OnFlake),
            "off-flake" => Some(PixelClass::OffFlake),
            "low-signal" => Some(PixelClass::LowSignal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelRecord {
    pub class: PixelClass,
    /// Donor lifetime; absent for low-signal pixels.
    pub tau_slow: Option<Estimate>,
    /// Acceptor lifetime; on-flake pixels only.
    pub tau_fast: Option<Estimate>,
    pub amplitude_slow: Option<f64>,
    pub amplitude_fast: Option<f64>,
    /// First-moment lifetime: mean photon arrival time after the IRF centre.
    pub tau_mean_ns: Option<f64>,
    pub counts: u64,
    pub goodness: Option<f64>,
}

impl PixelRecord {
    fn low_signal(counts: u64) -> Self {
        PixelRecord {
            class: PixelClass::LowSignal,
            tau_slow: None,
            tau_fast: None,
            amplitude_slow: None,
            amplitude_fast: None,
            tau_mean_ns: None,
            counts,
            goodness: None,
        }
    }
}

/// Per-pixel lifetimes, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LifetimeMap {
    pub width_px: usize,
    pub height_px: usize,
    pub pixel_size_nm: f64,
    pub records: Vec<PixelRecord>,
}

pub const MIN_COUNTS_FLOOR: u64 = 100;

fn estimate(value: f64, sigma: f64) -> Estimate {
    Estimate { value, sigma }
}

/// Start of the first-moment window, relative to the pulse. Earlier bins hold
/// the wrapped-around tail of the previous period.
const MOMENT_START_NS: f64 = -1.0;

/// Mean arrival time over a window that is the same for every pixel, so the
/// value of a mixed pixel is the photon-weighted mean of its sources.
pub(crate) fn mean_arrival_ns(h: &TcspcHistogram, irf: &IrfSpec) -> Option<f64> {
    let (mut n, mut sum) = (0.0, 0.0);
    for (i, &c) in h.counts.iter().enumerate() {
        let t = h.grid.center_ns(i);
        if t >= MOMENT_START_NS {
            n += c as f64;
            sum += c as f64 * t;
        }
    }
    (n > 0.0).then(|| sum / n - irf.center_ps * 1e-3)
}

fn classify(h: &TcspcHistogram, gate: &GateSpec, irf: &IrfSpec) -> Result<PixelRecord> {
    let counts = h.total();
    let tau_mean_ns = mean_arrival_ns(h, irf);
    // fit up to where the decay sinks below the tail threshold
    let values = h.counts_f64();
    let window = gate_range(&values, &h.grid, gate)
        .map(|r| (0, r.end))
        .unwrap_or((0, h.grid.n_bins - 1));
    // the fast component is the part the gate's head cut discards
    let mut bi_spec = FitModelSpec::new(2, Some(*irf)).with_window(window.0, window.1);
    bi_spec.fast_lifetime_max_ns = Some(gate.head_cut_ns.max(0.1));
    let bi = fit_decay(h, &bi_spec);
    let bi = match bi {
        Ok(r) => r,
        Err(Error::Precondition(_)) => return Ok(PixelRecord::low_signal(counts)),
        Err(e) => return Err(e),
    };
    let fast = bi.fastest();
    // a fast lifetime parked on its cap was never resolved, and its amplitude
    // σ then ignores the lifetime's own uncertainty
    let cap = bi_spec.fast_lifetime_max_ns.unwrap_or(f64::INFINITY);
    let resolved = fast.lifetime_ns < cap * (1.0 - 1e-6);
    let significant =
        bi.converged && resolved && fast.amplitude_sigma.is_finite() && fast.amplitude > 2.0 * fast.amplitude_sigma;
    if significant {
        let slow = bi.slowest();
        return Ok(PixelRecord {
            class: PixelClass::OnFlake,
            tau_slow: Some(estimate(slow.lifetime_ns, slow.lifetime_sigma_ns)),
            tau_fast: Some(estimate(fast.lifetime_ns, fast.lifetime_sigma_ns)),
            amplitude_slow: Some(slow.amplitude),
            amplitude_fast: Some(fast.amplitude),
            tau_mean_ns,
            counts,
            goodness: Some(bi.goodness),
        });
    }
    let mono: FitResult = fit_decay(h, &FitModelSpec::new(1, Some(*irf)).with_window(window.0, window.1))?;
    let c = mono.components[0];
    Ok(PixelRecord {
        class: PixelClass::OffFlake,
        tau_slow: Some(estimate(c.lifetime_ns, c.lifetime_sigma_ns)),
        tau_fast: None,
        amplitude_slow: Some(c.amplitude),
        amplitude_fast: None,
        tau_mean_ns,
        counts,
        goodness: Some(mono.goodness),
    })
}

/// Fits every pixel: low-signal below `min_counts`, otherwise bi-exponential
/// with a mono-exponential refit when the fast amplitude is below 2σ.
pub fn fit_flim_cube(cube: &FlimCube, gate: &GateSpec, irf: &IrfSpec, min_counts: u64) -> Result<LifetimeMap> {
    cube.validate()?;
    gate.validate()?;
    if min_counts < MIN_COUNTS_FLOOR {
        return Err(Error::Usage(format!(
            "min_counts must be >= {MIN_COUNTS_FLOOR}, got {min_counts}"
        )));
    }
    let n = cube.width_px * cube.height_px;
    let records = (0..n)
        .into_par_iter()
        .map(|idx| {
            let h = cube.pixel_histogram(idx / cube.width_px, idx % cube.width_px);
            let counts = h.total();
            if counts < min_counts {
                Ok(PixelRecord::low_signal(counts))
            } else {
                classify(&h, gate, irf)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LifetimeMap {
        width_px: cube.width_px,
        height_px: cube.height_px,
        pixel_size_nm: cube.pixel_size_nm,
        records,
    })
}

const CSV_HEADER: &str =
    "row,col,class,tau_slow_ns,tau_slow_sigma,tau_fast_ns,tau_fast_sigma,counts,goodness,tau_mean_ns";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl LifetimeMap {
    pub fn get(&self, row: usize, col: usize) -> &PixelRecord {
        &self.records[row * self.width_px + col]
    }

    pub fn count(&self, class: PixelClass) -> usize {
        self.records.iter().filter(|r| r.class == class).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.records.len() * 80);
        s.push_str(CSV_HEADER);
        s.push('\n');
        for (i, r) in self.records.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                i / self.width_px,
                i % self.width_px,
                r.class.as_str(),
                opt(r.tau_slow.map(|e| e.value)),
                opt(r.tau_slow.map(|e| e.sigma)),
                opt(r.tau_fast.map(|e| e.value)),
                opt(r.tau_fast.map(|e| e.sigma)),
                r.counts,
                opt(r.goodness),
                opt(r.tau_mean_ns),
            );
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Parses the CSV form; amplitudes are not stored there and come back empty.
    pub fn from_csv(text: &str, pixel_size_nm: f64) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(CSV_HEADER) {
            return Err(Error::Format(format!("lifetime map header must be `{CSV_HEADER}`")));
        }
        let mut cells = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Format(format!("lifetime map line {}: {what}", n + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 10 {
                return Err(bad("expected 10 fields"));
            }
            let num = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| bad(&format!("bad number `{s}`")))
                }
            };
            let pair = |v: Option<f64>, s: Option<f64>| v.map(|v| estimate(v, s.unwrap_or(f64::NAN)));
            let row: usize = f[0].parse().map_err(|_| bad("bad row"))?;
            let col: usize = f[1].parse().map_err(|_| bad("bad col"))?;
            let class = PixelClass::parse(f[2]).ok_or_else(|| bad(&format!("unknown class `{}`", f[2])))?;
            let rec = PixelRecord {
                class,
                tau_slow: pair(num(f[3])?, num(f[4])?),
                tau_fast: pair(num(f[5])?, num(f[6])?),
                amplitude_slow: None,
                amplitude_fast: None,
                tau_mean_ns: num(f[9])?,
                counts: f[7].parse().map_err(|_| bad("bad counts"))?,
                goodness: num(f[8])?,
            };
            cells.push((row, col, rec));
        }
        let height_px = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
        let width_px = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
        if cells.len() != width_px * height_px || cells.is_empty() {
            return Err(Error::Format(format!(
                "lifetime map has {} records for a {height_px}×{width_px} grid",
                cells.len()
            )));
        }
        let mut records = vec![None; cells.len()];
        for (row, col, rec) in cells {
            let slot = &mut records[row * width_px + col];
            if slot.is_some() {
                return Err(Error::Format(format!("duplicate pixel ({row}, {col})")));
            }
            *slot = Some(rec);
        }
        Ok(LifetimeMap {
            width_px,
            height_px,
            pixel_size_nm,
            records: records.into_iter().map(|r| r.expect("all slots filled")).collect(),
        })
    }

    pub fn read_csv(path: impl AsRef<Path>, pixel_size_nm: f64) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, pixel_size_nm)
    }
}
