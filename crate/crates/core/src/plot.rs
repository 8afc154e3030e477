//! SVG figures of decays, calibration curves, lifetime maps and edge profiles.
//!
//! Plots are for looking at; every plotted quantity is also written as CSV.

use crate::error::{Error, Result};
use crate::flim::{EdgeProfileResult, LifetimeMap, PixelClass};
use crate::inversion::RadiusCurve;
use crate::sim::TcspcHistogram;
use plotters::coord::Shift;
use plotters::prelude::*;
use std::path::Path;

const SIZE: (u32, u32) = (720, 480);

fn draw_err<E: std::fmt::Debug>(path: &Path) -> impl Fn(E) -> Error + '_ {
    move |e| Error::Numerical(format!("could not draw {}: {e:?}", path.display()))
}

fn canvas(path: &Path, size: (u32, u32)) -> Result<DrawingArea<SVGBackend<'_>, Shift>> {
    let root = SVGBackend::new(path, size).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err(path))?;
    Ok(root)
}

/// Semilog photon histogram in ns from the pulse, with an optional model
/// overlay of expected counts per bin.
pub fn decay_plot(path: impl AsRef<Path>, h: &TcspcHistogram, model: Option<&[f64]>) -> Result<()> {
    let path = path.as_ref();
    let err = draw_err(path);
    let root = canvas(path, SIZE)?;
    let t = h.grid.centers_ns();
    let peak = h.counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    let mut chart = ChartBuilder::on(&root)
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(t[0]..t[t.len() - 1], (0.5..peak * 2.0).log_scale())
        .map_err(&err)?;
    chart
        .configure_mesh()
        .x_desc("time after pulse (ns)")
        .y_desc("counts")
        .draw()
        .map_err(&err)?;
    chart
        .draw_series(
            t.iter()
                .zip(&h.counts)
                .filter(|(_, &c)| c > 0)
                .map(|(&x, &c)| Circle::new((x, c as f64), 1, BLUE.filled())),
        )
        .map_err(&err)?;
    if let Some(m) = model {
        chart
            .draw_series(LineSeries::new(
                t.iter().zip(m).filter(|(_, &v)| v >= 0.5).map(|(&x, &v)| (x, v)),
                RED.stroke_width(2),
            ))
            .map_err(&err)?;
    }
    root.present().map_err(&err)
}

/// τ_eff against radius, with an optional inverted point marked.
pub fn curve_plot(path: impl AsRef<Path>, curve: &RadiusCurve, mark: Option<(f64, f64)>) -> Result<()> {
    let path = path.as_ref();
    let err = draw_err(path);
    let root = canvas(path, SIZE)?;
    let (lo, hi) = curve.tau_range();
    let r0 = curve.r_nm[0];
    let r1 = curve.r_nm[curve.r_nm.len() - 1];
    let mut chart = ChartBuilder::on(&root)
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(r0..r1, (lo * 0.9)..(hi * 1.05))
        .map_err(&err)?;
    chart
        .configure_mesh()
        .x_desc("Förster radius (nm)")
        .y_desc("effective lifetime (ns)")
        .draw()
        .map_err(&err)?;
    let pts: Vec<(f64, f64)> = curve
        .r_nm
        .iter()
        .copied()
        .zip(curve.tau_eff_ns.iter().copied())
        .collect();
    chart
        .draw_series(LineSeries::new(pts.clone(), BLUE.stroke_width(2)))
        .map_err(&err)?;
    chart
        .draw_series(pts.into_iter().map(|p| Circle::new(p, 3, BLUE.filled())))
        .map_err(&err)?;
    if let Some(p) = mark {
        chart
            .draw_series(std::iter::once(Cross::new(p, 7, RED.stroke_width(2))))
            .map_err(&err)?;
    }
    root.present().map_err(&err)
}

/// Linear blue-to-yellow ramp; `f` in [0, 1].
fn ramp(f: f64) -> RGBColor {
    let f = f.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * f).round() as u8;
    RGBColor(lerp(40.0, 250.0), lerp(40.0, 220.0), lerp(140.0, 40.0))
}

/// τ_slow per pixel on a colour scale from `range` (ns); low-signal pixels are grey.
pub fn map_plot(path: impl AsRef<Path>, map: &LifetimeMap, range: (f64, f64)) -> Result<()> {
    let path = path.as_ref();
    let err = draw_err(path);
    let root = canvas(path, (640, 560))?;
    let (plot, bar) = root.split_horizontally(540);
    let (w, h) = (map.width_px as i32, map.height_px as i32);
    let mut chart = ChartBuilder::on(&plot)
        .margin(12)
        .x_label_area_size(30)
        .y_label_area_size(40)
        .build_cartesian_2d(0..w, h..0)
        .map_err(&err)?;
    chart
        .configure_mesh()
        .disable_mesh()
        .x_desc("column")
        .y_desc("row")
        .draw()
        .map_err(&err)?;
    let span = (range.1 - range.0).max(f64::EPSILON);
    chart
        .draw_series((0..map.records.len()).map(|i| {
            let (r, c) = ((i / map.width_px) as i32, (i % map.width_px) as i32);
            let rec = &map.records[i];
            let color = match (rec.class, rec.tau_slow) {
                (PixelClass::LowSignal, _) | (_, None) => RGBColor(160, 160, 160),
                (_, Some(t)) => ramp((t.value - range.0) / span),
            };
            Rectangle::new([(c, r), (c + 1, r + 1)], color.filled())
        }))
        .map_err(&err)?;

    let mut scale = ChartBuilder::on(&bar)
        .margin(12)
        .margin_left(4)
        .y_label_area_size(40)
        .x_label_area_size(30)
        .build_cartesian_2d(0.0..1.0, range.0..range.1)
        .map_err(&err)?;
    scale
        .configure_mesh()
        .disable_mesh()
        .disable_x_axis()
        .y_desc("τ (ns)")
        .draw()
        .map_err(&err)?;
    let steps = 64;
    scale
        .draw_series((0..steps).map(|k| {
            let a = range.0 + span * k as f64 / steps as f64;
            let b = range.0 + span * (k + 1) as f64 / steps as f64;
            Rectangle::new([(0.0, a), (1.0, b)], ramp((k as f64 + 0.5) / steps as f64).filled())
        }))
        .map_err(&err)?;
    root.present().map_err(&err)
}

/// Sampled profile across an edge with the fitted step.
pub fn edge_plot(path: impl AsRef<Path>, edge: &EdgeProfileResult) -> Result<()> {
    let path = path.as_ref();
    let err = draw_err(path);
    let root = canvas(path, SIZE)?;
    let xs: Vec<f64> = edge.samples.iter().map(|s| s.0).collect();
    let ys = edge.samples.iter().map(|s| s.1).chain(edge.fitted.iter().copied());
    let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let pad = 0.05 * (hi - lo).max(1e-3);
    let mut chart = ChartBuilder::on(&root)
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(xs[0]..xs[xs.len() - 1], (lo - pad)..(hi + pad))
        .map_err(&err)?;
    chart
        .configure_mesh()
        .x_desc("distance along line (nm)")
        .y_desc("lifetime (ns)")
        .draw()
        .map_err(&err)?;
    chart
        .draw_series(edge.samples.iter().map(|&p| Circle::new(p, 3, BLUE.filled())))
        .map_err(&err)?;
    chart
        .draw_series(LineSeries::new(
            xs.iter().copied().zip(edge.fitted.iter().copied()),
            RED.stroke_width(2),
        ))
        .map_err(&err)?;
    root.present().map_err(&err)
}
