use super::{
    compose_signal, ensemble_decay, sample_histogram_with_rng, DecayCurve, IrfSpec, SignalComposition, TimeGrid,
};
use crate::error::{Error, Result};
use crate::flim::FlimCube;
use crate::model::{DepthDistribution, ModelParams};
use crate::special::{fwhm_to_sigma, normal_cdf};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Closed outline in image coordinates (nm): `x` along columns, `y` along rows.
pub type Polygon = Vec<[f64; 2]>;

/// Sub-pixel raster resolution used to rasterize flake outlines.
const SUBSAMPLE: usize = 8;

/// Synthetic field of view: acceptor flakes on a uniform donor layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FlimScene {
    pub width_px: usize,
    pub height_px: usize,
    pub pixel_size_nm: f64,
    pub flakes: Vec<Polygon>,
    pub on_flake: SignalComposition,
    pub off_flake: SignalComposition,
    pub psf_fwhm_nm: f64,
    pub photons_per_pixel: f64,
}

impl FlimScene {
    pub fn validate(&self) -> Result<()> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err(Error::Usage("scene has no pixels".into()));
        }
        if !(self.pixel_size_nm > 0.0 && self.pixel_size_nm.is_finite()) {
            return Err(Error::Domain("pixel_size_nm must be > 0".into()));
        }
        if !(self.psf_fwhm_nm >= 0.0 && self.psf_fwhm_nm.is_finite()) {
            return Err(Error::Domain("psf_fwhm_nm must be >= 0".into()));
        }
        if !(self.photons_per_pixel > 0.0 && self.photons_per_pixel.is_finite()) {
            return Err(Error::Domain("photons_per_pixel must be > 0".into()));
        }
        self.on_flake.validate()?;
        self.off_flake.validate()?;
        let (w, h) = self.extent_nm();
        for (k, poly) in self.flakes.iter().enumerate() {
            if poly.len() < 3 {
                return Err(Error::Usage(format!("flake {k} has fewer than 3 vertices")));
            }
            for &[x, y] in poly {
                if !(0.0..=w).contains(&x) || !(0.0..=h).contains(&y) {
                    return Err(Error::Usage(format!(
                        "flake {k} vertex ({x}, {y}) lies outside the {w} x {h} nm field"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn extent_nm(&self) -> (f64, f64) {
        (
            self.width_px as f64 * self.pixel_size_nm,
            self.height_px as f64 * self.pixel_size_nm,
        )
    }
}

fn inside(poly: &Polygon, x: f64, y: f64) -> bool {
    let mut c = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let [xi, yi] = poly[i];
        let [xj, yj] = poly[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            c = !c;
        }
        j = i;
    }
    c
}

/// Per-bin weights of a unit Gaussian integrated over consecutive intervals
/// of width `step` starting at `0`, for a point at `centre`.
fn interval_weights(n: usize, step: f64, centre: f64, sigma: f64) -> (usize, Vec<f64>) {
    let reach = 8.0 * sigma;
    let lo = (((centre - reach) / step).floor().max(0.0)) as usize;
    let hi = (((centre + reach) / step).ceil().max(0.0) as usize).min(n);
    let w = (lo..hi)
        .map(|k| normal_cdf(((k + 1) as f64 * step - centre) / sigma) - normal_cdf((k as f64 * step - centre) / sigma))
        .collect();
    (lo, w)
}

/// Fraction of each pixel's detection spot covered by flakes: the flake mask
/// blurred by a Gaussian PSF and read at the pixel centre (or the area
/// coverage of the pixel when the PSF width is zero). Row-major.
pub fn coverage_map(scene: &FlimScene) -> Result<Vec<f64>> {
    scene.validate()?;
    let (w, h) = (scene.width_px, scene.height_px);
    let (fw, fh) = (w * SUBSAMPLE, h * SUBSAMPLE);
    let step = scene.pixel_size_nm / SUBSAMPLE as f64;
    let mask: Vec<f64> = (0..fh)
        .into_par_iter()
        .flat_map_iter(|b| {
            let y = (b as f64 + 0.5) * step;
            (0..fw).map(move |a| {
                let x = (a as f64 + 0.5) * step;
                if scene.flakes.iter().any(|p| inside(p, x, y)) {
                    1.0
                } else {
                    0.0
                }
            })
        })
        .collect();

    let sigma = fwhm_to_sigma(scene.psf_fwhm_nm);
    let centre = |i: usize| (i as f64 + 0.5) * scene.pixel_size_nm;
    let out = if sigma == 0.0 {
        let area = (SUBSAMPLE * SUBSAMPLE) as f64;
        (0..h * w)
            .map(|idx| {
                let (r, c) = (idx / w, idx % w);
                let mut acc = 0.0;
                for b in r * SUBSAMPLE..(r + 1) * SUBSAMPLE {
                    for a in c * SUBSAMPLE..(c + 1) * SUBSAMPLE {
                        acc += mask[b * fw + a];
                    }
                }
                acc / area
            })
            .collect()
    } else {
        // separable blur: along x for every fine row, then along y
        let col_w: Vec<_> = (0..w).map(|c| interval_weights(fw, step, centre(c), sigma)).collect();
        let row_w: Vec<_> = (0..h).map(|r| interval_weights(fh, step, centre(r), sigma)).collect();
        let partial: Vec<f64> = (0..fh)
            .into_par_iter()
            .flat_map_iter(|b| {
                let row = &mask[b * fw..(b + 1) * fw];
                col_w
                    .iter()
                    .map(move |(lo, ws)| ws.iter().enumerate().map(|(k, wk)| wk * row[lo + k]).sum::<f64>())
            })
            .collect();
        (0..h * w)
            .map(|idx| {
                let (r, c) = (idx / w, idx % w);
                let (lo, ws) = &row_w[r];
                ws.iter()
                    .enumerate()
                    .map(|(k, wk)| wk * partial[(lo + k) * w + c])
                    .sum::<f64>()
            })
            .collect()
    };
    Ok(out)
}

/// Renders a synthetic FLIM acquisition of `scene`.
///
/// Each pixel's expected decay is the coverage-weighted mix of the on-flake
/// signal (quenched donor ensemble plus acceptor) and the off-flake signal
/// (unquenched donors), scaled to `photons_per_pixel` and sampled with a
/// ChaCha8 stream selected by the pixel index, so results do not depend on
/// the number of worker threads.
pub fn simulate_flim_cube(
    scene: &FlimScene,
    p: &ModelParams,
    d: &DepthDistribution,
    irf: &IrfSpec,
    grid: &TimeGrid,
    seed: u64,
) -> Result<FlimCube> {
    scene.validate()?;
    let quenched = ensemble_decay(p, d, grid)?;
    let bulk = ensemble_decay(&p.with_radius(0.0), d, grid)?;
    let on = compose_signal(&quenched, &scene.on_flake, irf)?;
    let off = compose_signal(&bulk, &scene.off_flake, irf)?;
    let coverage = coverage_map(scene)?;

    let nb = grid.n_bins;
    let mut counts = vec![0u32; coverage.len() * nb];
    counts
        .par_chunks_mut(nb)
        .zip(coverage.par_iter())
        .enumerate()
        .try_for_each(|(idx, (slot, &f))| -> Result<()> {
            let mixed = DecayCurve::weighted_sum(&[(f, &on), (1.0 - f, &off)])?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64);
            let h = sample_histogram_with_rng(&mixed, scene.photons_per_pixel, &mut rng)?;
            slot.copy_from_slice(&h.counts);
            Ok(())
        })?;

    Ok(FlimCube {
        width_px: scene.width_px,
        height_px: scene.height_px,
        grid: *grid,
        counts,
        pixel_size_nm: scene.pixel_size_nm,
        seed: Some(seed),
        photons_per_pixel: Some(scene.photons_per_pixel),
    })
}
