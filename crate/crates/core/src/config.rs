//! TOML run configuration shared by all command-line pipelines.
//!
//! Every key inside a section is required and unknown keys are rejected.
//! `[depth]` and `[scene]` may be left out; the depth window then follows
//! the model's default truncation and FLIM commands refuse to run.

use crate::error::{Error, Result};
use crate::fit::GateSpec;
use crate::inversion::CurveSettings;
use crate::model::{DepthDistribution, DistanceExponent, ModelParams};
use crate::sim::{FlimScene, IrfSpec, Polygon, SignalComposition, TimeGrid};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<DepthSection>,
    pub grid: GridSection,
    pub irf: IrfSection,
    pub gate: GateSection,
    pub signal: CompositionSection,
    pub simulation: SimulationSection,
    pub curve: CurveSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneSection>,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub foerster_radius_nm: f64,
    pub bulk_lifetime_ns: f64,
    /// 4 (acceptor sheet) or 6 (point acceptor).
    pub distance_exponent: u32,
    pub depth_mean_nm: f64,
    pub depth_sigma_nm: f64,
    pub unquenched_intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthSection {
    pub z_min_nm: f64,
    pub z_max_nm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub bin_width_ps: f64,
    pub n_bins: usize,
    pub origin_ps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrfSection {
    pub fwhm_ps: f64,
    pub center_ps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSection {
    pub head_cut_ns: f64,
    pub tail_threshold_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositionSection {
    pub donor_weight: f64,
    pub acceptor_weight: f64,
    pub background_rate: f64,
    pub acceptor_lifetime_ns: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    /// Expected photons per simulated decay histogram.
    pub photons: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSection {
    pub r_min_nm: f64,
    pub r_max_nm: f64,
    pub points: usize,
    pub fit_with_irf: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    pub width_px: usize,
    pub height_px: usize,
    pub pixel_size_nm: f64,
    pub psf_fwhm_nm: f64,
    pub photons_per_pixel: f64,
    /// Flake outlines as `[x, y]` vertices in nm.
    pub flakes: Vec<Polygon>,
    pub on_flake: CompositionSection,
    pub off_flake: CompositionSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
}

impl From<SignalComposition> for CompositionSection {
    fn from(c: SignalComposition) -> Self {
        CompositionSection {
            donor_weight: c.donor_weight,
            acceptor_weight: c.acceptor_weight,
            background_rate: c.background_rate,
            acceptor_lifetime_ns: c.acceptor_lifetime_ns,
        }
    }
}

impl From<CompositionSection> for SignalComposition {
    fn from(c: CompositionSection) -> Self {
        SignalComposition {
            donor_weight: c.donor_weight,
            acceptor_weight: c.acceptor_weight,
            background_rate: c.background_rate,
            acceptor_lifetime_ns: c.acceptor_lifetime_ns,
        }
    }
}

fn in_section<T>(section: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config(_) => e,
        other => Error::Config(format!("[{section}] {other}")),
    })
}

impl SceneSection {
    /// 48 × 48 pixels of 100 nm holding one triangular flake of 3.6 µm side,
    /// 620 nm PSF, 10⁴ photons per pixel.
    pub fn triangle() -> Self {
        SceneSection {
            width_px: 48,
            height_px: 48,
            pixel_size_nm: 100.0,
            psf_fwhm_nm: 620.0,
            photons_per_pixel: 1e4,
            flakes: vec![vec![[600.0, 4200.0], [4200.0, 4200.0], [2400.0, 1082.0]]],
            on_flake: SignalComposition::on_flake().into(),
            off_flake: SignalComposition::donor_only().into(),
        }
    }
}

impl Default for RunConfig {
    /// Parameters of the NV/WSe₂ measurement with the triangle test scene.
    fn default() -> Self {
        let p = ModelParams::nv_wse2();
        let g = TimeGrid::tcspc_default();
        let irf = IrfSpec::measured_setup();
        let gate = GateSpec::default();
        RunConfig {
            model: ModelSection {
                foerster_radius_nm: p.foerster_radius_nm,
                bulk_lifetime_ns: p.bulk_lifetime_ns,
                distance_exponent: p.distance_exponent.power() as u32,
                depth_mean_nm: p.depth_mean_nm,
                depth_sigma_nm: p.depth_sigma_nm,
                unquenched_intensity: p.unquenched_intensity,
            },
            depth: None,
            grid: GridSection {
                bin_width_ps: g.bin_width_ps,
                n_bins: g.n_bins,
                origin_ps: g.origin_ps,
            },
            irf: IrfSection {
                fwhm_ps: irf.fwhm_ps,
                center_ps: irf.center_ps,
            },
            gate: GateSection {
                head_cut_ns: gate.head_cut_ns,
                tail_threshold_fraction: gate.tail_threshold_fraction,
            },
            signal: SignalComposition::on_flake().into(),
            simulation: SimulationSection { photons: 1e6, seed: 1 },
            curve: CurveSection {
                r_min_nm: crate::inversion::DEFAULT_R_MIN_NM,
                r_max_nm: crate::inversion::DEFAULT_R_MAX_NM,
                points: crate::inversion::DEFAULT_POINTS,
                fit_with_irf: false,
            },
            scene: Some(SceneSection::triangle()),
            output: OutputSection {
                directory: PathBuf::from("out"),
            },
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Re-checks every section against the invariants of the types it builds.
    pub fn validate(&self) -> Result<()> {
        self.depth()?;
        self.grid()?;
        self.irf()?;
        self.gate()?;
        in_section("signal", SignalComposition::from(self.signal).validate())?;
        let s = &self.simulation;
        if !(s.photons > 0.0 && s.photons.is_finite()) {
            return Err(Error::Config("[simulation] photons must be > 0".into()));
        }
        let c = &self.curve;
        if !(c.r_min_nm > 0.0 && c.r_min_nm < c.r_max_nm && c.r_max_nm.is_finite()) || c.points < 2 {
            return Err(Error::Config(
                "[curve] need 0 < r_min_nm < r_max_nm and points >= 2".into(),
            ));
        }
        if self.scene.is_some() {
            self.scene()?;
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams> {
        let m = &self.model;
        let p = ModelParams {
            foerster_radius_nm: m.foerster_radius_nm,
            bulk_lifetime_ns: m.bulk_lifetime_ns,
            distance_exponent: in_section("model", DistanceExponent::try_from(m.distance_exponent))?,
            depth_mean_nm: m.depth_mean_nm,
            depth_sigma_nm: m.depth_sigma_nm,
            unquenched_intensity: m.unquenched_intensity,
        };
        in_section("model", p.validate())?;
        Ok(p)
    }

    pub fn depth(&self) -> Result<DepthDistribution> {
        let p = self.params()?;
        match self.depth {
            None => in_section("model", p.depth_distribution()),
            Some(w) => in_section(
                "depth",
                DepthDistribution::with_window(p.depth_mean_nm, p.depth_sigma_nm, w.z_min_nm, w.z_max_nm),
            ),
        }
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        let g = self.grid;
        in_section("grid", TimeGrid::new(g.bin_width_ps, g.n_bins, g.origin_ps))
    }

    pub fn irf(&self) -> Result<IrfSpec> {
        in_section("irf", IrfSpec::new(self.irf.fwhm_ps, self.irf.center_ps))
    }

    pub fn gate(&self) -> Result<GateSpec> {
        let g = GateSpec {
            head_cut_ns: self.gate.head_cut_ns,
            tail_threshold_fraction: self.gate.tail_threshold_fraction,
        };
        in_section("gate", g.validate())?;
        Ok(g)
    }

    pub fn composition(&self) -> SignalComposition {
        self.signal.into()
    }

    pub fn curve_settings(&self) -> Result<CurveSettings> {
        Ok(CurveSettings {
            params: self.params()?,
            depth: self.depth()?,
            gate: self.gate()?,
            grid: self.grid()?,
            irf: self.irf()?,
            fit_with_irf: self.curve.fit_with_irf,
        })
    }

    pub fn scene(&self) -> Result<FlimScene> {
        let s = self
            .scene
            .as_ref()
            .ok_or_else(|| Error::Config("missing section `scene`".into()))?;
        let scene = FlimScene {
            width_px: s.width_px,
            height_px: s.height_px,
            pixel_size_nm: s.pixel_size_nm,
            flakes: s.flakes.clone(),
            on_flake: s.on_flake.into(),
            off_flake: s.off_flake.into(),
            psf_fwhm_nm: s.psf_fwhm_nm,
            photons_per_pixel: s.photons_per_pixel,
        };
        in_section("scene", scene.validate())?;
        Ok(scene)
    }
}
