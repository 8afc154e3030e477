//! `fretsim` command-line front end.

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fit::{effective_lifetime, fit_decay, FitModelSpec, FitResult, Objective};
use crate::flim::{
    edge_profile, empirical_min_photons, fit_flim_cube, photon_budget, EdgeLine, EdgeSignal, FlimCube, LifetimeMap,
    MinPhotonsSpec, PixelClass, MIN_COUNTS_FLOOR,
};
use crate::inversion::{invert_radius, sig6, tau_eff_curve, RadiusCurve};
use crate::plot;
use crate::sim::{
    compose_signal, ensemble_decay, sample_histogram, simulate_flim_cube, SignalComposition, TcspcHistogram,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "fretsim",
    version,
    about = "Energy-transfer lifetime simulation and FLIM analysis"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides `simulation.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `output.directory`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Skip SVG output.
    #[arg(long, global = true)]
    pub no_plots: bool,
    /// Print the effective configuration as TOML and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ObjectiveArg {
    Mle,
    Wls,
    Ls,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Mle => Objective::PoissonMle,
            ObjectiveArg::Wls => Objective::WeightedLeastSquares,
            ObjectiveArg::Ls => Objective::LeastSquares,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EdgeSignalArg {
    MeanArrival,
    TauSlow,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one TCSPC histogram of the donor ensemble.
    SimulateDecay {
        /// Overrides `simulation.photons`.
        #[arg(long)]
        photons: Option<f64>,
        /// Overrides `model.foerster_radius_nm`.
        #[arg(long)]
        radius: Option<f64>,
        /// Leave out the acceptor emission.
        #[arg(long)]
        donor_only: bool,
    },
    /// Fit exponential components to a histogram CSV.
    FitDecay {
        histogram: PathBuf,
        #[arg(long, default_value_t = 2)]
        components: usize,
        #[arg(long, value_enum, default_value_t = ObjectiveArg::Mle)]
        objective: ObjectiveArg,
        /// Mono-exponential fit of the gated tail instead.
        #[arg(long)]
        gated: bool,
        /// Fit plain exponentials without the instrument response.
        #[arg(long)]
        no_irf: bool,
    },
    /// Tabulate the effective lifetime against Förster radius.
    TauCurve,
    /// Infer the Förster radius from an effective lifetime.
    InvertRadius {
        tau_eff_ns: f64,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        /// Calibration CSV; computed from the configuration when absent.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Render a synthetic FLIM cube of the configured scene.
    SimulateFlim,
    /// Fit every pixel of a FLIM cube into a lifetime map.
    FitFlim {
        cube: PathBuf,
        #[arg(long, default_value_t = MIN_COUNTS_FLOOR)]
        min_counts: u64,
    },
    /// Fit a blurred step across a flake edge in a lifetime map.
    Edge {
        map: PathBuf,
        /// Start pixel as `row,col`.
        #[arg(long, value_parser = parse_point)]
        start: (f64, f64),
        /// End pixel as `row,col`.
        #[arg(long, value_parser = parse_point)]
        end: (f64, f64),
        #[arg(long, default_value_t = 1)]
        halfwidth: usize,
        /// Pixel pitch of the map; the configured scene's by default.
        #[arg(long)]
        pixel_size_nm: Option<f64>,
        #[arg(long, value_enum, default_value_t = EdgeSignalArg::MeanArrival)]
        signal: EdgeSignalArg,
    },
    /// Dwell time per pixel for a photon target at a count rate.
    Budget { count_rate_cps: f64, photons: f64 },
    /// Monte Carlo search for the photons needed to reach a lifetime precision.
    MinPhotons {
        #[arg(long, default_value_t = 12.0)]
        tau_ns: f64,
        /// Relative standard deviation to reach.
        #[arg(long, default_value_t = 0.01)]
        target: f64,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
}

fn parse_point(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `row,col`")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("bad coordinate `{v}`"));
    Ok((p(a)?, p(b)?))
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    plots: bool,
}

impl Ctx {
    fn path(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))?;
        Ok(self.out.join(name))
    }

    fn plot(&self, name: &str, draw: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        if self.plots {
            draw(&self.path(name)?)?;
        }
        Ok(())
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs one invocation and returns what goes to stdout.
pub fn run(cli: Cli) -> Result<String> {
    let g = cli.global;
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.simulation.seed = seed;
    }
    if let Some(out) = g.out {
        cfg.output.directory = out;
    }
    if g.dump_config {
        return Ok(cfg.to_toml());
    }
    let command = cli
        .command
        .ok_or_else(|| Error::Usage("no command given; see --help".into()))?;
    let ctx = Ctx {
        out: cfg.output.directory.clone(),
        plots: !g.no_plots,
        cfg,
    };
    match g.threads {
        Some(0) => Err(Error::Usage("--threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Usage(format!("could not start {n} threads: {e}")))?
            .install(|| dispatch(&ctx, command)),
        None => dispatch(&ctx, command),
    }
}

fn dispatch(ctx: &Ctx, command: Command) -> Result<String> {
    match command {
        Command::SimulateDecay {
            photons,
            radius,
            donor_only,
        } => simulate_decay(ctx, photons, radius, donor_only),
        Command::FitDecay {
            histogram,
            components,
            objective,
            gated,
            no_irf,
        } => fit_decay_cmd(ctx, &histogram, components, objective.into(), gated, no_irf),
        Command::TauCurve => tau_curve_cmd(ctx),
        Command::InvertRadius {
            tau_eff_ns,
            sigma,
            curve,
        } => invert_cmd(ctx, tau_eff_ns, sigma, curve.as_deref()),
        Command::SimulateFlim => simulate_flim_cmd(ctx),
        Command::FitFlim { cube, min_counts } => fit_flim_cmd(ctx, &cube, min_counts),
        Command::Edge {
            map,
            start,
            end,
            halfwidth,
            pixel_size_nm,
            signal,
        } => edge_cmd(ctx, &map, EdgeLine { start, end }, halfwidth, pixel_size_nm, signal),
        Command::Budget {
            count_rate_cps,
            photons,
        } => {
            let s = photon_budget(count_rate_cps, photons)?;
            Ok(format!("{:.2} ms\n", s * 1e3))
        }
        Command::MinPhotons { tau_ns, target, trials } => {
            let cfg = &ctx.cfg;
            let spec = MinPhotonsSpec {
                tau_true_ns: tau_ns,
                irf: cfg.irf()?,
                grid: cfg.grid()?,
                target_rel_error: target,
                trials,
                seed: cfg.simulation.seed,
            };
            let r = empirical_min_photons(&spec)?;
            let mut s = String::from("photons,rel_std\n");
            for rung in &r.ladder {
                let _ = writeln!(s, "{},{}", rung.photons, rung.rel_std.map(sig6).unwrap_or_default());
            }
            write(&ctx.path("min_photons.csv")?, &s)?;
            Ok(format!(
                "minimum photons: {} (relative spread {:.4})\n",
                r.photons, r.rel_std
            ))
        }
    }
}

fn simulate_decay(ctx: &Ctx, photons: Option<f64>, radius: Option<f64>, donor_only: bool) -> Result<String> {
    let cfg = &ctx.cfg;
    let mut p = cfg.params()?;
    if let Some(r) = radius {
        p = p.with_radius(r);
        p.validate()?;
    }
    let grid = cfg.grid()?;
    let irf = cfg.irf()?;
    let comp = if donor_only {
        SignalComposition {
            acceptor_weight: 0.0,
            ..cfg.composition()
        }
    } else {
        cfg.composition()
    };
    let curve = compose_signal(&ensemble_decay(&p, &cfg.depth()?, &grid)?, &comp, &irf)?;
    let photons = photons.unwrap_or(cfg.simulation.photons);
    let h = sample_histogram(&curve, photons, cfg.simulation.seed)?;
    let csv = ctx.path("decay.csv")?;
    h.write_csv(&csv)?;
    let eff = effective_lifetime(&h, &cfg.gate()?, None)?;
    let scale = h.total() as f64 / curve.values.iter().sum::<f64>();
    let model: Vec<f64> = curve.values.iter().map(|v| v * scale).collect();
    ctx.plot("decay.svg", |path| plot::decay_plot(path, &h, Some(&model)))?;
    Ok(format!(
        "wrote {} ({} photons)\ngated effective lifetime: {:.3} ± {:.3} ns\n",
        csv.display(),
        h.total(),
        eff.value,
        eff.sigma
    ))
}

fn fit_report(r: &FitResult) -> (String, String) {
    let mut text = String::new();
    let mut csv = String::from("parameter,value,sigma\n");
    for (k, c) in r.components.iter().enumerate() {
        let _ = writeln!(
            text,
            "component {}: lifetime {:.4} ± {:.4} ns, amplitude {:.4} ± {:.4}",
            k + 1,
            c.lifetime_ns,
            c.lifetime_sigma_ns,
            c.amplitude,
            c.amplitude_sigma
        );
        let _ = writeln!(
            csv,
            "lifetime_{}_ns,{},{}",
            k + 1,
            sig6(c.lifetime_ns),
            sig6(c.lifetime_sigma_ns)
        );
        let _ = writeln!(
            csv,
            "amplitude_{},{},{}",
            k + 1,
            sig6(c.amplitude),
            sig6(c.amplitude_sigma)
        );
    }
    let _ = writeln!(
        text,
        "background {:.4} ± {:.4} counts/bin",
        r.background, r.background_sigma
    );
    let _ = writeln!(text, "t0 {:.1} ± {:.1} ps", r.t0_ps, r.t0_sigma_ps);
    let _ = writeln!(
        text,
        "goodness {:.4} after {} iterations (converged: {})",
        r.goodness, r.iterations, r.converged
    );
    let _ = writeln!(csv, "background,{},{}", sig6(r.background), sig6(r.background_sigma));
    let _ = writeln!(csv, "t0_ps,{},{}", sig6(r.t0_ps), sig6(r.t0_sigma_ps));
    let _ = writeln!(csv, "goodness,{},", sig6(r.goodness));
    (text, csv)
}

fn fit_decay_cmd(
    ctx: &Ctx,
    path: &Path,
    components: usize,
    objective: Objective,
    gated: bool,
    no_irf: bool,
) -> Result<String> {
    let h = TcspcHistogram::read_csv(path)?;
    let irf = (!no_irf).then(|| ctx.cfg.irf()).transpose()?;
    if gated {
        let e = effective_lifetime(&h, &ctx.cfg.gate()?, irf.as_ref())?;
        write(
            &ctx.path("fit.csv")?,
            &format!(
                "parameter,value,sigma\ntau_eff_ns,{},{}\n",
                sig6(e.value),
                sig6(e.sigma)
            ),
        )?;
        return Ok(format!(
            "gated effective lifetime: {:.4} ± {:.4} ns\n",
            e.value, e.sigma
        ));
    }
    let spec = FitModelSpec::new(components, irf).with_objective(objective);
    spec.validate()?;
    let r = fit_decay(&h, &spec)?;
    let (text, csv) = fit_report(&r);
    write(&ctx.path("fit.csv")?, &csv)?;
    let model = r.predicted(&h.grid, irf.as_ref());
    ctx.plot("fit.svg", |p| plot::decay_plot(p, &h, Some(&model)))?;
    Ok(text)
}

fn tau_curve_cmd(ctx: &Ctx) -> Result<String> {
    let c = &ctx.cfg.curve;
    let curve = tau_eff_curve(c.r_min_nm, c.r_max_nm, c.points, &ctx.cfg.curve_settings()?)?;
    let csv = ctx.path("tau_curve.csv")?;
    curve.write_csv(&csv)?;
    ctx.plot("tau_curve.svg", |p| plot::curve_plot(p, &curve, None))?;
    let (lo, hi) = curve.tau_range();
    Ok(format!("wrote {} (τ_eff from {lo:.3} to {hi:.3} ns)\n", csv.display()))
}

fn invert_cmd(ctx: &Ctx, tau: f64, sigma: f64, curve_path: Option<&Path>) -> Result<String> {
    let curve = match curve_path {
        Some(p) => RadiusCurve::read_csv(p)?,
        None => {
            let c = &ctx.cfg.curve;
            tau_eff_curve(c.r_min_nm, c.r_max_nm, c.points, &ctx.cfg.curve_settings()?)?
        }
    };
    let r = invert_radius(tau, sigma, &curve)?;
    ctx.plot("inversion.svg", |p| plot::curve_plot(p, &curve, Some((r.value, tau))))?;
    Ok(format!("R = {:.2} ± {:.2} nm\n", r.value, r.sigma))
}

fn simulate_flim_cmd(ctx: &Ctx) -> Result<String> {
    let cfg = &ctx.cfg;
    let scene = cfg.scene()?;
    let cube = simulate_flim_cube(
        &scene,
        &cfg.params()?,
        &cfg.depth()?,
        &cfg.irf()?,
        &cfg.grid()?,
        cfg.simulation.seed,
    )?;
    let stem = ctx.path("cube")?;
    cube.write(&stem)?;
    Ok(format!(
        "wrote {}.meta and {}.bin ({} x {} pixels)\n",
        stem.display(),
        stem.display(),
        cube.height_px,
        cube.width_px
    ))
}

fn fit_flim_cmd(ctx: &Ctx, path: &Path, min_counts: u64) -> Result<String> {
    let cube = FlimCube::read(path)?;
    let map = fit_flim_cube(&cube, &ctx.cfg.gate()?, &ctx.cfg.irf()?, min_counts)?;
    let csv = ctx.path("map.csv")?;
    map.write_csv(&csv)?;
    let mean = |class| {
        let v: Vec<f64> = map
            .records
            .iter()
            .filter(|r| r.class == class)
            .filter_map(|r| r.tau_slow.map(|e| e.value))
            .collect();
        (v.len(), v.iter().sum::<f64>() / v.len().max(1) as f64)
    };
    let (n_on, t_on) = mean(PixelClass::OnFlake);
    let (n_off, t_off) = mean(PixelClass::OffFlake);
    let bulk = ctx.cfg.model.bulk_lifetime_ns;
    ctx.plot("map.svg", |p| plot::map_plot(p, &map, (0.0, bulk * 1.1)))?;
    Ok(format!(
        "wrote {}\non-flake: {n_on} pixels, mean τ_slow {t_on:.3} ns\noff-flake: {n_off} pixels, mean τ {t_off:.3} ns\nlow-signal: {} pixels\n",
        csv.display(),
        map.count(PixelClass::LowSignal)
    ))
}

fn edge_cmd(
    ctx: &Ctx,
    path: &Path,
    line: EdgeLine,
    halfwidth: usize,
    pixel_size_nm: Option<f64>,
    signal: EdgeSignalArg,
) -> Result<String> {
    let px = match pixel_size_nm {
        Some(v) => v,
        None => ctx.cfg.scene()?.pixel_size_nm,
    };
    let map = LifetimeMap::read_csv(path, px)?;
    let signal = match signal {
        EdgeSignalArg::MeanArrival => EdgeSignal::MeanArrival,
        EdgeSignalArg::TauSlow => EdgeSignal::TauSlow,
    };
    let e = edge_profile(&map, &line, halfwidth, signal)?;
    let mut csv = String::from("distance_nm,value_ns,fitted_ns\n");
    for (&(x, y), f) in e.samples.iter().zip(&e.fitted) {
        let _ = writeln!(csv, "{},{},{}", sig6(x), sig6(y), sig6(*f));
    }
    write(&ctx.path("edge.csv")?, &csv)?;
    ctx.plot("edge.svg", |p| plot::edge_plot(p, &e))?;
    Ok(format!(
        "edge at {:.1} ± {:.1} nm along the line\nPSF FWHM {:.1} ± {:.1} nm\nplateaus {:.3} ns -> {:.3} ns\n",
        e.edge_position_nm.value,
        e.edge_position_nm.sigma,
        e.psf_fwhm_nm.value,
        e.psf_fwhm_nm.sigma,
        e.plateau_start_ns.value,
        e.plateau_end_ns.value
    ))
}
