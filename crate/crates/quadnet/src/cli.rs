//! Command-line driver.
//!
//! Every subcommand writes one table, as CSV or as a JSON array of objects
//! with the same fields. Rows follow grid order. Diagnostics go to stderr.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use quadnet_core::state_evolution::{
    singular_value_density, sweep_alpha, Branch, CurvePoint, SeError, SolverConfig, SweepMode,
};
use quadnet_core::thresholds::{
    interpolation_threshold, interpolation_threshold_noiseless, strong_recovery_threshold,
};
use quadnet_core::{JEvaluator, ModelParams};
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::SensingMode;
use crate::experiment::{run_simulation, GdSettings, RunResult, RunSpec, Solver};
use crate::observe::mean_std;

/// Smallest dimension accepted by the simulators.
pub const MIN_SIM_DIM: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        1
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "quadnet", version, about = "Learning curves, thresholds and spectra of quadratic networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads for grid points and seeds.
    #[arg(long, global = true, env = "QUADNET_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Asymptotic learning curve along an α grid.
    Curve(RunArgs),
    /// Interpolation and perfect-recovery thresholds over κ* and Δ grids.
    Thresholds(RunArgs),
    /// Asymptotic singular-value density of the minimizer.
    Spectrum(RunArgs),
    /// Finite-size runs, one row per (α, d, seed).
    Simulate(RunArgs),
    /// Theory next to simulation statistics, one row per (α, d).
    Compare(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Regularized,
    Interpolator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Gamp,
    Prox,
    Gd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SensingArg {
    Gaussian,
    Goe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Sample ratios n/d²: `lo:hi:step` or a comma-separated list.
    #[arg(long)]
    pub alpha_grid: Option<String>,
    /// Target width ratio m*/d; a grid for `thresholds`.
    #[arg(long, default_value = "0.5")]
    pub kappa_star: String,
    /// Student width ratio m/d.
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    /// Weight decay on ‖W‖²_F; ignored in interpolator mode.
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    /// Label-noise variance Δ; a grid for `thresholds`.
    #[arg(long, default_value = "0")]
    pub delta_noise: String,
    /// Frobenius penalty on S.
    #[arg(long, default_value_t = 0.0)]
    pub tau: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Regularized)]
    pub mode: ModeArg,
    /// Input dimensions, comma-separated.
    #[arg(long, default_value = "100")]
    pub d: String,
    #[arg(long, default_value_t = 4)]
    pub seeds: usize,
    /// First seed; runs use `seed..seed + seeds`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SolverArg::Gamp)]
    pub solver: SolverArg,
    /// Input distribution; defaults to GOE for GAMP and prox, Gaussian for GD.
    #[arg(long, value_enum)]
    pub sensing: Option<SensingArg>,
    /// GD learning rate.
    #[arg(long)]
    pub eta: Option<f64>,
    /// GD steps.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Grid points for `spectrum`.
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Damping of state evolution and GAMP updates, in (0, 1].
    #[arg(long)]
    pub damping: Option<f64>,
    /// Convergence tolerance of the iterative solvers.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse `lo:hi:step` (inclusive) or `a,b,c`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(invalid("empty grid"));
    }
    let num = |s: &str| -> Result<f64, CliError> {
        let v: f64 = s.trim().parse().map_err(|_| invalid(format!("bad number `{s}` in grid")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(invalid(format!("non-finite value `{s}` in grid")))
        }
    };
    let values = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(invalid(format!("range `{text}` must be lo:hi:step")));
        }
        let (lo, hi, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if step <= 0.0 {
            return Err(invalid("grid step must be positive"));
        }
        let count = ((hi - lo) / step + 1e-9).floor();
        if count < 0.0 {
            Vec::new()
        } else {
            (0..=count as usize)
                .map(|i| ((lo + step * i as f64) * 1e12).round() / 1e12)
                .collect()
        }
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() {
        return Err(invalid(format!("grid `{text}` is empty")));
    }
    Ok(values)
}

fn single(text: &str, name: &str) -> Result<f64, CliError> {
    match parse_grid(text)?.as_slice() {
        [v] => Ok(*v),
        _ => Err(invalid(format!("--{name} takes a single value for this command"))),
    }
}

fn dims(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| invalid(format!("bad dimension `{s}`")))
        })
        .collect()
}

struct Resolved {
    alphas: Vec<f64>,
    base: ModelParams,
    mode: ModeArg,
    se: SolverConfig,
}

fn resolve(args: &RunArgs) -> Result<Resolved, CliError> {
    let alphas = parse_grid(
        args.alpha_grid
            .as_deref()
            .ok_or_else(|| invalid("--alpha-grid is required"))?,
    )?;
    let kappa_star = single(&args.kappa_star, "kappa-star")?;
    let noise = single(&args.delta_noise, "delta-noise")?;
    let lambda = match args.mode {
        ModeArg::Regularized => args.lambda,
        ModeArg::Interpolator => 0.0,
    };
    let base = ModelParams::new(alphas[0], kappa_star, args.kappa, lambda, noise)
        .and_then(|p| p.with_tau(args.tau))
        .map_err(|e| invalid(e.to_string()))?;
    for &a in &alphas {
        base.with_alpha(a).map_err(|e| invalid(e.to_string()))?;
    }
    let mut se = SolverConfig::default();
    if let Some(g) = args.damping {
        if !(g > 0.0 && g <= 1.0) {
            return Err(invalid("--damping must lie in (0, 1]"));
        }
        se.damping = g;
        se.min_damping = se.min_damping.min(g);
    }
    if let Some(t) = args.tol {
        if !(t > 0.0) {
            return Err(invalid("--tol must be positive"));
        }
        se.tol = t;
    }
    Ok(Resolved {
        alphas,
        base,
        mode: args.mode,
        se,
    })
}

fn sweep_mode(mode: ModeArg) -> SweepMode {
    match mode {
        ModeArg::Regularized => SweepMode::Regularized,
        ModeArg::Interpolator => SweepMode::Interpolator,
    }
}

/// One row of `curve` or `compare`. Simulation columns are empty for
/// `curve`; an empty `eps_bar` means `ε̄ = ∞` (interpolator branch).
#[derive(Debug, Clone, Serialize)]
pub struct CurveRow {
    pub alpha: f64,
    pub kappa_star: f64,
    pub kappa: f64,
    pub lambda: f64,
    pub delta_noise: f64,
    pub tau: f64,
    pub mode: ModeArg,
    pub branch: Option<&'static str>,
    pub delta_bar: Option<f64>,
    pub eps_bar: Option<f64>,
    pub test_error: Option<f64>,
    pub train_loss_density: Option<f64>,
    pub zero_mass: Option<f64>,
    pub replicon_margin: Option<f64>,
    pub se_iterations: Option<usize>,
    pub d: Option<usize>,
    pub solver: Option<&'static str>,
    pub sensing: Option<&'static str>,
    pub sim_mean: Option<f64>,
    pub sim_std: Option<f64>,
    pub n_seeds: Option<usize>,
    pub z_score: Option<f64>,
    pub sim_zero_fraction: Option<f64>,
    pub status: String,
}

impl CurveRow {
    fn theory(params: &ModelParams, mode: ModeArg, point: &Result<CurvePoint, SeError>) -> Self {
        let mut row = Self {
            alpha: params.alpha,
            kappa_star: params.kappa_star,
            kappa: params.kappa,
            lambda: params.lambda,
            delta_noise: params.noise,
            tau: params.tau,
            mode,
            branch: None,
            delta_bar: None,
            eps_bar: None,
            test_error: None,
            train_loss_density: None,
            zero_mass: None,
            replicon_margin: None,
            se_iterations: None,
            d: None,
            solver: None,
            sensing: None,
            sim_mean: None,
            sim_std: None,
            n_seeds: None,
            z_score: None,
            sim_zero_fraction: None,
            status: "ok".into(),
        };
        match point {
            Ok(c) => {
                let fp = &c.fixed_point;
                row.branch = Some(match fp.branch {
                    Branch::Regularized => "regularized",
                    Branch::Interpolator => "interpolator",
                });
                row.delta_bar = Some(fp.width);
                row.eps_bar = Some(fp.eps_bar()).filter(|e| e.is_finite());
                row.test_error = Some(c.observables.test_error);
                row.train_loss_density = Some(c.observables.train_loss);
                row.zero_mass = Some(c.observables.zero_mass);
                row.replicon_margin = Some(c.observables.replicon_margin);
                row.se_iterations = Some(fp.iterations);
            }
            Err(e) => row.status = format!("theory failed: {e}"),
        }
        row
    }

    fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdRow {
    pub kappa_star: f64,
    pub delta_noise: f64,
    pub alpha_inter: Option<f64>,
    /// `δ̄` at the interpolation threshold; 0 for noiseless data.
    pub delta_bar_inter: Option<f64>,
    pub alpha_inter_noiseless: f64,
    pub alpha_strong: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumRow {
    pub alpha: f64,
    pub kappa_star: f64,
    pub kappa: f64,
    pub lambda: f64,
    pub delta_noise: f64,
    pub tau: f64,
    pub mode: ModeArg,
    pub delta_bar: f64,
    /// `λ̃ ε̄`: eigenvalues of `S* + δ̄ Z` below it are set to zero.
    pub threshold: f64,
    pub zero_mass: f64,
    pub x: f64,
    pub density: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimRow {
    pub alpha: f64,
    pub kappa_star: f64,
    pub kappa: f64,
    pub lambda: f64,
    pub delta_noise: f64,
    pub tau: f64,
    pub d: usize,
    pub seed: u64,
    pub solver: &'static str,
    pub sensing: &'static str,
    pub test_error: Option<f64>,
    pub zero_fraction: Option<f64>,
    pub train_loss_density: Option<f64>,
    pub iterations: Option<usize>,
    pub status: String,
}

/// Rendered table plus whether any row failed numerically.
#[derive(Debug, Clone)]
pub struct Report {
    pub bytes: Vec<u8>,
    pub partial_failure: bool,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.partial_failure {
            2
        } else {
            0
        }
    }
}

pub fn render<T: Serialize>(rows: &[T], format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
            w.into_inner().map_err(|e| CliError::Io(e.into_error()))
        }
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(rows)?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

pub fn cmd_curve(args: &RunArgs) -> Result<Report, CliError> {
    let r = resolve(args)?;
    let mut ev = JEvaluator::new(r.base.kappa_star).map_err(|e| invalid(e.to_string()))?;
    let points = sweep_alpha(&r.base, &r.alphas, sweep_mode(r.mode), &r.se, &mut ev);
    let rows: Vec<CurveRow> = r
        .alphas
        .iter()
        .zip(&points)
        .map(|(&a, pt)| CurveRow::theory(&ModelParams { alpha: a, ..r.base }, r.mode, pt))
        .collect();
    let partial_failure = rows.iter().any(|row| !row.is_ok());
    Ok(Report {
        bytes: render(&rows, args.format)?,
        partial_failure,
    })
}

pub fn cmd_thresholds(args: &RunArgs) -> Result<Report, CliError> {
    let kappas = parse_grid(&args.kappa_star)?;
    let noises = parse_grid(&args.delta_noise)?;
    if let Some(k) = kappas.iter().find(|k| !(**k > 0.0)) {
        return Err(invalid(format!("kappa_star must be positive, got {k}")));
    }
    if let Some(n) = noises.iter().find(|n| !(**n >= 0.0)) {
        return Err(invalid(format!("delta_noise must be nonnegative, got {n}")));
    }
    let jobs: Vec<(f64, f64)> = kappas
        .iter()
        .flat_map(|&k| noises.iter().map(move |&n| (k, n)))
        .collect();
    let rows: Vec<ThresholdRow> = jobs
        .par_iter()
        .map(|&(kappa_star, noise)| {
            let mut row = ThresholdRow {
                kappa_star,
                delta_noise: noise,
                alpha_inter: None,
                delta_bar_inter: None,
                alpha_inter_noiseless: interpolation_threshold_noiseless(kappa_star),
                alpha_strong: None,
                status: "ok".into(),
            };
            let mut errors = Vec::new();
            match JEvaluator::new(kappa_star)
                .map_err(|e| e.to_string())
                .and_then(|mut ev| {
                    interpolation_threshold(kappa_star, noise, &mut ev).map_err(|e| e.to_string())
                }) {
                Ok(t) => {
                    row.alpha_inter = Some(t.alpha);
                    row.delta_bar_inter = Some(t.aux);
                }
                Err(e) => errors.push(format!("interpolation: {e}")),
            }
            match strong_recovery_threshold(kappa_star) {
                Ok(t) => row.alpha_strong = Some(t.alpha),
                Err(e) => errors.push(format!("strong recovery: {e}")),
            }
            if !errors.is_empty() {
                row.status = errors.join("; ");
            }
            row
        })
        .collect();
    let partial_failure = rows.iter().any(|r| r.status != "ok");
    Ok(Report {
        bytes: render(&rows, args.format)?,
        partial_failure,
    })
}

pub fn cmd_spectrum(args: &RunArgs) -> Result<Report, CliError> {
    let r = resolve(args)?;
    if args.points < 2 {
        return Err(invalid("--points must be at least 2"));
    }
    let mut ev = JEvaluator::new(r.base.kappa_star).map_err(|e| invalid(e.to_string()))?;
    let points = sweep_alpha(&r.base, &r.alphas, sweep_mode(r.mode), &r.se, &mut ev);
    let mut rows = Vec::new();
    let mut partial_failure = false;
    for (&alpha, pt) in r.alphas.iter().zip(&points) {
        let c = match pt {
            Ok(c) => c,
            Err(e) => {
                eprintln!("alpha = {alpha}: {e}");
                partial_failure = true;
                continue;
            }
        };
        let fp = &c.fixed_point;
        let law = match ev.law(fp.width) {
            Ok(l) => l,
            Err(e) => {
                eprintln!("alpha = {alpha}: {e}");
                partial_failure = true;
                continue;
            }
        };
        let top = law.bulks().iter().fold(fp.threshold, |a, b| a.max(b.hi));
        let x_max = (top - fp.threshold).max(0.0).sqrt();
        for i in 0..args.points {
            let x = x_max * i as f64 / (args.points - 1) as f64;
            let density = match singular_value_density(fp, &ev, x) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("alpha = {alpha}, x = {x}: {e}");
                    partial_failure = true;
                    f64::NAN
                }
            };
            rows.push(SpectrumRow {
                alpha,
                kappa_star: r.base.kappa_star,
                kappa: r.base.kappa,
                lambda: r.base.lambda,
                delta_noise: r.base.noise,
                tau: r.base.tau,
                mode: r.mode,
                delta_bar: fp.width,
                threshold: fp.threshold,
                zero_mass: c.observables.zero_mass,
                x,
                density,
            });
        }
    }
    Ok(Report {
        bytes: render(&rows, args.format)?,
        partial_failure,
    })
}

struct SimPlan {
    dims: Vec<usize>,
    seeds: Vec<u64>,
    solver: Solver,
    sensing: SensingMode,
    gd: GdSettings,
}

fn sim_plan(args: &RunArgs, r: &Resolved, min_seeds: usize) -> Result<SimPlan, CliError> {
    if r.mode == ModeArg::Interpolator {
        return Err(invalid("simulations need --mode regularized"));
    }
    if args.seeds < min_seeds {
        return Err(invalid(format!("--seeds must be at least {min_seeds}")));
    }
    let dims = dims(&args.d)?;
    if let Some(d) = dims.iter().find(|&&d| d < MIN_SIM_DIM) {
        return Err(invalid(format!("d = {d} is below the minimum of {MIN_SIM_DIM}")));
    }
    let solver = match args.solver {
        SolverArg::Gamp => Solver::Gamp,
        SolverArg::Prox => Solver::Prox,
        SolverArg::Gd => Solver::Gd,
    };
    if solver == Solver::Gamp && r.base.reduced_lambda() <= 0.0 && r.base.tau <= 0.0 {
        return Err(invalid("GAMP needs --lambda > 0 or --tau > 0"));
    }
    if solver == Solver::Gd && r.base.kappa < 1.0 {
        return Err(invalid("GD needs --kappa >= 1"));
    }
    let sensing = match args.sensing {
        Some(SensingArg::Gaussian) => SensingMode::Gaussian,
        Some(SensingArg::Goe) => SensingMode::Goe,
        None if solver == Solver::Gd => SensingMode::Gaussian,
        None => SensingMode::Goe,
    };
    if solver == Solver::Gd && sensing == SensingMode::Goe {
        return Err(invalid("GD trains the network and needs --sensing gaussian"));
    }
    let mut gd = GdSettings::default();
    if let Some(eta) = args.eta {
        gd.eta = eta;
    }
    if let Some(steps) = args.steps {
        gd.steps = steps;
    }
    Ok(SimPlan {
        dims,
        seeds: (0..args.seeds as u64).map(|i| args.seed + i).collect(),
        solver,
        sensing,
        gd,
    })
}

fn run_spec(args: &RunArgs, plan: &SimPlan, params: ModelParams, d: usize, seed: u64) -> RunSpec {
    let mut spec = RunSpec::new(params, d, seed, plan.solver);
    spec.sensing = plan.sensing;
    spec.gd = plan.gd;
    if let Some(g) = args.damping {
        spec.gamp.damping = g;
    }
    if let Some(t) = args.tol {
        spec.gamp.tol = t;
        spec.prox.tol = t;
    }
    spec
}

type Job = (usize, usize, u64);

/// All (α index, d, seed) runs in grid order.
fn run_jobs(
    args: &RunArgs,
    r: &Resolved,
    plan: &SimPlan,
) -> Vec<(Job, Result<RunResult, String>)> {
    let jobs: Vec<Job> = (0..r.alphas.len())
        .flat_map(|i| {
            plan.dims
                .iter()
                .flat_map(move |&d| plan.seeds.iter().map(move |&s| (i, d, s)))
        })
        .collect();
    jobs.par_iter()
        .map(|&(i, d, seed)| {
            let params = ModelParams {
                alpha: r.alphas[i],
                ..r.base
            };
            let res = run_simulation(&run_spec(args, plan, params, d, seed)).map_err(|e| e.to_string());
            if let Err(e) = &res {
                eprintln!("alpha = {}, d = {d}, seed = {seed}: {e}", r.alphas[i]);
            }
            ((i, d, seed), res)
        })
        .collect()
}

pub fn cmd_simulate(args: &RunArgs) -> Result<Report, CliError> {
    let r = resolve(args)?;
    let plan = sim_plan(args, &r, 1)?;
    let rows: Vec<SimRow> = run_jobs(args, &r, &plan)
        .into_iter()
        .map(|((i, d, seed), res)| {
            let mut row = SimRow {
                alpha: r.alphas[i],
                kappa_star: r.base.kappa_star,
                kappa: r.base.kappa,
                lambda: r.base.lambda,
                delta_noise: r.base.noise,
                tau: r.base.tau,
                d,
                seed,
                solver: plan.solver.name(),
                sensing: plan.sensing.name(),
                test_error: None,
                zero_fraction: None,
                train_loss_density: None,
                iterations: None,
                status: "ok".into(),
            };
            match res {
                Ok(o) => {
                    row.test_error = Some(o.test_error);
                    row.zero_fraction = Some(o.zero_fraction);
                    row.train_loss_density = Some(o.train_loss_density);
                    row.iterations = Some(o.iterations);
                }
                Err(e) => row.status = e,
            }
            row
        })
        .collect();
    let partial_failure = rows.iter().any(|row| row.status != "ok");
    Ok(Report {
        bytes: render(&rows, args.format)?,
        partial_failure,
    })
}

pub fn cmd_compare(args: &RunArgs) -> Result<Report, CliError> {
    let r = resolve(args)?;
    let plan = sim_plan(args, &r, 2)?;
    let mut ev = JEvaluator::new(r.base.kappa_star).map_err(|e| invalid(e.to_string()))?;
    let points = sweep_alpha(&r.base, &r.alphas, sweep_mode(r.mode), &r.se, &mut ev);
    let runs = run_jobs(args, &r, &plan);
    let mut rows = Vec::new();
    for (i, pt) in points.iter().enumerate() {
        let params = ModelParams {
            alpha: r.alphas[i],
            ..r.base
        };
        for &d in &plan.dims {
            let mut row = CurveRow::theory(&params, r.mode, pt);
            row.d = Some(d);
            row.solver = Some(plan.solver.name());
            row.sensing = Some(plan.sensing.name());
            let mut errors = Vec::new();
            let mut failed = 0;
            let mut zeros = Vec::new();
            for ((_, _, seed), res) in runs.iter().filter(|((j, dd, _), _)| *j == i && *dd == d) {
                match res {
                    Ok(o) => {
                        errors.push(o.test_error);
                        zeros.push(o.zero_fraction);
                    }
                    Err(e) => {
                        failed += 1;
                        if row.is_ok() {
                            row.status = format!("seed {seed}: {e}");
                        }
                    }
                }
            }
            row.n_seeds = Some(errors.len());
            if !errors.is_empty() {
                let (mean, std) = mean_std(&errors);
                row.sim_mean = Some(mean);
                row.sim_std = Some(std).filter(|s| s.is_finite());
                row.sim_zero_fraction = Some(mean_std(&zeros).0);
                if let (Some(theory), Some(std)) = (row.test_error, row.sim_std) {
                    let se = std / (errors.len() as f64).sqrt();
                    row.z_score = Some((mean - theory) / se).filter(|z| z.is_finite());
                }
            }
            if failed > 0 {
                row.status = format!("{failed} of {} seeds failed; {}", plan.seeds.len(), row.status);
            }
            rows.push(row);
        }
    }
    let partial_failure = rows.iter().any(|row| !row.is_ok());
    Ok(Report {
        bytes: render(&rows, args.format)?,
        partial_failure,
    })
}

/// Run one parsed command line and write its table.
pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    let (report, args) = match &cli.command {
        Command::Curve(a) => (cmd_curve(a)?, a),
        Command::Thresholds(a) => (cmd_thresholds(a)?, a),
        Command::Spectrum(a) => (cmd_spectrum(a)?, a),
        Command::Simulate(a) => (cmd_simulate(a)?, a),
        Command::Compare(a) => (cmd_compare(a)?, a),
    };
    match &args.out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            f.write_all(&report.bytes)?;
            f.flush()?;
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(&report.bytes)?;
            out.flush()?;
        }
    }
    Ok(report)
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: worker count must be positive");
            return 1;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: {e}");
        }
    }
    match execute(&cli) {
        Ok(report) => {
            if report.partial_failure {
                eprintln!("some rows failed; see the status column");
            }
            report.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
