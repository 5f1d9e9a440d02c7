//! Command-line front end: `vofem check | solve | convergence`.
//!
//! Configuration lives in a flat `key = value` document that the flags
//! mirror one-to-one; flags override file values. Convergence sweeps can
//! also be described by a JSON plan document. Exit codes: 0 success,
//! 1 failed check, 2 configuration error, 3 solver failure, 4 quadrature
//! failure.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::femspace::{build_box_mesh, DiffusionTensor, ScalarField, SpatialMesh};
use crate::fracops::QuadConfig;
use crate::harness::{
    build_manufactured, fmt6, run_convergence, ErrorMeter, ErrorNorm, ErrorObservable, SweepAxis,
    SweepPlan, SweepPoint,
};
use crate::sparsela::SolverConfig;
use crate::stepper::{solve_all, ProblemSpec, SourceTerm, SpatialScheme, StepperOptions};
use crate::tmesh::TimeMesh;
use crate::varorder::{check_assumptions, Kinetic, VarOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Check,
    Solve,
    Convergence,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Grading {
    /// `r = 1` when `alpha(0) = 1`, `r = 2/alpha(0)` otherwise.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// `u = t^{alpha(t)} prod sin(2 pi x_j)` with the source manufactured.
    Manufactured,
    /// `u0 = 0`, `f = 0`: the solution is identically zero.
    ZeroData,
}

/// Everything a run needs; round-trips losslessly through the flat
/// key-value format.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub dim: usize,
    pub cells: usize,
    pub steps: usize,
    pub grading: Grading,
    pub alpha0: f64,
    pub alpha1: f64,
    pub kinetic: f64,
    /// Diagonal of `K`: one value (isotropic) or `dim` values.
    pub diffusion: Vec<f64>,
    pub horizon: f64,
    pub solver_tol: f64,
    pub quad_tol: f64,
    pub norm: ErrorNorm,
    pub observable: ErrorObservable,
    pub scheme: SpatialScheme,
    pub problem: ProblemKind,
    pub sweep: SweepAxis,
    pub steps_list: Vec<usize>,
    pub cells_list: Vec<usize>,
    pub samples: usize,
    pub parallel: bool,
    pub csv_out: Option<PathBuf>,
    pub json_out: Option<PathBuf>,
    pub field_out: Option<PathBuf>,
    pub binary_out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Solve,
            dim: 1,
            cells: 64,
            steps: 16,
            grading: Grading::Auto,
            alpha0: 0.6,
            alpha1: 0.4,
            kinetic: 1.0,
            diffusion: vec![0.001],
            horizon: 1.0,
            solver_tol: 1e-11,
            quad_tol: 1e-10,
            norm: ErrorNorm::Nodal,
            observable: ErrorObservable::FinalTime,
            scheme: SpatialScheme::LumpedCollocation,
            problem: ProblemKind::Manufactured,
            sweep: SweepAxis::Temporal,
            steps_list: vec![8, 16, 32, 64],
            cells_list: Vec::new(),
            samples: 64,
            parallel: true,
        csv_out: None,
            json_out: None,
            field_out: None,
            binary_out: None,
        }
    }
}

fn bad(key: &str, value: &str, wanted: &str) -> Error {
    Error::Config(format!("key '{key}': cannot parse '{value}' as {wanted}"))
}

impl RunConfig {
    /// Resolve the auto grading rule.
    pub fn resolved_grading(&self) -> f64 {
        match self.grading {
            Grading::Fixed(r) => r,
            Grading::Auto => {
                if self.alpha0 == 1.0 {
                    1.0
                } else {
                    2.0 / self.alpha0
                }
            }
        }
    }

    /// Diagonal padded to three entries.
    pub fn diffusion_diag(&self) -> [f64; 3] {
        let mut d = [0.0; 3];
        for i in 0..self.dim {
            d[i] = if self.diffusion.len() == 1 {
                self.diffusion[0]
            } else {
                self.diffusion[i]
            };
        }
        d
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.alpha0 > 0.0 && self.alpha0 <= 1.0) {
            return fail(format!("alpha0={} outside (0, 1]", self.alpha0));
        }
        if !(self.alpha1 > 0.0 && self.alpha1 <= 1.0) {
            return fail(format!("alpha1={} outside (0, 1]", self.alpha1));
        }
        if !(1..=3).contains(&self.dim) {
            return fail(format!("dim={} outside 1..=3", self.dim));
        }
        if self.cells < 2 {
            return fail(format!("cells={} < 2", self.cells));
        }
        if self.steps < 1 {
            return fail("steps=0".into());
        }
        if let Grading::Fixed(r) = self.grading {
            if !(r >= 1.0) {
                return fail(format!("grading={r} < 1"));
            }
        }
        if !(self.kinetic > 0.0) {
            return fail(format!("kinetic={} must be positive", self.kinetic));
        }
        if self.diffusion.is_empty()
            || (self.diffusion.len() != 1 && self.diffusion.len() != self.dim)
        {
            return fail(format!(
                "diffusion needs 1 or {} entries, got {}",
                self.dim,
                self.diffusion.len()
            ));
        }
        if self.diffusion.iter().any(|&k| !(k > 0.0)) {
            return fail("diffusion entries must be positive".into());
        }
        if !(self.horizon > 0.0) {
            return fail(format!("horizon={} must be positive", self.horizon));
        }
        if !(self.solver_tol > 0.0) || !(self.quad_tol > 0.0) {
            return fail("tolerances must be positive".into());
        }
        if self.samples < 16 {
            return fail(format!("samples={} < 16", self.samples));
        }
        if self.mode == Mode::Convergence {
            match self.sweep {
                SweepAxis::Temporal if self.steps_list.len() < 2 => {
                    return fail("temporal sweep needs at least two entries in steps_list".into());
                }
                SweepAxis::Spatial if self.cells_list.len() < 2 => {
                    return fail("spatial sweep needs at least two entries in cells_list".into());
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Serialize to the flat key-value format (parses back losslessly).
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let mode = match self.mode {
            Mode::Check => "check",
            Mode::Solve => "solve",
            Mode::Convergence => "convergence",
        };
        let _ = writeln!(s, "mode = {mode}");
        let _ = writeln!(s, "dim = {}", self.dim);
        let _ = writeln!(s, "cells = {}", self.cells);
        let _ = writeln!(s, "steps = {}", self.steps);
        match self.grading {
            Grading::Auto => {
                let _ = writeln!(s, "grading = auto");
            }
            Grading::Fixed(r) => {
                let _ = writeln!(s, "grading = {r:?}");
            }
        }
        let _ = writeln!(s, "alpha0 = {:?}", self.alpha0);
        let _ = writeln!(s, "alpha1 = {:?}", self.alpha1);
        let _ = writeln!(s, "kinetic = {:?}", self.kinetic);
        let _ = writeln!(
            s,
            "diffusion = {}",
            self.diffusion
                .iter()
                .map(|v| format!("{v:?}"))
                .collect::<Vec<_>>()
                .join(",")
        );
        let _ = writeln!(s, "horizon = {:?}", self.horizon);
        let _ = writeln!(s, "solver_tol = {:?}", self.solver_tol);
        let _ = writeln!(s, "quad_tol = {:?}", self.quad_tol);
        let _ = writeln!(
            s,
            "norm = {}",
            match self.norm {
                ErrorNorm::Nodal => "nodal",
                ErrorNorm::Quadrature => "quadrature",
            }
        );
        let _ = writeln!(
            s,
            "observable = {}",
            match self.observable {
                ErrorObservable::FinalTime => "final",
                ErrorObservable::SupNodes => "sup",
            }
        );
        let _ = writeln!(
            s,
            "scheme = {}",
            match self.scheme {
                SpatialScheme::Consistent => "consistent",
                SpatialScheme::LumpedCollocation => "lumped",
                SpatialScheme::LumpedQuadrature => "lumped_quadrature",
            }
        );
        let _ = writeln!(
            s,
            "problem = {}",
            match self.problem {
                ProblemKind::Manufactured => "manufactured",
                ProblemKind::ZeroData => "zero",
            }
        );
        let _ = writeln!(
            s,
            "sweep = {}",
            match self.sweep {
                SweepAxis::Temporal => "temporal",
                SweepAxis::Spatial => "spatial",
            }
        );
        let join = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let _ = writeln!(s, "steps_list = {}", join(&self.steps_list));
        let _ = writeln!(s, "cells_list = {}", join(&self.cells_list));
        let _ = writeln!(s, "samples = {}", self.samples);
        let _ = writeln!(s, "parallel = {}", self.parallel);
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let _ = writeln!(s, "csv_out = {}", path(&self.csv_out));
        let _ = writeln!(s, "json_out = {}", path(&self.json_out));
        let _ = writeln!(s, "field_out = {}", path(&self.field_out));
        let _ = writeln!(s, "binary_out = {}", path(&self.binary_out));
        s
    }

    /// Parse the flat key-value format, overlaying onto `self`.
    pub fn apply_key_values(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Set one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_f64 =
            |v: &str, k: &str| -> Result<f64> { v.parse().map_err(|_| bad(k, v, "a number")) };
        let parse_usize =
            |v: &str, k: &str| -> Result<usize> { v.parse().map_err(|_| bad(k, v, "an integer")) };
        let parse_list = |v: &str, k: &str| -> Result<Vec<usize>> {
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',')
                .map(|x| x.trim().parse().map_err(|_| bad(k, v, "integers")))
                .collect()
        };
        let parse_path = |v: &str| -> Option<PathBuf> {
            if v.is_empty() {
                None
            } else {
                Some(PathBuf::from(v))
            }
        };
        match key {
            "mode" => {
                self.mode = match value {
                    "check" => Mode::Check,
                    "solve" => Mode::Solve,
                    "convergence" => Mode::Convergence,
                    _ => return Err(bad(key, value, "check|solve|convergence")),
                }
            }
            "dim" => self.dim = parse_usize(value, key)?,
            "cells" => self.cells = parse_usize(value, key)?,
            "steps" => self.steps = parse_usize(value, key)?,
            "grading" => {
                self.grading = if value == "auto" {
                    Grading::Auto
                } else {
                    Grading::Fixed(parse_f64(value, key)?)
                }
            }
            "alpha0" => self.alpha0 = parse_f64(value, key)?,
            "alpha1" => self.alpha1 = parse_f64(value, key)?,
            "kinetic" => self.kinetic = parse_f64(value, key)?,
            "diffusion" => {
                self.diffusion = value
                    .split(',')
                    .map(|x| x.trim().parse().map_err(|_| bad(key, value, "numbers")))
                    .collect::<Result<Vec<f64>>>()?
            }
            "horizon" => self.horizon = parse_f64(value, key)?,
            "solver_tol" => self.solver_tol = parse_f64(value, key)?,
            "quad_tol" => self.quad_tol = parse_f64(value, key)?,
            "norm" => {
                self.norm = match value {
                    "nodal" => ErrorNorm::Nodal,
                    "quadrature" => ErrorNorm::Quadrature,
                    _ => return Err(bad(key, value, "nodal|quadrature")),
                }
            }
            "observable" => {
                self.observable = match value {
                    "final" => ErrorObservable::FinalTime,
                    "sup" => ErrorObservable::SupNodes,
                    _ => return Err(bad(key, value, "final|sup")),
                }
            }
            "scheme" => {
                self.scheme = match value {
                    "consistent" => SpatialScheme::Consistent,
                    "lumped" => SpatialScheme::LumpedCollocation,
                    "lumped_quadrature" => SpatialScheme::LumpedQuadrature,
                    _ => return Err(bad(key, value, "consistent|lumped|lumped_quadrature")),
                }
            }
            "problem" => {
                self.problem = match value {
                    "manufactured" => ProblemKind::Manufactured,
                    "zero" => ProblemKind::ZeroData,
                    _ => return Err(bad(key, value, "manufactured|zero")),
                }
            }
            "sweep" => {
                self.sweep = match value {
                    "temporal" => SweepAxis::Temporal,
                    "spatial" => SweepAxis::Spatial,
                    _ => return Err(bad(key, value, "temporal|spatial")),
                }
            }
            "steps_list" => self.steps_list = parse_list(value, key)?,
            "cells_list" => self.cells_list = parse_list(value, key)?,
            "samples" => self.samples = parse_usize(value, key)?,
            "parallel" => {
                self.parallel = value
                    .parse()
                    .map_err(|_| bad(key, value, "true|false"))?
            }
            "csv_out" => self.csv_out = parse_path(value),
            "json_out" => self.json_out = parse_path(value),
            "field_out" => self.field_out = parse_path(value),
            "binary_out" => self.binary_out = parse_path(value),
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "vofem",
    version,
    about = "Finite element solver for variable-order time-fractional diffusion"
)]
pub struct Cli {
    /// Worker thread count (also honored from VOFEM_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Flat key-value configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Subcommand, Debug)]
pub enum CliCommand {
    /// Check the order and kinetic coefficient assumptions.
    Check(CommonArgs),
    /// Run one solve and write the final field.
    Solve(SolveArgs),
    /// Run a convergence sweep and emit CSV/JSON tables.
    Convergence(ConvergenceArgs),
}

#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Grading exponent, or 'auto' for r = 1 (alpha0 = 1) / 2/alpha0.
    #[arg(long)]
    pub grading: Option<String>,
    #[arg(long)]
    pub alpha0: Option<f64>,
    #[arg(long)]
    pub alpha1: Option<f64>,
    #[arg(long)]
    pub kinetic: Option<f64>,
    /// Diagonal of K: one value or dim comma-separated values.
    #[arg(long, value_delimiter = ',')]
    pub diffusion: Option<Vec<f64>>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub solver_tol: Option<f64>,
    #[arg(long)]
    pub quad_tol: Option<f64>,
    /// Error norm: nodal | quadrature.
    #[arg(long)]
    pub norm: Option<String>,
    /// Error observable: final | sup.
    #[arg(long)]
    pub observable: Option<String>,
    /// Spatial realization: consistent | lumped | lumped_quadrature.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub parallel: Option<bool>,
}

#[derive(Args, Debug, Default)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Problem: manufactured | zero.
    #[arg(long)]
    pub problem: Option<String>,
    /// Plain-text field output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Raw binary field output path.
    #[arg(long)]
    pub bin: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Sweep axis: temporal | spatial.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Step counts for temporal sweeps.
    #[arg(long, value_delimiter = ',')]
    pub steps_list: Option<Vec<usize>>,
    /// Cells-per-axis for spatial sweeps (steps couple as cells^2 unless
    /// steps_list pairs them).
    #[arg(long, value_delimiter = ',')]
    pub cells_list: Option<Vec<usize>>,
    /// JSON plan document with explicit sweep points.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

/// JSON plan document for convergence sweeps.
#[derive(Debug, Deserialize)]
struct PlanDoc {
    axis: String,
    points: Vec<PlanPoint>,
}

#[derive(Debug, Deserialize)]
struct PlanPoint {
    steps: usize,
    cells: usize,
    #[serde(default)]
    grading: Option<f64>,
}

fn overlay_common(config: &mut RunConfig, args: &CommonArgs) -> Result<()> {
    if let Some(v) = args.dim {
        config.dim = v;
    }
    if let Some(v) = args.cells {
        config.cells = v;
    }
    if let Some(v) = args.steps {
        config.steps = v;
    }
    if let Some(v) = &args.grading {
        config.set("grading", v)?;
    }
    if let Some(v) = args.alpha0 {
        config.alpha0 = v;
    }
    if let Some(v) = args.alpha1 {
        config.alpha1 = v;
    }
    if let Some(v) = args.kinetic {
        config.kinetic = v;
    }
    if let Some(v) = &args.diffusion {
        config.diffusion = v.clone();
    }
    if let Some(v) = args.horizon {
        config.horizon = v;
    }
    if let Some(v) = args.solver_tol {
        config.solver_tol = v;
    }
    if let Some(v) = args.quad_tol {
        config.quad_tol = v;
    }
    if let Some(v) = &args.norm {
        config.set("norm", v)?;
    }
    if let Some(v) = &args.observable {
        config.set("observable", v)?;
    }
    if let Some(v) = &args.scheme {
        config.set("scheme", v)?;
    }
    if let Some(v) = args.samples {
        config.samples = v;
    }
    if let Some(v) = args.parallel {
        config.parallel = v;
    }
    Ok(())
}

/// Turn parsed flags (plus optional config file) into a validated
/// [`RunConfig`] and optional explicit sweep points.
pub fn build_config(cli: &Cli) -> Result<(RunConfig, Option<Vec<SweepPoint>>)> {
    let mut config = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)?;
        config.apply_key_values(&text)?;
    }
    let mut plan_points = None;
    match &cli.command {
        CliCommand::Check(common) => {
            config.mode = Mode::Check;
            overlay_common(&mut config, common)?;
        }
        CliCommand::Solve(args) => {
            config.mode = Mode::Solve;
            overlay_common(&mut config, &args.common)?;
            if let Some(v) = &args.problem {
                config.set("problem", v)?;
            }
            if args.out.is_some() {
                config.field_out = args.out.clone();
            }
            if args.bin.is_some() {
                config.binary_out = args.bin.clone();
            }
        }
        CliCommand::Convergence(args) => {
            config.mode = Mode::Convergence;
            overlay_common(&mut config, &args.common)?;
            if let Some(v) = &args.sweep {
                config.set("sweep", v)?;
            }
            if let Some(v) = &args.steps_list {
                config.steps_list = v.clone();
            }
            if let Some(v) = &args.cells_list {
                config.cells_list = v.clone();
            }
            if args.csv.is_some() {
                config.csv_out = args.csv.clone();
            }
            if args.json.is_some() {
                config.json_out = args.json.clone();
            }
            if let Some(path) = &args.plan {
                let text = std::fs::read_to_string(path)?;
                let doc: PlanDoc = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("plan: {e}")))?;
                config.sweep = match doc.axis.as_str() {
                    "temporal" => SweepAxis::Temporal,
                    "spatial" => SweepAxis::Spatial,
                    other => return Err(Error::Config(format!("plan axis '{other}'"))),
                };
                let default_r = config.resolved_grading();
                plan_points = Some(
                    doc.points
                        .iter()
                        .map(|p| SweepPoint {
                            steps: p.steps,
                            cells: p.cells,
                            grading: p.grading.unwrap_or(default_r),
                        })
                        .collect(),
                );
            }
        }
    }
    config.validate()?;
    Ok((config, plan_points))
}

fn make_order(config: &RunConfig) -> Result<VarOrder> {
    VarOrder::smooth_transition(config.alpha0, config.alpha1)
}

/// Run a parsed command; returns the process exit code.
pub fn execute(cli: &Cli) -> Result<i32> {
    let (config, plan_points) = build_config(cli)?;
    match config.mode {
        Mode::Check => run_check(&config),
        Mode::Solve => run_solve(&config),
        Mode::Convergence => run_convergence_mode(&config, plan_points),
    }
}

fn run_check(config: &RunConfig) -> Result<i32> {
    let vo = make_order(config)?;
    let kin = Kinetic::constant(config.kinetic);
    let report = check_assumptions(&vo, &kin, config.horizon, config.samples)?;
    for cond in [
        crate::varorder::COND_ALPHA_RANGE,
        crate::varorder::COND_K_POSITIVE,
        crate::varorder::COND_LOG_LIMIT,
    ] {
        let hits: Vec<_> = report
            .violations
            .iter()
            .filter(|v| v.condition == cond)
            .collect();
        if hits.is_empty() {
            println!("condition {cond}: PASS");
        } else {
            let first = hits[0];
            println!(
                "condition {cond}: FAIL at t={} (value {})",
                fmt6(first.t),
                fmt6(first.value)
            );
        }
    }
    println!("overall: {}", if report.passed { "PASS" } else { "FAIL" });
    Ok(if report.passed { 0 } else { 1 })
}

fn build_meshes(config: &RunConfig) -> Result<(TimeMesh, SpatialMesh)> {
    let mesh_t = TimeMesh::graded(config.horizon, config.steps, config.resolved_grading())?;
    let mesh_x = build_box_mesh(config.dim, config.cells)?;
    Ok((mesh_t, mesh_x))
}

fn stepper_options(config: &RunConfig) -> StepperOptions {
    StepperOptions {
        solver: SolverConfig::with_rel_tol(config.solver_tol),
        scheme: config.scheme,
        ..StepperOptions::default()
    }
}

fn run_solve(config: &RunConfig) -> Result<i32> {
    let (mesh_t, mesh_x) = build_meshes(config)?;
    let opts = stepper_options(config);
    println!("grading r = {}", fmt6(mesh_t.grading));
    match config.problem {
        ProblemKind::Manufactured => {
            let problem = build_manufactured(
                config.dim,
                make_order(config)?,
                Kinetic::constant(config.kinetic),
                DiffusionTensor::constant_diagonal(config.diffusion_diag()),
                config.horizon,
            )?;
            let meter = ErrorMeter::new(&mesh_x, &problem);
            let quad = QuadConfig::with_rel_tol(config.quad_tol);
            let (spec, factors) = problem.instantiate(mesh_t, mesh_x.clone(), &quad)?;
            let record = solve_all(&spec, &opts)?;
            let sup = meter.sup_error(config.norm, &record, &factors);
            let final_err = meter.final_error(config.norm, &record, &factors);
            println!("sup error = {}", fmt6(sup));
            println!("final error = {}", fmt6(final_err));
            let iters: usize = record.per_step.iter().map(|d| d.iterations).sum();
            println!("total solver iterations = {iters}");
            write_field_outputs(config, &mesh_x, record.states.last().unwrap())?;
        }
        ProblemKind::ZeroData => {
            let spec = ProblemSpec {
                vo: make_order(config)?,
                kinetic: Kinetic::constant(config.kinetic),
                diffusion: DiffusionTensor::constant_diagonal(config.diffusion_diag()),
                initial: ScalarField::zero(),
                source: SourceTerm::Zero,
                mesh_t,
                mesh_x: mesh_x.clone(),
            };
            let record = solve_all(&spec, &opts)?;
            let mass = crate::femspace::assemble_mass(&mesh_x);
            let err = record
                .states
                .iter()
                .map(|u| {
                    let mu = mass.matvec(u);
                    u.iter().zip(&mu).map(|(a, b)| a * b).sum::<f64>().sqrt()
                })
                .fold(0.0, f64::max);
            println!("sup error = {}", fmt6(err));
            println!("final error = {}", fmt6(err));
            write_field_outputs(config, &mesh_x, record.states.last().unwrap())?;
        }
    }
    Ok(0)
}

fn run_convergence_mode(config: &RunConfig, plan_points: Option<Vec<SweepPoint>>) -> Result<i32> {
    let problem = build_manufactured(
        config.dim,
        make_order(config)?,
        Kinetic::constant(config.kinetic),
        DiffusionTensor::constant_diagonal(config.diffusion_diag()),
        config.horizon,
    )?;
    let r = config.resolved_grading();
    let points = if let Some(points) = plan_points {
        points
    } else {
        match config.sweep {
            SweepAxis::Temporal => config
                .steps_list
                .iter()
                .map(|&steps| SweepPoint {
                    steps,
                    cells: config.cells,
                    grading: r,
                })
                .collect(),
            SweepAxis::Spatial => config
                .cells_list
                .iter()
                .enumerate()
                .map(|(i, &cells)| SweepPoint {
                    steps: if config.steps_list.len() == config.cells_list.len() {
                        config.steps_list[i]
                    } else {
                        cells * cells
                    },
                    cells,
                    grading: r,
                })
                .collect(),
        }
    };
    let plan = SweepPlan {
        problem,
        axis: config.sweep,
        points,
        norm: config.norm,
        observable: config.observable,
        quad: QuadConfig::with_rel_tol(config.quad_tol),
        stepper: stepper_options(config),
        parallel: config.parallel,
    };
    let table = run_convergence(&plan)?;
    let csv = table.to_csv();
    match &config.csv_out {
        Some(path) => std::fs::write(path, &csv)?,
        None => print!("{csv}"),
    }
    if let Some(path) = &config.json_out {
        std::fs::write(path, serde_json::to_string_pretty(&table.to_json()).unwrap())?;
    }
    Ok(0)
}

/// Scatter interior coefficients across the full vertex lattice.
fn full_field(mesh: &SpatialMesh, interior: &[f64]) -> Vec<f64> {
    mesh.interior_index
        .iter()
        .map(|idx| idx.map(|i| interior[i]).unwrap_or(0.0))
        .collect()
}

fn write_field_outputs(config: &RunConfig, mesh: &SpatialMesh, state: &[f64]) -> Result<()> {
    if config.field_out.is_none() && config.binary_out.is_none() {
        return Ok(());
    }
    let values = full_field(mesh, state);
    if let Some(path) = &config.field_out {
        write_field_text(path, mesh, &values)?;
    }
    if let Some(path) = &config.binary_out {
        write_field_binary(path, mesh, &values)?;
    }
    Ok(())
}

/// Text field dump: one `x1 .. xd value` row per lattice vertex.
pub fn write_field_text(path: &Path, mesh: &SpatialMesh, values: &[f64]) -> Result<()> {
    let mut out = String::new();
    for (v, val) in values.iter().enumerate() {
        let x = &mesh.vertices[v];
        for c in 0..mesh.dim {
            let _ = write!(out, "{:.9e} ", x[c]);
        }
        let _ = writeln!(out, "{val:.9e}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Raw field dump: magic `VOFM`, little-endian u64 `dim` and `cells`, then
/// the lattice values as little-endian f64.
pub fn write_field_binary(path: &Path, mesh: &SpatialMesh, values: &[f64]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(b"VOFM")?;
    out.write_all(&(mesh.dim as u64).to_le_bytes())?;
    out.write_all(&(mesh.cells_per_axis as u64).to_le_bytes())?;
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Map an error to the documented process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidParam { .. } => 2,
        Error::SolverStalled { .. } | Error::ZeroPivot { .. } => 3,
        Error::QuadratureStalled { .. } => 4,
        _ => 1,
    }
}

/// Build the global thread pool honoring `--threads` / `VOFEM_THREADS`.
pub fn init_threads(threads: Option<usize>) {
    let n = threads.or_else(|| {
        std::env::var("VOFEM_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
