//! Experiment runner: configuration, the adaptive run and its artifacts.
//!
//! A run writes into its output directory:
//!
//! * `history.csv`: `iter,N,eta1,eta2,eta,err_h,err_energy,resid,seconds`,
//!   error columns empty when the problem has no exact solution;
//! * `effectivity.csv`: `iter,N,eta,err_energy,effectivity`, only with an
//!   exact solution;
//! * `mesh_final.txt`: final mesh in the plain-text mesh format;
//! * `estimator_final.csv`: indicators of the final solve;
//! * `solution_final.vtk`: legacy VTK export, on request;
//! * `config_echo.toml`: the fully resolved configuration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::adapt::{adaptive_loop, ConvergenceRecord, LoopParams, MarkingParams, StopReason};
use crate::error::{invalid, Error, Result};
use crate::fem::{AffineMap, ReferenceTables};
use crate::hdg::{HdgParams, HdgSolution};
use crate::mesh::{Diagonal, Mesh};
use crate::problems::{make_example1, make_example2, make_example3, make_manufactured_poly, ProblemSpec};
use crate::Vec2;

/// Benchmark problems addressable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProblemName {
    Example1,
    Example2,
    Example3,
    Poly,
}

impl ProblemName {
    fn default_eps(self) -> f64 {
        match self {
            ProblemName::Example1 => 1e-5,
            ProblemName::Example2 => 1e-5,
            ProblemName::Example3 => 1e-4,
            ProblemName::Poly => 1e-6,
        }
    }

    fn default_n0(self) -> usize {
        match self {
            ProblemName::Example2 => 8,
            ProblemName::Poly => 4,
            _ => 20,
        }
    }
}

/// Fully resolved parameters of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemName,
    pub eps: f64,
    /// Layer width of `example2`.
    pub alpha: Option<f64>,
    pub p: usize,
    pub theta1: f64,
    pub theta2: f64,
    pub rho0: f64,
    /// Subdivisions per side of the initial mesh.
    pub n0: usize,
    pub max_dofs: usize,
    pub max_iters: usize,
    pub out: PathBuf,
    pub export_vtk: bool,
}

impl RunConfig {
    /// Defaults for `problem`, matching the published experiments.
    pub fn defaults(problem: ProblemName) -> Self {
        RunConfig {
            problem,
            eps: problem.default_eps(),
            alpha: (problem == ProblemName::Example2).then_some(1e-3),
            p: 1,
            theta1: 0.5,
            theta2: 0.5,
            rho0: 1.0,
            n0: problem.default_n0(),
            max_dofs: 200_000,
            max_iters: 40,
            out: PathBuf::from("out"),
            export_vtk: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        HdgParams::new(self.p, self.rho0)?;
        MarkingParams { theta1: self.theta1, theta2: self.theta2 }.validate()?;
        if self.n0 == 0 {
            return invalid("n0 must be at least 1");
        }
        self.problem_spec().map(|_| ())
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        match self.problem {
            ProblemName::Example1 => make_example1(self.eps),
            ProblemName::Example2 => make_example2(self.alpha.unwrap_or(1e-3), self.eps),
            ProblemName::Example3 => make_example3(self.eps),
            ProblemName::Poly => make_manufactured_poly(self.p, self.eps, Vec2::new(1.0, 1.0), 1.0),
        }
    }

    pub fn initial_mesh(&self) -> Result<Mesh> {
        Mesh::structured_unit_square(self.n0, Diagonal::Forward)
    }

    pub fn loop_params(&self) -> Result<LoopParams> {
        Ok(LoopParams {
            hdg: HdgParams::new(self.p, self.rho0)?,
            marking: MarkingParams { theta1: self.theta1, theta2: self.theta2 },
            max_dofs: self.max_dofs,
            max_iters: self.max_iters,
            check_conservation: false,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::State(format!("cannot serialise configuration: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse { line: 0, message: e.to_string() })
    }
}

#[derive(Debug, Parser)]
#[command(name = "hdg-adapt", version, about = "Adaptive HDG solver for convection-dominated convection-diffusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the adaptive loop on a benchmark problem.
    Run(RunArgs),
    /// Fit the log-log slope of a history column against N.
    Slope(SlopeArgs),
}

/// Command-line overrides; unset values come from `--config` or the defaults.
#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// TOML file with a full or partial configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub problem: Option<ProblemName>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub theta1: Option<f64>,
    #[arg(long)]
    pub theta2: Option<f64>,
    #[arg(long)]
    pub rho0: Option<f64>,
    #[arg(long)]
    pub n0: Option<usize>,
    #[arg(long)]
    pub max_dofs: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub export_vtk: bool,
}

#[derive(Debug, Args)]
pub struct SlopeArgs {
    /// A `history.csv` written by `run`.
    pub file: PathBuf,
    #[arg(long, default_value = "eta")]
    pub column: String,
    /// Number of trailing rows to fit.
    #[arg(long, default_value_t = 6)]
    pub window: usize,
}

/// Partial configuration as read from a file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    problem: Option<ProblemName>,
    eps: Option<f64>,
    alpha: Option<f64>,
    p: Option<usize>,
    theta1: Option<f64>,
    theta2: Option<f64>,
    rho0: Option<f64>,
    n0: Option<usize>,
    max_dofs: Option<usize>,
    max_iters: Option<usize>,
    out: Option<PathBuf>,
    export_vtk: Option<bool>,
}

impl RunArgs {
    /// Merges command line, configuration file and defaults, in that order.
    pub fn resolve(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                toml::from_str::<PartialConfig>(&text).map_err(|e| Error::Parse { line: 0, message: e.to_string() })?
            }
            None => PartialConfig::default(),
        };
        let problem = self.problem.or(file.problem).unwrap_or(ProblemName::Example1);
        let d = RunConfig::defaults(problem);
        let cfg = RunConfig {
            problem,
            eps: self.eps.or(file.eps).unwrap_or(d.eps),
            alpha: self.alpha.or(file.alpha).or(d.alpha),
            p: self.p.or(file.p).unwrap_or(d.p),
            theta1: self.theta1.or(file.theta1).unwrap_or(d.theta1),
            theta2: self.theta2.or(file.theta2).unwrap_or(d.theta2),
            rho0: self.rho0.or(file.rho0).unwrap_or(d.rho0),
            n0: self.n0.or(file.n0).unwrap_or(d.n0),
            max_dofs: self.max_dofs.or(file.max_dofs).unwrap_or(d.max_dofs),
            max_iters: self.max_iters.or(file.max_iters).unwrap_or(d.max_iters),
            out: self.out.clone().or(file.out).unwrap_or(d.out),
            export_vtk: self.export_vtk || file.export_vtk.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

pub const HISTORY_HEADER: &str = "iter,N,eta1,eta2,eta,err_h,err_energy,resid,seconds";

pub fn write_history<W: Write>(records: &[ConvergenceRecord], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{HISTORY_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.iter,
            r.n_dofs,
            fmt_f(r.eta1),
            fmt_f(r.eta2),
            fmt_f(r.eta),
            fmt_opt(r.err_h),
            fmt_opt(r.err_energy),
            fmt_f(r.residual),
            fmt_f(r.seconds)
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_effectivity<W: Write>(records: &[ConvergenceRecord], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "iter,N,eta,err_energy,effectivity")?;
    for r in records {
        if let Some(e) = r.err_energy {
            writeln!(out, "{},{},{},{},{}", r.iter, r.n_dofs, fmt_f(r.eta), fmt_f(e), fmt_f(r.eta / e))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Legacy VTK with one disconnected copy of the vertices per triangle, so the
/// discontinuous `u_h` is represented exactly at the vertices.
pub fn write_vtk<W: Write>(mesh: &Mesh, tables: &ReferenceTables, solution: &HdgSolution, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    let nt = mesh.n_elements();
    writeln!(out, "# vtk DataFile Version 3.0\nhdg-adapt solution\nASCII\nDATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", 3 * nt)?;
    for t in 0..nt {
        for p in mesh.element_points(t) {
            writeln!(out, "{} {} 0", fmt_f(p.x), fmt_f(p.y))?;
        }
    }
    writeln!(out, "CELLS {nt} {}", 4 * nt)?;
    for t in 0..nt {
        writeln!(out, "3 {} {} {}", 3 * t, 3 * t + 1, 3 * t + 2)?;
    }
    writeln!(out, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(out, "5")?;
    }
    // the mean of u_h is the φ₀ coefficient times the constant value √2 of φ₀
    writeln!(out, "CELL_DATA {nt}\nSCALARS u_mean double 1\nLOOKUP_TABLE default")?;
    for t in 0..nt {
        writeln!(out, "{}", fmt_f(solution.u[t][0] * 2f64.sqrt()))?;
    }
    writeln!(out, "POINT_DATA {}\nSCALARS u_h double 1\nLOOKUP_TABLE default", 3 * nt)?;
    for t in 0..nt {
        let map = AffineMap::of_element(mesh, t);
        for p in mesh.element_points(t) {
            writeln!(out, "{}", fmt_f(crate::fem::eval_element(tables, &map, &solution.u[t], &p)))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Outcome of [`run`].
#[derive(Debug)]
pub struct RunSummary {
    pub records: Vec<ConvergenceRecord>,
    pub stop: StopReason,
}

fn create(dir: &Path, name: &str) -> Result<File> {
    Ok(File::create(dir.join(name))?)
}

/// Runs the adaptive loop and writes the artifacts. A failed solve still
/// writes the history and mesh gathered so far before returning the error.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    let problem = config.problem_spec()?;
    std::fs::create_dir_all(&config.out)?;
    create(&config.out, "config_echo.toml")?.write_all(config.to_toml()?.as_bytes())?;
    let result = adaptive_loop(&problem, config.initial_mesh()?, &config.loop_params()?)?;
    write_history(&result.records, create(&config.out, "history.csv")?)?;
    result.mesh.write_text(create(&config.out, "mesh_final.txt")?)?;
    if problem.exact.is_some() {
        write_effectivity(&result.records, create(&config.out, "effectivity.csv")?)?;
    }
    if let Some(report) = &result.report {
        report.write_csv(create(&config.out, "estimator_final.csv")?)?;
    }
    if let (true, Some(solution)) = (config.export_vtk, &result.solution) {
        let tables = ReferenceTables::with_default_quadrature(config.p)?;
        write_vtk(&result.mesh, &tables, solution, create(&config.out, "solution_final.vtk")?)?;
    }
    if let StopReason::Failed(msg) = &result.stop {
        return Err(Error::State(format!("adaptive loop aborted after {} iterations: {msg}", result.records.len())));
    }
    Ok(RunSummary { records: result.records, stop: result.stop })
}

/// A parsed `history.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct History {
    pub columns: Vec<String>,
    /// `rows[i][j]`: column `j` of row `i`; `None` for empty fields.
    pub rows: Vec<Vec<Option<f64>>>,
}

impl History {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse { line: 1, message: "empty file".into() })?;
        let columns: Vec<String> = header.split(',').map(|s| s.trim().to_owned()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != columns.len() {
                return Err(Error::Parse { line: i + 2, message: format!("expected {} fields", columns.len()) });
            }
            let row = fields
                .iter()
                .map(|f| {
                    let f = f.trim();
                    if f.is_empty() {
                        Ok(None)
                    } else {
                        f.parse::<f64>().map(Some).map_err(|_| Error::Parse { line: i + 2, message: format!("bad number '{f}'") })
                    }
                })
                .collect::<Result<_>>()?;
            rows.push(row);
        }
        Ok(History { columns, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let j = self.columns.iter().position(|c| c == name).ok_or_else(|| Error::InvalidArgument(format!("no column '{name}'")))?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return invalid("log-log fit needs at least two paired values");
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return invalid("log-log fit needs positive values");
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return invalid("log-log fit needs distinct abscissae");
    }
    Ok(sxy / sxx)
}

/// Slope of `column` against `N` over the trailing `window` rows.
pub fn slope(history: &History, column: &str, window: usize) -> Result<f64> {
    if window < 4 {
        return invalid(format!("slope window must hold at least 4 rows, got {window}"));
    }
    let n = history.column("N")?;
    let y = history.column(column)?;
    let pairs: Vec<(f64, f64)> = n.iter().zip(&y).filter_map(|(a, b)| Some(((*a)?, (*b)?))).collect();
    if pairs.len() < window {
        return invalid(format!("column '{column}' has {} values, window needs {window}", pairs.len()));
    }
    let tail = &pairs[pairs.len() - window..];
    let (x, y): (Vec<f64>, Vec<f64>) = tail.iter().copied().unzip();
    loglog_slope(&x, &y)
}

/// Slope of `column` against `N` over the rows with `N ≥ N_last / 10`.
pub fn slope_last_decade(history: &History, column: &str) -> Result<f64> {
    let n = history.column("N")?;
    let y = history.column(column)?;
    let pairs: Vec<(f64, f64)> = n.iter().zip(&y).filter_map(|(a, b)| Some(((*a)?, (*b)?))).collect();
    let last = pairs.last().ok_or_else(|| Error::InvalidArgument("empty history".into()))?.0;
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().filter(|(a, _)| *a >= last / 10.0).unzip();
    if x.len() < 4 {
        return invalid(format!("only {} rows in the last decade of N", x.len()));
    }
    loglog_slope(&x, &y)
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Run(args) => args.resolve().and_then(|cfg| {
            let summary = run(&cfg)?;
            let last = summary.records.last();
            println!(
                "{} iterations, N = {}, eta = {:.6e}, stop: {:?}",
                summary.records.len(),
                last.map_or(0, |r| r.n_dofs),
                last.map_or(f64::NAN, |r| r.eta),
                summary.stop
            );
            Ok(())
        }),
        Command::Slope(args) => History::read(&args.file).and_then(|h| slope(&h, &args.column, args.window)).map(|s| println!("{s:.6}")),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
