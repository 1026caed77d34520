//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use crate::decomposition::{Decomposition, ScalingKind};
use crate::error::{Error, Result};
use crate::grid_fem::{Grid, SaddleSystem, Wells};
use crate::io::{self, PermField, ReportRow, Spe10Slice, SyntheticKind};
use crate::oracle;
use crate::solver::{Bddc, ConstraintMode, SolveConfig, SolveReport};

#[derive(Debug, Parser)]
#[command(name = "darcy-bddc", version, about = "Adaptive BDDC for mixed Darcy flow")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem, or a sweep over several tau values.
    Solve(SolveArgs),
    /// Write the spectra of all pair eigenproblems as CSV.
    EigsReport(EigsArgs),
    /// Extract a layer or box of the raw SPE10 field into a PERM file.
    ConvertSpe10(ConvertArgs),
    /// Write a synthetic permeability field.
    Synthetic(SyntheticArgs),
    /// Compare the solver against the direct solve and print CSV metrics.
    OracleCheck(OracleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FieldKind {
    Constant,
    Checkerboard,
    LogUniform,
    Smooth,
    Channelized,
}

#[derive(Clone, Debug, Args)]
pub struct FieldArgs {
    /// Constant value for `constant`.
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    /// Contrast of `checkerboard` and `channelized`.
    #[arg(long, default_value_t = 1e6)]
    pub contrast: f64,
    /// Checkerboard block size per axis (default: the subdomain size).
    #[arg(long, value_delimiter = ',')]
    pub block: Option<Vec<usize>>,
    /// Decades spanned by `log-uniform` and `smooth`.
    #[arg(long, default_value_t = 6.0)]
    pub orders: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Debug, Args)]
pub struct ProblemArgs {
    /// Cells per axis, `nx,ny[,nz]`.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub cell_size: Option<Vec<f64>>,
    /// Permeability file (`PERM` format).
    #[arg(long, group = "field")]
    pub perm: Option<PathBuf>,
    /// Generated permeability field.
    #[arg(long, value_enum, group = "field")]
    pub synthetic: Option<FieldKind>,
    /// Raw SPE10 file; use with `--layers`.
    #[arg(long, group = "field")]
    pub spe10: Option<PathBuf>,
    /// SPE10 layer `L` or range `A-B` (1-based, inclusive).
    #[arg(long)]
    pub layers: Option<String>,
    /// SPE10 cutout `x0,y0,nx,ny` within a layer (default: whole layer).
    #[arg(long, value_delimiter = ',')]
    pub cutout: Option<Vec<usize>>,
    #[command(flatten)]
    pub field: FieldArgs,
    /// Partition file (`PART` format).
    #[arg(long, group = "part")]
    pub partition: Option<PathBuf>,
    /// Regular partition, subdomains per axis.
    #[arg(long, value_delimiter = ',', group = "part")]
    pub splits: Option<Vec<usize>>,
    /// Injector cell (default: first cell).
    #[arg(long)]
    pub src_cell: Option<usize>,
    /// Producer cell (default: last cell).
    #[arg(long)]
    pub sink_cell: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub well_strength: f64,
}

#[derive(Clone, Debug, Args)]
pub struct ConfigArgs {
    #[arg(long, default_value = "multiplicity")]
    pub scaling: ScalingKind,
    /// Target condition number(s), comma separated; `inf` for none.
    #[arg(long, value_delimiter = ',')]
    pub tau: Option<Vec<String>>,
    /// Default: `adaptive` when `--tau` is given, `initial` otherwise.
    #[arg(long)]
    pub constraints: Option<ConstraintMode>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub maxit: usize,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Report CSV, one row per run.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Residual history CSV (suffixed by tau in a sweep).
    #[arg(long)]
    pub residuals: Option<PathBuf>,
    /// Dense preconditioned spectrum CSV (small problems only).
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
    /// Skip the direct solve used for the error columns.
    #[arg(long)]
    pub no_errors: bool,
}

#[derive(Debug, Args)]
pub struct EigsArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value = "multiplicity")]
    pub scaling: ScalingKind,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub raw: PathBuf,
    /// Layer `L` or range `A-B` (1-based, inclusive).
    #[arg(long)]
    pub layers: String,
    /// Cutout `x0,y0,nx,ny` (default: whole layer).
    #[arg(long, value_delimiter = ',')]
    pub cutout: Option<Vec<usize>>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SyntheticArgs {
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<usize>,
    #[arg(long, value_enum)]
    pub kind: FieldKind,
    #[command(flatten)]
    pub field: FieldArgs,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
}

/// Exit status of a subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Converged,
    NotConverged,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Converged => 0,
            Status::NotConverged => 2,
        }
    }
}

pub fn parse_tau(s: &str) -> Result<f64> {
    let t = s.trim();
    let v = if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
        f64::INFINITY
    } else {
        t.parse().map_err(|_| Error::invalid(format!("cannot parse tau '{t}'")))?
    };
    if !(v > 1.0) {
        return Err(Error::invalid("tau must exceed 1"));
    }
    Ok(v)
}

fn parse_layers(s: &str) -> Result<std::ops::Range<usize>> {
    let bad = || Error::invalid(format!("layers must be 'L' or 'A-B', got '{s}'"));
    let (a, b) = match s.split_once('-') {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
        None => {
            let l: usize = s.trim().parse().map_err(|_| bad())?;
            (l, l)
        }
    };
    if a > b {
        return Err(bad());
    }
    Ok(a..b + 1)
}

fn spe10_slice(layers: &str, cutout: Option<&[usize]>) -> Result<Spe10Slice> {
    let layers = parse_layers(layers)?;
    let (x, y) = match cutout {
        None => (0..io::SPE10_DIMS[0], 0..io::SPE10_DIMS[1]),
        Some([x0, y0, nx, ny]) => (*x0..x0 + nx, *y0..y0 + ny),
        Some(other) => return Err(Error::invalid(format!("cutout needs x0,y0,nx,ny, got {other:?}"))),
    };
    Ok(Spe10Slice { x, y, layers })
}

fn synthetic_kind(kind: FieldKind, a: &FieldArgs, default_block: Option<Vec<usize>>) -> Result<SyntheticKind> {
    Ok(match kind {
        FieldKind::Constant => SyntheticKind::Constant(a.k),
        FieldKind::Checkerboard => SyntheticKind::Checkerboard {
            contrast: a.contrast,
            block: a
                .block
                .clone()
                .or(default_block)
                .ok_or_else(|| Error::invalid("checkerboard needs --block (or --splits dividing the grid)"))?,
        },
        FieldKind::LogUniform => SyntheticKind::LogUniform { orders: a.orders, seed: a.seed },
        FieldKind::Smooth => SyntheticKind::Smooth { orders: a.orders, seed: a.seed },
        FieldKind::Channelized => SyntheticKind::Channelized { contrast: a.contrast, seed: a.seed },
    })
}

/// An assembled problem ready for the solver.
#[derive(Debug)]
pub struct Problem {
    pub system: SaddleSystem,
    pub decomposition: Decomposition,
}

impl ProblemArgs {
    pub fn build(&self) -> Result<Problem> {
        let field: Option<PermField> = match (&self.perm, &self.spe10) {
            (Some(p), _) => Some(io::read_perm(p)?),
            (None, Some(raw)) => {
                let layers = self.layers.as_deref().ok_or_else(|| Error::invalid("--spe10 needs --layers"))?;
                Some(io::convert_spe10(raw, &spe10_slice(layers, self.cutout.as_deref())?)?)
            }
            (None, None) => None,
        };
        let counts = match (&field, &self.grid) {
            (Some(f), Some(g)) if &f.counts != g => {
                return Err(Error::invalid(format!("--grid {g:?} does not match the field size {:?}", f.counts)))
            }
            (Some(f), _) => f.counts.clone(),
            (None, Some(g)) => g.clone(),
            (None, None) => return Err(Error::invalid("--grid is required for synthetic fields")),
        };
        let dim = counts.len();
        let sizes = self.cell_size.clone().unwrap_or_else(|| vec![1.0; dim]);
        if sizes.len() != dim {
            return Err(Error::invalid(format!("--cell-size needs {dim} values")));
        }
        let grid = Grid::new(dim, &counts, &sizes)?;
        let perm = match (field, self.synthetic) {
            (Some(f), _) => f.perm,
            (None, Some(kind)) => {
                let block = self.splits.as_ref().and_then(|s| {
                    (s.len() == dim && s.iter().zip(&counts).all(|(s, n)| *s > 0 && n % s == 0))
                        .then(|| counts.iter().zip(s).map(|(n, s)| n / s).collect())
                });
                io::synthetic_field(&grid, &synthetic_kind(kind, &self.field, block)?)?
            }
            (None, None) => return Err(Error::invalid("one of --perm, --synthetic or --spe10 is required")),
        };
        if perm.dim() != dim {
            return Err(Error::invalid(format!("permeability has {} components, grid is {dim}D", perm.dim())));
        }
        let decomposition = match (&self.partition, &self.splits) {
            (Some(p), _) => Decomposition::import(p, &grid)?,
            (None, Some(s)) => Decomposition::regular(&grid, s)?,
            (None, None) => return Err(Error::invalid("one of --partition or --splits is required")),
        };
        let wells = Wells {
            source: self.src_cell.unwrap_or(0),
            sink: self.sink_cell.unwrap_or(grid.n_cells() - 1),
            strength: self.well_strength,
        };
        let system = SaddleSystem::assemble(&grid, &perm, wells)?;
        Ok(Problem { system, decomposition })
    }
}

impl ConfigArgs {
    /// One configuration per requested tau.
    pub fn configs(&self) -> Result<Vec<SolveConfig>> {
        let taus: Vec<f64> = match &self.tau {
            Some(list) => list.iter().map(|s| parse_tau(s)).collect::<Result<_>>()?,
            None => vec![f64::INFINITY],
        };
        let mode = self.constraints.unwrap_or(if self.tau.is_some() {
            ConstraintMode::Adaptive
        } else {
            ConstraintMode::Initial
        });
        if mode != ConstraintMode::Adaptive && taus.iter().any(|t| t.is_finite()) {
            return Err(Error::invalid("a finite --tau requires --constraints adaptive"));
        }
        let configs: Vec<SolveConfig> = taus
            .into_iter()
            .map(|tau| SolveConfig { tau, scaling: self.scaling, tol: self.tol, maxit: self.maxit, constraints: mode })
            .collect();
        for c in &configs {
            c.validate()?;
        }
        Ok(configs)
    }
}

fn suffixed(path: &Path, tag: &str, many: bool) -> PathBuf {
    if !many {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(e) => format!("{stem}-{tag}.{}", e.to_string_lossy()),
        None => format!("{stem}-{tag}"),
    };
    path.with_file_name(name)
}

fn run_one(problem: &Problem, config: &SolveConfig, reference: Option<&[f64]>) -> Result<(Bddc, SolveReport, bool)> {
    let bddc = Bddc::setup(&problem.system, &problem.decomposition, config)?;
    match bddc.solve(reference) {
        Ok(r) => Ok((bddc, r, true)),
        Err(Error::NonConvergence(r)) => Ok((bddc, *r, false)),
        Err(e) => Err(e),
    }
}

pub fn solve(args: &SolveArgs) -> Result<Status> {
    let configs = args.config.configs()?;
    let problem = args.problem.build()?;
    let reference = if args.no_errors {
        None
    } else {
        match oracle::direct_solve(&problem.system) {
            Ok(s) => Some(s.u),
            Err(Error::TooLarge { size, limit }) => {
                warn!("problem size {size} exceeds the direct-solve limit {limit}; error columns left empty");
                None
            }
            Err(e) => return Err(e),
        }
    };
    let many = configs.len() > 1;
    let mut rows = Vec::new();
    let mut status = Status::Converged;
    for config in &configs {
        let (bddc, report, converged) = run_one(&problem, config, reference.as_deref())?;
        let row = ReportRow::new(config, &report);
        println!("{}", row.csv_line());
        if !converged {
            warn!("tau {}: no convergence in {} iterations", row.tag, report.iterations);
            status = Status::NotConverged;
        }
        if let Some(p) = &args.residuals {
            io::write_atomic(&suffixed(p, &row.tag, many), &io::residual_csv(&report.history))?;
        }
        if let Some(p) = &args.spectrum {
            let spectrum = oracle::preconditioned_spectrum(&bddc)?;
            io::write_atomic(&suffixed(p, &row.tag, many), &io::spectrum_csv(&spectrum))?;
        }
        rows.push(row);
    }
    if let Some(p) = &args.report {
        io::write_atomic(p, &ReportRow::csv(&rows))?;
        info!("report written to {}", p.display());
    }
    Ok(status)
}

pub fn eigs_report(args: &EigsArgs) -> Result<Status> {
    let problem = args.problem.build()?;
    let config = SolveConfig {
        scaling: args.scaling,
        constraints: ConstraintMode::Adaptive,
        ..Default::default()
    };
    let bddc = Bddc::setup(&problem.system, &problem.decomposition, &config)?;
    let report = bddc
        .adaptive_report()
        .ok_or_else(|| Error::InternalConsistency("adaptive report missing".into()))?;
    io::write_atomic(&args.output, &io::eigs_csv(report))?;
    Ok(Status::Converged)
}

pub fn convert_spe10(args: &ConvertArgs) -> Result<Status> {
    let slice = spe10_slice(&args.layers, args.cutout.as_deref())?;
    let field = io::convert_spe10(&args.raw, &slice)?;
    io::write_perm(&args.output, &field)?;
    Ok(Status::Converged)
}

pub fn synthetic(args: &SyntheticArgs) -> Result<Status> {
    let dim = args.grid.len();
    let grid = Grid::new(dim, &args.grid, &vec![1.0; dim])?;
    let perm = io::synthetic_field(&grid, &synthetic_kind(args.kind, &args.field, None)?)?;
    io::write_perm(&args.output, &PermField { counts: args.grid.clone(), perm })?;
    Ok(Status::Converged)
}

/// Agreement between the solver and the direct solve, as `metric,value` CSV.
pub fn oracle_check_csv(problem: &Problem, config: &SolveConfig) -> Result<(String, bool)> {
    let exact = oracle::direct_solve(&problem.system)?;
    let (bddc, report, converged) = run_one(problem, config, Some(&exact.u))?;
    let rel = |a: &[f64], b: &[f64]| {
        let n = crate::linalg::norm2(b);
        let d = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        if n > 0.0 {
            d / n
        } else {
            d
        }
    };
    let spectrum = oracle::preconditioned_spectrum(&bddc)?;
    let mut out = String::from("metric,value\n");
    let mut line = |k: &str, v: String| out.push_str(&format!("{k},{v}\n"));
    line("flux_rel_error", format!("{:.3e}", rel(&report.u, &exact.u)));
    line("pressure_rel_error", format!("{:.3e}", rel(&report.p, &exact.p)));
    line("iterations", report.iterations.to_string());
    line("kappa", format!("{:.6}", report.kappa));
    line("lambda_min", format!("{:.10}", spectrum.last().copied().unwrap_or(1.0)));
    line("lambda_max", format!("{:.6}", spectrum.first().copied().unwrap_or(1.0)));
    line("omega_tilde", report.omega_tilde.map_or(String::new(), |w| format!("{w:.6}")));
    line("n_c", report.n_c.to_string());
    line("conservation_defect", format!("{:.3e}", report.conservation_defect));
    Ok((out, converged))
}

pub fn oracle_check(args: &OracleArgs) -> Result<Status> {
    let problem = args.problem.build()?;
    let configs = args.config.configs()?;
    let mut status = Status::Converged;
    for config in &configs {
        let (csv, converged) = oracle_check_csv(&problem, config)?;
        print!("{csv}");
        if !converged {
            status = Status::NotConverged;
        }
    }
    Ok(status)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::EigsReport(a) => eigs_report(a),
        Command::ConvertSpe10(a) => convert_spe10(a),
        Command::Synthetic(a) => synthetic(a),
        Command::OracleCheck(a) => oracle_check(a),
    };
    match result {
        Ok(s) => s.code(),
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_parsing() {
        assert_eq!(parse_tau("inf").unwrap(), f64::INFINITY);
        assert_eq!(parse_tau(" 10 ").unwrap(), 10.0);
        assert_eq!(parse_tau("0.5").unwrap_err().to_string(), "invalid argument: tau must exceed 1");
        assert!(parse_tau("1").is_err());
        assert!(parse_tau("abc").is_err());
    }

    #[test]
    fn layer_ranges() {
        assert_eq!(parse_layers("85").unwrap(), 85..86);
        assert_eq!(parse_layers("56-85").unwrap(), 56..86);
        assert!(parse_layers("9-3").is_err());
        assert!(parse_layers("x").is_err());
    }

    #[test]
    fn sweep_file_names() {
        assert_eq!(suffixed(Path::new("out/res.csv"), "10", true), PathBuf::from("out/res-10.csv"));
        assert_eq!(suffixed(Path::new("res.csv"), "10", false), PathBuf::from("res.csv"));
    }

    #[test]
    fn default_constraint_mode_follows_tau() {
        let cli = Cli::parse_from(["darcy-bddc", "solve", "--grid", "4,4", "--synthetic", "constant", "--splits", "2,2", "--tau", "inf,10"]);
        let Command::Solve(a) = cli.command else { panic!() };
        let cfgs = a.config.configs().unwrap();
        assert_eq!(cfgs.len(), 2);
        assert!(cfgs.iter().all(|c| c.constraints == ConstraintMode::Adaptive));
        let cli = Cli::parse_from(["darcy-bddc", "solve", "--grid", "4,4", "--synthetic", "constant", "--splits", "2,2", "--constraints", "initial", "--tau", "5"]);
        let Command::Solve(a) = cli.command else { panic!() };
        assert!(a.config.configs().is_err());
    }

    #[test]
    fn field_and_partition_are_exclusive() {
        let r = Cli::try_parse_from(["darcy-bddc", "solve", "--perm", "a", "--synthetic", "constant", "--splits", "2,2"]);
        assert!(r.is_err());
        let r = Cli::try_parse_from(["darcy-bddc", "solve", "--grid", "4,4", "--synthetic", "constant", "--partition", "p", "--splits", "2,2"]);
        assert!(r.is_err());
    }
}
