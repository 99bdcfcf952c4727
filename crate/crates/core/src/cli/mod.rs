//! Command-line front end. [`run`] returns the process exit code:
//! `0` optimal or valid, `2` usage, `3` solver or numerical verdict,
//! `4` input/output.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::error::Error;
use crate::linalg::qmx;
use crate::process::{is_process_matrix_with, ValidityReport, DEFAULT_EIGENVALUE_TOL, DEFAULT_EQUALITY_TOL};
use crate::sdpmodel::{dump_model, solve, Backend, ModelDump, SolveOptions, SolveStatus, DUMP_FORMAT};
use crate::strategies::{build, extract_storage, BuildOptions, CausalPath, CovarianceMode, StrategyKind};
use crate::verify::{mc_average_fidelity, reproduce_table, FidelityReport, TableOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICS: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "vnlearn",
    version,
    about = "Optimal storage and retrieval of unknown von Neumann measurements"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Solver tolerance [default: 1e-5]. `validate` uses it for every
    /// residual; without it, 1e-7 for equalities and 1e-9 eigenvalue slack.
    #[arg(long, env = "VNLEARN_TOL")]
    pub tol: Option<f64>,
    #[arg(long = "max-iter", default_value_t = 20_000)]
    pub max_iter: u32,
    /// Master seed for Haar sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when absent.
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// auto, ipm or admm.
    #[arg(long = "solver", default_value = "auto")]
    pub solver: Backend,
    /// Write the JSON conic-model dump here.
    #[arg(long = "dump-model")]
    pub dump_model: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one strategy model.
    Solve {
        #[arg(long, value_parser = parse_scheme)]
        scheme: StrategyKind,
        #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
        d: u32,
        #[arg(long = "N", alias = "n", value_parser = clap::value_parser!(u32).range(1..))]
        n: u32,
        /// Haar samples for the Monte Carlo cross-check; 0 skips it.
        #[arg(long = "mc-samples", default_value_t = 1000)]
        mc_samples: usize,
        #[arg(long, value_parser = parse_covariance, default_value = "subspace")]
        covariance: CovarianceMode,
        #[arg(long = "causal-path", value_parser = parse_causal_path, default_value = "auto")]
        causal_path: CausalPath,
        #[command(flatten)]
        common: Common,
    },
    /// Check the process-matrix conditions of a QMX1 file.
    Validate {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Solve every strategy for N = 1..N_max and compare with the references.
    Table(TableArgs),
    /// Same cells as `table`, one row per N for plotting.
    FigureData(TableArgs),
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..), default_value_t = 2)]
    pub d: u32,
    #[arg(long = "Nmax", alias = "n-max", value_parser = clap::value_parser!(u32).range(1..), default_value_t = 5)]
    pub n_max: u32,
    /// Concurrent cells; 0 lets the runtime decide.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long = "mc-samples", default_value_t = 0)]
    pub mc_samples: usize,
    #[command(flatten)]
    pub common: Common,
}

fn parse_scheme(s: &str) -> Result<StrategyKind, String> {
    s.parse()
}

fn parse_covariance(s: &str) -> Result<CovarianceMode, String> {
    match s {
        "subspace" => Ok(CovarianceMode::Subspace),
        "functionals" => Ok(CovarianceMode::Functionals),
        other => Err(format!("unknown covariance mode `{other}` (expected subspace or functionals)")),
    }
}

fn parse_causal_path(s: &str) -> Result<CausalPath, String> {
    match s {
        "auto" => Ok(CausalPath::Auto),
        "parity" => Ok(CausalPath::Parity),
        "projector" => Ok(CausalPath::Projector),
        other => Err(format!("unknown causal path `{other}` (expected auto, parity or projector)")),
    }
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            kind: "usage",
            message: message.into(),
        }
    }

    fn record(&self) -> String {
        json!({ "error": self.kind, "exit_code": self.code, "message": self.message }).to_string()
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Io(_) | Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => (EXIT_IO, "io"),
            Error::Solver(_) | Error::NotOptimal(_) => (EXIT_NUMERICS, "solver"),
            _ => (EXIT_USAGE, "usage"),
        };
        Self {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::from(Error::Io(e))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::from(Error::Io(e)))
        }
    }
}

#[derive(Serialize)]
struct DumpFile {
    format: &'static str,
    models: Vec<ModelDump>,
}

fn write_dump(path: Option<&Path>, models: Vec<ModelDump>) -> Result<(), Failure> {
    if let Some(p) = path {
        let text = serde_json::to_string_pretty(&DumpFile {
            format: DUMP_FORMAT,
            models,
        })
        .map_err(|e| Failure::from(Error::Json(e)))?;
        std::fs::write(p, text + "\n").map_err(|e| Failure::from(Error::Io(e)))?;
    }
    Ok(())
}

impl Common {
    /// The solver tolerance, checked.
    fn solver_tol(&self) -> Result<f64, Failure> {
        let tol = self.tol.unwrap_or(SolveOptions::default().tol);
        check_tol(tol)?;
        Ok(tol)
    }

    /// `(equality, eigenvalue)` bounds for the validator.
    fn validity_tols(&self) -> Result<(f64, f64), Failure> {
        match self.tol {
            Some(t) => {
                check_tol(t)?;
                Ok((t, t))
            }
            None => Ok((DEFAULT_EQUALITY_TOL, DEFAULT_EIGENVALUE_TOL)),
        }
    }
}

fn check_tol(tol: f64) -> Result<(), Failure> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Failure::usage(format!("tolerance must be positive, got {tol}")))
    }
}

#[derive(Serialize)]
struct StorageSummary {
    #[serde(flatten)]
    report: ValidityReport,
    trace: f64,
}

#[derive(Serialize)]
struct SolveSummary {
    scheme: StrategyKind,
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    status: SolveStatus,
    objective: Option<f64>,
    dual_objective: Option<f64>,
    backend: Backend,
    iterations: u32,
    primal_equality_residual: Option<f64>,
    min_eigenvalue: Option<f64>,
    removed_rows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    storage: Option<StorageSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    monte_carlo: Option<FidelityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
}

fn opt_csv(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.10}")).unwrap_or_default()
}

impl SolveSummary {
    fn to_csv(&self) -> String {
        let storage_valid = self.storage.as_ref().map(|s| s.report.valid.to_string()).unwrap_or_default();
        format!(
            "scheme,d,N,status,objective,dual_objective,backend,iterations,primal_equality_residual,min_eigenvalue,storage_valid,mc_mean,mc_std\n{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            self.scheme,
            self.d,
            self.n,
            self.status,
            opt_csv(self.objective),
            opt_csv(self.dual_objective),
            serde_json::to_value(self.backend).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default(),
            self.iterations,
            opt_csv(self.primal_equality_residual),
            opt_csv(self.min_eigenvalue),
            storage_valid,
            opt_csv(self.monte_carlo.as_ref().map(|m| m.mean)),
            opt_csv(self.monte_carlo.as_ref().map(|m| m.std)),
        )
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    scheme: StrategyKind,
    d: usize,
    n: usize,
    mc_samples: usize,
    covariance: CovarianceMode,
    causal_path: CausalPath,
    common: &Common,
) -> Result<i32, Failure> {
    let tol = common.solver_tol()?;
    let options = BuildOptions {
        covariance,
        causal_path,
    };
    let sm = build(scheme, d, n, &options)?;
    write_dump(
        common.dump_model.as_deref(),
        vec![dump_model(&format!("{scheme}-d{d}-N{n}"), &sm.model)?],
    )?;
    let result = solve(
        &sm.model,
        &SolveOptions {
            tol,
            max_iter: common.max_iter,
            backend: common.solver,
            verbose: false,
        },
    );
    let solved = !result.blocks.is_empty();
    let mut summary = SolveSummary {
        scheme,
        d,
        n,
        status: result.status,
        objective: solved.then_some(result.objective),
        dual_objective: result.dual_objective,
        backend: result.backend,
        iterations: result.iterations,
        primal_equality_residual: solved.then_some(result.residuals.primal_equality),
        min_eigenvalue: solved.then(|| result.residuals.min_eigenvalue()),
        removed_rows: result.removed_rows,
        storage: None,
        monte_carlo: None,
        message: result.message.clone(),
    };
    if result.is_optimal() {
        let w = extract_storage(&result, d, n)?;
        let report = w.validate(tol)?;
        summary.storage = Some(StorageSummary {
            trace: w.matrix().trace().re,
            report,
        });
        if mc_samples > 0 {
            let blocks = sm.choi_blocks(&result)?;
            summary.monte_carlo = Some(mc_average_fidelity(&blocks, mc_samples, common.seed)?.without_values());
        }
    }
    let text = match common.format {
        Format::Json => serde_json::to_string_pretty(&summary).map_err(|e| Failure::from(Error::Json(e)))? + "\n",
        Format::Csv => summary.to_csv(),
    };
    write_output(common.output.as_deref(), &text)?;
    if result.is_optimal() {
        Ok(EXIT_OK)
    } else {
        Err(Failure {
            code: EXIT_NUMERICS,
            kind: "solver",
            message: format!(
                "solver finished with status {}: {}",
                result.status,
                result.message.unwrap_or_default()
            ),
        })
    }
}

fn cmd_validate(file: &Path, common: &Common) -> Result<i32, Failure> {
    let (tol, eigenvalue_tol) = common.validity_tols()?;
    write_dump(common.dump_model.as_deref(), Vec::new())?;
    let m = qmx::read(file)?;
    if m.shape().len() % 2 != 0 {
        return Err(Failure::from(Error::InvalidShape(format!(
            "a process matrix needs input/output wire pairs, got {} subsystems",
            m.shape().len()
        ))));
    }
    let parties = m.shape().len() / 2;
    let report = is_process_matrix_with(&m, tol, eigenvalue_tol)?;
    let text = match common.format {
        Format::Json => {
            serde_json::to_string_pretty(&json!({
                "file": file.display().to_string(),
                "parties": parties,
                "report": report,
            }))
            .map_err(|e| Failure::from(Error::Json(e)))?
                + "\n"
        }
        Format::Csv => format!(
            "parties,projector_residual,trace_residual,psd_residual,min_eigenvalue,hermiticity_residual,valid\n{},{:.3e},{:.3e},{:.3e},{:.6e},{:.3e},{}\n",
            parties,
            report.projector_residual,
            report.trace_residual,
            report.psd_residual(),
            report.min_eigenvalue,
            report.hermiticity_residual,
            report.valid
        ),
    };
    write_output(common.output.as_deref(), &text)?;
    if report.valid {
        Ok(EXIT_OK)
    } else {
        Err(Failure {
            code: EXIT_NUMERICS,
            kind: "invalid",
            message: "not a process matrix within tolerance".into(),
        })
    }
}

fn cmd_table(args: &TableArgs, figure: bool) -> Result<i32, Failure> {
    let common = &args.common;
    let tol = common.solver_tol()?;
    let (d, n_max) = (args.d as usize, args.n_max as usize);
    if common.dump_model.is_some() {
        let mut dumps = Vec::new();
        for kind in StrategyKind::ALL {
            for n in 1..=n_max {
                let sm = build(kind, d, n, &BuildOptions::default())?;
                dumps.push(dump_model(&format!("{kind}-d{d}-N{n}"), &sm.model)?);
            }
        }
        write_dump(common.dump_model.as_deref(), dumps)?;
    }
    let table = reproduce_table(
        d,
        n_max,
        &TableOptions {
            solve: SolveOptions {
                tol,
                max_iter: common.max_iter,
                backend: common.solver,
                verbose: false,
            },
            jobs: args.jobs,
            mc_samples: args.mc_samples,
            seed: common.seed,
        },
    )?;
    let text = match (figure, common.format) {
        (false, Format::Json) => table.to_json()?,
        (false, Format::Csv) => table.to_csv(),
        (true, Format::Json) => table.figure_json()?,
        (true, Format::Csv) => table.figure_csv(),
    };
    write_output(common.output.as_deref(), &text)?;
    if table.all_pass() {
        Ok(EXIT_OK)
    } else {
        let failed: Vec<String> = table
            .cells
            .iter()
            .filter(|c| !c.pass)
            .map(|c| format!("{}/N={}", c.strategy, c.n))
            .collect();
        Err(Failure {
            code: EXIT_NUMERICS,
            kind: "table",
            message: format!("cells failed: {}", failed.join(", ")),
        })
    }
}

fn dispatch(cli: &Cli) -> Result<i32, Failure> {
    match &cli.command {
        Command::Solve {
            scheme,
            d,
            n,
            mc_samples,
            covariance,
            causal_path,
            common,
        } => cmd_solve(*scheme, *d as usize, *n as usize, *mc_samples, *covariance, *causal_path, common),
        Command::Validate { file, common } => cmd_validate(file, common),
        Command::Table(args) => cmd_table(args, false),
        Command::FigureData(args) => cmd_table(args, true),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Failures are reported on standard error as one JSON record.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return EXIT_OK;
            }
            let f = Failure::usage(e.to_string().trim_end().to_string());
            eprintln!("{}", f.record());
            return f.code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("{}", f.record());
            f.code
        }
    }
}
