//! Command-line front end: JSON problem files in, machine-readable
//! verdicts and solution artifacts out.
//!
//! Matrices travel as row-major lists of `[re, im]` pairs. Exit codes are
//! fixed for scripting: 0 feasible/ok, 2 no map found (stalled, budget
//! exhausted, infeasible, or precheck violation), 3 input error, 4 solution
//! residual above tolerance.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::choi_kraus::{choi_to_density, density_to_choi, ChoiMatrix};
use crate::hermlinalg::{eigh, inertia, CMatrix, HermitianMatrix, C64};
use crate::interpolation::{
    canonicalize, density_matrix, extract_solution, feasibility, prechecks,
    trace_preserving_constraints, FeasibilityResult, FeasibilityStatus, Problem, SolveOptions,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::single_pair::{minimal_rank, solve_single};
use crate::Error;

/// Environment variable consulted for the tolerance when neither the
/// command line nor the problem file sets one.
pub const TOL_ENV_VAR: &str = "CPINTERP_TOL";

#[derive(Parser)]
#[command(
    name = "cpinterp",
    version,
    about = "Decide and construct completely positive maps interpolating Hermitian matrix pairs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether a CP map with phi(A_nu) = B_nu exists.
    Check(ProblemArgs),
    /// Decide feasibility and write a solution artifact.
    Solve(SolveArgs),
    /// Single-pair minimal Kraus rank and construction (requires |A| = 1).
    Single(ProblemArgs),
    /// Report the inertia of every matrix in the file.
    Inertia(ProblemArgs),
    /// Convert between density and Choi matrices (output is always JSON).
    Choi(ChoiArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// Problem file (JSON).
    path: PathBuf,
    /// Feasibility tolerance; overrides the file and CPINTERP_TOL.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration budget for the feasibility search.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Recorded in reports for reproducibility bookkeeping.
    #[arg(long)]
    seed: Option<u64>,
    /// Require the map to be trace preserving.
    #[arg(long)]
    trace_preserving: bool,
    /// Require phi(I_n) = I_k.
    #[arg(long)]
    unital: bool,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: ProblemArgs,
    /// Where to write the solution artifact; defaults to the input path
    /// with extension "solution.json".
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ChoiArgs {
    /// Matrix file (JSON: {n, k, matrix}).
    path: PathBuf,
    /// Conversion direction.
    #[arg(long, value_enum)]
    direction: Direction,
    /// Write the result here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    DensityToChoi,
    ChoiToDensity,
}

/// A problem instance on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub k: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<[f64; 2]>>,
    /// Required by check, solve, and single; optional for inertia.
    #[serde(rename = "B", default)]
    pub b: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default)]
    pub trace_preserving: bool,
    #[serde(default)]
    pub unital: bool,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// A single matrix on disk, for the choi conversion command.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub n: usize,
    pub k: usize,
    pub matrix: Vec<[f64; 2]>,
}

/// Solution artifact written by the solve command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionFile {
    pub n: usize,
    pub k: usize,
    /// Choi matrix, kn x kn row-major.
    pub choi: Vec<[f64; 2]>,
    /// Kraus elements, each n x k row-major.
    pub kraus: Vec<Vec<[f64; 2]>>,
    /// Coordinates of the feasible point minus the density matrix in the
    /// perturbation basis.
    pub p_coords: Vec<f64>,
    /// Interpolation residuals against the input pairs.
    pub residuals: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace_residual: Option<f64>,
}

#[derive(Serialize)]
struct CheckReport {
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    prechecks: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<String>,
}

#[derive(Serialize)]
struct SolveReport {
    status: &'static str,
    out: String,
    kraus_count: usize,
    max_residual: f64,
    iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace_residual: Option<f64>,
}

#[derive(Serialize)]
struct SingleReport {
    minimal_rank: usize,
    n: usize,
    k: usize,
    kraus: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize)]
struct InertiaTriple {
    kappa_minus: usize,
    kappa_zero: usize,
    kappa_plus: usize,
}

#[derive(Serialize)]
struct InertiaReport {
    #[serde(rename = "A")]
    a: Vec<InertiaTriple>,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    b: Option<Vec<InertiaTriple>>,
}

#[derive(Debug)]
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }

    fn from_internal(err: Error) -> Self {
        Self {
            code: 3,
            message: err.to_string(),
        }
    }
}

/// Parses the arguments (the first item is the program name), runs the
/// selected command, and returns the process exit code. All verdicts go to
/// `stdout`; error messages go to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let rendered = err.render().to_string();
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let _ = write!(stdout, "{rendered}");
                return 0;
            }
            let _ = write!(stderr, "{rendered}");
            return 3;
        }
    };
    let result = match cli.command {
        Command::Check(args) => cmd_check(&args, stdout),
        Command::Solve(args) => cmd_solve(&args, stdout),
        Command::Single(args) => cmd_single(&args, stdout),
        Command::Inertia(args) => cmd_inertia(&args, stdout),
        Command::Choi(args) => cmd_choi(&args, stdout),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            let _ = writeln!(stderr, "error: {}", err.message);
            err.code
        }
    }
}

fn load_problem_file(path: &Path) -> Result<ProblemFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("{} is not a valid problem file: {e}", path.display())))
}

fn decode_matrix(
    data: &[[f64; 2]],
    rows: usize,
    cols: usize,
    what: &str,
    index: usize,
) -> Result<CMatrix, CliError> {
    if data.len() != rows * cols {
        return Err(CliError::input(format!(
            "{what}[{index}] must have {rows}*{cols} = {} entries, got {}",
            rows * cols,
            data.len()
        )));
    }
    Ok(CMatrix::from_shape_fn((rows, cols), |(i, j)| {
        let [re, im] = data[i * cols + j];
        C64::new(re, im)
    }))
}

fn encode_matrix(m: &CMatrix) -> Vec<[f64; 2]> {
    let (rows, cols) = m.dim();
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            out.push([m[[i, j]].re, m[[i, j]].im]);
        }
    }
    out
}

/// Tolerance and budget resolution: command line over file over the
/// CPINTERP_TOL environment variable over the built-in defaults.
fn resolve_options(file: &ProblemFile, args: &ProblemArgs) -> Result<SolveOptions, CliError> {
    let env_tol = match std::env::var(TOL_ENV_VAR) {
        Ok(text) => Some(text.parse::<f64>().map_err(|_| {
            CliError::input(format!("{TOL_ENV_VAR} must be a number, got {text:?}"))
        })?),
        Err(_) => None,
    };
    let tol = args.tol.or(file.tol).or(env_tol).unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0) {
        return Err(CliError::input(format!("tolerance must be positive, got {tol}")));
    }
    Ok(SolveOptions {
        tol,
        max_iter: args.max_iter.or(file.max_iter).unwrap_or(DEFAULT_MAX_ITER),
        seed: args.seed.or(file.seed).unwrap_or(0),
    })
}

fn build_problem(file: &ProblemFile, args: &ProblemArgs) -> Result<Problem, CliError> {
    let b_data = file
        .b
        .as_ref()
        .ok_or_else(|| CliError::input("field B is required by this command"))?;
    if file.a.len() != b_data.len() {
        return Err(CliError::input(format!(
            "A and B must have the same length, got {} and {}",
            file.a.len(),
            b_data.len()
        )));
    }
    let a = file
        .a
        .iter()
        .enumerate()
        .map(|(i, m)| decode_matrix(m, file.n, file.n, "A", i))
        .collect::<Result<Vec<_>, _>>()?;
    let b = b_data
        .iter()
        .enumerate()
        .map(|(i, m)| decode_matrix(m, file.k, file.k, "B", i))
        .collect::<Result<Vec<_>, _>>()?;
    Problem::new(
        file.n,
        file.k,
        a,
        b,
        file.trace_preserving || args.trace_preserving,
        file.unital || args.unital,
    )
    .map_err(|e| CliError::input(e.to_string()))
}

enum PipelineVerdict {
    Feasible {
        result: FeasibilityResult,
        canonical: crate::interpolation::CanonicalProblem,
        density: crate::interpolation::DensityData,
    },
    NotFound(FeasibilityResult),
    Prechecks(Vec<String>),
    Inconsistent(String),
}

fn run_pipeline(problem: &Problem, opts: &SolveOptions) -> Result<PipelineVerdict, CliError> {
    let canonical = match canonicalize(problem, opts.tol) {
        Ok(c) => c,
        Err(Error::InconsistentData { detail }) => {
            return Ok(PipelineVerdict::Inconsistent(detail))
        }
        Err(e) => return Err(CliError::from_internal(e)),
    };
    let density = density_matrix(&canonical);
    let violations = prechecks(&canonical, &density);
    if !violations.is_empty() {
        return Ok(PipelineVerdict::Prechecks(
            violations.iter().map(|v| v.to_string()).collect(),
        ));
    }
    let constraints = canonical
        .trace_preserving
        .then(|| trace_preserving_constraints(&canonical, &density));
    let result = feasibility(&density, constraints.as_deref(), opts)
        .map_err(CliError::from_internal)?;
    if result.status == FeasibilityStatus::Feasible {
        Ok(PipelineVerdict::Feasible {
            result,
            canonical,
            density,
        })
    } else {
        Ok(PipelineVerdict::NotFound(result))
    }
}

fn emit<T: Serialize>(stdout: &mut dyn Write, value: &T) {
    let text = serde_json::to_string_pretty(value).expect("report serialization cannot fail");
    let _ = writeln!(stdout, "{text}");
}

fn report_not_found(
    verdict: &PipelineVerdict,
    format: Format,
    stdout: &mut dyn Write,
) -> i32 {
    match verdict {
        PipelineVerdict::NotFound(result) => {
            let status = match result.status {
                FeasibilityStatus::GapStalled => "gap-stalled",
                _ => "iteration-limit",
            };
            match format {
                Format::Json => emit(
                    stdout,
                    &CheckReport {
                        status,
                        lambda_min: Some(result.lambda_min),
                        gap: Some(result.gap),
                        iterations: Some(result.iterations),
                        prechecks: Vec::new(),
                        detail: None,
                    },
                ),
                Format::Text => {
                    let line = match result.status {
                        FeasibilityStatus::GapStalled => format!(
                            "no PSD point found; stalled gap = {:.6e} after {} iterations",
                            result.gap, result.iterations
                        ),
                        _ => format!(
                            "no PSD point found within {} iterations (gap {:.6e})",
                            result.iterations, result.gap
                        ),
                    };
                    let _ = writeln!(stdout, "{line}");
                }
            }
            2
        }
        PipelineVerdict::Prechecks(lines) => {
            match format {
                Format::Json => emit(
                    stdout,
                    &CheckReport {
                        status: "precheck-failed",
                        lambda_min: None,
                        gap: None,
                        iterations: None,
                        prechecks: lines.clone(),
                        detail: None,
                    },
                ),
                Format::Text => {
                    let _ = writeln!(stdout, "necessary conditions violated:");
                    for line in lines {
                        let _ = writeln!(stdout, "  - {line}");
                    }
                }
            }
            2
        }
        PipelineVerdict::Inconsistent(detail) => {
            match format {
                Format::Json => emit(
                    stdout,
                    &CheckReport {
                        status: "inconsistent-data",
                        lambda_min: None,
                        gap: None,
                        iterations: None,
                        prechecks: Vec::new(),
                        detail: Some(detail.clone()),
                    },
                ),
                Format::Text => {
                    let _ = writeln!(stdout, "inconsistent data: {detail}");
                }
            }
            2
        }
        PipelineVerdict::Feasible { .. } => unreachable!("feasible verdicts are not failures"),
    }
}

fn cmd_check(args: &ProblemArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let file = load_problem_file(&args.path)?;
    let opts = resolve_options(&file, args)?;
    let problem = build_problem(&file, args)?;
    let verdict = run_pipeline(&problem, &opts)?;
    if let PipelineVerdict::Feasible { result, .. } = &verdict {
        match args.format {
            Format::Json => emit(
                stdout,
                &CheckReport {
                    status: "feasible",
                    lambda_min: Some(result.lambda_min),
                    gap: Some(result.gap),
                    iterations: Some(result.iterations),
                    prechecks: Vec::new(),
                    detail: None,
                },
            ),
            Format::Text => {
                let _ = writeln!(
                    stdout,
                    "feasible: lambda_min = {:.6e}, gap = {:.6e}, {} iterations",
                    result.lambda_min, result.gap, result.iterations
                );
            }
        }
        return Ok(0);
    }
    Ok(report_not_found(&verdict, args.format, stdout))
}

fn cmd_solve(args: &SolveArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let file = load_problem_file(&args.common.path)?;
    let opts = resolve_options(&file, &args.common)?;
    let problem = build_problem(&file, &args.common)?;
    let verdict = run_pipeline(&problem, &opts)?;
    let PipelineVerdict::Feasible {
        result,
        canonical,
        density,
    } = verdict
    else {
        return Ok(report_not_found(&verdict, args.common.format, stdout));
    };
    let solution = match extract_solution(&density, &result, &canonical, &opts) {
        Ok(s) => s,
        Err(Error::InconsistentData { detail }) => {
            return Err(CliError {
                code: 4,
                message: detail,
            })
        }
        Err(e) => return Err(CliError::from_internal(e)),
    };
    let out_path = args.out.clone().unwrap_or_else(|| {
        args.common.path.with_extension("solution.json")
    });
    let artifact = SolutionFile {
        n: problem.n,
        k: problem.k,
        choi: encode_matrix(solution.choi.as_matrix()),
        kraus: solution.kraus.ops().iter().map(encode_matrix).collect(),
        p_coords: result.p.clone(),
        residuals: solution.residuals.clone(),
        trace_residual: solution.trace_residual,
    };
    let text = serde_json::to_string_pretty(&artifact).expect("artifact serialization cannot fail");
    std::fs::write(&out_path, format!("{text}\n")).map_err(|e| {
        CliError::input(format!("cannot write {}: {e}", out_path.display()))
    })?;
    let max_residual = solution.residuals.iter().fold(0.0f64, |a, &b| a.max(b));
    match args.common.format {
        Format::Json => emit(
            stdout,
            &SolveReport {
                status: "solved",
                out: out_path.display().to_string(),
                kraus_count: solution.kraus.len(),
                max_residual,
                iterations: result.iterations,
                trace_residual: solution.trace_residual,
            },
        ),
        Format::Text => {
            let _ = writeln!(
                stdout,
                "solution written to {}: {} Kraus elements, max residual {:.6e}",
                out_path.display(),
                solution.kraus.len(),
                max_residual
            );
        }
    }
    Ok(0)
}

fn cmd_single(args: &ProblemArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let file = load_problem_file(&args.path)?;
    let opts = resolve_options(&file, args)?;
    let problem = build_problem(&file, args)?;
    if problem.a.len() != 1 {
        return Err(CliError::input(format!(
            "the single command needs exactly one pair, got {}",
            problem.a.len()
        )));
    }
    let a = HermitianMatrix::new(problem.a[0].clone())
        .map_err(|e| CliError::input(format!("A[0]: {e}")))?;
    let b = HermitianMatrix::new(problem.b[0].clone())
        .map_err(|e| CliError::input(format!("B[0]: {e}")))?;
    let rank = match minimal_rank(&a, &b, opts.tol) {
        Ok(r) => r,
        Err(Error::SinglePairInfeasible { detail }) => {
            match args.format {
                Format::Json => emit(
                    stdout,
                    &CheckReport {
                        status: "infeasible",
                        lambda_min: None,
                        gap: None,
                        iterations: None,
                        prechecks: Vec::new(),
                        detail: Some(detail.clone()),
                    },
                ),
                Format::Text => {
                    let _ = writeln!(stdout, "infeasible: {detail}");
                }
            }
            return Ok(2);
        }
        Err(e) => return Err(CliError::from_internal(e)),
    };
    let set = solve_single(&a, &b, opts.tol).map_err(CliError::from_internal)?;
    match args.format {
        Format::Json => emit(
            stdout,
            &SingleReport {
                minimal_rank: rank,
                n: problem.n,
                k: problem.k,
                kraus: set.ops().iter().map(encode_matrix).collect(),
            },
        ),
        Format::Text => {
            let _ = writeln!(
                stdout,
                "minimal rank {rank}; constructed {} Kraus element(s)",
                set.len()
            );
        }
    }
    Ok(0)
}

fn cmd_inertia(args: &ProblemArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let file = load_problem_file(&args.path)?;
    let opts = resolve_options(&file, args)?;
    let triple_of = |m: &CMatrix, what: &str, index: usize| -> Result<InertiaTriple, CliError> {
        let h = HermitianMatrix::new(m.clone())
            .map_err(|e| CliError::input(format!("{what}[{index}]: {e}")))?;
        let inert = inertia(&h, opts.tol).map_err(CliError::from_internal)?;
        Ok(InertiaTriple {
            kappa_minus: inert.kappa_minus,
            kappa_zero: inert.kappa_zero,
            kappa_plus: inert.kappa_plus,
        })
    };
    let mut a_triples = Vec::new();
    for (i, data) in file.a.iter().enumerate() {
        let m = decode_matrix(data, file.n, file.n, "A", i)?;
        a_triples.push(triple_of(&m, "A", i)?);
    }
    let b_triples = match &file.b {
        Some(list) => {
            let mut out = Vec::new();
            for (i, data) in list.iter().enumerate() {
                let m = decode_matrix(data, file.k, file.k, "B", i)?;
                out.push(triple_of(&m, "B", i)?);
            }
            Some(out)
        }
        None => None,
    };
    match args.format {
        Format::Json => emit(
            stdout,
            &InertiaReport {
                a: a_triples,
                b: b_triples,
            },
        ),
        Format::Text => {
            for (i, t) in a_triples.iter().enumerate() {
                let _ = writeln!(
                    stdout,
                    "A[{i}]: (kappa_minus, kappa_zero, kappa_plus) = ({}, {}, {})",
                    t.kappa_minus, t.kappa_zero, t.kappa_plus
                );
            }
            for (i, t) in b_triples.iter().flatten().enumerate() {
                let _ = writeln!(
                    stdout,
                    "B[{i}]: (kappa_minus, kappa_zero, kappa_plus) = ({}, {}, {})",
                    t.kappa_minus, t.kappa_zero, t.kappa_plus
                );
            }
        }
    }
    Ok(0)
}

fn cmd_choi(args: &ChoiArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(&args.path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", args.path.display())))?;
    let file: MatrixFile = serde_json::from_str(&text).map_err(|e| {
        CliError::input(format!("{} is not a valid matrix file: {e}", args.path.display()))
    })?;
    let dim = file.n * file.k;
    let matrix = decode_matrix(&file.matrix, dim, dim, "matrix", 0)?;
    let converted = match args.direction {
        Direction::DensityToChoi => {
            let h = HermitianMatrix::new(matrix)
                .map_err(|e| CliError::input(format!("matrix: {e}")))?;
            density_to_choi(&h, file.n, file.k)
                .map_err(CliError::from_internal)?
                .into_matrix()
        }
        Direction::ChoiToDensity => {
            let choi = ChoiMatrix::new(file.n, file.k, matrix)
                .map_err(|e| CliError::input(format!("matrix: {e}")))?;
            choi_to_density(&choi)
                .map_err(CliError::from_internal)?
                .into_matrix()
        }
    };
    let out_file = MatrixFile {
        n: file.n,
        k: file.k,
        matrix: encode_matrix(&converted),
    };
    match &args.out {
        Some(path) => {
            let text =
                serde_json::to_string_pretty(&out_file).expect("serialization cannot fail");
            std::fs::write(path, format!("{text}\n"))
                .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
        }
        None => emit(stdout, &out_file),
    }
    Ok(0)
}

/// Reads a solution artifact back; used by tests and downstream tooling.
pub fn read_solution_file(path: &Path) -> Result<SolutionFile, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::InconsistentData {
        detail: format!("cannot read {}: {e}", path.display()),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::InconsistentData {
        detail: format!("{} is not a solution artifact: {e}", path.display()),
    })
}

/// Smallest eigenvalue of a matrix file's payload; kept here so scripted
/// checks of emitted artifacts do not need a second tool.
pub fn lambda_min_of(matrix: &CMatrix) -> Result<f64, Error> {
    let h = HermitianMatrix::new(matrix.clone())?;
    Ok(eigh(&h)?.eigenvalues.first().copied().unwrap_or(0.0))
}
