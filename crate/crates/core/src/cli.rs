// SPDX-License-Identifier: Apache-2.0

//! Command-line front end.
//!
//! Every report is a JSON object carrying the result fields next to
//! `version`, `seed`, `grid`, `tolerances` and `c_G`; CSV output is offered
//! for tabular results. Exit status is 0 on success, 2 for invalid input
//! and 3 for numerical failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{self, Tolerances, C_G};
use crate::energy::{energy_first_derivative_trace, energy_profile, energy_second_derivative, FlowLine};
use crate::error::Error;
use crate::flow::{balance, FlowOptions};
use crate::lie::{mat_exp, random_generator};
use crate::moment::{gram_matrix, r_bounded_diagnostic};
use crate::sections::{QuadratureGrid, SectionBasis};
use crate::spectral::{
    inequality_report, q_gram, remark2_table, scaling_experiment, sigma_norm_sq, Assembly, GridPolicy, QOptions,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "balancedflow", version, about = "Balanced embeddings of CP¹ under O(k): moment map, Deligne energy and the spectrum of Q_z")]
pub struct Cli {
    /// Quadrature tolerance of the doubled-grid self-check. Give it before
    /// the subcommand; `balance --tol` is the flow target.
    #[arg(long = "tol", value_name = "T", default_value_t = config::DEFAULT_QUAD_TOL)]
    pub quad_tol: f64,

    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Gauss–Legendre nodes in u = r²/(1+r²).
    #[arg(long, global = true, value_name = "N")]
    pub radial: Option<usize>,
    /// Uniform angular nodes.
    #[arg(long, global = true, value_name = "M")]
    pub angular: Option<usize>,
    #[arg(long, global = true, value_name = "S", default_value_t = 0)]
    pub seed: u64,
    /// Report destination; standard output when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads for grid integration.
    #[arg(long, global = true, env = "BALANCEDFLOW_THREADS", value_name = "N")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct BasisArgs {
    /// Power of the line bundle; optional when a basis file is given.
    #[arg(long)]
    pub k: Option<usize>,
    /// Basis file `{"k", "coeffs": [[{"re","im"}]]}`.
    #[arg(long, alias = "input", value_name = "FILE")]
    pub basis: Option<PathBuf>,
    /// Start from exp(A)·identity with A a seeded random generator of this
    /// Hilbert–Schmidt norm.
    #[arg(long, value_name = "NORM")]
    pub perturb: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the gradient flow to a balanced basis.
    Balance {
        #[command(flatten)]
        basis: BasisArgs,
        /// Target Hilbert–Schmidt norm of the moment map.
        #[arg(long, default_value_t = config::FLOW_TOL)]
        tol: f64,
        #[arg(long, default_value_t = config::FLOW_MAX_ITER)]
        max_iter: usize,
        /// Initial step tried at every iteration.
        #[arg(long, default_value_t = config::FLOW_STEP)]
        step: f64,
        /// Also write the balanced basis to this file.
        #[arg(long, value_name = "FILE")]
        basis_out: Option<PathBuf>,
    },
    /// Gram matrix, moment map and bounded-geometry diagnostic.
    Moment {
        #[command(flatten)]
        basis: BasisArgs,
    },
    /// Spectrum of Q_z and Λ_z.
    Spectrum {
        #[command(flatten)]
        basis: BasisArgs,
        /// Kernel threshold relative to max(λ_max, 1).
        #[arg(long, default_value_t = config::KERNEL_THRESHOLD)]
        threshold: f64,
        /// Seeded directions for the norm-inequality constants (0 skips).
        #[arg(long, default_value_t = 0)]
        samples: usize,
        #[arg(long, value_enum, default_value_t = AssemblyArg::Auto)]
        assembly: AssemblyArg,
    },
    /// Λ_z of balanced embeddings over a range of k.
    Scaling {
        #[arg(long, default_value_t = 2)]
        k_min: usize,
        #[arg(long, default_value_t = 16)]
        k_max: usize,
        #[arg(long, default_value_t = 1)]
        k_step: usize,
    },
    /// Finite-difference checks of the energy derivatives.
    EnergyCheck {
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        /// Norm of the random perturbation of the balanced basis.
        #[arg(long, default_value_t = 0.3)]
        perturb: f64,
    },
    /// Norms of the quadratic diagonal direction ξ and their leading coefficients.
    Remark2 {
        /// Uses k = 8, 16, 32, … up to this value.
        #[arg(long, default_value_t = 64)]
        k_max: usize,
        /// Explicit comma-separated k values instead of powers of two.
        #[arg(long, value_delimiter = ',')]
        k_list: Option<Vec<usize>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AssemblyArg {
    Auto,
    General,
    WeightBlocks,
}

/// Failure of a command: the exit status and a message for standard error.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_INVALID },
            message: e.to_string(),
        }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INVALID,
        message: message.into(),
    }
}

/// Rendered report plus the status to exit with once it is written.
struct Outcome {
    body: Vec<u8>,
    code: i32,
    message: Option<String>,
}

impl Outcome {
    fn ok(body: Vec<u8>) -> Self {
        Outcome {
            body,
            code: EXIT_OK,
            message: None,
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let rendered = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return code;
        }
    };
    let result = match cli.global.threads {
        Some(0) => Err(invalid("--threads must be positive")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(invalid(format!("cannot start {n} worker threads: {e}"))),
        },
        None => execute(&cli),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            return f.code;
        }
    };
    let written = match &cli.global.output {
        Some(path) => std::fs::write(path, &outcome.body).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => stdout.write_all(&outcome.body).map_err(|e| e.to_string()),
    };
    if let Err(message) = written {
        let _ = writeln!(stderr, "error: {message}");
        return EXIT_INVALID;
    }
    if let Some(message) = outcome.message {
        let _ = writeln!(stderr, "error: {message}");
    }
    outcome.code
}

fn execute(cli: &Cli) -> Result<Outcome, Failure> {
    if !(cli.quad_tol > 0.0 && cli.quad_tol.is_finite()) {
        return Err(invalid(format!("--tol must be positive, got {}", cli.quad_tol)));
    }
    match &cli.command {
        Command::Balance {
            basis,
            tol,
            max_iter,
            step,
            basis_out,
        } => cmd_balance(cli, basis, *tol, *max_iter, *step, basis_out.as_ref()),
        Command::Moment { basis } => cmd_moment(cli, basis),
        Command::Spectrum {
            basis,
            threshold,
            samples,
            assembly,
        } => cmd_spectrum(cli, basis, *threshold, *samples, *assembly),
        Command::Scaling { k_min, k_max, k_step } => cmd_scaling(cli, *k_min, *k_max, *k_step),
        Command::EnergyCheck { k, samples, perturb } => cmd_energy_check(cli, *k, *samples, *perturb),
        Command::Remark2 { k_max, k_list } => cmd_remark2(cli, *k_max, k_list.as_deref()),
    }
}

fn single_grid(cli: &Cli, k: usize) -> Result<QuadratureGrid, Failure> {
    Ok(QuadratureGrid::new(
        cli.global.radial.unwrap_or(config::DEFAULT_RADIAL),
        cli.global.angular.unwrap_or(config::default_angular(k)),
        cli.quad_tol,
    )?)
}

fn policy(cli: &Cli) -> GridPolicy {
    GridPolicy {
        scaling: true,
        radial: cli.global.radial,
        angular: cli.global.angular,
        tol: cli.quad_tol,
    }
}

fn tolerances(cli: &Cli) -> Tolerances {
    Tolerances {
        quadrature: cli.quad_tol,
        ..Tolerances::default()
    }
}

/// Reproducibility block merged into every JSON report.
fn meta(cli: &Cli, grid: Value, tolerances: &Tolerances) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("seed".into(), json!(cli.global.seed));
    m.insert("grid".into(), grid);
    m.insert("tolerances".into(), json!(tolerances));
    m.insert("c_G".into(), json!(C_G));
    m.insert("threads".into(), json!(cli.global.threads));
    m
}

fn render_json(result: impl Serialize, meta: Map<String, Value>) -> Result<Vec<u8>, Failure> {
    let mut obj = match serde_json::to_value(result).map_err(Error::from)? {
        Value::Object(o) => o,
        other => {
            let mut o = Map::new();
            o.insert("result".into(), other);
            o
        }
    };
    for (key, value) in meta {
        obj.insert(key, value);
    }
    let mut out = serde_json::to_vec_pretty(&Value::Object(obj)).map_err(Error::from)?;
    out.push(b'\n');
    Ok(out)
}

fn render_csv<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| invalid(e.to_string()))?;
    }
    w.into_inner().map_err(|e| invalid(e.to_string()))
}

fn load_basis(cli: &Cli, args: &BasisArgs, default_perturb: f64) -> Result<SectionBasis, Failure> {
    let basis = match &args.basis {
        Some(path) => {
            if args.perturb.is_some() {
                return Err(invalid("--perturb cannot be combined with a basis file"));
            }
            let b = SectionBasis::read(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            if let Some(k) = args.k {
                if k != b.k() {
                    return Err(invalid(format!("--k {k} disagrees with k = {} in {}", b.k(), path.display())));
                }
            }
            b
        }
        None => {
            let k = args.k.ok_or_else(|| invalid("either --k or --basis is required"))?;
            if k == 0 {
                return Err(invalid("--k must be positive"));
            }
            let size = args.perturb.unwrap_or(default_perturb);
            if !(size >= 0.0 && size.is_finite()) {
                return Err(invalid(format!("--perturb must be a non-negative number, got {size}")));
            }
            let identity = SectionBasis::identity(k);
            if size == 0.0 {
                identity
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(cli.global.seed);
                identity.transformed(&mat_exp(&random_generator(k + 1, &mut rng), size))?
            }
        }
    };
    Ok(basis)
}

#[derive(Serialize)]
struct TraceRow {
    iter: usize,
    residual: f64,
    step_used: f64,
}

fn trace_rows(trace: &[f64], steps: &[f64]) -> Vec<TraceRow> {
    trace
        .iter()
        .enumerate()
        .map(|(i, &r)| TraceRow {
            iter: i,
            residual: r,
            step_used: if i == 0 { 0.0 } else { steps[i - 1] },
        })
        .collect()
}

fn cmd_balance(
    cli: &Cli,
    args: &BasisArgs,
    tol: f64,
    max_iter: usize,
    step: f64,
    basis_out: Option<&PathBuf>,
) -> Result<Outcome, Failure> {
    let start = load_basis(cli, args, 0.5)?;
    let grid = single_grid(cli, start.k())?;
    let opts = FlowOptions {
        step,
        tol,
        max_iter,
        ..FlowOptions::default()
    };
    let tols = Tolerances {
        flow_tol: tol,
        ..tolerances(cli)
    };
    let m = meta(cli, json!(grid.config()), &tols);
    let out = match balance(&start, &opts, &grid) {
        Ok(out) => out,
        Err(Error::MaxIterExceeded { max_iter, residual, trace }) => {
            let body = match cli.global.format {
                Format::Csv => render_csv(trace_rows(&trace, &vec![f64::NAN; trace.len()]))?,
                Format::Json => render_json(
                    json!({ "k": start.k(), "converged": false, "iterations": max_iter, "residual": residual, "trace": trace }),
                    m,
                )?,
            };
            return Ok(Outcome {
                body,
                code: EXIT_NUMERICAL,
                message: Some(Error::MaxIterExceeded { max_iter, residual, trace: Vec::new() }.to_string()),
            });
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(path) = basis_out {
        out.basis.write(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    }
    let rows = trace_rows(&out.trace, &out.steps);
    let body = match cli.global.format {
        Format::Csv => render_csv(rows)?,
        Format::Json => render_json(
            json!({
                "k": start.k(),
                "converged": true,
                "iterations": out.iterations(),
                "residual": out.residual(),
                "step": step,
                "max_iter": max_iter,
                "trace": rows,
                "basis": out.basis.to_json(),
            }),
            m,
        )?,
    };
    Ok(Outcome::ok(body))
}

#[derive(Serialize)]
struct GramEntry {
    row: usize,
    col: usize,
    re: f64,
    im: f64,
}

fn cmd_moment(cli: &Cli, args: &BasisArgs) -> Result<Outcome, Failure> {
    let basis = load_basis(cli, args, 0.0)?;
    let grid = single_grid(cli, basis.k())?;
    let report = gram_matrix(&basis, &grid)?;
    let body = match cli.global.format {
        Format::Csv => {
            let n = basis.dim();
            render_csv((0..n).flat_map(|r| {
                let g = &report.gram;
                (0..n).map(move |c| GramEntry {
                    row: r,
                    col: c,
                    re: g[(r, c)].re,
                    im: g[(r, c)].im,
                })
            }))?
        }
        Format::Json => {
            let (r_min, r_max) = r_bounded_diagnostic(&basis, &grid);
            let mut obj = match serde_json::to_value(report.to_json()).map_err(Error::from)? {
                Value::Object(o) => o,
                _ => unreachable!("gram report serializes to an object"),
            };
            obj.insert("trace".into(), json!(report.trace()));
            obj.insert("r_min".into(), json!(r_min));
            obj.insert("r_max".into(), json!(r_max));
            render_json(Value::Object(obj), meta(cli, json!(grid.config()), &tolerances(cli)))?
        }
    };
    Ok(Outcome::ok(body))
}

#[derive(Serialize)]
struct EigenRow {
    index: usize,
    eigenvalue: f64,
}

fn cmd_spectrum(
    cli: &Cli,
    args: &BasisArgs,
    threshold: f64,
    samples: usize,
    assembly: AssemblyArg,
) -> Result<Outcome, Failure> {
    let basis = load_basis(cli, args, 0.0)?;
    let grid = single_grid(cli, basis.k())?;
    let opts = QOptions {
        threshold,
        assembly: match assembly {
            AssemblyArg::Auto => Assembly::Auto,
            AssemblyArg::General => Assembly::General,
            AssemblyArg::WeightBlocks => Assembly::WeightBlocks,
        },
        generator_norms: true,
    };
    let mut report = q_gram(&basis, &grid, &opts)?;
    if samples > 0 && basis.k() >= 2 {
        report.inequality = Some(inequality_report(&basis, &grid, samples, cli.global.seed)?);
    }
    let tols = Tolerances {
        kernel_threshold: threshold,
        ..tolerances(cli)
    };
    let body = match cli.global.format {
        Format::Csv => render_csv(report.eigenvalues.iter().enumerate().map(|(index, &eigenvalue)| EigenRow {
            index,
            eigenvalue,
        }))?,
        Format::Json => render_json(&report, meta(cli, json!(grid.config()), &tols))?,
    };
    // k = 1 is degenerate by construction; anywhere else it is a failure
    if report.is_degenerate() && basis.k() >= 2 {
        return Ok(Outcome {
            body,
            code: EXIT_NUMERICAL,
            message: Some(report.require_lambda().unwrap_err().to_string()),
        });
    }
    Ok(Outcome::ok(body))
}

#[derive(Serialize)]
struct ScalingCsvRow {
    k: usize,
    lambda_z: Option<f64>,
    lambda_over_k2: Option<f64>,
    lambda_over_k4: Option<f64>,
    slope_running: Option<f64>,
}

fn cmd_scaling(cli: &Cli, k_min: usize, k_max: usize, k_step: usize) -> Result<Outcome, Failure> {
    if k_step == 0 || k_min > k_max {
        return Err(invalid("need k-min <= k-max and a positive k-step"));
    }
    let ks: Vec<usize> = (k_min..=k_max).step_by(k_step).collect();
    let policy = policy(cli);
    let mut table = scaling_experiment(&ks, &policy, cli.global.seed)?;
    let body = match cli.global.format {
        Format::Csv => render_csv(table.rows.iter().map(|r| ScalingCsvRow {
            k: r.k,
            lambda_z: r.lambda_z,
            lambda_over_k2: r.lambda_over_k2,
            lambda_over_k4: r.lambda_over_k4,
            slope_running: r.slope_running,
        }))?,
        Format::Json => {
            table.remark2 = Some(remark2_table(&ks, &policy)?);
            render_json(&table, meta(cli, json!(policy), &tolerances(cli)))?
        }
    };
    Ok(Outcome::ok(body))
}

#[derive(Debug, Clone, Copy, Serialize)]
struct EnergyCheck {
    k: usize,
    seed: u64,
    samples: usize,
    perturb: f64,
    grad_rel_err: f64,
    convexity_min: f64,
    #[serde(rename = "second_vs_Q_rel_err")]
    second_vs_q_rel_err: f64,
}

/// Sample parameters at which convexity is probed.
const CONVEXITY_TIMES: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

fn cmd_energy_check(cli: &Cli, k: usize, samples: usize, perturb: f64) -> Result<Outcome, Failure> {
    if k == 0 || samples == 0 {
        return Err(invalid("--k and --samples must be positive"));
    }
    if !(perturb >= 0.0 && perturb.is_finite()) {
        return Err(invalid("--perturb must be non-negative"));
    }
    let grid = QuadratureGrid::new(
        cli.global.radial.unwrap_or(config::ENERGY_GRID_MIN),
        cli.global.angular.unwrap_or(config::default_angular(k).max(config::ENERGY_GRID_MIN)),
        cli.quad_tol,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(cli.global.seed);
    let h = config::FD_FIRST_STEP;
    let mut report = EnergyCheck {
        k,
        seed: cli.global.seed,
        samples,
        perturb,
        grad_rel_err: 0.0,
        convexity_min: f64::INFINITY,
        second_vs_q_rel_err: 0.0,
    };
    for _ in 0..samples {
        let basis = SectionBasis::identity(k).transformed(&mat_exp(&random_generator(k + 1, &mut rng), perturb))?;
        let a = random_generator(k + 1, &mut rng);
        let line = FlowLine::new(basis.clone(), a.clone(), 0.0)?;
        let e = energy_profile(&line, &[-h, h], &grid)?;
        let fd = (e[1] - e[0]) / (2.0 * h);
        let exact = energy_first_derivative_trace(&line, &grid)?;
        report.grad_rel_err = report.grad_rel_err.max((fd - exact).abs() / exact.abs().max(f64::MIN_POSITIVE));
        for t in CONVEXITY_TIMES {
            report.convexity_min = report.convexity_min.min(energy_second_derivative(&line.at(t), &grid)?);
        }
        let h2 = energy_second_derivative(&line, &grid)?;
        let two_sigma = 2.0 * sigma_norm_sq(&a, &basis, &grid)?;
        report.second_vs_q_rel_err = report
            .second_vs_q_rel_err
            .max((h2 - two_sigma).abs() / two_sigma.abs().max(f64::MIN_POSITIVE));
    }
    let tols = tolerances(cli);
    let body = match cli.global.format {
        Format::Csv => render_csv([report])?,
        Format::Json => render_json(report, meta(cli, json!(grid.config()), &tols))?,
    };
    Ok(Outcome::ok(body))
}

/// `8, 16, 32, …` up to `k_max`; powers of two from 2 when that leaves
/// fewer than two values.
pub fn remark2_ks(k_max: usize) -> Vec<usize> {
    let powers = |start: usize| {
        std::iter::successors(Some(start), |k| Some(k * 2))
            .take_while(|&k| k <= k_max)
            .collect::<Vec<_>>()
    };
    let ks = powers(8);
    if ks.len() >= 2 {
        ks
    } else {
        powers(2)
    }
}

fn cmd_remark2(cli: &Cli, k_max: usize, k_list: Option<&[usize]>) -> Result<Outcome, Failure> {
    let ks = match k_list {
        Some(list) => list.to_vec(),
        None => remark2_ks(k_max),
    };
    if ks.is_empty() {
        return Err(invalid("no k values: raise --k-max or pass --k-list"));
    }
    let policy = policy(cli);
    let table = remark2_table(&ks, &policy)?;
    let body = match cli.global.format {
        Format::Csv => render_csv(table.rows.iter().map(|r| Remark2CsvRow {
            k: r.k,
            xi_sq: r.norms.xi_sq,
            x: r.norms.x,
            tangential: r.norms.tangential,
            normal: r.norms.normal,
        }))?,
        Format::Json => render_json(&table, meta(cli, json!(policy), &tolerances(cli)))?,
    };
    Ok(Outcome::ok(body))
}

#[derive(Serialize)]
struct Remark2CsvRow {
    k: usize,
    xi_sq: f64,
    x: f64,
    tangential: f64,
    normal: f64,
}
