//! `dtflow` command line: solve, trace, verify and jacobian-check.
//!
//! Exit codes: 0 on success, 1 on numerical failure (a report is still
//! written), 2 on input errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dtflow_core::continuation::{trace, CurvePoint, Termination, TraceOptions};
use dtflow_core::dt::{assemble_system, expand, DEFAULT_ORDER};
use dtflow_core::evaluator::{eval_series, radius_estimate, residual_norm};
use dtflow_core::load::{LoadModel, ModelRegistry};
use dtflow_core::netmodel::{parse_case, parse_sidecar, CaseData, Network};
use dtflow_core::oracle::{fd_jacobian, newton_solve};
use dtflow_core::verify::{identity_trials, IdentityReport, Suite, VerifyOptions};
use dtflow_core::Error;

/// Residual above which an evaluated series is reported as a failure.
const SOLVE_TOLERANCE: f64 = 1e-8;
/// Relative Jacobian agreement required by jacobian-check.
const JACOBIAN_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Parser)]
#[command(
    name = "dtflow",
    version,
    about = "Power flow as a series in the loading parameter"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Expand at zero loading and evaluate the series at one loading value.
    Solve(SolveArgs),
    /// Trace the PV curve by repeated expansion.
    Trace(TraceArgs),
    /// Check the linear forms against direct convolution on random trials.
    Verify(VerifyArgs),
    /// Compare the order matrix with a finite-difference Jacobian.
    JacobianCheck(JacobianArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct Input {
    /// MATPOWER-style case file.
    case: PathBuf,
    /// JSON sidecar with ZIP parameters and the loading direction.
    #[arg(long = "zip", value_name = "SIDECAR")]
    sidecar: Option<PathBuf>,
    /// Load model: const-power or zip.
    #[arg(long, default_value = "const-power")]
    model: String,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    order: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Debug, Args)]
struct TraceArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    order: usize,
    #[arg(
        long = "lambda-max",
        default_value_t = 1.0,
        allow_negative_numbers = true
    )]
    lambda_max: f64,
    /// Step as a fraction of the estimated radius, in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Fixed topology; random networks of 2 to 6 buses when omitted.
    case: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Highest order drawn per trial.
    #[arg(long, default_value_t = 8)]
    order: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct JacobianArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    lambda: f64,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-6)]
    h: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Input(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::BaseNotConverged { .. }
            | Error::SingularAtExpansionPoint { .. }
            | Error::SingularMatrix { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => solve(a, stdout),
        Command::Trace(a) => trace_cmd(a, stdout),
        Command::Verify(a) => verify(a, stdout, stderr),
        Command::JacobianCheck(a) => jacobian_check(a, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Numerical(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
        Err(Failure::Input(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn load(input: &Input) -> Result<(CaseData, Network, Arc<dyn LoadModel>), Failure> {
    let model = ModelRegistry::default().get(&input.model)?;
    let case = parse_case(&read(&input.case)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", input.case.display())))?;
    let (zip, dir) = match &input.sidecar {
        Some(p) => parse_sidecar(&read(p)?, &case)
            .map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
        None => Default::default(),
    };
    let net = Network::new(&case, &zip, &dir)?;
    Ok((case, net, model))
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Outcome {
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Failure::Input(format!("cannot write {}: {e}", p.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Input(format!("cannot write output: {e}"))),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// Solution at zero loading by Newton from a flat start.
fn base_solution(net: &Network, model: &dyn LoadModel) -> Result<Vec<f64>, Failure> {
    let rep = newton_solve(net, model, 0.0, &net.flat_start());
    if rep.converged {
        Ok(rep.y)
    } else {
        Err(Error::BaseNotConverged {
            residual: rep.residual,
        }
        .into())
    }
}

#[derive(Debug, Serialize)]
struct BusVoltage {
    bus: usize,
    e: f64,
    f: f64,
    vm: f64,
    /// Degrees.
    va: f64,
}

/// Voltages in case-file bus order.
fn voltages(net: &Network, y: &[f64]) -> Vec<BusVoltage> {
    (0..net.n())
        .map(|pos| {
            let i = net.ordering().to_internal(pos);
            let (e, f) = (y[2 * i], y[2 * i + 1]);
            BusVoltage {
                bus: net.bus(i).id,
                e,
                f,
                vm: e.hypot(f),
                va: f.atan2(e).to_degrees(),
            }
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct SolveReport {
    case: String,
    model: String,
    lambda: f64,
    order: usize,
    voltages: Vec<BusVoltage>,
    residual_inf: f64,
    /// Heuristic ratio estimate; null when infinite or unavailable.
    radius_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn solve(a: &SolveArgs, stdout: &mut dyn Write) -> Outcome {
    if a.order == 0 {
        return Err(Failure::Input("--order must be at least 1".into()));
    }
    if !a.lambda.is_finite() {
        return Err(Failure::Input("--lambda must be finite".into()));
    }
    let (_, net, model) = load(&a.input)?;
    let mut report = SolveReport {
        case: a.input.case.display().to_string(),
        model: model.name().to_string(),
        lambda: a.lambda,
        order: a.order,
        voltages: Vec::new(),
        residual_inf: f64::NAN,
        radius_estimate: None,
        error: None,
    };

    let result = base_solution(&net, model.as_ref())
        .and_then(|y0| expand(&net, model.as_ref(), &y0, 0.0, a.order).map_err(Failure::from));
    let failure = match result {
        Ok(series) => {
            let y = eval_series(&series, a.lambda);
            report.residual_inf = residual_norm(&net, model.as_ref(), &y, a.lambda);
            report.radius_estimate = radius_estimate(&series).ok().filter(|r| r.is_finite());
            report.voltages = voltages(&net, &y);
            (!(report.residual_inf <= SOLVE_TOLERANCE)).then(|| {
                Failure::Numerical(format!(
                    "series residual {:e} at loading {} exceeds {SOLVE_TOLERANCE:e}",
                    report.residual_inf, a.lambda
                ))
            })
        }
        Err(Failure::Numerical(msg)) => Some(Failure::Numerical(msg)),
        Err(e) => return Err(e),
    };
    if let Some(Failure::Numerical(msg)) = &failure {
        report.error = Some(msg.clone());
    }

    let text = match a.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let mut s = String::from("bus,e,f,vm,va\n");
            for v in &report.voltages {
                let _ = writeln!(s, "{},{},{},{},{}", v.bus, v.e, v.f, v.vm, v.va);
            }
            s
        }
    };
    emit(a.out.as_deref(), &text, stdout)?;
    failure.map_or(Ok(()), Err)
}

/// Curve CSV: `lambda`, then `e_<id>` and `f_<id>` in case order, then
/// `residual`.
fn curve_csv(case: &CaseData, net: &Network, curve: &[CurvePoint]) -> String {
    let ids: Vec<usize> = case.buses.iter().map(|b| b.id).collect();
    let mut s = String::from("lambda");
    for id in &ids {
        let _ = write!(s, ",e_{id}");
    }
    for id in &ids {
        let _ = write!(s, ",f_{id}");
    }
    s.push_str(",residual\n");
    let slots: Vec<usize> = ids.iter().map(|id| net.index_of(*id).unwrap()).collect();
    for p in curve {
        let _ = write!(s, "{}", p.lambda);
        for &i in &slots {
            let _ = write!(s, ",{}", p.y[2 * i]);
        }
        for &i in &slots {
            let _ = write!(s, ",{}", p.y[2 * i + 1]);
        }
        let _ = writeln!(s, ",{}", p.residual);
    }
    s
}

#[derive(Debug, Serialize)]
struct TracePoint {
    lambda: f64,
    voltages: Vec<BusVoltage>,
    residual: f64,
}

#[derive(Debug, Serialize)]
struct TraceReport {
    case: String,
    model: String,
    lambda_max: f64,
    termination: &'static str,
    points: Vec<TracePoint>,
}

fn trace_cmd(a: &TraceArgs, stdout: &mut dyn Write) -> Outcome {
    if a.order < 6 {
        return Err(Failure::Input(
            "--order must be at least 6 for step control".into(),
        ));
    }
    if !(a.eta > 0.0 && a.eta <= 1.0) {
        return Err(Failure::Input(format!(
            "--eta must lie in (0, 1], got {}",
            a.eta
        )));
    }
    if !a.lambda_max.is_finite() {
        return Err(Failure::Input("--lambda-max must be finite".into()));
    }
    let (case, net, model) = load(&a.input)?;
    let opts = TraceOptions {
        lambda_max: a.lambda_max,
        eta: a.eta,
        order: a.order,
        ..TraceOptions::default()
    };
    let (curve, termination, failure) = match base_solution(&net, model.as_ref())
        .and_then(|y0| trace(&net, model.as_ref(), &y0, 0.0, &opts).map_err(Failure::from))
    {
        Ok(c) => {
            let f = (c.termination != Termination::ReachedLambdaMax).then(|| {
                Failure::Numerical(format!(
                    "trace stopped ({}) at loading {} before {}",
                    c.termination.as_str(),
                    c.last().map_or(0.0, |p| p.lambda),
                    a.lambda_max
                ))
            });
            let t = c.termination.as_str();
            (c.points, t, f)
        }
        Err(Failure::Numerical(msg)) => (
            Vec::new(),
            "base_not_converged",
            Some(Failure::Numerical(msg)),
        ),
        Err(e) => return Err(e),
    };

    let text = match a.format {
        Format::Csv => curve_csv(&case, &net, &curve),
        Format::Json => to_json(&TraceReport {
            case: a.input.case.display().to_string(),
            model: model.name().to_string(),
            lambda_max: a.lambda_max,
            termination,
            points: curve
                .iter()
                .map(|p| TracePoint {
                    lambda: p.lambda,
                    voltages: voltages(&net, &p.y),
                    residual: p.residual,
                })
                .collect(),
        }),
    };
    emit(a.out.as_deref(), &text, stdout)?;
    failure.map_or(Ok(()), Err)
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    case: Option<String>,
    constant_power: IdentityReport,
    zip: IdentityReport,
    combined: IdentityReport,
}

fn verify(a: &VerifyArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    if a.trials == 0 || a.order == 0 {
        return Err(Failure::Input(
            "--trials and --order must be at least 1".into(),
        ));
    }
    let topology = match &a.case {
        Some(p) => Some(
            parse_case(&read(p)?).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };
    let _ = writeln!(stderr, "verify: seed {}, {} trials", a.seed, a.trials);
    let opts = VerifyOptions {
        trials: a.trials,
        seed: a.seed,
        max_order: a.order,
        ..VerifyOptions::default()
    };
    let cp = identity_trials(topology.as_ref(), Suite::ConstantPower, &opts)?;
    let zip = identity_trials(topology.as_ref(), Suite::Zip, &opts)?;
    let mut combined = cp.clone();
    combined.merge(&zip);
    let passed = combined.passed;
    let report = VerifyReport {
        case: a.case.as_ref().map(|p| p.display().to_string()),
        constant_power: cp,
        zip,
        combined,
    };
    emit(a.out.as_deref(), &to_json(&report), stdout)?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Numerical(format!(
            "identity violated (seed {}): {:?}",
            a.seed, report.combined.worst
        )))
    }
}

#[derive(Debug, Serialize)]
struct JacobianReport {
    case: String,
    model: String,
    lambda: f64,
    h: f64,
    /// `||A - J_fd||_inf / ||A||_inf`.
    relative_difference: f64,
    tolerance: f64,
    passed: bool,
}

fn jacobian_check(a: &JacobianArgs, stdout: &mut dyn Write) -> Outcome {
    if !(a.h > 0.0 && a.h.is_finite()) {
        return Err(Failure::Input(format!("--h must be positive, got {}", a.h)));
    }
    let (_, net, model) = load(&a.input)?;
    // the Newton solution at the requested loading, or the flat start if
    // there is none: the comparison holds at any state
    let rep = newton_solve(&net, model.as_ref(), a.lambda, &net.flat_start());
    let y = if rep.converged {
        rep.y
    } else {
        net.flat_start()
    };
    let analytic = assemble_system(&net, model.as_ref(), &y)?.a_gy;
    let fd = fd_jacobian(&net, model.as_ref(), &y, a.lambda, a.h);
    let diff = (0..analytic.rows())
        .map(|r| {
            analytic
                .row(r)
                .iter()
                .zip(fd.row(r))
                .map(|(x, z)| (x - z).abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    let rel = diff / analytic.norm_inf();
    let report = JacobianReport {
        case: a.input.case.display().to_string(),
        model: model.name().to_string(),
        lambda: a.lambda,
        h: a.h,
        relative_difference: rel,
        tolerance: JACOBIAN_TOLERANCE,
        passed: rel <= JACOBIAN_TOLERANCE,
    };
    emit(a.out.as_deref(), &to_json(&report), stdout)?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Numerical(format!(
            "analytic and finite-difference Jacobians differ by {rel:e}"
        )))
    }
}
