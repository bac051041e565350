//! Command-line front end: `solve`, `verify` and `noether`.
//!
//! Every command prints a summary (text or JSON) and, with `--out DIR`,
//! writes its reports plus a `manifest.json` holding input and output
//! hashes. Outputs carry no timestamps, so identical inputs give identical
//! bytes.
//!
//! Exit codes: `solve` returns 0 when converged, 3 when not; `verify` and
//! `noether` return 0 when every verdict passes, 1 otherwise. Invalid input
//! of any kind returns 2.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::builtin;
use crate::conditions::{self, summary_table, ConditionReport, NoetherProfile, Normality};
use crate::error::{Error, Result};
use crate::expr::Mode;
use crate::model::{trajectory_to_csv, DelayedProblem, Grid, MultiplierVector, Symmetry, Trajectory};
use crate::ocp::{self, HamiltonianContext};
use crate::solver::{self, MultiplierUpdate, SolveResult, SolveSettings};

#[derive(Debug, Parser)]
#[command(name = "isodelay", version, about = "Solve and verify isoperimetric problems with a time delay")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a candidate extremal by direct transcription.
    Solve(SolveArgs),
    /// Evaluate the necessary conditions along a trajectory.
    Verify(VerifyArgs),
    /// Check a candidate constant of motion and the invariance it rests on.
    Noether(NoetherArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Problem file (JSON).
    #[arg(long)]
    pub problem: Option<PathBuf>,
    /// Built-in problem: example33, parabola, delayed, nonautonomous, oscillator2d.
    #[arg(long)]
    pub builtin: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Output {
    /// Directory for reports and the run manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: Source,
    /// Intervals in [t1, t2]; must make the delay a whole number of steps.
    #[arg(long)]
    pub n: Option<usize>,
    /// Initial multiplier estimate, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lambda: Option<Vec<f64>>,
    /// Verdict tolerance for the condition reports [default: 10 h²].
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 1e-9)]
    pub inner_tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub outer_tol: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_inner: usize,
    #[arg(long, default_value_t = 40)]
    pub max_outer: usize,
    /// Use secant steps for a single multiplier.
    #[arg(long)]
    pub secant: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrajectoryArgs {
    /// Trajectory CSV; built-in problems default to their reference trajectory.
    #[arg(long)]
    pub traj: Option<PathBuf>,
    /// Grid size for a built-in reference trajectory.
    #[arg(long)]
    pub n: Option<usize>,
    /// Multipliers, comma-separated; built-ins default to their reference value.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lambda: Option<Vec<f64>>,
    /// Verdict tolerance [default: 1e-8 for reference trajectories, 10 h² for CSV input].
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub traj: TrajectoryArgs,
    /// Check the Pontryagin conditions of the control form `q̇ = u`, with the
    /// costate built from the trajectory.
    #[arg(long)]
    pub control_form: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NoetherArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub traj: TrajectoryArgs,
    /// Time generator η(t, q).
    #[arg(long, default_value = "1")]
    pub eta: String,
    /// State generators ξ(t, q), one per component (repeat or comma-separate).
    #[arg(long, value_delimiter = ',')]
    pub xi: Vec<String>,
    /// Gauge term Φ.
    #[arg(long, default_value = "0")]
    pub phi: String,
    /// Tolerance on the invariance residual.
    #[arg(long, default_value_t = conditions::ANALYTIC_TOL)]
    pub invariance_tol: f64,
    #[command(flatten)]
    pub output: Output,
}

/// Record of one run, written next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub problem: String,
    pub problem_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory_sha256: Option<String>,
    pub settings: serde_json::Value,
    pub outputs: Vec<OutputFile>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Loaded {
    problem: DelayedProblem,
    label: String,
    hash: String,
    builtin: Option<String>,
}

fn load(source: &Source) -> Result<Loaded> {
    match (&source.problem, &source.builtin) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)?;
            Ok(Loaded {
                problem: DelayedProblem::from_json_str(&text)?,
                label: path.display().to_string(),
                hash: sha256(text.as_bytes()),
                builtin: None,
            })
        }
        (None, Some(name)) => {
            let text = builtin::source(name)
                .ok_or_else(|| Error::invalid("builtin", format!("unknown problem `{name}`; expected one of {:?}", builtin::NAMES)))?;
            Ok(Loaded {
                problem: builtin::problem(name)?,
                label: format!("builtin:{name}"),
                hash: sha256(text.as_bytes()),
                builtin: Some(name.clone()),
            })
        }
        (None, None) => Err(Error::Missing("either --problem or --builtin".into())),
    }
}

/// Trajectory to check, whether it came from a file (numerical data), and
/// the file hash.
fn load_trajectory(loaded: &Loaded, args: &TrajectoryArgs) -> Result<(Trajectory, bool, Option<String>)> {
    let p = &loaded.problem;
    match (&args.traj, &loaded.builtin) {
        (Some(path), _) => {
            let bytes = std::fs::read(path)?;
            let tr = crate::model::trajectory_from_csv(bytes.as_slice())?.with_history(p.history(), p.t1());
            Grid::of(p, &tr)?;
            Ok((tr, true, Some(sha256(&bytes))))
        }
        (None, Some(name)) => {
            let steps = args.n.unwrap_or_else(|| builtin::default_steps(name));
            Ok((builtin::reference_trajectory(name, steps)?, false, None))
        }
        (None, None) => Err(Error::Missing("--traj is required with --problem".into())),
    }
}

fn multipliers(loaded: &Loaded, given: &Option<Vec<f64>>) -> Result<MultiplierVector> {
    let k = loaded.problem.k();
    let values = match given {
        Some(v) => v.clone(),
        None if k == 0 => Vec::new(),
        None => loaded
            .builtin
            .as_deref()
            .and_then(builtin::reference_lambda)
            .ok_or_else(|| Error::Missing(format!("--lambda with {k} values")))?,
    };
    let lambda = MultiplierVector::new(values)?;
    lambda.check(&loaded.problem)?;
    Ok(lambda)
}

fn default_tol(args: &TrajectoryArgs, numeric: bool, traj: &Trajectory) -> f64 {
    args.tol.unwrap_or(if numeric {
        conditions::solver_tolerance(traj.step())
    } else {
        conditions::ANALYTIC_TOL
    })
}

/// Writes named outputs and the manifest into `dir`.
fn write_outputs(dir: &Path, files: Vec<(&str, Vec<u8>)>, mut manifest: RunManifest) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in files {
        std::fs::write(dir.join(name), &bytes)?;
        manifest.outputs.push(OutputFile {
            path: name.into(),
            sha256: sha256(&bytes),
        });
    }
    std::fs::write(dir.join("manifest.json"), json_bytes(&manifest)?)?;
    Ok(())
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn manifest(command: &str, loaded: &Loaded, traj_hash: Option<String>, settings: impl Serialize) -> Result<RunManifest> {
    Ok(RunManifest {
        command: command.into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        problem: loaded.label.clone(),
        problem_sha256: loaded.hash.clone(),
        trajectory_sha256: traj_hash,
        settings: serde_json::to_value(settings)?,
        outputs: Vec::new(),
    })
}

fn emit(out: &mut dyn Write, format: Format, text: &str, json: &impl Serialize) -> Result<()> {
    match format {
        Format::Text => out.write_all(text.as_bytes())?,
        Format::Json => out.write_all(&json_bytes(json)?)?,
    }
    Ok(())
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.10}")).collect();
    format!("[{}]", parts.join(", "))
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    result: &'a SolveResult,
    reports: &'a [ConditionReport],
}

fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> Result<i32> {
    let loaded = load(&args.source)?;
    let p = &loaded.problem;
    let steps = args
        .n
        .unwrap_or_else(|| loaded.builtin.as_deref().map_or(100, builtin::default_steps));
    let settings = SolveSettings {
        inner_tol: args.inner_tol,
        outer_tol: args.outer_tol,
        max_inner: args.max_inner,
        max_outer: args.max_outer,
        initial_lambda: args.lambda.clone(),
        multiplier_update: if args.secant {
            MultiplierUpdate::Secant
        } else {
            MultiplierUpdate::FirstOrder
        },
        ..SolveSettings::with_steps(steps)
    };
    let result = solver::solve_isoperimetric(p, &settings)?;
    let lambda = MultiplierVector::new(result.lambda.clone())?;
    let tol = args.tol.unwrap_or(conditions::solver_tolerance(result.h));
    let reports = conditions::verify_all(p, &lambda, &result.trajectory, tol)?;

    let mut text = format!(
        "problem     {}\nconverged   {}\nlambda      {}\nJ           {:.12}\nI           {}\n|I - l|     {:.3e}\nkkt         {:.3e}\niterations  {} inner, {} outer\nnormality   {:?}\n",
        loaded.label,
        result.converged,
        fmt_vec(&result.lambda),
        result.objective,
        fmt_vec(&result.constraints),
        result.constraint_residual,
        result.kkt_residual,
        result.inner_iterations,
        result.outer_iterations,
        result.normality,
    );
    for w in &result.warnings {
        text.push_str(&format!("warning     {w}\n"));
    }
    text.push('\n');
    text.push_str(&summary_table(&reports));
    emit(out, args.output.format, &text, &SolveOutput { result: &result, reports: &reports })?;

    if let Some(dir) = &args.output.out {
        let mut csv = Vec::new();
        trajectory_to_csv(&result.trajectory, &mut csv)?;
        let m = manifest("solve", &loaded, None, json!({ "solver": &settings, "tolerance": tol }))?;
        write_outputs(
            dir,
            vec![
                ("trajectory.csv", csv),
                ("result.json", json_bytes(&result)?),
                ("reports.json", json_bytes(&reports)?),
            ],
            m,
        )?;
    }
    Ok(if result.converged { 0 } else { 3 })
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    passed: bool,
    tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    normality: Option<Normality>,
    reports: &'a [ConditionReport],
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let loaded = load(&args.source)?;
    let (traj, numeric, traj_hash) = load_trajectory(&loaded, &args.traj)?;
    let lambda = multipliers(&loaded, &args.traj.lambda)?;
    let tol = default_tol(&args.traj, numeric, &traj);
    let p = &loaded.problem;
    let (reports, normality) = match (p.mode(), args.control_form) {
        (Mode::Ocp, _) => {
            let ctx = HamiltonianContext::new(p, &lambda)?;
            (ocp::verify_ocp(&ctx, &traj, tol)?, None)
        }
        (Mode::Lagrangian, true) => {
            let (cp, full) = ocp::control_form_extremal(p, &lambda, &traj)?;
            let ctx = HamiltonianContext::new(&cp, &lambda)?;
            (ocp::verify_ocp(&ctx, &full, tol)?, None)
        }
        (Mode::Lagrangian, false) => {
            let normality = conditions::abnormality_check(p, &traj, tol)?.normality;
            (conditions::verify_all(p, &lambda, &traj, tol)?, Some(normality))
        }
    };
    let passed = reports.iter().all(|r| r.passed);

    let mut text = format!("problem     {}\nlambda      {}\n", loaded.label, fmt_vec(lambda.as_slice()));
    if let Some(n) = normality {
        text.push_str(&format!("normality   {n:?}\n"));
    }
    text.push('\n');
    text.push_str(&summary_table(&reports));
    for r in reports.iter().filter(|r| !r.passed) {
        if let Some(i) = r.worst_node() {
            text.push_str(&format!("{}: largest residual at node {} (t = {})\n", r.name, i, traj.time(i)));
        }
    }
    let output = VerifyOutput {
        passed,
        tolerance: tol,
        normality,
        reports: &reports,
    };
    emit(out, args.output.format, &text, &output)?;
    if let Some(dir) = &args.output.out {
        let m = manifest(
            "verify",
            &loaded,
            traj_hash,
            json!({ "trajectory": &args.traj, "control_form": args.control_form, "tolerance": tol }),
        )?;
        write_outputs(dir, vec![("reports.json", json_bytes(&output)?)], m)?;
    }
    Ok(if passed { 0 } else { 1 })
}

/// One evaluation of the invariance residual.
#[derive(Debug, Clone, Serialize)]
pub struct InvarianceProbe {
    pub probe: String,
    pub from: f64,
    pub to: f64,
    pub residual: f64,
}

#[derive(Serialize)]
struct NoetherOutput<'a> {
    passed: bool,
    drift_tolerance: f64,
    invariance_tolerance: f64,
    invariance_max: f64,
    profile: &'a NoetherProfile,
    invariance: &'a [InvarianceProbe],
}

/// `traj` with `amplitude·sin(kπ(t - t1)/(t2 - t1))` added to every
/// component on `[t1, t2]`; history and endpoints stay as they are.
fn bumped(problem: &DelayedProblem, traj: &Trajectory, k: f64, amplitude: f64) -> Result<Trajectory> {
    let grid = Grid::of(problem, traj)?;
    let n = problem.n();
    let mut values = traj.values().to_vec();
    let span = problem.t2() - problem.t1();
    for i in grid.first()..=grid.last() {
        let s = ((i - grid.first()) as f64 * grid.h / span).min(1.0);
        let b = amplitude * (k * std::f64::consts::PI * s).sin();
        for c in 0..n {
            values[i * n + c] += b * (1.0 + c as f64);
        }
    }
    Ok(Trajectory::new(traj.t_start(), traj.step(), n, values)?.with_history(problem.history(), problem.t1()))
}

/// Invariance is a property of the integrand, so it is probed on the given
/// trajectory and on two smooth perturbations of it, over the whole horizon
/// and over each regime.
pub fn invariance_probes(
    problem: &DelayedProblem,
    lambda: &MultiplierVector,
    symmetry: &Symmetry,
    traj: &Trajectory,
) -> Result<Vec<InvarianceProbe>> {
    let grid = Grid::of(problem, traj)?;
    let windows = [
        (grid.time(grid.first()), grid.time(grid.last())),
        (grid.time(grid.first()), grid.time(grid.boundary())),
        (grid.time(grid.boundary()), grid.time(grid.last())),
    ];
    let probes = [
        ("trajectory".to_string(), traj.clone()),
        ("bump1".to_string(), bumped(problem, traj, 1.0, 0.3)?),
        ("bump2".to_string(), bumped(problem, traj, 2.0, 0.2)?),
    ];
    let mut out = Vec::new();
    for (name, tr) in &probes {
        for &(a, b) in &windows {
            out.push(InvarianceProbe {
                probe: name.clone(),
                from: a,
                to: b,
                residual: conditions::invariance_residual(problem, lambda, symmetry, tr, (a, b))?,
            });
        }
    }
    Ok(out)
}

fn cmd_noether(args: &NoetherArgs, out: &mut dyn Write) -> Result<i32> {
    let loaded = load(&args.source)?;
    let p = &loaded.problem;
    if p.mode() != Mode::Lagrangian {
        return Err(Error::invalid("mode", "noether needs a Lagrangian problem"));
    }
    let (traj, numeric, traj_hash) = load_trajectory(&loaded, &args.traj)?;
    let lambda = multipliers(&loaded, &args.traj.lambda)?;
    let tol = default_tol(&args.traj, numeric, &traj);
    let xi: Vec<&str> = if args.xi.is_empty() {
        vec!["0"; p.n()]
    } else {
        args.xi.iter().map(String::as_str).collect()
    };
    let symmetry = Symmetry::parse(&args.eta, &xi, &args.phi, p.n())?;
    let profile = conditions::noether_constant(p, &lambda, &traj, &symmetry)?.with_tolerance(tol);
    let probes = invariance_probes(p, &lambda, &symmetry, &traj)?;
    let inv_max = probes.iter().fold(0.0f64, |m, r| if r.residual.is_nan() { f64::NAN } else { m.max(r.residual.abs()) });
    let inv_ok = inv_max <= args.invariance_tol;
    let passed = profile.passed && inv_ok;

    let mut text = format!(
        "problem     {}\nlambda      {}\ngenerators  eta = {}, xi = {:?}, phi = {}\n\n",
        loaded.label,
        fmt_vec(lambda.as_slice()),
        args.eta,
        xi,
        args.phi
    );
    for r in &profile.regime_drift {
        text.push_str(&format!("drift ({:?})  {:.4e}\n", r.regime, r.drift));
    }
    text.push_str(&format!(
        "drift         {:.4e}  tol {:.2e}  {}\ninvariance    {:.4e}  tol {:.2e}  {}\n",
        profile.max_regime_drift(),
        tol,
        if profile.passed { "pass" } else { "FAIL" },
        inv_max,
        args.invariance_tol,
        if inv_ok { "pass" } else { "FAIL" }
    ));
    let output = NoetherOutput {
        passed,
        drift_tolerance: tol,
        invariance_tolerance: args.invariance_tol,
        invariance_max: inv_max,
        profile: &profile,
        invariance: &probes,
    };
    emit(out, args.output.format, &text, &output)?;
    if let Some(dir) = &args.output.out {
        let m = manifest(
            "noether",
            &loaded,
            traj_hash,
            json!({
                "trajectory": &args.traj,
                "eta": &args.eta,
                "xi": &xi,
                "phi": &args.phi,
                "drift_tolerance": tol,
                "invariance_tolerance": args.invariance_tol,
            }),
        )?;
        write_outputs(dir, vec![("noether.json", json_bytes(&output)?)], m)?;
    }
    Ok(if passed { 0 } else { 1 })
}

/// Runs a parsed command, writing the summary to `out`. Errors are input
/// errors (exit code 2).
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Noether(a) => cmd_noether(a, out),
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli, &mut lock) {
        Ok(code) => code,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            2
        }
    }
}
