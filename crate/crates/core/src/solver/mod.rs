//! Candidate extremals by direct transcription.
//!
//! The functional is discretized with the interval-secant trapezoid rule on
//! a grid commensurate with the delay, so every delayed value is an index
//! shift and the gradient with respect to node values is exact. An
//! augmented-Lagrangian outer loop drives the constraint residual
//! `I - l` to zero while an L-BFGS inner loop minimizes
//! `J - λ·(I - l) + ρ/2·|I - l|²` over the free nodes.
//!
//! Objectives need not be convex. The contract is stationarity of the
//! discrete problem, checked afterwards through the condition residuals,
//! not global optimality.

mod lbfgs;
mod transcription;

use serde::Serialize;

pub use transcription::discretized_objective;

use crate::conditions::jets::Combination;
use crate::conditions::{self, ConditionReport, Normality};
use crate::error::{Error, Result};
use crate::model::{DelayedProblem, Grid, MultiplierVector, Trajectory};
use transcription::{assemble, free_range, uses_delay};

/// Where the first iterate comes from.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Initialization {
    /// Straight line from `δ(t1)` to the terminal value.
    #[default]
    LinearInterpolant,
    /// A trajectory on the solve grid; its free nodes are used as given.
    Supplied(Trajectory),
}

/// How the multiplier estimate moves between outer iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierUpdate {
    /// `λ ← λ - ρ(I - l)`.
    #[default]
    FirstOrder,
    /// Secant step on `λ ↦ I(λ) - l` for a single constraint, falling back
    /// to the first-order step when the secant is degenerate.
    Secant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSettings {
    /// Intervals in `[t1, t2]`.
    pub steps: usize,
    /// Sup-norm of the inner gradient at which the inner loop stops.
    pub inner_tol: f64,
    /// Sup-norm of `I - l` at which the outer loop stops.
    pub outer_tol: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub penalty: f64,
    pub penalty_growth: f64,
    pub penalty_max: f64,
    pub initial_lambda: Option<Vec<f64>>,
    #[serde(skip)]
    pub init: Initialization,
    pub multiplier_update: MultiplierUpdate,
    pub memory: usize,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings {
            steps: 100,
            inner_tol: 1e-9,
            outer_tol: 1e-10,
            max_inner: 5000,
            max_outer: 40,
            penalty: 10.0,
            penalty_growth: 10.0,
            penalty_max: 1e8,
            initial_lambda: None,
            init: Initialization::LinearInterpolant,
            multiplier_update: MultiplierUpdate::FirstOrder,
            memory: 12,
        }
    }
}

impl SolveSettings {
    pub fn with_steps(steps: usize) -> Self {
        SolveSettings {
            steps,
            ..Default::default()
        }
    }

    fn validate(&self, problem: &DelayedProblem) -> Result<Grid> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.inner_tol) || !positive(self.outer_tol) {
            return Err(Error::Settings("tolerances must be positive".into()));
        }
        if !positive(self.penalty) || !(self.penalty_growth >= 1.0) || !(self.penalty_max >= self.penalty) {
            return Err(Error::Settings("penalty parameters out of range".into()));
        }
        if self.max_outer == 0 || self.memory == 0 {
            return Err(Error::Settings("iteration limits must be positive".into()));
        }
        if let Some(l) = &self.initial_lambda {
            MultiplierVector::new(l.clone())?.check(problem)?;
        }
        let grid = Grid::new(problem, self.steps)?;
        if grid.steps < 2 * grid.delay_steps {
            return Err(Error::Settings(format!(
                "need at least two delays per horizon (steps = {}, delay = {} steps)",
                grid.steps, grid.delay_steps
            )));
        }
        Ok(grid)
    }
}

/// Outcome of [`solve_isoperimetric`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    #[serde(skip)]
    pub trajectory: Trajectory,
    pub lambda: Vec<f64>,
    #[serde(rename = "J")]
    pub objective: f64,
    #[serde(rename = "I")]
    pub constraints: Vec<f64>,
    /// `sup |I - l|`.
    pub constraint_residual: f64,
    /// Sup-norm of the gradient of `J - λ·I` over the free nodes.
    pub kkt_residual: f64,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub converged: bool,
    pub normality: Normality,
    pub steps: usize,
    pub h: f64,
    pub warnings: Vec<String>,
    pub el_report: ConditionReport,
    /// Penalized objective after every accepted inner step, across all
    /// outer iterations (each outer iteration starts a new sequence).
    #[serde(skip)]
    pub objective_history: Vec<Vec<f64>>,
}

/// Fixed part of the node array: history nodes, `q(t1) = δ(t1)` and the
/// terminal value.
fn boundary_template(problem: &DelayedProblem, grid: &Grid) -> Vec<f64> {
    let n = problem.n();
    let mut values = vec![0.0; grid.nodes() * n];
    for i in 0..=grid.first() {
        let v = problem.history().value(grid.time(i));
        values[i * n..(i + 1) * n].copy_from_slice(&v);
    }
    let last = grid.last();
    values[last * n..(last + 1) * n].copy_from_slice(problem.terminal());
    values
}

fn initial_values(problem: &DelayedProblem, grid: &Grid, init: &Initialization) -> Result<Vec<f64>> {
    let n = problem.n();
    let mut values = boundary_template(problem, grid);
    match init {
        Initialization::LinearInterpolant => {
            let a = problem.history().value(problem.t1());
            let b = problem.terminal();
            for i in free_range(grid) {
                let s = (i - grid.first()) as f64 / grid.steps as f64;
                for c in 0..n {
                    values[i * n + c] = a[c] + s * (b[c] - a[c]);
                }
            }
        }
        Initialization::Supplied(traj) => {
            let g = Grid::of(problem, traj)?;
            if g.steps != grid.steps {
                return Err(Error::GridMismatch(format!(
                    "initial trajectory has {} steps, settings ask for {}",
                    g.steps, grid.steps
                )));
            }
            let free = free_range(grid);
            values[free.start * n..free.end * n].copy_from_slice(&traj.values()[free.start * n..free.end * n]);
        }
    }
    Ok(values)
}

/// Node indices where the derivative of a transcribed extremal may jump:
/// `t1 + kτ` (a mismatch between history slope and initial slope propagates
/// forward) and `t2 - kτ` (the change of regime propagates backward).
fn structural_breakpoints(problem: &DelayedProblem, grid: &Grid) -> Vec<usize> {
    let m = grid.delay_steps;
    let mut nodes = vec![grid.first()];
    if uses_delay(problem) {
        nodes.extend((grid.first()..=grid.last()).step_by(m));
        let mut i = grid.last() as isize - m as isize;
        while i >= grid.first() as isize {
            nodes.push(i as usize);
            i -= m as isize;
        }
    }
    nodes.sort_unstable();
    nodes.dedup();
    nodes
}

/// Evaluates `J` and every `I_j` with gradients over all nodes.
struct Functionals<'a> {
    problem: &'a DelayedProblem,
    grid: Grid,
    objective: Combination<'a>,
    constraints: Vec<Combination<'a>>,
}

impl<'a> Functionals<'a> {
    fn new(problem: &'a DelayedProblem, grid: Grid) -> Self {
        Functionals {
            problem,
            grid,
            objective: Combination::single(problem.lagrangian()),
            constraints: problem.constraints().iter().map(Combination::single).collect(),
        }
    }

    /// Values `[J, I_1, ..]`; gradients are written when `grads` is given.
    fn eval(&self, values: &[f64], grads: Option<&mut [Vec<f64>]>) -> Result<Vec<f64>> {
        let n = self.problem.n();
        let mut out = Vec::with_capacity(1 + self.constraints.len());
        let combos = std::iter::once(&self.objective).chain(&self.constraints);
        match grads {
            Some(gs) => {
                for (c, g) in combos.zip(gs.iter_mut()) {
                    out.push(assemble(c, &self.grid, n, values, &[], Some(g))?);
                }
            }
            None => {
                for c in combos {
                    out.push(assemble(c, &self.grid, n, values, &[], None)?);
                }
            }
        }
        Ok(out)
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Solves the isoperimetric problem by transcription.
///
/// Non-convergence is not an error: the best iterate is returned with
/// `converged = false` and its diagnostics.
pub fn solve_isoperimetric(problem: &DelayedProblem, settings: &SolveSettings) -> Result<SolveResult> {
    if problem.mode() != crate::expr::Mode::Lagrangian {
        return Err(Error::invalid("mode", "the solver handles Lagrangian problems only"));
    }
    let grid = settings.validate(problem)?;
    let n = problem.n();
    let k = problem.k();
    let levels = problem.levels().to_vec();
    let funcs = Functionals::new(problem, grid);
    let mut values = initial_values(problem, &grid, &settings.init)?;
    let free = free_range(&grid);
    let (lo, hi) = (free.start * n, free.end * n);

    let mut lambda = settings.initial_lambda.clone().unwrap_or_else(|| vec![0.0; k]);
    let mut rho = settings.penalty;
    let inv_h = 1.0 / grid.h;
    let mut grads = vec![vec![0.0; values.len()]; k + 1];
    let mut inner_total = 0;
    let mut outer = 0;
    let mut histories = Vec::new();
    let mut warnings = Vec::new();
    let mut prev_violation = f64::INFINITY;
    let mut secant_prev: Option<(f64, f64)> = None;
    let mut converged = false;
    let mut inner_ok = false;
    let mut kkt = f64::INFINITY;
    let mut current = funcs.eval(&values, None)?;

    while outer < settings.max_outer {
        outer += 1;
        let lam = lambda.clone();
        // node gradients scale with h; the inner loop works on the penalized
        // objective divided by h so its tolerance does not fade as the grid
        // is refined, and is tightened so the raw gradient still meets
        // `inner_tol`
        let opts = lbfgs::Options {
            memory: settings.memory,
            max_iter: settings.max_inner,
            grad_tol: settings.inner_tol * inv_h.min(1.0),
            initial_scale: 0.5 * grid.h * grid.h,
            components: n,
        };
        let outcome = {
            let mut scratch = values.clone();
            let mut local = grads.clone();
            lbfgs::minimize(values[lo..hi].to_vec(), &opts, |x, g| {
                scratch[lo..hi].copy_from_slice(x);
                let v = funcs.eval(&scratch, Some(&mut local))?;
                let c: Vec<f64> = v[1..].iter().zip(&levels).map(|(a, b)| a - b).collect();
                let mut f = v[0];
                for j in 0..k {
                    f += -lam[j] * c[j] + 0.5 * rho * c[j] * c[j];
                }
                for (idx, gi) in g.iter_mut().enumerate() {
                    let mut s = local[0][lo + idx];
                    for j in 0..k {
                        s += (-lam[j] + rho * c[j]) * local[1 + j][lo + idx];
                    }
                    *gi = s * inv_h;
                }
                Ok(f * inv_h)
            })?
        };
        inner_total += outcome.iterations;
        inner_ok = outcome.converged;
        histories.push(outcome.history.iter().map(|v| v * grid.h).collect());
        values[lo..hi].copy_from_slice(&outcome.x);
        current = funcs.eval(&values, Some(&mut grads))?;
        let c: Vec<f64> = current[1..].iter().zip(&levels).map(|(a, b)| a - b).collect();
        let violation = sup(&c);

        let first_order: Vec<f64> = lambda.iter().zip(&c).map(|(l, ci)| l - rho * ci).collect();
        let next = match (settings.multiplier_update, k, secant_prev) {
            (MultiplierUpdate::Secant, 1, Some((l0, c0))) if (c[0] - c0).abs() > 0.0 => {
                let l1 = lambda[0];
                vec![l1 - c[0] * (l1 - l0) / (c[0] - c0)]
            }
            _ => first_order.clone(),
        };
        if k == 1 {
            secant_prev = Some((lambda[0], c[0]));
        }
        // the multiplier that makes the inner gradient a KKT residual
        let kkt_lambda = first_order;
        kkt = sup(&(lo..hi)
            .map(|idx| {
                let mut s = grads[0][idx];
                for j in 0..k {
                    s -= kkt_lambda[j] * grads[1 + j][idx];
                }
                s
            })
            .collect::<Vec<_>>());
        if violation <= settings.outer_tol && kkt <= settings.inner_tol {
            lambda = kkt_lambda;
            converged = true;
            break;
        }
        lambda = next;
        if violation > 0.25 * prev_violation {
            rho = (rho * settings.penalty_growth).min(settings.penalty_max);
        }
        prev_violation = violation;
        if k == 0 {
            break;
        }
    }
    if !inner_ok {
        warnings.push("inner minimization stopped before reaching its tolerance".into());
    }

    let mut trajectory = Trajectory::new(grid.t_start(), grid.h, n, values)?.with_history(problem.history(), problem.t1());
    trajectory = trajectory.add_kinks(structural_breakpoints(problem, &grid));
    let mv = MultiplierVector::new(lambda.clone())?;
    let tol = conditions::solver_tolerance(grid.h);
    let el_report = conditions::el_residual(problem, &mv, &trajectory)?.with_tolerance(tol);
    let normality = conditions::abnormality_check(problem, &trajectory, tol)?.normality;
    if normality == Normality::Abnormal {
        warnings.push("the trajectory satisfies the constraint Euler-Lagrange equations on its own (abnormal); the multiplier is not determined".into());
    }
    let c: Vec<f64> = current[1..].iter().zip(&levels).map(|(a, b)| a - b).collect();
    Ok(SolveResult {
        trajectory,
        lambda,
        objective: current[0],
        constraints: current[1..].to_vec(),
        constraint_residual: sup(&c),
        kkt_residual: kkt,
        inner_iterations: inner_total,
        outer_iterations: outer,
        converged,
        normality,
        steps: grid.steps,
        h: grid.h,
        warnings,
        el_report,
        objective_history: histories,
    })
}

/// Re-solves on a grid `factor` times finer, warm-started from `result`
/// (linear interpolation of the node values, previous multiplier).
pub fn refine(
    problem: &DelayedProblem,
    result: &SolveResult,
    factor: usize,
    settings: &SolveSettings,
) -> Result<SolveResult> {
    if factor < 2 {
        return Err(Error::Settings("refinement factor must be at least 2".into()));
    }
    let steps = result.steps * factor;
    let grid = Grid::new(problem, steps)?;
    let old = &result.trajectory;
    let n = problem.n();
    let mut values = boundary_template(problem, &grid);
    for i in free_range(&grid) {
        let coarse = i / factor;
        let frac = (i % factor) as f64 / factor as f64;
        for c in 0..n {
            let a = old.node(coarse)[c];
            let b = if frac > 0.0 { old.node(coarse + 1)[c] } else { a };
            values[i * n + c] = a + frac * (b - a);
        }
    }
    let warm = Trajectory::new(grid.t_start(), grid.h, n, values)?;
    let mut s = settings.clone();
    s.steps = steps;
    s.init = Initialization::Supplied(warm);
    s.initial_lambda = Some(result.lambda.clone());
    solve_isoperimetric(problem, &s)
}
