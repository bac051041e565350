//! Necessary optimality conditions as pointwise residuals along a trajectory.
//!
//! Every operator works with the augmented integrand `F = L - λ·g`. The
//! delayed conditions take two forms: on the inner regime `[t1, t2 - τ]`
//! they couple `t` with `t + τ`, on the outer regime `(t2 - τ, t2]` they
//! reduce to the classical form. Conditions that are derivatives of a
//! bracketed quantity are checked in integrated form: the bracket minus a
//! running integral of its right-hand side must be constant on each regime,
//! and the residual is the deviation from the regime average. This stays
//! meaningful on piecewise-linear trajectories where second derivatives do
//! not exist.
//!
//! Integrals use the same interval-secant trapezoid as the transcription,
//! so they are exact on piecewise-linear trajectories with corners on grid
//! nodes. Nodes whose evaluation touches a kink (at `t`, `t - τ` or
//! `t + τ`) are excluded from the reports.

mod invariance;
pub(crate) mod jets;
mod report;

use serde::Serialize;

pub use invariance::invariance_residual;
pub use report::{summary_table, ConditionReport, Regime, RegimeConstant, Window};

use crate::error::{Error, Result};
use crate::expr::{EvalPoint, Slot};
use crate::model::{DelayedProblem, Grid, MultiplierVector, Symmetry, Trajectory};
use jets::{node_point, Combination, Jets};

/// Verdict tolerance for analytic (piecewise) trajectories.
pub const ANALYTIC_TOL: f64 = 1e-8;

/// Verdict tolerance for solver output on a grid of step `h`.
pub fn solver_tolerance(h: f64) -> f64 {
    10.0 * h * h
}

/// `F = L - λ·g` at one point.
pub fn augmented_value(problem: &DelayedProblem, lambda: &MultiplierVector, x: &EvalPoint<'_>) -> Result<f64> {
    lambda.check(problem)?;
    Combination::augmented(problem, lambda.as_slice()).value(x)
}

/// Exact partial of `F` with respect to one slot component.
pub fn augmented_partial(
    problem: &DelayedProblem,
    lambda: &MultiplierVector,
    slot: Slot,
    x: &EvalPoint<'_>,
) -> Result<f64> {
    lambda.check(problem)?;
    let mut v = problem.lagrangian().partial(slot, x)?;
    for (g, l) in problem.constraints().iter().zip(lambda.as_slice()) {
        if *l != 0.0 {
            v -= l * g.partial(slot, x)?;
        }
    }
    Ok(v)
}

pub(crate) fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Whether node `i` or any of `offsets` (signed node shifts) is a kink.
pub(crate) fn touches_kink(traj: &Trajectory, i: usize, shifts: &[isize]) -> bool {
    shifts.iter().any(|&s| {
        let k = i as isize + s;
        k >= 0 && (k as usize) < traj.nodes() && traj.is_kink(k as usize)
    })
}

/// Accumulates `(node, quantity)` pairs per regime, then subtracts each
/// regime's average.
pub(crate) struct Integrated {
    entries: Vec<(usize, Regime, Vec<f64>, Vec<f64>)>,
}

impl Integrated {
    pub(crate) fn new() -> Self {
        Integrated { entries: Vec::new() }
    }

    pub(crate) fn push(&mut self, node: usize, regime: Regime, quantity: Vec<f64>, bracket: Vec<f64>) {
        self.entries.push((node, regime, quantity, bracket));
    }

    pub(crate) fn into_report(self, name: &str, grid: &Grid, excluded: Vec<usize>) -> ConditionReport {
        let mut report = ConditionReport::new(name, ANALYTIC_TOL);
        report.excluded = excluded;
        for regime in [Regime::Inner, Regime::Outer] {
            let rows: Vec<&Vec<f64>> = self
                .entries
                .iter()
                .filter(|e| e.1 == regime)
                .map(|e| &e.2)
                .collect();
            if rows.is_empty() {
                continue;
            }
            let mut mean = vec![0.0; rows[0].len()];
            for r in &rows {
                for (m, v) in mean.iter_mut().zip(r.iter()) {
                    *m += v;
                }
            }
            for m in &mut mean {
                *m /= rows.len() as f64;
            }
            report.constants.push(RegimeConstant { regime, value: mean });
        }
        for (node, regime, q, b) in self.entries {
            let c = report.constant(regime).unwrap().to_vec();
            report.push(node, grid.time(node), regime, q.iter().zip(&c).map(|(a, b)| a - b).collect());
            report.bracket.push(b);
        }
        report
    }
}

/// Finite-difference derivative of `values[k]` (uniform step `h`) using only
/// indices in `lo..=hi` whose `ok` flag is set.
pub(crate) fn stencil(values: &[Vec<f64>], ok: &[bool], k: usize, lo: usize, hi: usize, h: f64) -> Option<Vec<f64>> {
    let pick = |idx: &[usize], w: &[f64]| -> Option<Vec<f64>> {
        if idx.iter().any(|&i| i < lo || i > hi || !ok[i]) {
            return None;
        }
        let n = values[idx[0]].len();
        Some(
            (0..n)
                .map(|c| idx.iter().zip(w).map(|(&i, wi)| wi * values[i][c]).sum::<f64>() / (2.0 * h))
                .collect(),
        )
    };
    if k > lo && k < hi {
        pick(&[k - 1, k + 1], &[-1.0, 1.0])
    } else if k == lo && hi >= lo + 2 {
        pick(&[k, k + 1, k + 2], &[-3.0, 4.0, -1.0])
    } else if k == hi && k >= lo + 2 {
        pick(&[k - 2, k - 1, k], &[1.0, -4.0, 3.0])
    } else {
        None
    }
}

/// Integrated Euler–Lagrange residual of the integrand behind `jets`, with
/// the inner formula used on nodes `first..=split`.
fn integrated_el(name: &str, jets: &Jets, traj: &Trajectory, split: usize) -> Result<ConditionReport> {
    let g = jets.grid;
    let (m, h, n) = (g.delay_steps, g.h, traj.dim());
    if split < g.first() {
        return Err(Error::Settings(format!("regime split {split} precedes t1")));
    }
    let nodes = g.nodes();
    let mut acc = Integrated::new();
    let mut excluded = Vec::new();
    let mut bracket = vec![Vec::new(); nodes];
    let mut rhs = vec![Vec::new(); nodes];
    let mut ok = vec![false; nodes];

    // inner regime: d/dt{∂₃F + ∂₅F(t+τ)} = ∂₂F + ∂₄F(t+τ)
    let mut running = vec![0.0; n];
    for i in g.first()..=split {
        if i > g.first() {
            let (a, b) = jets.interval(i - 1)?;
            let (fa, fb) = jets.interval(i - 1 + m)?;
            for c in 0..n {
                running[c] += 0.5 * h * (a.dq[c] + b.dq[c] + fa.dqtau[c] + fb.dqtau[c]);
            }
        }
        let here = jets.node(i)?;
        let fwd = jets.forward(i)?;
        let b = add(&here.dqd, &fwd.dqdtau);
        rhs[i] = add(&here.dq, &fwd.dqtau);
        ok[i] = !touches_kink(traj, i, &[0, -(m as isize), m as isize]);
        if ok[i] {
            let q = b.iter().zip(&running).map(|(x, s)| x - s).collect();
            acc.push(i, Regime::Inner, q, b.clone());
        } else {
            excluded.push(i);
        }
        bracket[i] = b;
    }
    let inner_bracket = bracket.clone();
    let inner_rhs = rhs.clone();
    let inner_ok = ok.clone();

    // outer regime: d/dt ∂₃F = ∂₂F
    let mut running = vec![0.0; n];
    for i in split..=g.last() {
        if i > split {
            let (a, b) = jets.interval(i - 1)?;
            for c in 0..n {
                running[c] += 0.5 * h * (a.dq[c] + b.dq[c]);
            }
        }
        let here = jets.node(i)?;
        bracket[i] = here.dqd.clone();
        rhs[i] = here.dq.clone();
        ok[i] = !touches_kink(traj, i, &[0, -(m as isize)]);
        if i == split {
            continue;
        }
        if ok[i] {
            let q = here.dqd.iter().zip(&running).map(|(x, s)| x - s).collect();
            acc.push(i, Regime::Outer, q, here.dqd.clone());
        } else {
            excluded.push(i);
        }
    }

    let mut report = acc.into_report(name, &g, excluded);
    report.differentiated = report
        .nodes
        .iter()
        .zip(&report.regimes)
        .map(|(&i, regime)| {
            let (br, r, okv, lo, hi) = match regime {
                Regime::Inner => (&inner_bracket, &inner_rhs, &inner_ok, g.first(), split),
                _ => (&bracket, &rhs, &ok, split, g.last()),
            };
            stencil(br, okv, i, lo, hi, h).map(|d| d.iter().zip(&r[i]).map(|(a, b)| a - b).collect())
        })
        .collect();
    Ok(report.finish(h))
}

/// Isoperimetric Euler–Lagrange residual with time delay, integrated form.
///
/// Inner regime: `∂₃F(t) + ∂₅F(t+τ) - ∫_{t1}^t (∂₂F + ∂₄F(s+τ)) ds` must be
/// constant; outer regime: `∂₃F(t) - ∫_{t2-τ}^t ∂₂F ds`. The two regime
/// averages are the reported constants.
pub fn el_residual(problem: &DelayedProblem, lambda: &MultiplierVector, traj: &Trajectory) -> Result<ConditionReport> {
    let grid = Grid::of(problem, traj)?;
    el_residual_split(problem, lambda, traj, grid.boundary())
}

/// [`el_residual`] with the regime switch moved to node `split`. Any split
/// other than the node at `t2 - τ` is a wrong formula; this exists to check
/// that such mistakes are visible.
#[doc(hidden)]
pub fn el_residual_split(
    problem: &DelayedProblem,
    lambda: &MultiplierVector,
    traj: &Trajectory,
    split: usize,
) -> Result<ConditionReport> {
    lambda.check(problem)?;
    let combo = Combination::augmented(problem, lambda.as_slice());
    let jets = Jets::compute(problem, &combo, lambda.as_slice(), traj)?;
    integrated_el("euler_lagrange", &jets, traj, split)
}

/// Hypothesis of the DuBois–Reymond condition:
/// `∂₄F(t+τ)·q̇(t) + ∂₅F(t+τ)·q̈(t)` on `[t1 - τ, t2 - τ]`.
///
/// Reported with two windows, `[t1 - τ, t1]` and `[t1 - τ, t2 - τ]`; the
/// verdict uses the wider one.
pub fn cdur_residual(problem: &DelayedProblem, lambda: &MultiplierVector, traj: &Trajectory) -> Result<ConditionReport> {
    lambda.check(problem)?;
    let combo = Combination::augmented(problem, lambda.as_slice());
    let jets = Jets::compute(problem, &combo, lambda.as_slice(), traj)?;
    let g = jets.grid;
    let m = g.delay_steps;
    let mut report = ConditionReport::new("cdur", ANALYTIC_TOL);
    for i in 0..=g.boundary() {
        if touches_kink(traj, i, &[0, m as isize]) {
            report.excluded.push(i);
            continue;
        }
        let fwd = jets.forward(i)?;
        let v = dot(&fwd.dqtau, traj.rate(i)) + dot(&fwd.dqdtau, traj.accel(i));
        let regime = if i < g.first() { Regime::History } else { Regime::Inner };
        report.push(i, g.time(i), regime, vec![v]);
    }
    let start = g.time(0);
    report.add_window("t1-tau..t1", start, g.time(g.first()));
    report.add_window("t1-tau..t2-tau", start, g.time(g.boundary()));
    Ok(report.finish(g.h))
}

/// Isoperimetric DuBois–Reymond residual with time delay, integrated form.
///
/// Inner regime: `F - q̇·(∂₃F + ∂₅F(t+τ)) - ∫_{t1}^t ∂₁F ds` must be constant;
/// outer regime: the same without the `∂₅F` term. `bracket` holds the
/// quantity before the running integral is subtracted.
pub fn dbr_residual(problem: &DelayedProblem, lambda: &MultiplierVector, traj: &Trajectory) -> Result<ConditionReport> {
    lambda.check(problem)?;
    let combo = Combination::augmented(problem, lambda.as_slice());
    let jets = Jets::compute(problem, &combo, lambda.as_slice(), traj)?;
    let g = jets.grid;
    let m = g.delay_steps as isize;
    let mut acc = Integrated::new();
    let mut excluded = Vec::new();
    let mut running = 0.0;
    for i in g.first()..=g.last() {
        if i > g.first() {
            let (a, b) = jets.interval(i - 1)?;
            running += 0.5 * g.h * (a.dt + b.dt);
        }
        let inner = i <= g.boundary();
        let shifts: &[isize] = if inner { &[0, -m, m] } else { &[0, -m] };
        if touches_kink(traj, i, shifts) {
            excluded.push(i);
            continue;
        }
        let (bracket, regime) = dbr_bracket_at(&jets, traj, i)?;
        acc.push(i, regime, vec![bracket - running], vec![bracket]);
    }
    Ok(acc.into_report("dubois_reymond", &g, excluded).finish(g.h))
}

/// `F - q̇·(∂₃F + ∂₅F(t+τ))` on the inner regime, `F - q̇·∂₃F` on the outer.
fn dbr_bracket_at(jets: &Jets, traj: &Trajectory, i: usize) -> Result<(f64, Regime)> {
    let here = jets.node(i)?;
    let (b, regime) = momentum(jets, i)?;
    Ok((here.value - dot(traj.rate(i), &b), regime))
}

/// `∂₃F(t) + ∂₅F(t+τ)` on the inner regime, `∂₃F(t)` on the outer.
fn momentum(jets: &Jets, i: usize) -> Result<(Vec<f64>, Regime)> {
    let here = jets.node(i)?;
    if i <= jets.grid.boundary() {
        Ok((add(&here.dqd, &jets.forward(i)?.dqdtau), Regime::Inner))
    } else {
        Ok((here.dqd.clone(), Regime::Outer))
    }
}

/// Drift of the candidate constant on one regime.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeDrift {
    pub regime: Regime,
    pub drift: f64,
}

/// Candidate constant of motion along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoetherProfile {
    pub nodes: Vec<usize>,
    pub times: Vec<f64>,
    pub regimes: Vec<Regime>,
    pub values: Vec<f64>,
    pub excluded: Vec<usize>,
    /// `max - min` over every reported node.
    pub drift: f64,
    pub regime_drift: Vec<RegimeDrift>,
    /// Time `t2 - τ` where the formula switches.
    pub boundary: f64,
    pub tolerance: f64,
    /// Whether the drift on each regime is within tolerance.
    pub passed: bool,
}

impl NoetherProfile {
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.passed = self.max_regime_drift() <= tolerance;
        self
    }

    pub fn max_regime_drift(&self) -> f64 {
        self.regime_drift.iter().fold(0.0f64, |a, r| a.max(r.drift))
    }

    /// Value at grid node `node`, if reported.
    pub fn at_node(&self, node: usize) -> Option<f64> {
        self.nodes.iter().position(|&i| i == node).map(|k| self.values[k])
    }
}

fn spread<'a>(values: impl Iterator<Item = &'a f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if lo.is_finite() && hi.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

/// Noether quantity
/// `C = -Φ + (∂₃F + ∂₅F(t+τ))·ξ + (F - q̇·(∂₃F + ∂₅F(t+τ)))·η`
/// on the inner regime, without the `∂₅F` terms on the outer regime.
pub fn noether_constant(
    problem: &DelayedProblem,
    lambda: &MultiplierVector,
    traj: &Trajectory,
    symmetry: &Symmetry,
) -> Result<NoetherProfile> {
    lambda.check(problem)?;
    if symmetry.xi.len() != problem.n() {
        return Err(Error::Dimension(format!(
            "symmetry has {} components, problem has n = {}",
            symmetry.xi.len(),
            problem.n()
        )));
    }
    let lam = lambda.as_slice();
    let combo = Combination::augmented(problem, lam);
    let jets = Jets::compute(problem, &combo, lam, traj)?;
    let g = jets.grid;
    let m = g.delay_steps as isize;
    let (mut nodes, mut times, mut regimes, mut values, mut excluded) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for i in g.first()..=g.last() {
        let shifts: &[isize] = if i <= g.boundary() { &[0, -m, m] } else { &[0, -m] };
        if touches_kink(traj, i, shifts) {
            excluded.push(i);
            continue;
        }
        let x = node_point(&g, traj, lam, i);
        let f = jets.node(i)?.value;
        let (b, regime) = momentum(&jets, i)?;
        let xi = symmetry
            .xi
            .iter()
            .map(|e| e.evaluate(&x))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let eta = symmetry.eta.evaluate(&x)?;
        let c = -symmetry.gauge.evaluate(&x)? + dot(&b, &xi) + (f - dot(traj.rate(i), &b)) * eta;
        nodes.push(i);
        times.push(g.time(i));
        regimes.push(regime);
        values.push(c);
    }
    let regime_drift = [Regime::Inner, Regime::Outer]
        .into_iter()
        .map(|regime| RegimeDrift {
            regime,
            drift: spread(values.iter().zip(&regimes).filter(|(_, r)| **r == regime).map(|(v, _)| v)),
        })
        .collect();
    let profile = NoetherProfile {
        drift: spread(values.iter()),
        nodes,
        times,
        regimes,
        values,
        excluded,
        regime_drift,
        boundary: g.time(g.boundary()),
        tolerance: ANALYTIC_TOL,
        passed: true,
    };
    Ok(profile.with_tolerance(ANALYTIC_TOL))
}

/// Normal or abnormal extremal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Normality {
    Normal,
    Abnormal,
}

/// Classification plus the constraint-only Euler–Lagrange report of every
/// constraint row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbnormalityCheck {
    pub normality: Normality,
    pub rows: Vec<ConditionReport>,
}

/// A trajectory is abnormal when it already satisfies the Euler–Lagrange
/// equations of every constraint integrand `g_j` on its own, which makes the
/// multiplier rule degenerate. Problems without constraints are normal.
pub fn abnormality_check(problem: &DelayedProblem, traj: &Trajectory, tolerance: f64) -> Result<AbnormalityCheck> {
    let grid = Grid::of(problem, traj)?;
    let mut rows = Vec::with_capacity(problem.k());
    for (j, g) in problem.constraints().iter().enumerate() {
        let jets = Jets::compute(problem, &Combination::single(g), &[], traj)?;
        let r = integrated_el(&format!("constraint_euler_lagrange[{j}]"), &jets, traj, grid.boundary())?;
        rows.push(r.with_tolerance(tolerance));
    }
    let abnormal = !rows.is_empty() && rows.iter().all(|r| r.passed);
    Ok(AbnormalityCheck {
        normality: if abnormal { Normality::Abnormal } else { Normality::Normal },
        rows,
    })
}

/// Euler–Lagrange, hypothesis and DuBois–Reymond reports, judged at
/// `tolerance`.
pub fn verify_all(
    problem: &DelayedProblem,
    lambda: &MultiplierVector,
    traj: &Trajectory,
    tolerance: f64,
) -> Result<Vec<ConditionReport>> {
    Ok(vec![
        el_residual(problem, lambda, traj)?.with_tolerance(tolerance),
        cdur_residual(problem, lambda, traj)?.with_tolerance(tolerance),
        dbr_residual(problem, lambda, traj)?.with_tolerance(tolerance),
    ])
}
