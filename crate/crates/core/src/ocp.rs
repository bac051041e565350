//! Optimal-control form: `q̇ = φ(t, q, u, q_τ, u_τ)` with isoperimetric
//! constraints, checked through the Hamiltonian
//! `H = L - λ·g + p·φ`.
//!
//! Partials of `H` are numbered by argument position:
//! `∂₁ = t`, `∂₂ = q`, `∂₃ = u`, `∂₄ = q_τ`, `∂₅ = u_τ`, `∂₆ = p`.
//! There is no control solver; supplied `(q, u, p)` triples are verified,
//! and for `φ = u` a costate can be built from a Lagrangian extremal with
//! [`control_form_extremal`].

use serde::Serialize;

use crate::conditions::jets::{Combination, Jets};
use crate::conditions::{add, dot, stencil, touches_kink, ConditionReport, Integrated, Regime, ANALYTIC_TOL};
use crate::error::{Error, Result};
use crate::expr::{EvalPoint, Mode, Slot};
use crate::model::{DelayedProblem, Grid, MultiplierVector, Trajectory};

/// A control-form problem together with fixed multipliers.
#[derive(Debug, Clone)]
pub struct HamiltonianContext<'a> {
    problem: &'a DelayedProblem,
    lambda: Vec<f64>,
}

/// Value of `H` and its partials at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HamiltonianPartials {
    pub value: f64,
    pub dt: f64,
    pub dq: Vec<f64>,
    pub du: Vec<f64>,
    pub dqtau: Vec<f64>,
    pub dutau: Vec<f64>,
    /// `∂₆H = φ`.
    pub dp: Vec<f64>,
}

impl<'a> HamiltonianContext<'a> {
    pub fn new(problem: &'a DelayedProblem, lambda: &MultiplierVector) -> Result<Self> {
        if problem.mode() != Mode::Ocp {
            return Err(Error::invalid("mode", "the Hamiltonian needs a control-form problem"));
        }
        lambda.check(problem)?;
        Ok(HamiltonianContext {
            problem,
            lambda: lambda.as_slice().to_vec(),
        })
    }

    pub fn problem(&self) -> &DelayedProblem {
        self.problem
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn n(&self) -> usize {
        self.problem.n()
    }

    pub fn m(&self) -> usize {
        self.problem.control_dim()
    }

    pub fn k(&self) -> usize {
        self.problem.k()
    }

    fn costate<'x>(&self, x: &EvalPoint<'x>) -> Result<&'x [f64]> {
        if x.p.len() != self.n() {
            return Err(Error::Missing(format!(
                "costate with {} components at t = {}",
                self.n(),
                x.t
            )));
        }
        Ok(x.p)
    }

    pub fn partials(&self, x: &EvalPoint<'_>) -> Result<HamiltonianPartials> {
        let (n, m) = (self.n(), self.m());
        let p = self.costate(x)?;
        let mut out = HamiltonianPartials {
            value: 0.0,
            dt: 0.0,
            dq: vec![0.0; n],
            du: vec![0.0; m],
            dqtau: vec![0.0; n],
            dutau: vec![0.0; m],
            dp: vec![0.0; n],
        };
        let weighted = std::iter::once((self.problem.lagrangian(), 1.0))
            .chain(self.problem.constraints().iter().zip(self.lambda.iter().map(|l| -l)))
            .chain(self.problem.dynamics().iter().zip(p.iter().copied()));
        for (e, w) in weighted {
            let d = e.gradient(x)?;
            out.value += w * d.value;
            for &(slot, v) in &d.partials {
                match slot {
                    Slot::T => out.dt += w * v,
                    Slot::Q(i) => out.dq[i] += w * v,
                    Slot::U(i) => out.du[i] += w * v,
                    Slot::Qtau(i) => out.dqtau[i] += w * v,
                    Slot::Utau(i) => out.dutau[i] += w * v,
                    _ => {}
                }
            }
        }
        for (d, e) in out.dp.iter_mut().zip(self.problem.dynamics()) {
            *d = e.evaluate(x)?;
        }
        Ok(out)
    }
}

/// `H = L - λ·g + p·φ` at one point.
pub fn hamiltonian_value(ctx: &HamiltonianContext<'_>, x: &EvalPoint<'_>) -> Result<f64> {
    let p = ctx.costate(x)?;
    let mut h = ctx.problem.lagrangian().evaluate(x)?;
    for (g, l) in ctx.problem.constraints().iter().zip(&ctx.lambda) {
        h -= l * g.evaluate(x)?;
    }
    for (phi, pi) in ctx.problem.dynamics().iter().zip(p) {
        h += pi * phi.evaluate(x)?;
    }
    Ok(h)
}

/// Node partials of `H` on `[t1, t2]`, plus the grid.
struct Sampled<'t> {
    grid: Grid,
    traj: &'t Trajectory,
    nodes: Vec<HamiltonianPartials>,
}

impl<'t> Sampled<'t> {
    fn new(ctx: &HamiltonianContext<'_>, traj: &'t Trajectory) -> Result<Self> {
        let grid = Grid::of(ctx.problem, traj)?;
        if traj.control_dim() != ctx.m() {
            return Err(Error::Missing(format!(
                "trajectory needs {} control columns, has {}",
                ctx.m(),
                traj.control_dim()
            )));
        }
        match traj.costate_start() {
            Some(s) if s <= grid.first() => {}
            _ => return Err(Error::Missing("trajectory needs costate values on [t1, t2]".into())),
        }
        let nodes = (grid.first()..=grid.last())
            .map(|i| ctx.partials(&point(&grid, traj, &ctx.lambda, i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Sampled { grid, traj, nodes })
    }

    fn at(&self, i: usize) -> Result<&HamiltonianPartials> {
        if i > self.grid.last() {
            return Err(Error::BeyondHorizon { node: i });
        }
        Ok(&self.nodes[i - self.grid.first()])
    }

    fn regime(&self, i: usize) -> Regime {
        if i <= self.grid.boundary() {
            Regime::Inner
        } else {
            Regime::Outer
        }
    }

    /// Whether the condition at `i` reads a kink; `forward` conditions also
    /// read `t + τ`.
    fn touches(&self, i: usize, forward: bool) -> bool {
        let m = self.grid.delay_steps as isize;
        if forward {
            touches_kink(self.traj, i, &[0, -m, m])
        } else {
            touches_kink(self.traj, i, &[0, -m])
        }
    }
}

fn point<'a>(grid: &Grid, traj: &'a Trajectory, lambda: &'a [f64], i: usize) -> EvalPoint<'a> {
    let m = grid.delay_steps;
    EvalPoint {
        t: grid.time(i),
        q: traj.node(i),
        qtau: traj.node(i - m),
        u: traj.control(i).unwrap_or(&[]),
        utau: traj.control(i - m).unwrap_or(&[]),
        p: traj.costate(i).unwrap_or(&[]),
        lambda,
        ..Default::default()
    }
}

/// State equation `q̇ - ∂₆H` at every node of `[t1, t2]`.
fn state_report(s: &Sampled<'_>) -> Result<ConditionReport> {
    let g = s.grid;
    let mut report = ConditionReport::new("state", ANALYTIC_TOL);
    for i in g.first()..=g.last() {
        if touches_kink(s.traj, i, &[0]) {
            report.excluded.push(i);
            continue;
        }
        let v = s.traj.rate(i).iter().zip(&s.at(i)?.dp).map(|(a, b)| a - b).collect();
        report.push(i, g.time(i), s.regime(i), v);
    }
    Ok(report.finish(g.h))
}

/// Adjoint equation in integrated form: on the inner regime
/// `p(t) + ∫_{t1}^t (∂₂H + ∂₄H(s+τ)) ds` is constant, on the outer regime
/// `p(t) + ∫_{t2-τ}^t ∂₂H ds`.
fn adjoint_report(s: &Sampled<'_>) -> Result<ConditionReport> {
    let g = s.grid;
    let (m, h, n) = (g.delay_steps, g.h, s.traj.dim());
    let split = g.boundary();
    let nodes = g.nodes();
    let mut acc = Integrated::new();
    let mut excluded = Vec::new();
    let mut costate = vec![Vec::new(); nodes];
    let mut rhs = vec![Vec::new(); nodes];
    let mut ok = vec![false; nodes];
    let p = |i: usize| s.traj.costate(i).unwrap().to_vec();

    let mut running = vec![0.0; n];
    for i in g.first()..=split {
        let f = add(&s.at(i)?.dq, &s.at(i + m)?.dqtau);
        if i > g.first() {
            let b = add(&s.at(i - 1)?.dq, &s.at(i - 1 + m)?.dqtau);
            for c in 0..n {
                running[c] += 0.5 * h * (b[c] + f[c]);
            }
        }
        costate[i] = p(i);
        rhs[i] = f.iter().map(|v| -v).collect();
        ok[i] = !s.touches(i, true);
        if ok[i] {
            acc.push(i, Regime::Inner, add(&costate[i], &running), costate[i].clone());
        } else {
            excluded.push(i);
        }
    }
    let (inner_p, inner_rhs, inner_ok) = (costate.clone(), rhs.clone(), ok.clone());

    let mut running = vec![0.0; n];
    for i in split..=g.last() {
        if i > split {
            let (a, b) = (&s.at(i - 1)?.dq, &s.at(i)?.dq);
            for c in 0..n {
                running[c] += 0.5 * h * (a[c] + b[c]);
            }
        }
        costate[i] = p(i);
        rhs[i] = s.at(i)?.dq.iter().map(|v| -v).collect();
        ok[i] = !s.touches(i, false);
        if i == split {
            continue;
        }
        if ok[i] {
            acc.push(i, Regime::Outer, add(&costate[i], &running), costate[i].clone());
        } else {
            excluded.push(i);
        }
    }

    let mut report = acc.into_report("adjoint", &g, excluded);
    report.differentiated = report
        .nodes
        .iter()
        .zip(&report.regimes)
        .map(|(&i, regime)| {
            let (pv, r, okv, lo, hi) = match regime {
                Regime::Inner => (&inner_p, &inner_rhs, &inner_ok, g.first(), split),
                _ => (&costate, &rhs, &ok, split, g.last()),
            };
            stencil(pv, okv, i, lo, hi, h).map(|d| d.iter().zip(&r[i]).map(|(a, b)| a - b).collect())
        })
        .collect();
    Ok(report.finish(h))
}

/// Stationarity `∂₃H(t) + ∂₅H(t+τ)` on the inner regime, `∂₃H(t)` on the
/// outer regime.
fn stationarity_report(s: &Sampled<'_>) -> Result<ConditionReport> {
    let g = s.grid;
    let mut report = ConditionReport::new("stationarity", ANALYTIC_TOL);
    for i in g.first()..=g.last() {
        let inner = i <= g.boundary();
        if s.touches(i, inner) {
            report.excluded.push(i);
            continue;
        }
        let here = &s.at(i)?.du;
        let v = if inner { add(here, &s.at(i + g.delay_steps)?.dutau) } else { here.clone() };
        report.push(i, g.time(i), s.regime(i), v);
    }
    Ok(report.finish(g.h))
}

/// `I - l` with `I` the node trapezoid of each constraint integrand.
///
/// Controls are single-valued at nodes, so a control that jumps at a node
/// makes this quadrature first order there.
fn constraint_report(ctx: &HamiltonianContext<'_>, s: &Sampled<'_>) -> Result<ConditionReport> {
    let g = s.grid;
    let mut report = ConditionReport::new("constraint", ANALYTIC_TOL);
    if ctx.k() == 0 {
        return Ok(report.finish(g.h));
    }
    let mut totals = vec![0.0; ctx.k()];
    for i in g.first()..=g.last() {
        let w = if i == g.first() || i == g.last() { 0.5 * g.h } else { g.h };
        let x = point(&g, s.traj, &ctx.lambda, i);
        for (tot, e) in totals.iter_mut().zip(ctx.problem.constraints()) {
            *tot += w * e.evaluate(&x)?;
        }
    }
    let v = totals.iter().zip(ctx.problem.levels()).map(|(a, b)| a - b).collect();
    report.push(g.last(), g.time(g.last()), Regime::Outer, v);
    Ok(report.finish(g.h))
}

/// State, adjoint, stationarity and constraint reports, in that order.
///
/// The regime switch of every family is the node at `t2 - τ`. Nodes whose
/// evaluation touches a kink of `q` are excluded.
pub fn pontryagin_residuals(ctx: &HamiltonianContext<'_>, traj: &Trajectory) -> Result<Vec<ConditionReport>> {
    let s = Sampled::new(ctx, traj)?;
    Ok(vec![
        state_report(&s)?,
        adjoint_report(&s)?,
        stationarity_report(&s)?,
        constraint_report(ctx, &s)?,
    ])
}

/// Constancy of `H(t) - ∫_{t1}^t ∂₁H ds`, with one constant per regime:
/// the costate may jump at `t2 - τ`, and `H` with it.
pub fn hamiltonian_dbr_residual(ctx: &HamiltonianContext<'_>, traj: &Trajectory) -> Result<ConditionReport> {
    let s = Sampled::new(ctx, traj)?;
    let g = s.grid;
    let mut acc = Integrated::new();
    let mut excluded = Vec::new();
    let mut running = 0.0;
    for i in g.first()..=g.last() {
        if i > g.first() {
            running += 0.5 * g.h * (s.at(i - 1)?.dt + s.at(i)?.dt);
        }
        if s.touches(i, false) {
            excluded.push(i);
            continue;
        }
        let h = s.at(i)?.value;
        acc.push(i, s.regime(i), vec![h - running], vec![h]);
    }
    Ok(acc.into_report("hamiltonian_dubois_reymond", &g, excluded).finish(g.h))
}

/// Hypothesis of the Hamiltonian identity,
/// `∂₄H(t+τ)·q̇(t) + ∂₅H(t+τ)·u̇(t)` on `[t1 - τ, t2 - τ]`, reported with
/// the windows `[t1 - τ, t1]` and `[t1 - τ, t2 - τ]`.
pub fn hamiltonian_hypothesis_residual(ctx: &HamiltonianContext<'_>, traj: &Trajectory) -> Result<ConditionReport> {
    let s = Sampled::new(ctx, traj)?;
    let g = s.grid;
    let m = g.delay_steps;
    let mut report = ConditionReport::new("hamiltonian_hypothesis", ANALYTIC_TOL);
    for i in 0..=g.boundary() {
        if touches_kink(traj, i, &[0, m as isize]) {
            report.excluded.push(i);
            continue;
        }
        let fwd = s.at(i + m)?;
        let udot = traj.control_rate(i).unwrap_or(&[]);
        let v = dot(&fwd.dqtau, traj.rate(i)) + dot(&fwd.dutau, udot);
        let regime = if i < g.first() { Regime::History } else { Regime::Inner };
        report.push(i, g.time(i), regime, vec![v]);
    }
    let start = g.time(0);
    report.add_window("t1-tau..t1", start, g.time(g.first()));
    report.add_window("t1-tau..t2-tau", start, g.time(g.boundary()));
    Ok(report.finish(g.h))
}

/// Every control-form report, judged at `tolerance`.
pub fn verify_ocp(ctx: &HamiltonianContext<'_>, traj: &Trajectory, tolerance: f64) -> Result<Vec<ConditionReport>> {
    let mut out = pontryagin_residuals(ctx, traj)?;
    out.push(hamiltonian_dbr_residual(ctx, traj)?);
    out.push(hamiltonian_hypothesis_residual(ctx, traj)?);
    Ok(out.into_iter().map(|r| r.with_tolerance(tolerance)).collect())
}

/// Control form of a Lagrangian problem with `φ = u`, and a trajectory
/// carrying `u = q̇` at every node and the costate
/// `p(t) = -(∂₃F(t) + ∂₅F(t+τ))` on the inner regime, `-∂₃F(t)` on the
/// outer one.
///
/// When `traj` is an extremal for `lambda`, the result satisfies the
/// Pontryagin conditions of the control form.
pub fn control_form_extremal(
    problem: &DelayedProblem,
    lambda: &MultiplierVector,
    traj: &Trajectory,
) -> Result<(DelayedProblem, Trajectory)> {
    lambda.check(problem)?;
    let ocp = problem.to_control_form()?;
    let combo = Combination::augmented(problem, lambda.as_slice());
    let jets = Jets::compute(problem, &combo, lambda.as_slice(), traj)?;
    let g = jets.grid;
    let n = problem.n();
    let controls: Vec<f64> = (0..g.nodes()).flat_map(|i| traj.rate(i).to_vec()).collect();
    let mut costates = Vec::with_capacity((g.last() - g.first() + 1) * n);
    for i in g.first()..=g.last() {
        let b = if i <= g.boundary() {
            add(&jets.node(i)?.dqd, &jets.forward(i)?.dqdtau)
        } else {
            jets.node(i)?.dqd.clone()
        };
        costates.extend(b.iter().map(|v| -v));
    }
    let out = traj
        .clone()
        .with_controls(n, controls)?
        .with_costates(g.first(), costates)?;
    Ok((ocp, out))
}

#[cfg(test)]
mod tests;
