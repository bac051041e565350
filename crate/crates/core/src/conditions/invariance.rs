use super::jets::{node_point, Combination};
use crate::error::{Error, Result};
use crate::expr::{EvalPoint, Expression, Slot};
use crate::model::{DelayedProblem, Grid, MultiplierVector, Secants, Symmetry, Trajectory};

/// Step of the central difference in the group parameter `s`.
const GROUP_STEP: f64 = 1e-5;

/// Generator value and its total time derivative along a path with slope
/// `rate`.
fn generator(e: &Expression, t: f64, q: &[f64], rate: &[f64]) -> Result<(f64, f64)> {
    let x = EvalPoint {
        t,
        q,
        ..Default::default()
    };
    let d = e.gradient(&x)?;
    let mut total = d.get(Slot::T);
    for (k, r) in rate.iter().enumerate() {
        total += d.get(Slot::Q(k)) * r;
    }
    Ok((d.value, total))
}

fn generators(sym: &Symmetry, t: f64, q: &[f64], rate: &[f64]) -> Result<(f64, f64, Vec<f64>, Vec<f64>)> {
    let (eta, eta_dot) = generator(&sym.eta, t, q, rate)?;
    let mut xi = Vec::with_capacity(q.len());
    let mut xi_dot = Vec::with_capacity(q.len());
    for e in &sym.xi {
        let (v, d) = generator(e, t, q, rate)?;
        xi.push(v);
        xi_dot.push(d);
    }
    Ok((eta, eta_dot, xi, xi_dot))
}

/// Transformed integrand `F(...)·(1 + s·η̇)` at one point.
fn transformed(combo: &Combination<'_>, sym: &Symmetry, x: &EvalPoint<'_>, tau: f64, s: f64) -> Result<f64> {
    let (eta, eta_dot, xi, xi_dot) = generators(sym, x.t, x.q, x.qd)?;
    let (_, eta_dot_d, xi_d, xi_dot_d) = generators(sym, x.t - tau, x.qtau, x.qdtau)?;
    let shift = |v: &[f64], d: &[f64]| -> Vec<f64> { v.iter().zip(d).map(|(a, b)| a + s * b).collect() };
    let scale = |v: &[f64], d: &[f64], den: f64| -> Vec<f64> {
        v.iter().zip(d).map(|(a, b)| (a + s * b) / den).collect()
    };
    let q = shift(x.q, &xi);
    let qd = scale(x.qd, &xi_dot, 1.0 + s * eta_dot);
    let qtau = shift(x.qtau, &xi_d);
    let qdtau = scale(x.qdtau, &xi_dot_d, 1.0 + s * eta_dot_d);
    let y = EvalPoint {
        t: x.t + s * eta,
        q: &q,
        qd: &qd,
        qtau: &qtau,
        qdtau: &qdtau,
        lambda: x.lambda,
        ..Default::default()
    };
    Ok(combo.value(&y)? * (1.0 + s * eta_dot))
}

fn node_of(grid: &Grid, t: f64, field: &str) -> Result<usize> {
    let x = (t - grid.t_start()) / grid.h;
    let i = x.round();
    if (x - i).abs() > 1e-6 || i < grid.first() as f64 || i > grid.last() as f64 {
        return Err(Error::invalid(
            field,
            format!("{t} is not a grid node in [t1, t2]"),
        ));
    }
    Ok(i as usize)
}

/// Invariance defect of `F` under the transformation group of `symmetry`
/// on the subinterval `[a, b]`:
///
/// `d/ds ∫_a^b F(transformed arguments)·(1 + s·η̇) dt |_{s=0} - (Φ(b) - Φ(a))`.
///
/// The derivative is a central difference in `s`; the integral uses the
/// interval-secant trapezoid. Both endpoints must be grid nodes inside
/// `[t1, t2]`. Zero (up to the difference error) means the trajectory and
/// subinterval are compatible with invariance up to the gauge term.
pub fn invariance_residual(
    problem: &DelayedProblem,
    lambda: &MultiplierVector,
    symmetry: &Symmetry,
    traj: &Trajectory,
    subinterval: (f64, f64),
) -> Result<f64> {
    lambda.check(problem)?;
    if symmetry.xi.len() != problem.n() {
        return Err(Error::Dimension("symmetry dimension differs from the problem".into()));
    }
    let grid = Grid::of(problem, traj)?;
    let (a, b) = subinterval;
    let ia = node_of(&grid, a, "subinterval")?;
    let ib = node_of(&grid, b, "subinterval")?;
    if ia >= ib {
        return Err(Error::invalid("subinterval", "start must precede end"));
    }
    let lam = lambda.as_slice();
    let combo = Combination::augmented(problem, lam);
    let sec = Secants { grid, traj };
    let tau = problem.tau();
    let integral = |s: f64| -> Result<f64> {
        let mut acc = 0.0;
        for j in ia..ib {
            acc += sec.endpoints(j, lam, |l, r| -> Result<f64> {
                Ok(0.5 * grid.h * (transformed(&combo, symmetry, l, tau, s)? + transformed(&combo, symmetry, r, tau, s)?))
            })?;
        }
        Ok(acc)
    };
    let derivative = (integral(GROUP_STEP)? - integral(-GROUP_STEP)?) / (2.0 * GROUP_STEP);
    let gauge = symmetry.gauge.evaluate(&node_point(&grid, traj, lam, ib))?
        - symmetry.gauge.evaluate(&node_point(&grid, traj, lam, ia))?;
    Ok(derivative - gauge)
}
