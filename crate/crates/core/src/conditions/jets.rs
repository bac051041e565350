use crate::error::{Error, Result};
use crate::expr::{EvalPoint, Expression, Slot};
use crate::model::{DelayedProblem, Grid, Trajectory};

/// Value and first partials of an integrand at one point, split by argument
/// family: `dt = ∂₁`, `dq = ∂₂`, `dqd = ∂₃`, `dqtau = ∂₄`, `dqdtau = ∂₅`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Partials {
    pub value: f64,
    pub dt: f64,
    pub dq: Vec<f64>,
    pub dqd: Vec<f64>,
    pub dqtau: Vec<f64>,
    pub dqdtau: Vec<f64>,
}

impl Partials {
    fn zero(n: usize) -> Self {
        Partials {
            value: 0.0,
            dt: 0.0,
            dq: vec![0.0; n],
            dqd: vec![0.0; n],
            dqtau: vec![0.0; n],
            dqdtau: vec![0.0; n],
        }
    }
}

/// Weighted sum of expressions, e.g. `L - λ·g`.
pub(crate) struct Combination<'a> {
    pub terms: Vec<(&'a Expression, f64)>,
}

impl<'a> Combination<'a> {
    /// `F = L - λ·g`. Constraint terms with a zero multiplier are skipped.
    pub fn augmented(problem: &'a DelayedProblem, lambda: &[f64]) -> Self {
        let mut terms = vec![(problem.lagrangian(), 1.0)];
        for (g, &l) in problem.constraints().iter().zip(lambda) {
            if l != 0.0 {
                terms.push((g, -l));
            }
        }
        Combination { terms }
    }

    pub fn single(e: &'a Expression) -> Self {
        Combination { terms: vec![(e, 1.0)] }
    }

    pub fn value(&self, x: &EvalPoint<'_>) -> Result<f64> {
        let mut v = 0.0;
        for (e, w) in &self.terms {
            v += w * e.evaluate(x)?;
        }
        Ok(v)
    }

    pub fn partials(&self, x: &EvalPoint<'_>, n: usize) -> Result<Partials> {
        let mut out = Partials::zero(n);
        for (e, w) in &self.terms {
            let d = e.gradient(x)?;
            out.value += w * d.value;
            for &(slot, v) in &d.partials {
                match slot {
                    Slot::T => out.dt += w * v,
                    Slot::Q(i) => out.dq[i] += w * v,
                    Slot::Qd(i) => out.dqd[i] += w * v,
                    Slot::Qtau(i) => out.dqtau[i] += w * v,
                    Slot::Qdtau(i) => out.dqdtau[i] += w * v,
                    _ => {}
                }
            }
        }
        Ok(out)
    }
}

/// Partials of an integrand at every node point `[q]_τ(t_i)`, `i >= m`, and
/// at both secant endpoints of every interval in `[t1, t2]`.
pub(crate) struct Jets {
    pub grid: Grid,
    nodes: Vec<Partials>,
    intervals: Vec<(Partials, Partials)>,
}

pub(crate) fn node_point<'a>(
    grid: &Grid,
    traj: &'a Trajectory,
    lambda: &'a [f64],
    i: usize,
) -> EvalPoint<'a> {
    let m = grid.delay_steps;
    EvalPoint {
        t: grid.time(i),
        q: traj.node(i),
        qd: traj.rate(i),
        qtau: traj.node(i - m),
        qdtau: traj.rate(i - m),
        lambda,
        ..Default::default()
    }
}

impl Jets {
    pub fn compute(
        problem: &DelayedProblem,
        combo: &Combination<'_>,
        lambda: &[f64],
        traj: &Trajectory,
    ) -> Result<Self> {
        let grid = Grid::of(problem, traj)?;
        let n = problem.n();
        let nodes = (grid.first()..=grid.last())
            .map(|i| combo.partials(&node_point(&grid, traj, lambda, i), n))
            .collect::<Result<Vec<_>>>()?;
        let sec = crate::model::Secants { grid, traj };
        let intervals = (grid.first()..grid.last())
            .map(|j| {
                sec.endpoints(j, lambda, |a, b| -> Result<_> {
                    Ok((combo.partials(a, n)?, combo.partials(b, n)?))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Jets {
            grid,
            nodes,
            intervals,
        })
    }

    /// Partials at the node point of node `i` (`m <= i <= last`).
    pub fn node(&self, i: usize) -> Result<&Partials> {
        if i > self.grid.last() {
            return Err(Error::BeyondHorizon { node: i });
        }
        if i < self.grid.first() {
            return Err(Error::NodeOutOfRange {
                node: i,
                len: self.grid.nodes(),
            });
        }
        Ok(&self.nodes[i - self.grid.first()])
    }

    /// Partials at the node point of `t_i + τ`.
    pub fn forward(&self, i: usize) -> Result<&Partials> {
        self.node(i + self.grid.delay_steps)
    }

    /// Secant endpoints of interval `[t_j, t_{j+1}]`.
    pub fn interval(&self, j: usize) -> Result<&(Partials, Partials)> {
        if j >= self.grid.last() {
            return Err(Error::BeyondHorizon { node: j + 1 });
        }
        Ok(&self.intervals[j - self.grid.first()])
    }
}
