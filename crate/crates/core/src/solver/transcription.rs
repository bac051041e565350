use crate::conditions::jets::Combination;
use crate::error::{Error, Result};
use crate::expr::{EvalPoint, Slot};
use crate::model::{DelayedProblem, Grid, MultiplierVector, Trajectory};

/// Trapezoid value of one integrand and its gradient with respect to every
/// node value (node-major, `n` entries per node).
///
/// On interval `j` the velocity is the secant slope `s_j = (q_{j+1} - q_j)/h`
/// and the delayed velocity is `s_{j-m}`; both endpoints carry weight `h/2`.
/// A node therefore enters through its value at `t_j`, through the delayed
/// value at `t_j + τ`, and through the slopes of the four intervals touching
/// `t_j` and `t_j + τ`.
pub(crate) fn assemble(
    combo: &Combination<'_>,
    grid: &Grid,
    n: usize,
    values: &[f64],
    lambda: &[f64],
    gradient: Option<&mut [f64]>,
) -> Result<f64> {
    let m = grid.delay_steps;
    let h = grid.h;
    let last = grid.last();
    let slopes: Vec<f64> = (0..last)
        .flat_map(|j| (0..n).map(move |c| (values[(j + 1) * n + c] - values[j * n + c]) / h))
        .collect();
    let node = |i: usize| &values[i * n..(i + 1) * n];
    let slope = |j: usize| &slopes[j * n..(j + 1) * n];
    let mut total = 0.0;
    let mut grad = gradient;
    if let Some(g) = grad.as_deref_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    for j in grid.first()..last {
        let (s, sd) = (slope(j), slope(j - m));
        for (i, id) in [(j, j - m), (j + 1, j + 1 - m)] {
            let x = EvalPoint {
                t: grid.time(i),
                q: node(i),
                qd: s,
                qtau: node(id),
                qdtau: sd,
                lambda,
                ..Default::default()
            };
            match grad.as_deref_mut() {
                None => total += 0.5 * h * combo.value(&x)?,
                Some(g) => {
                    let d = combo.partials(&x, n)?;
                    total += 0.5 * h * d.value;
                    for c in 0..n {
                        g[i * n + c] += 0.5 * h * d.dq[c];
                        g[id * n + c] += 0.5 * h * d.dqtau[c];
                        // d s_j / d q_{j+1} = 1/h, d s_j / d q_j = -1/h
                        g[(j + 1) * n + c] += 0.5 * d.dqd[c];
                        g[j * n + c] -= 0.5 * d.dqd[c];
                        g[(j + 1 - m) * n + c] += 0.5 * d.dqdtau[c];
                        g[(j - m) * n + c] -= 0.5 * d.dqdtau[c];
                    }
                }
            }
        }
    }
    Ok(total)
}

/// Nodes the optimizer may move: strictly inside `(t1, t2)`.
pub(crate) fn free_range(grid: &Grid) -> std::ops::Range<usize> {
    grid.first() + 1..grid.last()
}

/// Trapezoid value of `∫ F` over `[t1, t2]` and its exact gradient with
/// respect to the free node values (nodes strictly inside `(t1, t2)`,
/// node-major). History nodes, the node at `t1` and the terminal node are
/// held fixed.
pub fn discretized_objective(
    problem: &DelayedProblem,
    lambda: &MultiplierVector,
    traj: &Trajectory,
) -> Result<(f64, Vec<f64>)> {
    lambda.check(problem)?;
    if problem.mode() != crate::expr::Mode::Lagrangian {
        return Err(Error::invalid("mode", "transcription needs a Lagrangian problem"));
    }
    let grid = Grid::of(problem, traj)?;
    let n = problem.n();
    let combo = Combination::augmented(problem, lambda.as_slice());
    let mut full = vec![0.0; traj.values().len()];
    let value = assemble(&combo, &grid, n, traj.values(), lambda.as_slice(), Some(&mut full))?;
    let free = free_range(&grid);
    Ok((value, full[free.start * n..free.end * n].to_vec()))
}

/// Whether any integrand reads delayed arguments.
pub(crate) fn uses_delay(problem: &DelayedProblem) -> bool {
    std::iter::once(problem.lagrangian())
        .chain(problem.constraints())
        .any(|e| e.free_slots().iter().any(|s| matches!(s, Slot::Qtau(_) | Slot::Qdtau(_))))
}
