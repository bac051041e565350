//! Compare the exact gradient of the discretized functional with central
//! finite differences on every built-in problem. The reference trajectories
//! are bent first, since at an extremal the gradient vanishes.

use isodelay::builtin;
use isodelay::model::{Grid, MultiplierVector, Trajectory};
use isodelay::solver::discretized_objective;

fn main() -> isodelay::Result<()> {
    let eps = 1e-6;
    for name in builtin::NAMES {
        let problem = builtin::problem(name)?;
        let reference = builtin::reference_trajectory(name, builtin::default_steps(name))?;
        let grid = Grid::of(&problem, &reference)?;
        let n = problem.n();
        let mut values = reference.values().to_vec();
        for i in grid.first() + 1..grid.last() {
            let t = reference.t_start() + i as f64 * reference.step();
            for c in 0..n {
                values[i * n + c] += 0.1 * (3.0 * t + c as f64).sin();
            }
        }
        let traj = Trajectory::new(reference.t_start(), reference.step(), n, values)?;
        let lambda = MultiplierVector::new(vec![0.5; problem.k()])?;
        let (_, grad) = discretized_objective(&problem, &lambda, &traj)?;
        let offset = (grid.first() + 1) * n;
        let mut worst: f64 = 0.0;
        for (k, g) in grad.iter().enumerate() {
            let f = |d: f64| -> isodelay::Result<f64> {
                let mut v = traj.values().to_vec();
                v[offset + k] += d;
                let t = Trajectory::new(traj.t_start(), traj.step(), n, v)?;
                Ok(discretized_objective(&problem, &lambda, &t)?.0)
            };
            let fd = (f(eps)? - f(-eps)?) / (2.0 * eps);
            worst = worst.max((g - fd).abs());
        }
        let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        println!("{name:>14}: {} unknowns, max |grad - fd| / max |grad| = {:.2e}", grad.len(), worst / scale);
    }
    Ok(())
}
