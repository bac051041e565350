//! Solve a problem where the delay matters and inspect the two regimes of
//! the Euler–Lagrange residual, the corners the delay creates, and what
//! happens if the regime switch is put in the wrong place.

use isodelay::builtin;
use isodelay::conditions::{el_residual, el_residual_split, Regime};
use isodelay::model::{Grid, MultiplierVector};
use isodelay::solver::{solve_isoperimetric, SolveSettings};

fn main() -> isodelay::Result<()> {
    let problem = builtin::problem("delayed")?;
    let result = solve_isoperimetric(&problem, &SolveSettings::with_steps(80))?;
    let traj = &result.trajectory;
    let grid = Grid::of(&problem, traj)?;
    let lambda = MultiplierVector::new(result.lambda.clone())?;
    println!("lambda = {:.6}, corners at nodes {:?}", result.lambda[0], traj.kink_set());

    let el = el_residual(&problem, &lambda, traj)?;
    for regime in [Regime::Inner, Regime::Outer] {
        println!(
            "{regime:?}: constant {:?}, sup residual {:.2e}",
            el.constant(regime),
            el.regime_sup(regime)
        );
    }
    let wrong = el_residual_split(&problem, &lambda, traj, grid.boundary() - 4)?;
    println!("switching regimes 4 nodes early: sup residual {:.2e}", wrong.sup_norm);
    Ok(())
}
