use isodelay::builtin;
use isodelay::conditions::{el_residual, el_residual_split, solver_tolerance};
use isodelay::model::{Grid, MultiplierVector};
use isodelay::solver::{solve_isoperimetric, SolveSettings};

#[test]
fn moving_the_regime_switch_is_detected() {
    let problem = builtin::problem("delayed").unwrap();
    let result = solve_isoperimetric(&problem, &SolveSettings::with_steps(80)).unwrap();
    assert!(result.converged);
    let lambda = MultiplierVector::new(result.lambda.clone()).unwrap();
    let traj = &result.trajectory;
    let grid = Grid::of(&problem, traj).unwrap();
    let right = el_residual(&problem, &lambda, traj).unwrap();
    assert!(right.sup_norm <= solver_tolerance(result.h));
    // the node at t2 - τ is a breakpoint and excluded, so moving the switch
    // one node earlier changes nothing; two or more is visible
    for shift in [2, 4, 8] {
        let wrong = el_residual_split(&problem, &lambda, traj, grid.boundary() - shift).unwrap();
        assert!(
            wrong.sup_norm > 1e3 * right.sup_norm.max(1e-12),
            "switch moved by {shift}: {:e} vs {:e}",
            wrong.sup_norm,
            right.sup_norm
        );
    }
    // past t2 - τ the inner formula would read beyond t2
    assert!(el_residual_split(&problem, &lambda, traj, grid.boundary() + 1).is_err());
}
