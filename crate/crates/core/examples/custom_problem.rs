//! Define a problem in JSON, solve it, and round-trip the trajectory
//! through CSV.
//!
//! The Lagrangian couples `qd` with `qdtau`, so the invariance hypothesis
//! behind the delayed DuBois-Reymond condition does not hold on this
//! extremal. Expect the Euler-Lagrange rows to pass and the DuBois-Reymond
//! and hypothesis rows to fail.

use isodelay::conditions::{summary_table, verify_all, solver_tolerance};
use isodelay::model::{trajectory_from_csv, trajectory_to_csv, DelayedProblem, MultiplierVector};
use isodelay::solver::{solve_isoperimetric, SolveSettings};

const PROBLEM: &str = r#"{
  "n": 1,
  "tau": 0.5,
  "t1": 0.0,
  "t2": 2.0,
  "L": "qd[0]^2 + qd[0]*qdtau[0] + q[0]^2/4",
  "g": ["q[0]*qtau[0]"],
  "history": { "pieces": [{ "from": -0.5, "to": 0.0, "coeffs": [0.2, 0.4] }] },
  "terminal": [0.0],
  "levels": [0.3]
}"#;

fn main() -> isodelay::Result<()> {
    let problem = DelayedProblem::from_json_str(PROBLEM)?;
    let result = solve_isoperimetric(&problem, &SolveSettings::with_steps(80))?;
    println!(
        "converged {} in {} outer iterations, lambda = {:.6}, J = {:.6}",
        result.converged, result.outer_iterations, result.lambda[0], result.objective
    );

    let mut csv = Vec::new();
    trajectory_to_csv(&result.trajectory, &mut csv)?;
    let back = trajectory_from_csv(csv.as_slice())?.with_history(problem.history(), problem.t1());
    let lambda = MultiplierVector::new(result.lambda.clone())?;
    let reports = verify_all(&problem, &lambda, &back, solver_tolerance(result.h))?;
    print!("{}", summary_table(&reports));
    Ok(())
}
