//! Control form of a solved problem: build the costate from the extremal and
//! check the weak Pontryagin conditions and the Hamiltonian identity.

use isodelay::builtin;
use isodelay::conditions::{solver_tolerance, summary_table};
use isodelay::model::MultiplierVector;
use isodelay::ocp::{control_form_extremal, verify_ocp, HamiltonianContext};
use isodelay::solver::{solve_isoperimetric, SolveSettings};

fn main() -> isodelay::Result<()> {
    for name in ["parabola", "delayed"] {
        let problem = builtin::problem(name)?;
        let result = solve_isoperimetric(&problem, &SolveSettings::with_steps(builtin::default_steps(name)))?;
        let lambda = MultiplierVector::new(result.lambda.clone())?;
        let (ocp, full) = control_form_extremal(&problem, &lambda, &result.trajectory)?;
        let ctx = HamiltonianContext::new(&ocp, &lambda)?;
        let reports = verify_ocp(&ctx, &full, solver_tolerance(result.h))?;
        println!("{name} (lambda = {:.6})", result.lambda[0]);
        println!("{}", summary_table(&reports));
    }
    Ok(())
}
