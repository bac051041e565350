//! A coupled two-component problem with a delay, solved and verified. The
//! delayed terms make the extremal violate the invariance hypothesis, so only
//! the Euler-Lagrange rows are expected to pass.

use isodelay::builtin;
use isodelay::conditions::{summary_table, verify_all};
use isodelay::solver::{solve_isoperimetric, SolveSettings};
use isodelay::model::MultiplierVector;

fn main() -> isodelay::Result<()> {
    let problem = builtin::problem("oscillator2d")?;
    let result = solve_isoperimetric(&problem, &SolveSettings::with_steps(80))?;
    println!(
        "converged {}, lambda = {:?}, |I - l| = {:.1e}",
        result.converged, result.lambda, result.constraint_residual
    );
    let tr = &result.trajectory;
    for i in (0..tr.nodes()).step_by(20) {
        println!("t = {:5.2}  q = {:?}", tr.time(i), tr.node(i));
    }
    let lambda = MultiplierVector::new(result.lambda.clone())?;
    print!("{}", summary_table(&verify_all(&problem, &lambda, tr, 10.0 * result.h * result.h)?));
    Ok(())
}
