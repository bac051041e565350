//! Normal versus abnormal extremals.
//!
//! An extremal is abnormal when it already satisfies the Euler–Lagrange
//! equations of the constraint integrand alone; the multiplier is then
//! undetermined.

use isodelay::builtin;
use isodelay::conditions::{abnormality_check, ANALYTIC_TOL};

fn main() -> isodelay::Result<()> {
    for name in ["example33", "parabola"] {
        let problem = builtin::problem(name)?;
        let traj = builtin::reference_trajectory(name, builtin::default_steps(name))?;
        let check = abnormality_check(&problem, &traj, ANALYTIC_TOL)?;
        let row = &check.rows[0];
        println!("{name:>10}: {:?} (constraint-only EL residual {:.2e})", check.normality, row.sup_norm);
    }
    Ok(())
}
