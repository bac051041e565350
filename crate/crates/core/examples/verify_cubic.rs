//! Check the piecewise-linear extremal of the cubic example against every
//! necessary condition, for several multipliers.
//!
//! `L = (q̇ + q̇_τ)³`, `g = (q̇ + q̇_τ)²`, `τ = 1` on `[0, 3]`. Along the
//! extremal `q̇ + q̇_τ = 0`, so all partials vanish and any multiplier works.

use isodelay::builtin;
use isodelay::conditions::{self, summary_table, Regime};
use isodelay::model::{MultiplierVector, Symmetry};

fn main() -> isodelay::Result<()> {
    let problem = builtin::problem("example33")?;
    let traj = builtin::reference_trajectory("example33", 300)?;
    println!("kinks at nodes {:?}\n", traj.kink_set());
    for l in [-1.0, 0.0, 2.0] {
        let lambda = MultiplierVector::new(vec![l])?;
        let reports = conditions::verify_all(&problem, &lambda, &traj, 1e-12)?;
        println!("lambda = {l}");
        print!("{}", summary_table(&reports));
        let el = &reports[0];
        println!(
            "EL constants: inner {:?}, outer {:?}",
            el.constant(Regime::Inner),
            el.constant(Regime::Outer)
        );
        let noether = conditions::noether_constant(&problem, &lambda, &traj, &Symmetry::time_translation(1))?;
        println!("Noether drift {:.2e}\n", noether.drift);
    }
    Ok(())
}
