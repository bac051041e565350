//! Time-translation symmetry: the Noether quantity coincides with the
//! DuBois–Reymond bracket, and the invariance test tells autonomous
//! integrands from time-dependent ones.

use isodelay::builtin;
use isodelay::conditions;
use isodelay::model::{MultiplierVector, Symmetry};

fn main() -> isodelay::Result<()> {
    let sym = Symmetry::time_translation(1);
    for name in ["example33", "parabola", "nonautonomous"] {
        let problem = builtin::problem(name)?;
        let traj = builtin::reference_trajectory(name, builtin::default_steps(name))?;
        let lambda = MultiplierVector::new(builtin::reference_lambda(name).unwrap_or(vec![1.0]))?;

        let profile = conditions::noether_constant(&problem, &lambda, &traj, &sym)?;
        let dbr = conditions::dbr_residual(&problem, &lambda, &traj)?;
        let gap = profile
            .nodes
            .iter()
            .zip(&profile.values)
            .filter_map(|(&i, c)| {
                let k = dbr.nodes.iter().position(|&j| j == i)?;
                Some((c - dbr.bracket[k][0]).abs())
            })
            .fold(0.0, f64::max);

        let span = (problem.t1(), problem.t2());
        let inv = conditions::invariance_residual(&problem, &lambda, &sym, &traj, span)?;
        println!("{name:>14}: |Noether - bracket| = {gap:.1e}, invariance residual = {inv:.3e}");
    }
    Ok(())
}
