//! Solve the delay-free isoperimetric parabola and watch the error shrink
//! under grid refinement.
//!
//! Minimizes `∫ q̇²` subject to `∫ q = 1`, `q(0) = q(1) = 0`, whose exact
//! extremal is `6t(1 - t)` with multiplier 24.

use isodelay::builtin;
use isodelay::solver::{refine, solve_isoperimetric, SolveSettings};

fn main() -> isodelay::Result<()> {
    let problem = builtin::problem("parabola")?;
    let settings = SolveSettings::with_steps(40);
    let mut result = solve_isoperimetric(&problem, &settings)?;
    println!("{:>6}  {:>12}  {:>12}  {:>6}", "steps", "lambda", "sup error", "ratio");
    let mut previous: Option<f64> = None;
    for _ in 0..4 {
        let tr = &result.trajectory;
        let err = (0..tr.nodes())
            .map(|i| (tr.node(i)[0] - builtin::parabola_extremal(tr.time(i))).abs())
            .fold(0.0, f64::max);
        let ratio = previous.map_or(String::new(), |p| format!("{:.2}", p / err));
        println!("{:>6}  {:>12.6}  {:>12.3e}  {:>6}", result.steps, result.lambda[0], err, ratio);
        previous = Some(err);
        result = refine(&problem, &result, 2, &settings)?;
    }
    Ok(())
}
