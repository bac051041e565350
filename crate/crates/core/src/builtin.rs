//! Problems shipped with the library, each with a reference trajectory.
//!
//! | name | integrand | reference trajectory |
//! |------|-----------|----------------------|
//! | `example33` | `L = (q̇ + q̇_τ)³`, `g = (q̇ + q̇_τ)²`, `τ = 1` on `[0, 3]` | the piecewise-linear extremal with slopes ±1 |
//! | `parabola` | `L = q̇²`, `g = q`, delay slots unused | `6t(1 - t)`, exact extremal with `λ = 24` |
//! | `delayed` | `q̇² + q̇q̇_τ/2 + qq_τ/2`, `g = q` | `0.75·t(2 - t)`, admissible but not extremal |
//! | `nonautonomous` | `L = t·q̇²`, `g = q` | `6t(1 - t)` |
//! | `oscillator2d` | two coupled components | quadratic interpolant of the boundary data |

use crate::error::{Error, Result};
use crate::model::{DelayedProblem, Trajectory};

/// Names accepted by [`problem`].
pub const NAMES: [&str; 5] = ["example33", "parabola", "delayed", "nonautonomous", "oscillator2d"];

/// Problem file text of a built-in problem.
pub fn source(name: &str) -> Option<&'static str> {
    Some(match name {
        "example33" => include_str!("../problems/example33.json"),
        "parabola" => include_str!("../problems/parabola.json"),
        "delayed" => include_str!("../problems/delayed.json"),
        "nonautonomous" => include_str!("../problems/nonautonomous.json"),
        "oscillator2d" => include_str!("../problems/oscillator2d.json"),
        _ => return None,
    })
}

fn unknown(name: &str) -> Error {
    Error::invalid("builtin", format!("unknown problem `{name}`; expected one of {NAMES:?}"))
}

pub fn problem(name: &str) -> Result<DelayedProblem> {
    DelayedProblem::from_json_str(source(name).ok_or_else(|| unknown(name))?)
}

/// Grid size used when none is given. Each divides `t2 - t1` into a whole
/// number of delays.
pub fn default_steps(name: &str) -> usize {
    match name {
        "example33" => 300,
        "parabola" | "nonautonomous" => 200,
        _ => 80,
    }
}

/// Piecewise-linear extremal of `example33`: `-t` on the history, then
/// slopes `+1, -1, +1` on `[0, 1]`, `[1, 2]`, `[2, 3]`.
pub fn example33_extremal(t: f64) -> f64 {
    if t <= 0.0 {
        -t
    } else if t <= 1.0 {
        t
    } else if t <= 2.0 {
        2.0 - t
    } else {
        t - 2.0
    }
}

/// `6t(1 - t)`, the exact solution of `parabola`.
pub fn parabola_extremal(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        6.0 * t * (1.0 - t)
    }
}

/// Multiplier belonging to the reference trajectory, where one exists.
pub fn reference_lambda(name: &str) -> Option<Vec<f64>> {
    match name {
        "parabola" => Some(vec![24.0]),
        // any multiplier works for the piecewise extremal; 2 is the one used in
        // the command-line example
        "example33" => Some(vec![2.0]),
        _ => None,
    }
}

/// Reference trajectory on the grid with `steps` intervals in `[t1, t2]`,
/// including the history nodes.
pub fn reference_trajectory(name: &str, steps: usize) -> Result<Trajectory> {
    let p = problem(name)?;
    let hist = p.history().clone();
    let after = move |t: f64, f: &dyn Fn(f64) -> Vec<f64>| if t < 0.0 { hist.value(t) } else { f(t) };
    match name {
        "example33" => p.sample(steps, |t| vec![example33_extremal(t)]),
        "parabola" | "nonautonomous" => p.sample(steps, |t| vec![parabola_extremal(t)]),
        "delayed" => p.sample(steps, |t| after(t, &|t| vec![0.75 * t * (2.0 - t)])),
        "oscillator2d" => p.sample(steps, |t| {
            after(t, &|t| {
                let s = t / 2.0;
                vec![0.5 * s + 2.0 * s * (1.0 - s), (1.0 - s) - 0.5 * s + s * (1.0 - s)]
            })
        }),
        _ => Err(unknown(name)),
    }
}
