use std::collections::VecDeque;

use crate::error::Result;

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;
/// Relative size of objective changes treated as round-off.
const ROUNDOFF: f64 = 1e-10;
/// Sufficient-decrease factor of the derivative-based test.
const APPROX_DECREASE: f64 = 0.1;

pub(crate) struct Options {
    pub memory: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Scale of the first step relative to the preconditioned gradient.
    pub initial_scale: f64,
    /// Number of interleaved components per node; the preconditioner acts
    /// on each component separately.
    pub components: usize,
}

pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted step, starting with the initial value.
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Solves `K z = r` per component, where `K = tridiag(-1, 2, -1)` is the
/// discrete Laplacian with fixed ends. Smooths the raw gradient, whose
/// Hessian for velocity-dominated integrands is close to a multiple of `K`.
fn precondition(r: &[f64], components: usize) -> Vec<f64> {
    let len = r.len() / components;
    let mut z = vec![0.0; r.len()];
    let mut cp = vec![0.0; len];
    let mut dp = vec![0.0; len];
    for c in 0..components {
        let at = |i: usize| i * components + c;
        // Thomas algorithm with a = c = -1, b = 2
        cp[0] = -0.5;
        dp[0] = r[at(0)] / 2.0;
        for i in 1..len {
            let den = 2.0 + cp[i - 1];
            cp[i] = -1.0 / den;
            dp[i] = (r[at(i)] + dp[i - 1]) / den;
        }
        z[at(len - 1)] = dp[len - 1];
        for i in (0..len - 1).rev() {
            z[at(i)] = dp[i] - cp[i] * z[at(i + 1)];
        }
    }
    z
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn direction(g: &[f64], pairs: &VecDeque<Pair>, gamma: f64, components: usize) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alpha = Vec::with_capacity(pairs.len());
    for p in pairs.iter().rev() {
        let a = p.rho * dot(&p.s, &q);
        for (qi, yi) in q.iter_mut().zip(&p.y) {
            *qi -= a * yi;
        }
        alpha.push(a);
    }
    let mut r: Vec<f64> = precondition(&q, components).into_iter().map(|v| gamma * v).collect();
    for (p, a) in pairs.iter().zip(alpha.iter().rev()) {
        let b = p.rho * dot(&p.y, &r);
        for (ri, si) in r.iter_mut().zip(&p.s) {
            *ri += (a - b) * si;
        }
    }
    r.iter_mut().for_each(|v| *v = -*v);
    r
}

/// Limited-memory BFGS with a Laplacian-preconditioned initial Hessian and
/// backtracking Armijo line search.
///
/// `f(x, grad)` returns the objective and writes the gradient. Trial points
/// where `f` fails are treated as infinitely bad.
pub(crate) fn minimize(
    x0: Vec<f64>,
    opts: &Options,
    mut f: impl FnMut(&[f64], &mut [f64]) -> Result<f64>,
) -> Result<Outcome> {
    let dim = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; dim];
    let mut fx = f(&x, &mut g)?;
    let mut history = vec![fx];
    if dim == 0 {
        return Ok(Outcome {
            x,
            iterations: 0,
            converged: true,
            history,
        });
    }
    let mut pairs: VecDeque<Pair> = VecDeque::with_capacity(opts.memory);
    let mut gamma = opts.initial_scale;
    let mut g_new = vec![0.0; dim];
    let mut x_new = vec![0.0; dim];
    let mut iterations = 0;
    let mut converged = sup(&g) <= opts.grad_tol;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut d = direction(&g, &pairs, gamma, opts.components);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            pairs.clear();
            d = direction(&g, &pairs, gamma, opts.components);
            slope = dot(&g, &d);
        }
        let mut accepted = false;
        let mut f_new = fx;
        for attempt in 0..2 {
            let mut step = 1.0;
            for _ in 0..MAX_HALVINGS {
                for i in 0..dim {
                    x_new[i] = x[i] + step * d[i];
                }
                let trial = f(&x_new, &mut g_new).unwrap_or(f64::INFINITY);
                let armijo = trial <= fx + ARMIJO * step * slope;
                // near round-off the objective cannot rank points; judge the
                // step by the trapezoid estimate of the decrease instead,
                // which needs directional derivatives only
                let approximate = trial.is_finite()
                    && trial - fx <= ROUNDOFF * fx.abs().max(1.0)
                    && dot(&g_new, &d) <= (2.0 * APPROX_DECREASE - 1.0) * slope;
                if armijo || approximate {
                    accepted = true;
                    f_new = trial;
                    break;
                }
                step *= 0.5;
            }
            if accepted || attempt == 1 || pairs.is_empty() {
                break;
            }
            pairs.clear();
            d = direction(&g, &pairs, gamma, opts.components);
            slope = dot(&g, &d);
        }
        if !accepted {
            break;
        }
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            let ky = precondition(&y, opts.components);
            let yky = dot(&y, &ky);
            if yky > 0.0 {
                gamma = sy / yky;
            }
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back(Pair { s, y, rho: 1.0 / sy });
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
        history.push(fx);
        converged = sup(&g) <= opts.grad_tol;
    }
    Ok(Outcome {
        x,
        iterations,
        converged,
        history,
    })
}
