//! Independent oracles shared by the integration tests.
//!
//! The delayed conditions are re-derived here from hand-written partial
//! derivatives of one fixed Lagrangian, without going through the library's
//! expression engine or jets.
#![allow(dead_code)]

use isodelay::model::{functional_value, DelayedProblem, MultiplierVector, Trajectory};
use isodelay::solver::discretized_objective;
use rand::Rng;

pub const ORACLE_TAU: f64 = 0.5;
pub const ORACLE_T1: f64 = 0.0;
pub const ORACLE_T2: f64 = 2.0;

/// `L = q̇²/2 + q̇q̇_τ/2 + qq_τ/2 + sin(t)q + q̇_τ²/4` with a constraint that
/// must drop out at `λ = 0`.
pub fn oracle_problem() -> DelayedProblem {
    DelayedProblem::from_json_str(
        r#"{
          "n": 1, "tau": 0.5, "t1": 0.0, "t2": 2.0,
          "L": "qd[0]^2/2 + qd[0]*qdtau[0]/2 + q[0]*qtau[0]/2 + sin(t)*q[0] + qdtau[0]^2/4",
          "g": ["q[0]^2 + qd[0]*qtau[0]"],
          "history": { "pieces": [{ "from": -0.5, "to": 0.0, "coeffs": [0.0] }] },
          "terminal": [0.0],
          "levels": [0.0]
        }"#,
    )
    .unwrap()
}

/// Value and partials `(L, ∂₁, ∂₂, ∂₃, ∂₄, ∂₅)` of the oracle Lagrangian.
pub fn oracle_partials(t: f64, q: f64, qd: f64, qtau: f64, qdtau: f64) -> [f64; 6] {
    [
        qd * qd / 2.0 + qd * qdtau / 2.0 + q * qtau / 2.0 + t.sin() * q + qdtau * qdtau / 4.0,
        t.cos() * q,
        qtau / 2.0 + t.sin(),
        qd + qdtau / 2.0,
        q / 2.0,
        qd / 2.0 + qdtau / 2.0,
    ]
}

/// Index layout of a scalar trajectory on the oracle problem.
pub struct Layout {
    pub h: f64,
    pub m: usize,
    pub first: usize,
    pub boundary: usize,
    pub last: usize,
}

impl Layout {
    pub fn of(traj: &Trajectory) -> Self {
        let h = traj.step();
        let m = (ORACLE_TAU / h).round() as usize;
        let first = ((ORACLE_T1 - traj.t_start()) / h).round() as usize;
        let last = traj.nodes() - 1;
        Layout {
            h,
            m,
            first,
            boundary: last - m,
            last,
        }
    }
}

fn q(traj: &Trajectory, i: usize) -> f64 {
    traj.node(i)[0]
}

fn rate(traj: &Trajectory, i: usize) -> f64 {
    traj.rate(i)[0]
}

/// Partials at grid node `i` with node derivatives.
fn at_node(traj: &Trajectory, l: &Layout, i: usize) -> [f64; 6] {
    oracle_partials(traj.time(i), q(traj, i), rate(traj, i), q(traj, i - l.m), rate(traj, i - l.m))
}

/// Partials at both ends of interval `j` with secant velocities.
fn at_interval(traj: &Trajectory, l: &Layout, j: usize) -> ([f64; 6], [f64; 6]) {
    let s = (q(traj, j + 1) - q(traj, j)) / l.h;
    let sd = (q(traj, j + 1 - l.m) - q(traj, j - l.m)) / l.h;
    (
        oracle_partials(traj.time(j), q(traj, j), s, q(traj, j - l.m), sd),
        oracle_partials(traj.time(j + 1), q(traj, j + 1), s, q(traj, j + 1 - l.m), sd),
    )
}

fn centered(rows: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mean = rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64;
    rows.into_iter().map(|(i, v)| (i, v - mean)).collect()
}

/// Integrated delayed Euler-Lagrange residual, one entry per node in
/// `[t1, t2]` except the regime boundary counted once.
pub fn classical_el(traj: &Trajectory) -> Vec<(usize, f64)> {
    let l = Layout::of(traj);
    let mut inner = Vec::new();
    let mut running = 0.0;
    for i in l.first..=l.boundary {
        if i > l.first {
            let (a, b) = at_interval(traj, &l, i - 1);
            let (fa, fb) = at_interval(traj, &l, i - 1 + l.m);
            running += 0.5 * l.h * (a[2] + b[2] + fa[4] + fb[4]);
        }
        let momentum = at_node(traj, &l, i)[3] + at_node(traj, &l, i + l.m)[5];
        inner.push((i, momentum - running));
    }
    let mut outer = Vec::new();
    let mut running = 0.0;
    for i in l.boundary + 1..=l.last {
        let (a, b) = at_interval(traj, &l, i - 1);
        running += 0.5 * l.h * (a[2] + b[2]);
        outer.push((i, at_node(traj, &l, i)[3] - running));
    }
    let mut out = centered(inner);
    out.extend(centered(outer));
    out
}

/// `L - q̇·p` with `p = ∂₃L + ∂₅L(t+τ)` inside, `∂₃L` outside.
pub fn energy_bracket(traj: &Trajectory, i: usize) -> f64 {
    let l = Layout::of(traj);
    let here = at_node(traj, &l, i);
    let p = if i <= l.boundary {
        here[3] + at_node(traj, &l, i + l.m)[5]
    } else {
        here[3]
    };
    here[0] - rate(traj, i) * p
}

/// Integrated delayed DuBois-Reymond residual.
pub fn classical_dbr(traj: &Trajectory) -> Vec<(usize, f64)> {
    let l = Layout::of(traj);
    let (mut inner, mut outer) = (Vec::new(), Vec::new());
    let mut running = 0.0;
    for i in l.first..=l.last {
        if i > l.first {
            let (a, b) = at_interval(traj, &l, i - 1);
            running += 0.5 * l.h * (a[1] + b[1]);
        }
        let v = energy_bracket(traj, i) - running;
        if i <= l.boundary {
            inner.push((i, v));
        } else {
            outer.push((i, v));
        }
    }
    let mut out = centered(inner);
    out.extend(centered(outer));
    out
}

/// Noether quantity for `η = 1`, `ξ = 1`, `Φ = 0`: momentum plus energy.
pub fn classical_noether_shift(traj: &Trajectory, i: usize) -> f64 {
    let l = Layout::of(traj);
    let here = at_node(traj, &l, i);
    let p = if i <= l.boundary {
        here[3] + at_node(traj, &l, i + l.m)[5]
    } else {
        here[3]
    };
    p + energy_bracket(traj, i)
}

/// Smooth trajectory `a + b t + c t² + d sin(ω t + φ)` on the oracle grid,
/// history nodes included.
pub fn random_smooth(rng: &mut impl Rng, steps: usize) -> Trajectory {
    let (a, b, c, d) = (
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-0.5..0.5),
        rng.gen_range(-1.0..1.0),
    );
    let (w, phase) = (rng.gen_range(0.5..3.0), rng.gen_range(0.0..6.0));
    let h = (ORACLE_T2 - ORACLE_T1) / steps as f64;
    let m = (ORACLE_TAU / h).round() as usize;
    Trajectory::from_fn(ORACLE_T1 - ORACLE_TAU, h, steps + m + 1, 1, |t| {
        vec![a + b * t + c * t * t + d * (w * t + phase).sin()]
    })
    .unwrap()
}

/// Adds a random combination of sine modes that vanish at `t1` and `t2` to
/// every component of `traj`.
pub fn bend(problem: &DelayedProblem, traj: &Trajectory, rng: &mut impl Rng) -> Trajectory {
    let n = traj.dim();
    let (t1, t2) = (problem.t1(), problem.t2());
    let modes: Vec<(f64, f64)> = (0..3 * n)
        .map(|k| ((k / n + 1) as f64, rng.gen_range(-0.3..0.3)))
        .collect();
    let mut values = traj.values().to_vec();
    for i in 0..traj.nodes() {
        let t = traj.time(i);
        if t <= t1 + 1e-12 || t >= t2 - 1e-12 {
            continue;
        }
        let s = (t - t1) / (t2 - t1);
        for (k, (freq, amp)) in modes.iter().enumerate() {
            values[i * n + k % n] += amp * (std::f64::consts::PI * freq * s).sin();
        }
    }
    Trajectory::new(traj.t_start(), traj.step(), n, values).unwrap()
}

/// Largest gap between the analytic gradient and central differences of
/// `J - λ·I`, divided by the largest gradient entry. The differences go
/// through the plain functional values, not the transcription.
pub fn gradient_mismatch(problem: &DelayedProblem, lambda: &MultiplierVector, traj: &Trajectory) -> f64 {
    let eps = 1e-6;
    let (_, grad) = discretized_objective(problem, lambda, traj).unwrap();
    let n = traj.dim();
    let first = ((problem.t1() - traj.t_start()) / traj.step()).round() as usize;
    let offset = (first + 1) * n;
    let value = |k: usize, d: f64| {
        let mut v = traj.values().to_vec();
        v[offset + k] += d;
        let t = Trajectory::new(traj.t_start(), traj.step(), n, v).unwrap();
        let (j, i) = functional_value(problem, &t).unwrap();
        j - i.iter().zip(lambda.as_slice()).map(|(a, b)| a * b).sum::<f64>()
    };
    let mut worst = 0.0f64;
    for (k, g) in grad.iter().enumerate() {
        let fd = (value(k, eps) - value(k, -eps)) / (2.0 * eps);
        worst = worst.max((g - fd).abs());
    }
    let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    worst / scale
}
