use super::*;
use crate::builtin;
use crate::conditions::{el_residual, solver_tolerance};
use crate::model::tests::spec;
use crate::solver::{solve_isoperimetric, SolveSettings};

fn control_problem(l: &str, g: &[&str], phi: &str) -> DelayedProblem {
    let mut s = spec(l, g, 0.25, 0.0, 1.0, vec![0.0]);
    s.mode = Mode::Ocp;
    s.m = Some(1);
    s.phi = Some(vec![phi.into()]);
    DelayedProblem::from_spec(s).unwrap()
}

/// Samples `q`, `u` on every node and `p` from `t1` on.
fn sampled(
    p: &DelayedProblem,
    steps: usize,
    q: impl Fn(f64) -> f64,
    u: impl Fn(f64) -> f64,
    costate: impl Fn(f64) -> f64,
) -> Trajectory {
    let g = Grid::new(p, steps).unwrap();
    let tr = p.sample(steps, |t| vec![q(t)]).unwrap();
    let us = (0..g.nodes()).map(|i| u(g.time(i))).collect();
    let ps = (g.first()..g.nodes()).map(|i| costate(g.time(i))).collect();
    tr.with_controls(1, us).unwrap().with_costates(g.first(), ps).unwrap()
}

fn lam(v: &[f64]) -> MultiplierVector {
    MultiplierVector::new(v.to_vec()).unwrap()
}

#[test]
fn hamiltonian_by_substitution() {
    let p = control_problem("u[0]^2/2", &[], "u[0]");
    let ctx = HamiltonianContext::new(&p, &lam(&[])).unwrap();
    let x = EvalPoint {
        q: &[0.0],
        u: &[2.0],
        p: &[1.0],
        ..Default::default()
    };
    assert_eq!(hamiltonian_value(&ctx, &x).unwrap(), 4.0);
    let x0 = EvalPoint { p: &[0.0], ..x };
    assert_eq!(hamiltonian_value(&ctx, &x0).unwrap(), 2.0);

    let p = control_problem("0", &[], "q[0]");
    let ctx = HamiltonianContext::new(&p, &lam(&[])).unwrap();
    let x = EvalPoint {
        q: &[3.0],
        p: &[5.0],
        ..Default::default()
    };
    assert_eq!(hamiltonian_value(&ctx, &x).unwrap(), 15.0);
    assert!(hamiltonian_value(&ctx, &EvalPoint { q: &[3.0], ..Default::default() }).is_err());
}

#[test]
fn lagrangian_problems_are_rejected() {
    let p = builtin::problem("parabola").unwrap();
    assert!(HamiltonianContext::new(&p, &lam(&[1.0])).is_err());
}

#[test]
fn free_particle_satisfies_every_condition() {
    let p = control_problem("u[0]^2/2", &[], "u[0]");
    let tr = sampled(&p, 40, |t| 1.0 - 0.5 * t, |_| -0.5, |_| 0.5);
    let ctx = HamiltonianContext::new(&p, &lam(&[])).unwrap();
    for r in verify_ocp(&ctx, &tr, 1e-12).unwrap() {
        assert!(r.passed, "{} sup {}", r.name, r.sup_norm);
    }
}

#[test]
fn perturbed_control_spikes_stationarity_locally() {
    let p = control_problem("u[0]^2/2", &[], "u[0]");
    let g = Grid::new(&p, 40).unwrap();
    let base = sampled(&p, 40, |t| 1.0 - 0.5 * t, |_| -0.5, |_| 0.5);
    let mut us = base.controls().unwrap().to_vec();
    us[20] += 0.1;
    let tr = base.clone().with_controls(1, us).unwrap();
    let ctx = HamiltonianContext::new(&p, &lam(&[])).unwrap();
    let stat = &pontryagin_residuals(&ctx, &tr).unwrap()[2];
    for (k, &i) in stat.nodes.iter().enumerate() {
        let v = stat.values[k][0].abs();
        if i == 20 {
            assert!((v - 0.1).abs() < 1e-12);
        } else {
            assert!(v < 1e-12, "node {i}: {v}");
        }
    }
    assert!(g.first() < 20);
}

#[test]
fn missing_arrays_are_errors() {
    let p = control_problem("u[0]^2/2", &[], "u[0]");
    let ctx = HamiltonianContext::new(&p, &lam(&[])).unwrap();
    let bare = p.sample(40, |t| vec![t]).unwrap();
    assert!(matches!(pontryagin_residuals(&ctx, &bare), Err(Error::Missing(_))));
    let no_p = bare.with_controls(1, vec![1.0; 51]).unwrap();
    assert!(matches!(hamiltonian_dbr_residual(&ctx, &no_p), Err(Error::Missing(_))));
}

#[test]
fn costate_from_parabola_extremal_passes_all_reports() {
    let p = builtin::problem("parabola").unwrap();
    let tr = builtin::reference_trajectory("parabola", 200).unwrap();
    let l = lam(&[24.0]);
    let (ocp, full) = control_form_extremal(&p, &l, &tr).unwrap();
    let ctx = HamiltonianContext::new(&ocp, &l).unwrap();
    let tol = solver_tolerance(0.005);
    for r in verify_ocp(&ctx, &full, tol).unwrap() {
        assert!(r.passed, "{} sup {}", r.name, r.sup_norm);
    }
    // p = -2q̇ = 24t - 12 and H = -36 along the exact extremal
    let g = Grid::of(&p, &full).unwrap();
    assert!((full.costate(g.first() + 100).unwrap()[0] - 0.0).abs() < 1e-9);
    let h = hamiltonian_dbr_residual(&ctx, &full).unwrap();
    assert!((h.bracket[50][0] + 36.0).abs() < 1e-9);
}

#[test]
fn costate_from_solver_output_passes_all_reports() {
    let p = builtin::problem("delayed").unwrap();
    let r = solve_isoperimetric(&p, &SolveSettings::with_steps(80)).unwrap();
    let l = lam(&r.lambda);
    let (ocp, full) = control_form_extremal(&p, &l, &r.trajectory).unwrap();
    let ctx = HamiltonianContext::new(&ocp, &l).unwrap();
    let reports = pontryagin_residuals(&ctx, &full).unwrap();
    for rep in &reports {
        let rep = rep.clone().with_tolerance(solver_tolerance(r.h));
        assert!(rep.passed, "{} sup {}", rep.name, rep.sup_norm);
    }
}

#[test]
fn adjoint_tracks_euler_lagrange_off_extremals() {
    // on an admissible non-extremal both residuals are large and agree up to
    // quadrature error, since p + ∫(∂₂H + ∂₄H(t+τ)) = -(B - ∫(∂₂F + ∂₄F(t+τ)))
    let p = builtin::problem("delayed").unwrap();
    let tr = builtin::reference_trajectory("delayed", 160).unwrap();
    let l = lam(&[1.5]);
    let el = el_residual(&p, &l, &tr).unwrap();
    let (ocp, full) = control_form_extremal(&p, &l, &tr).unwrap();
    let ctx = HamiltonianContext::new(&ocp, &l).unwrap();
    let adj = &pontryagin_residuals(&ctx, &full).unwrap()[1];
    assert!(el.sup_norm > 1e-2);
    assert_eq!(adj.nodes, el.nodes);
    for (a, e) in adj.values.iter().zip(&el.values) {
        assert!((a[0] + e[0]).abs() < 1e-3, "{} vs {}", a[0], e[0]);
    }
}

#[test]
fn cubic_example_in_control_form() {
    let p = builtin::problem("example33").unwrap();
    let tr = builtin::reference_trajectory("example33", 300).unwrap();
    let l = lam(&[2.0]);
    let (ocp, full) = control_form_extremal(&p, &l, &tr).unwrap();
    let ctx = HamiltonianContext::new(&ocp, &l).unwrap();
    for r in verify_ocp(&ctx, &full, 1e-12).unwrap() {
        if r.name == "constraint" {
            // u jumps at the corners, where the node value is the average
            // slope; the trapezoid is then first order
            assert!(r.sup_norm <= 0.01 + 1e-12, "{}", r.sup_norm);
        } else {
            assert!(r.passed, "{} sup {}", r.name, r.sup_norm);
        }
    }
    let h = hamiltonian_dbr_residual(&ctx, &full).unwrap();
    assert!(h.bracket.iter().all(|b| b[0].abs() < 1e-12));
}

#[test]
fn time_dependent_cost_breaks_identity_off_extremals() {
    // H = t·u², ∂₁H = u²; with u = t the identity reads 3t² = t²
    let p = control_problem("t*u[0]^2", &[], "u[0]");
    let tr = sampled(&p, 40, |t| 0.5 * t * t, |t| t, |_| 0.0);
    let ctx = HamiltonianContext::new(&p, &lam(&[])).unwrap();
    let r = hamiltonian_dbr_residual(&ctx, &tr).unwrap();
    assert!(r.sup_norm > 1e-2);
}

#[test]
fn hypothesis_has_both_windows() {
    let p = control_problem("u[0]*utau[0] + q[0]*qtau[0]", &[], "u[0]");
    let tr = sampled(&p, 40, |t| t, |_| 1.0, |_| 0.0);
    let ctx = HamiltonianContext::new(&p, &lam(&[])).unwrap();
    let r = hamiltonian_hypothesis_residual(&ctx, &tr).unwrap();
    let names: Vec<&str> = r.windows.iter().map(|w| w.name.as_str()).collect();
    assert_eq!(names, ["t1-tau..t1", "t1-tau..t2-tau"]);
    // ∂₄H(t+τ)·q̇ = q(t+τ)·1 = t + τ
    let k = r.nodes.iter().position(|&i| i == 0).unwrap();
    assert!((r.values[k][0] - 0.0).abs() < 1e-12);
    assert_eq!(r.regimes[k], Regime::History);
}

#[test]
fn residuals_are_affine_in_the_multiplier() {
    let p = control_problem("u[0]^2", &["q[0]"], "u[0]");
    let tr = sampled(&p, 40, |t| t * (1.0 - t), |t| 1.0 - 2.0 * t, |t| t);
    let eval = |l: f64| {
        let ctx = HamiltonianContext::new(&p, &lam(&[l])).unwrap();
        pontryagin_residuals(&ctx, &tr).unwrap()
    };
    let (a, b, c) = (eval(0.0), eval(1.0), eval(3.0));
    for f in 0..3 {
        for k in 0..a[f].values.len() {
            let lin = a[f].values[k][0] + 3.0 * (b[f].values[k][0] - a[f].values[k][0]);
            assert!((c[f].values[k][0] - lin).abs() < 1e-10);
        }
    }
}
