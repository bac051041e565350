mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use isodelay::builtin;
use isodelay::conditions::{dbr_residual, el_residual, noether_constant};
use isodelay::expr::{parse_expression, EvalPoint, Expression, Func, Mode, Node, Slot};
use isodelay::model::{functional_value, trajectory_from_csv, trajectory_to_csv, DelayedProblem, MultiplierVector, Symmetry};
use isodelay::solver::{solve_isoperimetric, SolveSettings};

const SLOTS: [Slot; 7] = [
    Slot::T,
    Slot::Q(0),
    Slot::Q(1),
    Slot::Qd(0),
    Slot::Qtau(1),
    Slot::Qdtau(0),
    Slot::Lambda(0),
];

fn boxed(n: Node) -> Box<Node> {
    Box::new(n)
}

/// Smooth expression trees whose denominators and logarithm arguments stay
/// away from zero.
fn smooth_tree() -> impl Strategy<Value = Node> {
    let leaf = prop_oneof![
        (0u8..12).prop_map(|k| Node::Const(k as f64 / 4.0)),
        (0..SLOTS.len()).prop_map(|k| Node::Slot(SLOTS[k])),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::Add(boxed(a), boxed(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::Sub(boxed(a), boxed(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::Mul(boxed(a), boxed(b))),
            inner.clone().prop_map(|a| Node::Neg(boxed(a))),
            inner.clone().prop_map(|a| Node::Call(Func::Sin, boxed(a))),
            inner.clone().prop_map(|a| Node::Call(Func::Cos, boxed(a))),
            inner.clone().prop_map(|a| Node::Call(Func::Exp, boxed(Node::Call(Func::Sin, boxed(a))))),
            (inner.clone(), 2u8..4).prop_map(|(a, k)| Node::Pow(boxed(a), boxed(Node::Const(k as f64)))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::Div(
                boxed(a),
                boxed(Node::Add(boxed(Node::Const(2.0)), boxed(Node::Call(Func::Sin, boxed(b)))))
            )),
            inner.prop_map(|a| Node::Call(
                Func::Ln,
                boxed(Node::Add(boxed(Node::Const(1.0)), boxed(Node::Pow(boxed(a), boxed(Node::Const(2.0))))))
            )),
        ]
    })
}

fn point_values() -> impl Strategy<Value = [f64; 7]> {
    prop::array::uniform7(-1.5f64..1.5)
}

fn with_point<R>(v: &[f64; 7], f: impl FnOnce(&EvalPoint<'_>) -> R) -> R {
    let q = [v[1], v[2]];
    let qd = [v[3], 0.0];
    let qtau = [0.0, v[4]];
    let qdtau = [v[5], 0.0];
    let lambda = [v[6]];
    f(&EvalPoint {
        t: v[0],
        q: &q,
        qd: &qd,
        qtau: &qtau,
        qdtau: &qdtau,
        lambda: &lambda,
        ..EvalPoint::default()
    })
}

fn slot_position(slot: Slot) -> usize {
    SLOTS.iter().position(|s| *s == slot).unwrap()
}

fn lam(v: f64) -> MultiplierVector {
    MultiplierVector::new(vec![v]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dual_partials_match_central_differences(tree in smooth_tree(), x in point_values()) {
        let e = Expression::from_ast(tree);
        let dual = with_point(&x, |p| e.gradient(p));
        prop_assume!(dual.is_ok());
        let dual = dual.unwrap();
        prop_assume!(dual.value.abs() < 1e6);
        for &(slot, d) in &dual.partials {
            let k = slot_position(slot);
            let step = 1e-6;
            let shifted = |s: f64| {
                let mut y = x;
                y[k] += s;
                with_point(&y, |p| e.evaluate(p)).unwrap()
            };
            let fd = (shifted(step) - shifted(-step)) / (2.0 * step);
            prop_assert!(
                (d - fd).abs() <= 1e-5 * (1.0 + d.abs() + dual.value.abs()),
                "{e}: d/d{slot} dual {d} vs difference {fd}"
            );
        }
    }

    #[test]
    fn value_agrees_between_plain_and_dual_evaluation(tree in smooth_tree(), x in point_values()) {
        let e = Expression::from_ast(tree);
        if let (Ok(plain), Ok(dual)) = (with_point(&x, |p| e.evaluate(p)), with_point(&x, |p| e.gradient(p))) {
            prop_assert_eq!(plain, dual.value);
        }
    }

    #[test]
    fn printed_form_parses_back_to_the_same_tree(tree in smooth_tree()) {
        let e = Expression::from_ast(tree);
        let back = parse_expression(&e.to_string(), 2, Mode::Lagrangian).unwrap();
        prop_assert_eq!(back.ast(), e.ast());
    }

    #[test]
    fn sum_and_product_rules(a in smooth_tree(), b in smooth_tree(), x in point_values()) {
        let (ea, eb) = (Expression::from_ast(a.clone()), Expression::from_ast(b.clone()));
        let sum = Expression::from_ast(Node::Add(boxed(a.clone()), boxed(b.clone())));
        let product = Expression::from_ast(Node::Mul(boxed(a), boxed(b)));
        let all = with_point(&x, |p| (ea.gradient(p), eb.gradient(p), sum.gradient(p), product.gradient(p)));
        if let (Ok(ga), Ok(gb), Ok(gs), Ok(gp)) = all {
            for slot in SLOTS {
                let (da, db) = (ga.get(slot), gb.get(slot));
                let scale = 1.0 + da.abs() + db.abs() + ga.value.abs() + gb.value.abs();
                prop_assert!((gs.get(slot) - (da + db)).abs() <= 1e-12 * scale);
                let expected = da * gb.value + ga.value * db;
                prop_assert!((gp.get(slot) - expected).abs() <= 1e-12 * scale * scale);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn residuals_are_affine_in_the_multiplier(seed in any::<u64>(), l in -5.0f64..5.0) {
        let problem = common::oracle_problem();
        let traj = common::random_smooth(&mut ChaCha8Rng::seed_from_u64(seed), 40);
        for residual in [el_residual, dbr_residual] {
            let r0 = residual(&problem, &lam(0.0), &traj).unwrap();
            let r1 = residual(&problem, &lam(1.0), &traj).unwrap();
            let rl = residual(&problem, &lam(l), &traj).unwrap();
            for ((a, b), c) in r0.values.iter().zip(&r1.values).zip(&rl.values) {
                let expected = a[0] + l * (b[0] - a[0]);
                prop_assert!((c[0] - expected).abs() <= 1e-11 * (1.0 + l.abs()));
            }
        }
    }

    #[test]
    fn time_translation_charge_is_the_energy_bracket(seed in any::<u64>(), l in -3.0f64..3.0) {
        let problem = common::oracle_problem();
        let traj = common::random_smooth(&mut ChaCha8Rng::seed_from_u64(seed), 40);
        let profile = noether_constant(&problem, &lam(l), &traj, &Symmetry::time_translation(1)).unwrap();
        let dbr = dbr_residual(&problem, &lam(l), &traj).unwrap();
        prop_assert_eq!(&profile.nodes, &dbr.nodes);
        for (v, b) in profile.values.iter().zip(&dbr.bracket) {
            prop_assert_eq!(*v, b[0]);
        }
    }

    #[test]
    fn csv_round_trip_is_exact(seed in any::<u64>()) {
        let traj = common::random_smooth(&mut ChaCha8Rng::seed_from_u64(seed), 40);
        let mut buf = Vec::new();
        trajectory_to_csv(&traj, &mut buf).unwrap();
        let back = trajectory_from_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.values(), traj.values());
        prop_assert_eq!(back.nodes(), traj.nodes());
        prop_assert!((back.step() - traj.step()).abs() <= 1e-15);
    }

    #[test]
    fn quadrature_is_second_order(a in 0.2f64..2.0, w in 0.5f64..4.0, b in -1.0f64..1.0) {
        // J = ∫_0^1 (q̇² + q²) for q = a sin(w t) + b t, in closed form
        let problem = DelayedProblem::from_json_str(&format!(
            r#"{{ "n": 1, "tau": 0.25, "t1": 0, "t2": 1, "L": "qd[0]^2 + q[0]^2", "g": [],
                 "history": {{ "pieces": [{{ "from": -0.25, "to": 0, "coeffs": [0] }}] }},
                 "terminal": [{}], "levels": [] }}"#,
            a * w.sin() + b
        ))
        .unwrap();
        let q = |t: f64| a * (w * t).sin() + b * t;
        let exact = {
            let (s2, c) = ((2.0 * w).sin(), w.cos());
            let (sw, one) = (w.sin(), 1.0);
            // ∫ a²w²cos² + 2abw cos + b² + a² sin² + 2ab t sin + b²t²
            a * a * w * w * (0.5 + s2 / (4.0 * w))
                + 2.0 * a * b * sw
                + b * b
                + a * a * (0.5 - s2 / (4.0 * w))
                + 2.0 * a * b * (sw / (w * w) - c / w)
                + b * b * one / 3.0
        };
        let error = |steps: usize| {
            let traj = problem.sample(steps, |t| vec![if t < 0.0 { 0.0 } else { q(t) }]).unwrap();
            (functional_value(&problem, &traj).unwrap().0 - exact).abs()
        };
        let (coarse, fine) = (error(40), error(80));
        prop_assume!(coarse > 1e-9);
        let ratio = coarse / fine;
        prop_assert!((3.5..4.5).contains(&ratio), "ratio {ratio}, errors {coarse:e} {fine:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn scaling_the_lagrangian_scales_the_multiplier(c in 0.5f64..4.0) {
        let base = builtin::problem("parabola").unwrap();
        let mut spec = base.spec().clone();
        spec.lagrangian = format!("{c} * qd[0]^2");
        let scaled = DelayedProblem::from_spec(spec).unwrap();
        let settings = SolveSettings::with_steps(40);
        let r0 = solve_isoperimetric(&base, &settings).unwrap();
        let r1 = solve_isoperimetric(&scaled, &settings).unwrap();
        prop_assert!(r1.converged);
        prop_assert!((r1.lambda[0] - c * r0.lambda[0]).abs() <= 1e-6 * c * r0.lambda[0]);
        for (x, y) in r0.trajectory.values().iter().zip(r1.trajectory.values()) {
            prop_assert!((x - y).abs() <= 1e-7);
        }
    }
}
