//! Problem and trajectory data model.
//!
//! A [`DelayedProblem`] bundles the integrand, the constraint integrands,
//! the delay, the boundary data and the constraint levels. Trajectories live
//! on a uniform [`Grid`] whose step divides the delay, so every delayed value
//! is a plain index shift.

mod grid;
mod history;
mod io;
mod trajectory;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use grid::Grid;
pub use history::{Coeffs, History, HistorySpec, PieceSpec};
pub use io::{read_trajectory_csv, trajectory_from_csv, trajectory_to_csv, write_trajectory_csv};
pub use trajectory::{DerivativePolicy, Rate, Trajectory, KINK_TOL};

use crate::error::{Error, Result};
use crate::expr::{parse_expression, EvalPoint, Expression, Mode, Slot};

/// On-disk problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default)]
    pub mode: Mode,
    /// Control dimension (control form only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub tau: f64,
    pub t1: f64,
    pub t2: f64,
    #[serde(rename = "L")]
    pub lagrangian: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<String>>,
    pub history: HistorySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
}

/// A validated problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedProblem {
    spec: ProblemSpec,
    n: usize,
    k: usize,
    m: usize,
    mode: Mode,
    lagrangian: Expression,
    constraints: Vec<Expression>,
    dynamics: Vec<Expression>,
    history: History,
    terminal: Vec<f64>,
    levels: Vec<f64>,
}

fn finite_field(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, "must be finite"))
    }
}

impl DelayedProblem {
    pub fn from_spec(spec: ProblemSpec) -> Result<Self> {
        let n = spec.n;
        if n == 0 {
            return Err(Error::invalid("n", "state dimension must be positive"));
        }
        finite_field("tau", spec.tau)?;
        finite_field("t1", spec.t1)?;
        finite_field("t2", spec.t2)?;
        if !(spec.t1 < spec.t2) {
            return Err(Error::invalid("t2", "must exceed t1"));
        }
        if !(spec.tau > 0.0) {
            return Err(Error::invalid("tau", "must be positive"));
        }
        if spec.tau >= spec.t2 - spec.t1 {
            return Err(Error::invalid(
                "tau",
                format!("must be shorter than t2 - t1 = {}", spec.t2 - spec.t1),
            ));
        }
        let mode = spec.mode;
        let m = match mode {
            Mode::Lagrangian => {
                if spec.m.is_some() || spec.phi.is_some() {
                    return Err(Error::invalid("mode", "`m` and `phi` require mode \"ocp\""));
                }
                0
            }
            Mode::Ocp => match spec.m {
                Some(m) if m > 0 => m,
                _ => return Err(Error::invalid("m", "control form needs a positive control dimension")),
            },
        };
        let g_src = spec.g.clone().unwrap_or_default();
        let k = spec.k.unwrap_or(g_src.len());
        if k > 0 && spec.g.is_none() {
            return Err(Error::invalid("g", format!("k = {k} constraint integrands required")));
        }
        if g_src.len() != k {
            return Err(Error::invalid(
                "g",
                format!("expected {k} constraint integrands, found {}", g_src.len()),
            ));
        }
        let parse = |field: String, src: &str| -> Result<Expression> {
            let e = parse_expression(src, n, mode).map_err(|e| Error::expr(field.clone(), e))?;
            let bound = (mode == Mode::Ocp).then_some(m);
            e.check_slots(mode, n, bound).map_err(|e| Error::expr(field.clone(), e))?;
            if e.free_slots().iter().any(|s| matches!(s, Slot::P(_) | Slot::Lambda(_))) {
                return Err(Error::invalid(field, "may not reference p or lambda"));
            }
            Ok(e)
        };
        let lagrangian = parse("L".into(), &spec.lagrangian)?;
        let constraints = g_src
            .iter()
            .enumerate()
            .map(|(j, s)| parse(format!("g[{j}]"), s))
            .collect::<Result<Vec<_>>>()?;
        let dynamics = match (mode, &spec.phi) {
            (Mode::Ocp, Some(phi)) => {
                if phi.len() != n {
                    return Err(Error::invalid(
                        "phi",
                        format!("expected {n} components, found {}", phi.len()),
                    ));
                }
                let phi = phi
                    .iter()
                    .enumerate()
                    .map(|(i, s)| parse(format!("phi[{i}]"), s))
                    .collect::<Result<Vec<_>>>()?;
                // the Hamiltonian is linear in p by construction
                if phi.iter().any(|e| e.free_slots().iter().any(|s| matches!(s, Slot::P(_) | Slot::Lambda(_)))) {
                    return Err(Error::invalid("phi", "dynamics may not reference p or lambda"));
                }
                phi
            }
            (Mode::Ocp, None) => return Err(Error::invalid("phi", "required in control form")),
            _ => Vec::new(),
        };
        let history = History::new(&spec.history, n, spec.t1 - spec.tau, spec.t1)?;
        let terminal = match (mode, &spec.terminal) {
            (_, Some(v)) => {
                if v.len() != n || v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::invalid("terminal", format!("expected {n} finite values")));
                }
                v.clone()
            }
            (Mode::Lagrangian, None) => return Err(Error::invalid("terminal", "required")),
            (Mode::Ocp, None) => Vec::new(),
        };
        let levels = match &spec.levels {
            Some(v) => {
                if v.len() != k || v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::invalid("levels", format!("expected {k} finite values")));
                }
                v.clone()
            }
            None if k == 0 => Vec::new(),
            None => return Err(Error::invalid("levels", format!("expected {k} values"))),
        };
        Ok(DelayedProblem {
            spec,
            n,
            k,
            m,
            mode,
            lagrangian,
            constraints,
            dynamics,
            history,
            terminal,
            levels,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let spec: ProblemSpec = serde_json::from_str(text)?;
        Self::from_spec(spec)
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn control_dim(&self) -> usize {
        self.m
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn lagrangian(&self) -> &Expression {
        &self.lagrangian
    }

    pub fn constraints(&self) -> &[Expression] {
        &self.constraints
    }

    pub fn dynamics(&self) -> &[Expression] {
        &self.dynamics
    }

    pub fn tau(&self) -> f64 {
        self.spec.tau
    }

    pub fn t1(&self) -> f64 {
        self.spec.t1
    }

    pub fn t2(&self) -> f64 {
        self.spec.t2
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn terminal(&self) -> &[f64] {
        &self.terminal
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Same problem with different constraint levels.
    pub fn with_levels(&self, levels: Vec<f64>) -> Result<Self> {
        let mut spec = self.spec.clone();
        spec.levels = Some(levels);
        Self::from_spec(spec)
    }

    /// Samples `f` on the problem grid with `steps` intervals in `[t1, t2]`
    /// and attaches exact history derivatives.
    pub fn sample(&self, steps: usize, mut f: impl FnMut(f64) -> Vec<f64>) -> Result<Trajectory> {
        let grid = Grid::new(self, steps)?;
        let mut values = Vec::with_capacity(grid.nodes() * self.n);
        for i in 0..grid.nodes() {
            let v = f(grid.time(i));
            if v.len() != self.n {
                return Err(Error::Dimension(format!("sampler returned {} components", v.len())));
            }
            values.extend(v);
        }
        Ok(Trajectory::new(grid.t_start(), grid.h, self.n, values)?.with_history(&self.history, self.t1()))
    }

    /// Control form of a Lagrangian problem: `u` stands for `qd`, `utau` for
    /// `qdtau`, and the dynamics are `qd = u`.
    pub fn to_control_form(&self) -> Result<Self> {
        if self.mode != Mode::Lagrangian {
            return Err(Error::invalid("mode", "already in control form"));
        }
        let rename = |src: &Expression| {
            src.map_slots(|s| match s {
                Slot::Qd(i) => Slot::U(i),
                Slot::Qdtau(i) => Slot::Utau(i),
                s => s,
            })
            .to_string()
        };
        let mut spec = self.spec.clone();
        spec.mode = Mode::Ocp;
        spec.m = Some(self.n);
        spec.lagrangian = rename(&self.lagrangian);
        spec.g = (!self.constraints.is_empty()).then(|| self.constraints.iter().map(rename).collect());
        spec.phi = Some((0..self.n).map(|i| format!("u[{i}]")).collect());
        Self::from_spec(spec)
    }
}

/// Reads and validates a problem file.
pub fn load_problem(path: impl AsRef<Path>) -> Result<DelayedProblem> {
    let text = std::fs::read_to_string(path)?;
    DelayedProblem::from_json_str(&text)
}

/// Lagrange multipliers of the isoperimetric constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiplierVector(Vec<f64>);

impl MultiplierVector {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::invalid("lambda", "multipliers must be finite"));
        }
        Ok(MultiplierVector(lambda))
    }

    pub fn zeros(k: usize) -> Self {
        MultiplierVector(vec![0.0; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn check(&self, problem: &DelayedProblem) -> Result<()> {
        if self.0.len() != problem.k() {
            return Err(Error::Dimension(format!(
                "{} multipliers for {} constraints",
                self.0.len(),
                problem.k()
            )));
        }
        Ok(())
    }
}

/// Generator pair of a one-parameter transformation group plus gauge term.
#[derive(Debug, Clone, PartialEq)]
pub struct Symmetry {
    pub eta: Expression,
    pub xi: Vec<Expression>,
    pub gauge: Expression,
}

impl Symmetry {
    pub fn new(eta: Expression, xi: Vec<Expression>, gauge: Expression, n: usize) -> Result<Self> {
        let time_state = |e: &Expression| e.free_slots().iter().all(|s| matches!(s, Slot::T | Slot::Q(_)));
        if !time_state(&eta) {
            return Err(Error::invalid("eta", "may depend on t and q only"));
        }
        if xi.len() != n {
            return Err(Error::invalid("xi", format!("expected {n} components, found {}", xi.len())));
        }
        if !xi.iter().all(time_state) {
            return Err(Error::invalid("xi", "may depend on t and q only"));
        }
        gauge
            .check_slots(Mode::Lagrangian, n, None)
            .map_err(|e| Error::expr("phi", e))?;
        Ok(Symmetry { eta, xi, gauge })
    }

    /// Parses generators from source text. `xi` is one expression per state
    /// component.
    pub fn parse(eta: &str, xi: &[&str], gauge: &str, n: usize) -> Result<Self> {
        let p = |field: &str, s: &str| {
            parse_expression(s, n, Mode::Lagrangian).map_err(|e| Error::expr(field, e))
        };
        Self::new(
            p("eta", eta)?,
            xi.iter().map(|s| p("xi", s)).collect::<Result<_>>()?,
            p("phi", gauge)?,
            n,
        )
    }

    /// `eta = 1`, `xi = 0`, `Phi = 0`.
    pub fn time_translation(n: usize) -> Self {
        Symmetry {
            eta: Expression::constant(1.0),
            xi: vec![Expression::zero(); n],
            gauge: Expression::zero(),
        }
    }
}

/// Interval-wise evaluation points of the transcription.
///
/// On interval `j` (nodes `j`, `j+1`) the velocity is the secant slope and
/// the delayed velocity is the secant slope of interval `j - m`. The two
/// endpoints each carry trapezoid weight `h / 2`.
pub(crate) struct Secants<'a> {
    pub grid: Grid,
    pub traj: &'a Trajectory,
}

impl<'a> Secants<'a> {
    pub fn slope(&self, j: usize) -> Vec<f64> {
        let h = self.grid.h;
        self.traj
            .node(j + 1)
            .iter()
            .zip(self.traj.node(j))
            .map(|(b, a)| (b - a) / h)
            .collect()
    }

    /// Calls `f` with the left and right endpoint of interval `j`.
    pub fn endpoints<R>(
        &self,
        j: usize,
        lambda: &[f64],
        mut f: impl FnMut(&EvalPoint<'_>, &EvalPoint<'_>) -> R,
    ) -> R {
        let m = self.grid.delay_steps;
        let s = self.slope(j);
        let sd = self.slope(j - m);
        let left = EvalPoint {
            t: self.grid.time(j),
            q: self.traj.node(j),
            qd: &s,
            qtau: self.traj.node(j - m),
            qdtau: &sd,
            lambda,
            ..Default::default()
        };
        let right = EvalPoint {
            t: self.grid.time(j + 1),
            q: self.traj.node(j + 1),
            qd: &s,
            qtau: self.traj.node(j + 1 - m),
            qdtau: &sd,
            lambda,
            ..Default::default()
        };
        f(&left, &right)
    }
}

/// Trapezoidal values of `J` and of each constraint functional `I_j` over
/// `[t1, t2]`.
///
/// Lagrangian problems use the interval secant scheme, which is exact for
/// piecewise-linear trajectories with corners on grid nodes. Control-form
/// problems use node values of `q` and `u`.
pub fn functional_value(problem: &DelayedProblem, traj: &Trajectory) -> Result<(f64, Vec<f64>)> {
    let grid = Grid::of(problem, traj)?;
    let half = 0.5 * grid.h;
    let mut j_val = 0.0;
    let mut i_val = vec![0.0; problem.k()];
    match problem.mode() {
        Mode::Lagrangian => {
            let sec = Secants { grid, traj };
            for j in grid.first()..grid.last() {
                sec.endpoints(j, &[], |a, b| -> Result<()> {
                    j_val += half * (problem.lagrangian().evaluate(a)? + problem.lagrangian().evaluate(b)?);
                    for (acc, g) in i_val.iter_mut().zip(problem.constraints()) {
                        *acc += half * (g.evaluate(a)? + g.evaluate(b)?);
                    }
                    Ok(())
                })?;
            }
        }
        Mode::Ocp => {
            if traj.control_dim() != problem.control_dim() {
                return Err(Error::Missing("trajectory lacks the control array".into()));
            }
            let m = grid.delay_steps;
            for i in grid.first()..=grid.last() {
                let w = if i == grid.first() || i == grid.last() { half } else { grid.h };
                let x = EvalPoint {
                    t: grid.time(i),
                    q: traj.node(i),
                    u: traj.control(i).unwrap(),
                    qtau: traj.node(i - m),
                    utau: traj.control(i - m).unwrap(),
                    ..Default::default()
                };
                j_val += w * problem.lagrangian().evaluate(&x)?;
                for (acc, g) in i_val.iter_mut().zip(problem.constraints()) {
                    *acc += w * g.evaluate(&x)?;
                }
            }
        }
    }
    Ok((j_val, i_val))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn spec(l: &str, g: &[&str], tau: f64, t1: f64, t2: f64, hist: Vec<f64>) -> ProblemSpec {
        ProblemSpec {
            n: 1,
            k: None,
            mode: Mode::Lagrangian,
            m: None,
            tau,
            t1,
            t2,
            lagrangian: l.into(),
            g: (!g.is_empty()).then(|| g.iter().map(|s| s.to_string()).collect()),
            phi: None,
            history: HistorySpec {
                pieces: vec![PieceSpec {
                    from: t1 - tau,
                    to: t1,
                    coeffs: Coeffs::Scalar(hist),
                }],
            },
            terminal: Some(vec![1.0]),
            levels: (!g.is_empty()).then(|| vec![0.0; g.len()]),
        }
    }

    #[test]
    fn validation_errors_name_fields() {
        let mut s = spec("qd[0]^2", &["q[0]"], 5.0, 0.0, 3.0, vec![0.0]);
        match DelayedProblem::from_spec(s.clone()) {
            Err(Error::Invalid { field, .. }) => assert_eq!(field, "tau"),
            other => panic!("{other:?}"),
        }
        s.tau = 1.0;
        s.history.pieces[0].from = -1.0;
        assert!(DelayedProblem::from_spec(s.clone()).is_ok());
        s.k = Some(1);
        s.g = None;
        match DelayedProblem::from_spec(s.clone()) {
            Err(Error::Invalid { field, .. }) => assert_eq!(field, "g"),
            other => panic!("{other:?}"),
        }
        s.g = Some(vec!["q[0] +".into()]);
        match DelayedProblem::from_spec(s) {
            Err(Error::Expr { field, .. }) => assert_eq!(field, "g[0]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_integrands() {
        let p = DelayedProblem::from_spec(spec("1", &["1"], 1.0, 0.0, 3.0, vec![0.0])).unwrap();
        let tr = p.sample(30, |t| vec![t.sin()]).unwrap();
        let (j, i) = functional_value(&p, &tr).unwrap();
        assert!((j - 3.0).abs() < 1e-12);
        assert!((i[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn unit_slope_energy() {
        let p = DelayedProblem::from_spec(spec("qd[0]^2", &[], 0.5, 0.0, 1.0, vec![0.0, 1.0])).unwrap();
        let tr = p.sample(10, |t| vec![t]).unwrap();
        let (j, i) = functional_value(&p, &tr).unwrap();
        assert!((j - 1.0).abs() < 1e-12);
        assert!(i.is_empty());
    }

    #[test]
    fn non_commensurate_grid_is_rejected() {
        let p = DelayedProblem::from_spec(spec("1", &[], 1.0, 0.0, 3.0, vec![0.0])).unwrap();
        assert!(matches!(Grid::new(&p, 7), Err(Error::NonCommensurate { .. })));
        let tr = Trajectory::new(-1.0, 4.0 / 7.0, 1, vec![0.0; 8]).unwrap();
        assert!(matches!(functional_value(&p, &tr), Err(Error::NonCommensurate { .. })));
    }

    #[test]
    fn delayed_value_is_index_shift() {
        let p = DelayedProblem::from_spec(spec("qtau[0]", &[], 0.5, 0.0, 2.0, vec![0.0])).unwrap();
        let tr = p.sample(40, |t| vec![if t <= 0.0 { 0.0 } else { t * t }]).unwrap();
        let grid = Grid::of(&p, &tr).unwrap();
        let sec = Secants { grid, traj: &tr };
        for j in grid.first()..grid.last() {
            sec.endpoints(j, &[], |a, _| {
                assert_eq!(a.qtau, tr.node(j - grid.delay_steps));
            });
        }
    }

    #[test]
    fn control_form_renames_slots() {
        let p = DelayedProblem::from_spec(spec("(qd[0]+qdtau[0])^3", &["qd[0]^2"], 1.0, 0.0, 3.0, vec![0.0]))
            .unwrap();
        let c = p.to_control_form().unwrap();
        assert_eq!(c.mode(), Mode::Ocp);
        assert_eq!(c.lagrangian().free_slots(), &[Slot::U(0), Slot::Utau(0)]);
        assert_eq!(c.dynamics()[0].free_slots(), &[Slot::U(0)]);
    }

    #[test]
    fn symmetry_generators_restricted() {
        assert!(Symmetry::parse("1", &["0"], "0", 1).is_ok());
        assert!(Symmetry::parse("qd[0]", &["0"], "0", 1).is_err());
        assert!(Symmetry::parse("1", &["qtau[0]"], "0", 1).is_err());
        assert!(Symmetry::parse("t", &["q[0]"], "qd[0]*qtau[0]", 1).is_ok());
    }
}
