use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::History;
use crate::error::{Error, Result};

/// Relative threshold on the jump between one-sided difference quotients.
pub const KINK_TOL: f64 = 1e-6;

/// A slope jump must also exceed this multiple of the jumps at both
/// neighbouring nodes. Smooth curves jump by about `h * q''` at every node,
/// while a corner stands alone.
const KINK_CONTRAST: f64 = 4.0;

/// How node derivatives are formed from stored values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DerivativePolicy {
    OneSidedLeft,
    OneSidedRight,
    #[default]
    Central,
}

/// Node derivative. At a kink only the one-sided pair is meaningful.
#[derive(Debug, Clone, PartialEq)]
pub enum Rate {
    Smooth(Vec<f64>),
    Kink { left: Vec<f64>, right: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
struct Jet {
    left: Vec<f64>,
    right: Vec<f64>,
    accel: Vec<f64>,
}

/// Node values on a uniform grid, with cached derivative estimates.
///
/// State values cover every node. Controls, when present, cover every node
/// as well; costates cover a suffix of the grid starting at
/// [`costate_start`](Self::costate_start).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    t_start: f64,
    h: f64,
    n: usize,
    values: Vec<f64>,
    policy: DerivativePolicy,
    explicit_kinks: Option<BTreeSet<usize>>,
    jets: Vec<Option<Jet>>,
    controls: Option<(usize, Vec<f64>)>,
    costates: Option<(usize, Vec<f64>)>,
    // derived
    kinks: Vec<bool>,
    rates: Vec<f64>,
    accels: Vec<f64>,
    control_rates: Vec<f64>,
}

impl Trajectory {
    /// `values` is node-major: node `i`, component `c` at `i * n + c`.
    pub fn new(t_start: f64, h: f64, n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("state dimension must be positive".into()));
        }
        if !(h > 0.0) || !h.is_finite() || !t_start.is_finite() {
            return Err(Error::invalid("trajectory", "step must be positive and finite"));
        }
        if !values.len().is_multiple_of(n) || values.len() / n < 2 {
            return Err(Error::invalid(
                "trajectory",
                format!("need at least two nodes of dimension {n}"),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("trajectory", "values must be finite"));
        }
        let nodes = values.len() / n;
        let mut traj = Trajectory {
            t_start,
            h,
            n,
            values,
            policy: DerivativePolicy::Central,
            explicit_kinks: None,
            jets: vec![None; nodes],
            controls: None,
            costates: None,
            kinks: Vec::new(),
            rates: Vec::new(),
            accels: Vec::new(),
            control_rates: Vec::new(),
        };
        traj.refresh();
        Ok(traj)
    }

    /// Samples `f` at `nodes` equally spaced times starting at `t_start`.
    pub fn from_fn(
        t_start: f64,
        h: f64,
        nodes: usize,
        n: usize,
        mut f: impl FnMut(f64) -> Vec<f64>,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(nodes * n);
        for i in 0..nodes {
            let v = f(t_start + i as f64 * h);
            if v.len() != n {
                return Err(Error::Dimension(format!("sampler returned {} components", v.len())));
            }
            values.extend(v);
        }
        Self::new(t_start, h, n, values)
    }

    pub fn with_policy(mut self, policy: DerivativePolicy) -> Self {
        self.policy = policy;
        self.refresh();
        self
    }

    /// Replaces kink detection with an explicit node set.
    pub fn with_kinks(mut self, kinks: impl IntoIterator<Item = usize>) -> Self {
        self.explicit_kinks = Some(kinks.into_iter().filter(|&i| i < self.nodes()).collect());
        self.refresh();
        self
    }

    /// Adds nodes to whatever kink set is currently in effect.
    pub fn add_kinks(self, extra: impl IntoIterator<Item = usize>) -> Self {
        let mut set: BTreeSet<usize> = self.kink_set().into_iter().collect();
        set.extend(extra);
        self.with_kinks(set)
    }

    /// Uses exact history derivatives at nodes strictly before `t1` when the
    /// stored values agree with the history function there.
    pub fn with_history(mut self, history: &History, t1: f64) -> Self {
        if history.dim() != self.n {
            return self;
        }
        let eps = 1e-9 * (1.0 + t1.abs());
        for i in 0..self.nodes() {
            let t = self.time(i);
            if t >= t1 - eps {
                break;
            }
            let expected = history.value(t);
            let agrees = expected
                .iter()
                .zip(self.node(i))
                .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            self.jets[i] = agrees.then(|| Jet {
                left: history.rate_left(t),
                right: history.rate_right(t),
                accel: history.accel(t),
            });
        }
        self.refresh();
        self
    }

    pub fn with_controls(mut self, m: usize, controls: Vec<f64>) -> Result<Self> {
        if m == 0 || controls.len() != m * self.nodes() {
            return Err(Error::Dimension(format!(
                "expected {} control values ({} per node)",
                m * self.nodes(),
                m
            )));
        }
        self.controls = Some((m, controls));
        self.refresh();
        Ok(self)
    }

    /// Costate values for nodes `start..nodes()`.
    pub fn with_costates(mut self, start: usize, costates: Vec<f64>) -> Result<Self> {
        if start >= self.nodes() || costates.len() != self.n * (self.nodes() - start) {
            return Err(Error::Dimension("costate array does not fit the grid".into()));
        }
        self.costates = Some((start, costates));
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> usize {
        self.values.len() / self.n
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.nodes() - 1)
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_start + i as f64 * self.h
    }

    pub fn policy(&self) -> DerivativePolicy {
        self.policy
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Policy derivative at node `i`, also defined (as an average) at kinks.
    pub fn rate(&self, i: usize) -> &[f64] {
        &self.rates[i * self.n..(i + 1) * self.n]
    }

    /// Second derivative at node `i`.
    pub fn accel(&self, i: usize) -> &[f64] {
        &self.accels[i * self.n..(i + 1) * self.n]
    }

    pub fn is_kink(&self, i: usize) -> bool {
        self.kinks[i]
    }

    pub fn kink_set(&self) -> Vec<usize> {
        (0..self.nodes()).filter(|&i| self.kinks[i]).collect()
    }

    pub fn control_dim(&self) -> usize {
        self.controls.as_ref().map_or(0, |c| c.0)
    }

    pub fn controls(&self) -> Option<&[f64]> {
        self.controls.as_ref().map(|c| c.1.as_slice())
    }

    pub fn control(&self, i: usize) -> Option<&[f64]> {
        self.controls.as_ref().map(|(m, u)| &u[i * m..(i + 1) * m])
    }

    pub fn control_rate(&self, i: usize) -> Option<&[f64]> {
        let m = self.control_dim();
        (m > 0).then(|| &self.control_rates[i * m..(i + 1) * m])
    }

    pub fn costate_start(&self) -> Option<usize> {
        self.costates.as_ref().map(|c| c.0)
    }

    pub fn costate(&self, i: usize) -> Option<&[f64]> {
        let (start, p) = self.costates.as_ref()?;
        if i < *start {
            return None;
        }
        let k = i - start;
        Some(&p[k * self.n..(k + 1) * self.n])
    }

    /// Finite-difference derivative at `node` according to the policy.
    pub fn derivative(&self, node: usize) -> Result<Rate> {
        if node >= self.nodes() {
            return Err(Error::NodeOutOfRange {
                node,
                len: self.nodes(),
            });
        }
        if self.kinks[node] {
            let (left, right) = self.quotients(node);
            return Ok(Rate::Kink { left, right });
        }
        Ok(Rate::Smooth(self.rate(node).to_vec()))
    }

    fn quotients(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let last = self.nodes() - 1;
        if let Some(j) = &self.jets[i] {
            return (j.left.clone(), j.right.clone());
        }
        let diff = |a: usize, b: usize| -> Vec<f64> {
            self.node(b)
                .iter()
                .zip(self.node(a))
                .map(|(y, x)| (y - x) / self.h)
                .collect()
        };
        let left = if i > 0 { diff(i - 1, i) } else { diff(0, 1) };
        let right = if i < last { diff(i, i + 1) } else { diff(last - 1, last) };
        (left, right)
    }

    fn jump(&self, i: usize) -> (f64, f64) {
        let (l, r) = self.quotients(i);
        let mut jump = 0.0f64;
        let mut scale = 0.0f64;
        for (a, b) in l.iter().zip(&r) {
            jump = jump.max((b - a).abs());
            scale = scale.max(a.abs()).max(b.abs());
        }
        (jump, scale)
    }

    fn detect_kinks(&self) -> Vec<bool> {
        let nodes = self.nodes();
        let jumps: Vec<(f64, f64)> = (0..nodes).map(|i| self.jump(i)).collect();
        (0..nodes)
            .map(|i| {
                let (jump, scale) = jumps[i];
                if jump <= KINK_TOL * (1.0 + scale) {
                    return false;
                }
                if self.jets[i].is_some() {
                    return true;
                }
                if i == 0 || i == nodes - 1 {
                    return false;
                }
                let neighbour = jumps[i - 1].0.max(jumps[i + 1].0);
                jump > KINK_CONTRAST * neighbour
            })
            .collect()
    }

    fn refresh(&mut self) {
        let nodes = self.nodes();
        let n = self.n;
        self.kinks = match &self.explicit_kinks {
            Some(set) => (0..nodes).map(|i| set.contains(&i)).collect(),
            None => self.detect_kinks(),
        };
        let mut rates = vec![0.0; nodes * n];
        let mut accels = vec![0.0; nodes * n];
        for i in 0..nodes {
            let r = self.node_rate(i);
            rates[i * n..(i + 1) * n].copy_from_slice(&r);
            let a = self.node_accel(i);
            accels[i * n..(i + 1) * n].copy_from_slice(&a);
        }
        self.rates = rates;
        self.accels = accels;
        self.control_rates = match &self.controls {
            Some((m, u)) => (0..nodes)
                .flat_map(|i| central_rate(u, *m, nodes, self.h, i, false, false))
                .collect(),
            None => Vec::new(),
        };
    }

    fn node_rate(&self, i: usize) -> Vec<f64> {
        let last = self.nodes() - 1;
        if let Some(j) = &self.jets[i] {
            return match self.policy {
                DerivativePolicy::OneSidedLeft => j.left.clone(),
                DerivativePolicy::OneSidedRight => j.right.clone(),
                DerivativePolicy::Central => {
                    j.left.iter().zip(&j.right).map(|(a, b)| 0.5 * (a + b)).collect()
                }
            };
        }
        let (left, right) = self.quotients(i);
        match self.policy {
            DerivativePolicy::OneSidedLeft => left,
            DerivativePolicy::OneSidedRight => right,
            DerivativePolicy::Central => {
                let near_start_kink = i == 0 && last >= 2 && self.kinks[1];
                let near_end_kink = i == last && last >= 2 && self.kinks[last - 1];
                central_rate(
                    &self.values,
                    self.n,
                    self.nodes(),
                    self.h,
                    i,
                    near_start_kink,
                    near_end_kink,
                )
            }
        }
    }

    fn node_accel(&self, i: usize) -> Vec<f64> {
        if let Some(j) = &self.jets[i] {
            return j.accel.clone();
        }
        let nodes = self.nodes();
        if nodes < 3 {
            return vec![0.0; self.n];
        }
        let c = i.clamp(1, nodes - 2);
        let h2 = self.h * self.h;
        (0..self.n)
            .map(|k| {
                (self.values[(c + 1) * self.n + k] - 2.0 * self.values[c * self.n + k]
                    + self.values[(c - 1) * self.n + k])
                    / h2
            })
            .collect()
    }
}

/// Central difference in the interior; second-order one-sided stencils at
/// the ends unless the adjacent node is a kink (then two-point).
fn central_rate(
    v: &[f64],
    n: usize,
    nodes: usize,
    h: f64,
    i: usize,
    start_kink: bool,
    end_kink: bool,
) -> Vec<f64> {
    let at = |node: usize, k: usize| v[node * n + k];
    let last = nodes - 1;
    (0..n)
        .map(|k| {
            if i > 0 && i < last {
                (at(i + 1, k) - at(i - 1, k)) / (2.0 * h)
            } else if nodes < 3 || (i == 0 && start_kink) || (i == last && end_kink) {
                if i == 0 {
                    (at(1, k) - at(0, k)) / h
                } else {
                    (at(last, k) - at(last - 1, k)) / h
                }
            } else if i == 0 {
                (-3.0 * at(0, k) + 4.0 * at(1, k) - at(2, k)) / (2.0 * h)
            } else {
                (3.0 * at(last, k) - 4.0 * at(last - 1, k) + at(last - 2, k)) / (2.0 * h)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The piecewise-linear extremal of the delayed cubic example.
    fn zigzag(h: f64) -> Trajectory {
        let nodes = (4.0 / h).round() as usize + 1;
        Trajectory::from_fn(-1.0, h, nodes, 1, |t| {
            vec![if t <= 0.0 {
                -t
            } else if t <= 1.0 {
                t
            } else if t <= 2.0 {
                2.0 - t
            } else {
                t - 2.0
            }]
        })
        .unwrap()
    }

    #[test]
    fn slope_on_first_piece() {
        let tr = zigzag(0.1);
        let i = 15; // t = 0.5
        assert!((tr.time(i) - 0.5).abs() < 1e-12);
        match tr.derivative(i).unwrap() {
            Rate::Smooth(r) => assert!((r[0] - 1.0).abs() < 1e-12),
            k => panic!("unexpected {k:?}"),
        }
    }

    #[test]
    fn kink_reports_one_sided_pair() {
        let tr = zigzag(0.1);
        assert_eq!(tr.kink_set(), vec![10, 20, 30]);
        match tr.derivative(20).unwrap() {
            Rate::Kink { left, right } => {
                assert!((left[0] - 1.0).abs() < 1e-12);
                assert!((right[0] + 1.0).abs() < 1e-12);
            }
            r => panic!("expected kink, got {r:?}"),
        }
    }

    #[test]
    fn constant_trajectory_has_zero_rate() {
        let tr = Trajectory::new(0.0, 0.5, 1, vec![3.0; 7]).unwrap();
        for i in 0..7 {
            assert_eq!(tr.derivative(i).unwrap(), Rate::Smooth(vec![0.0]));
        }
        assert!(tr.derivative(7).is_err());
    }

    #[test]
    fn smooth_curve_is_not_flagged() {
        let tr = Trajectory::from_fn(0.0, 0.01, 201, 1, |t| vec![(3.0 * t).sin() + t * t]).unwrap();
        assert!(tr.kink_set().is_empty());
        // second-order one-sided end stencils
        let end = tr.rate(200)[0];
        assert!((end - (3.0 * (6.0f64).cos() + 4.0)).abs() < 1e-3);
    }

    #[test]
    fn policies() {
        let tr = Trajectory::from_fn(0.0, 0.1, 11, 1, |t| vec![t * t]).unwrap();
        let left = tr.clone().with_policy(DerivativePolicy::OneSidedLeft);
        let right = tr.clone().with_policy(DerivativePolicy::OneSidedRight);
        assert!((left.rate(5)[0] - 0.9).abs() < 1e-12);
        assert!((right.rate(5)[0] - 1.1).abs() < 1e-12);
        assert!((tr.rate(5)[0] - 1.0).abs() < 1e-12);
        assert!((tr.accel(5)[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn explicit_kinks_override_detection() {
        let tr = zigzag(0.1).with_kinks([3]);
        assert_eq!(tr.kink_set(), vec![3]);
        let tr = tr.add_kinks([5]);
        assert_eq!(tr.kink_set(), vec![3, 5]);
    }

    #[test]
    fn costate_suffix() {
        let tr = Trajectory::new(0.0, 1.0, 1, vec![0.0; 4])
            .unwrap()
            .with_costates(2, vec![7.0, 8.0])
            .unwrap();
        assert_eq!(tr.costate(1), None);
        assert_eq!(tr.costate(3), Some(&[8.0][..]));
    }
}
