use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Which formula applies at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Before `t1`, where only the history lives.
    History,
    /// `[t1, t2 - τ]`: conditions couple `t` and `t + τ`.
    Inner,
    /// `(t2 - τ, t2]`: classical form.
    Outer,
}

/// Residual restricted to a time window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Window {
    pub name: String,
    pub from: f64,
    pub to: f64,
    pub sup_norm: f64,
    pub passed: bool,
}

/// Constant fitted to an integrated-form quantity on one regime.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeConstant {
    pub regime: Regime,
    pub value: Vec<f64>,
}

/// Pointwise residual of one necessary condition along a trajectory.
///
/// `values[k]` belongs to grid node `nodes[k]`. Nodes whose evaluation would
/// touch a kink are listed in `excluded` instead.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub name: String,
    pub nodes: Vec<usize>,
    pub times: Vec<f64>,
    pub regimes: Vec<Regime>,
    pub values: Vec<Vec<f64>>,
    /// The quantity whose constancy is tested, before running integrals are
    /// subtracted. Empty for conditions that are not in integrated form.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub bracket: Vec<Vec<f64>>,
    /// Differentiated form at reported nodes where a finite-difference
    /// stencil fits inside one regime.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub differentiated: Vec<Option<Vec<f64>>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub constants: Vec<RegimeConstant>,
    pub excluded: Vec<usize>,
    pub sup_norm: f64,
    pub l2_norm: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub windows: Vec<Window>,
}

impl ConditionReport {
    pub(crate) fn new(name: &str, tolerance: f64) -> Self {
        ConditionReport {
            name: name.into(),
            nodes: Vec::new(),
            times: Vec::new(),
            regimes: Vec::new(),
            values: Vec::new(),
            bracket: Vec::new(),
            differentiated: Vec::new(),
            constants: Vec::new(),
            excluded: Vec::new(),
            sup_norm: 0.0,
            l2_norm: 0.0,
            tolerance,
            passed: true,
            windows: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, node: usize, t: f64, regime: Regime, value: Vec<f64>) {
        self.nodes.push(node);
        self.times.push(t);
        self.regimes.push(regime);
        self.values.push(value);
    }

    /// Computes norms and the verdict. `h` weights the discrete L² norm.
    pub(crate) fn finish(mut self, h: f64) -> Self {
        self.sup_norm = sup(&self.values);
        self.l2_norm = (h * self.values.iter().flatten().map(|v| v * v).sum::<f64>()).sqrt();
        self.passed = self.sup_norm <= self.tolerance;
        self.excluded.sort_unstable();
        self.excluded.dedup();
        self
    }

    /// Re-judges the report (and its windows) against a new tolerance.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.passed = self.sup_norm <= tolerance;
        for w in &mut self.windows {
            w.passed = w.sup_norm <= tolerance;
        }
        self
    }

    pub(crate) fn add_window(&mut self, name: &str, from: f64, to: f64) {
        let eps = 1e-9 * (1.0 + from.abs().max(to.abs()));
        let vals: Vec<Vec<f64>> = self
            .times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t >= from - eps && **t <= to + eps)
            .map(|(_, v)| v.clone())
            .collect();
        let s = sup(&vals);
        self.windows.push(Window {
            name: name.into(),
            from,
            to,
            sup_norm: s,
            passed: s <= self.tolerance,
        });
    }

    /// Fitted constant of one regime, if any node of that regime was
    /// reported.
    pub fn constant(&self, regime: Regime) -> Option<&[f64]> {
        self.constants
            .iter()
            .find(|c| c.regime == regime)
            .map(|c| c.value.as_slice())
    }

    /// Largest residual component restricted to one regime.
    pub fn regime_sup(&self, regime: Regime) -> f64 {
        sup(self
            .regimes
            .iter()
            .zip(&self.values)
            .filter(|(r, _)| **r == regime)
            .map(|(_, v)| v))
    }

    /// Residual at grid node `node`, if it was reported.
    pub fn at_node(&self, node: usize) -> Option<&[f64]> {
        self.nodes
            .iter()
            .position(|&i| i == node)
            .map(|k| self.values[k].as_slice())
    }

    /// Reported node with the largest residual.
    pub fn worst_node(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (k, v) in self.values.iter().enumerate() {
            let a = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if best.is_none_or(|(_, b)| a > b) {
                best = Some((self.nodes[k], a));
            }
        }
        best.map(|(i, _)| i)
    }
}

pub(crate) fn sup<'a>(values: impl IntoIterator<Item = &'a Vec<f64>>) -> f64 {
    values
        .into_iter()
        .flatten()
        .fold(0.0f64, |m, v| if m.is_nan() || v.is_nan() { f64::NAN } else { m.max(v.abs()) })
}

/// Aligned one-line-per-report summary.
pub fn summary_table(reports: &[ConditionReport]) -> String {
    let label = |w: &Window| format!("  [{}, {}]", w.from, w.to);
    let width = reports
        .iter()
        .flat_map(|r| std::iter::once(r.name.chars().count()).chain(r.windows.iter().map(|w| label(w).chars().count())))
        .max()
        .unwrap_or(4)
        .max(9);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>12}  {:>12}  {:>10}  {:>6}  verdict",
        "condition", "sup", "l2", "tol", "nodes"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<width$}  {:>12.4e}  {:>12.4e}  {:>10.2e}  {:>6}  {}",
            r.name,
            r.sup_norm,
            r.l2_norm,
            r.tolerance,
            r.nodes.len(),
            if r.passed { "pass" } else { "FAIL" }
        );
        for w in &r.windows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>12.4e}  {:>12}  {:>10}  {:>6}  {}",
                label(w),
                w.sup_norm,
                "",
                "",
                "",
                if w.passed { "pass" } else { "FAIL" }
            );
        }
    }
    out
}
