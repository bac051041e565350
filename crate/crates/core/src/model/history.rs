use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const JOIN_TOL: f64 = 1e-9;

/// Polynomial coefficients of one history piece, in ascending powers of `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coeffs {
    /// Shorthand for `n = 1`.
    Scalar(Vec<f64>),
    PerComponent(Vec<Vec<f64>>),
}

impl Coeffs {
    fn components(&self) -> Vec<Vec<f64>> {
        match self {
            Coeffs::Scalar(c) => vec![c.clone()],
            Coeffs::PerComponent(c) => c.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    pub from: f64,
    pub to: f64,
    pub coeffs: Coeffs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistorySpec {
    pub pieces: Vec<PieceSpec>,
}

#[derive(Debug, Clone, PartialEq)]
struct Piece {
    from: f64,
    to: f64,
    coeffs: Vec<Vec<f64>>,
}

fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * t + a)
}

fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(p, a)| p as f64 * a)
        .collect()
}

/// Piecewise-polynomial initial function on `[t1 - tau, t1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    n: usize,
    pieces: Vec<Piece>,
}

impl History {
    /// Validates the pieces against the dimension and the interval they
    /// must cover.
    pub fn new(spec: &HistorySpec, n: usize, from: f64, to: f64) -> Result<Self> {
        if spec.pieces.is_empty() {
            return Err(Error::invalid("history", "at least one piece is required"));
        }
        let mut pieces = Vec::with_capacity(spec.pieces.len());
        for (k, p) in spec.pieces.iter().enumerate() {
            let field = format!("history.pieces[{k}]");
            if !(p.from < p.to) || !p.from.is_finite() || !p.to.is_finite() {
                return Err(Error::invalid(field, "`from` must be finite and below `to`"));
            }
            let coeffs = p.coeffs.components();
            if coeffs.len() != n {
                return Err(Error::invalid(
                    field,
                    format!("expected {n} coefficient lists, found {}", coeffs.len()),
                ));
            }
            if coeffs.iter().any(|c| c.is_empty() || c.iter().any(|a| !a.is_finite())) {
                return Err(Error::invalid(field, "coefficients must be finite and non-empty"));
            }
            pieces.push(Piece {
                from: p.from,
                to: p.to,
                coeffs,
            });
        }
        for w in pieces.windows(2) {
            if (w[0].to - w[1].from).abs() > JOIN_TOL * (1.0 + w[0].to.abs()) {
                return Err(Error::invalid("history", "pieces must be contiguous and ordered"));
            }
        }
        let tol = JOIN_TOL * (1.0 + from.abs().max(to.abs()));
        if pieces[0].from > from + tol || pieces[pieces.len() - 1].to < to - tol {
            return Err(Error::invalid(
                "history",
                format!("pieces must cover [{from}, {to}]"),
            ));
        }
        Ok(History { n, pieces })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn eps(&self, t: f64) -> f64 {
        JOIN_TOL * (1.0 + t.abs())
    }

    fn piece_at(&self, t: f64) -> &Piece {
        let eps = self.eps(t);
        self.pieces
            .iter()
            .rev()
            .find(|p| p.from - eps <= t && t <= p.to + eps)
            .unwrap_or_else(|| {
                if t < self.pieces[0].from {
                    &self.pieces[0]
                } else {
                    &self.pieces[self.pieces.len() - 1]
                }
            })
    }

    fn piece_left(&self, t: f64) -> &Piece {
        let eps = self.eps(t);
        self.pieces
            .iter()
            .find(|p| p.from + eps < t && t <= p.to + eps)
            .unwrap_or(&self.pieces[0])
    }

    fn piece_right(&self, t: f64) -> &Piece {
        let eps = self.eps(t);
        self.pieces
            .iter()
            .find(|p| p.from - eps <= t && t < p.to - eps)
            .unwrap_or(&self.pieces[self.pieces.len() - 1])
    }

    pub fn value(&self, t: f64) -> Vec<f64> {
        self.piece_at(t).coeffs.iter().map(|c| horner(c, t)).collect()
    }

    /// Derivative from the left (the piece ending at or after `t`).
    pub fn rate_left(&self, t: f64) -> Vec<f64> {
        self.piece_left(t)
            .coeffs
            .iter()
            .map(|c| horner(&derivative(c), t))
            .collect()
    }

    pub fn rate_right(&self, t: f64) -> Vec<f64> {
        self.piece_right(t)
            .coeffs
            .iter()
            .map(|c| horner(&derivative(c), t))
            .collect()
    }

    pub fn accel(&self, t: f64) -> Vec<f64> {
        self.piece_right(t)
            .coeffs
            .iter()
            .map(|c| horner(&derivative(&derivative(c)), t))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(pieces: Vec<(f64, f64, Vec<f64>)>) -> HistorySpec {
        HistorySpec {
            pieces: pieces
                .into_iter()
                .map(|(from, to, c)| PieceSpec {
                    from,
                    to,
                    coeffs: Coeffs::Scalar(c),
                })
                .collect(),
        }
    }

    #[test]
    fn linear_history() {
        let h = History::new(&spec(vec![(-1.0, 0.0, vec![0.0, -1.0])]), 1, -1.0, 0.0).unwrap();
        assert_eq!(h.value(-0.5), vec![0.5]);
        assert_eq!(h.rate_left(0.0), vec![-1.0]);
        assert_eq!(h.rate_right(-1.0), vec![-1.0]);
        assert_eq!(h.accel(-0.3), vec![0.0]);
    }

    #[test]
    fn junction_rates_use_adjacent_pieces() {
        let h = History::new(
            &spec(vec![(-2.0, -1.0, vec![0.0, 1.0]), (-1.0, 0.0, vec![-2.0, -1.0])]),
            1,
            -2.0,
            0.0,
        )
        .unwrap();
        assert_eq!(h.rate_left(-1.0), vec![1.0]);
        assert_eq!(h.rate_right(-1.0), vec![-1.0]);
        // quadratic: d/dt (t^2) = 2t
        let q = History::new(&spec(vec![(-1.0, 0.0, vec![0.0, 0.0, 1.0])]), 1, -1.0, 0.0).unwrap();
        assert_eq!(q.rate_left(-0.5), vec![-1.0]);
        assert_eq!(q.accel(-0.5), vec![2.0]);
    }

    #[test]
    fn rejects_gaps_and_short_coverage() {
        assert!(History::new(
            &spec(vec![(-1.0, -0.5, vec![0.0]), (-0.4, 0.0, vec![0.0])]),
            1,
            -1.0,
            0.0
        )
        .is_err());
        assert!(History::new(&spec(vec![(-0.5, 0.0, vec![0.0])]), 1, -1.0, 0.0).is_err());
        assert!(History::new(&spec(vec![(-1.0, 0.0, vec![0.0])]), 2, -1.0, 0.0).is_err());
    }
}
