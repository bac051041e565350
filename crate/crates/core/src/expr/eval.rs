use smallvec::{smallvec, SmallVec};

use super::{EvalPoint, Func, Node, Slot};
use crate::error::EvalError;

type Tangent = SmallVec<[f64; 8]>;

/// Value together with its partial derivatives.
///
/// `partials` holds one entry per free slot of the evaluated expression,
/// in slot order.
#[derive(Debug, Clone, PartialEq)]
pub struct DualValue {
    pub value: f64,
    pub partials: Vec<(Slot, f64)>,
}

impl DualValue {
    /// Partial with respect to `slot`; zero for slots the expression ignores.
    pub fn get(&self, slot: Slot) -> f64 {
        self.partials
            .binary_search_by(|(s, _)| s.cmp(&slot))
            .map(|i| self.partials[i].1)
            .unwrap_or(0.0)
    }
}

fn lookup(x: &EvalPoint<'_>, slot: Slot) -> Result<f64, EvalError> {
    x.get(slot).ok_or_else(|| EvalError::MissingSlot {
        slot: slot.to_string(),
    })
}

fn finite(v: f64, node: &Node) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::Domain {
            subtree: node.to_string(),
            reason: "non-finite result".into(),
        })
    }
}

fn as_integer(e: f64) -> Option<i32> {
    if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
        Some(e as i32)
    } else {
        None
    }
}

fn pow_value(b: f64, e: f64, node: &Node) -> Result<f64, EvalError> {
    if b == 0.0 && e < 0.0 {
        return Err(EvalError::DivisionByZero {
            subtree: node.to_string(),
        });
    }
    match as_integer(e) {
        Some(k) => Ok(b.powi(k)),
        None if b < 0.0 => Err(EvalError::Domain {
            subtree: node.to_string(),
            reason: "fractional power of a negative base".into(),
        }),
        None => Ok(b.powf(e)),
    }
}

pub(super) fn value(node: &Node, x: &EvalPoint<'_>) -> Result<f64, EvalError> {
    let v = match node {
        Node::Const(c) => *c,
        Node::Slot(s) => lookup(x, *s)?,
        Node::Neg(a) => -value(a, x)?,
        Node::Add(a, b) => value(a, x)? + value(b, x)?,
        Node::Sub(a, b) => value(a, x)? - value(b, x)?,
        Node::Mul(a, b) => value(a, x)? * value(b, x)?,
        Node::Div(a, b) => {
            let num = value(a, x)?;
            let den = value(b, x)?;
            if den == 0.0 {
                return Err(EvalError::DivisionByZero {
                    subtree: node.to_string(),
                });
            }
            num / den
        }
        Node::Pow(a, b) => pow_value(value(a, x)?, value(b, x)?, node)?,
        Node::Call(f, a) => {
            let v = value(a, x)?;
            match f {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Exp => v.exp(),
                Func::Abs => v.abs(),
                Func::Ln => {
                    if v <= 0.0 {
                        return Err(EvalError::Domain {
                            subtree: node.to_string(),
                            reason: "logarithm of a non-positive value".into(),
                        });
                    }
                    v.ln()
                }
            }
        }
    };
    finite(v, node)
}

struct Dual {
    v: f64,
    d: Tangent,
}

pub(super) fn dual(node: &Node, slots: &[Slot], x: &EvalPoint<'_>) -> Result<DualValue, EvalError> {
    let r = dual_rec(node, slots, x)?;
    Ok(DualValue {
        value: r.v,
        partials: slots.iter().copied().zip(r.d).collect(),
    })
}

fn dual_rec(node: &Node, slots: &[Slot], x: &EvalPoint<'_>) -> Result<Dual, EvalError> {
    let width = slots.len();
    let out = match node {
        Node::Const(c) => Dual {
            v: *c,
            d: smallvec![0.0; width],
        },
        Node::Slot(s) => {
            let mut d: Tangent = smallvec![0.0; width];
            // free slots always contain every leaf
            let k = slots.binary_search(s).expect("slot list covers every leaf");
            d[k] = 1.0;
            Dual {
                v: lookup(x, *s)?,
                d,
            }
        }
        Node::Neg(a) => {
            let a = dual_rec(a, slots, x)?;
            Dual {
                v: -a.v,
                d: a.d.iter().map(|g| -g).collect(),
            }
        }
        Node::Add(a, b) => {
            let (a, b) = (dual_rec(a, slots, x)?, dual_rec(b, slots, x)?);
            Dual {
                v: a.v + b.v,
                d: a.d.iter().zip(&b.d).map(|(p, q)| p + q).collect(),
            }
        }
        Node::Sub(a, b) => {
            let (a, b) = (dual_rec(a, slots, x)?, dual_rec(b, slots, x)?);
            Dual {
                v: a.v - b.v,
                d: a.d.iter().zip(&b.d).map(|(p, q)| p - q).collect(),
            }
        }
        Node::Mul(a, b) => {
            let (a, b) = (dual_rec(a, slots, x)?, dual_rec(b, slots, x)?);
            Dual {
                v: a.v * b.v,
                d: a.d.iter().zip(&b.d).map(|(p, q)| p * b.v + a.v * q).collect(),
            }
        }
        Node::Div(a, b) => {
            let (a, b) = (dual_rec(a, slots, x)?, dual_rec(b, slots, x)?);
            if b.v == 0.0 {
                return Err(EvalError::DivisionByZero {
                    subtree: node.to_string(),
                });
            }
            let v = a.v / b.v;
            Dual {
                v,
                d: a.d.iter().zip(&b.d).map(|(p, q)| (p - v * q) / b.v).collect(),
            }
        }
        Node::Pow(a, b) => {
            let (base, expo) = (dual_rec(a, slots, x)?, dual_rec(b, slots, x)?);
            pow_dual(base, expo, node)?
        }
        Node::Call(f, a) => {
            let a = dual_rec(a, slots, x)?;
            let (v, slope) = match f {
                Func::Sin => (a.v.sin(), a.v.cos()),
                Func::Cos => (a.v.cos(), -a.v.sin()),
                Func::Exp => {
                    let e = a.v.exp();
                    (e, e)
                }
                Func::Ln => {
                    if a.v <= 0.0 {
                        return Err(EvalError::Domain {
                            subtree: node.to_string(),
                            reason: "logarithm of a non-positive value".into(),
                        });
                    }
                    (a.v.ln(), 1.0 / a.v)
                }
                Func::Abs => {
                    if a.v == 0.0 && a.d.iter().any(|g| *g != 0.0) {
                        return Err(EvalError::NonDifferentiable {
                            subtree: node.to_string(),
                        });
                    }
                    (a.v.abs(), a.v.signum())
                }
            };
            Dual {
                v,
                d: a.d.iter().map(|g| slope * g).collect(),
            }
        }
    };
    finite(out.v, node)?;
    for g in &out.d {
        finite(*g, node)?;
    }
    Ok(out)
}

fn pow_dual(base: Dual, expo: Dual, node: &Node) -> Result<Dual, EvalError> {
    let v = pow_value(base.v, expo.v, node)?;
    let exponent_varies = expo.d.iter().any(|g| *g != 0.0);
    if !exponent_varies {
        if expo.v == 0.0 {
            return Ok(Dual {
                v,
                d: smallvec![0.0; base.d.len()],
            });
        }
        let base_varies = base.d.iter().any(|g| *g != 0.0);
        if base.v == 0.0 && expo.v < 1.0 && base_varies {
            return Err(EvalError::NonDifferentiable {
                subtree: node.to_string(),
            });
        }
        let slope = if base_varies {
            expo.v * pow_value(base.v, expo.v - 1.0, node)?
        } else {
            0.0
        };
        return Ok(Dual {
            v,
            d: base.d.iter().map(|g| slope * g).collect(),
        });
    }
    if base.v <= 0.0 {
        return Err(EvalError::Domain {
            subtree: node.to_string(),
            reason: "variable exponent requires a positive base".into(),
        });
    }
    let ln_b = base.v.ln();
    Ok(Dual {
        v,
        d: base
            .d
            .iter()
            .zip(&expo.d)
            .map(|(gb, ge)| v * (ge * ln_b + expo.v * gb / base.v))
            .collect(),
    })
}
