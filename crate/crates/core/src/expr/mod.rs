//! Scalar expressions over the fixed argument slots of a delayed Lagrangian
//! or control Hamiltonian.
//!
//! An [`Expression`] is parsed once and then evaluated many times. Partial
//! derivatives come from forward-mode dual arithmetic ([`DualValue`]), so they
//! are exact up to floating-point round-off.
//!
//! ```
//! use isodelay::expr::{parse_expression, EvalPoint, Mode, Slot};
//!
//! let e = parse_expression("(qd[0] + qdtau[0])^3", 1, Mode::Lagrangian).unwrap();
//! let x = EvalPoint { qd: &[1.0], qdtau: &[-1.0], ..EvalPoint::default() };
//! assert_eq!(e.evaluate(&x).unwrap(), 0.0);
//! assert_eq!(e.partial(Slot::Qd(0), &x).unwrap(), 0.0);
//! ```

mod eval;
mod parse;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use eval::DualValue;
pub use parse::parse_expression;

use crate::error::ExprError;

/// Which argument vocabulary an expression may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `(t, q, qd, qtau, qdtau)`
    #[default]
    Lagrangian,
    /// `(t, q, u, qtau, utau, p)`
    Ocp,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Lagrangian => f.write_str("lagrangian"),
            Mode::Ocp => f.write_str("ocp"),
        }
    }
}

/// One scalar argument component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    T,
    Q(usize),
    Qd(usize),
    Qtau(usize),
    Qdtau(usize),
    U(usize),
    Utau(usize),
    P(usize),
    Lambda(usize),
}

impl Slot {
    /// Slot family name as written in source text.
    pub fn family(&self) -> &'static str {
        match self {
            Slot::T => "t",
            Slot::Q(_) => "q",
            Slot::Qd(_) => "qd",
            Slot::Qtau(_) => "qtau",
            Slot::Qdtau(_) => "qdtau",
            Slot::U(_) => "u",
            Slot::Utau(_) => "utau",
            Slot::P(_) => "p",
            Slot::Lambda(_) => "lambda",
        }
    }

    pub fn index(&self) -> Option<usize> {
        match *self {
            Slot::T => None,
            Slot::Q(i)
            | Slot::Qd(i)
            | Slot::Qtau(i)
            | Slot::Qdtau(i)
            | Slot::U(i)
            | Slot::Utau(i)
            | Slot::P(i)
            | Slot::Lambda(i) => Some(i),
        }
    }

    pub(crate) fn from_family(name: &str, index: usize) -> Option<Slot> {
        Some(match name {
            "q" => Slot::Q(index),
            "qd" => Slot::Qd(index),
            "qtau" => Slot::Qtau(index),
            "qdtau" => Slot::Qdtau(index),
            "u" => Slot::U(index),
            "utau" => Slot::Utau(index),
            "p" => Slot::P(index),
            "lambda" => Slot::Lambda(index),
            _ => return None,
        })
    }

    /// Whether the slot family may appear in an expression of `mode`.
    pub fn legal_in(&self, mode: Mode) -> bool {
        match mode {
            Mode::Lagrangian => matches!(
                self,
                Slot::T | Slot::Q(_) | Slot::Qd(_) | Slot::Qtau(_) | Slot::Qdtau(_) | Slot::Lambda(_)
            ),
            Mode::Ocp => matches!(
                self,
                Slot::T
                    | Slot::Q(_)
                    | Slot::U(_)
                    | Slot::Qtau(_)
                    | Slot::Utau(_)
                    | Slot::P(_)
                    | Slot::Lambda(_)
            ),
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index() {
            None => f.write_str("t"),
            Some(i) => write!(f, "{}[{}]", self.family(), i),
        }
    }
}

/// Built-in unary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Abs,
}

impl Func {
    pub fn name(&self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Abs => "abs",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Slot(Slot),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn collect_slots(&self, out: &mut BTreeSet<Slot>) {
        match self {
            Node::Const(_) => {}
            Node::Slot(s) => {
                out.insert(*s);
            }
            Node::Neg(a) | Node::Call(_, a) => a.collect_slots(out),
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Pow(a, b) => {
                a.collect_slots(out);
                b.collect_slots(out);
            }
        }
    }

    fn map_slots(&self, f: &impl Fn(Slot) -> Slot) -> Node {
        let bx = |n: &Node| Box::new(n.map_slots(f));
        match self {
            Node::Const(c) => Node::Const(*c),
            Node::Slot(s) => Node::Slot(f(*s)),
            Node::Neg(a) => Node::Neg(bx(a)),
            Node::Call(g, a) => Node::Call(*g, bx(a)),
            Node::Add(a, b) => Node::Add(bx(a), bx(b)),
            Node::Sub(a, b) => Node::Sub(bx(a), bx(b)),
            Node::Mul(a, b) => Node::Mul(bx(a), bx(b)),
            Node::Div(a, b) => Node::Div(bx(a), bx(b)),
            Node::Pow(a, b) => Node::Pow(bx(a), bx(b)),
        }
    }
}

// Every compound node is printed inside parentheses, so the printed form
// parses back to the same tree without any precedence reasoning.
impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) => write!(f, "{c}"),
            Node::Slot(s) => write!(f, "{s}"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
            Node::Div(a, b) => write!(f, "({a} / {b})"),
            Node::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Node::Call(g, a) => write!(f, "{}({a})", g.name()),
        }
    }
}

/// A parsed, immutable scalar expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    ast: Node,
    free_slots: Vec<Slot>,
}

impl Expression {
    /// Wraps a tree, computing its free slots.
    pub fn from_ast(ast: Node) -> Self {
        let mut set = BTreeSet::new();
        ast.collect_slots(&mut set);
        Expression {
            ast,
            free_slots: set.into_iter().collect(),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_ast(Node::Const(c))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn ast(&self) -> &Node {
        &self.ast
    }

    /// Slots referenced by the expression, sorted.
    pub fn free_slots(&self) -> &[Slot] {
        &self.free_slots
    }

    pub fn references(&self, slot: Slot) -> bool {
        self.free_slots.binary_search(&slot).is_ok()
    }

    /// Renames slots, e.g. `qd -> u` when moving a Lagrangian into control form.
    pub fn map_slots(&self, f: impl Fn(Slot) -> Slot) -> Expression {
        Expression::from_ast(self.ast.map_slots(&f))
    }

    /// Checks that every free slot is legal for `mode` and that indexed
    /// slots stay below the given bounds.
    pub fn check_slots(&self, mode: Mode, n: usize, m: Option<usize>) -> Result<(), ExprError> {
        for s in &self.free_slots {
            if !s.legal_in(mode) {
                return Err(ExprError::IllegalSlot {
                    slot: s.to_string(),
                    mode,
                });
            }
            let bound = match s {
                Slot::Q(_) | Slot::Qd(_) | Slot::Qtau(_) | Slot::Qdtau(_) | Slot::P(_) => Some(n),
                Slot::U(_) | Slot::Utau(_) => m,
                _ => None,
            };
            if let (Some(b), Some(i)) = (bound, s.index()) {
                if i >= b {
                    return Err(ExprError::IndexOutOfRange {
                        slot: s.to_string(),
                        bound: b,
                    });
                }
            }
        }
        Ok(())
    }

    /// Plain evaluation.
    pub fn evaluate(&self, x: &EvalPoint<'_>) -> Result<f64, crate::error::EvalError> {
        eval::value(&self.ast, x)
    }

    /// Value and every partial derivative with respect to the free slots.
    pub fn gradient(&self, x: &EvalPoint<'_>) -> Result<DualValue, crate::error::EvalError> {
        eval::dual(&self.ast, &self.free_slots, x)
    }

    /// Exact partial derivative with respect to one slot component.
    pub fn partial(&self, slot: Slot, x: &EvalPoint<'_>) -> Result<f64, crate::error::EvalError> {
        if !self.references(slot) {
            return Ok(0.0);
        }
        Ok(self.gradient(x)?.get(slot))
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.ast.fmt(f)
    }
}

/// Values for the argument slots at one instant.
///
/// Vectors are borrowed; absent families are empty slices. Evaluating an
/// expression that references an absent component is a
/// [`MissingSlot`](crate::error::EvalError::MissingSlot) error.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalPoint<'a> {
    pub t: f64,
    pub q: &'a [f64],
    pub qd: &'a [f64],
    pub qtau: &'a [f64],
    pub qdtau: &'a [f64],
    pub u: &'a [f64],
    pub utau: &'a [f64],
    pub p: &'a [f64],
    pub lambda: &'a [f64],
}

impl EvalPoint<'_> {
    pub fn get(&self, slot: Slot) -> Option<f64> {
        match slot {
            Slot::T => Some(self.t),
            Slot::Q(i) => self.q.get(i).copied(),
            Slot::Qd(i) => self.qd.get(i).copied(),
            Slot::Qtau(i) => self.qtau.get(i).copied(),
            Slot::Qdtau(i) => self.qdtau.get(i).copied(),
            Slot::U(i) => self.u.get(i).copied(),
            Slot::Utau(i) => self.utau.get(i).copied(),
            Slot::P(i) => self.p.get(i).copied(),
            Slot::Lambda(i) => self.lambda.get(i).copied(),
        }
    }
}
