//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | power
//! power  := base ('^' factor)?
//! base   := number | slotref | '(' expr ')' | func '(' expr ')'
//! slotref:= family '[' index ']' | 't'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)`.

use super::{Expression, Func, Mode, Node, Slot};
use crate::error::ExprError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Int(usize),
    Sym(char),
    End,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
}

fn lex(src: &str) -> Result<Lexer, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let mut integral = true;
            if i < chars.len() && chars[i] == '.' {
                integral = false;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    integral = false;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                offset: start + 1,
                message: format!("malformed number `{text}`"),
            })?;
            let tok = match (integral, text.parse::<usize>()) {
                (true, Ok(n)) => Tok::Int(n),
                _ => Tok::Num(value),
            };
            toks.push((tok, start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push((Tok::Ident(chars[start..i].iter().collect()), start));
        } else if "+-*/^()[],".contains(c) {
            toks.push((Tok::Sym(c), i));
            i += 1;
        } else {
            return Err(ExprError::Syntax {
                offset: i + 1,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    toks.push((Tok::End, chars.len()));
    Ok(Lexer { toks })
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1 + 1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self) -> ExprError {
        let message = match self.peek() {
            Tok::End => "unexpected end of input".to_string(),
            Tok::Num(v) => format!("unexpected number `{v}`"),
            Tok::Int(v) => format!("unexpected number `{v}`"),
            Tok::Ident(s) => format!("unexpected identifier `{s}`"),
            Tok::Sym(c) => format!("unexpected `{c}`"),
        };
        ExprError::Syntax {
            offset: self.offset(),
            message,
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            let mut err = self.unexpected();
            if let ExprError::Syntax { message, .. } = &mut err {
                message.push_str(&format!(", expected `{c}`"));
            }
            Err(err)
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Sym('+') => {
                    self.bump();
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Sym('-') => {
                    self.bump();
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Tok::Sym('*') => {
                    self.bump();
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Sym('/') => {
                    self.bump();
                    lhs = Node::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Node, ExprError> {
        if *self.peek() == Tok::Sym('-') {
            self.bump();
            return Ok(Node::Neg(Box::new(self.factor()?)));
        }
        let base = self.base()?;
        if *self.peek() == Tok::Sym('^') {
            self.bump();
            let exponent = self.factor()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Node, ExprError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Node::Const(v))
            }
            Tok::Int(v) => {
                self.bump();
                Ok(Node::Const(v as f64))
            }
            Tok::Sym('(') => {
                self.bump();
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                self.identifier(name, offset)
            }
            _ => Err(self.unexpected()),
        }
    }

    fn identifier(&mut self, name: String, offset: usize) -> Result<Node, ExprError> {
        if let Some(func) = Func::from_name(&name) {
            self.expect('(')?;
            let mut args = vec![self.expr()?];
            while *self.peek() == Tok::Sym(',') {
                self.bump();
                args.push(self.expr()?);
            }
            self.expect(')')?;
            if args.len() != 1 {
                return Err(ExprError::Arity {
                    name,
                    found: args.len(),
                    offset,
                });
            }
            return Ok(Node::Call(func, Box::new(args.pop().unwrap())));
        }
        if name == "t" {
            if *self.peek() == Tok::Sym('[') {
                return Err(ExprError::Syntax {
                    offset: self.offset(),
                    message: "`t` is a scalar and takes no index".into(),
                });
            }
            return Ok(Node::Slot(Slot::T));
        }
        if Slot::from_family(&name, 0).is_none() {
            return Err(ExprError::UnknownIdentifier { name, offset });
        }
        self.expect('[')?;
        let index = match self.peek() {
            Tok::Int(i) => *i,
            _ => {
                return Err(ExprError::Syntax {
                    offset: self.offset(),
                    message: format!("expected a non-negative integer index for `{name}`"),
                })
            }
        };
        self.bump();
        self.expect(']')?;
        Ok(Node::Slot(Slot::from_family(&name, index).unwrap()))
    }
}

/// Parses `source` into an [`Expression`] whose slots are legal for `mode`
/// and whose state/costate indices are below `n`.
pub fn parse_expression(source: &str, n: usize, mode: Mode) -> Result<Expression, ExprError> {
    let lexer = lex(source)?;
    let mut parser = Parser {
        toks: lexer.toks,
        pos: 0,
    };
    let ast = parser.expr()?;
    if *parser.peek() != Tok::End {
        return Err(parser.unexpected());
    }
    let e = Expression::from_ast(ast);
    e.check_slots(mode, n, None)?;
    Ok(e)
}
