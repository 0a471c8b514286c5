use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::ToPrimitive;

use super::{Expr, Func, Node, Symbol, EPS_POLE};
use crate::error::{Error, Result};

/// Assignment of numerical values to symbols.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Point(BTreeMap<Symbol, f64>);

impl Point {
    pub fn new() -> Point {
        Point::default()
    }

    pub fn get(&self, s: &Symbol) -> Option<f64> {
        self.0.get(s).copied()
    }

    pub fn set(&mut self, s: Symbol, v: f64) {
        self.0.insert(s, v);
    }

    pub fn with(mut self, s: Symbol, v: f64) -> Point {
        self.set(s, v);
        self
    }

    pub fn extend_from(&mut self, other: &Point) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), *v);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, &f64)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(Symbol, f64)> for Point {
    fn from_iter<I: IntoIterator<Item = (Symbol, f64)>>(iter: I) -> Self {
        Point(iter.into_iter().collect())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}: {v:.17e}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Fault {
    Pole(Expr),
    Domain(Expr),
    Unbound(Symbol),
}

impl Fault {
    pub(crate) fn into_error(self, p: &Point) -> Error {
        match self {
            Fault::Pole(e) => Error::Pole { subexpr: e.to_string(), point: p.to_string() },
            Fault::Domain(e) => Error::Domain { subexpr: e.to_string(), point: p.to_string() },
            Fault::Unbound(s) => Error::Unbound(s.to_string()),
        }
    }
}

/// Evaluates expressions at one point, memoizing shared subtrees.
///
/// Build one per point and reuse it for every expression evaluated there;
/// expressions produced by differentiation share most of their structure.
pub struct Evaluator<'p> {
    point: &'p Point,
    memo: HashMap<usize, (Expr, f64)>,
}

impl<'p> Evaluator<'p> {
    pub fn new(point: &'p Point) -> Self {
        Evaluator { point, memo: HashMap::new() }
    }

    pub fn eval(&mut self, e: &Expr) -> Result<f64> {
        self.eval_raw(e).map_err(|f| f.into_error(self.point))
    }

    pub(crate) fn eval_raw(&mut self, e: &Expr) -> std::result::Result<f64, Fault> {
        let shared = e.is_shared() && !matches!(e.node(), Node::Const(_) | Node::Sym(_));
        if shared {
            if let Some((_, v)) = self.memo.get(&e.addr()) {
                return Ok(*v);
            }
        }
        let v = self.compute(e)?;
        if shared {
            self.memo.insert(e.addr(), (e.clone(), v));
        }
        Ok(v)
    }

    fn compute(&mut self, e: &Expr) -> std::result::Result<f64, Fault> {
        Ok(match e.node() {
            Node::Const(c) => c.to_f64().unwrap_or(f64::NAN),
            Node::Sym(s) => self.point.get(s).ok_or_else(|| Fault::Unbound(s.clone()))?,
            Node::Add(v) => {
                let mut acc = 0.0;
                for c in v {
                    acc += self.eval_raw(c)?;
                }
                acc
            }
            Node::Mul(v) => {
                let mut acc = 1.0;
                for c in v {
                    acc *= self.eval_raw(c)?;
                }
                acc
            }
            Node::Neg(x) => -self.eval_raw(x)?,
            Node::Div(a, b) => {
                let d = self.eval_raw(b)?;
                if d.abs() < EPS_POLE {
                    return Err(Fault::Pole(e.clone()));
                }
                self.eval_raw(a)? / d
            }
            Node::Pow(b, ex) => {
                let x = self.eval_raw(b)?;
                let (p, q) = (*ex.numer(), *ex.denom());
                if p < 0 && x.abs() < EPS_POLE {
                    return Err(Fault::Pole(e.clone()));
                }
                if q == 1 {
                    x.powi(p as i32)
                } else {
                    if x < 0.0 {
                        return Err(Fault::Domain(e.clone()));
                    }
                    if q == 2 {
                        x.sqrt().powi(p as i32)
                    } else {
                        x.powf(p as f64 / q as f64)
                    }
                }
            }
            Node::Apply(f, x) => {
                let x = self.eval_raw(x)?;
                match f {
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(Fault::Domain(e.clone()));
                        }
                        x.ln()
                    }
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Arctan => x.atan(),
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(Fault::Domain(e.clone()));
                        }
                        x.sqrt()
                    }
                }
            }
        })
    }
}

impl Expr {
    /// IEEE-754 value at `p`.
    pub fn eval(&self, p: &Point) -> Result<f64> {
        Evaluator::new(p).eval(self)
    }
}
