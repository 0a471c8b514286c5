//! Immutable expression trees over jet coordinates.
//!
//! Coordinates are the time `t`, the dependent variables `u^a` and their
//! formal derivatives `u^a_k`. All jet symbols are independent coordinates as
//! far as [`Expr::diff`] is concerned; the link between them is made by the
//! total derivative in [`crate::jet`].
//!
//! There is no canonical simplifier. The constructors apply a handful of local
//! rewrites (flattening, rational constant folding, neutral elements) and
//! identities are decided by randomized evaluation, see [`ZeroTest`].

mod diff;
mod eval;
mod parse;
mod render;
mod subst;
mod zero;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};

pub use diff::Differ;
pub use eval::{Evaluator, Point};
pub use parse::{parse, parse_solved, ParseContext};
pub use render::{render, render_with, Namer};
pub(crate) use zero::attempt_rng;
pub use zero::{SamplingBox, Verdict, ZeroTest, EPS_POLE, EPS_ZERO};

/// Highest derivative order any problem may declare.
pub const Q_MAX: usize = 6;

/// Exponent of a power node. Only half-integers are produced by the parser.
pub type Exponent = Ratio<i64>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Time,
    /// `u^a`, 1-based.
    Dep(usize),
    /// `u^a_k` with `k >= 1`.
    Jet(usize, usize),
    Param(Arc<str>),
}

impl Symbol {
    /// Jet coordinate of variable `a` and order `k`; order 0 is the variable itself.
    pub fn jet(a: usize, k: usize) -> Symbol {
        if k == 0 {
            Symbol::Dep(a)
        } else {
            Symbol::Jet(a, k)
        }
    }

    pub fn param(name: &str) -> Symbol {
        Symbol::Param(Arc::from(name))
    }

    /// Derivative order for `u` symbols, `None` for `t` and parameters.
    pub fn order(&self) -> Option<usize> {
        match self {
            Symbol::Dep(_) => Some(0),
            Symbol::Jet(_, k) => Some(*k),
            _ => None,
        }
    }

    pub fn var_index(&self) -> Option<usize> {
        match self {
            Symbol::Dep(a) | Symbol::Jet(a, _) => Some(*a),
            _ => None,
        }
    }

    /// The symbol one derivative order higher (`t` has none).
    pub fn raised(&self) -> Option<Symbol> {
        match self {
            Symbol::Dep(a) => Some(Symbol::Jet(*a, 1)),
            Symbol::Jet(a, k) => Some(Symbol::Jet(*a, k + 1)),
            _ => None,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Time => write!(f, "t"),
            Symbol::Dep(a) if *a < 10 => write!(f, "u{a}"),
            Symbol::Dep(a) => write!(f, "u{{{a}}}"),
            Symbol::Jet(a, k) => write!(f, "u{{{a},{k}}}"),
            Symbol::Param(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Arctan,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Arctan => "arctan",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "arctan" => Func::Arctan,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, PartialEq)]
pub enum Node {
    Const(BigRational),
    Sym(Symbol),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Expr, Exponent),
    Div(Expr, Expr),
    Neg(Expr),
    Apply(Func, Expr),
}

/// Shared, immutable expression. Cloning is cheap.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl Eq for Expr {}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({})", render(self))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl Expr {
    fn new(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    /// Address used as a memo key; only meaningful while `self` is alive.
    pub(crate) fn addr(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    /// True when other handles to this node exist, i.e. memoizing it can pay off.
    pub(crate) fn is_shared(&self) -> bool {
        Arc::strong_count(&self.0) > 1
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn constant(c: BigRational) -> Expr {
        Expr::new(Node::Const(c))
    }

    pub fn int(n: i64) -> Expr {
        Expr::constant(rat(n))
    }

    pub fn ratio(p: i64, q: i64) -> Expr {
        Expr::constant(BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn sym(s: Symbol) -> Expr {
        Expr::new(Node::Sym(s))
    }

    pub fn t() -> Expr {
        Expr::sym(Symbol::Time)
    }

    pub fn u(a: usize) -> Expr {
        Expr::sym(Symbol::Dep(a))
    }

    pub fn jet(a: usize, k: usize) -> Expr {
        Expr::sym(Symbol::jet(a, k))
    }

    pub fn param(name: &str) -> Expr {
        Expr::sym(Symbol::param(name))
    }

    pub fn as_const(&self) -> Option<&BigRational> {
        match self.node() {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&Symbol> {
        match self.node() {
            Node::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_const_zero(&self) -> bool {
        self.as_const().is_some_and(|c| c.is_zero())
    }

    pub fn is_const_one(&self) -> bool {
        self.as_const().is_some_and(|c| c.is_one())
    }

    pub fn add_all<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let mut flat = Vec::new();
        let mut constant = rat(0);
        let mut stack: Vec<Expr> = terms.into_iter().collect();
        stack.reverse();
        while let Some(term) = stack.pop() {
            match term.node() {
                Node::Const(c) => constant += c,
                Node::Add(children) => {
                    for c in children.iter().rev() {
                        stack.push(c.clone());
                    }
                }
                _ => flat.push(term),
            }
        }
        if !constant.is_zero() {
            flat.push(Expr::constant(constant));
        }
        match flat.len() {
            0 => Expr::zero(),
            1 => flat.pop().unwrap(),
            _ => Expr::new(Node::Add(flat)),
        }
    }

    pub fn mul_all<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        let mut flat = Vec::new();
        let mut coeff = rat(1);
        let mut stack: Vec<Expr> = factors.into_iter().collect();
        stack.reverse();
        while let Some(f) = stack.pop() {
            match f.node() {
                Node::Const(c) => coeff *= c,
                Node::Neg(x) => {
                    coeff = -coeff;
                    stack.push(x.clone());
                }
                Node::Mul(children) => {
                    for c in children.iter().rev() {
                        stack.push(c.clone());
                    }
                }
                _ => flat.push(f),
            }
            if coeff.is_zero() {
                return Expr::zero();
            }
        }
        if flat.is_empty() {
            return Expr::constant(coeff);
        }
        if flat.iter().any(|f| matches!(f.node(), Node::Div(..))) {
            let mut num = vec![Expr::constant(coeff)];
            let mut den = Vec::new();
            for f in flat {
                match f.node() {
                    Node::Div(p, q) => {
                        num.push(p.clone());
                        den.push(q.clone());
                    }
                    _ => num.push(f),
                }
            }
            return Expr::mul_all(num).div(&Expr::mul_all(den));
        }
        let body = if flat.len() == 1 {
            flat.pop().unwrap()
        } else if coeff.is_one() || (-&coeff).is_one() {
            Expr::new(Node::Mul(flat))
        } else {
            let mut v = Vec::with_capacity(flat.len() + 1);
            v.push(Expr::constant(coeff.clone()));
            v.extend(flat);
            return Expr::new(Node::Mul(v));
        };
        if coeff.is_one() {
            body
        } else if (-&coeff).is_one() {
            body.neg()
        } else {
            Expr::new(Node::Mul(vec![Expr::constant(coeff), body]))
        }
    }

    pub fn neg(&self) -> Expr {
        match self.node() {
            Node::Const(c) => Expr::constant(-c),
            Node::Neg(x) => x.clone(),
            Node::Mul(fs) => match fs[0].as_const() {
                Some(c) => {
                    let c = -c;
                    let mut rest: Vec<Expr> = fs[1..].to_vec();
                    if c.is_one() {
                        if rest.len() == 1 {
                            rest.pop().unwrap()
                        } else {
                            Expr::new(Node::Mul(rest))
                        }
                    } else {
                        rest.insert(0, Expr::constant(c));
                        Expr::new(Node::Mul(rest))
                    }
                }
                None => Expr::new(Node::Neg(self.clone())),
            },
            _ => Expr::new(Node::Neg(self.clone())),
        }
    }

    /// Negation pushed into the terms of a sum, so `-(a + b)` prints as `-a - b`.
    pub fn neg_terms(&self) -> Expr {
        match self.node() {
            Node::Add(v) => Expr::add_all(v.iter().map(Expr::neg)),
            _ => self.neg(),
        }
    }

    pub fn add(&self, other: &Expr) -> Expr {
        Expr::add_all([self.clone(), other.clone()])
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        Expr::add_all([self.clone(), other.neg()])
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        Expr::mul_all([self.clone(), other.clone()])
    }

    /// Quotient. Panics on a literal zero denominator, which no caller may build.
    pub fn div(&self, den: &Expr) -> Expr {
        self.try_div(den).expect("literal zero denominator")
    }

    /// Quotient, `None` when the denominator is the literal constant 0.
    pub fn try_div(&self, den: &Expr) -> Option<Expr> {
        if den.is_const_zero() {
            return None;
        }
        if den.is_const_one() || self.is_const_zero() {
            return Some(self.clone());
        }
        if let (Some(a), Some(b)) = (self.as_const(), den.as_const()) {
            return Some(Expr::constant(a / b));
        }
        if let Node::Neg(d) = den.node() {
            return Some(self.neg().div(d));
        }
        // Keep a single fraction bar: a/(p/q) = a*q/p, (p/q)/b = p/(q*b).
        if let Node::Div(p, q) = den.node() {
            return self.mul(q).try_div(p);
        }
        match self.node() {
            Node::Div(p, q) => return p.try_div(&q.mul(den)),
            Node::Neg(x) if matches!(x.node(), Node::Div(..)) => return x.try_div(den).map(|r| r.neg()),
            _ => {}
        }
        Some(Expr::new(Node::Div(self.clone(), den.clone())))
    }

    pub fn pow(&self, e: Exponent) -> Expr {
        if e.is_zero() {
            return Expr::one();
        }
        if e.is_one() {
            return self.clone();
        }
        if let Some(c) = self.as_const() {
            if c.is_one() {
                return Expr::one();
            }
            if e.is_integer() && !(c.is_zero() && e.is_negative()) {
                let n = *e.numer();
                let mut base = c.clone();
                if n < 0 {
                    base = base.recip();
                }
                return Expr::constant(num_traits::pow(base, n.unsigned_abs() as usize));
            }
        }
        if let Node::Pow(b, e0) = self.node() {
            if e0.is_integer() && e.is_integer() {
                return b.pow(e0 * e);
            }
        }
        Expr::new(Node::Pow(self.clone(), e))
    }

    pub fn powi(&self, n: i64) -> Expr {
        self.pow(Exponent::from_integer(n))
    }

    pub fn apply(f: Func, arg: Expr) -> Expr {
        if let Some(c) = arg.as_const() {
            if c.is_zero() {
                match f {
                    Func::Exp | Func::Cos => return Expr::one(),
                    Func::Sin | Func::Arctan | Func::Sqrt => return Expr::zero(),
                    Func::Log => {}
                }
            } else if c.is_one() {
                match f {
                    Func::Log => return Expr::zero(),
                    Func::Sqrt => return Expr::one(),
                    _ => {}
                }
            }
        }
        Expr::new(Node::Apply(f, arg))
    }

    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        let mut seen = std::collections::HashSet::new();
        self.collect_symbols(&mut out, &mut seen);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>, seen: &mut std::collections::HashSet<usize>) {
        if self.is_shared() && !seen.insert(self.addr()) {
            return;
        }
        match self.node() {
            Node::Const(_) => {}
            Node::Sym(s) => {
                out.insert(s.clone());
            }
            Node::Add(v) | Node::Mul(v) => v.iter().for_each(|c| c.collect_symbols(out, seen)),
            Node::Pow(b, _) => b.collect_symbols(out, seen),
            Node::Div(a, b) => {
                a.collect_symbols(out, seen);
                b.collect_symbols(out, seen);
            }
            Node::Neg(x) | Node::Apply(_, x) => x.collect_symbols(out, seen),
        }
    }

    pub fn depends_on(&self, s: &Symbol) -> bool {
        self.free_symbols().contains(s)
    }

    /// Highest derivative order among the `u` symbols (0 if only `u^a`, `None` if no `u`).
    pub fn jet_order(&self) -> Option<usize> {
        self.free_symbols().iter().filter_map(Symbol::order).max()
    }

    /// Number of nodes counting shared subtrees once.
    pub fn dag_size(&self) -> usize {
        fn walk(e: &Expr, seen: &mut std::collections::HashSet<usize>) -> usize {
            if !seen.insert(e.addr()) {
                return 0;
            }
            1 + match e.node() {
                Node::Const(_) | Node::Sym(_) => 0,
                Node::Add(v) | Node::Mul(v) => v.iter().map(|c| walk(c, seen)).sum(),
                Node::Pow(b, _) => walk(b, seen),
                Node::Div(a, b) => walk(a, seen) + walk(b, seen),
                Node::Neg(x) | Node::Apply(_, x) => walk(x, seen),
            }
        }
        walk(self, &mut std::collections::HashSet::new())
    }

    /// Numerical value of a constant expression, if it is one.
    pub fn const_value(&self) -> Option<f64> {
        self.as_const().and_then(|c| c.to_f64())
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Expr {
        Expr::int(n)
    }
}

impl From<Symbol> for Expr {
    fn from(s: Symbol) -> Expr {
        Expr::sym(s)
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $f:ident) => {
        impl std::ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$f(&self, &rhs)
            }
        }
        impl std::ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$f(&self, rhs)
            }
        }
        impl std::ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$f(self, rhs)
            }
        }
        impl std::ops::$tr<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$f(self, &rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);
binop!(Div, div, div);

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_fold_constants() {
        let x = Expr::u(1);
        assert_eq!(Expr::add_all([Expr::int(2), x.clone(), Expr::int(-2)]), x);
        assert_eq!(Expr::mul_all([Expr::int(1), x.clone()]), x);
        assert!(Expr::mul_all([Expr::int(0), x.clone()]).is_const_zero());
        assert!(x.powi(0).is_const_one());
        assert_eq!(Expr::int(2).powi(-2), Expr::ratio(1, 4));
        assert_eq!(x.neg().neg(), x);
    }

    #[test]
    fn mul_pulls_signs_into_coefficient() {
        let x = Expr::u(1);
        let y = Expr::u(2);
        let p = Expr::mul_all([x.neg(), y.clone()]);
        assert_eq!(p, Expr::mul_all([x.clone(), y.clone()]).neg());
        let q = Expr::mul_all([Expr::int(-3), x.clone()]).neg();
        assert_eq!(q, Expr::mul_all([Expr::int(3), x]));
    }

    #[test]
    fn literal_zero_denominator_is_rejected() {
        assert!(Expr::u(1).try_div(&Expr::zero()).is_none());
    }

    #[test]
    fn jet_order_and_symbols() {
        let e = Expr::jet(2, 2) * Expr::t() + Expr::u(1);
        assert_eq!(e.jet_order(), Some(2));
        assert_eq!(e.free_symbols().len(), 3);
        assert_eq!(Expr::t().jet_order(), None);
    }
}
