use std::collections::HashMap;

use super::{Exponent, Expr, Func, Node, Symbol};

/// Partial differentiation with a memo over shared subtrees.
///
/// A `Differ` may be kept alive across many calls; results for the same
/// (node, symbol) pair are reused, which keeps repeated total derivatives of
/// prolongation coefficients from re-expanding the same subtrees.
#[derive(Default)]
pub struct Differ {
    memo: HashMap<(usize, Symbol), (Expr, Expr)>,
}

impl Differ {
    pub fn new() -> Self {
        Differ::default()
    }

    pub fn diff(&mut self, e: &Expr, s: &Symbol) -> Expr {
        let shared = e.is_shared();
        if shared {
            if let Some((_, d)) = self.memo.get(&(e.addr(), s.clone())) {
                return d.clone();
            }
        }
        let d = self.compute(e, s);
        if shared {
            self.memo.insert((e.addr(), s.clone()), (e.clone(), d.clone()));
        }
        d
    }

    fn compute(&mut self, e: &Expr, s: &Symbol) -> Expr {
        match e.node() {
            Node::Const(_) => Expr::zero(),
            Node::Sym(x) => {
                if x == s {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Add(v) => Expr::add_all(v.iter().map(|c| self.diff(c, s))),
            Node::Mul(v) => {
                let mut terms = Vec::new();
                for i in 0..v.len() {
                    let di = self.diff(&v[i], s);
                    if di.is_const_zero() {
                        continue;
                    }
                    let mut fs = v.clone();
                    fs[i] = di;
                    terms.push(Expr::mul_all(fs));
                }
                Expr::add_all(terms)
            }
            Node::Pow(b, ex) => {
                let db = self.diff(b, s);
                if db.is_const_zero() {
                    return Expr::zero();
                }
                let c = Expr::constant(num_rational::BigRational::new(
                    (*ex.numer()).into(),
                    (*ex.denom()).into(),
                ));
                Expr::mul_all([c, b.pow(ex - Exponent::from_integer(1)), db])
            }
            Node::Div(n, d) => {
                let dn = self.diff(n, s);
                let dd = self.diff(d, s);
                match (dn.is_const_zero(), dd.is_const_zero()) {
                    (true, true) => Expr::zero(),
                    (false, true) => dn.div(d),
                    (true, false) => Expr::mul_all([n.clone(), dd]).neg().div(&d.powi(2)),
                    (false, false) => {
                        let num = Expr::mul_all([dn, d.clone()]).sub(&Expr::mul_all([n.clone(), dd]));
                        num.div(&d.powi(2))
                    }
                }
            }
            Node::Neg(x) => self.diff(x, s).neg(),
            Node::Apply(f, x) => {
                let dx = self.diff(x, s);
                if dx.is_const_zero() {
                    return Expr::zero();
                }
                match f {
                    Func::Exp => Expr::mul_all([e.clone(), dx]),
                    Func::Log => dx.div(x),
                    Func::Sin => Expr::mul_all([Expr::apply(Func::Cos, x.clone()), dx]),
                    Func::Cos => Expr::mul_all([Expr::apply(Func::Sin, x.clone()), dx]).neg(),
                    Func::Arctan => dx.div(&Expr::one().add(&x.powi(2))),
                    Func::Sqrt => dx.div(&Expr::int(2).mul(e)),
                }
            }
        }
    }
}

impl Expr {
    /// Exact partial derivative; all jet symbols are independent coordinates.
    pub fn diff(&self, s: &Symbol) -> Expr {
        Differ::new().diff(self, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, ParseContext, Point, ZeroTest};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx() -> ParseContext {
        ParseContext::new(3, 3)
    }

    #[test]
    fn power_rule() {
        let e = parse("u1^2*u2", &ctx()).unwrap();
        let d = e.diff(&Symbol::Dep(1));
        let expected = parse("2*u1*u2", &ctx()).unwrap();
        assert!(ZeroTest::default().is_zero(&d.sub(&expected)).is_zero());
        assert!(e.diff(&Symbol::Time).is_const_zero());
    }

    #[test]
    fn matches_central_differences() {
        let exprs = [
            "u1^2*u2 + sin(u3)*u1",
            "exp(u1*u2)/(1 + u3^2)",
            "log(u1 + u2)*arctan(u3) - sqrt(u1)*u2^(3/2)",
            "cos(u1/u2)^3 + u1^(-2)*u3",
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for src in exprs {
            let e = parse(src, &ctx()).unwrap();
            for trial in 0..20 {
                let s = Symbol::Dep(1 + trial % 3);
                let d = e.diff(&s);
                let p: Point = (1..=3).map(|a| (Symbol::Dep(a), rng.gen_range(0.5..1.5))).collect();
                let h = 1e-6;
                let x = p.get(&s).unwrap();
                let fp = e.eval(&p.clone().with(s.clone(), x + h)).unwrap();
                let fm = e.eval(&p.clone().with(s.clone(), x - h)).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                let exact = d.eval(&p).unwrap();
                assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1.0), "{src} d/{s}: {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn shared_subtrees_differentiate_once() {
        let base = parse("u1*u2 + sin(u1)", &ctx()).unwrap();
        let mut e = base.clone();
        for _ in 0..12 {
            e = e.div(&Expr::one().add(&e));
        }
        let mut differ = Differ::new();
        let d = differ.diff(&e, &Symbol::Dep(1));
        assert!(d.dag_size() < 400);
    }
}
