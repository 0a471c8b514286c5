use std::collections::{BTreeMap, HashMap};

use super::{Expr, Node, Symbol};

/// Simultaneous substitution of symbols, memoized over shared subtrees.
pub struct Substituter<'a> {
    bindings: &'a BTreeMap<Symbol, Expr>,
    memo: HashMap<usize, (Expr, Expr)>,
}

impl<'a> Substituter<'a> {
    pub fn new(bindings: &'a BTreeMap<Symbol, Expr>) -> Self {
        Substituter { bindings, memo: HashMap::new() }
    }

    pub fn apply(&mut self, e: &Expr) -> Expr {
        let shared = e.is_shared();
        if shared {
            if let Some((_, r)) = self.memo.get(&e.addr()) {
                return r.clone();
            }
        }
        let r = self.compute(e);
        if shared {
            self.memo.insert(e.addr(), (e.clone(), r.clone()));
        }
        r
    }

    fn children(&mut self, v: &[Expr]) -> Option<Vec<Expr>> {
        let new: Vec<Expr> = v.iter().map(|c| self.apply(c)).collect();
        if new.iter().zip(v).all(|(a, b)| a.ptr_eq(b)) {
            None
        } else {
            Some(new)
        }
    }

    fn compute(&mut self, e: &Expr) -> Expr {
        match e.node() {
            Node::Const(_) => e.clone(),
            Node::Sym(s) => self.bindings.get(s).cloned().unwrap_or_else(|| e.clone()),
            Node::Add(v) => self.children(v).map_or_else(|| e.clone(), Expr::add_all),
            Node::Mul(v) => self.children(v).map_or_else(|| e.clone(), Expr::mul_all),
            Node::Pow(b, ex) => {
                let nb = self.apply(b);
                if nb.ptr_eq(b) {
                    e.clone()
                } else {
                    nb.pow(*ex)
                }
            }
            Node::Div(a, b) => {
                let (na, nb) = (self.apply(a), self.apply(b));
                if na.ptr_eq(a) && nb.ptr_eq(b) {
                    e.clone()
                } else {
                    // A substitution can turn the denominator into a literal 0;
                    // keep the quotient so evaluation reports the pole.
                    na.try_div(&nb).unwrap_or_else(|| Expr::new(Node::Div(na, nb)))
                }
            }
            Node::Neg(x) => {
                let nx = self.apply(x);
                if nx.ptr_eq(x) {
                    e.clone()
                } else {
                    nx.neg()
                }
            }
            Node::Apply(f, x) => {
                let nx = self.apply(x);
                if nx.ptr_eq(x) {
                    e.clone()
                } else {
                    Expr::apply(*f, nx)
                }
            }
        }
    }
}

impl Expr {
    /// Simultaneous (non-iterated) substitution.
    pub fn substitute(&self, bindings: &BTreeMap<Symbol, Expr>) -> Expr {
        if bindings.is_empty() {
            return self.clone();
        }
        Substituter::new(bindings).apply(self)
    }

    pub fn substitute_one(&self, s: &Symbol, value: &Expr) -> Expr {
        let mut b = BTreeMap::new();
        b.insert(s.clone(), value.clone());
        self.substitute(&b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, ParseContext, Point};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx() -> ParseContext {
        ParseContext::new(2, 2)
    }

    #[test]
    fn solution_manifold_restriction() {
        let e = parse("u1'", &ctx()).unwrap();
        let f = parse("u1 + u1^2*u2", &ctx()).unwrap();
        let r = e.substitute_one(&Symbol::Jet(1, 1), &f);
        assert_eq!(r, f);
        assert_eq!(f.substitute(&BTreeMap::new()), f);
    }

    #[test]
    fn substitution_is_simultaneous() {
        let e = parse("u1 - u2", &ctx()).unwrap();
        let mut b = BTreeMap::new();
        b.insert(Symbol::Dep(1), Expr::u(2));
        b.insert(Symbol::Dep(2), Expr::u(1));
        assert_eq!(e.substitute(&b), parse("u2 - u1", &ctx()).unwrap());
    }

    #[test]
    fn substitution_composes_with_evaluation() {
        let e = parse("sin(u1*u2) + u1'/(1 + u2^2)", &ctx()).unwrap();
        let mut b = BTreeMap::new();
        b.insert(Symbol::Dep(1), parse("t*u2 + 1", &ctx()).unwrap());
        b.insert(Symbol::Jet(1, 1), parse("exp(u2) - t", &ctx()).unwrap());
        let s = e.substitute(&b);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p: Point = [Symbol::Time, Symbol::Dep(1), Symbol::Dep(2), Symbol::Jet(1, 1)]
                .into_iter()
                .map(|s| (s, rng.gen_range(0.5..1.5)))
                .collect();
            let mut q = p.clone();
            for (k, v) in &b {
                q.set(k.clone(), v.eval(&p).unwrap());
            }
            assert!((s.eval(&p).unwrap() - e.eval(&q).unwrap()).abs() < 1e-10);
        }
    }
}
