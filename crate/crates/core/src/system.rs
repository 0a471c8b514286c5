//! Dynamical systems `u̇ = f(t,u)` and ODE systems `E_a = 0`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{Differ, Expr, Symbol, ZeroTest, Q_MAX};
use crate::jet::{total_derivative_with, Derivation};

#[derive(Clone, Debug)]
pub struct DynSystem {
    pub f: Vec<Expr>,
}

impl DynSystem {
    pub fn new(f: Vec<Expr>) -> Result<Self> {
        if let Some((a, _)) = f.iter().enumerate().find(|(_, e)| e.jet_order().unwrap_or(0) > 0) {
            return Err(Error::DimensionMismatch(format!("right-hand side {} involves derivatives", a + 1)));
        }
        Ok(DynSystem { f })
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    /// No explicit `t`, decided by sampling `∂f/∂t`.
    pub fn is_autonomous(&self, zt: &ZeroTest) -> bool {
        let dts: Vec<Expr> = self.f.iter().map(|e| e.diff(&Symbol::Time)).collect();
        zt.all_zero_joint(&dts).is_zero()
    }

    /// The dynamical vector field `F = f·∇_u`.
    pub fn field(&self) -> Derivation {
        Derivation::new(self.f.iter().enumerate().map(|(a, e)| (Symbol::Dep(a + 1), e.clone())).collect())
    }

    /// `D_t e` along solutions, for `e` of order 0: `∂_t e + F(e)`.
    pub fn flow_derivative(&self, e: &Expr) -> Expr {
        self.flow_derivative_with(e, &mut Differ::new())
    }

    pub fn flow_derivative_with(&self, e: &Expr, d: &mut Differ) -> Expr {
        let dt = if e.depends_on(&Symbol::Time) { d.diff(e, &Symbol::Time) } else { Expr::zero() };
        dt.add(&self.field().apply_with(e, d))
    }

    /// `u^a_k ↦ (D_t)^{k-1} f^a` for `k = 1..=order`.
    pub fn restriction(&self, order: usize) -> BTreeMap<Symbol, Expr> {
        let mut d = Differ::new();
        let mut out = BTreeMap::new();
        let mut cur = self.f.clone();
        for k in 1..=order {
            for (a, e) in cur.iter().enumerate() {
                out.insert(Symbol::Jet(a + 1, k), e.clone());
            }
            if k < order {
                cur = cur.iter().map(|e| self.flow_derivative_with(e, &mut d)).collect();
            }
        }
        out
    }

    /// Substitutes every jet symbol of `e` by its value on solutions.
    pub fn restrict(&self, e: &Expr) -> Expr {
        match e.jet_order() {
            Some(k) if k > 0 => e.substitute(&self.restriction(k)),
            _ => e.clone(),
        }
    }

    /// `ρ f`.
    pub fn scaled(&self, rho: &Expr) -> DynSystem {
        DynSystem { f: self.f.iter().map(|e| rho.mul(e)).collect() }
    }

    /// The system as first-order equations `u̇^a − f^a = 0`.
    pub fn as_ode(&self) -> OdeSystem {
        let eqs = self.f.iter().enumerate().map(|(a, e)| Expr::jet(a + 1, 1).sub(e)).collect();
        let solved = self.f.iter().enumerate().map(|(a, e)| (Symbol::Jet(a + 1, 1), e.clone())).collect();
        OdeSystem { eqs, solved: Some(solved) }
    }
}

/// `E_a = 0`, optionally solved for one top derivative per variable.
#[derive(Clone, Debug)]
pub struct OdeSystem {
    pub eqs: Vec<Expr>,
    /// Principal derivative `u^a_{k_a}` ↦ right-hand side.
    pub solved: Option<BTreeMap<Symbol, Expr>>,
}

impl OdeSystem {
    /// From solved equations `u^a_{k_a} = rhs_a`.
    pub fn from_solved(solved: BTreeMap<Symbol, Expr>) -> Result<Self> {
        for s in solved.keys() {
            if s.order().unwrap_or(0) == 0 {
                return Err(Error::NoSolvedForm(format!("`{s}` is not a derivative")));
            }
        }
        let eqs = solved.iter().map(|(s, e)| Expr::sym(s.clone()).sub(e)).collect();
        Ok(OdeSystem { eqs, solved: Some(solved) })
    }

    pub fn n(&self) -> usize {
        self.eqs.len()
    }

    /// Highest derivative order present.
    pub fn order(&self) -> usize {
        self.eqs.iter().filter_map(Expr::jet_order).max().unwrap_or(0)
    }

    /// Substitutes the solved form into each equation; all should vanish.
    pub fn solved_residuals(&self) -> Result<Vec<Expr>> {
        let r = self.restriction(self.order())?;
        Ok(self.eqs.iter().map(|e| e.substitute(&r)).collect())
    }

    /// Principal jets `u^a_j` (`j ≥ k_a`, `j ≤ order`) expressed through parametric jets.
    pub fn restriction(&self, order: usize) -> Result<BTreeMap<Symbol, Expr>> {
        let solved = self.solved.as_ref().ok_or_else(|| Error::NoSolvedForm("system has no solved form".into()))?;
        let base: BTreeMap<usize, usize> = solved.keys().map(|s| (s.var_index().unwrap(), s.order().unwrap())).collect();
        let is_principal = |s: &Symbol| match (s.var_index(), s.order()) {
            (Some(a), Some(j)) => base.get(&a).is_some_and(|&k| j >= k),
            _ => false,
        };
        let mut d = Differ::new();
        let mut out: BTreeMap<Symbol, Expr> = BTreeMap::new();
        // Order by derivative height above the principal one; right-hand sides
        // may themselves contain principal jets of other variables.
        let max_lift = order.saturating_sub(base.values().copied().min().unwrap_or(order));
        for lift in 0..=max_lift {
            for (&a, &k) in &base {
                let j = k + lift;
                if j > order.max(k) || j > Q_MAX {
                    continue;
                }
                let raw = if lift == 0 {
                    solved[&Symbol::jet(a, k)].clone()
                } else {
                    total_derivative_with(&out[&Symbol::jet(a, j - 1)], Q_MAX, &mut d)?
                };
                out.insert(Symbol::jet(a, j), raw);
            }
            // Eliminate principal jets from the freshly added entries.
            for _ in 0..=base.len() + 1 {
                let mut changed = false;
                let snapshot = out.clone();
                for v in out.values_mut() {
                    if v.free_symbols().iter().any(is_principal) {
                        let nv = v.substitute(&snapshot);
                        if !nv.ptr_eq(v) {
                            *v = nv;
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
        }
        for (s, v) in &out {
            if let Some(bad) = v.free_symbols().into_iter().find(|x| is_principal(x)) {
                return Err(Error::NoSolvedForm(format!("`{s}` depends on principal derivative `{bad}` beyond order {order}")));
            }
        }
        Ok(out)
    }

    /// Restriction of `e` to the solution manifold.
    pub fn restrict(&self, e: &Expr) -> Result<Expr> {
        let k = e.jet_order().unwrap_or(0);
        Ok(e.substitute(&self.restriction(k)?))
    }

    /// A first-order system in solved form, seen as a DS.
    pub fn as_dyn_system(&self) -> Option<DynSystem> {
        let solved = self.solved.as_ref()?;
        let n = self.n();
        let mut f = vec![Expr::zero(); n];
        for (s, e) in solved {
            match s {
                Symbol::Jet(a, 1) if *a <= n && e.jet_order().unwrap_or(0) == 0 => f[a - 1] = e.clone(),
                _ => return None,
            }
        }
        Some(DynSystem { f })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, ParseContext};

    fn p(s: &str) -> Expr {
        parse(s, &ParseContext::new(3, 4).with_params(["h"])).unwrap()
    }

    #[test]
    fn example5_restriction() {
        let ds = DynSystem::new(vec![p("u1 + u1^2*u2"), p("u2 + u1*u2^2")]).unwrap();
        let dw = ds.restrict(&crate::jet::total_derivative(&p("u1*u2")).unwrap());
        let w = p("u1*u2");
        let expected = Expr::int(2).mul(&w).add(&Expr::int(2).mul(&w.powi(2)));
        assert!(ZeroTest::default().is_zero(&dw.sub(&expected)).is_zero());
        assert!(ds.is_autonomous(&ZeroTest::default()));
    }

    #[test]
    fn example7_restriction() {
        let ds = DynSystem::new(vec![p("1 + u3"), p("u3 + u2/u1"), p("u2 + u3/u1")]).unwrap();
        let dw = ds.flow_derivative(&p("u2/u3"));
        assert!(ZeroTest::new(100, 2).is_zero(&dw.sub(&p("1 - (u2/u3)^2"))).is_zero());
    }

    #[test]
    fn coupled_solved_form() {
        // u1''' refers to u2'', which is itself principal.
        let mut solved = BTreeMap::new();
        solved.insert(Symbol::Jet(1, 3), p("t*u{2,2} + u2"));
        solved.insert(Symbol::Jet(2, 2), p("u1' - u2'"));
        let ode = OdeSystem::from_solved(solved).unwrap();
        let r = ode.restriction(3).unwrap();
        assert!(ZeroTest::default().is_zero(&r[&Symbol::Jet(1, 3)].sub(&p("t*(u1' - u2') + u2"))).is_zero());
        assert!(r[&Symbol::Jet(2, 3)].free_symbols().iter().all(|s| s != &Symbol::Jet(2, 2) && s != &Symbol::Jet(1, 3)));
        for e in ode.solved_residuals().unwrap() {
            assert!(ZeroTest::default().is_zero(&e).is_zero());
        }
    }

    #[test]
    fn non_autonomous_detection() {
        let ds = DynSystem::new(vec![p("t*u1")]).unwrap();
        assert!(!ds.is_autonomous(&ZeroTest::default()));
        assert!(DynSystem::new(vec![p("u1'")]).is_err());
    }
}
