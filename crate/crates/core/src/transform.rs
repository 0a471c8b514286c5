//! Dynamical systems to scalar higher-order ODEs and back.
//!
//! The scalar ODE is written in `y = u1` with `y^(k)` the jet `u{1,k}`.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

use crate::ansatz::jacobian_rank;
use crate::error::{Error, Result};
use crate::expr::{render_with, Differ, Evaluator, Exponent, Expr, Node, Point, Symbol, ZeroTest};
use crate::reduction::ReductionResult;
use crate::system::{DynSystem, OdeSystem};

/// Prints `y`, `y'`, `y''`, ... for the scalar ODE variable.
pub fn y_name(s: &Symbol) -> Option<String> {
    match s {
        Symbol::Dep(1) => Some("y".into()),
        Symbol::Jet(1, k) => Some(format!("y{}", "'".repeat(*k))),
        _ => None,
    }
}

pub fn render_y(e: &Expr) -> String {
    render_with(e, &y_name)
}

/// Adds `u1 = t` with `u̇1 = 1` in front of the other variables (shifted by
/// one). Autonomous input is returned unchanged.
pub fn autonomize(ds: &DynSystem, zt: &ZeroTest) -> DynSystem {
    if ds.is_autonomous(zt) {
        return ds.clone();
    }
    let mut shift: BTreeMap<Symbol, Expr> = (1..=ds.n()).map(|a| (Symbol::Dep(a), Expr::u(a + 1))).collect();
    shift.insert(Symbol::Time, Expr::u(1));
    let mut f = vec![Expr::one()];
    f.extend(ds.f.iter().map(|e| e.substitute(&shift)));
    DynSystem { f }
}

/// Removes variable `index` (which must satisfy `u̇ = 1`), substituting `t`
/// for it and renumbering the rest. Returns the new system and the map from
/// old coordinates to new ones.
pub fn deautonomize(ds: &DynSystem, index: usize, zt: &ZeroTest) -> Result<(DynSystem, BTreeMap<Symbol, Expr>)> {
    if index == 0 || index > ds.n() {
        return Err(Error::DimensionMismatch(format!("no variable u{index} in a {}-dimensional system", ds.n())));
    }
    if !zt.is_zero(&ds.f[index - 1].sub(&Expr::one())).is_zero() {
        return Err(Error::Precondition(format!("u{index}' = {} is not 1", ds.f[index - 1])));
    }
    if ds.f.iter().any(|e| e.depends_on(&Symbol::Time)) {
        return Err(Error::Precondition("system already depends on t explicitly".into()));
    }
    let mut map = BTreeMap::new();
    for a in 1..=ds.n() {
        let v = match a.cmp(&index) {
            std::cmp::Ordering::Less => Expr::u(a),
            std::cmp::Ordering::Equal => Expr::t(),
            std::cmp::Ordering::Greater => Expr::u(a - 1),
        };
        map.insert(Symbol::Dep(a), v);
    }
    let f = ds.f.iter().enumerate().filter(|(a, _)| a + 1 != index).map(|(_, e)| e.substitute(&map)).collect();
    Ok((DynSystem { f }, map))
}

fn placeholder(k: usize) -> Symbol {
    Symbol::Param(format!("#y{k}").into())
}

fn y_jet(k: usize) -> Expr {
    Expr::jet(1, k)
}

/// Result of turning a DS into a scalar ODE for one pivot variable.
#[derive(Clone, Debug)]
pub struct OdeConversion {
    /// The system actually converted (after deautonomization, if any).
    pub source: DynSystem,
    pub pivot: usize,
    /// `chain[k] = (D_t)^k u_pivot` as functions of `(t, u)`, `k < n`.
    pub chain: Vec<Expr>,
    /// `(D_t)^n u_pivot`.
    pub top: Expr,
    /// `u_a` in terms of `t, y, y', ...` when symbolic inversion succeeded.
    pub inverse: Option<BTreeMap<Symbol, Expr>>,
    /// `y^(n) = p(t, y, ..., y^(n-1))` when symbolic inversion succeeded.
    pub ode: Option<OdeSystem>,
    /// Original coordinates in terms of those of `source`.
    pub relabel: BTreeMap<Symbol, Expr>,
    jac: Vec<Vec<Expr>>,
}

/// Newton iterate carried between evaluations.
#[derive(Clone, Debug, Default)]
pub struct NewtonState {
    pub u: Vec<f64>,
}

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;

impl OdeConversion {
    pub fn order(&self) -> usize {
        self.chain.len()
    }

    /// The solved right-hand side `p`, if symbolic.
    pub fn rhs(&self) -> Option<&Expr> {
        self.ode.as_ref().and_then(|o| o.solved.as_ref()).and_then(|s| s.values().next())
    }

    /// Chain values `(y, y', ..., y^(n-1))` at a state of the source system.
    pub fn jets_at(&self, t: f64, u: &[f64], params: &Point) -> Result<Vec<f64>> {
        let p = state_point(t, u, params);
        let mut ev = Evaluator::new(&p);
        self.chain.iter().map(|e| ev.eval(e)).collect()
    }

    /// Solves `chain(u) = ys` by Newton's method, starting from `state.u`
    /// (or all ones when empty); the converged point is left in `state`.
    pub fn invert_numeric(&self, t: f64, ys: &[f64], params: &Point, state: &mut NewtonState) -> Result<Vec<f64>> {
        let n = self.order();
        if state.u.len() != n {
            state.u = vec![1.0; n];
        }
        let mut u = state.u.clone();
        for _ in 0..NEWTON_MAX_ITER {
            let p = state_point(t, &u, params);
            let mut ev = Evaluator::new(&p);
            let mut r = DVector::zeros(n);
            let mut j = DMatrix::zeros(n, n);
            for k in 0..n {
                r[k] = ev.eval(&self.chain[k])? - ys[k];
                for a in 0..n {
                    j[(k, a)] = ev.eval(&self.jac[k][a])?;
                }
            }
            let Some(delta) = j.lu().solve(&r) else {
                return Err(Error::NewtonDivergence(format!("singular chain Jacobian at t = {t}")));
            };
            let scale = 1.0 + u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for a in 0..n {
                u[a] -= delta[a];
            }
            if u.iter().any(|v| !v.is_finite()) {
                break;
            }
            if delta.amax() <= NEWTON_TOL * scale {
                state.u = u.clone();
                return Ok(u);
            }
        }
        Err(Error::NewtonDivergence(format!("no convergence in {NEWTON_MAX_ITER} iterations at t = {t}")))
    }

    /// `y^(n)` at the given jets: symbolic right-hand side when available,
    /// Newton inversion of the chain otherwise.
    pub fn eval_top(&self, t: f64, ys: &[f64], params: &Point, state: &mut NewtonState) -> Result<f64> {
        if let Some(p) = self.rhs() {
            let mut pt = params.clone();
            pt.set(Symbol::Time, t);
            for (k, v) in ys.iter().enumerate() {
                pt.set(Symbol::jet(1, k), *v);
            }
            return p.eval(&pt);
        }
        let u = self.invert_numeric(t, ys, params, state)?;
        self.top.eval(&state_point(t, &u, params))
    }
}

fn state_point(t: f64, u: &[f64], params: &Point) -> Point {
    let mut p = params.clone();
    p.set(Symbol::Time, t);
    for (a, v) in u.iter().enumerate() {
        p.set(Symbol::Dep(a + 1), *v);
    }
    p
}

/// Builds the chain `y_{k+1} = D_t y_k` for `y_1 = u_pivot` and inverts it.
/// Explicit `t` is allowed; `D_t` then includes `∂_t`.
pub fn ds_to_ode(ds: &DynSystem, pivot: usize, zt: &ZeroTest) -> Result<OdeConversion> {
    let relabel = (1..=ds.n()).map(|a| (Symbol::Dep(a), Expr::u(a))).collect();
    convert(ds.clone(), pivot, relabel, zt)
}

/// Drops the clock variable `time_index` (`u̇ = 1`) in favour of `t`, then
/// converts. `pivot` refers to the original numbering.
pub fn ds_to_ode_deautonomized(ds: &DynSystem, time_index: usize, pivot: usize, zt: &ZeroTest) -> Result<OdeConversion> {
    if pivot == time_index {
        return Err(Error::Precondition("the pivot cannot be the clock variable".into()));
    }
    let (reduced, relabel) = deautonomize(ds, time_index, zt)?;
    let new_pivot = if pivot > time_index { pivot - 1 } else { pivot };
    convert(reduced, new_pivot, relabel, zt)
}

fn convert(ds: DynSystem, pivot: usize, relabel: BTreeMap<Symbol, Expr>, zt: &ZeroTest) -> Result<OdeConversion> {
    let n = ds.n();
    if pivot == 0 || pivot > n {
        return Err(Error::DimensionMismatch(format!("pivot u{pivot} in a {n}-dimensional system")));
    }
    let mut d = Differ::new();
    let mut chain = vec![Expr::u(pivot)];
    for k in 1..n {
        let next = ds.flow_derivative_with(&chain[k - 1], &mut d);
        chain.push(next);
    }
    let top = ds.flow_derivative_with(&chain[n - 1], &mut d);
    let us: Vec<Symbol> = (1..=n).map(Symbol::Dep).collect();
    if jacobian_rank(&chain, &us, zt) < n {
        return Err(Error::RankDeficientChain { pivot });
    }
    let jac = chain.iter().map(|c| us.iter().map(|s| d.diff(c, s)).collect()).collect();
    let inverse = invert_chain(&chain, zt);
    let ode = inverse.as_ref().map(|inv| {
        let mut solved = BTreeMap::new();
        solved.insert(Symbol::Jet(1, n), top.substitute(inv));
        OdeSystem::from_solved(solved).expect("order n >= 1")
    });
    Ok(OdeConversion { source: ds, pivot, chain, top, inverse, ode, relabel, jac })
}

/// Triangular elimination on `chain[k](u) = y^(k)`: repeatedly pick the
/// equation with the fewest unknowns in which some unknown appears linearly
/// or as an isolated power, and solve for it.
fn invert_chain(chain: &[Expr], zt: &ZeroTest) -> Option<BTreeMap<Symbol, Expr>> {
    let n = chain.len();
    let eqs: Vec<Expr> = chain.iter().enumerate().map(|(k, c)| c.sub(&Expr::sym(placeholder(k)))).collect();
    let mut unknowns: BTreeSet<Symbol> = (1..=n).map(Symbol::Dep).collect();
    let mut used = vec![false; n];
    let mut sol: BTreeMap<Symbol, Expr> = BTreeMap::new();
    while !unknowns.is_empty() {
        let mut best: Option<(usize, usize, Symbol, Expr)> = None;
        for k in (0..n).filter(|&k| !used[k]) {
            let e = eqs[k].substitute(&sol);
            let present: Vec<Symbol> = e.free_symbols().into_iter().filter(|s| unknowns.contains(s)).collect();
            if best.as_ref().is_some_and(|b| b.0 <= present.len()) {
                continue;
            }
            if let Some((x, v)) = present.iter().find_map(|x| isolate(&e, x, zt).map(|v| (x.clone(), v))) {
                best = Some((present.len(), k, x, v));
            }
        }
        let (_, k, x, v) = best?;
        used[k] = true;
        unknowns.remove(&x);
        for w in sol.values_mut() {
            *w = w.substitute_one(&x, &v);
        }
        sol.insert(x, v);
    }
    let back: BTreeMap<Symbol, Expr> = (0..n).map(|k| (placeholder(k), y_jet(k))).collect();
    let inverse: BTreeMap<Symbol, Expr> = sol.into_iter().map(|(s, e)| (s, e.substitute(&back))).collect();
    let checks: Vec<Expr> = chain.iter().enumerate().map(|(k, c)| c.substitute(&inverse).sub(&y_jet(k))).collect();
    zt.all_zero_joint(&checks).is_zero().then_some(inverse)
}

/// Solves `e = 0` for `x` when `e` is linear in `x`, or when the terms of `e`
/// that involve `x` add up to `c·x^k` with `c` free of `x`, `0 < |k| ≤ 3`.
fn isolate(e: &Expr, x: &Symbol, zt: &ZeroTest) -> Option<Expr> {
    let c1 = e.diff(x);
    if zt.is_zero(&c1).is_zero() {
        return None;
    }
    if zt.is_zero(&c1.diff(x)).is_zero() {
        let rest = e.substitute_one(x, &Expr::zero());
        return Some(if c1.is_const_one() {
            rest.neg_terms()
        } else if c1 == Expr::int(-1) {
            rest
        } else {
            rest.neg_terms().div(&c1)
        });
    }
    let terms: Vec<Expr> = match e.node() {
        Node::Add(v) => v.clone(),
        _ => vec![e.clone()],
    };
    let (with, without): (Vec<Expr>, Vec<Expr>) = terms.into_iter().partition(|t| t.depends_on(x));
    let xpart = Expr::add_all(with);
    let minus_rest = Expr::add_all(without).neg_terms();
    let xe = Expr::sym(x.clone());
    for k in [2i64, 3, -1, -2, -3] {
        let c = xpart.div(&xe.powi(k));
        if !zt.is_zero(&c.diff(x)).is_zero() {
            continue;
        }
        let c = xpart.substitute_one(x, &Expr::one());
        let base = if k > 0 {
            if c.is_const_one() {
                minus_rest.clone()
            } else {
                minus_rest.div(&c)
            }
        } else {
            c.div(&minus_rest)
        };
        return Some(base.pow(Exponent::new(1, k.abs())));
    }
    None
}

/// Companion system `u_k = y^(k-1)` of a scalar ODE solved for its top
/// derivative. Explicit `t` is kept; see [`autonomize`].
pub fn ode_to_ds(ode: &OdeSystem) -> Result<DynSystem> {
    let solved = ode.solved.as_ref().ok_or_else(|| Error::NoSolvedForm("the equation is not solved for its top derivative".into()))?;
    if solved.len() != 1 {
        return Err(Error::DimensionMismatch(format!("expected a scalar ODE, got {} equations", solved.len())));
    }
    let (lhs, p) = solved.iter().next().unwrap();
    let (Some(1), Some(q)) = (lhs.var_index(), lhs.order()) else {
        return Err(Error::NoSolvedForm(format!("`{lhs}` is not a derivative of u1")));
    };
    if let Some(bad) = p.free_symbols().into_iter().find(|s| matches!(s, Symbol::Dep(a) | Symbol::Jet(a, _) if *a != 1) || s.order().is_some_and(|k| k >= q)) {
        return Err(Error::NoSolvedForm(format!("right-hand side involves `{bad}`")));
    }
    let map: BTreeMap<Symbol, Expr> = (1..q).map(|k| (Symbol::Jet(1, k), Expr::u(k + 1))).collect();
    let mut f: Vec<Expr> = (2..=q).map(Expr::u).collect();
    f.push(p.substitute(&map));
    DynSystem::new(f)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransferKind {
    Invariant,
    /// `D_t w̃_j − W_j(w̃)`, vanishing on solutions of the ODE.
    ReducedEquation,
    Constant,
}

#[derive(Clone, Debug)]
pub struct Transferred {
    pub label: String,
    pub kind: TransferKind,
    /// In `t`, `y` and its derivatives.
    pub expr: Expr,
}

impl Transferred {
    pub fn render(&self) -> String {
        match self.kind {
            TransferKind::ReducedEquation => format!("{} = 0", render_y(&self.expr)),
            _ => format!("{} = {}", self.label, render_y(&self.expr)),
        }
    }
}

impl OdeConversion {
    /// Rewrites a function of the original coordinates in `t, y, y', ...`,
    /// confirming that composing with the chain gives it back.
    pub fn transfer(&self, e: &Expr, zt: &ZeroTest) -> Result<Expr> {
        let inv = self.inverse.as_ref().ok_or_else(|| Error::Precondition("no symbolic inverse for this conversion".into()))?;
        let local = e.substitute(&self.relabel);
        let out = local.substitute(inv);
        let back: BTreeMap<Symbol, Expr> = self.chain.iter().enumerate().map(|(k, c)| (Symbol::jet(1, k), c.clone())).collect();
        if !zt.is_zero(&out.substitute(&back).sub(&local)).is_zero() {
            return Err(Error::NotExpressible { target: e.to_string(), detail: "the transferred form does not compose back".into() });
        }
        Ok(out)
    }
}

/// Carries invariants, reduced equations and constants of motion over to the
/// ODE variables.
pub fn transfer_reduction(conv: &OdeConversion, red: &ReductionResult, zt: &ZeroTest) -> Result<Vec<Transferred>> {
    let namer = red.namer();
    let mut out = Vec::new();
    let mut tw = Vec::new();
    for (j, w) in red.invariants.w.iter().enumerate() {
        let e = conv.transfer(w, zt)?;
        tw.push(e.clone());
        out.push(Transferred { label: namer.base(j + 1), kind: TransferKind::Invariant, expr: e });
    }
    if let (Some(ode), Some(ds)) = (conv.ode.as_ref(), red.reduced_ds()) {
        let wmap: BTreeMap<Symbol, Expr> = tw.iter().enumerate().map(|(j, e)| (Symbol::Dep(j + 1), e.clone())).collect();
        for (j, (wt, rhs)) in tw.iter().zip(&ds.f).enumerate() {
            let lhs = crate::jet::total_derivative(wt)?;
            let rel = lhs.sub(&rhs.substitute(&wmap));
            if !zt.is_zero(&ode.restrict(&rel)?).is_zero() {
                return Err(Error::NotExpressible { target: format!("{}'", namer.base(j + 1)), detail: "reduced equation does not hold on the ODE".into() });
            }
            out.push(Transferred { label: format!("{}'", namer.base(j + 1)), kind: TransferKind::ReducedEquation, expr: rel });
        }
    }
    for (i, c) in red.constants.iter().enumerate() {
        out.push(Transferred { label: format!("c{}", i + 1), kind: TransferKind::Constant, expr: conv.transfer(c, zt)? });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, ParseContext};

    fn p(s: &str) -> Expr {
        parse(s, &ParseContext::new(4, 3)).unwrap()
    }

    fn ds(c: &[&str]) -> DynSystem {
        DynSystem::new(c.iter().map(|s| p(s)).collect()).unwrap()
    }

    fn same(a: &Expr, b: &str) -> bool {
        ZeroTest::default().is_zero(&a.sub(&p(b))).is_zero()
    }

    #[test]
    fn autonomize_rules() {
        let zt = ZeroTest::default();
        let d = ds(&["u1 + u1^2*u2", "u2 + u1*u2^2"]);
        assert_eq!(autonomize(&d, &zt).f, d.f);
        let a = autonomize(&ds(&["t*u1"]), &zt);
        assert_eq!(a.f.len(), 2);
        assert!(same(&a.f[0], "1") && same(&a.f[1], "u1*u2"));
        let (back, _) = deautonomize(&a, 1, &zt).unwrap();
        assert!(same(&back.f[0], "t*u1"));
        assert!(deautonomize(&d, 1, &zt).is_err());
    }

    #[test]
    fn example5_and_6_odes() {
        let zt = ZeroTest::default();
        let c = ds_to_ode(&ds(&["u1 + u1^2*u2", "u2 + u1*u2^2"]), 1, &zt).unwrap();
        assert!(same(c.rhs().unwrap(), "-2*u1' + 3*u1'^2/u1"), "{}", c.rhs().unwrap());
        let c = ds_to_ode(&ds(&["u2 + u1^2", "2*u2^2/u1 + u1*u2"]), 1, &zt).unwrap();
        assert!(same(c.rhs().unwrap(), "2*u1'^2/u1 - u1*u1' + u1^3"));
        assert!(same(&c.inverse.as_ref().unwrap()[&Symbol::Dep(2)], "u1' - u1^2"));
        assert_eq!(render_y(&p("u1'' + u1")), "y'' + y");
    }

    #[test]
    fn isolated_powers_are_inverted() {
        let zt = ZeroTest::default();
        // y = u1, y' = u2^2 + u1: u2 = sqrt(y' - y) on the sampled branch.
        let c = ds_to_ode(&ds(&["u2^2 + u1", "u1"]), 1, &zt).unwrap();
        let inv = c.inverse.as_ref().expect("symbolic inverse");
        assert!(inv[&Symbol::Dep(2)].to_string().contains("^(1/2)") || inv[&Symbol::Dep(2)].to_string().contains("sqrt"), "{}", inv[&Symbol::Dep(2)]);
    }

    #[test]
    fn rank_deficient_pivot() {
        let zt = ZeroTest::default();
        // u2 never feeds back into u1.
        let err = ds_to_ode(&ds(&["u1", "u1 + u2"]), 1, &zt).unwrap_err();
        assert_eq!(err, Error::RankDeficientChain { pivot: 1 });
    }

    #[test]
    fn numeric_path_matches_symbolic() {
        let zt = ZeroTest::default();
        let mut c = ds_to_ode(&ds(&["u1 + u1^2*u2", "u2 + u1*u2^2"]), 1, &zt).unwrap();
        let params = Point::new();
        let ys = c.jets_at(0.0, &[1.1, 0.7], &params).unwrap();
        let mut st = NewtonState::default();
        let sym = c.eval_top(0.0, &ys, &params, &mut st).unwrap();
        c.ode = None;
        let num = c.eval_top(0.0, &ys, &params, &mut st).unwrap();
        assert!((sym - num).abs() < 1e-9, "{sym} vs {num}");
        assert!((st.u[0] - 1.1).abs() < 1e-10 && (st.u[1] - 0.7).abs() < 1e-10);
    }

    #[test]
    fn round_trip() {
        let zt = ZeroTest::default();
        let mut solved = BTreeMap::new();
        solved.insert(Symbol::Jet(1, 2), p("-2*u1' + 3*u1'^2/u1"));
        let ode = OdeSystem::from_solved(solved).unwrap();
        let d = ode_to_ds(&ode).unwrap();
        assert_eq!(d.n(), 2);
        let c = ds_to_ode(&d, 1, &zt).unwrap();
        assert!(same(c.rhs().unwrap(), "-2*u1' + 3*u1'^2/u1"));
        let mut solved = BTreeMap::new();
        solved.insert(Symbol::Jet(1, 1), p("u1"));
        let d = ode_to_ds(&OdeSystem::from_solved(solved).unwrap()).unwrap();
        assert_eq!(d.f, vec![p("u1")]);
    }

    #[test]
    fn example6_invariant_transfers() {
        let zt = ZeroTest::default();
        let d = ds(&["u2 + u1^2", "2*u2^2/u1 + u1*u2"]);
        let c = ds_to_ode(&d, 1, &zt).unwrap();
        let wt = c.transfer(&p("u2/u1"), &zt).unwrap();
        assert!(same(&wt, "u1'/u1 - u1"), "{wt}");
    }
}
