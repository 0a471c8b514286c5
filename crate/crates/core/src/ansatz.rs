//! Sampled linear-algebra fitting: re-expressing a function in given
//! variables, and finding common invariants of a family of derivations.
//!
//! Every fit is a guess from floating-point data; nothing is returned before
//! the symbolic identity it claims passes a zero test.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::expr::{Differ, Expr, Point, Symbol, ZeroTest};
use crate::jet::Derivation;
use crate::linalg::{null_space, rank, rationalize_all, rref_rows, NULL_TOL, RANK_TOL};

#[derive(Clone, Debug)]
pub struct AnsatzOptions {
    pub max_degree: usize,
    pub rational: bool,
    pub max_den: i64,
    /// Sample rows per unknown coefficient.
    pub oversample: usize,
    /// Larger systems are skipped rather than solved.
    pub max_unknowns: usize,
}

impl Default for AnsatzOptions {
    fn default() -> Self {
        AnsatzOptions { max_degree: 4, rational: true, max_den: 1000, oversample: 3, max_unknowns: 600 }
    }
}

impl AnsatzOptions {
    pub fn with_degree(mut self, d: usize) -> Self {
        self.max_degree = d;
        self
    }

    pub fn polynomial_only(mut self) -> Self {
        self.rational = false;
        self
    }
}

/// Exponent vectors of total degree `lo..=hi` in `vars` variables, by degree
/// and then lexicographically with the first variable largest.
pub fn monomials(vars: usize, lo: usize, hi: usize) -> Vec<Vec<u32>> {
    fn rec(vars: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() + 1 == vars {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for e in (0..=left).rev() {
            cur.push(e);
            rec(vars, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for d in lo..=hi {
        if vars == 0 {
            if d == 0 {
                out.push(Vec::new());
            }
            continue;
        }
        rec(vars, d as u32, &mut Vec::new(), &mut out);
    }
    out
}

pub fn monomial_expr(gens: &[Expr], exps: &[u32]) -> Expr {
    Expr::mul_all(gens.iter().zip(exps).filter(|(_, &e)| e > 0).map(|(g, &e)| g.powi(e as i64)))
}

fn monomial_value(vals: &[f64], exps: &[u32]) -> f64 {
    vals.iter().zip(exps).map(|(v, &e)| v.powi(e as i32)).product()
}

fn combination(coeffs: &[BigRational], basis: &[Expr]) -> Expr {
    Expr::add_all(
        coeffs.iter().zip(basis).filter(|(c, _)| !c.is_zero()).map(|(c, b)| Expr::constant(c.clone()).mul(b)),
    )
}

/// The first `count` points where all `exprs` evaluate, with their values.
fn sample_values(exprs: &[Expr], count: usize, zt: &ZeroTest) -> Vec<(Point, Vec<f64>)> {
    let mut out = Vec::with_capacity(count);
    for p in zt.points(exprs, count * 2) {
        if out.len() == count {
            break;
        }
        let vals: Option<Vec<f64>> = exprs.iter().map(|e| e.eval(&p).ok().filter(|v| v.is_finite())).collect();
        if let Some(v) = vals {
            out.push((p, v));
        }
    }
    out
}

/// Writes `target` as `P(v)/Q(v)` with rational coefficients, where each
/// `v_i` is the expression bound to a fresh symbol. The result is over those
/// symbols. Polynomials are tried before quotients, lower degrees first.
pub fn express_in(target: &Expr, vars: &[(Symbol, Expr)], zt: &ZeroTest, opts: &AnsatzOptions) -> Result<Expr> {
    let syms: Vec<Expr> = vars.iter().map(|(s, _)| Expr::sym(s.clone())).collect();
    let bindings = vars.iter().map(|(s, e)| (s.clone(), e.clone())).collect();
    let confirm = |cand: &Expr| zt.is_zero(&target.sub(&cand.substitute(&bindings))).is_zero();
    if let Some(c) = target.as_const() {
        return Ok(Expr::constant(c.clone()));
    }
    let mut all: Vec<Expr> = vec![target.clone()];
    all.extend(vars.iter().map(|(_, e)| e.clone()));
    let mut tried = 0usize;
    for d in 0..=opts.max_degree {
        let num = monomials(vars.len(), 0, d);
        let mut shapes = vec![vec![vec![0u32; vars.len()]]];
        if opts.rational && d > 0 {
            shapes.push(monomials(vars.len(), 0, d));
        }
        for den in shapes {
            let unknowns = num.len() + den.len();
            if unknowns > opts.max_unknowns {
                continue;
            }
            tried += 1;
            let rows = sample_values(&all, opts.oversample * unknowns + 4, zt);
            if rows.len() < unknowns {
                continue;
            }
            let mut a = DMatrix::zeros(rows.len(), unknowns);
            for (i, (_, vals)) in rows.iter().enumerate() {
                let (tv, vv) = (vals[0], &vals[1..]);
                for (j, m) in den.iter().enumerate() {
                    a[(i, j)] = tv * monomial_value(vv, m);
                }
                for (j, m) in num.iter().enumerate() {
                    a[(i, den.len() + j)] = -monomial_value(vv, m);
                }
            }
            let ns = null_space(&a, NULL_TOL);
            if ns.ncols() == 0 {
                continue;
            }
            let mut cands = rref_rows(&ns);
            cands.sort_by_key(|r| r.iter().filter(|x| **x != 0.0).count());
            for row in cands {
                if row[..den.len()].iter().all(|x| *x == 0.0) {
                    continue;
                }
                let Some(c) = rationalize_all(&row, opts.max_den, 1e-7) else { continue };
                let (qc, pc) = c.split_at(den.len());
                // Normalize the first denominator coefficient to 1.
                let lead = qc.iter().find(|x| !x.is_zero()).unwrap().clone();
                let qc: Vec<BigRational> = qc.iter().map(|x| x / &lead).collect();
                let pc: Vec<BigRational> = pc.iter().map(|x| x / &lead).collect();
                let p = combination(&pc, &num.iter().map(|m| monomial_expr(&syms, m)).collect::<Vec<_>>());
                let q = combination(&qc, &den.iter().map(|m| monomial_expr(&syms, m)).collect::<Vec<_>>());
                let cand = if q.is_const_one() { p } else { p.div(&q) };
                if confirm(&cand) {
                    return Ok(cand);
                }
            }
        }
    }
    Err(Error::NotExpressible {
        target: target.to_string(),
        detail: format!("no polynomial or rational fit of degree <= {} ({tried} ansatz sizes tried)", opts.max_degree),
    })
}

/// Basis generators for invariant search.
#[derive(Clone, Debug)]
pub struct Generators {
    pub exprs: Vec<Expr>,
}

impl Generators {
    pub fn symbols<I: IntoIterator<Item = Symbol>>(syms: I) -> Self {
        Generators { exprs: syms.into_iter().map(Expr::sym).collect() }
    }

    /// Adds `log(u_a)` and `arctan(u_b/u_a)` for the order-0 variables among
    /// the generators, for fields with angular or logarithmic invariants.
    pub fn augmented(mut self) -> Self {
        let us: Vec<Expr> = self.exprs.iter().filter(|e| matches!(e.as_symbol(), Some(Symbol::Dep(_)))).cloned().collect();
        for (i, a) in us.iter().enumerate() {
            self.exprs.push(Expr::apply(crate::expr::Func::Log, a.clone()));
            for b in &us[i + 1..] {
                self.exprs.push(Expr::apply(crate::expr::Func::Arctan, b.div(a)));
            }
        }
        self
    }
}

/// Functions `F(g)` with `L(F) ≡ 0` for every operator, found in the span of
/// monomials in the generators (optionally over one monomial denominator).
/// Returned in discovery order; dependent ones are not filtered here.
pub fn annihilated(ops: &[Derivation], gens: &Generators, zt: &ZeroTest, opts: &AnsatzOptions) -> Vec<Expr> {
    let g = &gens.exprs;
    let mut d = Differ::new();
    let lg: Vec<Vec<Expr>> = ops.iter().map(|l| g.iter().map(|e| l.apply_with(e, &mut d)).collect()).collect();
    let mut found: Vec<Expr> = Vec::new();
    let mut pool: Vec<Expr> = g.clone();
    pool.extend(lg.iter().flatten().cloned());

    let mut denominators: Vec<Option<Vec<u32>>> = vec![None];
    if opts.rational {
        denominators.extend(monomials(g.len(), 1, opts.max_degree).into_iter().map(Some));
    }
    let widest = monomials(g.len(), 0, opts.max_degree).len().min(opts.max_unknowns);
    let all_pts = sample_values(&pool, (opts.oversample * widest + 4).div_ceil(ops.len().max(1)) + 2, zt);
    for den in denominators {
        let basis: Vec<Vec<u32>> = monomials(g.len(), 1, opts.max_degree)
            .into_iter()
            .chain(if den.is_some() { vec![vec![0; g.len()]] } else { vec![] })
            .filter(|m| Some(m) != den.as_ref())
            .collect();
        if basis.is_empty() || basis.len() > opts.max_unknowns {
            continue;
        }
        let rows_needed = opts.oversample * basis.len() + 4;
        let pts = &all_pts[..all_pts.len().min(rows_needed.div_ceil(ops.len().max(1)) + 2)];
        let mut a = DMatrix::zeros(pts.len() * ops.len(), basis.len());
        for (i, (_, vals)) in pts.iter().enumerate() {
            let gv = &vals[..g.len()];
            for (k, _) in ops.iter().enumerate() {
                let lv = &vals[g.len() * (1 + k)..g.len() * (2 + k)];
                // L(m) for a monomial m = Π g_i^{e_i}: Σ e_i m/g_i · L(g_i).
                let lmono = |m: &[u32]| -> f64 {
                    (0..g.len())
                        .filter(|&i| m[i] > 0)
                        .map(|i| {
                            let mut e = m.to_vec();
                            e[i] -= 1;
                            m[i] as f64 * monomial_value(gv, &e) * lv[i]
                        })
                        .sum()
                };
                let dl = den.as_ref().map(|dm| lmono(dm) / monomial_value(gv, dm)).unwrap_or(0.0);
                for (j, m) in basis.iter().enumerate() {
                    a[(i * ops.len() + k, j)] = lmono(m) - monomial_value(gv, m) * dl;
                }
            }
        }
        if a.nrows() < basis.len() {
            continue;
        }
        let ns = null_space(&a, NULL_TOL);
        if ns.ncols() == 0 {
            continue;
        }
        let basis_exprs: Vec<Expr> = basis.iter().map(|m| monomial_expr(g, m)).collect();
        let den_expr = den.as_ref().map(|m| monomial_expr(g, m));
        for row in rref_rows(&ns) {
            let Some(c) = rationalize_all(&row, opts.max_den, 1e-7) else { continue };
            // Leading coefficient (first nonzero) normalized to 1.
            let lead = c.iter().find(|x| !x.is_zero()).cloned();
            let Some(lead) = lead else { continue };
            let c: Vec<BigRational> = c.iter().map(|x| x / &lead).collect();
            let num = combination(&c, &basis_exprs);
            let cand = match &den_expr {
                Some(de) => num.div(de),
                None => num,
            };
            let checks: Vec<Expr> = ops.iter().map(|l| l.apply_with(&cand, &mut d)).collect();
            if zt.all_zero_joint(&checks).is_zero() {
                found.push(cand);
            }
        }
    }
    found
}

/// Numeric rank of the Jacobian of `exprs` with respect to `wrt`, the
/// largest over a few sample points.
pub fn jacobian_rank(exprs: &[Expr], wrt: &[Symbol], zt: &ZeroTest) -> usize {
    if exprs.is_empty() || wrt.is_empty() {
        return 0;
    }
    let mut d = Differ::new();
    let jac: Vec<Expr> = exprs.iter().flat_map(|e| wrt.iter().map(|s| d.diff(e, s)).collect::<Vec<_>>()).collect();
    sample_values(&jac, 3, zt)
        .iter()
        .map(|(_, v)| rank(&DMatrix::from_row_slice(exprs.len(), wrt.len(), v), RANK_TOL))
        .max()
        .unwrap_or(0)
}

/// Greedily extends `base` by candidates that raise the Jacobian rank, until
/// `want` have been added.
pub fn select_independent(base: &[Expr], candidates: &[Expr], want: usize, wrt: &[Symbol], zt: &ZeroTest) -> Vec<Expr> {
    let mut chosen: Vec<Expr> = Vec::new();
    let mut current: Vec<Expr> = base.to_vec();
    let mut r = jacobian_rank(&current, wrt, zt);
    for c in candidates {
        if chosen.len() == want {
            break;
        }
        current.push(c.clone());
        let r2 = jacobian_rank(&current, wrt, zt);
        if r2 > r {
            r = r2;
            chosen.push(c.clone());
        } else {
            current.pop();
        }
    }
    chosen
}

/// Symbols the expressions depend on, in order.
pub fn symbols_of(exprs: &[Expr]) -> Vec<Symbol> {
    let set: BTreeSet<Symbol> = exprs.iter().flat_map(|e| e.free_symbols()).collect();
    set.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, ParseContext};

    fn p(s: &str) -> Expr {
        parse(s, &ParseContext::new(4, 3).with_params(["a"])).unwrap()
    }

    fn w(i: usize) -> Symbol {
        Symbol::param(&format!("w{i}"))
    }

    #[test]
    fn monomial_order() {
        let m = monomials(2, 0, 2);
        assert_eq!(m, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(monomials(3, 2, 2).len(), 6);
        assert_eq!(monomials(0, 0, 3), vec![Vec::<u32>::new()]);
    }

    #[test]
    fn expresses_polynomials_with_parameters() {
        let zt = ZeroTest::default();
        let target = p("2*(1-a)*(u1^2 - u2^2)/u3^2");
        let vars = vec![(w(1), p("(u1^2 - u2^2)/u3^2")), (Symbol::param("a"), p("a"))];
        let e = express_in(&target, &vars, &zt, &AnsatzOptions::default()).unwrap();
        let back = e.substitute(&vars.iter().cloned().collect());
        assert!(zt.is_zero(&back.sub(&target)).is_zero());
    }

    #[test]
    fn expresses_quotients() {
        let zt = ZeroTest::default();
        // (1 - w1 w2)/(w1 - w2^2) with w1 = u2/u3, w2 = u4/u3.
        let w1 = p("u2/u3");
        let w2 = p("u4/u3");
        let target = Expr::one().sub(&w1.mul(&w2)).div(&w1.sub(&w2.powi(2)));
        let e = express_in(&target, &[(w(1), w1), (w(2), w2)], &zt, &AnsatzOptions::default()).unwrap();
        assert_eq!(e.to_string(), "(1 - w1*w2)/(w1 - w2^2)");
    }

    #[test]
    fn rejects_what_is_not_a_function_of_the_variables() {
        let zt = ZeroTest::default();
        let r = express_in(&p("u1"), &[(w(1), p("u1*u2"))], &zt, &AnsatzOptions::default().with_degree(2));
        assert!(matches!(r, Err(Error::NotExpressible { .. })));
    }

    #[test]
    fn finds_invariants_of_a_scaling() {
        let zt = ZeroTest::default();
        let x = Derivation::new(vec![(Symbol::Dep(1), p("u1")), (Symbol::Dep(2), p("-u2"))]);
        let gens = Generators::symbols([Symbol::Dep(1), Symbol::Dep(2)]);
        let inv = annihilated(&[x], &gens, &zt, &AnsatzOptions::default().with_degree(2).polynomial_only());
        assert_eq!(inv.len(), 1);
        assert!(zt.is_zero(&inv[0].sub(&p("u1*u2"))).is_zero());
    }

    #[test]
    fn finds_rational_invariants() {
        let zt = ZeroTest::default();
        let x1 = Derivation::new(vec![(Symbol::Dep(1), p("u1")), (Symbol::Dep(2), p("u2")), (Symbol::Dep(3), p("u3"))]);
        let x2 = Derivation::new(vec![(Symbol::Dep(1), p("u2")), (Symbol::Dep(2), p("u1"))]);
        let gens = Generators::symbols((1..=3).map(Symbol::Dep));
        let inv = annihilated(&[x1, x2], &gens, &zt, &AnsatzOptions::default().with_degree(2));
        let target = p("(u1^2 - u2^2)/u3^2");
        let wrt: Vec<Symbol> = (1..=3).map(Symbol::Dep).collect();
        let pick = select_independent(&[], &inv, 1, &wrt, &zt);
        assert_eq!(pick.len(), 1);
        assert_eq!(jacobian_rank(&[pick[0].clone(), target], &wrt, &zt), 1);
    }

    #[test]
    fn translation_invariant_is_the_other_coordinate() {
        let zt = ZeroTest::default();
        let x = Derivation::new(vec![(Symbol::Dep(1), Expr::one())]);
        let gens = Generators::symbols([Symbol::Dep(1), Symbol::Dep(2)]);
        let inv = annihilated(&[x], &gens, &zt, &AnsatzOptions::default().with_degree(1).polynomial_only());
        assert_eq!(inv, vec![Expr::u(2)]);
    }

    #[test]
    fn rotation_needs_augmented_basis_for_the_angle() {
        let zt = ZeroTest::default();
        // X = u2 ∂1 − u1 ∂2 has invariant u1² + u2² and u3; u3 - arctan(u2/u1) is not invariant.
        let x = Derivation::new(vec![(Symbol::Dep(1), p("u2")), (Symbol::Dep(2), p("-u1"))]);
        let gens = Generators::symbols((1..=3).map(Symbol::Dep)).augmented();
        let inv = annihilated(&[x], &gens, &zt, &AnsatzOptions::default().with_degree(2).polynomial_only());
        let wrt: Vec<Symbol> = (1..=3).map(Symbol::Dep).collect();
        assert_eq!(select_independent(&[], &inv, 3, &wrt, &zt).len(), 2);
    }
}
