//! Total derivative and (σ-)prolongation of point vector fields.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::expr::{Differ, Expr, Symbol, Verdict, ZeroTest, Q_MAX};

/// First-order differential operator `Σ c_s ∂/∂s`.
#[derive(Clone, Debug, Default)]
pub struct Derivation {
    pub terms: Vec<(Symbol, Expr)>,
}

impl Derivation {
    pub fn new(terms: Vec<(Symbol, Expr)>) -> Self {
        Derivation { terms: terms.into_iter().filter(|(_, c)| !c.is_const_zero()).collect() }
    }

    pub fn apply(&self, e: &Expr) -> Expr {
        self.apply_with(e, &mut Differ::new())
    }

    pub fn apply_with(&self, e: &Expr, d: &mut Differ) -> Expr {
        let syms = e.free_symbols();
        Expr::add_all(
            self.terms
                .iter()
                .filter(|(s, _)| syms.contains(s))
                .map(|(s, c)| c.mul(&d.diff(e, s))),
        )
    }

    /// Coefficient of `∂/∂s` (0 when absent).
    pub fn coeff(&self, s: &Symbol) -> Expr {
        self.terms.iter().find(|(x, _)| x == s).map(|(_, c)| c.clone()).unwrap_or_else(Expr::zero)
    }
}

/// `D_t e = ∂e/∂t + Σ u^a_{k+1} ∂e/∂u^a_k`.
pub fn total_derivative(e: &Expr) -> Result<Expr> {
    total_derivative_with(e, Q_MAX, &mut Differ::new())
}

pub fn total_derivative_with(e: &Expr, q_max: usize, d: &mut Differ) -> Result<Expr> {
    let mut terms = Vec::new();
    for s in e.free_symbols() {
        match &s {
            Symbol::Time => terms.push(d.diff(e, &s)),
            Symbol::Dep(_) | Symbol::Jet(..) => {
                let up = s.raised().unwrap();
                if up.order().unwrap() > q_max {
                    return Err(Error::JetOrderExceeded { order: up.order().unwrap(), max: q_max });
                }
                let de = d.diff(e, &s);
                if !de.is_const_zero() {
                    terms.push(Expr::sym(up).mul(&de));
                }
            }
            Symbol::Param(_) => {}
        }
    }
    Ok(Expr::add_all(terms))
}

/// `X = τ ∂/∂t + φ^a ∂/∂u^a`, with prolongation coefficients once prolonged.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub tau: Expr,
    pub phi: Vec<Expr>,
    /// `prolongation[k-1][a-1]` is the coefficient of `∂/∂u^a_k`.
    pub prolongation: Vec<Vec<Expr>>,
}

impl VectorField {
    pub fn new(tau: Expr, phi: Vec<Expr>) -> Self {
        VectorField { tau, phi, prolongation: Vec::new() }
    }

    pub fn vertical(phi: Vec<Expr>) -> Self {
        VectorField::new(Expr::zero(), phi)
    }

    pub fn n(&self) -> usize {
        self.phi.len()
    }

    /// Highest prolonged order.
    pub fn order(&self) -> usize {
        self.prolongation.len()
    }

    pub fn is_vertical(&self, zt: &ZeroTest) -> bool {
        zt.is_zero(&self.tau).is_zero()
    }

    /// The unprolonged field.
    pub fn base(&self) -> VectorField {
        VectorField::new(self.tau.clone(), self.phi.clone())
    }

    /// Coefficient of `∂/∂u^a_k`, `k = 0` meaning `φ^a`.
    pub fn coeff(&self, a: usize, k: usize) -> &Expr {
        if k == 0 {
            &self.phi[a - 1]
        } else {
            &self.prolongation[k - 1][a - 1]
        }
    }

    /// The operator truncated at order `k`.
    pub fn derivation(&self, k: usize) -> Result<Derivation> {
        if k > self.order() {
            return Err(Error::JetOrderExceeded { order: k, max: self.order() });
        }
        let mut terms = vec![(Symbol::Time, self.tau.clone())];
        for j in 0..=k {
            for a in 1..=self.n() {
                terms.push((Symbol::jet(a, j), self.coeff(a, j).clone()));
            }
        }
        Ok(Derivation::new(terms))
    }

    /// Applies the field prolonged as far as `e` requires.
    pub fn apply(&self, e: &Expr) -> Result<Expr> {
        let k = e.jet_order().unwrap_or(0);
        Ok(self.derivation(k)?.apply(e))
    }
}

/// σ matrix with optional orbital column θ and structure constants ν.
#[derive(Clone, Debug)]
pub struct SigmaSpec {
    pub sigma: Vec<Vec<Expr>>,
    pub theta: Option<Vec<Expr>>,
    /// `nu[α][β][γ]` in `[X_α, X_β] = ν_{αβγ} X_γ`.
    pub nu: Option<Vec<Vec<Vec<Expr>>>>,
}

impl SigmaSpec {
    pub fn new(sigma: Vec<Vec<Expr>>) -> Self {
        SigmaSpec { sigma, theta: None, nu: None }
    }

    pub fn zero(s: usize) -> Self {
        SigmaSpec::new(vec![vec![Expr::zero(); s]; s])
    }

    pub fn s(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_orbital(&self) -> bool {
        self.theta.is_some()
    }

    pub fn validate(&self, s: usize) -> Result<()> {
        let dm = |what: &str, expected: usize, got: usize| Error::DimensionMismatch(format!("{what}: expected {expected}, got {got}"));
        if self.sigma.len() != s {
            return Err(dm("sigma rows", s, self.sigma.len()));
        }
        if let Some(row) = self.sigma.iter().find(|r| r.len() != s) {
            return Err(dm("sigma columns", s, row.len()));
        }
        if let Some(th) = &self.theta {
            if th.len() != s {
                return Err(dm("theta", s, th.len()));
            }
        }
        if let Some(nu) = &self.nu {
            if nu.len() != s || nu.iter().any(|m| m.len() != s || m.iter().any(|r| r.len() != s)) {
                return Err(dm("nu", s * s * s, nu.iter().flatten().map(Vec::len).sum()));
            }
        }
        Ok(())
    }

    /// `ν_{αβγ} + ν_{βαγ}` vanish for all indices.
    pub fn nu_antisymmetry(&self, zt: &ZeroTest) -> Verdict {
        let Some(nu) = &self.nu else { return Verdict::Zero { max_abs: 0.0 } };
        let s = nu.len();
        let mut sums = Vec::new();
        for a in 0..s {
            for b in 0..s {
                for g in 0..s {
                    sums.push(nu[a][b][g].add(&nu[b][a][g]));
                }
            }
        }
        zt.all_zero_joint(&sums)
    }

    pub fn restricted(&self, bindings: &BTreeMap<Symbol, Expr>) -> SigmaSpec {
        let m = |v: &Vec<Expr>| v.iter().map(|e| e.substitute(bindings)).collect::<Vec<_>>();
        SigmaSpec {
            sigma: self.sigma.iter().map(m).collect(),
            theta: self.theta.as_ref().map(m),
            nu: self.nu.as_ref().map(|nu| nu.iter().map(|x| x.iter().map(m).collect()).collect()),
        }
    }
}

/// Classical prolongation up to order `k`.
pub fn standard_prolong(x: &VectorField, k: usize) -> Result<VectorField> {
    let mut v = sigma_prolong(std::slice::from_ref(x), &SigmaSpec::zero(1), k)?;
    Ok(v.pop().unwrap())
}

/// σ-prolongation up to order `k`:
/// `ψ_{α,j+1} = D_t ψ_{α,j} − u_{j+1} D_t τ_α + σ_{αβ}(ψ_{β,j} − u_{j+1} τ_β)`, `ψ_{α,0} = φ_α`.
pub fn sigma_prolong(fields: &[VectorField], spec: &SigmaSpec, k: usize) -> Result<Vec<VectorField>> {
    if k > Q_MAX {
        return Err(Error::JetOrderExceeded { order: k, max: Q_MAX });
    }
    let s = fields.len();
    spec.validate(s)?;
    let n = fields.first().map_or(0, VectorField::n);
    if let Some(f) = fields.iter().find(|f| f.n() != n) {
        return Err(Error::DimensionMismatch(format!("field of dimension {} among dimension {n}", f.n())));
    }
    let mut d = Differ::new();
    let dtau: Vec<Expr> = fields.iter().map(|f| total_derivative_with(&f.tau, Q_MAX, &mut d)).collect::<Result<_>>()?;
    let mut out: Vec<VectorField> = fields.iter().map(VectorField::base).collect();
    let mut prev: Vec<Vec<Expr>> = fields.iter().map(|f| f.phi.clone()).collect();
    for j in 0..k {
        let mut next = Vec::with_capacity(s);
        for al in 0..s {
            let mut row = Vec::with_capacity(n);
            for a in 1..=n {
                let up = Expr::jet(a, j + 1);
                let mut terms = vec![total_derivative_with(&prev[al][a - 1], Q_MAX, &mut d)?, up.mul(&dtau[al]).neg()];
                for be in 0..s {
                    let sig = &spec.sigma[al][be];
                    if sig.is_const_zero() {
                        continue;
                    }
                    let inner = prev[be][a - 1].sub(&up.mul(&fields[be].tau));
                    terms.push(sig.mul(&inner));
                }
                row.push(Expr::add_all(terms));
            }
            next.push(row);
        }
        for (al, row) in next.iter().enumerate() {
            out[al].prolongation.push(row.clone());
        }
        prev = next;
    }
    Ok(out)
}

/// Random polynomials of jet order ≤ `k` and degree ≤ 3 in `t` and the `u` jets.
pub fn test_battery(n: usize, k: usize, count: usize, seed: u64) -> Vec<Expr> {
    let mut rng = crate::expr::attempt_rng(seed, 0xBA77E5);
    let mut coords = vec![Expr::t()];
    for j in 0..=k {
        for a in 1..=n {
            coords.push(Expr::jet(a, j));
        }
    }
    (0..count)
        .map(|_| {
            let nterms = rng.gen_range(1..=4);
            Expr::add_all((0..nterms).map(|_| {
                let deg = rng.gen_range(1..=3);
                let c = Expr::int(rng.gen_range(1..=3i64) * if rng.gen_bool(0.5) { 1 } else { -1 });
                Expr::mul_all(std::iter::once(c).chain((0..deg).map(|_| coords[rng.gen_range(0..coords.len())].clone())))
            }))
        })
        .collect()
}

/// Residuals of `[D_t, Y_α^{[k+1]}] F = −σ_{αβ} Y_β^{[k]} F + (D_t τ_α + σ_{αβ} τ_β) D_t F`
/// for every field and every test expression `F`.
///
/// `prolonged` must carry coefficients up to order `k+1`; `spec` is the σ
/// claimed on the right-hand side, so the check also detects prolongations
/// built from a different σ.
pub fn commutation_residuals(prolonged: &[VectorField], spec: &SigmaSpec, k: usize, battery: &[Expr]) -> Result<Vec<Expr>> {
    if k + 2 > Q_MAX {
        return Err(Error::JetOrderExceeded { order: k + 2, max: Q_MAX });
    }
    spec.validate(prolonged.len())?;
    let mut d = Differ::new();
    let dtau: Vec<Expr> = prolonged.iter().map(|f| total_derivative_with(&f.tau, Q_MAX, &mut d)).collect::<Result<_>>()?;
    let ys: Vec<Derivation> = prolonged.iter().map(|f| f.derivation(k + 1)).collect::<Result<_>>()?;
    let yk: Vec<Derivation> = prolonged.iter().map(|f| f.derivation(k)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for f in battery {
        let dtf = total_derivative_with(f, Q_MAX, &mut d)?;
        let ykf: Vec<Expr> = yk.iter().map(|y| y.apply_with(f, &mut d)).collect();
        for (al, y) in ys.iter().enumerate() {
            let lhs = total_derivative_with(&y.apply_with(f, &mut d), Q_MAX, &mut d)?.sub(&y.apply_with(&dtf, &mut d));
            let mut rhs = Vec::new();
            let mut factor = vec![dtau[al].clone()];
            for (be, yb) in ykf.iter().enumerate() {
                let sig = &spec.sigma[al][be];
                if sig.is_const_zero() {
                    continue;
                }
                rhs.push(sig.mul(yb).neg());
                factor.push(sig.mul(&prolonged[be].tau));
            }
            rhs.push(Expr::add_all(factor).mul(&dtf));
            out.push(lhs.sub(&Expr::add_all(rhs)));
        }
    }
    Ok(out)
}

/// Prolongs `fields` with `spec` to order `k+1` and checks the commutation identity
/// on `battery_size` random test expressions.
pub fn check_commutation_identity(fields: &[VectorField], spec: &SigmaSpec, k: usize, battery_size: usize, zt: &ZeroTest) -> Result<Verdict> {
    let prolonged = sigma_prolong(fields, spec, k + 1)?;
    check_commutation_identity_against(&prolonged, spec, k, battery_size, zt)
}

/// As [`check_commutation_identity`] but for already prolonged fields and a claimed σ.
pub fn check_commutation_identity_against(prolonged: &[VectorField], spec: &SigmaSpec, k: usize, battery_size: usize, zt: &ZeroTest) -> Result<Verdict> {
    let n = prolonged.first().map_or(0, VectorField::n);
    let battery = test_battery(n, k, battery_size, zt.seed);
    let res = commutation_residuals(prolonged, spec, k, &battery)?;
    Ok(zt.all_zero_joint(&res))
}

/// `Y_α^{[k+1]} (D_t ζ1 / D_t ζ2) = 0` for common order-`k` invariants ζ1, ζ2.
pub fn check_invariance_by_differentiation(
    fields: &[VectorField],
    spec: &SigmaSpec,
    zeta1: &Expr,
    zeta2: &Expr,
    k: usize,
    zt: &ZeroTest,
) -> Result<Verdict> {
    let prolonged = sigma_prolong(fields, spec, k + 1)?;
    let mut d = Differ::new();
    for (name, z) in [("zeta1", zeta1), ("zeta2", zeta2)] {
        if z.jet_order().unwrap_or(0) > k {
            return Err(Error::JetOrderExceeded { order: z.jet_order().unwrap(), max: k });
        }
        for (al, y) in prolonged.iter().enumerate() {
            let v = zt.is_zero(&y.derivation(k)?.apply_with(z, &mut d));
            if !v.is_zero() {
                return Err(Error::NotInvariant { expr: format!("{name} = {z}"), field: al + 1 });
            }
        }
    }
    let d1 = total_derivative_with(zeta1, Q_MAX, &mut d)?;
    let d2 = total_derivative_with(zeta2, Q_MAX, &mut d)?;
    if zt.is_zero(&d2).is_zero() {
        return Err(Error::Precondition("D_t zeta2 vanishes identically".into()));
    }
    let ratio = d1.div(&d2);
    let res: Vec<Expr> = prolonged.iter().map(|y| y.derivation(k + 1).map(|y| y.apply_with(&ratio, &mut d))).collect::<Result<_>>()?;
    Ok(zt.all_zero_joint(&res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, ParseContext};

    fn ctx() -> ParseContext {
        ParseContext::new(3, 4)
    }

    fn p(s: &str) -> Expr {
        parse(s, &ctx()).unwrap()
    }

    fn zt() -> ZeroTest {
        ZeroTest::new(30, 11)
    }

    fn example1() -> (Vec<VectorField>, SigmaSpec) {
        let x1 = VectorField::vertical(vec![p("1"), p("1"), p("0")]);
        let x2 = VectorField::vertical(vec![p("1"), p("0"), p("1")]);
        (vec![x1, x2], SigmaSpec::new(vec![vec![p("0"), p("t")], vec![p("1"), p("0")]]))
    }

    #[test]
    fn total_derivative_of_coordinates() {
        assert_eq!(total_derivative(&Expr::u(1)).unwrap(), Expr::jet(1, 1));
        assert!(total_derivative(&Expr::int(3)).unwrap().is_const_zero());
        let e = total_derivative(&p("t*u1")).unwrap();
        assert!(zt().is_zero(&e.sub(&p("u1 + t*u1'"))).is_zero());
        assert!(matches!(total_derivative(&Expr::jet(1, Q_MAX)), Err(Error::JetOrderExceeded { .. })));
    }

    #[test]
    fn translations_prolong_trivially() {
        let x = VectorField::vertical(vec![p("1"), p("0"), p("1")]);
        let y = standard_prolong(&x, 3).unwrap();
        for k in 1..=3 {
            for a in 1..=3 {
                assert!(y.coeff(a, k).is_const_zero());
            }
        }
    }

    #[test]
    fn linear_field_prolongs_linearly() {
        let x = VectorField::vertical(vec![p("u1"), p("-u2"), p("0")]);
        let y = standard_prolong(&x, 1).unwrap();
        assert_eq!(y.coeff(1, 1), &Expr::jet(1, 1));
        assert!(zt().is_zero(&y.coeff(2, 1).add(&Expr::jet(2, 1))).is_zero());
    }

    #[test]
    fn example1_first_prolongation() {
        let (fields, spec) = example1();
        let y = sigma_prolong(&fields, &spec, 1).unwrap();
        let expect = [["t", "0", "t"], ["1", "1", "0"]];
        for (al, row) in expect.iter().enumerate() {
            for (a, c) in row.iter().enumerate() {
                assert!(zt().is_zero(&y[al].coeff(a + 1, 1).sub(&p(c))).is_zero(), "Y{} coeff {}", al + 1, a + 1);
            }
        }
    }

    #[test]
    fn commutation_identity_holds_and_detects_mutation() {
        let (fields, spec) = example1();
        assert!(check_commutation_identity(&fields, &spec, 1, 30, &zt()).unwrap().is_zero());
        let prolonged = sigma_prolong(&fields, &spec, 2).unwrap();
        let mut bad = spec.clone();
        bad.sigma[0][0] = bad.sigma[0][0].add(&Expr::one());
        assert!(check_commutation_identity_against(&prolonged, &bad, 1, 30, &zt()).unwrap().is_nonzero());
    }

    #[test]
    fn commutation_with_time_dependent_tau() {
        let x = VectorField::new(p("t*u1"), vec![p("u1^2"), p("t + u2")]);
        let y = VectorField::new(p("1"), vec![p("u2"), p("u1*t")]);
        let spec = SigmaSpec::new(vec![vec![p("u1'"), p("t")], vec![p("u2"), p("u1*u2'")]]);
        assert!(check_commutation_identity(&[x, y], &spec, 1, 10, &zt()).unwrap().is_zero());
    }

    #[test]
    fn invariance_by_differentiation() {
        let (fields, spec) = example1();
        let w = p("u1 - u2 - u3");
        assert!(check_invariance_by_differentiation(&fields, &spec, &w, &Expr::t(), 0, &zt()).unwrap().is_zero());
        assert!(check_invariance_by_differentiation(&fields, &spec, &w, &w, 0, &zt()).unwrap().is_zero());
        let eta1 = p("u1 - u2 - u1' + t*u2");
        let eta2 = p("u1 - u2 - u2'");
        assert!(check_invariance_by_differentiation(&fields, &spec, &eta1, &eta2, 1, &zt()).unwrap().is_zero());
        assert!(matches!(
            check_invariance_by_differentiation(&fields, &spec, &Expr::u(1), &Expr::t(), 0, &zt()),
            Err(Error::NotInvariant { .. })
        ));
    }
}
