//! Lie brackets, involution, σ-determining equations for ODE systems and
//! dynamical systems, and the constructions of σ-symmetric and orbitally
//! symmetric systems.

use nalgebra::DMatrix;
use num_traits::Zero;

use crate::ansatz::{monomial_expr, monomials};
use crate::error::{Error, Result};
use crate::expr::{Differ, Expr, Symbol, Verdict, ZeroTest};
use crate::jet::{sigma_prolong, Derivation, SigmaSpec, VectorField};
use crate::linalg::{null_space, rank, rationalize_all, rref_rows, NULL_TOL, RANK_TOL};
use crate::system::{DynSystem, OdeSystem};

/// Minimum number of points for rank constancy.
pub const RANK_SAMPLES: usize = 20;

/// `τ ∂/∂t + φ·∇_u` as an operator on functions of `(t, u)`.
pub fn point_derivation(x: &VectorField) -> Derivation {
    let mut terms = vec![(Symbol::Time, x.tau.clone())];
    terms.extend(x.phi.iter().enumerate().map(|(a, e)| (Symbol::Dep(a + 1), e.clone())));
    Derivation::new(terms)
}

/// `[X, Y]` with components `X(Y^c) − Y(X^c)`, the `τ` slot included.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> Result<VectorField> {
    if x.n() != y.n() {
        return Err(Error::DimensionMismatch(format!("bracket of fields of dimension {} and {}", x.n(), y.n())));
    }
    let (dx, dy) = (point_derivation(x), point_derivation(y));
    let mut d = Differ::new();
    let mut comp = |a: &Expr, b: &Expr| dx.apply_with(b, &mut d).sub(&dy.apply_with(a, &mut d));
    let tau = comp(&x.tau, &y.tau);
    let phi = x.phi.iter().zip(&y.phi).map(|(a, b)| comp(a, b)).collect();
    Ok(VectorField::new(tau, phi))
}

/// Bracket of two operators on jet space: coefficient of `∂/∂s` is `A(B_s) − B(A_s)`.
pub fn derivation_bracket(a: &Derivation, b: &Derivation) -> Derivation {
    let mut syms: Vec<Symbol> = a.terms.iter().chain(&b.terms).map(|(s, _)| s.clone()).collect();
    syms.sort();
    syms.dedup();
    let mut d = Differ::new();
    Derivation::new(
        syms.into_iter()
            .map(|s| {
                let c = a.apply_with(&b.coeff(&s), &mut d).sub(&b.apply_with(&a.coeff(&s), &mut d));
                (s, c)
            })
            .collect(),
    )
}

fn components(x: &VectorField) -> Vec<Expr> {
    std::iter::once(x.tau.clone()).chain(x.phi.iter().cloned()).collect()
}

/// Rank of the `s × n` matrix of `φ` coefficients, required constant over
/// [`RANK_SAMPLES`] points.
pub fn field_rank(fields: &[VectorField], zt: &ZeroTest) -> Result<usize> {
    let coeffs: Vec<Expr> = fields.iter().flat_map(|f| f.phi.clone()).collect();
    let n = fields.first().map_or(0, VectorField::n);
    if fields.is_empty() || n == 0 {
        return Ok(0);
    }
    let pts = zt.points(&coeffs, RANK_SAMPLES);
    if pts.len() < RANK_SAMPLES {
        return Err(Error::ConstantRankViolation(format!("only {} evaluable sample points", pts.len())));
    }
    let mut seen: Option<usize> = None;
    for p in &pts {
        let vals: Vec<f64> = coeffs.iter().map(|e| e.eval(p).unwrap()).collect();
        let r = rank(&DMatrix::from_row_slice(fields.len(), n, &vals), RANK_TOL);
        match seen {
            None => seen = Some(r),
            Some(r0) if r0 != r => {
                return Err(Error::ConstantRankViolation(format!("rank {r0} and rank {r} (at {p})")));
            }
            _ => {}
        }
    }
    Ok(seen.unwrap_or(0))
}

/// Outcome of an involution check.
#[derive(Clone, Debug)]
pub struct Involution {
    pub verdict: Verdict,
    /// `nu[α][β][γ]`, given or fitted.
    pub nu: Vec<Vec<Vec<Expr>>>,
    pub fitted: bool,
}

/// Writes `target = Σ_γ c_γ X_γ` with coefficient functions, trying constants,
/// then polynomials of degree ≤ 2, then quotients with a common denominator of
/// degree ≤ 2, in the symbols of the fields.
pub fn fit_combination(target: &[Expr], fields: &[Vec<Expr>], zt: &ZeroTest) -> Option<Vec<Expr>> {
    let s = fields.len();
    if zt.all_zero_joint(target).is_zero() {
        return Some(vec![Expr::zero(); s]);
    }
    let mut all: Vec<Expr> = target.to_vec();
    all.extend(fields.iter().flatten().cloned());
    let gens: Vec<Expr> = crate::ansatz::symbols_of(&all).into_iter().map(Expr::sym).collect();
    let m = target.len();
    let stages: [(usize, usize); 3] = [(0, 0), (2, 0), (2, 2)];
    for (nd, dd) in stages {
        let num = monomials(gens.len(), 0, nd);
        let den = monomials(gens.len(), 0, dd);
        let unknowns = den.len() + s * num.len();
        if unknowns > 400 {
            continue;
        }
        let mut pool = all.clone();
        pool.extend(gens.iter().cloned());
        let pts = zt.points(&pool, (3 * unknowns).div_ceil(m) + 4);
        let mut a = DMatrix::zeros(pts.len() * m, unknowns);
        for (i, p) in pts.iter().enumerate() {
            let gv: Vec<f64> = gens.iter().map(|g| g.eval(p).unwrap()).collect();
            let mono = |e: &[u32]| -> f64 { gv.iter().zip(e).map(|(v, &k)| v.powi(k as i32)).product() };
            for c in 0..m {
                let row = i * m + c;
                let tv = target[c].eval(p).unwrap();
                for (j, e) in den.iter().enumerate() {
                    a[(row, j)] = tv * mono(e);
                }
                for (g, f) in fields.iter().enumerate() {
                    let fv = f[c].eval(p).unwrap();
                    for (j, e) in num.iter().enumerate() {
                        a[(row, den.len() + g * num.len() + j)] = -fv * mono(e);
                    }
                }
            }
        }
        if a.nrows() < unknowns {
            continue;
        }
        let ns = null_space(&a, NULL_TOL);
        for row in rref_rows(&ns) {
            if row[..den.len()].iter().all(|x| *x == 0.0) {
                continue;
            }
            let Some(c) = rationalize_all(&row, 1000, 1e-7) else { continue };
            let lead = c[..den.len()].iter().find(|x| !x.is_zero()).unwrap().clone();
            let term = |cs: &[num_rational::BigRational], basis: &[Vec<u32>]| {
                Expr::add_all(cs.iter().zip(basis).filter(|(x, _)| !x.is_zero()).map(|(x, e)| {
                    Expr::constant(x / &lead).mul(&monomial_expr(&gens, e))
                }))
            };
            let q = term(&c[..den.len()], &den);
            let coeffs: Vec<Expr> = (0..s)
                .map(|g| {
                    let p = term(&c[den.len() + g * num.len()..den.len() + (g + 1) * num.len()], &num);
                    if q.is_const_one() {
                        p
                    } else {
                        p.div(&q)
                    }
                })
                .collect();
            let resid: Vec<Expr> = (0..m)
                .map(|k| target[k].sub(&Expr::add_all((0..s).map(|g| coeffs[g].mul(&fields[g][k])))))
                .collect();
            if zt.all_zero_joint(&resid).is_zero() {
                return Some(coeffs);
            }
        }
    }
    None
}

/// Verifies `[X_α, X_β] = ν_{αβγ} X_γ`; fits `ν` when not supplied.
pub fn check_involution(fields: &[VectorField], nu: Option<&Vec<Vec<Vec<Expr>>>>, zt: &ZeroTest) -> Result<Involution> {
    if fields.is_empty() {
        return Err(Error::Precondition("involution check needs at least one field".into()));
    }
    field_rank(fields, zt)?;
    let s = fields.len();
    let comps: Vec<Vec<Expr>> = fields.iter().map(components).collect();
    let mut out = vec![vec![vec![Expr::zero(); s]; s]; s];
    let mut verdict = Verdict::Zero { max_abs: 0.0 };
    for al in 0..s {
        for be in (al + 1)..s {
            let br = components(&lie_bracket(&fields[al], &fields[be])?);
            let coeffs = match nu {
                Some(nu) => nu[al][be].clone(),
                None => match fit_combination(&br, &comps, zt) {
                    Some(c) => c,
                    None => {
                        return Err(Error::NonInvolutive(format!(
                            "[X{}, X{}] is not a combination of the fields within the ansatz",
                            al + 1,
                            be + 1
                        )))
                    }
                },
            };
            let resid: Vec<Expr> = (0..br.len())
                .map(|k| br[k].sub(&Expr::add_all((0..s).map(|g| coeffs[g].mul(&comps[g][k])))))
                .collect();
            verdict = verdict.and(zt.all_zero_joint(&resid));
            for g in 0..s {
                out[be][al][g] = coeffs[g].neg();
                out[al][be][g] = coeffs[g].clone();
            }
        }
    }
    if let Some(nu) = nu {
        // Diagonal and antisymmetry of supplied constants.
        let mut diag = Vec::new();
        for (al, row) in nu.iter().enumerate() {
            diag.extend(row[al].iter().cloned());
        }
        verdict = verdict.and(zt.all_zero_joint(&diag));
        let spec = SigmaSpec { sigma: Vec::new(), theta: None, nu: Some(nu.clone()) };
        verdict = verdict.and(spec.nu_antisymmetry(zt));
        out = nu.clone();
    }
    Ok(Involution { verdict, nu: out, fitted: nu.is_none() })
}

/// Fields with their σ data, numerically ranked and checked for involution.
#[derive(Clone, Debug)]
pub struct SymmetrySet {
    pub fields: Vec<VectorField>,
    pub spec: SigmaSpec,
    pub rank: usize,
    pub involution_verified: bool,
}

impl SymmetrySet {
    /// Fills `spec.nu` by fitting when absent.
    pub fn new(fields: Vec<VectorField>, mut spec: SigmaSpec, zt: &ZeroTest) -> Result<Self> {
        spec.validate(fields.len())?;
        let n = fields.first().map_or(0, VectorField::n);
        if let Some(f) = fields.iter().find(|f| f.n() != n) {
            return Err(Error::DimensionMismatch(format!("field of dimension {} among dimension {n}", f.n())));
        }
        let rank = field_rank(&fields, zt)?;
        let inv = check_involution(&fields, spec.nu.as_ref(), zt)?;
        spec.nu = Some(inv.nu);
        Ok(SymmetrySet { fields, spec, rank, involution_verified: inv.verdict.is_zero() })
    }

    pub fn s(&self) -> usize {
        self.fields.len()
    }

    pub fn n(&self) -> usize {
        self.fields.first().map_or(0, VectorField::n)
    }

    pub fn all_vertical(&self, zt: &ZeroTest) -> bool {
        self.fields.iter().all(|f| f.is_vertical(zt))
    }

    pub fn nu(&self) -> Vec<Vec<Vec<Expr>>> {
        let s = self.s();
        self.spec.nu.clone().unwrap_or_else(|| vec![vec![vec![Expr::zero(); s]; s]; s])
    }
}

/// One sampled residual.
#[derive(Clone, Debug)]
pub struct Residual {
    pub label: String,
    pub expr: Expr,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Default)]
pub struct ResidualReport {
    pub residuals: Vec<Residual>,
}

impl ResidualReport {
    pub(crate) fn from_exprs(items: Vec<(String, Expr)>, zt: &ZeroTest) -> Self {
        let exprs: Vec<Expr> = items.iter().map(|(_, e)| e.clone()).collect();
        let verdicts = zt.all_zero(&exprs);
        ResidualReport {
            residuals: items.into_iter().zip(verdicts).map(|((label, expr), verdict)| Residual { label, expr, verdict }).collect(),
        }
    }

    pub fn passed(&self) -> bool {
        self.residuals.iter().all(|r| r.verdict.is_zero())
    }

    pub fn max_abs(&self) -> f64 {
        self.residuals.iter().map(|r| r.verdict.max_abs()).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Residual> {
        self.residuals.iter().filter(|r| !r.verdict.is_zero())
    }

    pub fn verdict(&self) -> Verdict {
        self.residuals.iter().fold(Verdict::Zero { max_abs: 0.0 }, |acc, r| acc.and(r.verdict.clone()))
    }
}

/// `R^a_α = X_α(f^a) − F(φ^a_α) − θ_α f^a − σ̄_{αβ} φ^a_β`, with `σ̄ = σ|_{u̇=f}`.
pub fn ds_residuals(ds: &DynSystem, fields: &[VectorField], spec: &SigmaSpec) -> Vec<(String, Expr)> {
    let spec = spec.restricted(&ds.restriction(1));
    let field = ds.field();
    let mut d = Differ::new();
    let mut out = Vec::new();
    for (al, x) in fields.iter().enumerate() {
        let xd = point_derivation(x);
        for a in 0..ds.n() {
            let mut terms = vec![xd.apply_with(&ds.f[a], &mut d), field.apply_with(&x.phi[a], &mut d).neg()];
            if let Some(th) = &spec.theta {
                terms.push(th[al].mul(&ds.f[a]).neg());
            }
            for (be, y) in fields.iter().enumerate() {
                terms.push(spec.sigma[al][be].mul(&y.phi[a]).neg());
            }
            out.push((format!("R[{},{}]", al + 1, a + 1), Expr::add_all(terms)));
        }
    }
    out
}

/// Determining equations `[φ_α, f] = θ_α f + σ_{αβ} φ_β` by sampling.
pub fn check_ds_sigma_symmetry(ds: &DynSystem, set: &SymmetrySet, zt: &ZeroTest) -> ResidualReport {
    ResidualReport::from_exprs(ds_residuals(ds, &set.fields, &set.spec), zt)
}

/// `Y_α^{[q]} E_a` restricted to the solution manifold.
pub fn check_ode_sigma_symmetry(ode: &OdeSystem, set: &SymmetrySet, zt: &ZeroTest) -> Result<ResidualReport> {
    let q = ode.order();
    let restriction = ode.restriction(q)?;
    let prolonged = sigma_prolong(&set.fields, &set.spec, q)?;
    let mut d = Differ::new();
    let mut items = Vec::new();
    for (al, y) in prolonged.iter().enumerate() {
        let op = y.derivation(q)?;
        for (a, e) in ode.eqs.iter().enumerate() {
            let r = op.apply_with(e, &mut d).substitute(&restriction);
            items.push((format!("Y{}E{}", al + 1, a + 1), r));
        }
    }
    Ok(ResidualReport::from_exprs(items, zt))
}

/// `f* = f + μ_α φ_α` and `σ_{αβ} = X_α(μ_β) + μ_γ ν_{αγβ}` for a standard symmetry.
pub fn construct_sigma_symmetric(ds: &DynSystem, set: &SymmetrySet, mu: &[Expr], zt: &ZeroTest) -> Result<(DynSystem, SigmaSpec)> {
    let s = set.s();
    if mu.len() != s {
        return Err(Error::DimensionMismatch(format!("{} functions mu for {s} fields", mu.len())));
    }
    let standard = ResidualReport::from_exprs(ds_residuals(ds, &set.fields, &SigmaSpec::zero(s)), zt);
    if let Some(bad) = standard.failures().next() {
        return Err(Error::NotStandardSymmetry(format!("{} = {} ({})", bad.label, bad.expr, bad.verdict.label())));
    }
    if !set.involution_verified {
        return Err(Error::NonInvolutive("the field set failed its involution check".into()));
    }
    let nu = set.nu();
    let mut f = ds.f.clone();
    for (al, x) in set.fields.iter().enumerate() {
        for (a, fa) in f.iter_mut().enumerate() {
            *fa = fa.add(&mu[al].mul(&x.phi[a]));
        }
    }
    let mut d = Differ::new();
    let sigma = (0..s)
        .map(|al| {
            let xd = point_derivation(&set.fields[al]);
            (0..s)
                .map(|be| {
                    let mut terms = vec![xd.apply_with(&mu[be], &mut d)];
                    terms.extend((0..s).map(|g| mu[g].mul(&nu[al][g][be])));
                    Expr::add_all(terms)
                })
                .collect()
        })
        .collect();
    Ok((DynSystem { f }, SigmaSpec { sigma, theta: None, nu: Some(nu) }))
}

/// `u̇ = ρ f`.
pub fn scale_to_orbital(ds: &DynSystem, rho: &Expr, zt: &ZeroTest) -> Result<DynSystem> {
    if zt.is_zero(rho).is_zero() {
        return Err(Error::ZeroScaling);
    }
    Ok(ds.scaled(rho))
}

/// Symmetry data after `f ↦ ρ f`: `θ_α ↦ θ_α + X_α(ρ)/ρ`, `σ ↦ ρ σ`.
pub fn scaled_spec(spec: &SigmaSpec, fields: &[VectorField], rho: &Expr) -> SigmaSpec {
    let mut d = Differ::new();
    let theta = fields
        .iter()
        .enumerate()
        .map(|(al, x)| {
            let extra = point_derivation(x).apply_with(rho, &mut d).div(rho);
            match &spec.theta {
                Some(th) => th[al].add(&extra),
                None => extra,
            }
        })
        .collect();
    SigmaSpec {
        sigma: spec.sigma.iter().map(|r| r.iter().map(|e| rho.mul(e)).collect()).collect(),
        theta: Some(theta),
        nu: spec.nu.clone(),
    }
}

/// `[Y_α, Y_β] = ν_{αβγ} Y_γ` for the first σ-prolongations, with every
/// coefficient restricted to `u̇ = f` before bracketing.
pub fn check_prolonged_involution(ds: &DynSystem, set: &SymmetrySet, zt: &ZeroTest) -> Result<Verdict> {
    let r1 = ds.restriction(1);
    let prolonged = sigma_prolong(&set.fields, &set.spec.restricted(&r1), 1)?;
    let ops: Vec<Derivation> = prolonged
        .iter()
        .map(|y| {
            let op = y.derivation(1)?;
            Ok(Derivation::new(op.terms.into_iter().map(|(s, c)| (s, c.substitute(&r1))).collect()))
        })
        .collect::<Result<_>>()?;
    let nu = set.nu();
    let mut resid = Vec::new();
    for al in 0..ops.len() {
        for be in (al + 1)..ops.len() {
            let br = derivation_bracket(&ops[al], &ops[be]);
            let mut syms: Vec<Symbol> = br.terms.iter().map(|(s, _)| s.clone()).collect();
            for op in &ops {
                syms.extend(op.terms.iter().map(|(s, _)| s.clone()));
            }
            syms.sort();
            syms.dedup();
            for s in syms {
                let comb = Expr::add_all((0..ops.len()).map(|g| nu[al][be][g].substitute(&r1).mul(&ops[g].coeff(&s))));
                resid.push(br.coeff(&s).sub(&comb).substitute(&r1));
            }
        }
    }
    Ok(zt.all_zero_joint(&resid))
}

/// Solves `[φ_α, f] = θ_α f + σ_{αβ} φ_β` for `θ` (when `orbital`) and `σ`
/// pointwise by Cramer's rule on a nonsingular minor, then checks the
/// remaining components.
pub fn infer_sigma(ds: &DynSystem, fields: &[VectorField], orbital: bool, zt: &ZeroTest) -> Result<SigmaSpec> {
    let s = fields.len();
    let n = ds.n();
    let mut cols: Vec<Vec<Expr>> = Vec::new();
    if orbital {
        cols.push(ds.f.clone());
    }
    cols.extend(fields.iter().map(|x| x.phi.clone()));
    let m = cols.len();
    if m > n {
        return Err(Error::Precondition(format!("{m} unknowns per field exceed the dimension {n}")));
    }
    // Pick rows giving a nonsingular minor at a sample point.
    let flat: Vec<Expr> = cols.iter().flatten().cloned().collect();
    let pt = zt.points(&flat, 1).pop().ok_or_else(|| Error::Precondition("no evaluable sample point".into()))?;
    let val = |e: &Expr| e.eval(&pt).unwrap();
    let mut rows: Vec<usize> = Vec::new();
    for a in 0..n {
        let mut trial = rows.clone();
        trial.push(a);
        let mat = DMatrix::from_fn(trial.len(), m, |i, j| val(&cols[j][trial[i]]));
        if rank(&mat, RANK_TOL) == trial.len() {
            rows = trial;
        }
        if rows.len() == m {
            break;
        }
    }
    if rows.len() < m {
        return Err(Error::Precondition("f and the fields are linearly dependent; σ is not determined".into()));
    }
    let minor = |replace: Option<(usize, &Vec<Expr>)>| -> Vec<Vec<Expr>> {
        rows.iter()
            .map(|&a| (0..m).map(|j| match replace {
                Some((c, v)) if c == j => v[a].clone(),
                _ => cols[j][a].clone(),
            }).collect())
            .collect()
    };
    let det0 = det(&minor(None));
    let mut theta = Vec::new();
    let mut sigma = Vec::new();
    let mut resid = Vec::new();
    for x in fields {
        let br = lie_bracket(x, &VectorField::vertical(ds.f.clone()))?.phi;
        let sol: Vec<Expr> = (0..m).map(|j| det(&minor(Some((j, &br)))).div(&det0)).collect();
        for a in 0..n {
            resid.push(br[a].sub(&Expr::add_all((0..m).map(|j| sol[j].mul(&cols[j][a])))));
        }
        let (th, sg) = if orbital { (Some(sol[0].clone()), sol[1..].to_vec()) } else { (None, sol) };
        theta.extend(th);
        sigma.push(sg);
    }
    let v = zt.all_zero_joint(&resid);
    if !v.is_zero() {
        return Err(Error::NotFound(format!("no {} σ solves the determining equations ({})", if orbital { "orbital" } else { "plain" }, v.label())));
    }
    debug_assert_eq!(sigma.len(), s);
    Ok(SigmaSpec { sigma, theta: orbital.then_some(theta), nu: None })
}

fn det(m: &[Vec<Expr>]) -> Expr {
    match m.len() {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        2 => m[0][0].mul(&m[1][1]).sub(&m[0][1].mul(&m[1][0])),
        k => Expr::add_all((0..k).filter(|&j| !m[0][j].is_const_zero()).map(|j| {
            let sub: Vec<Vec<Expr>> = m[1..].iter().map(|r| r.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, e)| e.clone()).collect()).collect();
            let t = m[0][j].mul(&det(&sub));
            if j % 2 == 0 {
                t
            } else {
                t.neg()
            }
        })),
    }
}

/// Kind of symmetry by which entries of `(θ, σ)` vanish identically.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymmetryClass {
    Standard,
    /// `σ ≠ 0`, `θ = 0`: a λ-symmetry when `s = 1`.
    Sigma,
    Orbital,
    OrbitalSigma,
}

impl SymmetryClass {
    pub fn label(self, s: usize) -> &'static str {
        match (self, s) {
            (SymmetryClass::Standard, _) => "standard",
            (SymmetryClass::Sigma, 1) => "lambda",
            (SymmetryClass::Sigma, _) => "sigma",
            (SymmetryClass::Orbital, _) => "orbital",
            (SymmetryClass::OrbitalSigma, _) => "orbital-sigma",
        }
    }
}

pub fn classify(spec: &SigmaSpec, zt: &ZeroTest) -> SymmetryClass {
    let sigma: Vec<Expr> = spec.sigma.iter().flatten().cloned().collect();
    let no_sigma = zt.all_zero_joint(&sigma).is_zero();
    let no_theta = spec.theta.as_ref().is_none_or(|th| zt.all_zero_joint(th).is_zero());
    match (no_theta, no_sigma) {
        (true, true) => SymmetryClass::Standard,
        (true, false) => SymmetryClass::Sigma,
        (false, true) => SymmetryClass::Orbital,
        (false, false) => SymmetryClass::OrbitalSigma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, ParseContext};

    fn p(s: &str) -> Expr {
        parse(s, &ParseContext::new(4, 3).with_params(["a"])).unwrap()
    }

    fn vf(c: &[&str]) -> VectorField {
        VectorField::vertical(c.iter().map(|s| p(s)).collect())
    }

    fn ds(c: &[&str]) -> DynSystem {
        DynSystem::new(c.iter().map(|s| p(s)).collect()).unwrap()
    }

    fn m(rows: &[&[&str]]) -> Vec<Vec<Expr>> {
        rows.iter().map(|r| r.iter().map(|s| p(s)).collect()).collect()
    }

    #[test]
    fn brackets() {
        let zt = ZeroTest::default();
        let x1 = vf(&["u1", "u2", "u3"]);
        let x2 = vf(&["u2", "u1", "0"]);
        let b = lie_bracket(&x1, &x2).unwrap();
        assert!(zt.all_zero_joint(&components(&b)).is_zero());
        let b = lie_bracket(&vf(&["1", "0"]), &vf(&["u1", "0"])).unwrap();
        assert_eq!(b.phi, vec![Expr::one(), Expr::zero()]);
    }

    #[test]
    fn fits_structure_constants() {
        let zt = ZeroTest::default();
        let inv = check_involution(&[vf(&["1", "0"]), vf(&["u1", "0"])], None, &zt).unwrap();
        assert!(inv.verdict.is_zero());
        assert_eq!(inv.nu[0][1][0], Expr::one());
        assert_eq!(inv.nu[1][0][0], Expr::int(-1));
        let inv = check_involution(&[vf(&["1", "0", "1"]), vf(&["0", "1", "0"])], None, &zt).unwrap();
        assert!(inv.nu.iter().flatten().flatten().all(Expr::is_const_zero));
    }

    #[test]
    fn non_involutive_pair() {
        let zt = ZeroTest::default();
        let r = check_involution(&[vf(&["1", "0", "0"]), vf(&["0", "u1", "1"])], None, &zt);
        assert!(matches!(r, Err(Error::NonInvolutive(_))), "{r:?}");
    }

    #[test]
    fn rank_must_be_constant() {
        let zt = ZeroTest::default().with_domain(crate::expr::SamplingBox { default: (-1.0, 1.0), ..Default::default() });
        // Rank drops where u1 = 0, which random points never hit exactly.
        assert_eq!(field_rank(&[vf(&["u1", "0"]), vf(&["0", "1"])], &zt).unwrap(), 2);
        assert_eq!(field_rank(&[vf(&["u1", "u2"]), vf(&["2*u1", "2*u2"])], &zt).unwrap(), 1);
    }

    #[test]
    fn example3_construction_matches_the_displayed_system() {
        let zt = ZeroTest::new(100, 3);
        let base = ds(&["u1 - u2", "-u1 + u2", "a*u3"]);
        let set = SymmetrySet::new(vec![vf(&["u1", "u2", "u3"]), vf(&["u2", "u1", "0"])], SigmaSpec::zero(2), &zt).unwrap();
        assert_eq!(set.rank, 2);
        let (star, spec) = construct_sigma_symmetric(&base, &set, &[p("u1"), p("u3")], &zt).unwrap();
        // The first component's last term is u3*u2 (μ2 φ2 = u3 u2), not u1*u2.
        let expected = ds(&["u1 - u2 + u1^2 + u2*u3", "-u1 + u2 + u1*u2 + u1*u3", "a*u3 + u1*u3"]);
        for (x, y) in star.f.iter().zip(&expected.f) {
            assert!(zt.is_zero(&x.sub(y)).is_zero());
        }
        let want = m(&[&["u1", "u3"], &["u2", "0"]]);
        for (r, w) in spec.sigma.iter().zip(&want) {
            for (x, y) in r.iter().zip(w) {
                assert!(zt.is_zero(&x.sub(y)).is_zero());
            }
        }
        let set2 = SymmetrySet { spec, ..set.clone() };
        let rep = check_ds_sigma_symmetry(&star, &set2, &zt);
        assert!(rep.passed(), "{:?}", rep.failures().next());
        assert!(rep.max_abs() < 1e-8);
        assert!(check_prolonged_involution(&star, &set2, &zt).unwrap().is_zero());
        // Swapping σ rows breaks it.
        let mut bad = set2.clone();
        bad.spec.sigma.swap(0, 1);
        assert!(!check_ds_sigma_symmetry(&star, &bad, &zt).passed());
    }

    #[test]
    fn example3_literal_display_has_no_sigma() {
        let zt = ZeroTest::new(100, 3);
        let lit = ds(&["u1 - u2 + u1^2 + u1*u2", "-u1 + u2 + u1*u2 + u1*u3", "a*u3 + u1*u3"]);
        let fields = [vf(&["u1", "u2", "u3"]), vf(&["u2", "u1", "0"])];
        assert!(infer_sigma(&lit, &fields, false, &zt).is_err());
        // With s + 1 = n the orbital system is square and always solvable.
        assert!(infer_sigma(&lit, &fields, true, &zt).is_ok());
    }

    #[test]
    fn construction_needs_a_standard_symmetry() {
        let zt = ZeroTest::default();
        let set = SymmetrySet::new(vec![vf(&["u1", "0"])], SigmaSpec::zero(1), &zt).unwrap();
        let r = construct_sigma_symmetric(&ds(&["u1^2", "u2"]), &set, &[Expr::one()], &zt);
        assert!(matches!(r, Err(Error::NotStandardSymmetry(_))));
    }

    #[test]
    fn orbital_scaling_of_example8() {
        let zt = ZeroTest::default();
        let base = ds(&["u1*u2", "u1/u3", "u3"]);
        let set = SymmetrySet::new(vec![vf(&["u1", "0", "u3"])], SigmaSpec::zero(1), &zt).unwrap();
        let (star, spec) = construct_sigma_symmetric(&base, &set, &[p("u2")], &zt).unwrap();
        assert!(spec.sigma[0][0].is_const_zero());
        let rho = p("1/(2*u1*u2)");
        let scaled = scale_to_orbital(&star, &rho, &zt).unwrap();
        let v = ds(&["1", "1/(2*u2*u3)", "u3*(1 + u2)/(2*u1*u2)"]);
        for (x, y) in scaled.f.iter().zip(&v.f) {
            assert!(zt.is_zero(&x.sub(y)).is_zero());
        }
        let ospec = scaled_spec(&spec, &set.fields, &rho);
        assert!(zt.is_zero(&ospec.theta.as_ref().unwrap()[0].add(&Expr::one())).is_zero());
        let oset = SymmetrySet { spec: ospec, ..set };
        assert!(check_ds_sigma_symmetry(&scaled, &oset, &zt).passed());
        assert!(matches!(scale_to_orbital(&star, &p("u1 - u1"), &zt), Err(Error::ZeroScaling)));
    }

    #[test]
    fn inference_and_classification_of_rotations() {
        let zt = ZeroTest::default();
        let x = vf(&["u2", "-u1", "0"]);
        let cases = [
            ("u1^2 + u2^2", "u3", "1", SymmetryClass::Standard),
            ("u1^2 + u2^2", "u1", "1", SymmetryClass::Sigma),
            ("u1", "2*u1", "3*u1", SymmetryClass::Orbital),
            ("u1", "u2", "3*u1", SymmetryClass::OrbitalSigma),
        ];
        for (h1, h2, h3, class) in cases {
            let f = [
                format!("({h1})*u1 + ({h2})*u2"),
                format!("({h1})*u2 - ({h2})*u1"),
                format!("({h3})*u3"),
            ];
            let d = DynSystem::new(f.iter().map(|s| p(s)).collect()).unwrap();
            let spec = infer_sigma(&d, std::slice::from_ref(&x), true, &zt).unwrap();
            assert_eq!(classify(&spec, &zt), class, "{h1} {h2} {h3}");
            let set = SymmetrySet::new(vec![x.clone()], spec, &zt).unwrap();
            assert!(check_ds_sigma_symmetry(&d, &set, &zt).passed());
        }
    }

    #[test]
    fn ode_check_agrees_with_ds_check_on_first_order_systems() {
        let zt = ZeroTest::default();
        let d = ds(&["u1 + u1^2*u2", "u2 + u1*u2^2"]);
        let set = SymmetrySet::new(vec![vf(&["u1", "-u2"])], SigmaSpec::zero(1), &zt).unwrap();
        assert!(check_ds_sigma_symmetry(&d, &set, &zt).passed());
        assert!(check_ode_sigma_symmetry(&d.as_ode(), &set, &zt).unwrap().passed());
        let bad = SymmetrySet { spec: SigmaSpec::new(vec![vec![Expr::one()]]), ..set };
        assert!(!check_ds_sigma_symmetry(&d, &bad, &zt).passed());
        assert!(!check_ode_sigma_symmetry(&d.as_ode(), &bad, &zt).unwrap().passed());
    }
}
