//! Invariant-based reduction of dynamical systems and ODE systems, orbital
//! reduction up to a common factor, and constants of motion.
//!
//! Reduced systems live in fresh coordinates: `w_j` is `Dep(j)` and `η_α` is
//! `Dep(n − r + α)`, with their derivatives as the usual jet symbols, so the
//! whole expression machinery applies to them unchanged. [`ReducedNamer`]
//! prints them as `w1`, `eta1'`, ...

use std::collections::BTreeSet;

use crate::ansatz::{annihilated, express_in, jacobian_rank, select_independent, AnsatzOptions, Generators};
use crate::error::{Error, Result};
use crate::expr::{Differ, Expr, Namer, Symbol, Verdict, ZeroTest, Q_MAX};
use crate::jet::{sigma_prolong, total_derivative_with, Derivation, VectorField};
use crate::symmetry::{point_derivation, ResidualReport, SymmetrySet};
use crate::system::{DynSystem, OdeSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Supplied,
    Ansatz,
}

/// Order-0 invariants `w` and first-order invariants `η` (the latter may be empty).
#[derive(Clone, Debug)]
pub struct InvariantSet {
    pub w: Vec<Expr>,
    pub eta: Vec<Expr>,
    pub provenance: Provenance,
}

impl InvariantSet {
    pub fn supplied(w: Vec<Expr>, eta: Vec<Expr>) -> Self {
        InvariantSet { w, eta, provenance: Provenance::Supplied }
    }
}

/// Prints reduced coordinates: `w`/`w1`.. for the first `nw` variables, `eta1`.. after.
#[derive(Clone, Copy, Debug)]
pub struct ReducedNamer {
    pub nw: usize,
    pub neta: usize,
}

impl ReducedNamer {
    pub fn base(&self, j: usize) -> String {
        if j <= self.nw {
            if self.nw == 1 {
                "w".into()
            } else {
                format!("w{j}")
            }
        } else {
            format!("eta{}", j - self.nw)
        }
    }
}

impl Namer for ReducedNamer {
    fn name(&self, s: &Symbol) -> Option<String> {
        match s {
            Symbol::Dep(j) => Some(self.base(*j)),
            Symbol::Jet(j, k) => Some(format!("{}{}", self.base(*j), "'".repeat(*k))),
            _ => None,
        }
    }
}

fn params_of(exprs: &[Expr]) -> Vec<(Symbol, Expr)> {
    let set: BTreeSet<Symbol> = exprs.iter().flat_map(|e| e.free_symbols()).filter(|s| matches!(s, Symbol::Param(_))).collect();
    set.into_iter().map(|s| (s.clone(), Expr::sym(s))).collect()
}

fn require_vertical(set: &SymmetrySet, zt: &ZeroTest) -> Result<()> {
    if set.all_vertical(zt) {
        Ok(())
    } else {
        Err(Error::Precondition("reduction is implemented for vertical fields only".into()))
    }
}

/// Per-invariant verdicts plus the joint independence check.
#[derive(Clone, Debug)]
pub struct InvariantReport {
    pub checks: ResidualReport,
    pub independence_rank: usize,
    pub expected_rank: usize,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.checks.passed() && self.independence_rank == self.expected_rank
    }
}

/// `X_α w_j ≡ 0`, `Y_α^{[1]} η_β ≡ 0`, and `(t, w, η)` functionally independent.
pub fn verify_invariants(set: &SymmetrySet, inv: &InvariantSet, zt: &ZeroTest) -> Result<InvariantReport> {
    let (n, r) = (set.n(), set.rank);
    if inv.w.len() != n - r {
        return Err(Error::WrongCount { expected: n - r, got: inv.w.len() });
    }
    if !inv.eta.is_empty() && inv.eta.len() != r {
        return Err(Error::WrongCount { expected: r, got: inv.eta.len() });
    }
    let prolonged = sigma_prolong(&set.fields, &set.spec, 1)?;
    let mut d = Differ::new();
    let mut items = Vec::new();
    for (al, x) in set.fields.iter().enumerate() {
        let xd = point_derivation(x);
        for (j, w) in inv.w.iter().enumerate() {
            items.push((format!("X{} w{}", al + 1, j + 1), xd.apply_with(w, &mut d)));
        }
        let y = prolonged[al].derivation(1)?;
        for (b, e) in inv.eta.iter().enumerate() {
            items.push((format!("Y{} eta{}", al + 1, b + 1), y.apply_with(e, &mut d)));
        }
    }
    let exprs: Vec<Expr> = items.iter().map(|(_, e)| e.clone()).collect();
    let verdicts = zt.all_zero(&exprs);
    let checks = ResidualReport {
        residuals: items
            .into_iter()
            .zip(verdicts)
            .map(|((label, expr), verdict)| crate::symmetry::Residual { label, expr, verdict })
            .collect(),
    };
    let mut all = vec![Expr::t()];
    all.extend(inv.w.iter().cloned());
    all.extend(inv.eta.iter().cloned());
    let mut wrt = vec![Symbol::Time];
    wrt.extend((1..=n).map(Symbol::Dep));
    if !inv.eta.is_empty() {
        wrt.extend((1..=n).map(|a| Symbol::Jet(a, 1)));
    }
    Ok(InvariantReport { checks, independence_rank: jacobian_rank(&all, &wrt, zt), expected_rank: all.len() })
}

/// Searches `n − r` order-0 invariants and, when `with_eta`, `r` first-order
/// invariants of the σ-prolonged fields, raising the ansatz degree up to
/// `opts.max_degree`.
pub fn find_invariants_ansatz(set: &SymmetrySet, with_eta: bool, augmented: bool, zt: &ZeroTest, opts: &AnsatzOptions) -> Result<InvariantSet> {
    require_vertical(set, zt)?;
    let (n, r) = (set.n(), set.rank);
    let us: Vec<Symbol> = (1..=n).map(Symbol::Dep).collect();
    let ops: Vec<Derivation> = set.fields.iter().map(point_derivation).collect();
    let mut gens = Generators::symbols(us.clone());
    if augmented {
        gens = gens.augmented();
    }
    let w = search(&ops, &gens, &[], n - r, &us, zt, opts);
    if w.len() < n - r {
        return Err(Error::NotFound(format!("{} of {} order-0 invariants up to degree {}", w.len(), n - r, opts.max_degree)));
    }
    let mut eta = Vec::new();
    if with_eta && r > 0 {
        let prolonged = sigma_prolong(&set.fields, &set.spec, 1)?;
        let ops1: Vec<Derivation> = prolonged.iter().map(|y| y.derivation(1)).collect::<Result<_>>()?;
        let mut syms = vec![Symbol::Time];
        syms.extend(us.iter().cloned());
        syms.extend((1..=n).map(|a| Symbol::Jet(a, 1)));
        let mut base = vec![Expr::t()];
        base.extend(w.iter().cloned());
        eta = search(&ops1, &Generators::symbols(syms.clone()), &base, r, &syms, zt, opts);
        if eta.len() < r {
            return Err(Error::NotFound(format!("{} of {r} first-order invariants up to degree {}", eta.len(), opts.max_degree)));
        }
    }
    Ok(InvariantSet { w, eta, provenance: Provenance::Ansatz })
}

fn search(ops: &[Derivation], gens: &Generators, base: &[Expr], want: usize, wrt: &[Symbol], zt: &ZeroTest, opts: &AnsatzOptions) -> Vec<Expr> {
    let mut chosen: Vec<Expr> = Vec::new();
    if want == 0 {
        return chosen;
    }
    for d in 1..=opts.max_degree {
        let mut o = opts.clone();
        o.max_degree = d;
        let cands = annihilated(ops, gens, zt, &o);
        let mut b = base.to_vec();
        b.extend(chosen.iter().cloned());
        chosen.extend(select_independent(&b, &cands, want - chosen.len(), wrt, zt));
        if chosen.len() == want {
            break;
        }
    }
    chosen
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReductionKind {
    Full,
    Orbital,
    OdeOrderLowering,
}

impl ReductionKind {
    pub fn label(self) -> &'static str {
        match self {
            ReductionKind::Full => "full",
            ReductionKind::Orbital => "orbital",
            ReductionKind::OdeOrderLowering => "ode-order-lowering",
        }
    }
}

/// A relation among reduced coordinates.
#[derive(Clone, Debug)]
pub enum Relation {
    /// `lhs = rhs` with `lhs` a reduced coordinate or derivative.
    Solved { lhs: Symbol, rhs: Expr },
    /// `expr = 0` with no derivatives.
    Algebraic(Expr),
}

impl Relation {
    pub fn render(&self, namer: &ReducedNamer) -> String {
        match self {
            Relation::Solved { lhs, rhs } => {
                format!("{} = {}", namer.name(lhs).unwrap_or_else(|| lhs.to_string()), crate::expr::render_with(rhs, namer))
            }
            Relation::Algebraic(e) => format!("{} = 0", crate::expr::render_with(e, namer)),
        }
    }
}

/// `η_α = rhs`; `rhs` is over `w` (as `Dep(j)`) when `in_w`, otherwise over `u`.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub index: usize,
    pub rhs: Expr,
    pub in_w: bool,
}

/// `dw_num/dw_den = psi(w)`.
#[derive(Clone, Debug)]
pub struct RatioEquation {
    pub num: usize,
    pub den: usize,
    pub psi: Expr,
}

#[derive(Clone, Debug)]
pub struct ReductionResult {
    pub kind: ReductionKind,
    pub invariants: InvariantSet,
    /// `ẇ_j = W_j(w)` (times `ω` in the orbital case).
    pub reduced: Vec<Expr>,
    pub relations: Vec<Relation>,
    pub reconstruction: Vec<Reconstruction>,
    pub omega: Option<Expr>,
    pub ratios: Vec<RatioEquation>,
    pub constants: Vec<Expr>,
}

impl ReductionResult {
    pub fn namer(&self) -> ReducedNamer {
        ReducedNamer { nw: self.invariants.w.len(), neta: self.invariants.eta.len() }
    }

    /// The reduced DS `ẇ = W(w)`, full case only.
    pub fn reduced_ds(&self) -> Option<DynSystem> {
        (self.kind == ReductionKind::Full).then(|| DynSystem { f: self.reduced.clone() })
    }

    /// Human-readable equations, one per line.
    pub fn lines(&self) -> Vec<String> {
        let nm = self.namer();
        let show = |e: &Expr| crate::expr::render_with(e, &nm);
        let mut out = Vec::new();
        match self.kind {
            ReductionKind::Full => {
                for (j, e) in self.reduced.iter().enumerate() {
                    out.push(format!("{}' = {}", nm.base(j + 1), show(e)));
                }
            }
            ReductionKind::Orbital => {
                if let Some(om) = &self.omega {
                    out.push(format!("omega = {om}"));
                }
                for (j, e) in self.reduced.iter().enumerate() {
                    out.push(format!("{}' = omega*({})", nm.base(j + 1), show(e)));
                }
                for r in &self.ratios {
                    out.push(format!("d{}/d{} = {}", nm.base(r.num), nm.base(r.den), show(&r.psi)));
                }
            }
            ReductionKind::OdeOrderLowering => out.extend(self.relations.iter().map(|r| r.render(&nm))),
        }
        for rc in &self.reconstruction {
            let rhs = if rc.in_w { show(&rc.rhs) } else { rc.rhs.to_string() };
            out.push(format!("eta{} = {}", rc.index, rhs));
        }
        for c in &self.constants {
            out.push(format!("constant: {c}"));
        }
        out
    }
}

fn w_vars(inv: &InvariantSet, extra: &[Expr]) -> Vec<(Symbol, Expr)> {
    let mut vars: Vec<(Symbol, Expr)> = inv.w.iter().enumerate().map(|(j, e)| (Symbol::Dep(j + 1), e.clone())).collect();
    let mut all = inv.w.clone();
    all.extend(extra.iter().cloned());
    vars.extend(params_of(&all));
    if all.iter().any(|e| e.depends_on(&Symbol::Time)) {
        vars.push((Symbol::Time, Expr::t()));
    }
    vars
}

/// Reduced DS `ẇ_j = W_j(w)` plus reconstruction equations.
pub fn reduce_ds(ds: &DynSystem, set: &SymmetrySet, inv: &InvariantSet, zt: &ZeroTest, opts: &AnsatzOptions) -> Result<ReductionResult> {
    require_vertical(set, zt)?;
    let mut d = Differ::new();
    let dw: Vec<Expr> = inv.w.iter().map(|w| ds.flow_derivative_with(w, &mut d)).collect();
    let vars = w_vars(inv, &dw);
    let reduced = dw.iter().map(|e| express_in(e, &vars, zt, opts)).collect::<Result<Vec<_>>>()?;
    let r1 = ds.restriction(1);
    let reconstruction = inv
        .eta
        .iter()
        .enumerate()
        .map(|(al, e)| {
            let on = e.substitute(&r1);
            let vars = w_vars(inv, std::slice::from_ref(&on));
            match express_in(&on, &vars, zt, opts) {
                Ok(rhs) => Reconstruction { index: al + 1, rhs, in_w: true },
                Err(_) => Reconstruction { index: al + 1, rhs: on, in_w: false },
            }
        })
        .collect();
    Ok(ReductionResult {
        kind: ReductionKind::Full,
        invariants: inv.clone(),
        reduced,
        relations: Vec::new(),
        reconstruction,
        omega: None,
        ratios: Vec::new(),
        constants: Vec::new(),
    })
}

/// Rewrites every equation in `t`, `w` and `η` with their derivatives and
/// solves each for its highest new derivative; first-order equations become
/// algebraic relations.
pub fn reduce_ode(ode: &OdeSystem, set: &SymmetrySet, inv: &InvariantSet, zt: &ZeroTest, opts: &AnsatzOptions) -> Result<ReductionResult> {
    require_vertical(set, zt)?;
    let nw = inv.w.len();
    let q = ode.order();
    let mut d = Differ::new();
    // (symbol, expression in u-jets, jet order in u)
    let mut jets: Vec<(Symbol, Expr, usize)> = Vec::new();
    for (idx, base, top) in inv.w.iter().enumerate().map(|(j, e)| (j + 1, e, q)).chain(inv.eta.iter().enumerate().map(|(a, e)| (nw + a + 1, e, q.saturating_sub(1)))) {
        let mut cur = base.clone();
        for k in 0..=top {
            let ord = cur.jet_order().unwrap_or(0);
            jets.push((Symbol::jet(idx, k), cur.clone(), ord));
            if k < top && ord < Q_MAX {
                cur = total_derivative_with(&cur, Q_MAX, &mut d)?;
            }
        }
    }
    let mut taken: BTreeSet<Symbol> = BTreeSet::new();
    let mut relations = Vec::new();
    for e in &ode.eqs {
        let ord = e.jet_order().unwrap_or(0);
        let mut vars: Vec<(Symbol, Expr)> = jets.iter().filter(|(_, _, o)| *o <= ord).map(|(s, x, _)| (s.clone(), x.clone())).collect();
        vars.push((Symbol::Time, Expr::t()));
        vars.extend(params_of(std::slice::from_ref(e)));
        let reduced = express_in(e, &vars, zt, opts)?;
        relations.push(solve_highest(&reduced, &mut taken, zt));
    }
    Ok(ReductionResult {
        kind: ReductionKind::OdeOrderLowering,
        invariants: inv.clone(),
        reduced: Vec::new(),
        relations,
        reconstruction: Vec::new(),
        omega: None,
        ratios: Vec::new(),
        constants: Vec::new(),
    })
}

fn solve_highest(r: &Expr, taken: &mut BTreeSet<Symbol>, zt: &ZeroTest) -> Relation {
    let mut cands: Vec<Symbol> = r.free_symbols().into_iter().filter(|s| s.order().unwrap_or(0) > 0).collect();
    if cands.is_empty() {
        let first_negative = crate::expr::render(r).starts_with('-');
        return Relation::Algebraic(if first_negative { r.neg_terms() } else { r.clone() });
    }
    cands.sort_by_key(|s| std::cmp::Reverse((s.order().unwrap(), std::cmp::Reverse(s.var_index().unwrap()))));
    let mut fallback = None;
    for s in cands {
        let c = r.diff(&s);
        let linear = zt.is_zero(&c.diff(&s)).is_zero() && !zt.is_zero(&c).is_zero();
        if !linear {
            continue;
        }
        if taken.contains(&s) {
            fallback.get_or_insert((s, c));
            continue;
        }
        taken.insert(s.clone());
        return Relation::Solved { rhs: isolate(r, &s, &c), lhs: s };
    }
    match fallback {
        Some((s, c)) => Relation::Solved { rhs: isolate(r, &s, &c), lhs: s },
        None => Relation::Algebraic(r.clone()),
    }
}

fn isolate(r: &Expr, s: &Symbol, c: &Expr) -> Expr {
    let rest = r.substitute_one(s, &Expr::zero());
    if *c == Expr::int(-1) {
        rest
    } else if c.is_const_one() {
        rest.neg_terms()
    } else {
        rest.neg_terms().div(c)
    }
}

/// `ẇ_j = ω W_j(w)` with a common factor `ω`, plus `dw_i/dw_j = Ψ(w)` for
/// every ordered pair when there are at least two invariants.
pub fn reduce_orbital(ds: &DynSystem, set: &SymmetrySet, inv: &InvariantSet, zt: &ZeroTest, opts: &AnsatzOptions) -> Result<ReductionResult> {
    require_vertical(set, zt)?;
    if inv.w.is_empty() {
        return Err(Error::Precondition("orbital reduction needs at least one invariant".into()));
    }
    let mut d = Differ::new();
    let dw: Vec<Expr> = inv.w.iter().map(|w| ds.flow_derivative_with(w, &mut d)).collect();
    let vars = w_vars(inv, &dw);
    let full: Result<Vec<Expr>> = dw.iter().map(|e| express_in(e, &vars, zt, opts)).collect();
    let (omega, reduced) = match full {
        Ok(w) => (Expr::one(), w),
        Err(_) => {
            let Some(k) = (0..dw.len()).find(|&k| !zt.is_zero(&dw[k]).is_zero()) else {
                return Err(Error::NoCommonFactor("every invariant is constant along the flow".into()));
            };
            let omega = dw[k].clone();
            let mut reduced = Vec::new();
            for (j, e) in dw.iter().enumerate() {
                if j == k {
                    reduced.push(Expr::one());
                    continue;
                }
                match express_in(&e.div(&omega), &vars, zt, opts) {
                    Ok(x) => reduced.push(x),
                    Err(err) => {
                        let witness = match zt.is_zero(&e.div(&omega).diff(&Symbol::Dep(1))) {
                            Verdict::NonZero { witness, .. } => format!(" near {witness}"),
                            _ => String::new(),
                        };
                        return Err(Error::NoCommonFactor(format!(
                            "D_t w{} / D_t w{} is not a function of the invariants{witness}: {err}",
                            j + 1,
                            k + 1
                        )));
                    }
                }
            }
            (omega, reduced)
        }
    };
    let mut ratios = Vec::new();
    for i in 0..dw.len() {
        for j in 0..dw.len() {
            if i == j || zt.is_zero(&dw[j]).is_zero() {
                continue;
            }
            let psi = express_in(&dw[i].div(&dw[j]), &vars, zt, opts)?;
            ratios.push(RatioEquation { num: i + 1, den: j + 1, psi });
        }
    }
    Ok(ReductionResult {
        kind: ReductionKind::Orbital,
        invariants: inv.clone(),
        reduced,
        relations: Vec::new(),
        reconstruction: Vec::new(),
        omega: Some(omega),
        ratios,
        constants: Vec::new(),
    })
}

/// Time-independent functions annihilated by `F` and every `X_α`.
pub fn constants_of_motion(ds: &DynSystem, set: &SymmetrySet, augmented: bool, zt: &ZeroTest, opts: &AnsatzOptions) -> Result<Vec<Expr>> {
    require_vertical(set, zt)?;
    let n = ds.n();
    let mut ext: Vec<VectorField> = vec![VectorField::vertical(ds.f.clone())];
    ext.extend(set.fields.iter().cloned());
    let r_ext = crate::symmetry::field_rank(&ext, zt)?;
    let want = n - r_ext;
    if want == 0 {
        return Ok(Vec::new());
    }
    let ops: Vec<Derivation> = ext.iter().map(point_derivation).collect();
    let us: Vec<Symbol> = (1..=n).map(Symbol::Dep).collect();
    let mut gens = Generators::symbols(us.clone());
    if augmented {
        gens = gens.augmented();
    }
    let found = search(&ops, &gens, &[], want, &us, zt, opts);
    if found.len() < want {
        return Err(Error::NotFound(format!("{} of {want} constants of motion up to degree {}", found.len(), opts.max_degree)));
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, ParseContext};
    use crate::jet::SigmaSpec;

    fn p(s: &str) -> Expr {
        parse(s, &ParseContext::new(4, 3).with_params(["a"])).unwrap()
    }

    fn vf(c: &[&str]) -> VectorField {
        VectorField::vertical(c.iter().map(|s| p(s)).collect())
    }

    fn ds(c: &[&str]) -> DynSystem {
        DynSystem::new(c.iter().map(|s| p(s)).collect()).unwrap()
    }

    fn same(zt: &ZeroTest, a: &Expr, b: &str) -> bool {
        zt.is_zero(&a.sub(&p(b))).is_zero()
    }

    #[test]
    fn example5_standard_reduction() {
        let zt = ZeroTest::default();
        let d = ds(&["u1 + u1^2*u2", "u2 + u1*u2^2"]);
        let set = SymmetrySet::new(vec![vf(&["u1", "-u2"])], SigmaSpec::zero(1), &zt).unwrap();
        let inv = find_invariants_ansatz(&set, false, false, &zt, &AnsatzOptions::default().with_degree(2)).unwrap();
        assert!(verify_invariants(&set, &inv, &zt).unwrap().passed());
        let red = reduce_ds(&d, &set, &inv, &zt, &AnsatzOptions::default()).unwrap();
        // w = u1*u2 up to scale; ẇ = 2w + 2w² for w = u1*u2.
        let scale = inv.w[0].div(&p("u1*u2"));
        let c = scale.eval(&crate::expr::Point::new().with(Symbol::Dep(1), 1.0).with(Symbol::Dep(2), 1.0)).unwrap();
        assert!((c - 1.0).abs() < 1e-12, "{}", inv.w[0]);
        assert_eq!(red.lines(), vec!["w' = 2*w + 2*w^2".to_string()]);
    }

    #[test]
    fn example3_reduction_with_parameter() {
        let zt = ZeroTest::new(40, 2).with_domain(crate::expr::SamplingBox::default().exclude(p("u3^2"), 0.1));
        let d = ds(&["u1 - u2 + u1^2 + u2*u3", "-u1 + u2 + u1*u2 + u1*u3", "a*u3 + u1*u3"]);
        let sigma = vec![vec![p("u1"), p("u3")], vec![p("u2"), Expr::zero()]];
        let set = SymmetrySet::new(vec![vf(&["u1", "u2", "u3"]), vf(&["u2", "u1", "0"])], SigmaSpec::new(sigma), &zt).unwrap();
        let inv = InvariantSet::supplied(vec![p("(u1^2 - u2^2)/u3^2")], vec![]);
        assert!(verify_invariants(&set, &inv, &zt).unwrap().passed());
        let red = reduce_ds(&d, &set, &inv, &zt, &AnsatzOptions::default()).unwrap();
        let w = Expr::u(1);
        let expect = Expr::int(2).mul(&Expr::one().sub(&p("a"))).mul(&w);
        assert!(zt.is_zero(&red.reduced[0].sub(&expect)).is_zero(), "{}", red.reduced[0]);
        let found = find_invariants_ansatz(&set, false, false, &zt, &AnsatzOptions::default().with_degree(2)).unwrap();
        assert_eq!(jacobian_rank(&[found.w[0].clone(), inv.w[0].clone()], &[Symbol::Dep(1), Symbol::Dep(2), Symbol::Dep(3)], &zt), 1);
    }

    #[test]
    fn example2_reconstruction() {
        let zt = ZeroTest::default();
        // h1 = u1*u2 + u3, h2 = u2^2 - u1, g1(w) = w^2, g2(w) = 1 + w, g3(w) = 3*w
        let d = ds(&["u1*u2 + u3 + (u1 - u3)^2", "u2^2 - u1 + 1 + u1 - u3", "u1*u2 + u3 + 3*(u1 - u3)"]);
        let sigma = vec![vec![p("u2 + 1"), p("-1")], vec![p("u1"), p("2*u2")]];
        let set = SymmetrySet::new(vec![vf(&["1", "0", "1"]), vf(&["0", "1", "0"])], SigmaSpec::new(sigma), &zt).unwrap();
        assert!(crate::symmetry::check_ds_sigma_symmetry(&d, &set, &zt).passed());
        let inv = InvariantSet::supplied(vec![p("u1 - u3")], vec![p("u1' - u1*u2 - u3"), p("u2' - u2^2 + u1")]);
        assert!(verify_invariants(&set, &inv, &zt).unwrap().passed());
        assert!(matches!(verify_invariants(&set, &InvariantSet::supplied(vec![p("u1")], vec![]), &zt).unwrap(), r if !r.passed()));
        let red = reduce_ds(&d, &set, &inv, &zt, &AnsatzOptions::default()).unwrap();
        assert!(same(&zt, &red.reduced[0], "u1^2 - 3*u1"));
        assert!(red.reconstruction.iter().all(|r| r.in_w));
        assert!(same(&zt, &red.reconstruction[0].rhs, "u1^2"));
        assert!(same(&zt, &red.reconstruction[1].rhs, "1 + u1"));
    }

    fn example1(h: [&str; 3], first_order: Option<&str>) -> (OdeSystem, SymmetrySet, InvariantSet) {
        let zt = ZeroTest::default();
        let ctx = ParseContext::new(3, 3)
            .with_alias("w", p("u1 - u2 - u3"))
            .with_alias("eta1", p("u1 - u2 - u1' + t*u2"))
            .with_alias("eta2", p("u1 - u2 - u2'"));
        let hp = |s: &str| parse(s, &ctx).unwrap();
        let mut solved = std::collections::BTreeMap::new();
        match first_order {
            None => {
                solved.insert(Symbol::Jet(1, 3), p("t*u{2,2} + t*u2' + 2*u2' + u2").add(&hp(h[0])));
            }
            Some(h0) => {
                solved.insert(Symbol::Jet(1, 1), p("u1 - u2 + t*u2").add(&hp(h0)));
            }
        }
        solved.insert(Symbol::Jet(2, 2), p("u1' - u2'").add(&hp(h[1])));
        solved.insert(Symbol::Jet(3, 2), p("u2 + t*u2'").add(&hp(h[2])));
        let ode = OdeSystem::from_solved(solved).unwrap();
        let sigma = vec![vec![p("0"), p("t")], vec![p("1"), p("0")]];
        let set = SymmetrySet::new(vec![vf(&["1", "1", "0"]), vf(&["1", "0", "1"])], SigmaSpec::new(sigma), &zt).unwrap();
        let inv = InvariantSet::supplied(vec![p("u1 - u2 - u3")], vec![p("u1 - u2 - u1' + t*u2"), p("u1 - u2 - u2'")]);
        (ode, set, inv)
    }

    #[test]
    fn example1_order_lowering() {
        let zt = ZeroTest::default();
        let (ode, set, inv) = example1(["w*eta2", "t + eta1", "eta1^2"], None);
        assert!(crate::symmetry::check_ode_sigma_symmetry(&ode, &set, &zt).unwrap().passed());
        assert!(verify_invariants(&set, &inv, &zt).unwrap().passed());
        let red = reduce_ode(&ode, &set, &inv, &zt, &AnsatzOptions::default()).unwrap();
        let lines: Vec<String> = red.relations.iter().map(|r| r.render(&red.namer())).collect();
        let Relation::Solved { lhs, rhs } = &red.relations[0] else { panic!("{lines:?}") };
        assert_eq!(*lhs, Symbol::Jet(2, 2), "{lines:?}");
        assert!(same(&zt, rhs, "-u2' + u3' - u1*u3"), "{lines:?}");
        let Relation::Solved { lhs, rhs } = &red.relations[1] else { panic!() };
        assert_eq!(*lhs, Symbol::Jet(3, 1));
        assert!(same(&zt, rhs, "-t - u2"), "{lines:?}");
        let Relation::Solved { lhs, rhs } = &red.relations[2] else { panic!() };
        assert_eq!(*lhs, Symbol::Jet(1, 2));
        assert!(same(&zt, rhs, "-u2' + u3' - u2^2"), "{lines:?}");
    }

    #[test]
    fn example1_first_order_equation_becomes_algebraic() {
        let zt = ZeroTest::default();
        let (ode, set, inv) = example1(["0", "w", "w"], Some("eta2^2 + w"));
        let red = reduce_ode(&ode, &set, &inv, &zt, &AnsatzOptions::default()).unwrap();
        let Relation::Algebraic(e) = &red.relations[0] else { panic!("{:?}", red.relations) };
        assert!(same(&zt, e, "u2 + u3^2 + u1"), "{}", e);
        assert_eq!(red.relations[0].render(&red.namer()), "w + eta1 + eta2^2 = 0");
    }

    #[test]
    fn example9_orbital_ratios() {
        let zt = ZeroTest::default();
        let d = ds(&["1", "u1 + u3/u2", "(u4 + u1*u3)/u2", "1 + u1*u4/u2"]);
        let set = SymmetrySet::new(vec![vf(&["1", "0", "0", "0"]), vf(&["0", "u2", "u3", "u4"])], SigmaSpec::zero(2), &zt).unwrap();
        let inv = InvariantSet::supplied(vec![p("u2/u3"), p("u4/u3")], vec![]);
        let red = reduce_orbital(&d, &set, &inv, &zt, &AnsatzOptions::default()).unwrap();
        let r12 = red.ratios.iter().find(|r| (r.num, r.den) == (1, 2)).unwrap();
        assert_eq!(crate::expr::render_with(&r12.psi, &red.namer()), "(1 - w1*w2)/(w1 - w2^2)");
        assert!(!red.omega.as_ref().unwrap().is_const_one());
    }

    #[test]
    fn constants_of_a_scaling_system() {
        let zt = ZeroTest::default();
        let d = ds(&["u1", "u2", "u3"]);
        let set = SymmetrySet::new(vec![vf(&["u1", "-u2", "0"])], SigmaSpec::zero(1), &zt).unwrap();
        let cs = constants_of_motion(&d, &set, false, &zt, &AnsatzOptions::default().with_degree(2)).unwrap();
        assert_eq!(cs.len(), 1);
        let c = &cs[0];
        assert!(zt.is_zero(&d.field().apply(c)).is_zero());
        assert!(zt.is_zero(&point_derivation(&set.fields[0]).apply(c)).is_zero());
        let d2 = ds(&["u1", "u2"]);
        let set2 = SymmetrySet::new(vec![vf(&["u1", "0"])], SigmaSpec::zero(1), &zt).unwrap();
        assert!(constants_of_motion(&d2, &set2, false, &zt, &AnsatzOptions::default()).unwrap().is_empty());
    }
}
