//! The per-problem pipeline: construction, determining equations,
//! invariants, reduction, DS→ODE transfer and trajectory checks.

use rayon::prelude::*;

use sigmared::ansatz::{jacobian_rank, AnsatzOptions};
use sigmared::error::{Error, Result};
use sigmared::expr::{render, render_with, Evaluator, Expr, Point, Symbol, Verdict, ZeroTest};
use sigmared::integrate::{integrate, integrate_checked, project, rk4, Trajectory};
use sigmared::jet::SigmaSpec;
use sigmared::reduction::{
    constants_of_motion, find_invariants_ansatz, reduce_ds, reduce_ode, reduce_orbital, verify_invariants, InvariantSet, ReductionKind, ReductionResult, Relation,
};
use sigmared::symmetry::{check_ds_sigma_symmetry, check_ode_sigma_symmetry, check_prolonged_involution, classify, construct_sigma_symmetric, infer_sigma, scale_to_orbital, scaled_spec, ResidualReport, SymmetrySet};
use sigmared::system::DynSystem;
use sigmared::transform::{ds_to_ode, ds_to_ode_deautonomized, ode_to_ds, render_y, transfer_reduction, NewtonState, OdeConversion};

use crate::problem::{Integration, Kind, Problem};
use crate::report::{Record, Report, Status};

/// Trajectory agreement bound between projected and reduced solutions.
pub const TRAJ_TOL: f64 = 1e-5;
/// Reconstruction and constant-drift bound.
pub const DRIFT_TOL: f64 = 1e-6;
/// ODE residual bound along closed-form solutions.
pub const SOLUTION_TOL: f64 = 1e-8;

/// Which parts of the pipeline run. Construction always does, since the
/// later stages need its σ data.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stages {
    pub determining: bool,
    pub reduction: bool,
    pub transform: bool,
    pub trajectories: bool,
}

impl Stages {
    pub const ALL: Stages = Stages { determining: true, reduction: true, transform: true, trajectories: true };
    pub const CONSTRUCT: Stages = Stages { determining: false, reduction: false, transform: false, trajectories: false };
    pub const CHECK: Stages = Stages { determining: true, ..Stages::CONSTRUCT };
    pub const REDUCE: Stages = Stages { reduction: true, ..Stages::CHECK };
    pub const TRANSFORM: Stages = Stages { transform: true, ..Stages::CONSTRUCT };
    /// Transform needs the reduction for transfers.
    pub const TO_ODE: Stages = Stages { transform: true, ..Stages::REDUCE };
}

#[derive(Clone, Debug)]
pub struct Options {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub eps_zero: Option<f64>,
    pub stages: Stages,
}

impl Default for Options {
    fn default() -> Self {
        Options { seed: None, trials: None, eps_zero: None, stages: Stages::ALL }
    }
}

pub fn zero_test(p: &Problem, opts: &Options) -> ZeroTest {
    let mut zt = ZeroTest::new(opts.trials.unwrap_or(p.trials), opts.seed.unwrap_or(p.seed)).with_domain(p.domain.clone());
    if let Some(eps) = opts.eps_zero {
        zt.eps_zero = eps;
    }
    zt
}

fn witness(v: &Verdict) -> Option<String> {
    match v {
        Verdict::NonZero { witness, value } => Some(format!("{value:e} at {witness}")),
        _ => None,
    }
}

fn residual_record(check: &str, rep: &ResidualReport) -> Record {
    let mut r = Record::pass_if(check, rep.passed()).with("max_abs", rep.max_abs()).with("residuals", rep.residuals.len());
    if let Some(bad) = rep.failures().next() {
        r = r.with("first_failure", bad.label.clone()).with("verdict", bad.verdict.label());
        if let Some(w) = witness(&bad.verdict) {
            r = r.with("witness", w);
        }
    }
    r
}

fn compare(check: &str, got: &Expr, want: &Expr, zt: &ZeroTest) -> Record {
    let v = zt.is_zero(&got.sub(want));
    let mut r = Record::pass_if(check, v.is_zero()).with("max_abs", v.max_abs());
    if let Some(w) = witness(&v) {
        r = r.with("witness", w);
    }
    r
}

fn err_record(check: &str, e: &Error) -> Record {
    Record::new(check, Status::Fail).with("error", e.to_string())
}

/// State shared by the later stages.
struct Stage {
    ds: Option<DynSystem>,
    set: Option<SymmetrySet>,
    inv: Option<InvariantSet>,
    red: Option<ReductionResult>,
    conv: Option<OdeConversion>,
}

/// The system after any construction, and the symmetry set with its σ data.
/// `None` when a failure has already been recorded.
pub fn prepare(p: &Problem, zt: &ZeroTest, rep: &mut Report) -> Option<(Option<DynSystem>, Option<SymmetrySet>)> {
    let mut st = Stage { ds: p.ds.clone(), set: None, inv: None, red: None, conv: None };
    let spec = construct(p, zt, rep, &mut st)?;
    if p.fields.is_empty() {
        rep.push(Record::new("symmetries", Status::Info).with("count", 0usize));
        return Some((st.ds, None));
    }
    match SymmetrySet::new(p.fields.clone(), spec, zt) {
        Ok(set) => {
            let mut r = Record::pass_if("involution", set.involution_verified).with("rank", set.rank).with("s", set.s());
            if set.s() > 1 {
                r = r.with("nu", format_nu(&set));
            }
            rep.push(r);
            Some((st.ds, Some(set)))
        }
        Err(e) => {
            rep.push(err_record("involution", &e));
            None
        }
    }
}

pub fn run_problem(p: &Problem, opts: &Options) -> Report {
    let zt = zero_test(p, opts);
    let stages = opts.stages;
    let mut rep = Report::new(&p.name, &p.tags, zt.seed, zt.trials);
    let Some((ds, set)) = prepare(p, &zt, &mut rep) else { return rep };
    let mut st = Stage { ds, set, inv: None, red: None, conv: None };
    if let Some(set) = st.set.clone().filter(|_| stages.determining) {
        let set = &set;
        determining(p, set, &zt, &mut rep, &st);
        let class = classify(&set.spec, &zt).label(set.s());
        rep.push(match &p.reduction.class {
            Some(want) => Record::pass_if("class", want == class).with("class", class).with("expected", want.as_str()),
            None => Record::new("class", Status::Info).with("class", class),
        });
        if stages.reduction {
            invariants(p, set, &zt, &mut rep, &mut st);
            reduction(p, set, &zt, &mut rep, &mut st);
        }
    }
    if stages.transform {
        transform(p, &zt, &mut rep, &mut st);
    }
    if stages.trajectories {
        if let (Some(it), Some(ds)) = (&p.integration, &st.ds) {
            trajectories(p, it, ds, &zt, &mut rep, &st);
        }
    }
    rep
}

fn format_nu(set: &SymmetrySet) -> String {
    let nu = set.nu();
    let s = set.s();
    let mut parts = Vec::new();
    for a in 0..s {
        for b in a + 1..s {
            let c: Vec<String> = nu[a][b].iter().map(render).collect();
            parts.push(format!("[X{},X{}]: ({})", a + 1, b + 1, c.join(", ")));
        }
    }
    parts.join("; ")
}

/// Builds the σ data, applying the constructions when requested.
fn construct(p: &Problem, zt: &ZeroTest, rep: &mut Report, st: &mut Stage) -> Option<SigmaSpec> {
    let s = p.fields.len();
    let given = SigmaSpec { sigma: p.sigma.clone().unwrap_or_else(|| SigmaSpec::zero(s).sigma), theta: p.theta.clone(), nu: p.nu.clone() };
    if let (Some(orbital), None) = (p.infer_sigma, &p.construct) {
        let Some(ds) = &p.ds else {
            rep.push(Record::new("sigma.inferred", Status::Fail).with("error", "inference needs a dynamical system"));
            return None;
        };
        return match infer_sigma(ds, &p.fields, orbital, zt) {
            Ok(spec) => {
                let spec = SigmaSpec { nu: p.nu.clone(), ..spec };
                let mut r = Record::new("sigma.inferred", Status::Info).with("sigma", matrix(&spec.sigma));
                if let Some(t) = &spec.theta {
                    r = r.with("theta", list(t));
                }
                rep.push(r);
                Some(spec)
            }
            Err(e) => {
                rep.push(err_record("sigma.inferred", &e));
                None
            }
        };
    }
    let Some(c) = &p.construct else { return Some(given) };
    let Some(base) = &p.ds else {
        rep.push(Record::new("construct", Status::Fail).with("error", "constructions need a dynamical system"));
        return None;
    };
    let mut ds = base.clone();
    let mut spec = SigmaSpec { sigma: SigmaSpec::zero(s).sigma, theta: None, nu: p.nu.clone() };
    if let Some(mu) = &c.mu {
        let set = match SymmetrySet::new(p.fields.clone(), SigmaSpec { sigma: SigmaSpec::zero(s).sigma, theta: None, nu: p.nu.clone() }, zt) {
            Ok(set) => set,
            Err(e) => {
                rep.push(err_record("construct.sigma-symmetric", &e));
                return None;
            }
        };
        match construct_sigma_symmetric(&ds, &set, mu, zt) {
            Ok((d, sp)) => {
                rep.push(Record::new("construct.sigma-symmetric", Status::Info).with("f", list(&d.f)).with("sigma", matrix(&sp.sigma)));
                ds = d;
                spec = sp;
            }
            Err(e) => {
                rep.push(err_record("construct.sigma-symmetric", &e));
                return None;
            }
        }
    }
    if let Some(rho) = &c.rho {
        match scale_to_orbital(&ds, rho, zt) {
            Ok(d) => {
                spec = scaled_spec(&spec, &p.fields, rho);
                let theta = spec.theta.as_ref().map(|t| list(t)).unwrap_or_default();
                rep.push(Record::new("construct.orbital", Status::Info).with("f", list(&d.f)).with("theta", theta).with("sigma", matrix(&spec.sigma)));
                ds = d;
            }
            Err(e) => {
                rep.push(err_record("construct.orbital", &e));
                return None;
            }
        }
    }
    if let Some(expect) = &c.expect {
        let diffs: Vec<Expr> = ds.f.iter().zip(expect).map(|(a, b)| a.sub(b)).collect();
        let v = zt.all_zero_joint(&diffs);
        let mut r = Record::pass_if("construct.system", v.is_zero() && expect.len() == ds.n()).with("max_abs", v.max_abs());
        if let Some(w) = witness(&v) {
            r = r.with("witness", w);
        }
        rep.push(r);
    }
    if let Some(display) = &c.display {
        let diffs: Vec<Expr> = ds.f.iter().zip(display).map(|(a, b)| a.sub(b)).collect();
        let v = zt.all_zero_joint(&diffs);
        rep.push(Record::new("construct.printed-form", Status::Info).with("agrees", if v.is_zero() { "yes" } else { "no" }).with("verdict", v.label()));
    }
    if let Some(sig) = &p.sigma {
        let diffs: Vec<Expr> = sig.iter().flatten().zip(spec.sigma.iter().flatten()).map(|(a, b)| a.sub(b)).collect();
        let v = zt.all_zero_joint(&diffs);
        rep.push(Record::pass_if("construct.sigma", v.is_zero()).with("max_abs", v.max_abs()));
    }
    if let (Some(want), Some(got)) = (&p.theta, &spec.theta) {
        let diffs: Vec<Expr> = want.iter().zip(got).map(|(a, b)| a.sub(b)).collect();
        let v = zt.all_zero_joint(&diffs);
        rep.push(Record::pass_if("construct.theta", v.is_zero()).with("max_abs", v.max_abs()));
    }
    st.ds = Some(ds);
    Some(spec)
}

fn list(v: &[Expr]) -> String {
    format!("({})", v.iter().map(render).collect::<Vec<_>>().join(", "))
}

fn matrix(m: &[Vec<Expr>]) -> String {
    format!("[{}]", m.iter().map(|r| list(r)).collect::<Vec<_>>().join(", "))
}

fn determining(p: &Problem, set: &SymmetrySet, zt: &ZeroTest, rep: &mut Report, st: &Stage) {
    match p.kind {
        Kind::Ds => {
            let ds = st.ds.as_ref().expect("ds problems carry a system");
            rep.push(residual_record("determining", &check_ds_sigma_symmetry(ds, set, zt)));
            match check_prolonged_involution(ds, set, zt) {
                Ok(v) => rep.push(Record::new("prolonged-involution", Status::Info).with("verdict", v.label())),
                Err(e) => rep.push(Record::new("prolonged-involution", Status::Info).with("error", e.to_string())),
            }
        }
        Kind::Ode => match check_ode_sigma_symmetry(p.ode.as_ref().unwrap(), set, zt) {
            Ok(r) => rep.push(residual_record("determining", &r)),
            Err(e) => rep.push(err_record("determining", &e)),
        },
    }
}

fn invariants(p: &Problem, set: &SymmetrySet, zt: &ZeroTest, rep: &mut Report, st: &mut Stage) {
    let spec = &p.invariants;
    let opts = AnsatzOptions::default().with_degree(spec.degree);
    let supplied = (!spec.w.is_empty()).then(|| InvariantSet::supplied(spec.w.clone(), spec.eta.clone()));
    if let Some(inv) = &supplied {
        match verify_invariants(set, inv, zt) {
            Ok(r) => {
                let mut rec = Record::pass_if("invariants.verify", r.passed()).with("max_abs", r.checks.max_abs()).with("rank", r.independence_rank).with("expected_rank", r.expected_rank);
                if let Some(bad) = r.checks.failures().next() {
                    rec = rec.with("first_failure", bad.label.clone());
                }
                rep.push(rec);
            }
            Err(e) => rep.push(err_record("invariants.verify", &e)),
        }
    }
    if spec.discover {
        match find_invariants_ansatz(set, !spec.eta.is_empty(), spec.augmented, zt, &opts) {
            Ok(found) => {
                let mut ok = true;
                if let Some(inv) = &supplied {
                    ok = same_span(&found.w, &inv.w, p.n, false, zt) && (inv.eta.is_empty() || same_span_with(&found.eta, &inv.eta, &inv.w, p.n, zt));
                }
                let mut r = Record::pass_if("invariants.discover", ok).with("w", list(&found.w));
                if !found.eta.is_empty() {
                    r = r.with("eta", list(&found.eta));
                }
                rep.push(r);
                if supplied.is_none() {
                    st.inv = Some(found);
                }
            }
            Err(e) => rep.push(err_record("invariants.discover", &e)),
        }
    }
    if supplied.is_some() {
        st.inv = supplied;
    }
}

fn jet_symbols(n: usize, first_order: bool) -> Vec<Symbol> {
    let mut v = vec![Symbol::Time];
    v.extend((1..=n).map(Symbol::Dep));
    if first_order {
        v.extend((1..=n).map(|a| Symbol::Jet(a, 1)));
    }
    v
}

/// Whether `a` and `b` are functions of each other (equal Jacobian ranks).
fn same_span(a: &[Expr], b: &[Expr], n: usize, first_order: bool, zt: &ZeroTest) -> bool {
    let wrt = jet_symbols(n, first_order);
    let all: Vec<Expr> = a.iter().chain(b).cloned().collect();
    let r = jacobian_rank(&all, &wrt, zt);
    r == jacobian_rank(a, &wrt, zt) && r == jacobian_rank(b, &wrt, zt)
}

fn same_span_with(a: &[Expr], b: &[Expr], base: &[Expr], n: usize, zt: &ZeroTest) -> bool {
    let ext = |x: &[Expr]| {
        let mut v = vec![Expr::t()];
        v.extend(base.iter().cloned());
        v.extend(x.iter().cloned());
        v
    };
    same_span(&ext(a), &ext(b), n, true, zt)
}

fn reduction(p: &Problem, set: &SymmetrySet, zt: &ZeroTest, rep: &mut Report, st: &mut Stage) {
    let Some(inv) = st.inv.clone() else { return };
    let opts = AnsatzOptions::default();
    let orbital = set.spec.theta.as_ref().is_some_and(|t| !zt.all_zero_joint(t).is_zero());
    let result = match p.kind {
        Kind::Ode => reduce_ode(p.ode.as_ref().unwrap(), set, &inv, zt, &opts),
        Kind::Ds if orbital => reduce_orbital(st.ds.as_ref().unwrap(), set, &inv, zt, &opts),
        Kind::Ds => reduce_ds(st.ds.as_ref().unwrap(), set, &inv, zt, &opts),
    };
    let mut red = match result {
        Ok(r) => r,
        Err(e) => {
            rep.push(err_record("reduction", &e));
            return;
        }
    };
    let nm = red.namer();
    let show = |e: &Expr| render_with(e, &nm);
    rep.push(Record::new("reduction", Status::Info).with("kind", red.kind.label()).with("equations", red.lines().join("; ")));
    let rz = ZeroTest::new(zt.trials, zt.seed);
    for (j, want) in &p.reduction.reduced {
        let rec = match red.reduced.get(j - 1) {
            Some(got) => compare(&format!("reduction.reduced{j}"), got, want, &rz).with("got", show(got)),
            None => Record::new(format!("reduction.reduced{j}"), Status::Fail).with("error", "no such reduced equation"),
        };
        rep.push(rec);
    }
    for (i, j, want) in &p.reduction.ratios {
        let check = format!("reduction.ratio.{i}.{j}");
        let rec = match red.ratios.iter().find(|r| (r.num, r.den) == (*i, *j)) {
            Some(r) => compare(&check, &r.psi, want, &rz).with("got", show(&r.psi)),
            None => Record::new(check, Status::Fail).with("error", "ratio not produced"),
        };
        rep.push(rec);
    }
    for (a, want) in &p.reduction.reconstruction {
        let check = format!("reduction.eta{a}");
        let rec = match red.reconstruction.iter().find(|r| r.index == *a && r.in_w) {
            Some(r) => compare(&check, &r.rhs, want, &rz).with("got", show(&r.rhs)),
            None => Record::new(check, Status::Fail).with("error", "no reconstruction in terms of w"),
        };
        rep.push(rec);
    }
    for (i, lhs, want) in &p.reduction.relations {
        let check = format!("reduction.relation{i}");
        let rec = match (red.relations.get(i - 1), lhs) {
            (Some(Relation::Solved { lhs: got_l, rhs }), Some(want_l)) if got_l == want_l => compare(&check, rhs, want, &rz).with("got", red.relations[i - 1].render(&nm)),
            (Some(Relation::Algebraic(e)), None) => {
                let plus = rz.is_zero(&e.sub(want));
                let minus = rz.is_zero(&e.add(want));
                Record::pass_if(&check, plus.is_zero() || minus.is_zero()).with("got", red.relations[i - 1].render(&nm))
            }
            (Some(r), _) => Record::new(check, Status::Fail).with("got", r.render(&nm)),
            (None, _) => Record::new(check, Status::Fail).with("error", "no such relation"),
        };
        rep.push(rec);
    }
    if p.invariants.constants {
        let ds = st.ds.as_ref().unwrap();
        let opts = AnsatzOptions::default().with_degree(p.invariants.degree);
        match constants_of_motion(ds, set, p.invariants.augmented, zt, &opts) {
            Ok(cs) => {
                let field = ds.field();
                let mut checks: Vec<Expr> = cs.iter().map(|c| field.apply(c)).collect();
                for x in &set.fields {
                    let xd = sigmared::symmetry::point_derivation(x);
                    checks.extend(cs.iter().map(|c| xd.apply(c)));
                }
                let v = zt.all_zero_joint(&checks);
                let count_ok = p.reduction.constants.is_none_or(|k| k == cs.len());
                rep.push(Record::pass_if("constants", v.is_zero() && count_ok).with("count", cs.len()).with("constants", list(&cs)));
                red.constants = cs;
            }
            Err(e) => rep.push(err_record("constants", &e)),
        }
    }
    st.red = Some(red);
}

fn transform(p: &Problem, zt: &ZeroTest, rep: &mut Report, st: &mut Stage) {
    let Some(t) = &p.transform else { return };
    let Some(ds) = &st.ds else {
        rep.push(Record::new("transform", Status::Fail).with("error", "DS→ODE needs a dynamical system"));
        return;
    };
    let conv = match t.clock {
        Some(clock) => ds_to_ode_deautonomized(ds, clock, t.pivot, zt),
        None => ds_to_ode(ds, t.pivot, zt),
    };
    let conv = match conv {
        Ok(c) => c,
        Err(e) => {
            rep.push(err_record("transform.ode", &e));
            return;
        }
    };
    let yz = ZeroTest::new(zt.trials, zt.seed);
    match (conv.rhs(), &t.ode) {
        (Some(rhs), Some(want)) => rep.push(compare("transform.ode", rhs, want, &yz).with("order", conv.order())),
        (Some(rhs), None) => rep.push(Record::new("transform.ode", Status::Info).with("order", conv.order()).with("rhs", render_y(rhs))),
        (None, _) => rep.push(Record::new("transform.ode", if t.ode.is_some() { Status::Fail } else { Status::Info }).with("inverse", "numeric only")),
    }
    if let (Some(rhs), Some(disp)) = (conv.rhs(), &t.ode_display) {
        let v = yz.is_zero(&rhs.sub(disp));
        rep.push(Record::new("transform.printed-form", Status::Info).with("agrees", if v.is_zero() { "yes" } else { "no" }).with("verdict", v.label()));
    }
    if let Some(ode) = &conv.ode {
        let back = ode_to_ds(ode).and_then(|d| ds_to_ode(&d, 1, &yz));
        match back {
            Ok(c2) => rep.push(compare("transform.round-trip", c2.rhs().unwrap_or(&Expr::zero()), conv.rhs().unwrap(), &yz)),
            Err(e) => rep.push(err_record("transform.round-trip", &e)),
        }
    }
    if let Some(red) = &st.red {
        match transfer_reduction(&conv, red, zt) {
            Ok(items) => {
                rep.push(Record::new("transform.transfer", Status::Info).with("relations", items.iter().map(|i| i.render()).collect::<Vec<_>>().join("; ")));
                for (label, want) in &t.transfer {
                    let check = format!("transform.transfer.{label}");
                    rep.push(match items.iter().find(|i| &i.label == label) {
                        Some(i) => compare(&check, &i.expr, want, &yz).with("got", render_y(&i.expr)),
                        None => Record::new(check, Status::Fail).with("error", "nothing transferred under this label"),
                    });
                }
            }
            Err(e) => rep.push(err_record("transform.transfer", &e)),
        }
    } else {
        for (label, want) in &t.transfer {
            let check = format!("transform.transfer.{label}");
            rep.push(match p.invariants.w.iter().position(|_| label.starts_with('w')).and(conv.transfer(&p.invariants.w[0], zt).ok()) {
                Some(e) => compare(&check, &e, want, &yz),
                None => Record::new(check, Status::Fail).with("error", "no reduction to transfer"),
            });
        }
    }
    if let (Some((y, span)), Some(rhs)) = (&t.solution, conv.rhs()) {
        rep.push(solution_residual(y, *span, rhs, conv.order()));
    }
    st.conv = Some(conv);
}

/// `y^(n) − p(t, y, ..., y^(n−1))` along a closed-form `y(t)` on 100 grid points.
fn solution_residual(y: &Expr, span: (f64, f64), rhs: &Expr, order: usize) -> Record {
    let mut ders = vec![y.clone()];
    for k in 1..=order {
        let d = ders[k - 1].diff(&Symbol::Time);
        ders.push(d);
    }
    let mut worst = 0.0f64;
    let mut evaluated = 0usize;
    for i in 0..100 {
        let t = span.0 + (span.1 - span.0) * i as f64 / 99.0;
        let pt = Point::new().with(Symbol::Time, t);
        let vals: Option<Vec<f64>> = ders.iter().map(|d| d.eval(&pt).ok()).collect();
        let Some(vals) = vals else { continue };
        let mut q = Point::new().with(Symbol::Time, t);
        for (k, v) in vals.iter().take(order).enumerate() {
            q.set(Symbol::jet(1, k), *v);
        }
        let Ok(pv) = rhs.eval(&q) else { continue };
        worst = worst.max((vals[order] - pv).abs());
        evaluated += 1;
    }
    Record::pass_if("transform.solution", evaluated >= 90 && worst < SOLUTION_TOL).with("max_abs", worst).with("points", evaluated)
}

fn initial_states(p: &Problem, it: &Integration, ds: &DynSystem, seed: u64) -> Vec<(Vec<f64>, Point)> {
    let mut exprs: Vec<Expr> = (1..=ds.n()).map(Expr::u).collect();
    exprs.extend(ds.f.iter().cloned());
    exprs.extend(p.invariants.w.iter().cloned());
    exprs.extend(p.params.iter().map(|s| Expr::param(s)));
    let zt = ZeroTest::new(1, seed ^ 0x005e_ed1c).with_domain(it.domain.clone());
    zt.points(&exprs, it.count)
        .into_iter()
        .map(|pt| {
            let u0 = (1..=ds.n()).map(|a| pt.get(&Symbol::Dep(a)).unwrap()).collect();
            let mut params = Point::new();
            for s in &p.params {
                let sym = Symbol::param(s);
                params.set(sym.clone(), it.params.get(&sym).or(pt.get(&sym)).unwrap());
            }
            (u0, params)
        })
        .collect()
}

#[derive(Default, Clone, Copy)]
struct Worst {
    reduced: f64,
    reconstruction: f64,
    ratio: f64,
    constants: f64,
    transport: f64,
}

impl Worst {
    fn max(self, o: Worst) -> Worst {
        Worst {
            reduced: self.reduced.max(o.reduced),
            reconstruction: self.reconstruction.max(o.reconstruction),
            ratio: self.ratio.max(o.ratio),
            constants: self.constants.max(o.constants),
            transport: self.transport.max(o.transport),
        }
    }
}

fn trajectories(p: &Problem, it: &Integration, ds: &DynSystem, zt: &ZeroTest, rep: &mut Report, st: &Stage) {
    let starts = initial_states(p, it, ds, zt.seed);
    if starts.len() < it.count {
        rep.push(Record::new("trajectory", Status::Fail).with("error", format!("only {} admissible initial points", starts.len())));
        return;
    }
    let results: Vec<Result<Worst>> = starts.par_iter().map(|(u0, params)| one_trajectory(it, ds, u0, params, st)).collect();
    let mut worst = Worst::default();
    for r in results {
        match r {
            Ok(w) => worst = worst.max(w),
            Err(e) => {
                rep.push(err_record("trajectory", &e));
                return;
            }
        }
    }
    let count = starts.len();
    if let Some(red) = &st.red {
        match red.kind {
            ReductionKind::Full => {
                rep.push(Record::pass_if("trajectory.reduced", worst.reduced < TRAJ_TOL).with("sup", worst.reduced).with("runs", count));
                if red.reconstruction.iter().any(|r| r.in_w) {
                    rep.push(Record::pass_if("trajectory.reconstruction", worst.reconstruction < DRIFT_TOL).with("sup", worst.reconstruction).with("runs", count));
                }
            }
            ReductionKind::Orbital => {
                rep.push(Record::pass_if("trajectory.ratio", worst.ratio < TRAJ_TOL).with("sup", worst.ratio).with("runs", count));
            }
            ReductionKind::OdeOrderLowering => {}
        }
        if !red.constants.is_empty() {
            rep.push(Record::pass_if("trajectory.constants", worst.constants < DRIFT_TOL).with("relative_drift", worst.constants).with("runs", count));
        }
    }
    if st.conv.is_some() {
        rep.push(Record::pass_if("trajectory.transport", worst.transport < TRAJ_TOL).with("sup", worst.transport).with("runs", count));
    }
}

fn one_trajectory(it: &Integration, ds: &DynSystem, u0: &[f64], params: &Point, st: &Stage) -> Result<Worst> {
    let full = integrate_checked(ds, u0, params, it.span, it.step)?;
    let mut w = Worst::default();
    if let Some(red) = &st.red {
        let inv = &red.invariants;
        let proj = project(&inv.w, &full, params)?;
        match red.kind {
            ReductionKind::Full => {
                let reduced = integrate(&red.reduced_ds().unwrap(), &proj[0], params, it.span, full.step)?;
                w.reduced = sup_diff(&proj, &reduced);
                let recon: Vec<_> = red.reconstruction.iter().filter(|r| r.in_w).collect();
                if !recon.is_empty() {
                    let etas: Vec<Expr> = recon.iter().map(|r| ds.restrict(&inv.eta[r.index - 1])).collect();
                    let along = project(&etas, &full, params)?;
                    let rhs: Vec<Expr> = recon.iter().map(|r| r.rhs.clone()).collect();
                    let predicted = project(&rhs, &reduced, params)?;
                    w.reconstruction = along.iter().zip(&predicted).flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max);
                }
            }
            ReductionKind::Orbital => {
                let dw: Vec<Expr> = inv.w.iter().map(|e| ds.flow_derivative(e)).collect();
                let rates = project(&dw, &full, params)?;
                let stride = (full.states.len() / 200).max(1);
                for i in (0..full.states.len()).step_by(stride) {
                    let mut wp = params.clone();
                    wp.set(Symbol::Time, full.times[i]);
                    for (j, v) in proj[i].iter().enumerate() {
                        wp.set(Symbol::Dep(j + 1), *v);
                    }
                    let mut ev = Evaluator::new(&wp);
                    for r in &red.ratios {
                        let psi = ev.eval(&r.psi)?;
                        let res = (rates[i][r.num - 1] - psi * rates[i][r.den - 1]).abs();
                        w.ratio = w.ratio.max(res);
                    }
                }
            }
            ReductionKind::OdeOrderLowering => {}
        }
        if !red.constants.is_empty() {
            let vals = project(&red.constants, &full, params)?;
            for k in 0..red.constants.len() {
                let c0 = vals[0][k];
                let scale = c0.abs().max(1e-12);
                let drift = vals.iter().map(|v| (v[k] - c0).abs()).fold(0.0, f64::max) / scale;
                w.constants = w.constants.max(drift);
            }
        }
    }
    if let Some(conv) = &st.conv {
        w.transport = transport(conv, it, u0, params)?;
    }
    Ok(w)
}

fn sup_diff(a: &[Vec<f64>], b: &Trajectory) -> f64 {
    a.iter().zip(&b.states).flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs())).fold(0.0, f64::max)
}

/// Integrates the converted system and the scalar ODE from matched data and
/// returns the sup-norm gap between `u_pivot(t)` and `y(t)`.
fn transport(conv: &OdeConversion, it: &Integration, u0: &[f64], params: &Point) -> Result<f64> {
    // Map the original initial point into the converted coordinates.
    let mut pt = params.clone();
    for (a, v) in u0.iter().enumerate() {
        pt.set(Symbol::Dep(a + 1), *v);
    }
    let mut t0 = it.span.0;
    let mut x0 = vec![0.0; conv.source.n()];
    for (sym, e) in &conv.relabel {
        let Symbol::Dep(a) = sym else { continue };
        match e.as_symbol() {
            Some(Symbol::Time) => t0 = u0[a - 1],
            Some(Symbol::Dep(b)) => x0[b - 1] = u0[a - 1],
            _ => {}
        }
    }
    let span = (t0, t0 + (it.span.1 - it.span.0));
    let src = integrate(&conv.source, &x0, params, span, it.step)?;
    let ys0 = conv.jets_at(t0, &x0, params)?;
    let ytraj = match &conv.ode {
        Some(ode) => integrate(&ode_to_ds(ode)?, &ys0, params, span, it.step)?,
        None => {
            let n = conv.order();
            let mut state = NewtonState { u: x0.clone() };
            rk4(
                |t, x, out| {
                    out[..n - 1].copy_from_slice(&x[1..n]);
                    out[n - 1] = conv.eval_top(t, x, params, &mut state)?;
                    Ok(())
                },
                &ys0,
                span,
                it.step,
            )?
        }
    };
    Ok(src.states.iter().zip(&ytraj.states).map(|(s, y)| (s[conv.pivot - 1] - y[0]).abs()).fold(0.0, f64::max))
}
