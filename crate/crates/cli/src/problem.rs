//! Problem files: `[section]` headers followed by `key = value` lines.
//! The grammar is documented in `docs/problem-format.md`.

use std::collections::BTreeMap;

use sigmared::error::{Error, Result};
use sigmared::expr::{parse, parse_solved, Expr, ParseContext, Point, SamplingBox, Symbol};
use sigmared::jet::VectorField;
use sigmared::system::{DynSystem, OdeSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Ds,
    Ode,
}

#[derive(Clone, Debug)]
pub struct Construction {
    pub mu: Option<Vec<Expr>>,
    pub rho: Option<Expr>,
    /// The system the construction should reproduce.
    pub expect: Option<Vec<Expr>>,
    /// A printed form known to disagree with the construction; reported, not checked.
    pub display: Option<Vec<Expr>>,
}

#[derive(Clone, Debug, Default)]
pub struct Invariants {
    pub w: Vec<Expr>,
    pub eta: Vec<Expr>,
    pub discover: bool,
    pub augmented: bool,
    pub degree: usize,
    pub constants: bool,
}

#[derive(Clone, Debug, Default)]
pub struct ReductionExpect {
    pub class: Option<String>,
    pub reduced: Vec<(usize, Expr)>,
    pub ratios: Vec<(usize, usize, Expr)>,
    pub relations: Vec<(usize, Option<Symbol>, Expr)>,
    pub reconstruction: Vec<(usize, Expr)>,
    pub constants: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct TransformSpec {
    pub pivot: usize,
    pub clock: Option<usize>,
    pub ode: Option<Expr>,
    /// A printed form known to disagree with the derivation; reported, not checked.
    pub ode_display: Option<Expr>,
    pub transfer: Vec<(String, Expr)>,
    pub solution: Option<(Expr, (f64, f64))>,
}

#[derive(Clone, Debug)]
pub struct Integration {
    pub span: (f64, f64),
    pub step: f64,
    pub count: usize,
    pub domain: SamplingBox,
    pub params: Point,
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub name: String,
    pub tags: Vec<String>,
    pub kind: Kind,
    pub n: usize,
    pub q: usize,
    pub params: Vec<String>,
    pub ctx: ParseContext,
    pub ds: Option<DynSystem>,
    pub ode: Option<OdeSystem>,
    pub fields: Vec<VectorField>,
    pub sigma: Option<Vec<Vec<Expr>>>,
    pub theta: Option<Vec<Expr>>,
    pub nu: Option<Vec<Vec<Vec<Expr>>>>,
    /// Solve the determining equations for σ (and θ when `Some(true)`).
    pub infer_sigma: Option<bool>,
    pub construct: Option<Construction>,
    pub invariants: Invariants,
    pub reduction: ReductionExpect,
    pub transform: Option<TransformSpec>,
    pub seed: u64,
    pub trials: usize,
    pub domain: SamplingBox,
    pub integration: Option<Integration>,
}

#[derive(Clone, Debug)]
struct Entry {
    line: usize,
    key: String,
    value: String,
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Problem { line, message: message.into() }
}

/// Splits on commas outside braces and parentheses.
fn split_list(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let (mut depth, mut cur) = (0i32, String::new());
    for ch in s.chars() {
        match ch {
            '(' | '{' => depth += 1,
            ')' | '}' => depth -= 1,
            _ => {}
        }
        if ch == ',' && depth == 0 {
            out.push(cur.trim().to_string());
            cur.clear();
        } else {
            cur.push(ch);
        }
    }
    if !cur.trim().is_empty() || !out.is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

type Sections = BTreeMap<String, Vec<Entry>>;

/// Base sections plus named `[variant NAME]` blocks of overrides.
fn sections(text: &str) -> Result<(Sections, Vec<(String, Sections)>)> {
    let mut base = Sections::new();
    let mut variants: Vec<(String, Sections)> = Vec::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
            let name = name.trim().to_string();
            if let Some(v) = name.strip_prefix("variant ") {
                let v = v.trim().to_string();
                if v.is_empty() || variants.iter().any(|(n, _)| *n == v) {
                    return Err(perr(line, format!("bad or duplicate variant `{v}`")));
                }
                variants.push((v, Sections::new()));
                current = None;
                continue;
            }
            let target = variants.last_mut().map(|(_, s)| s).unwrap_or(&mut base);
            if target.contains_key(&name) {
                return Err(perr(line, format!("duplicate section [{name}]")));
            }
            target.insert(name.clone(), Vec::new());
            current = Some(name);
            continue;
        }
        let Some(sec) = &current else {
            return Err(perr(line, "entry outside of any section"));
        };
        let (k, v) = body.split_once('=').ok_or_else(|| perr(line, "expected `key = value`"))?;
        let target = variants.last_mut().map(|(_, s)| s).unwrap_or(&mut base);
        target.get_mut(sec).unwrap().push(Entry { line, key: k.trim().to_string(), value: v.trim().to_string() });
    }
    Ok((base, variants))
}

/// Variant entries replace base entries with the same key in place; new keys
/// are appended and an empty value removes the key.
fn merge(base: &Sections, over: &Sections) -> Sections {
    let mut out = base.clone();
    for (sec, entries) in over {
        let target = out.entry(sec.clone()).or_default();
        for e in entries {
            if e.value.is_empty() {
                target.retain(|b| b.key != e.key);
                continue;
            }
            match target.iter_mut().find(|b| b.key == e.key) {
                Some(b) => *b = e.clone(),
                None => target.push(e.clone()),
            }
        }
    }
    out
}

fn num<T: std::str::FromStr>(e: &Entry) -> Result<T> {
    e.value.parse().map_err(|_| perr(e.line, format!("`{}` is not a valid number for `{}`", e.value, e.key)))
}

fn pair(e: &Entry) -> Result<(f64, f64)> {
    let v = split_list(&e.value);
    if v.len() != 2 {
        return Err(perr(e.line, format!("`{}` expects two numbers", e.key)));
    }
    let f = |s: &str| s.parse::<f64>().map_err(|_| perr(e.line, format!("`{s}` is not a number")));
    Ok((f(&v[0])?, f(&v[1])?))
}

fn flag(e: &Entry) -> Result<bool> {
    match e.value.as_str() {
        "true" | "yes" => Ok(true),
        "false" | "no" => Ok(false),
        _ => Err(perr(e.line, format!("`{}` expects true or false", e.key))),
    }
}

/// `name.i` or `namei` with a 1-based index.
fn indexed(key: &str, name: &str) -> Option<usize> {
    let rest = key.strip_prefix(name)?;
    let rest = rest.strip_prefix('.').unwrap_or(rest);
    rest.parse().ok().filter(|&i| i > 0)
}

fn indexed2(key: &str, name: &str) -> Option<(usize, usize)> {
    let rest = key.strip_prefix(name)?.strip_prefix('.')?;
    let (a, b) = rest.split_once('.')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

fn collect<T>(items: BTreeMap<usize, T>, what: &str, line: usize) -> Result<Vec<T>> {
    let len = items.len();
    if let Some((&last, _)) = items.iter().next_back() {
        if last != len {
            return Err(perr(line, format!("{what} indices must run 1..={len}")));
        }
    }
    Ok(items.into_values().collect())
}

/// Expression context for reduced coordinates: `w`/`w1`.., `eta1`..
pub fn reduced_context(nw: usize, neta: usize, params: &[String]) -> ParseContext {
    let mut ctx = ParseContext::new(nw + neta, 4).with_params(params.iter().cloned());
    for j in 1..=nw {
        ctx = ctx.with_alias(&format!("w{j}"), Expr::u(j));
    }
    if nw == 1 {
        ctx = ctx.with_alias("w", Expr::u(1));
    }
    for a in 1..=neta {
        ctx = ctx.with_alias(&format!("eta{a}"), Expr::u(nw + a));
    }
    ctx
}

/// Expression context for the scalar ODE variable `y`.
pub fn y_context(order: usize, params: &[String]) -> ParseContext {
    ParseContext::new(1, order.max(1)).with_params(params.iter().cloned()).with_alias("y", Expr::u(1))
}

impl Problem {
    /// A file without variants yields one problem; otherwise the base problem
    /// comes first, followed by `NAME-VARIANT` for each variant.
    pub fn parse_all(name: &str, text: &str) -> Result<Vec<Problem>> {
        let (base, variants) = sections(text)?;
        let mut out = vec![Problem::from_sections(name, &base)?];
        for (v, over) in &variants {
            out.push(Problem::from_sections(&format!("{name}-{v}"), &merge(&base, over))?);
        }
        Ok(out)
    }

    /// The base problem of a file.
    pub fn parse(name: &str, text: &str) -> Result<Problem> {
        let (base, _) = sections(text)?;
        Problem::from_sections(name, &base)
    }

    fn from_sections(name: &str, secs: &Sections) -> Result<Problem> {
        for s in secs.keys() {
            if !["system", "symmetries", "sigma", "construct", "invariants", "reduction", "transform", "sampling", "integration"].contains(&s.as_str()) {
                return Err(perr(0, format!("unknown section [{s}]")));
            }
        }
        let empty = Vec::new();
        let sec = |s: &str| secs.get(s).unwrap_or(&empty);
        let system = secs.get("system").ok_or_else(|| perr(0, "missing [system] section"))?;

        let (mut kind, mut n, mut q, mut params, mut tags) = (Kind::Ds, 0usize, 1usize, Vec::new(), Vec::new());
        for e in system {
            match e.key.as_str() {
                "kind" => {
                    kind = match e.value.as_str() {
                        "ds" => Kind::Ds,
                        "ode" => Kind::Ode,
                        v => return Err(perr(e.line, format!("unknown kind `{v}`"))),
                    }
                }
                "n" => n = num(e)?,
                "q" => q = num(e)?,
                "params" => params = split_list(&e.value),
                "tags" => tags = split_list(&e.value),
                _ => {}
            }
        }
        if n == 0 {
            return Err(perr(0, "[system] must declare n"));
        }
        let mut ctx = ParseContext::new(n, q.max(2)).with_params(params.iter().cloned());
        let ex = |ctx: &ParseContext, e: &Entry, s: &str| parse(s, ctx).map_err(|err| perr(e.line, err.to_string()));

        let mut f = BTreeMap::new();
        let mut eqs = BTreeMap::new();
        let mut last = 0;
        for e in system {
            last = e.line;
            if let Some(name) = e.key.strip_prefix("def ") {
                let v = ex(&ctx, e, &e.value)?;
                ctx = ctx.with_alias(name.trim(), v);
            } else if let Some(i) = indexed(&e.key, "f") {
                f.insert(i, ex(&ctx, e, &e.value)?);
            } else if let Some(i) = indexed(&e.key, "eq") {
                let (s, rhs) = parse_solved(&e.value, &ctx).map_err(|err| perr(e.line, err.to_string()))?;
                eqs.insert(i, (s, rhs));
            } else if !["kind", "n", "q", "params", "tags"].contains(&e.key.as_str()) {
                return Err(perr(e.line, format!("unknown key `{}` in [system]", e.key)));
            }
        }
        let (ds, ode) = match kind {
            Kind::Ds => {
                let f = collect(f, "f", last)?;
                if f.len() != n {
                    return Err(perr(last, format!("expected {n} right-hand sides, got {}", f.len())));
                }
                (Some(DynSystem::new(f).map_err(|err| perr(last, err.to_string()))?), None)
            }
            Kind::Ode => {
                let eqs = collect(eqs, "eq", last)?;
                if eqs.len() != n {
                    return Err(perr(last, format!("expected {n} equations, got {}", eqs.len())));
                }
                let solved: BTreeMap<Symbol, Expr> = eqs.into_iter().collect();
                if solved.len() != n {
                    return Err(perr(last, "two equations are solved for the same derivative"));
                }
                (None, Some(OdeSystem::from_solved(solved).map_err(|err| perr(last, err.to_string()))?))
            }
        };

        let mut fields = BTreeMap::new();
        let mut taus = BTreeMap::new();
        for e in sec("symmetries") {
            if let Some(a) = e.key.strip_suffix(".tau").and_then(|k| indexed(k, "X")) {
                taus.insert(a, ex(&ctx, e, &e.value)?);
            } else if let Some(a) = indexed(&e.key, "X") {
                let phi = split_list(&e.value).iter().map(|s| ex(&ctx, e, s)).collect::<Result<Vec<_>>>()?;
                if phi.len() != n {
                    return Err(perr(e.line, format!("X{a} needs {n} components")));
                }
                fields.insert(a, phi);
            } else {
                return Err(perr(e.line, format!("unknown key `{}` in [symmetries]", e.key)));
            }
        }
        let fields: Vec<VectorField> = collect(fields, "X", 0)?
            .into_iter()
            .enumerate()
            .map(|(i, phi)| VectorField::new(taus.remove(&(i + 1)).unwrap_or_else(Expr::zero), phi))
            .collect();
        let s = fields.len();

        let (mut rows, mut theta, mut nu_entries, mut infer_sigma) = (BTreeMap::new(), None, BTreeMap::new(), None);
        for e in sec("sigma") {
            if e.key == "infer" {
                infer_sigma = Some(match e.value.as_str() {
                    "plain" => false,
                    "orbital" => true,
                    v => return Err(perr(e.line, format!("infer takes `plain` or `orbital`, not `{v}`"))),
                });
                continue;
            }
            let list = |e: &Entry| split_list(&e.value).iter().map(|v| ex(&ctx, e, v)).collect::<Result<Vec<_>>>();
            if e.key == "theta" {
                let t = list(e)?;
                if t.len() != s {
                    return Err(perr(e.line, format!("theta needs {s} entries")));
                }
                theta = Some(t);
            } else if let Some((a, b)) = indexed2(&e.key, "nu") {
                let c = list(e)?;
                if a == 0 || b == 0 || a > s || b > s || c.len() != s {
                    return Err(perr(e.line, "nu.a.b needs indices within 1..=s and s coefficients"));
                }
                nu_entries.insert((a, b), c);
            } else if let Some(a) = indexed(&e.key, "row") {
                let r = list(e)?;
                if r.len() != s {
                    return Err(perr(e.line, format!("sigma rows need {s} entries")));
                }
                rows.insert(a, r);
            } else {
                return Err(perr(e.line, format!("unknown key `{}` in [sigma]", e.key)));
            }
        }
        let sigma = if rows.is_empty() {
            None
        } else {
            let r = collect(rows, "row", 0)?;
            if r.len() != s {
                return Err(perr(0, format!("sigma needs {s} rows")));
            }
            Some(r)
        };
        let nu = (!nu_entries.is_empty()).then(|| {
            let mut nu = vec![vec![vec![Expr::zero(); s]; s]; s];
            for ((a, b), c) in nu_entries {
                nu[b - 1][a - 1] = c.iter().map(Expr::neg).collect();
                nu[a - 1][b - 1] = c;
            }
            nu
        });

        let construct = if let Some(es) = secs.get("construct") {
            let mut c = Construction { mu: None, rho: None, expect: None, display: None };
            let (mut expect, mut display) = (BTreeMap::new(), BTreeMap::new());
            for e in es {
                if e.key == "mu" {
                    c.mu = Some(split_list(&e.value).iter().map(|v| ex(&ctx, e, v)).collect::<Result<_>>()?);
                } else if e.key == "rho" {
                    c.rho = Some(ex(&ctx, e, &e.value)?);
                } else if let Some(i) = indexed(&e.key, "expect") {
                    expect.insert(i, ex(&ctx, e, &e.value)?);
                } else if let Some(i) = indexed(&e.key, "display") {
                    display.insert(i, ex(&ctx, e, &e.value)?);
                } else {
                    return Err(perr(e.line, format!("unknown key `{}` in [construct]", e.key)));
                }
            }
            if !expect.is_empty() {
                c.expect = Some(collect(expect, "expect", 0)?);
            }
            if !display.is_empty() {
                c.display = Some(collect(display, "display", 0)?);
            }
            Some(c)
        } else {
            None
        };

        let mut inv = Invariants { degree: 3, ..Default::default() };
        let (mut ws, mut etas) = (BTreeMap::new(), BTreeMap::new());
        for e in sec("invariants") {
            match e.key.as_str() {
                "discover" => inv.discover = flag(e)?,
                "augmented" => inv.augmented = flag(e)?,
                "constants" => inv.constants = flag(e)?,
                "degree" => inv.degree = num(e)?,
                "w" => {
                    ws.insert(1, ex(&ctx, e, &e.value)?);
                }
                k => {
                    if let Some(i) = indexed(k, "eta") {
                        etas.insert(i, ex(&ctx, e, &e.value)?);
                    } else if let Some(i) = indexed(k, "w") {
                        ws.insert(i, ex(&ctx, e, &e.value)?);
                    } else {
                        return Err(perr(e.line, format!("unknown key `{k}` in [invariants]")));
                    }
                }
            }
        }
        inv.w = collect(ws, "w", 0)?;
        inv.eta = collect(etas, "eta", 0)?;

        let mut red = ReductionExpect::default();
        let rctx = reduced_context(inv.w.len(), inv.eta.len(), &params);
        for e in sec("reduction") {
            if e.key == "class" {
                red.class = Some(e.value.clone());
            } else if e.key == "constants" {
                red.constants = Some(num(e)?);
            } else if let Some((i, j)) = indexed2(&e.key, "ratio") {
                red.ratios.push((i, j, ex(&rctx, e, &e.value)?));
            } else if let Some(i) = indexed(&e.key, "reduced") {
                red.reduced.push((i, ex(&rctx, e, &e.value)?));
            } else if let Some(i) = indexed(&e.key, "eta") {
                red.reconstruction.push((i, ex(&rctx, e, &e.value)?));
            } else if let Some(i) = indexed(&e.key, "relation") {
                if e.value.contains('=') {
                    let (s, rhs) = parse_solved(&e.value, &rctx).map_err(|err| perr(e.line, err.to_string()))?;
                    red.relations.push((i, Some(s), rhs));
                } else {
                    red.relations.push((i, None, ex(&rctx, e, &e.value)?));
                }
            } else {
                return Err(perr(e.line, format!("unknown key `{}` in [reduction]", e.key)));
            }
        }

        let transform = if let Some(es) = secs.get("transform") {
            let mut t = TransformSpec { pivot: 1, clock: None, ode: None, ode_display: None, transfer: Vec::new(), solution: None };
            let order = n - usize::from(es.iter().any(|e| e.key == "clock"));
            let yctx = y_context(order + 1, &params);
            let mut span = (0.0, 1.0);
            let mut sol = None;
            for e in es {
                match e.key.as_str() {
                    "pivot" => t.pivot = num(e)?,
                    "clock" => t.clock = Some(num(e)?),
                    "ode" => t.ode = Some(ex(&yctx, e, &e.value)?),
                    "ode.display" => t.ode_display = Some(ex(&yctx, e, &e.value)?),
                    "solution" => sol = Some(ex(&yctx, e, &e.value)?),
                    "solution.span" => span = pair(e)?,
                    k => {
                        let Some(label) = k.strip_prefix("transfer.") else {
                            return Err(perr(e.line, format!("unknown key `{k}` in [transform]")));
                        };
                        t.transfer.push((label.to_string(), ex(&yctx, e, &e.value)?));
                    }
                }
            }
            t.solution = sol.map(|s| (s, span));
            Some(t)
        } else {
            None
        };

        let (mut seed, mut trials, mut domain) = (7u64, 100usize, SamplingBox::default());
        for e in sec("sampling") {
            match e.key.as_str() {
                "seed" => seed = num(e)?,
                "trials" => trials = num(e)?,
                "range" => domain.default = pair(e)?,
                "exclude" => {
                    let parts = split_list(&e.value);
                    let [g, m] = parts.as_slice() else {
                        return Err(perr(e.line, "exclude expects `expression, min_abs`"));
                    };
                    let m: f64 = m.parse().map_err(|_| perr(e.line, format!("`{m}` is not a number")))?;
                    domain = domain.exclude(ex(&ctx, e, g)?, m);
                }
                k => {
                    let Some(sym) = k.strip_prefix("range.") else {
                        return Err(perr(e.line, format!("unknown key `{k}` in [sampling]")));
                    };
                    let (lo, hi) = pair(e)?;
                    let s = ex(&ctx, e, sym)?.as_symbol().cloned().ok_or_else(|| perr(e.line, format!("`{sym}` is not a symbol")))?;
                    domain = domain.with_range(s, lo, hi);
                }
            }
        }

        let integration = if let Some(es) = secs.get("integration") {
            let mut it = Integration { span: (0.0, 1.0), step: 1e-4, count: 5, domain: SamplingBox { exclusions: domain.exclusions.clone(), ..SamplingBox::default() }, params: Point::new() };
            for e in es {
                match e.key.as_str() {
                    "span" => it.span = pair(e)?,
                    "step" => it.step = num(e)?,
                    "count" => it.count = num(e)?,
                    "box" => it.domain.default = pair(e)?,
                    k => {
                        if let Some(sym) = k.strip_prefix("box.") {
                            let (lo, hi) = pair(e)?;
                            let s = ex(&ctx, e, sym)?.as_symbol().cloned().ok_or_else(|| perr(e.line, format!("`{sym}` is not a symbol")))?;
                            it.domain = it.domain.with_range(s, lo, hi);
                        } else if let Some(p) = k.strip_prefix("param.") {
                            if !params.iter().any(|x| x == p) {
                                return Err(perr(e.line, format!("undeclared parameter `{p}`")));
                            }
                            it.params.set(Symbol::param(p), num(e)?);
                        } else {
                            return Err(perr(e.line, format!("unknown key `{k}` in [integration]")));
                        }
                    }
                }
            }
            Some(it)
        } else {
            None
        };

        Ok(Problem {
            name: name.to_string(),
            tags,
            kind,
            n,
            q,
            params,
            ctx,
            ds,
            ode,
            fields,
            sigma,
            theta,
            nu,
            infer_sigma,
            construct,
            invariants: inv,
            reduction: red,
            transform,
            seed,
            trials,
            domain,
            integration,
        })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Vec<Problem>> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("problem");
        Problem::parse_all(name, &text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "
[system]
n = 2
params = a
f1 = u1 + a*u1^2*u2   # comment
f2 = u2 + u1*u2^2
[symmetries]
X1 = u1, -u2
[sigma]
row1 = 0
[sampling]
seed = 3
exclude = u{1,1}*u2, 0.1
";

    #[test]
    fn parses_sections() {
        let p = Problem::parse("small", SMALL).unwrap();
        assert_eq!(p.n, 2);
        assert_eq!(p.ds.as_ref().unwrap().f.len(), 2);
        assert_eq!(p.fields.len(), 1);
        assert_eq!(p.seed, 3);
        assert_eq!(p.domain.exclusions.len(), 1);
        assert!(p.sigma.as_ref().unwrap()[0][0].is_const_zero());
    }

    #[test]
    fn reports_lines() {
        let bad = SMALL.replace("f2 = u2 + u1*u2^2", "f2 = u2 + * u1");
        let Err(Error::Problem { line, .. }) = Problem::parse("bad", &bad) else { panic!() };
        assert_eq!(line, 6);
        assert!(Problem::parse("bad", &SMALL.replace("row1 = 0", "row1 = 0, 1")).is_err());
        assert!(Problem::parse("bad", "[system]\nn = 1\nf1 = u2\n").is_err());
    }

    #[test]
    fn variants_override_in_place() {
        let text = format!("{SMALL}\n[variant b]\n[system]\nf2 = u2\nparams = a, b\n");
        let ps = Problem::parse_all("small", &text).unwrap();
        assert_eq!(ps.len(), 2);
        assert_eq!(ps[1].name, "small-b");
        assert_eq!(ps[1].ds.as_ref().unwrap().f[1].to_string(), "u2");
        assert_eq!(ps[1].params, vec!["a", "b"]);
        assert_eq!(ps[0].ds.as_ref().unwrap().f[1].to_string(), "u2 + u1*u2^2");
        let text = format!("{SMALL}\n[variant c]\n[sampling]\nexclude =\n");
        assert!(Problem::parse_all("small", &text).unwrap()[1].domain.exclusions.is_empty());
    }

    #[test]
    fn list_splitting_respects_braces() {
        assert_eq!(split_list("u{1,2}, f(a, b), c"), vec!["u{1,2}", "f(a, b)", "c"]);
    }
}
