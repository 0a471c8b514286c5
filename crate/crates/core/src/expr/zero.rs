//! Randomized identity testing.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::eval::{Evaluator, Fault};
use super::{Expr, Point, Symbol};

pub const EPS_ZERO: f64 = 1e-8;
pub const EPS_POLE: f64 = 1e-12;

/// Where sample points are drawn from.
#[derive(Clone, Debug)]
pub struct SamplingBox {
    pub default: (f64, f64),
    pub ranges: BTreeMap<Symbol, (f64, f64)>,
    /// Samples with `|g| < min_abs` are rejected.
    pub exclusions: Vec<(Expr, f64)>,
}

impl Default for SamplingBox {
    fn default() -> Self {
        SamplingBox { default: (0.5, 1.5), ranges: BTreeMap::new(), exclusions: Vec::new() }
    }
}

impl SamplingBox {
    pub fn range(&self, s: &Symbol) -> (f64, f64) {
        self.ranges.get(s).copied().unwrap_or(self.default)
    }

    pub fn with_range(mut self, s: Symbol, lo: f64, hi: f64) -> Self {
        self.ranges.insert(s, (lo, hi));
        self
    }

    pub fn exclude(mut self, g: Expr, min_abs: f64) -> Self {
        self.exclusions.push((g, min_abs));
        self
    }

    /// Symbols a sample must bind to evaluate `exprs` and the exclusions.
    pub fn symbols_for<'a, I: IntoIterator<Item = &'a Expr>>(&self, exprs: I) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        for e in exprs {
            out.extend(e.free_symbols());
        }
        for (g, _) in &self.exclusions {
            out.extend(g.free_symbols());
        }
        out
    }

    /// Draws one point; `None` when it falls on an excluded set.
    pub fn draw(&self, symbols: &BTreeSet<Symbol>, rng: &mut impl Rng) -> Option<Point> {
        let p: Point = symbols
            .iter()
            .map(|s| {
                let (lo, hi) = self.range(s);
                let v = if hi > lo { rng.gen_range(lo..hi) } else { lo };
                (s.clone(), v)
            })
            .collect();
        let mut ev = Evaluator::new(&p);
        for (g, min_abs) in &self.exclusions {
            match ev.eval_raw(g) {
                Ok(v) if v.abs() >= *min_abs => {}
                _ => return None,
            }
        }
        Some(p)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Zero { max_abs: f64 },
    NonZero { witness: Point, value: f64 },
    Inconclusive { good: usize, pole_hits: usize },
}

impl Verdict {
    pub fn is_zero(&self) -> bool {
        matches!(self, Verdict::Zero { .. })
    }

    pub fn is_nonzero(&self) -> bool {
        matches!(self, Verdict::NonZero { .. })
    }

    /// Largest observed magnitude (the witness value for `NonZero`).
    pub fn max_abs(&self) -> f64 {
        match self {
            Verdict::Zero { max_abs } => *max_abs,
            Verdict::NonZero { value, .. } => value.abs(),
            Verdict::Inconclusive { .. } => f64::NAN,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Zero { .. } => "Zero",
            Verdict::NonZero { .. } => "NonZero",
            Verdict::Inconclusive { .. } => "Inconclusive",
        }
    }

    /// Conjunction: the first non-zero (or inconclusive) verdict wins.
    pub fn and(self, other: Verdict) -> Verdict {
        match (&self, &other) {
            (Verdict::NonZero { .. }, _) => self,
            (_, Verdict::NonZero { .. }) => other,
            (Verdict::Inconclusive { .. }, _) => self,
            (_, Verdict::Inconclusive { .. }) => other,
            (Verdict::Zero { max_abs: a }, Verdict::Zero { max_abs: b }) => Verdict::Zero { max_abs: a.max(*b) },
        }
    }
}

/// Sampling-based zero test with a deterministic per-attempt RNG.
#[derive(Clone, Debug)]
pub struct ZeroTest {
    pub trials: usize,
    pub eps_zero: f64,
    pub seed: u64,
    pub domain: SamplingBox,
}

impl Default for ZeroTest {
    fn default() -> Self {
        ZeroTest { trials: 20, eps_zero: EPS_ZERO, seed: 0x5eed, domain: SamplingBox::default() }
    }
}

/// Independent stream per (seed, attempt).
pub(crate) fn attempt_rng(seed: u64, attempt: u64) -> ChaCha8Rng {
    let mut z = seed ^ attempt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

impl ZeroTest {
    pub fn new(trials: usize, seed: u64) -> Self {
        ZeroTest { trials: trials.max(1), seed, ..ZeroTest::default() }
    }

    pub fn with_domain(mut self, domain: SamplingBox) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials.max(1);
        self
    }

    pub fn is_zero(&self, e: &Expr) -> Verdict {
        self.all_zero(std::slice::from_ref(e)).pop().unwrap()
    }

    /// Tests every expression on a shared stream of points; one verdict each.
    ///
    /// Each expression gets its own good/pole tally, so a pole in one residual
    /// does not cost the others a sample.
    pub fn all_zero(&self, exprs: &[Expr]) -> Vec<Verdict> {
        if exprs.iter().all(|e| e.is_const_zero()) {
            return exprs.iter().map(|_| Verdict::Zero { max_abs: 0.0 }).collect();
        }
        let symbols = self.domain.symbols_for(exprs);
        let trials = self.trials.max(1);
        let cap = 10 * trials;
        let mut good = vec![0usize; exprs.len()];
        let mut poles = vec![0usize; exprs.len()];
        let mut max_abs = vec![0.0f64; exprs.len()];
        let mut done: Vec<Option<Verdict>> = vec![None; exprs.len()];
        for attempt in 0..cap as u64 {
            if done.iter().all(Option::is_some) {
                break;
            }
            let mut rng = attempt_rng(self.seed, attempt);
            let Some(p) = self.domain.draw(&symbols, &mut rng) else {
                for (i, d) in done.iter().enumerate() {
                    if d.is_none() {
                        poles[i] += 1;
                    }
                }
                continue;
            };
            let mut ev = Evaluator::new(&p);
            for (i, e) in exprs.iter().enumerate() {
                if done[i].is_some() {
                    continue;
                }
                match ev.eval_raw(e) {
                    Ok(v) if v.is_finite() && v.abs() <= self.eps_zero => {
                        good[i] += 1;
                        max_abs[i] = max_abs[i].max(v.abs());
                    }
                    Ok(v) if v.is_finite() => {
                        done[i] = Some(Verdict::NonZero { witness: p.clone(), value: v });
                    }
                    Ok(_) | Err(Fault::Pole(_)) | Err(Fault::Domain(_)) => poles[i] += 1,
                    Err(Fault::Unbound(_)) => unreachable!("sample binds every free symbol"),
                }
                if done[i].is_none() && good[i] >= trials {
                    let attempts = good[i] + poles[i];
                    done[i] = Some(if 2 * poles[i] > attempts {
                        Verdict::Inconclusive { good: good[i], pole_hits: poles[i] }
                    } else {
                        Verdict::Zero { max_abs: max_abs[i] }
                    });
                }
            }
        }
        done.into_iter()
            .enumerate()
            .map(|(i, d)| d.unwrap_or(Verdict::Inconclusive { good: good[i], pole_hits: poles[i] }))
            .collect()
    }

    /// Conjunction of [`Self::all_zero`].
    pub fn all_zero_joint(&self, exprs: &[Expr]) -> Verdict {
        self.all_zero(exprs).into_iter().fold(Verdict::Zero { max_abs: 0.0 }, Verdict::and)
    }

    /// Good sample points for `exprs` (all evaluable), at most `count` of them.
    pub fn points(&self, exprs: &[Expr], count: usize) -> Vec<Point> {
        let symbols = self.domain.symbols_for(exprs);
        let mut out = Vec::with_capacity(count);
        for attempt in 0..(10 * count.max(1)) as u64 {
            if out.len() == count {
                break;
            }
            let mut rng = attempt_rng(self.seed, attempt);
            let Some(p) = self.domain.draw(&symbols, &mut rng) else { continue };
            let mut ev = Evaluator::new(&p);
            if exprs.iter().all(|e| ev.eval_raw(e).is_ok_and(f64::is_finite)) {
                out.push(p);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, ParseContext};

    fn ctx() -> ParseContext {
        ParseContext::new(3, 2)
    }

    #[test]
    fn trivial_verdicts() {
        let zt = ZeroTest::default();
        assert!(zt.is_zero(&parse("u1 - u1", &ctx()).unwrap()).is_zero());
        match zt.is_zero(&parse("u1*u2 - 1", &ctx()).unwrap()) {
            Verdict::NonZero { witness, value } => {
                assert!(value.abs() > EPS_ZERO);
                let e = parse("u1*u2 - 1", &ctx()).unwrap();
                assert_eq!(e.eval(&witness).unwrap(), value);
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn nontrivial_identity() {
        let e = parse("(u1^2 - u2^2)/(u1 - u2) - u1 - u2 + sin(u3)^2 + cos(u3)^2 - 1", &ctx()).unwrap();
        assert!(ZeroTest::new(100, 9).is_zero(&e).is_zero());
    }

    #[test]
    fn mostly_poles_is_inconclusive() {
        // log of a quantity that is negative on most of the box
        let e = parse("log(u1 - 1.4) - log(u1 - 1.4)", &ctx()).unwrap();
        let v = ZeroTest::new(20, 1).is_zero(&e);
        assert!(matches!(v, Verdict::Inconclusive { .. }), "{v:?}");
    }

    #[test]
    fn exclusions_are_respected() {
        let g = parse("u1 - 1", &ctx()).unwrap();
        let dom = SamplingBox::default().exclude(g.clone(), 0.3);
        let zt = ZeroTest::new(30, 4).with_domain(dom);
        for p in zt.points(&[Expr::u(1)], 30) {
            assert!(g.eval(&p).unwrap().abs() >= 0.3);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let e = parse("u1 - u2", &ctx()).unwrap();
        assert_eq!(ZeroTest::new(5, 3).is_zero(&e), ZeroTest::new(5, 3).is_zero(&e));
    }
}
