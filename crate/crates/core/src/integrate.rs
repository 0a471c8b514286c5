//! Fixed-step classical Runge–Kutta integration.

use crate::error::{Error, Result};
use crate::expr::{Evaluator, Expr, Point, Symbol};
use crate::system::DynSystem;

/// States at `t0, t0 + h, ...`; `states[i]` belongs to `times[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Step actually used (after a refinement rerun, if any).
    pub step: f64,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// The state closest to time `t` on the grid.
    pub fn at(&self, t: f64) -> &[f64] {
        let i = (((t - self.times[0]) / self.step).round().max(0.0) as usize).min(self.times.len() - 1);
        &self.states[i]
    }

    /// Sup-norm distance to `other`, compared at this trajectory's grid times.
    pub fn sup_distance(&self, other: &Trajectory) -> f64 {
        self.times
            .iter()
            .zip(&self.states)
            .map(|(&t, s)| s.iter().zip(other.at(t)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }
}

const BLOW_UP: f64 = 1e12;

/// RK4 for `ẋ = rhs(t, x)`. `rhs` writes the derivative into its last argument.
pub fn rk4<F>(mut rhs: F, x0: &[f64], t_span: (f64, f64), step: f64) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    if step.is_nan() || step <= 0.0 || t_span.1 < t_span.0 {
        return Err(Error::Precondition(format!("bad integration span {t_span:?} with step {step}")));
    }
    let n = x0.len();
    let steps = ((t_span.1 - t_span.0) / step).round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut x = x0.to_vec();
    times.push(t_span.0);
    states.push(x.clone());
    let blown = |t: f64| move |e: Error| match e {
        Error::Pole { .. } | Error::Domain { .. } => Error::BlowUp { time: t },
        other => other,
    };
    for i in 0..steps {
        let t = t_span.0 + i as f64 * step;
        let h = step;
        rhs(t, &x, &mut k1).map_err(blown(t))?;
        for j in 0..n {
            tmp[j] = x[j] + 0.5 * h * k1[j];
        }
        rhs(t + 0.5 * h, &tmp, &mut k2).map_err(blown(t))?;
        for j in 0..n {
            tmp[j] = x[j] + 0.5 * h * k2[j];
        }
        rhs(t + 0.5 * h, &tmp, &mut k3).map_err(blown(t))?;
        for j in 0..n {
            tmp[j] = x[j] + h * k3[j];
        }
        rhs(t + h, &tmp, &mut k4).map_err(blown(t))?;
        for j in 0..n {
            x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        let t_next = t_span.0 + (i + 1) as f64 * step;
        if x.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP) {
            return Err(Error::BlowUp { time: t_next });
        }
        times.push(t_next);
        states.push(x.clone());
    }
    Ok(Trajectory { times, states, step })
}

/// Evaluates the right-hand side of a DS at `(t, u)` with fixed parameter values.
#[derive(Clone, Debug)]
pub struct FieldEval {
    f: Vec<Expr>,
    params: Point,
}

impl FieldEval {
    pub fn new(ds: &DynSystem, params: &Point) -> Self {
        FieldEval { f: ds.f.clone(), params: params.clone() }
    }

    pub fn point(&self, t: f64, u: &[f64]) -> Point {
        let mut p = self.params.clone();
        p.set(Symbol::Time, t);
        for (a, v) in u.iter().enumerate() {
            p.set(Symbol::Dep(a + 1), *v);
        }
        p
    }

    pub fn eval(&self, t: f64, u: &[f64], out: &mut [f64]) -> Result<()> {
        let p = self.point(t, u);
        let mut ev = Evaluator::new(&p);
        for (o, e) in out.iter_mut().zip(&self.f) {
            *o = ev.eval(e)?;
        }
        Ok(())
    }
}

/// Integrates `ds` from `u0`; parameters are taken from `params`.
pub fn integrate(ds: &DynSystem, u0: &[f64], params: &Point, t_span: (f64, f64), step: f64) -> Result<Trajectory> {
    if u0.len() != ds.n() {
        return Err(Error::DimensionMismatch(format!("{} initial values for a {}-dimensional system", u0.len(), ds.n())));
    }
    let fe = FieldEval::new(ds, params);
    rk4(|t, u, out| fe.eval(t, u, out), u0, t_span, step)
}

/// Step-halving discrepancy above which a run is refined.
pub const HALVING_TOL: f64 = 1e-6;

/// Integrates at `step` and `step/2`; if they differ by more than
/// [`HALVING_TOL`], reruns once at `step/10` (checked against `step/20`).
pub fn integrate_checked(ds: &DynSystem, u0: &[f64], params: &Point, t_span: (f64, f64), step: f64) -> Result<Trajectory> {
    let coarse = integrate(ds, u0, params, t_span, step)?;
    let fine = integrate(ds, u0, params, t_span, step / 2.0)?;
    if coarse.sup_distance(&fine) <= HALVING_TOL {
        return Ok(coarse);
    }
    let coarse = integrate(ds, u0, params, t_span, step / 10.0)?;
    let fine = integrate(ds, u0, params, t_span, step / 20.0)?;
    let discrepancy = coarse.sup_distance(&fine);
    if discrepancy > HALVING_TOL {
        return Err(Error::StepTooLarge { discrepancy });
    }
    Ok(coarse)
}

/// Values of `exprs` along a trajectory of a DS in the same coordinates.
pub fn project(exprs: &[Expr], traj: &Trajectory, params: &Point) -> Result<Vec<Vec<f64>>> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, u)| {
            let mut p = params.clone();
            p.set(Symbol::Time, t);
            for (a, v) in u.iter().enumerate() {
                p.set(Symbol::Dep(a + 1), *v);
            }
            let mut ev = Evaluator::new(&p);
            exprs.iter().map(|e| ev.eval(e)).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, ParseContext};

    fn ds(c: &[&str]) -> DynSystem {
        let ctx = ParseContext::new(c.len(), 1);
        DynSystem::new(c.iter().map(|s| parse(s, &ctx).unwrap()).collect()).unwrap()
    }

    #[test]
    fn constant_field() {
        let tr = integrate(&ds(&["0", "0"]), &[0.3, -2.0], &Point::new(), (0.0, 1.0), 0.1).unwrap();
        assert_eq!(tr.states.len(), 11);
        assert!(tr.states.iter().all(|s| s == &vec![0.3, -2.0]));
    }

    #[test]
    fn logistic_closed_forms() {
        // ẇ = 2w + 2w², w(0) = 1 has w = e^{2t}/(2 − e^{2t}).
        let tr = integrate(&ds(&["2*u1 + 2*u1^2"]), &[1.0], &Point::new(), (0.0, 0.1), 1e-4).unwrap();
        let e = (0.2f64).exp();
        assert!((tr.last()[0] - e / (2.0 - e)).abs() < 1e-8);
        let tr = integrate(&ds(&["1 - u1^2"]), &[0.0], &Point::new(), (0.0, 1.0), 1e-4).unwrap();
        assert!((tr.last()[0] - 1f64.tanh()).abs() < 1e-8);
    }

    #[test]
    fn blow_up_is_reported() {
        // ẋ = x², x(0) = 1 escapes at t = 1.
        let err = integrate(&ds(&["u1^2"]), &[1.0], &Point::new(), (0.0, 2.0), 1e-3).unwrap_err();
        let Error::BlowUp { time } = err else { panic!("{err:?}") };
        assert!((0.99..1.01).contains(&time), "{time}");
        let err = integrate(&ds(&["1/(1 - t)"]), &[0.0], &Point::new(), (0.0, 2.0), 0.25).unwrap_err();
        assert!(matches!(err, Error::BlowUp { .. }), "{err:?}");
    }

    #[test]
    fn halving_check_refines_or_fails() {
        let d = ds(&["1 - u1^2"]);
        let ok = integrate_checked(&d, &[0.0], &Point::new(), (0.0, 1.0), 0.05).unwrap();
        assert!((ok.last()[0] - 1f64.tanh()).abs() < 1e-6);
        let stiff = ds(&["-2000*u1"]);
        assert!(matches!(integrate_checked(&stiff, &[1.0], &Point::new(), (0.0, 1.0), 0.01), Err(Error::StepTooLarge { .. }) | Err(Error::BlowUp { .. })));
    }
}
