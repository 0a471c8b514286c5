//! RK4 convergence against closed forms.

use sigmared::integrate::integrate;
use sigmared::system::DynSystem;
use sigmared::{parse, ParseContext, Point};

fn error(rhs: &str, w0: f64, t1: f64, exact: f64, step: f64) -> f64 {
    let ds = DynSystem::new(vec![parse(rhs, &ParseContext::new(1, 1)).unwrap()]).unwrap();
    let tr = integrate(&ds, &[w0], &Point::new(), (0.0, t1), step).unwrap();
    (tr.last()[0] - exact).abs()
}

#[test]
fn halving_the_step_divides_the_error_by_about_sixteen() {
    let e = 0.6f64.exp();
    let cases = [
        ("2*u1 + 2*u1^2", 1.0, 0.3, e / (2.0 - e)),
        ("1 - u1^2", 0.0, 1.0, 1f64.tanh()),
    ];
    for (rhs, w0, t1, exact) in cases {
        let coarse = error(rhs, w0, t1, exact, 0.02);
        let fine = error(rhs, w0, t1, exact, 0.01);
        let ratio = coarse / fine;
        assert!((12.0..=20.0).contains(&ratio), "{rhs}: ratio {ratio} ({coarse:e} / {fine:e})");
    }
}
