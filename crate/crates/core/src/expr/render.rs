//! Canonical text output. `render(parse(render(e))) == render(e)` for every
//! expression built through the public constructors.

use num_traits::{One, Signed};

use super::{Expr, Node, Symbol};

/// Overrides the printed name of selected symbols (e.g. `y` for `u1` in ODE output).
pub trait Namer {
    fn name(&self, s: &Symbol) -> Option<String>;
}

struct Plain;

impl Namer for Plain {
    fn name(&self, _: &Symbol) -> Option<String> {
        None
    }
}

impl<F: Fn(&Symbol) -> Option<String>> Namer for F {
    fn name(&self, s: &Symbol) -> Option<String> {
        self(s)
    }
}

pub fn render(e: &Expr) -> String {
    render_with(e, &Plain)
}

pub fn render_with(e: &Expr, namer: &dyn Namer) -> String {
    let mut out = String::new();
    Renderer { namer }.write(e, &mut out);
    out
}

// Binding strength of the outermost construct of a rendered expression.
const SUM: u8 = 1;
const NEG: u8 = 2;
const PROD: u8 = 3;
const ATOM: u8 = 5;

struct Renderer<'a> {
    namer: &'a dyn Namer,
}

/// A quotient binds like a product unless its numerator prints a sign.
fn prec(e: &Expr) -> u8 {
    let is_div = matches!(e.node(), Node::Div(..));
    let mut e = e;
    while let Node::Div(n, _) = e.node() {
        e = n;
    }
    let p = match e.node() {
        Node::Const(c) => {
            if c.is_negative() {
                NEG
            } else if !c.denom().is_one() {
                PROD
            } else {
                ATOM
            }
        }
        Node::Sym(_) | Node::Apply(..) => ATOM,
        Node::Add(_) => SUM,
        Node::Neg(_) => NEG,
        Node::Mul(v) => {
            if v[0].as_const().is_some_and(|c| c.is_negative()) {
                NEG
            } else {
                PROD
            }
        }
        Node::Div(..) => unreachable!(),
        Node::Pow(..) => 4,
    };
    if is_div {
        p.min(PROD)
    } else {
        p
    }
}

impl Renderer<'_> {
    fn child(&self, e: &Expr, min: u8, out: &mut String) {
        if prec(e) < min {
            out.push('(');
            self.write(e, out);
            out.push(')');
        } else {
            self.write(e, out);
        }
    }

    fn write(&self, e: &Expr, out: &mut String) {
        match e.node() {
            Node::Const(c) => out.push_str(&c.to_string()),
            Node::Sym(s) => match self.namer.name(s) {
                Some(n) => out.push_str(&n),
                None => out.push_str(&s.to_string()),
            },
            Node::Add(v) => {
                // `1 - a` rather than `-a + 1`: a trailing constant moves to the
                // front when the leading term is negative.
                let mut order: Vec<&Expr> = v.iter().collect();
                if v.len() > 1 && v[v.len() - 1].as_const().is_some_and(|c| c.is_positive()) && prec(&v[0]) == NEG {
                    order.rotate_right(1);
                }
                for (i, term) in order.into_iter().enumerate() {
                    let mut s = String::new();
                    self.child(term, NEG, &mut s);
                    if i == 0 {
                        out.push_str(&s);
                    } else if let Some(rest) = s.strip_prefix('-') {
                        out.push_str(" - ");
                        out.push_str(rest);
                    } else {
                        out.push_str(" + ");
                        out.push_str(&s);
                    }
                }
            }
            Node::Mul(v) => {
                for (i, f) in v.iter().enumerate() {
                    if i > 0 {
                        out.push('*');
                    }
                    // The coefficient is always first and may carry the sign.
                    let min = if i == 0 && f.as_const().is_some() { NEG } else { PROD };
                    self.child(f, min, out);
                }
            }
            Node::Div(n, d) => {
                self.child(n, NEG, out);
                out.push('/');
                self.child(d, 4, out);
            }
            Node::Neg(x) => {
                out.push('-');
                self.child(x, PROD, out);
            }
            Node::Pow(b, ex) => {
                self.child(b, ATOM, out);
                out.push('^');
                if ex.is_integer() && *ex.numer() >= 0 {
                    out.push_str(&ex.numer().to_string());
                } else {
                    out.push('(');
                    out.push_str(&ex.to_string());
                    out.push(')');
                }
            }
            Node::Apply(f, x) => {
                out.push_str(f.name());
                out.push('(');
                self.write(x, out);
                out.push(')');
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, ParseContext};

    fn ctx() -> ParseContext {
        ParseContext::new(3, 3).with_params(["a"])
    }

    fn rt(src: &str) -> String {
        render(&parse(src, &ctx()).unwrap())
    }

    #[test]
    fn canonical_spellings() {
        assert_eq!(rt("2*(1-a)*u1"), "2*(1 - a)*u1");
        assert_eq!(rt("u1 - 3*u2 + -u3"), "u1 - 3*u2 - u3");
        assert_eq!(rt("u1/(u2*u3)"), "u1/(u2*u3)");
        assert_eq!(rt("(1 - u1*u2)/(u1 - u2^2)"), "(1 - u1*u2)/(u1 - u2^2)");
        assert_eq!(rt("u1^(-1)"), "u1^(-1)");
        assert_eq!(rt("(-u1)^2"), "(-u1)^2");
        assert_eq!(rt("u{1,2}"), "u{1,2}");
        assert_eq!(rt("-(u1 + u2)"), "-(u1 + u2)");
        assert_eq!(rt("u1 - 1/2"), "u1 - 1/2");
    }

    #[test]
    fn fixed_point_on_tricky_shapes() {
        for src in ["u1*u2/u3*u1", "-u1/u2", "u1 - u2/u3", "u1/(-3)", "(3/4)^(1/2)", "-3/4*u1", "u1/u2/u3", "-(u1/u2)/u3"] {
            let once = rt(src);
            assert_eq!(rt(&once), once, "{src}");
        }
    }

    #[test]
    fn namer_overrides() {
        let e = parse("u{1,2} + u1'", &ctx()).unwrap();
        let namer = |s: &Symbol| match s {
            Symbol::Jet(1, k) => Some(format!("y{}", "'".repeat(*k))),
            _ => None,
        };
        assert_eq!(render_with(&e, &namer), "y'' + y'");
    }
}
