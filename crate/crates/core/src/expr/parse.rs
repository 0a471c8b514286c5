//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' unary)?
//! atom   := number | symbol | func '(' expr ')' | '(' expr ')'
//! symbol := 't' | 'u'<digits> | 'u{' a '}' | 'u{' a ',' k '}' | 'd(' u ',' k ')'
//!           | alias | parameter, each optionally followed by primes
//! ```
//!
//! Exponents must fold to a constant half-integer.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use super::{Exponent, Expr, Func, Symbol, Q_MAX};
use crate::error::{Error, Result};

/// Declared names and dimensions for parsing.
#[derive(Clone, Debug)]
pub struct ParseContext {
    pub n: usize,
    pub q_max: usize,
    pub params: BTreeSet<String>,
    /// Named subexpressions; an alias bound to a bare `u^a` accepts primes.
    pub aliases: BTreeMap<String, Expr>,
}

impl ParseContext {
    pub fn new(n: usize, q_max: usize) -> Self {
        ParseContext { n, q_max: q_max.min(Q_MAX), params: BTreeSet::new(), aliases: BTreeMap::new() }
    }

    pub fn with_params<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.params.extend(names.into_iter().map(Into::into));
        self
    }

    pub fn with_alias(mut self, name: &str, e: Expr) -> Self {
        self.aliases.insert(name.to_string(), e);
        self
    }
}

pub fn parse(text: &str, ctx: &ParseContext) -> Result<Expr> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, ctx };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    ctx: &'a ParseContext,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Syntax { offset: self.pos, message: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat(b'+') {
                terms.push(self.term()?);
            } else if self.eat(b'-') {
                terms.push(self.term()?.neg());
            } else {
                break;
            }
        }
        Ok(Expr::add_all(terms))
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.unary()?;
                acc = acc.mul(&rhs);
            } else if self.peek() == Some(b'/') {
                let at = self.pos;
                self.pos += 1;
                let rhs = self.unary()?;
                acc = acc.try_div(&rhs).ok_or(Error::Syntax {
                    offset: at,
                    message: "division by the constant 0".into(),
                })?;
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(self.unary()?.neg());
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let at = self.pos;
            let ex = self.unary()?;
            let c = ex.as_const().ok_or(Error::Syntax { offset: at, message: "exponent must be constant".into() })?;
            let two = BigInt::from(2);
            if !(c.denom().is_one() || *c.denom() == two) {
                return Err(Error::Syntax { offset: at, message: "exponent must be a half-integer".into() });
            }
            let num = c.numer().to_i64().ok_or(Error::Syntax { offset: at, message: "exponent too large".into() })?;
            let den = c.denom().to_i64().unwrap();
            return Ok(base.pow(Exponent::new(num, den)));
        }
        Ok(base)
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let int_part = &self.src[start..self.pos];
        let mut frac_part: &[u8] = &[];
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            let fs = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            frac_part = &self.src[fs..self.pos];
        }
        let mut exp10: i64 = 0;
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            let neg = if self.pos < self.src.len() && (self.src[self.pos] == b'-' || self.src[self.pos] == b'+') {
                self.pos += 1;
                self.src[self.pos - 1] == b'-'
            } else {
                false
            };
            let es = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if es == self.pos {
                self.pos = save;
            } else {
                let v: i64 = std::str::from_utf8(&self.src[es..self.pos]).unwrap().parse().map_err(|_| self.err("bad exponent"))?;
                exp10 = if neg { -v } else { v };
            }
        }
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(self.err("malformed number"));
        }
        let digits: String = std::str::from_utf8(int_part).unwrap().to_string() + std::str::from_utf8(frac_part).unwrap();
        let mantissa: BigInt = digits.parse().map_err(|_| self.err("malformed number"))?;
        let scale = exp10 - frac_part.len() as i64;
        let ten = BigInt::from(10);
        let value = if scale >= 0 {
            BigRational::from_integer(mantissa * num_traits::pow(ten, scale as usize))
        } else {
            BigRational::new(mantissa, num_traits::pow(ten, (-scale) as usize))
        };
        Ok(Expr::constant(value))
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn uint(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).unwrap().parse().map_err(|_| Error::Syntax {
            offset: start,
            message: "expected an index".into(),
        })
    }

    fn primes(&mut self) -> usize {
        let mut k = 0;
        while self.pos < self.src.len() && self.src[self.pos] == b'\'' {
            self.pos += 1;
            k += 1;
        }
        k
    }

    fn jet_symbol(&self, a: usize, k: usize, at: usize) -> Result<Expr> {
        if a == 0 || a > self.ctx.n {
            return Err(Error::UnknownSymbol(format!("u{{{a}}} (dimension is {})", self.ctx.n)));
        }
        if k > self.ctx.q_max {
            let _ = at;
            return Err(Error::JetOrderExceeded { order: k, max: self.ctx.q_max });
        }
        Ok(Expr::jet(a, k))
    }

    /// `u{a}` or `u{a,k}` after the leading `u`.
    fn braced_u(&mut self, at: usize) -> Result<Expr> {
        self.expect(b'{')?;
        let a = self.uint()?;
        let k = if self.eat(b',') { self.uint()? } else { 0 };
        self.expect(b'}')?;
        let k = k + self.primes();
        self.jet_symbol(a, k, at)
    }

    fn atom(&mut self) -> Result<Expr> {
        let c = self.peek().ok_or_else(|| self.err("unexpected end of input"))?;
        let at = self.pos;
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(b')')?;
            return Ok(e);
        }
        if !(c.is_ascii_alphabetic() || c == b'_') {
            return Err(self.err(&format!("unexpected character `{}`", c as char)));
        }
        let name = self.ident();
        if name == "u" && self.src.get(self.pos) == Some(&b'{') {
            return self.braced_u(at);
        }
        if let Some(f) = Func::from_name(&name) {
            if self.peek() == Some(b'(') {
                self.pos += 1;
                let arg = self.expr()?;
                self.expect(b')')?;
                return Ok(Expr::apply(f, arg));
            }
        }
        if name == "d" && self.peek() == Some(b'(') {
            self.pos += 1;
            let inner = self.atom()?;
            let base = match inner.as_symbol() {
                Some(s @ (Symbol::Dep(_) | Symbol::Jet(..))) => s.clone(),
                _ => return Err(Error::Syntax { offset: at, message: "d(.,k) expects a u symbol".into() }),
            };
            self.expect(b',')?;
            let k = self.uint()?;
            self.expect(b')')?;
            let (a, k0) = (base.var_index().unwrap(), base.order().unwrap());
            return self.jet_symbol(a, k0 + k, at);
        }
        if let Some(e) = self.ctx.aliases.get(&name) {
            let e = e.clone();
            let k = self.primes();
            if k == 0 {
                return Ok(e);
            }
            return match e.as_symbol() {
                Some(Symbol::Dep(a)) => self.jet_symbol(*a, k, at),
                Some(Symbol::Jet(a, k0)) => self.jet_symbol(*a, k0 + k, at),
                _ => Err(Error::Syntax { offset: at, message: format!("`{name}` does not accept primes") }),
            };
        }
        if name == "t" {
            return Ok(Expr::t());
        }
        if let Some(rest) = name.strip_prefix('u') {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                let a: usize = rest.parse().map_err(|_| self.err("bad index"))?;
                let k = self.primes();
                return self.jet_symbol(a, k, at);
            }
        }
        if self.ctx.params.contains(&name) {
            return Ok(Expr::param(&name));
        }
        Err(Error::UnknownSymbol(name))
    }
}

/// Parses `lhs = rhs` where `lhs` must be a single symbol.
pub fn parse_solved(text: &str, ctx: &ParseContext) -> Result<(Symbol, Expr)> {
    let (l, r) = text.split_once('=').ok_or(Error::Syntax { offset: 0, message: "expected `lhs = rhs`".into() })?;
    let lhs = parse(l, ctx)?;
    let s = lhs.as_symbol().cloned().ok_or(Error::Syntax { offset: 0, message: "left-hand side must be a symbol".into() })?;
    let rhs = parse(r, ctx).map_err(|e| match e {
        Error::Syntax { offset, message } => Error::Syntax { offset: offset + l.len() + 1, message },
        other => other,
    })?;
    Ok((s, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::render;

    fn ctx() -> ParseContext {
        ParseContext::new(3, 3).with_params(["a", "c"])
    }

    #[test]
    fn parses_polynomial_rhs() {
        let e = parse("u1 + u1^2*u2", &ctx()).unwrap();
        let expected = Expr::add_all([Expr::u(1), Expr::mul_all([Expr::u(1).powi(2), Expr::u(2)])]);
        assert_eq!(e, expected);
        assert!(parse("0", &ctx()).unwrap().is_const_zero());
    }

    #[test]
    fn parses_jet_notations() {
        let e = parse("t*u{2,2} + t*u{2,1} + 2*u{2,1} + u2", &ctx()).unwrap();
        let syms = e.free_symbols();
        assert!(syms.contains(&Symbol::Jet(2, 2)));
        assert!(syms.contains(&Symbol::Jet(2, 1)));
        assert_eq!(parse("u{2}'", &ctx()).unwrap(), Expr::jet(2, 1));
        assert_eq!(parse("u2''", &ctx()).unwrap(), Expr::jet(2, 2));
        assert_eq!(parse("d(u{1},3)", &ctx()).unwrap(), Expr::jet(1, 3));
        assert_eq!(parse("d(u1',1)", &ctx()).unwrap(), Expr::jet(1, 2));
    }

    #[test]
    fn rational_literals_are_exact() {
        assert_eq!(parse("3/4", &ctx()).unwrap(), Expr::ratio(3, 4));
        assert_eq!(parse("0.25", &ctx()).unwrap(), Expr::ratio(1, 4));
        assert_eq!(parse("1e-4", &ctx()).unwrap(), Expr::ratio(1, 10000));
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse("-u1^2", &ctx()).unwrap();
        assert_eq!(e, Expr::u(1).powi(2).neg());
        let e = parse("u1/u2/u3", &ctx()).unwrap();
        assert_eq!(e, Expr::u(1).div(&Expr::u(2)).div(&Expr::u(3)));
        let e = parse("u1^(1/2)", &ctx()).unwrap();
        assert_eq!(render(&e), "u1^(1/2)");
    }

    #[test]
    fn errors() {
        assert!(matches!(parse("u1 +", &ctx()), Err(Error::Syntax { offset: 4, .. })));
        assert!(matches!(parse("u1 + zz", &ctx()), Err(Error::UnknownSymbol(s)) if s == "zz"));
        assert!(matches!(parse("u{1,4}", &ctx()), Err(Error::JetOrderExceeded { order: 4, max: 3 })));
        assert!(matches!(parse("u4", &ctx()), Err(Error::UnknownSymbol(_))));
        assert!(matches!(parse("u1^u2", &ctx()), Err(Error::Syntax { .. })));
        assert!(matches!(parse("u1^(1/3)", &ctx()), Err(Error::Syntax { .. })));
        assert!(matches!(parse("u1/(2-2)", &ctx()), Err(Error::Syntax { offset: 2, .. })));
    }

    #[test]
    fn aliases_take_primes() {
        let c = ctx().with_alias("eta1", Expr::u(1)).with_alias("W", parse("u1 - u2", &ctx()).unwrap());
        assert_eq!(parse("eta1''", &c).unwrap(), Expr::jet(1, 2));
        assert_eq!(parse("2*W", &c).unwrap(), parse("2*(u1 - u2)", &ctx()).unwrap());
        assert!(parse("W'", &c).is_err());
    }

    #[test]
    fn solved_form() {
        let (s, rhs) = parse_solved("u{1,3} = t*u2", &ctx()).unwrap();
        assert_eq!(s, Symbol::Jet(1, 3));
        assert_eq!(rhs, Expr::t().mul(&Expr::u(2)));
    }
}
