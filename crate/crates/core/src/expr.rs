//! Defining expressions: a small real-analytic expression language over
//! `z_k`, `conj(z_k)` and `abs2(z_k)`.
//!
//! The parser accepts
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := base ('^' integer)?
//! base   := number | z<k> | conj(z<k>) | abs2(z<k>)
//!         | exp(expr) | log(expr) | (expr)
//! ```
//!
//! with insignificant whitespace. A leading `-` on a term is accepted as a
//! convenience. Profile expressions (right-hand sides of the radial solver)
//! use the single real variable `t` instead of `z<k>`.

use std::fmt;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::jet::{ComplexJet, Jet};
use crate::scalar::Scalar;
use crate::wirtinger::complex_coordinates;

/// Number of random points used to certify that an expression is real.
pub const REALNESS_SAMPLES: usize = 64;
/// Largest admissible imaginary part at a validation point.
pub const REALNESS_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    /// Complex constant; the parser only produces real ones.
    Const(Complex<f64>),
    /// `z_k`, zero-based.
    Var(usize),
    /// `conj(z_k)`, zero-based.
    ConjVar(usize),
    /// `|z_k|^2`, zero-based.
    Abs2(usize),
    /// The real profile variable `t`.
    Param,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, i32),
    Exp(Box<Expr>),
    Log(Box<Expr>),
}

/// What the parser accepts as variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variables {
    /// `z1 .. zn`.
    Complex(usize),
    /// The real variable `t`.
    Profile,
}

impl Expr {
    pub fn real(c: f64) -> Expr {
        Expr::Const(Complex::new(c, 0.0))
    }

    pub fn constant(c: Complex<f64>) -> Expr {
        Expr::Const(c)
    }

    fn as_const(&self) -> Option<Complex<f64>> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    fn is_zero(&self) -> bool {
        self.as_const() == Some(Complex::new(0.0, 0.0))
    }

    fn is_one(&self) -> bool {
        self.as_const() == Some(Complex::new(1.0, 0.0))
    }

    /// Sum with constant folding.
    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x + y),
            _ if a.is_zero() => b,
            _ if b.is_zero() => a,
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x - y),
            _ if b.is_zero() => a,
            _ if a.is_zero() => Expr::neg(b),
            _ => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x * y),
            _ if a.is_zero() || b.is_zero() => Expr::real(0.0),
            _ if a.is_one() => b,
            _ if b.is_one() => a,
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != Complex::new(0.0, 0.0) => Expr::Const(x / y),
            _ if a.is_zero() => Expr::real(0.0),
            _ if b.is_one() => a,
            _ => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn pow(a: Expr, n: i32) -> Expr {
        match (n, a.as_const()) {
            (0, _) => Expr::real(1.0),
            (1, _) => a,
            (_, Some(c)) if n > 0 || c != Complex::new(0.0, 0.0) => Expr::Const(c.powi(n)),
            _ => Expr::Pow(Box::new(a), n),
        }
    }

    pub fn exp(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::Const(c.exp()),
            None => Expr::Exp(Box::new(a)),
        }
    }

    pub fn log(a: Expr) -> Expr {
        Expr::Log(Box::new(a))
    }

    /// `sum_k |z_k|^2 / a_k^2 - 1` over the given semi-axes.
    pub fn ellipsoid(semi_axes: &[f64]) -> Expr {
        let mut e = Expr::real(-1.0);
        for (k, &a) in semi_axes.iter().enumerate().rev() {
            let term = if a == 1.0 {
                Expr::Abs2(k)
            } else {
                Expr::div(Expr::Abs2(k), Expr::real(a * a))
            };
            e = Expr::add(term, e);
        }
        e
    }

    /// Largest variable index used, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Param => 0,
            Expr::Var(k) | Expr::ConjVar(k) | Expr::Abs2(k) => k + 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.arity().max(b.arity())
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Exp(a) | Expr::Log(a) => a.arity(),
        }
    }

    /// Complex conjugate expression.
    pub fn conj(&self) -> Expr {
        self.map_leaves(&|leaf| match leaf {
            Expr::Const(c) => Expr::Const(c.conj()),
            Expr::Var(k) => Expr::ConjVar(*k),
            Expr::ConjVar(k) => Expr::Var(*k),
            other => other.clone(),
        })
    }

    /// Replaces `z_k` by `holo[k]` and `conj(z_k)` by `anti[k]`.
    pub fn substitute(&self, holo: &[Expr], anti: &[Expr]) -> Expr {
        self.map_leaves(&|leaf| match leaf {
            Expr::Var(k) => holo[*k].clone(),
            Expr::ConjVar(k) => anti[*k].clone(),
            Expr::Abs2(k) => Expr::mul(holo[*k].clone(), anti[*k].clone()),
            other => other.clone(),
        })
    }

    /// Pulls the expression back by the linear map `z -> M z`.
    pub fn compose_linear(&self, m: &[Vec<Complex<f64>>]) -> Expr {
        let holo: Vec<Expr> = m
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold(Expr::real(0.0), |acc, (j, &c)| {
                        if c == Complex::new(0.0, 0.0) {
                            acc
                        } else {
                            Expr::add(acc, Expr::mul(Expr::Const(c), Expr::Var(j)))
                        }
                    })
            })
            .collect();
        let anti: Vec<Expr> = holo.iter().map(Expr::conj).collect();
        self.substitute(&holo, &anti)
    }

    fn map_leaves(&self, f: &dyn Fn(&Expr) -> Expr) -> Expr {
        match self {
            Expr::Add(a, b) => Expr::add(a.map_leaves(f), b.map_leaves(f)),
            Expr::Sub(a, b) => Expr::sub(a.map_leaves(f), b.map_leaves(f)),
            Expr::Mul(a, b) => Expr::mul(a.map_leaves(f), b.map_leaves(f)),
            Expr::Div(a, b) => Expr::div(a.map_leaves(f), b.map_leaves(f)),
            Expr::Neg(a) => Expr::neg(a.map_leaves(f)),
            Expr::Pow(a, n) => Expr::pow(a.map_leaves(f), *n),
            Expr::Exp(a) => Expr::exp(a.map_leaves(f)),
            Expr::Log(a) => Expr::log(a.map_leaves(f)),
            leaf => f(leaf),
        }
    }

    /// Symbolic `d/dz_k` (`conjugate = false`) or `d/dzbar_k` (`true`).
    pub fn wirtinger(&self, k: usize, conjugate: bool) -> Expr {
        let d = |e: &Expr| e.wirtinger(k, conjugate);
        match self {
            Expr::Const(_) | Expr::Param => Expr::real(0.0),
            Expr::Var(j) => Expr::real(if *j == k && !conjugate { 1.0 } else { 0.0 }),
            Expr::ConjVar(j) => Expr::real(if *j == k && conjugate { 1.0 } else { 0.0 }),
            Expr::Abs2(j) if *j == k => {
                if conjugate {
                    Expr::Var(k)
                } else {
                    Expr::ConjVar(k)
                }
            }
            Expr::Abs2(_) => Expr::real(0.0),
            Expr::Add(a, b) => Expr::add(d(a), d(b)),
            Expr::Sub(a, b) => Expr::sub(d(a), d(b)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(d(a), (**b).clone()),
                Expr::mul((**a).clone(), d(b)),
            ),
            Expr::Div(a, b) => {
                // (a' b - a b') / b^2
                let num = Expr::sub(
                    Expr::mul(d(a), (**b).clone()),
                    Expr::mul((**a).clone(), d(b)),
                );
                Expr::div(num, Expr::pow((**b).clone(), 2))
            }
            Expr::Neg(a) => Expr::neg(d(a)),
            Expr::Pow(a, n) => Expr::mul(
                Expr::mul(Expr::real(*n as f64), Expr::pow((**a).clone(), n - 1)),
                d(a),
            ),
            Expr::Exp(a) => Expr::mul(self.clone(), d(a)),
            Expr::Log(a) => Expr::div(d(a), (**a).clone()),
        }
    }

    /// Real gradient `(dF/dx_1, dF/dy_1, ...)` of a real expression, as
    /// expressions: `F_x = 2 Re dF/dz`, `F_y = -2 Im dF/dz`.
    pub fn real_gradient(&self, n: usize) -> Vec<(Expr, Expr)> {
        (0..n)
            .map(|k| {
                let dz = self.wirtinger(k, false);
                let dzbar = self.wirtinger(k, true);
                // 2 Re w = w + conj(w); -2 Im w = i (w - conj(w)); conj(dF/dz) = dF/dzbar.
                let fx = Expr::add(dz.clone(), dzbar.clone());
                let fy = Expr::mul(Expr::Const(Complex::new(0.0, 1.0)), Expr::sub(dz, dzbar));
                (fx, fy)
            })
            .collect()
    }

    /// Evaluates at a complex point.
    pub fn eval(&self, z: &[Complex<f64>]) -> Result<Complex<f64>> {
        self.eval_with(z, 0.0)
    }

    fn eval_with(&self, z: &[Complex<f64>], t: f64) -> Result<Complex<f64>> {
        let e = |x: &Expr| x.eval_with(z, t);
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Param => Complex::new(t, 0.0),
            Expr::Var(k) => *var(z, *k)?,
            Expr::ConjVar(k) => var(z, *k)?.conj(),
            Expr::Abs2(k) => Complex::new(var(z, *k)?.norm_sqr(), 0.0),
            Expr::Add(a, b) => e(a)? + e(b)?,
            Expr::Sub(a, b) => e(a)? - e(b)?,
            Expr::Mul(a, b) => e(a)? * e(b)?,
            Expr::Div(a, b) => {
                let d = e(b)?;
                if d.norm() < 1e-300 {
                    return Err(Error::Degenerate {
                        op: "div",
                        value: d.norm(),
                    });
                }
                e(a)? / d
            }
            Expr::Neg(a) => -e(a)?,
            Expr::Pow(a, n) => {
                let b = e(a)?;
                if *n < 0 && b.norm() < 1e-300 {
                    return Err(Error::Degenerate {
                        op: "powi",
                        value: b.norm(),
                    });
                }
                b.powi(*n)
            }
            Expr::Exp(a) => e(a)?.exp(),
            Expr::Log(a) => {
                let b = e(a)?;
                if b.norm() < 1e-300 {
                    return Err(Error::Degenerate {
                        op: "log",
                        value: b.norm(),
                    });
                }
                b.ln()
            }
        })
    }

    /// Real part of the value at a point given in interleaved real coordinates.
    pub fn eval_real(&self, x: &[f64]) -> Result<f64> {
        let z: Vec<Complex<f64>> = x.chunks(2).map(|p| Complex::new(p[0], p[1])).collect();
        Ok(self.eval(&z)?.re)
    }

    /// Profile value `f(t)`.
    pub fn eval_profile(&self, t: f64) -> Result<f64> {
        Ok(self.eval_with(&[], t)?.re)
    }

    /// Evaluates on complex jets.
    pub fn eval_jet<S: Scalar>(&self, z: &[ComplexJet<S>]) -> Result<ComplexJet<S>> {
        let layout = match z.first() {
            Some(j) => j.layout().clone(),
            None => {
                return Err(Error::Invalid(
                    "jet evaluation needs at least one coordinate".into(),
                ))
            }
        };
        let cst = |c: Complex<f64>| {
            ComplexJet::constant(&layout, Complex::new(S::from_f64(c.re), S::from_f64(c.im)))
        };
        let e = |x: &Expr| x.eval_jet(z);
        let get = |k: usize| {
            z.get(k).ok_or(Error::BadVariable {
                index: k + 1,
                n: z.len(),
            })
        };
        Ok(match self {
            Expr::Const(c) => cst(*c),
            Expr::Param => {
                return Err(Error::Invalid(
                    "profile variable `t` in a domain expression".into(),
                ))
            }
            Expr::Var(k) => get(*k)?.clone(),
            Expr::ConjVar(k) => get(*k)?.conj(),
            Expr::Abs2(k) => ComplexJet::real(get(*k)?.norm_sqr()),
            Expr::Add(a, b) => e(a)?.add(&e(b)?),
            Expr::Sub(a, b) => e(a)?.sub(&e(b)?),
            Expr::Mul(a, b) => match (a.as_const(), b.as_const()) {
                (Some(c), _) => e(b)?.scale(cast(c)),
                (_, Some(c)) => e(a)?.scale(cast(c)),
                _ => e(a)?.mul(&e(b)?),
            },
            Expr::Div(a, b) => match b.as_const() {
                Some(c) if c != Complex::new(0.0, 0.0) => {
                    e(a)?.scale(cast(Complex::new(1.0, 0.0) / c))
                }
                _ => e(a)?.div(&e(b)?)?,
            },
            Expr::Neg(a) => e(a)?.neg(),
            Expr::Pow(a, n) => e(a)?.powi(*n)?,
            Expr::Exp(a) => e(a)?.exp(),
            Expr::Log(a) => e(a)?.ln()?,
        })
    }

    /// Evaluates a real expression on jets of interleaved real coordinates,
    /// returning the real part.
    pub fn eval_real_jet<S: Scalar>(&self, x: &[Jet<S>]) -> Result<Jet<S>> {
        Ok(self.eval_jet(&complex_coordinates(x))?.re)
    }

    /// Rejects expressions that are not real-valued, using seeded random
    /// points in `[-1.5, 1.5]^{2n}`.
    pub fn validate_real(&self, n: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut evaluated = 0;
        for _ in 0..REALNESS_SAMPLES * 4 {
            if evaluated == REALNESS_SAMPLES {
                break;
            }
            let z: Vec<Complex<f64>> = (0..n)
                .map(|_| Complex::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)))
                .collect();
            let Ok(v) = self.eval(&z) else { continue };
            if !v.re.is_finite() || !v.im.is_finite() {
                continue;
            }
            evaluated += 1;
            if v.im.abs() > REALNESS_TOLERANCE * v.re.abs().max(1.0) {
                let point = z.iter().flat_map(|c| [c.re, c.im]).collect();
                return Err(Error::NonReal {
                    imag: v.im,
                    point: Some(point),
                });
            }
        }
        if evaluated == 0 {
            return Err(Error::Invalid(
                "expression could not be evaluated at any validation point".into(),
            ));
        }
        Ok(())
    }
}

fn cast<S: Scalar>(c: Complex<f64>) -> Complex<S> {
    Complex::new(S::from_f64(c.re), S::from_f64(c.im))
}

fn var(z: &[Complex<f64>], k: usize) -> Result<&Complex<f64>> {
    z.get(k).ok_or(Error::BadVariable {
        index: k + 1,
        n: z.len(),
    })
}

fn fmt_const(c: Complex<f64>, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c.im == 0.0 {
        if c.re < 0.0 {
            write!(f, "({})", c.re)
        } else {
            write!(f, "{}", c.re)
        }
    } else {
        write!(f, "({}{:+}i)", c.re, c.im)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => fmt_const(*c, f),
            Expr::Var(k) => write!(f, "z{}", k + 1),
            Expr::ConjVar(k) => write!(f, "conj(z{})", k + 1),
            Expr::Abs2(k) => write!(f, "abs2(z{})", k + 1),
            Expr::Param => f.write_str("t"),
            Expr::Add(a, b) => write!(f, "{a} + {b}"),
            Expr::Sub(a, b) => match **b {
                Expr::Add(..) | Expr::Sub(..) | Expr::Neg(_) => write!(f, "{a} - ({b})"),
                _ => write!(f, "{a} - {b}"),
            },
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                let op = if matches!(self, Expr::Mul(..)) {
                    '*'
                } else {
                    '/'
                };
                let wrap_a = matches!(**a, Expr::Add(..) | Expr::Sub(..) | Expr::Neg(_));
                let wrap_b = matches!(
                    **b,
                    Expr::Add(..) | Expr::Sub(..) | Expr::Neg(_) | Expr::Mul(..) | Expr::Div(..)
                );
                if wrap_a {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " {op} ")?;
                if wrap_b {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Pow(a, n) => match **a {
                Expr::Var(_)
                | Expr::ConjVar(_)
                | Expr::Abs2(_)
                | Expr::Param
                | Expr::Exp(_)
                | Expr::Log(_) => {
                    write!(f, "{a}^{n}")
                }
                _ => write!(f, "({a})^{n}"),
            },
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Log(a) => write!(f, "log({a})"),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: Variables,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            pos: self.pos,
            msg: msg.into(),
        })
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
            self.err(format!("expected `{}`", c as char))
        }
    }

    fn keyword(&mut self, word: &str) -> bool {
        self.skip_ws();
        let w = word.as_bytes();
        if self.src[self.pos..].starts_with(w) {
            self.pos += w.len();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                acc = Expr::add(acc, self.term()?);
            } else if self.eat(b'-') {
                acc = Expr::sub(acc, self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let negate = self.eat(b'-');
        let mut acc = self.factor()?;
        loop {
            if self.eat(b'*') {
                acc = Expr::mul(acc, self.factor()?);
            } else if self.eat(b'/') {
                acc = Expr::div(acc, self.factor()?);
            } else {
                break;
            }
        }
        Ok(if negate { Expr::neg(acc) } else { acc })
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.base()?;
        if self.eat(b'^') {
            self.skip_ws();
            let start = self.pos;
            let neg = self.eat(b'-');
            self.skip_ws();
            let digits = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits {
                self.pos = start;
                return self.err("expected an integer exponent");
            }
            let text = std::str::from_utf8(&self.src[digits..self.pos]).unwrap();
            let Ok(mut n) = text.parse::<i32>() else {
                self.pos = start;
                return self.err("exponent out of range");
            };
            if neg {
                n = -n;
            }
            return Ok(Expr::pow(base, n));
        }
        Ok(base)
    }

    fn variable(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        if !self.keyword("z") {
            return self.err("expected a variable z<k>");
        }
        let digits = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if digits == self.pos {
            return self.err("expected a variable index after `z`");
        }
        let k: usize = std::str::from_utf8(&self.src[digits..self.pos])
            .unwrap()
            .parse()
            .unwrap_or(0);
        match self.vars {
            Variables::Complex(n) if k >= 1 && k <= n => Ok(k - 1),
            Variables::Complex(n) => {
                self.pos = start;
                Err(Error::BadVariable { index: k, n })
            }
            Variables::Profile => {
                self.pos = start;
                self.err("profile expressions use the variable `t`, not z<k>")
            }
        }
    }

    fn base(&mut self) -> Result<Expr> {
        match self.peek() {
            None => self.err("unexpected end of input"),
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(_) => {
                if self.keyword("conj(") {
                    let k = self.variable()?;
                    self.expect(b')')?;
                    Ok(Expr::ConjVar(k))
                } else if self.keyword("abs2(") {
                    let k = self.variable()?;
                    self.expect(b')')?;
                    Ok(Expr::Abs2(k))
                } else if self.keyword("exp(") {
                    let e = self.expr()?;
                    self.expect(b')')?;
                    Ok(Expr::exp(e))
                } else if self.keyword("log(") {
                    let e = self.expr()?;
                    self.expect(b')')?;
                    Ok(Expr::log(e))
                } else if self.src[self.pos] == b'z' {
                    Ok(Expr::Var(self.variable()?))
                } else if self.src[self.pos] == b't' && self.vars == Variables::Profile {
                    self.pos += 1;
                    Ok(Expr::Param)
                } else {
                    self.err(format!(
                        "unexpected character `{}`",
                        self.src[self.pos] as char
                    ))
                }
            }
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            digits(self);
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let d = self.pos;
            digits(self);
            if d == self.pos {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match text.parse::<f64>() {
            Ok(v) => Ok(Expr::real(v)),
            Err(_) => {
                self.pos = start;
                self.err(format!("malformed number `{text}`"))
            }
        }
    }
}

fn parse_with(text: &str, vars: Variables) -> Result<Expr> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        vars,
    };
    let e = p.expr()?;
    if p.peek().is_some() {
        return p.err("trailing input");
    }
    Ok(e)
}

/// Parses a defining expression in `n` complex variables and checks that it
/// is real-valued.
pub fn parse_expression(text: &str, n: usize) -> Result<Expr> {
    if n == 0 {
        return Err(Error::Invalid("dimension must be at least 1".into()));
    }
    let e = parse_with(text, Variables::Complex(n))?;
    e.validate_real(n, 0x5eed)?;
    Ok(e)
}

/// Parses a profile expression in the real variable `t`.
pub fn parse_profile(text: &str) -> Result<Expr> {
    parse_with(text, Variables::Profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::lift_point;

    fn c(x: f64, y: f64) -> Complex<f64> {
        Complex::new(x, y)
    }

    #[test]
    fn sphere_vanishes_on_boundary() {
        let e = parse_expression("abs2(z1) + abs2(z2) - 1", 2).unwrap();
        assert_eq!(e.eval(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn ellipsoid_boundary_point() {
        let e = parse_expression("abs2(z1)/4 + abs2(z2) - 1", 2).unwrap();
        assert!(e.eval(&[c(2.0, 0.0), c(0.0, 0.0)]).unwrap().norm() < 1e-15);
    }

    #[test]
    fn holomorphic_coordinate_is_not_real() {
        match parse_expression("z1", 2) {
            Err(Error::NonReal { point: Some(p), .. }) => assert_eq!(p.len(), 4),
            other => panic!("expected a realness violation, got {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_positions() {
        assert!(matches!(
            parse_expression("abs2(z1) + * 2", 2),
            Err(Error::Syntax { pos: 11, .. })
        ));
        assert!(matches!(
            parse_expression("abs2(z1", 2),
            Err(Error::Syntax { pos: 7, .. })
        ));
        assert!(matches!(
            parse_expression("abs2(z3) - 1", 2),
            Err(Error::BadVariable { index: 3, n: 2 })
        ));
        assert!(matches!(
            parse_expression("abs2(z1) 1", 2),
            Err(Error::Syntax { .. })
        ));
        assert!(matches!(
            parse_expression("", 2),
            Err(Error::Syntax { pos: 0, .. })
        ));
    }

    #[test]
    fn grammar_covers_all_forms() {
        let e = parse_expression(
            "exp(abs2(z1) - 1) * (z1*conj(z1) + z2 * conj(z2))^2 / 2 + log(1 + abs2(z2)) - 1.5e0",
            2,
        )
        .unwrap();
        let z = [c(0.3, -0.2), c(0.1, 0.4)];
        let a = z[0].norm_sqr();
        let b = z[1].norm_sqr();
        let want = (a - 1.0).exp() * (a + b).powi(2) / 2.0 + (1.0 + b).ln() - 1.5;
        assert!((e.eval(&z).unwrap().re - want).abs() < 1e-14);
    }

    #[test]
    fn whitespace_is_insignificant() {
        let a = parse_expression("abs2(z1)+abs2(z2)-1", 2).unwrap();
        let b = parse_expression("  abs2( z1 ) +\tabs2(z2 )\n- 1 ", 2).unwrap();
        let z = [c(0.2, 0.7), c(-0.4, 0.1)];
        assert_eq!(a.eval(&z).unwrap(), b.eval(&z).unwrap());
    }

    #[test]
    fn display_roundtrips() {
        for text in [
            "abs2(z1)/4 + abs2(z2) - 1",
            "exp(abs2(z1)) - (z1 + conj(z1))^2 * 0.25 - 1",
            "abs2(z1) + abs2(z2) - 1 - (abs2(z1) - 2)",
        ] {
            let e = parse_expression(text, 2).unwrap();
            let again = parse_expression(&e.to_string(), 2).unwrap();
            let z = [c(0.31, -0.2), c(0.5, 0.25)];
            assert!(
                (e.eval(&z).unwrap() - again.eval(&z).unwrap()).norm() < 1e-14,
                "{e}"
            );
        }
    }

    #[test]
    fn symbolic_wirtinger_matches_jets() {
        let e = parse_expression(
            "exp(abs2(z1)) * (z1 + conj(z1))^2 + abs2(z2)^3 / (2 + abs2(z1))",
            2,
        )
        .unwrap();
        let x = [0.3, -0.4, 0.2, 0.5];
        let jets = lift_point(&x, 1).unwrap();
        let f = e.eval_jet(&complex_coordinates(&jets)).unwrap();
        let z: Vec<Complex<f64>> = x.chunks(2).map(|p| c(p[0], p[1])).collect();
        for k in 0..2 {
            let sym = e.wirtinger(k, false).eval(&z).unwrap();
            let num = crate::wirtinger::dz(&f, k);
            assert!((sym - num).norm() < 1e-13);
            let (gx, gy) = &e.real_gradient(2)[k];
            assert!((gx.eval(&z).unwrap().re - f.re.d1(2 * k)).abs() < 1e-13);
            assert!((gy.eval(&z).unwrap().re - f.re.d1(2 * k + 1)).abs() < 1e-13);
        }
    }

    #[test]
    fn unitary_pullback_of_sphere_is_sphere() {
        let s = 0.5f64.sqrt();
        let u = vec![vec![c(s, 0.0), c(0.0, s)], vec![c(0.0, s), c(s, 0.0)]];
        let e = parse_expression("abs2(z1) + abs2(z2) - 1", 2)
            .unwrap()
            .compose_linear(&u);
        e.validate_real(2, 7).unwrap();
        let z = [c(0.3, 0.1), c(-0.6, 0.2)];
        let want = z[0].norm_sqr() + z[1].norm_sqr() - 1.0;
        assert!((e.eval(&z).unwrap() - c(want, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn profiles_use_t() {
        let p = parse_profile("1 + t^2 * exp(t)").unwrap();
        assert!((p.eval_profile(0.5).unwrap() - (1.0 + 0.25 * 0.5f64.exp())).abs() < 1e-15);
        assert!(parse_profile("abs2(z1)").is_err());
        assert!(parse_expression("t + abs2(z1)", 1).is_err());
    }

    #[test]
    fn negative_exponents_and_unary_minus() {
        let e = parse_expression("-abs2(z1) + (1 + abs2(z2))^-1", 2).unwrap();
        let z = [c(0.5, 0.0), c(1.0, 0.0)];
        assert!((e.eval(&z).unwrap().re - (-0.25 + 0.5)).abs() < 1e-15);
    }
}
