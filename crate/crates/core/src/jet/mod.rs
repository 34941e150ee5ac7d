//! Truncated multivariate Taylor arithmetic ("jets").
//!
//! A [`Jet`] stores every Taylor coefficient of total degree `<= order` of a
//! scalar field in `nvars` real variables, densely, in graded-lexicographic
//! order. Products are Cauchy products truncated at `order`; elementary
//! functions are applied by composing their univariate Taylor series with the
//! nilpotent part of the argument.
//!
//! Coordinates of a point of `C^n` are interleaved as `(x1, y1, x2, y2, ...)`
//! with `z_k = x_k + i y_k`.

mod complex;
mod newton;

pub use complex::ComplexJet;
pub use newton::{jet_newton, newton_solve, JetSystem, NewtonOptions};

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest jet order accepted unless a caller raises it explicitly.
pub const DEFAULT_MAX_ORDER: usize = 8;

/// Base values with smaller magnitude are refused by `recip`/`ln`.
pub const DEGENERATE_BASE: f64 = 1e-30;

/// Multi-index bookkeeping shared by all jets of one `(nvars, order)`.
pub struct Layout {
    nvars: usize,
    order: usize,
    monomials: Vec<Vec<u8>>,
    degree_start: Vec<usize>,
    index: HashMap<Vec<u8>, usize>,
    products: Vec<(u32, u32, u32)>,
}

impl fmt::Debug for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Layout")
            .field("nvars", &self.nvars)
            .field("order", &self.order)
            .field("len", &self.monomials.len())
            .finish()
    }
}

fn monomials_of_degree(nvars: usize, degree: usize) -> Vec<Vec<u8>> {
    // Lexicographically descending exponent vectors of one total degree.
    fn rec(prefix: &mut Vec<u8>, left: usize, remaining: usize, out: &mut Vec<Vec<u8>>) {
        if left == 1 {
            prefix.push(remaining as u8);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e as u8);
            rec(prefix, left - 1, remaining - e, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if nvars == 0 {
        if degree == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(&mut Vec::with_capacity(nvars), nvars, degree, &mut out);
    out
}

/// Number of monomials of degree `<= order` in `nvars` variables.
pub fn monomial_count(nvars: usize, order: usize) -> usize {
    // C(nvars + order, order)
    let mut c: usize = 1;
    for k in 1..=order {
        c = c * (nvars + k) / k;
    }
    c
}

impl Layout {
    fn build(nvars: usize, order: usize) -> Layout {
        let mut monomials = Vec::new();
        let mut degree_start = Vec::with_capacity(order + 2);
        for d in 0..=order {
            degree_start.push(monomials.len());
            monomials.extend(monomials_of_degree(nvars, d));
        }
        degree_start.push(monomials.len());
        let index: HashMap<Vec<u8>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let degree = |m: &Vec<u8>| m.iter().map(|&e| e as usize).sum::<usize>();
        let mut products = Vec::new();
        let mut sum = vec![0u8; nvars];
        for (i, a) in monomials.iter().enumerate() {
            let da = degree(a);
            for (j, b) in monomials[..degree_start[order - da + 1]].iter().enumerate() {
                for v in 0..nvars {
                    sum[v] = a[v] + b[v];
                }
                let k = index[&sum];
                products.push((i as u32, j as u32, k as u32));
            }
        }
        Layout {
            nvars,
            order,
            monomials,
            degree_start,
            index,
            products,
        }
    }

    /// Shared layout for `(nvars, order)`, built once per process.
    pub fn get(nvars: usize, order: usize) -> Arc<Layout> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Layout>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("layout cache poisoned");
        guard
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(Layout::build(nvars, order)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomial(&self, i: usize) -> &[u8] {
        &self.monomials[i]
    }

    pub fn index_of(&self, multi: &[u8]) -> Option<usize> {
        self.index.get(multi).copied()
    }

    /// Index range holding the coefficients of total degree `d`.
    pub fn degree_range(&self, d: usize) -> std::ops::Range<usize> {
        self.degree_start[d]..self.degree_start[d + 1]
    }

    fn unit(&self, var: usize) -> usize {
        let mut m = vec![0u8; self.nvars];
        m[var] = 1;
        self.index[&m]
    }

    fn pair(&self, a: usize, b: usize) -> usize {
        let mut m = vec![0u8; self.nvars];
        m[a] += 1;
        m[b] += 1;
        self.index[&m]
    }
}

/// Truncated Taylor expansion of a real scalar field around a base point.
#[derive(Clone)]
pub struct Jet<S: Scalar = f64> {
    layout: Arc<Layout>,
    coeffs: Vec<S>,
}

impl<S: Scalar> fmt::Debug for Jet<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.layout.nvars)
            .field("order", &self.layout.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl<S: Scalar> PartialEq for Jet<S> {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout) && self.coeffs == other.coeffs
    }
}

/// Seeds one jet per coordinate: value in degree 0, unit derivative in its own slot.
pub fn lift_point<S: Scalar>(coords: &[S], order: usize) -> Result<Vec<Jet<S>>> {
    lift_point_with_limit(coords, order, DEFAULT_MAX_ORDER)
}

pub fn lift_point_with_limit<S: Scalar>(
    coords: &[S],
    order: usize,
    max_order: usize,
) -> Result<Vec<Jet<S>>> {
    if order > max_order {
        return Err(Error::OrderTooHigh {
            order,
            max: max_order,
        });
    }
    if coords.is_empty() {
        return Err(Error::Invalid(
            "cannot lift a point with no coordinates".into(),
        ));
    }
    let layout = Layout::get(coords.len(), order);
    Ok(coords
        .iter()
        .enumerate()
        .map(|(i, &x)| Jet::variable(&layout, i, x))
        .collect())
}

impl<S: Scalar> Jet<S> {
    pub fn constant(layout: &Arc<Layout>, value: S) -> Self {
        let mut coeffs = vec![S::zero(); layout.len()];
        coeffs[0] = value;
        Jet {
            layout: layout.clone(),
            coeffs,
        }
    }

    pub fn zero(layout: &Arc<Layout>) -> Self {
        Jet::constant(layout, S::zero())
    }

    /// Independent variable `var` with base value `value`.
    pub fn variable(layout: &Arc<Layout>, var: usize, value: S) -> Self {
        let mut j = Jet::constant(layout, value);
        if layout.order >= 1 {
            let k = layout.unit(var);
            j.coeffs[k] = S::one();
        }
        j
    }

    pub fn from_coeffs(layout: &Arc<Layout>, coeffs: Vec<S>) -> Result<Self> {
        if coeffs.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                expected: layout.len(),
                found: coeffs.len(),
            });
        }
        Ok(Jet {
            layout: layout.clone(),
            coeffs,
        })
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn nvars(&self) -> usize {
        self.layout.nvars
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn value(&self) -> S {
        self.coeffs[0]
    }

    /// Taylor coefficient of the monomial `x^multi`.
    pub fn coeff(&self, multi: &[u8]) -> S {
        self.layout
            .index_of(multi)
            .map_or(S::zero(), |i| self.coeffs[i])
    }

    /// First partial derivative with respect to `var`.
    pub fn d1(&self, var: usize) -> S {
        if self.layout.order < 1 {
            return S::zero();
        }
        self.coeffs[self.layout.unit(var)]
    }

    /// Second partial derivative with respect to `a` and `b`.
    pub fn d2(&self, a: usize, b: usize) -> S {
        if self.layout.order < 2 {
            return S::zero();
        }
        let c = self.coeffs[self.layout.pair(a, b)];
        if a == b {
            c + c
        } else {
            c
        }
    }

    pub fn gradient(&self) -> Vec<S> {
        (0..self.nvars()).map(|v| self.d1(v)).collect()
    }

    pub fn hessian(&self) -> Vec<Vec<S>> {
        let n = self.nvars();
        (0..n)
            .map(|a| (0..n).map(|b| self.d2(a, b)).collect())
            .collect()
    }

    /// Same field with a zero degree-0 coefficient.
    pub fn nilpotent(&self) -> Self {
        let mut u = self.clone();
        u.coeffs[0] = S::zero();
        u
    }

    pub fn scale(&self, s: S) -> Self {
        Jet {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|&c| c * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: S) -> Self {
        let mut j = self.clone();
        j.coeffs[0] += s;
        j
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.to_f64().abs()))
    }

    fn check_same(&self, other: &Self) {
        assert!(
            Arc::ptr_eq(&self.layout, &other.layout),
            "jets from different layouts: ({}, {}) vs ({}, {})",
            self.layout.nvars,
            self.layout.order,
            other.layout.nvars,
            other.layout.order
        );
    }

    fn mul_ref(&self, other: &Self) -> Self {
        self.check_same(other);
        let mut out = vec![S::zero(); self.coeffs.len()];
        let a = &self.coeffs;
        let b = &other.coeffs;
        for &(i, j, k) in &self.layout.products {
            let (i, j) = (i as usize, j as usize);
            if a[i] == S::zero() || b[j] == S::zero() {
                continue;
            }
            out[k as usize] += a[i] * b[j];
        }
        Jet {
            layout: self.layout.clone(),
            coeffs: out,
        }
    }

    /// `sum_k series[k] * u^k` with `u` the nilpotent part of `self`.
    pub fn compose(&self, series: &[S]) -> Self {
        let u = self.nilpotent();
        let d = self.layout.order.min(series.len().saturating_sub(1));
        let mut acc = Jet::constant(&self.layout, series[d]);
        for k in (0..d).rev() {
            acc = acc.mul_ref(&u).add_scalar(series[k]);
        }
        acc
    }

    fn guard_base(&self, op: &'static str) -> Result<S> {
        let a = self.value();
        if a.to_f64().abs() < DEGENERATE_BASE {
            return Err(Error::Degenerate {
                op,
                value: a.to_f64(),
            });
        }
        Ok(a)
    }

    pub fn recip(&self) -> Result<Self> {
        let a = self.guard_base("div")?;
        let inv = S::one() / a;
        let mut series = Vec::with_capacity(self.order() + 1);
        let mut c = inv;
        for _ in 0..=self.order() {
            series.push(c);
            c = -c * inv;
        }
        Ok(self.compose(&series))
    }

    pub fn try_div(&self, other: &Self) -> Result<Self> {
        Ok(self.mul_ref(&other.recip()?))
    }

    pub fn powi(&self, n: i32) -> Result<Self> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut base = self.clone();
        let mut e = n as u32;
        let mut acc = Jet::constant(&self.layout, S::one());
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_ref(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_ref(&base);
            }
        }
        Ok(acc)
    }

    /// Real power of a jet with positive base value.
    pub fn powf(&self, p: f64) -> Result<Self> {
        let a = self.value();
        if a.to_f64() <= 0.0 {
            return Err(Error::OutOfDomain {
                op: "pow",
                value: a.to_f64(),
            });
        }
        let inv = S::one() / a;
        let pp = S::from_f64(p);
        let mut series = Vec::with_capacity(self.order() + 1);
        let mut c = a.powf(p);
        for k in 0..=self.order() {
            series.push(c);
            c = c * (pp - S::from_usize(k)) * inv / S::from_usize(k + 1);
        }
        Ok(self.compose(&series))
    }

    pub fn sqrt(&self) -> Result<Self> {
        let a = self.value();
        if a.to_f64() <= 0.0 {
            return Err(Error::OutOfDomain {
                op: "sqrt",
                value: a.to_f64(),
            });
        }
        let inv = S::one() / a;
        let half = S::from_f64(0.5);
        let mut series = Vec::with_capacity(self.order() + 1);
        let mut c = a.sqrt();
        for k in 0..=self.order() {
            series.push(c);
            c = c * (half - S::from_usize(k)) * inv / S::from_usize(k + 1);
        }
        Ok(self.compose(&series))
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        let mut series = Vec::with_capacity(self.order() + 1);
        let mut c = e;
        for k in 0..=self.order() {
            series.push(c);
            c /= S::from_usize(k + 1);
        }
        self.compose(&series)
    }

    pub fn ln(&self) -> Result<Self> {
        let a = self.value();
        if a.to_f64() <= 0.0 {
            return Err(Error::OutOfDomain {
                op: "log",
                value: a.to_f64(),
            });
        }
        self.guard_base("log")?;
        let inv = S::one() / a;
        let mut series = vec![a.ln()];
        let mut p = inv;
        for k in 1..=self.order() {
            let sign = if k % 2 == 1 { S::one() } else { -S::one() };
            series.push(sign * p / S::from_usize(k));
            p *= inv;
        }
        Ok(self.compose(&series))
    }

    /// Partial derivative with respect to `var`, as a jet one order lower.
    pub fn derivative(&self, var: usize) -> Result<Self> {
        if self.order() == 0 {
            return Err(Error::Invalid("cannot differentiate an order-0 jet".into()));
        }
        let lower = Layout::get(self.nvars(), self.order() - 1);
        let mut out = vec![S::zero(); lower.len()];
        for (i, m) in self.layout.monomials.iter().enumerate() {
            if m[var] == 0 {
                continue;
            }
            let mut dm = m.clone();
            dm[var] -= 1;
            let k = lower.index[&dm];
            out[k] = self.coeffs[i] * S::from_usize(m[var] as usize);
        }
        Ok(Jet {
            layout: lower,
            coeffs: out,
        })
    }

    /// Drops every coefficient above degree `order`.
    pub fn truncate(&self, order: usize) -> Result<Self> {
        if order > self.order() {
            return Err(Error::Invalid(format!(
                "cannot truncate an order-{} jet to order {order}",
                self.order()
            )));
        }
        let lower = Layout::get(self.nvars(), order);
        let coeffs = self.coeffs[..lower.len()].to_vec();
        Ok(Jet {
            layout: lower,
            coeffs,
        })
    }

    /// Re-expresses the jet in another scalar type.
    pub fn cast<T: Scalar>(&self) -> Jet<T> {
        Jet {
            layout: self.layout.clone(),
            coeffs: self
                .coeffs
                .iter()
                .map(|c| T::from_f64(c.to_f64()))
                .collect(),
        }
    }

    /// Evaluates the truncated polynomial at displacement `h` from the base point.
    pub fn eval_at(&self, h: &[S]) -> S {
        let mut acc = S::zero();
        for (i, m) in self.layout.monomials.iter().enumerate() {
            let mut term = self.coeffs[i];
            for (v, &e) in m.iter().enumerate() {
                if e > 0 {
                    term *= h[v].powi(e as i32);
                }
            }
            acc += term;
        }
        acc
    }
}

impl<S: Scalar> Jet<S> {
    fn zip(&self, other: &Self, f: impl Fn(S, S) -> S) -> Self {
        self.check_same(other);
        Jet {
            layout: self.layout.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

macro_rules! jet_binops {
    ($($tr:ident $m:ident $body:expr),*) => {$(
        impl<'a, S: Scalar> $tr<&'a Jet<S>> for &'a Jet<S> {
            type Output = Jet<S>;
            fn $m(self, rhs: &'a Jet<S>) -> Jet<S> {
                let f: fn(&Jet<S>, &Jet<S>) -> Jet<S> = $body;
                f(self, rhs)
            }
        }
        impl<S: Scalar> $tr<Jet<S>> for Jet<S> {
            type Output = Jet<S>;
            fn $m(self, rhs: Jet<S>) -> Jet<S> {
                (&self).$m(&rhs)
            }
        }
        impl<'a, S: Scalar> $tr<&'a Jet<S>> for Jet<S> {
            type Output = Jet<S>;
            fn $m(self, rhs: &'a Jet<S>) -> Jet<S> {
                (&self).$m(rhs)
            }
        }
        impl<'a, S: Scalar> $tr<Jet<S>> for &'a Jet<S> {
            type Output = Jet<S>;
            fn $m(self, rhs: Jet<S>) -> Jet<S> {
                self.$m(&rhs)
            }
        }
    )*};
}

jet_binops!(
    Add add |a, b| a.zip(b, |x, y| x + y),
    Sub sub |a, b| a.zip(b, |x, y| x - y),
    Mul mul |a, b| a.mul_ref(b)
);

impl<'a, S: Scalar> Div<&'a Jet<S>> for &'a Jet<S> {
    type Output = Jet<S>;
    /// Panics on a degenerate divisor; use [`Jet::try_div`] to handle it.
    fn div(self, rhs: &'a Jet<S>) -> Jet<S> {
        self.try_div(rhs)
            .expect("jet division by a degenerate divisor")
    }
}

impl<S: Scalar> Neg for Jet<S> {
    type Output = Jet<S>;
    fn neg(self) -> Jet<S> {
        self.scale(-S::one())
    }
}

impl<S: Scalar> Neg for &Jet<S> {
    type Output = Jet<S>;
    fn neg(self) -> Jet<S> {
        self.scale(-S::one())
    }
}

/// Elementary operations exposed for table-driven use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elementary {
    Add,
    Sub,
    Mul,
    Div,
    Powi(i32),
    Sqrt,
    Exp,
    Log,
}

/// Applies one elementary operation to its jet arguments.
pub fn jet_elementary<S: Scalar>(op: Elementary, args: &[Jet<S>]) -> Result<Jet<S>> {
    let want = match op {
        Elementary::Add | Elementary::Sub | Elementary::Mul | Elementary::Div => 2,
        _ => 1,
    };
    if args.len() != want {
        return Err(Error::Invalid(format!(
            "{op:?} takes {want} argument(s), got {}",
            args.len()
        )));
    }
    if want == 2 && !Arc::ptr_eq(&args[0].layout, &args[1].layout) {
        return Err(Error::DimensionMismatch {
            expected: args[0].layout.len(),
            found: args[1].layout.len(),
        });
    }
    match op {
        Elementary::Add => Ok(&args[0] + &args[1]),
        Elementary::Sub => Ok(&args[0] - &args[1]),
        Elementary::Mul => Ok(&args[0] * &args[1]),
        Elementary::Div => args[0].try_div(&args[1]),
        Elementary::Powi(n) => args[0].powi(n),
        Elementary::Sqrt => args[0].sqrt(),
        Elementary::Exp => Ok(args[0].exp()),
        Elementary::Log => args[0].ln(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn univariate(value: f64, order: usize) -> Jet<f64> {
        lift_point(&[value], order).unwrap().remove(0)
    }

    #[test]
    fn coefficient_count_matches_binomial() {
        for nvars in 1..=6 {
            for order in 0..=5 {
                assert_eq!(
                    Layout::get(nvars, order).len(),
                    monomial_count(nvars, order)
                );
            }
        }
    }

    #[test]
    fn lift_seeds_value_and_unit_slot() {
        let j = lift_point(&[1.0, 0.0], 2).unwrap();
        assert_eq!(j[0].value(), 1.0);
        assert_eq!(j[0].coeff(&[1, 0]), 1.0);
        assert_eq!(j[0].coeff(&[0, 1]), 0.0);
        assert!(j[0].coeffs()[3..].iter().all(|&c| c == 0.0));
    }

    #[test]
    fn lift_rejects_excessive_order() {
        assert_eq!(
            lift_point(&[0.0, 0.0], 9).unwrap_err(),
            Error::OrderTooHigh { order: 9, max: 8 }
        );
    }

    #[test]
    fn order_zero_is_plain_evaluation() {
        let p = lift_point(&[0.3, -1.2], 0).unwrap();
        let f = (&p[0] * &p[1]).exp() + p[0].powi(3).unwrap();
        assert!((f.value() - ((0.3f64 * -1.2).exp() + 0.027)).abs() < 1e-15);
        assert_eq!(f.coeffs().len(), 1);
    }

    #[test]
    fn exp_series_at_zero() {
        let e = univariate(0.0, 6).exp();
        let mut fact = 1.0;
        for k in 0..=6u8 {
            if k > 0 {
                fact *= k as f64;
            }
            assert!((e.coeff(&[k]) - 1.0 / fact).abs() < 1e-15);
        }
    }

    #[test]
    fn mercator_series() {
        let u = univariate(0.0, 5);
        let l = u.add_scalar(1.0).ln().unwrap();
        let expected = [0.0, 1.0, -0.5, 1.0 / 3.0, -0.25, 0.2];
        for (k, e) in expected.iter().enumerate() {
            assert!((l.coeff(&[k as u8]) - e).abs() < 1e-15, "k = {k}");
        }
    }

    #[test]
    fn geometric_series() {
        let u = univariate(0.0, 6);
        let g = (-&u).add_scalar(1.0).recip().unwrap();
        assert!(g.coeffs().iter().all(|&c| (c - 1.0).abs() < 1e-15));
    }

    #[test]
    fn sqrt_at_four() {
        let s = univariate(4.0, 1).sqrt().unwrap();
        assert_eq!(s.value(), 2.0);
        assert!((s.coeff(&[1]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn division_by_degenerate_base_is_refused() {
        let x = univariate(1e-31, 2);
        assert!(matches!(
            x.recip(),
            Err(Error::Degenerate { op: "div", .. })
        ));
        assert!(matches!(
            univariate(-1.0, 2).ln(),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn derivative_lowers_order() {
        let p = lift_point(&[2.0, 3.0], 3).unwrap();
        let f = &p[0] * &p[0] * &p[1];
        let fx = f.derivative(0).unwrap();
        assert_eq!(fx.order(), 2);
        assert!((fx.value() - 12.0).abs() < 1e-14);
        assert!((fx.d1(1) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn jet_elementary_dispatch() {
        let p = lift_point(&[0.5, 0.25], 3).unwrap();
        let q = jet_elementary(Elementary::Div, &[p[0].clone(), p[1].clone()]).unwrap();
        assert!((q.value() - 2.0).abs() < 1e-15);
        assert!(jet_elementary(Elementary::Exp, &p).is_err());
    }
}
