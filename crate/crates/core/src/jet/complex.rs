use std::sync::Arc;

use num_complex::Complex;
use num_traits::{One, Zero};

use super::{Jet, Layout, DEGENERATE_BASE};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Complex-valued field stored as a pair of real jets.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexJet<S: Scalar = f64> {
    pub re: Jet<S>,
    pub im: Jet<S>,
}

impl<S: Scalar> ComplexJet<S> {
    pub fn new(re: Jet<S>, im: Jet<S>) -> Self {
        ComplexJet { re, im }
    }

    pub fn real(re: Jet<S>) -> Self {
        let im = Jet::zero(re.layout());
        ComplexJet { re, im }
    }

    pub fn constant(layout: &Arc<Layout>, c: Complex<S>) -> Self {
        ComplexJet {
            re: Jet::constant(layout, c.re),
            im: Jet::constant(layout, c.im),
        }
    }

    pub fn layout(&self) -> &Arc<Layout> {
        self.re.layout()
    }

    pub fn value(&self) -> Complex<S> {
        Complex::new(self.re.value(), self.im.value())
    }

    pub fn conj(&self) -> Self {
        ComplexJet {
            re: self.re.clone(),
            im: -&self.im,
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        ComplexJet {
            re: &self.re + &o.re,
            im: &self.im + &o.im,
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        ComplexJet {
            re: &self.re - &o.re,
            im: &self.im - &o.im,
        }
    }

    pub fn neg(&self) -> Self {
        ComplexJet {
            re: -&self.re,
            im: -&self.im,
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        ComplexJet {
            re: &(&self.re * &o.re) - &(&self.im * &o.im),
            im: &(&self.re * &o.im) + &(&self.im * &o.re),
        }
    }

    pub fn scale(&self, c: Complex<S>) -> Self {
        ComplexJet {
            re: &self.re.scale(c.re) - &self.im.scale(c.im),
            im: &self.re.scale(c.im) + &self.im.scale(c.re),
        }
    }

    pub fn add_constant(&self, c: Complex<S>) -> Self {
        ComplexJet {
            re: self.re.add_scalar(c.re),
            im: self.im.add_scalar(c.im),
        }
    }

    /// `|w|^2` as a real jet.
    pub fn norm_sqr(&self) -> Jet<S> {
        &(&self.re * &self.re) + &(&self.im * &self.im)
    }

    pub fn recip(&self) -> Result<Self> {
        let w = self.value();
        let m = w.norm_sqr().sqrt();
        if m.to_f64() < DEGENERATE_BASE {
            return Err(Error::Degenerate {
                op: "div",
                value: m.to_f64(),
            });
        }
        let inv = self.norm_sqr().recip()?;
        Ok(ComplexJet {
            re: &self.re * &inv,
            im: -(&self.im * &inv),
        })
    }

    pub fn div(&self, o: &Self) -> Result<Self> {
        Ok(self.mul(&o.recip()?))
    }

    pub fn powi(&self, n: i32) -> Result<Self> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut base = self.clone();
        let mut e = n as u32;
        let mut acc = ComplexJet::constant(self.layout(), Complex::one());
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        Ok(acc)
    }

    /// `sum_k series[k] * u^k` with `u` the nilpotent part of `self`.
    pub fn compose(&self, series: &[Complex<S>]) -> Self {
        let u = ComplexJet {
            re: self.re.nilpotent(),
            im: self.im.nilpotent(),
        };
        let d = self.re.order().min(series.len().saturating_sub(1));
        let mut acc = ComplexJet::constant(self.layout(), series[d]);
        for k in (0..d).rev() {
            acc = acc.mul(&u).add_constant(series[k]);
        }
        acc
    }

    pub fn exp(&self) -> Self {
        let w = self.value();
        let m = w.re.exp();
        let mut c = Complex::new(m * w.im.cos(), m * w.im.sin());
        let mut series = Vec::with_capacity(self.re.order() + 1);
        for k in 0..=self.re.order() {
            series.push(c);
            c = c / Complex::from(S::from_usize(k + 1));
        }
        self.compose(&series)
    }

    /// Principal branch of the logarithm.
    pub fn ln(&self) -> Result<Self> {
        let w = self.value();
        let m = w.norm_sqr().sqrt();
        if m.to_f64() < DEGENERATE_BASE {
            return Err(Error::Degenerate {
                op: "log",
                value: m.to_f64(),
            });
        }
        let inv = Complex::<S>::one() / w;
        let mut series = vec![Complex::new(m.ln(), w.im.atan2(w.re))];
        let mut p = inv;
        for k in 1..=self.re.order() {
            let sign = if k % 2 == 1 { S::one() } else { -S::one() };
            series.push(p * Complex::from(sign / S::from_usize(k)));
            p = p * inv;
        }
        Ok(self.compose(&series))
    }

    /// Principal branch of `w^p`.
    pub fn powf(&self, p: f64) -> Result<Self> {
        let l = self.ln()?;
        Ok(l.scale(Complex::from(S::from_f64(p))).exp())
    }

    pub fn is_zero_value(&self) -> bool {
        self.value().is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::lift_point;

    fn z_at(x: f64, y: f64, order: usize) -> ComplexJet<f64> {
        let p = lift_point(&[x, y], order).unwrap();
        ComplexJet::new(p[0].clone(), p[1].clone())
    }

    #[test]
    fn conj_product_is_modulus() {
        let z = z_at(0.6, -0.8, 2);
        let m = z.mul(&z.conj());
        assert!((m.re.value() - 1.0).abs() < 1e-15);
        assert!(m.im.max_abs() < 1e-15);
        assert!((m.re.d2(0, 0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn exp_log_inverse() {
        let z = z_at(0.3, 1.1, 4);
        let back = z.exp().ln().unwrap();
        for (a, b) in back.re.coeffs().iter().zip(z.re.coeffs()) {
            assert!((a - b).abs() < 1e-13);
        }
        for (a, b) in back.im.coeffs().iter().zip(z.im.coeffs()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn holomorphic_powers_satisfy_cauchy_riemann() {
        let z = z_at(0.4, 0.2, 3);
        let w = z.powi(3).unwrap();
        // d/dzbar = (d/dx + i d/dy)/2 vanishes: u_x = v_y, u_y = -v_x.
        assert!((w.re.d1(0) - w.im.d1(1)).abs() < 1e-14);
        assert!((w.re.d1(1) + w.im.d1(0)).abs() < 1e-14);
    }

    #[test]
    fn sqrt_of_one_minus_z() {
        let z = z_at(0.5, 0.0, 2);
        let h = z
            .neg()
            .add_constant(Complex::new(1.0, 0.0))
            .powf(0.5)
            .unwrap();
        assert!((h.re.value() - 0.5f64.sqrt()).abs() < 1e-15);
        // dh/dx = -1/(2 sqrt(1 - x))
        assert!((h.re.d1(0) + 0.5 / 0.5f64.sqrt()).abs() < 1e-14);
    }
}
