//! Wirtinger derivatives assembled from real jet coefficients.
//!
//! With `z_k = x_k + i y_k` and real coordinates interleaved as
//! `(x1, y1, x2, y2, ...)`:
//!
//! ```text
//! du/dz_k        = (u_x - i u_y) / 2
//! d2u/dz_i dzb_j = ((u_xx + u_yy) + i (u_{x_i y_j} - u_{y_i x_j})) / 4
//! ```

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::hermitian::{ComplexMatrix, HermitianMatrix};
use crate::jet::{ComplexJet, Jet};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct WirtingerDerivatives<S: Scalar = f64> {
    /// `du/dz_k`.
    pub gradient: Vec<Complex<S>>,
    /// `du/dzbar_k`.
    pub conjugate_gradient: Vec<Complex<S>>,
    /// `[d2u/dz_i dzbar_j]`.
    pub hessian: HermitianMatrix<S>,
    /// `[d2u/dz_i dz_j]`.
    pub holomorphic_hessian: Vec<Vec<Complex<S>>>,
    pub value: S,
}

/// Extracts Wirtinger data from a jet of a (nominally real) field.
pub fn wirtinger<S: Scalar>(field: &ComplexJet<S>) -> Result<WirtingerDerivatives<S>> {
    let imag = field.im.value().to_f64();
    if imag.abs() > 1e-12 * field.re.value().to_f64().abs().max(1.0) {
        return Err(Error::NonReal { imag, point: None });
    }
    wirtinger_real(&field.re)
}

pub fn wirtinger_real<S: Scalar>(u: &Jet<S>) -> Result<WirtingerDerivatives<S>> {
    if u.order() < 2 {
        return Err(Error::Invalid(format!(
            "wirtinger extraction needs jet order >= 2, got {}",
            u.order()
        )));
    }
    if u.nvars() % 2 != 0 {
        return Err(Error::Invalid(
            "jet variables must come in (x, y) pairs".into(),
        ));
    }
    let n = u.nvars() / 2;
    let half = S::from_f64(0.5);
    let quarter = S::from_f64(0.25);
    let (x, y) = (|k: usize| 2 * k, |k: usize| 2 * k + 1);

    let gradient: Vec<Complex<S>> = (0..n)
        .map(|k| Complex::new(u.d1(x(k)) * half, -u.d1(y(k)) * half))
        .collect();
    let conjugate_gradient = gradient.iter().map(|g| g.conj()).collect();

    let mut h = ComplexMatrix::zeros(n);
    let mut hol = vec![vec![Complex::new(S::zero(), S::zero()); n]; n];
    for i in 0..n {
        for j in 0..n {
            let xx = u.d2(x(i), x(j));
            let yy = u.d2(y(i), y(j));
            let xy = u.d2(x(i), y(j));
            let yx = u.d2(y(i), x(j));
            if j >= i {
                h[(i, j)] = Complex::new((xx + yy) * quarter, (xy - yx) * quarter);
            }
            hol[i][j] = Complex::new((xx - yy) * quarter, -(xy + yx) * quarter);
        }
    }
    Ok(WirtingerDerivatives {
        gradient,
        conjugate_gradient,
        hessian: HermitianMatrix::symmetrized(h),
        holomorphic_hessian: hol,
        value: u.value(),
    })
}

/// `df/dz_k` of a complex-valued jet.
pub fn dz<S: Scalar>(f: &ComplexJet<S>, k: usize) -> Complex<S> {
    let half = S::from_f64(0.5);
    let fx = Complex::new(f.re.d1(2 * k), f.im.d1(2 * k));
    let fy = Complex::new(f.re.d1(2 * k + 1), f.im.d1(2 * k + 1));
    (fx - fy * Complex::i()) * Complex::from(half)
}

/// `df/dzbar_k` of a complex-valued jet.
pub fn dzbar<S: Scalar>(f: &ComplexJet<S>, k: usize) -> Complex<S> {
    let half = S::from_f64(0.5);
    let fx = Complex::new(f.re.d1(2 * k), f.im.d1(2 * k));
    let fy = Complex::new(f.re.d1(2 * k + 1), f.im.d1(2 * k + 1));
    (fx + fy * Complex::i()) * Complex::from(half)
}

/// `d/dz_k` of a complex-valued jet, as a jet one order lower.
pub fn dz_jet<S: Scalar>(f: &ComplexJet<S>, k: usize) -> Result<ComplexJet<S>> {
    let half = S::from_f64(0.5);
    let rx = f.re.derivative(2 * k)?;
    let ix = f.im.derivative(2 * k)?;
    let ry = f.re.derivative(2 * k + 1)?;
    let iy = f.im.derivative(2 * k + 1)?;
    // (fx - i fy)/2 with fx = rx + i ix, fy = ry + i iy
    Ok(ComplexJet::new(
        (&rx + &iy).scale(half),
        (&ix - &ry).scale(half),
    ))
}

/// Complex coordinates `z_k` as jets built from lifted real coordinates.
pub fn complex_coordinates<S: Scalar>(real: &[Jet<S>]) -> Vec<ComplexJet<S>> {
    real.chunks(2)
        .map(|p| ComplexJet::new(p[0].clone(), p[1].clone()))
        .collect()
}

/// Interleaved real coordinates of a complex point.
pub fn to_real_coordinates(z: &[Complex<f64>]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn to_complex_point(x: &[f64]) -> Vec<Complex<f64>> {
    x.chunks(2).map(|p| Complex::new(p[0], p[1])).collect()
}
