//! Hermitian matrix algebra for complex Hessians: determinants, adjugate
//! quadratic forms, the rank-one determinant update, normal frames and the
//! bordered (Schur) decomposition.
//!
//! Inner products are `<x, y> = sum_i x_i conj(y_i)`.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type Cx<S> = Complex<S>;

/// Dense square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix<S: Scalar = f64> {
    n: usize,
    data: Vec<Cx<S>>,
}

impl<S: Scalar> ComplexMatrix<S> {
    pub fn zeros(n: usize) -> Self {
        ComplexMatrix {
            n,
            data: vec![Cx::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Cx::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Cx<S>>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid("matrix rows must all have length n".into()));
        }
        Ok(ComplexMatrix {
            n,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<Cx<S>>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] = self[(j, i)].conj();
            }
        }
        m
    }

    pub fn matmul(&self, o: &Self) -> Self {
        let n = self.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    m[(i, j)] = m[(i, j)] + a * o[(k, j)];
                }
            }
        }
        m
    }

    pub fn apply(&self, v: &[Cx<S>]) -> Vec<Cx<S>> {
        (0..self.n)
            .map(|i| (0..self.n).fold(Cx::zero(), |acc, j| acc + self[(i, j)] * v[j]))
            .collect()
    }

    pub fn column(&self, j: usize) -> Vec<Cx<S>> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn det(&self) -> Cx<S> {
        complex_det(self.rows())
    }

    /// Largest entry modulus of `U* U - I`.
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.adjoint().matmul(self);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                let target = if i == j { Cx::one() } else { Cx::zero() };
                worst = worst.max((p[(i, j)] - target).norm_sqr().sqrt().to_f64());
            }
        }
        worst
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let mut a = self.rows();
        let mut inv = Self::identity(n).rows();
        let scale = a
            .iter()
            .flatten()
            .map(|c| c.norm_sqr().sqrt().to_f64())
            .fold(0.0, f64::max);
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| {
                    let (x, y) = (a[i][col].norm_sqr().to_f64(), a[j][col].norm_sqr().to_f64());
                    x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("non-empty pivot range");
            if a[piv][col].norm_sqr().sqrt().to_f64() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::SingularJacobian("matrix inverse"));
            }
            a.swap(col, piv);
            inv.swap(col, piv);
            let p = Cx::<S>::one() / a[col][col];
            for j in 0..n {
                a[col][j] = a[col][j] * p;
                inv[col][j] = inv[col][j] * p;
            }
            for i in 0..n {
                if i != col {
                    let f = a[i][col];
                    for j in 0..n {
                        let (ac, ic) = (a[col][j], inv[col][j]);
                        a[i][j] = a[i][j] - f * ac;
                        inv[i][j] = inv[i][j] - f * ic;
                    }
                }
            }
        }
        Self::from_rows(inv)
    }
}

impl<S: Scalar> std::ops::Index<(usize, usize)> for ComplexMatrix<S> {
    type Output = Cx<S>;
    fn index(&self, (i, j): (usize, usize)) -> &Cx<S> {
        &self.data[i * self.n + j]
    }
}

impl<S: Scalar> std::ops::IndexMut<(usize, usize)> for ComplexMatrix<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cx<S> {
        &mut self.data[i * self.n + j]
    }
}

/// Determinant by LU with partial pivoting.
pub fn complex_det<S: Scalar>(mut a: Vec<Vec<Cx<S>>>) -> Cx<S> {
    let n = a.len();
    let mut det = Cx::<S>::one();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| {
                a[i][k]
                    .norm_sqr()
                    .partial_cmp(&a[j][k].norm_sqr())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if a[p][k].is_zero() {
            return Cx::zero();
        }
        if p != k {
            a.swap(p, k);
            det = -det;
        }
        let pivot = a[k][k];
        det = det * pivot;
        for i in k + 1..n {
            let f = a[i][k] / pivot;
            if f.is_zero() {
                continue;
            }
            for j in k + 1..n {
                let t = f * a[k][j];
                a[i][j] = a[i][j] - t;
            }
        }
    }
    det
}

fn inner<S: Scalar>(x: &[Cx<S>], y: &[Cx<S>]) -> Cx<S> {
    x.iter()
        .zip(y)
        .fold(Cx::zero(), |acc, (a, b)| acc + *a * b.conj())
}

fn vnorm<S: Scalar>(v: &[Cx<S>]) -> S {
    v.iter().map(|c| c.norm_sqr()).sum::<S>().sqrt()
}

/// Complex Hessian `[d^2 u / dz_i dzbar_j]` of a real field.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix<S: Scalar = f64> {
    inner: ComplexMatrix<S>,
}

impl<S: Scalar> HermitianMatrix<S> {
    /// Validates `h[i][j] = conj(h[j][i])` to relative `1e-12`.
    pub fn from_rows(rows: Vec<Vec<Cx<S>>>) -> Result<Self> {
        let m = ComplexMatrix::from_rows(rows)?;
        let scale = m
            .data
            .iter()
            .fold(1.0f64, |s, c| s.max(c.norm_sqr().sqrt().to_f64()));
        for i in 0..m.n {
            for j in 0..=i {
                let d = (m[(i, j)] - m[(j, i)].conj()).norm_sqr().sqrt().to_f64();
                if d > 1e-12 * scale {
                    return Err(Error::Invalid(format!(
                        "matrix is not Hermitian at ({i}, {j}): defect {d:e}"
                    )));
                }
            }
        }
        Ok(Self::symmetrized(m))
    }

    /// Keeps the upper triangle and mirrors it; diagonal forced real.
    pub fn symmetrized(mut m: ComplexMatrix<S>) -> Self {
        for i in 0..m.n {
            m[(i, i)] = Cx::new(m[(i, i)].re, S::zero());
            for j in i + 1..m.n {
                m[(j, i)] = m[(i, j)].conj();
            }
        }
        HermitianMatrix { inner: m }
    }

    pub fn identity(n: usize) -> Self {
        HermitianMatrix {
            inner: ComplexMatrix::identity(n),
        }
    }

    pub fn diag(values: &[S]) -> Self {
        let mut m = ComplexMatrix::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Cx::new(v, S::zero());
        }
        HermitianMatrix { inner: m }
    }

    pub fn dim(&self) -> usize {
        self.inner.n
    }

    pub fn get(&self, i: usize, j: usize) -> Cx<S> {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &ComplexMatrix<S> {
        &self.inner
    }

    pub fn rows(&self) -> Vec<Vec<Cx<S>>> {
        self.inner.rows()
    }

    /// `self + c * v v*`.
    pub fn rank_one_update(&self, c: S, v: &[Cx<S>]) -> Self {
        let mut m = self.inner.clone();
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                m[(i, j)] = m[(i, j)] + v[i] * v[j].conj() * Cx::from(c);
            }
        }
        Self::symmetrized(m)
    }

    pub fn scale(&self, c: S) -> Self {
        let mut m = self.inner.clone();
        for z in &mut m.data {
            *z = *z * Cx::from(c);
        }
        HermitianMatrix { inner: m }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut m = self.inner.clone();
        for (a, b) in m.data.iter_mut().zip(&o.inner.data) {
            *a = *a + *b;
        }
        HermitianMatrix { inner: m }
    }

    /// `U* A U`.
    pub fn conjugate_by(&self, u: &ComplexMatrix<S>) -> Self {
        Self::symmetrized(u.adjoint().matmul(&self.inner).matmul(u))
    }

    /// Leading principal `k x k` block.
    pub fn leading_block(&self, k: usize) -> Self {
        let mut m = ComplexMatrix::zeros(k);
        for i in 0..k {
            for j in 0..k {
                m[(i, j)] = self.inner[(i, j)];
            }
        }
        HermitianMatrix { inner: m }
    }

    pub fn cast<T: Scalar>(&self) -> HermitianMatrix<T> {
        let data = self
            .inner
            .data
            .iter()
            .map(|c| Cx::new(T::from_f64(c.re.to_f64()), T::from_f64(c.im.to_f64())))
            .collect();
        HermitianMatrix {
            inner: ComplexMatrix {
                n: self.inner.n,
                data,
            },
        }
    }

    /// Eigenvalues in ascending order (cyclic Jacobi, double precision).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.dim();
        let mut m = vec![vec![0.0; 2 * n]; 2 * n];
        for i in 0..n {
            for j in 0..n {
                let c = self.inner[(i, j)];
                let (re, im) = (c.re.to_f64(), c.im.to_f64());
                m[i][j] = re;
                m[i + n][j + n] = re;
                m[i + n][j] = im;
                m[i][j + n] = -im;
            }
        }
        let doubled = symmetric_eigenvalues(m);
        doubled.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }
}

/// Eigenvalues of a real symmetric matrix, ascending, by cyclic Jacobi sweeps.
pub fn symmetric_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    let norm: f64 = a
        .iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * norm.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Singular values of a real `m x k` matrix (`m >= k`, given by rows),
/// descending, by one-sided Jacobi rotations. Small singular values are
/// resolved to working precision relative to the column norms.
pub fn singular_values(rows: &[Vec<f64>]) -> Vec<f64> {
    let m = rows.len();
    let k = rows.first().map_or(0, |r| r.len());
    let mut cols: Vec<Vec<f64>> = (0..k)
        .map(|j| (0..m).map(|i| rows[i][j]).collect())
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (cols[p][i], cols[q][i]);
                    cols[p][i] = c * x - s * y;
                    cols[q][i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Determinant of a Hermitian matrix; real by construction.
pub fn hermitian_det<S: Scalar>(a: &HermitianMatrix<S>) -> S {
    a.inner.det().re
}

/// `<adj(A) v, v>`, computed as minus the determinant of the bordered matrix
/// `[[A, v], [v*, 0]]` so that singular `A` needs no special case.
pub fn adjugate_form<S: Scalar>(a: &HermitianMatrix<S>, v: &[Cx<S>]) -> S {
    let n = a.dim();
    let mut rows = a.rows();
    for (i, row) in rows.iter_mut().enumerate() {
        row.push(v[i]);
    }
    let mut last: Vec<Cx<S>> = v.iter().map(|c| c.conj()).collect();
    last.push(Cx::zero());
    rows.push(last);
    debug_assert_eq!(rows.len(), n + 1);
    -complex_det(rows).re
}

/// `det(A + c v v*) = det A + c <adj(A) v, v>`.
pub fn det_rank_one_update<S: Scalar>(a: &HermitianMatrix<S>, c: S, v: &[Cx<S>]) -> S {
    hermitian_det(a) + c * adjugate_form(a, v)
}

/// Unitary Householder frame whose last column is the unit complex normal,
/// rotated by a phase so its last entry is real and nonnegative.
///
/// With the Hessian stored as `H[i][j] = d2u/dz_i dzbar_j` and read as the
/// form `u* H u`, a vector is complex-tangent exactly when it is orthogonal
/// to `g = du/dz`, so the normal column is `g/|g|`.
pub fn normal_frame<S: Scalar>(gradient: &[Cx<S>]) -> Result<ComplexMatrix<S>> {
    let n = gradient.len();
    let norm = vnorm(gradient);
    if norm.to_f64() < 1e-8 {
        return Err(Error::DegenerateGradient {
            norm: norm.to_f64(),
        });
    }
    let w: Vec<Cx<S>> = gradient.iter().map(|g| *g / Cx::from(norm)).collect();
    let wn = w[n - 1];
    let m = wn.norm_sqr().sqrt();
    let phase = if m.to_f64() > 0.0 {
        wn / Cx::from(m)
    } else {
        Cx::one()
    };
    let mut v = w.clone();
    v[n - 1] = v[n - 1] - phase;
    let vv: S = v.iter().map(|c| c.norm_sqr()).sum();
    let mut u = ComplexMatrix::identity(n);
    if vv.to_f64() <= 1e-30 {
        return Ok(u);
    }
    let two = S::from_f64(2.0);
    for i in 0..n {
        for j in 0..n {
            u[(i, j)] = u[(i, j)] - v[i] * v[j].conj() * Cx::from(two / vv);
        }
    }
    Ok(u)
}

/// Bordered decomposition of `U* A U` in the normal frame.
#[derive(Clone, Debug)]
pub struct SchurSplit<S: Scalar = f64> {
    pub frame: ComplexMatrix<S>,
    pub tangential_block: HermitianMatrix<S>,
    pub border: Vec<Cx<S>>,
    pub corner: S,
    /// `corner - border* block^{-1} border`; absent for a singular block.
    pub schur_complement: Option<S>,
}

impl<S: Scalar> SchurSplit<S> {
    /// Rebuilds `U [[block, border], [border*, corner]] U*`.
    pub fn reassemble(&self) -> HermitianMatrix<S> {
        let n = self.frame.dim();
        let mut m = ComplexMatrix::zeros(n);
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                m[(i, j)] = self.tangential_block.get(i, j);
            }
            m[(i, n - 1)] = self.border[i];
            m[(n - 1, i)] = self.border[i].conj();
        }
        m[(n - 1, n - 1)] = Cx::from(self.corner);
        HermitianMatrix::symmetrized(self.frame.matmul(&m).matmul(&self.frame.adjoint()))
    }
}

pub fn schur_split<S: Scalar>(a: &HermitianMatrix<S>, gradient: &[Cx<S>]) -> Result<SchurSplit<S>> {
    let n = a.dim();
    if n < 2 {
        return Err(Error::Invalid("schur split needs dimension >= 2".into()));
    }
    let frame = normal_frame(gradient)?;
    let rotated = a.conjugate_by(&frame);
    let tangential_block = rotated.leading_block(n - 1);
    let border: Vec<Cx<S>> = (0..n - 1).map(|i| rotated.get(i, n - 1)).collect();
    let corner = rotated.get(n - 1, n - 1).re;
    let scale = (0..n).fold(1.0f64, |s, i| s.max(rotated.get(i, i).re.to_f64().abs()));
    let block_det = hermitian_det(&tangential_block);
    let schur_complement = if block_det.to_f64().abs() <= 1e-14 * scale.powi(n as i32 - 1) {
        None
    } else {
        solve_complex(tangential_block.rows(), &border).map(|x| corner - inner(&x, &border).re)
    };
    Ok(SchurSplit {
        frame,
        tangential_block,
        border,
        corner,
        schur_complement,
    })
}

fn solve_complex<S: Scalar>(mut a: Vec<Vec<Cx<S>>>, b: &[Cx<S>]) -> Option<Vec<Cx<S>>> {
    let n = a.len();
    let mut x = b.to_vec();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| {
                a[i][k]
                    .norm_sqr()
                    .partial_cmp(&a[j][k].norm_sqr())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if a[p][k].is_zero() {
            return None;
        }
        a.swap(p, k);
        x.swap(p, k);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                let t = f * a[k][j];
                a[i][j] = a[i][j] - t;
            }
            let t = f * x[k];
            x[i] = x[i] - t;
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s = s - a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
    }
    Some(x)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> HermitianMatrix<f64> {
        let mut m = ComplexMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = if i == j {
                    Cx::new(rng.gen_range(-2.0..2.0), 0.0)
                } else {
                    Cx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                };
                m[(i, j)] = v;
            }
        }
        HermitianMatrix::symmetrized(m)
    }

    pub(crate) fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<Cx<f64>> {
        (0..n)
            .map(|_| Cx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    /// Laplace expansion along the first row.
    pub(crate) fn cofactor_det(a: &[Vec<Cx<f64>>]) -> Cx<f64> {
        let n = a.len();
        if n == 1 {
            return a[0][0];
        }
        let mut acc = Cx::zero();
        for j in 0..n {
            let minor: Vec<Vec<Cx<f64>>> = a[1..]
                .iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .filter(|&(k, _)| k != j)
                        .map(|(_, c)| *c)
                        .collect()
                })
                .collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += a[0][j] * cofactor_det(&minor) * sign;
        }
        acc
    }

    pub(crate) fn cofactor_adjugate(a: &[Vec<Cx<f64>>]) -> Vec<Vec<Cx<f64>>> {
        let n = a.len();
        let mut adj = vec![vec![Cx::zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                let minor: Vec<Vec<Cx<f64>>> = a
                    .iter()
                    .enumerate()
                    .filter(|&(r, _)| r != i)
                    .map(|(_, row)| {
                        row.iter()
                            .enumerate()
                            .filter(|&(c, _)| c != j)
                            .map(|(_, v)| *v)
                            .collect()
                    })
                    .collect();
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                adj[j][i] = cofactor_det(&minor) * sign;
            }
        }
        adj
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn det_examples() {
        assert_eq!(hermitian_det(&HermitianMatrix::<f64>::identity(3)), 1.0);
        assert!((hermitian_det(&HermitianMatrix::diag(&[0.25, 0.5])) - 0.125).abs() < 1e-16);
    }

    #[test]
    fn det_matches_cofactor_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_hermitian(&mut rng, 5);
            let brute = cofactor_det(&a.rows());
            assert!(brute.im.abs() < 1e-12);
            assert!(rel(hermitian_det(&a), brute.re) <= 1e-10);
        }
    }

    #[test]
    fn adjugate_examples() {
        let v = vec![Cx::new(0.3, 0.4), Cx::new(-1.0, 0.5)];
        let norm2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        assert!((adjugate_form(&HermitianMatrix::identity(2), &v) - norm2).abs() < 1e-15);
        let e2 = vec![Cx::zero(), Cx::one()];
        assert!((adjugate_form(&HermitianMatrix::diag(&[3.0, 7.0]), &e2) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn adjugate_matches_cofactors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_hermitian(&mut rng, 4);
            let v = random_vector(&mut rng, 4);
            let adj = cofactor_adjugate(&a.rows());
            let av: Vec<Cx<f64>> = (0..4)
                .map(|i| (0..4).fold(Cx::zero(), |s, j| s + adj[i][j] * v[j]))
                .collect();
            let brute = inner(&av, &v).re;
            assert!(rel(adjugate_form(&a, &v), brute) <= 1e-10);
        }
    }

    #[test]
    fn rank_one_examples() {
        let a = HermitianMatrix::<f64>::identity(2);
        let e1 = vec![Cx::one(), Cx::zero()];
        assert!((det_rank_one_update(&a, 0.0, &e1) - 1.0).abs() < 1e-15);
        assert!((det_rank_one_update(&a, 3.0, &e1) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn normal_frame_on_axes() {
        let en = vec![Cx::zero(), Cx::zero(), Cx::new(2.0, 0.0)];
        assert_eq!(normal_frame(&en).unwrap(), ComplexMatrix::identity(3));
        let e1 = vec![Cx::new(0.5, 0.0), Cx::zero(), Cx::zero()];
        let u = normal_frame(&e1).unwrap();
        assert!((u[(0, 2)] - Cx::one()).norm() < 1e-15);
        assert!((u[(2, 0)] - Cx::one()).norm() < 1e-15);
        assert!((u[(1, 1)] - Cx::one()).norm() < 1e-15);
        assert!(u[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn normal_frame_is_unitary_with_real_pivot() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=5 {
            let g = random_vector(&mut rng, n);
            let u = normal_frame(&g).unwrap();
            assert!(u.unitarity_defect() < 1e-12);
            let last = u.column(n - 1);
            assert!(last[n - 1].im.abs() < 1e-15 && last[n - 1].re >= 0.0);
            // last column spans g
            let proj = inner(&g, &last).norm();
            assert!((proj - vnorm(&g)).abs() < 1e-12);
            // In the frame the adjugate form is det(tangential block) |g|^2.
            let a = random_hermitian(&mut rng, n);
            let block = a.conjugate_by(&u).leading_block(n - 1);
            let want = hermitian_det(&block) * vnorm(&g).powi(2);
            let got = adjugate_form(&a, &g);
            assert!((got - want).abs() < 1e-10 * want.abs().max(1.0));
        }
    }

    #[test]
    fn degenerate_gradient_rejected() {
        let g = vec![Cx::new(1e-9, 0.0), Cx::zero()];
        assert!(matches!(
            normal_frame(&g),
            Err(Error::DegenerateGradient { .. })
        ));
    }

    #[test]
    fn schur_split_sphere_hessian() {
        // H(|z|) at (1, 0) and its gradient (1/2, 0).
        let h = HermitianMatrix::diag(&[0.25, 0.5]);
        let g = vec![Cx::new(0.5, 0.0), Cx::zero()];
        let s = schur_split(&h, &g).unwrap();
        assert!((s.tangential_block.get(0, 0).re - 0.5).abs() < 1e-15);
        assert!(s.border[0].norm() < 1e-15);
        assert!((s.corner - 0.25).abs() < 1e-15);
        assert!((s.schur_complement.unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn schur_split_diagonal_normal_axis() {
        let h = HermitianMatrix::diag(&[2.0, 3.0, 5.0]);
        let g = vec![Cx::zero(), Cx::zero(), Cx::new(1.0, 0.0)];
        let s = schur_split(&h, &g).unwrap();
        assert!(s.border.iter().all(|b| b.norm() == 0.0));
        assert_eq!(s.schur_complement, Some(5.0));
    }

    #[test]
    fn schur_split_reassembles_and_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = random_hermitian(&mut rng, 4);
            let g = random_vector(&mut rng, 4);
            let s = schur_split(&a, &g).unwrap();
            let back = s.reassemble();
            for i in 0..4 {
                for j in 0..4 {
                    assert!((back.get(i, j) - a.get(i, j)).norm() < 1e-12);
                }
            }
            let lhs = hermitian_det(&s.tangential_block) * s.schur_complement.unwrap();
            assert!(rel(lhs, hermitian_det(&a)) <= 1e-10);
            // border entries are the frame-transformed originals
            let rotated = a.conjugate_by(&s.frame);
            for i in 0..3 {
                assert!((rotated.get(i, 3) - s.border[i]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn singular_block_reports_absent_complement() {
        let h = HermitianMatrix::diag(&[0.0, 1.0]);
        let g = vec![Cx::zero(), Cx::one()];
        let s = schur_split(&h, &g).unwrap();
        assert!(s.schur_complement.is_none());
    }

    #[test]
    fn jacobi_eigenvalues() {
        let h = HermitianMatrix::from_rows(vec![
            vec![Cx::new(2.0, 0.0), Cx::new(0.0, 1.0)],
            vec![Cx::new(0.0, -1.0), Cx::new(2.0, 0.0)],
        ])
        .unwrap();
        let ev = h.eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn non_hermitian_rows_rejected() {
        let r = HermitianMatrix::from_rows(vec![
            vec![Cx::new(1.0, 0.0), Cx::new(0.0, 1.0)],
            vec![Cx::new(0.0, 1.0), Cx::new(1.0, 0.0)],
        ]);
        assert!(r.is_err());
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = ComplexMatrix::from_rows(vec![
            vec![Cx::new(2.0, 1.0), Cx::new(0.5, -0.3), Cx::new(0.0, 1.0)],
            vec![Cx::new(-1.0, 0.0), Cx::new(1.0, 1.0), Cx::new(0.2, 0.0)],
            vec![Cx::new(0.3, 0.3), Cx::new(0.0, -2.0), Cx::new(1.5, 0.0)],
        ])
        .unwrap();
        let p = a.matmul(&a.inverse().unwrap());
        assert!(
            p.unitarity_defect() < 1e-12 || {
                let id = ComplexMatrix::<f64>::identity(3);
                p.rows()
                    .iter()
                    .flatten()
                    .zip(id.rows().iter().flatten())
                    .all(|(x, y)| (x - y).norm() < 1e-12)
            }
        );
        let singular = ComplexMatrix::from_rows(vec![vec![Cx::new(1.0, 0.0); 2]; 2]).unwrap();
        assert!(matches!(
            singular.inverse(),
            Err(Error::SingularJacobian(_))
        ));
    }

    #[test]
    fn jacobi_singular_values() {
        let rows = vec![vec![3.0, 0.0], vec![0.0, -2.0], vec![0.0, 0.0]];
        let sv = singular_values(&rows);
        assert!((sv[0] - 3.0).abs() < 1e-15 && (sv[1] - 2.0).abs() < 1e-15);
        // Exactly dependent columns resolve to a tiny singular value.
        let dep = vec![vec![1.0, 2.0], vec![1e-3, 2e-3], vec![0.5, 1.0]];
        assert!(singular_values(&dep)[1] < 1e-15);
    }
}
