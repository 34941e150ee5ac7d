//! The associated manifold of a real hypersurface `M = {r = 0}`: each point
//! is lifted to `(z, [dr(z)])` in `C^n x CP^(n-1)`, the fiber being the
//! conormal line of the complex tangent hyperplane.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::HolomorphicMap;
use crate::domain::BOUNDARY_TOLERANCE;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::hermitian::{normal_frame, singular_values};
use crate::jet::lift_point;
use crate::wirtinger::{complex_coordinates, dz, dz_jet, to_complex_point};

type C = Complex<f64>;

/// Smallest admissible `|dr|`.
pub const MIN_CONORMAL: f64 = 1e-8;

/// Homogeneous coordinates scaled so the largest-modulus entry (lowest index
/// on ties) equals one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectivePoint {
    pub coords: Vec<[f64; 2]>,
    pub chart: usize,
}

impl ProjectivePoint {
    pub fn new(a: &[C]) -> Result<Self> {
        let norms: Vec<f64> = a.iter().map(|c| c.norm()).collect();
        let max = norms.iter().copied().fold(0.0, f64::max);
        if !(max > 0.0) || !max.is_finite() {
            return Err(Error::DegenerateGradient { norm: max });
        }
        // Ties within rounding go to the lowest index.
        let chart = norms
            .iter()
            .position(|&m| m >= max * (1.0 - 1e-12))
            .expect("maximum is attained");
        let pivot = a[chart];
        let coords = a.iter().map(|c| c / pivot).map(|c| [c.re, c.im]).collect();
        Ok(ProjectivePoint { coords, chart })
    }

    pub fn homogeneous(&self) -> Vec<C> {
        self.coords.iter().map(|c| C::new(c[0], c[1])).collect()
    }
}

/// Chordal distance `sin angle(a, b)` between two projective points,
/// computed as the residual of `a` against the line of `b` (no cancellation
/// near zero).
pub fn projective_distance(a: &ProjectivePoint, b: &ProjectivePoint) -> f64 {
    let unit = |v: Vec<C>| {
        let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        v.into_iter().map(|c| c / n).collect::<Vec<C>>()
    };
    let (x, y) = (unit(a.homogeneous()), unit(b.homogeneous()));
    let ip: C = x.iter().zip(&y).map(|(p, q)| p * q.conj()).sum();
    x.iter()
        .zip(&y)
        .map(|(p, q)| (p - ip * q).norm_sqr())
        .sum::<f64>()
        .sqrt()
        .min(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedPoint {
    pub base: Vec<[f64; 2]>,
    pub fiber: ProjectivePoint,
}

impl LiftedPoint {
    pub fn base_point(&self) -> Vec<C> {
        self.base.iter().map(|c| C::new(c[0], c[1])).collect()
    }
}

fn check_on_hypersurface(r: &Expr, x: &[f64]) -> Result<()> {
    let v = r.eval_real(x)?;
    if v.abs() > BOUNDARY_TOLERANCE {
        return Err(Error::OutOfDomain {
            op: "associated lift (point not on the hypersurface)",
            value: v,
        });
    }
    Ok(())
}

/// `(z, [dr(z)])` for `z` on `{r = 0}`.
pub fn associated_lift(r: &Expr, x: &[f64]) -> Result<LiftedPoint> {
    check_on_hypersurface(r, x)?;
    let j = r.eval_jet(&complex_coordinates(&lift_point(x, 1)?))?;
    let n = x.len() / 2;
    let a: Vec<C> = (0..n).map(|k| dz(&j, k)).collect();
    let norm = a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm < MIN_CONORMAL {
        return Err(Error::DegenerateGradient { norm });
    }
    Ok(LiftedPoint {
        base: to_complex_point(x).iter().map(|c| [c.re, c.im]).collect(),
        fiber: ProjectivePoint::new(&a)?,
    })
}

/// `F(z, [a]) = (f(z), [a f'(z)^-1])` with `a` a row vector.
pub fn associated_map_transform(f: &HolomorphicMap, lifted: &LiftedPoint) -> Result<LiftedPoint> {
    let z = lifted.base_point();
    let w = f.eval(&z)?;
    let inv = f.inverse_jacobian(&z)?;
    let a = lifted.fiber.homogeneous();
    let n = a.len();
    let row: Vec<C> = (0..n)
        .map(|k| (0..n).map(|j| a[j] * inv[(j, k)]).sum())
        .collect();
    Ok(LiftedPoint {
        base: w.iter().map(|c| [c.re, c.im]).collect(),
        fiber: ProjectivePoint::new(&row)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    /// Smallest singular value of `[T | J T]`, `T` built on an orthonormal
    /// basis of the base tangent space.
    pub defect: f64,
    pub singular_values: Vec<f64>,
    pub fiber: ProjectivePoint,
}

/// Real orthonormal basis of `ker dr` at `x`, Gram-Schmidt seeded by the
/// gradient and then the coordinate axes.
fn tangent_basis(gradient: &[f64]) -> Vec<Vec<f64>> {
    let m = gradient.len();
    let norm = gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
    let mut basis: Vec<Vec<f64>> = vec![gradient.iter().map(|g| g / norm).collect()];
    for axis in 0..m {
        let mut v = vec![0.0; m];
        v[axis] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = b.iter().zip(&v).map(|(p, q)| p * q).sum();
                v.iter_mut().zip(b).for_each(|(vi, bi)| *vi -= d * bi);
            }
        }
        let nv = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if nv > 1e-6 {
            basis.push(v.into_iter().map(|c| c / nv).collect());
        }
        if basis.len() == m {
            break;
        }
    }
    basis.remove(0);
    basis
}

/// Smallest singular value of `[T | J T]` for the tangent space `T` of the
/// associated manifold at the lift of `x`. Fiber tangents are expressed in
/// a unitary frame of the hyperplane orthogonal to the conormal, which is a
/// holomorphic chart of `CP^(n-1)` at first order; `J` is multiplication by
/// `i` on both factors. Zero means `T` contains a complex line. Columns
/// are left unnormalized: a change of orthonormal basis then acts by an
/// orthogonal matrix commuting with `J`, so the value does not depend on it.
pub fn totally_real_defect(r: &Expr, x: &[f64]) -> Result<DefectReport> {
    let n = x.len() / 2;
    if n < 2 {
        return Err(Error::Invalid(
            "the totally-real defect needs n >= 2".into(),
        ));
    }
    check_on_hypersurface(r, x)?;
    let j = r.eval_jet(&complex_coordinates(&lift_point(x, 2)?))?;
    let gradient: Vec<f64> = (0..2 * n).map(|k| j.re.d1(k)).collect();
    let a: Vec<C> = (0..n).map(|k| dz(&j, k)).collect();
    let norm = a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm < MIN_CONORMAL {
        return Err(Error::DegenerateGradient { norm });
    }
    // Real partials of the conormal components.
    let da: Vec<Vec<C>> = (0..n)
        .map(|m| {
            let djm = dz_jet(&j, m)?;
            Ok((0..2 * n)
                .map(|k| C::new(djm.re.d1(k), djm.im.d1(k)))
                .collect())
        })
        .collect::<Result<_>>()?;
    let frame = normal_frame(&a).map_err(|e| Error::ChartBreakdown(e.to_string()))?;
    let unit: Vec<C> = a.iter().map(|c| c / norm).collect();
    let tangents = tangent_basis(&gradient);
    let dim = 4 * n - 2;
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(2 * tangents.len());
    for e in &tangents {
        let v: Vec<C> = (0..n)
            .map(|m| (0..2 * n).map(|k| da[m][k] * e[k]).sum())
            .collect();
        let along: C = v.iter().zip(&unit).map(|(vi, ui)| vi * ui.conj()).sum();
        let p: Vec<C> = v
            .iter()
            .zip(&unit)
            .map(|(vi, ui)| (vi - along * ui) / norm)
            .collect();
        let mut col = e.clone();
        for c in 0..n - 1 {
            let coord: C = (0..n).map(|i| frame[(i, c)].conj() * p[i]).sum();
            col.push(coord.re);
            col.push(coord.im);
        }
        debug_assert_eq!(col.len(), dim);
        cols.push(col);
    }
    let rotated: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| c.chunks(2).flat_map(|p| [-p[1], p[0]]).collect())
        .collect();
    cols.extend(rotated);
    let rows: Vec<Vec<f64>> = (0..dim)
        .map(|i| cols.iter().map(|c| c[i]).collect())
        .collect();
    let sv = singular_values(&rows);
    Ok(DefectReport {
        defect: *sv.last().unwrap_or(&0.0),
        singular_values: sv,
        fiber: ProjectivePoint::new(&a)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{sphere_point, DomainSpec};
    use crate::mapping::random_unitary;
    use crate::wirtinger::to_real_coordinates;

    fn sphere(n: usize) -> Expr {
        DomainSpec::ball(n).unwrap().expression().clone()
    }

    #[test]
    fn sphere_lifts() {
        let r = sphere(2);
        let l = associated_lift(&r, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(l.fiber.chart, 0);
        assert_eq!(l.fiber.coords, vec![[1.0, 0.0], [0.0, 0.0]]);
        let l = associated_lift(&r, &[0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(l.fiber.chart, 1);
        assert!(associated_lift(&r, &[0.5, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn unitary_transform_of_lift() {
        let r = sphere(2);
        let u = random_unitary(2, 9);
        let map = HolomorphicMap::linear(&u).unwrap();
        for i in 0..10 {
            let x = sphere_point(2, i + 1);
            let l = associated_lift(&r, &x).unwrap();
            let t = associated_map_transform(&map, &l).unwrap();
            let direct = associated_lift(&r, &to_real_coordinates(&t.base_point())).unwrap();
            assert!(projective_distance(&t.fiber, &direct.fiber) < 1e-10);
        }
    }

    #[test]
    fn identity_transform_is_identity() {
        let r = sphere(3);
        let x = sphere_point(3, 4);
        let l = associated_lift(&r, &x).unwrap();
        let id = HolomorphicMap::identity(3).unwrap();
        let t = associated_map_transform(&id, &l).unwrap();
        assert!(projective_distance(&t.fiber, &l.fiber) < 1e-14);
    }

    #[test]
    fn defects() {
        let r = sphere(2);
        for i in 0..10 {
            let d = totally_real_defect(&r, &sphere_point(2, i + 1)).unwrap();
            assert!(d.defect >= 0.1, "{}", d.defect);
        }
        let flat = DomainSpec::levi_flat(2).unwrap();
        let d = totally_real_defect(flat.expression(), &[0.5, 0.0, 0.3, 0.0]).unwrap();
        assert!(d.defect <= 1e-10, "{}", d.defect);
    }
}
