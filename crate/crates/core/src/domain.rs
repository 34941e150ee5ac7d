//! Domains `{F < 0}`, their signed distance and boundary projection as jets,
//! and strict pseudoconvexity checks.
//!
//! Conventions: `delta > 0` inside, `rho = -delta`, and the tangential block
//! of `H(rho)` is positive definite at strictly pseudoconvex points.

use std::fmt;

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expr};
use crate::hermitian::{normal_frame, HermitianMatrix};
use crate::jet::{jet_newton, lift_point, Jet, JetSystem, Layout, NewtonOptions};
use crate::scalar::Scalar;
use crate::wirtinger::wirtinger_real;

/// Fraction of the reach used as the default collar width.
pub const COLLAR_FRACTION: f64 = 0.2;
/// Collar width for expressions without catalog metadata.
pub const DEFAULT_CUSTOM_COLLAR: f64 = 0.1;
/// Smallest admissible gradient norm of a defining expression on the boundary.
pub const MIN_GRADIENT: f64 = 1e-6;
/// Distance below which a point counts as a boundary point.
pub const BOUNDARY_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Catalog {
    Ball,
    Ellipsoid {
        semi_axes: Vec<f64>,
    },
    PerturbedBall {
        eps: f64,
        perturbation: String,
    },
    /// `{Im z_n < 0}`; pluriharmonic, hence Levi-flat.
    LeviFlat,
    Custom,
}

impl fmt::Display for Catalog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Catalog::Ball => f.write_str("ball"),
            Catalog::Ellipsoid { semi_axes } => {
                let a: Vec<String> = semi_axes.iter().map(|a| a.to_string()).collect();
                write!(f, "ellipsoid:{}", a.join(","))
            }
            Catalog::PerturbedBall { eps, perturbation } => {
                write!(f, "perturbed-ball:{eps}:{perturbation}")
            }
            Catalog::LeviFlat => f.write_str("levi-flat"),
            Catalog::Custom => f.write_str("custom"),
        }
    }
}

/// A domain given by a real defining expression, with its collar width.
#[derive(Clone, Debug)]
pub struct DomainSpec {
    n: usize,
    expression: Expr,
    gradient: Vec<Expr>,
    collar: f64,
    reach: Option<f64>,
    catalog: Catalog,
}

impl DomainSpec {
    /// Wraps an already validated real expression.
    pub fn new(expression: Expr, n: usize, catalog: Catalog, reach: Option<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Invalid(format!(
                "domains need dimension n >= 2, got {n}"
            )));
        }
        if expression.arity() > n {
            return Err(Error::BadVariable {
                index: expression.arity(),
                n,
            });
        }
        let gradient = expression
            .real_gradient(n)
            .into_iter()
            .flat_map(|(x, y)| [x, y])
            .collect();
        let collar = reach.map_or(DEFAULT_CUSTOM_COLLAR, |r| COLLAR_FRACTION * r);
        Ok(DomainSpec {
            n,
            expression,
            gradient,
            collar,
            reach,
            catalog,
        })
    }

    pub fn ball(n: usize) -> Result<Self> {
        let axes = vec![1.0; n];
        DomainSpec::new(Expr::ellipsoid(&axes), n, Catalog::Ball, Some(1.0))
    }

    pub fn ellipsoid(semi_axes: &[f64]) -> Result<Self> {
        if semi_axes.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::Invalid(
                "ellipsoid semi-axes must be positive".into(),
            ));
        }
        let amin = semi_axes.iter().copied().fold(f64::INFINITY, f64::min);
        let amax = semi_axes.iter().copied().fold(0.0, f64::max);
        DomainSpec::new(
            Expr::ellipsoid(semi_axes),
            semi_axes.len(),
            Catalog::Ellipsoid {
                semi_axes: semi_axes.to_vec(),
            },
            Some(amin * amin / amax),
        )
    }

    /// Ball expression plus `eps * perturbation`, rejected unless strictly
    /// pseudoconvex on a boundary sample.
    pub fn perturbed_ball(n: usize, eps: f64, perturbation: &str) -> Result<Self> {
        let p = parse_expression(perturbation, n)?;
        let e = Expr::add(
            Expr::ellipsoid(&vec![1.0; n]),
            Expr::mul(Expr::real(eps), p),
        );
        // The perturbation shrinks the reach by an unknown amount; halve it.
        let d = DomainSpec::new(
            e,
            n,
            Catalog::PerturbedBall {
                eps,
                perturbation: perturbation.to_string(),
            },
            Some(0.5),
        )?;
        let report = d.pseudoconvexity_report(64, 0)?;
        if report.min_levi <= 0.0 {
            return Err(Error::NotPseudoconvex {
                levi_min: report.min_levi,
                point: report.argmin,
            });
        }
        Ok(d)
    }

    /// `{Im z_n < 0}`, a Levi-flat half space.
    pub fn levi_flat(n: usize) -> Result<Self> {
        let k = n - 1;
        // Im z = (z - conj z) / (2i) = -i/2 (z - conj z)
        let e = Expr::mul(
            Expr::constant(Complex::new(0.0, -0.5)),
            Expr::sub(Expr::Var(k), Expr::ConjVar(k)),
        );
        DomainSpec::new(e, n, Catalog::LeviFlat, None)
    }

    pub fn from_expression(text: &str, n: usize) -> Result<Self> {
        DomainSpec::new(parse_expression(text, n)?, n, Catalog::Custom, None)
    }

    /// Parses a catalog name (`ball`, `ellipsoid:a1,...`,
    /// `perturbed-ball:eps:expr`, `levi-flat`) or a raw expression.
    pub fn parse(text: &str, n: usize) -> Result<Self> {
        let text = text.trim();
        if text == "ball" {
            return DomainSpec::ball(n);
        }
        if text == "levi-flat" {
            return DomainSpec::levi_flat(n);
        }
        if let Some(rest) = text.strip_prefix("ellipsoid:") {
            let axes = rest
                .split(',')
                .map(|a| a.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Invalid(format!("bad ellipsoid semi-axis: {e}")))?;
            if axes.len() != n {
                return Err(Error::Invalid(format!(
                    "ellipsoid has {} semi-axes but the dimension is {n}",
                    axes.len()
                )));
            }
            return DomainSpec::ellipsoid(&axes);
        }
        if let Some(rest) = text.strip_prefix("perturbed-ball:") {
            let (eps, expr) = rest
                .split_once(':')
                .ok_or_else(|| Error::Invalid("expected perturbed-ball:<eps>:<expr>".into()))?;
            let eps: f64 = eps
                .trim()
                .parse()
                .map_err(|e| Error::Invalid(format!("bad perturbation size: {e}")))?;
            return DomainSpec::perturbed_ball(n, eps, expr);
        }
        DomainSpec::from_expression(text, n)
    }

    pub fn with_collar(mut self, collar: f64) -> Result<Self> {
        if !(collar > 0.0 && collar.is_finite()) {
            return Err(Error::Invalid(format!(
                "collar width must be positive, got {collar}"
            )));
        }
        self.collar = collar;
        Ok(self)
    }

    /// The domain `{F(M z) < 0}`; with `M = U*` this is the image of the
    /// domain under the unitary `U`.
    pub fn pulled_back(&self, m: &[Vec<Complex<f64>>]) -> Result<Self> {
        let mut d = DomainSpec::new(
            self.expression.compose_linear(m),
            self.n,
            Catalog::Custom,
            self.reach,
        )?;
        d.collar = self.collar;
        Ok(d)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn expression(&self) -> &Expr {
        &self.expression
    }

    pub fn collar(&self) -> f64 {
        self.collar
    }

    pub fn reach(&self) -> Option<f64> {
        self.reach
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn defining_value(&self, x: &[f64]) -> Result<f64> {
        self.expression.eval_real(x)
    }

    fn real_gradient_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.gradient.iter().map(|g| g.eval_real(x)).collect()
    }

    fn gradient_jets<S: Scalar>(&self, p: &[Jet<S>]) -> Result<Vec<Jet<S>>> {
        self.gradient.iter().map(|g| g.eval_real_jet(p)).collect()
    }

    /// Seed for the Lagrange system: gradient-normal projection steps.
    fn seed(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut p = x.to_vec();
        for _ in 0..50 {
            let f = self.defining_value(&p)?;
            let g = self.real_gradient_at(&p)?;
            let gg: f64 = g.iter().map(|v| v * v).sum();
            if gg < MIN_GRADIENT * MIN_GRADIENT {
                return Err(Error::DegenerateGradient { norm: gg.sqrt() });
            }
            for (pi, gi) in p.iter_mut().zip(&g) {
                *pi -= f * gi / gg;
            }
            if f.abs() < 1e-15 {
                break;
            }
        }
        let g = self.real_gradient_at(&p)?;
        let gg: f64 = g.iter().map(|v| v * v).sum();
        let lambda = x
            .iter()
            .zip(&p)
            .zip(&g)
            .map(|((xi, pi), gi)| (xi - pi) * gi)
            .sum::<f64>()
            / gg;
        p.push(lambda);
        Ok(p)
    }

    /// Jets of `delta`, the projection `pi` and the unit outward normal at `x`.
    pub fn distance_jets<S: Scalar>(&self, x: &[S], order: usize) -> Result<DistanceJets<S>> {
        if x.len() != 2 * self.n {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.n,
                found: x.len(),
            });
        }
        let params = lift_point(x, order)?;
        self.distance_jets_at(&params)
    }

    /// As [`DomainSpec::distance_jets`], for arbitrary parameter jets.
    pub fn distance_jets_at<S: Scalar>(&self, params: &[Jet<S>]) -> Result<DistanceJets<S>> {
        let x: Vec<f64> = params.iter().map(|j| j.value().to_f64()).collect();
        let seed: Vec<S> = self.seed(&x)?.into_iter().map(S::from_f64).collect();
        let system = Lagrange { domain: self };
        let sol =
            jet_newton(&system, params, &seed, &NewtonOptions::default()).map_err(|e| match e {
                Error::NoConvergence { .. } | Error::SingularJacobian(_) => {
                    Error::CollarViolation {
                        delta: seed.last().map_or(f64::NAN, |l| l.to_f64().abs()),
                        collar: self.collar,
                    }
                }
                other => other,
            })?;
        let (p, lambda) = sol.split_at(2 * self.n);
        let g = self.gradient_jets(p)?;
        let layout = params[0].layout();
        let gg = g
            .iter()
            .fold(Jet::zero(layout), |acc, gi| &acc + &(gi * gi));
        let gnorm = gg.sqrt()?;
        let delta = -(&lambda[0] * &gnorm);
        let inv = gnorm.recip()?;
        let normal = g.iter().map(|gi| gi * &inv).collect();
        Ok(DistanceJets {
            delta,
            projection: p.to_vec(),
            normal,
        })
    }

    /// Jet of the signed distance `delta` at `x` (positive inside).
    pub fn signed_distance<S: Scalar>(&self, x: &[S], order: usize) -> Result<Jet<S>> {
        Ok(self.distance_jets(x, order)?.delta)
    }

    /// Nearest boundary point.
    pub fn boundary_projection(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .distance_jets(x, 0)?
            .projection
            .iter()
            .map(|j| j.value())
            .collect())
    }

    /// Wirtinger data of `rho = -delta` at a point.
    pub fn rho_derivatives(
        &self,
        x: &[f64],
    ) -> Result<(f64, Vec<Complex<f64>>, HermitianMatrix<f64>)> {
        let d = self.signed_distance(x, 2)?;
        let w = wirtinger_real(&-d)?;
        Ok((w.value, w.gradient, w.hessian))
    }

    /// Smallest eigenvalue of the tangential block of `H(rho)` at a boundary
    /// point, in the frame whose last axis is the complex normal.
    pub fn levi_min(&self, boundary_point: &[f64]) -> Result<f64> {
        Ok(self
            .levi_eigenvalues(boundary_point)?
            .into_iter()
            .fold(f64::INFINITY, f64::min))
    }

    /// All tangential Levi eigenvalues at a boundary point, ascending.
    pub fn levi_eigenvalues(&self, boundary_point: &[f64]) -> Result<Vec<f64>> {
        let (rho, g, h) = self.rho_derivatives(boundary_point)?;
        if rho.abs() > BOUNDARY_TOLERANCE {
            return Err(Error::OutOfDomain {
                op: "levi_min (point not on the boundary)",
                value: rho,
            });
        }
        let u = normal_frame(&g)?;
        let mut ev = h.conjugate_by(&u).leading_block(self.n - 1).eigenvalues();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    /// Boundary point along the ray from the origin in direction `u` (unit,
    /// interleaved real coordinates).
    pub fn radial_boundary_point(&self, u: &[f64]) -> Result<Vec<f64>> {
        let f = |s: f64| -> Result<f64> {
            let x: Vec<f64> = u.iter().map(|v| v * s).collect();
            self.defining_value(&x)
        };
        if f(0.0)? >= 0.0 {
            return Err(Error::Invalid(
                "radial sampling needs the origin inside the domain".into(),
            ));
        }
        let mut hi = 1.0;
        while f(hi)? < 0.0 {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::Invalid(
                    "domain is unbounded along a sampling ray".into(),
                ));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * hi {
                break;
            }
        }
        let s0 = 0.5 * (lo + hi);
        // Polish onto the zero set.
        let x: Vec<f64> = u.iter().map(|v| v * s0).collect();
        self.boundary_projection(&x)
    }

    /// Deterministic quasi-random boundary points.
    pub fn boundary_samples(&self, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        (0..count)
            .map(|i| self.radial_boundary_point(&sphere_point(self.n, seed + i as u64 + 1)))
            .collect()
    }

    /// Minimum of `levi_min` over quasi-random boundary samples.
    pub fn pseudoconvexity_report(
        &self,
        samples: usize,
        seed: u64,
    ) -> Result<PseudoconvexityReport> {
        if samples == 0 {
            return Err(Error::Invalid("sample count must be at least 1".into()));
        }
        let points = self.boundary_samples(samples, seed)?;
        self.pseudoconvexity_report_at(&points, seed)
    }

    pub fn pseudoconvexity_report_at(
        &self,
        points: &[Vec<f64>],
        seed: u64,
    ) -> Result<PseudoconvexityReport> {
        let mut min_levi = f64::INFINITY;
        let mut argmin = Vec::new();
        let mut min_gradient = f64::INFINITY;
        for p in points {
            let g = self.real_gradient_at(p)?;
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            min_gradient = min_gradient.min(gn);
            if gn < MIN_GRADIENT {
                return Err(Error::DegenerateGradient { norm: gn });
            }
            let l = self.levi_min(p)?;
            if l < min_levi {
                min_levi = l;
                argmin = p.clone();
            }
        }
        Ok(PseudoconvexityReport {
            samples: points.len(),
            seed,
            min_levi,
            argmin,
            min_gradient,
        })
    }
}

/// Jets returned by the distance solve.
#[derive(Clone, Debug)]
pub struct DistanceJets<S: Scalar = f64> {
    pub delta: Jet<S>,
    pub projection: Vec<Jet<S>>,
    /// Unit outward normal `grad F / |grad F|` at the projection.
    pub normal: Vec<Jet<S>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PseudoconvexityReport {
    pub samples: usize,
    pub seed: u64,
    pub min_levi: f64,
    pub argmin: Vec<f64>,
    pub min_gradient: f64,
}

/// `F(p) = 0`, `x - p - lambda grad F(p) = 0` in unknowns `(p, lambda)`.
struct Lagrange<'a> {
    domain: &'a DomainSpec,
}

impl<S: Scalar> JetSystem<S> for Lagrange<'_> {
    fn unknowns(&self) -> usize {
        2 * self.domain.n + 1
    }

    fn residual(&self, x: &[Jet<S>], u: &[Jet<S>]) -> Result<Vec<Jet<S>>> {
        let m = 2 * self.domain.n;
        let (p, lambda) = u.split_at(m);
        let mut out = Vec::with_capacity(m + 1);
        out.push(self.domain.expression.eval_real_jet(p)?);
        let g = self.domain.gradient_jets(p)?;
        for i in 0..m {
            out.push(&(&x[i] - &p[i]) - &(&lambda[0] * &g[i]));
        }
        Ok(out)
    }
}

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Van der Corput radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// Halton point number `index` in `dim` dimensions.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|d| radical_inverse(index, PRIMES[d % PRIMES.len()]))
        .collect()
}

/// Quasi-uniform point on the unit sphere of `C^n`: squared moduli by
/// stick-breaking on the simplex, phases uniform.
pub fn sphere_point(n: usize, index: u64) -> Vec<f64> {
    let h = halton(index, 2 * n - 1);
    let mut remaining = 1.0;
    let mut moduli = Vec::with_capacity(n);
    for (k, &u) in h[..n - 1].iter().enumerate() {
        let share = 1.0 - (1.0 - u).powf(1.0 / (n - 1 - k) as f64);
        moduli.push(remaining * share);
        remaining -= remaining * share;
    }
    moduli.push(remaining);
    let mut x = Vec::with_capacity(2 * n);
    for (k, m) in moduli.iter().enumerate() {
        let theta = std::f64::consts::TAU * h[n - 1 + k];
        let r = m.max(0.0).sqrt();
        x.push(r * theta.cos());
        x.push(r * theta.sin());
    }
    x
}

/// Jet layout shared by all collar evaluations in `n` complex dimensions.
pub fn collar_layout(n: usize, order: usize) -> std::sync::Arc<Layout> {
    Layout::get(2 * n, order)
}
