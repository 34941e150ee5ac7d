//! Holomorphic maps between domains of `C^n` and the identities they must
//! satisfy: the pullback of complex Hessian determinants, Hölder moduli of
//! derivatives, the tangential pairing and the gradient blow-up rate of the
//! Jacobian determinant.

mod associated;

use std::fmt;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use associated::{
    associated_lift, associated_map_transform, projective_distance, totally_real_defect,
    DefectReport, LiftedPoint, ProjectivePoint,
};

use crate::domain::sphere_point;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::flatten::{series_jets, DefiningSeries};
use crate::hermitian::{complex_det, hermitian_det, ComplexMatrix};
use crate::jet::{lift_point, ComplexJet, Jet};
use crate::wirtinger::{
    complex_coordinates, dz, dzbar, to_complex_point, to_real_coordinates, wirtinger,
};

/// Cauchy-Riemann and inverse-Jacobian tolerance.
pub const MAP_TOLERANCE: f64 = 1e-10;
/// Denominator floor of the relative pullback discrepancy.
pub const DISCREPANCY_FLOOR: f64 = 1e-30;
/// Slack below `-1/2` allowed for the blow-up slope.
pub const BLOWUP_SLACK: f64 = 0.1;

type C = Complex<f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MapCatalog {
    Identity { n: usize },
    Unitary { n: usize, seed: u64 },
    BallAutomorphism { a: Vec<[f64; 2]> },
    Mobius { a: [f64; 2] },
    Linear { matrix: Vec<Vec<[f64; 2]>> },
    Composition,
    Custom,
}

/// A holomorphic self-map of `C^n` given by component expressions in `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct HolomorphicMap {
    n: usize,
    components: Vec<Expr>,
    /// `d phi_j / d z_k`.
    jacobian: Vec<Vec<Expr>>,
    catalog: MapCatalog,
}

fn is_holomorphic(e: &Expr) -> bool {
    match e {
        Expr::Const(_) | Expr::Var(_) => true,
        Expr::ConjVar(_) | Expr::Abs2(_) | Expr::Param => false,
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            is_holomorphic(a) && is_holomorphic(b)
        }
        Expr::Neg(a) | Expr::Pow(a, _) | Expr::Exp(a) | Expr::Log(a) => is_holomorphic(a),
    }
}

fn c2(c: C) -> [f64; 2] {
    [c.re, c.im]
}

fn inner(z: &[Expr], a: &[C]) -> Expr {
    // <z, a> = sum z_j conj(a_j)
    z.iter().zip(a).fold(Expr::real(0.0), |acc, (zj, aj)| {
        Expr::add(acc, Expr::mul(Expr::constant(aj.conj()), zj.clone()))
    })
}

/// Deterministic Haar-like unitary matrix from a seed.
pub fn random_unitary(n: usize, seed: u64) -> Vec<Vec<C>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<C>> = Vec::new();
    while cols.len() < n {
        let mut v: Vec<C> = (0..n)
            .map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        for c in &cols {
            let d: C = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi -= d * ci;
            }
        }
        let nv = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if nv > 1e-3 {
            cols.push(v.into_iter().map(|c| c / nv).collect());
        }
    }
    (0..n)
        .map(|i| (0..n).map(|j| cols[j][i]).collect())
        .collect()
}

/// Parses `a`, `bi`, `a+bi`, `a-bi`, `i`, `-i`.
pub fn parse_complex(text: &str) -> Result<C> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Invalid(format!("bad complex number `{text}`"));
    let num = |t: &str| -> Result<f64> {
        match t {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => t.parse::<f64>().map_err(|_| bad()),
        }
    };
    let Some(body) = s.strip_suffix('i') else {
        return s
            .parse::<f64>()
            .map(|re| C::new(re, 0.0))
            .map_err(|_| bad());
    };
    // Split at the last sign that is not a leading sign or an exponent sign.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => Ok(C::new(
            body[..k].parse::<f64>().map_err(|_| bad())?,
            num(&body[k..])?,
        )),
        None => Ok(C::new(0.0, num(body)?)),
    }
}

fn parse_vector(text: &str) -> Result<Vec<C>> {
    text.split(',').map(parse_complex).collect()
}

impl HolomorphicMap {
    /// Builds a map from holomorphic component expressions.
    pub fn new(components: Vec<Expr>, catalog: MapCatalog) -> Result<Self> {
        let n = components.len();
        if n == 0 {
            return Err(Error::Invalid("a map needs at least one component".into()));
        }
        if let Some(k) = components.iter().position(|c| !is_holomorphic(c)) {
            return Err(Error::Invalid(format!(
                "component {} depends on conjugate variables",
                k + 1
            )));
        }
        if let Some(a) = components.iter().map(Expr::arity).find(|&a| a > n) {
            return Err(Error::BadVariable { index: a, n });
        }
        let jacobian = components
            .iter()
            .map(|c| (0..n).map(|k| c.wirtinger(k, false)).collect())
            .collect();
        Ok(HolomorphicMap {
            n,
            components,
            jacobian,
            catalog,
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new((0..n).map(Expr::Var).collect(), MapCatalog::Identity { n })
    }

    /// `z -> M z`.
    pub fn linear(m: &[Vec<C>]) -> Result<Self> {
        let n = m.len();
        if m.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.iter().map(Vec::len).find(|&l| l != n).unwrap_or(n),
            });
        }
        let comps = m
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold(Expr::real(0.0), |acc, (j, &c)| {
                        if c == C::new(0.0, 0.0) {
                            acc
                        } else {
                            Expr::add(acc, Expr::mul(Expr::constant(c), Expr::Var(j)))
                        }
                    })
            })
            .collect();
        let matrix = m
            .iter()
            .map(|r| r.iter().copied().map(c2).collect())
            .collect();
        Self::new(comps, MapCatalog::Linear { matrix })
    }

    pub fn unitary(n: usize, seed: u64) -> Result<Self> {
        let mut map = Self::linear(&random_unitary(n, seed))?;
        map.catalog = MapCatalog::Unitary { n, seed };
        Ok(map)
    }

    /// The involutive automorphism of the unit ball exchanging `0` and `a`:
    /// `phi_a(z) = (a - P_a z - s_a Q_a z) / (1 - <z, a>)`.
    pub fn ball_automorphism(a: &[C]) -> Result<Self> {
        let n = a.len();
        let a2: f64 = a.iter().map(|c| c.norm_sqr()).sum();
        if n == 0 || a2 >= 1.0 {
            return Err(Error::Invalid(format!(
                "ball automorphism needs a point of the open ball (|a|^2 = {a2})"
            )));
        }
        let z: Vec<Expr> = (0..n).map(Expr::Var).collect();
        let s = (1.0 - a2).sqrt();
        let za = inner(&z, a);
        let denom = Expr::sub(Expr::real(1.0), za.clone());
        let comps = (0..n)
            .map(|i| {
                let num = if a2 == 0.0 {
                    Expr::neg(z[i].clone())
                } else {
                    // a_i - P z_i - s (z_i - P z_i) with P z_i = <z, a> a_i / |a|^2
                    let pz = Expr::mul(Expr::constant(a[i] / a2), za.clone());
                    let qz = Expr::sub(z[i].clone(), pz.clone());
                    Expr::sub(
                        Expr::sub(Expr::constant(a[i]), pz),
                        Expr::mul(Expr::real(s), qz),
                    )
                };
                Expr::div(num, denom.clone())
            })
            .collect();
        let catalog = if n == 1 {
            MapCatalog::Mobius { a: c2(a[0]) }
        } else {
            MapCatalog::BallAutomorphism {
                a: a.iter().copied().map(c2).collect(),
            }
        };
        Self::new(comps, catalog)
    }

    /// `(a - z) / (1 - conj(a) z)` on the disc.
    pub fn mobius(a: C) -> Result<Self> {
        Self::ball_automorphism(&[a])
    }

    /// Catalog tags `identity:<n>`, `unitary:<n>:<seed>`,
    /// `ball-auto:<a1,a2,...>`, `mobius:<a>`, `linear:<r1;r2;...>` (rows of
    /// comma-separated complex entries).
    pub fn parse(tag: &str) -> Result<Self> {
        let tag = tag.trim();
        let bad = |msg: &str| Error::Invalid(format!("map `{tag}`: {msg}"));
        let (kind, rest) = tag
            .split_once(':')
            .ok_or_else(|| bad("expected <kind>:<parameters>"))?;
        match kind {
            "identity" => Self::identity(rest.parse().map_err(|_| bad("bad dimension"))?),
            "unitary" => {
                let (n, seed) = rest
                    .split_once(':')
                    .ok_or_else(|| bad("expected unitary:<n>:<seed>"))?;
                let n: usize = n.parse().map_err(|_| bad("bad dimension"))?;
                if n == 0 {
                    return Err(bad("dimension must be positive"));
                }
                Self::unitary(n, seed.parse().map_err(|_| bad("bad seed"))?)
            }
            "ball-auto" => Self::ball_automorphism(&parse_vector(rest)?),
            "mobius" => Self::mobius(parse_complex(rest)?),
            "linear" => {
                let rows = rest
                    .split(';')
                    .map(parse_vector)
                    .collect::<Result<Vec<_>>>()?;
                Self::linear(&rows)
            }
            _ => Err(bad("unknown map kind")),
        }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn catalog(&self) -> &MapCatalog {
        &self.catalog
    }

    /// Whether the map is an automorphism of the unit ball.
    pub fn preserves_ball(&self) -> bool {
        matches!(
            self.catalog,
            MapCatalog::Identity { .. }
                | MapCatalog::Unitary { .. }
                | MapCatalog::BallAutomorphism { .. }
                | MapCatalog::Mobius { .. }
        )
    }

    /// `g o self`.
    pub fn then(&self, g: &HolomorphicMap) -> Result<Self> {
        if g.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: g.n,
            });
        }
        let anti: Vec<Expr> = self.components.iter().map(Expr::conj).collect();
        let comps = g
            .components
            .iter()
            .map(|c| c.substitute(&self.components, &anti))
            .collect();
        Self::new(comps, MapCatalog::Composition)
    }

    fn check_dim(&self, z: &[C]) -> Result<()> {
        if z.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: z.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, z: &[C]) -> Result<Vec<C>> {
        self.check_dim(z)?;
        self.components.iter().map(|c| c.eval(z)).collect()
    }

    /// `phi'(z)` with rows indexed by component.
    pub fn jacobian(&self, z: &[C]) -> Result<ComplexMatrix<f64>> {
        self.check_dim(z)?;
        let rows = self
            .jacobian
            .iter()
            .map(|r| r.iter().map(|e| e.eval(z)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        ComplexMatrix::from_rows(rows)
    }

    pub fn jacobian_det(&self, z: &[C]) -> Result<C> {
        Ok(complex_det(self.jacobian(z)?.rows()))
    }

    /// `[phi^{lm}(z)]`, the inverse of `phi'(z)`.
    pub fn inverse_jacobian(&self, z: &[C]) -> Result<ComplexMatrix<f64>> {
        self.jacobian(z)?.inverse()
    }

    /// Components as complex jets at the real point `x`.
    pub fn eval_jets(&self, x: &[f64], order: usize) -> Result<Vec<ComplexJet<f64>>> {
        let z = complex_coordinates(&lift_point(x, order)?);
        self.check_dim(&to_complex_point(x))?;
        self.components.iter().map(|c| c.eval_jet(&z)).collect()
    }

    /// Largest `|d phi_j / d zbar_k|` at `x`, from jets.
    pub fn cauchy_riemann_defect(&self, x: &[f64]) -> Result<f64> {
        let jets = self.eval_jets(x, 1)?;
        Ok(jets
            .iter()
            .flat_map(|f| (0..self.n).map(move |k| dzbar(f, k).norm()))
            .fold(0.0, f64::max))
    }

    /// Largest entry of `phi'(z) [phi^{lm}(z)] - I`.
    pub fn inverse_defect(&self, z: &[C]) -> Result<f64> {
        let j = self.jacobian(z)?;
        let p = j.matmul(&j.inverse()?);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for k in 0..self.n {
                let t = if i == k {
                    C::new(1.0, 0.0)
                } else {
                    C::new(0.0, 0.0)
                };
                worst = worst.max((p[(i, k)] - t).norm());
            }
        }
        Ok(worst)
    }

    /// Closed-form `det phi'` for ball automorphisms:
    /// `(-1)^n (1 - |a|^2)^((n+1)/2) / (1 - <z, a>)^(n+1)`.
    pub fn closed_form_det(&self, z: &[C]) -> Option<C> {
        let a: Vec<C> = match &self.catalog {
            MapCatalog::BallAutomorphism { a } => a.iter().map(|p| C::new(p[0], p[1])).collect(),
            MapCatalog::Mobius { a } => vec![C::new(a[0], a[1])],
            _ => return None,
        };
        let n = a.len() as i32;
        let a2: f64 = a.iter().map(|c| c.norm_sqr()).sum();
        let za: C = z.iter().zip(&a).map(|(zi, ai)| zi * ai.conj()).sum();
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        Some(sign * (1.0 - a2).powf((n + 1) as f64 / 2.0) / (C::new(1.0, 0.0) - za).powi(n + 1))
    }
}

impl fmt::Display for HolomorphicMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.catalog {
            MapCatalog::Identity { n } => write!(f, "identity:{n}"),
            MapCatalog::Unitary { n, seed } => write!(f, "unitary:{n}:{seed}"),
            MapCatalog::Mobius { a } => write!(f, "mobius:{}", fmt_complex(*a)),
            MapCatalog::BallAutomorphism { a } => {
                let parts: Vec<String> = a.iter().map(|c| fmt_complex(*c)).collect();
                write!(f, "ball-auto:{}", parts.join(","))
            }
            MapCatalog::Linear { matrix } => {
                let rows: Vec<String> = matrix
                    .iter()
                    .map(|r| {
                        r.iter()
                            .map(|c| fmt_complex(*c))
                            .collect::<Vec<_>>()
                            .join(",")
                    })
                    .collect();
                write!(f, "linear:{}", rows.join(";"))
            }
            MapCatalog::Composition | MapCatalog::Custom => {
                let parts: Vec<String> = self.components.iter().map(|c| c.to_string()).collect();
                write!(f, "({})", parts.join(", "))
            }
        }
    }
}

fn fmt_complex(c: [f64; 2]) -> String {
    match (c[0], c[1]) {
        (re, im) if im == 0.0 => format!("{re}"),
        (re, im) if re == 0.0 => format!("{im}i"),
        (re, im) if im < 0.0 => format!("{re}{im}i"),
        (re, im) => format!("{re}+{im}i"),
    }
}

/// Target of a pullback: a defining expression or a flattened series.
#[derive(Clone, Copy, Debug)]
pub enum TargetField<'a> {
    Expression(&'a Expr),
    Series(&'a DefiningSeries),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullbackCheck {
    /// `det H(rho o phi)(z)` from jets of the composition.
    pub lhs: f64,
    /// `det H(rho)(phi(z)) |det phi'(z)|^2`.
    pub rhs: f64,
    pub discrepancy: f64,
}

/// Compares `det H(rho o phi)(z)` with `det H(rho)(phi(z)) |det phi'(z)|^2`.
pub fn pullback_determinant_check(
    map: &HolomorphicMap,
    target: TargetField<'_>,
    x: &[f64],
) -> Result<PullbackCheck> {
    let z = to_complex_point(x);
    let w = map.eval(&z)?;
    let wx = to_real_coordinates(&w);
    let jac = map.jacobian_det(&z)?.norm_sqr();
    let phi = map.eval_jets(x, 2)?;
    let (lhs, det_at_image) = match target {
        TargetField::Expression(rho) => {
            let lhs = hermitian_det(&wirtinger(&rho.eval_jet(&phi)?)?.hessian);
            let at = hermitian_det(
                &wirtinger(&rho.eval_jet(&complex_coordinates(&lift_point(&wx, 2)?))?)?.hessian,
            );
            (lhs, at)
        }
        TargetField::Series(series) => {
            let (terms, _, _) = series.terms_at(&wx)?;
            let params: Vec<Jet<f64>> = phi
                .iter()
                .flat_map(|c| [c.re.clone(), c.im.clone()])
                .collect();
            let r = series_jets(series.domain(), &terms, &params)?.r;
            let lhs = hermitian_det(&crate::wirtinger::wirtinger_real(&r)?.hessian);
            (lhs, series.evaluate(&wx, 2)?.det)
        }
    };
    let rhs = det_at_image * jac;
    let discrepancy = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(DISCREPANCY_FLOOR);
    Ok(PullbackCheck {
        lhs,
        rhs,
        discrepancy,
    })
}

/// `sum_j (d rho / d w_j)(phi(z)) d phi_j / d z_k`.
pub fn tangential_pairing(map: &HolomorphicMap, rho: &Expr, x: &[f64], k: usize) -> Result<C> {
    let n = map.dimension();
    if k >= n {
        return Err(Error::BadVariable { index: k + 1, n });
    }
    let z = to_complex_point(x);
    let w = map.eval(&z)?;
    let rho_jet = rho.eval_jet(&complex_coordinates(&lift_point(
        &to_real_coordinates(&w),
        1,
    )?))?;
    let jac = map.jacobian(&z)?;
    Ok((0..n).map(|j| dz(&rho_jet, j) * jac[(j, k)]).sum())
}

/// Points of the closed unit ball paired with nearby points; separations
/// are log-uniform in `[1e-4, 1e-1]` and base points concentrate at the
/// sphere.
pub fn ball_pairs(n: usize, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |rng: &mut ChaCha8Rng| random_unit(rng, 2 * n);
    (0..count)
        .map(|_| {
            let dir = unit(&mut rng);
            let r = 1.0 - 0.5 * 10f64.powf(-3.0 * rng.gen::<f64>());
            let x: Vec<f64> = dir.iter().map(|c| c * r).collect();
            let h = 10f64.powf(-1.0 - 3.0 * rng.gen::<f64>());
            let d = unit(&mut rng);
            let y = clamp_to_ball(x.iter().zip(&d).map(|(a, b)| a + h * b).collect());
            (x, y)
        })
        .collect()
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nv = v.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-12);
    v.into_iter().map(|c| c / nv).collect()
}

fn clamp_to_ball(v: Vec<f64>) -> Vec<f64> {
    let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if r > 1.0 {
        v.into_iter().map(|c| c / r).collect()
    } else {
        v
    }
}

/// Local search steps and trials per step used to sharpen the best pair.
const REFINE_SCALES: [f64; 7] = [3e-1, 1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4];
const REFINE_TRIALS: usize = 48;
/// Number of best sampled pairs used as starting points.
const REFINE_STARTS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub alpha: f64,
    pub pairs: usize,
    pub constant: f64,
    pub argmax: (Vec<f64>, Vec<f64>),
}

/// `sup |g(x) - g(y)| / |x - y|^alpha` over the pairs; `g` is vector valued.
pub fn holder_modulus<F>(
    field: F,
    alpha: f64,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<HolderEstimate>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Invalid(format!(
            "Hölder exponent must lie in (0, 1] (got {alpha})"
        )));
    }
    let ratios: Vec<(f64, usize)> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (x, y))| {
            let dist = x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            if dist == 0.0 {
                return Ok((0.0, i));
            }
            let (gx, gy) = (field(x)?, field(y)?);
            let diff = gx
                .iter()
                .zip(&gy)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            Ok((diff / dist.powf(alpha), i))
        })
        .collect::<Result<_>>()?;
    let mut ranked = ratios;
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut best = (0.0, Default::default());
    for &(start, i) in ranked.iter().take(REFINE_STARTS) {
        let (x, y) = pairs[i].clone();
        let refined = refine_pair(&field, alpha, start, x, y)?;
        if refined.0 > best.0 {
            best = refined;
        }
    }
    Ok(HolderEstimate {
        alpha,
        pairs: pairs.len(),
        constant: best.0,
        argmax: best.1,
    })
}

/// Random local search around the best sampled pair: the sampled maximum
/// is a lower bound whose accuracy depends on how close a sample landed to
/// the extremal region, which for boundary-concentrated moduli is narrow.
/// Moves of the base point and of the displacement are accepted only when
/// the ratio grows, so the result is still a lower bound.
fn refine_pair<F>(
    field: &F,
    alpha: f64,
    mut best: f64,
    mut x: Vec<f64>,
    mut y: Vec<f64>,
) -> Result<(f64, (Vec<f64>, Vec<f64>))>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let ratio = |x: &[f64], y: &[f64]| -> Result<f64> {
        let dist = x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if dist == 0.0 {
            return Ok(0.0);
        }
        let (gx, gy) = (field(x)?, field(y)?);
        let diff = gx
            .iter()
            .zip(&gy)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        Ok(diff / dist.powf(alpha))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let dim = x.len();
    for scale in REFINE_SCALES {
        let mut misses = 0;
        let mut budget = 40 * REFINE_TRIALS;
        while misses < REFINE_TRIALS && budget > 0 {
            budget -= 1;
            let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            let h = d.iter().map(|c| c * c).sum::<f64>().sqrt();
            let shift = random_unit(&mut rng, dim);
            let turn = random_unit(&mut rng, dim);
            let nx = clamp_to_ball(x.iter().zip(&shift).map(|(a, b)| a + scale * b).collect());
            let nd: Vec<f64> = d
                .iter()
                .zip(&turn)
                .map(|(a, b)| a + scale * h * b)
                .collect();
            let ny = clamp_to_ball(nx.iter().zip(&nd).map(|(a, b)| a + b).collect());
            let r = ratio(&nx, &ny)?;
            if r > best {
                best = r;
                x = nx;
                y = ny;
                misses = 0;
            } else {
                misses += 1;
            }
        }
    }
    Ok((best, (x, y)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub estimate: HolderEstimate,
    pub doubled: HolderEstimate,
    /// `|C_2N - C_N| / C_2N`.
    pub relative_change: f64,
}

/// Hölder estimate on `count` ball pairs and on `2 count`.
pub fn holder_report<F>(
    field: F,
    alpha: f64,
    n: usize,
    count: usize,
    seed: u64,
) -> Result<HolderReport>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let pairs = ball_pairs(n, 2 * count, seed);
    let estimate = holder_modulus(&field, alpha, &pairs[..count])?;
    let doubled = holder_modulus(&field, alpha, &pairs)?;
    let relative_change = if doubled.constant == 0.0 {
        0.0
    } else {
        (doubled.constant - estimate.constant).abs() / doubled.constant
    };
    Ok(HolderReport {
        estimate,
        doubled,
        relative_change,
    })
}

/// Real and imaginary parts of the components.
pub fn map_field(map: &HolomorphicMap) -> impl Fn(&[f64]) -> Result<Vec<f64>> + Sync + '_ {
    move |x| Ok(to_real_coordinates(&map.eval(&to_complex_point(x))?))
}

/// `det phi'` as a real pair.
pub fn jacobian_det_field(map: &HolomorphicMap) -> impl Fn(&[f64]) -> Result<Vec<f64>> + Sync + '_ {
    move |x| {
        let d = map.jacobian_det(&to_complex_point(x))?;
        Ok(vec![d.re, d.im])
    }
}

/// Symbolic `det phi'` (cofactor expansion), usable on jets.
pub fn jacobian_det_expr(map: &HolomorphicMap) -> Expr {
    fn det(m: &[Vec<Expr>]) -> Expr {
        match m.len() {
            1 => m[0][0].clone(),
            n => (0..n).fold(Expr::real(0.0), |acc, j| {
                let minor: Vec<Vec<Expr>> = m[1..]
                    .iter()
                    .map(|r| {
                        r.iter()
                            .enumerate()
                            .filter(|(k, _)| *k != j)
                            .map(|(_, e)| e.clone())
                            .collect()
                    })
                    .collect();
                let term = Expr::mul(m[0][j].clone(), det(&minor));
                if j % 2 == 0 {
                    Expr::add(acc, term)
                } else {
                    Expr::sub(acc, term)
                }
            }),
        }
    }
    det(&map.jacobian)
}

/// An inward normal ray of the unit ball from a boundary point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub boundary: Vec<f64>,
    pub depths: Vec<f64>,
}

impl Ray {
    /// `count` depths log-spaced in `[1e-4, 1e-1]`.
    pub fn new(boundary: Vec<f64>, count: usize) -> Self {
        let depths = (0..count)
            .map(|k| 10f64.powf(-1.0 - 3.0 * k as f64 / (count.max(2) - 1) as f64))
            .collect();
        Ray { boundary, depths }
    }

    fn point(&self, delta: f64) -> Vec<f64> {
        self.boundary.iter().map(|c| c * (1.0 - delta)).collect()
    }
}

/// Quasi-uniform inward rays of the unit ball.
pub fn ball_rays(n: usize, count: usize, depths: usize, seed: u64) -> Vec<Ray> {
    (0..count as u64)
        .map(|i| Ray::new(sphere_point(n, seed + i + 1), depths))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupProbe {
    /// `sup |grad h| delta^(1/2)` over all ray samples.
    pub sup: f64,
    /// Smallest fitted slope of `log |grad h|` against `log delta`.
    pub min_slope: f64,
    pub slopes: Vec<f64>,
}

impl BlowupProbe {
    /// No growth beyond `delta^(-1/2)`, with slack.
    pub fn certifies(&self) -> bool {
        self.min_slope >= -0.5 - BLOWUP_SLACK
    }
}

/// `|grad h| = (sum_k |dh/dz_k|^2)^(1/2)` of a holomorphic scalar, from
/// first-order jets.
fn gradient_norm(h: &Expr, x: &[f64]) -> Result<f64> {
    let z = complex_coordinates(&lift_point(x, 1)?);
    let j = h.eval_jet(&z)?;
    Ok((0..z.len())
        .map(|k| dz(&j, k).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Gradient growth of a holomorphic scalar `h` along inward rays of the ball.
pub fn gradient_blowup_probe(h: &Expr, rays: &[Ray]) -> Result<BlowupProbe> {
    let per_ray: Vec<(f64, f64)> = rays
        .par_iter()
        .map(|ray| {
            let mut sup: f64 = 0.0;
            let mut pts = Vec::with_capacity(ray.depths.len());
            for &d in &ray.depths {
                let g = gradient_norm(h, &ray.point(d))?;
                sup = sup.max(g * d.sqrt());
                pts.push((d.ln(), g));
            }
            let slope = if pts.iter().all(|p| p.1 <= 1e-300) {
                0.0
            } else {
                let pts: Vec<(f64, f64)> = pts
                    .into_iter()
                    .filter(|p| p.1 > 1e-300)
                    .map(|(l, g)| (l, g.ln()))
                    .collect();
                let k = pts.len() as f64;
                let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
                let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
                let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
                let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
                if sxx == 0.0 {
                    0.0
                } else {
                    sxy / sxx
                }
            };
            Ok((sup, slope))
        })
        .collect::<Result<_>>()?;
    let slopes: Vec<f64> = per_ray.iter().map(|p| p.1).collect();
    Ok(BlowupProbe {
        sup: per_ray.iter().map(|p| p.0).fold(0.0, f64::max),
        min_slope: slopes.iter().copied().fold(f64::INFINITY, f64::min),
        slopes,
    })
}

/// `h(z) = (1 - z)^(1/2)` on the disc, whose gradient grows exactly like
/// `delta^(-1/2)` along the ray to `z = 1`.
pub fn critical_blowup_double() -> Expr {
    Expr::exp(Expr::mul(
        Expr::real(0.5),
        Expr::log(Expr::sub(Expr::real(1.0), Expr::Var(0))),
    ))
}
