//! The flattening recursion.
//!
//! Starting from `rho = -delta`, the series
//!
//! ```text
//! r^(m) = rho + a_2 rho^2 + ... + a_m rho^m
//! ```
//!
//! is built so that `det H(r^(m)) = b_{m-1} rho^(m-1) + O(rho^m)` along inward
//! normals. Each coefficient is a boundary value `a_k(p)`, extended constant
//! along the normal through `p`; at a point `z` of the collar the Hessian is
//! that of `rho + sum a_k(pi(z)) rho^k` with the coefficients held fixed.
//!
//! Given level `m`, `b_{m-1}(p)` is read off a ladder of determinants along
//! the normal through `p`, and the matrix determinant lemma
//! `det(A + c g g*) = det A + c <adj(A) g, g>` gives the next coefficient
//!
//! ```text
//! a_{m+1}(p) = -b_{m-1}(p) / ((m+1) m <adj H(r^(m))(p) g, g>),   g = d rho(p).
//! ```
//!
//! A final term `c delta^(L+1)` restores plurisubharmonicity in the collar.

mod extrapolation;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use extrapolation::{
    extract_from_ladder, fit_order, fit_polynomial, least_squares, BExtraction, LadderParams,
    OrderFit, RayParams, Rung, SLOPE_SLACK, UNDERFLOW,
};

use crate::domain::{DomainSpec, BOUNDARY_TOLERANCE};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::hermitian::{adjugate_form, hermitian_det, HermitianMatrix};
use crate::jet::{lift_point, Jet};
use crate::report::Certificate;
use crate::scalar::{Dd, Precision, Scalar};
use crate::wirtinger::wirtinger_real;

/// Default largest admissible target order.
pub const DEFAULT_MAX_Q: usize = 5;
/// Points closer than this to the boundary are not evaluated.
pub const MIN_DELTA: f64 = 1e-8;
/// Smallest admissible `<adj H g, g>` at a boundary point.
pub const MIN_ADJUGATE: f64 = 1e-10;
/// Order-advancement margin between consecutive certified levels.
pub const ADVANCE_MARGIN: f64 = 0.85;
/// Patch grid `{0, 2^0, ..., 2^20} * c_unit`.
pub const PATCH_GRID_EXPONENTS: i32 = 20;

/// Working precision for level `m`: double up to 3, double-double beyond,
/// unless forced.
pub fn precision_for_level(m: usize, forced: Option<Precision>) -> Precision {
    forced.unwrap_or(if m <= 3 {
        Precision::Double
    } else {
        Precision::Dd
    })
}

/// `a_2` and the alternative closed form kept for comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct A2 {
    /// `-det H(rho) / (2 <adj H(rho) g, g>)`, which kills the boundary value
    /// of `det H(r^(2))`.
    pub value: f64,
    /// `-(d rho) / (2 ((d rho) + |g|^4))` with `d rho = sum rho_i rho_jbar rho_ijbar`.
    pub alternate: f64,
    pub det_hessian: f64,
    pub adjugate_form: f64,
    pub levi_contraction: f64,
    pub gradient_norm_sq: f64,
}

/// `a_k -> a_k + delta * h`: a normal-direction perturbation that leaves the
/// boundary values unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub index: usize,
    pub field: Expr,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub constant: f64,
    pub power: usize,
}

/// Coefficients frozen at one boundary point, plus optional extra terms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeriesTerms {
    /// `a_2 .. a_m`.
    pub a: Vec<f64>,
    pub patch: Option<Patch>,
    pub perturbation: Option<Perturbation>,
}

impl SeriesTerms {
    pub fn level(&self) -> usize {
        self.a.len() + 1
    }

    pub fn bare() -> Self {
        SeriesTerms::default()
    }

    pub fn with_coefficients(a: &[f64]) -> Self {
        SeriesTerms {
            a: a.to_vec(),
            ..Default::default()
        }
    }

    fn truncated(&self, level: usize) -> SeriesTerms {
        let keep = level.saturating_sub(1).min(self.a.len());
        SeriesTerms {
            a: self.a[..keep].to_vec(),
            patch: None,
            perturbation: self.perturbation.clone().filter(|p| p.index <= level),
        }
    }
}

/// Jets of the series and of `delta` at one point.
#[derive(Clone, Debug)]
pub struct SeriesJets<S: Scalar = f64> {
    pub r: Jet<S>,
    pub delta: Jet<S>,
}

/// Evaluates `r = rho + sum a_k rho^k (+ extras)` on parameter jets.
pub fn series_jets<S: Scalar>(
    domain: &DomainSpec,
    terms: &SeriesTerms,
    params: &[Jet<S>],
) -> Result<SeriesJets<S>> {
    let dj = domain.distance_jets_at(params)?;
    let layout = dj.delta.layout().clone();
    let rho = -&dj.delta;
    let mut r = rho.clone();
    if let Some((last, rest)) = terms.a.split_last() {
        let mut acc = Jet::constant(&layout, S::from_f64(*last));
        for a in rest.iter().rev() {
            acc = (&acc * &rho).add_scalar(S::from_f64(*a));
        }
        r = &r + &(&(&rho * &rho) * &acc);
    }
    if let Some(p) = &terms.perturbation {
        let h = p.field.eval_real_jet(params)?;
        r = &r + &(&(&h * &dj.delta) * &rho.powi(p.index as i32)?);
    }
    if let Some(patch) = terms.patch {
        r = &r
            + &dj
                .delta
                .powi(patch.power as i32)?
                .scale(S::from_f64(patch.constant));
    }
    Ok(SeriesJets { r, delta: dj.delta })
}

fn ray_point<S: Scalar>(p: &[f64], normal: &[f64], t: f64) -> Vec<S> {
    let t = S::from_f64(t);
    p.iter()
        .zip(normal)
        .map(|(&x, &v)| S::from_f64(x) - t * S::from_f64(v))
        .collect()
}

/// `(delta, det H(r))` at depth `t` along the inward normal.
fn det_on_ray<S: Scalar>(
    domain: &DomainSpec,
    terms: &SeriesTerms,
    p: &[f64],
    normal: &[f64],
    t: f64,
    order: usize,
) -> Result<(S, S)> {
    let x = ray_point::<S>(p, normal, t);
    let jets = series_jets(domain, terms, &lift_point(&x, order)?)?;
    let h = wirtinger_real(&jets.r)?.hessian;
    Ok((jets.delta.value(), hermitian_det(&h)))
}

/// Boundary point polished onto the zero set, with its outward unit normal.
pub fn boundary_frame(domain: &DomainSpec, p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = domain.distance_jets(p, 0)?;
    if d.delta.value().abs() > BOUNDARY_TOLERANCE {
        return Err(Error::OutOfDomain {
            op: "boundary frame (point not on the boundary)",
            value: d.delta.value(),
        });
    }
    let q = d.projection.iter().map(|j| j.value()).collect();
    let nu = d.normal.iter().map(|j| j.value()).collect();
    Ok((q, nu))
}

struct BoundaryData {
    det: f64,
    adjugate: f64,
    gradient: Vec<Complex<f64>>,
    hessian: HermitianMatrix<f64>,
}

fn boundary_data(
    domain: &DomainSpec,
    terms: &SeriesTerms,
    p: &[f64],
    order: usize,
) -> Result<BoundaryData> {
    let jets = series_jets(domain, terms, &lift_point(p, order)?)?;
    if jets.delta.value().abs() > BOUNDARY_TOLERANCE {
        return Err(Error::OutOfDomain {
            op: "boundary evaluation (point not on the boundary)",
            value: jets.delta.value(),
        });
    }
    let g = wirtinger_real(&-&jets.delta)?.gradient;
    let h = wirtinger_real(&jets.r)?.hessian;
    Ok(BoundaryData {
        det: hermitian_det(&h),
        adjugate: adjugate_form(&h, &g),
        gradient: g,
        hessian: h,
    })
}

/// `a_2(p)` at a boundary point.
pub fn compute_a2(domain: &DomainSpec, p: &[f64]) -> Result<A2> {
    let d = boundary_data(domain, &SeriesTerms::bare(), p, 2)?;
    if d.adjugate.abs() < MIN_ADJUGATE {
        return Err(Error::DegenerateAdjugate { value: d.adjugate });
    }
    let n = d.gradient.len();
    let mut contraction = Complex::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            contraction += d.gradient[i].conj() * d.hessian.get(i, j) * d.gradient[j];
        }
    }
    let gg: f64 = d.gradient.iter().map(|c| c.norm_sqr()).sum();
    let dr = contraction.re;
    Ok(A2 {
        value: -d.det / (2.0 * d.adjugate),
        alternate: -dr / (2.0 * (dr + gg * gg)),
        det_hessian: d.det,
        adjugate_form: d.adjugate,
        levi_contraction: dr,
        gradient_norm_sq: gg,
    })
}

macro_rules! with_precision {
    ($prec:expr, $s:ident => $body:expr) => {
        match $prec {
            Precision::Double => {
                type $s = f64;
                $body
            }
            Precision::Dd => {
                type $s = Dd;
                $body
            }
        }
    };
}

/// `b_{m-1}(p)` for the level-`m` series `terms`, by ladder extrapolation
/// along the inward normal `-normal`.
pub fn extract_b(
    domain: &DomainSpec,
    terms: &SeriesTerms,
    p: &[f64],
    normal: &[f64],
    ladder: &LadderParams,
    precision: Precision,
) -> Result<BExtraction> {
    let level = terms.level();
    with_precision!(precision, S => extract_from_ladder::<S>(level, ladder, precision, |t| {
        det_on_ray::<S>(domain, terms, p, normal, t, 2)
    }))
}

/// `a_{m+1}(p)` from `b_{m-1}(p)` and the level-`m` series.
pub fn next_coefficient(
    domain: &DomainSpec,
    terms: &SeriesTerms,
    p: &[f64],
    b: f64,
) -> Result<f64> {
    let d = boundary_data(domain, terms, p, 2)?;
    if d.adjugate.abs() < MIN_ADJUGATE {
        return Err(Error::DegenerateAdjugate { value: d.adjugate });
    }
    let m = terms.level() as f64;
    Ok(-b / ((m + 1.0) * m * d.adjugate))
}

/// Extrapolated `det H(r)` at the boundary along the inward normal, from a
/// polynomial fit without any vanishing assumption.
pub fn boundary_determinant(
    domain: &DomainSpec,
    terms: &SeriesTerms,
    p: &[f64],
    normal: &[f64],
    ladder: &LadderParams,
) -> Result<f64> {
    let degree = ladder.poly_order + 1;
    let rungs = ladder.rungs.max(degree + 2);
    let mut ds = Vec::with_capacity(rungs);
    let mut ys = Vec::with_capacity(rungs);
    for j in 0..rungs {
        let t = ladder.t0 * 0.5f64.powi(j as i32);
        let (d, y) = det_on_ray::<f64>(domain, terms, p, normal, t, 2)?;
        ds.push(d);
        ys.push(y);
    }
    Ok(fit_polynomial(&ds, &ys, degree)?[0])
}

/// Slope of `log |det H|` against `log delta` along the inward normal.
pub fn vanishing_order(
    domain: &DomainSpec,
    terms: &SeriesTerms,
    p: &[f64],
    normal: &[f64],
    ray: &RayParams,
    precision: Precision,
) -> Result<OrderFit> {
    with_precision!(precision, S => fit_order(ray, |t| {
        let (d, y) = det_on_ray::<S>(domain, terms, p, normal, t, 2)?;
        Ok((d.to_f64(), y.to_f64()))
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlattenOptions {
    /// Target vanishing order; the series is built to level `q + 1`.
    pub q: usize,
    pub max_q: usize,
    pub jet_order: usize,
    pub ladder: LadderParams,
    pub ray: RayParams,
    /// Forces one precision for every level.
    pub precision: Option<Precision>,
    /// Boundary sample count.
    pub samples: usize,
    /// Depths per boundary sample in the patch check.
    pub collar_depths: usize,
    /// Smallest patch-check depth.
    pub collar_min_depth: f64,
    pub seed: u64,
}

impl Default for FlattenOptions {
    fn default() -> Self {
        FlattenOptions {
            q: 3,
            max_q: DEFAULT_MAX_Q,
            jet_order: 2,
            ladder: LadderParams::default(),
            ray: RayParams::default(),
            precision: None,
            samples: 16,
            collar_depths: 12,
            collar_min_depth: 1e-3,
            seed: 42,
        }
    }
}

impl FlattenOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| {
            Err(Error::Config {
                key: key.into(),
                msg,
            })
        };
        if self.q < 1 || self.q > self.max_q {
            return bad(
                "q",
                format!("must lie in 1..={} (got {})", self.max_q, self.q),
            );
        }
        if self.max_q > 8 {
            return bad("max_q", "orders above 8 are not supported".into());
        }
        if !(2..=crate::jet::DEFAULT_MAX_ORDER).contains(&self.jet_order) {
            return bad(
                "jet_order",
                format!("must lie in 2..=8 (got {})", self.jet_order),
            );
        }
        if !(self.ladder.t0 > 0.0) || self.ladder.rungs < 2 {
            return bad("ladder", "t0 must be positive and rungs >= 2".into());
        }
        if !(self.ray.t0 > 0.0) || self.ray.rungs < 5 {
            return bad("ray", "t0 must be positive and rungs >= 5".into());
        }
        if self.samples == 0 {
            return bad("samples", "must be at least 1".into());
        }
        if self.collar_depths == 0 || !(self.collar_min_depth >= MIN_DELTA) {
            return bad("collar_depths", "need at least one depth >= 1e-8".into());
        }
        Ok(())
    }
}

/// The recursion at one boundary point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCoefficients {
    pub id: usize,
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
    pub a2: A2,
    /// `a_2, a_3, ...`.
    pub a: Vec<f64>,
    /// `b_1, b_2, ...`; `b_{m-1}` comes from level `m`.
    pub b: Vec<BExtraction>,
    pub failure: Option<String>,
}

impl BoundaryCoefficients {
    pub fn level(&self) -> usize {
        self.a.len() + 1
    }
}

/// Runs `a_2 -> (b_{m-1} -> a_{m+1})` for `m = 2..=q`, then extracts `b_q`
/// from the final level. Stops at the first failure and keeps what it has.
pub fn coefficients_at(
    domain: &DomainSpec,
    id: usize,
    point: &[f64],
    opts: &FlattenOptions,
    perturbation: Option<&Perturbation>,
) -> Result<BoundaryCoefficients> {
    let (p, nu) = boundary_frame(domain, point)?;
    let a2 = compute_a2(domain, &p)?;
    let mut out = BoundaryCoefficients {
        id,
        point: p.clone(),
        normal: nu.clone(),
        a: vec![a2.value],
        a2,
        b: Vec::new(),
        failure: None,
    };
    for m in 2..=opts.q + 1 {
        let terms = SeriesTerms {
            a: out.a.clone(),
            patch: None,
            perturbation: perturbation.cloned().filter(|q| q.index <= m),
        };
        let prec = precision_for_level(m, opts.precision);
        let b = match extract_b(domain, &terms, &p, &nu, &opts.ladder, prec) {
            Ok(b) => b,
            Err(e) => {
                out.failure = Some(format!("level {m}: {e}"));
                break;
            }
        };
        let value = b.value;
        out.b.push(b);
        if m == opts.q + 1 {
            break;
        }
        match next_coefficient(domain, &terms, &p, value) {
            Ok(a) => out.a.push(a),
            Err(e) => {
                out.failure = Some(format!("level {m}: {e}"));
                break;
            }
        }
    }
    Ok(out)
}

/// A flattened defining function: coefficient fields cached on boundary
/// samples, plus the patch.
#[derive(Clone, Debug)]
pub struct DefiningSeries {
    domain: DomainSpec,
    level: usize,
    samples: Vec<BoundaryCoefficients>,
    patch: Option<Patch>,
    collar: f64,
    options: FlattenOptions,
    perturbation: Option<Perturbation>,
}

/// Value, Hessian and determinant of the series at a collar point.
#[derive(Clone, Debug)]
pub struct SeriesEvaluation {
    pub r: Jet<f64>,
    pub delta: f64,
    pub hessian: HermitianMatrix<f64>,
    pub det: f64,
    pub min_eigenvalue: f64,
    /// Boundary sample whose coefficients were used.
    pub sample: usize,
    /// Distance from `pi(z)` to that sample.
    pub interpolation_distance: f64,
}

impl DefiningSeries {
    /// Computes coefficients on the given boundary points.
    pub fn build(
        domain: &DomainSpec,
        points: &[Vec<f64>],
        opts: &FlattenOptions,
        perturbation: Option<Perturbation>,
    ) -> Result<Self> {
        opts.validate()?;
        let samples: Vec<BoundaryCoefficients> = points
            .par_iter()
            .enumerate()
            .map(|(i, p)| coefficients_at(domain, i, p, opts, perturbation.as_ref()))
            .collect::<Result<_>>()?;
        let level = samples.iter().map(|s| s.level()).min().unwrap_or(1);
        Ok(DefiningSeries {
            domain: domain.clone(),
            level,
            samples,
            patch: None,
            collar: domain.collar(),
            options: opts.clone(),
            perturbation,
        })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn samples(&self) -> &[BoundaryCoefficients] {
        &self.samples
    }

    pub fn patch(&self) -> Option<Patch> {
        self.patch
    }

    pub fn collar(&self) -> f64 {
        self.collar
    }

    pub fn options(&self) -> &FlattenOptions {
        &self.options
    }

    /// Series terms of sample `i` truncated to `level`.
    pub fn terms(&self, i: usize, level: usize) -> SeriesTerms {
        let mut t = SeriesTerms {
            a: self.samples[i].a.clone(),
            patch: None,
            perturbation: self.perturbation.clone(),
        }
        .truncated(level);
        if level == self.level {
            t.patch = self.patch;
        }
        t
    }

    /// Installs a patch constant (`c delta^(level + 1)`).
    pub fn with_patch(mut self, constant: f64) -> Self {
        self.patch = Some(Patch {
            constant,
            power: self.level + 1,
        });
        self
    }

    pub fn with_collar(mut self, collar: f64) -> Self {
        self.collar = collar;
        self
    }

    fn nearest_sample(&self, p: &[f64]) -> (usize, f64) {
        self.samples
            .iter()
            .map(|s| {
                (
                    s.id,
                    s.point
                        .iter()
                        .zip(p)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt(),
                )
            })
            .fold(
                (0, f64::INFINITY),
                |best, c| if c.1 < best.1 { c } else { best },
            )
    }

    /// Evaluates the full series at a collar point `10^-8 <= delta <= collar`,
    /// using the coefficients of the nearest boundary sample.
    pub fn evaluate(&self, x: &[f64], jet_order: usize) -> Result<SeriesEvaluation> {
        let (terms, i, dist) = self.terms_at(x)?;
        self.evaluate_with(&terms, x, jet_order, i, dist)
    }

    /// Frozen terms used at a collar point, with the sample index and its
    /// distance from the projection of `x`.
    pub fn terms_at(&self, x: &[f64]) -> Result<(SeriesTerms, usize, f64)> {
        let d = self.domain.distance_jets(x, 0)?;
        let delta = d.delta.value();
        if !(MIN_DELTA..=self.collar).contains(&delta) {
            return Err(Error::CollarViolation {
                delta,
                collar: self.collar,
            });
        }
        let p: Vec<f64> = d.projection.iter().map(|j| j.value()).collect();
        let (i, dist) = self.nearest_sample(&p);
        Ok((self.terms(i, self.level), i, dist))
    }

    fn evaluate_with(
        &self,
        terms: &SeriesTerms,
        x: &[f64],
        jet_order: usize,
        sample: usize,
        interpolation_distance: f64,
    ) -> Result<SeriesEvaluation> {
        let prec = precision_for_level(terms.level(), self.options.precision);
        with_precision!(prec, S => {
            let xs: Vec<S> = x.iter().map(|&v| S::from_f64(v)).collect();
            let jets = series_jets::<S>(&self.domain, terms, &lift_point(&xs, jet_order.max(2))?)?;
            let h = wirtinger_real(&jets.r)?.hessian;
            let det = hermitian_det(&h).to_f64();
            let hessian = h.cast::<f64>();
            let min_eigenvalue = hessian.min_eigenvalue();
            Ok(SeriesEvaluation {
                r: jets.r.cast(),
                delta: jets.delta.value().to_f64(),
                hessian,
                det,
                min_eigenvalue,
                sample,
                interpolation_distance,
            })
        })
    }

    /// Vanishing-order fit of level `level` along the normal of sample `i`.
    pub fn vanishing_order(&self, i: usize, level: usize, ray: &RayParams) -> Result<OrderFit> {
        let s = &self.samples[i];
        let prec = precision_for_level(level, self.options.precision);
        vanishing_order(
            &self.domain,
            &self.terms(i, level),
            &s.point,
            &s.normal,
            ray,
            prec,
        )
    }

    /// Collar points along the sample normals, log-spaced in depth.
    pub fn collar_samples(&self, depths: usize, min_depth: f64) -> Vec<CollarSample> {
        let max_depth = self.collar.min(0.1);
        let depth = |k: usize| {
            if depths == 1 {
                max_depth
            } else {
                min_depth * (max_depth / min_depth).powf(k as f64 / (depths - 1) as f64)
            }
        };
        self.samples
            .iter()
            .flat_map(|s| {
                (0..depths).map(move |k| CollarSample {
                    sample: s.id,
                    t: depth(k),
                })
            })
            .collect()
    }
}

/// A point `p_i - t nu_i` of the collar.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollarSample {
    pub sample: usize,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchReport {
    pub constant: f64,
    pub c_unit: f64,
    pub power: usize,
    /// Minimum Hessian eigenvalue over the collar samples, before and after.
    pub unpatched_min_eigenvalue: f64,
    pub min_eigenvalue: f64,
    pub samples: usize,
}

/// Smallest grid constant `c` making `r + c delta^(L+1)` plurisubharmonic on
/// the collar samples. `c_unit = max 2|b_L| / |grad delta|^2`.
pub fn psh_patch(series: &DefiningSeries, collar: &[CollarSample]) -> Result<PatchReport> {
    let level = series.level;
    let power = level + 1;
    let prec = precision_for_level(level, series.options.precision);
    let per_point: Vec<(HermitianMatrix<f64>, HermitianMatrix<f64>, f64, usize)> = collar
        .par_iter()
        .map(|cs| {
            let s = &series.samples[cs.sample];
            let terms = series.terms(cs.sample, level);
            with_precision!(prec, S => {
                let x = ray_point::<S>(&s.point, &s.normal, cs.t);
                let jets = series_jets::<S>(&series.domain, &SeriesTerms { patch: None, ..terms }, &lift_point(&x, 2)?)?;
                let hr = wirtinger_real(&jets.r)?.hessian.cast::<f64>();
                let hp = wirtinger_real(&jets.delta.powi(power as i32)?)?.hessian.cast::<f64>();
                let g = jets.delta.gradient();
                let gn2 = g.iter().map(|v| v.to_f64().powi(2)).sum::<f64>();
                Ok((hr, hp, gn2, cs.sample))
            })
        })
        .collect::<Result<_>>()?;
    let c_unit = per_point
        .iter()
        .map(|(_, _, gn2, i)| {
            let b = series.samples[*i].b.get(level - 1).map_or(0.0, |b| b.value);
            2.0 * b.abs() / gn2
        })
        .fold(0.0, f64::max);
    let min_eig = |c: f64| {
        per_point
            .par_iter()
            .map(|(hr, hp, _, _)| hr.add(&hp.scale(c)).min_eigenvalue())
            .reduce(|| f64::INFINITY, f64::min)
    };
    let unpatched = min_eig(0.0);
    let mut grid = vec![0.0];
    if c_unit > 0.0 {
        grid.extend((0..=PATCH_GRID_EXPONENTS).map(|k| c_unit * 2f64.powi(k)));
    }
    let mut best = unpatched;
    for c in grid {
        let m = if c == 0.0 { unpatched } else { min_eig(c) };
        if m >= 0.0 {
            return Ok(PatchReport {
                constant: c,
                c_unit,
                power,
                unpatched_min_eigenvalue: unpatched,
                min_eigenvalue: m,
                samples: collar.len(),
            });
        }
        best = best.max(m);
    }
    Err(Error::PatchFailed {
        min_eigenvalue: best,
    })
}

/// Per-level certification data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    /// Expected vanishing order `level - 1`.
    pub expected_order: usize,
    /// `a_level` per boundary sample (absent at level 1).
    pub coefficient: Option<Vec<CoefficientEntry>>,
    /// `b_{level-1}` per boundary sample.
    pub b: Vec<CoefficientEntry>,
    pub slopes: Vec<f64>,
    pub min_slope: f64,
    pub max_fit_residual: f64,
    /// Largest per-sample constant `C` in `|det| ~ C delta^slope`.
    pub max_constant: f64,
    pub max_extrapolation_error: f64,
    pub precision: Precision,
    pub collar: f64,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEntry {
    pub sample: usize,
    pub value: f64,
}

/// Boundary values of `det H(r^(2))` for both closed forms of `a_2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct A2Comparison {
    pub sample: usize,
    pub implemented: f64,
    pub alternate: f64,
    pub implemented_boundary_det: f64,
    pub alternate_boundary_det: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlattenReport {
    pub domain: String,
    pub n: usize,
    pub q: usize,
    /// Highest level built at every sample.
    pub level: usize,
    pub samples: usize,
    pub seed: u64,
    pub collar: f64,
    pub collar_halvings: usize,
    pub levels: Vec<LevelReport>,
    pub a2_comparison: A2Comparison,
    pub patch: Option<PatchReport>,
    pub patched_min_slope: Option<f64>,
    pub certificates: Vec<Certificate>,
    pub failures: Vec<String>,
    pub note: String,
}

impl FlattenReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.certificates.iter().all(|c| c.passed)
    }
}

/// Result of [`flatten`]: the patched series and its certification report.
#[derive(Clone, Debug)]
pub struct Flattened {
    pub series: DefiningSeries,
    pub report: FlattenReport,
}

const COLLAR_NOTE: &str = "The collar width is read as the collar of the construction; \
the free parameter in the statement of the vanishing estimate is not modelled beyond this reading.";

/// Full pipeline: `a_2`, then `(b_{m-1} -> a_{m+1})` up to level `q + 1`,
/// vanishing-order certificates, and the plurisubharmonicity patch. On a
/// failed extraction or patch the collar (and the ladder) is halved once.
pub fn flatten(domain: &DomainSpec, opts: &FlattenOptions) -> Result<Flattened> {
    opts.validate()?;
    let points = domain.boundary_samples(opts.samples, opts.seed)?;
    let first = flatten_attempt(domain, opts, &points, domain.collar(), 0)?;
    if first.report.failures.is_empty() {
        return Ok(first);
    }
    let mut retry = opts.clone();
    let collar = domain.collar() / 2.0;
    retry.ladder.t0 = retry.ladder.t0.min(collar) / 2.0;
    retry.ray.t0 = retry.ray.t0.min(collar);
    let second = flatten_attempt(
        &domain.clone().with_collar(collar)?,
        &retry,
        &points,
        collar,
        1,
    )?;
    Ok(second)
}

fn flatten_attempt(
    domain: &DomainSpec,
    opts: &FlattenOptions,
    points: &[Vec<f64>],
    collar: f64,
    halvings: usize,
) -> Result<Flattened> {
    let mut opts = opts.clone();
    opts.ray.t0 = opts.ray.t0.min(collar);
    opts.ladder.t0 = opts.ladder.t0.min(collar);
    let series = DefiningSeries::build(domain, points, &opts, None)?.with_collar(collar);
    let mut failures: Vec<String> = series
        .samples
        .iter()
        .filter_map(|s| s.failure.as_ref().map(|f| format!("sample {}: {f}", s.id)))
        .collect();
    let target = opts.q + 1;

    let mut levels = Vec::new();
    let mut certificates = Vec::new();
    for level in 1..=series.level {
        let fits: Vec<OrderFit> = (0..series.samples.len())
            .into_par_iter()
            .map(|i| series.vanishing_order(i, level, &opts.ray))
            .collect::<Result<_>>()?;
        let slopes: Vec<f64> = fits.iter().map(|f| f.slope).collect();
        let min_slope = slopes.iter().copied().fold(f64::INFINITY, f64::min);
        let expected = level - 1;
        let cert = Certificate::at_least(
            &format!("vanishing_order_level_{level}"),
            &format!(
                "slope of log|det H(r^({level}))| against log delta along inward normals is at least {expected} - {SLOPE_SLACK}"
            ),
            min_slope,
            expected as f64 - SLOPE_SLACK,
        );
        certificates.push(cert.clone());
        let entries = |f: &dyn Fn(&BoundaryCoefficients) -> Option<f64>| -> Vec<CoefficientEntry> {
            series
                .samples
                .iter()
                .filter_map(|s| {
                    f(s).map(|value| CoefficientEntry {
                        sample: s.id,
                        value,
                    })
                })
                .collect()
        };
        levels.push(LevelReport {
            level,
            expected_order: expected,
            coefficient: (level >= 2).then(|| entries(&|s| s.a.get(level - 2).copied())),
            b: entries(&|s| {
                if level >= 2 {
                    s.b.get(level - 2).map(|b| b.value)
                } else {
                    None
                }
            }),
            slopes,
            min_slope,
            max_fit_residual: fits.iter().map(|f| f.residual).fold(0.0, f64::max),
            max_constant: fits.iter().map(|f| f.constant).fold(0.0, f64::max),
            max_extrapolation_error: if level >= 2 {
                series
                    .samples
                    .iter()
                    .filter_map(|s| s.b.get(level - 2))
                    .map(|b| b.error_estimate)
                    .fold(0.0, f64::max)
            } else {
                0.0
            },
            precision: precision_for_level(level, opts.precision),
            collar,
            certificate: cert,
        });
    }
    for w in levels.windows(2) {
        certificates.push(Certificate::at_least(
            &format!("order_advance_level_{}", w[1].level),
            "certified slope increases by at least 0.85 from one level to the next",
            w[1].min_slope - w[0].min_slope,
            ADVANCE_MARGIN,
        ));
    }
    if series.level < target {
        failures.push(format!("series reached level {} of {target}", series.level));
    }

    let s0 = &series.samples[0];
    let ladder = opts.ladder;
    let imp = SeriesTerms::with_coefficients(&[s0.a2.value]);
    let alt = SeriesTerms::with_coefficients(&[s0.a2.alternate]);
    let a2_comparison = A2Comparison {
        sample: s0.id,
        implemented: s0.a2.value,
        alternate: s0.a2.alternate,
        implemented_boundary_det: boundary_determinant(
            domain, &imp, &s0.point, &s0.normal, &ladder,
        )?,
        alternate_boundary_det: boundary_determinant(domain, &alt, &s0.point, &s0.normal, &ladder)?,
    };

    let mut series = series;
    let mut patch = None;
    let mut patched_min_slope = None;
    if series.level == target && series.samples.iter().all(|s| s.b.len() >= target - 1) {
        let collar_points = series.collar_samples(opts.collar_depths, opts.collar_min_depth);
        match psh_patch(&series, &collar_points) {
            Ok(p) => {
                certificates.push(Certificate::at_least(
                    "psh_patch",
                    "minimum complex-Hessian eigenvalue of the patched series on the collar samples is nonnegative",
                    p.min_eigenvalue,
                    0.0,
                ));
                series = series.with_patch(p.constant);
                let slopes: Vec<f64> = (0..series.samples.len())
                    .into_par_iter()
                    .map(|i| {
                        series
                            .vanishing_order(i, target, &opts.ray)
                            .map(|f| f.slope)
                    })
                    .collect::<Result<_>>()?;
                let min = slopes.into_iter().fold(f64::INFINITY, f64::min);
                certificates.push(Certificate::at_least(
                    "patched_vanishing_order",
                    &format!(
                        "vanishing order of the patched series stays at least {} - {SLOPE_SLACK}",
                        target - 1
                    ),
                    min,
                    (target - 1) as f64 - SLOPE_SLACK,
                ));
                patched_min_slope = Some(min);
                patch = Some(p);
            }
            Err(e) => failures.push(format!("psh patch: {e}")),
        }
    }

    let report = FlattenReport {
        domain: domain.catalog().to_string(),
        n: domain.dimension(),
        q: opts.q,
        level: series.level,
        samples: series.samples.len(),
        seed: opts.seed,
        collar,
        collar_halvings: halvings,
        levels,
        a2_comparison,
        patch,
        patched_min_slope,
        certificates,
        failures,
        note: COLLAR_NOTE.into(),
    };
    Ok(Flattened { series, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball_frame(n: usize) -> (DomainSpec, Vec<f64>, Vec<f64>) {
        let d = DomainSpec::ball(n).unwrap();
        let mut p = vec![0.0; 2 * n];
        p[0] = 0.6;
        p[3] = 0.8;
        let (p, nu) = boundary_frame(&d, &p).unwrap();
        (d, p, nu)
    }

    /// `det H(g(|z|))` for `n = 2` with `g` the level-`m` log series in `s - 1`.
    fn radial_det(a: &[f64], s: f64) -> f64 {
        let rho = s - 1.0;
        let mut g1 = 1.0;
        let mut g2 = 0.0;
        for (i, ak) in a.iter().enumerate() {
            let k = (i + 2) as i32;
            g1 += k as f64 * ak * rho.powi(k - 1);
            g2 += (k * (k - 1)) as f64 * ak * rho.powi(k - 2);
        }
        (g1 / (2.0 * s)) * (g1 / s + g2) / 4.0
    }

    #[test]
    fn ball_a2_and_alternate() {
        for n in [2, 3] {
            let (d, p, _) = ball_frame(n);
            let a2 = compute_a2(&d, &p).unwrap();
            assert!((a2.value + 0.5).abs() < 1e-12);
            assert!((a2.alternate + 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn level_one_value_is_minus_delta() {
        let d = DomainSpec::ball(2).unwrap();
        let x = [0.9, 0.0, 0.0, 0.0];
        let j = series_jets(&d, &SeriesTerms::bare(), &lift_point(&x, 2).unwrap()).unwrap();
        assert!((j.r.value() + 0.1).abs() < 1e-14);
    }

    #[test]
    fn level_two_determinant_matches_radial_closed_form() {
        let d = DomainSpec::ball(2).unwrap();
        let t = 1e-2;
        let x = [1.0 - t, 0.0, 0.0, 0.0];
        let j = series_jets(
            &d,
            &SeriesTerms::with_coefficients(&[-0.5]),
            &lift_point(&x, 2).unwrap(),
        )
        .unwrap();
        let det = hermitian_det(&wirtinger_real(&j.r).unwrap().hessian);
        let want = radial_det(&[-0.5], 1.0 - t);
        assert!(((det - want) / want).abs() < 1e-8, "{det} vs {want}");
        // Value matches the truncated log series.
        let rho: f64 = -t;
        assert!((j.r.value() - (rho - rho * rho / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn ball_b1_and_a3() {
        let (d, p, nu) = ball_frame(2);
        let terms = SeriesTerms::with_coefficients(&[-0.5]);
        let b = extract_b(
            &d,
            &terms,
            &p,
            &nu,
            &LadderParams::default(),
            Precision::Double,
        )
        .unwrap();
        assert!((b.value + 0.25).abs() < 1e-6, "{}", b.value);
        let a3 = next_coefficient(&d, &terms, &p, b.value).unwrap();
        assert!((a3 - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn wrong_a2_is_flagged_nonvanishing() {
        let (d, p, nu) = ball_frame(2);
        let terms = SeriesTerms::with_coefficients(&[-0.25]);
        let r = extract_b(
            &d,
            &terms,
            &p,
            &nu,
            &LadderParams::default(),
            Precision::Double,
        );
        assert!(
            matches!(r, Err(Error::NonVanishing { order: 0, .. })),
            "{r:?}"
        );
        let bd = boundary_determinant(&d, &terms, &p, &nu, &LadderParams::default()).unwrap();
        assert!((bd - 0.0625).abs() < 1e-8, "{bd}");
    }

    #[test]
    fn ball_recursion_reproduces_log_series() {
        let (d, p, _) = ball_frame(2);
        let opts = FlattenOptions {
            q: 3,
            ..Default::default()
        };
        let c = coefficients_at(&d, 0, &p, &opts, None).unwrap();
        assert!(c.failure.is_none(), "{:?}", c.failure);
        let want = [-0.5, 1.0 / 3.0, -0.25];
        for (a, w) in c.a.iter().zip(want) {
            assert!((a - w).abs() < 1e-6, "{:?}", c.a);
        }
    }

    #[test]
    fn ball_slopes_per_level() {
        let (d, p, nu) = ball_frame(2);
        let a = [-0.5, 1.0 / 3.0, -0.25];
        for m in 2..=4 {
            let terms = SeriesTerms::with_coefficients(&a[..m - 1]);
            let fit = vanishing_order(
                &d,
                &terms,
                &p,
                &nu,
                &RayParams::default(),
                Precision::Double,
            )
            .unwrap();
            assert!(fit.slope >= (m - 1) as f64 - 0.1, "m={m}: {}", fit.slope);
        }
    }

    #[test]
    fn ball_needs_no_patch() {
        let d = DomainSpec::ball(2).unwrap();
        let opts = FlattenOptions {
            q: 2,
            samples: 4,
            ..Default::default()
        };
        let pts = d.boundary_samples(4, 0).unwrap();
        let s = DefiningSeries::build(&d, &pts, &opts, None).unwrap();
        assert_eq!(s.level(), 3);
        let p = psh_patch(&s, &s.collar_samples(10, 1e-3)).unwrap();
        assert_eq!(p.constant, 0.0);
        assert!(p.min_eigenvalue >= 0.0);
    }

    #[test]
    fn evaluation_rejects_points_outside_the_collar() {
        let d = DomainSpec::ball(2).unwrap();
        let opts = FlattenOptions {
            q: 1,
            samples: 2,
            ..Default::default()
        };
        let pts = d.boundary_samples(2, 0).unwrap();
        let s = DefiningSeries::build(&d, &pts, &opts, None).unwrap();
        assert!(matches!(
            s.evaluate(&[0.5, 0.0, 0.0, 0.0], 2),
            Err(Error::CollarViolation { .. })
        ));
        assert!(matches!(
            s.evaluate(&[1.0, 0.0, 0.0, 0.0], 2),
            Err(Error::CollarViolation { .. })
        ));
        let e = s.evaluate(&[0.95, 0.0, 0.0, 0.0], 2).unwrap();
        assert!((e.delta - 0.05).abs() < 1e-14);
    }

    #[test]
    fn precision_policy() {
        assert_eq!(precision_for_level(3, None), Precision::Double);
        assert_eq!(precision_for_level(4, None), Precision::Dd);
        assert_eq!(
            precision_for_level(4, Some(Precision::Double)),
            Precision::Double
        );
    }
}
