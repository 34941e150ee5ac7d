//! Ladder fits along inward normals: polynomial extrapolation of
//! `det H / rho^(m-1)` and log-log slopes of `|det H|` against `delta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Precision, Scalar};

/// Geometric ladder `t_j = t0 * 2^-j` used to extract the `b` coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderParams {
    pub t0: f64,
    pub rungs: usize,
    /// Number of correction powers kept above the leading one.
    pub poly_order: usize,
    /// Relative extrapolation-error tolerance.
    pub tolerance: f64,
    /// Largest admissible lower-order coefficient, relative to `max(1, |b|)`.
    pub nonvanishing_tolerance: f64,
}

impl Default for LadderParams {
    fn default() -> Self {
        LadderParams {
            t0: 1e-2,
            rungs: 10,
            poly_order: 4,
            tolerance: 1e-4,
            nonvanishing_tolerance: 1e-6,
        }
    }
}

/// Sample ladder for the vanishing-order slope fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayParams {
    pub t0: f64,
    pub rungs: usize,
}

impl Default for RayParams {
    fn default() -> Self {
        // 0.1 down to about 1.6e-3.
        RayParams { t0: 0.1, rungs: 7 }
    }
}

/// Slack allowed below the expected order when certifying a slope.
pub const SLOPE_SLACK: f64 = 0.15;
/// Determinants below this magnitude are dropped from slope fits.
pub const UNDERFLOW: f64 = 1e-30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub t: f64,
    pub delta: f64,
    pub det: f64,
}

/// Result of extracting `b_{m-1}` from a level-`m` ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BExtraction {
    pub level: usize,
    pub value: f64,
    pub error_estimate: f64,
    /// Fitted coefficients of `delta^j`, `j < m - 1`; zero for a flat level.
    pub lower_terms: Vec<f64>,
    pub rungs: Vec<Rung>,
    pub precision: Precision,
}

/// Least squares by Householder QR; `a` is row-major `rows x cols`.
pub fn least_squares<S: Scalar>(mut a: Vec<Vec<S>>, mut b: Vec<S>) -> Result<Vec<S>> {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    if rows < cols || cols == 0 {
        return Err(Error::Invalid(format!(
            "least squares needs rows >= cols > 0, got {rows}x{cols}"
        )));
    }
    for k in 0..cols {
        let norm = (k..rows).map(|i| a[i][k] * a[i][k]).sum::<S>().sqrt();
        if norm.to_f64() == 0.0 {
            return Err(Error::SingularJacobian("least squares"));
        }
        let alpha = if a[k][k] > S::zero() { -norm } else { norm };
        let mut v: Vec<S> = (k..rows).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vv: S = v.iter().map(|x| *x * *x).sum();
        if vv.to_f64() == 0.0 {
            continue;
        }
        let two = S::from_f64(2.0);
        for j in k..cols {
            let d: S = v.iter().enumerate().map(|(i, vi)| *vi * a[k + i][j]).sum();
            let f = two * d / vv;
            for (i, vi) in v.iter().enumerate() {
                let t = f * *vi;
                a[k + i][j] -= t;
            }
        }
        let d: S = v.iter().enumerate().map(|(i, vi)| *vi * b[k + i]).sum();
        let f = two * d / vv;
        for (i, vi) in v.iter().enumerate() {
            let t = f * *vi;
            b[k + i] -= t;
        }
    }
    let scale = (0..cols).fold(0.0f64, |m, k| m.max(a[k][k].to_f64().abs()));
    let mut x = vec![S::zero(); cols];
    for k in (0..cols).rev() {
        if a[k][k].to_f64().abs() <= 1e-300 + 1e-30 * scale {
            return Err(Error::SingularJacobian("least squares"));
        }
        let mut s = b[k];
        for j in k + 1..cols {
            s -= a[k][j] * x[j];
        }
        x[k] = s / a[k][k];
    }
    Ok(x)
}

/// Fits `y = sum_{j <= degree} c_j t^j`, working in `t / max t` for
/// conditioning; returns unscaled coefficients.
pub fn fit_polynomial<S: Scalar>(ts: &[S], ys: &[S], degree: usize) -> Result<Vec<S>> {
    let scale = ts.iter().fold(S::zero(), |m, &t| m.max(t.abs()));
    if scale.to_f64() == 0.0 {
        return Err(Error::Invalid(
            "polynomial fit needs nonzero abscissae".into(),
        ));
    }
    let rows = ts
        .iter()
        .map(|&t| {
            let s = t / scale;
            let mut p = S::one();
            (0..=degree)
                .map(|_| {
                    let v = p;
                    p *= s;
                    v
                })
                .collect()
        })
        .collect();
    let c = least_squares(rows, ys.to_vec())?;
    let mut p = S::one();
    Ok(c.into_iter()
        .map(|cj| {
            let v = cj / p;
            p *= scale;
            v
        })
        .collect())
}

/// Extracts `b_{m-1}` from `det H = b_{m-1} rho^(m-1) + ...` along a ray.
///
/// `sample(t)` returns `(delta, det)` at depth `t`. The model carries the
/// lower powers `delta^0 .. delta^(m-2)` so that residues of earlier levels
/// do not alias into `b`, plus `poly_order` powers above the leading one.
pub fn extract_from_ladder<S: Scalar>(
    level: usize,
    ladder: &LadderParams,
    precision: Precision,
    mut sample: impl FnMut(f64) -> Result<(S, S)>,
) -> Result<BExtraction> {
    if level < 2 {
        return Err(Error::Invalid("b extraction starts at level 2".into()));
    }
    let lead = level - 1;
    let degree = lead + ladder.poly_order;
    let unknowns = degree + 1;
    let rungs = ladder.rungs.max(unknowns + 1);
    let mut ds = Vec::with_capacity(rungs);
    let mut ys = Vec::with_capacity(rungs);
    let mut report = Vec::with_capacity(rungs);
    for j in 0..rungs {
        let t = ladder.t0 * 0.5f64.powi(j as i32);
        let (d, y) = sample(t)?;
        report.push(Rung {
            t,
            delta: d.to_f64(),
            det: y.to_f64(),
        });
        ds.push(d);
        ys.push(y);
    }
    let c = fit_polynomial(&ds, &ys, degree)?;
    let sign = if lead % 2 == 0 { S::one() } else { -S::one() };
    let b = sign * c[lead];
    // Error estimate: the same fit without the outermost rung.
    let c2 = fit_polynomial(&ds[1..], &ys[1..], degree)?;
    let b2 = sign * c2[lead];
    let err = (b - b2).abs().to_f64();
    let value = b.to_f64();
    let lower_terms: Vec<f64> = c[..lead].iter().map(|v| v.to_f64()).collect();
    let floor = value.abs().max(1.0);
    if let Some((j, v)) = lower_terms
        .iter()
        .enumerate()
        .find(|(_, v)| v.abs() > ladder.nonvanishing_tolerance * floor)
    {
        return Err(Error::NonVanishing {
            order: j,
            value: *v,
        });
    }
    if err > ladder.tolerance * value.abs().max(1e-6) {
        return Err(Error::Extrapolation {
            residual: err,
            tolerance: ladder.tolerance,
        });
    }
    Ok(BExtraction {
        level,
        value,
        error_estimate: err,
        lower_terms,
        rungs: report,
        precision,
    })
}

/// Fit of `log |det|` against `log delta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub slope: f64,
    /// `exp(intercept)`: the constant `C` in `|det| ~ C delta^slope`.
    pub constant: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub rungs: Vec<Rung>,
    /// Depths whose determinant underflowed and were left out.
    pub dropped: Vec<f64>,
}

impl OrderFit {
    pub fn certifies(&self, expected: f64) -> bool {
        self.slope >= expected - SLOPE_SLACK
    }
}

/// Least-squares slope of `log |det|` over `t_j = t0 2^-j`.
pub fn fit_order(
    ray: &RayParams,
    mut sample: impl FnMut(f64) -> Result<(f64, f64)>,
) -> Result<OrderFit> {
    if ray.rungs < 5 {
        return Err(Error::Invalid(format!(
            "vanishing order needs at least 5 rungs, got {}",
            ray.rungs
        )));
    }
    let mut rungs = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..ray.rungs {
        let t = ray.t0 * 0.5f64.powi(j as i32);
        let (delta, det) = sample(t)?;
        if det.abs() < UNDERFLOW || !det.is_finite() {
            dropped.push(t);
        } else {
            rungs.push(Rung { t, delta, det });
        }
    }
    if rungs.len() < 2 {
        return Err(Error::Invalid(
            "too few non-underflowing rungs for a slope fit".into(),
        ));
    }
    let xs: Vec<f64> = rungs.iter().map(|r| r.delta.ln()).collect();
    let ys: Vec<f64> = rungs.iter().map(|r| r.det.abs().ln()).collect();
    let c = fit_polynomial(&xs.iter().map(|x| x - xs[0]).collect::<Vec<_>>(), &ys, 1)?;
    let slope = c[1];
    let intercept = c[0] - slope * xs[0];
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt();
    Ok(OrderFit {
        slope,
        constant: intercept.exp(),
        residual,
        rungs,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Dd;

    #[test]
    fn least_squares_recovers_exact_polynomial() {
        let ts: Vec<f64> = (0..8).map(|j| 0.01 * 0.5f64.powi(j)).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 2.0 - 3.0 * t + 0.5 * t * t).collect();
        let c = fit_polynomial(&ts, &ys, 3).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12);
        assert!((c[1] + 3.0).abs() < 1e-9);
    }

    #[test]
    fn synthetic_power_law_gives_signed_b() {
        for m in 2..=6usize {
            let ladder = LadderParams::default();
            let e = extract_from_ladder::<Dd>(m, &ladder, Precision::Dd, |t| {
                let t = Dd::from_f64(t);
                Ok((t, t.powi(m as i32 - 1)))
            })
            .unwrap();
            let want = if (m - 1) % 2 == 0 { 1.0 } else { -1.0 };
            assert!((e.value - want).abs() < 1e-8, "m={m}: {}", e.value);
        }
    }

    #[test]
    fn pollution_terms_do_not_alias() {
        // A tiny constant residue from an earlier level plus corrections.
        let e = extract_from_ladder::<Dd>(4, &LadderParams::default(), Precision::Dd, |t| {
            let t = Dd::from(t);
            let y = Dd::from(1e-9) + Dd::from(2e-8) * t - Dd::from(0.3) * t * t * t
                + t.powi(4) * Dd::from(5.0);
            Ok((t, y))
        })
        .unwrap();
        assert!((e.value - 0.3).abs() < 1e-9, "{}", e.value);
    }

    #[test]
    fn nonvanishing_constant_is_flagged() {
        let r = extract_from_ladder::<f64>(2, &LadderParams::default(), Precision::Double, |t| {
            Ok((t, 0.0625 + 0.25 * t))
        });
        assert!(
            matches!(r, Err(Error::NonVanishing { order: 0, value }) if (value - 0.0625).abs() < 1e-10)
        );
    }

    #[test]
    fn slope_of_exact_power_law() {
        let fit = fit_order(&RayParams::default(), |t| Ok((t, 7.0 * t.powi(3)))).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-6);
        assert!((fit.constant - 7.0).abs() < 1e-6);
        assert!(fit.certifies(3.0));
    }

    #[test]
    fn underflowing_rungs_are_dropped() {
        let fit = fit_order(&RayParams::default(), |t| {
            Ok((t, if t < 0.01 { 0.0 } else { t }))
        })
        .unwrap();
        assert_eq!(fit.dropped.len(), 3);
        assert!((fit.slope - 1.0).abs() < 1e-12);
    }
}
