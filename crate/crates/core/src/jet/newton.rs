//! Newton iteration for square systems, in plain values and in jets.
//!
//! The jet variant first converges the degree-0 root with ordinary Newton,
//! then iterates `u <- u - J0^{-1} G(params, u)` in jet arithmetic with the
//! Jacobian frozen at the root. Each sweep fixes one more Taylor degree, so
//! the iteration reaches the implicit-function expansion after `order + 1`
//! sweeps.

use std::sync::Arc;

use super::{Jet, Layout};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Square system `G(params, unknowns) = 0`.
pub trait JetSystem<S: Scalar> {
    fn unknowns(&self) -> usize;

    /// Residuals; `params` and `unknowns` always share one layout.
    fn residual(&self, params: &[Jet<S>], unknowns: &[Jet<S>]) -> Result<Vec<Jet<S>>>;
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Steps that stall above this size are reported as failures.
    pub stagnation_tolerance: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iterations: 64,
            stagnation_tolerance: 1e-12,
        }
    }
}

pub(crate) struct Lu<S: Scalar> {
    a: Vec<Vec<S>>,
    perm: Vec<usize>,
}

impl<S: Scalar> Lu<S> {
    pub(crate) fn factor(mut a: Vec<Vec<S>>, context: &'static str) -> Result<Self> {
        let n = a.len();
        let scale = a
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0f64, |m, v| m.max(v.to_f64().abs()))
            .max(f64::MIN_POSITIVE);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| {
                    a[i][k]
                        .abs()
                        .partial_cmp(&a[j][k].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap();
            if a[p][k].abs().to_f64() <= 1e-14 * scale {
                return Err(Error::SingularJacobian(context));
            }
            a.swap(k, p);
            perm.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                a[i][k] = f;
                for j in k + 1..n {
                    let t = f * a[k][j];
                    a[i][j] -= t;
                }
            }
        }
        Ok(Lu { a, perm })
    }

    pub(crate) fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.a.len();
        let mut x: Vec<S> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let t = self.a[i][j] * x[j];
                x[i] -= t;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = self.a[i][j] * x[j];
                x[i] -= t;
            }
            x[i] /= self.a[i][i];
        }
        x
    }
}

fn inf_norm<S: Scalar>(v: &[S]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.to_f64().abs()))
}

fn residual_and_jacobian<S: Scalar, Sys: JetSystem<S> + ?Sized>(
    system: &Sys,
    params: &[S],
    u: &[S],
) -> Result<(Vec<S>, Vec<Vec<S>>)> {
    let m = system.unknowns();
    let layout = Layout::get(m, 1);
    let pj: Vec<Jet<S>> = params.iter().map(|&p| Jet::constant(&layout, p)).collect();
    let uj: Vec<Jet<S>> = u
        .iter()
        .enumerate()
        .map(|(i, &x)| Jet::variable(&layout, i, x))
        .collect();
    let r = system.residual(&pj, &uj)?;
    let values = r.iter().map(|j| j.value()).collect();
    let jac = r
        .iter()
        .map(|j| (0..m).map(|k| j.d1(k)).collect())
        .collect();
    Ok((values, jac))
}

/// Plain damped Newton on the degree-0 system.
pub fn newton_solve<S: Scalar, Sys: JetSystem<S> + ?Sized>(
    system: &Sys,
    params: &[S],
    guess: &[S],
    opts: &NewtonOptions,
) -> Result<Vec<S>> {
    let m = system.unknowns();
    if guess.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: guess.len(),
        });
    }
    let mut u = guess.to_vec();
    let (mut f, mut jac) = residual_and_jacobian(system, params, &u)?;
    let mut fnorm = inf_norm(&f);
    let mut last_step = f64::INFINITY;
    let mut stalled = 0;
    for _ in 0..opts.max_iterations {
        let lu = Lu::factor(jac.clone(), "newton")?;
        let neg: Vec<S> = f.iter().map(|&v| -v).collect();
        let step = lu.solve(&neg);
        let step_norm = inf_norm(&step);
        let scale = 1.0 + inf_norm(&u);
        let fine = 64.0 * S::EPSILON * scale;

        // Backtrack while the residual grows.
        let mut lambda = S::one();
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<S> = u.iter().zip(&step).map(|(&a, &d)| a + lambda * d).collect();
            if let Ok((ft, jt)) = residual_and_jacobian(system, params, &trial) {
                let n = inf_norm(&ft);
                if n.is_finite() && (n <= fnorm || n <= 64.0 * S::EPSILON || step_norm <= fine) {
                    accepted = Some((trial, ft, jt, n));
                    break;
                }
            }
            lambda *= S::from_f64(0.5);
        }
        let Some((nu, nf, nj, nn)) = accepted else {
            return Err(Error::NoConvergence {
                iterations: opts.max_iterations,
                residual: fnorm,
            });
        };
        u = nu;
        f = nf;
        jac = nj;
        fnorm = nn;
        if step_norm <= fine || fnorm == 0.0 {
            return Ok(u);
        }
        if step_norm >= last_step * 0.5 {
            stalled += 1;
            if stalled >= 3 {
                if step_norm <= opts.stagnation_tolerance * scale {
                    return Ok(u);
                }
                return Err(Error::NoConvergence {
                    iterations: opts.max_iterations,
                    residual: fnorm,
                });
            }
        } else {
            stalled = 0;
        }
        last_step = step_norm;
    }
    if last_step <= opts.stagnation_tolerance * (1.0 + inf_norm(&u)) {
        Ok(u)
    } else {
        Err(Error::NoConvergence {
            iterations: opts.max_iterations,
            residual: fnorm,
        })
    }
}

/// Root of the system as jets in the parameters' variables.
pub fn jet_newton<S: Scalar, Sys: JetSystem<S> + ?Sized>(
    system: &Sys,
    params: &[Jet<S>],
    guess: &[S],
    opts: &NewtonOptions,
) -> Result<Vec<Jet<S>>> {
    if params.is_empty() {
        return Err(Error::Invalid(
            "jet_newton needs at least one parameter jet".into(),
        ));
    }
    let layout: Arc<Layout> = params[0].layout().clone();
    let base: Vec<S> = params.iter().map(|p| p.value()).collect();
    let root = newton_solve(system, &base, guess, opts)?;
    let (_, jac) = residual_and_jacobian(system, &base, &root)?;
    let lu = Lu::factor(jac, "jet newton")?;

    let mut u: Vec<Jet<S>> = root.iter().map(|&r| Jet::constant(&layout, r)).collect();
    if layout.order() == 0 {
        return Ok(u);
    }
    let ncoef = layout.len();
    let scale = 1.0 + u.iter().map(|j| j.max_abs()).fold(0.0, f64::max);
    for sweep in 0..opts.max_iterations {
        let g = system.residual(params, &u)?;
        let mut delta_norm = 0.0f64;
        let mut corrections = vec![vec![S::zero(); ncoef]; u.len()];
        for c in 1..ncoef {
            let rhs: Vec<S> = g.iter().map(|j| j.coeffs()[c]).collect();
            let d = lu.solve(&rhs);
            for (i, v) in d.into_iter().enumerate() {
                delta_norm = delta_norm.max(v.to_f64().abs());
                corrections[i][c] = v;
            }
        }
        for (ui, corr) in u.iter_mut().zip(corrections) {
            let cj = Jet::from_coeffs(&layout, corr)?;
            *ui = &*ui - &cj;
        }
        if sweep >= layout.order() && delta_norm <= 1e3 * S::EPSILON * scale {
            return Ok(u);
        }
        if sweep > layout.order() + 8 && delta_norm <= opts.stagnation_tolerance * scale {
            return Ok(u);
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        residual: 0.0,
    })
}
