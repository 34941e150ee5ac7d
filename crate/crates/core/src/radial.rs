//! Radial Dirichlet problem for the complex Monge-Ampère equation on the unit
//! ball: `det H(v) = f(|z|^2)` in the ball, `v = 0` on the sphere.
//!
//! For `v = g(t)`, `t = |z|^2`,
//!
//! ```text
//! det H(v) = g'^(n-1) (g' + t g'') = (n t^(n-1))^-1 d/dt (t g')^n,
//! ```
//!
//! so `t g'(t) = (n F(t))^(1/n)` with `F(t) = int_0^t s^(n-1) f(s) ds`, and
//! `g(t) = -int_t^1 g'(s) ds`. Both integrals are composite Simpson sums on
//! the graded grid `t_i = (i/N)^2`.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{halton, sphere_point};
use crate::error::{Error, Result};
use crate::expr::{parse_profile, Expr};
use crate::hermitian::hermitian_det;
use crate::jet::{lift_point, Jet};
use crate::wirtinger::wirtinger_real;

pub const MIN_GRID: usize = 64;
pub const DEFAULT_GRID: usize = 256;
/// Tolerance of the plurisubharmonicity invariant on the grid.
pub const PSH_TOLERANCE: f64 = 1e-10;
/// Profile samples above `-NEGATIVE_SLACK` are clamped to zero.
pub const NEGATIVE_SLACK: f64 = 1e-14;
/// Verification samples stay in `1e-3 < |z| < 1 - 1e-3`.
pub const SAMPLE_MARGIN: f64 = 1e-3;
/// Step sizes of the regularity probe.
pub const PROBE_STEPS: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Right-hand side `f` as a function of `t = |z|^2`.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    Const(f64),
    /// Coefficients `c0, c1, ...` of a polynomial in `t`.
    Poly(Vec<f64>),
    Expr(Expr),
}

impl Profile {
    /// Parses `const:c`, `poly:c0,c1,...` or `expr:<expression in t>`; an
    /// untagged string is read as an expression.
    pub fn parse(tag: &str) -> Result<Self> {
        let tag = tag.trim();
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Invalid(format!("bad number `{s}` in profile `{tag}`")))
        };
        if let Some(c) = tag.strip_prefix("const:") {
            Ok(Profile::Const(num(c)?))
        } else if let Some(cs) = tag.strip_prefix("poly:") {
            let coeffs = cs.split(',').map(num).collect::<Result<Vec<_>>>()?;
            Ok(Profile::Poly(coeffs))
        } else if let Some(e) = tag.strip_prefix("expr:") {
            Ok(Profile::Expr(parse_profile(e)?))
        } else {
            Ok(Profile::Expr(parse_profile(tag)?))
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            Profile::Const(c) => Ok(*c),
            Profile::Poly(cs) => Ok(cs.iter().rev().fold(0.0, |acc, c| acc * t + c)),
            Profile::Expr(e) => e.eval_profile(t),
        }
    }

    /// `lambda * f`.
    pub fn scaled(&self, lambda: f64) -> Profile {
        match self {
            Profile::Const(c) => Profile::Const(lambda * c),
            Profile::Poly(cs) => Profile::Poly(cs.iter().map(|c| lambda * c).collect()),
            Profile::Expr(e) => Profile::Expr(Expr::mul(Expr::real(lambda), e.clone())),
        }
    }

    /// Profiles used by the invariant suites.
    pub fn catalog() -> Vec<Profile> {
        vec![
            Profile::Const(1.0),
            Profile::Const(0.0),
            Profile::Poly(vec![0.0, 1.0]),
            Profile::Poly(vec![1.0, -1.0]),
            Profile::Poly(vec![0.5, 0.0, 2.0]),
            Profile::Expr(parse_profile("exp(t)").expect("catalog profile parses")),
        ]
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Const(c) => write!(f, "const:{c}"),
            Profile::Poly(cs) => {
                let parts: Vec<String> = cs.iter().map(|c| c.to_string()).collect();
                write!(f, "poly:{}", parts.join(","))
            }
            Profile::Expr(e) => write!(f, "expr:{e}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadialProblem {
    pub n: usize,
    pub profile: Profile,
    /// Number of grid intervals.
    pub grid: usize,
}

impl RadialProblem {
    pub fn new(n: usize, profile: Profile) -> Self {
        RadialProblem {
            n,
            profile,
            grid: DEFAULT_GRID,
        }
    }

    pub fn with_grid(mut self, grid: usize) -> Self {
        self.grid = grid;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveMetadata {
    pub profile: String,
    pub n: usize,
    pub grid: usize,
    pub quadrature: String,
    pub interpolation: String,
    /// `f` vanishes on the whole grid.
    pub degenerate: bool,
    /// Smallest `g'` and `g' + t g''` on the grid.
    pub min_slope: f64,
    pub min_radial_term: f64,
}

/// `v(z) = g(|z|^2)` on grid nodes, with `g(1) = 0`.
#[derive(Clone, Debug)]
pub struct RadialSolution {
    problem: RadialProblem,
    t: Vec<f64>,
    /// `F(t_i) = int_0^t_i s^(n-1) f(s) ds`.
    big_f: Vec<f64>,
    g: Vec<f64>,
    gp: Vec<f64>,
    pub metadata: SolveMetadata,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Checked integrand `s^(n-1) f(s)`.
fn integrand(profile: &Profile, n: usize, s: f64) -> Result<f64> {
    let v = match profile.eval(s) {
        Ok(v) if v.is_finite() => v,
        _ => return Err(Error::NonIntegrable { t: s }),
    };
    if v < -NEGATIVE_SLACK {
        return Err(Error::NegativeProfile { t: s, value: v });
    }
    Ok(s.powi(n as i32 - 1) * v.max(0.0))
}

/// `g'(t)` from `F(t)`; at `t = 0` the limit `f(0)^(1/n)`.
fn slope(n: usize, t: f64, big_f: f64, f0: f64) -> f64 {
    if t == 0.0 {
        return f0.max(0.0).powf(1.0 / n as f64);
    }
    (n as f64 * big_f).max(0.0).powf(1.0 / n as f64) / t
}

/// Solves the radial problem by quadrature.
pub fn solve_radial(problem: &RadialProblem) -> Result<RadialSolution> {
    let n = problem.n;
    if n == 0 {
        return Err(Error::Invalid("dimension must be at least 1".into()));
    }
    if problem.grid < MIN_GRID {
        return Err(Error::Invalid(format!(
            "grid must have at least {MIN_GRID} intervals (got {})",
            problem.grid
        )));
    }
    let nn = problem.grid;
    let f0 = {
        let v = problem
            .profile
            .eval(0.0)
            .map_err(|_| Error::NonIntegrable { t: 0.0 })?;
        if !v.is_finite() {
            return Err(Error::NonIntegrable { t: 0.0 });
        }
        if v < -NEGATIVE_SLACK {
            return Err(Error::NegativeProfile { t: 0.0, value: v });
        }
        v
    };
    let t: Vec<f64> = (0..=nn).map(|i| (i as f64 / nn as f64).powi(2)).collect();
    let mut big_f = vec![0.0; nn + 1];
    let mut f_mid = vec![0.0; nn];
    let mut degenerate = f0 <= 0.0;
    let mut fa = integrand(&problem.profile, n, 0.0)?;
    for i in 0..nn {
        let (a, b) = (t[i], t[i + 1]);
        let m = 0.5 * (a + b);
        let q1 = integrand(&problem.profile, n, 0.5 * (a + m))?;
        let fm = integrand(&problem.profile, n, m)?;
        let q3 = integrand(&problem.profile, n, 0.5 * (m + b))?;
        let fb = integrand(&problem.profile, n, b)?;
        degenerate &= [q1, fm, q3, fb].iter().all(|&v| v == 0.0);
        f_mid[i] = big_f[i] + simpson(a, m, fa, q1, fm);
        big_f[i + 1] = f_mid[i] + simpson(m, b, fm, q3, fb);
        fa = fb;
    }
    let gp: Vec<f64> = t
        .iter()
        .zip(&big_f)
        .map(|(&ti, &fi)| slope(n, ti, fi, f0))
        .collect();
    let mut g = vec![0.0; nn + 1];
    for i in (0..nn).rev() {
        let m = 0.5 * (t[i] + t[i + 1]);
        let gm = slope(n, m, f_mid[i], f0);
        g[i] = g[i + 1] - simpson(t[i], t[i + 1], gp[i], gm, gp[i + 1]);
    }

    let mut sol = RadialSolution {
        problem: problem.clone(),
        t,
        big_f,
        g,
        gp,
        metadata: SolveMetadata {
            profile: problem.profile.to_string(),
            n,
            grid: nn,
            quadrature: "composite Simpson on t_i = (i/N)^2".into(),
            interpolation: "cubic Hermite for g with quadrature-exact slopes".into(),
            degenerate,
            min_slope: 0.0,
            min_radial_term: 0.0,
        },
    };
    let (min_slope, min_radial) = sol.psh_margins()?;
    sol.metadata.min_slope = min_slope;
    sol.metadata.min_radial_term = min_radial;
    if min_slope < -PSH_TOLERANCE || min_radial < -PSH_TOLERANCE {
        return Err(Error::Invalid(format!(
            "radial solution is not plurisubharmonic on the grid (g' >= {min_slope:e}, g' + t g'' >= {min_radial:e})"
        )));
    }
    Ok(sol)
}

impl RadialSolution {
    pub fn problem(&self) -> &RadialProblem {
        &self.problem
    }

    pub fn grid(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.g
    }

    pub fn slopes(&self) -> &[f64] {
        &self.gp
    }

    pub fn is_degenerate(&self) -> bool {
        self.metadata.degenerate
    }

    fn panel(&self, t: f64) -> usize {
        let nn = self.problem.grid;
        // t_i = (i/N)^2, so the panel index is floor(N sqrt(t)).
        ((t.max(0.0).sqrt() * nn as f64).floor() as usize).min(nn - 1)
    }

    fn f_at(&self, t: f64) -> Result<f64> {
        let i = self.panel(t);
        let a = self.t[i];
        if t == a {
            return Ok(self.big_f[i]);
        }
        let n = self.problem.n;
        let p = &self.problem.profile;
        let m = 0.5 * (a + t);
        Ok(self.big_f[i]
            + simpson(
                a,
                t,
                integrand(p, n, a)?,
                integrand(p, n, m)?,
                integrand(p, n, t)?,
            ))
    }

    /// `(g, g', g'')` at `t` in `[0, 1]`.
    pub fn derivatives(&self, t: f64) -> Result<(f64, f64, f64)> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfDomain {
                op: "radial solution (t outside [0, 1])",
                value: t,
            });
        }
        let n = self.problem.n;
        let f0 = self.problem.profile.eval(0.0)?;
        let big_f = self.f_at(t)?;
        let gp = slope(n, t, big_f, f0);
        // (t g')' = t^(n-1) f / (t g')^(n-1)
        let w = t * gp;
        let f = self.problem.profile.eval(t)?.max(0.0);
        let wp = if t == 0.0 || w == 0.0 {
            if n == 1 || t == 0.0 {
                f.max(0.0).powf(1.0 / n as f64)
            } else {
                0.0
            }
        } else {
            t.powi(n as i32 - 1) * f / w.powi(n as i32 - 1)
        };
        let gpp = if t == 0.0 { 0.0 } else { (wp - gp) / t };
        Ok((self.value(t)?, gp, gpp))
    }

    /// `g(t)` by cubic Hermite interpolation between nodes.
    pub fn value(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfDomain {
                op: "radial solution (t outside [0, 1])",
                value: t,
            });
        }
        let i = self.panel(t);
        let (a, b) = (self.t[i], self.t[i + 1]);
        let h = b - a;
        let s = (t - a) / h;
        let (s2, s3) = (s * s, s * s * s);
        Ok((2.0 * s3 - 3.0 * s2 + 1.0) * self.g[i]
            + (s3 - 2.0 * s2 + s) * h * self.gp[i]
            + (-2.0 * s3 + 3.0 * s2) * self.g[i + 1]
            + (s3 - s2) * h * self.gp[i + 1])
    }

    /// `v(z) = g(|z|^2)` at a real point `(x1, y1, ...)`.
    pub fn v(&self, x: &[f64]) -> Result<f64> {
        self.value(x.iter().map(|c| c * c).sum())
    }

    /// Jet of `v` at `x`, from the second-order Taylor data of `g`.
    pub fn v_jet(&self, x: &[f64]) -> Result<Jet<f64>> {
        let p = lift_point(x, 2)?;
        let t = p
            .iter()
            .fold(Jet::zero(p[0].layout()), |acc, c| &acc + &(c * c));
        let (g, gp, gpp) = self.derivatives(t.value())?;
        Ok(t.compose(&[g, gp, 0.5 * gpp]))
    }

    /// `min g'` and `min (g' + t g'')` over the grid.
    pub fn psh_margins(&self) -> Result<(f64, f64)> {
        let mut min_slope = f64::INFINITY;
        let mut min_radial = f64::INFINITY;
        for &t in &self.t {
            let (_, gp, gpp) = self.derivatives(t)?;
            min_slope = min_slope.min(gp);
            min_radial = min_radial.min(gp + t * gpp);
        }
        Ok((min_slope, min_radial))
    }

    /// CSV table `t,g,g'` over the grid.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,g,dg")?;
        for ((t, g), gp) in self.t.iter().zip(&self.g).zip(&self.gp) {
            writeln!(w, "{t:e},{g:e},{gp:e}")?;
        }
        Ok(())
    }
}

/// Quasi-random points with `1e-3 < |z| < 1 - 1e-3`.
pub fn ball_samples(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..count as u64)
        .map(|i| {
            let idx = seed + i + 1;
            let dir = sphere_point(n, idx);
            let u = halton(idx, 2 * n)[2 * n - 1];
            let r = SAMPLE_MARGIN + (1.0 - 2.0 * SAMPLE_MARGIN) * u;
            dir.into_iter().map(|c| c * r).collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub samples: usize,
    pub max_residual: f64,
    pub argmax: Vec<f64>,
}

/// `max |det H(v) - f|` over `points`, with `det H(v)` from the jet core.
pub fn verify_solution(
    solution: &RadialSolution,
    profile: &Profile,
    points: &[Vec<f64>],
) -> Result<Verification> {
    let residuals: Vec<(f64, &Vec<f64>)> = points
        .par_iter()
        .map(|x| {
            let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
            if !(SAMPLE_MARGIN..=1.0 - SAMPLE_MARGIN).contains(&r) {
                return Err(Error::OutOfDomain {
                    op: "radial verification sample",
                    value: r,
                });
            }
            let det = hermitian_det(&wirtinger_real(&solution.v_jet(x)?)?.hessian);
            Ok(((det - profile.eval(r * r)?).abs(), x))
        })
        .collect::<Result<_>>()?;
    let (max_residual, argmax) = residuals.into_iter().fold((0.0, None), |best, (r, x)| {
        if r > best.0 || best.1.is_none() {
            (r, Some(x.clone()))
        } else {
            best
        }
    });
    Ok(Verification {
        samples: points.len(),
        max_residual,
        argmax: argmax.unwrap_or_default(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityProbe {
    pub steps: Vec<f64>,
    /// Largest second difference quotient per step.
    pub quotients: Vec<f64>,
    /// Ratios between consecutive steps.
    pub ratios: Vec<f64>,
    pub stable: bool,
}

impl RegularityProbe {
    pub fn sup(&self) -> f64 {
        self.quotients.iter().copied().fold(0.0, f64::max)
    }
}

/// Second difference quotients `|v(z+h) - 2v(z) + v(z-h)| / |h|^2` near the
/// sphere, along radial and tangential directions.
pub fn regularity_probe(solution: &RadialSolution) -> Result<RegularityProbe> {
    let n = solution.problem.n;
    let radii = [0.9, 0.95, 0.98];
    let mut centers = Vec::new();
    for k in 0..4u64 {
        let dir = sphere_point(n, k + 1);
        for r in radii {
            centers.push(dir.iter().map(|c| c * r).collect::<Vec<f64>>());
        }
    }
    let mut quotients = Vec::with_capacity(PROBE_STEPS.len());
    for h in PROBE_STEPS {
        let mut q: f64 = 0.0;
        for z in &centers {
            let r = z.iter().map(|c| c * c).sum::<f64>().sqrt();
            let radial: Vec<f64> = z.iter().map(|c| c / r).collect();
            // Multiplication by i: (x, y) -> (-y, x).
            let tangential: Vec<f64> = z.chunks(2).flat_map(|p| [-p[1] / r, p[0] / r]).collect();
            for e in [&radial, &tangential] {
                let plus: Vec<f64> = z.iter().zip(e).map(|(a, b)| a + h * b).collect();
                let minus: Vec<f64> = z.iter().zip(e).map(|(a, b)| a - h * b).collect();
                let d2 = solution.v(&plus)? - 2.0 * solution.v(z)? + solution.v(&minus)?;
                q = q.max(d2.abs() / (h * h));
            }
        }
        quotients.push(q);
    }
    let ratios: Vec<f64> = quotients
        .windows(2)
        .map(|w| {
            if w[0] == 0.0 && w[1] == 0.0 {
                1.0
            } else {
                w[1] / w[0]
            }
        })
        .collect();
    let stable =
        quotients.iter().all(|q| q.is_finite()) && ratios.iter().all(|r| (0.5..=2.0).contains(r));
    Ok(RegularityProbe {
        steps: PROBE_STEPS.to_vec(),
        quotients,
        ratios,
        stable,
    })
}

/// Largest change in `g` at the coarse nodes when the grid is doubled.
pub fn grid_refinement_change(problem: &RadialProblem) -> Result<f64> {
    let coarse = solve_radial(problem)?;
    let fine = solve_radial(&problem.clone().with_grid(2 * problem.grid))?;
    Ok(coarse
        .g
        .iter()
        .enumerate()
        .map(|(i, g)| (g - fine.g[2 * i]).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(n: usize, tag: &str) -> RadialSolution {
        solve_radial(&RadialProblem::new(n, Profile::parse(tag).unwrap())).unwrap()
    }

    #[test]
    fn reduction_formula_matches_jet_core() {
        // g(t) = exp(t) - e: det H(g(|z|^2)) = g'^(n-1) (g' + t g'').
        for n in 1..=4 {
            for x in ball_samples(n, 20, 3) {
                let p = lift_point(&x, 2).unwrap();
                let t = p
                    .iter()
                    .fold(Jet::zero(p[0].layout()), |acc, c| &acc + &(c * c));
                let v = t.exp();
                let det = hermitian_det(&wirtinger_real(&v).unwrap().hessian);
                let tv = t.value();
                let gp = tv.exp();
                let want = gp.powi(n as i32 - 1) * (gp + tv * gp);
                assert!((det - want).abs() < 1e-12 * want, "n={n}: {det} vs {want}");
            }
        }
    }

    #[test]
    fn constant_profile_gives_quadratic() {
        for n in 1..=4 {
            let s = solve(n, "const:1");
            for (&t, &g) in s.grid().iter().zip(s.values()) {
                assert!((g - (t - 1.0)).abs() < 1e-12);
            }
            assert_eq!(*s.values().last().unwrap(), 0.0);
        }
    }

    #[test]
    fn linear_profile_closed_form() {
        let s = solve(2, "poly:0,1");
        let c = (2.0f64 / 3.0).sqrt();
        for (&t, &g) in s.grid().iter().zip(s.values()) {
            assert!((g - 2.0 / 3.0 * c * (t.powf(1.5) - 1.0)).abs() < 1e-6);
        }
        for (&t, &gp) in s.grid().iter().zip(s.slopes()) {
            assert!((gp - c * t.sqrt()).abs() < 1e-9);
        }
        let v =
            verify_solution(&s, &Profile::Poly(vec![0.0, 1.0]), &ball_samples(2, 200, 0)).unwrap();
        assert!(v.max_residual < 1e-6, "{}", v.max_residual);
    }

    #[test]
    fn verification_and_negative_control() {
        let s = solve(3, "const:1");
        let pts = ball_samples(3, 200, 7);
        assert!(
            verify_solution(&s, &Profile::Const(1.0), &pts)
                .unwrap()
                .max_residual
                < 1e-8
        );
        assert!(
            verify_solution(&s, &Profile::Const(1.1), &pts)
                .unwrap()
                .max_residual
                >= 0.09
        );
    }

    #[test]
    fn zero_profile_is_degenerate() {
        let s = solve(2, "const:0");
        assert!(s.is_degenerate());
        assert!(s.values().iter().all(|&g| g == 0.0));
        assert_eq!(regularity_probe(&s).unwrap().sup(), 0.0);
        assert!(!solve(2, "poly:0,1").is_degenerate());
    }

    #[test]
    fn errors() {
        let neg = solve_radial(&RadialProblem::new(2, Profile::Poly(vec![-0.5, 1.0])));
        assert!(matches!(neg, Err(Error::NegativeProfile { .. })));
        let sing = solve_radial(&RadialProblem::new(
            2,
            Profile::parse("expr:1/t^2").unwrap(),
        ));
        assert!(matches!(sing, Err(Error::NonIntegrable { .. })));
        let coarse = solve_radial(&RadialProblem::new(2, Profile::Const(1.0)).with_grid(32));
        assert!(matches!(coarse, Err(Error::Invalid(_))));
    }

    #[test]
    fn regularity() {
        let p = regularity_probe(&solve(2, "const:1")).unwrap();
        assert!(
            p.quotients.iter().all(|q| (q - 2.0).abs() < 1e-6),
            "{:?}",
            p.quotients
        );
        let p = regularity_probe(&solve(2, "poly:1,-1")).unwrap();
        assert!(p.stable && p.sup().is_finite(), "{p:?}");
    }

    #[test]
    fn profile_tags_round_trip() {
        for tag in ["const:1.5", "poly:0,1,-2", "expr:exp(t)"] {
            assert_eq!(Profile::parse(tag).unwrap().to_string(), tag);
        }
        assert!(Profile::parse("poly:1,x").is_err());
    }

    #[test]
    fn csv_export() {
        let s = solve_radial(&RadialProblem::new(2, Profile::Const(1.0)).with_grid(64)).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 66);
        assert!(text.starts_with("t,g,dg\n0e0,-1e0,1e0"));
    }
}
