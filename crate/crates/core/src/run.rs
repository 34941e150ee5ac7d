//! Pipeline orchestration: configuration merging, the six commands, and the
//! report and CSV tables they produce.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::domain::{Catalog, DomainSpec};
use crate::error::{Error, Result};
use crate::flatten::{flatten, FlattenOptions, OrderFit};
use crate::mapping::{
    associated_lift, associated_map_transform, ball_rays, critical_blowup_double,
    gradient_blowup_probe, holder_report, jacobian_det_expr, jacobian_det_field, map_field,
    projective_distance, pullback_determinant_check, tangential_pairing, totally_real_defect,
    HolomorphicMap, TargetField,
};
use crate::radial::{
    ball_samples, regularity_probe, solve_radial, verify_solution, Profile, RadialProblem,
};
use crate::report::{Certificate, Report};
use crate::scalar::Precision;
use crate::wirtinger::{to_complex_point, to_real_coordinates};

pub const DEFAULT_SEED: u64 = 42;
/// Upper bound of the admissible target order.
pub const MAX_Q: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Flatten,
    Order,
    SolveRadial,
    CheckPsc,
    CheckTr,
    MapCheck,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Flatten => "flatten",
            Command::Order => "order",
            Command::SolveRadial => "solve-radial",
            Command::CheckPsc => "check-psc",
            Command::CheckTr => "check-tr",
            Command::MapCheck => "map-check",
        })
    }
}

/// Run configuration. Every field is optional so that a file and the
/// command line can be merged, flags winning.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub command: Option<Command>,
    pub domain: Option<String>,
    pub map: Option<String>,
    pub profile: Option<String>,
    pub n: Option<usize>,
    pub q: Option<usize>,
    pub jet_order: Option<usize>,
    pub collar: Option<f64>,
    pub ladder_t0: Option<f64>,
    pub ladder_rungs: Option<usize>,
    pub samples: Option<usize>,
    pub precision: Option<Precision>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        RunConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

impl RunConfig {
    /// Reads a TOML configuration file; unknown keys are rejected.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            key: "<file>".into(),
            msg: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    /// `self` overridden by every field set in `flags`.
    pub fn merged(self, flags: RunConfig) -> RunConfig {
        let base = self;
        overlay!(base, flags; command, domain, map, profile, n, q, jet_order, collar, ladder_t0, ladder_rungs, samples, precision, seed, out)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    fn n(&self) -> usize {
        self.n.unwrap_or(2)
    }

    /// Range checks, reported with the offending key.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| {
            Err(Error::Config {
                key: key.into(),
                msg,
            })
        };
        let Some(command) = self.command else {
            return bad("command", "no command given".into());
        };
        if let Some(n) = self.n {
            if !(1..=6).contains(&n) {
                return bad("n", format!("must lie in 1..=6 (got {n})"));
            }
        }
        if let Some(q) = self.q {
            if !(1..=MAX_Q).contains(&q) {
                return bad("q", format!("must lie in 1..={MAX_Q} (got {q})"));
            }
        }
        if let Some(j) = self.jet_order {
            if !(2..=8).contains(&j) {
                return bad("jet-order", format!("must lie in 2..=8 (got {j})"));
            }
        }
        if let Some(c) = self.collar {
            if !(c > 0.0 && c <= 1.0) {
                return bad("collar", format!("must lie in (0, 1] (got {c})"));
            }
        }
        if let Some(t) = self.ladder_t0 {
            if !(t > 0.0 && t <= 0.5) {
                return bad("ladder-t0", format!("must lie in (0, 0.5] (got {t})"));
            }
        }
        if let Some(r) = self.ladder_rungs {
            if !(2..=40).contains(&r) {
                return bad("ladder-rungs", format!("must lie in 2..=40 (got {r})"));
            }
        }
        if let Some(s) = self.samples {
            if !(1..=100_000).contains(&s) {
                return bad("samples", format!("must lie in 1..=100000 (got {s})"));
            }
        }
        let needs = |key: &str, v: &Option<String>| match v {
            None => bad(key, format!("`{command}` needs --{key}")),
            Some(_) => Ok(()),
        };
        match command {
            Command::MapCheck => needs("map", &self.map),
            Command::SolveRadial => Ok(()),
            _ => needs("domain", &self.domain),
        }
    }

    /// The configuration with defaults filled in, as echoed in reports.
    pub fn effective(&self) -> RunConfig {
        let mut c = self.clone();
        c.seed = Some(self.seed());
        c.n.get_or_insert(2);
        if matches!(c.command, Some(Command::Flatten | Command::Order)) {
            let d = FlattenOptions::default();
            c.q.get_or_insert(d.q);
            c.jet_order.get_or_insert(d.jet_order);
            c.ladder_t0.get_or_insert(d.ladder.t0);
            c.ladder_rungs.get_or_insert(d.ladder.rungs);
            c.samples.get_or_insert(d.samples);
        }
        if c.command == Some(Command::SolveRadial) {
            c.profile.get_or_insert_with(|| "const:1".into());
            c.samples.get_or_insert(200);
        }
        c
    }
}

/// A CSV table produced by a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub body: String,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: Report,
    pub tables: Vec<Table>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.report.exit_code()
    }

    /// Writes `report.json` and the tables into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.report.to_json()?)?;
        for t in &self.tables {
            fs::write(dir.join(&t.name), &t.body)?;
        }
        Ok(())
    }
}

struct Output {
    certificates: Vec<Certificate>,
    results: Value,
    tables: Vec<Table>,
    failures: Vec<String>,
}

/// Executes the configured command. Pipeline errors are recorded in the
/// report rather than returned.
pub fn run(config: &RunConfig) -> RunOutcome {
    let eff = config.effective();
    let echo = serde_json::to_value(&eff).unwrap_or(Value::Null);
    let command = eff
        .command
        .map_or_else(|| "none".to_string(), |c| c.to_string());
    let mut report = Report::new(&command, echo, eff.seed());
    let result = eff
        .validate()
        .and_then(|_| match eff.command.expect("validated") {
            Command::Flatten => run_flatten(&eff, false),
            Command::Order => run_flatten(&eff, true),
            Command::SolveRadial => run_radial(&eff),
            Command::CheckPsc => run_psc(&eff),
            Command::CheckTr => run_tr(&eff),
            Command::MapCheck => run_map(&eff),
        });
    let tables = match result {
        Ok(out) => {
            report.passed = out.failures.is_empty() && out.certificates.iter().all(|c| c.passed);
            report.certificates = out.certificates;
            report.results = if out.failures.is_empty() {
                out.results
            } else {
                json!({ "failures": out.failures, "results": out.results })
            };
            out.tables
        }
        Err(e) => {
            report.error = Some(e.to_string());
            Vec::new()
        }
    };
    RunOutcome { report, tables }
}

fn domain_of(cfg: &RunConfig) -> Result<DomainSpec> {
    let text = cfg.domain.as_deref().ok_or_else(|| Error::Config {
        key: "domain".into(),
        msg: "missing".into(),
    })?;
    let d = DomainSpec::parse(text, cfg.n())?;
    match cfg.collar {
        Some(c) => d.with_collar(c),
        None => Ok(d),
    }
}

fn csv_row(fields: &[String]) -> String {
    let mut s = fields.join(",");
    s.push('\n');
    s
}

fn run_flatten(cfg: &RunConfig, order_only: bool) -> Result<Output> {
    let domain = domain_of(cfg)?;
    let mut opts = FlattenOptions {
        seed: cfg.seed(),
        precision: cfg.precision,
        ..Default::default()
    };
    if let Some(q) = cfg.q {
        opts.q = q;
    }
    if let Some(j) = cfg.jet_order {
        opts.jet_order = j;
    }
    if let Some(t) = cfg.ladder_t0 {
        opts.ladder.t0 = t;
    }
    if let Some(r) = cfg.ladder_rungs {
        opts.ladder.rungs = r;
    }
    if let Some(s) = cfg.samples {
        opts.samples = s;
    }
    let flat = flatten(&domain, &opts)?;
    let rep = &flat.report;
    let mut certificates = rep.certificates.clone();
    let a2 = &rep.a2_comparison;
    certificates.push(Certificate::at_most(
        "a2_boundary_vanishing",
        "boundary-extrapolated det H(r^(2)) with the implemented a_2 vanishes",
        a2.implemented_boundary_det.abs(),
        1e-6,
    ));

    // Coefficient summary over samples: (k, min, max, mean).
    let samples = flat.series.samples();
    let max_k = samples.iter().map(|s| s.a.len()).min().unwrap_or(0);
    let summary: Vec<Value> = (0..max_k)
        .map(|i| {
            let vals: Vec<f64> = samples.iter().map(|s| s.a[i]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            json!({ "k": i + 2, "min": min, "max": max, "mean": mean })
        })
        .collect();

    let mut tables = Vec::new();
    let mut body = String::from("sample,k,a,b\n");
    for s in samples {
        for (i, a) in s.a.iter().enumerate() {
            // a_{i+2} is paired with b_{i+1}, its source.
            let b = if i == 0 {
                String::new()
            } else {
                s.b.get(i - 1)
                    .map(|b| format!("{:e}", b.value))
                    .unwrap_or_default()
            };
            body += &csv_row(&[s.id.to_string(), (i + 2).to_string(), format!("{a:e}"), b]);
        }
    }
    tables.push(Table {
        name: "coefficients.csv".into(),
        body,
    });

    if order_only {
        let mut body = String::from("sample,level,t,delta,det\n");
        for level in 1..=flat.series.level() {
            for i in 0..samples.len() {
                let fit: OrderFit = flat.series.vanishing_order(i, level, &opts.ray)?;
                for r in &fit.rungs {
                    body += &csv_row(&[
                        i.to_string(),
                        level.to_string(),
                        format!("{:e}", r.t),
                        format!("{:e}", r.delta),
                        format!("{:e}", r.det),
                    ]);
                }
            }
        }
        tables.push(Table {
            name: "ladders.csv".into(),
            body,
        });
    }

    let results = json!({
        "flatten": serde_json::to_value(rep)?,
        "coefficient_summary": summary,
        "boundary_samples": samples.iter().map(|s| json!({"id": s.id, "point": s.point, "a": s.a})).collect::<Vec<_>>(),
    });
    let certificates = if order_only {
        certificates
            .into_iter()
            .filter(|c| {
                c.name.starts_with("vanishing_order") || c.name.starts_with("order_advance")
            })
            .collect()
    } else {
        certificates
    };
    Ok(Output {
        certificates,
        results,
        tables,
        failures: rep.failures.clone(),
    })
}

fn run_radial(cfg: &RunConfig) -> Result<Output> {
    let n = cfg.n();
    let profile = Profile::parse(cfg.profile.as_deref().unwrap_or("const:1"))?;
    let problem = RadialProblem::new(n, profile.clone());
    let sol = solve_radial(&problem)?;
    let points = ball_samples(n, cfg.samples.unwrap_or(200), cfg.seed());
    let ver = verify_solution(&sol, &profile, &points)?;
    let probe = regularity_probe(&sol)?;
    let mut certificates = vec![
        Certificate::at_most(
            "monge_ampere_residual",
            "max |det H(v) - f| over quasi-random ball points, Hessian from jets",
            ver.max_residual,
            1e-6,
        ),
        Certificate::at_least(
            "plurisubharmonic_slope",
            "g' >= 0 on the grid",
            sol.metadata.min_slope,
            -crate::radial::PSH_TOLERANCE,
        ),
        Certificate::at_least(
            "plurisubharmonic_radial",
            "g' + t g'' >= 0 on the grid",
            sol.metadata.min_radial_term,
            -crate::radial::PSH_TOLERANCE,
        ),
        Certificate::at_most(
            "regularity_ratio",
            "second difference quotients near the sphere change by at most a factor 2 between steps",
            probe.ratios.iter().map(|r| if *r >= 1.0 { *r } else { 1.0 / r.max(f64::MIN_POSITIVE) }).fold(1.0, f64::max),
            2.0,
        ),
    ];
    let mut exact_error = None;
    if let Profile::Const(c) = profile {
        // g(t) = c^(1/n) (t - 1)
        let s = c.max(0.0).powf(1.0 / n as f64);
        let err = points
            .iter()
            .map(|x| {
                let t: f64 = x.iter().map(|v| v * v).sum();
                sol.v(x).map(|v| (v - s * (t - 1.0)).abs())
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        certificates.push(Certificate::at_most(
            "exact_solution",
            "max |v - c^(1/n)(|z|^2 - 1)|",
            err,
            1e-8,
        ));
        exact_error = Some(err);
    }
    let mut body = Vec::new();
    sol.write_csv(&mut body)?;
    let results = json!({
        "metadata": serde_json::to_value(&sol.metadata)?,
        "verification": serde_json::to_value(&ver)?,
        "regularity": serde_json::to_value(&probe)?,
        "exact_error": exact_error,
    });
    Ok(Output {
        certificates,
        results,
        tables: vec![Table {
            name: "radial.csv".into(),
            body: String::from_utf8(body).expect("CSV is ASCII"),
        }],
        failures: Vec::new(),
    })
}

/// Boundary sample points; the Levi-flat model is unbounded, so its points
/// are drawn from the unit cube of the hyperplane `Im z_n = 0`.
fn hypersurface_samples(domain: &DomainSpec, cfg: &RunConfig) -> Result<Vec<Vec<f64>>> {
    let count = cfg.samples.unwrap_or(64);
    match domain.catalog() {
        Catalog::LeviFlat => Ok((0..count as u64)
            .map(|i| {
                let mut p = crate::domain::halton(cfg.seed() + i + 1, 2 * domain.dimension());
                p.iter_mut().for_each(|v| *v = 2.0 * *v - 1.0);
                let last = p.len() - 1;
                p[last] = 0.0;
                p
            })
            .collect()),
        _ => domain.boundary_samples(count, cfg.seed()),
    }
}

fn run_psc(cfg: &RunConfig) -> Result<Output> {
    let domain = domain_of(cfg)?;
    let points = hypersurface_samples(&domain, cfg)?;
    let rep = domain.pseudoconvexity_report_at(&points, cfg.seed())?;
    let certificates = vec![Certificate::at_least(
        "strict_pseudoconvexity",
        "minimum Levi-form eigenvalue over boundary samples is positive",
        rep.min_levi,
        1e-10,
    )];
    Ok(Output {
        certificates,
        results: serde_json::to_value(&rep)?,
        tables: Vec::new(),
        failures: Vec::new(),
    })
}

fn run_tr(cfg: &RunConfig) -> Result<Output> {
    let domain = domain_of(cfg)?;
    let points = hypersurface_samples(&domain, cfg)?;
    let mut body = String::from("sample,defect\n");
    let mut min_defect = f64::INFINITY;
    let mut per_point = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let d = totally_real_defect(domain.expression(), p)?;
        body += &csv_row(&[i.to_string(), format!("{:e}", d.defect)]);
        min_defect = min_defect.min(d.defect);
        per_point.push(json!({"point": p, "defect": d.defect}));
    }
    let certificates = vec![Certificate::at_least(
        "totally_real",
        "smallest singular value of [T | JT] for the associated manifold is positive at every sample",
        min_defect,
        1e-6,
    )];
    Ok(Output {
        certificates,
        results: json!({ "min_defect": min_defect, "points": per_point }),
        tables: vec![Table {
            name: "defects.csv".into(),
            body,
        }],
        failures: Vec::new(),
    })
}

fn run_map(cfg: &RunConfig) -> Result<Output> {
    let map = HolomorphicMap::parse(cfg.map.as_deref().expect("validated"))?;
    let n = map.dimension();
    let seed = cfg.seed();
    let count = cfg.samples.unwrap_or(100);
    let points = ball_samples(n, count, seed);
    let rho = crate::expr::Expr::ellipsoid(&vec![1.0; n]);

    let mut cr: f64 = 0.0;
    let mut inv: f64 = 0.0;
    let mut pull: f64 = 0.0;
    let mut body = String::from("sample,cauchy_riemann,inverse,pullback\n");
    for (i, x) in points.iter().enumerate() {
        let c = map.cauchy_riemann_defect(x)?;
        let v = map.inverse_defect(&to_complex_point(x))?;
        let p = pullback_determinant_check(&map, TargetField::Expression(&rho), x)?.discrepancy;
        cr = cr.max(c);
        inv = inv.max(v);
        pull = pull.max(p);
        body += &csv_row(&[
            i.to_string(),
            format!("{c:e}"),
            format!("{v:e}"),
            format!("{p:e}"),
        ]);
    }
    let mut certificates = vec![
        Certificate::at_most("cauchy_riemann", "max |d phi_j / d zbar_k| at interior samples", cr, 1e-10),
        Certificate::at_most("inverse_jacobian", "max entry of phi' [phi^{lm}] - I at interior samples", inv, 1e-10),
        Certificate::at_most(
            "pullback_determinant",
            "relative gap between det H(rho o phi) and det H(rho)(phi) |det phi'|^2, rho = |w|^2 - 1",
            pull,
            1e-8,
        ),
    ];

    let lip = holder_report(map_field(&map), 1.0, n, 1000, seed)?;
    let det_half = holder_report(jacobian_det_field(&map), 0.5, n, 1000, seed)?;
    let pairing_field = |x: &[f64]| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(2 * n);
        for k in 0..n {
            let v = tangential_pairing(&map, &rho, x, k)?;
            out.push(v.re);
            out.push(v.im);
        }
        Ok(out)
    };
    let pairing = holder_report(pairing_field, 1.0, n, 1000, seed)?;
    for (name, what, r) in [
        (
            "lipschitz_map",
            "Lip_1 constant of phi on the closed ball",
            &lip,
        ),
        (
            "holder_half_jacobian_det",
            "Lip_1/2 constant of det phi' on the closed ball",
            &det_half,
        ),
        (
            "lipschitz_tangential_pairing",
            "Lip_1 constant of the tangential pairing",
            &pairing,
        ),
    ] {
        certificates.push(Certificate::at_most(
            name,
            &format!("{what} is consistent with a finite bound: changes by at most 5% when the pairs are doubled"),
            r.relative_change,
            0.05,
        ));
    }

    let rays = ball_rays(n, 16, 10, seed);
    let blowup = gradient_blowup_probe(&jacobian_det_expr(&map), &rays)?;
    certificates.push(Certificate::at_least(
        "gradient_blowup",
        "slope of log |grad det phi'| against log delta along inward rays is at least -1/2 - 0.1",
        blowup.min_slope,
        -0.6,
    ));
    let double = if n == 1 {
        let p = gradient_blowup_probe(
            &critical_blowup_double(),
            &[crate::mapping::Ray::new(vec![1.0, 0.0], 10)],
        )?;
        Some(p)
    } else {
        None
    };

    let mut lift = None;
    if map.preserves_ball() && n >= 2 {
        let mut lift_gap: f64 = 0.0;
        let mut functor_gap: f64 = 0.0;
        let twice = map.then(&map)?;
        for i in 0..50u64 {
            let p = crate::domain::sphere_point(n, seed + i + 1);
            let l = associated_lift(&rho, &p)?;
            let t = associated_map_transform(&map, &l)?;
            let image = to_real_coordinates(&t.base_point());
            let direct = associated_lift(&rho, &image)?;
            lift_gap = lift_gap.max(projective_distance(&t.fiber, &direct.fiber));
            let tt = associated_map_transform(&map, &t)?;
            let composed = associated_map_transform(&twice, &l)?;
            functor_gap = functor_gap.max(projective_distance(&tt.fiber, &composed.fiber));
        }
        certificates.push(Certificate::at_most(
            "associated_lift_equivariance",
            "transform of the sphere's lift equals the lift of the image (chordal distance)",
            lift_gap,
            1e-8,
        ));
        certificates.push(Certificate::at_most(
            "associated_functoriality",
            "transform(f o f) equals transform(f) o transform(f) (chordal distance)",
            functor_gap,
            1e-8,
        ));
        lift = Some(json!({"lift_gap": lift_gap, "functoriality_gap": functor_gap}));
    }

    let at = |x: &[f64]| {
        map.eval(&to_complex_point(x))
            .map(|w| to_real_coordinates(&w))
    };
    let results = json!({
        "map": map.to_string(),
        "catalog": serde_json::to_value(map.catalog())?,
        "n": n,
        "samples": count,
        "max_cauchy_riemann": cr,
        "max_inverse_defect": inv,
        "max_pullback_discrepancy": pull,
        "lipschitz": serde_json::to_value(&lip)?,
        "holder_half_jacobian_det": serde_json::to_value(&det_half)?,
        "tangential_pairing": serde_json::to_value(&pairing)?,
        "gradient_blowup": serde_json::to_value(&blowup)?,
        "critical_double": double.map(|d| serde_json::to_value(d)).transpose()?,
        "associated": lift,
        "image_of_origin": at(&vec![0.0; 2 * n])?,
        "note": "Empirical Hölder constants are consistent with the stated Lip_alpha classes; they are not membership proofs.",
    });
    Ok(Output {
        certificates,
        results,
        tables: vec![Table {
            name: "map_checks.csv".into(),
            body,
        }],
        failures: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(command: Command) -> RunConfig {
        RunConfig {
            command: Some(command),
            ..Default::default()
        }
    }

    #[test]
    fn flags_override_file() {
        let file =
            RunConfig::from_toml("command = \"flatten\"\ndomain = \"ball\"\nq = 2\nseed = 7\n")
                .unwrap();
        let flags = RunConfig {
            q: Some(3),
            ..Default::default()
        };
        let m = file.merged(flags);
        assert_eq!(m.q, Some(3));
        assert_eq!(m.seed(), 7);
        assert_eq!(m.domain.as_deref(), Some("ball"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::from_toml("command = \"flatten\"\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
    }

    #[test]
    fn validation_names_the_key() {
        let c = RunConfig {
            q: Some(9),
            domain: Some("ball".into()),
            ..cfg(Command::Flatten)
        };
        match c.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "q"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            cfg(Command::MapCheck).validate(),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn default_seed_is_logged() {
        let out = run(&RunConfig {
            profile: Some("const:1".into()),
            ..cfg(Command::SolveRadial)
        });
        assert_eq!(out.report.seed, 42);
        assert_eq!(out.exit_code(), 0, "{:?}", out.report);
    }

    #[test]
    fn syntax_errors_exit_one() {
        let out = run(&RunConfig {
            domain: Some("abs2(z1) + * 1".into()),
            ..cfg(Command::Flatten)
        });
        assert_eq!(out.exit_code(), 1);
        assert!(
            out.report.error.as_deref().unwrap().contains("position"),
            "{:?}",
            out.report.error
        );
    }
}
