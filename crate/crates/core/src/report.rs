//! Machine-readable reports: schema version, certificates and the JSON
//! envelope shared by every pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "1.0.0";

/// Scope limitation embedded in every report.
pub const SCOPE_STATEMENT: &str = "Not desk-reproducible and explicitly substituted: the general \
existence and regularity theorem of Caffarelli, Kohn, Nirenberg and Spruck for the Dirichlet \
problem of the complex Monge-Ampere equation on arbitrary strictly pseudoconvex domains, and \
Fefferman's smooth extension theorem for biholomorphic maps, are not reproduced. They are covered \
only through the invariant suites of this tool: ball flattening coefficients, the vanishing-order \
law, the a2 discriminating test, the radial Monge-Ampere solver, the matrix determinant lemma and \
Schur identity, the pullback determinant identity, the totally-real certificate and the gradient \
blow-up law.";

pub fn report_schema_version() -> &'static str {
    SCHEMA_VERSION
}

/// A pass/fail statement about one named invariant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub name: String,
    /// What is being checked, in words.
    pub invariant: String,
    /// Comparison the measured value must satisfy.
    pub criterion: String,
    #[serde(with = "nonfinite")]
    pub tolerance: f64,
    #[serde(with = "nonfinite")]
    pub value: f64,
    pub passed: bool,
}

/// JSON has no NaN or infinities; they are written as strings.
mod nonfinite {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("NaN")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "NaN" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::custom(format!("bad number `{other}`"))),
            },
        }
    }
}

impl Certificate {
    /// Passes when `value >= threshold`.
    pub fn at_least(name: &str, invariant: &str, value: f64, threshold: f64) -> Self {
        Certificate {
            name: name.into(),
            invariant: invariant.into(),
            criterion: format!(">= {threshold}"),
            tolerance: threshold,
            value,
            passed: value >= threshold && !value.is_nan(),
        }
    }

    /// Passes when `value <= threshold`.
    pub fn at_most(name: &str, invariant: &str, value: f64, threshold: f64) -> Self {
        Certificate {
            name: name.into(),
            invariant: invariant.into(),
            criterion: format!("<= {threshold}"),
            tolerance: threshold,
            value,
            passed: value <= threshold && !value.is_nan(),
        }
    }
}

/// Checks that a report written with `found` can be read by this build.
pub fn check_schema(found: &str) -> Result<()> {
    let major = |v: &str| v.split('.').next().and_then(|m| m.parse::<u64>().ok());
    let expected = major(SCHEMA_VERSION).expect("schema version has a numeric major");
    match major(found) {
        Some(m) if m == expected => Ok(()),
        _ => Err(Error::SchemaVersion {
            found: found.to_string(),
            expected_major: expected,
        }),
    }
}

/// The JSON document written by every pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: String,
    pub command: String,
    /// Seconds since the Unix epoch; excluded from determinism comparisons.
    pub timestamp: Option<u64>,
    /// Effective configuration after merging file and flags.
    pub config: serde_json::Value,
    pub seed: u64,
    pub scope: String,
    pub certificates: Vec<Certificate>,
    pub passed: bool,
    pub error: Option<String>,
    pub results: serde_json::Value,
}

impl Report {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        Report {
            schema_version: SCHEMA_VERSION.into(),
            command: command.into(),
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .ok()
                .map(|d| d.as_secs()),
            config,
            seed,
            scope: SCOPE_STATEMENT.into(),
            certificates: Vec::new(),
            passed: false,
            error: None,
            results: serde_json::Value::Null,
        }
    }

    /// Exit status: 0 when every certificate passes, 2 on a failed
    /// certificate, 1 on an execution error.
    pub fn exit_code(&self) -> i32 {
        if self.error.is_some() {
            1
        } else if self.passed {
            0
        } else {
            2
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a report, rejecting unknown schema majors before anything else.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value
            .get("schema_version")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::Invalid("report has no schema_version".into()))?;
        check_schema(version)?;
        Ok(serde_json::from_value(value)?)
    }

    /// The report without its timestamp, for determinism comparisons.
    pub fn without_timestamp(&self) -> Self {
        Report {
            timestamp: None,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_version_is_fixed() {
        assert_eq!(report_schema_version(), "1.0.0");
        assert!(check_schema("1.4.2").is_ok());
        assert!(matches!(
            check_schema("2.0.0"),
            Err(Error::SchemaVersion {
                expected_major: 1,
                ..
            })
        ));
        assert!(check_schema("x").is_err());
    }

    #[test]
    fn report_round_trip_and_version_rejection() {
        let mut r = Report::new("flatten", serde_json::json!({"n": 2}), 42);
        r.certificates
            .push(Certificate::at_most("c", "a value is small", 1e-12, 1e-8));
        r.passed = true;
        r.results = serde_json::json!({"a": [-0.5, 0.3333333333333333]});
        let text = r.to_json().unwrap();
        assert_eq!(Report::from_json(&text).unwrap(), r);
        let bumped = text.replace("\"1.0.0\"", "\"2.0.0\"");
        assert!(matches!(
            Report::from_json(&bumped),
            Err(Error::SchemaVersion { .. })
        ));
    }

    #[test]
    fn nonfinite_certificate_values_round_trip() {
        let c = Certificate::at_least("c", "x", f64::INFINITY, 0.0);
        let back: Certificate = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(!Certificate::at_most("d", "x", f64::NAN, 1.0).passed);
    }

    proptest::proptest! {
        #[test]
        fn any_value_survives_json(value in proptest::num::f64::ANY, tol in -1e6f64..1e6) {
            let mut r = Report::new("x", serde_json::json!({"v": tol}), 3);
            r.certificates.push(Certificate::at_most("c", "x", value, tol));
            r.results = serde_json::json!([tol / 3.0]);
            let back = Report::from_json(&r.to_json().unwrap()).unwrap();
            let (a, b) = (back.certificates[0].value, value);
            proptest::prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
            proptest::prop_assert_eq!(back.results, r.results);
        }
    }

    #[test]
    fn exit_codes() {
        let mut r = Report::new("x", serde_json::Value::Null, 1);
        assert_eq!(r.exit_code(), 2);
        r.passed = true;
        assert_eq!(r.exit_code(), 0);
        r.error = Some("boom".into());
        assert_eq!(r.exit_code(), 1);
    }
}
