//! Deterministic serialization of results: versioned JSON with sorted keys
//! and floats rounded to 12 significant digits, and CSV for mode scans.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::spectrum::SpectralReport;

pub const SCHEMA_VERSION: u32 = 1;
/// Significant digits kept in serialized floats.
pub const SIG_DIGITS: usize = 12;

/// `x` rounded to [`SIG_DIGITS`] significant digits; `None` if not finite.
pub fn round_sig(x: f64) -> Option<f64> {
    if !x.is_finite() {
        return None;
    }
    let s = format!("{:.*e}", SIG_DIGITS - 1, x);
    let y: f64 = s.parse().expect("formatted float parses");
    // no negative zero in the output
    Some(if y == 0.0 { 0.0 } else { y })
}

fn normalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(round_sig)
            .and_then(serde_json::Number::from_f64)
            .map_or(Value::Null, Value::Number),
        Value::Array(a) => Value::Array(a.into_iter().map(normalize).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, normalize(v))).collect()),
        v => v,
    }
}

/// JSON document for `payload`, tagged with the schema version and the
/// report name under `"report"`.
/// Object payloads are merged into the top level, anything else goes under
/// `"result"`. Non-finite floats become `null`.
pub fn to_json<T: Serialize>(name: &str, payload: &T) -> Result<String> {
    let value = serde_json::to_value(payload).map_err(|e| Error::Unsupported(format!("serialization failed: {e}")))?;
    let mut doc = match normalize(value) {
        Value::Object(o) => o,
        other => {
            let mut o = Map::new();
            o.insert("result".into(), other);
            o
        }
    };
    doc.insert("schema".into(), Value::from(SCHEMA_VERSION));
    doc.insert("report".into(), Value::from(name));
    let mut out = serde_json::to_string_pretty(&Value::Object(doc)).expect("value serializes");
    out.push('\n');
    Ok(out)
}

fn cell(x: Option<f64>) -> String {
    x.and_then(round_sig).map(|y| y.to_string()).unwrap_or_default()
}

/// One row per mode: `problem,N,k,value,converged,sensitivity`.
/// Failed modes have empty value and sensitivity cells.
pub fn spectral_csv(report: &SpectralReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Unsupported(format!("csv output failed: {e}"));
    w.write_record(["problem", "N", "k", "value", "converged", "sensitivity"]).map_err(io)?;
    for m in &report.modes {
        w.write_record([
            report.problem.name().to_string(),
            report.n.to_string(),
            m.k.to_string(),
            cell(m.value),
            m.converged.to_string(),
            cell(m.sensitivity),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Unsupported(format!("csv output failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

/// Plot-ready `k value` lines for the modes that have a value.
pub fn spectral_columns(report: &SpectralReport) -> String {
    report
        .modes
        .iter()
        .filter_map(|m| m.value.map(|v| format!("{} {}\n", m.k, cell(Some(v)))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{ModeEntry, Problem, ScanKind};

    #[test]
    fn rounding() {
        assert_eq!(round_sig(0.1 + 0.2), Some(0.3));
        assert_eq!(round_sig(6.250000000000001), Some(6.25));
        assert_eq!(round_sig(1.234_567_890_123_456e-7), Some(1.234_567_890_12e-7));
        assert_eq!(round_sig(-0.0), Some(0.0));
        assert_eq!(round_sig(f64::NAN), None);
        assert_eq!(round_sig(f64::NEG_INFINITY), None);
    }

    #[derive(Serialize)]
    struct Sample {
        zeta: f64,
        alpha: Vec<f64>,
        count: u32,
    }

    #[test]
    fn json_is_sorted_and_versioned() {
        let s = to_json(
            "sample",
            &Sample {
                zeta: 1.0 / 3.0,
                alpha: vec![f64::INFINITY, 2.0],
                count: 3,
            },
        )
        .unwrap();
        let v: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["report"], "sample");
        assert_eq!(v["alpha"][0], Value::Null);
        assert_eq!(v["zeta"].as_f64(), Some(0.333333333333));
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(to_json("n", &2.5).unwrap(), to_json("n", &2.5).unwrap());
        assert!(to_json("n", &2.5).unwrap().contains("\"result\": 2.5"));
    }

    #[test]
    fn csv_rows() {
        let rep = SpectralReport {
            problem: Problem::HardyRellich,
            n: 4,
            kind: ScanKind::Constant,
            v: "1".into(),
            w: "1/r^2".into(),
            modes: vec![
                ModeEntry {
                    k: 0,
                    value: Some(4.000000000000002),
                    converged: true,
                    sensitivity: Some(1e-4),
                    error: None,
                },
                ModeEntry {
                    k: 1,
                    value: None,
                    converged: false,
                    sensitivity: None,
                    error: Some("x".into()),
                },
            ],
            argmin_k: Some(0),
            radial_optimal: Some(true),
            global_value: Some(4.0),
        };
        assert_eq!(
            spectral_csv(&rep).unwrap(),
            "problem,N,k,value,converged,sensitivity\nhardy_rellich,4,0,4,true,0.0001\nhardy_rellich,4,1,,false,\n"
        );
        assert_eq!(spectral_columns(&rep), "0 4\n");
    }
}
