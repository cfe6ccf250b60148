//! CSV and JSON output.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{Result, SenseError};
use crate::harness::config::Emit;
use crate::harness::run::{ExperimentResult, Records};

pub const CDF_HEADER: &str = "x,empirical_cdf,fixedk_cdf,largek_cdf";
pub const THRESHOLD_HEADER: &str = "target_pfa,eps_fixedk,eps_largek,eps_simulated";
pub const DETECTION_HEADER: &str = "target_pfa,eps_sim,pd_empirical,pd_ci_low,pd_ci_high,pd_fixedk,pd_largek";
pub const SWEEP_HEADER: &str = "snr_db,target_pfa,eps_sim,pd_empirical,pd_ci_low,pd_ci_high,pd_fixedk,pd_largek";

/// `x` with 12 significant digits, trailing zeros removed.
pub fn g12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..12).contains(&exp) {
        trim_zeros(format!("{:.*}", (11 - exp).max(0) as usize, x))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

/// `x` rounded to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if x.is_finite() {
        g12(x).parse().expect("g12 output parses")
    } else {
        x
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(num) if num.is_f64() => {
            let x = round12(num.as_f64().expect("f64"));
            if let Some(n) = serde_json::Number::from_f64(x) {
                *num = n;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

fn to_json(value: &impl serde::Serialize, wall_time: Option<f64>) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(|e| SenseError::arg(format!("serialization failed: {e}")))?;
    if let (Some(t), Some(meta)) = (wall_time, v.get_mut("metadata").and_then(Value::as_object_mut)) {
        meta.insert("wall_time_s".into(), Value::from(t));
    }
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| SenseError::arg(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// CSV body with its header row.
pub fn to_csv(records: &Records) -> String {
    let mut out = String::new();
    let mut line = |fields: &[f64]| {
        let cells: Vec<String> = fields.iter().map(|v| g12(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    };
    let header = match records {
        Records::Cdf(_) => CDF_HEADER,
        Records::Threshold(_) => THRESHOLD_HEADER,
        Records::Detection(_) => DETECTION_HEADER,
        Records::Sweep(_) => SWEEP_HEADER,
    };
    match records {
        Records::Cdf(rows) => rows.iter().for_each(|r| line(&[r.x, r.empirical_cdf, r.fixedk_cdf, r.largek_cdf])),
        Records::Threshold(rows) => {
            rows.iter().for_each(|r| line(&[r.target_pfa, r.eps_fixedk, r.eps_largek, r.eps_simulated]))
        }
        Records::Detection(rows) => rows.iter().for_each(|r| {
            line(&[r.target_pfa, r.eps_sim, r.pd_empirical, r.pd_ci_low, r.pd_ci_high, r.pd_fixedk, r.pd_largek])
        }),
        Records::Sweep(rows) => rows.iter().for_each(|r| {
            line(&[r.snr_db, r.target_pfa, r.eps_sim, r.pd_empirical, r.pd_ci_low, r.pd_ci_high, r.pd_fixedk, r.pd_largek])
        }),
    }
    format!("{header}\n{out}")
}

/// Spec echo and metadata without the rows, as written next to CSV output.
pub fn metadata_json(result: &ExperimentResult, with_wall_time: bool) -> Result<String> {
    #[derive(serde::Serialize)]
    struct Sidecar<'a> {
        spec: &'a crate::harness::ExperimentSpec,
        metadata: &'a crate::harness::Metadata,
        records: usize,
    }
    let side = Sidecar { spec: &result.spec, metadata: &result.metadata, records: result.records.len() };
    to_json(&side, with_wall_time.then_some(result.metadata.wall_time_s))
}

/// Full result as one JSON document.
pub fn result_json(result: &ExperimentResult, with_wall_time: bool) -> Result<String> {
    to_json(result, with_wall_time.then_some(result.metadata.wall_time_s))
}

/// `<path>.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let io = |source| SenseError::Io { path: path.to_path_buf(), source };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)
}

/// Writes `result` to `path` (standard output when `None`). CSV output to a
/// file also gets a metadata sidecar.
pub fn emit(result: &ExperimentResult, format: Emit, path: Option<&Path>) -> Result<()> {
    let body = match format {
        Emit::Csv => to_csv(&result.records),
        Emit::Json => result_json(result, false)?,
    };
    match path {
        Some(p) => {
            write_file(p, &body)?;
            if format == Emit::Csv {
                write_file(&sidecar_path(p), &metadata_json(result, false)?)?;
            }
            Ok(())
        }
        None => std::io::stdout()
            .lock()
            .write_all(body.as_bytes())
            .map_err(|source| SenseError::Io { path: PathBuf::from("<stdout>"), source }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g12_examples() {
        assert_eq!(g12(1.0429190436), "1.0429190436");
        assert_eq!(g12(0.1), "0.1");
        assert_eq!(g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(g12(2.0), "2");
        assert_eq!(g12(-1234.5), "-1234.5");
        assert_eq!(g12(1.5e-9), "1.5e-9");
        assert_eq!(g12(6.02214076e23), "6.02214076e23");
        assert_eq!(g12(0.0), "0");
        assert_eq!(g12(f64::NAN), "nan");
        assert_eq!(round12(0.1 + 0.2), 0.3);
    }

    #[test]
    fn sidecar_appends_suffix() {
        assert_eq!(sidecar_path(Path::new("out/a.csv")), PathBuf::from("out/a.csv.meta.json"));
    }

    #[test]
    fn csv_headers() {
        assert!(to_csv(&Records::Cdf(vec![])).starts_with(CDF_HEADER));
        assert!(to_csv(&Records::Threshold(vec![])).starts_with(THRESHOLD_HEADER));
        assert!(to_csv(&Records::Detection(vec![])).starts_with(DETECTION_HEADER));
    }
}
