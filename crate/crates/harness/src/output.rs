use std::fs;
use std::path::Path;

use bregmantron::train::IterationRecord;
use serde::Serialize;

use crate::error::{HarnessError, Result};

pub const TRACE_HEADER: [&str; 11] = [
    "t", "loss", "gap_norm", "eta", "regime", "stable", "L", "Q", "F", "auc_train", "auc_test",
];

/// `x` to 12 significant digits, without trailing zeros; scientific outside
/// `[1e-5, 1e12)`.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    if !(-5..12).contains(&exponent) {
        let s = format!("{x:.11e}");
        let (mantissa, exp) = s.split_once('e').expect("scientific format");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{mantissa}e{exp}");
    }
    let decimals = (11 - exponent).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(sig12).unwrap_or_default()
}

fn opt_flag(x: Option<bool>) -> String {
    x.map(|b| b.to_string()).unwrap_or_default()
}

pub fn trace_row(r: &IterationRecord) -> [String; 11] {
    [
        r.t.to_string(),
        sig12(r.loss),
        sig12(r.gap_norm),
        sig12(r.eta),
        opt_flag(r.regime),
        opt_flag(r.stable),
        opt_num(r.l),
        opt_num(r.q),
        opt_num(r.f),
        sig12(r.auc_train),
        opt_num(r.auc_test),
    ]
}

pub fn write_trace(path: &Path, records: &[IterationRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(TRACE_HEADER)?;
    for record in records {
        writer.write_record(trace_row(record))?;
    }
    writer.flush().map_err(|source| HarnessError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|source| HarnessError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| HarnessError::Write {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(1.0), "1");
        assert_eq!(sig12(-2.5), "-2.5");
        assert_eq!(sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig12(123456.789), "123456.789");
        assert_eq!(sig12(2.0 / 3.0 * 1e-7), "6.66666666667e-8");
        assert_eq!(sig12(1.5e13), "1.5e13");
    }
}
