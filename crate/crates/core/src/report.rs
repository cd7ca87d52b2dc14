//! Output helpers: CSV tables with fixed headers and 17 significant digits,
//! and pretty JSON with sorted keys.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Serialize, Serializer};

use crate::error::Result;

/// Formats a float with 17 significant digits; non-finite values become
/// `inf`, `-inf` or `nan`.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.16e}")
    }
}

/// Serializes finite floats as numbers and non-finite ones as strings,
/// since JSON has no infinity.
pub fn serialize_extended<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&fmt_float(*v))
    }
}

pub fn serialize_extended_opt<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => serialize_extended(x, s),
        None => s.serialize_none(),
    }
}

pub fn csv_string(header: &str, rows: &[Vec<f64>]) -> String {
    let mut out = String::with_capacity(header.len() + 1 + rows.len() * 48);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", fmt_float(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    std::fs::write(path, csv_string(header, rows))?;
    Ok(())
}

/// Pretty JSON with object keys in sorted order.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(f64::INFINITY), "inf");
        let back: f64 = fmt_float(std::f64::consts::PI).parse().unwrap();
        assert_eq!(back, std::f64::consts::PI);
    }

    #[test]
    fn csv_layout() {
        let s = csv_string("x,y", &[vec![1.0, 2.0]]);
        assert_eq!(s, "x,y\n1.0000000000000000e0,2.0000000000000000e0\n");
    }

    #[test]
    fn json_keys_sorted() {
        #[derive(Serialize)]
        struct T {
            zeta: u8,
            alpha: u8,
        }
        let s = to_sorted_json(&T { zeta: 1, alpha: 2 }).unwrap();
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
    }
}
