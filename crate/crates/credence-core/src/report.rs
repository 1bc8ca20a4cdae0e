//! Numeric formatting for report files.
//!
//! All floating-point values in emitted CSV/JSON carry 17 significant digits,
//! enough to reconstruct the exact `f64` bit pattern on re-read.

use std::io;

/// Format with 17 significant digits (1 leading + 16 fractional), scientific.
pub fn fmt_f64(v: f64) -> String {
    format!("{:.16e}", v)
}

/// Join one CSV row; the caller is responsible for field contents being comma-free.
pub fn csv_row(fields: &[String]) -> String {
    fields.join(",")
}

/// JSON serializer writing every f64 with 17 significant digits.
pub fn to_json_precise<T: serde::Serialize>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, PreciseFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serializer emits utf-8"))
}

struct PreciseFormatter;

impl serde_json::ser::Formatter for PreciseFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{:.16e}", value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_formatting_round_trips() {
        for v in [
            0.1,
            -1.0 / 3.0,
            1e-300,
            6.02214076e23,
            std::f64::consts::PI,
        ] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{s}");
        }
    }

    #[test]
    fn precise_json_round_trips_floats() {
        let v: Vec<f64> = vec![0.1, 2.0 / 3.0, -1e-15];
        let s = to_json_precise(&v).unwrap();
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        for (a, b) in v.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
