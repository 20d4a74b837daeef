//! Stable text rendering for machine-readable output.
//!
//! Reals are written in fixed notation with 12 significant digits so that
//! traces are bitwise reproducible and diff cleanly.

use serde::Serializer;
use serde_json::value::RawValue;

pub const SIGNIFICANT_DIGITS: i32 = 12;

/// Fixed-notation rendering with 12 significant digits.
pub fn sig12(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return format!("{:.*}", (SIGNIFICANT_DIGITS - 1) as usize, 0.0);
    }
    // Exponent after rounding, so 0.99999999999995 counts as magnitude 0.
    let sci = format!("{:.*e}", (SIGNIFICANT_DIGITS - 1) as usize, x);
    let magnitude: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    let decimals = (SIGNIFICANT_DIGITS - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Writes a JSON number with 12 significant digits; non-finite values
/// become `null`.
pub fn serialize_sig12<S: Serializer>(x: &f64, serializer: S) -> Result<S::Ok, S::Error> {
    if !x.is_finite() {
        return serializer.serialize_none();
    }
    let raw = RawValue::from_string(sig12(*x)).map_err(serde::ser::Error::custom)?;
    serde::Serialize::serialize(&raw, serializer)
}

pub fn serialize_sig12_opt<S: Serializer>(
    x: &Option<f64>,
    serializer: S,
) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => serialize_sig12(v, serializer),
        None => serializer.serialize_none(),
    }
}

/// `[true, false]` as `"10"`.
pub fn bitstring(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn serialize_bits<S: Serializer>(bits: &[bool], serializer: S) -> Result<S::Ok, S::Error> {
    serializer.serialize_str(&bitstring(bits))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(1.0), "1.00000000000");
        assert_eq!(sig12(0.25), "0.250000000000");
        assert_eq!(sig12(11.344866730144373), "11.3448667301");
        assert_eq!(sig12(0.0), "0.00000000000");
        assert_eq!(sig12(-2.5e-3), "-0.00250000000000");
        assert_eq!(sig12(123456789012345.0), "123456789012345");
        assert_eq!(sig12(0.99999999999995), "1.00000000000");
        assert_eq!(sig12(-0.099999999999999), "-0.100000000000");
    }

    #[test]
    fn bits() {
        assert_eq!(bitstring(&[true, false, true]), "101");
        assert_eq!(bitstring(&[]), "");
    }

    #[test]
    fn json_number() {
        #[derive(serde::Serialize)]
        struct Row {
            #[serde(serialize_with = "serialize_sig12")]
            x: f64,
            #[serde(serialize_with = "serialize_sig12")]
            y: f64,
        }
        let s = serde_json::to_string(&Row { x: 0.5, y: f64::NAN }).unwrap();
        assert_eq!(s, r#"{"x":0.500000000000,"y":null}"#);
    }
}
