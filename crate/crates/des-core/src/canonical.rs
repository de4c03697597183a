//! Deterministic JSON canonicalization (RFC 8785 JCS).
//!
//! Two structurally equal documents always canonicalize to identical bytes:
//! object keys are sorted by UTF-16 code units, whitespace is dropped, and
//! numbers are rendered with the ECMAScript shortest-round-trip algorithm
//! (so `1.0` and `1` both serialize as `1`). Sealed-event hashing, signing,
//! and on-disk storage all consume this byte form.
//!
//! Numbers are treated as IEEE doubles throughout, which bounds exact
//! integers to the I-JSON range (|n| <= 2^53 - 1); larger integers collapse
//! to the nearest double, exactly as an ECMAScript consumer would see them.

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CanonicalError {
    /// NaN and infinities have no canonical JSON form.
    #[error("non-representable number (NaN or infinity)")]
    NonRepresentable,
    #[error("value does not serialize to JSON: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// Canonicalize a parsed JSON document to its RFC 8785 byte form.
pub fn canonicalize(value: &Value) -> Result<Vec<u8>, CanonicalError> {
    let mut out = Vec::with_capacity(256);
    write_value(value, &mut out)?;
    Ok(out)
}

/// Canonicalize to a `String` (the byte form is always valid UTF-8).
pub fn canonical_string(value: &Value) -> Result<String, CanonicalError> {
    canonicalize(value).map(|b| String::from_utf8(b).expect("canonical bytes are UTF-8"))
}

/// Serialize any value through `serde_json` and canonicalize the result.
pub fn to_canonical_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CanonicalError> {
    let v = serde_json::to_value(value)?;
    canonicalize(&v)
}

fn write_value(value: &Value, out: &mut Vec<u8>) -> Result<(), CanonicalError> {
    match value {
        Value::Null => out.extend_from_slice(b"null"),
        Value::Bool(true) => out.extend_from_slice(b"true"),
        Value::Bool(false) => out.extend_from_slice(b"false"),
        Value::Number(n) => {
            let f = n.as_f64().ok_or(CanonicalError::NonRepresentable)?;
            write_number(f, out)?;
        }
        Value::String(s) => write_string(s, out),
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_value(item, out)?;
            }
            out.push(b']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort_by(|a, b| a.encode_utf16().cmp(b.encode_utf16()));
            out.push(b'{');
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_string(key, out);
                out.push(b':');
                write_value(&map[key.as_str()], out)?;
            }
            out.push(b'}');
        }
    }
    Ok(())
}

// serde_json's string escaping matches the RFC: short escapes for the JSON
// control set, lowercase \u00xx for remaining controls, everything else
// emitted literally.
fn write_string(s: &str, out: &mut Vec<u8>) {
    serde_json::to_writer(&mut *out, s).expect("string serialization is infallible");
}

/// Render a double with the ECMAScript `Number::toString` algorithm.
pub fn write_number(x: f64, out: &mut Vec<u8>) -> Result<(), CanonicalError> {
    if !x.is_finite() {
        return Err(CanonicalError::NonRepresentable);
    }
    if x == 0.0 {
        out.push(b'0');
        return Ok(());
    }
    let mut x = x;
    if x < 0.0 {
        out.push(b'-');
        x = -x;
    }

    // ryu gives the shortest digit string that round-trips; reshape it to
    // the ECMAScript layout (plain, fractional, or exponent form).
    let mut buf = ryu::Buffer::new();
    let shortest = buf.format_finite(x);
    let (digits, n) = parse_shortest(shortest);
    let k = digits.len() as i32;

    if k <= n && n <= 21 {
        // Integer with (n - k) trailing zeros.
        out.extend_from_slice(digits.as_bytes());
        for _ in 0..(n - k) {
            out.push(b'0');
        }
    } else if 0 < n && n <= 21 {
        out.extend_from_slice(digits[..n as usize].as_bytes());
        out.push(b'.');
        out.extend_from_slice(digits[n as usize..].as_bytes());
    } else if -6 < n && n <= 0 {
        out.extend_from_slice(b"0.");
        for _ in 0..(-n) {
            out.push(b'0');
        }
        out.extend_from_slice(digits.as_bytes());
    } else {
        out.extend_from_slice(&digits.as_bytes()[..1]);
        if k > 1 {
            out.push(b'.');
            out.extend_from_slice(digits[1..].as_bytes());
        }
        let e = n - 1;
        out.push(b'e');
        out.push(if e >= 0 { b'+' } else { b'-' });
        let mut exp = itoa_abs(e);
        out.append(&mut exp);
    }
    Ok(())
}

fn itoa_abs(e: i32) -> Vec<u8> {
    let mut v = (e.unsigned_abs()).to_string().into_bytes();
    v.shrink_to_fit();
    v
}

/// Decompose a ryu rendering into `(digits, n)` where the value equals
/// `0.digits * 10^n` with no leading or trailing zeros in `digits`.
fn parse_shortest(s: &str) -> (String, i32) {
    let (mantissa, exp10) = match s.find(['e', 'E']) {
        Some(idx) => (&s[..idx], s[idx + 1..].parse::<i32>().expect("ryu exponent")),
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(idx) => (&mantissa[..idx], &mantissa[idx + 1..]),
        None => (mantissa, ""),
    };
    let mut digits: String = String::with_capacity(int_part.len() + frac_part.len());
    digits.push_str(int_part);
    digits.push_str(frac_part);

    // value = digits_int * 10^(exp10 - frac_len)
    let mut pow = exp10 - frac_part.len() as i32;

    let trailing = digits.len() - digits.trim_end_matches('0').len();
    if trailing == digits.len() {
        // All zeros cannot happen for a nonzero input.
        return ("0".to_string(), 1);
    }
    digits.truncate(digits.len() - trailing);
    pow += trailing as i32;

    let leading = digits.len() - digits.trim_start_matches('0').len();
    digits.drain(..leading);

    let n = pow + digits.len() as i32;
    (digits, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn canon(v: &Value) -> String {
        canonical_string(v).unwrap()
    }

    fn fmt(x: f64) -> String {
        let mut out = Vec::new();
        write_number(x, &mut out).unwrap();
        String::from_utf8(out).unwrap()
    }

    #[test]
    fn key_order_independence() {
        let a: Value = serde_json::from_str(r#"{"b":1,"a":2}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{ "a" : 2, "b" : 1 }"#).unwrap();
        assert_eq!(canonicalize(&a).unwrap(), canonicalize(&b).unwrap());
        assert_eq!(canon(&a), r#"{"a":2,"b":1}"#);
    }

    #[test]
    fn number_unification() {
        let a: Value = serde_json::from_str(r#"{"x":1.0}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"x":1}"#).unwrap();
        assert_eq!(canon(&a), r#"{"x":1}"#);
        assert_eq!(canonicalize(&a).unwrap(), canonicalize(&b).unwrap());
    }

    #[test]
    fn integer_forms() {
        assert_eq!(fmt(0.0), "0");
        assert_eq!(fmt(-0.0), "0");
        assert_eq!(fmt(1.0), "1");
        assert_eq!(fmt(-5.0), "-5");
        assert_eq!(fmt(1e20), "100000000000000000000");
        assert_eq!(fmt(1e21), "1e+21");
        assert_eq!(fmt(1e-6), "0.000001");
        assert_eq!(fmt(1e-7), "1e-7");
    }

    #[test]
    fn nan_and_infinity_rejected() {
        let mut out = Vec::new();
        assert!(matches!(
            write_number(f64::NAN, &mut out),
            Err(CanonicalError::NonRepresentable)
        ));
        assert!(matches!(
            write_number(f64::INFINITY, &mut out),
            Err(CanonicalError::NonRepresentable)
        ));
    }

    #[test]
    fn utf16_key_sorting_uses_code_units() {
        // U+1F600 encodes as a surrogate pair starting 0xD83D, which sorts
        // before U+E000 in UTF-16 order even though its code point is larger.
        let v = json!({"\u{e000}": 1, "\u{1f600}": 2});
        let s = canon(&v);
        let grin_pos = s.find('\u{1f600}').unwrap();
        let private_pos = s.find('\u{e000}').unwrap();
        assert!(grin_pos < private_pos, "surrogate pair must sort first: {s}");
    }

    #[test]
    fn escapes_match_expected_form() {
        let v = json!({"s": "\u{0001}\u{001f}\t\"\\"});
        assert_eq!(canon(&v), r#"{"s":"\u0001\u001f\t\"\\"}"#);
    }
}
