//! Versioned JSON documents, hexadecimal floats and atomic file writes.
//!
//! Every document is a JSON object with a `"schema"` field naming its kind
//! and version next to the fields of the payload. With hex output, every
//! non-integral number is written as a C99 hexadecimal literal string such
//! as `"0x1.921fb54442d18p+1"`, which round-trips bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};

pub const CONFIGURATION: &str = "cabling.configuration/1";
pub const SPECTRUM: &str = "cabling.spectrum/1";
pub const LOOP: &str = "cabling.loop/1";
pub const ORBIT: &str = "cabling.orbit/1";
pub const BRAID: &str = "cabling.braid/1";
pub const INVERTIBILITY: &str = "cabling.invertibility/1";

/// Number formatting of written documents.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FloatFormat {
    /// Shortest decimal that round-trips.
    #[default]
    Decimal,
    Hex,
}

/// C99 hexadecimal representation of `x`.
///
/// ```
/// use cabling::io::{format_hex, parse_hex};
/// assert_eq!(format_hex(1.0), "0x1p+0");
/// assert_eq!(format_hex(-0.75), "-0x1.8p-1");
/// let x = std::f64::consts::PI;
/// assert_eq!(parse_hex(&format_hex(x)).unwrap().to_bits(), x.to_bits());
/// ```
pub fn format_hex(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let mut mant = bits & ((1u64 << 52) - 1);
    if exp_bits == 0 && mant == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if exp_bits == 0 { (0, -1022) } else { (1, exp_bits - 1023) };
    let mut digits = 13;
    while digits > 0 && mant & 0xf == 0 {
        mant >>= 4;
        digits -= 1;
    }
    let frac = if digits == 0 { String::new() } else { format!(".{mant:0digits$x}") };
    let esign = if exp < 0 { '-' } else { '+' };
    format!("{sign}0x{lead}{frac}p{esign}{}", exp.abs())
}

/// Inverse of [`format_hex`].
pub fn parse_hex(s: &str) -> Result<f64> {
    let bad = || Error::Parse(format!("malformed hexadecimal float {s:?}"));
    match s {
        "nan" => return Ok(f64::NAN),
        "inf" => return Ok(f64::INFINITY),
        "-inf" => return Ok(f64::NEG_INFINITY),
        _ => {}
    }
    let (neg, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let rest = rest.strip_prefix("0x").ok_or_else(bad)?;
    let (mantissa, exp) = rest.split_once('p').ok_or_else(bad)?;
    let exp: i32 = exp.parse().map_err(|_| bad())?;
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int.len() != 1 || frac.len() > 13 {
        return Err(bad());
    }
    let lead = u64::from_str_radix(int, 16).map_err(|_| bad())?;
    let frac_bits = if frac.is_empty() {
        0
    } else {
        u64::from_str_radix(frac, 16).map_err(|_| bad())? << (4 * (13 - frac.len()))
    };
    let mag = match (lead, exp) {
        (0, _) if frac_bits == 0 => 0.0,
        (0, -1022) => f64::from_bits(frac_bits),
        (1, e) if (-1022..=1023).contains(&e) => f64::from_bits((((e + 1023) as u64) << 52) | frac_bits),
        _ => return Err(bad()),
    };
    Ok(if neg { -mag } else { mag })
}

fn is_hex_literal(s: &str) -> bool {
    let body = s.strip_prefix('-').unwrap_or(s);
    (body.starts_with("0x") && body.contains('p')) || matches!(s, "nan" | "inf" | "-inf")
}

fn to_hex(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => Value::String(format_hex(n.as_f64().unwrap_or(f64::NAN))),
        Value::Array(a) => Value::Array(a.into_iter().map(to_hex).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, to_hex(v))).collect()),
        other => other,
    }
}

fn from_hex(v: Value) -> Result<Value> {
    Ok(match v {
        Value::String(s) if is_hex_literal(&s) => {
            let x = parse_hex(&s)?;
            Value::Number(
                Number::from_f64(x).ok_or_else(|| Error::Parse(format!("{s} has no JSON representation")))?,
            )
        }
        Value::Array(a) => Value::Array(a.into_iter().map(from_hex).collect::<Result<_>>()?),
        Value::Object(o) => {
            Value::Object(o.into_iter().map(|(k, v)| Ok((k, from_hex(v)?))).collect::<Result<Map<_, _>>>()?)
        }
        other => other,
    })
}

/// Serialize `value` as a pretty-printed document of kind `schema`.
pub fn to_document<T: Serialize>(value: &T, schema: &str, format: FloatFormat) -> Result<String> {
    let body = serde_json::to_value(value)?;
    let mut obj = Map::new();
    obj.insert("schema".into(), Value::String(schema.into()));
    match body {
        Value::Object(fields) => obj.extend(fields),
        other => {
            obj.insert("data".into(), other);
        }
    }
    let mut doc = Value::Object(obj);
    if format == FloatFormat::Hex {
        doc = to_hex(doc);
    }
    let mut out = serde_json::to_string_pretty(&doc)?;
    out.push('\n');
    Ok(out)
}

/// Parse a document, checking its schema. Hex literals are accepted in
/// place of any number.
pub fn from_document<T: DeserializeOwned>(text: &str, schema: &str) -> Result<T> {
    let value: Value = serde_json::from_str(text)?;
    let Value::Object(mut obj) = value else {
        return Err(Error::Parse("document is not a JSON object".into()));
    };
    match obj.remove("schema") {
        Some(Value::String(s)) if s == schema => {}
        Some(other) => return Err(Error::Parse(format!("expected schema {schema}, found {other}"))),
        None => return Err(Error::Parse(format!("missing schema field (expected {schema})"))),
    }
    let body = match obj.remove("data") {
        Some(data) if obj.is_empty() => data,
        Some(data) => {
            obj.insert("data".into(), data);
            Value::Object(obj)
        }
        None => Value::Object(obj),
    };
    Ok(serde_json::from_value(from_hex(body)?)?)
}

/// Write `contents` to a temporary file beside `path` and rename it into
/// place, so readers never see a partial file.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Parameter(format!("{} is not a file path", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| -> Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Read and parse a document from disk.
pub fn read_document<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<T> {
    from_document(&fs::read_to_string(path)?, schema)
}

/// Serialize and atomically write a document.
pub fn write_document<T: Serialize>(path: &Path, value: &T, schema: &str, format: FloatFormat) -> Result<()> {
    atomic_write(path, to_document(value, schema, format)?.as_bytes())
}
