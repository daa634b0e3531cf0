//! Fixed 17-significant-digit number formatting for CSV and JSON output.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;

/// `v` in scientific notation with 17 significant digits; `inf`, `-inf`
/// and `nan` for non-finite values.
pub fn number(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// Empty string for `None`.
pub fn optional(v: Option<f64>) -> String {
    v.map(number).unwrap_or_default()
}

/// serde_json formatter that writes floats with [`number`]. Non-finite
/// floats never reach it: serde_json maps them to `null`.
#[derive(Debug, Default, Clone, Copy)]
struct SignificantDigits;

impl Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(number(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes `value` as JSON with fixed-precision floats and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SignificantDigits);
    value.serialize(&mut ser).expect("serializing to memory cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json writes UTF-8")
}
