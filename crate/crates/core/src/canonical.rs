//! Byte-stable JSON serialization: object keys sorted ascending byte-wise.

use serde::Serialize;
use serde_json::Value;

/// Serializes through `serde_json::Value`, whose map type keeps keys sorted.
pub fn to_value<T: Serialize + ?Sized>(value: &T) -> Value {
    serde_json::to_value(value).expect("in-memory values always serialize")
}

pub fn to_string<T: Serialize + ?Sized>(value: &T) -> String {
    to_value(value).to_string()
}

pub fn to_string_pretty<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string_pretty(&to_value(value)).expect("in-memory values always serialize")
}

/// Plain decimal text for a JSON number: integers verbatim, floats via the
/// shortest round-trip representation without exponent (`2.0` -> `"2"`).
pub fn decimal(n: &serde_json::Number) -> String {
    if let Some(u) = n.as_u64() {
        u.to_string()
    } else if let Some(i) = n.as_i64() {
        i.to_string()
    } else {
        format!("{}", n.as_f64().unwrap_or(f64::NAN))
    }
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes.as_ref()))
}
