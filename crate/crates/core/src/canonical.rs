//! Canonical textual encoding.
//!
//! Every signable or exported object is rendered as sorted-key JSON with no
//! insignificant whitespace. Binary fields are lowercase hex strings. Two
//! semantically identical values always produce the same bytes, regardless
//! of the order in which their fields were constructed.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
#[error("canonical encoding: {0}")]
pub struct CanonicalError(#[from] serde_json::Error);

/// Renders `value` in canonical form.
///
/// The value is first lowered into a `serde_json::Value`, whose object maps are
/// ordered by key, so struct field order never leaks into the output.
pub fn to_string<T: Serialize + ?Sized>(value: &T) -> Result<String, CanonicalError> {
    let v = serde_json::to_value(value)?;
    Ok(value_to_string(&v))
}

pub fn to_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, CanonicalError> {
    to_string(value).map(String::into_bytes)
}

pub fn value_to_string(value: &Value) -> String {
    // serde_json's Map is a BTreeMap without the `preserve_order` feature,
    // and the compact writer emits no whitespace.
    serde_json::to_string(value).expect("Value serialization is infallible")
}

pub fn from_str<T: DeserializeOwned>(text: &str) -> Result<T, CanonicalError> {
    Ok(serde_json::from_str(text)?)
}

pub fn from_slice<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, CanonicalError> {
    Ok(serde_json::from_slice(bytes)?)
}

/// Serde adapter for `Vec<u8>` fields rendered as hex strings.
pub mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}
