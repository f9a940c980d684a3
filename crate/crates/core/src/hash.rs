//! Content hashes for operators, configs and run records.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of raw bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Hash of a value's canonical JSON form (serde_json emits struct fields in
/// declaration order and maps in key order, so the encoding is stable).
pub fn content_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable value");
    sha256_hex(&bytes)
}

/// First 16 hex digits of [`content_hash`]; used for file names.
pub fn short_hash<T: Serialize + ?Sized>(value: &T) -> String {
    content_hash(value)[..16].to_string()
}
