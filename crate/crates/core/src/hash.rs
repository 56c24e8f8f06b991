use serde::Serialize;
use sha2::{Digest, Sha256};

/// SHA-256 (hex) over the JSON serialization of `value`.
pub fn content_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable value");
    bytes_hash(&bytes)
}

pub fn bytes_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
