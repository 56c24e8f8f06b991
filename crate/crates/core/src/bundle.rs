//! Everything needed to answer queries, in one file: the catalog and the
//! trained model with its embeddings.
//!
//! On disk a bundle is a one-line JSON header followed by the JSON payload.
//! The header records the payload's SHA-256, checked on load.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::PoiCatalog;
use crate::hash::{bytes_hash, content_hash};
use crate::itrnet::ItrNet;

pub const BUNDLE_FORMAT: &str = "alttrip-bundle";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("bundle version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("{0}")]
    HashMismatch(String),
    #[error("corrupt bundle: {0}")]
    CorruptFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineBundle {
    pub name: String,
    pub catalog: PoiCatalog,
    pub catalog_hash: String,
    pub model: ItrNet,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    payload_sha256: String,
}

impl EngineBundle {
    pub fn new(name: &str, catalog: PoiCatalog, model: ItrNet) -> Result<Self, BundleError> {
        let b = Self { name: name.into(), catalog_hash: content_hash(&catalog), catalog, model };
        b.check()?;
        Ok(b)
    }

    /// Catalog, embeddings and model must describe the same POIs.
    pub fn check(&self) -> Result<(), BundleError> {
        if content_hash(&self.catalog) != self.catalog_hash {
            return Err(BundleError::HashMismatch("catalog does not match its recorded hash".into()));
        }
        if self.model.n_pois() != self.catalog.len() {
            return Err(BundleError::HashMismatch(format!(
                "model covers {} POIs, catalog has {}",
                self.model.n_pois(),
                self.catalog.len()
            )));
        }
        if content_hash(&self.model.embeddings) != self.model.embeddings_hash {
            return Err(BundleError::HashMismatch(
                "model embeddings do not match the embeddings it was trained on".into(),
            ));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, BundleError> {
        self.check()?;
        let payload =
            serde_json::to_vec(self).map_err(|e| BundleError::CorruptFile(e.to_string()))?;
        let header = Header {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            payload_sha256: bytes_hash(&payload),
        };
        let mut out =
            serde_json::to_vec(&header).map_err(|e| BundleError::CorruptFile(e.to_string()))?;
        out.push(b'\n');
        out.extend(payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BundleError> {
        let split = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| BundleError::CorruptFile("missing header line".into()))?;
        let header: Header = serde_json::from_slice(&bytes[..split])
            .map_err(|e| BundleError::CorruptFile(format!("header: {e}")))?;
        if header.format != BUNDLE_FORMAT {
            return Err(BundleError::CorruptFile(format!("unexpected format {:?}", header.format)));
        }
        if header.version != BUNDLE_VERSION {
            return Err(BundleError::VersionMismatch { found: header.version, expected: BUNDLE_VERSION });
        }
        let payload = &bytes[split + 1..];
        if bytes_hash(payload) != header.payload_sha256 {
            return Err(BundleError::HashMismatch("payload checksum does not match header".into()));
        }
        let bundle: Self = serde_json::from_slice(payload)
            .map_err(|e| BundleError::CorruptFile(format!("payload: {e}")))?;
        bundle.check()?;
        Ok(bundle)
    }
}

pub fn save_bundle(bundle: &EngineBundle, path: impl AsRef<Path>) -> Result<(), BundleError> {
    std::fs::write(path, bundle.to_bytes()?)?;
    Ok(())
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<EngineBundle, BundleError> {
    EngineBundle::from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::spiral_catalog;
    use crate::itrnet::TrainConfig;
    use crate::poigraph::EmbeddingTable;
    use ndarray::Array2;

    fn bundle() -> EngineBundle {
        let catalog = spiral_catalog(6);
        let z = Array2::from_shape_fn((6, 3), |(i, j)| (i * 3 + j) as f64 * 0.1);
        let cfg = TrainConfig { hidden_size: 4, mlp_dim: 3, ..TrainConfig::default() };
        EngineBundle::new("toy", catalog, ItrNet::init(EmbeddingTable::new(z), cfg)).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let b = bundle();
        let bytes = b.to_bytes().unwrap();
        let back = EngineBundle::from_bytes(&bytes).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn detects_tampering() {
        let mut bytes = bundle().to_bytes().unwrap();
        let last = bytes.len() - 3;
        bytes[last] ^= 1;
        assert!(matches!(EngineBundle::from_bytes(&bytes), Err(BundleError::HashMismatch(_))));
        assert!(matches!(EngineBundle::from_bytes(b"garbage"), Err(BundleError::CorruptFile(_))));
    }

    #[test]
    fn rejects_other_versions() {
        let bytes = bundle().to_bytes().unwrap();
        let text = String::from_utf8(bytes).unwrap().replacen("\"version\":1", "\"version\":7", 1);
        assert!(matches!(
            EngineBundle::from_bytes(text.as_bytes()),
            Err(BundleError::VersionMismatch { found: 7, expected: 1 })
        ));
    }

    #[test]
    fn rejects_mismatched_catalog() {
        let b = bundle();
        assert!(EngineBundle::new("x", spiral_catalog(7), b.model).is_err());
    }
}
