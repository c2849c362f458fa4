//! Versioned, checksummed model snapshot files.
//!
//! ```text
//! utirisk-snapshot v1
//! sha256 <hex digest of the body>
//! <JSON body>
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use utirisk_core::eval::TrainedPipeline;

pub const MAGIC: &str = "utirisk-snapshot";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a model snapshot: {0}")]
    Header(String),
    #[error("snapshot format v{found} is not supported (this build reads v{FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("snapshot checksum mismatch: header says {expected}, body hashes to {actual}")]
    Checksum { expected: String, actual: String },
    #[error("snapshot body: {0}")]
    Body(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    /// Increments with every persisted model change.
    pub revision: u64,
    pub created_at: DateTime<Utc>,
    pub corpus_hash: Option<String>,
    pub pipeline: TrainedPipeline,
}

fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl ModelSnapshot {
    pub fn new(pipeline: TrainedPipeline, corpus_hash: Option<String>) -> Self {
        ModelSnapshot {
            revision: 1,
            created_at: Utc::now(),
            corpus_hash,
            pipeline,
        }
    }

    /// Full file contents; returns the text and the body checksum.
    pub fn encode(&self) -> Result<(String, String), SnapshotError> {
        let body = serde_json::to_string(self).map_err(|e| SnapshotError::Body(e.to_string()))?;
        let sum = digest(body.as_bytes());
        Ok((format!("{MAGIC} v{FORMAT_VERSION}\nsha256 {sum}\n{body}"), sum))
    }

    /// Parses file contents, refusing other format versions and any checksum mismatch.
    pub fn decode(bytes: &[u8]) -> Result<(Self, String), SnapshotError> {
        let mut parts = bytes.splitn(3, |&b| b == b'\n');
        let header = parts.next().unwrap_or_default();
        let sum_line = parts.next().ok_or_else(|| SnapshotError::Header("missing checksum line".into()))?;
        let body = parts.next().ok_or_else(|| SnapshotError::Header("missing body".into()))?;

        let header = std::str::from_utf8(header).map_err(|_| SnapshotError::Header("binary header".into()))?;
        let version = header
            .strip_prefix(MAGIC)
            .and_then(|rest| rest.strip_prefix(" v"))
            .ok_or_else(|| SnapshotError::Header(format!("unexpected header `{header}`")))?;
        let found: u32 = version
            .parse()
            .map_err(|_| SnapshotError::Header(format!("unreadable version `{version}`")))?;
        if found != FORMAT_VERSION {
            return Err(SnapshotError::UnsupportedVersion { found });
        }
        let expected = std::str::from_utf8(sum_line)
            .ok()
            .and_then(|l| l.strip_prefix("sha256 "))
            .unwrap_or_default()
            .to_string();
        let actual = digest(body);
        if expected != actual {
            return Err(SnapshotError::Checksum { expected, actual });
        }
        let snap = serde_json::from_slice(body).map_err(|e| SnapshotError::Body(e.to_string()))?;
        Ok((snap, actual))
    }

    /// Writes via a temporary file and rename; returns the checksum.
    pub fn save(&self, path: &Path) -> Result<String, SnapshotError> {
        let (text, sum) = self.encode()?;
        let io = |source| SnapshotError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        fs::write(&tmp, text).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)?;
        Ok(sum)
    }

    pub fn load(path: &Path) -> Result<(Self, String), SnapshotError> {
        let bytes = fs::read(path).map_err(|source| SnapshotError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::decode(&bytes)
    }
}
