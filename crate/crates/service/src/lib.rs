//! Operational layer for utirisk: day scoring with alert generation, clinician
//! validation feeding continual kernel addition, model snapshots, the HTTP API
//! and the CLI.

pub mod alerts;
pub mod cli;
pub mod http;
pub mod snapshot;
pub mod state;

pub use alerts::{Alert, AlertBook, AlertStatus, Outcome};
pub use snapshot::{ModelSnapshot, SnapshotError};
pub use state::{Service, ServiceConfig, ServiceError};
