//! Shared service state: the current model, ingested days, alerts and the audit log.
//!
//! Reads clone an `Arc` of the current snapshot, so a concurrent validation is
//! seen either entirely or not at all. Validations are serialized by a writer
//! lock and persist the new snapshot before it becomes visible.

use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, NaiveDate, Utc};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use utirisk_core::data::{build_days, DailyActivityMatrix, Rejection, SensorEvent, SfpLayout};

use crate::alerts::{Alert, AlertBook, AlertError, AlertStatus, Outcome, DEFAULT_THRESHOLD};
use crate::snapshot::{ModelSnapshot, SnapshotError};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Alert(#[from] AlertError),
    #[error("no data for {0}")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Model(#[from] utirisk_core::Error),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("audit log {path}: {source}")]
    Audit {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub threshold: f64,
    /// Where new snapshot revisions and `audit.jsonl` are written; `None` keeps
    /// everything in memory.
    pub snapshot_dir: Option<PathBuf>,
    pub snapshot_stem: String,
    pub utc_offset_minutes: i32,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            threshold: DEFAULT_THRESHOLD,
            snapshot_dir: None,
            snapshot_stem: "model".into(),
            utc_offset_minutes: 0,
        }
    }
}

impl ServiceConfig {
    /// Revisions go next to `path` as `<stem>.r<revision>.snap`.
    pub fn beside(path: &Path, threshold: f64) -> Self {
        ServiceConfig {
            threshold,
            snapshot_dir: path.parent().map(Path::to_path_buf),
            snapshot_stem: path
                .file_stem()
                .map_or("model".into(), |s| s.to_string_lossy().into_owned()),
            utc_offset_minutes: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub alert_id: u64,
    pub outcome: Outcome,
    pub snapshot_revision: u64,
    pub kernel_added: bool,
    pub at: DateTime<Utc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub home_id: String,
    pub date: NaiveDate,
    pub probability: f64,
    pub alert: Option<Alert>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub alert: Alert,
    pub snapshot_revision: u64,
    pub kernel_added: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub accepted: usize,
    pub rejected: Vec<Rejection>,
    pub scores: Vec<Score>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayPoint {
    pub date: NaiveDate,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomeSummary {
    pub home_id: String,
    pub days: usize,
    pub latest_date: NaiveDate,
    pub latest_probability: f64,
    pub pending_alerts: usize,
    /// Up to the last 30 days, oldest first.
    pub recent: Vec<DayPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskView {
    pub home_id: String,
    pub date: NaiveDate,
    pub probability: f64,
    pub snapshot_revision: u64,
    pub alert: Option<Alert>,
    pub nodes: Vec<String>,
    /// 24 rows of per-node counts.
    pub grid: Vec<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub revision: u64,
    pub created_at: DateTime<Utc>,
    pub checksum: String,
    pub corpus_hash: Option<String>,
    pub config: String,
    pub classifier: String,
    pub use_phys: bool,
    pub threshold: f64,
    pub kernels: Option<KernelCounts>,
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelCounts {
    pub uti: usize,
    pub non_uti: usize,
}

struct Current {
    snapshot: Arc<ModelSnapshot>,
    checksum: String,
}

pub struct Service {
    config: ServiceConfig,
    layout: SfpLayout,
    model: RwLock<Current>,
    days: RwLock<HashMap<String, BTreeMap<NaiveDate, DailyActivityMatrix>>>,
    alerts: Mutex<AlertBook>,
    audit: Mutex<Vec<AuditEntry>>,
    writer: Mutex<()>,
}

impl Service {
    pub fn new(snapshot: ModelSnapshot, checksum: String, config: ServiceConfig) -> Self {
        let layout = SfpLayout {
            nodes: snapshot.pipeline.nodes.clone(),
            utc_offset_minutes: config.utc_offset_minutes,
        };
        Service {
            config,
            layout,
            model: RwLock::new(Current {
                snapshot: Arc::new(snapshot),
                checksum,
            }),
            days: RwLock::default(),
            alerts: Mutex::default(),
            audit: Mutex::default(),
            writer: Mutex::new(()),
        }
    }

    pub fn threshold(&self) -> f64 {
        self.config.threshold
    }

    pub fn snapshot(&self) -> Arc<ModelSnapshot> {
        self.model.read().snapshot.clone()
    }

    /// Stores the day (replacing any earlier version), scores it with the
    /// current model and opens or updates its alert.
    pub fn score_day(&self, matrix: DailyActivityMatrix) -> Result<Score, ServiceError> {
        let probability = self.snapshot().pipeline.probability(&matrix)?;
        let (home_id, date) = (matrix.home_id.clone(), matrix.date);
        self.days
            .write()
            .entry(home_id.clone())
            .or_default()
            .insert(date, matrix);
        let alert = self
            .alerts
            .lock()
            .record_score(&home_id, date, probability, self.config.threshold, Utc::now());
        Ok(Score {
            home_id,
            date,
            probability,
            alert,
        })
    }

    /// Adds sensor events to the stored days and rescores every day they touch.
    pub fn ingest(&self, events: Vec<SensorEvent>, rejected: Vec<Rejection>) -> Result<IngestSummary, ServiceError> {
        let _writer = self.writer.lock();
        let accepted = events.len();
        let mut by_home: BTreeMap<String, Vec<SensorEvent>> = BTreeMap::new();
        for e in events {
            by_home.entry(e.home_id.clone()).or_default().push(e);
        }
        let mut scores = Vec::new();
        for (home, evs) in by_home {
            for mut day in build_days(&evs, &self.layout)? {
                if let Some(existing) = self.days.read().get(&home).and_then(|d| d.get(&day.date)) {
                    let mut merged = existing.clone();
                    merged.merge(&day)?;
                    day = merged;
                }
                scores.push(self.score_day(day)?);
            }
        }
        Ok(IngestSummary {
            accepted,
            rejected,
            scores,
        })
    }

    pub fn risk(&self, home_id: &str, date: NaiveDate) -> Result<RiskView, ServiceError> {
        let matrix = self
            .days
            .read()
            .get(home_id)
            .and_then(|d| d.get(&date))
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("{home_id} on {date}")))?;
        let snap = self.snapshot();
        let probability = snap.pipeline.probability(&matrix)?;
        Ok(RiskView {
            home_id: home_id.to_string(),
            date,
            probability,
            snapshot_revision: snap.revision,
            alert: self.alerts.lock().for_day(home_id, date).cloned(),
            nodes: self.layout.nodes.nodes().iter().map(|n| n.name().to_string()).collect(),
            grid: (0..24).map(|h| matrix.row(h).to_vec()).collect(),
        })
    }

    pub fn homes(&self) -> Result<Vec<HomeSummary>, ServiceError> {
        let snap = self.snapshot();
        let days = self.days.read();
        let alerts = self.alerts.lock();
        let mut out = Vec::with_capacity(days.len());
        let mut homes: Vec<&String> = days.keys().collect();
        homes.sort();
        for home in homes {
            let per_day = &days[home];
            let recent = per_day
                .iter()
                .rev()
                .take(30)
                .map(|(&date, m)| {
                    Ok(DayPoint {
                        date,
                        probability: snap.pipeline.probability(m)?,
                    })
                })
                .collect::<Result<Vec<_>, utirisk_core::Error>>()?;
            let Some(latest) = recent.first().cloned() else {
                continue;
            };
            out.push(HomeSummary {
                home_id: home.clone(),
                days: per_day.len(),
                latest_date: latest.date,
                latest_probability: latest.probability,
                pending_alerts: alerts.pending_for(home),
                recent: recent.into_iter().rev().collect(),
            });
        }
        Ok(out)
    }

    pub fn alerts(&self, status: Option<AlertStatus>) -> Vec<Alert> {
        self.alerts.lock().list(status)
    }

    pub fn audit_log(&self) -> Vec<AuditEntry> {
        self.audit.lock().clone()
    }

    /// Closes a pending alert. The day becomes a new PNN kernel with the
    /// validated class, and the resulting model is persisted as the next
    /// revision before it is published.
    pub fn validate_alert(&self, id: u64, outcome: Outcome) -> Result<Validation, ServiceError> {
        let _writer = self.writer.lock();
        let alert = self.alerts.lock().check_pending(id)?.clone();
        let matrix = self
            .days
            .read()
            .get(&alert.home_id)
            .and_then(|d| d.get(&alert.date))
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("{} on {}", alert.home_id, alert.date)))?;

        let current = self.snapshot();
        let mut next = (*current).clone();
        let kernel_added = next.pipeline.add_kernel(&matrix, outcome.label())?;
        next.revision = current.revision + 1;
        next.created_at = Utc::now();
        let checksum = match &self.config.snapshot_dir {
            Some(dir) => next.save(&self.revision_path(dir, next.revision))?,
            None => next.encode()?.1,
        };
        let entry = AuditEntry {
            alert_id: id,
            outcome,
            snapshot_revision: next.revision,
            kernel_added,
            at: next.created_at,
        };
        if let Some(dir) = &self.config.snapshot_dir {
            append_audit(&dir.join("audit.jsonl"), &entry)?;
        }

        let revision = next.revision;
        let alert = self.alerts.lock().validate(id, outcome, entry.at)?;
        *self.model.write() = Current {
            snapshot: Arc::new(next),
            checksum,
        };
        self.audit.lock().push(entry);
        Ok(Validation {
            alert,
            snapshot_revision: revision,
            kernel_added,
        })
    }

    pub fn revision_path(&self, dir: &Path, revision: u64) -> PathBuf {
        dir.join(format!("{}.r{revision}.snap", self.config.snapshot_stem))
    }

    pub fn model_info(&self) -> ModelInfo {
        let current = self.model.read();
        let snap = &current.snapshot;
        let (kernels, sigma) = match &snap.pipeline.classifier {
            utirisk_core::classifiers::FittedClassifier::Pnn(p) => (
                Some(KernelCounts {
                    uti: p.count(utirisk_core::data::Label::Uti),
                    non_uti: p.count(utirisk_core::data::Label::NonUti),
                }),
                Some(p.sigma),
            ),
            _ => (None, None),
        };
        ModelInfo {
            revision: snap.revision,
            created_at: snap.created_at,
            checksum: current.checksum.clone(),
            corpus_hash: snap.corpus_hash.clone(),
            config: snap.pipeline.config.label(),
            classifier: snap.pipeline.classifier.kind().to_string(),
            use_phys: snap.pipeline.config.use_phys,
            threshold: self.config.threshold,
            kernels,
            sigma,
        }
    }
}

fn append_audit(path: &Path, entry: &AuditEntry) -> Result<(), ServiceError> {
    let err = |source| ServiceError::Audit {
        path: path.to_path_buf(),
        source,
    };
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(err)?;
    let line = serde_json::to_string(entry).expect("audit entry serializes");
    writeln!(f, "{line}").map_err(err)
}
