//! Alert records and their pending → validated state machine.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use utirisk_core::data::Label;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertStatus {
    Pending,
    ValidatedPositive,
    ValidatedNegative,
}

impl AlertStatus {
    pub fn name(self) -> &'static str {
        match self {
            AlertStatus::Pending => "pending",
            AlertStatus::ValidatedPositive => "validated_positive",
            AlertStatus::ValidatedNegative => "validated_negative",
        }
    }
}

impl fmt::Display for AlertStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlertStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pending" => Ok(AlertStatus::Pending),
            "validated_positive" => Ok(AlertStatus::ValidatedPositive),
            "validated_negative" => Ok(AlertStatus::ValidatedNegative),
            other => Err(format!("unknown alert status `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Positive,
    Negative,
}

impl Outcome {
    pub fn label(self) -> Label {
        match self {
            Outcome::Positive => Label::Uti,
            Outcome::Negative => Label::NonUti,
        }
    }

    fn status(self) -> AlertStatus {
        match self {
            Outcome::Positive => AlertStatus::ValidatedPositive,
            Outcome::Negative => AlertStatus::ValidatedNegative,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub alert_id: u64,
    pub home_id: String,
    pub date: NaiveDate,
    pub probability: f64,
    pub status: AlertStatus,
    pub created_at: DateTime<Utc>,
    pub validated_at: Option<DateTime<Utc>>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AlertError {
    #[error("no alert with id {0}")]
    Unknown(u64),
    #[error("alert {id} is already {status}")]
    AlreadyValidated { id: u64, status: AlertStatus },
}

/// All alerts, at most one per home-day.
#[derive(Clone, Debug, Default)]
pub struct AlertBook {
    alerts: Vec<Alert>,
    by_day: HashMap<(String, NaiveDate), usize>,
}

impl AlertBook {
    /// Records a score. An existing alert for the day gets the new probability;
    /// otherwise a pending alert is opened when `probability >= threshold`.
    pub fn record_score(
        &mut self,
        home_id: &str,
        date: NaiveDate,
        probability: f64,
        threshold: f64,
        now: DateTime<Utc>,
    ) -> Option<Alert> {
        if let Some(&i) = self.by_day.get(&(home_id.to_string(), date)) {
            self.alerts[i].probability = probability;
            return Some(self.alerts[i].clone());
        }
        if probability < threshold {
            return None;
        }
        let alert = Alert {
            alert_id: self.alerts.len() as u64 + 1,
            home_id: home_id.to_string(),
            date,
            probability,
            status: AlertStatus::Pending,
            created_at: now,
            validated_at: None,
        };
        self.by_day.insert((home_id.to_string(), date), self.alerts.len());
        self.alerts.push(alert.clone());
        Some(alert)
    }

    pub fn get(&self, id: u64) -> Option<&Alert> {
        self.alerts.get(usize::try_from(id).ok()?.checked_sub(1)?)
    }

    pub fn for_day(&self, home_id: &str, date: NaiveDate) -> Option<&Alert> {
        self.by_day
            .get(&(home_id.to_string(), date))
            .map(|&i| &self.alerts[i])
    }

    /// Fails unless the alert exists and is pending.
    pub fn check_pending(&self, id: u64) -> Result<&Alert, AlertError> {
        let alert = self.get(id).ok_or(AlertError::Unknown(id))?;
        if alert.status != AlertStatus::Pending {
            return Err(AlertError::AlreadyValidated {
                id,
                status: alert.status,
            });
        }
        Ok(alert)
    }

    pub fn validate(&mut self, id: u64, outcome: Outcome, now: DateTime<Utc>) -> Result<Alert, AlertError> {
        self.check_pending(id)?;
        let alert = &mut self.alerts[id as usize - 1];
        alert.status = outcome.status();
        alert.validated_at = Some(now);
        Ok(alert.clone())
    }

    pub fn list(&self, status: Option<AlertStatus>) -> Vec<Alert> {
        self.alerts
            .iter()
            .filter(|a| status.is_none_or(|s| a.status == s))
            .cloned()
            .collect()
    }

    pub fn pending_for(&self, home_id: &str) -> usize {
        self.alerts
            .iter()
            .filter(|a| a.home_id == home_id && a.status == AlertStatus::Pending)
            .count()
    }
}
