use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::folds::{kfold_split, train_indices};
use super::metrics::{compute_metrics, Metrics, Summary};
use super::pipeline::{fit_pipeline, ExperimentConfig, ExtractorCache};
use crate::data::Corpus;
use crate::error::{Error, Result};
use crate::featsel::FeatureSubset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub folds: Vec<Metrics>,
    pub precision: Summary,
    pub recall: Summary,
    pub f1: Summary,
    pub accuracy: Summary,
    /// Per-fold selected subsets when a selector is configured.
    pub selections: Vec<FeatureSubset>,
    pub runtime_secs: f64,
}

impl ExperimentReport {
    fn from_folds(folds: Vec<Metrics>, selections: Vec<FeatureSubset>, runtime_secs: f64) -> Self {
        ExperimentReport {
            precision: Summary::of(folds.iter().map(|m| m.precision)),
            recall: Summary::of(folds.iter().map(|m| m.recall)),
            f1: Summary::of(folds.iter().map(|m| m.f1)),
            accuracy: Summary::of(folds.iter().map(|m| m.accuracy)),
            folds,
            selections,
            runtime_secs,
        }
    }
}

/// A config's report, or the error that stopped it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigOutcome {
    pub label: String,
    pub config: ExperimentConfig,
    pub report: Option<ExperimentReport>,
    pub error: Option<String>,
}

/// k-fold cross-validation of every config over the labelled days, in input
/// order. Unlabelled data (normalization, extractor pretraining) is shared by
/// all folds; a failing config is recorded and the rest still run.
pub fn run_experiment(corpus: &Corpus, configs: &[ExperimentConfig]) -> Vec<ConfigOutcome> {
    let mut cache = ExtractorCache::default();
    configs
        .iter()
        .map(|cfg| {
            let (report, error) = match evaluate(corpus, cfg, &mut cache) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            ConfigOutcome {
                label: cfg.label(),
                config: cfg.clone(),
                report,
                error,
            }
        })
        .collect()
}

fn evaluate(corpus: &Corpus, cfg: &ExperimentConfig, cache: &mut ExtractorCache) -> Result<ExperimentReport> {
    cfg.validate()?;
    let started = Instant::now();
    let labels = corpus.labels();
    let folds = kfold_split(&labels, cfg.folds, cfg.seed)?;
    let mut metrics = Vec::with_capacity(folds.len());
    let mut selections = Vec::new();
    for (f, test) in folds.iter().enumerate() {
        let pipeline = fit_pipeline(corpus, cfg, &train_indices(&folds, f), cache)?;
        let truth: Vec<_> = test.iter().map(|&i| labels[i]).collect();
        let pred = test
            .iter()
            .map(|&i| pipeline.predict(&corpus.labelled[i].matrix))
            .collect::<Result<Vec<_>>>()?;
        metrics.push(compute_metrics(&truth, &pred)?);
        selections.extend(pipeline.selection);
    }
    Ok(ExperimentReport::from_folds(metrics, selections, started.elapsed().as_secs_f64()))
}

/// Machine-readable record of an evaluation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub corpus_hash: String,
    pub labelled_days: usize,
    pub unlabelled_days: usize,
    pub outcomes: Vec<ConfigOutcome>,
}

/// Writes the comma-separated table at `path` and `<path>.manifest.json`
/// beside it; returns the manifest path.
pub fn write_report(path: &Path, corpus: &Corpus, outcomes: &[ConfigOutcome]) -> Result<PathBuf> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse("report", e))?;
    w.write_record([
        "method", "data", "precision", "recall", "f1", "accuracy", "f1_std", "folds", "status",
    ])
    .map_err(|e| Error::parse("report", e))?;
    for o in outcomes {
        let data = if o.config.use_phys { "env+phys" } else { "env" };
        let row: Vec<String> = match &o.report {
            Some(r) => vec![
                o.label.clone(),
                data.into(),
                format!("{:.4}", r.precision.mean),
                format!("{:.4}", r.recall.mean),
                format!("{:.4}", r.f1.mean),
                format!("{:.4}", r.accuracy.mean),
                format!("{:.4}", r.f1.std),
                r.folds.len().to_string(),
                "ok".into(),
            ],
            None => {
                let mut v = vec![o.label.clone(), data.into()];
                v.extend(std::iter::repeat_n(String::new(), 6));
                v.push(format!("error: {}", o.error.as_deref().unwrap_or("unknown")));
                v
            }
        };
        w.write_record(&row).map_err(|e| Error::parse("report", e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        corpus_hash: corpus.content_hash(),
        labelled_days: corpus.labelled.len(),
        unlabelled_days: corpus.unlabelled.len(),
        outcomes: outcomes.to_vec(),
    };
    let mut manifest_path = path.as_os_str().to_owned();
    manifest_path.push(".manifest.json");
    let manifest_path = PathBuf::from(manifest_path);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::parse("manifest", e))?;
    std::fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}
