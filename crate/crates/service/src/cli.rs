//! Command-line interface of the `utirisk` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use utirisk_core::classifiers::ClassifierKind;
use utirisk_core::data::{generate_synthetic, read_corpus, write_corpus, SyntheticConfig};
use utirisk_core::eval::{run_experiment, train_semisupervised, write_report, ExperimentConfig, ExtractorChoice};
use utirisk_core::nn::gradcheck;

use crate::alerts::DEFAULT_THRESHOLD;
use crate::snapshot::ModelSnapshot;
use crate::state::{Service, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "utirisk", version, about = "UTI risk scoring from in-home sensor data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic corpus directory.
    Generate {
        /// JSON generator settings; defaults are used for absent fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a pipeline on every labelled day and save a model snapshot.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// JSON experiment config; defaults to DE + PNN.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate a list of configs and write a report table plus manifest.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        /// JSON array of experiment configs; defaults to the standard comparison set.
        #[arg(long)]
        configs: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Run the HTTP scoring service.
    Serve(ServeArgs),
    /// Finite-difference check of every layer and activation.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "UTIRISK_SNAPSHOT")]
    pub snapshot: PathBuf,
    #[arg(long, env = "UTIRISK_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "UTIRISK_THRESHOLD", default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Corpus directory whose days are scored at startup.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Raw-feature baselines and DE heads, each with and without physiological data.
pub fn default_configs(seed: u64) -> Vec<ExperimentConfig> {
    let pairs = [
        (ExtractorChoice::None, ClassifierKind::Gnb),
        (ExtractorChoice::None, ClassifierKind::Lr),
        (ExtractorChoice::None, ClassifierKind::Knn),
        (ExtractorChoice::De, ClassifierKind::Gnb),
        (ExtractorChoice::De, ClassifierKind::Knn),
        (ExtractorChoice::De, ClassifierKind::Pnn),
    ];
    [false, true]
        .into_iter()
        .flat_map(|use_phys| {
            pairs.iter().map(move |&(e, c)| ExperimentConfig {
                use_phys,
                seed,
                ..ExperimentConfig::new(e, c)
            })
        })
        .collect()
}

pub async fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { config, seed, out } => {
            let cfg: SyntheticConfig = match config {
                Some(p) => read_json(&p)?,
                None => SyntheticConfig::default(),
            };
            let corpus = generate_synthetic(&cfg, seed)?;
            write_corpus(&out, &corpus)?;
            println!(
                "wrote {} unlabelled and {} labelled days to {} (hash {})",
                corpus.unlabelled.len(),
                corpus.labelled.len(),
                out.display(),
                corpus.content_hash()
            );
        }
        Command::Train { corpus, config, out } => {
            let corpus = read_corpus(&corpus)?;
            let cfg: ExperimentConfig = match config {
                Some(p) => read_json(&p)?,
                None => ExperimentConfig::default(),
            };
            let hash = corpus.content_hash();
            let pipeline = tokio::task::spawn_blocking(move || train_semisupervised(&corpus, &cfg)).await??;
            let snapshot = ModelSnapshot::new(pipeline, Some(hash));
            let sum = snapshot.save(&out)?;
            println!("saved {} ({}) sha256 {sum}", out.display(), snapshot.pipeline.config.label());
        }
        Command::Evaluate { corpus, configs, report } => {
            let corpus = read_corpus(&corpus)?;
            let configs: Vec<ExperimentConfig> = match configs {
                Some(p) => read_json(&p)?,
                None => default_configs(0),
            };
            let (corpus, outcomes) = tokio::task::spawn_blocking(move || {
                let outcomes = run_experiment(&corpus, &configs);
                (corpus, outcomes)
            })
            .await?;
            let manifest = write_report(&report, &corpus, &outcomes)?;
            for o in &outcomes {
                match &o.report {
                    Some(r) => println!(
                        "{:<24} {:<8} P {:.3}  R {:.3}  F1 {:.3} ± {:.3}  Acc {:.3}",
                        o.label,
                        if o.config.use_phys { "env+phys" } else { "env" },
                        r.precision.mean,
                        r.recall.mean,
                        r.f1.mean,
                        r.f1.std,
                        r.accuracy.mean
                    ),
                    None => println!("{:<24} failed: {}", o.label, o.error.as_deref().unwrap_or("")),
                }
            }
            println!("report {} manifest {}", report.display(), manifest.display());
        }
        Command::Serve(args) => serve(args).await?,
        Command::Gradcheck { probes, seed } => {
            let started = std::time::Instant::now();
            let report = gradcheck::run_suite(probes, seed)?;
            let worst = report.worst().map_or(0.0, |p| p.rel_error);
            println!(
                "{} probes, worst relative error {worst:.2e}, {:.1}s",
                report.probes.len(),
                started.elapsed().as_secs_f64()
            );
            for p in report.failures() {
                println!("FAIL {p:?}");
            }
            if !report.passed() {
                bail!("gradient check failed");
            }
        }
    }
    Ok(())
}

pub async fn serve(args: ServeArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.threshold) {
        bail!("threshold {} outside [0, 1]", args.threshold);
    }
    let (snapshot, sum) =
        ModelSnapshot::load(&args.snapshot).with_context(|| format!("loading {}", args.snapshot.display()))?;
    tracing::info!(revision = snapshot.revision, checksum = %sum, "model loaded");
    let service = Arc::new(Service::new(snapshot, sum, ServiceConfig::beside(&args.snapshot, args.threshold)));
    if let Some(dir) = &args.corpus {
        let corpus = read_corpus(dir)?;
        let svc = service.clone();
        let n = tokio::task::spawn_blocking(move || -> Result<usize> {
            let days = corpus.unlabelled.into_iter().chain(corpus.labelled.into_iter().map(|d| d.matrix));
            let mut n = 0;
            for m in days {
                svc.score_day(m)?;
                n += 1;
            }
            Ok(n)
        })
        .await??;
        tracing::info!(days = n, "corpus scored");
    }
    let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port))
        .await
        .with_context(|| format!("binding {}:{}", args.host, args.port))?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, crate::http::router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
