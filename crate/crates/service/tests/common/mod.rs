#![allow(dead_code)]

use utirisk_core::classifiers::ClassifierKind;
use utirisk_core::data::{generate_synthetic, Corpus, SyntheticConfig};
use utirisk_core::eval::{train_semisupervised, ExperimentConfig, ExtractorChoice, TrainedPipeline};
use utirisk_service::{ModelSnapshot, Service, ServiceConfig};

pub fn small_corpus(seed: u64) -> Corpus {
    let cfg = SyntheticConfig {
        unlabelled_homes: 12,
        unlabelled_days: 240,
        labelled_homes: 6,
        uti_episodes: 4,
        non_uti_days: 16,
        ..Default::default()
    };
    generate_synthetic(&cfg, seed).unwrap()
}

pub fn quick_config(use_phys: bool) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ExtractorChoice::De, ClassifierKind::Pnn);
    cfg.use_phys = use_phys;
    cfg.extractor_params.train.epochs = 4;
    cfg.extractor_params.train.max_steps = Some(120);
    cfg.joint.epochs = 4;
    cfg.joint.unlabelled_per_epoch = 64;
    cfg
}

pub fn quick_pipeline(seed: u64) -> (Corpus, TrainedPipeline) {
    let corpus = small_corpus(seed);
    let pipeline = train_semisupervised(&corpus, &quick_config(true)).unwrap();
    (corpus, pipeline)
}

pub fn service(pipeline: TrainedPipeline, config: ServiceConfig) -> Service {
    let snap = ModelSnapshot::new(pipeline, None);
    let sum = snap.encode().unwrap().1;
    Service::new(snap, sum, config)
}
