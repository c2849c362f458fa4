use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::classifiers::{
    init_pnn, train_joint, ClassifierConfig, ClassifierKind, FittedClassifier, JointSample, JointSchedule, LrConfig,
    DEFAULT_K,
};
use crate::data::{Corpus, DailyActivityMatrix, Label, NodeSet};
use crate::error::{Error, Result};
use crate::extractors::{train_extractor, EncoderModel, ExtractorConfig, ExtractorKind};
use crate::featsel::{default_sweep, rfecv, sbs, sbs_sweep, FeatureSubset};
use crate::preprocess::{
    apply_normalization, fit_lagrangian, standardized_phys, windowed_features, NormalizationParams, PhysStats,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorChoice {
    /// Conventional path on the 11×N window statistics.
    None,
    Ae,
    De,
    Cae,
    Rbm,
}

impl ExtractorChoice {
    pub fn kind(self) -> Option<ExtractorKind> {
        match self {
            ExtractorChoice::None => None,
            ExtractorChoice::Ae => Some(ExtractorKind::Ae),
            ExtractorChoice::De => Some(ExtractorKind::De),
            ExtractorChoice::Cae => Some(ExtractorKind::Cae),
            ExtractorChoice::Rbm => Some(ExtractorKind::Rbm),
        }
    }

    pub fn name(self) -> &'static str {
        self.kind().map_or("raw", ExtractorKind::name)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    #[default]
    None,
    /// Sequential backward selection to `d` features, or the best of the
    /// default sweep `{n/4, n/2, 3n/4}` when `d` is absent.
    Sbs { d: Option<usize> },
    Rfecv,
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::None => Ok(()),
            Selector::Sbs { d: Some(d) } => write!(f, "sbs({d})"),
            Selector::Sbs { d: None } => f.write_str("sbs"),
            Selector::Rfecv => f.write_str("rfecv"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub extractor: ExtractorChoice,
    pub classifier: ClassifierKind,
    pub selector: Selector,
    pub use_phys: bool,
    pub folds: usize,
    pub seed: u64,
    /// Extractor pretraining; node count and seeds are taken from the corpus and `seed`.
    pub extractor_params: ExtractorConfig,
    pub joint: JointSchedule,
    pub knn_k: usize,
    pub lr: LrConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            extractor: ExtractorChoice::De,
            classifier: ClassifierKind::Pnn,
            selector: Selector::None,
            use_phys: false,
            folds: 5,
            seed: 0,
            extractor_params: ExtractorConfig::default(),
            joint: JointSchedule::default(),
            knn_k: DEFAULT_K,
            lr: LrConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn new(extractor: ExtractorChoice, classifier: ClassifierKind) -> Self {
        ExperimentConfig {
            extractor,
            classifier,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classifier == ClassifierKind::Pnn && self.extractor == ExtractorChoice::None {
            return Err(Error::InvalidConfig("pnn requires an extractor".into()));
        }
        if self.selector != Selector::None && self.extractor != ExtractorChoice::None {
            return Err(Error::InvalidConfig("feature selection applies to the raw window features only".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidConfig("at least 2 folds are needed".into()));
        }
        self.extractor_params.train.validate()?;
        self.joint.validate()
    }

    /// Row label such as `de+pnn`, `raw+gnb+rfecv`.
    pub fn label(&self) -> String {
        let mut s = format!("{}+{}", self.extractor.name(), self.classifier);
        if self.selector != Selector::None {
            s.push('+');
            s.push_str(&self.selector.to_string());
        }
        s
    }

    fn classifier_config(&self) -> ClassifierConfig {
        ClassifierConfig {
            kind: self.classifier,
            knn_k: self.knn_k,
            lr: self.lr.clone(),
            pnn_sigma: self.joint.initial_sigma,
        }
    }

    fn extractor_config(&self, nodes: usize) -> ExtractorConfig {
        let mut cfg = self.extractor_params.clone();
        cfg.nodes = nodes;
        cfg.extra_inputs = 0;
        cfg.train.seed = self.seed;
        cfg.rbm.seed = self.seed;
        cfg
    }
}

/// Fitted normalize → extract → classify chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedPipeline {
    pub config: ExperimentConfig,
    pub nodes: NodeSet,
    pub normalization: Option<NormalizationParams>,
    pub phys: Option<PhysStats>,
    pub encoder: Option<EncoderModel>,
    pub selection: Option<FeatureSubset>,
    pub classifier: FittedClassifier,
}

impl TrainedPipeline {
    /// The classifier input for one day (for a PNN, the point in kernel space).
    pub fn features(&self, matrix: &DailyActivityMatrix) -> Result<Vec<f64>> {
        FeatureMap {
            nodes: &self.nodes,
            normalization: self.normalization.as_ref(),
            encoder: self.encoder.as_ref(),
            phys: self.phys.as_ref(),
            selection: self.selection.as_ref(),
        }
        .apply(matrix)
    }

    pub fn probability(&self, matrix: &DailyActivityMatrix) -> Result<f64> {
        self.classifier.probability(&self.features(matrix)?)
    }

    pub fn predict(&self, matrix: &DailyActivityMatrix) -> Result<Label> {
        self.classifier.predict(&self.features(matrix)?)
    }

    /// Appends the day as a new PNN kernel; `Ok(false)` for other heads.
    pub fn add_kernel(&mut self, matrix: &DailyActivityMatrix, label: Label) -> Result<bool> {
        let x = self.features(matrix)?;
        match &mut self.classifier {
            FittedClassifier::Pnn(pnn) => {
                *pnn = pnn.add_kernel(&x, label)?;
                Ok(true)
            }
            _ => Ok(false),
        }
    }
}

struct FeatureMap<'a> {
    nodes: &'a NodeSet,
    normalization: Option<&'a NormalizationParams>,
    encoder: Option<&'a EncoderModel>,
    phys: Option<&'a PhysStats>,
    selection: Option<&'a FeatureSubset>,
}

impl FeatureMap<'_> {
    fn apply(&self, matrix: &DailyActivityMatrix) -> Result<Vec<f64>> {
        if matrix.n_nodes() != self.nodes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.nodes.len(),
                got: matrix.n_nodes(),
            });
        }
        let mut x = match (self.encoder, self.normalization) {
            (Some(enc), Some(norm)) => enc.encode(&apply_normalization(&matrix.flatten(), norm)?)?,
            _ => windowed_features(matrix).rows,
        };
        if let Some(stats) = self.phys {
            x.extend(standardized_phys(matrix, stats)?);
        }
        Ok(match self.selection {
            Some(sel) => sel.project(&x),
            None => x,
        })
    }
}

/// Normalization, normalized unlabelled inputs and pretrained extractors,
/// shared across folds and configs of one corpus.
#[derive(Default)]
pub struct ExtractorCache {
    normalization: Option<(NormalizationParams, Vec<Vec<f64>>)>,
    phys: Option<PhysStats>,
    encoders: HashMap<String, EncoderModel>,
}

impl ExtractorCache {
    fn normalized(&mut self, corpus: &Corpus) -> Result<&(NormalizationParams, Vec<Vec<f64>>)> {
        if self.normalization.is_none() {
            let params = fit_lagrangian(&corpus.unlabelled)?;
            let inputs = corpus
                .unlabelled
                .iter()
                .map(|m| apply_normalization(&m.flatten(), &params))
                .collect::<Result<_>>()?;
            self.normalization = Some((params, inputs));
        }
        Ok(self.normalization.as_ref().expect("just filled"))
    }

    fn encoder(&mut self, corpus: &Corpus, kind: ExtractorKind, cfg: &ExtractorConfig) -> Result<EncoderModel> {
        let key = format!("{kind}:{}", serde_json::to_string(cfg).expect("config serializes"));
        if let Some(m) = self.encoders.get(&key) {
            return Ok(m.clone());
        }
        let (_, inputs) = self.normalized(corpus)?;
        let model = train_extractor(inputs, kind, cfg)?.model;
        self.encoders.insert(key, model.clone());
        Ok(model)
    }

    fn phys_stats(&mut self, corpus: &Corpus, train: &[usize]) -> PhysStats {
        if !corpus.unlabelled.is_empty() {
            return self
                .phys
                .get_or_insert_with(|| PhysStats::fit(&corpus.unlabelled, &corpus.phys_channels))
                .clone();
        }
        let days: Vec<DailyActivityMatrix> = train.iter().map(|&i| corpus.labelled[i].matrix.clone()).collect();
        PhysStats::fit(&days, &corpus.phys_channels)
    }
}

/// Fits the pipeline on every labelled day of `corpus`.
pub fn train_semisupervised(corpus: &Corpus, config: &ExperimentConfig) -> Result<TrainedPipeline> {
    let all: Vec<usize> = (0..corpus.labelled.len()).collect();
    fit_pipeline(corpus, config, &all, &mut ExtractorCache::default())
}

/// Fits on the labelled days at `train`; unlabelled data is always used in full.
pub(crate) fn fit_pipeline(
    corpus: &Corpus,
    config: &ExperimentConfig,
    train: &[usize],
    cache: &mut ExtractorCache,
) -> Result<TrainedPipeline> {
    config.validate()?;
    corpus.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("labelled training days"));
    }
    let labels: Vec<Label> = train.iter().map(|&i| corpus.labelled[i].label).collect();
    let phys = config.use_phys.then(|| cache.phys_stats(corpus, train));
    let finish = |normalization, encoder, selection, classifier| TrainedPipeline {
        config: config.clone(),
        nodes: corpus.nodes.clone(),
        normalization,
        phys: phys.clone(),
        encoder,
        selection,
        classifier,
    };

    let Some(kind) = config.extractor.kind() else {
        let map = FeatureMap {
            nodes: &corpus.nodes,
            normalization: None,
            encoder: None,
            phys: phys.as_ref(),
            selection: None,
        };
        let xs: Vec<Vec<f64>> = train
            .iter()
            .map(|&i| map.apply(&corpus.labelled[i].matrix))
            .collect::<Result<_>>()?;
        let cc = config.classifier_config();
        let fit = |x: &[Vec<f64>], y: &[Label]| cc.fit(x, y);
        let selection = match config.selector {
            Selector::None => None,
            Selector::Sbs { d: Some(d) } => Some(sbs(&fit, &xs, &labels, d, config.folds, config.seed)?),
            Selector::Sbs { d: None } => {
                Some(sbs_sweep(&fit, &xs, &labels, &default_sweep(xs[0].len()), config.folds, config.seed)?)
            }
            Selector::Rfecv => Some(rfecv(&fit, &xs, &labels, config.folds, config.seed)?),
        };
        let xs: Vec<Vec<f64>> = match &selection {
            Some(sel) => xs.iter().map(|x| sel.project(x)).collect(),
            None => xs,
        };
        let classifier = cc.fit(&xs, &labels)?;
        return Ok(finish(None, None, selection, classifier));
    };

    if corpus.unlabelled.is_empty() {
        return Err(Error::Empty("unlabelled corpus"));
    }
    let encoder = cache.encoder(corpus, kind, &config.extractor_config(corpus.nodes.len()))?;
    let (norm, unlabelled) = cache.normalized(corpus)?;

    if config.classifier == ClassifierKind::Pnn {
        let mut samples: Vec<JointSample> = train
            .iter()
            .map(|&i| {
                let m = &corpus.labelled[i].matrix;
                Ok(JointSample {
                    input: apply_normalization(&m.flatten(), norm)?,
                    extra: match &phys {
                        Some(stats) => standardized_phys(m, stats)?,
                        None => Vec::new(),
                    },
                    label: corpus.labelled[i].label,
                    own_kernel: None,
                })
            })
            .collect::<Result<_>>()?;
        let pnn = init_pnn(&encoder, &mut samples, config.joint.initial_sigma)?;
        let mut schedule = config.joint.clone();
        schedule.seed = config.seed;
        let trained = train_joint(encoder, pnn, &samples, unlabelled, &schedule)?;
        return Ok(finish(
            Some(norm.clone()),
            Some(trained.encoder),
            None,
            FittedClassifier::Pnn(trained.pnn),
        ));
    }

    let map = FeatureMap {
        nodes: &corpus.nodes,
        normalization: Some(norm),
        encoder: Some(&encoder),
        phys: phys.as_ref(),
        selection: None,
    };
    let xs: Vec<Vec<f64>> = train
        .iter()
        .map(|&i| map.apply(&corpus.labelled[i].matrix))
        .collect::<Result<_>>()?;
    let classifier = config.classifier_config().fit(&xs, &labels)?;
    Ok(finish(Some(norm.clone()), Some(encoder), None, classifier))
}
