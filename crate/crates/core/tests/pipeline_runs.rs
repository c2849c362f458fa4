use utirisk_core::classifiers::{fit_gnb, ClassifierKind, FittedClassifier};
use utirisk_core::data::{generate_synthetic, Corpus, Label, SyntheticConfig};
use utirisk_core::eval::{run_experiment, train_semisupervised, write_report, ExperimentConfig, ExtractorChoice};
use utirisk_core::preprocess::windowed_features;

fn corpus(seed: u64) -> Corpus {
    let cfg = SyntheticConfig {
        unlabelled_homes: 8,
        unlabelled_days: 200,
        labelled_homes: 6,
        uti_episodes: 4,
        non_uti_days: 16,
        ..Default::default()
    };
    generate_synthetic(&cfg, seed).unwrap()
}

fn quick(extractor: ExtractorChoice, classifier: ClassifierKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(extractor, classifier);
    cfg.extractor_params.train.epochs = 3;
    cfg.extractor_params.train.max_steps = Some(80);
    cfg.joint.epochs = 3;
    cfg.joint.unlabelled_per_epoch = 32;
    cfg
}

#[test]
fn raw_gnb_is_the_plain_supervised_path() {
    let c = corpus(1);
    let pipeline = train_semisupervised(&c, &quick(ExtractorChoice::None, ClassifierKind::Gnb)).unwrap();
    let xs: Vec<Vec<f64>> = c.labelled.iter().map(|d| windowed_features(&d.matrix).rows).collect();
    let direct = fit_gnb(&xs, &c.labels()).unwrap();
    let FittedClassifier::Gnb(fitted) = &pipeline.classifier else { panic!("expected gnb") };
    assert_eq!(*fitted, direct);
    for (d, x) in c.labelled.iter().zip(&xs) {
        assert_eq!(pipeline.features(&d.matrix).unwrap(), *x);
        assert_eq!(pipeline.predict(&d.matrix).unwrap(), direct.predict(x).unwrap().0);
    }
}

#[test]
fn pnn_pipeline_outputs_probabilities() {
    let c = corpus(2);
    let mut cfg = quick(ExtractorChoice::De, ClassifierKind::Pnn);
    cfg.use_phys = true;
    let mut pipeline = train_semisupervised(&c, &cfg).unwrap();
    for m in c.unlabelled.iter().take(50) {
        let p = pipeline.probability(m).unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert_eq!(pipeline.features(m).unwrap().len(), 20 + 2 * c.phys_channels.len());
    }
    let day = &c.labelled[0];
    assert!(pipeline.add_kernel(&day.matrix, Label::Uti).unwrap());
}

#[test]
fn experiments_keep_input_order_and_are_deterministic() {
    let c = corpus(3);
    let configs = vec![
        quick(ExtractorChoice::None, ClassifierKind::Knn),
        quick(ExtractorChoice::None, ClassifierKind::Gnb),
        quick(ExtractorChoice::Ae, ClassifierKind::Lr),
    ];
    let a = run_experiment(&c, &configs);
    let b = run_experiment(&c, &configs);
    let labels: Vec<&str> = a.iter().map(|o| o.label.as_str()).collect();
    assert_eq!(labels, ["raw+knn", "raw+gnb", "ae+lr"]);
    for (x, y) in a.iter().zip(&b) {
        let (rx, ry) = (x.report.as_ref().unwrap(), y.report.as_ref().unwrap());
        assert_eq!(rx.folds, ry.folds);
        assert_eq!(rx.f1, ry.f1);
        assert_eq!(rx.folds.len(), 5);
        let n: usize = rx.folds.iter().map(|m| m.total()).sum();
        assert_eq!(n, c.labelled.len());
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    let manifest = write_report(&path, &c, &a).unwrap();
    let mut rows = csv::Reader::from_path(&path).unwrap();
    let methods: Vec<String> = rows.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert_eq!(methods, ["raw+knn", "raw+gnb", "ae+lr"]);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(manifest).unwrap()).unwrap();
    assert_eq!(m["corpus_hash"], c.content_hash());
}
