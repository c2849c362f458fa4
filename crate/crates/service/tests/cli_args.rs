use clap::Parser;
use utirisk_service::cli::{Cli, Command};

#[test]
fn serve_flags_and_env() {
    // The env lookups below are process-wide, so this is the only test touching them.
    std::env::remove_var("UTIRISK_PORT");
    std::env::remove_var("UTIRISK_THRESHOLD");
    let cli = Cli::try_parse_from(["utirisk", "serve", "--snapshot", "m.snap"]).unwrap();
    let Command::Serve(args) = cli.command else { panic!("expected serve") };
    assert_eq!(args.port, 8080);
    assert_eq!(args.threshold, 0.5);
    assert_eq!(args.host, "127.0.0.1");

    std::env::set_var("UTIRISK_PORT", "9100");
    std::env::set_var("UTIRISK_THRESHOLD", "0.7");
    let cli = Cli::try_parse_from(["utirisk", "serve", "--snapshot", "m.snap"]).unwrap();
    let Command::Serve(args) = cli.command else { panic!("expected serve") };
    assert_eq!(args.port, 9100);
    assert_eq!(args.threshold, 0.7);

    let cli = Cli::try_parse_from(["utirisk", "serve", "--snapshot", "m.snap", "--port", "81"]).unwrap();
    let Command::Serve(args) = cli.command else { panic!("expected serve") };
    assert_eq!(args.port, 81);
    std::env::remove_var("UTIRISK_PORT");
    std::env::remove_var("UTIRISK_THRESHOLD");
}

#[test]
fn subcommands_parse() {
    let cli = Cli::try_parse_from(["utirisk", "generate", "--seed", "3", "--out", "c"]).unwrap();
    assert!(matches!(cli.command, Command::Generate { seed: 3, .. }));
    let cli = Cli::try_parse_from(["utirisk", "gradcheck"]).unwrap();
    assert!(matches!(cli.command, Command::Gradcheck { probes: 20, seed: 0 }));
    assert!(Cli::try_parse_from(["utirisk", "train", "--corpus", "c"]).is_err());
    assert!(Cli::try_parse_from(["utirisk", "evaluate", "--corpus", "c", "--report", "r.csv"]).is_ok());
}

#[tokio::test]
async fn generate_train_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let gen_cfg = dir.path().join("gen.json");
    std::fs::write(
        &gen_cfg,
        r#"{"unlabelled_homes": 4, "unlabelled_days": 60, "labelled_homes": 4, "uti_episodes": 3, "non_uti_days": 10}"#,
    )
    .unwrap();
    let corpus = dir.path().join("corpus");
    run(&["utirisk", "generate", "--config", gen_cfg.to_str().unwrap(), "--seed", "1", "--out", corpus.to_str().unwrap()]).await;

    let configs = dir.path().join("configs.json");
    std::fs::write(
        &configs,
        r#"[{"extractor": "none", "classifier": "gnb", "folds": 3}, {"extractor": "none", "classifier": "knn", "folds": 3}]"#,
    )
    .unwrap();
    let report = dir.path().join("report.csv");
    run(&["utirisk", "evaluate", "--corpus", corpus.to_str().unwrap(), "--configs", configs.to_str().unwrap(), "--report", report.to_str().unwrap()]).await;
    let csv = std::fs::read_to_string(&report).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(1).unwrap().starts_with("raw+gnb,env,"));

    let train_cfg = dir.path().join("train.json");
    std::fs::write(&train_cfg, r#"{"extractor": "none", "classifier": "gnb"}"#).unwrap();
    let snap = dir.path().join("m.snap");
    run(&["utirisk", "train", "--corpus", corpus.to_str().unwrap(), "--config", train_cfg.to_str().unwrap(), "--out", snap.to_str().unwrap()]).await;
    let (loaded, _) = utirisk_service::ModelSnapshot::load(&snap).unwrap();
    assert_eq!(loaded.revision, 1);
    assert!(loaded.corpus_hash.is_some());
}

async fn run(args: &[&str]) {
    utirisk_service::cli::run(Cli::try_parse_from(args).unwrap()).await.unwrap();
}
