use std::time::{Duration, Instant};

use crowdagg::evaluation::{EvalConfig, PreparedCorpus};
use crowdagg::features::{FeatureGroup, FeatureMask};
use crowdagg::io::{self, matrix_header, Artifact, IoError, RunConfig};
use crowdagg::pipelines::Approach;
use crowdagg::synth::{self, Regime, RegimeSpec};
use crowdagg::SubgroupPlan;

#[test]
fn synthetic_corpus_survives_a_file_roundtrip() {
    let corpus = synth::generate_corpus(&synth::scaled_mixture(60), 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    io::write_dataset(&path, &corpus.cases).unwrap();
    let back = io::read_dataset(&path).unwrap();
    assert_eq!(back, corpus.cases);
    io::write_dataset(&dir.path().join("again.jsonl"), &back).unwrap();
    assert_eq!(
        std::fs::read(&path).unwrap(),
        std::fs::read(dir.path().join("again.jsonl")).unwrap()
    );
}

#[test]
fn full_size_corpus_loads_quickly() {
    let mut spec = RegimeSpec::default_for(Regime::EasyMajority);
    spec.group_size = (40, 100);
    let corpus = synth::generate_corpus(&[(spec, 1209)], 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.jsonl");
    io::write_dataset(&path, &corpus.cases).unwrap();
    let start = Instant::now();
    let loaded = io::load_and_filter(&path, true).unwrap();
    assert!(start.elapsed() < Duration::from_secs(5));
    assert_eq!(loaded.cases.len() + loaded.excluded.len(), 1209);
}

#[test]
fn matrix_headers() {
    let config = EvalConfig::default();
    let amp = matrix_header(Approach::Amp, &config, 2);
    assert_eq!(amp.len(), 1 + 27 + 5);
    assert_eq!(&amp[28..], ["O_MR", "O_HAC", "O_WC", "O_SP", "O_DA"]);
    let dap = matrix_header(Approach::Dap, &config, 2);
    assert_eq!(dap.len(), 1 + 27 + 10 + 1);

    let masked = EvalConfig {
        mask: FeatureMask::full().without(FeatureGroup::PredictedSupport),
        ..EvalConfig::default()
    };
    let header = matrix_header(Approach::Amp, &masked, 2);
    for name in [
        "MaxPSa",
        "MinPSa",
        "AvgPSv",
        "P_lowC_highPSv",
        "P_lowPSv_highC",
    ] {
        assert!(!header.iter().any(|h| h == name));
    }
    assert_eq!(header.len(), 1 + 22 + 5);
}

#[test]
fn feature_matrix_export() {
    let corpus = synth::generate_corpus(&synth::scaled_mixture(20), 2).unwrap();
    let prepared = PreparedCorpus::prepare(&corpus.cases, &SubgroupPlan::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    io::export_feature_matrix(&path, &prepared, Approach::Dap, &EvalConfig::default()).unwrap();
    let mut reader = csv::Reader::from_path(&path).unwrap();
    assert_eq!(reader.headers().unwrap().len(), 39);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 20);
    assert_eq!(&rows[0][0], prepared.cases()[0].case_id.as_str());
}

#[test]
fn config_and_artifacts() {
    let config = RunConfig::from_toml_str("seed = 5\n[evaluation]\nfolds = 5\n").unwrap();
    assert_eq!(config.seed, 5);
    assert!(matches!(
        RunConfig::from_toml_str("seed = 5\nbogus = 1\n"),
        Err(IoError::Config(_))
    ));
    let mut threaded = config.clone();
    threaded.workers = Some(8);
    assert_eq!(threaded.hash(), config.hash());

    let body = vec![1.5, 2.0];
    let a = Artifact::new("demo", &config, &body).to_json();
    let b = Artifact::new("demo", &threaded, &body).to_json();
    assert_eq!(a, b);
    let value: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(value["seed"], 5);
    assert_eq!(value["config_hash"], config.hash());
}
