use super::*;
use std::fs;

fn write_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    // Small two-covariate dataset with both arms populated.
    let mut csv = String::from("y,t,x1,x2\n");
    let mut state = 1u64;
    for i in 0..60 {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
        let u = (state >> 11) as f64 / (1u64 << 53) as f64;
        let t = i % 3 == 0;
        let x1 = (i % 7) as f64;
        let y = 2.0 * x1 + if t { 1.5 } else { 0.0 } + u;
        csv.push_str(&format!("{y},{},{x1},{}\n", u8::from(t), i % 2));
    }
    let data = dir.join("data.csv");
    fs::write(&data, csv).unwrap();
    let schema = dir.join("schema.json");
    fs::write(
        &schema,
        r#"{
            "numeric_columns": ["x1"],
            "binary_columns": ["x2"],
            "treatment_column": "t",
            "outcome_column": "y"
        }"#,
    )
    .unwrap();
    (data, schema)
}

fn fixture_config(dir: &Path, method: Method) -> RunConfig {
    let (input, schema) = write_fixture(dir);
    RunConfig {
        input,
        schema,
        method,
        seed: 11,
        replicates: 50,
        horizon: 1060,
        mcmc: McmcSettings {
            burn_in: 30,
            draws: 20,
            thin: 1,
        },
        estimands: vec![EstimandSpec::Ate],
        out: dir.join("out"),
    }
}

#[test]
fn method_parse_round_trips() {
    for m in ["bart", "bart-cc", "marg-obs", "marg-is"] {
        assert_eq!(Method::parse(m).unwrap().label(), m);
    }
    assert!(Method::parse("ols").is_err());
}

#[test]
fn empty_estimand_list_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fixture_config(dir.path(), Method::MargObs);
    cfg.estimands.clear();
    let err = cmd_analyze(&cfg).unwrap_err();
    assert!(matches!(err, Error::Input(_)));
}

#[test]
fn analyze_marg_obs_writes_expected_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config(dir.path(), Method::MargObs);
    cmd_analyze(&cfg).unwrap();
    for f in ["summary.json", "table.csv", "ate_density.csv", "run.log", "weights.csv"] {
        assert!(cfg.out.join(f).exists(), "missing {f}");
    }
    let summary = fs::read_to_string(cfg.out.join("summary.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(parsed["config"]["seed"], 11);
    assert_eq!(parsed["summaries"][0]["method"], "marg-obs");
    assert!(parsed["ess_treated"].as_f64().unwrap() > 0.0);
}

#[test]
fn analyze_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config(dir.path(), Method::MargIs);
    cmd_analyze(&cfg).unwrap();
    let first = fs::read(cfg.out.join("summary.json")).unwrap();
    let first_density = fs::read(cfg.out.join("ate_density.csv")).unwrap();
    cmd_analyze(&cfg).unwrap();
    assert_eq!(first, fs::read(cfg.out.join("summary.json")).unwrap());
    assert_eq!(
        first_density,
        fs::read(cfg.out.join("ate_density.csv")).unwrap()
    );
}

#[test]
fn analyze_bart_with_cate_writes_cate_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fixture_config(dir.path(), Method::Bart);
    cfg.estimands.push(EstimandSpec::Cate {
        column: "x1".into(),
        grid: None,
    });
    cmd_analyze(&cfg).unwrap();
    assert!(cfg.out.join("cate.csv").exists());
    let table = fs::read_to_string(cfg.out.join("table.csv")).unwrap();
    assert!(table.starts_with("method,label,mean"));
    assert!(table.contains("bart,ate"));
}

#[test]
fn analyze_bart_cc_reports_inclusion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config(dir.path(), Method::BartCc);
    cmd_analyze(&cfg).unwrap();
    let incl = fs::read_to_string(cfg.out.join("inclusion.csv")).unwrap();
    assert!(incl.lines().count() >= 4);
    assert!(incl.contains("clever,"));
}

#[test]
fn check_martingale_suite_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let code = cmd_check("martingale", 1, dir.path()).unwrap();
    assert_eq!(code, EXIT_OK);
    let xml = fs::read_to_string(dir.path().join("martingale.xml")).unwrap();
    assert!(xml.contains("failures=\"0\""));
    assert!(xml.contains("expected-fail: ok"));
}

#[test]
fn check_oracles_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let code = cmd_check("oracles", 3, dir.path()).unwrap();
    assert_eq!(code, EXIT_OK);
    let xml = fs::read_to_string(dir.path().join("oracles.xml")).unwrap();
    assert!(xml.contains("expected-fail: ok"));
}

#[test]
fn unknown_suite_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        cmd_check("nope", 1, dir.path()),
        Err(Error::Input(_))
    ));
}

#[test]
fn simulate_writes_contraction_table() {
    let dir = tempfile::tempdir().unwrap();
    cmd_simulate(5, 20, dir.path()).unwrap();
    let csv = fs::read_to_string(dir.path().join("contraction.csv")).unwrap();
    assert!(csv.starts_with("mode,n,mean_abs_error,mean_posterior_sd,seed"));
    assert_eq!(csv.lines().count(), 1 + 6); // two modes x three sample sizes
}

#[test]
fn summarize_reports_whole_file_mean() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config(dir.path(), Method::MargObs);
    let cfg_path = dir.path().join("run.json");
    fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = dir.path().join("summary.json");
    cmd_summarize(&cfg_path, Some(&out)).unwrap();
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(parsed["whole_file_rows"], 60);
    assert_eq!(parsed["summary"]["n"], 60);
    assert!(parsed["whole_file_outcome_mean"].as_f64().unwrap() > 0.0);
}
