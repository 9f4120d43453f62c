//! Golden-file checks on the pinned mini configuration. Set
//! `STEINERLAB_BLESS=1` to rewrite the stored files after an intended change.

use std::path::PathBuf;

use steinerlab::harness::suite::{mini_config, rows_to_csv, run_rows, ExperimentConfig};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn check(path: PathBuf, got: &str) {
    if std::env::var_os("STEINERLAB_BLESS").is_some() {
        std::fs::write(&path, got).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    if want != got {
        let line = want.lines().zip(got.lines()).position(|(a, b)| a != b);
        panic!("{} differs at line {line:?}", path.display());
    }
}

#[test]
fn mini_rows_match_the_golden_csv() {
    let rows = run_rows(&mini_config()).unwrap();
    check(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/mini.csv"), &rows_to_csv(&rows).unwrap());
}

#[test]
fn shipped_configs_match_the_pinned_mini_config() {
    let mini = mini_config();
    let acceptance = ExperimentConfig {
        name: "acceptance".into(),
        acceptance: true,
        out_csv: Some("results/acceptance.csv".into()),
        out_json: Some("results/acceptance.json".into()),
        ..mini.clone()
    };
    check(root().join("configs/mini.json"), &(serde_json::to_string_pretty(&mini).unwrap() + "\n"));
    check(root().join("configs/acceptance.json"), &(serde_json::to_string_pretty(&acceptance).unwrap() + "\n"));
    let text = std::fs::read_to_string(root().join("configs/acceptance.json")).unwrap();
    assert_eq!(ExperimentConfig::from_json(&text).unwrap(), acceptance);
}
