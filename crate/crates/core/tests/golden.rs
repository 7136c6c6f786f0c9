//! Seeded runs reproduce a stored report byte for byte. Set
//! `UPDATE_GOLDEN=1` to rewrite the stored file after an intended change.

use std::path::PathBuf;

use spc_radar::runner::{self, ExperimentConfig};

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

#[test]
fn experiment_c_desk_report_matches_golden() {
    let config = ExperimentConfig::preset("table3").unwrap();
    let text = runner::experiment_c(&config).unwrap().report.to_text();
    let again = runner::experiment_c(&config).unwrap().report.to_text();
    assert_eq!(text, again);

    let path = golden_path("experiment_c_desk.txt");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &text).unwrap();
    }
    let stored = std::fs::read_to_string(&path).expect("golden file present");
    assert_eq!(text, stored);
}
