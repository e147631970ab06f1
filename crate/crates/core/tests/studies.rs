use std::path::Path;

use gridstudies_core::config::{DistCase, StabilityMode, StudyConfig, StudyKind};
use gridstudies_core::studies::{self, OutputDir, RunManifest, StudyError};
use sha2::{Digest, Sha256};

fn manifest(dir: &Path, name: &str) -> RunManifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn sweep_config(out: &Path) -> StudyConfig {
    let mut c = StudyConfig::new(StudyKind::Stability);
    c.stability.as_mut().unwrap().mode = StabilityMode::Sweep;
    c.out = out.to_path_buf();
    c
}

#[test]
fn stability_sweep_writes_table_chart_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let m = studies::run(&sweep_config(tmp.path())).unwrap();
    assert!(m.succeeded());
    let names: Vec<&str> = m.outputs.iter().map(|f| f.name.as_str()).collect();
    for want in ["sweep.csv", "summary.txt", "stability_map.svg"] {
        assert!(names.contains(&want), "{want} missing from {names:?}");
    }
    let mut rd = csv::Reader::from_path(tmp.path().join("sweep.csv")).unwrap();
    assert_eq!(rd.records().count(), 333);
    let svg = std::fs::read_to_string(tmp.path().join("stability_map.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 333);
    let on_disk = manifest(tmp.path(), "manifest.json");
    assert_eq!(on_disk.status, "ok");
    assert_eq!(on_disk.outputs, m.outputs);
}

#[test]
fn manifest_sizes_and_hash_are_independent_of_the_writer() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = sweep_config(tmp.path());
    let m = studies::run(&cfg).unwrap();
    for f in &m.outputs {
        let len = std::fs::metadata(tmp.path().join(&f.name)).unwrap().len();
        assert_eq!(len, f.bytes, "{}", f.name);
    }
    let mut resolved = cfg.clone();
    resolved.resolve();
    let digest = Sha256::digest(resolved.to_toml().as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(m.config_sha256, hex);
    assert_eq!(m.seed, cfg.seed);
    assert_eq!(m.tool, studies::TOOL);
    // the echoed configuration reproduces the hash
    assert_eq!(studies::config_hash(&m.config), m.config_sha256);
}

#[test]
fn failed_run_still_writes_error_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = StudyConfig::new(StudyKind::Stability);
    c.out = tmp.path().to_path_buf();
    // more active power than the machine rating
    c.stability.as_mut().unwrap().p_mw = 3000.0;
    let err = studies::run(&c).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let m = manifest(tmp.path(), "manifest.json");
    assert_eq!(m.status, "error");
    assert!(!m.succeeded());
    assert!(m.error.unwrap().contains("3000"));
}

#[test]
fn missing_input_file_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = StudyConfig::new(StudyKind::Dist);
    c.out = tmp.path().to_path_buf();
    let p = c.dist.as_mut().unwrap();
    p.case = DistCase::B3;
    p.random_loads = Some(tmp.path().join("absent.csv"));
    let err = studies::run(&c).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert_eq!(manifest(tmp.path(), "manifest.json").status, "error");
}

#[test]
fn invalid_config_is_exit_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = StudyConfig::new(StudyKind::Lightning);
    c.out = tmp.path().to_path_buf();
    c.lightning.as_mut().unwrap().n = 0;
    let err = studies::run(&c).unwrap_err();
    assert!(matches!(err, StudyError::Config(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn output_names_stay_inside_the_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let mut out = OutputDir::create(tmp.path()).unwrap();
    for bad in ["../x.csv", "a/b.csv", "", ".", "..", "/etc/x"] {
        assert!(out.write(bad, b"x").is_err(), "{bad:?} accepted");
    }
    out.write("ok.csv", b"a,b\n").unwrap();
    assert_eq!(out.files(), ["ok.csv"]);
    assert_eq!(std::fs::read(tmp.path().join("ok.csv")).unwrap(), b"a,b\n");
}

#[test]
fn fault_lab_names_its_manifest_after_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = StudyConfig::new(StudyKind::FaultLab);
    c.out = tmp.path().to_path_buf();
    c.fault_lab.as_mut().unwrap().file = Some("case1.csv".into());
    let m = studies::run(&c).unwrap();
    assert_eq!(m.outputs.len(), 1);
    assert_eq!(m.outputs[0].name, "case1.csv");
    let mut rd = csv::Reader::from_path(tmp.path().join("case1.csv")).unwrap();
    assert_eq!(rd.records().count(), 209);
    assert!(tmp.path().join("case1.manifest.json").exists());
}

#[test]
fn dist_summary_lists_the_case() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = StudyConfig::new(StudyKind::Dist);
    c.out = tmp.path().to_path_buf();
    let p = c.dist.as_mut().unwrap();
    p.case = DistCase::B2;
    p.runs = 50;
    studies::run(&c).unwrap();
    let s = std::fs::read_to_string(tmp.path().join("summary.txt")).unwrap();
    assert!(s.lines().any(|l| l == "Case = B2"), "{s}");
    let mut rd = csv::Reader::from_path(tmp.path().join("runs.csv")).unwrap();
    assert!(rd.records().count() > 0);
}

#[test]
fn reruns_reproduce_every_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = StudyConfig::new(StudyKind::Lightning);
    c.lightning.as_mut().unwrap().n = 150;
    c.seed = 5;
    let mut bytes = Vec::new();
    for k in 0..2 {
        c.out = tmp.path().join(k.to_string());
        studies::run(&c).unwrap();
        bytes.push(std::fs::read(c.out.join("events.csv")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    c.seed = 6;
    c.out = tmp.path().join("other");
    studies::run(&c).unwrap();
    assert_ne!(std::fs::read(c.out.join("events.csv")).unwrap(), bytes[0]);
}
