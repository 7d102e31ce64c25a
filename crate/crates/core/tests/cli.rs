use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ptpinn::cli::load_config;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn ptpinn(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptpinn"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("PTPINN_OUTPUT_ROOT")
        .current_dir(root)
        .output()
        .unwrap()
}

#[test]
fn shipped_configs_parse() {
    let mut count = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "conf") {
            load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 12);
}

#[test]
fn smoke_run_is_reproducible_and_tabulates() {
    let dir = tempfile::tempdir().unwrap();
    let config = configs_dir().join("smoke.conf");
    let config = config.to_str().unwrap();
    let mut results = Vec::new();
    for sub in ["a", "b"] {
        let out = ptpinn(&["run", config, "--output-root", sub], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let csv = dir.path().join(sub).join("results/smoke/results.csv");
        results.push(std::fs::read(&csv).unwrap());
        assert!(csv.with_file_name("timing.csv").exists());
        assert!(csv.with_file_name("replicate_1").join("final.ckpt").exists());
    }
    assert_eq!(results[0], results[1]);

    let out = ptpinn(&["table", "reaction", "a/results/smoke/results.csv"], dir.path());
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.lines().any(|l| l.starts_with("5,pt_pinn_k1,")), "{table}");

    let out = ptpinn(
        &[
            "profile",
            "a/results/smoke/replicate_0/final.ckpt",
            config,
            "t=1",
            "--points",
            "11",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 12);
}

#[test]
fn bad_config_reports_line_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.conf");
    std::fs::write(&path, "benchmark = reaction\nadam.stepz = 10\n").unwrap();
    let out = ptpinn(&["run", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("adam.stepz"), "{err}");
}

#[test]
fn missing_allen_cahn_reference_names_the_generator() {
    let dir = tempfile::tempdir().unwrap();
    let config = configs_dir().join("allen_cahn_pt1.conf");
    let out = ptpinn(&["run", config.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ac-reference"));
}
