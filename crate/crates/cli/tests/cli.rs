use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sshift(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sshift"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SSHIFT_TOL")
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn verify_passes_for_the_free_operator() {
    let dir = tempfile::tempdir().unwrap();
    let out = sshift(&["verify"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], serde_json::Value::Bool(true));
}

#[test]
fn scatter_writes_one_row_per_wavenumber() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("square_well.toml");
    let out = sshift(&["--config", cfg.to_str().unwrap(), "scatter"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("scatter.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let defect = headers.iter().position(|h| h == "unitarity_defect").unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 100);
    for r in &rows {
        assert!(r[defect].parse::<f64>().unwrap() < 1e-8);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = config("square_well.toml");
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    for dir in [&first, &second] {
        assert!(sshift(&["--config", cfg.to_str().unwrap(), "scatter"], dir.path()).status.success());
        assert!(sshift(&["--config", cfg.to_str().unwrap(), "--threads", "1", "fse"], dir.path()).status.success());
    }
    for name in ["scatter.csv", "fse.json"] {
        let a = std::fs::read(first.path().join(name)).unwrap();
        let b = std::fs::read(second.path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.toml");
    assert_eq!(sshift(&["--config", missing.to_str().unwrap(), "scatter"], dir.path()).status.code(), Some(2));

    let typo = write_config(dir.path(), "[physics]\nnu = 2.0\nnuu = 3.0\n");
    let out = sshift(&["--config", typo.to_str().unwrap(), "fumi"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nuu"));

    let bad_bc = write_config(dir.path(), "[boundary]\npreset = \"sideways\"\n");
    assert_eq!(sshift(&["--config", bad_bc.to_str().unwrap(), "boxspec"], dir.path()).status.code(), Some(2));

    assert_eq!(sshift(&["--tol", "-1", "verify"], dir.path()).status.code(), Some(2));
}

#[test]
fn halfline_run_rejects_support_on_the_negative_axis() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("square_well.toml");
    let out = sshift(&["--config", cfg.to_str().unwrap(), "fse", "--halfline"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn halfline_energy_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("halfline_well.toml");
    let out = sshift(&["--config", cfg.to_str().unwrap(), "fse", "--halfline"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("fse_halfline.json").exists());
}

#[test]
fn tight_tolerance_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("square_well.toml");
    let out = sshift(&["--config", cfg.to_str().unwrap(), "--tol", "1e-300", "verify"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn converge_writes_an_ordered_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[potential]\nkind = \"square_well\"\nvalue = -2.0\nleft = -1.0\nright = 1.0\n\n[physics]\neta = 0.5\n\n[converge]\nn_min = 10\nn_max = 30\nn_step = 10\n",
    );
    let out = sshift(&["--config", cfg.to_str().unwrap(), "converge"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("converge.csv")).unwrap();
    let ls: Vec<f64> = reader.records().map(|r| r.unwrap()[0].parse().unwrap()).collect();
    assert_eq!(ls.len(), 3);
    assert!(ls.windows(2).all(|w| w[0] < w[1]));
    assert!(dir.path().join("converge_summary.json").exists());
}
