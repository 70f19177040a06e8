use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn layerfield(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_layerfield"));
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.arg("--output").arg(out).args(args).output().expect("binary runs")
}

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join(format!("cfg{}.toml", extra.len()));
    std::fs::write(&path, format!("[lattice]\norder = 6\n{extra}")).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn no_subcommand_prints_usage_and_exits_2() {
    let o = Command::new(env!("CARGO_BIN_EXE_layerfield")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("Usage"));
}

#[test]
fn invalid_config_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "lambda = -1.0\n");
    let o = layerfield(&["synthesize"], Some(&cfg), tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("lattice.lambda"), "{}", stderr(&o));

    let cfg = small_config(tmp.path(), "bogus_key = 1\n");
    let o = layerfield(&["synthesize"], Some(&cfg), tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("bogus_key"), "{}", stderr(&o));
}

#[test]
fn synthesis_is_byte_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(layerfield(&["synthesize"], Some(&cfg), &a).status.success());
    assert!(layerfield(&["synthesize"], Some(&cfg), &b).status.success());
    for f in ["lattice.csv", "farfield.csv", "phaseless.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn zero_source_gives_zero_field_and_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "[source]\nkind = \"zero\"\n");
    assert!(layerfield(&["synthesize"], Some(&cfg), tmp.path()).status.success());
    let far = std::fs::read_to_string(tmp.path().join("farfield.csv")).unwrap();
    let rows: Vec<&str> = far.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert!(!rows.is_empty());
    for r in rows {
        let cells: Vec<&str> = r.split(',').collect();
        let re: f64 = cells[cells.len() - 2].parse().unwrap();
        let im: f64 = cells[cells.len() - 1].parse().unwrap();
        assert_eq!((re, im), (0.0, 0.0));
    }
    let ph = std::fs::read_to_string(tmp.path().join("phaseless.csv")).unwrap();
    let header: Vec<&str> = ph.lines().find(|l| !l.starts_with('#')).unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "degenerate").unwrap();
    for r in ph.lines().filter(|l| !l.starts_with('#')).skip(1) {
        assert_eq!(r.split(',').nth(col), Some("1"));
    }
}

#[test]
fn corrupted_row_reports_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    assert!(layerfield(&["synthesize"], Some(&cfg), tmp.path()).status.success());
    let path = tmp.path().join("phaseless.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[7] = lines[7].replacen(',', ",not-a-number,", 1);
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let o = layerfield(&["retrieve"], Some(&cfg), tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 8"), "{}", stderr(&o));
}

#[test]
fn artifacts_from_another_config_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let a = small_config(tmp.path(), "");
    let b = small_config(tmp.path(), "lambda = 0.002\n");
    assert!(layerfield(&["synthesize"], Some(&a), tmp.path()).status.success());
    let o = layerfield(&["retrieve"], Some(&b), tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("refusing to mix"), "{}", stderr(&o));
}

#[test]
fn subcommands_chain_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    for cmd in ["synthesize", "retrieve", "invert", "evaluate"] {
        let o = layerfield(&[cmd], Some(&cfg), tmp.path());
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
    }
    for f in ["retrieval.csv", "retrieve_metrics.json", "coefficients.csv", "reconstruction.csv", "evaluate.json"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("evaluate.json")).unwrap()).unwrap();
    let l2 = m.as_array().unwrap().iter().find(|r| r["metric"] == "err_l2").unwrap()["value"].as_f64().unwrap();
    assert!(l2 <= 1e-10, "{l2}");
}
