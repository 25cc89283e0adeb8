use std::path::Path;
use std::process::{Command, Output};

use cabling::central::{Configuration, SpectrumReport};
use cabling::io::{self, read_document};
use tempfile::TempDir;

fn cabling(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cabling")).current_dir(dir).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn triangle(dir: &Path) {
    let out = cabling(dir, &["central", "lagrange", "--ring", "3", "--alpha", "1", "--name", "tri"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn central_maxwell_writes_both_documents() {
    let tmp = TempDir::new().unwrap();
    let out = cabling(tmp.path(), &["central", "maxwell", "--n", "7", "--mu", "1", "--alpha", "2", "--out", "cc"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let cfg: Configuration = read_document(&tmp.path().join("cc/configuration.json"), io::CONFIGURATION).unwrap();
    let g = cabling::central::grad_v(&cfg).unwrap();
    assert!(g.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-10);
    let report: SpectrumReport =
        read_document(&tmp.path().join("cc/configuration.spectrum.json"), io::SPECTRUM).unwrap();
    assert_eq!(report.kernel_dim, 1);
}

#[test]
fn central_triangle_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    triangle(tmp.path());
    let first = std::fs::read(tmp.path().join("tri.json")).unwrap();
    triangle(tmp.path());
    assert_eq!(std::fs::read(tmp.path().join("tri.json")).unwrap(), first);
    let cfg: Configuration = read_document(&tmp.path().join("tri.json"), io::CONFIGURATION).unwrap();
    // Unit triangle: Σ (e₀ - e_k)/|e₀ - e_k|² = e₀, so r² = 1.
    assert!((cfg.radius() - 1.0).abs() < 1e-12);
}

#[test]
fn degenerate_heptagon_needs_the_flag() {
    let tmp = TempDir::new().unwrap();
    let args = ["central", "lagrange", "--ring", "7", "--alpha", "1"];
    let out = cabling(tmp.path(), &args);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(tmp.path().join("configuration.spectrum.json").exists());
    let mut allowed = args.to_vec();
    allowed.push("--allow-degenerate");
    assert_eq!(code(&cabling(tmp.path(), &allowed)), 0);
}

#[test]
fn colliding_custom_input_is_a_domain_error() {
    let tmp = TempDir::new().unwrap();
    let bad = Configuration::new(1.0, 1, vec![1.0, 1.0], vec![vec![0.5, 0.0], vec![0.5, 0.0]]).unwrap();
    io::write_document(&tmp.path().join("bad.json"), &bad, io::CONFIGURATION, io::FloatFormat::Decimal).unwrap();
    let out = cabling(tmp.path(), &["central", "custom", "--in", "bad.json"]);
    assert_eq!(code(&out), 5, "{}", stderr(&out));
    assert!(stderr(&out).contains("domain error"));
}

#[test]
fn cable_certifies_a_triangle_orbit() {
    let tmp = TempDir::new().unwrap();
    triangle(tmp.path());
    let out = cabling(
        tmp.path(),
        &["cable", "--config", "tri.json", "--pq", "25", "1", "--sign", "prograde", "--case", "c1", "--out", "o"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let braid: serde_json::Value = read_document(&tmp.path().join("o/braid.json"), io::BRAID).unwrap();
    assert_eq!(braid["pair_winding"], 25);
    assert_eq!(braid["center_windings"], serde_json::json!([1, 1, 1]));
    let csv = std::fs::read_to_string(tmp.path().join("o/trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,body,x,y\n"));
    let orbit: serde_json::Value = read_document(&tmp.path().join("o/orbit.json"), io::ORBIT).unwrap();
    assert_eq!(orbit["diagnostics"]["passed"], true);

    let out = cabling(tmp.path(), &["cable", "--config", "tri.json", "--pq", "25", "1", "--sign", "retrograde", "--out", "r"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let braid: serde_json::Value = read_document(&tmp.path().join("r/braid.json"), io::BRAID).unwrap();
    assert_eq!(braid["pair_winding"], -25);
}

#[test]
fn cable_is_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    triangle(tmp.path());
    for dir in ["a", "b"] {
        let out = cabling(tmp.path(), &["cable", "--config", "tri.json", "--pq", "16", "1", "--l", "16", "--hex", "--out", dir]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for file in ["orbit.json", "braid.json", "trajectory.csv"] {
        assert_eq!(
            std::fs::read(tmp.path().join("a").join(file)).unwrap(),
            std::fs::read(tmp.path().join("b").join(file)).unwrap()
        );
    }
}

#[test]
fn cable_refuses_a_wide_pair_and_a_missing_symmetry() {
    let tmp = TempDir::new().unwrap();
    triangle(tmp.path());
    let out = cabling(tmp.path(), &["cable", "--config", "tri.json", "--epsilon", "0.5"]);
    assert_eq!(code(&out), 5, "{}", stderr(&out));
    let out = cabling(tmp.path(), &["cable", "--config", "tri.json", "--pq", "25", "1", "--case", "c2", "--m", "6"]);
    assert_eq!(code(&out), 5);
    let out = cabling(tmp.path(), &["cable", "--config", "tri.json", "--case", "c2", "--pq", "25", "1"]);
    assert_eq!(code(&out), 2);
    let out = cabling(tmp.path(), &["cable", "--config", "tri.json"]);
    assert_eq!(code(&out), 2);
    let out = cabling(tmp.path(), &["cable", "--config", "tri.json", "--epsilon", "0.1", "--pq", "9", "1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn failed_certification_names_the_check() {
    let tmp = TempDir::new().unwrap();
    triangle(tmp.path());
    let out = cabling(tmp.path(), &["cable", "--config", "tri.json", "--pq", "16", "1", "--l", "16", "--gtol", "1e-9"]);
    assert_eq!(code(&out), 0);
    std::fs::write(tmp.path().join("strict.toml"), "config = \"tri.json\"\npq = [16, 1]\n[refine]\nl = 16\n[thresholds]\node = 1e-30\n").unwrap();
    let out = cabling(tmp.path(), &["cable", "--job", "strict.toml", "--out", "s"]);
    assert_eq!(code(&out), 6, "{}", stderr(&out));
    assert!(stderr(&out).contains("ode_rk"));
    assert!(tmp.path().join("s/orbit.json").exists());
}

#[test]
fn job_files_are_checked() {
    let tmp = TempDir::new().unwrap();
    triangle(tmp.path());
    std::fs::write(tmp.path().join("typo.toml"), "config = \"tri.json\"\npq = [16, 1]\nsplt = 0.3\n").unwrap();
    assert_eq!(code(&cabling(tmp.path(), &["cable", "--job", "typo.toml"])), 1);
    std::fs::write(tmp.path().join("job.toml"), "config = \"tri.json\"\nepsilon = 0.05\n[refine]\nl = 16\n").unwrap();
    let out = cabling(tmp.path(), &["cable", "--job", "job.toml", "--out", "j"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(tmp.path().join("j/orbit.json").exists());
    assert!(!tmp.path().join("j/braid.json").exists());
}

#[test]
fn sweep_tabulates_ratios() {
    let tmp = TempDir::new().unwrap();
    triangle(tmp.path());
    let out = Command::new(env!("CARGO_BIN_EXE_cabling"))
        .current_dir(tmp.path())
        .env("CABLING_THREADS", "2")
        .args(["sweep", "--config", "tri.json", "--p", "16,25,36", "--out", "s.csv"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(tmp.path().join("s.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    let ratio = |r: &Vec<&str>| r[8].parse::<f64>().unwrap();
    for (r, p) in rows.iter().zip(["16", "25", "36"]) {
        assert_eq!(r[0], p);
        assert_eq!(r[2], "certified");
        assert_eq!(r[6], p);
    }
    // Both ratio columns fall off like ε, so divided once more they stay
    // within a factor 2.
    for col in [7, 8] {
        let scaled: Vec<f64> = rows.iter().map(|r| r[col].parse::<f64>().unwrap() / r[1].parse::<f64>().unwrap()).collect();
        let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        assert!(hi < 2.0 * lo, "column {col}: {scaled:?}");
    }
    assert!(ratio(&rows[2]) < ratio(&rows[1]) && ratio(&rows[1]) < ratio(&rows[0]));
}

#[test]
fn sweep_usage_errors() {
    let tmp = TempDir::new().unwrap();
    triangle(tmp.path());
    assert_eq!(code(&cabling(tmp.path(), &["sweep", "--config", "tri.json"])), 2);
    assert_eq!(code(&cabling(tmp.path(), &["sweep", "--config", "tri.json", "--p-range", "30", "20", "1"])), 2);
    let out = Command::new(env!("CARGO_BIN_EXE_cabling"))
        .current_dir(tmp.path())
        .env("CABLING_THREADS", "many")
        .args(["sweep", "--config", "tri.json", "--p", "16"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn sweep_keeps_going_past_failures() {
    let tmp = TempDir::new().unwrap();
    triangle(tmp.path());
    let out = cabling(tmp.path(), &["sweep", "--config", "tri.json", "--epsilon", "0.05,0.5", "--l", "16", "--out", "e.csv"]);
    assert_eq!(code(&out), 6);
    let text = std::fs::read_to_string(tmp.path().join("e.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].contains(",certified,"));
    assert!(lines[2].contains(",error,") && lines[2].contains("admissible"));
}
