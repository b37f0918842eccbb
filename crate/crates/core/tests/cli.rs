//! Drives the `texfrac` binary through a full synth / extract / train /
//! predict / evaluate cycle in a scratch directory.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn texfrac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_texfrac")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = texfrac(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn full_cycle_vote_mode() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--out-dir", p(&data), "--preset", "separable", "--n-per-class", "4", "--size", "32", "--seed", "3"]);
    let manifest = fs::read_to_string(data.join("manifest.csv")).unwrap();
    let rows = data_lines(&manifest);
    assert_eq!(rows[0], "path,label,kind,params");
    assert_eq!(rows.len(), 9);
    assert!(rows[1].starts_with("a_000.pgm,1,rough_field,size=32;levels=256;h=0.2;"), "{}", rows[1]);
    assert!(rows[8].starts_with("b_007.pgm,-1,rough_field,"), "{}", rows[8]);

    let features = dir.path().join("features.csv");
    let dumps = dir.path().join("loglog");
    ok(&["extract", "--manifest", p(&data.join("manifest.csv")), "--out", p(&features), "--loglog-dump", p(&dumps), "--svm-iterations", "5000"]);
    let text = fs::read_to_string(&features).unwrap();
    assert!(text.contains("# svm_iterations=5000\n"));
    let rows = data_lines(&text);
    assert_eq!(rows[0], "path,label,fractal_dim,alpha_peak,f_max,spectrum_width,contrast,correlation,energy,homogeneity");
    assert_eq!(rows.len(), 9);
    let dump = fs::read_to_string(dumps.join("a_000.loglog.csv")).unwrap();
    assert!(dump.starts_with("lambda,count\n"), "{dump}");

    let model = dir.path().join("model.svm");
    ok(&["train", "--features", p(&features), "--out", p(&model), "--fusion-mode", "vote", "--svm-iterations", "5000"]);
    let fractal = dir.path().join("model.fractal.svm");
    let glcm = dir.path().join("model.glcm.svm");
    assert!(fs::read_to_string(&fractal).unwrap().starts_with("texfrac-svm v1\nfractal\n"));
    assert!(fs::read_to_string(&glcm).unwrap().starts_with("texfrac-svm v1\nglcm\n"));

    let preds = dir.path().join("pred.csv");
    ok(&["predict", "--model", p(&fractal), p(&glcm), "--features", p(&features), "--out", p(&preds)]);
    let text = fs::read_to_string(&preds).unwrap();
    let rows = data_lines(&text);
    assert_eq!(rows[0], "path,label,predicted,score");
    let correct = rows[1..].iter().filter(|r| {
        let f: Vec<&str> = r.split(',').collect();
        f[1] == f[2]
    });
    assert_eq!(correct.count(), 8, "{text}");

    let metrics = dir.path().join("metrics.csv");
    let out = ok(&["evaluate", "--features", p(&features), "--out", p(&metrics), "--paper-eq2", "--svm-iterations", "5000"]);
    let text = fs::read_to_string(&metrics).unwrap();
    let rows = data_lines(&text);
    assert_eq!(rows[0], "method,sensitivity,specificity,ccr,specificity_eq2");
    assert_eq!(rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect::<Vec<_>>(), ["fractal", "glcm", "combined"]);
    assert!(rows[3].starts_with("combined,100.0000,100.0000,100.0000"), "{text}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("combined: sensitivity 100.00%"), "{stdout}");
}

#[test]
fn perfect_separation_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let features = dir.path().join("features.csv");
    let mut text = String::from("path,label,fractal_dim,alpha_peak,f_max,spectrum_width,contrast,correlation,energy,homogeneity\n");
    for i in 0..10 {
        let (label, x) = if i < 5 { ("1", 1.0) } else { ("-1", -1.0) };
        let v = x + 0.01 * i as f64;
        text += &format!("img{i}.pgm,{label},{v},{v},{v},{v},{v},,{v},{v}\n");
    }
    fs::write(&features, text).unwrap();
    let metrics = dir.path().join("metrics.csv");
    ok(&["evaluate", "--features", p(&features), "--out", p(&metrics)]);
    let text = fs::read_to_string(&metrics).unwrap();
    for row in &data_lines(&text)[1..] {
        assert!(row.ends_with(",100.0000,100.0000,100.0000"), "{row}");
    }
}

#[test]
fn extract_reports_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut good = String::from("P2\n8 8\n3\n");
    for y in 0..8 {
        let row: Vec<String> = (0..8).map(|x| ((x * y + x) % 4).to_string()).collect();
        good += &(row.join(" ") + "\n");
    }
    fs::write(dir.path().join("good.pgm"), good).unwrap();
    fs::write(dir.path().join("bad.pgm"), "P9\n").unwrap();
    fs::write(dir.path().join("manifest.csv"), "path,label\ngood.pgm,1\nbad.pgm,-1\n").unwrap();
    let out = texfrac(&["extract", "--manifest", p(&dir.path().join("manifest.csv")), "--out", p(&dir.path().join("f.csv"))]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("bad.pgm"), "{stderr}");
    assert!(!stderr.contains("good.pgm"), "{stderr}");
}

#[test]
fn rejects_unknown_flag_values() {
    assert!(!texfrac(&["evaluate", "--features", "x", "--out", "y", "--feature-mask", "texture"]).status.success());
    assert!(!texfrac(&["train", "--features", "x", "--out", "y", "--fusion-mode", "late"]).status.success());
    assert!(!texfrac(&["predict", "--features", "x", "--out", "y"]).status.success());
}
