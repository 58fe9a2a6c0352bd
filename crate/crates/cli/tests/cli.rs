use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::DMatrix;
use serde_json::Value;
use tempfile::TempDir;
use turnover_core::clusters::BinaryLoadings;
use turnover_core::factor_model::ClusterSpec;
use turnover_core::panel::{pairwise_correlation, AlphaPanel, CorrelationMatrix, NaPolicy};
use turnover_core::synth::gen_panel;

fn turnover(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_turnover")).args(args).output().expect("binary runs")
}

fn ok_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_corr(dir: &TempDir, name: &str, corr: &CorrelationMatrix) -> PathBuf {
    let path = dir.path().join(name);
    corr.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    path
}

fn write_panel(dir: &TempDir, name: &str, panel: &AlphaPanel) -> PathBuf {
    let path = dir.path().join(name);
    panel.write_csv(std::fs::File::create(&path).unwrap(), NaPolicy::EmptyCell).unwrap();
    path
}

fn write_loadings(dir: &TempDir, name: &str, labels: &[String], assign: &[usize], f: usize) -> PathBuf {
    let path = dir.path().join(name);
    let l = BinaryLoadings::new(labels.to_vec(), assign.to_vec(), f).unwrap();
    l.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    path
}

fn write_model(dir: &TempDir, json: &str) -> PathBuf {
    let path = dir.path().join("model.json");
    std::fs::write(&path, json).unwrap();
    path
}

fn read_csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn analyze_identity_correlation() {
    let dir = TempDir::new().unwrap();
    let corr = write_corr(&dir, "id.csv", &CorrelationMatrix::uniform(16, 0.0).unwrap());
    let v = ok_json(&turnover(&["analyze", "--corr", s(&corr)]));
    assert_eq!(v["rho_star"].as_f64().unwrap(), 0.0625);
    assert_eq!(v["n"], 16);
}

#[test]
fn analyze_uniform_panel() {
    // one cluster with unit factor and specific variance: every pairwise correlation is 1/2
    let dir = TempDir::new().unwrap();
    ok_json(&turnover(&[
        "synth", "--n-alphas", "10", "--n-clusters", "1", "--n-obs", "20000", "--seed", "11", "--out-dir",
        s(dir.path()),
    ]));
    let v = ok_json(&turnover(&["analyze", s(&dir.path().join("panel.csv"))]));
    let rho = v["rho_star"].as_f64().unwrap();
    assert!((rho - 0.55).abs() < 0.02, "{rho}");
    assert_eq!(v["n_obs"], 20000);
}

#[test]
fn analyze_writes_out_file() {
    let dir = TempDir::new().unwrap();
    let corr = write_corr(&dir, "u.csv", &CorrelationMatrix::uniform(5, 0.2).unwrap());
    let out = dir.path().join("report.json");
    let res = turnover(&["analyze", "--corr", s(&corr), "--out", s(&out)]);
    assert!(res.status.success() && res.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert!((v["rho_star"].as_f64().unwrap() - 1.8 / 5.0).abs() < 1e-12);
}

#[test]
fn missing_file_exits_2_and_names_path() {
    let out = turnover(&["analyze", "/no/such/panel.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("/no/such/panel.csv") && err.contains("load"), "{err}");
}

#[test]
fn analyze_names_failing_stage() {
    let dir = TempDir::new().unwrap();
    let panel = AlphaPanel::from_matrix(
        vec!["a".into(), "b".into()],
        (1..=4).map(|t| t.to_string()).collect(),
        patterned(4, 2),
    )
    .unwrap();
    let path = write_panel(&dir, "short.csv", &panel);
    let out = turnover(&["analyze", s(&path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("correlation:"), "{}", stderr(&out));
}

fn patterned(rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |t, i| ((t * 7 + i * 3) % 5) as f64)
}

#[test]
fn clusters_uniform_sweep() {
    let dir = TempDir::new().unwrap();
    let corr = write_corr(&dir, "u.csv", &CorrelationMatrix::uniform(4, 0.5).unwrap());
    let v = ok_json(&turnover(&["clusters", s(&corr), "--kmax", "2", "--out-dir", s(dir.path())]));
    assert!(v["knee"].is_null());
    let rows = read_csv_rows(&dir.path().join("sweep.csv"));
    assert_eq!(rows[0], ["K", "zeta1", "zeta2"]);
    assert_eq!(rows[1][0], "1");
    for cell in &rows[1][1..] {
        assert!((cell.parse::<f64>().unwrap() + 1.0 / 3.0).abs() < 1e-12);
    }
    assert!(dir.path().join("knee.json").exists());
}

#[test]
fn clusters_rejects_kmax_at_least_n() {
    let dir = TempDir::new().unwrap();
    let corr = write_corr(&dir, "u.csv", &CorrelationMatrix::uniform(4, 0.5).unwrap());
    for k in ["4", "9"] {
        let out = turnover(&["clusters", s(&corr), "--kmax", k, "--out-dir", s(dir.path())]);
        assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    }
}

#[test]
fn clusters_non_pd_needs_deform() {
    let dir = TempDir::new().unwrap();
    let ones = CorrelationMatrix::from_matrix(DMatrix::from_element(4, 4, 1.0)).unwrap();
    let corr = write_corr(&dir, "ones.csv", &ones);
    let out = turnover(&["clusters", s(&corr), "--kmax", "2", "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sweep"), "{}", stderr(&out));
    let v = ok_json(&turnover(&["clusters", s(&corr), "--kmax", "2", "--deform", "--out-dir", s(dir.path())]));
    assert_eq!(v["deformed"], true);
}

#[test]
fn clusters_knee_on_seven_cluster_panel() {
    let dir = TempDir::new().unwrap();
    let spec = ClusterSpec::new(vec![30, 35, 40, 45, 50, 55, 60], vec![1.0; 7], vec![0.5; 7]).unwrap();
    let panel = gen_panel(&spec.to_model(), 5000, 7).unwrap();
    let corr = write_corr(&dir, "c.csv", &pairwise_correlation(&panel, 12).unwrap());
    let v = ok_json(&turnover(&["clusters", s(&corr), "--kmax", "12", "--out-dir", s(dir.path())]));
    let knee = v["knee"].as_u64().unwrap();
    assert!((6..=9).contains(&knee), "{knee}");
    assert_eq!(read_csv_rows(&dir.path().join("sweep.csv")).len(), 13);
}

#[test]
fn model_eigen_pure_clusters() {
    let dir = TempDir::new().unwrap();
    let m = write_model(&dir, r#"{"mode": "binary", "sizes": [3, 1]}"#);
    let v = ok_json(&turnover(&["model", "eigen", s(&m)]));
    let values: Vec<(f64, u64)> = v["values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e["value"].as_f64().unwrap(), e["mult"].as_u64().unwrap()))
        .collect();
    assert_eq!(values, vec![(3.0, 1), (1.0, 1), (0.0, 2)]);
    assert_eq!(v["method"], "closed-form");
    let dense = ok_json(&turnover(&["model", "eigen", s(&m), "--dense"]));
    assert_eq!(dense["method"], "dense");
    assert!((dense["values"][0]["value"].as_f64().unwrap() - 3.0).abs() < 1e-12);
}

#[test]
fn model_rho_star_tags_method() {
    let dir = TempDir::new().unwrap();
    let m = write_model(&dir, r#"{"mode": "binary", "sizes": [3, 1]}"#);
    let closed = ok_json(&turnover(&["model", "rho-star", s(&m)]));
    let dense = ok_json(&turnover(&["model", "rho-star", s(&m), "--method", "dense"]));
    assert_eq!(closed["method"], "closed-form");
    assert_eq!(dense["method"], "dense");
    let expect = 0.75f64.powf(1.5);
    assert!((closed["rho_star"].as_f64().unwrap() - expect).abs() < 1e-15);
    assert!((dense["rho_star"].as_f64().unwrap() - expect).abs() < 1e-12);

    let nondiag = write_model(&dir, r#"{"mode": "binary", "sizes": [2, 3], "phi": [[1, 0.4], [0.4, 1]]}"#);
    let v = ok_json(&turnover(&["model", "rho-star", s(&nondiag)]));
    let d = ok_json(&turnover(&["model", "rho-star", s(&nondiag), "--method", "dense"]));
    assert_eq!(v["method"], "reduced-nondiagonal");
    assert!((v["rho_star"].as_f64().unwrap() - d["rho_star"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn model_rho_curve() {
    let dir = TempDir::new().unwrap();
    let m = write_model(&dir, r#"{"mode": "binary", "sizes": [3, 1]}"#);
    let out = dir.path().join("curve.csv");
    assert!(turnover(&["model", "rho-curve", s(&m), "--grid", "0,0.5", "--out", s(&out)]).status.success());
    let rows = read_csv_rows(&out);
    assert_eq!(rows[0], ["rho", "psi_star"]);
    let psi: Vec<f64> = rows[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(psi[0], 3.0);
    assert!((psi[1] - 0.5 * (4.0 + 7f64.sqrt())).abs() < 1e-12);
    assert!((psi[1] - 3.3229).abs() < 1e-4);
}

#[test]
fn model_sweep_f_power_law() {
    let dir = TempDir::new().unwrap();
    let m = write_model(&dir, &format!(r#"{{"mode": "binary", "sizes": {:?}}}"#, vec![64; 32]));
    let out = dir.path().join("f.csv");
    assert!(turnover(&["model", "sweep-f", s(&m), "--fmax", "32", "--out", s(&out)]).status.success());
    let rows = read_csv_rows(&out);
    assert_eq!(rows[0], ["F", "rho_star_min"]);
    assert_eq!(rows.len(), 33);
    for r in &rows[1..] {
        let f: f64 = r[0].parse().unwrap();
        assert_eq!(r[1].parse::<f64>().unwrap(), f.powf(-1.5));
    }
}

#[test]
fn model_schema_error_reports_pointer() {
    let dir = TempDir::new().unwrap();
    let m = write_model(&dir, r#"{"mode": "binary", "sizes": [2, 2], "phi": [1.0, -3.0]}"#);
    let out = turnover(&["model", "eigen", s(&m)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/phi"), "{}", stderr(&out));

    let m = write_model(&dir, r#"{"mode": "binary", "sizes": [2, 2], "colour": 1}"#);
    let out = turnover(&["model", "rho-star", s(&m)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/colour"), "{}", stderr(&out));

    let m = write_model(&dir, "{not json");
    assert_eq!(turnover(&["model", "eigen", s(&m)]).status.code(), Some(2));
}

#[test]
fn synth_is_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = |d: &TempDir| {
        vec![
            "synth".to_string(), "--seed".into(), "5".into(), "--n-alphas".into(), "12".into(), "--n-clusters".into(),
            "4".into(), "--n-obs".into(), "64".into(), "--xi-range".into(), "0.5,1.5".into(), "--factor-rho".into(),
            "random".into(), "--out-dir".into(), d.path().display().to_string(),
        ]
    };
    for d in [&a, &b] {
        let v: Vec<String> = args(d);
        let refs: Vec<&str> = v.iter().map(String::as_str).collect();
        ok_json(&turnover(&refs));
    }
    for f in ["panel.csv", "model.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let model: Value = serde_json::from_slice(&std::fs::read(a.path().join("model.json")).unwrap()).unwrap();
    assert_eq!(model["sizes"], serde_json::json!([3, 3, 3, 3]));
}

#[test]
fn synth_round_trip() {
    let dir = TempDir::new().unwrap();
    ok_json(&turnover(&[
        "synth", "--seed", "2", "--n-alphas", "20", "--n-clusters", "2", "--n-obs", "20000", "--factor-rho", "0.5",
        "--sizes", "random", "--out-dir", s(dir.path()),
    ]));
    let truth = ok_json(&turnover(&["model", "rho-star", s(&dir.path().join("model.json")), "--method", "dense"]));
    let est = ok_json(&turnover(&["analyze", s(&dir.path().join("panel.csv"))]));
    let (t, e) = (truth["rho_star"].as_f64().unwrap(), est["rho_star"].as_f64().unwrap());
    assert!((t - e).abs() < 0.02, "model {t}, estimate {e}");
}

#[test]
fn synth_rejects_bad_config() {
    let dir = TempDir::new().unwrap();
    let out = turnover(&["synth", "--n-alphas", "3", "--n-clusters", "5", "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let out = turnover(&["synth", "--factor-rho", "lots", "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

struct FtestFiles {
    _dir: TempDir,
    args: Vec<String>,
}

fn ftest_fixture(replicate: bool, seed: u64) -> FtestFiles {
    let dir = TempDir::new().unwrap();
    let (old, full, assign_old, assign_new) = if replicate {
        let spec = ClusterSpec::new(vec![10; 4], vec![1.0; 4], vec![1.0; 4]).unwrap();
        let old = gen_panel(&spec.to_model(), 250, seed).unwrap();
        let mut values = DMatrix::zeros(250, 60);
        values.columns_mut(0, 40).copy_from(old.values());
        for (c, src) in (0..4).flat_map(|a| (0..5).map(move |k| 10 * a + k)).enumerate() {
            values.column_mut(40 + c).copy_from(&old.values().column(src));
        }
        let mut labels = old.labels().to_vec();
        labels.extend((1..=20).map(|k| format!("copy{k}")));
        let full = AlphaPanel::from_matrix(labels, old.times().to_vec(), values).unwrap();
        let mut assign = spec.assignment().to_vec();
        assign.extend(std::iter::repeat_n(4, 20));
        (old, full, spec.assignment().to_vec(), assign)
    } else {
        let spec = ClusterSpec::new(vec![10, 10, 10, 10, 20], vec![1.0; 5], vec![1.0; 5]).unwrap();
        let full = gen_panel(&spec.to_model(), 250, seed).unwrap();
        let old = AlphaPanel::from_matrix(
            full.labels()[..40].to_vec(),
            full.times().to_vec(),
            full.values().columns(0, 40).into_owned(),
        )
        .unwrap();
        (old, full, spec.assignment()[..40].to_vec(), spec.assignment().to_vec())
    };
    let p_old = write_panel(&dir, "old.csv", &old);
    let p_new = write_panel(&dir, "new.csv", &full);
    let o_old = write_loadings(&dir, "omega_old.csv", old.labels(), &assign_old, 4);
    let o_new = write_loadings(&dir, "omega_new.csv", full.labels(), &assign_new, 5);
    let args = [p_old.clone(), o_old, p_new, o_new]
        .iter()
        .map(|p| p.display().to_string())
        .chain(["--out-dir".into(), dir.path().join("out").display().to_string()])
        .collect();
    FtestFiles { _dir: dir, args }
}

fn run_ftest(fx: &FtestFiles) -> Output {
    let mut args = vec!["ftest"];
    args.extend(fx.args.iter().map(String::as_str));
    turnover(&args)
}

#[test]
fn ftest_verdicts() {
    let fresh = ftest_fixture(false, 1);
    let v = ok_json(&run_ftest(&fresh));
    assert_eq!(v["verdict"], true);
    let out_dir = PathBuf::from(fresh.args.last().unwrap());
    let rows = read_csv_rows(&out_dir.join("ftest.csv"));
    assert_eq!(rows[0], ["time", "f_old", "f_new"]);
    assert_eq!(rows.len(), 251);
    assert!(out_dir.join("verdict.json").exists());

    let copies = ftest_fixture(true, 1);
    assert_eq!(ok_json(&run_ftest(&copies))["verdict"], false);
}

#[test]
fn ftest_misaligned_times_exit_2() {
    let fx = ftest_fixture(false, 3);
    let new_panel = PathBuf::from(&fx.args[2]);
    let text = std::fs::read_to_string(&new_panel).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines.truncate(lines.len() - 1);
    std::fs::write(&new_panel, lines.join("\n") + "\n").unwrap();
    let out = run_ftest(&fx);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("time"), "{}", stderr(&out));
}

#[test]
fn config_file_mirrors_flags() {
    let dir = TempDir::new().unwrap();
    let corr = write_corr(&dir, "u.csv", &CorrelationMatrix::uniform(6, 0.3).unwrap());
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, format!(r#"{{"kmax": 2, "out_dir": {:?}}}"#, dir.path().join("x").display().to_string()))
        .unwrap();
    let v = ok_json(&turnover(&["--config", s(&cfg), "clusters", s(&corr)]));
    assert_eq!(v["k_max"], 2);
    assert!(dir.path().join("x/sweep.csv").exists());
    // command line wins over the config file
    let v = ok_json(&turnover(&["clusters", s(&corr), "--config", s(&cfg), "--kmax", "3"]));
    assert_eq!(v["k_max"], 3);

    std::fs::write(&cfg, r#"{"no_such_flag": 1}"#).unwrap();
    assert_eq!(turnover(&["--config", s(&cfg), "clusters", s(&corr)]).status.code(), Some(2));
}

#[test]
fn help_lists_flags() {
    for (cmd, flag) in [
        (vec!["analyze", "--help"], "--min-overlap"),
        (vec!["clusters", "--help"], "--kmax"),
        (vec!["model", "sweep-f", "--help"], "--fmax"),
        (vec!["synth", "--help"], "--factor-rho"),
        (vec!["ftest", "--help"], "--winsor"),
    ] {
        let out = turnover(&cmd);
        assert!(out.status.success());
        assert!(String::from_utf8_lossy(&out.stdout).contains(flag), "{cmd:?}");
    }
}

#[test]
fn analyze_regresses_out_single_factor() {
    let dir = TempDir::new().unwrap();
    ok_json(&turnover(&["synth", "--n-alphas", "8", "--n-clusters", "1", "--n-obs", "500", "--out-dir", s(dir.path())]));
    let panel = turnover_core::panel::load_panel(dir.path().join("panel.csv"), NaPolicy::EmptyCell).unwrap();
    // the cross-sectional mean carries the common factor, so removing it leaves little correlation
    let mean = DMatrix::from_fn(panel.n_obs(), 1, |t, _| panel.values().row(t).mean());
    let factors = AlphaPanel::factors_from_matrix(vec!["mkt".into()], panel.times().to_vec(), mean).unwrap();
    let fpath = write_panel(&dir, "factors.csv", &factors);
    let raw = ok_json(&turnover(&["analyze", s(&dir.path().join("panel.csv"))]));
    let resid = ok_json(&turnover(&["analyze", s(&dir.path().join("panel.csv")), "--factors", s(&fpath)]));
    assert!(resid["mean_corr"].as_f64().unwrap().abs() < 0.2 * raw["mean_corr"].as_f64().unwrap());
}
