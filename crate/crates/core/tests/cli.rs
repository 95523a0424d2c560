use std::path::Path;
use std::process::{Command, Output};

fn exlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exlab"))
        .args(args)
        .env("EXLAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn json_file(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn spectral_json_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.json");
    let o = exlab(&[
        "spectral", "--n", "10", "--k", "5", "--beta", "0.2", "--format", "json", "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json_file(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["metadata"]["log_base"], "natural");
    for key in ["lambda2", "gap", "phi_h0", "R_bound", "wilson_lb", "regime", "path_coupling_ub"] {
        assert!(!v[key].is_null(), "missing {key}");
    }
    let lambda = v["lambda2"].as_f64().unwrap();
    assert!((lambda + v["gap"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["regime"], "ii");
}

#[test]
fn invalid_input_exits_two() {
    let o = exlab(&["spectral", "--n", "10", "--k", "5", "--beta", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = exlab(&["spectral", "--n", "10", "--k", "11", "--beta", "0.2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = exlab(&["spectral", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    let o = exlab(&["mix", "--n", "30", "--k", "15", "--beta", "0.2"]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn mix_csv_layout() {
    let o = exlab(&["mix", "--n", "8", "--k", "4", "--beta", "0.2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "t,d_tv");
    assert_eq!(body[1].split(',').next(), Some("0"));
    let tmix = text
        .lines()
        .find_map(|l| l.strip_prefix("# tmix(0.25): "))
        .expect("tmix trailer");
    let t: u64 = tmix.trim().parse().unwrap();
    let last: Vec<&str> = body.last().unwrap().split(',').collect();
    assert_eq!(last[0].parse::<u64>().unwrap(), t);
    assert!(last[1].parse::<f64>().unwrap() < 0.25);
}

#[test]
fn reproducible_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    let out = dir.path().join("run.json");
    for _ in 0..2 {
        let o = exlab(&[
            "couple", "--n", "12", "--k", "6", "--beta", "0.3", "--trials", "200", "--seed", "9",
            "--coupling", "labelled", "--format", "json", "--reproducible", "-o",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        files.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let v: serde_json::Value = serde_json::from_slice(&files[0]).unwrap();
    assert!(v["metadata"]["wall_time_s"].is_null());
    assert_eq!(v["metadata"]["seed"], 9);
}

#[test]
fn sweep_csv_header() {
    let o = exlab(&[
        "sweep", "--n", "6,8", "--beta", "0.1,1/n", "--trials", "50", "--seed", "3",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut body = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(
        body.next(),
        Some("n,k,beta,regime,tmix,tmix_kind,wilson_lb,pc_ub,lbu_lb,seed")
    );
    assert_eq!(body.count(), 4);
}

#[test]
fn verify_small_grid_passes() {
    let o = exlab(&["verify", "--max-n", "10"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.lines().filter(|l| l.starts_with("PASS")).count(), 4);
}
