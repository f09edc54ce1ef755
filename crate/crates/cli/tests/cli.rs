use std::path::Path;
use std::process::{Command, Output};

use cctc_cli::ingest::{cmd_ingest, Schema};
use tempfile::TempDir;

fn cctc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cctc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn simulate(dir: &Path, model: &str, noise: &str, seed: &str) -> std::path::PathBuf {
    let out = cctc(&[
        "simulate", "--model", model, "--noise", noise, "--seed", seed, "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    dir.join(format!("{}_{noise}.csv", model.to_uppercase()))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn simulate_round_trips_and_is_reproducible() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let pa = simulate(a.path(), "M3", "student-t", "11");
    let pb = simulate(b.path(), "M3", "student-t", "11");
    assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());

    let spec = cctc_core::simulate::ModelSpec::new(
        cctc_core::simulate::ModelId::M3,
        cctc_core::simulate::NoiseFamily::StudentT,
        1000,
    );
    let direct = cctc_core::simulate::generate(&spec, 11).unwrap();
    let ingested = cmd_ingest(&pa, &Schema::default()).unwrap();
    assert_eq!(ingested.series, direct);
    assert!(ingested.rejected.is_empty());
}

#[test]
fn simulate_rejects_unknown_model() {
    let dir = TempDir::new().unwrap();
    let out = cctc(&["simulate", "--model", "M42", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let msg = stderr(&out);
    assert!(msg.contains("M1") && msg.contains("S6"), "{msg}");
}

#[test]
fn test_decisions_on_simulated_paths() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();

    let causal = simulate(dir.path(), "M2", "pareto", "3");
    let out = cctc(&["test", "--input", causal.to_str().unwrap(), "--out", &format!("{d}/m2"), "--seed", "5"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = read(&dir.path().join("m2/results.csv"));
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("X,Y,compound,3,") && rows[0].contains(",reject,"), "{csv}");
    assert!(rows[1].starts_with("Y,X,") && rows[1].contains(",accept,"), "{csv}");

    let null = simulate(dir.path(), "M1", "pareto", "6");
    let out = cctc(&["test", "--input", null.to_str().unwrap(), "--out", &format!("{d}/m1"), "--seed", "5"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = read(&dir.path().join("m1/results.csv"));
    assert_eq!(csv.matches(",accept,").count(), 2, "{csv}");
}

#[test]
fn test_output_is_deterministic_and_echoes_config() {
    let dir = TempDir::new().unwrap();
    let path = simulate(dir.path(), "M5", "student-t", "8");
    let run = |sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = cctc(&[
            "test", "--input", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap(),
            "--seed", "21", "--b", "40", "--variant", "max",
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        read(&out_dir.join("results.json"))
    };
    let (first, second) = (run("a"), run("b"));
    let strip = |s: &str| s.replace(&dir.path().join("a").display().to_string(), "")
        .replace(&dir.path().join("b").display().to_string(), "");
    assert_eq!(strip(&first), strip(&second));
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["config"]["b"], 40);
    assert_eq!(v["config"]["seed"], 21);
    assert_eq!(v["results"][0]["variant"], "max");
    assert_eq!(v["results"][0]["b"], 40);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let path = simulate(dir.path(), "M2", "pareto", "1");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, format!("input = {}\np = 2\nb = 30\n", path.display())).unwrap();
    let out_dir = dir.path().join("out");
    let out = cctc(&[
        "test", "--config", cfg.to_str().unwrap(), "--b", "20", "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&read(&out_dir.join("results.json"))).unwrap();
    assert_eq!(v["config"]["p"], 2);
    assert_eq!(v["config"]["b"], 20);
}

#[test]
fn profile_emits_curves_and_delay_table() {
    let dir = TempDir::new().unwrap();
    let n = 400;
    let mut text = String::from("t,x,c,z\n");
    for i in 0..n {
        // Cause extremes sit at the start so every window is complete.
        let x = (n - i) as f64 + ((i * 37) % 11) as f64 * 0.01;
        let z = ((i * 7919) % 101) as f64;
        text.push_str(&format!("{i},{x},2.5,{z}\n"));
    }
    let input = dir.path().join("in.csv");
    std::fs::write(&input, text).unwrap();
    let out_dir = dir.path().join("out");
    let out = cctc(&[
        "profile", "--input", input.to_str().unwrap(), "--p-range", "1..4", "--b", "20",
        "--threshold-cbar", "0.1,0.2,0.3", "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = read(&out_dir.join("profile.csv"));
    assert!(csv.starts_with("cause,effect,p,coefficient,p_value,pccf,extremogram\n"));
    assert_eq!(csv.lines().count(), 1 + 6 * 4);
    let to_const: Vec<&str> = csv.lines().filter(|l| l.starts_with("x,c,")).collect();
    assert_eq!(to_const.len(), 4);
    for l in to_const {
        let coef: f64 = l.split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(coef, 1.0, "{l}");
    }
    let delays = read(&out_dir.join("delays.csv"));
    assert_eq!(delays.lines().count(), 1 + 6 * 3);

    // The per-lag table is numeric apart from the pair names.
    let schema = Schema {
        columns: Some(vec!["p".into(), "coefficient".into()]),
        ..Default::default()
    };
    let back = cmd_ingest(&out_dir.join("profile.csv"), &schema).unwrap();
    assert_eq!(back.series[0].len(), 24);
}

#[test]
fn profile_rejects_empty_lag_range() {
    let dir = TempDir::new().unwrap();
    let path = simulate(dir.path(), "M1", "pareto", "2");
    let out = cctc(&["profile", "--input", path.to_str().unwrap(), "--p-range", "5..2"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
}

#[test]
fn ingest_reports_rejected_rows_and_flips() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.csv");
    std::fs::write(&input, "t,ae,sym\n0,1,2\n1,NA,3\n2,4,-5\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = cctc(&[
        "ingest", "--input", input.to_str().unwrap(), "--flip", "sym", "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("2 rows, 1 rejected"));
    let back = cmd_ingest(&out_dir.join("ingested.csv"), &Schema::default()).unwrap();
    assert_eq!(back.series[1].values(), &[-2.0, 5.0]);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    assert_eq!(code(&cctc(&["test", "--input", missing.to_str().unwrap()])), 2);
    assert_eq!(code(&cctc(&["test"])), 1);
    assert_eq!(code(&cctc(&["test", "--bogus"])), 1);

    let ragged = dir.path().join("ragged.csv");
    std::fs::write(&ragged, "a,b\n1,2\n3\n").unwrap();
    let out = cctc(&["ingest", "--input", ragged.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let single = dir.path().join("single.csv");
    std::fs::write(&single, "a\n1\n2\n").unwrap();
    assert_eq!(code(&cctc(&["test", "--input", single.to_str().unwrap()])), 1);
}

#[test]
fn benchmark_smoke_and_unknown_method() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("bench");
    let out = cctc(&[
        "benchmark", "--models", "M1,M2", "--noise", "pareto", "--reps", "1", "--b", "20",
        "--methods", "compound,granger", "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = read(&out_dir.join("benchmark.csv"));
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
    assert!(read(&out_dir.join("benchmark.txt")).contains("M2"));

    let out = cctc(&["benchmark", "--methods", "astrology", "--reps", "1"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("compound"), "{}", stderr(&out));
}
