use std::path::Path;
use std::process::{Command, Output};

use btlab_cli::{ComparisonRecord, Verdict};

fn btlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_btlab"))
        .args(args)
        .env_remove("BTLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).expect("report exists")
}

#[test]
fn estimate_matches_quadrature() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("est.csv");
    let o = btlab(&[
        "estimate",
        "--seed",
        "42",
        "--out",
        out.to_str().unwrap(),
        "theorem=T1",
        "f=cos",
        "g=const:0",
        "t=1",
        "x=0",
        "n=1000000",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rec = ComparisonRecord::from_csv(&read(&out)).unwrap();
    let mc = rec.rows.iter().find(|r| r.route == "mc").unwrap();
    assert!((mc.value - 0.6992).abs() < 3e-3);
    assert_eq!(mc.verdict, Verdict::Pass);
    assert_eq!(mc.seed, Some(42));
    let quad = rec.rows.iter().find(|r| r.route == "quad").unwrap();
    assert!((quad.value - 0.699_237_669_4).abs() < 1e-9);
}

#[test]
fn marginal_test_passes_for_btp_and_ebtp() {
    let o = btlab(&[
        "marginal-test",
        "t=1",
        "variants=btp,ebtp",
        "n=100000",
        "clock_steps=100",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rec = ComparisonRecord::from_csv(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(rec.rows.len(), 1);
    assert_eq!(rec.rows[0].route, "ks");
    assert!((rec.rows[0].tolerance.unwrap() - 1.6276 * (2.0f64 / 1e5).sqrt()).abs() < 1e-5);
}

#[test]
fn unknown_function_is_rejected_before_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    let o = btlab(&["estimate", "--out", out.to_str().unwrap(), "f=sinh"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert!(String::from_utf8_lossy(&o.stderr).contains("sinh"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(btlab(&["estimate", "bogus_key=1"]).status.code(), Some(2));
    assert_eq!(btlab(&["estimate", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(btlab(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(btlab(&["estimate", "t=-1"]).status.code(), Some(2));
}

#[test]
fn convergence_failure_exits_three() {
    let o = btlab(&[
        "estimate",
        "theorem=T3",
        "f=gauss",
        "c=neg-cauchy",
        "n=100",
        "grid_points=64",
        "s_steps=64",
        "picard_max_iter=1",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
}

#[test]
fn failed_verdict_exits_one_and_still_reports() {
    let o = btlab(&["residual", "f=cos", "grid_points=32", "residual_tol=1e-14"]);
    assert_eq!(o.status.code(), Some(1));
    let rec = ComparisonRecord::from_csv(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(rec.rows.len(), 2);
    assert!(rec.rows.iter().all(|r| r.verdict == Verdict::Fail));
}

#[test]
fn residual_of_each_theorem_passes() {
    for args in [
        vec!["residual", "theorem=T1", "f=cos", "g=cos", "grid_points=64"],
        vec!["residual", "theorem=T2", "f=cos", "epsilon=0.5", "grid_points=64"],
        vec![
            "residual",
            "theorem=T3",
            "f=cos",
            "c=neg-const:1",
            "grid_points=32",
            "s_steps=1024",
        ],
    ] {
        let o = btlab(&args);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stdout)
        );
    }
}

#[test]
fn json_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp.json");
    let o = btlab(&[
        "compare",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
        "f=cos",
        "g=cos",
        "variant=kebtp",
        "k=2",
        "clock_steps=40",
        "n=5000",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&out);
    let rec = ComparisonRecord::from_json(&text).unwrap();
    assert_eq!(rec.rows.len(), 3);
    assert_eq!(rec.rows[1].variant, "KEBTP(2)");
    assert_eq!(rec.rows[1].k, Some(2));
    assert_eq!(rec.to_json().unwrap(), text);
    let csv = ComparisonRecord::from_csv(&rec.to_csv().unwrap()).unwrap();
    assert_eq!(csv, rec);
}

#[test]
fn reports_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "f=gauss",
        "g=neg-cauchy",
        "variant=ebtp",
        "clock_steps=50",
        "n=4000",
        "x=0.2",
    ];
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}.csv"));
        let mut a = vec![
            "compare",
            "--seed",
            "9",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ];
        a.extend(args);
        assert_eq!(btlab(&a).status.code(), Some(0));
        outputs.push(read(&out));
    }
    // The environment default is honoured when the flag is absent.
    let mut a = vec!["compare", "--seed", "9"];
    a.extend(args);
    let env = Command::new(env!("CARGO_BIN_EXE_btlab"))
        .args(&a)
        .env("BTLAB_THREADS", "2")
        .output()
        .unwrap();
    outputs.push(String::from_utf8(env.stdout).unwrap());
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn command_line_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(
        &cfg,
        "# demo\ntheorem = T2\nf = const:1\nepsilon = 1\nseed = 5\nn = 2000\nexperiment_id = file-run\n",
    )
    .unwrap();
    let o = btlab(&["estimate", "--config", cfg.to_str().unwrap(), "--seed", "6", "n=3000"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rec = ComparisonRecord::from_csv(&String::from_utf8(o.stdout).unwrap()).unwrap();
    let mc = rec.rows.iter().find(|r| r.route == "mc").unwrap();
    assert_eq!((mc.seed, mc.n), (Some(6), Some(3000)));
    assert_eq!(mc.experiment_id, "file-run");
    assert_eq!(mc.theorem, "T2");
}
