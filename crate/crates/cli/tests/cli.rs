//! CLI contract tests: artifact shapes, exit codes, determinism.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lossboot")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_quadratic_csv(dir: &Path) -> String {
    let path = dir.join("data.csv");
    std::fs::write(&path, "x\n1.5\n-0.25\n2.0\n").unwrap();
    path.display().to_string()
}

fn write_classify_csv(dir: &Path) -> String {
    // overlapping classes so the hinge fit is interior
    let path = dir.join("class.csv");
    let mut csv = String::from("z,y\n");
    let zs = [
        (0.8, 1), (1.6, 1), (0.3, 1), (-0.4, 1), (2.2, 1), (0.9, 1), (1.1, 1), (-0.2, 1),
        (-0.9, 0), (-1.7, 0), (-0.1, 0), (0.5, 0), (-2.1, 0), (-1.2, 0), (-0.6, 0), (0.2, 0),
    ];
    for (z, y) in zs {
        csv.push_str(&format!("{z},{y}\n"));
    }
    std::fs::write(&path, csv).unwrap();
    path.display().to_string()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn llb_shape_contract() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_quadratic_csv(dir.path());
    let out = dir.path().join("out");
    let res = run(&[
        "llb", "--data", &data, "--loss", "quadratic", "--B", "100", "--seed", "7", "--out",
        &out.display().to_string(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = read(&out.join("draws.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 101);
    assert_eq!(lines[0], "θ_1");
    // every value parses back to f64
    for line in &lines[1..] {
        line.parse::<f64>().unwrap();
    }
}

#[test]
fn llb_repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_quadratic_csv(dir.path());
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for out in [&out1, &out2] {
        let res = run(&[
            "llb", "--data", &data, "--B", "50", "--seed", "9", "--out",
            &out.display().to_string(),
        ]);
        assert!(res.status.success());
    }
    assert_eq!(read(&out1.join("draws.csv")), read(&out2.join("draws.csv")));
    assert_eq!(read(&out1.join("draws.json")), read(&out2.join("draws.json")));
}

#[test]
fn llb_threads_do_not_change_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_quadratic_csv(dir.path());
    let out1 = dir.path().join("t1");
    let out4 = dir.path().join("t4");
    for (out, threads) in [(&out1, "1"), (&out4, "4")] {
        let res = run(&[
            "llb", "--data", &data, "--B", "64", "--seed", "3", "--threads", threads, "--out",
            &out.display().to_string(),
        ]);
        assert!(res.status.success());
    }
    assert_eq!(read(&out1.join("draws.csv")), read(&out4.join("draws.csv")));
}

#[test]
fn wlb_matches_llb_for_the_normal_family() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_quadratic_csv(dir.path());
    let out_w = dir.path().join("w");
    let out_l = dir.path().join("l");
    assert!(run(&["wlb", "--data", &data, "--B", "20", "--seed", "2", "--out", &out_w.display().to_string()]).status.success());
    assert!(run(&["llb", "--data", &data, "--loss", "quadratic", "--B", "20", "--seed", "2", "--out", &out_l.display().to_string()]).status.success());
    let parse = |s: String| -> Vec<f64> {
        s.lines().skip(1).map(|l| l.parse().unwrap()).collect()
    };
    let a = parse(read(&out_w.join("draws.csv")));
    let b = parse(read(&out_l.join("draws.csv")));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-8);
    }
}

#[test]
fn bb_matches_llb_mean_draws() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_quadratic_csv(dir.path());
    let out_b = dir.path().join("bb");
    let out_l = dir.path().join("llb");
    assert!(run(&["bb", "--data", &data, "--B", "20", "--seed", "6", "--out", &out_b.display().to_string()]).status.success());
    assert!(run(&["llb", "--data", &data, "--B", "20", "--seed", "6", "--out", &out_l.display().to_string()]).status.success());
    let parse = |s: String| -> Vec<f64> {
        s.lines().skip(1).map(|l| l.parse().unwrap()).collect()
    };
    for (x, y) in parse(read(&out_b.join("draws.csv")))
        .iter()
        .zip(&parse(read(&out_l.join("draws.csv"))))
    {
        assert!((x - y).abs() <= 1e-8);
    }
}

#[test]
fn calibrate_known_variance_gives_quarter() {
    // (1/n) sum (x - xbar)^2 = 4 exactly
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("var4.csv");
    std::fs::write(&path, "x\n-2\n2\n-2\n2\n").unwrap();
    let out = dir.path().join("out");
    let res = run(&[
        "calibrate", "--data", &path.display().to_string(), "--loss", "quadratic", "--out",
        &out.display().to_string(),
    ]);
    assert!(res.status.success());
    let report: serde_json::Value = serde_json::from_str(&read(&out.join("report.json"))).unwrap();
    let w = report["w_hat"].as_f64().unwrap();
    assert!((w - 0.25).abs() <= 1e-10, "w_hat {w}");
}

#[test]
fn gb_auto_w_equals_explicit_w() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_classify_csv(dir.path());
    let out_cal = dir.path().join("cal");
    assert!(run(&[
        "calibrate", "--data", &data, "--loss", "smooth-hinge", "--out",
        &out_cal.display().to_string()
    ])
    .status
    .success());
    let report: serde_json::Value =
        serde_json::from_str(&read(&out_cal.join("report.json"))).unwrap();
    let w = report["w_hat"].as_f64().unwrap();

    let out_auto = dir.path().join("auto");
    let out_expl = dir.path().join("expl");
    assert!(run(&[
        "gb", "--data", &data, "--loss", "smooth-hinge", "--B", "100", "--seed", "4", "--w",
        "auto", "--out", &out_auto.display().to_string()
    ])
    .status
    .success());
    assert!(run(&[
        "gb", "--data", &data, "--loss", "smooth-hinge", "--B", "100", "--seed", "4", "--w",
        &format!("{w}"), "--out", &out_expl.display().to_string()
    ])
    .status
    .success());
    assert_eq!(
        read(&out_auto.join("draws.csv")),
        read(&out_expl.join("draws.csv"))
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_quadratic_csv(dir.path());
    let out = dir.path().join("out").display().to_string();

    // unknown flag: clap usage error
    assert_eq!(run(&["llb", "--nope"]).status.code(), Some(2));
    // unknown loss value
    assert_eq!(
        run(&["llb", "--data", &data, "--loss", "hinge0", "--out", &out]).status.code(),
        Some(2)
    );
    // unknown experiment name
    assert_eq!(run(&["experiment", "nope", "--out", &out]).status.code(), Some(2));
    // w = 0 rejected
    assert_eq!(
        run(&["gb", "--data", &data, "--w", "0", "--out", &out]).status.code(),
        Some(2)
    );
    // standardize outside smooth-hinge
    assert_eq!(
        run(&["llb", "--data", &data, "--loss", "quadratic", "--standardize", "on", "--out", &out])
            .status
            .code(),
        Some(2)
    );
    // missing file: data error
    assert_eq!(
        run(&["llb", "--data", "/nonexistent.csv", "--out", &out]).status.code(),
        Some(3)
    );
    // non-numeric field: data error
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x\noops\n").unwrap();
    assert_eq!(
        run(&["llb", "--data", &bad.display().to_string(), "--out", &out]).status.code(),
        Some(3)
    );
    // n < d smooth hinge: singular information, numeric error
    let tiny = dir.path().join("tiny.csv");
    std::fs::write(&tiny, "z1,z2,z3,y\n0.5,1.0,-0.5,1\n0.4,0.9,-0.4,0\n").unwrap();
    assert_eq!(
        run(&["calibrate", "--data", &tiny.display().to_string(), "--loss", "smooth-hinge", "--out", &out])
            .status
            .code(),
        Some(4)
    );
}

#[test]
fn manifest_digest_tracks_content_not_newlines() {
    let dir = tempfile::tempdir().unwrap();
    let unix = dir.path().join("unix.csv");
    let dos = dir.path().join("dos.csv");
    std::fs::write(&unix, "x\n1.0\n2.0\n").unwrap();
    std::fs::write(&dos, "x\r\n1.0\r\n2.0\r\n").unwrap();
    let get_digest = |data: &Path, out: &Path| -> String {
        assert!(run(&[
            "llb", "--data", &data.display().to_string(), "--B", "5", "--out",
            &out.display().to_string()
        ])
        .status
        .success());
        let manifest: serde_json::Value =
            serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
        manifest["dataset_digest"].as_str().unwrap().to_string()
    };
    let d_unix = get_digest(&unix, &dir.path().join("o1"));
    let d_dos = get_digest(&dos, &dir.path().join("o2"));
    assert_eq!(d_unix, d_dos);

    let other = dir.path().join("other.csv");
    std::fs::write(&other, "x\n1.0\n2.5\n").unwrap();
    let d_other = get_digest(&other, &dir.path().join("o3"));
    assert_ne!(d_unix, d_other);
}

#[test]
fn experiment_smoke_normal_quadratic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = run(&[
        "experiment", "normal-quadratic", "--n", "200", "--reps", "2", "--B", "50", "--seed",
        "1", "--out", &out.display().to_string(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let metrics = read(&out.join("metrics.csv"));
    assert_eq!(metrics.lines().count(), 3);
    let summary: serde_json::Value = serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
    assert!(summary["w_hat_mean"].as_f64().unwrap() > 0.0);
}

#[test]
fn experiment_normal_quadratic_recovers_unit_loss_scale() {
    // well-specified case: the population loss scale is 1
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = run(&[
        "experiment", "normal-quadratic", "--n", "5000", "--reps", "20", "--B", "200", "--seed",
        "11", "--out", &out.display().to_string(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary: serde_json::Value = serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
    let w_mean = summary["w_hat_mean"].as_f64().unwrap();
    assert!((0.95..=1.05).contains(&w_mean), "mean w_hat {w_mean}");
}

#[test]
fn experiment_smoke_synthetic_classify() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = run(&[
        "experiment", "synthetic-classify", "--n", "60", "--reps", "2", "--B", "60", "--test-n",
        "500", "--seed", "2", "--out", &out.display().to_string(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let curves = read(&out.join("curves.csv"));
    assert_eq!(curves.lines().next().unwrap(), "z,prob_llb,prob_gb");
    assert_eq!(curves.lines().count(), 62);
    // marginal draws of the first repetition, for density plots
    for f in ["draws_llb.csv", "draws_gb.csv"] {
        let draws = read(&out.join(f));
        assert_eq!(draws.lines().next().unwrap(), "θ_1,θ_2");
        assert_eq!(draws.lines().count(), 61);
    }
}
