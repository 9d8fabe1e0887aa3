use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lpfcm::cli::cli_main;

const BASE: &str = "[converter]
m1 = 1.0
m2 = 1.5
t_off = 1.0
t_on_min = 1.0
i_max = 1.5
i_c = 1.5

[filter]
tau = 0.5
";

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpfcm"))
        .args(args)
        .output()
        .unwrap()
}

fn code(args: &[&str]) -> i32 {
    let mut v = vec!["lpfcm"];
    v.extend_from_slice(args);
    cli_main(v)
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect()];
    rows.extend(
        r.records()
            .map(|x| x.unwrap().iter().map(String::from).collect()),
    );
    rows
}

#[test]
fn usage_errors_exit_one() {
    let out = run(&["check", "--config", "x.toml", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(
        code(&["sweep", "--config", "c.toml", "--tau", "1:2", "--amp", "0:1:2", "--freq", "1:1:1"]),
        1
    );
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["check", "--config", "/nonexistent/c.toml"]), 1);
    let bad = write(
        dir.path(),
        "bad.toml",
        &BASE.replace("tau = 0.5", "tau = -0.5"),
    );
    let out = run(&["check", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau"));
    let junk = write(dir.path(), "junk.toml", "[converter\n");
    assert_eq!(code(&["check", "--config", junk.to_str().unwrap()]), 1);
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{BASE}\n[[interference]]\namp = 0.05\nomega = 7.0\n\n[interference_mode]\nphase = \"freerun\"\n");
    let cfg = write(dir.path(), "free.toml", &text);
    // No periodic fixed point to linearize about.
    assert_eq!(
        code(&[
            "rootlocus",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "/dev/null"
        ]),
        2
    );
    // Starting far below the command, the crossing is out of reach.
    let text = BASE.replace("[filter]", "[sim]\nn_cycles = 3\n\n[filter]");
    let cfg = write(dir.path(), "ok.toml", &text);
    assert_eq!(
        code(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--ip0=-1e9",
            "--out",
            "/dev/null"
        ]),
        2
    );
}

#[test]
fn check_emits_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", BASE);
    let out = dir.path().join("r.json");
    assert_eq!(
        code(&[
            "check",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ]),
        0
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for key in [
        "thm1_lhs",
        "thm1_pass",
        "thm2_lhs_a",
        "thm2_lhs_b",
        "thm2_pass",
        "k0",
        "k1",
        "k2",
        "k3",
        "K1",
        "K2",
        "psi1_max",
        "psi2_min",
        "psi2_max",
        "b_xi",
        "gain_G",
        "gain_F",
        "small_gain_product",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["psi1_max"], 0.0);
    // Standard output when no --out is given.
    let out = run(&["check", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let v2: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v, v2);
}

#[test]
fn simulate_and_waveforms() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{BASE}\n[[interference]]\namp = 0.05\nomega = 7.0\n\n[interference_mode]\nphase = \"locked\"\n");
    let cfg = write(dir.path(), "c.toml", &text);
    let cfg = cfg.to_str().unwrap();
    let traj = dir.path().join("t.csv");
    let wave = dir.path().join("w.csv");
    assert_eq!(
        code(&[
            "simulate",
            "--config",
            cfg,
            "--cycles",
            "30",
            "--out",
            traj.to_str().unwrap(),
            "--waveform",
            wave.to_str().unwrap()
        ]),
        0
    );
    let rows = csv_rows(&traj);
    assert_eq!(rows[0], ["n", "t_abs", "t_on", "i_p", "i_v", "clamped"]);
    assert_eq!(rows.len(), 31);
    let rows = csv_rows(&wave);
    assert_eq!(rows[0], ["t", "i_L", "i_m", "y_filter", "variant_id"]);
    assert!(rows[1..].iter().all(|r| r[4] == "1"));

    let out = dir.path().join("cmp.csv");
    assert_eq!(
        code(&[
            "waveforms",
            "--config",
            cfg,
            "--cycles",
            "4",
            "--out",
            out.to_str().unwrap()
        ]),
        0
    );
    let rows = csv_rows(&out);
    let mut ids: Vec<&str> = rows[1..].iter().map(|r| r[4].as_str()).collect();
    ids.dedup();
    assert_eq!(ids, ["0", "1", "2", "3"]);
}

#[test]
fn rootlocus_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", BASE);
    let out = dir.path().join("l.csv");
    assert_eq!(
        code(&[
            "rootlocus",
            "--config",
            cfg.to_str().unwrap(),
            "--kappa",
            "0:4:5",
            "--out",
            out.to_str().unwrap()
        ]),
        0
    );
    let rows = csv_rows(&out);
    assert_eq!(rows[0], ["kappa", "pole_re", "pole_im"]);
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[1][1], "1");
    let poles: Vec<f64> = rows[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(poles.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn sweep_cardinality_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", BASE);
    let out = dir.path().join("s.csv");
    let o = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--tau",
        "0.25:2:8",
        "--amp",
        "0:0.5:11",
        "--freq",
        "0.5:4:8",
        "--phases",
        "1",
        "--inits",
        "1",
        "--cycles",
        "20",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("points=704"));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 1 + 8 * 11 * 8);
    assert_eq!(
        rows[0],
        [
            "tau_hat",
            "a_hat",
            "omega_hat",
            "thm1_lhs",
            "thm2_lhs_a",
            "thm2_lhs_b",
            "thm_pass",
            "sim_verdict",
            "cycles_to_converge",
            "format_version"
        ]
    );
    assert!(rows[1..].iter().all(|r| r[9] == "1"));
    assert_eq!(rows[1][..3], ["0.25", "0", "0.5"]);
    assert_eq!(rows[2][2], "1");
}

#[test]
fn sweep_single_passing_point() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE
        .replace("i_max = 1.5", "i_max = 0.5")
        .replace("i_c = 1.5", "i_c = 0.5");
    let cfg = write(dir.path(), "c.toml", &text);
    let out = dir.path().join("s.csv");
    let o = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--tau",
        "3:3:1",
        "--amp",
        "0.01:0.01:1",
        "--freq",
        "1:1:1",
        "--strict",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][6], "true");
    assert_eq!(rows[1][7], "stable");
    let lhs_a: f64 = rows[1][4].parse().unwrap();
    let lhs_b: f64 = rows[1][5].parse().unwrap();
    assert!((lhs_a - 0.459_28).abs() < 5e-5 && (lhs_b - 0.424_80).abs() < 5e-5);
}

#[test]
fn seeded_simulation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", BASE);
    let cfg = cfg.to_str().unwrap();
    let a = run(&["simulate", "--config", cfg, "--seed", "9", "--cycles", "20"]);
    let b = run(&["simulate", "--config", cfg, "--seed", "9", "--cycles", "20"]);
    let c = run(&[
        "simulate", "--config", cfg, "--seed", "10", "--cycles", "20",
    ]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}
