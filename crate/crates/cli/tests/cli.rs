use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &[&str] = &[
    "--set",
    "problem.K=6",
    "--set",
    "solver.dt=0.01",
    "--set",
    "experiment.posterior.pcn.steps=1500",
    "--set",
    "experiment.posterior.pcn.burn_in=300",
    "--set",
    "experiment.posterior.band.max_draws=40",
    "--set",
    "experiment.posterior.band.grid_size=32",
];

fn bvmlab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bvmlab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn run_dir(out: &Path, command: &str) -> Vec<PathBuf> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(out)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(&format!("{command}-")))
        })
        .collect();
    dirs.sort();
    dirs
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stage<'a>(timings: &'a Value, name: &str) -> &'a Value {
    timings["stages"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["stage"] == name)
        .unwrap_or_else(|| panic!("no stage {name} in {timings}"))
}

#[test]
fn invalid_gamma_is_a_validation_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs");
    let res = bvmlab(&out, &["posterior", "--set", "prior.gamma=1.4"]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("prior.gamma"), "{err}");
    assert!(!out.exists(), "validation must precede any output");

    let d2 = bvmlab(
        &out,
        &[
            "info",
            "--set",
            "problem.d=2",
            "--set",
            "problem.K=4",
            "--set",
            "prior.gamma=1.9",
        ],
    );
    assert_eq!(d2.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&d2.stderr).contains("1 + d/2 = 2"));
}

#[test]
fn unknown_fields_and_bad_overrides_name_their_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "[problem]\nKK = 4\n").unwrap();
    let res = bvmlab(tmp.path(), &["info", "-c", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("problem.KK"));

    let res = bvmlab(
        tmp.path(),
        &["clt", "--set", "experiment.clt.replications=50"],
    );
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("experiment.clt.replications"));

    let res = bvmlab(
        tmp.path(),
        &["coverage", "--set", "experiment.coverage.n=10"],
    );
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("prior.n"));
}

#[test]
fn compute_failures_exit_with_the_stage_name() {
    let tmp = tempfile::tempdir().unwrap();
    let res = bvmlab(
        tmp.path(),
        &[
            "info",
            "--set",
            "problem.K=6",
            "--set",
            "solver.dt=0.1",
            "--set",
            "solver.picard_iters=1",
        ],
    );
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("stage `forward`"));
}

#[test]
fn reruns_are_byte_identical_and_thread_independent() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let mut args = vec!["posterior", "--seed", "11"];
    args.extend_from_slice(SMALL);
    assert!(bvmlab(out, &args).status.success());
    let dir = run_dir(out, "posterior").pop().unwrap();
    let first = fs::read(dir.join("report.json")).unwrap();

    let mut again = args.clone();
    again.push("--no-cache");
    assert!(bvmlab(out, &again).status.success());
    assert_eq!(fs::read(dir.join("report.json")).unwrap(), first);

    again.extend(["--threads", "1"]);
    assert!(bvmlab(out, &again).status.success());
    assert_eq!(fs::read(dir.join("report.json")).unwrap(), first);

    let other = bvmlab(
        out,
        &["posterior", "--seed", "12"]
            .iter()
            .chain(SMALL)
            .copied()
            .collect::<Vec<_>>(),
    );
    assert!(other.status.success());
    assert_eq!(run_dir(out, "posterior").len(), 2);
}

#[test]
fn cached_stages_are_reused_when_only_the_experiment_changes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    assert!(bvmlab(
        out,
        &["posterior"]
            .iter()
            .chain(SMALL)
            .copied()
            .collect::<Vec<_>>()
    )
    .status
    .success());
    let first = run_dir(out, "posterior").pop().unwrap();
    let t1 = json(&first.join("timings.json"));
    assert_eq!(stage(&t1, "chain")["cached"], false);

    let mut args: Vec<&str> = vec!["posterior"];
    args.extend_from_slice(SMALL);
    args.extend(["--set", "experiment.posterior.band.alpha=0.2"]);
    assert!(bvmlab(out, &args).status.success());
    let dirs = run_dir(out, "posterior");
    assert_eq!(dirs.len(), 2);
    let second = dirs.into_iter().find(|d| *d != first).unwrap();
    let t2 = json(&second.join("timings.json"));
    for s in ["forward", "data", "chain"] {
        assert_eq!(stage(&t2, s)["cached"], true, "{s}");
    }
    let (c1, c2) = (
        stage(&t1, "chain")["seconds"].as_f64().unwrap(),
        stage(&t2, "chain")["seconds"].as_f64().unwrap(),
    );
    assert!(c2 < c1, "cached chain {c2}s vs computed {c1}s");

    // same chain, different band level
    let r1 = json(&first.join("report.json"));
    let r2 = json(&second.join("report.json"));
    let coeffs = |r: &Value| r["report"]["tables"][0]["rows"].clone();
    assert_eq!(coeffs(&r1), coeffs(&r2));
}

#[test]
fn cached_forward_solve_gives_the_same_information() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let args = [
        "info",
        "--set",
        "problem.K=8",
        "--set",
        "problem.reaction.amplitude=3",
    ];
    assert!(bvmlab(out, &args).status.success());
    let dir = run_dir(out, "info").pop().unwrap();
    let fresh = fs::read(dir.join("report.json")).unwrap();
    let gram = fs::read(dir.join("gram.bin")).unwrap();
    fs::remove_file(dir.join("report.json")).unwrap();

    assert!(bvmlab(out, &args).status.success());
    assert_eq!(fs::read(dir.join("report.json")).unwrap(), fresh);
    assert_eq!(fs::read(dir.join("gram.bin")).unwrap(), gram);
    assert_eq!(
        stage(&json(&dir.join("timings.json")), "forward")["cached"],
        true
    );
}

#[test]
fn artifacts_carry_hash_seed_and_versions() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let res = bvmlab(
        out,
        &[
            "simulate",
            "--seed",
            "3",
            "--set",
            "problem.K=6",
            "--set",
            "prior.n=50",
        ],
    );
    assert!(res.status.success());
    let dir = run_dir(out, "simulate").pop().unwrap();
    let report = json(&dir.join("report.json"));
    let hash = report["config_hash"].as_str().unwrap().to_string();
    assert!(dir.to_str().unwrap().ends_with(&hash[..16]));
    assert_eq!(report["seed"], 3);
    assert!(report["versions"]["bvmlab-core"].is_string());

    for csv in ["data.csv", "truth.csv", "summary.csv"] {
        let text = fs::read_to_string(dir.join(csv)).unwrap();
        let head = text.lines().next().unwrap();
        assert!(
            head.starts_with("# config_hash=") && head.contains(&hash) && head.contains("seed=3"),
            "{csv}"
        );
    }
    let data = fs::read_to_string(dir.join("data.csv")).unwrap();
    assert_eq!(data.lines().count(), 2 + 50);

    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("[forward]") && stdout.contains("[data]"));

    let info = bvmlab(out, &["info", "--set", "problem.K=6"]);
    assert!(info.status.success());
    let idir = run_dir(out, "info").pop().unwrap();
    let header = json(&idir.join("gram.json"));
    // cos and sin per frequency
    assert_eq!(header["rows"], 12);
    assert!(header["meta"]["config_hash"].is_string());
}

#[test]
fn defaults_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let res = Command::new(env!("CARGO_BIN_EXE_bvmlab"))
        .arg("defaults")
        .output()
        .unwrap();
    assert!(res.status.success());
    let cfg = tmp.path().join("d.toml");
    fs::write(&cfg, &res.stdout).unwrap();
    let r = bvmlab(
        tmp.path(),
        &["info", "-c", cfg.to_str().unwrap(), "--set", "problem.K=4"],
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
}
