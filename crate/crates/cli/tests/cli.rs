use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use contactgen::repr::read_maps;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_contactgen"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "exit {:?}\n{}", o.status, String::from_utf8_lossy(&o.stderr));
    o
}

const TINY: &str = "\
[train]
epochs = 2
checkpoint_every = 1
[solver]
global_iterations = 10
local_iterations = 20
";

/// A generated dataset, a two-epoch model and a tiny config in a temp dir.
struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new(train: bool) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
        ok(run(&["make-data", "--out", "data", "--seed", "3"], dir.path()));
        if train {
            ok(run(&["train", "--config", "tiny.toml", "--manifest", "data/manifest.toml", "--out", "run"], dir.path()));
        }
        Self { dir }
    }

    fn path(&self, p: &str) -> PathBuf {
        self.dir.path().join(p)
    }

    fn run(&self, args: &[&str]) -> Output {
        run(args, self.dir.path())
    }

    fn solve(&self, seed: &str, count: &str, out: &str) -> Output {
        self.run(&[
            "sample-solve",
            "data/objects/sample-004.obj",
            "--config",
            "tiny.toml",
            "--checkpoint",
            "run/checkpoints/final.cgcvae",
            "--count",
            count,
            "--seed",
            seed,
            "--out",
            out,
        ])
    }
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn make_data_is_reproducible_and_valid() {
    let f = Fixture::new(false);
    let manifest = std::fs::read_to_string(f.path("data/manifest.toml")).unwrap();
    assert_eq!(manifest.matches("[[record]]").count(), 20);
    assert_eq!(manifest.matches("split = \"test\"").count(), 4);
    ok(f.run(&["make-data", "--out", "again", "--seed", "3"]));
    assert_eq!(std::fs::read(f.path("again/manifest.toml")).unwrap(), manifest.as_bytes());
    for i in 0..20 {
        read_maps(f.path(&format!("data/maps/sample-{i:03}.cgmaps"))).unwrap();
    }
    let echo = std::fs::read_to_string(f.path("data/config.toml")).unwrap();
    assert!(echo.contains("seed = 3"));
    assert!(echo.contains("preset = \"desk\""));
}

#[test]
fn unwritable_output_fails_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("file"), "x").unwrap();
    let o = run(&["make-data", "--out", "file/sub"], dir.path());
    assert_ne!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("file/sub"));
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[train]\nkl_weight = -1.0\n").unwrap();
    std::fs::write(dir.path().join("typo.toml"), "[train]\nepoch = 3\n").unwrap();
    assert_eq!(code(&run(&["train", "--config", "bad.toml", "--out", "x"], dir.path())), 1);
    assert_eq!(code(&run(&["make-data", "--config", "typo.toml", "--out", "x"], dir.path())), 1);
    assert_eq!(code(&run(&["make-data", "--config", "missing.toml", "--out", "x"], dir.path())), 1);
    assert_eq!(code(&run(&["make-data"], dir.path())), 1);
    assert_eq!(code(&run(&["make-data", "--preset", "huge", "--out", "x"], dir.path())), 1);
    assert_eq!(code(&run(&["frobnicate"], dir.path())), 1);
    assert_eq!(code(&run(&["--help"], dir.path())), 0);
    assert_eq!(code(&run(&["train", "--out", "x"], dir.path())), 1);
}

#[test]
fn empty_dataset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("manifest.toml"), "seed = 0\n").unwrap();
    let o = run(&["train", "--manifest", "manifest.toml", "--out", "run"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no train records"));
}

#[test]
fn training_writes_metrics_and_resumes() {
    let f = Fixture::new(true);
    let rows = csv_rows(&f.path("run/metrics.csv"));
    assert_eq!(rows.len(), 2);
    std::fs::write(f.path("more.toml"), TINY.replace("epochs = 2", "epochs = 4")).unwrap();
    ok(f.run(&[
        "train",
        "--config",
        "more.toml",
        "--manifest",
        "data/manifest.toml",
        "--out",
        "run",
        "--checkpoint",
        "run/checkpoints/final.cgcvae",
    ]));
    let rows = csv_rows(&f.path("run/metrics.csv"));
    let epochs: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(epochs, ["0", "1", "2", "3"]);
    let recon: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!((recon[2] - recon[1]).abs() < 0.5 * recon[1], "{recon:?}");
    assert!(f.path("run/checkpoints/epoch-00004.cgcvae").is_file());

    // nothing left to do
    let o = f.run(&[
        "train",
        "--config",
        "more.toml",
        "--manifest",
        "data/manifest.toml",
        "--out",
        "run",
        "--checkpoint",
        "run/checkpoints/final.cgcvae",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn sample_solve_and_eval() {
    let f = Fixture::new(true);
    ok(f.solve("1", "3", "a"));
    let rows = csv_rows(&f.path("a/summary.csv"));
    assert_eq!(rows.len(), 3);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0], format!("sample-{i:03}"));
        let dir = f.path(&format!("a/sample-{i:03}"));
        for file in ["maps.cgmaps", "hand.obj", "params.toml", "trace.csv"] {
            assert!(dir.join(file).is_file(), "{file}");
        }
    }
    assert!(f.path("a/config.toml").is_file());

    // same seed reproduces the maps, another seed changes the part map
    ok(f.solve("1", "1", "a2"));
    ok(f.solve("2", "1", "b"));
    let a = read_maps(f.path("a/sample-000/maps.cgmaps")).unwrap();
    assert_eq!(read_maps(f.path("a2/sample-000/maps.cgmaps")).unwrap(), a);
    let b = read_maps(f.path("b/sample-000/maps.cgmaps")).unwrap();
    let hamming = a.parts.iter().zip(&b.parts).filter(|(x, y)| x != y).count();
    assert!(hamming > 0);

    let o = ok(f.run(&["eval", "a", "--manifest", "data/manifest.toml"]));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("unavailable"));
    let report = std::fs::read_to_string(f.path("a/eval.csv")).unwrap();
    assert!(report.starts_with("sample,status,epe_cm"));
    assert_eq!(report.lines().count(), 4);
    assert!(report.lines().skip(1).all(|l| l.ends_with(",unavailable")));
    let summary = std::fs::read_to_string(f.path("a/eval_summary.csv")).unwrap();
    assert!(summary.contains("simulation_cm,unavailable"));
    assert!(summary.contains("entropy,") && !summary.contains("entropy,unavailable"));

    // without ground truth the mesh columns are dropped
    ok(f.run(&["eval", "a", "--out", "no_gt"]));
    let report = std::fs::read_to_string(f.path("no_gt/eval.csv")).unwrap();
    assert!(report.starts_with("sample,status,penetration_cm3"));
}

#[test]
fn ground_truth_grasp_scores_perfectly_against_itself() {
    let f = Fixture::new(true);
    ok(f.solve("1", "1", "gt"));
    std::fs::copy(f.path("data/hands/sample-004.toml"), f.path("gt/sample-000/params.toml")).unwrap();
    ok(f.run(&["eval", "gt", "--manifest", "data/manifest.toml"]));
    let rows = csv_rows(&f.path("gt/eval.csv"));
    let v = |k: usize| rows[0][k].parse::<f64>().unwrap();
    assert_eq!(v(2), 0.0);
    assert_eq!(v(4), 1.0);
    assert_eq!(v(5), 1.0);
    // the synthetic grasps press about a millimeter into the surface
    assert!(v(6) < 1.0, "self penetration {}", v(6));
}

#[test]
fn zero_count_and_empty_results() {
    let f = Fixture::new(true);
    ok(f.solve("1", "0", "none"));
    assert!(csv_rows(&f.path("none/summary.csv")).is_empty());
    let o = f.run(&["eval", "none"]);
    assert_ne!(code(&o), 0);
    std::fs::create_dir(f.path("empty")).unwrap();
    assert_ne!(code(&f.run(&["eval", "empty"])), 0);
    assert_eq!(code(&f.run(&["eval", "nowhere"])), 1);
    let o = f.run(&["sample-solve", "missing.obj", "--checkpoint", "run/checkpoints/final.cgcvae", "--out", "y"]);
    assert_eq!(code(&o), 1);
}

#[cfg(unix)]
#[test]
fn engine_adapter_fills_the_simulation_column() {
    use std::os::unix::fs::PermissionsExt;
    let f = Fixture::new(true);
    ok(f.solve("1", "2", "s"));
    let script = f.path("engine.sh");
    std::fs::write(
        &script,
        "#!/bin/sh\nwhile read line; do case \"$line\" in run) echo 'start 0 0 0'; echo 'end 0 0 -0.02';; esac; done\n",
    )
    .unwrap();
    std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
    ok(f.run(&["eval", "s", "--engine-adapter", script.to_str().unwrap()]));
    let summary = std::fs::read_to_string(f.path("s/eval_summary.csv")).unwrap();
    assert!(summary.contains("simulation_cm,2.000000"), "{summary}");
    assert_eq!(code(&f.run(&["eval", "s", "--engine-adapter", "nope.sh"])), 1);
}
