use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "\
gos_dim = 6
psro_iterations = 3
window_size = 3
hidden_size = 4
meta_training_steps = 2
meta_batch_size = 2
es_perturbations = 2
eval_games = 2
nash_fp_iterations = 200
";

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_autocurriculum"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_is_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, TINY).unwrap();
    let outs: Vec<_> = ["a", "b"].iter().map(|d| dir.path().join(d)).collect();
    for out in &outs {
        let o = cli(&["train", "--config", path(&cfg), "--seed", "7", "--out", path(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["history.csv", "train_stats.csv", "checkpoint.json"] {
        assert_eq!(fs::read(outs[0].join(f)).unwrap(), fs::read(outs[1].join(f)).unwrap(), "{f}");
    }
    let history = fs::read_to_string(outs[0].join("history.csv")).unwrap();
    assert!(history.starts_with("run_id,seed,game_kind,game_seed,solver,iteration,exploitability\n"));
}

#[test]
fn eval_writes_one_file_per_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, TINY).unwrap();
    let out = dir.path().join("o");
    assert!(cli(&["train", "--config", path(&cfg), "--out", path(&out)]).status.success());
    let ck = out.join("checkpoint.json");
    let o = cli(&["eval", "--config", path(&cfg), "--out", path(&out), "--checkpoint", path(&ck), "--dims", "7,9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("results_dim7.csv").exists());
    assert!(out.join("results_dim9.csv").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "psro_iteratons = 3\n").unwrap();
    let o = cli(&["baselines", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("psro_iteratons"));

    let missing = dir.path().join("none.json");
    let o = cli(&["eval", "--checkpoint", path(&missing), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn external_rps_matrix_with_nash_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("rps.csv");
    fs::write(&m, "0,-1,1\n1,0,-1\n-1,1,0\n").unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        format!(
            "game = \"external_matrix\"\npayoff_file = {:?}\npsro_iterations = 4\nbaselines = [\"nash\"]\n",
            path(&m)
        ),
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = cli(&["baselines", "--config", path(&cfg), "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("baselines.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 5);
}

#[test]
fn unknown_profile_is_rejected_by_the_parser() {
    let o = cli(&["train", "--profile", "huge"]);
    assert_eq!(o.status.code(), Some(2));
}
