//! CLI behavior: exit codes and seed determinism of the generators.

use std::process::Command;

fn wlsh() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wlsh"))
}

#[test]
fn invalid_flags_exit_2() {
    let out = wlsh().args(["gen-data", "--n", "not-a-number", "--out", "/tmp/x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = wlsh().args(["no-such-command"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_file_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = wlsh()
        .args([
            "plan",
            "--data",
            dir.path().join("absent.bin").to_str().unwrap(),
            "--weights",
            dir.path().join("absent.w").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn infeasible_tau_exits_3_and_names_a_vector() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.bin");
    let weights = dir.path().join("w.bin");
    let run = |args: &[&str]| wlsh().args(args).output().unwrap();
    assert!(run(&["gen-data", "--n", "500", "--d", "4", "--hi", "100", "--seed", "1", "--out", data.to_str().unwrap()]).status.success());
    assert!(run(&["gen-weights", "--s", "4", "--subset", "2", "--subrange", "5", "--d", "4", "--seed", "2", "--out", weights.to_str().unwrap()]).status.success());
    let out = run(&["plan", "--data", data.to_str().unwrap(), "--weights", weights.to_str().unwrap(), "--tau", "1"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("weight vector"), "stderr should name the vector: {err}");
}

#[test]
fn generators_are_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a.bin");
    let out2 = dir.path().join("b.bin");
    let gen = |out: &std::path::Path| {
        let o = wlsh()
            .args(["gen-data", "--n", "100", "--d", "4", "--hi", "50", "--seed", "9", "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(o.status.success());
        String::from_utf8(o.stdout).unwrap()
    };
    let s1 = gen(&out1);
    let s2 = gen(&out2);
    let digest = |s: &str| s.lines().find(|l| l.starts_with("digest")).unwrap().to_string();
    assert_eq!(digest(&s1), digest(&s2));
    assert_eq!(std::fs::read(&out1).unwrap(), std::fs::read(&out2).unwrap());
}

#[test]
fn gen_weights_rejects_bad_subset_split() {
    let dir = tempfile::tempdir().unwrap();
    let out = wlsh()
        .args([
            "gen-weights", "--s", "10", "--subset", "3", "--subrange", "5", "--d", "4",
            "--out", dir.path().join("w.bin").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn alsh_rho_runs_from_cli() {
    let dir = tempfile::tempdir().unwrap();
    let weights = dir.path().join("w.bin");
    assert!(wlsh()
        .args(["gen-weights", "--s", "4", "--subset", "4", "--subrange", "1", "--d", "400", "--seed", "3", "--out", weights.to_str().unwrap()])
        .output()
        .unwrap()
        .status
        .success());
    let out = wlsh()
        .args([
            "alsh-rho", "--kind", "sl", "--weights", weights.to_str().unwrap(),
            "--n", "400000", "--r", "1000", "--c", "3", "--w-points", "32", "--v-points", "32",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("rho=0."), "unexpected output: {text}");
}
