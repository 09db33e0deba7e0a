use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tsk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsk")).args(args).output().unwrap()
}

fn concrete() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/concrete.csv")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn summary_matches_per_run_logs_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let data = concrete();
    let o = tsk(&[
        "run", "--data", data.to_str().unwrap(), "--mode", "prune", "--repeats", "3", "--epochs", "40",
        "--rules", "6", "--seed", "11", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let summary: serde_json::Value = serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
    let runs = summary["per_run"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    let mut rmses = Vec::new();
    for (k, run) in runs.iter().enumerate() {
        let seed = run["seed"].as_u64().unwrap();
        assert_eq!(seed, 11 + k as u64);
        let prefix = out.join(format!("run_seed{seed}"));
        let epochs = read(Path::new(&format!("{}_epochs.csv", prefix.display())));
        let last: f64 = epochs.lines().last().unwrap().split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(last, run["test_rmse"].as_f64().unwrap());
        assert_eq!(epochs.lines().count(), 41);
        let prune = read(Path::new(&format!("{}_prune.csv", prefix.display())));
        assert_eq!(prune.lines().next().unwrap(), "iteration,rules_before,removed_by_gamma,removed_by_theta,rules_after,test_rmse");
        let final_rules: u64 = prune.lines().last().unwrap().split(',').nth(4).unwrap().parse().unwrap();
        assert_eq!(final_rules, run["final_rules"].as_u64().unwrap());
        rmses.push(last);

        let model = format!("{}_model.json", prefix.display());
        let seed_arg = seed.to_string();
        let e = tsk(&["evaluate", "--model", &model, "--data", data.to_str().unwrap(), "--seed", &seed_arg]);
        assert!(e.status.success(), "{}", String::from_utf8_lossy(&e.stderr));
        let evaluated: f64 = String::from_utf8(e.stdout).unwrap().trim().parse().unwrap();
        assert_eq!(evaluated, last);
    }
    let mean = rmses.iter().sum::<f64>() / 3.0;
    let std = (rmses.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
    assert!((summary["mean_rmse"].as_f64().unwrap() - mean).abs() < 1e-12);
    assert!((summary["std_rmse"].as_f64().unwrap() - std).abs() < 1e-12);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = concrete();
    let mut bytes = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(threads);
        let o = Command::new(env!("CARGO_BIN_EXE_tsk"))
            .env("TSK_THREADS", threads)
            .args(["run", "--data", data.to_str().unwrap(), "--repeats", "3", "--epochs", "30", "--rules", "5", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(o.status.success());
        bytes.push(std::fs::read(out.join("summary.json")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn failures_exit_nonzero_and_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = tsk(&["run", "--data", "/nonexistent.csv", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("loading dataset"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b,y\n1,2,3\n4,x,6\n7,8,9\n").unwrap();
    let o = tsk(&["run", "--data", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 3") && err.contains("column 2"), "{err}");

    let o = tsk(&["run", "--data", concrete().to_str().unwrap(), "--droprule", "0", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("validating configuration"));
}

#[test]
fn evaluate_rejects_feature_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let data = concrete();
    let o = tsk(&["run", "--data", data.to_str().unwrap(), "--repeats", "1", "--epochs", "5", "--rules", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let small = dir.path().join("small.csv");
    std::fs::write(&small, "a,b,y\n1,2,3\n4,5,6\n7,8,10\n2,1,0\n").unwrap();
    let model = out.join("run_seed0_model.json");
    let e = tsk(&["evaluate", "--model", model.to_str().unwrap(), "--data", small.to_str().unwrap()]);
    assert!(!e.status.success());
    assert!(String::from_utf8_lossy(&e.stderr).contains("features"));
}
