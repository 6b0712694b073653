use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn slthresh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slthresh")).args(args).output().unwrap()
}

fn wdbc() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data/wdbc.csv")
        .display()
        .to_string()
}

fn rule_files(out: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(out.join("rules")).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn help_exits_cleanly() {
    let out = slthresh(&["compare", "--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in ["--lambda", "--library", "--methods", "--seed", "--out", "--config", "--dump-z", "--repeats", "--folds-outer", "--folds-inner"] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn bad_input_fails_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = slthresh(&["fit", "--csv", "/no/such/file.csv", "--out", out_dir]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let out = slthresh(&["compare", "--sim", "setting1", "--lambda", "1.5", "--out", out_dir]);
    assert!(!out.status.success());
}

#[test]
fn fit_eight_learners_writes_one_rule_and_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv = wdbc();
    let out = slthresh(&[
        "fit", "--csv", &csv, "--label-col", "diagnosis", "--ignore-col", "id", "--lambda", "0.8", "--library", "eight", "--methods",
        "crs", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "method,lambda,K,risk,rel_diff,threshold,alpha_json_free_text,seed,runtime_s");
    assert!(lines[1].starts_with("crs,0.8,8,"));
    assert_eq!(rule_files(dir.path()).len(), 1);
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("library=eight\n") && manifest.contains("bagged_trees.trees=100\n"));
}

#[test]
fn fit_then_evaluate_round_trip_and_config_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    fs::write(&config, "# small run\nlambda=0.3\nrandom_forest.trees=25\nlibrary=logistic,random_forest\nfolds_inner=5\n").unwrap();
    let csv = wdbc();
    let fit_dir = dir.path().join("fit");
    let common = ["--csv", &csv, "--label-col", "diagnosis", "--ignore-col", "id", "--config", config.to_str().unwrap()];
    let mut args = vec!["fit", "--lambda", "0.6", "--methods", "two_step", "--out", fit_dir.to_str().unwrap()];
    args.extend(common);
    let out = slthresh(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = fs::read_to_string(fit_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("lambda=0.6\n"), "flag must win over config:\n{manifest}");
    assert!(manifest.contains("random_forest.trees=25\n"));

    let rules = rule_files(&fit_dir);
    assert_eq!(rules.len(), 1);
    let rule_text = fs::read_to_string(&rules[0]).unwrap();
    assert!(rule_text.contains("method=two_step"));

    // the saved rule reloads and applies; the training file doubles as test data here
    let eval_dir = dir.path().join("eval");
    let mut args = vec!["evaluate", "--rule", rules[0].to_str().unwrap(), "--test-csv", &csv, "--out", eval_dir.to_str().unwrap()];
    args.extend(common);
    let out = slthresh(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(eval_dir.join("report.csv")).unwrap();
    let row: Vec<&str> = report.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "two_step");
    let risk: f64 = row[3].parse().unwrap();
    assert!((0.0..=0.6).contains(&risk));
}

#[test]
fn reports_are_bitwise_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| {
        let out_dir = dir.path().join(name);
        let out = slthresh(&[
            "compare", "--sim", "setting2", "--n", "400", "--lambda", "0.2,0.8", "--library", "logistic,cart,knn", "--seed", "4,5",
            "--folds-inner", "5", "--workers", workers, "--out", out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (fs::read(out_dir.join("report.csv")).unwrap(), fs::read_to_string(out_dir.join("manifest.txt")).unwrap())
    };
    let (a, manifest) = run("a", "1");
    let (b, _) = run("b", "3");
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 2 * 2);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",NA")));
    assert!(manifest.contains("sim=setting2\n") && manifest.contains("n=400\n"));
}

#[test]
fn simulate_writes_samples_and_bayes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = slthresh(&["simulate", "--sim", "setting1", "--n", "500", "--lambda", "0.5", "--seed", "2", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let train = fs::read_to_string(dir.path().join("setting1_seed2_train.csv")).unwrap();
    assert_eq!(train.lines().next().unwrap(), "u1,u2,u3,u4,latent_u1,latent_u2,latent_u3,latent_u4,bayes_score,label");
    assert_eq!(train.lines().count(), 501);
    let report = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.lines().nth(1).unwrap().starts_with("bayes,0.5,0,"));
}
