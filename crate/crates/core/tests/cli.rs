use std::path::Path;
use std::process::Command;

fn gram(args: &[&str]) -> i32 {
    let mut full = vec!["gram"];
    full.extend_from_slice(args);
    gram::cli::run(full)
}

fn p(path: &Path) -> &'static str {
    Box::leak(path.to_str().unwrap().to_owned().into_boxed_str())
}

fn same_files(a: &Path, b: &Path, names: &[&str]) {
    for n in names {
        let (x, y) = (std::fs::read(a.join(n)).unwrap(), std::fs::read(b.join(n)).unwrap());
        assert!(x == y, "{n} differs between runs");
    }
}

fn synth(dir: &Path, count: &str, extra: &[&str]) {
    let mut args = vec!["--out", p(dir), "--seed", "4", "synth", "--count", count];
    args.extend_from_slice(extra);
    assert_eq!(gram(&args), 0);
}

#[test]
fn every_workflow_is_byte_reproducible() {
    let root = tempfile::tempdir().unwrap();
    let r = root.path();
    for run in ["a", "b"] {
        let d = r.join(run);
        synth(&d.join("synth"), "6", &["--max-nodes", "9"]);
        let data = d.join("synth");
        let common = ["--dataset", p(&data), "--features", "degree_onehot:4"];
        let mut train = vec!["--out", p(&d.join("train")), "--seed", "1", "train", "--epochs", "3"];
        train.extend_from_slice(&common);
        train.extend_from_slice(&["--set", "model.hidden_dim=8", "--set", "model.latent_dim=4"]);
        assert_eq!(gram(&train), 0);
        let ck = d.join("train/checkpoint.json");
        let mut score = vec!["--out", p(&d.join("score")), "score", "--checkpoint", p(&ck), "--noise-samples", "3"];
        score.extend_from_slice(&common);
        assert_eq!(gram(&score), 0);
        let eval = [
            "--out",
            p(&d.join("eval")),
            "--seed",
            "2",
            "--set",
            r#"datasets=[{"name":"s","source":{"kind":"synthetic","count_per_class":10,"min_nodes":7,"max_nodes":9,"seed":0}}]"#,
            "--set",
            "model.hidden_dim=8",
            "--set",
            "model.latent_dim=4",
            "eval",
            "--epochs",
            "2",
        ];
        assert_eq!(gram(&eval), 0);
        assert_eq!(gram(&["--out", p(&d.join("oracle")), "oracle", "--trials", "200"]), 0);
    }
    let (a, b) = (r.join("a"), r.join("b"));
    same_files(
        &a.join("synth"),
        &b.join("synth"),
        &["synthetic_A.txt", "synthetic_graph_indicator.txt", "synthetic_graph_labels.txt"],
    );
    same_files(&a.join("train"), &b.join("train"), &["checkpoint.json", "losses.csv", "split.json"]);
    same_files(&a.join("score"), &b.join("score"), &["scores.csv", "scores.json"]);
    same_files(&a.join("eval"), &b.join("eval"), &["results.csv", "results.json", "raw_scores.json"]);
    same_files(&a.join("oracle"), &b.join("oracle"), &["table1.txt", "table1.json", "monte_carlo.json"]);
}

#[test]
fn different_seeds_give_different_corpora() {
    let r = tempfile::tempdir().unwrap();
    synth(&r.path().join("x"), "6", &["--max-nodes", "9"]);
    assert_eq!(gram(&["--out", p(&r.path().join("y")), "--seed", "5", "synth", "--count", "6", "--max-nodes", "9"]), 0);
    let f = "synthetic_A.txt";
    assert_ne!(std::fs::read(r.path().join("x").join(f)).unwrap(), std::fs::read(r.path().join("y").join(f)).unwrap());
}

#[test]
fn identity_debug_scores_match_the_reference_means() {
    let r = tempfile::tempdir().unwrap();
    let data = r.path().join("data");
    synth(&data, "2", &["--canonical", "--min-nodes", "7", "--max-nodes", "7"]);
    let common = ["--dataset", p(&data), "--features", "padded_adjacency:7"];
    let mut train = vec!["--out", p(&r.path().join("t")), "train", "--identity-debug"];
    train.extend_from_slice(&common);
    train.extend_from_slice(&["--set", "split.train_fraction=0.5"]);
    assert_eq!(gram(&train), 0);
    let ck = r.path().join("t/checkpoint.json");
    let mut score = vec!["--out", p(&r.path().join("s")), "score", "--checkpoint", p(&ck)];
    score.extend_from_slice(&common);
    assert_eq!(gram(&score), 0);
    let csv = std::fs::read_to_string(r.path().join("s/scores.csv")).unwrap();
    let mut by_label = std::collections::BTreeMap::new();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        by_label.insert(f[2].to_string(), f[1].parse::<f64>().unwrap());
    }
    assert!((by_label["0"] - 12.65).abs() < 0.01, "{csv}");
    assert!((by_label["1"] - 16.32).abs() < 0.01, "{csv}");
}

#[test]
fn noise_samples_add_a_column() {
    let r = tempfile::tempdir().unwrap();
    let data = r.path().join("data");
    synth(&data, "2", &["--max-nodes", "9"]);
    let common = ["--dataset", p(&data), "--features", "constant_one"];
    let mut train = vec!["--out", p(&r.path().join("t")), "train", "--epochs", "1"];
    train.extend_from_slice(&common);
    assert_eq!(gram(&train), 0);
    let ck = r.path().join("t/checkpoint.json");
    for (k, header) in [("0", "graph_id,graph_score,label"), ("4", "graph_id,graph_score,label,sampled_mean_score")] {
        let out = r.path().join(format!("s{k}"));
        let mut score = vec!["--out", p(&out), "score", "--checkpoint", p(&ck), "--noise-samples", k];
        score.extend_from_slice(&common);
        assert_eq!(gram(&score), 0);
        let csv = std::fs::read_to_string(out.join("scores.csv")).unwrap();
        assert_eq!(csv.lines().next().unwrap(), header);
        assert_eq!(csv.lines().count(), 5);
    }
}

#[test]
fn usage_and_runtime_errors_have_distinct_exit_codes() {
    let r = tempfile::tempdir().unwrap();
    let out = r.path().join("o");
    assert_eq!(gram(&["--out", p(&out), "synth", "--count", "0"]), 1);
    assert_eq!(gram(&["--out", p(&out), "synth", "--min-nodes", "9", "--max-nodes", "7"]), 1);
    assert_eq!(gram(&["--out", p(&out), "train", "--dataset", p(&r.path().join("missing"))]), 1);
    assert_eq!(gram(&["--out", p(&out), "score"]), 1);
    assert_eq!(gram(&["--out", p(&out), "eval", "--methods", ""]), 1);
    assert_eq!(gram(&["--out", p(&out), "eval", "--methods", "nope"]), 1);
    assert_eq!(gram(&["--out", p(&out), "--set", "bogus=1", "oracle"]), 1);
    assert_eq!(gram(&["frobnicate"]), 1);

    let data = r.path().join("data");
    synth(&data, "2", &["--max-nodes", "9"]);
    assert_eq!(
        gram(&["--out", p(&r.path().join("t")), "train", "--epochs", "1", "--dataset", p(&data), "--features", "degree_onehot:4"]),
        0
    );
    let ck = r.path().join("t/checkpoint.json");
    assert_eq!(
        gram(&["--out", p(&out), "score", "--checkpoint", p(&ck), "--dataset", p(&data), "--features", "degree_onehot:2"]),
        2
    );
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_gram");
    let r = tempfile::tempdir().unwrap();
    let ok = Command::new(bin).args(["--out", p(r.path()), "oracle"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("12.65"));
    let bad = Command::new(bin).args(["--out", p(r.path()), "synth", "--count", "0"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(Command::new(bin).arg("--help").output().unwrap().status.code(), Some(0));
}
