use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn disc(args: &[&str]) -> Output {
    disc_env(args, &[])
}

fn disc_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_disc"));
    cmd.args(args).env_remove("DISC_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A generated setup whose config runs only a few epochs.
fn setup(dir: &Path, epochs: usize) -> PathBuf {
    let path = PathBuf::from(ok(&disc(&["synth", "--out-dir", s(dir), "--sentences", "30", "--types", "6"])).trim());
    let text = fs::read_to_string(&path).unwrap();
    let text: String = text
        .lines()
        .map(|l| match l.split_once('=') {
            Some((k, _)) if k.trim() == "epochs" => format!("epochs = {epochs}\n"),
            _ => format!("{l}\n"),
        })
        .collect();
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn train_predict_eval_round() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path(), 3);
    let out = ok(&disc(&["train", "--config", s(&config), "--quiet"]));
    assert!(out.contains("best test_sa="), "{out}");

    let ckpt = dir.path().join("checkpoint");
    let data = dir.path().join("test.jsonl");
    let pred = dir.path().join("pred.jsonl");
    ok(&disc(&[
        "predict",
        "--checkpoint",
        s(&ckpt),
        "--input",
        s(&data),
        "--out",
        s(&pred),
    ]));
    let lines = fs::read_to_string(&pred).unwrap().lines().count();
    assert_eq!(lines, fs::read_to_string(&data).unwrap().lines().count());

    let table = ok(&disc(&[
        "eval",
        "--pred",
        s(&pred),
        "--gold",
        s(&data),
        "--by-type",
        "--by-fixedness",
        "--errors",
    ]));
    for needle in ["F1", "SA", "fixedness", "idiom type", "errors:", "missing"] {
        assert!(table.contains(needle), "no {needle:?} in\n{table}");
    }

    let train = dir.path().join("train.jsonl");
    let corr = ok(&disc(&["eval", "--pred", s(&pred), "--gold", s(&data), "--train", s(&train)]));
    assert!(corr.contains("train count vs SA: "), "{corr}");

    let review = dir.path().join("errors.jsonl");
    let json = ok(&disc(&[
        "eval",
        "--pred",
        s(&pred),
        "--gold",
        s(&data),
        "--json",
        "--errors",
        s(&review),
    ]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["n"], 30);
    let errors: u64 = v["error_counts"]
        .as_object()
        .unwrap()
        .values()
        .map(|x| x.as_u64().unwrap())
        .sum();
    assert_eq!(fs::read_to_string(&review).unwrap().lines().count() as u64, errors);
}

#[test]
fn seed_env_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path(), 1);
    ok(&disc_env(
        &["train", "--config", s(&config), "--quiet"],
        &[("DISC_SEED", "42")],
    ));
    let saved = fs::read_to_string(dir.path().join("checkpoint/config.txt")).unwrap();
    let seed = saved.lines().find_map(|l| {
        l.split_once('=')
            .filter(|(k, _)| k.trim() == "seed")
            .map(|(_, v)| v.trim().to_string())
    });
    assert_eq!(seed.as_deref(), Some("42"), "{saved}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path(), 1);
    let mut text = fs::read_to_string(&config).unwrap();
    text.push_str("warmup_steps=10\n");
    fs::write(&config, text).unwrap();
    let out = disc(&["train", "--config", s(&config)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warmup_steps"));
}

#[test]
fn split_and_stats_agree() {
    let dir = tempfile::tempdir().unwrap();
    ok(&disc(&[
        "synth",
        "--out-dir",
        s(dir.path()),
        "--sentences",
        "60",
        "--types",
        "12",
    ]));
    let input = dir.path().join("train.jsonl");
    let (tr, te) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    let args = |mode: &'static str| {
        vec![
            "split".to_string(),
            "--input".into(),
            s(&input).into(),
            "--mode".into(),
            mode.into(),
            "--test-fraction".into(),
            "0.25".into(),
            "--seed".into(),
            "3".into(),
            "--out-train".into(),
            s(&tr).into(),
            "--out-test".into(),
            s(&te).into(),
        ]
    };
    let run = |mode| {
        let a = args(mode);
        ok(&disc(&a.iter().map(String::as_str).collect::<Vec<_>>()));
        (fs::read_to_string(&tr).unwrap(), fs::read_to_string(&te).unwrap())
    };
    let first = run("type_aware");
    assert_eq!(first, run("type_aware"));
    let types = |text: &str| -> std::collections::BTreeSet<String> {
        text.lines()
            .map(|l| {
                serde_json::from_str::<serde_json::Value>(l).unwrap()["idiom_type"]
                    .as_str()
                    .unwrap()
                    .to_string()
            })
            .collect()
    };
    assert!(types(&first.0).is_disjoint(&types(&first.1)));
    assert_eq!(types(&first.1).len(), 3);

    let (rtr, rte) = run("random");
    assert_eq!(rte.lines().count(), 15);
    assert_eq!(rtr.lines().count(), 45);

    let direct = ok(&disc(&["stats", "--train", s(&tr), "--test", s(&te), "--json"]));
    let inline = ok(&disc(&[
        "stats",
        "--input",
        s(&input),
        "--mode",
        "random",
        "--test-fraction",
        "0.25",
        "--seed",
        "3",
        "--json",
    ]));
    assert_eq!(direct, inline);
    let v: serde_json::Value = serde_json::from_str(&direct).unwrap();
    assert_eq!(v["size_train"], 45);
    assert_eq!(v["size_test"], 15);
}

#[test]
fn bad_invocations_fail() {
    assert!(!disc(&[
        "split",
        "--input",
        "x.jsonl",
        "--mode",
        "sideways",
        "--out-train",
        "a",
        "--out-test",
        "b"
    ])
    .status
    .success());
    assert!(!disc(&["stats"]).status.success());
    let out = disc(&["predict", "--checkpoint", "/nonexistent", "--input", "x", "--out", "y"]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}
