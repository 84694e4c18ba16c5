use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn igcnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_igcnet"))
        .args(args)
        .env_remove("IGCNET_THREADS")
        .output()
        .expect("spawn igcnet")
}

fn ok(args: &[&str]) -> Output {
    let out = igcnet(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn digest(path: &Path) -> Vec<u8> {
    Sha256::digest(std::fs::read(path).unwrap()).to_vec()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const TINY: &[&str] = &[
    "--layers",
    "2",
    "--hidden",
    "4",
    "--embed",
    "4",
    "--epochs",
    "2",
    "--batch-size",
    "8",
];

#[test]
fn gen_is_reproducible_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    for (out, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        ok(&[
            "gen",
            "--k",
            "4",
            "--n",
            "30",
            "--seed",
            seed,
            "--weighted",
            "true",
            "--out",
            p(out),
        ]);
    }
    assert_eq!(digest(&a), digest(&b));
    assert_ne!(digest(&a), digest(&c));
}

#[test]
fn thread_count_does_not_change_data() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&[
        "--threads",
        "1",
        "gen",
        "--setting",
        "geometric",
        "--k",
        "5",
        "--n",
        "40",
        "--out",
        p(&a),
    ]);
    ok(&[
        "--threads",
        "3",
        "gen",
        "--setting",
        "geometric",
        "--k",
        "5",
        "--n",
        "40",
        "--out",
        p(&b),
    ]);
    assert_eq!(digest(&a), digest(&b));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    ok(&["gen", "--k", "3", "--n", "10", "--out", p(&data)]);
    let cases: Vec<Vec<&str>> = vec![
        vec!["gen", "--k", "0", "--out", "x"],
        vec![
            "gen",
            "--setting",
            "geometric",
            "--weighted",
            "true",
            "--out",
            "x",
        ],
        vec!["train", "--data", p(&data), "--out", "m", "--layers", "0"],
        vec!["train", "--data", p(&data), "--out", "m", "--lr=-1"],
        vec![
            "ablate", "--axis", "layers", "--values", "", "--data", "d", "--test", "d", "--report",
            "r",
        ],
        vec![
            "eval",
            "--data",
            p(&data),
            "--methods",
            "wmmse,fp",
            "--report",
            "r",
        ],
        vec![
            "eval",
            "--data",
            p(&data),
            "--methods",
            "igcnet",
            "--report",
            "r",
        ],
        vec![
            "robust", "--mode", "partial", "--sweep", "1.5", "--model", "m", "--data", "d",
            "--report", "r",
        ],
        vec!["--threads", "0", "gen", "--out", "x"],
    ];
    for args in cases {
        let out = igcnet(&args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn missing_files_exit_1_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    ok(&["gen", "--k", "3", "--n", "10", "--out", p(&data)]);
    let missing = dir.path().join("nope.igc");
    let report = dir.path().join("r.csv");
    let out = igcnet(&[
        "eval",
        "--model",
        p(&missing),
        "--data",
        p(&data),
        "--report",
        p(&report),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("loading model") && err.contains("nope.igc"),
        "{err}"
    );
    assert!(!report.exists());

    let out = igcnet(&[
        "eval",
        "--data",
        p(&missing),
        "--methods",
        "wmmse",
        "--report",
        p(&report),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn wmmse_only_eval_normalizes_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    let report = dir.path().join("eval.csv");
    ok(&["gen", "--k", "5", "--n", "12", "--out", p(&data)]);
    ok(&[
        "eval",
        "--data",
        p(&data),
        "--methods",
        "wmmse",
        "--report",
        p(&report),
    ]);
    let summary = rows(&dir.path().join("eval.summary.csv"));
    assert_eq!(summary[0][..3], ["method", "mean_rate", "ratio"]);
    assert_eq!(summary.len(), 2);
    assert_eq!(summary[1][0], "wmmse");
    assert_eq!(summary[1][2], "1");
    assert_eq!(rows(&report).len(), 13);
}

#[test]
fn train_eval_robust_bench_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let path = |n: &str| dir.path().join(n);
    ok(&[
        "gen",
        "--setting",
        "geometric",
        "--k",
        "4",
        "--n",
        "40",
        "--seed",
        "1",
        "--out",
        p(&path("train")),
    ]);
    ok(&[
        "gen",
        "--setting",
        "geometric",
        "--k",
        "4",
        "--n",
        "10",
        "--seed",
        "2",
        "--out",
        p(&path("test")),
    ]);

    let (train, model) = (path("train"), path("m.igc"));
    let mut args = vec!["train", "--data", p(&train), "--out", p(&model)];
    args.extend_from_slice(TINY);
    ok(&args);
    let history = rows(&path("m.history.csv"));
    assert_eq!(history[0], ["epoch", "train_loss", "val_loss"]);
    assert_eq!(history.len(), 3);

    ok(&[
        "gen",
        "--setting",
        "geometric",
        "--k",
        "6",
        "--n",
        "20",
        "--seed",
        "3",
        "--out",
        p(&path("k6")),
    ]);
    ok(&[
        "train",
        "--init",
        p(&model),
        "--epochs",
        "1",
        "--data",
        p(&path("k6")),
        "--out",
        p(&path("m6.igc")),
    ]);
    assert_eq!(rows(&path("m6.history.csv")).len(), 2);
    let out = igcnet(&[
        "train",
        "--init",
        p(&model),
        "--hidden",
        "8",
        "--data",
        p(&path("k6")),
        "--out",
        p(&path("m7.igc")),
    ]);
    assert_eq!(out.status.code(), Some(2));

    ok(&[
        "eval",
        "--model",
        p(&path("m.igc")),
        "--data",
        p(&path("test")),
        "--greedy-fraction",
        "0.5",
        "--report",
        p(&path("e.csv")),
    ]);
    let summary = rows(&path("e.summary.csv"));
    let methods: Vec<&str> = summary[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(methods, ["wmmse", "igcnet", "greedy"]);
    assert_eq!(summary[3][9], "0.5");

    ok(&[
        "robust",
        "--mode",
        "noisy",
        "--sweep",
        "0,0.05,0.1",
        "--model",
        p(&path("m.igc")),
        "--data",
        p(&path("test")),
        "--report",
        p(&path("r.csv")),
    ]);
    let robust = rows(&path("r.csv"));
    assert_eq!(robust.len(), 4);
    assert_eq!(robust[1][4], "1");

    ok(&[
        "robust",
        "--mode",
        "partial",
        "--model",
        p(&path("m.igc")),
        "--data",
        p(&path("test")),
        "--report",
        p(&path("rp.csv")),
    ]);
    assert_eq!(rows(&path("rp.csv")).len(), 9);

    ok(&[
        "bench",
        "--k",
        "3,5",
        "--n",
        "4",
        "--warmup",
        "1",
        "--model",
        p(&path("m.igc")),
        "--report",
        p(&path("t.csv")),
    ]);
    let timing = rows(&path("t.csv"));
    assert_eq!(timing.len(), 3);
    assert_eq!(timing[1][0], "3");
    assert_eq!(timing[2][0], "5");
}

#[test]
fn partial_sweep_on_gaussian_data_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let path = |n: &str| dir.path().join(n);
    ok(&["gen", "--k", "3", "--n", "10", "--out", p(&path("d"))]);
    let (data, model) = (path("d"), path("m"));
    let mut args = vec!["train", "--data", p(&data), "--out", p(&model)];
    args.extend_from_slice(TINY);
    ok(&args);
    let out = igcnet(&[
        "robust",
        "--mode",
        "partial",
        "--model",
        p(&path("m")),
        "--data",
        p(&path("d")),
        "--report",
        p(&path("r")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("geometry"));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let path = |n: &str| dir.path().join(n);
    std::fs::write(
        path("cfg.toml"),
        "epochs = 3\nbatch_size = 8\n[model]\nnum_layers = 1\nhidden_dim = 4\nembed_dim = 4\n",
    )
    .unwrap();
    ok(&["gen", "--k", "3", "--n", "20", "--out", p(&path("d"))]);
    ok(&[
        "train",
        "--config",
        p(&path("cfg.toml")),
        "--epochs",
        "2",
        "--data",
        p(&path("d")),
        "--out",
        p(&path("m")),
    ]);
    assert_eq!(rows(&path("m.history.csv")).len(), 3);

    std::fs::write(path("bad.toml"), "epochs = \"many\"\n").unwrap();
    let out = igcnet(&[
        "train",
        "--config",
        p(&path("bad.toml")),
        "--data",
        p(&path("d")),
        "--out",
        p(&path("m")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ablation_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let path = |n: &str| dir.path().join(n);
    ok(&["gen", "--k", "3", "--n", "30", "--out", p(&path("train"))]);
    ok(&[
        "gen",
        "--k",
        "3",
        "--n",
        "8",
        "--seed",
        "1",
        "--out",
        p(&path("test")),
    ]);
    let (train, test, report) = (path("train"), path("test"), path("a.csv"));
    let mut args = vec![
        "ablate",
        "--axis",
        "samples",
        "--values",
        "10,30",
        "--data",
        p(&train),
        "--test",
        p(&test),
        "--greedy-fraction",
        "1",
        "--report",
        p(&report),
    ];
    args.extend_from_slice(TINY);
    ok(&args);
    let table = rows(&path("a.csv"));
    assert_eq!(table.len(), 3);
    assert_eq!(table[1][..2], ["samples", "10"]);

    let report = path("b.csv");
    let mut args = vec![
        "ablate",
        "--axis",
        "samples",
        "--values",
        "31",
        "--data",
        p(&train),
        "--test",
        p(&test),
        "--report",
        p(&report),
    ];
    args.extend_from_slice(TINY);
    assert_eq!(igcnet(&args).status.code(), Some(2));
}

#[test]
fn same_seed_training_gives_identical_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let path = |n: &str| dir.path().join(n);
    ok(&[
        "gen",
        "--k",
        "4",
        "--n",
        "24",
        "--weighted",
        "true",
        "--out",
        p(&path("d")),
    ]);
    let (d, a, b) = (path("d"), path("a.igc"), path("b.igc"));
    for out in [&a, &b] {
        let mut args = vec!["train", "--data", p(&d), "--out", p(out), "--seed", "3"];
        args.extend_from_slice(TINY);
        ok(&args);
    }
    assert_eq!(digest(&a), digest(&b));
    assert_eq!(
        std::fs::read(path("a.history.csv")).unwrap(),
        std::fs::read(path("b.history.csv")).unwrap()
    );
}
