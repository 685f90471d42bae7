use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use dfcn::cli::{
    cmd_eval, cmd_prepare, cmd_sweep, cmd_synth, cmd_train, read_bundle, EvalSource, GraphSource, SweepArgs,
    SynthArgs, TrainArgs, CHECKPOINT, EMBEDDING, FUSION, LOSSES, PREDICTIONS, REPORT, RUN_MANIFEST,
};
use dfcn::numcore::Matrix;
use dfcn::DfcnError;

const QUICK: &str = r#"{
  "iters_pre": 5, "iters_joint": 5, "iters_finetune": 6, "kmeans_restarts": 3,
  "architecture": {"ae_hidden": [12], "igae_hidden": [12], "latent_dim": 4}
}"#;

fn synth(dir: &Path, seed: u64) -> PathBuf {
    let out = dir.join(format!("sbm{seed}"));
    cmd_synth(
        &SynthArgs {
            blocks: 3,
            sizes: vec![15],
            p_in: 0.5,
            p_out: 0.02,
            attr_dim: 6,
            sep: 8.0,
            seed,
        },
        &out,
    )
    .unwrap();
    out
}

fn quick_config(dir: &Path) -> PathBuf {
    let path = dir.join("quick.json");
    fs::write(&path, QUICK).unwrap();
    path
}

#[test]
fn prepare_round_trips_a_toy_graph() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("x.csv"), "0.5,1\n-2,0.25\n3,1e-7\n0,4\n").unwrap();
    fs::write(d.join("e.txt"), "0 1\n1 2\n2 3\n").unwrap();
    fs::write(d.join("y.txt"), "0\n0\n1\n1\n").unwrap();
    fs::write(d.join("meta.json"), r#"{"n": 4, "d": 2, "k": 2, "labels_file": "y.txt"}"#).unwrap();
    let out = d.join("bundle");
    cmd_prepare(&d.join("x.csv"), &GraphSource::Edges(d.join("e.txt")), &d.join("meta.json"), &out).unwrap();
    let (data, _) = read_bundle(&out).unwrap();
    assert_eq!(data.x, Matrix::from_rows(&[[0.5, 1.0], [-2.0, 0.25], [3.0, 1e-7], [0.0, 4.0]]));
    assert_eq!(data.adj.edges(), vec![(0, 1), (1, 2), (2, 3)]);
    assert_eq!(data.labels, Some(vec![0, 0, 1, 1]));

    // tampering with any listed file is caught
    fs::write(out.join("labels.csv"), "0\n1\n1\n1\n").unwrap();
    assert!(matches!(read_bundle(&out), Err(DfcnError::Integrity { .. })));
}

#[test]
fn prepare_knn_gives_every_node_k_neighbors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::new();
    for i in 0..100 {
        let (cx, cy) = if i < 50 { (0.0, 0.0) } else { (20.0, 5.0) };
        let t = i as f64 * 0.7;
        csv += &format!("{},{}\n", cx + t.sin(), cy + (1.3 * t).cos());
    }
    fs::write(d.join("x.csv"), csv).unwrap();
    fs::write(d.join("meta.json"), r#"{"n": 100, "d": 2, "k": 2}"#).unwrap();
    let out = d.join("bundle");
    let source = GraphSource::Knn {
        k: 5,
        bandwidth: dfcn::graph::Bandwidth::Auto,
    };
    cmd_prepare(&d.join("x.csv"), &source, &d.join("meta.json"), &out).unwrap();
    let (data, m) = read_bundle(&out).unwrap();
    assert!((0..100).all(|i| data.adj.degree(i) >= 5));
    assert_eq!(data.labels, None);
    assert!(m.source.starts_with("knn k=5"));
}

#[test]
fn synth_is_seeded_and_sized() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), 3);
    let b = dir.path().join("again");
    fs::create_dir(&b).unwrap();
    let b = synth(&b, 3);
    for f in ["attributes.csv", "edges.txt", "labels.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let (data, _) = read_bundle(&a).unwrap();
    let labels = data.labels.unwrap();
    for c in 0..3 {
        assert_eq!(labels.iter().filter(|&&l| l == c).count(), 15);
    }

    let out = dir.path().join("split");
    cmd_synth(
        &SynthArgs {
            blocks: 2,
            sizes: vec![4, 6],
            p_in: 1.0,
            p_out: 0.0,
            attr_dim: 2,
            sep: 3.0,
            seed: 0,
        },
        &out,
    )
    .unwrap();
    let (data, _) = read_bundle(&out).unwrap();
    let labels = data.labels.unwrap();
    assert!(data.adj.edges().iter().all(|&(u, v)| labels[u] == labels[v]));
    assert_eq!(data.adj.nnz(), 2 * (6 + 15));

    let bad = SynthArgs {
        blocks: 3,
        sizes: vec![4, 6],
        p_in: 0.5,
        p_out: 0.1,
        attr_dim: 2,
        sep: 3.0,
        seed: 0,
    };
    assert!(matches!(cmd_synth(&bad, &dir.path().join("bad")), Err(DfcnError::Parameter(_))));
}

#[test]
fn train_writes_all_outputs_and_eval_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = synth(dir.path(), 1);
    let out = dir.path().join("run");
    let report = cmd_train(&TrainArgs {
        bundle: bundle.clone(),
        config: Some(quick_config(dir.path())),
        out: out.clone(),
        ablations: vec!["no-fusion".parse().unwrap()],
        seed_override: Some(9),
    })
    .unwrap();
    for f in [CHECKPOINT, "checkpoint.bin", REPORT, LOSSES, FUSION, EMBEDDING, PREDICTIONS, RUN_MANIFEST] {
        assert!(out.join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join(RUN_MANIFEST)).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["config"]["fusion"], false);
    assert_eq!(
        fs::read_to_string(out.join(LOSSES)).unwrap().lines().count(),
        1 + report.losses.len()
    );

    let from_labels = cmd_eval(&bundle, &EvalSource::Labels(out.join(PREDICTIONS))).unwrap();
    let from_checkpoint = cmd_eval(&bundle, &EvalSource::Checkpoint(out.join(CHECKPOINT))).unwrap();
    assert_eq!(from_labels, from_checkpoint);
    assert_eq!(Some(from_labels), report.metrics);
}

#[test]
fn eval_scores_label_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("x.csv"), "0\n1\n2\n3\n").unwrap();
    fs::write(d.join("e.txt"), "0 1\n2 3\n").unwrap();
    fs::write(d.join("y.txt"), "0\n0\n1\n1\n").unwrap();
    fs::write(d.join("meta.json"), r#"{"n": 4, "d": 1, "k": 2, "labels_file": "y.txt"}"#).unwrap();
    let bundle = d.join("bundle");
    cmd_prepare(&d.join("x.csv"), &GraphSource::Edges(d.join("e.txt")), &d.join("meta.json"), &bundle).unwrap();

    let score = |labels: &str| {
        let p = d.join("pred.txt");
        fs::write(&p, labels).unwrap();
        cmd_eval(&bundle, &EvalSource::Labels(p)).unwrap()
    };
    let perfect = score("0\n0\n1\n1\n");
    assert_eq!((perfect.acc, perfect.f1, perfect.ari), (1.0, 1.0, 1.0));
    assert!((perfect.nmi - 1.0).abs() < 1e-12);
    assert_eq!(score("1\n1\n0\n0\n").acc, 1.0);
    let worked = score("1\n1\n1\n0\n");
    assert_eq!(worked.acc, 0.75);
    assert_eq!(worked.contingency, vec![vec![0, 1], vec![2, 1]]);
    assert_eq!(worked.mapping, vec![1, 0]);
}

#[test]
fn sweep_echoes_requested_values() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = synth(dir.path(), 2);
    let values: Vec<String> = ["0.01", "0.1", "1", "10", "100"].map(String::from).to_vec();
    let args = SweepArgs {
        train: TrainArgs {
            bundle,
            config: Some(quick_config(dir.path())),
            out: dir.path().join("sweep"),
            ablations: vec![],
            seed_override: None,
        },
        param: "lambda".into(),
        values: values.clone(),
    };
    let csv = cmd_sweep(&args).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "lambda,acc,nmi,ari,f1");
    assert_eq!(lines.len(), 6);
    for (line, v) in lines[1..].iter().zip(&values) {
        assert_eq!(line.split(',').next().unwrap(), v);
    }
    assert_eq!(cmd_sweep(&args).unwrap(), csv);
}

fn dfcn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dfcn"))
}

#[test]
fn binary_exit_codes_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bundle = synth(d, 4);
    let cfg = quick_config(d);

    let status = dfcn().args(["eval", "/nonexistent/bundle", "--labels", "x"]).status().unwrap();
    assert_eq!(status.code(), Some(3));
    let status = dfcn().args(["train", bundle.to_str().unwrap(), "--out"]).arg(d.join("o")).args(["--ablate", "bogus"]).status().unwrap();
    assert_eq!(status.code(), Some(1));
    let status = dfcn().args(["frobnicate"]).status().unwrap();
    assert_eq!(status.code(), Some(1));

    let run = |name: &str, seed: &str| {
        let out = d.join(name);
        let status = dfcn()
            .env("DFCN_SEED", seed)
            .args(["train", bundle.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        fs::read_to_string(out.join(LOSSES)).unwrap()
    };
    let a = run("a", "5");
    let b = run("b", "5");
    let c = run("c", "6");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let manifest = fs::read_to_string(d.join("a").join(RUN_MANIFEST)).unwrap();
    assert!(manifest.contains("\"seed\": 5"));

    let diverging = d.join("diverging");
    fs::write(d.join("x.csv"), "1e200,0\n1,2\n3,4\n5,6\n").unwrap();
    fs::write(d.join("e.txt"), "0 1\n2 3\n").unwrap();
    fs::write(d.join("meta.json"), r#"{"n": 4, "d": 2, "k": 2}"#).unwrap();
    cmd_prepare(&d.join("x.csv"), &GraphSource::Edges(d.join("e.txt")), &d.join("meta.json"), &diverging).unwrap();
    let out = d.join("div_out");
    let status = dfcn()
        .args(["train", diverging.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let report = fs::read_to_string(out.join(REPORT)).unwrap();
    assert!(report.contains("\"status\": \"diverged\""));
}
