use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::bundle::{read_bundle, write_bundle, BundleManifest};
use super::formats::{labels_to_text, matrix_to_csv, read_labels, read_matrix_csv, read_text, sha256_file, write_text};
use crate::cluster_eval::{evaluate, EvalReport};
use crate::error::{DfcnError, Result};
use crate::graph::{knn_heat_graph, sbm_synthesize, Bandwidth, DegreeMode, GraphData, SbmConfig, SparseAdjacency};
use crate::igae::ReconMode;
use crate::trainer::checkpoint::{load_checkpoint, save_checkpoint};
use crate::trainer::{cluster_final, train, LossRecord, Phase, Supervision, TrainConfig, TrainReport};

pub const SEED_ENV: &str = "DFCN_SEED";

/// Sidecar describing an attribute file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    /// Path relative to the sidecar's directory.
    #[serde(default)]
    pub labels_file: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GraphSource {
    Edges(PathBuf),
    Knn { k: usize, bandwidth: Bandwidth },
}

/// Builds a bundle from an attribute CSV, a graph source, and a sidecar.
pub fn cmd_prepare(attrs: &Path, graph: &GraphSource, meta_path: &Path, out: &Path) -> Result<BundleManifest> {
    let meta: Meta = serde_json::from_str(&read_text(meta_path)?).map_err(|source| DfcnError::Json {
        context: meta_path.display().to_string(),
        source,
    })?;
    let x = read_matrix_csv(attrs)?;
    if x.rows() != meta.n {
        return Err(DfcnError::Validation(format!(
            "meta field n is {} but {} has {} rows",
            meta.n,
            attrs.display(),
            x.rows()
        )));
    }
    if x.cols() != meta.d {
        return Err(DfcnError::Validation(format!(
            "meta field d is {} but {} has {} columns",
            meta.d,
            attrs.display(),
            x.cols()
        )));
    }
    let (adj, source) = match graph {
        GraphSource::Edges(path) => {
            let edges = super::formats::parse_edges(path, &read_text(path)?, meta.n)?;
            (SparseAdjacency::from_edges(meta.n, edges)?, "edges".to_string())
        }
        GraphSource::Knn { k, bandwidth } => {
            let t = match bandwidth {
                Bandwidth::Auto => "auto".to_string(),
                Bandwidth::Fixed(t) => t.to_string(),
            };
            (knn_heat_graph(&x, *k, *bandwidth)?, format!("knn k={k} t={t}"))
        }
    };
    let labels = match &meta.labels_file {
        Some(name) => {
            let path = meta_path.parent().unwrap_or(Path::new(".")).join(name);
            let labels = read_labels(&path)?;
            if labels.len() != meta.n {
                return Err(DfcnError::Validation(format!(
                    "meta field n is {} but labels_file {} has {} entries",
                    meta.n,
                    path.display(),
                    labels.len()
                )));
            }
            Some(labels)
        }
        None => None,
    };
    let data = GraphData::new(x, adj, labels, meta.k)?;
    write_bundle(out, &data, DegreeMode::WithSelfLoops, &source)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthArgs {
    pub blocks: usize,
    /// One size per block, or a single size shared by all blocks.
    pub sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub attr_dim: usize,
    pub sep: f64,
    pub seed: u64,
}

pub fn cmd_synth(args: &SynthArgs, out: &Path) -> Result<BundleManifest> {
    let sizes = match args.sizes.as_slice() {
        [one] => vec![*one; args.blocks],
        many if many.len() == args.blocks => many.to_vec(),
        many => {
            return Err(DfcnError::Parameter(format!(
                "{} block sizes given for {} blocks",
                many.len(),
                args.blocks
            )))
        }
    };
    let cfg = SbmConfig {
        sizes,
        p_in: args.p_in,
        p_out: args.p_out,
        attr_dim: args.attr_dim,
        attr_sep: args.sep,
        seed: args.seed,
    };
    let data = sbm_synthesize(&cfg)?;
    write_bundle(out, &data, DegreeMode::WithSelfLoops, &format!("sbm seed={}", args.seed))
}

/// Variant switches applied on top of the configuration file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ablation {
    /// Decoders and clustering read the autoencoder latent directly.
    NoFusion,
    /// Clustering loss on the consensus assignment only.
    Single,
    /// Graph autoencoder reconstructs weighted attributes only.
    Lw,
    /// Graph autoencoder reconstructs the adjacency only.
    La,
}

impl FromStr for Ablation {
    type Err = DfcnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no-fusion" => Ok(Ablation::NoFusion),
            "single" => Ok(Ablation::Single),
            "lw" => Ok(Ablation::Lw),
            "la" => Ok(Ablation::La),
            other => Err(DfcnError::Validation(format!(
                "unknown ablation {other:?} (expected no-fusion, single, lw, la)"
            ))),
        }
    }
}

impl Ablation {
    pub fn apply(self, cfg: &mut TrainConfig) {
        match self {
            Ablation::NoFusion => cfg.fusion = false,
            Ablation::Single => cfg.supervision = Supervision::Single,
            Ablation::Lw => cfg.recon = ReconMode::WeightedAttr,
            Ablation::La => cfg.recon = ReconMode::Adjacency,
        }
    }
}

/// Reads `DFCN_SEED`, if set.
pub fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| DfcnError::Validation(format!("{SEED_ENV} is not an unsigned integer: {s:?}"))),
        Err(_) => Ok(None),
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainArgs {
    pub bundle: PathBuf,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub ablations: Vec<Ablation>,
    pub seed_override: Option<u64>,
}

/// Provenance of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub status: String,
    pub config: TrainConfig,
    pub seed: u64,
    /// Input file name to SHA-256 digest.
    pub inputs: BTreeMap<String, String>,
    pub phase_seconds: Vec<(Phase, f64)>,
    pub outputs: Vec<String>,
    pub started_unix: u64,
}

/// Contents of `report.json`: everything deterministic about a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub status: String,
    pub metrics: Option<EvalReport>,
    pub final_loss: Option<LossRecord>,
    pub iterations: BTreeMap<String, usize>,
    pub losses: Vec<LossRecord>,
}

pub const CHECKPOINT: &str = "checkpoint.json";
pub const REPORT: &str = "report.json";
pub const LOSSES: &str = "losses.csv";
pub const FUSION: &str = "fusion.csv";
pub const EMBEDDING: &str = "embedding.csv";
pub const PREDICTIONS: &str = "labels.csv";
pub const RUN_MANIFEST: &str = "run_manifest.json";

pub fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        Some(p) => TrainConfig::from_json(&read_text(p)?),
        None => Ok(TrainConfig::default()),
    }
}

pub fn losses_to_csv(losses: &[LossRecord]) -> String {
    let mut out = String::from("phase,iteration,l_ae,l_w,l_a,l_kl,total\n");
    for r in losses {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.phase.name(),
            r.iteration,
            r.l_ae,
            r.l_w,
            r.l_a,
            r.l_kl,
            r.total
        )
        .unwrap();
    }
    out
}

pub fn fusion_to_csv(losses: &[LossRecord]) -> String {
    let mut out = String::from("phase,iteration,alpha,beta\n");
    for r in losses {
        writeln!(out, "{},{},{},{}", r.phase.name(), r.iteration, r.alpha, r.beta).unwrap();
    }
    out
}

fn to_json<T: Serialize>(value: &T, context: &str) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|source| DfcnError::Json {
            context: context.into(),
            source,
        })
}

fn report_file(status: &str, report: &TrainReport) -> ReportFile {
    let mut iterations = BTreeMap::new();
    for r in &report.losses {
        *iterations.entry(r.phase.name().to_string()).or_insert(0) += 1;
    }
    ReportFile {
        status: status.into(),
        metrics: report.metrics.clone(),
        final_loss: report.losses.last().copied(),
        iterations,
        losses: report.losses.clone(),
    }
}

fn input_digests(bundle: &Path, manifest: &BundleManifest, config: Option<&Path>) -> Result<BTreeMap<String, String>> {
    let mut inputs: BTreeMap<String, String> = manifest
        .files
        .iter()
        .map(|(name, digest)| (bundle.join(name).display().to_string(), digest.clone()))
        .collect();
    if let Some(c) = config {
        inputs.insert(c.display().to_string(), sha256_file(c)?);
    }
    Ok(inputs)
}

/// Resolved configuration for a training command: file, then ablations, then seed override.
pub fn resolve_config(args: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = load_config(args.config.as_deref())?;
    for a in &args.ablations {
        a.apply(&mut cfg);
    }
    if let Some(seed) = args.seed_override {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs all phases and writes the checkpoint, reports, curves, embedding, and labels into `args.out`.
pub fn cmd_train(args: &TrainArgs) -> Result<TrainReport> {
    let (data, bundle_manifest) = read_bundle(&args.bundle)?;
    let cfg = resolve_config(args)?;
    train_into(&data, &cfg, &args.out, input_digests(&args.bundle, &bundle_manifest, args.config.as_deref())?)
}

fn train_into(data: &GraphData, cfg: &TrainConfig, out: &Path, inputs: BTreeMap<String, String>) -> Result<TrainReport> {
    fs::create_dir_all(out).map_err(|e| DfcnError::io(out, e))?;
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut run = RunManifest {
        status: "ok".into(),
        config: cfg.clone(),
        seed: cfg.seed,
        inputs,
        phase_seconds: Vec::new(),
        outputs: Vec::new(),
        started_unix,
    };

    let write = |name: &str, text: &str, run: &mut RunManifest| -> Result<()> {
        let path = out.join(name);
        write_text(&path, text)?;
        run.outputs.push(path.display().to_string());
        Ok(())
    };

    match train(data, cfg) {
        Ok(outcome) => {
            let report = outcome.report;
            let ckpt = out.join(CHECKPOINT);
            save_checkpoint(&ckpt, &outcome.params, cfg, Phase::Finetune)?;
            run.outputs.push(ckpt.display().to_string());
            run.outputs.push(ckpt.with_extension("bin").display().to_string());
            write(REPORT, &to_json(&report_file("ok", &report), "report")?, &mut run)?;
            write(LOSSES, &losses_to_csv(&report.losses), &mut run)?;
            write(FUSION, &fusion_to_csv(&report.losses), &mut run)?;
            write(EMBEDDING, &matrix_to_csv(&report.embedding), &mut run)?;
            write(PREDICTIONS, &labels_to_text(&report.labels), &mut run)?;
            run.phase_seconds = report.phase_seconds.clone();
            write_text(&out.join(RUN_MANIFEST), &to_json(&run, "run manifest")?)?;
            Ok(report)
        }
        Err(DfcnError::Divergence {
            phase,
            iteration,
            last_report,
        }) => {
            if let Some(report) = &last_report {
                write(REPORT, &to_json(&report_file("diverged", report), "report")?, &mut run)?;
                write(LOSSES, &losses_to_csv(&report.losses), &mut run)?;
                write(FUSION, &fusion_to_csv(&report.losses), &mut run)?;
                run.phase_seconds = report.phase_seconds.clone();
            }
            run.status = format!("diverged in {phase} at iteration {iteration}");
            write_text(&out.join(RUN_MANIFEST), &to_json(&run, "run manifest")?)?;
            Err(DfcnError::Divergence {
                phase,
                iteration,
                last_report,
            })
        }
        Err(e) => Err(e),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EvalSource {
    Labels(PathBuf),
    Checkpoint(PathBuf),
}

/// Scores predicted labels, read from a file or produced by a checkpoint, against the bundle's labels.
pub fn cmd_eval(bundle: &Path, source: &EvalSource) -> Result<EvalReport> {
    let (data, _) = read_bundle(bundle)?;
    let truth = data
        .labels
        .as_ref()
        .ok_or_else(|| DfcnError::Validation(format!("bundle {} has no labels", bundle.display())))?;
    let predicted = match source {
        EvalSource::Labels(path) => read_labels(path)?,
        EvalSource::Checkpoint(path) => {
            let ckpt = load_checkpoint(path)?;
            if ckpt.params.ae.input_dim() != data.dim() {
                return Err(DfcnError::Validation(format!(
                    "checkpoint expects {} attributes, bundle has {}",
                    ckpt.params.ae.input_dim(),
                    data.dim()
                )));
            }
            cluster_final(&data, &ckpt.params, &ckpt.config)?.1
        }
    };
    if predicted.len() != truth.len() {
        return Err(DfcnError::Validation(format!(
            "{} predicted labels for {} nodes",
            predicted.len(),
            truth.len()
        )));
    }
    evaluate(truth, &predicted, data.k)
}

/// Sets `key` (dot-separated for nested fields) to `raw`, parsed as JSON when possible and as a string otherwise.
pub fn with_param(cfg: &TrainConfig, key: &str, raw: &str) -> Result<TrainConfig> {
    let mut doc = serde_json::to_value(cfg).map_err(|source| DfcnError::Json {
        context: "config".into(),
        source,
    })?;
    let value = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = &mut doc;
    for part in key.split('.') {
        slot = slot
            .as_object_mut()
            .and_then(|o| o.get_mut(part))
            .ok_or_else(|| DfcnError::Validation(format!("unknown config key {key:?}")))?;
    }
    *slot = value;
    let cfg: TrainConfig = serde_json::from_value(doc).map_err(|source| DfcnError::Json {
        context: format!("config with {key}={raw}"),
        source,
    })?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepArgs {
    pub train: TrainArgs,
    pub param: String,
    pub values: Vec<String>,
}

pub const SWEEP_CSV: &str = "sweep.csv";

/// One training run per value, each in its own subdirectory of `out`, then a CSV of metrics.
/// The first column echoes each requested value verbatim.
pub fn cmd_sweep(args: &SweepArgs) -> Result<String> {
    if args.values.is_empty() {
        return Err(DfcnError::Validation("sweep needs at least one value".into()));
    }
    let base = resolve_config(&args.train)?;
    let configs = args
        .values
        .iter()
        .map(|v| with_param(&base, &args.param, v))
        .collect::<Result<Vec<_>>>()?;
    let (data, bundle_manifest) = read_bundle(&args.train.bundle)?;
    let inputs = input_digests(&args.train.bundle, &bundle_manifest, args.train.config.as_deref())?;

    let mut csv = format!("{},acc,nmi,ari,f1\n", args.param);
    for (i, (raw, cfg)) in args.values.iter().zip(&configs).enumerate() {
        let run_dir = args.train.out.join(format!("run_{i:02}"));
        train_into(&data, cfg, &run_dir, inputs.clone())?;
        let m = cmd_eval(&args.train.bundle, &EvalSource::Labels(run_dir.join(PREDICTIONS)))?;
        writeln!(csv, "{raw},{},{},{},{}", m.acc, m.nmi, m.ari, m.f1).unwrap();
    }
    write_text(&args.train.out.join(SWEEP_CSV), &csv)?;
    Ok(csv)
}
