//! File-based front end: graph bundles, text formats, and the commands behind the `dfcn` binary.

pub mod bundle;
mod commands;
pub mod formats;

pub use bundle::{read_bundle, write_bundle, BundleManifest};
pub use commands::{
    cmd_eval, cmd_prepare, cmd_sweep, cmd_synth, cmd_train, fusion_to_csv, load_config, losses_to_csv, resolve_config,
    seed_from_env, with_param, Ablation, EvalSource, GraphSource, Meta, ReportFile, RunManifest, SweepArgs, SynthArgs,
    TrainArgs, CHECKPOINT, EMBEDDING, FUSION, LOSSES, PREDICTIONS, REPORT, RUN_MANIFEST, SEED_ENV, SWEEP_CSV,
};
