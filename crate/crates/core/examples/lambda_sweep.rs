//! Sweeps the clustering-loss weight lambda on a harder block model where
//! the attributes alone overlap, using the same code path as `dfcn sweep`.
//!
//! cargo run --release --example lambda_sweep -- [out_dir]

use std::path::PathBuf;

use dfcn::cli::formats::write_text;
use dfcn::cli::{cmd_sweep, cmd_synth, SweepArgs, SynthArgs, TrainArgs};

fn main() -> dfcn::Result<()> {
    env_logger::init();
    let out: PathBuf = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("dfcn_lambda_sweep"));
    let bundle = out.join("bundle");
    cmd_synth(
        &SynthArgs {
            blocks: 3,
            sizes: vec![40],
            p_in: 0.15,
            p_out: 0.05,
            attr_dim: 10,
            sep: 1.5,
            seed: 7,
        },
        &bundle,
    )?;
    let config = out.join("config.json");
    write_text(
        &config,
        r#"{"iters_pre": 30, "iters_joint": 30, "iters_finetune": 40,
            "architecture": {"ae_hidden": [64, 64], "igae_hidden": [64], "latent_dim": 10}}"#,
    )?;
    let csv = cmd_sweep(&SweepArgs {
        train: TrainArgs {
            bundle,
            config: Some(config),
            out: out.join("runs"),
            ablations: vec![],
            seed_override: Some(0),
        },
        param: "lambda".into(),
        values: ["0.01", "0.1", "1", "10", "100"].map(String::from).to_vec(),
    })?;
    print!("{csv}");
    println!("run directories under {}", out.join("runs").display());
    Ok(())
}
