//! Ablations on the block-model fixture: graph-autoencoder loss variants and
//! supervision / fusion variants of the full model, averaged over seeds.
//!
//! cargo run --release --example ablations -- [seeds]

use dfcn::igae::ReconMode;
use dfcn::trainer::{train_igae_only, Supervision};
use dfcn::{sbm_synthesize, train, SbmConfig, TrainConfig};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn main() -> dfcn::Result<()> {
    env_logger::init();
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);

    println!("graph autoencoder alone, K-means on its latent:");
    for (name, recon) in [
        ("L_w only", ReconMode::WeightedAttr),
        ("L_a only", ReconMode::Adjacency),
        ("L_w + gamma L_a", ReconMode::Both),
    ] {
        let mut accs = Vec::new();
        for seed in 0..seeds {
            let data = sbm_synthesize(&SbmConfig::standard(seed))?;
            let cfg = TrainConfig {
                seed,
                recon,
                ..TrainConfig::default()
            };
            accs.push(train_igae_only(&data, &cfg)?.metrics.unwrap().acc);
        }
        println!("  {name:<16} mean ACC {:.4}  {accs:.3?}", mean(&accs));
    }

    println!("full model:");
    for (name, supervision, fusion) in [
        ("triplet", Supervision::Triplet, true),
        ("single", Supervision::Single, true),
        ("no fusion", Supervision::Triplet, false),
    ] {
        let mut accs = Vec::new();
        for seed in 0..seeds {
            let data = sbm_synthesize(&SbmConfig::standard(seed))?;
            let cfg = TrainConfig {
                seed,
                supervision,
                fusion,
                ..TrainConfig::default()
            };
            accs.push(train(&data, &cfg)?.report.metrics.unwrap().acc);
        }
        println!("  {name:<16} mean ACC {:.4}  {accs:.3?}", mean(&accs));
    }
    Ok(())
}
