//! Train on a synthetic block-model graph and compare against K-means on raw attributes.
//!
//! cargo run --release --example sbm_clustering -- [seed]

use std::time::Instant;

use dfcn::cluster_eval::accuracy;
use dfcn::{kmeans, sbm_synthesize, train, SbmConfig, TrainConfig};

fn main() -> dfcn::Result<()> {
    env_logger::init();
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let data = sbm_synthesize(&SbmConfig::standard(seed))?;
    let truth = data.labels.clone().expect("synthetic graphs carry labels");

    let raw = kmeans(&data.x, data.k, 20, seed)?;
    println!("raw-attribute K-means ACC: {:.4}", accuracy(&truth, &raw.labels, data.k)?);

    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let out = train(&data, &cfg)?;
    let m = out.report.metrics.as_ref().unwrap();
    println!(
        "trained in {:.1}s: ACC {:.4}  NMI {:.4}  ARI {:.4}  F1 {:.4}",
        start.elapsed().as_secs_f64(),
        m.acc,
        m.nmi,
        m.ari,
        m.f1
    );
    for (phase, secs) in &out.report.phase_seconds {
        println!("  {:<14} {secs:.2}s", phase.name());
    }
    let last = out.report.losses.last().unwrap();
    println!("final alpha {:.4}, beta {:.4}, total loss {:.5}", last.alpha, last.beta, last.total);
    Ok(())
}
