//! Scores a clustering against ground truth: contingency table, the
//! Kuhn-Munkres cluster-to-class mapping, and ACC / NMI / ARI / macro-F1.
//!
//! cargo run --release --example metrics

use dfcn::cluster_eval::kuhn_munkres;
use dfcn::numcore::Matrix;
use dfcn::{evaluate, kmeans, sbm_synthesize, SbmConfig};

fn main() -> dfcn::Result<()> {
    let truth = [0, 0, 1, 1];
    let pred = [1, 1, 1, 0];
    let r = evaluate(&truth, &pred, 2)?;
    println!("y = {truth:?}, pred = {pred:?}");
    println!("  contingency {:?}, mapping {:?}", r.contingency, r.mapping);
    println!("  acc {:.4} nmi {:.4} ari {:.4} f1 {:.4}", r.acc, r.nmi, r.ari, r.f1);

    // a 3x3 assignment problem solved directly
    let cost = Matrix::from_rows(&[[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]]);
    let a = kuhn_munkres(&cost)?;
    println!("assignment {:?} with cost {}", a.row_to_col, a.cost);

    let data = sbm_synthesize(&SbmConfig {
        attr_sep: 3.0,
        ..SbmConfig::standard(0)
    })?;
    let km = kmeans(&data.x, data.k, 10, 0)?;
    let r = evaluate(data.labels.as_ref().unwrap(), &km.labels, data.k)?;
    println!("K-means on overlapping blocks:");
    for row in &r.contingency {
        println!("  {row:?}");
    }
    println!("  acc {:.4} nmi {:.4} ari {:.4} f1 {:.4}", r.acc, r.nmi, r.ari, r.f1);
    Ok(())
}
