//! Builds a heat-kernel KNN graph from attributes, normalizes it, and
//! reports how well the edges follow the true blocks.
//!
//! cargo run --release --example graph_construction -- [k]

use dfcn::graph::{knn_heat_graph, normalize_adjacency, Bandwidth, DegreeMode};
use dfcn::{sbm_synthesize, SbmConfig};

fn main() -> dfcn::Result<()> {
    let k: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let data = sbm_synthesize(&SbmConfig::standard(0))?;
    let labels = data.labels.as_ref().expect("synthetic data is labeled");

    let within = |edges: &[(usize, usize)]| {
        edges.iter().filter(|&&(u, v)| labels[u] == labels[v]).count() as f64 / edges.len() as f64
    };
    let sbm_edges = data.adj.edges();
    println!("block-model graph: {} edges, {:.3} within blocks", sbm_edges.len(), within(&sbm_edges));

    let knn = knn_heat_graph(&data.x, k, Bandwidth::Auto)?;
    let knn_edges = knn.edges();
    let degrees: Vec<usize> = (0..knn.n()).map(|i| knn.degree(i)).collect();
    println!(
        "{k}-NN attribute graph: {} edges, {:.3} within blocks, degree {}..{}",
        knn_edges.len(),
        within(&knn_edges),
        degrees.iter().min().unwrap(),
        degrees.iter().max().unwrap()
    );

    let norm = normalize_adjacency(&knn, DegreeMode::WithSelfLoops)?;
    let sums = norm.row_sums();
    println!(
        "normalized: symmetric {}, row sums {:.3}..{:.3}",
        norm.is_symmetric(),
        sums.iter().cloned().fold(f64::INFINITY, f64::min),
        sums.iter().cloned().fold(0.0, f64::max)
    );
    Ok(())
}
