//! Graph bundles: a directory holding attributes, edges, the normalized
//! adjacency, optional labels, and a manifest of SHA-256 digests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::formats::{
    edges_to_text, labels_to_text, matrix_to_csv, parse_edges, read_labels, read_matrix_csv, read_text, sha256_file,
    write_text,
};
use crate::error::{DfcnError, Result};
use crate::graph::{DegreeMode, GraphData, SparseAdjacency};

pub const BUNDLE_FORMAT: &str = "dfcn-bundle/1";
pub const ATTRIBUTES: &str = "attributes.csv";
pub const EDGES: &str = "edges.txt";
pub const ADJ_NORM: &str = "adj_norm.csv";
pub const LABELS: &str = "labels.csv";
pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format: String,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub degree_mode: DegreeMode,
    /// How the graph was obtained, e.g. `edges`, `knn k=5`, `sbm`.
    pub source: String,
    /// File name to SHA-256 hex digest.
    pub files: BTreeMap<String, String>,
}

fn adj_norm_to_csv(a: &SparseAdjacency) -> String {
    let mut out = String::new();
    for i in 0..a.n() {
        let (cols, vals) = a.row(i);
        for (j, v) in cols.iter().zip(vals) {
            writeln!(out, "{i},{j},{v}").unwrap();
        }
    }
    out
}

/// Writes `data` into `dir`, creating it if needed.
pub fn write_bundle(dir: &Path, data: &GraphData, degree_mode: DegreeMode, source: &str) -> Result<BundleManifest> {
    fs::create_dir_all(dir).map_err(|e| DfcnError::io(dir, e))?;
    let mut files = vec![
        (ATTRIBUTES, matrix_to_csv(&data.x)),
        (EDGES, edges_to_text(&data.adj.edges())),
        (ADJ_NORM, adj_norm_to_csv(&data.adj_norm)),
    ];
    if let Some(labels) = &data.labels {
        files.push((LABELS, labels_to_text(labels)));
    }
    let mut digests = BTreeMap::new();
    for (name, text) in files {
        let path = dir.join(name);
        write_text(&path, &text)?;
        digests.insert(name.to_string(), sha256_file(&path)?);
    }
    let manifest = BundleManifest {
        format: BUNDLE_FORMAT.into(),
        n: data.n(),
        d: data.dim(),
        k: data.k,
        degree_mode,
        source: source.into(),
        files: digests,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|source| DfcnError::Json {
        context: "bundle manifest".into(),
        source,
    })?;
    write_text(&dir.join(MANIFEST), &(json + "\n"))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<BundleManifest> {
    let path = dir.join(MANIFEST);
    let manifest: BundleManifest = serde_json::from_str(&read_text(&path)?).map_err(|source| DfcnError::Json {
        context: path.display().to_string(),
        source,
    })?;
    if manifest.format != BUNDLE_FORMAT {
        return Err(DfcnError::Validation(format!("unknown bundle format {:?}", manifest.format)));
    }
    Ok(manifest)
}

/// Loads a bundle after checking every digest and every declared dimension.
pub fn read_bundle(dir: &Path) -> Result<(GraphData, BundleManifest)> {
    let manifest = read_manifest(dir)?;
    for required in [ATTRIBUTES, EDGES, ADJ_NORM] {
        if !manifest.files.contains_key(required) {
            return Err(DfcnError::Validation(format!("bundle manifest does not list {required}")));
        }
    }
    for (name, expected) in &manifest.files {
        let path = dir.join(name);
        let found = sha256_file(&path)?;
        if &found != expected {
            return Err(DfcnError::Integrity {
                file: path.display().to_string(),
                expected: expected.clone(),
                found,
            });
        }
    }

    let x = read_matrix_csv(&dir.join(ATTRIBUTES))?;
    if x.rows() != manifest.n || x.cols() != manifest.d {
        return Err(DfcnError::Validation(format!(
            "{ATTRIBUTES} is {}x{}, manifest declares n={} d={}",
            x.rows(),
            x.cols(),
            manifest.n,
            manifest.d
        )));
    }
    let edges_path = dir.join(EDGES);
    let edges = parse_edges(&edges_path, &read_text(&edges_path)?, manifest.n)?;
    let adj = SparseAdjacency::from_edges(manifest.n, edges)?;
    let labels = if manifest.files.contains_key(LABELS) {
        Some(read_labels(&dir.join(LABELS))?)
    } else {
        None
    };
    let data = GraphData::with_degree_mode(x, adj, labels, manifest.k, manifest.degree_mode)?;

    let stored = read_matrix_csv(&dir.join(ADJ_NORM))?;
    let recomputed: Vec<f64> = (0..data.n())
        .flat_map(|i| {
            let (cols, vals) = data.adj_norm.row(i);
            cols.iter().zip(vals).flat_map(move |(&j, &v)| [i as f64, j as f64, v])
        })
        .collect();
    if stored.data() != recomputed.as_slice() {
        return Err(DfcnError::Validation(format!(
            "{ADJ_NORM} does not match the adjacency normalized from {EDGES}"
        )));
    }
    Ok((data, manifest))
}
