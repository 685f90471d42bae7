//! Checkpoint persistence: a JSON manifest next to a file of raw little-endian
//! f64 weight blocks.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Phase, TrainConfig};
use crate::error::{DfcnError, Result};
use crate::model::ModelParams;
use crate::numcore::Matrix;
use crate::selfsup::Centers;

pub const CHECKPOINT_FORMAT: &str = "dfcn-checkpoint/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Byte offset into the weights file.
    pub offset: usize,
    /// Length in bytes.
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    pub input_dim: usize,
    pub ae_hidden: Vec<usize>,
    pub igae_hidden: Vec<usize>,
    pub latent_dim: usize,
    pub clusters: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub phase: Phase,
    pub dims: Dims,
    pub config: TrainConfig,
    pub dof: Option<f64>,
    pub weights_file: String,
    pub weights_sha256: String,
    pub blocks: Vec<BlockEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub config: TrainConfig,
    pub phase: Phase,
}

fn weights_path(manifest_path: &Path) -> PathBuf {
    manifest_path.with_extension("bin")
}

/// Writes `<path>` (manifest) and `<path>` with a `.bin` extension (weights).
pub fn save_checkpoint(path: &Path, params: &ModelParams, cfg: &TrainConfig, phase: Phase) -> Result<()> {
    params.validate()?;
    let mut bytes = Vec::new();
    let mut blocks = Vec::new();
    for (name, m) in params.named_tensors() {
        let offset = bytes.len();
        for v in m.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        blocks.push(BlockEntry {
            name,
            rows: m.rows(),
            cols: m.cols(),
            offset,
            len: bytes.len() - offset,
        });
    }
    let wpath = weights_path(path);
    let manifest = CheckpointManifest {
        format: CHECKPOINT_FORMAT.into(),
        phase,
        dims: Dims {
            input_dim: params.ae.input_dim(),
            ae_hidden: params.ae.encoder[..params.ae.encoder.len() - 1]
                .iter()
                .map(|l| l.output_dim())
                .collect(),
            igae_hidden: params.igae.encoder[..params.igae.encoder.len() - 1]
                .iter()
                .map(|w| w.cols())
                .collect(),
            latent_dim: params.ae.latent_dim(),
            clusters: params.centers.as_ref().map(|c| c.k()),
        },
        config: cfg.clone(),
        dof: params.centers.as_ref().map(|c| c.dof),
        weights_file: wpath.file_name().unwrap().to_string_lossy().into_owned(),
        weights_sha256: hex::encode(Sha256::digest(&bytes)),
        blocks,
    };
    fs::write(&wpath, &bytes).map_err(|e| DfcnError::io(&wpath, e))?;
    let json = serde_json::to_string_pretty(&manifest).map_err(|source| DfcnError::Json {
        context: "checkpoint manifest".into(),
        source,
    })?;
    fs::write(path, json).map_err(|e| DfcnError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| DfcnError::io(path, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text).map_err(|source| DfcnError::Json {
        context: format!("checkpoint manifest {}", path.display()),
        source,
    })?;
    if manifest.format != CHECKPOINT_FORMAT {
        return Err(DfcnError::Validation(format!("unknown checkpoint format {:?}", manifest.format)));
    }
    let wpath = path.with_file_name(&manifest.weights_file);
    let bytes = fs::read(&wpath).map_err(|e| DfcnError::io(&wpath, e))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    if digest != manifest.weights_sha256 {
        return Err(DfcnError::Integrity {
            file: wpath.display().to_string(),
            expected: manifest.weights_sha256,
            found: digest,
        });
    }

    let dims = &manifest.dims;
    let mut arch = manifest.config.architecture.clone();
    arch.ae_hidden = dims.ae_hidden.clone();
    arch.igae_hidden = dims.igae_hidden.clone();
    arch.latent_dim = dims.latent_dim;
    let mut params = ModelParams::init(&mut ChaCha8Rng::seed_from_u64(0), dims.input_dim, &arch);
    if let Some(k) = dims.clusters {
        let dof = manifest
            .dof
            .ok_or_else(|| DfcnError::Validation("checkpoint has centers but no dof".into()))?;
        params.centers = Some(Centers::new(Matrix::zeros(k, dims.latent_dim), dof)?);
    }

    let expected = params.named_tensors();
    if expected.len() != manifest.blocks.len() {
        return Err(DfcnError::Validation(format!(
            "checkpoint lists {} blocks, its dimensions imply {}",
            manifest.blocks.len(),
            expected.len()
        )));
    }
    let mut values = Vec::with_capacity(expected.len());
    for ((name, m), block) in expected.iter().zip(&manifest.blocks) {
        if *name != block.name || m.shape() != (block.rows, block.cols) {
            return Err(DfcnError::Validation(format!(
                "block {} is {}x{}, expected {} of shape {:?}",
                block.name,
                block.rows,
                block.cols,
                name,
                m.shape()
            )));
        }
        if block.len != block.rows * block.cols * 8 || block.offset + block.len > bytes.len() {
            return Err(DfcnError::Validation(format!("block {} has an invalid byte range", block.name)));
        }
        let data = bytes[block.offset..block.offset + block.len]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        values.push(Matrix::from_vec(block.rows, block.cols, data)?);
    }
    params.set_tensors(&values)?;
    params.validate()?;
    Ok(Checkpoint {
        params,
        config: manifest.config,
        phase: manifest.phase,
    })
}
