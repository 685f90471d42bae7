use serde::{Deserialize, Serialize};

use crate::error::{DfcnError, Result};
use crate::igae::ReconMode;
use crate::model::Architecture;
use crate::saif::{DecoderInput, ForwardOptions};

/// Learning-rate tiers.
pub const LR_FAST: f64 = 1e-3;
pub const LR_MEDIUM: f64 = 1e-4;
pub const LR_SLOW: f64 = 5e-5;

/// Self-supervision variant used during fine-tuning.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Supervision {
    /// KL of the target against the mean of all three soft assignments.
    #[default]
    Triplet,
    /// KL of the target against the consensus soft assignment only.
    Single,
}

/// Hyper-parameters, schedule, and ablation switches for the three training phases.
///
/// Field names double as the JSON config keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub lambda: f64,
    /// Target distribution refresh interval, in fine-tuning iterations.
    #[serde(rename = "T")]
    pub target_interval: usize,
    pub iters_pre: usize,
    pub iters_joint: usize,
    /// Minimum number of fine-tuning iterations.
    pub iters_finetune: usize,
    /// Hard cap on fine-tuning iterations; early stopping may end the run
    /// anywhere between `iters_finetune` and this cap.
    pub max_finetune: Option<usize>,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Iterations without a total-loss improvement above `min_improvement` before stopping.
    pub patience: usize,
    pub min_improvement: f64,
    /// Student-t degrees of freedom.
    pub dof: f64,
    pub kmeans_restarts: usize,
    /// Cross-modality fusion on/off.
    pub fusion: bool,
    pub supervision: Supervision,
    pub recon: ReconMode,
    pub multi_level_adjacency: bool,
    pub architecture: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.1,
            lambda: 10.0,
            target_interval: 1,
            iters_pre: 30,
            iters_joint: 100,
            iters_finetune: 200,
            max_finetune: None,
            lr: LR_FAST,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            patience: 50,
            min_improvement: 1e-6,
            dof: 1.0,
            kmeans_restarts: 20,
            fusion: true,
            supervision: Supervision::Triplet,
            recon: ReconMode::Both,
            multi_level_adjacency: false,
            architecture: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("T", self.target_interval),
            ("iters_pre", self.iters_pre),
            ("iters_joint", self.iters_joint),
            ("iters_finetune", self.iters_finetune),
            ("kmeans_restarts", self.kmeans_restarts),
            ("architecture.latent_dim", self.architecture.latent_dim),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(DfcnError::Validation(format!("{name} must be at least 1")));
            }
        }
        let nonneg = [
            ("gamma", self.gamma),
            ("lambda", self.lambda),
            ("lr", self.lr),
            ("adam_eps", self.adam_eps),
            ("min_improvement", self.min_improvement),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(DfcnError::Validation(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(DfcnError::Validation(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.dof > 0.0) {
            return Err(DfcnError::Validation(format!("dof must be positive, got {}", self.dof)));
        }
        if let Some(cap) = self.max_finetune {
            if cap < self.iters_finetune {
                return Err(DfcnError::Validation(format!(
                    "max_finetune ({cap}) is below iters_finetune ({})",
                    self.iters_finetune
                )));
            }
        }
        if self.architecture.ae_hidden.contains(&0) || self.architecture.igae_hidden.contains(&0) {
            return Err(DfcnError::Validation("hidden layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn finetune_cap(&self) -> usize {
        self.max_finetune.unwrap_or(self.iters_finetune).max(self.iters_finetune)
    }

    /// Forward wiring for the joint and fine-tuning phases.
    pub fn forward_options(&self) -> ForwardOptions {
        ForwardOptions {
            fusion: self.fusion,
            decoder_input: DecoderInput::Consensus,
            multi_level_adjacency: self.multi_level_adjacency,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainConfig = serde_json::from_str(text).map_err(|source| DfcnError::Json {
            context: "train config".into(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}
