//! Three-phase training: independent pretraining of both sub-networks, joint
//! pretraining through the fusion module, then self-supervised fine-tuning
//! against a periodically refreshed target distribution.

mod adam;
pub mod checkpoint;
mod config;

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use config::{Supervision, TrainConfig, LR_FAST, LR_MEDIUM, LR_SLOW};

use crate::ae::{ae_decode_on, ae_encode_on, ae_loss_on, AeParams, AeVars};
use crate::cluster_eval::{evaluate, kmeans, EvalReport};
use crate::error::{DfcnError, Result};
use crate::graph::{GraphData, SparseAdjacency};
use crate::igae::{igae_decode_on, igae_encode_on, igae_loss_on, reconstruct_adjacency_on, IgaeParams, IgaeVars};
use crate::model::{ModelParams, ModelVars};
use crate::numcore::{Matrix, Tape, Var};
use crate::saif::{saif_forward, saif_forward_on, TraceVars};
use crate::selfsup::{single_kl_on, soft_assign_on, target_distribution, triplet_kl_on, Centers};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PretrainAe,
    PretrainIgae,
    Joint,
    Finetune,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::PretrainAe => "pretrain_ae",
            Phase::PretrainIgae => "pretrain_igae",
            Phase::Joint => "joint",
            Phase::Finetune => "finetune",
        }
    }
}

/// Loss components of one iteration, evaluated before that iteration's update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub phase: Phase,
    pub iteration: usize,
    pub l_ae: f64,
    pub l_w: f64,
    pub l_a: f64,
    pub l_kl: f64,
    /// `L_AE + L_IGAE + lambda * L_KL`, as computed on the tape.
    pub total: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl LossRecord {
    /// Recomputes the total from the logged components.
    pub fn recombined(&self, cfg: &TrainConfig) -> f64 {
        self.l_ae + cfg.recon.combine(self.l_w, self.l_a, cfg.gamma) + cfg.lambda * self.l_kl
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub losses: Vec<LossRecord>,
    /// Consensus embedding after the last update (N x d').
    pub embedding: Matrix,
    pub labels: Vec<usize>,
    pub metrics: Option<EvalReport>,
    pub phase_seconds: Vec<(Phase, f64)>,
}

impl TrainReport {
    pub fn phase_losses(&self, phase: Phase) -> impl Iterator<Item = &LossRecord> {
        self.losses.iter().filter(move |r| r.phase == phase)
    }
}

/// Constant inputs shared by every iteration.
pub struct TrainInputs {
    pub x: Matrix,
    /// `A_norm X`, the graph decoder's reconstruction target.
    pub ax: Matrix,
    pub adj_dense: Matrix,
    pub adj_norm: Arc<SparseAdjacency>,
}

impl TrainInputs {
    pub fn new(data: &GraphData) -> Result<Self> {
        Ok(TrainInputs {
            x: data.x.clone(),
            ax: data.adj_norm.spmm(&data.x)?,
            adj_dense: data.adj_norm.to_dense(),
            adj_norm: Arc::clone(&data.adj_norm),
        })
    }

    pub fn bind(&self, tape: &mut Tape) -> InputVars {
        InputVars {
            x: tape.leaf(self.x.clone()),
            ax: tape.leaf(self.ax.clone()),
            adj_dense: tape.leaf(self.adj_dense.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct InputVars {
    pub x: Var,
    pub ax: Var,
    pub adj_dense: Var,
}

/// Tape handles of every loss term. Terms absent from a phase are zero leaves.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub l_ae: Var,
    pub l_w: Var,
    pub l_a: Var,
    pub l_kl: Var,
    pub total: Var,
}

/// Soft assignments recorded during fine-tuning.
#[derive(Clone, Copy, Debug)]
pub struct AssignVars {
    pub q: Var,
    pub q_igae: Var,
    pub q_ae: Var,
}

fn zero(tape: &mut Tape) -> Var {
    tape.leaf(Matrix::scalar(0.0))
}

/// `L_AE + L_IGAE + lambda * L_KL`, always assembled in this order.
fn assemble(
    tape: &mut Tape,
    l_ae: Var,
    igae_total: Var,
    l_w: Var,
    l_a: Var,
    l_kl: Var,
    lambda: f64,
) -> Result<LossVars> {
    let recon = tape.add(l_ae, igae_total)?;
    let clustering = tape.scale(l_kl, lambda);
    let total = tape.add(recon, clustering)?;
    Ok(LossVars {
        l_ae,
        l_w,
        l_a,
        l_kl,
        total,
    })
}

/// Autoencoder reconstructing from its own latent.
pub fn ae_pretrain_objective(tape: &mut Tape, inputs: &InputVars, ae: &AeVars, cfg: &TrainConfig) -> Result<LossVars> {
    let z = ae_encode_on(tape, inputs.x, ae)?;
    let x_hat = ae_decode_on(tape, z, ae)?;
    let l_ae = ae_loss_on(tape, inputs.x, x_hat)?;
    let (w, a, kl, ig) = (zero(tape), zero(tape), zero(tape), zero(tape));
    assemble(tape, l_ae, ig, w, a, kl, cfg.lambda)
}

/// Graph autoencoder reconstructing from its own latent.
pub fn igae_pretrain_objective(
    tape: &mut Tape,
    inputs: &InputVars,
    adj_norm: &Arc<SparseAdjacency>,
    igae: &IgaeVars,
    cfg: &TrainConfig,
) -> Result<LossVars> {
    let z = igae_encode_on(tape, adj_norm, inputs.x, igae)?;
    let decoded = igae_decode_on(tape, adj_norm, z, igae)?;
    let extra = cfg.multi_level_adjacency.then_some(decoded.last_hidden);
    let a_hat = reconstruct_adjacency_on(tape, z, extra)?;
    let l = igae_loss_on(tape, inputs.ax, decoded.z_hat, inputs.adj_dense, a_hat, cfg.gamma, cfg.recon)?;
    let (l_ae, kl) = (zero(tape), zero(tape));
    assemble(tape, l_ae, l.total, l.l_w, l.l_a, kl, cfg.lambda)
}

/// Where the clustering term's target distribution comes from.
#[derive(Clone, Copy, Debug)]
pub enum Target<'a> {
    /// No clustering term.
    None,
    /// A previously computed target.
    Fixed(&'a Arc<Matrix>),
    /// Recompute the target from this iteration's consensus assignment.
    Refresh,
}

/// Output of [`joint_objective_on`].
#[derive(Clone, Debug)]
pub struct Objective {
    pub trace: TraceVars,
    pub assignments: Option<AssignVars>,
    pub loss: LossVars,
    /// The target distribution used by the clustering term, if any.
    pub target: Option<Arc<Matrix>>,
}

/// Full objective through the fusion module. The clustering term is included
/// when centers are bound and a target is requested; otherwise it is zero.
pub fn joint_objective_on(
    tape: &mut Tape,
    inputs: &InputVars,
    adj_norm: &Arc<SparseAdjacency>,
    vars: &ModelVars,
    cfg: &TrainConfig,
    target: Target<'_>,
) -> Result<Objective> {
    let trace = saif_forward_on(tape, adj_norm, inputs.x, vars, cfg.forward_options())?;
    let l_ae = ae_loss_on(tape, inputs.x, trace.x_hat)?;
    let ig = igae_loss_on(tape, inputs.ax, trace.z_hat, inputs.adj_dense, trace.a_hat, cfg.gamma, cfg.recon)?;

    let mut assignments = None;
    let mut used = None;
    let l_kl = match (vars.centers, target) {
        (Some((u, dof)), Target::Fixed(_) | Target::Refresh) => {
            let q = soft_assign_on(tape, trace.z_tilde, u, dof)?;
            let q_igae = soft_assign_on(tape, trace.z_igae, u, dof)?;
            let q_ae = soft_assign_on(tape, trace.z_ae, u, dof)?;
            assignments = Some(AssignVars { q, q_igae, q_ae });
            let p = match target {
                Target::Fixed(p) => Arc::clone(p),
                _ => Arc::new(target_distribution(tape.value(q))),
            };
            let kl = match cfg.supervision {
                Supervision::Triplet => triplet_kl_on(tape, &p, q, q_igae, q_ae)?,
                Supervision::Single => single_kl_on(tape, &p, q)?,
            };
            used = Some(p);
            kl
        }
        _ => zero(tape),
    };
    let loss = assemble(tape, l_ae, ig.total, ig.l_w, ig.l_a, l_kl, cfg.lambda)?;
    Ok(Objective {
        trace,
        assignments,
        loss,
        target: used,
    })
}

fn adam_config(cfg: &TrainConfig) -> AdamConfig {
    AdamConfig {
        lr: cfg.lr,
        beta1: cfg.adam_beta1,
        beta2: cfg.adam_beta2,
        eps: cfg.adam_eps,
    }
}

struct PhaseRun<'a> {
    phase: Phase,
    min_iters: usize,
    max_iters: usize,
    cfg: &'a TrainConfig,
    /// Positions of alpha and beta inside the tensor list, if trained.
    fusion_slots: Option<(usize, usize)>,
    fixed_fusion: (f64, f64),
}

/// Adam over `tensors`. `objective` receives the tape, one leaf per tensor, and the iteration index.
fn run_phase<F>(run: &PhaseRun<'_>, tensors: &mut [Matrix], records: &mut Vec<LossRecord>, mut objective: F) -> Result<()>
where
    F: FnMut(&mut Tape, &[Var], usize) -> Result<LossVars>,
{
    let mut state = AdamState::new(tensors);
    let adam = adam_config(run.cfg);
    let mut best = f64::INFINITY;
    let mut stale = 0usize;
    for it in 0..run.max_iters {
        let mut tape = Tape::new();
        let leaves: Vec<Var> = tensors.iter().map(|t| tape.leaf(t.clone())).collect();
        let loss = objective(&mut tape, &leaves, it)?;
        let (alpha, beta) = match run.fusion_slots {
            Some((a, b)) => (tensors[a].data()[0], tensors[b].data()[0]),
            None => run.fixed_fusion,
        };
        let record = LossRecord {
            phase: run.phase,
            iteration: it,
            l_ae: tape.scalar_value(loss.l_ae),
            l_w: tape.scalar_value(loss.l_w),
            l_a: tape.scalar_value(loss.l_a),
            l_kl: tape.scalar_value(loss.l_kl),
            total: tape.scalar_value(loss.total),
            alpha,
            beta,
        };
        if !record.total.is_finite() {
            return Err(DfcnError::Divergence {
                phase: run.phase.name(),
                iteration: it,
                last_report: None,
            });
        }
        records.push(record);

        let grads = tape.backward(loss.total)?;
        let grads: Vec<Matrix> = leaves.iter().map(|&v| grads.wrt(v)).collect();
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(DfcnError::Divergence {
                phase: run.phase.name(),
                iteration: it,
                last_report: None,
            });
        }
        state.step(tensors, &grads, &adam)?;

        if best - record.total > run.cfg.min_improvement {
            best = record.total;
            stale = 0;
        } else {
            stale += 1;
        }
        if it + 1 >= run.min_iters && stale >= run.cfg.patience {
            log::info!("{}: early stop after {} iterations", run.phase.name(), it + 1);
            break;
        }
    }
    Ok(())
}

/// Trains the autoencoder alone on its own reconstruction.
pub fn pretrain_ae(
    data: &GraphData,
    cfg: &TrainConfig,
    init: AeParams,
    records: &mut Vec<LossRecord>,
) -> Result<AeParams> {
    cfg.validate()?;
    let inputs = TrainInputs::new(data)?;
    let mut params = init;
    let mut tensors: Vec<Matrix> = params.tensors().into_iter().map(|(_, m)| m.clone()).collect();
    let run = PhaseRun {
        phase: Phase::PretrainAe,
        min_iters: cfg.iters_pre,
        max_iters: cfg.iters_pre,
        cfg,
        fusion_slots: None,
        fixed_fusion: (0.5, 0.0),
    };
    let n_enc = params.encoder.len();
    let activation = params.activation;
    run_phase(&run, &mut tensors, records, |tape, leaves, _| {
        let pairs = |vs: &[Var]| vs.chunks(2).map(|c| (c[0], c[1])).collect::<Vec<_>>();
        let ae = AeVars {
            encoder: pairs(&leaves[..2 * n_enc]),
            decoder: pairs(&leaves[2 * n_enc..]),
            activation,
        };
        let iv = inputs.bind(tape);
        ae_pretrain_objective(tape, &iv, &ae, cfg)
    })?;
    for (slot, t) in params.tensors_mut().into_iter().zip(tensors) {
        *slot = t;
    }
    Ok(params)
}

/// Trains the graph autoencoder alone on its own reconstruction.
pub fn pretrain_igae(
    data: &GraphData,
    cfg: &TrainConfig,
    init: IgaeParams,
    records: &mut Vec<LossRecord>,
) -> Result<IgaeParams> {
    cfg.validate()?;
    let inputs = TrainInputs::new(data)?;
    let mut params = init;
    let mut tensors: Vec<Matrix> = params.tensors().into_iter().map(|(_, m)| m.clone()).collect();
    let run = PhaseRun {
        phase: Phase::PretrainIgae,
        min_iters: cfg.iters_pre,
        max_iters: cfg.iters_pre,
        cfg,
        fusion_slots: None,
        fixed_fusion: (0.5, 0.0),
    };
    let n_enc = params.encoder.len();
    let activation = params.activation;
    run_phase(&run, &mut tensors, records, |tape, leaves, _| {
        let igae = IgaeVars {
            encoder: leaves[..n_enc].to_vec(),
            decoder: leaves[n_enc..].to_vec(),
            activation,
        };
        let iv = inputs.bind(tape);
        igae_pretrain_objective(tape, &iv, &inputs.adj_norm, &igae, cfg)
    })?;
    for (slot, t) in params.tensors_mut().into_iter().zip(tensors) {
        *slot = t;
    }
    Ok(params)
}

fn fusion_slots(params: &ModelParams) -> (usize, usize) {
    let names = params.named_tensors();
    let a = names.iter().position(|(n, _)| n == "fusion.alpha").unwrap();
    (a, a + 1)
}

/// Optimizes both reconstruction losses through the fusion module.
pub fn joint_pretrain(
    data: &GraphData,
    params: ModelParams,
    cfg: &TrainConfig,
    records: &mut Vec<LossRecord>,
) -> Result<ModelParams> {
    cfg.validate()?;
    let inputs = TrainInputs::new(data)?;
    let mut template = params;
    template.centers = None;
    let mut tensors = template.tensors();
    let run = PhaseRun {
        phase: Phase::Joint,
        min_iters: cfg.iters_joint,
        max_iters: cfg.iters_joint,
        cfg,
        fusion_slots: Some(fusion_slots(&template)),
        fixed_fusion: (0.0, 0.0),
    };
    run_phase(&run, &mut tensors, records, |tape, leaves, _| {
        let vars = ModelVars::from_flat(&template, leaves)?;
        let iv = inputs.bind(tape);
        Ok(joint_objective_on(tape, &iv, &inputs.adj_norm, &vars, cfg, Target::None)?.loss)
    })?;
    template.set_tensors(&tensors)?;
    Ok(template)
}

/// K-means centers of the consensus embedding.
pub fn init_centers(z_tilde: &Matrix, k: usize, cfg: &TrainConfig) -> Result<Centers> {
    if k > z_tilde.rows() {
        return Err(DfcnError::Parameter(format!(
            "cannot place {k} centers among {} points",
            z_tilde.rows()
        )));
    }
    let km = kmeans(z_tilde, k, cfg.kmeans_restarts, cfg.seed)?;
    Centers::new(km.centers, cfg.dof)
}

/// Self-supervised fine-tuning. `params.centers` must be set.
pub fn finetune(
    data: &GraphData,
    params: ModelParams,
    cfg: &TrainConfig,
    records: &mut Vec<LossRecord>,
) -> Result<ModelParams> {
    cfg.validate()?;
    if params.centers.is_none() {
        return Err(DfcnError::Contract("fine-tuning needs initialized centers".into()));
    }
    let inputs = TrainInputs::new(data)?;
    let mut template = params;
    let mut tensors = template.tensors();
    let run = PhaseRun {
        phase: Phase::Finetune,
        min_iters: cfg.iters_finetune,
        max_iters: cfg.finetune_cap(),
        cfg,
        fusion_slots: Some(fusion_slots(&template)),
        fixed_fusion: (0.0, 0.0),
    };
    let mut target: Option<Arc<Matrix>> = None;
    run_phase(&run, &mut tensors, records, |tape, leaves, it| {
        let vars = ModelVars::from_flat(&template, leaves)?;
        let iv = inputs.bind(tape);
        let source = match &target {
            Some(p) if it % cfg.target_interval != 0 => Target::Fixed(p),
            _ => Target::Refresh,
        };
        let obj = joint_objective_on(tape, &iv, &inputs.adj_norm, &vars, cfg, source)?;
        target = obj.target;
        Ok(obj.loss)
    })?;
    template.set_tensors(&tensors)?;
    Ok(template)
}

/// Output of [`train`].
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub report: TrainReport,
}

/// Runs all phases from a seeded initialization and clusters the final consensus embedding.
pub fn train(data: &GraphData, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = ModelParams::init(&mut rng, data.dim(), &cfg.architecture);
    let mut records = Vec::new();
    let mut timings = Vec::new();

    let result = (|| -> Result<ModelParams> {
        let mut timed = |phase: Phase, start: Instant| timings.push((phase, secs(start.elapsed())));

        let t = Instant::now();
        let ae = pretrain_ae(data, cfg, init.ae.clone(), &mut records)?;
        timed(Phase::PretrainAe, t);

        let t = Instant::now();
        let igae = pretrain_igae(data, cfg, init.igae.clone(), &mut records)?;
        timed(Phase::PretrainIgae, t);

        let t = Instant::now();
        let joint = joint_pretrain(
            data,
            ModelParams {
                ae,
                igae,
                fusion: init.fusion,
                centers: None,
            },
            cfg,
            &mut records,
        )?;
        timed(Phase::Joint, t);

        let t = Instant::now();
        let z_tilde = saif_forward(data, &joint, cfg.forward_options())?.z_tilde;
        let mut with_centers = joint;
        with_centers.centers = Some(init_centers(&z_tilde, data.k, cfg)?);
        let tuned = finetune(data, with_centers, cfg, &mut records)?;
        timed(Phase::Finetune, t);
        Ok(tuned)
    })();

    let params = match result {
        Ok(p) => p,
        Err(DfcnError::Divergence { phase, iteration, .. }) => {
            return Err(DfcnError::Divergence {
                phase,
                iteration,
                last_report: Some(Box::new(TrainReport {
                    losses: records,
                    embedding: Matrix::zeros(0, 0),
                    labels: Vec::new(),
                    metrics: None,
                    phase_seconds: timings,
                })),
            })
        }
        Err(e) => return Err(e),
    };

    let (embedding, labels, metrics) = cluster_final(data, &params, cfg)?;
    Ok(TrainOutcome {
        params,
        report: TrainReport {
            losses: records,
            embedding,
            labels,
            metrics,
            phase_seconds: timings,
        },
    })
}

/// Result of [`train_igae_only`].
#[derive(Clone, Debug)]
pub struct IgaeBaseline {
    pub params: IgaeParams,
    pub losses: Vec<LossRecord>,
    pub embedding: Matrix,
    pub labels: Vec<usize>,
    pub metrics: Option<EvalReport>,
}

/// The graph autoencoder on its own: pretraining with `cfg.recon`, then
/// K-means on its latent. Initialization matches [`train`] for the same seed.
pub fn train_igae_only(data: &GraphData, cfg: &TrainConfig) -> Result<IgaeBaseline> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = ModelParams::init(&mut rng, data.dim(), &cfg.architecture);
    let mut losses = Vec::new();
    let params = pretrain_igae(data, cfg, init.igae, &mut losses)?;
    let embedding = crate::igae::igae_encode(&data.adj_norm, &data.x, &params)?;
    let labels = kmeans(&embedding, data.k, cfg.kmeans_restarts, cfg.seed)?.labels;
    let metrics = match &data.labels {
        Some(truth) => Some(evaluate(truth, &labels, data.k)?),
        None => None,
    };
    Ok(IgaeBaseline {
        params,
        losses,
        embedding,
        labels,
        metrics,
    })
}

/// K-means on the consensus embedding, plus metrics when ground truth exists.
pub fn cluster_final(
    data: &GraphData,
    params: &ModelParams,
    cfg: &TrainConfig,
) -> Result<(Matrix, Vec<usize>, Option<EvalReport>)> {
    let z = saif_forward(data, params, cfg.forward_options())?.z_tilde;
    let labels = kmeans(&z, data.k, cfg.kmeans_restarts, cfg.seed)?.labels;
    let metrics = match &data.labels {
        Some(truth) => Some(evaluate(truth, &labels, data.k)?),
        None => None,
    };
    Ok((z, labels, metrics))
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}
