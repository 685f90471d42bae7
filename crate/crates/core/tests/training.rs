use dfcn::graph::{sbm_synthesize, GraphData, SbmConfig, SparseAdjacency};
use dfcn::igae::ReconMode;
use dfcn::model::Architecture;
use dfcn::numcore::Matrix;
use dfcn::trainer::{train, Phase, Supervision, TrainConfig};
use dfcn::DfcnError;

fn fixture(seed: u64) -> GraphData {
    sbm_synthesize(&SbmConfig {
        sizes: vec![20, 20, 20],
        ..SbmConfig::standard(seed)
    })
    .unwrap()
}

fn quick(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        iters_pre: 8,
        iters_joint: 10,
        iters_finetune: 15,
        kmeans_restarts: 4,
        architecture: Architecture {
            ae_hidden: vec![16, 16],
            igae_hidden: vec![16],
            latent_dim: 5,
            ..Architecture::default()
        },
        ..TrainConfig::default()
    }
}

#[test]
fn logged_total_is_exact_sum_of_components() {
    let data = fixture(1);
    let variants = [
        quick(1),
        TrainConfig {
            recon: ReconMode::WeightedAttr,
            ..quick(1)
        },
        TrainConfig {
            recon: ReconMode::Adjacency,
            supervision: Supervision::Single,
            ..quick(1)
        },
        TrainConfig {
            fusion: false,
            lambda: 0.37,
            gamma: 2.5,
            ..quick(1)
        },
    ];
    for cfg in variants {
        let report = train(&data, &cfg).unwrap().report;
        for r in &report.losses {
            assert_eq!(r.total.to_bits(), r.recombined(&cfg).to_bits(), "{r:?}");
        }
    }
}

#[test]
fn phases_log_the_expected_terms() {
    let cfg = quick(2);
    let report = train(&fixture(2), &cfg).unwrap().report;
    let count = |p| report.phase_losses(p).count();
    assert_eq!(count(Phase::PretrainAe), cfg.iters_pre);
    assert_eq!(count(Phase::PretrainIgae), cfg.iters_pre);
    assert_eq!(count(Phase::Joint), cfg.iters_joint);
    assert_eq!(count(Phase::Finetune), cfg.iters_finetune);
    for r in report.phase_losses(Phase::PretrainAe) {
        assert!(r.l_ae > 0.0 && r.l_w == 0.0 && r.l_a == 0.0 && r.l_kl == 0.0);
    }
    for r in report.phase_losses(Phase::PretrainIgae) {
        assert!(r.l_ae == 0.0 && r.l_w > 0.0 && r.l_a > 0.0 && r.l_kl == 0.0);
    }
    for r in report.phase_losses(Phase::Joint) {
        assert!(r.l_ae > 0.0 && r.l_w > 0.0 && r.l_kl == 0.0);
    }
    for r in report.phase_losses(Phase::Finetune) {
        assert!(r.l_kl > 0.0);
    }
    // fusion weights move only once they are trained
    let joint: Vec<_> = report.phase_losses(Phase::Joint).collect();
    assert_eq!((joint[0].alpha, joint[0].beta), (0.5, 0.0));
    assert_ne!(joint.last().unwrap().alpha, 0.5);
    assert!(report.losses.iter().all(|r| r.alpha.is_finite() && r.beta.is_finite()));
    assert_eq!(report.labels.len(), 60);
    assert_eq!(report.embedding.shape(), (60, 5));
}

#[test]
fn seeded_runs_are_bitwise_reproducible() {
    let data = fixture(3);
    let a = train(&data, &quick(3)).unwrap();
    let b = train(&data, &quick(3)).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.report.losses, b.report.losses);
    assert_eq!(a.report.labels, b.report.labels);
    assert_eq!(a.report.embedding, b.report.embedding);
    let c = train(&data, &quick(4)).unwrap();
    assert_ne!(a.report.losses, c.report.losses);
}

#[test]
fn zero_lambda_removes_the_clustering_influence() {
    let data = fixture(5);
    let triplet = TrainConfig {
        lambda: 0.0,
        ..quick(5)
    };
    let single = TrainConfig {
        supervision: Supervision::Single,
        ..triplet.clone()
    };
    let a = train(&data, &triplet).unwrap().report;
    let b = train(&data, &single).unwrap().report;
    for (x, y) in a.losses.iter().zip(&b.losses) {
        assert_eq!(x.total.to_bits(), y.total.to_bits());
        assert_eq!(x.total, x.l_ae + cfg_recon(&triplet, x.l_w, x.l_a));
    }
}

fn cfg_recon(cfg: &TrainConfig, l_w: f64, l_a: f64) -> f64 {
    cfg.recon.combine(l_w, l_a, cfg.gamma)
}

#[test]
fn early_stop_stays_within_bounds() {
    let data = fixture(6);
    let cfg = TrainConfig {
        iters_finetune: 5,
        max_finetune: Some(40),
        patience: 3,
        min_improvement: 1e9,
        ..quick(6)
    };
    let n = train(&data, &cfg).unwrap().report.phase_losses(Phase::Finetune).count();
    // nothing ever counts as an improvement, so the run ends at the minimum
    assert_eq!(n, 5);
    let cfg = TrainConfig {
        min_improvement: 0.0,
        patience: 1000,
        ..cfg
    };
    let n = train(&data, &cfg).unwrap().report.phase_losses(Phase::Finetune).count();
    assert_eq!(n, 40);
}

#[test]
fn divergence_carries_the_partial_report() {
    let x = Matrix::from_fn(6, 2, |i, j| if i == 0 && j == 0 { 1e200 } else { (i + j) as f64 });
    let adj = SparseAdjacency::from_edges(6, [(0, 1), (2, 3), (4, 5)]).unwrap();
    let data = GraphData::new(x, adj, None, 2).unwrap();
    let err = train(&data, &quick(0)).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    match err {
        DfcnError::Divergence {
            phase,
            iteration,
            last_report,
        } => {
            assert_eq!((phase, iteration), ("pretrain_ae", 0));
            assert!(last_report.unwrap().losses.is_empty());
        }
        other => panic!("expected divergence, got {other}"),
    }
}

#[test]
fn too_many_clusters_is_a_parameter_error() {
    let x = Matrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
    let adj = SparseAdjacency::from_edges(3, [(0, 1)]).unwrap();
    let data = GraphData::new(x, adj, None, 4).unwrap();
    assert!(matches!(train(&data, &quick(0)), Err(DfcnError::Parameter(_))));
}
