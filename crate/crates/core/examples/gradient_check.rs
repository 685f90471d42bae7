//! Checks the tape gradient of the full joint objective against central
//! finite differences on a small two-block graph.
//!
//! cargo run --release --example gradient_check

use dfcn::model::{Architecture, ModelParams, ModelVars};
use dfcn::numcore::{finite_diff_check, Tape, Var, DEFAULT_EPSILON};
use dfcn::saif::saif_forward;
use dfcn::trainer::{init_centers, joint_objective_on, Supervision, Target, TrainConfig, TrainInputs};
use dfcn::{sbm_synthesize, SbmConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dfcn::Result<()> {
    let data = sbm_synthesize(&SbmConfig {
        sizes: vec![6, 6],
        p_in: 0.6,
        p_out: 0.1,
        attr_dim: 4,
        attr_sep: 3.0,
        seed: 11,
    })?;
    let cfg = TrainConfig {
        architecture: Architecture {
            ae_hidden: vec![6, 5],
            igae_hidden: vec![5],
            latent_dim: 3,
            ..Architecture::default()
        },
        ..TrainConfig::default()
    };
    let mut params = ModelParams::init(&mut ChaCha8Rng::seed_from_u64(3), data.dim(), &cfg.architecture);
    params.fusion.alpha = 0.4;
    params.fusion.beta = 0.3;
    let z = saif_forward(&data, &params, cfg.forward_options())?.z_tilde;
    params.centers = Some(init_centers(&z, data.k, &cfg)?);
    let inputs = TrainInputs::new(&data)?;

    // the target is a constant of the objective, so fix it once
    let p = {
        let mut tape = Tape::new();
        let vars = params.bind(&mut tape);
        let iv = inputs.bind(&mut tape);
        joint_objective_on(&mut tape, &iv, &inputs.adj_norm, &vars, &cfg, Target::Refresh)?
            .target
            .expect("refresh yields a target")
    };

    for supervision in [Supervision::Triplet, Supervision::Single] {
        let cfg = TrainConfig {
            supervision,
            ..cfg.clone()
        };
        let objective = |tape: &mut Tape, leaves: &[Var]| {
            let vars = ModelVars::from_flat(&params, leaves)?;
            let iv = inputs.bind(tape);
            Ok(joint_objective_on(tape, &iv, &inputs.adj_norm, &vars, &cfg, Target::Fixed(&p))?.loss.total)
        };
        let r = finite_diff_check(objective, &params.tensors(), DEFAULT_EPSILON)?;
        println!(
            "{supervision:?}: {} coordinates, max rel error {:.2e}, worst at {:?}",
            r.coordinates, r.max_rel_error, r.worst
        );
    }
    Ok(())
}
