use crate::error::{DfcnError, Result};
use crate::numcore::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// First and second moment estimates for a fixed list of tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &[Matrix]) -> Self {
        let zeros: Vec<Matrix> = params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update of every tensor in place.
    pub fn step(&mut self, params: &mut [Matrix], grads: &[Matrix], cfg: &AdamConfig) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(DfcnError::Contract(format!(
                "adam: {} params, {} grads, state for {}",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(DfcnError::shape("adam_step", p.shape(), g.shape()));
            }
        }
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for (((pv, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut())
            {
                *mv = cfg.beta1 * *mv + (1.0 - cfg.beta1) * gv;
                *vv = cfg.beta2 * *vv + (1.0 - cfg.beta2) * gv * gv;
                let m_hat = *mv / bc1;
                let v_hat = *vv / bc2;
                *pv -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
        Ok(())
    }
}

/// Functional form: returns updated copies of `params`.
pub fn adam_step(
    params: &[Matrix],
    grads: &[Matrix],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<Vec<Matrix>> {
    let mut out = params.to_vec();
    state.step(&mut out, grads, cfg)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CFG: AdamConfig = AdamConfig {
        lr: 0.01,
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };

    #[test]
    fn zero_gradient_leaves_params() {
        let p = vec![Matrix::from_rows(&[[1.0, -2.0]])];
        let mut st = AdamState::new(&p);
        let out = adam_step(&p, &[Matrix::zeros(1, 2)], &mut st, &CFG).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn first_step_closed_form() {
        let p = vec![Matrix::from_rows(&[[1.0, -2.0, 0.5]])];
        let g = vec![Matrix::from_rows(&[[0.3, -4.0, 1e-3]])];
        let mut st = AdamState::new(&p);
        let out = adam_step(&p, &g, &mut st, &CFG).unwrap();
        for k in 0..3 {
            let gv = g[0].data()[k];
            let expect = p[0].data()[k] - CFG.lr * gv / (gv.abs() + CFG.eps);
            assert!((out[0].data()[k] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn identical_sequences_identical_states() {
        let p = vec![Matrix::from_rows(&[[1.0, 2.0]])];
        let gs = [[0.1, -0.2], [0.3, 0.0], [-1.0, 2.0]];
        let run = || {
            let mut st = AdamState::new(&p);
            let mut cur = p.clone();
            for g in gs {
                cur = adam_step(&cur, &[Matrix::from_rows(&[g])], &mut st, &CFG).unwrap();
            }
            (cur, st)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let p = vec![Matrix::zeros(1, 2)];
        let mut st = AdamState::new(&p);
        assert!(adam_step(&p, &[Matrix::zeros(2, 1)], &mut st, &CFG).is_err());
    }
}
