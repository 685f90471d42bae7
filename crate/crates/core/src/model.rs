//! The complete set of learnable state and its binding onto a tape.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ae::{AeParams, AeVars};
use crate::error::{DfcnError, Result};
use crate::igae::{IgaeParams, IgaeVars};
use crate::numcore::{Activation, Matrix, Tape, Var};
use crate::saif::FusionParams;
use crate::selfsup::Centers;

/// Layer sizes and activations of both sub-networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Architecture {
    pub ae_hidden: Vec<usize>,
    pub igae_hidden: Vec<usize>,
    pub latent_dim: usize,
    pub ae_activation: Activation,
    pub igae_activation: Activation,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            ae_hidden: vec![128, 256, 512],
            igae_hidden: vec![128, 256],
            latent_dim: 20,
            ae_activation: Activation::LeakyRelu(0.2),
            igae_activation: Activation::Tanh,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub ae: AeParams,
    pub igae: IgaeParams,
    pub fusion: FusionParams,
    /// Present once centers have been initialized.
    pub centers: Option<Centers>,
}

impl ModelParams {
    pub fn init<R: Rng + ?Sized>(rng: &mut R, input_dim: usize, arch: &Architecture) -> Self {
        let ae = AeParams::init(rng, input_dim, &arch.ae_hidden, arch.latent_dim, arch.ae_activation);
        let igae = IgaeParams::init(rng, input_dim, &arch.igae_hidden, arch.latent_dim, arch.igae_activation);
        ModelParams {
            ae,
            igae,
            fusion: FusionParams::default(),
            centers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ae.validate()?;
        self.igae.validate()?;
        if self.ae.input_dim() != self.igae.input_dim() || self.ae.latent_dim() != self.igae.latent_dim() {
            return Err(DfcnError::Validation(format!(
                "autoencoder is {} -> {} but graph autoencoder is {} -> {}",
                self.ae.input_dim(),
                self.ae.latent_dim(),
                self.igae.input_dim(),
                self.igae.latent_dim()
            )));
        }
        if let Some(c) = &self.centers {
            if c.u.cols() != self.ae.latent_dim() {
                return Err(DfcnError::Validation(format!(
                    "centers have dimension {}, latent dimension is {}",
                    c.u.cols(),
                    self.ae.latent_dim()
                )));
            }
        }
        Ok(())
    }

    /// Named copies of every tensor, in the order used by [`ModelVars::all`].
    pub fn named_tensors(&self) -> Vec<(String, Matrix)> {
        let mut out: Vec<(String, Matrix)> = self
            .ae
            .tensors()
            .into_iter()
            .chain(self.igae.tensors())
            .map(|(n, m)| (n, m.clone()))
            .collect();
        out.push(("fusion.alpha".into(), Matrix::scalar(self.fusion.alpha)));
        out.push(("fusion.beta".into(), Matrix::scalar(self.fusion.beta)));
        if let Some(c) = &self.centers {
            out.push(("centers.u".into(), c.u.clone()));
        }
        out
    }

    pub fn tensors(&self) -> Vec<Matrix> {
        self.named_tensors().into_iter().map(|(_, m)| m).collect()
    }

    /// Overwrites every tensor from `values`, in [`ModelParams::named_tensors`] order.
    pub fn set_tensors(&mut self, values: &[Matrix]) -> Result<()> {
        let expected = self.named_tensors();
        if values.len() != expected.len() {
            return Err(DfcnError::Validation(format!(
                "expected {} tensors, got {}",
                expected.len(),
                values.len()
            )));
        }
        for ((name, cur), new) in expected.iter().zip(values) {
            if cur.shape() != new.shape() {
                return Err(DfcnError::Validation(format!(
                    "tensor {name}: expected {:?}, got {:?}",
                    cur.shape(),
                    new.shape()
                )));
            }
        }
        let mut it = values.iter();
        for slot in self.ae.tensors_mut().into_iter().chain(self.igae.tensors_mut()) {
            *slot = it.next().unwrap().clone();
        }
        self.fusion.alpha = it.next().unwrap().data()[0];
        self.fusion.beta = it.next().unwrap().data()[0];
        if let Some(c) = &mut self.centers {
            c.u = it.next().unwrap().clone();
        }
        Ok(())
    }

    pub fn bind(&self, tape: &mut Tape) -> ModelVars {
        let ae = self.ae.bind(tape);
        let igae = self.igae.bind(tape);
        let alpha = tape.leaf(Matrix::scalar(self.fusion.alpha));
        let beta = tape.leaf(Matrix::scalar(self.fusion.beta));
        let centers = self.centers.as_ref().map(|c| (tape.leaf(c.u.clone()), c.dof));
        ModelVars {
            ae,
            igae,
            alpha,
            beta,
            centers,
        }
    }
}

/// Tape handles for [`ModelParams`].
#[derive(Clone, Debug)]
pub struct ModelVars {
    pub ae: AeVars,
    pub igae: IgaeVars,
    pub alpha: Var,
    pub beta: Var,
    /// Center leaf and degrees of freedom.
    pub centers: Option<(Var, f64)>,
}

impl ModelVars {
    pub fn all(&self) -> Vec<Var> {
        let mut out = self.ae.all();
        out.extend(self.igae.all());
        out.push(self.alpha);
        out.push(self.beta);
        if let Some((u, _)) = self.centers {
            out.push(u);
        }
        out
    }

    /// Rebuilds handles from a flat leaf list in [`ModelParams::named_tensors`] order,
    /// using `template` for the layer structure.
    pub fn from_flat(template: &ModelParams, vars: &[Var]) -> Result<Self> {
        let n_ae = 2 * (template.ae.encoder.len() + template.ae.decoder.len());
        let n_igae = template.igae.encoder.len() + template.igae.decoder.len();
        let expected = n_ae + n_igae + 2 + usize::from(template.centers.is_some());
        if vars.len() != expected {
            return Err(DfcnError::Validation(format!("expected {expected} leaves, got {}", vars.len())));
        }
        let pairs = |vs: &[Var]| vs.chunks(2).map(|c| (c[0], c[1])).collect::<Vec<_>>();
        let enc_len = 2 * template.ae.encoder.len();
        let ae = AeVars {
            encoder: pairs(&vars[..enc_len]),
            decoder: pairs(&vars[enc_len..n_ae]),
            activation: template.ae.activation,
        };
        let ig = &vars[n_ae..n_ae + n_igae];
        let igae = IgaeVars {
            encoder: ig[..template.igae.encoder.len()].to_vec(),
            decoder: ig[template.igae.encoder.len()..].to_vec(),
            activation: template.igae.activation,
        };
        let rest = &vars[n_ae + n_igae..];
        Ok(ModelVars {
            ae,
            igae,
            alpha: rest[0],
            beta: rest[1],
            centers: template.centers.as_ref().map(|c| (rest[2], c.dof)),
        })
    }
}
