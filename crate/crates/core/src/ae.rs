//! Fully connected autoencoder over node attributes.
//!
//! The encoder produces `Z_AE`; during joint training the decoder is fed the
//! fused consensus embedding rather than `Z_AE`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DfcnError, Result};
use crate::numcore::{glorot_uniform, Activation, Matrix, Tape, Var};

/// One affine layer: `H W + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// fan_in x fan_out
    pub weight: Matrix,
    /// 1 x fan_out
    pub bias: Matrix,
}

impl DenseLayer {
    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.cols()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AeParams {
    pub encoder: Vec<DenseLayer>,
    pub decoder: Vec<DenseLayer>,
    /// Applied after every layer except the last of each stack.
    pub activation: Activation,
}

fn chain(dims: &[usize], mut layer: impl FnMut(usize, usize) -> DenseLayer) -> Vec<DenseLayer> {
    dims.windows(2).map(|w| layer(w[0], w[1])).collect()
}

fn check_chain(layers: &[DenseLayer], what: &str) -> Result<()> {
    for (i, l) in layers.iter().enumerate() {
        if l.bias.shape() != (1, l.output_dim()) {
            return Err(DfcnError::Validation(format!(
                "{what} layer {i}: bias is {:?}, weight is {:?}",
                l.bias.shape(),
                l.weight.shape()
            )));
        }
        if let Some(next) = layers.get(i + 1) {
            if next.input_dim() != l.output_dim() {
                return Err(DfcnError::Validation(format!(
                    "{what} layer {} expects {} inputs but layer {i} emits {}",
                    i + 1,
                    next.input_dim(),
                    l.output_dim()
                )));
            }
        }
    }
    Ok(())
}

impl AeParams {
    /// Glorot-initialized weights and zero biases for `d -> hidden.. -> latent -> ..hidden -> d`.
    pub fn init<R: Rng + ?Sized>(
        rng: &mut R,
        input_dim: usize,
        hidden: &[usize],
        latent_dim: usize,
        activation: Activation,
    ) -> Self {
        let (enc_dims, dec_dims) = layer_dims(input_dim, hidden, latent_dim);
        let mut make = |i, o| DenseLayer {
            weight: glorot_uniform(rng, i, o),
            bias: Matrix::zeros(1, o),
        };
        let encoder = chain(&enc_dims, &mut make);
        let decoder = chain(&dec_dims, &mut make);
        AeParams {
            encoder,
            decoder,
            activation,
        }
    }

    pub fn zeros(input_dim: usize, hidden: &[usize], latent_dim: usize, activation: Activation) -> Self {
        let (enc_dims, dec_dims) = layer_dims(input_dim, hidden, latent_dim);
        let make = |i, o| DenseLayer {
            weight: Matrix::zeros(i, o),
            bias: Matrix::zeros(1, o),
        };
        AeParams {
            encoder: chain(&enc_dims, make),
            decoder: chain(&dec_dims, make),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.first().map_or(0, DenseLayer::input_dim)
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.last().map_or(0, DenseLayer::output_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder.is_empty() || self.decoder.is_empty() {
            return Err(DfcnError::Validation("autoencoder needs at least one layer per stack".into()));
        }
        check_chain(&self.encoder, "ae encoder")?;
        check_chain(&self.decoder, "ae decoder")?;
        let dec_in = self.decoder[0].input_dim();
        let dec_out = self.decoder.last().unwrap().output_dim();
        if dec_in != self.latent_dim() || dec_out != self.input_dim() {
            return Err(DfcnError::Validation(format!(
                "ae decoder maps {dec_in} -> {dec_out}, expected {} -> {}",
                self.latent_dim(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Named tensors in a fixed order shared by [`AeParams::tensors_mut`] and [`AeVars::all`].
    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::new();
        for (stack, layers) in [("enc", &self.encoder), ("dec", &self.decoder)] {
            for (i, l) in layers.iter().enumerate() {
                out.push((format!("ae.{stack}.{i}.weight"), &l.weight));
                out.push((format!("ae.{stack}.{i}.bias"), &l.bias));
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    /// Records every parameter as a leaf.
    pub fn bind(&self, tape: &mut Tape) -> AeVars {
        let mut bind_stack =
            |layers: &[DenseLayer]| layers.iter().map(|l| (tape.leaf(l.weight.clone()), tape.leaf(l.bias.clone()))).collect();
        AeVars {
            encoder: bind_stack(&self.encoder),
            decoder: bind_stack(&self.decoder),
            activation: self.activation,
        }
    }
}

fn layer_dims(input_dim: usize, hidden: &[usize], latent_dim: usize) -> (Vec<usize>, Vec<usize>) {
    let mut enc = vec![input_dim];
    enc.extend_from_slice(hidden);
    enc.push(latent_dim);
    let dec: Vec<usize> = enc.iter().rev().copied().collect();
    (enc, dec)
}

/// Tape handles for [`AeParams`].
#[derive(Clone, Debug)]
pub struct AeVars {
    pub encoder: Vec<(Var, Var)>,
    pub decoder: Vec<(Var, Var)>,
    pub activation: Activation,
}

impl AeVars {
    pub fn all(&self) -> Vec<Var> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .flat_map(|&(w, b)| [w, b])
            .collect()
    }
}

fn run_stack(tape: &mut Tape, input: Var, layers: &[(Var, Var)], act: Activation) -> Result<Var> {
    let mut h = input;
    for (i, &(w, b)) in layers.iter().enumerate() {
        let lin = tape.matmul(h, w)?;
        h = tape.add_row_bias(lin, b)?;
        if i + 1 < layers.len() {
            h = tape.activate(h, act);
        }
    }
    Ok(h)
}

pub fn ae_encode_on(tape: &mut Tape, x: Var, vars: &AeVars) -> Result<Var> {
    run_stack(tape, x, &vars.encoder, vars.activation)
}

pub fn ae_decode_on(tape: &mut Tape, z: Var, vars: &AeVars) -> Result<Var> {
    run_stack(tape, z, &vars.decoder, vars.activation)
}

/// `(1 / 2N) |X - X_hat|_F^2`.
pub fn ae_loss_on(tape: &mut Tape, x: Var, x_hat: Var) -> Result<Var> {
    let n = tape.value(x).rows().max(1);
    let diff = tape.sub(x, x_hat)?;
    let sq = tape.frobenius_sq(diff);
    Ok(tape.scale(sq, 1.0 / (2.0 * n as f64)))
}

pub fn ae_encode(x: &Matrix, params: &AeParams) -> Result<Matrix> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let xv = tape.leaf(x.clone());
    let z = ae_encode_on(&mut tape, xv, &vars)?;
    Ok(tape.value(z).clone())
}

pub fn ae_decode(z: &Matrix, params: &AeParams) -> Result<Matrix> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let zv = tape.leaf(z.clone());
    let x_hat = ae_decode_on(&mut tape, zv, &vars)?;
    Ok(tape.value(x_hat).clone())
}

pub fn ae_loss(x: &Matrix, x_hat: &Matrix) -> Result<f64> {
    if x.shape() != x_hat.shape() {
        return Err(DfcnError::shape("ae_loss", x.shape(), x_hat.shape()));
    }
    Ok(x.sub(x_hat)?.frobenius_sq() / (2.0 * x.rows().max(1) as f64))
}
