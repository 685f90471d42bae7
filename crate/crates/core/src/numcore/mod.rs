//! Dense matrices, a reverse-mode tape over them, and a finite-difference gradient checker.

mod gradcheck;
mod matrix;
mod tape;

pub use gradcheck::{finite_diff_check, GradCheckReport, DEFAULT_EPSILON};
pub use matrix::Matrix;
pub use tape::{Activation, Gradients, Tape, Var, KL_EPS};

pub(crate) use tape::{kl_value, student_kernel_values};

use rand::Rng;

/// Glorot-uniform `fan_in x fan_out` weight matrix.
pub fn glorot_uniform<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize) -> Matrix {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Matrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-bound..bound))
}
