use super::{Matrix, Tape, Var};
use crate::error::{DfcnError, Result};

/// Default central-difference step.
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Outcome of [`finite_diff_check`].
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// max over coordinates of `|g_tape - g_fd| / max(1, |g_fd|)`
    pub max_rel_error: f64,
    /// (parameter index, flat entry index) of the worst coordinate
    pub worst: Option<(usize, usize)>,
    pub coordinates: usize,
}

/// Compares tape gradients of `f` against central finite differences.
///
/// `f` receives a fresh tape and one leaf per entry of `params`, and must
/// return a scalar node. Every coordinate of every parameter is perturbed.
pub fn finite_diff_check<F>(f: F, params: &[Matrix], epsilon: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |ps: &[Matrix]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.leaf(p.clone())).collect();
        let root = f(&mut tape, &vars)?;
        Ok(tape.scalar_value(root))
    };

    let first = eval(params)?;
    let second = eval(params)?;
    if first.to_bits() != second.to_bits() {
        return Err(DfcnError::Determinism { first, second });
    }

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let root = f(&mut tape, &vars)?;
    let grads = tape.backward(root)?;

    let mut work: Vec<Matrix> = params.to_vec();
    let mut max_rel_error = 0.0f64;
    let mut worst = None;
    let mut coordinates = 0;
    for (pi, var) in vars.iter().enumerate() {
        let analytic = grads.wrt(*var);
        for k in 0..params[pi].len() {
            let original = params[pi].data()[k];
            work[pi].data_mut()[k] = original + epsilon;
            let plus = eval(&work)?;
            work[pi].data_mut()[k] = original - epsilon;
            let minus = eval(&work)?;
            work[pi].data_mut()[k] = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let err = (analytic.data()[k] - numeric).abs() / numeric.abs().max(1.0);
            if err > max_rel_error || err.is_nan() {
                max_rel_error = err;
                worst = Some((pi, k));
            }
            coordinates += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_error,
        worst,
        coordinates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_at_three() {
        let report = finite_diff_check(
            |t, v| Ok(t.frobenius_sq(v[0])),
            &[Matrix::scalar(3.0)],
            DEFAULT_EPSILON,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-8, "{report:?}");
    }

    #[test]
    fn constant_function_has_zero_error() {
        let report = finite_diff_check(
            |t, _| Ok(t.leaf(Matrix::scalar(7.0))),
            &[Matrix::from_rows(&[[1.0, -2.0]])],
            DEFAULT_EPSILON,
        )
        .unwrap();
        assert_eq!(report.max_rel_error, 0.0);
        assert_eq!(report.coordinates, 2);
    }

    #[test]
    fn nondeterministic_function_is_detected() {
        use std::cell::Cell;
        let calls = Cell::new(0.0);
        let err = finite_diff_check(
            |t, _| {
                calls.set(calls.get() + 1.0);
                Ok(t.leaf(Matrix::scalar(calls.get())))
            },
            &[Matrix::scalar(1.0)],
            DEFAULT_EPSILON,
        )
        .unwrap_err();
        assert!(matches!(err, DfcnError::Determinism { .. }));
    }
}
