use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::kuhn_munkres;
use crate::error::{DfcnError, Result};
use crate::numcore::Matrix;

/// Normalizer of mutual information in [`nmi_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmiNorm {
    #[default]
    Arithmetic,
    Geometric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
    pub f1: f64,
    /// `contingency[c][t]` counts nodes in predicted cluster `c` with true class `t`.
    pub contingency: Vec<Vec<usize>>,
    /// `mapping[c]` is the class matched to cluster `c`.
    pub mapping: Vec<usize>,
}

fn check_pair(y_true: &[usize], y_pred: &[usize]) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(DfcnError::Validation(format!(
            "label length mismatch: {} true vs {} predicted",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(DfcnError::Validation("cannot score an empty labeling".into()));
    }
    Ok(())
}

fn check_range(labels: &[usize], k: usize, what: &str) -> Result<()> {
    match labels.iter().find(|&&l| l >= k) {
        Some(bad) => Err(DfcnError::Validation(format!("{what} label {bad} outside 0..{k}"))),
        None => Ok(()),
    }
}

/// K x K table, rows are predicted clusters and columns are true classes.
pub fn contingency(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<Vec<Vec<usize>>> {
    check_pair(y_true, y_pred)?;
    check_range(y_true, k, "true")?;
    check_range(y_pred, k, "predicted")?;
    let mut table = vec![vec![0usize; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        table[p][t] += 1;
    }
    Ok(table)
}

/// Cluster-to-class bijection maximizing the number of matched nodes.
pub fn best_mapping(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<Vec<usize>> {
    let table = contingency(y_true, y_pred, k)?;
    let cost = Matrix::from_fn(k, k, |c, t| -(table[c][t] as f64));
    Ok(kuhn_munkres(&cost)?.row_to_col)
}

pub fn accuracy(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<f64> {
    let table = contingency(y_true, y_pred, k)?;
    let mapping = best_mapping(y_true, y_pred, k)?;
    let hits: usize = mapping.iter().enumerate().map(|(c, &t)| table[c][t]).sum();
    Ok(hits as f64 / y_true.len() as f64)
}

/// Unweighted mean over the `k` classes of per-class F1, after mapping
/// predictions through [`best_mapping`]. A class with no true and no predicted
/// members scores 0.
pub fn macro_f1(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<f64> {
    let mapping = best_mapping(y_true, y_pred, k)?;
    let mut tp = vec![0usize; k];
    let mut fp = vec![0usize; k];
    let mut fn_ = vec![0usize; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        let mapped = mapping[p];
        if mapped == t {
            tp[t] += 1;
        } else {
            fp[mapped] += 1;
            fn_[t] += 1;
        }
    }
    let total: f64 = (0..k)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    Ok(total / k as f64)
}

fn dense_ids(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    for &l in labels {
        let next = ids.len();
        ids.entry(l).or_insert(next);
    }
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

fn general_contingency(y_true: &[usize], y_pred: &[usize]) -> Vec<Vec<f64>> {
    let (t, kt) = dense_ids(y_true);
    let (p, kp) = dense_ids(y_pred);
    let mut table = vec![vec![0.0; kp]; kt];
    for (&a, &b) in t.iter().zip(&p) {
        table[a][b] += 1.0;
    }
    table
}

fn entropy(counts: impl Iterator<Item = f64>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0.0)
        .map(|c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum()
}

pub fn nmi(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    nmi_with(y_true, y_pred, NmiNorm::Arithmetic)
}

/// Mutual information over the chosen mean of the two entropies, natural logs.
/// Two constant labelings score 1; a constant against a non-constant scores 0.
pub fn nmi_with(y_true: &[usize], y_pred: &[usize], norm: NmiNorm) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    let table = general_contingency(y_true, y_pred);
    let n = y_true.len() as f64;
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..table[0].len()).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let h_true = entropy(rows.iter().copied(), n);
    let h_pred = entropy(cols.iter().copied(), n);
    if h_true == 0.0 && h_pred == 0.0 {
        return Ok(1.0);
    }
    if h_true == 0.0 || h_pred == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0.0 {
                mi += c / n * (n * c / (rows[i] * cols[j])).ln();
            }
        }
    }
    let denom = match norm {
        NmiNorm::Arithmetic => (h_true + h_pred) / 2.0,
        NmiNorm::Geometric => (h_true * h_pred).sqrt(),
    };
    Ok((mi / denom).clamp(0.0, 1.0))
}

fn choose2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index from the contingency table. Identical trivial
/// partitions (all singletons, or one block) score 1.
pub fn ari(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    let table = general_contingency(y_true, y_pred);
    let n = y_true.len() as f64;
    let sum_cells: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_rows: f64 = table.iter().map(|r| choose2(r.iter().sum())).sum();
    let sum_cols: f64 = (0..table[0].len())
        .map(|j| choose2(table.iter().map(|r| r[j]).sum()))
        .sum();
    let total = choose2(n);
    let expected = if total > 0.0 { sum_rows * sum_cols / total } else { 0.0 };
    let max_index = (sum_rows + sum_cols) / 2.0;
    if max_index == expected {
        return Ok(1.0);
    }
    Ok((sum_cells - expected) / (max_index - expected))
}

/// All four scores plus the contingency table and mapping.
pub fn evaluate(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<EvalReport> {
    Ok(EvalReport {
        acc: accuracy(y_true, y_pred, k)?,
        nmi: nmi(y_true, y_pred)?,
        ari: ari(y_true, y_pred)?,
        f1: macro_f1(y_true, y_pred, k)?,
        contingency: contingency(y_true, y_pred, k)?,
        mapping: best_mapping(y_true, y_pred, k)?,
    })
}
