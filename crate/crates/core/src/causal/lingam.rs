//! DirectLiNGAM: causal ordering and coefficient estimation for linear SEMs
//! with non-Gaussian noise.
//!
//! The ordering loop repeatedly selects the variable that looks most
//! exogenous under a pairwise residual-independence score, regresses it out
//! of the remaining working columns, and recurses. Coefficients are then
//! estimated by ordinary least squares of each variable on all of its
//! predecessors in the recovered order.
//!
//! Columns are standardized internally; [`LingamFit`] exposes both the
//! standardized coefficients (the thresholding units used everywhere else in
//! this crate) and the de-standardized ("raw") coefficients comparable to a
//! generating SEM's matrix.

use crate::error::{CoreError, Result};
use crate::numkit::Matrix;

/// Pluggable residual-independence surrogate: a differential-entropy
/// approximation evaluated on standardized samples. Lower joint entropy of
/// (cause, residual) is evidence for a causal direction.
pub trait IndependenceScore {
    /// Approximate differential entropy of a zero-mean, unit-variance sample.
    fn entropy(&self, u: &[f64]) -> f64;
}

/// Maximum-entropy differential-entropy approximation
/// `H(u) ~ H(gauss) - k1 (E[ln cosh u] - gamma)^2 - k2 (E[u exp(-u^2/2)])^2`
/// with the standard published constants.
#[derive(Debug, Clone, Copy, Default)]
pub struct MaxEntScore;

const K1: f64 = 79.047;
const K2: f64 = 7.4129;
const GAMMA_BAR: f64 = 0.374_57;
const H_GAUSS: f64 = 1.418_938_533_204_672_7; // (1 + ln(2 pi)) / 2

#[inline]
fn ln_cosh(x: f64) -> f64 {
    let ax = x.abs();
    ax + (-2.0 * ax).exp().ln_1p() - std::f64::consts::LN_2
}

impl IndependenceScore for MaxEntScore {
    fn entropy(&self, u: &[f64]) -> f64 {
        let n = u.len() as f64;
        let mut acc_cosh = 0.0;
        let mut acc_gexp = 0.0;
        for &v in u {
            acc_cosh += ln_cosh(v);
            acc_gexp += v * (-0.5 * v * v).exp();
        }
        let e_cosh = acc_cosh / n;
        let e_gexp = acc_gexp / n;
        H_GAUSS - K1 * (e_cosh - GAMMA_BAR) * (e_cosh - GAMMA_BAR) - K2 * e_gexp * e_gexp
    }
}

/// Result of a DirectLiNGAM run.
#[derive(Debug, Clone)]
pub struct LingamFit {
    /// Recovered causal order, most exogenous first (original column indices).
    pub order: Vec<usize>,
    /// De-standardized coefficients: `b_raw[j][k]` is the effect of column
    /// `k` on column `j` in the original units.
    pub b_raw: Matrix,
    /// Coefficients of the standardized columns (zero mean, unit variance).
    pub b_std: Matrix,
}

/// Runs DirectLiNGAM on an `n x p` data matrix with default column labels
/// `x1..xp`, returning the de-standardized adjacency matrix.
pub fn direct_lingam(data: &Matrix) -> Result<Matrix> {
    let labels: Vec<String> = (1..=data.cols()).map(|c| format!("x{c}")).collect();
    Ok(direct_lingam_full(data, &labels, &MaxEntScore)?.b_raw)
}

/// Full-detail DirectLiNGAM with caller-supplied column labels (used in
/// degenerate-input errors) and a pluggable independence score.
pub fn direct_lingam_full(
    data: &Matrix,
    labels: &[String],
    score: &dyn IndependenceScore,
) -> Result<LingamFit> {
    direct_lingam_with_sinks(data, labels, score, &[])
}

/// DirectLiNGAM with prior knowledge that the `sinks` columns cannot cause
/// any other variable: they stay ineligible for selection while non-sink
/// variables remain. Transition batches use this with the reward column,
/// which by the no-simultaneous/backward-edges assumption never causes
/// same-step states or actions.
pub fn direct_lingam_with_sinks(
    data: &Matrix,
    labels: &[String],
    score: &dyn IndependenceScore,
    sinks: &[usize],
) -> Result<LingamFit> {
    let n = data.rows();
    let p = data.cols();
    assert_eq!(labels.len(), p, "one label per column");
    if n < p + 2 {
        return Err(CoreError::NotEnoughSamples { needed: p + 2, got: n });
    }

    // Standardize columns once; column variance must be positive.
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut stds = vec![0.0; p];
    for c in 0..p {
        let col = data.col(c);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        if var <= 1e-12 {
            return Err(CoreError::DegenerateColumn {
                column: labels[c].clone(),
            });
        }
        let std = var.sqrt();
        stds[c] = std;
        cols.push(col.iter().map(|v| (v - mean) / std).collect());
    }
    let std_cols = cols.clone();

    // Ordering stage on working residual columns.
    let mut remaining: Vec<usize> = (0..p).collect();
    let mut order = Vec::with_capacity(p);
    while remaining.len() > 1 {
        let m = remaining.len();
        // Re-standardize working columns for this stage.
        let mut stage: Vec<Vec<f64>> = Vec::with_capacity(m);
        for &idx in &remaining {
            let col = &cols[idx];
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let inv = 1.0 / var.sqrt().max(1e-9);
            stage.push(col.iter().map(|v| (v - mean) * inv).collect());
        }
        // Per-column entropies and pairwise correlations of the stage data.
        let h: Vec<f64> = stage.iter().map(|u| score.entropy(u)).collect();
        let mut corr = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in (i + 1)..m {
                let c = dot(&stage[i], &stage[j]) / n as f64;
                corr[i][j] = c;
                corr[j][i] = c;
            }
        }
        // Evidence against each candidate's exogeneity.
        let mut evidence = vec![0.0; m];
        let mut resid = vec![0.0; n];
        for i in 0..m {
            for j in (i + 1)..m {
                let c = corr[i][j];
                let h_ri_j = residual_entropy(&stage[i], &stage[j], c, &mut resid, score);
                let h_rj_i = residual_entropy(&stage[j], &stage[i], c, &mut resid, score);
                // diff > 0 favors i being upstream of j.
                let diff = (h[j] + h_ri_j) - (h[i] + h_rj_i);
                let against_i = diff.min(0.0);
                evidence[i] += against_i * against_i;
                let against_j = (-diff).min(0.0);
                evidence[j] += against_j * against_j;
            }
        }
        // Known sinks stay ineligible while any other variable remains.
        let any_non_sink = remaining.iter().any(|idx| !sinks.contains(idx));
        let best = (0..m)
            .filter(|&i| !any_non_sink || !sinks.contains(&remaining[i]))
            .min_by(|&a, &b| evidence[a].total_cmp(&evidence[b]))
            .expect("at least one eligible candidate");
        let chosen = remaining[best];
        order.push(chosen);
        remaining.remove(best);
        // Regress the chosen column out of every remaining working column.
        let chosen_col = cols[chosen].clone();
        let var_m = variance(&chosen_col);
        for &idx in &remaining {
            let cov = covariance(&cols[idx], &chosen_col);
            let slope = cov / var_m.max(1e-12);
            for (v, x) in cols[idx].iter_mut().zip(&chosen_col) {
                *v -= slope * x;
            }
        }
    }
    order.push(remaining[0]);

    // Coefficients: OLS of each variable on all predecessors, on the
    // standardized original data, then de-standardize.
    let mut b_std = Matrix::zeros(p, p);
    let mut b_raw = Matrix::zeros(p, p);
    for k in 1..p {
        let target = order[k];
        let parents = &order[..k];
        let beta = ols(&std_cols, target, parents, n);
        for (pi, &parent) in parents.iter().enumerate() {
            b_std.set(target, parent, beta[pi]);
            b_raw.set(target, parent, beta[pi] * stds[target] / stds[parent]);
        }
    }
    Ok(LingamFit { order, b_raw, b_std })
}

fn residual_entropy(
    xi: &[f64],
    xj: &[f64],
    corr: f64,
    scratch: &mut [f64],
    score: &dyn IndependenceScore,
) -> f64 {
    // Residual of xi regressed on xj (both unit variance): r = xi - corr*xj,
    // standardized by sqrt(1 - corr^2).
    let inv_std = 1.0 / (1.0 - corr * corr).max(1e-12).sqrt();
    for ((r, a), b) in scratch.iter_mut().zip(xi).zip(xj) {
        *r = (a - corr * b) * inv_std;
    }
    score.entropy(scratch)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n
}

/// OLS of standardized column `target` on standardized columns `parents`.
fn ols(std_cols: &[Vec<f64>], target: usize, parents: &[usize], n: usize) -> Vec<f64> {
    let k = parents.len();
    let nf = n as f64;
    let mut gram = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        for j in i..k {
            let g = dot(&std_cols[parents[i]], &std_cols[parents[j]]) / nf;
            gram[i][j] = g;
            gram[j][i] = g;
        }
        rhs[i] = dot(&std_cols[parents[i]], &std_cols[target]) / nf;
    }
    solve_linear(gram, rhs)
}

/// Gaussian elimination with partial pivoting; adds a tiny ridge on a
/// singular pivot so collinear predictors degrade gracefully instead of
/// producing non-finite coefficients.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let k = b.len();
    for col in 0..k {
        let mut piv = col;
        for r in (col + 1)..k {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        a.swap(col, piv);
        b.swap(col, piv);
        if a[col][col].abs() < 1e-12 {
            a[col][col] += 1e-9;
        }
        let inv = 1.0 / a[col][col];
        for r in (col + 1)..k {
            let f = a[r][col] * inv;
            if f == 0.0 {
                continue;
            }
            for c in col..k {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for col in (0..k).rev() {
        let mut acc = b[col];
        for c in (col + 1)..k {
            acc -= a[col][c] * x[c];
        }
        x[col] = acc / a[col][col];
    }
    x
}
