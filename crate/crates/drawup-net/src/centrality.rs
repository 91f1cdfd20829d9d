//! Impacting and impacted feedback centralities.
//!
//! With the column-normalized dependency matrix Wn (every nonzero column sums
//! to one), the impacting score solves `b = Wn·v + β·Wn·b` with `v = 1`, i.e.
//! `b = (I − β·Wn)⁻¹·Wn·v`. The impacted score is the same construction run on
//! the transposed raw matrix, so that symmetric matrices give `b == c` and
//! transposing the network swaps the two measures exactly. Scores are then
//! normalized to [0, 1] by their maximum and combined into the ratio
//! `r = b / c` that drives the bow-tie classification.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::comovement::DependencyMatrix;
use crate::error::{Error, Result};

/// Which axis of W is normalized before the solve. Column is the default;
/// row mode exists for sensitivity runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    #[default]
    Column,
    Row,
}

/// Solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityOptions {
    /// Dampening factor in [0, 1).
    pub beta: f64,
    pub normalization: NormalizationMode,
    /// Residual bound the direct solve must satisfy.
    pub tolerance: f64,
}

impl Default for CentralityOptions {
    fn default() -> Self {
        CentralityOptions {
            beta: 0.85,
            normalization: NormalizationMode::Column,
            tolerance: 1e-10,
        }
    }
}

impl CentralityOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter(format!(
                "beta must be in [0, 1), got {}",
                self.beta
            )));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "solver tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// W with each column (or row) scaled to unit sum; all-zero lines are left
/// zero and flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDependency {
    pub wn: DMatrix<f64>,
    pub mode: NormalizationMode,
    /// Indices of columns (rows in row mode) whose sum was zero.
    pub zero_lines: Vec<usize>,
}

/// Divide each column of W by its sum (row mode divides rows).
pub fn normalize_dependency(w: &DMatrix<f64>, mode: NormalizationMode) -> NormalizedDependency {
    let n = w.nrows();
    let mut wn = w.clone();
    let mut zero_lines = Vec::new();
    match mode {
        NormalizationMode::Column => {
            for j in 0..n {
                let sum: f64 = w.column(j).sum();
                if sum > 0.0 {
                    for i in 0..n {
                        wn[(i, j)] /= sum;
                    }
                } else {
                    zero_lines.push(j);
                }
            }
        }
        NormalizationMode::Row => {
            for i in 0..n {
                let sum: f64 = w.row(i).sum();
                if sum > 0.0 {
                    for j in 0..n {
                        wn[(i, j)] /= sum;
                    }
                } else {
                    zero_lines.push(i);
                }
            }
        }
    }
    NormalizedDependency {
        wn,
        mode,
        zero_lines,
    }
}

/// Solve `x = Wn·1 + β·Wn·x` by a direct dense LU solve, verifying the
/// residual; falls back to fixed-point iteration if factorization fails.
pub fn feedback_scores(wn: &DMatrix<f64>, beta: f64, tolerance: f64) -> Result<DVector<f64>> {
    let n = wn.nrows();
    if n == 0 {
        return Err(Error::InvalidParameter("empty network".into()));
    }
    let ones = DVector::from_element(n, 1.0);
    let rhs = wn * &ones;
    let system = DMatrix::identity(n, n) - wn * beta;
    let x = match system.lu().solve(&rhs) {
        Some(x) => x,
        // beta < 1 keeps the system nonsingular; this path is a safety net
        None => fixed_point_scores(wn, beta, 100_000, tolerance),
    };
    let residual = (&x - &rhs - (wn * &x) * beta).amax();
    if residual > tolerance {
        return Err(Error::Solver(format!(
            "residual {residual:e} above tolerance {tolerance:e}"
        )));
    }
    Ok(x)
}

/// Iterate `x ← Wn·(1 + β·x)` from zero. Converges geometrically at rate β
/// because the normalized matrix is (sub)stochastic. This is the independent
/// route the direct solve is checked against.
pub fn fixed_point_scores(
    wn: &DMatrix<f64>,
    beta: f64,
    max_iters: usize,
    tolerance: f64,
) -> DVector<f64> {
    let n = wn.nrows();
    let ones = DVector::from_element(n, 1.0);
    let base = wn * ones;
    let mut x = DVector::zeros(n);
    for _ in 0..max_iters {
        let next = &base + (wn * &x) * beta;
        let delta = (&next - &x).amax();
        x = next;
        if delta < tolerance {
            break;
        }
    }
    x
}

/// Pre-normalization impacting scores of the raw non-negative matrix.
pub fn impacting_centrality(w: &DMatrix<f64>, opts: &CentralityOptions) -> Result<DVector<f64>> {
    opts.validate()?;
    let wn = normalize_dependency(w, opts.normalization);
    feedback_scores(&wn.wn, opts.beta, opts.tolerance)
}

/// Pre-normalization impacted scores: the impacting construction on Wᵀ.
pub fn impacted_centrality(w: &DMatrix<f64>, opts: &CentralityOptions) -> Result<DVector<f64>> {
    opts.validate()?;
    let wt = w.transpose();
    let wn = normalize_dependency(&wt, opts.normalization);
    feedback_scores(&wn.wn, opts.beta, opts.tolerance)
}

/// Ratio r_i = b_i / c_i with sentinels: +∞ when only b_i is positive
/// (pure impactor), NaN when both are zero (disconnected).
pub fn centrality_ratio(b: &[f64], c: &[f64]) -> Vec<f64> {
    b.iter()
        .zip(c)
        .map(|(&bi, &ci)| {
            if ci > 0.0 {
                bi / ci
            } else if bi > 0.0 {
                f64::INFINITY
            } else {
                f64::NAN
            }
        })
        .collect()
}

/// Per-node centrality record, with b and c normalized to [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralityProfile {
    pub entity_id: String,
    pub b: f64,
    pub c: f64,
    /// b / c; +∞ and NaN sentinels are classified downstream.
    pub r: f64,
    pub beta: f64,
}

fn normalize_to_unit(x: &mut DVector<f64>) {
    let max = x.amax();
    if max > 0.0 {
        *x /= max;
    }
}

/// Solve both centralities on W (restricted to whatever node set the caller
/// chose), normalize to [0, 1] and form the ratios.
pub fn centrality_profiles(
    w: &DependencyMatrix,
    opts: &CentralityOptions,
) -> Result<Vec<CentralityProfile>> {
    let mut b = impacting_centrality(&w.w, opts)?;
    let mut c = impacted_centrality(&w.w, opts)?;
    normalize_to_unit(&mut b);
    normalize_to_unit(&mut c);
    let r = centrality_ratio(b.as_slice(), c.as_slice());
    Ok(w.entities
        .iter()
        .zip(b.iter().zip(c.iter()).zip(&r))
        .map(|(entity_id, ((&b, &c), &r))| CentralityProfile {
            entity_id: entity_id.clone(),
            b,
            c,
            r,
            beta: opts.beta,
        })
        .collect())
}
