use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::semigroup::FiniteTable;

pub const DEFAULT_HAAR_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_HAAR_MAX_ITERATIONS: usize = 100_000;
/// Required agreement between the averaging iteration and the linear solve.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct HaarOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Starting distribution; uniform when `None`.
    pub start: Option<Vec<f64>>,
}

impl Default for HaarOptions {
    fn default() -> Self {
        HaarOptions {
            tolerance: DEFAULT_HAAR_TOLERANCE,
            max_iterations: DEFAULT_HAAR_MAX_ITERATIONS,
            start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantMeasureSolution {
    pub carrier: Vec<String>,
    pub weights: Vec<f64>,
    /// `max_g max_a |mu(L_g^{-1}{a}) - mu({a})|` at the returned weights.
    pub residual: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    /// Least-squares solution of the invariance equations plus `sum = 1`.
    pub oracle_weights: Vec<f64>,
    /// `max_a |weights[a] - oracle_weights[a]|`.
    pub oracle_gap: f64,
}

impl InvariantMeasureSolution {
    pub fn agrees_with_oracle(&self) -> bool {
        self.oracle_gap <= ORACLE_TOLERANCE
    }
}

/// `max_g max_a |mu(L_g^{-1}{a}) - mu(a)|`.
pub fn invariance_residual(table: &FiniteTable, mu: &[f64]) -> f64 {
    let n = table.len();
    let mut worst: f64 = 0.0;
    let mut pre = vec![0.0; n];
    for g in 0..n {
        pre.iter_mut().for_each(|v| *v = 0.0);
        for (b, &m) in mu.iter().enumerate() {
            pre[table.op(g, b)] += m;
        }
        for a in 0..n {
            worst = worst.max((pre[a] - mu[a]).abs());
        }
    }
    worst
}

/// Haar measure of a finite commutative semigroup by iterating the averaging
/// operator `mu -> (1/|K|) sum_g mu o L_g^{-1}`, checked against a direct
/// linear solve.
pub fn haar_solve_finite(table: &FiniteTable, opts: &HaarOptions) -> Result<InvariantMeasureSolution> {
    if let Some((a, b)) = table.commutativity_witness() {
        return Err(Error::InvalidInput(format!(
            "table {} is not commutative: {} and {} do not commute",
            table.name(),
            table.names()[a],
            table.names()[b]
        )));
    }
    let n = table.len();
    let mut mu = match &opts.start {
        Some(start) => {
            let ok = start.len() == n
                && start.iter().all(|&w| w.is_finite() && w >= 0.0)
                && (start.iter().sum::<f64>() - 1.0).abs() < 1e-9;
            if !ok {
                return Err(Error::InvalidInput(format!(
                    "start must be a probability vector of length {n}"
                )));
            }
            start.clone()
        }
        None => vec![1.0 / n as f64; n],
    };
    let mut history = Vec::new();
    let mut residual = invariance_residual(table, &mu);
    history.push(residual);
    let mut iterations = 0;
    while residual > opts.tolerance {
        if iterations >= opts.max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                residual,
                residual_history: history,
            });
        }
        let mut next = vec![0.0; n];
        for g in 0..n {
            for (b, &m) in mu.iter().enumerate() {
                next[table.op(g, b)] += m;
            }
        }
        let total: f64 = next.iter().sum();
        mu = next.into_iter().map(|v| v / total).collect();
        iterations += 1;
        residual = invariance_residual(table, &mu);
        history.push(residual);
    }
    let oracle_weights = linear_oracle(table)?;
    let oracle_gap = mu
        .iter()
        .zip(&oracle_weights)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(InvariantMeasureSolution {
        carrier: table.names().to_vec(),
        weights: mu,
        residual,
        iterations,
        residual_history: history,
        oracle_weights,
        oracle_gap,
    })
}

/// Solves `P_g mu = mu` for all `g` together with `sum mu = 1` in the
/// least-squares sense via SVD.
pub fn linear_oracle(table: &FiniteTable) -> Result<Vec<f64>> {
    let n = table.len();
    let rows = n * n + 1;
    let mut a = DMatrix::<f64>::zeros(rows, n);
    for g in 0..n {
        for b in 0..n {
            a[(g * n + table.op(g, b), b)] += 1.0;
        }
        for i in 0..n {
            a[(g * n + i, i)] -= 1.0;
        }
    }
    for j in 0..n {
        a[(n * n, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(rows);
    rhs[n * n] = 1.0;
    let svd = a.svd(true, true);
    let x = svd
        .solve(&rhs, 1e-13)
        .map_err(|e| Error::InvalidInput(format!("linear solve failed: {e}")))?;
    Ok(x.iter().copied().collect())
}

/// A random probability vector, for checking that the limit does not depend
/// on the start.
pub fn random_start<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}
