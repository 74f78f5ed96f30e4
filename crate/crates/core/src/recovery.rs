//! Sparse recovery through a measurement operator and its adjoint.
//!
//! Orthogonal matching pursuit only ever calls `apply` and `adjoint`, so it
//! runs unchanged on the decimated paraunitary operator and on a dense matrix.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::decimation::{DecimatedOperator, DecimationSchedule};
use crate::error::{check_len, invalid, Result};
use crate::paraunitary::ParaunitarySpec;
use crate::prng::{derive_child_seed, SeedStream};

/// A real linear map given only by its action and its transpose action.
pub trait LinearOperator {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>>;
}

impl LinearOperator for DecimatedOperator {
    fn rows(&self) -> usize {
        DecimatedOperator::rows(self)
    }

    fn cols(&self) -> usize {
        DecimatedOperator::cols(self)
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        DecimatedOperator::apply(self, x)
    }

    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        DecimatedOperator::adjoint(self, y)
    }
}

/// Dense matrix wrapper.
#[derive(Debug, Clone)]
pub struct DenseOperator(pub DMatrix<f64>);

impl LinearOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.0.nrows()
    }

    fn cols(&self) -> usize {
        self.0.ncols()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("x", self.0.ncols(), x.len())?;
        Ok((&self.0 * DVector::from_column_slice(x)).data.into())
    }

    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("y", self.0.nrows(), y.len())?;
        Ok((self.0.transpose() * DVector::from_column_slice(y)).data.into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmpSolution {
    /// Selected columns, in selection order.
    pub support: Vec<usize>,
    pub signal: Vec<f64>,
    pub residual_norm: f64,
}

/// Greedy recovery of an at most `sparsity`-sparse `x` from `y = A x`.
///
/// Stops early once the residual falls below `tolerance · ‖y‖`.
pub fn orthogonal_matching_pursuit<A: LinearOperator + ?Sized>(
    op: &A,
    y: &[f64],
    sparsity: usize,
    tolerance: f64,
) -> Result<OmpSolution> {
    check_len("y", op.rows(), y.len())?;
    if sparsity > op.rows() {
        return Err(invalid("sparsity", "cannot exceed the measurement count"));
    }
    let n = op.cols();
    let y_vec = DVector::from_column_slice(y);
    let y_norm = y_vec.norm();
    let mut signal = vec![0.0; n];
    let mut support = Vec::with_capacity(sparsity);
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(sparsity);
    let mut residual = y_vec.clone();
    // selection compares correlations against unit-norm columns
    let mut col_norms = vec![0.0; n];
    let mut e = vec![0.0; n];
    for (j, norm) in col_norms.iter_mut().enumerate() {
        e[j] = 1.0;
        *norm = DVector::from_vec(op.apply(&e)?).norm();
        e[j] = 0.0;
    }

    while support.len() < sparsity && residual.norm() > tolerance * y_norm {
        let correlations = op.adjoint(residual.as_slice())?;
        let best = correlations
            .iter()
            .enumerate()
            .filter(|(j, _)| !support.contains(j) && col_norms[*j] > 0.0)
            .map(|(j, c)| (j, c.abs() / col_norms[j]))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(j, _)| j);
        let Some(j) = best else { break };
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        columns.push(DVector::from_vec(op.apply(&e)?));
        support.push(j);

        let basis = DMatrix::from_columns(&columns);
        let coeffs = basis
            .clone()
            .svd(true, true)
            .solve(&y_vec, 1e-12)
            .map_err(|e| invalid("least_squares", e))?;
        residual = &y_vec - &basis * &coeffs;
        for (&col, &c) in support.iter().zip(coeffs.iter()) {
            signal[col] = c;
        }
    }
    Ok(OmpSolution {
        support,
        signal,
        residual_norm: residual.norm(),
    })
}

/// Parameters of the support-recovery experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsDemoConfig {
    pub m: usize,
    pub order: usize,
    pub sparsity: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for CsDemoConfig {
    fn default() -> Self {
        Self {
            m: 16,
            order: 3,
            sparsity: 3,
            trials: 100,
            seed: 0xC5_DE30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryReport {
    pub trials: usize,
    pub exact_support: usize,
    pub measurements: usize,
    pub signal_length: usize,
}

impl RecoveryReport {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            1.0
        } else {
            self.exact_support as f64 / self.trials as f64
        }
    }
}

/// `k`-sparse test signal: distinct uniform support, standard-normal amplitudes.
pub fn sparse_signal(length: usize, sparsity: usize, stream: &mut SeedStream) -> Vec<f64> {
    let mut x = vec![0.0; length];
    let mut placed = 0;
    while placed < sparsity.min(length) {
        let j = (stream.uniform_unit() * length as f64) as usize % length;
        if x[j] != 0.0 {
            continue;
        }
        let g: f64 = StandardNormal.sample(stream);
        if g == 0.0 {
            continue;
        }
        x[j] = g;
        placed += 1;
    }
    x
}

fn support_of(x: &[f64]) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, _)| j)
        .collect()
}

/// Runs `trials` sparse recoveries through `op`, counting exact support matches.
pub fn recovery_trials<A: LinearOperator + ?Sized>(
    op: &A,
    sparsity: usize,
    trials: usize,
    seed: u64,
) -> Result<RecoveryReport> {
    if sparsity > 0 && sparsity >= op.rows() {
        return Err(invalid(
            "sparsity",
            format!("k = {sparsity} must be below the {} measurements", op.rows()),
        ));
    }
    let mut stream = SeedStream::new(seed);
    let mut exact = 0;
    for _ in 0..trials {
        let x = sparse_signal(op.cols(), sparsity, &mut stream);
        let y = op.apply(&x)?;
        let sol = orthogonal_matching_pursuit(op, &y, sparsity, 1e-10)?;
        let mut found = sol.support.clone();
        found.sort_unstable();
        if found == support_of(&x) {
            exact += 1;
        }
    }
    Ok(RecoveryReport {
        trials,
        exact_support: exact,
        measurements: op.rows(),
        signal_length: op.cols(),
    })
}

/// The sampling-matrix operator used by the demo: one window of `K + 1` blocks.
pub fn sampling_operator(m: usize, order: usize, seed: u64) -> Result<DecimatedOperator> {
    let spec = ParaunitarySpec::new(m, order, seed)?;
    let schedule = DecimationSchedule::constant(order + 1, 1)?;
    DecimatedOperator::new(spec, schedule, order + 1)
}

/// Support recovery through the `↓L` sampling operator.
pub fn cs_demo(cfg: &CsDemoConfig) -> Result<RecoveryReport> {
    let op = sampling_operator(cfg.m, cfg.order, derive_child_seed(cfg.seed, 0))?;
    recovery_trials(&op, cfg.sparsity, cfg.trials, derive_child_seed(cfg.seed, 1))
}

/// Same experiment through an i.i.d. `N(0, 1/L)` matrix of the same shape.
pub fn dense_gaussian_baseline(cfg: &CsDemoConfig) -> Result<RecoveryReport> {
    let rows = cfg.m;
    let cols = (cfg.order + 1) * cfg.m;
    let mut stream = SeedStream::new(derive_child_seed(cfg.seed, 2));
    let scale = 1.0 / (cols as f64).sqrt();
    let a = DMatrix::from_fn(rows, cols, |_, _| {
        scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut stream)
    });
    recovery_trials(&DenseOperator(a), cfg.sparsity, cfg.trials, derive_child_seed(cfg.seed, 1))
}
