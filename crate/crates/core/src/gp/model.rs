use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::kernel::{covariance_matrix, cross_covariance, Hyperparameters};
use crate::error::{Error, Result};

/// First jitter tried when `K + σ²I` is not positive definite, relative to σ_f².
pub const JITTER_START: f64 = 1e-10;
/// Largest relative jitter before giving up.
pub const JITTER_MAX: f64 = 1e-4;

/// GP training pairs. `inputs` is `D × n_d` (one point per column),
/// `targets` is `n_d × n` (one output dimension per column).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    inputs: DMatrix<f64>,
    targets: DMatrix<f64>,
}

impl Dataset {
    pub fn new(inputs: DMatrix<f64>, targets: DMatrix<f64>) -> Result<Self> {
        if inputs.ncols() == 0 {
            return Err(Error::invalid("dataset must contain at least one point"));
        }
        if inputs.nrows() == 0 || targets.ncols() == 0 {
            return Err(Error::invalid("dataset needs at least one input and one output dimension"));
        }
        if inputs.ncols() != targets.nrows() {
            return Err(Error::invalid(format!(
                "{} input columns but {} target rows",
                inputs.ncols(),
                targets.nrows()
            )));
        }
        if inputs.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite entries"));
        }
        Ok(Self { inputs, targets })
    }

    /// Builds a dataset from row-major point lists.
    pub fn from_rows(inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Self> {
        let dim = inputs.first().map_or(0, Vec::len);
        let outs = targets.first().map_or(0, Vec::len);
        if inputs.iter().any(|r| r.len() != dim) || targets.iter().any(|r| r.len() != outs) {
            return Err(Error::invalid("ragged dataset rows"));
        }
        let x = DMatrix::from_fn(dim, inputs.len(), |d, j| inputs[j][d]);
        let p = DMatrix::from_fn(targets.len(), outs, |j, i| targets[j][i]);
        Self::new(x, p)
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.targets.ncols()
    }

    /// Dataset with one extra point appended.
    pub fn with_point(&self, input: &[f64], target: &[f64]) -> Result<Self> {
        if input.len() != self.input_dim() || target.len() != self.outputs() {
            return Err(Error::invalid("appended point has wrong dimensions"));
        }
        let n = self.len();
        let mut x = self.inputs.clone().insert_column(n, 0.0);
        x.column_mut(n).copy_from_slice(input);
        let mut p = self.targets.clone().insert_row(n, 0.0);
        for (i, v) in target.iter().enumerate() {
            p[(n, i)] = *v;
        }
        Self::new(x, p)
    }

    pub(crate) fn check_compatible(&self, hp: &Hyperparameters) -> Result<()> {
        if hp.input_dim() != self.input_dim() {
            return Err(Error::invalid(format!(
                "hyperparameters have {} lengthscales, dataset inputs have dimension {}",
                hp.input_dim(),
                self.input_dim()
            )));
        }
        if hp.outputs() != self.outputs() {
            return Err(Error::invalid(format!(
                "hyperparameters have {} noise variances, dataset has {} outputs",
                hp.outputs(),
                self.outputs()
            )));
        }
        Ok(())
    }
}

/// Factorizes `k + noise·I`, escalating diagonal jitter ×10 from
/// `JITTER_START·σ_f²` to `JITTER_MAX·σ_f²` if the plain matrix is not
/// positive definite. Returns the factor and the jitter that was added.
pub(crate) fn factorize_with_jitter(
    k: &DMatrix<f64>,
    noise: f64,
    signal_variance: f64,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = k.nrows();
    let mut jitter = 0.0;
    let mut next = JITTER_START * signal_variance;
    loop {
        let mut a = k.clone();
        for j in 0..n {
            a[(j, j)] += noise + jitter;
        }
        if let Some(chol) = Cholesky::new(a) {
            let l = chol.l_dirty();
            if (0..n).all(|j| l[(j, j)].is_finite() && l[(j, j)] > 0.0) {
                return Ok((chol, jitter));
            }
        }
        if next > JITTER_MAX * signal_variance * (1.0 + 1e-12) {
            let mut a = k.clone();
            for j in 0..n {
                a[(j, j)] += noise + jitter;
            }
            return Err(Error::IllConditioned {
                condition_estimate: condition_estimate(&a),
                jitter,
            });
        }
        jitter = next;
        next *= 10.0;
    }
}

fn condition_estimate(a: &DMatrix<f64>) -> f64 {
    let eig = a.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// A GP ready for prediction: dataset, hyperparameters, and per-output
/// factorizations of `K + σ_i² I` with the solved weight vectors.
///
/// Immutable after [`TrainedGP::fit`]; prediction takes `&self` and is safe
/// to share across threads.
#[derive(Debug, Clone)]
pub struct TrainedGP {
    dataset: Dataset,
    hyperparameters: Hyperparameters,
    factors: Vec<Cholesky<f64, Dyn>>,
    weights: Vec<DVector<f64>>,
    jitter: Vec<f64>,
}

impl TrainedGP {
    pub fn fit(dataset: Dataset, hyperparameters: Hyperparameters) -> Result<Self> {
        hyperparameters.validate()?;
        dataset.check_compatible(&hyperparameters)?;
        let k = covariance_matrix(dataset.inputs(), &hyperparameters)?;
        let mut factors = Vec::with_capacity(dataset.outputs());
        let mut weights = Vec::with_capacity(dataset.outputs());
        let mut jitter = Vec::with_capacity(dataset.outputs());
        for (i, &noise) in hyperparameters.noise_variance.iter().enumerate() {
            let (chol, added) = factorize_with_jitter(&k, noise, hyperparameters.signal_variance)?;
            weights.push(chol.solve(&dataset.targets().column(i).into_owned()));
            factors.push(chol);
            jitter.push(added);
        }
        Ok(Self {
            dataset,
            hyperparameters,
            factors,
            weights,
            jitter,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyperparameters
    }

    pub fn input_dim(&self) -> usize {
        self.dataset.input_dim()
    }

    pub fn outputs(&self) -> usize {
        self.dataset.outputs()
    }

    /// Lower-triangular factor of `K + (σ_i² + jitter_i) I`.
    pub fn factor(&self, output: usize) -> DMatrix<f64> {
        self.factors[output].l()
    }

    /// `(K + σ_i² I)⁻¹ P_{:,i}`
    pub fn weights(&self, output: usize) -> &DVector<f64> {
        &self.weights[output]
    }

    /// Diagonal jitter that was needed to factorize output `output`.
    pub fn jitter(&self, output: usize) -> f64 {
        self.jitter[output]
    }

    pub fn cross_covariance(&self, query: &[f64]) -> Result<DVector<f64>> {
        cross_covariance(query, self.dataset.inputs(), &self.hyperparameters)
    }

    /// Posterior mean of every output at `query` (zero prior mean).
    pub fn predict_mean(&self, query: &[f64]) -> Result<DVector<f64>> {
        let k = self.cross_covariance(query)?;
        Ok(DVector::from_iterator(
            self.outputs(),
            self.weights.iter().map(|w| k.dot(w)),
        ))
    }

    /// Posterior variance of the latent function for every output at
    /// `query`, clamped to be non-negative.
    pub fn predict_variance(&self, query: &[f64]) -> Result<DVector<f64>> {
        let k = self.cross_covariance(query)?;
        Ok(self.variance_from_cross(&k))
    }

    /// Mean and variance sharing one cross-covariance evaluation.
    pub fn predict(&self, query: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
        let k = self.cross_covariance(query)?;
        let mean = DVector::from_iterator(self.outputs(), self.weights.iter().map(|w| k.dot(w)));
        Ok((mean, self.variance_from_cross(&k)))
    }

    fn variance_from_cross(&self, k: &DVector<f64>) -> DVector<f64> {
        let prior = self.hyperparameters.signal_variance;
        DVector::from_iterator(
            self.outputs(),
            self.factors.iter().map(|chol| {
                let mut v = k.clone();
                chol.l_dirty().solve_lower_triangular_mut(&mut v);
                (prior - v.norm_squared()).max(0.0)
            }),
        )
    }
}
