use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Squared-exponential kernel hyperparameters.
///
/// `noise_variance` holds one entry per output dimension. A zero noise
/// variance is accepted and means the noise-free limit; the factorization
/// jitter then keeps `K + σ²I` usable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
    pub noise_variance: Vec<f64>,
}

impl Hyperparameters {
    pub fn new(signal_variance: f64, lengthscales: Vec<f64>, noise_variance: Vec<f64>) -> Result<Self> {
        let hp = Self {
            signal_variance,
            lengthscales,
            noise_variance,
        };
        hp.validate()?;
        Ok(hp)
    }

    /// Same lengthscale on every input dimension, same noise on every output.
    pub fn isotropic(signal_variance: f64, lengthscale: f64, input_dim: usize, noise_variance: f64, outputs: usize) -> Result<Self> {
        Self::new(signal_variance, vec![lengthscale; input_dim], vec![noise_variance; outputs])
    }

    pub fn input_dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn outputs(&self) -> usize {
        self.noise_variance.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.signal_variance.is_finite() && self.signal_variance > 0.0) {
            return Err(Error::invalid(format!(
                "signal variance must be positive, got {}",
                self.signal_variance
            )));
        }
        if self.lengthscales.is_empty() {
            return Err(Error::invalid("at least one lengthscale is required"));
        }
        if let Some(l) = self.lengthscales.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::invalid(format!("lengthscales must be positive, got {l}")));
        }
        if self.noise_variance.is_empty() {
            return Err(Error::invalid("at least one noise variance is required"));
        }
        if let Some(s) = self.noise_variance.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::invalid(format!("noise variance must be non-negative, got {s}")));
        }
        Ok(())
    }

    /// `[ln σ_f², ln ℓ_1 … ln ℓ_D, ln σ_1² … ln σ_n²]`, the optimizer's parameterization.
    pub fn to_log_vector(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(1 + self.lengthscales.len() + self.noise_variance.len());
        v.push(self.signal_variance.ln());
        v.extend(self.lengthscales.iter().map(|l| l.ln()));
        v.extend(self.noise_variance.iter().map(|s| s.ln()));
        DVector::from_vec(v)
    }

    pub fn from_log_vector(theta: &DVector<f64>, input_dim: usize, outputs: usize) -> Result<Self> {
        if theta.len() != 1 + input_dim + outputs {
            return Err(Error::invalid(format!(
                "log-parameter vector has length {}, expected {}",
                theta.len(),
                1 + input_dim + outputs
            )));
        }
        Self::new(
            theta[0].exp(),
            theta.rows(1, input_dim).iter().map(|v| v.exp()).collect(),
            theta.rows(1 + input_dim, outputs).iter().map(|v| v.exp()).collect(),
        )
    }

    pub(crate) fn scaled_sq_dist<'a>(
        &self,
        x: impl IntoIterator<Item = &'a f64>,
        x_prime: impl IntoIterator<Item = &'a f64>,
    ) -> f64 {
        x.into_iter()
            .zip(x_prime)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| {
                let r = (a - b) / l;
                r * r
            })
            .sum()
    }
}

fn check_dim(what: &str, got: usize, hp: &Hyperparameters) -> Result<()> {
    if got != hp.input_dim() {
        return Err(Error::invalid(format!(
            "{what} has dimension {got}, kernel expects {}",
            hp.input_dim()
        )));
    }
    Ok(())
}

/// `σ_f² · exp(−½ Σ_d ((x_d − x'_d)/ℓ_d)²)`
pub fn kernel_se(x: &[f64], x_prime: &[f64], hp: &Hyperparameters) -> Result<f64> {
    check_dim("x", x.len(), hp)?;
    check_dim("x'", x_prime.len(), hp)?;
    Ok(hp.signal_variance * (-0.5 * hp.scaled_sq_dist(x, x_prime)).exp())
}

/// Kernel matrix over the columns of `inputs`.
pub fn covariance_matrix(inputs: &DMatrix<f64>, hp: &Hyperparameters) -> Result<DMatrix<f64>> {
    check_dim("inputs", inputs.nrows(), hp)?;
    if inputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("inputs contain non-finite entries"));
    }
    let n = inputs.ncols();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = hp.signal_variance;
        for l in 0..j {
            let v = hp.signal_variance * (-0.5 * hp.scaled_sq_dist(inputs.column(j).iter(), inputs.column(l).iter())).exp();
            k[(j, l)] = v;
            k[(l, j)] = v;
        }
    }
    Ok(k)
}

/// Covariances between `query` and every training column.
pub fn cross_covariance(query: &[f64], inputs: &DMatrix<f64>, hp: &Hyperparameters) -> Result<DVector<f64>> {
    check_dim("query", query.len(), hp)?;
    check_dim("inputs", inputs.nrows(), hp)?;
    Ok(DVector::from_iterator(
        inputs.ncols(),
        inputs
            .column_iter()
            .map(|col| hp.signal_variance * (-0.5 * hp.scaled_sq_dist(query, col.iter())).exp()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(dim: usize) -> Hyperparameters {
        Hyperparameters::isotropic(1.0, 1.0, dim, 0.0, 1).unwrap()
    }

    #[test]
    fn zero_distance_is_signal_variance() {
        assert_eq!(kernel_se(&[0.0; 3], &[0.0; 3], &unit(3)).unwrap(), 1.0);
    }

    #[test]
    fn unit_distance() {
        let k = kernel_se(&[0.0; 3], &[1.0, 0.0, 0.0], &unit(3)).unwrap();
        assert!((k - (-0.5f64).exp()).abs() < 1e-15);
        assert!((k - 0.606531).abs() < 1e-6);
    }

    #[test]
    fn anisotropic_matches_termwise_formula() {
        let hp = Hyperparameters::new(2.0, vec![2.0, 1.0, 1.0], vec![0.1]).unwrap();
        let x = [0.0, 0.0, 0.0];
        let xp = [2.0, 1.0, 0.0];
        let mut acc = 0.0;
        for d in 0..3 {
            let r = (x[d] - xp[d]) / hp.lengthscales[d];
            acc += r * r;
        }
        let expected = 2.0 * (-0.5 * acc).exp();
        assert!((kernel_se(&x, &xp, &hp).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(matches!(
            kernel_se(&[0.0; 2], &[0.0; 3], &unit(3)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(cross_covariance(&[0.0; 2], &DMatrix::zeros(3, 4), &unit(3)).is_err());
    }

    #[test]
    fn covariance_of_single_and_duplicate_points() {
        let hp = Hyperparameters::isotropic(1.7, 0.3, 3, 0.0, 1).unwrap();
        let one = covariance_matrix(&DMatrix::from_column_slice(3, 1, &[0.1, 0.2, 0.3]), &hp).unwrap();
        assert_eq!(one, DMatrix::from_element(1, 1, 1.7));
        let two = covariance_matrix(&DMatrix::from_column_slice(3, 2, &[0.1, 0.2, 0.3, 0.1, 0.2, 0.3]), &hp).unwrap();
        assert!(two.iter().all(|v| *v == 1.7));
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        let x = DMatrix::from_column_slice(3, 1, &[0.0, f64::NAN, 0.0]);
        assert!(matches!(covariance_matrix(&x, &unit(3)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn far_query_decays() {
        let hp = unit(3);
        let inputs = DMatrix::from_column_slice(3, 2, &[0.0, 0.0, 0.0, 0.5, -0.5, 0.2]);
        let k = cross_covariance(&[100.0, 0.0, 0.0], &inputs, &hp).unwrap();
        assert!(k.iter().all(|v| *v < 1e-8));
        let k = cross_covariance(&[0.5, -0.5, 0.2], &inputs, &hp).unwrap();
        assert_eq!(k[1], 1.0);
    }

    #[test]
    fn log_vector_round_trip() {
        let hp = Hyperparameters::new(0.7, vec![0.2, 3.0], vec![0.01, 0.02, 0.5]).unwrap();
        let back = Hyperparameters::from_log_vector(&hp.to_log_vector(), 2, 3).unwrap();
        assert!((back.signal_variance - 0.7).abs() < 1e-15);
        assert!((back.noise_variance[2] - 0.5).abs() < 1e-15);
    }
}
