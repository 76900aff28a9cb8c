use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::kernel::{covariance_matrix, Hyperparameters};
use super::model::{factorize_with_jitter, Dataset};
use crate::error::Result;

/// Log marginal likelihood summed over outputs, with its gradient in the
/// log-parameter space of [`Hyperparameters::to_log_vector`].
#[derive(Debug, Clone)]
pub struct LogLikelihood {
    pub value: f64,
    pub gradient: DVector<f64>,
}

/// `Σ_i [−½ P_iᵀ K_i⁻¹ P_i − ½ log|K_i| − (n_d/2) log 2π]` with `K_i = K + σ_i² I`.
pub fn log_marginal_likelihood(dataset: &Dataset, hp: &Hyperparameters) -> Result<LogLikelihood> {
    hp.validate()?;
    dataset.check_compatible(hp)?;
    let x = dataset.inputs();
    let n = dataset.len();
    let dim = dataset.input_dim();
    let k = covariance_matrix(x, hp)?;

    // Squared scaled differences per input dimension: ∂K/∂ln ℓ_d = K ∘ D_d.
    let scaled: Vec<DMatrix<f64>> = (0..dim)
        .map(|d| {
            let l2 = hp.lengthscales[d] * hp.lengthscales[d];
            DMatrix::from_fn(n, n, |j, l| {
                let r = x[(d, j)] - x[(d, l)];
                r * r / l2
            })
        })
        .collect();

    let mut value = 0.0;
    let mut gradient = DVector::zeros(1 + dim + dataset.outputs());
    for (i, &noise) in hp.noise_variance.iter().enumerate() {
        let (chol, _) = factorize_with_jitter(&k, noise, hp.signal_variance)?;
        let y = dataset.targets().column(i).into_owned();
        let alpha = chol.solve(&y);
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        value += -0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * PI).ln();

        // W = ααᵀ − K_i⁻¹, ∂L/∂θ = ½ tr(W ∂K_i/∂θ)
        let mut w = chol.inverse();
        w.neg_mut();
        w.ger(1.0, &alpha, &alpha, 1.0);

        let wk = w.component_mul(&k);
        gradient[0] += 0.5 * wk.sum();
        for (d, s) in scaled.iter().enumerate() {
            gradient[1 + d] += 0.5 * wk.dot(s);
        }
        gradient[1 + dim + i] += 0.5 * w.trace() * noise;
    }
    Ok(LogLikelihood { value, gradient })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_gaussian_at_zero() {
        let data = Dataset::from_rows(&[vec![0.0, 0.0, 0.0]], &[vec![0.0]]).unwrap();
        let hp = Hyperparameters::isotropic(1.0, 1.0, 3, 0.0, 1).unwrap();
        let lml = log_marginal_likelihood(&data, &hp).unwrap();
        assert!((lml.value + 0.5 * (2.0 * PI).ln()).abs() < 1e-12);
        assert!((lml.value + 0.918939).abs() < 1e-6);
    }

    #[test]
    fn outputs_add_up() {
        let inputs = vec![vec![0.0], vec![0.7], vec![1.1]];
        let a = Dataset::from_rows(&inputs, &[vec![1.0], vec![0.5], vec![-0.2]]).unwrap();
        let b = Dataset::from_rows(&inputs, &[vec![0.3], vec![0.1], vec![0.9]]).unwrap();
        let ab = Dataset::from_rows(&inputs, &[vec![1.0, 0.3], vec![0.5, 0.1], vec![-0.2, 0.9]]).unwrap();
        let hp1 = |s| Hyperparameters::new(1.3, vec![0.6], vec![s]).unwrap();
        let hp2 = Hyperparameters::new(1.3, vec![0.6], vec![0.01, 0.2]).unwrap();
        let la = log_marginal_likelihood(&a, &hp1(0.01)).unwrap().value;
        let lb = log_marginal_likelihood(&b, &hp1(0.2)).unwrap().value;
        let lab = log_marginal_likelihood(&ab, &hp2).unwrap().value;
        assert!((la + lb - lab).abs() < 1e-12);
    }
}
