use std::collections::VecDeque;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::Hyperparameters;
use super::likelihood::log_marginal_likelihood;
use super::model::Dataset;
use crate::error::{Error, Result};

/// Box constraints on the hyperparameters (natural scale, not log).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterBounds {
    pub signal_variance: (f64, f64),
    pub lengthscale: (f64, f64),
    pub noise_variance: (f64, f64),
}

impl Default for ParameterBounds {
    fn default() -> Self {
        Self {
            signal_variance: (1e-6, 1e6),
            lengthscale: (1e-3, 1e3),
            noise_variance: (1e-8, 1e4),
        }
    }
}

impl ParameterBounds {
    fn log_box(&self, dim: usize, outputs: usize) -> (DVector<f64>, DVector<f64>) {
        let mut lo = Vec::with_capacity(1 + dim + outputs);
        let mut hi = Vec::with_capacity(1 + dim + outputs);
        lo.push(self.signal_variance.0.ln());
        hi.push(self.signal_variance.1.ln());
        for _ in 0..dim {
            lo.push(self.lengthscale.0.ln());
            hi.push(self.lengthscale.1.ln());
        }
        for _ in 0..outputs {
            lo.push(self.noise_variance.0.ln());
            hi.push(self.noise_variance.1.ln());
        }
        (DVector::from_vec(lo), DVector::from_vec(hi))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Stop once the projected gradient's infinity norm drops below this.
    pub gradient_tolerance: f64,
    pub bounds: ParameterBounds,
    /// L-BFGS history length.
    pub memory: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            restarts: 4,
            seed: 0,
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            bounds: ParameterBounds::default(),
            memory: 10,
        }
    }
}

/// Outcome of one restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub initial: Hyperparameters,
    pub initial_log_likelihood: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub hyperparameters: Hyperparameters,
    pub log_likelihood: f64,
    pub best_restart: usize,
    /// `None` for restarts whose starting point could not be factorized.
    pub restarts: Vec<Option<RestartOutcome>>,
}

/// Maximizes the log marginal likelihood from `restarts` seeded starting
/// points and returns the best hyperparameters found.
pub fn optimize_hyperparameters(dataset: &Dataset, restarts: usize, seed: u64) -> Result<Hyperparameters> {
    OptimizerSettings {
        restarts,
        seed,
        ..Default::default()
    }
    .optimize(dataset)
    .map(|r| r.hyperparameters)
}

impl OptimizerSettings {
    pub fn optimize(&self, dataset: &Dataset) -> Result<OptimizationReport> {
        if self.restarts == 0 {
            return Err(Error::invalid("at least one restart is required"));
        }
        let dim = dataset.input_dim();
        let outputs = dataset.outputs();
        let (lo, hi) = self.bounds.log_box(dim, outputs);
        let starts = self.starting_points(dataset, &lo, &hi);

        let results: Vec<Option<(RestartOutcome, DVector<f64>)>> = starts
            .into_par_iter()
            .map(|theta0| self.ascend(dataset, theta0, &lo, &hi).ok())
            .collect();

        let mut best: Option<(usize, f64)> = None;
        for (idx, r) in results.iter().enumerate() {
            if let Some((out, _)) = r {
                if best.is_none_or(|(_, v)| out.log_likelihood > v) {
                    best = Some((idx, out.log_likelihood));
                }
            }
        }
        let (best_restart, log_likelihood) =
            best.ok_or_else(|| Error::OptimizationFailed("every restart failed to factorize the kernel matrix".into()))?;
        let theta = results[best_restart].as_ref().map(|(_, t)| t.clone()).unwrap_or_default();
        Ok(OptimizationReport {
            hyperparameters: Hyperparameters::from_log_vector(&theta, dim, outputs)?,
            log_likelihood,
            best_restart,
            restarts: results.into_iter().map(|r| r.map(|(o, _)| o)).collect(),
        })
    }

    /// Restart 0 sits at the data-scale heuristic; the rest scale each
    /// parameter by a log-uniform factor in [1e-2, 1e2].
    fn starting_points(&self, dataset: &Dataset, lo: &DVector<f64>, hi: &DVector<f64>) -> Vec<DVector<f64>> {
        let targets = dataset.targets();
        let inputs = dataset.inputs();
        let var_of = |vals: &mut dyn Iterator<Item = f64>| {
            let v: Vec<f64> = vals.collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64
        };
        let or_one = |v: f64| if v > 0.0 && v.is_finite() { v } else { 1.0 };

        let target_var: Vec<f64> = (0..dataset.outputs())
            .map(|i| var_of(&mut targets.column(i).iter().copied()))
            .collect();
        let signal = or_one(target_var.iter().sum::<f64>() / target_var.len() as f64);
        let lengths: Vec<f64> = (0..dataset.input_dim())
            .map(|d| or_one(var_of(&mut inputs.row(d).iter().copied()).sqrt()))
            .collect();
        let noise: Vec<f64> = target_var.iter().map(|v| 1e-2 * or_one(*v)).collect();
        let mut center = vec![signal.ln()];
        center.extend(lengths.iter().map(|l| l.ln()));
        center.extend(noise.iter().map(|s| s.ln()));
        let center = DVector::from_vec(center);

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let spread = 100f64.ln();
        (0..self.restarts)
            .map(|r| {
                let mut theta = center.clone();
                if r > 0 {
                    for v in theta.iter_mut() {
                        *v += rng.random_range(-spread..=spread);
                    }
                }
                clamp(&mut theta, lo, hi);
                theta
            })
            .collect()
    }

    /// Projected L-BFGS ascent on the log marginal likelihood.
    fn ascend(
        &self,
        dataset: &Dataset,
        theta0: DVector<f64>,
        lo: &DVector<f64>,
        hi: &DVector<f64>,
    ) -> Result<(RestartOutcome, DVector<f64>)> {
        let dim = dataset.input_dim();
        let outputs = dataset.outputs();
        // Minimize f = −LML.
        let eval = |theta: &DVector<f64>| -> Result<(f64, DVector<f64>)> {
            let hp = Hyperparameters::from_log_vector(theta, dim, outputs)?;
            let lml = log_marginal_likelihood(dataset, &hp)?;
            if !lml.value.is_finite() || lml.gradient.iter().any(|g| !g.is_finite()) {
                return Err(Error::OptimizationFailed("non-finite likelihood".into()));
            }
            Ok((-lml.value, -lml.gradient))
        };

        let initial = Hyperparameters::from_log_vector(&theta0, dim, outputs)?;
        let mut theta = theta0;
        let (mut f, mut g) = eval(&theta)?;
        let initial_log_likelihood = -f;
        let mut history: VecDeque<(DVector<f64>, DVector<f64>)> = VecDeque::with_capacity(self.memory);
        let mut converged = false;
        let mut iterations = 0;

        while iterations < self.max_iterations {
            let pg = projected_gradient(&theta, &g, lo, hi);
            if pg.amax() < self.gradient_tolerance {
                converged = true;
                break;
            }
            iterations += 1;

            let mut dir = -two_loop(&pg, &history);
            for j in 0..dir.len() {
                if pg[j] == 0.0 {
                    dir[j] = 0.0;
                }
            }
            if dir.dot(&pg) >= 0.0 {
                dir = -pg.clone();
                history.clear();
            }
            // Cap any single log-step at 2 (a factor of e² in natural units).
            let max_step = dir.amax();
            if max_step > 2.0 {
                dir *= 2.0 / max_step;
            }

            match line_search(&eval, &theta, f, &pg, &dir, lo, hi) {
                Some((next, f_next, g_next)) => {
                    let s = &next - &theta;
                    let y = &g_next - &g;
                    if s.dot(&y) > 1e-12 {
                        if history.len() == self.memory {
                            history.pop_front();
                        }
                        history.push_back((s, y));
                    }
                    theta = next;
                    f = f_next;
                    g = g_next;
                }
                None if !history.is_empty() => history.clear(),
                None => {
                    // No ascent along steepest direction: stationary to working precision.
                    converged = true;
                    break;
                }
            }
        }
        Ok((
            RestartOutcome {
                initial,
                initial_log_likelihood,
                log_likelihood: -f,
                iterations,
                converged,
            },
            theta,
        ))
    }
}

fn clamp(theta: &mut DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) {
    for j in 0..theta.len() {
        theta[j] = theta[j].clamp(lo[j], hi[j]);
    }
}

fn projected_gradient(theta: &DVector<f64>, g: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        g.len(),
        (0..g.len()).map(|j| {
            let at_lo = theta[j] <= lo[j] && g[j] > 0.0;
            let at_hi = theta[j] >= hi[j] && g[j] < 0.0;
            if at_lo || at_hi {
                0.0
            } else {
                g[j]
            }
        }),
    )
}

/// L-BFGS two-loop recursion: approximates `H⁻¹ g`.
fn two_loop(g: &DVector<f64>, history: &VecDeque<(DVector<f64>, DVector<f64>)>) -> DVector<f64> {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y) in history.iter().rev() {
        let rho = 1.0 / y.dot(s);
        let a = rho * s.dot(&q);
        q.axpy(-a, y, 1.0);
        alphas.push((rho, a));
    }
    if let Some((s, y)) = history.back() {
        q *= s.dot(y) / y.dot(y);
    }
    for ((s, y), (rho, a)) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * y.dot(&q);
        q.axpy(a - b, s, 1.0);
    }
    q
}

type Eval<'a> = dyn Fn(&DVector<f64>) -> Result<(f64, DVector<f64>)> + 'a;

/// Backtracking Armijo search along the projected path.
fn line_search(
    eval: &Eval<'_>,
    theta: &DVector<f64>,
    f: f64,
    g: &DVector<f64>,
    dir: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> Option<(DVector<f64>, f64, DVector<f64>)> {
    let mut t = 1.0;
    for _ in 0..40 {
        let mut trial = theta + dir * t;
        clamp(&mut trial, lo, hi);
        let step = &trial - theta;
        if step.amax() == 0.0 {
            return None;
        }
        if let Ok((f_trial, g_trial)) = eval(&trial) {
            if f_trial <= f + 1e-4 * g.dot(&step) && f_trial < f {
                return Some((trial, f_trial, g_trial));
            }
        }
        t *= 0.5;
    }
    None
}
