use nalgebra::DVector;

use super::{alpha, BlendConfig, DesiredOutput, EstimatedModel, Pid};
use crate::error::{Error, Result};
use crate::gp::TrainedGP;

/// Everything the control law produced in one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    /// Applied net muscle forces `(1 − α) p_ff + α u`.
    pub force: DVector<f64>,
    pub feedforward: DVector<f64>,
    /// Feedback forces after distribution to the segments.
    pub feedback: DVector<f64>,
    pub alpha: f64,
    pub variances: DVector<f64>,
}

/// `μ(ỹ_d) + h(ỹ_d)`
pub fn feedforward(gp: &TrainedGP, h: &dyn EstimatedModel, target: &DesiredOutput) -> Result<DVector<f64>> {
    let mean = gp.predict_mean(&target.as_input())?;
    let prior = h.estimate(target);
    if prior.len() != mean.len() {
        return Err(Error::invalid(format!(
            "estimated model returns {} forces, GP predicts {}",
            prior.len(),
            mean.len()
        )));
    }
    Ok(mean + prior)
}

/// Spreads an output-space command over `dof` segments along the transpose
/// of the tip-angle Jacobian (all ones), scaled by `1/dof`.
pub fn distribute(command: &DVector<f64>, dof: usize) -> DVector<f64> {
    DVector::from_element(dof, command.sum() / dof as f64)
}

/// One PID update on the output error, returned as segment forces.
pub fn feedback(pid: &mut Pid, error: &DVector<f64>, dt: f64, dof: usize) -> Result<DVector<f64>> {
    Ok(distribute(&pid.update(error, dt)?, dof))
}

/// `(1 − α)·p_ff + α·u`, evaluated component-wise in exactly this form.
pub fn blend_forces(alpha: f64, p_ff: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    p_ff.zip_map(u, |ff, fb| (1.0 - alpha) * ff + alpha * fb)
}

/// The full blended law for one control period.
pub fn control_law(
    gp: &TrainedGP,
    h: &dyn EstimatedModel,
    pid: &mut Pid,
    blend: &BlendConfig,
    target: &DesiredOutput,
    measured: &DVector<f64>,
) -> Result<ControlOutput> {
    if measured.len() != target.outputs() {
        return Err(Error::invalid("measured output dimension differs from the target"));
    }
    let input = target.as_input();
    let (mean, variances) = gp.predict(&input)?;
    let prior = h.estimate(target);
    if prior.len() != mean.len() {
        return Err(Error::invalid("estimated model and GP disagree on the number of forces"));
    }
    let p_ff = mean + prior;
    let dof = p_ff.len();
    let error = &target.position - measured;
    let dt = pid.config.dt;
    let u = feedback(pid, &error, dt, dof)?;
    let a = alpha(&variances, blend);
    Ok(ControlOutput {
        force: blend_forces(a, &p_ff, &u),
        feedforward: p_ff,
        feedback: u,
        alpha: a,
        variances,
    })
}

/// Controller instance for one simulation run; owns the PID state and
/// borrows the shared GP and prior model.
pub struct BlendedController<'a> {
    pub gp: &'a TrainedGP,
    pub model: &'a dyn EstimatedModel,
    pub pid: Pid,
    pub blend: BlendConfig,
}

impl<'a> BlendedController<'a> {
    pub fn new(gp: &'a TrainedGP, model: &'a dyn EstimatedModel, pid: Pid, blend: BlendConfig) -> Result<Self> {
        blend.validate()?;
        if gp.input_dim() != 3 * pid.state.integral.len() {
            return Err(Error::invalid(format!(
                "GP input dimension {} does not match 3 × {} outputs",
                gp.input_dim(),
                pid.state.integral.len()
            )));
        }
        Ok(Self { gp, model, pid, blend })
    }

    pub fn step(&mut self, target: &DesiredOutput, measured: &DVector<f64>) -> Result<ControlOutput> {
        control_law(self.gp, self.model, &mut self.pid, &self.blend, target, measured)
    }
}
