use nalgebra::{Cholesky, DMatrix, DVector};

use super::{ExternalForce, RobotConfig, RobotState};
use crate::error::{Error, Result};

fn absolute_angles(q: &DVector<f64>) -> Vec<f64> {
    q.iter()
        .scan(0.0, |phi, qj| {
            *phi += qj;
            Some(*phi)
        })
        .collect()
}

/// Lever from joint `l` toward the center of mass of link `i` (`l ≤ i`).
#[inline]
fn lever(cfg: &RobotConfig, i: usize, l: usize) -> f64 {
    if l < i {
        cfg.segment_length
    } else {
        0.5 * cfg.segment_length
    }
}

/// Joint-space inertia `M(q) = Σ_i m J_iᵀJ_i + I_c J_ωᵢᵀJ_ωᵢ`, written out
/// in relative-angle cosines.
pub fn mass_matrix(q: &DVector<f64>, cfg: &RobotConfig) -> DMatrix<f64> {
    let n = cfg.dof();
    let phi = absolute_angles(q);
    let m = cfg.segment_mass;
    let ic = cfg.link_inertia();
    let mut mm = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..=j {
            let mut acc = 0.0;
            for i in j..n {
                let mut lin = 0.0;
                for l in j..=i {
                    for lp in k..=i {
                        lin += lever(cfg, i, l) * lever(cfg, i, lp) * (phi[l] - phi[lp]).cos();
                    }
                }
                acc += m * lin + ic;
            }
            mm[(j, k)] = acc;
            mm[(k, j)] = acc;
        }
    }
    mm
}

/// `∂M/∂q_s` for every `s`.
pub fn mass_matrix_derivatives(q: &DVector<f64>, cfg: &RobotConfig) -> Vec<DMatrix<f64>> {
    let n = cfg.dof();
    let phi = absolute_angles(q);
    let m = cfg.segment_mass;
    (0..n)
        .map(|s| {
            let mut d = DMatrix::zeros(n, n);
            for j in 0..n {
                for k in 0..=j {
                    let mut acc = 0.0;
                    for i in j..n {
                        for l in j..=i {
                            for lp in k..=i {
                                // ∂(φ_l − φ_l')/∂q_s
                                let dphi = (s <= l) as i32 - (s <= lp) as i32;
                                if dphi != 0 {
                                    acc -= f64::from(dphi)
                                        * lever(cfg, i, l)
                                        * lever(cfg, i, lp)
                                        * (phi[l] - phi[lp]).sin();
                                }
                            }
                        }
                    }
                    d[(j, k)] = m * acc;
                    d[(k, j)] = m * acc;
                }
            }
            d
        })
        .collect()
}

/// Coriolis/centrifugal matrix from the Christoffel symbols of `M`, so that
/// `Ṁ − 2C` is skew-symmetric.
pub fn coriolis_matrix(q: &DVector<f64>, q_dot: &DVector<f64>, cfg: &RobotConfig) -> DMatrix<f64> {
    let n = cfg.dof();
    let mut c = DMatrix::zeros(n, n);
    if q_dot.iter().all(|v| *v == 0.0) {
        return c;
    }
    let dm = mass_matrix_derivatives(q, cfg);
    for j in 0..n {
        for k in 0..n {
            c[(j, k)] = (0..n)
                .map(|s| 0.5 * (dm[s][(j, k)] + dm[k][(j, s)] - dm[j][(k, s)]) * q_dot[s])
                .sum();
        }
    }
    c
}

/// Gravitational potential of the links, zero-referenced at the pivot.
pub fn potential_energy(q: &DVector<f64>, cfg: &RobotConfig) -> f64 {
    let phi = absolute_angles(q);
    let mut height = 0.0;
    for i in 0..cfg.dof() {
        for l in 0..=i {
            height -= lever(cfg, i, l) * phi[l].cos();
        }
    }
    let spring = 0.5 * cfg.passive_stiffness * q.norm_squared();
    cfg.segment_mass * cfg.gravity * height + spring
}

/// `∂U_gravity/∂q`
pub fn gravity_torque(q: &DVector<f64>, cfg: &RobotConfig) -> DVector<f64> {
    let n = cfg.dof();
    let phi = absolute_angles(q);
    let mg = cfg.segment_mass * cfg.gravity;
    DVector::from_iterator(
        n,
        (0..n).map(|s| {
            let mut acc = 0.0;
            for i in s..n {
                for l in s..=i {
                    acc += lever(cfg, i, l) * phi[l].sin();
                }
            }
            mg * acc
        }),
    )
}

/// Passive generalized forces: gravity, spring toward `q = 0`, damping.
pub fn force_vector(q: &DVector<f64>, q_dot: &DVector<f64>, cfg: &RobotConfig) -> DVector<f64> {
    gravity_torque(q, cfg) + q * cfg.passive_stiffness + q_dot * cfg.damping
}

/// Joint torques from net muscle forces. Constant moment arm, so this does
/// not depend on `q`; the argument is kept for the `τ(q, p)` signature.
pub fn actuator_force(_q: &DVector<f64>, p: &DVector<f64>, cfg: &RobotConfig) -> DVector<f64> {
    p * cfg.moment_arm
}

/// Tip orientation relative to the base.
pub fn output_map(q: &DVector<f64>, _cfg: &RobotConfig) -> DVector<f64> {
    DVector::from_element(1, q.sum())
}

/// `∂y/∂q`, an all-ones row.
pub fn output_jacobian(cfg: &RobotConfig) -> DMatrix<f64> {
    DMatrix::from_element(1, cfg.dof(), 1.0)
}

/// `q̈ = M⁻¹(τ(q,p) + τ_ext − C q̇ − N)` evaluated at `state.time`.
pub fn forward_dynamics(
    state: &RobotState,
    p: &DVector<f64>,
    ext: Option<&ExternalForce>,
    cfg: &RobotConfig,
) -> Result<DVector<f64>> {
    if p.len() != cfg.dof() {
        return Err(Error::invalid(format!(
            "force vector has length {}, robot has {} actuators",
            p.len(),
            cfg.dof()
        )));
    }
    let mut rhs = actuator_force(&state.q, p, cfg)
        - coriolis_matrix(&state.q, &state.q_dot, cfg) * &state.q_dot
        - force_vector(&state.q, &state.q_dot, cfg);
    if let Some(e) = ext {
        rhs += e.generalized(state.time, cfg.dof());
    }
    if !state.is_finite() || rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { time: state.time });
    }
    let chol = Cholesky::new(mass_matrix(&state.q, cfg)).ok_or(Error::SingularConfiguration { time: state.time })?;
    Ok(chol.solve(&rhs))
}

/// Kinetic plus potential (gravity and spring) energy.
pub fn total_energy(state: &RobotState, cfg: &RobotConfig) -> f64 {
    let m = mass_matrix(&state.q, cfg);
    0.5 * state.q_dot.dot(&(m * &state.q_dot)) + potential_energy(&state.q, cfg)
}
