//! Pushing sequences that converge to `μ_{x,u}` through a smooth map.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::maps::MapSpec;
use super::sequence::{direction_limit, directions};
use super::{angle, axpy, check_dims, check_unit, normalize, scale, sub, MetricError};
use crate::sampling::{rng_for, unit_vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportConfig {
    /// First step `t_0`; later steps halve it.
    pub t0: f64,
    /// Smallest step used.
    pub t_min: f64,
    /// Tolerance for the raw image directions to settle.
    pub settle_tol: f64,
    pub seed: u64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self { t0: 0.25, t_min: 1e-6, settle_tol: 1e-3, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transport {
    /// Extrapolated image direction of the first trial.
    pub direction: Vec<f64>,
    /// `Df(x)u / ‖Df(x)u‖` from the analytic Jacobian.
    pub expected: Vec<f64>,
    /// Largest angle between an extrapolated trial direction and `expected`.
    pub residual: f64,
    pub trials: usize,
}

/// Sequences `x + t_h u + t_h² w` with `t_h = t_0 2^{−h}` are mapped by `f`;
/// the image directions are extrapolated to `t = 0` with one Richardson step.
pub fn transport_via_sequences(f: &MapSpec, x: &[f64], u: &[f64], trials: usize, cfg: &TransportConfig) -> Result<Transport, MetricError> {
    f.validate()?;
    check_dims(x, u)?;
    if x.len() != f.dim() {
        return Err(MetricError::DimensionMismatch { got: x.len(), expected: f.dim() });
    }
    check_unit(u)?;
    let jac = f.jacobian(x);
    let det = jac.determinant();
    if !(det.abs() > 1e-12) {
        return Err(MetricError::SingularJacobian { det });
    }
    let du = &jac * DVector::from_column_slice(u);
    let expected = normalize(du.as_slice()).ok_or(MetricError::SingularJacobian { det })?;

    let fx = f.eval(x);
    let mut rng = rng_for(cfg.seed, 0);
    let mut residual = 0.0f64;
    let mut first = None;
    for k in 0..trials.max(1) {
        let w = if k == 0 { vec![0.0; x.len()] } else { unit_vector(&mut rng, x.len()) };
        let mut ts = Vec::new();
        let mut t = cfg.t0;
        while t >= cfg.t_min {
            ts.push(t);
            t /= 2.0;
        }
        let image: Vec<Vec<f64>> = ts.iter().map(|&t| f.eval(&axpy(&axpy(x, t, u), t * t, &w))).collect();
        let dirs = directions(&image, &fx)?;
        let tail = &dirs[dirs.len() - 3..];
        if direction_limit(tail, cfg.settle_tol).is_none() {
            return Err(MetricError::NoDirectionLimit);
        }
        let n = dirs.len();
        let extrapolated = normalize(&sub(&scale(&dirs[n - 1], 2.0), &dirs[n - 2])).ok_or(MetricError::NoDirectionLimit)?;
        residual = residual.max(angle(&extrapolated, &expected));
        first.get_or_insert(extrapolated);
    }
    Ok(Transport { direction: first.expect("at least one trial"), expected, residual, trials: trials.max(1) })
}
