//! Generated filters on metric spaces.
//!
//! A generated filter is a family of sets indexed by a size `ε > 0` and an
//! aperture `σ ∈ (0, 1)`, shrinking as both shrink. Membership is decided
//! pointwise; inclusions between families are only ever sampled.

pub mod arc;
pub mod cone;
pub mod curve;
pub mod maps;
pub mod pairs;
pub mod sequence;
pub mod transport;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampling::{par_failures, uniform, SampleRng};

pub use arc::{arc_distance, ArcDistance};
pub use cone::{check_bound, directional_filter, v_plus_contains, ConeGenerator, DirectionalFilter};
pub use curve::{Curve, CurveFilter, Sign};
pub use maps::MapSpec;
pub use pairs::{metric_uniformity_contains, pair_directional_filter, PairDirectionalFilter};
pub use sequence::{classify_sequence, ClassifyConfig, SequenceVerdict};
pub use transport::{transport_via_sequences, Transport};

pub const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("direction has norm {norm}, expected 1")]
    NonUnitDirection { norm: f64 },
    #[error("dimension mismatch: {got} vs {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("term {index} equals the base point")]
    DegenerateTerm { index: usize },
    #[error("Jacobian is singular (|det| = {det:e})")]
    SingularJacobian { det: f64 },
    #[error("image sequence has no direction limit")]
    NoDirectionLimit,
    #[error("curve is not bi-Lipschitz on its domain: quotients in [{lower:e}, {upper:e}]")]
    CurveNotBiLipschitz { lower: f64, upper: f64 },
    #[error("invalid witness: d(y, c(λ)) = {gap} is not below μ·d(x, y) = {bound}")]
    InvalidWitness { gap: f64, bound: f64 },
    #[error("inverse residual {residual:e} exceeds tolerance")]
    InverseResidualTooLarge { residual: f64 },
    #[error("sampling budget exhausted after {0} attempts")]
    BudgetExhausted(usize),
}

/// A distance on `ℝⁿ`, pluggable so that snowflake metrics reuse the engine.
pub trait Metric: Sync {
    fn distance(&self, x: &[f64], y: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Euclidean;

impl Metric for Euclidean {
    fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        dist(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    Directional,
    PairDirectional,
    Curve,
    Polynomial,
    Flow,
}

/// A filter given by generators `G(ε, σ)`. Pair kinds take `x ++ y` as input.
pub trait GeneratedFilter: Sync {
    fn kind(&self) -> FilterKind;
    fn contains(&self, eps: f64, sigma: f64, point: &[f64]) -> bool;
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityViolation {
    pub point: Vec<f64>,
    pub small: (f64, f64),
    pub large: (f64, f64),
}

/// Samples `G(ε, σ) ⊆ G(ε', σ')` for `ε ≤ ε'`, `σ ≤ σ'`.
///
/// `draw` proposes points; only those inside the smaller generator count.
pub fn check_monotone<G, D>(g: &G, samples: usize, seed: u64, eps_max: f64, draw: D) -> (usize, Vec<MonotonicityViolation>)
where
    G: GeneratedFilter + ?Sized,
    D: Fn(&mut SampleRng, f64) -> Vec<f64> + Sync,
{
    par_failures(samples, seed, 8, |rng, _| {
        let e1 = uniform(rng, 1e-3, eps_max);
        let e2 = uniform(rng, e1, eps_max);
        let s1 = uniform(rng, 1e-3, 0.99);
        let s2 = uniform(rng, s1, 0.999);
        let p = draw(rng, e1);
        (g.contains(e1, s1, &p) && !g.contains(e2, s2, &p))
            .then(|| MonotonicityViolation { point: p, small: (e1, s1), large: (e2, s2) })
    })
}

pub fn check_unit(u: &[f64]) -> Result<(), MetricError> {
    let n = norm(u);
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(MetricError::NonUnitDirection { norm: n });
    }
    Ok(())
}

pub fn check_dims(a: &[f64], b: &[f64]) -> Result<(), MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::DimensionMismatch { got: b.len(), expected: a.len() });
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s·b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn normalize(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    (n > 0.0 && n.is_finite()).then(|| scale(a, 1.0 / n))
}

/// Angle between nonzero vectors, stable near 0 and π.
pub fn angle(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    let d = dist(&scale(a, nb), &scale(b, na));
    let s = norm(&add(&scale(a, nb), &scale(b, na)));
    2.0 * d.atan2(s)
}

pub fn concat(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().chain(y).copied().collect()
}

pub fn split_pair(p: &[f64]) -> (&[f64], &[f64]) {
    p.split_at(p.len() / 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_is_accurate_near_zero() {
        let a = [1.0, 0.0];
        let b = [1.0, 1e-9];
        assert!((angle(&a, &b) - 1e-9).abs() < 1e-20);
        assert!((angle(&a, &[-1.0, 0.0]) - std::f64::consts::PI).abs() < 1e-15);
        assert!((angle(&a, &[0.0, 3.0]) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }
}
