//! Pair filters on `ℝⁿ × ℝⁿ`: the directional filters `μ_u`, the metric
//! uniformity `u_n`, and sampled commutation of `μ_u ∘ μ_v`.

use serde::{Deserialize, Serialize};

use super::cone::{check_params, cone_member, ConeGenerator};
use super::{add, check_unit, concat, dist, scale, split_pair, sub, FilterKind, GeneratedFilter, MetricError};
use crate::pair::Commutation;
use crate::sampling::{par_sample, point_in_ball, point_in_box, SampleRng};

/// `μ_u`, generated by `V⁺(u, ε, σ) = {(x, y) : d(y, x + [0, ε]u) < σ d(x, y)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDirectionalFilter {
    pub u: Vec<f64>,
}

pub fn pair_directional_filter(u: Vec<f64>) -> Result<PairDirectionalFilter, MetricError> {
    check_unit(&u)?;
    Ok(PairDirectionalFilter { u })
}

impl PairDirectionalFilter {
    pub fn pair_contains(&self, eps: f64, sigma: f64, x: &[f64], y: &[f64]) -> bool {
        cone_member(x, &self.u, eps, sigma, y)
    }

    /// The slice at `x`: a generator of `μ_{x,u}`.
    pub fn slice(&self, x: Vec<f64>, eps: f64, sigma: f64) -> Result<ConeGenerator, MetricError> {
        ConeGenerator::new(x, self.u.clone(), eps, sigma)
    }

    /// `σ*μ_u = μ_{−u}`
    pub fn swapped(&self) -> Self {
        Self { u: scale(&self.u, -1.0) }
    }

    /// Radius `s` with `V⁺(u, ε, σ) ⊆ B(s)`.
    pub fn envelope_radius(eps: f64, sigma: f64) -> f64 {
        eps / (1.0 - sigma)
    }

    /// Draws `(x, y)` in `V⁺(u, ε, σ)` with `x` uniform in a box.
    pub fn sample_pair(&self, rng: &mut SampleRng, eps: f64, sigma: f64, half_width: f64) -> (Vec<f64>, Vec<f64>) {
        let x = point_in_box(rng, self.u.len(), half_width);
        let g = ConeGenerator::new(x.clone(), self.u.clone(), eps, sigma).expect("validated direction");
        let y = g.sample_member(rng);
        (x, y)
    }
}

impl GeneratedFilter for PairDirectionalFilter {
    fn kind(&self) -> FilterKind {
        FilterKind::PairDirectional
    }

    fn contains(&self, eps: f64, sigma: f64, point: &[f64]) -> bool {
        let (x, y) = split_pair(point);
        self.pair_contains(eps, sigma, x, y)
    }
}

/// `(x, y) ∈ B(s)`, i.e. `‖x − y‖ < s`.
pub fn metric_uniformity_contains(s: f64, x: &[f64], y: &[f64]) -> bool {
    dist(x, y) < s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricUniformityReport {
    /// (a) every `B(s)` contains the diagonal.
    pub diagonal: bool,
    /// (b) `B(s/2) ∘ B(s/2) ⊆ B(s)`, certified by the triangle inequality and sampled.
    pub half_composition: bool,
    /// (c) `B(s)` is symmetric.
    pub symmetric: bool,
    pub samples: usize,
}

/// Samples the uniformity axioms for `u_n` on the box `[−w, w]ⁿ`.
pub fn check_metric_uniformity(dim: usize, samples: usize, seed: u64, half_width: f64) -> MetricUniformityReport {
    let res = par_sample(samples, seed, |rng, _| {
        let s = crate::sampling::uniform(rng, 1e-3, 1.0);
        let x = point_in_box(rng, dim, half_width);
        let y = add(&x, &point_in_ball(rng, dim, s / 2.0));
        let z = add(&y, &point_in_ball(rng, dim, s / 2.0));
        let a = metric_uniformity_contains(s, &x, &x);
        let b = !(metric_uniformity_contains(s / 2.0, &x, &y) && metric_uniformity_contains(s / 2.0, &y, &z))
            || metric_uniformity_contains(s, &x, &z);
        let c = metric_uniformity_contains(s, &x, &z) == metric_uniformity_contains(s, &z, &x);
        (a, b, c)
    });
    MetricUniformityReport {
        diagonal: res.iter().all(|r| r.0),
        half_composition: res.iter().all(|r| r.1),
        symmetric: res.iter().all(|r| r.2),
        samples,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutationConfig {
    pub eps: f64,
    pub sigma: f64,
    pub half_width: f64,
    /// Random intermediate points tried when the translated one fails.
    pub search: usize,
}

impl Default for CommutationConfig {
    fn default() -> Self {
        Self { eps: 0.1, sigma: 0.3, half_width: 1.0, search: 200 }
    }
}

/// Samples chains `(x, y) ∈ V⁺(u)`, `(y, z) ∈ V⁺(v)` and looks for `y'` with
/// `(x, y') ∈ V⁺(v)`, `(y', z) ∈ V⁺(u)`, i.e. evidence that the generator
/// `V⁺(u) ∘ V⁺(v)` is contained in `V⁺(v) ∘ V⁺(u)`.
///
/// Failure to find `y'` leaves the chain unresolved; that is never a proof of
/// non-commutation, so the verdict is `Commute` or `Inconclusive`.
pub fn check_metric_commutation(
    mu: &PairDirectionalFilter,
    nu: &PairDirectionalFilter,
    samples: usize,
    seed: u64,
    cfg: &CommutationConfig,
) -> Result<Commutation<Chain>, MetricError> {
    check_params(cfg.eps, cfg.sigma)?;
    if mu.u.len() != nu.u.len() {
        return Err(MetricError::DimensionMismatch { got: nu.u.len(), expected: mu.u.len() });
    }
    let unresolved = par_sample(samples, seed, |rng, _| {
        let (x, y) = mu.sample_pair(rng, cfg.eps, cfg.sigma, cfg.half_width);
        let g = ConeGenerator::new(y.clone(), nu.u.clone(), cfg.eps, cfg.sigma).expect("validated direction");
        let z = g.sample_member(rng);
        let ok = |y2: &[f64]| nu.pair_contains(cfg.eps, cfg.sigma, &x, y2) && mu.pair_contains(cfg.eps, cfg.sigma, y2, &z);
        let translated = sub(&add(&x, &z), &y);
        if ok(&translated) {
            return None;
        }
        let gx = ConeGenerator::new(x.clone(), nu.u.clone(), cfg.eps, cfg.sigma).expect("validated direction");
        for _ in 0..cfg.search {
            if ok(&gx.sample_member(rng)) {
                return None;
            }
        }
        Some(Chain { x: x.clone(), y, z })
    })
    .into_iter()
    .flatten()
    .count();
    Ok(if unresolved == 0 {
        Commutation::Commute
    } else {
        Commutation::Inconclusive { unresolved, checked: samples }
    })
}

/// `(x, y) ↦ x ++ y`, for feeding pairs to [`GeneratedFilter::contains`].
pub fn pair_point(x: &[f64], y: &[f64]) -> Vec<f64> {
    concat(x, y)
}
