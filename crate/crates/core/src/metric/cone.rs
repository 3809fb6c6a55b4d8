//! Cone sets `V⁺(x, u, ε, σ)` and the directional filters they generate.

use super::{axpy, check_dims, check_unit, dist, dot, sub, FilterKind, GeneratedFilter, MetricError};
use crate::sampling::{point_in_ball, uniform, SampleRng};

#[derive(Debug, Clone, PartialEq)]
pub struct ConeGenerator {
    x: Vec<f64>,
    u: Vec<f64>,
    eps: f64,
    sigma: f64,
}

impl ConeGenerator {
    pub fn new(x: Vec<f64>, u: Vec<f64>, eps: f64, sigma: f64) -> Result<Self, MetricError> {
        check_dims(&x, &u)?;
        check_unit(&u)?;
        check_params(eps, sigma)?;
        Ok(Self { x, u, eps, sigma })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// The point `x + λu` of the segment closest to `y`.
    pub fn witness(&self, y: &[f64]) -> (f64, f64) {
        segment_distance(&self.x, &self.u, self.eps, y)
    }

    /// Upper bound on `d(x, y)` over members: `d(x,y) < d(x, x+λu)/(1−σ) ≤ ε/(1−σ)`.
    pub fn envelope_radius(&self) -> f64 {
        self.eps / (1.0 - self.sigma)
    }

    /// Draws a member. Offsets below `σλ/(1+σ)` from `x + λu` always qualify.
    pub fn sample_member(&self, rng: &mut SampleRng) -> Vec<f64> {
        loop {
            let lambda = uniform(rng, 0.0, self.eps);
            let r = self.sigma * lambda / (1.0 + self.sigma);
            let y = axpy(&axpy(&self.x, lambda, &self.u), 1.0, &point_in_ball(rng, self.x.len(), r));
            if v_plus_contains(self, &y) {
                return y;
            }
        }
    }
}

pub(crate) fn check_params(eps: f64, sigma: f64) -> Result<(), MetricError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(MetricError::InvalidParameter(format!("ε = {eps} must be positive")));
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(MetricError::InvalidParameter(format!("σ = {sigma} must lie in (0, 1)")));
    }
    Ok(())
}

/// `(distance, λ)` from `y` to the segment `x + [0, ε]u`, by clamped projection.
pub fn segment_distance(x: &[f64], u: &[f64], eps: f64, y: &[f64]) -> (f64, f64) {
    let lambda = dot(&sub(y, x), u).clamp(0.0, eps);
    (dist(y, &axpy(x, lambda, u)), lambda)
}

/// `y ≠ x` and `d(y, x + [0, ε]u) < σ·d(x, y)`.
pub fn v_plus_contains(g: &ConeGenerator, y: &[f64]) -> bool {
    cone_member(&g.x, &g.u, g.eps, g.sigma, y)
}

pub(crate) fn cone_member(x: &[f64], u: &[f64], eps: f64, sigma: f64, y: &[f64]) -> bool {
    let r = dist(x, y);
    r > 0.0 && segment_distance(x, u, eps, y).0 < sigma * r
}

/// `d(x, c(λ))/(1+μ) < d(x, y) < d(x, c(λ))/(1−μ)` given `d(y, c(λ)) < μ·d(x, y)`.
pub fn check_bound(x: &[f64], c_lambda: &[f64], y: &[f64], mu: f64) -> Result<bool, MetricError> {
    let dxy = dist(x, y);
    let gap = dist(y, c_lambda);
    if !(gap < mu * dxy) {
        return Err(MetricError::InvalidWitness { gap, bound: mu * dxy });
    }
    let dxc = dist(x, c_lambda);
    Ok(dxc / (1.0 + mu) < dxy && dxy < dxc / (1.0 - mu))
}

/// `μ_{x,u}`, generated by `V⁺(x, u, ε, σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalFilter {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

pub fn directional_filter(x: Vec<f64>, u: Vec<f64>) -> Result<DirectionalFilter, MetricError> {
    check_dims(&x, &u)?;
    check_unit(&u)?;
    Ok(DirectionalFilter { x, u })
}

impl DirectionalFilter {
    pub fn generator(&self, eps: f64, sigma: f64) -> Result<ConeGenerator, MetricError> {
        ConeGenerator::new(self.x.clone(), self.u.clone(), eps, sigma)
    }
}

impl GeneratedFilter for DirectionalFilter {
    fn kind(&self) -> FilterKind {
        FilterKind::Directional
    }

    fn contains(&self, eps: f64, sigma: f64, point: &[f64]) -> bool {
        cone_member(&self.x, &self.u, eps, sigma, point)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{angle, check_monotone};
    use crate::sampling::{par_failures, rng_for};

    fn unit_x() -> ConeGenerator {
        ConeGenerator::new(vec![0.0, 0.0], vec![1.0, 0.0], 1.0, 0.5).unwrap()
    }

    #[test]
    fn membership_examples() {
        let g = unit_x();
        assert!(v_plus_contains(&g, &[0.5, 0.1]));
        assert!(!v_plus_contains(&g, &[0.0, 0.0]));
        assert!(!v_plus_contains(&g, &[-0.5, 0.0]));
        // (0.5, 0.1): segment distance 0.1, bound 0.5·√0.26 ≈ 0.255
        assert_eq!(segment_distance(&[0.0, 0.0], &[1.0, 0.0], 1.0, &[0.5, 0.1]), (0.1, 0.5));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            ConeGenerator::new(vec![0.0, 0.0], vec![1.0, 1.0], 1.0, 0.5),
            Err(MetricError::NonUnitDirection { .. })
        ));
        assert!(ConeGenerator::new(vec![0.0, 0.0], vec![1.0, 0.0], 0.0, 0.5).is_err());
        assert!(ConeGenerator::new(vec![0.0, 0.0], vec![1.0, 0.0], 1.0, 1.0).is_err());
        assert!(matches!(
            ConeGenerator::new(vec![0.0], vec![1.0, 0.0], 1.0, 0.5),
            Err(MetricError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn invalid_witness_is_reported() {
        // λ = 0 means c(λ) = x, and d(y, x) < μ·d(x, y) is impossible
        assert!(matches!(check_bound(&[0.0, 0.0], &[0.0, 0.0], &[0.3, 0.0], 0.5), Err(MetricError::InvalidWitness { .. })));
    }

    #[test]
    fn members_satisfy_bound_and_envelope() {
        let g = ConeGenerator::new(vec![1.0, -2.0, 0.5], vec![0.0, 0.6, 0.8], 0.3, 0.4).unwrap();
        let (bad, _) = par_failures(20_000, 5, 4, |rng, _| {
            let y = g.sample_member(rng);
            let (_, lambda) = g.witness(&y);
            let c = axpy(g.x(), lambda, g.u());
            let ok = check_bound(g.x(), &c, &y, g.sigma()).unwrap() && dist(g.x(), &y) < g.envelope_radius();
            (!ok).then_some(y)
        });
        assert_eq!(bad, 0);
    }

    #[test]
    fn interior_cone_matches_angle() {
        let g = unit_x();
        let mut rng = rng_for(11, 0);
        let mut checked = 0;
        for _ in 0..20_000 {
            let y = point_in_ball(&mut rng, 2, 1.2);
            let t = y[0];
            if t <= 1e-9 || t >= g.eps() - 1e-9 {
                continue;
            }
            let s = angle(&y, g.u()).sin();
            if (s - g.sigma()).abs() < 1e-12 {
                continue;
            }
            checked += 1;
            assert_eq!(v_plus_contains(&g, &y), s < g.sigma(), "{y:?}");
        }
        assert!(checked > 5_000);
    }

    #[test]
    fn generators_are_monotone() {
        let f = directional_filter(vec![0.0, 0.0], vec![0.0, 1.0]).unwrap();
        let (bad, _) = check_monotone(&f, 10_000, 3, 1.0, |rng, e| point_in_ball(rng, 2, 2.0 * e));
        assert_eq!(bad, 0);
    }

    #[test]
    fn point_sequences_separate_directions() {
        let u = vec![1.0, 0.0];
        let v = vec![0.6, 0.8];
        let f = directional_filter(vec![0.0, 0.0], v).unwrap();
        let tail_in = (1000..1100).all(|h| f.contains(0.1, 0.5, &axpy(&[0.0, 0.0], 1.0 / h as f64, &u)));
        assert!(!tail_in);
    }
}
