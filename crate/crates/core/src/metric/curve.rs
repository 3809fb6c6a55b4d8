//! Curves through a point and the filters `∂±c(x)` of tubes around their arcs.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::arc::arc_distance;
use super::cone::check_params;
use super::maps::MapSpec;
use super::{axpy, check_unit, dist, Euclidean, FilterKind, GeneratedFilter, MetricError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

type Eval = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// A curve `c: [a, b] → ℝⁿ` with `a < 0 < b`; `c(0)` is the base point.
#[derive(Clone)]
pub struct Curve {
    name: String,
    a: f64,
    b: f64,
    eval: Eval,
}

impl fmt::Debug for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Curve({} on [{}, {}])", self.name, self.a, self.b)
    }
}

impl Curve {
    pub fn new(name: impl Into<String>, a: f64, b: f64, eval: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Result<Self, MetricError> {
        if !(a < 0.0 && 0.0 < b) {
            return Err(MetricError::InvalidParameter(format!("curve domain [{a}, {b}] must contain 0 inside")));
        }
        Ok(Self { name: name.into(), a, b, eval: Arc::new(eval) })
    }

    /// `t ↦ x + t·u`
    pub fn line(x: Vec<f64>, u: Vec<f64>, a: f64, b: f64) -> Result<Self, MetricError> {
        check_unit(&u)?;
        Self::new("line", a, b, move |t| axpy(&x, t, &u))
    }

    /// Circle of radius `r` through `center + (r, 0)` at `t = 0`, unit speed.
    pub fn circle(center: [f64; 2], r: f64, a: f64, b: f64) -> Result<Self, MetricError> {
        if r <= 0.0 {
            return Err(MetricError::InvalidParameter("radius must be positive".into()));
        }
        Self::new("circle", a, b, move |t| vec![center[0] + r * (t / r).cos(), center[1] + r * (t / r).sin()])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        (self.eval)(t)
    }

    pub fn base_point(&self) -> Vec<f64> {
        self.at(0.0)
    }

    /// `c̄(t) = c(−t)`
    pub fn reversed(&self) -> Self {
        let e = self.eval.clone();
        Self { name: format!("reversed({})", self.name), a: -self.b, b: -self.a, eval: Arc::new(move |t| e(-t)) }
    }

    /// `t ↦ c(g(t))` for an increasing `g` with `g(0) = 0` mapping `[a', b']` into the domain.
    pub fn reparametrized(
        &self,
        label: &str,
        a: f64,
        b: f64,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self, MetricError> {
        let e = self.eval.clone();
        let (lo, hi) = (self.a, self.b);
        if g(a) < lo || g(b) > hi {
            return Err(MetricError::InvalidParameter("reparametrization leaves the domain".into()));
        }
        Self::new(format!("{}∘{label}", self.name), a, b, move |t| e(g(t)))
    }

    /// `f ∘ c`
    pub fn mapped(&self, f: &MapSpec) -> Self {
        let e = self.eval.clone();
        let f = f.clone();
        Self { name: format!("{}∘{}", f.name(), self.name), a: self.a, b: self.b, eval: Arc::new(move |t| f.eval(&e(t))) }
    }

    /// Sampled difference quotients `d(c(s), c(t))/|s − t|` on a grid.
    pub fn lipschitz_bounds(&self, grid: usize) -> (f64, f64) {
        let h = (self.b - self.a) / grid as f64;
        let pts: Vec<Vec<f64>> = (0..=grid).map(|i| self.at(self.a + h * i as f64)).collect();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..=grid {
            for j in (i + 1)..=grid {
                let q = dist(&pts[i], &pts[j]) / (h * (j - i) as f64);
                lo = lo.min(q);
                hi = hi.max(q);
            }
        }
        (lo, hi)
    }
}

pub const BILIP_LOWER: f64 = 1e-2;
pub const BILIP_UPPER: f64 = 1e2;

/// `∂⁺c(x)` or `∂⁻c(x)`: tubes `{y : d(y, c(I_ε)) < μ·d(x, y)}` with
/// `I_ε = [0, ε]` or `[−ε, 0]`.
#[derive(Debug, Clone)]
pub struct CurveFilter {
    curve: Curve,
    sign: Sign,
    x: Vec<f64>,
}

pub fn curve_filter(curve: Curve, sign: Sign) -> Result<CurveFilter, MetricError> {
    let (lower, upper) = curve.lipschitz_bounds(200);
    if !(lower >= BILIP_LOWER && upper <= BILIP_UPPER) {
        return Err(MetricError::CurveNotBiLipschitz { lower, upper });
    }
    let x = curve.base_point();
    Ok(CurveFilter { curve, sign, x })
}

impl CurveFilter {
    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn base_point(&self) -> &[f64] {
        &self.x
    }

    fn interval(&self, eps: f64) -> (f64, f64) {
        match self.sign {
            Sign::Plus => (0.0, eps.min(self.curve.b)),
            Sign::Minus => ((-eps).max(self.curve.a), 0.0),
        }
    }

    /// `(d(y, arc), λ)`, or `None` when the arc estimate did not converge.
    pub fn witness(&self, eps: f64, y: &[f64]) -> Option<(f64, f64)> {
        let (t0, t1) = self.interval(eps);
        let r = arc_distance(&Euclidean, |t| self.curve.at(t), t0, t1, y);
        r.converged.then_some((r.distance, r.lambda))
    }

    pub fn generator_contains(&self, eps: f64, mu: f64, y: &[f64]) -> Result<bool, MetricError> {
        check_params(eps, mu)?;
        Ok(self.contains(eps, mu, y))
    }
}

impl GeneratedFilter for CurveFilter {
    fn kind(&self) -> FilterKind {
        FilterKind::Curve
    }

    fn contains(&self, eps: f64, mu: f64, y: &[f64]) -> bool {
        let r = dist(&self.x, y);
        r > 0.0 && self.witness(eps, y).is_some_and(|(d, _)| d < mu * r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::cone::{check_bound, directional_filter};
    use crate::metric::check_monotone;
    use crate::sampling::{par_failures, point_in_ball, uniform};

    #[test]
    fn line_matches_cone() {
        let x = vec![0.5, -0.25];
        let u = vec![0.6, -0.8];
        let c = curve_filter(Curve::line(x.clone(), u.clone(), -1.0, 1.0).unwrap(), Sign::Plus).unwrap();
        let d = directional_filter(x.clone(), u).unwrap();
        let (bad, _) = par_failures(10_000, 1, 4, |rng, _| {
            let eps = uniform(rng, 0.01, 0.9);
            let mu = uniform(rng, 0.05, 0.95);
            let y = axpy(&x, 1.0, &point_in_ball(rng, 2, 1.5 * eps));
            (c.contains(eps, mu, &y) != d.contains(eps, mu, &y)).then_some(y)
        });
        assert_eq!(bad, 0);
    }

    #[test]
    fn reversal_swaps_sides() {
        let c = Curve::circle([0.0, -1.0], 1.0, -1.0, 1.0).unwrap();
        let plus_rev = curve_filter(c.reversed(), Sign::Plus).unwrap();
        let minus = curve_filter(c, Sign::Minus).unwrap();
        let x = minus.base_point().to_vec();
        let (bad, _) = par_failures(5_000, 2, 4, |rng, _| {
            let eps = uniform(rng, 0.01, 0.9);
            let mu = uniform(rng, 0.05, 0.95);
            let y = axpy(&x, 1.0, &point_in_ball(rng, 2, 1.5 * eps));
            (plus_rev.contains(eps, mu, &y) != minus.contains(eps, mu, &y)).then_some(y)
        });
        assert_eq!(bad, 0);
    }

    #[test]
    fn reparametrization_keeps_generators() {
        // c'(t) = c(t³ + t): V⁺(c', ε) = V⁺(c, ε³ + ε)
        let c = Curve::circle([0.0, 1.0], 1.0, -2.0, 2.0).unwrap();
        let c2 = c.reparametrized("t³+t", -1.0, 1.0, |t| t * t * t + t).unwrap();
        let (f, f2) = (curve_filter(c, Sign::Plus).unwrap(), curve_filter(c2, Sign::Plus).unwrap());
        let x = f.base_point().to_vec();
        let (bad, _) = par_failures(5_000, 3, 4, |rng, _| {
            let eps = uniform(rng, 0.01, 0.8);
            let mu = uniform(rng, 0.05, 0.95);
            let y = axpy(&x, 1.0, &point_in_ball(rng, 2, 2.0 * eps));
            (f2.contains(eps, mu, &y) != f.contains(eps * eps * eps + eps, mu, &y)).then_some(y)
        });
        assert_eq!(bad, 0);
    }

    #[test]
    fn quarter_circle_bound() {
        let c = curve_filter(Curve::circle([0.0, 0.0], 1.0, -0.5, std::f64::consts::FRAC_PI_2).unwrap(), Sign::Plus).unwrap();
        let x = c.base_point().to_vec();
        let (bad, _) = par_failures(10_000, 4, 4, |rng, _| {
            let lambda = uniform(rng, 0.0, std::f64::consts::FRAC_PI_2);
            let mu = uniform(rng, 0.05, 0.95);
            let p = c.curve().at(lambda);
            let y = axpy(&p, 1.0, &point_in_ball(rng, 2, 0.5 * mu * lambda / (1.0 + mu)));
            if dist(&x, &y) == 0.0 {
                return None;
            }
            let (_, l) = c.witness(std::f64::consts::FRAC_PI_2, &y)?;
            let ok = check_bound(&x, &c.curve().at(l), &y, mu).unwrap_or(false);
            (!ok).then_some(y)
        });
        assert_eq!(bad, 0);
    }

    #[test]
    fn collapsed_curve_is_rejected() {
        let flat = Curve::new("flat", -1.0, 1.0, |t| vec![t * t * t, 0.0]).unwrap();
        assert!(matches!(curve_filter(flat, Sign::Plus), Err(MetricError::CurveNotBiLipschitz { .. })));
    }

    #[test]
    fn curve_generators_are_monotone() {
        let c = curve_filter(Curve::circle([0.0, 1.0], 1.0, -1.0, 1.0).unwrap(), Sign::Plus).unwrap();
        let x = c.base_point().to_vec();
        let (bad, _) = check_monotone(&c, 2_000, 8, 0.9, |rng, e| axpy(&x, 1.0, &point_in_ball(rng, 2, 2.0 * e)));
        assert_eq!(bad, 0);
    }
}
