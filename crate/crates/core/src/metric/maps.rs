//! Built-in smooth maps with analytic Jacobians.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{dist, MetricError};

pub const INVERSE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum MapSpec {
    Identity { dim: usize },
    /// `x ↦ A x`, rows of `A`.
    Linear { matrix: Vec<Vec<f64>> },
    /// `(x + k y², y)`
    QuadShear { k: f64 },
    /// `(x + k sin y, y)`
    SineShear { k: f64 },
    /// `(x + x³, y)`
    Cubic,
    /// `(x, y + x²)`
    QuadLift,
    /// `(sinh x, y + 0.3 cos x)`
    SinhCos,
    /// `(x e^y, y)`
    ExpScale,
    /// `(x + ½ atan y, y + ½ atan x)`
    ArctanMix,
    /// `(x + yz, y, z + x²)`
    Twist3,
    /// `(eˣ, y + sin x, z + xy)`
    ExpSine3,
    /// `(x + 0.1y³, y + 0.1z³, z)`
    Cubic3,
    /// `(x, 0)`: Lipschitz, not injective.
    Collapse,
    /// `then ∘ first`
    Compose { first: Box<MapSpec>, then: Box<MapSpec> },
}

impl MapSpec {
    pub fn name(&self) -> String {
        match self {
            MapSpec::Identity { .. } => "identity".into(),
            MapSpec::Linear { .. } => "linear".into(),
            MapSpec::QuadShear { k } => format!("quad-shear({k})"),
            MapSpec::SineShear { k } => format!("sine-shear({k})"),
            MapSpec::Cubic => "cubic".into(),
            MapSpec::QuadLift => "quad-lift".into(),
            MapSpec::SinhCos => "sinh-cos".into(),
            MapSpec::ExpScale => "exp-scale".into(),
            MapSpec::ArctanMix => "arctan-mix".into(),
            MapSpec::Twist3 => "twist3".into(),
            MapSpec::ExpSine3 => "exp-sine3".into(),
            MapSpec::Cubic3 => "cubic3".into(),
            MapSpec::Collapse => "collapse".into(),
            MapSpec::Compose { first, then } => format!("{}∘{}", then.name(), first.name()),
        }
    }

    pub fn compose(first: MapSpec, then: MapSpec) -> Self {
        MapSpec::Compose { first: Box::new(first), then: Box::new(then) }
    }

    pub fn linear(a: &DMatrix<f64>) -> Self {
        MapSpec::Linear { matrix: a.row_iter().map(|r| r.iter().copied().collect()).collect() }
    }

    /// The ten fixed nonlinear diffeomorphisms used by the derivative checks.
    pub fn nonlinear_battery() -> Vec<MapSpec> {
        vec![
            MapSpec::QuadShear { k: 1.0 },
            MapSpec::SineShear { k: 0.5 },
            MapSpec::Cubic,
            MapSpec::QuadLift,
            MapSpec::SinhCos,
            MapSpec::ExpScale,
            MapSpec::ArctanMix,
            MapSpec::Twist3,
            MapSpec::ExpSine3,
            MapSpec::Cubic3,
        ]
    }

    pub fn dim(&self) -> usize {
        match self {
            MapSpec::Identity { dim } => *dim,
            MapSpec::Linear { matrix } => matrix.len(),
            MapSpec::Twist3 | MapSpec::ExpSine3 | MapSpec::Cubic3 => 3,
            MapSpec::Compose { first, .. } => first.dim(),
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        if let MapSpec::Linear { matrix } = self {
            let n = matrix.len();
            if n == 0 || matrix.iter().any(|r| r.len() != n) {
                return Err(MetricError::InvalidParameter("linear map needs a square matrix".into()));
            }
        }
        if let MapSpec::Compose { first, then } = self {
            first.validate()?;
            then.validate()?;
            if first.dim() != then.dim() {
                return Err(MetricError::DimensionMismatch { got: then.dim(), expected: first.dim() });
            }
        }
        Ok(())
    }

    pub fn matrix(&self) -> Option<DMatrix<f64>> {
        match self {
            MapSpec::Linear { matrix } => {
                let n = matrix.len();
                Some(DMatrix::from_fn(n, n, |i, j| matrix[i][j]))
            }
            MapSpec::Identity { dim } => Some(DMatrix::identity(*dim, *dim)),
            _ => None,
        }
    }

    pub fn eval(&self, p: &[f64]) -> Vec<f64> {
        match self {
            MapSpec::Identity { .. } => p.to_vec(),
            MapSpec::Linear { matrix } => matrix.iter().map(|r| r.iter().zip(p).map(|(a, b)| a * b).sum()).collect(),
            MapSpec::QuadShear { k } => vec![p[0] + k * p[1] * p[1], p[1]],
            MapSpec::SineShear { k } => vec![p[0] + k * p[1].sin(), p[1]],
            MapSpec::Cubic => vec![p[0] + p[0].powi(3), p[1]],
            MapSpec::QuadLift => vec![p[0], p[1] + p[0] * p[0]],
            MapSpec::SinhCos => vec![p[0].sinh(), p[1] + 0.3 * p[0].cos()],
            MapSpec::ExpScale => vec![p[0] * p[1].exp(), p[1]],
            MapSpec::ArctanMix => vec![p[0] + 0.5 * p[1].atan(), p[1] + 0.5 * p[0].atan()],
            MapSpec::Twist3 => vec![p[0] + p[1] * p[2], p[1], p[2] + p[0] * p[0]],
            MapSpec::ExpSine3 => vec![p[0].exp(), p[1] + p[0].sin(), p[2] + p[0] * p[1]],
            MapSpec::Cubic3 => vec![p[0] + 0.1 * p[1].powi(3), p[1] + 0.1 * p[2].powi(3), p[2]],
            MapSpec::Collapse => vec![p[0], 0.0],
            MapSpec::Compose { first, then } => then.eval(&first.eval(p)),
        }
    }

    pub fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        let m = |n: usize, rows: &[f64]| DMatrix::from_row_slice(n, n, rows);
        match self {
            MapSpec::Identity { .. } | MapSpec::Linear { .. } => self.matrix().expect("linear"),
            MapSpec::QuadShear { k } => m(2, &[1.0, 2.0 * k * p[1], 0.0, 1.0]),
            MapSpec::SineShear { k } => m(2, &[1.0, k * p[1].cos(), 0.0, 1.0]),
            MapSpec::Cubic => m(2, &[1.0 + 3.0 * p[0] * p[0], 0.0, 0.0, 1.0]),
            MapSpec::QuadLift => m(2, &[1.0, 0.0, 2.0 * p[0], 1.0]),
            MapSpec::SinhCos => m(2, &[p[0].cosh(), 0.0, -0.3 * p[0].sin(), 1.0]),
            MapSpec::ExpScale => m(2, &[p[1].exp(), p[0] * p[1].exp(), 0.0, 1.0]),
            MapSpec::ArctanMix => m(2, &[1.0, 0.5 / (1.0 + p[1] * p[1]), 0.5 / (1.0 + p[0] * p[0]), 1.0]),
            MapSpec::Twist3 => m(3, &[1.0, p[2], p[1], 0.0, 1.0, 0.0, 2.0 * p[0], 0.0, 1.0]),
            MapSpec::ExpSine3 => m(3, &[p[0].exp(), 0.0, 0.0, p[0].cos(), 1.0, 0.0, p[1], p[0], 1.0]),
            MapSpec::Cubic3 => m(3, &[1.0, 0.3 * p[1] * p[1], 0.0, 0.0, 1.0, 0.3 * p[2] * p[2], 0.0, 0.0, 1.0]),
            MapSpec::Collapse => m(2, &[1.0, 0.0, 0.0, 0.0]),
            MapSpec::Compose { first, then } => then.jacobian(&first.eval(p)) * first.jacobian(p),
        }
    }

    pub fn is_injective(&self) -> bool {
        match self {
            MapSpec::Collapse => false,
            MapSpec::Compose { first, then } => first.is_injective() && then.is_injective(),
            MapSpec::Linear { .. } => self.matrix().expect("linear").determinant().abs() > 1e-12,
            _ => true,
        }
    }

    /// Newton iteration from `y`, checked by the residual `‖f(x) − y‖`.
    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>, MetricError> {
        if !self.is_injective() {
            return Err(MetricError::InvalidParameter(format!("{} has no inverse", self.name())));
        }
        if let MapSpec::Compose { first, then } = self {
            return first.inverse(&then.inverse(y)?);
        }
        let mut x = self.closed_form_inverse(y).unwrap_or_else(|| y.to_vec());
        for _ in 0..100 {
            let r = DVector::from_vec(self.eval(&x)) - DVector::from_column_slice(y);
            if r.norm() <= INVERSE_TOL * 1e-3 {
                break;
            }
            let Some(step) = self.jacobian(&x).lu().solve(&r) else { break };
            x = x.iter().zip(step.iter()).map(|(a, b)| a - b).collect();
        }
        let residual = dist(&self.eval(&x), y);
        if !(residual <= INVERSE_TOL) {
            return Err(MetricError::InverseResidualTooLarge { residual });
        }
        Ok(x)
    }

    fn closed_form_inverse(&self, y: &[f64]) -> Option<Vec<f64>> {
        match self {
            MapSpec::Identity { .. } => Some(y.to_vec()),
            MapSpec::Linear { .. } => {
                let a = self.matrix()?;
                a.lu().solve(&DVector::from_column_slice(y)).map(|v| v.iter().copied().collect())
            }
            MapSpec::QuadShear { k } => Some(vec![y[0] - k * y[1] * y[1], y[1]]),
            MapSpec::SineShear { k } => Some(vec![y[0] - k * y[1].sin(), y[1]]),
            MapSpec::QuadLift => Some(vec![y[0], y[1] - y[0] * y[0]]),
            MapSpec::ExpScale => Some(vec![y[0] * (-y[1]).exp(), y[1]]),
            _ => None,
        }
    }

    /// Sampled bounds on `‖f(p) − f(q)‖ / ‖p − q‖` over a box.
    pub fn lipschitz_bounds(&self, center: &[f64], half_width: f64, grid: usize) -> (f64, f64) {
        let d = center.len();
        let pts: Vec<Vec<f64>> = (0..grid.pow(d as u32))
            .map(|mut k| {
                (0..d)
                    .map(|i| {
                        let j = k % grid;
                        k /= grid;
                        center[i] - half_width + 2.0 * half_width * j as f64 / (grid - 1) as f64
                    })
                    .collect()
            })
            .collect();
        let img: Vec<Vec<f64>> = pts.iter().map(|p| self.eval(p)).collect();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let q = dist(&img[i], &img[j]) / dist(&pts[i], &pts[j]);
                lo = lo.min(q);
                hi = hi.max(q);
            }
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{point_in_box, rng_for};

    #[test]
    fn jacobians_match_finite_differences() {
        let mut rng = rng_for(1, 0);
        let mut maps = MapSpec::nonlinear_battery();
        maps.push(MapSpec::Linear { matrix: vec![vec![2.0, 1.0], vec![-1.0, 0.5]] });
        maps.push(MapSpec::Collapse);
        maps.push(MapSpec::compose(MapSpec::QuadShear { k: 1.0 }, MapSpec::ArctanMix));
        for f in maps {
            for _ in 0..20 {
                let p = point_in_box(&mut rng, f.dim(), 1.0);
                let j = f.jacobian(&p);
                for k in 0..f.dim() {
                    let h = 1e-6;
                    let mut a = p.clone();
                    let mut b = p.clone();
                    a[k] += h;
                    b[k] -= h;
                    let (fa, fb) = (f.eval(&a), f.eval(&b));
                    for i in 0..f.dim() {
                        let fd = (fa[i] - fb[i]) / (2.0 * h);
                        assert!((fd - j[(i, k)]).abs() < 1e-6, "{} at {p:?}", f.name());
                    }
                }
            }
        }
    }

    #[test]
    fn inverses_round_trip() {
        let mut rng = rng_for(2, 0);
        for f in MapSpec::nonlinear_battery() {
            for _ in 0..20 {
                let p = point_in_box(&mut rng, f.dim(), 0.5);
                let q = f.inverse(&f.eval(&p)).unwrap();
                assert!(dist(&p, &q) < 1e-8, "{}", f.name());
            }
        }
        assert!(MapSpec::Collapse.inverse(&[0.0, 0.0]).is_err());
        let g = MapSpec::compose(MapSpec::SineShear { k: 0.5 }, MapSpec::Cubic);
        let p = [0.3, -0.4];
        assert!(dist(&g.inverse(&g.eval(&p)).unwrap(), &p) < 1e-8);
    }

    #[test]
    fn collapse_is_not_bi_lipschitz() {
        let (lo, hi) = MapSpec::Collapse.lipschitz_bounds(&[0.0, 0.0], 1.0, 6);
        assert_eq!(lo, 0.0);
        assert!((hi - 1.0).abs() < 1e-12);
    }
}
