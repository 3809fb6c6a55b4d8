//! Distance from a point to a parametrized arc `c([t0, t1])`.

use super::Metric;

pub const ARC_TOL: f64 = 1e-9;
pub const ARC_START: usize = 64;
pub const ARC_CAP: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcDistance {
    pub distance: f64,
    /// Parameter of the closest point found.
    pub lambda: f64,
    /// Grid size at which the estimate stabilised.
    pub samples: usize,
    /// False when the subdivision cap was hit first.
    pub converged: bool,
}

/// Grid search with golden-section refinement, doubling the grid until two
/// successive estimates agree within [`ARC_TOL`].
pub fn arc_distance<M, C>(metric: &M, curve: C, t0: f64, t1: f64, y: &[f64]) -> ArcDistance
where
    M: Metric + ?Sized,
    C: Fn(f64) -> Vec<f64>,
{
    let d = |t: f64| metric.distance(&curve(t), y);
    let mut prev: Option<(f64, f64)> = None;
    let mut n = ARC_START;
    loop {
        let best = refine_on_grid(&d, t0, t1, n);
        if let Some((pd, _)) = prev {
            if (pd - best.0).abs() <= ARC_TOL {
                let (distance, lambda) = if best.0 <= pd { best } else { prev.unwrap() };
                return ArcDistance { distance, lambda, samples: n, converged: true };
            }
        }
        if n >= ARC_CAP {
            return ArcDistance { distance: best.0, lambda: best.1, samples: n, converged: false };
        }
        prev = Some(best);
        n *= 2;
    }
}

fn refine_on_grid(d: &impl Fn(f64) -> f64, t0: f64, t1: f64, n: usize) -> (f64, f64) {
    let h = (t1 - t0) / n as f64;
    let (mut bi, mut bd) = (0, f64::INFINITY);
    for i in 0..=n {
        let v = d(t0 + h * i as f64);
        if v < bd {
            bd = v;
            bi = i;
        }
    }
    let lo = t0 + h * bi.saturating_sub(1) as f64;
    let hi = (t0 + h * (bi + 1) as f64).min(t1);
    let (t, v) = golden(d, lo, hi);
    if v < bd {
        (v, t)
    } else {
        (bd, t0 + h * bi as f64)
    }
}

fn golden(d: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut e = a + r * (b - a);
    let (mut fc, mut fe) = (d(c), d(e));
    for _ in 0..80 {
        if (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - r * (b - a);
            fc = d(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + r * (b - a);
            fe = d(e);
        }
    }
    if fc < fe {
        (c, fc)
    } else {
        (e, fe)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Euclidean;

    #[test]
    fn segment_matches_projection() {
        let seg = |t: f64| vec![t, 0.0];
        let r = arc_distance(&Euclidean, seg, 0.0, 1.0, &[0.3, 0.4]);
        assert!(r.converged);
        assert!((r.distance - 0.4).abs() < 1e-9);
        assert!((r.lambda - 0.3).abs() < 1e-6);
        let r = arc_distance(&Euclidean, seg, 0.0, 1.0, &[-3.0, 4.0]);
        assert!((r.distance - 5.0).abs() < 1e-12);
        assert_eq!(r.lambda, 0.0);
    }

    #[test]
    fn circle_distance() {
        let circle = |t: f64| vec![t.cos(), t.sin()];
        let r = arc_distance(&Euclidean, circle, 0.0, 1.5, &[2.0 * 0.7f64.cos(), 2.0 * 0.7f64.sin()]);
        assert!((r.distance - 1.0).abs() < 1e-9);
        assert!((r.lambda - 0.7).abs() < 1e-4);
    }
}
