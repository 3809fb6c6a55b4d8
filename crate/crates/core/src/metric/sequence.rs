//! Deciding whether a finite prefix of a sequence converges to `μ_{x,u}`.

use serde::{Deserialize, Serialize};

use super::{angle, check_dims, check_unit, dist, normalize, sub, DirectionalFilter, GeneratedFilter, MetricError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub point_tol: f64,
    pub angle_tol: f64,
    /// Fraction of the prefix treated as "eventually".
    pub tail_fraction: f64,
    pub eps_grid: Vec<f64>,
    pub sigma_grid: Vec<f64>,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            point_tol: 1e-2,
            angle_tol: 1e-3,
            tail_fraction: 0.1,
            eps_grid: vec![1.0, 0.5, 0.1, 0.05, 0.01],
            sigma_grid: vec![0.5, 0.1, 0.05, 0.01, 0.005, 0.001],
        }
    }
}

impl ClassifyConfig {
    pub fn tail_start(&self, len: usize) -> usize {
        let tail = ((len as f64 * self.tail_fraction).ceil() as usize).clamp(1, len.max(1));
        len - tail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceVerdict {
    pub converges_to_point: bool,
    pub direction_limit: Option<Vec<f64>>,
    /// Direct test: the point and the normalised increments both converge.
    pub matches_filter: bool,
    /// Generator test: every grid generator contains the tail.
    pub generator_match: bool,
    /// Tail indices outside the first generator that fails.
    pub witnesses: Vec<usize>,
    /// The two tests disagree, which would be an engine bug.
    pub disagreement: bool,
}

/// Direct and generator tests on `seq`, cross-checked.
pub fn classify_sequence(seq: &[Vec<f64>], x: &[f64], u: &[f64], cfg: &ClassifyConfig) -> Result<SequenceVerdict, MetricError> {
    check_dims(x, u)?;
    check_unit(u)?;
    if seq.is_empty() {
        return Err(MetricError::InvalidParameter("empty sequence".into()));
    }
    let dirs = directions(seq, x)?;
    let start = cfg.tail_start(seq.len());
    let converges_to_point = seq[start..].iter().all(|p| dist(p, x) < cfg.point_tol);
    let direction_limit = direction_limit(&dirs[start..], cfg.angle_tol);
    let matches_filter = converges_to_point && direction_limit.as_ref().is_some_and(|d| angle(d, u) < cfg.angle_tol);

    let filter = DirectionalFilter { x: x.to_vec(), u: u.to_vec() };
    let (generator_match, witnesses) = tail_in_generators(seq, &filter, cfg);
    Ok(SequenceVerdict {
        converges_to_point,
        direction_limit,
        matches_filter,
        generator_match,
        witnesses,
        disagreement: matches_filter != generator_match,
    })
}

/// `(x_h − x)/‖x_h − x‖`, failing on a term equal to `x`.
pub fn directions(seq: &[Vec<f64>], x: &[f64]) -> Result<Vec<Vec<f64>>, MetricError> {
    seq.iter()
        .enumerate()
        .map(|(index, p)| {
            check_dims(x, p)?;
            normalize(&sub(p, x)).ok_or(MetricError::DegenerateTerm { index })
        })
        .collect()
}

/// The last direction, if every tail direction is within `tol` of it.
pub fn direction_limit(tail: &[Vec<f64>], tol: f64) -> Option<Vec<f64>> {
    let last = tail.last()?;
    tail.iter().all(|d| angle(d, last) < tol).then(|| last.clone())
}

/// Whether the tail lies in `G(ε, σ)` for every grid cell; on failure, the
/// offending tail indices of the first failing cell.
pub fn tail_in_generators<G: GeneratedFilter + ?Sized>(seq: &[Vec<f64>], g: &G, cfg: &ClassifyConfig) -> (bool, Vec<usize>) {
    let start = cfg.tail_start(seq.len());
    for &eps in &cfg.eps_grid {
        for &sigma in &cfg.sigma_grid {
            let bad: Vec<usize> = (start..seq.len()).filter(|&h| !g.contains(eps, sigma, &seq[h])).collect();
            if !bad.is_empty() {
                return (false, bad);
            }
        }
    }
    (true, Vec::new())
}
