//! One-parameter local flows `F: [a, b] × ℝⁿ → ℝⁿ`, the pair filters `∂±F`
//! generated by tubes around orbit arcs, and sampled checks of the
//! constructions built on them.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::arc::{arc_distance, ArcDistance};
use crate::metric::curve::{BILIP_LOWER, BILIP_UPPER};
use crate::metric::{axpy, dist, dot, norm, split_pair, Euclidean, FilterKind, GeneratedFilter, MapSpec, MetricError, Sign};
use crate::pair::Commutation;
use crate::sampling::{derive_seed, par_sample, uniform, unit_vector, SampleRng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("time {t} outside the flow domain [{a}, {b}]")]
    DomainViolation { t: f64, a: f64, b: f64 },
    #[error("invalid flow domain [{a}, {b}]: need a < 0 < b")]
    InvalidDomain { a: f64, b: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {got} vs {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("recipe unsatisfiable: {0}")]
    RecipeUnsatisfiable(String),
    #[error("map is not bi-Lipschitz on the region: quotients in [{lower:e}, {upper:e}]")]
    NotBiLipschitz { lower: f64, upper: f64 },
    #[error("sampling budget exhausted: none of {0} samples could be decided")]
    BudgetExhausted(usize),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

fn one() -> f64 {
    1.0
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum FlowSpec {
    /// `x + t u`
    Translation { u: Vec<f64> },
    /// `R(ωt) x` in the plane.
    Rotation {
        #[serde(default = "one")]
        omega: f64,
    },
    /// `e^{rt} x`
    Scaling {
        rate: f64,
        #[serde(default = "two")]
        dim: usize,
    },
    /// `exp(tA) x`, rows of `A`.
    Linear { generator: Vec<Vec<f64>> },
    /// `f(G(t, f⁻¹(x)))`
    Conjugated { map: MapSpec, flow: Box<FlowSpec> },
    /// `G(−t, x)`
    Reversed { flow: Box<FlowSpec> },
}

type Orbit = Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

impl FlowSpec {
    pub fn dim(&self) -> usize {
        match self {
            FlowSpec::Translation { u } => u.len(),
            FlowSpec::Rotation { .. } => 2,
            FlowSpec::Scaling { dim, .. } => *dim,
            FlowSpec::Linear { generator } => generator.len(),
            FlowSpec::Conjugated { map, .. } => map.dim(),
            FlowSpec::Reversed { flow } => flow.dim(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            FlowSpec::Translation { u } => format!("translation{u:?}"),
            FlowSpec::Rotation { omega } => format!("rotation({omega})"),
            FlowSpec::Scaling { rate, .. } => format!("scaling({rate})"),
            FlowSpec::Linear { .. } => "linear".into(),
            FlowSpec::Conjugated { map, flow } => format!("{}*{}", map.name(), flow.name()),
            FlowSpec::Reversed { flow } => format!("reversed({})", flow.name()),
        }
    }

    fn validate(&self) -> Result<(), FlowError> {
        let finite = |v: &[f64]| v.iter().all(|a| a.is_finite());
        match self {
            FlowSpec::Translation { u } if u.is_empty() || !finite(u) => {
                Err(FlowError::InvalidParameter("translation needs a finite nonempty vector".into()))
            }
            FlowSpec::Rotation { omega } if !omega.is_finite() => Err(FlowError::InvalidParameter("rotation speed must be finite".into())),
            FlowSpec::Scaling { rate, dim } if !rate.is_finite() || *dim == 0 => {
                Err(FlowError::InvalidParameter("scaling needs a finite rate and positive dimension".into()))
            }
            FlowSpec::Linear { generator } => {
                let n = generator.len();
                if n == 0 || generator.iter().any(|r| r.len() != n || !finite(r)) {
                    return Err(FlowError::InvalidParameter("linear flow needs a finite square generator".into()));
                }
                Ok(())
            }
            FlowSpec::Conjugated { map, flow } => {
                map.validate()?;
                flow.validate()?;
                if map.dim() != flow.dim() {
                    return Err(FlowError::DimensionMismatch { got: flow.dim(), expected: map.dim() });
                }
                if !map.is_injective() {
                    return Err(FlowError::NotBiLipschitz { lower: 0.0, upper: f64::INFINITY });
                }
                Ok(())
            }
            FlowSpec::Reversed { flow } => flow.validate(),
            _ => Ok(()),
        }
    }

    fn orbit(&self, x: &[f64]) -> Result<Orbit, FlowError> {
        let x = x.to_vec();
        Ok(match self {
            FlowSpec::Translation { u } => {
                let u = u.clone();
                Box::new(move |t| axpy(&x, t, &u))
            }
            FlowSpec::Rotation { omega } => {
                let w = *omega;
                Box::new(move |t| rotate(&x, w * t))
            }
            FlowSpec::Scaling { rate, .. } => {
                let r = *rate;
                Box::new(move |t| x.iter().map(|a| a * (r * t).exp()).collect())
            }
            FlowSpec::Linear { generator } => {
                let n = generator.len();
                let a = DMatrix::from_fn(n, n, |i, j| generator[i][j]);
                let v = DVector::from_vec(x);
                Box::new(move |t| ((&a * t).exp() * &v).iter().copied().collect())
            }
            FlowSpec::Conjugated { map, flow } => {
                let inner = flow.orbit(&map.inverse(&x)?)?;
                let map = map.clone();
                Box::new(move |t| map.eval(&inner(t)))
            }
            FlowSpec::Reversed { flow } => {
                let inner = flow.orbit(&x)?;
                Box::new(move |t| inner(-t))
            }
        })
    }

    /// Distance from `y` to the orbit arc `{G(t, x) : t ∈ [t0, t1]}`; closed
    /// form where the arc is a segment or a circular arc.
    fn orbit_distance(&self, x: &[f64], t0: f64, t1: f64, y: &[f64]) -> Result<ArcDistance, FlowError> {
        let exact = |distance: f64, lambda: f64| Ok(ArcDistance { distance, lambda, samples: 0, converged: true });
        match self {
            FlowSpec::Translation { u } => {
                let uu = dot(u, u);
                let s = if uu > 0.0 { (dot(y, u) - dot(x, u)) / uu } else { t0 };
                let s = s.clamp(t0, t1);
                exact(dist(y, &axpy(x, s, u)), s)
            }
            FlowSpec::Rotation { omega } => {
                let r = norm(x);
                if r == 0.0 || *omega == 0.0 {
                    return exact(dist(x, y), t0);
                }
                let (lo, hi) = if *omega > 0.0 { (omega * t0, omega * t1) } else { (omega * t1, omega * t0) };
                let alpha = y[1].atan2(y[0]) - x[1].atan2(x[0]);
                let cand = alpha + ((lo - alpha) / TAU).ceil() * TAU;
                let theta = if norm(y) > 0.0 && cand <= hi {
                    cand
                } else if dist(&rotate(x, lo), y) <= dist(&rotate(x, hi), y) {
                    lo
                } else {
                    hi
                };
                exact(dist(&rotate(x, theta), y), theta / omega)
            }
            FlowSpec::Scaling { rate, .. } => {
                let xx = dot(x, x);
                if xx == 0.0 || *rate == 0.0 {
                    return exact(dist(x, y), t0);
                }
                let (e0, e1) = ((rate * t0).exp(), (rate * t1).exp());
                let s = (dot(x, y) / xx).clamp(e0.min(e1), e0.max(e1));
                let p: Vec<f64> = x.iter().map(|a| a * s).collect();
                exact(dist(&p, y), (s.ln() / rate).clamp(t0, t1))
            }
            FlowSpec::Reversed { flow } => {
                let a = flow.orbit_distance(x, -t1, -t0, y)?;
                Ok(ArcDistance { lambda: -a.lambda, ..a })
            }
            FlowSpec::Linear { .. } | FlowSpec::Conjugated { .. } => {
                let orbit = self.orbit(x)?;
                Ok(arc_distance(&Euclidean, orbit, t0, t1, y))
            }
        }
    }
}

fn rotate(x: &[f64], theta: f64) -> Vec<f64> {
    let (s, c) = theta.sin_cos();
    vec![c * x[0] - s * x[1], s * x[0] + c * x[1]]
}

/// A flow description together with its time domain `[a, b]`, `a < 0 < b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FlowRecord", into = "FlowRecord")]
pub struct Flow {
    spec: FlowSpec,
    a: f64,
    b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowRecord {
    pub flow: FlowSpec,
    #[serde(default = "unit_domain")]
    pub domain: [f64; 2],
}

fn unit_domain() -> [f64; 2] {
    [-1.0, 1.0]
}

impl TryFrom<FlowRecord> for Flow {
    type Error = FlowError;

    fn try_from(r: FlowRecord) -> Result<Self, FlowError> {
        Flow::new(r.flow, r.domain[0], r.domain[1])
    }
}

impl From<Flow> for FlowRecord {
    fn from(f: Flow) -> Self {
        FlowRecord { flow: f.spec, domain: [f.a, f.b] }
    }
}

impl Flow {
    pub fn new(spec: FlowSpec, a: f64, b: f64) -> Result<Self, FlowError> {
        if !(a < 0.0 && 0.0 < b && a.is_finite() && b.is_finite()) {
            return Err(FlowError::InvalidDomain { a, b });
        }
        spec.validate()?;
        Ok(Self { spec, a, b })
    }

    pub fn translation(u: Vec<f64>) -> Result<Self, FlowError> {
        Self::new(FlowSpec::Translation { u }, -1.0, 1.0)
    }

    pub fn rotation(omega: f64) -> Result<Self, FlowError> {
        Self::new(FlowSpec::Rotation { omega }, -1.0, 1.0)
    }

    pub fn scaling(rate: f64, dim: usize) -> Result<Self, FlowError> {
        Self::new(FlowSpec::Scaling { rate, dim }, -1.0, 1.0)
    }

    pub fn linear(generator: &DMatrix<f64>) -> Result<Self, FlowError> {
        let rows = generator.row_iter().map(|r| r.iter().copied().collect()).collect();
        Self::new(FlowSpec::Linear { generator: rows }, -1.0, 1.0)
    }

    pub fn spec(&self) -> &FlowSpec {
        &self.spec
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn name(&self) -> String {
        self.spec.name()
    }

    /// `F̄(t, x) = F(−t, x)` on `[−b, −a]`.
    pub fn reversed(&self) -> Flow {
        Flow { spec: FlowSpec::Reversed { flow: Box::new(self.spec.clone()) }, a: -self.b, b: -self.a }
    }

    fn check_time(&self, t: f64) -> Result<(), FlowError> {
        if t < self.a || t > self.b || t.is_nan() {
            return Err(FlowError::DomainViolation { t, a: self.a, b: self.b });
        }
        Ok(())
    }

    fn check_point(&self, x: &[f64]) -> Result<(), FlowError> {
        if x.len() != self.dim() {
            return Err(FlowError::DimensionMismatch { got: x.len(), expected: self.dim() });
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, FlowError> {
        self.check_time(t)?;
        self.check_point(x)?;
        Ok(self.spec.orbit(x)?(t))
    }

    /// `t ↦ F(t, x)`, with any inverse needed computed once.
    pub fn orbit(&self, x: &[f64]) -> Result<impl Fn(f64) -> Vec<f64> + Send + Sync, FlowError> {
        self.check_point(x)?;
        self.spec.orbit(x)
    }

    pub fn orbit_distance(&self, x: &[f64], t0: f64, t1: f64, y: &[f64]) -> Result<ArcDistance, FlowError> {
        self.check_time(t0)?;
        self.check_time(t1)?;
        self.check_point(x)?;
        self.check_point(y)?;
        self.spec.orbit_distance(x, t0, t1, y)
    }
}

/// A sampling box `center ± half_width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub center: Vec<f64>,
    pub half_width: f64,
}

impl Region {
    pub fn cube(dim: usize, half_width: f64) -> Self {
        Self { center: vec![0.0; dim], half_width }
    }

    pub fn sample(&self, rng: &mut SampleRng) -> Vec<f64> {
        self.center.iter().map(|c| c + uniform(rng, -self.half_width, self.half_width)).collect()
    }

    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.center.len();
        (0..1usize << d)
            .map(|k| (0..d).map(|i| self.center[i] + if k >> i & 1 == 1 { self.half_width } else { -self.half_width }).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Membership {
    In,
    Out,
    /// The arc estimate hit its subdivision cap.
    Inconclusive,
}

/// `V^±(F, ε, μ) = {(x, y) : d(y, F(±[0, ε], x)) < μ d(x, y)}`.
#[derive(Debug, Clone, Copy)]
pub struct FlowPairGenerator<'a> {
    flow: &'a Flow,
    sign: Sign,
    eps: f64,
    mu: f64,
}

impl<'a> FlowPairGenerator<'a> {
    pub fn new(flow: &'a Flow, sign: Sign, eps: f64, mu: f64) -> Result<Self, FlowError> {
        if !(eps > 0.0) || !(mu > 0.0 && mu < 1.0) {
            return Err(FlowError::InvalidParameter(format!("need ε > 0 and μ in (0, 1), got ε = {eps}, μ = {mu}")));
        }
        let t = match sign {
            Sign::Plus => eps,
            Sign::Minus => -eps,
        };
        flow.check_time(t)?;
        Ok(Self { flow, sign, eps, mu })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    fn window(&self) -> (f64, f64) {
        match self.sign {
            Sign::Plus => (0.0, self.eps),
            Sign::Minus => (-self.eps, 0.0),
        }
    }

    /// Closest orbit point to `y` and its parameter.
    pub fn witness(&self, x: &[f64], y: &[f64]) -> Result<ArcDistance, FlowError> {
        let (t0, t1) = self.window();
        self.flow.orbit_distance(x, t0, t1, y)
    }

    pub fn membership(&self, x: &[f64], y: &[f64]) -> Result<Membership, FlowError> {
        let d = dist(x, y);
        if d == 0.0 {
            return Ok(Membership::Out);
        }
        let a = self.witness(x, y)?;
        Ok(if !a.converged {
            Membership::Inconclusive
        } else if a.distance < self.mu * d {
            Membership::In
        } else {
            Membership::Out
        })
    }

    /// A member `y` of the slice at `x`: a point of the orbit arc moved by less
    /// than `μ/(1+μ)` times its displacement. `None` when `x` does not move.
    pub fn sample_from(&self, rng: &mut SampleRng, x: &[f64]) -> Result<Option<Vec<f64>>, FlowError> {
        let lambda = self.eps * (1.0 - uniform(rng, 0.0, 1.0));
        let t = match self.sign {
            Sign::Plus => lambda,
            Sign::Minus => -lambda,
        };
        let z = self.flow.eval(t, x)?;
        let d = dist(x, &z);
        if d == 0.0 {
            return Ok(None);
        }
        let rho = self.mu * d / (1.0 + self.mu) * uniform(rng, 0.0, 1.0);
        Ok(Some(axpy(&z, rho, &unit_vector(rng, x.len()))))
    }

    /// A member pair with `x` drawn from `region`, skipping fixed points.
    pub fn sample_pair(&self, rng: &mut SampleRng, region: &Region) -> Result<(Vec<f64>, Vec<f64>), FlowError> {
        for _ in 0..MAX_REDRAWS {
            let x = region.sample(rng);
            if let Some(y) = self.sample_from(rng, &x)? {
                return Ok((x, y));
            }
        }
        Err(FlowError::BudgetExhausted(MAX_REDRAWS))
    }
}

const MAX_REDRAWS: usize = 100;

pub fn flow_pair_contains(g: &FlowPairGenerator<'_>, x: &[f64], y: &[f64]) -> bool {
    matches!(g.membership(x, y), Ok(Membership::In))
}

/// `∂⁺F` (or `∂⁻F`) as a generated filter on pairs `x ++ y`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowFilter {
    pub flow: Flow,
    pub sign: Sign,
}

impl GeneratedFilter for FlowFilter {
    fn kind(&self) -> FilterKind {
        FilterKind::Flow
    }

    fn contains(&self, eps: f64, mu: f64, point: &[f64]) -> bool {
        let (x, y) = split_pair(point);
        FlowPairGenerator::new(&self.flow, self.sign, eps, mu).is_ok_and(|g| flow_pair_contains(&g, x, y))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionsConfig {
    pub samples: usize,
    pub seed: u64,
    /// Residual tolerance for (a) and (d).
    pub tol: f64,
    /// Uniform time points for the `M` table, before `0, ±10⁻², ±10⁻³` are added.
    pub t_points: usize,
    /// Points `x` per time in the `M` table.
    pub ratio_points: usize,
    /// Separation `d(x, y)` used for the difference quotients.
    pub eta: f64,
    pub deltas: Vec<f64>,
    /// The modulus at the smallest `δ` must be below this.
    pub modulus_tol: f64,
    pub m0_tol: f64,
    pub eps_grid: Vec<f64>,
    pub mu_grid: Vec<f64>,
    pub cell_samples: usize,
}

impl Default for ConditionsConfig {
    fn default() -> Self {
        Self {
            samples: 2000,
            seed: 0,
            tol: 1e-9,
            t_points: 41,
            ratio_points: 128,
            eta: 1e-5,
            deltas: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
            modulus_tol: 1e-3,
            m0_tol: 1e-3,
            eps_grid: vec![1e-1, 1e-2, 1e-3, 1e-4],
            mu_grid: vec![0.4, 0.2, 0.1, 0.05],
            cell_samples: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusEntry {
    pub delta: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEntry {
    pub t: f64,
    pub sup_ratio: f64,
    pub inf_ratio: f64,
    /// `max(sup, 1/inf)`, so at least 1.
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCell {
    pub eps1: f64,
    pub eps2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub c: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupWitness {
    pub s: f64,
    pub t: f64,
    pub x: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConditionsReport {
    pub identity_residual: f64,
    pub identity_witness: Option<Vec<f64>>,
    pub identity: bool,
    pub modulus: Vec<ModulusEntry>,
    pub equicontinuous: bool,
    pub ratios: Vec<RatioEntry>,
    pub m0: f64,
    pub lipschitz: bool,
    pub group_residual: f64,
    pub group_witness: Option<GroupWitness>,
    pub local_group: bool,
    pub cells: Vec<ChainCell>,
    pub c: f64,
    pub chain: bool,
    pub samples: usize,
    pub seed: u64,
}

impl FlowConditionsReport {
    pub fn passed(&self) -> bool {
        self.passed_through_d() && self.chain
    }

    /// Conditions (a) to (d).
    pub fn passed_through_d(&self) -> bool {
        self.identity && self.equicontinuous && self.lipschitz && self.local_group
    }

    /// Largest tabulated `λ > 0` with `M(t) ≤ bound` for every tabulated
    /// `t ∈ [0, λ]`, or `|t| ≤ λ` when `two_sided`.
    pub fn lambda0(&self, bound: f64, two_sided: bool) -> Option<f64> {
        let mut best = None;
        let mut positive: Vec<&RatioEntry> = self.ratios.iter().filter(|r| r.t > 0.0).collect();
        positive.sort_by(|p, q| p.t.total_cmp(&q.t));
        for r in positive {
            let ok = self
                .ratios
                .iter()
                .filter(|e| if two_sided { e.t.abs() <= r.t } else { e.t >= 0.0 && e.t <= r.t })
                .all(|e| e.m <= bound);
            if !ok {
                break;
            }
            best = Some(r.t);
        }
        best
    }

    pub fn m_sup(&self, lo: f64, hi: f64) -> f64 {
        self.ratios.iter().filter(|r| r.t >= lo && r.t <= hi).map(|r| r.m).fold(1.0, f64::max)
    }
}

fn time_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let mut ts: Vec<f64> = (0..n.max(2)).map(|k| a + (b - a) * k as f64 / (n.max(2) - 1) as f64).collect();
    ts.extend([0.0, 1e-2, -1e-2, 1e-3, -1e-3].into_iter().filter(|t| *t >= a && *t <= b));
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

fn collect<T>(v: Vec<Result<T, FlowError>>) -> Result<Vec<T>, FlowError> {
    v.into_iter().collect()
}

/// Samples conditions (a) to (e) on `region`.
pub fn check_flow_conditions(flow: &Flow, region: &Region, cfg: &ConditionsConfig) -> Result<FlowConditionsReport, FlowError> {
    flow.check_point(&region.center)?;
    if cfg.samples == 0 || cfg.ratio_points == 0 || cfg.cell_samples == 0 {
        return Err(FlowError::InvalidParameter("sample counts must be positive".into()));
    }
    let (a, b) = flow.domain();
    let dim = flow.dim();
    let seed = cfg.seed;

    let ident = collect(par_sample(cfg.samples, derive_seed(seed, "flow/a"), |rng, _| {
        let x = region.sample(rng);
        let r = dist(&flow.eval(0.0, &x)?, &x);
        Ok((r, x))
    }))?;
    let (identity_residual, worst) = ident.into_iter().fold((0.0, None), |(m, w), (r, x)| if r > m { (r, Some(x)) } else { (m, w) });
    let identity = identity_residual <= cfg.tol;

    let mut modulus = Vec::new();
    for (k, &delta) in cfg.deltas.iter().enumerate() {
        let delta = delta.min(b - a);
        let vals = collect(par_sample(cfg.samples, derive_seed(seed, &format!("flow/b/{k}")), |rng, _| {
            let x = region.sample(rng);
            let s = uniform(rng, a, b - delta);
            let t = s + delta * uniform(rng, 0.0, 1.0);
            let o = flow.orbit(&x)?;
            Ok(dist(&o(t), &o(s)))
        }))?;
        modulus.push(ModulusEntry { delta, omega: vals.into_iter().fold(0.0, f64::max) });
    }
    let equicontinuous = modulus.last().is_some_and(|m| m.omega <= cfg.modulus_tol);

    let mut ratios = Vec::new();
    for (k, t) in time_grid(a, b, cfg.t_points).into_iter().enumerate() {
        let q = collect(par_sample(cfg.ratio_points, derive_seed(seed, &format!("flow/c/{k}")), |rng, _| {
            let x = region.sample(rng);
            let y = axpy(&x, cfg.eta, &unit_vector(rng, dim));
            Ok(dist(&flow.eval(t, &x)?, &flow.eval(t, &y)?) / dist(&x, &y))
        }))?;
        let sup_ratio = q.iter().copied().fold(0.0, f64::max);
        let inf_ratio = q.iter().copied().fold(f64::INFINITY, f64::min);
        ratios.push(RatioEntry { t, sup_ratio, inf_ratio, m: sup_ratio.max(1.0 / inf_ratio) });
    }
    let m0 = ratios.iter().find(|r| r.t == 0.0).map_or(f64::NAN, |r| r.m);
    let lipschitz = ratios.iter().all(|r| r.m.is_finite()) && (m0 - 1.0).abs() <= cfg.m0_tol;

    let group = collect(par_sample(cfg.samples, derive_seed(seed, "flow/d"), |rng, _| {
        let x = region.sample(rng);
        let s = uniform(rng, a, b);
        let t = uniform(rng, (a - s).max(a), (b - s).min(b));
        let residual = dist(&flow.eval(s + t, &x)?, &flow.eval(s, &flow.eval(t, &x)?)?);
        Ok(GroupWitness { s, t, x, residual })
    }))?;
    let worst_group = group.into_iter().max_by(|p, q| p.residual.total_cmp(&q.residual));
    let group_residual = worst_group.as_ref().map_or(0.0, |w| w.residual);
    let local_group = group_residual <= cfg.tol;

    let reversed = flow.reversed();
    let mut cells = Vec::new();
    let mut k = 0usize;
    for &eps1 in &cfg.eps_grid {
        for &eps2 in &cfg.eps_grid {
            for &mu1 in &cfg.mu_grid {
                for &mu2 in &cfg.mu_grid {
                    let fwd = FlowPairGenerator::new(flow, Sign::Plus, eps1, mu1)?;
                    let back = FlowPairGenerator::new(&reversed, Sign::Plus, eps2, mu2)?;
                    let vals = collect(par_sample(cfg.cell_samples, derive_seed(seed, &format!("flow/e/{k}")), |rng, _| {
                        for _ in 0..MAX_REDRAWS {
                            let y = region.sample(rng);
                            let (Some(z), Some(x)) = (fwd.sample_from(rng, &y)?, back.sample_from(rng, &y)?) else { continue };
                            return Ok(Some((dist(&x, &y) + dist(&y, &z)) / dist(&x, &z)));
                        }
                        Ok(None)
                    }))?;
                    let vals: Vec<f64> = vals.into_iter().flatten().collect();
                    let c = vals.iter().copied().fold(1.0, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v) });
                    cells.push(ChainCell { eps1, eps2, mu1, mu2, c, samples: vals.len() });
                    k += 1;
                }
            }
        }
    }
    let c = cells.iter().map(|c| c.c).fold(1.0, f64::max);
    let chain = c.is_finite() && cells.iter().all(|c| c.samples > 0);

    Ok(FlowConditionsReport {
        identity_residual,
        identity_witness: if identity { None } else { worst },
        identity,
        modulus,
        equicontinuous,
        ratios,
        m0,
        lipschitz,
        group_residual,
        group_witness: if local_group { None } else { worst_group },
        local_group,
        cells,
        c,
        chain,
        samples: cfg.samples,
        seed,
    })
}

/// `sup { d(x, F(±λ, x)) : x, λ ∈ [0, δ] }` over the region's corners and
/// sampled points, with 16 values of `λ`.
pub fn displacement_modulus(flow: &Flow, region: &Region, sign: Sign, delta: f64, samples: usize, seed: u64) -> Result<f64, FlowError> {
    let s = match sign {
        Sign::Plus => 1.0,
        Sign::Minus => -1.0,
    };
    flow.check_time(s * delta)?;
    let sup = |x: &[f64]| -> Result<f64, FlowError> {
        let o = flow.orbit(x)?;
        Ok((1..=16).map(|k| dist(x, &o(s * delta * k as f64 / 16.0))).fold(0.0, f64::max))
    };
    let mut m = 0.0f64;
    for c in region.corners() {
        m = m.max(sup(&c)?);
    }
    for v in collect(par_sample(samples, seed, |rng, _| sup(&region.sample(rng))))? {
        m = m.max(v);
    }
    Ok(m)
}

/// Largest `δ = start · 2^{−k}` whose displacement modulus is at most `bound`.
fn largest_time_within(flow: &Flow, region: &Region, sign: Sign, start: f64, bound: f64, samples: usize, seed: u64) -> Result<Option<f64>, FlowError> {
    let mut delta = start;
    for _ in 0..60 {
        if displacement_modulus(flow, region, sign, delta, samples, seed)? <= bound {
            return Ok(Some(delta));
        }
        delta /= 2.0;
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeConfig {
    pub samples: usize,
    pub seed: u64,
    pub region: Region,
    /// Points used for each displacement-modulus estimate.
    pub modulus_samples: usize,
    /// Candidate radii for `ε₁`, largest first.
    pub radii: Vec<f64>,
    /// Smallest `μ′` a recipe may return.
    pub mu_prime_min: f64,
}

impl RecipeConfig {
    pub fn new(dim: usize, samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            region: Region::cube(dim, 1.0),
            modulus_samples: 256,
            radii: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 1e-5, 1e-6],
            mu_prime_min: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairWitness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainWitness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

/// Outcome of sampling a proved implication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplicationCheck<W> {
    pub samples: usize,
    pub violations: usize,
    pub inconclusive: usize,
    pub witnesses: Vec<W>,
}

impl<W> ImplicationCheck<W> {
    fn tally(samples: usize, found: Vec<Option<(Membership, W)>>) -> Self {
        let (mut violations, mut inconclusive, mut witnesses) = (0, 0, Vec::new());
        for (m, w) in found.into_iter().flatten() {
            match m {
                Membership::Inconclusive => inconclusive += 1,
                _ => {
                    violations += 1;
                    if witnesses.len() < 8 {
                        witnesses.push(w);
                    }
                }
            }
        }
        Self { samples, violations, inconclusive, witnesses }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemaconReport {
    pub eps_prime: f64,
    pub mu_prime: f64,
    pub lambda0: f64,
    pub eps1: f64,
    pub sigma: f64,
    pub eps_sigma: f64,
    pub check: ImplicationCheck<PairWitness>,
}

fn check_target(flow: &Flow, eps: f64, mu: f64) -> Result<(), FlowError> {
    if !(mu > 0.0 && mu < 1.0) || !(eps > 0.0) {
        return Err(FlowError::InvalidParameter(format!("need ε > 0 and μ in (0, 1), got ε = {eps}, μ = {mu}")));
    }
    flow.check_time(eps)
}

/// Given `(ε, μ)`, builds `(ε′, μ′)` with
/// `(x, y) ∈ V⁺(F̄, ε′, μ′) ⇒ (y, x) ∈ V⁺(F, ε, μ)` and samples the implication.
pub fn lemacon_construct(flow: &Flow, report: &FlowConditionsReport, eps: f64, mu: f64, cfg: &RecipeConfig) -> Result<LemaconReport, FlowError> {
    check_target(flow, eps, mu)?;
    if !report.passed() {
        return Err(FlowError::RecipeUnsatisfiable("flow conditions did not pass".into()));
    }
    let mu_prime = 0.9 * mu.min(0.5) / 4.0;
    let lambda0 = report
        .lambda0(2.0, true)
        .ok_or_else(|| FlowError::RecipeUnsatisfiable(format!("no λ₀ with M ≤ 2 in the table {:?}", report.ratios)))?;
    let eps1 = lemacon_radius(flow, lambda0, cfg)?
        .ok_or_else(|| FlowError::RecipeUnsatisfiable("no radius ε₁ makes ¼ d(F(t,y), x) ≤ d(y, F(−t,x)) hold".into()))?;
    let sigma = eps1 / 2.0;
    let start = (-flow.domain().0).min(flow.domain().1);
    let eps_sigma = largest_time_within(flow, &cfg.region, Sign::Minus, start, sigma, cfg.modulus_samples, derive_seed(cfg.seed, "lemacon/sigma"))?
        .ok_or_else(|| FlowError::RecipeUnsatisfiable(format!("no ε_σ with d(x, F(−ε_σ, x)) ≤ {sigma}")))?;
    let eps_prime = eps.min(eps_sigma).min(lambda0);

    let reversed = flow.reversed();
    let source = FlowPairGenerator::new(&reversed, Sign::Plus, eps_prime, mu_prime)?;
    let target = FlowPairGenerator::new(flow, Sign::Plus, eps, mu)?;
    let found = collect(par_sample(cfg.samples, derive_seed(cfg.seed, "lemacon/check"), |rng, _| {
        let (x, y) = source.sample_pair(rng, &cfg.region)?;
        let m = target.membership(&y, &x)?;
        Ok((m != Membership::In).then_some((m, PairWitness { x, y })))
    }))?;
    Ok(LemaconReport { eps_prime, mu_prime, lambda0, eps1, sigma, eps_sigma, check: ImplicationCheck::tally(cfg.samples, found) })
}

/// Largest candidate radius `η` for which `¼ d(F(t, y), x) ≤ d(y, F(−t, x))`
/// holds on every sampled `d(x, y) < η`, `|t| ≤ λ₀`.
fn lemacon_radius(flow: &Flow, lambda0: f64, cfg: &RecipeConfig) -> Result<Option<f64>, FlowError> {
    let n = cfg.modulus_samples.max(1) * 4;
    for (k, &eta) in cfg.radii.iter().enumerate() {
        let bad = collect(par_sample(n, derive_seed(cfg.seed, &format!("lemacon/radius/{k}")), |rng, _| {
            let x = cfg.region.sample(rng);
            let y = axpy(&x, eta * uniform(rng, 0.0, 1.0), &unit_vector(rng, x.len()));
            let t = uniform(rng, -lambda0, lambda0);
            Ok(0.25 * dist(&flow.eval(t, &y)?, &x) > dist(&y, &flow.eval(-t, &x)?))
        }))?;
        if !bad.into_iter().any(|b| b) {
            return Ok(Some(eta));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step1Report {
    pub eps: f64,
    pub mu: f64,
    pub eps0: f64,
    /// Members with `d(x, y) ≥ ε′`.
    pub check: ImplicationCheck<PairWitness>,
    /// Members breaking `d(x, y) < d(x, F(λ, x)) / (1 − μ)` at the witness `λ`.
    pub bound_violations: usize,
}

/// Given a radius `ε′`, builds `(ε, μ)` with `V⁺(F, ε, μ) ⊆ B(ε′)`.
pub fn step1_diagonal_check(flow: &Flow, report: &FlowConditionsReport, eps_target: f64, mu: f64, cfg: &RecipeConfig) -> Result<Step1Report, FlowError> {
    if !(eps_target > 0.0) || !(mu > 0.0 && mu < 1.0) {
        return Err(FlowError::InvalidParameter(format!("need ε′ > 0 and μ in (0, 1), got ε′ = {eps_target}, μ = {mu}")));
    }
    if !(report.identity && report.equicontinuous) {
        return Err(FlowError::RecipeUnsatisfiable("conditions (a) and (b) did not pass".into()));
    }
    let bound = (1.0 - mu) * eps_target;
    let eps0 = largest_time_within(flow, &cfg.region, Sign::Plus, flow.domain().1, bound, cfg.modulus_samples, derive_seed(cfg.seed, "step1/modulus"))?
        .ok_or_else(|| FlowError::RecipeUnsatisfiable(format!("no ε₀ with d(x, F(λ, x)) ≤ {bound}")))?;
    let eps = eps0 / 2.0;
    let g = FlowPairGenerator::new(flow, Sign::Plus, eps, mu)?;
    let found = collect(par_sample(cfg.samples, derive_seed(cfg.seed, "step1/check"), |rng, _| {
        let (x, y) = g.sample_pair(rng, &cfg.region)?;
        let w = g.witness(&x, &y)?;
        let d = dist(&x, &y);
        let member = w.converged && w.distance < mu * d;
        let bound_ok = !member || d < dist(&x, &flow.eval(w.lambda, &x)?) / (1.0 - mu);
        let m = if !w.converged { Membership::Inconclusive } else { Membership::Out };
        Ok(((member && d >= eps_target) || !w.converged, !bound_ok, m, PairWitness { x, y }))
    }))?;
    let bound_violations = found.iter().filter(|f| f.1).count();
    let found = found.into_iter().map(|(bad, _, m, w)| bad.then_some((m, w))).collect();
    Ok(Step1Report { eps, mu, eps0, check: ImplicationCheck::tally(cfg.samples, found), bound_violations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step3Report {
    pub eps_prime: f64,
    pub mu_prime: f64,
    pub c: f64,
    pub m_sup: f64,
    pub check: ImplicationCheck<ChainWitness>,
}

/// Given `(ε, μ)`, builds `(ε′, μ′)` with
/// `V⁺(F, ε′, μ′) ∘ V⁺(F, ε′, μ′) ⊆ V⁺(F, ε, μ)` and samples chains.
pub fn step3_composition_check(flow: &Flow, report: &FlowConditionsReport, eps: f64, mu: f64, cfg: &RecipeConfig) -> Result<Step3Report, FlowError> {
    check_target(flow, eps, mu)?;
    if !report.passed() {
        return Err(FlowError::RecipeUnsatisfiable("flow conditions did not pass".into()));
    }
    let lambda0 = report
        .lambda0(2.0, false)
        .ok_or_else(|| FlowError::RecipeUnsatisfiable(format!("no λ with sup M ≤ 2 on [0, λ] in the table {:?}", report.ratios)))?;
    let eps_prime = (0.49 * eps).min(lambda0);
    let c = report.c;
    let mu_prime = 0.9 * mu / (4.0 * c);
    if mu_prime < cfg.mu_prime_min {
        return Err(FlowError::RecipeUnsatisfiable(format!(
            "4μ′C < μ with C = {c} needs μ′ < {}, below the floor {}",
            mu / (4.0 * c),
            cfg.mu_prime_min
        )));
    }
    let g = FlowPairGenerator::new(flow, Sign::Plus, eps_prime, mu_prime)?;
    let target = FlowPairGenerator::new(flow, Sign::Plus, eps, mu)?;
    let found = collect(par_sample(cfg.samples, derive_seed(cfg.seed, "step3/check"), |rng, _| {
        for _ in 0..MAX_REDRAWS {
            let (x, y) = g.sample_pair(rng, &cfg.region)?;
            let Some(z) = g.sample_from(rng, &y)? else { continue };
            let m = target.membership(&x, &z)?;
            return Ok((m != Membership::In).then_some((m, ChainWitness { x, y, z })));
        }
        Err(FlowError::BudgetExhausted(MAX_REDRAWS))
    }))?;
    Ok(Step3Report { eps_prime, mu_prime, c, m_sup: report.m_sup(0.0, eps_prime), check: ImplicationCheck::tally(cfg.samples, found) })
}

/// `(lower, upper)` bounds of `f` on the region, grown by `margin`.
fn map_bounds(f: &MapSpec, region: &Region, margin: f64) -> (f64, f64) {
    let grid = if f.dim() <= 2 { 9 } else { 5 };
    f.lipschitz_bounds(&region.center, region.half_width + margin, grid)
}

/// `f*F(t, x) = f(F(t, f⁻¹(x)))`, after checking `f` is bi-Lipschitz on the
/// region and its inverse is accurate there.
pub fn pushforward_flow(f: &MapSpec, flow: &Flow, region: &Region) -> Result<Flow, FlowError> {
    f.validate()?;
    if f.dim() != flow.dim() {
        return Err(FlowError::DimensionMismatch { got: f.dim(), expected: flow.dim() });
    }
    let (lower, upper) = map_bounds(f, region, 0.0);
    if !f.is_injective() || !(lower > BILIP_LOWER && upper < BILIP_UPPER) {
        return Err(FlowError::NotBiLipschitz { lower, upper });
    }
    let mut rng = crate::sampling::rng_for(derive_seed(0, "pushforward/inverse"), 0);
    for p in region.corners().into_iter().chain((0..64).map(|_| region.sample(&mut rng))) {
        f.inverse(&p)?;
    }
    let (a, b) = flow.domain();
    Flow::new(FlowSpec::Conjugated { map: f.clone(), flow: Box::new(flow.spec.clone()) }, a, b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportConfig {
    pub samples: usize,
    pub seed: u64,
    pub eps: f64,
    pub mu: f64,
    /// Multiplies the sampled distortion `upper/lower` of the map.
    pub slack: f64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self { samples: 4000, seed: 0, eps: 0.05, mu: 0.1, slack: 1.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTransport {
    pub verdict: Commutation<PairWitness>,
    /// `K`: members of `V⁺(F, ε, μ)` map into `V⁺(f*F, ε, Kμ)` and back.
    pub distortion: f64,
    pub mu: f64,
    pub forward_checked: usize,
    pub backward_checked: usize,
}

/// Samples `f² V⁺(F, ε, μ) ⊆ V⁺(f*F, ε, Kμ)` and
/// `(f⁻¹)² V⁺(f*F, ε, μ) ⊆ V⁺(F, ε, Kμ)`, with `K` the distortion of `f`.
pub fn check_flow_transport(f: &MapSpec, flow: &Flow, region: &Region, cfg: &TransportConfig) -> Result<FlowTransport, FlowError> {
    let pushed = pushforward_flow(f, flow, region)?;
    let (lower, upper) = map_bounds(f, region, 2.0 * cfg.eps);
    let distortion = cfg.slack * upper / lower;
    let mu = cfg.mu.min(0.5 / distortion);
    let wide = (distortion * mu).min(0.99);
    let src = FlowPairGenerator::new(flow, Sign::Plus, cfg.eps, mu)?;
    let src_wide = FlowPairGenerator::new(flow, Sign::Plus, cfg.eps, wide)?;
    let dst = FlowPairGenerator::new(&pushed, Sign::Plus, cfg.eps, mu)?;
    let dst_wide = FlowPairGenerator::new(&pushed, Sign::Plus, cfg.eps, wide)?;
    let half = cfg.samples.div_ceil(2);
    let forward = collect(par_sample(half, derive_seed(cfg.seed, "transport/forward"), |rng, _| {
        let (x, y) = src.sample_pair(rng, region)?;
        let (fx, fy) = (f.eval(&x), f.eval(&y));
        Ok((dst_wide.membership(&fx, &fy)?, PairWitness { x, y }))
    }))?;
    let backward = collect(par_sample(half, derive_seed(cfg.seed, "transport/backward"), |rng, _| {
        for _ in 0..MAX_REDRAWS {
            let x = f.eval(&region.sample(rng));
            let Some(y) = dst.sample_from(rng, &x)? else { continue };
            let (gx, gy) = (f.inverse(&x)?, f.inverse(&y)?);
            return Ok((src_wide.membership(&gx, &gy)?, PairWitness { x, y }));
        }
        Err(FlowError::BudgetExhausted(MAX_REDRAWS))
    }))?;
    let all: Vec<_> = forward.into_iter().chain(backward).collect();
    let unresolved = all.iter().filter(|(m, _)| *m == Membership::Inconclusive).count();
    if unresolved == all.len() {
        return Err(FlowError::BudgetExhausted(all.len()));
    }
    let verdict = match all.into_iter().find(|(m, _)| *m == Membership::Out) {
        Some((_, w)) => Commutation::Counterexample(w),
        None if unresolved > 0 => Commutation::Inconclusive { unresolved, checked: 2 * half },
        None => Commutation::Commute,
    };
    Ok(FlowTransport { verdict, distortion, mu, forward_checked: half, backward_checked: half })
}
