//! Snowflake metrics `|x − y|^{1/m}`, the mixed product metric on `ℝ²`,
//! polynomial filters `μ_{x,p}` and order-`m` derivability checks.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::metric::{arc_distance, FilterKind, GeneratedFilter, Metric};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SnowflakeError {
    #[error("exponent m = {0} must be at least 2")]
    BadExponent(u32),
    #[error("polynomial constraint violated: {0}")]
    ConstraintViolation(String),
    #[error("degenerate generator: {0}")]
    DegenerateGenerator(String),
    #[error("order-{m} development is trivial at {x}")]
    TrivialDevelopment { m: u32, x: f64 },
    #[error("map is not Lipschitz on the interval (ratio up to {0:e})")]
    NotLipschitz(f64),
    #[error("bad coefficient {0:?}")]
    BadCoefficient(String),
}

pub fn snowflake_distance(m: u32, x: f64, y: f64) -> f64 {
    (x - y).abs().powf(1.0 / f64::from(m))
}

/// `ℝ` with `|x − y|^{1/m}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnowflakeSpace {
    m: u32,
}

impl SnowflakeSpace {
    pub fn new(m: u32) -> Result<Self, SnowflakeError> {
        if m < 2 {
            return Err(SnowflakeError::BadExponent(m));
        }
        Ok(Self { m })
    }

    pub fn m(&self) -> u32 {
        self.m
    }
}

impl Metric for SnowflakeSpace {
    fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        snowflake_distance(self.m, x[0], y[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    First,
    Second,
}

/// `ℝ²` with `|Δ₁| + |Δ₂|^{1/m}` (snowflake on the second axis) or
/// `|Δ₁|^{1/m} + |Δ₂|` (snowflake on the first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixedProductSpace {
    m: u32,
    snowflake_axis: Axis,
}

impl MixedProductSpace {
    pub fn new(m: u32) -> Result<Self, SnowflakeError> {
        Self::with_axis(m, Axis::Second)
    }

    pub fn with_axis(m: u32, snowflake_axis: Axis) -> Result<Self, SnowflakeError> {
        SnowflakeSpace::new(m)?;
        Ok(Self { m, snowflake_axis })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn axis(&self) -> Axis {
        self.snowflake_axis
    }
}

impl Metric for MixedProductSpace {
    fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let (a, b) = ((x[0] - y[0]).abs(), (x[1] - y[1]).abs());
        let r = 1.0 / f64::from(self.m);
        match self.snowflake_axis {
            Axis::Second => a + b.powf(r),
            Axis::First => a.powf(r) + b,
        }
    }
}

/// A real polynomial with exact rational coefficients, constant term first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    coeffs: Vec<BigRational>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_ints(c: &[i64]) -> Self {
        Self::new(c.iter().map(|&a| BigRational::from_integer(a.into())).collect())
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn coeffs_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.to_f64().expect("finite coefficient")).collect()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Degree of the lowest nonzero term.
    pub fn low_degree(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    pub fn eval(&self, t: f64) -> f64 {
        poly_eval(&self.coeffs_f64(), t)
    }

    /// `p(0) = 0` and `1 ≤ deg p ≤ m`.
    pub fn check(&self, m: u32) -> Result<(), SnowflakeError> {
        match self.degree() {
            None => Err(SnowflakeError::ConstraintViolation("zero polynomial".into())),
            Some(_) if !self.coeffs[0].is_zero() => Err(SnowflakeError::ConstraintViolation("p(0) ≠ 0".into())),
            Some(d) if d > m as usize => Err(SnowflakeError::ConstraintViolation(format!("degree {d} exceeds m = {m}"))),
            Some(_) => Ok(()),
        }
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| match i {
                0 => format!("{c}"),
                1 => format!("({c})t"),
                _ => format!("({c})t^{i}"),
            })
            .collect();
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Coef {
    Int(i64),
    Text(String),
}

impl Serialize for Polynomial {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let out: Vec<Coef> = self
            .coeffs
            .iter()
            .map(|c| match (c.is_integer(), c.to_integer().to_i64()) {
                (true, Some(i)) => Coef::Int(i),
                _ => Coef::Text(c.to_string()),
            })
            .collect();
        out.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = Vec::<Coef>::deserialize(d)?;
        let coeffs = raw
            .into_iter()
            .map(|c| match c {
                Coef::Int(i) => Ok(BigRational::from_integer(i.into())),
                Coef::Text(s) => parse_rational(&s).map_err(serde::de::Error::custom),
            })
            .collect::<Result<_, _>>()?;
        Ok(Polynomial::new(coeffs))
    }
}

pub fn parse_rational(s: &str) -> Result<BigRational, SnowflakeError> {
    let s = s.trim();
    if s.contains('/') {
        BigRational::from_str(s).map_err(|_| SnowflakeError::BadCoefficient(s.into()))
    } else {
        num_bigint::BigInt::from_str(s).map(BigRational::from_integer).map_err(|_| SnowflakeError::BadCoefficient(s.into()))
    }
}

pub fn poly_eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * t + a)
}

/// Which set `x + p([0, ε])` denotes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcMode {
    /// `x + (t, p(t))` in the mixed product, snowflake on the second axis.
    Graph,
    /// `x + p(t)` on the snowflake line.
    Line,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialFilter {
    x: Vec<f64>,
    p: Polynomial,
    coeffs: Vec<f64>,
    m: u32,
    mode: ArcMode,
}

pub fn polynomial_filter(x: Vec<f64>, p: Polynomial, m: u32, mode: ArcMode) -> Result<PolynomialFilter, SnowflakeError> {
    SnowflakeSpace::new(m)?;
    p.check(m)?;
    let dim = match mode {
        ArcMode::Graph => 2,
        ArcMode::Line => 1,
    };
    if x.len() != dim {
        return Err(SnowflakeError::DegenerateGenerator(format!("base point must have {dim} coordinates")));
    }
    let coeffs = p.coeffs_f64();
    Ok(PolynomialFilter { x, p, coeffs, m, mode })
}

impl PolynomialFilter {
    pub fn polynomial(&self) -> &Polynomial {
        &self.p
    }

    pub fn arc_point(&self, t: f64) -> Vec<f64> {
        match self.mode {
            ArcMode::Graph => vec![self.x[0] + t, self.x[1] + poly_eval(&self.coeffs, t)],
            ArcMode::Line => vec![self.x[0] + poly_eval(&self.coeffs, t)],
        }
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.mode {
            ArcMode::Graph => MixedProductSpace { m: self.m, snowflake_axis: Axis::Second }.distance(a, b),
            ArcMode::Line => snowflake_distance(self.m, a[0], b[0]),
        }
    }

    /// Membership in `V⁺(x, p, ε, λ)`; the arc distance is minimised numerically.
    pub fn generator_contains(&self, eps: f64, lambda: f64, y: &[f64]) -> Result<bool, SnowflakeError> {
        if !(eps > 0.0 && lambda > 0.0 && lambda < 1.0) {
            return Err(SnowflakeError::DegenerateGenerator(format!("ε = {eps}, λ = {lambda}")));
        }
        Ok(self.contains(eps, lambda, y))
    }

    /// Certified bracket `[lower, upper]` for the distance from `y` to the arc.
    pub fn arc_bracket(&self, eps: f64, y: &[f64], rel_tol: f64) -> (f64, f64) {
        let rel: Vec<f64> = y.iter().zip(&self.x).map(|(a, b)| a - b).collect();
        arc_bracket(&self.coeffs, self.m, self.mode, &rel, eps, rel_tol)
    }
}

impl GeneratedFilter for PolynomialFilter {
    fn kind(&self) -> FilterKind {
        FilterKind::Polynomial
    }

    fn contains(&self, eps: f64, lambda: f64, y: &[f64]) -> bool {
        let r = self.distance(&self.x, y);
        if r <= 0.0 {
            return false;
        }
        let metric = PolyMetric(self);
        let d = arc_distance(&metric, |t| self.arc_point(t), 0.0, eps, y);
        d.distance < lambda * r
    }
}

struct PolyMetric<'a>(&'a PolynomialFilter);

impl Metric for PolyMetric<'_> {
    fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.0.distance(x, y)
    }
}

/// Range of `p` over `[s0, s1] ⊆ [0, ∞)`.
fn poly_range(c: &[f64], s0: f64, s1: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (0.0, 0.0);
    let (mut p0, mut p1) = (1.0, 1.0);
    for &a in c {
        let (u, v) = (a * p0, a * p1);
        lo += u.min(v);
        hi += u.max(v);
        p0 *= s0;
        p1 *= s1;
    }
    (lo, hi)
}

fn gap(v: f64, lo: f64, hi: f64) -> f64 {
    if v < lo {
        lo - v
    } else if v > hi {
        v - hi
    } else {
        0.0
    }
}

#[derive(PartialEq)]
struct Cell {
    lb: f64,
    s0: f64,
    s1: f64,
}

impl Eq for Cell {}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        other.lb.total_cmp(&self.lb)
    }
}

pub const BRACKET_CELLS: usize = 200_000;

/// Branch and bound over cells of `[0, ε]`, using interval bounds on `p`.
/// `y` is relative to the base point. Stops once `lower ≥ (1 − rel_tol)·upper`.
fn arc_bracket(c: &[f64], m: u32, mode: ArcMode, y: &[f64], eps: f64, rel_tol: f64) -> (f64, f64) {
    let r = 1.0 / f64::from(m);
    let exact = |s: f64| match mode {
        ArcMode::Graph => (y[0] - s).abs() + (y[1] - poly_eval(c, s)).abs().powf(r),
        ArcMode::Line => (y[0] - poly_eval(c, s)).abs().powf(r),
    };
    let bound = |s0: f64, s1: f64| {
        let (lo, hi) = poly_range(c, s0, s1);
        match mode {
            ArcMode::Graph => gap(y[0], s0, s1) + gap(y[1], lo, hi).powf(r),
            ArcMode::Line => gap(y[0], lo, hi).powf(r),
        }
    };
    let mut upper = exact(0.0).min(exact(eps));
    let mut heap = BinaryHeap::new();
    let n0 = 64;
    for i in 0..n0 {
        let (s0, s1) = (eps * i as f64 / n0 as f64, eps * (i + 1) as f64 / n0 as f64);
        upper = upper.min(exact(0.5 * (s0 + s1)));
        heap.push(Cell { lb: bound(s0, s1), s0, s1 });
    }
    let mut pushed = n0;
    while let Some(cell) = heap.pop() {
        if cell.lb >= (1.0 - rel_tol) * upper || pushed >= BRACKET_CELLS || cell.s1 - cell.s0 <= f64::EPSILON * cell.s1 {
            return (cell.lb.min(upper), upper);
        }
        let mid = 0.5 * (cell.s0 + cell.s1);
        for (s0, s1) in [(cell.s0, mid), (mid, cell.s1)] {
            upper = upper.min(exact(0.5 * (s0 + s1)));
            heap.push(Cell { lb: bound(s0, s1), s0, s1 });
            pushed += 1;
        }
    }
    (upper, upper)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationWitness {
    /// The sequence runs along the arc of this polynomial (1 or 2)...
    pub along: u8,
    /// ...and leaves the generator `V⁺(x, other, ε, λ)`.
    pub eps: f64,
    pub lambda: f64,
    pub params: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    /// Certified lower bounds of `d(y_h, arc)/d(x, y_h)`.
    pub ratios: Vec<f64>,
    pub tail_start: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Separation {
    Equal,
    Separated(SeparationWitness),
    /// Both arc sequences approach the other arc faster than the base point:
    /// no generator excludes their tails.
    NotSeparated { ratios_12: Vec<f64>, ratios_21: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationConfig {
    pub t0: f64,
    pub t_min: f64,
    pub eps: f64,
    /// The last ratio must keep at least this share of the mid-sequence ratio.
    pub stability: f64,
    pub rel_tol: f64,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        Self { t0: 1.0 / 16.0, t_min: 1e-12, eps: 0.125, stability: 0.5, rel_tol: 1e-3 }
    }
}

/// Looks for a sequence along one arc whose tail stays out of a generator of
/// the other filter, trying both orders.
pub fn separate_polynomials(
    p1: &Polynomial,
    p2: &Polynomial,
    m: u32,
    mode: ArcMode,
    cfg: &SeparationConfig,
) -> Result<Separation, SnowflakeError> {
    SnowflakeSpace::new(m)?;
    p1.check(m)?;
    p2.check(m)?;
    if p1 == p2 {
        return Ok(Separation::Equal);
    }
    let x = match mode {
        ArcMode::Graph => vec![0.0, 0.0],
        ArcMode::Line => vec![0.0],
    };
    let f1 = polynomial_filter(x.clone(), p1.clone(), m, mode)?;
    let f2 = polynomial_filter(x, p2.clone(), m, mode)?;
    let a = sequence_witness(&f1, &f2, 1, cfg);
    if let Ok(w) = a {
        return Ok(Separation::Separated(w));
    }
    let b = sequence_witness(&f2, &f1, 2, cfg);
    match (a, b) {
        (_, Ok(w)) => Ok(Separation::Separated(w)),
        (Err(ratios_12), Err(ratios_21)) => Ok(Separation::NotSeparated { ratios_12, ratios_21 }),
        (Ok(_), _) => unreachable!(),
    }
}

fn sequence_witness(along: &PolynomialFilter, other: &PolynomialFilter, tag: u8, cfg: &SeparationConfig) -> Result<SeparationWitness, Vec<f64>> {
    let mut params = Vec::new();
    let mut t = cfg.t0;
    while t >= cfg.t_min {
        params.push(t);
        t /= 2.0;
    }
    let points: Vec<Vec<f64>> = params.iter().map(|&t| along.arc_point(t)).collect();
    let ratios: Vec<f64> = points
        .iter()
        .map(|y| {
            let (lower, _) = other.arc_bracket(cfg.eps, y, cfg.rel_tol);
            lower / other.distance(&other.x, y)
        })
        .collect();
    let tail_start = ratios.len() / 2;
    let tail = &ratios[tail_start..];
    let least = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda = least.min(0.999);
    let last = *tail.last().expect("nonempty");
    if least > 0.0 && last >= cfg.stability * ratios[tail_start] {
        Ok(SeparationWitness { along: tag, eps: cfg.eps, lambda, params, points, ratios, tail_start })
    } else {
        Err(ratios)
    }
}

/// Re-checks a witness: every tail point lies outside `V⁺(x, other, ε, λ)`
/// according to a fresh certified lower bound.
pub fn verify_separation(p1: &Polynomial, p2: &Polynomial, m: u32, mode: ArcMode, w: &SeparationWitness) -> Result<bool, SnowflakeError> {
    let x = match mode {
        ArcMode::Graph => vec![0.0, 0.0],
        ArcMode::Line => vec![0.0],
    };
    let (along, other) = if w.along == 1 { (p1, p2) } else { (p2, p1) };
    let f_along = polynomial_filter(x.clone(), along.clone(), m, mode)?;
    let f_other = polynomial_filter(x.clone(), other.clone(), m, mode)?;
    Ok(w.params[w.tail_start..].iter().all(|&t| {
        let y = f_along.arc_point(t);
        let (lower, _) = f_other.arc_bracket(w.eps, &y, 1e-6);
        lower >= w.lambda * f_other.distance(&x, &y) * (1.0 - 1e-6) && !f_other.contains(w.eps, w.lambda * (1.0 - 1e-6), &y)
    }))
}

/// A scalar map with derivatives of every order at a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum ScalarMap {
    Identity,
    /// `a·y + b`
    Affine { a: f64, b: f64 },
    /// Coefficients, constant first.
    Poly { coeffs: Vec<f64> },
    Sin,
    Cos,
    Exp,
    /// `ln(1 + y)`
    Log1p,
    /// `1/(1 + y)`
    Recip,
    /// `0`
    Zero,
}

impl ScalarMap {
    pub fn eval(&self, y: f64) -> f64 {
        self.derivative(0, y)
    }

    pub fn derivative(&self, k: usize, y: f64) -> f64 {
        match self {
            ScalarMap::Identity => match k {
                0 => y,
                1 => 1.0,
                _ => 0.0,
            },
            ScalarMap::Affine { a, b } => match k {
                0 => a * y + b,
                1 => *a,
                _ => 0.0,
            },
            ScalarMap::Poly { coeffs } => {
                let mut c = coeffs.clone();
                for _ in 0..k {
                    c = c.iter().enumerate().skip(1).map(|(i, a)| a * i as f64).collect();
                }
                poly_eval(&c, y)
            }
            ScalarMap::Sin => [y.sin(), y.cos(), -y.sin(), -y.cos()][k % 4],
            ScalarMap::Cos => [y.cos(), -y.sin(), -y.cos(), y.sin()][k % 4],
            ScalarMap::Exp => y.exp(),
            ScalarMap::Log1p => {
                if k == 0 {
                    y.ln_1p()
                } else {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign * factorial(k - 1) / (1.0 + y).powi(k as i32)
                }
            }
            ScalarMap::Recip => {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * factorial(k) / (1.0 + y).powi(k as i32 + 1)
            }
            ScalarMap::Zero => 0.0,
        }
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn poly_mul_trunc(a: &[f64], b: &[f64], deg: usize) -> Vec<f64> {
    let mut out = vec![0.0; deg + 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            if i + j <= deg {
                out[i + j] += x * y;
            }
        }
    }
    out
}

/// Degree-`m` truncation of `t ↦ f(x + p(t)) − f(x)`, by composing Taylor series.
pub fn development(f: &ScalarMap, x: f64, p: &Polynomial, m: u32) -> Vec<f64> {
    let deg = m as usize;
    let mut pc = p.coeffs_f64();
    pc.resize(deg + 1, 0.0);
    let mut out = vec![0.0; deg + 1];
    let mut power = vec![1.0];
    for k in 1..=deg {
        power = poly_mul_trunc(&power, &pc, deg);
        let c = f.derivative(k, x) / factorial(k);
        for (o, a) in out.iter_mut().zip(&power) {
            *o += c * a;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyDerivability {
    /// Analytic truncation, constant term first.
    pub q: Vec<f64>,
    /// Least-squares fit to the image sequence.
    pub q_fit: Vec<f64>,
    pub fit_error: f64,
    /// `d(F(y_h), arc of q)/d(F(P), F(y_h))` along the sequence.
    pub ratios: Vec<f64>,
    /// Log-log slope of the ratios; `1/m` when the image matches `μ_{F(P),q}`.
    pub slope: f64,
    pub matches: bool,
}

/// Pushes `(t, x + p(t))` through `F(a, b) = (a, f(b))` and compares the
/// image arc with the graph arc of the analytic truncation `q`.
pub fn check_poly_derivable(f: &ScalarMap, x: f64, p: &Polynomial, m: u32) -> Result<PolyDerivability, SnowflakeError> {
    SnowflakeSpace::new(m)?;
    p.check(m)?;
    let q = development(f, x, p, m);
    if q.iter().skip(1).all(|c| c.abs() < 1e-14) {
        return Err(SnowflakeError::TrivialDevelopment { m, x });
    }
    let fx = f.eval(x);
    let fit_params: Vec<f64> = (0..17).map(|h| 0.05 * 0.6f64.powi(h)).collect();
    let fit_values: Vec<f64> = fit_params.iter().map(|&t| f.eval(x + p.eval(t)) - fx).collect();
    let mut q_fit = fit_polynomial(&fit_params, &fit_values, m as usize + 3);
    q_fit.truncate(m as usize + 1);
    let scale = q.iter().map(|c| c.abs()).fold(1.0, f64::max);
    let fit_error = q.iter().zip(&q_fit).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;

    // membership ratios along the image sequence, which should decay like t^{1/m}
    let params: Vec<f64> = (0..10).map(|h| 0.05 * 0.6f64.powi(h)).collect();
    let target = Polynomial::new(q.iter().map(|&c| BigRational::from_float(c).unwrap_or_else(BigRational::zero)).collect());
    let fq = polynomial_filter(vec![0.0, 0.0], target, m, ArcMode::Graph)?;
    let ratios: Vec<f64> = params
        .iter()
        .map(|&t| {
            let y = [t, f.eval(x + p.eval(t)) - fx];
            fq.arc_bracket(0.1, &y, 1e-6).1 / fq.distance(&[0.0, 0.0], &y)
        })
        .collect();
    let slope = log_slope(&params, &ratios);
    let on_arc = ratios.iter().all(|&r| r <= 1e-9);
    let matches = (on_arc || slope > 0.5 / f64::from(m)) && fit_error < 1e-3;
    Ok(PolyDerivability { q, q_fit, fit_error, ratios, slope, matches })
}

/// Least-squares slope of `ln r` against `ln t`.
fn log_slope(t: &[f64], r: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = t.iter().zip(r).filter(|(_, &b)| b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Least squares for `v ≈ Σ_{k=1..deg} c_k t^k`.
fn fit_polynomial(t: &[f64], v: &[f64], deg: usize) -> Vec<f64> {
    use nalgebra::{DMatrix, DVector};
    let a = DMatrix::from_fn(t.len(), deg, |i, j| t[i].powi(j as i32 + 1));
    let b = DVector::from_column_slice(v);
    let sol = a.svd(true, true).solve(&b, 1e-14).expect("svd solve");
    std::iter::once(0.0).chain(sol.iter().copied()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEmbedding {
    pub lower: f64,
    pub upper: f64,
}

/// Bi-Lipschitz constants of `g(x) = (x, f(x))` from the snowflake line into
/// the mixed product with the given snowflake axis, sampled on `[a, b]`.
pub fn graph_embed(f: &ScalarMap, m: u32, axis: Axis, a: f64, b: f64, grid: usize) -> Result<GraphEmbedding, SnowflakeError> {
    let space = MixedProductSpace::with_axis(m, axis)?;
    let pts: Vec<f64> = (0..=grid).map(|i| a + (b - a) * i as f64 / grid as f64).collect();
    let (mut lower, mut upper) = (f64::INFINITY, 0.0f64);
    let mut slope = 0.0f64;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let (x, y) = (pts[i], pts[j]);
            let (fx, fy) = (f.eval(x), f.eval(y));
            slope = slope.max((fx - fy).abs() / (y - x));
            let r = space.distance(&[x, fx], &[y, fy]) / snowflake_distance(m, x, y);
            lower = lower.min(r);
            upper = upper.max(r);
        }
    }
    if !slope.is_finite() || slope > 1e6 {
        return Err(SnowflakeError::NotLipschitz(slope));
    }
    Ok(GraphEmbedding { lower, upper })
}

/// Box-counting dimension of `[0, 1]` under `|x − y|^{1/m}`, by greedy
/// covers of a grid at radii `r_k` and a least-squares slope.
pub fn box_counting_dimension(m: u32, grid: usize, radii: &[f64]) -> f64 {
    let pts: Vec<f64> = (0..=grid).map(|i| i as f64 / grid as f64).collect();
    let logs: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| {
            let mut count = 0usize;
            let mut start: Option<f64> = None;
            for &p in &pts {
                if start.is_none_or(|s| snowflake_distance(m, s, p) > r) {
                    start = Some(p);
                    count += 1;
                }
            }
            ((1.0 / r).ln(), (count as f64).ln())
        })
        .collect();
    let n = logs.len() as f64;
    let (sx, sy) = logs.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let num: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = logs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(c: &[i64]) -> Polynomial {
        Polynomial::from_ints(c)
    }

    #[test]
    fn distance_examples() {
        assert_eq!(snowflake_distance(2, 0.0, 0.25), 0.5);
        assert_eq!(snowflake_distance(2, 1.5, 1.5), 0.0);
        assert!((snowflake_distance(3, 0.0, 8.0) - 2.0).abs() < 1e-15);
        assert!(SnowflakeSpace::new(1).is_err());
    }

    #[test]
    fn polynomial_constraints() {
        assert!(poly(&[0, 1]).check(2).is_ok());
        assert!(poly(&[1, 1]).check(2).is_err());
        assert!(poly(&[0, 0, 0, 1]).check(2).is_err());
        assert!(poly(&[0]).check(2).is_err());
        let p: Polynomial = serde_json::from_str(r#"[0, "1/2", -3]"#).unwrap();
        assert_eq!(p.coeffs()[1], BigRational::new(1.into(), 2.into()));
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"[0,"1/2",-3]"#);
    }

    #[test]
    fn membership_examples() {
        let f = polynomial_filter(vec![0.0, 0.0], poly(&[0, 1]), 2, ArcMode::Graph).unwrap();
        assert!(f.contains(0.5, 0.1, &[0.2, 0.2]));
        assert!(!f.contains(0.5, 0.5, &[-0.01, 0.0]));
        assert!(!f.contains(0.5, 0.5, &[0.0, 0.0]));
        assert!(f.generator_contains(0.0, 0.5, &[0.1, 0.1]).is_err());
    }

    #[test]
    fn bracket_contains_numeric_distance() {
        let f = polynomial_filter(vec![0.0, 0.0], poly(&[0, 1, -2]), 2, ArcMode::Graph).unwrap();
        for y in [[0.01, 0.3], [0.2, -0.1], [1e-6, 1e-6], [0.05, 0.05]] {
            let (lo, hi) = f.arc_bracket(0.125, &y, 1e-6);
            let num = arc_distance(&PolyMetric(&f), |t| f.arc_point(t), 0.0, 0.125, &y).distance;
            assert!(lo <= num + 1e-12 && lo >= (1.0 - 1e-6) * hi - 1e-15, "{y:?}: {lo} {num} {hi}");
        }
    }

    #[test]
    fn equal_polynomials() {
        let p = poly(&[0, 1]);
        assert_eq!(separate_polynomials(&p, &p, 2, ArcMode::Graph, &SeparationConfig::default()).unwrap(), Separation::Equal);
    }

    /// Sign of the lowest coefficient below degree `m`, else the top coefficient.
    fn class(p: &Polynomial, m: u32) -> (usize, i8, Option<BigRational>) {
        let j = p.low_degree().unwrap();
        let c = &p.coeffs()[j];
        if j < m as usize {
            (0, if c.is_positive() { 1 } else { -1 }, None)
        } else {
            (1, 0, Some(c.clone()))
        }
    }

    #[test]
    fn separation_follows_leading_behaviour() {
        let cases = [
            (poly(&[0, 1]), poly(&[0, 1, 1]), 2),
            (poly(&[0, 1]), poly(&[0, 2]), 2),
            (poly(&[0, 1]), poly(&[0, -1]), 2),
            (poly(&[0, 0, 1]), poly(&[0, 0, 2]), 2),
            (poly(&[0, 1]), poly(&[0, 0, 1]), 2),
            (poly(&[0, 1]), poly(&[0, 0, 1]), 3),
            (poly(&[0, 0, 0, 1]), poly(&[0, 0, 0, -1]), 3),
            (poly(&[0, 0, 1]), poly(&[0, 0, -1]), 3),
        ];
        for (p1, p2, m) in cases {
            let s = separate_polynomials(&p1, &p2, m, ArcMode::Graph, &SeparationConfig::default()).unwrap();
            let expect = class(&p1, m) != class(&p2, m);
            assert_eq!(matches!(s, Separation::Separated(_)), expect, "{p1} vs {p2}, m = {m}");
            if let Separation::Separated(w) = s {
                assert!(verify_separation(&p1, &p2, m, ArcMode::Graph, &w).unwrap());
            }
        }
    }

    #[test]
    fn top_degree_ratio() {
        let s = separate_polynomials(&poly(&[0, 0, 1]), &poly(&[0, 0, 2]), 2, ArcMode::Graph, &SeparationConfig::default()).unwrap();
        let Separation::Separated(w) = s else { panic!("{s:?}") };
        assert!(w.lambda > 0.1 && w.lambda < 0.2, "{}", w.lambda);
    }

    #[test]
    fn developments() {
        let t = poly(&[0, 1]);
        assert_eq!(development(&ScalarMap::Identity, 0.3, &t, 2), vec![0.0, 1.0, 0.0]);
        assert_eq!(development(&ScalarMap::Affine { a: 2.0, b: 0.0 }, 0.0, &t, 2), vec![0.0, 2.0, 0.0]);
        assert_eq!(development(&ScalarMap::Poly { coeffs: vec![0.0, 1.0, 1.0] }, 0.0, &t, 2), vec![0.0, 1.0, 1.0]);
        // exp at 0 with p = t + t²: e^{t+t²} − 1 = t + (3/2)t² + ...
        let d = development(&ScalarMap::Exp, 0.0, &poly(&[0, 1, 1]), 2);
        assert!((d[1] - 1.0).abs() < 1e-15 && (d[2] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn derivability_examples() {
        for (f, x) in [
            (ScalarMap::Identity, 0.0),
            (ScalarMap::Affine { a: 2.0, b: 1.0 }, 0.5),
            (ScalarMap::Poly { coeffs: vec![0.0, 1.0, 1.0] }, 0.0),
            (ScalarMap::Sin, 0.3),
        ] {
            let r = check_poly_derivable(&f, x, &poly(&[0, 1]), 2).unwrap();
            assert!(r.matches, "{f:?}: {r:?}");
        }
        assert!(matches!(
            check_poly_derivable(&ScalarMap::Zero, 0.0, &poly(&[0, 1]), 2),
            Err(SnowflakeError::TrivialDevelopment { .. })
        ));
    }

    #[test]
    fn graph_embedding_constants() {
        let g = graph_embed(&ScalarMap::Zero, 2, Axis::First, -1.0, 1.0, 50).unwrap();
        assert_eq!((g.lower, g.upper), (1.0, 1.0));
        let g = graph_embed(&ScalarMap::Identity, 2, Axis::First, -1.0, 1.0, 50).unwrap();
        assert!(g.lower >= 1.0 && g.upper.is_finite());
        let g = graph_embed(&ScalarMap::Sin, 2, Axis::First, -1.0, 1.0, 50).unwrap();
        assert!(g.lower >= 1.0 && g.upper < 3.0);
        // snowflake on the value axis: the lower constant collapses for f ≡ 0
        let g = graph_embed(&ScalarMap::Zero, 2, Axis::Second, -1.0, 1.0, 50).unwrap();
        assert!(g.lower < 0.2);
    }

    #[test]
    fn snowflake_dimension() {
        let radii: Vec<f64> = (0..8).map(|k| 0.3 * 0.6f64.powi(k)).collect();
        let d = box_counting_dimension(2, 200_000, &radii);
        assert!((d - 2.0).abs() < 0.2, "{d}");
    }
}
