//! [0,1]-valued filters (class B), their convex combinations, and the
//! vertex set of the polytope they form on a small topology.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::filter::IndicatorFilter;
use crate::topology::{FiniteTopology, Mask, PointSet};

/// Axiom slack in float mode.
pub const FLOAT_TOL: f64 = 1e-12;
/// Vertex enumeration walks subsets of constraints; refuse beyond this.
pub const MAX_POLYTOPE_OPENS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GradedError {
    #[error("assignment has {got} values but the topology has {expected} open sets")]
    LengthMismatch { got: usize, expected: usize },
    #[error("value at open {0} is outside [0,1]")]
    OutOfRange(PointSet),
    #[error("axiom (a) violated: value on the full set is not 1")]
    AxiomA,
    #[error("axiom (b) violated: {0} ⊂ {1} but μ({0}) > μ({1})")]
    AxiomB(PointSet, PointSet),
    #[error("axiom (c) violated for {0} and {1}")]
    AxiomC(PointSet, PointSet),
    #[error("improper filter: μ(∅) > 0 while proper mode is on")]
    ImproperFilter,
    #[error("weights must be nonnegative and sum to 1")]
    WeightSumInvalid,
    #[error("filters live on different topologies")]
    TopologyMismatch,
    #[error("no filters to combine")]
    Empty,
    #[error("polytope too large: {0} open sets")]
    SizeLimitExceeded(usize),
}

/// Exact rationals or floats, never mixed inside one filter.
#[derive(Debug, Clone, PartialEq)]
pub enum Grades {
    Exact(Vec<BigRational>),
    Float(Vec<f64>),
}

impl Grades {
    pub fn len(&self) -> usize {
        match self {
            Grades::Exact(v) => v.len(),
            Grades::Float(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            Grades::Exact(v) => v.iter().map(|q| q.to_f64().unwrap_or(f64::NAN)).collect(),
            Grades::Float(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradedFilter {
    topology: Arc<FiniteTopology>,
    values: Grades,
}

impl GradedFilter {
    pub fn topology(&self) -> &Arc<FiniteTopology> {
        &self.topology
    }

    pub fn values(&self) -> &Grades {
        &self.values
    }

    pub fn from_indicator(mu: &IndicatorFilter) -> Self {
        let values = mu.values().iter().map(|&b| if b { BigRational::one() } else { BigRational::zero() }).collect();
        Self { topology: mu.topology().clone(), values: Grades::Exact(values) }
    }

    /// Sup-norm distance, the metric behind the uniform-convergence topology.
    pub fn sup_distance(&self, other: &Self) -> Result<f64, GradedError> {
        if self.topology != other.topology {
            return Err(GradedError::TopologyMismatch);
        }
        let (a, b) = (self.values.to_f64(), other.values.to_f64());
        Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
    }
}

trait Grade: Clone {
    fn g_zero() -> Self;
    fn g_one() -> Self;
    fn add(&self, other: &Self) -> Self;
    /// `self ≤ other` up to the mode's tolerance.
    fn le(&self, other: &Self) -> bool;
}

impl Grade for BigRational {
    fn g_zero() -> Self {
        Zero::zero()
    }
    fn g_one() -> Self {
        One::one()
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn le(&self, other: &Self) -> bool {
        self <= other
    }
}

impl Grade for f64 {
    fn g_zero() -> Self {
        0.0
    }
    fn g_one() -> Self {
        1.0
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn le(&self, other: &Self) -> bool {
        *self <= *other + FLOAT_TOL
    }
}

fn check_values<T: Grade>(t: &FiniteTopology, v: &[T], proper: bool) -> Result<(), GradedError> {
    let opens = t.opens();
    if v.len() != opens.len() {
        return Err(GradedError::LengthMismatch { got: v.len(), expected: opens.len() });
    }
    for (i, x) in v.iter().enumerate() {
        if !(T::g_zero().le(x) && x.le(&T::g_one())) {
            return Err(GradedError::OutOfRange(PointSet(opens[i])));
        }
    }
    let full = &v[t.full_index()];
    if !(T::g_one().le(full) && full.le(&T::g_one())) {
        return Err(GradedError::AxiomA);
    }
    for (i, &a) in opens.iter().enumerate() {
        for (j, &b) in opens.iter().enumerate() {
            if i != j && a & !b == 0 && !v[i].le(&v[j]) {
                return Err(GradedError::AxiomB(PointSet(a), PointSet(b)));
            }
        }
    }
    let at = |m: Mask| &v[t.index_of(m).expect("closed under ∪ and ∩")];
    for (i, &a) in opens.iter().enumerate() {
        for &b in &opens[i + 1..] {
            if !at(a).add(at(b)).le(&at(a | b).add(at(a & b))) {
                return Err(GradedError::AxiomC(PointSet(a), PointSet(b)));
            }
        }
    }
    if proper && !v[0].le(&T::g_zero()) {
        return Err(GradedError::ImproperFilter);
    }
    Ok(())
}

pub fn check_graded_axioms(topology: Arc<FiniteTopology>, values: Grades, proper: bool) -> Result<GradedFilter, GradedError> {
    match &values {
        Grades::Exact(v) => check_values(&topology, v, proper)?,
        Grades::Float(v) => check_values(&topology, v, proper)?,
    }
    Ok(GradedFilter { topology, values })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    Exact(Vec<BigRational>),
    Float(Vec<f64>),
}

/// Pointwise convex combination. Exact when every input is exact.
pub fn convex_combine(filters: &[GradedFilter], weights: &Weights, proper: bool) -> Result<GradedFilter, GradedError> {
    let first = filters.first().ok_or(GradedError::Empty)?;
    let topology = first.topology.clone();
    if filters.iter().any(|f| f.topology != topology) {
        return Err(GradedError::TopologyMismatch);
    }
    let k = topology.num_opens();
    let all_exact = filters.iter().all(|f| matches!(f.values, Grades::Exact(_)));
    let values = match weights {
        Weights::Exact(w) if all_exact => {
            if w.len() != filters.len() || w.iter().any(|x| x.is_negative()) || w.iter().sum::<BigRational>() != One::one() {
                return Err(GradedError::WeightSumInvalid);
            }
            let mut acc = vec![BigRational::zero(); k];
            for (f, wi) in filters.iter().zip(w) {
                let Grades::Exact(v) = &f.values else { unreachable!() };
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += wi * x;
                }
            }
            Grades::Exact(acc)
        }
        _ => {
            let w: Vec<f64> = match weights {
                Weights::Exact(w) => w.iter().map(|q| q.to_f64().unwrap_or(f64::NAN)).collect(),
                Weights::Float(w) => w.clone(),
            };
            if w.len() != filters.len() || w.iter().any(|&x| !(x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > FLOAT_TOL {
                return Err(GradedError::WeightSumInvalid);
            }
            let mut acc = vec![0.0; k];
            for (f, wi) in filters.iter().zip(&w) {
                for (a, x) in acc.iter_mut().zip(f.values.to_f64()) {
                    *a += wi * x;
                }
            }
            Grades::Float(acc)
        }
    };
    check_graded_axioms(topology, values, proper)
}

/// Linear constraint `row · v ≥ rhs`, or `= rhs` when `equality`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Constraint {
    row: Vec<i64>,
    rhs: i64,
    equality: bool,
}

fn polytope_constraints(t: &FiniteTopology, proper: bool) -> Vec<Constraint> {
    let opens = t.opens();
    let k = opens.len();
    let unit = |i: usize, s: i64| {
        let mut r = vec![0; k];
        r[i] = s;
        r
    };
    let mut cs = vec![Constraint { row: unit(k - 1, 1), rhs: 1, equality: true }];
    if proper {
        cs.push(Constraint { row: unit(0, 1), rhs: 0, equality: true });
    }
    for i in 0..k {
        cs.push(Constraint { row: unit(i, 1), rhs: 0, equality: false });
        cs.push(Constraint { row: unit(i, -1), rhs: -1, equality: false });
    }
    for (i, &a) in opens.iter().enumerate() {
        for (j, &b) in opens.iter().enumerate() {
            if i != j && a & !b == 0 {
                let mut r = vec![0; k];
                r[j] += 1;
                r[i] -= 1;
                cs.push(Constraint { row: r, rhs: 0, equality: false });
            }
            if i < j {
                let mut r = vec![0; k];
                r[t.index_of(a | b).unwrap()] += 1;
                r[t.index_of(a & b).unwrap()] += 1;
                r[i] -= 1;
                r[j] -= 1;
                if r.iter().any(|&x| x != 0) {
                    cs.push(Constraint { row: r, rhs: 0, equality: false });
                }
            }
        }
    }
    cs.sort();
    cs.dedup();
    cs
}

fn solve_exact(rows: &[&Constraint], k: usize) -> Option<Vec<BigRational>> {
    let q = |x: i64| BigRational::from_integer(BigInt::from(x));
    let mut m: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|c| c.row.iter().map(|&x| q(x)).chain(std::iter::once(q(c.rhs))).collect())
        .collect();
    for col in 0..k {
        let pivot = (col..m.len()).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, pivot);
        let p = m[col][col].clone();
        for x in m[col].iter_mut() {
            *x /= p.clone();
        }
        for r in 0..m.len() {
            if r != col && !m[r][col].is_zero() {
                let factor = m[r][col].clone();
                for c in 0..=k {
                    let delta = &factor * &m[col][c];
                    m[r][c] -= delta;
                }
            }
        }
    }
    Some(m.iter().take(k).map(|row| row[k].clone()).collect())
}

/// Vertices of `{v ∈ [0,1]^opens : (a), (b), (c)}`, plus `v(∅) = 0` when proper.
///
/// Each vertex is the unique solution of `k` linearly independent tight
/// constraints; all such subsystems are solved in exact arithmetic and the
/// feasible solutions kept. Output is sorted and deduplicated.
pub fn b_polytope_vertices(t: &FiniteTopology, proper: bool) -> Result<Vec<Vec<BigRational>>, GradedError> {
    let k = t.num_opens();
    if k > MAX_POLYTOPE_OPENS {
        return Err(GradedError::SizeLimitExceeded(k));
    }
    let cs = polytope_constraints(t, proper);
    let (eqs, ineqs): (Vec<&Constraint>, Vec<&Constraint>) = cs.iter().partition(|c| c.equality);
    let need = k.saturating_sub(eqs.len());
    let feasible = |v: &[BigRational]| {
        cs.iter().all(|c| {
            let lhs: BigRational = c.row.iter().zip(v).map(|(&a, x)| x * BigRational::from_integer(BigInt::from(a))).sum();
            let rhs = BigRational::from_integer(BigInt::from(c.rhs));
            if c.equality {
                lhs == rhs
            } else {
                lhs >= rhs
            }
        })
    };
    let mut out = Vec::new();
    let mut chosen = Vec::with_capacity(need);
    subsets(&ineqs, need, 0, &mut chosen, &mut |pick: &[&Constraint]| {
        let rows: Vec<&Constraint> = eqs.iter().copied().chain(pick.iter().copied()).collect();
        if let Some(v) = solve_exact(&rows, k) {
            if feasible(&v) {
                out.push(v);
            }
        }
    });
    out.sort();
    out.dedup();
    Ok(out)
}

fn subsets<'a, F: FnMut(&[&'a Constraint])>(
    pool: &[&'a Constraint],
    need: usize,
    start: usize,
    chosen: &mut Vec<&'a Constraint>,
    visit: &mut F,
) {
    if chosen.len() == need {
        visit(chosen);
        return;
    }
    for i in start..pool.len() {
        if pool.len() - i < need - chosen.len() {
            break;
        }
        chosen.push(pool[i]);
        subsets(pool, need, i + 1, chosen, visit);
        chosen.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{enumerate_filters, point_filter};
    use crate::topology::enumerate_topologies;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn weights_one_zero_return_first() {
        let s = Arc::new(FiniteTopology::sierpinski());
        let a = GradedFilter::from_indicator(&point_filter(&s, 0).unwrap());
        let b = GradedFilter::from_indicator(&point_filter(&s, 1).unwrap());
        let c = convex_combine(&[a.clone(), b], &Weights::Exact(vec![r(1, 1), r(0, 1)]), true).unwrap();
        assert_eq!(c, a);
    }

    #[test]
    fn half_half_on_sierpinski() {
        let s = Arc::new(FiniteTopology::sierpinski());
        let a = GradedFilter::from_indicator(&point_filter(&s, 0).unwrap());
        let b = GradedFilter::from_indicator(&point_filter(&s, 1).unwrap());
        let c = convex_combine(&[a.clone(), b.clone()], &Weights::Exact(vec![r(1, 2), r(1, 2)]), true).unwrap();
        assert_eq!(c.values(), &Grades::Exact(vec![r(0, 1), r(1, 2), r(1, 1)]));
        let f = convex_combine(&[a, b], &Weights::Float(vec![0.5, 0.5]), true).unwrap();
        assert_eq!(f.values(), &Grades::Float(vec![0.0, 0.5, 1.0]));
    }

    #[test]
    fn thirds_on_discrete_three() {
        let d = Arc::new(FiniteTopology::discrete(3));
        let fs: Vec<_> = (0..3).map(|x| GradedFilter::from_indicator(&point_filter(&d, x).unwrap())).collect();
        let c = convex_combine(&fs, &Weights::Exact(vec![r(1, 3); 3]), true).unwrap();
        let Grades::Exact(v) = c.values() else { panic!() };
        assert_eq!(v[d.index_of(0b011).unwrap()], r(2, 3));
    }

    #[test]
    fn invalid_weights() {
        let s = Arc::new(FiniteTopology::sierpinski());
        let a = GradedFilter::from_indicator(&point_filter(&s, 0).unwrap());
        assert_eq!(
            convex_combine(&[a.clone(), a.clone()], &Weights::Exact(vec![r(1, 2), r(1, 3)]), true),
            Err(GradedError::WeightSumInvalid)
        );
        assert_eq!(
            convex_combine(&[a.clone(), a.clone()], &Weights::Float(vec![1.5, -0.5]), true),
            Err(GradedError::WeightSumInvalid)
        );
        let d = Arc::new(FiniteTopology::discrete(2));
        let b = GradedFilter::from_indicator(&point_filter(&d, 0).unwrap());
        assert_eq!(
            convex_combine(&[a, b], &Weights::Float(vec![0.5, 0.5]), true),
            Err(GradedError::TopologyMismatch)
        );
    }

    #[test]
    fn graded_axiom_violations() {
        let s = Arc::new(FiniteTopology::sierpinski());
        assert_eq!(
            check_graded_axioms(s.clone(), Grades::Float(vec![0.0, 0.7, 0.9]), true),
            Err(GradedError::AxiomA)
        );
        assert_eq!(
            check_graded_axioms(s.clone(), Grades::Float(vec![0.3, 0.2, 1.0]), false),
            Err(GradedError::AxiomB(PointSet(0), PointSet(0b10)))
        );
        let d = Arc::new(FiniteTopology::discrete(2));
        assert_eq!(
            check_graded_axioms(d, Grades::Exact(vec![r(0, 1), r(2, 3), r(2, 3), r(1, 1)]), true),
            Err(GradedError::AxiomC(PointSet(0b01), PointSet(0b10)))
        );
    }

    #[test]
    fn sierpinski_vertices_are_the_proper_point_filters() {
        let s = Arc::new(FiniteTopology::sierpinski());
        let v = b_polytope_vertices(&s, true).unwrap();
        assert_eq!(v, vec![vec![r(0, 1), r(0, 1), r(1, 1)], vec![r(0, 1), r(1, 1), r(1, 1)]]);
    }

    #[test]
    fn vertices_match_a_filters_on_two_point_spaces() {
        for t in enumerate_topologies(2, false).unwrap() {
            let t = Arc::new(t);
            for proper in [true, false] {
                let verts = b_polytope_vertices(&t, proper).unwrap();
                let mut a: Vec<Vec<BigRational>> = enumerate_filters(&t, proper)
                    .unwrap()
                    .iter()
                    .map(|f| f.values().iter().map(|&b| if b { r(1, 1) } else { r(0, 1) }).collect())
                    .collect();
                a.sort();
                assert_eq!(verts, a, "{t} proper={proper}");
            }
        }
    }
}
