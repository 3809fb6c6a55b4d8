//! Filters on finite topologies as 0/1 functions on the open sets.
//!
//! A filter is stored as one boolean per open set, aligned with the
//! canonical open order of its topology. On a finite space the support of a
//! filter is closed under intersection, so every filter has a smallest
//! support member (its *kernel*) and is determined by it.

use std::cmp::Ordering;
use std::sync::Arc;

use thiserror::Error;

use crate::topology::{FiniteTopology, Mask, PointMap, PointSet};

/// Enumeration of filter universes is refused above this many open sets.
pub const MAX_FILTER_OPENS: usize = 20;
/// τᵉ subsets are bit masks over the universe.
pub const MAX_UNIVERSE: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FilterError {
    #[error("assignment has {got} values but the topology has {expected} open sets")]
    LengthMismatch { got: usize, expected: usize },
    #[error("axiom (a) violated: the full set has value 0")]
    AxiomA,
    #[error("axiom (b) violated: {0} ⊂ {1} but μ({0}) > μ({1})")]
    AxiomB(PointSet, PointSet),
    #[error("axiom (c) violated for {0} and {1}")]
    AxiomC(PointSet, PointSet),
    #[error("improper filter: μ(∅) = 1 while proper mode is on")]
    ImproperFilter,
    #[error("filters live on different topologies")]
    TopologyMismatch,
    #[error("map is not continuous: preimage of {0} is not open")]
    NotContinuous(PointSet),
    #[error("point index {index} out of range for {n} points")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("size limit exceeded: {size} > {limit}")]
    SizeLimitExceeded { size: usize, limit: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndicatorFilter {
    topology: Arc<FiniteTopology>,
    values: Vec<bool>,
}

impl PartialOrd for IndicatorFilter {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Canonical order: topology first, then the value table read as a bit string.
impl Ord for IndicatorFilter {
    fn cmp(&self, other: &Self) -> Ordering {
        self.topology.cmp(&other.topology).then_with(|| self.values.cmp(&other.values))
    }
}

impl IndicatorFilter {
    pub fn topology(&self) -> &Arc<FiniteTopology> {
        &self.topology
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    /// Value on the open set at canonical position `i`.
    pub fn at(&self, i: usize) -> bool {
        self.values[i]
    }

    /// Value on an open mask. Panics if `d` is not open.
    pub fn value_of(&self, d: Mask) -> bool {
        let i = self.topology.index_of(d).expect("mask is not an open set");
        self.values[i]
    }

    pub fn is_proper(&self) -> bool {
        !self.values[0]
    }

    /// The smallest open set of value 1.
    pub fn kernel(&self) -> Mask {
        self.support().into_iter().fold(self.topology.full(), |acc, d| acc & d)
    }

    /// The filter whose support is every open set containing `k`.
    pub fn principal(topology: Arc<FiniteTopology>, k: Mask) -> Self {
        let values = topology.opens().iter().map(|&d| k & !d == 0).collect();
        Self { topology, values }
    }

    pub fn support(&self) -> Vec<Mask> {
        support(self)
    }
}

/// Validates a 0/1 assignment against axioms (a), (b), (c) in that order,
/// then against properness when `proper` is set.
pub fn check_filter_axioms(
    topology: Arc<FiniteTopology>,
    values: Vec<bool>,
    proper: bool,
) -> Result<IndicatorFilter, FilterError> {
    let opens = topology.opens();
    if values.len() != opens.len() {
        return Err(FilterError::LengthMismatch { got: values.len(), expected: opens.len() });
    }
    if !values[topology.full_index()] {
        return Err(FilterError::AxiomA);
    }
    let kernel = opens
        .iter()
        .zip(&values)
        .filter(|(_, &v)| v)
        .fold(topology.full(), |acc, (&d, _)| acc & d);
    let principal = opens.iter().zip(&values).all(|(&d, &v)| v == (kernel & !d == 0));
    if !principal {
        return Err(first_violation(&topology, &values));
    }
    if proper && values[0] {
        return Err(FilterError::ImproperFilter);
    }
    Ok(IndicatorFilter { topology, values })
}

fn first_violation(topology: &FiniteTopology, values: &[bool]) -> FilterError {
    let opens = topology.opens();
    for (i, &a) in opens.iter().enumerate() {
        for (j, &b) in opens.iter().enumerate() {
            if a != b && a & !b == 0 && values[i] && !values[j] {
                return FilterError::AxiomB(PointSet(a), PointSet(b));
            }
        }
    }
    let val = |m: Mask| values[topology.index_of(m).expect("topology closed under ∪ and ∩")] as u8;
    for (i, &a) in opens.iter().enumerate() {
        for &b in &opens[i + 1..] {
            if val(a | b) + val(a & b) < val(a) + val(b) {
                return FilterError::AxiomC(PointSet(a), PointSet(b));
            }
        }
    }
    unreachable!("a monotone, supermodular 0/1 assignment has a principal support")
}

/// The filter of open neighbourhoods of `x`.
pub fn point_filter(topology: &Arc<FiniteTopology>, x: usize) -> Result<IndicatorFilter, FilterError> {
    if x >= topology.n() {
        return Err(FilterError::IndexOutOfRange { index: x, n: topology.n() });
    }
    Ok(IndicatorFilter::principal(topology.clone(), 1 << x))
}

pub fn support(mu: &IndicatorFilter) -> Vec<Mask> {
    mu.topology.opens().iter().zip(&mu.values).filter(|(_, &v)| v).map(|(&d, _)| d).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SupportViolation {
    MissingFull,
    NotUpwardClosed(PointSet, PointSet),
    NotIntersectionClosed(PointSet, PointSet),
}

/// Checks (a′) X ∈ V, (b′) upward closure inside the opens and (c′) closure
/// under pairwise intersection, directly on the support family.
pub fn check_support_properties(topology: &FiniteTopology, support: &[Mask]) -> Result<(), SupportViolation> {
    let member = |m: Mask| support.contains(&m);
    if !member(topology.full()) {
        return Err(SupportViolation::MissingFull);
    }
    for &a in support {
        for &b in topology.opens() {
            if a & !b == 0 && !member(b) {
                return Err(SupportViolation::NotUpwardClosed(PointSet(a), PointSet(b)));
            }
        }
        for &b in support {
            if !member(a & b) {
                return Err(SupportViolation::NotIntersectionClosed(PointSet(a), PointSet(b)));
            }
        }
    }
    Ok(())
}

/// `f*μ(A) = μ(f⁻¹(A))`.
pub fn pushforward(f: &PointMap, mu: &IndicatorFilter) -> Result<IndicatorFilter, FilterError> {
    if **f.source() != *mu.topology {
        return Err(FilterError::TopologyMismatch);
    }
    if let Some(w) = f.discontinuity_witness() {
        return Err(FilterError::NotContinuous(w));
    }
    let values = f.target().opens().iter().map(|&a| mu.value_of(f.preimage(a))).collect();
    Ok(IndicatorFilter { topology: f.target().clone(), values })
}

/// Every filter on `t`, in canonical order.
///
/// Filters are read off their kernels: one per open set, excluding the
/// empty kernel in proper mode.
pub fn enumerate_filters(t: &Arc<FiniteTopology>, proper: bool) -> Result<Vec<IndicatorFilter>, FilterError> {
    if t.num_opens() > MAX_FILTER_OPENS {
        return Err(FilterError::SizeLimitExceeded { size: t.num_opens(), limit: MAX_FILTER_OPENS });
    }
    let mut out: Vec<_> = t
        .opens()
        .iter()
        .filter(|&&k| !(proper && k == 0))
        .map(|&k| IndicatorFilter::principal(t.clone(), k))
        .collect();
    out.sort();
    Ok(out)
}

/// First open set where `μ(D) > ν(D)`, i.e. a witness that `μ ≤ ν` fails.
pub fn leq_witness(mu: &IndicatorFilter, nu: &IndicatorFilter) -> Result<Option<PointSet>, FilterError> {
    if mu.topology != nu.topology {
        return Err(FilterError::TopologyMismatch);
    }
    Ok(mu
        .values
        .iter()
        .zip(&nu.values)
        .position(|(&a, &b)| a && !b)
        .map(|i| PointSet(mu.topology.opens()[i])))
}

/// `μ ≤ ν` pointwise: ν is finer.
pub fn filter_leq(mu: &IndicatorFilter, nu: &IndicatorFilter) -> Result<bool, FilterError> {
    Ok(leq_witness(mu, nu)?.is_none())
}

/// The filter space A(τ) with its τᵉ topology, subsets encoded as bit masks.
#[derive(Debug, Clone)]
pub struct FilterUniverse {
    topology: Arc<FiniteTopology>,
    filters: Vec<IndicatorFilter>,
    /// `basis[j]`: filters taking value 1 on the j-th open set.
    basis: Vec<u64>,
}

impl FilterUniverse {
    pub fn new(topology: Arc<FiniteTopology>, proper: bool) -> Result<Self, FilterError> {
        let filters = enumerate_filters(&topology, proper)?;
        Self::from_filters(topology, filters)
    }

    pub fn from_filters(topology: Arc<FiniteTopology>, filters: Vec<IndicatorFilter>) -> Result<Self, FilterError> {
        if filters.len() > MAX_UNIVERSE {
            return Err(FilterError::SizeLimitExceeded { size: filters.len(), limit: MAX_UNIVERSE });
        }
        if filters.iter().any(|f| *f.topology != *topology) {
            return Err(FilterError::TopologyMismatch);
        }
        let basis = (0..topology.num_opens())
            .map(|j| filters.iter().enumerate().filter(|(_, f)| f.at(j)).fold(0u64, |acc, (i, _)| acc | 1 << i))
            .collect();
        Ok(Self { topology, filters, basis })
    }

    pub fn topology(&self) -> &Arc<FiniteTopology> {
        &self.topology
    }

    pub fn filters(&self) -> &[IndicatorFilter] {
        &self.filters
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn all(&self) -> u64 {
        if self.filters.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.filters.len()) - 1
        }
    }

    pub fn position(&self, mu: &IndicatorFilter) -> Option<usize> {
        self.filters.iter().position(|f| f == mu)
    }

    /// Member of `v` with no witnessing open set, if any.
    pub fn tau_e_witness(&self, v: u64) -> Option<usize> {
        (0..self.filters.len()).filter(|&i| v >> i & 1 == 1).find(|&i| {
            !self
                .basis
                .iter()
                .enumerate()
                .any(|(j, &nbhd)| self.filters[i].at(j) && nbhd & !v == 0)
        })
    }

    pub fn is_open_in_tau_e(&self, v: u64) -> bool {
        self.tau_e_witness(v).is_none()
    }

    /// Every τᵉ-open subset, ascending.
    pub fn tau_e_opens(&self) -> Vec<u64> {
        (0..=self.all()).filter(|&v| self.is_open_in_tau_e(v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContinuityReport {
    pub target_opens_checked: usize,
    /// A τᵉ-open target set whose preimage under f* is not τᵉ-open.
    pub counterexample: Option<u64>,
}

/// Exhaustively checks that `f*` is continuous for the τᵉ topologies.
pub fn check_pushforward_continuity(f: &PointMap, proper: bool) -> Result<ContinuityReport, FilterError> {
    let src = FilterUniverse::new(f.source().clone(), proper)?;
    let dst = FilterUniverse::new(f.target().clone(), proper)?;
    let image: Vec<usize> = src
        .filters()
        .iter()
        .map(|mu| {
            let pushed = pushforward(f, mu)?;
            Ok(dst.position(&pushed).expect("pushforward of a filter lies in the target universe"))
        })
        .collect::<Result<_, FilterError>>()?;
    let opens = dst.tau_e_opens();
    let counterexample = opens.iter().copied().find(|&v| {
        let pre = image.iter().enumerate().filter(|(_, &j)| v >> j & 1 == 1).fold(0u64, |acc, (i, _)| acc | 1 << i);
        !src.is_open_in_tau_e(pre)
    });
    Ok(ContinuityReport { target_opens_checked: opens.len(), counterexample })
}

/// A map from points to finite sets of filters. Construction does not
/// validate; [`check_refinement`] does.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Refinement {
    topology: Arc<FiniteTopology>,
    assignment: Vec<Vec<IndicatorFilter>>,
}

impl Refinement {
    pub fn new(topology: Arc<FiniteTopology>, assignment: Vec<Vec<IndicatorFilter>>) -> Result<Self, FilterError> {
        if assignment.len() != topology.n() {
            return Err(FilterError::LengthMismatch { got: assignment.len(), expected: topology.n() });
        }
        if assignment.iter().flatten().any(|mu| *mu.topology != *topology) {
            return Err(FilterError::TopologyMismatch);
        }
        let mut assignment = assignment;
        for set in &mut assignment {
            set.sort();
            set.dedup();
        }
        Ok(Self { topology, assignment })
    }

    pub fn topology(&self) -> &Arc<FiniteTopology> {
        &self.topology
    }

    pub fn at(&self, x: usize) -> &[IndicatorFilter] {
        &self.assignment[x]
    }

    pub fn assignment(&self) -> &[Vec<IndicatorFilter>] {
        &self.assignment
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RefinementViolation {
    #[error("space is not T0: points {0} and {1} are indistinguishable")]
    NotT0(usize, usize),
    #[error("point {point} has no assigned filter")]
    EmptyAssignment { point: usize },
    #[error("(a) fails at point {point}, member {member}: μ({open}) < ∘(x)({open})")]
    NotFiner { point: usize, member: usize, open: PointSet },
    #[error("(b) fails at point {point}, member {member}: μ equals ∘(x)")]
    NotStrict { point: usize, member: usize },
}

pub fn check_refinement(r: &Refinement) -> Result<(), RefinementViolation> {
    if let Some((x, y)) = r.topology.t0_witness() {
        return Err(RefinementViolation::NotT0(x, y));
    }
    for (x, members) in r.assignment.iter().enumerate() {
        if members.is_empty() {
            return Err(RefinementViolation::EmptyAssignment { point: x });
        }
        let px = IndicatorFilter::principal(r.topology.clone(), 1 << x);
        for (k, mu) in members.iter().enumerate() {
            if let Some(open) = leq_witness(&px, mu).expect("same topology") {
                return Err(RefinementViolation::NotFiner { point: x, member: k, open });
            }
            if *mu == px {
                return Err(RefinementViolation::NotStrict { point: x, member: k });
            }
        }
    }
    Ok(())
}

/// Filters strictly finer than `∘(x)`: the admissible members of `∂(x)`.
pub fn refinement_candidates(t: &Arc<FiniteTopology>, x: usize, proper: bool) -> Result<Vec<IndicatorFilter>, FilterError> {
    let px = point_filter(t, x)?;
    Ok(enumerate_filters(t, proper)?
        .into_iter()
        .filter(|mu| *mu != px && filter_leq(&px, mu).expect("same topology"))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefinementSearch {
    pub candidates: Vec<Vec<IndicatorFilter>>,
    /// Points with no admissible member; a refinement exists iff empty.
    pub blocked: Vec<usize>,
}

impl RefinementSearch {
    pub fn admits_refinement(&self) -> bool {
        self.blocked.is_empty()
    }

    /// The largest refinement, when one exists.
    pub fn maximal(&self, t: &Arc<FiniteTopology>) -> Option<Refinement> {
        self.admits_refinement()
            .then(|| Refinement::new(t.clone(), self.candidates.clone()).expect("candidates live on t"))
    }
}

pub fn search_refinement(t: &Arc<FiniteTopology>, proper: bool) -> Result<RefinementSearch, FilterError> {
    let candidates: Vec<_> = (0..t.n()).map(|x| refinement_candidates(t, x, proper)).collect::<Result<_, _>>()?;
    let blocked = candidates.iter().enumerate().filter(|(_, c)| c.is_empty()).map(|(x, _)| x).collect();
    Ok(RefinementSearch { candidates, blocked })
}

/// `(x, k)` such that `f*μ ∉ r2(f(x))` for the k-th member μ of `r(x)`.
pub fn check_derivable(f: &PointMap, r: &Refinement, r2: &Refinement) -> Result<Option<(usize, usize)>, FilterError> {
    if let Some(w) = f.discontinuity_witness() {
        return Err(FilterError::NotContinuous(w));
    }
    if **f.source() != *r.topology || **f.target() != *r2.topology {
        return Err(FilterError::TopologyMismatch);
    }
    for (x, members) in r.assignment.iter().enumerate() {
        for (k, mu) in members.iter().enumerate() {
            let pushed = pushforward(f, mu)?;
            if !r2.at(f.apply(x)).contains(&pushed) {
                return Ok(Some((x, k)));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{continuous_maps, enumerate_topologies};

    fn sierpinski() -> Arc<FiniteTopology> {
        Arc::new(FiniteTopology::sierpinski())
    }

    /// Brute force over all 0/1 assignments, literal axioms.
    fn brute_filters(t: &Arc<FiniteTopology>, proper: bool) -> Vec<Vec<bool>> {
        let opens = t.opens();
        let k = opens.len();
        let idx = |m: Mask| t.index_of(m).unwrap();
        let mut out = Vec::new();
        for code in 0u64..(1 << k) {
            let v: Vec<bool> = (0..k).map(|i| code >> i & 1 == 1).collect();
            if !v[k - 1] || (proper && v[0]) {
                continue;
            }
            let mono = (0..k).all(|i| (0..k).all(|j| !(opens[i] & !opens[j] == 0 && v[i] && !v[j])));
            let supermod = (0..k).all(|i| {
                (0..k).all(|j| {
                    v[idx(opens[i] | opens[j])] as u8 + v[idx(opens[i] & opens[j])] as u8 >= v[i] as u8 + v[j] as u8
                })
            });
            if mono && supermod {
                out.push(v);
            }
        }
        out.sort();
        out
    }

    #[test]
    fn sierpinski_axiom_examples() {
        let s = sierpinski();
        let a = check_filter_axioms(s.clone(), vec![false, true, true], true).unwrap();
        assert_eq!(a, point_filter(&s, 1).unwrap());
        let b = check_filter_axioms(s.clone(), vec![false, false, true], true).unwrap();
        assert_eq!(b, point_filter(&s, 0).unwrap());
        assert_eq!(
            check_filter_axioms(s.clone(), vec![true, false, true], true).unwrap_err(),
            FilterError::AxiomB(PointSet(0), PointSet(0b10))
        );
        assert_eq!(check_filter_axioms(s.clone(), vec![false, true, false], true).unwrap_err(), FilterError::AxiomA);
        assert_eq!(
            check_filter_axioms(s.clone(), vec![true, true, true], true).unwrap_err(),
            FilterError::ImproperFilter
        );
        assert!(check_filter_axioms(s, vec![true, true, true], false).is_ok());
    }

    #[test]
    fn axiom_c_violation_on_discrete_two_points() {
        // μ({0}) = μ({1}) = 1 but μ(∅) = 0
        let d = Arc::new(FiniteTopology::discrete(2));
        assert_eq!(
            check_filter_axioms(d, vec![false, true, true, true], true).unwrap_err(),
            FilterError::AxiomC(PointSet(0b01), PointSet(0b10))
        );
    }

    #[test]
    fn point_filter_values() {
        let s = sierpinski();
        assert_eq!(point_filter(&s, 1).unwrap().values(), &[false, true, true]);
        assert_eq!(point_filter(&s, 0).unwrap().values(), &[false, false, true]);
        let ind = Arc::new(FiniteTopology::indiscrete(2));
        assert_eq!(point_filter(&ind, 0).unwrap(), point_filter(&ind, 1).unwrap());
        assert_eq!(point_filter(&s, 2).unwrap_err(), FilterError::IndexOutOfRange { index: 2, n: 2 });
    }

    #[test]
    fn support_examples() {
        let s = sierpinski();
        assert_eq!(support(&point_filter(&s, 1).unwrap()), vec![0b10, 0b11]);
        assert_eq!(support(&point_filter(&s, 0).unwrap()), vec![0b11]);
        let all = check_filter_axioms(s.clone(), vec![true; 3], false).unwrap();
        assert_eq!(support(&all), s.opens().to_vec());
        assert_eq!(check_support_properties(&s, &support(&all)), Ok(()));
    }

    #[test]
    fn enumeration_matches_brute_force() {
        for n in 0..=3 {
            for t in enumerate_topologies(n, false).unwrap() {
                let t = Arc::new(t);
                for proper in [true, false] {
                    let fast: Vec<Vec<bool>> =
                        enumerate_filters(&t, proper).unwrap().iter().map(|f| f.values().to_vec()).collect();
                    assert_eq!(fast, brute_filters(&t, proper), "{t}");
                }
            }
        }
    }

    #[test]
    fn enumeration_examples() {
        let s = sierpinski();
        let fs = enumerate_filters(&s, true).unwrap();
        assert_eq!(fs, vec![point_filter(&s, 0).unwrap(), point_filter(&s, 1).unwrap()]);
        // brute force decides: ∘(0), ∘(1) and the filter supported on X alone
        let d = Arc::new(FiniteTopology::discrete(2));
        let fs = enumerate_filters(&d, true).unwrap();
        assert_eq!(fs.len(), 3);
        assert!(fs.iter().any(|f| support(f) == vec![0b11]));
        let ind = Arc::new(FiniteTopology::indiscrete(2));
        assert_eq!(enumerate_filters(&ind, true).unwrap().len(), 1);
        let big = Arc::new(FiniteTopology::discrete(5));
        assert!(matches!(enumerate_filters(&big, true), Err(FilterError::SizeLimitExceeded { .. })));
    }

    #[test]
    fn pushforward_examples() {
        let s = sierpinski();
        let id = PointMap::identity(s.clone());
        for mu in enumerate_filters(&s, false).unwrap() {
            assert_eq!(pushforward(&id, &mu).unwrap(), mu);
        }
        let f = PointMap::new(s.clone(), s.clone(), vec![1, 1]).unwrap();
        assert_eq!(pushforward(&f, &point_filter(&s, 0).unwrap()).unwrap(), point_filter(&s, 1).unwrap());
        let swap = PointMap::new(s.clone(), s.clone(), vec![1, 0]).unwrap();
        assert_eq!(
            pushforward(&swap, &point_filter(&s, 0).unwrap()).unwrap_err(),
            FilterError::NotContinuous(PointSet(0b10))
        );
    }

    #[test]
    fn constant_maps_push_every_proper_filter_to_a_point() {
        for n in 1..=3 {
            for t in enumerate_topologies(n, false).unwrap() {
                let t = Arc::new(t);
                for x0 in 0..n {
                    let c = PointMap::constant(t.clone(), t.clone(), x0).unwrap();
                    for mu in enumerate_filters(&t, true).unwrap() {
                        assert_eq!(pushforward(&c, &mu).unwrap(), point_filter(&t, x0).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn order_examples() {
        let s = sierpinski();
        let (p0, p1) = (point_filter(&s, 0).unwrap(), point_filter(&s, 1).unwrap());
        assert!(filter_leq(&p0, &p0).unwrap());
        assert!(filter_leq(&p0, &p1).unwrap());
        assert_eq!(leq_witness(&p1, &p0).unwrap(), Some(PointSet(0b10)));
        let d = Arc::new(FiniteTopology::discrete(2));
        assert_eq!(filter_leq(&p0, &point_filter(&d, 0).unwrap()), Err(FilterError::TopologyMismatch));
    }

    #[test]
    fn tau_e_examples() {
        let s = sierpinski();
        let u = FilterUniverse::new(s.clone(), true).unwrap();
        assert!(u.is_open_in_tau_e(u.all()));
        assert!(u.is_open_in_tau_e(0));
        let i1 = u.position(&point_filter(&s, 1).unwrap()).unwrap();
        let i0 = u.position(&point_filter(&s, 0).unwrap()).unwrap();
        assert!(u.is_open_in_tau_e(1 << i1));
        assert_eq!(u.tau_e_witness(1 << i0), Some(i0));
    }

    #[test]
    fn pushforward_continuity_small_cases() {
        let s = sierpinski();
        let r = check_pushforward_continuity(&PointMap::identity(s.clone()), true).unwrap();
        assert_eq!(r.counterexample, None);
        assert_eq!(r.target_opens_checked, 3);
        for a in enumerate_topologies(3, true).unwrap() {
            let a = Arc::new(a);
            for b in enumerate_topologies(2, true).unwrap() {
                let b = Arc::new(b);
                for x in 0..2 {
                    let c = PointMap::constant(a.clone(), b.clone(), x).unwrap();
                    assert_eq!(check_pushforward_continuity(&c, true).unwrap().counterexample, None);
                }
            }
        }
    }

    #[test]
    fn refinement_checks() {
        let s = sierpinski();
        let p = |x| point_filter(&s, x).unwrap();
        let trivial = Refinement::new(s.clone(), vec![vec![p(0)], vec![p(1)]]).unwrap();
        assert_eq!(check_refinement(&trivial), Err(RefinementViolation::NotStrict { point: 0, member: 0 }));
        // ∘(1) is strictly finer than ∘(0), but nothing proper is finer than ∘(1)
        let partial = Refinement::new(s.clone(), vec![vec![p(1)], vec![]]).unwrap();
        assert_eq!(check_refinement(&partial), Err(RefinementViolation::EmptyAssignment { point: 1 }));
        let search = search_refinement(&s, true).unwrap();
        assert_eq!(search.candidates[0], vec![p(1)]);
        assert_eq!(search.blocked, vec![1]);
        let backwards = Refinement::new(s.clone(), vec![vec![p(1)], vec![p(0)]]).unwrap();
        assert_eq!(
            check_refinement(&backwards),
            Err(RefinementViolation::NotFiner { point: 1, member: 0, open: PointSet(0b10) })
        );
    }

    #[test]
    fn discrete_two_points_admit_no_proper_refinement() {
        let d = Arc::new(FiniteTopology::discrete(2));
        let search = search_refinement(&d, true).unwrap();
        assert_eq!(search.blocked, vec![0, 1]);
        for a in enumerate_filters(&d, true).unwrap() {
            for b in enumerate_filters(&d, true).unwrap() {
                let r = Refinement::new(d.clone(), vec![vec![a.clone()], vec![b.clone()]]).unwrap();
                assert!(check_refinement(&r).is_err());
            }
        }
    }

    #[test]
    fn improper_mode_always_admits_the_all_ones_refinement() {
        for t in enumerate_topologies(3, true).unwrap() {
            let t = Arc::new(t);
            let search = search_refinement(&t, false).unwrap();
            assert!(search.admits_refinement());
            assert_eq!(check_refinement(&search.maximal(&t).unwrap()), Ok(()));
        }
    }

    #[test]
    fn derivability() {
        let d = Arc::new(FiniteTopology::discrete(4));
        let kernel = |m| IndicatorFilter::principal(d.clone(), m);
        let r = Refinement::new(d.clone(), (0..4).map(|x| vec![kernel(1 << x | 1 << ((x + 1) % 4))]).collect()).unwrap();
        assert_eq!(check_derivable(&PointMap::identity(d.clone()), &r, &r).unwrap(), None);
        let swap = PointMap::new(d.clone(), d.clone(), vec![1, 0, 2, 3]).unwrap();
        assert_eq!(check_derivable(&swap, &r, &r).unwrap(), Some((0, 0)));
        // r2 built as the image of r makes f derivable by construction
        let mut image = vec![Vec::new(); 4];
        for x in 0..4 {
            for mu in r.at(x) {
                image[swap.apply(x)].push(pushforward(&swap, mu).unwrap());
            }
        }
        let r2 = Refinement::new(d.clone(), image).unwrap();
        assert_eq!(check_derivable(&swap, &r, &r2).unwrap(), None);
    }

    #[test]
    fn functoriality_on_small_spaces() {
        let spaces: Vec<Arc<FiniteTopology>> =
            (1..=2).flat_map(|n| enumerate_topologies(n, false).unwrap()).map(Arc::new).collect();
        for a in &spaces {
            for b in &spaces {
                for c in &spaces {
                    for f in continuous_maps(a, b) {
                        for g in continuous_maps(b, c) {
                            let gf = f.then(&g).unwrap();
                            for mu in enumerate_filters(a, false).unwrap() {
                                let lhs = pushforward(&gf, &mu).unwrap();
                                let rhs = pushforward(&g, &pushforward(&f, &mu).unwrap()).unwrap();
                                assert_eq!(lhs, rhs);
                            }
                        }
                    }
                }
            }
        }
    }
}
