//! Filters on the square `X × X` of a finite space: relational composition,
//! the swap, uniformities and uniform (pre-)refinements.
//!
//! The pair `(x, y)` of an `n`-point space is the point `x * n + y` of the
//! product topology, so pair filters are ordinary [`IndicatorFilter`]s on
//! [`PairSpace::square`].

use std::sync::Arc;

use thiserror::Error;

use crate::filter::{
    check_filter_axioms, filter_leq, leq_witness, pushforward, FilterError, IndicatorFilter, Refinement,
};
use crate::topology::{mask_indices, FiniteTopology, Mask, PointMap, PointSet, TopologyError};

/// Squares are limited to `4 × 4 = 16` points.
pub const MAX_BASE_POINTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PairError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("pair filters live on different squares")]
    SpaceMismatch,
    #[error("cannot combine a finite pair filter with a generated one")]
    RepresentationMismatch,
    #[error("member {member} has an empty slice at point {point}")]
    EmptySlice { member: usize, point: usize },
}

/// A finite space together with its product square.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSpace {
    base: Arc<FiniteTopology>,
    square: Arc<FiniteTopology>,
}

/// The product topology on `t × t`, generated by rectangles `A × B`.
///
/// Built from minimal neighbourhoods: the smallest open set around `(x, y)`
/// is `U_x × U_y`.
pub fn product_topology(t: &FiniteTopology) -> Result<FiniteTopology, TopologyError> {
    let n = t.n();
    if n > MAX_BASE_POINTS {
        return Err(TopologyError::SizeLimitExceeded { n, limit: MAX_BASE_POINTS });
    }
    let up: Vec<Mask> = (0..n * n)
        .map(|p| rectangle(n, t.minimal_neighborhood(p / n), t.minimal_neighborhood(p % n)))
        .collect();
    FiniteTopology::from_minimal_neighborhoods(&up)
}

pub fn rectangle(n: usize, a: Mask, b: Mask) -> Mask {
    let mut out = 0;
    for x in mask_indices(a) {
        for y in mask_indices(b) {
            out |= 1 << (x * n + y);
        }
    }
    out
}

/// `{(x, z) : ∃y, (x, y) ∈ a, (y, z) ∈ b}`.
pub fn compose_sets(n: usize, a: Mask, b: Mask) -> Mask {
    let row = |m: Mask, x: usize| (m >> (x * n)) & ((1 << n) - 1);
    let mut out = 0;
    for x in 0..n {
        let mut reach = 0;
        for y in mask_indices(row(a, x)) {
            reach |= row(b, y);
        }
        out |= reach << (x * n);
    }
    out
}

pub fn transpose(n: usize, a: Mask) -> Mask {
    mask_indices(a).into_iter().fold(0, |acc, p| acc | 1 << ((p % n) * n + p / n))
}

pub fn diagonal(n: usize) -> Mask {
    (0..n).fold(0, |acc, x| acc | 1 << (x * n + x))
}

/// Encodes `(x, y)` pairs as a mask on the square.
pub fn relation(n: usize, pairs: &[(usize, usize)]) -> Result<Mask, TopologyError> {
    pairs.iter().try_fold(0, |acc, &(x, y)| {
        if x >= n || y >= n {
            Err(TopologyError::IndexOutOfRange { index: x.max(y), n })
        } else {
            Ok(acc | 1 << (x * n + y))
        }
    })
}

impl PairSpace {
    pub fn new(base: Arc<FiniteTopology>) -> Result<Arc<Self>, PairError> {
        let square = Arc::new(product_topology(&base)?);
        Ok(Arc::new(Self { base, square }))
    }

    pub fn base(&self) -> &Arc<FiniteTopology> {
        &self.base
    }

    pub fn square(&self) -> &Arc<FiniteTopology> {
        &self.square
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn diagonal(&self) -> Mask {
        diagonal(self.n())
    }

    /// The swap `σ(x, y) = (y, x)` as a self-map of the square.
    pub fn swap_map(&self) -> PointMap {
        let n = self.n();
        let image = (0..n * n).map(|p| (p % n) * n + p / n).collect();
        PointMap::new(self.square.clone(), self.square.clone(), image).expect("swap stays on the square")
    }
}

/// `f²(x, y) = (f(x), f(y))` between squares.
pub fn square_map(f: &PointMap, src: &PairSpace, dst: &PairSpace) -> Result<PointMap, PairError> {
    if **f.source() != *src.base || **f.target() != *dst.base {
        return Err(PairError::SpaceMismatch);
    }
    let (n, m) = (src.n(), dst.n());
    let image = (0..n * n).map(|p| f.apply(p / n) * m + f.apply(p % n)).collect();
    Ok(PointMap::new(src.square.clone(), dst.square.clone(), image).expect("indices in range"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairFilter {
    space: Arc<PairSpace>,
    filter: IndicatorFilter,
}

impl PairFilter {
    pub fn new(space: Arc<PairSpace>, filter: IndicatorFilter) -> Result<Self, PairError> {
        if filter.topology() != space.square() {
            return Err(PairError::SpaceMismatch);
        }
        Ok(Self { space, filter })
    }

    pub fn from_values(space: Arc<PairSpace>, values: Vec<bool>, proper: bool) -> Result<Self, PairError> {
        let filter = check_filter_axioms(space.square.clone(), values, proper)?;
        Ok(Self { space, filter })
    }

    /// The filter of open sets containing the relation `r`.
    pub fn principal(space: Arc<PairSpace>, r: Mask) -> Self {
        let filter = IndicatorFilter::principal(space.square.clone(), r);
        Self { space, filter }
    }

    pub fn space(&self) -> &Arc<PairSpace> {
        &self.space
    }

    pub fn filter(&self) -> &IndicatorFilter {
        &self.filter
    }

    pub fn value_of(&self, d: Mask) -> bool {
        self.filter.value_of(d)
    }

    pub fn support(&self) -> Vec<Mask> {
        self.filter.support()
    }

    pub fn kernel(&self) -> Mask {
        self.filter.kernel()
    }

    fn same_space(&self, other: &Self) -> Result<(), PairError> {
        if self.space == other.space {
            Ok(())
        } else {
            Err(PairError::SpaceMismatch)
        }
    }

    pub fn leq(&self, other: &Self) -> Result<bool, PairError> {
        self.same_space(other)?;
        Ok(filter_leq(&self.filter, &other.filter)?)
    }
}

/// `∘(Δ(X))`: value 1 exactly on open sets containing the diagonal.
pub fn diagonal_filter(space: &Arc<PairSpace>) -> PairFilter {
    PairFilter::principal(space.clone(), space.diagonal())
}

/// `μ∘ν(D) = 1` iff some `E, F` with `μ(E) = ν(F) = 1` have `E∘F ⊆ D`.
///
/// Composition of sets is monotone, so the smallest choice is the pair of
/// kernels and the result is principal on the open hull of their composite.
pub fn compose_filters(mu: &PairFilter, nu: &PairFilter) -> Result<PairFilter, PairError> {
    mu.same_space(nu)?;
    let n = mu.space.n();
    let composite = compose_sets(n, mu.kernel(), nu.kernel());
    let hull = mu.space.square.open_hull(composite);
    Ok(PairFilter::principal(mu.space.clone(), hull))
}

pub fn swap_pushforward(mu: &PairFilter) -> PairFilter {
    let swapped = pushforward(&mu.space.swap_map(), &mu.filter).expect("the swap is a homeomorphism of the square");
    PairFilter { space: mu.space.clone(), filter: swapped }
}

/// Witness for a failed half-composition: a member `D` with no `E`, `E∘E ⊆ D`.
pub fn half_composition_witness(mu: &PairFilter) -> Option<PointSet> {
    let n = mu.space.n();
    let mut support = mu.support();
    support.sort_by_key(|d| d.count_ones());
    support
        .iter()
        .find(|&&d| !support.iter().any(|&e| compose_sets(n, e, e) & !d == 0))
        .map(|&d| PointSet(d))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UniformityReport {
    /// (a) fails at this open set of the square.
    pub finer_than_diagonal: Option<PointSet>,
    /// (b) fails for this member.
    pub half_composition: Option<PointSet>,
    /// (c) fails at this open set.
    pub symmetric: Option<PointSet>,
    /// `Ω ≤ Ω∘Ω` fails at this open set. Implied by (b), reported apart.
    pub composite_finer: Option<PointSet>,
}

impl UniformityReport {
    pub fn is_uniformity(&self) -> bool {
        self.finer_than_diagonal.is_none() && self.half_composition.is_none() && self.symmetric.is_none()
    }
}

pub fn check_uniformity(omega: &PairFilter) -> UniformityReport {
    let diag = diagonal_filter(&omega.space);
    let swapped = swap_pushforward(omega);
    let composite = compose_filters(omega, omega).expect("same space");
    UniformityReport {
        finer_than_diagonal: leq_witness(diag.filter(), omega.filter()).expect("same square"),
        half_composition: half_composition_witness(omega),
        symmetric: first_difference(omega, &swapped),
        composite_finer: leq_witness(omega.filter(), composite.filter()).expect("same square"),
    }
}

fn first_difference(a: &PairFilter, b: &PairFilter) -> Option<PointSet> {
    let opens = a.space.square.opens();
    a.filter.values().iter().zip(b.filter.values()).position(|(x, y)| x != y).map(|i| PointSet(opens[i]))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UniformRefinementReport {
    /// Members not finer than Ω, with the open set where `μ ≥ Ω` fails.
    pub not_finer: Vec<(usize, PointSet)>,
    /// (a): members lacking half-composition.
    pub half_composition: Vec<(usize, PointSet)>,
    /// (b): members whose swap is not in the set.
    pub not_swap_closed: Vec<usize>,
}

impl UniformRefinementReport {
    pub fn is_pre_refinement(&self) -> bool {
        self.not_finer.is_empty()
    }

    pub fn is_refinement(&self) -> bool {
        self.is_pre_refinement() && self.half_composition.is_empty() && self.not_swap_closed.is_empty()
    }
}

pub fn check_uniform_refinement(members: &[PairFilter], omega: &PairFilter) -> Result<UniformRefinementReport, PairError> {
    let mut report = UniformRefinementReport::default();
    for (k, mu) in members.iter().enumerate() {
        mu.same_space(omega)?;
        if let Some(w) = leq_witness(omega.filter(), mu.filter())? {
            report.not_finer.push((k, w));
        }
        if let Some(w) = half_composition_witness(mu) {
            report.half_composition.push((k, w));
        }
        if !members.contains(&swap_pushforward(mu)) {
            report.not_swap_closed.push(k);
        }
    }
    Ok(report)
}

/// Slices every member at every point: `D_x = {y ≠ x : (x, y) ∈ D}`.
///
/// The sliced filter at `x` is generated by the slices of the support, so it
/// is principal on the open hull of the kernel's slice. An empty slice would
/// give the improper filter and is reported instead.
pub fn induced_refinement(members: &[PairFilter]) -> Result<Refinement, PairError> {
    let space = match members.first() {
        Some(mu) => mu.space.clone(),
        None => return Err(PairError::Filter(FilterError::SizeLimitExceeded { size: 0, limit: 0 })),
    };
    let n = space.n();
    let mut assignment = vec![Vec::new(); n];
    for (k, mu) in members.iter().enumerate() {
        mu.same_space(&members[0])?;
        let kernel = mu.kernel();
        for (x, slot) in assignment.iter_mut().enumerate() {
            let slice = ((kernel >> (x * n)) & ((1 << n) - 1)) & !(1 << x);
            if slice == 0 {
                return Err(PairError::EmptySlice { member: k, point: x });
            }
            slot.push(IndicatorFilter::principal(space.base.clone(), space.base.open_hull(slice)));
        }
    }
    Ok(Refinement::new(space.base.clone(), assignment)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DerivabilityWitness {
    /// `f²*μ` is not a member of the target set.
    ImageMissing { member: usize },
    /// A target member is not the image of any source member.
    NotHit { member: usize },
}

/// Set equality `{f²*μ : μ ∈ dom} = cod`.
pub fn check_uniform_derivable(
    f: &PointMap,
    dom: &[PairFilter],
    cod: &[PairFilter],
) -> Result<Option<DerivabilityWitness>, PairError> {
    let (Some(a), Some(b)) = (dom.first(), cod.first()) else {
        return Ok(match (dom.is_empty(), cod.is_empty()) {
            (true, false) => Some(DerivabilityWitness::NotHit { member: 0 }),
            (false, true) => Some(DerivabilityWitness::ImageMissing { member: 0 }),
            _ => None,
        });
    };
    if let Some(w) = f.discontinuity_witness() {
        return Err(FilterError::NotContinuous(w).into());
    }
    let f2 = square_map(f, &a.space, &b.space)?;
    let images: Vec<PairFilter> = dom
        .iter()
        .map(|mu| {
            mu.same_space(a)?;
            Ok(PairFilter { space: b.space.clone(), filter: pushforward(&f2, &mu.filter)? })
        })
        .collect::<Result<_, PairError>>()?;
    if let Some(member) = images.iter().position(|img| !cod.contains(img)) {
        return Ok(Some(DerivabilityWitness::ImageMissing { member }));
    }
    if let Some(member) = cod.iter().position(|c| !images.contains(c)) {
        return Ok(Some(DerivabilityWitness::NotHit { member }));
    }
    Ok(None)
}

/// Outcome of a commutation check. `Inconclusive` only arises from sampling.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Commutation<W> {
    Commute,
    Counterexample(W),
    Inconclusive { unresolved: usize, checked: usize },
}

/// `μ∘ν = ν∘μ` exactly; the counterexample is an open set where they differ.
pub fn check_commutation(mu: &PairFilter, nu: &PairFilter) -> Result<Commutation<PointSet>, PairError> {
    let a = compose_filters(mu, nu)?;
    let b = compose_filters(nu, mu)?;
    Ok(match first_difference(&a, &b) {
        None => Commutation::Commute,
        Some(d) => Commutation::Counterexample(d),
    })
}
