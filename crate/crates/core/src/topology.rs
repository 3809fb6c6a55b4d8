//! Finite topological spaces stored as bit masks over point indices.
//!
//! A topology on `n` points is kept as the ascending list of its open sets,
//! each open set a `u64` mask. Two topologies are equal exactly when their
//! canonical mask lists are equal.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Mask = u64;

/// Hard cap on the ground set, one bit per point.
pub const MAX_POINTS: usize = 64;
/// Enumeration and preorder-based constructions iterate over `2^n` masks.
pub const MAX_PREORDER_POINTS: usize = 16;
/// Largest `n` accepted by [`enumerate_topologies`].
pub const MAX_ENUM_POINTS: usize = 4;

/// A set of point indices, printed as `{0,2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PointSet(pub Mask);

impl PointSet {
    pub fn indices(self) -> Vec<usize> {
        mask_indices(self.0)
    }
}

impl fmt::Display for PointSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in mask_indices(self.0).into_iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("point index {index} out of range for {n} points")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("{n} points exceeds the supported maximum of {max}")]
    TooManyPoints { n: usize, max: usize },
    #[error("the empty set and the full set must both be open")]
    MissingEmptyOrFull,
    #[error("not closed under union: {0} ∪ {1} is missing")]
    NotClosedUnderUnion(PointSet, PointSet),
    #[error("not closed under intersection: {0} ∩ {1} is missing")]
    NotClosedUnderIntersection(PointSet, PointSet),
    #[error("size limit exceeded: n = {n}, limit = {limit}")]
    SizeLimitExceeded { n: usize, limit: usize },
}

pub fn mask_indices(mut m: Mask) -> Vec<usize> {
    let mut out = Vec::with_capacity(m.count_ones() as usize);
    while m != 0 {
        let i = m.trailing_zeros() as usize;
        out.push(i);
        m &= m - 1;
    }
    out
}

pub fn full_mask(n: usize) -> Mask {
    if n >= 64 {
        Mask::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn is_subset(a: Mask, b: Mask) -> bool {
    a & !b == 0
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FiniteTopology {
    n: usize,
    opens: Vec<Mask>,
}

impl FiniteTopology {
    /// Validates a family of open masks and returns the canonical topology.
    ///
    /// Duplicates are dropped. The first failing closure pair is reported in
    /// canonical (ascending mask) order, union before intersection.
    pub fn from_masks(n: usize, family: &[Mask]) -> Result<Self, TopologyError> {
        if n > MAX_POINTS {
            return Err(TopologyError::TooManyPoints { n, max: MAX_POINTS });
        }
        let full = full_mask(n);
        for &m in family {
            if m & !full != 0 {
                let index = (m & !full).trailing_zeros() as usize;
                return Err(TopologyError::IndexOutOfRange { index, n });
            }
        }
        let opens: Vec<Mask> = family.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        if opens.binary_search(&0).is_err() {
            return Err(TopologyError::MissingEmptyOrFull);
        }
        for (i, &a) in opens.iter().enumerate() {
            for &b in &opens[i + 1..] {
                if opens.binary_search(&(a | b)).is_err() {
                    return Err(TopologyError::NotClosedUnderUnion(PointSet(a), PointSet(b)));
                }
                if opens.binary_search(&(a & b)).is_err() {
                    return Err(TopologyError::NotClosedUnderIntersection(PointSet(a), PointSet(b)));
                }
            }
        }
        if opens.binary_search(&full).is_err() {
            return Err(TopologyError::MissingEmptyOrFull);
        }
        Ok(Self { n, opens })
    }

    /// Builds the Alexandrov topology whose minimal neighbourhoods are `up`.
    ///
    /// `up[x]` must contain `x` and be closed under the induced preorder;
    /// the open sets are exactly the masks `S` with `up[x] ⊆ S` for all `x ∈ S`.
    pub fn from_minimal_neighborhoods(up: &[Mask]) -> Result<Self, TopologyError> {
        let n = up.len();
        if n > MAX_PREORDER_POINTS {
            return Err(TopologyError::SizeLimitExceeded { n, limit: MAX_PREORDER_POINTS });
        }
        let opens = (0..=full_mask(n))
            .filter(|&s| mask_indices(s).into_iter().all(|x| is_subset(up[x], s)))
            .collect();
        Ok(Self { n, opens })
    }

    pub fn discrete(n: usize) -> Self {
        assert!(n <= MAX_PREORDER_POINTS, "discrete topology limited to {MAX_PREORDER_POINTS} points");
        Self { n, opens: (0..=full_mask(n)).collect() }
    }

    pub fn indiscrete(n: usize) -> Self {
        let opens = if n == 0 { vec![0] } else { vec![0, full_mask(n)] };
        Self { n, opens }
    }

    /// Two points, `{1}` open and `{0}` not.
    pub fn sierpinski() -> Self {
        Self { n: 2, opens: vec![0b00, 0b10, 0b11] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn opens(&self) -> &[Mask] {
        &self.opens
    }

    pub fn num_opens(&self) -> usize {
        self.opens.len()
    }

    pub fn full(&self) -> Mask {
        full_mask(self.n)
    }

    pub fn index_of(&self, m: Mask) -> Option<usize> {
        self.opens.binary_search(&m).ok()
    }

    pub fn is_open(&self, m: Mask) -> bool {
        self.index_of(m).is_some()
    }

    pub fn full_index(&self) -> usize {
        self.opens.len() - 1
    }

    /// Smallest open set containing `x`.
    pub fn minimal_neighborhood(&self, x: usize) -> Mask {
        self.opens
            .iter()
            .filter(|&&d| d >> x & 1 == 1)
            .fold(self.full(), |acc, &d| acc & d)
    }

    /// Smallest open set containing every point of `s`.
    pub fn open_hull(&self, s: Mask) -> Mask {
        mask_indices(s).into_iter().fold(0, |acc, x| acc | self.minimal_neighborhood(x))
    }

    /// A pair of points with identical neighbourhood families, if any.
    pub fn t0_witness(&self) -> Option<(usize, usize)> {
        for x in 0..self.n {
            for y in x + 1..self.n {
                if self.opens.iter().all(|&d| (d >> x & 1) == (d >> y & 1)) {
                    return Some((x, y));
                }
            }
        }
        None
    }

    pub fn is_t0(&self) -> bool {
        self.t0_witness().is_none()
    }

    /// Opens as sorted index lists, the on-disk representation.
    pub fn opens_as_lists(&self) -> Vec<Vec<usize>> {
        self.opens.iter().map(|&m| mask_indices(m)).collect()
    }
}

impl fmt::Display for FiniteTopology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} opens=[", self.n)?;
        for (k, &m) in self.opens.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}", PointSet(m))?;
        }
        write!(f, "]")
    }
}

/// Checks a family of index lists against the topology axioms.
pub fn validate_topology(n: usize, family: &[Vec<usize>]) -> Result<FiniteTopology, TopologyError> {
    if n > MAX_POINTS {
        return Err(TopologyError::TooManyPoints { n, max: MAX_POINTS });
    }
    let mut masks = Vec::with_capacity(family.len());
    for set in family {
        let mut m = 0;
        for &i in set {
            if i >= n {
                return Err(TopologyError::IndexOutOfRange { index: i, n });
            }
            m |= 1 << i;
        }
        masks.push(m);
    }
    FiniteTopology::from_masks(n, &masks)
}

/// Every topology on `n ≤ 4` points, in canonical order.
///
/// Finite topologies correspond one-to-one with preorders, so this walks the
/// reflexive relations, keeps the transitive ones and reads off the up-sets.
pub fn enumerate_topologies(n: usize, t0_only: bool) -> Result<Vec<FiniteTopology>, TopologyError> {
    if n > MAX_ENUM_POINTS {
        return Err(TopologyError::SizeLimitExceeded { n, limit: MAX_ENUM_POINTS });
    }
    let off: Vec<(usize, usize)> = (0..n)
        .flat_map(|x| (0..n).filter(move |&y| y != x).map(move |y| (x, y)))
        .collect();
    let mut out = BTreeSet::new();
    for bits in 0u64..(1 << off.len()) {
        let mut up: Vec<Mask> = (0..n).map(|x| 1 << x).collect();
        for (k, &(x, y)) in off.iter().enumerate() {
            if bits >> k & 1 == 1 {
                up[x] |= 1 << y;
            }
        }
        let transitive = (0..n).all(|x| mask_indices(up[x]).into_iter().all(|y| is_subset(up[y], up[x])));
        if !transitive {
            continue;
        }
        let antisymmetric = off.iter().all(|&(x, y)| !(up[x] >> y & 1 == 1 && up[y] >> x & 1 == 1));
        if t0_only && !antisymmetric {
            continue;
        }
        out.insert(FiniteTopology::from_minimal_neighborhoods(&up)?);
    }
    Ok(out.into_iter().collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("image[{point}] = {image} is not a point of the target ({n} points)")]
    ImageOutOfRange { point: usize, image: usize, n: usize },
    #[error("image has length {got}, source has {expected} points")]
    LengthMismatch { got: usize, expected: usize },
    #[error("maps are not composable")]
    NotComposable,
}

/// A function between the point sets of two finite topologies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointMap {
    source: Arc<FiniteTopology>,
    target: Arc<FiniteTopology>,
    image: Vec<usize>,
}

impl PointMap {
    pub fn new(
        source: Arc<FiniteTopology>,
        target: Arc<FiniteTopology>,
        image: Vec<usize>,
    ) -> Result<Self, MapError> {
        if image.len() != source.n() {
            return Err(MapError::LengthMismatch { got: image.len(), expected: source.n() });
        }
        if let Some((point, &img)) = image.iter().enumerate().find(|(_, &i)| i >= target.n()) {
            return Err(MapError::ImageOutOfRange { point, image: img, n: target.n() });
        }
        Ok(Self { source, target, image })
    }

    pub fn identity(t: Arc<FiniteTopology>) -> Self {
        let image = (0..t.n()).collect();
        Self { source: t.clone(), target: t, image }
    }

    pub fn constant(source: Arc<FiniteTopology>, target: Arc<FiniteTopology>, point: usize) -> Result<Self, MapError> {
        let image = vec![point; source.n()];
        Self::new(source, target, image)
    }

    pub fn source(&self) -> &Arc<FiniteTopology> {
        &self.source
    }

    pub fn target(&self) -> &Arc<FiniteTopology> {
        &self.target
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    pub fn apply(&self, x: usize) -> usize {
        self.image[x]
    }

    pub fn preimage(&self, m: Mask) -> Mask {
        self.image
            .iter()
            .enumerate()
            .filter(|(_, &y)| m >> y & 1 == 1)
            .fold(0, |acc, (x, _)| acc | 1 << x)
    }

    pub fn image_of(&self, m: Mask) -> Mask {
        mask_indices(m).into_iter().fold(0, |acc, x| acc | 1 << self.image[x])
    }

    /// A target open whose preimage is not open in the source.
    pub fn discontinuity_witness(&self) -> Option<PointSet> {
        self.target
            .opens()
            .iter()
            .find(|&&d| !self.source.is_open(self.preimage(d)))
            .map(|&d| PointSet(d))
    }

    pub fn is_continuous(&self) -> bool {
        self.discontinuity_witness().is_none()
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &PointMap) -> Result<PointMap, MapError> {
        if *self.target != *next.source {
            return Err(MapError::NotComposable);
        }
        let image = self.image.iter().map(|&y| next.image[y]).collect();
        Ok(PointMap { source: self.source.clone(), target: next.target.clone(), image })
    }
}

/// All maps between two small spaces, continuous ones only.
pub fn continuous_maps(source: &Arc<FiniteTopology>, target: &Arc<FiniteTopology>) -> Vec<PointMap> {
    let (n, m) = (source.n(), target.n());
    if m == 0 {
        return if n == 0 { vec![PointMap::identity(source.clone())] } else { Vec::new() };
    }
    let total = m.pow(n as u32);
    (0..total)
        .filter_map(|mut code| {
            let image = (0..n)
                .map(|_| {
                    let v = code % m;
                    code /= m;
                    v
                })
                .collect();
            let f = PointMap::new(source.clone(), target.clone(), image).ok()?;
            f.is_continuous().then_some(f)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(n: usize, t0_only: bool) -> BTreeSet<FiniteTopology> {
        let subsets = 1usize << n;
        let mut out = BTreeSet::new();
        for fam in 0u64..(1u64 << subsets) {
            let masks: Vec<Mask> = (0..subsets as u64).filter(|&s| fam >> s & 1 == 1).collect();
            if let Ok(t) = FiniteTopology::from_masks(n, &masks) {
                if !t0_only || t.is_t0() {
                    out.insert(t);
                }
            }
        }
        out
    }

    #[test]
    fn sierpinski_validates() {
        let t = validate_topology(2, &[vec![], vec![1], vec![0, 1]]).unwrap();
        assert_eq!(t, FiniteTopology::sierpinski());
        assert!(t.is_t0());
    }

    #[test]
    fn missing_union_is_reported() {
        let err = validate_topology(2, &[vec![], vec![0], vec![1]]).unwrap_err();
        assert_eq!(err, TopologyError::NotClosedUnderUnion(PointSet(0b01), PointSet(0b10)));
    }

    #[test]
    fn missing_intersection_is_reported() {
        let err = validate_topology(3, &[vec![], vec![0, 1], vec![1, 2], vec![0, 1, 2]]).unwrap_err();
        assert_eq!(err, TopologyError::NotClosedUnderIntersection(PointSet(0b011), PointSet(0b110)));
    }

    #[test]
    fn power_set_is_discrete() {
        let family: Vec<Vec<usize>> = (0u64..8).map(mask_indices).collect();
        let t = validate_topology(3, &family).unwrap();
        assert_eq!(t, FiniteTopology::discrete(3));
        assert!(t.is_t0());
    }

    #[test]
    fn ingestion_errors() {
        assert_eq!(
            validate_topology(2, &[vec![], vec![2], vec![0, 1]]).unwrap_err(),
            TopologyError::IndexOutOfRange { index: 2, n: 2 }
        );
        assert_eq!(validate_topology(2, &[vec![1], vec![0, 1]]).unwrap_err(), TopologyError::MissingEmptyOrFull);
    }

    #[test]
    fn duplicates_are_dropped_and_validation_is_idempotent() {
        let t = validate_topology(2, &[vec![0, 1], vec![], vec![1], vec![1]]).unwrap();
        assert_eq!(t.num_opens(), 3);
        let again = validate_topology(2, &t.opens_as_lists()).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn t0_checks() {
        assert_eq!(FiniteTopology::indiscrete(2).t0_witness(), Some((0, 1)));
        assert!(FiniteTopology::discrete(3).is_t0());
        assert!(FiniteTopology::sierpinski().is_t0());
    }

    #[test]
    fn continuity_examples() {
        let s = Arc::new(FiniteTopology::sierpinski());
        assert!(PointMap::identity(s.clone()).is_continuous());
        for x in 0..2 {
            assert!(PointMap::constant(s.clone(), s.clone(), x).unwrap().is_continuous());
        }
        let swap = PointMap::new(s.clone(), s.clone(), vec![1, 0]).unwrap();
        assert_eq!(swap.discontinuity_witness(), Some(PointSet(0b10)));
        assert_eq!(swap.preimage(0b10), 0b01);
    }

    #[test]
    fn enumeration_counts() {
        let counts: Vec<(usize, usize)> = (1..=3)
            .map(|n| (enumerate_topologies(n, false).unwrap().len(), enumerate_topologies(n, true).unwrap().len()))
            .collect();
        assert_eq!(counts, vec![(1, 1), (4, 3), (29, 19)]);
    }

    #[test]
    fn enumeration_matches_brute_force_up_to_three_points() {
        for n in 0..=3 {
            for t0 in [false, true] {
                let fast: BTreeSet<_> = enumerate_topologies(n, t0).unwrap().into_iter().collect();
                assert_eq!(fast, brute_force(n, t0), "n = {n}, t0_only = {t0}");
            }
        }
    }

    #[test]
    fn enumeration_is_sorted_and_refuses_five_points() {
        let ts = enumerate_topologies(3, false).unwrap();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(
            enumerate_topologies(5, false).unwrap_err(),
            TopologyError::SizeLimitExceeded { n: 5, limit: 4 }
        );
    }

    #[test]
    fn open_hull_and_neighborhoods() {
        let s = FiniteTopology::sierpinski();
        assert_eq!(s.minimal_neighborhood(0), 0b11);
        assert_eq!(s.minimal_neighborhood(1), 0b10);
        assert_eq!(s.open_hull(0b01), 0b11);
    }

    #[test]
    fn composition_of_maps() {
        let s = Arc::new(FiniteTopology::sierpinski());
        let f = PointMap::new(s.clone(), s.clone(), vec![1, 1]).unwrap();
        let g = PointMap::new(s.clone(), s.clone(), vec![0, 1]).unwrap();
        assert_eq!(f.then(&g).unwrap().image(), &[1, 1]);
        assert_eq!(continuous_maps(&s, &s).len(), 3);
    }
}
