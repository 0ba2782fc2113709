//! Finite metric spaces with exact arithmetic, doubling estimates and
//! separated decompositions.
//!
//! Distances are rational, or square roots of rationals for the Euclidean
//! metric; every comparison a certificate depends on is decided exactly, so
//! separation and diameter claims cannot flip on rounding.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::rational::Ratio;
use num::{Signed, Zero};

use crate::coloring::greedy_color;
use crate::error::{Error, Result};

pub type Rat = Ratio<i128>;

pub fn rat(numer: i128, denom: i128) -> Rat {
    Rat::new(numer, denom)
}

/// Exact distance value: a rational, or the square root of a rational for
/// Euclidean coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dist {
    Exact(Rat),
    SqrtOf(Rat),
}

impl Dist {
    pub fn zero() -> Dist {
        Dist::Exact(Rat::zero())
    }

    fn as_square(&self) -> Rat {
        match self {
            Dist::Exact(v) => v * v,
            Dist::SqrtOf(v) => *v,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Dist::Exact(v) => v.is_zero(),
            Dist::SqrtOf(v) => v.is_zero(),
        }
    }

    pub fn cmp_dist(&self, other: &Dist) -> std::cmp::Ordering {
        match (self, other) {
            (Dist::Exact(a), Dist::Exact(b)) => a.cmp(b),
            _ => self.as_square().cmp(&other.as_square()),
        }
    }

    pub fn lt(&self, other: &Dist) -> bool {
        self.cmp_dist(other) == std::cmp::Ordering::Less
    }

    pub fn le(&self, other: &Dist) -> bool {
        self.cmp_dist(other) != std::cmp::Ordering::Greater
    }

    pub fn gt(&self, other: &Dist) -> bool {
        self.cmp_dist(other) == std::cmp::Ordering::Greater
    }

    /// Exact decision of `self <= b + c` for nonnegative distances.
    pub fn triangle_le(&self, b: &Dist, c: &Dist) -> bool {
        match (self, b, c) {
            (Dist::Exact(a), Dist::Exact(b), Dist::Exact(c)) => *a <= b + c,
            _ => {
                // sqrt(A) <= sqrt(B) + sqrt(C)
                let a = self.as_square();
                let b = b.as_square();
                let c = c.as_square();
                let lhs = a - b - c;
                if lhs <= Rat::zero() {
                    true
                } else {
                    lhs * lhs <= Rat::from_integer(4) * b * c
                }
            }
        }
    }
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dist::Exact(v) => write!(f, "{v}"),
            Dist::SqrtOf(v) => write!(f, "sqrt({v})"),
        }
    }
}

/// Metric on coordinate tuples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoordMetric {
    L1,
    L2,
    Linf,
    /// Flat torus of unit circumference per axis, distances combined by
    /// maximum.  One axis gives the unit circle with normalized arc length.
    Torus,
    /// Weighted taxicab metric.
    WeightedL1(Vec<Rat>),
}

/// Point data backing a finite metric space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Geometry {
    Coords { metric: CoordMetric, coords: Vec<Vec<Rat>> },
    Table(Vec<Vec<Rat>>),
}

/// A finite set of identified points with an exactly computable metric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteMetricSpace {
    ids: Vec<u32>,
    geometry: Geometry,
}

/// A violation of the metric axioms found by exhaustive validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricViolation {
    NonZeroDiagonal { point: u32 },
    Asymmetric { left: u32, right: u32 },
    Triangle { a: u32, b: u32, c: u32 },
}

impl FiniteMetricSpace {
    /// Space from coordinates under a standard metric.  The metric axioms
    /// hold by the axioms of the underlying norm or quotient metric.
    pub fn from_coords(ids: Vec<u32>, metric: CoordMetric, coords: Vec<Vec<Rat>>) -> Result<Self> {
        if ids.len() != coords.len() {
            return Err(Error::precondition("one coordinate tuple per point"));
        }
        let dims: BTreeSet<usize> = coords.iter().map(|c| c.len()).collect();
        if dims.len() > 1 {
            return Err(Error::precondition("all points need the same dimension"));
        }
        if let CoordMetric::WeightedL1(weights) = &metric {
            if let Some(d) = dims.iter().next() {
                if weights.len() != *d {
                    return Err(Error::precondition("one weight per coordinate"));
                }
            }
        }
        Ok(FiniteMetricSpace { ids, geometry: Geometry::Coords { metric, coords } })
    }

    /// Space from an explicit distance table; the axioms are validated
    /// exhaustively and the first violation is an error.
    pub fn from_table(ids: Vec<u32>, table: Vec<Vec<Rat>>) -> Result<Self> {
        let n = ids.len();
        if table.len() != n || table.iter().any(|row| row.len() != n) {
            return Err(Error::precondition("square distance table required"));
        }
        let space = FiniteMetricSpace { ids, geometry: Geometry::Table(table) };
        if let Some(v) = space.validate_axioms() {
            return Err(Error::precondition(format!("metric axioms violated: {v:?}")));
        }
        Ok(space)
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn index_of(&self, id: u32) -> Result<usize> {
        self.ids
            .iter()
            .position(|&p| p == id)
            .ok_or(Error::UnknownPoint(id))
    }

    /// Distance between two points by index.
    pub fn dist_idx(&self, i: usize, j: usize) -> Dist {
        match &self.geometry {
            Geometry::Table(table) => Dist::Exact(table[i][j]),
            Geometry::Coords { metric, coords } => coord_dist(metric, &coords[i], &coords[j]),
        }
    }

    pub fn dist(&self, a: u32, b: u32) -> Result<Dist> {
        Ok(self.dist_idx(self.index_of(a)?, self.index_of(b)?))
    }

    /// Exhaustive check of the metric axioms; `None` means they hold.
    pub fn validate_axioms(&self) -> Option<MetricViolation> {
        let n = self.len();
        for i in 0..n {
            if !self.dist_idx(i, i).is_zero() {
                return Some(MetricViolation::NonZeroDiagonal { point: self.ids[i] });
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                if self.dist_idx(i, j) != self.dist_idx(j, i) {
                    return Some(MetricViolation::Asymmetric {
                        left: self.ids[i],
                        right: self.ids[j],
                    });
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d_ij = self.dist_idx(i, j);
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    if !d_ij.triangle_le(&self.dist_idx(i, k), &self.dist_idx(k, j)) {
                        return Some(MetricViolation::Triangle {
                            a: self.ids[i],
                            b: self.ids[k],
                            c: self.ids[j],
                        });
                    }
                }
            }
        }
        None
    }

    /// Point indices within `radius` of the point at `center` (closed or
    /// open ball).
    pub fn ball_indices(&self, center: usize, radius: &Rat, open: bool) -> Vec<usize> {
        let threshold = Dist::Exact(*radius);
        (0..self.len())
            .filter(|&i| {
                let d = self.dist_idx(center, i);
                if open {
                    d.lt(&threshold)
                } else {
                    d.le(&threshold)
                }
            })
            .collect()
    }

    /// Distance from a point to a set of indices.
    fn dist_to_set(&self, from: usize, set: &[usize]) -> Option<Dist> {
        set.iter()
            .map(|&i| self.dist_idx(from, i))
            .min_by(|a, b| a.cmp_dist(b))
    }
}

fn coord_dist(metric: &CoordMetric, a: &[Rat], b: &[Rat]) -> Dist {
    match metric {
        CoordMetric::L1 => Dist::Exact(
            a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<Rat>(),
        ),
        CoordMetric::L2 => Dist::SqrtOf(
            a.iter()
                .zip(b)
                .map(|(x, y)| {
                    let d = x - y;
                    d * d
                })
                .sum::<Rat>(),
        ),
        CoordMetric::Linf => Dist::Exact(
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .max()
                .unwrap_or_else(Rat::zero),
        ),
        CoordMetric::Torus => Dist::Exact(
            a.iter()
                .zip(b)
                .map(|(x, y)| {
                    let diff = (x - y).fract().abs();
                    let other = Rat::from_integer(1) - diff;
                    diff.min(other)
                })
                .max()
                .unwrap_or_else(Rat::zero),
        ),
        CoordMetric::WeightedL1(weights) => Dist::Exact(
            a.iter()
                .zip(b)
                .zip(weights)
                .map(|((x, y), w)| (x - y).abs() * w)
                .sum::<Rat>(),
        ),
    }
}

/// Greedy doubling estimate: for each scale and center, cover the closed
/// `2r`-ball greedily by closed `r`-balls centered at points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DoublingEstimate {
    pub per_scale: Vec<(Rat, u64)>,
    pub overall: u64,
}

pub fn doubling_estimate(space: &FiniteMetricSpace, scales: &[Rat]) -> Result<DoublingEstimate> {
    if scales.iter().any(|s| *s <= Rat::zero()) {
        return Err(Error::precondition("doubling scales must be positive"));
    }
    let mut per_scale = Vec::with_capacity(scales.len());
    let mut overall = 0u64;
    for scale in scales {
        let double = scale * Rat::from_integer(2);
        let mut worst = 0u64;
        for center in 0..space.len() {
            let target = space.ball_indices(center, &double, false);
            let mut covered = vec![false; space.len()];
            let mut count = 0u64;
            for &p in &target {
                if !covered[p] {
                    count += 1;
                    for q in space.ball_indices(p, scale, false) {
                        covered[q] = true;
                    }
                }
            }
            worst = worst.max(count);
        }
        per_scale.push((*scale, worst));
        overall = overall.max(worst);
    }
    Ok(DoublingEstimate { per_scale, overall })
}

/// Families of small, well-separated sets covering the space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub families: Vec<Vec<BTreeSet<u32>>>,
    pub epsilon: Rat,
    pub delta: Rat,
}

impl Decomposition {
    pub fn family_count(&self) -> usize {
        self.families.len()
    }

    pub fn set_count(&self) -> usize {
        self.families.iter().map(|f| f.len()).sum()
    }

    pub fn all_sets(&self) -> impl Iterator<Item = &BTreeSet<u32>> {
        self.families.iter().flatten()
    }
}

/// Certificate from exhaustively validating a decomposition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecompositionCheck {
    Certified { max_diameter: Dist, min_separation: Option<Dist> },
    Uncovered { point: u32 },
    DiameterTooBig { family: usize, set: usize, diameter: Dist },
    TooClose { family: usize, left: usize, right: usize, distance: Dist },
}

impl DecompositionCheck {
    pub fn is_certified(&self) -> bool {
        matches!(self, DecompositionCheck::Certified { .. })
    }
}

/// Exhaustive validation: coverage, strict diameter bound, strict
/// separation of distinct same-family sets.
pub fn validate_decomposition(
    space: &FiniteMetricSpace,
    dec: &Decomposition,
) -> Result<DecompositionCheck> {
    let covered: BTreeSet<u32> = dec.all_sets().flatten().copied().collect();
    for &id in space.ids() {
        if !covered.contains(&id) {
            return Ok(DecompositionCheck::Uncovered { point: id });
        }
    }
    let eps = Dist::Exact(dec.epsilon);
    let delta = Dist::Exact(dec.delta);
    let mut max_diameter = Dist::zero();
    let mut min_separation: Option<Dist> = None;
    for (f, family) in dec.families.iter().enumerate() {
        let indexed: Vec<Vec<usize>> = family
            .iter()
            .map(|set| set.iter().map(|&id| space.index_of(id)).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        for (s, set) in indexed.iter().enumerate() {
            for (i, &a) in set.iter().enumerate() {
                for &b in &set[i + 1..] {
                    let d = space.dist_idx(a, b);
                    if !d.lt(&eps) {
                        return Ok(DecompositionCheck::DiameterTooBig {
                            family: f,
                            set: s,
                            diameter: d,
                        });
                    }
                    if d.gt(&max_diameter) {
                        max_diameter = d;
                    }
                }
            }
        }
        for (s, set_a) in indexed.iter().enumerate() {
            for (t, set_b) in indexed.iter().enumerate().skip(s + 1) {
                for &a in set_a {
                    if let Some(d) = space.dist_to_set(a, set_b) {
                        if !d.gt(&delta) {
                            return Ok(DecompositionCheck::TooClose {
                                family: f,
                                left: s,
                                right: t,
                                distance: d,
                            });
                        }
                        if min_separation.as_ref().map_or(true, |m| d.lt(m)) {
                            min_separation = Some(d);
                        }
                    }
                }
            }
        }
    }
    Ok(DecompositionCheck::Certified { max_diameter, min_separation })
}

/// Output of the separated-decomposition construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CantorDecomposition {
    pub decomposition: Decomposition,
    pub check: DecompositionCheck,
    /// Doubling constant used for the family-count envelope.
    pub doubling: u64,
    /// `doubling ^ ceil(2 + log2(k + 3))`, saturating.
    pub family_bound: u128,
    /// Whether the constructed family count exceeded the envelope.
    pub bound_miss: bool,
}

/// Decompose a space into families of sets of diameter below `epsilon`
/// whose same-family members are more than `k * epsilon` apart.
///
/// Construction: greedy cover by open `epsilon/2`-balls in identifier
/// order, each point assigned to its first covering center; centers within
/// `(k+3) * epsilon` of each other are related and the relation is greedily
/// colored, so same-color sets inherit separation above `(k+2) * epsilon`.
pub fn cantor_decompose(
    space: &FiniteMetricSpace,
    epsilon: Rat,
    k: u64,
    doubling: Option<u64>,
) -> Result<CantorDecomposition> {
    if epsilon <= Rat::zero() {
        return Err(Error::precondition("epsilon must be positive"));
    }
    if space.is_empty() {
        return Err(Error::precondition("cannot decompose an empty space"));
    }
    let half = epsilon / Rat::from_integer(2);

    // greedy open-ball net in identifier order
    let mut centers: Vec<usize> = Vec::new();
    let mut assigned: Vec<Option<usize>> = vec![None; space.len()];
    for p in 0..space.len() {
        if assigned[p].is_none() {
            let c = centers.len();
            centers.push(p);
            for q in space.ball_indices(p, &half, true) {
                if assigned[q].is_none() {
                    assigned[q] = Some(c);
                }
            }
        }
    }
    let mut sets: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); centers.len()];
    for (p, slot) in assigned.iter().enumerate() {
        sets[slot.expect("net covers every point")].insert(space.ids()[p]);
    }

    // relation: centers at most (k+3) epsilon apart
    let window = Dist::Exact(epsilon * Rat::from_integer(k as i128 + 3));
    let related: Vec<Vec<bool>> = centers
        .iter()
        .map(|&a| {
            centers
                .iter()
                .map(|&b| space.dist_idx(a, b).le(&window))
                .collect()
        })
        .collect();
    let max_degree = (0..centers.len())
        .map(|i| (0..centers.len()).filter(|&j| j != i && related[i][j]).count())
        .max()
        .unwrap_or(0);
    let indices: Vec<usize> = (0..centers.len()).collect();
    let classes = greedy_color(&indices, |a, b| related[*a][*b], max_degree)?;

    let families: Vec<Vec<BTreeSet<u32>>> = classes
        .iter()
        .map(|class| class.iter().map(|&i| sets[i].clone()).collect())
        .collect();
    let delta = epsilon * Rat::from_integer(k as i128);
    let decomposition = Decomposition { families, epsilon, delta };

    let exponent = 2 + ceil_log2(k + 3);
    let doubling = match doubling {
        Some(m) => m,
        None => {
            let scales: Vec<Rat> = (0..=exponent)
                .map(|j| {
                    epsilon * Rat::from_integer(k as i128 + 3)
                        / Rat::from_integer(1i128 << j.min(100))
                })
                .collect();
            doubling_estimate(space, &scales)?.overall
        }
    };
    let family_bound = (doubling as u128).checked_pow(exponent).unwrap_or(u128::MAX);
    let nonempty = decomposition
        .families
        .iter()
        .filter(|f| !f.is_empty())
        .count() as u128;
    let bound_miss = nonempty > family_bound;

    let check = validate_decomposition(space, &decomposition)?;
    if !check.is_certified() {
        return Err(Error::precondition(format!(
            "separation infeasible: {check:?}"
        )));
    }
    Ok(CantorDecomposition { decomposition, check, doubling, family_bound, bound_miss })
}

pub fn ceil_log2(x: u64) -> u32 {
    debug_assert!(x >= 1);
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Truncation of a product space whose n-th coordinate ranges over `1..=n`
/// with taxicab weights `1 / (n 2^n)`.  Deep coordinates are light, so the
/// space needs many small balls to cover larger ones.
pub fn pathological_cantor(depth: u32, point_cap: u64) -> Result<FiniteMetricSpace> {
    if depth < 2 {
        return Err(Error::precondition("pathological space needs depth >= 2"));
    }
    let mut count = 1u64;
    for n in 1..=depth as u64 {
        count = count.checked_mul(n).ok_or(Error::ResourceCap {
            what: "pathological point count",
            needed: u64::MAX,
            cap: point_cap,
        })?;
    }
    if count > point_cap {
        return Err(Error::ResourceCap {
            what: "pathological point count",
            needed: count,
            cap: point_cap,
        });
    }
    let mut tuples: Vec<Vec<Rat>> = vec![vec![]];
    for n in 1..=depth as i128 {
        let mut next = Vec::new();
        for t in &tuples {
            for v in 1..=n {
                let mut u = t.clone();
                u.push(Rat::from_integer(v));
                next.push(u);
            }
        }
        tuples = next;
    }
    let weights: Vec<Rat> = (1..=depth as i128)
        .map(|n| Rat::new(1, n * (1i128 << n)))
        .collect();
    let ids: Vec<u32> = (0..tuples.len() as u32).collect();
    FiniteMetricSpace::from_coords(ids, CoordMetric::WeightedL1(weights), tuples)
}

/// Minimal number of balls of the given radius, centered at points of the
/// space, needed to cover `target`; found by exhaustive branch and bound.
pub fn min_ball_cover(
    space: &FiniteMetricSpace,
    target: &BTreeSet<u32>,
    radius: &Rat,
    open: bool,
) -> Result<(u64, Vec<u32>)> {
    let targets: Vec<usize> = target
        .iter()
        .map(|&id| space.index_of(id))
        .collect::<Result<_>>()?;
    if targets.len() > 128 {
        return Err(Error::ResourceCap {
            what: "minimal cover search",
            needed: targets.len() as u64,
            cap: 128,
        });
    }
    if targets.is_empty() {
        return Ok((0, Vec::new()));
    }
    let slot: BTreeMap<usize, u32> = targets
        .iter()
        .enumerate()
        .map(|(bit, &idx)| (idx, bit as u32))
        .collect();
    let full: u128 = if targets.len() == 128 {
        u128::MAX
    } else {
        (1u128 << targets.len()) - 1
    };
    // candidate masks, deduplicated and dominated ones dropped
    let mut masks: Vec<(u128, usize)> = Vec::new();
    for center in 0..space.len() {
        let mut mask = 0u128;
        for p in space.ball_indices(center, radius, open) {
            if let Some(&bit) = slot.get(&p) {
                mask |= 1u128 << bit;
            }
        }
        if mask != 0 {
            masks.push((mask, center));
        }
    }
    masks.sort_by_key(|(m, _)| std::cmp::Reverse(m.count_ones()));
    let mut kept: Vec<(u128, usize)> = Vec::new();
    for (mask, center) in masks {
        if !kept.iter().any(|(m, _)| m & mask == mask) {
            kept.push((mask, center));
        }
    }

    fn search(
        kept: &[(u128, usize)],
        covered: u128,
        full: u128,
        chosen: &mut Vec<usize>,
        best: &mut (u64, Vec<usize>),
    ) {
        if covered == full {
            if (chosen.len() as u64) < best.0 {
                *best = (chosen.len() as u64, chosen.clone());
            }
            return;
        }
        // lower bound: remaining bits over the largest candidate
        let remaining = (full & !covered).count_ones() as u64;
        let largest = kept
            .iter()
            .map(|(m, _)| (m & !covered).count_ones() as u64)
            .max()
            .unwrap_or(0);
        if largest == 0 || chosen.len() as u64 + remaining.div_ceil(largest) >= best.0 {
            return;
        }
        // branch on the uncovered bit with the fewest candidates
        let uncovered = full & !covered;
        let pivot = (0..128)
            .filter(|b| uncovered & (1u128 << b) != 0)
            .min_by_key(|b| kept.iter().filter(|(m, _)| m & (1u128 << b) != 0).count())
            .unwrap();
        let candidates: Vec<usize> = (0..kept.len())
            .filter(|&i| kept[i].0 & (1u128 << pivot) != 0)
            .collect();
        for i in candidates {
            chosen.push(kept[i].1);
            search(kept, covered | kept[i].0, full, chosen, best);
            chosen.pop();
        }
    }

    // greedy feasibility check doubles as an upper bound
    let mut best;
    {
        let mut covered = 0u128;
        let mut chosen = Vec::new();
        loop {
            if covered == full {
                best = (chosen.len() as u64 + 1, chosen.clone());
                break;
            }
            let Some((mask, center)) = kept
                .iter()
                .filter(|(m, _)| (m & !covered).count_ones() > 0)
                .max_by_key(|(m, _)| (m & !covered).count_ones())
                .cloned()
            else {
                return Err(Error::precondition(
                    "target cannot be covered by balls of this radius",
                ));
            };
            covered |= mask;
            chosen.push(center);
        }
    }
    let mut chosen = Vec::new();
    search(&kept, 0, full, &mut chosen, &mut best);
    let centers = best.1.iter().map(|&i| space.ids()[i]).collect();
    Ok((best.0, centers))
}
