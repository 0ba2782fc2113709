//! Cover-producing algorithms for partial dynamical systems.
//!
//! Every constructive routine returns a cover together with an exact
//! certificate obtained by a direct chain-component scan; formula-derived
//! bounds from the union schedule are recorded alongside the scan so the
//! two can be compared on every instance.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num::bigint::BigUint;
use num::{One, Zero};

use crate::caps::Caps;
use crate::coloring::greedy_color;
use crate::error::{Error, Result};
use crate::geometry::GeometricCover;
use crate::group::GroupModel;
use crate::system::{Cover, CoverCertificate, CoverCheck, PartialSystem, Scale};

/// A cardinality bound that may exceed the configured bit width, in which
/// case it saturates: a saturated bound dominates every observed value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoundValue {
    Finite(BigUint),
    Saturated,
}

impl BoundValue {
    pub fn dominates(&self, observed: u64) -> bool {
        match self {
            BoundValue::Saturated => true,
            BoundValue::Finite(v) => *v >= BigUint::from(observed),
        }
    }

    pub fn as_u64(&self) -> Option<u64> {
        match self {
            BoundValue::Saturated => None,
            BoundValue::Finite(v) => u64::try_from(v).ok(),
        }
    }

    fn from_big(value: BigUint, bit_cap: u64) -> BoundValue {
        if value.bits() > bit_cap {
            BoundValue::Saturated
        } else {
            BoundValue::Finite(value)
        }
    }
}

impl fmt::Display for BoundValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundValue::Finite(v) => write!(f, "{v}"),
            BoundValue::Saturated => write!(f, "saturated"),
        }
    }
}

/// Control function: scale -> cardinality bound for the covers a provider
/// can produce at that scale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControlFn {
    Constant(u64),
    /// Explicit table with an optional bound valid at any larger or
    /// unbounded scale.  Queries outside the table are errors.
    Table { values: BTreeMap<u64, u64>, tail: Option<u64> },
    /// Bound for brick covers of `Z^dim` pulled back through charts: the
    /// ball count at the brick diameter, capped by the number of points
    /// when the target system is finite.
    BrickTransport { dim: u32, point_cap: Option<u64> },
}

impl ControlFn {
    pub fn eval(&self, scale: Scale, caps: &Caps) -> Result<BoundValue> {
        match self {
            ControlFn::Constant(c) => Ok(BoundValue::Finite(BigUint::from(*c))),
            ControlFn::Table { values, tail } => match scale {
                Scale::Finite(s) => values
                    .get(&s)
                    .map(|v| BoundValue::Finite(BigUint::from(*v)))
                    .or_else(|| {
                        tail.and_then(|t| {
                            let last = values.keys().next_back().copied().unwrap_or(0);
                            (s > last).then(|| BoundValue::Finite(BigUint::from(t)))
                        })
                    })
                    .ok_or_else(|| {
                        Error::precondition(format!("control table has no entry for scale {s}"))
                    }),
                Scale::Unbounded => tail
                    .map(|t| BoundValue::Finite(BigUint::from(t)))
                    .ok_or_else(|| Error::precondition("control table has no unbounded tail")),
            },
            ControlFn::BrickTransport { dim, point_cap } => {
                let group = GroupModel::free_abelian(*dim);
                let value = match scale {
                    Scale::Finite(s) => {
                        let brick = crate::geometry::ZdBrickCover::new(*dim, s.max(1))?;
                        let diameter = BigUint::from(brick.diameter_bound());
                        match group.ball_count(&diameter, caps.schedule_bits) {
                            Some(count) => BoundValue::from_big(count, caps.schedule_bits),
                            None => BoundValue::Saturated,
                        }
                    }
                    Scale::Unbounded => BoundValue::Saturated,
                };
                Ok(match (value, point_cap) {
                    (BoundValue::Finite(v), Some(cap)) => {
                        BoundValue::Finite(v.min(BigUint::from(*cap)))
                    }
                    (BoundValue::Saturated, Some(cap)) => {
                        BoundValue::Finite(BigUint::from(*cap))
                    }
                    (v, None) => v,
                })
            }
        }
    }
}

/// The chain-length bound for merging one more piece: a set whose
/// fine-scale components have cardinality at most `fine_bound`, unioned
/// with a set whose coarse-scale components have cardinality at most
/// `coarse_bound`, has fine-scale components of cardinality at most the
/// ball count of `(coarse_bound - 1) * (fine_bound + 1) + 1` in the Cayley
/// graph rescaled to the fine scale.
pub fn union_bound(r: u64, fine_bound: u64, coarse_bound: u64, group: &GroupModel) -> Result<u64> {
    if r < 1 || fine_bound < 1 || coarse_bound < 1 {
        return Err(Error::precondition("union bound needs r, R, D >= 1"));
    }
    let exponent = (coarse_bound - 1) * (fine_bound + 1) + 1;
    let scaled = BigUint::from(exponent * r);
    group
        .ball_count(&scaled, 64)
        .and_then(|c| u64::try_from(&c).ok())
        .ok_or(Error::ResourceCap {
            what: "union bound ball count",
            needed: exponent,
            cap: u64::MAX,
        })
}

/// Scales and bounds for combining pieces one at a time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnionSchedule {
    pub base_scale: u64,
    /// Scale at which piece `i` must be covered.
    pub piece_scales: Vec<Scale>,
    /// Bound certified after merging pieces `0..=i`.
    pub merged_bounds: Vec<BoundValue>,
}

impl UnionSchedule {
    pub fn final_bound(&self) -> &BoundValue {
        self.merged_bounds.last().expect("schedule has at least one piece")
    }
}

/// Compute the merge schedule for pieces with the given control functions:
/// piece 0 is covered at the base scale, piece `i` at scale
/// `r * (R_{i-1} + 2)`, and the merged bound is the rescaled ball count of
/// `(R_{i-1} - 1) * (f_i(r_i) + 1) + 1`.
pub fn union_schedule(
    controls: &[ControlFn],
    r: u64,
    group: &GroupModel,
    caps: &Caps,
) -> Result<UnionSchedule> {
    if controls.is_empty() {
        return Err(Error::precondition("schedule needs at least one piece"));
    }
    if r < 1 {
        return Err(Error::precondition("schedule needs r >= 1"));
    }
    let mut piece_scales = vec![Scale::Finite(r)];
    let mut merged_bounds = vec![controls[0].eval(Scale::Finite(r), caps)?];
    for control in &controls[1..] {
        let prev = merged_bounds.last().unwrap();
        let scale = match prev {
            BoundValue::Saturated => Scale::Unbounded,
            BoundValue::Finite(v) => match u64::try_from(v) {
                Ok(value) => match value.checked_add(2).and_then(|s| s.checked_mul(r)) {
                    Some(s) => Scale::Finite(s),
                    None => Scale::Unbounded,
                },
                Err(_) => Scale::Unbounded,
            },
        };
        piece_scales.push(scale);
        let piece_bound = control.eval(scale, caps)?;
        let merged = match (prev, &piece_bound) {
            (BoundValue::Saturated, _) | (_, BoundValue::Saturated) => BoundValue::Saturated,
            (BoundValue::Finite(prev_v), BoundValue::Finite(piece_v)) => {
                if prev_v.is_zero() || piece_v.is_zero() {
                    return Err(Error::precondition("control bounds must be positive"));
                }
                let exponent = (prev_v - BigUint::one()) * (piece_v + BigUint::one())
                    + BigUint::one();
                let scaled = exponent * BigUint::from(r);
                if scaled.bits() > caps.schedule_bits {
                    BoundValue::Saturated
                } else {
                    match group.ball_count(&scaled, caps.schedule_bits) {
                        Some(count) => BoundValue::from_big(count, caps.schedule_bits),
                        None => BoundValue::Saturated,
                    }
                }
            }
        };
        merged_bounds.push(merged);
    }
    Ok(UnionSchedule { base_scale: r, piece_scales, merged_bounds })
}

/// Certificate attached to a constructed cover: the exact scan observation
/// next to the schedule- or formula-derived bound it must stay under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineCertificate {
    pub scale: Scale,
    pub formula_bound: BoundValue,
    pub observed: u64,
    pub per_family_observed: Vec<u64>,
}

impl EngineCertificate {
    pub fn holds(&self) -> bool {
        self.formula_bound.dominates(self.observed)
    }

    fn from_check(cert: &CoverCertificate, formula_bound: BoundValue) -> EngineCertificate {
        EngineCertificate {
            scale: cert.scale,
            formula_bound,
            observed: cert.observed,
            per_family_observed: cert.per_family_observed.clone(),
        }
    }
}

/// Pull a geometric cover of the Cayley graph back through per-orbit
/// charts.  Each orbit is labelled from its least point by breadth-first
/// composition; the resulting cover is certified at the ball count of the
/// geometric diameter bound.
pub fn transport_cover(
    geo: &dyn GeometricCover,
    system: &PartialSystem,
    caps: &Caps,
) -> Result<(Cover, EngineCertificate)> {
    let r = geo.scale();
    // every chain move must come from a distinguishable element; the
    // component bound itself is certified by the exact scan below
    let freeness_radius = r.min(system.horizon().as_finite().unwrap_or(u64::MAX));
    match system.local_freeness(freeness_radius, caps)? {
        crate::system::Freeness::Free => {}
        crate::system::Freeness::Collision { point, left, right } => {
            return Err(Error::FreenessViolation {
                point,
                left: format!("{left:?}"),
                right: format!("{right:?}"),
            });
        }
    }

    let mut families: Vec<Vec<BTreeSet<u32>>> = vec![Vec::new(); geo.family_count()];
    for orbit in system.orbits() {
        let base = orbit[0];
        let labels = system.orbit_labels(base);
        for (family, sets) in families.iter_mut().enumerate() {
            let members: BTreeSet<u32> = labels
                .iter()
                .filter(|(_, elt)| geo.contains(family, elt))
                .map(|(p, _)| *p)
                .collect();
            if !members.is_empty() {
                sets.push(members);
            }
        }
    }
    let cover = Cover {
        ground: system.points().iter().copied().collect(),
        families,
    };
    let bound = system.group().ball_count_u64(geo.diameter_bound());
    let check = system.check_cover(&cover, Scale::Finite(r), bound)?;
    match check {
        CoverCheck::Certified(cert) => Ok((
            cover,
            EngineCertificate::from_check(&cert, BoundValue::Finite(BigUint::from(bound))),
        )),
        CoverCheck::Uncovered { point } => Err(Error::precondition(format!(
            "transported cover misses point {point}"
        ))),
        CoverCheck::ComponentTooBig { family, cardinality, .. } => {
            Err(Error::precondition(format!(
                "transported cover family {family} has a component of cardinality {cardinality} > {bound}"
            )))
        }
    }
}

/// Union piece covers family-wise and certify the result at the base scale
/// against the schedule's final bound.
///
/// Each piece must carry a cover already certified at its scheduled scale
/// and declared bound; a failing piece certificate is reported before any
/// union is formed.
pub fn union_covers(
    system: &PartialSystem,
    pieces: &[(BTreeSet<u32>, Cover)],
    controls: &[ControlFn],
    r: u64,
    caps: &Caps,
) -> Result<(Cover, EngineCertificate)> {
    if pieces.is_empty() {
        return Err(Error::precondition("union needs at least one piece"));
    }
    if pieces.len() != controls.len() {
        return Err(Error::precondition("one control function per piece"));
    }
    let schedule = union_schedule(controls, r, system.group(), caps)?;
    let family_count = pieces[0].1.families.len();
    for (i, (subset, cover)) in pieces.iter().enumerate() {
        if cover.families.len() != family_count {
            return Err(Error::precondition("piece covers must share the family count"));
        }
        let scale = schedule.piece_scales[i];
        let declared = controls[i].eval(scale, caps)?;
        let sub = system.restrict(subset)?;
        let bound = declared.as_u64().unwrap_or(u64::MAX);
        let check = sub.check_cover(cover, scale.min(sub_diameter_scale(&sub)), bound)?;
        if let Some(bad) = match &check {
            CoverCheck::Certified(_) => None,
            CoverCheck::Uncovered { point } => Some(format!("misses point {point}")),
            CoverCheck::ComponentTooBig { family, cardinality, .. } => Some(format!(
                "family {family} component cardinality {cardinality} exceeds {declared}"
            )),
        } {
            return Err(Error::precondition(format!("piece {i} fails its certificate: {bad}")));
        }
    }

    let mut families: Vec<Vec<BTreeSet<u32>>> = vec![Vec::new(); family_count];
    let mut ground = BTreeSet::new();
    for (subset, cover) in pieces {
        ground.extend(subset.iter().copied());
        for (f, sets) in cover.families.iter().enumerate() {
            families[f].extend(sets.iter().cloned());
        }
    }
    let cover = Cover { ground, families };
    let final_bound = schedule.final_bound().clone();
    let bound_u64 = final_bound.as_u64().unwrap_or(u64::MAX);
    let check = system.check_cover(&cover, Scale::Finite(r), bound_u64)?;
    match check {
        CoverCheck::Certified(cert) => {
            Ok((cover, EngineCertificate::from_check(&cert, final_bound)))
        }
        CoverCheck::Uncovered { point } => {
            Err(Error::precondition(format!("union misses point {point}")))
        }
        CoverCheck::ComponentTooBig { family, cardinality, .. } => Err(Error::precondition(
            format!("union family {family} component cardinality {cardinality} exceeds {final_bound}"),
        )),
    }
}

/// Pieces never need scales beyond their own point count; clamp so that
/// saturated schedule scales stay runnable on finite systems.
fn sub_diameter_scale(system: &PartialSystem) -> Scale {
    Scale::Finite(system.len() as u64 + 1)
}

impl Scale {
    fn min(self, other: Scale) -> Scale {
        if self.at_most(other) {
            self
        } else {
            other
        }
    }
}

/// Output of the polynomial-growth cover construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyCover {
    pub cover: Cover,
    pub certificate: EngineCertificate,
    /// Number of classes, `4^degree + 1`.
    pub classes: u64,
    /// The admissible doubling scale found by the scan.
    pub doubling_scale: u64,
    /// Upper end of the scan interval.
    pub scan_limit: u64,
    /// Least exponent with `(K/4^d)^m >= C R^d`.
    pub exponent: u32,
    pub net_centers: Vec<u32>,
}

/// Cover a polynomially growing system by classes of orbit balls around a
/// maximal separated net.
///
/// Given a growth envelope `counts(s) <= constant * s^degree`, the scan
/// finds the first scale `R_n` in `[radius, S_0/4]` at which every point's
/// `4 R_n`-ball is at most `K = 4^degree + 1` times its `R_n`-ball, takes a
/// maximal net with disjoint `R_n`-balls, covers by the `2 R_n`-balls of
/// the net and greedily sorts them into `K` classes so that same-class
/// balls are more than `R_n` apart.
pub fn poly_growth_cover(
    system: &PartialSystem,
    radius: u64,
    constant: u64,
    degree: u32,
    caps: &Caps,
) -> Result<PolyCover> {
    if radius <= 1 {
        return Err(Error::precondition("poly cover needs R > 1"));
    }
    if constant == 0 {
        return Err(Error::precondition("growth constant must be positive"));
    }
    let k_classes = 4u64
        .checked_pow(degree)
        .and_then(|v| v.checked_add(1))
        .ok_or(Error::ResourceCap { what: "class count", needed: degree as u64, cap: 32 })?;

    // least m with (K / 4^d)^m >= C R^d, exact in big integers
    let four_d = BigUint::from(4u64).pow(degree);
    let target = BigUint::from(constant) * BigUint::from(radius).pow(degree);
    let k_big = BigUint::from(k_classes);
    let mut exponent = 0u32;
    let mut lhs_num = BigUint::one();
    let mut lhs_den = BigUint::one();
    while lhs_num.clone() < &lhs_den * &target {
        lhs_num *= &k_big;
        lhs_den *= &four_d;
        exponent += 1;
        if exponent > 4096 {
            return Err(Error::ResourceCap { what: "doubling exponent", needed: exponent as u64, cap: 4096 });
        }
    }
    // the scan interval can exceed any machine scale for slow-growing
    // doubling ratios; clamp it, since admissible scales are found early
    // and certified directly
    let s0_big = BigUint::from(4u64).pow(exponent + 1) * BigUint::from(radius);
    let scan_limit = u64::try_from(&(s0_big / BigUint::from(4u64))).unwrap_or(u64::MAX);

    // growth envelope must hold at every radius the scan touches
    let verify_growth = |s: u64| -> Result<u64> {
        let mut worst = 0u64;
        for &p in system.points() {
            worst = worst.max(system.orbit_ball(p, Scale::Finite(s))?.len() as u64);
        }
        let envelope = s
            .checked_pow(degree)
            .and_then(|v| v.checked_mul(constant))
            .unwrap_or(u64::MAX);
        if worst > envelope {
            return Err(Error::precondition(format!(
                "growth envelope fails at radius {s}: observed {worst} > {envelope}"
            )));
        }
        Ok(worst)
    };

    let mut doubling_scale = None;
    let mut scanned = 0u64;
    let mut candidate = radius;
    while candidate <= scan_limit {
        scanned += 1;
        if scanned > caps.doubling_scan {
            return Err(Error::ResourceCap {
                what: "doubling scale scan",
                needed: scanned,
                cap: caps.doubling_scan,
            });
        }
        verify_growth(candidate)?;
        verify_growth(4 * candidate)?;
        let admissible = system.points().iter().all(|&p| {
            let small = system.orbit_ball(p, Scale::Finite(candidate)).unwrap().len() as u64;
            let large = system.orbit_ball(p, Scale::Finite(4 * candidate)).unwrap().len() as u64;
            large <= k_classes * small
        });
        if admissible {
            doubling_scale = Some(candidate);
            break;
        }
        candidate += 1;
    }
    let doubling_scale = doubling_scale.ok_or(Error::NoDoublingScale { lo: radius, hi: scan_limit })?;

    // maximal net with pairwise disjoint R_n-balls, in identifier order
    let mut net: Vec<u32> = Vec::new();
    let mut blocked: BTreeSet<u32> = BTreeSet::new();
    for &p in system.points() {
        let ball = system.orbit_ball(p, Scale::Finite(doubling_scale))?;
        if ball.iter().all(|q| !blocked.contains(q)) {
            net.push(p);
            blocked.extend(ball);
        }
    }

    let balls: Vec<BTreeSet<u32>> = net
        .iter()
        .map(|&p| system.orbit_ball(p, Scale::Finite(2 * doubling_scale)))
        .collect::<Result<_>>()?;

    // disjointness of the net balls and total coverage, checked exactly
    let mut seen: BTreeSet<u32> = BTreeSet::new();
    for (&center, _) in net.iter().zip(&balls) {
        let small = system.orbit_ball(center, Scale::Finite(doubling_scale))?;
        for q in small {
            if !seen.insert(q) {
                return Err(Error::precondition(format!(
                    "net balls around {center} are not pairwise disjoint"
                )));
            }
        }
    }
    let covered: BTreeSet<u32> = balls.iter().flatten().copied().collect();
    for &p in system.points() {
        if !covered.contains(&p) {
            return Err(Error::precondition(format!("net balls do not cover point {p}")));
        }
    }

    // two balls are related when one meets the R_n-neighborhood of the other
    let mut ball_of_point: HashMap<u32, Vec<usize>> = HashMap::new();
    for (i, ball) in balls.iter().enumerate() {
        for &p in ball {
            ball_of_point.entry(p).or_default().push(i);
        }
    }
    let mut adjacency: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); balls.len()];
    for (i, ball) in balls.iter().enumerate() {
        let mut reach: BTreeSet<u32> = BTreeSet::new();
        for &p in ball {
            reach.extend(system.orbit_ball(p, Scale::Finite(doubling_scale))?);
        }
        for p in reach {
            if let Some(owners) = ball_of_point.get(&p) {
                for &j in owners {
                    if j != i {
                        adjacency[i].insert(j);
                        adjacency[j].insert(i);
                    }
                }
            }
        }
    }
    let max_degree = (k_classes - 1) as usize;
    let indices: Vec<usize> = (0..balls.len()).collect();
    let classes = greedy_color(&indices, |a, b| adjacency[*a].contains(b), max_degree)?;

    let families: Vec<Vec<BTreeSet<u32>>> = classes
        .iter()
        .map(|class| class.iter().map(|&i| balls[i].clone()).collect())
        .collect();
    let cover = Cover { ground: system.points().iter().copied().collect(), families };

    let bound = balls.iter().map(|b| b.len() as u64).max().unwrap_or(0);
    let check = system.check_cover(&cover, Scale::Finite(radius), bound)?;
    let cert = match check {
        CoverCheck::Certified(cert) => {
            EngineCertificate::from_check(&cert, BoundValue::Finite(BigUint::from(bound)))
        }
        CoverCheck::Uncovered { point } => {
            return Err(Error::precondition(format!("poly cover misses point {point}")))
        }
        CoverCheck::ComponentTooBig { family, cardinality, .. } => {
            return Err(Error::precondition(format!(
                "poly cover family {family} has component cardinality {cardinality} > {bound}"
            )))
        }
    };

    Ok(PolyCover {
        cover,
        certificate: cert,
        classes: k_classes,
        doubling_scale,
        scan_limit,
        exponent,
        net_centers: net,
    })
}

/// Provider of covers for the chain components encountered during
/// refinement.
pub trait LocalCoverProvider {
    /// Control function bounding the covers this provider yields.
    fn control(&self) -> ControlFn;
    /// Cover the given component (a subset of the system) at `scale`, with
    /// per-family components of cardinality at most `control().eval(scale)`.
    fn cover(
        &self,
        system: &PartialSystem,
        component: &BTreeSet<u32>,
        scale: Scale,
        caps: &Caps,
    ) -> Result<Cover>;
    /// Number of families in the covers produced.
    fn family_count(&self) -> usize;
}

/// Provider that charts each component into the group's Cayley graph and
/// pulls back a brick cover of `Z^d`.
///
/// With an anchor, labels come from a fixed ambient labelling instead of a
/// per-component chart; anchored labels keep brick classes aligned across
/// the components and families of a larger construction, which any choice
/// of chart basepoint is free to do.
pub struct BrickChartProvider {
    pub dim: u32,
    pub anchor: Option<BTreeMap<u32, Element>>,
    /// Fixed brick scale; without it bricks match the requested scale.
    /// A fixed fine scale keeps brick classes aligned across components,
    /// and the coarse-scale bounds still hold since components within one
    /// piece subset never exceed the subset.
    pub brick_scale: Option<u64>,
}

use crate::group::Element;

impl LocalCoverProvider for BrickChartProvider {
    fn control(&self) -> ControlFn {
        ControlFn::BrickTransport { dim: self.dim, point_cap: None }
    }

    fn cover(
        &self,
        system: &PartialSystem,
        component: &BTreeSet<u32>,
        scale: Scale,
        caps: &Caps,
    ) -> Result<Cover> {
        let base = *component.iter().next().ok_or_else(|| {
            Error::precondition("cannot cover an empty component")
        })?;
        let labels: BTreeMap<u32, Element> = match &self.anchor {
            Some(anchor) => component
                .iter()
                .map(|p| {
                    anchor
                        .get(p)
                        .map(|e| (*p, e.clone()))
                        .ok_or_else(|| {
                            Error::precondition(format!("anchor has no label for point {p}"))
                        })
                })
                .collect::<Result<_>>()?,
            None => {
                // the chart only needs to reach the whole component
                let radius = component.len() as u64 + 1;
                system.cayley_chart(base, radius, caps)?.labels
            }
        };
        for &p in component {
            if !labels.contains_key(&p) {
                return Err(Error::precondition(format!(
                    "chart from {base} does not reach component point {p}"
                )));
            }
        }
        let geo_scale = match (self.brick_scale, scale) {
            (Some(fixed), _) => fixed.max(1),
            (None, Scale::Finite(s)) => s.max(1),
            // past the component diameter every scale behaves the same
            (None, Scale::Unbounded) => component.len() as u64 + 1,
        };
        let brick = crate::geometry::ZdBrickCover::new(self.dim, geo_scale)?;
        let mut families: Vec<Vec<BTreeSet<u32>>> = vec![Vec::new(); brick.family_count()];
        for (family, sets) in families.iter_mut().enumerate() {
            let members: BTreeSet<u32> = component
                .iter()
                .filter(|p| brick.contains(family, &labels[p]))
                .copied()
                .collect();
            if !members.is_empty() {
                sets.push(members);
            }
        }
        Ok(Cover { ground: component.clone(), families })
    }

    fn family_count(&self) -> usize {
        self.dim as usize + 1
    }
}

/// Result of refining an outer cover with local covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefinedCover {
    pub cover: Cover,
    pub certificate: EngineCertificate,
    pub schedule: UnionSchedule,
}

/// Refine each family of `outer` by covering its chain components with
/// locally provided covers, then merge the per-family covers with the
/// union schedule derived from the provider's control function.
///
/// The output dimension is the provider's family count minus one; the
/// certificate is an exact scan at the requested scale against the
/// schedule's final bound.
pub fn refine_cover(
    system: &PartialSystem,
    outer: &Cover,
    outer_scale: Scale,
    provider: &dyn LocalCoverProvider,
    r: u64,
    caps: &Caps,
) -> Result<RefinedCover> {
    let controls: Vec<ControlFn> = outer.families.iter().map(|_| provider.control()).collect();
    let schedule = union_schedule(&controls, r, system.group(), caps)?;

    let mut pieces: Vec<(BTreeSet<u32>, Cover)> = Vec::new();
    for (i, _) in outer.families.iter().enumerate() {
        let family_points = outer.family_union(i);
        let scale = schedule.piece_scales[i];
        let mut families: Vec<Vec<BTreeSet<u32>>> = vec![Vec::new(); provider.family_count()];
        if !family_points.is_empty() {
            let partition = system.components(&family_points, outer_scale)?;
            for class in &partition.classes {
                let component: BTreeSet<u32> = class.iter().copied().collect();
                let local = provider.cover(system, &component, scale, caps).map_err(|e| {
                    Error::precondition(format!(
                        "local provider failed on a component of family {i}: {e}"
                    ))
                })?;
                if local.families.len() != provider.family_count() {
                    return Err(Error::precondition("provider family count mismatch"));
                }
                for (k, sets) in local.families.iter().enumerate() {
                    families[k].extend(sets.iter().cloned());
                }
            }
        }
        pieces.push((family_points.clone(), Cover { ground: family_points, families }));
    }

    let (cover, certificate) = union_covers(system, &pieces, &controls, r, caps)?;
    Ok(RefinedCover { cover, certificate, schedule })
}

/// Outcome of the exhaustive cover search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BruteOutcome {
    Exists(Cover),
    /// No assignment of points to `dim + 1` families keeps every
    /// chain component within the bound.
    NotExists,
}

/// Decide whether any `(dim, F^r, bound)`-cover of the system exists, by
/// exhaustive assignment of points to `dim + 1` families.
///
/// Overlapping families never help: restricting any cover to a partition
/// only shrinks components, so the search ranges over partitions.  For a
/// single family the components are forced and connectivity decides.
pub fn brute_min_cover(
    system: &PartialSystem,
    r: u64,
    dim: u32,
    bound: u64,
    caps: &Caps,
) -> Result<BruteOutcome> {
    let points: Vec<u32> = system.points().to_vec();
    let all: BTreeSet<u32> = points.iter().copied().collect();
    if dim == 0 {
        let partition = system.components(&all, Scale::Finite(r))?;
        return Ok(if partition.max_cardinality() <= bound {
            BruteOutcome::Exists(Cover { ground: all.clone(), families: vec![vec![all]] })
        } else {
            BruteOutcome::NotExists
        });
    }
    if points.len() as u64 > caps.brute_force_points {
        return Err(Error::ResourceCap {
            what: "exhaustive cover search",
            needed: points.len() as u64,
            cap: caps.brute_force_points,
        });
    }

    // adjacency at scale r among the ground points
    let n = points.len();
    let mut adjacent = vec![vec![false; n]; n];
    for (i, &p) in points.iter().enumerate() {
        for q in system.orbit_ball(p, Scale::Finite(r))? {
            if let Ok(j) = points.binary_search(&q) {
                if j != i {
                    adjacent[i][j] = true;
                    adjacent[j][i] = true;
                }
            }
        }
    }

    struct Search<'a> {
        adjacent: &'a [Vec<bool>],
        families: u32,
        bound: u64,
        assignment: Vec<u32>,
        n: usize,
    }

    impl Search<'_> {
        /// Size of the component of `point` within its family under the
        /// current partial assignment.
        fn component_size(&self, point: usize, family: u32) -> u64 {
            let mut seen = vec![false; self.n];
            seen[point] = true;
            let mut stack = vec![point];
            let mut size = 0u64;
            while let Some(cur) = stack.pop() {
                size += 1;
                for next in 0..self.n {
                    if !seen[next] && self.adjacent[cur][next] && self.assignment[next] == family
                    {
                        seen[next] = true;
                        stack.push(next);
                    }
                }
            }
            size
        }

        fn solve(&mut self, point: usize) -> bool {
            if point == self.n {
                return true;
            }
            // symmetry: the first point always goes to family 0
            let tries = if point == 0 { 1 } else { self.families };
            for family in 0..tries {
                self.assignment[point] = family;
                if self.component_size(point, family) <= self.bound && self.solve(point + 1) {
                    return true;
                }
            }
            self.assignment[point] = u32::MAX;
            false
        }
    }

    let mut search = Search {
        adjacent: &adjacent,
        families: dim + 1,
        bound,
        assignment: vec![u32::MAX; n],
        n,
    };
    if search.solve(0) {
        let mut families: Vec<Vec<BTreeSet<u32>>> = vec![Vec::new(); dim as usize + 1];
        for (f, sets) in families.iter_mut().enumerate() {
            let members: BTreeSet<u32> = points
                .iter()
                .enumerate()
                .filter(|(i, _)| search.assignment[*i] == f as u32)
                .map(|(_, &p)| p)
                .collect();
            if !members.is_empty() {
                sets.push(members);
            }
        }
        Ok(BruteOutcome::Exists(Cover { ground: all, families }))
    } else {
        Ok(BruteOutcome::NotExists)
    }
}
