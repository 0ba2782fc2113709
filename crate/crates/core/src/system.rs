//! Finite partial dynamical systems.
//!
//! A system is a finite point set acted on by partial injections indexed by
//! the generators of a group model.  Maps for longer words are obtained by
//! composing the stored tables; coherence of those compositions is validated
//! up to an explicit horizon, past which scale-dependent operations refuse
//! to run.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::group::{Element, GroupModel};

/// Scale of a chain move set, or the horizon up to which a system has been
/// validated.  `Unbounded` is used for systems that are restrictions of
/// genuine group actions, which compose coherently at every scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scale {
    Finite(u64),
    Unbounded,
}

impl Scale {
    pub fn at_most(self, other: Scale) -> bool {
        match (self, other) {
            (_, Scale::Unbounded) => true,
            (Scale::Unbounded, Scale::Finite(_)) => false,
            (Scale::Finite(a), Scale::Finite(b)) => a <= b,
        }
    }

    pub fn as_finite(self) -> Option<u64> {
        match self {
            Scale::Finite(v) => Some(v),
            Scale::Unbounded => None,
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scale::Finite(v) => write!(f, "{v}"),
            Scale::Unbounded => write!(f, "unbounded"),
        }
    }
}

/// A finite partial dynamical system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialSystem {
    /// External point identifiers, sorted strictly increasing.
    points: Vec<u32>,
    group: GroupModel,
    /// Non-identity generators, in the canonical order of
    /// `group.generators()` with the identity dropped.
    gens: Vec<Element>,
    /// `maps[g][i]` is the image index of point `i` under generator `g`.
    maps: Vec<Vec<Option<u32>>>,
    horizon: Scale,
}

/// One defect found during axiom validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AxiomViolation {
    /// `theta_g` maps two points to the same image.
    NotInjective { gen: Element, left: u32, right: u32, image: u32 },
    /// The table for the inverse generator is not the inverse table.
    InverseMismatch { gen: Element, point: u32 },
    /// Two word compositions realizing the same element disagree.
    Incoherent { element: Element, point: u32, images: (u32, u32) },
    /// A stored generator table fails to extend a word composition.
    MissingExtension { element: Element, point: u32 },
}

/// Result of validating a system up to some horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub horizon: u64,
    pub violations: Vec<AxiomViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Partition of a subset into chain components at a fixed scale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentPartition {
    pub base_set: Vec<u32>,
    pub scale: Scale,
    pub classes: Vec<Vec<u32>>,
}

impl ComponentPartition {
    pub fn max_cardinality(&self) -> u64 {
        self.classes.iter().map(|c| c.len() as u64).max().unwrap_or(0)
    }

    /// Class index of each point of the base set.
    pub fn class_of(&self) -> BTreeMap<u32, usize> {
        let mut out = BTreeMap::new();
        for (i, class) in self.classes.iter().enumerate() {
            for &p in class {
                out.insert(p, i);
            }
        }
        out
    }
}

/// Labelled families of subsets covering a ground set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cover {
    pub ground: BTreeSet<u32>,
    pub families: Vec<Vec<BTreeSet<u32>>>,
}

impl Cover {
    pub fn family_union(&self, family: usize) -> BTreeSet<u32> {
        self.families[family]
            .iter()
            .flat_map(|s| s.iter().copied())
            .collect()
    }

    pub fn covers_ground(&self) -> bool {
        let union: BTreeSet<u32> = (0..self.families.len())
            .flat_map(|f| self.family_union(f))
            .collect();
        self.ground.iter().all(|p| union.contains(p))
    }
}

/// Certificate produced by a successful cover check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverCertificate {
    pub scale: Scale,
    pub bound: u64,
    pub observed: u64,
    pub per_family_observed: Vec<u64>,
}

/// Outcome of checking a cover against a scale and cardinality bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoverCheck {
    Certified(CoverCertificate),
    Uncovered { point: u32 },
    ComponentTooBig { family: usize, component: Vec<u32>, cardinality: u64 },
}

impl CoverCheck {
    pub fn certificate(&self) -> Option<&CoverCertificate> {
        match self {
            CoverCheck::Certified(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_certified(&self) -> bool {
        matches!(self, CoverCheck::Certified(_))
    }
}

/// Outcome of a local-freeness check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Freeness {
    Free,
    Collision { point: u32, left: Element, right: Element },
}

impl Freeness {
    pub fn is_free(&self) -> bool {
        matches!(self, Freeness::Free)
    }
}

/// Injective chart from an orbit ball into a word ball of the group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CayleyChart {
    pub base_point: u32,
    pub radius: u64,
    /// point id -> group element with `theta_elt(base) = point`
    pub labels: BTreeMap<u32, Element>,
}

impl CayleyChart {
    /// The image subset of the word ball.
    pub fn image(&self) -> Vec<Element> {
        let mut elts: Vec<Element> = self.labels.values().cloned().collect();
        elts.sort();
        elts
    }
}

/// Measured growth of a system compared with its group's profile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemGrowth {
    pub radii: Vec<u64>,
    pub counts: Vec<u64>,
    pub group_counts: Vec<u64>,
    /// Whether the system growth is dominated by the group growth at every
    /// sampled radius.
    pub dominated: bool,
}

impl PartialSystem {
    /// Build a system from explicit generator tables over external ids.
    ///
    /// `entries` maps each non-identity generator to (source, image) pairs.
    /// Structural problems (unknown points, duplicate sources) are errors;
    /// axiom violations are left for `validate`.
    pub fn from_maps(
        group: GroupModel,
        points: Vec<u32>,
        entries: &BTreeMap<Element, Vec<(u32, u32)>>,
    ) -> Result<PartialSystem> {
        let mut sorted = points;
        sorted.sort_unstable();
        sorted.dedup();
        let index: HashMap<u32, u32> = sorted
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, i as u32))
            .collect();
        let gens: Vec<Element> = group
            .generators()
            .into_iter()
            .filter(|g| *g != group.identity())
            .collect();
        let mut maps = vec![vec![None; sorted.len()]; gens.len()];
        for (gen, pairs) in entries {
            let slot = gens
                .iter()
                .position(|g| g == gen)
                .ok_or_else(|| Error::precondition(format!("unknown generator {gen:?}")))?;
            for &(src, dst) in pairs {
                let si = *index.get(&src).ok_or(Error::UnknownPoint(src))? as usize;
                let di = *index.get(&dst).ok_or(Error::UnknownPoint(dst))?;
                if maps[slot][si].is_some() {
                    return Err(Error::precondition(format!(
                        "duplicate map entry for generator {gen:?} at point {src}"
                    )));
                }
                maps[slot][si] = Some(di);
            }
        }
        Ok(PartialSystem { points: sorted, group, gens, maps, horizon: Scale::Finite(0) })
    }

    /// Build a system from a genuine action given as a closure on point ids.
    /// The resulting system is coherent at every scale.
    pub fn from_action(
        group: GroupModel,
        points: Vec<u32>,
        act: impl Fn(&Element, u32) -> u32,
    ) -> PartialSystem {
        let mut sorted = points;
        sorted.sort_unstable();
        sorted.dedup();
        let index: HashMap<u32, u32> = sorted
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, i as u32))
            .collect();
        let gens: Vec<Element> = group
            .generators()
            .into_iter()
            .filter(|g| *g != group.identity())
            .collect();
        let maps = gens
            .iter()
            .map(|g| {
                sorted
                    .iter()
                    .map(|&p| {
                        let image = act(g, p);
                        Some(*index.get(&image).expect("action leaves the point set"))
                    })
                    .collect()
            })
            .collect();
        let mut system =
            PartialSystem { points: sorted, group, gens, maps, horizon: Scale::Unbounded };
        debug_assert!(system.validate(3).is_valid(), "action closure is not coherent");
        system.horizon = Scale::Unbounded;
        system
    }

    /// Translation action of `Z` on `Z/n`.
    pub fn translation_cycle(n: u32) -> PartialSystem {
        let group = GroupModel::free_abelian(1);
        PartialSystem::from_action(group, (0..n).collect(), move |g, p| match g {
            Element::Vector(v) => (p as i64 + v[0]).rem_euclid(n as i64) as u32,
            _ => unreachable!(),
        })
    }

    /// Translation action of `Z^d` on the product of cycles `(Z/n)^d`.
    /// Point `p` encodes coordinates in mixed radix, last axis fastest.
    pub fn translation_torus(lengths: &[u32]) -> PartialSystem {
        let group = GroupModel::free_abelian(lengths.len() as u32);
        let dims: Vec<u32> = lengths.to_vec();
        let total: u32 = dims.iter().product();
        PartialSystem::from_action(group, (0..total).collect(), move |g, p| match g {
            Element::Vector(v) => {
                let mut coords = decode_mixed(p, &dims);
                for (axis, delta) in v.iter().enumerate() {
                    let n = dims[axis] as i64;
                    coords[axis] = ((coords[axis] as i64 + delta).rem_euclid(n)) as u32;
                }
                encode_mixed(&coords, &dims)
            }
            _ => unreachable!(),
        })
    }

    /// Partial translation system of `Z` on the integer window `[0, len)`,
    /// with no wrap-around.  Genuinely free at every horizon.
    pub fn translation_window(len: u32) -> PartialSystem {
        let group = GroupModel::free_abelian(1);
        let points: Vec<u32> = (0..len).collect();
        let mut entries = BTreeMap::new();
        let fwd: Vec<(u32, u32)> = (0..len.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        let bwd: Vec<(u32, u32)> = (1..len).map(|i| (i, i - 1)).collect();
        entries.insert(Element::Vector(vec![1]), fwd);
        entries.insert(Element::Vector(vec![-1]), bwd);
        let mut system = PartialSystem::from_maps(group, points, &entries).unwrap();
        system.horizon = Scale::Unbounded;
        system
    }

    /// Partial translation system of `Z^2` on a `w x h` grid window.
    pub fn translation_grid(w: u32, h: u32) -> PartialSystem {
        let group = GroupModel::free_abelian(2);
        let points: Vec<u32> = (0..w * h).collect();
        let coord = move |p: u32| (p / h, p % h);
        let mut entries: BTreeMap<Element, Vec<(u32, u32)>> = BTreeMap::new();
        for (axis, sign) in [(0usize, 1i64), (0, -1), (1, 1), (1, -1)] {
            let mut v = vec![0i64; 2];
            v[axis] = sign;
            let mut pairs = Vec::new();
            for p in 0..w * h {
                let (x, y) = coord(p);
                let nx = x as i64 + if axis == 0 { sign } else { 0 };
                let ny = y as i64 + if axis == 1 { sign } else { 0 };
                if nx >= 0 && nx < w as i64 && ny >= 0 && ny < h as i64 {
                    pairs.push((p, (nx as u32) * h + ny as u32));
                }
            }
            entries.insert(Element::Vector(v), pairs);
        }
        let mut system = PartialSystem::from_maps(group, points, &entries).unwrap();
        system.horizon = Scale::Unbounded;
        system
    }

    pub fn points(&self) -> &[u32] {
        &self.points
    }

    pub fn group(&self) -> &GroupModel {
        &self.group
    }

    pub fn generators(&self) -> &[Element] {
        &self.gens
    }

    pub fn horizon(&self) -> Scale {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn index_of(&self, point: u32) -> Result<usize> {
        self.points
            .binary_search(&point)
            .map_err(|_| Error::UnknownPoint(point))
    }

    /// Raw generator table entries, for serialization.
    pub fn map_entries(&self) -> BTreeMap<Element, Vec<(u32, u32)>> {
        let mut out = BTreeMap::new();
        for (slot, gen) in self.gens.iter().enumerate() {
            let pairs: Vec<(u32, u32)> = self.maps[slot]
                .iter()
                .enumerate()
                .filter_map(|(i, img)| img.map(|d| (self.points[i], self.points[d as usize])))
                .collect();
            out.insert(gen.clone(), pairs);
        }
        out
    }

    /// Force the horizon; used by constructors that know the system comes
    /// from a genuine action.
    pub fn assume_unbounded_horizon(&mut self) {
        self.horizon = Scale::Unbounded;
    }

    fn check_scale(&self, scale: Scale) -> Result<()> {
        if scale.at_most(self.horizon) {
            Ok(())
        } else {
            Err(Error::ScaleExceedsHorizon {
                requested: scale.as_finite().unwrap_or(u64::MAX),
                horizon: self.horizon.as_finite().unwrap_or(u64::MAX),
            })
        }
    }

    /// Validate identity, inverse and composition-coherence axioms up to
    /// word length `horizon`.  Violations are returned, not raised; on a
    /// clean report the stored horizon is raised to the validated length.
    pub fn validate(&mut self, horizon: u64) -> ValidationReport {
        let mut violations = Vec::new();

        for (slot, gen) in self.gens.iter().enumerate() {
            // injectivity
            let mut preimage: HashMap<u32, u32> = HashMap::new();
            for (i, img) in self.maps[slot].iter().enumerate() {
                if let Some(d) = img {
                    if let Some(&prev) = preimage.get(d) {
                        violations.push(AxiomViolation::NotInjective {
                            gen: gen.clone(),
                            left: self.points[prev as usize],
                            right: self.points[i],
                            image: self.points[*d as usize],
                        });
                    } else {
                        preimage.insert(*d, i as u32);
                    }
                }
            }
            // inverse table matches
            let inv = self.group.inv(gen);
            if let Some(inv_slot) = self.gens.iter().position(|g| *g == inv) {
                for (i, img) in self.maps[slot].iter().enumerate() {
                    if let Some(d) = img {
                        if self.maps[inv_slot][*d as usize] != Some(i as u32) {
                            violations.push(AxiomViolation::InverseMismatch {
                                gen: gen.clone(),
                                point: self.points[i],
                            });
                        }
                    }
                }
            }
        }

        // word coherence: BFS over the word ball, unioning composite tables
        // and reporting conflicts.  Stored generator tables must extend any
        // composite realizing the same element.
        let mut tables: HashMap<Element, Vec<Option<u32>>> = HashMap::new();
        let identity = self.group.identity();
        tables.insert(identity.clone(), (0..self.points.len() as u32).map(Some).collect());
        let mut frontier = vec![identity];
        for _ in 0..horizon {
            let mut next_frontier = Vec::new();
            for word in &frontier {
                let base = tables[word].clone();
                for (slot, gen) in self.gens.iter().enumerate() {
                    let element = self.group.mul(gen, word);
                    let mut composite = vec![None; self.points.len()];
                    for (i, mid) in base.iter().enumerate() {
                        if let Some(m) = mid {
                            composite[i] = self.maps[slot][*m as usize];
                        }
                    }
                    match tables.get_mut(&element) {
                        None => {
                            // seed with the stored table when the element is
                            // itself a generator, so extensions are checked
                            let stored = self
                                .gens
                                .iter()
                                .position(|g| *g == element)
                                .map(|s| self.maps[s].clone());
                            let mut table = stored.unwrap_or_else(|| vec![None; self.points.len()]);
                            let is_generator = self.gens.contains(&element);
                            for (i, img) in composite.iter().enumerate() {
                                if let Some(d) = img {
                                    match table[i] {
                                        None => {
                                            if is_generator {
                                                violations.push(
                                                    AxiomViolation::MissingExtension {
                                                        element: element.clone(),
                                                        point: self.points[i],
                                                    },
                                                );
                                            }
                                            table[i] = Some(*d);
                                        }
                                        Some(existing) if existing != *d => {
                                            violations.push(AxiomViolation::Incoherent {
                                                element: element.clone(),
                                                point: self.points[i],
                                                images: (
                                                    self.points[existing as usize],
                                                    self.points[*d as usize],
                                                ),
                                            });
                                        }
                                        _ => {}
                                    }
                                }
                            }
                            tables.insert(element.clone(), table);
                            next_frontier.push(element);
                        }
                        Some(table) => {
                            for (i, img) in composite.iter().enumerate() {
                                if let Some(d) = img {
                                    match table[i] {
                                        None => table[i] = Some(*d),
                                        Some(existing) if existing != *d => {
                                            violations.push(AxiomViolation::Incoherent {
                                                element: element.clone(),
                                                point: self.points[i],
                                                images: (
                                                    self.points[existing as usize],
                                                    self.points[*d as usize],
                                                ),
                                            });
                                        }
                                        _ => {}
                                    }
                                }
                            }
                        }
                    }
                }
            }
            frontier = next_frontier;
            if frontier.is_empty() {
                break;
            }
        }

        if violations.is_empty() && !Scale::Finite(horizon).at_most(self.horizon) {
            self.horizon = Scale::Finite(horizon);
        }
        ValidationReport { horizon, violations }
    }

    /// Restriction of the system to a subset of its points.
    pub fn restrict(&self, subset: &BTreeSet<u32>) -> Result<PartialSystem> {
        let keep: Vec<u32> = self
            .points
            .iter()
            .copied()
            .filter(|p| subset.contains(p))
            .collect();
        for p in subset {
            if self.points.binary_search(p).is_err() {
                return Err(Error::UnknownPoint(*p));
            }
        }
        let old_index: HashMap<u32, usize> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, i))
            .collect();
        let new_index: HashMap<u32, u32> = keep
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, i as u32))
            .collect();
        let maps = self
            .maps
            .iter()
            .map(|table| {
                keep.iter()
                    .map(|&p| {
                        table[old_index[&p]].and_then(|d| {
                            new_index.get(&self.points[d as usize]).copied()
                        })
                    })
                    .collect()
            })
            .collect();
        Ok(PartialSystem {
            points: keep,
            group: self.group.clone(),
            gens: self.gens.clone(),
            maps,
            horizon: self.horizon,
        })
    }

    /// Image of a point under one stored generator.
    pub fn apply_gen(&self, gen: &Element, point: u32) -> Result<Option<u32>> {
        let slot = self
            .gens
            .iter()
            .position(|g| g == gen)
            .ok_or_else(|| Error::precondition(format!("not a stored generator: {gen:?}")))?;
        let idx = self.index_of(point)?;
        Ok(self.maps[slot][idx].map(|d| self.points[d as usize]))
    }

    /// Orbit ball: images of `point` under all defined compositions of at
    /// most `radius` generator moves.
    pub fn orbit_ball(&self, point: u32, radius: Scale) -> Result<BTreeSet<u32>> {
        self.check_scale(radius)?;
        let start = self.index_of(point)? as u32;
        Ok(self
            .orbit_ball_indices(start, radius)
            .into_iter()
            .map(|i| self.points[i as usize])
            .collect())
    }

    fn orbit_ball_indices(&self, start: u32, radius: Scale) -> Vec<u32> {
        let mut seen = vec![false; self.points.len()];
        seen[start as usize] = true;
        let mut out = vec![start];
        let mut frontier = vec![start];
        let mut depth = 0u64;
        loop {
            if let Scale::Finite(r) = radius {
                if depth >= r {
                    break;
                }
            }
            let mut next = Vec::new();
            for &p in &frontier {
                for table in &self.maps {
                    if let Some(d) = table[p as usize] {
                        if !seen[d as usize] {
                            seen[d as usize] = true;
                            out.push(d);
                            next.push(d);
                        }
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
            depth += 1;
        }
        out
    }

    /// Chain components of `subset` at the given scale: two points are
    /// joined when one lies in the orbit ball of the other, with every
    /// chain point inside the subset.
    pub fn components(&self, subset: &BTreeSet<u32>, scale: Scale) -> Result<ComponentPartition> {
        self.check_scale(scale)?;
        let base: Vec<u32> = self
            .points
            .iter()
            .copied()
            .filter(|p| subset.contains(p))
            .collect();
        for p in subset {
            if self.points.binary_search(p).is_err() {
                return Err(Error::UnknownPoint(*p));
            }
        }
        let member: BTreeSet<u32> = base.iter().copied().collect();
        let mut class: BTreeMap<u32, usize> = BTreeMap::new();
        let mut classes: Vec<Vec<u32>> = Vec::new();
        for &p in &base {
            if class.contains_key(&p) {
                continue;
            }
            let id = classes.len();
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([p]);
            class.insert(p, id);
            while let Some(cur) = queue.pop_front() {
                comp.push(cur);
                let idx = self.index_of(cur).unwrap() as u32;
                for q in self.orbit_ball_indices(idx, scale) {
                    let qp = self.points[q as usize];
                    if member.contains(&qp) && !class.contains_key(&qp) {
                        class.insert(qp, id);
                        queue.push_back(qp);
                    }
                }
            }
            comp.sort_unstable();
            classes.push(comp);
        }
        Ok(ComponentPartition { base_set: base, scale, classes })
    }

    /// Verify a cover: the ground must be covered and each family's chain
    /// components at `scale` must have cardinality at most `bound`.
    pub fn check_cover(&self, cover: &Cover, scale: Scale, bound: u64) -> Result<CoverCheck> {
        self.check_scale(scale)?;
        let union: BTreeSet<u32> = (0..cover.families.len())
            .flat_map(|f| cover.family_union(f))
            .collect();
        for &p in &cover.ground {
            if !union.contains(&p) {
                return Ok(CoverCheck::Uncovered { point: p });
            }
        }
        let mut per_family = Vec::with_capacity(cover.families.len());
        let mut observed = 0u64;
        for family in 0..cover.families.len() {
            let pts = cover.family_union(family);
            let partition = self.components(&pts, scale)?;
            let mut family_max = 0u64;
            for class in &partition.classes {
                let size = class.len() as u64;
                if size > bound {
                    return Ok(CoverCheck::ComponentTooBig {
                        family,
                        component: class.clone(),
                        cardinality: size,
                    });
                }
                family_max = family_max.max(size);
            }
            observed = observed.max(family_max);
            per_family.push(family_max);
        }
        Ok(CoverCheck::Certified(CoverCertificate {
            scale,
            bound,
            observed,
            per_family_observed: per_family,
        }))
    }

    /// Check whether distinct elements of the word ball of `radius` always
    /// act differently wherever both are defined.
    pub fn local_freeness(&self, radius: u64, caps: &Caps) -> Result<Freeness> {
        self.check_scale(Scale::Finite(radius))?;
        for start in 0..self.points.len() as u32 {
            if let Some(collision) = self.label_collision(start, radius, caps)? {
                return Ok(collision);
            }
        }
        Ok(Freeness::Free)
    }

    /// Explore images of `start` under the word ball; a second element
    /// reaching an already-labelled image is a freeness collision.
    fn label_collision(&self, start: u32, radius: u64, caps: &Caps) -> Result<Option<Freeness>> {
        let mut labels: HashMap<u32, Element> = HashMap::new();
        let mut element_seen: HashMap<Element, u32> = HashMap::new();
        let identity = self.group.identity();
        labels.insert(start, identity.clone());
        element_seen.insert(identity.clone(), start);
        let mut frontier: Vec<(Element, u32)> = vec![(identity, start)];
        for _ in 0..radius {
            let mut next = Vec::new();
            for (word, at) in &frontier {
                for (slot, gen) in self.gens.iter().enumerate() {
                    if let Some(image) = self.maps[slot][*at as usize] {
                        let element = self.group.mul(gen, word);
                        if element_seen.len() as u64 > caps.max_ball_elements {
                            return Err(Error::ResourceCap {
                                what: "freeness exploration",
                                needed: element_seen.len() as u64,
                                cap: caps.max_ball_elements,
                            });
                        }
                        match element_seen.get(&element) {
                            Some(_) => continue, // same element, coherent image
                            None => {
                                element_seen.insert(element.clone(), image);
                                if let Some(prev) = labels.get(&image) {
                                    if *prev != element {
                                        return Ok(Some(Freeness::Collision {
                                            point: self.points[start as usize],
                                            left: prev.clone(),
                                            right: element,
                                        }));
                                    }
                                } else {
                                    labels.insert(image, element.clone());
                                }
                                next.push((element, image));
                            }
                        }
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok(None)
    }

    /// Chart an orbit ball into the group's word ball.  Requires local
    /// freeness at the chart radius; fails with the collision witness.
    pub fn cayley_chart(&self, base: u32, radius: u64, caps: &Caps) -> Result<CayleyChart> {
        self.check_scale(Scale::Finite(radius))?;
        let start = self.index_of(base)? as u32;
        let mut labels: BTreeMap<u32, Element> = BTreeMap::new();
        let mut element_seen: HashMap<Element, u32> = HashMap::new();
        let identity = self.group.identity();
        labels.insert(start, identity.clone());
        element_seen.insert(identity.clone(), start);
        let mut frontier: Vec<(Element, u32)> = vec![(identity, start)];
        for _ in 0..radius {
            let mut next = Vec::new();
            for (word, at) in &frontier {
                for (slot, gen) in self.gens.iter().enumerate() {
                    if let Some(image) = self.maps[slot][*at as usize] {
                        let element = self.group.mul(gen, word);
                        if element_seen.contains_key(&element) {
                            continue;
                        }
                        if element_seen.len() as u64 >= caps.max_ball_elements {
                            return Err(Error::ResourceCap {
                                what: "chart exploration",
                                needed: element_seen.len() as u64 + 1,
                                cap: caps.max_ball_elements,
                            });
                        }
                        element_seen.insert(element.clone(), image);
                        if let Some(prev) = labels.get(&image) {
                            if *prev != element {
                                return Err(Error::FreenessViolation {
                                    point: self.points[start as usize],
                                    left: format!("{prev:?}"),
                                    right: format!("{element:?}"),
                                });
                            }
                        } else {
                            labels.insert(image, element.clone());
                        }
                        next.push((element, image));
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        let labels = labels
            .into_iter()
            .map(|(idx, elt)| (self.points[idx as usize], elt))
            .collect();
        Ok(CayleyChart { base_point: base, radius, labels })
    }

    /// Deterministic labelling of the orbit of `base` by group elements:
    /// breadth-first over generator moves, first label wins.  On a free
    /// system this agrees with `cayley_chart`; on a periodic one it is the
    /// canonical choice of one word per point.
    pub fn orbit_labels(&self, base: u32) -> BTreeMap<u32, Element> {
        let start = match self.index_of(base) {
            Ok(i) => i as u32,
            Err(_) => return BTreeMap::new(),
        };
        let mut labels: BTreeMap<u32, Element> = BTreeMap::new();
        labels.insert(start, self.group.identity());
        let mut frontier = vec![start];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for &at in &frontier {
                let word = labels[&at].clone();
                for (slot, gen) in self.gens.iter().enumerate() {
                    if let Some(image) = self.maps[slot][at as usize] {
                        if !labels.contains_key(&image) {
                            labels.insert(image, self.group.mul(gen, &word));
                            next.push(image);
                        }
                    }
                }
            }
            frontier = next;
        }
        labels
            .into_iter()
            .map(|(idx, elt)| (self.points[idx as usize], elt))
            .collect()
    }

    /// Orbits of the full system (all generator moves, subsets ignored).
    pub fn orbits(&self) -> Vec<Vec<u32>> {
        let all: BTreeSet<u32> = self.points.iter().copied().collect();
        self.components(&all, Scale::Unbounded)
            .expect("unbounded scan cannot fail")
            .classes
    }

    /// Measured growth: worst orbit-ball cardinality per radius, compared
    /// against the group's ball counts.
    pub fn system_growth(&self, max_radius: u64) -> Result<SystemGrowth> {
        self.check_scale(Scale::Finite(max_radius))?;
        let mut counts = Vec::with_capacity(max_radius as usize + 1);
        for r in 0..=max_radius {
            let mut worst = 0u64;
            for i in 0..self.points.len() as u32 {
                worst = worst.max(self.orbit_ball_indices(i, Scale::Finite(r)).len() as u64);
            }
            counts.push(worst);
        }
        let group_counts: Vec<u64> = (0..=max_radius)
            .map(|r| self.group.ball_count_u64(r))
            .collect();
        let dominated = counts
            .iter()
            .zip(&group_counts)
            .all(|(sys, grp)| sys <= grp);
        Ok(SystemGrowth { radii: (0..=max_radius).collect(), counts, group_counts, dominated })
    }
}

fn decode_mixed(mut p: u32, dims: &[u32]) -> Vec<u32> {
    let mut coords = vec![0u32; dims.len()];
    for axis in (0..dims.len()).rev() {
        coords[axis] = p % dims[axis];
        p /= dims[axis];
    }
    coords
}

fn encode_mixed(coords: &[u32], dims: &[u32]) -> u32 {
    let mut p = 0u32;
    for (axis, &c) in coords.iter().enumerate() {
        p = p * dims[axis] + c;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_points(system: &PartialSystem) -> BTreeSet<u32> {
        system.points().iter().copied().collect()
    }

    #[test]
    fn full_cycle_validates() {
        let mut system = PartialSystem::translation_cycle(5);
        let report = system.validate(10);
        assert!(report.is_valid(), "{:?}", report.violations);
    }

    #[test]
    fn seeded_inverse_defect_is_reported() {
        let group = GroupModel::free_abelian(1);
        let mut entries = BTreeMap::new();
        entries.insert(Element::Vector(vec![1]), vec![(0u32, 1u32), (1, 2)]);
        // broken inverse: misses the (1, 0) entry
        entries.insert(Element::Vector(vec![-1]), vec![(2u32, 1u32)]);
        let mut system = PartialSystem::from_maps(group, vec![0, 1, 2], &entries).unwrap();
        let report = system.validate(2);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, AxiomViolation::InverseMismatch { point: 0, .. })));
    }

    #[test]
    fn restrict_window_of_cycle() {
        let system = PartialSystem::translation_cycle(12);
        let subset: BTreeSet<u32> = (0..=5).collect();
        let restricted = system.restrict(&subset).unwrap();
        let fwd = Element::Vector(vec![1]);
        for p in 0..=4u32 {
            assert_eq!(restricted.apply_gen(&fwd, p).unwrap(), Some(p + 1));
        }
        assert_eq!(restricted.apply_gen(&fwd, 5).unwrap(), None);
        // restricting to everything is the identity
        let same = system.restrict(&all_points(&system)).unwrap();
        assert_eq!(system, same);
    }

    #[test]
    fn components_of_cycle_subsets() {
        let mut system = PartialSystem::translation_cycle(10);
        assert!(system.validate(4).is_valid());

        let whole = all_points(&system);
        let partition = system.components(&whole, Scale::Finite(1)).unwrap();
        assert_eq!(partition.classes.len(), 1);
        assert_eq!(partition.max_cardinality(), 10);

        let split: BTreeSet<u32> = [0, 1, 2, 5, 6].into_iter().collect();
        let partition = system.components(&split, Scale::Finite(1)).unwrap();
        let mut sizes: Vec<usize> = partition.classes.iter().map(|c| c.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 3]);

        let evens: BTreeSet<u32> = [0, 2, 4, 6, 8].into_iter().collect();
        let partition = system.components(&evens, Scale::Finite(1)).unwrap();
        assert_eq!(partition.classes.len(), 5);
        let partition = system.components(&evens, Scale::Finite(2)).unwrap();
        assert_eq!(partition.classes.len(), 1);
        assert_eq!(partition.max_cardinality(), 5);
    }

    #[test]
    fn parity_cover_checks() {
        let system = PartialSystem::translation_cycle(10);
        let evens: BTreeSet<u32> = [0, 2, 4, 6, 8].into_iter().collect();
        let odds: BTreeSet<u32> = [1, 3, 5, 7, 9].into_iter().collect();
        let cover = Cover {
            ground: all_points(&system),
            families: vec![vec![evens], vec![odds]],
        };
        let check = system.check_cover(&cover, Scale::Finite(1), 1).unwrap();
        let cert = check.certificate().expect("parity cover certifies at scale 1");
        assert_eq!(cert.observed, 1);

        let check = system.check_cover(&cover, Scale::Finite(2), 1).unwrap();
        assert!(matches!(check, CoverCheck::ComponentTooBig { .. }));

        // a certified bound stays certified for any larger bound
        for bound in 1..=4 {
            assert!(system
                .check_cover(&cover, Scale::Finite(1), bound)
                .unwrap()
                .is_certified());
        }
    }

    #[test]
    fn orbit_balls() {
        let system = PartialSystem::translation_cycle(12);
        let ball = system.orbit_ball(0, Scale::Finite(0)).unwrap();
        assert_eq!(ball, [0u32].into_iter().collect());
        let ball = system.orbit_ball(0, Scale::Finite(3)).unwrap();
        let expected: BTreeSet<u32> = [9, 10, 11, 0, 1, 2, 3].into_iter().collect();
        assert_eq!(ball, expected);
    }

    #[test]
    fn freeness_of_cycles() {
        let caps = Caps::default();
        let system = PartialSystem::translation_cycle(12);
        assert!(system.local_freeness(5, &caps).unwrap().is_free());

        let small = PartialSystem::translation_cycle(4);
        match small.local_freeness(5, &caps).unwrap() {
            Freeness::Collision { left, right, .. } => {
                let diff = (&left, &right);
                // the identity and the full rotation collide
                let word = |e: &Element| match e {
                    Element::Vector(v) => v[0].abs(),
                    _ => unreachable!(),
                };
                assert!(word(diff.0).abs_diff(word(diff.1)) >= 4 || word(diff.0) + word(diff.1) >= 4);
            }
            Freeness::Free => panic!("period-4 rotation is not free at radius 5"),
        }
    }

    #[test]
    fn chart_equivariance_on_cycle() {
        let caps = Caps::default();
        let system = PartialSystem::translation_cycle(12);
        let chart = system.cayley_chart(0, 3, &caps).unwrap();
        assert_eq!(chart.labels.len(), 7);
        let image = chart.image();
        for k in -3i64..=3 {
            assert!(image.contains(&Element::Vector(vec![k])));
        }
        // equivariance: moving by a generator multiplies the label
        let group = system.group().clone();
        for (&point, label) in &chart.labels {
            for gen in system.generators() {
                if let Some(next) = system.apply_gen(gen, point).unwrap() {
                    if let Some(next_label) = chart.labels.get(&next) {
                        let expected = group.mul(gen, label);
                        if group.word_length(&expected) <= 3 {
                            assert_eq!(*next_label, expected);
                        }
                    }
                }
            }
        }
        // radius zero charts only the base point
        let chart = system.cayley_chart(4, 0, &caps).unwrap();
        assert_eq!(chart.labels.len(), 1);
        assert_eq!(chart.image(), vec![group.identity()]);
    }

    #[test]
    fn growth_of_cycle_and_restriction() {
        let system = PartialSystem::translation_cycle(100);
        let growth = system.system_growth(5).unwrap();
        assert_eq!(growth.counts, vec![1, 3, 5, 7, 9, 11]);
        assert!(growth.dominated);

        let subset: BTreeSet<u32> = (0..50).collect();
        let restricted = system.restrict(&subset).unwrap();
        let sub_growth = restricted.system_growth(5).unwrap();
        for (a, b) in sub_growth.counts.iter().zip(&growth.counts) {
            assert!(a <= b);
        }
    }

    #[test]
    fn components_coarsen_with_scale() {
        let system = PartialSystem::translation_cycle(30);
        let subset: BTreeSet<u32> = (0..30).filter(|p| p % 3 != 2).collect();
        let fine = system.components(&subset, Scale::Finite(1)).unwrap();
        let coarse = system.components(&subset, Scale::Finite(2)).unwrap();
        let coarse_class = coarse.class_of();
        for class in &fine.classes {
            let targets: BTreeSet<usize> =
                class.iter().map(|p| coarse_class[p]).collect();
            assert_eq!(targets.len(), 1, "fine class split across coarse classes");
        }
    }
}
