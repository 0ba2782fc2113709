//! Concrete isometric actions, finite approximating actions, piece systems
//! over separated decompositions, and the end-to-end pipeline experiment.
//!
//! Rotation angles and translation vectors are exact rationals on circles
//! and tori of unit circumference, so the finite approximations act with
//! zero equivariance error and every certificate is decided exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::Instant;

use num::Zero;

use crate::caps::Caps;
use crate::cover::{
    brute_min_cover, poly_growth_cover, refine_cover, union_schedule, BoundValue, BruteOutcome,
    ControlFn, EngineCertificate,
};
use crate::error::{Error, Result};
use crate::group::{growth_profile, Element, GroupModel};
use crate::metric::{
    cantor_decompose, validate_decomposition, CoordMetric, Decomposition, DecompositionCheck,
    Dist, FiniteMetricSpace, Rat,
};
use crate::system::{Cover, CoverCheck, Freeness, PartialSystem, Scale};

/// A concrete isometric action given by exact rational parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionKind {
    /// `Z` rotating the unit-circumference circle by `angle`.
    CircleRotation { angle: Rat },
    /// `Z^d` translating the d-torus, one axis-aligned shift per generator.
    TorusTranslation { shifts: Vec<Rat> },
    /// `Z` translating the cyclic group `Z/n`, carried as `n` circle points.
    CyclicTranslation { n: u64 },
}

/// A validated action: isometric by construction, with the first length at
/// which a word acts trivially recorded as the freeness horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionModel {
    pub kind: ActionKind,
    pub group: GroupModel,
    /// No nontrivial relation acts trivially at word length below this.
    pub first_relation: u64,
}

fn reduced(r: &Rat) -> (i128, i128) {
    (*r.numer(), *r.denom())
}

/// Build and validate an action specification.  Rejects parameters whose
/// first trivially-acting word is within the requested horizon.
pub fn build_action(kind: ActionKind, horizon: u64) -> Result<ActionModel> {
    let (group, first_relation) = match &kind {
        ActionKind::CircleRotation { angle } => {
            let (p, q) = reduced(angle);
            if q <= 1 || p == 0 {
                return Err(Error::precondition(
                    "rotation angle must be a nonzero proper fraction",
                ));
            }
            (GroupModel::free_abelian(1), q as u64)
        }
        ActionKind::TorusTranslation { shifts } => {
            if shifts.is_empty() {
                return Err(Error::precondition("torus translation needs at least one axis"));
            }
            let mut first = u64::MAX;
            for s in shifts {
                let (p, q) = reduced(s);
                if q <= 1 || p == 0 {
                    return Err(Error::precondition(
                        "torus shifts must be nonzero proper fractions",
                    ));
                }
                first = first.min(q as u64);
            }
            (GroupModel::free_abelian(shifts.len() as u32), first)
        }
        ActionKind::CyclicTranslation { n } => {
            if *n < 2 {
                return Err(Error::precondition("cyclic translation needs n >= 2"));
            }
            (GroupModel::free_abelian(1), *n)
        }
    };
    if first_relation <= horizon {
        return Err(Error::precondition(format!(
            "action has a relation at word length {first_relation} <= requested horizon {horizon}"
        )));
    }
    Ok(ActionModel { kind, group, first_relation })
}

/// Finite approximating action: a grid of exact orbit points on which the
/// generators act by index shifts, with zero equivariance error.
#[derive(Debug, Clone)]
pub struct ApproximatingAction {
    pub space: FiniteMetricSpace,
    /// Grid sizes per axis (one entry for circle and cyclic actions).
    pub dims: Vec<u32>,
    /// Index shift per axis induced by the corresponding generator.
    pub shifts: Vec<u32>,
    /// Worst distance from a space point to the grid; zero for cyclic
    /// actions where the space is the grid itself.
    pub density: Rat,
    pub epsilon: Rat,
    pub f_scale: u64,
    pub group: GroupModel,
}

impl ApproximatingAction {
    fn total(&self) -> u32 {
        self.dims.iter().product()
    }

    fn decode(&self, mut p: u32) -> Vec<u32> {
        let mut coords = vec![0u32; self.dims.len()];
        for axis in (0..self.dims.len()).rev() {
            coords[axis] = p % self.dims[axis];
            p /= self.dims[axis];
        }
        coords
    }

    fn encode(&self, coords: &[u32]) -> u32 {
        let mut p = 0u32;
        for (axis, &c) in coords.iter().enumerate() {
            p = p * self.dims[axis] + c;
        }
        p
    }

    /// Exact image of grid point `p` under a group element.
    pub fn act(&self, elt: &Element, p: u32) -> u32 {
        match elt {
            Element::Vector(v) => {
                let mut coords = self.decode(p);
                for (axis, m) in v.iter().enumerate() {
                    let n = self.dims[axis] as i64;
                    let delta = (self.shifts[axis] as i64) * m;
                    coords[axis] = ((coords[axis] as i64 + delta).rem_euclid(n)) as u32;
                }
                self.encode(&coords)
            }
            _ => panic!("approximating actions act through lattice elements"),
        }
    }

    /// The full approximating system over the group rescaled to `radius`.
    pub fn system(&self, radius: u32) -> PartialSystem {
        let group = if radius == 1 {
            self.group.clone()
        } else {
            self.group.rescaled(radius)
        };
        let points: Vec<u32> = (0..self.total()).collect();
        let this = self.clone();
        PartialSystem::from_action(group, points, move |g, p| this.act(g, p))
    }

    /// Minimal displacement of any nontrivial element of the word ball of
    /// `radius`: the separation scale below which distinct translates of a
    /// small set stay disjoint.
    pub fn min_displacement(&self, radius: u64, caps: &Caps) -> Result<(Rat, Element)> {
        let ball = self.group.word_ball(radius, caps)?;
        let mut best: Option<(Rat, Element)> = None;
        for elt in &ball.elements {
            if *elt == self.group.identity() {
                continue;
            }
            let moved = self.act(elt, 0);
            let d = match self.space.dist(0, moved)? {
                Dist::Exact(v) => v,
                Dist::SqrtOf(_) => unreachable!("grid metrics are rational"),
            };
            if best.as_ref().map_or(true, |(b, _)| d < *b) {
                best = Some((d, elt.clone()));
            }
        }
        best.ok_or_else(|| Error::precondition("no nontrivial element in the ball"))
    }
}

/// Build the finite approximating action for an action model.
///
/// Rational rotations are approximated by their exact finite orbits, so the
/// equivariance error is zero; only the grid density constrains `epsilon`.
pub fn approximate_action(
    action: &ActionModel,
    f_scale: u64,
    epsilon: Rat,
) -> Result<ApproximatingAction> {
    if epsilon <= Rat::zero() {
        return Err(Error::precondition("epsilon must be positive"));
    }
    let (dims, shifts, density): (Vec<u32>, Vec<u32>, Rat) = match &action.kind {
        ActionKind::CircleRotation { angle } => {
            let (p, q) = reduced(angle);
            let q_u = q as u32;
            let shift = (p.rem_euclid(q)) as u32;
            (vec![q_u], vec![shift], Rat::new(1, q))
        }
        ActionKind::TorusTranslation { shifts } => {
            let mut dims = Vec::new();
            let mut s = Vec::new();
            let mut density = Rat::zero();
            for shift in shifts {
                let (p, q) = reduced(shift);
                dims.push(q as u32);
                s.push((p.rem_euclid(q)) as u32);
                density = density.max(Rat::new(1, q));
            }
            (dims, s, density)
        }
        ActionKind::CyclicTranslation { n } => {
            // the space is the finite group itself; density is not a
            // constraint
            (vec![*n as u32], vec![1], Rat::zero())
        }
    };
    if density >= epsilon {
        return Err(Error::precondition(format!(
            "grid density {density} is not below epsilon {epsilon}; use a larger denominator"
        )));
    }
    let total: u32 = dims.iter().product();
    let mut coords = Vec::with_capacity(total as usize);
    for p in 0..total {
        let mut c = vec![0u32; dims.len()];
        let mut v = p;
        for axis in (0..dims.len()).rev() {
            c[axis] = v % dims[axis];
            v /= dims[axis];
        }
        coords.push(
            c.iter()
                .zip(&dims)
                .map(|(&i, &n)| Rat::new(i as i128, n as i128))
                .collect(),
        );
    }
    let ids: Vec<u32> = (0..total).collect();
    let space = FiniteMetricSpace::from_coords(ids, CoordMetric::Torus, coords)?;
    Ok(ApproximatingAction {
        space,
        dims,
        shifts,
        density,
        epsilon,
        f_scale,
        group: action.group.clone(),
    })
}

/// Decomposition suitable for piece systems: built at half scale with
/// doubled separation, then fattened so every set gains a small interior
/// margin while the `(epsilon, k epsilon)` certificate still holds.
///
/// A known doubling constant may be supplied to skip the greedy estimate,
/// which is expensive on large grids.
pub fn decompose_for_pieces(
    space: &FiniteMetricSpace,
    epsilon: Rat,
    k: u64,
    doubling: Option<u64>,
) -> Result<Decomposition> {
    let half = epsilon / Rat::from_integer(2);
    let inner_k = 2 * (k + 1); // separation 2(k+1) * (eps/2) = (k+1) eps
    let inner = cantor_decompose(space, half, inner_k, doubling)?;
    let margin = epsilon / Rat::from_integer(4);
    let mut families = Vec::with_capacity(inner.decomposition.families.len());
    for family in &inner.decomposition.families {
        let mut fat_family = Vec::with_capacity(family.len());
        for set in family {
            let mut fat = set.clone();
            for (idx, &id) in space.ids().iter().enumerate() {
                if fat.contains(&id) {
                    continue;
                }
                let close = set.iter().any(|&s| {
                    let si = space.index_of(s).expect("set point exists");
                    space.dist_idx(idx, si).lt(&Dist::Exact(margin))
                });
                if close {
                    fat.insert(id);
                }
            }
            fat_family.push(fat);
        }
        families.push(fat_family);
    }
    let dec = Decomposition {
        families,
        epsilon,
        delta: epsilon * Rat::from_integer(k as i128),
    };
    match validate_decomposition(space, &dec)? {
        DecompositionCheck::Certified { .. } => Ok(dec),
        other => Err(Error::precondition(format!(
            "fattened decomposition fails its certificate: {other:?}"
        ))),
    }
}

/// A piece system for one decomposition family, with its construction
/// certificates.
#[derive(Debug, Clone)]
pub struct FamilyPieces {
    /// The sets of this family, indexed by the system's point ids.
    pub pieces: Vec<BTreeSet<u32>>,
    pub system: PartialSystem,
    /// Grid points inside the neighborhood of the pieces but not on any
    /// piece.  The approximation is exact, so their orbits are already
    /// witnessed by piece points and they carry no extra incidence.
    pub dropped_strays: usize,
    pub condition_one: Vec<String>,
    pub condition_two: Vec<String>,
}

/// Piece systems over all families of a decomposition.
#[derive(Debug, Clone)]
pub struct PieceSystems {
    pub families: Vec<FamilyPieces>,
    pub scale: u64,
    pub word_horizon: u64,
    pub epsilon: Rat,
}

impl PieceSystems {
    pub fn all_faithful(&self) -> bool {
        self.families
            .iter()
            .all(|f| f.condition_one.is_empty() && f.condition_two.is_empty())
    }
}

/// Build per-family piece systems from an approximating action and a
/// separated decomposition.
///
/// For each family: restrict the grid action to the `2 epsilon`
/// neighborhood of the family's pieces, reassign stray points injectively
/// onto unused piece points, let each ball-of-`scale` element descend to a
/// partial map on pieces, and keep only domains whose true translate meets
/// some piece.  Faithfulness is then checked exhaustively: translate
/// incidence forces the descended map (condition one), and unequal words up
/// to length `word_horizon + 1` never agree at a piece (condition two).
pub fn build_piece_systems(
    approx: &ApproximatingAction,
    dec: &Decomposition,
    scale: u64,
    word_horizon: u64,
    caps: &Caps,
) -> Result<PieceSystems> {
    let eps = approx.epsilon;
    // distinct translates of small sets must be disjoint at the word scale
    // the faithfulness check quantifies over
    let reach = 2 * (word_horizon + 1) * scale;
    let (min_disp, witness) = approx.min_displacement(reach, caps)?;
    if eps > min_disp {
        return Err(Error::precondition(format!(
            "epsilon {eps} exceeds the minimal displacement {min_disp} of {witness:?} within \
             word length {reach}; translates of small sets collide"
        )));
    }

    let rescaled = if scale == 1 {
        approx.group.clone()
    } else {
        approx.group.rescaled(scale as u32)
    };
    let letters: Vec<Element> = rescaled
        .generators()
        .into_iter()
        .filter(|g| *g != rescaled.identity())
        .collect();

    let two_eps = Dist::Exact(eps * Rat::from_integer(2));

    let mut families = Vec::with_capacity(dec.families.len());
    for family in &dec.families {
        let pieces: Vec<BTreeSet<u32>> = family.clone();
        let union: BTreeSet<u32> = pieces.iter().flatten().copied().collect();
        let piece_of: BTreeMap<u32, u16> = pieces
            .iter()
            .enumerate()
            .flat_map(|(i, set)| set.iter().map(move |&p| (p, i as u16)))
            .collect();

        // grid points near the pieces but not on them: with an exact
        // approximation their orbits are already witnessed by the piece
        // points, so they are counted and dropped rather than reassigned
        let mut dropped_strays = 0usize;
        for &id in approx.space.ids() {
            if union.contains(&id) {
                continue;
            }
            let idx = approx.space.index_of(id)?;
            let near = union.iter().any(|&u| {
                let ui = approx.space.index_of(u).expect("piece point");
                approx.space.dist_idx(idx, ui).lt(&two_eps)
            });
            if near {
                dropped_strays += 1;
            }
        }

        // descend each letter to a partial map on pieces: a piece maps
        // where the exact orbits of its points land
        let mut entries: BTreeMap<Element, Vec<(u32, u32)>> = BTreeMap::new();
        let mut condition_one = Vec::new();
        for letter in &letters {
            let mut table: BTreeMap<u16, u16> = BTreeMap::new();
            let mut collision = false;
            for (&x, &from_piece) in &piece_of {
                let w = approx.act(letter, x);
                if let Some(&to_piece) = piece_of.get(&w) {
                    match table.get(&from_piece) {
                        Some(&prev) if prev != to_piece => {
                            condition_one.push(format!(
                                "letter {letter:?} maps piece {from_piece} to both {prev} and {to_piece}"
                            ));
                            collision = true;
                        }
                        _ => {
                            table.insert(from_piece, to_piece);
                        }
                    }
                }
            }
            if collision {
                continue;
            }
            let pairs: Vec<(u32, u32)> =
                table.iter().map(|(&from, &to)| (from as u32, to as u32)).collect();
            entries.insert(letter.clone(), pairs);
        }

        let points: Vec<u32> = (0..pieces.len() as u32).collect();
        let mut system = PartialSystem::from_maps(rescaled.clone(), points, &entries)?;
        let horizon = (word_horizon + 1).max(pieces.len() as u64 + 1).max(8);
        let report = system.validate(horizon);
        if !report.is_valid() {
            return Err(Error::precondition(format!(
                "piece system fails the partial-action axioms: {:?}",
                report.violations[0]
            )));
        }

        // condition one, checked exhaustively through the exact action
        for letter in &letters {
            for (i, piece) in pieces.iter().enumerate() {
                for (j, other) in pieces.iter().enumerate() {
                    let meets = piece.iter().any(|&u| other.contains(&approx.act(letter, u)));
                    if meets {
                        match system.apply_gen(letter, i as u32)? {
                            Some(img) if img == j as u32 => {}
                            got => condition_one.push(format!(
                                "translate of piece {i} by {letter:?} meets piece {j} but the \
                                 descended map gives {got:?}"
                            )),
                        }
                    }
                }
            }
        }

        // condition two: unequal words never share an image at a piece
        let condition_two =
            faithfulness_violations(&system, &rescaled, &letters, word_horizon, caps)?;

        families.push(FamilyPieces {
            pieces,
            system,
            dropped_strays,
            condition_one,
            condition_two,
        });
    }
    Ok(PieceSystems { families, scale, word_horizon, epsilon: eps })
}

/// Exhaustive word check: every pair of words over the letters, of length
/// at most `word_horizon + 1`, that are unequal in the group must act
/// differently at every piece where both are defined.  Implemented by
/// walking the shared prefix tree once and recording, per piece, which
/// group element first produced each image.
fn faithfulness_violations(
    system: &PartialSystem,
    group: &GroupModel,
    letters: &[Element],
    word_horizon: u64,
    caps: &Caps,
) -> Result<Vec<String>> {
    let ball = group.word_ball(word_horizon + 1, caps)?;
    let elt_index: BTreeMap<&Element, usize> =
        ball.elements.iter().enumerate().map(|(i, e)| (e, i)).collect();
    let n = system.len();
    let mut owner: Vec<Option<usize>> = vec![None; n * n];
    let mut image_of: Vec<Option<u32>> = vec![None; n * ball.elements.len()];
    let mut violations = Vec::new();

    struct Walk<'a> {
        system: &'a PartialSystem,
        group: &'a GroupModel,
        letters: &'a [Element],
        elt_index: &'a BTreeMap<&'a Element, usize>,
        owner: &'a mut Vec<Option<usize>>,
        image_of: &'a mut Vec<Option<u32>>,
        violations: &'a mut Vec<String>,
        n: usize,
        ball: &'a [Element],
    }

    impl Walk<'_> {
        fn visit(&mut self, depth: u64, element: &Element, images: &[Option<u32>]) {
            let e = self.elt_index[element];
            for (piece, image) in images.iter().enumerate() {
                let Some(img) = image else { continue };
                match self.image_of[piece * self.ball.len() + e] {
                    None => self.image_of[piece * self.ball.len() + e] = Some(*img),
                    Some(prev) if prev != *img => self.violations.push(format!(
                        "element {element:?} acts incoherently at piece {piece}: {prev} vs {img}"
                    )),
                    _ => {}
                }
                let slot = piece * self.n + *img as usize;
                match self.owner[slot] {
                    None => self.owner[slot] = Some(e),
                    Some(prev) if prev != e => self.violations.push(format!(
                        "unequal elements {:?} and {element:?} both send piece {piece} to {img}",
                        self.ball[prev]
                    )),
                    _ => {}
                }
            }
            if depth == 0 {
                return;
            }
            for letter in self.letters {
                let next_elt = self.group.mul(letter, element);
                let mut next_images = vec![None; images.len()];
                let mut any = false;
                for (piece, image) in images.iter().enumerate() {
                    if let Some(img) = image {
                        if let Some(out) = self
                            .system
                            .apply_gen(letter, *img)
                            .expect("letter is a stored generator")
                        {
                            next_images[piece] = Some(out);
                            any = true;
                        }
                    }
                }
                if any {
                    self.visit(depth - 1, &next_elt, &next_images);
                }
            }
        }
    }

    let identity = group.identity();
    let start: Vec<Option<u32>> = system.points().iter().map(|&p| Some(p)).collect();
    let mut walk = Walk {
        system,
        group,
        letters,
        elt_index: &elt_index,
        owner: &mut owner,
        image_of: &mut image_of,
        violations: &mut violations,
        n,
        ball: &ball.elements,
    };
    walk.visit(word_horizon + 1, &identity, &start);
    Ok(violations)
}

/// Result of restricting an outer cover of the space to piece systems.
#[derive(Debug, Clone)]
pub struct LebesgueRestriction {
    /// Lebesgue number of the outer cover on the grid; `None` when a cover
    /// set is the whole space.
    pub lebesgue: Option<Rat>,
    /// For each family, the assignment of pieces to outer sets and the
    /// certificate of the induced cover.
    pub families: Vec<(Vec<usize>, CoverCheck)>,
}

/// Assign every piece to an outer cover set containing it and certify the
/// induced covers of the piece systems at the given scale and bound.
///
/// Requires `epsilon < lambda / (3 (bound + 1))` where `lambda` is the
/// cover's Lebesgue number on the grid.
pub fn lebesgue_restrict(
    approx: &ApproximatingAction,
    pieces: &PieceSystems,
    outer: &[BTreeSet<u32>],
    scale: u64,
    bound: u64,
) -> Result<LebesgueRestriction> {
    if outer.is_empty() {
        return Err(Error::precondition("outer cover needs at least one set"));
    }
    // lambda = min over points of max over sets of distance to complement
    let mut lebesgue: Option<Rat> = None;
    let mut whole_space = false;
    for idx in 0..approx.space.len() {
        let mut best: Option<Rat> = None;
        for set in outer {
            if !set.contains(&approx.space.ids()[idx]) {
                continue;
            }
            let complement: Vec<usize> = approx
                .space
                .ids()
                .iter()
                .enumerate()
                .filter(|(_, id)| !set.contains(id))
                .map(|(i, _)| i)
                .collect();
            if complement.is_empty() {
                whole_space = true;
                best = None;
                break;
            }
            let d = complement
                .iter()
                .map(|&c| match approx.space.dist_idx(idx, c) {
                    Dist::Exact(v) => v,
                    Dist::SqrtOf(_) => unreachable!("grid metrics are rational"),
                })
                .min()
                .expect("nonempty complement");
            if best.as_ref().map_or(true, |b| d > *b) {
                best = Some(d);
            }
        }
        if whole_space {
            break;
        }
        let best = best.ok_or_else(|| {
            Error::precondition(format!(
                "outer cover misses grid point {}",
                approx.space.ids()[idx]
            ))
        })?;
        if lebesgue.as_ref().map_or(true, |l| best < *l) {
            lebesgue = Some(best);
        }
    }
    if !whole_space {
        let lambda = lebesgue.expect("nonempty space");
        let threshold = lambda / Rat::from_integer(3 * (bound as i128 + 1));
        if approx.epsilon >= threshold {
            return Err(Error::precondition(format!(
                "epsilon {} is not below lambda / (3 (D + 1)) = {threshold}",
                approx.epsilon
            )));
        }
    }

    let mut families = Vec::with_capacity(pieces.families.len());
    for family in &pieces.families {
        let mut assignment = Vec::with_capacity(family.pieces.len());
        for (i, piece) in family.pieces.iter().enumerate() {
            let slot = outer.iter().position(|set| piece.iter().all(|p| set.contains(p)));
            match slot {
                Some(m) => assignment.push(m),
                None => {
                    return Err(Error::precondition(format!(
                        "piece {i} is not contained in any outer set"
                    )))
                }
            }
        }
        let mut cover_families: Vec<Vec<BTreeSet<u32>>> = vec![Vec::new(); outer.len()];
        for (m, sets) in cover_families.iter_mut().enumerate() {
            let members: BTreeSet<u32> = assignment
                .iter()
                .enumerate()
                .filter(|(_, &slot)| slot == m)
                .map(|(i, _)| i as u32)
                .collect();
            if !members.is_empty() {
                sets.push(members);
            }
        }
        let cover = Cover {
            ground: family.system.points().iter().copied().collect(),
            families: cover_families,
        };
        let check = family.system.check_cover(&cover, Scale::Finite(scale), bound)?;
        families.push((assignment, check));
    }
    Ok(LebesgueRestriction { lebesgue, families })
}

/// One pipeline stage with its deterministic detail lines.
#[derive(Debug, Clone)]
pub struct StageReport {
    pub name: &'static str,
    pub lines: Vec<String>,
}

/// Full pipeline output: stage reports, the final certified cover, and
/// wall-clock timings kept apart from the deterministic content.
#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub stages: Vec<StageReport>,
    pub final_cover: Cover,
    pub final_certificate: EngineCertificate,
    pub family_count: usize,
    pub timings: Vec<(&'static str, std::time::Duration)>,
}

impl PipelineReport {
    /// Deterministic rendering: everything except timings.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for stage in &self.stages {
            let _ = writeln!(out, "[stage {}]", stage.name);
            for line in &stage.lines {
                let _ = writeln!(out, "  {line}");
            }
        }
        let _ = writeln!(out, "[summary]");
        let _ = writeln!(out, "  families {}", self.family_count);
        let _ = writeln!(
            out,
            "  certified scale {} observed {} bound {}",
            self.final_certificate.scale,
            self.final_certificate.observed,
            self.final_certificate.formula_bound
        );
        out
    }

    /// Timing lines, informational and excluded from `render`.
    pub fn render_timings(&self) -> String {
        let mut out = String::new();
        for (name, took) in &self.timings {
            let _ = writeln!(out, "# timing {name} {took:?}");
        }
        out
    }
}

/// Parameters for the pipeline experiment.
#[derive(Debug, Clone)]
pub struct PipelineParams {
    pub scale: u64,
    pub epsilon: Option<Rat>,
    pub separation_factor: u64,
    pub word_horizon: u64,
    pub poly_radius: u64,
    pub seed: u64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            scale: 1,
            epsilon: None,
            separation_factor: 15,
            word_horizon: 6,
            poly_radius: 2,
            seed: 0,
        }
    }
}

/// Run the whole construction: decompose, approximate, build piece
/// systems, cover each with the polynomial-growth net refined through
/// brick charts, and merge across the decomposition families.  The final
/// cover of the approximating system has one family per lattice rank plus
/// one, certified by exact scan.
pub fn pipeline_experiment(
    kind: ActionKind,
    params: &PipelineParams,
    caps: &Caps,
) -> Result<PipelineReport> {
    let mut stages = Vec::new();
    let mut timings = Vec::new();

    // stage: validate the action
    let t0 = Instant::now();
    let reach = 2 * (params.word_horizon + 1) * params.scale;
    let action = build_action(kind.clone(), reach)?;
    stages.push(StageReport {
        name: "action",
        lines: vec![
            format!("group {}", action.group),
            format!("first relation at word length {}", action.first_relation),
            format!("validated freeness horizon {reach}"),
        ],
    });
    timings.push(("action", t0.elapsed()));

    // stage: approximate with an exact grid and pick epsilon
    let t0 = Instant::now();
    let probe = approximate_action(&action, params.scale, Rat::new(1, 2))?;
    let (min_disp, disp_witness) = probe.min_displacement(reach, caps)?;
    let sep = Rat::from_integer(params.separation_factor as i128);
    // room for the doubled-separation inner decomposition
    let separation_cap = Rat::new(1, 3) / sep;
    let epsilon = match params.epsilon {
        Some(e) => e,
        None => min_disp.min(separation_cap),
    };
    let approx = approximate_action(&action, params.scale, epsilon)?;
    stages.push(StageReport {
        name: "approximate",
        lines: vec![
            format!("grid {:?}", approx.dims),
            format!("density {}", approx.density),
            format!("epsilon {epsilon}"),
            format!("min displacement {min_disp} at {disp_witness:?} within word length {reach}"),
            "equivariance error 0".to_string(),
        ],
    });
    timings.push(("approximate", t0.elapsed()));

    // stage: separated decomposition
    let t0 = Instant::now();
    let grid_doubling = 4 * 2u64.pow(approx.dims.len() as u32);
    let dec = decompose_for_pieces(
        &approx.space,
        epsilon,
        params.separation_factor,
        Some(grid_doubling),
    )?;
    let check = validate_decomposition(&approx.space, &dec)?;
    stages.push(StageReport {
        name: "decompose",
        lines: vec![
            format!("families {}", dec.families.len()),
            format!("sets {}", dec.set_count()),
            format!("epsilon {} delta {}", dec.epsilon, dec.delta),
            format!("certificate {check:?}"),
        ],
    });
    timings.push(("decompose", t0.elapsed()));

    // stage: piece systems with faithfulness certificates
    let t0 = Instant::now();
    let pieces = build_piece_systems(&approx, &dec, params.scale, params.word_horizon, caps)?;
    if !pieces.all_faithful() {
        let bad = pieces
            .families
            .iter()
            .enumerate()
            .find(|(_, f)| !f.condition_one.is_empty() || !f.condition_two.is_empty())
            .expect("some family failed");
        return Err(Error::precondition(format!(
            "piece systems fail faithfulness in family {}: {:?} {:?}",
            bad.0, bad.1.condition_one, bad.1.condition_two
        )));
    }
    for family in &pieces.families {
        match family.system.local_freeness(params.word_horizon, caps)? {
            Freeness::Free => {}
            Freeness::Collision { point, left, right } => {
                return Err(Error::FreenessViolation {
                    point,
                    left: format!("{left:?}"),
                    right: format!("{right:?}"),
                })
            }
        }
    }
    stages.push(StageReport {
        name: "pieces",
        lines: vec![
            format!("families {}", pieces.families.len()),
            format!(
                "piece counts {:?}",
                pieces.families.iter().map(|f| f.pieces.len()).collect::<Vec<_>>()
            ),
            format!("faithful at word horizon {}", params.word_horizon),
            "partial-action axioms validated".to_string(),
        ],
    });
    timings.push(("pieces", t0.elapsed()));

    // stage: cover every piece system, then merge across families
    let t0 = Instant::now();
    let dim = match action.group.kind() {
        crate::group::GroupKind::FreeAbelian(d) => *d,
        _ => unreachable!("pipeline actions are lattice actions"),
    };
    let profile = growth_profile(&action.group, 4, caps)?;
    let base_system = approx.system(1);
    // one ambient labelling per orbit; every local chart anchors to it so
    // brick classes stay aligned across families
    let mut ambient: BTreeMap<u32, Element> = BTreeMap::new();
    for orbit in base_system.orbits() {
        ambient.extend(base_system.orbit_labels(orbit[0]));
    }
    let mut merged_bound: Option<BoundValue> = None;
    let mut pulled: Vec<(BTreeSet<u32>, Cover)> = Vec::new();
    let mut controls: Vec<ControlFn> = Vec::new();
    let mut cover_lines = Vec::new();
    for (i, family) in pieces.families.iter().enumerate() {
        // scheduled scale for this family, from the bounds merged so far
        let scheduled: Scale = match &merged_bound {
            None => Scale::Finite(params.scale),
            Some(BoundValue::Saturated) => Scale::Unbounded,
            Some(BoundValue::Finite(v)) => match u64::try_from(v) {
                Ok(value) => Scale::Finite(
                    value
                        .checked_add(2)
                        .and_then(|s| s.checked_mul(params.scale))
                        .unwrap_or(u64::MAX),
                ),
                Err(_) => Scale::Unbounded,
            },
        };
        let n_pieces = family.pieces.len() as u64;
        let clamped = match scheduled {
            Scale::Finite(s) if s <= n_pieces => s.max(1),
            _ => n_pieces + 1,
        };

        let poly = poly_growth_cover(
            &family.system,
            params.poly_radius.max(2),
            profile.constant,
            profile.degree,
            caps,
        )?;
        // each piece is labelled by the ambient label of its least point
        let anchor: BTreeMap<u32, Element> = family
            .pieces
            .iter()
            .enumerate()
            .map(|(idx, piece)| {
                let least = *piece.iter().next().expect("pieces are nonempty");
                (idx as u32, ambient[&least].clone())
            })
            .collect();
        let provider = crate::cover::BrickChartProvider {
            dim,
            anchor: Some(anchor),
            brick_scale: Some(params.scale),
        };
        let refined = refine_cover(
            &family.system,
            &poly.cover,
            Scale::Finite(poly.doubling_scale),
            &provider,
            clamped,
            caps,
        )?;

        // pull piece-level sets back to grid points
        let subset: BTreeSet<u32> = family.pieces.iter().flatten().copied().collect();
        let point_families: Vec<Vec<BTreeSet<u32>>> = refined
            .cover
            .families
            .iter()
            .map(|sets| {
                sets.iter()
                    .map(|set| {
                        set.iter()
                            .flat_map(|&piece| family.pieces[piece as usize].iter().copied())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let point_cover = Cover { ground: subset.clone(), families: point_families };

        // measured bound of the pulled-back cover at its scheduled scale
        let sub = base_system.restrict(&subset)?;
        let scan_scale = match scheduled {
            Scale::Finite(s) if s <= sub.len() as u64 => Scale::Finite(s),
            _ => Scale::Finite(sub.len() as u64 + 1),
        };
        let measured = match sub.check_cover(&point_cover, scan_scale, u64::MAX)? {
            CoverCheck::Certified(cert) => cert.observed.max(1),
            CoverCheck::Uncovered { point } => {
                return Err(Error::precondition(format!(
                    "family {i}: pulled-back cover misses point {point}"
                )))
            }
            CoverCheck::ComponentTooBig { .. } => unreachable!("bound is u64::MAX"),
        };
        controls.push(ControlFn::Constant(measured));
        pulled.push((subset, point_cover));
        cover_lines.push(format!(
            "family {i}: pieces {n_pieces} poly scale {} refined observed {} pulled bound {measured} at scale {scheduled:?}",
            poly.doubling_scale, refined.certificate.observed
        ));

        // advance the merge recursion exactly as the schedule does
        let schedule_so_far = union_schedule(&controls, params.scale, base_system.group(), caps)?;
        merged_bound = Some(schedule_so_far.final_bound().clone());
    }
    stages.push(StageReport { name: "covers", lines: cover_lines });
    timings.push(("covers", t0.elapsed()));

    let t0 = Instant::now();
    let (final_cover, final_certificate) =
        crate::cover::union_covers(&base_system, &pulled, &controls, params.scale, caps)?;
    let family_count = final_cover.families.len();
    stages.push(StageReport {
        name: "union",
        lines: vec![
            format!("families {family_count}"),
            format!(
                "certified scale {} observed {} bound {}",
                final_certificate.scale,
                final_certificate.observed,
                final_certificate.formula_bound
            ),
        ],
    });
    timings.push(("union", t0.elapsed()));

    // stage: lower-bound witness
    let t0 = Instant::now();
    let lower_lines = match dim {
        1 => {
            let all: BTreeSet<u32> = base_system.points().iter().copied().collect();
            let partition = base_system.components(&all, Scale::Finite(params.scale))?;
            let forced = partition.max_cardinality();
            let outcome = brute_min_cover(&base_system, params.scale, 0, forced - 1, caps)?;
            match outcome {
                BruteOutcome::NotExists => vec![format!(
                    "no single-family cover with bound below {forced}: the orbit is one chain component"
                )],
                BruteOutcome::Exists(_) => {
                    return Err(Error::precondition(
                        "connectivity lower bound unexpectedly failed",
                    ))
                }
            }
        }
        _ => {
            // a small grid window: two families cannot keep scale-2
            // components to singletons
            let window = grid_window_subsystem(&approx, 3, 4)?;
            let outcome = brute_min_cover(&window, 2, 1, 1, caps)?;
            match outcome {
                BruteOutcome::NotExists => vec![
                    "no (1, F^2, 1)-cover of a 3 x 4 grid window: exhaustive search".to_string(),
                ],
                BruteOutcome::Exists(_) => {
                    return Err(Error::precondition("window lower bound unexpectedly failed"))
                }
            }
        }
    };
    stages.push(StageReport { name: "lower-bound", lines: lower_lines });
    timings.push(("lower-bound", t0.elapsed()));

    Ok(PipelineReport { stages, final_cover, final_certificate, family_count, timings })
}

/// Restriction of the approximating system to a small window of the orbit
/// of the base point: the points reached by lattice words `(a, b)` with
/// `0 <= a < w`, `0 <= b < h`.  The induced moves are the lattice
/// translations of an abstract grid window, which exhaustive lower-bound
/// search can handle.
fn grid_window_subsystem(approx: &ApproximatingAction, w: i64, h: i64) -> Result<PartialSystem> {
    if approx.dims.len() != 2 {
        return Err(Error::precondition("window needs a 2-d grid action"));
    }
    let mut subset = BTreeSet::new();
    for a in 0..w {
        for b in 0..h {
            subset.insert(approx.act(&Element::Vector(vec![a, b]), 0));
        }
    }
    if subset.len() as i64 != w * h {
        return Err(Error::precondition("orbit window collides; grid too small"));
    }
    approx.system(1).restrict(&subset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::rat;

    fn caps() -> Caps {
        Caps::default()
    }

    #[test]
    fn build_action_relation_lengths() {
        let ok = build_action(ActionKind::CircleRotation { angle: rat(13, 89) }, 40).unwrap();
        assert_eq!(ok.first_relation, 89);

        let err = build_action(ActionKind::CircleRotation { angle: rat(1, 4) }, 10);
        assert!(err.is_err());

        let torus = build_action(
            ActionKind::TorusTranslation { shifts: vec![rat(13, 89), rat(17, 101)] },
            40,
        )
        .unwrap();
        assert_eq!(torus.first_relation, 89);
    }

    #[test]
    fn approximation_is_exact_and_dense() {
        let action = build_action(ActionKind::CircleRotation { angle: rat(13, 89) }, 40).unwrap();
        let approx = approximate_action(&action, 5, rat(1, 20)).unwrap();
        assert_eq!(approx.space.len(), 89);
        assert_eq!(approx.density, rat(1, 89));
        // exact equivariance: acting by +1 lands exactly on the shifted point
        let g = Element::Vector(vec![1]);
        for p in 0..89u32 {
            let q = approx.act(&g, p);
            assert_eq!(q, (p + 13) % 89);
        }
        // too coarse a grid is rejected
        assert!(approximate_action(&action, 5, rat(1, 100)).is_err());
    }

    #[test]
    fn torus_grid_has_product_structure() {
        let action = build_action(
            ActionKind::TorusTranslation { shifts: vec![rat(13, 89), rat(17, 101)] },
            40,
        )
        .unwrap();
        let approx = approximate_action(&action, 5, rat(1, 50)).unwrap();
        assert_eq!(approx.space.len(), 89 * 101);
        let g = Element::Vector(vec![1, 0]);
        assert_eq!(approx.act(&g, 0), 13 * 101);
        let g = Element::Vector(vec![0, 1]);
        assert_eq!(approx.act(&g, 0), 17);
    }

    #[test]
    fn cyclic_approximation_density_free() {
        let action = build_action(ActionKind::CyclicTranslation { n: 24 }, 10).unwrap();
        let approx = approximate_action(&action, 3, rat(1, 1000)).unwrap();
        assert_eq!(approx.space.len(), 24);
        assert_eq!(approx.density, Rat::zero());
    }

    #[test]
    fn piece_systems_on_rotation_pass_checks() {
        let action = build_action(ActionKind::CircleRotation { angle: rat(13, 89) }, 40).unwrap();
        let approx = approximate_action(&action, 2, rat(1, 50)).unwrap();
        let dec = decompose_for_pieces(&approx.space, rat(1, 50), 15, None).unwrap();
        let pieces = build_piece_systems(&approx, &dec, 2, 6, &caps()).unwrap();
        assert!(pieces.all_faithful());
        for family in &pieces.families {
            assert!(family.system.local_freeness(6, &caps()).unwrap().is_free());
        }
    }

    #[test]
    fn epsilon_above_displacement_is_rejected() {
        let action = build_action(ActionKind::CircleRotation { angle: rat(13, 89) }, 40).unwrap();
        // displacement within word length 28 bottoms out at 2/89
        let approx = approximate_action(&action, 2, rat(1, 25)).unwrap();
        let dec = decompose_for_pieces(&approx.space, rat(1, 25), 15, None).unwrap();
        let err = build_piece_systems(&approx, &dec, 2, 6, &caps());
        assert!(err.is_err());
    }

    #[test]
    fn cyclic_pieces_are_exact() {
        let action = build_action(ActionKind::CyclicTranslation { n: 24 }, 10).unwrap();
        let approx = approximate_action(&action, 1, rat(1, 25)).unwrap();
        let dec = decompose_for_pieces(&approx.space, rat(1, 25), 15, None).unwrap();
        let pieces = build_piece_systems(&approx, &dec, 1, 4, &caps()).unwrap();
        assert!(pieces.all_faithful());
    }

    /// Arc of grid indices on the 89-point circle, wrapping allowed.
    fn grid_arc(lo: u32, hi: u32) -> BTreeSet<u32> {
        (0..89u32)
            .filter(|&i| {
                if lo <= hi {
                    i >= lo && i <= hi
                } else {
                    i >= lo || i <= hi
                }
            })
            .collect()
    }

    #[test]
    fn lebesgue_restriction_of_two_arcs() {
        // a large rotation step keeps arc chains short (bound 2) while the
        // deep overlaps keep the Lebesgue number at 27/89
        let action = build_action(ActionKind::CircleRotation { angle: rat(40, 89) }, 10).unwrap();
        let approx = approximate_action(&action, 1, rat(1, 70)).unwrap();
        let dec = decompose_for_pieces(&approx.space, rat(1, 70), 15, None).unwrap();
        let pieces = build_piece_systems(&approx, &dec, 1, 2, &caps()).unwrap();
        assert!(pieces.all_faithful());

        let a = grid_arc(0, 63);
        let b = grid_arc(37, 26);
        let out = lebesgue_restrict(&approx, &pieces, &[a, b], 1, 2).unwrap();
        assert_eq!(out.lebesgue, Some(rat(14, 89)));
        for (_, check) in &out.families {
            assert!(check.is_certified(), "{check:?}");
        }

        // whole space as one set certifies trivially
        let whole: BTreeSet<u32> = (0..89).collect();
        let out = lebesgue_restrict(&approx, &pieces, &[whole], 1, 89).unwrap();
        assert!(out.lebesgue.is_none());
        for (_, check) in &out.families {
            assert!(check.is_certified());
        }
    }

    #[test]
    fn lebesgue_threshold_is_enforced() {
        let action = build_action(ActionKind::CircleRotation { angle: rat(40, 89) }, 10).unwrap();
        let approx = approximate_action(&action, 1, rat(1, 70)).unwrap();
        let dec = decompose_for_pieces(&approx.space, rat(1, 70), 15, None).unwrap();
        let pieces = build_piece_systems(&approx, &dec, 1, 2, &caps()).unwrap();
        // arcs overlapping by a single point: lambda collapses to 1/89 and
        // epsilon = 1/40 is far above lambda / (3 (D + 1))
        let a = grid_arc(0, 45);
        let b = grid_arc(44, 0);
        let err = lebesgue_restrict(&approx, &pieces, &[a, b], 1, 2);
        assert!(err.is_err(), "epsilon 1/70 is above the threshold");
    }
}
