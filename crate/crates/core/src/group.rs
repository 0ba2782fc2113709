//! Concrete finitely generated group models with symmetric generating sets.
//!
//! Elements are stored in canonical form (lattice vectors, reduced residues,
//! freely reduced words) so that equality is decidable and hashable.  The
//! word metric is taken with respect to the standard generating set of each
//! model; a model may be rescaled so that its generating set becomes the
//! whole ball of a given radius.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use num::bigint::BigUint;
use num::{One, Zero};

use crate::caps::Caps;
use crate::error::{Error, Result};

/// Canonical element of one of the supported group models.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    /// Lattice vector of a free-abelian group.
    Vector(Vec<i64>),
    /// Residue in `[0, n)` of a cyclic group.
    Residue(u64),
    /// Freely reduced word; letter `i > 0` is the i-th generator, `-i` its
    /// inverse.
    Word(Vec<i8>),
    /// Component-wise element of a direct product.
    Tuple(Vec<Element>),
}

/// Structure of a group model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupKind {
    FreeAbelian(u32),
    Cyclic(u64),
    FreeGroup(u32),
    Product(Vec<GroupKind>),
}

/// A finitely generated group together with its generating set.
///
/// `gen_radius` rescales the generating set: radius `r` means the generating
/// set is the full word ball of radius `r` of the standard generators.  The
/// standard set is symmetric and contains the identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupModel {
    kind: GroupKind,
    gen_radius: u32,
}

impl GroupKind {
    fn identity(&self) -> Element {
        match self {
            GroupKind::FreeAbelian(d) => Element::Vector(vec![0; *d as usize]),
            GroupKind::Cyclic(_) => Element::Residue(0),
            GroupKind::FreeGroup(_) => Element::Word(Vec::new()),
            GroupKind::Product(parts) => {
                Element::Tuple(parts.iter().map(|p| p.identity()).collect())
            }
        }
    }

    fn mul(&self, a: &Element, b: &Element) -> Element {
        match (self, a, b) {
            (GroupKind::FreeAbelian(_), Element::Vector(x), Element::Vector(y)) => {
                Element::Vector(x.iter().zip(y).map(|(u, v)| u + v).collect())
            }
            (GroupKind::Cyclic(n), Element::Residue(x), Element::Residue(y)) => {
                Element::Residue((x + y) % n)
            }
            (GroupKind::FreeGroup(_), Element::Word(x), Element::Word(y)) => {
                let mut word = x.clone();
                for &letter in y {
                    if word.last() == Some(&-letter) {
                        word.pop();
                    } else {
                        word.push(letter);
                    }
                }
                Element::Word(word)
            }
            (GroupKind::Product(parts), Element::Tuple(x), Element::Tuple(y)) => Element::Tuple(
                parts
                    .iter()
                    .zip(x.iter().zip(y))
                    .map(|(p, (u, v))| p.mul(u, v))
                    .collect(),
            ),
            _ => panic!("element does not belong to this group"),
        }
    }

    fn inv(&self, a: &Element) -> Element {
        match (self, a) {
            (GroupKind::FreeAbelian(_), Element::Vector(x)) => {
                Element::Vector(x.iter().map(|v| -v).collect())
            }
            (GroupKind::Cyclic(n), Element::Residue(x)) => {
                Element::Residue(if *x == 0 { 0 } else { n - x })
            }
            (GroupKind::FreeGroup(_), Element::Word(x)) => {
                Element::Word(x.iter().rev().map(|l| -l).collect())
            }
            (GroupKind::Product(parts), Element::Tuple(x)) => {
                Element::Tuple(parts.iter().zip(x).map(|(p, u)| p.inv(u)).collect())
            }
            _ => panic!("element does not belong to this group"),
        }
    }

    /// Standard generators excluding the identity.
    fn proper_generators(&self) -> Vec<Element> {
        match self {
            GroupKind::FreeAbelian(d) => {
                let d = *d as usize;
                let mut gens = Vec::with_capacity(2 * d);
                for axis in 0..d {
                    for sign in [1i64, -1] {
                        let mut v = vec![0i64; d];
                        v[axis] = sign;
                        gens.push(Element::Vector(v));
                    }
                }
                gens
            }
            GroupKind::Cyclic(n) => match n {
                0 | 1 => Vec::new(),
                2 => vec![Element::Residue(1)],
                n => vec![Element::Residue(1), Element::Residue(n - 1)],
            },
            GroupKind::FreeGroup(k) => {
                let mut gens = Vec::new();
                for i in 1..=*k as i8 {
                    gens.push(Element::Word(vec![i]));
                    gens.push(Element::Word(vec![-i]));
                }
                gens
            }
            GroupKind::Product(parts) => {
                let mut gens = Vec::new();
                for (slot, part) in parts.iter().enumerate() {
                    for g in part.proper_generators() {
                        let mut tuple: Vec<Element> =
                            parts.iter().map(|p| p.identity()).collect();
                        tuple[slot] = g;
                        gens.push(Element::Tuple(tuple));
                    }
                }
                gens
            }
        }
    }

    /// Exact word length with respect to the standard generating set.
    fn word_length(&self, a: &Element) -> u64 {
        match (self, a) {
            (GroupKind::FreeAbelian(_), Element::Vector(x)) => {
                x.iter().map(|v| v.unsigned_abs()).sum()
            }
            (GroupKind::Cyclic(n), Element::Residue(x)) => (*x).min(n - x),
            (GroupKind::FreeGroup(_), Element::Word(x)) => x.len() as u64,
            (GroupKind::Product(parts), Element::Tuple(x)) => parts
                .iter()
                .zip(x)
                .map(|(p, u)| p.word_length(u))
                .sum(),
            _ => panic!("element does not belong to this group"),
        }
    }

    /// Exact cardinality of the word ball of the given radius.
    fn ball_count(&self, radius: &BigUint, bit_cap: u64) -> Option<BigUint> {
        match self {
            GroupKind::FreeAbelian(d) => {
                // sum over k of 2^k * C(d, k) * C(radius, k)
                let d = *d as u64;
                let mut total = BigUint::zero();
                for k in 0..=d {
                    if BigUint::from(k) > *radius {
                        break;
                    }
                    let mut term = BigUint::one() << k;
                    term *= binomial_u64(d, k);
                    term *= binomial_big(radius, k);
                    total += term;
                }
                (total.bits() <= bit_cap).then_some(total)
            }
            GroupKind::Cyclic(n) => {
                let two_r_plus_one = radius * 2u32 + 1u32;
                Some(two_r_plus_one.min(BigUint::from(*n)))
            }
            GroupKind::FreeGroup(k) => {
                let k = *k as u64;
                if k == 0 {
                    return Some(BigUint::one());
                }
                if k == 1 {
                    return Some(radius * 2u32 + 1u32);
                }
                // 1 + 2k * ((2k-1)^r - 1) / (2k - 2)
                let base = BigUint::from(2 * k - 1);
                let r = u64::try_from(radius).ok()?;
                if r.saturating_mul(base.bits()) > bit_cap {
                    return None;
                }
                let pow = num::pow::pow(base, r as usize);
                let numer = (pow - BigUint::one()) * BigUint::from(2 * k);
                Some(BigUint::one() + numer / BigUint::from(2 * k - 2))
            }
            GroupKind::Product(parts) => {
                // convolution of sphere counts; only feasible for modest radii
                // unless every factor is finite
                if let Some(order) = self.order() {
                    let diameter = self.diameter_if_finite().unwrap_or(0);
                    if *radius >= BigUint::from(diameter) {
                        return Some(BigUint::from(order));
                    }
                }
                let r = u64::try_from(radius).ok()?;
                if r > 1_000_000 {
                    return None;
                }
                let mut acc = vec![BigUint::one()];
                for part in parts {
                    acc = convolve_ball(part, &acc, r, bit_cap)?;
                }
                Some(acc.last().cloned().unwrap_or_else(BigUint::one))
            }
        }
    }

    fn order(&self) -> Option<u64> {
        match self {
            GroupKind::FreeAbelian(0) => Some(1),
            GroupKind::FreeAbelian(_) | GroupKind::FreeGroup(_) => None,
            GroupKind::Cyclic(n) => Some(*n),
            GroupKind::Product(parts) => {
                parts.iter().try_fold(1u64, |acc, p| Some(acc * p.order()?))
            }
        }
    }

    fn diameter_if_finite(&self) -> Option<u64> {
        match self {
            GroupKind::FreeAbelian(0) => Some(0),
            GroupKind::FreeAbelian(_) | GroupKind::FreeGroup(_) => None,
            GroupKind::Cyclic(n) => Some(n / 2),
            GroupKind::Product(parts) => {
                parts.iter().try_fold(0u64, |acc, p| Some(acc + p.diameter_if_finite()?))
            }
        }
    }

    fn is_exponential(&self) -> bool {
        match self {
            GroupKind::FreeGroup(k) => *k >= 2,
            GroupKind::Product(parts) => parts.iter().any(|p| p.is_exponential()),
            _ => false,
        }
    }
}

fn binomial_u64(n: u64, k: u64) -> BigUint {
    binomial_big(&BigUint::from(n), k)
}

fn binomial_big(n: &BigUint, k: u64) -> BigUint {
    let mut numer = BigUint::one();
    let mut denom = BigUint::one();
    for i in 0..k {
        let factor = n - BigUint::from(i);
        numer *= factor;
        denom *= BigUint::from(i + 1);
    }
    numer / denom
}

/// Ball table of `part` convolved into the running product ball table.
fn convolve_ball(
    part: &GroupKind,
    acc_ball: &[BigUint],
    radius: u64,
    bit_cap: u64,
) -> Option<Vec<BigUint>> {
    // sphere counts of the accumulated product; the running table may be
    // shorter than the radius, in which case it has saturated
    let clamp = |i: usize| -> BigUint {
        acc_ball
            .get(i)
            .cloned()
            .unwrap_or_else(|| acc_ball.last().cloned().unwrap())
    };
    let mut acc_sphere = Vec::with_capacity(radius as usize + 1);
    for i in 0..=radius as usize {
        let prev = if i == 0 { BigUint::zero() } else { clamp(i - 1) };
        acc_sphere.push(clamp(i) - prev);
    }
    let mut part_ball = Vec::with_capacity(radius as usize + 1);
    for r in 0..=radius {
        part_ball.push(part.ball_count(&BigUint::from(r), bit_cap)?);
    }
    let mut out = vec![BigUint::zero(); radius as usize + 1];
    for (r, slot) in out.iter_mut().enumerate() {
        let mut total = BigUint::zero();
        for a in 0..=r {
            total += &acc_sphere[a] * &part_ball[r - a];
        }
        *slot = total;
    }
    Some(out)
}

impl GroupModel {
    pub fn new(kind: GroupKind) -> Self {
        GroupModel { kind, gen_radius: 1 }
    }

    pub fn free_abelian(rank: u32) -> Self {
        Self::new(GroupKind::FreeAbelian(rank))
    }

    pub fn cyclic(n: u64) -> Self {
        assert!(n >= 1, "cyclic group needs n >= 1");
        Self::new(GroupKind::Cyclic(n))
    }

    pub fn free_group(rank: u32) -> Self {
        Self::new(GroupKind::FreeGroup(rank))
    }

    pub fn product(parts: Vec<GroupKind>) -> Self {
        Self::new(GroupKind::Product(parts))
    }

    /// Same group with the generating set enlarged to the ball of `radius`
    /// standard generators.  Scales measured against the rescaled set
    /// correspond to `radius` times finer scales of the standard set.
    pub fn rescaled(&self, radius: u32) -> Self {
        assert!(radius >= 1);
        GroupModel { kind: self.kind.clone(), gen_radius: radius * self.gen_radius }
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    pub fn gen_radius(&self) -> u32 {
        self.gen_radius
    }

    pub fn identity(&self) -> Element {
        self.kind.identity()
    }

    pub fn mul(&self, a: &Element, b: &Element) -> Element {
        self.kind.mul(a, b)
    }

    pub fn inv(&self, a: &Element) -> Element {
        self.kind.inv(a)
    }

    /// Word length of `a` in the (possibly rescaled) generating set.
    pub fn word_length(&self, a: &Element) -> u64 {
        let base = self.kind.word_length(a);
        base.div_ceil(self.gen_radius as u64)
    }

    /// Generating set: identity first, then the proper generators of the
    /// rescaled ball in canonical order.
    pub fn generators(&self) -> Vec<Element> {
        if self.gen_radius == 1 {
            let mut gens = vec![self.identity()];
            gens.extend(self.kind.proper_generators());
            gens
        } else {
            // the whole standard ball of radius gen_radius
            let base = GroupModel { kind: self.kind.clone(), gen_radius: 1 };
            base.word_ball(self.gen_radius as u64, &Caps::default())
                .expect("generator ball exceeds cap")
                .elements
        }
    }

    /// BFS enumeration of the ball of `radius` rescaled generators around
    /// the identity.  Fails when the enumeration would exceed the cap.
    pub fn word_ball(&self, radius: u64, caps: &Caps) -> Result<WordBall> {
        let base_radius = radius.saturating_mul(self.gen_radius as u64);
        let base = GroupModel { kind: self.kind.clone(), gen_radius: 1 };
        let gens = base.kind.proper_generators();
        let mut seen: HashMap<Element, u64> = HashMap::new();
        let mut queue = VecDeque::new();
        let identity = self.identity();
        seen.insert(identity.clone(), 0);
        queue.push_back(identity.clone());
        while let Some(elt) = queue.pop_front() {
            let dist = seen[&elt];
            if dist == base_radius {
                continue;
            }
            for g in &gens {
                let next = self.kind.mul(g, &elt);
                if !seen.contains_key(&next) {
                    if seen.len() as u64 >= caps.max_ball_elements {
                        return Err(Error::ResourceCap {
                            what: "ball enumeration",
                            needed: seen.len() as u64 + 1,
                            cap: caps.max_ball_elements,
                        });
                    }
                    seen.insert(next.clone(), dist + 1);
                    queue.push_back(next);
                }
            }
        }
        let mut elements: Vec<Element> = seen.into_keys().collect();
        elements.sort();
        Ok(WordBall { center: identity, radius, elements })
    }

    /// Exact ball cardinality, saturating past `bit_cap` bits.
    pub fn ball_count(&self, radius: &BigUint, bit_cap: u64) -> Option<BigUint> {
        let scaled = radius * BigUint::from(self.gen_radius);
        self.kind.ball_count(&scaled, bit_cap)
    }

    /// Convenience wrapper for small radii.
    pub fn ball_count_u64(&self, radius: u64) -> u64 {
        let count = self
            .ball_count(&BigUint::from(radius), 64)
            .expect("ball count exceeds 64 bits");
        u64::try_from(&count).expect("ball count exceeds u64")
    }

    pub fn is_exponential(&self) -> bool {
        self.kind.is_exponential()
    }

    pub fn order(&self) -> Option<u64> {
        self.kind.order()
    }

    /// Parse a group specification such as `Z`, `Z^3`, `Z/10`, `F_2` or
    /// `Z/4 x Z/6`.
    pub fn parse(spec: &str) -> Result<GroupModel> {
        fn parse_kind(token: &str) -> Result<GroupKind> {
            let token = token.trim();
            if let Some(rest) = token.strip_prefix("Z/") {
                let n: u64 = rest
                    .parse()
                    .map_err(|_| Error::BadGroupSpec(token.to_string()))?;
                if n == 0 {
                    return Err(Error::BadGroupSpec(token.to_string()));
                }
                return Ok(GroupKind::Cyclic(n));
            }
            if let Some(rest) = token.strip_prefix("Z^") {
                let d: u32 = rest
                    .parse()
                    .map_err(|_| Error::BadGroupSpec(token.to_string()))?;
                return Ok(GroupKind::FreeAbelian(d));
            }
            if token == "Z" {
                return Ok(GroupKind::FreeAbelian(1));
            }
            if let Some(rest) = token.strip_prefix("F_") {
                let k: u32 = rest
                    .parse()
                    .map_err(|_| Error::BadGroupSpec(token.to_string()))?;
                return Ok(GroupKind::FreeGroup(k));
            }
            Err(Error::BadGroupSpec(token.to_string()))
        }

        let parts: Vec<&str> = spec.split(" x ").collect();
        let kind = if parts.len() == 1 {
            parse_kind(parts[0])?
        } else {
            GroupKind::Product(parts.iter().map(|p| parse_kind(p)).collect::<Result<_>>()?)
        };
        Ok(GroupModel::new(kind))
    }
}

impl fmt::Display for GroupModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn kind_str(kind: &GroupKind) -> String {
            match kind {
                GroupKind::FreeAbelian(1) => "Z".to_string(),
                GroupKind::FreeAbelian(d) => format!("Z^{d}"),
                GroupKind::Cyclic(n) => format!("Z/{n}"),
                GroupKind::FreeGroup(k) => format!("F_{k}"),
                GroupKind::Product(parts) => parts
                    .iter()
                    .map(kind_str)
                    .collect::<Vec<_>>()
                    .join(" x "),
            }
        }
        write!(f, "{}", kind_str(&self.kind))
    }
}

/// Word ball around a center, enumerated and sorted canonically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordBall {
    pub center: Element,
    pub radius: u64,
    pub elements: Vec<Element>,
}

impl WordBall {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, elt: &Element) -> bool {
        self.elements.binary_search(elt).is_ok()
    }
}

/// Sampled growth data with a fitted polynomial envelope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrowthProfile {
    pub radii: Vec<u64>,
    pub counts: Vec<u64>,
    /// `counts[r] <= constant * r^degree` at every sampled and checked radius.
    pub constant: u64,
    pub degree: u32,
}

/// Least integer degree, with its constant, such that `counts[r] <= C r^d`
/// holds on the sample and keeps holding at two extrapolated radii.
///
/// The extrapolation step rejects degrees that only fit because the sample
/// is short; exponential models are rejected outright.
pub fn growth_profile(group: &GroupModel, max_radius: u64, caps: &Caps) -> Result<GrowthProfile> {
    if max_radius < 1 {
        return Err(Error::precondition("growth profile needs max_radius >= 1"));
    }
    if group.is_exponential() {
        return Err(Error::NoPolynomialFit);
    }
    let mut counts = Vec::with_capacity(max_radius as usize + 1);
    for r in 0..=max_radius {
        counts.push(group.word_ball(r, caps)?.len() as u64);
    }
    let cap_constant = 10 * counts[1].max(1);
    let check_radii = [2 * max_radius, 4 * max_radius];
    for degree in 0..=8u32 {
        let mut constant = 0u64;
        for r in 1..=max_radius {
            let power = r.checked_pow(degree).unwrap_or(u64::MAX);
            constant = constant.max(counts[r as usize].div_ceil(power));
        }
        if constant > cap_constant {
            continue;
        }
        let extrapolates = check_radii.iter().all(|&r| {
            let count = group.ball_count(&BigUint::from(r), 128);
            let power = BigUint::from(r).pow(degree);
            match count {
                Some(c) => c <= power * BigUint::from(constant),
                None => false,
            }
        });
        if extrapolates {
            return Ok(GrowthProfile {
                radii: (0..=max_radius).collect(),
                counts,
                constant,
                degree,
            });
        }
    }
    Err(Error::NoPolynomialFit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_ball_radius_three() {
        let z = GroupModel::free_abelian(1);
        let ball = z.word_ball(3, &Caps::default()).unwrap();
        assert_eq!(ball.len(), 7);
        for k in -3i64..=3 {
            assert!(ball.contains(&Element::Vector(vec![k])));
        }
    }

    #[test]
    fn radius_zero_is_identity() {
        for group in [
            GroupModel::free_abelian(2),
            GroupModel::cyclic(7),
            GroupModel::free_group(2),
        ] {
            let ball = group.word_ball(0, &Caps::default()).unwrap();
            assert_eq!(ball.elements, vec![group.identity()]);
        }
    }

    #[test]
    fn free_group_rank_two_radius_two() {
        let f2 = GroupModel::free_group(2);
        let ball = f2.word_ball(2, &Caps::default()).unwrap();
        assert_eq!(ball.len(), 17);
    }

    #[test]
    fn word_lengths() {
        let z = GroupModel::free_abelian(1);
        assert_eq!(z.word_length(&Element::Vector(vec![5])), 5);
        let z2 = GroupModel::free_abelian(2);
        assert_eq!(z2.word_length(&Element::Vector(vec![2, -3])), 5);
        let z10 = GroupModel::cyclic(10);
        assert_eq!(z10.word_length(&Element::Residue(7)), 3);
    }

    #[test]
    fn growth_fits() {
        let caps = Caps::default();
        let z = growth_profile(&GroupModel::free_abelian(1), 5, &caps).unwrap();
        assert_eq!(z.counts, vec![1, 3, 5, 7, 9, 11]);
        assert_eq!(z.degree, 1);

        let z2 = growth_profile(&GroupModel::free_abelian(2), 4, &caps).unwrap();
        assert_eq!(z2.counts, vec![1, 5, 13, 25, 41]);
        assert_eq!(z2.degree, 2);

        let f2 = growth_profile(&GroupModel::free_group(2), 6, &caps);
        assert_eq!(f2, Err(Error::NoPolynomialFit));
    }

    #[test]
    fn ball_nesting_and_symmetry() {
        let caps = Caps::default();
        for group in [
            GroupModel::free_abelian(2),
            GroupModel::cyclic(12),
            GroupModel::free_group(2),
            GroupModel::product(vec![GroupKind::Cyclic(4), GroupKind::Cyclic(6)]),
        ] {
            let mut prev: Option<WordBall> = None;
            for r in 0..=4 {
                let ball = group.word_ball(r, &caps).unwrap();
                if let Some(p) = &prev {
                    for elt in &p.elements {
                        assert!(ball.contains(elt), "nesting failed at radius {r}");
                    }
                }
                for elt in &ball.elements {
                    assert!(ball.contains(&group.inv(elt)), "symmetry failed");
                }
                prev = Some(ball);
            }
        }
    }

    #[test]
    fn ball_counts_match_enumeration() {
        let caps = Caps::default();
        for group in [
            GroupModel::free_abelian(1),
            GroupModel::free_abelian(2),
            GroupModel::free_abelian(3),
            GroupModel::cyclic(10),
            GroupModel::free_group(2),
            GroupModel::product(vec![GroupKind::Cyclic(4), GroupKind::FreeAbelian(1)]),
        ] {
            for r in 0..=5u64 {
                let enumerated = group.word_ball(r, &caps).unwrap().len() as u64;
                assert_eq!(group.ball_count_u64(r), enumerated, "{group} at radius {r}");
            }
        }
    }

    #[test]
    fn rescaled_word_length_and_counts() {
        let z = GroupModel::free_abelian(1).rescaled(3);
        assert_eq!(z.word_length(&Element::Vector(vec![7])), 3);
        assert_eq!(z.ball_count_u64(2), 13); // base ball of radius 6
        let ball = z.word_ball(1, &Caps::default()).unwrap();
        assert_eq!(ball.len(), 7);
    }

    #[test]
    fn submultiplicative_on_samples() {
        let group = GroupModel::product(vec![GroupKind::Cyclic(9), GroupKind::FreeAbelian(1)]);
        let ball = group.word_ball(3, &Caps::default()).unwrap();
        for a in ball.elements.iter().step_by(3) {
            for b in ball.elements.iter().step_by(4) {
                let prod = group.mul(a, b);
                assert!(
                    group.word_length(&prod) <= group.word_length(a) + group.word_length(b)
                );
            }
        }
    }

    #[test]
    fn parse_round_trip() {
        for spec in ["Z", "Z^3", "Z/10", "F_2", "Z/4 x Z/6"] {
            let group = GroupModel::parse(spec).unwrap();
            assert_eq!(group.to_string(), spec);
        }
        assert!(GroupModel::parse("Q").is_err());
    }
}
