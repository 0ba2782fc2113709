//! Property tests: restriction preserves the partial-action axioms,
//! components coarsen with the scale, certified covers stay certified for
//! larger bounds, and serialization round-trips structurally.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dadim_core::files::{parse_cover, parse_system, serialize_cover, serialize_system};
use dadim_core::group::{Element, GroupModel};
use dadim_core::system::{Cover, PartialSystem, Scale};

/// Random coherent system: a restriction of a translation action on a
/// cycle, a window or a grid, chosen by seed.
fn random_system(rng: &mut ChaCha8Rng) -> PartialSystem {
    let base = match rng.gen_range(0..3) {
        0 => PartialSystem::translation_cycle(rng.gen_range(4..40)),
        1 => PartialSystem::translation_window(rng.gen_range(4..40)),
        _ => PartialSystem::translation_grid(rng.gen_range(2..7), rng.gen_range(2..7)),
    };
    let keep: BTreeSet<u32> = base
        .points()
        .iter()
        .copied()
        .filter(|_| rng.gen_bool(0.7))
        .collect();
    if keep.is_empty() {
        return base;
    }
    base.restrict(&keep).unwrap()
}

/// Random not-necessarily-coherent system: random partial injections with
/// honest inverse tables, for serialization tests.
fn random_raw_system(rng: &mut ChaCha8Rng) -> PartialSystem {
    let group = match rng.gen_range(0..3) {
        0 => GroupModel::free_abelian(1),
        1 => GroupModel::cyclic(rng.gen_range(2..12)),
        _ => GroupModel::free_abelian(2),
    };
    let n = rng.gen_range(1..20u32);
    let points: Vec<u32> = (0..n).map(|_| rng.gen_range(0..1000)).collect();
    let mut sorted = points.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let gens: Vec<Element> = group
        .generators()
        .into_iter()
        .filter(|g| *g != group.identity())
        .collect();
    let mut entries: BTreeMap<Element, Vec<(u32, u32)>> = BTreeMap::new();
    // build pair lists per inverse pair of generators so tables invert
    let mut done: BTreeSet<Element> = BTreeSet::new();
    for gen in &gens {
        if done.contains(gen) {
            continue;
        }
        let inverse = group.inv(gen);
        done.insert(gen.clone());
        done.insert(inverse.clone());
        let mut sources = sorted.clone();
        let mut targets = sorted.clone();
        let mut fwd = Vec::new();
        let mut bwd = Vec::new();
        while !sources.is_empty() && rng.gen_bool(0.8) {
            let s = sources.remove(rng.gen_range(0..sources.len()));
            let t = targets.remove(rng.gen_range(0..targets.len()));
            fwd.push((s, t));
            if inverse != *gen {
                bwd.push((t, s));
            } else if s != t {
                // self-inverse generator: the table must be an involution
                bwd.push((t, s));
            }
        }
        if inverse != *gen {
            entries.insert(gen.clone(), fwd);
            entries.insert(inverse, bwd);
        } else {
            let mut all = fwd;
            for pair in bwd {
                if !all.iter().any(|&(s, _)| s == pair.0) {
                    all.push(pair);
                }
            }
            entries.insert(gen.clone(), all);
        }
    }
    PartialSystem::from_maps(group, sorted, &entries).unwrap()
}

fn random_cover(rng: &mut ChaCha8Rng, system: &PartialSystem) -> Cover {
    let families = rng.gen_range(1..4usize);
    let mut cover = Cover {
        ground: system.points().iter().copied().collect(),
        families: vec![Vec::new(); families],
    };
    for &p in system.points() {
        let f = rng.gen_range(0..families);
        let new_set = cover.families[f].is_empty() || rng.gen_bool(0.2);
        if new_set {
            cover.families[f].push(BTreeSet::new());
        }
        let last = cover.families[f].len() - 1;
        cover.families[f][last].insert(p);
    }
    cover
}

#[test]
fn restriction_preserves_validity_500() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    for case in 0..500 {
        let mut system = random_system(&mut rng);
        let report = system.validate(4);
        assert!(report.is_valid(), "case {case}: base system invalid: {report:?}");
        let subset: BTreeSet<u32> = system
            .points()
            .iter()
            .copied()
            .filter(|_| rng.gen_bool(0.6))
            .collect();
        let mut restricted = system.restrict(&subset).unwrap();
        let report = restricted.validate(4);
        assert!(
            report.is_valid(),
            "case {case}: restriction broke the axioms: {report:?}"
        );
    }
}

#[test]
fn serialization_round_trip_500() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    for case in 0..500 {
        let system = random_raw_system(&mut rng);
        let text = serialize_system(&system);
        let parsed = parse_system(&text).unwrap_or_else(|e| panic!("case {case}: {e}"));
        assert_eq!(system, parsed, "case {case}");
        assert_eq!(serialize_system(&parsed), text, "case {case}: canonical form");

        let cover = random_cover(&mut rng, &system);
        let text = serialize_cover(&cover);
        let parsed = parse_cover(&text).unwrap();
        assert_eq!(cover, parsed, "case {case}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Components at a finer scale refine components at a coarser scale.
    #[test]
    fn components_coarsen_with_scale(seed in any::<u64>(), fine in 1u64..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let system = random_system(&mut rng);
        let subset: BTreeSet<u32> = system.points().iter().copied().collect();
        if subset.is_empty() {
            return Ok(());
        }
        let fine_partition = system.components(&subset, Scale::Finite(fine)).unwrap();
        let coarse_partition = system.components(&subset, Scale::Finite(fine + 1)).unwrap();
        let coarse_class = coarse_partition.class_of();
        for class in &fine_partition.classes {
            let targets: BTreeSet<usize> = class.iter().map(|p| coarse_class[p]).collect();
            prop_assert_eq!(targets.len(), 1);
        }
    }

    /// A certified cover stays certified at every larger bound.
    #[test]
    fn certificates_are_monotone_in_bound(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let system = random_system(&mut rng);
        if system.is_empty() {
            return Ok(());
        }
        let cover = random_cover(&mut rng, &system);
        let base = system.check_cover(&cover, Scale::Finite(1), 3).unwrap();
        if let Some(cert) = base.certificate() {
            for extra in 1..3u64 {
                let wider = system
                    .check_cover(&cover, Scale::Finite(1), 3 + extra)
                    .unwrap();
                prop_assert!(wider.is_certified());
                prop_assert_eq!(wider.certificate().unwrap().observed, cert.observed);
            }
        }
    }

    /// Ball symmetry and nesting across random models.
    #[test]
    fn ball_symmetry_and_nesting(rank in 1u32..3, radius in 0u64..4) {
        let group = GroupModel::free_abelian(rank);
        let caps = dadim_core::caps::Caps::default();
        let ball = group.word_ball(radius, &caps).unwrap();
        let bigger = group.word_ball(radius + 1, &caps).unwrap();
        for elt in &ball.elements {
            prop_assert!(ball.contains(&group.inv(elt)));
            prop_assert!(bigger.contains(elt));
        }
    }
}
