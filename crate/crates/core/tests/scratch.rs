use std::collections::BTreeSet;

use dadim_core::metric::{min_ball_cover, pathological_cantor, rat};

#[test]
#[ignore]
fn explore_pathological_minima() {
    let depth = 5;
    let space = pathological_cantor(depth, 10_000).unwrap();
    println!("depth {depth}: {} points", space.len());
    for k in 2u32..=4 {
        let target_radius = rat(1, 1i128 << k);
        let cover_radius = rat(1, 1i128 << (k + 1));
        let mut best_over_centers = 0u64;
        let mut best_center = 0u32;
        for &center in space.ids() {
            let center_idx = space.index_of(center).unwrap();
            let ball: BTreeSet<u32> = space
                .ball_indices(center_idx, &target_radius, true)
                .into_iter()
                .map(|i| space.ids()[i])
                .collect();
            let (count, _) = min_ball_cover(&space, &ball, &cover_radius, true).unwrap();
            if count > best_over_centers {
                best_over_centers = count;
                best_center = center;
            }
        }
        println!(
            "k={k}: open balls, best center {best_center}, max-over-centers minimal cover = {best_over_centers} (claim needs >= {})",
            k + 1
        );
        // closed variant
        let mut best_closed = 0u64;
        for &center in space.ids() {
            let center_idx = space.index_of(center).unwrap();
            let ball: BTreeSet<u32> = space
                .ball_indices(center_idx, &target_radius, false)
                .into_iter()
                .map(|i| space.ids()[i])
                .collect();
            let (count, _) = min_ball_cover(&space, &ball, &cover_radius, false).unwrap();
            best_closed = best_closed.max(count);
        }
        println!("k={k}: closed balls, max-over-centers minimal cover = {best_closed}");
        // mixed: closed target, open covering
        let mut best_mixed = 0u64;
        for &center in space.ids() {
            let center_idx = space.index_of(center).unwrap();
            let ball: BTreeSet<u32> = space
                .ball_indices(center_idx, &target_radius, false)
                .into_iter()
                .map(|i| space.ids()[i])
                .collect();
            let (count, _) = min_ball_cover(&space, &ball, &cover_radius, true).unwrap();
            best_mixed = best_mixed.max(count);
        }
        println!("k={k}: closed target / open covering = {best_mixed}");
    }
}

#[test]
#[ignore]
fn explore_pipeline_circle() {
    use dadim_core::action::{pipeline_experiment, ActionKind, PipelineParams};
    let t = std::time::Instant::now();
    let report = pipeline_experiment(
        ActionKind::CircleRotation { angle: dadim_core::metric::rat(13, 89) },
        &PipelineParams::default(),
        &dadim_core::Caps::default(),
    );
    match report {
        Ok(r) => {
            println!("{}", r.render());
            println!("{}", r.render_timings());
            println!("total {:?}", t.elapsed());
        }
        Err(e) => println!("PIPELINE ERROR: {e}"),
    }
}

#[test]
#[ignore]
fn explore_pipeline_torus() {
    use dadim_core::action::{pipeline_experiment, ActionKind, PipelineParams};
    let t = std::time::Instant::now();
    let params = PipelineParams { word_horizon: 1, epsilon: Some(dadim_core::metric::rat(1, 50)), ..PipelineParams::default() };
    let report = pipeline_experiment(
        ActionKind::TorusTranslation {
            shifts: vec![dadim_core::metric::rat(5, 53), dadim_core::metric::rat(7, 59)],
        },
        &params,
        &dadim_core::Caps::default(),
    );
    match report {
        Ok(r) => {
            println!("{}", r.render());
            println!("{}", r.render_timings());
            println!("total {:?}", t.elapsed());
        }
        Err(e) => println!("PIPELINE ERROR: {e}"),
    }
}

#[test]
#[ignore]
fn explore_pipeline_cyclic() {
    use dadim_core::action::{pipeline_experiment, ActionKind, PipelineParams};
    let params = PipelineParams { word_horizon: 4, ..PipelineParams::default() };
    let report = pipeline_experiment(
        ActionKind::CyclicTranslation { n: 24 },
        &params,
        &dadim_core::Caps::default(),
    );
    match report {
        Ok(r) => println!("{}", r.render()),
        Err(e) => println!("PIPELINE ERROR: {e}"),
    }
}

#[test]
#[ignore]
fn explore_window_brute() {
    use dadim_core::cover::{brute_min_cover, BruteOutcome};
    use dadim_core::system::{PartialSystem, Scale};
    let window = PartialSystem::translation_grid(3, 4);
    for m in 1..=3u64 {
        let out = brute_min_cover(&window, 2, 1, m, &dadim_core::Caps::default()).unwrap();
        match out {
            BruteOutcome::Exists(cover) => {
                let check = window.check_cover(&cover, Scale::Finite(2), m).unwrap();
                println!("M={m}: EXISTS, recheck certified: {}", check.is_certified());
                println!("  families: {:?}", cover.families);
            }
            BruteOutcome::NotExists => println!("M={m}: NOT EXISTS"),
        }
    }
}

#[test]
#[ignore]
fn explore_torus_window_brute() {
    use dadim_core::action::{approximate_action, build_action, ActionKind};
    use dadim_core::cover::{brute_min_cover, BruteOutcome};
    use dadim_core::metric::rat;
    use std::collections::BTreeSet;
    let action = build_action(
        ActionKind::TorusTranslation { shifts: vec![rat(5, 53), rat(7, 59)] },
        8,
    )
    .unwrap();
    let approx = approximate_action(&action, 1, rat(1, 50)).unwrap();
    let mut subset = BTreeSet::new();
    for x in 0..3u32 {
        for y in 0..4u32 {
            subset.insert(x * 59 + y);
        }
    }
    let window = approx.system(1).restrict(&subset).unwrap();
    println!("window points: {:?}", window.points());
    for &p in window.points() {
        let ball = window.orbit_ball(p, dadim_core::system::Scale::Finite(1)).unwrap();
        println!("nbrs({p}) = {ball:?}");
    }
    let out = brute_min_cover(&window, 2, 1, 1, &dadim_core::Caps::default()).unwrap();
    println!("outcome exists: {}", matches!(out, BruteOutcome::Exists(_)));
}

#[test]
#[ignore]
fn explore_pathological_depth4() {
    let space = pathological_cantor(4, 10_000).unwrap();
    println!("depth 4: {} points", space.len());
    let k = 3u32;
    let target_radius = rat(1, 1i128 << k);
    let cover_radius = rat(1, 1i128 << (k + 1));
    for open in [true, false] {
        let mut best = 0u64;
        let mut best_center = 0;
        for &center in space.ids() {
            let ci = space.index_of(center).unwrap();
            let ball: BTreeSet<u32> = space
                .ball_indices(ci, &target_radius, open)
                .into_iter()
                .map(|i| space.ids()[i])
                .collect();
            let (count, _) = min_ball_cover(&space, &ball, &cover_radius, open).unwrap();
            if count > best {
                best = count;
                best_center = center;
            }
        }
        println!("k=3 open={open}: max minimal cover {best} at center {best_center} (need >= 4)");
    }
}
