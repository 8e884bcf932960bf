use proptest::prelude::*;

use iglu_core::agents::{Agent, RandomAgent};
use iglu_core::matching::{max_match_size, Edit};
use iglu_core::metrics::{bleu, completion_rate, reward_score, rho, rho_of, success_rate, EpisodeSummary};
use iglu_core::replay::{replay_verify, run_episode, EpisodeRecord, ManualClock, VerifyOptions};
use iglu_core::voxel::{
    apply_transform, grid_from_structure, hamming, intersection_size, structure_from_grid, COLOR_LIMIT,
};
use iglu_core::{max_match, BlockColor, Env, EpisodeConfig, MatchIndex, Pos, Structure, TaskLibrary, Transform};

fn color() -> impl Strategy<Value = BlockColor> {
    (0..6usize).prop_map(|i| BlockColor::ALL[i])
}

/// Structures inside the box `[lo, hi)` on every axis.
fn structure_in(lo: (i32, i32, i32), hi: (i32, i32, i32), max: usize) -> impl Strategy<Value = Structure> {
    prop::collection::btree_map((lo.0..hi.0, lo.1..hi.1, lo.2..hi.2), color(), 0..=max)
        .prop_map(|m| Structure::from_blocks(m.into_iter().map(|((x, y, z), c)| (Pos::new(x, y, z), c))).unwrap())
}

fn zone_structure(max: usize) -> impl Strategy<Value = Structure> {
    structure_in((0, 0, 0), (11, 9, 11), max)
}

fn small_structure() -> impl Strategy<Value = Structure> {
    structure_in((3, 0, 3), (8, 4, 8), 6)
}

fn transform() -> impl Strategy<Value = Transform> {
    (0..4u8, -10..=10i32, -8..=8i32, -10..=10i32).prop_map(|(r, dx, dy, dz)| Transform::new(r, dx, dy, dz))
}

/// Every rotation and translation, by plain enumeration.
fn enumerate_max_match(built: &Structure, target: &Structure) -> usize {
    let mut best = 0;
    for r in 0..4 {
        for dx in -10..=10 {
            for dy in -8..=8 {
                for dz in -10..=10 {
                    let moved = apply_transform(target, &Transform::new(r, dx, dy, dz));
                    best = best.max(intersection_size(&moved, built));
                }
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn identity_and_full_turn(s in zone_structure(20), dx in -3..=3i32, dz in -3..=3i32) {
        prop_assert_eq!(apply_transform(&s, &Transform::IDENTITY), s.clone());
        let mut t = s.clone();
        for _ in 0..4 {
            t = apply_transform(&t, &Transform::new(1, 0, 0, 0));
        }
        prop_assert_eq!(&t, &s);
        let there = apply_transform(&s, &Transform::translation(dx, 0, dz));
        prop_assert_eq!(apply_transform(&there, &Transform::translation(-dx, 0, -dz)), s.clone());
        prop_assert_eq!(there.len(), s.len());
        prop_assert_eq!(there.color_counts(), s.color_counts());
    }

    #[test]
    fn intersection_symmetric_and_bounded(a in zone_structure(30), b in zone_structure(30)) {
        let n = intersection_size(&a, &b);
        prop_assert_eq!(n, intersection_size(&b, &a));
        prop_assert!(n <= a.len().min(b.len()));
        prop_assert_eq!(intersection_size(&a, &a), a.len());
    }

    #[test]
    fn hamming_is_a_metric(a in zone_structure(25), b in zone_structure(25), c in zone_structure(25)) {
        let (ga, gb, gc) = (grid_from_structure(&a).unwrap(), grid_from_structure(&b).unwrap(), grid_from_structure(&c).unwrap());
        prop_assert_eq!(hamming(&ga, &gb), hamming(&gb, &ga));
        prop_assert_eq!(hamming(&ga, &gb) == 0, a == b);
        prop_assert!(hamming(&ga, &gc) <= hamming(&ga, &gb) + hamming(&gb, &gc));
        prop_assert!(hamming(&ga, &gb) <= 11 * 11 * 9);
    }

    #[test]
    fn grid_round_trip(s in zone_structure(60)) {
        let g = grid_from_structure(&s).unwrap();
        prop_assert_eq!(structure_from_grid(&g), s.clone());
        let json = serde_json::to_string(&g).unwrap();
        prop_assert_eq!(serde_json::from_str::<iglu_core::VoxelGrid>(&json).unwrap(), g);
        let json = serde_json::to_string(&s).unwrap();
        prop_assert_eq!(serde_json::from_str::<Structure>(&json).unwrap(), s);
    }

    #[test]
    fn max_match_bounds_and_invariance(built in zone_structure(15), target in zone_structure(15), t in transform()) {
        let m = max_match(&built, &target);
        prop_assert!(m.max_match <= built.len().min(target.len()));
        prop_assert_eq!(m.max_match, max_match_size(&built, &target));
        // moving the built structure rigidly inside the zone keeps M
        let moved = apply_transform(&built, &t);
        if moved.fits_zone() {
            prop_assert_eq!(max_match_size(&moved, &target), m.max_match);
        }
        prop_assert_eq!(max_match_size(&target, &target), target.len());
    }

    #[test]
    fn incremental_index_tracks_recompute(
        target in zone_structure(25),
        start in zone_structure(20),
        edits in prop::collection::vec((0..11i32, 0..9i32, 0..11i32, color()), 1..40),
    ) {
        let mut built = start.clone();
        let mut index = MatchIndex::new(&built, &target).unwrap();
        for (x, y, z, c) in edits {
            let p = Pos::new(x, y, z);
            let edit = match built.get(p) {
                Some(old) => { built.remove(p); Edit::Remove { pos: p, color: old } }
                None => { built.insert(p, c); Edit::Place { pos: p, color: c } }
            };
            prop_assert_eq!(index.apply(edit).unwrap(), max_match_size(&built, &target));
        }
        prop_assert_eq!(index.result(), max_match(&built, &target));
    }

    #[test]
    fn aggregate_metrics_bounded_and_order_free(
        eps in prop::collection::vec((-20..20i64, any::<bool>(), 0.0..=1.0f64), 1..12),
    ) {
        let summaries: Vec<EpisodeSummary> = eps
            .iter()
            .map(|&(g, success, rho)| EpisodeSummary { task_id: "t".into(), g, success, rho, steps_used: 1 })
            .collect();
        let mut reversed = summaries.clone();
        reversed.reverse();
        let s_s = success_rate(&summaries).unwrap();
        let s_c = completion_rate(&summaries).unwrap();
        prop_assert!((0.0..=1.0).contains(&s_s) && (0.0..=1.0).contains(&s_c));
        prop_assert!((reward_score(&summaries).unwrap() - reward_score(&reversed).unwrap()).abs() < 1e-9);
        prop_assert!((s_s - success_rate(&reversed).unwrap()).abs() < 1e-12);
        prop_assert!((s_c - completion_rate(&reversed).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn rho_extremes(built in small_structure(), target in small_structure()) {
        let r = rho_of(&built, &target);
        prop_assert!((0.0..=1.0).contains(&r));
        let m = max_match_size(&built, &target);
        let nonempty = built.len() + target.len() > 0;
        prop_assert_eq!(r == 1.0, nonempty && m == 0);
        let solved = m == target.len() && built.len() == target.len();
        prop_assert_eq!(r == 0.0, solved);
        prop_assert_eq!(r, rho(target.len(), built.len(), m));
    }

    #[test]
    fn bleu_monotone_in_order(
        cand in prop::collection::vec(prop::sample::select(vec!["put", "a", "red", "block", "on", "the", "left", "blue", "top"]), 1..12),
        refs in prop::collection::vec(prop::collection::vec(prop::sample::select(vec!["put", "a", "red", "block", "on", "the", "right", "green", "top"]), 1..12), 1..4),
    ) {
        let cand = cand.join(" ");
        let refs: Vec<String> = refs.iter().map(|r| r.join(" ")).collect();
        let refs: Vec<&str> = refs.iter().map(String::as_str).collect();
        let mut flipped = refs.clone();
        flipped.reverse();
        let mut prev = 1.0;
        for n in 1..=4 {
            let b = bleu(&cand, &refs, n).unwrap();
            prop_assert!((0.0..=1.0).contains(&b));
            prop_assert!(b <= prev + 1e-12, "BLEU-{} = {} > {}", n, b, prev);
            prop_assert_eq!(b, bleu(&cand, &flipped, n).unwrap());
            prev = b;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn max_match_matches_enumeration(built in small_structure(), target in small_structure()) {
        prop_assert_eq!(max_match_size(&built, &target), enumerate_max_match(&built, &target));
    }

    #[test]
    fn random_episode_invariants(seed in any::<u64>(), task in 0usize..9, stay in any::<bool>()) {
        let lib = TaskLibrary::bundled();
        let id = lib.tasks()[task % lib.tasks().len()].task_id.clone();
        let mut config = EpisodeConfig::new(&id).with_seed(seed).with_max_steps(150);
        config.termination_on_exit = !stay;
        let mut env = Env::new(config.clone(), &lib).unwrap();
        let mut agent = RandomAgent::new(seed);
        let mut net = 0i64;
        let mut total = 0i64;
        while !env.is_done() {
            let out = env.step(agent.act(&env)).unwrap();
            total += out.reward.value as i64;
            net += match out.reward.value { 2 => 1, -2 => -1, _ => 0 };
            for c in BlockColor::ALL {
                prop_assert_eq!(env.grid().color_count(c) + env.agent().inventory[c.index()] as usize, COLOR_LIMIT);
            }
            prop_assert_eq!(structure_from_grid(env.grid()), env.built().clone());
        }
        prop_assert_eq!(net, env.max_match() as i64);
        prop_assert_eq!(total, env.episode_reward());

        let run = |_: ()| run_episode(config.clone(), &lib, &mut RandomAgent::new(seed), Box::new(ManualClock::new(0, 7))).unwrap();
        let (a, b) = (run(()), run(()));
        prop_assert_eq!(a.to_jsonl(), b.to_jsonl());
        prop_assert!(replay_verify(&a, &lib, VerifyOptions::default()).unwrap().is_ok());
        prop_assert_eq!(EpisodeRecord::from_jsonl(&a.to_jsonl()).unwrap(), a);
    }
}
