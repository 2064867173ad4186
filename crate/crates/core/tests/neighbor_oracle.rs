use std::collections::BTreeSet;

use dpd::neighbor::max_displacement;
use dpd::{build_pair_list, le_minimum_image, le_wrap, needs_rebuild, SimBox, SystemState, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{oracle_distance, oracle_pairs};

fn random_case(rng: &mut ChaCha8Rng) -> (SystemState, SimBox) {
    let n = rng.gen_range(2..=200);
    let density = rng.gen_range(0.5..3.0);
    let sheared = rng.gen_bool(0.5);
    let mut b = SimBox::for_density(n.max(60), density, if sheared { 0.2 } else { 0.0 }).unwrap();
    if sheared {
        b = b.with_offset(rng.gen_range(0.0..b.edge()));
    }
    let seed = rng.gen();
    let state = SystemState::random(n, 1.0, 1.0, &b, seed).unwrap();
    (state, b)
}

#[test]
fn cell_list_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut compared = 0;
    for _ in 0..300 {
        let (state, b) = random_case(&mut rng);
        let list = build_pair_list(&state, &b, 1.0, 0.3).unwrap();
        let expected = oracle_pairs(&state, &b, 1.3);
        assert_eq!(list.pairs(), expected.as_slice(), "N={} L={} offset={}", state.len(), b.edge(), b.le_offset());
        compared += expected.len();
    }
    assert!(compared > 10_000);
}

#[test]
fn library_minimum_image_is_the_shortest_image() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let b = SimBox::sheared(6.0, 0.3).unwrap().with_offset(2.2);
    for _ in 0..20_000 {
        let qi = Vector3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let qj = Vector3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let (d, _) = le_minimum_image(&qi, &qj, &b);
        let truth = oracle_distance(&qi, &qj, &b);
        if truth < 0.5 * b.edge() {
            assert!((d.norm() - truth).abs() < 1e-12, "{qi:?} {qj:?}");
        }
    }
}

fn displace(state: &mut SystemState, rng: &mut ChaCha8Rng, max_step: f64) {
    for q in &mut state.positions {
        let dir = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if dir.norm() > 0.0 {
            *q += dir.normalize() * rng.gen_range(0.0..max_step);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn list_stays_complete_until_rebuild_is_flagged(seed in any::<u64>(), sheared in any::<bool>(), moves in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shear = if sheared { 0.5 } else { 0.0 };
        let mut b = SimBox::for_density(150, 3.0, shear).unwrap();
        let mut state = SystemState::random(150, 1.0, 1.0, &b, seed).unwrap();
        let list = build_pair_list(&state, &b, 1.0, 0.3).unwrap();
        let listed: BTreeSet<_> = list.pairs().iter().copied().collect();
        for _ in 0..moves {
            displace(&mut state, &mut rng, 0.04);
            b.advance_offset(0.05);
            le_wrap(&mut state, &b);
            if needs_rebuild(&state, &list, &b) {
                break;
            }
            for p in oracle_pairs(&state, &b, 1.0) {
                prop_assert!(listed.contains(&p), "pair {p:?} inside r_c missing from list");
            }
        }
    }

    #[test]
    fn rebuild_threshold_is_half_skin(seed in any::<u64>(), frac in 0.0f64..1.0) {
        let b = SimBox::for_density(100, 3.0, 0.0).unwrap();
        let mut state = SystemState::random(100, 1.0, 1.0, &b, seed).unwrap();
        let list = build_pair_list(&state, &b, 1.0, 0.3).unwrap();
        let shift = frac * 0.3;
        state.positions[7].x += shift;
        le_wrap(&mut state, &b);
        prop_assert!((max_displacement(&state, &list, &b) - shift).abs() < 1e-12);
        prop_assert_eq!(needs_rebuild(&state, &list, &b), shift > 0.15);
    }
}
