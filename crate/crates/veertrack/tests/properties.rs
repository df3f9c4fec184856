use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use veertrack::cones::{
    birkhoff_coefficient, compose_word, equivalent_mod_v, hilbert_distance, image_diameter,
    reconstruct_from_words, split_transition, Cone, IntMatrix,
};
use veertrack::delaunay::{delaunay_violations, flip, greedy_delaunay, is_veering, total_linf};
use veertrack::fixtures;
use veertrack::flow::{run_flow, CheckMode, Trajectory};
use veertrack::scalar::{rational, Rational};
use veertrack::surface::{
    angle_census, area, parse_surface_as, serialize_surface, validate, Surface,
};
use veertrack::traintrack::{
    complementary_regions, dual_track, vertex_curves, Direction, SplitRecord,
};

fn exact_torus(seed: u64) -> Surface<Rational> {
    fixtures::random_exact_torus(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn exact_genus_two(seed: u64) -> Surface<Rational> {
    fixtures::random_exact_genus_two(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn exact_trajectory(seed: u64) -> Option<Trajectory<Rational>> {
    run_flow(&exact_torus(seed), 4.0, 20, CheckMode::EveryEvent).ok()
}

fn pairing(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Genus from the cone angles: the angle excesses sum to (4g - 4)π.
fn genus<F: veertrack::scalar::Coord>(s: &Surface<F>) -> i64 {
    let excess: i64 = angle_census(s)
        .iter()
        .map(|(&k, &n)| (k as i64 - 2) * n as i64)
        .sum();
    excess / 4 + 1
}

// Hilbert distance by the cross ratio of the chord through x and y inside
// the bounded slice where the sum of the facet functionals is 1.
fn cross_ratio_distance(c: &Cone, x: &[f64], y: &[f64]) -> f64 {
    let level = |v: &[f64]| -> f64 {
        c.facets
            .iter()
            .map(|f| f.iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    };
    let x: Vec<f64> = x.iter().map(|v| v / level(x)).collect();
    let y: Vec<f64> = y.iter().map(|v| v / level(y)).collect();
    let dir: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
    let (mut forward, mut backward) = (f64::INFINITY, f64::INFINITY);
    for f in &c.facets {
        let fx: f64 = f.iter().zip(&x).map(|(a, b)| a * b).sum();
        let fd: f64 = f.iter().zip(&dir).map(|(a, b)| a * b).sum();
        if fd < 0.0 {
            forward = forward.min(-fx / fd);
        } else if fd > 0.0 {
            backward = backward.min(fx / fd);
        }
    }
    // Points x + s·dir: x at s = 0, y at s = 1, exits at s = -backward and s = forward.
    let (p, q) = (-backward, forward);
    ((q * (1.0 - p)) / ((q - 1.0) * -p)).ln()
}

fn interior_point(c: &Cone, weights: &[f64]) -> Vec<f64> {
    let dim = c.generators[0].len();
    (0..dim)
        .map(|i| {
            c.generators
                .iter()
                .zip(weights.iter().cycle())
                .map(|(g, w)| g[i] * w)
                .sum()
        })
        .collect()
}

fn random_cone() -> impl Strategy<Value = Cone> {
    (3usize..=6)
        .prop_flat_map(|dim| {
            prop::collection::vec(prop::collection::vec(0i64..4, dim), dim + 1..dim + 4)
        })
        .prop_filter_map("cone must be full-dimensional", |mut gens| {
            let dim = gens[0].len();
            for (i, g) in gens.iter_mut().enumerate().take(dim) {
                g[i] += 3;
            }
            let c = Cone::from_integer_generators(&gens).ok()?;
            (c.facets.len() >= dim).then_some(c)
        })
}

fn positive_matrix(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.05f64..3.0, n), n)
}

fn apply(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, .. ProptestConfig::default() })]

    #[test]
    fn flow_keeps_invariants_and_exact_area(seed in 0u64..10_000, num in -40i64..40) {
        let s = exact_torus(seed);
        let t = num as f64 / 10.0;
        let flowed = s.apply_flow(t);
        prop_assert!(validate(&flowed).passed);
        prop_assert_eq!(area(&flowed).unwrap(), area(&s).unwrap());
        prop_assert_eq!(angle_census(&flowed), angle_census(&s));
    }

    #[test]
    fn documents_round_trip(seed in 0u64..10_000) {
        let s = exact_genus_two(seed);
        let back: Surface<Rational> = parse_surface_as(&serialize_surface(&s)).unwrap();
        prop_assert_eq!(validate(&back), validate(&s));
        prop_assert_eq!(back.periods(), s.periods());
        prop_assert_eq!(back.triangulation().labels(), s.triangulation().labels());
    }

    #[test]
    fn greedy_flips_reduce_length_and_keep_structure(seed in 0u64..10_000, picks in prop::collection::vec(0usize..64, 0..8)) {
        let base = if seed % 2 == 0 { exact_torus(seed) } else { exact_genus_two(seed) };
        // scramble with legal flips
        let mut s = base.clone();
        for p in picks {
            let e = p % s.edge_count();
            if let Ok((next, _)) = flip(&s, e) {
                if validate(&next).passed && matches!(is_veering(&next), Ok(true)) {
                    s = next;
                }
            }
        }
        prop_assert_eq!(angle_census(&s), angle_census(&base));
        prop_assert_eq!(area(&s).unwrap(), area(&base).unwrap());
        if let Some(&e) = delaunay_violations(&s).unwrap().first() {
            let (next, _) = flip(&s, e).unwrap();
            prop_assert!(total_linf(&next) < total_linf(&s));
            prop_assert!(validate(&next).passed);
            prop_assert!(is_veering(&next).unwrap());
            prop_assert_eq!(area(&next).unwrap(), area(&base).unwrap());
        }
        let (reduced, _) = greedy_delaunay(&s).unwrap();
        prop_assert!(delaunay_violations(&reduced).unwrap().is_empty());
        let (again, flips) = greedy_delaunay(&reduced).unwrap();
        prop_assert!(flips.is_empty());
        prop_assert_eq!(again, reduced.clone());
        prop_assert_eq!(angle_census(&reduced), angle_census(&base));
    }

    #[test]
    fn track_measures_and_regions(seed in 0u64..10_000, genus_two in any::<bool>()) {
        let s = if genus_two { exact_genus_two(seed) } else { exact_torus(seed) };
        for direction in [Direction::Vertical, Direction::Horizontal] {
            let (track, m) = dual_track(&s, direction).unwrap();
            prop_assert!(track.satisfies_switch_conditions(&m.transverse));
            prop_assert_eq!(pairing(&m.transverse, &m.tangential), area(&s).unwrap());
            let total_angle: usize = angle_census(&s).iter().map(|(&k, &n)| k as usize * n).sum();
            let sides: usize = complementary_regions(&track).regions.iter().map(|r| r.sides).sum();
            prop_assert_eq!(sides, total_angle);
            let vertices = s.triangulation().vertex_count() as i64;
            prop_assert_eq!(track.branch_count() as i64, 3 * vertices + 6 * genus(&s) - 6);
            for c in vertex_curves(&track).unwrap() {
                prop_assert!(c.iter().all(|&v| v <= 2));
                prop_assert!(c.iter().any(|&v| v > 0));
            }
        }
    }

    #[test]
    fn flow_states_stay_delaunay_and_replay(seed in 0u64..10_000) {
        let Some(traj) = exact_trajectory(seed) else { return Ok(()); };
        let again = run_flow(&traj.start, 4.0, 20, CheckMode::Every(5)).unwrap();
        prop_assert_eq!(&again, &traj);
        let area0 = area(&traj.start).unwrap();
        let states = traj.states().unwrap();
        for (k, state) in states.iter().enumerate() {
            // between event k and the next one the chart is strictly Delaunay
            let next = traj.events.get(k).map_or(traj.end.scale().clone(), |e| e.threshold.clone());
            if &next != state.scale() {
                let between = state.clone().with_scale((state.scale().clone() + next) / rational(2, 1));
                prop_assert!(delaunay_violations(&between).unwrap().is_empty());
            }
            let (track, m) = dual_track(state, Direction::Vertical).unwrap();
            prop_assert!(track.satisfies_switch_conditions(&m.transverse));
            prop_assert_eq!(pairing(&m.transverse, &m.tangential), area0.clone());
        }
    }

    #[test]
    fn transition_algebra_on_prefixes(seed in 0u64..10_000) {
        let Some(traj) = exact_trajectory(seed) else { return Ok(()); };
        let records: Vec<SplitRecord> = traj.events.iter().map(|e| e.record()).collect();
        let states = traj.states().unwrap();
        let n = traj.start.edge_count();
        let start_track = dual_track(&traj.start, Direction::Vertical).unwrap().0;
        for k in 0..=records.len() {
            let pair = compose_word(&records[..k], n).unwrap();
            prop_assert_eq!(&pair.tangential, &pair.transverse.transpose());
            prop_assert!(pair.transverse.dominates_identity());
            let det = pair.transverse.det();
            prop_assert!(det == rational(1, 1) || det == rational(-1, 1));
            let end_track = dual_track(&states[k], Direction::Vertical).unwrap().0;
            let words = veertrack::cones::edge_words(&records[..k]);
            let rebuilt = reconstruct_from_words(&start_track, &end_track, &words).unwrap();
            prop_assert_eq!(rebuilt.1, pair);
        }
    }

    #[test]
    fn tangential_heights_agree_modulo_switch_relations(seed in 0u64..10_000) {
        let Some(traj) = exact_trajectory(seed) else { return Ok(()); };
        let states = traj.states().unwrap();
        for (i, ev) in traj.events.iter().enumerate() {
            let (_, before) = dual_track(&states[i], Direction::Vertical).unwrap();
            let (after_track, after) = dual_track(&states[i + 1], Direction::Vertical).unwrap();
            let pair = split_transition(&ev.record(), traj.start.edge_count()).unwrap();
            // both measured at the event scale, where the two charts coincide
            let scale = ev.threshold.clone();
            let at_event = |s: &Surface<Rational>| dual_track(&s.clone().with_scale(scale.clone()), Direction::Vertical).unwrap().1;
            let b = at_event(&states[i]);
            let a = at_event(&states[i + 1]);
            let pushed = pair.tangential.apply(&b.tangential);
            prop_assert!(equivalent_mod_v(&after_track, &pushed, &a.tangential));
            prop_assert_eq!(pairing(&b.transverse, &b.tangential), pairing(&a.transverse, &a.tangential));
            prop_assert_eq!(pairing(&before.transverse, &before.tangential), pairing(&after.transverse, &after.tangential));
        }
    }

    #[test]
    fn hilbert_distance_is_a_projective_metric(c in random_cone(), w in prop::collection::vec(0.1f64..2.0, 9), scale in 0.1f64..10.0) {
        let rot = |k: usize| -> Vec<f64> { (0..w.len()).map(|i| w[(i + k) % w.len()]).collect() };
        let (x, y, z) = (interior_point(&c, &w), interior_point(&c, &rot(1)), interior_point(&c, &rot(2)));
        let dxy = hilbert_distance(&c, &x, &y).unwrap();
        prop_assert!((dxy - hilbert_distance(&c, &y, &x).unwrap()).abs() <= 1e-12 * (1.0 + dxy));
        let dxz = hilbert_distance(&c, &x, &z).unwrap();
        let dzy = hilbert_distance(&c, &z, &y).unwrap();
        prop_assert!(dxy <= dxz + dzy + 1e-10);
        let scaled: Vec<f64> = x.iter().map(|v| v * scale).collect();
        prop_assert!((hilbert_distance(&c, &scaled, &y).unwrap() - dxy).abs() <= 1e-10 * (1.0 + dxy));
        let oracle = cross_ratio_distance(&c, &x, &y);
        prop_assert!((oracle - dxy).abs() <= 1e-10 * (1.0 + dxy), "{} {} {:?} {:?}", oracle, dxy, x, y);
    }

    #[test]
    fn positive_maps_do_not_expand(a in positive_matrix(4), x in prop::collection::vec(0.01f64..5.0, 4), y in prop::collection::vec(0.01f64..5.0, 4)) {
        let c = Cone::orthant(4);
        let before = hilbert_distance(&c, &x, &y).unwrap();
        let after = hilbert_distance(&c, &apply(&a, &x), &apply(&a, &y)).unwrap();
        let delta = image_diameter(&a, &c, &c).unwrap();
        prop_assert!(after <= before + 1e-12);
        prop_assert!(after <= birkhoff_coefficient(delta) * before + 1e-12);
    }

    #[test]
    fn noisy_good_words_still_contract(t in positive_matrix(3), noise in prop::collection::vec(prop::collection::vec(0.0f64..2.0, 3), 3),
                                        x in prop::collection::vec(0.01f64..5.0, 3), y in prop::collection::vec(0.01f64..5.0, 3)) {
        let c = Cone::orthant(3);
        let s: Vec<Vec<f64>> = noise.iter().enumerate().map(|(i, r)| r.iter().enumerate().map(|(j, v)| v + (i == j) as u8 as f64).collect()).collect();
        let word = mat_mul(&t, &mat_mul(&s, &t));
        let delta_t = image_diameter(&t, &c, &c).unwrap();
        let delta_word = image_diameter(&word, &c, &c).unwrap();
        prop_assert!(delta_word <= delta_t + 1e-9);
        let before = hilbert_distance(&c, &x, &y).unwrap();
        let after = hilbert_distance(&c, &apply(&word, &x), &apply(&word, &y)).unwrap();
        prop_assert!(after <= birkhoff_coefficient(delta_t) * before + 1e-12);
    }

    #[test]
    fn spectral_radius_matches_power_iteration(rows in prop::collection::vec(prop::collection::vec(1i64..6, 4), 4)) {
        let m = IntMatrix { rows };
        let exact = m.spectral_radius();
        let power = veertrack::cones::perron_root(&m.to_f64()).unwrap();
        prop_assert!((exact - power).abs() <= 1e-9 * power);
    }
}
