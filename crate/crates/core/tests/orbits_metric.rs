use std::sync::Arc;

use proptest::prelude::*;

use pseudorbit::gallery::{build_gallery, GalleryName};
use pseudorbit::orbits::{
    exact_orbit, perturbed_orbit, sampled_max_deviation, verify_pseudo_orbit, OrbitRecord, OrbitTree, PseudoOrbit,
};
use pseudorbit::pseudogroup::{GeneratingSet, Word};
use pseudorbit::ymetric::{d0, greedy_net, PoolMetric};

fn dyadic() -> Arc<GeneratingSet> {
    build_gallery(&GalleryName::Dyadic).unwrap().gens
}

fn section6() -> Arc<GeneratingSet> {
    build_gallery(&GalleryName::Section6).unwrap().gens
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn perturbed_edges_stay_within_alpha(x in 0.0f64..1.0, alpha in 0.0f64..0.05, seed in any::<u64>()) {
        let g = section6();
        let o = perturbed_orbit(&g, g.space().point(x).unwrap(), alpha, seed).unwrap();
        prop_assert!(sampled_max_deviation(&o, 12, 1000, seed ^ 1) <= alpha + 1e-12);
        let r = verify_pseudo_orbit(&o, 4);
        prop_assert!(r.ok);
        prop_assert!(r.max_deviation <= alpha + 1e-12);
    }

    #[test]
    fn records_replay_bit_for_bit(x in 0.0f64..1.0, seed in any::<u64>()) {
        let g = dyadic();
        let o = perturbed_orbit(&g, g.space().point(x).unwrap(), 1e-3, seed).unwrap();
        let rec = o.record(5);
        let json = serde_json::to_string(&rec).unwrap();
        let back: OrbitRecord = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(&back, &rec);
        let again = PseudoOrbit::replay(g.clone(), &back).unwrap();
        prop_assert_eq!(again.record(5), rec);
    }

    #[test]
    fn d0_truncations_bracket(x in 0.0f64..1.0, y in 0.0f64..1.0, seed in any::<u64>()) {
        let g = section6();
        let sp = g.space();
        let a = perturbed_orbit(&g, sp.point(x).unwrap(), 1e-3, seed).unwrap();
        let b = exact_orbit(&g, sp.point(y).unwrap());
        let mut prev = d0(&a, &b, 1);
        for k in 2..7 {
            let cur = d0(&a, &b, k);
            prop_assert!(cur.lower >= prev.lower - 1e-15);
            prop_assert!(cur.upper() <= prev.upper() + 1e-15);
            prev = cur;
        }
        let sym = d0(&b, &a, 6);
        prop_assert_eq!(sym.lower, prev.lower);
        if x != y {
            prop_assert!(prev.lower > 0.0);
        }
        prop_assert_eq!(d0(&a, &a, 6).lower, 0.0);
    }
}

/// `d₀` straight from the definition: cumulative level maxima over reduced
/// words in both domains, with the dyadic maps written out by hand.
fn dyadic_d0_direct(p: f64, q: f64, k: usize) -> f64 {
    // letters: 0 = x -> 2x on [0, 1/2), 1 = x -> 2x - 1 on [1/2, 1),
    // 2 = x/2, 3 = (x + 1)/2; inverse pairs (0, 2) and (1, 3).
    fn apply(h: usize, x: f64) -> Option<f64> {
        match h {
            0 if (0.0..0.5).contains(&x) => Some(2.0 * x),
            1 if (0.5..1.0).contains(&x) => Some(2.0 * x - 1.0),
            2 => Some(x / 2.0),
            3 => Some((x + 1.0) / 2.0),
            _ => None,
        }
    }
    fn walk(x: f64, y: f64, last: Option<usize>, level: usize, k: usize, m: &mut Vec<f64>) {
        m[level] = m[level].max((x - y).abs());
        if level == k {
            return;
        }
        for h in 0..4 {
            if last.is_some_and(|l| (l + 2) % 4 == h) {
                continue;
            }
            if let (Some(a), Some(b)) = (apply(h, x), apply(h, y)) {
                walk(a, b, Some(h), level + 1, k, m);
            }
        }
    }
    let mut m = vec![0.0; k + 1];
    walk(p, q, None, 0, k, &mut m);
    let mut total = 0.0;
    let mut running: f64 = 0.0;
    for (level, v) in m.iter().enumerate() {
        running = running.max(*v);
        total += running / 2f64.powi(level as i32);
    }
    total
}

#[test]
fn dyadic_d0_matches_direct_sum() {
    let g = dyadic();
    let sp = g.space();
    for &(p, q) in &[(0.1, 0.15), (0.0, 0.3), (0.26, 0.74), (0.9, 0.91)] {
        let a = exact_orbit(&g, sp.point(p).unwrap());
        let b = exact_orbit(&g, sp.point(q).unwrap());
        let v = d0(&a, &b, 10);
        let direct = dyadic_d0_direct(p, q, 10);
        assert!((v.lower - direct).abs() < 1e-12, "({p}, {q}): {} vs {direct}", v.lower);
        assert!((v.tail - 2f64.powi(-10)).abs() < 1e-18);
    }
}

#[test]
fn finite_net_covers_pool() {
    let g = dyadic();
    let sp = g.space();
    let pool: Vec<PseudoOrbit> = (0..200)
        .map(|i| perturbed_orbit(&g, sp.point(i as f64 / 200.0).unwrap(), 1e-3, 40 + i).unwrap())
        .collect();
    let net = greedy_net(&pool, 12, 0.05);
    assert!(!net.centers.is_empty() && net.centers.len() < pool.len());
    for o in &pool {
        let covered = net.centers.iter().any(|&c| d0(&pool[c], o, 12).upper() <= 0.05);
        assert!(covered);
    }
}

#[test]
fn pool_metric_agrees_with_pairwise_d0() {
    let g = section6();
    let sp = g.space();
    let pool: Vec<PseudoOrbit> = (0..12)
        .map(|i| perturbed_orbit(&g, sp.point(i as f64 / 12.0).unwrap(), 1e-3, i).unwrap())
        .collect();
    let pm = PoolMetric::new(&pool, 6);
    assert!(pm.is_symmetric());
    for i in 0..pool.len() {
        assert_eq!(pm.d1_upper(i, i).lower, 0.0);
        for j in 0..pool.len() {
            assert_eq!(pm.d0(i, j).lower, d0(&pool[i], &pool[j], 6).lower);
            assert!(pm.d1_upper(i, j).lower <= pm.d0(i, j).lower + 1e-15);
        }
    }
}

#[test]
fn shifted_orbit_reads_through_prefix() {
    let g = section6();
    let sp = g.space();
    let x = perturbed_orbit(&g, sp.point(0.3).unwrap(), 1e-3, 9).unwrap();
    let f0 = g.letter_named("f0").unwrap();
    let f1 = g.letter_named("f1").unwrap();
    let g0 = Word::from_applied(vec![f0, f1]);
    let s = x.shift(&g0).unwrap();
    let w = Word::from_applied(vec![f0, f0]);
    assert_eq!(s.value_at(&w), x.value_at(&w.after(&g0)));
    assert_eq!(s.origin(), x.value_at(&g0).unwrap());
}
