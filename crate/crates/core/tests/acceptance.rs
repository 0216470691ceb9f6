//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Criteria 1-9 run once on an 8-worker pool (printed), then again on a
//! 1-worker pool and once more on 8 workers; criterion 10 compares the
//! serialized outcomes byte for byte.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use serde_json::json;

use pseudorbit::bundles::{entropy_bounds, rescale_generators, rescale_trend, HolonomyPresentation};
use pseudorbit::gallery::{build_gallery, check_branch_growth, gap_experiment, gap_scan, n_eps_alpha, GalleryName};
use pseudorbit::orbits::{perturbed_orbit, OrbitTree, PseudoOrbit};
use pseudorbit::pseudogroup::{GeneratingSet, Letter, Word};
use pseudorbit::rng::{derive_seed, sampler};
use pseudorbit::separation::{
    count_points, entropy_estimate, grid_pool, point_table, pseudo_entropy_estimate, strongly_separated,
    strongly_separated_family, unseparated_bases, GridPoolBuilder, Schedule, SeparationParams,
};
use pseudorbit::ymetric::{d0, PoolMetric};

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
    /// Deterministic summary compared across runs.
    fingerprint: String,
}

fn outcome(name: &'static str, pass: bool, detail: String, fingerprint: serde_json::Value) -> Outcome {
    Outcome {
        name,
        pass,
        detail,
        fingerprint: fingerprint.to_string(),
    }
}

fn system(name: GalleryName) -> Arc<GeneratingSet> {
    build_gallery(&name).unwrap().gens
}

const EPS1: f64 = 1.0 / 128.0;
const CELLS1: usize = 1 << 16;
const GOLDEN_THETA: f64 = 0.618_033_988_7;

// Independent dyadic oracle: its own maps, no pruning, every pair scanned.
mod oracle {
    fn step(h: u8, x: f64) -> Option<f64> {
        match h {
            0 if x < 0.5 => Some(2.0 * x),
            1 if (0.5..1.0).contains(&x) => Some(2.0 * x - 1.0),
            2 if x < 1.0 => Some(x / 2.0),
            3 if x < 1.0 => Some((x + 1.0) / 2.0),
            _ => None,
        }
    }

    fn inverse(h: u8) -> u8 {
        (h + 2) % 4
    }

    fn search(a: f64, b: f64, last: Option<u8>, remaining: usize, eps: f64) -> bool {
        if (a - b).abs() >= eps {
            return true;
        }
        if remaining == 0 {
            return false;
        }
        (0..4u8).any(|h| {
            if last.is_some_and(|l| inverse(l) == h) {
                return false;
            }
            match (step(h, a), step(h, b)) {
                (Some(fa), Some(fb)) => search(fa, fb, Some(h), remaining - 1, eps),
                _ => false,
            }
        })
    }

    /// Greedy count over the grid `{k/cells}`, `0 ≤ k ≤ cells`, testing each
    /// candidate against every kept point.
    pub fn count(cells: usize, n: usize, eps: f64) -> usize {
        let mut kept: Vec<f64> = Vec::new();
        for k in 0..=cells {
            let p = k as f64 / cells as f64;
            if kept.iter().all(|&q| search(p, q, None, n, eps)) {
                kept.push(p);
            }
        }
        kept.len()
    }
}

fn criterion_1(timed: bool) -> Outcome {
    let g = system(GalleryName::Dyadic);
    let start = Instant::now();
    let ns: Vec<usize> = (6..=14).collect();
    let table = point_table(&g, &ns, &[EPS1], CELLS1).unwrap();
    let est = entropy_estimate(&table);
    let elapsed = start.elapsed().as_secs_f64();
    let counts: Vec<u64> = table.rows.iter().map(|r| r.count).collect();
    let oracle_counts: Vec<u64> = (6..=10).map(|n| oracle::count(CELLS1, n, EPS1) as u64).collect();
    let matches = oracle_counts[..] == counts[..5];
    let h = est.as_ref().map(|e| e.h).unwrap_or(f64::NAN);
    let in_range = (0.60..=0.75).contains(&h);
    let fast = !timed || elapsed < 60.0;
    let mut detail = format!("h = {h:.4}, counts {counts:?}, oracle n<=10 {oracle_counts:?}");
    if timed {
        detail.push_str(&format!(", engine {elapsed:.1}s"));
    }
    outcome(
        "dyadic entropy in [0.60, 0.75], oracle counts match, under 60 s",
        in_range && matches && fast,
        detail,
        json!({ "counts": counts, "oracle": oracle_counts, "h": h }),
    )
}

fn criterion_2() -> Outcome {
    let ns: Vec<usize> = (6..=14).collect();
    let mut hs = Vec::new();
    for name in [GalleryName::Rotation(GOLDEN_THETA), GalleryName::Identity] {
        let g = system(name);
        let table = point_table(&g, &ns, &[EPS1], CELLS1).unwrap();
        hs.push(entropy_estimate(&table).map(|e| e.h).unwrap_or(f64::NAN));
    }
    outcome(
        "isometries estimate at most 0.02",
        hs.iter().all(|h| *h <= 0.02),
        format!("rotation h = {:.4}, identity h = {:.4}", hs[0], hs[1]),
        json!(hs),
    )
}

fn criterion_3() -> Outcome {
    let g = system(GalleryName::Dyadic);
    let ns: Vec<usize> = (4..=8).collect();
    let eps = [1.0 / 64.0];
    let builder = GridPoolBuilder {
        cells: 1 << 14,
        seed: 7,
        copies: 1,
    };
    let mut pass = true;
    let mut parts = Vec::new();
    let mut prints = Vec::new();
    for schedule in [Schedule::Theorem1, Schedule::Remark] {
        match pseudo_entropy_estimate(&g, &schedule, &ns, &eps, &builder, true) {
            Ok(r) => {
                pass &= r.difference.abs() <= 0.05;
                parts.push(format!("{schedule}: h = {:.4}, h_ps = {:.4}", r.orbit.h, r.pseudo.h));
                prints.push(json!({
                    "orbit": r.orbit_table.rows.iter().map(|x| x.count).collect::<Vec<_>>(),
                    "pseudo": r.pseudo_table.rows.iter().map(|x| x.count).collect::<Vec<_>>(),
                }));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{schedule}: {e}"));
            }
        }
    }
    outcome(
        "pseudo-entropy matches entropy within 0.05 (theorem1, remark)",
        pass,
        parts.join("; "),
        json!(prints),
    )
}

fn section6() -> pseudorbit::gallery::MorseSmalePair {
    build_gallery(&GalleryName::Section6).unwrap().pair.unwrap()
}

const EPS6: f64 = 0.1;
const ALPHA6: f64 = 1e-3;
const CELLS6: usize = 4096;

fn criterion_4() -> Outcome {
    let pair = section6();
    let mut pass = true;
    let mut rows = Vec::new();
    for n in 1..=6 {
        match gap_experiment(&pair, n, EPS6, ALPHA6, CELLS6) {
            Ok(r) => {
                let orbit = count_points(&pair.gens, SeparationParams::new(n, EPS6).unwrap(), CELLS6).count;
                let inequality = r.pseudo_count >= (1u64 << n) * orbit;
                pass &= r.identity_holds && r.exhaustive && inequality;
                rows.push(json!([
                    n,
                    r.base_count,
                    r.pseudo_count,
                    r.depth,
                    r.min_cross_distance,
                    r.min_same_distance
                ]));
            }
            Err(e) => {
                pass = false;
                rows.push(json!(e.to_string()));
            }
        }
    }
    outcome(
        "#A_a = 2^n #A, A_a strongly separated, N_a >= 2^n N (n <= 6)",
        pass,
        format!("[n, #A, #A_a, depth, min cross, min same] {}", json!(rows)),
        json!(rows),
    )
}

fn criterion_5() -> Outcome {
    let pair = section6();
    let ns: Vec<usize> = (4..=8).collect();
    match gap_scan(&pair, &ns, EPS6, ALPHA6, CELLS6) {
        Ok(s) => outcome(
            "constant-alpha slope exceeds orbit slope by >= log 2 - 0.1",
            pair.delta >= 0.15 && s.gap >= 2f64.ln() - 0.1,
            format!(
                "delta = {:.4}, orbit slope {:.4}, pseudo slope {:.4}, gap {:.4}",
                pair.delta, s.orbit_slope, s.pseudo_slope, s.gap
            ),
            json!([
                s.orbit_slope,
                s.pseudo_slope,
                s.reports.iter().map(|r| r.base_count).collect::<Vec<_>>()
            ]),
        ),
        Err(e) => outcome("constant-alpha slope gap", false, e.to_string(), json!(e.to_string())),
    }
}

fn criterion_6() -> Outcome {
    let pair = section6();
    let sp = pair.gens.space();
    let n_ea = n_eps_alpha(EPS6, ALPHA6, pair.delta).unwrap();
    let mut rng = sampler(606);
    let mut by_j = std::collections::BTreeMap::<usize, usize>::new();
    let mut eps_failures = 0usize;
    let mut branches_failing = 0usize;
    for _ in 0..1000 {
        let x = sp.point(rng.random::<f64>()).unwrap();
        let len = rng.random_range(0..=6usize);
        let g = Word::from_applied(
            (0..len)
                .map(|_| if rng.random::<bool>() { pair.f0 } else { pair.f1 })
                .collect(),
        );
        let xt = pair.adversarial_pseudo_orbit(x, &g, ALPHA6).unwrap();
        let r = check_branch_growth(&pair, &xt, n_ea + 1, EPS6).unwrap();
        for &j in &r.violations {
            *by_j.entry(j).or_default() += 1;
        }
        eps_failures += r.eps_violations.len();
        branches_failing += usize::from(!r.ok());
    }
    outcome(
        "branch deviation >= alpha (1+delta)^j and >= eps past n(eps, alpha)",
        branches_failing == 0,
        format!(
            "n(eps, alpha) = {n_ea}, failing branches {branches_failing}/1000, growth violations by level {by_j:?}, eps violations {eps_failures}"
        ),
        json!([branches_failing, by_j, eps_failures]),
    )
}

fn random_pool(g: &Arc<GeneratingSet>, size: usize, alpha: f64, seed: u64) -> Vec<PseudoOrbit> {
    let mut rng = sampler(seed);
    (0..size)
        .map(|i| {
            let p = g.space().point(g.space().reduce(rng.random::<f64>())).unwrap();
            perturbed_orbit(g, p, alpha, derive_seed(seed, i as u64)).unwrap()
        })
        .collect()
}

/// Random word of length `len` in the domain of both orbits, reduced.
fn common_word(x: &PseudoOrbit, y: &PseudoOrbit, len: usize, rng: &mut impl Rng) -> Option<Word> {
    let gens = x.gens();
    let (mut nx, mut ny) = (x.root(), y.root());
    let mut letters: Vec<Letter> = Vec::new();
    for _ in 0..len {
        let options: Vec<Letter> = (0..gens.len() as Letter)
            .filter(|&h| h != gens.identity() && letters.last().is_none_or(|&l| gens.inverse(l) != h))
            .filter(|&h| x.child(&nx, h).is_some() && y.child(&ny, h).is_some())
            .collect();
        if options.is_empty() {
            return None;
        }
        let h = options[rng.random_range(0..options.len())];
        nx = x.child(&nx, h).unwrap();
        ny = y.child(&ny, h).unwrap();
        letters.push(h);
    }
    Some(Word::from_applied(letters))
}

fn criterion_7() -> Outcome {
    let s6 = system(GalleryName::Section6);
    let pool = random_pool(&s6, 50, 1e-3, 71);
    let metric = PoolMetric::new(&pool, 8);
    let mut symmetric = true;
    for i in 0..pool.len() {
        for j in i + 1..pool.len() {
            symmetric &= d0(&pool[i], &pool[j], 8).lower.to_bits() == d0(&pool[j], &pool[i], 8).lower.to_bits();
        }
    }
    let triangles = metric.triangle_violations().len();
    let self_zero = (0..pool.len()).all(|i| metric.d1_upper(i, i).lower == 0.0);

    let k = 6;
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0usize;
    let mut checked = 0usize;
    for (name, seed) in [(GalleryName::Dyadic, 72u64), (GalleryName::Section6, 73)] {
        let g = system(name);
        let mut rng = sampler(seed);
        let orbits = random_pool(&g, 40, 1e-3, seed);
        while checked < if seed == 72 { 500 } else { 1000 } {
            let (i, j) = (rng.random_range(0..orbits.len()), rng.random_range(0..orbits.len()));
            let len = rng.random_range(0..=5usize);
            let Some(w) = common_word(&orbits[i], &orbits[j], len, &mut rng) else {
                continue;
            };
            let (sx, sy) = (orbits[i].shift(&w).unwrap(), orbits[j].shift(&w).unwrap());
            let left = d0(&sx, &sy, k).lower;
            let right = 2f64.powi(len as i32) * d0(&orbits[i], &orbits[j], k + len).lower + 1e-9;
            worst = worst.max(left - right);
            failures += usize::from(left > right);
            checked += 1;
        }
    }
    outcome(
        "d0 symmetric, triangle within tail, d1(x,x) = 0, shift bound 2^n",
        symmetric && triangles == 0 && self_zero && failures == 0,
        format!(
            "symmetric {symmetric}, triangle violations {triangles} (K = 8, tail {:.2e}), d1(x,x)=0 {self_zero}, shift pairs {checked} failures {failures} worst excess {worst:.3e}",
            metric.tail()
        ),
        json!([symmetric, triangles, self_zero, failures, worst]),
    )
}

fn criterion_8() -> Outcome {
    let g = system(GalleryName::Dyadic);
    let eps = 0.125;
    let mut pass = true;
    let mut rows = Vec::new();
    for n in 1..=8 {
        let alpha = eps / ((1u64 << n) - 1) as f64 / 3.0;
        let pool = grid_pool(&g, 1024, alpha, 800 + n as u64, 1).unwrap();
        let params = SeparationParams::new(n, eps).unwrap();
        let (kept, _) = strongly_separated_family(&pool, params);
        let family: Vec<&PseudoOrbit> = kept.iter().map(|&i| &pool.orbits()[i]).collect();
        let bad = unseparated_bases(&g, &family, SeparationParams::new(n, eps / 3.0).unwrap());
        // shifted pairs stay at least eps - tail apart in d0
        let mut shifted_failures = 0usize;
        let mut tested = 0usize;
        for a in 0..family.len().min(60) {
            for b in a + 1..family.len().min(60) {
                let s = strongly_separated(family[a], family[b], params).unwrap();
                let w = s.witness.expect("family member pairs are separated");
                let (sx, sy) = (family[a].shift(&w).unwrap(), family[b].shift(&w).unwrap());
                let v = d0(&sx, &sy, 6);
                shifted_failures += usize::from(v.lower < eps - v.tail);
                tested += 1;
            }
        }
        pass &= bad.is_empty() && shifted_failures == 0;
        rows.push(json!([n, family.len(), bad.len(), tested, shifted_failures]));
    }
    outcome(
        "bases of strongly separated families are (n, eps/3)-separated (n <= 8)",
        pass,
        format!(
            "[n, family, unseparated base pairs, shifted pairs, shifted failures] {}",
            json!(rows)
        ),
        json!(rows),
    )
}

fn criterion_9() -> Outcome {
    let p12 = HolonomyPresentation::from_lengths(vec![1.0, 2.0]).unwrap();
    let b = entropy_bounds(&p12, 0.7).unwrap();
    let sandwich = (b.lower - 0.35).abs() <= 1e-12 && (b.upper - 0.7).abs() <= 1e-12;
    let r = rescale_generators(&p12, 10).unwrap();
    let rescale = r.exponents == [10, 5]
        && r.new_lengths == [10.0, 11.0, 10.0, 12.0]
        && r.a_prime == 12.0
        && r.b_prime == 10.0
        && (r.ratio - 1.2).abs() <= 1e-12
        && (r.stated_bound - 1.2).abs() <= 1e-12
        && r.stated_bound_holds;
    let single = rescale_generators(&HolonomyPresentation::from_lengths(vec![1.0]).unwrap(), 10).unwrap();
    let single_ok =
        single.new_lengths == [10.0, 11.0] && (single.ratio - 1.1).abs() <= 1e-12 && single.stated_bound_holds;
    let degenerate = {
        let e = entropy_bounds(&HolonomyPresentation::from_lengths(vec![2.0, 2.0]).unwrap(), 0.5).unwrap();
        e.lower == e.upper && (e.lower - 0.25).abs() <= 1e-12
    };
    let zero = entropy_bounds(&p12, 0.0).unwrap();
    let zero_ok = zero.lower == 0.0 && zero.upper == 0.0;
    let trend = rescale_trend(&p12, &[10, 100, 1000]).unwrap();
    let ratios: Vec<f64> = trend.reports.iter().map(|r| r.ratio).collect();
    outcome(
        "bundle sandwich and rescaling arithmetic, ratio -> 1",
        sandwich && rescale && single_ok && degenerate && zero_ok && trend.toward_one,
        format!(
            "[{}, {}], ratio {} (bound {}), single {}, trend {ratios:?}",
            b.lower, b.upper, r.ratio, r.stated_bound, single.ratio
        ),
        json!([b.lower, b.upper, r.ratio, single.ratio, ratios]),
    )
}

fn run_all(timed: bool, print: bool) -> Vec<Outcome> {
    let criteria: Vec<Box<dyn Fn() -> Outcome>> = vec![
        Box::new(move || criterion_1(timed)),
        Box::new(criterion_2),
        Box::new(criterion_3),
        Box::new(criterion_4),
        Box::new(criterion_5),
        Box::new(criterion_6),
        Box::new(criterion_7),
        Box::new(criterion_8),
        Box::new(criterion_9),
    ];
    criteria
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let t = Instant::now();
            let o = c();
            if print {
                println!(
                    "criterion {}: {} - {} ({}) [{:.1}s]",
                    i + 1,
                    if o.pass { "PASS" } else { "FAIL" },
                    o.name,
                    o.detail,
                    t.elapsed().as_secs_f64()
                );
            }
            o
        })
        .collect()
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

fn main() -> ExitCode {
    let first = pool(8).install(|| run_all(true, true));
    let single = pool(1).install(|| run_all(false, false));
    let again = pool(8).install(|| run_all(false, false));
    let prints = |v: &[Outcome]| v.iter().map(|o| o.fingerprint.clone()).collect::<Vec<_>>();
    let (a, b, c) = (prints(&first), prints(&single), prints(&again));
    let differing: Vec<usize> = (0..a.len())
        .filter(|&i| a[i] != b[i] || a[i] != c[i])
        .map(|i| i + 1)
        .collect();
    let deterministic = differing.is_empty();
    println!(
        "criterion 10: {} - outputs identical across 1 and 8 workers and repeated runs ({})",
        if deterministic { "PASS" } else { "FAIL" },
        if deterministic {
            "criteria 1-9 byte-identical".to_string()
        } else {
            format!("differing criteria {differing:?}")
        }
    );
    let failed = first.iter().filter(|o| !o.pass).count() + usize::from(!deterministic);
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
