//! Invariant suites behind `verify`. Every check reports a margin that is
//! nonnegative exactly when it holds.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use pseudorbit::gallery::{build_gallery, check_branch_growth, gap_experiment, n_eps_alpha, GalleryName};
use pseudorbit::orbits::{exact_orbit, perturbed_orbit, verify_pseudo_orbit, PseudoOrbit};
use pseudorbit::pseudogroup::{evaluate, GeneratingSet, Letter, Word};
use pseudorbit::rng::{derive_seed, unit};
use pseudorbit::ymetric::{d0, shift_lipschitz_check, PoolMetric};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Metrics,
    Orbits,
    Section6,
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub ok: bool,
    pub margin: f64,
    pub detail: String,
}

fn check(suite: &'static str, name: impl Into<String>, margin: f64, detail: String) -> Check {
    Check {
        suite,
        name: name.into(),
        ok: margin >= 0.0,
        margin,
        detail,
    }
}

/// Uniform draw number `k` of the stream `seed`.
fn draw(seed: u64, k: u64) -> f64 {
    unit(seed, derive_seed(seed, k))
}

fn pool(g: &Arc<GeneratingSet>, size: usize, alpha: f64, seed: u64) -> Vec<PseudoOrbit> {
    (0..size)
        .map(|i| {
            let x = g.space().reduce(draw(seed, i as u64));
            perturbed_orbit(
                g,
                g.space().point(x).expect("reduced"),
                alpha,
                derive_seed(seed, i as u64),
            )
            .expect("valid alpha")
        })
        .collect()
}

pub fn metrics(seed: u64) -> Vec<Check> {
    const S: &str = "metrics";
    let g = build_gallery(&GalleryName::Section6).expect("gallery").gens;
    let orbits = pool(&g, 30, 1e-3, seed);
    let k = 8;
    let pm = PoolMetric::new(&orbits, k);
    let mut out = vec![check(
        S,
        "d0 symmetry",
        if pm.is_symmetric() { 0.0 } else { -1.0 },
        format!("{} orbits, K = {k}, bitwise", orbits.len()),
    )];
    let excess = pm.triangle_excess();
    out.push(check(
        S,
        "d0 triangle inequality within tail",
        pm.tail() - excess,
        format!("worst excess {excess:.3e}, tail {:.3e}", pm.tail()),
    ));
    let self_d1 = (0..pm.len()).map(|i| pm.d1_upper(i, i).lower).fold(0.0, f64::max);
    out.push(check(
        S,
        "d1_upper(x, x) = 0",
        0.0 - self_d1,
        format!("largest {self_d1}"),
    ));

    let mut worst = f64::INFINITY;
    let mut tested = 0;
    for t in 0..200u64 {
        let i = (draw(seed ^ 0x51, 2 * t) * orbits.len() as f64) as usize;
        let j = (draw(seed ^ 0x51, 2 * t + 1) * orbits.len() as f64) as usize;
        let len = 1 + (draw(seed ^ 0x52, t) * 5.0) as usize;
        let letters: Vec<Letter> = (0..len)
            .map(|s| 1 + (draw(seed ^ 0x53, t * 8 + s as u64) * 4.0) as Letter)
            .collect();
        let g0 = Word::from_applied(letters).reduce(&g);
        if let Ok(r) = shift_lipschitz_check(&orbits[i], &orbits[j], &g0, 6) {
            worst = worst.min(r.bound - r.shifted.lower);
            tested += 1;
        }
    }
    out.push(check(
        S,
        "shift bound d0(sx, sy) <= 2^n d0(x, y)",
        worst,
        format!("{tested} pairs, |g| <= 5, K = 6"),
    ));

    let mut mono = f64::INFINITY;
    for i in 0..10 {
        let (x, y) = (&orbits[i], &orbits[i + 10]);
        let mut prev = d0(x, y, 1);
        for k in 2..=8 {
            let cur = d0(x, y, k);
            mono = mono.min(cur.lower - prev.lower).min(prev.upper() - cur.upper());
            prev = cur;
        }
    }
    out.push(check(
        S,
        "truncation monotone (lower up, upper down)",
        mono + 1e-15,
        "10 pairs, K = 1..8".into(),
    ));
    out
}

pub fn orbits(seed: u64) -> Vec<Check> {
    const S: &str = "orbits";
    let mut out = Vec::new();
    for name in [GalleryName::Dyadic, GalleryName::Section6] {
        let g = build_gallery(&name).expect("gallery").gens;
        let alpha = 1e-3;
        let members = pool(&g, 20, alpha, seed);
        let worst = members
            .iter()
            .map(|o| verify_pseudo_orbit(o, 5))
            .map(|r| if r.ok { r.max_deviation } else { f64::INFINITY })
            .fold(0.0, f64::max);
        out.push(check(
            S,
            format!("{name}: edges within alpha and domain closure"),
            alpha - worst,
            format!("20 orbits, depth 5, largest deviation {worst:.3e}"),
        ));
        let exact = exact_orbit(&g, g.space().point(0.3).expect("in space"));
        let dev = verify_pseudo_orbit(&exact, 6).max_deviation;
        out.push(check(
            S,
            format!("{name}: exact orbit has zero deviation"),
            0.0 - dev,
            format!("{dev}"),
        ));

        let replay_ok = members.iter().all(|o| {
            let rec = o.record(4);
            let text = serde_json::to_string(&rec).expect("serialisable");
            serde_json::from_str(&text)
                .ok()
                .and_then(|back| PseudoOrbit::replay(g.clone(), &back).ok())
                .is_some_and(|again| again.record(4) == rec)
        });
        out.push(check(
            S,
            format!("{name}: record replay bit for bit"),
            if replay_ok { 0.0 } else { -1.0 },
            "20 orbits, depth 4".into(),
        ));
    }

    let g = build_gallery(&GalleryName::Dyadic).expect("gallery").gens;
    let mut worst: f64 = 0.0;
    for t in 0..500u64 {
        let len = (draw(seed ^ 0x61, t) * 10.0) as usize;
        let letters: Vec<Letter> = (0..len)
            .map(|s| (draw(seed ^ 0x62, t * 16 + s as u64) * g.len() as f64) as Letter)
            .collect();
        let w = Word::from_applied(letters);
        let p = g.space().point(draw(seed ^ 0x63, t)).expect("in space");
        if let (Some(a), Some(b)) = (evaluate(&g, &w, p), evaluate(&g, &w.reduce(&g), p)) {
            worst = worst.max((a.coord() - b.coord()).abs());
        }
    }
    out.push(check(
        S,
        "dyadic: reduction preserves exact values",
        1e-9 - worst,
        format!("500 random words, largest difference {worst:.3e}"),
    ));
    out
}

pub fn section6(seed: u64) -> Vec<Check> {
    const S: &str = "section6";
    let sys = build_gallery(&GalleryName::Section6).expect("gallery");
    let pair = sys.pair.expect("section6 carries its pair");
    let mut out: Vec<Check> = pair
        .hypotheses
        .iter()
        .map(|h| check(S, format!("hypothesis: {}", h.name), h.margin, h.detail.clone()))
        .collect();

    let (eps, alpha) = (0.1, 1e-3);
    let n_ea = n_eps_alpha(eps, alpha, pair.delta).expect("valid eps, alpha");
    let mut by_level: BTreeMap<usize, usize> = BTreeMap::new();
    let mut eps_failures = 0;
    let mut failing = 0;
    let branches = 200u64;
    for t in 0..branches {
        let x = sys.space.point(draw(seed ^ 0x71, t)).expect("in space");
        let len = (draw(seed ^ 0x72, t) * 7.0) as usize;
        let g = Word::from_applied(
            (0..len)
                .map(|s| {
                    if draw(seed ^ 0x73, t * 8 + s as u64) < 0.5 {
                        pair.f0
                    } else {
                        pair.f1
                    }
                })
                .collect(),
        );
        let xt = pair.adversarial_pseudo_orbit(x, &g, alpha).expect("alpha below alpha0");
        let r = check_branch_growth(&pair, &xt, n_ea + 1, eps).expect("branch exists");
        for &j in &r.violations {
            *by_level.entry(j).or_default() += 1;
        }
        eps_failures += r.eps_violations.len();
        failing += usize::from(!r.ok());
    }
    out.push(check(
        S,
        "branch deviation >= alpha (1+delta)^j",
        0.0 - failing as f64,
        format!(
            "{branches} branches, delta = {:.4}, violations by level {by_level:?}",
            pair.delta
        ),
    ));
    out.push(check(
        S,
        "branch deviation >= eps past n(eps, alpha)",
        0.0 - eps_failures as f64,
        format!("n(eps, alpha) = {n_ea}, {eps_failures} failures"),
    ));

    for n in 1..=4 {
        match gap_experiment(&pair, n, eps, alpha, 2048) {
            Ok(r) => out.push(check(
                S,
                format!("#A_alpha = 2^n #A and N_alpha >= 2^n N at n = {n}"),
                if r.identity_holds { r.inequality_margin } else { -1.0 },
                format!(
                    "#A = {}, #A_alpha = {}, depth {}",
                    r.base_count, r.pseudo_count, r.depth
                ),
            )),
            Err(e) => out.push(check(S, format!("#A_alpha identity at n = {n}"), -1.0, e.to_string())),
        }
    }
    out
}

pub fn run(suite: Suite, seed: u64) -> Vec<Check> {
    match suite {
        Suite::Metrics => metrics(seed),
        Suite::Orbits => orbits(seed),
        Suite::Section6 => section6(seed),
        Suite::All => {
            let mut all = metrics(seed);
            all.extend(orbits(seed));
            all.extend(section6(seed));
            all
        }
    }
}
