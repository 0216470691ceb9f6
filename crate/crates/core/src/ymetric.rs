//! The weighted-sup metric `d₀` on pseudo-orbit space, its pool-restricted
//! chain relaxation `d₁`, truncation control and the shift estimate.
//!
//! `d₀(x, y) = Σ_k 2^{-k} M_k` where `M_k` is the largest `d(x(g), y(g))`
//! over reduced words of length at most `k` in both domains (0 when there
//! are none). The series is truncated at `K`; the neglected part is at most
//! `2^{-K}·diam X`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::orbits::{OrbitTree, PseudoOrbit};
use crate::pseudogroup::{Letter, Word};

/// Truncation depth used when no `ε` is in scope.
pub const DEFAULT_DEPTH: usize = 12;

/// `l(ε)`: the least `l` with `2^{-l} < ε / (2·diam X)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationDepth {
    pub l_eps: usize,
    pub eps: f64,
}

impl TruncationDepth {
    pub fn new(eps: f64, diameter: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(invalid("eps", format!("must be a positive real, got {eps}")));
        }
        let target = eps / (2.0 * diameter);
        let mut l = 0usize;
        while 0.5f64.powi(l as i32) >= target {
            l += 1;
        }
        Ok(TruncationDepth { l_eps: l, eps })
    }
}

/// The true value lies in `[lower, lower + tail]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub lower: f64,
    pub tail: f64,
    #[serde(rename = "K")]
    pub k: usize,
}

impl MetricValue {
    pub fn upper(&self) -> f64 {
        self.lower + self.tail
    }
}

pub fn tail_bound(k: usize, diameter: f64) -> f64 {
    0.5f64.powi(k as i32) * diameter
}

/// Per-level maxima `m[k] = max d(x(g), y(g))` over common-domain reduced
/// words of length exactly `k` (0 if none), `k = 0..=depth`.
pub fn level_maxima<X: OrbitTree, Y: OrbitTree>(x: &X, y: &Y, depth: usize) -> Vec<f64> {
    let mut m = vec![0.0; depth + 1];
    fn walk<X: OrbitTree, Y: OrbitTree>(
        x: &X,
        y: &Y,
        nx: &X::Node,
        ny: &Y::Node,
        last: Option<Letter>,
        level: usize,
        m: &mut [f64],
    ) {
        let space = x.gens().space();
        let d = space.dist(x.value(nx), y.value(ny));
        if d > m[level] {
            m[level] = d;
        }
        if level + 1 == m.len() {
            return;
        }
        let gens = x.gens();
        for h in 0..gens.len() as Letter {
            if !gens.reduced_successor(last, h) {
                continue;
            }
            if let (Some(cx), Some(cy)) = (x.child(nx, h), y.child(ny, h)) {
                walk(x, y, &cx, &cy, Some(h), level + 1, m);
            }
        }
    }
    walk(x, y, &x.root(), &y.root(), x.root_last(), 0, &mut m);
    m
}

/// Truncated `d₀` from per-level maxima (cumulative max, geometric weights).
pub fn d0_from_levels(levels: &[f64], diameter: f64) -> MetricValue {
    let mut running: f64 = 0.0;
    let mut lower = 0.0;
    let mut weight = 1.0;
    for &m in levels {
        running = running.max(m);
        lower += weight * running;
        weight *= 0.5;
    }
    let k = levels.len().saturating_sub(1);
    MetricValue {
        lower,
        tail: tail_bound(k, diameter),
        k,
    }
}

/// `d₀(x, y)` truncated at `K`.
pub fn d0<X: OrbitTree, Y: OrbitTree>(x: &X, y: &Y, k: usize) -> MetricValue {
    let levels = level_maxima(x, y, k);
    d0_from_levels(&levels, x.gens().space().diameter())
}

/// All pairwise `d₀` lower values of a pool, plus the chain relaxation.
#[derive(Clone, Debug)]
pub struct PoolMetric {
    k: usize,
    tail: f64,
    d0: Vec<Vec<f64>>,
    /// Shortest-path length and hop count between members.
    paths: Vec<Vec<(f64, u32)>>,
}

impl PoolMetric {
    // Floyd-Warshall over index pairs reads best with explicit indices.
    #[allow(clippy::needless_range_loop)]
    pub fn new(orbits: &[PseudoOrbit], k: usize) -> Self {
        let n = orbits.len();
        let diameter = orbits.first().map(|o| o.gens_arc().space().diameter()).unwrap_or(1.0);
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if j > i {
                            d0(&orbits[i], &orbits[j], k).lower
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let mut d0m = rows;
        for i in 0..n {
            for j in 0..i {
                d0m[i][j] = d0m[j][i];
            }
        }
        let mut paths: Vec<Vec<(f64, u32)>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { (0.0, 0) } else { (d0m[i][j], 1) }).collect())
            .collect();
        for m in 0..n {
            for i in 0..n {
                let (dim, him) = paths[i][m];
                for j in 0..n {
                    let (dmj, hmj) = paths[m][j];
                    let cand = (dim + dmj, him + hmj);
                    let cur = paths[i][j];
                    if cand.0 < cur.0 || (cand.0 == cur.0 && cand.1 < cur.1) {
                        paths[i][j] = cand;
                    }
                }
            }
        }
        PoolMetric {
            k,
            tail: tail_bound(k, diameter),
            d0: d0m,
            paths,
        }
    }

    pub fn len(&self) -> usize {
        self.d0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d0.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn d0(&self, i: usize, j: usize) -> MetricValue {
        MetricValue {
            lower: self.d0[i][j],
            tail: self.tail,
            k: self.k,
        }
    }

    /// Upper bound for `d₁(x_i, x_j)`: the cheapest chain through the pool,
    /// with one truncation tail per hop.
    pub fn d1_upper(&self, i: usize, j: usize) -> MetricValue {
        let (len, hops) = self.paths[i][j];
        MetricValue {
            lower: len,
            tail: hops as f64 * self.tail,
            k: self.k,
        }
    }

    /// Triples `(i, j, l)` with `d₀(i, l) > d₀(i, j) + d₀(j, l) + tail`.
    pub fn triangle_violations(&self) -> Vec<(usize, usize, usize)> {
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    if self.d0[i][l] > self.d0[i][j] + self.d0[j][l] + self.tail {
                        out.push((i, j, l));
                    }
                }
            }
        }
        out
    }

    /// Largest `d₀(i, l) − d₀(i, j) − d₀(j, l)` over all triples.
    pub fn triangle_excess(&self) -> f64 {
        let n = self.len();
        let mut worst = f64::NEG_INFINITY;
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    worst = worst.max(self.d0[i][l] - self.d0[i][j] - self.d0[j][l]);
                }
            }
        }
        worst
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| (0..n).all(|j| self.d0[i][j].to_bits() == self.d0[j][i].to_bits()))
    }
}

/// `d₁` restricted to chains through `pool`, between members `i` and `j`.
pub fn d1_upper(pool: &[PseudoOrbit], i: usize, j: usize, k: usize) -> MetricValue {
    PoolMetric::new(pool, k).d1_upper(i, j)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShiftReport {
    pub n: usize,
    pub shifted: MetricValue,
    pub original: MetricValue,
    /// `2ⁿ·(lower + tail) + 1e-9`.
    pub bound: f64,
    pub holds: bool,
}

/// Checks `d₀(σ_{g0}x, σ_{g0}y) ≤ 2ⁿ·d₀(x, y)` at truncation `K`, with the
/// right side widened by its tail. Shifted orbits continue only along words
/// that do not cancel against `g0`.
pub fn shift_lipschitz_check(x: &PseudoOrbit, y: &PseudoOrbit, g0: &Word, k: usize) -> Result<ShiftReport> {
    let sx = x.shift(g0)?;
    let sy = y.shift(g0)?;
    let shifted = d0(&sx, &sy, k);
    let original = d0(x, y, k);
    let n = g0.len();
    let bound = 2f64.powi(n as i32) * original.upper() + 1e-9;
    Ok(ShiftReport {
        n,
        shifted,
        original,
        bound,
        holds: shifted.lower <= bound,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetReport {
    pub radius: f64,
    pub k: usize,
    pub pool: usize,
    pub centers: Vec<usize>,
}

/// Greedy `d₀`-net of the given radius (upper values), in pool order.
pub fn greedy_net(orbits: &[PseudoOrbit], k: usize, radius: f64) -> NetReport {
    let mut centers: Vec<usize> = Vec::new();
    for (i, o) in orbits.iter().enumerate() {
        let covered = centers.iter().any(|&c| d0(&orbits[c], o, k).upper() <= radius);
        if !covered {
            centers.push(i);
        }
    }
    NetReport {
        radius,
        k,
        pool: orbits.len(),
        centers,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::{build_gallery, GalleryName};
    use crate::orbits::{exact_orbit, perturbed_orbit};
    use crate::pseudogroup::{enumerate_words, EnumerationMode, GeneratingSet, LocalMap};
    use crate::space::CompactSpace;
    use std::sync::Arc;

    #[test]
    fn truncation_depth() {
        // 2^-l < eps / (2 diam): circle diam 1/2 => 2^-l < eps
        let t = TruncationDepth::new(0.1, 0.5).unwrap();
        assert_eq!(t.l_eps, 4);
        let t = TruncationDepth::new(0.125, 0.5).unwrap();
        assert_eq!(t.l_eps, 4);
        let t = TruncationDepth::new(0.25, 1.0).unwrap();
        assert_eq!(t.l_eps, 4);
        assert!(TruncationDepth::new(0.0, 1.0).is_err());
    }

    #[test]
    fn identity_only_geometric_series() {
        let g = Arc::new(GeneratingSet::new(CompactSpace::CIRCLE, vec![LocalMap::identity(0)]).unwrap());
        let sp = g.space();
        let x = exact_orbit(&g, sp.point(0.3).unwrap());
        let y = exact_orbit(&g, sp.point(0.4).unwrap());
        for k in [0, 1, 5, 12, 30] {
            let v = d0(&x, &y, k);
            assert!(v.lower <= 0.2 + 1e-15 && 0.2 <= v.upper() + 1e-15, "{v:?}");
        }
        assert_eq!(d0(&x, &x, 12).lower, 0.0);
    }

    #[test]
    fn monotone_in_truncation() {
        let g = build_gallery(&GalleryName::Dyadic).unwrap().gens;
        let sp = g.space();
        let x = perturbed_orbit(&g, sp.point(0.21).unwrap(), 1e-3, 1).unwrap();
        let y = perturbed_orbit(&g, sp.point(0.26).unwrap(), 1e-3, 2).unwrap();
        let mut prev = d0(&x, &y, 0);
        for k in 1..=10 {
            let v = d0(&x, &y, k);
            assert!(v.lower >= prev.lower);
            assert!(v.upper() <= prev.upper() + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn pool_chains() {
        let g = build_gallery(&GalleryName::Section6).unwrap().gens;
        let sp = g.space();
        let orbits: Vec<_> = [0.1, 0.12, 0.3, 0.55]
            .iter()
            .enumerate()
            .map(|(i, &c)| perturbed_orbit(&g, sp.point(c).unwrap(), 1e-3, i as u64).unwrap())
            .collect();
        let two = PoolMetric::new(&orbits[..2], 5);
        assert_eq!(two.d1_upper(0, 1).lower, two.d0(0, 1).lower);
        let all = PoolMetric::new(&orbits, 5);
        assert!(all.d1_upper(0, 1).lower <= two.d1_upper(0, 1).lower);
        assert_eq!(all.d1_upper(2, 2).lower, 0.0);
        assert!(all.is_symmetric());
        for i in 0..4 {
            for j in 0..4 {
                assert!(all.d1_upper(i, j).lower <= all.d0(i, j).lower);
            }
        }
    }

    #[test]
    fn shift_bound_examples() {
        let g = build_gallery(&GalleryName::Dyadic).unwrap().gens;
        let sp = g.space();
        let x = perturbed_orbit(&g, sp.point(0.11).unwrap(), 1e-4, 5).unwrap();
        let y = perturbed_orbit(&g, sp.point(0.13).unwrap(), 1e-4, 6).unwrap();
        let r = shift_lipschitz_check(&x, &y, &Word::empty(), 8).unwrap();
        assert!(r.holds);
        let g0 = Word::from_applied(vec![1, 1, 3]);
        let r = shift_lipschitz_check(&x, &y, &g0, 8).unwrap();
        assert!(r.holds, "{r:?}");
        let r = shift_lipschitz_check(&x, &x, &g0, 8).unwrap();
        assert_eq!(r.shifted.lower, 0.0);
        assert_eq!(r.original.lower, 0.0);
    }

    #[test]
    fn positivity_on_distinct_members() {
        let g = build_gallery(&GalleryName::Dyadic).unwrap().gens;
        let sp = g.space();
        let orbits: Vec<_> = (0..6)
            .map(|i| perturbed_orbit(&g, sp.point(0.3).unwrap(), 1e-3, i).unwrap())
            .collect();
        let m = PoolMetric::new(&orbits, 6);
        for i in 0..6 {
            for j in 0..6 {
                if i == j {
                    continue;
                }
                let differs = enumerate_words(&g, 6, EnumerationMode::Reduced)
                    .any(|w| orbits[i].value_at(&w) != orbits[j].value_at(&w));
                if differs {
                    assert!(m.d1_upper(i, j).lower > 0.0);
                }
            }
        }
    }
}
