//! Built-in systems and the Morse–Smale pair on the circle.
//!
//! The pair is generated by two piecewise-linear circle homeomorphisms, each
//! with one source and one sink half a turn apart. Around the source the
//! slope is constant `λ > 1`; on the complementary arc around the sink a
//! single slope `s < 1` closes the map up. Every hypothesis of the
//! construction is re-measured on a grid when the pair is built.
//!
//! The adversarial pseudo-orbits `x̃_g` agree with the exact orbit of `x`
//! except along one branch of the word tree, which starts after `g` and
//! always takes the generator that expands near the current value, adding
//! `+α` along the circle orientation at each step.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::orbits::{adversarial_orbit, AdversarialSpec, Arc0, OrbitTree, PseudoOrbit};
use crate::pseudogroup::{GeneratingSet, Letter, LocalMap, Rule, Span, Word};
use crate::separation::{
    count_points, lsq_slope, max_separated_set, separated, EntropyRow, PoolBuilder, SeparationParams,
};
use crate::space::{CompactSpace, Point, SpaceKind};

/// Grid size of the hypothesis suite.
pub const HYPOTHESIS_GRID: usize = 10_000;
/// Largest `n` for which same-base pairs are checked against every branch.
pub const EXHAUSTIVE_LIMIT: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GalleryName {
    Identity,
    Rotation(f64),
    Dyadic,
    Section6,
}

impl FromStr for GalleryName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.strip_prefix("gallery:").unwrap_or(s);
        match s {
            "identity" => Ok(GalleryName::Identity),
            "dyadic" => Ok(GalleryName::Dyadic),
            "section6" => Ok(GalleryName::Section6),
            _ => {
                let theta = s
                    .strip_prefix("rotation:")
                    .and_then(|t| t.parse::<f64>().ok())
                    .ok_or_else(|| Error::UnknownSystem(s.to_string()))?;
                Ok(GalleryName::Rotation(theta))
            }
        }
    }
}

impl fmt::Display for GalleryName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GalleryName::Identity => write!(f, "identity"),
            GalleryName::Rotation(t) => write!(f, "rotation:{t}"),
            GalleryName::Dyadic => write!(f, "dyadic"),
            GalleryName::Section6 => write!(f, "section6"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GallerySystem {
    pub name: GalleryName,
    pub space: CompactSpace,
    pub gens: Arc<GeneratingSet>,
    pub pair: Option<MorseSmalePair>,
}

pub fn build_gallery(name: &GalleryName) -> Result<GallerySystem> {
    let (space, gens, pair) = match *name {
        GalleryName::Identity => {
            let space = CompactSpace::CIRCLE;
            (
                space,
                Arc::new(GeneratingSet::new(space, vec![LocalMap::identity(0)])?),
                None,
            )
        }
        GalleryName::Rotation(theta) => {
            if !(theta > 0.0 && theta < 1.0) {
                return Err(invalid(
                    "theta",
                    format!("rotation angle must lie in (0, 1), got {theta}"),
                ));
            }
            let space = CompactSpace::CIRCLE;
            let maps = vec![
                LocalMap::identity(0),
                LocalMap::single(
                    1,
                    "a",
                    Span::full(),
                    Rule::Affine {
                        slope: 1.0,
                        offset: theta,
                    },
                    1.0,
                    2,
                ),
                LocalMap::single(
                    2,
                    "a^-1",
                    Span::full(),
                    Rule::Affine {
                        slope: 1.0,
                        offset: -theta,
                    },
                    1.0,
                    1,
                ),
            ];
            (space, Arc::new(GeneratingSet::new(space, maps)?), None)
        }
        GalleryName::Dyadic => {
            let space = CompactSpace::INTERVAL;
            let maps = vec![
                LocalMap::identity(0),
                LocalMap::single(
                    1,
                    "g1",
                    Span::new(0.0, 0.5),
                    Rule::Affine {
                        slope: 2.0,
                        offset: 0.0,
                    },
                    2.0,
                    3,
                ),
                LocalMap::single(
                    2,
                    "g2",
                    Span::new(0.5, 1.0),
                    Rule::Affine {
                        slope: 2.0,
                        offset: -1.0,
                    },
                    2.0,
                    4,
                ),
                LocalMap::single(
                    3,
                    "g1^-1",
                    Span::full(),
                    Rule::Affine {
                        slope: 0.5,
                        offset: 0.0,
                    },
                    0.5,
                    1,
                ),
                LocalMap::single(
                    4,
                    "g2^-1",
                    Span::full(),
                    Rule::Affine {
                        slope: 0.5,
                        offset: 0.5,
                    },
                    0.5,
                    2,
                ),
            ];
            (space, Arc::new(GeneratingSet::new(space, maps)?), None)
        }
        GalleryName::Section6 => {
            let pair = MorseSmalePair::build(&MorseSmaleParams::default())?;
            (CompactSpace::CIRCLE, pair.gens.clone(), Some(pair))
        }
    };
    Ok(GallerySystem {
        name: name.clone(),
        space,
        gens,
        pair,
    })
}

/// Shape of a Morse–Smale pair of plateau maps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorseSmaleParams {
    pub p0: f64,
    pub p1: f64,
    /// Slope on the expanding arc around each source.
    pub slope: f64,
    /// Radius of the expanding arc.
    pub radius: f64,
    pub alpha0: f64,
    /// `U_i` is the closed arc of this radius around `p_i`.
    pub u_radius: f64,
}

impl Default for MorseSmaleParams {
    fn default() -> Self {
        MorseSmaleParams {
            p0: 0.0,
            p1: 0.45,
            slope: 1.22,
            radius: 0.4,
            alpha0: 0.12,
            u_radius: 0.28,
        }
    }
}

/// One measured hypothesis. `margin ≥ 0` iff it holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub ok: bool,
    pub margin: f64,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct MorseSmalePair {
    pub gens: Arc<GeneratingSet>,
    pub params: MorseSmaleParams,
    pub f0: Letter,
    pub f1: Letter,
    pub f0_inv: Letter,
    pub f1_inv: Letter,
    pub p0: f64,
    pub q0: f64,
    pub p1: f64,
    pub q1: f64,
    /// Measured: least secant slope of `f_i` on the `α₀`-neighbourhood of
    /// `U_i`, minus one.
    pub delta: f64,
    pub alpha0: f64,
    pub u0: Arc0,
    pub u1: Arc0,
    pub hypotheses: Vec<HypothesisCheck>,
}

impl MorseSmalePair {
    /// Builds the generating set `{e, f0, f1, f0⁻¹, f1⁻¹}` and runs the
    /// hypothesis suite; any failure aborts naming the violated condition.
    pub fn build(params: &MorseSmaleParams) -> Result<Self> {
        let space = CompactSpace::CIRCLE;
        let plateau = |source: f64, inverted: bool| Rule::Plateau {
            source,
            radius: params.radius,
            slope: params.slope,
            inverted,
        };
        let s = Rule::plateau_contraction(params.radius, params.slope);
        if !(s > 0.0) {
            return Err(Error::Hypothesis(format!(
                "plateau slope {} over radius {} leaves no room for the contracting arc",
                params.slope, params.radius
            )));
        }
        let lip = params.slope.max(s);
        let lip_inv = (1.0 / params.slope).max(1.0 / s);
        let maps = vec![
            LocalMap::identity(0),
            LocalMap::single(1, "f0", Span::full(), plateau(params.p0, false), lip, 3),
            LocalMap::single(2, "f1", Span::full(), plateau(params.p1, false), lip, 4),
            LocalMap::single(3, "f0^-1", Span::full(), plateau(params.p0, true), lip_inv, 1),
            LocalMap::single(4, "f1^-1", Span::full(), plateau(params.p1, true), lip_inv, 2),
        ];
        let gens = Arc::new(GeneratingSet::new(space, maps)?);
        let letter = |id| gens.letter_of(id).expect("declared above");
        let mut pair = MorseSmalePair {
            f0: letter(1),
            f1: letter(2),
            f0_inv: letter(3),
            f1_inv: letter(4),
            p0: space.reduce(params.p0),
            q0: space.reduce(params.p0 + 0.5),
            p1: space.reduce(params.p1),
            q1: space.reduce(params.p1 + 0.5),
            delta: 0.0,
            alpha0: params.alpha0,
            u0: Arc0 {
                center: space.reduce(params.p0),
                radius: params.u_radius,
            },
            u1: Arc0 {
                center: space.reduce(params.p1),
                radius: params.u_radius,
            },
            hypotheses: Vec::new(),
            params: params.clone(),
            gens,
        };
        pair.hypotheses = pair.hypothesis_suite(HYPOTHESIS_GRID);
        pair.delta = pair
            .hypotheses
            .iter()
            .filter(|h| h.name.starts_with("expansion"))
            .map(|h| h.margin)
            .fold(f64::INFINITY, f64::min);
        if let Some(bad) = pair.hypotheses.iter().find(|h| !h.ok) {
            return Err(Error::Hypothesis(format!("{}: {}", bad.name, bad.detail)));
        }
        Ok(pair)
    }

    fn map_value(&self, h: Letter, t: f64) -> f64 {
        self.gens.apply(h, t).expect("full-domain map")
    }

    /// Fixed-point count and type, disjointness, expansion on the
    /// `α₀`-neighbourhood of each `U_i`, and the cover `U₀ ∪ U₁ = S¹`, all
    /// measured on a grid of `cells` points.
    pub fn hypothesis_suite(&self, cells: usize) -> Vec<HypothesisCheck> {
        let space = self.gens.space();
        let grid: Vec<f64> = (0..cells).map(|k| k as f64 / cells as f64).collect();
        let step = 1.0 / cells as f64;
        let mut out = Vec::new();
        for (i, (f, p, q, u)) in [
            (self.f0, self.p0, self.q0, self.u0),
            (self.f1, self.p1, self.q1, self.u1),
        ]
        .into_iter()
        .enumerate()
        {
            // signed displacement in (-1/2, 1/2]
            let disp = |t: f64| {
                let d = space.displacement(t, self.map_value(f, t));
                if d > 0.5 {
                    d - 1.0
                } else {
                    d
                }
            };
            let vals: Vec<f64> = grid.iter().map(|&t| disp(t)).collect();
            let mut fixed = Vec::new();
            for k in 0..cells {
                let (a, b) = (vals[k], vals[(k + 1) % cells]);
                if a.abs() <= 1e-12 {
                    fixed.push(grid[k]);
                } else if b.abs() > 1e-12 && a * b < 0.0 {
                    fixed.push(grid[k] + 0.5 * step);
                }
            }
            let near = |x: f64, y: f64| space.dist(x, y) <= step;
            let located = fixed.len() == 2 && fixed.iter().any(|&x| near(x, p)) && fixed.iter().any(|&x| near(x, q));
            out.push(HypothesisCheck {
                name: format!("fixed points f{i}"),
                ok: located,
                margin: if located { 0.0 } else { -1.0 },
                detail: format!("found {fixed:?}, declared source {p} and sink {q}"),
            });
            let secant =
                |t: f64| space.displacement(self.map_value(f, t), self.map_value(f, space.reduce(t + step))) / step;
            let (sp, sq) = (secant(p), secant(q));
            let typed = sp > 1.0 && sq < 1.0;
            out.push(HypothesisCheck {
                name: format!("source/sink f{i}"),
                ok: typed,
                margin: (sp - 1.0).min(1.0 - sq),
                detail: format!("slope {sp} at source, {sq} at sink"),
            });
            // consecutive grid points both inside the closed neighbourhood
            let reach = u.radius + self.alpha0;
            let mut least = f64::INFINITY;
            for k in 0..cells {
                let (a, b) = (grid[k], grid[(k + 1) % cells]);
                if space.dist(a, u.center) <= reach && space.dist(b, u.center) <= reach {
                    least = least.min(secant(a));
                }
            }
            out.push(HypothesisCheck {
                name: format!("expansion f{i}"),
                ok: least > 1.0,
                margin: least - 1.0,
                detail: format!("least slope {least} within {reach} of {}", u.center),
            });
        }
        let disjoint = [self.p0, self.q0]
            .iter()
            .flat_map(|&a| [self.p1, self.q1].map(|b| space.dist(a, b)))
            .fold(f64::INFINITY, f64::min);
        out.push(HypothesisCheck {
            name: "disjoint fixed points".into(),
            ok: disjoint > 0.0,
            margin: disjoint,
            detail: format!("least distance {disjoint}"),
        });
        let cover = grid
            .iter()
            .map(|&t| {
                (self.u0.radius - space.dist(t, self.u0.center)).max(self.u1.radius - space.dist(t, self.u1.center))
            })
            .fold(f64::INFINITY, f64::min);
        out.push(HypothesisCheck {
            name: "cover".into(),
            ok: cover >= 0.0,
            margin: cover,
            detail: format!("least inward margin {cover}"),
        });
        out
    }

    /// Data of `x̃_g`.
    pub fn spec(&self, g: &Word) -> Result<AdversarialSpec> {
        if g.applied().iter().any(|&h| h != self.f0 && h != self.f1) {
            return Err(invalid("g", "branch words must use f0 and f1 only"));
        }
        Ok(AdversarialSpec {
            branch: g.clone(),
            f0: self.f0,
            f1: self.f1,
            u0: self.u0,
        })
    }

    /// The adversarial pseudo-orbit `x̃_g`; requires `α ≤ α₀`.
    pub fn adversarial_pseudo_orbit(&self, x: Point, g: &Word, alpha: f64) -> Result<PseudoOrbit> {
        if alpha > self.alpha0 {
            return Err(invalid(
                "alpha",
                format!("must not exceed alpha0 = {}, got {alpha}", self.alpha0),
            ));
        }
        adversarial_orbit(&self.gens, x, alpha, self.spec(g)?)
    }

    /// Every word of length `n` over `{f0, f1}`, bit `i` of the index
    /// choosing the `i`-th applied letter.
    pub fn branch_words(&self, n: usize) -> Vec<Word> {
        (0..1u64 << n)
            .map(|bits| {
                Word::from_applied(
                    (0..n)
                        .map(|i| if bits >> i & 1 == 0 { self.f0 } else { self.f1 })
                        .collect(),
                )
            })
            .collect()
    }

    /// The distinguished branch of `x̃` continued `extra` steps past `g`:
    /// the full word `(h_extra, …, h_1, g)`.
    pub fn branch_word(&self, x: &PseudoOrbit, extra: usize) -> Result<Word> {
        let spec = match x.provenance() {
            crate::orbits::Provenance::Adversarial(s) => s,
            _ => return Err(invalid("x", "not an adversarial pseudo-orbit")),
        };
        let mut node = x
            .node_at(&spec.branch)
            .ok_or_else(|| Error::NotInDomain(format!("{}", spec.branch)))?;
        let mut letters = spec.branch.applied().to_vec();
        for _ in 0..extra {
            let h = if self.gens.space().dist(node.value, self.u0.center) <= self.u0.radius {
                self.f0
            } else {
                self.f1
            };
            node = x.child(&node, h).expect("full-domain map");
            letters.push(h);
        }
        Ok(Word::from_applied(letters))
    }
}

/// `n(ε, α) = ⌊log(ε/α) / log(1 + δ)⌋`.
pub fn n_eps_alpha(eps: f64, alpha: f64, delta: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha <= eps) || !eps.is_finite() {
        return Err(invalid(
            "alpha",
            format!("need 0 < alpha <= eps, got alpha = {alpha}, eps = {eps}"),
        ));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(invalid("delta", format!("must be positive, got {delta}")));
    }
    Ok(((eps / alpha).ln() / delta.ln_1p()).floor() as usize)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthStep {
    pub j: usize,
    pub deviation: f64,
    /// `α·(1 + δ)^j`.
    pub bound: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub alpha: f64,
    pub delta: f64,
    pub eps: f64,
    pub n_eps_alpha: usize,
    pub steps: Vec<GrowthStep>,
    /// Levels where the deviation falls below `α·(1 + δ)^j`.
    pub violations: Vec<usize>,
    /// Levels `j > n(ε, α)` where the deviation falls below `ε`.
    pub eps_violations: Vec<usize>,
    /// `α = 0`: every deviation vanishes and the check says nothing.
    pub vacuous: bool,
}

impl GrowthReport {
    pub fn ok(&self) -> bool {
        !self.vacuous && self.violations.is_empty() && self.eps_violations.is_empty()
    }
}

/// Compares the branch of `x̃` with the exact orbit along the same word at
/// each level `j ≤ depth`.
pub fn check_branch_growth(pair: &MorseSmalePair, x: &PseudoOrbit, depth: usize, eps: f64) -> Result<GrowthReport> {
    let alpha = x.alpha();
    let word = pair.branch_word(x, depth)?;
    let g_len = word.len() - depth;
    let space = pair.gens.space();
    let n_ea = if alpha > 0.0 && alpha <= eps {
        n_eps_alpha(eps, alpha, pair.delta)?
    } else {
        0
    };
    let mut node = x
        .node_at(&Word::from_applied(word.applied()[..g_len].to_vec()))
        .expect("on branch");
    let mut exact = node.value;
    let mut steps = Vec::new();
    let (mut violations, mut eps_violations) = (Vec::new(), Vec::new());
    for (j, &h) in word.applied()[g_len..].iter().enumerate() {
        let j = j + 1;
        node = x.child(&node, h).expect("full-domain map");
        exact = pair.map_value(h, exact);
        let deviation = space.dist(node.value, exact);
        let bound = alpha * (1.0 + pair.delta).powi(j as i32);
        let ok = deviation >= bound * (1.0 - 1e-12);
        if !ok {
            violations.push(j);
        }
        if j > n_ea && deviation < eps {
            eps_violations.push(j);
        }
        steps.push(GrowthStep {
            j,
            deviation,
            bound,
            ok,
        });
    }
    Ok(GrowthReport {
        alpha,
        delta: pair.delta,
        eps,
        n_eps_alpha: n_ea,
        steps,
        violations,
        eps_violations,
        vacuous: alpha == 0.0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub n: usize,
    pub eps: f64,
    pub alpha: f64,
    pub delta: f64,
    pub n_eps_alpha: usize,
    /// `n + n(ε, α) + 1`.
    pub depth: usize,
    /// `#A`, a greedy `(n, ε)`-separated set on the grid.
    pub base_count: u64,
    /// `#A_α`, certified pairwise strongly separated at `depth`.
    pub pseudo_count: u64,
    pub identity_holds: bool,
    /// `#A_α − 2ⁿ·N(n, ε)` with `N` the greedy lower bound `#A`.
    pub inequality_margin: f64,
    pub cross_pairs: u64,
    pub same_pairs: u64,
    pub min_cross_distance: f64,
    pub min_same_distance: f64,
    /// Same-base pairs were checked against every other branch.
    pub exhaustive: bool,
}

fn distinct(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<u64> = values.iter().map(|x| x.to_bits()).collect();
    v.sort_unstable();
    v.dedup();
    v.into_iter().map(f64::from_bits).collect()
}

/// Builds `A` and `A_α` and certifies pairwise strong separation of `A_α`
/// at depth `n + n(ε, α) + 1`: pairs with distinct bases through an exact
/// separating word of length `≤ n`, pairs sharing a base through the branch
/// word of one member.
pub fn gap_experiment(pair: &MorseSmalePair, n: usize, eps: f64, alpha: f64, cells: usize) -> Result<GapReport> {
    if !(alpha < pair.alpha0) {
        return Err(invalid("alpha", format!("must be below alpha0 = {}", pair.alpha0)));
    }
    let gens = &*pair.gens;
    let space = gens.space();
    let n_ea = n_eps_alpha(eps, alpha, pair.delta)?;
    let depth = n + n_ea + 1;
    let params = SeparationParams::new(n, eps)?;
    let base = max_separated_set(gens, &space.grid(cells), params);
    let words = pair.branch_words(n);
    let family: Vec<Vec<PseudoOrbit>> = base
        .iter()
        .map(|&x| {
            words
                .iter()
                .map(|g| pair.adversarial_pseudo_orbit(x, g, alpha))
                .collect()
        })
        .collect::<Result<_>>()?;
    let label = |a: usize, g: usize| format!("x={} g={}", base[a].coord(), words[g].describe(gens));

    // distinct bases
    let cross: Vec<(usize, usize)> = (0..base.len())
        .flat_map(|a| (a + 1..base.len()).map(move |b| (a, b)))
        .collect();
    let cross_results: Vec<Result<f64>> = cross
        .par_iter()
        .map(|&(a, b)| {
            let s = separated(gens, base[a], base[b], params);
            let w = s.witness.ok_or_else(|| Error::SeparationFailure {
                left: label(a, 0),
                right: label(b, 0),
                reason: "base points are not separated".into(),
            })?;
            let va: Vec<f64> = family[a].iter().map(|x| x.value_at(&w).expect("full domain")).collect();
            let vb: Vec<f64> = family[b].iter().map(|x| x.value_at(&w).expect("full domain")).collect();
            let mut least = f64::INFINITY;
            for &u in &distinct(&va) {
                for &v in &distinct(&vb) {
                    least = least.min(space.dist(u, v));
                }
            }
            if least < eps {
                return Err(Error::SeparationFailure {
                    left: label(a, 0),
                    right: label(b, 0),
                    reason: format!("values {least} apart at {}", w.describe(gens)),
                });
            }
            Ok(least)
        })
        .collect();
    let mut min_cross = f64::INFINITY;
    for r in cross_results {
        min_cross = min_cross.min(r?);
    }

    // shared base: x̃_g against every other x̃_{g'} at the branch word of g
    let exhaustive = n <= EXHAUSTIVE_LIMIT;
    let same: Vec<Result<(f64, u64)>> = (0..base.len())
        .into_par_iter()
        .map(|a| {
            let mut least = f64::INFINITY;
            let mut checked = 0u64;
            for (gi, x) in family[a].iter().enumerate() {
                let w = pair.branch_word(x, n_ea + 1)?;
                let v = x.value_at(&w).expect("full domain");
                let others: Vec<usize> = if exhaustive {
                    (0..words.len()).filter(|&k| k != gi).collect()
                } else {
                    // every branch differing from g in exactly one letter
                    (0..n).map(|bit| gi ^ (1 << bit)).collect()
                };
                for k in others {
                    let u = family[a][k].value_at(&w).expect("full domain");
                    let d = space.dist(u, v);
                    checked += 1;
                    if d < eps {
                        return Err(Error::SeparationFailure {
                            left: label(a, gi),
                            right: label(a, k),
                            reason: format!("values {d} apart on the branch of the left member"),
                        });
                    }
                    least = least.min(d);
                }
            }
            Ok((least, checked))
        })
        .collect();
    let (mut min_same, mut same_pairs) = (f64::INFINITY, 0u64);
    for r in same {
        let (l, c) = r?;
        min_same = min_same.min(l);
        same_pairs += c;
    }
    let base_count = base.len() as u64;
    let pseudo_count: u64 = family.iter().map(|f| f.len() as u64).sum();
    let expected = (1u64 << n) * base_count;
    Ok(GapReport {
        n,
        eps,
        alpha,
        delta: pair.delta,
        n_eps_alpha: n_ea,
        depth,
        base_count,
        pseudo_count,
        identity_holds: pseudo_count == expected,
        inequality_margin: pseudo_count as f64 - expected as f64,
        cross_pairs: cross.len() as u64,
        same_pairs,
        min_cross_distance: min_cross,
        min_same_distance: min_same,
        exhaustive,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapScan {
    pub reports: Vec<GapReport>,
    /// Least-squares slope of `log #A` against `n`.
    pub orbit_slope: f64,
    /// Least-squares slope of `log #A_α` against `n`.
    pub pseudo_slope: f64,
    pub gap: f64,
}

/// Gap experiments over a range of `n` and the slope difference between
/// constant-`α` pseudo-orbit counts and orbit counts.
pub fn gap_scan(pair: &MorseSmalePair, ns: &[usize], eps: f64, alpha: f64, cells: usize) -> Result<GapScan> {
    let reports: Vec<GapReport> = ns
        .iter()
        .map(|&n| gap_experiment(pair, n, eps, alpha, cells))
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = reports.iter().map(|r| r.n as f64).collect();
    let orbit: Vec<f64> = reports.iter().map(|r| (r.base_count as f64).ln()).collect();
    let pseudo: Vec<f64> = reports.iter().map(|r| (r.pseudo_count as f64).ln()).collect();
    let orbit_slope = lsq_slope(&xs, &orbit);
    let pseudo_slope = lsq_slope(&xs, &pseudo);
    Ok(GapScan {
        reports,
        orbit_slope,
        pseudo_slope,
        gap: pseudo_slope - orbit_slope,
    })
}

/// Pool builder for the adversarial families: at level `n` the pool is
/// `A_α`, certified at depth `n + n(ε, α) + 1`.
pub struct AdversarialPoolBuilder<'a> {
    pub pair: &'a MorseSmalePair,
    pub cells: usize,
}

impl PoolBuilder for AdversarialPoolBuilder<'_> {
    fn describe(&self) -> String {
        format!("adversarial(cells={})", self.cells)
    }

    fn pseudo_row(&self, _gens: &Arc<GeneratingSet>, n: usize, eps: f64, alpha: f64) -> Result<EntropyRow> {
        let r = gap_experiment(self.pair, n, eps, alpha, self.cells)?;
        Ok(EntropyRow {
            n,
            depth: r.depth,
            eps,
            alpha,
            count: r.pseudo_count,
            pool: r.pseudo_count,
            resolved: false,
            spacing: 1.0 / self.cells as f64,
            pair_tests: r.cross_pairs + r.same_pairs,
            nodes: 0,
            max_witness: r.depth,
        })
    }

    fn orbit_row(&self, gens: &Arc<GeneratingSet>, n: usize, eps: f64) -> Result<EntropyRow> {
        Ok(count_points(gens, SeparationParams::new(n, eps)?, self.cells))
    }
}

impl GallerySystem {
    pub fn kind(&self) -> SpaceKind {
        self.space.kind()
    }
}
