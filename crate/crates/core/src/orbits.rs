//! Pseudo-orbits as partial maps on the word tree.
//!
//! A pseudo-orbit is never materialised as a whole. Each node value is a
//! pure function of the provenance and the path from the root, computed by
//! walking the tree with [`OrbitTree::child`]. Re-evaluating a node always
//! reproduces the same bits, whatever order or thread does the walking.
//!
//! Domain rule: `(h, g) ∈ D_x` iff `x(g) ∈ U_h`. The identity letter never
//! changes the value, so `x(e, g) = x(g)` and `G_k ⊂ G_{k+1}` is respected.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pseudogroup::{GeneratingSet, Letter, Word};
use crate::rng::{child_key, sampler, symmetric};
use crate::space::Point;

/// Slack used by every tolerance check on node values.
pub const VALUE_SLACK: f64 = 1e-12;

/// Anything that can be walked as a rooted word tree with point values.
pub trait OrbitTree: Sync {
    type Node: Copy + Send + Sync;

    fn gens(&self) -> &GeneratingSet;
    fn root(&self) -> Self::Node;
    /// Last letter of the path leading to the root (set for shifted orbits,
    /// so reduced continuations never cancel against it).
    fn root_last(&self) -> Option<Letter>;
    fn value(&self, node: &Self::Node) -> f64;
    fn child(&self, node: &Self::Node, h: Letter) -> Option<Self::Node>;
    /// Largest per-edge deviation from the exact dynamics.
    fn alpha(&self) -> f64;

    /// Value at `w` (read from this tree's root), or `None` off the domain.
    fn value_at(&self, w: &Word) -> Option<f64> {
        let mut node = self.root();
        for &h in w.applied() {
            node = self.child(&node, h)?;
        }
        Some(self.value(&node))
    }
}

/// The exact orbit `x_p(g) = g(p)` as a bare tree; the cheap variant used by
/// point counting.
#[derive(Clone, Copy)]
pub struct PointTree<'a> {
    pub gens: &'a GeneratingSet,
    pub x: f64,
}

impl OrbitTree for PointTree<'_> {
    type Node = f64;

    fn gens(&self) -> &GeneratingSet {
        self.gens
    }

    fn root(&self) -> f64 {
        self.x
    }

    fn root_last(&self) -> Option<Letter> {
        None
    }

    #[inline]
    fn value(&self, node: &f64) -> f64 {
        *node
    }

    #[inline]
    fn child(&self, node: &f64, h: Letter) -> Option<f64> {
        self.gens.apply(h, *node)
    }

    fn alpha(&self) -> f64 {
        0.0
    }
}

/// Closed arc `[center − radius, center + radius]` on the circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc0 {
    pub center: f64,
    pub radius: f64,
}

/// Data driving the adversarial construction `x̃_g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialSpec {
    /// The distinguished word `g` over `{f0, f1}`, application order.
    pub branch: Word,
    pub f0: Letter,
    pub f1: Letter,
    /// Points in this arc continue the branch with `f0`, others with `f1`.
    pub u0: Arc0,
}

impl AdversarialSpec {
    #[inline]
    fn in_u0(&self, gens: &GeneratingSet, v: f64) -> bool {
        gens.space().dist(v, self.u0.center) <= self.u0.radius
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Exact,
    Perturbed { seed: u64 },
    Adversarial(AdversarialSpec),
}

impl Provenance {
    pub fn seed(&self) -> Option<u64> {
        match self {
            Provenance::Perturbed { seed } => Some(*seed),
            _ => None,
        }
    }
}

/// Position of a node relative to the adversarial branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Track {
    /// Non-adversarial provenance.
    Plain,
    /// The path equals the first `k` letters of `g`.
    Prefix(u32),
    /// The path is `(h_j, …, h_1, g)` on the distinguished branch.
    Branch(u32),
    /// Anywhere else: exact continuation.
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub value: f64,
    pub last: Option<Letter>,
    pub depth: u32,
    pub key: u64,
    pub track: Track,
}

/// An α-pseudo-orbit with lazily evaluated values.
#[derive(Clone, Debug)]
pub struct PseudoOrbit {
    gens: Arc<GeneratingSet>,
    alpha: f64,
    base: Point,
    provenance: Provenance,
    shift: Word,
    root: Node,
    overrides: Option<Arc<HashMap<u64, f64>>>,
}

impl PseudoOrbit {
    fn with_root(gens: Arc<GeneratingSet>, p: Point, alpha: f64, provenance: Provenance) -> Self {
        let track = match &provenance {
            Provenance::Adversarial(spec) if spec.branch.is_empty() => Track::Branch(0),
            Provenance::Adversarial(_) => Track::Prefix(0),
            _ => Track::Plain,
        };
        let root = Node {
            value: p.coord(),
            last: None,
            depth: 0,
            key: 0,
            track,
        };
        PseudoOrbit {
            gens,
            alpha,
            base: p,
            provenance,
            shift: Word::empty(),
            root,
            overrides: None,
        }
    }

    pub fn gens_arc(&self) -> &Arc<GeneratingSet> {
        &self.gens
    }

    pub fn base(&self) -> Point {
        self.base
    }

    /// `x(e)` of this (possibly shifted) pseudo-orbit.
    pub fn origin(&self) -> f64 {
        self.root.value
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn shift_word(&self) -> &Word {
        &self.shift
    }

    pub fn node_at(&self, w: &Word) -> Option<Node> {
        let mut node = self.root;
        for &h in w.applied() {
            node = self.child(&node, h)?;
        }
        Some(node)
    }

    pub fn point_at(&self, w: &Word) -> Option<Point> {
        self.value_at(w).map(|v| self.gens.space().reduce_point(v))
    }

    pub fn contains(&self, w: &Word) -> bool {
        self.node_at(w).is_some()
    }

    /// Replaces the value of the node at `w` (relative to this orbit's root);
    /// descendants are recomputed from the new value. Test and diagnostic use.
    pub fn corrupt(&mut self, w: &Word, value: f64) -> Result<()> {
        let node = self.node_at(w).ok_or_else(|| Error::NotInDomain(w.to_string()))?;
        let mut map = self.overrides.as_deref().cloned().unwrap_or_default();
        map.insert(node.key, self.gens.space().reduce(value));
        if w.is_empty() {
            self.root.value = self.gens.space().reduce(value);
        }
        self.overrides = Some(Arc::new(map));
        Ok(())
    }

    /// `σ_{g0}(x)`: `y(g) = x(g, g0)` on `{g : (g, g0) ∈ D_x}`.
    pub fn shift(&self, g0: &Word) -> Result<PseudoOrbit> {
        let mut node = self
            .node_at(g0)
            .ok_or_else(|| Error::NotInDomain(format!("shift word {g0} is not in D_x")))?;
        node.depth = 0;
        let mut out = self.clone();
        out.root = node;
        out.shift = g0.after(&self.shift);
        Ok(out)
    }

    /// Serialisable record with the values of every reduced word of length
    /// at most `depth`, in pre-order.
    pub fn record(&self, depth: usize) -> OrbitRecord {
        let mut materialized = Vec::new();
        let mut path = Vec::new();
        self.collect(&self.root, self.root.last, depth, &mut path, &mut materialized);
        OrbitRecord {
            alpha: self.alpha,
            base: self.base.coord(),
            provenance: self.provenance.clone(),
            seed: self.provenance.seed(),
            shift: self.shift.clone(),
            materialized,
        }
    }

    fn collect(
        &self,
        node: &Node,
        last: Option<Letter>,
        depth: usize,
        path: &mut Vec<Letter>,
        out: &mut Vec<(Word, f64)>,
    ) {
        out.push((Word::from_applied(path.clone()), node.value));
        if path.len() == depth {
            return;
        }
        for h in 0..self.gens.len() as Letter {
            if !self.gens.reduced_successor(last, h) {
                continue;
            }
            if let Some(c) = self.child(node, h) {
                path.push(h);
                self.collect(&c, Some(h), depth, path, out);
                path.pop();
            }
        }
    }

    /// Rebuilds a pseudo-orbit from its record and checks every
    /// materialised value bit for bit.
    pub fn replay(gens: Arc<GeneratingSet>, record: &OrbitRecord) -> Result<PseudoOrbit> {
        let p = gens.space().point(record.base)?;
        let base = PseudoOrbit::with_root(gens, p, record.alpha, record.provenance.clone());
        let orbit = if record.shift.is_empty() {
            base
        } else {
            base.shift(&record.shift)?
        };
        for (w, v) in &record.materialized {
            match orbit.value_at(w) {
                Some(u) if u.to_bits() == v.to_bits() => {}
                Some(u) => return Err(Error::RecordMismatch(format!("word {w}: recorded {v}, recomputed {u}"))),
                None => return Err(Error::RecordMismatch(format!("word {w} is no longer in the domain"))),
            }
        }
        Ok(orbit)
    }
}

impl OrbitTree for PseudoOrbit {
    type Node = Node;

    fn gens(&self) -> &GeneratingSet {
        &self.gens
    }

    fn root(&self) -> Node {
        self.root
    }

    fn root_last(&self) -> Option<Letter> {
        self.root.last
    }

    #[inline]
    fn value(&self, node: &Node) -> f64 {
        node.value
    }

    #[inline]
    fn child(&self, node: &Node, h: Letter) -> Option<Node> {
        let gens = &*self.gens;
        let image = gens.apply(h, node.value)?;
        if h == gens.identity() {
            return Some(Node {
                depth: node.depth + 1,
                ..*node
            });
        }
        let key = child_key(node.key, h);
        let space = gens.space();
        let (value, track) = match &self.provenance {
            Provenance::Exact => (image, Track::Plain),
            Provenance::Perturbed { seed } => {
                if self.alpha == 0.0 {
                    (image, Track::Plain)
                } else {
                    (space.reduce(image + symmetric(*seed, key, self.alpha)), Track::Plain)
                }
            }
            Provenance::Adversarial(spec) => match node.track {
                Track::Prefix(k) => {
                    let k = k as usize;
                    if spec.branch.applied()[k] == h {
                        let next = if k + 1 == spec.branch.len() {
                            Track::Branch(0)
                        } else {
                            Track::Prefix(k as u32 + 1)
                        };
                        (image, next)
                    } else {
                        (image, Track::Off)
                    }
                }
                Track::Branch(j) => {
                    let chosen = if spec.in_u0(gens, node.value) { spec.f0 } else { spec.f1 };
                    if h == chosen {
                        (space.reduce(image + self.alpha), Track::Branch(j + 1))
                    } else {
                        (image, Track::Off)
                    }
                }
                Track::Off | Track::Plain => (image, Track::Off),
            },
        };
        let value = match &self.overrides {
            Some(map) => map.get(&key).copied().unwrap_or(value),
            None => value,
        };
        Some(Node {
            value,
            last: Some(h),
            depth: node.depth + 1,
            key,
            track,
        })
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// `x_p(g) = g(p)`, with `α = 0` and `D_x = {g : p ∈ U_g}`.
pub fn exact_orbit(gens: &Arc<GeneratingSet>, p: Point) -> PseudoOrbit {
    PseudoOrbit::with_root(gens.clone(), p, 0.0, Provenance::Exact)
}

/// Seeded random α-pseudo-orbit based at `p`: every non-identity edge adds
/// an independent uniform draw from `[−α, α]` keyed by `(seed, path)`.
pub fn perturbed_orbit(gens: &Arc<GeneratingSet>, p: Point, alpha: f64, seed: u64) -> Result<PseudoOrbit> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(invalid(
            "alpha",
            format!("must be a finite nonnegative real, got {alpha}"),
        ));
    }
    Ok(PseudoOrbit::with_root(
        gens.clone(),
        p,
        alpha,
        Provenance::Perturbed { seed },
    ))
}

/// Adversarial pseudo-orbit from explicit branch data; see
/// [`crate::gallery::MorseSmalePair::adversarial_pseudo_orbit`].
pub fn adversarial_orbit(
    gens: &Arc<GeneratingSet>,
    p: Point,
    alpha: f64,
    spec: AdversarialSpec,
) -> Result<PseudoOrbit> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(invalid(
            "alpha",
            format!("must be a finite nonnegative real, got {alpha}"),
        ));
    }
    for &h in spec.branch.applied().iter().chain([&spec.f0, &spec.f1]) {
        if h as usize >= gens.len() || h == gens.identity() {
            return Err(invalid("branch", "letters must be non-identity generators"));
        }
    }
    Ok(PseudoOrbit::with_root(
        gens.clone(),
        p,
        alpha,
        Provenance::Adversarial(spec),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub alpha: f64,
    pub base: f64,
    pub provenance: Provenance,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Word::is_empty")]
    pub shift: Word,
    pub materialized: Vec<(Word, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub word: Word,
    /// Edge deviation, or `NaN` for a domain-closure failure.
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub ok: bool,
    pub nodes: u64,
    pub max_deviation: f64,
    pub violations: Vec<Violation>,
}

/// Checks tolerance and domain closure on every edge of the tree up to
/// `depth` (all non-identity letters, reduced or not; identity edges are
/// checked at every node).
pub fn verify_pseudo_orbit(x: &PseudoOrbit, depth: usize) -> VerifyReport {
    let mut report = VerifyReport {
        ok: true,
        nodes: 0,
        max_deviation: 0.0,
        violations: Vec::new(),
    };
    let mut path = Vec::new();
    verify_node(x, &x.root(), depth, &mut path, &mut report);
    report.ok = report.violations.is_empty();
    report
}

fn verify_node(x: &PseudoOrbit, node: &Node, depth: usize, path: &mut Vec<Letter>, report: &mut VerifyReport) {
    report.nodes += 1;
    if path.len() == depth {
        return;
    }
    let gens = x.gens();
    let space = gens.space();
    for h in 0..gens.len() as Letter {
        let in_domain = gens.in_domain(h, node.value);
        let child = x.child(node, h);
        path.push(h);
        match (in_domain, child) {
            (true, Some(c)) => {
                let target = gens.apply(h, node.value).expect("in domain");
                let dev = space.dist(target, c.value);
                report.max_deviation = report.max_deviation.max(dev);
                if dev > x.alpha() + VALUE_SLACK {
                    report.violations.push(Violation {
                        word: Word::from_applied(path.clone()),
                        deviation: dev,
                    });
                }
                if h != gens.identity() {
                    verify_node(x, &c, depth, path, report);
                }
            }
            (false, None) => {}
            _ => report.violations.push(Violation {
                word: Word::from_applied(path.clone()),
                deviation: f64::NAN,
            }),
        }
        path.pop();
    }
}

/// Largest edge deviation over `samples` random root-to-leaf walks of
/// length `depth`.
pub fn sampled_max_deviation(x: &PseudoOrbit, depth: usize, samples: usize, seed: u64) -> f64 {
    let gens = x.gens();
    let space = gens.space();
    let mut rng = sampler(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let mut node = x.root();
        for _ in 0..depth {
            let h = rng.random_range(0..gens.len()) as Letter;
            let Some(c) = x.child(&node, h) else { break };
            let target = gens.apply(h, node.value).expect("child exists");
            worst = worst.max(space.dist(target, c.value));
            node = c;
        }
    }
    worst
}

/// A finite stand-in for `Y_α`: pseudo-orbits over one generating set.
#[derive(Clone, Debug)]
pub struct OrbitPool {
    gens: Arc<GeneratingSet>,
    orbits: Vec<PseudoOrbit>,
    alpha: f64,
}

impl OrbitPool {
    pub fn new(gens: Arc<GeneratingSet>, orbits: Vec<PseudoOrbit>) -> Result<Self> {
        for o in &orbits {
            if !Arc::ptr_eq(o.gens_arc(), &gens) {
                return Err(invalid("pool", "members must share one generating set"));
            }
        }
        let alpha = orbits.iter().map(|o| o.alpha()).fold(0.0, f64::max);
        Ok(OrbitPool { gens, orbits, alpha })
    }

    pub fn gens(&self) -> &Arc<GeneratingSet> {
        &self.gens
    }

    pub fn orbits(&self) -> &[PseudoOrbit] {
        &self.orbits
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.orbits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbits.is_empty()
    }

    /// Verifies every member at its own tolerance up to `depth`.
    pub fn verify(&self, depth: usize) -> Vec<(usize, VerifyReport)> {
        self.orbits
            .iter()
            .enumerate()
            .map(|(i, o)| (i, verify_pseudo_orbit(o, depth)))
            .filter(|(_, r)| !r.ok)
            .collect()
    }
}
