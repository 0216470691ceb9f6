//! Separated and strongly separated families, their greedy counts, the
//! perturbation schedules and the slope estimators.
//!
//! Every count is a lower bound witnessed by an explicit family drawn from a
//! deterministic candidate pool. Separation is tested on reduced words only;
//! cancelling `(g, g⁻¹)` never shrinks a domain, so the supremum over `G_n`
//! is unchanged.
//!
//! The pair search is a depth-first walk of the reduced word tree in id
//! order, so the first witness found is the first in canonical pre-order.
//! A subtree is skipped when the largest distance it could still reach,
//! `A·d + C`, stays below `ε`: `A` bounds the product of Lipschitz constants
//! along admissible continuations and `C` the accumulated perturbation.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::orbits::{exact_orbit, perturbed_orbit, OrbitPool, OrbitTree, PointTree, Provenance, PseudoOrbit};
use crate::pseudogroup::{GeneratingSet, Letter, Word};
use crate::rng::derive_seed;
use crate::space::{CompactSpace, Point};

/// Levels needed per `ε` before a slope is reported.
pub const MIN_LEVELS: usize = 4;
/// Candidates tested speculatively against the same kept set.
const CHUNK: usize = 256;
/// Estimator disagreement beyond which an estimate is flagged unstable.
const STABILITY: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationParams {
    pub n: usize,
    pub eps: f64,
}

impl SeparationParams {
    pub fn new(n: usize, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(invalid("eps", format!("must be a positive real, got {eps}")));
        }
        Ok(SeparationParams { n, eps })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Separation {
    pub separated: bool,
    pub witness: Option<Word>,
    /// Distance at the witness, or the root distance when not separated.
    pub distance: f64,
    pub nodes: u64,
}

/// Bounds on what a subtree can still achieve, indexed by the last letter
/// (or the root slot `len()`) and the remaining length.
#[derive(Clone, Debug)]
pub struct PruneTable {
    n: usize,
    slots: usize,
    masks: Vec<u64>,
    a: Vec<f64>,
    c: Vec<f64>,
}

impl PruneTable {
    /// `gamma` bounds the growth of the distance per edge beyond the
    /// Lipschitz part (the sum of both tolerances); `fatten` widens the
    /// follower images by the per-edge deviation of a single orbit.
    pub fn new(gens: &GeneratingSet, n: usize, gamma: f64, fatten: f64) -> Self {
        let slots = gens.len() + 1;
        let masks = gens.follower_masks(fatten);
        let lip: Vec<f64> = (0..gens.len() as Letter)
            .map(|h| {
                if gens.is_single_piece(h) {
                    gens.lipschitz(h)
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        let mut a = vec![1.0; slots * (n + 1)];
        let mut c = vec![0.0; slots * (n + 1)];
        for s in 1..=n {
            for l in 0..slots {
                let mut best_a: f64 = 1.0;
                let mut best_c: f64 = 0.0;
                let mut mask = masks[l];
                while mask != 0 {
                    let k = mask.trailing_zeros() as usize;
                    mask &= mask - 1;
                    let ak = a[k * (n + 1) + s - 1];
                    let ck = c[k * (n + 1) + s - 1];
                    best_a = best_a.max(lip[k] * ak);
                    best_c = best_c.max(gamma * ak + ck);
                }
                a[l * (n + 1) + s] = best_a;
                c[l * (n + 1) + s] = best_c;
            }
        }
        PruneTable { n, slots, masks, a, c }
    }

    #[inline]
    fn slot(&self, last: Option<Letter>) -> usize {
        last.map_or(self.slots - 1, usize::from)
    }

    #[inline]
    fn reach(&self, slot: usize, remaining: usize, d: f64) -> f64 {
        let i = slot * (self.n + 1) + remaining;
        self.a[i] * d + self.c[i]
    }
}

struct PairSearch<'a, X: OrbitTree, Y: OrbitTree> {
    table: &'a PruneTable,
    x: &'a X,
    y: &'a Y,
    space: CompactSpace,
    eps: f64,
    n: usize,
    nodes: u64,
    path: Vec<Letter>,
}

impl<X: OrbitTree, Y: OrbitTree> PairSearch<'_, X, Y> {
    fn visit(&mut self, nx: &X::Node, ny: &Y::Node, slot: usize, depth: usize) -> Option<f64> {
        self.nodes += 1;
        let d = self.space.dist(self.x.value(nx), self.y.value(ny));
        if d >= self.eps {
            return Some(d);
        }
        let remaining = self.n - depth;
        if remaining == 0 || self.table.reach(slot, remaining, d) < self.eps {
            return None;
        }
        let mut mask = self.table.masks[slot];
        while mask != 0 {
            let h = mask.trailing_zeros() as Letter;
            mask &= mask - 1;
            let Some(cx) = self.x.child(nx, h) else { continue };
            let Some(cy) = self.y.child(ny, h) else { continue };
            self.path.push(h);
            if let Some(found) = self.visit(&cx, &cy, h as usize, depth + 1) {
                return Some(found);
            }
            self.path.pop();
        }
        None
    }
}

/// First witness (canonical pre-order) of `(n, ε)`-separation of two trees
/// under the given pruning table.
pub fn search_pair<X: OrbitTree, Y: OrbitTree>(table: &PruneTable, x: &X, y: &Y, eps: f64) -> Separation {
    let mut s = PairSearch {
        table,
        x,
        y,
        space: x.gens().space(),
        eps,
        n: table.n,
        nodes: 0,
        path: Vec::new(),
    };
    let slot = table.slot(x.root_last());
    let found = s.visit(&x.root(), &y.root(), slot, 0);
    let root_distance = x.gens().space().dist(x.value(&x.root()), y.value(&y.root()));
    match found {
        Some(d) => Separation {
            separated: true,
            witness: Some(Word::from_applied(s.path)),
            distance: d,
            nodes: s.nodes,
        },
        None => Separation {
            separated: false,
            witness: None,
            distance: root_distance,
            nodes: s.nodes,
        },
    }
}

/// Are `p` and `q` `(n, ε)`-separated? The witness is the first separating
/// reduced word in canonical order.
pub fn separated(gens: &GeneratingSet, p: Point, q: Point, params: SeparationParams) -> Separation {
    let table = PruneTable::new(gens, params.n, 0.0, 0.0);
    search_pair(
        &table,
        &PointTree { gens, x: p.coord() },
        &PointTree { gens, x: q.coord() },
        params.eps,
    )
}

fn check_same_gens(x: &PseudoOrbit, y: &PseudoOrbit) -> Result<()> {
    if Arc::ptr_eq(x.gens_arc(), y.gens_arc()) {
        Ok(())
    } else {
        Err(invalid("orbits", "pseudo-orbits must share one generating set"))
    }
}

fn pair_table(x: &PseudoOrbit, y: &PseudoOrbit, n: usize) -> PruneTable {
    let gamma = x.alpha() + y.alpha();
    PruneTable::new(x.gens(), n, gamma, x.alpha().max(y.alpha()))
}

/// Strong `(n, ε)`-separation: some reduced word of length at most `n` in
/// both domains has values at least `ε` apart.
pub fn strongly_separated(x: &PseudoOrbit, y: &PseudoOrbit, params: SeparationParams) -> Result<Separation> {
    check_same_gens(x, y)?;
    Ok(search_pair(&pair_table(x, y, params.n), x, y, params.eps))
}

/// First witness of a subtree with its distance.
type Hit = Option<(Vec<Letter>, f64)>;

/// Parallel variant of [`strongly_separated`]: subtrees below depth `split`
/// are searched concurrently and the first witness in canonical order wins,
/// so the result equals the sequential one.
pub fn strongly_separated_parallel(
    x: &PseudoOrbit,
    y: &PseudoOrbit,
    params: SeparationParams,
    split: usize,
) -> Result<Separation> {
    check_same_gens(x, y)?;
    let table = pair_table(x, y, params.n);
    let split = split.min(params.n);
    let space = x.gens().space();
    enum Task<N> {
        Hit(Vec<Letter>, f64),
        Subtree(Vec<Letter>, N, N, usize),
    }
    // pre-order frontier down to `split`
    let mut tasks: Vec<Task<crate::orbits::Node>> = Vec::new();
    let mut nodes = 0u64;
    let mut stack = vec![(x.root(), y.root(), table.slot(x.root_last()), Vec::<Letter>::new())];
    while let Some((nx, ny, slot, path)) = stack.pop() {
        if path.len() == split {
            tasks.push(Task::Subtree(path, nx, ny, slot));
            continue;
        }
        nodes += 1;
        let d = space.dist(nx.value, ny.value);
        if d >= params.eps {
            tasks.push(Task::Hit(path, d));
            continue;
        }
        let remaining = params.n - path.len();
        if remaining == 0 || table.reach(slot, remaining, d) < params.eps {
            continue;
        }
        let mut children = Vec::new();
        let mut mask = table.masks[slot];
        while mask != 0 {
            let h = mask.trailing_zeros() as Letter;
            mask &= mask - 1;
            if let (Some(cx), Some(cy)) = (x.child(&nx, h), y.child(&ny, h)) {
                let mut p = path.clone();
                p.push(h);
                children.push((cx, cy, h as usize, p));
            }
        }
        stack.extend(children.into_iter().rev());
    }
    let results: Vec<(Hit, u64)> = tasks
        .par_iter()
        .map(|t| match t {
            Task::Hit(p, d) => (Some((p.clone(), *d)), 0),
            Task::Subtree(prefix, nx, ny, slot) => {
                let mut s = PairSearch {
                    table: &table,
                    x,
                    y,
                    space,
                    eps: params.eps,
                    n: params.n,
                    nodes: 0,
                    path: prefix.clone(),
                };
                let found = s.visit(nx, ny, *slot, prefix.len());
                (found.map(|d| (s.path, d)), s.nodes)
            }
        })
        .collect();
    let mut total = nodes;
    for (found, n) in results {
        total += n;
        if let Some((path, d)) = found {
            return Ok(Separation {
                separated: true,
                witness: Some(Word::from_applied(path)),
                distance: d,
                nodes: total,
            });
        }
    }
    Ok(Separation {
        separated: false,
        witness: None,
        distance: space.dist(x.origin(), y.origin()),
        nodes: total,
    })
}

/// Outcome of a greedy pass.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GreedyStats {
    pub pair_tests: u64,
    pub nodes: u64,
    /// Longest witness among accepted pairs tested below `ε` at the root.
    pub max_witness: usize,
}

#[derive(Clone, Copy)]
struct Key(f64, usize);

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits() && self.1 == other.1
    }
}
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Kept members indexed by root value for window queries.
struct KeptIndex {
    space: CompactSpace,
    set: BTreeSet<Key>,
}

impl KeptIndex {
    /// Members whose root lies strictly closer than `eps` to `b`, nearest
    /// first (ties by index).
    fn near(&self, b: f64, eps: f64) -> Vec<(f64, usize)> {
        let mut out = Vec::new();
        let mut scan = |lo: f64, hi: f64| {
            for k in self.set.range(Key(lo, 0)..=Key(hi, usize::MAX)) {
                let d = self.space.dist(b, k.0);
                if d < eps {
                    out.push((d, k.1));
                }
            }
        };
        let (lo, hi) = (b - eps, b + eps);
        scan(lo.max(0.0), hi.min(1.0));
        if self.space.is_circle() {
            if lo < 0.0 {
                scan(lo + 1.0, 1.0);
            }
            if hi > 1.0 {
                scan(0.0, (hi - 1.0).min(lo.max(0.0)));
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.dedup_by_key(|e| e.1);
        out
    }
}

/// Greedy maximal family: walks `order`, keeping a member iff it is
/// separated from every member kept so far. `root` gives each member's
/// value at the empty word; members whose roots are at least `eps` apart are
/// separated by the empty word and never searched.
fn greedy<F>(space: CompactSpace, eps: f64, order: &[usize], root: &[f64], sep: F) -> (Vec<usize>, GreedyStats)
where
    F: Fn(usize, usize) -> Separation + Sync,
{
    let mut kept: Vec<usize> = Vec::new();
    let mut index = KeptIndex {
        space,
        set: BTreeSet::new(),
    };
    let mut stats = GreedyStats::default();
    for chunk in order.chunks(CHUNK) {
        // speculative pass against the kept set as of the chunk start
        let pre: Vec<(bool, GreedyStats)> = chunk
            .par_iter()
            .map(|&i| {
                let mut st = GreedyStats::default();
                for (_, j) in index.near(root[i], eps) {
                    let s = sep(i, j);
                    st.pair_tests += 1;
                    st.nodes += s.nodes;
                    if !s.separated {
                        return (false, st);
                    }
                    st.max_witness = st.max_witness.max(s.witness.map_or(0, |w| w.len()));
                }
                (true, st)
            })
            .collect();
        let start = kept.len();
        for (&i, (pass, st)) in chunk.iter().zip(pre) {
            stats.pair_tests += st.pair_tests;
            stats.nodes += st.nodes;
            if !pass {
                continue;
            }
            let mut ok = true;
            let mut local = 0usize;
            for &j in &kept[start..] {
                if space.dist(root[i], root[j]) >= eps {
                    continue;
                }
                let s = sep(i, j);
                stats.pair_tests += 1;
                stats.nodes += s.nodes;
                if !s.separated {
                    ok = false;
                    break;
                }
                local = local.max(s.witness.map_or(0, |w| w.len()));
            }
            if ok {
                stats.max_witness = stats.max_witness.max(st.max_witness).max(local);
                kept.push(i);
                index.set.insert(Key(root[i], i));
            }
        }
    }
    (kept, stats)
}

/// Greedy maximal `(n, ε)`-separated subset of `candidates`, in the given
/// order: a lower-bound witness for `N(n, ε, X)`.
pub fn max_separated_set(gens: &GeneratingSet, candidates: &[Point], params: SeparationParams) -> Vec<Point> {
    let (kept, _) = greedy_points(gens, candidates, params);
    kept.into_iter().map(|i| candidates[i]).collect()
}

fn greedy_points(gens: &GeneratingSet, candidates: &[Point], params: SeparationParams) -> (Vec<usize>, GreedyStats) {
    let table = PruneTable::new(gens, params.n, 0.0, 0.0);
    let roots: Vec<f64> = candidates.iter().map(|p| p.coord()).collect();
    let order: Vec<usize> = (0..candidates.len()).collect();
    greedy(gens.space(), params.eps, &order, &roots, |i, j| {
        search_pair(
            &table,
            &PointTree { gens, x: roots[i] },
            &PointTree { gens, x: roots[j] },
            params.eps,
        )
    })
}

/// One level of an entropy table. Counts are lower bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub n: usize,
    /// Word length used for the separation test (equals `n` except for
    /// families certified at a larger depth).
    pub depth: usize,
    pub eps: f64,
    pub alpha: f64,
    pub count: u64,
    pub pool: u64,
    /// Candidate spacing is at most `ε·L^{-n}`.
    pub resolved: bool,
    pub spacing: f64,
    pub pair_tests: u64,
    pub nodes: u64,
    pub max_witness: usize,
}

/// `ε·L^{-n}`, the spacing below which grid candidates resolve level `n`.
pub fn resolution_scale(gens: &GeneratingSet, n: usize, eps: f64) -> f64 {
    eps * gens.lipschitz_max().max(1.0).powi(-(n as i32))
}

/// Greedy separated count on the canonical grid with `cells` cells.
pub fn count_points(gens: &GeneratingSet, params: SeparationParams, cells: usize) -> EntropyRow {
    let grid = gens.space().grid(cells);
    let (kept, stats) = greedy_points(gens, &grid, params);
    let spacing = 1.0 / cells.max(1) as f64;
    EntropyRow {
        n: params.n,
        depth: params.n,
        eps: params.eps,
        alpha: 0.0,
        count: kept.len() as u64,
        pool: grid.len() as u64,
        resolved: spacing <= resolution_scale(gens, params.n, params.eps),
        spacing,
        pair_tests: stats.pair_tests,
        nodes: stats.nodes,
        max_witness: stats.max_witness,
    }
}

/// Canonical pool order: exact orbits first, then by root value, seed and
/// position.
pub fn canonical_order(orbits: &[PseudoOrbit]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..orbits.len()).collect();
    let rank = |o: &PseudoOrbit| match o.provenance() {
        Provenance::Exact => 0u8,
        _ => 1,
    };
    order.sort_by(|&a, &b| {
        let (x, y) = (&orbits[a], &orbits[b]);
        rank(x)
            .cmp(&rank(y))
            .then(x.origin().total_cmp(&y.origin()))
            .then(x.provenance().seed().cmp(&y.provenance().seed()))
            .then(a.cmp(&b))
    });
    order
}

/// Greedy strongly separated family of a pool (indices into the pool, in
/// selection order).
pub fn strongly_separated_family(pool: &OrbitPool, params: SeparationParams) -> (Vec<usize>, GreedyStats) {
    let orbits = pool.orbits();
    let gens = pool.gens();
    let alpha = pool.alpha();
    let table = PruneTable::new(gens, params.n, 2.0 * alpha, alpha);
    let roots: Vec<f64> = orbits.iter().map(PseudoOrbit::origin).collect();
    let order = canonical_order(orbits);
    greedy(gens.space(), params.eps, &order, &roots, |i, j| {
        search_pair(&table, &orbits[i], &orbits[j], params.eps)
    })
}

/// Greedy strongly `(n, ε)`-separated count of a pool: a lower bound for
/// `N_α(n, ε)`. Exact members are taken first, so the count never falls
/// below that of the exact sub-pool.
pub fn count_pseudo_orbits(pool: &OrbitPool, params: SeparationParams) -> EntropyRow {
    let (kept, stats) = strongly_separated_family(pool, params);
    EntropyRow {
        n: params.n,
        depth: params.n,
        eps: params.eps,
        alpha: pool.alpha(),
        count: kept.len() as u64,
        pool: pool.len() as u64,
        resolved: false,
        spacing: f64::NAN,
        pair_tests: stats.pair_tests,
        nodes: stats.nodes,
        max_witness: stats.max_witness,
    }
}

/// Exact orbits on the grid plus `copies` perturbed orbits per grid point,
/// seeded by `(seed, grid index, copy)`.
pub fn grid_pool(gens: &Arc<GeneratingSet>, cells: usize, alpha: f64, seed: u64, copies: usize) -> Result<OrbitPool> {
    let grid = gens.space().grid(cells);
    let mut orbits: Vec<PseudoOrbit> = grid.iter().map(|&p| exact_orbit(gens, p)).collect();
    for (i, &p) in grid.iter().enumerate() {
        for c in 0..copies {
            let s = derive_seed(seed, (i * copies + c) as u64);
            orbits.push(perturbed_orbit(gens, p, alpha, s)?);
        }
    }
    OrbitPool::new(gens.clone(), orbits)
}

/// Perturbation tolerance as a function of the level `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Schedule {
    /// `β_n = ε·(1 + L + ⋯ + L^{n−1})^{−1}`.
    Theorem1,
    /// `β_n = ε·(1 + L + ⋯ + Lⁿ)^{−1}`.
    Remark,
    /// A fixed tolerance; not vanishing, so outside the equality theorem.
    Const(f64),
    /// Explicit `β_1, β_2, …`, positive and nonincreasing.
    List(Vec<f64>),
}

fn geometric_sum(l: f64, terms: usize) -> f64 {
    (0..terms).map(|k| l.powi(k as i32)).sum()
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            Schedule::Theorem1 | Schedule::Remark => Ok(()),
            Schedule::Const(a) if *a >= 0.0 && a.is_finite() => Ok(()),
            Schedule::Const(a) => Err(Error::InvalidSchedule(format!(
                "constant tolerance must be >= 0, got {a}"
            ))),
            Schedule::List(v) => {
                if v.is_empty() {
                    return Err(Error::InvalidSchedule("list is empty".into()));
                }
                if v.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
                    return Err(Error::InvalidSchedule("list values must be positive".into()));
                }
                if v.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::InvalidSchedule("list values must be nonincreasing".into()));
                }
                Ok(())
            }
        }
    }

    /// Checks the schedule covers levels `1..=n_max`.
    pub fn covers(&self, n_max: usize) -> Result<()> {
        self.validate()?;
        if let Schedule::List(v) = self {
            if v.len() < n_max {
                return Err(Error::InvalidSchedule(format!(
                    "list has {} values but levels up to {n_max} were requested",
                    v.len()
                )));
            }
        }
        Ok(())
    }

    /// `β_n` for the given `ε` and Lipschitz constant `L`.
    pub fn beta(&self, n: usize, eps: f64, l: f64) -> Result<f64> {
        match self {
            Schedule::Theorem1 => Ok(eps / geometric_sum(l, n).max(1.0)),
            Schedule::Remark => Ok(eps / geometric_sum(l, n + 1)),
            Schedule::Const(a) => Ok(*a),
            Schedule::List(v) => v
                .get(n.max(1) - 1)
                .copied()
                .ok_or_else(|| Error::InvalidSchedule(format!("no value for level {n}"))),
        }
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parsed = match s {
            "theorem1" => Schedule::Theorem1,
            "remark" => Schedule::Remark,
            _ => {
                if let Some(v) = s.strip_prefix("const:") {
                    let a = v
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidSchedule(format!("bad constant {v:?}: {e}")))?;
                    Schedule::Const(a)
                } else if let Some(v) = s.strip_prefix("list:") {
                    let vals = v
                        .split(',')
                        .map(|t| t.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| Error::InvalidSchedule(format!("bad list {v:?}: {e}")))?;
                    Schedule::List(vals)
                } else {
                    return Err(Error::InvalidSchedule(format!(
                        "expected theorem1, remark, const:<alpha> or list:<csv>, got {s:?}"
                    )));
                }
            }
        };
        parsed.validate()?;
        Ok(parsed)
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Theorem1 => write!(f, "theorem1"),
            Schedule::Remark => write!(f, "remark"),
            Schedule::Const(a) => write!(f, "const:{a}"),
            Schedule::List(v) => {
                let parts: Vec<String> = v.iter().map(|b| b.to_string()).collect();
                write!(f, "list:{}", parts.join(","))
            }
        }
    }
}

/// Slopes of `log count` against `n` at one `ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    pub eps: f64,
    /// Levels used (a run of consecutive resolved levels).
    pub levels: Vec<usize>,
    /// Max of `(1/n)·log count` over the upper half of the levels.
    pub slope_tailmax: f64,
    /// Least-squares slope of `log count` against `n`.
    pub slope_lsq: f64,
}

/// Finite-range approximation of the entropy from an [`EntropyTable`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub per_eps: Vec<SlopeEstimate>,
    /// Least-squares slope at the smallest `ε`, clamped at 0.
    pub h: f64,
    /// `|slope_tailmax − slope_lsq|` at the smallest `ε`.
    pub spread: f64,
    /// Change of the least-squares slope between the two smallest `ε`.
    pub eps_trend: Option<f64>,
    pub stable: bool,
    pub label: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EntropyTable {
    pub rows: Vec<EntropyRow>,
}

impl EntropyTable {
    pub fn push(&mut self, row: EntropyRow) {
        self.rows.push(row);
    }

    /// Plot-ready CSV with the per-`ε` slopes repeated on each row.
    pub fn to_csv(&self, estimate: Option<&EntropyEstimate>) -> String {
        let mut out = String::from("n,eps,alpha,count,slope_tailmax,slope_lsq\n");
        for r in &self.rows {
            let slope = estimate.and_then(|e| e.per_eps.iter().find(|s| s.eps == r.eps));
            let (t, l) = match slope {
                Some(s) => (s.slope_tailmax.to_string(), s.slope_lsq.to_string()),
                None => (String::new(), String::new()),
            };
            out.push_str(&format!("{},{},{},{},{},{}\n", r.n, r.eps, r.alpha, r.count, t, l));
        }
        out
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn lsq_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn slope_for(eps: f64, rows: &[&EntropyRow], require_resolved: bool) -> Result<SlopeEstimate> {
    let mut rows: Vec<&EntropyRow> = rows
        .iter()
        .copied()
        .filter(|r| !require_resolved || r.resolved)
        .collect();
    rows.sort_by_key(|r| r.n);
    // longest run of consecutive levels, earliest on ties
    let mut best: (usize, usize) = (0, 0);
    let mut start = 0;
    for i in 0..rows.len() {
        if i > 0 && rows[i].n != rows[i - 1].n + 1 {
            start = i;
        }
        if i + 1 - start > best.1 - best.0 {
            best = (start, i + 1);
        }
    }
    let run = &rows[best.0..best.1];
    if run.len() < MIN_LEVELS {
        return Err(Error::InsufficientData {
            eps,
            levels: run.len(),
            needed: MIN_LEVELS,
        });
    }
    let xs: Vec<f64> = run.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = run.iter().map(|r| (r.count.max(1) as f64).ln()).collect();
    let upper = &run[run.len() / 2..];
    let slope_tailmax = upper
        .iter()
        .filter(|r| r.n > 0)
        .map(|r| (r.count.max(1) as f64).ln() / r.n as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SlopeEstimate {
        eps,
        levels: run.iter().map(|r| r.n).collect(),
        slope_tailmax: if slope_tailmax.is_finite() { slope_tailmax } else { 0.0 },
        slope_lsq: lsq_slope(&xs, &ys),
    })
}

/// Per-`ε` slopes over runs of at least [`MIN_LEVELS`] consecutive levels
/// (resolved levels only when `require_resolved`), and `h` at the smallest
/// `ε`.
pub fn estimate_from(table: &EntropyTable, require_resolved: bool) -> Result<EntropyEstimate> {
    let mut eps_list: Vec<f64> = table.rows.iter().map(|r| r.eps).collect();
    eps_list.sort_by(|a, b| b.total_cmp(a));
    eps_list.dedup();
    if eps_list.is_empty() {
        return Err(Error::InsufficientData {
            eps: f64::NAN,
            levels: 0,
            needed: MIN_LEVELS,
        });
    }
    let mut per_eps = Vec::new();
    for &eps in &eps_list {
        let rows: Vec<&EntropyRow> = table.rows.iter().filter(|r| r.eps == eps).collect();
        per_eps.push(slope_for(eps, &rows, require_resolved)?);
    }
    let last = per_eps.last().expect("nonempty");
    let spread = (last.slope_tailmax - last.slope_lsq).abs();
    let eps_trend = (per_eps.len() >= 2).then(|| last.slope_lsq - per_eps[per_eps.len() - 2].slope_lsq);
    let stable = spread <= STABILITY && eps_trend.is_none_or(|t| t.abs() <= STABILITY);
    Ok(EntropyEstimate {
        h: last.slope_lsq.max(0.0),
        spread,
        eps_trend,
        stable,
        label: "finite-range lower-bound estimate".into(),
        per_eps,
    })
}

/// Entropy estimate from point-count tables (resolved levels only).
pub fn entropy_estimate(table: &EntropyTable) -> Result<EntropyEstimate> {
    estimate_from(table, true)
}

/// Point-count table over `ns × eps_list` on a grid.
pub fn point_table(gens: &GeneratingSet, ns: &[usize], eps_list: &[f64], cells: usize) -> Result<EntropyTable> {
    let mut table = EntropyTable::default();
    for &eps in eps_list {
        for &n in ns {
            table.push(count_points(gens, SeparationParams::new(n, eps)?, cells));
        }
    }
    Ok(table)
}

/// Source of pseudo-orbit families for [`pseudo_entropy_estimate`].
pub trait PoolBuilder: Sync {
    fn describe(&self) -> String;
    /// Pseudo-orbit count at level `n` and tolerance `alpha`.
    fn pseudo_row(&self, gens: &Arc<GeneratingSet>, n: usize, eps: f64, alpha: f64) -> Result<EntropyRow>;
    /// Orbit count at level `n` for comparison.
    fn orbit_row(&self, gens: &Arc<GeneratingSet>, n: usize, eps: f64) -> Result<EntropyRow>;
}

/// Exact grid orbits plus seeded perturbed orbits on the same grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoolBuilder {
    pub cells: usize,
    pub seed: u64,
    pub copies: usize,
}

impl PoolBuilder for GridPoolBuilder {
    fn describe(&self) -> String {
        format!("grid(cells={}, copies={}, seed={})", self.cells, self.copies, self.seed)
    }

    fn pseudo_row(&self, gens: &Arc<GeneratingSet>, n: usize, eps: f64, alpha: f64) -> Result<EntropyRow> {
        let pool = grid_pool(gens, self.cells, alpha, self.seed, self.copies)?;
        let mut row = count_pseudo_orbits(&pool, SeparationParams::new(n, eps)?);
        row.spacing = 1.0 / self.cells.max(1) as f64;
        row.resolved = row.spacing <= resolution_scale(gens, n, eps);
        Ok(row)
    }

    fn orbit_row(&self, gens: &Arc<GeneratingSet>, n: usize, eps: f64) -> Result<EntropyRow> {
        Ok(count_points(gens, SeparationParams::new(n, eps)?, self.cells))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoEntropyReport {
    pub schedule: String,
    pub pool: String,
    pub orbit_table: EntropyTable,
    pub pseudo_table: EntropyTable,
    pub orbit: EntropyEstimate,
    pub pseudo: EntropyEstimate,
    /// `pseudo.h − orbit.h`.
    pub difference: f64,
}

/// Pseudo-orbit counts at `β_n` from the schedule, side by side with the
/// orbit counts of the same builder.
pub fn pseudo_entropy_estimate(
    gens: &Arc<GeneratingSet>,
    schedule: &Schedule,
    ns: &[usize],
    eps_list: &[f64],
    builder: &dyn PoolBuilder,
    require_resolved: bool,
) -> Result<PseudoEntropyReport> {
    schedule.covers(ns.iter().copied().max().unwrap_or(0))?;
    let l = gens.lipschitz_max();
    let mut orbit_table = EntropyTable::default();
    let mut pseudo_table = EntropyTable::default();
    for &eps in eps_list {
        for &n in ns {
            orbit_table.push(builder.orbit_row(gens, n, eps)?);
            let beta = schedule.beta(n, eps, l)?;
            pseudo_table.push(builder.pseudo_row(gens, n, eps, beta)?);
        }
    }
    let orbit = estimate_from(&orbit_table, require_resolved)?;
    let pseudo = estimate_from(&pseudo_table, require_resolved)?;
    Ok(PseudoEntropyReport {
        schedule: schedule.to_string(),
        pool: builder.describe(),
        difference: pseudo.h - orbit.h,
        orbit_table,
        pseudo_table,
        orbit,
        pseudo,
    })
}

/// Pairs of a family whose base points are not `(n, ε')`-separated.
pub fn unseparated_bases(
    gens: &GeneratingSet,
    family: &[&PseudoOrbit],
    params: SeparationParams,
) -> Vec<(usize, usize)> {
    let table = PruneTable::new(gens, params.n, 0.0, 0.0);
    let mut bad = Vec::new();
    for i in 0..family.len() {
        for j in i + 1..family.len() {
            let (p, q) = (family[i].base().coord(), family[j].base().coord());
            let s = search_pair(&table, &PointTree { gens, x: p }, &PointTree { gens, x: q }, params.eps);
            if !s.separated {
                bad.push((i, j));
            }
        }
    }
    bad
}
