//! Finitely generated pseudogroups: local maps with explicit domains, the
//! symmetric generating set, and words over it.
//!
//! Words are stored in *application order*: `letters[0]` is applied first.
//! The composite `h₁∘⋯∘h_k` therefore corresponds to `letters = [h_k, …, h₁]`.
//! Letters are indices into [`GeneratingSet::maps`], which is sorted by id,
//! so index order is id order.

use std::f64::consts::TAU;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::sampler;
use crate::space::{wrap_unit, CompactSpace, Point};

pub type Letter = u8;

const INVERSE_TOLERANCE: f64 = 1e-12;
const LIPSCHITZ_SAMPLES: usize = 10_000;

/// Half-open domain piece `[start, end)`. On the circle a piece with
/// `start > end` wraps through 0, and `[0, 1)` is the whole circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub start: f64,
    pub end: f64,
}

impl Span {
    pub fn new(start: f64, end: f64) -> Self {
        Span { start, end }
    }

    pub fn full() -> Self {
        Span::new(0.0, 1.0)
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        if self.start <= self.end {
            self.start <= x && x < self.end
        } else {
            x >= self.start || x < self.end
        }
    }

    pub fn length(&self) -> f64 {
        if self.start <= self.end {
            self.end - self.start
        } else {
            1.0 - self.start + self.end
        }
    }

    /// Non-wrapping segments making up the span.
    fn segments(&self) -> Vec<(f64, f64)> {
        if self.start <= self.end {
            vec![(self.start, self.end)]
        } else {
            vec![(self.start, 1.0), (0.0, self.end)]
        }
    }

    fn sample(&self, u: f64) -> f64 {
        wrap_unit(self.start + u * self.length())
    }
}

/// Closed-form forward rule of a domain piece.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Rule {
    Identity,
    /// `x ↦ slope·x + offset` (reduced mod 1 on the circle).
    Affine {
        slope: f64,
        offset: f64,
    },
    /// `x ↦ (a·x + b) / (c·x + d)`.
    Moebius {
        a: f64,
        b: f64,
        c: f64,
        d: f64,
    },
    /// Circle diffeomorphism `x ↦ x + amp/(2π)·sin(2π(x − phase))`, `|amp| < 1`,
    /// or its inverse when `inverted`.
    Sine {
        amp: f64,
        phase: f64,
        inverted: bool,
    },
    /// Piecewise-linear circle homeomorphism with a source at `source`, a
    /// sink at `source + 1/2`, slope `slope` on the arc of radius `radius`
    /// around the source and a single compensating slope on the rest; or its
    /// inverse when `inverted`.
    Plateau {
        source: f64,
        radius: f64,
        slope: f64,
        inverted: bool,
    },
}

impl Rule {
    /// Lifted value (not reduced into the space).
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Rule::Identity => x,
            Rule::Affine { slope, offset } => slope * x + offset,
            Rule::Moebius { a, b, c, d } => (a * x + b) / (c * x + d),
            Rule::Sine { amp, phase, inverted } => {
                if inverted {
                    sine_inverse(amp, phase, x)
                } else {
                    x + amp / TAU * (TAU * (x - phase)).sin()
                }
            }
            Rule::Plateau {
                source,
                radius,
                slope,
                inverted,
            } => {
                let t = wrap_unit(x - source);
                let u = if inverted {
                    plateau_inverse_local(radius, slope, t)
                } else {
                    plateau_local(radius, slope, t)
                };
                source + u
            }
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Rule::Identity)
    }

    /// Slope of the contracting part of a plateau map.
    pub fn plateau_contraction(radius: f64, slope: f64) -> f64 {
        (0.5 - slope * radius) / (0.5 - radius)
    }

    fn check(&self) -> std::result::Result<(), String> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match *self {
            Rule::Identity => Ok(()),
            Rule::Affine { slope, offset } => {
                if !finite(&[slope, offset]) || slope == 0.0 {
                    Err("affine slope must be finite and nonzero".into())
                } else {
                    Ok(())
                }
            }
            Rule::Moebius { a, b, c, d } => {
                if !finite(&[a, b, c, d]) || a * d - b * c == 0.0 {
                    Err("moebius coefficients must be finite with ad - bc != 0".into())
                } else {
                    Ok(())
                }
            }
            Rule::Sine { amp, phase, .. } => {
                if !finite(&[amp, phase]) || amp.abs() >= 1.0 {
                    Err("sine amplitude must satisfy |amp| < 1".into())
                } else {
                    Ok(())
                }
            }
            Rule::Plateau {
                source, radius, slope, ..
            } => {
                if !finite(&[source, radius, slope])
                    || !(radius > 0.0 && radius < 0.5)
                    || !(slope > 0.0)
                    || !(slope * radius < 0.5)
                {
                    Err("plateau needs 0 < radius < 1/2 and 0 < slope·radius < 1/2".into())
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[inline]
fn plateau_local(radius: f64, slope: f64, t: f64) -> f64 {
    if t > 0.5 {
        return 1.0 - plateau_local(radius, slope, 1.0 - t);
    }
    if t <= radius {
        slope * t
    } else {
        slope * radius + Rule::plateau_contraction(radius, slope) * (t - radius)
    }
}

#[inline]
fn plateau_inverse_local(radius: f64, slope: f64, u: f64) -> f64 {
    if u > 0.5 {
        return 1.0 - plateau_inverse_local(radius, slope, 1.0 - u);
    }
    let knee = slope * radius;
    if u <= knee {
        u / slope
    } else {
        radius + (u - knee) / Rule::plateau_contraction(radius, slope)
    }
}

fn sine_inverse(amp: f64, phase: f64, y: f64) -> f64 {
    // The lift is strictly increasing and within amp/2π of the identity.
    let forward = |x: f64| x + amp / TAU * (TAU * (x - phase)).sin();
    let reach = amp.abs() / TAU + 1e-15;
    let (mut lo, mut hi) = (y - reach, y + reach);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if forward(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub domain: Span,
    pub rule: Rule,
}

/// A generator `g` with domain `U_g` (a finite union of half-open pieces).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalMap {
    pub id: u32,
    pub name: String,
    pub pieces: Vec<Piece>,
    /// Verified upper bound of the Lipschitz constant on each piece.
    pub lipschitz: f64,
    pub inverse_id: u32,
}

impl LocalMap {
    pub fn identity(id: u32) -> Self {
        LocalMap {
            id,
            name: "e".into(),
            pieces: vec![Piece {
                domain: Span::full(),
                rule: Rule::Identity,
            }],
            lipschitz: 1.0,
            inverse_id: id,
        }
    }

    pub fn single(id: u32, name: &str, domain: Span, rule: Rule, lipschitz: f64, inverse_id: u32) -> Self {
        LocalMap {
            id,
            name: name.into(),
            pieces: vec![Piece { domain, rule }],
            lipschitz,
            inverse_id,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.pieces.len() == 1 && self.pieces[0].rule.is_identity()
    }

    #[inline]
    fn piece_of(&self, x: f64) -> Option<&Piece> {
        if self.is_identity() {
            return Some(&self.pieces[0]);
        }
        self.pieces.iter().find(|p| p.domain.contains(x))
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.piece_of(x).is_some()
    }
}

/// A finite symmetric generating set `G₁` on a compact space.
#[derive(Clone, Debug)]
pub struct GeneratingSet {
    space: CompactSpace,
    maps: Vec<LocalMap>,
    inverse: Vec<Letter>,
    identity: Letter,
    lipschitz_max: f64,
    single_piece: Vec<bool>,
}

impl GeneratingSet {
    /// Validates and builds a generating set: ids unique, identity present,
    /// closed under inverses, each map injective into the space, inverse
    /// consistency and the declared Lipschitz bounds checked on samples.
    pub fn new(space: CompactSpace, mut maps: Vec<LocalMap>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidGeneratingSet("no generators".into()));
        }
        if maps.len() > 64 {
            return Err(Error::InvalidGeneratingSet(
                "at most 64 generators are supported".into(),
            ));
        }
        maps.sort_by_key(|m| m.id);
        for w in maps.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::InvalidGenerator {
                    id: w[0].id,
                    reason: "duplicate id".into(),
                });
            }
        }
        let index_of = |id: u32| maps.iter().position(|m| m.id == id);
        let mut inverse = Vec::with_capacity(maps.len());
        for m in &maps {
            let inv = index_of(m.inverse_id).ok_or_else(|| Error::InvalidGenerator {
                id: m.id,
                reason: format!("inverse id {} is not in the set", m.inverse_id),
            })?;
            inverse.push(inv as Letter);
        }
        for (i, m) in maps.iter().enumerate() {
            if inverse[inverse[i] as usize] as usize != i {
                return Err(Error::InvalidGenerator {
                    id: m.id,
                    reason: "inverse relation is not symmetric".into(),
                });
            }
            if m.pieces.is_empty() {
                return Err(Error::InvalidGenerator {
                    id: m.id,
                    reason: "empty domain".into(),
                });
            }
            if !(m.lipschitz >= 0.0) || !m.lipschitz.is_finite() {
                return Err(Error::InvalidGenerator {
                    id: m.id,
                    reason: "lipschitz must be a finite nonnegative real".into(),
                });
            }
            for p in &m.pieces {
                p.rule
                    .check()
                    .map_err(|reason| Error::InvalidGenerator { id: m.id, reason })?;
                let ok_span = (0.0..=1.0).contains(&p.domain.start)
                    && (0.0..=1.0).contains(&p.domain.end)
                    && (p.domain.start < p.domain.end || (space.is_circle() && p.domain.start > p.domain.end));
                if !ok_span && !p.rule.is_identity() {
                    return Err(Error::InvalidGenerator {
                        id: m.id,
                        reason: format!("bad domain piece [{}, {})", p.domain.start, p.domain.end),
                    });
                }
            }
            if m.pieces.iter().any(|p| p.rule.is_identity()) && !m.is_identity() {
                return Err(Error::InvalidGenerator {
                    id: m.id,
                    reason: "identity rule must be the only piece".into(),
                });
            }
            if m.is_identity() && inverse[i] as usize != i {
                return Err(Error::InvalidGenerator {
                    id: m.id,
                    reason: "identity must be its own inverse".into(),
                });
            }
            check_disjoint(m)?;
        }
        let identity =
            maps.iter()
                .position(LocalMap::is_identity)
                .ok_or_else(|| Error::InvalidGeneratingSet("identity map e is missing".into()))? as Letter;
        let lipschitz_max = maps.iter().map(|m| m.lipschitz).fold(0.0, f64::max);
        let single_piece = maps.iter().map(|m| m.pieces.len() == 1).collect();
        let set = GeneratingSet {
            space,
            maps,
            inverse,
            identity,
            lipschitz_max,
            single_piece,
        };
        set.verify_samples()?;
        Ok(set)
    }

    pub fn space(&self) -> CompactSpace {
        self.space
    }

    pub fn maps(&self) -> &[LocalMap] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn identity(&self) -> Letter {
        self.identity
    }

    #[inline]
    pub fn inverse(&self, h: Letter) -> Letter {
        self.inverse[h as usize]
    }

    /// `L`: the largest generator Lipschitz constant.
    pub fn lipschitz_max(&self) -> f64 {
        self.lipschitz_max
    }

    pub fn lipschitz(&self, h: Letter) -> f64 {
        self.maps[h as usize].lipschitz
    }

    pub(crate) fn is_single_piece(&self, h: Letter) -> bool {
        self.single_piece[h as usize]
    }

    pub fn letter_of(&self, id: u32) -> Option<Letter> {
        self.maps.iter().position(|m| m.id == id).map(|i| i as Letter)
    }

    pub fn letter_named(&self, name: &str) -> Option<Letter> {
        self.maps.iter().position(|m| m.name == name).map(|i| i as Letter)
    }

    pub fn name(&self, h: Letter) -> &str {
        &self.maps[h as usize].name
    }

    #[inline]
    pub fn in_domain(&self, h: Letter, x: f64) -> bool {
        self.maps[h as usize].contains(x)
    }

    /// `h(x)` reduced into the space, or `None` if `x ∉ U_h`.
    #[inline]
    pub fn apply(&self, h: Letter, x: f64) -> Option<f64> {
        let piece = self.maps[h as usize].piece_of(x)?;
        if piece.rule.is_identity() {
            return Some(x);
        }
        Some(self.space.reduce(piece.rule.eval(x)))
    }

    /// Letters allowed after `last` in a reduced word: no identity letter and
    /// no cancellation.
    #[inline]
    pub fn reduced_successor(&self, last: Option<Letter>, h: Letter) -> bool {
        h != self.identity && last.is_none_or(|l| self.inverse(l) != h)
    }

    /// Bitmask of letters `k` whose domain meets the image of `h`, fattened
    /// by `fatten`, excluding `e` and `h⁻¹`. Index `len()` holds the mask for
    /// the root (every non-identity letter).
    pub(crate) fn follower_masks(&self, fatten: f64) -> Vec<u64> {
        let n = self.len();
        let all: u64 = (0..n)
            .filter(|&k| k as Letter != self.identity)
            .fold(0, |acc, k| acc | (1u64 << k));
        let mut masks = Vec::with_capacity(n + 1);
        for h in 0..n {
            let image = self.image_segments(h as Letter, fatten);
            let mut mask = 0u64;
            for k in 0..n {
                let kl = k as Letter;
                if kl == self.identity || kl == self.inverse(h as Letter) {
                    continue;
                }
                let meets = self.maps[k].pieces.iter().any(|p| {
                    if p.rule.is_identity() {
                        return true;
                    }
                    p.domain
                        .segments()
                        .iter()
                        .any(|&(a, b)| image.iter().any(|seg| seg.meets(a, b)))
                });
                if meets {
                    mask |= 1 << k;
                }
            }
            masks.push(mask);
        }
        masks.push(all);
        masks
    }

    fn image_segments(&self, h: Letter, fatten: f64) -> Vec<ImageSeg> {
        let full = vec![ImageSeg {
            lo: -1.0,
            hi: 2.0,
            hi_open: false,
        }];
        let mut out = Vec::new();
        for piece in &self.maps[h as usize].pieces {
            let rule = piece.rule;
            if rule.is_identity() {
                return full;
            }
            if self.space.is_circle() {
                match rule {
                    Rule::Affine { slope, offset } => {
                        let len = slope.abs() * piece.domain.length();
                        if len + 2.0 * fatten >= 1.0 {
                            return full;
                        }
                        let start = if slope > 0.0 {
                            slope * piece.domain.start + offset
                        } else {
                            slope * piece.domain.end + offset
                        };
                        let start = wrap_unit(start - fatten);
                        let arc = Span::new(start, wrap_unit(start + len + 2.0 * fatten));
                        let open = fatten == 0.0 && slope > 0.0;
                        for (lo, hi) in arc.segments() {
                            out.push(ImageSeg { lo, hi, hi_open: open });
                        }
                    }
                    _ => return full,
                }
                continue;
            }
            match rule {
                Rule::Affine { .. } | Rule::Moebius { .. } => {
                    let (a, b) = (piece.domain.start, piece.domain.end);
                    if let Rule::Moebius { c, d, .. } = rule {
                        // pole inside the piece: no monotone image
                        if c != 0.0 {
                            let pole = -d / c;
                            if pole >= a && pole <= b {
                                return full;
                            }
                        }
                    }
                    let (fa, fb) = (rule.eval(a), rule.eval(b));
                    let increasing = fb >= fa;
                    let (lo, hi) = if increasing { (fa, fb) } else { (fb, fa) };
                    out.push(ImageSeg {
                        lo: lo - fatten,
                        hi: hi + fatten,
                        hi_open: increasing && fatten == 0.0,
                    });
                }
                _ => return full,
            }
        }
        out
    }

    fn verify_samples(&self) -> Result<()> {
        let space = self.space;
        let mut rng = sampler(0x6E4E_5E75);
        for (i, m) in self.maps.iter().enumerate() {
            if m.is_identity() {
                continue;
            }
            let h = i as Letter;
            let inv = self.inverse(h);
            let fail = |reason: String| Error::InvalidGenerator { id: m.id, reason };
            let mut worst_ratio: f64 = 0.0;
            for _ in 0..LIPSCHITZ_SAMPLES {
                let piece = &m.pieces[rng.random_range(0..m.pieces.len())];
                let p = piece.domain.sample(rng.random::<f64>());
                let q = piece.domain.sample(rng.random::<f64>());
                if !piece.domain.contains(p) || !piece.domain.contains(q) {
                    continue;
                }
                let raw = piece.rule.eval(p);
                if !raw.is_finite() {
                    return Err(fail(format!("rule is not finite at {p}")));
                }
                if !space.is_circle() && !(-1e-12..=1.0 + 1e-12).contains(&raw) {
                    return Err(fail(format!("maps {p} to {raw}, outside the interval")));
                }
                let gp = self.apply(h, p).expect("p in domain");
                let gq = self.apply(h, q).expect("q in domain");
                let back = self
                    .apply(inv, gp)
                    .ok_or_else(|| fail(format!("g({p}) = {gp} is outside the inverse's domain")))?;
                if space.dist(back, p) > INVERSE_TOLERANCE {
                    return Err(fail(format!("inverse consistency fails at {p}: g^-1(g(p)) = {back}")));
                }
                let dpq = space.dist(p, q);
                let dimg = space.dist(gp, gq);
                if dpq > 0.0 {
                    if dimg == 0.0 {
                        return Err(fail(format!("not injective: {p} and {q} collide")));
                    }
                    worst_ratio = worst_ratio.max(dimg / dpq);
                    if dimg > m.lipschitz * dpq * (1.0 + 1e-9) + 1e-12 {
                        return Err(fail(format!(
                            "declared lipschitz {} is violated: ratio {} at ({p}, {q})",
                            m.lipschitz,
                            dimg / dpq
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct ImageSeg {
    lo: f64,
    hi: f64,
    hi_open: bool,
}

impl ImageSeg {
    /// Does the segment meet the half-open interval `[a, b)`?
    fn meets(&self, a: f64, b: f64) -> bool {
        let upper_ok = if self.hi_open { a < self.hi } else { a <= self.hi };
        self.lo < b && upper_ok
    }
}

fn check_disjoint(m: &LocalMap) -> Result<()> {
    let mut segs: Vec<(f64, f64)> = m.pieces.iter().flat_map(|p| p.domain.segments()).collect();
    segs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in segs.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::InvalidGenerator {
                id: m.id,
                reason: "domain pieces overlap".into(),
            });
        }
    }
    Ok(())
}

impl GeneratingSet {
    /// Does the set contain any map other than the identity whose declared
    /// Lipschitz constant is at least one?
    pub fn has_noncontracting(&self) -> bool {
        self.maps.iter().any(|m| !m.is_identity() && m.lipschitz >= 1.0)
    }

    pub fn describe_rule(&self, h: Letter) -> Vec<Rule> {
        self.maps[h as usize].pieces.iter().map(|p| p.rule).collect()
    }
}

/// A word over `G₁`, stored in application order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Builds a word from letters listed in application order.
    pub fn from_applied(letters: Vec<Letter>) -> Self {
        Word(letters)
    }

    /// Builds a word from the notation `(h₁, …, h_k)`, i.e. the composite
    /// `h₁∘⋯∘h_k` with `h_k` applied first.
    pub fn from_notation(letters: &[Letter]) -> Self {
        Word(letters.iter().rev().copied().collect())
    }

    pub fn applied(&self) -> &[Letter] {
        &self.0
    }

    pub fn notation(&self) -> Vec<Letter> {
        self.0.iter().rev().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `(h, self)`: apply `self` first, then `h`.
    pub fn then(&self, h: Letter) -> Word {
        let mut v = self.0.clone();
        v.push(h);
        Word(v)
    }

    /// `(self, g)`: apply `g` first, then `self`.
    pub fn after(&self, g: &Word) -> Word {
        let mut v = g.0.clone();
        v.extend_from_slice(&self.0);
        Word(v)
    }

    /// No adjacent `(g, g⁻¹)` pair and no identity letter.
    pub fn is_reduced(&self, gens: &GeneratingSet) -> bool {
        let mut last = None;
        for &h in &self.0 {
            if !gens.reduced_successor(last, h) {
                return false;
            }
            last = Some(h);
        }
        true
    }

    /// Free reduction: drops identity letters and cancels adjacent inverse
    /// pairs.
    pub fn reduce(&self, gens: &GeneratingSet) -> Word {
        let mut out: Vec<Letter> = Vec::with_capacity(self.0.len());
        for &h in &self.0 {
            if h == gens.identity() {
                continue;
            }
            match out.last() {
                Some(&l) if gens.inverse(l) == h => {
                    out.pop();
                }
                _ => out.push(h),
            }
        }
        Word(out)
    }

    /// Human-readable composite `h₁∘⋯∘h_k` using generator names.
    pub fn describe(&self, gens: &GeneratingSet) -> String {
        if self.0.is_empty() {
            return "e".into();
        }
        self.0
            .iter()
            .rev()
            .map(|&h| gens.name(h).to_string())
            .collect::<Vec<_>>()
            .join("∘")
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, h) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{h}")?;
        }
        write!(f, "]")
    }
}

/// Applies the letters right-to-left (first applied first), checking domain
/// membership at every stage.
pub fn evaluate(gens: &GeneratingSet, w: &Word, p: Point) -> Option<Point> {
    let mut x = p.coord();
    for &h in w.applied() {
        x = gens.apply(h, x)?;
    }
    Some(gens.space().reduce_point(x))
}

/// Product of letter Lipschitz constants.
pub fn word_lipschitz(gens: &GeneratingSet, w: &Word) -> f64 {
    w.applied().iter().map(|&h| gens.lipschitz(h)).product()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnumerationMode {
    /// All `|G₁|ⁿ` tuples of length exactly `n`.
    Raw,
    /// All reduced words of length at most `n`.
    Reduced,
}

/// Deterministic stream of words.
///
/// Raw mode yields the tuples of length `n` in lexicographic order of the
/// application sequence. Reduced mode yields every reduced word of length at
/// most `n` in depth-first pre-order of the application tree, children in id
/// order (so the empty word comes first). The stream order does not depend
/// on the number of threads; [`word_partitions`] splits it by prefix.
pub fn enumerate_words(gens: &GeneratingSet, n: usize, mode: EnumerationMode) -> WordStream<'_> {
    WordStream::new(gens, n, mode, Word::empty())
}

/// Words of the stream that start (in application order) with `prefix`.
pub fn enumerate_words_with_prefix<'a>(
    gens: &'a GeneratingSet,
    n: usize,
    mode: EnumerationMode,
    prefix: Word,
) -> WordStream<'a> {
    WordStream::new(gens, n, mode, prefix)
}

/// Prefixes of length `depth` (or shorter complete words, in reduced mode)
/// whose streams concatenate to the full stream, in stream order.
pub fn word_partitions(gens: &GeneratingSet, n: usize, mode: EnumerationMode, depth: usize) -> Vec<Word> {
    let depth = depth.min(n);
    match mode {
        EnumerationMode::Raw => enumerate_words(gens, depth, EnumerationMode::Raw).collect(),
        EnumerationMode::Reduced => enumerate_words(gens, depth, EnumerationMode::Reduced)
            .filter(|w| w.len() == depth)
            .collect(),
    }
}

pub struct WordStream<'a> {
    gens: &'a GeneratingSet,
    n: usize,
    mode: EnumerationMode,
    prefix_len: usize,
    current: Vec<Letter>,
    started: bool,
    done: bool,
}

impl<'a> WordStream<'a> {
    fn new(gens: &'a GeneratingSet, n: usize, mode: EnumerationMode, prefix: Word) -> Self {
        let prefix_len = prefix.len();
        let done = prefix_len > n || (mode == EnumerationMode::Reduced && !prefix.is_reduced(gens));
        WordStream {
            gens,
            n,
            mode,
            prefix_len,
            current: prefix.0,
            started: false,
            done,
        }
    }

    fn first_child(&self, last: Option<Letter>) -> Option<Letter> {
        self.next_sibling(last, None)
    }

    fn next_sibling(&self, last: Option<Letter>, after: Option<Letter>) -> Option<Letter> {
        let start = after.map_or(0, |a| a as usize + 1);
        (start..self.gens.len())
            .map(|k| k as Letter)
            .find(|&k| self.gens.reduced_successor(last, k))
    }

    fn advance_reduced(&mut self) -> bool {
        // descend if possible
        if self.current.len() < self.n {
            if let Some(h) = self.first_child(self.current.last().copied()) {
                self.current.push(h);
                return true;
            }
        }
        // otherwise move to the next sibling, backtracking as needed
        while self.current.len() > self.prefix_len {
            let h = self.current.pop().expect("nonempty");
            let last = self.current.last().copied();
            if let Some(s) = self.next_sibling(last, Some(h)) {
                self.current.push(s);
                return true;
            }
        }
        false
    }

    fn advance_raw(&mut self) -> bool {
        let k = self.gens.len() as Letter;
        let mut i = self.current.len();
        while i > self.prefix_len {
            i -= 1;
            if self.current[i] + 1 < k {
                self.current[i] += 1;
                for c in &mut self.current[i + 1..] {
                    *c = 0;
                }
                return true;
            }
        }
        false
    }
}

impl Iterator for WordStream<'_> {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            if self.mode == EnumerationMode::Raw {
                self.current.resize(self.n, 0);
            }
            return Some(Word(self.current.clone()));
        }
        let moved = match self.mode {
            EnumerationMode::Raw => self.advance_raw(),
            EnumerationMode::Reduced => self.advance_reduced(),
        };
        if moved {
            Some(Word(self.current.clone()))
        } else {
            self.done = true;
            None
        }
    }
}
