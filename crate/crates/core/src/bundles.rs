//! Foliated bundles: the entropy of the foliation is sandwiched between
//! `h_H/a` and `h_H/b`, where `h_H` is the entropy of the global holonomy
//! group acting on a fibre and `a ≥ b` are the extreme lengths of the
//! homotopy classes of the generators. Rescaling the generators to powers of
//! comparable length drives `a/b` to 1.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::pseudogroup::{GeneratingSet, Span};
use crate::separation::{estimate_from, point_table, EntropyEstimate};

/// Generator labels with the lengths of their homotopy classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolonomyPresentation {
    pub labels: Vec<String>,
    pub lengths: Vec<f64>,
}

impl HolonomyPresentation {
    pub fn new(labels: Vec<String>, lengths: Vec<f64>) -> Result<Self> {
        if lengths.is_empty() {
            return Err(invalid("lengths", "at least one generator length is required"));
        }
        if labels.len() != lengths.len() {
            return Err(invalid("labels", "one label per length"));
        }
        if let Some(l) = lengths.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(invalid("lengths", format!("lengths must be positive, got {l}")));
        }
        Ok(HolonomyPresentation { labels, lengths })
    }

    /// Labels `z1, z2, …`.
    pub fn from_lengths(lengths: Vec<f64>) -> Result<Self> {
        let labels = (1..=lengths.len()).map(|k| format!("z{k}")).collect();
        Self::new(labels, lengths)
    }

    /// `a`, the largest length.
    pub fn a(&self) -> f64 {
        self.lengths.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `b`, the smallest length.
    pub fn b(&self) -> f64 {
        self.lengths.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub h_holonomy: f64,
    pub a: f64,
    pub b: f64,
    /// `[h_H/a, h_H/b]` for the entropy of the foliation.
    pub lower: f64,
    pub upper: f64,
    /// The same sandwich for the pseudo-entropy, using `h_ps = h` on the
    /// holonomy group.
    pub ps_lower: f64,
    pub ps_upper: f64,
    /// `a/b`, the factor in `h_ps(F) ≤ (a/b)·h(F)`.
    pub ratio: f64,
    /// `upper/lower − 1`, or 0 for a degenerate interval at 0.
    pub relative_width: f64,
}

/// The sandwich `h_H/a ≤ h(F) ≤ h_H/b` and its pseudo-entropy version.
pub fn entropy_bounds(pres: &HolonomyPresentation, h_holonomy: f64) -> Result<BoundsReport> {
    if !(h_holonomy >= 0.0) || !h_holonomy.is_finite() {
        return Err(invalid(
            "entropy",
            format!("must be a finite nonnegative real, got {h_holonomy}"),
        ));
    }
    let (a, b) = (pres.a(), pres.b());
    let (lower, upper) = (h_holonomy / a, h_holonomy / b);
    Ok(BoundsReport {
        h_holonomy,
        a,
        b,
        lower,
        upper,
        ps_lower: lower,
        ps_upper: upper,
        ratio: a / b,
        relative_width: if lower > 0.0 { upper / lower - 1.0 } else { 0.0 },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaleReport {
    pub m: u64,
    /// `m_k = ⌊m / l_k⌋`.
    pub exponents: Vec<u64>,
    /// Labels of `H′₁` including inverses, which carry equal lengths.
    pub labels: Vec<String>,
    /// `m_k·l_k, (m_k + 1)·l_k` for each generator, in order.
    pub new_lengths: Vec<f64>,
    pub a_prime: f64,
    pub b_prime: f64,
    pub ratio: f64,
    /// `(m + 1 + b)/m`, with `b` the smallest original length.
    pub stated_bound: f64,
    /// `m/(m + 1 + b) ≤ a′/b′ ≤ (m + 1 + b)/m`.
    pub stated_bound_holds: bool,
    /// `(m + a)/(m − a)`, with `a` the largest original length.
    pub arithmetic_bound: f64,
    pub arithmetic_bound_holds: bool,
}

/// `⌊m / l⌋`, in integers whenever `l` is integral.
fn floor_div(m: u64, l: f64) -> u64 {
    if l.fract() == 0.0 && l < 9.0e15 {
        m / l as u64
    } else {
        (m as f64 / l).floor() as u64
    }
}

/// Replaces each `z_k` by `z_k^{m_k}, z_k^{m_k+1}` with `m_k = ⌊m/l_k⌋` and
/// evaluates both ratio bounds. Bounds are compared by cross-multiplication.
pub fn rescale_generators(pres: &HolonomyPresentation, m: u64) -> Result<RescaleReport> {
    let (a, b) = (pres.a(), pres.b());
    if (m as f64) < a {
        return Err(invalid(
            "m",
            format!("must be at least the largest length {a}, got {m}"),
        ));
    }
    let exponents: Vec<u64> = pres.lengths.iter().map(|&l| floor_div(m, l)).collect();
    let mut labels = Vec::new();
    let mut new_lengths = Vec::new();
    for ((label, &l), &mk) in pres.labels.iter().zip(&pres.lengths).zip(&exponents) {
        for e in [mk, mk + 1] {
            labels.push(format!("{label}^{e}"));
            new_lengths.push(e as f64 * l);
        }
    }
    labels.extend(
        pres.labels
            .iter()
            .zip(&exponents)
            .flat_map(|(label, &mk)| [format!("{label}^-{mk}"), format!("{label}^-{}", mk + 1)]),
    );
    let a_prime = new_lengths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let b_prime = new_lengths.iter().copied().fold(f64::INFINITY, f64::min);
    let mf = m as f64;
    let stated_bound_holds = a_prime * mf <= (mf + 1.0 + b) * b_prime && mf * b_prime <= (mf + 1.0 + b) * a_prime;
    let arithmetic_bound_holds = mf > a && a_prime * (mf - a) <= (mf + a) * b_prime;
    Ok(RescaleReport {
        m,
        exponents,
        labels,
        new_lengths,
        a_prime,
        b_prime,
        ratio: a_prime / b_prime,
        stated_bound: (mf + 1.0 + b) / mf,
        stated_bound_holds,
        arithmetic_bound: if mf > a { (mf + a) / (mf - a) } else { f64::INFINITY },
        arithmetic_bound_holds,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaleTrend {
    pub reports: Vec<RescaleReport>,
    /// Ratios are nonincreasing in `m` and the last lies within
    /// `(m + a)/(m − a)` of 1.
    pub toward_one: bool,
}

pub fn rescale_trend(pres: &HolonomyPresentation, ms: &[u64]) -> Result<RescaleTrend> {
    let reports: Vec<RescaleReport> = ms.iter().map(|&m| rescale_generators(pres, m)).collect::<Result<_>>()?;
    let nonincreasing = reports.windows(2).all(|w| w[1].ratio <= w[0].ratio);
    let last_bounded = reports.last().is_some_and(|r| r.arithmetic_bound_holds);
    Ok(RescaleTrend {
        toward_one: nonincreasing && last_bounded,
        reports,
    })
}

/// Parameters of the fibre estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuspensionParams {
    pub ns: Vec<usize>,
    pub eps: Vec<f64>,
    pub cells: usize,
    /// Fit only levels whose grid resolves `ε·L^{-n}`.
    pub require_resolved: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuspensionReport {
    pub fiber: EntropyEstimate,
    pub bounds: BoundsReport,
}

/// Estimates the entropy of a group acting on the fibre and feeds it into
/// [`entropy_bounds`]. Every generator must be a global map.
pub fn suspension_entropy(
    pres: &HolonomyPresentation,
    fiber: &Arc<GeneratingSet>,
    params: &SuspensionParams,
) -> Result<SuspensionReport> {
    for m in fiber.maps() {
        if m.pieces.len() != 1 || m.pieces[0].domain != Span::full() {
            return Err(invalid(
                "fiber",
                format!("generator `{}` is not globally defined", m.name),
            ));
        }
    }
    let table = point_table(fiber, &params.ns, &params.eps, params.cells)?;
    let fiber_estimate = estimate_from(&table, params.require_resolved)?;
    let bounds = entropy_bounds(pres, fiber_estimate.h)?;
    Ok(SuspensionReport {
        fiber: fiber_estimate,
        bounds,
    })
}
