//! Compact one-dimensional metric spaces: the circle ℝ/ℤ with the arc metric
//! and the unit interval with the absolute difference.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Circle,
    Interval,
}

impl SpaceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpaceKind::Circle => "circle",
            SpaceKind::Interval => "interval",
        }
    }
}

impl std::str::FromStr for SpaceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circle" => Ok(SpaceKind::Circle),
            "interval" => Ok(SpaceKind::Interval),
            other => Err(invalid(
                "space",
                format!("expected \"circle\" or \"interval\", got {other:?}"),
            )),
        }
    }
}

/// A point of a [`CompactSpace`]. Circle coordinates live in `[0, 1)`,
/// interval coordinates in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(f64);

impl Point {
    #[inline]
    pub fn coord(self) -> f64 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CompactSpace {
    kind: SpaceKind,
}

impl CompactSpace {
    pub const CIRCLE: CompactSpace = CompactSpace {
        kind: SpaceKind::Circle,
    };
    pub const INTERVAL: CompactSpace = CompactSpace {
        kind: SpaceKind::Interval,
    };

    pub fn new(kind: SpaceKind) -> Self {
        CompactSpace { kind }
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn is_circle(&self) -> bool {
        self.kind == SpaceKind::Circle
    }

    /// Validates a coordinate. Circle coordinates are reduced mod 1 (so `1.0`
    /// is the point `0.0`); interval coordinates must lie in `[0, 1]`.
    pub fn point(&self, coord: f64) -> Result<Point> {
        if !coord.is_finite() {
            return Err(Error::PointOutOfSpace {
                coord,
                space: self.kind.as_str(),
            });
        }
        match self.kind {
            SpaceKind::Circle => Ok(Point(wrap_unit(coord))),
            SpaceKind::Interval if (0.0..=1.0).contains(&coord) => Ok(Point(coord)),
            SpaceKind::Interval => Err(Error::PointOutOfSpace {
                coord,
                space: "interval",
            }),
        }
    }

    /// Brings an arbitrary real back into the space: wrap on the circle, clamp
    /// on the interval.
    #[inline]
    pub fn reduce(&self, coord: f64) -> f64 {
        match self.kind {
            SpaceKind::Circle => wrap_unit(coord),
            SpaceKind::Interval => coord.clamp(0.0, 1.0),
        }
    }

    #[inline]
    pub(crate) fn reduce_point(&self, coord: f64) -> Point {
        Point(self.reduce(coord))
    }

    #[inline]
    pub fn distance(&self, p: Point, q: Point) -> f64 {
        self.dist(p.0, q.0)
    }

    /// Distance on raw coordinates (assumed already in the space).
    #[inline]
    pub fn dist(&self, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        match self.kind {
            SpaceKind::Circle => d.min(1.0 - d),
            SpaceKind::Interval => d,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self.kind {
            SpaceKind::Circle => 0.5,
            SpaceKind::Interval => 1.0,
        }
    }

    /// Uniform grid with spacing at most `eps`, in increasing coordinate
    /// order. On the circle it has `ceil(1/eps)` points; on the interval it
    /// also contains the endpoint 1.
    pub fn epsilon_net(&self, eps: f64) -> Result<Vec<Point>> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(invalid("eps", format!("must be a positive real, got {eps}")));
        }
        let mut cells = (1.0 / eps).ceil().max(1.0) as usize;
        if 1.0 / cells as f64 > eps {
            cells += 1;
        }
        Ok(self.grid(cells))
    }

    /// The canonical grid `{k / cells}`: `cells` points on the circle,
    /// `cells + 1` on the interval.
    pub fn grid(&self, cells: usize) -> Vec<Point> {
        let cells = cells.max(1);
        let count = match self.kind {
            SpaceKind::Circle => cells,
            SpaceKind::Interval => cells + 1,
        };
        (0..count).map(|k| Point(k as f64 / cells as f64)).collect()
    }

    /// Forward displacement `b - a` along the circle orientation, in `[0, 1)`.
    /// On the interval this is the plain signed difference.
    #[inline]
    pub fn displacement(&self, a: f64, b: f64) -> f64 {
        match self.kind {
            SpaceKind::Circle => wrap_unit(b - a),
            SpaceKind::Interval => b - a,
        }
    }
}

/// Canonical floor-subtract reduction into `[0, 1)`.
#[inline]
pub(crate) fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}
