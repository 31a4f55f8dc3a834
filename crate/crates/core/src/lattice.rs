//! Space-time primitives: sites live on the integers, time on the
//! nonnegative reals. Boxes are half-open products [x_lo, x_hi) x [t_lo, t_hi).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub x: i64,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: i64, t: f64) -> Self {
        SpaceTimePoint { x, t }
    }
}

/// A point of the continuum plane; reference points of coarse-graining
/// windows live here rather than on the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanePoint {
    pub x: f64,
    pub t: f64,
}

impl PlanePoint {
    pub fn new(x: f64, t: f64) -> Self {
        PlanePoint { x, t }
    }
}

impl From<SpaceTimePoint> for PlanePoint {
    fn from(p: SpaceTimePoint) -> Self {
        PlanePoint { x: p.x as f64, t: p.t }
    }
}

/// Half-open space-time box with real corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeBox {
    pub x_lo: f64,
    pub x_hi: f64,
    pub t_lo: f64,
    pub t_hi: f64,
}

/// Time gap between two boxes; `overlapping` marks boxes whose time intervals
/// intersect, in which case the gap is reported as zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGap {
    pub gap: f64,
    pub overlapping: bool,
}

impl SpaceTimeBox {
    pub fn new(x_lo: f64, x_hi: f64, t_lo: f64, t_hi: f64) -> Result<Self> {
        if !(x_lo < x_hi) || !(t_lo < t_hi) {
            return Err(Error::param(format!(
                "degenerate box [{x_lo}, {x_hi}) x [{t_lo}, {t_hi})"
            )));
        }
        if !(x_lo.is_finite() && x_hi.is_finite() && t_lo.is_finite() && t_hi.is_finite()) {
            return Err(Error::param("box corners must be finite"));
        }
        Ok(SpaceTimeBox { x_lo, x_hi, t_lo, t_hi })
    }

    pub fn contains(&self, x: f64, t: f64) -> bool {
        x >= self.x_lo && x < self.x_hi && t >= self.t_lo && t < self.t_hi
    }

    /// Lattice sites whose spatial coordinate falls in [x_lo, x_hi).
    pub fn sites(&self) -> std::ops::Range<i64> {
        let lo = self.x_lo.ceil() as i64;
        // Half-open on the right: an integer right edge is excluded.
        let hi = if self.x_hi.fract() == 0.0 {
            self.x_hi as i64
        } else {
            self.x_hi.floor() as i64 + 1
        };
        lo..hi.max(lo)
    }

    pub fn time_span(&self) -> f64 {
        self.t_hi - self.t_lo
    }

    pub fn side_lengths(&self) -> (f64, f64) {
        (self.x_hi - self.x_lo, self.t_hi - self.t_lo)
    }
}

/// Time distance between boxes: the gap between their time intervals,
/// regardless of spatial location. Touching intervals ([0,2) then [2,3)) have
/// gap zero without counting as overlap.
pub fn time_distance(a: &SpaceTimeBox, b: &SpaceTimeBox) -> TimeGap {
    if a.t_hi <= b.t_lo {
        TimeGap { gap: b.t_lo - a.t_hi, overlapping: false }
    } else if b.t_hi <= a.t_lo {
        TimeGap { gap: a.t_lo - b.t_hi, overlapping: false }
    } else {
        TimeGap { gap: 0.0, overlapping: true }
    }
}
