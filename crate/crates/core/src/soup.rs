//! Multi-scale rectangle soup: independent planar Poisson arrangements of
//! tilted black and white rectangles, one per ladder rung, whose color field
//! drives a drift walker. Large same-scale rectangles give the walker
//! scale-free two-sided fluctuations, while the touch-probability geometry
//! shows the color field still decorrelates in time.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clock::{Clocks, LazyClockField};
use crate::env::{Environment, ModelParams};
use crate::error::{Error, Result};
use crate::lattice::{PlanePoint, SpaceTimeBox, SpaceTimePoint};
use crate::mixing::{fit_decay, DecayFit};
use crate::renorm::{build_ladder, LadderVariant, ScaleLadder};
use crate::rng::{stream, SplitRng};
use crate::stats::{normal_quantile, proportion_ci, EstimateWithCI};
use crate::walker::{run_walker, JumpRule, Preset, WalkerPath};

/// sin / cos of the 30 degree tilt from the vertical axis.
const SIN_TILT: f64 = 0.5;
const COS_TILT: f64 = 0.866025403784438646;

/// Confidence level for every interval reported by this module.
const LEVEL: f64 = 0.99;

/// Ladder depth used by desk-scale runs; rungs above it are absent, which is
/// exactly why the simulated field mixes perfectly beyond the largest length.
pub const DESK_K_MAX: usize = 2;

/// Refuse to sample a scale whose expected rectangle count explodes.
const MAX_EXPECTED_RECTS: f64 = 5e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RectColor {
    Black,
    White,
}

/// What a point of the plane reads: gray when uncovered, otherwise the color
/// of the covering rectangle of the largest scale (height breaks ties).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoupColor {
    Gray,
    Black,
    White,
}

impl SoupColor {
    /// Word value fed to the drift rule: gray 0, black 1, white 2.
    pub fn state(self) -> u16 {
        match self {
            SoupColor::Gray => 0,
            SoupColor::Black => 1,
            SoupColor::White => 2,
        }
    }
}

/// A rectangle tilted 30 degrees off vertical. Black leans right (its long
/// axis gains x as t grows), white leans left; the tilt is determined by the
/// color. `height` is the independent uniform mark used to break color ties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltedRect {
    pub center: PlanePoint,
    pub length: f64,
    pub width: f64,
    pub color: RectColor,
    pub height: f64,
}

impl TiltedRect {
    /// Unit vector of the long axis in (x, t) coordinates.
    fn axis(&self) -> (f64, f64) {
        match self.color {
            RectColor::Black => (SIN_TILT, COS_TILT),
            RectColor::White => (-SIN_TILT, COS_TILT),
        }
    }

    /// Half extents of the axis-aligned bounding box, (x, t).
    pub fn half_extents(&self) -> (f64, f64) {
        let (ux, ut) = self.axis();
        (
            (self.length * ux.abs() + self.width * ut.abs()) / 2.0,
            (self.length * ut.abs() + self.width * ux.abs()) / 2.0,
        )
    }

    /// Closed-set membership: boundary points count as covered.
    pub fn covers(&self, p: PlanePoint) -> bool {
        let (ux, ut) = self.axis();
        let dx = p.x - self.center.x;
        let dt = p.t - self.center.t;
        let along = dx * ux + dt * ut;
        let across = -dx * ut + dt * ux;
        along.abs() <= self.length / 2.0 && across.abs() <= self.width / 2.0
    }
}

/// True when the rectangle meets the closed box. Separating-axis test over
/// the two box normals and the two rectangle axes; touching counts.
pub fn rect_touches_box(rect: &TiltedRect, bx: &SpaceTimeBox) -> bool {
    let (ex, et) = rect.half_extents();
    if rect.center.x + ex < bx.x_lo || rect.center.x - ex > bx.x_hi {
        return false;
    }
    if rect.center.t + et < bx.t_lo || rect.center.t - et > bx.t_hi {
        return false;
    }
    let (ux, ut) = rect.axis();
    let corners = [
        (bx.x_lo, bx.t_lo),
        (bx.x_hi, bx.t_lo),
        (bx.x_lo, bx.t_hi),
        (bx.x_hi, bx.t_hi),
    ];
    for (ax, at, half) in [(ux, ut, rect.length / 2.0), (-ut, ux, rect.width / 2.0)] {
        let c = rect.center.x * ax + rect.center.t * at;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (px, pt) in corners {
            let v = px * ax + pt * at;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi < c - half || lo > c + half {
            return false;
        }
    }
    true
}

/// All rectangles of every scale that meet a generation window. Scale k has
/// length L_k from the slow ladder, width ln^2(L_k), and centers drawn as a
/// Poisson process of intensity L_k^{-2}; only rectangles actually touching
/// the window are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectangleSoup {
    pub ladder: ScaleLadder,
    pub window: SpaceTimeBox,
    pub seed: u64,
    /// scales[k] holds the kept scale-k rectangles, in draw order.
    pub scales: Vec<Vec<TiltedRect>>,
}

impl RectangleSoup {
    /// A soup with the ladder's rungs but no rectangles at all: every point
    /// reads gray, which turns the drift walker into the symmetric one.
    pub fn forced_gray(ladder: ScaleLadder, window: SpaceTimeBox, seed: u64) -> Self {
        let scales = vec![Vec::new(); ladder.len()];
        RectangleSoup { ladder, window, seed, scales }
    }

    pub fn total(&self) -> usize {
        self.scales.iter().map(Vec::len).sum()
    }

    /// One row per rectangle: scale,cx,cy,color,height.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "scale,cx,cy,color,height")?;
        for (k, rects) in self.scales.iter().enumerate() {
            let scale = self.ladder.scale(k);
            for r in rects {
                let color = match r.color {
                    RectColor::Black => "black",
                    RectColor::White => "white",
                };
                writeln!(f, "{scale},{},{},{color},{}", r.center.x, r.center.t, r.height)?;
            }
        }
        f.flush()?;
        Ok(())
    }
}

/// Samples the soup over `window`. Per scale, candidate centers fill the
/// window dilated by the rectangle diameter, so every rectangle that could
/// meet the window is drawn; the ones that miss it are dropped. Each scale
/// uses its own derived stream, making the output reproducible per
/// (seed, scale) and independent of `k_max` for the rungs they share. The
/// per-rectangle draw order (x, t, color, height) is part of that contract.
pub fn generate_soup(
    l0: u64,
    k_max: usize,
    window: SpaceTimeBox,
    seed: u64,
) -> Result<RectangleSoup> {
    let ladder = build_ladder(LadderVariant::Counterexample, l0, k_max)?;
    let degenerate = !(window.x_hi > window.x_lo && window.t_hi > window.t_lo);
    let root = SplitRng::new(seed).stream(stream::SOUP);
    let mut scales = Vec::with_capacity(ladder.len());
    for k in 0..ladder.len() {
        if degenerate {
            scales.push(Vec::new());
            continue;
        }
        let length = ladder.scale(k) as f64;
        let width = length.ln().powi(2);
        let d = length.hypot(width);
        let (xlo, xhi) = (window.x_lo - d, window.x_hi + d);
        let (tlo, thi) = (window.t_lo - d, window.t_hi + d);
        let mean = (xhi - xlo) * (thi - tlo) / (length * length);
        if !mean.is_finite() || mean > MAX_EXPECTED_RECTS {
            return Err(Error::param(format!(
                "scale {k} expects {mean:.3e} rectangles in the dilated window; cap is {MAX_EXPECTED_RECTS:.0e}"
            )));
        }
        let mut rng = root.index(k as u64);
        let n = rng.poisson(mean);
        let mut rects = Vec::new();
        for _ in 0..n {
            let cx = rng.range(xlo, xhi);
            let ct = rng.range(tlo, thi);
            let color = if rng.bernoulli(0.5) { RectColor::Black } else { RectColor::White };
            let height = rng.f64();
            let rect = TiltedRect { center: PlanePoint::new(cx, ct), length, width, color, height };
            if rect_touches_box(&rect, &window) {
                rects.push(rect);
            }
        }
        scales.push(rects);
    }
    Ok(RectangleSoup { ladder, window, seed, scales })
}

/// Color of the plane at `p`: gray when no rectangle covers it, otherwise
/// the covering color of the largest scale, taller rectangle winning ties
/// within a scale. The query window is closed; outside it is an error.
pub fn color_at(soup: &RectangleSoup, p: PlanePoint) -> Result<SoupColor> {
    let w = &soup.window;
    if !(p.x >= w.x_lo && p.x <= w.x_hi && p.t >= w.t_lo && p.t <= w.t_hi) {
        return Err(Error::param(format!(
            "color query ({}, {}) outside the generation window",
            p.x, p.t
        )));
    }
    for rects in soup.scales.iter().rev() {
        let mut best: Option<&TiltedRect> = None;
        for r in rects {
            let (ex, et) = r.half_extents();
            if (p.x - r.center.x).abs() > ex || (p.t - r.center.t).abs() > et {
                continue;
            }
            if r.covers(p) && best.is_none_or(|b| r.height > b.height) {
                best = Some(r);
            }
        }
        if let Some(r) = best {
            return Ok(match r.color {
                RectColor::Black => SoupColor::Black,
                RectColor::White => SoupColor::White,
            });
        }
    }
    Ok(SoupColor::Gray)
}

/// Read adapter turning a soup into a walker environment over the lattice
/// sites inside its window. Both accessors return the color at the query
/// point itself: along a fixed site's timeline the color only changes where
/// a rectangle edge crosses it, and clock rings almost surely avoid those
/// times, so no left limit is needed.
pub struct ColorField<'a> {
    soup: &'a RectangleSoup,
    sites: (i64, i64),
}

impl<'a> ColorField<'a> {
    pub fn new(soup: &'a RectangleSoup) -> Self {
        let sites = (soup.window.x_lo.ceil() as i64, soup.window.x_hi.floor() as i64);
        ColorField { soup, sites }
    }

    pub fn color(&self, p: PlanePoint) -> Result<SoupColor> {
        color_at(self.soup, p)
    }
}

impl Environment for ColorField<'_> {
    fn state_at(&mut self, x: i64, t: f64) -> Result<u16> {
        Ok(color_at(self.soup, PlanePoint::new(x as f64, t))?.state())
    }

    fn state_before(&mut self, x: i64, t: f64) -> Result<u16> {
        self.state_at(x, t)
    }

    fn site_window(&self) -> (i64, i64) {
        self.sites
    }

    fn horizon(&self) -> f64 {
        self.soup.window.t_hi
    }
}

/// Runs the color-reading walker: at each ring it jumps right with
/// probability 1/2 on gray, 9/10 on black, 1/10 on white, reading the color
/// at its own site at the ring time. All randomness comes from the soup and
/// the clock marks.
pub fn run_drift_walker<C: Clocks>(
    soup: &RectangleSoup,
    clocks: &mut C,
    start: SpaceTimePoint,
    duration: f64,
) -> Result<WalkerPath> {
    let mut field = ColorField::new(soup);
    let rule = JumpRule::Preset(Preset::ColorDrift);
    run_walker(&mut field, clocks, &rule, start, duration)
}

/// Tail frequencies of the drift walker at one ladder rung, next to the
/// matching run of a symmetric walker on a spin-flip field.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationRow {
    /// Rung length; also the run horizon.
    pub scale: u64,
    /// Frequency of X_L / L > 0.1.
    pub up: EstimateWithCI,
    /// Frequency of X_L / L < -0.1.
    pub down: EstimateWithCI,
    pub baseline_up: EstimateWithCI,
    pub baseline_down: EstimateWithCI,
    pub discards: u64,
    pub baseline_discards: u64,
}

/// Runs fresh soup + clocks per replica at each requested rung and horizon
/// L_k, tabulating how often the drift walker's empirical speed leaves
/// [-0.1, 0.1] on either side. A concentrating walker would push both
/// frequencies to zero as L grows; the soup keeps them bounded away from it.
/// The baseline columns rerun the same horizons with a symmetric
/// jump-when-occupied walker on a stationary spin-flip field (nu = 1,
/// rho = 1/2), the concentrating contrast case. `forced_gray` empties the
/// soup, which reduces the drift walker to a fair one.
pub fn fluctuation_experiment(
    l0: u64,
    scale_indices: &[usize],
    replicas: u64,
    forced_gray: bool,
    seed: u64,
) -> Result<Vec<FluctuationRow>> {
    if scale_indices.is_empty() {
        return Err(Error::param("no ladder rungs requested"));
    }
    if scale_indices.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("rung indices must be strictly increasing"));
    }
    if replicas < 2 {
        return Err(Error::param("fluctuation experiment needs at least two replicas"));
    }
    let depth = *scale_indices.last().unwrap();
    let ladder = build_ladder(LadderVariant::Counterexample, l0, depth)?;
    let baseline = ModelParams::SpinFlip { nu: 1.0, rho: 0.5 };
    let baseline_rule = JumpRule::Preset(Preset::FairWhenOccupied);
    let root = SplitRng::new(seed).stream(stream::REPLICA);
    let cap = replicas / 100;
    let mut rows = Vec::with_capacity(scale_indices.len());
    for &k in scale_indices {
        let scale = ladder.scale(k);
        let t = scale as f64;
        let margin = (t + 10.0 * t.sqrt() + 20.0).ceil();
        let window = SpaceTimeBox::new(-margin, margin, 0.0, t)?;
        let scale_root = root.index(k as u64);
        let start = SpaceTimePoint::new(0, 0.0);
        type Leg = Option<(bool, bool)>;
        let legs: Result<Vec<(Leg, Leg)>> = (0..replicas)
            .into_par_iter()
            .map(|i| {
                let sseed = scale_root.index(2 * i).next();
                let soup = if forced_gray {
                    RectangleSoup::forced_gray(ladder.clone(), window, sseed)
                } else {
                    generate_soup(l0, depth, window, sseed)?
                };
                let mut clocks = LazyClockField::new(1.0, t, sseed)?;
                let drift = match run_drift_walker(&soup, &mut clocks, start, t) {
                    Ok(path) => {
                        let v = path.displacement() as f64 / t;
                        Some((v > 0.1, v < -0.1))
                    }
                    Err(e) if e.is_discardable() => None,
                    Err(e) => return Err(e),
                };
                let bseed = scale_root.index(2 * i + 1).next();
                let mut env =
                    baseline.instantiate(-(margin as i64), margin as i64, t, bseed)?;
                let mut bclocks = LazyClockField::new(1.0, t, bseed)?;
                let base = match run_walker(&mut env, &mut bclocks, &baseline_rule, start, t) {
                    Ok(path) => {
                        let v = path.displacement() as f64 / t;
                        Some((v > 0.1, v < -0.1))
                    }
                    Err(e) if e.is_discardable() => None,
                    Err(e) => return Err(e),
                };
                Ok((drift, base))
            })
            .collect();
        let legs = legs?;
        let (mut kept_s, mut up_s, mut down_s) = (0u64, 0u64, 0u64);
        let (mut kept_b, mut up_b, mut down_b) = (0u64, 0u64, 0u64);
        for (drift, base) in &legs {
            if let Some((u, d)) = drift {
                kept_s += 1;
                up_s += *u as u64;
                down_s += *d as u64;
            }
            if let Some((u, d)) = base {
                kept_b += 1;
                up_b += *u as u64;
                down_b += *d as u64;
            }
        }
        let discards = replicas - kept_s;
        let baseline_discards = replicas - kept_b;
        if discards > cap || baseline_discards > cap {
            return Err(Error::stats(format!(
                "discarded {discards} drift and {baseline_discards} baseline replicas at scale {scale}; cap is {cap}"
            )));
        }
        rows.push(FluctuationRow {
            scale,
            up: proportion_ci(up_s, kept_s, LEVEL, seed)?,
            down: proportion_ci(down_s, kept_s, LEVEL, seed)?,
            baseline_up: proportion_ci(up_b, kept_b, LEVEL, seed)?,
            baseline_down: proportion_ci(down_b, kept_b, LEVEL, seed)?,
            discards,
            baseline_discards,
        });
    }
    Ok(rows)
}

/// Union bound on the probability that some rectangle meets both of two
/// boxes of side r^a separated by vertical distance r: per scale, expected
/// count (L_k + r^a)(ln^2 L_k + r^a) L_k^{-2}, summed over the scales whose
/// vertical reach cos30 L_k + sin30 ln^2 L_k spans the gap at all. Scales
/// that cannot reach contribute exactly zero and are dropped, which also
/// makes the curve decreasing in r.
pub fn soup_touch_bound(ladder: &ScaleLadder, r: f64, a: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::param(format!("separation {r} must be positive and finite")));
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::param(format!("box exponent {a} outside (0, 1)")));
    }
    let s = r.powf(a);
    let mut sum = 0.0;
    for k in 0..ladder.len() {
        let l = ladder.scale(k) as f64;
        let w = l.ln().powi(2);
        let reach = COS_TILT * l + SIN_TILT * w;
        if reach < r {
            continue;
        }
        sum += (l + s) * (w + s) / (l * l);
    }
    Ok(sum)
}

/// Estimates, per separation r, the probability that some rectangle of a
/// fresh desk-ladder soup touches both boxes B1 = [0, r^a]^2 and its copy
/// shifted r^a + r upward in time and tan30 (r^a + r) sideways, the
/// placement aligned with the black tilt axis. The union bound holds for
/// every placement at this time distance, and the aligned one is the
/// placement slanted rectangles can actually join: boxes stacked without the
/// sideways shift stop being jointly reachable once the cross-section drift
/// tan30 r outgrows the box, which would make the check vacuous. One soup
/// per replica is shared across the whole r grid (common random numbers),
/// the estimates must be nonincreasing in r and stay below the analytic
/// union bound within three standard errors, and the returned fit reports
/// how they decay.
pub fn soup_covariance_check(
    l0: u64,
    r_list: &[f64],
    a: f64,
    replicas: u64,
    seed: u64,
) -> Result<DecayFit> {
    if r_list.is_empty() {
        return Err(Error::param("no separations requested"));
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::param(format!("box exponent {a} outside (0, 1)")));
    }
    if !(r_list[0] > 0.0 && r_list[0].is_finite()) {
        return Err(Error::param("separations must be positive and finite"));
    }
    if r_list.windows(2).any(|w| !(w[1] > w[0] && w[1].is_finite())) {
        return Err(Error::param("separations must be strictly increasing"));
    }
    if replicas < 2 {
        return Err(Error::param("covariance check needs at least two replicas"));
    }
    let ladder = build_ladder(LadderVariant::Counterexample, l0, DESK_K_MAX)?;
    let r_max = *r_list.last().unwrap();
    let s_max = r_max.powf(a);
    let shift_max = SIN_TILT / COS_TILT * (s_max + r_max);
    let window = SpaceTimeBox::new(0.0, shift_max + s_max, 0.0, 2.0 * s_max + r_max)?;
    let root = SplitRng::new(seed).stream(stream::REPLICA);
    let hits: Result<Vec<Vec<bool>>> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let rseed = root.index(i).next();
            let soup = generate_soup(l0, DESK_K_MAX, window, rseed)?;
            Ok(r_list
                .iter()
                .map(|&r| {
                    let s = r.powf(a);
                    let shift = SIN_TILT / COS_TILT * (s + r);
                    let b1 = SpaceTimeBox { x_lo: 0.0, x_hi: s, t_lo: 0.0, t_hi: s };
                    let b2 = SpaceTimeBox {
                        x_lo: shift,
                        x_hi: shift + s,
                        t_lo: s + r,
                        t_hi: 2.0 * s + r,
                    };
                    soup.scales
                        .iter()
                        .flatten()
                        .any(|rect| rect_touches_box(rect, &b1) && rect_touches_box(rect, &b2))
                })
                .collect())
        })
        .collect();
    let hits = hits?;
    let z = normal_quantile(0.5 + LEVEL / 2.0)?;
    let mut pairs = Vec::with_capacity(r_list.len());
    let mut prev: Option<f64> = None;
    for (j, &r) in r_list.iter().enumerate() {
        let successes = hits.iter().filter(|row| row[j]).count() as u64;
        let est = proportion_ci(successes, replicas, LEVEL, seed)?;
        if let Some(p) = prev {
            if est.point > p {
                return Err(Error::stats(format!(
                    "touch probability rose from {p:.4} to {:.4} at r = {r}",
                    est.point
                )));
            }
        }
        let bound = soup_touch_bound(&ladder, r, a)?;
        let se = est.half_width / z;
        if est.point > bound + 3.0 * se {
            return Err(Error::stats(format!(
                "empirical touch probability {:.4} exceeds the union bound {bound:.4} at r = {r}",
                est.point
            )));
        }
        prev = Some(est.point);
        pairs.push((r, est.point, est.half_width));
    }
    fit_decay(&pairs)
}
