//! Multi-scale bookkeeping for walker displacement deviations.
//!
//! The objects here quantify how often a family of coupled walkers started
//! along a space interval deviates from a putative speed: the deviation
//! events and their probability estimators, threshold-crossing speed
//! brackets, the geometric ladder of scales the analysis recurses over, and
//! the trapped/threatened census for points of the plane whose local walker
//! family runs anomalously slowly.

pub mod estimate;

pub use estimate::{
    bracket_speeds, concentration_diagnostic, estimate_ph, estimate_ph_tilde, trapped_at,
    BracketPoint, ConcentrationTable, PhEstimate, SpeedBracket,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{PlanePoint, SpaceTimePoint};
use crate::walker::ensemble::CoupledEnsemble;
use crate::walker::WalkerPath;

/// Which growth exponent the ladder recursion uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderVariant {
    /// Ratios l_k = floor(L_k^(1/4)).
    Main,
    /// Ratios l_k = floor(L_k^(1/5)); the slower ladder the rectangle-soup
    /// construction is calibrated against.
    Counterexample,
}

impl LadderVariant {
    fn root(self) -> u32 {
        match self {
            LadderVariant::Main => 4,
            LadderVariant::Counterexample => 5,
        }
    }
}

/// One rung: the scale and the ratio to the next scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleEntry {
    pub scale: u64,
    pub ratio: u64,
}

/// Geometric ladder L_{k+1} = l_k * L_k with l_k = floor(L_k^(1/e)),
/// overflow-checked, with optional attached speed and density sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleLadder {
    pub variant: LadderVariant,
    pub entries: Vec<ScaleEntry>,
    /// v_{k+1} = v_k + 8/l_k from a caller-supplied base speed.
    pub speeds: Option<Vec<f64>>,
    /// rho_0 = 1, rho_{k+1} = rho_k - 2/l_k; every entry must stay >= 1/2.
    pub densities: Option<Vec<f64>>,
}

/// Largest integer r with r^e <= n.
fn integer_root(n: u64, e: u32) -> u64 {
    let pow = |r: u64| (r as u128).checked_pow(e);
    let mut r = (n as f64).powf(1.0 / e as f64).round() as u64;
    while pow(r).map_or(true, |p| p > n as u128) {
        r -= 1;
    }
    while pow(r + 1).map_or(false, |p| p <= n as u128) {
        r += 1;
    }
    r
}

/// Builds the ladder with entries for k = 0..=k_max, asserting the floor
/// identity l^e <= L < (l+1)^e and the two-sided growth bound
/// L^{1+1/e}/2 <= L_{k+1} <= L^{1+1/e} (in the exact integer form
/// 2^e * l^e >= L) at every rung.
pub fn build_ladder(variant: LadderVariant, l0: u64, k_max: usize) -> Result<ScaleLadder> {
    if l0 < 2 {
        return Err(Error::param(format!("base scale {l0} must be at least 2")));
    }
    let e = variant.root();
    let mut entries = Vec::with_capacity(k_max + 1);
    let mut scale = l0;
    for k in 0..=k_max {
        let ratio = integer_root(scale, e);
        let rp = (ratio as u128).pow(e);
        let rq = (ratio as u128 + 1).pow(e);
        if !(rp <= scale as u128 && (scale as u128) < rq) {
            return Err(Error::invariant(format!("root of {scale} miscomputed as {ratio}")));
        }
        if rp << e < scale as u128 {
            return Err(Error::invariant(format!(
                "scale {scale} fell below half of its power-law target at rung {k}"
            )));
        }
        entries.push(ScaleEntry { scale, ratio });
        if k < k_max {
            scale = ratio.checked_mul(scale).ok_or_else(|| {
                Error::param(format!("ladder overflows 64-bit scales at rung {}", k + 1))
            })?;
        }
    }
    Ok(ScaleLadder { variant, entries, speeds: None, densities: None })
}

impl ScaleLadder {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scale(&self, k: usize) -> u64 {
        self.entries[k].scale
    }

    pub fn ratio(&self, k: usize) -> u64 {
        self.entries[k].ratio
    }

    /// Attaches the speed sequence grown from `base` by 8/l_k per rung.
    pub fn with_speeds(mut self, base: f64) -> Result<Self> {
        if !base.is_finite() {
            return Err(Error::param(format!("base speed {base} must be finite")));
        }
        let mut v = base;
        let mut speeds = Vec::with_capacity(self.entries.len());
        for entry in &self.entries {
            speeds.push(v);
            v += 8.0 / entry.ratio as f64;
        }
        self.speeds = Some(speeds);
        Ok(self)
    }

    /// Attaches the density sequence shrunk from 1 by 2/l_k per rung; fails
    /// if any entry would drop below 1/2.
    pub fn with_densities(mut self) -> Result<Self> {
        let mut rho = 1.0f64;
        let mut densities = Vec::with_capacity(self.entries.len());
        for (k, entry) in self.entries.iter().enumerate() {
            if rho < 0.5 {
                return Err(Error::invariant(format!(
                    "density sequence falls below 1/2 at rung {k} ({rho})"
                )));
            }
            densities.push(rho);
            rho -= 2.0 / entry.ratio as f64;
        }
        self.densities = Some(densities);
        Ok(self)
    }
}

fn ensemble_duration(ensemble: &CoupledEnsemble, h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::param(format!("horizon {h} must be positive and finite")));
    }
    let d = ensemble.end_time - ensemble.start_time;
    if d + 1e-9 < h {
        return Err(Error::param(format!("ensemble spans {d}, event needs {h}")));
    }
    Ok(())
}

fn displacement_at(path: &WalkerPath, h: f64) -> Result<i64> {
    if let Some(t) = path.truncated {
        return Err(Error::truncated(t, "cannot adjudicate a truncated path"));
    }
    Ok(path.site_at(path.start.t + h) - path.start.x)
}

/// True iff some walker of the family has moved at least v*h to the right of
/// its own start by time h (inclusive).
pub fn event_a(ensemble: &CoupledEnsemble, v: f64, h: f64) -> Result<bool> {
    ensemble_duration(ensemble, h)?;
    for path in &ensemble.paths {
        if displacement_at(path, h)? as f64 >= v * h {
            return Ok(true);
        }
    }
    Ok(false)
}

/// True iff some walker of the family has fallen to at most v*h relative to
/// its own start by time h (inclusive).
pub fn event_a_tilde(ensemble: &CoupledEnsemble, v: f64, h: f64) -> Result<bool> {
    ensemble_duration(ensemble, h)?;
    for path in &ensemble.paths {
        if displacement_at(path, h)? as f64 <= v * h {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Floors the spatial coordinate to the grid of mesh floor(delta*h/4),
/// leaving time untouched. Idempotent and order-preserving in x.
pub fn round_point(y: PlanePoint, h: f64, delta: f64) -> Result<SpaceTimePoint> {
    if !(delta > 0.0 && delta.is_finite() && h > 0.0 && h.is_finite()) {
        return Err(Error::param(format!("bad rounding parameters h={h}, delta={delta}")));
    }
    let mesh = (delta * h / 4.0).floor();
    if mesh < 1.0 {
        return Err(Error::param(format!(
            "horizon {h} too small for rounding mesh (needs h >= {})",
            4.0 / delta
        )));
    }
    let mesh_i = mesh as i64;
    let x = (y.x / mesh).floor() as i64 * mesh_i;
    Ok(SpaceTimePoint { x, t: y.t })
}

/// Lattice starts of the census window w + [delta*h, 2*delta*h] x {0},
/// inclusive at both ends.
pub fn census_starts(w: PlanePoint, h: f64, delta: f64) -> Result<Vec<i64>> {
    if !(delta > 0.0 && h > 0.0 && delta.is_finite() && h.is_finite()) {
        return Err(Error::param(format!("bad census parameters h={h}, delta={delta}")));
    }
    let lo = (w.x + delta * h).ceil() as i64;
    let hi = (w.x + 2.0 * delta * h).floor() as i64;
    if lo > hi {
        return Err(Error::param(format!(
            "census window [{}, {}] contains no lattice starts",
            w.x + delta * h,
            w.x + 2.0 * delta * h
        )));
    }
    Ok((lo..=hi).collect())
}

/// True iff some walker started in w + [delta*h, 2*delta*h] x {0} has
/// displacement at most (v_minus + delta)*h by time h (inclusive). The
/// ensemble must cover every lattice start of that window.
pub fn is_trapped(
    w: PlanePoint,
    h: f64,
    delta: f64,
    v_minus: f64,
    ensemble: &CoupledEnsemble,
) -> Result<bool> {
    ensemble_duration(ensemble, h)?;
    let threshold = (v_minus + delta) * h;
    for s in census_starts(w, h, delta)? {
        let path = ensemble
            .paths
            .iter()
            .find(|p| p.start.x == s)
            .ok_or_else(|| Error::param(format!("ensemble has no walker started at {s}")))?;
        if displacement_at(path, h)? as f64 <= threshold {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Disjunction of the trap oracle over the r anchors w + j*h*(v_plus, 1),
/// j = 0..r-1: the trajectory of a speed-v_plus observer is threatened when
/// any of the next r windows along it is trapped.
pub fn is_threatened(
    w: PlanePoint,
    h: f64,
    r: i64,
    v_plus: f64,
    trap: &mut dyn FnMut(PlanePoint) -> Result<bool>,
) -> Result<bool> {
    if r < 1 {
        return Err(Error::param(format!("anchor count {r} must be at least 1")));
    }
    for j in 0..r {
        let anchor = PlanePoint { x: w.x + j as f64 * h * v_plus, t: w.t + j as f64 * h };
        if trap(anchor)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Fraction of ladder checkpoints along a path whose rounded position is
/// threatened at the base scale. The path must span h*L_k for some rung
/// k > k_bar; checkpoints sit at times j*h*L_{k_bar+1}, their positions are
/// floored to the mesh of h*L_{k_bar}, and each is tested with r = l_{k_bar}
/// anchors.
pub fn threatened_density(
    path: &WalkerPath,
    h: f64,
    ladder: &ScaleLadder,
    k_bar: usize,
    delta: f64,
    v_plus: f64,
    trap: &mut dyn FnMut(PlanePoint) -> Result<bool>,
) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::param(format!("block length {h} must be positive and finite")));
    }
    if k_bar + 1 >= ladder.len() {
        return Err(Error::param(format!(
            "base rung {k_bar} needs at least {} ladder entries, have {}",
            k_bar + 2,
            ladder.len()
        )));
    }
    let duration = path.duration();
    let k = (k_bar + 1..ladder.len())
        .find(|&k| {
            let want = h * ladder.scale(k) as f64;
            (duration - want).abs() <= 1e-9 * want
        })
        .ok_or_else(|| {
            Error::param(format!("path spans {duration}, matching no ladder scale above {k_bar}"))
        })?;
    let step_scale = ladder.scale(k_bar + 1);
    let count = ladder.scale(k) / step_scale;
    if count * step_scale != ladder.scale(k) {
        return Err(Error::invariant("ladder scales lost divisibility"));
    }
    let base_h = h * ladder.scale(k_bar) as f64;
    let r = ladder.ratio(k_bar) as i64;
    let mut hits = 0u64;
    for j in 0..count {
        let t = path.start.t + j as f64 * h * step_scale as f64;
        let pos = path.site_at(t);
        let rounded = round_point(PlanePoint { x: pos as f64, t }, base_h, delta)?;
        if is_threatened(rounded.into(), base_h, r, v_plus, trap)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / count as f64)
}
