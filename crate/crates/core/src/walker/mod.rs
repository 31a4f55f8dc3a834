//! Nearest-neighbor random walkers driven by per-site clocks.
//!
//! A walker sits at a site until that site's next clock arrival, reads the
//! environment word of radius `ell` as it was immediately before the arrival,
//! and moves by -1, 0, or +1 according to its jump rule and the arrival's
//! paired uniform. All rules map the uniform through consecutive intervals
//! ordered (right, stay, left), so walkers sharing clocks and uniforms make
//! consistent decisions.

pub mod ensemble;

use std::io::Write as IoWrite;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clock::{ClockStep, Clocks};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::lattice::SpaceTimePoint;

/// Named jump rules with fixed word radii.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Never moves.
    Still,
    /// Moves right at every arrival, ignoring the environment.
    AlwaysRight,
    /// Fair +-1 coin at every arrival, ignoring the environment.
    Fair,
    /// Fair +-1 coin while the current site is occupied, else stays.
    FairWhenOccupied,
    /// Steps toward an occupied neighbor; fair when both sides are
    /// occupied, stays when neither is.
    PullOccupied,
    /// Jumps right exactly when the right neighbor is empty, else stays;
    /// the rule a tracked vacancy of constrained dynamics follows.
    RightWhenRightEmpty,
    /// Reads a 3-state color at its own location: 1 drifts right (0.9/0.1),
    /// 2 drifts left (0.1/0.9), 0 is a fair coin.
    ColorDrift,
}

impl Preset {
    fn radius(self) -> i64 {
        match self {
            Preset::Still | Preset::AlwaysRight | Preset::Fair => 0,
            Preset::FairWhenOccupied | Preset::ColorDrift => 0,
            Preset::PullOccupied | Preset::RightWhenRightEmpty => 1,
        }
    }
}

/// A local jump rule: either a named preset or a dense probability table
/// over all environment words of radius `ell` with states below `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JumpRule {
    Preset(Preset),
    Table {
        ell: u32,
        base: u16,
        /// Per word index: (P(right), P(stay)); P(left) is the remainder.
        probs: Vec<(f64, f64)>,
    },
}

impl JumpRule {
    pub fn table(ell: u32, base: u16, probs: Vec<(f64, f64)>) -> Result<JumpRule> {
        if base == 0 {
            return Err(Error::param("table base must be positive"));
        }
        let width = 2 * ell as usize + 1;
        let expect = (base as usize)
            .checked_pow(width as u32)
            .ok_or_else(|| Error::param("table too large"))?;
        if probs.len() != expect {
            return Err(Error::param(format!(
                "table needs {expect} rows for base {base} radius {ell}, got {}",
                probs.len()
            )));
        }
        for &(pr, ps) in &probs {
            if !(pr >= 0.0 && ps >= 0.0 && pr + ps <= 1.0 + 1e-15) {
                return Err(Error::param(format!("bad probability row ({pr}, {ps})")));
            }
        }
        Ok(JumpRule::Table { ell, base, probs })
    }

    /// Word radius; the walker reads sites x-radius ..= x+radius.
    pub fn radius(&self) -> i64 {
        match self {
            JumpRule::Preset(p) => p.radius(),
            JumpRule::Table { ell, .. } => *ell as i64,
        }
    }

    /// Jump decision for the given word and uniform: +1, 0, or -1. The
    /// uniform is split into consecutive intervals (right, stay, left).
    pub fn eval(&self, word: &[u16], u: f64) -> i8 {
        debug_assert_eq!(word.len() as i64, 2 * self.radius() + 1);
        match self {
            JumpRule::Preset(Preset::Still) => 0,
            JumpRule::Preset(Preset::AlwaysRight) => 1,
            JumpRule::Preset(Preset::Fair) => {
                if u < 0.5 {
                    1
                } else {
                    -1
                }
            }
            JumpRule::Preset(Preset::FairWhenOccupied) => {
                if word[0] == 0 {
                    0
                } else if u < 0.5 {
                    1
                } else {
                    -1
                }
            }
            JumpRule::Preset(Preset::PullOccupied) => {
                let (l, r) = (word[0] > 0, word[2] > 0);
                match (l, r) {
                    (false, false) => 0,
                    (false, true) => 1,
                    (true, false) => -1,
                    (true, true) => {
                        if u < 0.5 {
                            1
                        } else {
                            -1
                        }
                    }
                }
            }
            JumpRule::Preset(Preset::RightWhenRightEmpty) => {
                if word[2] == 0 {
                    1
                } else {
                    0
                }
            }
            JumpRule::Preset(Preset::ColorDrift) => {
                let p_right = match word[0] {
                    0 => 0.5,
                    1 => 0.9,
                    _ => 0.1,
                };
                if u < p_right {
                    1
                } else {
                    -1
                }
            }
            JumpRule::Table { base, probs, .. } => {
                let mut idx = 0usize;
                for &s in word.iter().rev() {
                    debug_assert!(s < *base);
                    idx = idx * *base as usize + s as usize;
                }
                let (pr, ps) = probs[idx];
                if u < pr {
                    1
                } else if u < pr + ps {
                    0
                } else {
                    -1
                }
            }
        }
    }
}

/// Cadlag nearest-neighbor trajectory; jumps happen at clock arrivals of the
/// walker's pre-jump site.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkerPath {
    pub start: SpaceTimePoint,
    /// (time, new site), strictly increasing in time, steps of +-1.
    pub jumps: Vec<(f64, i64)>,
    /// End of the observed interval.
    pub end_time: f64,
    /// Set when the simulation hit the window edge: the time at which the
    /// path could no longer be continued.
    pub truncated: Option<f64>,
}

impl WalkerPath {
    pub fn final_site(&self) -> i64 {
        self.jumps.last().map_or(self.start.x, |j| j.1)
    }

    pub fn displacement(&self) -> i64 {
        self.final_site() - self.start.x
    }

    pub fn duration(&self) -> f64 {
        self.end_time - self.start.t
    }

    /// Right-continuous position at time t within the observed interval.
    pub fn site_at(&self, t: f64) -> i64 {
        let pos = self.jumps.partition_point(|j| j.0 <= t);
        if pos == 0 {
            self.start.x
        } else {
            self.jumps[pos - 1].1
        }
    }

    /// Structural check: strictly increasing jump times inside the observed
    /// interval, unit steps only.
    pub fn validate(&self) -> Result<()> {
        let mut t = self.start.t;
        let mut x = self.start.x;
        for &(jt, jx) in &self.jumps {
            if !(jt > t && jt <= self.end_time) {
                return Err(Error::invariant(format!("jump time {jt} out of order")));
            }
            if (jx - x).abs() != 1 {
                return Err(Error::invariant(format!("jump {x} -> {jx} is not nearest-neighbor")));
            }
            t = jt;
            x = jx;
        }
        Ok(())
    }

    /// Two-column CSV dump: time, site (the initial position first).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "time,site")?;
        writeln!(f, "{},{}", self.start.t, self.start.x)?;
        for &(t, x) in &self.jumps {
            writeln!(f, "{t},{x}")?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Runs one walker against a realized environment and clock field. The word
/// is read with `state_before`, so environment transitions scheduled exactly
/// at the arrival are excluded.
pub fn run_walker<E: Environment, C: Clocks>(
    env: &mut E,
    clocks: &mut C,
    rule: &JumpRule,
    start: SpaceTimePoint,
    duration: f64,
) -> Result<WalkerPath> {
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::param(format!("duration {duration} must be finite and >= 0")));
    }
    let end = start.t + duration;
    if end > env.horizon() || end > clocks.horizon() {
        return Err(Error::param(format!(
            "walk to time {end} exceeds horizon (env {}, clocks {})",
            env.horizon(),
            clocks.horizon()
        )));
    }
    let r = rule.radius();
    let (wlo, whi) = env.site_window();
    let (clo, chi) = clocks.site_window();
    let mut word = vec![0u16; (2 * r + 1) as usize];
    let mut x = start.x;
    let mut t = start.t;
    let mut jumps = Vec::new();
    loop {
        if x < clo || x > chi {
            return Err(Error::truncated(t, "walker left the clock window"));
        }
        let a = match clocks.next_after(x, t) {
            ClockStep::Arrival(a) if a.t <= end => a,
            _ => break,
        };
        if x - r < wlo || x + r > whi {
            return Err(Error::truncated(a.t, "environment word left the simulated window"));
        }
        for (k, slot) in word.iter_mut().enumerate() {
            *slot = env.state_before(x - r + k as i64, a.t)?;
        }
        let d = rule.eval(&word, a.u) as i64;
        if d != 0 {
            x += d;
            jumps.push((a.t, x));
        }
        t = a.t;
    }
    Ok(WalkerPath { start, jumps, end_time: end, truncated: None })
}

/// True iff the path is nearest-neighbor and every discontinuity sits at a
/// clock arrival of its pre-jump site.
pub fn check_allowed_path<C: Clocks>(path: &WalkerPath, clocks: &mut C) -> bool {
    if path.validate().is_err() {
        return false;
    }
    let mut x = path.start.x;
    for &(t, nx) in &path.jumps {
        if clocks.arrival_at(x, t).is_none() {
            return false;
        }
        x = nx;
    }
    true
}

/// Extremal sites reachable from the origin by any allowed path within time
/// T: the earliest time any path can occupy site k+1 is the first arrival at
/// site k after the earliest time it can occupy k, and symmetrically to the
/// left.
pub fn reachability_envelope<C: Clocks>(clocks: &mut C, t_max: f64) -> Result<(i64, i64)> {
    if !(t_max >= 0.0 && t_max <= clocks.horizon()) {
        return Err(Error::param(format!(
            "reach time {t_max} outside [0, {}]",
            clocks.horizon()
        )));
    }
    let (clo, chi) = clocks.site_window();
    let mut run = |dir: i64| -> Result<i64> {
        let mut site = 0i64;
        let mut t = 0.0;
        loop {
            if site < clo || site > chi {
                return Err(Error::truncated(t, "reachability frontier left the clock window"));
            }
            match clocks.next_after(site, t) {
                ClockStep::Arrival(a) if a.t <= t_max => {
                    site += dir;
                    t = a.t;
                }
                _ => return Ok(site),
            }
        }
    };
    let right = run(1)?;
    let left = run(-1)?;
    Ok((right, left))
}
