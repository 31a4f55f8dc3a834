//! Infection dynamics built from a graphical construction.
//!
//! Every site carries a rate-1 recovery clock; every ordered neighbor pair
//! (x, x+-1) carries a rate-lambda transmission clock. A recovery mark sets
//! its site to 0; a transmission arrow infects its target when its source is
//! infected immediately before the arrow. Realizations are driven by three
//! independent labeled streams (marks, rightward arrows keyed by source,
//! leftward arrows keyed by source), so the same seed reproduces the same
//! percolation structure for every consumer.
//!
//! The same structure read downward answers ancestry questions: a site y is
//! infected at time s iff some infection path leads from an initially
//! infected site to (y, s). Walking arrows backward from a target set yields
//! exactly the sites whose initial infection would reach the targets, and on
//! a fixed finite window the law of the backward spread equals the law of
//! the forward spread (the construction is symmetric under time reversal
//! plus arrow flip), which the tests exploit.

use crate::clock::fill_site_arrivals;
use crate::env::{Boundary, EnvTrajectory, ModelParams, StateSpace};
use crate::error::{Error, Result};
use crate::rng::{stream, SplitRng};

/// Effect-site event kinds; the source of an arrow event is derived from the
/// effect site, the kind, and the boundary.
const MARK: u8 = 0;
const FROM_LEFT: u8 = 1;
const FROM_RIGHT: u8 = 2;

fn validate(lambda: f64, horizon: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::param(format!("infection rate {lambda} must be finite and >= 0")));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::param(format!("horizon {horizon} must be finite and >= 0")));
    }
    Ok(())
}

/// All marks and arrows affecting the window, sorted by (time, effect site,
/// kind). Ties across independent streams are broken deterministically by
/// that key, matching the (time, site) order used everywhere else.
fn event_soup(
    lambda: f64,
    x_lo: i64,
    x_hi: i64,
    horizon: f64,
    boundary: Boundary,
    seed: u64,
) -> Vec<(f64, i64, u8)> {
    let n = (x_hi - x_lo + 1) as usize;
    let root = SplitRng::new(seed);
    let marks = root.stream(stream::MARKS);
    let right = root.stream(stream::ARROWS_RIGHT);
    let left = root.stream(stream::ARROWS_LEFT);
    let mut events: Vec<(f64, i64, u8)> = Vec::new();
    let mut buf = Vec::new();
    for x in x_lo..=x_hi {
        fill_site_arrivals(&marks, 1.0, horizon, x, &mut buf);
        events.extend(buf.iter().map(|a| (a.t, x, MARK)));
    }
    if lambda > 0.0 {
        let wrap = |y: i64| x_lo + (y - x_lo).rem_euclid(n as i64);
        for src in x_lo..=x_hi {
            fill_site_arrivals(&right, lambda, horizon, src, &mut buf);
            match boundary {
                Boundary::Periodic => {
                    events.extend(buf.iter().map(|a| (a.t, wrap(src + 1), FROM_LEFT)));
                }
                _ if src + 1 <= x_hi => {
                    events.extend(buf.iter().map(|a| (a.t, src + 1, FROM_LEFT)));
                }
                _ => {}
            }
            fill_site_arrivals(&left, lambda, horizon, src, &mut buf);
            match boundary {
                Boundary::Periodic => {
                    events.extend(buf.iter().map(|a| (a.t, wrap(src - 1), FROM_RIGHT)));
                }
                _ if src - 1 >= x_lo => {
                    events.extend(buf.iter().map(|a| (a.t, src - 1, FROM_RIGHT)));
                }
                _ => {}
            }
        }
        if boundary == Boundary::Frozen1 {
            // Permanently infected virtual neighbors push arrows inward.
            fill_site_arrivals(&right, lambda, horizon, x_lo - 1, &mut buf);
            events.extend(buf.iter().map(|a| (a.t, x_lo, FROM_LEFT)));
            fill_site_arrivals(&left, lambda, horizon, x_hi + 1, &mut buf);
            events.extend(buf.iter().map(|a| (a.t, x_hi, FROM_RIGHT)));
        }
    }
    events.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    events
}

/// State of the arrow's source immediately before the arrow fires. `None`
/// when the source lies outside the window (possible only under a frozen
/// boundary; permanently 1 beyond a Frozen1 edge, 0 beyond Frozen0).
fn source_state(state: &[u16], x_lo: i64, x_hi: i64, boundary: Boundary, x: i64, kind: u8) -> u16 {
    let n = (x_hi - x_lo + 1) as i64;
    let src = if kind == FROM_LEFT { x - 1 } else { x + 1 };
    if src < x_lo || src > x_hi {
        match boundary {
            Boundary::Frozen0 => 0,
            Boundary::Frozen1 => 1,
            Boundary::Periodic => state[(src - x_lo).rem_euclid(n) as usize],
        }
    } else {
        state[(src - x_lo) as usize]
    }
}

/// Forward simulation from an explicit initial configuration.
pub fn contact_simulate(
    lambda: f64,
    init: &[u16],
    x_lo: i64,
    x_hi: i64,
    horizon: f64,
    boundary: Boundary,
    seed: u64,
) -> Result<EnvTrajectory> {
    validate(lambda, horizon)?;
    if x_lo > x_hi {
        return Err(Error::param(format!("empty site window [{x_lo}, {x_hi}]")));
    }
    let n = (x_hi - x_lo + 1) as usize;
    if init.len() != n {
        return Err(Error::param(format!(
            "initial configuration has {} states, window needs {n}",
            init.len()
        )));
    }
    if init.iter().any(|&s| s > 1) {
        return Err(Error::param("initial states must be 0 or 1"));
    }
    let mut state = init.to_vec();
    let mut events: Vec<Vec<(f64, u16)>> = vec![Vec::new(); n];
    for (t, x, kind) in event_soup(lambda, x_lo, x_hi, horizon, boundary, seed) {
        let i = (x - x_lo) as usize;
        if kind == MARK {
            if state[i] == 1 {
                state[i] = 0;
                events[i].push((t, 0));
            }
        } else if state[i] == 0
            && source_state(&state, x_lo, x_hi, boundary, x, kind) == 1
        {
            state[i] = 1;
            events[i].push((t, 1));
        }
    }
    Ok(EnvTrajectory {
        space: StateSpace::Binary,
        params: ModelParams::Contact { lambda, boundary, warmup: 0.0 },
        x_lo,
        horizon,
        init: init.to_vec(),
        events,
    })
}

/// Forward simulation started close to the upper stationary law: the chain
/// is run from all 1s for `warmup` time units and the window `[warmup,
/// warmup + horizon)` is re-based to time 0. Starting from everything
/// infected dominates the stationary law site by site, so the warm-up
/// over-reports 1s; the bias decays with the warm-up length and is one-sided
/// for every observable that is monotone in the configuration.
pub fn contact_simulate_stationary(
    lambda: f64,
    x_lo: i64,
    x_hi: i64,
    horizon: f64,
    boundary: Boundary,
    warmup: f64,
    seed: u64,
) -> Result<EnvTrajectory> {
    if !(warmup.is_finite() && warmup >= 0.0) {
        return Err(Error::param(format!("warm-up {warmup} must be finite and >= 0")));
    }
    let ones = vec![1u16; (x_hi - x_lo + 1).max(0) as usize];
    let full = contact_simulate(lambda, &ones, x_lo, x_hi, warmup + horizon, boundary, seed)?;
    if warmup == 0.0 {
        return Ok(EnvTrajectory { horizon, ..full });
    }
    let mut init = Vec::with_capacity(full.init.len());
    let mut events = Vec::with_capacity(full.events.len());
    for (i, list) in full.events.iter().enumerate() {
        let cut = list.partition_point(|e| e.0 <= warmup);
        init.push(if cut == 0 { full.init[i] } else { list[cut - 1].1 });
        events.push(list[cut..].iter().map(|&(t, s)| (t - warmup, s)).collect());
    }
    Ok(EnvTrajectory {
        space: StateSpace::Binary,
        params: ModelParams::Contact { lambda, boundary, warmup },
        x_lo,
        horizon,
        init,
        events,
    })
}

/// Sites whose infection at time 0 would reach some target at time `s`,
/// computed by walking the graphical construction downward from the targets:
/// a recovery mark drops its site from the ancestor set, an arrow whose
/// effect site is an ancestor adds its source. Restricted to windows with no
/// inflow, where the construction on the window is self-contained.
pub fn contact_dual_ancestors(
    lambda: f64,
    targets: &[i64],
    x_lo: i64,
    x_hi: i64,
    s: f64,
    seed: u64,
) -> Result<Vec<i64>> {
    validate(lambda, s)?;
    if x_lo > x_hi {
        return Err(Error::param(format!("empty site window [{x_lo}, {x_hi}]")));
    }
    let n = (x_hi - x_lo + 1) as usize;
    let mut member = vec![false; n];
    let mut count = 0usize;
    for &y in targets {
        if y < x_lo || y > x_hi {
            return Err(Error::param(format!("target {y} outside window [{x_lo}, {x_hi}]")));
        }
        if !member[(y - x_lo) as usize] {
            member[(y - x_lo) as usize] = true;
            count += 1;
        }
    }
    let events = event_soup(lambda, x_lo, x_hi, s, Boundary::Frozen0, seed);
    for &(_, x, kind) in events.iter().rev() {
        let i = (x - x_lo) as usize;
        if kind == MARK {
            if member[i] {
                member[i] = false;
                count -= 1;
                if count == 0 {
                    return Ok(Vec::new());
                }
            }
        } else if member[i] {
            let src = if kind == FROM_LEFT { x - 1 } else { x + 1 };
            if src >= x_lo && src <= x_hi {
                let j = (src - x_lo) as usize;
                if !member[j] {
                    member[j] = true;
                    count += 1;
                }
            }
        }
    }
    Ok((x_lo..=x_hi).filter(|&x| member[(x - x_lo) as usize]).collect())
}
