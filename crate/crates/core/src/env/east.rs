//! Oriented kinetically constrained dynamics on {0, 1}.
//!
//! Each site carries a rate-1 clock. An arrival at x is *legal* when the
//! right neighbor is 0 immediately before it; a legal arrival resamples the
//! state at x to 1 with probability rho, independently of everything else.
//! Illegal arrivals change nothing. Because legality looks only rightward,
//! the trajectory of any site is a function of the clocks and initial states
//! at that site and to its right, which allows an exact right-to-left sweep:
//! each site is resolved in one pass once its right neighbor's change list is
//! known. The sweep shares its per-site clock stream with [`ClockField`]
//! under the same seed, so walkers driven by a sampled clock field consume
//! bit-identical arrivals.
//!
//! Two tagged trajectories ride on top of the dynamics:
//! * a tracked vacancy that jumps right at every legal arrival of its site
//!   (it always sits on a 0 and never moves left), and
//! * the leftmost zero of a configuration that is all 1s to the left of the
//!   origin, which moves one step at a time in both directions.
//!
//! [`ClockField`]: crate::clock::ClockField

use crate::clock::{fill_site_arrivals, Arrival};
use crate::env::{Boundary, EastInit, EnvTrajectory, ModelParams, StateSpace};
use crate::error::{Error, Result};
use crate::lattice::SpaceTimePoint;
use crate::rng::{stream, SplitRng};
use crate::walker::WalkerPath;

/// One clock arrival at a site, annotated by the dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ring {
    pub t: f64,
    /// The state the site would adopt if the arrival were legal.
    pub refresh: bool,
    /// Whether the right neighbor was 0 immediately before the arrival.
    pub legal: bool,
}

/// A fully annotated realization: every arrival of every site with its
/// legality, enough to replay any tagged trajectory exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct EastRealization {
    pub rho: f64,
    pub boundary: Boundary,
    pub x_lo: i64,
    pub horizon: f64,
    pub seed: u64,
    pub init: Vec<u16>,
    /// Per site, aligned with `x_lo..`, sorted by time.
    pub rings: Vec<Vec<Ring>>,
}

impl EastRealization {
    /// Inclusive site window.
    pub fn window(&self) -> (i64, i64) {
        (self.x_lo, self.x_lo + self.rings.len() as i64 - 1)
    }
}

fn validate_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::param(format!("occupation bias {rho} must lie in (0, 1)")));
    }
    Ok(())
}

fn window_size(x_lo: i64, x_hi: i64) -> Result<usize> {
    if x_lo > x_hi {
        return Err(Error::param(format!("empty site window [{x_lo}, {x_hi}]")));
    }
    Ok((x_hi - x_lo + 1) as usize)
}

/// Draws the initial configuration on `x_lo..=x_hi`. Product draws are pure
/// per (seed, site), so enlarging the window never changes existing sites.
pub fn draw_east_init(init: &EastInit, rho: f64, x_lo: i64, x_hi: i64, seed: u64) -> Result<Vec<u16>> {
    let n = window_size(x_lo, x_hi)?;
    let root = SplitRng::new(seed).stream(stream::INIT);
    let product = |_: ()| -> Vec<u16> {
        (x_lo..=x_hi).map(|x| (root.site(x).f64() < rho) as u16).collect()
    };
    match init {
        EastInit::Product => Ok(product(())),
        EastInit::ProductZeroAt { site } => {
            if *site < x_lo || *site > x_hi {
                return Err(Error::param(format!(
                    "forced zero at {site} outside window [{x_lo}, {x_hi}]"
                )));
            }
            let mut states = product(());
            states[(site - x_lo) as usize] = 0;
            Ok(states)
        }
        EastInit::Fixed { states } => {
            if states.len() != n {
                return Err(Error::param(format!(
                    "fixed initial configuration has {} states, window needs {n}",
                    states.len()
                )));
            }
            if states.iter().any(|&s| s > 1) {
                return Err(Error::param("initial states must be 0 or 1"));
            }
            Ok(states.clone())
        }
    }
}

/// Right-to-left sweep. Visits sites in descending order; the callback gets
/// (site, arrivals, legality flags, change list) and must not assume any
/// particular visiting order beyond that.
fn east_pass(
    rho: f64,
    init: &[u16],
    x_lo: i64,
    horizon: f64,
    boundary: Boundary,
    seed: u64,
    mut visit: impl FnMut(i64, &[Arrival], &[bool], &[(f64, u16)]),
) -> Result<()> {
    validate_rho(rho)?;
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::param(format!("horizon {horizon} must be finite and >= 0")));
    }
    let mut right_init: u16 = match boundary {
        Boundary::Frozen0 => 0,
        Boundary::Frozen1 => 1,
        Boundary::Periodic => {
            return Err(Error::param(
                "wrap-around windows are unsupported for one-sided constraints",
            ))
        }
    };
    let root = SplitRng::new(seed).stream(stream::CLOCK);
    let mut right_changes: Vec<(f64, u16)> = Vec::new();
    let mut changes: Vec<(f64, u16)> = Vec::new();
    let mut arrivals: Vec<Arrival> = Vec::new();
    let mut legal: Vec<bool> = Vec::new();
    for i in (0..init.len()).rev() {
        let x = x_lo + i as i64;
        fill_site_arrivals(&root, 1.0, horizon, x, &mut arrivals);
        legal.clear();
        changes.clear();
        let mut state = init[i];
        let mut rs = right_init;
        let mut j = 0;
        for a in &arrivals {
            // State of x+1 immediately before time a.t: its change at exactly
            // a.t has not happened yet, matching the (time, site) event order
            // in which x precedes x+1 at equal times.
            while j < right_changes.len() && right_changes[j].0 < a.t {
                rs = right_changes[j].1;
                j += 1;
            }
            let ok = rs == 0;
            legal.push(ok);
            if ok {
                let next = (a.u < rho) as u16;
                if next != state {
                    changes.push((a.t, next));
                    state = next;
                }
            }
        }
        visit(x, &arrivals, &legal, &changes);
        std::mem::swap(&mut right_changes, &mut changes);
        right_init = init[i];
    }
    Ok(())
}

/// Simulates the dynamics on an inclusive window, returning both the
/// annotated realization and the plain change-event trajectory.
pub fn east_simulate(
    rho: f64,
    init: &EastInit,
    x_lo: i64,
    x_hi: i64,
    horizon: f64,
    boundary: Boundary,
    seed: u64,
) -> Result<(EastRealization, EnvTrajectory)> {
    let n = window_size(x_lo, x_hi)?;
    let init_states = draw_east_init(init, rho, x_lo, x_hi, seed)?;
    let mut rings: Vec<Vec<Ring>> = vec![Vec::new(); n];
    let mut events: Vec<Vec<(f64, u16)>> = vec![Vec::new(); n];
    east_pass(rho, &init_states, x_lo, horizon, boundary, seed, |x, arrivals, legal, changes| {
        let i = (x - x_lo) as usize;
        rings[i] = arrivals
            .iter()
            .zip(legal)
            .map(|(a, &l)| Ring { t: a.t, refresh: a.u < rho, legal: l })
            .collect();
        events[i] = changes.to_vec();
    })?;
    let real = EastRealization {
        rho,
        boundary,
        x_lo,
        horizon,
        seed,
        init: init_states.clone(),
        rings,
    };
    let traj = EnvTrajectory {
        space: StateSpace::Binary,
        params: ModelParams::East { rho, boundary, init: init.clone() },
        x_lo,
        horizon,
        init: init_states,
        events,
    };
    traj.validate()?;
    Ok((real, traj))
}

/// Replays the tracked vacancy of a realization from `start`, which must
/// hold a 0 initially. The vacancy jumps one step right at every legal
/// arrival of its current site and never moves otherwise; it ends either at
/// the horizon or, flagged, at the first jump that would leave the window.
pub fn east_distinguished_zero(real: &EastRealization, start: i64) -> Result<WalkerPath> {
    let (lo, hi) = real.window();
    if start < lo || start > hi {
        return Err(Error::param(format!("start {start} outside window [{lo}, {hi}]")));
    }
    if real.init[(start - lo) as usize] != 0 {
        return Err(Error::param(format!("tracked site {start} must start empty")));
    }
    let origin = SpaceTimePoint { x: start, t: 0.0 };
    let mut x = start;
    let mut key_t = 0.0f64;
    // Rings at the time the vacancy arrived from the left still qualify: at
    // equal times the event at the smaller site comes first.
    let mut include_key_time = true;
    let mut jumps = Vec::new();
    loop {
        let rings = &real.rings[(x - lo) as usize];
        let from = if include_key_time {
            rings.partition_point(|r| r.t < key_t)
        } else {
            rings.partition_point(|r| r.t <= key_t)
        };
        match rings[from..].iter().find(|r| r.legal) {
            None => {
                return Ok(WalkerPath {
                    start: origin,
                    jumps,
                    end_time: real.horizon,
                    truncated: None,
                })
            }
            Some(r) => {
                if x + 1 > hi {
                    return Ok(WalkerPath {
                        start: origin,
                        jumps,
                        end_time: r.t,
                        truncated: Some(r.t),
                    });
                }
                x += 1;
                jumps.push((r.t, x));
                key_t = r.t;
                include_key_time = true;
            }
        }
    }
}

/// Streaming tracked-vacancy run on the window `start..=x_hi` with the
/// product initial law conditioned on a 0 at `start` and a permanently empty
/// right edge. Only legal arrival times are retained, so memory stays linear
/// in the number of legal arrivals rather than in full annotation.
pub fn east_zero_run(rho: f64, start: i64, x_hi: i64, horizon: f64, seed: u64) -> Result<WalkerPath> {
    let n = window_size(start, x_hi)?;
    let init =
        draw_east_init(&EastInit::ProductZeroAt { site: start }, rho, start, x_hi, seed)?;
    let mut legal_times: Vec<Vec<f64>> = vec![Vec::new(); n];
    east_pass(rho, &init, start, horizon, Boundary::Frozen0, seed, |x, arrivals, legal, _| {
        let list = &mut legal_times[(x - start) as usize];
        list.extend(arrivals.iter().zip(legal).filter(|(_, &l)| l).map(|(a, _)| a.t));
    })?;
    let origin = SpaceTimePoint { x: start, t: 0.0 };
    let mut x = start;
    let mut key_t = 0.0f64;
    let mut jumps = Vec::new();
    loop {
        let times = &legal_times[(x - start) as usize];
        // Arriving from the left at key_t keeps same-time arrivals eligible.
        let from = times.partition_point(|&t| t < key_t);
        match times.get(from) {
            None => {
                return Ok(WalkerPath { start: origin, jumps, end_time: horizon, truncated: None })
            }
            Some(&t) => {
                if x + 1 > x_hi {
                    return Ok(WalkerPath { start: origin, jumps, end_time: t, truncated: Some(t) });
                }
                x += 1;
                jumps.push((t, x));
                key_t = t;
            }
        }
    }
}

/// The canonical initial configuration for front tracking: all 1s strictly
/// left of the origin, a 0 at the origin, product Bernoulli(rho) to the
/// right. Pure per (seed, site) on the right half.
pub fn front_initial_configuration(rho: f64, x_lo: i64, x_hi: i64, seed: u64) -> Result<Vec<u16>> {
    validate_rho(rho)?;
    window_size(x_lo, x_hi)?;
    if x_lo > 0 || x_hi < 0 {
        return Err(Error::param(format!("window [{x_lo}, {x_hi}] must contain the origin")));
    }
    let root = SplitRng::new(seed).stream(stream::INIT);
    Ok((x_lo..=x_hi)
        .map(|x| match x.cmp(&0) {
            std::cmp::Ordering::Less => 1,
            std::cmp::Ordering::Equal => 0,
            std::cmp::Ordering::Greater => (root.site(x).f64() < rho) as u16,
        })
        .collect())
}

/// Streaming leftmost-zero trajectory from the canonical front start. The
/// front moves right when a legal arrival at its site refreshes to 1 and
/// left when an arrival at the site to its left refreshes to 0 (such an
/// arrival is automatically legal while the front sits next to it). Flags
/// truncation when the front reaches either window edge.
pub fn east_front(rho: f64, x_lo: i64, x_hi: i64, horizon: f64, seed: u64) -> Result<WalkerPath> {
    let n = window_size(x_lo, x_hi)?;
    let init = front_initial_configuration(rho, x_lo, x_hi, seed)?;
    // Right moves: legal arrivals refreshing to 1. Left-move candidates:
    // any arrival refreshing to 0 at the site left of the front; while the
    // front is adjacent such arrivals are always legal.
    let mut right_moves: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut left_moves: Vec<Vec<f64>> = vec![Vec::new(); n];
    east_pass(rho, &init, x_lo, horizon, Boundary::Frozen0, seed, |x, arrivals, legal, _| {
        let i = (x - x_lo) as usize;
        for (a, &l) in arrivals.iter().zip(legal) {
            if a.u < rho {
                if l {
                    right_moves[i].push(a.t);
                }
            } else {
                left_moves[i].push(a.t);
            }
        }
    })?;
    let origin = SpaceTimePoint { x: 0, t: 0.0 };
    let mut pos = 0i64;
    let mut key = (0.0f64, i64::MIN);
    let mut jumps = Vec::new();
    // First time in `list` (all at site s) ordered after the last consumed
    // event under the (time, site) order.
    let first_after = |list: &[f64], s: i64, key: (f64, i64)| -> Option<f64> {
        let from = if s > key.1 {
            list.partition_point(|&t| t < key.0)
        } else {
            list.partition_point(|&t| t <= key.0)
        };
        list.get(from).copied()
    };
    loop {
        if pos == x_lo {
            // The site left of the front is outside the window; its arrivals
            // are unknown, so the walk cannot be continued faithfully.
            return Ok(WalkerPath { start: origin, jumps, end_time: key.0, truncated: Some(key.0) });
        }
        let right = first_after(&right_moves[(pos - x_lo) as usize], pos, key);
        let left = first_after(&left_moves[(pos - 1 - x_lo) as usize], pos - 1, key);
        // Earlier event wins; at equal times the left candidate sits at the
        // smaller site and comes first.
        let step = match (right, left) {
            (None, None) => {
                return Ok(WalkerPath { start: origin, jumps, end_time: horizon, truncated: None })
            }
            (Some(rt), None) => (rt, 1),
            (None, Some(lt)) => (lt, -1),
            (Some(rt), Some(lt)) => {
                if (lt, pos - 1) < (rt, pos) {
                    (lt, -1)
                } else {
                    (rt, 1)
                }
            }
        };
        let (t, d) = step;
        if pos + d > x_hi {
            return Ok(WalkerPath { start: origin, jumps, end_time: t, truncated: Some(t) });
        }
        key = (t, if d > 0 { pos } else { pos - 1 });
        pos += d;
        jumps.push((t, pos));
    }
}

/// Leftmost-zero trajectory of an arbitrary realized trajectory, for
/// cross-checking the streaming front. Jumps may span several sites for
/// generic inputs; truncates if the window runs out of zeros.
pub fn leftmost_zero_path(traj: &EnvTrajectory) -> Result<WalkerPath> {
    let n = traj.init.len();
    let x_lo = traj.x_lo;
    let mut state = traj.init.clone();
    let Some(first) = state.iter().position(|&s| s == 0) else {
        return Err(Error::param("no zero in the initial configuration"));
    };
    let mut front = x_lo + first as i64;
    let origin = SpaceTimePoint { x: front, t: 0.0 };
    let mut all: Vec<(f64, i64, u16)> = Vec::new();
    for (i, list) in traj.events.iter().enumerate() {
        let x = x_lo + i as i64;
        all.extend(list.iter().map(|&(t, s)| (t, x, s)));
    }
    all.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut jumps = Vec::new();
    for (t, x, s) in all {
        state[(x - x_lo) as usize] = s;
        if x < front && s == 0 {
            front = x;
            jumps.push((t, front));
        } else if x == front && s == 1 {
            match state[(front - x_lo) as usize..].iter().position(|&v| v == 0) {
                Some(off) => {
                    front += off as i64;
                    jumps.push((t, front));
                }
                None => {
                    return Ok(WalkerPath {
                        start: origin,
                        jumps,
                        end_time: t,
                        truncated: Some(t),
                    })
                }
            }
        }
        let _ = n;
    }
    Ok(WalkerPath { start: origin, jumps, end_time: traj.horizon, truncated: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::{sample_clock_field, Clocks};
    use crate::env::Environment;
    use crate::walker::{run_walker, JumpRule, Preset};

    #[test]
    fn legality_matches_the_realized_right_neighbor() {
        for (seed, boundary) in [(1u64, Boundary::Frozen0), (2, Boundary::Frozen1)] {
            let (real, traj) =
                east_simulate(0.5, &EastInit::Product, -6, 6, 30.0, boundary, seed).unwrap();
            for x in -6..=6i64 {
                let i = (x + 6) as usize;
                for r in &real.rings[i] {
                    let expect = if x == 6 {
                        boundary == Boundary::Frozen0
                    } else {
                        traj.state_before(x + 1, r.t).unwrap() == 0
                    };
                    assert_eq!(r.legal, expect, "site {x} time {}", r.t);
                }
                // Change events are exactly the legal rings whose refresh
                // differs from the running state.
                let mut s = real.init[i];
                let mut expect_changes = Vec::new();
                for r in &real.rings[i] {
                    if r.legal && r.refresh as u16 != s {
                        s = r.refresh as u16;
                        expect_changes.push((r.t, s));
                    }
                }
                assert_eq!(traj.events[i], expect_changes, "site {x}");
            }
        }
    }

    #[test]
    fn sites_ignore_everything_to_their_left() {
        let a = vec![1, 0, 1, 1, 0, 1, 0, 1, 0, 0, 1];
        let mut b = a.clone();
        b[0] = 0;
        b[1] = 1;
        b[2] = 0;
        let (ra, _) = east_simulate(
            0.4,
            &EastInit::Fixed { states: a },
            0,
            10,
            25.0,
            Boundary::Frozen0,
            7,
        )
        .unwrap();
        let (rb, _) = east_simulate(
            0.4,
            &EastInit::Fixed { states: b },
            0,
            10,
            25.0,
            Boundary::Frozen0,
            7,
        )
        .unwrap();
        for i in 3..=10usize {
            assert_eq!(ra.rings[i], rb.rings[i], "site {i}");
        }
    }

    #[test]
    fn enlarging_the_window_leftward_changes_nothing_on_the_right() {
        let (wide, _) =
            east_simulate(0.5, &EastInit::Product, -10, 20, 40.0, Boundary::Frozen0, 3).unwrap();
        let (narrow, _) =
            east_simulate(0.5, &EastInit::Product, 0, 20, 40.0, Boundary::Frozen0, 3).unwrap();
        for x in 0..=20i64 {
            assert_eq!(
                wide.rings[(x + 10) as usize],
                narrow.rings[x as usize],
                "site {x}"
            );
        }
    }

    #[test]
    fn vacancy_walks_agree_with_each_other_and_with_the_shared_clock_walker() {
        for seed in 0..8u64 {
            let (real, traj) = east_simulate(
                0.5,
                &EastInit::ProductZeroAt { site: 0 },
                -2,
                82,
                60.0,
                Boundary::Frozen0,
                seed,
            )
            .unwrap();
            let z1 = east_distinguished_zero(&real, 0).unwrap();
            let z2 = east_zero_run(0.5, 0, 82, 60.0, seed).unwrap();
            assert_eq!(z1.jumps, z2.jumps, "seed {seed}");
            assert!(z1.truncated.is_none(), "window too small for seed {seed}");
            // A walker that steps right exactly when its right neighbor is
            // empty, driven by the same seed's clock field, retraces the
            // vacancy arrival for arrival.
            let mut env = traj;
            let mut clocks = sample_clock_field(-2, 82, 1.0, 60.0, seed).unwrap();
            let rule = JumpRule::Preset(Preset::RightWhenRightEmpty);
            let w = run_walker(
                &mut env,
                &mut clocks,
                &rule,
                SpaceTimePoint { x: 0, t: 0.0 },
                60.0,
            )
            .unwrap();
            assert_eq!(z1.jumps, w.jumps, "seed {seed}");
        }
    }

    #[test]
    fn vacancy_always_sits_on_a_zero() {
        let (real, traj) = east_simulate(
            0.6,
            &EastInit::ProductZeroAt { site: 0 },
            -2,
            60,
            40.0,
            Boundary::Frozen0,
            11,
        )
        .unwrap();
        let z = east_distinguished_zero(&real, 0).unwrap();
        let mut checks = vec![0.0];
        for &(t, _) in &z.jumps {
            checks.push(t);
            checks.push((t + z.end_time) / 2.0);
        }
        for t in checks {
            let x = z.site_at(t);
            assert_eq!(traj.state_at(x, t).unwrap(), 0, "vacancy off its zero at t={t}");
        }
    }

    #[test]
    fn unconstrained_vacancy_moves_at_the_clock_rate() {
        // Occupation bias so small that the lattice is empty and every ring
        // is legal: the vacancy consumes every arrival at its site.
        let t = 400.0;
        let z = east_zero_run(1e-12, 0, 600, t, 42).unwrap();
        assert!(z.truncated.is_none());
        let d = z.displacement() as f64;
        assert!((d - t).abs() < 4.0 * t.sqrt(), "displacement {d} far from {t}");
        // Exactly the arrivals of the visited sites: compare with the raw
        // clock field along the path.
        let mut clocks = sample_clock_field(0, 600, 1.0, t, 42).unwrap();
        let mut x = 0i64;
        for &(jt, nx) in &z.jumps {
            assert!(clocks.arrival_at(x, jt).is_some());
            x = nx;
        }
    }

    #[test]
    fn front_walk_equals_the_leftmost_zero_of_the_trajectory() {
        for seed in 0..10u64 {
            let states = front_initial_configuration(0.5, -30, 30, seed).unwrap();
            let (_, traj) = east_simulate(
                0.5,
                &EastInit::Fixed { states },
                -30,
                30,
                40.0,
                Boundary::Frozen0,
                seed,
            )
            .unwrap();
            let scan = leftmost_zero_path(&traj).unwrap();
            let front = east_front(0.5, -30, 30, 40.0, seed).unwrap();
            match front.truncated {
                None => {
                    assert!(scan.truncated.is_none());
                    assert_eq!(front.jumps, scan.jumps, "seed {seed}");
                }
                Some(tt) => {
                    // Both views agree up to the moment the front left the
                    // observable window.
                    let cut = |p: &WalkerPath| {
                        p.jumps.iter().take_while(|j| j.0 < tt).copied().collect::<Vec<_>>()
                    };
                    assert_eq!(cut(&front), cut(&scan), "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn all_ones_with_an_occupied_edge_is_frozen() {
        let (real, traj) = east_simulate(
            0.5,
            &EastInit::Fixed { states: vec![1; 21] },
            0,
            20,
            30.0,
            Boundary::Frozen1,
            5,
        )
        .unwrap();
        assert!(traj.events.iter().all(Vec::is_empty));
        assert!(real.rings.iter().flatten().all(|r| !r.legal));
    }

    #[test]
    fn initial_laws_and_parameters_are_validated() {
        assert!(east_simulate(0.0, &EastInit::Product, 0, 5, 1.0, Boundary::Frozen0, 0).is_err());
        assert!(east_simulate(1.0, &EastInit::Product, 0, 5, 1.0, Boundary::Frozen0, 0).is_err());
        assert!(east_simulate(0.5, &EastInit::Product, 0, 5, 1.0, Boundary::Periodic, 0).is_err());
        assert!(east_simulate(
            0.5,
            &EastInit::ProductZeroAt { site: 9 },
            0,
            5,
            1.0,
            Boundary::Frozen0,
            0
        )
        .is_err());
        assert!(east_simulate(
            0.5,
            &EastInit::Fixed { states: vec![0, 1] },
            0,
            5,
            1.0,
            Boundary::Frozen0,
            0
        )
        .is_err());
        assert!(east_simulate(
            0.5,
            &EastInit::Fixed { states: vec![2; 6] },
            0,
            5,
            1.0,
            Boundary::Frozen0,
            0
        )
        .is_err());
        let (real, _) = east_simulate(
            0.5,
            &EastInit::ProductZeroAt { site: 3 },
            0,
            5,
            1.0,
            Boundary::Frozen0,
            0,
        )
        .unwrap();
        assert_eq!(real.init[3], 0);
        assert!(east_distinguished_zero(&real, 99).is_err());
        if real.init[1] == 1 {
            assert!(east_distinguished_zero(&real, 1).is_err());
        }
    }

    #[test]
    fn product_density_is_preserved_over_time() {
        let rho = 0.7;
        let reps = 30u64;
        let sites = -60..=60i64;
        let mut sums = [0.0f64; 3];
        let times = [0.0, 10.0, 20.0];
        for rep in 0..reps {
            let mut env = crate::env::ModelParams::East {
                rho,
                boundary: Boundary::Frozen0,
                init: EastInit::Product,
            }
            .instantiate(-60, 60, 20.0, 1000 + rep)
            .unwrap();
            for (k, &t) in times.iter().enumerate() {
                let mut s = 0.0;
                for x in sites.clone() {
                    s += env.state_at(x, t).unwrap() as f64;
                }
                sums[k] += s / 121.0;
            }
        }
        // Per-replica spatial means are correlated across sites; allow a
        // generous inflation of the independent-site standard error.
        let se = (rho * (1.0 - rho) / (121.0 * reps as f64)).sqrt() * 3.0;
        for (k, &t) in times.iter().enumerate() {
            let mean = sums[k] / reps as f64;
            assert!((mean - rho).abs() < 4.0 * se, "density {mean} at t={t} drifted from {rho}");
        }
    }

    #[test]
    fn truncation_flags_the_first_offscreen_jump() {
        let z = east_zero_run(1e-12, 0, 3, 50.0, 9).unwrap();
        assert_eq!(z.final_site(), 3);
        let t = z.truncated.expect("vacancy must hit the edge");
        assert_eq!(t, z.end_time);
        assert!(t < 50.0);
    }

    #[test]
    fn realizations_are_deterministic_in_the_seed() {
        let a = east_simulate(0.3, &EastInit::Product, -5, 15, 12.0, Boundary::Frozen0, 77).unwrap();
        let b = east_simulate(0.3, &EastInit::Product, -5, 15, 12.0, Boundary::Frozen0, 77).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}
