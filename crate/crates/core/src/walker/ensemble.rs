//! Families of walkers coupled through one clock field and one environment.
//!
//! All walkers obey the same rule and read the same arrivals, so two walkers
//! that ever share a site see identical words and uniforms from then on and
//! move in lockstep forever. The engine exploits this: walkers are grouped
//! into blocks by current site, one block consumes one arrival at a time in
//! global (time, site) order, and blocks landing on each other merge. Since
//! moves are nearest-neighbor and sites hold at most one block, blocks can
//! touch but never cross; the engine asserts that ordering after every jump.

use crate::clock::{ClockStep, Clocks};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::lattice::SpaceTimePoint;
use crate::walker::{JumpRule, WalkerPath};

struct Block {
    site: i64,
    /// Indices into the caller's `starts`, in input order within the block.
    members: Vec<usize>,
    /// Cached next arrival at `site` strictly after this block's last event.
    next: ClockStep,
}

pub(crate) struct BlockRun {
    /// Final site per walker, in input order.
    pub final_sites: Vec<i64>,
    /// Per-walker jump lists, in input order; only filled when recording.
    pub jumps: Option<Vec<Vec<(f64, i64)>>>,
    /// Arrivals consumed across all blocks.
    pub arrivals: u64,
    /// Ordering assertions performed (one per jump event).
    pub checks: u64,
}

/// Shared engine behind [`run_coupled`] and the displacement estimators.
pub(crate) fn run_blocks<E: Environment, C: Clocks>(
    env: &mut E,
    clocks: &mut C,
    rule: &JumpRule,
    starts: &[i64],
    start_time: f64,
    duration: f64,
    record: bool,
) -> Result<BlockRun> {
    if starts.is_empty() {
        return Err(Error::param("no walkers given"));
    }
    if !(duration >= 0.0 && duration.is_finite() && start_time >= 0.0) {
        return Err(Error::param(format!("bad time interval ({start_time}, +{duration})")));
    }
    let end = start_time + duration;
    if end > env.horizon() || end > clocks.horizon() {
        return Err(Error::param(format!(
            "run to time {end} exceeds horizon (env {}, clocks {})",
            env.horizon(),
            clocks.horizon()
        )));
    }
    let r = rule.radius();
    let (wlo, whi) = env.site_window();
    let (clo, chi) = clocks.site_window();

    let mut order: Vec<usize> = (0..starts.len()).collect();
    order.sort_by_key(|&i| (starts[i], i));
    let mut blocks: Vec<Block> = Vec::new();
    for i in order {
        match blocks.last_mut() {
            Some(b) if b.site == starts[i] => b.members.push(i),
            _ => blocks.push(Block { site: starts[i], members: vec![i], next: ClockStep::Exhausted }),
        }
    }
    for b in &mut blocks {
        if b.site < clo || b.site > chi {
            return Err(Error::truncated(start_time, "walker started outside the clock window"));
        }
        b.next = clocks.next_after(b.site, start_time);
    }

    let mut jumps: Vec<Vec<(f64, i64)>> = if record { vec![Vec::new(); starts.len()] } else { Vec::new() };
    let mut word = vec![0u16; (2 * r + 1) as usize];
    let mut arrivals = 0u64;
    let mut checks = 0u64;

    loop {
        // Next event: the minimal (time, site) cached arrival over blocks.
        let mut best: Option<(f64, i64, usize)> = None;
        for (k, b) in blocks.iter().enumerate() {
            if let ClockStep::Arrival(a) = b.next {
                if a.t <= end && best.map_or(true, |(t, s, _)| (a.t, b.site) < (t, s)) {
                    best = Some((a.t, b.site, k));
                }
            }
        }
        let Some((t, site, k)) = best else { break };
        let a = match blocks[k].next {
            ClockStep::Arrival(a) => a,
            _ => unreachable!(),
        };
        arrivals += 1;
        if site - r < wlo || site + r > whi {
            return Err(Error::truncated(t, "environment word left the simulated window"));
        }
        for (j, slot) in word.iter_mut().enumerate() {
            *slot = env.state_before(site - r + j as i64, t)?;
        }
        let d = rule.eval(&word, a.u) as i64;
        if d == 0 {
            blocks[k].next = clocks.next_after(site, t);
            continue;
        }
        let nx = site + d;
        if nx < clo || nx > chi {
            return Err(Error::truncated(t, "walker left the clock window"));
        }
        blocks[k].site = nx;
        if record {
            for &m in &blocks[k].members {
                jumps[m].push((t, nx));
            }
        }
        // Merge with the neighbor the block landed on, if any.
        let merge_from = if d > 0 && blocks.get(k + 1).map_or(false, |b| b.site == nx) {
            Some(k + 1)
        } else if d < 0 && k > 0 && blocks[k - 1].site == nx {
            Some(k - 1)
        } else {
            None
        };
        if let Some(other) = merge_from {
            let absorbed = blocks.remove(other.max(k));
            let keep = other.min(k);
            blocks[keep].site = nx;
            blocks[keep].members.extend(absorbed.members);
            blocks[keep].members.sort_unstable();
            blocks[keep].next = clocks.next_after(nx, t);
        } else {
            blocks[k].next = clocks.next_after(nx, t);
        }
        // Blocks may touch and merge but never cross.
        checks += 1;
        for w in blocks.windows(2) {
            if w[0].site >= w[1].site {
                return Err(Error::invariant(format!(
                    "coupled walkers out of order at time {t}: sites {} and {}",
                    w[0].site, w[1].site
                )));
            }
        }
    }

    let mut final_sites = vec![0i64; starts.len()];
    for b in &blocks {
        for &m in &b.members {
            final_sites[m] = b.site;
        }
    }
    Ok(BlockRun {
        final_sites,
        jumps: record.then_some(jumps),
        arrivals,
        checks,
    })
}

/// Jointly evolved walker family; paths are parallel to the input starts.
#[derive(Debug, Clone)]
pub struct CoupledEnsemble {
    pub start_time: f64,
    pub end_time: f64,
    pub paths: Vec<WalkerPath>,
    /// Arrivals consumed by the family.
    pub arrivals: u64,
    /// Ordering assertions that were checked (one per jump event).
    pub events_checked: u64,
}

impl CoupledEnsemble {
    pub fn final_sites(&self) -> Vec<i64> {
        self.paths.iter().map(WalkerPath::final_site).collect()
    }

    /// Counts pairs (i, j) with ordered starts whose paths swap order at any
    /// jump time of either path. Zero for every run the engine produces.
    pub fn ordering_violations(&self) -> u64 {
        let mut bad = 0;
        for i in 0..self.paths.len() {
            for j in 0..self.paths.len() {
                let (a, b) = (&self.paths[i], &self.paths[j]);
                if a.start.x > b.start.x {
                    continue;
                }
                for &(t, _) in a.jumps.iter().chain(b.jumps.iter()) {
                    if a.site_at(t) > b.site_at(t) {
                        bad += 1;
                        break;
                    }
                }
            }
        }
        bad
    }
}

/// Evolves one walker per entry of `starts` under shared clocks and a shared
/// environment, recording full paths.
pub fn run_coupled<E: Environment, C: Clocks>(
    env: &mut E,
    clocks: &mut C,
    rule: &JumpRule,
    starts: &[i64],
    start_time: f64,
    duration: f64,
) -> Result<CoupledEnsemble> {
    let run = run_blocks(env, clocks, rule, starts, start_time, duration, true)?;
    let end_time = start_time + duration;
    let jumps = run.jumps.expect("recording was requested");
    let paths = starts
        .iter()
        .zip(jumps)
        .map(|(&x, jumps)| WalkerPath {
            start: SpaceTimePoint { x, t: start_time },
            jumps,
            end_time,
            truncated: None,
        })
        .collect();
    Ok(CoupledEnsemble {
        start_time,
        end_time,
        paths,
        arrivals: run.arrivals,
        events_checked: run.checks,
    })
}
