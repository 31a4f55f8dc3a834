//! Dynamical environments over a finite space-time window.
//!
//! Every model produces the same queryable artifact: a per-site list of
//! (time, new state) change events that is piecewise constant and
//! right-continuous in time. Models whose sites evolve independently
//! (constant, spin-flip, renewal) can also be served lazily, generating a
//! site's trajectory only when a walker first looks at it.

pub mod contact;
pub mod east;
pub mod renewal;
pub mod spinflip;

use std::collections::HashMap;
use std::io::{Read as IoRead, Write as IoWrite};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What the per-site states mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSpace {
    /// Occupation variables in {0, 1}.
    Binary,
    /// Spins in {-1, +1}, stored as 0 -> -1, 1 -> +1.
    Spin,
    /// Nonnegative integer counters.
    Counter,
}

/// How a model treats neighbors just outside the simulated window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Virtual sites beyond the edge are permanently 0.
    Frozen0,
    /// Virtual sites beyond the edge are permanently 1.
    Frozen1,
    /// The window wraps around.
    Periodic,
}

/// Initial law for constrained-dynamics simulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum EastInit {
    /// Product Bernoulli(rho), the reversible measure.
    Product,
    /// Product Bernoulli(rho) with the state at `site` forced to 0.
    ProductZeroAt { site: i64 },
    /// A fixed configuration covering the window, left edge first.
    Fixed { states: Vec<u16> },
}

/// Serializable model selector with its parameters; the single entry point
/// estimators use to draw fresh environment replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    /// Every site holds `state` forever; the blind-walker baseline.
    Constant { state: u16 },
    /// Each site refreshes at rate nu to 1 w.p. rho, independently.
    SpinFlip { nu: f64, rho: f64 },
    /// Independent per-site renewal chains with resampling weights
    /// `weights[k-1]` for a jump from 0 to k.
    Renewal { weights: Vec<f64> },
    /// Constrained spin dynamics: a site may refresh (to 1 w.p. rho) only
    /// while its right neighbor is 0. Started from `init`.
    East { rho: f64, boundary: Boundary, init: EastInit },
    /// Infection at rate lambda from occupied neighbors, recovery at rate 1.
    /// Started from all ones run for `warmup` time units before t = 0, which
    /// approximates the largest stationary law from above.
    Contact { lambda: f64, boundary: Boundary, warmup: f64 },
}

impl ModelParams {
    pub fn space(&self) -> StateSpace {
        match self {
            ModelParams::Renewal { .. } => StateSpace::Counter,
            _ => StateSpace::Binary,
        }
    }

    /// Short stable name for result rows.
    pub fn name(&self) -> &'static str {
        match self {
            ModelParams::Constant { .. } => "constant",
            ModelParams::SpinFlip { .. } => "spinflip",
            ModelParams::Renewal { .. } => "renewal",
            ModelParams::East { .. } => "east",
            ModelParams::Contact { .. } => "contact",
        }
    }

    /// Materialize the trajectory on [x_lo, x_hi] x [0, horizon].
    pub fn materialize(
        &self,
        x_lo: i64,
        x_hi: i64,
        horizon: f64,
        seed: u64,
    ) -> Result<EnvTrajectory> {
        match self {
            ModelParams::Constant { state } => {
                constant_trajectory(*state, x_lo, x_hi, horizon, seed)
            }
            ModelParams::SpinFlip { nu, rho } => {
                spinflip::spinflip_simulate(*nu, *rho, x_lo, x_hi, horizon, seed)
            }
            ModelParams::Renewal { weights } => {
                renewal::renewal_simulate(weights, x_lo, x_hi, horizon, seed)
            }
            ModelParams::East { rho, boundary, init } => {
                east::east_simulate(*rho, init, x_lo, x_hi, horizon, *boundary, seed)
                    .map(|(_, traj)| traj)
            }
            ModelParams::Contact { lambda, boundary, warmup } => {
                contact::contact_simulate_stationary(
                    *lambda, x_lo, x_hi, horizon, *boundary, *warmup, seed,
                )
            }
        }
    }

    /// Build the cheapest faithful realization: lazy per-site generation for
    /// product models, a full materialization otherwise.
    pub fn instantiate(
        &self,
        x_lo: i64,
        x_hi: i64,
        horizon: f64,
        seed: u64,
    ) -> Result<EnvInstance> {
        let law = match self {
            ModelParams::Constant { state } => ProductLaw::Constant { state: *state, horizon },
            ModelParams::SpinFlip { nu, rho } => {
                spinflip::validate(*nu, *rho)?;
                ProductLaw::SpinFlip { nu: *nu, rho: *rho, horizon, seed }
            }
            ModelParams::Renewal { weights } => ProductLaw::Renewal {
                chain: renewal::RenewalLaw::new(weights)?,
                horizon,
                seed,
            },
            _ => return self.materialize(x_lo, x_hi, horizon, seed).map(EnvInstance::Eager),
        };
        Ok(EnvInstance::Product(LazyProductEnv::new(law, x_lo, x_hi)?))
    }
}

/// Read access to a realized environment. `state_before` is the value just
/// before t (the left limit), which is what a walker reads at one of its own
/// jump times; `state_at` is the right-continuous value at t.
pub trait Environment {
    fn state_at(&mut self, x: i64, t: f64) -> Result<u16>;
    fn state_before(&mut self, x: i64, t: f64) -> Result<u16>;
    /// Inclusive site range that may be queried.
    fn site_window(&self) -> (i64, i64);
    fn horizon(&self) -> f64;
}

fn check_query(x: i64, t: f64, window: (i64, i64), horizon: f64) -> Result<()> {
    if x < window.0 || x > window.1 {
        return Err(Error::param(format!(
            "site {x} outside simulated window [{}, {}]",
            window.0, window.1
        )));
    }
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::param(format!("time {t} outside [0, {horizon}]")));
    }
    Ok(())
}

/// A materialized environment realization: initial states plus per-site
/// sorted (time, new state) change events.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvTrajectory {
    pub space: StateSpace,
    pub params: ModelParams,
    pub x_lo: i64,
    pub horizon: f64,
    /// State at t = 0, one entry per window site.
    pub init: Vec<u16>,
    /// Per-site change events, strictly increasing in time; each entry's
    /// state differs from the state it replaces.
    pub events: Vec<Vec<(f64, u16)>>,
}

impl EnvTrajectory {
    pub fn site_window(&self) -> (i64, i64) {
        (self.x_lo, self.x_lo + self.init.len() as i64 - 1)
    }

    fn site_index(&self, x: i64) -> usize {
        (x - self.x_lo) as usize
    }

    /// Right-continuous value at (x, t).
    pub fn state_at(&self, x: i64, t: f64) -> Result<u16> {
        check_query(x, t, self.site_window(), self.horizon)?;
        let i = self.site_index(x);
        let evs = &self.events[i];
        let pos = evs.partition_point(|e| e.0 <= t);
        Ok(if pos == 0 { self.init[i] } else { evs[pos - 1].1 })
    }

    /// Left limit at (x, t): the value an observer sees immediately before
    /// any transition scheduled exactly at t.
    pub fn state_before(&self, x: i64, t: f64) -> Result<u16> {
        check_query(x, t, self.site_window(), self.horizon)?;
        let i = self.site_index(x);
        let evs = &self.events[i];
        let pos = evs.partition_point(|e| e.0 < t);
        Ok(if pos == 0 { self.init[i] } else { evs[pos - 1].1 })
    }

    /// Check the structural guarantees: sorted, strictly increasing event
    /// times, every event an actual change, all times in (0, horizon).
    pub fn validate(&self) -> Result<()> {
        if self.init.len() != self.events.len() {
            return Err(Error::invariant("init/events length mismatch"));
        }
        for (i, evs) in self.events.iter().enumerate() {
            let mut prev_t = 0.0;
            let mut prev_s = self.init[i];
            for &(t, s) in evs {
                if !(t > prev_t && t < self.horizon) {
                    return Err(Error::invariant(format!(
                        "event time {t} out of order at site {}",
                        self.x_lo + i as i64
                    )));
                }
                if s == prev_s {
                    return Err(Error::invariant(format!(
                        "no-op event at site {} time {t}",
                        self.x_lo + i as i64
                    )));
                }
                prev_t = t;
                prev_s = s;
            }
        }
        Ok(())
    }

    /// Binary event-log dump: a JSON header (state space + model parameters)
    /// followed by per-site length-prefixed (f64 time, u16 state) records.
    pub fn write_event_log(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(b"RWEL\x01")?;
        let header = serde_json::to_vec(&(&self.space, &self.params))
            .map_err(|e| Error::Format(format!("event-log header: {e}")))?;
        f.write_all(&(header.len() as u32).to_le_bytes())?;
        f.write_all(&header)?;
        f.write_all(&self.x_lo.to_le_bytes())?;
        f.write_all(&(self.init.len() as u64).to_le_bytes())?;
        f.write_all(&self.horizon.to_le_bytes())?;
        for (i, evs) in self.events.iter().enumerate() {
            f.write_all(&self.init[i].to_le_bytes())?;
            f.write_all(&(evs.len() as u64).to_le_bytes())?;
            for &(t, s) in evs {
                f.write_all(&t.to_le_bytes())?;
                f.write_all(&s.to_le_bytes())?;
            }
        }
        f.flush()?;
        Ok(())
    }

    pub fn read_event_log(path: &Path) -> Result<EnvTrajectory> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 5];
        f.read_exact(&mut magic)?;
        if &magic != b"RWEL\x01" {
            return Err(Error::Format("not an event-log file".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        let mut b2 = [0u8; 2];
        f.read_exact(&mut b4)?;
        let mut header = vec![0u8; u32::from_le_bytes(b4) as usize];
        f.read_exact(&mut header)?;
        let (space, params): (StateSpace, ModelParams) = serde_json::from_slice(&header)
            .map_err(|e| Error::Format(format!("event-log header: {e}")))?;
        f.read_exact(&mut b8)?;
        let x_lo = i64::from_le_bytes(b8);
        f.read_exact(&mut b8)?;
        let nsites = u64::from_le_bytes(b8) as usize;
        f.read_exact(&mut b8)?;
        let horizon = f64::from_le_bytes(b8);
        let mut init = Vec::with_capacity(nsites);
        let mut events = Vec::with_capacity(nsites);
        for _ in 0..nsites {
            f.read_exact(&mut b2)?;
            init.push(u16::from_le_bytes(b2));
            f.read_exact(&mut b8)?;
            let n = u64::from_le_bytes(b8) as usize;
            let mut evs = Vec::with_capacity(n);
            for _ in 0..n {
                f.read_exact(&mut b8)?;
                let t = f64::from_le_bytes(b8);
                f.read_exact(&mut b2)?;
                evs.push((t, u16::from_le_bytes(b2)));
            }
            events.push(evs);
        }
        let traj = EnvTrajectory { space, params, x_lo, horizon, init, events };
        traj.validate()?;
        Ok(traj)
    }
}

impl Environment for EnvTrajectory {
    fn state_at(&mut self, x: i64, t: f64) -> Result<u16> {
        EnvTrajectory::state_at(self, x, t)
    }

    fn state_before(&mut self, x: i64, t: f64) -> Result<u16> {
        EnvTrajectory::state_before(self, x, t)
    }

    fn site_window(&self) -> (i64, i64) {
        EnvTrajectory::site_window(self)
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }
}

/// One site's law in a product (site-independent) environment: a pure
/// function of the site index.
pub trait SiteLaw {
    fn space(&self) -> StateSpace;
    fn horizon(&self) -> f64;
    /// (initial state, sorted change events) for site x.
    fn sample_site(&self, x: i64) -> (u16, Vec<(f64, u16)>);
}

/// Concrete site laws, enumerated so callers stay monomorphic.
#[derive(Debug, Clone)]
pub enum ProductLaw {
    Constant { state: u16, horizon: f64 },
    SpinFlip { nu: f64, rho: f64, horizon: f64, seed: u64 },
    Renewal { chain: renewal::RenewalLaw, horizon: f64, seed: u64 },
}

impl SiteLaw for ProductLaw {
    fn space(&self) -> StateSpace {
        match self {
            ProductLaw::Renewal { .. } => StateSpace::Counter,
            _ => StateSpace::Binary,
        }
    }

    fn horizon(&self) -> f64 {
        match self {
            ProductLaw::Constant { horizon, .. }
            | ProductLaw::SpinFlip { horizon, .. }
            | ProductLaw::Renewal { horizon, .. } => *horizon,
        }
    }

    fn sample_site(&self, x: i64) -> (u16, Vec<(f64, u16)>) {
        match self {
            ProductLaw::Constant { state, .. } => (*state, Vec::new()),
            ProductLaw::SpinFlip { nu, rho, horizon, seed } => {
                spinflip::sample_site(*nu, *rho, *horizon, *seed, x)
            }
            ProductLaw::Renewal { chain, horizon, seed } => {
                chain.sample_site(*horizon, *seed, x)
            }
        }
    }
}

/// Site-independent environment that materializes trajectories on first
/// query, so a walker pays only for the sites it visits.
#[derive(Debug, Clone)]
pub struct LazyProductEnv<L: SiteLaw> {
    law: L,
    x_lo: i64,
    x_hi: i64,
    cache: HashMap<i64, (u16, Vec<(f64, u16)>)>,
}

impl<L: SiteLaw> LazyProductEnv<L> {
    pub fn new(law: L, x_lo: i64, x_hi: i64) -> Result<Self> {
        if x_lo > x_hi {
            return Err(Error::param(format!("empty site window [{x_lo}, {x_hi}]")));
        }
        Ok(LazyProductEnv { law, x_lo, x_hi, cache: HashMap::new() })
    }

    fn site(&mut self, x: i64) -> &(u16, Vec<(f64, u16)>) {
        self.cache.entry(x).or_insert_with(|| self.law.sample_site(x))
    }

    pub fn touched_sites(&self) -> usize {
        self.cache.len()
    }
}

impl<L: SiteLaw> Environment for LazyProductEnv<L> {
    fn state_at(&mut self, x: i64, t: f64) -> Result<u16> {
        check_query(x, t, (self.x_lo, self.x_hi), self.law.horizon())?;
        let (init, evs) = self.site(x);
        let pos = evs.partition_point(|e| e.0 <= t);
        Ok(if pos == 0 { *init } else { evs[pos - 1].1 })
    }

    fn state_before(&mut self, x: i64, t: f64) -> Result<u16> {
        check_query(x, t, (self.x_lo, self.x_hi), self.law.horizon())?;
        let (init, evs) = self.site(x);
        let pos = evs.partition_point(|e| e.0 < t);
        Ok(if pos == 0 { *init } else { evs[pos - 1].1 })
    }

    fn site_window(&self) -> (i64, i64) {
        (self.x_lo, self.x_hi)
    }

    fn horizon(&self) -> f64 {
        self.law.horizon()
    }
}

/// A realized environment of any model, behind one concrete type.
#[derive(Debug, Clone)]
pub enum EnvInstance {
    Eager(EnvTrajectory),
    Product(LazyProductEnv<ProductLaw>),
}

impl Environment for EnvInstance {
    fn state_at(&mut self, x: i64, t: f64) -> Result<u16> {
        match self {
            EnvInstance::Eager(e) => Environment::state_at(e, x, t),
            EnvInstance::Product(e) => e.state_at(x, t),
        }
    }

    fn state_before(&mut self, x: i64, t: f64) -> Result<u16> {
        match self {
            EnvInstance::Eager(e) => Environment::state_before(e, x, t),
            EnvInstance::Product(e) => e.state_before(x, t),
        }
    }

    fn site_window(&self) -> (i64, i64) {
        match self {
            EnvInstance::Eager(e) => EnvTrajectory::site_window(e),
            EnvInstance::Product(e) => e.site_window(),
        }
    }

    fn horizon(&self) -> f64 {
        match self {
            EnvInstance::Eager(e) => e.horizon,
            EnvInstance::Product(e) => e.horizon(),
        }
    }
}

fn constant_trajectory(
    state: u16,
    x_lo: i64,
    x_hi: i64,
    horizon: f64,
    _seed: u64,
) -> Result<EnvTrajectory> {
    if x_lo > x_hi {
        return Err(Error::param(format!("empty site window [{x_lo}, {x_hi}]")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::param(format!("horizon {horizon} must be positive and finite")));
    }
    let n = (x_hi - x_lo + 1) as usize;
    Ok(EnvTrajectory {
        space: StateSpace::Binary,
        params: ModelParams::Constant { state },
        x_lo,
        horizon,
        init: vec![state; n],
        events: vec![Vec::new(); n],
    })
}

pub(crate) fn validate_window_horizon(x_lo: i64, x_hi: i64, horizon: f64) -> Result<()> {
    if x_lo > x_hi {
        return Err(Error::param(format!("empty site window [{x_lo}, {x_hi}]")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::param(format!("horizon {horizon} must be positive and finite")));
    }
    Ok(())
}
