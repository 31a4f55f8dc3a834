//! Per-site Poisson clocks with paired uniforms.
//!
//! A clock field assigns every site an independent rate-`rate` Poisson
//! process on [0, horizon), each arrival carrying one uniform in [0, 1).
//! The same field drives environment updates and walker jumps, which is what
//! makes coupled constructions (shared randomness across starting points,
//! regeneration of single sites) exact rather than approximate.
//!
//! Site lists are pure functions of (seed, site): regenerating one site in
//! isolation yields bit-identical arrivals. Ties across sites are broken by
//! ordering events lexicographically by (time, site); all event processing in
//! this crate uses that order, so two arrivals never count as simultaneous.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::rng::{stream, SplitRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub t: f64,
    pub u: f64,
}

/// Outcome of asking for the next arrival at a site strictly after a time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClockStep {
    Arrival(Arrival),
    /// No further arrival before the horizon.
    Exhausted,
    /// The site lies outside the sampled window.
    OutOfWindow,
}

/// Common interface of the eager and lazy clock fields.
pub trait Clocks {
    fn next_after(&mut self, x: i64, t: f64) -> ClockStep;
    fn horizon(&self) -> f64;
    /// Inclusive site range the field can answer for.
    fn site_window(&self) -> (i64, i64);
    /// The arrival at site x happening exactly at time t, if any.
    fn arrival_at(&mut self, x: i64, t: f64) -> Option<Arrival>;
}

fn validate(rate: f64, horizon: f64) -> Result<()> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(Error::param(format!("clock rate {rate} must be finite and >= 0")));
    }
    if !horizon.is_finite() || horizon < 0.0 {
        return Err(Error::param(format!("horizon {horizon} must be finite and >= 0")));
    }
    Ok(())
}

/// Canonical per-site generator shared by every clock-field flavour.
///
/// `root` must already be the field's clock stream (seed split by
/// `stream::CLOCK` or a sibling label); the site split happens here.
pub fn fill_site_arrivals(root: &SplitRng, rate: f64, horizon: f64, x: i64, out: &mut Vec<Arrival>) {
    out.clear();
    if rate == 0.0 {
        return;
    }
    let mut rng = root.site(x);
    let mut t = 0.0f64;
    loop {
        let next = t + rng.exp1() / rate;
        // A gap below one ulp of t would collapse two arrivals onto the same
        // float; nudge upward so per-site times stay strictly increasing.
        t = if next > t { next } else { t.next_up() };
        if t >= horizon {
            return;
        }
        let u = rng.f64();
        out.push(Arrival { t, u });
    }
}

fn next_after_in(list: &[Arrival], t: f64) -> ClockStep {
    let i = list.partition_point(|a| a.t <= t);
    match list.get(i) {
        Some(a) => ClockStep::Arrival(*a),
        None => ClockStep::Exhausted,
    }
}

fn arrival_at_in(list: &[Arrival], t: f64) -> Option<Arrival> {
    let i = list.partition_point(|a| a.t < t);
    list.get(i).filter(|a| a.t == t).copied()
}

/// Fully materialized clock field on an inclusive site window.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockField {
    x_lo: i64,
    rate: f64,
    horizon: f64,
    seed: u64,
    sites: Vec<Vec<Arrival>>,
}

/// Samples the field for sites `x_lo..=x_hi`.
pub fn sample_clock_field(x_lo: i64, x_hi: i64, rate: f64, horizon: f64, seed: u64) -> Result<ClockField> {
    validate(rate, horizon)?;
    if x_lo > x_hi {
        return Err(Error::param(format!("empty site window [{x_lo}, {x_hi}]")));
    }
    let root = SplitRng::new(seed).stream(stream::CLOCK);
    let n = (x_hi - x_lo + 1) as usize;
    let mut sites = Vec::with_capacity(n);
    let mut buf = Vec::new();
    for x in x_lo..=x_hi {
        fill_site_arrivals(&root, rate, horizon, x, &mut buf);
        sites.push(buf.clone());
    }
    Ok(ClockField { x_lo, rate, horizon, seed, sites })
}

impl ClockField {
    pub fn window(&self) -> (i64, i64) {
        (self.x_lo, self.x_lo + self.sites.len() as i64 - 1)
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn arrivals(&self, x: i64) -> Option<&[Arrival]> {
        let (lo, hi) = self.window();
        if x < lo || x > hi {
            return None;
        }
        Some(&self.sites[(x - lo) as usize])
    }

    pub fn total_arrivals(&self) -> usize {
        self.sites.iter().map(Vec::len).sum()
    }

    /// All events in (time, site) lexicographic order.
    pub fn merged_events(&self) -> Vec<(f64, i64, f64)> {
        let mut all: Vec<(f64, i64, f64)> = Vec::with_capacity(self.total_arrivals());
        for (i, list) in self.sites.iter().enumerate() {
            let x = self.x_lo + i as i64;
            all.extend(list.iter().map(|a| (a.t, x, a.u)));
        }
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all
    }

    /// Binary cache: little-endian header (x_lo, site count, rate, horizon,
    /// seed) followed by one length-prefixed (t, u) array per site.
    pub fn write_cache<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(b"RWCK\x01")?;
        w.write_all(&self.x_lo.to_le_bytes())?;
        w.write_all(&(self.sites.len() as u64).to_le_bytes())?;
        w.write_all(&self.rate.to_le_bytes())?;
        w.write_all(&self.horizon.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for list in &self.sites {
            w.write_all(&(list.len() as u64).to_le_bytes())?;
            for a in list {
                w.write_all(&a.t.to_le_bytes())?;
                w.write_all(&a.u.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_cache<R: Read>(r: &mut R) -> Result<ClockField> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != b"RWCK\x01" {
            return Err(Error::Format("bad magic or version".into()));
        }
        let x_lo = read_i64(r)?;
        let count = read_u64(r)?;
        if count > (1 << 32) {
            return Err(Error::Format(format!("implausible site count {count}")));
        }
        let rate = read_f64(r)?;
        let horizon = read_f64(r)?;
        let seed = read_u64(r)?;
        let mut sites = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let len = read_u64(r)? as usize;
            let mut list = Vec::with_capacity(len);
            let mut prev = f64::NEG_INFINITY;
            for _ in 0..len {
                let t = read_f64(r)?;
                let u = read_f64(r)?;
                if t <= prev {
                    return Err(Error::Format("arrival times not strictly increasing".into()));
                }
                prev = t;
                list.push(Arrival { t, u });
            }
            sites.push(list);
        }
        Ok(ClockField { x_lo, rate, horizon, seed, sites })
    }
}

impl Clocks for ClockField {
    fn next_after(&mut self, x: i64, t: f64) -> ClockStep {
        match self.arrivals(x) {
            None => ClockStep::OutOfWindow,
            Some(list) => next_after_in(list, t),
        }
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn site_window(&self) -> (i64, i64) {
        self.window()
    }

    fn arrival_at(&mut self, x: i64, t: f64) -> Option<Arrival> {
        self.arrivals(x).and_then(|list| arrival_at_in(list, t))
    }
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_i64<R: Read>(r: &mut R) -> Result<i64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(i64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Unbounded-window clock field that materializes sites on first touch.
/// Identical per-site output to [`ClockField`] under the same seed.
#[derive(Debug, Clone)]
pub struct LazyClockField {
    root: SplitRng,
    rate: f64,
    horizon: f64,
    cache: HashMap<i64, Vec<Arrival>>,
}

impl LazyClockField {
    pub fn new(rate: f64, horizon: f64, seed: u64) -> Result<Self> {
        validate(rate, horizon)?;
        Ok(LazyClockField {
            root: SplitRng::new(seed).stream(stream::CLOCK),
            rate,
            horizon,
            cache: HashMap::new(),
        })
    }

    pub fn arrivals(&mut self, x: i64) -> &[Arrival] {
        let root = self.root;
        let rate = self.rate;
        let horizon = self.horizon;
        self.cache.entry(x).or_insert_with(|| {
            let mut buf = Vec::new();
            fill_site_arrivals(&root, rate, horizon, x, &mut buf);
            buf
        })
    }
}

impl Clocks for LazyClockField {
    fn next_after(&mut self, x: i64, t: f64) -> ClockStep {
        next_after_in(self.arrivals(x), t)
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn site_window(&self) -> (i64, i64) {
        (i64::MIN, i64::MAX)
    }

    fn arrival_at(&mut self, x: i64, t: f64) -> Option<Arrival> {
        arrival_at_in(self.arrivals(x), t)
    }
}
