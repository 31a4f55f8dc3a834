//! Independent per-site renewal chains on the nonnegative integers: from any
//! state n > 0 the chain steps down to n-1 at rate 1; from 0 it jumps at
//! rate 1 to k with probability p_k proportional to the weight a_k. The
//! stationary law is the normalized tail sum of the weights, with the mass
//! at 0 fixed by flow balance across the 0-1 edge.

use crate::clock::{fill_site_arrivals, Arrival};
use crate::env::{validate_window_horizon, EnvTrajectory, ModelParams, StateSpace};
use crate::error::{Error, Result};
use crate::rng::{stream, SplitRng};

fn validate_weights(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::param("renewal weights must be nonempty"));
    }
    let mut total = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::param(format!("weight a_{} = {w} must be finite and >= 0", i + 1)));
        }
        total += w;
    }
    if total <= 0.0 {
        return Err(Error::param("renewal weights must be positive somewhere"));
    }
    Ok(total)
}

/// Stationary law over states {0, ..., n_max} for jump weights
/// `weights[k-1] = a_k`: mass at n >= 1 proportional to the tail sum of the
/// weights from n, and mass at 0 equal to the mass at 1 (balance across the
/// 0-1 edge, since every visit to 1 steps down and every exit from 0 jumps
/// up through it).
pub fn renewal_stationary(weights: &[f64]) -> Result<Vec<f64>> {
    validate_weights(weights)?;
    let n = weights.len();
    let mut tail = vec![0.0; n + 1];
    for k in (1..=n).rev() {
        tail[k] = weights[k - 1] + if k < n { tail[k + 1] } else { 0.0 };
    }
    tail[0] = tail[1];
    let z: f64 = tail.iter().sum();
    Ok(tail.into_iter().map(|q| q / z).collect())
}

/// The same law derived the other way: fix pi(0) = 1 and unwind the balance
/// equations pi(n) = pi(n+1) + pi(0) p_n downward from n_max, then check
/// that the recursion closes with pi(1) = pi(0) before normalizing.
pub fn renewal_stationary_from_balance(weights: &[f64]) -> Result<Vec<f64>> {
    let total = validate_weights(weights)?;
    let n = weights.len();
    let mut pi = vec![0.0; n + 1];
    pi[0] = 1.0;
    for k in (1..=n).rev() {
        pi[k] = weights[k - 1] / total + if k < n { pi[k + 1] } else { 0.0 };
    }
    if (pi[1] - pi[0]).abs() > 1e-12 {
        return Err(Error::invariant(format!(
            "balance recursion failed to close: pi(1) = {}, pi(0) = 1",
            pi[1]
        )));
    }
    let z: f64 = pi.iter().sum();
    Ok(pi.into_iter().map(|q| q / z).collect())
}

/// Max absolute net probability flow under the generator at `pi`; zero (to
/// rounding) exactly at the stationary law.
pub fn renewal_generator_residual(weights: &[f64], pi: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let n = weights.len();
    assert_eq!(pi.len(), n + 1, "law must cover states 0..=n_max");
    let mut worst: f64 = (pi[1] - pi[0]).abs();
    for m in 1..=n {
        let inflow = if m < n { pi[m + 1] } else { 0.0 } + pi[0] * weights[m - 1] / total;
        worst = worst.max((inflow - pi[m]).abs());
    }
    worst
}

/// Validated weights with precomputed jump and stationary CDFs.
#[derive(Debug, Clone)]
pub struct RenewalLaw {
    weights: Vec<f64>,
    /// CDF of the from-0 jump target over k = 1..=n_max.
    jump_cdf: Vec<f64>,
    /// CDF of the stationary law over states 0..=n_max.
    stationary_cdf: Vec<f64>,
    pub stationary: Vec<f64>,
}

impl RenewalLaw {
    pub fn new(weights: &[f64]) -> Result<Self> {
        let total = validate_weights(weights)?;
        let stationary = renewal_stationary(weights)?;
        let mut jump_cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in weights {
            acc += w / total;
            jump_cdf.push(acc);
        }
        let mut stationary_cdf = Vec::with_capacity(stationary.len());
        let mut acc = 0.0;
        for &q in &stationary {
            acc += q;
            stationary_cdf.push(acc);
        }
        Ok(RenewalLaw {
            weights: weights.to_vec(),
            jump_cdf,
            stationary_cdf,
            stationary,
        })
    }

    pub fn n_states(&self) -> usize {
        self.weights.len() + 1
    }

    fn draw_stationary(&self, u: f64) -> u16 {
        // Last bucket absorbs rounding in the CDF's final entry.
        let pos = self.stationary_cdf.partition_point(|&c| c <= u);
        pos.min(self.stationary_cdf.len() - 1) as u16
    }

    fn draw_jump(&self, u: f64) -> u16 {
        let pos = self.jump_cdf.partition_point(|&c| c <= u);
        (pos.min(self.jump_cdf.len() - 1) + 1) as u16
    }

    /// Pure per-site realization: stationary draw at t = 0, then rate-1
    /// rings stepping down from positive states and resampling from 0.
    pub fn sample_site(&self, horizon: f64, seed: u64, x: i64) -> (u16, Vec<(f64, u16)>) {
        let root = SplitRng::new(seed);
        let mut init_rng = root.stream(stream::INIT).site(x);
        let mut state = self.draw_stationary(init_rng.f64());
        let init = state;
        let mut arrivals: Vec<Arrival> = Vec::new();
        fill_site_arrivals(&root.stream(stream::ENV), 1.0, horizon, x, &mut arrivals);
        let mut events = Vec::with_capacity(arrivals.len());
        for a in &arrivals {
            let next = if state > 0 {
                // Positive states move down by exactly one per ring.
                state - 1
            } else {
                self.draw_jump(a.u)
            };
            debug_assert!(state == 0 || next + 1 == state);
            events.push((a.t, next));
            state = next;
        }
        (init, events)
    }
}

pub fn renewal_simulate(
    weights: &[f64],
    x_lo: i64,
    x_hi: i64,
    horizon: f64,
    seed: u64,
) -> Result<EnvTrajectory> {
    validate_window_horizon(x_lo, x_hi, horizon)?;
    let law = RenewalLaw::new(weights)?;
    let n = (x_hi - x_lo + 1) as usize;
    let mut init = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for x in x_lo..=x_hi {
        let (i, e) = law.sample_site(horizon, seed, x);
        init.push(i);
        events.push(e);
    }
    Ok(EnvTrajectory {
        space: StateSpace::Counter,
        params: ModelParams::Renewal { weights: weights.to_vec() },
        x_lo,
        horizon,
        init,
        events,
    })
}

/// Fraction of (site, time) mass spent in each state over the whole window,
/// one entry per state in 0..n_states.
pub fn occupation_frequencies(traj: &EnvTrajectory, n_states: usize) -> Vec<f64> {
    let mut time_in = vec![0.0; n_states];
    for (i, evs) in traj.events.iter().enumerate() {
        let mut t = 0.0;
        let mut s = traj.init[i] as usize;
        for &(et, es) in evs {
            time_in[s] += et - t;
            t = et;
            s = es as usize;
        }
        time_in[s] += traj.horizon - t;
    }
    let total = traj.horizon * traj.events.len() as f64;
    time_in.into_iter().map(|w| w / total).collect()
}
