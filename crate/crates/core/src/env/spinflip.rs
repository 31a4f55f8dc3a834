//! Independent spin-flip dynamics: every site refreshes at rate nu to 1 with
//! probability rho, 0 otherwise, started from its own stationary product
//! Bernoulli(rho) law. The single-site autocovariance has the closed form
//! rho(1-rho)e^{-nu r}, which doubles as the oracle for covariance
//! estimators.

use crate::clock::{fill_site_arrivals, Arrival};
use crate::env::{validate_window_horizon, EnvTrajectory, ModelParams, StateSpace};
use crate::error::Result;
use crate::rng::{stream, SplitRng};

pub(crate) fn validate(nu: f64, rho: f64) -> Result<()> {
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(crate::error::Error::param(format!("refresh rate {nu} must be >= 0")));
    }
    if !(0.0 < rho && rho < 1.0) {
        return Err(crate::error::Error::param(format!("density {rho} outside (0, 1)")));
    }
    Ok(())
}

/// Initial state plus change events for one site; a pure function of
/// (seed, x), so lazy and eager realizations agree bit for bit.
pub fn sample_site(nu: f64, rho: f64, horizon: f64, seed: u64, x: i64) -> (u16, Vec<(f64, u16)>) {
    let root = SplitRng::new(seed);
    let mut init_rng = root.stream(stream::INIT).site(x);
    let mut state = u16::from(init_rng.f64() < rho);
    let init = state;
    let mut arrivals: Vec<Arrival> = Vec::new();
    fill_site_arrivals(&root.stream(stream::ENV), nu, horizon, x, &mut arrivals);
    let mut events = Vec::new();
    for a in &arrivals {
        let fresh = u16::from(a.u < rho);
        if fresh != state {
            events.push((a.t, fresh));
            state = fresh;
        }
    }
    (init, events)
}

pub fn spinflip_simulate(
    nu: f64,
    rho: f64,
    x_lo: i64,
    x_hi: i64,
    horizon: f64,
    seed: u64,
) -> Result<EnvTrajectory> {
    validate(nu, rho)?;
    validate_window_horizon(x_lo, x_hi, horizon)?;
    let n = (x_hi - x_lo + 1) as usize;
    let mut init = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for x in x_lo..=x_hi {
        let (i, e) = sample_site(nu, rho, horizon, seed, x);
        init.push(i);
        events.push(e);
    }
    Ok(EnvTrajectory {
        space: StateSpace::Binary,
        params: ModelParams::SpinFlip { nu, rho },
        x_lo,
        horizon,
        init,
        events,
    })
}

/// Stationary single-site autocovariance at time lag r.
pub fn spinflip_autocovariance(nu: f64, rho: f64, r: f64) -> f64 {
    rho * (1.0 - rho) * (-nu * r).exp()
}
