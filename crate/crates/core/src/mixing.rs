//! Empirical space-time mixing checks: box observables, paired-box
//! covariance estimation over independent stationary replicas, and
//! decay-exponent fits over a ladder of box separations.
//!
//! Trajectories are piecewise constant, so box averages are computed exactly
//! from the event logs rather than on a sampling grid. Any finite family of
//! observables can only witness a lower bound on the worst-case covariance
//! over all [0,1]-valued functions; the profile here is evidence of mixing,
//! not a certificate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{EnvTrajectory, ModelParams};
use crate::error::{Error, Result};
use crate::lattice::SpaceTimeBox;
use crate::rng::{stream, SplitRng};
use crate::stats::{normal_quantile, EstimateWithCI};

/// How a box observable reduces the trajectory inside its region. States are
/// mapped to occupation through the indicator of being nonzero; covariances
/// are unchanged under complementing, so this convention is harmless for
/// models whose natural marker is the zero state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservableKind {
    /// Occupation indicator at one marked space-time point of the region.
    SiteAt { x: i64, t: f64 },
    /// Space-time average occupation over the region.
    BoxMean,
    /// Indicator that the region's average occupation is at least `level`.
    ThresholdMean { level: f64 },
}

/// A [0,1]-valued function of the environment supported on one box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxObservable {
    pub region: SpaceTimeBox,
    pub kind: ObservableKind,
}

fn occ(state: u16) -> f64 {
    if state != 0 {
        1.0
    } else {
        0.0
    }
}

impl BoxObservable {
    pub fn validate(&self) -> Result<()> {
        if self.region.sites().is_empty() {
            return Err(Error::param("observable region contains no lattice sites"));
        }
        match self.kind {
            ObservableKind::SiteAt { x, t } => {
                if !self.region.contains(x as f64, t) {
                    return Err(Error::param(format!(
                        "marked point ({x}, {t}) outside the observable's region"
                    )));
                }
            }
            ObservableKind::BoxMean => {}
            ObservableKind::ThresholdMean { level } => {
                if !level.is_finite() {
                    return Err(Error::param(format!("threshold {level} must be finite")));
                }
            }
        }
        Ok(())
    }

    /// The same observable moved `dt` later in time.
    pub fn shifted_in_time(&self, dt: f64) -> Result<BoxObservable> {
        let region = SpaceTimeBox::new(
            self.region.x_lo,
            self.region.x_hi,
            self.region.t_lo + dt,
            self.region.t_hi + dt,
        )?;
        let kind = match self.kind {
            ObservableKind::SiteAt { x, t } => ObservableKind::SiteAt { x, t: t + dt },
            other => other,
        };
        Ok(BoxObservable { region, kind })
    }

    /// Exact space-time average occupation over the region, integrated
    /// piecewise against the event log.
    fn region_mean(&self, traj: &EnvTrajectory) -> Result<f64> {
        let sites = self.region.sites();
        let span = self.region.time_span();
        let (t0, t1) = (self.region.t_lo, self.region.t_hi);
        let mut acc = 0.0;
        for x in sites.clone() {
            let mut cur = occ(traj.state_at(x, t0)?);
            let mut last = t0;
            let idx = (x - traj.x_lo) as usize;
            for &(te, s) in &traj.events[idx] {
                if te <= t0 {
                    continue;
                }
                if te >= t1 {
                    break;
                }
                acc += cur * (te - last);
                cur = occ(s);
                last = te;
            }
            acc += cur * (t1 - last);
        }
        Ok(acc / (sites.count() as f64 * span))
    }

    /// Evaluates the observable on one trajectory; always lands in [0, 1].
    pub fn evaluate(&self, traj: &EnvTrajectory) -> Result<f64> {
        self.validate()?;
        match self.kind {
            ObservableKind::SiteAt { x, t } => Ok(occ(traj.state_at(x, t)?)),
            ObservableKind::BoxMean => self.region_mean(traj),
            ObservableKind::ThresholdMean { level } => {
                Ok(if self.region_mean(traj)? >= level { 1.0 } else { 0.0 })
            }
        }
    }
}

/// Window the simulation must cover for these observables, plus the horizon.
fn needed_window(observables: &[&BoxObservable]) -> Result<(i64, i64, f64)> {
    let mut lo = i64::MAX;
    let mut hi = i64::MIN;
    let mut horizon = 0.0f64;
    for obs in observables {
        obs.validate()?;
        let sites = obs.region.sites();
        lo = lo.min(sites.start);
        hi = hi.max(sites.end - 1);
        horizon = horizon.max(obs.region.t_hi);
        if obs.region.t_lo < 0.0 {
            return Err(Error::param("observable region starts before time 0"));
        }
    }
    Ok((lo, hi, horizon))
}

/// Extra sites beyond the observables' span so that frozen boundaries cannot
/// influence the measured boxes: information spreads at a rate bounded by
/// the model's jump rates. Site-independent models need no shielding.
fn boundary_pad(params: &ModelParams, horizon: f64) -> i64 {
    match params {
        ModelParams::Contact { lambda, .. } => {
            ((1.0 + 2.0 * lambda) * horizon).ceil() as i64 + 20
        }
        ModelParams::East { .. } => horizon.ceil() as i64 + 20,
        _ => 2,
    }
}

/// One stationary replica per seed, evaluating each observable in `fs`.
fn replica_rows(
    params: &ModelParams,
    fs: &[&BoxObservable],
    replicas: u64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let (lo, hi, horizon) = needed_window(fs)?;
    let pad = boundary_pad(params, horizon);
    let root = SplitRng::new(seed).stream(stream::REPLICA);
    (0..replicas)
        .into_par_iter()
        .map(|i| {
            let traj = params.materialize(lo - pad, hi + pad, horizon, root.index(i).next())?;
            fs.iter().map(|f| f.evaluate(&traj)).collect()
        })
        .collect()
}

/// Sample covariance with a delete-one jackknife half-width. Products
/// commute exactly, so swapping the columns gives bitwise the same result.
fn paired_covariance_ci(xs: &[f64], ys: &[f64], level: f64, seed: u64) -> Result<EstimateWithCI> {
    let n = xs.len();
    if n < 30 {
        return Err(Error::stats(format!("{n} replicas; covariance CI needs at least 30")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let point =
        xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (nf - 1.0);
    // Delete-one estimates from sufficient sums of the centered columns:
    // centering by the full-sample means keeps the sums small and cancels
    // exactly in the leave-one-out algebra below.
    let (mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (cx, cy) = (x - mx, y - my);
        sx += cx;
        sy += cy;
        sxy += cx * cy;
    }
    let m = nf - 1.0;
    let mut loo = Vec::with_capacity(n);
    for (x, y) in xs.iter().zip(ys) {
        let (cx, cy) = (x - mx, y - my);
        loo.push(((sxy - cx * cy) - (sx - cx) * (sy - cy) / m) / (m - 1.0));
    }
    let lmean = loo.iter().sum::<f64>() / nf;
    let var = loo.iter().map(|v| (v - lmean) * (v - lmean)).sum::<f64>() * m / nf;
    let z = normal_quantile(0.5 + level / 2.0)?;
    Ok(EstimateWithCI { point, half_width: z * var.sqrt(), replicas: n as u64, level, seed })
}

/// Estimates Cov(f1, f2) over independent stationary environment replicas.
/// Pairs whose regions overlap in time are legal inputs; use
/// [`crate::lattice::time_distance`] to check separation when the estimate
/// feeds a decay profile.
pub fn estimate_box_covariance(
    params: &ModelParams,
    f1: &BoxObservable,
    f2: &BoxObservable,
    replicas: u64,
    seed: u64,
) -> Result<EstimateWithCI> {
    let rows = replica_rows(params, &[f1, f2], replicas, seed)?;
    let xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    paired_covariance_ci(&xs, &ys, 0.95, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// cov(r) ~ c * r^(-exponent), fitted in log-log coordinates.
    PowerLaw,
    /// cov(r) ~ c * exp(-exponent * r), fitted in log-linear coordinates.
    Exponential,
}

/// What the profile concluded about the decay of covariances in r.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum DecayOutcome {
    /// Every estimate sits within its own half-width of zero: decay is
    /// faster than this replica budget can resolve.
    BelowNoiseFloor,
    /// Fewer than three positive estimates; no exponent can be fitted.
    TooFewPositive,
    Fit { model: DecayModel, exponent: f64, residual: f64 },
}

/// Covariance estimates over a separation ladder with the fitted decay law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// (separation r, covariance estimate, half-width), one row per r.
    pub pairs: Vec<(f64, f64, f64)>,
    pub outcome: DecayOutcome,
}

impl DecayFit {
    pub fn exponent(&self) -> Option<f64> {
        match self.outcome {
            DecayOutcome::Fit { exponent, .. } => Some(exponent),
            _ => None,
        }
    }

    pub fn model(&self) -> Option<DecayModel> {
        match self.outcome {
            DecayOutcome::Fit { model, .. } => Some(model),
            _ => None,
        }
    }
}

/// Least squares line through (x, y): (slope, intercept, sse).
fn line_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = points.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    (slope, intercept, sse)
}

/// Fits the decay of covariance estimates in r, preferring whichever of the
/// power-law and exponential models leaves the smaller residual on the
/// log-transformed positive estimates.
pub fn fit_decay(pairs: &[(f64, f64, f64)]) -> Result<DecayFit> {
    if pairs.len() < 3 {
        return Err(Error::param(format!("{} separations; profile needs at least 3", pairs.len())));
    }
    if pairs.windows(2).any(|w| w[0].0 >= w[1].0) || pairs.iter().any(|p| !(p.0 > 0.0)) {
        return Err(Error::param("separations must be positive and strictly increasing"));
    }
    let pairs = pairs.to_vec();
    if pairs.iter().all(|&(_, est, hw)| est.abs() <= hw) {
        return Ok(DecayFit { pairs, outcome: DecayOutcome::BelowNoiseFloor });
    }
    let positive: Vec<(f64, f64)> =
        pairs.iter().filter(|p| p.1 > 0.0).map(|p| (p.0, p.1.ln())).collect();
    if positive.len() < 3 {
        return Ok(DecayFit { pairs, outcome: DecayOutcome::TooFewPositive });
    }
    let loglog: Vec<(f64, f64)> = positive.iter().map(|&(r, ly)| (r.ln(), ly)).collect();
    let (slope_p, _, sse_p) = line_fit(&loglog);
    let (slope_e, _, sse_e) = line_fit(&positive);
    let outcome = if sse_p <= sse_e {
        DecayOutcome::Fit { model: DecayModel::PowerLaw, exponent: -slope_p, residual: sse_p }
    } else {
        DecayOutcome::Fit { model: DecayModel::Exponential, exponent: -slope_e, residual: sse_e }
    };
    Ok(DecayFit { pairs, outcome })
}

/// Measures Cov(f, f shifted r later) for every separation in `r_list`,
/// then fits the decay. All separations share one set of environment
/// replicas (the template observable is evaluated once per replica), so the
/// estimates are coupled and their ordering in r is statistically stable.
/// The template's sides must not exceed five times the smallest separation.
pub fn covariance_decay_profile(
    params: &ModelParams,
    template: &BoxObservable,
    r_list: &[f64],
    replicas: u64,
    seed: u64,
) -> Result<DecayFit> {
    template.validate()?;
    if r_list.len() < 3 {
        return Err(Error::param(format!(
            "{} separations; profile needs at least 3",
            r_list.len()
        )));
    }
    if r_list.windows(2).any(|w| w[0] >= w[1])
        || r_list.iter().any(|r| !(*r > 0.0 && r.is_finite()))
    {
        return Err(Error::param("separations must be positive and strictly increasing"));
    }
    let (w, h) = template.region.side_lengths();
    if w > 5.0 * r_list[0] || h > 5.0 * r_list[0] {
        return Err(Error::param(format!(
            "template sides ({w}, {h}) exceed five times the smallest separation {}",
            r_list[0]
        )));
    }
    let span = template.region.time_span();
    let shifted: Vec<BoxObservable> =
        r_list.iter().map(|&r| template.shifted_in_time(span + r)).collect::<Result<_>>()?;
    let mut fs: Vec<&BoxObservable> = vec![template];
    fs.extend(shifted.iter());
    let rows = replica_rows(params, &fs, replicas, seed)?;
    let xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let mut pairs = Vec::with_capacity(r_list.len());
    for (j, &r) in r_list.iter().enumerate() {
        let ys: Vec<f64> = rows.iter().map(|row| row[j + 1]).collect();
        let ci = paired_covariance_ci(&xs, &ys, 0.95, seed)?;
        pairs.push((r, ci.point, ci.half_width));
    }
    fit_decay(&pairs)
}
