//! Monte Carlo estimators for walker deviation probabilities.
//!
//! A deviation family at horizon h starts one walker on every lattice site of
//! [0, ceil(h)], all coupled through one environment and one clock field. The
//! spatial window of length h is realized by its two lattice offsets, sites
//! [0, ceil(h)) and (0, ceil(h)]; the estimated probability of a deviation
//! event is the larger of the two per-offset frequencies, which is exactly
//! the supremum over real-valued window placements.

use rayon::prelude::*;

use crate::clock::LazyClockField;
use crate::env::ModelParams;
use crate::error::{Error, Result};
use crate::lattice::{PlanePoint, SpaceTimePoint};
use crate::renorm::{census_starts, is_trapped};
use crate::rng::{stream, SplitRng};
use crate::stats::EstimateWithCI;
use crate::walker::ensemble::{run_blocks, run_coupled};
use crate::walker::{run_walker, JumpRule};

/// A deviation probability estimate plus the truncation discards behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct PhEstimate {
    pub estimate: EstimateWithCI,
    pub discards: u64,
}

/// Per-replica extreme displacements, one pair per window offset.
#[derive(Debug, Clone, Copy)]
struct Extremes {
    max_a: i64,
    min_a: i64,
    max_b: i64,
    min_b: i64,
}

struct FamilySamples {
    extremes: Vec<Extremes>,
    discards: u64,
}

/// Spatial margin wide enough that a rate-1 walker family over horizon `h`
/// leaves it only with negligible probability; leaving is detected as
/// truncation and the replica discarded, so the margin affects cost, not
/// correctness.
fn family_margin(h: f64, rule: &JumpRule) -> i64 {
    (h + 10.0 * h.sqrt() + 20.0).ceil() as i64 + rule.radius() + 2
}

fn replica_extremes(
    params: &ModelParams,
    rule: &JumpRule,
    h: f64,
    rseed: u64,
) -> Result<Option<Extremes>> {
    let hc = h.ceil() as i64;
    let margin = family_margin(h, rule);
    let mut env = params.instantiate(-margin, hc + margin, h, rseed)?;
    let mut clocks = LazyClockField::new(1.0, h, rseed)?;
    let starts: Vec<i64> = (0..=hc).collect();
    match run_blocks(&mut env, &mut clocks, rule, &starts, 0.0, h, false) {
        Ok(run) => {
            let mut ex =
                Extremes { max_a: i64::MIN, min_a: i64::MAX, max_b: i64::MIN, min_b: i64::MAX };
            for (i, (&site, &start)) in run.final_sites.iter().zip(&starts).enumerate() {
                let d = site - start;
                if (i as i64) < hc {
                    ex.max_a = ex.max_a.max(d);
                    ex.min_a = ex.min_a.min(d);
                }
                if i >= 1 {
                    ex.max_b = ex.max_b.max(d);
                    ex.min_b = ex.min_b.min(d);
                }
            }
            Ok(Some(ex))
        }
        Err(e) if e.is_discardable() => Ok(None),
        Err(e) => Err(e),
    }
}

/// Runs `replicas` independent deviation families. Replica i is keyed by
/// (seed, i) alone, so results do not depend on the worker pool size.
fn family_samples(
    params: &ModelParams,
    rule: &JumpRule,
    h: f64,
    replicas: u64,
    seed: u64,
) -> Result<FamilySamples> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::param(format!("horizon {h} must be positive and finite")));
    }
    if replicas == 0 {
        return Err(Error::param("need at least one replica"));
    }
    let root = SplitRng::new(seed).stream(stream::REPLICA);
    let runs: Result<Vec<Option<Extremes>>> = (0..replicas)
        .into_par_iter()
        .map(|i| replica_extremes(params, rule, h, root.index(i).next()))
        .collect();
    let runs = runs?;
    let discards = runs.iter().filter(|r| r.is_none()).count() as u64;
    if discards as f64 > 0.01 * replicas as f64 {
        return Err(Error::stats(format!(
            "{discards} of {replicas} replicas truncated, above the 1% budget"
        )));
    }
    Ok(FamilySamples { extremes: runs.into_iter().flatten().collect(), discards })
}

fn ph_upper(samples: &FamilySamples, v: f64, h: f64, seed: u64) -> Result<PhEstimate> {
    let n = samples.extremes.len() as u64;
    let ca = samples.extremes.iter().filter(|e| e.max_a as f64 >= v * h).count() as u64;
    let cb = samples.extremes.iter().filter(|e| e.max_b as f64 >= v * h).count() as u64;
    Ok(PhEstimate {
        estimate: crate::stats::proportion_ci(ca.max(cb), n, 0.95, seed)?,
        discards: samples.discards,
    })
}

fn ph_lower(samples: &FamilySamples, v: f64, h: f64, seed: u64) -> Result<PhEstimate> {
    let n = samples.extremes.len() as u64;
    let ca = samples.extremes.iter().filter(|e| e.min_a as f64 <= v * h).count() as u64;
    let cb = samples.extremes.iter().filter(|e| e.min_b as f64 <= v * h).count() as u64;
    Ok(PhEstimate {
        estimate: crate::stats::proportion_ci(ca.max(cb), n, 0.95, seed)?,
        discards: samples.discards,
    })
}

/// Estimates the probability that some walker of a deviation family moves at
/// least v*h right of its start by time h.
pub fn estimate_ph(
    params: &ModelParams,
    rule: &JumpRule,
    h: f64,
    v: f64,
    replicas: u64,
    seed: u64,
) -> Result<PhEstimate> {
    ph_upper(&family_samples(params, rule, h, replicas, seed)?, v, h, seed)
}

/// Estimates the probability that some walker of a deviation family falls to
/// at most v*h relative to its start by time h.
pub fn estimate_ph_tilde(
    params: &ModelParams,
    rule: &JumpRule,
    h: f64,
    v: f64,
    replicas: u64,
    seed: u64,
) -> Result<PhEstimate> {
    ph_lower(&family_samples(params, rule, h, replicas, seed)?, v, h, seed)
}

/// Threshold crossings of the deviation curves at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketPoint {
    pub h: f64,
    /// Smallest grid speed with estimated upper deviation at most theta;
    /// None means even the largest grid speed is exceeded too often.
    pub v_plus: Option<f64>,
    /// Largest grid speed with estimated lower deviation at most theta;
    /// None means even the smallest grid speed is undershot too often.
    pub v_minus: Option<f64>,
    /// Upper deviation estimates, one per grid speed.
    pub upper: Vec<PhEstimate>,
    /// Lower deviation estimates, one per grid speed.
    pub lower: Vec<PhEstimate>,
    pub discards: u64,
}

/// Speed brackets per horizon: all grid speeds at one horizon share one set
/// of replicas, so both curves are exactly monotone in v.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedBracket {
    pub theta: f64,
    pub v_grid: Vec<f64>,
    pub replicas: u64,
    pub seed: u64,
    pub points: Vec<BracketPoint>,
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::param(format!("{name} grid is empty")));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::param(format!("{name} grid has a non-finite entry")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

/// Sweeps the deviation curves over a speed grid at each horizon and reads
/// off where they cross `theta`.
pub fn bracket_speeds(
    params: &ModelParams,
    rule: &JumpRule,
    h_grid: &[f64],
    v_grid: &[f64],
    theta: f64,
    replicas: u64,
    seed: u64,
) -> Result<SpeedBracket> {
    check_grid("horizon", h_grid)?;
    check_grid("speed", v_grid)?;
    if !(0.0 < theta && theta < 1.0) {
        return Err(Error::param(format!("threshold {theta} must lie in (0, 1)")));
    }
    let step = v_grid.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
    let mut points = Vec::with_capacity(h_grid.len());
    for (k, &h) in h_grid.iter().enumerate() {
        let hseed = SplitRng::new(seed).index(k as u64).next();
        let samples = family_samples(params, rule, h, replicas, hseed)?;
        let upper: Vec<PhEstimate> =
            v_grid.iter().map(|&v| ph_upper(&samples, v, h, hseed)).collect::<Result<_>>()?;
        let lower: Vec<PhEstimate> =
            v_grid.iter().map(|&v| ph_lower(&samples, v, h, hseed)).collect::<Result<_>>()?;
        for w in upper.windows(2) {
            if w[0].estimate.point < w[1].estimate.point {
                return Err(Error::invariant("upper deviation curve not monotone"));
            }
        }
        for w in lower.windows(2) {
            if w[0].estimate.point > w[1].estimate.point {
                return Err(Error::invariant("lower deviation curve not monotone"));
            }
        }
        let v_plus = v_grid
            .iter()
            .zip(&upper)
            .find(|(_, p)| p.estimate.point <= theta)
            .map(|(&v, _)| v);
        let v_minus = v_grid
            .iter()
            .zip(&lower)
            .rev()
            .find(|(_, p)| p.estimate.point <= theta)
            .map(|(&v, _)| v);
        if let (Some(lo), Some(hi)) = (v_minus, v_plus) {
            if lo > hi + step + 1e-12 {
                return Err(Error::invariant(format!(
                    "speed bracket inverted at h={h}: v_minus={lo} far above v_plus={hi}"
                )));
            }
        }
        let discards = samples.discards;
        points.push(BracketPoint { h, v_plus, v_minus, upper, lower, discards });
    }
    Ok(SpeedBracket { theta, v_grid: v_grid.to_vec(), replicas, seed, points })
}

/// Canonical trap oracle: simulates a fresh environment and clock field
/// around the census window of `w` and adjudicates the trap event on it.
pub fn trapped_at(
    params: &ModelParams,
    rule: &JumpRule,
    w: PlanePoint,
    h: f64,
    delta: f64,
    v_minus: f64,
    seed: u64,
) -> Result<bool> {
    if !(w.t >= 0.0 && w.t.is_finite()) {
        return Err(Error::param(format!("census time {} must be nonnegative", w.t)));
    }
    let starts = census_starts(w, h, delta)?;
    let margin = family_margin(h, rule);
    let (lo, hi) = (starts[0] - margin, starts[starts.len() - 1] + margin);
    let horizon = w.t + h;
    let mut env = params.instantiate(lo, hi, horizon, seed)?;
    let mut clocks = LazyClockField::new(1.0, horizon, seed)?;
    let ensemble = run_coupled(&mut env, &mut clocks, rule, &starts, w.t, h)?;
    is_trapped(w, h, delta, v_minus, &ensemble)
}

/// Empirical concentration of X_t/t around a speed estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationTable {
    pub v_hat: f64,
    pub eps: f64,
    pub replicas: u64,
    pub discards: u64,
    /// Per grid time, the frequency of |X_t/t - v_hat| >= eps.
    pub rows: Vec<(f64, EstimateWithCI)>,
}

/// Runs single walkers from the origin to the largest grid time and tabulates
/// how often the empirical speed at each grid time strays from `v_hat` by at
/// least `eps`. When no speed is supplied, the mean speed at the largest grid
/// time is used. Concentration should make the frequencies shrink with t;
/// the table reports them without enforcing that.
pub fn concentration_diagnostic(
    params: &ModelParams,
    rule: &JumpRule,
    t_grid: &[f64],
    eps: f64,
    v_hat: Option<f64>,
    replicas: u64,
    seed: u64,
) -> Result<ConcentrationTable> {
    check_grid("time", t_grid)?;
    if t_grid[0] <= 0.0 {
        return Err(Error::param("time grid must be strictly positive"));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::param(format!("tolerance {eps} must be positive")));
    }
    if replicas == 0 {
        return Err(Error::param("need at least one replica"));
    }
    let t_max = *t_grid.last().unwrap();
    let margin = family_margin(t_max, rule);
    let root = SplitRng::new(seed).stream(stream::REPLICA);
    let runs: Result<Vec<Option<Vec<i64>>>> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let rseed = root.index(i).next();
            let mut env = params.instantiate(-margin, margin, t_max, rseed)?;
            let mut clocks = LazyClockField::new(1.0, t_max, rseed)?;
            let start = SpaceTimePoint { x: 0, t: 0.0 };
            match run_walker(&mut env, &mut clocks, rule, start, t_max) {
                Ok(path) => Ok(Some(t_grid.iter().map(|&t| path.site_at(t)).collect())),
                Err(e) if e.is_discardable() => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let runs = runs?;
    let discards = runs.iter().filter(|r| r.is_none()).count() as u64;
    if discards as f64 > 0.01 * replicas as f64 {
        return Err(Error::stats(format!(
            "{discards} of {replicas} replicas truncated, above the 1% budget"
        )));
    }
    let kept: Vec<Vec<i64>> = runs.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::stats("all replicas truncated"));
    }
    let v_hat = match v_hat {
        Some(v) if v.is_finite() => v,
        Some(v) => return Err(Error::param(format!("speed estimate {v} must be finite"))),
        None => {
            kept.iter().map(|xs| xs[t_grid.len() - 1] as f64 / t_max).sum::<f64>()
                / kept.len() as f64
        }
    };
    let rows = t_grid
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let far = kept.iter().filter(|xs| (xs[j] as f64 / t - v_hat).abs() >= eps).count();
            let ci = crate::stats::proportion_ci(far as u64, kept.len() as u64, 0.95, seed)?;
            Ok((t, ci))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConcentrationTable { v_hat, eps, replicas, discards, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ModelParams;
    use crate::walker::Preset;
    use rand::distributions::Distribution;
    use rand::SeedableRng;

    fn constant() -> ModelParams {
        ModelParams::Constant { state: 0 }
    }

    #[test]
    fn still_family_has_degenerate_deviation_probabilities() {
        let rule = JumpRule::Preset(Preset::Still);
        // Non-integer horizon exercises both window offsets.
        let p = estimate_ph(&constant(), &rule, 20.5, 0.5, 40, 7).unwrap();
        assert_eq!(p.estimate.point, 0.0);
        assert_eq!(p.discards, 0);
        let p = estimate_ph(&constant(), &rule, 20.5, 0.0, 40, 7).unwrap();
        assert_eq!(p.estimate.point, 1.0, "zero displacement reaches 0*h inclusively");
        let p = estimate_ph_tilde(&constant(), &rule, 20.5, 0.0, 40, 7).unwrap();
        assert_eq!(p.estimate.point, 1.0);
        let p = estimate_ph_tilde(&constant(), &rule, 20.5, -0.5, 40, 7).unwrap();
        assert_eq!(p.estimate.point, 0.0);
    }

    #[test]
    fn deviation_curves_are_exactly_monotone_and_deterministic() {
        let params = ModelParams::SpinFlip { nu: 1.0, rho: 0.5 };
        let rule = JumpRule::Preset(Preset::FairWhenOccupied);
        let grid = [-0.5, -0.25, 0.0, 0.25, 0.5];
        let ups: Vec<f64> = grid
            .iter()
            .map(|&v| estimate_ph(&params, &rule, 15.0, v, 120, 33).unwrap().estimate.point)
            .collect();
        assert!(ups.windows(2).all(|w| w[0] >= w[1]), "upper curve not monotone: {ups:?}");
        let downs: Vec<f64> = grid
            .iter()
            .map(|&v| estimate_ph_tilde(&params, &rule, 15.0, v, 120, 33).unwrap().estimate.point)
            .collect();
        assert!(downs.windows(2).all(|w| w[0] <= w[1]), "lower curve not monotone: {downs:?}");
        let again = estimate_ph(&params, &rule, 15.0, 0.25, 120, 33).unwrap();
        assert_eq!(again.estimate.point, ups[3]);
        // The whole-family sup dominates single-offset frequencies: with one
        // more start than sites per offset, p(0 displacement reached) is 1.
        assert_eq!(ups[0], 1.0);
        assert_eq!(downs[4], 1.0);
    }

    /// Replays the family construction naively: independent exponential
    /// arrivals per site from a different generator, one walker per start
    /// consuming every arrival it sits on, no block bookkeeping.
    fn naive_rightward_family_freq(h: f64, v: f64, replicas: u64, seed: u64) -> f64 {
        let hc = h.ceil() as i64;
        let sites = 8 * hc + 80;
        let mut hits_a = 0u64;
        let mut hits_b = 0u64;
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let exp = rand_distr::Exp::new(1.0).unwrap();
        for _ in 0..replicas {
            let clocks: Vec<Vec<f64>> = (0..sites)
                .map(|_| {
                    let mut t = 0.0;
                    let mut list = Vec::new();
                    loop {
                        t += exp.sample(&mut rng);
                        if t >= h {
                            break;
                        }
                        list.push(t);
                    }
                    list
                })
                .collect();
            let disp = |start: i64| -> i64 {
                let mut x = start;
                let mut t = 0.0;
                loop {
                    let list = &clocks[x as usize];
                    let i = list.partition_point(|&a| a <= t);
                    match list.get(i) {
                        Some(&a) => {
                            t = a;
                            x += 1;
                        }
                        None => return x - start,
                    }
                }
            };
            let max_a = (0..hc).map(disp).max().unwrap();
            let max_b = (1..=hc).map(disp).max().unwrap();
            hits_a += u64::from(max_a as f64 >= v * h);
            hits_b += u64::from(max_b as f64 >= v * h);
        }
        hits_a.max(hits_b) as f64 / replicas as f64
    }

    #[test]
    fn rightward_family_matches_a_naive_reimplementation() {
        let rule = JumpRule::Preset(Preset::AlwaysRight);
        let (h, v, n) = (10.0, 2.0, 3000u64);
        let engine = estimate_ph(&constant(), &rule, h, v, n, 4242).unwrap();
        let naive = naive_rightward_family_freq(h, v, n, 171_717);
        let pool = (engine.estimate.point + naive) / 2.0;
        let sigma = (pool * (1.0 - pool) * 2.0 / n as f64).sqrt().max(1e-4);
        assert!(
            (engine.estimate.point - naive).abs() <= 3.5 * sigma,
            "engine {} vs naive {} (sigma {})",
            engine.estimate.point,
            naive,
            sigma
        );
    }

    #[test]
    fn fair_walker_brackets_straddle_zero() {
        let rule = JumpRule::Preset(Preset::Fair);
        let v_grid: Vec<f64> = (-4..=4).map(|i| i as f64 * 0.25).collect();
        let bracket =
            bracket_speeds(&constant(), &rule, &[40.0], &v_grid, 0.05, 300, 99).unwrap();
        let point = &bracket.points[0];
        let vp = point.v_plus.expect("upper crossing inside the grid");
        let vm = point.v_minus.expect("lower crossing inside the grid");
        assert!(vm <= vp, "bracket inverted: [{vm}, {vp}]");
        assert!(vp > 0.0 && vp <= 0.75, "fair walker upper speed {vp}");
        assert!(vm < 0.0 && vm >= -0.75, "fair walker lower speed {vm}");
        let again = bracket_speeds(&constant(), &rule, &[40.0], &v_grid, 0.05, 300, 99).unwrap();
        assert_eq!(again, bracket);
    }

    #[test]
    fn out_of_range_grids_leave_crossings_open() {
        let rule = JumpRule::Preset(Preset::Still);
        // A still walker never reaches speed 5, so the upper curve is 0
        // everywhere (crossing at the first grid point) while the lower
        // curve is 1 everywhere (no crossing).
        let bracket =
            bracket_speeds(&constant(), &rule, &[10.0], &[5.0, 6.0], 0.05, 30, 5).unwrap();
        assert_eq!(bracket.points[0].v_plus, Some(5.0));
        assert_eq!(bracket.points[0].v_minus, None);
    }

    #[test]
    fn still_walker_concentrates_immediately() {
        let rule = JumpRule::Preset(Preset::Still);
        let table =
            concentration_diagnostic(&constant(), &rule, &[5.0, 10.0], 0.1, None, 50, 3).unwrap();
        assert_eq!(table.v_hat, 0.0);
        for (_, ci) in &table.rows {
            assert_eq!(ci.point, 0.0);
        }
    }

    #[test]
    fn drifting_walker_concentrates_as_time_grows() {
        let rule = JumpRule::Preset(Preset::AlwaysRight);
        let table =
            concentration_diagnostic(&constant(), &rule, &[5.0, 20.0], 0.2, Some(1.0), 400, 11)
                .unwrap();
        let early = table.rows[0].1.point;
        let late = table.rows[1].1.point;
        assert!(
            late < early - 0.05,
            "deviation frequency should shrink with t: {early} -> {late}"
        );
    }

    #[test]
    fn canonical_trap_oracle_matches_exact_cases() {
        let rule = JumpRule::Preset(Preset::Still);
        let w = PlanePoint { x: 0.0, t: 0.0 };
        // Zero displacement vs threshold (v_minus + delta) * h.
        assert!(trapped_at(&constant(), &rule, w, 8.0, 0.25, 0.0, 21).unwrap());
        assert!(!trapped_at(&constant(), &rule, w, 8.0, 0.25, -0.5, 21).unwrap());
        // Anchored away from the origin in space and time.
        let far = PlanePoint { x: -30.0, t: 12.5 };
        assert!(trapped_at(&constant(), &rule, far, 8.0, 0.25, 0.0, 21).unwrap());
    }
}
