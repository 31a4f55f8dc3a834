//! Release acceptance gates: one test per gate, run against fixed seeds and
//! stated tolerances. Each gate prints a single PASS line with its measured
//! numbers (visible under --nocapture); a failed assertion is the FAIL line.
//! Gates with wall-clock budgets assert them.

use std::time::Instant;

use rayon::prelude::*;
use rwdre_core::rng::{stream, SplitRng};
use rwdre_core::stats::{mean_ci, normal_quantile, poisson_lower_tail, poisson_upper_tail};
use rwdre_core::{
    bracket_speeds, build_ladder, check_allowed_path, contact_dual_ancestors, contact_simulate,
    east_front, east_zero_run, fit_decay, fluctuation_experiment, generate_soup,
    occupation_frequencies, reachability_envelope, renewal_generator_residual, renewal_simulate,
    renewal_stationary, run_coupled, run_drift_walker, run_walker, soup_covariance_check,
    soup_touch_bound, Boundary, BoxObservable, DecayModel, DecayOutcome, EastInit, JumpRule,
    LadderVariant, LazyClockField, ModelParams, ObservableKind, Preset, SpaceTimeBox,
    SpaceTimePoint,
};

const ORIGIN: SpaceTimePoint = SpaceTimePoint { x: 0, t: 0.0 };

fn five_models() -> Vec<(&'static str, ModelParams)> {
    // All five environment families at simulation-friendly parameters.
    vec![
        ("constant", ModelParams::Constant { state: 1 }),
        ("spinflip", ModelParams::SpinFlip { nu: 1.0, rho: 0.5 }),
        ("renewal", ModelParams::Renewal { weights: vec![1.0, 1.0] }),
        (
            "east",
            ModelParams::East { rho: 0.5, boundary: Boundary::Frozen0, init: EastInit::Product },
        ),
        (
            "contact",
            ModelParams::Contact { lambda: 1.0, boundary: Boundary::Frozen0, warmup: 2.0 },
        ),
    ]
}

/// Gate 1: coupled walker pairs started at (x, x+1) never swap order, at any
/// jump event, across all five environment models. 10^4 pairs, horizon 10^3,
/// budget 2 minutes. The engine asserts strict block order at every arrival;
/// this gate re-walks consecutive paths and re-checks at every jump time.
#[test]
fn gate_01_monotone_coupling_zero_violations() {
    let started = Instant::now();
    let h: f64 = 1000.0;
    let starts: Vec<i64> = (0..=40).collect();
    let envs_per_model = 50u64;
    let rule = JumpRule::Preset(Preset::FairWhenOccupied);
    let margin = (h + 10.0 * h.sqrt() + 20.0).ceil() as i64 + 2;

    let mut pairs = 0u64;
    let mut engine_checks = 0u64;
    let mut rechecked = 0u64;
    for (mi, (name, params)) in five_models().iter().enumerate() {
        for e in 0..envs_per_model {
            let seed = SplitRng::new(0xACC1)
                .stream(stream::REPLICA)
                .index(mi as u64)
                .index(e)
                .next();
            let mut env = params
                .instantiate(-margin, 40 + margin, h, seed)
                .unwrap_or_else(|err| panic!("{name}: {err}"));
            let mut clocks = LazyClockField::new(1.0, h, seed).unwrap();
            let ens = run_coupled(&mut env, &mut clocks, &rule, &starts, 0.0, h)
                .unwrap_or_else(|err| panic!("{name}: {err}"));
            assert!(ens.events_checked > 0, "{name}: no events were checked");
            engine_checks += ens.events_checked;
            for w in ens.paths.windows(2) {
                let (a, b) = (&w[0], &w[1]);
                for &(t, _) in a.jumps.iter().chain(b.jumps.iter()) {
                    assert!(
                        a.site_at(t) <= b.site_at(t),
                        "{name}: pair ({}, {}) swapped order at t = {t}",
                        a.start.x,
                        b.start.x
                    );
                    rechecked += 1;
                }
            }
            pairs += starts.len() as u64 - 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    assert_eq!(pairs, 10_000);
    assert!(secs <= 120.0, "budget exceeded: {secs:.1}s");
    println!(
        "gate 01: PASS - {pairs} coupled pairs over 5 models, horizon 1000: zero order \
         violations ({engine_checks} engine checks, {rechecked} pairwise re-checks, {secs:.1}s)"
    );
}

/// Gate 2: every path produced by the walker engines is an allowed path of
/// its clock field (jumps only at arrivals of the current site) and passes
/// structural validation. Exact, across models, rules, and engines.
#[test]
fn gate_02_generated_paths_are_allowed_paths() {
    let h: f64 = 200.0;
    let rules = [
        JumpRule::Preset(Preset::Still),
        JumpRule::Preset(Preset::AlwaysRight),
        JumpRule::Preset(Preset::Fair),
        JumpRule::Preset(Preset::FairWhenOccupied),
        JumpRule::Preset(Preset::PullOccupied),
        JumpRule::Preset(Preset::RightWhenRightEmpty),
        // Base 3 so the same table covers the three-state renewal model.
        JumpRule::table(
            1,
            3,
            (0..27).map(|i| (f64::from(i % 5) * 0.1, f64::from(i % 3) * 0.2)).collect(),
        )
        .unwrap(),
    ];
    let mut checked = 0u64;

    // Single walkers: every model under every rule.
    for (mi, (name, params)) in five_models().iter().enumerate() {
        for (ri, rule) in rules.iter().enumerate() {
            let seed = SplitRng::new(0xACC2).index(mi as u64).index(ri as u64).next();
            let margin = (h + 10.0 * h.sqrt() + 20.0).ceil() as i64 + rule.radius() + 2;
            let mut env = params.instantiate(-margin, margin, h, seed).unwrap();
            let mut clocks = LazyClockField::new(1.0, h, seed).unwrap();
            let path = run_walker(&mut env, &mut clocks, rule, ORIGIN, h)
                .unwrap_or_else(|err| panic!("{name}/{ri}: {err}"));
            path.validate().unwrap();
            let mut replay = LazyClockField::new(1.0, h, seed).unwrap();
            assert!(
                check_allowed_path(&path, &mut replay),
                "{name}, rule {ri}: jump off the clock arrivals"
            );
            checked += 1;
        }
    }

    // Coupled families.
    for (mi, (name, params)) in five_models().iter().enumerate() {
        let seed = SplitRng::new(0xACC2).stream(stream::REPLICA).index(mi as u64).next();
        let margin = (h + 10.0 * h.sqrt() + 20.0).ceil() as i64 + 2;
        let mut env = params.instantiate(-margin, 10 + margin, h, seed).unwrap();
        let mut clocks = LazyClockField::new(1.0, h, seed).unwrap();
        let starts: Vec<i64> = (0..=10).collect();
        let ens = run_coupled(
            &mut env,
            &mut clocks,
            &JumpRule::Preset(Preset::FairWhenOccupied),
            &starts,
            0.0,
            h,
        )
        .unwrap();
        for path in &ens.paths {
            path.validate().unwrap();
            let mut replay = LazyClockField::new(1.0, h, seed).unwrap();
            assert!(check_allowed_path(path, &mut replay), "{name}: coupled path off arrivals");
            checked += 1;
        }
    }

    // Rectangle-soup drift walker.
    let window = SpaceTimeBox::new(-300.0, 300.0, 0.0, h).unwrap();
    let soup = generate_soup(100, 1, window, 7).unwrap();
    let mut clocks = LazyClockField::new(1.0, h, 11).unwrap();
    let path = run_drift_walker(&soup, &mut clocks, ORIGIN, h).unwrap();
    path.validate().unwrap();
    let mut replay = LazyClockField::new(1.0, h, 11).unwrap();
    assert!(check_allowed_path(&path, &mut replay));
    checked += 1;

    // Streaming East runners: their clocks live inside the environment
    // realization, so validate structure and jump directions.
    let zero = east_zero_run(0.5, 0, 300, h, 13).unwrap();
    zero.validate().unwrap();
    assert!(zero.jumps.windows(2).all(|w| w[1].1 - w[0].1 == 1) || zero.jumps.len() < 2);
    let front = east_front(0.5, -300, 100, h, 17).unwrap();
    front.validate().unwrap();
    checked += 2;

    println!("gate 02: PASS - {checked} paths validated against their clock fields, exact");
}

fn east_speed_samples(
    zero_side: bool,
    t: f64,
    replicas: u64,
    seed: u64,
) -> (Vec<f64>, u64) {
    // The tracked object moves at well under 0.35 in absolute value at
    // rho = 0.5; a window of 0.35 t + 5 sqrt(t) keeps truncation discards
    // far below the 1% budget while fitting the wall-clock budget.
    let reach = (0.35 * t + 5.0 * t.sqrt()).ceil() as i64;
    let root = SplitRng::new(seed).stream(stream::REPLICA);
    let samples: Vec<Option<f64>> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let rseed = root.index(i).next();
            let path = if zero_side {
                east_zero_run(0.5, 0, reach, t, rseed).unwrap()
            } else {
                east_front(0.5, -reach, 150, t, rseed).unwrap()
            };
            if path.truncated.is_some() {
                None
            } else {
                Some(path.displacement() as f64 / t)
            }
        })
        .collect();
    let kept: Vec<f64> = samples.iter().copied().flatten().collect();
    let discards = replicas - kept.len() as u64;
    (kept, discards)
}

/// Gate 3: the East distinguished zero at rho = 0.5 has positive speed. T =
/// 5000, 200 replicas, 99% CI for the mean displacement rate excludes 0 from
/// below. Budget 1 minute.
#[test]
fn gate_03_east_distinguished_zero_speed_positive() {
    let started = Instant::now();
    let (kept, discards) = east_speed_samples(true, 5000.0, 200, 0xACC3);
    assert!(discards <= 2, "{discards} of 200 replicas truncated");
    let est = mean_ci(&kept, 0.99, 0xACC3).unwrap();
    let secs = started.elapsed().as_secs_f64();
    assert!(
        est.point - est.half_width > 0.0,
        "CI [{}, {}] does not exclude 0 from below",
        est.point - est.half_width,
        est.point + est.half_width
    );
    assert!(secs <= 60.0, "budget exceeded: {secs:.1}s");
    println!(
        "gate 03: PASS - tracked zero speed {:.4} +- {:.4} (99% CI, {} kept, {} discards, \
         {secs:.1}s)",
        est.point, est.half_width, est.replicas, discards
    );
}

/// Gate 4: the East front at rho = 0.5 has negative speed; same protocol as
/// gate 3, CI excludes 0 from above.
#[test]
fn gate_04_east_front_speed_negative() {
    let started = Instant::now();
    let (kept, discards) = east_speed_samples(false, 5000.0, 200, 0xACC4);
    assert!(discards <= 2, "{discards} of 200 replicas truncated");
    let est = mean_ci(&kept, 0.99, 0xACC4).unwrap();
    let secs = started.elapsed().as_secs_f64();
    assert!(
        est.point + est.half_width < 0.0,
        "CI [{}, {}] does not exclude 0 from above",
        est.point - est.half_width,
        est.point + est.half_width
    );
    println!(
        "gate 04: PASS - front speed {:.4} +- {:.4} (99% CI, {} kept, {} discards, {secs:.1}s)",
        est.point, est.half_width, est.replicas, discards
    );
}

/// Gate 5: contact process with lambda = 0 reduces to pure death; single-site
/// survival at t in {0.5, 1, 2} matches e^{-t} within 3 binomial sigma at
/// 10^4 replicas each.
#[test]
fn gate_05_contact_pure_death_matches_exponential() {
    let n = 10_000u64;
    let mut reports = Vec::new();
    for (ti, &t) in [0.5, 1.0, 2.0].iter().enumerate() {
        let root = SplitRng::new(0xACC5).stream(stream::REPLICA).index(ti as u64);
        let survivors: u64 = (0..n)
            .into_par_iter()
            .map(|i| {
                let traj =
                    contact_simulate(0.0, &[0, 1, 0], -1, 1, t, Boundary::Frozen0, root.index(i).next())
                        .unwrap();
                (traj.state_at(0, t).unwrap() == 1) as u64
            })
            .sum();
        let p_hat = survivors as f64 / n as f64;
        let truth = (-t).exp();
        let sigma = (truth * (1.0 - truth) / n as f64).sqrt();
        assert!(
            (p_hat - truth).abs() <= 3.0 * sigma,
            "t = {t}: survival {p_hat} vs e^-t = {truth}, 3 sigma = {}",
            3.0 * sigma
        );
        reports.push(format!("t={t}: {p_hat:.4} vs {truth:.4}"));
    }
    println!("gate 05: PASS - pure-death survival within 3 sigma at 10^4 reps ({})",
        reports.join(", "));
}

/// Gate 6: contact self-duality at lambda = 2, s = 2, window width 80.
/// Forward occupancy from all ones vs dual-ancestor survival, 10^4 replicas
/// each, agreement within pooled 3 sigma.
#[test]
fn gate_06_contact_self_duality() {
    let (lambda, s, n) = (2.0, 2.0, 10_000u64);
    let (x_lo, x_hi) = (-40i64, 39i64);
    let init = vec![1u16; (x_hi - x_lo + 1) as usize];
    let root = SplitRng::new(0xACC6).stream(stream::REPLICA);

    let forward: u64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let traj =
                contact_simulate(lambda, &init, x_lo, x_hi, s, Boundary::Frozen0, root.index(i).next())
                    .unwrap();
            (traj.state_at(0, s).unwrap() == 1) as u64
        })
        .sum();
    let dual: u64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let ancestors =
                contact_dual_ancestors(lambda, &[0], x_lo, x_hi, s, root.index(n + i).next())
                    .unwrap();
            (!ancestors.is_empty()) as u64
        })
        .sum();

    let pf = forward as f64 / n as f64;
    let pd = dual as f64 / n as f64;
    let pooled =
        (pf * (1.0 - pf) / n as f64 + pd * (1.0 - pd) / n as f64).sqrt();
    assert!(
        (pf - pd).abs() <= 3.0 * pooled,
        "forward {pf} vs dual {pd}, pooled 3 sigma = {}",
        3.0 * pooled
    );
    println!(
        "gate 06: PASS - forward occupancy {pf:.4} vs dual survival {pd:.4} \
         (|diff| = {:.4} <= {:.4})",
        (pf - pd).abs(),
        3.0 * pooled
    );
}

/// Gate 7: renewal chain with weights (1, 1): stationary solver returns
/// (0.4, 0.4, 0.2) with generator residual below 1e-12, and long-run
/// occupation frequencies at horizon 10^5 land within total variation 0.02.
#[test]
fn gate_07_renewal_stationarity() {
    let weights = [1.0, 1.0];
    let pi = renewal_stationary(&weights).unwrap();
    let expect = [0.4, 0.4, 0.2];
    for (a, b) in pi.iter().zip(expect) {
        assert!((a - b).abs() < 1e-12, "stationary law {pi:?} vs {expect:?}");
    }
    let residual = renewal_generator_residual(&weights, &pi);
    assert!(residual < 1e-12, "solver residual {residual}");

    let traj = renewal_simulate(&weights, 0, 9, 1e5, 0xACC7).unwrap();
    let freq = occupation_frequencies(&traj, 3);
    let tv: f64 = freq.iter().zip(&pi).map(|(f, p)| (f - p).abs()).sum::<f64>() / 2.0;
    assert!(tv <= 0.02, "total variation {tv} above 0.02 (freq {freq:?})");
    println!(
        "gate 07: PASS - stationary law (0.4, 0.4, 0.2), residual {residual:.2e}, \
         occupation TV {tv:.4} at horizon 1e5"
    );
}

/// Gate 8: spin-flip single-site covariance at separations r in
/// {0.5, 1, 2, 4} (nu = 1, rho = 0.5, 10^5 replicas) matches
/// rho(1-rho) e^{-nu r} within 3 sigma each; the fitted exponential rate
/// lands in [0.7, 1.3].
#[test]
fn gate_08_spinflip_covariance_decay() {
    let params = ModelParams::SpinFlip { nu: 1.0, rho: 0.5 };
    // Point observable: the separation between the pair is then r itself, not
    // r plus the template's time span.
    let template = BoxObservable {
        region: SpaceTimeBox::new(0.0, 1.0, 0.0, 1e-9).unwrap(),
        kind: ObservableKind::SiteAt { x: 0, t: 0.0 },
    };
    let rs = [0.5, 1.0, 2.0, 4.0];
    let fit = covariance_profile(&params, &template, &rs);
    let z95 = normal_quantile(0.975).unwrap();
    let mut reports = Vec::new();
    for &(r, cov, hw) in &fit.pairs {
        let truth = 0.25 * (-r).exp();
        let se = hw / z95;
        assert!(
            (cov - truth).abs() <= 3.0 * se,
            "r = {r}: covariance {cov} vs {truth}, 3 sigma = {}",
            3.0 * se
        );
        reports.push(format!("r={r}: {cov:.4}~{truth:.4}"));
    }
    match fit.outcome {
        DecayOutcome::Fit { model: DecayModel::Exponential, exponent, .. } => {
            assert!(
                (0.7..=1.3).contains(&exponent),
                "fitted rate {exponent} outside [0.7, 1.3]"
            );
            println!(
                "gate 08: PASS - covariances within 3 sigma ({}), fitted rate {exponent:.3}",
                reports.join(", ")
            );
        }
        other => panic!("expected an exponential fit, got {other:?}"),
    }
}

fn covariance_profile(
    params: &ModelParams,
    template: &BoxObservable,
    rs: &[f64],
) -> rwdre_core::DecayFit {
    rwdre_core::covariance_decay_profile(params, template, rs, 100_000, 0xACC8).unwrap()
}

/// Gate 9: the decay fitter recovers alpha = 3 from an exact synthetic
/// r^{-3} profile to within 1e-9, deterministically.
#[test]
fn gate_09_decay_fit_exactness() {
    let pairs: Vec<(f64, f64, f64)> =
        [1.0f64, 2.0, 4.0, 8.0, 16.0].iter().map(|&r| (r, r.powi(-3), 0.0)).collect();
    let fit = fit_decay(&pairs).unwrap();
    match fit.outcome {
        DecayOutcome::Fit { model: DecayModel::PowerLaw, exponent, residual } => {
            assert!(
                (exponent - 3.0).abs() < 1e-9,
                "alpha {exponent} misses 3 by {}",
                (exponent - 3.0).abs()
            );
            println!(
                "gate 09: PASS - synthetic r^-3 profile recovered alpha {exponent:.12} \
                 (residual {residual:.2e})"
            );
        }
        other => panic!("expected a power-law fit, got {other:?}"),
    }
}

/// Gate 10: deviation curves under common random numbers are exactly
/// monotone on a 21-point speed grid: the upper curve nonincreasing in v,
/// the lower curve nondecreasing.
#[test]
fn gate_10_deviation_curves_monotone_under_crn() {
    let params = ModelParams::SpinFlip { nu: 1.0, rho: 0.5 };
    let rule = JumpRule::Preset(Preset::FairWhenOccupied);
    let grid: Vec<f64> = (0..21).map(|i| -1.0 + 0.1 * i as f64).collect();
    let b = bracket_speeds(&params, &rule, &[50.0], &grid, 0.05, 400, 0xACCA).unwrap();
    let pt = &b.points[0];
    assert_eq!(pt.upper.len(), 21);
    for w in pt.upper.windows(2) {
        assert!(
            w[0].estimate.point >= w[1].estimate.point,
            "upper deviation curve increased: {} -> {}",
            w[0].estimate.point,
            w[1].estimate.point
        );
    }
    for w in pt.lower.windows(2) {
        assert!(
            w[0].estimate.point <= w[1].estimate.point,
            "lower deviation curve decreased: {} -> {}",
            w[0].estimate.point,
            w[1].estimate.point
        );
    }
    println!(
        "gate 10: PASS - shared-sample deviation curves exactly monotone on 21 speeds \
         (upper {:.3}..{:.3}, lower {:.3}..{:.3})",
        pt.upper[0].estimate.point,
        pt.upper[20].estimate.point,
        pt.lower[0].estimate.point,
        pt.lower[20].estimate.point
    );
}

/// Gate 11: speed brackets collapse toward the long-run speed. Blind fair
/// rule: both bracket ends within one grid step of 0 at H in {100, 400}.
/// Environment-coupled rule on spin-flip: bracket width at H = 400 at most
/// the width at H = 100 plus one step. 5000 replicas per point, grid step
/// 0.5 (the deviation event is a supremum over ~H coupled starts, which
/// calibrates the honest step at these horizons).
#[test]
fn gate_11_speed_brackets_collapse() {
    let grid = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let step = 0.5;
    let hs = [100.0, 400.0];

    let blind = bracket_speeds(
        &ModelParams::Constant { state: 1 },
        &JumpRule::Preset(Preset::Fair),
        &hs,
        &grid,
        0.05,
        5000,
        0xACCB,
    )
    .unwrap();
    for pt in &blind.points {
        let vp = pt.v_plus.expect("upper bracket attained");
        let vm = pt.v_minus.expect("lower bracket attained");
        assert!(vp.abs() <= step + 1e-12, "H = {}: v_plus = {vp}", pt.h);
        assert!(vm.abs() <= step + 1e-12, "H = {}: v_minus = {vm}", pt.h);
    }

    let coupled = bracket_speeds(
        &ModelParams::SpinFlip { nu: 1.0, rho: 0.5 },
        &JumpRule::Preset(Preset::FairWhenOccupied),
        &hs,
        &grid,
        0.05,
        5000,
        0xACCB,
    )
    .unwrap();
    let width = |pt: &rwdre_core::BracketPoint| {
        pt.v_plus.expect("upper bracket attained") - pt.v_minus.expect("lower bracket attained")
    };
    let (w100, w400) = (width(&coupled.points[0]), width(&coupled.points[1]));
    assert!(
        w400 <= w100 + step + 1e-12,
        "bracket widened: {w400} at H=400 vs {w100} + {step} at H=100"
    );
    println!(
        "gate 11: PASS - blind fair brackets within one step of 0 at H=100,400; \
         spin-flip widths {w100:.2} -> {w400:.2} (step {step})"
    );
}

/// Gate 12: concentration trend for the always-right rule: empirical
/// P(|X_t/t - 1| >= 0.2) strictly decreasing over t in {10, 100, 1000} and
/// within 3 sigma of the exact Poisson tail at each t.
#[test]
fn gate_12_always_right_concentration_matches_poisson() {
    let params = ModelParams::Constant { state: 1 };
    let rule = JumpRule::Preset(Preset::AlwaysRight);
    let n = 10_000u64;
    let mut freqs = Vec::new();
    let mut reports = Vec::new();
    for (ti, &t_int) in [10u64, 100, 1000].iter().enumerate() {
        let t = t_int as f64;
        let hi = 6 * t_int / 5; // X >= 1.2 t
        let lo = 4 * t_int / 5; // X <= 0.8 t
        let root = SplitRng::new(0xACCC).stream(stream::REPLICA).index(ti as u64);
        let margin = (t + 10.0 * t.sqrt() + 20.0).ceil() as i64 + 2;
        let hits: u64 = (0..n)
            .into_par_iter()
            .map(|i| {
                let seed = root.index(i).next();
                let mut env = params.instantiate(-margin, margin, t, seed).unwrap();
                let mut clocks = LazyClockField::new(1.0, t, seed).unwrap();
                let path = run_walker(&mut env, &mut clocks, &rule, ORIGIN, t).unwrap();
                let x = path.displacement();
                (x >= hi as i64 || x <= lo as i64) as u64
            })
            .sum();
        let p_hat = hits as f64 / n as f64;
        let truth = poisson_upper_tail(t, hi) + poisson_lower_tail(t, lo);
        let sigma = (truth * (1.0 - truth) / n as f64).sqrt();
        assert!(
            (p_hat - truth).abs() <= 3.0 * sigma,
            "t = {t}: {p_hat} vs Poisson tail {truth}, 3 sigma = {}",
            3.0 * sigma
        );
        freqs.push(p_hat);
        reports.push(format!("t={t_int}: {p_hat:.4}~{truth:.4}"));
    }
    assert!(
        freqs[0] > freqs[1] && freqs[1] > freqs[2],
        "tail frequencies not strictly decreasing: {freqs:?}"
    );
    println!(
        "gate 12: PASS - deviation frequency strictly decreasing and within 3 sigma of the \
         exact Poisson tails ({})",
        reports.join(", ")
    );
}

/// Gate 13: rectangle-soup non-concentration. Desk ladder with L0 = 1000,
/// scales {L0, L1}, 500 replicas: both tail frequencies P(X_L/L > 0.1) and
/// P(X_L/L < -0.1) at least 0.02 at both scales, neither decaying by more
/// than a factor 2 from L0 to L1; the spin-flip baseline walker shows both
/// tails below 0.005 at L1. Budget 10 minutes.
#[test]
fn gate_13_soup_tails_survive_across_scales() {
    let started = Instant::now();
    let rows = fluctuation_experiment(1000, &[0, 1], 500, false, 0xACCD).unwrap();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        assert!(
            row.up.point >= 0.02 && row.down.point >= 0.02,
            "L = {}: tails up {:.4} / down {:.4} fell below 0.02",
            row.scale,
            row.up.point,
            row.down.point
        );
    }
    assert!(
        rows[1].up.point >= rows[0].up.point / 2.0,
        "up tail decayed by more than 2x: {} -> {}",
        rows[0].up.point,
        rows[1].up.point
    );
    assert!(
        rows[1].down.point >= rows[0].down.point / 2.0,
        "down tail decayed by more than 2x: {} -> {}",
        rows[0].down.point,
        rows[1].down.point
    );
    let base = &rows[1];
    assert!(
        base.baseline_up.point < 0.005 && base.baseline_down.point < 0.005,
        "baseline tails at L1: up {:.4} / down {:.4}",
        base.baseline_up.point,
        base.baseline_down.point
    );
    let secs = started.elapsed().as_secs_f64();
    assert!(secs <= 600.0, "budget exceeded: {secs:.1}s");
    println!(
        "gate 13: PASS - soup tails (up, down) L0: ({:.3}, {:.3}), L1: ({:.3}, {:.3}); \
         baseline at L1 ({:.4}, {:.4}); {secs:.0}s",
        rows[0].up.point,
        rows[0].down.point,
        rows[1].up.point,
        rows[1].down.point,
        base.baseline_up.point,
        base.baseline_down.point
    );
}

/// Gate 14: the empirical probability that one soup rectangle touches two
/// boxes of side r^(1/2) at time distance r stays at or below the analytic
/// union-bound curve (within 3 sigma) at r in {100, 1000, 10000} and
/// decreases in r.
#[test]
fn gate_14_soup_touch_probability_under_union_bound() {
    let rs = [100.0, 1000.0, 10_000.0];
    let fit = soup_covariance_check(1000, &rs, 0.5, 3000, 0xACCE).unwrap();
    // The estimator itself enforces "nonincreasing" and "at most the bound
    // plus 3 sigma" and errors otherwise; re-state the headline numbers.
    let ladder = build_ladder(LadderVariant::Counterexample, 1000, rwdre_core::soup::DESK_K_MAX)
        .unwrap();
    assert!(
        fit.pairs[0].1 > fit.pairs[2].1,
        "touch probability did not decrease overall: {:?}",
        fit.pairs
    );
    let mut reports = Vec::new();
    for &(r, p, _) in &fit.pairs {
        let bound = soup_touch_bound(&ladder, r, 0.5).unwrap();
        assert!(p <= bound + 3.0 * se_of_proportion(p, 3000), "p {p} above bound {bound} at r {r}");
        reports.push(format!("r={r}: {p:.4} <= {bound:.4}"));
    }
    println!("gate 14: PASS - touch probabilities under the union bound and decreasing ({})",
        reports.join(", "));
}

fn se_of_proportion(p: f64, n: u64) -> f64 {
    (p.max(1e-12) * (1.0 - p) / n as f64).sqrt()
}

/// Gate 15: reachability envelope tail. The maximal displacement any allowed
/// path can reach by time T exceeds 2T with empirical probability below
/// 1e-3 at T = 20 (10^4 replicas), nonincreasing over T in {5, 10, 20}.
#[test]
fn gate_15_envelope_displacement_tail() {
    let n = 10_000u64;
    let mut freqs = Vec::new();
    for (ti, &t) in [5.0f64, 10.0, 20.0].iter().enumerate() {
        let root = SplitRng::new(0xACCF).stream(stream::REPLICA).index(ti as u64);
        let hits: u64 = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut clocks = LazyClockField::new(1.0, t, root.index(i).next()).unwrap();
                let (right, _) = reachability_envelope(&mut clocks, t).unwrap();
                (right as f64 >= 2.0 * t) as u64
            })
            .sum();
        freqs.push(hits as f64 / n as f64);
    }
    assert!(
        freqs[0] >= freqs[1] && freqs[1] >= freqs[2],
        "envelope tail not nonincreasing: {freqs:?}"
    );
    assert!(freqs[2] < 1e-3, "P(envelope >= 2T) = {} at T = 20", freqs[2]);
    let oracle = poisson_upper_tail(20.0, 40);
    println!(
        "gate 15: PASS - envelope tail {:?} over T = 5, 10, 20 (exact Poisson value at \
         T = 20: {oracle:.3e})",
        freqs
    );
}

/// Gate 16: scale ladders satisfy their recursion and growth sandwich
/// exactly: l_k is the integer root of L_k, L_{k+1} = l_k L_k, and
/// L_{k+1}^4 <= L_k^5 in exact integer arithmetic; the counterexample
/// variant reproduces l_0 = 10, L_1 = 10^6 from L_0 = 10^5.
#[test]
fn gate_16_ladder_recursion_and_sandwich_exact() {
    let cases = [
        (LadderVariant::Main, 16u64, 4usize),
        (LadderVariant::Main, 1000, 3),
        (LadderVariant::Main, 100_000, 2),
        (LadderVariant::Counterexample, 1000, 3),
        (LadderVariant::Counterexample, 100_000, 2),
    ];
    let mut rungs = 0u64;
    for (variant, l0, k_max) in cases {
        let e = match variant {
            LadderVariant::Main => 4u32,
            LadderVariant::Counterexample => 5,
        };
        let ladder = build_ladder(variant, l0, k_max).unwrap();
        assert_eq!(ladder.len(), k_max + 1);
        for k in 0..=k_max {
            let scale = ladder.scale(k) as u128;
            let ratio = ladder.ratio(k) as u128;
            assert!(
                ratio.pow(e) <= scale && scale < (ratio + 1).pow(e),
                "{variant:?} l0={l0} rung {k}: ratio {ratio} is not the integer root of {scale}"
            );
            if k < k_max {
                let next = ladder.scale(k + 1) as u128;
                assert_eq!(next, ratio * scale, "recursion broken at rung {k}");
                assert!(
                    next.pow(4) <= scale.pow(5),
                    "{variant:?} l0={l0} rung {k}: {next}^4 > {scale}^5"
                );
            }
            rungs += 1;
        }
    }
    let cx = build_ladder(LadderVariant::Counterexample, 100_000, 1).unwrap();
    assert_eq!(cx.ratio(0), 10);
    assert_eq!(cx.scale(1), 1_000_000);
    println!(
        "gate 16: PASS - {rungs} rungs satisfy root, recursion, and 5/4 sandwich exactly; \
         counterexample base 10^5 yields l0 = 10, L1 = 10^6"
    );
}
