//! Experiment dispatch: resolves a config into estimator calls from the core
//! crate, stamps every row with the config hash and wall-clock time, and
//! appends the rows to a CSV file plus a JSON-lines manifest. Reruns of the
//! same (config, seed) produce byte-identical rows except for the wall-clock
//! column, regardless of worker count.

use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use rwdre_core::rng::{stream, SplitRng};
use rwdre_core::stats::{mean_ci, proportion_ci};
use rwdre_core::{
    bracket_speeds, build_ladder, concentration_diagnostic, covariance_decay_profile, east_front,
    east_zero_run, fluctuation_experiment, generate_soup, run_drift_walker, run_walker,
    BoxObservable, DecayModel, DecayOutcome, Error, EstimateWithCI, JumpRule, LadderVariant,
    LazyClockField, ModelParams, PlanePoint, Result, SpaceTimeBox, SpaceTimePoint, WalkerPath,
};
use rwdre_core::{threatened_density, trapped_at};
use serde::Serialize;

use crate::config::{ConfigModel, ExperimentConfig, Extract};
use crate::registry;

/// Confidence level of every emitted interval.
const LEVEL: f64 = 0.99;
/// More than 1 in 100 truncated replicas aborts the run as unreliable.
const DISCARD_CAP_PERCENT: u64 = 1;

pub const CSV_HEADER: [&str; 11] = [
    "experiment",
    "model",
    "param_hash",
    "key1",
    "key2",
    "estimate",
    "half_width",
    "replicas",
    "discards",
    "seed",
    "wall_ms",
];

const ORIGIN: SpaceTimePoint = SpaceTimePoint { x: 0, t: 0.0 };

/// One result row minus the run-level columns the writer adds.
#[derive(Debug, Clone, PartialEq)]
pub struct RowCore {
    pub key1: String,
    pub key2: String,
    pub estimate: f64,
    pub half_width: f64,
    pub replicas: u64,
    pub discards: u64,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub rows: usize,
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub wall_ms: u64,
    pub param_hash: String,
}

/// Runs one experiment config end to end and appends its outputs.
pub fn run(cfg: &ExperimentConfig) -> Result<RunSummary> {
    registry::lookup(&cfg.experiment).ok_or_else(|| {
        Error::param(format!(
            "unknown experiment '{}'; run `rwdre list` for the registry",
            cfg.experiment
        ))
    })?;
    let started = Instant::now();
    let rows = dispatch(cfg)?;
    let wall_ms = started.elapsed().as_millis() as u64;
    let hash = cfg.param_hash();
    let csv = cfg.out_path();
    append_rows(cfg, &hash, &rows, &csv, wall_ms)?;
    let manifest = csv.with_file_name("manifest.jsonl");
    append_manifest(cfg, &hash, rows.len(), &csv, &manifest, wall_ms)?;
    Ok(RunSummary { rows: rows.len(), csv, manifest, wall_ms, param_hash: hash })
}

/// Maps an error to the process exit code contract: 2 for configuration and
/// I/O problems, 3 for statistical validity failures, 4 for violated
/// invariants or unexpected truncation.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Param(_) | Error::Format(_) | Error::Io(_) => 2,
        Error::Stats(_) => 3,
        Error::Invariant(_) | Error::Truncated { .. } => 4,
    }
}

fn dispatch(cfg: &ExperimentConfig) -> Result<Vec<RowCore>> {
    match cfg.experiment.as_str() {
        "speed" => speed(cfg),
        "bracket" => bracket(cfg),
        "trapped_census" => trapped_census(cfg),
        "threatened_census" => threatened_census(cfg),
        "mixing_profile" => mixing_profile(cfg),
        "counterexample_fluct" => counterexample_fluct(cfg),
        "concentration" => concentration(cfg),
        other => Err(Error::param(format!("experiment '{other}' is not implemented"))),
    }
}

fn require_rule(cfg: &ExperimentConfig) -> Result<&JumpRule> {
    cfg.walker
        .as_ref()
        .ok_or_else(|| Error::param(format!("{} requires a walker rule", cfg.experiment)))
}

fn no_walker(cfg: &ExperimentConfig, why: &str) -> Result<()> {
    if cfg.walker.is_some() {
        Err(Error::param(format!("{why} does not take a walker rule")))
    } else {
        Ok(())
    }
}

fn require_env(model: &ConfigModel) -> Result<&ModelParams> {
    match model {
        ConfigModel::Params(p) => Ok(p),
        ConfigModel::Counterexample { .. } => Err(Error::param(
            "this experiment needs a site model, not the rectangle soup",
        )),
    }
}

fn window_margin(t: f64, radius: i64) -> i64 {
    (t + 10.0 * t.sqrt() + 20.0).ceil() as i64 + radius + 2
}

fn check_discards(kept: usize, total: u64, what: &str) -> Result<u64> {
    let discards = total - kept as u64;
    if discards * 100 > total * DISCARD_CAP_PERCENT {
        return Err(Error::stats(format!(
            "{what}: {discards} of {total} replicas truncated (cap {DISCARD_CAP_PERCENT}%)"
        )));
    }
    Ok(discards)
}

fn finished_speed(path: &WalkerPath, t: f64) -> Option<f64> {
    if path.truncated.is_some() {
        None
    } else {
        Some(path.displacement() as f64 / t)
    }
}

fn positive_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::param(format!("grid.{name} must be nonempty")));
    }
    if grid.iter().any(|&t| !t.is_finite() || t <= 0.0) {
        return Err(Error::param(format!(
            "grid.{name} entries must be positive and finite"
        )));
    }
    Ok(())
}

fn single_horizon(g: &mut Extract) -> Result<f64> {
    let hs = g.require_f64_list("horizons")?;
    match hs[..] {
        [h] if h.is_finite() && h > 0.0 => Ok(h),
        _ => Err(Error::param("grid.horizons must hold exactly one positive horizon")),
    }
}

fn speed(cfg: &ExperimentConfig) -> Result<Vec<RowCore>> {
    let mut g = Extract::new("grid", &cfg.grid);
    let horizons = g.require_f64_list("horizons")?;
    g.finish()?;
    positive_grid("horizons", &horizons)?;
    let mut p = Extract::new("params", &cfg.params);
    let target = p.string("target")?;
    p.finish()?;
    let model = cfg.build_model()?;

    let mut rows = Vec::new();
    for (ti, &t) in horizons.iter().enumerate() {
        let samples = speed_samples(cfg, &model, target.as_deref(), ti, t)?;
        let kept: Vec<f64> = samples.into_iter().flatten().collect();
        let discards = check_discards(kept.len(), cfg.replicas, "speed")?;
        let est = mean_ci(&kept, LEVEL, cfg.seed)?;
        rows.push(RowCore {
            key1: t.to_string(),
            key2: target.clone().unwrap_or_else(|| "mean_speed".into()),
            estimate: est.point,
            half_width: est.half_width,
            replicas: est.replicas,
            discards,
        });
    }
    Ok(rows)
}

fn speed_samples(
    cfg: &ExperimentConfig,
    model: &ConfigModel,
    target: Option<&str>,
    ti: usize,
    t: f64,
) -> Result<Vec<Option<f64>>> {
    let root = SplitRng::new(cfg.seed).stream(stream::REPLICA).index(ti as u64);
    match (model, target) {
        (
            ConfigModel::Params(ModelParams::East { rho, .. }),
            Some(tgt @ ("distinguished_zero" | "front")),
        ) => {
            no_walker(cfg, "speed with params.target")?;
            let rho = *rho;
            let zero = tgt == "distinguished_zero";
            let margin = (t + 5.0 * t.sqrt()).ceil() as i64 + 20;
            (0..cfg.replicas)
                .into_par_iter()
                .map(|i| {
                    let rseed = root.index(i).next();
                    let path = if zero {
                        east_zero_run(rho, 0, margin, t, rseed)?
                    } else {
                        let x_hi = ((0.4 * t).ceil() as i64).max(100);
                        east_front(rho, -margin, x_hi, t, rseed)?
                    };
                    Ok(finished_speed(&path, t))
                })
                .collect()
        }
        (_, Some(other)) => Err(Error::param(format!(
            "params.target = '{other}' needs model = east and target distinguished_zero or front"
        ))),
        (ConfigModel::Params(p), None) => {
            let rule = require_rule(cfg)?;
            let radius = rule.radius();
            (0..cfg.replicas)
                .into_par_iter()
                .map(|i| {
                    let rseed = root.index(i).next();
                    let m = window_margin(t, radius);
                    let mut env = p.instantiate(-m, m, t, rseed)?;
                    let mut clocks = LazyClockField::new(1.0, t, rseed)?;
                    match run_walker(&mut env, &mut clocks, rule, ORIGIN, t) {
                        Ok(path) => Ok(finished_speed(&path, t)),
                        Err(e) if e.is_discardable() => Ok(None),
                        Err(e) => Err(e),
                    }
                })
                .collect()
        }
        (ConfigModel::Counterexample { l0, k_max }, None) => {
            no_walker(cfg, "speed on the rectangle soup")?;
            let (l0, k_max) = (*l0, *k_max);
            let m = (t + 10.0 * t.sqrt() + 20.0).ceil();
            (0..cfg.replicas)
                .into_par_iter()
                .map(|i| {
                    let sub = root.index(i);
                    let window = SpaceTimeBox::new(-m, m, 0.0, t)?;
                    let soup = generate_soup(l0, k_max, window, sub.index(0).next())?;
                    let mut clocks = LazyClockField::new(1.0, t, sub.index(1).next())?;
                    match run_drift_walker(&soup, &mut clocks, ORIGIN, t) {
                        Ok(path) => Ok(finished_speed(&path, t)),
                        Err(e) if e.is_discardable() => Ok(None),
                        Err(e) => Err(e),
                    }
                })
                .collect()
        }
    }
}

fn bracket(cfg: &ExperimentConfig) -> Result<Vec<RowCore>> {
    let rule = require_rule(cfg)?;
    let model = cfg.build_model()?;
    let env = require_env(&model)?;
    let mut p = Extract::new("params", &cfg.params);
    let theta = p.f64("theta")?.unwrap_or(0.05);
    p.finish()?;
    let mut g = Extract::new("grid", &cfg.grid);
    let horizons = g.require_f64_list("horizons")?;
    let speeds = g.require_f64_list("speeds")?;
    g.finish()?;

    let b = bracket_speeds(env, rule, &horizons, &speeds, theta, cfg.replicas, cfg.seed)?;
    let mut rows = Vec::new();
    for pt in &b.points {
        let up: u64 = pt.upper.iter().map(|e| e.discards).sum();
        let lo: u64 = pt.lower.iter().map(|e| e.discards).sum();
        if let Some(v) = pt.v_plus {
            rows.push(RowCore {
                key1: pt.h.to_string(),
                key2: "v_plus".into(),
                estimate: v,
                half_width: 0.0,
                replicas: cfg.replicas,
                discards: up,
            });
        }
        if let Some(v) = pt.v_minus {
            rows.push(RowCore {
                key1: pt.h.to_string(),
                key2: "v_minus".into(),
                estimate: v,
                half_width: 0.0,
                replicas: cfg.replicas,
                discards: lo,
            });
        }
    }
    Ok(rows)
}

fn trapped_census(cfg: &ExperimentConfig) -> Result<Vec<RowCore>> {
    let rule = require_rule(cfg)?;
    let model = cfg.build_model()?;
    let env = require_env(&model)?;
    let mut p = Extract::new("params", &cfg.params);
    let delta = p.require_f64("delta")?;
    let v_minus = p.require_f64("v_minus")?;
    p.finish()?;
    let mut g = Extract::new("grid", &cfg.grid);
    let h = single_horizon(&mut g)?;
    let ax = g.require_f64_list("anchors_x")?;
    let at = g.require_f64_list("anchors_t")?;
    g.finish()?;
    if ax.is_empty() || at.is_empty() {
        return Err(Error::param("grid.anchors_x and grid.anchors_t must be nonempty"));
    }

    let points: Vec<PlanePoint> = at
        .iter()
        .flat_map(|&t0| ax.iter().map(move |&x| PlanePoint { x, t: t0 }))
        .collect();
    let per_point = cfg.replicas;
    let total = points.len() as u64 * per_point;
    let root = SplitRng::new(cfg.seed).stream(stream::REPLICA);
    let flags: Vec<bool> = (0..total)
        .into_par_iter()
        .map(|j| {
            let w = points[(j / per_point) as usize];
            trapped_at(env, rule, w, h, delta, v_minus, root.index(j).next())
        })
        .collect::<Result<_>>()?;
    let hits = flags.iter().filter(|&&b| b).count() as u64;
    let est = proportion_ci(hits, total, LEVEL, cfg.seed)?;
    Ok(vec![RowCore {
        key1: h.to_string(),
        key2: delta.to_string(),
        estimate: est.point,
        half_width: est.half_width,
        replicas: total,
        discards: 0,
    }])
}

fn threatened_census(cfg: &ExperimentConfig) -> Result<Vec<RowCore>> {
    let rule = require_rule(cfg)?;
    let model = cfg.build_model()?;
    let env = require_env(&model)?;
    let mut p = Extract::new("params", &cfg.params);
    let delta = p.require_f64("delta")?;
    let v_plus = p.require_f64("v_plus")?;
    let v_minus = p.require_f64("v_minus")?;
    let k_bar = p.require_usize("k_bar")?;
    let l0 = p.require_u64("l0")?;
    let variant = match p.string("variant")?.as_deref() {
        None | Some("main") => LadderVariant::Main,
        Some("counterexample") => LadderVariant::Counterexample,
        Some(other) => {
            return Err(Error::param(format!(
                "unknown variant '{other}' (expected main or counterexample)"
            )))
        }
    };
    p.finish()?;
    let mut g = Extract::new("grid", &cfg.grid);
    let h = single_horizon(&mut g)?;
    g.finish()?;

    let ladder = build_ladder(variant, l0, k_bar + 1)?;
    let span = h * ladder.scale(k_bar + 1) as f64;
    let radius = rule.radius();
    let root = SplitRng::new(cfg.seed).stream(stream::REPLICA);
    let densities: Vec<Option<f64>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|i| -> Result<Option<f64>> {
            let sub = root.index(i);
            let pseed = sub.index(0).next();
            let m = window_margin(span, radius);
            let mut env_i = env.instantiate(-m, m, span, pseed)?;
            let mut clocks = LazyClockField::new(1.0, span, pseed)?;
            let path = match run_walker(&mut env_i, &mut clocks, rule, ORIGIN, span) {
                Ok(path) => path,
                Err(e) if e.is_discardable() => return Ok(None),
                Err(e) => return Err(e),
            };
            // Fresh seed per trap query, derived from this replica's stream.
            let trap_root = sub.index(1);
            let mut call = 0u64;
            let mut trap = |w: PlanePoint| {
                let s = trap_root.index(call).next();
                call += 1;
                trapped_at(env, rule, w, h, delta, v_minus, s)
            };
            threatened_density(&path, h, &ladder, k_bar, delta, v_plus, &mut trap).map(Some)
        })
        .collect::<Result<_>>()?;
    let kept: Vec<f64> = densities.into_iter().flatten().collect();
    let discards = check_discards(kept.len(), cfg.replicas, "threatened_census")?;
    let est = mean_ci(&kept, LEVEL, cfg.seed)?;
    Ok(vec![RowCore {
        key1: h.to_string(),
        key2: k_bar.to_string(),
        estimate: est.point,
        half_width: est.half_width,
        replicas: est.replicas,
        discards,
    }])
}

fn mixing_profile(cfg: &ExperimentConfig) -> Result<Vec<RowCore>> {
    no_walker(cfg, "mixing_profile")?;
    let model = cfg.build_model()?;
    let env = require_env(&model)?;
    let mut p = Extract::new("params", &cfg.params);
    let template: BoxObservable = p
        .record("observable")?
        .ok_or_else(|| Error::param("params.observable is required"))?;
    p.finish()?;
    let mut g = Extract::new("grid", &cfg.grid);
    let seps = g.require_f64_list("separations")?;
    g.finish()?;

    let fit = covariance_decay_profile(env, &template, &seps, cfg.replicas, cfg.seed)?;
    let mut rows = Vec::new();
    for &(r, cov, hw) in &fit.pairs {
        rows.push(RowCore {
            key1: r.to_string(),
            key2: "covariance".into(),
            estimate: cov,
            half_width: hw,
            replicas: cfg.replicas,
            discards: 0,
        });
    }
    let (key2, estimate, half_width) = match &fit.outcome {
        DecayOutcome::Fit { model, exponent, residual } => {
            let name = match model {
                DecayModel::PowerLaw => "power_law",
                DecayModel::Exponential => "exponential",
            };
            (name, *exponent, *residual)
        }
        DecayOutcome::BelowNoiseFloor => ("below_noise_floor", 0.0, 0.0),
        DecayOutcome::TooFewPositive => ("too_few_positive", 0.0, 0.0),
    };
    rows.push(RowCore {
        key1: "decay".into(),
        key2: key2.into(),
        estimate,
        half_width,
        replicas: cfg.replicas,
        discards: 0,
    });
    Ok(rows)
}

fn counterexample_fluct(cfg: &ExperimentConfig) -> Result<Vec<RowCore>> {
    no_walker(cfg, "counterexample_fluct")?;
    let model = cfg.build_model()?;
    let ConfigModel::Counterexample { l0, .. } = model else {
        return Err(Error::param("counterexample_fluct requires model = counterexample"));
    };
    let mut p = Extract::new("params", &cfg.params);
    let forced_gray = p.bool("forced_gray")?.unwrap_or(false);
    p.finish()?;
    let mut g = Extract::new("grid", &cfg.grid);
    let scales = g.require_usize_list("scales")?;
    g.finish()?;

    let table = fluctuation_experiment(l0, &scales, cfg.replicas, forced_gray, cfg.seed)?;
    let mut rows = Vec::new();
    for r in &table {
        let legs: [(&str, &EstimateWithCI, u64); 4] = [
            ("up", &r.up, r.discards),
            ("down", &r.down, r.discards),
            ("baseline_up", &r.baseline_up, r.baseline_discards),
            ("baseline_down", &r.baseline_down, r.baseline_discards),
        ];
        for (name, est, discards) in legs {
            rows.push(RowCore {
                key1: r.scale.to_string(),
                key2: name.into(),
                estimate: est.point,
                half_width: est.half_width,
                replicas: est.replicas,
                discards,
            });
        }
    }
    Ok(rows)
}

fn concentration(cfg: &ExperimentConfig) -> Result<Vec<RowCore>> {
    let rule = require_rule(cfg)?;
    let model = cfg.build_model()?;
    let env = require_env(&model)?;
    let mut p = Extract::new("params", &cfg.params);
    let eps = p.require_f64("eps")?;
    let v_hat = p.f64("v_hat")?;
    p.finish()?;
    let mut g = Extract::new("grid", &cfg.grid);
    let times = g.require_f64_list("times")?;
    g.finish()?;
    positive_grid("times", &times)?;

    let table = concentration_diagnostic(env, rule, &times, eps, v_hat, cfg.replicas, cfg.seed)?;
    let mut rows = vec![RowCore {
        key1: "v_hat".into(),
        key2: "pilot".into(),
        estimate: table.v_hat,
        half_width: 0.0,
        replicas: table.replicas,
        discards: table.discards,
    }];
    for (t, est) in &table.rows {
        rows.push(RowCore {
            key1: t.to_string(),
            key2: eps.to_string(),
            estimate: est.point,
            half_width: est.half_width,
            replicas: est.replicas,
            discards: table.discards,
        });
    }
    Ok(rows)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn append_rows(
    cfg: &ExperimentConfig,
    hash: &str,
    rows: &[RowCore],
    path: &Path,
    wall_ms: u64,
) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        w.write_record(CSV_HEADER).map_err(csv_err)?;
    }
    let seed = cfg.seed.to_string();
    let wall = wall_ms.to_string();
    for r in rows {
        let est = r.estimate.to_string();
        let hw = r.half_width.to_string();
        let reps = r.replicas.to_string();
        let disc = r.discards.to_string();
        w.write_record([
            cfg.experiment.as_str(),
            cfg.model.as_str(),
            hash,
            r.key1.as_str(),
            r.key2.as_str(),
            est.as_str(),
            hw.as_str(),
            reps.as_str(),
            disc.as_str(),
            seed.as_str(),
            wall.as_str(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ManifestLine<'a> {
    experiment: &'a str,
    model: &'a str,
    param_hash: &'a str,
    seed: u64,
    replicas: u64,
    rows: usize,
    csv: String,
    wall_ms: u64,
}

fn append_manifest(
    cfg: &ExperimentConfig,
    hash: &str,
    rows: usize,
    csv: &Path,
    manifest: &Path,
    wall_ms: u64,
) -> Result<()> {
    let line = ManifestLine {
        experiment: &cfg.experiment,
        model: &cfg.model,
        param_hash: hash,
        seed: cfg.seed,
        replicas: cfg.replicas,
        rows,
        csv: csv.display().to_string(),
        wall_ms,
    };
    let text = serde_json::to_string(&line).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let mut f = OpenOptions::new().create(true).append(true).open(manifest)?;
    writeln!(f, "{text}")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_contract() {
        assert_eq!(exit_code(&Error::param("x")), 2);
        assert_eq!(exit_code(&Error::Format("x".into())), 2);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), 2);
        assert_eq!(exit_code(&Error::stats("x")), 3);
        assert_eq!(exit_code(&Error::invariant("x")), 4);
        assert_eq!(exit_code(&Error::truncated(1.0, "x")), 4);
    }
}
