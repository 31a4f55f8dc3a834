//! Experiment configuration files: a TOML record naming an experiment and a
//! model plus three free-form sections (`model_params`, `params`, `grid`)
//! whose keys each experiment consumes and validates itself. A config also
//! carries a content hash over everything except seed, replica count, and
//! output path, so result rows from reruns with different budgets can be
//! matched up.

use std::path::{Path, PathBuf};

use rwdre_core::soup::DESK_K_MAX;
use rwdre_core::{Boundary, EastInit, Error, JumpRule, ModelParams, Result};
use serde::{Deserialize, Serialize};

/// One experiment run: what to estimate, on which model, with which knobs.
///
/// `model_params` holds the environment's own parameters, `params` the
/// experiment-level settings, and `grid` the evaluation grids. Scalar fields
/// outside those sections are the run budget and are excluded from the
/// content hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub model: String,
    pub seed: u64,
    pub replicas: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Jump rule for experiments that drive a walker. Either a preset name
    /// (`walker = "fair"`) or a probability table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walker: Option<JumpRule>,
    #[serde(default, skip_serializing_if = "toml::Table::is_empty")]
    pub model_params: toml::Table,
    #[serde(default, skip_serializing_if = "toml::Table::is_empty")]
    pub params: toml::Table,
    #[serde(default, skip_serializing_if = "toml::Table::is_empty")]
    pub grid: toml::Table,
}

/// The environment a config resolves to: either proper model parameters or
/// the rectangle-soup ladder, which is not a site process and is handled
/// specially by the experiments that accept it.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigModel {
    Params(ModelParams),
    Counterexample { l0: u64, k_max: usize },
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::param(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::param("replicas must be positive"));
        }
        // Deserialized probability tables bypass the checked constructor,
        // so re-validate them through it.
        if let Some(JumpRule::Table { ell, base, probs }) = &self.walker {
            JumpRule::table(*ell, *base, probs.clone())?;
        }
        Ok(())
    }

    pub fn apply_overrides(
        &mut self,
        seed: Option<u64>,
        replicas: Option<u64>,
        out: Option<PathBuf>,
    ) {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(r) = replicas {
            self.replicas = r;
        }
        if let Some(o) = out {
            self.out = Some(o);
        }
    }

    /// CSV path the run appends to: the `out` field, the `--out` override,
    /// or `results/<experiment>.csv`.
    pub fn out_path(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("results/{}.csv", self.experiment)))
    }

    /// Content hash over experiment, model, walker, and the three key
    /// sections, with tables in canonical key order. Seed, replicas, and
    /// output path do not participate, so reruns at other budgets share it.
    pub fn param_hash(&self) -> String {
        #[derive(Serialize)]
        struct Identity<'a> {
            experiment: &'a str,
            model: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            walker: &'a Option<JumpRule>,
            model_params: toml::Table,
            params: toml::Table,
            grid: toml::Table,
        }
        let id = Identity {
            experiment: &self.experiment,
            model: &self.model,
            walker: &self.walker,
            model_params: canonical_table(&self.model_params),
            params: canonical_table(&self.params),
            grid: canonical_table(&self.grid),
        };
        let text = toml::to_string(&id).expect("config identity serializes");
        format!("{:016x}", fnv1a64(text.as_bytes()))
    }

    /// Resolves the `model` name and `model_params` section, rejecting
    /// unknown models and leftover keys.
    pub fn build_model(&self) -> Result<ConfigModel> {
        let mut mp = Extract::new("model_params", &self.model_params);
        let built = match self.model.as_str() {
            "blind" => ConfigModel::Params(ModelParams::Constant {
                state: mp.u64("state")?.unwrap_or(0) as u16,
            }),
            "spinflip" => ConfigModel::Params(ModelParams::SpinFlip {
                nu: mp.require_f64("nu")?,
                rho: mp.require_f64("rho")?,
            }),
            "renewal" => ConfigModel::Params(ModelParams::Renewal {
                weights: mp.require_f64_list("weights")?,
            }),
            "east" => {
                let rho = mp.require_f64("rho")?;
                let boundary = boundary_from(mp.string("boundary")?)?;
                let init = match mp.i64("init_zero_at")? {
                    Some(site) => EastInit::ProductZeroAt { site },
                    None => EastInit::Product,
                };
                ConfigModel::Params(ModelParams::East { rho, boundary, init })
            }
            "contact" => ConfigModel::Params(ModelParams::Contact {
                lambda: mp.require_f64("lambda")?,
                boundary: boundary_from(mp.string("boundary")?)?,
                warmup: mp.f64("warmup")?.unwrap_or(10.0),
            }),
            "counterexample" => ConfigModel::Counterexample {
                l0: mp.u64("l0")?.unwrap_or(1000),
                k_max: mp.usize("k_max")?.unwrap_or(DESK_K_MAX),
            },
            other => {
                return Err(Error::param(format!(
                    "unknown model '{other}' (expected blind, spinflip, renewal, east, \
                     contact, or counterexample)"
                )))
            }
        };
        mp.finish()?;
        Ok(built)
    }
}

fn boundary_from(name: Option<String>) -> Result<Boundary> {
    match name.as_deref() {
        None | Some("frozen0") => Ok(Boundary::Frozen0),
        Some("frozen1") => Ok(Boundary::Frozen1),
        Some("periodic") => Ok(Boundary::Periodic),
        Some(other) => Err(Error::param(format!(
            "unknown boundary '{other}' (expected frozen0, frozen1, or periodic)"
        ))),
    }
}

/// Typed key consumer over one config section. Every accessor removes its
/// key; `finish` then rejects whatever is left, so misspelled or misplaced
/// keys fail loudly instead of being silently ignored.
pub struct Extract {
    section: &'static str,
    table: toml::Table,
}

impl Extract {
    pub fn new(section: &'static str, table: &toml::Table) -> Self {
        Extract { section, table: table.clone() }
    }

    fn missing(&self, key: &str) -> Error {
        Error::param(format!("{}.{} is required", self.section, key))
    }

    fn type_err(&self, key: &str, want: &str) -> Error {
        Error::param(format!("{}.{} must be {}", self.section, key, want))
    }

    fn number(&self, key: &str, v: &toml::Value) -> Result<f64> {
        match v {
            toml::Value::Float(x) => Ok(*x),
            toml::Value::Integer(n) => Ok(*n as f64),
            _ => Err(self.type_err(key, "a number")),
        }
    }

    pub fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.table.remove(key) {
            None => Ok(None),
            Some(v) => self.number(key, &v).map(Some),
        }
    }

    pub fn require_f64(&mut self, key: &str) -> Result<f64> {
        self.f64(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn i64(&mut self, key: &str) -> Result<Option<i64>> {
        match self.table.remove(key) {
            None => Ok(None),
            Some(toml::Value::Integer(n)) => Ok(Some(n)),
            Some(_) => Err(self.type_err(key, "an integer")),
        }
    }

    pub fn u64(&mut self, key: &str) -> Result<Option<u64>> {
        match self.i64(key)? {
            None => Ok(None),
            Some(n) if n >= 0 => Ok(Some(n as u64)),
            Some(_) => Err(self.type_err(key, "a nonnegative integer")),
        }
    }

    pub fn require_u64(&mut self, key: &str) -> Result<u64> {
        self.u64(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn usize(&mut self, key: &str) -> Result<Option<usize>> {
        Ok(self.u64(key)?.map(|n| n as usize))
    }

    pub fn require_usize(&mut self, key: &str) -> Result<usize> {
        self.usize(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.table.remove(key) {
            None => Ok(None),
            Some(toml::Value::Boolean(b)) => Ok(Some(b)),
            Some(_) => Err(self.type_err(key, "a boolean")),
        }
    }

    pub fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.table.remove(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(self.type_err(key, "a string")),
        }
    }

    pub fn f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.table.remove(key) {
            None => Ok(None),
            Some(toml::Value::Array(items)) => items
                .iter()
                .map(|v| self.number(key, v))
                .collect::<Result<Vec<f64>>>()
                .map(Some)
                .map_err(|_| self.type_err(key, "a list of numbers")),
            Some(_) => Err(self.type_err(key, "a list of numbers")),
        }
    }

    pub fn require_f64_list(&mut self, key: &str) -> Result<Vec<f64>> {
        self.f64_list(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn require_usize_list(&mut self, key: &str) -> Result<Vec<usize>> {
        match self.table.remove(key) {
            None => Err(self.missing(key)),
            Some(toml::Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    toml::Value::Integer(n) if *n >= 0 => Ok(*n as usize),
                    _ => Err(self.type_err(key, "a list of nonnegative integers")),
                })
                .collect(),
            Some(_) => Err(self.type_err(key, "a list of nonnegative integers")),
        }
    }

    /// Removes a sub-table and deserializes it into `T`.
    pub fn record<T: serde::de::DeserializeOwned>(&mut self, key: &str) -> Result<Option<T>> {
        match self.table.remove(key) {
            None => Ok(None),
            Some(v @ toml::Value::Table(_)) => v
                .try_into()
                .map(Some)
                .map_err(|e| Error::param(format!("{}.{}: {e}", self.section, key))),
            Some(_) => Err(self.type_err(key, "a table")),
        }
    }

    pub fn finish(self) -> Result<()> {
        if self.table.is_empty() {
            Ok(())
        } else {
            let keys: Vec<&str> = self.table.keys().map(String::as_str).collect();
            Err(Error::param(format!(
                "unknown {} keys: {}",
                self.section,
                keys.join(", ")
            )))
        }
    }
}

/// Rebuilds a table with keys (recursively) in sorted order, so the content
/// hash does not depend on key order in the source file.
fn canonical_table(t: &toml::Table) -> toml::Table {
    let mut keys: Vec<&String> = t.keys().collect();
    keys.sort();
    let mut out = toml::Table::new();
    for k in keys {
        out.insert(k.clone(), canonical_value(&t[k]));
    }
    out
}

fn canonical_value(v: &toml::Value) -> toml::Value {
    match v {
        toml::Value::Table(t) => toml::Value::Table(canonical_table(t)),
        toml::Value::Array(a) => toml::Value::Array(a.iter().map(canonical_value).collect()),
        other => other.clone(),
    }
}

/// FNV-1a, 64-bit.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
