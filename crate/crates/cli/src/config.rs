//! The JSON run configuration and its overrides.

use std::path::{Path, PathBuf};

use circsearch::engine::{SearchParams, Strategy, VelocityMode};
use circsearch::geometry::partition_size;
use circsearch::NoiseModel;
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Constant { p0: f64 },
    Linear { p0: f64, phalf: f64 },
    /// Knots `[s, p]`, interpolated linearly.
    Table { knots: Vec<(f64, f64)> },
}

impl ModelSpec {
    pub fn build(&self) -> Result<NoiseModel, CliError> {
        let m = match self {
            ModelSpec::Constant { p0 } => NoiseModel::constant(*p0),
            ModelSpec::Linear { p0, phalf } => NoiseModel::linear(*p0, *phalf),
            ModelSpec::Table { knots } => NoiseModel::table(knots.clone()),
        };
        m.map_err(|e| CliError::Config(format!("model: {e}")))
    }
}

/// Evenly spaced rates, both ends included.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl RateGrid {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n)
                .map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

/// Axes of a Cartesian sweep; an absent axis uses the scalar setting.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub strategy: Option<Vec<String>>,
    #[serde(rename = "N")]
    pub n: Option<Vec<usize>>,
    #[serde(rename = "R")]
    pub rate: Option<Vec<f64>>,
    #[serde(rename = "T")]
    pub threshold: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default = "default_kappa_mode")]
    pub kappa_mode: String,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[serde(rename = "R")]
    pub rate: Option<f64>,
    pub delta: Option<f64>,
    /// Bin count for `trajectories`; derived from `N` and `delta` (or `R`)
    /// when absent.
    #[serde(rename = "M")]
    pub m: Option<usize>,
    pub eps_slack: Option<f64>,
    #[serde(rename = "T")]
    pub threshold: Option<f64>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
    pub max_retries: Option<u32>,
    pub artificial_noise: Option<bool>,
    pub table_cap: Option<usize>,
    pub grid_w: Option<u64>,
    pub grid_v: Option<u64>,
    pub trials: Option<u64>,
    pub rates: Option<Vec<f64>>,
    pub rate_grid: Option<RateGrid>,
    /// Empirical decision-feedback curve to merge into `curves`.
    pub empirical: Option<PathBuf>,
    /// Forney thresholds for an empirical curve written by `simulate`.
    pub curve_thresholds: Option<Vec<f64>>,
    pub curve_out: Option<PathBuf>,
    pub sweep: Option<SweepSpec>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

fn default_strategy() -> String {
    Strategy::NonAdaptive.as_str().into()
}

fn default_kappa_mode() -> String {
    VelocityMode::Known.as_str().into()
}

/// Command-line settings that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    /// `key=value` overrides; dotted keys reach into objects and values are
    /// parsed as JSON, falling back to a plain string.
    pub set: Vec<String>,
}

impl RunConfig {
    /// Reads the file (if any), applies overrides and flags.
    pub fn load(flags: &Flags) -> Result<Self, CliError> {
        let mut doc = match &flags.config {
            Some(path) => read_json(path)?,
            None => Value::Object(Map::new()),
        };
        for item in &flags.set {
            apply_override(&mut doc, item)?;
        }
        let mut cfg: RunConfig = serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))?;
        if flags.out.is_some() {
            cfg.out.clone_from(&flags.out);
        }
        if flags.seed.is_some() {
            cfg.seed = flags.seed;
        }
        if flags.workers.is_some() {
            cfg.workers = flags.workers;
        }
        Ok(cfg)
    }

    pub fn model(&self) -> Result<NoiseModel, CliError> {
        self.model.build()
    }

    pub fn strategy(&self) -> Result<Strategy, CliError> {
        parse_strategy(&self.strategy)
    }

    pub fn velocity(&self) -> Result<VelocityMode, CliError> {
        VelocityMode::parse(&self.kappa_mode).ok_or_else(|| {
            CliError::Config(format!("kappa_mode: `{}` is not one of known, unknown", self.kappa_mode))
        })
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Config("seed: required (pass --seed)".into()))
    }

    pub fn trials(&self) -> Result<u64, CliError> {
        match self.trials {
            Some(0) => Err(CliError::Config("trials: must be at least 1".into())),
            Some(t) => Ok(t),
            None => Err(CliError::Config("trials: required".into())),
        }
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or(0)
    }

    pub fn n(&self) -> Result<usize, CliError> {
        self.n.ok_or_else(|| CliError::Config("N: required".into()))
    }

    /// Search parameters for one cell; `n`, `rate` and `threshold` override
    /// the scalar settings.
    pub fn search_params(
        &self,
        strategy: Strategy,
        n: usize,
        rate: Option<f64>,
        threshold: Option<f64>,
    ) -> Result<SearchParams, CliError> {
        let model = self.model()?;
        let mut p = match (rate, self.delta) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("R, delta: give one of them, not both".into()));
            }
            (Some(r), None) => {
                if !(r > 0.0 && r.is_finite()) {
                    return Err(CliError::Config(format!("R: {r} must be positive")));
                }
                SearchParams::from_rate(model, n, r)
            }
            (None, Some(d)) => SearchParams::new(model, n, d),
            (None, None) => return Err(CliError::Config("R, delta: one of them is required".into())),
        };
        p.velocity = self.velocity()?;
        if let Some(e) = self.eps_slack {
            p.eps_slack = e;
        }
        if let Some(t) = threshold.or(self.threshold) {
            p.threshold = t;
        }
        p.lambda = self.lambda;
        if let Some(a) = self.alpha {
            p.alpha = a;
        }
        p.eta = self.eta;
        if let Some(r) = self.max_retries {
            p.max_retries = r;
        }
        if let Some(a) = self.artificial_noise {
            p.artificial_noise = a;
        }
        if let Some(c) = self.table_cap {
            p.table_cap = c;
        }
        p.grid = self.grid(n, p.delta)?;
        p.seed = self.seed.unwrap_or(0);
        p.validate(strategy).map_err(CliError::from_core)?;
        Ok(p)
    }

    /// Explicit sweep grid, if one was configured.
    fn grid(&self, n: usize, delta: f64) -> Result<Option<(u64, u64)>, CliError> {
        match (self.grid_w, self.grid_v) {
            (None, None) => Ok(None),
            (w, v) => {
                let m = partition_size(n, delta) as u64;
                Ok(Some((w.unwrap_or(4 * m), v.unwrap_or(4 * m * n as u64))))
            }
        }
    }

    /// Rates for `curves`: the explicit list, else the grid, else 50 points
    /// from 0 to `C(p[0])`.
    pub fn rate_values(&self) -> Result<Vec<f64>, CliError> {
        match (&self.rates, &self.rate_grid) {
            (Some(_), Some(_)) => Err(CliError::Config("rates, rate_grid: give one of them, not both".into())),
            (Some(r), None) => Ok(r.clone()),
            (None, Some(g)) => Ok(g.values()),
            (None, None) => {
                let c = circsearch::infotheory::capacity(self.model()?.p0()).map_err(CliError::from_core)?;
                Ok(RateGrid {
                    start: 0.0,
                    stop: c,
                    points: 50,
                }
                .values())
            }
        }
    }
}

pub fn parse_strategy(s: &str) -> Result<Strategy, CliError> {
    Strategy::parse(s).ok_or_else(|| {
        CliError::Config(format!(
            "strategy: `{s}` is not one of nonadaptive, forney, yi, two_phase"
        ))
    })
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
}

fn apply_override(doc: &mut Value, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{item}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("override `{key}`: `{part}` is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    Err(CliError::Config(format!("override `{item}` has an empty key")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(set: &[&str]) -> Flags {
        Flags {
            set: set.iter().map(|s| s.to_string()).collect(),
            ..Flags::default()
        }
    }

    #[test]
    fn overrides_build_a_config() {
        let cfg = RunConfig::load(&flags(&["model.kind=linear", "model.p0=0.1", "model.phalf=0.45", "N=24", "R=0.25"])).unwrap();
        assert_eq!(cfg.model, ModelSpec::Linear { p0: 0.1, phalf: 0.45 });
        assert_eq!(cfg.n, Some(24));
        let p = cfg.search_params(Strategy::NonAdaptive, 24, cfg.rate, None).unwrap();
        assert_eq!(p.delta, 2f64.powi(-6));
    }

    #[test]
    fn unknown_and_missing_fields_are_named() {
        let e = RunConfig::load(&flags(&["N=3"])).unwrap_err();
        assert!(e.to_string().contains("model"), "{e}");
        let e = RunConfig::load(&flags(&["model.kind=constant", "model.p0=0.1", "bogus=1"])).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
    }

    #[test]
    fn invalid_params_name_their_field() {
        let cfg = RunConfig::load(&flags(&["model.kind=constant", "model.p0=0.1", "delta=1.5"])).unwrap();
        let e = cfg.search_params(Strategy::NonAdaptive, 8, None, None).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("delta"), "{e}");
        let cfg = RunConfig::load(&flags(&["model.kind=constant", "model.p0=0.1", "delta=0.1", "T=-1"])).unwrap();
        let e = cfg.search_params(Strategy::Forney, 8, None, None).unwrap_err();
        assert!(e.to_string().contains("`T`"), "{e}");
        let cfg = RunConfig::load(&flags(&["model.kind=linear", "model.p0=0.3", "model.phalf=0.2"])).unwrap();
        assert!(cfg.model().is_err());
    }

    #[test]
    fn rate_grid_endpoints() {
        let g = RateGrid { start: 0.0, stop: 1.0, points: 5 };
        assert_eq!(g.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(RateGrid { start: 0.0, stop: 1.0, points: 0 }.values().is_empty());
    }
}
