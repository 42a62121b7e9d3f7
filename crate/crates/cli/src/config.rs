//! Run configuration: one TOML schema shared by every subcommand.

use std::path::{Path, PathBuf};

use anova_rgs::bench::{Scenario, Study};
use anova_rgs::estimator::FitConfig;
use anova_rgs::probes::Functional;
use anova_rgs::rates::TuningConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Fit,
    Tune,
    Simulate,
    Sweep,
    Probe,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Tune => "tune",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Probe => "probe",
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_n_grid() -> Vec<usize> {
    vec![64, 128, 256, 512, 1024]
}

fn default_n_mc() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<usize>,
    /// Fresh inputs per replicate for the `L²` risk.
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_grid: default_n_grid(),
            n_mc: default_n_mc(),
        }
    }
}

/// Observed data for `fit` and `tune`: CSV with columns `x1..xd,y` (an `m`
/// column is ignored). Without it, replicate 0 of the scenario is simulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Covering,
    Sudakov,
    Concentration,
}

/// Random points i.i.d. uniform on `[-1, 1]^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomPoints {
    pub count: usize,
    pub dim: usize,
}

fn default_probes() -> Vec<ProbeKind> {
    vec![
        ProbeKind::Covering,
        ProbeKind::Sudakov,
        ProbeKind::Concentration,
    ]
}

fn default_probe_n_mc() -> usize {
    10_000
}

fn default_probe_alpha() -> f64 {
    3.0
}

fn default_probe_n() -> usize {
    50
}

fn default_functional() -> Functional {
    Functional::Max
}

fn default_delta_grid() -> Vec<f64> {
    vec![0.1, 0.2, 0.4, 0.8, 1.6, 3.2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default = "default_probes")]
    pub kinds: Vec<ProbeKind>,
    #[serde(default = "default_probe_alpha")]
    pub alpha: f64,
    /// Dimension of the concentration probe.
    #[serde(default = "default_probe_n")]
    pub n: usize,
    #[serde(default = "default_functional")]
    pub phi: Functional,
    #[serde(default = "default_probe_n_mc")]
    pub n_mc: usize,
    #[serde(default = "default_delta_grid")]
    pub delta_grid: Vec<f64>,
    /// Explicit point set `T`; takes precedence over `random_points`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_points: Option<RandomPoints>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            kinds: default_probes(),
            alpha: default_probe_alpha(),
            n: default_probe_n(),
            phi: default_functional(),
            n_mc: default_probe_n_mc(),
            delta_grid: default_delta_grid(),
            points: None,
            random_points: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub tuning: TuningConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeConfig>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        Self::from_toml_with(text, &[])
    }

    /// Parse `text`, then apply `key.path=value` overrides before typing.
    pub fn from_toml_with(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut value: toml::Table =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(value)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_with(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Content hash of the canonical (re-serialized) config. The output
    /// directory is left out: where results go does not change them.
    pub fn hash(&self) -> String {
        let canonical = RunConfig {
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        anova_rgs::sha256_hex(canonical.to_toml().as_bytes())
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let mut sc = self.scenario.clone().ok_or_else(|| {
            CliError::Config(format!(
                "command {} needs a [scenario] table",
                self.command.name()
            ))
        })?;
        sc.seed = self.seed;
        Ok(sc)
    }

    pub fn study(&self) -> Result<Study, CliError> {
        Ok(Study {
            scenario: self.scenario()?,
            tuning: self.tuning,
            fit: self.fit,
            n_grid: self.sweep.n_grid.clone(),
            n_mc: self.sweep.n_mc,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match self.command {
            Command::Probe => {
                let p = self.probe.clone().unwrap_or_default();
                if p.kinds.is_empty() {
                    return Err(CliError::Config("probe.kinds is empty".into()));
                }
                if p.points.is_none()
                    && p.random_points.is_none()
                    && p.kinds.iter().any(|k| *k != ProbeKind::Concentration)
                {
                    return Err(CliError::Config(
                        "covering and sudakov probes need probe.points or probe.random_points"
                            .into(),
                    ));
                }
                if p.delta_grid.iter().any(|d| !d.is_finite() || *d <= 0.0) {
                    return Err(CliError::Config("probe.delta_grid must be positive".into()));
                }
                Ok(())
            }
            Command::Sweep => {
                let study = self.study()?;
                study
                    .validate()
                    .map_err(|e| CliError::Config(e.to_string()))?;
                if study.n_grid.len() < 4 {
                    return Err(CliError::Config(
                        "sweep.n_grid needs at least 4 sizes".into(),
                    ));
                }
                Ok(())
            }
            Command::Fit | Command::Tune | Command::Simulate => {
                let sc = self.scenario()?;
                sc.validate().map_err(|e| CliError::Config(e.to_string()))?;
                self.fit
                    .validate()
                    .map_err(|e| CliError::Config(e.to_string()))?;
                self.tuning
                    .params(sc.d, sc.n)
                    .validate()
                    .map_err(|e| CliError::Config(e.to_string()))?;
                Ok(())
            }
        }
    }
}

/// Set `a.b.c = value` in `table`. The value is read as a TOML literal and
/// falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {spec:?} is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!(
            "override key {key:?} is malformed"
        )));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = path.split_last().expect("nonempty");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| {
            CliError::Config(format!("override path {key:?} crosses non-table {p:?}"))
        })?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
