use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which wind forecast mean to use.
#[derive(Clone, Debug, PartialEq)]
pub enum Scenario {
    /// The low-wind morning mean.
    LowWind,
    /// The high-wind morning mean.
    HighWind,
    /// Row `t` (0-based) of the wind trace.
    TraceHour(usize),
    /// Explicit mean in MW, one entry per farm.
    Explicit(Vec<f64>),
}

impl FromStr for Scenario {
    type Err = Error;

    /// Accepts `low-wind`, `high-wind`, `trace-hour:T` or a comma-separated vector.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "low-wind" => return Ok(Scenario::LowWind),
            "high-wind" => return Ok(Scenario::HighWind),
            _ => {}
        }
        if let Some(t) = s.strip_prefix("trace-hour:") {
            return t
                .trim()
                .parse()
                .map(Scenario::TraceHour)
                .map_err(|_| Error::InvalidArgument(format!("invalid trace hour '{t}'")));
        }
        let values: std::result::Result<Vec<f64>, _> = s
            .trim_start_matches('[')
            .trim_end_matches(']')
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect();
        match values {
            Ok(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => Ok(Scenario::Explicit(v)),
            _ => Err(Error::InvalidArgument(format!(
                "unknown scenario '{s}' (expected low-wind, high-wind, trace-hour:T or a vector)"
            ))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::LowWind => write!(f, "low-wind"),
            Scenario::HighWind => write!(f, "high-wind"),
            Scenario::TraceHour(t) => write!(f, "trace-hour:{t}"),
            Scenario::Explicit(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum ScenarioField {
    Tag(String),
    Vector(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTraceConfig {
    #[serde(default = "default_hours")]
    pub hours: usize,
    pub seed: Option<u64>,
}

fn default_hours() -> usize {
    589
}

fn default_beta() -> Vec<f64> {
    vec![1.0]
}

fn default_samples() -> usize {
    1000
}

fn default_trials() -> usize {
    crate::risk::DEFAULT_TRIALS
}

fn default_one() -> f64 {
    1.0
}

fn default_jobs() -> usize {
    1
}

fn default_tol() -> f64 {
    1e-9
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    case_path: PathBuf,
    wind_buses: Option<Vec<u32>>,
    conventional_scale: Option<f64>,
    penetration: Option<f64>,
    trace_path: Option<PathBuf>,
    #[serde(default = "default_true")]
    trace_normalized: bool,
    synthetic_trace: Option<SyntheticTraceConfig>,
    scenario: ScenarioField,
    #[serde(default = "default_one")]
    mean_scale: f64,
    alpha_list: Vec<f64>,
    #[serde(default = "default_beta")]
    beta_list: Vec<f64>,
    #[serde(default = "default_samples")]
    samples: usize,
    #[serde(default = "default_trials")]
    n_trials: usize,
    seed: u64,
    output_dir: PathBuf,
    #[serde(default = "default_jobs")]
    jobs: usize,
    #[serde(default)]
    clip_to_capacity: bool,
    #[serde(default = "default_tol")]
    tol: f64,
}

/// Where the wind trace comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum TraceSource {
    /// CSV file; `normalized` traces are multiplied by farm capacity.
    File { path: PathBuf, normalized: bool },
    Synthetic { hours: usize, seed: u64 },
}

/// Parsed and checked experiment description. Relative paths in a config file
/// are resolved against the file's directory.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub case_path: PathBuf,
    /// External bus ids that receive a wind farm; keeps the case's own farms when absent.
    pub wind_buses: Option<Vec<u32>>,
    /// `(conventional_scale, penetration)` applied to the case.
    pub penetration: Option<(f64, f64)>,
    pub trace: TraceSource,
    pub scenario: Scenario,
    /// Multiplies the built-in low/high-wind means.
    pub mean_scale: f64,
    pub alpha_list: Vec<f64>,
    pub beta_list: Vec<f64>,
    pub samples: usize,
    pub n_trials: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub jobs: usize,
    pub clip_to_capacity: bool,
    pub tol: f64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            Error::Parse {
                line,
                message: e.message().to_string(),
            }
        })?;
        let resolve = |p: PathBuf| if p.is_relative() { base_dir.join(p) } else { p };
        let scenario = match raw.scenario {
            ScenarioField::Tag(s) => s.parse()?,
            ScenarioField::Vector(v) => Scenario::Explicit(v),
        };
        let trace = match (raw.trace_path, raw.synthetic_trace) {
            (Some(path), None) => TraceSource::File {
                path: resolve(path),
                normalized: raw.trace_normalized,
            },
            (None, Some(s)) => TraceSource::Synthetic {
                hours: s.hours,
                seed: s.seed.unwrap_or(raw.seed),
            },
            (None, None) => TraceSource::Synthetic {
                hours: default_hours(),
                seed: raw.seed,
            },
            (Some(_), Some(_)) => {
                return Err(Error::validation("give either trace_path or [synthetic_trace], not both"));
            }
        };
        let penetration = match (raw.conventional_scale, raw.penetration) {
            (None, None) => None,
            (Some(s), Some(p)) => Some((s, p)),
            (None, Some(p)) => Some((1.0 - p, p)),
            (Some(_), None) => return Err(Error::validation("conventional_scale needs penetration")),
        };
        let config = ExperimentConfig {
            case_path: resolve(raw.case_path),
            wind_buses: raw.wind_buses,
            penetration,
            trace,
            scenario,
            mean_scale: raw.mean_scale,
            alpha_list: raw.alpha_list,
            beta_list: raw.beta_list,
            samples: raw.samples,
            n_trials: raw.n_trials,
            seed: raw.seed,
            output_dir: resolve(raw.output_dir),
            jobs: raw.jobs,
            clip_to_capacity: raw.clip_to_capacity,
            tol: raw.tol,
        };
        config.check()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read config {}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml(&text, dir)
    }

    pub fn check(&self) -> Result<()> {
        if self.alpha_list.is_empty() {
            return Err(Error::validation("alpha_list is empty"));
        }
        if let Some(a) = self.alpha_list.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::validation(format!("alpha {a} outside (0, 1)")));
        }
        if self.beta_list.is_empty() {
            return Err(Error::validation("beta_list is empty"));
        }
        if let Some(b) = self.beta_list.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::validation(format!("beta {b} must be positive")));
        }
        if self.samples == 0 || self.n_trials == 0 || self.jobs == 0 {
            return Err(Error::validation("samples, n_trials and jobs must be at least 1"));
        }
        if !(self.mean_scale.is_finite() && self.mean_scale >= 0.0) {
            return Err(Error::validation("mean_scale must be finite and non-negative"));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::validation("tol must lie in (0, 1)"));
        }
        if let TraceSource::Synthetic { hours, .. } = self.trace {
            if hours < 2 {
                return Err(Error::validation("synthetic trace needs at least 2 hours"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
case_path = "case.m"
scenario = "high-wind"
alpha_list = [0.1, 0.01]
seed = 4
output_dir = "out"
"#;

    #[test]
    fn defaults_and_relative_paths() {
        let c = ExperimentConfig::from_toml(MINIMAL, Path::new("/data/exp")).unwrap();
        assert_eq!(c.case_path, PathBuf::from("/data/exp/case.m"));
        assert_eq!(c.output_dir, PathBuf::from("/data/exp/out"));
        assert_eq!(c.samples, 1000);
        assert_eq!(c.n_trials, 100_000);
        assert_eq!(c.beta_list, vec![1.0]);
        assert_eq!(c.trace, TraceSource::Synthetic { hours: 589, seed: 4 });
        assert_eq!(c.scenario, Scenario::HighWind);
    }

    #[test]
    fn vector_scenario_and_errors() {
        let text = MINIMAL.replace("\"high-wind\"", "[1.0, 2.5]");
        let c = ExperimentConfig::from_toml(&text, Path::new(".")).unwrap();
        assert_eq!(c.scenario, Scenario::Explicit(vec![1.0, 2.5]));
        let bad = MINIMAL.replace("[0.1, 0.01]", "[0.1, 1.5]");
        assert!(ExperimentConfig::from_toml(&bad, Path::new(".")).is_err());
        let unknown = format!("{MINIMAL}colour = 3\n");
        assert!(matches!(ExperimentConfig::from_toml(&unknown, Path::new(".")), Err(Error::Parse { .. })));
        let tag = MINIMAL.replace("high-wind", "gale");
        assert!(ExperimentConfig::from_toml(&tag, Path::new(".")).is_err());
    }

    #[test]
    fn scenario_strings() {
        assert_eq!("trace-hour:12".parse::<Scenario>().unwrap(), Scenario::TraceHour(12));
        assert_eq!("1,2,3".parse::<Scenario>().unwrap(), Scenario::Explicit(vec![1.0, 2.0, 3.0]));
        assert_eq!("low-wind".parse::<Scenario>().unwrap().to_string(), "low-wind");
        assert!("trace-hour:x".parse::<Scenario>().is_err());
    }
}
