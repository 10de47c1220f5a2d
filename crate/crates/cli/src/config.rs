//! Experiment configuration documents.
//!
//! A config is a TOML file with a `task`, an `[[ensemble.group]]` list, an
//! optional `[target]`, and a `[sweep]`. See `presets/` for complete examples.

use std::fmt;
use std::path::Path;

use distill_core::model::Ensemble;
use distill_core::{DistillError, Group, LocalState, PureState, Spectrum, Subsystem};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Distill,
    Work,
    Erasure,
    Encode,
    PureDistill,
    McValidate,
    Dh,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Distill => "distill",
            Task::Work => "work",
            Task::Erasure => "erasure",
            Task::Encode => "encode",
            Task::PureDistill => "pure-distill",
            Task::McValidate => "mc-validate",
            Task::Dh => "dh",
        }
    }

    /// The sweep variables each task understands.
    fn sweep_variables(&self) -> &'static [&'static str] {
        match self {
            Task::Distill => &["log_gibbs_weight", "x"],
            Task::Work | Task::Erasure | Task::Encode | Task::Dh => &["epsilon"],
            Task::PureDistill | Task::McValidate => &["copies"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    #[default]
    Incoherent,
    Pure,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energies: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gibbs: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub beta: f64,
    pub state: Vec<f64>,
    #[serde(default)]
    pub kind: StateKind,
    pub count: u64,
    #[serde(default)]
    pub incommensurable: bool,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default)]
    pub group: Vec<GroupConfig>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    /// Log Gibbs weight of the sharp target level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_gibbs_weight: Option<f64>,
    /// Place the target so that `Delta F / sigma` equals this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    /// Battery gap paid from the initial state (pure tasks).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default)]
    pub bits: bool,
    /// Work task only: report battery free energies instead of work values.
    #[serde(default)]
    pub quality: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_samples")]
    pub samples: u64,
}

fn default_samples() -> u64 {
    100_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom_budget: Option<usize>,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub target: TargetConfig,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
}

/// A configuration problem tied to a location in the document.
#[derive(Debug, Clone)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let location = e
            .span()
            .map(|span| {
                let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                format!("line {line}")
            })
            .unwrap_or_default();
        ConfigError::new(location, e.message().trim().to_string())
    })?;
    config.check()?;
    Ok(config)
}

fn group_label(idx: usize, g: &GroupConfig) -> String {
    match &g.name {
        Some(name) => format!("ensemble.group[{idx}] ({name:?})"),
        None => format!("ensemble.group[{idx}]"),
    }
}

fn check_distribution(values: &[f64], field: &str) -> Result<(), ConfigError> {
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(ConfigError::new(field, "entries must be finite and non-negative"));
    }
    let total: f64 = values.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(ConfigError::new(field, format!("probabilities sum to {}, expected 1", (total * 1e12).round() / 1e12)));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Invariant checks that need no computation.
    pub fn check(&self) -> Result<(), ConfigError> {
        let groups = &self.ensemble.group;
        if groups.is_empty() {
            return Err(ConfigError::new("ensemble", "no groups; at least one [[ensemble.group]] is required"));
        }
        for (i, g) in groups.iter().enumerate() {
            let field = format!("ensemble.group[{i}]");
            match (&g.energies, &g.gibbs) {
                (Some(_), Some(_)) => {
                    return Err(ConfigError::new(&field, "give either energies or gibbs, not both"));
                }
                (None, None) => return Err(ConfigError::new(&field, "missing energies or gibbs")),
                (Some(e), None) => {
                    if e.iter().any(|v| !v.is_finite()) {
                        return Err(ConfigError::new(format!("{field}.energies"), "entries must be finite"));
                    }
                }
                (None, Some(w)) => {
                    check_distribution(w, &format!("{field}.gibbs"))?;
                    if w.iter().any(|&v| v <= 0.0) {
                        return Err(ConfigError::new(format!("{field}.gibbs"), "weights must be positive"));
                    }
                }
            }
            let dim = g.energies.as_ref().or(g.gibbs.as_ref()).map_or(0, Vec::len);
            if dim == 0 {
                return Err(ConfigError::new(&field, "spectrum is empty"));
            }
            if g.state.len() != dim {
                return Err(ConfigError::new(
                    format!("{field}.state"),
                    format!("has {} entries but the spectrum has {dim} levels", g.state.len()),
                ));
            }
            check_distribution(&g.state, &format!("{field}.state"))?;
            if !(g.beta.is_finite() && g.beta > 0.0) {
                return Err(ConfigError::new(format!("{field}.beta"), "must be positive"));
            }
            if g.count == 0 {
                return Err(ConfigError::new(format!("{field}.count"), "must be at least 1"));
            }
        }
        let first = &groups[0];
        for (i, g) in groups.iter().enumerate().skip(1) {
            if g.beta != first.beta {
                return Err(ConfigError::new(
                    "ensemble",
                    format!(
                        "{} has beta {} but {} has beta {}; all groups must share one bath",
                        group_label(0, first),
                        first.beta,
                        group_label(i, g),
                        g.beta
                    ),
                ));
            }
        }

        let pure_task = matches!(self.task, Task::PureDistill | Task::McValidate);
        if pure_task {
            if groups.len() != 1 {
                return Err(ConfigError::new("ensemble", format!("{} takes exactly one group", self.task.as_str())));
            }
            if first.kind != StateKind::Pure {
                return Err(ConfigError::new("ensemble.group[0].kind", "must be \"pure\" for this task"));
            }
        } else if let Some(i) = groups.iter().position(|g| g.kind == StateKind::Pure) {
            if self.task != Task::Distill {
                return Err(ConfigError::new(
                    format!("ensemble.group[{i}].kind"),
                    format!("pure groups are not supported by {}", self.task.as_str()),
                ));
            }
        }

        let t = &self.target;
        match self.task {
            Task::Distill => {
                if self.sweep.variable == "log_gibbs_weight" && (t.log_gibbs_weight.is_some() || t.x.is_some()) {
                    return Err(ConfigError::new("target", "the sweep already sets the target"));
                }
                if self.sweep.variable == "x" && (t.log_gibbs_weight.is_some() || t.x.is_some()) {
                    return Err(ConfigError::new("target", "the sweep already sets x"));
                }
            }
            Task::PureDistill | Task::McValidate => {
                if t.x.is_some() == t.battery_gap.is_some() {
                    return Err(ConfigError::new("target", "give exactly one of x or battery_gap"));
                }
            }
            _ => {}
        }
        if t.log_gibbs_weight.is_some_and(|w| !(w <= 0.0)) {
            return Err(ConfigError::new("target.log_gibbs_weight", "must be at most 0"));
        }
        if self.output.quality && self.task != Task::Work {
            return Err(ConfigError::new("output.quality", "only meaningful for the work task"));
        }
        if self.mc.is_some() && self.task != Task::McValidate {
            return Err(ConfigError::new("mc", "only meaningful for the mc-validate task"));
        }
        if self.mc.as_ref().is_some_and(|m| m.samples < 1000) {
            return Err(ConfigError::new("mc.samples", "must be at least 1000"));
        }
        if self.atom_budget == Some(0) {
            return Err(ConfigError::new("atom_budget", "must be positive"));
        }

        let allowed = self.task.sweep_variables();
        if !allowed.contains(&self.sweep.variable.as_str()) {
            return Err(ConfigError::new(
                "sweep.variable",
                format!("{:?} is not valid for {}; expected one of {:?}", self.sweep.variable, self.task.as_str(), allowed),
            ));
        }
        let grid = self.grid()?;
        for (i, &v) in grid.iter().enumerate() {
            let bad = match self.sweep.variable.as_str() {
                "epsilon" => match self.task {
                    Task::Encode => !(v > 0.0 && v < 1.0),
                    _ => !(0.0..1.0).contains(&v),
                },
                "copies" => !(v >= 1.0 && v.fract() == 0.0),
                "log_gibbs_weight" => !(v <= 0.0),
                _ => !v.is_finite(),
            };
            if bad {
                return Err(ConfigError::new(format!("sweep.grid[{i}]"), format!("value {v} is out of range")));
            }
        }
        Ok(())
    }

    /// Sweep points in order.
    pub fn grid(&self) -> Result<Vec<f64>, ConfigError> {
        let s = &self.sweep;
        let grid = match (&s.values, s.start, s.stop, s.step) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(start), Some(stop), Some(step)) => {
                if !(step > 0.0 && stop >= start) {
                    return Err(ConfigError::new("sweep", "need step > 0 and stop >= start"));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..n).map(|i| start + i as f64 * step).collect()
            }
            _ => return Err(ConfigError::new("sweep", "give either values, or start, stop and step")),
        };
        if grid.is_empty() {
            return Err(ConfigError::new("sweep", "grid is empty"));
        }
        if grid.iter().any(|v| !v.is_finite()) {
            return Err(ConfigError::new("sweep", "grid values must be finite"));
        }
        Ok(grid)
    }

    pub fn ensemble(&self) -> Result<Ensemble, ConfigError> {
        let mut groups = Vec::with_capacity(self.ensemble.group.len());
        for (i, g) in self.ensemble.group.iter().enumerate() {
            let field = format!("ensemble.group[{i}]");
            let as_config = |e: DistillError| ConfigError::new(&field, e.to_string());
            let spectrum = match (&g.energies, &g.gibbs) {
                (Some(e), _) => Spectrum::new(e.clone(), g.beta),
                (None, Some(w)) => Spectrum::from_gibbs_weights(w, g.beta),
                (None, None) => unreachable!("checked"),
            }
            .map_err(as_config)?
            .with_incommensurable(g.incommensurable);
            let state = match g.kind {
                StateKind::Incoherent => {
                    LocalState::Incoherent(distill_core::IncoherentState::new(g.state.clone()).map_err(as_config)?)
                }
                StateKind::Pure => LocalState::Pure(PureState::new(g.state.clone()).map_err(as_config)?),
            };
            let subsystem = Subsystem::new(spectrum, state).map_err(as_config)?;
            groups.push(Group { subsystem, count: g.count });
        }
        Ensemble::new(groups).map_err(|e| match e {
            DistillError::MixedBeta { first, second, .. } => ConfigError::new(
                "ensemble",
                format!(
                    "{} and {} have different beta",
                    group_label(first, &self.ensemble.group[first]),
                    group_label(second, &self.ensemble.group[second])
                ),
            ),
            other => ConfigError::new("ensemble", other.to_string()),
        })
    }

    pub fn normalized(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}
