//! Experiment configuration: JSON schema, loading and validation.

use std::path::{Path, PathBuf};

use congestion_bandit::game::GameSpec;
use congestion_bandit::learner::{Overrides, Schedule, Variant};
use serde::{Deserialize, Serialize};

use crate::adversary::Script;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GameSource {
    /// Path to a game JSON file, relative to the config file.
    File(PathBuf),
    Inline(Box<GameSpec>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    SelfPlay,
    Adversary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub variant: Variant,
    #[serde(default)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryConfig {
    /// Upper end of the cost range.
    pub c_max: f64,
    pub script: Script,
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_stride() -> u64 {
    100
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_epsilon() -> f64 {
    0.25
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSource,
    pub schedule: ScheduleConfig,
    pub horizon: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Rounds between Nash-gap and potential evaluations.
    #[serde(default = "default_stride")]
    pub stride: u64,
    /// Regret after every round instead of at log-spaced checkpoints.
    #[serde(default)]
    pub exact_regret: bool,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub adversary: Option<AdversaryConfig>,
    /// Gap threshold of the summary's "fraction of rounds with gap <= epsilon".
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_true")]
    pub progress: bool,
}

/// A config with its game resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub game: GameSpec,
}

/// Parses and validates a config. File game references are resolved
/// against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<Resolved> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig =
        serde_path_to_error::deserialize(de).map_err(|e| HarnessError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    let game = match &config.game {
        GameSource::Inline(g) => (**g).clone(),
        GameSource::File(p) => {
            let path = base.join(p);
            let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::Io {
                path: path.clone(),
                source: e,
            })?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(de).map_err(|e| HarnessError::Schema {
                path: format!("game({}).{}", path.display(), e.path()),
                message: e.inner().to_string(),
            })?
        }
    };
    let resolved = Resolved { config, game };
    validate(&resolved)?;
    Ok(resolved)
}

pub fn load_config(path: &Path) -> Result<Resolved> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}

fn schema(path: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn validate(r: &Resolved) -> Result<()> {
    let c = &r.config;
    if c.horizon < 1 {
        return Err(schema("horizon", "must be at least 1"));
    }
    if c.seeds.is_empty() {
        return Err(schema("seeds", "at least one seed is required"));
    }
    if c.stride < 1 {
        return Err(schema("stride", "must be at least 1"));
    }
    if !(c.epsilon.is_finite() && c.epsilon >= 0.0) {
        return Err(schema("epsilon", "must be a nonnegative number"));
    }
    let mut sorted = c.seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != c.seeds.len() {
        return Err(schema("seeds", "seeds must be distinct"));
    }
    let n = r.game.agent_count();
    match c.mode {
        Mode::SelfPlay => {
            if c.adversary.is_some() {
                return Err(schema("adversary", "only allowed in adversary mode"));
            }
            if n == 0 {
                return Err(schema("game", "the game has no agents"));
            }
            r.game.build().map_err(|e| game_error(&e.to_string()))?;
        }
        Mode::Adversary => {
            let Some(adv) = &c.adversary else {
                return Err(schema("adversary", "required in adversary mode"));
            };
            if n != 1 {
                return Err(schema("game", format!("adversary mode needs exactly one agent, found {n}")));
            }
            if !(adv.c_max.is_finite() && adv.c_max > 0.0) {
                return Err(schema("adversary.c_max", "must be positive"));
            }
            let spaces = r.game.spaces().map_err(|e| game_error(&e.to_string()))?;
            adv.script
                .validate(spaces[0].dim(), adv.c_max)
                .map_err(|m| schema("adversary", m))?;
        }
    }
    Schedule::new(c.schedule.variant, 1, 1, 1.0, 1.0)
        .with_overrides(c.schedule.overrides)
        .validate()
        .map_err(|e| schema("schedule.overrides", e.to_string()))?;
    Ok(())
}

/// Turns core validation messages such as `costs[3]: ...` into schema
/// errors rooted at `game`.
fn game_error(message: &str) -> HarnessError {
    let message = message.strip_prefix("invalid input: ").unwrap_or(message);
    match message.split_once(": ") {
        Some((field, rest)) if !field.contains(' ') => schema(&format!("game.{field}"), rest),
        _ => schema("game", message),
    }
}
