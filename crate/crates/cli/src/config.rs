//! Experiment configuration: one JSON document describing the channel (or
//! rate-adaptation combos), the schemes to run, the rate grid and the trial
//! plan.

use serde::{Deserialize, Serialize};
use xorcast::channel::{ChannelSpec, RaCombo};
use xorcast::config::{ChannelConfig, ComboConfig};
use xorcast::sim::{ArrivalKind, SchemeId};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ThetaGrid {
    Explicit(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl ThetaGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            ThetaGrid::Explicit(v) => v.clone(),
            ThetaGrid::Range { start, stop, step } => {
                let mut out = Vec::new();
                let mut x = *start;
                while x <= stop + 1e-12 {
                    out.push(x);
                    x += step;
                }
                out
            }
        }
    }
}

fn default_direction() -> [f64; 2] {
    [1.0, 1.0]
}

fn default_trials() -> u32 {
    1
}

fn default_horizon() -> u64 {
    100_000
}

fn default_pruning() -> u64 {
    1
}

fn default_stride() -> u64 {
    100
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
#[derive(Default)]
pub enum ArrivalKindConfig {
    #[default]
    Bernoulli,
    BatchUniform,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub combos: Vec<ComboConfig>,
    pub schemes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<ThetaGrid>,
    /// Rates are `theta * direction`.
    #[serde(default = "default_direction")]
    pub direction: [f64; 2],
    /// Extra directions for capacity queries.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub directions: Vec<[f64; 2]>,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_pruning")]
    pub pruning_period: u64,
    #[serde(default = "default_stride")]
    pub sampling_stride: u64,
    #[serde(default)]
    pub arrival_kind: ArrivalKindConfig,
    /// Append per-queue length columns to the sweep CSV.
    #[serde(default)]
    pub per_queue_columns: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Debug)]
pub struct BuiltConfig {
    pub channel: Option<ChannelSpec>,
    pub combos: Vec<RaCombo>,
    pub raw: ExperimentConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig, String> {
        // serde_json reports line/column positions for malformed fields
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    pub fn build(self) -> Result<BuiltConfig, String> {
        if self.schemes.is_empty() {
            return Err("field `schemes`: at least one scheme required".into());
        }
        if self.trials == 0 {
            return Err("field `trials`: must be at least 1".into());
        }
        if let Some(grid) = &self.theta_grid {
            let values = grid.values();
            if values.is_empty() {
                return Err("field `theta_grid`: empty grid".into());
            }
            if values.windows(2).any(|w| w[1] <= w[0]) {
                return Err("field `theta_grid`: must be strictly increasing".into());
            }
            if values.iter().any(|v| *v < 0.0) {
                return Err("field `theta_grid`: negative rate scale".into());
            }
        }
        if self.direction[0] < 0.0 || self.direction[1] < 0.0 || self.direction == [0.0, 0.0] {
            return Err("field `direction`: must be nonnegative and nonzero".into());
        }
        let channel = match &self.channel {
            Some(c) => Some(c.build().map_err(|e| format!("field `channel`: {e}"))?),
            None => None,
        };
        let combos = self
            .combos
            .iter()
            .enumerate()
            .map(|(i, c)| c.build().map_err(|e| format!("field `combos[{i}]`: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        if channel.is_none() && combos.is_empty() {
            return Err("config needs a `channel` section or a `combos` list".into());
        }
        Ok(BuiltConfig {
            channel,
            combos,
            raw: self,
        })
    }
}

impl BuiltConfig {
    pub fn arrival_kind(&self) -> ArrivalKind {
        match self.raw.arrival_kind {
            ArrivalKindConfig::Bernoulli => ArrivalKind::Bernoulli,
            ArrivalKindConfig::BatchUniform => ArrivalKind::BatchUniform,
        }
    }

    /// Schemes that the sweep engine can run.
    pub fn runnable_schemes(&self) -> Result<Vec<SchemeId>, String> {
        self.raw
            .schemes
            .iter()
            .map(|s| {
                SchemeId::parse(s).ok_or_else(|| format!("field `schemes`: unknown scheme `{s}`"))
            })
            .collect()
    }
}
