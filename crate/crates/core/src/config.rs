//! JSON experiment configuration, validation and sweep expansion.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelSpec, ReadChannel, WomSourceModel};
use crate::codec::FreezeBits;

/// Axes `simulate` can sweep. The partition is fixed per run, so anything
/// that would change it (block length, construction settings) is excluded.
pub const SWEEP_AXES: [&str; 6] = ["beta", "gamma", "p", "p01", "p10", "trials"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}field `{field}`: {message}", line_prefix(*.line))]
    Invalid {
        field: String,
        line: Option<usize>,
        message: String,
    },
}

fn line_prefix(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructionConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_high")]
    pub threshold_high: f64,
    #[serde(default = "default_low")]
    pub threshold_low: f64,
    #[serde(default = "default_construction_seed")]
    pub seed: u64,
}

impl Default for ConstructionConfig {
    fn default() -> Self {
        ConstructionConfig {
            samples: default_samples(),
            threshold_high: default_high(),
            threshold_low: default_low(),
            seed: default_construction_seed(),
        }
    }
}

fn default_samples() -> usize {
    10_000
}
fn default_high() -> f64 {
    0.9
}
fn default_low() -> f64 {
    0.1
}
fn default_construction_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FreezePolicy {
    #[default]
    Zeros,
    Ones,
    /// 0, 1, 0, 1, ... in index order.
    Alternating,
}

impl FreezePolicy {
    pub fn bits(self, len: usize) -> FreezeBits {
        let bits = (0..len)
            .map(|k| match self {
                FreezePolicy::Zeros => 0,
                FreezePolicy::Ones => 1,
                FreezePolicy::Alternating => (k % 2) as u8,
            })
            .collect();
        FreezeBits::new(bits).expect("policy bits are binary")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecConfig {
    #[serde(default)]
    pub freeze: FreezePolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessConfig {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_harness_seed")]
    pub seed: u64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            trials: default_trials(),
            seed: default_harness_seed(),
        }
    }
}

fn default_trials() -> usize {
    100
}
fn default_harness_seed() -> u64 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub beta: f64,
    pub gamma: f64,
    pub channel: ChannelSpec,
    #[serde(rename = "N", alias = "n")]
    pub n: usize,
    #[serde(default)]
    pub construction: ConstructionConfig,
    #[serde(default)]
    pub codec: CodecConfig,
    #[serde(default)]
    pub harness: HarnessConfig,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sweep: BTreeMap<String, Vec<f64>>,
}

/// First line of `text` mentioning `"key"`, 1-based.
fn locate(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

impl ExperimentConfig {
    /// Parses and validates a config document.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        config.validate().map_err(|(field, message)| ConfigError::Invalid {
            line: locate(text, field.rsplit('.').next().unwrap_or(&field)),
            field,
            message,
        })?;
        Ok(config)
    }

    /// Checks every invariant; on failure returns the offending field path.
    pub fn validate(&self) -> Result<(), (String, String)> {
        let bad = |field: &str, message: String| Err((field.to_string(), message));
        if let Err(e) = WomSourceModel::new(self.beta, self.gamma) {
            let field = if self.beta > 0.0 && self.beta < 1.0 { "gamma" } else { "beta" };
            return bad(field, e.to_string());
        }
        if let Err(e) = self.channel.build() {
            return bad("channel", e.to_string());
        }
        if !self.n.is_power_of_two() {
            return bad("N", format!("{} is not a power of two", self.n));
        }
        let c = &self.construction;
        if c.samples == 0 {
            return bad("construction.samples", "must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&c.threshold_high) {
            return bad("construction.threshold_high", format!("{} outside [0, 1]", c.threshold_high));
        }
        if !(0.0..=c.threshold_high).contains(&c.threshold_low) {
            return bad(
                "construction.threshold_low",
                format!("{} outside [0, threshold_high]", c.threshold_low),
            );
        }
        if self.harness.trials == 0 {
            return bad("harness.trials", "must be at least 1".into());
        }
        for (axis, values) in &self.sweep {
            let field = format!("sweep.{axis}");
            if !SWEEP_AXES.contains(&axis.as_str()) {
                return bad(&field, format!("unknown sweep axis; expected one of {SWEEP_AXES:?}"));
            }
            if values.is_empty() {
                return bad(&field, "sweep axis must list at least one value".into());
            }
            let applies = match (axis.as_str(), &self.channel) {
                ("p", ChannelSpec::Bsc { .. }) => true,
                ("p01" | "p10", ChannelSpec::Bac { .. }) => true,
                ("p" | "p01" | "p10", _) => false,
                _ => true,
            };
            if !applies {
                return bad(&field, "axis does not apply to this channel kind".into());
            }
            for &v in values {
                let mut point = self.clone();
                point.sweep.clear();
                point.set_axis(axis, v);
                if let Err((_, message)) = point.validate() {
                    return bad(&field, format!("value {v}: {message}"));
                }
            }
        }
        Ok(())
    }

    fn set_axis(&mut self, axis: &str, value: f64) {
        match (axis, &mut self.channel) {
            ("beta", _) => self.beta = value,
            ("gamma", _) => self.gamma = value,
            ("trials", _) => self.harness.trials = value as usize,
            ("p", ChannelSpec::Bsc { p }) => *p = value,
            ("p01", ChannelSpec::Bac { p01, .. }) => *p01 = value,
            ("p10", ChannelSpec::Bac { p10, .. }) => *p10 = value,
            _ => unreachable!("axis validated before use"),
        }
    }

    /// Cartesian product of the sweep axes (axes in name order, last axis
    /// fastest). Without sweeps this is just the config itself.
    pub fn points(&self) -> Vec<ExperimentConfig> {
        let mut base = self.clone();
        base.sweep.clear();
        let mut points = vec![base];
        for (axis, values) in &self.sweep {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut next = p.clone();
                        next.set_axis(axis, v);
                        next
                    })
                })
                .collect();
        }
        points
    }

    pub fn model(&self) -> WomSourceModel {
        WomSourceModel::new(self.beta, self.gamma).expect("validated config")
    }

    pub fn read_channel(&self) -> ReadChannel {
        self.channel.build().expect("validated config")
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

impl fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelSpec::Identity => write!(f, "identity"),
            ChannelSpec::Bsc { p } => write!(f, "bsc(p={p})"),
            ChannelSpec::Bac { p01, p10 } => write!(f, "bac(p01={p01},p10={p10})"),
            ChannelSpec::Matrix { rows } => write!(f, "matrix({}x{})", rows.len(), rows.first().map_or(0, Vec::len)),
        }
    }
}
