use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Precision;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    /// Trees per encoding batch. Attention always runs on the full graph.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub max_epochs: usize,
    /// Epochs without a validation-accuracy improvement before stopping.
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_dim: 128,
            batch_size: 128,
            learning_rate: 0.001,
            dropout: 0.3,
            max_epochs: 200,
            patience: 20,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            precision: Precision::F32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(format!("train config: {msg}")));
        if self.hidden_dim == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return bad("hidden_dim, batch_size and max_epochs must be positive".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be non-negative", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} must lie in [0, 1)", self.dropout));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive".into());
        }
        Ok(())
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are ignored;
    /// unspecified keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = TrainConfig::default();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Format(format!("config line {}: {what}", line_no + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| v.parse::<f64>().map_err(|_| bad(&format!("`{v}` is not a number")));
            let int = |v: &str| v.parse::<u64>().map_err(|_| bad(&format!("`{v}` is not an integer")));
            match key {
                "hidden_dim" => config.hidden_dim = int(value)? as usize,
                "batch_size" => config.batch_size = int(value)? as usize,
                "learning_rate" => config.learning_rate = num(value)?,
                "dropout" => config.dropout = num(value)?,
                "max_epochs" => config.max_epochs = int(value)? as usize,
                "patience" => config.patience = int(value)? as usize,
                "beta1" => config.beta1 = num(value)?,
                "beta2" => config.beta2 = num(value)?,
                "epsilon" => config.epsilon = num(value)?,
                "seed" => config.seed = int(value)?,
                "precision" => config.precision = value.parse().map_err(|e: String| bad(&e))?,
                other => return Err(bad(&format!("unknown key `{other}`"))),
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "hidden_dim = {}", self.hidden_dim).unwrap();
        writeln!(out, "batch_size = {}", self.batch_size).unwrap();
        writeln!(out, "learning_rate = {}", self.learning_rate).unwrap();
        writeln!(out, "dropout = {}", self.dropout).unwrap();
        writeln!(out, "max_epochs = {}", self.max_epochs).unwrap();
        writeln!(out, "patience = {}", self.patience).unwrap();
        writeln!(out, "beta1 = {}", self.beta1).unwrap();
        writeln!(out, "beta2 = {}", self.beta2).unwrap();
        writeln!(out, "epsilon = {}", self.epsilon).unwrap();
        writeln!(out, "seed = {}", self.seed).unwrap();
        writeln!(out, "precision = {}", self.precision).unwrap();
        out
    }
}
