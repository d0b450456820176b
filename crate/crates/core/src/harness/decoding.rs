use serde::{Deserialize, Serialize};

use super::HarnessError;

/// Decoding strategy at the API boundary.
///
/// Hosted endpoints expose no true argmax, so greedy is approximated by
/// temperature 0; that approximation is noted in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Greedy,
    TopP,
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().replace('-', "_").as_str() {
            "greedy" => Ok(Self::Greedy),
            "top_p" => Ok(Self::TopP),
            other => Err(format!("unknown strategy {other:?} (expected greedy|top-p)")),
        }
    }
}

/// Sampling parameters for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodingConfig {
    pub strategy: Strategy,
    /// Nucleus mass, only meaningful for top-p.
    pub p: Option<f64>,
    pub temperature: f64,
}

impl DecodingConfig {
    pub fn greedy() -> Self {
        Self {
            strategy: Strategy::Greedy,
            p: None,
            temperature: 0.0,
        }
    }

    pub fn top_p(p: f64, temperature: f64) -> Result<Self, HarnessError> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(HarnessError::InvalidConfig(format!(
                "top-p mass must be in (0, 1], got {p}"
            )));
        }
        if !(temperature > 0.0) {
            return Err(HarnessError::InvalidConfig(format!(
                "top-p temperature must be positive, got {temperature}"
            )));
        }
        Ok(Self {
            strategy: Strategy::TopP,
            p: Some(p),
            temperature,
        })
    }

    /// Temperature actually sent: greedy always maps to 0.
    pub fn effective_temperature(&self) -> f64 {
        match self.strategy {
            Strategy::Greedy => 0.0,
            Strategy::TopP => self.temperature,
        }
    }

    /// Nucleus parameter actually sent: absent for greedy.
    pub fn effective_top_p(&self) -> Option<f64> {
        match self.strategy {
            Strategy::Greedy => None,
            Strategy::TopP => self.p,
        }
    }
}
