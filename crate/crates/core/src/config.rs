use serde::{Deserialize, Serialize};

use crate::detector::DEFAULT_MAD_CUTOFF;
use crate::error::{Error, Result};
use crate::evaluator::BaselineConfig;
use crate::sessionizer::{DEFAULT_PAGE_THRESHOLD_S, DEFAULT_SESSION_THRESHOLD_S};

/// Tunables of one analysis run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub mad_cutoff: f64,
    pub page_threshold_s: f64,
    pub session_threshold_s: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            mad_cutoff: DEFAULT_MAD_CUTOFF,
            page_threshold_s: DEFAULT_PAGE_THRESHOLD_S,
            session_threshold_s: DEFAULT_SESSION_THRESHOLD_S,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mad_cutoff", self.mad_cutoff),
            ("page_threshold_s", self.page_threshold_s),
            ("session_threshold_s", self.session_threshold_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn baselines(&self) -> BaselineConfig {
        BaselineConfig {
            page_threshold_s: self.page_threshold_s,
            session_threshold_s: self.session_threshold_s,
        }
    }
}
