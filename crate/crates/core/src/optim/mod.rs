//! Adam, the sample-many/keep-top-k initialization, and the
//! over-parameterized single-image optimization loop.

mod adam;
mod init;
mod single;

pub use adam::{AdamSettings, AdamState};
pub use init::{init_search, sample_candidate, Candidate, ClassTable, InitSettings, YMode};
pub use single::{optimize_ensemble, optimize_naive, optimize_single, SingleRun};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The `opt.*` configuration block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimSettings {
    pub lr: f64,
    pub iters: usize,
    pub weight_decay: f64,
}

impl Default for OptimSettings {
    fn default() -> Self {
        Self {
            lr: 5e-3,
            iters: 1000,
            weight_decay: 0.0,
        }
    }
}

impl OptimSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("opt.lr must be positive, got {}", self.lr)));
        }
        if self.iters == 0 {
            return Err(Error::Config("opt.iters must be >= 1".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("opt.weight_decay must be >= 0".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamSettings {
        AdamSettings {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamSettings::default()
        }
    }
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
