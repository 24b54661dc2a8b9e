//! Receding-horizon driver: re-solve a look-ahead window at every solve
//! instant, commit its first steps and carry the state forward.

mod run;
mod timeline;

pub use run::{
    compare_modes, frequency_timeline, run_rolling, CommittedPeriod, DailyTotals, FrequencyPoint,
    ModeComparison, RunReport, SolveRecord,
};
pub use timeline::{ForecastModel, ScenarioSolve, ScenarioStep, ScenarioTimeline};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispatch::{BuildOptions, DispatchError};
use crate::qp::SolveOptions;

#[derive(Debug, Error)]
pub enum HorizonError {
    #[error("invalid horizon configuration: {0}")]
    Config(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("solve {solve}: {source}")]
    Solve {
        solve: usize,
        #[source]
        source: DispatchError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonConfig {
    pub step_minutes: f64,
    pub horizon_steps: usize,
    pub resolve_every_steps: usize,
    pub commit_steps: usize,
    pub day_steps: usize,
    /// Training samples per nadir half-plane set.
    pub cha_samples: usize,
    pub build: BuildOptions,
    pub solver: SolveOptions,
    /// Audit tolerance on linear constraints, MW or MWh.
    pub audit_tol: f64,
}

impl Default for HorizonConfig {
    fn default() -> Self {
        Self {
            step_minutes: 15.0,
            horizon_steps: 16,
            resolve_every_steps: 4,
            commit_steps: 4,
            day_steps: 96,
            cha_samples: 50_000,
            build: BuildOptions::default(),
            solver: SolveOptions {
                tol: 1e-8,
                ..SolveOptions::default()
            },
            audit_tol: 1e-6,
        }
    }
}

impl HorizonConfig {
    pub fn validate(&self) -> Result<(), HorizonError> {
        let err = |m: &str| Err(HorizonError::Config(m.into()));
        if !(self.step_minutes.is_finite() && self.step_minutes > 0.0) {
            return err("step_minutes must be > 0");
        }
        if self.commit_steps == 0 {
            return err("commit_steps must be >= 1");
        }
        if !(self.commit_steps <= self.resolve_every_steps && self.resolve_every_steps <= self.horizon_steps) {
            return err("need commit_steps <= resolve_every_steps <= horizon_steps");
        }
        if self.day_steps == 0 || self.day_steps % self.resolve_every_steps != 0 {
            return err("day_steps must be a positive multiple of resolve_every_steps");
        }
        if self.cha_samples < 100 {
            return err("cha_samples must be >= 100");
        }
        Ok(())
    }

    pub fn step_hours(&self) -> f64 {
        self.step_minutes / 60.0
    }

    /// Solve instants needed to cover one day.
    pub fn n_solves(&self) -> usize {
        self.day_steps / self.resolve_every_steps
    }
}
