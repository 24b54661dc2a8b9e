//! Per-solve forecast data.

use serde::{Deserialize, Serialize};

use super::{HorizonConfig, HorizonError};
use crate::dispatch::{DispatchCase, PeriodInput};
use crate::uncertainty::Gmm;

/// One look-ahead step as seen from a solve instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioStep {
    /// One value per case load, MW.
    pub loads: Vec<f64>,
    /// Forecast mean per RES unit, MW.
    pub w_fore: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gmm: Option<Gmm>,
    /// Overrides the case's disturbance rule, per-unit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance_pu: Option<f64>,
}

impl ScenarioStep {
    pub fn to_period(&self, case: &DispatchCase) -> PeriodInput {
        let total: f64 = self.loads.iter().sum();
        PeriodInput {
            loads: self.loads.clone(),
            w_fore: self.w_fore.clone(),
            gmm: self.gmm.clone(),
            disturbance_pu: self.disturbance_pu.unwrap_or_else(|| case.disturbance_pu(total)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSolve {
    /// Steps in lead order; `steps[0]` is one step ahead.
    pub steps: Vec<ScenarioStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTimeline {
    pub name: String,
    /// Seed for every random choice made while running the timeline.
    pub seed: u64,
    pub solves: Vec<ScenarioSolve>,
}

/// Forecast-error model: a two-component mixture per step whose spread
/// grows linearly with lead time, `σ(τ) = σ_base·(1 + γ·τ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastModel {
    /// Base standard deviation per RES as a fraction of capacity.
    pub sigma_base: Vec<f64>,
    /// Growth per lead step.
    pub gamma: f64,
    /// Correlation between every pair of RES units.
    pub correlation: f64,
    pub weights: Vec<f64>,
    /// Component mean offsets in units of σ; weighted sum should be zero.
    pub offsets: Vec<f64>,
    /// Component standard deviations in units of σ.
    pub scales: Vec<f64>,
}

impl ForecastModel {
    pub fn sigma(&self, case: &DispatchCase, lead: usize) -> Vec<f64> {
        case.res
            .iter()
            .zip(&self.sigma_base)
            .map(|(r, s)| s * r.cap * (1.0 + self.gamma * lead as f64))
            .collect()
    }
}

impl ScenarioTimeline {
    /// Builds a timeline from day profiles. Windows running past the last
    /// profile step wrap to its start.
    pub fn generate(
        name: impl Into<String>,
        case: &DispatchCase,
        cfg: &HorizonConfig,
        loads: &[Vec<f64>],
        wind: &[Vec<f64>],
        model: &ForecastModel,
        seed: u64,
    ) -> Result<Self, HorizonError> {
        cfg.validate()?;
        if loads.len() != cfg.day_steps || wind.len() != cfg.day_steps {
            return Err(HorizonError::Scenario(format!(
                "profiles must have {} steps (loads {}, wind {})",
                cfg.day_steps,
                loads.len(),
                wind.len()
            )));
        }
        if model.sigma_base.len() != case.res.len() {
            return Err(HorizonError::Scenario("sigma_base needs one value per RES".into()));
        }
        let mut solves = Vec::with_capacity(cfg.n_solves());
        for s in 0..cfg.n_solves() {
            let start = s * cfg.resolve_every_steps;
            let steps = (0..cfg.horizon_steps)
                .map(|tau| {
                    let idx = (start + tau) % cfg.day_steps;
                    let w_fore = wind[idx].clone();
                    let gmm = if case.res.is_empty() {
                        None
                    } else {
                        let sigma = model.sigma(case, tau + 1);
                        Some(
                            Gmm::from_means(
                                &w_fore,
                                &sigma,
                                model.correlation,
                                &model.weights,
                                &model.offsets,
                                &model.scales,
                            )
                            .map_err(|e| HorizonError::Scenario(e.to_string()))?,
                        )
                    };
                    Ok(ScenarioStep {
                        loads: loads[idx].clone(),
                        w_fore,
                        gmm,
                        disturbance_pu: None,
                    })
                })
                .collect::<Result<Vec<_>, HorizonError>>()?;
            solves.push(ScenarioSolve { steps });
        }
        Ok(Self {
            name: name.into(),
            seed,
            solves,
        })
    }

    /// Shape checks against the case and configuration.
    pub fn validate(&self, case: &DispatchCase, cfg: &HorizonConfig) -> Result<(), HorizonError> {
        let err = |m: String| Err(HorizonError::Scenario(m));
        if self.solves.is_empty() {
            return err("timeline has no solves".into());
        }
        for (s, solve) in self.solves.iter().enumerate() {
            if solve.steps.len() < cfg.horizon_steps {
                return err(format!(
                    "solves[{s}] has {} steps, horizon needs {}",
                    solve.steps.len(),
                    cfg.horizon_steps
                ));
            }
            let mut prev_var = vec![0.0; case.res.len()];
            for (tau, step) in solve.steps.iter().enumerate() {
                let at = format!("solves[{s}].steps[{tau}]");
                if step.loads.len() != case.loads.len() || step.w_fore.len() != case.res.len() {
                    return err(format!("{at}: expected {} loads and {} forecasts", case.loads.len(), case.res.len()));
                }
                if step.loads.iter().chain(&step.w_fore).any(|v| !v.is_finite()) {
                    return err(format!("{at}: non-finite value"));
                }
                if let Some(dp) = step.disturbance_pu {
                    if !(dp.is_finite() && dp > 0.0) {
                        return err(format!("{at}: disturbance_pu must be > 0"));
                    }
                }
                match &step.gmm {
                    None if !case.res.is_empty() => return err(format!("{at}: gmm required")),
                    None => {}
                    Some(g) => {
                        if g.dim() != case.res.len() {
                            return err(format!("{at}: gmm dimension {} != {}", g.dim(), case.res.len()));
                        }
                        let var = marginal_variances(g);
                        for (j, (&v, p)) in var.iter().zip(&prev_var).enumerate() {
                            if v < p * (1.0 - 1e-9) {
                                return err(format!(
                                    "{at}: forecast variance of RES {j} decreases with lead time"
                                ));
                            }
                        }
                        prev_var = var;
                    }
                }
            }
        }
        Ok(())
    }
}

fn marginal_variances(g: &Gmm) -> Vec<f64> {
    let mean = g.mean();
    (0..g.dim())
        .map(|j| {
            g.components()
                .iter()
                .map(|c| c.weight * (c.covariance[j][j] + (c.mean[j] - mean[j]).powi(2)))
                .sum()
        })
        .collect()
}
