//! Frequency-constrained look-ahead dispatch as one convex QP per window.
//!
//! A window is a run of consecutive periods sharing ramp and state-of-charge
//! chains. Each period carries its own loads, RES forecast distribution and
//! disturbance size; the nadir constraint enters as half-planes in the
//! (H_sys, D_sys) plane built by [`crate::cha`].

mod build;
mod case;
mod quantiles;
mod sharing;
mod solution;
mod verify;

pub use build::{build_qp, BuiltQp, PeriodVars, VarIndex};
pub use case::{
    CostConstants, DispatchCase, DisturbanceRule, EssUnit, Generator, Line, Load, Network,
    Probabilities, ResUnit, ThermalAggregate,
};
pub use quantiles::{reformulate_quantiles, QuantileTable};
pub use sharing::{sharing_diagnostics, IncrementalRates, SharingReport};
pub use solution::{decode_solution, CostBreakdown, DispatchSolution, PeriodSolution};
pub use verify::{frequency_check, verify_solution, AuditFamily, AuditReport, AuditViolation, FrequencyCheck};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cha::{build_nadir_halfspaces, ChaError, HalfspaceSet};
use crate::qp::{solve_qp, QpError, QpStatus, SolveOptions, Violation};
use crate::uncertainty::{Gmm, UncertaintyError};

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("invalid {field}: {msg}")]
    Validation { field: String, msg: String },
    #[error("period {period}: {msg}")]
    Structural { period: usize, msg: String },
    #[error("period {period}: nadir-feasible region is empty ({source})")]
    EmptyRegion { period: usize, source: ChaError },
    #[error(transparent)]
    Cha(#[from] ChaError),
    #[error(transparent)]
    Quantile(#[from] UncertaintyError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("solver returned {status:?}{}", format_diagnostics(.diagnostics))]
    Solve {
        status: QpStatus,
        diagnostics: Vec<Violation>,
    },
}

fn format_diagnostics(d: &[Violation]) -> String {
    if d.is_empty() {
        return String::new();
    }
    let parts: Vec<String> = d.iter().map(|v| format!("{} ({:.6})", v.name, v.amount)).collect();
    format!("; most violated: {}", parts.join(", "))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Virtual inertia and droop are decision variables.
    Online,
    /// Virtual inertia and droop are pinned to each unit's fixed values.
    Fixed,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Online => "online",
            Mode::Fixed => "fixed",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "online" => Ok(Mode::Online),
            "fixed" => Ok(Mode::Fixed),
            _ => Err(format!("unknown mode '{s}' (expected online or fixed)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Keep the RoCoF, steady-state and nadir rows in fixed mode.
    pub enforce_frequency_in_fixed: bool,
    /// Relative tightening of the frequency rows, absorbing solver tolerance.
    pub frequency_margin: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            enforce_frequency_in_fixed: false,
            frequency_margin: 1e-7,
        }
    }
}

impl BuildOptions {
    pub fn frequency_rows(&self, mode: Mode) -> bool {
        mode == Mode::Online || self.enforce_frequency_in_fixed
    }
}

/// Data of one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodInput {
    /// One value per case load, MW.
    pub loads: Vec<f64>,
    /// Forecast mean per RES unit, MW.
    pub w_fore: Vec<f64>,
    /// Joint distribution of the RES outputs; `None` only without RES.
    pub gmm: Option<Gmm>,
    /// Disturbance, per-unit on the system base.
    pub disturbance_pu: f64,
}

impl PeriodInput {
    pub fn total_load(&self) -> f64 {
        self.loads.iter().sum()
    }
}

/// State carried into the first period of a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    /// Generator output before the window, MW.
    pub p_gen: Vec<f64>,
    /// ESS energy before the window, MWh.
    pub soc: Vec<f64>,
}

impl InitialState {
    /// Generators at the middle of their usable range, ESS at `e_init`.
    pub fn from_case(case: &DispatchCase) -> Self {
        let f0 = case.limits.f0;
        let fss = case.limits.max_steady_state;
        Self {
            p_gen: case
                .generators
                .iter()
                .map(|g| {
                    let top = (g.p_max - g.inv_droop * g.p_max * fss / f0).max(g.p_min);
                    0.5 * (g.p_min + top)
                })
                .collect(),
            soc: case.ess.iter().map(|e| e.e_init).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    /// Period length, h.
    pub step_hours: f64,
    pub periods: Vec<PeriodInput>,
    pub initial: InitialState,
}

impl Window {
    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    /// Shape and range checks against the case.
    pub fn validate(&self, case: &DispatchCase) -> Result<(), DispatchError> {
        let bad = |field: String, msg: String| Err(DispatchError::Validation { field, msg });
        if !(self.step_hours.is_finite() && self.step_hours > 0.0) {
            return bad("step_hours".into(), "must be > 0".into());
        }
        if self.periods.is_empty() {
            return bad("periods".into(), "window has no periods".into());
        }
        if self.initial.p_gen.len() != case.generators.len() {
            return bad("initial.p_gen".into(), "one value per generator expected".into());
        }
        if self.initial.soc.len() != case.ess.len() {
            return bad("initial.soc".into(), "one value per ESS expected".into());
        }
        if self.initial.p_gen.iter().chain(&self.initial.soc).any(|v| !v.is_finite()) {
            return bad("initial".into(), "values must be finite".into());
        }
        for (t, p) in self.periods.iter().enumerate() {
            let f = |x: &str| format!("periods[{t}].{x}");
            if p.loads.len() != case.loads.len() {
                return bad(f("loads"), format!("expected {} values", case.loads.len()));
            }
            if p.loads.iter().any(|v| !v.is_finite()) {
                return bad(f("loads"), "values must be finite".into());
            }
            if p.w_fore.len() != case.res.len() {
                return bad(f("w_fore"), format!("expected {} values", case.res.len()));
            }
            for (j, (&w, r)) in p.w_fore.iter().zip(&case.res).enumerate() {
                if !(w.is_finite() && w >= 0.0 && w <= r.cap * (1.0 + 1e-9)) {
                    return bad(format!("periods[{t}].w_fore[{j}]"), format!("{w} is outside [0, cap]"));
                }
            }
            if !(p.disturbance_pu.is_finite() && p.disturbance_pu > 0.0) {
                return bad(f("disturbance_pu"), "must be > 0".into());
            }
            match (&p.gmm, case.res.is_empty()) {
                (None, true) => {}
                (None, false) => return bad(f("gmm"), "required when the case has RES".into()),
                (Some(g), _) => {
                    if g.dim() != case.res.len() {
                        return bad(f("gmm"), format!("dimension {} != {} RES", g.dim(), case.res.len()));
                    }
                    for (j, (m, w)) in g.mean().iter().zip(&p.w_fore).enumerate() {
                        if (m - w).abs() > 1e-6 * (1.0 + case.res[j].cap) {
                            return bad(
                                format!("periods[{t}].w_fore[{j}]"),
                                format!("{w} differs from the distribution mean {m}"),
                            );
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Half-planes for every period of a window; empty in fixed mode when the
/// frequency rows are dropped.
pub fn cha_for_window(
    case: &DispatchCase,
    window: &Window,
    mode: Mode,
    opts: &BuildOptions,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<HalfspaceSet>, DispatchError> {
    if !opts.frequency_rows(mode) {
        return Ok(Vec::new());
    }
    let cfg = case.cha_config(n_samples, seed);
    window
        .periods
        .iter()
        .enumerate()
        .map(|(t, p)| {
            build_nadir_halfspaces(&case.nadir_spec(p.disturbance_pu), &cfg).map_err(|e| match e {
                ChaError::EmptyRegion => DispatchError::EmptyRegion { period: t, source: e },
                e => DispatchError::Cha(e),
            })
        })
        .collect()
}

/// Build, solve and decode one window.
pub fn solve_window(
    case: &DispatchCase,
    window: &Window,
    mode: Mode,
    cha: &[HalfspaceSet],
    opts: &BuildOptions,
    solve: &SolveOptions,
) -> Result<DispatchSolution, DispatchError> {
    let built = build_qp(case, window, mode, cha, opts)?;
    let res = solve_qp(&built.problem, solve)?;
    if res.status != QpStatus::Optimal {
        return Err(DispatchError::Solve {
            status: res.status,
            diagnostics: res.diagnostics,
        });
    }
    let mut sol = decode_solution(&res.x, &built.index, case, window, mode);
    sol.solver_objective = Some(res.objective + built.constant);
    sol.balance_price = built
        .balance_rows
        .iter()
        .map(|&r| -res.y_eq[r])
        .collect();
    Ok(sol)
}
