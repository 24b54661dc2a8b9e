//! Rolling solves, committed schedules and day-level reports.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{HorizonConfig, HorizonError, ScenarioTimeline};
use crate::cha::{build_nadir_halfspaces, ChaError, HalfspaceSet};
use crate::dispatch::{
    frequency_check, solve_window, verify_solution, AuditViolation, CostBreakdown,
    DispatchCase, DispatchError, FrequencyCheck, InitialState, Mode, PeriodSolution, Window,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommittedPeriod {
    /// Step of the day, counted from the first solve.
    pub index: usize,
    pub solve: usize,
    /// 1-based lead of this step within its solve.
    pub lead: usize,
    pub total_load: f64,
    pub w_fore: Vec<f64>,
    pub disturbance_pu: f64,
    pub solution: PeriodSolution,
    pub frequency: FrequencyCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub solve: usize,
    /// Step of the day the window starts at.
    pub start: usize,
    /// Objective including no-load costs.
    pub objective: f64,
    /// Scheduled `Σ_j Rw_j` for every step of the window, MW.
    pub res_reserve: Vec<f64>,
    /// Scheduled `Σ_k Re_k` for every step of the window, MW.
    pub ess_reserve: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DailyTotals {
    pub cost: CostBreakdown,
    pub total_cost: f64,
    /// `Σ Rw / Σ W_fore` over committed periods, percent.
    pub curtailment_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub case_name: String,
    pub scenario_name: String,
    pub seed: u64,
    pub initial: InitialState,
    pub committed: Vec<CommittedPeriod>,
    pub solves: Vec<SolveRecord>,
    pub totals: DailyTotals,
    /// Audit findings on committed periods; `period` is the step of the day.
    pub violations: Vec<AuditViolation>,
    /// Largest ESS loss relaxation gap over all solves.
    pub loss_gap: f64,
}

impl RunReport {
    pub fn nadir_failures(&self) -> usize {
        self.committed.iter().filter(|c| !c.frequency.nadir_ok).count()
    }

    pub fn frequency_failures(&self) -> usize {
        self.committed.iter().filter(|c| !c.frequency.all_ok()).count()
    }

    pub fn linear_violations(&self) -> usize {
        self.violations.iter().filter(|v| !v.family.is_frequency()).count()
    }
}

/// Both modes on the same timeline. Either run may fail on its own.
#[derive(Debug)]
pub struct ModeComparison {
    pub online: Result<RunReport, HorizonError>,
    pub fixed: Result<RunReport, HorizonError>,
}

impl ModeComparison {
    /// `(metric, fixed, online, online − fixed)` rows; `None` when both
    /// runs did not finish.
    pub fn table(&self) -> Option<Vec<(&'static str, f64, f64, f64)>> {
        let (on, fx) = (self.online.as_ref().ok()?, self.fixed.as_ref().ok()?);
        let rows = [
            ("fuel_cost", fx.totals.cost.fuel, on.totals.cost.fuel),
            ("res_reserve_cost", fx.totals.cost.res_reserve, on.totals.cost.res_reserve),
            ("ess_reserve_cost", fx.totals.cost.ess_reserve, on.totals.cost.ess_reserve),
            ("curtailment_pct", fx.totals.curtailment_pct, on.totals.curtailment_pct),
            ("total_cost", fx.totals.total_cost, on.totals.total_cost),
        ];
        Some(rows.into_iter().map(|(n, f, o)| (n, f, o, o - f)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPoint {
    pub index: usize,
    pub h_sys: f64,
    pub d_sys: f64,
    pub disturbance_pu: f64,
    pub rocof_max: f64,
    pub delta_f_ss: f64,
    pub delta_f_max: f64,
    pub rocof_ok: bool,
    pub steady_state_ok: bool,
    pub nadir_ok: bool,
}

/// Half-plane sets keyed by the disturbance's bit pattern.
type ChaCache = BTreeMap<u64, HalfspaceSet>;

fn cha_sets(
    case: &DispatchCase,
    window: &Window,
    cfg: &HorizonConfig,
    seed: u64,
    cache: &mut ChaCache,
) -> Result<Vec<HalfspaceSet>, DispatchError> {
    let mut missing: Vec<(usize, f64)> = Vec::new();
    for (t, p) in window.periods.iter().enumerate() {
        let key = p.disturbance_pu.to_bits();
        if !cache.contains_key(&key) && !missing.iter().any(|m| m.1.to_bits() == key) {
            missing.push((t, p.disturbance_pu));
        }
    }
    let cha_cfg = case.cha_config(cfg.cha_samples, seed);
    let built: Vec<(u64, HalfspaceSet)> = missing
        .par_iter()
        .map(|&(t, dp)| {
            build_nadir_halfspaces(&case.nadir_spec(dp), &cha_cfg)
                .map(|hs| (dp.to_bits(), hs))
                .map_err(|e| match e {
                    ChaError::EmptyRegion => DispatchError::EmptyRegion { period: t, source: e },
                    e => DispatchError::Cha(e),
                })
        })
        .collect::<Result<_, _>>()?;
    cache.extend(built);
    Ok(window
        .periods
        .iter()
        .map(|p| cache[&p.disturbance_pu.to_bits()].clone())
        .collect())
}

pub fn run_rolling(
    case: &DispatchCase,
    timeline: &ScenarioTimeline,
    cfg: &HorizonConfig,
    mode: Mode,
) -> Result<RunReport, HorizonError> {
    cfg.validate()?;
    timeline.validate(case, cfg)?;
    let n_solves = timeline.solves.len();
    let initial = InitialState::from_case(case);
    let mut state = initial.clone();
    let mut cache = ChaCache::new();
    let mut committed = Vec::with_capacity(n_solves * cfg.commit_steps);
    let mut solves = Vec::with_capacity(n_solves);
    let mut violations = Vec::new();
    let mut loss_gap = 0.0_f64;

    for (s, solve) in timeline.solves.iter().enumerate() {
        let fail = |source| HorizonError::Solve { solve: s, source };
        let start = s * cfg.resolve_every_steps;
        let window = Window {
            step_hours: cfg.step_hours(),
            periods: solve.steps[..cfg.horizon_steps].iter().map(|st| st.to_period(case)).collect(),
            initial: state.clone(),
        };
        let cha = if cfg.build.frequency_rows(mode) {
            cha_sets(case, &window, cfg, timeline.seed, &mut cache).map_err(fail)?
        } else {
            Vec::new()
        };
        let sol = solve_window(case, &window, mode, &cha, &cfg.build, &cfg.solver).map_err(fail)?;
        let audit = verify_solution(&sol, case, &window, cfg.audit_tol).map_err(fail)?;
        loss_gap = loss_gap.max(audit.loss_gap);
        violations.extend(
            audit
                .violations
                .into_iter()
                .filter(|v| v.period < cfg.commit_steps)
                .map(|v| AuditViolation {
                    period: start + v.period,
                    ..v
                }),
        );

        solves.push(SolveRecord {
            solve: s,
            start,
            objective: sol.solver_objective.unwrap_or(sol.cost.total()),
            res_reserve: sol.periods.iter().map(|p| p.rw.iter().sum()).collect(),
            ess_reserve: sol.periods.iter().map(|p| p.re.iter().sum()).collect(),
        });
        for (t, ps) in sol.periods.iter().take(cfg.commit_steps).enumerate() {
            let input = &window.periods[t];
            committed.push(CommittedPeriod {
                index: start + t,
                solve: s,
                lead: t + 1,
                total_load: input.total_load(),
                w_fore: input.w_fore.clone(),
                disturbance_pu: input.disturbance_pu,
                frequency: frequency_check(case, ps.h_sys, ps.d_sys, input.disturbance_pu),
                solution: ps.clone(),
            });
        }
        let last = &sol.periods[cfg.commit_steps - 1];
        state = InitialState {
            p_gen: last.p.clone(),
            soc: last.e.clone(),
        };
    }

    let mut cost = CostBreakdown::default();
    let (mut rw, mut wf) = (0.0, 0.0);
    for c in &committed {
        cost.add(&c.solution.cost);
        rw += c.solution.rw.iter().sum::<f64>();
        wf += c.w_fore.iter().sum::<f64>();
    }
    Ok(RunReport {
        mode,
        case_name: case.name.clone(),
        scenario_name: timeline.name.clone(),
        seed: timeline.seed,
        initial,
        committed,
        solves,
        totals: DailyTotals {
            cost,
            total_cost: cost.total(),
            curtailment_pct: if wf > 0.0 { 100.0 * rw / wf } else { 0.0 },
        },
        violations,
        loss_gap,
    })
}

pub fn compare_modes(case: &DispatchCase, timeline: &ScenarioTimeline, cfg: &HorizonConfig) -> ModeComparison {
    let (online, fixed) = rayon::join(
        || run_rolling(case, timeline, cfg, Mode::Online),
        || run_rolling(case, timeline, cfg, Mode::Fixed),
    );
    ModeComparison { online, fixed }
}

pub fn frequency_timeline(report: &RunReport, case: &DispatchCase) -> Vec<FrequencyPoint> {
    report
        .committed
        .iter()
        .map(|c| {
            let s = &c.solution;
            let chk = frequency_check(case, s.h_sys, s.d_sys, c.disturbance_pu);
            FrequencyPoint {
                index: c.index,
                h_sys: s.h_sys,
                d_sys: s.d_sys,
                disturbance_pu: c.disturbance_pu,
                rocof_max: chk.metrics.rocof_max,
                delta_f_ss: chk.metrics.delta_f_ss,
                delta_f_max: chk.metrics.delta_f_max,
                rocof_ok: chk.rocof_ok,
                steady_state_ok: chk.steady_state_ok,
                nadir_ok: chk.nadir_ok,
            }
        })
        .collect()
}
