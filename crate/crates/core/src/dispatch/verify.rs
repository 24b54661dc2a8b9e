//! Independent audit of a schedule against raw case data.
//!
//! Every constraint family is re-evaluated from unit values. The frequency
//! checks use the exact nadir at each period's aggregated inertia and
//! damping, not the half-plane surrogate.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::build::{gen_reserve_floor, reserve_factors};
use super::quantiles::{affine_ptdf, reformulate_quantiles};
use super::{DispatchCase, DispatchError, DispatchSolution, Window};
use crate::sfr::{metrics, FrequencyMetrics};

/// Slack on the frequency limits, Hz and Hz/s.
const FREQ_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditFamily {
    Balance,
    GenLimits,
    Ramp,
    ResSplit,
    EssEnergy,
    EssPower,
    EssLoss,
    ParameterBox,
    GenReserve,
    EssReserve,
    ResReserve,
    AffineUp,
    AffineDown,
    LineUp,
    LineDown,
    Rocof,
    SteadyState,
    Nadir,
}

impl AuditFamily {
    pub fn is_frequency(self) -> bool {
        matches!(self, AuditFamily::Rocof | AuditFamily::SteadyState | AuditFamily::Nadir)
    }
}

impl fmt::Display for AuditFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        let name = s.as_ref().and_then(|v| v.as_str()).unwrap_or("unknown");
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditViolation {
    pub period: usize,
    pub family: AuditFamily,
    /// Unit, line or row the violation belongs to.
    pub item: String,
    /// Amount beyond the limit, in the constraint's own units.
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub violations: Vec<AuditViolation>,
    /// Exact frequency metrics per period.
    pub frequency: Vec<FrequencyMetrics>,
    /// Largest `Loss − max(LossD, LossC)` over all ESS and periods.
    pub loss_gap: f64,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, family: AuditFamily) -> usize {
        self.violations.iter().filter(|v| v.family == family).count()
    }

    /// Violations outside the frequency families.
    pub fn linear_violations(&self) -> impl Iterator<Item = &AuditViolation> {
        self.violations.iter().filter(|v| !v.family.is_frequency())
    }

    /// Periods with at least one frequency violation.
    pub fn frequency_failures(&self) -> Vec<usize> {
        let mut p: Vec<usize> = self
            .violations
            .iter()
            .filter(|v| v.family.is_frequency())
            .map(|v| v.period)
            .collect();
        p.dedup();
        p
    }
}

struct Auditor {
    tol: f64,
    out: Vec<AuditViolation>,
}

impl Auditor {
    /// Records `lhs ≤ rhs` failures beyond the tolerance.
    fn le(&mut self, period: usize, family: AuditFamily, item: impl fmt::Display, lhs: f64, rhs: f64) {
        let excess = lhs - rhs;
        if !(excess <= self.tol) {
            self.out.push(AuditViolation {
                period,
                family,
                item: item.to_string(),
                amount: if excess.is_nan() { f64::INFINITY } else { excess },
            });
        }
    }

    fn eq(&mut self, period: usize, family: AuditFamily, item: impl fmt::Display, lhs: f64, rhs: f64) {
        let d = (lhs - rhs).abs();
        if !(d <= self.tol) {
            self.out.push(AuditViolation {
                period,
                family,
                item: item.to_string(),
                amount: if d.is_nan() { f64::INFINITY } else { d },
            });
        }
    }
}

pub fn verify_solution(
    sol: &DispatchSolution,
    case: &DispatchCase,
    window: &Window,
    tol: f64,
) -> Result<AuditReport, DispatchError> {
    use AuditFamily::*;
    if sol.periods.len() != window.len() {
        return Err(DispatchError::Validation {
            field: "solution".into(),
            msg: format!("{} periods against a {}-period window", sol.periods.len(), window.len()),
        });
    }
    let mut a = Auditor { tol, out: Vec::new() };
    let (k_droop, k_inertia) = reserve_factors(case);
    let lim = &case.limits;
    let dt = window.step_hours;
    let mut frequency = Vec::with_capacity(window.len());
    let mut loss_gap = 0.0_f64;

    for (t, (s, input)) in sol.periods.iter().zip(&window.periods).enumerate() {
        let q = reformulate_quantiles(case, input.gmm.as_ref())?;
        let supply: f64 = s.p.iter().chain(&s.w_sche).chain(&s.p_ess).sum();
        a.eq(t, Balance, "system", supply, input.total_load());

        let w_sum: f64 = s.rw.iter().chain(&s.w_sche).sum();
        for (i, g) in case.generators.iter().enumerate() {
            let (p, rg) = (s.p[i], s.rg[i]);
            a.le(t, GenLimits, &g.name, p + rg, g.p_max);
            a.le(t, GenLimits, &g.name, g.p_min, p);
            let prev = if t == 0 { window.initial.p_gen[i] } else { sol.periods[t - 1].p[i] };
            a.le(t, Ramp, &g.name, p - prev, g.ramp_up);
            a.le(t, Ramp, &g.name, prev - p, g.ramp_down);
            a.le(t, GenReserve, &g.name, gen_reserve_floor(case, i), rg);
            if g.beta > 0.0 && !case.res.is_empty() {
                a.le(t, AffineUp, &g.name, p + rg + g.beta * w_sum, g.p_max + g.beta * q.total_up);
                a.le(t, AffineDown, &g.name, g.p_min + g.beta * q.total_down, p + g.beta * w_sum);
            }
        }

        for (j, r) in case.res.iter().enumerate() {
            let wf = input.w_fore[j];
            a.eq(t, ResSplit, &r.name, s.w_sche[j] + s.rw[j], wf);
            a.le(t, ResSplit, &r.name, 0.0, s.w_sche[j]);
            a.le(t, ResSplit, &r.name, s.w_sche[j], wf);
            a.le(t, ParameterBox, &r.name, 0.0, s.h_res[j].min(s.d_res[j]));
            if sol.mode == super::Mode::Online {
                a.le(t, ParameterBox, &r.name, s.h_res[j], r.h_max);
                a.le(t, ParameterBox, &r.name, s.d_res[j], r.d_max);
            }
            let need = s.w_sche[j] + s.d_res[j] * r.cap * k_droop + s.h_res[j] * r.cap * k_inertia;
            a.le(t, ResReserve, &r.name, need, q.res[j]);
        }

        for (k, e) in case.ess.iter().enumerate() {
            let prev = if t == 0 { window.initial.soc[k] } else { sol.periods[t - 1].e[k] };
            a.eq(t, EssEnergy, &e.name, s.e[k], prev - (s.p_ess[k] + s.loss[k]) * dt);
            a.le(t, EssEnergy, &e.name, e.e_min, s.e[k]);
            a.le(t, EssEnergy, &e.name, s.e[k], e.e_max);
            a.le(t, EssPower, &e.name, s.p_ess[k].abs(), e.p_max);
            a.le(t, EssPower, &e.name, s.p_ess[k] + s.re[k], e.p_max);
            a.le(t, EssPower, &e.name, 0.0, s.re[k]);
            let loss_d = (1.0 / e.eta_discharge - 1.0) * s.p_ess[k];
            let loss_c = (e.eta_charge - 1.0) * s.p_ess[k];
            let floor = loss_d.max(loss_c);
            a.le(t, EssLoss, &e.name, floor, s.loss[k]);
            loss_gap = loss_gap.max(s.loss[k] - floor);
            a.le(t, ParameterBox, &e.name, 0.0, s.h_ess[k].min(s.d_ess[k]));
            if sol.mode == super::Mode::Online {
                a.le(t, ParameterBox, &e.name, s.h_ess[k], e.h_max);
                a.le(t, ParameterBox, &e.name, s.d_ess[k], e.d_max);
            }
            let need = s.d_ess[k] * e.p_max * k_droop + s.h_ess[k] * e.p_max * k_inertia;
            a.le(t, EssReserve, &e.name, need, s.re[k]);
        }

        for (l, line) in case.network.lines.iter().enumerate() {
            let (m, s_aff) = affine_ptdf(case, l);
            let mut flow: f64 = case.generators.iter().zip(&s.p).map(|(g, p)| line.ptdf[g.bus] * p).sum();
            flow += case.ess.iter().zip(&s.p_ess).map(|(e, p)| line.ptdf[e.bus] * p).sum::<f64>();
            flow -= s_aff.iter().zip(&s.rw).map(|(sa, rw)| sa * rw).sum::<f64>();
            flow += m * s.w_sche.iter().sum::<f64>();
            flow -= case.loads.iter().zip(&input.loads).map(|(d, v)| line.ptdf[d.bus] * v).sum::<f64>();
            a.le(t, LineUp, &line.name, flow + q.line_up[l], line.limit);
            a.le(t, LineDown, &line.name, -flow + q.line_down[l], line.limit);
        }

        // Exact frequency response at the scheduled aggregate.
        let check = frequency_check(case, s.h_sys, s.d_sys, input.disturbance_pu);
        let m = check.metrics;
        if !check.rocof_ok {
            a.out.push(freq_violation(t, Rocof, m.rocof_max - lim.max_rocof));
        }
        if !check.steady_state_ok {
            a.out.push(freq_violation(t, SteadyState, m.delta_f_ss - lim.max_steady_state));
        }
        if !check.nadir_ok {
            a.out.push(freq_violation(t, Nadir, m.delta_f_max - lim.max_deviation));
        }
        frequency.push(m);
    }
    Ok(AuditReport {
        violations: a.out,
        frequency,
        loss_gap,
    })
}

fn freq_violation(period: usize, family: AuditFamily, excess: f64) -> AuditViolation {
    AuditViolation {
        period,
        family,
        item: "system".into(),
        amount: if excess.is_nan() { f64::INFINITY } else { excess },
    }
}

/// Exact metrics of one period and their pass/fail against the limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyCheck {
    pub metrics: FrequencyMetrics,
    pub rocof_ok: bool,
    pub steady_state_ok: bool,
    pub nadir_ok: bool,
}

impl FrequencyCheck {
    pub fn all_ok(&self) -> bool {
        self.rocof_ok && self.steady_state_ok && self.nadir_ok
    }
}

/// Exact frequency metrics at `(h_sys, d_sys)` under a disturbance of
/// `dp` per-unit, checked with a 1e-9 slack.
pub fn frequency_check(case: &DispatchCase, h_sys: f64, d_sys: f64, dp: f64) -> FrequencyCheck {
    let lim = &case.limits;
    let m = metrics(&case.sfr_params(h_sys, d_sys), dp, lim.f0).unwrap_or(FrequencyMetrics {
        rocof_max: f64::INFINITY,
        delta_f_ss: f64::INFINITY,
        delta_f_max: f64::INFINITY,
        t_nadir: f64::NAN,
        omega_n: f64::NAN,
        zeta: f64::NAN,
    });
    FrequencyCheck {
        metrics: m,
        rocof_ok: m.rocof_max <= lim.max_rocof + FREQ_TOL,
        steady_state_ok: m.delta_f_ss <= lim.max_steady_state + FREQ_TOL,
        nadir_ok: m.delta_f_max <= lim.max_deviation + FREQ_TOL,
    }
}
