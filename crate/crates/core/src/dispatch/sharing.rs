//! How reserve is shared among RES and among ESS units.
//!
//! With the cost coefficients scaled by forecast (RES) and rating (ESS),
//! units whose bounds are slack hold reserve in proportion to that scale.
//! A unit is excluded from a period's spread once one of its own bounds is
//! active, since the bound then fixes its reserve.

use serde::{Deserialize, Serialize};

use super::build::{reserve_factors, rwc_coefficient};
use super::quantiles::reformulate_quantiles;
use super::{DispatchCase, DispatchError, DispatchSolution, Window};

/// Relative distance below which a value counts as sitting on a bound.
const ACTIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementalRates {
    /// `2a·P + b` per generator, $/MW.
    pub generators: Vec<f64>,
    /// `−2·rwc_j·(W_fore − W_sche)` per RES, $/MW.
    pub res: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharingReport {
    /// Per period: max − min of `Rw/W_fore` over RES with slack bounds;
    /// `None` with fewer than two such units.
    pub res_ratio_spread: Vec<Option<f64>>,
    /// Per period: the same for `Re/p_max` over ESS.
    pub ess_ratio_spread: Vec<Option<f64>>,
    /// Units entering each period's RES spread.
    pub res_included: Vec<Vec<usize>>,
    pub ess_included: Vec<Vec<usize>>,
    pub incremental_rates: Vec<IncrementalRates>,
}

impl SharingReport {
    pub fn max_res_spread(&self) -> f64 {
        self.res_ratio_spread.iter().flatten().fold(0.0, |m, &v| m.max(v))
    }

    pub fn max_ess_spread(&self) -> f64 {
        self.ess_ratio_spread.iter().flatten().fold(0.0, |m, &v| m.max(v))
    }
}

fn interior(v: f64, lo: f64, hi: f64) -> bool {
    let scale = 1.0 + lo.abs().max(hi.abs());
    v > lo + ACTIVE_TOL * scale && v < hi - ACTIVE_TOL * scale
}

fn spread(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(hi - lo)
}

pub fn sharing_diagnostics(
    sol: &DispatchSolution,
    case: &DispatchCase,
    window: &Window,
) -> Result<SharingReport, DispatchError> {
    let (k_droop, k_inertia) = reserve_factors(case);
    let mut report = SharingReport {
        res_ratio_spread: Vec::new(),
        ess_ratio_spread: Vec::new(),
        res_included: Vec::new(),
        ess_included: Vec::new(),
        incremental_rates: Vec::new(),
    };
    for (s, input) in sol.periods.iter().zip(&window.periods) {
        let q = reformulate_quantiles(case, input.gmm.as_ref())?;
        let mut res_units = Vec::new();
        for (j, r) in case.res.iter().enumerate() {
            let wf = input.w_fore[j];
            if wf <= 0.0 || !interior(s.w_sche[j], 0.0, wf) {
                continue;
            }
            let used = s.w_sche[j] + s.d_res[j] * r.cap * k_droop + s.h_res[j] * r.cap * k_inertia;
            let reserve_slack = used < q.res[j] - ACTIVE_TOL * (1.0 + q.res[j].abs());
            if reserve_slack || interior(s.h_res[j], 0.0, r.h_max) || interior(s.d_res[j], 0.0, r.d_max) {
                res_units.push(j);
            }
        }
        let mut ess_units = Vec::new();
        for (k, e) in case.ess.iter().enumerate() {
            let headroom_slack = s.p_ess[k] + s.re[k] < e.p_max * (1.0 - ACTIVE_TOL);
            if headroom_slack && (interior(s.h_ess[k], 0.0, e.h_max) || interior(s.d_ess[k], 0.0, e.d_max)) {
                ess_units.push(k);
            }
        }
        let res_ratios: Vec<f64> = res_units.iter().map(|&j| s.rw[j] / input.w_fore[j]).collect();
        let ess_ratios: Vec<f64> = ess_units.iter().map(|&k| s.re[k] / case.ess[k].p_max).collect();
        report.res_ratio_spread.push(spread(&res_ratios));
        report.ess_ratio_spread.push(spread(&ess_ratios));
        report.res_included.push(res_units);
        report.ess_included.push(ess_units);
        report.incremental_rates.push(IncrementalRates {
            generators: case.generators.iter().zip(&s.p).map(|(g, p)| 2.0 * g.a * p + g.b).collect(),
            res: (0..case.res.len())
                .map(|j| -2.0 * rwc_coefficient(case, j, input.w_fore[j]) * (input.w_fore[j] - s.w_sche[j]))
                .collect(),
        });
    }
    Ok(report)
}
