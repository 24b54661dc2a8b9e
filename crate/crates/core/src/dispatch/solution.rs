//! Decoded schedules and their costs.

use serde::{Deserialize, Serialize};

use super::build::{rec_coefficient, rwc_coefficient, VarIndex};
use super::{DispatchCase, Mode, Window};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Quadratic fuel cost including no-load terms.
    pub fuel: f64,
    pub gen_reserve: f64,
    pub res_reserve: f64,
    pub ess_reserve: f64,
    pub ess_loss: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.fuel + self.gen_reserve + self.res_reserve + self.ess_reserve + self.ess_loss
    }

    pub fn add(&mut self, o: &CostBreakdown) {
        self.fuel += o.fuel;
        self.gen_reserve += o.gen_reserve;
        self.res_reserve += o.res_reserve;
        self.ess_reserve += o.ess_reserve;
        self.ess_loss += o.ess_loss;
    }
}

/// One period of a schedule. Unit vectors follow the case's unit order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodSolution {
    pub p: Vec<f64>,
    pub rg: Vec<f64>,
    pub w_sche: Vec<f64>,
    pub rw: Vec<f64>,
    pub h_res: Vec<f64>,
    pub d_res: Vec<f64>,
    pub p_ess: Vec<f64>,
    pub re: Vec<f64>,
    pub e: Vec<f64>,
    pub loss: Vec<f64>,
    /// `(1/η_d − 1)·P`.
    pub loss_d: Vec<f64>,
    /// `(η_c − 1)·P`.
    pub loss_c: Vec<f64>,
    pub h_ess: Vec<f64>,
    pub d_ess: Vec<f64>,
    pub h_sys: f64,
    pub d_sys: f64,
    pub cost: CostBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    pub mode: Mode,
    pub step_hours: f64,
    pub periods: Vec<PeriodSolution>,
    pub cost: CostBreakdown,
    /// Solver objective plus no-load costs, when produced by a solve.
    pub solver_objective: Option<f64>,
    /// Marginal price of the power balance per period, $/MW.
    pub balance_price: Vec<f64>,
}

impl PeriodSolution {
    /// System inertia and damping from the unit values.
    pub fn aggregate(case: &DispatchCase, h_res: &[f64], d_res: &[f64], h_ess: &[f64], d_ess: &[f64]) -> (f64, f64) {
        let th = case.thermal_aggregate();
        let pb = case.p_base;
        let h = th.inertia
            + (h_res.iter().zip(&case.res).map(|(h, r)| h * r.cap).sum::<f64>()
                + h_ess.iter().zip(&case.ess).map(|(h, e)| h * e.p_max).sum::<f64>())
                / pb;
        let d = case.d0
            + (d_res.iter().zip(&case.res).map(|(d, r)| d * r.cap).sum::<f64>()
                + d_ess.iter().zip(&case.ess).map(|(d, e)| d * e.p_max).sum::<f64>())
                / pb;
        (h, d)
    }

    /// Costs from decision values, per the objective's terms.
    pub fn costs(&self, case: &DispatchCase, w_fore: &[f64]) -> CostBreakdown {
        let g = &case.generators;
        CostBreakdown {
            fuel: g.iter().zip(&self.p).map(|(g, p)| g.a * p * p + g.b * p + g.c).sum(),
            gen_reserve: g.iter().zip(&self.rg).map(|(g, r)| g.rgc * r).sum(),
            res_reserve: (0..case.res.len())
                .map(|j| rwc_coefficient(case, j, w_fore[j]) * self.rw[j] * self.rw[j])
                .sum(),
            ess_reserve: (0..case.ess.len())
                .map(|k| rec_coefficient(case, k) * self.re[k] * self.re[k])
                .sum(),
            ess_loss: self.loss.iter().sum(),
        }
    }
}

pub fn decode_solution(x: &[f64], index: &VarIndex, case: &DispatchCase, window: &Window, mode: Mode) -> DispatchSolution {
    let pick = |cols: &[usize]| cols.iter().map(|&c| x[c]).collect::<Vec<f64>>();
    let mut total = CostBreakdown::default();
    let periods: Vec<PeriodSolution> = index
        .periods
        .iter()
        .zip(&window.periods)
        .map(|(v, input)| {
            let p_ess = pick(&v.p_ess);
            let (h_res, d_res, h_ess, d_ess) = (pick(&v.h_res), pick(&v.d_res), pick(&v.h_ess), pick(&v.d_ess));
            let (h_sys, d_sys) = PeriodSolution::aggregate(case, &h_res, &d_res, &h_ess, &d_ess);
            let mut ps = PeriodSolution {
                p: pick(&v.p),
                rg: pick(&v.rg),
                w_sche: pick(&v.ws),
                rw: pick(&v.rw),
                h_res,
                d_res,
                loss_d: p_ess.iter().zip(&case.ess).map(|(p, e)| (1.0 / e.eta_discharge - 1.0) * p).collect(),
                loss_c: p_ess.iter().zip(&case.ess).map(|(p, e)| (e.eta_charge - 1.0) * p).collect(),
                p_ess,
                re: pick(&v.re),
                e: pick(&v.e),
                loss: pick(&v.loss),
                h_ess,
                d_ess,
                h_sys,
                d_sys,
                cost: CostBreakdown::default(),
            };
            ps.cost = ps.costs(case, &input.w_fore);
            total.add(&ps.cost);
            ps
        })
        .collect();
    DispatchSolution {
        mode,
        step_hours: window.step_hours,
        periods,
        cost: total,
        solver_objective: None,
        balance_price: Vec::new(),
    }
}
