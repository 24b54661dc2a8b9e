//! Static grid data.
//!
//! Power in MW, energy in MWh, time in hours unless a field says otherwise.
//! Inertia is in seconds on the unit's own rating; damping and droop gains
//! are per-unit on the unit's own rating.

use serde::{Deserialize, Serialize};

use super::DispatchError;
use crate::cha::{ChaConfig, NadirSpec};
use crate::sfr::{AggregatedSfrParams, FrequencyLimits};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub name: String,
    pub bus: usize,
    /// Quadratic fuel cost, $/MW².
    pub a: f64,
    /// Linear fuel cost, $/MW.
    pub b: f64,
    /// No-load cost, $.
    pub c: f64,
    /// Reserve cost, $/MW.
    pub rgc: f64,
    pub p_max: f64,
    pub p_min: f64,
    /// MW per step.
    pub ramp_up: f64,
    /// MW per step.
    pub ramp_down: f64,
    /// Share of the renewable forecast error this unit absorbs.
    pub beta: f64,
    /// Inertia constant, s.
    pub inertia: f64,
    /// Droop gain 1/R, per-unit.
    pub inv_droop: f64,
    /// High-pressure turbine fraction, per-unit.
    pub turbine_fraction: f64,
    /// Governor-turbine time constant, s.
    pub time_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResUnit {
    pub name: String,
    pub bus: usize,
    /// Installed capacity, MW.
    pub cap: f64,
    /// Virtual inertia upper bound, s.
    pub h_max: f64,
    /// Droop coefficient upper bound, per-unit.
    pub d_max: f64,
    /// Virtual inertia used by the fixed-parameter mode, s.
    pub fixed_h: f64,
    /// Droop coefficient used by the fixed-parameter mode, per-unit.
    pub fixed_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EssUnit {
    pub name: String,
    pub bus: usize,
    pub eta_charge: f64,
    pub eta_discharge: f64,
    pub p_max: f64,
    pub e_min: f64,
    pub e_max: f64,
    pub e_init: f64,
    pub h_max: f64,
    pub d_max: f64,
    pub fixed_h: f64,
    pub fixed_d: f64,
    /// Duration of primary-frequency support the stored energy must cover, h.
    pub dt_pfr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Load {
    pub name: String,
    pub bus: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub name: String,
    pub from: usize,
    pub to: usize,
    /// Thermal limit, MW.
    pub limit: f64,
    /// Flow sensitivity to an injection at each bus (slack column zero).
    pub ptdf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Network {
    pub n_buses: usize,
    pub slack: usize,
    pub lines: Vec<Line>,
}

/// Allowed violation probabilities of the chance constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probabilities {
    pub gen_up: f64,
    pub gen_down: f64,
    pub res_reserve: f64,
    pub line_up: f64,
    pub line_down: f64,
}

impl Default for Probabilities {
    fn default() -> Self {
        Self {
            gen_up: 0.05,
            gen_down: 0.05,
            res_reserve: 0.05,
            line_up: 0.05,
            line_down: 0.05,
        }
    }
}

impl Probabilities {
    pub fn uniform(alpha: f64) -> Self {
        Self {
            gen_up: alpha,
            gen_down: alpha,
            res_reserve: alpha,
            line_up: alpha,
            line_down: alpha,
        }
    }

    fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> {
        [
            ("gen_up", self.gen_up),
            ("gen_down", self.gen_down),
            ("res_reserve", self.res_reserve),
            ("line_up", self.line_up),
            ("line_down", self.line_down),
        ]
        .into_iter()
    }
}

/// Reserve cost constants: RES `rwc/W_fore` and ESS `rec/p_max` per MW².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConstants {
    pub rwc: f64,
    pub rec: f64,
}

/// How the per-period disturbance is sized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceRule {
    /// `κ · total load / P_base`.
    LoadFraction { kappa: f64 },
    /// A constant loss, MW.
    Fixed { mw: f64 },
    /// Loss of the largest thermal unit's rating.
    LargestUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispatchCase {
    pub name: String,
    /// System power base, MVA.
    pub p_base: f64,
    /// Load damping, per-unit on the system base.
    pub d0: f64,
    pub limits: FrequencyLimits,
    pub probabilities: Probabilities,
    pub disturbance: DisturbanceRule,
    pub costs: CostConstants,
    pub generators: Vec<Generator>,
    pub res: Vec<ResUnit>,
    pub ess: Vec<EssUnit>,
    pub loads: Vec<Load>,
    pub network: Network,
}

/// Thermal contribution to the aggregated frequency model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalAggregate {
    /// `Σ H_i P_i^max / P_base`, s.
    pub inertia: f64,
    pub droop_gain: f64,
    pub turbine_fraction: f64,
    /// Capacity-weighted mean of the generator time constants, s.
    pub time_constant: f64,
}

impl DispatchCase {
    /// Full validation; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>, DispatchError> {
        let bad = |field: String, msg: String| Err(DispatchError::Validation { field, msg });
        let mut warnings = Vec::new();
        if !(self.p_base.is_finite() && self.p_base > 0.0) {
            return bad("p_base".into(), "must be > 0".into());
        }
        if !(self.d0.is_finite() && self.d0 >= 0.0) {
            return bad("d0".into(), "must be >= 0".into());
        }
        self.limits
            .validate()
            .map_err(|e| DispatchError::Validation {
                field: "limits".into(),
                msg: e.to_string(),
            })?;
        for (name, a) in self.probabilities.iter() {
            if !(a > 0.0 && a < 0.5) {
                return bad(format!("probabilities.{name}"), format!("{a} is outside (0, 0.5)"));
            }
        }
        match self.disturbance {
            DisturbanceRule::LoadFraction { kappa } if !(kappa.is_finite() && kappa >= 0.0) => {
                return bad("disturbance.kappa".into(), "must be >= 0".into());
            }
            DisturbanceRule::Fixed { mw } if !(mw.is_finite() && mw >= 0.0) => {
                return bad("disturbance.mw".into(), "must be >= 0".into());
            }
            _ => {}
        }
        if !(self.costs.rwc > 0.0 && self.costs.rec > 0.0) {
            return bad("costs".into(), "rwc and rec must be > 0".into());
        }
        if self.generators.is_empty() {
            return bad("generators".into(), "at least one generator is required".into());
        }
        let nb = self.network.n_buses;
        if nb == 0 || self.network.slack >= nb {
            return bad("network".into(), "slack bus must index an existing bus".into());
        }
        let bus_ok = |bus: usize, field: String| -> Result<(), DispatchError> {
            if bus >= nb {
                return Err(DispatchError::Validation {
                    field,
                    msg: format!("bus {bus} >= n_buses {nb}"),
                });
            }
            Ok(())
        };

        for (i, g) in self.generators.iter().enumerate() {
            let f = |x: &str| format!("generators[{i}].{x}");
            bus_ok(g.bus, f("bus"))?;
            let values = [
                ("a", g.a),
                ("b", g.b),
                ("c", g.c),
                ("rgc", g.rgc),
                ("p_max", g.p_max),
                ("p_min", g.p_min),
                ("ramp_up", g.ramp_up),
                ("ramp_down", g.ramp_down),
                ("beta", g.beta),
                ("inertia", g.inertia),
                ("inv_droop", g.inv_droop),
                ("turbine_fraction", g.turbine_fraction),
                ("time_constant", g.time_constant),
            ];
            if let Some((name, _)) = values.iter().find(|(_, v)| !v.is_finite()) {
                return bad(f(name), "must be finite".into());
            }
            if g.a < 0.0 {
                return bad(f("a"), "must be >= 0 for a convex fuel cost".into());
            }
            if !(0.0 <= g.p_min && g.p_min <= g.p_max && g.p_max > 0.0) {
                return bad(f("p_min"), "need 0 <= p_min <= p_max and p_max > 0".into());
            }
            if g.ramp_up < 0.0 || g.ramp_down < 0.0 || g.rgc < 0.0 {
                return bad(f("ramp_up"), "ramps and reserve cost must be >= 0".into());
            }
            if g.beta < 0.0 {
                return bad(f("beta"), "must be >= 0".into());
            }
            if g.inertia < 0.0 || g.inv_droop < 0.0 || g.time_constant <= 0.0 {
                return bad(f("inertia"), "inertia, droop gain must be >= 0, time constant > 0".into());
            }
            if !(0.0..=1.0).contains(&g.turbine_fraction) {
                return bad(f("turbine_fraction"), "must lie in [0, 1]".into());
            }
        }
        for (j, r) in self.res.iter().enumerate() {
            let f = |x: &str| format!("res[{j}].{x}");
            bus_ok(r.bus, f("bus"))?;
            if !(r.cap.is_finite() && r.cap > 0.0) {
                return bad(f("cap"), "must be > 0".into());
            }
            check_box(r.h_max, r.fixed_h, &f("h_max"), &f("fixed_h"))?;
            check_box(r.d_max, r.fixed_d, &f("d_max"), &f("fixed_d"))?;
        }
        for (k, e) in self.ess.iter().enumerate() {
            let f = |x: &str| format!("ess[{k}].{x}");
            bus_ok(e.bus, f("bus"))?;
            for (name, eta) in [("eta_charge", e.eta_charge), ("eta_discharge", e.eta_discharge)] {
                if !(eta > 0.0 && eta <= 1.0) {
                    return bad(f(name), "must lie in (0, 1]".into());
                }
            }
            if !(e.p_max.is_finite() && e.p_max > 0.0) {
                return bad(f("p_max"), "must be > 0".into());
            }
            if !(e.dt_pfr.is_finite() && e.dt_pfr >= 0.0) {
                return bad(f("dt_pfr"), "must be >= 0".into());
            }
            if e.e_min < e.p_max * e.dt_pfr - 1e-9 {
                return bad(
                    f("e_min"),
                    format!("{} is below p_max * dt_pfr = {}", e.e_min, e.p_max * e.dt_pfr),
                );
            }
            if !(e.e_min <= e.e_init && e.e_init <= e.e_max && e.e_max.is_finite()) {
                return bad(f("e_init"), "need e_min <= e_init <= e_max".into());
            }
            check_box(e.h_max, e.fixed_h, &f("h_max"), &f("fixed_h"))?;
            check_box(e.d_max, e.fixed_d, &f("d_max"), &f("fixed_d"))?;
        }
        for (d, l) in self.loads.iter().enumerate() {
            bus_ok(l.bus, format!("loads[{d}].bus"))?;
        }
        for (l, line) in self.network.lines.iter().enumerate() {
            let f = |x: &str| format!("network.lines[{l}].{x}");
            bus_ok(line.from, f("from"))?;
            bus_ok(line.to, f("to"))?;
            if !(line.limit.is_finite() && line.limit > 0.0) {
                return bad(f("limit"), "must be > 0".into());
            }
            if line.ptdf.len() != nb {
                return bad(f("ptdf"), format!("has {} entries, expected {nb}", line.ptdf.len()));
            }
            if let Some(v) = line.ptdf.iter().find(|v| !(v.is_finite() && v.abs() <= 1.0 + 1e-9)) {
                return bad(f("ptdf"), format!("entry {v} exceeds 1 in magnitude"));
            }
        }

        // The worst case over forecasts is W_fore = cap.
        for (j, r) in self.res.iter().enumerate() {
            for (k, e) in self.ess.iter().enumerate() {
                if self.costs.rwc / r.cap <= self.costs.rec / e.p_max {
                    return bad(
                        "costs".into(),
                        format!(
                            "rwc/cap of {} ({}) must exceed rec/p_max of {} ({})",
                            self.res[j].name,
                            self.costs.rwc / r.cap,
                            self.ess[k].name,
                            self.costs.rec / e.p_max
                        ),
                    );
                }
            }
        }

        let beta_sum: f64 = self.generators.iter().map(|g| g.beta).sum();
        if !self.res.is_empty() {
            if beta_sum <= 0.0 {
                return bad("generators.beta".into(), "participation factors sum to zero".into());
            }
            if (beta_sum - 1.0).abs() > 1e-9 {
                warnings.push(format!("participation factors sum to {beta_sum}; renormalized to 1"));
            }
        }
        Ok(warnings)
    }

    /// Rescales participation factors to sum to one.
    pub fn normalize_beta(&mut self) {
        let s: f64 = self.generators.iter().map(|g| g.beta).sum();
        if s > 0.0 {
            for g in &mut self.generators {
                g.beta /= s;
            }
        }
    }

    pub fn thermal_aggregate(&self) -> ThermalAggregate {
        let pb = self.p_base;
        let cap: f64 = self.generators.iter().map(|g| g.p_max).sum();
        ThermalAggregate {
            inertia: self.generators.iter().map(|g| g.inertia * g.p_max).sum::<f64>() / pb,
            droop_gain: self.generators.iter().map(|g| g.inv_droop * g.p_max).sum::<f64>() / pb,
            turbine_fraction: self
                .generators
                .iter()
                .map(|g| g.turbine_fraction * g.inv_droop * g.p_max)
                .sum::<f64>()
                / pb,
            time_constant: self.generators.iter().map(|g| g.time_constant * g.p_max).sum::<f64>() / cap,
        }
    }

    /// Reachable system inertia and damping: lower bounds with no RES/ESS
    /// support, upper bounds with every unit at its maximum.
    pub fn hd_bounds(&self) -> ((f64, f64), (f64, f64)) {
        let th = self.thermal_aggregate();
        let pb = self.p_base;
        let h_extra = self.res.iter().map(|r| r.h_max * r.cap).sum::<f64>()
            + self.ess.iter().map(|e| e.h_max * e.p_max).sum::<f64>();
        let d_extra = self.res.iter().map(|r| r.d_max * r.cap).sum::<f64>()
            + self.ess.iter().map(|e| e.d_max * e.p_max).sum::<f64>();
        (
            (th.inertia, th.inertia + h_extra / pb),
            (self.d0, self.d0 + d_extra / pb),
        )
    }

    /// System inertia and damping with the fixed-mode parameters.
    pub fn fixed_hd(&self) -> (f64, f64) {
        let th = self.thermal_aggregate();
        let pb = self.p_base;
        let h = th.inertia
            + (self.res.iter().map(|r| r.fixed_h * r.cap).sum::<f64>()
                + self.ess.iter().map(|e| e.fixed_h * e.p_max).sum::<f64>())
                / pb;
        let d = self.d0
            + (self.res.iter().map(|r| r.fixed_d * r.cap).sum::<f64>()
                + self.ess.iter().map(|e| e.fixed_d * e.p_max).sum::<f64>())
                / pb;
        (h, d)
    }

    pub fn sfr_params(&self, h_sys: f64, d_sys: f64) -> AggregatedSfrParams {
        let th = self.thermal_aggregate();
        AggregatedSfrParams {
            inertia: h_sys,
            damping: d_sys,
            droop_gain: th.droop_gain,
            turbine_fraction: th.turbine_fraction,
            time_constant: th.time_constant,
        }
    }

    /// Disturbance in per-unit for a given total load (MW).
    pub fn disturbance_pu(&self, total_load: f64) -> f64 {
        match self.disturbance {
            DisturbanceRule::LoadFraction { kappa } => kappa * total_load / self.p_base,
            DisturbanceRule::Fixed { mw } => mw / self.p_base,
            DisturbanceRule::LargestUnit => {
                self.generators.iter().map(|g| g.p_max).fold(0.0, f64::max) / self.p_base
            }
        }
    }

    pub fn nadir_spec(&self, disturbance_pu: f64) -> NadirSpec {
        let th = self.thermal_aggregate();
        NadirSpec {
            droop_gain: th.droop_gain,
            turbine_fraction: th.turbine_fraction,
            time_constant: th.time_constant,
            disturbance: disturbance_pu,
            f0: self.limits.f0,
            max_deviation: self.limits.max_deviation,
        }
    }

    /// CHA sampling configuration over the reachable (H, D) box.
    pub fn cha_config(&self, n_samples: usize, seed: u64) -> ChaConfig {
        let (h, d) = self.hd_bounds();
        ChaConfig {
            n_samples,
            seed,
            ..ChaConfig::new(h, d)
        }
    }
}

fn check_box(max: f64, fixed: f64, max_field: &str, fixed_field: &str) -> Result<(), DispatchError> {
    if !(max.is_finite() && max >= 0.0) {
        return Err(DispatchError::Validation {
            field: max_field.into(),
            msg: "must be finite and >= 0".into(),
        });
    }
    if !(fixed.is_finite() && fixed >= 0.0) {
        return Err(DispatchError::Validation {
            field: fixed_field.into(),
            msg: "must be finite and >= 0".into(),
        });
    }
    Ok(())
}
