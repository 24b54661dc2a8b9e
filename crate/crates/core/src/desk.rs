//! Constructed 24-bus desk case and its one-day scenario.
//!
//! Topology and reactances follow the IEEE RTS-24 network with parallel
//! circuits merged (34 corridors). Generators, wind farms, storage and the
//! daily profiles are synthetic, scaled so that fixed virtual inertia and
//! droop settings fall short of the nadir limit at the evening peak.

use nalgebra::DMatrix;

use crate::dispatch::{
    CostConstants, DispatchCase, DisturbanceRule, EssUnit, Generator, Line, Load, Network, Probabilities,
    ResUnit,
};
use crate::horizon::{ForecastModel, HorizonConfig, HorizonError, ScenarioTimeline};
use crate::sfr::FrequencyLimits;

pub const CASE_NAME: &str = "case24";
pub const SCENARIO_NAME: &str = "day1";
pub const SCENARIO_SEED: u64 = 2023;

/// `(from, to, reactance p.u., rating MW, circuits)`, 1-based buses.
const BRANCHES: [(usize, usize, f64, f64, u32); 34] = [
    (1, 2, 0.0139, 175.0, 1),
    (1, 3, 0.2112, 175.0, 1),
    (1, 5, 0.0845, 175.0, 1),
    (2, 4, 0.1267, 175.0, 1),
    (2, 6, 0.1920, 175.0, 1),
    (3, 9, 0.1190, 175.0, 1),
    (3, 24, 0.0839, 400.0, 1),
    (4, 9, 0.1037, 175.0, 1),
    (5, 10, 0.0883, 175.0, 1),
    (6, 10, 0.0605, 175.0, 1),
    (7, 8, 0.0614, 175.0, 1),
    (8, 9, 0.1651, 175.0, 1),
    (8, 10, 0.1651, 175.0, 1),
    (9, 11, 0.0839, 400.0, 1),
    (9, 12, 0.0839, 400.0, 1),
    (10, 11, 0.0839, 400.0, 1),
    (10, 12, 0.0839, 400.0, 1),
    (11, 13, 0.0476, 500.0, 1),
    (11, 14, 0.0418, 500.0, 1),
    (12, 13, 0.0476, 500.0, 1),
    (12, 23, 0.0966, 500.0, 1),
    (13, 23, 0.0865, 500.0, 1),
    (14, 16, 0.0389, 500.0, 1),
    (15, 16, 0.0173, 500.0, 1),
    (15, 21, 0.0490, 500.0, 2),
    (15, 24, 0.0519, 500.0, 1),
    (16, 17, 0.0259, 500.0, 1),
    (16, 19, 0.0231, 500.0, 1),
    (17, 18, 0.0144, 500.0, 1),
    (17, 22, 0.1053, 500.0, 1),
    (18, 21, 0.0259, 500.0, 2),
    (19, 20, 0.0396, 500.0, 2),
    (20, 23, 0.0216, 500.0, 2),
    (21, 22, 0.0678, 500.0, 1),
];

const N_BUSES: usize = 24;
/// Bus 13, 0-based.
const SLACK: usize = 12;

/// `(bus, peak MW)` of the RTS-24 loads, 1-based buses.
const LOADS: [(usize, f64); 17] = [
    (1, 108.0),
    (2, 97.0),
    (3, 180.0),
    (4, 74.0),
    (5, 71.0),
    (6, 136.0),
    (7, 125.0),
    (8, 171.0),
    (9, 175.0),
    (10, 195.0),
    (13, 265.0),
    (14, 194.0),
    (15, 317.0),
    (16, 100.0),
    (18, 333.0),
    (19, 181.0),
    (20, 128.0),
];

/// Generator technology: `(label, p_max, a, b, c, rgc, H, 1/R, F_r, T, regulating)`.
type Tech = (&'static str, f64, f64, f64, f64, f64, f64, f64, f64, f64, bool);

const U76: Tech = ("U76", 76.0, 0.0120, 24.0, 150.0, 3.0, 5.0, 22.0, 0.25, 7.0, true);
const U100: Tech = ("U100", 100.0, 0.0080, 30.0, 220.0, 3.5, 5.5, 24.0, 0.22, 8.0, true);
const U197: Tech = ("U197", 197.0, 0.0045, 28.0, 350.0, 3.5, 6.0, 26.0, 0.22, 8.5, true);
const U155: Tech = ("U155", 155.0, 0.0050, 19.0, 300.0, 3.0, 6.0, 27.0, 0.24, 8.0, true);
const U350: Tech = ("U350", 350.0, 0.0030, 18.0, 500.0, 3.0, 6.5, 26.0, 0.22, 8.5, true);
const U400: Tech = ("U400", 400.0, 0.0006, 8.0, 600.0, 2.5, 7.0, 20.0, 0.20, 9.0, false);
const U50: Tech = ("U50", 50.0, 0.0010, 5.0, 30.0, 2.0, 4.5, 30.0, 0.20, 6.0, true);

/// `(bus, technology, count)`, 1-based buses.
const UNITS: [(usize, Tech, usize); 11] = [
    (1, U76, 2),
    (2, U76, 2),
    (7, U100, 3),
    (13, U197, 3),
    (15, U155, 1),
    (16, U155, 1),
    (18, U400, 1),
    (21, U400, 1),
    (22, U50, 6),
    (23, U155, 2),
    (23, U350, 1),
];

/// Hourly system load, MW.
const HOURLY_LOAD: [f64; 24] = [
    1700.0, 1600.0, 1540.0, 1510.0, 1500.0, 1540.0, 1680.0, 1900.0, 2120.0, 2260.0, 2330.0, 2360.0,
    2320.0, 2300.0, 2280.0, 2300.0, 2380.0, 2520.0, 2680.0, 2750.0, 2700.0, 2520.0, 2250.0, 1950.0,
];

/// Wind farms: `(name, bus, capacity, mean fraction, swing, hour of maximum, σ_base)`.
const WIND: [(&str, usize, f64, f64, f64, f64, f64); 3] = [
    ("W1", 3, 250.0, 0.55, 0.20, 3.0, 0.025),
    ("W2", 14, 250.0, 0.55, 0.18, 5.0, 0.028),
    ("W3", 19, 200.0, 0.57, 0.17, 1.0, 0.022),
];

/// DC power-flow PTDF rows for the given branches, slack column zero.
pub fn ptdf(n_buses: usize, slack: usize, branches: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let keep: Vec<usize> = (0..n_buses).filter(|&b| b != slack).collect();
    let pos = |b: usize| keep.iter().position(|&k| k == b);
    let m = keep.len();
    let mut bred = DMatrix::<f64>::zeros(m, m);
    for &(f, t, x) in branches {
        let y = 1.0 / x;
        if let Some(i) = pos(f) {
            bred[(i, i)] += y;
        }
        if let Some(j) = pos(t) {
            bred[(j, j)] += y;
        }
        if let (Some(i), Some(j)) = (pos(f), pos(t)) {
            bred[(i, j)] -= y;
            bred[(j, i)] -= y;
        }
    }
    let x = bred.try_inverse().expect("connected network has an invertible reduced susceptance");
    let theta = |bus: usize, inj: usize| match (pos(bus), pos(inj)) {
        (Some(i), Some(j)) => x[(i, j)],
        _ => 0.0,
    };
    branches
        .iter()
        .map(|&(f, t, xl)| (0..n_buses).map(|n| (theta(f, n) - theta(t, n)) / xl).collect())
        .collect()
}

pub fn case24() -> DispatchCase {
    let mut generators = Vec::new();
    for &(bus, tech, count) in &UNITS {
        let (label, p_max, a, b, c, rgc, h, inv_r, fr, tc, regulating) = tech;
        for n in 0..count {
            generators.push(Generator {
                name: format!("G{bus}_{label}_{}", n + 1),
                bus: bus - 1,
                a,
                b,
                c,
                rgc,
                p_max,
                p_min: 0.25 * p_max,
                ramp_up: 0.25 * p_max,
                ramp_down: 0.25 * p_max,
                beta: if regulating { p_max } else { 0.0 },
                inertia: h,
                inv_droop: inv_r,
                turbine_fraction: fr,
                time_constant: tc,
            });
        }
    }
    let beta_sum: f64 = generators.iter().map(|g| g.beta).sum();
    for g in &mut generators {
        g.beta /= beta_sum;
    }

    let res = WIND
        .iter()
        .map(|&(name, bus, cap, ..)| ResUnit {
            name: name.into(),
            bus: bus - 1,
            cap,
            h_max: 5.0,
            d_max: 10.0,
            fixed_h: 2.0,
            fixed_d: 5.0,
        })
        .collect();
    let ess = [("S1", 15, 200.0, 800.0), ("S2", 8, 100.0, 400.0)]
        .iter()
        .map(|&(name, bus, p_max, e_max)| EssUnit {
            name: name.into(),
            bus: bus - 1,
            eta_charge: 0.95,
            eta_discharge: 0.95,
            p_max,
            e_min: 0.1 * e_max,
            e_max,
            e_init: 0.5 * e_max,
            h_max: 5.0,
            d_max: 15.0,
            fixed_h: 4.0,
            fixed_d: 10.0,
            dt_pfr: 0.25,
        })
        .collect();

    let branches: Vec<(usize, usize, f64)> = BRANCHES
        .iter()
        .map(|&(f, t, x, _, n)| (f - 1, t - 1, x / n as f64))
        .collect();
    let rows = ptdf(N_BUSES, SLACK, &branches);
    let lines = BRANCHES
        .iter()
        .zip(rows)
        .map(|(&(f, t, _, rating, n), row)| Line {
            name: format!("L{f}-{t}"),
            from: f - 1,
            to: t - 1,
            limit: rating * n as f64,
            ptdf: row,
        })
        .collect();

    DispatchCase {
        name: CASE_NAME.into(),
        p_base: 3000.0,
        d0: 1.0,
        limits: FrequencyLimits {
            f0: 50.0,
            max_deviation: 0.5,
            max_rocof: 0.5,
            max_steady_state: 0.25,
        },
        probabilities: Probabilities::uniform(0.05),
        disturbance: DisturbanceRule::LoadFraction { kappa: 0.15 },
        costs: CostConstants { rwc: 100.0, rec: 25.0 },
        generators,
        res,
        ess,
        loads: LOADS
            .iter()
            .map(|&(bus, _)| Load {
                name: format!("D{bus}"),
                bus: bus - 1,
            })
            .collect(),
        network: Network {
            n_buses: N_BUSES,
            slack: SLACK,
            lines,
        },
    }
}

fn hourly_interp(hourly: impl Fn(usize) -> f64, steps_per_hour: usize, k: usize) -> f64 {
    let h = k / steps_per_hour;
    let frac = (k % steps_per_hour) as f64 / steps_per_hour as f64;
    hourly(h % 24) * (1.0 - frac) + hourly((h + 1) % 24) * frac
}

/// Per-load MW for each step of the day.
pub fn load_profile(cfg: &HorizonConfig) -> Vec<Vec<f64>> {
    let peak: f64 = LOADS.iter().map(|l| l.1).sum();
    let sph = (60.0 / cfg.step_minutes).round() as usize;
    (0..cfg.day_steps)
        .map(|k| {
            let total = hourly_interp(|h| HOURLY_LOAD[h], sph, k);
            LOADS.iter().map(|&(_, p)| round3(total * p / peak)).collect()
        })
        .collect()
}

/// Per-farm forecast MW for each step of the day.
pub fn wind_profile(cfg: &HorizonConfig) -> Vec<Vec<f64>> {
    let sph = (60.0 / cfg.step_minutes).round() as usize;
    (0..cfg.day_steps)
        .map(|k| {
            WIND.iter()
                .map(|&(_, _, cap, mean, swing, peak_hour, _)| {
                    let shape = |h: usize| {
                        mean + swing * (2.0 * std::f64::consts::PI * (h as f64 - peak_hour) / 24.0).cos()
                    };
                    round3(cap * hourly_interp(shape, sph, k))
                })
                .collect()
        })
        .collect()
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

pub fn forecast_model() -> ForecastModel {
    ForecastModel {
        sigma_base: WIND.iter().map(|w| w.6).collect(),
        gamma: 0.15,
        correlation: 0.5,
        weights: vec![0.65, 0.35],
        offsets: vec![0.35, -0.65],
        scales: vec![0.8, 1.3],
    }
}

pub fn day1(case: &DispatchCase, cfg: &HorizonConfig) -> Result<ScenarioTimeline, HorizonError> {
    ScenarioTimeline::generate(
        SCENARIO_NAME,
        case,
        cfg,
        &load_profile(cfg),
        &wind_profile(cfg),
        &forecast_model(),
        SCENARIO_SEED,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ptdf_of_two_bus_line_is_unity() {
        let rows = ptdf(2, 0, &[(0, 1, 0.1)]);
        assert_eq!(rows, vec![vec![0.0, -1.0]]);
    }

    #[test]
    fn ptdf_three_bus_ring_splits_by_reactance() {
        // Equal reactances: an injection at bus 1 withdrawn at slack 0 sends
        // 2/3 on the direct line and 1/3 around the ring.
        let rows = ptdf(3, 0, &[(0, 1, 0.1), (1, 2, 0.1), (0, 2, 0.1)]);
        assert!((rows[0][1] + 2.0 / 3.0).abs() < 1e-12);
        assert!((rows[1][1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((rows[2][1] + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn desk_case_shape() {
        let c = case24();
        assert_eq!(c.generators.len(), 23);
        assert_eq!(c.network.lines.len(), 34);
        assert_eq!(c.res.len(), 3);
        assert_eq!(c.res.iter().map(|r| r.cap).sum::<f64>(), 700.0);
        assert_eq!(c.ess.iter().map(|e| e.p_max).sum::<f64>(), 300.0);
        assert_eq!(c.ess.iter().map(|e| e.e_max).sum::<f64>(), 1200.0);
        assert!(c.validate().unwrap().is_empty());
    }
}
