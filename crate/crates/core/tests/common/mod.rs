//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use fcsd_core::dispatch::{
    CostConstants, DispatchCase, DisturbanceRule, EssUnit, Generator, InitialState, Load, Network,
    PeriodInput, Probabilities, ResUnit, Window,
};
use fcsd_core::qp::{QpProblem, QpResult};
use fcsd_core::sfr::FrequencyLimits;
use fcsd_core::uncertainty::Gmm;

fn generator(name: &str, p_max: f64, a: f64, b: f64, beta: f64) -> Generator {
    Generator {
        name: name.into(),
        bus: 0,
        a,
        b,
        c: 100.0,
        rgc: 3.0,
        p_max,
        p_min: 0.2 * p_max,
        ramp_up: 0.5 * p_max,
        ramp_down: 0.5 * p_max,
        beta,
        inertia: 5.0,
        inv_droop: 20.0,
        turbine_fraction: 0.25,
        time_constant: 8.0,
    }
}

/// Single-bus system: two thermal units (1000 MW), the given RES capacities
/// and ESS `(p_max, e_max)` pairs.
pub fn toy_case(res_caps: &[f64], ess: &[(f64, f64)]) -> DispatchCase {
    DispatchCase {
        name: "toy".into(),
        p_base: 1000.0,
        d0: 1.0,
        limits: FrequencyLimits::default(),
        probabilities: Probabilities::default(),
        disturbance: DisturbanceRule::Fixed { mw: 100.0 },
        costs: CostConstants { rwc: 100.0, rec: 20.0 },
        generators: vec![
            generator("G1", 600.0, 0.004, 20.0, 0.6),
            generator("G2", 400.0, 0.006, 25.0, 0.4),
        ],
        res: res_caps
            .iter()
            .enumerate()
            .map(|(j, &cap)| ResUnit {
                name: format!("W{}", j + 1),
                bus: 0,
                cap,
                h_max: 5.0,
                d_max: 10.0,
                fixed_h: 2.0,
                fixed_d: 5.0,
            })
            .collect(),
        ess: ess
            .iter()
            .enumerate()
            .map(|(k, &(p_max, e_max))| EssUnit {
                name: format!("S{}", k + 1),
                bus: 0,
                eta_charge: 0.95,
                eta_discharge: 0.95,
                p_max,
                e_min: 0.1 * e_max,
                e_max,
                e_init: 0.5 * e_max,
                h_max: 5.0,
                d_max: 10.0,
                fixed_h: 4.0,
                fixed_d: 10.0,
                dt_pfr: 0.25,
            })
            .collect(),
        loads: vec![Load {
            name: "L1".into(),
            bus: 0,
        }],
        network: Network {
            n_buses: 1,
            slack: 0,
            lines: vec![],
        },
    }
}

/// Forecast mixture with spread `sigma_frac · cap` per RES.
pub fn toy_gmm(case: &DispatchCase, w_fore: &[f64], sigma_frac: f64) -> Option<Gmm> {
    if case.res.is_empty() {
        return None;
    }
    let sigma: Vec<f64> = case.res.iter().map(|r| sigma_frac * r.cap).collect();
    Some(Gmm::from_means(w_fore, &sigma, 0.3, &[0.65, 0.35], &[0.35, -0.65], &[0.8, 1.3]).unwrap())
}

/// One period per entry of `dps`, all with the same load and forecast.
pub fn toy_window(case: &DispatchCase, load: f64, w_fore: &[f64], sigma_frac: f64, dps: &[f64]) -> Window {
    Window {
        step_hours: 0.25,
        periods: dps
            .iter()
            .map(|&dp| PeriodInput {
                loads: vec![load],
                w_fore: w_fore.to_vec(),
                gmm: toy_gmm(case, w_fore, sigma_frac),
                disturbance_pu: dp,
            })
            .collect(),
        initial: InitialState::from_case(case),
    }
}

/// Largest KKT residual of `r` for `p`, each term divided by
/// `1 + max |data|`. Stationarity is `Qx + c + A_eqᵀy + A_inᵀz − ν = 0`.
pub fn kkt_residual(p: &QpProblem, r: &QpResult) -> f64 {
    let n = p.n_vars();
    let x = &r.x;
    let (a_eq, b_eq) = p.eq_rows();
    let (a_in, b_in) = p.in_rows();

    let mut scale = 0.0_f64;
    let mut grad = p.linear_cost().to_vec();
    for &(i, j, v) in p.q_entries() {
        scale = scale.max(v.abs());
        grad[i] += v * x[j];
        if i != j {
            grad[j] += v * x[i];
        }
    }
    for c in p.linear_cost() {
        scale = scale.max(c.abs());
    }
    let mut worst = 0.0_f64;
    let mut eq_rows = |rows: &[Vec<(usize, f64)>], rhs: &[f64], mult: &[f64], grad: &mut Vec<f64>, ineq: bool| {
        for ((row, &b), &m) in rows.iter().zip(rhs).zip(mult) {
            scale = scale.max(b.abs());
            let mut act = 0.0;
            for &(j, v) in row {
                scale = scale.max(v.abs());
                grad[j] += v * m;
                act += v * x[j];
            }
            if ineq {
                worst = worst.max(act - b).max(-m).max((m * (b - act)).abs());
            } else {
                worst = worst.max((act - b).abs());
            }
        }
    };
    eq_rows(a_eq, b_eq, &r.y_eq, &mut grad, false);
    eq_rows(a_in, b_in, &r.z_in, &mut grad, true);
    for i in 0..n {
        let (lo, hi, nu) = (p.lower()[i], p.upper()[i], r.bound_duals[i]);
        worst = worst.max(lo - x[i]).max(x[i] - hi);
        worst = worst.max((grad[i] - nu).abs());
        if lo != hi && nu != 0.0 {
            let gap = if nu > 0.0 { x[i] - lo } else { hi - x[i] };
            worst = worst.max(if gap.is_finite() { (nu * gap).abs() } else { nu.abs() });
        }
    }
    worst / (1.0 + scale)
}

/// Closed-form nadir for an underdamped aggregate response, Hz.
pub fn nadir_closed_form(h: f64, d: f64, r: f64, f: f64, t: f64, dp: f64, f0: f64) -> f64 {
    let wn = ((d + r) / (2.0 * h * t)).sqrt();
    let zeta = (2.0 * h + (d + f) * t) / (2.0 * (2.0 * h * t * (d + r)).sqrt());
    assert!(zeta < 1.0, "closed form needs an underdamped mode (zeta = {zeta})");
    let wd = wn * (1.0 - zeta * zeta).sqrt();
    let t_nadir = (wd * t).atan2(zeta * wn * t - 1.0) / wd;
    f0 * dp / (d + r) * (1.0 + (-zeta * wn * t_nadir).exp() * (t * (r - f) / (2.0 * h)).sqrt())
}

pub fn zeta(h: f64, d: f64, r: f64, f: f64, t: f64) -> f64 {
    (2.0 * h + (d + f) * t) / (2.0 * (2.0 * h * t * (d + r)).sqrt())
}

/// Physical-form step response: swing equation plus a reheat governor,
///
/// ```text
///     2H ω' = −F ω + z − D ω − ΔP
///     T  z' = −z − (R − F) ω
/// ```
///
/// integrated with RK4. Returns `(max |Δf|, |Δf(t_end)|, |dΔf/dt(0)|)` in Hz.
pub fn simulate_physical(h: f64, d: f64, r: f64, f: f64, t: f64, dp: f64, f0: f64, t_end: f64, dt: f64) -> (f64, f64, f64) {
    let rhs = |s: [f64; 2]| -> [f64; 2] {
        let (w, z) = (s[0], s[1]);
        [(-f * w + z - d * w - dp) / (2.0 * h), (-z - (r - f) * w) / t]
    };
    let mut s = [0.0, 0.0];
    let rate0 = f0 * rhs(s)[0].abs();
    let steps = (t_end / dt).ceil() as usize;
    let mut peak = 0.0_f64;
    for _ in 0..steps {
        let k1 = rhs(s);
        let k2 = rhs([s[0] + 0.5 * dt * k1[0], s[1] + 0.5 * dt * k1[1]]);
        let k3 = rhs([s[0] + 0.5 * dt * k2[0], s[1] + 0.5 * dt * k2[1]]);
        let k4 = rhs([s[0] + dt * k3[0], s[1] + dt * k3[1]]);
        for i in 0..2 {
            s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        peak = peak.max((f0 * s[0]).abs());
    }
    (peak, (f0 * s[0]).abs(), rate0)
}
