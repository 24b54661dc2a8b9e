//! CSV output of rolling runs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{config_hash, to_canonical_json, IoError, SCHEMA_VERSION};
use crate::dispatch::DispatchCase;
use crate::horizon::{frequency_timeline, HorizonConfig, RunReport, ScenarioTimeline};

pub const SUMMARY_COLUMNS: [&str; 5] = ["mode", "fuel_cost", "res_reserve_cost", "ess_reserve_cost", "curtailment_pct"];

const COMMITTED_COLUMNS: [&str; 11] = [
    "mode", "period", "solve", "lead", "kind", "unit", "bus", "p_mw", "reserve_mw", "energy_mwh", "loss_mw",
];
const ALLOCATION_COLUMNS: [&str; 6] = ["mode", "period", "kind", "unit", "inertia_s", "damping_pu"];
const FREQUENCY_COLUMNS: [&str; 13] = [
    "mode",
    "period",
    "total_load_mw",
    "disturbance_pu",
    "h_sys_s",
    "d_sys_pu",
    "rocof_hz_per_s",
    "delta_f_ss_hz",
    "delta_f_max_hz",
    "rocof_ok",
    "steady_state_ok",
    "nadir_ok",
    "total_cost",
];
const RESERVES_COLUMNS: [&str; 7] = ["mode", "solve", "start", "lead", "period", "res_reserve_mw", "ess_reserve_mw"];

/// Contents of `metadata.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub schema_version: u32,
    pub generator: String,
    pub case_name: String,
    pub scenario_name: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: HorizonConfig,
    pub modes: Vec<ModeMetadata>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeMetadata {
    pub mode: String,
    pub total_cost: f64,
    pub nadir_failures: usize,
    pub frequency_failures: usize,
    pub linear_violations: usize,
    pub loss_gap: f64,
}

/// `x` with 9 significant digits, without trailing zeros.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&exp) {
        return format!("{x:.8e}");
    }
    let s = format!("{:.*}", (8 - exp).max(0) as usize, x);
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig).unwrap_or_default()
}

fn writer(dir: &Path, name: &str, header: &[&str]) -> Result<csv::Writer<fs::File>, IoError> {
    let mut w = csv::Writer::from_path(dir.join(name))?;
    w.write_record(header)?;
    Ok(w)
}

/// Writes `committed.csv`, `allocation.csv`, `frequency.csv`,
/// `reserves.csv`, `summary.csv` and `metadata.json` into `dir`, one block
/// of rows per report.
pub fn save_report(
    dir: impl AsRef<Path>,
    case: &DispatchCase,
    scenario: &ScenarioTimeline,
    cfg: &HorizonConfig,
    reports: &[&RunReport],
) -> Result<RunMetadata, IoError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| IoError::File {
        path: dir.to_path_buf(),
        source,
    })?;

    let mut committed = writer(dir, "committed.csv", &COMMITTED_COLUMNS)?;
    let mut allocation = writer(dir, "allocation.csv", &ALLOCATION_COLUMNS)?;
    let mut frequency = writer(dir, "frequency.csv", &FREQUENCY_COLUMNS)?;
    let mut reserves = writer(dir, "reserves.csv", &RESERVES_COLUMNS)?;
    let mut summary = writer(dir, "summary.csv", &SUMMARY_COLUMNS)?;

    for r in reports {
        let mode = r.mode.label();
        for c in &r.committed {
            let s = &c.solution;
            let head = [mode.to_string(), c.index.to_string(), c.solve.to_string(), c.lead.to_string()];
            let mut row = |kind: &str, unit: &str, bus: usize, p: f64, res: f64, e: Option<f64>, l: Option<f64>| {
                let mut rec = head.to_vec();
                rec.extend([
                    kind.to_string(),
                    unit.to_string(),
                    bus.to_string(),
                    format_sig(p),
                    format_sig(res),
                    opt(e),
                    opt(l),
                ]);
                committed.write_record(&rec)
            };
            for (i, g) in case.generators.iter().enumerate() {
                row("generator", &g.name, g.bus, s.p[i], s.rg[i], None, None)?;
            }
            for (j, u) in case.res.iter().enumerate() {
                row("res", &u.name, u.bus, s.w_sche[j], s.rw[j], None, None)?;
            }
            for (k, u) in case.ess.iter().enumerate() {
                row("ess", &u.name, u.bus, s.p_ess[k], s.re[k], Some(s.e[k]), Some(s.loss[k]))?;
            }

            let period = c.index.to_string();
            let mut alloc = |kind: &str, unit: &str, h: f64, d: f64| {
                allocation.write_record([mode, &period, kind, unit, &format_sig(h), &format_sig(d)])
            };
            for (j, u) in case.res.iter().enumerate() {
                alloc("res", &u.name, s.h_res[j], s.d_res[j])?;
            }
            for (k, u) in case.ess.iter().enumerate() {
                alloc("ess", &u.name, s.h_ess[k], s.d_ess[k])?;
            }
            alloc("system", "system", s.h_sys, s.d_sys)?;
        }

        for (p, c) in frequency_timeline(r, case).iter().zip(&r.committed) {
            frequency.write_record([
                mode.to_string(),
                p.index.to_string(),
                format_sig(c.total_load),
                format_sig(p.disturbance_pu),
                format_sig(p.h_sys),
                format_sig(p.d_sys),
                format_sig(p.rocof_max),
                format_sig(p.delta_f_ss),
                format_sig(p.delta_f_max),
                p.rocof_ok.to_string(),
                p.steady_state_ok.to_string(),
                p.nadir_ok.to_string(),
                format_sig(c.solution.cost.total()),
            ])?;
        }

        for s in &r.solves {
            for (t, (rw, re)) in s.res_reserve.iter().zip(&s.ess_reserve).enumerate() {
                reserves.write_record([
                    mode.to_string(),
                    s.solve.to_string(),
                    s.start.to_string(),
                    (t + 1).to_string(),
                    (s.start + t).to_string(),
                    format_sig(*rw),
                    format_sig(*re),
                ])?;
            }
        }

        let t = &r.totals;
        summary.write_record([
            mode.to_string(),
            format_sig(t.cost.fuel),
            format_sig(t.cost.res_reserve),
            format_sig(t.cost.ess_reserve),
            format_sig(t.curtailment_pct),
        ])?;
    }
    for w in [&mut committed, &mut allocation, &mut frequency, &mut reserves, &mut summary] {
        w.flush().map_err(|source| IoError::File {
            path: dir.to_path_buf(),
            source,
        })?;
    }

    let meta = RunMetadata {
        schema_version: SCHEMA_VERSION,
        generator: concat!("fcsd ", env!("CARGO_PKG_VERSION")).into(),
        case_name: case.name.clone(),
        scenario_name: scenario.name.clone(),
        seed: scenario.seed,
        config_hash: config_hash(case, scenario, cfg)?,
        config: *cfg,
        modes: reports
            .iter()
            .map(|r| ModeMetadata {
                mode: r.mode.label().into(),
                total_cost: r.totals.total_cost,
                nadir_failures: r.nadir_failures(),
                frequency_failures: r.frequency_failures(),
                linear_violations: r.linear_violations(),
                loss_gap: r.loss_gap,
            })
            .collect(),
    };
    let path = dir.join("metadata.json");
    fs::write(&path, to_canonical_json(&meta)?).map_err(|source| IoError::File { path, source })?;
    Ok(meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(3284871.123456), "3284871.12");
        assert_eq!(format_sig(-0.1234567891), "-0.123456789");
        assert_eq!(format_sig(13.5), "13.5");
        assert_eq!(format_sig(1e-7), "1.00000000e-7");
        assert_eq!(format_sig(1.234e20), "1.23400000e20");
        assert_eq!(format_sig(-1e-300), "-1.00000000e-300");
        let x: f64 = 2.0_f64.sqrt() * 1000.0;
        let back: f64 = format_sig(x).parse().unwrap();
        assert!((back - x).abs() <= 5e-9 * x);
    }
}
