//! QP assembly.

use serde::{Deserialize, Serialize};

use super::quantiles::{affine_ptdf, reformulate_quantiles, QuantileTable};
use super::{BuildOptions, DispatchCase, DispatchError, Mode, Window};
use crate::cha::HalfspaceSet;
use crate::qp::{QpBuilder, QpProblem, SparseRow};

/// Column indices of one period's decision variables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeriodVars {
    pub p: Vec<usize>,
    pub rg: Vec<usize>,
    pub ws: Vec<usize>,
    pub rw: Vec<usize>,
    pub h_res: Vec<usize>,
    pub d_res: Vec<usize>,
    pub p_ess: Vec<usize>,
    pub re: Vec<usize>,
    pub e: Vec<usize>,
    pub loss: Vec<usize>,
    pub h_ess: Vec<usize>,
    pub d_ess: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarIndex {
    pub periods: Vec<PeriodVars>,
    pub n_vars: usize,
}

#[derive(Debug, Clone)]
pub struct BuiltQp {
    pub problem: QpProblem,
    pub index: VarIndex,
    pub quantiles: Vec<QuantileTable>,
    /// No-load costs, left out of the QP objective.
    pub constant: f64,
    /// Equality-row index of each period's power balance.
    pub balance_rows: Vec<usize>,
}

/// Floor on the forecast used in the RES reserve cost coefficient, as a
/// fraction of capacity; keeps `rwc/W_fore` finite at zero output.
pub(crate) const W_FORE_FLOOR: f64 = 1e-3;

pub(crate) fn rwc_coefficient(case: &DispatchCase, j: usize, w_fore: f64) -> f64 {
    case.costs.rwc / w_fore.max(W_FORE_FLOOR * case.res[j].cap)
}

pub(crate) fn rec_coefficient(case: &DispatchCase, k: usize) -> f64 {
    case.costs.rec / case.ess[k].p_max
}

pub(crate) fn gen_reserve_floor(case: &DispatchCase, i: usize) -> f64 {
    let g = &case.generators[i];
    g.inv_droop * g.p_max * case.limits.max_steady_state / case.limits.f0
}

/// Per-MW reserve a unit must hold for each unit of droop and inertia:
/// `(f_max/f0, 2·RoCoF_max/f0)`.
pub(crate) fn reserve_factors(case: &DispatchCase) -> (f64, f64) {
    let l = &case.limits;
    (l.max_deviation / l.f0, 2.0 * l.max_rocof / l.f0)
}

pub fn build_qp(
    case: &DispatchCase,
    window: &Window,
    mode: Mode,
    cha: &[HalfspaceSet],
    opts: &BuildOptions,
) -> Result<BuiltQp, DispatchError> {
    case.validate()?;
    window.validate(case)?;
    let beta_sum: f64 = case.generators.iter().map(|g| g.beta).sum();
    if !case.res.is_empty() && (beta_sum - 1.0).abs() > 1e-9 {
        return Err(DispatchError::Validation {
            field: "generators.beta".into(),
            msg: format!("participation factors sum to {beta_sum}; normalize the case first"),
        });
    }
    let freq_rows = opts.frequency_rows(mode);
    if freq_rows && cha.len() != window.len() {
        return Err(DispatchError::Validation {
            field: "cha".into(),
            msg: format!("{} half-plane sets for {} periods", cha.len(), window.len()),
        });
    }
    structural_check(case, window)?;

    let quantiles = window
        .periods
        .iter()
        .map(|p| reformulate_quantiles(case, p.gmm.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;

    let pb = case.p_base;
    let f0 = case.limits.f0;
    let th = case.thermal_aggregate();
    let (k_droop, k_inertia) = reserve_factors(case);
    let dt = window.step_hours;
    let margin = opts.frequency_margin;

    let mut b = QpBuilder::new();
    let mut periods: Vec<PeriodVars> = Vec::with_capacity(window.len());
    let mut balance_rows = Vec::with_capacity(window.len());

    for (t, input) in window.periods.iter().enumerate() {
        let q = &quantiles[t];
        let mut v = PeriodVars::default();

        for (i, g) in case.generators.iter().enumerate() {
            let p = b.add_var(format!("P[{t}][{}]", g.name), g.p_min, g.p_max, g.b);
            b.add_quad(p, p, 2.0 * g.a);
            let rg = b.add_var(format!("Rg[{t}][{}]", g.name), gen_reserve_floor(case, i), g.p_max, g.rgc);
            v.p.push(p);
            v.rg.push(rg);
        }
        for (j, r) in case.res.iter().enumerate() {
            let wf = input.w_fore[j];
            let ws = b.add_var(format!("Ws[{t}][{}]", r.name), 0.0, wf, 0.0);
            let rw = b.add_var(format!("Rw[{t}][{}]", r.name), 0.0, wf, 0.0);
            b.add_quad(rw, rw, 2.0 * rwc_coefficient(case, j, wf));
            let (h_lo, h_hi, d_lo, d_hi) = match mode {
                Mode::Online => (0.0, r.h_max, 0.0, r.d_max),
                Mode::Fixed => (r.fixed_h, r.fixed_h, r.fixed_d, r.fixed_d),
            };
            v.ws.push(ws);
            v.rw.push(rw);
            v.h_res.push(b.add_var(format!("H[{t}][{}]", r.name), h_lo, h_hi, 0.0));
            v.d_res.push(b.add_var(format!("D[{t}][{}]", r.name), d_lo, d_hi, 0.0));
        }
        for (k, e) in case.ess.iter().enumerate() {
            let p = b.add_var(format!("P[{t}][{}]", e.name), -e.p_max, e.p_max, 0.0);
            let re = b.add_var(format!("Re[{t}][{}]", e.name), 0.0, e.p_max, 0.0);
            b.add_quad(re, re, 2.0 * rec_coefficient(case, k));
            let en = b.add_var(format!("E[{t}][{}]", e.name), e.e_min, e.e_max, 0.0);
            let loss = b.add_var(format!("Loss[{t}][{}]", e.name), 0.0, f64::INFINITY, 1.0);
            let (h_lo, h_hi, d_lo, d_hi) = match mode {
                Mode::Online => (0.0, e.h_max, 0.0, e.d_max),
                Mode::Fixed => (e.fixed_h, e.fixed_h, e.fixed_d, e.fixed_d),
            };
            v.p_ess.push(p);
            v.re.push(re);
            v.e.push(en);
            v.loss.push(loss);
            v.h_ess.push(b.add_var(format!("H[{t}][{}]", e.name), h_lo, h_hi, 0.0));
            v.d_ess.push(b.add_var(format!("D[{t}][{}]", e.name), d_lo, d_hi, 0.0));
        }

        // Power balance.
        let row: SparseRow = v.p.iter().chain(&v.ws).chain(&v.p_ess).map(|&c| (c, 1.0)).collect();
        balance_rows.push(b.add_eq(format!("balance[{t}]"), row, input.total_load()));

        // Generators: capacity with reserve, ramps, affine regulation.
        let w_total: SparseRow = v.rw.iter().chain(&v.ws).map(|&c| (c, 1.0)).collect();
        for (i, g) in case.generators.iter().enumerate() {
            b.add_le(format!("gen_cap[{t}][{}]", g.name), vec![(v.p[i], 1.0), (v.rg[i], 1.0)], g.p_max);
            let (prev, base) = if t == 0 {
                (None, window.initial.p_gen[i])
            } else {
                (Some(periods[t - 1].p[i]), 0.0)
            };
            let mut up = vec![(v.p[i], 1.0)];
            let mut dn = vec![(v.p[i], -1.0)];
            if let Some(pp) = prev {
                up.push((pp, -1.0));
                dn.push((pp, 1.0));
            }
            b.add_le(format!("ramp_up[{t}][{}]", g.name), up, g.ramp_up + base);
            b.add_le(format!("ramp_down[{t}][{}]", g.name), dn, g.ramp_down - base);

            if g.beta > 0.0 && !case.res.is_empty() {
                let mut row = vec![(v.p[i], 1.0), (v.rg[i], 1.0)];
                row.extend(w_total.iter().map(|&(c, _)| (c, g.beta)));
                b.add_le(format!("affine_up[{t}][{}]", g.name), row, g.p_max + g.beta * q.total_up);
                let mut row = vec![(v.p[i], 1.0)];
                row.extend(w_total.iter().map(|&(c, _)| (c, g.beta)));
                b.add_ge(format!("affine_down[{t}][{}]", g.name), row, g.p_min + g.beta * q.total_down);
            }
        }

        // RES split and chance-constrained reserve.
        for (j, r) in case.res.iter().enumerate() {
            b.add_eq(
                format!("res_split[{t}][{}]", r.name),
                vec![(v.ws[j], 1.0), (v.rw[j], 1.0)],
                input.w_fore[j],
            );
            b.add_le(
                format!("res_reserve[{t}][{}]", r.name),
                vec![
                    (v.ws[j], 1.0),
                    (v.d_res[j], r.cap * k_droop),
                    (v.h_res[j], r.cap * k_inertia),
                ],
                q.res[j],
            );
        }

        // ESS energy, headroom, loss relaxation and reserve.
        for (k, e) in case.ess.iter().enumerate() {
            let mut row = vec![(v.e[k], 1.0), (v.p_ess[k], dt), (v.loss[k], dt)];
            let rhs = if t == 0 {
                window.initial.soc[k]
            } else {
                row.push((periods[t - 1].e[k], -1.0));
                0.0
            };
            b.add_eq(format!("soc[{t}][{}]", e.name), row, rhs);
            b.add_le(format!("ess_cap[{t}][{}]", e.name), vec![(v.p_ess[k], 1.0), (v.re[k], 1.0)], e.p_max);
            b.add_le(
                format!("loss_discharge[{t}][{}]", e.name),
                vec![(v.p_ess[k], 1.0 / e.eta_discharge - 1.0), (v.loss[k], -1.0)],
                0.0,
            );
            b.add_le(
                format!("loss_charge[{t}][{}]", e.name),
                vec![(v.p_ess[k], e.eta_charge - 1.0), (v.loss[k], -1.0)],
                0.0,
            );
            b.add_le(
                format!("ess_reserve[{t}][{}]", e.name),
                vec![
                    (v.d_ess[k], e.p_max * k_droop),
                    (v.h_ess[k], e.p_max * k_inertia),
                    (v.re[k], -1.0),
                ],
                0.0,
            );
        }

        // Frequency security on the aggregated inertia and damping.
        if freq_rows {
            let h_terms: SparseRow = v
                .h_res
                .iter()
                .zip(&case.res)
                .map(|(&c, r)| (c, r.cap / pb))
                .chain(v.h_ess.iter().zip(&case.ess).map(|(&c, e)| (c, e.p_max / pb)))
                .collect();
            let d_terms: SparseRow = v
                .d_res
                .iter()
                .zip(&case.res)
                .map(|(&c, r)| (c, r.cap / pb))
                .chain(v.d_ess.iter().zip(&case.ess).map(|(&c, e)| (c, e.p_max / pb)))
                .collect();
            let dp = input.disturbance_pu;
            let mut rows: Vec<(String, SparseRow, f64)> = vec![
                (
                    format!("rocof[{t}]"),
                    h_terms.clone(),
                    f0 * dp / (2.0 * case.limits.max_rocof) - th.inertia,
                ),
                (
                    format!("steady_state[{t}]"),
                    d_terms.clone(),
                    f0 * dp / case.limits.max_steady_state - th.droop_gain - case.d0,
                ),
            ];
            for (p, hs) in cha[t].planes.iter().enumerate() {
                let row = h_terms
                    .iter()
                    .map(|&(c, a)| (c, hs.w_h * a))
                    .chain(d_terms.iter().map(|&(c, a)| (c, hs.w_d * a)))
                    .collect();
                rows.push((
                    format!("nadir[{t}][{p}]"),
                    row,
                    -hs.b - hs.w_h * th.inertia - hs.w_d * case.d0,
                ));
            }
            for (name, row, rhs) in rows {
                let rhs = rhs + margin * (1.0 + rhs.abs());
                if row.iter().all(|e| e.1 == 0.0) {
                    if rhs > 0.0 {
                        return Err(DispatchError::Structural {
                            period: t,
                            msg: format!("{name} cannot be met without RES/ESS support (short by {rhs})"),
                        });
                    }
                    continue;
                }
                b.add_ge(name, row, rhs);
            }
        }

        // Line flows under affine regulation.
        for (l, line) in case.network.lines.iter().enumerate() {
            let (m, s_aff) = affine_ptdf(case, l);
            let mut row: SparseRow = Vec::new();
            for (i, g) in case.generators.iter().enumerate() {
                row.push((v.p[i], line.ptdf[g.bus]));
            }
            for j in 0..case.res.len() {
                row.push((v.rw[j], -s_aff[j]));
                row.push((v.ws[j], m));
            }
            for (k, e) in case.ess.iter().enumerate() {
                row.push((v.p_ess[k], line.ptdf[e.bus]));
            }
            row.retain(|e| e.1 != 0.0);
            let load_flow: f64 = case
                .loads
                .iter()
                .zip(&input.loads)
                .map(|(d, &val)| line.ptdf[d.bus] * val)
                .sum();
            let neg: SparseRow = row.iter().map(|&(c, a)| (c, -a)).collect();
            b.add_le(format!("line_up[{t}][{}]", line.name), row, line.limit + load_flow - q.line_up[l]);
            b.add_le(format!("line_down[{t}][{}]", line.name), neg, line.limit - load_flow - q.line_down[l]);
        }

        periods.push(v);
    }

    let n_vars = b.n_vars();
    let problem = b.build()?;
    let constant = window.len() as f64 * case.generators.iter().map(|g| g.c).sum::<f64>();
    Ok(BuiltQp {
        problem,
        index: VarIndex { periods, n_vars },
        quantiles,
        constant,
        balance_rows,
    })
}

/// Capacity shortfalls that no dispatch can repair.
fn structural_check(case: &DispatchCase, window: &Window) -> Result<(), DispatchError> {
    let gen_max: f64 = (0..case.generators.len())
        .map(|i| case.generators[i].p_max - gen_reserve_floor(case, i))
        .sum();
    let gen_min: f64 = case.generators.iter().map(|g| g.p_min).sum();
    let ess_max: f64 = case.ess.iter().map(|e| e.p_max).sum();
    for (t, p) in window.periods.iter().enumerate() {
        let load = p.total_load();
        let res: f64 = p.w_fore.iter().sum();
        if gen_max + res + ess_max < load {
            return Err(DispatchError::Structural {
                period: t,
                msg: format!(
                    "load {load:.3} MW exceeds available supply {:.3} MW \
                     (thermal after reserve {gen_max:.3}, RES forecast {res:.3}, ESS {ess_max:.3})",
                    gen_max + res + ess_max
                ),
            });
        }
        if gen_min - ess_max > load {
            return Err(DispatchError::Structural {
                period: t,
                msg: format!(
                    "thermal minimum output {gen_min:.3} MW exceeds load {load:.3} MW plus ESS charging {ess_max:.3} MW"
                ),
            });
        }
    }
    Ok(())
}
