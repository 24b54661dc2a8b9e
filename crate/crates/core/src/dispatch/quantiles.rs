//! Right-hand sides of the reformulated chance constraints.

use serde::{Deserialize, Serialize};

use super::{DispatchCase, DispatchError};
use crate::uncertainty::{affine_project, Gmm};

/// Quantiles of one period, all in MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    /// `Q(Σ W̃ | α_Gu)`.
    pub total_up: f64,
    /// `Q(Σ W̃ | 1 − α_Gd)`.
    pub total_down: f64,
    /// `Q(W̃_j | α_Rw)` per RES.
    pub res: Vec<f64>,
    /// `Q(Σ s_aff W̃ | 1 − α_L+)` per line.
    pub line_up: Vec<f64>,
    /// `Q(Σ −s_aff W̃ | 1 − α_L−)` per line.
    pub line_down: Vec<f64>,
}

/// PTDF of generator-weighted affine regulation on line `l`:
/// `M = Σ s_i β_i` and `s_aff,j = s_j − M`.
pub(crate) fn affine_ptdf(case: &DispatchCase, l: usize) -> (f64, Vec<f64>) {
    let line = &case.network.lines[l];
    let m: f64 = case.generators.iter().map(|g| line.ptdf[g.bus] * g.beta).sum();
    let s_aff = case.res.iter().map(|r| line.ptdf[r.bus] - m).collect();
    (m, s_aff)
}

pub fn reformulate_quantiles(case: &DispatchCase, gmm: Option<&Gmm>) -> Result<QuantileTable, DispatchError> {
    let n_lines = case.network.lines.len();
    let Some(g) = gmm.filter(|_| !case.res.is_empty()) else {
        return Ok(QuantileTable {
            total_up: 0.0,
            total_down: 0.0,
            res: Vec::new(),
            line_up: vec![0.0; n_lines],
            line_down: vec![0.0; n_lines],
        });
    };
    let a = &case.probabilities;
    let nw = case.res.len();
    let ones = vec![1.0; nw];
    let total = affine_project(g, &ones, 0.0)?;
    let res = (0..nw)
        .map(|j| {
            let mut e = vec![0.0; nw];
            e[j] = 1.0;
            affine_project(g, &e, 0.0)?.quantile(a.res_reserve)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut line_up = Vec::with_capacity(n_lines);
    let mut line_down = Vec::with_capacity(n_lines);
    for l in 0..n_lines {
        let (_, s_aff) = affine_ptdf(case, l);
        line_up.push(affine_project(g, &s_aff, 0.0)?.quantile(1.0 - a.line_up)?);
        let neg: Vec<f64> = s_aff.iter().map(|s| -s).collect();
        line_down.push(affine_project(g, &neg, 0.0)?.quantile(1.0 - a.line_down)?);
    }
    Ok(QuantileTable {
        total_up: total.quantile(a.gen_up)?,
        total_down: total.quantile(1.0 - a.gen_down)?,
        res,
        line_up,
        line_down,
    })
}
