//! Convex quadratic programs:
//!
//! ```text
//!     minimize    ½ xᵀQx + cᵀx
//!     subject to  A_eq x = b_eq,  A_in x ≤ b_in,  lb ≤ x ≤ ub
//! ```
//!
//! Solved with the Clarabel interior-point method. Duals follow the sign
//! convention `Qx + c + A_eqᵀy + A_inᵀz − ν = 0` with `z ≥ 0` and
//! `ν = ν_lower − ν_upper` for the variable bounds.

mod dump;
mod psd;

pub use dump::write_coo;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch in {0}")]
    Dimension(String),
    #[error("Q is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("Q is not positive semidefinite (component containing {variable})")]
    NotPsd { variable: String },
    #[error("variable {name} has lower bound {lb} above upper bound {ub}")]
    InvertedBounds { name: String, lb: f64, ub: f64 },
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("solver setup failed: {0}")]
    Setup(String),
}

/// Sparse row: `(column, coefficient)` pairs, duplicates summed at build.
pub type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpProblem {
    n: usize,
    /// Upper-triangle entries `(i, j, v)` with `i ≤ j`, each representing
    /// `Q[i][j] = Q[j][i] = v`.
    q_upper: Vec<(usize, usize, f64)>,
    c: Vec<f64>,
    a_eq: Vec<SparseRow>,
    b_eq: Vec<f64>,
    a_in: Vec<SparseRow>,
    b_in: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    var_names: Vec<String>,
    eq_names: Vec<String>,
    in_names: Vec<String>,
}

/// Incremental construction; `build` validates and probes Q for PSD.
#[derive(Debug, Clone, Default)]
pub struct QpBuilder {
    q: Vec<(usize, usize, f64)>,
    c: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    var_names: Vec<String>,
    a_eq: Vec<SparseRow>,
    b_eq: Vec<f64>,
    eq_names: Vec<String>,
    a_in: Vec<SparseRow>,
    b_in: Vec<f64>,
    in_names: Vec<String>,
}

impl QpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lb: f64, ub: f64, cost: f64) -> usize {
        self.var_names.push(name.into());
        self.lower.push(lb);
        self.upper.push(ub);
        self.c.push(cost);
        self.c.len() - 1
    }

    pub fn add_linear_cost(&mut self, var: usize, cost: f64) {
        self.c[var] += cost;
    }

    /// Adds `½·v·x_i²` when `i == j`, otherwise `v·x_i·x_j`.
    pub fn add_quad(&mut self, i: usize, j: usize, v: f64) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.q.push((a, b, v));
    }

    pub fn add_eq(&mut self, name: impl Into<String>, row: SparseRow, rhs: f64) -> usize {
        self.eq_names.push(name.into());
        self.a_eq.push(row);
        self.b_eq.push(rhs);
        self.a_eq.len() - 1
    }

    pub fn add_le(&mut self, name: impl Into<String>, row: SparseRow, rhs: f64) -> usize {
        self.in_names.push(name.into());
        self.a_in.push(row);
        self.b_in.push(rhs);
        self.a_in.len() - 1
    }

    /// `row ≥ rhs`, stored as `−row ≤ −rhs`.
    pub fn add_ge(&mut self, name: impl Into<String>, row: SparseRow, rhs: f64) -> usize {
        self.add_le(name, row.into_iter().map(|(j, v)| (j, -v)).collect(), -rhs)
    }

    pub fn build(self) -> Result<QpProblem, QpError> {
        let n = self.c.len();
        let merge = |row: SparseRow| -> Result<SparseRow, QpError> {
            let mut row = row;
            if let Some(&(j, _)) = row.iter().find(|(j, _)| *j >= n) {
                return Err(QpError::Dimension(format!("column {j} >= {n}")));
            }
            row.sort_by_key(|e| e.0);
            let mut out: SparseRow = Vec::with_capacity(row.len());
            for (j, v) in row {
                match out.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => out.push((j, v)),
                }
            }
            out.retain(|e| e.1 != 0.0);
            Ok(out)
        };
        let a_eq = self.a_eq.into_iter().map(merge).collect::<Result<Vec<_>, _>>()?;
        let a_in = self.a_in.into_iter().map(merge).collect::<Result<Vec<_>, _>>()?;

        let mut q = self.q;
        if let Some(&(_, j, _)) = q.iter().find(|e| e.1 >= n) {
            return Err(QpError::Dimension(format!("Q column {j} >= {n}")));
        }
        q.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut q_upper: Vec<(usize, usize, f64)> = Vec::with_capacity(q.len());
        for (i, j, v) in q {
            match q_upper.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => q_upper.push((i, j, v)),
            }
        }
        q_upper.retain(|e| e.2 != 0.0);

        let p = QpProblem {
            n,
            q_upper,
            c: self.c,
            a_eq,
            b_eq: self.b_eq,
            a_in,
            b_in: self.b_in,
            lower: self.lower,
            upper: self.upper,
            var_names: self.var_names,
            eq_names: self.eq_names,
            in_names: self.in_names,
        };
        p.validate()?;
        Ok(p)
    }
}

impl QpProblem {
    /// Dense constructor, mainly for tests and small problems. `q` must be
    /// symmetric within 1e-12.
    #[allow(clippy::too_many_arguments)]
    pub fn from_dense(
        q: &[Vec<f64>],
        c: &[f64],
        a_eq: &[Vec<f64>],
        b_eq: &[f64],
        a_in: &[Vec<f64>],
        b_in: &[f64],
        lower: &[f64],
        upper: &[f64],
    ) -> Result<Self, QpError> {
        let n = c.len();
        if q.len() != n || q.iter().any(|r| r.len() != n) {
            return Err(QpError::Dimension("Q".into()));
        }
        if lower.len() != n || upper.len() != n {
            return Err(QpError::Dimension("bounds".into()));
        }
        if a_eq.len() != b_eq.len() || a_in.len() != b_in.len() {
            return Err(QpError::Dimension("constraint right-hand sides".into()));
        }
        if a_eq.iter().chain(a_in).any(|r| r.len() != n) {
            return Err(QpError::Dimension("constraint rows".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if (q[i][j] - q[j][i]).abs() > 1e-12 {
                    return Err(QpError::NotSymmetric { row: i, col: j });
                }
            }
        }
        let mut b = QpBuilder::new();
        for i in 0..n {
            b.add_var(format!("x{i}"), lower[i], upper[i], c[i]);
        }
        for i in 0..n {
            for j in i..n {
                let v = if i == j { q[i][i] } else { 0.5 * (q[i][j] + q[j][i]) };
                if v != 0.0 {
                    b.add_quad(i, j, v);
                }
            }
        }
        let sparse = |r: &Vec<f64>| r.iter().copied().enumerate().filter(|e| e.1 != 0.0).collect();
        for (k, (r, &rhs)) in a_eq.iter().zip(b_eq).enumerate() {
            b.add_eq(format!("eq{k}"), sparse(r), rhs);
        }
        for (k, (r, &rhs)) in a_in.iter().zip(b_in).enumerate() {
            b.add_le(format!("in{k}"), sparse(r), rhs);
        }
        b.build()
    }

    fn validate(&self) -> Result<(), QpError> {
        let n = self.n;
        if self.lower.len() != n || self.upper.len() != n || self.var_names.len() != n {
            return Err(QpError::Dimension("variables".into()));
        }
        if self.b_eq.len() != self.a_eq.len() || self.b_in.len() != self.a_in.len() {
            return Err(QpError::Dimension("constraint right-hand sides".into()));
        }
        for i in 0..n {
            let (lb, ub) = (self.lower[i], self.upper[i]);
            if lb.is_nan() || ub.is_nan() || lb == f64::INFINITY || ub == f64::NEG_INFINITY {
                return Err(QpError::NonFinite(format!("bounds of {}", self.var_names[i])));
            }
            if lb > ub {
                return Err(QpError::InvertedBounds {
                    name: self.var_names[i].clone(),
                    lb,
                    ub,
                });
            }
            if !self.c[i].is_finite() {
                return Err(QpError::NonFinite(format!("cost of {}", self.var_names[i])));
            }
        }
        let rows = self
            .a_eq
            .iter()
            .zip(&self.b_eq)
            .zip(&self.eq_names)
            .chain(self.a_in.iter().zip(&self.b_in).zip(&self.in_names));
        for ((row, rhs), name) in rows {
            if !rhs.is_finite() || row.iter().any(|e| !e.1.is_finite()) {
                return Err(QpError::NonFinite(name.clone()));
            }
        }
        if self.q_upper.iter().any(|e| !e.2.is_finite()) {
            return Err(QpError::NonFinite("Q".into()));
        }
        if let Some(var) = psd::first_non_psd_component(n, &self.q_upper) {
            return Err(QpError::NotPsd {
                variable: self.var_names[var].clone(),
            });
        }
        Ok(())
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn n_eq(&self) -> usize {
        self.a_eq.len()
    }

    pub fn n_in(&self) -> usize {
        self.a_in.len()
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn eq_names(&self) -> &[String] {
        &self.eq_names
    }

    pub fn in_names(&self) -> &[String] {
        &self.in_names
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn linear_cost(&self) -> &[f64] {
        &self.c
    }

    /// Upper-triangle entries of `Q` as `(i, j, v)`, `i ≤ j`.
    pub fn q_entries(&self) -> &[(usize, usize, f64)] {
        &self.q_upper
    }

    pub fn eq_rows(&self) -> (&[SparseRow], &[f64]) {
        (&self.a_eq, &self.b_eq)
    }

    /// Rows of `A_in·x ≤ b_in`.
    pub fn in_rows(&self) -> (&[SparseRow], &[f64]) {
        (&self.a_in, &self.b_in)
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut v: f64 = self.c.iter().zip(x).map(|(c, x)| c * x).sum();
        for &(i, j, q) in &self.q_upper {
            v += if i == j { 0.5 * q * x[i] * x[i] } else { q * x[i] * x[j] };
        }
        v
    }

    /// `Qx`.
    pub fn q_times(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for &(i, j, q) in &self.q_upper {
            out[i] += q * x[j];
            if i != j {
                out[j] += q * x[i];
            }
        }
        out
    }

    pub fn eq_activity(&self, x: &[f64]) -> Vec<f64> {
        self.a_eq.iter().map(|r| dot(r, x)).collect()
    }

    pub fn in_activity(&self, x: &[f64]) -> Vec<f64> {
        self.a_in.iter().map(|r| dot(r, x)).collect()
    }

    /// Largest absolute entry across all problem data.
    pub fn data_norm(&self) -> f64 {
        let mut m = 0.0_f64;
        let mut see = |v: f64| {
            if v.is_finite() {
                m = m.max(v.abs())
            }
        };
        self.q_upper.iter().for_each(|e| see(e.2));
        self.c.iter().for_each(|&v| see(v));
        self.a_eq.iter().chain(&self.a_in).flatten().for_each(|e| see(e.1));
        self.b_eq.iter().chain(&self.b_in).for_each(|&v| see(v));
        self.lower.iter().chain(&self.upper).for_each(|&v| see(v));
        m
    }

    /// Worst primal violation of `x` in unscaled units.
    pub fn primal_violation(&self, x: &[f64]) -> f64 {
        let eq = self
            .eq_activity(x)
            .iter()
            .zip(&self.b_eq)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let ineq = self
            .in_activity(x)
            .iter()
            .zip(&self.b_in)
            .fold(0.0_f64, |m, (a, b)| m.max(a - b));
        let bounds = (0..self.n).fold(0.0_f64, |m, i| {
            m.max(self.lower[i] - x[i]).max(x[i] - self.upper[i])
        });
        eq.max(ineq).max(bounds)
    }

    pub(crate) fn q_upper(&self) -> &[(usize, usize, f64)] {
        &self.q_upper
    }
}

fn dot(row: &SparseRow, x: &[f64]) -> f64 {
    row.iter().map(|&(j, v)| v * x[j]).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub name: String,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpResult {
    pub status: QpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// One per equality row.
    pub y_eq: Vec<f64>,
    /// One per inequality row, nonnegative.
    pub z_in: Vec<f64>,
    /// `ν_lower − ν_upper` per variable.
    pub bound_duals: Vec<f64>,
    /// Scaled by `1 + ‖data‖∞`.
    pub residuals: Residuals,
    pub iterations: u32,
    /// Most-violated constraints of the elastic relaxation, if infeasible.
    pub diagnostics: Vec<Violation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: u32,
    /// Report this many constraints when infeasible.
    pub n_diagnostics: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 200,
            n_diagnostics: 10,
        }
    }
}

pub fn solve_qp(p: &QpProblem, opts: &SolveOptions) -> Result<QpResult, QpError> {
    let raw = solve_raw(p, opts, false)?;
    let mut result = unpack(p, &raw, opts);
    if result.status == QpStatus::Infeasible {
        result.diagnostics = infeasibility_report(p, opts)?;
    }
    Ok(result)
}

/// Row layout handed to Clarabel.
struct Layout {
    /// Bounds with `lb == ub` become equality rows after the real ones.
    fixed: Vec<usize>,
    upper: Vec<usize>,
    lower: Vec<usize>,
}

struct Raw {
    layout: Layout,
    status: SolverStatus,
    x: Vec<f64>,
    z: Vec<f64>,
    iterations: u32,
}

fn solve_raw(p: &QpProblem, opts: &SolveOptions, quiet_tol: bool) -> Result<Raw, QpError> {
    let n = p.n;
    let layout = Layout {
        fixed: (0..n).filter(|&i| p.lower[i] == p.upper[i]).collect(),
        upper: (0..n)
            .filter(|&i| p.lower[i] != p.upper[i] && p.upper[i].is_finite())
            .collect(),
        lower: (0..n)
            .filter(|&i| p.lower[i] != p.upper[i] && p.lower[i].is_finite())
            .collect(),
    };

    let (mut ri, mut ci, mut vv) = (Vec::new(), Vec::new(), Vec::new());
    let mut b = Vec::new();
    let mut push_row = |row: &[(usize, f64)], rhs: f64, b: &mut Vec<f64>| {
        let r = b.len();
        for &(j, v) in row {
            ri.push(r);
            ci.push(j);
            vv.push(v);
        }
        b.push(rhs);
    };
    for (row, &rhs) in p.a_eq.iter().zip(&p.b_eq) {
        push_row(row, rhs, &mut b);
    }
    for &i in &layout.fixed {
        push_row(&[(i, 1.0)], p.upper[i], &mut b);
    }
    let n_zero = b.len();
    for (row, &rhs) in p.a_in.iter().zip(&p.b_in) {
        push_row(row, rhs, &mut b);
    }
    for &i in &layout.upper {
        push_row(&[(i, 1.0)], p.upper[i], &mut b);
    }
    for &i in &layout.lower {
        push_row(&[(i, -1.0)], -p.lower[i], &mut b);
    }
    let m = b.len();
    let a = CscMatrix::new_from_triplets(m, n, ri, ci, vv);
    let (qi, qj, qv): (Vec<usize>, Vec<usize>, Vec<f64>) =
        p.q_upper.iter().fold((vec![], vec![], vec![]), |mut acc, &(i, j, v)| {
            acc.0.push(i);
            acc.1.push(j);
            acc.2.push(v);
            acc
        });
    let q = CscMatrix::new_from_triplets(n, n, qi, qj, qv);

    let mut cones = Vec::new();
    if n_zero > 0 {
        cones.push(SupportedConeT::ZeroConeT(n_zero));
    }
    if m > n_zero {
        cones.push(SupportedConeT::NonnegativeConeT(m - n_zero));
    }

    let tol = if quiet_tol { 1e-7 } else { (opts.tol * 1e-2).max(1e-10) };
    let settings = DefaultSettings {
        max_iter: opts.max_iter,
        verbose: false,
        tol_gap_abs: tol,
        tol_gap_rel: tol,
        tol_feas: tol,
        presolve_enable: false,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&q, &p.c, &a, &b, &cones, settings)
        .map_err(|e| QpError::Setup(e.to_string()))?;
    solver.solve();
    let sol = &solver.solution;
    Ok(Raw {
        layout,
        status: sol.status,
        x: sol.x.clone(),
        z: sol.z.clone(),
        iterations: sol.iterations,
    })
}

fn unpack(p: &QpProblem, raw: &Raw, opts: &SolveOptions) -> QpResult {
    let n = p.n;
    let n_eq = p.a_eq.len();
    let n_in = p.a_in.len();
    let z = &raw.z;
    let y_eq = z[..n_eq].to_vec();
    let mut bound_duals = vec![0.0; n];
    let mut k = n_eq;
    for &i in &raw.layout.fixed {
        // Row x_i = v enters stationarity as +z; in the ν convention that
        // is ν = −z.
        bound_duals[i] = -z[k];
        k += 1;
    }
    let z_in = z[k..k + n_in].to_vec();
    k += n_in;
    for &i in &raw.layout.upper {
        bound_duals[i] -= z[k];
        k += 1;
    }
    for &i in &raw.layout.lower {
        bound_duals[i] += z[k];
        k += 1;
    }

    let x = raw.x.clone();
    let residuals = residuals(p, &x, &y_eq, &z_in, &bound_duals);
    let status = match raw.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved if residuals.max() <= opts.tol => QpStatus::Optimal,
        SolverStatus::Solved | SolverStatus::AlmostSolved => QpStatus::NumericalFailure,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => QpStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => QpStatus::Unbounded,
        SolverStatus::MaxIterations | SolverStatus::MaxTime => QpStatus::IterationLimit,
        _ => QpStatus::NumericalFailure,
    };
    QpResult {
        status,
        objective: p.objective(&x),
        x,
        y_eq,
        z_in,
        bound_duals,
        residuals,
        iterations: raw.iterations,
        diagnostics: Vec::new(),
    }
}

/// KKT residuals in the original units, each divided by `1 + ‖data‖∞`.
pub fn residuals(p: &QpProblem, x: &[f64], y_eq: &[f64], z_in: &[f64], bound_duals: &[f64]) -> Residuals {
    let scale = 1.0 + p.data_norm();
    let mut grad = p.q_times(x);
    for (g, c) in grad.iter_mut().zip(&p.c) {
        *g += c;
    }
    for (row, &y) in p.a_eq.iter().zip(y_eq) {
        for &(j, v) in row {
            grad[j] += v * y;
        }
    }
    for (row, &z) in p.a_in.iter().zip(z_in) {
        for &(j, v) in row {
            grad[j] += v * z;
        }
    }
    let mut dual = 0.0_f64;
    for i in 0..p.n {
        dual = dual.max((grad[i] - bound_duals[i]).abs());
    }
    // Sign feasibility of the multipliers.
    dual = dual.max(z_in.iter().fold(0.0_f64, |m, &z| m.max(-z)));

    let mut comp = 0.0_f64;
    for (a, (&b, &z)) in p.in_activity(x).iter().zip(p.b_in.iter().zip(z_in)) {
        comp = comp.max((z * (b - a)).abs());
    }
    for i in 0..p.n {
        if p.lower[i] == p.upper[i] {
            continue;
        }
        let nu = bound_duals[i];
        // ν > 0 must sit on the lower bound, ν < 0 on the upper one.
        let gap = if nu > 0.0 { x[i] - p.lower[i] } else { p.upper[i] - x[i] };
        if nu != 0.0 {
            if gap.is_finite() {
                comp = comp.max((nu * gap).abs());
            } else {
                dual = dual.max(nu.abs());
            }
        }
    }
    Residuals {
        primal: p.primal_violation(x) / scale,
        dual: dual / scale,
        complementarity: comp / scale,
    }
}

/// Minimizes total constraint violation with hard variable bounds and
/// returns the most-violated named constraints.
fn infeasibility_report(p: &QpProblem, opts: &SolveOptions) -> Result<Vec<Violation>, QpError> {
    let mut b = QpBuilder::new();
    for i in 0..p.n {
        b.add_var(p.var_names[i].clone(), p.lower[i], p.upper[i], 0.0);
    }
    let mut slacks = Vec::new();
    for (k, (row, &rhs)) in p.a_eq.iter().zip(&p.b_eq).enumerate() {
        let sp = b.add_var("s+", 0.0, f64::INFINITY, 1.0);
        let sm = b.add_var("s-", 0.0, f64::INFINITY, 1.0);
        let mut r = row.clone();
        r.push((sp, -1.0));
        r.push((sm, 1.0));
        b.add_eq(p.eq_names[k].clone(), r, rhs);
        slacks.push((p.eq_names[k].clone(), vec![sp, sm]));
    }
    for (k, (row, &rhs)) in p.a_in.iter().zip(&p.b_in).enumerate() {
        let s = b.add_var("s", 0.0, f64::INFINITY, 1.0);
        let mut r = row.clone();
        r.push((s, -1.0));
        b.add_le(p.in_names[k].clone(), r, rhs);
        slacks.push((p.in_names[k].clone(), vec![s]));
    }
    let elastic = b.build()?;
    let raw = solve_raw(&elastic, opts, true)?;
    let mut out: Vec<Violation> = slacks
        .into_iter()
        .map(|(name, idx)| Violation {
            name,
            amount: idx.iter().map(|&i| raw.x[i].max(0.0)).sum(),
        })
        .filter(|v| v.amount > 1e-7)
        .collect();
    out.sort_by(|a, b| b.amount.total_cmp(&a.amount));
    out.truncate(opts.n_diagnostics);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn bound_constrained_scalar() {
        // min x² s.t. x ≥ 1
        let p = QpProblem::from_dense(&[vec![2.0]], &[0.0], &[], &[], &[], &[], &[1.0], &[INF]).unwrap();
        let r = solve_qp(&p, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, QpStatus::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-6);
        assert!((r.objective - 1.0).abs() < 1e-6);
        assert!((r.bound_duals[0] - 2.0).abs() < 1e-6, "{:?}", r.bound_duals);
    }

    #[test]
    fn equality_dual_sign() {
        // min ½(x²+y²) s.t. x + y = 2: stationarity x + y_eq = 0 at x = 1.
        let p = QpProblem::from_dense(
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[0.0, 0.0],
            &[vec![1.0, 1.0]],
            &[2.0],
            &[],
            &[],
            &[-INF, -INF],
            &[INF, INF],
        )
        .unwrap();
        let r = solve_qp(&p, &SolveOptions::default()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6);
        assert!((r.y_eq[0] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn fixed_bound_is_an_equality() {
        // min (x − 3)² with x fixed at 1: ν = 2x − 6 = −4.
        let p = QpProblem::from_dense(&[vec![2.0]], &[-6.0], &[], &[], &[], &[], &[1.0], &[1.0]).unwrap();
        let r = solve_qp(&p, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, QpStatus::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-9);
        assert!((r.bound_duals[0] + 4.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_names_the_culprits() {
        let mut b = QpBuilder::new();
        let x = b.add_var("x", 0.0, 10.0, 1.0);
        b.add_le("cap", vec![(x, 1.0)], 2.0);
        b.add_ge("demand", vec![(x, 1.0)], 5.0);
        b.add_le("harmless", vec![(x, 1.0)], 9.0);
        let p = b.build().unwrap();
        let r = solve_qp(&p, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, QpStatus::Infeasible);
        let names: Vec<&str> = r.diagnostics.iter().map(|v| v.name.as_str()).collect();
        assert!(!names.is_empty() && names.iter().all(|n| *n == "cap" || *n == "demand"), "{names:?}");
        let total: f64 = r.diagnostics.iter().map(|v| v.amount).sum();
        assert!((total - 3.0).abs() < 1e-5);
    }

    #[test]
    fn rejects_indefinite_q() {
        let err = QpProblem::from_dense(
            &[vec![1.0, 2.0], vec![2.0, 1.0]],
            &[0.0, 0.0],
            &[],
            &[],
            &[],
            &[],
            &[0.0, 0.0],
            &[1.0, 1.0],
        );
        assert!(matches!(err, Err(QpError::NotPsd { .. })));
    }

    #[test]
    fn rejects_asymmetric_and_inverted() {
        assert!(matches!(
            QpProblem::from_dense(&[vec![1.0, 0.5], vec![0.0, 1.0]], &[0.0; 2], &[], &[], &[], &[], &[0.0; 2], &[1.0; 2]),
            Err(QpError::NotSymmetric { .. })
        ));
        let mut b = QpBuilder::new();
        b.add_var("x", 2.0, 1.0, 0.0);
        assert!(matches!(b.build(), Err(QpError::InvertedBounds { .. })));
    }

    #[test]
    fn builder_merges_duplicates() {
        let mut b = QpBuilder::new();
        let x = b.add_var("x", -INF, INF, 0.0);
        b.add_quad(x, x, 1.0);
        b.add_quad(x, x, 1.0);
        b.add_eq("e", vec![(x, 1.0), (x, 1.0)], 4.0);
        let p = b.build().unwrap();
        let r = solve_qp(&p, &SolveOptions::default()).unwrap();
        assert!((r.x[0] - 2.0).abs() < 1e-7);
        assert!((p.objective(&r.x) - 4.0).abs() < 1e-6);
    }

    #[test]
    fn unbounded_linear_program() {
        let mut b = QpBuilder::new();
        b.add_var("x", -INF, INF, 1.0);
        let r = solve_qp(&b.build().unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(r.status, QpStatus::Unbounded);
    }
}
