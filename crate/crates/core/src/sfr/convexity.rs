//! Numerical convexity certificate for the nadir as a function of (H, D).

use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{nadir_parts, AggregatedSfrParams};
use crate::rng;

/// Uniform sampling box. The turbine fraction is drawn as a ratio of the
/// droop gain, `F = F_r · R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterBox {
    pub inertia: (f64, f64),
    pub damping: (f64, f64),
    pub time_constant: (f64, f64),
    pub droop_gain: (f64, f64),
    pub fraction_ratio: (f64, f64),
}

impl Default for ParameterBox {
    /// Ranges typical of real power systems.
    fn default() -> Self {
        Self {
            inertia: (0.1, 20.0),
            damping: (0.0, 15.0),
            time_constant: (0.1, 20.0),
            droop_gain: (1.0, 100.0),
            fraction_ratio: (0.0, 0.8),
        }
    }
}

impl ParameterBox {
    pub fn sample(&self, rng: &mut rng::StreamRng) -> AggregatedSfrParams {
        let mut draw = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
        let inertia = draw(self.inertia);
        let damping = draw(self.damping);
        let time_constant = draw(self.time_constant);
        let droop_gain = draw(self.droop_gain);
        let ratio = draw(self.fraction_ratio);
        AggregatedSfrParams {
            inertia,
            damping,
            droop_gain,
            turbine_fraction: ratio * droop_gain,
            time_constant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityConfig {
    pub ranges: ParameterBox,
    pub n_samples: usize,
    /// Central-difference step as a fraction of each coordinate's range.
    pub fd_step: f64,
    /// A sample violates when `λ_min < -psd_tol · |λ_max|`.
    pub psd_tol: f64,
    pub seed: u64,
    /// Disturbance in per-unit; the nadir is linear in it.
    pub disturbance: f64,
    pub f0: f64,
}

impl Default for ConvexityConfig {
    fn default() -> Self {
        Self {
            ranges: ParameterBox::default(),
            n_samples: 100_000,
            fd_step: 1e-4,
            psd_tol: 1e-8,
            seed: 7,
            disturbance: 0.1,
            f0: 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub n_samples: usize,
    pub min_eigenvalue: f64,
    /// Smallest `λ_min / |λ_max|` across samples.
    pub min_relative_eigenvalue: f64,
    pub n_violations: usize,
    /// Samples whose mode is not oscillatory (`ζ ≥ 1`).
    pub n_overdamped: usize,
}

/// Certifies the analytic nadir over `cfg.ranges`.
///
/// The steady-state part and the overshoot are differenced separately: when
/// the overshoot is far below one ulp of the total, rounding their sum would
/// swamp the curvature with noise of order `ε·|Δf|/h²`.
pub fn certify_convexity(cfg: &ConvexityConfig) -> ConvexityReport {
    let (dp, f0) = (cfg.disturbance, cfg.f0);
    certify_split(cfg, |p: &AggregatedSfrParams| {
        nadir_parts(p, dp, f0).map_or([f64::NAN; 2], |n| [n.steady_state, n.excess])
    })
}

/// Same certificate for an arbitrary function of the sampled parameters;
/// only `inertia` and `damping` are perturbed.
pub fn certify_convexity_with<F>(cfg: &ConvexityConfig, func: F) -> ConvexityReport
where
    F: Fn(&AggregatedSfrParams) -> f64 + Sync,
{
    certify_split(cfg, |p: &AggregatedSfrParams| [func(p), 0.0])
}

/// Central-difference Hessian of `parts[0] + parts[1]`, each part
/// differenced on its own.
fn certify_split<F>(cfg: &ConvexityConfig, func: F) -> ConvexityReport
where
    F: Fn(&AggregatedSfrParams) -> [f64; 2] + Sync,
{
    let step_h = cfg.fd_step * (cfg.ranges.inertia.1 - cfg.ranges.inertia.0);
    let step_d = cfg.fd_step * (cfg.ranges.damping.1 - cfg.ranges.damping.0);

    struct Sample {
        min_eig: f64,
        rel: f64,
        violation: bool,
        overdamped: bool,
    }

    let samples: Vec<Sample> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(cfg.seed, i as u64);
            let p = cfg.ranges.sample(&mut rng);
            let at = |dh: f64, dd: f64| func(&p.with_inertia_damping(p.inertia + dh, p.damping + dd));
            let c = at(0.0, 0.0);
            let (hp, hm) = (at(step_h, 0.0), at(-step_h, 0.0));
            let (dp_, dm) = (at(0.0, step_d), at(0.0, -step_d));
            let (pp, pm) = (at(step_h, step_d), at(step_h, -step_d));
            let (mp, mm) = (at(-step_h, step_d), at(-step_h, -step_d));
            let second = |k: usize| {
                let fhh = (hp[k] - 2.0 * c[k] + hm[k]) / (step_h * step_h);
                let fdd = (dp_[k] - 2.0 * c[k] + dm[k]) / (step_d * step_d);
                let fhd = (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * step_h * step_d);
                (fhh, fhd, fdd)
            };
            let (a, b) = (second(0), second(1));
            let (fhh, fhd, fdd) = (a.0 + b.0, a.1 + b.1, a.2 + b.2);
            let (lo, hi) = sym2_eigenvalues(fhh, fhd, fdd);
            let scale = lo.abs().max(hi.abs());
            let rel = if scale > 0.0 { lo / scale } else { 0.0 };
            let overdamped = super::derived_modes(&p).map_or(false, |m| m.zeta >= 1.0);
            Sample {
                min_eig: lo,
                rel,
                violation: !(lo >= -cfg.psd_tol * hi.abs()),
                overdamped,
            }
        })
        .collect();

    ConvexityReport {
        n_samples: cfg.n_samples,
        min_eigenvalue: samples.iter().map(|s| s.min_eig).fold(f64::INFINITY, f64::min),
        min_relative_eigenvalue: samples.iter().map(|s| s.rel).fold(f64::INFINITY, f64::min),
        n_violations: samples.iter().filter(|s| s.violation).count(),
        n_overdamped: samples.iter().filter(|s| s.overdamped).count(),
    }
}

/// Eigenvalues of [[a, b], [b, c]], ascending.
pub(crate) fn sym2_eigenvalues(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mean = 0.5 * (a + c);
    let radius = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    (mean - radius, mean + radius)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl_has_curvature_two() {
        let cfg = ConvexityConfig {
            n_samples: 200,
            ..ConvexityConfig::default()
        };
        let r = certify_convexity_with(&cfg, |p| p.inertia.powi(2) + p.damping.powi(2));
        assert_eq!(r.n_violations, 0);
        assert!((r.min_eigenvalue - 2.0).abs() < 1e-4, "{}", r.min_eigenvalue);
    }

    #[test]
    fn saddle_is_flagged() {
        let cfg = ConvexityConfig {
            n_samples: 50,
            ..ConvexityConfig::default()
        };
        let r = certify_convexity_with(&cfg, |p| p.inertia.powi(2) - p.damping.powi(2));
        assert_eq!(r.n_violations, 50);
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = ConvexityConfig {
            n_samples: 1000,
            ..ConvexityConfig::default()
        };
        assert_eq!(certify_convexity(&cfg), certify_convexity(&cfg));
    }

    #[test]
    fn eigenvalues_of_diagonal() {
        assert_eq!(sym2_eigenvalues(3.0, 0.0, 1.0), (1.0, 3.0));
    }
}
