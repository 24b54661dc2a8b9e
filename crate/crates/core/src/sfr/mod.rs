//! Aggregated system frequency response (SFR) model.
//!
//! All thermal governors share one time constant `T`, so the system reduces to
//!
//! ```text
//!     Δf(s) / ΔP(s) = -1/(2HT) · (1 + Ts) / (s² + 2ζω_n s + ω_n²)
//! ```
//!
//! with `H`, `D`, `R`, `F` on the system power base. Frequency quantities are
//! reported in Hz as magnitudes of an under-frequency event: a positive `dp`
//! is a loss of generation.

mod convexity;
mod simulate;

pub use convexity::{
    certify_convexity, certify_convexity_with, ConvexityConfig, ConvexityReport, ParameterBox,
};
pub use simulate::{simulate_step_response, Trajectory, DEFAULT_DT, DEFAULT_T_END};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SfrError {
    #[error("invalid SFR parameters: {0}")]
    InvalidParameters(String),
    #[error("degenerate system: damping plus droop gain is zero")]
    Degenerate,
    #[error("step response integration diverged at t = {t} s")]
    IntegrationFailure { t: f64 },
    #[error("invalid frequency limits: {0}")]
    InvalidLimits(String),
}

/// System-level inertia, damping and governor parameters, all per-unit on the
/// system base except the time constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregatedSfrParams {
    /// Aggregate inertia `H` in seconds.
    pub inertia: f64,
    /// Aggregate damping `D`: load damping plus RES/ESS droop.
    pub damping: f64,
    /// Aggregate thermal droop gain `R = Σ (1/R_i) P_i^max / P_base`.
    pub droop_gain: f64,
    /// Aggregate turbine fraction gain `F = Σ F_i P_i^max / (R_i P_base)`.
    pub turbine_fraction: f64,
    /// Common governor-turbine time constant `T` in seconds.
    pub time_constant: f64,
}

impl AggregatedSfrParams {
    pub fn new(
        inertia: f64,
        damping: f64,
        droop_gain: f64,
        turbine_fraction: f64,
        time_constant: f64,
    ) -> Result<Self, SfrError> {
        let p = Self {
            inertia,
            damping,
            droop_gain,
            turbine_fraction,
            time_constant,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SfrError> {
        let fields = [
            ("inertia", self.inertia),
            ("damping", self.damping),
            ("droop_gain", self.droop_gain),
            ("turbine_fraction", self.turbine_fraction),
            ("time_constant", self.time_constant),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(SfrError::InvalidParameters(format!("{name} is not finite")));
            }
        }
        if self.inertia <= 0.0 {
            return Err(SfrError::InvalidParameters("inertia must be > 0".into()));
        }
        if self.time_constant <= 0.0 {
            return Err(SfrError::InvalidParameters("time_constant must be > 0".into()));
        }
        if self.droop_gain < 0.0 || self.damping < 0.0 {
            return Err(SfrError::InvalidParameters(
                "droop_gain and damping must be >= 0".into(),
            ));
        }
        if self.turbine_fraction > self.droop_gain {
            return Err(SfrError::InvalidParameters(format!(
                "turbine_fraction {} exceeds droop_gain {}",
                self.turbine_fraction, self.droop_gain
            )));
        }
        Ok(())
    }

    /// Same thermal parameters with a different inertia and damping.
    pub fn with_inertia_damping(&self, inertia: f64, damping: f64) -> Self {
        Self {
            inertia,
            damping,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyLimits {
    /// Nominal frequency, Hz.
    pub f0: f64,
    /// Maximum transient deviation, Hz.
    pub max_deviation: f64,
    /// Maximum rate of change of frequency, Hz/s.
    pub max_rocof: f64,
    /// Maximum steady-state deviation, Hz.
    pub max_steady_state: f64,
}

impl FrequencyLimits {
    pub fn validate(&self) -> Result<(), SfrError> {
        let fields = [
            ("f0", self.f0),
            ("max_deviation", self.max_deviation),
            ("max_rocof", self.max_rocof),
            ("max_steady_state", self.max_steady_state),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(SfrError::InvalidLimits(format!("{name} must be finite and > 0")));
            }
        }
        if self.max_steady_state > self.max_deviation {
            return Err(SfrError::InvalidLimits(
                "max_steady_state must not exceed max_deviation".into(),
            ));
        }
        Ok(())
    }
}

impl Default for FrequencyLimits {
    fn default() -> Self {
        Self {
            f0: 50.0,
            max_deviation: 0.5,
            max_rocof: 0.5,
            max_steady_state: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyMetrics {
    pub rocof_max: f64,
    pub delta_f_ss: f64,
    pub delta_f_max: f64,
    /// Time of the nadir in seconds; infinite when the response approaches
    /// its steady state monotonically.
    pub t_nadir: f64,
    pub omega_n: f64,
    pub zeta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Modes {
    pub omega_n: f64,
    pub zeta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nadir {
    pub delta_f_max: f64,
    pub t_nadir: f64,
}

/// Natural frequency (rad/s) and damping ratio of the closed loop.
pub fn derived_modes(p: &AggregatedSfrParams) -> Result<Modes, SfrError> {
    let (h, d, r, f, t) = unpack(p);
    let sync = d + r;
    if sync <= 0.0 {
        return Err(SfrError::Degenerate);
    }
    let omega_n = (sync / (2.0 * h * t)).sqrt();
    let zeta = (2.0 * h + (d + f) * t) / (2.0 * (2.0 * h * t * sync).sqrt());
    Ok(Modes { omega_n, zeta })
}

pub fn rocof_max(p: &AggregatedSfrParams, dp: f64, f0: f64) -> f64 {
    f0 * dp / (2.0 * p.inertia)
}

pub fn delta_f_ss(p: &AggregatedSfrParams, dp: f64, f0: f64) -> Result<f64, SfrError> {
    let sync = p.damping + p.droop_gain;
    if sync <= 0.0 {
        return Err(SfrError::Degenerate);
    }
    Ok(f0 * dp / sync)
}

/// Maximum frequency deviation and the time it occurs.
///
/// The oscillatory case uses the closed form with the nadir at the first
/// positive stationary time `atan2(ω_r, ζω_n − 1/T) / ω_r`. For `ζ ≥ 1` the
/// step response is a sum of real exponentials and its stationary point is
/// solved for exactly; without one the deviation rises monotonically to the
/// steady state and `t_nadir` is infinite.
pub fn delta_f_nadir(p: &AggregatedSfrParams, dp: f64, f0: f64) -> Result<Nadir, SfrError> {
    let parts = nadir_parts(p, dp, f0)?;
    Ok(Nadir {
        delta_f_max: parts.steady_state + parts.excess,
        t_nadir: parts.t_nadir,
    })
}

/// The nadir as steady-state deviation plus the overshoot beyond it, kept
/// apart so callers that difference nearby evaluations do not lose the
/// (possibly tiny) overshoot to rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NadirParts {
    pub steady_state: f64,
    pub excess: f64,
    pub t_nadir: f64,
}

pub fn nadir_parts(p: &AggregatedSfrParams, dp: f64, f0: f64) -> Result<NadirParts, SfrError> {
    if p.turbine_fraction > p.droop_gain {
        return Err(SfrError::InvalidParameters(format!(
            "turbine_fraction {} exceeds droop_gain {}",
            p.turbine_fraction, p.droop_gain
        )));
    }
    let Modes { omega_n, zeta } = derived_modes(p)?;
    let ss = delta_f_ss(p, dp, f0)?;
    let (h, _, r, f, t) = unpack(p);

    if zeta < 1.0 {
        let omega_r = omega_n * (1.0 - zeta * zeta).sqrt();
        let t_nadir = (omega_r).atan2(zeta * omega_n - 1.0 / t) / omega_r;
        let overshoot = (-zeta * omega_n * t_nadir).exp() * (t * (r - f) / (2.0 * h)).sqrt();
        return Ok(NadirParts {
            steady_state: ss,
            excess: ss * overshoot,
            t_nadir,
        });
    }

    // Step response of (1 + Ts) / (s (s + p1)(s + p2)), scaled by f0·ΔP/(2HT).
    // `transient` is the response minus its final value 1/(p1 p2).
    let gain = f0 * dp / (2.0 * h * t);
    let disc = omega_n * (zeta * zeta - 1.0).sqrt();
    let p1 = zeta * omega_n - disc;
    let p2 = zeta * omega_n + disc;
    let stationary = if (p2 - p1) <= 1e-12 * p2 {
        // Critically damped: dy/dt ∝ e^{-pt} (T − (Tp − 1) t).
        let p0 = zeta * omega_n;
        if t * p0 > 1.0 {
            let ts = t / (t * p0 - 1.0);
            let c = (t * p0 - 1.0) / p0;
            let transient = -(-p0 * ts).exp() / (p0 * p0) + c * ts * (-p0 * ts).exp();
            Some((ts, transient))
        } else {
            None
        }
    } else {
        // dy/dt ∝ a e^{-p1 t} + b e^{-p2 t}
        let a = (1.0 - t * p1) / (p2 - p1);
        let b = (1.0 - t * p2) / (p1 - p2);
        let ratio = -b / a;
        if a != 0.0 && ratio > 1.0 {
            let ts = ratio.ln() / (p2 - p1);
            let ca = (1.0 - t * p1) / (-p1 * (p2 - p1));
            let cb = (1.0 - t * p2) / (-p2 * (p1 - p2));
            Some((ts, ca * (-p1 * ts).exp() + cb * (-p2 * ts).exp()))
        } else {
            None
        }
    };
    match stationary {
        Some((ts, transient)) if gain * transient > 0.0 => Ok(NadirParts {
            steady_state: ss,
            excess: gain * transient,
            t_nadir: ts,
        }),
        _ => Ok(NadirParts {
            steady_state: ss,
            excess: 0.0,
            t_nadir: f64::INFINITY,
        }),
    }
}

/// All three frequency metrics for a disturbance of `dp` per-unit.
pub fn metrics(p: &AggregatedSfrParams, dp: f64, f0: f64) -> Result<FrequencyMetrics, SfrError> {
    let Modes { omega_n, zeta } = derived_modes(p)?;
    let nadir = delta_f_nadir(p, dp, f0)?;
    Ok(FrequencyMetrics {
        rocof_max: rocof_max(p, dp, f0),
        delta_f_ss: delta_f_ss(p, dp, f0)?,
        delta_f_max: nadir.delta_f_max,
        t_nadir: nadir.t_nadir,
        omega_n,
        zeta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitCheck {
    pub rocof_ok: bool,
    pub steady_state_ok: bool,
    pub nadir_ok: bool,
}

impl LimitCheck {
    pub fn all_ok(&self) -> bool {
        self.rocof_ok && self.steady_state_ok && self.nadir_ok
    }
}

/// Inclusive comparison of each metric against its limit.
pub fn check_limits(m: &FrequencyMetrics, lim: &FrequencyLimits) -> LimitCheck {
    check_limits_with_tol(m, lim, 0.0)
}

pub fn check_limits_with_tol(m: &FrequencyMetrics, lim: &FrequencyLimits, tol: f64) -> LimitCheck {
    LimitCheck {
        rocof_ok: m.rocof_max <= lim.max_rocof + tol,
        steady_state_ok: m.delta_f_ss <= lim.max_steady_state + tol,
        nadir_ok: m.delta_f_max <= lim.max_deviation + tol,
    }
}

fn unpack(p: &AggregatedSfrParams) -> (f64, f64, f64, f64, f64) {
    (
        p.inertia,
        p.damping,
        p.droop_gain,
        p.turbine_fraction,
        p.time_constant,
    )
}


#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn reference() -> AggregatedSfrParams {
        AggregatedSfrParams::new(4.0, 1.0, 20.0, 5.0, 8.0).unwrap()
    }

    #[test]
    fn rejects_turbine_fraction_above_droop() {
        assert!(AggregatedSfrParams::new(4.0, 1.0, 5.0, 6.0, 8.0).is_err());
        assert!(AggregatedSfrParams::new(0.0, 1.0, 5.0, 1.0, 8.0).is_err());
        assert!(AggregatedSfrParams::new(4.0, 1.0, 5.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn degenerate_without_synchronizing_gain() {
        let p = AggregatedSfrParams {
            inertia: 4.0,
            damping: 0.0,
            droop_gain: 0.0,
            turbine_fraction: 0.0,
            time_constant: 8.0,
        };
        assert_eq!(derived_modes(&p), Err(SfrError::Degenerate));
        assert_eq!(delta_f_ss(&p, 0.1, 50.0), Err(SfrError::Degenerate));
    }

    /// Roots of s² + b s + c from the transfer-function denominator assembled
    /// directly from the block diagram, without going through ω_n and ζ.
    fn characteristic_roots(p: &AggregatedSfrParams) -> ((f64, f64), (f64, f64)) {
        let (h, d, r, f, t) = unpack(p);
        // 2HT s² + (2H + (D + F)T) s + (D + R), normalised.
        let a = 2.0 * h * t;
        let b = (2.0 * h + (d + f) * t) / a;
        let c = (d + r) / a;
        let disc = b * b - 4.0 * c;
        if disc < 0.0 {
            let im = (-disc).sqrt() / 2.0;
            ((-b / 2.0, im), (-b / 2.0, -im))
        } else {
            let s = disc.sqrt();
            ((-b / 2.0 + s / 2.0, 0.0), (-b / 2.0 - s / 2.0, 0.0))
        }
    }

    #[test]
    fn modes_match_characteristic_roots() {
        let p = reference();
        let m = derived_modes(&p).unwrap();
        let ((re, im), _) = characteristic_roots(&p);
        let magnitude = (re * re + im * im).sqrt();
        assert_abs_diff_eq!(m.omega_n, magnitude, epsilon = 1e-12);
        assert_abs_diff_eq!(m.zeta, -re / magnitude, epsilon = 1e-12);
    }

    #[test]
    fn omega_n_scales_inversely_with_joint_h_t_scaling() {
        let p = reference();
        let k = 2.5;
        let scaled = AggregatedSfrParams {
            inertia: p.inertia * k,
            time_constant: p.time_constant * k,
            ..p
        };
        let a = derived_modes(&p).unwrap();
        let b = derived_modes(&scaled).unwrap();
        assert_abs_diff_eq!(b.omega_n, a.omega_n / k, epsilon = 1e-12);
    }

    #[test]
    fn rocof_and_steady_state_substitution() {
        let p = AggregatedSfrParams::new(5.0, 1.0, 19.0, 3.0, 8.0).unwrap();
        assert_eq!(rocof_max(&p, 0.0, 50.0), 0.0);
        assert_abs_diff_eq!(rocof_max(&p, 0.1, 50.0), 0.5, epsilon = 1e-15);
        assert_eq!(delta_f_ss(&p, 0.0, 50.0).unwrap(), 0.0);
        assert_abs_diff_eq!(delta_f_ss(&p, 0.1, 50.0).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn nadir_collapses_to_steady_state_when_r_equals_f() {
        let p = AggregatedSfrParams::new(4.0, 1.0, 20.0, 20.0, 8.0).unwrap();
        let n = delta_f_nadir(&p, 0.1, 50.0).unwrap();
        assert_abs_diff_eq!(n.delta_f_max, delta_f_ss(&p, 0.1, 50.0).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn zero_disturbance_has_zero_nadir() {
        let n = delta_f_nadir(&reference(), 0.0, 50.0).unwrap();
        assert_eq!(n.delta_f_max, 0.0);
        assert!(n.t_nadir.is_finite());
    }

    #[test]
    fn nadir_rejects_invalid_fraction() {
        let p = AggregatedSfrParams {
            turbine_fraction: 30.0,
            ..reference()
        };
        assert!(matches!(
            delta_f_nadir(&p, 0.1, 50.0),
            Err(SfrError::InvalidParameters(_))
        ));
    }

    #[test]
    fn check_limits_is_inclusive() {
        let lim = FrequencyLimits::default();
        let zero = FrequencyMetrics {
            rocof_max: 0.0,
            delta_f_ss: 0.0,
            delta_f_max: 0.0,
            t_nadir: 0.0,
            omega_n: 1.0,
            zeta: 0.5,
        };
        assert!(check_limits(&zero, &lim).all_ok());
        let edge = FrequencyMetrics {
            delta_f_max: lim.max_deviation,
            ..zero
        };
        assert!(check_limits(&edge, &lim).nadir_ok);
        let over = FrequencyMetrics {
            delta_f_max: lim.max_deviation + 1e-12,
            ..zero
        };
        let c = check_limits(&over, &lim);
        assert!(!c.nadir_ok && c.rocof_ok && c.steady_state_ok);
    }

    #[test]
    fn limits_validation() {
        assert!(FrequencyLimits::default().validate().is_ok());
        let bad = FrequencyLimits {
            max_steady_state: 0.6,
            ..FrequencyLimits::default()
        };
        assert!(bad.validate().is_err());
    }
}
