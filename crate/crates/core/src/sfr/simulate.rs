use super::{AggregatedSfrParams, SfrError};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_END: f64 = 60.0;

/// Sampled step response. `deviation` is signed (negative for a generation
/// loss); `rate` is its time derivative evaluated from the state equations.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub deviation: Vec<f64>,
    pub rate: Vec<f64>,
}

impl Trajectory {
    /// Largest sampled |Δf| and its time.
    pub fn peak(&self) -> (f64, f64) {
        let mut best = (0.0, 0.0);
        for (&t, &y) in self.times.iter().zip(&self.deviation) {
            if y.abs() > best.0 {
                best = (y.abs(), t);
            }
        }
        best
    }

    pub fn initial_rate(&self) -> f64 {
        self.rate.first().map_or(0.0, |r| r.abs())
    }

    pub fn final_deviation(&self) -> f64 {
        self.deviation.last().map_or(0.0, |y| y.abs())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Integrates the controllable-canonical realization
///
/// ```text
///     x1' = x2
///     x2' = -ω_n² x1 - 2ζω_n x2 + ΔP
///     Δf  = -f0/(2HT) · (x1 + T x2)
/// ```
///
/// with classical fixed-step RK4. The denominator coefficients are taken from
/// the raw parameters rather than from `derived_modes`.
pub fn simulate_step_response(
    p: &AggregatedSfrParams,
    dp: f64,
    f0: f64,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory, SfrError> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(SfrError::InvalidParameters(format!(
            "simulation needs dt > 0 and t_end >= 0 (dt = {dt}, t_end = {t_end})"
        )));
    }
    p.validate()?;
    let (h, d, r, f, t) = (
        p.inertia,
        p.damping,
        p.droop_gain,
        p.turbine_fraction,
        p.time_constant,
    );
    let lead = 2.0 * h * t;
    let k0 = (d + r) / lead;
    let k1 = (2.0 * h + (d + f) * t) / lead;
    let out = -f0 / lead;

    let deriv = |x: [f64; 2]| -> [f64; 2] { [x[1], -k0 * x[0] - k1 * x[1] + dp] };
    let output = |x: [f64; 2]| out * (x[0] + t * x[1]);
    let output_rate = |x: [f64; 2]| {
        let dx = deriv(x);
        out * (dx[0] + t * dx[1])
    };

    let steps = (t_end / dt).round() as usize;
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        deviation: Vec::with_capacity(steps + 1),
        rate: Vec::with_capacity(steps + 1),
    };
    let mut x = [0.0_f64; 2];
    for n in 0..=steps {
        let time = n as f64 * dt;
        traj.times.push(time);
        traj.deviation.push(output(x));
        traj.rate.push(output_rate(x));
        if n == steps {
            break;
        }
        let a = deriv(x);
        let b = deriv([x[0] + 0.5 * dt * a[0], x[1] + 0.5 * dt * a[1]]);
        let c = deriv([x[0] + 0.5 * dt * b[0], x[1] + 0.5 * dt * b[1]]);
        let e = deriv([x[0] + dt * c[0], x[1] + dt * c[1]]);
        x[0] += dt / 6.0 * (a[0] + 2.0 * b[0] + 2.0 * c[0] + e[0]);
        x[1] += dt / 6.0 * (a[1] + 2.0 * b[1] + 2.0 * c[1] + e[1]);
        if !(x[0].is_finite() && x[1].is_finite()) {
            return Err(SfrError::IntegrationFailure { t: time + dt });
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sfr::{delta_f_nadir, delta_f_ss, rocof_max};

    fn reference() -> AggregatedSfrParams {
        AggregatedSfrParams::new(4.0, 1.0, 20.0, 5.0, 8.0).unwrap()
    }

    #[test]
    fn zero_disturbance_stays_at_rest() {
        let tr = simulate_step_response(&reference(), 0.0, 50.0, 10.0, 1e-2).unwrap();
        assert!(tr.deviation.iter().all(|&y| y == 0.0));
    }

    #[test]
    fn settles_to_steady_state() {
        let p = reference();
        let tr = simulate_step_response(&p, 0.1, 50.0, 60.0, DEFAULT_DT).unwrap();
        let ss = delta_f_ss(&p, 0.1, 50.0).unwrap();
        assert!((tr.final_deviation() - ss).abs() < 1e-4);
        assert!(tr.deviation.last().unwrap() < &0.0);
    }

    #[test]
    fn initial_rate_matches_rocof() {
        let p = reference();
        let tr = simulate_step_response(&p, 0.1, 50.0, 1.0, DEFAULT_DT).unwrap();
        assert!((tr.initial_rate() - rocof_max(&p, 0.1, 50.0)).abs() < 1e-4);
    }

    #[test]
    fn reference_nadir_matches_closed_form() {
        let p = reference();
        let tr = simulate_step_response(&p, 0.1, 50.0, 60.0, DEFAULT_DT).unwrap();
        let (peak, t_peak) = tr.peak();
        let n = delta_f_nadir(&p, 0.1, 50.0).unwrap();
        assert!((peak - n.delta_f_max).abs() < 1e-3, "{peak} vs {}", n.delta_f_max);
        assert!((t_peak - n.t_nadir).abs() <= DEFAULT_DT);
    }

    #[test]
    fn step_halving_converges() {
        let p = reference();
        let a = simulate_step_response(&p, 0.1, 50.0, 60.0, DEFAULT_DT).unwrap().peak().0;
        let b = simulate_step_response(&p, 0.1, 50.0, 60.0, DEFAULT_DT / 2.0)
            .unwrap()
            .peak()
            .0;
        assert!((a - b).abs() < 1e-5);
    }

    #[test]
    fn rejects_bad_step() {
        assert!(simulate_step_response(&reference(), 0.1, 50.0, 1.0, 0.0).is_err());
    }
}
