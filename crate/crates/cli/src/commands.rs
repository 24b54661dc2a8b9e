use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use fcsd_core::cha::{build_nadir_halfspaces, classification_error, HalfspaceSet};
use fcsd_core::desk;
use fcsd_core::dispatch::{
    cha_for_window, solve_window, verify_solution, DispatchCase, DisturbanceRule, InitialState, Mode,
    Probabilities, Window,
};
use fcsd_core::horizon::{compare_modes, run_rolling, HorizonConfig, RunReport, ScenarioTimeline};
use fcsd_core::io::{self, format_sig, SolutionFile, SCHEMA_VERSION};
use fcsd_core::sfr::{self, certify_convexity, simulate_step_response, ConvexityConfig};
use fcsd_core::uncertainty::UnivariateGmm;

use crate::args::*;
use crate::error::CliError;

const DEFAULT_SEED: u64 = 7;

/// Runs the subcommand. Returns the JSON summary and, for audits that ran
/// but found problems, the error to exit with after printing it.
pub fn execute(cli: &Cli) -> Result<(Value, Option<CliError>), CliError> {
    let ctx = Ctx {
        seed: cli.seed,
        text: !cli.json_summary,
    };
    match &cli.command {
        Command::Solve(a) => solve(&ctx, a).map(|v| (v, None)),
        Command::Roll(a) => roll(&ctx, a).map(|v| (v, None)),
        Command::Cha(a) => cha(&ctx, a).map(|v| (v, None)),
        Command::SimulateFreq(a) => simulate(&ctx, a).map(|v| (v, None)),
        Command::CheckConvexity(a) => convexity(&ctx, a).map(|v| (v, None)),
        Command::Quantile(a) => quantile(&ctx, a).map(|v| (v, None)),
        Command::Verify(a) => verify(&ctx, a),
    }
}

struct Ctx {
    seed: Option<u64>,
    text: bool,
}

impl Ctx {
    fn say(&self, line: impl AsRef<str>) {
        if self.text {
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{}", line.as_ref());
        }
    }
}

fn load_case(path: &str) -> Result<DispatchCase, CliError> {
    let loaded = if Path::new(path).exists() {
        io::load_case(path)?
    } else if path == desk::CASE_NAME {
        io::validate_case(desk::case24(), desk::CASE_NAME)?
    } else {
        return Err(CliError::validation(format!(
            "case file {path} not found (use a path or `{}`)",
            desk::CASE_NAME
        )));
    };
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    Ok(loaded.case)
}

fn case_with_overrides(a: &CaseArgs) -> Result<DispatchCase, CliError> {
    let mut case = load_case(&a.case)?;
    if a.kappa.is_none() && a.alpha.is_none() {
        return Ok(case);
    }
    if let Some(kappa) = a.kappa {
        case.disturbance = DisturbanceRule::LoadFraction { kappa };
    }
    if let Some(alpha) = a.alpha {
        case.probabilities = Probabilities::uniform(alpha);
    }
    Ok(io::validate_case(case, &a.case)?.case)
}

fn load_config(a: &RunArgs) -> Result<HorizonConfig, CliError> {
    let mut cfg = match &a.config {
        Some(p) => io::load_config(p)?,
        None => HorizonConfig::default(),
    };
    if let Some(n) = a.samples {
        cfg.cha_samples = n;
    }
    if a.enforce_frequency_in_fixed {
        cfg.build.enforce_frequency_in_fixed = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_scenario(
    path: &str,
    case: &DispatchCase,
    cfg: &HorizonConfig,
    seed: Option<u64>,
) -> Result<ScenarioTimeline, CliError> {
    let mut sc = if Path::new(path).exists() {
        io::load_scenario(path, case, cfg)?
    } else if path == desk::SCENARIO_NAME {
        desk::day1(case, cfg)?
    } else {
        return Err(CliError::validation(format!(
            "scenario file {path} not found (use a path or `{}`)",
            desk::SCENARIO_NAME
        )));
    };
    if let Some(s) = seed {
        sc.seed = s;
    }
    Ok(sc)
}

struct Inputs {
    case: DispatchCase,
    cfg: HorizonConfig,
    scenario: ScenarioTimeline,
}

fn inputs(ctx: &Ctx, a: &RunArgs) -> Result<Inputs, CliError> {
    let case = case_with_overrides(&a.case)?;
    let cfg = load_config(a)?;
    let scenario = load_scenario(&a.scenario, &case, &cfg, ctx.seed)?;
    Ok(Inputs { case, cfg, scenario })
}

fn mode_of(m: ModeArg) -> Mode {
    match m {
        ModeArg::Online => Mode::Online,
        ModeArg::Fixed => Mode::Fixed,
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::validation(format!("{}: {e}", dir.display())))
}

fn solve(ctx: &Ctx, a: &SolveArgs) -> Result<Value, CliError> {
    let Inputs { case, cfg, scenario } = inputs(ctx, &a.run)?;
    let mode = mode_of(a.mode);
    let solve = scenario.solves.get(a.solve_index).ok_or_else(|| {
        CliError::validation(format!(
            "--solve-index {} is out of range (scenario has {} solves)",
            a.solve_index,
            scenario.solves.len()
        ))
    })?;
    let window = Window {
        step_hours: cfg.step_hours(),
        periods: solve.steps[..cfg.horizon_steps].iter().map(|s| s.to_period(&case)).collect(),
        initial: InitialState::from_case(&case),
    };
    let cha = cha_for_window(&case, &window, mode, &cfg.build, cfg.cha_samples, scenario.seed)?;
    let sol = solve_window(&case, &window, mode, &cha, &cfg.build, &cfg.solver)?;
    let audit = verify_solution(&sol, &case, &window, cfg.audit_tol)?;
    let objective = sol.solver_objective.unwrap_or(sol.cost.total());

    ctx.say(format!(
        "{} window, solve {} of {}, mode {}",
        case.name,
        a.solve_index,
        scenario.name,
        mode.label()
    ));
    ctx.say(format!("objective         {}", format_sig(objective)));
    ctx.say(format!("{:>4} {:>10} {:>8} {:>8} {:>9} {:>9} {:>10}", "t", "load_mw", "h_sys", "d_sys", "rw_mw", "re_mw", "nadir_hz"));
    for (t, (p, m)) in sol.periods.iter().zip(&audit.frequency).enumerate() {
        ctx.say(format!(
            "{:>4} {:>10.1} {:>8.4} {:>8.4} {:>9.2} {:>9.2} {:>10.4}",
            t,
            window.periods[t].total_load(),
            p.h_sys,
            p.d_sys,
            p.rw.iter().sum::<f64>(),
            p.re.iter().sum::<f64>(),
            m.delta_f_max
        ));
    }
    let linear = audit.linear_violations().count();
    let freq = audit.frequency_failures();
    ctx.say(format!(
        "audit: {linear} linear violations, {} periods with frequency violations, loss gap {:.2e}",
        freq.len(),
        audit.loss_gap
    ));
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        let path = dir.join("solution.json");
        io::save_solution(
            &SolutionFile {
                schema_version: SCHEMA_VERSION,
                case_name: case.name.clone(),
                mode,
                window: window.clone(),
                solution: sol.clone(),
            },
            &path,
        )?;
        ctx.say(format!("wrote {}", path.display()));
    }
    Ok(json!({
        "command": "solve",
        "mode": mode.label(),
        "solve_index": a.solve_index,
        "objective": objective,
        "total_cost": sol.cost.total(),
        "periods": sol.periods.len(),
        "linear_violations": linear,
        "frequency_failures": freq.len(),
        "loss_gap": audit.loss_gap,
    }))
}

fn mode_summary(r: &RunReport) -> Value {
    let t = &r.totals;
    json!({
        "mode": r.mode.label(),
        "total_cost": t.total_cost,
        "fuel_cost": t.cost.fuel,
        "res_reserve_cost": t.cost.res_reserve,
        "ess_reserve_cost": t.cost.ess_reserve,
        "curtailment_pct": t.curtailment_pct,
        "nadir_failures": r.nadir_failures(),
        "frequency_failures": r.frequency_failures(),
        "linear_violations": r.linear_violations(),
        "loss_gap": r.loss_gap,
    })
}

fn roll(ctx: &Ctx, a: &RollArgs) -> Result<Value, CliError> {
    let Inputs { case, cfg, scenario } = inputs(ctx, &a.run)?;
    let reports = match a.mode {
        ModesArg::Both => {
            let cmp = compare_modes(&case, &scenario, &cfg);
            vec![cmp.fixed?, cmp.online?]
        }
        ModesArg::Online => vec![run_rolling(&case, &scenario, &cfg, Mode::Online)?],
        ModesArg::Fixed => vec![run_rolling(&case, &scenario, &cfg, Mode::Fixed)?],
    };
    let refs: Vec<&RunReport> = reports.iter().collect();
    let meta = io::save_report(&a.out, &case, &scenario, &cfg, &refs)?;

    ctx.say(format!(
        "{} / {} ({} committed periods, seed {})",
        case.name,
        scenario.name,
        reports[0].committed.len(),
        scenario.seed
    ));
    let mut header = format!("{:<20}", "metric");
    for r in &reports {
        header.push_str(&format!(" {:>16}", r.mode.label()));
    }
    ctx.say(header);
    type Metric = fn(&RunReport) -> f64;
    let rows: [(&str, Metric); 8] = [
        ("fuel_cost", |r| r.totals.cost.fuel),
        ("res_reserve_cost", |r| r.totals.cost.res_reserve),
        ("ess_reserve_cost", |r| r.totals.cost.ess_reserve),
        ("total_cost", |r| r.totals.total_cost),
        ("curtailment_pct", |r| r.totals.curtailment_pct),
        ("nadir_failures", |r| r.nadir_failures() as f64),
        ("linear_violations", |r| r.linear_violations() as f64),
        ("loss_gap", |r| r.loss_gap),
    ];
    for (name, f) in rows {
        let mut line = format!("{name:<20}");
        for r in &reports {
            line.push_str(&format!(" {:>16}", format_sig(f(r))));
        }
        ctx.say(line);
    }
    ctx.say(format!("wrote {} (config hash {})", a.out.display(), &meta.config_hash[..16]));
    Ok(json!({
        "command": "roll",
        "out": a.out.display().to_string(),
        "config_hash": meta.config_hash,
        "seed": scenario.seed,
        "modes": reports.iter().map(mode_summary).collect::<Vec<_>>(),
    }))
}

fn disturbance(case: &DispatchCase, load: f64, dp: Option<f64>) -> Result<f64, CliError> {
    let dp = dp.unwrap_or_else(|| case.disturbance_pu(load));
    if !(dp.is_finite() && dp > 0.0) {
        return Err(CliError::validation(format!("disturbance must be > 0 (got {dp} pu)")));
    }
    Ok(dp)
}

fn cha(ctx: &Ctx, a: &ChaArgs) -> Result<Value, CliError> {
    let case = case_with_overrides(&a.case)?;
    let dp = disturbance(&case, a.load, a.disturbance_pu)?;
    if a.samples.is_empty() {
        return Err(CliError::validation("--samples needs at least one size"));
    }
    let seed = ctx.seed.unwrap_or(DEFAULT_SEED);
    let spec = case.nadir_spec(dp);
    let mut cols = Vec::new();
    let mut last: Option<HalfspaceSet> = None;
    for &n in &a.samples {
        let cfg = case.cha_config(n, seed);
        let hs = build_nadir_halfspaces(&spec, &cfg)?;
        let err = classification_error(&hs, |p| spec.is_feasible(p), &cfg, a.test_samples, seed.wrapping_add(1));
        let meta = hs.meta.clone().expect("fresh build carries metadata");
        cols.push(json!({
            "samples": n,
            "hyperplanes": hs.len(),
            "time_s": meta.wall_time_s,
            "error_pct": 100.0 * err.error_rate,
            "false_safe": err.false_safe_count,
            "false_unsafe": err.false_unsafe_count,
            "feasible_samples": meta.n_feasible,
        }));
        last = Some(hs);
    }

    let ((h0, h1), (d0, d1)) = case.hd_bounds();
    ctx.say(format!(
        "{}: disturbance {} pu, H in [{}, {}] s, D in [{}, {}] pu, {} test samples",
        case.name,
        format_sig(dp),
        format_sig(h0),
        format_sig(h1),
        format_sig(d0),
        format_sig(d1),
        a.test_samples
    ));
    let table: [(&str, &str, usize); 5] = [
        ("Initial samples", "samples", 0),
        ("Hyperplanes", "hyperplanes", 0),
        ("Time (s)", "time_s", 4),
        ("Classification error (%)", "error_pct", 3),
        ("False-safe samples", "false_safe", 0),
    ];
    for (label, key, prec) in table {
        let mut line = format!("{label:<26}");
        for c in &cols {
            let v = c[key].as_f64().unwrap_or(f64::NAN);
            line.push_str(&format!(" {:>10.*}", prec, v));
        }
        ctx.say(line);
    }
    if let (Some(path), Some(hs)) = (&a.out, &last) {
        fs::write(path, io::to_canonical_json(hs)?)?;
        ctx.say(format!("wrote {}", path.display()));
    }
    Ok(json!({
        "command": "cha",
        "disturbance_pu": dp,
        "seed": seed,
        "test_samples": a.test_samples,
        "columns": cols,
    }))
}

fn simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<Value, CliError> {
    let case = case_with_overrides(&a.case)?;
    let dp = disturbance(&case, a.load, a.disturbance_pu)?;
    let (fh, fd) = case.fixed_hd();
    let (h, d) = (a.h.unwrap_or(fh), a.d.unwrap_or(fd));
    let p = case.sfr_params(h, d);
    p.validate()?;
    let f0 = case.limits.f0;
    let m = sfr::metrics(&p, dp, f0)?;
    let traj = simulate_step_response(&p, dp, f0, a.t_end, a.dt)?;
    let (peak, t_peak) = traj.peak();
    let chk = sfr::check_limits(&m, &case.limits);

    ctx.say(format!(
        "H = {} s, D = {} pu, R = {}, F = {}, T = {} s, disturbance {} pu",
        format_sig(h),
        format_sig(d),
        format_sig(p.droop_gain),
        format_sig(p.turbine_fraction),
        format_sig(p.time_constant),
        format_sig(dp)
    ));
    ctx.say(format!("{:<22} {:>12} {:>12} {:>8}", "metric", "analytic", "simulated", "limit"));
    let rows = [
        ("rocof_hz_per_s", m.rocof_max, traj.initial_rate(), case.limits.max_rocof),
        ("delta_f_ss_hz", m.delta_f_ss, traj.final_deviation().abs(), case.limits.max_steady_state),
        ("delta_f_max_hz", m.delta_f_max, peak, case.limits.max_deviation),
    ];
    for (name, an, sim, lim) in rows {
        ctx.say(format!("{name:<22} {an:>12.6} {sim:>12.6} {lim:>8}"));
    }
    ctx.say(format!("{:<22} {:>12.4} {:>12.4}", "t_nadir_s", m.t_nadir, t_peak));
    ctx.say(format!(
        "limits: rocof {}, steady state {}, nadir {}",
        ok(chk.rocof_ok),
        ok(chk.steady_state_ok),
        ok(chk.nadir_ok)
    ));
    if let Some(path) = &a.out {
        let every = a.every.max(1);
        let mut w = std::io::BufWriter::new(fs::File::create(path)?);
        writeln!(w, "time_s,deviation_hz,rate_hz_per_s")?;
        for i in (0..traj.len()).step_by(every) {
            writeln!(
                w,
                "{},{},{}",
                format_sig(traj.times[i]),
                format_sig(traj.deviation[i]),
                format_sig(traj.rate[i])
            )?;
        }
        w.flush()?;
        ctx.say(format!("wrote {}", path.display()));
    }
    Ok(json!({
        "command": "simulate-freq",
        "h": h,
        "d": d,
        "disturbance_pu": dp,
        "analytic": m,
        "simulated": {"rocof_max": traj.initial_rate(), "delta_f_ss": traj.final_deviation().abs(), "delta_f_max": peak, "t_nadir": t_peak},
        "rocof_ok": chk.rocof_ok,
        "steady_state_ok": chk.steady_state_ok,
        "nadir_ok": chk.nadir_ok,
    }))
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "VIOLATED"
    }
}

fn convexity(ctx: &Ctx, a: &ConvexityArgs) -> Result<Value, CliError> {
    if a.samples == 0 {
        return Err(CliError::validation("--samples must be >= 1"));
    }
    if !(a.fd_step > 0.0 && a.fd_step < 0.5) {
        return Err(CliError::validation("--fd-step must be in (0, 0.5)"));
    }
    let cfg = ConvexityConfig {
        n_samples: a.samples,
        fd_step: a.fd_step,
        psd_tol: a.psd_tol,
        seed: ctx.seed.unwrap_or(DEFAULT_SEED),
        ..ConvexityConfig::default()
    };
    let r = certify_convexity(&cfg);
    ctx.say(format!("samples                 {}", r.n_samples));
    ctx.say(format!("min eigenvalue          {:.6e}", r.min_eigenvalue));
    ctx.say(format!("min relative eigenvalue {:.6e}", r.min_relative_eigenvalue));
    ctx.say(format!("overdamped samples      {}", r.n_overdamped));
    ctx.say(format!("violations              {}", r.n_violations));
    Ok(json!({
        "command": "check-convexity",
        "seed": cfg.seed,
        "report": r,
    }))
}

fn quantile(ctx: &Ctx, a: &QuantileArgs) -> Result<Value, CliError> {
    let total: f64 = a.weights.iter().sum();
    let weights = if total > 0.0 && total.is_finite() {
        a.weights.iter().map(|w| w / total).collect()
    } else {
        a.weights.clone()
    };
    let g = UnivariateGmm::new(weights, a.means.clone(), a.variances.clone())?;
    let mut rows = Vec::new();
    ctx.say(format!("{:>8} {:>18} {:>14}", "alpha", "quantile", "cdf"));
    for &alpha in &a.alpha {
        let q = g.quantile(alpha)?;
        let c = g.cdf(q);
        ctx.say(format!("{alpha:>8} {q:>18.10} {c:>14.12}"));
        rows.push(json!({"alpha": alpha, "quantile": q, "cdf": c}));
    }
    Ok(json!({
        "command": "quantile",
        "mean": g.mean(),
        "pooled_sigma": g.pooled_sigma(),
        "quantiles": rows,
    }))
}

fn verify(ctx: &Ctx, a: &VerifyArgs) -> Result<(Value, Option<CliError>), CliError> {
    let case = load_case(&a.case)?;
    let file = io::load_solution(&a.solution)?;
    if file.case_name != case.name {
        eprintln!(
            "warning: solution was computed for case `{}`, auditing against `{}`",
            file.case_name, case.name
        );
    }
    file.window.validate(&case)?;
    if file.solution.periods.len() != file.window.len() {
        return Err(CliError::validation("solution and window lengths differ"));
    }
    let audit = verify_solution(&file.solution, &case, &file.window, a.tol)?;
    for v in &audit.violations {
        ctx.say(format!(
            "period {:>3} {:<16} {:<20} {}",
            v.period,
            v.family.to_string(),
            v.item,
            format_sig(v.amount)
        ));
    }
    let linear = audit.linear_violations().count();
    let freq = audit.frequency_failures().len();
    ctx.say(format!(
        "{} periods, {linear} linear violations, {freq} periods with frequency violations, loss gap {:.2e}",
        file.window.len(),
        audit.loss_gap
    ));
    let summary = json!({
        "command": "verify",
        "mode": file.mode.label(),
        "periods": file.window.len(),
        "violations": audit.violations,
        "linear_violations": linear,
        "frequency_failures": freq,
        "loss_gap": audit.loss_gap,
    });
    let failure = (!audit.is_clean()).then(|| CliError::validation(format!("audit found {} violations", audit.violations.len())));
    Ok((summary, failure))
}
