use std::fs;
use std::path::PathBuf;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use neural_pulse::front::{evans_front, solve_front_speed, FrontOptions, FrontSolution};
use neural_pulse::jacobian::{jacobian_at_base_from_front, JacobianAtBase};
use neural_pulse::kernels::{check_hypotheses, KernelSpec};
use neural_pulse::pulse::{pulse_quad, solve_pulse, ModelParams, PulseSolution};
use neural_pulse::simulator::{run_pulse_experiment, BumpSpec, GridConfig, TrackPoint};
use neural_pulse::verification::{verify_pulse, Crossing, RegionMetrics, TailBounds};

use crate::config::{Format, RunConfig};
use crate::output::{fmt_num, Sink};
use crate::{Cli, CliError, Command, Outcome};

/// λ values at which the front's Evans function is reported.
const EVANS_LAMBDAS: [f64; 9] = [-0.5, -0.25, -0.1, 0.0, 0.1, 0.25, 0.5, 1.0, 3.0];

const FRONT_WINDOW: (f64, f64) = (-20.0, 20.0);

/// Pulse profiles are exported where `|U|, |Q|` exceed this.
const PROFILE_TAIL: f64 = 1e-8;

pub struct Context {
    pub cfg: RunConfig,
    pub kernel: KernelSpec,
    pub out_dir: PathBuf,
    pub format: Format,
    pub workers: Option<usize>,
}

pub fn load(cli: &Cli) -> Result<Context, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = RunConfig::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(PathBuf::from).unwrap_or_default();
    let kernel = cfg.kernel.build(&base)?;
    if cli.workers == Some(0) {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    Ok(Context {
        out_dir: cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone()),
        format: cli.format.unwrap_or(cfg.output.format),
        workers: cli.workers.or(cfg.workers),
        kernel,
        cfg,
    })
}

pub fn run(command: Command, ctx: &Context) -> Result<Outcome, CliError> {
    let mut sink = Sink::new(&ctx.out_dir, ctx.format)?;
    let outcome = match command {
        Command::Front => front(ctx, &mut sink),
        Command::Pulse => pulse(ctx, &mut sink),
        Command::Asymptotics => asymptotics(ctx, &mut sink),
        Command::Verify => verify(ctx, &mut sink),
        Command::Simulate => simulate(ctx, &mut sink),
        Command::Sweep => sweep(ctx, &mut sink),
    }?;
    for p in &sink.written {
        println!("{}", p.display());
    }
    Ok(outcome)
}

fn config_err(msg: String) -> CliError {
    CliError::Config(msg)
}

fn solved_front(ctx: &Context) -> Result<FrontSolution, CliError> {
    check_hypotheses(&ctx.kernel, ctx.cfg.theta, ctx.cfg.gamma).into_result()?;
    let front = solve_front_speed(&ctx.kernel, ctx.cfg.theta, &FrontOptions::default())?;
    info!("front speed c_f = {}", front.speed);
    Ok(front)
}

fn params(ctx: &Context, epsilon: f64) -> Result<ModelParams, CliError> {
    Ok(ModelParams::new(ctx.cfg.theta, ctx.cfg.gamma, epsilon)?)
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

fn window(ctx: &Context, default: (f64, f64)) -> Result<(f64, f64), CliError> {
    let p = &ctx.cfg.profile;
    let w = (p.z_min.unwrap_or(default.0), p.z_max.unwrap_or(default.1));
    if w.0.partial_cmp(&w.1) != Some(std::cmp::Ordering::Less) {
        return Err(config_err(format!("empty profile window [{}, {}]", w.0, w.1)));
    }
    Ok(w)
}

#[derive(Serialize)]
struct EvansSample {
    lambda: f64,
    value: f64,
}

#[derive(Serialize)]
struct FrontSummary {
    kernel: String,
    theta: f64,
    c_f: f64,
    residual: f64,
    phi_prime: f64,
    evans: Vec<EvansSample>,
    /// `sign(E(λ)) = sign(λ)` at every sample.
    evans_sign_consistent: bool,
}

fn front(ctx: &Context, sink: &mut Sink) -> Result<Outcome, CliError> {
    let front = solved_front(ctx)?;
    let evans = EVANS_LAMBDAS
        .iter()
        .map(|&lambda| Ok(EvansSample { lambda, value: evans_front(&front, lambda, &ctx.kernel)? }))
        .collect::<Result<Vec<_>, neural_pulse::Error>>()?;
    let consistent = evans.iter().all(|s| {
        if s.lambda == 0.0 {
            s.value.abs() <= 1e-9
        } else {
            s.value.signum() == s.lambda.signum()
        }
    });
    sink.json(
        "front.json",
        &FrontSummary {
            kernel: ctx.kernel.describe(),
            theta: ctx.cfg.theta,
            c_f: front.speed,
            residual: front.residual,
            phi_prime: front.phi_prime,
            evans,
            evans_sign_consistent: consistent,
        },
    )?;
    if ctx.format.csv() {
        let (lo, hi) = window(ctx, FRONT_WINDOW)?;
        let rows = grid(lo, hi, ctx.cfg.profile.points)
            .map(|z| front.profile(z).map(|(u, du)| vec![z, u, du]))
            .collect::<Result<Vec<_>, _>>()?;
        sink.csv("front_profile.csv", &["z", "U_f", "U_f_prime"], rows)?;
    }
    Ok(Outcome::Success)
}

fn solve(ctx: &Context, epsilon: f64) -> Result<PulseSolution, CliError> {
    let sol = solve_pulse(&ctx.kernel, params(ctx, epsilon)?, None, &ctx.cfg.solver.options())?;
    info!(
        "ε = {epsilon}: c = {}, a = {}, {} Newton iterations",
        sol.wave.speed, sol.wave.width, sol.newton.iterations
    );
    Ok(sol)
}

fn single_epsilon(ctx: &Context) -> Result<f64, CliError> {
    ctx.cfg.single_epsilon().map_err(config_err)
}

#[derive(Serialize)]
struct PulseSummary {
    epsilon: f64,
    c: f64,
    a: f64,
    tau: f64,
    c_f: f64,
    iterations: usize,
    residual: f64,
    residual_history: Vec<f64>,
    #[serde(rename = "det_J_estimate")]
    det_j_estimate: f64,
    condition: f64,
    initial_guess: (f64, f64),
    /// `U(0) - θ` and `U(a) - θ`.
    compatibility: (f64, f64),
}

fn pulse(ctx: &Context, sink: &mut Sink) -> Result<Outcome, CliError> {
    let sol = solve(ctx, single_epsilon(ctx)?)?;
    let theta = ctx.cfg.theta;
    let n = &sol.newton;
    let summary = PulseSummary {
        epsilon: sol.params.epsilon,
        c: sol.wave.speed,
        a: sol.wave.width,
        tau: sol.wave.tau,
        c_f: sol.wave.front_speed,
        iterations: n.iterations,
        residual: n.residual,
        residual_history: n.residual_history.clone(),
        det_j_estimate: n.det,
        condition: n.condition,
        initial_guess: n.initial_guess,
        compatibility: (sol.u(0.0)? - theta, sol.u(sol.wave.width)? - theta),
    };
    sink.json("pulse.json", &summary)?;
    if ctx.format.csv() {
        let (lo, hi) = window(ctx, sol.horizon(PROFILE_TAIL))?;
        let rows = grid(lo, hi, ctx.cfg.profile.points)
            .map(|z| sol.profile(z).map(|p| vec![z, p.u, p.q, p.du, p.dq]))
            .collect::<Result<Vec<_>, _>>()?;
        sink.csv("pulse_profile.csv", &["z", "U", "Q", "U_prime", "Q_prime"], rows)?;
    }
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct Prediction {
    epsilon: f64,
    tau: f64,
    c: f64,
    a: f64,
}

#[derive(Serialize)]
struct AsymptoticsSummary {
    tau0: f64,
    c_f: f64,
    f_tau: f64,
    f_c: f64,
    f_eps: f64,
    g_tau: f64,
    g_c: f64,
    g_eps: f64,
    g_eps_componentwise: f64,
    #[serde(rename = "det_J")]
    det_j: f64,
    tau_prime0: f64,
    c_prime0: f64,
    predictions: Vec<Prediction>,
}

fn base_jacobian(ctx: &Context, front: &FrontSolution) -> Result<JacobianAtBase, CliError> {
    Ok(jacobian_at_base_from_front(front, ctx.cfg.gamma, &pulse_quad())?)
}

fn asymptotics(ctx: &Context, sink: &mut Sink) -> Result<Outcome, CliError> {
    let front = solved_front(ctx)?;
    let j = base_jacobian(ctx, &front)?;
    let predictions = ctx
        .cfg
        .epsilons()
        .into_iter()
        .filter(|&e| e > 0.0)
        .map(|epsilon| {
            let (tau, c) = j.predict(epsilon);
            Prediction { epsilon, tau, c, a: tau / epsilon }
        })
        .collect::<Vec<_>>();
    if ctx.format.csv() {
        let rows = predictions.iter().map(|p| vec![p.epsilon, p.tau, p.c, p.a]).collect::<Vec<_>>();
        sink.csv("predictions.csv", &["epsilon", "tau", "c", "a"], rows)?;
    }
    sink.json(
        "asymptotics.json",
        &AsymptoticsSummary {
            tau0: j.tau0,
            c_f: j.c_f,
            f_tau: j.f_tau,
            f_c: j.f_c,
            f_eps: j.f_eps,
            g_tau: j.g_tau,
            g_c: j.g_c,
            g_eps: j.g_eps,
            g_eps_componentwise: j.g_eps_componentwise,
            det_j: j.det,
            tau_prime0: j.tau_prime0,
            c_prime0: j.c_prime0,
            predictions,
        },
    )?;
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct VerifySummary {
    epsilon: f64,
    c: f64,
    a: f64,
    tau: f64,
    /// Number of threshold crossings found.
    crossings: usize,
    crossing_points: Vec<Crossing>,
    tails: TailBounds,
    uncertified: Vec<(f64, f64)>,
    hausdorff: Option<f64>,
    hausdorff_bound: Option<f64>,
    region_metrics: Option<RegionMetrics>,
    warnings: Vec<String>,
    passed: bool,
}

fn verify(ctx: &Context, sink: &mut Sink) -> Result<Outcome, CliError> {
    let epsilon = single_epsilon(ctx)?;
    let front = solved_front(ctx)?;
    let sol = solve(ctx, epsilon)?;
    let v = verify_pulse(&sol, &front, &ctx.cfg.verification.options())?;
    let r = v.report;
    for w in &r.warnings {
        warn!("{w}");
    }
    sink.json(
        "verify.json",
        &VerifySummary {
            epsilon,
            c: sol.wave.speed,
            a: sol.wave.width,
            tau: sol.wave.tau,
            crossings: r.crossings.len(),
            crossing_points: r.crossings.clone(),
            tails: r.tails,
            uncertified: r.uncertified.clone(),
            hausdorff: r.hausdorff,
            hausdorff_bound: r.hausdorff_bound,
            region_metrics: r.region_metrics,
            warnings: r.warnings.clone(),
            passed: r.passed,
        },
    )?;
    if ctx.format.csv() {
        let zs = v.orbit.z_values.clone().unwrap_or_default();
        let rows = v
            .orbit
            .points
            .iter()
            .enumerate()
            .map(|(i, &(u, q))| vec![zs.get(i).copied().unwrap_or(f64::NAN), u, q]);
        sink.csv("orbit.csv", &["z", "U", "Q"], rows)?;
        let names = ["front", "right_manifold", "back", "left_manifold"];
        let rows = v
            .singular
            .segments()
            .into_iter()
            .zip(names)
            .flat_map(|(seg, name)| seg.points.iter().map(move |&(u, q)| vec![name.to_string(), fmt_num(u), fmt_num(q)]))
            .collect::<Vec<_>>();
        sink.csv_text("singular_orbit.csv", &["segment", "U", "Q"], rows)?;
    }
    Ok(if r.passed { Outcome::Success } else { Outcome::CheckFailed })
}

#[derive(Serialize)]
struct SimulateSummary {
    epsilon: f64,
    measured_speed: f64,
    measured_width: Option<f64>,
    /// Analytic pulse speed, or the front speed when `ε = 0`.
    reference_speed: f64,
    reference_width: Option<f64>,
    speed_error: f64,
    width_error: Option<f64>,
    speed_tol: f64,
    width_tol: f64,
    bump: BumpSpec,
    grid: GridConfig,
    passed: bool,
}

fn relative(measured: f64, reference: f64) -> f64 {
    (measured - reference).abs() / reference.abs()
}

fn simulate(ctx: &Context, sink: &mut Sink) -> Result<Outcome, CliError> {
    let sim = ctx
        .cfg
        .simulation
        .as_ref()
        .ok_or_else(|| config_err("`simulate` needs a `simulation` section".into()))?;
    let epsilon = single_epsilon(ctx)?;
    let front = solved_front(ctx)?;
    let (reference_speed, reference_width) = if epsilon > 0.0 {
        let sol = solve(ctx, epsilon)?;
        (sol.wave.speed, Some(sol.wave.width))
    } else {
        (front.speed, None)
    };
    let bump = sim
        .bump
        .unwrap_or_else(|| BumpSpec::standard(&sim.grid, &ctx.kernel, ctx.cfg.theta, front.speed));
    let exp = run_pulse_experiment(&sim.grid, &ctx.kernel, &params(ctx, epsilon)?, &bump)?;
    let speed_error = relative(exp.measured_speed, reference_speed);
    let width_error = match (exp.measured_width, reference_width) {
        (Some(w), Some(r)) => Some(relative(w, r)),
        _ => None,
    };
    let passed = speed_error <= sim.speed_tol && width_error.is_none_or(|e| e <= sim.width_tol);
    sink.json(
        "simulate.json",
        &SimulateSummary {
            epsilon,
            measured_speed: exp.measured_speed,
            measured_width: exp.measured_width,
            reference_speed,
            reference_width,
            speed_error,
            width_error,
            speed_tol: sim.speed_tol,
            width_tol: sim.width_tol,
            bump,
            grid: sim.grid,
            passed,
        },
    )?;
    if ctx.format.csv() {
        let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
        let rows = exp
            .track
            .iter()
            .map(|p: &TrackPoint| vec![p.t, opt(p.front_position), opt(p.back_position)]);
        sink.csv("track.csv", &["t", "front_position", "back_position"], rows)?;
        let s = &exp.snapshot;
        let rows = exp.x().into_iter().enumerate().map(|(i, x)| vec![x, s.u[i], s.q[i]]);
        sink.csv("final_profile.csv", &["x", "u", "q"], rows)?;
    }
    Ok(if passed { Outcome::Success } else { Outcome::CheckFailed })
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    epsilon: f64,
    tau: Option<f64>,
    c: Option<f64>,
    a: Option<f64>,
    #[serde(rename = "d_H")]
    d_h: Option<f64>,
    crossings: Option<usize>,
    first_order_error_tau: Option<f64>,
    first_order_error_c: Option<f64>,
    passed: bool,
    error: Option<String>,
}

#[derive(Serialize)]
struct SweepSummary {
    tau0: f64,
    c_f: f64,
    tau_prime0: f64,
    c_prime0: f64,
    rows: Vec<SweepRow>,
    /// `d_H` strictly decreases down the table.
    hausdorff_decreasing: bool,
    all_passed: bool,
}

fn sweep_row(ctx: &Context, front: &FrontSolution, j: &JacobianAtBase, epsilon: f64) -> SweepRow {
    let mut row = SweepRow {
        epsilon,
        tau: None,
        c: None,
        a: None,
        d_h: None,
        crossings: None,
        first_order_error_tau: None,
        first_order_error_c: None,
        passed: false,
        error: None,
    };
    let sol = match solve(ctx, epsilon) {
        Ok(s) => s,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let (tau_pred, c_pred) = j.predict(epsilon);
    row.tau = Some(sol.wave.tau);
    row.c = Some(sol.wave.speed);
    row.a = Some(sol.wave.width);
    row.first_order_error_tau = Some((sol.wave.tau - tau_pred).abs());
    row.first_order_error_c = Some((sol.wave.speed - c_pred).abs());
    match verify_pulse(&sol, front, &ctx.cfg.verification.options()) {
        Ok(v) => {
            row.d_h = v.report.hausdorff;
            row.crossings = Some(v.report.crossings.len());
            row.passed = v.report.passed;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn sweep(ctx: &Context, sink: &mut Sink) -> Result<Outcome, CliError> {
    let mut eps = ctx.cfg.epsilons();
    if eps.is_empty() {
        return Err(config_err("`sweep` needs an `epsilon` list".into()));
    }
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    let front = solved_front(ctx)?;
    let j = base_jacobian(ctx, &front)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = ctx.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Io(e.to_string()))?;
    // `collect` on an indexed parallel iterator keeps input order.
    let rows: Vec<SweepRow> = pool.install(|| eps.par_iter().map(|&e| sweep_row(ctx, &front, &j, e)).collect());
    for r in rows.iter().filter(|r| !r.passed) {
        warn!("ε = {} failed: {}", r.epsilon, r.error.as_deref().unwrap_or("verification failed"));
    }
    let all_passed = rows.iter().all(|r| r.passed);
    let hausdorff_decreasing = rows
        .windows(2)
        .all(|w| matches!((w[0].d_h, w[1].d_h), (Some(a), Some(b)) if b < a));
    if ctx.format.csv() {
        let num = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
        let table = rows
            .iter()
            .map(|r| {
                vec![
                    fmt_num(r.epsilon),
                    num(r.tau),
                    num(r.c),
                    num(r.a),
                    num(r.d_h),
                    r.crossings.map(|n| n.to_string()).unwrap_or_default(),
                    num(r.first_order_error_tau),
                    num(r.first_order_error_c),
                    r.passed.to_string(),
                    r.error.clone().unwrap_or_default(),
                ]
            })
            .collect::<Vec<_>>();
        sink.csv_text(
            "sweep.csv",
            &[
                "epsilon",
                "tau",
                "c",
                "a",
                "d_H",
                "crossings",
                "first_order_error_tau",
                "first_order_error_c",
                "passed",
                "error",
            ],
            table,
        )?;
    }
    sink.json(
        "sweep.json",
        &SweepSummary {
            tau0: j.tau0,
            c_f: j.c_f,
            tau_prime0: j.tau_prime0,
            c_prime0: j.c_prime0,
            rows,
            hausdorff_decreasing,
            all_passed,
        },
    )?;
    Ok(if all_passed { Outcome::Success } else { Outcome::CheckFailed })
}
