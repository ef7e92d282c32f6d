//! Method-of-lines integration of `u_t = -u - q + K*H(u-θ)`,
//! `q_t = ε(u - γq)` on `[-L, L]` with classical RK4, plus measurement of
//! wave speed and width.
//!
//! The convolution against the Heaviside nonlinearity is evaluated exactly
//! for the piecewise-linear interpolant of `u`: the super-threshold set is a
//! union of intervals `[l, r]` and `∫_l^r K(x-y) dy = F(x-l) - F(x-r)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::front::{solve_front_speed, FrontOptions};
use crate::kernels::KernelSpec;
use crate::pulse::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Domain is `[-L, L]`.
    pub half_length: f64,
    pub n_points: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Speed and width are fitted on `t >= tracking_start`.
    pub tracking_start: f64,
    /// Interval between recorded track points.
    #[serde(default = "default_record_every")]
    pub record_every: f64,
}

fn default_record_every() -> f64 {
    0.5
}

impl GridConfig {
    /// Grid with spacing `h` and the largest admissible step for speed `c_f`.
    pub fn with_spacing(half_length: f64, h: f64, c_f: f64, t_end: f64, tracking_start: f64) -> Self {
        let n_points = (2.0 * half_length / h).round() as usize + 1;
        Self {
            half_length,
            n_points,
            dt: h / (4.0 * c_f),
            t_end,
            tracking_start,
            record_every: default_record_every(),
        }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / (self.n_points as f64 - 1.0)
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.spacing()
    }

    /// Checks resolution of the kernel and the front, and the step bound.
    pub fn validate(&self, kernel: &KernelSpec, front_speed: f64) -> Result<()> {
        if !(self.half_length > 0.0 && self.n_points >= 3) {
            return Err(Error::Parameter("grid needs L > 0 and at least 3 points".into()));
        }
        if !(self.dt > 0.0 && self.t_end > 0.0 && self.record_every > 0.0) {
            return Err(Error::Parameter("dt, t_end and record_every must be positive".into()));
        }
        if !(self.tracking_start >= 0.0 && self.tracking_start < self.t_end) {
            return Err(Error::Parameter(format!(
                "tracking_start {} must lie in [0, t_end = {})",
                self.tracking_start, self.t_end
            )));
        }
        let h = self.spacing();
        let rho = kernel.tail_rho();
        // Relative slack keeps round numbers like h = 0.05 = c_f/20 admissible.
        let slack = 1.0 + 1e-9;
        if h > slack * 0.1 / rho {
            return Err(Error::Parameter(format!("h = {h} does not resolve the kernel (need h <= {})", 0.1 / rho)));
        }
        if h > slack * front_speed / 20.0 {
            return Err(Error::Parameter(format!(
                "h = {h} does not resolve the front (need h <= c_f/20 = {})",
                front_speed / 20.0
            )));
        }
        if self.dt > slack * h / (4.0 * front_speed) {
            return Err(Error::Parameter(format!(
                "dt = {} exceeds h/(4 c_f) = {}",
                self.dt,
                h / (4.0 * front_speed)
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldState {
    pub u: Vec<f64>,
    pub q: Vec<f64>,
    pub t: f64,
}

impl FieldState {
    pub fn rest(cfg: &GridConfig) -> Self {
        Self {
            u: vec![0.0; cfg.n_points],
            q: vec![0.0; cfg.n_points],
            t: 0.0,
        }
    }
}

/// Raised-cosine initial condition for `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub center: f64,
    pub height: f64,
    pub width: f64,
}

impl BumpSpec {
    /// Height `2θ`, width `4 c_f`, placed near the right boundary so the
    /// wave it launches towards `-x` can cross most of the domain.
    pub fn standard(cfg: &GridConfig, kernel: &KernelSpec, theta: f64, front_speed: f64) -> Self {
        let width = 4.0 * front_speed;
        Self {
            center: cfg.half_length - 2.0 * width - 5.0 / kernel.tail_rho(),
            height: 2.0 * theta,
            width,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s = (x - self.center) / (0.5 * self.width);
        if s.abs() >= 1.0 {
            0.0
        } else {
            0.5 * self.height * (1.0 + (std::f64::consts::PI * s).cos())
        }
    }
}

// Scratch buffers for the RK4 stages.
struct Stepper<'k> {
    kernel: &'k KernelSpec,
    theta: f64,
    gamma: f64,
    eps: f64,
    xs: Vec<f64>,
    intervals: Vec<(f64, f64)>,
    ku: [Vec<f64>; 4],
    kq: [Vec<f64>; 4],
    tu: Vec<f64>,
    tq: Vec<f64>,
}

impl<'k> Stepper<'k> {
    fn new(cfg: &GridConfig, kernel: &'k KernelSpec, params: &ModelParams) -> Self {
        let n = cfg.n_points;
        let z = || vec![0.0; n];
        Self {
            kernel,
            theta: params.theta,
            gamma: params.gamma,
            eps: params.epsilon,
            xs: (0..n).map(|i| cfg.x(i)).collect(),
            intervals: Vec::new(),
            ku: [z(), z(), z(), z()],
            kq: [z(), z(), z(), z()],
            tu: z(),
            tq: z(),
        }
    }

    fn rhs(&mut self, u: &[f64], q: &[f64], stage: usize) {
        super_threshold_intervals(&self.xs, u, self.theta, &mut self.intervals);
        let n = u.len();
        let (du, dq) = (&mut self.ku[stage], &mut self.kq[stage]);
        for i in 1..n - 1 {
            let x = self.xs[i];
            let conv: f64 = self
                .intervals
                .iter()
                .map(|&(l, r)| self.kernel.cumulative(x - l) - self.kernel.cumulative(x - r))
                .sum();
            du[i] = -u[i] - q[i] + conv;
            dq[i] = self.eps * (u[i] - self.gamma * q[i]);
        }
        // Clamped ends.
        du[0] = 0.0;
        dq[0] = 0.0;
        du[n - 1] = 0.0;
        dq[n - 1] = 0.0;
    }

    fn step(&mut self, st: &mut FieldState, dt: f64) -> Result<()> {
        let n = st.u.len();
        let stages = [0.0, 0.5, 0.5, 1.0];
        for (s, &frac) in stages.iter().enumerate() {
            if s == 0 {
                let (u, q) = (st.u.clone(), st.q.clone());
                self.rhs(&u, &q, 0);
                continue;
            }
            let w = frac * dt;
            for i in 0..n {
                self.tu[i] = st.u[i] + w * self.ku[s - 1][i];
                self.tq[i] = st.q[i] + w * self.kq[s - 1][i];
            }
            let (tu, tq) = (std::mem::take(&mut self.tu), std::mem::take(&mut self.tq));
            self.rhs(&tu, &tq, s);
            self.tu = tu;
            self.tq = tq;
        }
        for i in 0..n {
            st.u[i] += dt / 6.0 * (self.ku[0][i] + 2.0 * self.ku[1][i] + 2.0 * self.ku[2][i] + self.ku[3][i]);
            st.q[i] += dt / 6.0 * (self.kq[0][i] + 2.0 * self.kq[1][i] + 2.0 * self.kq[2][i] + self.kq[3][i]);
        }
        st.t += dt;
        if st.u.iter().chain(st.q.iter()).any(|v| !v.is_finite() || v.abs() > 1e6) {
            return Err(Error::Instability(format!(
                "non-finite or exploding field at t = {}; try a smaller dt",
                st.t
            )));
        }
        Ok(())
    }
}

/// Maximal intervals where the linear interpolant of `u` is `>= θ`.
fn super_threshold_intervals(xs: &[f64], u: &[f64], theta: f64, out: &mut Vec<(f64, f64)>) {
    out.clear();
    let mut start = if u[0] >= theta { Some(xs[0]) } else { None };
    for i in 0..u.len() - 1 {
        let (a, b) = (u[i] - theta, u[i + 1] - theta);
        if (a < 0.0) != (b < 0.0) {
            let x = xs[i] + (xs[i + 1] - xs[i]) * a / (a - b);
            match start.take() {
                Some(l) => out.push((l, x)),
                None => start = Some(x),
            }
        }
    }
    if let Some(l) = start {
        out.push((l, xs[xs.len() - 1]));
    }
}

/// One explicit RK4 step.
pub fn step(state: &FieldState, cfg: &GridConfig, kernel: &KernelSpec, params: &ModelParams) -> Result<FieldState> {
    if state.u.len() != cfg.n_points || state.q.len() != cfg.n_points {
        return Err(Error::Parameter("state size does not match the grid".into()));
    }
    let mut next = state.clone();
    Stepper::new(cfg, kernel, params).step(&mut next, cfg.dt)?;
    Ok(next)
}

/// Leftmost upward crossing of `θ` (the front edge of a wave moving to
/// `-x`) and the first downward crossing after it.
pub fn edge_positions(xs: &[f64], u: &[f64], theta: f64) -> (Option<f64>, Option<f64>) {
    let mut iv = Vec::new();
    super_threshold_intervals(xs, u, theta, &mut iv);
    match iv.first() {
        Some(&(l, r)) => {
            let front = (l > xs[0]).then_some(l);
            let back = (r < xs[xs.len() - 1]).then_some(r);
            (front, back)
        }
        None => (None, None),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackPoint {
    pub t: f64,
    pub front_position: Option<f64>,
    pub back_position: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Experiment {
    /// Speed of the front edge towards `-x`.
    pub measured_speed: f64,
    /// Back-minus-front distance at the last track point, where the back
    /// has had longest to relax; `None` when `ε = 0`.
    pub measured_width: Option<f64>,
    pub track: Vec<TrackPoint>,
    pub snapshot: FieldState,
    pub grid: GridConfig,
}

impl Experiment {
    pub fn x(&self) -> Vec<f64> {
        (0..self.grid.n_points).map(|i| self.grid.x(i)).collect()
    }
}

fn slope(ts: &[f64], xs: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let (mt, mx) = (ts.iter().sum::<f64>() / n, xs.iter().sum::<f64>() / n);
    let cov: f64 = ts.iter().zip(xs).map(|(t, x)| (t - mt) * (x - mx)).sum();
    let var: f64 = ts.iter().map(|t| (t - mt) * (t - mt)).sum();
    cov / var
}

/// Evolves from a bump at rest and measures the emitted wave.
pub fn run_pulse_experiment(
    cfg: &GridConfig,
    kernel: &KernelSpec,
    params: &ModelParams,
    initial: &BumpSpec,
) -> Result<Experiment> {
    params.check(kernel).into_result()?;
    let front = solve_front_speed(kernel, params.theta, &FrontOptions::default())?;
    cfg.validate(kernel, front.speed)?;
    let mut state = FieldState::rest(cfg);
    for i in 1..cfg.n_points - 1 {
        state.u[i] = initial.eval(cfg.x(i));
    }
    let mut stepper = Stepper::new(cfg, kernel, params);
    let margin = (5.0 / kernel.tail_rho()).max(5.0 * cfg.spacing());
    let (lo, hi) = (-cfg.half_length + margin, cfg.half_length - margin);
    let measure_width = params.epsilon > 0.0;

    let steps = (cfg.t_end / cfg.dt).round() as usize;
    let every = ((cfg.record_every / cfg.dt).round() as usize).max(1);
    let mut track = Vec::new();
    for k in 1..=steps {
        stepper.step(&mut state, cfg.dt)?;
        if k % every != 0 && k != steps {
            continue;
        }
        let (f, b) = edge_positions(&stepper.xs, &state.u, params.theta);
        track.push(TrackPoint {
            t: state.t,
            front_position: f,
            back_position: b,
        });
        if state.t + 0.5 * cfg.dt < cfg.tracking_start {
            continue;
        }
        let f = f.ok_or_else(|| Error::NoPulse(format!("no upward threshold crossing at t = {:.3}", state.t)))?;
        if f < lo {
            return Err(Error::DomainSize(format!(
                "front edge at x = {f:.3} reached the boundary layer at t = {:.3}",
                state.t
            )));
        }
        if measure_width {
            let b = b.ok_or_else(|| Error::NoPulse(format!("no back edge behind the front at t = {:.3}", state.t)))?;
            if b > hi {
                return Err(Error::DomainSize(format!(
                    "back edge at x = {b:.3} is within the boundary layer at t = {:.3}",
                    state.t
                )));
            }
        }
    }
    let tracked: Vec<&TrackPoint> = track.iter().filter(|p| p.t + 0.5 * cfg.dt >= cfg.tracking_start).collect();
    if tracked.len() < 3 {
        return Err(Error::Parameter("fewer than 3 track points after tracking_start".into()));
    }
    let ts: Vec<f64> = tracked.iter().map(|p| p.t).collect();
    let fs: Vec<f64> = tracked.iter().map(|p| p.front_position.unwrap()).collect();
    let measured_speed = -slope(&ts, &fs);
    if !(measured_speed > 0.0) {
        return Err(Error::NoPulse(format!("front edge is not advancing (speed {measured_speed:.3e})")));
    }
    let last = tracked[tracked.len() - 1];
    let measured_width = measure_width.then(|| last.back_position.unwrap() - last.front_position.unwrap());
    log::debug!("simulation: speed {measured_speed}, width {measured_width:?}");
    Ok(Experiment {
        measured_speed,
        measured_width,
        track,
        snapshot: state,
        grid: *cfg,
    })
}
