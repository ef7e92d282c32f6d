//! Fast traveling pulses: the closed-form propagators `C, Cx, D, Dx`, the
//! speed index pair `(f, g)`, the `ε = 0` base point, the Newton solve for
//! `(τ(ε), c(ε))` and evaluation of the pulse profile.

use serde::{Deserialize, Serialize};

use crate::eigen::{compute_eigen, EigenPair};
use crate::error::{Error, Result};
use crate::front::{phi_f_with, solve_front_speed, FrontOptions, FrontSolution, WEIGHT_CUTOFF};
use crate::jacobian::{jacobian_at_base_from_front, partials_f_with, partials_g_with};
use crate::kernels::{check_hypotheses, HypothesisReport, KernelSpec};
use crate::quadrature::QuadConfig;

/// Terms carrying a factor `e^{-ρτ/ε}` are dropped once `ρτ/ε` exceeds this.
pub const UNDERFLOW_EXPONENT: f64 = 700.0;

/// Required distance of `2θ(1+γ) - γ` from 0 and 1.
pub const BASE_POINT_MARGIN: f64 = 1e-10;

/// Model parameters `(θ, γ, ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub theta: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl ModelParams {
    pub fn new(theta: f64, gamma: f64, epsilon: f64) -> Result<Self> {
        if !(theta.is_finite() && gamma.is_finite() && epsilon.is_finite()) {
            return Err(Error::Parameter("theta, gamma and epsilon must be finite".into()));
        }
        if epsilon < 0.0 {
            return Err(Error::Parameter(format!("epsilon must be >= 0, got {epsilon}")));
        }
        Ok(Self { theta, gamma, epsilon })
    }

    /// Hypothesis clauses for this parameter set and kernel.
    pub fn check(&self, kernel: &KernelSpec) -> HypothesisReport {
        check_hypotheses(kernel, self.theta, self.gamma)
    }
}

/// Speed and width of a pulse; `width * epsilon == tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    pub speed: f64,
    pub tau: f64,
    pub width: f64,
    /// Speed of the `ε = 0` front the pulse continues from.
    pub front_speed: f64,
}

impl WaveParams {
    pub fn new(speed: f64, tau: f64, epsilon: f64, front_speed: f64) -> Self {
        Self {
            speed,
            tau,
            width: tau / epsilon,
            front_speed,
        }
    }

    /// `|c - c_f|`.
    pub fn speed_shift(&self) -> f64 {
        (self.speed - self.front_speed).abs()
    }
}

/// The closed-form kernels of the formal solution at fixed `(c, ε)`.
/// All arguments are expected to be `<= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator {
    pub c: f64,
    pub eigen: EigenPair,
    gap: f64,
    one_minus_w1: f64,
    one_minus_w2: f64,
}

impl Propagator {
    pub fn new(c: f64, eigen: EigenPair) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Parameter(format!("wave speed must be positive, got {c}")));
        }
        Ok(Self {
            c,
            eigen,
            gap: eigen.gap(),
            one_minus_w1: eigen.one_minus_omega1,
            one_minus_w2: eigen.one_minus_omega2(),
        })
    }

    #[inline]
    fn exps(&self, x: f64) -> (f64, f64) {
        (
            (self.eigen.omega1 * x / self.c).exp(),
            (self.eigen.omega2 * x / self.c).exp(),
        )
    }

    pub fn c(&self, x: f64) -> f64 {
        let (e1, e2) = self.exps(x);
        let e = &self.eigen;
        (e.ratio_one_minus_omega2_over_omega1 * e1 - e.ratio_one_minus_omega1_over_omega2 * e2) / self.gap
    }

    pub fn cx(&self, x: f64) -> f64 {
        let (e1, e2) = self.exps(x);
        (self.one_minus_w2 * e1 - self.one_minus_w1 * e2) / (self.c * self.gap)
    }

    pub fn d(&self, x: f64) -> f64 {
        let (e1, e2) = self.exps(x);
        let e = &self.eigen;
        (-e.epsilon_over_omega1() * e1 + e.epsilon_over_omega2() * e2) / self.gap
    }

    pub fn dx(&self, x: f64) -> f64 {
        let (e1, e2) = self.exps(x);
        self.eigen.epsilon * (e2 - e1) / (self.c * self.gap)
    }

    pub fn cxx(&self, x: f64) -> f64 {
        let (e1, e2) = self.exps(x);
        let e = &self.eigen;
        (e.omega1 * self.one_minus_w2 * e1 - e.omega2 * self.one_minus_w1 * e2) / (self.c * self.c * self.gap)
    }

    pub fn cxc(&self, x: f64) -> f64 {
        let (e1, e2) = self.exps(x);
        let e = &self.eigen;
        let c = self.c;
        -((1.0 + x * e.omega1 / c) * self.one_minus_w2 * e1 - (1.0 + x * e.omega2 / c) * self.one_minus_w1 * e2)
            / (c * c * self.gap)
    }

    pub fn cxe(&self, x: f64) -> f64 {
        let (e1, e2) = self.exps(x);
        let e = &self.eigen;
        let c = self.c;
        let k = (e.d_omega1 - e.d_omega2) / self.gap;
        let bracket = (e.d_omega1 * x / c * self.one_minus_w2 - e.d_omega2) * e1
            - (e.d_omega2 * x / c * self.one_minus_w1 - e.d_omega1) * e2;
        -k * self.cx(x) + bracket / (c * self.gap)
    }

    /// `∂C/∂ε`.
    pub fn c_eps(&self, x: f64) -> f64 {
        let (e1, e2) = self.exps(x);
        let e = &self.eigen;
        let c = self.c;
        let k = (e.d_omega1 - e.d_omega2) / self.gap;
        let r1 = e.ratio_one_minus_omega1_over_omega2;
        let r2 = e.ratio_one_minus_omega2_over_omega1;
        -k * self.c(x)
            + (e1 * (e.d_ratio2() + e.d_omega1 * x / c * r2) - e2 * (e.d_ratio1() + e.d_omega2 * x / c * r1)) / self.gap
    }

    /// `∂C/∂c = -(x/c) Cx`.
    pub fn c_c(&self, x: f64) -> f64 {
        -x / self.c * self.cx(x)
    }

    /// `sup_{x<=0} |Cx|`, bounded by the sum of the modal amplitudes.
    pub fn cx_bound(&self) -> f64 {
        (self.one_minus_w2.abs() + self.one_minus_w1.abs()) / (self.c * self.gap)
    }

    /// `sup_{x<=0} |Dx|`.
    pub fn dx_bound(&self) -> f64 {
        self.eigen.epsilon / (self.c * self.gap)
    }

    /// Amplitudes `(A₁, A₂)` with `Cx(x) = A₁ e^{ω₁x/c} - A₂ e^{ω₂x/c}`.
    pub fn cx_modes(&self) -> (f64, f64) {
        let s = self.c * self.gap;
        (self.one_minus_w2 / s, self.one_minus_w1 / s)
    }
}

fn checked(x: f64, c: f64, eigen: &EigenPair) -> Result<Propagator> {
    if x > 0.0 {
        return Err(Error::Domain(format!(
            "closed-form kernels are defined for x <= 0, got {x}"
        )));
    }
    Propagator::new(c, *eigen)
}

#[allow(non_snake_case)]
pub fn eval_C(x: f64, c: f64, eigen: &EigenPair) -> Result<f64> {
    Ok(checked(x, c, eigen)?.c(x))
}

#[allow(non_snake_case)]
pub fn eval_Cx(x: f64, c: f64, eigen: &EigenPair) -> Result<f64> {
    Ok(checked(x, c, eigen)?.cx(x))
}

#[allow(non_snake_case)]
pub fn eval_D(x: f64, c: f64, eigen: &EigenPair) -> Result<f64> {
    Ok(checked(x, c, eigen)?.d(x))
}

#[allow(non_snake_case)]
pub fn eval_Dx(x: f64, c: f64, eigen: &EigenPair) -> Result<f64> {
    Ok(checked(x, c, eigen)?.dx(x))
}

/// `G = C + D`.
#[allow(non_snake_case)]
pub fn eval_G(x: f64, c: f64, eigen: &EigenPair) -> Result<f64> {
    let p = checked(x, c, eigen)?;
    Ok(p.c(x) + p.d(x))
}

/// `Gx = Cx + Dx`.
#[allow(non_snake_case)]
pub fn eval_Gx(x: f64, c: f64, eigen: &EigenPair) -> Result<f64> {
    let p = checked(x, c, eigen)?;
    Ok(p.cx(x) + p.dx(x))
}

/// Default quadrature for the speed index and profile integrals.
pub fn pulse_quad() -> QuadConfig {
    QuadConfig {
        abs_tol: 1e-14,
        rel_tol: 1e-13,
        max_intervals: 4000,
    }
}

pub(crate) fn check_wave(tau: f64, c: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Parameter(format!("tau must be positive, got {tau}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Parameter(format!("wave speed must be positive, got {c}")));
    }
    Ok(())
}

/// Shared state for evaluating speed-index integrals at `(τ, c, ε > 0)`.
pub(crate) struct IndexPoint<'k> {
    pub kernel: &'k KernelSpec,
    pub prop: Propagator,
    /// `a = τ/ε`.
    pub a: f64,
    pub radius: f64,
    pub quad: QuadConfig,
}

impl<'k> IndexPoint<'k> {
    pub fn new(tau: f64, c: f64, eps: f64, kernel: &'k KernelSpec, gamma: f64, quad: &QuadConfig) -> Result<Self> {
        check_wave(tau, c)?;
        if !(eps > 0.0) {
            return Err(Error::Parameter(format!("epsilon must be > 0 here, got {eps}")));
        }
        let prop = Propagator::new(c, compute_eigen(eps, gamma)?)?;
        Ok(Self {
            kernel,
            prop,
            a: tau / eps,
            radius: kernel.truncation_radius(),
            quad: *quad,
        })
    }

    /// Whether `e^{-ρa}` is below the underflow guard.
    pub fn kernel_shift_negligible(&self) -> bool {
        self.kernel.tail_rho() * self.a > UNDERFLOW_EXPONENT
    }

    /// `F(x) - F(x - a)`.
    pub fn window(&self, x: f64) -> f64 {
        self.kernel.cumulative(x) - self.kernel.cumulative(x - self.a)
    }

    /// `∫_{-∞}^0 w(x) (F(x) - F(x-a)) dx`.
    pub fn left_window_integral(&self, w: impl Fn(f64) -> f64) -> Result<f64> {
        self.kernel
            .integrate_shifted(|x| w(x) * self.window(x), -self.radius, 0.0, &[0.0, self.a], &self.quad)
    }

    /// `∫_{-∞}^0 w(x) K(x - a) dx`, zero once `e^{-ρa}` underflows.
    pub fn shifted_kernel_integral(&self, w: impl Fn(f64) -> f64) -> Result<f64> {
        if self.kernel_shift_negligible() {
            return Ok(0.0);
        }
        let lo = (self.a - self.radius).min(-WEIGHT_CUTOFF / self.kernel.tail_rho());
        let k = self.kernel;
        k.integrate_shifted(|x| w(x) * k.eval(x - self.a), lo, 0.0, &[self.a], &self.quad)
    }

    /// `∫_{-a}^0 w(s) F(s) ds`.
    pub fn truncated_front_integral(&self, w: impl Fn(f64) -> f64) -> Result<f64> {
        let k = self.kernel;
        k.integrate_shifted(|s| w(s) * k.cumulative(s), (-self.a).max(-self.radius), 0.0, &[0.0], &self.quad)
    }

    /// `∫_0^a w(x) S(x) dx`.
    pub fn right_tail_integral(&self, w: impl Fn(f64) -> f64) -> Result<f64> {
        let k = self.kernel;
        k.integrate_shifted(|x| w(x) * k.upper_cumulative(x), 0.0, self.a.min(self.radius), &[0.0], &self.quad)
    }
}

/// `f(τ, c, ε)`: the first compatibility condition `U(0)`.
pub fn speed_index_f(tau: f64, c: f64, epsilon: f64, kernel: &KernelSpec, gamma: f64) -> Result<f64> {
    if epsilon == 0.0 {
        check_wave(tau, c)?;
        return crate::front::phi_f(c, kernel);
    }
    speed_index_f_with(tau, c, epsilon, kernel, gamma, &pulse_quad())
}

pub fn speed_index_f_with(
    tau: f64,
    c: f64,
    epsilon: f64,
    kernel: &KernelSpec,
    gamma: f64,
    quad: &QuadConfig,
) -> Result<f64> {
    if epsilon == 0.0 {
        check_wave(tau, c)?;
        return phi_f_with(c, kernel, quad);
    }
    let p = IndexPoint::new(tau, c, epsilon, kernel, gamma, quad)?;
    p.left_window_integral(|x| p.prop.cx(x))
}

/// The pieces of `g = γ/(1+γ) - C̄ - φ_f + E₁ - E₂ - E₃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GComponents {
    pub c_bar: f64,
    pub phi_f: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub value: f64,
}

/// `g(τ, c, ε)`: the second compatibility condition `U(a)`.
pub fn speed_index_g(tau: f64, c: f64, epsilon: f64, kernel: &KernelSpec, gamma: f64) -> Result<f64> {
    Ok(speed_index_g_components(tau, c, epsilon, kernel, gamma, &pulse_quad())?.value)
}

pub fn speed_index_g_with(
    tau: f64,
    c: f64,
    epsilon: f64,
    kernel: &KernelSpec,
    gamma: f64,
    quad: &QuadConfig,
) -> Result<f64> {
    Ok(speed_index_g_components(tau, c, epsilon, kernel, gamma, quad)?.value)
}

/// `g(τ, c, 0) = (γ + e^{-(1+γ)τ/c})/(1+γ) - φ_f(c)`.
pub fn speed_index_g_at_zero(tau: f64, c: f64, phi: f64, gamma: f64) -> f64 {
    (gamma + (-(1.0 + gamma) * tau / c).exp()) / (1.0 + gamma) - phi
}

pub fn speed_index_g_components(
    tau: f64,
    c: f64,
    epsilon: f64,
    kernel: &KernelSpec,
    gamma: f64,
    quad: &QuadConfig,
) -> Result<GComponents> {
    if epsilon == 0.0 {
        check_wave(tau, c)?;
        let phi = phi_f_with(c, kernel, quad)?;
        return Ok(GComponents {
            c_bar: -(-(1.0 + gamma) * tau / c).exp() / (1.0 + gamma),
            phi_f: phi,
            e1: 0.0,
            e2: 0.0,
            e3: 0.0,
            value: speed_index_g_at_zero(tau, c, phi, gamma),
        });
    }
    let p = IndexPoint::new(tau, c, epsilon, kernel, gamma, quad)?;
    let a = p.a;
    let prop = p.prop;
    let phi = phi_f_with(c, kernel, quad)?;
    let c_bar = prop.c(-a);
    let e1 = p.left_window_integral(|x| prop.cx(x - a))?;
    let e2 = p.truncated_front_integral(|s| prop.cx(s))? - phi;
    let e3 = p.right_tail_integral(|x| prop.cx(x - a))?;
    let value = gamma / (1.0 + gamma) - c_bar - phi + e1 - e2 - e3;
    Ok(GComponents {
        c_bar,
        phi_f: phi,
        e1,
        e2,
        e3,
        value,
    })
}

/// `τ₀ = -(c_f/(1+γ)) ln(2θ(1+γ) - γ)`.
pub fn tau0_for(front_speed: f64, theta: f64, gamma: f64) -> Result<f64> {
    let arg = 2.0 * theta * (1.0 + gamma) - gamma;
    if !(arg > BASE_POINT_MARGIN && arg < 1.0 - BASE_POINT_MARGIN) {
        return Err(Error::Hypothesis(format!(
            "2θ(1+γ) - γ = {arg} must lie in (0, 1) with margin {BASE_POINT_MARGIN:e}"
        )));
    }
    Ok(-front_speed / (1.0 + gamma) * arg.ln())
}

/// `(τ₀, c_f)`.
pub fn base_point(kernel: &KernelSpec, theta: f64, gamma: f64) -> Result<(f64, f64)> {
    let front = solve_front_speed(kernel, theta, &FrontOptions::default())?;
    Ok((tau0_for(front.speed, theta, gamma)?, front.speed))
}

/// Options for [`solve_pulse`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseOptions {
    pub epsilon_max: f64,
    pub max_iter: usize,
    /// Residual (max norm) required for success.
    pub tol: f64,
    /// Residual at which iteration stops early.
    pub target: f64,
    pub condition_max: f64,
    pub quad: QuadConfig,
    pub front: FrontOptions,
}

impl Default for PulseOptions {
    fn default() -> Self {
        Self {
            epsilon_max: 0.05,
            max_iter: 50,
            tol: 1e-10,
            target: 1e-13,
            condition_max: 1e12,
            quad: pulse_quad(),
            front: FrontOptions::default(),
        }
    }
}

/// Convergence record of the Newton iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
    /// Max-norm residual before each iteration and after the last one.
    pub residual_history: Vec<f64>,
    pub condition: f64,
    /// Determinant of the Jacobian at the solution.
    pub det: f64,
    pub initial_guess: (f64, f64),
}

/// A solved fast pulse with its profile evaluators.
#[derive(Debug, Clone)]
pub struct PulseSolution {
    pub params: ModelParams,
    pub wave: WaveParams,
    pub newton: NewtonReport,
    kernel: KernelSpec,
    prop: Propagator,
    quad: QuadConfig,
}

/// `(U, Q, U', Q')` at `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub z: f64,
    pub u: f64,
    pub q: f64,
    pub du: f64,
    pub dq: f64,
}

/// Condition number of a 2x2 matrix in the spectral norm.
pub fn condition_2x2(m: [[f64; 2]; 2]) -> f64 {
    let [[a, b], [c, d]] = m;
    let det = a * d - b * c;
    if det == 0.0 {
        return f64::INFINITY;
    }
    let fro2 = a * a + b * b + c * c + d * d;
    // σ_max/σ_min from the Frobenius norm and |det| = σ_max σ_min.
    let s = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
    let smax2 = 0.5 * (fro2 + s);
    let smin2 = det * det / smax2;
    (smax2 / smin2).sqrt()
}

struct Residual {
    r: [f64; 2],
    norm: f64,
}

fn residual_at(tau: f64, c: f64, params: &ModelParams, kernel: &KernelSpec, quad: &QuadConfig) -> Result<Residual> {
    let f = speed_index_f_with(tau, c, params.epsilon, kernel, params.gamma, quad)?;
    let g = speed_index_g_with(tau, c, params.epsilon, kernel, params.gamma, quad)?;
    let r = [f - params.theta, g - params.theta];
    if !(r[0].is_finite() && r[1].is_finite()) {
        return Err(Error::Numerical(format!("non-finite residual at (τ, c) = ({tau}, {c})")));
    }
    Ok(Residual {
        r,
        norm: r[0].abs().max(r[1].abs()),
    })
}

fn jacobian_matrix(tau: f64, c: f64, params: &ModelParams, kernel: &KernelSpec, quad: &QuadConfig) -> Result<[[f64; 2]; 2]> {
    let pf = partials_f_with(tau, c, params.epsilon, kernel, params.gamma, quad)?;
    let pg = partials_g_with(tau, c, params.epsilon, kernel, params.gamma, quad)?.total;
    Ok([[pf.tau, pf.c], [pg.tau, pg.c]])
}

/// Solves `f = g = θ` for `(τ, c)` by damped Newton iteration.
pub fn solve_pulse(
    kernel: &KernelSpec,
    params: ModelParams,
    init: Option<(f64, f64)>,
    options: &PulseOptions,
) -> Result<PulseSolution> {
    params.check(kernel).into_result()?;
    let eps = params.epsilon;
    if !(eps > 0.0 && eps <= options.epsilon_max) {
        return Err(Error::Parameter(format!(
            "epsilon must lie in (0, {}], got {eps}",
            options.epsilon_max
        )));
    }
    let eigen = compute_eigen(eps, params.gamma)?;
    let front = solve_front_speed(kernel, params.theta, &options.front)?;
    let start = match init {
        Some(guess) => guess,
        None => first_order_guess(&front, &params, &options.quad)?,
    };
    check_wave(start.0, start.1)?;

    let quad = &options.quad;
    let (mut tau, mut c) = start;
    let mut res = residual_at(tau, c, &params, kernel, quad)?;
    let mut history = vec![res.norm];
    let mut iterations = 0;
    let mut jac = jacobian_matrix(tau, c, &params, kernel, quad)?;

    while res.norm > options.target {
        if iterations >= options.max_iter {
            if res.norm <= options.tol {
                break;
            }
            return Err(Error::Solve(format!(
                "Newton did not converge in {} iterations; residual history {history:?}",
                options.max_iter
            )));
        }
        let cond = condition_2x2(jac);
        if !(cond <= options.condition_max) {
            return Err(Error::Conditioning(format!(
                "Jacobian condition estimate {cond:.3e} exceeds {:.1e} at (τ, c) = ({tau}, {c})",
                options.condition_max
            )));
        }
        let [[a, b], [cc, d]] = jac;
        let det = a * d - b * cc;
        let dt = -(d * res.r[0] - b * res.r[1]) / det;
        let dc = -(-cc * res.r[0] + a * res.r[1]) / det;

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let (nt, nc) = (tau + lambda * dt, c + lambda * dc);
            if nt > 0.0 && nc > 0.0 {
                let trial = residual_at(nt, nc, &params, kernel, quad)?;
                if trial.norm < res.norm {
                    accepted = Some((nt, nc, trial));
                    break;
                }
            }
            lambda *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((nt, nc, trial)) => {
                tau = nt;
                c = nc;
                res = trial;
                history.push(res.norm);
                jac = jacobian_matrix(tau, c, &params, kernel, quad)?;
            }
            None if res.norm <= options.tol => break,
            None => {
                return Err(Error::Solve(format!(
                    "line search failed at (τ, c) = ({tau}, {c}); residual history {history:?}"
                )))
            }
        }
    }

    let [[a, b], [cc, d]] = jac;
    let newton = NewtonReport {
        iterations,
        residual: res.norm,
        residual_history: history,
        condition: condition_2x2(jac),
        det: a * d - b * cc,
        initial_guess: start,
    };
    log::debug!(
        "pulse ε={eps}: τ={tau}, c={c}, {} iterations, residual {:.3e}",
        newton.iterations,
        newton.residual
    );
    Ok(PulseSolution {
        params,
        wave: WaveParams::new(c, tau, eps, front.speed),
        newton,
        kernel: kernel.clone(),
        prop: Propagator::new(c, eigen)?,
        quad: *quad,
    })
}

/// `(τ₀ + τ'(0) ε, c_f + c'(0) ε)`.
pub fn first_order_guess(front: &FrontSolution, params: &ModelParams, quad: &QuadConfig) -> Result<(f64, f64)> {
    let base = jacobian_at_base_from_front(front, params.gamma, quad)?;
    Ok((
        base.tau0 + base.tau_prime0 * params.epsilon,
        base.c_f + base.c_prime0 * params.epsilon,
    ))
}

impl PulseSolution {
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn propagator(&self) -> &Propagator {
        &self.prop
    }

    pub fn quad(&self) -> &QuadConfig {
        &self.quad
    }

    /// `10 c + R`: padding beyond `[0, a]` where the fast dynamics settle.
    pub fn z_pad(&self) -> f64 {
        10.0 * self.wave.speed + self.kernel.truncation_radius()
    }

    /// Window `[z_lo, z_hi]` outside of which `|U|, |Q| <= tol`.
    pub fn horizon(&self, tol: f64) -> (f64, f64) {
        let l = (1.0 / tol).ln().max(0.0);
        let lo = -(self.z_pad() + l / self.kernel.tail_rho());
        let hi = self.wave.width + self.z_pad() + self.wave.speed * l / self.prop.eigen.omega2;
        (lo, hi)
    }

    // ∫_{-∞}^z w(x - z) (F(x) - F(x - a)) dx, where `prim` is an
    // antiderivative of `w`.
    fn formal(&self, z: f64, w: impl Fn(f64) -> f64, prim: impl Fn(f64) -> f64) -> Result<f64> {
        let k = &self.kernel;
        let a = self.wave.width;
        let r = k.truncation_radius();
        let q = &self.quad;
        let hi = z.min(0.0);
        let lo = (-r).min(hi - WEIGHT_CUTOFF / k.tail_rho());
        let mut total = k.integrate_shifted(
            |x| w(x - z) * (k.cumulative(x) - k.cumulative(x - a)),
            lo,
            hi,
            &[0.0, a],
            q,
        )?;
        if z > 0.0 {
            // On [0, m] the window is 1 - S(x) - F(x - a).
            let m = z.min(a);
            total += prim(m - z) - prim(-z);
            total -= k.integrate_shifted(|x| w(x - z) * k.upper_cumulative(x), 0.0, m.min(r), &[0.0], q)?;
            total -= k.integrate_shifted(|x| w(x - z) * k.cumulative(x - a), (a - r).max(0.0), m, &[a], q)?;
        }
        if z > a {
            // Beyond a the window is S(x - a) - S(x).
            total += k.integrate_shifted(|x| w(x - z) * k.upper_cumulative(x - a), a, z.min(a + r), &[a], q)?;
            total -= k.integrate_shifted(|x| w(x - z) * k.upper_cumulative(x), a, z.min(r), &[0.0], q)?;
        }
        Ok(total)
    }

    // ∫_{-∞}^z w(x - z) (K(x) - K(x - a)) dx.
    fn formal_prime(&self, z: f64, w: impl Fn(f64) -> f64) -> Result<f64> {
        let k = &self.kernel;
        let a = self.wave.width;
        let r = k.truncation_radius();
        let q = &self.quad;
        let hi = z.min(r);
        let lo = (-r).min(z - WEIGHT_CUTOFF / k.tail_rho());
        let near = k.integrate_shifted(|x| w(x - z) * k.eval(x), lo, hi, &[0.0], q)?;
        let far = k.integrate_shifted(|x| w(x - z) * k.eval(x - a), a - r, z.min(a + r), &[a], q)?;
        Ok(near - far)
    }

    /// `U(z)`.
    pub fn u(&self, z: f64) -> Result<f64> {
        let p = self.prop;
        self.formal(z, |y| p.cx(y), |y| p.c(y))
    }

    /// `Q(z)`.
    pub fn q(&self, z: f64) -> Result<f64> {
        let p = self.prop;
        self.formal(z, |y| p.dx(y), |y| p.d(y))
    }

    /// `U'(z)`.
    pub fn du(&self, z: f64) -> Result<f64> {
        let p = self.prop;
        self.formal_prime(z, |y| p.cx(y))
    }

    /// `Q'(z)`.
    pub fn dq(&self, z: f64) -> Result<f64> {
        let p = self.prop;
        self.formal_prime(z, |y| p.dx(y))
    }

    /// `(U, Q, U', Q')` at `z`.
    pub fn profile(&self, z: f64) -> Result<ProfilePoint> {
        Ok(ProfilePoint {
            z,
            u: self.u(z)?,
            q: self.q(z)?,
            du: self.du(z)?,
            dq: self.dq(z)?,
        })
    }

    /// `c U' + U + Q - ∫_{z-a}^z K`, which vanishes for an exact profile.
    pub fn ode_residual(&self, z: f64) -> Result<f64> {
        let p = self.profile(z)?;
        let k = &self.kernel;
        let drive = k.cumulative(z) - k.cumulative(z - self.wave.width);
        Ok(self.wave.speed * p.du + p.u + p.q - drive)
    }
}

/// `(U, Q, U', Q')` of a solved pulse.
pub fn pulse_profile(solution: &PulseSolution, z: f64) -> Result<ProfilePoint> {
    solution.profile(z)
}
