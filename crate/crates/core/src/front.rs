//! The ε = 0 scalar front: speed index `φ_f`, the unique front speed, the
//! front/back profiles and the real Evans function of the front.

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::quadrature::QuadConfig;

/// `e^{-WEIGHT_CUTOFF}` is below double precision relative to O(1) terms.
pub(crate) const WEIGHT_CUTOFF: f64 = 40.0;

/// Probe points for the uniqueness witness of a solved front.
pub const UNIQUENESS_PROBES: [f64; 6] = [-0.5, -0.25, -0.1, 0.1, 0.25, 0.5];

/// Root-finding options for [`solve_front_speed`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontOptions {
    pub bracket: (f64, f64),
    /// How many times the bracket may be widened by a factor 10 on each side.
    pub max_expansions: usize,
    /// Log-spaced scan points used to find sign changes.
    pub scan_points: usize,
    pub residual_tol: f64,
    pub quad: QuadConfig,
}

impl Default for FrontOptions {
    fn default() -> Self {
        Self {
            bracket: (1e-3, 1e3),
            max_expansions: 4,
            scan_points: 240,
            residual_tol: 1e-10,
            quad: QuadConfig::default(),
        }
    }
}

/// A solved traveling front `U_f` with `U_f(0) = θ`.
#[derive(Debug, Clone)]
pub struct FrontSolution {
    pub speed: f64,
    pub theta: f64,
    /// `φ_f(c_f) - θ` at the returned speed.
    pub residual: f64,
    /// `φ_f'(c_f)`, negative for every genuine front.
    pub phi_prime: f64,
    /// Every sign-change interval found while scanning for the root.
    pub brackets: Vec<(f64, f64)>,
    kernel: KernelSpec,
    quad: QuadConfig,
    phi_at_speed: f64,
}

fn check_speed(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("wave speed must be positive, got {c}")))
    }
}

/// `∫_{-∞}^0 e^{x/c} K(x) x^power dx`, truncated where either factor is
/// negligible.
fn weighted_left_integral(c: f64, kernel: &KernelSpec, power: i32, quad: &QuadConfig) -> Result<f64> {
    let lo = -(kernel.truncation_radius().min(WEIGHT_CUTOFF * c));
    kernel.integrate(|x| (x / c).exp() * kernel.eval(x) * x.powi(power), lo, 0.0, quad)
}

/// Front speed index `φ_f(c) = ∫_{-∞}^0 K - ∫_{-∞}^0 e^{x/c} K(x) dx`.
pub fn phi_f(c: f64, kernel: &KernelSpec) -> Result<f64> {
    phi_f_with(c, kernel, &QuadConfig::default())
}

pub fn phi_f_with(c: f64, kernel: &KernelSpec, quad: &QuadConfig) -> Result<f64> {
    check_speed(c)?;
    Ok(kernel.left_mass() - weighted_left_integral(c, kernel, 0, quad)?)
}

/// `φ_f'(c) = (1/c²) ∫_{-∞}^0 x e^{x/c} K(x) dx`.
pub fn phi_f_prime(c: f64, kernel: &KernelSpec) -> Result<f64> {
    phi_f_prime_with(c, kernel, &QuadConfig::default())
}

pub fn phi_f_prime_with(c: f64, kernel: &KernelSpec, quad: &QuadConfig) -> Result<f64> {
    check_speed(c)?;
    Ok(weighted_left_integral(c, kernel, 1, quad)? / (c * c))
}

/// Brent's method on a sign-changing bracket.
pub(crate) fn brent<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    x_tol: f64,
    f_tol: f64,
    max_iter: usize,
) -> Result<(f64, f64)> {
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok((a, fa));
    }
    if fb == 0.0 {
        return Ok((b, fb));
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Numerical(format!(
            "Brent bracket [{a}, {b}] has no sign change ({fa:.3e}, {fb:.3e})"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * x_tol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb.abs() <= f_tol {
            return Ok((b, fb));
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Err(Error::Numerical(format!("Brent iteration did not converge near {b}")))
}

/// Finds the unique positive root of `φ_f(c) = θ`.
pub fn solve_front_speed(kernel: &KernelSpec, theta: f64, options: &FrontOptions) -> Result<FrontSolution> {
    let (mut lo, mut hi) = options.bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Parameter(format!("bad front speed bracket ({lo}, {hi})")));
    }
    let index = |c: f64| -> Result<f64> { Ok(phi_f_with(c, kernel, &options.quad)? - theta) };

    let mut brackets = Vec::new();
    for expansion in 0..=options.max_expansions {
        brackets = scan_sign_changes(&index, lo, hi, options.scan_points)?;
        if !brackets.is_empty() || expansion == options.max_expansions {
            break;
        }
        lo /= 10.0;
        hi *= 10.0;
    }
    match brackets.len() {
        0 => {
            return Err(Error::FrontNotFound(format!(
                "φ_f(c) - θ has no sign change on [{lo:.1e}, {hi:.1e}] for θ = {theta} and {}",
                kernel.describe()
            )))
        }
        1 => {}
        _ => {
            return Err(Error::Consistency(format!(
                "φ_f(c) = θ has several sign changes {brackets:?}; a front speed is unique, so quadrature is unreliable here"
            )))
        }
    }
    let (a, b) = brackets[0];
    let (speed, residual) = brent(index, a, b, 1e-15 * b, 1e-14, 200)?;
    if residual.abs() > options.residual_tol {
        return Err(Error::Numerical(format!(
            "front speed residual {residual:.3e} above {:.1e}",
            options.residual_tol
        )));
    }
    let phi_prime = phi_f_prime_with(speed, kernel, &options.quad)?;
    let front = FrontSolution {
        speed,
        theta,
        residual,
        phi_prime,
        brackets,
        kernel: kernel.clone(),
        quad: options.quad,
        phi_at_speed: residual + theta,
    };

    for &lambda in &UNIQUENESS_PROBES {
        let value = evans_front(&front, lambda, kernel)?;
        if value.signum() != lambda.signum() {
            return Err(Error::Consistency(format!(
                "uniqueness witness failed: E_f({lambda}) = {value:.3e} does not have the sign of λ"
            )));
        }
    }
    if !(phi_prime < 0.0) {
        return Err(Error::Consistency(format!("φ_f'(c_f) = {phi_prime:.3e} is not negative")));
    }
    Ok(front)
}

fn scan_sign_changes(
    f: &impl Fn(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<Vec<(f64, f64)>> {
    let n = n.max(2);
    let ratio = (hi / lo).ln();
    let mut out = Vec::new();
    let mut prev_c = lo;
    let mut prev = f(lo)?;
    for i in 1..n {
        let c = lo * (ratio * i as f64 / (n - 1) as f64).exp();
        let v = f(c)?;
        if prev == 0.0 {
            out.push((prev_c, prev_c));
        } else if prev.signum() != v.signum() && v != 0.0 {
            out.push((prev_c, c));
        }
        prev = v;
        prev_c = c;
    }
    if prev == 0.0 {
        out.push((prev_c, prev_c));
    }
    // Exact zeros show up as degenerate brackets; widen them slightly.
    for br in out.iter_mut() {
        if br.0 == br.1 {
            *br = (br.0 * (1.0 - 1e-9), br.1 * (1.0 + 1e-9));
        }
    }
    Ok(out)
}

impl FrontSolution {
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// `U_f(z)` and `U_f'(z)`.
    pub fn profile(&self, z: f64) -> Result<(f64, f64)> {
        let c = self.speed;
        let k = &self.kernel;
        let r = k.truncation_radius();
        let reach = WEIGHT_CUTOFF * c;
        let u = if z <= 0.0 {
            let lo = (-r).max(z - reach);
            if lo >= z {
                0.0
            } else {
                k.integrate(|x| ((x - z) / c).exp() * k.cumulative(x), lo, z, &self.quad)? / c
            }
        } else {
            // F = 1 - S on x > 0, with the x < 0 part equal to e^{-z/c} φ_f(c).
            let decay = (-z / c).exp();
            let lo = (z - reach).max(0.0);
            let hi = z.min(r);
            let tail = if lo < hi {
                k.integrate(|x| ((x - z) / c).exp() * k.upper_cumulative(x), lo, hi, &self.quad)? / c
            } else {
                0.0
            };
            decay * self.phi_at_speed + (1.0 - decay) - tail
        };
        let lo = (-r).max(z - reach);
        let hi = z.min(r);
        let du = if lo < hi {
            k.integrate(|x| ((x - z) / c).exp() * k.eval(x), lo, hi, &self.quad)? / c
        } else {
            0.0
        };
        Ok((u, du))
    }

    /// `U_b(z) = 2θ - U_f(z)` and its derivative.
    pub fn back_profile(&self, z: f64) -> Result<(f64, f64)> {
        let (u, du) = self.profile(z)?;
        Ok((2.0 * self.theta - u, -du))
    }
}

/// `(U_f(z), U_f'(z))`.
pub fn front_profile(front: &FrontSolution, z: f64) -> Result<(f64, f64)> {
    front.profile(z)
}

/// `(U_b(z), U_b'(z))` with `U_b = 2θ - U_f`.
pub fn back_profile(front: &FrontSolution, z: f64) -> Result<(f64, f64)> {
    front.back_profile(z)
}

/// Real Evans function of the front, `E_f(λ) = φ_f(c_f/(λ+1)) - θ`.
pub fn evans_front(front: &FrontSolution, lambda: f64, kernel: &KernelSpec) -> Result<f64> {
    if !(lambda > -1.0) {
        return Err(Error::Parameter(format!("Evans function needs λ > -1, got {lambda}")));
    }
    Ok(phi_f_with(front.speed / (lambda + 1.0), kernel, &front.quad)? - front.theta)
}
