//! Partial derivatives of the speed index pair `(f, g)`: quadrature forms
//! for `ε > 0`, closed forms at `ε = 0`, and the first-order coefficients
//! `τ'(0)`, `c'(0)` of the pulse branch.

use serde::Serialize;

use crate::eigen::EigenPair;
use crate::error::{Error, Result};
use crate::front::{phi_f_prime_with, phi_f_with, solve_front_speed, FrontOptions, FrontSolution, WEIGHT_CUTOFF};
use crate::kernels::KernelSpec;
use crate::pulse::{check_wave, pulse_quad, tau0_for, IndexPoint, Propagator};
use crate::quadrature::QuadConfig;

/// Smallest `|det J|` accepted at the base point.
pub const SINGULAR_DET: f64 = 1e-14;

/// `(Cxx, Cxc, Cxε)` at `x <= 0`.
pub fn second_partials(x: f64, c: f64, eigen: &EigenPair) -> Result<(f64, f64, f64)> {
    if x > 0.0 {
        return Err(Error::Domain(format!(
            "closed-form kernels are defined for x <= 0, got {x}"
        )));
    }
    let p = Propagator::new(c, *eigen)?;
    Ok((p.cxx(x), p.cxc(x), p.cxe(x)))
}

/// Derivatives in `(τ, c, ε)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Partials {
    pub tau: f64,
    pub c: f64,
    pub eps: f64,
}

/// Derivatives of `g` and of each piece of `g = γ/(1+γ) - C̄ - φ_f + E₁ - E₂ - E₃`.
/// `e2.c` includes the `-φ_f'(c)` term of `E₂`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct GPartials {
    pub c_bar: Partials,
    pub e1: Partials,
    pub e2: Partials,
    pub e3: Partials,
    pub phi_prime: f64,
    pub total: Partials,
}

impl GPartials {
    fn assemble(c_bar: Partials, e1: Partials, e2: Partials, e3: Partials, phi_prime: f64) -> Self {
        let total = Partials {
            tau: -c_bar.tau + e1.tau - e2.tau - e3.tau,
            c: -c_bar.c - phi_prime + e1.c - e2.c - e3.c,
            eps: -c_bar.eps + e1.eps - e2.eps - e3.eps,
        };
        Self {
            c_bar,
            e1,
            e2,
            e3,
            phi_prime,
            total,
        }
    }
}

/// `(f_τ, f_c, f_ε)` for `ε > 0`.
pub fn partials_f(tau: f64, c: f64, epsilon: f64, kernel: &KernelSpec, gamma: f64) -> Result<Partials> {
    partials_f_with(tau, c, epsilon, kernel, gamma, &pulse_quad())
}

pub fn partials_f_with(
    tau: f64,
    c: f64,
    epsilon: f64,
    kernel: &KernelSpec,
    gamma: f64,
    quad: &QuadConfig,
) -> Result<Partials> {
    let p = IndexPoint::new(tau, c, epsilon, kernel, gamma, quad)?;
    let prop = p.prop;
    let shifted = p.shifted_kernel_integral(|x| prop.cx(x))?;
    let f_c = p.left_window_integral(|x| prop.cxc(x))?;
    let f_e = p.left_window_integral(|x| prop.cxe(x))? - tau / (epsilon * epsilon) * shifted;
    Ok(Partials {
        tau: shifted / epsilon,
        c: f_c,
        eps: f_e,
    })
}

/// `(g_τ, g_c, g_ε)` for `ε > 0`, with the contribution of each piece.
pub fn partials_g(tau: f64, c: f64, epsilon: f64, kernel: &KernelSpec, gamma: f64) -> Result<GPartials> {
    partials_g_with(tau, c, epsilon, kernel, gamma, &pulse_quad())
}

pub fn partials_g_with(
    tau: f64,
    c: f64,
    epsilon: f64,
    kernel: &KernelSpec,
    gamma: f64,
    quad: &QuadConfig,
) -> Result<GPartials> {
    let p = IndexPoint::new(tau, c, epsilon, kernel, gamma, quad)?;
    let prop = p.prop;
    let a = p.a;
    let eps = epsilon;
    let s = tau / (eps * eps);
    let phi_prime = phi_f_prime_with(c, kernel, quad)?;

    let cx_a = prop.cx(-a);
    let c_bar = Partials {
        tau: -cx_a / eps,
        c: a / c * cx_a,
        eps: s * cx_a + prop.c_eps(-a),
    };

    let w_xx = p.left_window_integral(|x| prop.cxx(x - a))?;
    let w_xc = p.left_window_integral(|x| prop.cxc(x - a))?;
    let w_xe = p.left_window_integral(|x| prop.cxe(x - a))?;
    let k_shift = p.shifted_kernel_integral(|x| prop.cx(x - a))?;
    let e1 = Partials {
        tau: -w_xx / eps + k_shift / eps,
        c: w_xc,
        eps: s * w_xx + w_xe - s * k_shift,
    };

    let f_at = if p.kernel_shift_negligible() { 0.0 } else { kernel.cumulative(-a) };
    let e2 = Partials {
        tau: cx_a * f_at / eps,
        c: p.truncated_front_integral(|x| prop.cxc(x))? - phi_prime,
        eps: -s * cx_a * f_at + p.truncated_front_integral(|x| prop.cxe(x))?,
    };

    let s_at = if p.kernel_shift_negligible() { 0.0 } else { kernel.upper_cumulative(a) };
    let cx_0 = prop.cx(0.0);
    let r_xx = p.right_tail_integral(|x| prop.cxx(x - a))?;
    let e3 = Partials {
        tau: cx_0 * s_at / eps - r_xx / eps,
        c: p.right_tail_integral(|x| prop.cxc(x - a))?,
        eps: -s * cx_0 * s_at + s * r_xx + p.right_tail_integral(|x| prop.cxe(x - a))?,
    };

    Ok(GPartials::assemble(c_bar, e1, e2, e3, phi_prime))
}

/// The `ε = 0` extensions of all partials at `(τ, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroLimits {
    pub f: Partials,
    /// Componentwise limits, assembled into `g.total`.
    pub g: GPartials,
    /// `g_ε(τ, c, 0)` from the single assembled closed form.
    pub g_eps_assembled: f64,
    /// `∫_{-∞}^0 |x| (e^{x/c} + 1) K(x) dx`.
    pub weighted_moment: f64,
}

/// `∫_{-∞}^0 |x| (e^{x/c} + 1) K(x) dx`.
pub fn weighted_left_moment(c: f64, kernel: &KernelSpec, quad: &QuadConfig) -> Result<f64> {
    // The |x| weight makes the tail decay slower than the mass tail.
    let r = kernel.truncation_radius() + 10.0 / kernel.tail_rho();
    kernel.integrate_shifted(|x| -x * ((x / c).exp() + 1.0) * kernel.eval(x), -r, 0.0, &[0.0], quad)
}

/// Closed-form partials of `f` and `g` at `(τ, c, 0)`.
pub fn zero_limits(tau: f64, c: f64, kernel: &KernelSpec, gamma: f64, quad: &QuadConfig) -> Result<ZeroLimits> {
    check_wave(tau, c)?;
    let e = (-(1.0 + gamma) * tau / c).exp();
    let phi = phi_f_with(c, kernel, quad)?;
    let phi_prime = phi_f_prime_with(c, kernel, quad)?;
    let m1 = weighted_left_moment(c, kernel, quad)?;
    let (m_left, m_right) = (kernel.left_moment(), kernel.right_moment());
    let f_eps = 2.0 * phi - m1 / c;

    let f = Partials {
        tau: 0.0,
        c: phi_prime,
        eps: f_eps,
    };
    let c_bar = Partials {
        tau: e / c,
        c: -tau / (c * c) * e,
        eps: (tau / c - 2.0) * e,
    };
    let e1 = Partials {
        eps: -e / c * m_left,
        ..Partials::default()
    };
    let e2 = Partials {
        eps: f_eps,
        ..Partials::default()
    };
    let e3 = Partials {
        eps: -e / c * m_right,
        ..Partials::default()
    };
    let g = GPartials::assemble(c_bar, e1, e2, e3, phi_prime);
    let g_eps_assembled = (2.0 - tau / c) * e - e / c * m_left - (2.0 * phi - m1 / c) + e / c * m_right;
    Ok(ZeroLimits {
        f,
        g,
        g_eps_assembled,
        weighted_moment: m1,
    })
}

/// All six partials at the base point and the first-order coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JacobianAtBase {
    pub tau0: f64,
    pub c_f: f64,
    pub f_tau: f64,
    pub f_c: f64,
    pub f_eps: f64,
    pub g_tau: f64,
    pub g_c: f64,
    pub g_eps: f64,
    /// `g_ε` summed from the component limits; equals `g_eps`.
    pub g_eps_componentwise: f64,
    pub det: f64,
    pub tau_prime0: f64,
    pub c_prime0: f64,
}

impl JacobianAtBase {
    /// `(τ₀ + τ'(0) ε, c_f + c'(0) ε)`.
    pub fn predict(&self, epsilon: f64) -> (f64, f64) {
        (self.tau0 + self.tau_prime0 * epsilon, self.c_f + self.c_prime0 * epsilon)
    }
}

pub fn jacobian_at_base(kernel: &KernelSpec, theta: f64, gamma: f64) -> Result<JacobianAtBase> {
    let front = solve_front_speed(kernel, theta, &FrontOptions::default())?;
    jacobian_at_base_from_front(&front, gamma, &pulse_quad())
}

pub fn jacobian_at_base_from_front(front: &FrontSolution, gamma: f64, quad: &QuadConfig) -> Result<JacobianAtBase> {
    let c_f = front.speed;
    let tau0 = tau0_for(c_f, front.theta, gamma)?;
    let lim = zero_limits(tau0, c_f, front.kernel(), gamma, quad)?;
    let (f, g) = (lim.f, lim.g.total);
    let g_eps = lim.g_eps_assembled;
    let scale = 1.0 + g_eps.abs();
    if (g.eps - g_eps).abs() > 1e-12 * scale {
        return Err(Error::Consistency(format!(
            "componentwise g_ε(τ₀, c_f, 0) = {} disagrees with the assembled form {g_eps}",
            g.eps
        )));
    }
    let det = -f.c * g.tau;
    if !(det.abs() >= SINGULAR_DET) {
        return Err(Error::Conditioning(format!(
            "det J = {det:.3e} at the base point; the quadrature of φ_f' is unreliable"
        )));
    }
    Ok(JacobianAtBase {
        tau0,
        c_f,
        f_tau: f.tau,
        f_c: f.c,
        f_eps: f.eps,
        g_tau: g.tau,
        g_c: g.c,
        g_eps,
        g_eps_componentwise: g.eps,
        det,
        tau_prime0: -(g.c * f.eps - f.c * g_eps) / det,
        c_prime0: -f.eps / f.c,
    })
}

/// Distance of the branch point from the kernel support, in units of
/// `1/ρ`; useful for picking test points where `f_τ` is resolvable.
pub fn shift_exponent(tau: f64, epsilon: f64, kernel: &KernelSpec) -> f64 {
    kernel.tail_rho() * tau / epsilon
}

/// Reach of the `e^{x/c}` weight used by the front integrals.
pub fn weight_reach(c: f64) -> f64 {
    WEIGHT_CUTOFF * c
}
