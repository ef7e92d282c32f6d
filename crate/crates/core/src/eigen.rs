//! Eigenvalues of the linear part `A = [[1, 1], [-ε, εγ]]` of the
//! traveling-wave system, evaluated without cancellation as `ε → 0`.

use crate::error::{Error, Result};

/// `ω₁(ε) > ω₂(ε) > 0` and the quantities built from them that the
/// closed-form kernels need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub epsilon: f64,
    pub gamma: f64,
    pub omega1: f64,
    pub omega2: f64,
    /// `(1 - ω₁)/ω₂ = 1 - ω₁γ/(1+γ)`; finite at `ε = 0`.
    pub ratio_one_minus_omega1_over_omega2: f64,
    /// `(1 - ω₂)/ω₁ = 1 - ω₂γ/(1+γ)`.
    pub ratio_one_minus_omega2_over_omega1: f64,
    /// `1 - ω₁`, formed as `ω₂ · (1-ω₁)/ω₂`.
    pub one_minus_omega1: f64,
    /// `dω₁/dε`.
    pub d_omega1: f64,
    /// `dω₂/dε`.
    pub d_omega2: f64,
}

/// Eigen data for `ε ≥ 0` in the real-eigenvalue regime.
pub fn compute_eigen(epsilon: f64, gamma: f64) -> Result<EigenPair> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::Parameter(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Parameter(format!("gamma must be > 0, got {gamma}")));
    }
    let b = 1.0 - gamma * epsilon;
    let disc = b * b - 4.0 * epsilon;
    if disc < 0.0 {
        return Err(Error::Regime(format!(
            "complex eigenvalues: (1-γε)² - 4ε = {disc:.3e} < 0 at ε = {epsilon}, γ = {gamma}"
        )));
    }
    let root = disc.sqrt();
    let omega1 = 0.5 * (1.0 + gamma * epsilon + root);
    // Product identity instead of subtracting nearly equal terms.
    let omega2 = epsilon * (1.0 + gamma) / omega1;
    if epsilon > 0.0 && !(omega1 > omega2) {
        return Err(Error::Regime(format!(
            "eigenvalues coalesce at ε = {epsilon} (ω₁ = ω₂ = {omega1})"
        )));
    }
    let g = gamma / (1.0 + gamma);
    let ratio1 = 1.0 - omega1 * g;
    let ratio2 = 1.0 - omega2 * g;

    let d_disc = -2.0 * gamma * b - 4.0;
    let (d_omega1, d_omega2) = if root > 0.0 {
        let d_root = d_disc / (2.0 * root);
        (0.5 * (gamma + d_root), 0.5 * (gamma - d_root))
    } else {
        (f64::INFINITY, f64::NEG_INFINITY)
    };

    Ok(EigenPair {
        epsilon,
        gamma,
        omega1,
        omega2,
        ratio_one_minus_omega1_over_omega2: ratio1,
        ratio_one_minus_omega2_over_omega1: ratio2,
        one_minus_omega1: omega2 * ratio1,
        d_omega1,
        d_omega2,
    })
}

/// `(ω₁'(0), ω₂'(0), ω₁''(0), ω₂''(0)) = (-1, 1+γ, -2(1+γ), 2(1+γ))`.
pub fn eigen_derivatives_at_zero(gamma: f64) -> Result<(f64, f64, f64, f64)> {
    if !(gamma > 0.0) {
        return Err(Error::Parameter(format!("gamma must be > 0, got {gamma}")));
    }
    let s = 1.0 + gamma;
    Ok((-1.0, s, -2.0 * s, 2.0 * s))
}

impl EigenPair {
    /// `ω₁ - ω₂`.
    pub fn gap(&self) -> f64 {
        self.omega1 - self.omega2
    }

    /// `1 - ω₂`.
    pub fn one_minus_omega2(&self) -> f64 {
        self.omega1 * self.ratio_one_minus_omega2_over_omega1
    }

    /// `ε/ω₁ = ω₂/(1+γ)`.
    pub fn epsilon_over_omega1(&self) -> f64 {
        self.omega2 / (1.0 + self.gamma)
    }

    /// `ε/ω₂ = ω₁/(1+γ)`; equals `1/(1+γ)` at `ε = 0`.
    pub fn epsilon_over_omega2(&self) -> f64 {
        self.omega1 / (1.0 + self.gamma)
    }

    /// `d/dε [(1-ω₁)/ω₂] = -ω₁'γ/(1+γ)`.
    pub fn d_ratio1(&self) -> f64 {
        -self.d_omega1 * self.gamma / (1.0 + self.gamma)
    }

    /// `d/dε [(1-ω₂)/ω₁] = -ω₂'γ/(1+γ)`.
    pub fn d_ratio2(&self) -> f64 {
        -self.d_omega2 * self.gamma / (1.0 + self.gamma)
    }

    /// Largest `ε` with real eigenvalues for this `γ`.
    pub fn regime_limit(gamma: f64) -> f64 {
        // Smallest root of (1-γε)² = 4ε.
        let g2 = gamma * gamma;
        let b = 2.0 * gamma + 4.0;
        (b - (b * b - 4.0 * g2).sqrt()) / (2.0 * g2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_epsilon_limits() {
        let e = compute_eigen(0.0, 0.2).unwrap();
        assert_eq!(e.omega1, 1.0);
        assert_eq!(e.omega2, 0.0);
        assert_eq!(e.one_minus_omega1, 0.0);
        assert!((e.d_omega1 + 1.0).abs() < 1e-15);
        assert!((e.d_omega2 - 1.2).abs() < 1e-15);
        assert!((e.ratio_one_minus_omega1_over_omega2 - 1.0 / 1.2).abs() < 1e-15);
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn small_epsilon_matches_high_precision() {
        let e = compute_eigen(0.01, 0.2).unwrap();
        // 30-digit evaluation of the quadratic formula.
        assert!((e.omega2 - 0.012_122_714_784_169_994).abs() < 1e-16);
        assert!((e.omega1 - 0.989_877_285_215_830_006).abs() < 1e-15);
        assert!((e.omega1 * e.omega2 - 0.012).abs() < 1e-14);
    }

    #[test]
    fn derivatives_at_zero() {
        assert_eq!(eigen_derivatives_at_zero(0.2).unwrap(), (-1.0, 1.2, -2.4, 2.4));
        let (a, b, c, d) = eigen_derivatives_at_zero(1e-300).unwrap();
        assert!((a + 1.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
        assert!((c + 2.0).abs() < 1e-15 && (d - 2.0).abs() < 1e-15);
        assert!(eigen_derivatives_at_zero(0.0).is_err());
    }

    #[test]
    fn central_differences_match_derivatives_at_zero() {
        let gamma = 0.2;
        let (d1, d2, dd1, dd2) = eigen_derivatives_at_zero(gamma).unwrap();
        for h in [1e-4, 1e-5] {
            // One-sided second-order stencil at the boundary ε = 0.
            let w = |eps: f64| compute_eigen(eps, gamma).unwrap();
            let (w0, w1, w2) = (w(0.0), w(h), w(2.0 * h));
            let fd1 = (-3.0 * w0.omega1 + 4.0 * w1.omega1 - w2.omega1) / (2.0 * h);
            let fd2 = (-3.0 * w0.omega2 + 4.0 * w1.omega2 - w2.omega2) / (2.0 * h);
            assert!((fd1 - d1).abs() < 1e-3);
            assert!((fd2 - d2).abs() < 1e-3);
            // Central difference around ε = h of the analytic derivative.
            let wm = w(h + h / 2.0);
            let wl = w(h - h / 2.0);
            assert!(((wm.omega1 - wl.omega1) / h - w1.d_omega1).abs() < 1e-3);
            let sd1 = (w2.d_omega1 - w0.d_omega1) / (2.0 * h);
            let sd2 = (w2.d_omega2 - w0.d_omega2) / (2.0 * h);
            assert!((sd1 - dd1).abs() < 1e-2);
            assert!((sd2 - dd2).abs() < 1e-2);
        }
    }

    #[test]
    fn complex_regime_rejected() {
        assert!(matches!(compute_eigen(0.3, 0.2), Err(Error::Regime(_))));
        assert!(matches!(compute_eigen(-1e-3, 0.2), Err(Error::Parameter(_))));
        let lim = EigenPair::regime_limit(0.2);
        assert!(compute_eigen(lim * 0.999, 0.2).is_ok());
        assert!(compute_eigen(lim * 1.001, 0.2).is_err());
    }

    #[test]
    fn ratio_over_epsilon_is_first_order() {
        // |ω₂/ε - (1+γ)| <= C ε with a constant that holds over the grid.
        for gamma in [0.1, 0.2, 0.5] {
            let mut worst: f64 = 0.0;
            for k in 0..=40 {
                let eps = 1e-8 * (0.05f64 / 1e-8).powf(k as f64 / 40.0);
                let e = compute_eigen(eps, gamma).unwrap();
                worst = worst.max((e.omega2 / eps - (1.0 + gamma)).abs() / eps);
            }
            assert!(worst < 5.0, "gamma={gamma}: C={worst}");
        }
    }

    proptest! {
        #[test]
        fn identities_hold(log_eps in -8.0f64..(0.05f64).log10(), gi in 0usize..3) {
            let gamma = [0.1, 0.2, 0.5][gi];
            let eps = 10f64.powf(log_eps);
            let e = compute_eigen(eps, gamma).unwrap();
            let prod = eps * (1.0 + gamma);
            let sum = 1.0 + eps * gamma;
            prop_assert!(((e.omega1 * e.omega2 - prod) / prod).abs() < 1e-12);
            prop_assert!(((e.omega1 + e.omega2 - sum) / sum).abs() < 1e-12);
            prop_assert!(e.omega1 > e.omega2 && e.omega2 > 0.0);
            let via_trace = 1.0 - eps * gamma / e.omega2;
            prop_assert!((via_trace - e.ratio_one_minus_omega1_over_omega2).abs() < 1e-13);
            if eps >= 1e-3 {
                // The naive quotient is only accurate away from ε = 0.
                let direct = (1.0 - e.omega1) / e.omega2;
                prop_assert!((direct - e.ratio_one_minus_omega1_over_omega2).abs() < 1e-12);
            }
        }
    }
}
