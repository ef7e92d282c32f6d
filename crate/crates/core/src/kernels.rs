//! Synaptic coupling kernels.
//!
//! Every kernel carries an exponential envelope `|K(x)| <= alpha * exp(-rho |x|)`
//! which fixes the truncation radius used by all downstream quadrature.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_with_breaks, QuadConfig};

/// Mass allowed outside `[-R, R]`, measured with the declared envelope.
pub const TAIL_TOLERANCE: f64 = 1e-13;

/// Tolerance on `∫K = 1` used by [`check_hypotheses`].
pub const UNIT_MASS_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Exponential { rho: f64 },
    DampedOscillatory { a: f64, amp: f64 },
    Table(TableKernel),
}

/// A coupling kernel with its antiderivative, envelope and cached moments.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    shape: Shape,
    tail_alpha: f64,
    tail_rho: f64,
    truncation_radius: f64,
    abs_mass: f64,
    left_moment: f64,
    right_moment: f64,
    breaks: Vec<f64>,
}

/// Smallest `R` with `2 (alpha/rho) e^{-rho R} <= tol`.
pub fn truncation_radius_for(alpha: f64, rho: f64, tol: f64) -> f64 {
    ((2.0 * alpha / (rho * tol)).ln() / rho).max(0.0)
}

/// `K(x) = (rho/2) e^{-rho |x|}`.
pub fn make_exponential_kernel(rho: f64) -> Result<KernelSpec> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Parameter(format!("exponential kernel needs rho > 0, got {rho}")));
    }
    let alpha = rho / 2.0;
    let moment = 1.0 / (2.0 * rho);
    Ok(KernelSpec {
        shape: Shape::Exponential { rho },
        tail_alpha: alpha,
        tail_rho: rho,
        truncation_radius: truncation_radius_for(alpha, rho, TAIL_TOLERANCE),
        abs_mass: 1.0,
        left_moment: moment,
        right_moment: moment,
        breaks: vec![0.0],
    })
}

/// `K(x) = ((1+a^2)/(4a)) e^{-a|x|} (a sin|x| + cos x)`, a sign-changing
/// kernel whose fronts and backs are non-monotone for small `a`.
pub fn make_damped_oscillatory_kernel(a: f64) -> Result<KernelSpec> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Parameter(format!("damped oscillatory kernel needs a > 0, got {a}")));
    }
    let amp = (1.0 + a * a) / (4.0 * a);
    let alpha = amp * (1.0 + a * a).sqrt();
    let mut kernel = KernelSpec {
        shape: Shape::DampedOscillatory { a, amp },
        tail_alpha: alpha,
        tail_rho: a,
        truncation_radius: truncation_radius_for(alpha, a, TAIL_TOLERANCE),
        abs_mass: f64::NAN,
        left_moment: f64::NAN,
        right_moment: f64::NAN,
        breaks: vec![0.0],
    };
    kernel.fill_moments()?;
    Ok(kernel)
}

/// Kernel given by samples: natural cubic spline inside the table,
/// exponential envelope (continuous at the endpoints) outside, rescaled to
/// unit mass.
pub fn make_table_kernel(samples: &[(f64, f64)], tail_alpha: f64, tail_rho: f64) -> Result<KernelSpec> {
    if samples.len() < 2 {
        return Err(Error::Format(format!(
            "table kernel needs at least two samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|(x, k)| !x.is_finite() || !k.is_finite()) {
        return Err(Error::Format("table kernel samples must be finite".into()));
    }
    if let Some(w) = samples.windows(2).find(|w| w[1].0 <= w[0].0) {
        return Err(Error::Format(format!(
            "table positions must be strictly increasing (found {} then {})",
            w[0].0, w[1].0
        )));
    }
    if !(tail_alpha > 0.0 && tail_rho > 0.0 && tail_alpha.is_finite() && tail_rho.is_finite()) {
        return Err(Error::Parameter(format!(
            "tail bound needs alpha > 0 and rho > 0, got ({tail_alpha}, {tail_rho})"
        )));
    }
    let (x0, xn) = (samples[0].0, samples[samples.len() - 1].0);
    if !(x0 <= 0.0 && xn >= 0.0) {
        return Err(Error::Hypothesis(format!(
            "table [{x0}, {xn}] must contain the origin for the exponential tails to respect the envelope"
        )));
    }
    for &(x, k) in samples {
        let bound = tail_alpha * (-tail_rho * x.abs()).exp();
        if k.abs() > bound * (1.0 + 1e-9) {
            return Err(Error::Hypothesis(format!(
                "sample K({x}) = {k} exceeds declared tail bound {bound:.6e}"
            )));
        }
    }

    let raw = TableKernel::new(samples, tail_rho);
    let total = raw.raw_mass();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Hypothesis(format!(
            "table kernel has non-positive total mass {total}; cannot normalize"
        )));
    }
    let table = raw.scaled(1.0 / total);
    let alpha = tail_alpha / total;
    let mut kernel = KernelSpec {
        breaks: vec![x0, xn],
        shape: Shape::Table(table),
        tail_alpha: alpha,
        tail_rho,
        truncation_radius: truncation_radius_for(alpha, tail_rho, TAIL_TOLERANCE),
        abs_mass: f64::NAN,
        left_moment: f64::NAN,
        right_moment: f64::NAN,
    };
    kernel.fill_moments()?;
    Ok(kernel)
}

/// Reads a CSV file with header `x,K` into sample pairs.
pub fn load_table_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("{}: missing column `{name}`", path.display())))
    };
    let (ix, ik) = (col("x")?, col("K")?);
    let mut out = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("{} row {}: {e}", path.display(), line + 2)))
        };
        out.push((parse(ix)?, parse(ik)?));
    }
    Ok(out)
}

impl KernelSpec {
    /// `K(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Exponential { rho } => 0.5 * rho * (-rho * x.abs()).exp(),
            Shape::DampedOscillatory { a, amp } => {
                let r = x.abs();
                amp * (-a * r).exp() * (a * r.sin() + x.cos())
            }
            Shape::Table(t) => t.eval(x),
        }
    }

    /// `∫_{-∞}^x K`.
    pub fn cumulative(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Exponential { rho } => {
                if x <= 0.0 {
                    0.5 * (rho * x).exp()
                } else {
                    1.0 - 0.5 * (-rho * x).exp()
                }
            }
            Shape::DampedOscillatory { .. } => {
                if x <= 0.0 {
                    self.oscillatory_left_primitive(x)
                } else {
                    1.0 - self.oscillatory_left_primitive(-x)
                }
            }
            Shape::Table(t) => t.cumulative(x),
        }
    }

    /// `∫_x^∞ K`, computed without the `1 - F(x)` cancellation where a
    /// closed form allows it.
    pub fn upper_cumulative(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Exponential { rho } => {
                if x >= 0.0 {
                    0.5 * (-rho * x).exp()
                } else {
                    1.0 - 0.5 * (rho * x).exp()
                }
            }
            Shape::DampedOscillatory { .. } => {
                if x >= 0.0 {
                    self.oscillatory_left_primitive(-x)
                } else {
                    1.0 - self.oscillatory_left_primitive(x)
                }
            }
            Shape::Table(t) => t.upper_cumulative(x),
        }
    }

    // Antiderivative of the oscillatory kernel on x <= 0, vanishing at -∞.
    fn oscillatory_left_primitive(&self, x: f64) -> f64 {
        let Shape::DampedOscillatory { a, amp } = self.shape else {
            unreachable!()
        };
        let s = 1.0 + a * a;
        let p = 2.0 * a / s;
        let q = (1.0 - a * a) / s;
        amp * (a * x).exp() * (p * x.cos() + q * x.sin())
    }

    pub fn tail_alpha(&self) -> f64 {
        self.tail_alpha
    }

    pub fn tail_rho(&self) -> f64 {
        self.tail_rho
    }

    /// `R` with `∫_{|x|>R} |K| <= TAIL_TOLERANCE` by the envelope.
    pub fn truncation_radius(&self) -> f64 {
        self.truncation_radius
    }

    /// Envelope bound on `∫_{|x|>r} |K|`.
    pub fn tail_mass_bound(&self, r: f64) -> f64 {
        2.0 * self.tail_alpha / self.tail_rho * (-self.tail_rho * r.max(0.0)).exp()
    }

    /// Envelope bound on `∫_{-∞}^{-r} |K|` (equivalently the right tail).
    pub fn one_sided_tail_bound(&self, r: f64) -> f64 {
        self.tail_alpha / self.tail_rho * (-self.tail_rho * r.max(0.0)).exp()
    }

    /// Points where `K` may fail to be smooth; quadrature splits there.
    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// Upper bound on `sup |K|`. Exact for the analytic kernels; for tables
    /// the spline is sampled 32 times per knot interval, with a 5% margin.
    pub fn sup_bound(&self) -> f64 {
        match &self.shape {
            Shape::Exponential { rho } => 0.5 * rho,
            Shape::DampedOscillatory { .. } => self.tail_alpha,
            Shape::Table(t) => {
                let mut m: f64 = 0.0;
                for w in t.xs.windows(2) {
                    for j in 0..=32 {
                        m = m.max(t.eval(w[0] + (w[1] - w[0]) * j as f64 / 32.0).abs());
                    }
                }
                (1.05 * m).max(self.tail_alpha)
            }
        }
    }

    /// `∫ |K|`.
    pub fn abs_mass(&self) -> f64 {
        self.abs_mass
    }

    /// `∫_{-∞}^0 |x| K(x) dx`.
    pub fn left_moment(&self) -> f64 {
        self.left_moment
    }

    /// `∫_0^∞ |x| K(x) dx`.
    pub fn right_moment(&self) -> f64 {
        self.right_moment
    }

    /// `∫_{-∞}^0 K`.
    pub fn left_mass(&self) -> f64 {
        self.cumulative(0.0)
    }

    /// Short human-readable description.
    pub fn describe(&self) -> String {
        match &self.shape {
            Shape::Exponential { rho } => format!("exponential(rho={rho})"),
            Shape::DampedOscillatory { a, .. } => format!("damped_oscillatory(a={a})"),
            Shape::Table(t) => format!("table({} samples)", t.xs.len()),
        }
    }

    /// Integrates `g(x) K(x)` (or any kernel-localized integrand) over
    /// `[lo, hi]`, splitting at the kernel break points.
    pub fn integrate(&self, g: impl FnMut(f64) -> f64, lo: f64, hi: f64, cfg: &QuadConfig) -> Result<f64> {
        Ok(integrate_with_breaks(g, lo, hi, &self.breaks, cfg)?.value)
    }

    /// Break points of `x ↦ K(x - s)` for every shift `s`, clipped to
    /// `(lo, hi)`. Oscillatory kernels also split at half periods.
    pub fn shifted_breaks(&self, shifts: &[f64], lo: f64, hi: f64) -> Vec<f64> {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let mut out = Vec::new();
        for &s in shifts {
            out.extend(self.breaks.iter().map(|b| b + s).filter(|p| *p > lo && *p < hi));
            if matches!(self.shape, Shape::DampedOscillatory { .. }) {
                let first = ((lo - s) / PI).ceil() as i64;
                let last = ((hi - s) / PI).floor() as i64;
                out.extend((first..=last).map(|k| s + k as f64 * PI).filter(|p| *p > lo && *p < hi));
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Integrates over `[lo, hi]`, splitting at the kernel breaks shifted by
    /// each entry of `shifts`. An empty or reversed range gives zero.
    pub fn integrate_shifted(
        &self,
        g: impl FnMut(f64) -> f64,
        lo: f64,
        hi: f64,
        shifts: &[f64],
        cfg: &QuadConfig,
    ) -> Result<f64> {
        if lo >= hi {
            return Ok(0.0);
        }
        let breaks = self.shifted_breaks(shifts, lo, hi);
        Ok(integrate_with_breaks(g, lo, hi, &breaks, cfg)?.value)
    }

    fn fill_moments(&mut self) -> Result<()> {
        let cfg = QuadConfig::with_abs_tol(1e-13);
        let r = self.truncation_radius;
        // Split the oscillatory integrands into half-period pieces.
        let mut breaks = self.breaks.clone();
        if matches!(self.shape, Shape::DampedOscillatory { .. }) {
            let n = (r / PI).ceil() as i64;
            breaks.extend((-n..=n).map(|k| k as f64 * PI));
        }
        let abs = integrate_with_breaks(|x| self.eval(x).abs(), -r, r, &breaks, &cfg)?.value;
        let left = integrate_with_breaks(|x| -x * self.eval(x), -r, 0.0, &breaks, &cfg)?.value;
        let right = integrate_with_breaks(|x| x * self.eval(x), 0.0, r, &breaks, &cfg)?.value;
        self.abs_mass = abs;
        self.left_moment = left;
        self.right_moment = right;
        Ok(())
    }
}

/// Natural cubic spline through table samples with exponential tails.
#[derive(Debug, Clone, PartialEq)]
struct TableKernel {
    xs: Vec<f64>,
    ys: Vec<f64>,
    // Second derivatives at the knots.
    m: Vec<f64>,
    // Spline integral from xs[0] to xs[i].
    knot_mass: Vec<f64>,
    rho: f64,
}

impl TableKernel {
    fn new(samples: &[(f64, f64)], rho: f64) -> Self {
        let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let m = natural_spline_second_derivatives(&xs, &ys);
        let mut t = TableKernel {
            xs,
            ys,
            m,
            knot_mass: Vec::new(),
            rho,
        };
        t.knot_mass = t.compute_knot_mass();
        t
    }

    fn scaled(&self, s: f64) -> Self {
        TableKernel {
            xs: self.xs.clone(),
            ys: self.ys.iter().map(|y| y * s).collect(),
            m: self.m.iter().map(|v| v * s).collect(),
            knot_mass: self.knot_mass.iter().map(|v| v * s).collect(),
            rho: self.rho,
        }
    }

    fn compute_knot_mass(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.xs.len()];
        for i in 0..self.xs.len() - 1 {
            let h = self.xs[i + 1] - self.xs[i];
            acc[i + 1] = acc[i] + self.segment_integral(i, h);
        }
        acc
    }

    fn left_tail_mass(&self) -> f64 {
        self.ys[0] / self.rho
    }

    fn right_tail_mass(&self) -> f64 {
        self.ys[self.ys.len() - 1] / self.rho
    }

    fn raw_mass(&self) -> f64 {
        self.left_tail_mass() + self.knot_mass[self.xs.len() - 1] + self.right_tail_mass()
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.binary_search_by(|p| p.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(i) => (i.max(1) - 1).min(n - 2),
        }
    }

    // Spline coefficients on segment i in powers of t = x - xs[i].
    fn coefficients(&self, i: usize) -> (f64, f64, f64, f64) {
        let h = self.xs[i + 1] - self.xs[i];
        let a = self.ys[i];
        let b = (self.ys[i + 1] - self.ys[i]) / h - h * (2.0 * self.m[i] + self.m[i + 1]) / 6.0;
        let c = 0.5 * self.m[i];
        let d = (self.m[i + 1] - self.m[i]) / (6.0 * h);
        (a, b, c, d)
    }

    fn segment_integral(&self, i: usize, t: f64) -> f64 {
        let (a, b, c, d) = self.coefficients(i);
        t * (a + t * (b / 2.0 + t * (c / 3.0 + t * d / 4.0)))
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] {
            return self.ys[0] * (self.rho * (x - self.xs[0])).exp();
        }
        if x > self.xs[n - 1] {
            return self.ys[n - 1] * (-self.rho * (x - self.xs[n - 1])).exp();
        }
        let i = self.segment(x);
        let (a, b, c, d) = self.coefficients(i);
        let t = x - self.xs[i];
        a + t * (b + t * (c + t * d))
    }

    fn cumulative(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] {
            return self.left_tail_mass() * (self.rho * (x - self.xs[0])).exp();
        }
        if x > self.xs[n - 1] {
            return self.left_tail_mass() + self.knot_mass[n - 1] + self.right_tail_mass()
                - self.upper_cumulative(x);
        }
        let i = self.segment(x);
        self.left_tail_mass() + self.knot_mass[i] + self.segment_integral(i, x - self.xs[i])
    }

    fn upper_cumulative(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x > self.xs[n - 1] {
            return self.right_tail_mass() * (-self.rho * (x - self.xs[n - 1])).exp();
        }
        self.left_tail_mass() + self.knot_mass[n - 1] + self.right_tail_mass() - self.cumulative(x)
    }
}

fn natural_spline_second_derivatives(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm on the interior equations.
    let k = n - 2;
    let mut diag = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    let mut upper = vec![0.0; k];
    for j in 0..k {
        let i = j + 1;
        let h0 = xs[i] - xs[i - 1];
        let h1 = xs[i + 1] - xs[i];
        diag[j] = 2.0 * (h0 + h1);
        upper[j] = h1;
        rhs[j] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
    }
    for j in 1..k {
        let h0 = xs[j + 1] - xs[j];
        let w = h0 / diag[j - 1];
        diag[j] -= w * upper[j - 1];
        rhs[j] -= w * rhs[j - 1];
    }
    m[k] = rhs[k - 1] / diag[k - 1];
    for j in (0..k - 1).rev() {
        m[j + 1] = (rhs[j] - upper[j] * m[j + 2]) / diag[j];
    }
    m
}

/// Outcome of one hypothesis clause.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Pass/fail report for the parameter and kernel hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub clauses: Vec<ClauseCheck>,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&ClauseCheck> {
        self.clauses.iter().filter(|c| !c.passed).collect()
    }

    /// Converts a failing report into a hypothesis error.
    pub fn into_result(self) -> Result<Self> {
        if self.all_passed() {
            Ok(self)
        } else {
            let msg = self
                .failures()
                .iter()
                .map(|c| format!("{}: {}", c.name, c.detail))
                .collect::<Vec<_>>()
                .join("; ");
            Err(Error::Hypothesis(msg))
        }
    }
}

/// Checks `0 < θ < min{1/2, ∫_{-∞}^0 K}`, `γ/(1+γ) < θ`, the sampled
/// envelope and unit mass. Never fails; inspect the report.
pub fn check_hypotheses(kernel: &KernelSpec, theta: f64, gamma: f64) -> HypothesisReport {
    let mut clauses = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        clauses.push(ClauseCheck {
            name: name.to_string(),
            passed,
            detail,
        })
    };

    push(
        "theta_in_(0,1/2)",
        theta > 0.0 && theta < 0.5,
        format!("theta = {theta}"),
    );
    let left = kernel.left_mass();
    push(
        "theta_below_left_mass",
        theta < left,
        format!("theta = {theta}, int_(-inf)^0 K = {left:.12}"),
    );
    push("gamma_positive", gamma > 0.0, format!("gamma = {gamma}"));
    let ratio = gamma / (1.0 + gamma);
    push(
        "feedback_ratio_below_theta",
        gamma > 0.0 && ratio < theta,
        format!("gamma/(1+gamma) = {ratio:.12}, theta = {theta}"),
    );

    let r = kernel.truncation_radius();
    let n = 20_001;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_x = 0.0;
    for i in 0..n {
        let x = -r + 2.0 * r * i as f64 / (n - 1) as f64;
        let bound = kernel.tail_alpha() * (-kernel.tail_rho() * x.abs()).exp();
        let excess = kernel.eval(x).abs() / bound;
        if excess > worst {
            worst = excess;
            worst_x = x;
        }
    }
    push(
        "tail_envelope",
        worst <= 1.0 + 1e-9,
        format!("max |K|/(alpha e^(-rho|x|)) = {worst:.6} at x = {worst_x:.4}"),
    );

    let mass = unit_mass_by_quadrature(kernel);
    match mass {
        Ok(m) => push(
            "unit_mass",
            (m - 1.0).abs() <= UNIT_MASS_TOLERANCE,
            format!("int K = {m:.15}"),
        ),
        Err(e) => push("unit_mass", false, format!("quadrature failed: {e}")),
    }

    HypothesisReport { clauses }
}

/// `∫K` by quadrature of `K` itself on `[-R, R]` (independent of the
/// closed-form cumulative).
pub fn unit_mass_by_quadrature(kernel: &KernelSpec) -> Result<f64> {
    let r = kernel.truncation_radius();
    let n = (r / PI).ceil() as i64;
    let mut breaks: Vec<f64> = (-n..=n).map(|k| k as f64 * PI).collect();
    breaks.extend_from_slice(kernel.breaks());
    let cfg = QuadConfig::with_abs_tol(1e-14);
    Ok(integrate_with_breaks(|x| kernel.eval(x), -r, r, &breaks, &cfg)?.value)
}
