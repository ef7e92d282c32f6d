//! Numerical certification of a solved pulse: the singular orbit `S₀`,
//! sampling of the pulse orbit `S_ε`, Hausdorff distance, the threshold
//! crossing pattern with analytic tail bounds, and region-wise closeness to
//! the front, back and critical manifolds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::front::FrontSolution;
use crate::pulse::PulseSolution;

pub const DEFAULT_RESOLUTION: f64 = 1e-3;
pub const DEFAULT_POINT_BUDGET: usize = 2_000_000;
/// Tail tolerance `δ` used to pick `z0`.
pub const DEFAULT_DELTA: f64 = 0.01;
pub const DEFAULT_HAUSDORFF_BOUND: f64 = 0.2;
/// `|U'|` at a crossing must exceed this to count as transversal.
pub const TRANSVERSALITY_MIN: f64 = 1e-6;

// Smallest z-step the adaptive sampler will take; below it a jump in (U, Q)
// is accepted as is.
const MIN_DZ: f64 = 1e-9;

/// A polyline in the `(U, Q)` plane.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitCurve {
    pub points: Vec<(f64, f64)>,
    pub z_values: Option<Vec<f64>>,
}

impl OrbitCurve {
    pub fn new(points: Vec<(f64, f64)>, z_values: Option<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Parameter("orbit curve needs at least one point".into()));
        }
        if points.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
            return Err(Error::Numerical("orbit curve contains non-finite points".into()));
        }
        if let Some(z) = &z_values {
            if z.len() != points.len() {
                return Err(Error::Parameter(format!(
                    "{} z values for {} points",
                    z.len(),
                    points.len()
                )));
            }
        }
        Ok(Self { points, z_values })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> (f64, f64) {
        self.points[0]
    }

    pub fn last(&self) -> (f64, f64) {
        self.points[self.points.len() - 1]
    }

    /// Largest distance between consecutive points.
    pub fn max_spacing(&self) -> f64 {
        self.points.windows(2).map(|w| dist(w[0], w[1])).fold(0.0, f64::max)
    }

    pub fn max_q(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Distance from `p` to the polyline.
    pub fn distance_to(&self, p: (f64, f64)) -> f64 {
        polyline_dist2(p, &self.points).sqrt()
    }
}

/// The four pieces of the singular homoclinic orbit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularOrbit {
    pub theta: f64,
    /// `(U_f(z), 0)`, from `(0, 0)` to `(1, 0)`.
    pub front_segment: OrbitCurve,
    /// `(U_b(z), 1 - 2θ)`, from `(2θ, 1-2θ)` to `(2θ-1, 1-2θ)`.
    pub back_segment: OrbitCurve,
    /// `U = 1 - Q` for `Q ∈ [0, 1-2θ]`.
    pub right_manifold: OrbitCurve,
    /// `U = -Q` for `Q ∈ [0, 1-2θ]`.
    pub left_manifold: OrbitCurve,
}

impl SingularOrbit {
    pub fn segments(&self) -> [&OrbitCurve; 4] {
        [&self.front_segment, &self.right_manifold, &self.back_segment, &self.left_manifold]
    }
}

/// Anything made of polylines.
pub trait PolylineSet {
    fn polylines(&self) -> Vec<&OrbitCurve>;
}

impl PolylineSet for OrbitCurve {
    fn polylines(&self) -> Vec<&OrbitCurve> {
        vec![self]
    }
}

impl PolylineSet for SingularOrbit {
    fn polylines(&self) -> Vec<&OrbitCurve> {
        self.segments().to_vec()
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn segment_dist2(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (ex, ey) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    ex * ex + ey * ey
}

fn polyline_dist2(p: (f64, f64), pts: &[(f64, f64)]) -> f64 {
    polyline_nearest(p, pts, f64::INFINITY).0
}

// Squared distance from `p` to the polyline and the nearest segment index,
// considering only segments that can beat `best`.
fn polyline_nearest(p: (f64, f64), pts: &[(f64, f64)], mut best: f64) -> (f64, Option<usize>) {
    if pts.len() == 1 {
        let d = dist(p, pts[0]);
        return if d * d < best { (d * d, Some(0)) } else { (best, None) };
    }
    let mut arg = None;
    for (i, w) in pts.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        // Cheap box rejection before the exact projection.
        let bx = (a.0.min(b.0) - p.0).max(p.0 - a.0.max(b.0)).max(0.0);
        let by = (a.1.min(b.1) - p.1).max(p.1 - a.1.max(b.1)).max(0.0);
        if bx * bx + by * by >= best {
            continue;
        }
        let d = segment_dist2(p, a, b);
        if d < best {
            best = d;
            arg = Some(i);
        }
    }
    (best, arg)
}

fn directed(from: &[&OrbitCurve], to: &[&OrbitCurve]) -> f64 {
    let mut worst: f64 = 0.0;
    // Consecutive points have nearby nearest segments; seeding the search
    // with the previous one makes the box test reject almost everything.
    let mut hint: Option<(usize, usize)> = None;
    for curve in from {
        for &p in &curve.points {
            let mut best = match hint {
                Some((c, i)) => {
                    let pts = &to[c].points;
                    let j = i.min(pts.len() - 1);
                    segment_dist2(p, pts[j], pts[(j + 1).min(pts.len() - 1)])
                }
                None => f64::INFINITY,
            };
            for (c, curve_to) in to.iter().enumerate() {
                let (d, arg) = polyline_nearest(p, &curve_to.points, best);
                if let Some(i) = arg {
                    best = d;
                    hint = Some((c, i));
                }
            }
            worst = worst.max(best);
        }
    }
    worst.sqrt()
}

/// Symmetric Hausdorff distance, measuring each vertex against the other
/// set's segments.
pub fn hausdorff_distance<A: PolylineSet + ?Sized, B: PolylineSet + ?Sized>(a: &A, b: &B) -> f64 {
    let (pa, pb) = (a.polylines(), b.polylines());
    directed(&pa, &pb).max(directed(&pb, &pa))
}

/// Samples `eval` on `coarse`, bisecting wherever consecutive points are
/// more than `resolution` apart.
fn adaptive_curve<F>(eval: F, coarse: &[f64], resolution: f64, budget: usize) -> Result<OrbitCurve>
where
    F: Fn(f64) -> Result<(f64, f64)>,
{
    if !(resolution > 0.0) {
        return Err(Error::Parameter(format!("resolution must be positive, got {resolution}")));
    }
    let mut zs = vec![coarse[0]];
    let mut ps = vec![eval(coarse[0])?];
    for &zr in &coarse[1..] {
        let mut pending = vec![(zr, eval(zr)?)];
        while let Some(&(z1, p1)) = pending.last() {
            let (z0, p0) = (zs[zs.len() - 1], ps[ps.len() - 1]);
            if dist(p0, p1) <= resolution || z1 - z0 <= MIN_DZ {
                zs.push(z1);
                ps.push(p1);
                pending.pop();
            } else {
                let zm = 0.5 * (z0 + z1);
                pending.push((zm, eval(zm)?));
            }
            if zs.len() + pending.len() > budget {
                return Err(Error::Resolution(format!(
                    "more than {budget} points needed for resolution {resolution:e}"
                )));
            }
        }
    }
    OrbitCurve::new(ps, Some(zs))
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).ceil().max(1.0) as usize;
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

/// Half-width `Z` beyond which the front is within `tol` of its limits.
fn front_reach(front: &FrontSolution, tol: f64) -> Result<f64> {
    let mut z = 5.0;
    while z < 1e5 {
        if front.profile(-z)?.0.abs() <= tol && (front.profile(z)?.0 - 1.0).abs() <= tol {
            return Ok(z);
        }
        z *= 1.5;
    }
    Err(Error::Numerical("front profile does not settle to its limits".into()))
}

fn manifold(theta: f64, resolution: f64, u_of_q: impl Fn(f64) -> f64) -> Result<OrbitCurve> {
    let top = 1.0 - 2.0 * theta;
    let n = ((top * std::f64::consts::SQRT_2) / resolution).ceil().max(1.0) as usize;
    let pts = (0..=n)
        .map(|i| {
            let q = top * i as f64 / n as f64;
            (u_of_q(q), q)
        })
        .collect();
    OrbitCurve::new(pts, None)
}

/// Builds `S₀` at the default resolution.
pub fn build_singular_orbit(front: &FrontSolution, theta: f64, gamma: f64) -> Result<SingularOrbit> {
    build_singular_orbit_with(front, theta, gamma, DEFAULT_RESOLUTION)
}

pub fn build_singular_orbit_with(
    front: &FrontSolution,
    theta: f64,
    gamma: f64,
    resolution: f64,
) -> Result<SingularOrbit> {
    crate::kernels::check_hypotheses(front.kernel(), theta, gamma).into_result()?;
    let reach = front_reach(front, 1e-3 * resolution)?;
    let front_segment = adaptive_curve(
        |z| Ok((front.profile(z)?.0, 0.0)),
        &grid(-reach, reach, 0.25),
        resolution,
        DEFAULT_POINT_BUDGET,
    )?;
    let top = 1.0 - 2.0 * theta;
    let back_segment = OrbitCurve::new(
        front_segment.points.iter().map(|p| (2.0 * theta - p.0, top)).collect(),
        front_segment.z_values.clone(),
    )?;
    Ok(SingularOrbit {
        theta,
        front_segment,
        back_segment,
        right_manifold: manifold(theta, resolution, |q| 1.0 - q)?,
        left_manifold: manifold(theta, resolution, |q| -q)?,
    })
}

/// Window whose endpoints are within `1e-6` of the rest state.
pub fn default_orbit_window(solution: &PulseSolution) -> (f64, f64) {
    solution.horizon(1e-7)
}

pub fn sample_pulse_orbit(solution: &PulseSolution, window: (f64, f64), resolution: f64) -> Result<OrbitCurve> {
    sample_pulse_orbit_with_budget(solution, window, resolution, DEFAULT_POINT_BUDGET)
}

pub fn sample_pulse_orbit_with_budget(
    solution: &PulseSolution,
    window: (f64, f64),
    resolution: f64,
    budget: usize,
) -> Result<OrbitCurve> {
    let (lo, hi) = window;
    let pad = solution.z_pad();
    let a = solution.wave.width;
    if !(lo <= -pad && hi >= a + pad) {
        return Err(Error::Parameter(format!(
            "sampling window [{lo}, {hi}] must cover [{}, {}]",
            -pad,
            a + pad
        )));
    }
    // Fine coarse grid where the fast dynamics live, looser in the tails.
    let mut coarse = grid(lo, -pad, 1.0);
    coarse.pop();
    coarse.extend(grid(-pad, a + pad, 0.25));
    coarse.extend(grid(a + pad, hi, 1.0).into_iter().skip(1));
    coarse.dedup();
    adaptive_curve(|z| Ok((solution.u(z)?, solution.q(z)?)), &coarse, resolution, budget)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub z: f64,
    pub direction: Direction,
    /// `U'` at the crossing.
    pub slope: f64,
    pub transversal: bool,
}

/// Bounds on `|U|` and `|Q|` outside the scanned window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBounds {
    pub z_lo: f64,
    pub z_hi: f64,
    pub left_u: f64,
    pub left_q: f64,
    pub right_u: f64,
    pub right_q: f64,
}

impl TailBounds {
    /// No crossing is possible beyond the window.
    pub fn certified(&self, theta: f64) -> bool {
        self.left_u < theta && self.right_u < theta
    }
}

/// Sampling spec for [`verify_threshold_pattern`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanGrid {
    pub step: f64,
    pub bisection_tol: f64,
    pub transversality_min: f64,
    /// Subintervals shorter than this that still fail the certificate are
    /// reported as uncertified.
    pub min_interval: f64,
}

impl Default for ScanGrid {
    fn default() -> Self {
        Self {
            step: 0.25,
            bisection_tol: 1e-10,
            transversality_min: TRANSVERSALITY_MIN,
            min_interval: 1e-9,
        }
    }
}

/// Sup-norm deviations over the four regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionMetrics {
    pub z0: f64,
    /// `sup |U - U_f|` on `(-∞, z0]`.
    pub front_deviation: f64,
    pub front_derivative_deviation: f64,
    /// `sup |U - (1 - Q)|` on `(z0, a - z0)`.
    pub right_band: f64,
    /// `sup |U(z) - U_b(z - a)|` on `[a - z0, a + z0]`.
    pub back_deviation: f64,
    pub back_derivative_deviation: f64,
    /// `sup |U + Q|` on `(a + z0, ∞)`.
    pub left_band: f64,
    /// `√2 δ`.
    pub band_width: f64,
    pub right_band_contained: bool,
    pub left_band_contained: bool,
    /// `Q' > 0` at every sample of `(z0, a - z0)`.
    pub q_increasing_on_right: bool,
    /// `Q' < 0` at every sample of `(a + z0, ∞)`.
    pub q_decreasing_on_left: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub crossings: Vec<Crossing>,
    pub tails: TailBounds,
    /// Subintervals where neither sign nor monotonicity could be certified.
    pub uncertified: Vec<(f64, f64)>,
    pub hausdorff: Option<f64>,
    pub hausdorff_bound: Option<f64>,
    pub region_metrics: Option<RegionMetrics>,
    pub warnings: Vec<String>,
    pub passed: bool,
}

impl VerificationReport {
    fn pattern_ok(&self, a: f64) -> bool {
        let [c0, c1] = match self.crossings.as_slice() {
            [c0, c1] => [c0, c1],
            _ => return false,
        };
        c0.direction == Direction::Up
            && c1.direction == Direction::Down
            && c0.transversal
            && c1.transversal
            && c0.z.abs() <= 1e-8
            && (c1.z - a).abs() <= 1e-8 * a.max(1.0)
            && self.uncertified.is_empty()
    }

    fn update_passed(&mut self, a: f64, theta: f64) {
        let hausdorff_ok = match (self.hausdorff, self.hausdorff_bound) {
            (Some(d), Some(b)) => d <= b,
            _ => true,
        };
        self.passed = self.pattern_ok(a) && self.tails.certified(theta) && hausdorff_ok;
    }
}

/// Tail bounds and the window they hold outside of.
pub fn tail_bounds(solution: &PulseSolution) -> Result<TailBounds> {
    let k = solution.kernel();
    let p = solution.propagator();
    let e = p.eigen;
    let c = p.c;
    let a = solution.wave.width;
    let theta = solution.params.theta;
    let (alpha, rho) = (k.tail_alpha(), k.tail_rho());
    let r = k.truncation_radius();
    let pad = solution.z_pad();

    // Left: |W(x)| <= 2(α/ρ) e^{ρx} for x <= 0.
    let left_coef = 2.0 * alpha / (rho * rho);
    let z_lo = (-pad).min((0.5 * theta / (left_coef * p.cx_bound())).ln() / rho);
    let left_u = left_coef * p.cx_bound() * (rho * z_lo).exp();
    let left_q = left_coef * p.dx_bound() * (rho * z_lo).exp();

    // Right: beyond b = a + R, U and Q are sums of two decaying modes whose
    // amplitudes are fixed by the window integrals up to b.
    let b = a + r;
    let quad = solution.quad();
    let modal = |w: f64| {
        k.integrate_shifted(
            |x| (w * (x - b) / c).exp() * (k.cumulative(x) - k.cumulative(x - a)),
            -r,
            b,
            &[0.0, a],
            quad,
        )
    };
    let (i1, i2) = (modal(e.omega1)?, modal(e.omega2)?);
    let (a1, a2) = p.cx_modes();
    let leak = 4.0 * alpha / (rho * rho) * (-rho * r).exp();
    let dscale = e.epsilon / (c * e.gap());
    let bound_u = |z: f64| {
        let (m1, m2) = ((-e.omega1 * (z - b) / c).exp(), (-e.omega2 * (z - b) / c).exp());
        (a1 * i1).abs() * m1 + (a2 * i2).abs() * m2 + (a1.abs() + a2.abs()) * leak
    };
    let bound_q = |z: f64| {
        let (m1, m2) = ((-e.omega1 * (z - b) / c).exp(), (-e.omega2 * (z - b) / c).exp());
        dscale * (i1.abs() * m1 + i2.abs() * m2 + 2.0 * leak)
    };
    let mut d = pad;
    while bound_u(a + d) > 0.5 * theta && d < 1e9 {
        d *= 1.5;
    }
    let z_hi = a + d;
    Ok(TailBounds {
        z_lo,
        z_hi,
        left_u,
        left_q,
        right_u: bound_u(z_hi),
        right_q: bound_q(z_hi),
    })
}

struct Scanner<'s> {
    s: &'s PulseSolution,
    theta: f64,
    // sup |U'| and sup |U''|.
    l1: f64,
    l2: f64,
    grid: ScanGrid,
    crossings: Vec<Crossing>,
    uncertified: Vec<(f64, f64)>,
}

impl Scanner<'_> {
    fn v(&self, z: f64) -> Result<f64> {
        Ok(self.s.u(z)? - self.theta)
    }

    // Certifies [z0, z1] given v at both ends.
    fn interval(&mut self, z0: f64, v0: f64, z1: f64, v1: f64) -> Result<()> {
        let h = z1 - z0;
        // Same sign and either the Lipschitz bound or the linear
        // interpolation error bound L2 h²/8 keeps v away from zero.
        if v0 * v1 > 0.0 && (v0.abs() + v1.abs() > self.l1 * h || v0.abs().min(v1.abs()) > 0.125 * self.l2 * h * h) {
            return Ok(());
        }
        let (d0, d1) = (self.s.du(z0)?, self.s.du(z1)?);
        if d0 * d1 > 0.0 && d0.abs().min(d1.abs()) > 0.5 * self.l2 * h {
            // Strictly monotone: one crossing or none.
            return if v0 * v1 > 0.0 { Ok(()) } else { self.bisect(z0, v0, z1) };
        }
        if h <= self.grid.min_interval {
            self.uncertified.push((z0, z1));
            return Ok(());
        }
        let zm = 0.5 * (z0 + z1);
        let vm = self.v(zm)?;
        self.interval(z0, v0, zm, vm)?;
        self.interval(zm, vm, z1, v1)
    }

    // Single monotone crossing inside [lo, hi].
    fn bisect(&mut self, mut lo: f64, mut vlo: f64, mut hi: f64) -> Result<()> {
        if vlo == 0.0 {
            hi = lo;
        }
        while hi - lo > self.grid.bisection_tol {
            let mid = 0.5 * (lo + hi);
            let vm = self.v(mid)?;
            if vm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if (vm > 0.0) == (vlo > 0.0) {
                lo = mid;
                vlo = vm;
            } else {
                hi = mid;
            }
        }
        let z = 0.5 * (lo + hi);
        // A zero exactly at a shared endpoint is seen from both sides.
        if self.crossings.last().is_some_and(|c| (c.z - z).abs() <= 2.0 * self.grid.bisection_tol) {
            return Ok(());
        }
        let slope = self.s.du(z)?;
        self.crossings.push(Crossing {
            z,
            direction: if slope > 0.0 { Direction::Up } else { Direction::Down },
            slope,
            transversal: slope.abs() > self.grid.transversality_min,
        });
        Ok(())
    }
}

/// Scans `U - θ` over the window where the tails are not certified and
/// locates every crossing.
pub fn verify_threshold_pattern(solution: &PulseSolution, grid: &ScanGrid) -> Result<VerificationReport> {
    let tails = tail_bounds(solution)?;
    let k = solution.kernel();
    let p = solution.propagator();
    let l1 = p.cx_bound() * 2.0 * k.abs_mass();
    let lq = p.dx_bound() * 2.0 * k.abs_mass();
    let l2 = (l1 + lq + 2.0 * k.sup_bound()) / p.c;
    let theta = solution.params.theta;
    let mut sc = Scanner {
        s: solution,
        theta,
        l1,
        l2,
        grid: *grid,
        crossings: Vec::new(),
        uncertified: Vec::new(),
    };
    // 0 and a sit mid-interval so no node value is near zero there.
    let a = solution.wave.width;
    let h = grid.step.min(0.25 * a);
    let mut zs = grid_nodes(tails.z_lo, -0.5 * h, h);
    zs.extend(grid_nodes(0.5 * h, a - 0.5 * h, h));
    zs.extend(grid_nodes(a + 0.5 * h, tails.z_hi, h));
    let mut prev = (zs[0], sc.v(zs[0])?);
    for &z in &zs[1..] {
        let v = sc.v(z)?;
        sc.interval(prev.0, prev.1, z, v)?;
        prev = (z, v);
    }
    let mut warnings = Vec::new();
    for c in sc.crossings.iter().filter(|c| !c.transversal) {
        warnings.push(format!("near-tangent crossing at z={} with U'={:e}", c.z, c.slope));
    }
    if !tails.certified(theta) {
        warnings.push("tail bounds do not exclude crossings outside the scanned window".into());
    }
    let mut report = VerificationReport {
        crossings: sc.crossings,
        tails,
        uncertified: sc.uncertified,
        hausdorff: None,
        hausdorff_bound: None,
        region_metrics: None,
        warnings,
        passed: false,
    };
    if report.crossings.len() > 2 {
        report
            .warnings
            .push(format!("{} threshold crossings; the formal solution is not a pulse", report.crossings.len()));
    }
    report.update_passed(a, theta);
    Ok(report)
}

fn grid_nodes(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    grid(lo, hi, step)
}

/// Smallest `z0` (on a 0.5 grid) with `∫_{|x|>z0} |K| < δ` and the front
/// within `δ/4` of its limits at `∓z0`.
pub fn default_z0(front: &FrontSolution, delta: f64) -> Result<f64> {
    let k = front.kernel();
    let mut z0 = 0.5;
    while z0 <= 1e4 {
        if k.tail_mass_bound(z0) < delta
            && front.profile(-z0)?.0.abs() < 0.25 * delta
            && (front.profile(z0)?.0 - 1.0).abs() < 0.25 * delta
        {
            return Ok(z0);
        }
        z0 += 0.5;
    }
    Err(Error::Numerical(format!("no z0 below 1e4 meets the tail conditions for δ={delta}")))
}

/// Sample steps used by [`region_closeness`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionSampling {
    /// Step on the fast regions `R₁`, `R₃`.
    pub fast_step: f64,
    /// Step on the slow regions `R₂`, `R₄`.
    pub slow_step: f64,
    pub delta: f64,
}

impl Default for RegionSampling {
    fn default() -> Self {
        Self {
            fast_step: 0.05,
            slow_step: 0.5,
            delta: DEFAULT_DELTA,
        }
    }
}

pub fn region_closeness(solution: &PulseSolution, front: &FrontSolution, z0: f64) -> Result<RegionMetrics> {
    region_closeness_with(solution, front, z0, &RegionSampling::default())
}

pub fn region_closeness_with(
    solution: &PulseSolution,
    front: &FrontSolution,
    z0: f64,
    sampling: &RegionSampling,
) -> Result<RegionMetrics> {
    let a = solution.wave.width;
    if !(z0 > 0.0) || a <= 2.0 * z0 {
        return Err(Error::Parameter(format!(
            "regions overlap: need a = {a} > 2 z0 = {}",
            2.0 * z0
        )));
    }
    let (lo, hi) = solution.horizon(1e-8);
    let s = solution;

    let (mut r1, mut r1d) = (0.0f64, 0.0f64);
    for z in grid(lo.min(-z0), z0, sampling.fast_step) {
        let (uf, duf) = front.profile(z)?;
        r1 = r1.max((s.u(z)? - uf).abs());
        r1d = r1d.max((s.du(z)? - duf).abs());
    }

    let (mut r2, mut q_up) = (0.0f64, true);
    for z in interior(z0, a - z0, sampling.slow_step) {
        let p = s.profile(z)?;
        r2 = r2.max((p.u - (1.0 - p.q)).abs());
        q_up &= p.dq > 0.0;
    }

    let (mut r3, mut r3d) = (0.0f64, 0.0f64);
    for z in grid(a - z0, a + z0, sampling.fast_step) {
        let (ub, dub) = front.back_profile(z - a)?;
        r3 = r3.max((s.u(z)? - ub).abs());
        r3d = r3d.max((s.du(z)? - dub).abs());
    }

    let (mut r4, mut q_down) = (0.0f64, true);
    for z in interior(a + z0, hi.max(a + z0 + sampling.slow_step), sampling.slow_step) {
        let p = s.profile(z)?;
        r4 = r4.max((p.u + p.q).abs());
        q_down &= p.dq < 0.0;
    }

    let band = std::f64::consts::SQRT_2 * sampling.delta;
    Ok(RegionMetrics {
        z0,
        front_deviation: r1,
        front_derivative_deviation: r1d,
        right_band: r2,
        back_deviation: r3,
        back_derivative_deviation: r3d,
        left_band: r4,
        band_width: band,
        right_band_contained: r2 <= band,
        left_band_contained: r4 <= band,
        q_increasing_on_right: q_up,
        q_decreasing_on_left: q_down,
    })
}

// Grid points strictly inside (lo, hi).
fn interior(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let g = grid(lo, hi, step);
    g[1..g.len() - 1].to_vec()
}

/// Options for [`verify_pulse`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub resolution: f64,
    pub point_budget: usize,
    pub hausdorff_bound: f64,
    /// Overrides [`default_z0`].
    pub z0: Option<f64>,
    pub scan: ScanGrid,
    pub regions: RegionSampling,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_RESOLUTION,
            point_budget: DEFAULT_POINT_BUDGET,
            hausdorff_bound: DEFAULT_HAUSDORFF_BOUND,
            z0: None,
            scan: ScanGrid::default(),
            regions: RegionSampling::default(),
        }
    }
}

/// Everything [`verify_pulse`] computes, including the curves.
#[derive(Debug, Clone)]
pub struct Verification {
    pub report: VerificationReport,
    pub orbit: OrbitCurve,
    pub singular: SingularOrbit,
}

/// Threshold pattern, Hausdorff distance to `S₀` and, when the regions
/// are separated, region metrics.
pub fn verify_pulse(solution: &PulseSolution, front: &FrontSolution, options: &VerifyOptions) -> Result<Verification> {
    let params = solution.params;
    let mut report = verify_threshold_pattern(solution, &options.scan)?;
    let singular = build_singular_orbit_with(front, params.theta, params.gamma, options.resolution)?;
    let orbit = sample_pulse_orbit_with_budget(
        solution,
        default_orbit_window(solution),
        options.resolution,
        options.point_budget,
    )?;
    report.hausdorff = Some(hausdorff_distance(&orbit, &singular));
    report.hausdorff_bound = Some(options.hausdorff_bound);
    let z0 = match options.z0 {
        Some(z) => z,
        None => default_z0(front, options.regions.delta)?,
    };
    if solution.wave.width > 2.0 * z0 {
        report.region_metrics = Some(region_closeness_with(solution, front, z0, &options.regions)?);
    } else {
        report
            .warnings
            .push(format!("a = {} <= 2 z0 = {}; region metrics skipped", solution.wave.width, 2.0 * z0));
    }
    report.update_passed(solution.wave.width, params.theta);
    Ok(Verification {
        report,
        orbit,
        singular,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::front::{solve_front_speed, FrontOptions};
    use crate::kernels::make_exponential_kernel;
    use crate::pulse::{solve_pulse, ModelParams, PulseOptions};

    fn curve(pts: &[(f64, f64)]) -> OrbitCurve {
        OrbitCurve::new(pts.to_vec(), None).unwrap()
    }

    #[test]
    fn hausdorff_identity_and_offset() {
        let a = curve(&[(0.0, 0.0), (0.5, 0.0), (1.0, 0.0)]);
        assert_eq!(hausdorff_distance(&a, &a), 0.0);
        let b = curve(&[(0.0, 0.3), (1.0, 0.3)]);
        assert!((hausdorff_distance(&a, &b) - 0.3).abs() < 1e-15);
        // Vertices far apart along the segment still see distance h.
        let c = curve(&[(0.0, 0.1), (0.37, 0.1), (1.0, 0.1)]);
        assert!((hausdorff_distance(&b, &c) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn hausdorff_is_symmetric_max() {
        let a = curve(&[(0.0, 0.0), (1.0, 0.0)]);
        let b = curve(&[(0.0, 0.0), (2.0, 0.0)]);
        assert!((hausdorff_distance(&a, &b) - 1.0).abs() < 1e-15);
        assert!((hausdorff_distance(&b, &a) - 1.0).abs() < 1e-15);
        let p = curve(&[(3.0, 4.0)]);
        assert!((hausdorff_distance(&p, &curve(&[(0.0, 0.0)])) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn curve_rejects_nan() {
        assert!(OrbitCurve::new(vec![(0.0, f64::NAN)], None).is_err());
        assert!(OrbitCurve::new(vec![], None).is_err());
    }

    #[test]
    fn adaptive_sampling_meets_resolution() {
        let c = adaptive_curve(|z| Ok((z.cos(), z.sin())), &[0.0, 3.0], 1e-2, 10_000).unwrap();
        assert!(c.max_spacing() <= 1e-2);
        let err = adaptive_curve(|z| Ok((z.cos(), z.sin())), &[0.0, 3.0], 1e-2, 50).unwrap_err();
        assert!(matches!(err, Error::Resolution(_)));
    }

    #[test]
    fn singular_orbit_corners() {
        let k = make_exponential_kernel(1.0).unwrap();
        let front = solve_front_speed(&k, 0.25, &FrontOptions::default()).unwrap();
        let s = build_singular_orbit(&front, 0.25, 0.2).unwrap();
        assert_eq!(s.left_manifold.first(), (0.0, 0.0));
        assert_eq!(s.left_manifold.last(), (-0.5, 0.5));
        assert_eq!(s.right_manifold.first(), (1.0, 0.0));
        assert_eq!(s.right_manifold.last(), (0.5, 0.5));
        assert!(dist(s.front_segment.last(), (1.0, 0.0)) <= DEFAULT_RESOLUTION);
        assert!(dist(s.front_segment.first(), (0.0, 0.0)) <= DEFAULT_RESOLUTION);
        assert!(dist(s.back_segment.last(), (-0.5, 0.5)) <= DEFAULT_RESOLUTION);
        assert!(s.front_segment.distance_to((0.25, 0.0)) < 1e-12);
        assert!(s.back_segment.distance_to((0.25, 0.5)) < 1e-12);
        for seg in s.segments() {
            assert!(seg.max_spacing() <= DEFAULT_RESOLUTION);
        }
    }

    #[test]
    fn default_z0_exponential() {
        let k = make_exponential_kernel(1.0).unwrap();
        let front = solve_front_speed(&k, 0.25, &FrontOptions::default()).unwrap();
        let z0 = default_z0(&front, 0.01).unwrap();
        assert!(z0 > 4.0 && z0 < 10.0, "{z0}");
        assert!(k.tail_mass_bound(z0) < 0.01);
        assert!(default_z0(&front, 0.01 / 2.0).unwrap() >= z0);
    }

    #[test]
    fn region_precondition() {
        let k = make_exponential_kernel(1.0).unwrap();
        let front = solve_front_speed(&k, 0.25, &FrontOptions::default()).unwrap();
        let s = solve_pulse(&k, ModelParams::new(0.25, 0.2, 0.05).unwrap(), None, &PulseOptions::default()).unwrap();
        let a = s.wave.width;
        assert!(matches!(region_closeness(&s, &front, a / 2.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn threshold_pattern_exponential() {
        let k = make_exponential_kernel(1.0).unwrap();
        let s = solve_pulse(&k, ModelParams::new(0.25, 0.2, 0.02).unwrap(), None, &PulseOptions::default()).unwrap();
        let r = verify_threshold_pattern(&s, &ScanGrid::default()).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.crossings.len(), 2);
        assert!(r.crossings[0].z.abs() < 1e-8);
        assert!((r.crossings[1].z - s.wave.width).abs() < 1e-8);
        assert!(r.tails.certified(0.25));
    }
}
