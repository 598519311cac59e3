//! Heat equation: half-line solution formulas, the finite-interval
//! reference formula, and solvers for the boundary-data integral equation
//!
//! `a(t) = g(t) + (l^2 / 4 pi) int_0^t K(t - r) a(r) dr`,  `K = Lambda_l * Lambda_l`.
//!
//! Smooth data are evaluated on the rays `arg k = pi/8, 7pi/8` after
//! subtracting a second-order Taylor model of the datum, whose contribution is
//! added back in closed form with `erfc`. Piecewise-linear data are evaluated
//! fully in closed form, segment by segment.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::contours::{integrate_adaptive, make_contour, ContourKind, ContourPath, Grading, Node, Piece, QuadratureRule, Segment};
use crate::domain::{l2_norm_values, BoundarySignal, Certificate, Representation, SolutionField, SpaceGrid, TimeGrid};
use crate::error::{invalid, Error, Result};
use crate::kernels_heat::{dp_truncation_radius, LambdaKernel, SelfConvTable};
use crate::quad::gauss_legendre;
use crate::special::{erfc, expm1, psi3, tail_moments, C0, I};

const IMAG_DISCARD: f64 = 1e-8;
const IMAG_FAIL: f64 = 1e-6;
const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Reduced interval problem `q_t = d(t) q_xx` on `(0, l)` with `q(0, t) = g(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatScenario {
    pub ell: f64,
    pub t_end: f64,
    pub g: BoundarySignal,
    /// Time-dependent diffusion coefficient; `None` means `d = 1`.
    pub diffusion: Option<BoundarySignal>,
}

impl HeatScenario {
    pub fn new(ell: f64, t_end: f64, g: BoundarySignal) -> Result<Self> {
        if !(ell > 0.0) || !ell.is_finite() {
            return invalid(format!("ell must be positive, got {ell}"));
        }
        if !(t_end > 0.0) || !t_end.is_finite() {
            return invalid(format!("t_end must be positive, got {t_end}"));
        }
        Ok(Self { ell, t_end, g, diffusion: None })
    }

    pub fn with_diffusion(mut self, d: BoundarySignal) -> Self {
        self.diffusion = Some(d);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverTag {
    Picard,
    Collocation,
    Marching,
    VarCoeff,
}

/// Boundary data of the two half-line problems.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionResult {
    pub a: BoundarySignal,
    pub b: BoundarySignal,
    pub certificate: Certificate,
    pub solver_tag: SolverTag,
    /// L2 norms of successive Picard increments (empty for collocation).
    pub iteration_log: Vec<f64>,
    /// Largest disagreement on each overlap, for marching runs.
    pub window_mismatch: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Transforms and formula evaluation

/// `a~(k^2, t) = int_0^t exp(k^2 z) a(z) dz`, exact for every representation.
pub fn tilde_transform(a: &BoundarySignal, k2: Complex64, t: f64, tol: f64) -> Result<Complex64> {
    if !(tol > 0.0) {
        return invalid(format!("tolerance must be positive, got {tol}"));
    }
    a.exp_moment(k2, t)
}

/// Nodes on the rays `arg k = 7pi/8` (incoming) and `pi/8` (outgoing).
#[derive(Debug, Clone)]
pub struct HeatContour {
    nodes: Vec<Node>,
}

impl HeatContour {
    pub fn new(rule: &QuadratureRule) -> Result<Self> {
        rule.validate()?;
        let r = rule.truncation_radius;
        let path = ContourPath::new(
            vec![
                Piece::new(Segment::Ray { angle: 7.0 * PI / 8.0, radius: r, grading: Grading::Quadratic }, true, true),
                Piece::new(Segment::Ray { angle: PI / 8.0, radius: r, grading: Grading::Quadratic }, false, true),
            ],
            r,
        )?;
        Ok(Self { nodes: path.nodes(rule.panels_per_piece, rule.nodes_per_panel) })
    }
}

/// Everything about one datum at one time level that does not depend on `x`.
struct Slice<'a> {
    signal: &'a BoundarySignal,
    t: f64,
    body: SliceBody,
}

enum SliceBody {
    Zero,
    Segments { s: Vec<f64>, beta: Vec<(f64, f64)> },
    Contour { alpha: [f64; 3], remainder: Vec<Complex64>, full: Option<Vec<Complex64>> },
}

impl<'a> Slice<'a> {
    fn new(signal: &'a BoundarySignal, t: f64, contour: &HeatContour, keep_full: bool) -> Result<Self> {
        if t <= 0.0 || signal.is_zero() {
            return Ok(Self { signal, t, body: SliceBody::Zero });
        }
        if let Representation::Samples { grid, values } = signal.representation() {
            return Ok(Self { signal, t, body: segments_body(grid, values, t) });
        }
        let jet = signal.jet(t).expect("smooth representation");
        let alpha = [jet[0], -jet[1], 0.5 * jet[2]];
        let mut remainder = Vec::with_capacity(contour.nodes.len());
        let mut full = keep_full.then(|| Vec::with_capacity(contour.nodes.len()));
        for n in &contour.nodes {
            let k2 = n.k * n.k;
            let f = signal.damped_moment(k2, t)?;
            let p = psi3(k2 * t);
            let model = alpha[0] * t * p[0] + alpha[1] * t * t * p[1] + alpha[2] * t * t * t * p[2];
            let wk = n.weight * n.k;
            remainder.push(wk * (f - model));
            if let Some(v) = full.as_mut() {
                v.push(wk * f);
            }
        }
        Ok(Self { signal, t, body: SliceBody::Contour { alpha, remainder, full } })
    }

    /// Half-line solution `v(x, t)` with Dirichlet datum `signal`.
    fn v_at(&self, x: f64, contour: &HeatContour) -> Result<f64> {
        match &self.body {
            SliceBody::Zero => Ok(0.0),
            SliceBody::Segments { s, beta } => Ok(segments_value(s, beta, x)),
            SliceBody::Contour { alpha, remainder, .. } => {
                let sum = spectral_sum(&contour.nodes, remainder, x);
                let val = sum / (I * PI);
                check_real(val)?;
                let t = self.t;
                let h = tail_moments(x / (2.0 * t.sqrt()));
                let add = FRAC_2_SQRT_PI * (alpha[0] * h[0] + alpha[1] * t * h[1] + alpha[2] * t * t * h[2]);
                Ok(val.re + add)
            }
        }
    }

    /// The part of the interval formula left after `v(x) - v(2l - x)`.
    fn interval_correction(&self, x: f64, ell: f64, contour: &HeatContour) -> Result<f64> {
        let full: Vec<Complex64> = match &self.body {
            SliceBody::Zero => return Ok(0.0),
            SliceBody::Contour { full: Some(f), .. } => f.clone(),
            _ => {
                let mut out = Vec::with_capacity(contour.nodes.len());
                for n in &contour.nodes {
                    out.push(n.weight * n.k * self.signal.damped_moment(n.k * n.k, self.t)?);
                }
                out
            }
        };
        let mut sum = C0;
        for (n, wf) in contour.nodes.iter().zip(&full) {
            let k = n.k;
            let den = expm1(2.0 * I * k * ell);
            if den.norm() == 0.0 {
                return Err(Error::NodeCollision(k.re));
            }
            let ratio = if k.norm() < 1e-300 { Complex64::new((ell - x) / ell, 0.0) } else { expm1(2.0 * I * k * (ell - x)) / den };
            sum += wf * (I * k * (x + 2.0 * ell)).exp() * ratio;
        }
        let val = sum / (I * PI);
        check_real(val)?;
        Ok(val.re)
    }
}

fn check_real(val: Complex64) -> Result<()> {
    if val.im.abs() > IMAG_FAIL {
        return Err(Error::Inconsistent(val.im));
    }
    debug_assert!(val.im.abs() <= IMAG_DISCARD || val.im.abs() <= IMAG_FAIL);
    Ok(())
}

fn spectral_sum(nodes: &[Node], coeff: &[Complex64], x: f64) -> Complex64 {
    let mut s = C0;
    for (n, c) in nodes.iter().zip(coeff) {
        s += c * (I * n.k * x).exp();
    }
    s
}

fn segments_body(grid: &TimeGrid, values: &[f64], t: f64) -> SliceBody {
    let nodes = grid.nodes();
    let te = t.min(grid.t_end());
    let mut s = Vec::new();
    let mut beta = Vec::new();
    // Breakpoints z_0 < ... <= te, mapped to s = t - z.
    let last = nodes.partition_point(|&z| z < te);
    let mut zs: Vec<f64> = nodes[..last].to_vec();
    let mut ys: Vec<f64> = values[..last].to_vec();
    if zs.last().is_none_or(|&z| z < te) {
        zs.push(te);
        ys.push(interp(nodes, values, te));
    }
    s.extend(zs.iter().map(|z| t - z));
    for j in 0..zs.len() - 1 {
        let h = zs[j + 1] - zs[j];
        let b1 = -(ys[j + 1] - ys[j]) / h;
        let b0 = ys[j] - b1 * s[j];
        beta.push((b0, b1));
    }
    SliceBody::Segments { s, beta }
}

fn interp(nodes: &[f64], values: &[f64], t: f64) -> f64 {
    let n = nodes.len();
    if t >= nodes[n - 1] {
        return values[n - 1];
    }
    let j = nodes.partition_point(|&z| z <= t).max(1) - 1;
    let u = (t - nodes[j]) / (nodes[j + 1] - nodes[j]);
    values[j] + u * (values[j + 1] - values[j])
}

/// `int_0^S G(x, s) s^m ds` for `m = 0, 1`, with `G` the Dirichlet kernel.
fn kernel_moments(x: f64, s: f64) -> [f64; 2] {
    if s <= 0.0 {
        return [0.0, 0.0];
    }
    let eta = x / (2.0 * s.sqrt());
    if eta > 27.0 {
        return [0.0, 0.0];
    }
    let h = tail_moments(eta);
    [erfc(eta), s * FRAC_2_SQRT_PI * h[1]]
}

fn segments_value(s: &[f64], beta: &[(f64, f64)], x: f64) -> f64 {
    let mut prev = kernel_moments(x, s[0]);
    let mut sum = 0.0;
    for (j, &(b0, b1)) in beta.iter().enumerate() {
        let cur = kernel_moments(x, s[j + 1]);
        // s decreases along the segments: the segment covers [s_{j+1}, s_j].
        sum += b0 * (prev[0] - cur[0]) + b1 * (prev[1] - cur[1]);
        prev = cur;
    }
    sum
}

/// `v(x, t) = (1 / i pi) int_{dD} exp(i k x - k^2 t) k a~(k^2, t) dk`.
pub fn evaluate_v(a: &BoundarySignal, x: f64, t: f64, rule: &QuadratureRule) -> Result<f64> {
    if !(x >= 0.0) {
        return invalid(format!("x must be nonnegative, got {x}"));
    }
    if t < 0.0 {
        return invalid(format!("t must be nonnegative, got {t}"));
    }
    let contour = HeatContour::new(rule)?;
    Slice::new(a, t, &contour, false)?.v_at(x, &contour)
}

/// Negative half-line solution on `x <= l`: `w(x, t) = v[b](l - x, t)`.
pub fn evaluate_w(b: &BoundarySignal, x: f64, t: f64, ell: f64, rule: &QuadratureRule) -> Result<f64> {
    if x > ell {
        return invalid(format!("x = {x} exceeds ell = {ell}"));
    }
    evaluate_v(b, ell - x, t, rule)
}

/// Finite-interval solution with `q(0, t) = g`, `q(l, t) = 0`, zero initial data.
pub fn evaluate_q_reference(g: &BoundarySignal, x: f64, t: f64, ell: f64, rule: &QuadratureRule) -> Result<f64> {
    if !(0.0..=ell).contains(&x) {
        return invalid(format!("x = {x} outside [0, {ell}]"));
    }
    let contour = HeatContour::new(rule)?;
    let slice = Slice::new(g, t, &contour, true)?;
    q_from_slice(&slice, x, ell, &contour)
}

fn q_from_slice(slice: &Slice, x: f64, ell: f64, contour: &HeatContour) -> Result<f64> {
    let direct = slice.v_at(x, contour)? - slice.v_at(2.0 * ell - x, contour)?;
    Ok(direct + slice.interval_correction(x, ell, contour)?)
}

/// `b(t) = -v[a](l, t)` on `grid`.
pub fn recover_b(a: &BoundarySignal, ell: f64, grid: &TimeGrid, rule: &QuadratureRule) -> Result<BoundarySignal> {
    let contour = HeatContour::new(rule)?;
    let vals: Vec<Result<f64>> = crate::par_map(grid.nodes(), |&t| Ok(-Slice::new(a, t, &contour, false)?.v_at(ell, &contour)?));
    let vals = vals.into_iter().collect::<Result<Vec<f64>>>()?;
    BoundarySignal::samples(grid.clone(), vals)
}

/// `b` from both the literal `dD` integral at `x = l` and `-v[a](l, .)`,
/// with the largest disagreement between the two.
pub fn recover_b_checked(a: &BoundarySignal, ell: f64, grid: &TimeGrid, rule: &QuadratureRule) -> Result<(BoundarySignal, f64)> {
    let b = recover_b(a, ell, grid, rule)?;
    let tol = 1e-12;
    let path = make_contour(ContourKind::BoundaryD, dp_truncation_radius(ell, tol))?;
    let lit = rule.with_radius(path.truncation_radius()).with_tolerance(1e-6);
    let direct: Vec<Result<f64>> = crate::par_map(grid.nodes(), |&t| {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let f = |k: Complex64| -> Complex64 {
            match a.damped_moment(k * k, t) {
                Ok(m) => (I * k * ell).exp() * k * m,
                Err(_) => Complex64::new(f64::NAN, 0.0),
            }
        };
        let out = integrate_adaptive(&path, &lit, tol, f)?;
        let val = -out.value / (I * PI);
        check_real(val)?;
        Ok(val.re)
    });
    let direct = direct.into_iter().collect::<Result<Vec<f64>>>()?;
    let mismatch = direct.iter().zip(b.sampled(grid)).fold(0.0f64, |m, (d, v)| m.max((d - v).abs()));
    Ok((b, mismatch))
}

// ---------------------------------------------------------------------------
// Certificates

/// `sqrt(pi) e^{3/2} / (2 3^{5/4})`: the largest admissible `T / l^2`.
pub fn heat_threshold_ratio() -> f64 {
    PI.sqrt() * 1.5f64.exp() / (2.0 * 3f64.powf(1.25))
}

/// `kappa = 18 sqrt(3) T^2 / (pi e^3 l^4)`, admissible when `kappa <= 1/2`.
pub fn contraction_check_heat(ell: f64, t_end: f64) -> Certificate {
    let kappa = 18.0 * 3f64.sqrt() * t_end * t_end / (PI * 3f64.exp() * ell.powi(4));
    Certificate::new(kappa, 0.5)
}

/// Horizon at which the heat certificate is exactly on the threshold.
pub fn admissible_horizon(ell: f64) -> f64 {
    heat_threshold_ratio() * ell * ell
}

// ---------------------------------------------------------------------------
// Volterra machinery on a time grid

/// Kernel values `c K(D_i - D_j) d_j` on a grid, with product-trapezoid weights.
struct Volterra {
    nodes: Vec<f64>,
    c: f64,
    kernel: KernelStore,
}

enum KernelStore {
    /// `K((i - j) h)`.
    Toeplitz(Vec<f64>),
    /// Row-major lower triangle including the factor `d_j`.
    Dense(Vec<f64>),
}

impl Volterra {
    fn constant(ell: f64, grid: &TimeGrid) -> Result<Self> {
        let table = SelfConvTable::new(LambdaKernel::new(ell)?);
        let nodes = grid.nodes().to_vec();
        let n = nodes.len();
        let kernel = if let Some(h) = grid.spacing() {
            let taus: Vec<f64> = (0..n).map(|m| m as f64 * h).collect();
            KernelStore::Toeplitz(table.many(&taus)?)
        } else {
            let taus: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| nodes[i] - nodes[j]).collect();
            KernelStore::Dense(table.many(&taus)?)
        };
        Ok(Self { nodes, c: ell * ell / (4.0 * PI), kernel })
    }

    fn variable(ell: f64, grid: &TimeGrid, big_d: &[f64], d: &[f64]) -> Result<Self> {
        let table = SelfConvTable::new(LambdaKernel::new(ell)?);
        let nodes = grid.nodes().to_vec();
        let n = nodes.len();
        let taus: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| big_d[i] - big_d[j]).collect();
        let mut k = table.many(&taus)?;
        for i in 0..n {
            for j in 0..n {
                k[i * n + j] *= d[j];
            }
        }
        Ok(Self { nodes, c: ell * ell / (4.0 * PI), kernel: KernelStore::Dense(k) })
    }

    #[inline]
    fn k(&self, i: usize, j: usize) -> f64 {
        match &self.kernel {
            KernelStore::Toeplitz(v) => v[i - j],
            KernelStore::Dense(v) => v[i * self.nodes.len() + j],
        }
    }

    /// Trapezoid weight of node `j` in `int_0^{t_i}`.
    #[inline]
    fn weight(&self, i: usize, j: usize) -> f64 {
        let t = &self.nodes;
        if i == 0 {
            return 0.0;
        }
        if j == 0 {
            0.5 * (t[1] - t[0])
        } else if j == i {
            0.5 * (t[i] - t[i - 1])
        } else {
            0.5 * (t[j + 1] - t[j - 1])
        }
    }

    /// `c sum_{j in range} w_ij K_ij a_j` for `i` in `rows`.
    fn apply(&self, a: &[f64], cols: std::ops::Range<usize>, i: usize) -> f64 {
        let s = (cols.start..=i.min(cols.end - 1)).fold(0.0, |s, j| s + self.weight(i, j) * self.k(i, j) * a[j]);
        self.c * s
    }

    /// Picard iteration on nodes `lo..hi` with fixed values below `lo`.
    fn picard(&self, g: &[f64], a: &mut [f64], lo: usize, hi: usize, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let forcing: Vec<f64> = (lo..hi).map(|i| g[i] + if lo > 0 { self.apply(a, 0..lo, i) } else { 0.0 }).collect();
        let window = TimeGrid::from_nodes(self.nodes[lo..hi].iter().map(|t| t - self.nodes[lo]).collect());
        let mut log = Vec::new();
        for _ in 0..max_iter {
            let next: Vec<f64> = (lo..hi).map(|i| forcing[i - lo] + self.apply(a, lo..hi, i)).collect();
            let diff: Vec<f64> = next.iter().zip(&a[lo..hi]).map(|(x, y)| x - y).collect();
            let r = match &window {
                Ok(w) => l2_norm_values(&diff, w),
                Err(_) => diff.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            };
            a[lo..hi].copy_from_slice(&next);
            log.push(r);
            if r <= tol {
                return Ok(log);
            }
        }
        let last = log.last().copied().unwrap_or(f64::NAN);
        Err(Error::MaxIterations { max_iter, last, log })
    }

    /// One application of the map to `a` on the whole grid.
    fn map(&self, g: &[f64], a: &[f64]) -> Vec<f64> {
        let n = self.nodes.len();
        (0..n).map(|i| g[i] + self.apply(a, 0..n, i)).collect()
    }
}

/// Applies the integral-equation map `a -> g + (l^2/4pi) int K a` on `grid`.
pub fn phi_heat(sc: &HeatScenario, a: &BoundarySignal, grid: &TimeGrid) -> Result<BoundarySignal> {
    let vol = Volterra::constant(sc.ell, grid)?;
    BoundarySignal::samples(grid.clone(), vol.map(&sc.g.sampled(grid), &a.sampled(grid)))
}

fn refuse(cert: Certificate, hint: &'static str) -> Error {
    Error::NotAdmissible { kappa: cert.contraction_factor, threshold: cert.threshold, hint }
}

/// Picard iteration `a_{n+1} = g + (l^2/4pi) int K a_n` from `a_0 = g`.
pub fn picard_solve(sc: &HeatScenario, grid: &TimeGrid, tol: f64, max_iter: usize) -> Result<ReductionResult> {
    picard_with_rule(sc, grid, tol, max_iter, &QuadratureRule::default())
}

pub fn picard_with_rule(sc: &HeatScenario, grid: &TimeGrid, tol: f64, max_iter: usize, rule: &QuadratureRule) -> Result<ReductionResult> {
    if !(tol > 0.0) {
        return invalid(format!("tolerance must be positive, got {tol}"));
    }
    let cert = contraction_check_heat(sc.ell, grid.t_end());
    if !cert.admissible {
        return Err(refuse(cert, "the horizon is too long for a single Picard solve; use marching_solve"));
    }
    let g = sc.g.sampled(grid);
    let mut a = g.clone();
    let vol = Volterra::constant(sc.ell, grid)?;
    let log = vol.picard(&g, &mut a, 0, grid.n_nodes(), tol, max_iter)?;
    let a = BoundarySignal::samples(grid.clone(), a)?;
    let b = recover_b(&a, sc.ell, grid, rule)?;
    Ok(ReductionResult { a, b, certificate: cert, solver_tag: SolverTag::Picard, iteration_log: log, window_mismatch: vec![] })
}

/// Solves on overlapping windows of admissible length `T_0`, each shifted by
/// `T_0 / 2`; values from earlier windows are kept on overlaps.
pub fn marching_solve(sc: &HeatScenario, grid: &TimeGrid, tol: f64, max_iter: usize) -> Result<ReductionResult> {
    marching_with_rule(sc, grid, tol, max_iter, &QuadratureRule::default())
}

pub fn marching_with_rule(sc: &HeatScenario, grid: &TimeGrid, tol: f64, max_iter: usize, rule: &QuadratureRule) -> Result<ReductionResult> {
    let t0 = admissible_horizon(sc.ell);
    if grid.t_end() <= t0 {
        let mut res = picard_with_rule(sc, grid, tol, max_iter, rule)?;
        res.solver_tag = SolverTag::Marching;
        return Ok(res);
    }
    let nodes = grid.nodes();
    let n = nodes.len();
    let last_at_or_below = |t: f64| nodes.partition_point(|&z| z <= t * (1.0 + 1e-14)) - 1;
    let vol = Volterra::constant(sc.ell, grid)?;
    let g = sc.g.sampled(grid);
    let mut glued = g.clone();
    let mut log = Vec::new();
    let mut mismatch = Vec::new();
    let inner_tol = tol * 1e-2;
    let mut start = 0usize;
    let mut covered = 0usize;
    loop {
        let end = last_at_or_below(nodes[start] + t0);
        if end <= start {
            return invalid("time grid too coarse for the admissible window length");
        }
        let mut work = glued.clone();
        log.extend(vol.picard(&g, &mut work, start, end + 1, inner_tol, max_iter)?);
        if start > 0 {
            let m = (start..=covered).fold(0.0f64, |m, i| m.max((work[i] - glued[i]).abs()));
            if m > 10.0 * tol {
                return Err(Error::OverlapMismatch { mismatch: m, limit: 10.0 * tol });
            }
            mismatch.push(m);
        }
        glued[covered + 1..=end].copy_from_slice(&work[covered + 1..=end]);
        if start == 0 {
            glued[..=end].copy_from_slice(&work[..=end]);
        }
        covered = end;
        if covered == n - 1 {
            break;
        }
        let next = last_at_or_below(nodes[start] + 0.5 * t0).max(start + 1);
        start = next.min(covered);
    }
    let cert = contraction_check_heat(sc.ell, grid.t_end());
    let a = BoundarySignal::samples(grid.clone(), glued)?;
    let b = recover_b(&a, sc.ell, grid, rule)?;
    Ok(ReductionResult { a, b, certificate: cert, solver_tag: SolverTag::Marching, iteration_log: log, window_mismatch: mismatch })
}

/// `D(t_i) = int_0^{t_i} d` by cumulative Simpson on a uniform grid.
pub fn cumulative_simpson(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * h * (values[0] + values[1]);
        return out;
    }
    out[1] = h * (5.0 * values[0] + 8.0 * values[1] - values[2]) / 12.0;
    for i in 1..n - 1 {
        out[i + 1] = out[i - 1] + h * (values[i - 1] + 4.0 * values[i] + values[i + 1]) / 3.0;
    }
    out
}

/// Contraction factor scaled by `||d||_inf^2`.
pub fn contraction_check_varcoeff(ell: f64, t_end: f64, d_sup: f64) -> Certificate {
    let base = contraction_check_heat(ell, t_end);
    Certificate::new(base.contraction_factor * d_sup * d_sup, 0.5)
}

/// Picard for `q_t = d(t) q_xx`: `a = g + (l^2/4pi) int_0^t K(D(t) - D(r)) d(r) a(r) dr`.
pub fn varcoeff_solve(sc: &HeatScenario, grid: &TimeGrid, tol: f64, max_iter: usize) -> Result<ReductionResult> {
    varcoeff_with_rule(sc, grid, tol, max_iter, &QuadratureRule::default())
}

pub fn varcoeff_with_rule(sc: &HeatScenario, grid: &TimeGrid, tol: f64, max_iter: usize, rule: &QuadratureRule) -> Result<ReductionResult> {
    let Some(diff) = &sc.diffusion else {
        return invalid("variable-coefficient solve needs a diffusion coefficient");
    };
    let Some(h) = grid.spacing() else {
        return invalid("variable-coefficient solve needs a uniform time grid");
    };
    let d = diff.sampled(grid);
    let d_min = d.iter().copied().fold(f64::INFINITY, f64::min);
    if !(d_min > 0.0) {
        return invalid(format!("diffusion coefficient must stay positive; minimum sample {d_min}"));
    }
    let d_sup = d.iter().copied().fold(0.0, f64::max);
    let cert = contraction_check_varcoeff(sc.ell, grid.t_end(), d_sup);
    if !cert.admissible {
        return Err(refuse(cert, "shorten the horizon or reduce the diffusion coefficient"));
    }
    let big_d = cumulative_simpson(&d, h);
    let vol = Volterra::variable(sc.ell, grid, &big_d, &d)?;
    let g = sc.g.sampled(grid);
    let mut a = g.clone();
    let log = vol.picard(&g, &mut a, 0, grid.n_nodes(), tol, max_iter)?;
    // In the clock s = D(t) the problem has unit diffusion.
    let warped = TimeGrid::from_nodes(big_d.clone())?;
    let a_warped = BoundarySignal::samples(warped.clone(), a.clone())?;
    let contour = HeatContour::new(rule)?;
    let b: Vec<f64> =
        big_d.iter().map(|&s| Ok(-Slice::new(&a_warped, s, &contour, false)?.v_at(sc.ell, &contour)?)).collect::<Result<_>>()?;
    let _ = warped;
    Ok(ReductionResult {
        a: BoundarySignal::samples(grid.clone(), a)?,
        b: BoundarySignal::samples(grid.clone(), b)?,
        certificate: cert,
        solver_tag: SolverTag::VarCoeff,
        iteration_log: log,
        window_mismatch: vec![],
    })
}

// ---------------------------------------------------------------------------
// Collocation

/// Multiplier applied to the integral equation beyond `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Taper {
    /// Enforce the equation on all of `(0, tau)`.
    None,
    /// Smoothly switch the equation off between `T` and `end_fraction * tau`.
    Smooth { end_fraction: f64 },
}

impl Taper {
    fn weight(&self, t: f64, t_end: f64, tau: f64) -> f64 {
        match *self {
            Taper::None => 1.0,
            Taper::Smooth { end_fraction } => {
                if t <= t_end {
                    return 1.0;
                }
                let u = (t - t_end) / (end_fraction * tau - t_end);
                if u >= 1.0 {
                    return 0.0;
                }
                let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
                f(1.0 - u) / (f(1.0 - u) + f(u))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollocationOptions {
    pub taper: Taper,
    /// Gauss-Legendre points per panel for the kernel column integrals.
    pub gl_nodes: usize,
    pub rule: QuadratureRule,
}

impl Default for CollocationOptions {
    fn default() -> Self {
        Self { taper: Taper::Smooth { end_fraction: 0.85 }, gl_nodes: 24, rule: QuadratureRule::default() }
    }
}

/// Default sine-basis support: `8 T / 3`.
pub fn default_tau_support(t_end: f64) -> f64 {
    8.0 * t_end / 3.0
}

/// `0, t_1, ..., t_M, tau` with `t_k = k tau / (M + 1)`.
pub fn uniform_collocation_nodes(m: usize, tau: f64) -> Result<TimeGrid> {
    TimeGrid::uniform(tau, m + 2)
}

/// Expands `a` and `b` in `sin(n pi t / tau)`, `n = 1..M`, and enforces the
/// integral equation at the interior nodes of `collocation_nodes`.
pub fn collocation_solve(
    sc: &HeatScenario,
    m: usize,
    tau_support: f64,
    collocation_nodes: &TimeGrid,
    opts: &CollocationOptions,
) -> Result<ReductionResult> {
    if m < 1 {
        return invalid("M must be at least 1");
    }
    if collocation_nodes.n_nodes() != m + 2 || (collocation_nodes.t_end() - tau_support).abs() > 1e-12 * tau_support {
        return invalid(format!("collocation grid must hold exactly {m} interior nodes in (0, {tau_support})"));
    }
    if tau_support < sc.t_end {
        return invalid("sine-basis support must cover the horizon");
    }
    if let Taper::Smooth { end_fraction } = opts.taper {
        if !(end_fraction * tau_support > sc.t_end && end_fraction <= 1.0) {
            return invalid("taper must end after the horizon and inside the support");
        }
    }
    let nodes = collocation_nodes.nodes();
    let tk: Vec<f64> = nodes[1..=m].to_vec();
    let chi: Vec<f64> = tk.iter().map(|&t| opts.taper.weight(t, sc.t_end, tau_support)).collect();
    let c = sc.ell * sc.ell / (4.0 * PI);
    let table = SelfConvTable::new(LambdaKernel::new(sc.ell)?);
    let gl = gauss_legendre(opts.gl_nodes);
    let rows: Vec<usize> = (0..m).collect();
    let row_data: Vec<Result<Vec<f64>>> = crate::par_map(&rows, |&k| {
        let t = tk[k];
        let mut row = vec![0.0; m];
        if chi[k] == 0.0 {
            for (n, r) in row.iter_mut().enumerate() {
                *r = ((n + 1) as f64 * PI * t / tau_support).sin();
            }
            return Ok(row);
        }
        let mut integ = vec![0.0; m];
        for j in 0..=k {
            let (lo, hi) = (nodes[j], nodes[j + 1]);
            let half = 0.5 * (hi - lo);
            for &(x, w) in gl {
                let r = lo + half * (x + 1.0);
                let kv = table.at(t - r)? * w * half;
                let th = PI * r / tau_support;
                for (n, acc) in integ.iter_mut().enumerate() {
                    *acc += kv * ((n + 1) as f64 * th).sin();
                }
            }
        }
        for n in 0..m {
            row[n] = ((n + 1) as f64 * PI * t / tau_support).sin() - chi[k] * c * integ[n];
        }
        Ok(row)
    });
    let mut a_mat = DMatrix::<f64>::zeros(m, m);
    for (k, row) in row_data.into_iter().enumerate() {
        for (n, v) in row?.into_iter().enumerate() {
            a_mat[(k, n)] = v;
        }
    }
    let rhs = DVector::from_iterator(m, tk.iter().zip(&chi).map(|(&t, &w)| w * sc.g.eval(t)));
    let coeffs = solve_checked(&a_mat, &rhs)?;
    let a = BoundarySignal::sine_series(tau_support, coeffs.iter().copied().collect())?;

    // b = -v[a](l, .) at the same nodes, fitted by an M x M sine system.
    let contour = HeatContour::new(&opts.rule)?;
    let bvals: Vec<Result<f64>> = crate::par_map(&tk, |&t| Ok(-Slice::new(&a, t, &contour, false)?.v_at(sc.ell, &contour)?));
    let bvals = bvals.into_iter().collect::<Result<Vec<f64>>>()?;
    let s_mat = DMatrix::from_fn(m, m, |k, n| ((n + 1) as f64 * PI * tk[k] / tau_support).sin());
    let brhs = DVector::from_iterator(m, bvals.iter().zip(&chi).map(|(b, w)| w * b));
    let fcoeffs = solve_checked(&s_mat, &brhs)?;
    let b = BoundarySignal::sine_series(tau_support, fcoeffs.iter().copied().collect())?;
    Ok(ReductionResult {
        a,
        b,
        certificate: contraction_check_heat(sc.ell, sc.t_end),
        solver_tag: SolverTag::Collocation,
        iteration_log: vec![],
        window_mismatch: vec![],
    })
}

fn solve_checked(mat: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = mat.clone().lu();
    let inv = lu.try_inverse().ok_or(Error::IllConditioned(f64::INFINITY))?;
    let norm1 = |m: &DMatrix<f64>| (0..m.ncols()).map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let cond = norm1(mat) * norm1(&inv);
    if !(cond <= 1e12) {
        return Err(Error::IllConditioned(cond));
    }
    mat.clone().lu().solve(rhs).ok_or(Error::IllConditioned(cond))
}

// ---------------------------------------------------------------------------
// Decomposition residual

/// Fields of the interval formula, the two half-line formulas and their
/// discrepancy, with per-time L2 norms of the discrepancy.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatResidual {
    pub q: SolutionField,
    pub v: SolutionField,
    pub w: SolutionField,
    pub dc: SolutionField,
    pub norms: Vec<f64>,
}

impl HeatResidual {
    pub fn max_norm(&self) -> f64 {
        self.norms.iter().copied().fold(0.0, f64::max)
    }
}

/// `dc(x, t) = q(x, t) - v(x, t) - w(x, t)` on the grid.
pub fn residual_heat(
    sc: &HeatScenario,
    res: &ReductionResult,
    xgrid: &SpaceGrid,
    tgrid: &TimeGrid,
    rule: &QuadratureRule,
) -> Result<HeatResidual> {
    if sc.diffusion.is_some() {
        return invalid("the interval reference formula assumes unit diffusion");
    }
    if (xgrid.ell() - sc.ell).abs() > 1e-12 * sc.ell {
        return invalid("space grid length differs from the scenario");
    }
    let ell = sc.ell;
    let contour = HeatContour::new(rule)?;
    let columns: Vec<Result<Vec<[f64; 3]>>> = crate::par_map(tgrid.nodes(), |&t| {
        let gs = Slice::new(&sc.g, t, &contour, true)?;
        let as_ = Slice::new(&res.a, t, &contour, false)?;
        let bs = Slice::new(&res.b, t, &contour, false)?;
        xgrid
            .nodes()
            .iter()
            .map(|&x| Ok([q_from_slice(&gs, x, ell, &contour)?, as_.v_at(x, &contour)?, bs.v_at(ell - x, &contour)?]))
            .collect()
    });
    let columns = columns.into_iter().collect::<Result<Vec<_>>>()?;
    let (nx, nt) = (xgrid.n_nodes(), tgrid.n_nodes());
    let pick = |c: usize| -> Vec<f64> { (0..nx * nt).map(|idx| columns[idx % nt][idx / nt][c]).collect() };
    let (q, v, w) = (pick(0), pick(1), pick(2));
    let dc: Vec<f64> = (0..nx * nt).map(|i| q[i] - v[i] - w[i]).collect();
    let dc = SolutionField::new(xgrid.clone(), tgrid.clone(), dc, "heat:q-v-w")?;
    let norms = dc.l2_in_x();
    Ok(HeatResidual {
        q: SolutionField::new(xgrid.clone(), tgrid.clone(), q, "heat:q")?,
        v: SolutionField::new(xgrid.clone(), tgrid.clone(), v, "heat:v")?,
        w: SolutionField::new(xgrid.clone(), tgrid.clone(), w, "heat:w")?,
        dc,
        norms,
    })
}
