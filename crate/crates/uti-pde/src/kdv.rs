//! Linear KdV `q_t + q_x + q_xxx = 0` on `(0, l)`: half-line solution
//! formulas on the hyperbolic contours, the boundary-data map, its fixed
//! point, the kernels `J_j`, `M_j` and the contraction certificate.
//!
//! Transforms use the full horizon: `f~(k, T) = int_0^T exp(-i k s) f(s) ds`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::contours::{hyperbola_y_for_radius, make_contour_with, nu_companion, ContourKind, QuadratureRule};
use crate::domain::{l2_norm_values, BoundarySignal, Certificate, Representation, SolutionField, SpaceGrid, TimeGrid};
use crate::error::{invalid, Error, Result};
use crate::quad::gauss_legendre;
use crate::special::{C0, I};

const IMAG_FAIL: f64 = 1e-6;
/// Largest phase change allowed across one panel.
const PANEL_PHASE: f64 = 4.0;

/// Reduced interval problem with `q(0, t) = g`, `q(l, t) = q_x(l, t) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct KdvScenario {
    pub ell: f64,
    pub t_end: f64,
    pub g: BoundarySignal,
}

impl KdvScenario {
    pub fn new(ell: f64, t_end: f64, g: BoundarySignal) -> Result<Self> {
        if !(ell > 0.0) || !ell.is_finite() {
            return invalid(format!("ell must be positive, got {ell}"));
        }
        if !(t_end > 0.0) || !t_end.is_finite() {
            return invalid(format!("t_end must be positive, got {t_end}"));
        }
        if g.eval(0.0).abs() > 1e-12 {
            return invalid(format!("datum must vanish at t = 0, got g(0) = {}", g.eval(0.0)));
        }
        Ok(Self { ell, t_end, g })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdvConstants {
    pub c1: f64,
    pub c2: f64,
    pub m_bound: f64,
}

pub fn kdv_constants(ell: f64) -> KdvConstants {
    let s3 = 3f64.sqrt();
    let l2 = ell * ell;
    let l3 = l2 * ell;
    KdvConstants {
        c1: 8.0 * (l3 + 2.0 * l2 + 4.0 * ell + 24.0) / (3.0 * l2 * l2) + 1.0 / 6.0,
        c2: 8.0 * (l2 + 4.0) / (s3 * l3) + 4.0 / (3.0 * s3),
        m_bound: 32.0 * (l2 + 6.0) / (s3 * l3),
    }
}

/// `kappa(T) = (2^{5/2} (c1 + c2) / sqrt(pi)) (1 + A T + B T) T`.
pub fn contraction_check_kdv(ell: f64, t_end: f64) -> Certificate {
    Certificate::new(kdv_kappa(ell, t_end), 0.5)
}

fn kdv_kappa(ell: f64, t: f64) -> f64 {
    let k = kdv_constants(ell);
    let s3 = 3f64.sqrt();
    let p32 = PI.powf(1.5);
    let lead = 2f64.powf(2.5) * (k.c1 + k.c2) / PI.sqrt();
    let a = 2f64.sqrt() * (s3 - 1.0) / (p32 * s3);
    let b = 2f64.sqrt() * (ell * ell + 6.0) / (p32 * s3 * ell.powi(3));
    lead * (1.0 + a * t + b * t) * t
}

/// Horizon at which the KdV certificate is exactly on the threshold.
pub fn kdv_admissible_horizon(ell: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while kdv_kappa(ell, hi) < 0.5 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kdv_kappa(ell, mid) <= 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `f~(kappa, T) = int_0^T exp(-i kappa s) f(s) ds`, exact for every representation.
pub fn tilde_transform_kdv(f: &BoundarySignal, kappa: Complex64, t_end: f64, tol: f64) -> Result<Complex64> {
    if !(t_end > 0.0) {
        return invalid(format!("horizon must be positive, got {t_end}"));
    }
    if !(tol > 0.0) {
        return invalid(format!("tolerance must be positive, got {tol}"));
    }
    f.exp_moment(-I * kappa, t_end)
}

// ---------------------------------------------------------------------------
// Spectral node sets

fn omega(k: Complex64) -> Complex64 {
    k * k * k - k
}

/// Nodes of a KdV contour with panels fine enough for `exp(i (k X + omega s))`
/// with `|X| <= x_span` and `|s| <= w_span`.
struct Spectral {
    k: Vec<Complex64>,
    omega: Vec<Complex64>,
    weight: Vec<Complex64>,
    /// Truncated ends: point and length of the last panel.
    ends: Vec<(Complex64, f64)>,
}

impl Spectral {
    fn new(kind: ContourKind, rule: &QuadratureRule, radius: f64, x_span: f64, w_span: f64) -> Result<Self> {
        rule.validate()?;
        let path = make_contour_with(kind, radius, rule.oscillatory_strategy)?;
        let gl = gauss_legendre(rule.nodes_per_panel);
        let mut out = Spectral { k: vec![], omega: vec![], weight: vec![], ends: vec![] };
        let cost = |a: Complex64, b: Complex64| w_span * (omega(b) - omega(a)).norm() + x_span * (b - a).norm();
        for piece in path.pieces() {
            let seg = piece.segment;
            let p0 = rule.panels_per_piece;
            let mut stack: Vec<(f64, f64, u32)> = (0..p0).rev().map(|i| (i as f64 / p0 as f64, (i + 1) as f64 / p0 as f64, 0)).collect();
            let mut edges: Vec<(f64, f64)> = Vec::new();
            while let Some((u0, u1, depth)) = stack.pop() {
                if depth < 40 && cost(seg.point(u0).0, seg.point(u1).0) > PANEL_PHASE {
                    let m = 0.5 * (u0 + u1);
                    stack.push((m, u1, depth + 1));
                    stack.push((u0, m, depth + 1));
                } else {
                    edges.push((u0, u1));
                }
            }
            let sign = piece.orientation();
            for &(u0, u1) in &edges {
                let half = 0.5 * (u1 - u0);
                for &(x, w) in gl {
                    let (k, dk) = seg.point(u0 + half * (x + 1.0));
                    out.k.push(k);
                    out.omega.push(omega(k));
                    out.weight.push(dk * (sign * half * w));
                }
            }
            if piece.truncated {
                let &(u0, u1) = edges.last().expect("at least one panel");
                let (k1, _) = seg.point(u1);
                out.ends.push((k1, (k1 - seg.point(u0).0).norm()));
            }
        }
        Ok(out)
    }

    fn len(&self) -> usize {
        self.k.len()
    }

    /// `f~(w_j, T)` with `w_j = sign * omega_j`.
    fn transforms(&self, f: &BoundarySignal, sign: f64, horizon: f64) -> Result<Vec<Complex64>> {
        if f.is_zero() {
            return Ok(vec![C0; self.len()]);
        }
        let chunks: Vec<std::ops::Range<usize>> = (0..self.len()).step_by(512).map(|s| s..(s + 512).min(self.len())).collect();
        let parts: Vec<Result<Vec<Complex64>>> =
            crate::par_map(&chunks, |r| r.clone().map(|j| f.exp_moment(-I * sign * self.omega[j], horizon)).collect());
        let mut out = Vec::with_capacity(self.len());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }

    fn check_tail(&self, tol: f64, f: impl Fn(Complex64) -> f64) -> Result<f64> {
        let tail: f64 = self.ends.iter().map(|&(k, len)| f(k) * len).sum();
        if !(tail <= tol) {
            return Err(Error::Truncation { estimate: tail, tol });
        }
        Ok(tail)
    }
}

fn check_real(z: Complex64) -> Result<f64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFinite { re: z.re, im: z.im });
    }
    if z.im.abs() > IMAG_FAIL {
        return Err(Error::Inconsistent(z.im));
    }
    Ok(z.re)
}

/// Positive half-line solution, `v(x, t) = (1/2pi) int_{C+} e^{ikx + i omega t} (1 - 3k^2) a~(omega, T) dk`.
struct PlusField {
    sp: Spectral,
    amp: Vec<Complex64>,
}

impl PlusField {
    fn new(sp: Spectral, a: &BoundarySignal, horizon: f64) -> Result<Self> {
        let at = sp.transforms(a, 1.0, horizon)?;
        let amp = (0..sp.len()).map(|j| sp.weight[j] * (1.0 - 3.0 * sp.k[j] * sp.k[j]) * at[j] / (2.0 * PI)).collect();
        Ok(Self { sp, amp })
    }

    fn add(&mut self, a: &BoundarySignal, horizon: f64) -> Result<()> {
        let at = self.sp.transforms(a, 1.0, horizon)?;
        for (j, amp) in self.amp.iter_mut().enumerate() {
            let k = self.sp.k[j];
            *amp += self.sp.weight[j] * (1.0 - 3.0 * k * k) * at[j] / (2.0 * PI);
        }
        Ok(())
    }

    /// Integrand modulus at `k` divided by the weight, for tail estimates.
    fn density(&self, a: &BoundarySignal, horizon: f64, x_min: f64) -> impl Fn(Complex64) -> f64 + '_ {
        let a = a.clone();
        move |k: Complex64| {
            let at = a.exp_moment(-I * omega(k), horizon).map(|z| z.norm()).unwrap_or(f64::INFINITY);
            (1.0 - 3.0 * k * k).norm() * at * (-k.im * x_min).exp() / (2.0 * PI)
        }
    }

    /// `(v, v_x)` at `(x, t)`.
    fn eval(&self, x: f64, t: f64) -> Result<(f64, f64)> {
        let (mut s0, mut s1) = (C0, C0);
        for j in 0..self.sp.len() {
            let k = self.sp.k[j];
            let e = (I * (k * x + self.sp.omega[j] * t)).exp() * self.amp[j];
            s0 += e;
            s1 += I * k * e;
        }
        Ok((check_real(s0)?, check_real(s1)?))
    }
}

/// Negative half-line solution,
/// `w(x, t) = (1/2pi) int_{C-} e^{ik(l-x) - i omega t} [i(k - nu) c~(-omega, T) + (k^2 - nu^2) b~(-omega, T)] dk`.
struct MinusField {
    sp: Spectral,
    amp: Vec<Complex64>,
}

impl MinusField {
    fn new(sp: Spectral, b: &BoundarySignal, c: &BoundarySignal, horizon: f64) -> Result<Self> {
        let bt = sp.transforms(b, -1.0, horizon)?;
        let ct = sp.transforms(c, -1.0, horizon)?;
        let amp = (0..sp.len())
            .map(|j| {
                let k = sp.k[j];
                let nu = nu_companion(k);
                sp.weight[j] * (I * (k - nu) * ct[j] + (k * k - nu * nu) * bt[j]) / (2.0 * PI)
            })
            .collect();
        Ok(Self { sp, amp })
    }

    fn density(b: &BoundarySignal, c: &BoundarySignal, horizon: f64, x_min: f64) -> impl Fn(Complex64) -> f64 {
        let (b, c) = (b.clone(), c.clone());
        move |k: Complex64| {
            let nu = nu_companion(k);
            let w = omega(k);
            let bt = b.exp_moment(I * w, horizon).unwrap_or(Complex64::new(f64::INFINITY, 0.0));
            let ct = c.exp_moment(I * w, horizon).unwrap_or(Complex64::new(f64::INFINITY, 0.0));
            (I * (k - nu) * ct + (k * k - nu * nu) * bt).norm() * (-k.im * x_min).exp() / (2.0 * PI)
        }
    }

    /// `(w, w_x)` at `(x, t)`.
    fn eval(&self, x: f64, t: f64, ell: f64) -> Result<(f64, f64)> {
        let (mut s0, mut s1) = (C0, C0);
        let xr = ell - x;
        for j in 0..self.sp.len() {
            let k = self.sp.k[j];
            let e = (I * (k * xr - self.sp.omega[j] * t)).exp() * self.amp[j];
            s0 += e;
            s1 -= I * k * e;
        }
        Ok((check_real(s0)?, check_real(s1)?))
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return invalid(format!("horizon must be positive, got {horizon}"));
    }
    Ok(())
}

/// `(v, v_x)` of the positive half-line problem with Dirichlet datum `a` on `[0, horizon]`.
pub fn evaluate_v_kdv(a: &BoundarySignal, x: f64, t: f64, horizon: f64, rule: &QuadratureRule) -> Result<(f64, f64)> {
    check_horizon(horizon)?;
    if !(x >= 0.0) {
        return invalid(format!("x must be nonnegative, got {x}"));
    }
    if a.is_zero() {
        return Ok((0.0, 0.0));
    }
    let sp = Spectral::new(ContourKind::KdvCPlus, rule, rule.truncation_radius, x, horizon.max(t.abs()))?;
    let field = PlusField::new(sp, a, horizon)?;
    field.sp.check_tail(rule.tail_tolerance, field.density(a, horizon, x))?;
    field.eval(x, t)
}

/// Negative half-line solution with Dirichlet datum `b` and Neumann datum `c` at `x = l`.
pub fn evaluate_w_kdv(
    b: &BoundarySignal,
    c: &BoundarySignal,
    x: f64,
    t: f64,
    ell: f64,
    horizon: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    Ok(evaluate_w_kdv_with_dx(b, c, x, t, ell, horizon, rule)?.0)
}

/// `(w, w_x)`; see [`evaluate_w_kdv`].
pub fn evaluate_w_kdv_with_dx(
    b: &BoundarySignal,
    c: &BoundarySignal,
    x: f64,
    t: f64,
    ell: f64,
    horizon: f64,
    rule: &QuadratureRule,
) -> Result<(f64, f64)> {
    check_horizon(horizon)?;
    if x > ell {
        return invalid(format!("x = {x} exceeds ell = {ell}"));
    }
    if b.is_zero() && c.is_zero() {
        return Ok((0.0, 0.0));
    }
    let sp = Spectral::new(ContourKind::KdvCMinus, rule, rule.truncation_radius, ell - x, horizon.max(t.abs()))?;
    sp.check_tail(rule.tail_tolerance, MinusField::density(b, c, horizon, ell - x))?;
    MinusField::new(sp, b, c, horizon)?.eval(x, t, ell)
}

// ---------------------------------------------------------------------------
// Boundary-data map and fixed point

/// Node sets and the datum's own contribution, shared by every application of the map.
struct MapWorkspace {
    plus: Spectral,
    minus: Spectral,
    horizon: f64,
    ell: f64,
}

impl MapWorkspace {
    fn new(ell: f64, horizon: f64, rule: &QuadratureRule) -> Result<Self> {
        Ok(Self {
            plus: Spectral::new(ContourKind::KdvCPlus, rule, rule.truncation_radius, ell, horizon)?,
            minus: Spectral::new(ContourKind::KdvCMinus, rule, rule.truncation_radius, ell, horizon)?,
            horizon,
            ell,
        })
    }

    /// `b = -v[a](l, .)`, `c = -v_x[a](l, .)` on `grid`.
    fn traces(&self, a: &BoundarySignal, grid: &TimeGrid) -> Result<(Vec<f64>, Vec<f64>)> {
        let field = PlusField::new(self.plus_clone(), a, self.horizon)?;
        let vals: Vec<Result<(f64, f64)>> = crate::par_map(grid.nodes(), |&t| field.eval(self.ell, t));
        let mut b = Vec::with_capacity(vals.len());
        let mut c = Vec::with_capacity(vals.len());
        for v in vals {
            let (v, vx) = v?;
            b.push(-v);
            c.push(-vx);
        }
        Ok((b, c))
    }

    /// `w[b, c](0, .)` on `grid`.
    fn left_trace(&self, b: &BoundarySignal, c: &BoundarySignal, grid: &TimeGrid) -> Result<Vec<f64>> {
        let field = MinusField::new(self.minus_clone(), b, c, self.horizon)?;
        let vals: Vec<Result<(f64, f64)>> = crate::par_map(grid.nodes(), |&t| field.eval(0.0, t, self.ell));
        vals.into_iter().map(|v| v.map(|p| p.0)).collect()
    }

    fn plus_clone(&self) -> Spectral {
        Spectral { k: self.plus.k.clone(), omega: self.plus.omega.clone(), weight: self.plus.weight.clone(), ends: self.plus.ends.clone() }
    }

    fn minus_clone(&self) -> Spectral {
        Spectral {
            k: self.minus.k.clone(),
            omega: self.minus.omega.clone(),
            weight: self.minus.weight.clone(),
            ends: self.minus.ends.clone(),
        }
    }
}

/// `Phi_g[a](t) = g(t) + w[b, c](0, t)` with `b = -v[a](l, .)`, `c = -v_x[a](l, .)`, on `grid`.
pub fn phi_kdv(g: &BoundarySignal, a: &BoundarySignal, sc: &KdvScenario, grid: &TimeGrid, rule: &QuadratureRule) -> Result<BoundarySignal> {
    let ws = MapWorkspace::new(sc.ell, sc.t_end, rule)?;
    let (b, c) = ws.traces(a, grid)?;
    let b = BoundarySignal::samples(grid.clone(), b)?;
    let c = BoundarySignal::samples(grid.clone(), c)?;
    let w0 = ws.left_trace(&b, &c, grid)?;
    let vals = g.sampled(grid).iter().zip(w0).map(|(g, w)| g + w).collect();
    BoundarySignal::samples(grid.clone(), vals)
}

/// Boundary data of the decomposition `q = v + w`.
#[derive(Debug, Clone, PartialEq)]
pub struct KdvSolution {
    pub a: BoundarySignal,
    pub b: BoundarySignal,
    pub c: BoundarySignal,
    pub certificate: Certificate,
    /// L2 norms of successive Picard increments.
    pub log: Vec<f64>,
}

/// Picard iteration `a_{n+1} = Phi_g[a_n]` from `a_0 = g`.
///
/// Iterates are kept as `g + delta_n` with `delta_n` sampled on `grid`, so the
/// datum itself is always transformed exactly.
pub fn fixed_point_kdv(sc: &KdvScenario, grid: &TimeGrid, tol: f64, max_iter: usize) -> Result<KdvSolution> {
    fixed_point_kdv_with_rule(sc, grid, tol, max_iter, &QuadratureRule::default())
}

pub fn fixed_point_kdv_with_rule(
    sc: &KdvScenario,
    grid: &TimeGrid,
    tol: f64,
    max_iter: usize,
    rule: &QuadratureRule,
) -> Result<KdvSolution> {
    if !(tol > 0.0) {
        return invalid(format!("tolerance must be positive, got {tol}"));
    }
    if (grid.t_end() - sc.t_end).abs() > 1e-12 * sc.t_end {
        return invalid("time grid must end at the scenario horizon");
    }
    let cert = contraction_check_kdv(sc.ell, sc.t_end);
    if !cert.admissible {
        return Err(Error::NotAdmissible {
            kappa: cert.contraction_factor,
            threshold: cert.threshold,
            hint: "shorten the horizon; the KdV map has no marching variant",
        });
    }
    let ws = MapWorkspace::new(sc.ell, sc.t_end, rule)?;
    let g = sc.g.sampled(grid);
    let (bg, cg) = ws.traces(&sc.g, grid)?;
    let mut delta = vec![0.0; grid.n_nodes()];
    let mut log = Vec::new();
    let traces_of = |delta: &[f64]| -> Result<(BoundarySignal, BoundarySignal)> {
        let d = BoundarySignal::samples(grid.clone(), delta.to_vec())?;
        let (bd, cd) = ws.traces(&d, grid)?;
        let b = bg.iter().zip(&bd).map(|(x, y)| x + y).collect();
        let c = cg.iter().zip(&cd).map(|(x, y)| x + y).collect();
        Ok((BoundarySignal::samples(grid.clone(), b)?, BoundarySignal::samples(grid.clone(), c)?))
    };
    loop {
        let (b, c) = traces_of(&delta)?;
        let next = ws.left_trace(&b, &c, grid)?;
        let diff: Vec<f64> = next.iter().zip(&delta).map(|(x, y)| x - y).collect();
        let r = l2_norm_values(&diff, grid);
        delta = next;
        log.push(r);
        if r <= tol {
            break;
        }
        if log.len() >= max_iter {
            return Err(Error::MaxIterations { max_iter, last: r, log });
        }
    }
    let (b, c) = traces_of(&delta)?;
    let a = g.iter().zip(&delta).map(|(x, y)| x + y).collect();
    Ok(KdvSolution { a: BoundarySignal::samples(grid.clone(), a)?, b, c, certificate: cert, log })
}

/// Splits a sampled `a` into the scenario datum plus a sampled correction.
fn split_datum(a: &BoundarySignal, g: &BoundarySignal) -> Result<(BoundarySignal, Option<BoundarySignal>)> {
    match a.representation() {
        Representation::Samples { grid, values } => {
            let delta: Vec<f64> = values.iter().zip(g.sampled(grid)).map(|(a, g)| a - g).collect();
            Ok((g.clone(), Some(BoundarySignal::samples(grid.clone(), delta)?)))
        }
        _ => Ok((a.clone(), None)),
    }
}

/// Fields `v`, `w`, `u = v + w` on the interval grid and the boundary defects
/// `r0 = u(0, t) - g(t)`, `r1 = u(l, t)`, `r2 = u_x(l, t)` on the time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KdvResidual {
    pub v: SolutionField,
    pub w: SolutionField,
    pub u: SolutionField,
    pub r0: Vec<f64>,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
}

impl KdvResidual {
    /// `[max |r0|, max |r1|, max |r2|]`.
    pub fn max_defects(&self) -> [f64; 3] {
        let m = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        [m(&self.r0), m(&self.r1), m(&self.r2)]
    }

    /// Per-time `max(|r0|, |r1|, |r2|)`.
    pub fn norms(&self) -> Vec<f64> {
        (0..self.r0.len()).map(|i| self.r0[i].abs().max(self.r1[i].abs()).max(self.r2[i].abs())).collect()
    }
}

pub fn residual_kdv(
    sc: &KdvScenario,
    sol: &KdvSolution,
    xgrid: &SpaceGrid,
    tgrid: &TimeGrid,
    rule: &QuadratureRule,
) -> Result<KdvResidual> {
    if (xgrid.ell() - sc.ell).abs() > 1e-12 * sc.ell {
        return invalid("space grid length differs from the scenario");
    }
    let (ell, horizon) = (sc.ell, sc.t_end);
    let (smooth, delta) = split_datum(&sol.a, &sc.g)?;
    let plus = Spectral::new(ContourKind::KdvCPlus, rule, rule.truncation_radius, ell, horizon)?;
    let mut vf = PlusField::new(plus, &smooth, horizon)?;
    vf.sp.check_tail(rule.tail_tolerance, vf.density(&smooth, horizon, 0.0))?;
    if let Some(d) = &delta {
        vf.add(d, horizon)?;
    }
    let minus = Spectral::new(ContourKind::KdvCMinus, rule, rule.truncation_radius, ell, horizon)?;
    minus.check_tail(rule.tail_tolerance, MinusField::density(&sol.b, &sol.c, horizon, 0.0))?;
    let wf = MinusField::new(minus, &sol.b, &sol.c, horizon)?;
    type Column = (Vec<(f64, f64)>, [f64; 3]);
    let cols: Vec<Result<Column>> = crate::par_map(tgrid.nodes(), |&t| {
        let vals = xgrid.nodes().iter().map(|&x| Ok((vf.eval(x, t)?.0, wf.eval(x, t, ell)?.0))).collect::<Result<Vec<_>>>()?;
        let (v0, w0) = (vf.eval(0.0, t)?, wf.eval(0.0, t, ell)?);
        let (vl, wl) = (vf.eval(ell, t)?, wf.eval(ell, t, ell)?);
        Ok((vals, [v0.0 + w0.0 - sc.g.eval(t), vl.0 + wl.0, vl.1 + wl.1]))
    });
    let cols = cols.into_iter().collect::<Result<Vec<_>>>()?;
    let (nx, nt) = (xgrid.n_nodes(), tgrid.n_nodes());
    let pick = |f: &dyn Fn((f64, f64)) -> f64| -> Vec<f64> { (0..nx * nt).map(|i| f(cols[i % nt].0[i / nt])).collect() };
    let v = pick(&|p| p.0);
    let w = pick(&|p| p.1);
    let u = pick(&|p| p.0 + p.1);
    Ok(KdvResidual {
        v: SolutionField::new(xgrid.clone(), tgrid.clone(), v, "kdv:v")?,
        w: SolutionField::new(xgrid.clone(), tgrid.clone(), w, "kdv:w")?,
        u: SolutionField::new(xgrid.clone(), tgrid.clone(), u, "kdv:v+w")?,
        r0: cols.iter().map(|c| c.1[0]).collect(),
        r1: cols.iter().map(|c| c.1[1]).collect(),
        r2: cols.iter().map(|c| c.1[2]).collect(),
    })
}

// ---------------------------------------------------------------------------
// Kernels

/// Hyperbola extent `Y` with `Y^3 exp(-l Y) < tol / 10`, as a radius in `k`.
fn kernel_radius(ell: f64, tol: f64) -> f64 {
    let mut y = 1.0f64;
    while y.powi(3) * (-ell * y).exp() >= tol / 10.0 || y < 3.0 / ell {
        y += 0.25;
    }
    (y * y + (y * y + 1.0) / 3.0).sqrt()
}

fn check_order(j: u32) -> Result<()> {
    if j == 1 || j == 2 {
        Ok(())
    } else {
        invalid(format!("kernel index must be 1 or 2, got {j}"))
    }
}

/// `[J_1(sigma), J_2(sigma)]`, `J_j = int_{C+} e^{i k l + i omega sigma} k^{2-j} (1 - 3k^2) dk`.
pub fn kernel_j_pair(sigma: f64, ell: f64, rule: &QuadratureRule) -> Result<[Complex64; 2]> {
    if !(ell > 0.0) {
        return invalid(format!("ell must be positive, got {ell}"));
    }
    let r = kernel_radius(ell, rule.tail_tolerance);
    let sp = Spectral::new(ContourKind::KdvCPlus, rule, r, ell, sigma.abs())?;
    let mut s = [C0; 2];
    for j in 0..sp.len() {
        let k = sp.k[j];
        let e = (I * (k * ell + sp.omega[j] * sigma)).exp() * (1.0 - 3.0 * k * k) * sp.weight[j];
        s[0] += e * k;
        s[1] += e;
    }
    Ok(s)
}

/// `[M_1(sigma), M_2(sigma)]`, `M_j = int_{C_L u C_R} e^{i k l - i omega sigma} (k^j - nu^j) dk`,
/// with `C_L` outgoing and `C_R` incoming as in the negative half-line formula.
pub fn kernel_m_pair(sigma: f64, ell: f64, rule: &QuadratureRule) -> Result<[Complex64; 2]> {
    if !(ell > 0.0) {
        return invalid(format!("ell must be positive, got {ell}"));
    }
    let r = kernel_radius(ell, rule.tail_tolerance);
    let sp = Spectral::new(ContourKind::KdvHyperbolaOnly, rule, r, ell, sigma.abs())?;
    let mut s = [C0; 2];
    for j in 0..sp.len() {
        let k = sp.k[j];
        let nu = nu_companion(k);
        let e = (I * (k * ell - sp.omega[j] * sigma)).exp() * sp.weight[j];
        s[0] += e * (k - nu);
        s[1] += e * (k * k - nu * nu);
    }
    Ok(s)
}

pub fn kernel_j(j: u32, sigma: f64, ell: f64, rule: &QuadratureRule) -> Result<Complex64> {
    check_order(j)?;
    Ok(kernel_j_pair(sigma, ell, rule)?[j as usize - 1])
}

pub fn kernel_m(j: u32, sigma: f64, ell: f64, rule: &QuadratureRule) -> Result<Complex64> {
    check_order(j)?;
    Ok(kernel_m_pair(sigma, ell, rule)?[j as usize - 1])
}

/// Moduli `|J_1|, |J_2|, |M_1|, |M_2|` at one `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSample {
    pub sigma: f64,
    pub j: [f64; 2],
    pub m: [f64; 2],
}

impl KernelSample {
    pub fn within(&self, k: &KdvConstants) -> bool {
        self.j[0] <= k.c1 && self.j[1] <= k.c2 && self.m[0] <= k.m_bound && self.m[1] <= k.m_bound
    }
}

/// Kernel moduli at each `sigma`, evaluated in parallel.
pub fn kernel_suite(ell: f64, sigmas: &[f64], rule: &QuadratureRule) -> Result<Vec<KernelSample>> {
    let out: Vec<Result<KernelSample>> = crate::par_map(sigmas, |&sigma| {
        let j = kernel_j_pair(sigma, ell, rule)?;
        let m = kernel_m_pair(sigma, ell, rule)?;
        Ok(KernelSample { sigma, j: [j[0].norm(), j[1].norm()], m: [m[0].norm(), m[1].norm()] })
    });
    out.into_iter().collect()
}

/// Hyperbola extent used by the kernel evaluators.
pub fn kernel_hyperbola_extent(ell: f64, tol: f64) -> f64 {
    hyperbola_y_for_radius(kernel_radius(ell, tol))
}
