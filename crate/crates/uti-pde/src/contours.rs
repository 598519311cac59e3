//! Spectral contours, the dispersion root `nu`, the real branch `k(tau)` and
//! a panel quadrature engine for oriented piecewise paths.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::quad::gauss_legendre;
use crate::special::C0;

const INV_SQRT3: f64 = 0.577_350_269_189_625_8;

/// Which path to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContourKind {
    /// Rays `arg k = 3pi/4` (incoming) and `pi/4` (outgoing).
    BoundaryD,
    /// `C_L` incoming, `(-1/sqrt 3, 1/sqrt 3)` rightward, `C_R` outgoing.
    KdvCPlus,
    /// Real `|k| > 1/sqrt 3` rightward, `C_L` outgoing, `C_R` incoming.
    KdvCMinus,
    /// `C_L` outgoing and `C_R` incoming, nothing else.
    KdvHyperbolaOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grading {
    Linear,
    /// Parameter `u` maps to `u^2`, clustering nodes at the finite end.
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OscillatoryStrategy {
    PlainPanels,
    /// Real pieces with `|k| > 1` are parametrized by `tau = -(k^3 - k)`.
    TauSubstitution,
}

/// Panel layout and truncation metadata for unbounded paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureRule {
    pub panels_per_piece: usize,
    pub nodes_per_panel: usize,
    pub truncation_radius: f64,
    pub tail_tolerance: f64,
    pub oscillatory_strategy: OscillatoryStrategy,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self {
            panels_per_piece: 64,
            nodes_per_panel: 16,
            truncation_radius: 30.0,
            tail_tolerance: 1e-8,
            oscillatory_strategy: OscillatoryStrategy::TauSubstitution,
        }
    }
}

impl QuadratureRule {
    pub fn new(
        panels_per_piece: usize,
        nodes_per_panel: usize,
        truncation_radius: f64,
        tail_tolerance: f64,
        oscillatory_strategy: OscillatoryStrategy,
    ) -> Result<Self> {
        let rule = Self { panels_per_piece, nodes_per_panel, truncation_radius, tail_tolerance, oscillatory_strategy };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_panel < 2 {
            return invalid(format!("nodes_per_panel must be at least 2, got {}", self.nodes_per_panel));
        }
        if self.panels_per_piece < 1 {
            return invalid("panels_per_piece must be at least 1");
        }
        if !(self.tail_tolerance > 0.0) {
            return invalid(format!("tail_tolerance must be positive, got {}", self.tail_tolerance));
        }
        if !(self.truncation_radius > 0.0) || !self.truncation_radius.is_finite() {
            return invalid(format!("truncation_radius must be positive, got {}", self.truncation_radius));
        }
        Ok(())
    }

    pub fn with_panels(mut self, panels_per_piece: usize) -> Self {
        self.panels_per_piece = panels_per_piece;
        self
    }

    pub fn with_radius(mut self, truncation_radius: f64) -> Self {
        self.truncation_radius = truncation_radius;
        self
    }

    pub fn with_tolerance(mut self, tail_tolerance: f64) -> Self {
        self.tail_tolerance = tail_tolerance;
        self
    }

    pub fn with_strategy(mut self, oscillatory_strategy: OscillatoryStrategy) -> Self {
        self.oscillatory_strategy = oscillatory_strategy;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `C_L`: `-conj(gamma(y))`.
    Left,
    /// `C_R`: `gamma(y)`.
    Right,
}

/// One smooth piece, parametrized by `u in [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    /// `k = r exp(i angle)` with `r` from 0 to `radius`.
    Ray { angle: f64, radius: f64, grading: Grading },
    /// Hyperbola branch with `y` from 0 to `y_max`.
    Hyperbola { side: Side, y_max: f64, grading: Grading },
    /// Straight segment from `from` to `to` on the real axis.
    Real { from: f64, to: f64 },
    /// `k = real_branch_k(tau)` with `tau` from 0 to `-sign * tau_max`, graded quadratically;
    /// `sign = 1` covers `[1, k_max]`, `sign = -1` covers `[-k_max, -1]`.
    RealTau { sign: f64, tau_max: f64 },
}

impl Segment {
    /// Point and derivative with respect to `u`.
    pub fn point(&self, u: f64) -> (Complex64, Complex64) {
        match *self {
            Segment::Ray { angle, radius, grading } => {
                let dir = Complex64::from_polar(1.0, angle);
                let (r, dr) = graded(grading, radius, u);
                (dir * r, dir * dr)
            }
            Segment::Hyperbola { side, y_max, grading } => {
                let (y, dy) = graded(grading, y_max, u);
                let g = gamma(y);
                let dg = gamma_prime(y);
                match side {
                    Side::Right => (g, dg * dy),
                    Side::Left => (-g.conj(), -dg.conj() * dy),
                }
            }
            Segment::Real { from, to } => (Complex64::new(from + (to - from) * u, 0.0), Complex64::new(to - from, 0.0)),
            Segment::RealTau { sign, tau_max } => {
                // tau = -sign * tau_max * u^2 keeps the first panel clear of
                // the branch point of k(tau) at |tau| = 2 / (3 sqrt 3).
                let tau = -sign * tau_max * u * u;
                let k = if u == 0.0 { sign } else { real_branch_k(tau) };
                (Complex64::new(k, 0.0), Complex64::new(2.0 * u * sign * tau_max / (3.0 * k * k - 1.0), 0.0))
            }
        }
    }
}

fn graded(grading: Grading, scale: f64, u: f64) -> (f64, f64) {
    match grading {
        Grading::Linear => (scale * u, scale),
        Grading::Quadratic => (scale * u * u, 2.0 * scale * u),
    }
}

/// A segment with its orientation; `truncated` marks an unbounded piece cut
/// at `u = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub segment: Segment,
    pub reversed: bool,
    pub truncated: bool,
}

impl Piece {
    pub fn new(segment: Segment, reversed: bool, truncated: bool) -> Self {
        Self { segment, reversed, truncated }
    }

    pub fn orientation(&self) -> f64 {
        if self.reversed {
            -1.0
        } else {
            1.0
        }
    }

    pub fn flipped(mut self) -> Self {
        self.reversed = !self.reversed;
        self
    }
}

/// An oriented sequence of pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourPath {
    pieces: Vec<Piece>,
    truncation_radius: f64,
}

/// Quadrature node: location and oriented weight (including `dk/du`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub k: Complex64,
    pub weight: Complex64,
}

impl ContourPath {
    pub fn new(pieces: Vec<Piece>, truncation_radius: f64) -> Result<Self> {
        if pieces.iter().any(|p| p.truncated) && !(truncation_radius > 0.0) {
            return invalid(format!("truncation radius must be positive, got {truncation_radius}"));
        }
        Ok(Self { pieces, truncation_radius })
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn truncation_radius(&self) -> f64 {
        self.truncation_radius
    }

    pub fn reversed(&self) -> Self {
        Self { pieces: self.pieces.iter().rev().map(|p| p.flipped()).collect(), truncation_radius: self.truncation_radius }
    }

    /// All quadrature nodes with `panels` equal panels per piece.
    pub fn nodes(&self, panels: usize, nodes_per_panel: usize) -> Vec<Node> {
        let gl = gauss_legendre(nodes_per_panel);
        let mut out = Vec::with_capacity(self.pieces.len() * panels * gl.len());
        let h = 1.0 / panels as f64;
        for piece in &self.pieces {
            let sign = piece.orientation();
            for p in 0..panels {
                let a = p as f64 * h;
                for &(x, w) in gl {
                    let u = a + 0.5 * h * (x + 1.0);
                    let (k, dk) = piece.segment.point(u);
                    out.push(Node { k, weight: dk * (sign * 0.5 * h * w) });
                }
            }
        }
        out
    }
}

/// Builds a contour truncated at `|k| <= truncation_radius` with plain
/// linear parametrizations.
pub fn make_contour(kind: ContourKind, truncation_radius: f64) -> Result<ContourPath> {
    make_contour_with(kind, truncation_radius, OscillatoryStrategy::PlainPanels)
}

pub fn make_contour_with(kind: ContourKind, truncation_radius: f64, strategy: OscillatoryStrategy) -> Result<ContourPath> {
    let r = truncation_radius;
    if !(r > 0.0) || !r.is_finite() {
        return invalid(format!("truncation radius must be positive, got {r}"));
    }
    if kind != ContourKind::BoundaryD && r <= 1.0 {
        return invalid(format!("KdV contours need a truncation radius above 1, got {r}"));
    }
    let y_max = hyperbola_y_for_radius(r);
    let hyp = |side| Segment::Hyperbola { side, y_max, grading: Grading::Linear };
    let pieces = match kind {
        ContourKind::BoundaryD => vec![
            Piece::new(Segment::Ray { angle: 0.75 * PI, radius: r, grading: Grading::Linear }, true, true),
            Piece::new(Segment::Ray { angle: 0.25 * PI, radius: r, grading: Grading::Linear }, false, true),
        ],
        ContourKind::KdvCPlus => vec![
            Piece::new(hyp(Side::Left), true, true),
            Piece::new(Segment::Real { from: -INV_SQRT3, to: INV_SQRT3 }, false, false),
            Piece::new(hyp(Side::Right), false, true),
        ],
        ContourKind::KdvHyperbolaOnly => vec![Piece::new(hyp(Side::Left), false, true), Piece::new(hyp(Side::Right), true, true)],
        ContourKind::KdvCMinus => {
            let mut pieces = real_tail_pieces(-1.0, r, strategy);
            pieces.push(Piece::new(hyp(Side::Left), false, true));
            pieces.push(Piece::new(hyp(Side::Right), true, true));
            pieces.extend(real_tail_pieces(1.0, r, strategy));
            pieces
        }
    };
    ContourPath::new(pieces, r)
}

/// The real half-line `sign * [1/sqrt 3, r]`, oriented rightward.
fn real_tail_pieces(sign: f64, r: f64, strategy: OscillatoryStrategy) -> Vec<Piece> {
    let rev = sign < 0.0;
    match strategy {
        OscillatoryStrategy::PlainPanels => {
            vec![Piece::new(Segment::Real { from: sign * INV_SQRT3, to: sign * r }, rev, true)]
        }
        OscillatoryStrategy::TauSubstitution => {
            let near = Piece::new(Segment::Real { from: sign * INV_SQRT3, to: sign }, rev, false);
            let far = Piece::new(Segment::RealTau { sign, tau_max: r * r * r - r }, rev, true);
            if rev {
                vec![far, near]
            } else {
                vec![near, far]
            }
        }
    }
}

/// `y` at which `|gamma(y)| = r`.
pub fn hyperbola_y_for_radius(r: f64) -> f64 {
    ((3.0 * r * r - 1.0) / 4.0).max(0.0).sqrt()
}

/// `gamma(y) = sqrt(y^2 + 1) / sqrt 3 + i y`, the branch `C_R`.
pub fn gamma(y: f64) -> Complex64 {
    Complex64::new((y * y + 1.0).sqrt() * INV_SQRT3, y)
}

fn gamma_prime(y: f64) -> Complex64 {
    Complex64::new(y / (y * y + 1.0).sqrt() * INV_SQRT3, 1.0)
}

/// Result of [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: Complex64,
    /// `|I(P) - I(P/2)|` with `P` panels per piece.
    pub error_estimate: f64,
    /// Sum over truncated pieces of `|f k'|` at the cut times the last panel length.
    pub tail_estimate: f64,
}

/// Oriented panel quadrature of `f` along `path`.
pub fn integrate<F>(path: &ContourPath, rule: &QuadratureRule, f: F) -> Result<Integral>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    rule.validate()?;
    let panels = rule.panels_per_piece;
    let value = sum_nodes(&path.nodes(panels, rule.nodes_per_panel), &f)?;
    let coarse = if panels >= 2 {
        sum_nodes(&path.nodes(panels / 2, rule.nodes_per_panel), &f)?
    } else {
        sum_nodes(&path.nodes(1, (rule.nodes_per_panel / 2).max(2)), &f)?
    };
    let mut tail = 0.0;
    for piece in path.pieces.iter().filter(|p| p.truncated) {
        let (k, dk) = piece.segment.point(1.0);
        tail += (f(k) * dk).norm() / panels as f64;
    }
    if tail > rule.tail_tolerance {
        return Err(Error::Truncation { estimate: tail, tol: rule.tail_tolerance });
    }
    Ok(Integral { value, error_estimate: (value - coarse).norm(), tail_estimate: tail })
}

/// Doubles the panel count until the error estimate drops below `tol`.
pub fn integrate_adaptive<F>(path: &ContourPath, rule: &QuadratureRule, tol: f64, f: F) -> Result<Integral>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    let mut r = *rule;
    loop {
        let out = integrate(path, &r, &f)?;
        if out.error_estimate <= tol {
            return Ok(out);
        }
        if r.panels_per_piece >= 1 << 15 {
            return Err(Error::NoConvergence { estimate: out.error_estimate, tol });
        }
        r.panels_per_piece *= 2;
    }
}

fn sum_nodes<F>(nodes: &[Node], f: &F) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    let term = |n: &Node| -> Result<Complex64> {
        let v = f(n.k);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite { re: n.k.re, im: n.k.im });
        }
        Ok(v * n.weight)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if nodes.len() >= 4096 {
            let parts: Vec<Complex64> =
                nodes.par_chunks(1024).map(|c| c.iter().try_fold(C0, |s, n| term(n).map(|v| s + v))).collect::<Result<_>>()?;
            return Ok(parts.into_iter().fold(C0, |s, v| s + v));
        }
    }
    nodes.iter().try_fold(C0, |s, n| term(n).map(|v| s + v))
}

/// `nu(k) = -k/2 + sqrt(1 - 3k^2/4)`, principal square root.
pub fn nu(k: Complex64) -> Complex64 {
    -0.5 * k + principal_sqrt(1.0 - 0.75 * k * k)
}

/// Root of `nu^2 + k nu + k^2 - 1 = 0` used by the negative half-line
/// formula: the one with smaller imaginary part, or with smaller modulus
/// when both are real.
pub fn nu_companion(k: Complex64) -> Complex64 {
    let s = principal_sqrt(1.0 - 0.75 * k * k);
    let (a, b) = (-0.5 * k + s, -0.5 * k - s);
    if (a.im - b.im).abs() <= 1e-12 {
        if a.norm() <= b.norm() {
            a
        } else {
            b
        }
    } else if a.im < b.im {
        a
    } else {
        b
    }
}

fn principal_sqrt(z: Complex64) -> Complex64 {
    // Treat a signed zero imaginary part as +0 so the real cut is approached from above.
    let z = if z.im == 0.0 { Complex64::new(z.re, 0.0) } else { z };
    z.sqrt()
}

/// Real root of `-(k^3 - k) = tau` on the branch `|k| >= 1` with
/// `sign(k) = -sign(tau)`; `tau = +0` maps to `-1` and `tau = -0` to `1`.
pub fn real_branch_k(tau: f64) -> f64 {
    let neg = tau > 0.0 || (tau == 0.0 && tau.is_sign_positive());
    let s = tau.abs();
    // Solve k^3 - k = s for k >= 1; Newton from the right is monotone.
    let mut k = 1.0 + s.cbrt();
    for _ in 0..100 {
        let f = k * k * k - k - s;
        let step = f / (3.0 * k * k - 1.0);
        let next = (k - step).max(1.0);
        if (next - k).abs() <= 4.0 * f64::EPSILON * k {
            k = next;
            break;
        }
        k = next;
    }
    if neg {
        -k
    } else {
        k
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::I;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn gamma_examples() {
        assert_relative_eq!(gamma(0.0).re, 0.577_35, epsilon = 1e-5);
        assert_eq!(gamma(0.0).im, 0.0);
        let g = gamma(1.0);
        assert_relative_eq!(g.re, 0.816_496_580_927_726, epsilon = 1e-15);
        assert_eq!(g.im, 1.0);
    }

    #[test]
    fn boundary_d_ray_point() {
        let path = make_contour(ContourKind::BoundaryD, 10.0).unwrap();
        let (k, _) = path.pieces()[1].segment.point(0.1);
        assert!((k - Complex64::new(1.0, 1.0) / 2f64.sqrt()).norm() < 1e-15);
        assert!(path.pieces()[0].reversed);
    }

    #[test]
    fn contour_endpoints_join() {
        let p = make_contour(ContourKind::KdvCPlus, 5.0).unwrap();
        let ends: Vec<(Complex64, Complex64)> = p
            .pieces()
            .iter()
            .map(|pc| {
                let (a, b) = (pc.segment.point(0.0).0, pc.segment.point(1.0).0);
                if pc.reversed {
                    (b, a)
                } else {
                    (a, b)
                }
            })
            .collect();
        for w in ends.windows(2) {
            assert!((w[0].1 - w[1].0).norm() < 1e-14);
        }
        assert!((ends[2].1.norm() - 5.0).abs() < 1e-12);
        for strategy in [OscillatoryStrategy::PlainPanels, OscillatoryStrategy::TauSubstitution] {
            let m = make_contour_with(ContourKind::KdvCMinus, 5.0, strategy).unwrap();
            let first = m.pieces()[0];
            let start = if first.reversed { first.segment.point(1.0).0 } else { first.segment.point(0.0).0 };
            assert!((start.re + 5.0).abs() < 1e-9 && start.im == 0.0);
        }
    }

    #[test]
    fn plus_and_minus_sum_to_real_line() {
        // The hyperbola pieces cancel between the two contours.
        let rule = QuadratureRule::default().with_tolerance(1e3);
        let f = |k: Complex64| (-0.25 * k * k).exp() * (1.0 + k);
        let line = ContourPath::new(vec![Piece::new(Segment::Real { from: -6.0, to: 6.0 }, false, false)], 6.0).unwrap();
        let reference = integrate(&line, &rule.with_panels(256), f).unwrap().value;
        for strategy in [OscillatoryStrategy::PlainPanels, OscillatoryStrategy::TauSubstitution] {
            let plus = make_contour_with(ContourKind::KdvCPlus, 6.0, strategy).unwrap();
            let minus = make_contour_with(ContourKind::KdvCMinus, 6.0, strategy).unwrap();
            let total = integrate(&plus, &rule, f).unwrap().value + integrate(&minus, &rule, f).unwrap().value;
            assert!((total - reference).norm() < 1e-11, "{strategy:?}: {total} vs {reference}");
        }
    }

    #[test]
    fn integrate_zero_and_oracle() {
        let path = make_contour(ContourKind::BoundaryD, 30.0).unwrap();
        let rule = QuadratureRule::default().with_panels(256);
        assert_eq!(integrate(&path, &rule, |_| C0).unwrap().value, C0);
        let got = integrate(&path, &rule, |z| (2.0 * I * z - z * z).exp() * z).unwrap().value;
        let expected = I * (PI.sqrt() * (-1.0f64).exp());
        assert!((got - expected).norm() < 1e-8, "{got}");
        assert_relative_eq!(expected.im, 0.652_049, epsilon = 1e-6);
    }

    #[test]
    fn error_estimate_shrinks_with_panels() {
        let path = make_contour(ContourKind::KdvCPlus, 4.0).unwrap();
        let f = |k: Complex64| (I * k * 1.5).exp() * (1.0 + k * k).inv();
        let rule = QuadratureRule::default().with_tolerance(1.0).with_panels(2).with_strategy(OscillatoryStrategy::PlainPanels);
        let mut last = f64::INFINITY;
        let mut r = rule;
        for _ in 0..3 {
            let e = integrate(&path, &r, f).unwrap().error_estimate;
            assert!(e <= 0.5 * last || e < 1e-14, "{e} vs {last}");
            last = e;
            r.panels_per_piece *= 2;
        }
    }

    #[test]
    fn nonfinite_and_truncation_errors() {
        let path = make_contour(ContourKind::BoundaryD, 2.0).unwrap();
        let rule = QuadratureRule::default().with_panels(4);
        let bad = integrate(&path, &rule, |k| if k.re > 0.5 { Complex64::new(f64::NAN, 0.0) } else { k });
        assert!(matches!(bad, Err(Error::NonFinite { .. })));
        let slow = integrate(&path, &rule.with_tolerance(1e-6), |k| k.inv());
        assert!(matches!(slow, Err(Error::Truncation { .. })));
    }

    #[test]
    fn reversing_flips_sign() {
        let path = make_contour(ContourKind::KdvHyperbolaOnly, 5.0).unwrap();
        let rule = QuadratureRule::default().with_tolerance(1.0);
        let f = |k: Complex64| (I * k * 2.0).exp() * k;
        let a = integrate(&path, &rule, f).unwrap().value;
        let b = integrate(&path.reversed(), &rule, f).unwrap().value;
        assert!((a + b).norm() < 1e-14);
    }

    #[test]
    fn nu_examples() {
        assert_eq!(nu(Complex64::new(0.0, 0.0)), Complex64::new(1.0, 0.0));
        assert!(nu(Complex64::new(1.0, 0.0)).norm() < 1e-16);
        let k = Complex64::new(0.3, 0.7);
        let v = nu(k);
        assert!((v * v * v - v - (k * k * k - k)).norm() < 1e-12);
    }

    #[test]
    fn real_branch_examples() {
        assert_eq!(real_branch_k(0.0), -1.0);
        assert_eq!(real_branch_k(-0.0), 1.0);
        assert!((real_branch_k(-6.0) - 2.0).abs() < 1e-15);
        assert!((real_branch_k(6.0) + 2.0).abs() < 1e-15);
    }

    #[test]
    fn hyperbola_phase_is_real() {
        for i in 0..1000 {
            let y = 50.0 * i as f64 / 999.0;
            for g in [gamma(y), -gamma(y).conj()] {
                let w = g * g * g - g;
                assert!(w.im.abs() <= 1e-12 * (1.0 + w.norm()).max(1.0), "y={y}: {w}");
            }
        }
    }

    proptest! {
        #[test]
        fn nu_cubic_invariance(r in 0.0f64..10.0, th in 0.0f64..(2.0 * PI)) {
            let k = Complex64::from_polar(r, th);
            let scale = 1.0 + k.norm().powi(3);
            for v in [nu(k), nu_companion(k)] {
                prop_assert!((v * v * v - v - (k * k * k - k)).norm() <= 1e-12 * scale);
            }
        }

        #[test]
        fn real_branch_is_decreasing_and_odd(a in -1e4f64..1e4, b in -1e4f64..1e4) {
            prop_assume!(a != 0.0 && b != 0.0 && a != b);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(real_branch_k(lo) > real_branch_k(hi));
            prop_assert_eq!(real_branch_k(-a), -real_branch_k(a));
            let k = real_branch_k(a);
            prop_assert!(k.abs() >= 1.0);
            prop_assert!((a + (k * k * k - k)).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn integrate_is_linear(al in -2.0f64..2.0, be in -2.0f64..2.0, p in 0.5f64..3.0, q in 0.5f64..3.0) {
            let path = make_contour(ContourKind::BoundaryD, 20.0).unwrap();
            let rule = QuadratureRule::default().with_tolerance(1.0);
            let f = move |z: Complex64| (I * z * p).exp() * z;
            let g = move |z: Complex64| (I * z * q - z * z * 0.3).exp();
            let lhs = integrate(&path, &rule, |z| al * f(z) + be * g(z)).unwrap().value;
            let rhs = al * integrate(&path, &rule, f).unwrap().value + be * integrate(&path, &rule, g).unwrap().value;
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
        }
    }
}
