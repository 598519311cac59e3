//! The heat reduction kernel `Lambda_l`, its bound, its self-convolution and
//! the contour identity that produces it.

use std::f64::consts::{E, PI};

use num_complex::Complex64;

use crate::contours::{integrate, ContourPath, Grading, Piece, QuadratureRule, Segment};
use crate::error::{invalid, Error, Result};
use crate::quad::adaptive;
use crate::special::I;

/// `Lambda_l(s) = exp(-l^2 / 4s) / s^(3/2)` for `s > 0`, zero otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaKernel {
    ell: f64,
}

impl LambdaKernel {
    pub fn new(ell: f64) -> Result<Self> {
        if !(ell > 0.0) || !ell.is_finite() {
            return invalid(format!("kernel length must be positive, got {ell}"));
        }
        Ok(Self { ell })
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// `Lambda_l` (order 0) or its derivative (order 1).
    pub fn eval(&self, sigma: f64, order: u32) -> Result<f64> {
        match order {
            0 => Ok(self.value(sigma)),
            1 => {
                if sigma <= 0.0 {
                    return Ok(0.0);
                }
                let l2 = self.ell * self.ell;
                Ok((l2 - 6.0 * sigma) / (4.0 * sigma.powf(3.5)) * (-l2 / (4.0 * sigma)).exp())
            }
            n => Err(Error::OrderNotImplemented(n)),
        }
    }

    #[inline]
    pub(crate) fn value(&self, sigma: f64) -> f64 {
        if sigma <= 0.0 {
            return 0.0;
        }
        (-self.ell * self.ell / (4.0 * sigma)).exp() / (sigma * sigma.sqrt())
    }

    /// `sup Lambda_l = (6 / (e l^2))^(3/2)`, attained at `s = l^2 / 6`.
    pub fn bound(&self) -> f64 {
        (6.0 / (E * self.ell * self.ell)).powf(1.5)
    }

    /// `K(tau) = int_0^tau Lambda_l(tau - z) Lambda_l(z) dz` to absolute
    /// accuracy `tol`.
    pub fn selfconv(&self, tau: f64, tol: f64) -> Result<f64> {
        if !(tol > 0.0) {
            return invalid(format!("tolerance must be positive, got {tol}"));
        }
        if tau <= 0.0 {
            return Ok(0.0);
        }
        let f = |z: f64| self.value(tau - z) * self.value(z);
        let (half, _) = adaptive(f, 0.0, 0.5 * tau, 0.25 * tol)?;
        Ok(2.0 * half)
    }
}

pub fn lambda_eval(k: &LambdaKernel, sigma: f64, order: u32) -> Result<f64> {
    k.eval(sigma, order)
}

pub fn lambda_bound(k: &LambdaKernel) -> f64 {
    k.bound()
}

pub fn lambda_selfconv(k: &LambdaKernel, tau: f64, tol: f64) -> Result<f64> {
    k.selfconv(tau, tol)
}

/// Self-convolution sampled once for repeated use by the solvers.
#[derive(Debug, Clone)]
pub(crate) struct SelfConvTable {
    kernel: LambdaKernel,
    tol: f64,
}

impl SelfConvTable {
    pub(crate) const DEFAULT_TOL: f64 = 1e-14;

    pub(crate) fn new(kernel: LambdaKernel) -> Self {
        Self { kernel, tol: Self::DEFAULT_TOL }
    }

    pub(crate) fn at(&self, tau: f64) -> Result<f64> {
        self.kernel.selfconv(tau, self.tol)
    }

    pub(crate) fn many(&self, taus: &[f64]) -> Result<Vec<f64>> {
        crate::par_map(taus, |&s| self.at(s)).into_iter().collect()
    }
}

/// Outcome of comparing the boundary-of-D integral with its closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpCheck {
    pub quadrature_value: Complex64,
    pub closed_form: Complex64,
    pub abs_error: f64,
    pub truncation_radius: f64,
    pub panels: usize,
}

/// Tail of `int_R^inf r exp(-a r) dr` over both rays, `a = l / sqrt 2`.
pub fn dp_tail_bound(ell: f64, radius: f64) -> f64 {
    let a = ell / std::f64::consts::SQRT_2;
    2.0 * (-a * radius).exp() * (radius / a + 1.0 / (a * a))
}

/// Smallest radius (to 0.5) whose tail bound is below `tol / 10`.
pub fn dp_truncation_radius(ell: f64, tol: f64) -> f64 {
    let mut r = 1.0;
    while dp_tail_bound(ell, r) >= 0.1 * tol {
        r += 0.5;
    }
    r
}

/// Checks `int_{dD} exp(i k l - k^2 s) k dk = i sqrt(pi) l Lambda_l(s) / 2`
/// on the truncated rays `arg k = 3pi/4` (incoming) and `pi/4` (outgoing).
///
/// Panels per ray double from `rule.panels_per_piece` until two successive
/// values agree to `rule.tail_tolerance`.
pub fn dp_identity_check(k: &LambdaKernel, sigma: f64, rule: &QuadratureRule) -> Result<DpCheck> {
    let ell = k.ell;
    let tol = rule.tail_tolerance;
    let radius = rule.truncation_radius;
    let tail = dp_tail_bound(ell, radius);
    if tail > tol {
        return Err(Error::Truncation { estimate: tail, tol });
    }
    let path = ContourPath::new(
        vec![
            Piece::new(Segment::Ray { angle: 0.75 * PI, radius, grading: Grading::Linear }, true, true),
            Piece::new(Segment::Ray { angle: 0.25 * PI, radius, grading: Grading::Linear }, false, true),
        ],
        radius,
    )?;
    let f = |z: Complex64| (I * z * ell - z * z * sigma).exp() * z;
    let closed_form = I * (PI.sqrt() * ell * k.value(sigma) / 2.0);
    let mut panels = rule.panels_per_piece.max(1);
    let mut prev = integrate(&path, &rule.with_panels(panels), f)?.value;
    loop {
        panels *= 2;
        let cur = integrate(&path, &rule.with_panels(panels), f)?.value;
        let diff = (cur - prev).norm();
        if diff <= tol {
            return Ok(DpCheck {
                quadrature_value: cur,
                closed_form,
                abs_error: (cur - closed_form).norm(),
                truncation_radius: radius,
                panels,
            });
        }
        if panels >= 1 << 16 {
            return Err(Error::NoConvergence { estimate: diff, tol });
        }
        prev = cur;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn kernel(ell: f64) -> LambdaKernel {
        LambdaKernel::new(ell).unwrap()
    }

    /// Image-method oracle: `Lambda_l * Lambda_l = (4 sqrt(pi) / l) Lambda_{2l}`.
    fn selfconv_oracle(ell: f64, tau: f64) -> f64 {
        4.0 * PI.sqrt() / ell * kernel(2.0 * ell).value(tau)
    }

    #[test]
    fn eval_examples() {
        let k = kernel(2.0);
        assert_eq!(k.eval(-1.0, 0).unwrap(), 0.0);
        assert_relative_eq!(k.eval(1.0, 0).unwrap(), 0.367_879_441_171_442_3, epsilon = 1e-15);
        assert_relative_eq!(k.eval(1.0, 1).unwrap(), -0.183_939_720_585_721_2, epsilon = 1e-15);
        assert_eq!(k.eval(1.0, 2), Err(Error::OrderNotImplemented(2)));
    }

    #[test]
    fn bound_examples() {
        assert_relative_eq!(kernel(4.0).bound(), 0.051_240, epsilon = 1e-6);
        assert_relative_eq!(kernel(1.0).bound(), 3.279_330, epsilon = 1e-6);
    }

    #[test]
    fn bound_dominates_samples() {
        for &ell in &[0.5, 1.0, 2.0, 4.0, 9.0] {
            let k = kernel(ell);
            let b = k.bound();
            for i in 1..5000 {
                let s = i as f64 * 0.01 * ell * ell;
                assert!(k.value(s) <= b * (1.0 + 1e-14));
            }
        }
    }

    #[test]
    fn continuous_at_zero() {
        for &ell in &[1.0, 2.0, 4.0] {
            let k = kernel(ell);
            let vals: Vec<f64> = (1..=8).map(|j| k.value(10f64.powi(-j))).collect();
            assert!(vals.windows(2).all(|w| w[1] <= w[0]));
            assert!(vals[7] < 1e-12);
        }
    }

    #[test]
    fn derivative_matches_central_differences() {
        let k = kernel(2.0);
        let h = 1e-4;
        for i in 0..100 {
            let s = 0.1 + 9.9 * i as f64 / 99.0;
            let fd = (k.value(s + h) - k.value(s - h)) / (2.0 * h);
            assert!((fd - k.eval(s, 1).unwrap()).abs() < 1e-6, "s = {s}");
        }
    }

    #[test]
    fn selfconv_examples() {
        let k = kernel(4.0);
        assert_eq!(k.selfconv(-0.5, 1e-10).unwrap(), 0.0);
        assert_eq!(k.selfconv(0.0, 1e-10).unwrap(), 0.0);
        // Midpoint sum with 10^6 cells, frozen.
        let n = 1_000_000;
        let h = 2.0 / n as f64;
        let riemann: f64 = (0..n)
            .map(|i| {
                let z = (i as f64 + 0.5) * h;
                k.value(2.0 - z) * k.value(z)
            })
            .sum::<f64>()
            * h;
        let got = k.selfconv(2.0, 1e-12).unwrap();
        assert!((got - riemann).abs() < 1e-8);
        assert_relative_eq!(got, 2.102_200_270_456_136e-4, max_relative = 1e-10);
    }

    #[test]
    fn selfconv_matches_image_oracle() {
        for &ell in &[1.0, 2.0, 4.0] {
            for &tau in &[0.05, 0.5, 3.0, 20.0, 120.0] {
                let got = kernel(ell).selfconv(tau, 1e-14).unwrap();
                assert!((got - selfconv_oracle(ell, tau)).abs() < 1e-13, "ell={ell} tau={tau}");
            }
        }
    }

    #[test]
    fn dp_identity_examples() {
        let rule = QuadratureRule::default().with_radius(dp_truncation_radius(2.0, 1e-10)).with_tolerance(1e-10);
        let c = dp_identity_check(&kernel(2.0), 1.0, &rule).unwrap();
        assert_relative_eq!(c.closed_form.im, 0.652_049, epsilon = 1e-6);
        assert!(c.abs_error < 1e-8);
        let c = dp_identity_check(&kernel(2.0), -1.0, &rule).unwrap();
        assert_eq!(c.closed_form, Complex64::new(0.0, 0.0));
        assert!(c.quadrature_value.norm() < 1e-8);
        let rule4 = rule.with_radius(dp_truncation_radius(4.0, 1e-10));
        let c = dp_identity_check(&kernel(4.0), 0.0, &rule4).unwrap();
        assert_eq!(c.closed_form.norm(), 0.0);
        assert!(c.quadrature_value.norm() < 1e-8);
    }

    #[test]
    fn dp_identity_refuses_short_rays() {
        let rule = QuadratureRule::default().with_radius(3.0).with_tolerance(1e-10);
        assert!(matches!(dp_identity_check(&kernel(1.0), 1.0, &rule), Err(Error::Truncation { .. })));
    }

    proptest! {
        #[test]
        fn value_between_zero_and_bound(ell in 0.2f64..10.0, sigma in -50.0f64..200.0) {
            let k = kernel(ell);
            let v = k.value(sigma);
            prop_assert!(v >= 0.0);
            prop_assert!(v <= k.bound() * (1.0 + 1e-13));
        }

        #[test]
        fn selfconv_respects_bound(ell in 1.0f64..6.0, tau in 0.01f64..60.0) {
            let k = kernel(ell);
            let v = k.selfconv(tau, 1e-13).unwrap();
            prop_assert!(v >= 0.0);
            prop_assert!(v <= tau * k.bound().powi(2) + 1e-13);
        }
    }
}
