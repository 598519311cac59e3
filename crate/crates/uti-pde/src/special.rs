//! Small special functions shared by the transform and contour code.

use num_complex::Complex64;

pub(crate) const C0: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// `exp(z) - 1` without cancellation for small `|z|`.
pub(crate) fn expm1(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    if z.norm() > 0.5 {
        return z.exp() - 1.0;
    }
    let em1 = x.exp_m1();
    let s = (0.5 * y).sin();
    Complex64::new(em1 * y.cos() - 2.0 * s * s, x.exp() * y.sin())
}

/// `psi_m(w) = int_0^1 exp(-w u) u^m du` for `m = 0, 1, 2`.
pub(crate) fn psi(m: usize, w: Complex64) -> Complex64 {
    debug_assert!(m <= 2);
    if w.norm() < 1.0 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term / (m as f64 + 1.0);
        for j in 1..40 {
            term *= -w / j as f64;
            let add = term / ((m + j) as f64 + 1.0);
            sum += add;
            if add.norm() < 1e-18 * sum.norm().max(1e-300) {
                break;
            }
        }
        return sum;
    }
    let e = (-w).exp();
    let mut p = -expm1(-w) / w;
    for j in 1..=m {
        p = (j as f64 * p - e) / w;
    }
    p
}

/// All three `psi_m` at once, sharing the exponential.
pub(crate) fn psi3(w: Complex64) -> [Complex64; 3] {
    if w.norm() < 1.0 {
        return [psi(0, w), psi(1, w), psi(2, w)];
    }
    let e = (-w).exp();
    let p0 = -expm1(-w) / w;
    let p1 = (p0 - e) / w;
    let p2 = (2.0 * p1 - e) / w;
    [p0, p1, p2]
}

pub(crate) fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// `H_m(eta) = eta^{2m} int_eta^inf u^{-2m} exp(-u^2) du` for `m = 0, 1, 2`.
pub(crate) fn tail_moments(eta: f64) -> [f64; 3] {
    let h0 = 0.5 * std::f64::consts::PI.sqrt() * erfc(eta);
    let g = eta * (-eta * eta).exp();
    let h1 = (2.0 * eta * eta * h0 - g) / (1.0 - 2.0);
    let h2 = (2.0 * eta * eta * h1 - g) / (1.0 - 4.0);
    [h0, h1, h2]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn psi_brute(m: usize, w: Complex64) -> Complex64 {
        let n = 20000;
        let h = 1.0 / n as f64;
        let f = |u: f64| (-w * u).exp() * u.powi(m as i32);
        let mut s = f(0.0) + f(1.0);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn psi_matches_simpson() {
        for &w in &[
            Complex64::new(0.3, -0.2),
            Complex64::new(2.5, 4.0),
            Complex64::new(0.0, 7.0),
            Complex64::new(-1.5, 0.5),
            Complex64::new(1e-9, 0.0),
        ] {
            for m in 0..3 {
                let d = (psi(m, w) - psi_brute(m, w)).norm();
                assert!(d < 1e-12, "m={m} w={w} diff={d}");
            }
            let all = psi3(w);
            for (m, v) in all.iter().enumerate() {
                assert!((v - psi(m, w)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn expm1_small_and_large() {
        let z = Complex64::new(1e-10, 2e-10);
        let e = expm1(z);
        assert!((e - z).norm() < 1e-19);
        let z = Complex64::new(0.7, -2.0);
        assert!((expm1(z) - (z.exp() - 1.0)).norm() < 1e-15);
    }

    #[test]
    fn tail_moments_at_zero() {
        let h = tail_moments(0.0);
        assert!((h[0] - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-15);
        assert_eq!(h[1], 0.0);
        assert_eq!(h[2], 0.0);
    }

    #[test]
    fn tail_moments_match_quadrature() {
        let eta: f64 = 0.7;
        let n = 200000;
        let upper = 12.0;
        let h = (upper - eta) / n as f64;
        for m in 0..3 {
            let f = |u: f64| eta.powi(2 * m as i32) * u.powi(-2 * m as i32) * (-u * u).exp();
            let mut s = f(eta) + f(upper);
            for i in 1..n {
                s += f(eta + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            let q = s * h / 3.0;
            assert!((tail_moments(eta)[m] - q).abs() < 1e-12, "m={m}");
        }
    }
}
