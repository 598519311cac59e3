//! Gauss-Legendre node cache and adaptive real quadrature.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Mutex, OnceLock};

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

type Rule = &'static [(f64, f64)];

/// Nodes and weights on `[-1, 1]`, ascending in the node.
pub(crate) fn gauss_legendre(n: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("quadrature cache poisoned");
    map.entry(n).or_insert_with(|| {
        let n = NonZeroUsize::new(n.max(2)).expect("nonzero");
        let rule = GaussLegendre::new(n);
        let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Box::leak(pairs.into_boxed_slice())
    })
}

/// Fixed Gauss-Legendre rule on `[a, b]`.
pub(crate) fn gl_fixed(f: &impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    gauss_legendre(n).iter().map(|&(x, w)| w * f(m + r * x)).sum::<f64>() * r
}

/// Adaptive bisection with 16-point panels. Returns the value and the summed
/// error estimate, or [`Error::NoConvergence`] when the estimate stays above
/// `tol` after the depth limit.
pub(crate) fn adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    const N: usize = 16;
    const MAX_DEPTH: u32 = 48;
    if b <= a {
        return Ok((0.0, 0.0));
    }
    let mut total = 0.0;
    let mut err = 0.0;
    let mut stack = vec![(a, b, gl_fixed(&f, a, b, N), 0u32)];
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = gl_fixed(&f, lo, mid, N);
        let right = gl_fixed(&f, mid, hi, N);
        let diff = (left + right - whole).abs();
        let local_tol = tol * (hi - lo) / (b - a);
        if diff <= local_tol || depth >= MAX_DEPTH {
            total += left + right;
            err += diff;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    if err > tol {
        return Err(Error::NoConvergence { estimate: err, tol });
    }
    Ok((total, err))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_sorted_and_weights_sum_to_two() {
        let r = gauss_legendre(16);
        assert_eq!(r.len(), 16);
        assert!(r.windows(2).all(|w| w[0].0 < w[1].0));
        let s: f64 = r.iter().map(|p| p.1).sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let f = |x: f64| 1.0 / (1e-4 + x * x);
        let (v, e) = adaptive(f, -1.0, 1.0, 1e-10).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
        assert!(e <= 1e-10);
    }
}
