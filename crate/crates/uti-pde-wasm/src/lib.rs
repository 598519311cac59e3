//! Browser bindings for the cheap parts of `uti-pde`: the heat reduction
//! kernel, the contraction certificates and the spectral contours.
//!
//! Build with `wasm-pack build --target web --out-dir www/pkg` inside this
//! crate and serve `www/` statically.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use uti_pde::contours::{make_contour, ContourKind};
use uti_pde::heat::{admissible_horizon, contraction_check_heat};
use uti_pde::kdv::{contraction_check_kdv, kdv_admissible_horizon, kdv_constants};
use uti_pde::kernels_heat::LambdaKernel;
use wasm_bindgen::prelude::*;

/// `n` samples of `Lambda_l` on `[0, sigma_max]` followed by its supremum.
pub fn lambda_samples(ell: f64, sigma_max: f64, n: usize) -> Result<Vec<f64>, String> {
    if n < 2 || !(sigma_max > 0.0) {
        return Err(format!("need n >= 2 and sigma_max > 0, got n = {n}, sigma_max = {sigma_max}"));
    }
    let k = LambdaKernel::new(ell).map_err(|e| e.to_string())?;
    let mut out: Vec<f64> =
        (0..n).map(|i| k.eval(sigma_max * i as f64 / (n - 1) as f64, 0)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    out.push(k.bound());
    Ok(out)
}

#[wasm_bindgen]
pub fn lambda_curve(ell: f64, sigma_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
    lambda_samples(ell, sigma_max, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateReport {
    pub heat_kappa: f64,
    pub heat_admissible: bool,
    pub heat_horizon: f64,
    pub kdv_kappa: f64,
    pub kdv_admissible: bool,
    pub kdv_horizon: f64,
    pub kdv_c1: f64,
    pub kdv_c2: f64,
}

/// Heat and KdV certificates for an interval of length `ell` up to `t_end`.
#[wasm_bindgen]
pub fn certificates(ell: f64, t_end: f64) -> CertificateReport {
    let heat = contraction_check_heat(ell, t_end);
    let kdv = contraction_check_kdv(ell, t_end);
    let c = kdv_constants(ell);
    CertificateReport {
        heat_kappa: heat.contraction_factor,
        heat_admissible: heat.admissible,
        heat_horizon: admissible_horizon(ell),
        kdv_kappa: kdv.contraction_factor,
        kdv_admissible: kdv.admissible,
        kdv_horizon: kdv_admissible_horizon(ell),
        kdv_c1: c.c1,
        kdv_c2: c.c2,
    }
}

/// Quadrature nodes of a contour as interleaved `re, im` pairs.
pub fn contour_nodes(kind: &str, radius: f64, panels: usize) -> Result<Vec<f64>, String> {
    let kind = match kind {
        "heat" => ContourKind::BoundaryD,
        "kdv-plus" => ContourKind::KdvCPlus,
        "kdv-minus" => ContourKind::KdvCMinus,
        "kdv-hyperbola" => ContourKind::KdvHyperbolaOnly,
        other => return Err(format!("unknown contour `{other}`")),
    };
    if panels < 1 {
        return Err("need at least one panel".into());
    }
    let path = make_contour(kind, radius).map_err(|e| e.to_string())?;
    Ok(path.nodes(panels, 4).iter().flat_map(|n| [n.k.re, n.k.im]).collect())
}

#[wasm_bindgen]
pub fn contour_points(kind: &str, radius: f64, panels: usize) -> Result<Vec<f64>, JsError> {
    contour_nodes(kind, radius, panels).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_curve_peaks_at_the_bound() {
        let v = lambda_samples(4.0, 20.0, 601).unwrap();
        let (curve, bound) = v.split_at(601);
        assert_eq!(curve[0], 0.0);
        let peak = curve.iter().copied().fold(0.0, f64::max);
        assert!(peak <= bound[0] && peak > 0.999 * bound[0]);
        assert!(lambda_samples(-1.0, 1.0, 10).is_err());
        assert!(lambda_samples(1.0, 1.0, 1).is_err());
    }

    #[test]
    fn certificate_report_matches_the_library() {
        let r = certificates(4.0, 6.0);
        assert!((r.heat_kappa - 0.069_480_4).abs() < 1e-6 && r.heat_admissible);
        assert!(!r.kdv_admissible);
        assert!((r.kdv_horizon - 0.0412).abs() < 1e-3);
        assert!((r.kdv_c1 - 1.583_333).abs() < 1e-6);
    }

    #[test]
    fn contour_nodes_are_pairs_on_the_path() {
        let p = contour_nodes("heat", 10.0, 3).unwrap();
        assert_eq!(p.len(), 2 * 2 * 3 * 4);
        for z in p.chunks(2) {
            assert!((z[0].abs() - z[1]).abs() < 1e-12, "heat rays sit on |Re k| = Im k");
        }
        let h = contour_nodes("kdv-hyperbola", 10.0, 2).unwrap();
        for z in h.chunks(2) {
            let (x, y) = (z[0], z[1]);
            assert!((3.0 * x * x - y * y - 1.0).abs() < 1e-9 * (1.0 + y * y));
        }
        assert!(contour_nodes("circle", 10.0, 2).is_err());
    }
}
