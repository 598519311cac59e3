//! Semi-analytic unified-transform solvers for the heat equation and the
//! linear KdV equation on a finite interval.
//!
//! The interval problem with left Dirichlet datum `g` is split into two
//! half-line problems whose boundary data `a`, `b` (and `c` for KdV) solve a
//! fixed-point equation. This crate evaluates the half-line solution formulas
//! by contour quadrature, solves the fixed-point equations, certifies their
//! contraction factors and measures how well the decomposition holds.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contours;
pub mod domain;
pub mod error;
#[cfg(feature = "cli")]
pub mod harness;
pub mod heat;
pub mod kdv;
pub mod kernels_heat;
mod quad;
mod special;

pub use error::{Error, Result};

/// Maps `f` over `items`, in parallel when the `parallel` feature is on.
pub(crate) fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
