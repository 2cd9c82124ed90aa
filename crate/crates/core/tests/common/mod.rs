#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use physarum::LpInstance;

pub fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

/// Projects `g` onto the null space of `A`: `g − Aᵀ (A Aᵀ)⁻¹ A g`.
pub fn null_space_projection(a: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let gram = a * a.transpose();
    let w = gram.lu().solve(&(a * g)).expect("A has full row rank");
    g - a.transpose() * w
}

/// Relative error `|a − b| / max(|a|, |b|, tiny)`.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub fn simplex_12() -> LpInstance {
    LpInstance::simplex(&[1.0, 2.0])
}
