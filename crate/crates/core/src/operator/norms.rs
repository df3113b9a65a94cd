//! Pairings and norms: `(·,·)_{L²}`, `(𝓐·,·)_{L²}`, `‖·‖_{w⁻¹}`, `‖·‖_w`,
//! `‖·‖_{H^{1/2}_{w⁻¹}}` and the mean `φ̄ = ½∫φ dx`. Norm functions return
//! squared norms.

use std::f64::consts::PI;

use crate::chebyshev::{quad_plain, quad_w, to_grid, ChebCoeffs, ChebGrid, GridFunction};
use crate::error::{Result, SloshError};
use crate::exec::ordered_sum;

fn check_lengths(a: &ChebCoeffs, b: &ChebCoeffs) -> Result<()> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(SloshError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        })
    }
}

/// `∫ φψ dx`. Both factors are sampled on a grid of twice the coefficient
/// length so Fejér's rule integrates the product exactly.
pub fn inner_l2(a: &ChebCoeffs, b: &ChebCoeffs) -> Result<f64> {
    check_lengths(a, b)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let grid = ChebGrid::shared(2 * a.len())?;
    let product = to_grid(a, &grid).mul(&to_grid(b, &grid))?;
    Ok(quad_plain(&product))
}

/// `(𝓐φ, ψ)_{L²} = (π/2) Σ_{n≥1} n a_n b_n`.
pub fn quadform_a(a: &ChebCoeffs, b: &ChebCoeffs) -> Result<f64> {
    check_lengths(a, b)?;
    Ok(0.5
        * PI
        * ordered_sum(
            a.as_slice()
                .iter()
                .zip(b.as_slice())
                .enumerate()
                .skip(1)
                .map(|(n, (x, y))| n as f64 * x * y),
        ))
}

/// `‖φ‖²_{w⁻¹} = π a_0² + (π/2) Σ_{n≥1} a_n²`.
pub fn norm_winv2(a: &ChebCoeffs) -> f64 {
    let c = a.as_slice();
    match c.split_first() {
        None => 0.0,
        Some((a0, rest)) => PI * a0 * a0 + 0.5 * PI * ordered_sum(rest.iter().map(|v| v * v)),
    }
}

/// `‖f‖²_w = ∫ √(1−x²) f² dx`.
pub fn norm_w2(f: &GridFunction) -> f64 {
    let sq = f
        .map(|_, v| v * v)
        .expect("squares of finite samples are finite");
    quad_w(&sq)
}

/// `‖φ‖²_{H^{1/2}_{w⁻¹}} = ‖φ‖²_{w⁻¹} + (𝓐φ, φ)_{L²}`.
pub fn norm_h12(a: &ChebCoeffs) -> f64 {
    norm_winv2(a) + quadform_a(a, a).expect("equal lengths")
}

/// `φ̄ = ½ ∫ φ dx`.
pub fn mean(a: &ChebCoeffs) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let grid = ChebGrid::shared(a.len()).expect("non-empty");
    0.5 * quad_plain(&to_grid(a, &grid))
}
