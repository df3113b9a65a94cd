//! The non-local sloshing operator `𝓐φ = ∂_x(√(1−x²)/π P.V.∫ φ(ξ)/(√(1−ξ²)(x−ξ)) dξ)`.
//!
//! In the first-kind basis `𝓐` is diagonal with symbol `n`:
//! `𝓐 Σ a_n T_n = Σ n a_n T_n / √(1−x²)`. The spectral path evaluates that
//! directly; the quadrature path differentiates `φ` and applies the weighted
//! finite Hilbert transform numerically and serves as an independent oracle.
//! Outputs carry a `1/√(1−x²)` factor and are returned as grid values only.

mod hilbert;
mod norms;

use std::f64::consts::PI;
use std::sync::Arc;

use crate::chebyshev::{clenshaw_t, to_grid, ChebCoeffs, ChebGrid, GridFunction};
use crate::error::{Result, SloshError};
use crate::exec::{map_range, ordered_sum};

pub use hilbert::{fht_winv, fht_winv_quadrature, hilbert_w_interlaced, k_op, kstar_op, AngleGrid};
pub use norms::{inner_l2, mean, norm_h12, norm_w2, norm_winv2, quadform_a};

#[derive(Debug, Clone, PartialEq)]
pub struct NonlocalOperator {
    grid: Arc<ChebGrid>,
}

impl NonlocalOperator {
    pub fn new(size: usize) -> Result<Self> {
        Ok(Self {
            grid: ChebGrid::shared(size)?,
        })
    }

    pub fn with_grid(grid: &Arc<ChebGrid>) -> Self {
        Self {
            grid: Arc::clone(grid),
        }
    }

    pub fn size(&self) -> usize {
        self.grid.size()
    }

    pub fn grid(&self) -> &Arc<ChebGrid> {
        &self.grid
    }

    fn check_fits(&self, a: &ChebCoeffs) -> Result<()> {
        if a.len() > self.size() {
            Err(SloshError::LengthMismatch {
                left: a.len(),
                right: self.size(),
            })
        } else {
            Ok(())
        }
    }

    /// `𝓐φ(x_j) = Σ_{n≥1} n a_n T_n(x_j) / √(1 − x_j²)`.
    pub fn apply_spectral(&self, a: &ChebCoeffs) -> Result<GridFunction> {
        let weighted = self.apply_spectral_weighted(a)?;
        let values = weighted
            .values()
            .iter()
            .zip(self.grid.weights())
            .map(|(v, w)| v / w)
            .collect();
        GridFunction::new(&self.grid, values)
    }

    /// `√(1 − x²)·𝓐φ = Σ_{n≥1} n a_n T_n`, a polynomial, sampled on the grid.
    pub fn apply_spectral_weighted(&self, a: &ChebCoeffs) -> Result<GridFunction> {
        self.check_fits(a)?;
        let symbol: Vec<f64> = a
            .as_slice()
            .iter()
            .enumerate()
            .map(|(n, v)| n as f64 * v)
            .collect();
        Ok(to_grid(&ChebCoeffs::new(symbol)?, &self.grid))
    }

    /// `𝓐φ` through `(1/√(1−x²)) (1/π) P.V.∫ √(1−ξ²) φ′(ξ)/(x−ξ) dξ`, with `φ′`
    /// taken in coefficient space and the principal value evaluated on the
    /// interlaced grid.
    pub fn apply_quadrature(&self, a: &ChebCoeffs) -> Result<GridFunction> {
        self.check_fits(a)?;
        let slope = a.derivative_u();
        let transformed = hilbert_w_interlaced(&slope, &self.grid);
        let values = transformed
            .iter()
            .zip(self.grid.weights())
            .map(|(v, w)| v / w)
            .collect();
        GridFunction::new(&self.grid, values)
    }

    /// `∫_{-1}^{1} 𝓐φ dx`, by Gauss–Chebyshev on the weighted samples. Vanishes
    /// for every `φ` (zero net flux through the free surface).
    pub fn flux(&self, a: &ChebCoeffs) -> Result<f64> {
        let weighted = self.apply_spectral_weighted(a)?;
        Ok(PI / self.size() as f64 * ordered_sum(weighted.values().iter().copied()))
    }
}

/// `𝓐φ` at arbitrary interior points, closed form.
pub fn apply_at(a: &ChebCoeffs, points: &[f64]) -> Result<Vec<f64>> {
    let symbol: Vec<f64> = a
        .as_slice()
        .iter()
        .enumerate()
        .map(|(n, v)| n as f64 * v)
        .collect();
    let out = map_range(points.len(), |i| {
        let x = points[i];
        if x.is_finite() && x.abs() < 1.0 {
            Ok(clenshaw_t(&symbol, x) / (1.0 - x * x).sqrt())
        } else {
            Err(SloshError::Domain {
                value: x,
                interval: "(-1, 1)",
            })
        }
    });
    out.into_iter().collect()
}
