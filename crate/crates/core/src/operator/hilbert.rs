//! Weighted finite Hilbert transforms on (−1, 1) and the angular airfoil
//! kernels `K`, `K*` on (0, π).

use std::f64::consts::PI;

use crate::chebyshev::{clenshaw_t, clenshaw_u, ChebCoeffs, ChebGrid};
use crate::error::{Result, SloshError};
use crate::exec::{map_range, ordered_sum};

fn check_open_interval(x: f64) -> Result<()> {
    if x.is_finite() && x.abs() < 1.0 {
        Ok(())
    } else {
        Err(SloshError::Domain {
            value: x,
            interval: "(-1, 1)",
        })
    }
}

/// `(1/π) P.V.∫ φ(ξ) / (√(1−ξ²)(x−ξ)) dξ` in closed form, `−Σ_{n≥1} a_n U_{n−1}(x)`.
pub fn fht_winv(a: &ChebCoeffs, x: f64) -> Result<f64> {
    check_open_interval(x)?;
    let shifted = a.as_slice().get(1..).unwrap_or(&[]);
    Ok(-clenshaw_u(shifted, x))
}

/// Quadrature path for [`fht_winv`]. After `ξ = cos z` the constant part of
/// the integrand is subtracted (its principal value vanishes) and the regular
/// remainder `(φ(cos z) − φ(x)) / (x − cos z)` is integrated with the midpoint
/// rule on `nodes` points. Exact for polynomial `φ` of degree ≤ 2·nodes.
pub fn fht_winv_quadrature(a: &ChebCoeffs, x: f64, nodes: usize) -> Result<f64> {
    check_open_interval(x)?;
    if nodes == 0 {
        return Err(SloshError::InvalidParameter(
            "quadrature needs at least one node".into(),
        ));
    }
    let coeffs = a.as_slice();
    let at_x = clenshaw_t(coeffs, x);
    let slope = a.derivative();
    let h = PI / nodes as f64;
    let sum = ordered_sum((0..nodes).map(|k| {
        let xi = ((k as f64 + 0.5) * h).cos();
        let gap = x - xi;
        if gap.abs() < 1e-13 {
            // removable singularity: the difference quotient tends to −φ′(x)
            -clenshaw_t(slope.as_slice(), x)
        } else {
            (clenshaw_t(coeffs, xi) - at_x) / gap
        }
    }));
    Ok(sum / nodes as f64)
}

/// `(1/π) P.V.∫ √(1−ξ²) p(ξ) / (x_j − ξ) dξ` at every node of `grid`, where
/// `p = Σ u_k U_k`.
///
/// Integration nodes are the zeros of `U_{N−1}` (`ξ_k = cos(kπ/N)`) which
/// interlace the evaluation nodes (zeros of `T_N`), so the pole is never
/// sampled. On this pairing the rule is exact for `p` of degree ≤ 2N − 2.
pub fn hilbert_w_interlaced(u_coeffs: &[f64], grid: &ChebGrid) -> Vec<f64> {
    let size = grid.size();
    let step = PI / size as f64;
    let sources: Vec<(f64, f64)> = (1..size)
        .map(|k| {
            let z = k as f64 * step;
            let s = z.sin();
            (z.cos(), s * s * clenshaw_u(u_coeffs, z.cos()))
        })
        .collect();
    map_range(size, |j| {
        let x = grid.nodes()[j];
        ordered_sum(sources.iter().map(|(xi, f)| f / (x - xi))) / size as f64
    })
}

/// Uniform angular grid on (0, π) for the airfoil kernels: `m` integration
/// nodes at cell midpoints `(k + ½)π/m` and `m − 1` evaluation nodes at the
/// interior cell edges `iπ/m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AngleGrid {
    m: usize,
}

impl AngleGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 || !m.is_multiple_of(2) {
            return Err(SloshError::InvalidParameter(format!(
                "angular grid size must be even and at least 2, got {m}"
            )));
        }
        Ok(Self { m })
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn sources(&self) -> Vec<f64> {
        (0..self.m)
            .map(|k| (k as f64 + 0.5) * PI / self.m as f64)
            .collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        (1..self.m).map(|i| i as f64 * PI / self.m as f64).collect()
    }

    fn apply(
        &self,
        psi: &[f64],
        kernel: impl Fn(f64, f64) -> f64 + Sync + Send,
    ) -> Result<Vec<f64>> {
        if psi.len() != self.m {
            return Err(SloshError::LengthMismatch {
                left: psi.len(),
                right: self.m,
            });
        }
        let sources = self.sources();
        let targets = self.targets();
        let scale = 1.0 / self.m as f64;
        Ok(map_range(targets.len(), |i| {
            let y = targets[i];
            scale * ordered_sum(sources.iter().zip(psi).map(|(&z, &p)| kernel(y, z) * p))
        }))
    }
}

/// `Kψ(y) = (1/π) P.V.∫_0^π sin z ψ(z) / (cos y − cos z) dz`.
///
/// `psi` holds samples at [`AngleGrid::sources`]; the result is sampled at
/// [`AngleGrid::targets`].
pub fn k_op(grid: &AngleGrid, psi: &[f64]) -> Result<Vec<f64>> {
    grid.apply(psi, |y, z| z.sin() / (y.cos() - z.cos()))
}

/// `K*ψ(y) = −(1/π) P.V.∫_0^π sin y ψ(z) / (cos y − cos z) dz`.
pub fn kstar_op(grid: &AngleGrid, psi: &[f64]) -> Result<Vec<f64>> {
    grid.apply(psi, |y, z| -y.sin() / (y.cos() - z.cos()))
}
