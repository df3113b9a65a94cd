//! Galerkin discretization in the first-kind basis: the resolvent problem
//! `φ + 𝓐φ = v` in weak form and the sloshing eigenproblem `𝓐e = λe`.
//!
//! With `φ = Σ a_n T_n` and test functions `T_m`, the weak form
//! `(φ,ψ)_{L²} + (𝓐φ,ψ)_{L²} = (v,ψ)_{L²}` becomes `(M + D) a = b` with the
//! mass matrix `M_{mn} = ∫ T_m T_n dx` and the diagonal stiffness
//! `D = diag(nπ/2)`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::chebyshev::{integral_of_tt, to_coeffs, ChebCoeffs, ChebGrid, GridFunction};
use crate::error::{Result, SloshError};
use crate::exec::{map_range, ordered_sum};

#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    grid: Arc<ChebGrid>,
    mass: DMatrix<f64>,
    stiffness: DVector<f64>,
    resolvent: Cholesky<f64, Dyn>,
}

impl GalerkinSystem {
    pub fn build(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(SloshError::InvalidParameter(format!(
                "Galerkin truncation must be at least 2, got {size}"
            )));
        }
        let mass = DMatrix::from_fn(size, size, integral_of_tt);
        let stiffness = DVector::from_fn(size, |n, _| 0.5 * PI * n as f64);
        let resolvent = Cholesky::new(&mass + DMatrix::from_diagonal(&stiffness))
            .ok_or_else(|| SloshError::LinearSolve("M + D is not positive definite".into()))?;
        Ok(Self {
            grid: ChebGrid::shared(size)?,
            mass,
            stiffness,
            resolvent,
        })
    }

    pub fn size(&self) -> usize {
        self.stiffness.len()
    }

    /// Gauss–Chebyshev grid of the same size as the truncation.
    pub fn grid(&self) -> &Arc<ChebGrid> {
        &self.grid
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn stiffness(&self) -> &DVector<f64> {
        &self.stiffness
    }

    /// Diagonal of the Cholesky factor of `M + D`.
    pub fn resolvent_pivots(&self) -> Vec<f64> {
        self.resolvent
            .l_dirty()
            .diagonal()
            .iter()
            .copied()
            .collect()
    }

    pub(crate) fn check_len(&self, a: &ChebCoeffs) -> Result<()> {
        if a.len() == self.size() {
            Ok(())
        } else {
            Err(SloshError::LengthMismatch {
                left: a.len(),
                right: self.size(),
            })
        }
    }

    /// `b_m = (v, T_m)_{L²}` for `v = regular + singular/√(1−x²)`.
    ///
    /// The regular part is interpolated and integrated against `T_m` in closed
    /// form (exact for polynomial samples); the singular part goes through the
    /// Gauss–Chebyshev rule (exact when `singular·T_m` is polynomial). This is
    /// the split under which `𝓐φ`, itself of the form `p/√(1−x²)`, enters a
    /// right-hand side without quadrature error.
    pub fn load_vector(&self, regular: &GridFunction, singular: Option<&GridFunction>) -> Vec<f64> {
        let size = self.size();
        let r = to_coeffs(regular);
        let mut b = map_range(size, |m| {
            ordered_sum(
                r.as_slice()
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * integral_of_tt(k, m)),
            )
        });
        if let Some(s) = singular {
            let scale = PI / s.len() as f64;
            let angles = s.grid().angles();
            let extra = map_range(size, |m| {
                scale
                    * ordered_sum(
                        s.values()
                            .iter()
                            .zip(angles)
                            .map(|(v, t)| v * (m as f64 * t).cos()),
                    )
            });
            b.iter_mut().zip(extra).for_each(|(b, e)| *b += e);
        }
        b
    }

    /// `(M + D) a`.
    pub fn apply(&self, a: &ChebCoeffs) -> Result<Vec<f64>> {
        self.check_len(a)?;
        let a = DVector::from_column_slice(a.as_slice());
        let out = &self.mass * &a + self.stiffness.component_mul(&a);
        Ok(out.iter().copied().collect())
    }

    /// `max_m |((M + D) a − b)_m|`.
    pub fn weak_residual(&self, a: &ChebCoeffs, load: &[f64]) -> Result<f64> {
        let lhs = self.apply(a)?;
        if load.len() != lhs.len() {
            return Err(SloshError::LengthMismatch {
                left: load.len(),
                right: lhs.len(),
            });
        }
        Ok(lhs
            .iter()
            .zip(load)
            .fold(0.0, |m, (x, y)| m.max((x - y).abs())))
    }

    /// Solve `(M + D) a = b` for a precomputed load vector.
    pub fn solve_load(&self, load: &[f64]) -> Result<ChebCoeffs> {
        if load.len() != self.size() {
            return Err(SloshError::LengthMismatch {
                left: load.len(),
                right: self.size(),
            });
        }
        let b = DVector::from_column_slice(load);
        let a = self.resolvent.solve(&b);
        let coeffs = ChebCoeffs::new(a.iter().copied().collect())?;
        let residual = self.weak_residual(&coeffs, load)?;
        let scale = load.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if residual > 1e-10 * scale {
            return Err(SloshError::LinearSolve(format!(
                "resolvent residual {residual:e} exceeds tolerance"
            )));
        }
        Ok(coeffs)
    }
}

/// Weak solution of `φ + 𝓐φ = v` for grid samples `v`.
pub fn solve_resolvent(v: &GridFunction, sys: &GalerkinSystem) -> Result<ChebCoeffs> {
    sys.solve_load(&sys.load_vector(v, None))
}

/// Weak solution of `φ + 𝓐φ = regular + singular/√(1−x²)`.
pub fn solve_resolvent_split(
    regular: &GridFunction,
    singular: &GridFunction,
    sys: &GalerkinSystem,
) -> Result<ChebCoeffs> {
    sys.solve_load(&sys.load_vector(regular, Some(singular)))
}

/// Sloshing modes `(𝓐e_n, ψ) = λ_n (e_n, ψ)`, ascending, `L²`-orthonormal.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Vec<ChebCoeffs>,
}

impl EigenDecomposition {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Angular frequency `√λ_n`.
    pub fn frequency(&self, n: usize) -> f64 {
        self.values[n].max(0.0).sqrt()
    }
}

/// First `count` modes of `D e = λ M e`, via `M = LLᵀ` and the standard
/// symmetric problem for `L⁻¹ D L⁻ᵀ`.
pub fn eigenmodes(sys: &GalerkinSystem, count: usize) -> Result<EigenDecomposition> {
    let size = sys.size();
    if count > size {
        return Err(SloshError::InvalidParameter(format!(
            "requested {count} modes from a truncation of {size}"
        )));
    }
    let chol = Cholesky::new(sys.mass.clone())
        .ok_or_else(|| SloshError::LinearSolve("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    // L⁻¹ D L⁻ᵀ = G Gᵀ with G = L⁻¹ diag(√d)
    let root = DMatrix::from_diagonal(&sys.stiffness.map(f64::sqrt));
    let g = l
        .solve_lower_triangular(&root)
        .ok_or_else(|| SloshError::LinearSolve("singular Cholesky factor".into()))?;
    let reduced = &g * g.transpose();
    let eig = SymmetricEigen::new(reduced);

    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let lt = l.transpose();
    let mut values = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count);
    for &i in order.iter().take(count) {
        let y = eig.eigenvectors.column(i).into_owned();
        let mut e = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| SloshError::LinearSolve("singular Cholesky factor".into()))?;
        let norm = (e.transpose() * &sys.mass * &e)[(0, 0)].sqrt();
        e /= norm;
        let peak = e.amax();
        if let Some(first) = e.iter().find(|c| c.abs() > 1e-8 * peak) {
            if *first < 0.0 {
                e.neg_mut();
            }
        }
        values.push(eig.eigenvalues[i]);
        vectors.push(ChebCoeffs::new(e.iter().copied().collect())?);
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Largest generalized eigenvalue `λ_max` of `(D, M)`.
pub fn max_eigenvalue(sys: &GalerkinSystem) -> Result<f64> {
    let all = eigenmodes(sys, sys.size())?;
    Ok(all.values.last().copied().unwrap_or(0.0))
}
