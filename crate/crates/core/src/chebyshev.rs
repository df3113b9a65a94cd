//! Chebyshev polynomials of both kinds, the Gauss–Chebyshev grid, transforms
//! between grid values and first-kind coefficients, and weighted quadrature on
//! (−1, 1).

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{check_finite, Result, SloshError};
use crate::exec::{map_range, ordered_sum};

/// Truncation used by the solvers when nothing else is configured.
pub const DEFAULT_SIZE: usize = 64;

fn check_unit_interval(x: f64) -> Result<()> {
    if x.is_finite() && x.abs() <= 1.0 {
        Ok(())
    } else {
        Err(SloshError::Domain {
            value: x,
            interval: "[-1, 1]",
        })
    }
}

/// `T_n(x)` by the three-term recurrence.
pub fn eval_t(n: usize, x: f64) -> Result<f64> {
    check_unit_interval(x)?;
    if n == 0 {
        return Ok(1.0);
    }
    let (mut prev, mut cur) = (1.0, x);
    for _ in 1..n {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// `U_n(x)` by the three-term recurrence. At `x = ±1` this yields the limit
/// `(n + 1)(±1)^n` without special casing.
pub fn eval_u(n: usize, x: f64) -> Result<f64> {
    check_unit_interval(x)?;
    if n == 0 {
        return Ok(1.0);
    }
    let (mut prev, mut cur) = (1.0, 2.0 * x);
    for _ in 1..n {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Clenshaw summation of `Σ c_n T_n(x)`. No domain check.
pub fn clenshaw_t(coeffs: &[f64], x: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = c + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    coeffs.first().copied().unwrap_or(0.0) + x * b1 - b2
}

/// Clenshaw summation of `Σ c_n U_n(x)`. No domain check.
pub fn clenshaw_u(coeffs: &[f64], x: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in coeffs.iter().rev() {
        let b0 = c + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    b1
}

/// `∫_{-1}^{1} T_n(x) dx`: zero for odd `n`, `2 / (1 − n²)` for even `n`.
pub fn integral_of_t(n: usize) -> f64 {
    if n % 2 == 1 {
        0.0
    } else {
        let n = n as f64;
        2.0 / (1.0 - n * n)
    }
}

/// `∫_{-1}^{1} T_m T_n dx` in closed form.
pub fn integral_of_tt(m: usize, n: usize) -> f64 {
    0.5 * (integral_of_t(m + n) + integral_of_t(m.abs_diff(n)))
}

/// Gauss–Chebyshev (interior) grid `x_j = cos θ_j`, `θ_j = (2j+1)π/(2N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebGrid {
    nodes: Vec<f64>,
    angles: Vec<f64>,
    weights: Vec<f64>,
}

impl ChebGrid {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(SloshError::InvalidParameter(
                "grid size must be positive".into(),
            ));
        }
        let n = size as f64;
        let angles: Vec<f64> = (0..size)
            .map(|j| (2 * j + 1) as f64 * PI / (2.0 * n))
            .collect();
        // cos θ_j written as sin((N − 2j − 1)π/(2N)) keeps x_j = −x_{N−1−j} bit-exact.
        let nodes = (0..size)
            .map(|j| ((size as f64 - 2.0 * j as f64 - 1.0) * PI / (2.0 * n)).sin())
            .collect();
        let weights = angles.iter().map(|t| t.sin()).collect();
        Ok(Self {
            nodes,
            angles,
            weights,
        })
    }

    pub fn shared(size: usize) -> Result<Arc<Self>> {
        Self::new(size).map(Arc::new)
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// `w(x_j) = √(1 − x_j²)`, computed as `sin θ_j`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Fejér first-rule weights: `Σ_j ω_j f(x_j) = ∫ f dx` for polynomials of
    /// degree below the grid size. All weights are positive.
    pub fn fejer_weights(&self) -> Vec<f64> {
        let size = self.size();
        let kmax = (size - 1) / 2;
        let scale = 2.0 / size as f64;
        map_range(size, |j| {
            let theta = self.angles[j];
            let tail = ordered_sum((1..=kmax).map(|k| {
                let k = k as f64;
                (2.0 * k * theta).cos() / (4.0 * k * k - 1.0)
            }));
            scale * (1.0 - 2.0 * tail)
        })
    }
}

/// First-kind coefficient vector `φ = Σ a_n T_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebCoeffs(Vec<f64>);

impl ChebCoeffs {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        check_finite(&coeffs)?;
        Ok(Self(coeffs))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    /// Unit vector selecting `T_index`.
    ///
    /// # Panics
    /// If `index >= len`.
    pub fn unit(index: usize, len: usize) -> Self {
        assert!(
            index < len,
            "unit index {index} out of range for length {len}"
        );
        let mut c = vec![0.0; len];
        c[index] = 1.0;
        Self(c)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Coefficient `a_n`, zero past the end.
    pub fn get(&self, n: usize) -> f64 {
        self.0.get(n).copied().unwrap_or(0.0)
    }

    /// Truncate or zero-pad to `len`.
    pub fn resized(&self, len: usize) -> Self {
        let mut c = self.0.clone();
        c.resize(len, 0.0);
        Self(c)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self(self.0.iter().map(|v| alpha * v).collect())
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(SloshError::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(Self(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        ))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Value at `x ∈ [−1, 1]`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        check_unit_interval(x)?;
        Ok(clenshaw_t(&self.0, x))
    }

    /// T-coefficients of `φ′` by the backward recurrence
    /// `b_{k−1} = b_{k+1} + 2k a_k`, halving `b_0`. Same length as `self`;
    /// exact for polynomials.
    pub fn derivative(&self) -> Self {
        let len = self.len();
        let mut b = vec![0.0; len + 1];
        for k in (1..len).rev() {
            b[k - 1] = b[k + 1] + 2.0 * k as f64 * self.0[k];
        }
        if len > 0 {
            b[0] *= 0.5;
        }
        b.truncate(len);
        Self(b)
    }

    /// U-coefficients of `φ′ = Σ n a_n U_{n−1}`; length `len − 1`.
    pub fn derivative_u(&self) -> Vec<f64> {
        self.0
            .iter()
            .enumerate()
            .skip(1)
            .map(|(n, a)| n as f64 * a)
            .collect()
    }

    /// `∫_{-1}^{1} φ dx`, exact.
    pub fn integral(&self) -> f64 {
        ordered_sum(self.0.iter().enumerate().map(|(n, a)| a * integral_of_t(n)))
    }
}

/// Samples `f(x_j)` on a Gauss–Chebyshev grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<ChebGrid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: &Arc<ChebGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.size() {
            return Err(SloshError::LengthMismatch {
                left: values.len(),
                right: grid.size(),
            });
        }
        check_finite(&values)?;
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Samples `f` at every node. Non-finite samples are rejected.
    pub fn from_fn(grid: &Arc<ChebGrid>, f: impl Fn(f64) -> f64 + Sync + Send) -> Result<Self> {
        let values = map_range(grid.size(), |j| f(grid.nodes()[j]));
        Self::new(grid, values)
    }

    pub fn zeros(grid: &Arc<ChebGrid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.size()],
        }
    }

    pub fn grid(&self) -> &Arc<ChebGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .zip(self.grid.nodes())
            .map(|(&v, &x)| f(x, v))
            .collect();
        Self::new(&self.grid, values)
    }

    /// Pointwise product on a shared grid.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Self::new(&self.grid, values)
    }

    pub(crate) fn same_grid(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid {
            Ok(())
        } else {
            Err(SloshError::GridMismatch(format!(
                "grid sizes {} and {}",
                self.grid.size(),
                other.grid.size()
            )))
        }
    }
}

/// Which discrete cosine transform to use in [`to_coeffs_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransformPath {
    /// O(N²) direct sum; the reference path.
    Direct,
    /// O(N log N) via a length-4N FFT.
    #[default]
    Fast,
}

/// Grid values to first-kind coefficients,
/// `a_n = (2 − δ_{n0})/N Σ_j f(x_j) cos(nθ_j)`.
pub fn to_coeffs(f: &GridFunction) -> ChebCoeffs {
    to_coeffs_with(f, TransformPath::default())
}

pub fn to_coeffs_with(f: &GridFunction, path: TransformPath) -> ChebCoeffs {
    let raw = match path {
        TransformPath::Direct => cosine_sums_direct(f),
        TransformPath::Fast => cosine_sums_fft(f),
    };
    let size = f.len() as f64;
    let coeffs = raw
        .into_iter()
        .enumerate()
        .map(|(n, s)| if n == 0 { s / size } else { 2.0 * s / size })
        .collect();
    ChebCoeffs(coeffs)
}

fn cosine_sums_direct(f: &GridFunction) -> Vec<f64> {
    let angles = f.grid.angles();
    map_range(f.len(), |n| {
        ordered_sum(
            f.values
                .iter()
                .zip(angles)
                .map(|(v, t)| v * (n as f64 * t).cos()),
        )
    })
}

// Σ_j f_j cos(nθ_j) is half the real part of the 4N-point DFT of the sequence
// with f_j placed at odd positions 2j+1 and mirrored at 4N−2j−1.
fn cosine_sums_fft(f: &GridFunction) -> Vec<f64> {
    let size = f.len();
    let len = 4 * size;
    let mut buffer = vec![Complex::new(0.0, 0.0); len];
    for (j, &v) in f.values.iter().enumerate() {
        buffer[2 * j + 1] = Complex::new(v, 0.0);
        buffer[len - 2 * j - 1] = Complex::new(v, 0.0);
    }
    let fft = FftPlanner::new().plan_fft_forward(len);
    fft.process(&mut buffer);
    buffer[..size].iter().map(|c| 0.5 * c.re).collect()
}

/// Coefficients to grid values. Any coefficient length is accepted; shorter
/// vectors are implicitly zero-padded.
pub fn to_grid(a: &ChebCoeffs, grid: &Arc<ChebGrid>) -> GridFunction {
    let values = map_range(grid.size(), |j| clenshaw_t(a.as_slice(), grid.nodes()[j]));
    GridFunction {
        grid: Arc::clone(grid),
        values,
    }
}

/// `∫ f / √(1 − x²) dx` by the Gauss–Chebyshev rule; exact for polynomial
/// degree ≤ 2N − 1.
pub fn quad_winv(f: &GridFunction) -> f64 {
    PI / f.len() as f64 * ordered_sum(f.values.iter().copied())
}

/// `∫ f √(1 − x²) dx` as the Gauss–Chebyshev rule applied to `f·(1 − x²)`.
pub fn quad_w(f: &GridFunction) -> f64 {
    PI / f.len() as f64
        * ordered_sum(
            f.values
                .iter()
                .zip(f.grid.weights())
                .map(|(v, w)| v * w * w),
        )
}

/// `∫ f dx` by Fejér's first rule on the same nodes (integrate the
/// interpolant); exact for polynomial degree < N.
pub fn quad_plain(f: &GridFunction) -> f64 {
    to_coeffs(f).integral()
}
