//! Localized source control `φ_tt + 𝓐φ = v·1_I`.
//!
//! Everything here is discretize-then-optimize: the forward map from control
//! samples to the terminal state is the implicit-midpoint scheme of
//! [`crate::evolution`], and the adjoint is its literal transpose. The
//! backward field `z` therefore satisfies the discrete duality identity
//! `Σ_k τ_k Σ_j ω_j z_k(x_j) v_k(x_j) = (g_0, φ_t(T))_{L²} + (g_1, φ(T))_{L²}`
//! to linear-solver precision, where `τ_k` are trapezoid weights in time and
//! `ω_j` Fejér weights in space.
//!
//! Synthesis minimizes
//! `J(v) = ½‖[φ(T), φ_t(T)] − [g_0, g_1]‖²_{H^{1/2}_{w⁻¹}×L²} + (reg/2)‖v‖²_{L²(0,T;L²_w)}`
//! with conjugate gradients on the normal equations in the `L²(0,T;L²_w)` inner
//! product.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chebyshev::{ChebCoeffs, ChebGrid};
use crate::elliptic::GalerkinSystem;
use crate::error::{check_finite, Result, SloshError};
use crate::evolution::{simulate, step_count, Integrator, Propagator, RhsSpec, WaveState};
use crate::exec::{map_range, ordered_sum};
use crate::operator::inner_l2;

/// Default iteration cap for [`synthesize`].
pub const DEFAULT_MAX_ITER: usize = 500;

/// Relative gradient norm at which CG stops making progress.
const STAGNATION: f64 = 1e-14;

/// Control interval `I = (lo, hi)` and its grid indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlWindow {
    lo: f64,
    hi: f64,
    grid: Arc<ChebGrid>,
    active: Vec<usize>,
}

impl ControlWindow {
    pub fn new(lo: f64, hi: f64, grid: &Arc<ChebGrid>) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && -1.0 < lo && lo < hi && hi < 1.0) {
            return Err(SloshError::InvalidParameter(format!(
                "control window ({lo}, {hi}) must satisfy -1 < lo < hi < 1"
            )));
        }
        let active: Vec<usize> = grid
            .nodes()
            .iter()
            .enumerate()
            .filter(|(_, x)| lo < **x && **x < hi)
            .map(|(j, _)| j)
            .collect();
        if active.len() < 3 {
            return Err(SloshError::InvalidParameter(format!(
                "control window ({lo}, {hi}) contains {} grid nodes, need at least 3",
                active.len()
            )));
        }
        Ok(Self {
            lo,
            hi,
            grid: Arc::clone(grid),
            active,
        })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn grid(&self) -> &Arc<ChebGrid> {
        &self.grid
    }

    /// Grid indices inside `I`, ascending.
    pub fn active_nodes(&self) -> &[usize] {
        &self.active
    }

    /// `1_I(x_j)`.
    pub fn indicator(&self) -> Vec<f64> {
        let mut ind = vec![0.0; self.grid.size()];
        for &j in &self.active {
            ind[j] = 1.0;
        }
        ind
    }

    pub fn contains(&self, other: &Self) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

/// Trapezoid weights for `steps` uniform intervals of width `dt`.
fn trapezoid(steps: usize, dt: f64) -> Vec<f64> {
    (0..=steps)
        .map(|k| if k == 0 || k == steps { 0.5 * dt } else { dt })
        .collect()
}

/// `b_m = Σ_j ω_j T_m(x_j) v_j`, the `L²` load of grid samples.
fn load_of(grid: &ChebGrid, fejer: &[f64], row: &[f64]) -> Vec<f64> {
    let size = grid.size();
    map_range(size, |m| {
        ordered_sum(
            row.iter()
                .zip(fejer)
                .zip(grid.angles())
                .filter(|((v, _), _)| **v != 0.0)
                .map(|((v, w), t)| v * w * (m as f64 * t).cos()),
        )
    })
}

/// Source `v(t_k, x_j)` on a uniform time grid, zero outside the window.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    times: Vec<f64>,
    window: ControlWindow,
    values: Vec<Vec<f64>>,
    loads: Vec<Vec<f64>>,
    norm_sq: f64,
}

impl ControlSignal {
    pub fn new(times: Vec<f64>, window: &ControlWindow, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() < 2 {
            return Err(SloshError::InvalidParameter(
                "control signal needs at least two time samples".into(),
            ));
        }
        if times.len() != values.len() {
            return Err(SloshError::LengthMismatch {
                left: times.len(),
                right: values.len(),
            });
        }
        check_finite(&times)?;
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        if dt.is_nan() || dt <= 0.0 {
            return Err(SloshError::InvalidParameter(
                "time samples must increase".into(),
            ));
        }
        for (k, t) in times.iter().enumerate() {
            if (t - (times[0] + k as f64 * dt)).abs() > 1e-9 * dt.max(t.abs()) {
                return Err(SloshError::InvalidParameter(format!(
                    "time samples must be uniform; sample {k} at {t}"
                )));
            }
        }
        let size = window.grid.size();
        let inside = window.indicator();
        for (k, row) in values.iter().enumerate() {
            if row.len() != size {
                return Err(SloshError::LengthMismatch {
                    left: row.len(),
                    right: size,
                });
            }
            check_finite(row)?;
            if let Some(j) = row
                .iter()
                .zip(&inside)
                .position(|(v, ind)| *ind == 0.0 && *v != 0.0)
            {
                return Err(SloshError::InvalidParameter(format!(
                    "control sample at time index {k}, node {j} lies outside the window"
                )));
            }
        }
        let fejer = window.grid.fejer_weights();
        let loads = values
            .iter()
            .map(|row| load_of(&window.grid, &fejer, row))
            .collect();
        let tau = trapezoid(times.len() - 1, dt);
        let grid = &window.grid;
        let scale = PI / size as f64;
        let norm_sq = ordered_sum(values.iter().zip(&tau).map(|(row, tk)| {
            tk * scale * ordered_sum(row.iter().zip(grid.weights()).map(|(v, w)| v * v * w * w))
        }));
        Ok(Self {
            times,
            window: window.clone(),
            values,
            loads,
            norm_sq,
        })
    }

    /// Zero control on `steps` uniform intervals of `[0, horizon]`.
    pub fn zeros(window: &ControlWindow, horizon: f64, steps: usize) -> Result<Self> {
        let times = (0..=steps)
            .map(|k| horizon * k as f64 / steps as f64)
            .collect();
        Self::new(
            times,
            window,
            vec![vec![0.0; window.grid.size()]; steps + 1],
        )
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn window(&self) -> &ControlWindow {
        &self.window
    }

    pub fn grid(&self) -> &Arc<ChebGrid> {
        &self.window.grid
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dt(&self) -> f64 {
        (self.times[self.steps()] - self.times[0]) / self.steps() as f64
    }

    /// `‖v‖²_{L²(0,T;L²_w)}`, trapezoid in time and Gauss–Chebyshev in space.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// `L²` load `(v(t), T_m)` at time `t`, linear in time between samples and
    /// clamped outside the sampled range.
    pub fn load_at(&self, t: f64) -> Vec<f64> {
        let s = (t - self.times[0]) / self.dt();
        let last = self.steps() as f64;
        if s <= 0.0 {
            return self.loads[0].clone();
        }
        if s >= last {
            return self.loads[self.steps()].clone();
        }
        let k = s.floor();
        let frac = s - k;
        let k = k as usize;
        if frac < 1e-9 {
            return self.loads[k].clone();
        }
        if frac > 1.0 - 1e-9 {
            return self.loads[k + 1].clone();
        }
        self.loads[k]
            .iter()
            .zip(&self.loads[k + 1])
            .map(|(a, b)| (1.0 - frac) * a + frac * b)
            .collect()
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .map(|row| row.iter().map(|v| alpha * v).collect())
            .collect();
        Self::new(self.times.clone(), &self.window, values)
    }
}

/// Terminal target `[g_0, g_1]` for `[φ(T), φ_t(T)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetState {
    pub g0: ChebCoeffs,
    pub g1: ChebCoeffs,
}

impl TargetState {
    pub fn new(g0: ChebCoeffs, g1: ChebCoeffs) -> Result<Self> {
        if g0.len() != g1.len() {
            return Err(SloshError::LengthMismatch {
                left: g0.len(),
                right: g1.len(),
            });
        }
        Ok(Self { g0, g1 })
    }

    pub fn zeros(size: usize) -> Self {
        Self {
            g0: ChebCoeffs::zeros(size),
            g1: ChebCoeffs::zeros(size),
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            g0: self.g0.scaled(alpha),
            g1: self.g1.scaled(alpha),
        }
    }

    /// The terminal state reached by a forward run.
    pub fn from_state(state: &WaveState) -> Self {
        Self {
            g0: state.a.clone(),
            g1: state.adot.clone(),
        }
    }
}

/// Backward field `z_k`, `k = 0..K`, on the solver time grid. Interior samples
/// are second-order accurate; the two end samples carry the adjacent
/// half-step value, so they are first-order accurate.
#[derive(Debug, Clone)]
pub struct AdjointTrajectory {
    pub times: Vec<f64>,
    pub z: Vec<ChebCoeffs>,
}

/// Forward scheme from zero data with per-node loads, and its transpose.
struct DiscreteDynamics<'a> {
    prop: Propagator<'a>,
    steps: usize,
    dt: f64,
}

impl<'a> DiscreteDynamics<'a> {
    fn new(sys: &'a GalerkinSystem, horizon: f64, dt: f64) -> Result<Self> {
        let (steps, dt) = step_count(horizon, dt)?;
        Ok(Self {
            prop: Propagator::new(sys, dt, Integrator::ImplicitMidpoint)?,
            steps,
            dt,
        })
    }

    fn sys(&self) -> &GalerkinSystem {
        self.prop.system()
    }

    fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| k as f64 * self.dt).collect()
    }

    /// Terminal `(a_K, ȧ_K)` from `(a_0, ȧ_0)` under loads `b_k`, `k = 0..K`.
    fn forward(
        &self,
        a0: DVector<f64>,
        p0: DVector<f64>,
        loads: &[DVector<f64>],
    ) -> (DVector<f64>, DVector<f64>) {
        let sys = self.sys();
        let dt = self.dt;
        let (mut a, mut p) = (a0, p0);
        for n in 0..self.steps {
            let mut rhs = sys.mass() * &p * 2.0 - sys.stiffness().component_mul(&a) * dt;
            if !loads.is_empty() {
                rhs += (&loads[n] + &loads[n + 1]) * (0.5 * dt);
            }
            let q = self.prop.solve_midpoint(&rhs);
            a += &q * (0.5 * dt);
            p = q - p;
        }
        (a, p)
    }

    /// Sensitivities `∂ℓ/∂b_k` of the terminal functional
    /// `ℓ = λ_aᵀ a_K + λ_pᵀ ȧ_K`, by reverse sweep through the midpoint steps.
    fn adjoint(&self, lambda_a: DVector<f64>, lambda_p: DVector<f64>) -> Vec<DVector<f64>> {
        let sys = self.sys();
        let dt = self.dt;
        let size = sys.size();
        let (mut la, mut lp) = (lambda_a, lambda_p);
        let mut lb = vec![DVector::zeros(size); self.steps + 1];
        for n in (0..self.steps).rev() {
            let lq = &la * (0.5 * dt) + &lp;
            let lr = self.prop.solve_midpoint(&lq);
            let lbeta = &lr * dt;
            lb[n] += &lbeta * 0.5;
            lb[n + 1] += &lbeta * 0.5;
            la -= sys.stiffness().component_mul(&lr) * dt;
            lp = sys.mass() * &lr * 2.0 - lp;
        }
        lb
    }
}

fn to_vector(c: &ChebCoeffs) -> DVector<f64> {
    DVector::from_column_slice(c.as_slice())
}

fn to_coeffs(v: &DVector<f64>) -> Result<ChebCoeffs> {
    ChebCoeffs::new(v.iter().copied().collect())
}

/// Integrate the adjoint system `z_tt + 𝓐z = 0`, `z(T) = g_0`, `z_t(T) = −g_1`
/// backward as the transpose of the forward scheme.
pub fn solve_adjoint(
    target: &TargetState,
    horizon: f64,
    dt: f64,
    sys: &GalerkinSystem,
) -> Result<AdjointTrajectory> {
    sys.check_len(&target.g0)?;
    sys.check_len(&target.g1)?;
    let dynamics = DiscreteDynamics::new(sys, horizon, dt)?;
    let lambda_a = sys.mass() * to_vector(&target.g1);
    let lambda_p = sys.mass() * to_vector(&target.g0);
    let lb = dynamics.adjoint(lambda_a, lambda_p);
    let tau = trapezoid(dynamics.steps, dynamics.dt);
    let z = lb
        .iter()
        .zip(&tau)
        .map(|(l, t)| to_coeffs(&(l / *t)))
        .collect::<Result<Vec<_>>>()?;
    Ok(AdjointTrajectory {
        times: dynamics.times(),
        z,
    })
}

fn relative_gap(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}

/// Both sides of the duality identity, from zero initial data:
/// `(Σ_k τ_k (z_k, v_k)_{L²}, (g_0, φ_t(T))_{L²} + (g_1, φ(T))_{L²})`.
pub fn duality_sides(
    v: &ControlSignal,
    target: &TargetState,
    horizon: f64,
    dt: f64,
    sys: &GalerkinSystem,
) -> Result<(f64, f64)> {
    let (steps, dt_eff) = step_count(horizon, dt)?;
    if v.grid().size() != sys.size() {
        return Err(SloshError::GridMismatch(format!(
            "control on {} nodes, system of size {}",
            v.grid().size(),
            sys.size()
        )));
    }
    if v.steps() != steps || (v.dt() - dt_eff).abs() > 1e-9 * dt_eff {
        return Err(SloshError::GridMismatch(format!(
            "control has {} steps of {}, solver uses {steps} of {dt_eff}",
            v.steps(),
            v.dt()
        )));
    }
    let adj = solve_adjoint(target, horizon, dt, sys)?;
    let grid = v.grid();
    let fejer = grid.fejer_weights();
    let tau = trapezoid(steps, dt_eff);
    let lhs = ordered_sum(
        adj.z
            .iter()
            .zip(v.values())
            .zip(&tau)
            .map(|((z, row), tk)| {
                let zx = crate::chebyshev::to_grid(z, grid);
                tk * ordered_sum(
                    zx.values()
                        .iter()
                        .zip(row)
                        .zip(&fejer)
                        .map(|((a, b), w)| a * b * w),
                )
            }),
    );
    let traj = simulate(
        &WaveState::zeros(sys.size()),
        horizon,
        dt,
        &RhsSpec::Source(v.clone()),
        sys,
    )?;
    let end = traj.last();
    let rhs = inner_l2(&target.g0, &end.adot)? + inner_l2(&target.g1, &end.a)?;
    Ok((lhs, rhs))
}

/// `|LHS − RHS| / max(|LHS|, |RHS|)` for the duality identity; zero when both
/// sides vanish.
pub fn duality_gap(
    v: &ControlSignal,
    target: &TargetState,
    horizon: f64,
    dt: f64,
    sys: &GalerkinSystem,
) -> Result<f64> {
    let (lhs, rhs) = duality_sides(v, target, horizon, dt, sys)?;
    Ok(relative_gap(lhs, rhs))
}

/// Diagonal Gram weights of the `H^{1/2}_{w⁻¹}` inner product in coefficients:
/// `π` for `n = 0`, `(π/2)(1 + n)` otherwise.
pub fn h12_weights(size: usize) -> Vec<f64> {
    (0..size)
        .map(|n| {
            if n == 0 {
                PI
            } else {
                0.5 * PI * (1.0 + n as f64)
            }
        })
        .collect()
}

/// One record per Krylov iteration; iteration 0 is the starting guess `v = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Least-squares residual `√(2J)`.
    pub residual: f64,
    /// `‖∇J‖` in the control inner product.
    pub gradient: f64,
    pub objective: f64,
    pub misfit: f64,
}

#[derive(Debug, Clone)]
pub struct ControlResult {
    pub signal: ControlSignal,
    /// Terminal misfit in `H^{1/2}_{w⁻¹} × L²`, from a fresh forward solve.
    pub misfit: f64,
    pub log: Vec<IterationRecord>,
    pub converged: bool,
    /// Free evolution of the initial state, subtracted from the target.
    pub free_terminal: WaveState,
}

impl ControlResult {
    pub fn iterations(&self) -> usize {
        self.log.last().map_or(0, |r| r.iteration)
    }

    /// The accuracy actually reached, `‖[φ(T),φ_t(T)] − [g_0,g_1]‖`.
    pub fn achieved_eps(&self) -> f64 {
        self.misfit
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    pub eps: f64,
    pub reg: f64,
    pub max_iter: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            reg: 0.0,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Control-to-terminal-state map restricted to a window, with the quadratic
/// objective and its adjoint gradient. Controls are flat vectors indexed
/// `k * active + i` over time samples `k` and active window nodes `i`.
pub struct ControlProblem<'a> {
    dynamics: DiscreteDynamics<'a>,
    window: ControlWindow,
    horizon: f64,
    /// `T_m(x_j)` for active nodes, `size × active`.
    basis: DMatrix<f64>,
    fejer: Vec<f64>,
    /// `(π/N)(1 − x_j²)` for active nodes.
    space_weight: Vec<f64>,
    tau: Vec<f64>,
    h12: DVector<f64>,
}

impl<'a> ControlProblem<'a> {
    pub fn new(
        sys: &'a GalerkinSystem,
        window: &ControlWindow,
        horizon: f64,
        dt: f64,
    ) -> Result<Self> {
        if window.grid.size() != sys.size() {
            return Err(SloshError::GridMismatch(format!(
                "window on {} nodes, system of size {}",
                window.grid.size(),
                sys.size()
            )));
        }
        let dynamics = DiscreteDynamics::new(sys, horizon, dt)?;
        let grid = &window.grid;
        let all_fejer = grid.fejer_weights();
        let active = &window.active;
        let basis = DMatrix::from_fn(sys.size(), active.len(), |m, i| {
            (m as f64 * grid.angles()[active[i]]).cos()
        });
        let fejer = active.iter().map(|&j| all_fejer[j]).collect();
        let scale = PI / grid.size() as f64;
        let space_weight = active
            .iter()
            .map(|&j| scale * grid.weights()[j] * grid.weights()[j])
            .collect();
        let tau = trapezoid(dynamics.steps, dynamics.dt);
        Ok(Self {
            h12: DVector::from_vec(h12_weights(sys.size())),
            dynamics,
            window: window.clone(),
            horizon,
            basis,
            fejer,
            space_weight,
            tau,
        })
    }

    pub fn steps(&self) -> usize {
        self.dynamics.steps
    }

    pub fn dt(&self) -> f64 {
        self.dynamics.dt
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn window(&self) -> &ControlWindow {
        &self.window
    }

    fn active(&self) -> usize {
        self.window.active.len()
    }

    /// Number of control unknowns.
    pub fn dim(&self) -> usize {
        (self.steps() + 1) * self.active()
    }

    fn sys(&self) -> &GalerkinSystem {
        self.dynamics.sys()
    }

    /// `⟨u, v⟩` in `L²(0,T;L²_w)` restricted to the window.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let active = self.active();
        ordered_sum(self.tau.iter().enumerate().map(|(k, tk)| {
            tk * ordered_sum(
                (0..active).map(|i| self.space_weight[i] * u[k * active + i] * v[k * active + i]),
            )
        }))
    }

    fn loads(&self, v: &[f64]) -> Vec<DVector<f64>> {
        let active = self.active();
        (0..=self.steps())
            .map(|k| {
                let weighted = DVector::from_iterator(
                    active,
                    (0..active).map(|i| self.fejer[i] * v[k * active + i]),
                );
                &self.basis * weighted
            })
            .collect()
    }

    /// Terminal state `(a_K, ȧ_K)` from zero data.
    fn terminal(&self, v: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let size = self.sys().size();
        self.dynamics
            .forward(DVector::zeros(size), DVector::zeros(size), &self.loads(v))
    }

    /// Riesz-mapped transpose: the control-space vector `G` with
    /// `⟨G, v⟩ = λ_aᵀ a_K(v) + λ_pᵀ ȧ_K(v)` for every `v`.
    fn transpose(&self, lambda_a: DVector<f64>, lambda_p: DVector<f64>) -> Vec<f64> {
        let lb = self.dynamics.adjoint(lambda_a, lambda_p);
        let active = self.active();
        let mut out = vec![0.0; self.dim()];
        for (k, l) in lb.iter().enumerate() {
            let sampled = self.basis.tr_mul(l);
            for i in 0..active {
                out[k * active + i] =
                    self.fejer[i] * sampled[i] / (self.tau[k] * self.space_weight[i]);
            }
        }
        out
    }

    fn misfit_parts(
        &self,
        a: &DVector<f64>,
        p: &DVector<f64>,
        target: &(DVector<f64>, DVector<f64>),
    ) -> (DVector<f64>, DVector<f64>, f64) {
        let e0 = a - &target.0;
        let e1 = p - &target.1;
        let w0 = self.h12.component_mul(&e0);
        let w1 = self.sys().mass() * &e1;
        let sq = e0.dot(&w0) + e1.dot(&w1);
        (w0, w1, sq.max(0.0).sqrt())
    }

    fn target_vectors(&self, target: &TargetState) -> Result<(DVector<f64>, DVector<f64>)> {
        self.sys().check_len(&target.g0)?;
        self.sys().check_len(&target.g1)?;
        Ok((to_vector(&target.g0), to_vector(&target.g1)))
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() == self.dim() {
            Ok(())
        } else {
            Err(SloshError::LengthMismatch {
                left: v.len(),
                right: self.dim(),
            })
        }
    }

    /// `J(v)` for zero initial data.
    pub fn objective(&self, v: &[f64], target: &TargetState, reg: f64) -> Result<f64> {
        self.check_dim(v)?;
        let g = self.target_vectors(target)?;
        let (a, p) = self.terminal(v);
        let (_, _, misfit) = self.misfit_parts(&a, &p, &g);
        Ok(0.5 * misfit * misfit + 0.5 * reg * self.inner(v, v))
    }

    /// Terminal misfit `‖S v − g‖` for zero initial data.
    pub fn misfit(&self, v: &[f64], target: &TargetState) -> Result<f64> {
        self.check_dim(v)?;
        let g = self.target_vectors(target)?;
        let (a, p) = self.terminal(v);
        Ok(self.misfit_parts(&a, &p, &g).2)
    }

    /// `∇J(v)` in the control inner product.
    pub fn gradient(&self, v: &[f64], target: &TargetState, reg: f64) -> Result<Vec<f64>> {
        self.check_dim(v)?;
        let g = self.target_vectors(target)?;
        let (a, p) = self.terminal(v);
        let (w0, w1, _) = self.misfit_parts(&a, &p, &g);
        let mut grad = self.transpose(w0, w1);
        grad.iter_mut().zip(v).for_each(|(gr, vi)| *gr += reg * vi);
        Ok(grad)
    }

    /// `v ↦ (V⁻¹SᵀWS + reg) v`, returning the image and `S v`.
    fn normal(&self, v: &[f64], reg: f64) -> (Vec<f64>, (DVector<f64>, DVector<f64>)) {
        let (a, p) = self.terminal(v);
        let w0 = self.h12.component_mul(&a);
        let w1 = self.sys().mass() * &p;
        let mut out = self.transpose(w0, w1);
        out.iter_mut().zip(v).for_each(|(o, vi)| *o += reg * vi);
        (out, (a, p))
    }

    /// Expand a flat control into a [`ControlSignal`] on the full grid.
    pub fn to_signal(&self, v: &[f64]) -> Result<ControlSignal> {
        self.check_dim(v)?;
        let size = self.sys().size();
        let active = self.active();
        let values = (0..=self.steps())
            .map(|k| {
                let mut row = vec![0.0; size];
                for (i, &j) in self.window.active.iter().enumerate() {
                    row[j] = v[k * active + i];
                }
                row
            })
            .collect();
        let times = self.dynamics.times();
        ControlSignal::new(times, &self.window, values)
    }

    /// Restrict a [`ControlSignal`] to the flat window layout.
    pub fn from_signal(&self, signal: &ControlSignal) -> Result<Vec<f64>> {
        if signal.steps() != self.steps() || signal.grid().size() != self.sys().size() {
            return Err(SloshError::GridMismatch(format!(
                "signal with {} steps on {} nodes, problem with {} steps on {} nodes",
                signal.steps(),
                signal.grid().size(),
                self.steps(),
                self.sys().size()
            )));
        }
        let inside = self.window.indicator();
        let mut flat = Vec::with_capacity(self.dim());
        for row in signal.values() {
            for (j, v) in row.iter().enumerate() {
                if inside[j] != 0.0 {
                    flat.push(*v);
                } else if *v != 0.0 {
                    return Err(SloshError::InvalidParameter(
                        "signal support exceeds the problem window".into(),
                    ));
                }
            }
        }
        Ok(flat)
    }

    /// Random control supported on the window, entries uniform in `[−1, 1]`.
    pub fn random_control(&self, rng: &mut impl Rng) -> Vec<f64> {
        (0..self.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    /// Conjugate-gradient minimization of `J` from `v = 0` towards the
    /// reduced target `g`, stopping once the misfit drops to `eps`. This is CG
    /// on the normal equations, so each iterate minimizes `J` over its Krylov
    /// space and the least-squares residual `√(2J)` never increases. Residuals
    /// are kept mutually orthogonal by explicit reorthogonalization, which the
    /// badly conditioned control Gramian needs for CG to keep its exact
    /// arithmetic behaviour. Once round-off dominates, a step that would raise
    /// `J` is discarded and the run ends.
    pub fn minimize(
        &self,
        target: &TargetState,
        opts: &SynthesisOptions,
    ) -> Result<(Vec<f64>, Vec<IterationRecord>, bool)> {
        if !(opts.reg.is_finite() && opts.reg >= 0.0) {
            return Err(SloshError::InvalidParameter(format!(
                "regularization must be non-negative, got {}",
                opts.reg
            )));
        }
        if !(opts.eps.is_finite() && opts.eps > 0.0) {
            return Err(SloshError::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                opts.eps
            )));
        }
        let g = self.target_vectors(target)?;
        let size = self.sys().size();
        let reg = opts.reg;

        let mut x = vec![0.0; self.dim()];
        let (mut sx_a, mut sx_p) = (DVector::zeros(size), DVector::zeros(size));
        let mut r = self.transpose(self.h12.component_mul(&g.0), self.sys().mass() * &g.1);
        let mut p = r.clone();
        let mut rr = self.inner(&r, &r);
        let rr0 = rr;
        let mut basis: Vec<Vec<f64>> = Vec::new();

        let record = |iteration: usize, misfit: f64, x: &[f64], rr: f64| {
            let objective = 0.5 * misfit * misfit + 0.5 * reg * self.inner(x, x);
            IterationRecord {
                iteration,
                residual: (2.0 * objective).sqrt(),
                gradient: rr.sqrt(),
                objective,
                misfit,
            }
        };
        let misfit0 = self.misfit_parts(&sx_a, &sx_p, &g).2;
        let mut log = vec![record(0, misfit0, &x, rr)];
        if misfit0 <= opts.eps {
            return Ok((x, log, true));
        }
        let mut converged = false;
        for it in 1..=opts.max_iter {
            let (ap, (sp_a, sp_p)) = self.normal(&p, reg);
            let pap = self.inner(&p, &ap);
            if !(pap > 0.0 && rr > 0.0) {
                break;
            }
            let alpha = rr / pap;
            let previous = x.clone();
            x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
            basis.push(r.iter().map(|ri| ri / rr.sqrt()).collect());
            r.iter_mut()
                .zip(&ap)
                .for_each(|(ri, api)| *ri -= alpha * api);
            for _ in 0..2 {
                for q in &basis {
                    let c = self.inner(&r, q);
                    r.iter_mut().zip(q).for_each(|(ri, qi)| *ri -= c * qi);
                }
            }
            sx_a += &sp_a * alpha;
            sx_p += &sp_p * alpha;
            let rr_new = self.inner(&r, &r);
            let misfit = self.misfit_parts(&sx_a, &sx_p, &g).2;
            let rec = record(it, misfit, &x, rr_new);
            // J must decrease along CG; a rise means round-off has taken over
            if rec.objective > log[log.len() - 1].objective {
                x = previous;
                break;
            }
            log.push(rec);
            if misfit <= opts.eps {
                converged = true;
                break;
            }
            if rr_new <= STAGNATION * STAGNATION * rr0 {
                break;
            }
            let beta = rr_new / rr;
            rr = rr_new;
            p.iter_mut()
                .zip(&r)
                .for_each(|(pi, ri)| *pi = ri + beta * *pi);
        }
        Ok((x, log, converged))
    }
}

/// Synthesize `v` on `window` driving `init` to within `eps` of `target` at
/// time `horizon`. By linearity the free evolution of `init` is subtracted
/// from the target and the control problem is solved from zero data.
pub fn synthesize(
    init: &WaveState,
    target: &TargetState,
    window: &ControlWindow,
    horizon: f64,
    dt: f64,
    opts: &SynthesisOptions,
    sys: &GalerkinSystem,
) -> Result<ControlResult> {
    sys.check_len(&init.a)?;
    let problem = ControlProblem::new(sys, window, horizon, dt)?;
    let free = problem
        .dynamics
        .forward(to_vector(&init.a), to_vector(&init.adot), &[]);
    let free_terminal = WaveState::new(init.t + horizon, to_coeffs(&free.0)?, to_coeffs(&free.1)?)?;
    let reduced = TargetState::new(
        target.g0.axpy(-1.0, &free_terminal.a)?,
        target.g1.axpy(-1.0, &free_terminal.adot)?,
    )?;
    let (v, log, converged) = problem.minimize(&reduced, opts)?;
    let misfit = problem.misfit(&v, &reduced)?;
    Ok(ControlResult {
        signal: problem.to_signal(&v)?,
        misfit,
        log,
        converged: converged || misfit <= opts.eps,
        free_terminal,
    })
}

/// Largest relative discrepancy between `⟨∇J(v), d⟩` and the central
/// difference `(J(v + εd) − J(v − εd)) / 2ε` over ten seeded random directions
/// supported on the window.
pub fn gradient_check(
    v: &ControlSignal,
    target: &TargetState,
    horizon: f64,
    dt: f64,
    reg: f64,
    sys: &GalerkinSystem,
) -> Result<f64> {
    let problem = ControlProblem::new(sys, v.window(), horizon, dt)?;
    let flat = problem.from_signal(v)?;
    let grad = problem.gradient(&flat, target, reg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5105_4c0d);
    let directions: Vec<Vec<f64>> = (0..10).map(|_| problem.random_control(&mut rng)).collect();
    let vmax = flat.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let errors = map_range(directions.len(), |i| -> Result<f64> {
        let d = &directions[i];
        let h = 1e-3 * vmax;
        let shifted = |s: f64| -> Vec<f64> { flat.iter().zip(d).map(|(x, y)| x + s * y).collect() };
        let jp = problem.objective(&shifted(h), target, reg)?;
        let jm = problem.objective(&shifted(-h), target, reg)?;
        let fd = (jp - jm) / (2.0 * h);
        let ad = problem.inner(&grad, d);
        Ok(relative_gap(fd, ad))
    });
    errors
        .into_iter()
        .try_fold(0.0f64, |m, e| e.map(|e| m.max(e)))
}
