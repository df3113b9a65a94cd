//! Time integration of `φ_tt + 𝓐φ = f` in Galerkin form `M ä + D a = b(t, a)`.
//!
//! The default scheme is the implicit midpoint rule. Writing
//! `q = ȧ_n + ȧ_{n+1}`, one step solves
//! `(M + dt²/4 D) q = 2M ȧ_n + dt (b_{n+½} − D a_n)` and sets
//! `a_{n+1} = a_n + dt/2 q`, `ȧ_{n+1} = q − ȧ_n`. For linear right-hand sides
//! this conserves `ȧᵀMȧ + aᵀDa` exactly; a Lipschitz nonlinearity is resolved
//! by fixed-point iteration on `q`. Störmer–Verlet is available as an explicit
//! cross-check under the usual stability limit `dt √λ_max ≤ 2`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DVector, Dyn};

use crate::chebyshev::{to_coeffs, to_grid, ChebCoeffs, GridFunction};
use crate::control::ControlSignal;
use crate::elliptic::{max_eigenvalue, GalerkinSystem};
use crate::error::{check_finite, Result, SloshError};
use crate::operator::{inner_l2, quadform_a};

const FIXED_POINT_TOL: f64 = 1e-12;
const FIXED_POINT_MAX_ITER: usize = 50;

/// `[φ, φ_t]` at time `t`, in coefficient form.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub t: f64,
    pub a: ChebCoeffs,
    pub adot: ChebCoeffs,
}

impl WaveState {
    pub fn new(t: f64, a: ChebCoeffs, adot: ChebCoeffs) -> Result<Self> {
        if a.len() != adot.len() {
            return Err(SloshError::LengthMismatch {
                left: a.len(),
                right: adot.len(),
            });
        }
        check_finite(&[t])?;
        Ok(Self { t, a, adot })
    }

    pub fn zeros(size: usize) -> Self {
        Self {
            t: 0.0,
            a: ChebCoeffs::zeros(size),
            adot: ChebCoeffs::zeros(size),
        }
    }

    /// Displacement `a` with zero velocity at `t = 0`.
    pub fn at_rest(a: ChebCoeffs) -> Self {
        let size = a.len();
        Self {
            t: 0.0,
            a,
            adot: ChebCoeffs::zeros(size),
        }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Max-norm distance between the coefficient pairs.
    pub fn distance(&self, other: &Self) -> f64 {
        let d = |x: &ChebCoeffs, y: &ChebCoeffs| {
            x.as_slice()
                .iter()
                .zip(y.as_slice())
                .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
        };
        d(&self.a, &other.a).max(d(&self.adot, &other.adot))
    }
}

/// Pointwise nonlinearity `f(φ)` with `|f(s)| ≤ c|s|`.
#[derive(Clone)]
pub struct LipschitzRhs {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    constant: f64,
}

impl LipschitzRhs {
    /// Wraps `f`, spot-checking the growth bound on a sample of `[−10, 10]`.
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, constant: f64) -> Result<Self> {
        if !(constant.is_finite() && constant >= 0.0) {
            return Err(SloshError::InvalidParameter(format!(
                "Lipschitz constant must be finite and non-negative, got {constant}"
            )));
        }
        for i in 0..=400 {
            let s = -10.0 + 0.05 * i as f64;
            let v = f(s);
            if !v.is_finite() || v.abs() > constant * s.abs() * (1.0 + 1e-12) + 1e-300 {
                return Err(SloshError::InvalidParameter(format!(
                    "|f({s})| = {} exceeds c|s| with c = {constant}",
                    v.abs()
                )));
            }
        }
        Ok(Self {
            f: Arc::new(f),
            constant,
        })
    }

    /// `f(s) = c·s`.
    pub fn linear(c: f64) -> Result<Self> {
        Self::new(move |s| c * s, c.abs())
    }

    /// `f(s) = c·sin s`.
    pub fn sine(c: f64) -> Result<Self> {
        Self::new(move |s| c * s.sin(), c.abs())
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.f)(s)
    }
}

impl fmt::Debug for LipschitzRhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LipschitzRhs")
            .field("constant", &self.constant)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum RhsSpec {
    Zero,
    Lipschitz(LipschitzRhs),
    Source(ControlSignal),
}

/// `E_total = ∫φ² + ∫φ_t² + (𝓐φ,φ)` and the conserved part `∫φ_t² + (𝓐φ,φ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub t: f64,
    pub total: f64,
    pub conserved: f64,
}

pub fn energy(state: &WaveState) -> Result<EnergyRecord> {
    let potential = quadform_a(&state.a, &state.a)?;
    let kinetic = inner_l2(&state.adot, &state.adot)?;
    let displacement = inner_l2(&state.a, &state.a)?;
    Ok(EnergyRecord {
        t: state.t,
        total: displacement + kinetic + potential,
        conserved: kinetic + potential,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Integrator {
    #[default]
    ImplicitMidpoint,
    StormerVerlet,
}

/// A fixed-step integrator bound to one system and step size. Factorizations
/// are computed once; a negative `dt` integrates backward.
pub struct Propagator<'a> {
    sys: &'a GalerkinSystem,
    dt: f64,
    integrator: Integrator,
    midpoint: Cholesky<f64, Dyn>,
    mass: Cholesky<f64, Dyn>,
}

impl<'a> Propagator<'a> {
    pub fn new(sys: &'a GalerkinSystem, dt: f64, integrator: Integrator) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(SloshError::InvalidParameter(format!(
                "time step must be finite and non-zero, got {dt}"
            )));
        }
        if integrator == Integrator::StormerVerlet {
            let omega = max_eigenvalue(sys)?.sqrt();
            if dt.abs() * omega > 2.0 {
                return Err(SloshError::InvalidParameter(format!(
                    "explicit step unstable: dt·√λ_max = {:.3} > 2",
                    dt.abs() * omega
                )));
            }
        }
        let quarter = 0.25 * dt * dt;
        let mut a = sys.mass().clone();
        for (n, d) in sys.stiffness().iter().enumerate() {
            a[(n, n)] += quarter * d;
        }
        let midpoint = Cholesky::new(a).ok_or_else(|| {
            SloshError::LinearSolve("M + dt²/4 D is not positive definite".into())
        })?;
        let mass = Cholesky::new(sys.mass().clone()).ok_or_else(|| {
            SloshError::LinearSolve("mass matrix is not positive definite".into())
        })?;
        Ok(Self {
            sys,
            dt,
            integrator,
            midpoint,
            mass,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn system(&self) -> &GalerkinSystem {
        self.sys
    }

    /// Solve `(M + dt²/4 D) x = rhs`.
    pub(crate) fn solve_midpoint(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.midpoint.solve(rhs)
    }

    fn source_load(&self, signal: &ControlSignal, t: f64) -> Result<DVector<f64>> {
        if signal.grid().size() != self.sys.size() {
            return Err(SloshError::GridMismatch(format!(
                "control signal on {} nodes, system of size {}",
                signal.grid().size(),
                self.sys.size()
            )));
        }
        Ok(DVector::from_vec(signal.load_at(t)))
    }

    fn nonlinear_load(&self, f: &LipschitzRhs, a: &DVector<f64>) -> Result<DVector<f64>> {
        let grid = self.sys.grid();
        let phi = to_grid(&ChebCoeffs::new(a.iter().copied().collect())?, grid);
        let values: Vec<f64> = phi.values().iter().map(|&s| f.eval(s)).collect();
        let projected = to_coeffs(&GridFunction::new(grid, values)?);
        Ok(self.sys.mass() * DVector::from_column_slice(projected.as_slice()))
    }

    pub fn step(&self, state: &WaveState, rhs: &RhsSpec) -> Result<WaveState> {
        self.sys.check_len(&state.a)?;
        self.sys.check_len(&state.adot)?;
        let a = DVector::from_column_slice(state.a.as_slice());
        let p = DVector::from_column_slice(state.adot.as_slice());
        let (a_next, p_next) = match self.integrator {
            Integrator::ImplicitMidpoint => self.midpoint_step(state.t, &a, &p, rhs)?,
            Integrator::StormerVerlet => self.verlet_step(state.t, &a, &p, rhs)?,
        };
        WaveState::new(
            state.t + self.dt,
            ChebCoeffs::new(a_next.iter().copied().collect())?,
            ChebCoeffs::new(p_next.iter().copied().collect())?,
        )
    }

    fn midpoint_step(
        &self,
        t: f64,
        a: &DVector<f64>,
        p: &DVector<f64>,
        rhs: &RhsSpec,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let dt = self.dt;
        let stiff_a = self.sys.stiffness().component_mul(a);
        let base = self.sys.mass() * p * 2.0 - &stiff_a * dt;
        let q = match rhs {
            RhsSpec::Zero => self.solve_midpoint(&base),
            RhsSpec::Source(signal) => {
                let load = (self.source_load(signal, t)? + self.source_load(signal, t + dt)?) * 0.5;
                self.solve_midpoint(&(base + load * dt))
            }
            RhsSpec::Lipschitz(f) => {
                let mut q = self.solve_midpoint(&base);
                let mut residual = f64::INFINITY;
                let mut converged = false;
                for _ in 0..FIXED_POINT_MAX_ITER {
                    let mid = a + &q * (0.25 * dt);
                    let load = self.nonlinear_load(f, &mid)?;
                    let next = self.solve_midpoint(&(&base + load * dt));
                    residual = (&next - &q).amax();
                    let scale = next.amax().max(1.0);
                    q = next;
                    if residual <= FIXED_POINT_TOL * scale {
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    return Err(SloshError::StepFailure {
                        t,
                        residual,
                        iterations: FIXED_POINT_MAX_ITER,
                    });
                }
                q
            }
        };
        let a_next = a + &q * (0.5 * dt);
        let p_next = q - p;
        Ok((a_next, p_next))
    }

    fn verlet_step(
        &self,
        t: f64,
        a: &DVector<f64>,
        p: &DVector<f64>,
        rhs: &RhsSpec,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let dt = self.dt;
        let force = |a: &DVector<f64>, t: f64| -> Result<DVector<f64>> {
            let mut load = match rhs {
                RhsSpec::Zero => DVector::zeros(a.len()),
                RhsSpec::Source(signal) => self.source_load(signal, t)?,
                RhsSpec::Lipschitz(f) => self.nonlinear_load(f, a)?,
            };
            load -= self.sys.stiffness().component_mul(a);
            Ok(self.mass.solve(&load))
        };
        let half = p + force(a, t)? * (0.5 * dt);
        let a_next = a + &half * dt;
        let p_next = &half + force(&a_next, t + dt)? * (0.5 * dt);
        Ok((a_next, p_next))
    }
}

/// One implicit-midpoint step.
pub fn step(state: &WaveState, dt: f64, rhs: &RhsSpec, sys: &GalerkinSystem) -> Result<WaveState> {
    Propagator::new(sys, dt, Integrator::ImplicitMidpoint)?.step(state, rhs)
}

/// States and energies at every step, the initial state included.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<WaveState>,
    pub energies: Vec<EnergyRecord>,
}

impl Trajectory {
    pub fn last(&self) -> &WaveState {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }

    /// Largest relative deviation of the conserved energy from its initial value.
    pub fn conserved_drift(&self) -> f64 {
        let e0 = self.energies[0].conserved;
        let scale = if e0 > 0.0 { e0 } else { 1.0 };
        self.energies
            .iter()
            .fold(0.0f64, |m, e| m.max((e.conserved - e0).abs() / scale))
    }

    /// `max_{t>0} (ln E_total(t) − ln E_total(0)) / t`, the smallest exponent
    /// `C` with `E(t) ≤ E(0) e^{Ct}` along the run.
    pub fn growth_exponent(&self) -> f64 {
        let e0 = self.energies[0];
        self.energies
            .iter()
            .filter(|e| e.t > e0.t)
            .map(|e| (e.total.ln() - e0.total.ln()) / (e.t - e0.t))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Number of steps and the effective step for a horizon: `⌈T/dt⌉` steps of
/// size `T/⌈T/dt⌉`, so the run ends exactly at `T`.
pub fn step_count(horizon: f64, dt: f64) -> Result<(usize, f64)> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(SloshError::InvalidParameter(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(SloshError::InvalidParameter(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let steps = ((horizon / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    Ok((steps, horizon / steps as f64))
}

pub fn simulate(
    state0: &WaveState,
    horizon: f64,
    dt: f64,
    rhs: &RhsSpec,
    sys: &GalerkinSystem,
) -> Result<Trajectory> {
    simulate_with(state0, horizon, dt, rhs, sys, Integrator::ImplicitMidpoint)
}

pub fn simulate_with(
    state0: &WaveState,
    horizon: f64,
    dt: f64,
    rhs: &RhsSpec,
    sys: &GalerkinSystem,
    integrator: Integrator,
) -> Result<Trajectory> {
    let (steps, dt) = step_count(horizon, dt)?;
    let prop = Propagator::new(sys, dt, integrator)?;
    let mut states = Vec::with_capacity(steps + 1);
    let mut energies = Vec::with_capacity(steps + 1);
    states.push(state0.clone());
    energies.push(energy(state0)?);
    for k in 1..=steps {
        let mut next = prop.step(states.last().expect("non-empty"), rhs)?;
        // index-based time avoids drift from repeated addition
        next.t = state0.t + k as f64 * dt;
        energies.push(energy(&next)?);
        states.push(next);
    }
    Ok(Trajectory { states, energies })
}
