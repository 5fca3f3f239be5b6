//! Stationary and transient solvers for any [`GalerkinSystem`].

mod initial;
mod stationary;
mod transient;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galerkin::GalerkinSystem;

pub use initial::initial_data;
pub use stationary::{
    endpoint_pressures, solve_stationary, stationary_jacobian_apply, stationary_residual, steady_residual,
    NewtonReport,
};
pub use transient::{boundary_values, integrate, integrate_observed, midpoint_step, time_grid, StepReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50 }
    }
}

impl NewtonOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidOptions(format!("newton tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidOptions("newton max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeOptions {
    pub dt: f64,
    pub t_end: f64,
    pub sample_times: Vec<f64>,
}

impl Default for TimeOptions {
    fn default() -> Self {
        Self { dt: 0.01, t_end: 50.0, sample_times: vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0] }
    }
}

impl TimeOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidOptions(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidOptions(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if let Some(t) = self.sample_times.iter().find(|&&t| !(0.0..=self.t_end).contains(&t)) {
            return Err(Error::InvalidOptions(format!("sample time {t} outside [0, {}]", self.t_end)));
        }
        if self.sample_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidOptions("sample times must be strictly increasing".into()));
        }
        Ok(())
    }

    /// `count` equally spaced samples over `[0, t_end]`.
    pub fn uniform_samples(dt: f64, t_end: f64, count: usize) -> Self {
        let sample_times = match count {
            0 => Vec::new(),
            1 => vec![t_end],
            n => (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect(),
        };
        Self { dt, t_end, sample_times }
    }
}

/// Everything the solvers need besides the system itself.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverOptions {
    pub newton: NewtonOptions,
    pub time: TimeOptions,
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        self.newton.validate()?;
        self.time.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub p: DVector<f64>,
    pub m: DVector<f64>,
    pub t: f64,
}

impl State {
    pub fn zeros(sys: &dyn GalerkinSystem) -> Self {
        Self { p: DVector::zeros(sys.pressure_dim()), m: DVector::zeros(sys.flux_dim()), t: 0.0 }
    }

    pub fn deviation(&self, reference: &State) -> (DVector<f64>, DVector<f64>) {
        (&self.p - &reference.p, &self.m - &reference.m)
    }

    pub fn check_dims(&self, sys: &dyn GalerkinSystem) -> Result<()> {
        if self.p.len() != sys.pressure_dim() || self.m.len() != sys.flux_dim() {
            return Err(Error::DimensionMismatch(format!(
                "state ({}, {}) vs system ({}, {})",
                self.p.len(),
                self.m.len(),
                sys.pressure_dim(),
                sys.flux_dim()
            )));
        }
        Ok(())
    }
}

/// Time-invariant source terms `f` (pressure equation) and `g` (flux
/// equation) in the system's coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing {
    pub f: DVector<f64>,
    pub g: DVector<f64>,
}

impl Forcing {
    pub fn zero(sys: &dyn GalerkinSystem) -> Self {
        Self { f: DVector::zeros(sys.pressure_dim()), g: DVector::zeros(sys.flux_dim()) }
    }
}

/// Time derivatives `(dp/dt, dm/dt)` read off the semidiscrete equations.
pub fn time_derivative(
    sys: &dyn GalerkinSystem,
    damping: &crate::damping::DampingModel,
    forcing: &Forcing,
    state: &State,
    h: &[f64],
) -> (DVector<f64>, DVector<f64>) {
    let dp = sys.solve_pressure_mass(&(&forcing.f - sys.divergence(&state.m)));
    let rhs = sys.divergence_transpose(&state.p) - sys.damping_load(damping, &state.m) + &forcing.g - sys.boundary_load(h);
    (dp, sys.solve_flux_mass(&rhs))
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub dstates: Vec<(DVector<f64>, DVector<f64>)>,
    pub steps: usize,
    pub newton_iterations: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> Option<&State> {
        self.states.last()
    }
}
