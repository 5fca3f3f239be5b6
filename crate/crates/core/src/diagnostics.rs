//! Energies, decay-rate fits, a-priori bounds and the decay-table driver.

use std::sync::{Arc, OnceLock};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::damping::{Assumption1Report, DampingModel};
use crate::error::{Error, Result};
use crate::galerkin::{build_space, Discretization, GalerkinSystem, Operators};
use crate::mor::{build_reduced, collect_snapshots, ReducedModel};
use crate::netgraph::{BoundaryRamp, Network};
use crate::solvers::{
    boundary_values, integrate, solve_stationary, time_derivative, Forcing, SolverOptions, State, TimeOptions,
    Trajectory,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyNorm {
    /// Consistent mass matrices.
    #[default]
    Exact,
    /// Lumped flux mass, the norm dissipated by the scheme.
    Lumped,
}

pub fn energy(sys: &dyn GalerkinSystem, q: &nalgebra::DVector<f64>, v: &nalgebra::DVector<f64>, norm: EnergyNorm) -> f64 {
    match norm {
        EnergyNorm::Exact => sys.energy(q, v),
        EnergyNorm::Lumped => sys.discrete_energy(q, v),
    }
}

/// `E(p - p_ref, m - m_ref)`
pub fn state_energy(sys: &dyn GalerkinSystem, state: &State, reference: &State, norm: EnergyNorm) -> f64 {
    let (q, v) = state.deviation(reference);
    energy(sys, &q, &v, norm)
}

/// `E(dp/dt, dm/dt)` with the derivatives read off the semidiscrete equations.
pub fn derivative_energy(
    sys: &dyn GalerkinSystem,
    damping: &DampingModel,
    forcing: &Forcing,
    state: &State,
    h: &[f64],
    norm: EnergyNorm,
) -> f64 {
    let (dp, dm) = time_derivative(sys, damping, forcing, state, h);
    energy(sys, &dp, &dm, norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaFit {
    pub gamma: f64,
    /// `c` in `E(t) ~ c exp(-gamma t)`.
    pub constant: f64,
    pub samples: usize,
}

/// Least-squares slope of `-ln E` against `t` over the samples in `window`.
pub fn fit_gamma(times: &[f64], energies: &[f64], window: (f64, f64)) -> Result<GammaFit> {
    if times.len() != energies.len() {
        return Err(Error::Fit(format!("{} times for {} energies", times.len(), energies.len())));
    }
    let eps = 1e-12 * window.1.abs().max(1.0);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(energies)
        .filter(|(&t, _)| t >= window.0 - eps && t <= window.1 + eps)
        .map(|(&t, &e)| (t, e))
        .collect();
    if let Some((t, e)) = pts.iter().find(|(_, e)| !(*e > 0.0)) {
        return Err(Error::Fit(format!("nonpositive energy {e} at t = {t}")));
    }
    if pts.len() < 2 {
        return Err(Error::Fit(format!("{} samples in [{}, {}], need at least 2", pts.len(), window.0, window.1)));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1.ln() - ml)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all samples at the same time".into()));
    }
    let slope = sxy / sxx;
    Ok(GammaFit { gamma: -slope, constant: (ml - slope * mt).exp(), samples: pts.len() })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub sample_times: Vec<f64>,
    pub energies_state: Vec<f64>,
    pub energies_derivative: Vec<f64>,
    pub fit_window: (f64, f64),
    pub gamma: Option<f64>,
    pub constant: Option<f64>,
    pub gamma_derivative: Option<f64>,
    pub constant_derivative: Option<f64>,
}

impl DecayReport {
    pub fn new(
        sys: &dyn GalerkinSystem,
        trajectory: &Trajectory,
        steady: &State,
        window: (f64, f64),
        norm: EnergyNorm,
    ) -> DecayReport {
        let sample_times = trajectory.times();
        let energies_state: Vec<f64> = trajectory.states.iter().map(|s| state_energy(sys, s, steady, norm)).collect();
        let energies_derivative: Vec<f64> = trajectory.dstates.iter().map(|(dp, dm)| energy(sys, dp, dm, norm)).collect();
        let fit = fit_gamma(&sample_times, &energies_state, window).ok();
        let fit_d = fit_gamma(&sample_times, &energies_derivative, window).ok();
        DecayReport {
            sample_times,
            energies_state,
            energies_derivative,
            fit_window: window,
            gamma: fit.map(|f| f.gamma),
            constant: fit.map(|f| f.constant),
            gamma_derivative: fit_d.map(|f| f.gamma),
            constant_derivative: fit_d.map(|f| f.constant),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryBounds {
    pub applicable: bool,
    /// Flux bound with unit constant.
    pub m_bound: f64,
    pub p_bound: f64,
}

/// Stationary a-priori bounds for data norms `|f|`, `|g|` and `|h|_1`, with
/// the generic constant set to one. Not applicable without a positive `d0`.
pub fn lemma1_bounds(report: &Assumption1Report, f_norm: f64, g_norm: f64, h_abs: f64) -> StationaryBounds {
    if !(report.d0 > 0.0) {
        return StationaryBounds { applicable: false, m_bound: f64::NAN, p_bound: f64::NAN };
    }
    let p = report.growth_exponent;
    let m_bound = (g_norm + h_abs + report.d1 * f_norm + report.d2 * f_norm.powf(p + 1.0)) / report.d0 + f_norm;
    let p_bound = g_norm + h_abs + report.d1 * m_bound + report.d2 * m_bound.powf(p + 1.0);
    StationaryBounds { applicable: true, m_bound, p_bound }
}

/// Steady state for the final boundary data, initial state in equilibrium
/// with the data at `t = 0`, trajectory and decay report.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub initial: State,
    pub steady: State,
    pub trajectory: Trajectory,
    pub report: DecayReport,
}

pub fn run_experiment(
    sys: &dyn GalerkinSystem,
    damping: &DampingModel,
    ramps: &[BoundaryRamp],
    options: &SolverOptions,
    window: (f64, f64),
    norm: EnergyNorm,
) -> Result<Experiment> {
    let forcing = Forcing::zero(sys);
    let h0 = boundary_values(ramps, 0.0);
    let h_end: Vec<f64> = ramps.iter().map(|r| r.final_value()).collect();
    let (initial, _) = solve_stationary(sys, damping, &forcing, &h0, &options.newton)?;
    let (steady, _) = solve_stationary(sys, damping, &forcing, &h_end, &options.newton)?;
    let trajectory = integrate(sys, damping, &forcing, &initial, ramps, options)?;
    let report = DecayReport::new(sys, &trajectory, &steady, window, norm);
    Ok(Experiment { initial, steady, trajectory, report })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Table1Method {
    Fem { h: f64 },
    Spectral { order: usize },
    Pod { n_sv: usize },
}

impl Table1Method {
    pub fn label(&self) -> (&'static str, String) {
        match *self {
            Table1Method::Fem { h } => ("fem", format!("{h}")),
            Table1Method::Spectral { order } => ("spectral", order.to_string()),
            Table1Method::Pod { n_sv } => ("pod", n_sv.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingOptions {
    pub discretization: Discretization,
    /// Equally spaced snapshots over `[0, t_end]`.
    pub samples: usize,
}

impl Default for TrainingOptions {
    fn default() -> Self {
        Self { discretization: Discretization::Fem { h: 0.005 }, samples: 501 }
    }
}

#[derive(Debug, Clone)]
pub struct Table1Config {
    pub network: Network,
    pub damping: DampingModel,
    pub methods: Vec<Table1Method>,
    pub options: SolverOptions,
    pub fit_window: (f64, f64),
    pub norm: EnergyNorm,
    pub training: TrainingOptions,
    /// Worker threads for the rows; `None` uses the rayon default.
    pub threads: Option<usize>,
}

impl Table1Config {
    pub fn paper_defaults(network: Network) -> Self {
        Self {
            network,
            damping: DampingModel::quadratic(),
            methods: vec![
                Table1Method::Fem { h: 0.2 },
                Table1Method::Fem { h: 0.05 },
                Table1Method::Spectral { order: 3 },
                Table1Method::Spectral { order: 10 },
                Table1Method::Pod { n_sv: 2 },
                Table1Method::Pod { n_sv: 10 },
            ],
            options: SolverOptions::default(),
            fit_window: (10.0, 50.0),
            norm: EnergyNorm::Exact,
            training: TrainingOptions::default(),
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Row {
    pub method: String,
    pub param: String,
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub gamma: Option<f64>,
    pub gamma_derivative: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1 {
    pub rows: Vec<Table1Row>,
}

/// Full-order training run and its snapshots, shared by all reduced rows.
pub struct Training {
    pub operators: Arc<Operators>,
    pub snapshots: crate::mor::SnapshotSet,
}

pub fn train(network: &Network, damping: &DampingModel, options: &SolverOptions, training: &TrainingOptions) -> Result<Training> {
    let ops = Arc::new(Operators::assemble(&build_space(network, training.discretization)?)?);
    let mut opts = options.clone();
    opts.time = TimeOptions::uniform_samples(options.time.dt, options.time.t_end, training.samples);
    let ramps = network.ramps();
    let forcing = Forcing::zero(ops.as_ref());
    let h_end = network.final_boundary_values();
    let h0 = network.boundary_values(0.0);
    let (initial, _) = solve_stationary(ops.as_ref(), damping, &forcing, &h0, &opts.newton)?;
    let (steady, _) = solve_stationary(ops.as_ref(), damping, &forcing, &h_end, &opts.newton)?;
    let trajectory = integrate(ops.as_ref(), damping, &forcing, &initial, &ramps, &opts)?;
    let snapshots = collect_snapshots(&trajectory, &steady)?;
    Ok(Training { operators: ops, snapshots })
}

pub fn reduced_model(training: &Training, n_sv: usize) -> Result<ReducedModel> {
    build_reduced(training.operators.clone(), &training.snapshots, n_sv)
}

fn run_row(config: &Table1Config, method: Table1Method, training: &OnceLock<Result<Training>>) -> Result<Table1Row> {
    let start = Instant::now();
    let ramps = config.network.ramps();
    let run = |sys: &dyn GalerkinSystem| {
        run_experiment(sys, &config.damping, &ramps, &config.options, config.fit_window, config.norm)
    };
    let exp = match method {
        Table1Method::Fem { h } => run(&Operators::assemble(&build_space(&config.network, Discretization::Fem { h })?)?)?,
        Table1Method::Spectral { order } => {
            run(&Operators::assemble(&build_space(&config.network, Discretization::Spectral { order })?)?)?
        }
        Table1Method::Pod { n_sv } => {
            let t = training
                .get_or_init(|| train(&config.network, &config.damping, &config.options, &config.training))
                .as_ref()
                .map_err(|e| Error::Reduction(format!("training run failed: {e}")))?;
            run(&reduced_model(t, n_sv)?)?
        }
    };
    let (method_name, param) = method.label();
    Ok(Table1Row {
        method: method_name.into(),
        param,
        times: exp.report.sample_times.clone(),
        energies: exp.report.energies_state.clone(),
        gamma: exp.report.gamma,
        gamma_derivative: exp.report.gamma_derivative,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs every configured row, in parallel. The training run for reduced rows
/// is performed once.
pub fn run_table1(config: &Table1Config) -> Result<Table1> {
    config.options.validate()?;
    config.damping.validate()?;
    let training = OnceLock::new();
    if config.methods.iter().any(|m| matches!(m, Table1Method::Pod { .. })) {
        let _ = training.get_or_init(|| train(&config.network, &config.damping, &config.options, &config.training));
    }
    let work = || config.methods.par_iter().map(|&m| run_row(config, m, &training)).collect::<Result<Vec<_>>>();
    let rows = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    Ok(Table1 { rows })
}

/// `x` with `digits` significant digits, fixed notation where sensible.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&exponent) {
        return format!("{:.*e}", digits.saturating_sub(1), x);
    }
    let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding may add a digit (9.99995 -> 10.0000)
    let rounded: f64 = s.parse().unwrap_or(x);
    if rounded != 0.0 && rounded.abs().log10().floor() as i32 > exponent && decimals > 0 {
        format!("{:.*}", decimals - 1, x)
    } else {
        s
    }
}

fn time_label(t: f64) -> String {
    if t.fract() == 0.0 {
        format!("{}", t as i64)
    } else {
        format!("{t}")
    }
}

impl Table1 {
    /// `method,param,E<t>...,gamma` with 5 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,param");
        if let Some(first) = self.rows.first() {
            for &t in &first.times {
                out.push_str(&format!(",E{}", time_label(t)));
            }
        }
        out.push_str(",gamma\n");
        for row in &self.rows {
            out.push_str(&format!("{},{}", row.method, row.param));
            for &e in &row.energies {
                out.push(',');
                out.push_str(&format_significant(e, 5));
            }
            out.push(',');
            out.push_str(&row.gamma.map_or("nan".into(), |g| format_significant(g, 5)));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use nalgebra::DVector;

    use super::*;
    use crate::netgraph::single_pipe;
    use crate::solvers::{midpoint_step, NewtonOptions};

    fn pipe(h: f64) -> Operators {
        Operators::assemble(&build_space(&single_pipe(1.0, 1.0, 0.0), Discretization::Fem { h }).unwrap()).unwrap()
    }

    #[test]
    fn energy_of_unit_pressure() {
        let o = pipe(0.25);
        let q = DVector::from_element(o.pressure_dim(), 1.0);
        let v = DVector::zeros(o.flux_dim());
        assert!((energy(&o, &q, &v, EnergyNorm::Exact) - 0.5).abs() < 1e-14);
        assert_eq!(energy(&o, &(&q * 0.0), &v, EnergyNorm::Exact), 0.0);
        assert!((energy(&o, &(&q * 2.0), &v, EnergyNorm::Exact) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exact_exponential_fit() {
        let t: Vec<f64> = (0..=5).map(|k| 10.0 * k as f64).collect();
        let e: Vec<f64> = t.iter().map(|t| 5.0 * (-0.3 * t).exp()).collect();
        let fit = fit_gamma(&t, &e, (0.0, 50.0)).unwrap();
        assert!((fit.gamma - 0.3).abs() < 1e-12);
        assert!((fit.constant - 5.0).abs() < 1e-9);
        let scaled: Vec<f64> = e.iter().map(|x| 7.0 * x).collect();
        assert!((fit_gamma(&t, &scaled, (0.0, 50.0)).unwrap().gamma - 0.3).abs() < 1e-12);
    }

    #[test]
    fn printed_table_samples() {
        let t = [10.0, 20.0, 30.0, 40.0, 50.0];
        let e = [23.693, 6.943, 2.051, 0.607, 0.180];
        let g = fit_gamma(&t, &e, (10.0, 50.0)).unwrap().gamma;
        assert!((g - 0.122).abs() < 1e-3, "{g}");
        let two = fit_gamma(&[40.0, 50.0], &[0.607, 0.180], (10.0, 50.0)).unwrap().gamma;
        assert!((two - (0.607f64 / 0.180).ln() / 10.0).abs() < 1e-15);
    }

    #[test]
    fn fit_errors() {
        assert!(fit_gamma(&[10.0], &[1.0], (0.0, 50.0)).is_err());
        assert!(fit_gamma(&[10.0, 20.0], &[1.0, 0.0], (0.0, 50.0)).is_err());
        assert!(fit_gamma(&[1.0, 2.0], &[1.0, 0.5], (10.0, 50.0)).is_err());
    }

    #[test]
    fn derivative_energy_at_rest_with_boundary_push() {
        let o = pipe(0.1);
        let d = DampingModel::quadratic();
        let f = Forcing::zero(&o);
        let s = State::zeros(&o);
        let h = [1.0, 0.0];
        let e = derivative_energy(&o, &d, &f, &s, &h, EnergyNorm::Lumped);
        let bh = o.boundary_load(&h);
        let dm = o.solve_flux_mass(&bh);
        assert!((e - 0.5 * dm.dot(&bh)).abs() < 1e-12);
        // one small step of the integrator
        let dt = 1e-5;
        let mut jac = o.midpoint_jacobian(dt).unwrap();
        let nw = NewtonOptions { tol: 1e-13, max_iter: 20 };
        let (next, _) = midpoint_step(&o, jac.as_mut(), &d, &f, &s, dt, &h, &nw).unwrap();
        let fd = 0.5 * ((&next.m / dt).dot(&o.flux_mass(&(&next.m / dt))) + (&next.p / dt).dot(&o.pressure_mass(&(&next.p / dt))));
        assert!((fd - e).abs() < 1e-3 * e, "{fd} vs {e}");
    }

    #[test]
    fn derivative_energy_vanishes_at_steady_state() {
        let o = pipe(0.2);
        let d = DampingModel::quadratic();
        let f = Forcing::zero(&o);
        let (s, _) = solve_stationary(&o, &d, &f, &[1.0, 0.0], &NewtonOptions::default()).unwrap();
        assert!(derivative_energy(&o, &d, &f, &s, &[1.0, 0.0], EnergyNorm::Exact) < 1e-18);
    }

    #[test]
    fn stationary_bound_evaluation() {
        let lin = DampingModel::linear(1.0).check_assumption1(1.0);
        let b = lemma1_bounds(&lin, 0.0, 1.0, 0.0);
        assert!(b.applicable && b.m_bound == 1.0 && b.p_bound == 2.0);
        let z = lemma1_bounds(&lin, 0.0, 0.0, 0.0);
        assert_eq!((z.m_bound, z.p_bound), (0.0, 0.0));
        assert!(!lemma1_bounds(&DampingModel::quadratic().check_assumption1(1.0), 0.0, 1.0, 0.0).applicable);
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_significant(99.1924, 5), "99.192");
        assert_eq!(format_significant(0.18, 5), "0.18000");
        assert_eq!(format_significant(23.70951, 5), "23.710");
        assert_eq!(format_significant(9.99996, 5), "10.000");
        assert_eq!(format_significant(0.1216, 5), "0.12160");
        assert_eq!(format_significant(1.5e-7, 3), "1.50e-7");
    }
}
