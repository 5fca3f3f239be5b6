use nalgebra::DVector;

use super::{time_derivative, Forcing, NewtonOptions, SolverOptions, State, Trajectory};
use crate::damping::DampingModel;
use crate::error::{Error, Result};
use crate::galerkin::{GalerkinSystem, StepJacobian};
use crate::netgraph::BoundaryRamp;

/// Step times from `t0` to `t_end`. Every breakpoint (ramp kinks, sample
/// times) is hit exactly; between breakpoints the step is uniform and at
/// most `dt`.
pub fn time_grid(t0: f64, t_end: f64, dt: f64, breakpoints: &[f64]) -> Vec<f64> {
    let mut marks: Vec<f64> = breakpoints.iter().cloned().filter(|&t| t > t0 && t < t_end).collect();
    marks.push(t0);
    marks.push(t_end);
    marks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    marks.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_end.abs().max(1.0));
    let mut grid = vec![t0];
    for w in marks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let n = (((b - a) / dt) - 1e-9).ceil().max(1.0) as usize;
        for k in 1..=n {
            grid.push(if k == n { b } else { a + (b - a) * k as f64 / n as f64 });
        }
    }
    grid
}

#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    pub iterations: usize,
    pub residual: f64,
}

/// One implicit midpoint step of size `tau` from `state`, with the boundary
/// data `h_mid` at the midpoint time. The stage unknown is the midpoint flux
/// `m`; the midpoint pressure is eliminated through
/// `p_mid = p0 + tau/2 M_p^{-1} (f - G m)`.
#[allow(clippy::too_many_arguments)]
pub fn midpoint_step(
    sys: &dyn GalerkinSystem,
    jac: &mut dyn StepJacobian,
    damping: &DampingModel,
    forcing: &Forcing,
    state: &State,
    tau: f64,
    h_mid: &[f64],
    newton: &NewtonOptions,
) -> std::result::Result<(State, StepReport), StepReport> {
    let half = 0.5 * tau;
    let constant = sys.divergence_transpose(&(&state.p + sys.solve_pressure_mass(&forcing.f) * half)) + &forcing.g
        - sys.boundary_load(h_mid);
    let mass_m0 = sys.flux_mass(&state.m);
    let residual = |m: &DVector<f64>| -> DVector<f64> {
        (sys.flux_mass(m) - &mass_m0) * (2.0 / tau)
            + sys.divergence_transpose(&sys.solve_pressure_mass(&sys.divergence(m))) * half
            + sys.damping_load(damping, m)
            - &constant
    };
    let mut m = state.m.clone();
    let mut r = residual(&m);
    let mut norm = r.amax();
    let mut iterations = 0;
    while norm >= newton.tol {
        if iterations >= newton.max_iter || !norm.is_finite() {
            return Err(StepReport { iterations, residual: norm });
        }
        iterations += 1;
        if jac.factor(damping, &m).is_err() {
            return Err(StepReport { iterations, residual: norm });
        }
        let step = jac.solve(&r);
        let mut alpha = 1.0;
        let mut m_new = &m - &step;
        let mut r_new = residual(&m_new);
        for _ in 0..20 {
            if r_new.amax() <= norm {
                break;
            }
            alpha *= 0.5;
            m_new = &m - &step * alpha;
            r_new = residual(&m_new);
        }
        m = m_new;
        r = r_new;
        norm = r.amax();
    }
    let p_mid = &state.p + sys.solve_pressure_mass(&(&forcing.f - sys.divergence(&m))) * half;
    let next = State { p: p_mid * 2.0 - &state.p, m: m * 2.0 - &state.m, t: state.t + tau };
    Ok((next, StepReport { iterations, residual: norm }))
}

pub fn boundary_values(ramps: &[BoundaryRamp], t: f64) -> Vec<f64> {
    ramps.iter().map(|r| r.value(t)).collect()
}

/// Integrates from `initial` to `options.time.t_end` with the implicit
/// midpoint rule, recording states and derivatives at the sample times.
pub fn integrate(
    sys: &dyn GalerkinSystem,
    damping: &DampingModel,
    forcing: &Forcing,
    initial: &State,
    ramps: &[BoundaryRamp],
    options: &SolverOptions,
) -> Result<Trajectory> {
    integrate_observed(sys, damping, forcing, initial, ramps, options, &mut |_| {})
}

/// [`integrate`] calling `observer` after every step.
pub fn integrate_observed(
    sys: &dyn GalerkinSystem,
    damping: &DampingModel,
    forcing: &Forcing,
    initial: &State,
    ramps: &[BoundaryRamp],
    options: &SolverOptions,
    observer: &mut dyn FnMut(&State),
) -> Result<Trajectory> {
    options.validate()?;
    damping.validate()?;
    sys.solvable()?;
    initial.check_dims(sys)?;
    if ramps.len() != sys.boundary_dim() {
        return Err(Error::DimensionMismatch(format!("{} ramps for {} boundary vertices", ramps.len(), sys.boundary_dim())));
    }
    let time = &options.time;
    let mut breakpoints: Vec<f64> = ramps.iter().map(|r| r.ramp_time).filter(|&t| t > 0.0).collect();
    breakpoints.extend(time.sample_times.iter().cloned());
    let grid = time_grid(initial.t, time.t_end, time.dt, &breakpoints);

    let samples: Vec<f64> = time.sample_times.iter().cloned().filter(|&t| t >= initial.t - 1e-12).collect();
    let mut next_sample = 0;
    let mut traj = Trajectory { states: Vec::new(), dstates: Vec::new(), steps: 0, newton_iterations: 0 };
    let near = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
    let mut record = |state: &State, traj: &mut Trajectory| {
        while next_sample < samples.len() && near(state.t, samples[next_sample]) {
            let ts = samples[next_sample];
            let h = boundary_values(ramps, ts);
            traj.dstates.push(time_derivative(sys, damping, forcing, state, &h));
            traj.states.push(State { t: ts, ..state.clone() });
            next_sample += 1;
        }
    };

    let mut state = initial.clone();
    record(&state, &mut traj);
    let mut jac: Option<(f64, Box<dyn StepJacobian + '_>)> = None;
    for (step, w) in grid.windows(2).enumerate() {
        let tau = w[1] - w[0];
        if jac.as_ref().is_none_or(|(t, _)| (tau - t).abs() > 1e-14 * tau) {
            jac = Some((tau, sys.midpoint_jacobian(tau)?));
        }
        let (_, jac) = jac.as_mut().unwrap();
        let h_mid = boundary_values(ramps, w[0] + 0.5 * tau);
        let (mut next, report) = midpoint_step(sys, jac.as_mut(), damping, forcing, &state, tau, &h_mid, &options.newton)
            .map_err(|r| Error::StepFailure { step: step + 1, time: w[1], residual: r.residual })?;
        next.t = w[1];
        traj.steps += 1;
        traj.newton_iterations += report.iterations;
        state = next;
        observer(&state);
        record(&state, &mut traj);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_hits_breakpoints() {
        let g = time_grid(0.0, 2.0, 0.3, &[1.0, 0.5]);
        for t in [0.5, 1.0, 2.0] {
            assert!(g.iter().any(|&x| x == t));
        }
        assert!(g.windows(2).all(|w| w[1] - w[0] <= 0.3 + 1e-15 && w[1] > w[0]));
        let g = time_grid(0.0, 50.0, 0.01, &[1.0, 10.0, 20.0]);
        assert_eq!(g.len(), 5001);
    }
}
