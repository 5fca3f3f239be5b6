//! Stationary flow through one pipe. With linear damping `D(m) = m` the
//! exact solution is `m = (p_left - p_right) / L` with a linear pressure,
//! with `D(m) = m|m|` it is the square root of that.
//!
//! `cargo run --example single_pipe_steady`

use pipewave::galerkin::{build_space, Discretization, Operators};
use pipewave::netgraph::single_pipe;
use pipewave::solvers::{endpoint_pressures, solve_stationary, Forcing, NewtonOptions};
use pipewave::DampingModel;

fn main() -> pipewave::Result<()> {
    let net = single_pipe(1.0, 3.0, 1.0);
    for damping in [DampingModel::linear(1.0), DampingModel::quadratic()] {
        let ops = Operators::assemble(&build_space(&net, Discretization::Fem { h: 0.1 })?)?;
        let (state, report) =
            solve_stationary(&ops, &damping, &Forcing::zero(&ops), &net.final_boundary_values(), &NewtonOptions::default())?;
        let traces = endpoint_pressures(&ops, &damping, &state, None);
        println!(
            "{:?}: m = {:.6} (Newton iterations {}), p(0) = {:.6}, p(L) = {:.6}",
            damping.family, state.m[0], report.iterations, traces[0].0, traces[0].1
        );
    }
    Ok(())
}
