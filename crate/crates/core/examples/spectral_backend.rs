//! The spectral pair against a fine FEM reference: decay rates per
//! polynomial order.
//!
//! `cargo run --release --example spectral_backend`

use pipewave::diagnostics::{run_experiment, EnergyNorm};
use pipewave::galerkin::{build_space, Discretization, GalerkinSystem, Operators};
use pipewave::netgraph::paper_network;
use pipewave::solvers::SolverOptions;
use pipewave::DampingModel;

fn main() -> pipewave::Result<()> {
    let net = paper_network();
    let damping = DampingModel::quadratic();
    let options = SolverOptions::default();
    let mut methods = vec![Discretization::Fem { h: 0.01 }];
    methods.extend((1..=6).map(|order| Discretization::Spectral { order }));
    for d in methods {
        let ops = Operators::assemble(&build_space(&net, d)?)?;
        let exp = run_experiment(&ops, &damping, &net.ramps(), &options, (10.0, 50.0), EnergyNorm::Exact)?;
        let (name, param) = d.label();
        println!(
            "{name:<9} {param:<7} dims ({:4}, {:4})  E0 = {:.4}  gamma = {:.5}",
            ops.pressure_dim(),
            ops.flux_dim(),
            exp.report.energies_state[0],
            exp.report.gamma.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
