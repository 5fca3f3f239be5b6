//! Transient run on the seven-pipe test network: inlet pressure drops from
//! 100 to 90 during the first second, the energy of the deviation from the
//! new steady state then decays exponentially.
//!
//! `cargo run --release --example network_transient -- [h]`

use pipewave::diagnostics::{format_significant, run_experiment, EnergyNorm};
use pipewave::galerkin::{build_space, Discretization, Operators};
use pipewave::netgraph::paper_network;
use pipewave::solvers::SolverOptions;
use pipewave::DampingModel;

fn main() -> pipewave::Result<()> {
    let h = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0.05);
    let net = paper_network();
    let ops = Operators::assemble(&build_space(&net, Discretization::Fem { h })?)?;
    let damping = DampingModel::quadratic();
    let exp = run_experiment(&ops, &damping, &net.ramps(), &SolverOptions::default(), (10.0, 50.0), EnergyNorm::Exact)?;
    println!("steps {}, Newton iterations {}", exp.trajectory.steps, exp.trajectory.newton_iterations);
    println!("{:>6} {:>12} {:>12}", "t", "E(state)", "E(d/dt)");
    let r = &exp.report;
    for k in 0..r.sample_times.len() {
        println!(
            "{:>6} {:>12} {:>12}",
            r.sample_times[k],
            format_significant(r.energies_state[k], 6),
            format_significant(r.energies_derivative[k], 6)
        );
    }
    println!("gamma = {:.5}", r.gamma.unwrap_or(f64::NAN));
    Ok(())
}
