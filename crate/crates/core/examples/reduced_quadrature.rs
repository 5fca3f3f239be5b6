//! Replaces the full lumping rule of a reduced model by a few weighted
//! points and certifies the resulting flux mass matrix.
//!
//! `cargo run --release --example reduced_quadrature -- [n_sv] [points]`

use pipewave::diagnostics::{reduced_model, run_experiment, train, EnergyNorm, TrainingOptions};
use pipewave::galerkin::GalerkinSystem;
use pipewave::mor::reduce_quadrature;
use pipewave::netgraph::paper_network;
use pipewave::solvers::SolverOptions;
use pipewave::DampingModel;

fn main() -> pipewave::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n_sv = args.first().copied().unwrap_or(2);
    let net = paper_network();
    let damping = DampingModel::quadratic();
    let options = SolverOptions::default();
    let training = train(&net, &damping, &options, &TrainingOptions::default())?;
    let mut model = reduced_model(&training, n_sv)?;
    let nv = model.flux_dim();
    let target = args.get(1).copied().unwrap_or(nv * (nv + 1) / 2);
    let before = run_experiment(&model, &damping, &net.ramps(), &options, (10.0, 50.0), EnergyNorm::Exact)?;

    let rule = reduce_quadrature(&model, target)?;
    println!(
        "{} of {} points, moment residual {:.2e}, lambda in [{:.4}, {:.4}], certified {}",
        rule.nodes.len(),
        training.operators.local_weights().len(),
        rule.moment_residual,
        rule.certificate.lambda_min,
        rule.certificate.lambda_max,
        rule.certificate.satisfied
    );
    model.install_quadrature(rule)?;
    let after = run_experiment(&model, &damping, &net.ramps(), &options, (10.0, 50.0), EnergyNorm::Exact)?;
    println!("full rule    E = {:?}", before.report.energies_state.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>());
    println!("reduced rule E = {:?}", after.report.energies_state.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>());
    Ok(())
}
