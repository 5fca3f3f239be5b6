//! Trains a POD basis on a fine FEM run of the test network and compares the
//! reduced decay with the full-order one.
//!
//! `cargo run --release --example pod_reduction -- [n_sv ...]`

use std::time::Instant;

use pipewave::diagnostics::{run_experiment, train, reduced_model, EnergyNorm, TrainingOptions};
use pipewave::galerkin::GalerkinSystem;
use pipewave::mor::check_reduced_compatibility;
use pipewave::netgraph::paper_network;
use pipewave::solvers::SolverOptions;
use pipewave::DampingModel;

fn main() -> pipewave::Result<()> {
    let counts: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let counts = if counts.is_empty() { vec![2, 10] } else { counts };
    let net = paper_network();
    let damping = DampingModel::quadratic();
    let options = SolverOptions::default();

    let start = Instant::now();
    let training = train(&net, &damping, &options, &TrainingOptions::default())?;
    let sigma = training.snapshots.flux_pod(&training.operators)?.singular_values;
    println!("training: {:.1} s, flux dim {}", start.elapsed().as_secs_f64(), training.operators.flux_dim());
    println!("leading flux singular values: {:?}", sigma.iter().take(6).map(|s| format!("{s:.3e}")).collect::<Vec<_>>());

    let full = run_experiment(training.operators.as_ref(), &damping, &net.ramps(), &options, (10.0, 50.0), EnergyNorm::Exact)?;
    println!("full     E = {:?} gamma = {:.4}", rounded(&full.report.energies_state), full.report.gamma.unwrap_or(f64::NAN));
    for n_sv in counts {
        let model = reduced_model(&training, n_sv)?;
        let report = check_reduced_compatibility(&model);
        let exp = run_experiment(&model, &damping, &net.ramps(), &options, (10.0, 50.0), EnergyNorm::Exact)?;
        println!(
            "n_sv = {n_sv:2} dims ({}, {}) compatible {} E = {:?} gamma = {:.4}",
            model.pressure_dim(),
            model.flux_dim(),
            report.passed(),
            rounded(&exp.report.energies_state),
            exp.report.gamma.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn rounded(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| pipewave::diagnostics::format_significant(*x, 5)).collect()
}
