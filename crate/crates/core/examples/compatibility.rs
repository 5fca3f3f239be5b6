//! Compatibility and norm-equivalence checks for every built-in pair,
//! including the equal-order P1 pair that fails them.
//!
//! `cargo run --example compatibility`

use pipewave::galerkin::{build_space, certify_norm_equivalence, check_compatibility, Discretization, Operators};
use pipewave::netgraph::paper_network;

fn main() -> pipewave::Result<()> {
    let net = paper_network();
    let pairs = [
        Discretization::Fem { h: 0.2 },
        Discretization::Spectral { order: 4 },
        Discretization::EqualOrderP1 { h: 0.2 },
    ];
    for d in pairs {
        let ops = Operators::assemble(&build_space(&net, d)?)?;
        let c = check_compatibility(&ops);
        let n = certify_norm_equivalence(&ops)?;
        println!(
            "{:?}: d/dx V = Q {} (rank {}/{}), kernel contained {} (dim {}), lambda in [{:.3}, {:.3}]",
            d, c.derivative_image_equals_q, c.divergence_rank, c.pressure_dim, c.kernel_contained, c.kernel_dim,
            n.lambda_min, n.lambda_max
        );
    }
    Ok(())
}
