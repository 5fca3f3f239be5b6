//! The decay table for FEM, spectral and POD rows, run in parallel.
//!
//! `cargo run --release --example table1 -- [out.csv]`

use pipewave::diagnostics::{run_table1, Table1Config};
use pipewave::netgraph::paper_network;

fn main() -> pipewave::Result<()> {
    let config = Table1Config::paper_defaults(paper_network());
    let table = run_table1(&config)?;
    let csv = table.to_csv();
    print!("{csv}");
    for row in &table.rows {
        eprintln!("{} {}: {:.1} s", row.method, row.param, row.wall_seconds);
    }
    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, csv).map_err(|source| pipewave::Error::Io { path, source })?;
    }
    Ok(())
}
