//! Plain-text basis files.
//!
//! ```text
//! # pipewave reduced basis
//! # pressure_dim=.. flux_dim=.. n_q=.. n_v=.. n_sv=..
//! # training=..
//! [flux]
//! <flux_dim rows of n_v comma separated values>
//! [pressure]
//! <pressure_dim rows of n_q comma separated values>
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::model::ReducedModel;
use crate::error::{Error, Result};
use crate::galerkin::{GalerkinSystem, Operators};

#[derive(Debug, Clone, PartialEq)]
pub struct BasisHeader {
    pub pressure_dim: usize,
    pub flux_dim: usize,
    pub n_q: usize,
    pub n_v: usize,
    pub n_sv: usize,
    pub training: String,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn write_matrix(out: &mut String, m: &DMatrix<f64>) {
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:.17e}")).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
}

pub fn save_basis(model: &ReducedModel, path: impl AsRef<Path>, training: &str) -> Result<()> {
    let path = path.as_ref();
    let (v, q) = (model.flux_basis(), model.pressure_basis());
    let mut out = String::new();
    let _ = writeln!(out, "# pipewave reduced basis");
    let _ = writeln!(
        out,
        "# pressure_dim={} flux_dim={} n_q={} n_v={} n_sv={}",
        q.nrows(),
        v.nrows(),
        q.ncols(),
        v.ncols(),
        model.n_sv()
    );
    let _ = writeln!(out, "# training={}", training.replace('\n', " "));
    out.push_str("[flux]\n");
    write_matrix(&mut out, v);
    out.push_str("[pressure]\n");
    write_matrix(&mut out, q);
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

fn parse_header(lines: &[&str]) -> Result<BasisHeader> {
    let dims = lines
        .iter()
        .find(|l| l.contains("flux_dim="))
        .ok_or_else(|| Error::Parse("basis header without dimensions".into()))?;
    let get = |key: &str| -> Result<usize> {
        dims.trim_start_matches('#')
            .split_whitespace()
            .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
            .ok_or_else(|| Error::Parse(format!("basis header misses `{key}`")))?
            .parse()
            .map_err(|e| Error::Parse(format!("basis header `{key}`: {e}")))
    };
    let training = lines
        .iter()
        .find_map(|l| l.trim_start_matches('#').trim().strip_prefix("training="))
        .unwrap_or("")
        .to_string();
    Ok(BasisHeader {
        pressure_dim: get("pressure_dim")?,
        flux_dim: get("flux_dim")?,
        n_q: get("n_q")?,
        n_v: get("n_v")?,
        n_sv: get("n_sv")?,
        training,
    })
}

fn parse_block(lines: &[&str], rows: usize, cols: usize, name: &str) -> Result<DMatrix<f64>> {
    if lines.len() != rows {
        return Err(Error::Parse(format!("[{name}] has {} rows, expected {rows}", lines.len())));
    }
    let mut m = DMatrix::zeros(rows, cols);
    for (r, line) in lines.iter().enumerate() {
        let vals: Vec<&str> = if cols == 0 { Vec::new() } else { line.split(',').collect() };
        if vals.len() != cols {
            return Err(Error::Parse(format!("[{name}] row {} has {} values, expected {cols}", r + 1, vals.len())));
        }
        for (c, v) in vals.iter().enumerate() {
            m[(r, c)] = v.trim().parse().map_err(|e| Error::Parse(format!("[{name}] row {}: {e}", r + 1)))?;
        }
    }
    Ok(m)
}

/// Reads a basis file and rebuilds the reduced model on `full`.
pub fn load_basis(full: Arc<Operators>, path: impl AsRef<Path>) -> Result<(ReducedModel, BasisHeader)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let lines: Vec<&str> = text.lines().collect();
    let header_lines: Vec<&str> = lines.iter().cloned().take_while(|l| l.starts_with('#')).collect();
    let header = parse_header(&header_lines)?;
    if header.flux_dim != full.flux_dim() || header.pressure_dim != full.pressure_dim() {
        return Err(Error::DimensionMismatch(format!(
            "basis trained on dims ({}, {}), space has ({}, {})",
            header.pressure_dim,
            header.flux_dim,
            full.pressure_dim(),
            full.flux_dim()
        )));
    }
    let body = &lines[header_lines.len()..];
    let flux_at = body.iter().position(|l| l.trim() == "[flux]").ok_or_else(|| Error::Parse("missing [flux]".into()))?;
    let pressure_at =
        body.iter().position(|l| l.trim() == "[pressure]").ok_or_else(|| Error::Parse("missing [pressure]".into()))?;
    if pressure_at < flux_at {
        return Err(Error::Parse("[pressure] precedes [flux]".into()));
    }
    let v = parse_block(&body[flux_at + 1..pressure_at], header.flux_dim, header.n_v, "flux")?;
    let trailing: Vec<&str> = body[pressure_at + 1..].iter().cloned().filter(|l| !l.trim().is_empty()).collect();
    let q = parse_block(&trailing, header.pressure_dim, header.n_q, "pressure")?;
    let model = ReducedModel::from_bases(full, v, q, header.n_sv)?;
    Ok((model, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::{build_space, Discretization};
    use crate::netgraph::paper_network;

    #[test]
    fn roundtrip_is_exact() {
        let full = Arc::new(Operators::assemble(&build_space(&paper_network(), Discretization::Fem { h: 0.25 }).unwrap()).unwrap());
        let cand = DMatrix::from_fn(full.flux_dim(), 2, |i, j| ((i * (j + 2)) as f64).cos());
        let model = ReducedModel::from_flux_candidates(full.clone(), &cand, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("basis.csv");
        save_basis(&model, &path, "unit test").unwrap();
        let (loaded, header) = load_basis(full, &path).unwrap();
        assert_eq!(header.n_sv, 2);
        assert_eq!(header.training, "unit test");
        assert_eq!(loaded.flux_basis(), model.flux_basis());
        assert_eq!(loaded.pressure_basis(), model.pressure_basis());
    }

    #[test]
    fn wrong_space_is_rejected() {
        let full = Arc::new(Operators::assemble(&build_space(&paper_network(), Discretization::Fem { h: 0.25 }).unwrap()).unwrap());
        let other = Arc::new(Operators::assemble(&build_space(&paper_network(), Discretization::Fem { h: 0.5 }).unwrap()).unwrap());
        let n = full.flux_dim();
        let model = ReducedModel::from_flux_candidates(full, &DMatrix::zeros(n, 0), 0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        save_basis(&model.unwrap(), &path, "").unwrap();
        assert!(matches!(load_basis(other, &path), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn missing_file_names_the_path() {
        let full = Arc::new(Operators::assemble(&build_space(&paper_network(), Discretization::Fem { h: 0.5 }).unwrap()).unwrap());
        let err = load_basis(full, "/nonexistent/basis.csv").err().unwrap();
        assert!(err.to_string().contains("/nonexistent/basis.csv"));
    }
}
