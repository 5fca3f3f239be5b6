use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CscMatrix;
use serde::{Deserialize, Serialize};

use super::element::EdgeElement;
use super::quadrature::QuadratureRule;
use crate::error::{Error, Result};
use crate::linalg::csc_from_triplets;
use crate::netgraph::Network;

/// Discretization selector, as found in the `"discretization"` config fragment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Discretization {
    /// P0 pressures, P1 fluxes, trapezoid lumping; `h` is the mesh width.
    Fem { h: f64 },
    /// Legendre pressures of degree `order - 1`, Lagrange fluxes of degree
    /// `order` at the Gauss-Lobatto points.
    Spectral { order: usize },
    /// Equal-order continuous P1 pair (incompatible, diagnostic only).
    #[serde(rename = "fem_p1p1")]
    EqualOrderP1 { h: f64 },
}

impl Discretization {
    pub fn label(&self) -> (&'static str, String) {
        match self {
            Self::Fem { h } => ("fem", format!("h={h}")),
            Self::Spectral { order } => ("spectral", format!("p={order}")),
            Self::EqualOrderP1 { h } => ("fem_p1p1", format!("h={h}")),
        }
    }

    fn element_for(&self, length: f64) -> Result<EdgeElement> {
        let cells = |h: f64| -> Result<usize> {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::InvalidDiscretization(format!("mesh width must be positive, got {h}")));
            }
            let n = (length / h).round();
            if n < 1.0 || (n * h - length).abs() > 1e-9 * length {
                return Err(Error::InvalidDiscretization(format!(
                    "pipe length {length} is not an integer multiple of h = {h}"
                )));
            }
            Ok(n as usize)
        };
        match *self {
            Self::Fem { h } => Ok(EdgeElement::fem(cells(h)?)),
            Self::EqualOrderP1 { h } => Ok(EdgeElement::equal_order_p1(cells(h)?)),
            Self::Spectral { order } => {
                if order == 0 {
                    return Err(Error::InvalidDiscretization("spectral order must be at least 1".into()));
                }
                Ok(EdgeElement::spectral(order))
            }
        }
    }
}

/// What a global flux degree of freedom represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxDof {
    /// Node strictly inside an edge.
    Interior { edge: usize, local: usize },
    /// Endpoint value of `edge` at `vertex`.
    Vertex { vertex: usize, edge: usize, local: usize },
}

/// Flux and pressure spaces on a whole network. Kirchhoff balance at
/// interior vertices is built into the flux space by expressing one
/// endpoint value per interior vertex through the others.
#[derive(Debug, Clone)]
pub struct GlobalSpace {
    network: Network,
    discretization: Discretization,
    elements: Vec<EdgeElement>,
    flux_offsets: Vec<usize>,
    pressure_offsets: Vec<usize>,
    prolongation: CscMatrix<f64>,
    prolongation_rows: Vec<Vec<(usize, f64)>>,
    flux_dofs: Vec<FluxDof>,
    kernel_fields: DMatrix<f64>,
}

pub fn build_space(network: &Network, discretization: Discretization) -> Result<GlobalSpace> {
    let elements = network
        .edges()
        .iter()
        .map(|e| discretization.element_for(e.length))
        .collect::<Result<Vec<_>>>()?;
    let mut flux_offsets = vec![0];
    let mut pressure_offsets = vec![0];
    for el in &elements {
        flux_offsets.push(flux_offsets.last().unwrap() + el.flux_dim());
        pressure_offsets.push(pressure_offsets.last().unwrap() + el.pressure_dim());
    }
    let n_local = *flux_offsets.last().unwrap();
    let endpoint = |edge: usize, sign: i8| {
        if sign < 0 {
            flux_offsets[edge]
        } else {
            flux_offsets[edge + 1] - 1
        }
    };

    // eliminated local endpoint -> (vertex, its incidence sign)
    let mut eliminated = vec![None; n_local];
    let mut vertex_of = vec![None; n_local];
    for v in 0..network.vertices().len() {
        let inc = network.incident(v);
        for i in inc {
            vertex_of[endpoint(i.edge, i.sign)] = Some(v);
        }
        if network.vertices()[v].boundary.is_none() {
            let first = inc[0];
            eliminated[endpoint(first.edge, first.sign)] = Some((v, first.sign));
        }
    }

    let mut global_of = vec![usize::MAX; n_local];
    let mut flux_dofs = Vec::new();
    for (e, el) in elements.iter().enumerate() {
        for k in 0..el.flux_dim() {
            let l = flux_offsets[e] + k;
            if eliminated[l].is_some() {
                continue;
            }
            global_of[l] = flux_dofs.len();
            flux_dofs.push(match vertex_of[l] {
                Some(vertex) => FluxDof::Vertex { vertex, edge: e, local: k },
                None => FluxDof::Interior { edge: e, local: k },
            });
        }
    }

    let mut prolongation_rows = vec![Vec::new(); n_local];
    for l in 0..n_local {
        match eliminated[l] {
            None => prolongation_rows[l].push((global_of[l], 1.0)),
            Some((v, sign0)) => {
                // n_0 m_0 + sum_j n_j m_j = 0
                for i in &network.incident(v)[1..] {
                    let other = endpoint(i.edge, i.sign);
                    prolongation_rows[l].push((global_of[other], -(sign0 as f64) * i.sign as f64));
                }
            }
        }
    }
    let triplets: Vec<_> = prolongation_rows
        .iter()
        .enumerate()
        .flat_map(|(l, row)| row.iter().map(move |&(g, v)| (l, g, v)))
        .collect();
    let prolongation = csc_from_triplets(n_local, flux_dofs.len(), &triplets);

    let kernel_fields = cycle_space(network);

    Ok(GlobalSpace {
        network: network.clone(),
        discretization,
        elements,
        flux_offsets,
        pressure_offsets,
        prolongation,
        prolongation_rows,
        flux_dofs,
        kernel_fields,
    })
}

/// Orthonormal basis of edgewise-constant fields satisfying the Kirchhoff
/// balance at every interior vertex, one column per basis field, one row per edge.
pub fn cycle_space(network: &Network) -> DMatrix<f64> {
    let ne = network.edges().len();
    let interior = network.interior_vertices();
    let mut a = DMatrix::zeros(interior.len(), ne);
    for (r, &v) in interior.iter().enumerate() {
        for inc in network.incident(v) {
            a[(r, inc.edge)] = inc.sign as f64;
        }
    }
    let ata = a.transpose() * &a;
    let eig = ata.symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    let cols: Vec<DVector<f64>> = (0..ne)
        .filter(|&k| eig.eigenvalues[k].abs() < 1e-10 * scale)
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(ne, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

impl GlobalSpace {
    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn discretization(&self) -> Discretization {
        self.discretization
    }

    pub fn elements(&self) -> &[EdgeElement] {
        &self.elements
    }

    pub fn flux_dim(&self) -> usize {
        self.flux_dofs.len()
    }

    pub fn pressure_dim(&self) -> usize {
        *self.pressure_offsets.last().unwrap()
    }

    /// Total number of edge-local flux coefficients (before Kirchhoff elimination).
    pub fn local_flux_dim(&self) -> usize {
        *self.flux_offsets.last().unwrap()
    }

    pub fn flux_range(&self, edge: usize) -> std::ops::Range<usize> {
        self.flux_offsets[edge]..self.flux_offsets[edge + 1]
    }

    pub fn pressure_range(&self, edge: usize) -> std::ops::Range<usize> {
        self.pressure_offsets[edge]..self.pressure_offsets[edge + 1]
    }

    /// Local index of edge `e`'s endpoint at the vertex with incidence `sign`.
    pub fn endpoint_local(&self, edge: usize, sign: i8) -> usize {
        if sign < 0 {
            self.flux_offsets[edge]
        } else {
            self.flux_offsets[edge + 1] - 1
        }
    }

    pub fn flux_dofs(&self) -> &[FluxDof] {
        &self.flux_dofs
    }

    /// Maps global flux coefficients to edge-local coefficients.
    pub fn prolongation(&self) -> &CscMatrix<f64> {
        &self.prolongation
    }

    pub fn prolongation_rows(&self) -> &[Vec<(usize, f64)>] {
        &self.prolongation_rows
    }

    pub fn expand_flux(&self, m: &DVector<f64>) -> DVector<f64> {
        crate::linalg::mul(&self.prolongation, m)
    }

    /// Edgewise-constant Kirchhoff-feasible fields (rows = edges).
    pub fn kernel_fields(&self) -> &DMatrix<f64> {
        &self.kernel_fields
    }

    /// Global flux coefficients of the edgewise-constant field with the given
    /// per-edge values. Exact for nodal bases; Kirchhoff balance of `values`
    /// is the caller's responsibility.
    pub fn constant_flux(&self, values: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.flux_dim(),
            self.flux_dofs.iter().map(|d| match *d {
                FluxDof::Interior { edge, .. } | FluxDof::Vertex { edge, .. } => values[edge],
            }),
        )
    }

    /// Global flux coefficients of every kernel field, one column each.
    pub fn kernel_flux_vectors(&self) -> DMatrix<f64> {
        let k = self.kernel_fields.ncols();
        let mut out = DMatrix::zeros(self.flux_dim(), k);
        for c in 0..k {
            let vals: Vec<f64> = self.kernel_fields.column(c).iter().cloned().collect();
            out.set_column(c, &self.constant_flux(&vals));
        }
        out
    }

    /// Lumping rule of every edge mapped onto `[0, length]`.
    pub fn quadrature(&self) -> Vec<QuadratureRule> {
        self.elements
            .iter()
            .zip(self.network.edges())
            .map(|(el, e)| el.lumping_rule().mapped(0.0, e.length))
            .collect()
    }

    /// Edge-local flux coefficients of edge `e`.
    pub fn edge_flux<'a>(&self, local: &'a DVector<f64>, e: usize) -> &'a [f64] {
        &local.as_slice()[self.flux_range(e)]
    }

    pub fn edge_pressure<'a>(&self, p: &'a DVector<f64>, e: usize) -> &'a [f64] {
        &p.as_slice()[self.pressure_range(e)]
    }

    /// Interior incidence rows: Kirchhoff balance `sum_e n^e(v) m^e(v)` of
    /// edge-local coefficients at every interior vertex.
    pub fn kirchhoff_defects(&self, local: &DVector<f64>) -> Vec<f64> {
        self.network
            .interior_vertices()
            .into_iter()
            .map(|v| {
                self.network
                    .incident(v)
                    .iter()
                    .map(|i| i.sign as f64 * local[self.endpoint_local(i.edge, i.sign)])
                    .sum()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{paper_network, single_pipe};

    #[test]
    fn single_edge_fem_dims() {
        let s = build_space(&single_pipe(1.0, 1.0, 0.0), Discretization::Fem { h: 0.5 }).unwrap();
        assert_eq!(s.flux_dim(), 3);
        assert_eq!(s.pressure_dim(), 2);
    }

    #[test]
    fn paper_network_flux_dim_matches_constraint_nullspace() {
        let net = paper_network();
        let s = build_space(&net, Discretization::Fem { h: 0.2 }).unwrap();
        assert_eq!(s.flux_dim(), 38);
        // independent count: nullspace of the interior constraint rows over all local values
        let n_local = s.local_flux_dim();
        let interior = net.interior_vertices();
        let mut c = DMatrix::zeros(interior.len(), n_local);
        for (r, &v) in interior.iter().enumerate() {
            for i in net.incident(v) {
                c[(r, s.endpoint_local(i.edge, i.sign))] = i.sign as f64;
            }
        }
        let rank = c.clone().svd(false, false).singular_values.iter().filter(|&&x| x > 1e-10).count();
        assert_eq!(n_local - rank, 38);
    }

    #[test]
    fn expanded_fluxes_satisfy_kirchhoff() {
        let s = build_space(&paper_network(), Discretization::Spectral { order: 3 }).unwrap();
        let m = DVector::from_fn(s.flux_dim(), |i, _| ((i * 7 + 3) as f64).sin());
        let local = s.expand_flux(&m);
        assert!(s.kirchhoff_defects(&local).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn cycle_space_dimension() {
        assert_eq!(cycle_space(&paper_network()).ncols(), 3);
        assert_eq!(cycle_space(&single_pipe(1.0, 0.0, 0.0)).ncols(), 1);
    }

    #[test]
    fn invalid_resolutions() {
        let net = single_pipe(1.0, 0.0, 0.0);
        assert!(build_space(&net, Discretization::Fem { h: 0.3 }).is_err());
        assert!(build_space(&net, Discretization::Spectral { order: 0 }).is_err());
    }

    #[test]
    fn spectral_order_two_lobatto_rule() {
        let s = build_space(&single_pipe(1.0, 0.0, 0.0), Discretization::Spectral { order: 2 }).unwrap();
        let q = &s.quadrature()[0];
        assert_eq!(q.points.len(), 3);
        assert!((q.points[1] - 0.5).abs() < 1e-15);
        assert!((q.weights[0] - 1.0 / 6.0).abs() < 1e-15 && (q.weights[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn config_fragments() {
        let d: Discretization = serde_json::from_str(r#"{"method":"fem","h":0.05}"#).unwrap();
        assert_eq!(d, Discretization::Fem { h: 0.05 });
        let d: Discretization = serde_json::from_str(r#"{"method":"spectral","order":10}"#).unwrap();
        assert_eq!(d, Discretization::Spectral { order: 10 });
    }
}
