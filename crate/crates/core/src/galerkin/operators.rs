use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CscMatrix;

use super::space::GlobalSpace;
use super::system::{GalerkinSystem, StepJacobian};
use crate::damping::DampingModel;
use crate::error::{Error, Result};
use crate::linalg::{self, csc_from_triplets, csc_position, diagonal_of, SparseCholesky};

/// Assembled matrices of the semidiscrete system on a [`GlobalSpace`].
///
/// Flux quantities live in the Kirchhoff-reduced global coordinates; the
/// edge-local ("local") coordinates are reached through the prolongation `P`.
pub struct Operators {
    space: GlobalSpace,
    pressure_mass: CscMatrix<f64>,
    pressure_mass_diag: Option<DVector<f64>>,
    pressure_mass_chol: SparseCholesky,
    local_weights: DVector<f64>,
    flux_mass: CscMatrix<f64>,
    flux_mass_diag: Option<DVector<f64>>,
    flux_mass_chol: SparseCholesky,
    flux_mass_exact_local: CscMatrix<f64>,
    flux_mass_exact: CscMatrix<f64>,
    flux_stiffness: CscMatrix<f64>,
    divergence: CscMatrix<f64>,
    divergence_t: CscMatrix<f64>,
    divergence_local: CscMatrix<f64>,
    boundary: CscMatrix<f64>,
    kernel: DMatrix<f64>,
    gram: Option<SparseCholesky>,
    gram_pivot_ratio: f64,
    transpose_prolongation: CscMatrix<f64>,
}

impl Operators {
    pub fn assemble(space: &GlobalSpace) -> Result<Operators> {
        let net = space.network();
        let n_local = space.local_flux_dim();
        let np = space.pressure_dim();
        let mut mp = Vec::new();
        let mut g_loc = Vec::new();
        let mut mm_loc = Vec::new();
        let mut k_loc = Vec::new();
        let mut weights = DVector::zeros(n_local);
        for (e, (el, edge)) in space.elements().iter().zip(net.edges()).enumerate() {
            let l = edge.length;
            let (fo, po) = (space.flux_range(e).start, space.pressure_range(e).start);
            let lm = el.local_matrices();
            mp.extend(lm.pressure_mass.iter().map(|&(i, j, v)| (po + i, po + j, l * v)));
            g_loc.extend(lm.divergence.iter().map(|&(i, j, v)| (po + i, fo + j, v)));
            mm_loc.extend(lm.flux_mass.iter().map(|&(i, j, v)| (fo + i, fo + j, l * v)));
            k_loc.extend(lm.flux_stiffness.iter().map(|&(i, j, v)| (fo + i, fo + j, v / l)));
            for (k, w) in el.lumping_rule().weights.iter().enumerate() {
                weights[fo + k] = l * w;
            }
        }
        let p = space.prolongation();
        let pt = p.transpose();
        let pressure_mass = csc_from_triplets(np, np, &mp);
        let divergence_local = csc_from_triplets(np, n_local, &g_loc);
        let flux_mass_exact_local = csc_from_triplets(n_local, n_local, &mm_loc);
        let stiffness_local = csc_from_triplets(n_local, n_local, &k_loc);
        let w_diag = csc_from_triplets(n_local, n_local, &(0..n_local).map(|i| (i, i, weights[i])).collect::<Vec<_>>());

        let divergence = &divergence_local * p;
        let divergence_t = divergence.transpose();
        let flux_mass = &(&pt * &w_diag) * p;
        let flux_mass_exact = &(&pt * &flux_mass_exact_local) * p;
        let flux_stiffness = &(&pt * &stiffness_local) * p;

        let mut b = Vec::new();
        for (c, &v) in net.boundary_vertices().iter().enumerate() {
            let inc = net.incident(v)[0];
            b.push((space.endpoint_local(inc.edge, inc.sign), c, inc.sign as f64));
        }
        let boundary = &pt * &csc_from_triplets(n_local, net.boundary_vertices().len(), &b);

        let pressure_mass_chol = SparseCholesky::new(&pressure_mass)?;
        let flux_mass_chol = SparseCholesky::new(&flux_mass)?;
        let kernel_raw = space.kernel_flux_vectors();
        let kernel = linalg::orthonormalize(&kernel_raw, &|x| x.clone(), 1e-12);
        let (gram, gram_pivot_ratio) = match SparseCholesky::new(&(&divergence * &divergence_t)) {
            Ok(c) => {
                let r = c.min_pivot_ratio();
                (if r > 1e-12 { Some(c) } else { None }, r)
            }
            Err(_) => (None, 0.0),
        };

        Ok(Operators {
            space: space.clone(),
            pressure_mass_diag: diagonal_of(&pressure_mass),
            pressure_mass,
            pressure_mass_chol,
            local_weights: weights,
            flux_mass_diag: diagonal_of(&flux_mass),
            flux_mass,
            flux_mass_chol,
            flux_mass_exact_local,
            flux_mass_exact,
            flux_stiffness,
            divergence,
            divergence_t,
            divergence_local,
            boundary,
            kernel,
            gram,
            gram_pivot_ratio,
            transpose_prolongation: pt,
        })
    }

    pub fn space(&self) -> &GlobalSpace {
        &self.space
    }

    pub fn pressure_mass_matrix(&self) -> &CscMatrix<f64> {
        &self.pressure_mass
    }

    pub fn pressure_mass_diagonal(&self) -> Option<&DVector<f64>> {
        self.pressure_mass_diag.as_ref()
    }

    /// Lumped flux mass `P^T W P`.
    pub fn flux_mass_matrix(&self) -> &CscMatrix<f64> {
        &self.flux_mass
    }

    pub fn flux_mass_diagonal(&self) -> Option<&DVector<f64>> {
        self.flux_mass_diag.as_ref()
    }

    /// Consistent flux mass in global coordinates.
    pub fn exact_flux_mass_matrix(&self) -> &CscMatrix<f64> {
        &self.flux_mass_exact
    }

    /// `((v_i)', (v_j)')` in global coordinates.
    pub fn flux_stiffness_matrix(&self) -> &CscMatrix<f64> {
        &self.flux_stiffness
    }

    pub fn divergence_matrix(&self) -> &CscMatrix<f64> {
        &self.divergence
    }

    /// `G` before Kirchhoff elimination (pressure rows, edge-local flux columns).
    pub fn local_divergence_matrix(&self) -> &CscMatrix<f64> {
        &self.divergence_local
    }

    pub fn boundary_matrix(&self) -> &CscMatrix<f64> {
        &self.boundary
    }

    /// Lumping weights at every edge-local flux node.
    pub fn local_weights(&self) -> &DVector<f64> {
        &self.local_weights
    }

    /// `min L_kk^2 / max |A_kk|` of the Cholesky factor of `G G^T`, zero if
    /// the factorization broke down.
    pub fn divergence_gram_pivot_ratio(&self) -> f64 {
        self.gram_pivot_ratio
    }

    /// Restriction `P^T x` of an edge-local vector.
    pub fn restrict_local(&self, x: &DVector<f64>) -> DVector<f64> {
        linalg::mul(&self.transpose_prolongation, x)
    }

    /// Exact energy from edge-local flux coefficients.
    pub fn local_flux_norm_squared(&self, local: &DVector<f64>) -> f64 {
        local.dot(&linalg::mul(&self.flux_mass_exact_local, local))
    }
}

impl GalerkinSystem for Operators {
    fn pressure_dim(&self) -> usize {
        self.space.pressure_dim()
    }

    fn flux_dim(&self) -> usize {
        self.space.flux_dim()
    }

    fn boundary_dim(&self) -> usize {
        self.boundary.ncols()
    }

    fn divergence(&self, m: &DVector<f64>) -> DVector<f64> {
        linalg::mul(&self.divergence, m)
    }

    fn divergence_transpose(&self, p: &DVector<f64>) -> DVector<f64> {
        linalg::mul(&self.divergence_t, p)
    }

    fn pressure_mass(&self, p: &DVector<f64>) -> DVector<f64> {
        match &self.pressure_mass_diag {
            Some(d) => d.component_mul(p),
            None => linalg::mul(&self.pressure_mass, p),
        }
    }

    fn solve_pressure_mass(&self, r: &DVector<f64>) -> DVector<f64> {
        match &self.pressure_mass_diag {
            Some(d) => r.component_div(d),
            None => self.pressure_mass_chol.solve(r),
        }
    }

    fn flux_mass(&self, m: &DVector<f64>) -> DVector<f64> {
        match &self.flux_mass_diag {
            Some(d) => d.component_mul(m),
            None => linalg::mul(&self.flux_mass, m),
        }
    }

    fn solve_flux_mass(&self, r: &DVector<f64>) -> DVector<f64> {
        match &self.flux_mass_diag {
            Some(d) => r.component_div(d),
            None => self.flux_mass_chol.solve(r),
        }
    }

    fn boundary_load(&self, h: &[f64]) -> DVector<f64> {
        linalg::mul(&self.boundary, &DVector::from_column_slice(h))
    }

    fn damping_load(&self, damping: &DampingModel, m: &DVector<f64>) -> DVector<f64> {
        let local = self.space.expand_flux(m);
        let w = &self.local_weights;
        let d = DVector::from_fn(local.len(), |i, _| w[i] * damping.eval(local[i]));
        self.restrict_local(&d)
    }

    fn damping_jacobian_apply(&self, damping: &DampingModel, m: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let local = self.space.expand_flux(m);
        let dv = self.space.expand_flux(v);
        let w = &self.local_weights;
        let d = DVector::from_fn(local.len(), |i, _| w[i] * damping.eval_derivative(local[i]) * dv[i]);
        self.restrict_local(&d)
    }

    fn kernel_basis(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    fn solve_divergence_gram(&self, r: &DVector<f64>) -> DVector<f64> {
        self.gram.as_ref().expect("divergence Gram matrix is factorized").solve(r)
    }

    fn midpoint_jacobian(&self, dt: f64) -> Result<Box<dyn StepJacobian + '_>> {
        Ok(Box::new(SparseMidpointJacobian::new(self, dt)?))
    }

    fn energy(&self, q: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let local = self.space.expand_flux(v);
        0.5 * q.dot(&self.pressure_mass(q)) + 0.5 * self.local_flux_norm_squared(&local)
    }

    fn solvable(&self) -> Result<()> {
        let (nm, np) = (self.flux_dim(), self.pressure_dim());
        if self.pressure_mass_diag.is_none() {
            return Err(Error::IncompatibleSpace("pressure mass matrix is not diagonal".into()));
        }
        if self.gram.is_none() || nm < np || nm - np != self.kernel.ncols() {
            return Err(Error::IncompatibleSpace(format!(
                "dim V = {nm}, dim Q = {np}, dim ker = {}, G G^T pivot ratio {:.1e}",
                self.kernel.ncols(),
                self.gram_pivot_ratio
            )));
        }
        Ok(())
    }
}

/// Sparse midpoint Jacobian with a fixed pattern: the symbolic analysis is
/// done once and every Newton iteration only refactors values.
struct SparseMidpointJacobian<'a> {
    ops: &'a Operators,
    dt: f64,
    base: Vec<f64>,
    /// `(local node, value position, P_la P_lb)`
    contributions: Vec<(usize, usize, f64)>,
    chol: SparseCholesky,
}

impl<'a> SparseMidpointJacobian<'a> {
    fn new(ops: &'a Operators, dt: f64) -> Result<Self> {
        let mp_inv = ops
            .pressure_mass_diag
            .as_ref()
            .ok_or_else(|| Error::IncompatibleSpace("pressure mass matrix is not diagonal".into()))?
            .map(|x| 1.0 / x);
        let nm = ops.flux_dim();
        let scaled = {
            let mut g = ops.divergence.clone();
            let (_, rows, vals) = g.csc_data_mut();
            for (v, &r) in vals.iter_mut().zip(rows.iter()) {
                *v *= mp_inv[r];
            }
            g
        };
        let k = &ops.divergence_t * &scaled;
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for (j, col) in k.col_iter().enumerate() {
            for (&i, &v) in col.row_indices().iter().zip(col.values()) {
                triplets.push((i, j, v));
            }
        }
        let rows = ops.space.prolongation_rows();
        for row in rows {
            for &(a, _) in row {
                for &(b, _) in row {
                    triplets.push((a, b, 0.0));
                }
            }
        }
        let pattern = csc_from_triplets(nm, nm, &triplets);
        let mut base = vec![0.0; pattern.nnz()];
        for (j, col) in k.col_iter().enumerate() {
            for (&i, &v) in col.row_indices().iter().zip(col.values()) {
                base[csc_position(&pattern, i, j).unwrap()] += 0.5 * dt * v;
            }
        }
        let mut contributions = Vec::new();
        for (l, row) in rows.iter().enumerate() {
            for &(a, ca) in row {
                for &(b, cb) in row {
                    contributions.push((l, csc_position(&pattern, a, b).unwrap(), ca * cb));
                }
            }
        }
        let mut values = base.clone();
        for &(l, pos, c) in &contributions {
            values[pos] += (2.0 / dt) * ops.local_weights[l] * c;
        }
        let mut init = pattern;
        init.values_mut().copy_from_slice(&values);
        let chol = SparseCholesky::new(&init)?;
        Ok(Self { ops, dt, base, contributions, chol })
    }
}

impl StepJacobian for SparseMidpointJacobian<'_> {
    fn factor(&mut self, damping: &DampingModel, m: &DVector<f64>) -> Result<()> {
        let local = self.ops.space.expand_flux(m);
        let w = &self.ops.local_weights;
        let coef: Vec<f64> =
            (0..local.len()).map(|l| w[l] * (2.0 / self.dt + damping.eval_derivative(local[l]))).collect();
        let mut values = self.base.clone();
        for &(l, pos, c) in &self.contributions {
            values[pos] += coef[l] * c;
        }
        self.chol
            .refactor(&values)
            .map_err(|e| Error::SingularJacobian(format!("midpoint Jacobian: {e}")))
    }

    fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::space::{build_space, Discretization};
    use crate::linalg::to_dense;
    use crate::netgraph::{paper_network, single_pipe};

    fn ops(net: &crate::netgraph::Network, d: Discretization) -> Operators {
        Operators::assemble(&build_space(net, d).unwrap()).unwrap()
    }

    #[test]
    fn single_edge_fem_matrices() {
        let o = ops(&single_pipe(1.0, 1.0, 0.0), Discretization::Fem { h: 0.5 });
        let g = to_dense(o.divergence_matrix());
        let expect = DMatrix::from_row_slice(2, 3, &[-1.0, 1.0, 0.0, 0.0, -1.0, 1.0]);
        assert!((g - expect).amax() < 1e-14);
        assert_eq!(o.flux_mass_diagonal().unwrap().as_slice(), &[0.25, 0.5, 0.25]);
        let b = to_dense(o.boundary_matrix());
        assert_eq!(b, DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn damping_load_examples() {
        let o = ops(&single_pipe(1.0, 1.0, 0.0), Discretization::Fem { h: 0.5 });
        let ones = DVector::from_element(3, 1.0);
        let lin = o.damping_load(&DampingModel::linear(1.0), &ones);
        assert!((lin - DVector::from_vec(vec![0.25, 0.5, 0.25])).amax() < 1e-15);
        let m = DVector::from_vec(vec![2.0, -1.0, 0.0]);
        let q = o.damping_load(&DampingModel::quadratic(), &m);
        assert!((q - DVector::from_vec(vec![1.0, -0.5, 0.0])).amax() < 1e-15);
        assert_eq!(o.damping_load(&DampingModel::quadratic(), &DVector::zeros(3)).amax(), 0.0);
    }

    #[test]
    fn kernel_is_annihilated_on_the_network() {
        for d in [Discretization::Fem { h: 0.2 }, Discretization::Spectral { order: 5 }] {
            let o = ops(&paper_network(), d);
            assert_eq!(o.kernel_basis().ncols(), 3);
            for c in o.kernel_basis().column_iter() {
                assert!(o.divergence(&c.into_owned()).amax() < 1e-12);
            }
            o.solvable().unwrap();
            assert_eq!(o.flux_dim() - o.pressure_dim(), 3);
        }
    }

    #[test]
    fn spectral_masses_are_diagonal() {
        let o = ops(&paper_network(), Discretization::Spectral { order: 4 });
        assert!(o.pressure_mass_diagonal().is_some());
        // lumped mass on the network couples the Kirchhoff-eliminated endpoints
        let mm = to_dense(o.flux_mass_matrix());
        assert!((&mm - mm.transpose()).amax() < 1e-15);
    }

    #[test]
    fn equal_order_pair_is_not_solvable() {
        let o = ops(&single_pipe(1.0, 1.0, 0.0), Discretization::EqualOrderP1 { h: 0.25 });
        assert!(matches!(o.solvable(), Err(Error::IncompatibleSpace(_))));
    }

    #[test]
    fn midpoint_jacobian_matches_dense_assembly() {
        let o = ops(&paper_network(), Discretization::Fem { h: 0.5 });
        let d = DampingModel::affine_power(0.3, 1.0, 1.0);
        let m = DVector::from_fn(o.flux_dim(), |i, _| (i as f64 * 0.7).cos());
        let dt = 0.1;
        let mut jac = o.midpoint_jacobian(dt).unwrap();
        jac.factor(&d, &m).unwrap();
        let g = to_dense(o.divergence_matrix());
        let mp = to_dense(o.pressure_mass_matrix());
        let mm = to_dense(o.flux_mass_matrix());
        let n = o.flux_dim();
        let mut jd = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            jd.set_column(j, &o.damping_jacobian_apply(&d, &m, &e));
        }
        let dense = mm * (2.0 / dt) + g.transpose() * mp.try_inverse().unwrap() * &g * (0.5 * dt) + jd;
        let r = DVector::from_fn(n, |i, _| (i as f64).sin());
        let x = jac.solve(&r);
        assert!((&dense * x - r).amax() < 1e-10);
    }
}
