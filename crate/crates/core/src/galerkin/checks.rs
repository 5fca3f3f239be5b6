//! Structural checks of a discretization: compatibility of the space pair
//! and equivalence of the lumped and exact flux norms.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::operators::Operators;
use super::system::GalerkinSystem;
use crate::error::{Error, Result};
use crate::linalg::{generalized_eigen_range, to_dense};

pub const PROJECTION_TOLERANCE: f64 = 1e-10;
pub const KERNEL_TOLERANCE: f64 = 1e-12;
/// Squared-norm bounds on `|v|_h^2 / |v|^2`.
pub const NORM_EQUIVALENCE_BOUNDS: (f64, f64) = (0.25, 2.25);

#[derive(Debug, Clone, Serialize)]
pub struct CompatibilityReport {
    pub derivative_image_equals_q: bool,
    pub kernel_contained: bool,
    /// Largest relative L2 residual of projecting a flux basis derivative onto Q.
    pub projection_residual: f64,
    pub divergence_rank: usize,
    pub pressure_dim: usize,
    pub kernel_dim: usize,
    pub kernel_residual: f64,
}

impl CompatibilityReport {
    pub fn passed(&self) -> bool {
        self.derivative_image_equals_q && self.kernel_contained
    }
}

/// Numerical rank of a dense matrix from its singular values.
pub fn numerical_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.amax();
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

pub fn check_compatibility(ops: &Operators) -> CompatibilityReport {
    let space = ops.space();
    let net = space.network();

    // d/ds of every edge-local flux basis function against the local pressure basis
    let mut projection_residual: f64 = 0.0;
    for el in space.elements() {
        let lm = el.local_matrices();
        let (nq, nv) = (el.pressure_dim(), el.flux_dim());
        let mut mp = DMatrix::<f64>::zeros(nq, nq);
        for &(i, j, v) in &lm.pressure_mass {
            mp[(i, j)] += v;
        }
        let mut g = DMatrix::<f64>::zeros(nq, nv);
        for &(i, j, v) in &lm.divergence {
            g[(i, j)] += v;
        }
        let Some(coeffs) = mp.clone().cholesky().map(|c| c.solve(&g)) else {
            projection_residual = f64::INFINITY;
            continue;
        };
        let quad = el.quadrature(2);
        for k in 0..nv {
            let (mut res, mut norm) = (0.0, 0.0);
            for qp in &quad {
                let dv: f64 = qp.flux.iter().filter(|t| t.0 == k).map(|t| t.2).sum();
                let proj: f64 = qp.pressure.iter().map(|&(i, q, _)| coeffs[(i, k)] * q).sum();
                res += qp.w * (dv - proj).powi(2);
                norm += qp.w * dv * dv;
            }
            if norm > 0.0 {
                projection_residual = projection_residual.max((res / norm).sqrt());
            }
        }
    }

    let np = space.pressure_dim();
    let divergence_rank = if ops.divergence_gram_pivot_ratio() > 1e-12 {
        np
    } else {
        numerical_rank(&to_dense(ops.divergence_matrix()), 1e-10)
    };

    // edgewise constants that satisfy the Kirchhoff balance
    let fields = space.kernel_fields();
    let mut kernel_residual: f64 = 0.0;
    for c in 0..fields.ncols() {
        let values: Vec<f64> = fields.column(c).iter().cloned().collect();
        let mut exact = DVector::zeros(space.local_flux_dim());
        for e in 0..net.edges().len() {
            for l in space.flux_range(e) {
                exact[l] = values[e];
            }
        }
        let global = space.constant_flux(&values);
        let represented = space.expand_flux(&global);
        kernel_residual = kernel_residual.max((&represented - &exact).amax());
        for (e, el) in space.elements().iter().enumerate() {
            let coeffs = &represented.as_slice()[space.flux_range(e)];
            for qp in el.quadrature(1) {
                kernel_residual = kernel_residual.max((el.eval_flux(coeffs, qp.s) - values[e]).abs());
            }
        }
        kernel_residual = kernel_residual.max(ops.divergence(&global).amax());
    }

    CompatibilityReport {
        derivative_image_equals_q: projection_residual < PROJECTION_TOLERANCE && divergence_rank == np,
        kernel_contained: kernel_residual < KERNEL_TOLERANCE && ops.kernel_basis().ncols() == fields.ncols(),
        projection_residual,
        divergence_rank,
        pressure_dim: np,
        kernel_dim: fields.ncols(),
        kernel_residual,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NormEquivalenceReport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub satisfied: bool,
}

impl NormEquivalenceReport {
    pub fn from_range(lambda_min: f64, lambda_max: f64) -> Self {
        let (lo, hi) = NORM_EQUIVALENCE_BOUNDS;
        // slack for round-off when the pencil is the identity
        let eps = 1e-12;
        Self { lambda_min, lambda_max, satisfied: lambda_min >= lo - eps && lambda_max <= hi + eps }
    }
}

/// Above this flux dimension the certificate is computed edge by edge on
/// the unconstrained local spaces, which bounds the global spectrum.
const DENSE_LIMIT: usize = 1500;

/// Extreme generalized eigenvalues of (lumped flux mass, exact flux mass).
pub fn certify_norm_equivalence(ops: &Operators) -> Result<NormEquivalenceReport> {
    let space = ops.space();
    if ops.flux_dim() <= DENSE_LIMIT {
        let a = to_dense(ops.flux_mass_matrix());
        let b = to_dense(ops.exact_flux_mass_matrix());
        let (lo, hi) = generalized_eigen_range(&a, &b)
            .map_err(|_| Error::NotPositiveDefinite("consistent flux mass matrix is singular".into()))?;
        return Ok(NormEquivalenceReport::from_range(lo, hi));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for el in space.elements() {
        let n = el.flux_dim();
        let mut b = DMatrix::<f64>::zeros(n, n);
        for &(i, j, v) in &el.local_matrices().flux_mass {
            b[(i, j)] += v;
        }
        let a = DMatrix::from_diagonal(&DVector::from_vec(el.lumping_rule().weights));
        let (l, h) = generalized_eigen_range(&a, &b)
            .map_err(|_| Error::NotPositiveDefinite("consistent flux mass matrix is singular".into()))?;
        lo = lo.min(l);
        hi = hi.max(h);
    }
    Ok(NormEquivalenceReport::from_range(lo, hi))
}
