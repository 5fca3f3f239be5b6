use nalgebra::{DMatrix, DVector};

use super::model::ReducedModel;
use crate::error::{Error, Result};
use crate::galerkin::{NormEquivalenceReport, Operators};
use crate::linalg::{generalized_eigen_range, mul_dense};

/// A nonnegative-weight subset of the full flux nodes.
#[derive(Debug, Clone)]
pub struct ReducedQuadrature {
    /// Edge-local flux node indices of the full space.
    pub nodes: Vec<usize>,
    pub weights: Vec<f64>,
    /// Relative residual of the matched Gram moments.
    pub moment_residual: f64,
    /// Pencil (reduced-rule Gram, full-rule Gram) on `V_H`.
    pub full_rule_range: (f64, f64),
    /// Pencil (reduced-rule Gram, exact Gram) on `V_H`, checked against the
    /// norm-equivalence bounds.
    pub certificate: NormEquivalenceReport,
}

/// Lawson-Hanson nonnegative least squares: `min |A x - b|, x >= 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, max_iter: usize) -> DVector<f64> {
    nnls_capped(a, b, max_iter, a.ncols())
}

/// Least squares on the selected columns: thin QR, SVD when `R` is singular.
fn least_squares(sub: DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let k = sub.ncols();
    if k <= sub.nrows() {
        let qr = sub.clone().qr();
        let r = qr.r();
        let scale = r.diagonal().amax();
        if r.diagonal().iter().all(|d| d.abs() > 1e-12 * scale) {
            if let Some(x) = r.solve_upper_triangular(&qr.q().tr_mul(b)) {
                return x;
            }
        }
    }
    sub.svd(true, true).solve(b, 1e-14).unwrap_or_else(|_| DVector::zeros(k))
}

/// [`nnls`] stopping once `max_passive` columns are in use.
fn nnls_capped(a: &DMatrix<f64>, b: &DVector<f64>, max_iter: usize, max_passive: usize) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.amax().max(1.0) * b.amax().max(1.0);
    let ata = a.tr_mul(a);
    let atb = a.tr_mul(b);
    let solve_passive = |passive: &[bool]| -> (Vec<usize>, DVector<f64>) {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let normal = DMatrix::from_fn(idx.len(), idx.len(), |r, c| ata[(idx[r], idx[c])]);
        let rhs = DVector::from_fn(idx.len(), |r, _| atb[idx[r]]);
        let diag = normal.diagonal();
        let well_posed = normal.clone().cholesky().filter(|ch| {
            let l = ch.l_dirty().diagonal();
            l.iter().zip(diag.iter()).all(|(l, d)| l * l > 1e-10 * d)
        });
        let sol = match well_posed {
            Some(ch) => ch.solve(&rhs),
            None => least_squares(a.select_columns(idx.iter()), b),
        };
        (idx, sol)
    };
    for _ in 0..max_iter {
        if passive.iter().filter(|&&p| p).count() >= max_passive {
            break;
        }
        let w = a.tr_mul(&(b - a * &x));
        let candidate = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        for _ in 0..=n {
            let (idx, z) = solve_passive(&passive);
            if z.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &i) in idx.iter().enumerate() {
                    x[i] = z[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &i) in idx.iter().enumerate() {
                if z[k] <= 0.0 {
                    alpha = alpha.min(x[i] / (x[i] - z[k]));
                }
            }
            for (k, &i) in idx.iter().enumerate() {
                x[i] += alpha * (z[k] - x[i]);
                if x[i] <= 1e-15 {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
    }
    x
}

fn gram(lift: &DMatrix<f64>, nodes: &[usize], weights: &[f64]) -> DMatrix<f64> {
    let n = lift.ncols();
    let mut g = DMatrix::zeros(n, n);
    for (&k, &w) in nodes.iter().zip(weights) {
        let row = lift.row(k);
        g += row.transpose() * row * w;
    }
    g
}

fn exact_gram(full: &Operators, v: &DMatrix<f64>) -> DMatrix<f64> {
    v.tr_mul(&mul_dense(full.exact_flux_mass_matrix(), v))
}

/// Selects at most `target` flux nodes with nonnegative weights whose Gram
/// matrix on `V_H` matches that of the full rule. Points enter in the
/// Lawson-Hanson active-set order until `target` are in use.
pub fn reduce_quadrature(model: &ReducedModel, target: usize) -> Result<ReducedQuadrature> {
    let lift = model.lift_matrix();
    let (n_nodes, nv) = (lift.nrows(), lift.ncols());
    let full = model.full();
    let full_weights = full.local_weights();
    if target < nv {
        return Err(Error::Quadrature(format!("{target} points cannot resolve a {nv}-dimensional space")));
    }
    let exact = exact_gram(full, model.flux_basis());
    let all: Vec<usize> = (0..n_nodes).collect();
    let reference = gram(lift, &all, full_weights.as_slice());

    let (nodes, weights, moment_residual) = if target >= n_nodes {
        (all, full_weights.as_slice().to_vec(), 0.0)
    } else {
        let pairs: Vec<(usize, usize)> = (0..nv).flat_map(|i| (i..nv).map(move |j| (i, j))).collect();
        let moments = DMatrix::from_fn(pairs.len(), n_nodes, |r, k| lift[(k, pairs[r].0)] * lift[(k, pairs[r].1)]);
        let b = DVector::from_fn(pairs.len(), |r, _| reference[pairs[r]]);
        let col_norms: Vec<f64> = moments.column_iter().map(|c| c.norm().max(f64::MIN_POSITIVE)).collect();
        let scaled = DMatrix::from_fn(pairs.len(), n_nodes, |r, k| moments[(r, k)] / col_norms[k]);
        let y = nnls_capped(&scaled, &b, 3 * target + 10, target);
        let selected: Vec<usize> = (0..n_nodes).filter(|&k| y[k] > 0.0).collect();
        let w = DVector::from_iterator(selected.len(), selected.iter().map(|&k| y[k] / col_norms[k]));
        let residual = &b - moments.select_columns(selected.iter()) * &w;
        let b_norm = b.norm();
        (selected, w.as_slice().to_vec(), residual.norm() / b_norm)
    };

    let reduced = gram(lift, &nodes, &weights);
    if reduced.clone().cholesky().is_none() {
        return Err(Error::Quadrature(format!(
            "infeasible moment matching with {target} points: the reduced Gram matrix is singular"
        )));
    }
    let full_rule_range = generalized_eigen_range(&reduced, &reference)?;
    let (lo, hi) = generalized_eigen_range(&reduced, &exact)?;
    Ok(ReducedQuadrature {
        nodes,
        weights,
        moment_residual,
        full_rule_range,
        certificate: NormEquivalenceReport::from_range(lo, hi),
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::galerkin::{build_space, Discretization, GalerkinSystem};
    use crate::netgraph::single_pipe;

    #[test]
    fn nnls_recovers_nonnegative_solution() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let x = nnls(&a, &DVector::from_vec(vec![1.0, 2.0, 3.0]), 20);
        assert!((x - DVector::from_vec(vec![1.0, 2.0])).amax() < 1e-12);
        let x = nnls(&a, &DVector::from_vec(vec![-1.0, 1.0, 0.0]), 20);
        assert!(x[0] == 0.0 && (x[1] - 0.5).abs() < 1e-12);
    }

    fn pipe_model(extra: usize) -> ReducedModel {
        let ops = Arc::new(Operators::assemble(&build_space(&single_pipe(1.0, 1.0, 0.0), Discretization::Fem { h: 0.05 }).unwrap()).unwrap());
        let cand = DMatrix::from_fn(ops.flux_dim(), extra, |i, j| ((j + 1) as f64 * i as f64 * 0.05 * std::f64::consts::PI).sin());
        ReducedModel::from_flux_candidates(ops, &cand, extra).unwrap()
    }

    #[test]
    fn full_count_returns_original_rule() {
        let model = pipe_model(2);
        let rq = reduce_quadrature(&model, usize::MAX).unwrap();
        assert_eq!(rq.nodes.len(), model.lift_matrix().nrows());
        assert!((rq.full_rule_range.0 - 1.0).abs() < 1e-10 && (rq.full_rule_range.1 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn too_few_points_is_infeasible() {
        let model = pipe_model(2);
        assert!(matches!(reduce_quadrature(&model, model.flux_dim() - 1), Err(Error::Quadrature(_))));
    }

    #[test]
    fn certified_rule_on_three_dimensional_space() {
        let mut model = pipe_model(2);
        assert_eq!(model.flux_dim(), 3);
        let rq = reduce_quadrature(&model, 6).unwrap();
        assert!(rq.nodes.len() <= 6);
        // brute force: reduced Gram against the exact Gram, eigenvalues of B^{-1} A
        let exact = exact_gram(model.full(), model.flux_basis());
        let reduced = gram(model.lift_matrix(), &rq.nodes, &rq.weights);
        let eig = (exact.try_inverse().unwrap() * reduced).complex_eigenvalues();
        let lo = eig.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        let hi = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        assert!((lo - rq.certificate.lambda_min).abs() < 1e-8 && (hi - rq.certificate.lambda_max).abs() < 1e-8);
        assert!(rq.certificate.satisfied, "{:?}", rq.certificate);
        model.install_quadrature(rq).unwrap();
        assert!(model.reduced_flux_mass().clone().cholesky().is_some());
    }
}
