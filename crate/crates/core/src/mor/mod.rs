//! Structure-preserving POD model reduction.
//!
//! The reduced flux space `V_H` always contains the cycle space and the
//! antiderivatives of the retained pressure modes, and the reduced pressure
//! space is `Q_H = d/dx V_H`, so the reduced pair is compatible by
//! construction.

mod basis_io;
mod model;
mod reduced_quadrature;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::galerkin::{GalerkinSystem, Operators};
use crate::solvers::{State, Trajectory};

pub use basis_io::{load_basis, save_basis, BasisHeader};
pub use model::{build_reduced, check_reduced_compatibility, simulate_reduced, ReducedModel};
pub use reduced_quadrature::{nnls, reduce_quadrature, ReducedQuadrature};

/// Relative singular value cut-off for the snapshot rank.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Fluctuation snapshots `x(t_k) - x_ref` of a training trajectory.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    pub times: Vec<f64>,
    pub p_snapshots: DMatrix<f64>,
    pub m_snapshots: DMatrix<f64>,
    /// The state the snapshots are centered at.
    pub reference: State,
}

pub fn collect_snapshots(trajectory: &Trajectory, reference: &State) -> Result<SnapshotSet> {
    if trajectory.states.is_empty() {
        return Err(Error::Reduction("trajectory has no samples".into()));
    }
    let (np, nm) = (reference.p.len(), reference.m.len());
    let mut p = DMatrix::zeros(np, trajectory.states.len());
    let mut m = DMatrix::zeros(nm, trajectory.states.len());
    for (k, s) in trajectory.states.iter().enumerate() {
        if s.p.len() != np || s.m.len() != nm {
            return Err(Error::DimensionMismatch("snapshot dimensions differ from the reference state".into()));
        }
        p.set_column(k, &(&s.p - &reference.p));
        m.set_column(k, &(&s.m - &reference.m));
    }
    Ok(SnapshotSet { times: trajectory.times(), p_snapshots: p, m_snapshots: m, reference: reference.clone() })
}

impl SnapshotSet {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn flux_pod(&self, ops: &Operators) -> Result<Pod> {
        self.check_space(ops)?;
        let w = ops.local_weights().map(f64::sqrt);
        let space = ops.space();
        let weighted = DMatrix::from_columns(
            &self.m_snapshots.column_iter().map(|c| space.expand_flux(&c.into_owned()).component_mul(&w)).collect::<Vec<_>>(),
        );
        Ok(Pod::compute(&weighted, &self.m_snapshots))
    }

    pub fn pressure_pod(&self, ops: &Operators) -> Result<Pod> {
        self.check_space(ops)?;
        let w = ops
            .pressure_mass_diagonal()
            .ok_or_else(|| Error::Reduction("pressure mass matrix is not diagonal".into()))?
            .map(f64::sqrt);
        let weighted = DMatrix::from_fn(self.p_snapshots.nrows(), self.len(), |i, j| w[i] * self.p_snapshots[(i, j)]);
        Ok(Pod::compute(&weighted, &self.p_snapshots))
    }

    fn check_space(&self, ops: &Operators) -> Result<()> {
        if self.p_snapshots.nrows() != ops.pressure_dim() || self.m_snapshots.nrows() != ops.flux_dim() {
            return Err(Error::DimensionMismatch(format!(
                "snapshots ({} x {}) do not belong to a space with dims ({}, {})",
                self.p_snapshots.nrows(),
                self.m_snapshots.nrows(),
                ops.pressure_dim(),
                ops.flux_dim()
            )));
        }
        Ok(())
    }
}

/// Proper orthogonal decomposition in a mass inner product.
#[derive(Debug, Clone)]
pub struct Pod {
    /// Mass-orthonormal modes in coefficient space, by decreasing singular value.
    pub modes: DMatrix<f64>,
    pub singular_values: DVector<f64>,
}

impl Pod {
    /// `weighted = C S` where `C^T C` is the mass matrix and `S` holds the
    /// coefficient snapshots. QR of `C S`, then SVD of the small factor.
    fn compute(weighted: &DMatrix<f64>, snapshots: &DMatrix<f64>) -> Pod {
        let k = snapshots.ncols();
        let r = if weighted.nrows() > k { weighted.clone().qr().r() } else { weighted.clone() };
        let svd = r.svd(false, true);
        let v_t = svd.v_t.expect("right singular vectors requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let sigma = DVector::from_iterator(order.len(), order.iter().map(|&i| svd.singular_values[i]));
        let top = sigma.get(0).cloned().unwrap_or(0.0);
        let rank = sigma.iter().filter(|&&s| s > RANK_TOLERANCE * top).count();
        let mut modes = DMatrix::zeros(snapshots.nrows(), rank);
        for (c, &i) in order.iter().take(rank).enumerate() {
            let v = v_t.row(i).transpose();
            modes.set_column(c, &(snapshots * v / sigma[c]));
        }
        Pod { modes, singular_values: sigma }
    }

    pub fn rank(&self) -> usize {
        self.modes.ncols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::{build_space, Discretization};
    use crate::netgraph::paper_network;

    fn trajectory(states: Vec<State>) -> Trajectory {
        Trajectory { dstates: states.iter().map(|s| (s.p.clone(), s.m.clone())).collect(), states, steps: 0, newton_iterations: 0 }
    }

    #[test]
    fn steady_trajectory_gives_zero_snapshots() {
        let ops = Operators::assemble(&build_space(&paper_network(), Discretization::Fem { h: 0.5 }).unwrap()).unwrap();
        let mut s = State::zeros(&ops);
        s.p.fill(2.0);
        s.m.fill(0.3);
        let set = collect_snapshots(&trajectory(vec![s.clone(), s.clone()]), &s).unwrap();
        assert!(set.p_snapshots.amax() == 0.0 && set.m_snapshots.amax() == 0.0);
        assert_eq!(set.flux_pod(&ops).unwrap().rank(), 0);
    }

    #[test]
    fn empty_trajectory_is_rejected() {
        let ops = Operators::assemble(&build_space(&paper_network(), Discretization::Fem { h: 0.5 }).unwrap()).unwrap();
        assert!(collect_snapshots(&trajectory(vec![]), &State::zeros(&ops)).is_err());
    }

    #[test]
    fn pod_modes_are_mass_orthonormal_and_bounded_by_count() {
        let ops = Operators::assemble(&build_space(&paper_network(), Discretization::Fem { h: 0.25 }).unwrap()).unwrap();
        let reference = State::zeros(&ops);
        let states: Vec<State> = (0..4)
            .map(|k| {
                let mut s = State::zeros(&ops);
                let t = k as f64;
                // two distinct directions only
                s.m = DVector::from_fn(ops.flux_dim(), |i, _| (i as f64).sin() * t + (i as f64 * 0.3).cos() * t * t);
                s.p = DVector::from_fn(ops.pressure_dim(), |i, _| (i as f64 * 0.7).cos() * (t + 1.0));
                s
            })
            .collect();
        let set = collect_snapshots(&trajectory(states), &reference).unwrap();
        let pod = set.flux_pod(&ops).unwrap();
        assert_eq!(pod.rank(), 2);
        let gram = pod.modes.tr_mul(&DMatrix::from_columns(
            &pod.modes.column_iter().map(|c| ops.flux_mass(&c.into_owned())).collect::<Vec<_>>(),
        ));
        assert!((gram - DMatrix::identity(2, 2)).amax() < 1e-10);
        assert_eq!(set.pressure_pod(&ops).unwrap().rank(), 1);
    }
}
