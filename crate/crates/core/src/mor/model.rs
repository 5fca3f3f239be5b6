use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};

use super::reduced_quadrature::ReducedQuadrature;
use super::{SnapshotSet, RANK_TOLERANCE};
use crate::damping::DampingModel;
use crate::error::{Error, Result};
use crate::galerkin::checks::{numerical_rank, KERNEL_TOLERANCE, PROJECTION_TOLERANCE};
use crate::galerkin::{CompatibilityReport, GalerkinSystem, Operators, StepJacobian};
use crate::linalg::orthonormalize;
use crate::netgraph::BoundaryRamp;
use crate::solvers::{integrate, Forcing, SolverOptions, State, Trajectory};

const ORTHONORMALITY_TOLERANCE: f64 = 1e-10;

/// Galerkin system on a reduced pair `Q_H x V_H` of a full-order space.
///
/// Reduced coordinates are coefficients in the bases `Q` (columns
/// `M_p`-orthonormal) and `V` (columns orthonormal in the lumped `M_m`).
/// The damping term is evaluated at the flux nodes of the full space, or at
/// the points of an installed [`ReducedQuadrature`].
#[derive(Clone)]
pub struct ReducedModel {
    full: Arc<Operators>,
    flux_basis: DMatrix<f64>,
    pressure_basis: DMatrix<f64>,
    n_sv: usize,
    lift: DMatrix<f64>,
    quad_lift: DMatrix<f64>,
    quad_weights: DVector<f64>,
    quadrature: Option<ReducedQuadrature>,
    mass_p: DMatrix<f64>,
    mass_p_chol: Cholesky<f64, Dyn>,
    mass_m: DMatrix<f64>,
    mass_m_chol: Cholesky<f64, Dyn>,
    divergence: DMatrix<f64>,
    boundary: DMatrix<f64>,
    kernel: DMatrix<f64>,
    gram: Option<Cholesky<f64, Dyn>>,
}

fn apply_columns(a: &DMatrix<f64>, f: impl Fn(&DVector<f64>) -> DVector<f64>, rows: usize) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = a.column_iter().map(|c| f(&c.into_owned())).collect();
    if cols.is_empty() {
        DMatrix::zeros(rows, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// POD of the snapshots with `n_sv` flux and `n_sv` pressure modes, made
/// compatible: `V_H` = cycle space + flux modes + antiderivatives of the
/// pressure modes (and of the reference state), `Q_H = d/dx V_H`.
pub fn build_reduced(full: Arc<Operators>, snapshots: &SnapshotSet, n_sv: usize) -> Result<ReducedModel> {
    let flux = snapshots.flux_pod(&full)?;
    let pressure = snapshots.pressure_pod(&full)?;
    let rank = flux.rank().min(pressure.rank());
    if n_sv == 0 {
        return Err(Error::InvalidOptions("n_sv must be at least 1".into()));
    }
    if n_sv > rank {
        return Err(Error::RankExceeded { requested: n_sv, rank });
    }
    let antiderivative = |q: &DVector<f64>| full.divergence_transpose(&full.solve_divergence_gram(&full.pressure_mass(q)));
    let mut candidates: Vec<DVector<f64>> = Vec::new();
    candidates.push(snapshots.reference.m.clone());
    candidates.push(antiderivative(&snapshots.reference.p));
    for k in 0..n_sv {
        candidates.push(flux.modes.column(k).into_owned());
        candidates.push(antiderivative(&pressure.modes.column(k).into_owned()));
    }
    ReducedModel::from_flux_candidates(full, &DMatrix::from_columns(&candidates), n_sv)
}

impl ReducedModel {
    /// Compatible reduced pair spanned by the cycle space and `candidates`.
    pub fn from_flux_candidates(full: Arc<Operators>, candidates: &DMatrix<f64>, n_sv: usize) -> Result<ReducedModel> {
        full.solvable()?;
        let nm = full.flux_dim();
        if candidates.nrows() != nm {
            return Err(Error::DimensionMismatch(format!("candidates have {} rows, flux dim is {nm}", candidates.nrows())));
        }
        let mass = |x: &DVector<f64>| full.flux_mass(x);
        let mut cols: Vec<DVector<f64>> = Vec::new();
        for c in full.kernel_basis().column_iter().chain(candidates.column_iter()) {
            let c = c.into_owned();
            let norm = c.dot(&mass(&c)).sqrt();
            if norm > 0.0 && norm.is_finite() {
                cols.push(c / norm);
            }
        }
        if cols.is_empty() {
            return Err(Error::Reduction("empty flux candidate set".into()));
        }
        let v = orthonormalize(&DMatrix::from_columns(&cols), &mass, RANK_TOLERANCE);
        let derivatives = apply_columns(&v, |x| full.solve_pressure_mass(&full.divergence(x)), full.pressure_dim());
        let q = orthonormalize(&derivatives, &|x| full.pressure_mass(x), RANK_TOLERANCE);
        Self::from_bases(full, v, q, n_sv)
    }

    /// Reduced model for given bases. `V` must be orthonormal in the lumped
    /// flux mass, `Q` in the pressure mass.
    pub fn from_bases(full: Arc<Operators>, v: DMatrix<f64>, q: DMatrix<f64>, n_sv: usize) -> Result<ReducedModel> {
        let (np, nm) = (full.pressure_dim(), full.flux_dim());
        if v.nrows() != nm || q.nrows() != np {
            return Err(Error::DimensionMismatch(format!(
                "bases ({} x {}, {} x {}) for a space with dims ({np}, {nm})",
                v.nrows(),
                v.ncols(),
                q.nrows(),
                q.ncols()
            )));
        }
        let mass_m = v.tr_mul(&apply_columns(&v, |x| full.flux_mass(x), nm));
        let mass_p = q.tr_mul(&apply_columns(&q, |x| full.pressure_mass(x), np));
        let dev_m = (&mass_m - DMatrix::identity(v.ncols(), v.ncols())).amax();
        let dev_p = (&mass_p - DMatrix::identity(q.ncols(), q.ncols())).amax();
        if dev_m > ORTHONORMALITY_TOLERANCE || dev_p > ORTHONORMALITY_TOLERANCE {
            return Err(Error::Reduction(format!("bases are not mass-orthonormal (deviation {dev_m:.1e}, {dev_p:.1e})")));
        }
        let space = full.space();
        let lift = apply_columns(&v, |x| space.expand_flux(x), space.local_flux_dim());
        let divergence = q.tr_mul(&apply_columns(&v, |x| full.divergence(x), np));
        let nb = full.boundary_dim();
        let mut boundary = DMatrix::zeros(v.ncols(), nb);
        for j in 0..nb {
            let mut h = vec![0.0; nb];
            h[j] = 1.0;
            boundary.set_column(j, &v.tr_mul(&full.boundary_load(&h)));
        }
        let projected_kernel = v.tr_mul(&apply_columns(full.kernel_basis(), |x| full.flux_mass(x), nm));
        let kernel = orthonormalize(&projected_kernel, &|x| x.clone(), 1e-10);
        let gram = (&divergence * divergence.transpose()).cholesky();
        let mass_p_chol =
            mass_p.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite("reduced pressure mass".into()))?;
        let mass_m_chol = mass_m.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite("reduced flux mass".into()))?;
        Ok(ReducedModel {
            quad_lift: lift.clone(),
            quad_weights: full.local_weights().clone(),
            quadrature: None,
            full,
            flux_basis: v,
            pressure_basis: q,
            n_sv,
            lift,
            mass_p,
            mass_p_chol,
            mass_m,
            mass_m_chol,
            divergence,
            boundary,
            kernel,
            gram,
        })
    }

    pub fn full(&self) -> &Arc<Operators> {
        &self.full
    }

    pub fn flux_basis(&self) -> &DMatrix<f64> {
        &self.flux_basis
    }

    pub fn pressure_basis(&self) -> &DMatrix<f64> {
        &self.pressure_basis
    }

    pub fn n_sv(&self) -> usize {
        self.n_sv
    }

    /// Flux basis evaluated at the edge-local flux nodes of the full space.
    pub fn lift_matrix(&self) -> &DMatrix<f64> {
        &self.lift
    }

    pub fn reduced_divergence(&self) -> &DMatrix<f64> {
        &self.divergence
    }

    pub fn reduced_pressure_mass(&self) -> &DMatrix<f64> {
        &self.mass_p
    }

    pub fn reduced_flux_mass(&self) -> &DMatrix<f64> {
        &self.mass_m
    }

    pub fn quadrature(&self) -> Option<&ReducedQuadrature> {
        self.quadrature.as_ref()
    }

    /// Replaces the damping and flux-mass quadrature. Refused unless the
    /// rule carries a passing norm-equivalence certificate.
    pub fn install_quadrature(&mut self, rule: ReducedQuadrature) -> Result<()> {
        if !rule.certificate.satisfied {
            return Err(Error::Quadrature(format!(
                "certificate failed: lambda in [{:.4}, {:.4}]",
                rule.certificate.lambda_min, rule.certificate.lambda_max
            )));
        }
        if rule.nodes.iter().any(|&k| k >= self.lift.nrows()) {
            return Err(Error::Quadrature("rule references nodes outside the full space".into()));
        }
        let quad_lift = self.lift.select_rows(rule.nodes.iter());
        let weights = DVector::from_column_slice(&rule.weights);
        let scaled = DMatrix::from_fn(quad_lift.nrows(), quad_lift.ncols(), |i, j| weights[i] * quad_lift[(i, j)]);
        let mass_m = quad_lift.tr_mul(&scaled);
        self.mass_m_chol = mass_m
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Quadrature("reduced flux mass is singular under the rule".into()))?;
        self.mass_m = mass_m;
        self.quad_lift = quad_lift;
        self.quad_weights = weights;
        self.quadrature = Some(rule);
        Ok(())
    }

    pub fn lift_pressure(&self, q: &DVector<f64>) -> DVector<f64> {
        &self.pressure_basis * q
    }

    pub fn lift_flux(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.flux_basis * z
    }

    pub fn lift_state(&self, s: &State) -> State {
        State { p: self.lift_pressure(&s.p), m: self.lift_flux(&s.m), t: s.t }
    }

    /// Mass-orthogonal projection of a full state.
    pub fn restrict_state(&self, s: &State) -> State {
        State {
            p: self.pressure_basis.tr_mul(&self.full.pressure_mass(&s.p)),
            m: self.flux_basis.tr_mul(&self.full.flux_mass(&s.m)),
            t: s.t,
        }
    }

    /// Galerkin projection of full-order sources.
    pub fn restrict_forcing(&self, forcing: &Forcing) -> Forcing {
        Forcing { f: self.pressure_basis.tr_mul(&forcing.f), g: self.flux_basis.tr_mul(&forcing.g) }
    }

    fn weighted_rows(&self, values: impl Fn(usize) -> f64) -> DMatrix<f64> {
        let l = &self.quad_lift;
        DMatrix::from_fn(l.nrows(), l.ncols(), |i, j| values(i) * l[(i, j)])
    }
}

impl GalerkinSystem for ReducedModel {
    fn pressure_dim(&self) -> usize {
        self.pressure_basis.ncols()
    }

    fn flux_dim(&self) -> usize {
        self.flux_basis.ncols()
    }

    fn boundary_dim(&self) -> usize {
        self.boundary.ncols()
    }

    fn divergence(&self, m: &DVector<f64>) -> DVector<f64> {
        &self.divergence * m
    }

    fn divergence_transpose(&self, p: &DVector<f64>) -> DVector<f64> {
        self.divergence.tr_mul(p)
    }

    fn pressure_mass(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.mass_p * p
    }

    fn solve_pressure_mass(&self, r: &DVector<f64>) -> DVector<f64> {
        self.mass_p_chol.solve(r)
    }

    fn flux_mass(&self, m: &DVector<f64>) -> DVector<f64> {
        &self.mass_m * m
    }

    fn solve_flux_mass(&self, r: &DVector<f64>) -> DVector<f64> {
        self.mass_m_chol.solve(r)
    }

    fn boundary_load(&self, h: &[f64]) -> DVector<f64> {
        &self.boundary * DVector::from_column_slice(h)
    }

    fn damping_load(&self, damping: &DampingModel, m: &DVector<f64>) -> DVector<f64> {
        let nodal = &self.quad_lift * m;
        let d = DVector::from_fn(nodal.len(), |i, _| self.quad_weights[i] * damping.eval(nodal[i]));
        self.quad_lift.tr_mul(&d)
    }

    fn damping_jacobian_apply(&self, damping: &DampingModel, m: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let nodal = &self.quad_lift * m;
        let dv = &self.quad_lift * v;
        let d = DVector::from_fn(nodal.len(), |i, _| self.quad_weights[i] * damping.eval_derivative(nodal[i]) * dv[i]);
        self.quad_lift.tr_mul(&d)
    }

    fn kernel_basis(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    fn solve_divergence_gram(&self, r: &DVector<f64>) -> DVector<f64> {
        self.gram.as_ref().expect("reduced divergence Gram matrix is factorized").solve(r)
    }

    fn midpoint_jacobian(&self, dt: f64) -> Result<Box<dyn StepJacobian + '_>> {
        let schur = self.divergence.tr_mul(&self.mass_p_chol.solve(&self.divergence));
        let base = &self.mass_m * (2.0 / dt) + schur * (0.5 * dt);
        Ok(Box::new(DenseMidpointJacobian { model: self, base, factor: None }))
    }

    fn energy(&self, q: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.full.energy(&self.lift_pressure(q), &self.lift_flux(v))
    }

    fn solvable(&self) -> Result<()> {
        let (nv, nq) = (self.flux_dim(), self.pressure_dim());
        if self.gram.is_none() || nv < nq || nv - nq != self.kernel.ncols() {
            return Err(Error::IncompatibleSpace(format!(
                "reduced pair: dim V = {nv}, dim Q = {nq}, dim ker = {}",
                self.kernel.ncols()
            )));
        }
        Ok(())
    }
}

enum DenseFactor {
    Cholesky(Cholesky<f64, Dyn>),
    Lu(LU<f64, Dyn, Dyn>),
}

struct DenseMidpointJacobian<'a> {
    model: &'a ReducedModel,
    base: DMatrix<f64>,
    factor: Option<DenseFactor>,
}

impl StepJacobian for DenseMidpointJacobian<'_> {
    fn factor(&mut self, damping: &DampingModel, m: &DVector<f64>) -> Result<()> {
        let nodal = &self.model.quad_lift * m;
        let scaled = self.model.weighted_rows(|i| self.model.quad_weights[i] * damping.eval_derivative(nodal[i]));
        let j = &self.base + self.model.quad_lift.tr_mul(&scaled);
        self.factor = match j.clone().cholesky() {
            Some(c) => Some(DenseFactor::Cholesky(c)),
            None => {
                let lu = j.lu();
                if !lu.is_invertible() {
                    return Err(Error::SingularJacobian("reduced midpoint Jacobian".into()));
                }
                Some(DenseFactor::Lu(lu))
            }
        };
        Ok(())
    }

    fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        match self.factor.as_ref().expect("Jacobian is factorized before solving") {
            DenseFactor::Cholesky(c) => c.solve(r),
            DenseFactor::Lu(lu) => lu.solve(r).unwrap_or_else(|| DVector::from_element(r.len(), f64::NAN)),
        }
    }
}

/// [`integrate`] on a reduced model; `initial` and `forcing` are in reduced
/// coordinates.
pub fn simulate_reduced(
    model: &ReducedModel,
    damping: &DampingModel,
    forcing: &Forcing,
    initial: &State,
    ramps: &[BoundaryRamp],
    options: &SolverOptions,
) -> Result<Trajectory> {
    integrate(model, damping, forcing, initial, ramps, options)
}

/// Compatibility of the reduced pair, measured in the full space.
pub fn check_reduced_compatibility(model: &ReducedModel) -> CompatibilityReport {
    let full = &model.full;
    let (v, q) = (&model.flux_basis, &model.pressure_basis);
    let mut projection_residual: f64 = 0.0;
    for c in v.column_iter() {
        let d = full.solve_pressure_mass(&full.divergence(&c.into_owned()));
        let norm = d.dot(&full.pressure_mass(&d)).sqrt();
        if norm <= 1e-14 * c.norm().max(1.0) {
            continue;
        }
        let r = &d - q * q.tr_mul(&full.pressure_mass(&d));
        projection_residual = projection_residual.max(r.dot(&full.pressure_mass(&r)).sqrt() / norm);
    }
    let nq = q.ncols();
    let divergence_rank = numerical_rank(&model.divergence, 1e-10);
    let z = full.kernel_basis();
    let mut kernel_residual: f64 = 0.0;
    for c in z.column_iter() {
        let c = c.into_owned();
        let r = &c - v * v.tr_mul(&full.flux_mass(&c));
        kernel_residual = kernel_residual.max(r.amax());
    }
    kernel_residual = kernel_residual.max((&model.divergence * &model.kernel).amax());
    CompatibilityReport {
        derivative_image_equals_q: projection_residual < PROJECTION_TOLERANCE && divergence_rank == nq,
        kernel_contained: kernel_residual < KERNEL_TOLERANCE && model.kernel.ncols() == z.ncols(),
        projection_residual,
        divergence_rank,
        pressure_dim: nq,
        kernel_dim: model.kernel.ncols(),
        kernel_residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::{build_space, Discretization};
    use crate::netgraph::{paper_network, single_pipe};
    use crate::solvers::{solve_stationary, NewtonOptions};

    fn full(net: &crate::netgraph::Network, d: Discretization) -> Arc<Operators> {
        Arc::new(Operators::assemble(&build_space(net, d).unwrap()).unwrap())
    }

    fn identity_model(ops: Arc<Operators>) -> ReducedModel {
        let n = ops.flux_dim();
        ReducedModel::from_flux_candidates(ops, &DMatrix::identity(n, n), n).unwrap()
    }

    #[test]
    fn full_basis_reproduces_full_operators() {
        let ops = full(&paper_network(), Discretization::Fem { h: 0.25 });
        let model = identity_model(ops.clone());
        assert_eq!(model.flux_dim(), ops.flux_dim());
        assert_eq!(model.pressure_dim(), ops.pressure_dim());
        assert!(check_reduced_compatibility(&model).passed());
        let m = DVector::from_fn(ops.flux_dim(), |i, _| (i as f64 * 0.37).sin());
        let z = model.restrict_state(&State { p: DVector::zeros(ops.pressure_dim()), m: m.clone(), t: 0.0 }).m;
        assert!((model.lift_flux(&z) - &m).amax() < 1e-10);
        let d = DampingModel::quadratic();
        let lhs = model.lift_flux(&model.solve_flux_mass(&model.damping_load(&d, &z)));
        let rhs = ops.solve_flux_mass(&ops.damping_load(&d, &m));
        assert!((lhs - rhs).amax() < 1e-9);
    }

    #[test]
    fn reduced_steady_state_matches_full_when_contained() {
        let ops = full(&paper_network(), Discretization::Spectral { order: 3 });
        let d = DampingModel::quadratic();
        let nw = NewtonOptions::default();
        let (s, _) = solve_stationary(ops.as_ref(), &d, &Forcing::zero(ops.as_ref()), &[90.0, 70.0], &nw).unwrap();
        let anti = ops.divergence_transpose(&ops.solve_divergence_gram(&ops.pressure_mass(&s.p)));
        let model = ReducedModel::from_flux_candidates(ops.clone(), &DMatrix::from_columns(&[s.m.clone(), anti]), 1).unwrap();
        assert!(check_reduced_compatibility(&model).passed());
        let (r, _) = solve_stationary(&model, &d, &Forcing::zero(&model), &[90.0, 70.0], &nw).unwrap();
        let lifted = model.lift_state(&r);
        assert!((&lifted.m - &s.m).amax() < 1e-8);
        assert!((&lifted.p - &s.p).amax() < 1e-7);
    }

    #[test]
    fn kernel_is_always_contained() {
        let ops = full(&single_pipe(1.0, 1.0, 0.0), Discretization::Fem { h: 0.1 });
        let cand = DMatrix::from_fn(ops.flux_dim(), 1, |i, _| (i as f64).powi(2));
        let model = ReducedModel::from_flux_candidates(ops, &cand, 1).unwrap();
        assert_eq!(model.flux_dim(), 2);
        assert_eq!(model.pressure_dim(), 1);
        let rep = check_reduced_compatibility(&model);
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn non_orthonormal_bases_are_rejected() {
        let ops = full(&single_pipe(1.0, 1.0, 0.0), Discretization::Fem { h: 0.5 });
        let v = DMatrix::from_element(ops.flux_dim(), 1, 2.0);
        let q = DMatrix::from_element(ops.pressure_dim(), 1, 1.0);
        assert!(matches!(ReducedModel::from_bases(ops, v, q, 1), Err(Error::Reduction(_))));
    }
}
