use nalgebra::{DMatrix, DVector};

use super::{Forcing, NewtonOptions, State};
use crate::damping::DampingModel;
use crate::error::{Error, Result};
use crate::galerkin::{GalerkinSystem, Operators};
use crate::linalg;

#[derive(Debug, Clone, Default)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Full residual before the first and after every iteration.
    pub residuals: Vec<f64>,
}

/// Blocks `(G m - f, -G^T p + D(m) - g + B h)` of the stationary residual.
pub fn stationary_residual(
    sys: &dyn GalerkinSystem,
    damping: &DampingModel,
    forcing: &Forcing,
    state: &State,
    h: &[f64],
) -> (DVector<f64>, DVector<f64>) {
    let rp = sys.divergence(&state.m) - &forcing.f;
    let rm = sys.damping_load(damping, &state.m) - sys.divergence_transpose(&state.p) - &forcing.g + sys.boundary_load(h);
    (rp, rm)
}

/// Max-norm of the stationary residual.
pub fn steady_residual(sys: &dyn GalerkinSystem, damping: &DampingModel, forcing: &Forcing, state: &State, h: &[f64]) -> f64 {
    let (rp, rm) = stationary_residual(sys, damping, forcing, state, h);
    rp.amax().max(rm.amax())
}

/// Action of the saddle-point Jacobian `[[0, G], [-G^T, J_D(m)]]` on `(dp, dm)`.
pub fn stationary_jacobian_apply(
    sys: &dyn GalerkinSystem,
    damping: &DampingModel,
    m: &DVector<f64>,
    dp: &DVector<f64>,
    dm: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    (sys.divergence(dm), sys.damping_jacobian_apply(damping, m, dm) - sys.divergence_transpose(dp))
}

/// `p` with `G^T p = r` in the least-squares sense, one refinement step.
fn recover_pressure(sys: &dyn GalerkinSystem, r: &DVector<f64>) -> DVector<f64> {
    let rhs = sys.divergence(r);
    let mut p = sys.solve_divergence_gram(&rhs);
    let defect = &rhs - sys.divergence(&sys.divergence_transpose(&p));
    p += sys.solve_divergence_gram(&defect);
    p
}

/// Newton's method for the stationary problem
///
/// ```text
/// G m = f,    -G^T p + D(m) = g - B h
/// ```
///
/// The divergence constraint is eliminated exactly: `m = m_f + Z z` with
/// `m_f = G^T (G G^T)^{-1} f` and `Z` a basis of `ker G`. Newton then acts
/// on `Z^T (D(m) - g + B h) = 0`, a system of dimension `dim ker G`, and the
/// pressure is recovered from `G^T p = D(m) - g + B h`.
pub fn solve_stationary(
    sys: &dyn GalerkinSystem,
    damping: &DampingModel,
    forcing: &Forcing,
    h: &[f64],
    options: &NewtonOptions,
) -> Result<(State, NewtonReport)> {
    options.validate()?;
    damping.validate()?;
    sys.solvable()?;
    if h.len() != sys.boundary_dim() || forcing.f.len() != sys.pressure_dim() || forcing.g.len() != sys.flux_dim() {
        return Err(Error::DimensionMismatch("stationary data does not match the system".into()));
    }
    let z_basis = sys.kernel_basis();
    let k = z_basis.ncols();
    let load = &forcing.g - sys.boundary_load(h);

    let m_f = sys.divergence_transpose(&sys.solve_divergence_gram(&forcing.f));
    let kernel_residual = |m: &DVector<f64>| -> DVector<f64> { z_basis.tr_mul(&(sys.damping_load(damping, m) - &load)) };
    let full_state = |m: DVector<f64>| -> (State, f64) {
        let p = recover_pressure(sys, &(sys.damping_load(damping, &m) - &load));
        let state = State { p, m, t: 0.0 };
        let (rp, rm) = stationary_residual(sys, damping, forcing, &state, h);
        let r = rp.amax() + rm.amax();
        (state, r)
    };

    // start from the linear law d(m) = m
    let mut z = DVector::zeros(k);
    if k > 0 {
        let mass_z = DMatrix::from_columns(
            &z_basis.column_iter().map(|c| sys.flux_mass(&c.into_owned())).collect::<Vec<_>>(),
        );
        let a = z_basis.tr_mul(&mass_z);
        let b = z_basis.tr_mul(&(&load - sys.flux_mass(&m_f)));
        if let Some(chol) = a.cholesky() {
            z = chol.solve(&b);
        }
    }

    let mut report = NewtonReport::default();
    let mut m = &m_f + z_basis * &z;
    let (mut state, mut residual) = full_state(m.clone());
    report.residuals.push(residual);
    while residual >= options.tol {
        if report.iterations >= options.max_iter {
            return Err(Error::NewtonDivergence { iterations: report.iterations, residual });
        }
        report.iterations += 1;
        let r = kernel_residual(&m);
        let jz = DMatrix::from_columns(
            &z_basis
                .column_iter()
                .map(|c| sys.damping_jacobian_apply(damping, &m, &c.into_owned()))
                .collect::<Vec<_>>(),
        );
        let jac = z_basis.tr_mul(&jz);
        let step = jac
            .clone()
            .cholesky()
            .map(|c| c.solve(&r))
            .or_else(|| jac.clone().lu().solve(&r))
            .filter(|s| s.iter().all(|x| x.is_finite()))
            .ok_or_else(|| Error::SingularJacobian(format!("reduced stationary Jacobian of size {k}")))?;

        // backtracking on the kernel residual
        let r_norm = r.norm();
        let mut alpha = 1.0;
        let mut z_new = &z - &step;
        for _ in 0..20 {
            let m_try = &m_f + z_basis * &z_new;
            if kernel_residual(&m_try).norm() <= r_norm {
                break;
            }
            alpha *= 0.5;
            z_new = &z - &step * alpha;
        }
        z = z_new;
        m = &m_f + z_basis * &z;
        let (s, r) = full_state(m.clone());
        state = s;
        residual = r;
        report.residuals.push(residual);
        if !residual.is_finite() {
            return Err(Error::NewtonDivergence { iterations: report.iterations, residual });
        }
    }
    Ok((state, report))
}

/// Pressure traces `p^e(v)` at both ends of every edge, recovered from the
/// edge-local flux equation at the endpoint basis functions (no flux source):
/// `-n^e(v) p^e(v) = [M dm/dt - G^T p + D(m)]_endpoint`.
pub fn endpoint_pressures(
    ops: &Operators,
    damping: &DampingModel,
    state: &State,
    dm: Option<&DVector<f64>>,
) -> Vec<(f64, f64)> {
    let space = ops.space();
    let local = space.expand_flux(&state.m);
    let w = ops.local_weights();
    let gtp = linalg::mul_transpose(ops.local_divergence_matrix(), &state.p);
    let dm_local = dm.map(|d| space.expand_flux(d));
    let residual = |l: usize| {
        let inertia = dm_local.as_ref().map_or(0.0, |d| w[l] * d[l]);
        inertia - gtp[l] + w[l] * damping.eval(local[l])
    };
    (0..space.network().edges().len())
        .map(|e| {
            let start = space.endpoint_local(e, -1);
            let end = space.endpoint_local(e, 1);
            (residual(start), -residual(end))
        })
        .collect()
}
