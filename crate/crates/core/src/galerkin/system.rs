use nalgebra::{DMatrix, DVector};

use crate::damping::DampingModel;
use crate::error::Result;

/// The semidiscrete system
///
/// ```text
/// M_p dp/dt + G m                 = f
/// M_m dm/dt - G^T p + D(m) m      = g - B h(t)
/// ```
///
/// in some pair of coordinate spaces. Implemented by the full-order
/// [`super::Operators`] and by [`crate::mor::ReducedModel`].
pub trait GalerkinSystem: Sync {
    fn pressure_dim(&self) -> usize;
    fn flux_dim(&self) -> usize;
    fn boundary_dim(&self) -> usize;

    /// `G m`
    fn divergence(&self, m: &DVector<f64>) -> DVector<f64>;
    /// `G^T p`
    fn divergence_transpose(&self, p: &DVector<f64>) -> DVector<f64>;

    fn pressure_mass(&self, p: &DVector<f64>) -> DVector<f64>;
    fn solve_pressure_mass(&self, r: &DVector<f64>) -> DVector<f64>;
    /// Lumped flux mass `M_m m`.
    fn flux_mass(&self, m: &DVector<f64>) -> DVector<f64>;
    fn solve_flux_mass(&self, r: &DVector<f64>) -> DVector<f64>;

    /// `B h`
    fn boundary_load(&self, h: &[f64]) -> DVector<f64>;
    /// Vector with entries `(d(m_h), v_i)_h`.
    fn damping_load(&self, damping: &DampingModel, m: &DVector<f64>) -> DVector<f64>;
    /// Action of the damping Jacobian `(d'(m_h) v, v_i)_h` on `v`.
    fn damping_jacobian_apply(&self, damping: &DampingModel, m: &DVector<f64>, v: &DVector<f64>) -> DVector<f64>;

    /// Euclidean-orthonormal basis of `ker G`.
    fn kernel_basis(&self) -> &DMatrix<f64>;
    /// `(G G^T)^{-1} r`
    fn solve_divergence_gram(&self, r: &DVector<f64>) -> DVector<f64>;

    /// Factorizable Jacobian of the implicit midpoint stage equation.
    fn midpoint_jacobian(&self, dt: f64) -> Result<Box<dyn StepJacobian + '_>>;

    /// `1/2 |q|^2 + 1/2 |v|^2` with exact L2 norms.
    fn energy(&self, q: &DVector<f64>, v: &DVector<f64>) -> f64;
    /// Same with the lumped flux norm.
    fn discrete_energy(&self, q: &DVector<f64>, v: &DVector<f64>) -> f64 {
        0.5 * q.dot(&self.pressure_mass(q)) + 0.5 * v.dot(&self.flux_mass(v))
    }

    /// Structural precondition of the solvers: `G^T` injective and
    /// `dim ker G = dim V - dim Q`.
    fn solvable(&self) -> Result<()>;
}

/// `(2 / dt) M_m + (dt / 2) G^T M_p^{-1} G + J_D(m)`
pub trait StepJacobian {
    fn factor(&mut self, damping: &DampingModel, m: &DVector<f64>) -> Result<()>;
    fn solve(&self, r: &DVector<f64>) -> DVector<f64>;
}
