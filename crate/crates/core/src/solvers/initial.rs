use nalgebra::DVector;

use super::{solve_stationary, Forcing, NewtonOptions, State};
use crate::damping::DampingModel;
use crate::error::Result;
use crate::galerkin::{EdgeField, GalerkinSystem, Operators};

/// Compatible discrete initial state for continuous data `(p0, m0)`: the
/// stationary solution with sources `(f, q) = (m0', q)` and
/// `(g, v) = (d(m0), v)_h - (p0, v')` and no boundary term. The damping
/// pairing uses the lumped rule, so discrete stationary states are
/// reproduced exactly.
pub fn initial_data(
    ops: &Operators,
    damping: &DampingModel,
    p0: &dyn EdgeField,
    m0: &dyn EdgeField,
    newton: &NewtonOptions,
) -> Result<State> {
    let space = ops.space();
    let mut f = DVector::zeros(space.pressure_dim());
    let mut g_local = DVector::zeros(space.local_flux_dim());
    let w = ops.local_weights();
    for (e, (el, edge)) in space.elements().iter().zip(space.network().edges()).enumerate() {
        let len = edge.length;
        let (fo, po) = (space.flux_range(e).start, space.pressure_range(e).start);
        for qp in el.quadrature(2) {
            let x = qp.s * len;
            let dm = m0.derivative(e, x);
            let p = p0.value(e, x);
            for &(i, q, _) in &qp.pressure {
                f[po + i] += qp.w * len * dm * q;
            }
            // (p0, dv/dx) = int p0 dv/ds ds
            for &(j, _, dv) in &qp.flux {
                g_local[fo + j] -= qp.w * p * dv;
            }
        }
        for (k, s) in el.nodes().iter().enumerate() {
            g_local[fo + k] += w[fo + k] * damping.eval(m0.value(e, s * len));
        }
    }
    let forcing = Forcing { f, g: ops.restrict_local(&g_local) };
    let zero_h = vec![0.0; ops.boundary_dim()];
    let (state, _) = solve_stationary(ops, damping, &forcing, &zero_h, newton)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::{build_space, ConstantField, DiscreteField, Discretization};
    use crate::netgraph::paper_network;

    #[test]
    fn discrete_steady_state_is_a_fixed_point() {
        let space = build_space(&paper_network(), Discretization::Fem { h: 0.25 }).unwrap();
        let ops = Operators::assemble(&space).unwrap();
        let d = DampingModel::quadratic();
        let nw = NewtonOptions::default();
        let (s, _) = solve_stationary(&ops, &d, &Forcing::zero(&ops), &[100.0, 70.0], &nw).unwrap();
        let init = initial_data(&ops, &d, &DiscreteField::pressure(&space, &s.p), &DiscreteField::flux(&space, &s.m), &nw).unwrap();
        assert!((&init.p - &s.p).amax() < 1e-8);
        assert!((&init.m - &s.m).amax() < 1e-10);
    }

    #[test]
    fn constant_pressure_at_rest() {
        let space = build_space(&paper_network(), Discretization::Spectral { order: 3 }).unwrap();
        let ops = Operators::assemble(&space).unwrap();
        let s = initial_data(&ops, &DampingModel::quadratic(), &ConstantField(4.0), &ConstantField(0.0), &NewtonOptions::default())
            .unwrap();
        assert!(s.m.amax() < 1e-12);
        let legendre_mean: Vec<f64> = (0..7).map(|e| s.p[space.pressure_range(e).start]).collect();
        assert!(legendre_mean.iter().all(|p| (p - 4.0).abs() < 1e-10));
        assert!((0..7).all(|e| space.pressure_range(e).skip(1).all(|i| s.p[i].abs() < 1e-10)));
    }
}
