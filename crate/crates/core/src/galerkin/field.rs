//! Functions on the network, evaluated edge by edge in physical coordinates
//! `x in [0, length]`.

use nalgebra::DVector;

use super::space::GlobalSpace;

pub trait EdgeField: Sync {
    fn value(&self, edge: usize, x: f64) -> f64;
    fn derivative(&self, edge: usize, x: f64) -> f64;
}

/// A field given by closures for its value and derivative.
pub struct FnField<F, D> {
    pub value: F,
    pub derivative: D,
}

impl<F, D> EdgeField for FnField<F, D>
where
    F: Fn(usize, f64) -> f64 + Sync,
    D: Fn(usize, f64) -> f64 + Sync,
{
    fn value(&self, edge: usize, x: f64) -> f64 {
        (self.value)(edge, x)
    }

    fn derivative(&self, edge: usize, x: f64) -> f64 {
        (self.derivative)(edge, x)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantField(pub f64);

impl EdgeField for ConstantField {
    fn value(&self, _: usize, _: f64) -> f64 {
        self.0
    }

    fn derivative(&self, _: usize, _: f64) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Pressure,
    Flux,
}

/// A discrete pressure or flux field of a [`GlobalSpace`].
pub struct DiscreteField<'a> {
    space: &'a GlobalSpace,
    kind: FieldKind,
    local: DVector<f64>,
}

impl<'a> DiscreteField<'a> {
    pub fn pressure(space: &'a GlobalSpace, p: &DVector<f64>) -> Self {
        Self { space, kind: FieldKind::Pressure, local: p.clone() }
    }

    /// From global (Kirchhoff-reduced) flux coefficients.
    pub fn flux(space: &'a GlobalSpace, m: &DVector<f64>) -> Self {
        Self { space, kind: FieldKind::Flux, local: space.expand_flux(m) }
    }

    fn coeffs(&self, edge: usize) -> &[f64] {
        match self.kind {
            FieldKind::Pressure => self.space.edge_pressure(&self.local, edge),
            FieldKind::Flux => self.space.edge_flux(&self.local, edge),
        }
    }

    fn length(&self, edge: usize) -> f64 {
        self.space.network().edges()[edge].length
    }
}

impl EdgeField for DiscreteField<'_> {
    fn value(&self, edge: usize, x: f64) -> f64 {
        let el = &self.space.elements()[edge];
        let s = x / self.length(edge);
        match self.kind {
            FieldKind::Pressure => el.eval_pressure(self.coeffs(edge), s),
            FieldKind::Flux => el.eval_flux(self.coeffs(edge), s),
        }
    }

    /// Only meaningful for flux fields; pressures are treated as piecewise
    /// constant in `x` for this purpose.
    fn derivative(&self, edge: usize, x: f64) -> f64 {
        let el = &self.space.elements()[edge];
        let l = self.length(edge);
        match self.kind {
            FieldKind::Pressure => 0.0,
            FieldKind::Flux => el.eval_flux_derivative(self.coeffs(edge), x / l) / l,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::space::{build_space, Discretization};
    use crate::netgraph::single_pipe;

    #[test]
    fn discrete_flux_reproduces_linear_function() {
        let space = build_space(&single_pipe(2.0, 0.0, 0.0), Discretization::Spectral { order: 3 }).unwrap();
        let nodes = space.elements()[0].nodes();
        let m = DVector::from_iterator(nodes.len(), nodes.iter().map(|s| 1.0 + 4.0 * s));
        let f = DiscreteField::flux(&space, &m);
        // x = 2 s
        assert!((f.value(0, 1.0) - 3.0).abs() < 1e-13);
        assert!((f.derivative(0, 0.3) - 2.0).abs() < 1e-12);
    }
}
