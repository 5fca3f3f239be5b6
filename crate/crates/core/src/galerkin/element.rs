//! Local pressure/flux bases on a single reference edge `[0, 1]`.

use super::polynomial::{shifted_legendre, LagrangeBasis};
use super::quadrature::QuadratureRule;

/// Basis functions that are nonzero at one quadrature point:
/// `(local index, value, derivative)`.
pub type Support = Vec<(usize, f64, f64)>;

#[derive(Debug, Clone)]
pub struct QuadPoint {
    pub s: f64,
    pub w: f64,
    pub flux: Support,
    pub pressure: Support,
}

/// Local element of one pipe. Flux bases are nodal (Lagrange) on
/// [`EdgeElement::nodes`], with node 0 at `s = 0` and the last node at
/// `s = 1`; all other flux basis functions vanish at the endpoints.
#[derive(Debug, Clone)]
pub enum EdgeElement {
    /// Piecewise constants / continuous piecewise linears on a uniform mesh,
    /// lumped with the trapezoid rule.
    FemP0P1 { cells: usize },
    /// `P_{order-1}` in the Legendre basis / `P_order` in the Lagrange basis
    /// at the Gauss-Lobatto points, lumped with Gauss-Lobatto quadrature.
    Spectral { order: usize, lobatto: QuadratureRule, basis: LagrangeBasis },
    /// Continuous P1 for both variables. Violates the compatibility
    /// condition; kept for diagnostics.
    EqualOrderP1 { cells: usize },
}

impl EdgeElement {
    pub fn fem(cells: usize) -> Self {
        Self::FemP0P1 { cells }
    }

    pub fn spectral(order: usize) -> Self {
        let lobatto = QuadratureRule::gauss_lobatto(order);
        let basis = LagrangeBasis::new(lobatto.points.clone());
        Self::Spectral { order, lobatto, basis }
    }

    pub fn equal_order_p1(cells: usize) -> Self {
        Self::EqualOrderP1 { cells }
    }

    pub fn flux_dim(&self) -> usize {
        match self {
            Self::FemP0P1 { cells } | Self::EqualOrderP1 { cells } => cells + 1,
            Self::Spectral { order, .. } => order + 1,
        }
    }

    pub fn pressure_dim(&self) -> usize {
        match self {
            Self::FemP0P1 { cells } => *cells,
            Self::EqualOrderP1 { cells } => cells + 1,
            Self::Spectral { order, .. } => *order,
        }
    }

    /// Lumping rule, collocated with the flux nodes.
    pub fn lumping_rule(&self) -> QuadratureRule {
        match self {
            Self::FemP0P1 { cells } | Self::EqualOrderP1 { cells } => QuadratureRule::trapezoid(*cells),
            Self::Spectral { lobatto, .. } => lobatto.clone(),
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.lumping_rule().points
    }

    /// Quadrature with `extra` points beyond what integrates products of
    /// basis functions exactly.
    pub fn quadrature(&self, extra: usize) -> Vec<QuadPoint> {
        match self {
            Self::FemP0P1 { cells } | Self::EqualOrderP1 { cells } => {
                let n = *cells;
                let h = 1.0 / n as f64;
                let gauss = QuadratureRule::gauss_legendre(2 + extra);
                let equal_order = matches!(self, Self::EqualOrderP1 { .. });
                let mut out = Vec::with_capacity(n * gauss.len());
                for c in 0..n {
                    let a = c as f64 * h;
                    for (&g, &w) in gauss.points.iter().zip(&gauss.weights) {
                        let s = a + h * g;
                        let flux = vec![(c, 1.0 - g, -1.0 / h), (c + 1, g, 1.0 / h)];
                        let pressure = if equal_order { flux.clone() } else { vec![(c, 1.0, 0.0)] };
                        out.push(QuadPoint { s, w: w * h, flux, pressure });
                    }
                }
                out
            }
            Self::Spectral { order, basis, .. } => {
                let gauss = QuadratureRule::gauss_legendre(order + 1 + extra);
                gauss
                    .points
                    .iter()
                    .zip(&gauss.weights)
                    .map(|(&s, &w)| {
                        let (v, d) = basis.eval_all(s);
                        let flux = (0..v.len()).map(|j| (j, v[j], d[j])).collect();
                        let pressure = (0..*order)
                            .map(|k| {
                                let (l, dl) = shifted_legendre(k, s);
                                (k, l, dl)
                            })
                            .collect();
                        QuadPoint { s, w, flux, pressure }
                    })
                    .collect()
            }
        }
    }

    pub fn eval_flux(&self, coeffs: &[f64], s: f64) -> f64 {
        match self {
            Self::FemP0P1 { cells } | Self::EqualOrderP1 { cells } => piecewise_linear(coeffs, *cells, s),
            Self::Spectral { basis, .. } => {
                let (v, _) = basis.eval_all(s);
                v.iter().zip(coeffs).map(|(a, b)| a * b).sum()
            }
        }
    }

    /// Derivative with respect to the reference coordinate `s`.
    pub fn eval_flux_derivative(&self, coeffs: &[f64], s: f64) -> f64 {
        match self {
            Self::FemP0P1 { cells } | Self::EqualOrderP1 { cells } => {
                let n = *cells;
                let c = ((s * n as f64).floor() as usize).min(n - 1);
                (coeffs[c + 1] - coeffs[c]) * n as f64
            }
            Self::Spectral { basis, .. } => {
                let (_, d) = basis.eval_all(s);
                d.iter().zip(coeffs).map(|(a, b)| a * b).sum()
            }
        }
    }

    pub fn eval_pressure(&self, coeffs: &[f64], s: f64) -> f64 {
        match self {
            Self::FemP0P1 { cells } => {
                let c = ((s * *cells as f64).floor() as usize).min(cells - 1);
                coeffs[c]
            }
            Self::EqualOrderP1 { cells } => piecewise_linear(coeffs, *cells, s),
            Self::Spectral { order, .. } => (0..*order).map(|k| coeffs[k] * shifted_legendre(k, s).0).sum(),
        }
    }

    /// Pressure value suitable for nodal output at flux node `i`: the mean of
    /// the one-sided limits for piecewise constants, the point value otherwise.
    pub fn pressure_at_node(&self, coeffs: &[f64], i: usize) -> f64 {
        match self {
            Self::FemP0P1 { cells } => {
                if i == 0 {
                    coeffs[0]
                } else if i == *cells {
                    coeffs[cells - 1]
                } else {
                    0.5 * (coeffs[i - 1] + coeffs[i])
                }
            }
            _ => self.eval_pressure(coeffs, self.nodes()[i]),
        }
    }
}

fn piecewise_linear(coeffs: &[f64], cells: usize, s: f64) -> f64 {
    let x = (s * cells as f64).clamp(0.0, cells as f64);
    let c = (x.floor() as usize).min(cells - 1);
    let t = x - c as f64;
    (1.0 - t) * coeffs[c] + t * coeffs[c + 1]
}

/// Reference-edge matrices as `(row, col, value)` triplets.
#[derive(Debug, Clone, Default)]
pub struct LocalMatrices {
    /// `(q_i, q_j)`
    pub pressure_mass: Vec<(usize, usize, f64)>,
    /// `(q_i, v_j')`
    pub divergence: Vec<(usize, usize, f64)>,
    /// `(v_i, v_j)` integrated exactly
    pub flux_mass: Vec<(usize, usize, f64)>,
    /// `(v_i', v_j')`
    pub flux_stiffness: Vec<(usize, usize, f64)>,
}

impl EdgeElement {
    pub fn local_matrices(&self) -> LocalMatrices {
        let nq = self.pressure_dim();
        let nv = self.flux_dim();
        let mut dense_mp = std::collections::BTreeMap::new();
        let mut dense_g = std::collections::BTreeMap::new();
        let mut dense_mm = std::collections::BTreeMap::new();
        let mut dense_k = std::collections::BTreeMap::new();
        for qp in self.quadrature(0) {
            for &(i, qi, _) in &qp.pressure {
                for &(j, qj, _) in &qp.pressure {
                    *dense_mp.entry((i, j)).or_insert(0.0) += qp.w * qi * qj;
                }
                for &(j, _, dvj) in &qp.flux {
                    *dense_g.entry((i, j)).or_insert(0.0) += qp.w * qi * dvj;
                }
            }
            for &(i, vi, dvi) in &qp.flux {
                for &(j, vj, dvj) in &qp.flux {
                    *dense_mm.entry((i, j)).or_insert(0.0) += qp.w * vi * vj;
                    *dense_k.entry((i, j)).or_insert(0.0) += qp.w * dvi * dvj;
                }
            }
        }
        let flatten = |m: std::collections::BTreeMap<(usize, usize), f64>, tol: f64| {
            m.into_iter().filter(|(_, v)| v.abs() > tol).map(|((i, j), v)| (i, j, v)).collect::<Vec<_>>()
        };
        // Legendre cross terms are zero up to round-off
        let tol = 1e-14;
        let lm = LocalMatrices {
            pressure_mass: flatten(dense_mp, tol),
            divergence: flatten(dense_g, tol),
            flux_mass: flatten(dense_mm, 0.0),
            flux_stiffness: flatten(dense_k, 0.0),
        };
        debug_assert!(lm.pressure_mass.iter().all(|&(i, j, _)| i < nq && j < nq));
        debug_assert!(lm.flux_mass.iter().all(|&(i, j, _)| i < nv && j < nv));
        lm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(t: &[(usize, usize, f64)], r: usize, c: usize) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; c]; r];
        for &(i, j, v) in t {
            d[i][j] += v;
        }
        d
    }

    #[test]
    fn fem_divergence_is_difference_stencil() {
        let lm = EdgeElement::fem(2).local_matrices();
        let g = dense(&lm.divergence, 2, 3);
        let expect = [[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0]];
        for i in 0..2 {
            for j in 0..3 {
                assert!((g[i][j] - expect[i][j]).abs() < 1e-14);
            }
        }
        let mp = dense(&lm.pressure_mass, 2, 2);
        assert!((mp[0][0] - 0.5).abs() < 1e-15 && mp[0][1] == 0.0);
    }

    #[test]
    fn fem_consistent_mass() {
        let lm = EdgeElement::fem(4).local_matrices();
        let m = dense(&lm.flux_mass, 5, 5);
        let h = 0.25;
        assert!((m[0][0] - h / 3.0).abs() < 1e-15);
        assert!((m[2][2] - 2.0 * h / 3.0).abs() < 1e-15);
        assert!((m[1][2] - h / 6.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_pressure_mass_is_diagonal() {
        for p in 1..=10 {
            let lm = EdgeElement::spectral(p).local_matrices();
            for &(i, j, v) in &lm.pressure_mass {
                assert_eq!(i, j, "off-diagonal {v}");
                assert!((v - 1.0 / (2 * i + 1) as f64).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn spectral_flux_endpoints() {
        let e = EdgeElement::spectral(4);
        let nodes = e.nodes();
        assert_eq!(nodes[0], 0.0);
        assert_eq!(nodes[4], 1.0);
        let coeffs = [1.0, 0.0, 0.0, 0.0, 0.0];
        assert!((e.eval_flux(&coeffs, 0.0) - 1.0).abs() < 1e-14);
        assert!(e.eval_flux(&coeffs, 1.0).abs() < 1e-14);
    }
}
