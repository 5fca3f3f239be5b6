//! Legendre and Lagrange polynomial bases.

/// `P_n(x)` and `P_n'(x)` on `[-1, 1]` by the three-term recurrence.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    let (mut d0, mut d1) = (0.0, 1.0);
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        let d2 = d0 + (2.0 * kf + 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

/// Shifted Legendre polynomial `L_k(s) = P_k(2s - 1)` on `[0, 1]` with its
/// derivative. `int_0^1 L_k L_l = delta_kl / (2k + 1)`.
pub fn shifted_legendre(k: usize, s: f64) -> (f64, f64) {
    let (p, dp) = legendre_with_derivative(k, 2.0 * s - 1.0);
    (p, 2.0 * dp)
}

/// Lagrange basis on distinct nodes.
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    nodes: Vec<f64>,
    denominators: Vec<f64>,
}

impl LagrangeBasis {
    pub fn new(nodes: Vec<f64>) -> Self {
        let denominators = (0..nodes.len())
            .map(|j| (0..nodes.len()).filter(|&k| k != j).map(|k| nodes[j] - nodes[k]).product())
            .collect();
        Self { nodes, denominators }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Values and derivatives of all basis functions at `s`.
    pub fn eval_all(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.nodes.len();
        let mut values = vec![0.0; n];
        let mut derivs = vec![0.0; n];
        for j in 0..n {
            let mut value = 1.0;
            let mut deriv = 0.0;
            for k in 0..n {
                if k == j {
                    continue;
                }
                // product rule, accumulated factor by factor
                deriv = deriv * (s - self.nodes[k]) + value;
                value *= s - self.nodes[k];
            }
            values[j] = value / self.denominators[j];
            derivs[j] = deriv / self.denominators[j];
        }
        (values, derivs)
    }
}
