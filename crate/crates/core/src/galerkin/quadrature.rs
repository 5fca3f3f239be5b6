//! Quadrature rules on the reference interval `[0, 1]`.

use super::polynomial::legendre_with_derivative;

/// Points and nonnegative weights on `[0, 1]` (or on a scaled edge).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Maps the rule from `[0, 1]` to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> QuadratureRule {
        let l = b - a;
        QuadratureRule {
            points: self.points.iter().map(|&x| a + l * x).collect(),
            weights: self.weights.iter().map(|&w| l * w).collect(),
        }
    }

    /// Composite trapezoid rule with `cells` uniform cells: nodes `i / cells`,
    /// end weights `h / 2`, interior weights `h`.
    pub fn trapezoid(cells: usize) -> QuadratureRule {
        assert!(cells >= 1);
        let h = 1.0 / cells as f64;
        let points = (0..=cells).map(|i| i as f64 * h).collect();
        let weights = (0..=cells).map(|i| if i == 0 || i == cells { 0.5 * h } else { h }).collect();
        QuadratureRule { points, weights }
    }

    /// `n`-point Gauss-Legendre rule, exact for polynomials of degree `2n - 1`.
    pub fn gauss_legendre(n: usize) -> QuadratureRule {
        assert!(n >= 1);
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // ascending order on [0, 1]
            points[n - 1 - i] = 0.5 * (x + 1.0);
            weights[n - 1 - i] = 0.5 * w;
        }
        QuadratureRule { points, weights }
    }

    /// Gauss-Lobatto rule with `order + 1` points including both endpoints,
    /// exact for polynomials of degree `2 order - 1`.
    pub fn gauss_lobatto(order: usize) -> QuadratureRule {
        assert!(order >= 1);
        let n = order;
        let mut points = vec![0.0; n + 1];
        let mut weights = vec![0.0; n + 1];
        for i in 0..=n {
            // Chebyshev-Gauss-Lobatto initial guess, Newton on (1 - x^2) P_n'
            let mut x = -(std::f64::consts::PI * i as f64 / n as f64).cos();
            if i > 0 && i < n {
                for _ in 0..100 {
                    let (p, _) = legendre_with_derivative(n, x);
                    let (pm, _) = legendre_with_derivative(n - 1, x);
                    let dx = (x * p - pm) / ((n + 1) as f64 * p);
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
            }
            let (p, _) = legendre_with_derivative(n, x);
            points[i] = 0.5 * (x + 1.0);
            weights[i] = 1.0 / ((n * (n + 1)) as f64 * p * p);
        }
        points[0] = 0.0;
        points[n] = 1.0;
        QuadratureRule { points, weights }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial_exactness(rule: &QuadratureRule, degree: usize) -> f64 {
        (0..=degree)
            .map(|k| (rule.integrate(|x| x.powi(k as i32)) - 1.0 / (k as f64 + 1.0)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn three_point_lobatto() {
        let r = QuadratureRule::gauss_lobatto(2);
        let expect_x = [0.0, 0.5, 1.0];
        let expect_w = [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0];
        for i in 0..3 {
            assert!((r.points[i] - expect_x[i]).abs() < 1e-15);
            assert!((r.weights[i] - expect_w[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn lobatto_exactness() {
        for p in 1..=12 {
            let r = QuadratureRule::gauss_lobatto(p);
            assert!(monomial_exactness(&r, 2 * p - 1) < 1e-13, "order {p}");
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            // not exact one degree higher (the defect shrinks like a factorial)
            if p <= 6 {
                let k = 2 * p as i32;
                assert!((r.integrate(|x| x.powi(k)) - 1.0 / (k as f64 + 1.0)).abs() > 1e-12);
            }
        }
    }

    #[test]
    fn legendre_exactness() {
        for n in 1..=15 {
            let r = QuadratureRule::gauss_legendre(n);
            assert!(monomial_exactness(&r, 2 * n - 1) < 1e-13, "n = {n}");
            assert!(r.points.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn trapezoid_integrates_linears() {
        let r = QuadratureRule::trapezoid(4);
        assert_eq!(r.weights, vec![0.125, 0.25, 0.25, 0.25, 0.125]);
        assert!(monomial_exactness(&r, 1) < 1e-15);
    }
}
