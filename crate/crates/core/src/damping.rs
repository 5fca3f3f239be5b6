//! Friction laws `d(m)` for the flux equation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingFamily {
    /// `beta * m`
    Linear,
    /// `alpha * |m|^sigma * m`
    PowerAbs,
    /// `beta * m + alpha * |m|^sigma * m`
    AffinePower,
}

/// Odd, monotone friction law from a closed three-parameter family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingModel {
    pub family: DampingFamily,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    /// Growth exponent of the power term.
    #[serde(default)]
    pub sigma: f64,
}

impl DampingModel {
    pub fn linear(beta: f64) -> Self {
        Self { family: DampingFamily::Linear, alpha: 0.0, beta, sigma: 0.0 }
    }

    pub fn power_abs(alpha: f64, sigma: f64) -> Self {
        Self { family: DampingFamily::PowerAbs, alpha, beta: 0.0, sigma }
    }

    pub fn affine_power(beta: f64, alpha: f64, sigma: f64) -> Self {
        Self { family: DampingFamily::AffinePower, alpha, beta, sigma }
    }

    /// `d(m) = |m| m`, the friction law of the network experiment.
    pub fn quadratic() -> Self {
        Self::power_abs(1.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("sigma", self.sigma)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidDamping(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    fn linear_coefficient(&self) -> f64 {
        match self.family {
            DampingFamily::PowerAbs => 0.0,
            _ => self.beta,
        }
    }

    fn power_coefficient(&self) -> f64 {
        match self.family {
            DampingFamily::Linear => 0.0,
            _ => self.alpha,
        }
    }

    pub fn eval(&self, m: f64) -> f64 {
        let a = self.power_coefficient();
        let power = if a == 0.0 { 0.0 } else { a * m.abs().powf(self.sigma) * m };
        self.linear_coefficient() * m + power
    }

    /// `d'(m) = beta + alpha (sigma + 1) |m|^sigma`; at `m = 0` with
    /// `0 < sigma < 1` this is the one-sided limit `beta`.
    pub fn eval_derivative(&self, m: f64) -> f64 {
        let a = self.power_coefficient();
        let power = if a == 0.0 { 0.0 } else { a * (self.sigma + 1.0) * m.abs().powf(self.sigma) };
        self.linear_coefficient() + power
    }

    /// Certifies the growth and monotonicity constants of the friction law
    /// on `[-m_bound, m_bound]`.
    pub fn check_assumption1(&self, m_bound: f64) -> Assumption1Report {
        let beta = self.linear_coefficient();
        let alpha = self.power_coefficient();
        // d' is even and nondecreasing in |m|, so the infimum sits at m = 0
        let d0 = if alpha > 0.0 && self.sigma == 0.0 { beta + alpha } else { beta };
        let d2 = alpha * (self.sigma + 1.0);
        let c1_smooth = alpha == 0.0 || self.sigma == 0.0 || self.sigma >= 1.0;
        Assumption1Report {
            satisfies_d0_positive: d0 > 0.0,
            d0,
            d1: beta,
            d2,
            growth_exponent: if alpha > 0.0 { self.sigma } else { 0.0 },
            c1_smooth,
            m_bound,
            sup_derivative: self.eval_derivative(m_bound),
        }
    }
}

impl Default for DampingModel {
    fn default() -> Self {
        Self::quadratic()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assumption1Report {
    /// `inf d'` is strictly positive.
    pub satisfies_d0_positive: bool,
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    pub growth_exponent: f64,
    pub c1_smooth: bool,
    pub m_bound: f64,
    /// `d'(m_bound)`, the largest slope over the certified range.
    pub sup_derivative: f64,
}

impl Assumption1Report {
    pub fn holds(&self) -> bool {
        self.satisfies_d0_positive && self.c1_smooth
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quadratic_law_values() {
        let d = DampingModel::quadratic();
        assert_eq!(d.eval(2.0), 4.0);
        assert_eq!(d.eval(-2.0), -4.0);
        assert_eq!(d.eval_derivative(3.0), 6.0);
        assert_eq!(d.eval_derivative(0.0), 0.0);
    }

    #[test]
    fn zero_is_fixed() {
        for d in [
            DampingModel::linear(2.0),
            DampingModel::power_abs(1.5, 0.5),
            DampingModel::affine_power(0.3, 2.0, 2.0),
        ] {
            assert_eq!(d.eval(0.0), 0.0);
        }
    }

    #[test]
    fn linear_law() {
        assert_eq!(DampingModel::linear(3.0).eval(-1.5), -4.5);
    }

    #[test]
    fn affine_derivative_matches_central_difference() {
        let d = DampingModel::affine_power(0.5, 2.0, 2.0);
        assert!((d.eval_derivative(1.0) - 6.5).abs() < 1e-14);
        let step = 1e-6;
        let fd = (d.eval(1.0 + step) - d.eval(1.0 - step)) / (2.0 * step);
        assert!((fd - 6.5).abs() / 6.5 < 1e-6);
    }

    #[test]
    fn sublinear_exponent_uses_one_sided_limit() {
        let d = DampingModel::affine_power(0.25, 1.0, 0.5);
        assert_eq!(d.eval_derivative(0.0), 0.25);
        assert!(!d.check_assumption1(1.0).c1_smooth);
    }

    #[test]
    fn assumption1_reports() {
        let r = DampingModel::linear(1.0).check_assumption1(5.0);
        assert!(r.satisfies_d0_positive);
        assert_eq!(r.d0, 1.0);

        let r = DampingModel::quadratic().check_assumption1(5.0);
        assert!(!r.satisfies_d0_positive);
        assert_eq!(r.d0, 0.0);

        let r = DampingModel::affine_power(0.1, 1.0, 1.0).check_assumption1(10.0);
        assert_eq!((r.d0, r.d1, r.d2), (0.1, 0.1, 2.0));
        assert!(r.holds());
    }

    #[test]
    fn negative_parameters_rejected() {
        assert!(DampingModel::linear(-1.0).validate().is_err());
        assert!(DampingModel::power_abs(1.0, f64::NAN).validate().is_err());
    }

    #[test]
    fn config_fragment_parses() {
        let d: DampingModel = serde_json::from_str(r#"{"family":"power_abs","alpha":1.0,"sigma":1.0}"#).unwrap();
        assert_eq!(d, DampingModel::quadratic());
    }

    fn any_model() -> impl Strategy<Value = DampingModel> {
        (0.0..3.0f64, 0.0..3.0f64, prop::sample::select(vec![0.5, 1.0, 1.5, 2.0, 3.0]), 0..3usize).prop_map(
            |(b, a, s, fam)| match fam {
                0 => DampingModel::linear(b),
                1 => DampingModel::power_abs(a, s),
                _ => DampingModel::affine_power(b, a, s),
            },
        )
    }

    proptest! {
        #[test]
        fn odd_and_monotone(d in any_model(), m1 in -10.0..10.0f64, m2 in -10.0..10.0f64) {
            prop_assert!((d.eval(-m1) + d.eval(m1)).abs() <= 1e-12 * (1.0 + d.eval(m1).abs()));
            let (lo, hi) = if m1 < m2 { (m1, m2) } else { (m2, m1) };
            let slack = 1e-12 * (1.0 + d.eval(hi).abs() + d.eval(lo).abs());
            prop_assert!(d.eval(hi) - d.eval(lo) >= d.linear_coefficient() * (hi - lo) - slack);
            prop_assert!((d.eval(m1) - d.eval(m2)) * (m1 - m2) >= -slack);
            prop_assert_eq!(d.eval_derivative(m1), d.eval_derivative(-m1));
            prop_assert!(d.eval_derivative(m1) >= d.linear_coefficient());
        }

        #[test]
        fn derivative_matches_finite_differences(d in any_model(), m in -10.0..10.0f64) {
            prop_assume!(m.abs() > 1e-3);
            let step = 1e-6;
            let fd = (d.eval(m + step) - d.eval(m - step)) / (2.0 * step);
            let exact = d.eval_derivative(m);
            prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0));
        }
    }
}
