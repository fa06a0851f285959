//! External potentials `V(x) = 1 + |g(x)|^α` with a strict minimum at 0.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The inner function `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialForm {
    /// `g(x) = |x|`, so `V = 1 + |x|^α`.
    #[default]
    Power,
    /// `g(x) = |x|²`, so `V = 1 + |x|^{2α}` with a smooth `g`.
    SquaredNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelPotential {
    alpha: f64,
    form: PotentialForm,
    domain_radius: f64,
}

impl ModelPotential {
    pub fn new(alpha: f64, form: PotentialForm, domain_radius: f64) -> Result<Self> {
        if !(alpha > 2.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "alpha = {alpha} must exceed 2"
            )));
        }
        if !(domain_radius > 0.0) {
            return Err(Error::InvalidParameter(
                "domain radius must be positive".into(),
            ));
        }
        Ok(Self {
            alpha,
            form,
            domain_radius,
        })
    }

    /// `V = 1 + |x|^α` on the unit ball.
    pub fn power(alpha: f64) -> Result<Self> {
        Self::new(alpha, PotentialForm::Power, 1.0)
    }

    /// The exponent `α` of `|g|^α`, which fixes every scaling exponent.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn form(&self) -> PotentialForm {
        self.form
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    /// Homogeneity degree of `V − 1` in `x`.
    pub fn degree(&self) -> f64 {
        match self.form {
            PotentialForm::Power => self.alpha,
            PotentialForm::SquaredNorm => 2.0 * self.alpha,
        }
    }

    /// `|g(x)|`
    pub fn g_abs(&self, x: [f64; 3]) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        match self.form {
            PotentialForm::Power => r2.sqrt(),
            PotentialForm::SquaredNorm => r2,
        }
    }

    #[inline]
    pub fn value(&self, x: [f64; 3]) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        1.0 + r2.powf(0.5 * self.degree())
    }

    /// `∇V = α|g|^{α−2} g ∇g`
    pub fn gradient(&self, x: [f64; 3]) -> [f64; 3] {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let d = self.degree();
        // d |x|^{d-2} x
        let f = if r2 == 0.0 {
            0.0
        } else {
            d * r2.powf(0.5 * d - 1.0)
        };
        [f * x[0], f * x[1], f * x[2]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimum_at_origin_and_gradient_matches_differences() {
        for form in [PotentialForm::Power, PotentialForm::SquaredNorm] {
            let v = ModelPotential::new(3.0, form, 1.0).unwrap();
            assert_eq!(v.value([0.0; 3]), 1.0);
            assert!(v.value([0.3, 0.0, 0.1]) > 1.0);
            let x = [0.4, -0.2, 0.3];
            let g = v.gradient(x);
            for d in 0..3 {
                let t = 1e-6;
                let mut a = x;
                let mut b = x;
                a[d] += t;
                b[d] -= t;
                let fd = (v.value(a) - v.value(b)) / (2.0 * t);
                assert!((fd - g[d]).abs() < 1e-8);
            }
            // V = 1 + |g|^α
            assert!((v.value(x) - 1.0 - v.g_abs(x).powf(3.0)).abs() < 1e-14);
        }
        assert!(ModelPotential::power(2.0).is_err());
    }
}
