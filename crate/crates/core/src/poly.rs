//! Dense univariate polynomials with exact formal derivatives and
//! antiderivatives. This is the supported analytic input class for
//! frequency paths: derivatives of any admissible path component are exact,
//! so no differentiation noise enters the constructions downstream.

use crate::error::{Error, Result};

/// Maximum supported degree for path components.
pub const MAX_DEGREE: usize = 16;

/// Polynomial in one variable, coefficients in ascending degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    /// Builds a polynomial from ascending-degree coefficients.
    ///
    /// Trailing zero coefficients are kept as given; the empty list is the
    /// zero polynomial.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        let degree = coeffs.len().saturating_sub(1);
        if degree > MAX_DEGREE {
            return Err(Error::DegreeCap {
                degree,
                cap: MAX_DEGREE,
            });
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Horner evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    /// Formal derivative.
    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly { coeffs: vec![] };
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| k as f64 * c)
            .collect();
        Poly { coeffs }
    }

    /// Antiderivative vanishing at 0.
    pub fn antiderivative(&self) -> Poly {
        if self.coeffs.is_empty() {
            return Poly { coeffs: vec![] };
        }
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(0.0);
        coeffs.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| c / (k + 1) as f64),
        );
        Poly { coeffs }
    }
}

/// A polynomial together with its precomputed formal derivatives.
#[derive(Debug, Clone)]
pub struct PolyJet {
    derivs: Vec<Poly>,
}

impl PolyJet {
    /// Precomputes derivatives of `p` up to `order`.
    pub fn new(p: Poly, order: usize) -> Self {
        let mut derivs = Vec::with_capacity(order + 1);
        derivs.push(p);
        for k in 0..order {
            let next = derivs[k].derivative();
            derivs.push(next);
        }
        Self { derivs }
    }

    pub fn order(&self) -> usize {
        self.derivs.len() - 1
    }

    pub fn poly(&self) -> &Poly {
        &self.derivs[0]
    }

    /// Value of the k-th derivative at `t`.
    pub fn deriv(&self, k: usize, t: f64) -> f64 {
        self.derivs[k].eval(t)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.derivs[0].eval(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_matches_naive() {
        let p = Poly::new(vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let t = 0.37;
        let naive = 1.0 - 2.0 * t + 0.5 * t * t + 3.0 * t * t * t;
        assert!((p.eval(t) - naive).abs() < 1e-15);
    }

    #[test]
    fn derivative_and_antiderivative_invert() {
        let p = Poly::new(vec![0.25, -1.0, 2.0, 4.0]).unwrap();
        let back = p.derivative().antiderivative();
        // Antiderivative drops the constant term.
        assert_eq!(&back.coeffs()[1..], &p.coeffs()[1..]);
        assert_eq!(back.coeffs()[0], 0.0);
    }

    #[test]
    fn degree_cap_enforced() {
        let coeffs = vec![1.0; MAX_DEGREE + 2];
        assert!(Poly::new(coeffs).is_err());
    }

    #[test]
    fn jet_derivatives_exact() {
        // p(t) = t^3: p' = 3t^2, p'' = 6t, p''' = 6, p'''' = 0
        let jet = PolyJet::new(Poly::new(vec![0.0, 0.0, 0.0, 1.0]).unwrap(), 4);
        assert_eq!(jet.deriv(1, 2.0), 12.0);
        assert_eq!(jet.deriv(2, 2.0), 12.0);
        assert_eq!(jet.deriv(3, 2.0), 6.0);
        assert_eq!(jet.deriv(4, 2.0), 0.0);
    }
}
