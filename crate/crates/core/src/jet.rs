//! Truncated Taylor jets in one and two variables.
//!
//! Coefficients are stored in monomial form, `c[k] = f⁽ᵏ⁾(x₀)/k!`, and all
//! arithmetic is exact at the retained order: coefficient `k` of a product
//! depends only on coefficients `≤ k` of the factors. Jets are the only
//! source of derivative evidence for the flat bump profiles; finite
//! differences of nearly-flat functions cancel catastrophically and are
//! never used for that purpose.

use crate::error::{Error, Result};

/// Hard cap on the retained jet order; factorial growth exhausts the double
/// range not far beyond this.
pub const JET_ORDER_CAP: usize = 12;

/// Univariate truncated Taylor series.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    c: Vec<f64>,
}

impl Jet {
    pub fn from_coeffs(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() || c.len() - 1 > JET_ORDER_CAP {
            return Err(Error::JetOrder {
                requested: c.len().saturating_sub(1),
                cap: JET_ORDER_CAP,
            });
        }
        Ok(Self { c })
    }

    pub fn constant(value: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = value;
        Self { c }
    }

    /// The identity function `u ↦ u` expanded at `center`.
    pub fn variable(center: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = center;
        if order >= 1 {
            c[1] = 1.0;
        }
        Self { c }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.c.get(k).copied().unwrap_or(0.0)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    /// `|f⁽ᵏ⁾| = |c_k|·k!`.
    pub fn deriv_magnitude(&self, k: usize) -> f64 {
        self.coeff(k).abs() * factorial(k)
    }

    pub fn add(&self, rhs: &Jet) -> Jet {
        self.zip(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Jet) -> Jet {
        self.zip(rhs, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            c: self.c.iter().map(|&a| a * s).collect(),
        }
    }

    fn zip(&self, rhs: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let n = self.c.len().max(rhs.c.len());
        Jet {
            c: (0..n).map(|k| f(self.coeff(k), rhs.coeff(k))).collect(),
        }
    }

    /// Cauchy product truncated at the shared order.
    pub fn mul(&self, rhs: &Jet) -> Jet {
        let n = self.c.len().max(rhs.c.len());
        let mut c = vec![0.0; n];
        for (k, ck) in c.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..=k {
                acc += self.coeff(j) * rhs.coeff(k - j);
            }
            *ck = acc;
        }
        Jet { c }
    }

    pub fn div(&self, rhs: &Jet) -> Jet {
        let n = self.c.len().max(rhs.c.len());
        let b0 = rhs.coeff(0);
        let mut q = vec![0.0; n];
        for k in 0..n {
            let mut acc = self.coeff(k);
            for j in 1..=k {
                acc -= rhs.coeff(j) * q[k - j];
            }
            q[k] = acc / b0;
        }
        Jet { c: q }
    }

    /// `exp ∘ self`, by the convolution recurrence for `e′ = u′e`.
    pub fn exp(&self) -> Jet {
        let n = self.c.len();
        let mut e = vec![0.0; n];
        e[0] = self.c[0].exp();
        for k in 1..n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * self.coeff(j) * e[k - j];
            }
            e[k] = acc / k as f64;
        }
        Jet { c: e }
    }

    /// `self^alpha` for real `alpha`; the constant term must be positive.
    pub fn powf(&self, alpha: f64) -> Jet {
        let n = self.c.len();
        let u0 = self.c[0];
        let mut p = vec![0.0; n];
        p[0] = u0.powf(alpha);
        for k in 1..n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += (alpha * j as f64 - (k - j) as f64) * self.coeff(j) * p[k - j];
            }
            p[k] = acc / (k as f64 * u0);
        }
        Jet { c: p }
    }

    /// `outer ∘ self` where `outer` is given by monomial coefficients around
    /// `self`'s constant term; requires that constant term to be zero.
    pub fn compose_into(outer: &[f64], inner: &Jet) -> Result<Jet> {
        if inner.coeff(0) != 0.0 {
            return Err(Error::JetOrder {
                requested: usize::MAX,
                cap: JET_ORDER_CAP,
            });
        }
        let order = inner.order();
        let mut acc = Jet::constant(*outer.last().unwrap_or(&0.0), order);
        for &c in outer.iter().rev().skip(1) {
            acc = acc.mul(inner);
            acc.c[0] += c;
        }
        Ok(acc)
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `ln k!`, stable for the fit machinery.
pub fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

/// Bivariate truncated Taylor series, coefficients on the triangle
/// `i + j ≤ order`, graded-lexicographic storage.
#[derive(Debug, Clone)]
pub struct Jet2 {
    order: usize,
    c: Vec<f64>,
}

fn tri_idx(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

fn tri_len(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

impl Jet2 {
    pub fn zero(order: usize) -> Self {
        Self {
            order,
            c: vec![0.0; tri_len(order)],
        }
    }

    pub fn constant(value: f64, order: usize) -> Self {
        let mut z = Self::zero(order);
        z.c[0] = value;
        z
    }

    /// The coordinate function `x` expanded at `(x0, ·)`.
    pub fn variable_x(x0: f64, order: usize) -> Self {
        let mut z = Self::zero(order);
        z.c[0] = x0;
        if order >= 1 {
            z.c[tri_idx(1, 0)] = 1.0;
        }
        z
    }

    pub fn variable_y(y0: f64, order: usize) -> Self {
        let mut z = Self::zero(order);
        z.c[0] = y0;
        if order >= 1 {
            z.c[tri_idx(0, 1)] = 1.0;
        }
        z
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.order {
            0.0
        } else {
            self.c[tri_idx(i, j)]
        }
    }

    /// `|∂_x^i ∂_y^j f| = |c_{ij}|·i!·j!`.
    pub fn deriv_magnitude(&self, i: usize, j: usize) -> f64 {
        self.coeff(i, j).abs() * factorial(i) * factorial(j)
    }

    pub fn add(&self, rhs: &Jet2) -> Jet2 {
        debug_assert_eq!(self.order, rhs.order);
        Jet2 {
            order: self.order,
            c: self.c.iter().zip(&rhs.c).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Jet2 {
        Jet2 {
            order: self.order,
            c: self.c.iter().map(|&a| a * s).collect(),
        }
    }

    pub fn mul(&self, rhs: &Jet2) -> Jet2 {
        debug_assert_eq!(self.order, rhs.order);
        let mut out = Jet2::zero(self.order);
        for d1 in 0..=self.order {
            for j1 in 0..=d1 {
                let a = self.c[tri_idx(d1 - j1, j1)];
                if a == 0.0 {
                    continue;
                }
                for d2 in 0..=(self.order - d1) {
                    for j2 in 0..=d2 {
                        let b = rhs.c[tri_idx(d2 - j2, j2)];
                        if b == 0.0 {
                            continue;
                        }
                        out.c[tri_idx(d1 - j1 + d2 - j2, j1 + j2)] += a * b;
                    }
                }
            }
        }
        out
    }

    /// `outer ∘ self` with `outer` a univariate monomial series around
    /// `self`'s constant term; the constant term must be zero.
    pub fn compose_series(outer: &[f64], inner: &Jet2) -> Result<Jet2> {
        if inner.c[0] != 0.0 {
            return Err(Error::JetOrder {
                requested: usize::MAX,
                cap: JET_ORDER_CAP,
            });
        }
        let mut acc = Jet2::constant(*outer.last().unwrap_or(&0.0), inner.order);
        for &c in outer.iter().rev().skip(1) {
            acc = acc.mul(inner);
            acc.c[0] += c;
        }
        Ok(acc)
    }

    /// Splits off the constant term, returning `(c00, self − c00)`.
    pub fn split_constant(&self) -> (f64, Jet2) {
        let mut rest = self.clone();
        let c0 = rest.c[0];
        rest.c[0] = 0.0;
        (c0, rest)
    }
}

/// Monomial coefficients of `w ↦ (s0 + w)^alpha` up to `order`, for the
/// composition of a power with a constant-term-bearing jet.
pub fn power_series_at(s0: f64, alpha: f64, order: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(order + 1);
    let mut coeff = s0.powf(alpha);
    c.push(coeff);
    for k in 0..order {
        coeff *= (alpha - k as f64) / (k as f64 + 1.0) / s0;
        c.push(coeff);
    }
    c
}
