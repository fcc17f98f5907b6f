//! Analytic frequency paths `v : J → R²` with polynomial components.
//!
//! A path is admissible when its second component never vanishes on `J` and
//! its Wronskian `W = v₁′v₂ − v₁v₂′` never vanishes on `J`, i.e. the
//! direction of `v(t)` keeps turning. Both conditions are checked on a fixed
//! fine grid; the slope functions `φ = v₁/v₂` and `ψ = arctan φ` satisfy
//! `ψ′ = W/(v₁² + v₂²)`, so the turning rate has the sign of `W`.

use crate::error::{Error, Result};
use crate::poly::{Poly, PolyJet};

/// Highest derivative order a path answers queries for.
pub const DERIV_CAP: usize = 10;

/// Number of interior grid points used by [`FrequencyPath::check_conditions`].
pub const CONDITION_GRID: usize = 1001;

/// Margin by which the condition grid stays away from the open endpoints.
pub const ENDPOINT_MARGIN: f64 = 1e-6;

/// Absolute tolerance for the zero / nonzero tests at `t = 0`.
pub const ZERO_TOL: f64 = 1e-12;

/// Analytic path `t ↦ (v₁(t), v₂(t))` on an open interval `J`.
#[derive(Debug, Clone)]
pub struct FrequencyPath {
    v1: PolyJet,
    v2: PolyJet,
    j_lo: f64,
    j_hi: f64,
}

/// Values of the slope functions at one parameter.
#[derive(Debug, Clone, Copy)]
pub struct SlopeValues {
    pub phi: f64,
    pub phi_prime: f64,
    pub psi: f64,
    pub psi_prime: f64,
}

/// Report of the admissibility and non-degeneracy conditions.
#[derive(Debug, Clone, Copy)]
pub struct PathConditionReport {
    /// Wronskian nonzero at every grid point.
    pub condv_ok: bool,
    /// `v₁(0) = 0` and `v₁′(0) ≠ 0`.
    pub kol1_ok: bool,
    /// `v₁(0)v₂′(0) ≠ 0` and `v₁′(0) = 0`.
    pub kol2_ok: bool,
    /// `ω = v(0)`.
    pub omega: [f64; 2],
    /// Sign of `ω₁ω₂` (−1, 0 or +1).
    pub omega_sign_product: f64,
    /// `ω₁ω₂ < 0`, the admissibility condition for the elliptic chart.
    pub elliptic_admissible: bool,
    /// Number of grid points the conditions were sampled on.
    pub grid_points: usize,
    /// Smallest `|W|` seen on the grid.
    pub min_abs_wronskian: f64,
    /// Smallest `|v₂|` seen on the grid.
    pub min_abs_v2: f64,
}

impl FrequencyPath {
    /// Builds a path from ascending-degree coefficient lists on `J = (j_lo, j_hi)`.
    pub fn new(v1: Vec<f64>, v2: Vec<f64>, j_lo: f64, j_hi: f64) -> Result<Self> {
        if !j_lo.is_finite() || !j_hi.is_finite() || j_lo >= j_hi {
            return Err(Error::OutsideDomain {
                value: j_hi,
                lo: j_lo,
                hi: j_hi,
            });
        }
        Ok(Self {
            v1: PolyJet::new(Poly::new(v1)?, DERIV_CAP),
            v2: PolyJet::new(Poly::new(v2)?, DERIV_CAP),
            j_lo,
            j_hi,
        })
    }

    /// Default domain `J = (−1, 1)`.
    pub fn on_unit_interval(v1: Vec<f64>, v2: Vec<f64>) -> Result<Self> {
        Self::new(v1, v2, -1.0, 1.0)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.j_lo, self.j_hi)
    }

    pub fn contains(&self, t: f64) -> bool {
        t > self.j_lo && t < self.j_hi
    }

    fn require_in_domain(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::OutsideDomain {
                value: t,
                lo: self.j_lo,
                hi: self.j_hi,
            })
        }
    }

    /// `v(t)` without derivative data. Panics never; domain unchecked.
    pub fn value_unchecked(&self, t: f64) -> [f64; 2] {
        [self.v1.eval(t), self.v2.eval(t)]
    }

    pub(crate) fn eval_v2(&self, t: f64) -> f64 {
        self.v2.eval(t)
    }

    /// `(φ, φ′)` without domain or singularity checks; callers guard `v₂ ≠ 0`.
    pub(crate) fn slope_pair_unchecked(&self, t: f64) -> (f64, f64) {
        let v1 = self.v1.eval(t);
        let v2 = self.v2.eval(t);
        let d1 = self.v1.deriv(1, t);
        let d2 = self.v2.deriv(1, t);
        (v1 / v2, (d1 * v2 - v1 * d2) / (v2 * v2))
    }

    pub(crate) fn v2_poly(&self) -> &Poly {
        self.v2.poly()
    }

    /// `v(t)` and its derivatives `v⁽ᵏ⁾(t)` for `k = 0..=order`.
    pub fn eval(&self, t: f64, order: usize) -> Result<Vec<[f64; 2]>> {
        self.require_in_domain(t)?;
        if order > DERIV_CAP {
            return Err(Error::DerivativeOrder {
                requested: order,
                cap: DERIV_CAP,
            });
        }
        Ok((0..=order)
            .map(|k| [self.v1.deriv(k, t), self.v2.deriv(k, t)])
            .collect())
    }

    /// Wronskian `W(t) = v₁′(t)v₂(t) − v₁(t)v₂′(t)`.
    pub fn wronskian(&self, t: f64) -> f64 {
        self.v1.deriv(1, t) * self.v2.eval(t) - self.v1.eval(t) * self.v2.deriv(1, t)
    }

    /// Slope `φ = v₁/v₂`, its derivative, and the angle `ψ = arctan φ` with
    /// `ψ′ = φ′/(1 + φ²) = W/(v₁² + v₂²)`.
    pub fn slope_functions(&self, t: f64) -> Result<SlopeValues> {
        self.require_in_domain(t)?;
        let v1 = self.v1.eval(t);
        let v2 = self.v2.eval(t);
        if v2 == 0.0 {
            return Err(Error::SingularSlope { t });
        }
        let d1 = self.v1.deriv(1, t);
        let d2 = self.v2.deriv(1, t);
        let phi = v1 / v2;
        let phi_prime = (d1 * v2 - v1 * d2) / (v2 * v2);
        let psi = phi.atan();
        let psi_prime = phi_prime / (1.0 + phi * phi);
        Ok(SlopeValues {
            phi,
            phi_prime,
            psi,
            psi_prime,
        })
    }

    /// The sampling grid used for all whole-interval condition checks:
    /// `CONDITION_GRID` interior points plus both endpoints pulled inward by
    /// `ENDPOINT_MARGIN` (relative to the interval width).
    pub fn condition_grid(&self) -> Vec<f64> {
        let width = self.j_hi - self.j_lo;
        let margin = ENDPOINT_MARGIN * width.max(1.0);
        let lo = self.j_lo + margin;
        let hi = self.j_hi - margin;
        let mut grid = Vec::with_capacity(CONDITION_GRID + 2);
        grid.push(lo);
        for i in 0..CONDITION_GRID {
            let s = (i as f64 + 0.5) / CONDITION_GRID as f64;
            grid.push(lo + s * (hi - lo));
        }
        grid.push(hi);
        grid
    }

    /// Checks admissibility and the two Kolmogorov-type conditions.
    pub fn check_conditions(&self) -> PathConditionReport {
        let grid = self.condition_grid();
        let mut min_w = f64::INFINITY;
        let mut min_v2 = f64::INFINITY;
        for &t in &grid {
            min_w = min_w.min(self.wronskian(t).abs());
            min_v2 = min_v2.min(self.v2.eval(t).abs());
        }
        let condv_ok = min_w > ZERO_TOL && min_v2 > ZERO_TOL;

        let v1_0 = self.v1.eval(0.0);
        let v2_0 = self.v2.eval(0.0);
        let d1_0 = self.v1.deriv(1, 0.0);
        let d2_0 = self.v2.deriv(1, 0.0);
        let kol1_ok = v1_0.abs() <= ZERO_TOL && d1_0.abs() > ZERO_TOL;
        let kol2_ok = (v1_0 * d2_0).abs() > ZERO_TOL && d1_0.abs() <= ZERO_TOL;

        let product = v1_0 * v2_0;
        let omega_sign_product = if product > 0.0 {
            1.0
        } else if product < 0.0 {
            -1.0
        } else {
            0.0
        };

        PathConditionReport {
            condv_ok,
            kol1_ok,
            kol2_ok,
            omega: [v1_0, v2_0],
            omega_sign_product,
            elliptic_admissible: product < 0.0,
            grid_points: grid.len(),
            min_abs_wronskian: min_w,
            min_abs_v2: min_v2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus_path() -> FrequencyPath {
        // v(t) = (-t, 1)
        FrequencyPath::on_unit_interval(vec![0.0, -1.0], vec![1.0]).unwrap()
    }

    fn elliptic_path() -> FrequencyPath {
        // v(t) = (-1, 1 + t) on (-1/2, 1/2)
        FrequencyPath::new(vec![-1.0], vec![1.0, 1.0], -0.5, 0.5).unwrap()
    }

    #[test]
    fn eval_linear_path() {
        let p = torus_path();
        let jets = p.eval(0.0, 1).unwrap();
        assert_eq!(jets[0], [0.0, 1.0]);
        assert_eq!(jets[1], [-1.0, 0.0]);
        assert_eq!(p.eval(0.25, 0).unwrap()[0], [-0.25, 1.0]);

        let q = FrequencyPath::on_unit_interval(vec![-1.0], vec![1.0, 1.0]).unwrap();
        let jets = q.eval(0.0, 1).unwrap();
        assert_eq!(jets[0], [-1.0, 1.0]);
        assert_eq!(jets[1], [0.0, 1.0]);
    }

    #[test]
    fn eval_rejects_out_of_domain_and_high_order() {
        let p = torus_path();
        assert!(matches!(p.eval(1.5, 0), Err(Error::OutsideDomain { .. })));
        assert!(matches!(
            p.eval(0.0, DERIV_CAP + 1),
            Err(Error::DerivativeOrder { .. })
        ));
    }

    #[test]
    fn slope_functions_by_quotient_rule() {
        let s = torus_path().slope_functions(0.0).unwrap();
        assert_eq!(s.phi, 0.0);
        assert_eq!(s.phi_prime, -1.0);
        assert_eq!(s.psi, 0.0);
        assert_eq!(s.psi_prime, -1.0);

        let s = elliptic_path().slope_functions(0.0).unwrap();
        assert!((s.phi - (-1.0)).abs() < 1e-15);
        assert!((s.phi_prime - 1.0).abs() < 1e-15);
        assert!((s.psi - (-std::f64::consts::FRAC_PI_4)).abs() < 1e-15);
        assert!((s.psi_prime - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_numerator_gives_zero_slope() {
        let p = FrequencyPath::on_unit_interval(vec![], vec![1.0, 0.5]).unwrap();
        for t in [-0.9, 0.0, 0.3] {
            let s = p.slope_functions(t).unwrap();
            assert_eq!(s.phi, 0.0);
            assert_eq!(s.psi, 0.0);
        }
    }

    #[test]
    fn vanishing_second_component_is_a_singularity() {
        // v = (1, t): v2(0) = 0.
        let p = FrequencyPath::on_unit_interval(vec![1.0], vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            p.slope_functions(0.0),
            Err(Error::SingularSlope { .. })
        ));
    }

    #[test]
    fn conditions_for_bundled_paths() {
        let r = torus_path().check_conditions();
        assert!(r.condv_ok);
        assert!(r.kol1_ok);
        assert!(!r.kol2_ok);
        assert_eq!(r.omega, [0.0, 1.0]);
        assert!(!r.elliptic_admissible);
        assert_eq!(r.omega_sign_product, 0.0);

        let r = elliptic_path().check_conditions();
        assert!(r.condv_ok);
        assert!(!r.kol1_ok);
        assert!(r.kol2_ok);
        assert_eq!(r.omega, [-1.0, 1.0]);
        assert!(r.elliptic_admissible);
        assert_eq!(r.omega_sign_product, -1.0);
    }

    #[test]
    fn constant_path_fails_condv() {
        let p = FrequencyPath::on_unit_interval(vec![1.0], vec![1.0]).unwrap();
        let r = p.check_conditions();
        assert!(!r.condv_ok);
        assert_eq!(r.min_abs_wronskian, 0.0);
    }

    #[test]
    fn psi_prime_matches_wronskian_identity_and_finite_differences() {
        for p in [torus_path(), elliptic_path()] {
            for &t in p.condition_grid().iter().step_by(37) {
                let s = p.slope_functions(t).unwrap();
                let v = p.value_unchecked(t);
                let w = p.wronskian(t);
                let identity = w / (v[0] * v[0] + v[1] * v[1]);
                assert!((s.psi_prime - identity).abs() < 1e-13);
                assert_eq!(s.psi_prime.signum(), w.signum());

                // Five-point stencil on psi.
                let h = 1e-3 * (p.domain().1 - p.domain().0);
                if p.contains(t - 2.0 * h) && p.contains(t + 2.0 * h) {
                    let psi = |u: f64| p.slope_functions(u).unwrap().psi;
                    let fd = (psi(t - 2.0 * h) - 8.0 * psi(t - h) + 8.0 * psi(t + h)
                        - psi(t + 2.0 * h))
                        / (12.0 * h);
                    assert!(
                        (s.psi_prime - fd).abs() < 1e-10,
                        "t={t}: analytic {} vs fd {}",
                        s.psi_prime,
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn positive_rescaling_preserves_conditions_and_slopes() {
        let lambda = 3.7;
        let base = torus_path();
        let scaled = FrequencyPath::on_unit_interval(vec![0.0, -lambda], vec![lambda]).unwrap();
        assert_eq!(
            base.check_conditions().condv_ok,
            scaled.check_conditions().condv_ok
        );
        for t in [-0.5, 0.0, 0.4] {
            let a = base.slope_functions(t).unwrap();
            let b = scaled.slope_functions(t).unwrap();
            assert_eq!(a.phi, b.phi);
            assert_eq!(a.psi, b.psi);
        }
    }
}
