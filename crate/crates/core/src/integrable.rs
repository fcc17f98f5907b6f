//! The integrable Hamiltonian `h` carried by an admissible frequency path.
//!
//! The chart `φ(x, y) = (x, y − x·φ(y))` (with `φ(y) = v₁(y)/v₂(y)` the slope
//! function) is a diffeomorphism of the strip `(−δ, δ) × J` onto an open set
//! `U` once `δ·sup|φ′| < 1`. With `g(y) = ∫₀^y v₂`, the Hamiltonian
//! `h = g ∘ π₂ ∘ φ⁻¹` is constant on every line `Λ_t = (0,t) + ⟨v⊥(t)⟩` and
//! satisfies `∇h(0, t) = v(t)` exactly. The inverse chart is computed by
//! Newton iteration; the gradient comes out in closed form,
//! `∇h(x, Y) = v(y) / (1 − x·φ′(y))`, so no finite differences enter the
//! dynamics.

use crate::error::{Error, Result};
use crate::path::FrequencyPath;
use crate::poly::PolyJet;
use crate::{dot2, norm2, perp};

/// Safety factor by which `beta` exceeds the sampled supremum of `|φ′|`.
pub const BETA_SAFETY: f64 = 1.05;

/// Newton tolerance for the chart inversion residual `|y − xφ(y) − Y|`.
pub const NEWTON_TOL: f64 = 1e-13;

/// Maximum Newton iterations for the chart inversion.
pub const NEWTON_MAX_ITERS: usize = 50;

/// The integrable model: chart, strip geometry and `h` with derivatives.
#[derive(Debug, Clone)]
pub struct IntegrableModel {
    path: FrequencyPath,
    g: PolyJet,
    beta: f64,
    delta0: f64,
    shrink: f64,
    sup_abs_phi_prime: f64,
    /// Gauss rule size reserved for non-polynomial path classes; the
    /// polynomial class integrates `g` exactly and never consults it.
    pub quadrature_order: usize,
}

impl IntegrableModel {
    /// Builds the model; fails when the path does not satisfy the
    /// non-parallelism condition.
    pub fn build(path: &FrequencyPath) -> Result<Self> {
        let report = path.check_conditions();
        if !report.condv_ok {
            return Err(Error::ConditionFailed {
                min_wronskian: report.min_abs_wronskian,
            });
        }
        let mut sup = 0.0f64;
        for &t in &path.condition_grid() {
            sup = sup.max(path.slope_functions(t)?.phi_prime.abs());
        }
        let beta = BETA_SAFETY * sup;
        let g = PolyJet::new(path_v2_antiderivative(path), 2);
        Ok(Self {
            path: path.clone(),
            g,
            beta,
            delta0: 1.0 / beta,
            shrink: 1.0,
            sup_abs_phi_prime: sup,
            quadrature_order: 20,
        })
    }

    /// Same model with the strip half-width scaled by `shrink ∈ (0, 1]`.
    pub fn with_shrink(&self, shrink: f64) -> Self {
        let mut m = self.clone();
        m.shrink = shrink.clamp(f64::MIN_POSITIVE, 1.0);
        m
    }

    pub fn path(&self) -> &FrequencyPath {
        &self.path
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Unshrunk strip half-width `1/β`.
    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    /// Effective strip half-width.
    pub fn delta(&self) -> f64 {
        self.shrink * self.delta0
    }

    pub fn shrink(&self) -> f64 {
        self.shrink
    }

    pub fn sup_abs_phi_prime(&self) -> f64 {
        self.sup_abs_phi_prime
    }

    fn require_strip(&self, x: f64) -> Result<()> {
        if x.abs() < self.delta() {
            Ok(())
        } else {
            Err(Error::OutsideDomain {
                value: x,
                lo: -self.delta(),
                hi: self.delta(),
            })
        }
    }

    /// `φ(x, y) = (x, y − x·φ(y))`.
    pub fn forward_chart(&self, x: f64, y: f64) -> Result<[f64; 2]> {
        self.require_strip(x)?;
        let s = self.path.slope_functions(y)?;
        Ok([x, y - x * s.phi])
    }

    /// Inverse of the chart: solves `y − x·φ(y) = Y` by Newton iteration
    /// seeded at `y = Y`. Inside the strip the map `y ↦ Y + xφ(y)` is a
    /// contraction, so the root is unique.
    pub fn inverse_chart(&self, x: f64, cap_y: f64) -> Result<[f64; 2]> {
        self.require_strip(x)?;
        let y = self.solve_fiber(x, cap_y)?;
        if !self.path.contains(y) {
            let (lo, hi) = self.path.domain();
            return Err(Error::OutsideDomain { value: y, lo, hi });
        }
        Ok([x, y])
    }

    fn solve_fiber(&self, x: f64, cap_y: f64) -> Result<f64> {
        let mut y = cap_y;
        let mut residual = f64::INFINITY;
        // Once below the contract tolerance, two more iterations push the
        // residual to the round-off floor; a residual held at 1e-13 would
        // bias the fiber and, through it, the resonant phase over long runs.
        let mut polish = 2;
        for _ in 0..NEWTON_MAX_ITERS {
            let v2 = self.path.eval_v2(y);
            if v2 == 0.0 {
                return Err(Error::SingularSlope { t: y });
            }
            let (phi, phi_prime) = self.path.slope_pair_unchecked(y);
            let f = y - x * phi - cap_y;
            residual = f.abs();
            if residual < NEWTON_TOL {
                if polish == 0 || residual == 0.0 {
                    return Ok(y);
                }
                polish -= 1;
            }
            let df = 1.0 - x * phi_prime;
            y -= f / df;
        }
        if residual < NEWTON_TOL {
            return Ok(y);
        }
        Err(Error::NewtonDiverged {
            iters: NEWTON_MAX_ITERS,
            residual,
            x,
            target: cap_y,
        })
    }

    /// Membership test for the open set `U`.
    pub fn contains(&self, r: [f64; 2]) -> bool {
        self.inverse_chart(r[0], r[1]).is_ok()
    }

    /// `g(y) = ∫₀^y v₂(t) dt`, exact for polynomial `v₂`.
    pub fn eval_g(&self, y: f64) -> f64 {
        self.g.eval(y)
    }

    /// `h(R) = g(π₂(φ⁻¹(R)))`.
    pub fn eval_h(&self, r: [f64; 2]) -> Result<f64> {
        let xy = self.inverse_chart(r[0], r[1])?;
        Ok(self.g.eval(xy[1]))
    }

    /// Analytic gradient `∇h(x, Y) = v(y) / (1 − x·φ′(y))` by implicit
    /// differentiation of the chart.
    pub fn grad_h(&self, r: [f64; 2]) -> Result<[f64; 2]> {
        let xy = self.inverse_chart(r[0], r[1])?;
        Ok(self.grad_h_at_fiber(r[0], xy[1]))
    }

    /// Gradient given the already-solved fiber coordinate `y`.
    pub fn grad_h_at_fiber(&self, x: f64, y: f64) -> [f64; 2] {
        let (phi, phi_prime) = self.path.slope_pair_unchecked(y);
        let v2 = self.path.eval_v2(y);
        let denom = 1.0 - x * phi_prime;
        [v2 * phi / denom, v2 / denom]
    }

    /// Both the fiber coordinate and the gradient; the hot path for vector
    /// field evaluation.
    pub fn fiber_and_grad(&self, r: [f64; 2]) -> Result<(f64, [f64; 2])> {
        let xy = self.inverse_chart(r[0], r[1])?;
        Ok((xy[1], self.grad_h_at_fiber(r[0], xy[1])))
    }

    /// Hessian of `h` at the origin:
    /// `∂yy = v₂′(0)`, `∂xy = v₁′(0)`,
    /// `∂xx = v₂′(0)φ²(0) + 2v₂(0)φ(0)φ′(0)`.
    pub fn hessian_h_origin(&self) -> [[f64; 2]; 2] {
        let jets = self
            .path
            .eval(0.0, 1)
            .expect("0 lies in the path domain by construction");
        let [_, v2] = jets[0];
        let [d1, d2] = jets[1];
        let s = self
            .path
            .slope_functions(0.0)
            .expect("slope defined at 0 for admissible paths");
        let hxx = d2 * s.phi * s.phi + 2.0 * v2 * s.phi * s.phi_prime;
        [[hxx, d1], [d1, d2]]
    }

    /// `det ∂²h(0)`.
    pub fn kolmogorov_det(&self) -> f64 {
        let h = self.hessian_h_origin();
        h[0][0] * h[1][1] - h[0][1] * h[1][0]
    }

    /// Determinant of the bordered matrix `[[∂²h(0), ω], [ωᵀ, 0]]` with
    /// `ω = ∇h(0) = v(0)`.
    pub fn isoenergetic_det(&self) -> f64 {
        let h = self.hessian_h_origin();
        let w = self.path.value_unchecked(0.0);
        det3([
            [h[0][0], h[0][1], w[0]],
            [h[1][0], h[1][1], w[1]],
            [w[0], w[1], 0.0],
        ])
    }

    /// Signed distance of `R` to the line `Λ_t` along the unit normal
    /// `v(t)/‖v(t)‖`.
    pub fn line_distance(&self, r: [f64; 2], t: f64) -> f64 {
        let v = self.path.value_unchecked(t);
        let n = norm2(v);
        dot2([r[0], r[1] - t], [v[0] / n, v[1] / n])
    }

    /// A point of `Λ_t` with prescribed first coordinate.
    pub fn line_point(&self, t: f64, x: f64) -> [f64; 2] {
        let w = perp(self.path.value_unchecked(t));
        // First component of v⊥ is −v₂ ≠ 0, so the line is never vertical.
        let s = x / w[0];
        [x, t + s * w[1]]
    }
}

fn path_v2_antiderivative(path: &FrequencyPath) -> crate::poly::Poly {
    path.v2_poly().antiderivative()
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}
