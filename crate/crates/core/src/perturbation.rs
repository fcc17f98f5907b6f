//! The perturbed Hamiltonian, in action-angle and in Cartesian coordinates.
//!
//! Action-angle: `H(θ, R) = h(R) + ε Σ_n w_n(R) cos(θ·k_n⊥)` with
//! `w_n = ε_n a_n` (plain) or `w_n = ε_n d_n a_n b_n` (cutoff form). Supports
//! of the active channels are pairwise disjoint inside the strip, so at most
//! one term is ever nonzero; evaluation is a slab lookup, not a series sum.
//!
//! Cartesian: `H̄(x, y) = h(I(x, y)) + ε f̄(x, y)` where `I_i = (x_i²+y_i²)/2`
//! and `f̄` is the cutoff perturbation pushed through the symplectic polar
//! map. The circle factors `cos(θ·k⊥)` are evaluated from
//! `(cos θ_i, sin θ_i) = (x_i, y_i)/r_i` by integer angle-addition
//! recurrences; no inverse trigonometry enters the field. Outside the
//! channel slabs the perturbation is extended by zero, and the slab lookup
//! guarantees no boundary limit is ever evaluated.
//!
//! Assembly performs the shrink-and-prune pass: the strip half-width is
//! reduced until the surviving channels have pairwise disjoint slabs, and
//! channels that would force the strip below a floor are deactivated
//! instead.

use crate::dot2;
use crate::error::{Error, Result};
use crate::gevrey::{
    self, bump_a, bump_a_grad, bump_b, bump_b_deriv, circle_fraction_jet, fit_gevrey, fit_gevrey2,
    GevreyFit, BOUNDARY_MARGIN, FIT_ORDER_CAP,
};
use crate::integrable::IntegrableModel;
use crate::jet::Jet2;
use crate::path::FrequencyPath;
use crate::resonances::{
    default_search_start, find_resonances_from, max_disjoint_delta, ResonanceChannel,
};

/// Coordinate chart the system lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    ActionAngle,
    Cartesian,
}

/// Assembly parameters.
#[derive(Debug, Clone)]
pub struct AssemblyOptions {
    pub chart: Chart,
    pub channels: usize,
    pub sigma: f64,
    pub epsilon: f64,
    pub use_cutoff: bool,
    /// Channels are pruned rather than shrinking the strip below this
    /// fraction of the unshrunk half-width.
    pub shrink_floor: f64,
    /// Override for the dyadic search start.
    pub search_start: Option<f64>,
}

impl AssemblyOptions {
    pub fn new(chart: Chart, channels: usize, sigma: f64, epsilon: f64) -> Self {
        Self {
            chart,
            channels,
            sigma,
            epsilon,
            use_cutoff: chart == Chart::Cartesian,
            shrink_floor: 0.05,
            search_start: None,
        }
    }
}

/// Gevrey fit constants feeding the damping chain
/// `c_h = d²·c_a·c_b·c_g·ρ_a·ρ_b`.
#[derive(Debug, Clone, Copy)]
pub struct DampingConstants {
    pub fit_a: GevreyFit,
    pub fit_b: GevreyFit,
    pub fit_g: GevreyFit,
    /// `‖I‖_{C²}` on the working neighborhood.
    pub d: f64,
    pub c_h: f64,
}

/// A fully assembled perturbed Hamiltonian.
#[derive(Debug, Clone)]
pub struct PerturbedSystem {
    chart: Chart,
    model: IntegrableModel,
    channels: Vec<ResonanceChannel>,
    epsilon: f64,
    sigma: f64,
    use_cutoff: bool,
    damping: DampingConstants,
}

impl PerturbedSystem {
    pub fn assemble(path: &FrequencyPath, opts: AssemblyOptions) -> Result<Self> {
        let report = path.check_conditions();
        if !report.condv_ok {
            return Err(Error::ConditionFailed {
                min_wronskian: report.min_abs_wronskian,
            });
        }
        if opts.chart == Chart::Cartesian && !report.elliptic_admissible {
            return Err(Error::Assembly(format!(
                "Cartesian chart requires omega_1*omega_2 < 0, got omega = {:?}",
                report.omega
            )));
        }
        if opts.chart == Chart::Cartesian && !opts.use_cutoff {
            return Err(Error::Assembly(
                "the Cartesian chart requires the cutoff form of the perturbation".into(),
            ));
        }
        let model0 = IntegrableModel::build(path)?;
        let start = opts.search_start.unwrap_or_else(|| {
            default_search_start(path, model0.delta0(), opts.chart == Chart::Cartesian)
        });
        let mut channels = find_resonances_from(path, start, opts.channels, opts.sigma)?;

        // Shrink-and-prune: keep a channel only if some strip width at or
        // above the floor separates its slab from every kept predecessor.
        let delta0 = model0.delta0();
        let floor = opts.shrink_floor * delta0;
        let mut delta_eff = delta0;
        for n in 0..channels.len() {
            if !channels[n].active {
                continue;
            }
            let mut allowed = delta0;
            for m in 0..n {
                if channels[m].active {
                    allowed = allowed.min(max_disjoint_delta(&channels[m], &channels[n], delta0));
                }
            }
            if allowed < floor {
                channels[n].active = false;
            } else {
                delta_eff = delta_eff.min(allowed);
            }
        }
        delta_eff *= 1.0 - 1e-3;
        let model = model0.with_shrink(delta_eff / delta0);

        let damping = compute_damping_constants(opts.sigma, model.delta())?;
        for c in channels.iter_mut() {
            let ln_d = c.y.ln() - damping.c_h.ln() - ln_circle_poly_norm(c.k_perp_int());
            let d = ln_d.exp();
            c.damping = Some(d);
            if opts.use_cutoff && d == 0.0 {
                c.active = false;
            }
        }

        Ok(Self {
            chart: opts.chart,
            model,
            channels,
            epsilon: opts.epsilon,
            sigma: opts.sigma,
            use_cutoff: opts.use_cutoff,
            damping,
        })
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn model(&self) -> &IntegrableModel {
        &self.model
    }

    pub fn channels(&self) -> &[ResonanceChannel] {
        &self.channels
    }

    pub fn channel(&self, index: usize) -> Option<&ResonanceChannel> {
        self.channels.iter().find(|c| c.index == index)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        let mut s = self.clone();
        s.epsilon = epsilon;
        s
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn use_cutoff(&self) -> bool {
        self.use_cutoff
    }

    pub fn damping_constants(&self) -> &DampingConstants {
        &self.damping
    }

    /// The unique active channel whose slab contains `R`, if any.
    pub fn active_channel_at(&self, r: [f64; 2]) -> Option<&ResonanceChannel> {
        self.channels.iter().find(|c| c.active && c.in_slab(r))
    }

    /// Coupling weight `w_n(R)` of one channel (without the `cos` factor).
    fn channel_weight(&self, c: &ResonanceChannel, r: [f64; 2]) -> f64 {
        let a = bump_a(c, r);
        if a == 0.0 {
            return 0.0;
        }
        if self.use_cutoff {
            let b = bump_b(c, r[0]);
            if b == 0.0 {
                return 0.0;
            }
            c.eps * c.damping.unwrap_or(0.0) * a * b
        } else {
            c.eps * a
        }
    }

    /// Gradient of `w_n` in `R`.
    fn channel_weight_grad(&self, c: &ResonanceChannel, r: [f64; 2]) -> [f64; 2] {
        let a = bump_a(c, r);
        let ga = bump_a_grad(c, r);
        if self.use_cutoff {
            let d = c.eps * c.damping.unwrap_or(0.0);
            let b = bump_b(c, r[0]);
            let db = bump_b_deriv(c, r[0]);
            [d * (ga[0] * b + a * db), d * ga[1] * b]
        } else {
            [c.eps * ga[0], c.eps * ga[1]]
        }
    }

    /// The perturbation `f(θ, R)` (cutoff factors included when enabled).
    pub fn eval_f(&self, theta: [f64; 2], r: [f64; 2]) -> f64 {
        match self.active_channel_at(r) {
            None => 0.0,
            Some(c) => {
                let w = self.channel_weight(c, r);
                if w == 0.0 {
                    0.0
                } else {
                    w * dot2(theta, c.k_perp()).cos()
                }
            }
        }
    }

    /// `H(θ, R) = h(R) + ε f(θ, R)`.
    pub fn hamiltonian_action_angle(&self, theta: [f64; 2], r: [f64; 2]) -> Result<f64> {
        Ok(self.model.eval_h(r)? + self.epsilon * self.eval_f(theta, r))
    }

    /// Hamiltonian vector field in action-angle coordinates:
    /// `θ̇ = ∇h + ε ∂_R f`, `Ṙ = −ε ∂_θ f`.
    pub fn vector_field_action_angle(&self, theta: [f64; 2], r: [f64; 2]) -> Result<[f64; 4]> {
        let (_, grad_h) = self.model.fiber_and_grad(r)?;
        let mut out = [grad_h[0], grad_h[1], 0.0, 0.0];
        if let Some(c) = self.active_channel_at(r) {
            let w = self.channel_weight(c, r);
            let gw = self.channel_weight_grad(c, r);
            let kp = c.k_perp();
            let phase = dot2(theta, kp);
            let (sin_p, cos_p) = phase.sin_cos();
            out[0] += self.epsilon * gw[0] * cos_p;
            out[1] += self.epsilon * gw[1] * cos_p;
            out[2] = self.epsilon * w * sin_p * kp[0];
            out[3] = self.epsilon * w * sin_p * kp[1];
        }
        Ok(out)
    }

    /// `H̄(x, y) = h(I(x, y)) + ε f̄(x, y)`.
    pub fn eval_cartesian(&self, z: [f64; 4]) -> Result<f64> {
        let i = actions(z);
        let h = self.model.eval_h(i)?;
        Ok(h + self.epsilon * self.cartesian_perturbation(z, i))
    }

    fn cartesian_perturbation(&self, z: [f64; 4], i: [f64; 2]) -> f64 {
        match self.active_channel_at(i) {
            None => 0.0,
            Some(c) => {
                let w = self.channel_weight(c, i);
                if w == 0.0 {
                    return 0.0;
                }
                let (cos_p, _) = circle_phase(z, i, c.k_perp_int());
                w * cos_p
            }
        }
    }

    /// Hamiltonian vector field in Cartesian coordinates:
    /// `ẋ_i = ∂H̄/∂y_i`, `ẏ_i = −∂H̄/∂x_i`. Exactly zero at the origin.
    pub fn vector_field_cartesian(&self, z: [f64; 4]) -> Result<[f64; 4]> {
        let i = actions(z);
        let (_, h_r) = self.model.fiber_and_grad(i)?;
        let [x1, y1, x2, y2] = z;
        let mut out = [h_r[0] * y1, -h_r[0] * x1, h_r[1] * y2, -h_r[1] * x2];
        if let Some(c) = self.active_channel_at(i) {
            let w = self.channel_weight(c, i);
            if w != 0.0 {
                let gw = self.channel_weight_grad(c, i);
                let m = c.k_perp_int();
                let (cos_p, sin_p) = circle_phase(z, i, m);
                let r1sq = 2.0 * i[0];
                let r2sq = 2.0 * i[1];
                let eps = self.epsilon;
                let (m1, m2) = (m[0] as f64, m[1] as f64);
                // With θ_i = atan2(−y_i, x_i): ∂θ_i/∂x_i = y_i/r_i²,
                // ∂θ_i/∂y_i = −x_i/r_i², so
                // d f̄/dx_i = (∇_R w)_i x_i cos − w sin · m_i y_i / r_i²
                // d f̄/dy_i = (∇_R w)_i y_i cos + w sin · m_i x_i / r_i²
                let fx1 = gw[0] * x1 * cos_p - w * sin_p * m1 * y1 / r1sq;
                let fy1 = gw[0] * y1 * cos_p + w * sin_p * m1 * x1 / r1sq;
                let fx2 = gw[1] * x2 * cos_p - w * sin_p * m2 * y2 / r2sq;
                let fy2 = gw[1] * y2 * cos_p + w * sin_p * m2 * x2 / r2sq;
                out[0] += eps * fy1;
                out[1] -= eps * fx1;
                out[2] += eps * fy2;
                out[3] -= eps * fx2;
            }
        }
        Ok(out)
    }

    /// Per-channel flatness evidence: `sup |f|` on the slab and the ratios
    /// `ε_n / y_n^m`.
    pub fn flatness_report(&self, max_power: usize) -> FlatnessReport {
        let rows = self
            .channels
            .iter()
            .map(|c| {
                let coupling = if self.use_cutoff {
                    c.eps * c.damping.unwrap_or(0.0)
                } else {
                    c.eps
                };
                FlatnessRow {
                    index: c.index,
                    y: c.y,
                    eps: c.eps,
                    sup_f: self.epsilon.abs() * coupling,
                    ratios: (1..=max_power)
                        .map(|m| c.eps / c.y.powi(m as i32))
                        .collect(),
                }
            })
            .collect();
        FlatnessReport { rows }
    }
}

/// One row of the flatness table.
#[derive(Debug, Clone)]
pub struct FlatnessRow {
    pub index: usize,
    pub y: f64,
    pub eps: f64,
    pub sup_f: f64,
    /// `ε_n/y_n^m` for `m = 1..`.
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FlatnessReport {
    pub rows: Vec<FlatnessRow>,
}

impl FlatnessReport {
    /// Whether `ε_n/y_n^m` decreases strictly along the channel sequence.
    pub fn decreasing_in_n(&self, m: usize) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].ratios[m - 1] < w[0].ratios[m - 1])
    }
}

impl ResonanceChannel {
    pub(crate) fn k_perp_int(&self) -> [i64; 2] {
        [-self.k[1], self.k[0]]
    }
}

// ---------------------------------------------------------------------------
// The symplectic polar map.

/// The symplectic polar map: `x_i + i y_i = √(2R_i) e^{−iθ_i}`, i.e.
/// `(x_i, y_i) = √(2R_i)(cos θ_i, −sin θ_i)`; requires `R_i > 0`.
///
/// The phase sign is forced: with `ẋ = ∂_y H, ẏ = −∂_x H` on the Cartesian
/// side and `θ̇ = ∂_R H, Ṙ = −∂_θ H` on the action-angle side, this is the
/// orientation for which `dx_i ∧ dy_i = dθ_i ∧ dR_i`, so the two flows are
/// conjugate through the map with no time reversal.
pub fn polar_map(theta: [f64; 2], r: [f64; 2]) -> Result<[f64; 4]> {
    if !(r[0] > 0.0 && r[1] > 0.0) {
        return Err(Error::OutsideDomain {
            value: r[0].min(r[1]),
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let a1 = (2.0 * r[0]).sqrt();
    let a2 = (2.0 * r[1]).sqrt();
    let (s1, c1) = theta[0].sin_cos();
    let (s2, c2) = theta[1].sin_cos();
    Ok([a1 * c1, -a1 * s1, a2 * c2, -a2 * s2])
}

/// Inverse of [`polar_map`]: `R_i = (x_i² + y_i²)/2 = I_i`,
/// `θ_i = atan2(−y_i, x_i)`; requires both circle factors away from their
/// centers.
pub fn polar_map_inverse(z: [f64; 4]) -> Result<([f64; 2], [f64; 2])> {
    let i = actions(z);
    if i[0] == 0.0 || i[1] == 0.0 {
        return Err(Error::OutsideDomain {
            value: 0.0,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let theta = [(-z[1]).atan2(z[0]), (-z[3]).atan2(z[2])];
    Ok((theta, i))
}

/// Actions `I_i(x, y) = (x_i² + y_i²)/2`.
pub fn actions(z: [f64; 4]) -> [f64; 2] {
    [
        0.5 * (z[0] * z[0] + z[1] * z[1]),
        0.5 * (z[2] * z[2] + z[3] * z[3]),
    ]
}

/// `(cos, sin)` of `m₁θ₁ + m₂θ₂` from the Cartesian components, by integer
/// angle-addition recurrences on the unit-circle factors. No `atan2`, no
/// large-multiple trigonometry.
pub fn cos_sin_multi(m: [i64; 2], cs1: (f64, f64), cs2: (f64, f64)) -> (f64, f64) {
    let a = complex_int_pow(cs1, m[0]);
    let b = complex_int_pow(cs2, m[1]);
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn complex_int_pow((c, s): (f64, f64), m: i64) -> (f64, f64) {
    let (c, s) = if m < 0 { (c, -s) } else { (c, s) };
    let mut out = (1.0, 0.0);
    for _ in 0..m.unsigned_abs() {
        out = (out.0 * c - out.1 * s, out.0 * s + out.1 * c);
    }
    out
}

fn circle_phase(z: [f64; 4], i: [f64; 2], m: [i64; 2]) -> (f64, f64) {
    let r1 = (2.0 * i[0]).sqrt();
    let r2 = (2.0 * i[1]).sqrt();
    // (cos θ_i, sin θ_i) = (x_i, −y_i)/r_i under the polar phase convention.
    cos_sin_multi(m, (z[0] / r1, -z[1] / r1), (z[2] / r2, -z[3] / r2))
}

/// Log of the sup of the circle polynomial for `cos(θ·m)` and its partial
/// derivatives to order `|m|₁` on the closed unit polydisc: the factor for
/// exponent `a` is bounded by `max_j a!/(a−j)!·(√2)^{a−j}`, maximized over
/// the derivative order, and the two factors multiply.
pub fn ln_circle_poly_norm(m: [i64; 2]) -> f64 {
    fn ln_factor(a: u64) -> f64 {
        let half_ln2 = 0.5 * std::f64::consts::LN_2;
        let mut best = a as f64 * half_ln2; // j = 0
        let mut ln_fall = 0.0;
        for j in 1..=a {
            ln_fall += ((a - j + 1) as f64).ln();
            best = best.max(ln_fall + (a - j) as f64 * half_ln2);
        }
        best
    }
    ln_factor(m[0].unsigned_abs()) + ln_factor(m[1].unsigned_abs())
}

fn compute_damping_constants(sigma: f64, delta: f64) -> Result<DampingConstants> {
    let gamma = 0.5 * sigma;
    let s = 1.0 + gamma;
    let grid: Vec<f64> = (1..24)
        .map(|i| -0.5 + BOUNDARY_MARGIN + (1.0 - 2.0 * BOUNDARY_MARGIN) * i as f64 / 24.0)
        .collect();
    let a_jets: Vec<_> = grid
        .iter()
        .map(|&u| gevrey::profile_a_jet(gamma, u, FIT_ORDER_CAP))
        .collect::<Result<_>>()?;
    let b_jets: Vec<_> = grid
        .iter()
        .map(|&u| gevrey::profile_b_jet(gamma, u + 0.5, FIT_ORDER_CAP))
        .collect::<Result<_>>()?;
    let g_jets: Vec<Jet2> = (0..16)
        .map(|i| {
            let a = std::f64::consts::TAU * (i as f64 + 0.5) / 16.0;
            circle_fraction_jet(a.cos(), a.sin(), 6)
        })
        .collect::<Result<_>>()?;
    let fit_a = fit_gevrey(&a_jets, s)?;
    let fit_b = fit_gevrey(&b_jets, s)?;
    let fit_g = fit_gevrey2(&g_jets, 1.0)?;
    // ‖I‖_{C²} on the polydisc over the strip: sup |I| = δ, sup |∂I| = √(2δ),
    // sup |∂²I| = 1.
    let d = delta.max((2.0 * delta).sqrt()).max(1.0);
    // Bump scalings: a_n contracts by 2/y_n per derivative, b_n by 1/y_n.
    let rho_a = 2.0 * fit_a.rho;
    let rho_b = fit_b.rho;
    let c_h = d * d * fit_a.c * fit_b.c * fit_g.c * rho_a * rho_b;
    Ok(DampingConstants {
        fit_a,
        fit_b,
        fit_g,
        d,
        c_h,
    })
}
