//! Resonance channels: parameters `y_n` where the path direction `v(y_n)` is
//! collinear with an integer vector `k_n`.
//!
//! The search walks dyadic intervals `[y/2, y]` downward. On each interval it
//! takes the angular image of the path direction and brute-forces the integer
//! directions of growing sup-norm order until one falls inside; the admissible
//! order is controlled by the lattice gap bound: the `8n` directions of
//! sup-norm `n` split the circle into arcs of length at most
//! `arcsin(1/√(n²+1)) < 1/n`. The parameter `y_n` is then pinned by bisection
//! plus a Newton polish on the collinearity function `⟨v(y), k⊥⟩`.
//!
//! Halving `2·y_{n+1} ≤ y_n` holds by construction of the intervals. Support
//! slabs of width `y_n/4` around the lines `Λ_{y_n}` need not be disjoint in
//! a wide strip; [`max_disjoint_delta`] computes, exactly, the widest strip in
//! which two slabs stay disjoint, which drives the shrink-and-prune pass of
//! the system assembly.

use crate::error::{Error, Result};
use crate::path::FrequencyPath;
use crate::{dot2, norm2};

/// Collinearity residual required of every produced channel.
pub const COLLINEARITY_TOL: f64 = 1e-12;

/// Channels whose coupling would underflow are never activated.
pub const EPS_UNDERFLOW_FLOOR: f64 = 1e-300;

/// One resonance datum.
#[derive(Debug, Clone)]
pub struct ResonanceChannel {
    /// 1-based index in the sequence.
    pub index: usize,
    /// Resonant parameter `y_n > 0`.
    pub y: f64,
    /// Primitive integer vector collinear with `v(y_n)`, oriented so that
    /// the first coordinate of `k⊥ = (−k₂, k₁)` is ≥ 0.
    pub k: [i64; 2],
    /// Coupling `ε_n = exp(−1/y_n^{1/σ})`.
    pub eps: f64,
    /// Support half-width `r_n = y_n/4` of the bump around `Λ_{y_n}`.
    pub support_halfwidth: f64,
    /// Bump profile exponent `γ = σ/2`.
    pub gamma: f64,
    /// Base point `(0, y_n)` of the channel line.
    pub line_point: [f64; 2],
    /// Unit direction of the line, along `k⊥`.
    pub line_dir: [f64; 2],
    /// Unit normal of the line, along `v(y_n)`.
    pub normal: [f64; 2],
    /// Achieved collinearity residual `|⟨v(y), k⊥⟩| / (‖v‖‖k‖)`.
    pub collinearity_residual: f64,
    /// Damping `d_n = y_n/(c_h c_n)`; filled during system assembly.
    pub damping: Option<f64>,
    /// Channels overlapping an earlier slab are pruned here.
    pub active: bool,
}

impl ResonanceChannel {
    pub fn k_perp(&self) -> [f64; 2] {
        [-(self.k[1] as f64), self.k[0] as f64]
    }

    pub fn k_max_norm(&self) -> f64 {
        (self.k[0].abs().max(self.k[1].abs())) as f64
    }

    /// `|k|₁ = |k₁| + |k₂|`, the degree bound of the circle polynomial.
    pub fn k_one_norm(&self) -> i64 {
        self.k[0].abs() + self.k[1].abs()
    }

    /// Signed distance of `R` to the channel line along the unit normal.
    pub fn signed_distance(&self, r: [f64; 2]) -> f64 {
        dot2(
            [r[0] - self.line_point[0], r[1] - self.line_point[1]],
            self.normal,
        )
    }

    /// Whether `R` lies in the open support slab.
    pub fn in_slab(&self, r: [f64; 2]) -> bool {
        self.signed_distance(r).abs() < self.support_halfwidth
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Lattice points on the boundary of the sup-norm square of radius `n`.
fn boundary_points(n: i64) -> Vec<[i64; 2]> {
    let mut pts = Vec::with_capacity(8 * n as usize);
    for j in -n..=n {
        pts.push([n, j]);
        pts.push([-n, j]);
    }
    for i in (-n + 1)..=(n - 1) {
        pts.push([i, n]);
        pts.push([i, -n]);
    }
    pts
}

/// Maximal angular gap between consecutive directions `k/‖k‖₂` over all `k`
/// with `|k|_max = n`. Equals `arcsin(1/√(n²+1))`, which is below `1/n`.
pub fn claim_gap_check(n: usize) -> f64 {
    let pts = boundary_points(n as i64);
    debug_assert_eq!(pts.len(), 8 * n);
    let mut angles: Vec<f64> = pts
        .iter()
        .map(|k| (k[1] as f64).atan2(k[0] as f64))
        .collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut max_gap = angles[0] + std::f64::consts::TAU - angles[angles.len() - 1];
    for w in angles.windows(2) {
        max_gap = max_gap.max(w[1] - w[0]);
    }
    max_gap
}

/// The arc bound the claim promises for order `n`.
pub fn claim_gap_bound(n: usize) -> f64 {
    let n = n as f64;
    (1.0 / (n * n + 1.0).sqrt()).asin()
}

/// Finds `k` with `|k|_max = order` whose direction angle lies inside the
/// circle interval `(lo, hi)`. The gap bound guarantees a hit whenever
/// `hi − lo > 1/order`; shorter intervals may still succeed, and an empty
/// search on one reports the failed hypothesis.
pub fn directional_lattice_vector(lo: f64, hi: f64, order: usize) -> Result<[i64; 2]> {
    let len = hi - lo;
    let mid = 0.5 * (lo + hi);
    let mut best: Option<([i64; 2], f64)> = None;
    for k in boundary_points(order as i64) {
        let angle = (k[1] as f64).atan2(k[0] as f64);
        let wrapped = lo + (angle - lo).rem_euclid(std::f64::consts::TAU);
        if wrapped <= hi {
            let score = (wrapped - mid).abs();
            let better = match best {
                None => true,
                Some((bk, bs)) => {
                    score < bs - 1e-15 || (score <= bs + 1e-15 && (k[0], k[1]) < (bk[0], bk[1]))
                }
            };
            if better {
                best = Some((k, score));
            }
        }
    }
    match best {
        Some((k, _)) => Ok(k),
        None if len <= 1.0 / order as f64 => Err(Error::IntervalTooShort { len, order }),
        None => Err(Error::Search(format!(
            "no direction of order {order} inside ({lo}, {hi}); gap bound violated"
        ))),
    }
}

/// Projective direction angle of a nonzero vector, folded into `(0, π)` by
/// flipping the sign so the second component is positive. Valid whenever the
/// second component is nonzero.
fn projective_angle(v: [f64; 2]) -> f64 {
    let v = if v[1] < 0.0 { [-v[0], -v[1]] } else { v };
    v[1].atan2(v[0])
}

fn pow2_floor(x: f64) -> f64 {
    x.log2().floor().exp2()
}

/// Start of the dyadic search. In the Cartesian chart the channel must leave
/// room for the drift segment `R₁ ∈ [2y_n, δ)`, so the start is pushed below
/// `0.3·δ`.
pub fn default_search_start(path: &FrequencyPath, delta0: f64, cartesian: bool) -> f64 {
    let (_, j_hi) = path.domain();
    let mut start = pow2_floor(0.5 * j_hi).min(0.25);
    if cartesian {
        start = start.min(pow2_floor(0.3 * delta0));
    }
    start
}

/// Channel search with the default dyadic start.
pub fn find_resonances(
    path: &FrequencyPath,
    count: usize,
    sigma: f64,
) -> Result<Vec<ResonanceChannel>> {
    let start = default_search_start(path, f64::INFINITY, false);
    find_resonances_from(path, start, count, sigma)
}

/// Channel search over the dyadic intervals `[y_start/2, y_start]`,
/// `[y₁/4, y₁/2]`, ... Each step takes the smallest sup-norm order with a
/// collinear direction in the interval's angular image, preferring the
/// largest admissible `y` at that order.
pub fn find_resonances_from(
    path: &FrequencyPath,
    y_start: f64,
    count: usize,
    sigma: f64,
) -> Result<Vec<ResonanceChannel>> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::Search(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let (_, j_hi) = path.domain();
    if !(y_start > 0.0 && y_start < j_hi) {
        return Err(Error::Search(format!(
            "search start {y_start} outside (0, {j_hi})"
        )));
    }
    let rho = 1.0 / sigma;
    let mut channels = Vec::with_capacity(count);
    let mut y_hi = y_start;
    for index in 1..=count {
        let y_lo = 0.5 * y_hi;
        let (k, y, residual) = search_interval(path, y_lo, y_hi)?;
        let k = orient(k);
        let eps = (-(y.powf(rho).recip())).exp();
        let v = path.value_unchecked(y);
        let normal = unit(v);
        let kp = [-(k[1] as f64), k[0] as f64];
        let channel = ResonanceChannel {
            index,
            y,
            k,
            eps,
            support_halfwidth: 0.25 * y,
            gamma: 0.5 * sigma,
            line_point: [0.0, y],
            line_dir: unit(kp),
            normal,
            collinearity_residual: residual,
            damping: None,
            active: eps > EPS_UNDERFLOW_FLOOR,
        };
        y_hi = 0.5 * channel.y;
        channels.push(channel);
    }
    Ok(channels)
}

/// Smallest constant `C` with `|k_n|_max ≤ C/y_n` over the given channels.
pub fn lattice_bound_constant(channels: &[ResonanceChannel]) -> f64 {
    channels
        .iter()
        .map(|c| c.k_max_norm() * c.y)
        .fold(0.0, f64::max)
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = norm2(v);
    [v[0] / n, v[1] / n]
}

fn orient(k: [i64; 2]) -> [i64; 2] {
    if k[1] > 0 || (k[1] == 0 && k[0] < 0) {
        [-k[0], -k[1]]
    } else {
        k
    }
}

fn search_interval(path: &FrequencyPath, y_lo: f64, y_hi: f64) -> Result<([i64; 2], f64, f64)> {
    // The angle must keep turning on the interval for the bracketing below
    // to see a single crossing per direction.
    for i in 0..=32 {
        let t = y_lo + (y_hi - y_lo) * i as f64 / 32.0;
        let s = path.slope_functions(t)?;
        if s.psi_prime.abs() < 1e-14 {
            return Err(Error::Search(format!(
                "turning rate vanishes near y = {t} inside [{y_lo}, {y_hi}]"
            )));
        }
    }
    let a0 = projective_angle(path.value_unchecked(y_lo));
    let a1 = projective_angle(path.value_unchecked(y_hi));
    let (c_lo, c_hi) = if a0 <= a1 { (a0, a1) } else { (a1, a0) };
    let cone_len = c_hi - c_lo;
    // The gap bound guarantees a direction once 1/m < cone_len; the cap
    // bounds the cost of the failure path on degenerate inputs.
    let m_cap = ((4.0 / cone_len).ceil() as usize).clamp(64, 1 << 14);

    for m in 1..=m_cap {
        let mut best: Option<([i64; 2], f64, f64)> = None;
        for k in boundary_points(m as i64) {
            // One representative per projective direction, primitive only.
            if k[1] > 0 || (k[1] == 0 && k[0] < 0) || gcd(k[0], k[1]) != 1 {
                continue;
            }
            let ka = projective_angle([k[0] as f64, k[1] as f64]);
            if ka < c_lo - 1e-12 || ka > c_hi + 1e-12 {
                continue;
            }
            if let Some((y, residual)) = solve_collinear(path, k, y_lo, y_hi) {
                let better = match &best {
                    None => true,
                    Some((_, by, _)) => y > *by,
                };
                if better {
                    best = Some((k, y, residual));
                }
            }
        }
        if let Some(found) = best {
            return Ok(found);
        }
    }
    Err(Error::Search(format!(
        "no collinear lattice direction up to order {m_cap} on [{y_lo}, {y_hi}]"
    )))
}

/// Root of `F(y) = ⟨v(y), k⊥⟩` on `[y_lo, y_hi]`: bisection bracket, then a
/// Newton polish. Returns the root and the normalized collinearity residual.
fn solve_collinear(path: &FrequencyPath, k: [i64; 2], y_lo: f64, y_hi: f64) -> Option<(f64, f64)> {
    let kp = [-(k[1] as f64), k[0] as f64];
    let f = |y: f64| dot2(path.value_unchecked(y), kp);
    let fp = |y: f64| {
        let d = path.eval(y, 1).ok()?[1];
        Some(dot2(d, kp))
    };
    let (mut lo, mut hi) = (y_lo, y_hi);
    let (flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return finish(path, k, lo);
    }
    if fhi == 0.0 {
        return finish(path, k, hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return finish(path, k, mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut y = 0.5 * (lo + hi);
    for _ in 0..8 {
        let d = fp(y)?;
        if d == 0.0 {
            break;
        }
        y -= f(y) / d;
    }
    if y < y_lo - 1e-9 * y_lo || y > y_hi + 1e-9 * y_hi {
        return None;
    }
    finish(path, k, y.clamp(y_lo, y_hi))
}

fn finish(path: &FrequencyPath, k: [i64; 2], y: f64) -> Option<(f64, f64)> {
    let kp = [-(k[1] as f64), k[0] as f64];
    let v = path.value_unchecked(y);
    let residual = dot2(v, kp).abs() / (norm2(v) * norm2([k[0] as f64, k[1] as f64]));
    (residual < COLLINEARITY_TOL).then_some((y, residual))
}

/// Whether the support slabs of two channels are disjoint inside the strip
/// `|R₁| < delta`. The test is exact: the slab of `a` clipped to the strip is
/// a parallelogram, and its image under the affine map
/// `R ↦ ⟨R − base_b, normal_b⟩` attains its extremes at the four corners.
pub fn slabs_disjoint_in_strip(a: &ResonanceChannel, b: &ResonanceChannel, delta: f64) -> bool {
    if delta <= 0.0 {
        return true;
    }
    let f = |r: [f64; 2]| b.signed_distance(r);
    let mut fmin = f64::INFINITY;
    let mut fmax = f64::NEG_INFINITY;
    // Corners of {base_a + s·dir_a + τ·normal_a : |τ| ≤ r_a, |R₁| ≤ δ}.
    for tau in [-a.support_halfwidth, a.support_halfwidth] {
        for x_edge in [-delta, delta] {
            let s = (x_edge - tau * a.normal[0]) / a.line_dir[0];
            let r = [
                x_edge,
                a.line_point[1] + s * a.line_dir[1] + tau * a.normal[1],
            ];
            let val = f(r);
            fmin = fmin.min(val);
            fmax = fmax.max(val);
        }
    }
    fmin >= b.support_halfwidth || fmax <= -b.support_halfwidth
}

/// Largest strip half-width (capped at `delta_cap`) keeping the two slabs
/// disjoint; 0 when they already meet arbitrarily close to the axis.
pub fn max_disjoint_delta(a: &ResonanceChannel, b: &ResonanceChannel, delta_cap: f64) -> f64 {
    if slabs_disjoint_in_strip(a, b, delta_cap) {
        return delta_cap;
    }
    let mut lo = 0.0;
    let mut hi = delta_cap;
    if !slabs_disjoint_in_strip(a, b, 1e-9 * delta_cap) {
        return 0.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if slabs_disjoint_in_strip(a, b, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
