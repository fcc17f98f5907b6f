//! Numerical flows: adaptive 8th-order integration with energy policing and
//! domain guards, the exact toy flow, drift-law verification, instability
//! sweeps and Poincaré sections.
//!
//! The default scheme is an adaptive explicit one-step method (DOP853).
//! The Hamiltonians here are non-separable, the verification horizons are
//! short, and conservation is policed by an energy alarm, so a symplectic
//! splitting buys nothing; a fixed-step implicit midpoint rule is available
//! for long Poincaré runs.
//!
//! A structural fact the drift verification leans on: inside one channel
//! slab the action velocity is everywhere parallel to `k⊥`, so
//! `⟨R(t), k⟩` is a *linear* invariant and every Runge-Kutta step preserves
//! it to rounding. Transverse deviation from the channel line is therefore
//! at the round-off floor, far below the integrator tolerance.

use crate::dop853;
use crate::error::{Error, Result};
use crate::perturbation::{actions, polar_map, polar_map_inverse, Chart, PerturbedSystem};
use crate::{dot2, norm2};

/// Integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    AdaptiveRk8,
    ImplicitMidpoint,
}

/// Integration controls.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Trajectories whose energy drifts beyond this are stopped and flagged.
    pub energy_alarm: f64,
    /// Step size for the fixed-step midpoint scheme.
    pub fixed_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::AdaptiveRk8,
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_step: 10.0,
            energy_alarm: 1e-8,
            fixed_step: 1e-2,
            max_steps: 50_000_000,
        }
    }
}

/// Why an integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    TimeEnd,
    LeftDomain,
    EnergyAlarm,
    StepUnderflow,
    MaxSteps,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::TimeEnd => "time_end",
            StopReason::LeftDomain => "left_domain",
            StopReason::EnergyAlarm => "energy_alarm",
            StopReason::StepUnderflow => "step_underflow",
            StopReason::MaxSteps => "max_steps",
        }
    }
}

/// A recorded trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub chart: Chart,
    pub times: Vec<f64>,
    pub states: Vec<[f64; 4]>,
    pub energies: Vec<f64>,
    pub actions: Vec<[f64; 2]>,
    pub reason: StopReason,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl TrajectoryRecord {
    pub fn last_state(&self) -> [f64; 4] {
        *self.states.last().expect("records never empty")
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("records never empty")
    }

    pub fn max_energy_drift(&self) -> f64 {
        let h0 = self.energies[0];
        self.energies
            .iter()
            .map(|h| (h - h0).abs())
            .fold(0.0, f64::max)
    }
}

/// An autonomous Hamiltonian system the driver can integrate.
pub trait HamiltonianSystem {
    fn field(&self, z: &[f64; 4]) -> Result<[f64; 4]>;
    fn energy(&self, z: &[f64; 4]) -> Result<f64>;
    fn actions_of(&self, z: &[f64; 4]) -> [f64; 2];
    fn chart(&self) -> Chart;
    /// Normalization after an accepted step (angle wrapping).
    fn wrap(&self, _z: &mut [f64; 4]) {}
    /// Domain-exit predicate; the driver refines the crossing and stops.
    fn exited(&self, _z: &[f64; 4]) -> bool {
        false
    }
}

// ---------------------------------------------------------------------------
// The toy model and its exact flow.

/// `H(θ, R) = ⟨k, R⟩ + ε cos(θ·k⊥)`: the linear resonance model whose flow
/// is exact and drifts along `k⊥`.
#[derive(Debug, Clone, Copy)]
pub struct ToySystem {
    pub k: [i64; 2],
    pub epsilon: f64,
}

impl ToySystem {
    fn k_f(&self) -> [f64; 2] {
        [self.k[0] as f64, self.k[1] as f64]
    }

    fn k_perp(&self) -> [f64; 2] {
        [-(self.k[1] as f64), self.k[0] as f64]
    }
}

impl HamiltonianSystem for ToySystem {
    fn field(&self, z: &[f64; 4]) -> Result<[f64; 4]> {
        let kp = self.k_perp();
        let s = (z[0] * kp[0] + z[1] * kp[1]).sin();
        Ok([
            self.k[0] as f64,
            self.k[1] as f64,
            self.epsilon * s * kp[0],
            self.epsilon * s * kp[1],
        ])
    }

    fn energy(&self, z: &[f64; 4]) -> Result<f64> {
        let kp = self.k_perp();
        Ok(dot2(self.k_f(), [z[2], z[3]]) + self.epsilon * (z[0] * kp[0] + z[1] * kp[1]).cos())
    }

    fn actions_of(&self, z: &[f64; 4]) -> [f64; 2] {
        [z[2], z[3]]
    }

    fn chart(&self) -> Chart {
        Chart::ActionAngle
    }
}

/// Closed-form flow of the toy model:
/// `θ(t) = θ₀ + t k`, `R(t) = R₀ + t ε sin(θ₀·k⊥) k⊥`.
pub fn toy_flow(
    k: [i64; 2],
    epsilon: f64,
    theta0: [f64; 2],
    r0: [f64; 2],
    t: f64,
) -> ([f64; 2], [f64; 2]) {
    let kp = [-(k[1] as f64), k[0] as f64];
    let s = dot2(theta0, kp).sin();
    (
        [theta0[0] + t * k[0] as f64, theta0[1] + t * k[1] as f64],
        [
            r0[0] + t * epsilon * s * kp[0],
            r0[1] + t * epsilon * s * kp[1],
        ],
    )
}

// ---------------------------------------------------------------------------
// Charted views of a perturbed system.

/// Action-angle view: state `(θ₁, θ₂, R₁, R₂)`.
pub struct ActionAngleSystem<'a> {
    pub sys: &'a PerturbedSystem,
}

impl HamiltonianSystem for ActionAngleSystem<'_> {
    fn field(&self, z: &[f64; 4]) -> Result<[f64; 4]> {
        self.sys
            .vector_field_action_angle([z[0], z[1]], [z[2], z[3]])
    }

    fn energy(&self, z: &[f64; 4]) -> Result<f64> {
        self.sys
            .hamiltonian_action_angle([z[0], z[1]], [z[2], z[3]])
    }

    fn actions_of(&self, z: &[f64; 4]) -> [f64; 2] {
        [z[2], z[3]]
    }

    fn chart(&self) -> Chart {
        Chart::ActionAngle
    }

    fn wrap(&self, z: &mut [f64; 4]) {
        z[0] = z[0].rem_euclid(std::f64::consts::TAU);
        z[1] = z[1].rem_euclid(std::f64::consts::TAU);
    }

    fn exited(&self, z: &[f64; 4]) -> bool {
        z[2].abs() >= self.sys.model().delta() * (1.0 - 1e-6)
    }
}

/// Cartesian view: state `(x₁, y₁, x₂, y₂)`.
pub struct CartesianSystem<'a> {
    pub sys: &'a PerturbedSystem,
}

impl HamiltonianSystem for CartesianSystem<'_> {
    fn field(&self, z: &[f64; 4]) -> Result<[f64; 4]> {
        self.sys.vector_field_cartesian(*z)
    }

    fn energy(&self, z: &[f64; 4]) -> Result<f64> {
        self.sys.eval_cartesian(*z)
    }

    fn actions_of(&self, z: &[f64; 4]) -> [f64; 2] {
        actions(*z)
    }

    fn chart(&self) -> Chart {
        Chart::Cartesian
    }

    fn exited(&self, z: &[f64; 4]) -> bool {
        actions(*z)[0] >= self.sys.model().delta() * (1.0 - 1e-6)
    }
}

// ---------------------------------------------------------------------------
// The driver.

struct Recorder<'s, S: HamiltonianSystem> {
    sys: &'s S,
    rec: TrajectoryRecord,
    h0: f64,
    alarm: f64,
}

impl<'s, S: HamiltonianSystem> Recorder<'s, S> {
    fn new(sys: &'s S, t0: f64, z0: [f64; 4], alarm: f64) -> Result<Self> {
        let h0 = sys.energy(&z0)?;
        Ok(Self {
            sys,
            rec: TrajectoryRecord {
                chart: sys.chart(),
                times: vec![t0],
                states: vec![z0],
                energies: vec![h0],
                actions: vec![sys.actions_of(&z0)],
                reason: StopReason::TimeEnd,
                accepted_steps: 0,
                rejected_steps: 0,
            },
            h0,
            alarm,
        })
    }

    /// Records a state; returns false when the energy alarm trips.
    fn push(&mut self, t: f64, z: [f64; 4]) -> Result<bool> {
        let h = self.sys.energy(&z)?;
        self.rec.times.push(t);
        self.rec.states.push(z);
        self.rec.energies.push(h);
        self.rec.actions.push(self.sys.actions_of(&z));
        Ok((h - self.h0).abs() <= self.alarm)
    }
}

/// Integrates from `z0` over `[0, t_end]`. Records every accepted step, or
/// only multiples of `sample_dt` when given (plus the final state). Stops
/// early at domain exit (refined to the boundary), on the energy alarm, or
/// on step-size underflow, recording the reason.
pub fn integrate<S: HamiltonianSystem>(
    sys: &S,
    z0: [f64; 4],
    t_end: f64,
    cfg: &IntegratorConfig,
    sample_dt: Option<f64>,
) -> Result<TrajectoryRecord> {
    match cfg.scheme {
        Scheme::AdaptiveRk8 => integrate_rk8(sys, z0, t_end, cfg, sample_dt),
        Scheme::ImplicitMidpoint => integrate_midpoint(sys, z0, t_end, cfg, sample_dt),
    }
}

fn integrate_rk8<S: HamiltonianSystem>(
    sys: &S,
    z0: [f64; 4],
    t_end: f64,
    cfg: &IntegratorConfig,
    sample_dt: Option<f64>,
) -> Result<TrajectoryRecord> {
    let mut rec = Recorder::new(sys, 0.0, z0, cfg.energy_alarm)?;
    let mut t = 0.0;
    let mut z = z0;
    let mut k1 = sys.field(&z)?;
    let mut h = cfg.max_step.min(t_end).min(1e-2);
    let mut next_sample = sample_dt.map(|dt| (1, dt));
    let mut f = |z: &[f64; 4]| sys.field(z);

    while t < t_end {
        if rec.rec.accepted_steps + rec.rec.rejected_steps >= cfg.max_steps {
            rec.rec.reason = StopReason::MaxSteps;
            return Ok(rec.rec);
        }
        let mut h_try = h.min(t_end - t);
        // Land exactly on the next requested sample time. A clamped step may
        // legitimately be tiny, so it is exempt from the underflow check.
        let mut sample_clamped = false;
        if let Some((i, dt)) = next_sample {
            let gap = i as f64 * dt - t;
            if gap > 0.0 && gap < h_try {
                h_try = gap;
                sample_clamped = true;
            }
        }
        if h_try <= 0.0 || (!sample_clamped && h_try < 1e-14 * t.abs().max(1.0)) {
            rec.rec.reason = StopReason::StepUnderflow;
            return Ok(rec.rec);
        }

        let step = match dop853::try_step(&mut f, &z, &k1, h_try, cfg.abs_tol, cfg.rel_tol) {
            Ok(s) => s,
            Err(_) => {
                // A stage left the admissible domain; retry shorter.
                rec.rec.rejected_steps += 1;
                h = 0.25 * h_try;
                continue;
            }
        };

        let fac11 = step.err.powf(0.125);
        let fac = (fac11 / 0.9).clamp(1.0 / 6.0, 3.0);
        if step.err <= 1.0 {
            let t_new = t + h_try;
            if sys.exited(&step.z_new) {
                let (t_x, z_x) = refine_exit(sys, &z, &k1, t, h_try, cfg)?;
                let _ = rec.push(t_x, z_x)?;
                rec.rec.reason = StopReason::LeftDomain;
                rec.rec.accepted_steps += 1;
                return Ok(rec.rec);
            }
            let mut z_new = step.z_new;
            sys.wrap(&mut z_new);
            k1 = sys.field(&z_new)?;
            t = t_new;
            z = z_new;
            rec.rec.accepted_steps += 1;

            let record_now = match next_sample {
                None => true,
                Some((i, dt)) => {
                    let target = i as f64 * dt;
                    if (t - target).abs() <= 4.0 * f64::EPSILON * target.abs().max(1.0) {
                        t = target;
                        next_sample = Some((i + 1, dt));
                        true
                    } else {
                        false
                    }
                }
            };
            let ok = if record_now || t >= t_end {
                rec.push(t, z)?
            } else {
                (sys.energy(&z)? - rec.h0).abs() <= cfg.energy_alarm
            };
            if !ok {
                if !record_now {
                    rec.push(t, z)?;
                }
                rec.rec.reason = StopReason::EnergyAlarm;
                return Ok(rec.rec);
            }
            h = (h_try / fac).min(cfg.max_step);
        } else {
            rec.rec.rejected_steps += 1;
            h = h_try / (fac11 / 0.9).min(3.0);
        }
    }
    if let Some((_, _)) = next_sample {
        if (rec.rec.last_time() - t_end).abs() > 1e-10 {
            rec.push(t_end, z)?;
        }
    }
    rec.rec.reason = StopReason::TimeEnd;
    Ok(rec.rec)
}

/// Bisects the step size until the state lands just past the exit surface.
fn refine_exit<S: HamiltonianSystem>(
    sys: &S,
    z: &[f64; 4],
    k1: &[f64; 4],
    t: f64,
    h_cross: f64,
    cfg: &IntegratorConfig,
) -> Result<(f64, [f64; 4])> {
    let mut f = |z: &[f64; 4]| sys.field(z);
    let mut lo = 0.0;
    let mut hi = h_cross;
    let mut z_hi = dop853::try_step(&mut f, z, k1, h_cross, cfg.abs_tol, cfg.rel_tol)?.z_new;
    for _ in 0..60 {
        if hi - lo < 1e-12 * h_cross {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let trial = dop853::try_step(&mut f, z, k1, mid, cfg.abs_tol, cfg.rel_tol)?.z_new;
        if sys.exited(&trial) {
            hi = mid;
            z_hi = trial;
        } else {
            lo = mid;
        }
    }
    let mut out = z_hi;
    sys.wrap(&mut out);
    Ok((t + hi, out))
}

// ---------------------------------------------------------------------------
// Implicit midpoint (fixed step, Newton inner iterations).

const MIDPOINT_RESIDUAL: f64 = 1e-13;

fn integrate_midpoint<S: HamiltonianSystem>(
    sys: &S,
    z0: [f64; 4],
    t_end: f64,
    cfg: &IntegratorConfig,
    sample_dt: Option<f64>,
) -> Result<TrajectoryRecord> {
    let mut rec = Recorder::new(sys, 0.0, z0, cfg.energy_alarm)?;
    let h = cfg.fixed_step;
    let mut t = 0.0;
    let mut z = z0;
    let mut next_sample = sample_dt.map(|dt| (1u64, dt));
    while t < t_end - 1e-12 {
        let step = h.min(t_end - t);
        z = midpoint_step(sys, &z, step)?;
        sys.wrap(&mut z);
        t += step;
        rec.rec.accepted_steps += 1;
        if rec.rec.accepted_steps >= cfg.max_steps {
            rec.rec.reason = StopReason::MaxSteps;
            return Ok(rec.rec);
        }
        if sys.exited(&z) {
            rec.push(t, z)?;
            rec.rec.reason = StopReason::LeftDomain;
            return Ok(rec.rec);
        }
        let record_now = match next_sample {
            None => true,
            Some((i, dt)) => {
                let target = i as f64 * dt;
                if t + 1e-12 >= target {
                    next_sample = Some((i + 1, dt));
                    true
                } else {
                    false
                }
            }
        };
        if record_now && !rec.push(t, z)? {
            rec.rec.reason = StopReason::EnergyAlarm;
            return Ok(rec.rec);
        }
    }
    rec.rec.reason = StopReason::TimeEnd;
    Ok(rec.rec)
}

/// One implicit midpoint step `z' = z + h f((z + z')/2)`, solved by Newton
/// with a finite-difference Jacobian of the field (solver plumbing only; the
/// field itself stays analytic).
pub fn midpoint_step<S: HamiltonianSystem>(sys: &S, z: &[f64; 4], h: f64) -> Result<[f64; 4]> {
    let f0 = sys.field(z)?;
    let mut w = [0.0; 4];
    for i in 0..4 {
        w[i] = z[i] + h * f0[i];
    }
    for _ in 0..25 {
        let mut mid = [0.0; 4];
        for i in 0..4 {
            mid[i] = 0.5 * (z[i] + w[i]);
        }
        let fm = sys.field(&mid)?;
        let mut g = [0.0; 4];
        let mut norm = 0.0f64;
        for i in 0..4 {
            g[i] = w[i] - z[i] - h * fm[i];
            norm = norm.max(g[i].abs());
        }
        if norm < MIDPOINT_RESIDUAL {
            return Ok(w);
        }
        // J = I - (h/2) Df(mid), finite-difference columns.
        let mut jac = [[0.0; 4]; 4];
        for j in 0..4 {
            let dz = 1e-7 * (1.0 + mid[j].abs());
            let mut p = mid;
            let mut m = mid;
            p[j] += dz;
            m[j] -= dz;
            let fp = sys.field(&p)?;
            let fmn = sys.field(&m)?;
            for i in 0..4 {
                let dfij = (fp[i] - fmn[i]) / (2.0 * dz);
                jac[i][j] = if i == j { 1.0 } else { 0.0 } - 0.5 * h * dfij;
            }
        }
        let delta = solve4(jac, g)?;
        for i in 0..4 {
            w[i] -= delta[i];
        }
    }
    Err(Error::Integration(
        "implicit midpoint Newton iteration stalled".into(),
    ))
}

#[allow(clippy::needless_range_loop)] // row elimination reads two rows of `a`
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Result<[f64; 4]> {
    for col in 0..4 {
        let mut piv = col;
        for row in (col + 1)..4 {
            if a[row][col].abs() > a[piv][col].abs() {
                piv = row;
            }
        }
        if a[piv][col].abs() < 1e-300 {
            return Err(Error::Integration("singular Newton matrix".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..4 {
            let m = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= m * a[col][k];
            }
            b[row] -= m * b[col];
        }
    }
    let mut x = [0.0; 4];
    for col in (0..4).rev() {
        let mut acc = b[col];
        for k in (col + 1)..4 {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Ok(x)
}

/// Fixed-step RK8 without error control, for order verification.
pub fn integrate_fixed_rk8<S: HamiltonianSystem>(
    sys: &S,
    z0: [f64; 4],
    t_end: f64,
    h: f64,
) -> Result<[f64; 4]> {
    let mut f = |z: &[f64; 4]| sys.field(z);
    let mut z = z0;
    let mut t = 0.0;
    while t < t_end - 1e-12 {
        let step = h.min(t_end - t);
        let k1 = sys.field(&z)?;
        z = dop853::try_step(&mut f, &z, &k1, step, 1.0, 1.0)?.z_new;
        t += step;
    }
    Ok(z)
}

// ---------------------------------------------------------------------------
// Drift experiments.

/// Comparison of one integrated channel orbit against its predicted line.
#[derive(Debug, Clone)]
pub struct DriftReport {
    pub channel: usize,
    pub epsilon: f64,
    pub chart: Chart,
    /// Start of the predicted line in action space.
    pub base_point: [f64; 2],
    /// Predicted action velocity (`ε ε_n k⊥`, with the damping factor in the
    /// cutoff form).
    pub velocity: [f64; 2],
    pub predicted_speed: f64,
    pub fitted_speed: f64,
    pub rel_speed_error: f64,
    /// Max distance of the action curve to the channel line.
    pub max_line_distance: f64,
    /// Max deviation from the predicted point, relative to the total
    /// predicted displacement.
    pub rel_deviation: f64,
    /// Max of `|⟨θ(t) − θ⁽ⁿ⁾, k⊥⟩|` modulo 2π.
    pub max_phase_deviation: f64,
    pub max_energy_drift: f64,
    pub initial_distance: f64,
    pub achieved_distance: f64,
    pub escape_time: f64,
    pub reason: StopReason,
    pub samples: usize,
}

/// Minimal-norm angle with `θ·k⊥ = π/2`, so the resonant sine starts at 1.
pub fn resonant_phase_start(k_perp: [f64; 2]) -> [f64; 2] {
    let n2 = dot2(k_perp, k_perp);
    [
        0.5 * std::f64::consts::PI * k_perp[0] / n2,
        0.5 * std::f64::consts::PI * k_perp[1] / n2,
    ]
}

/// Exit-time budget for drift runs.
pub const DRIFT_TIME_BUDGET: f64 = 5e5;

/// The exact linear law one channel orbit is expected to follow.
#[derive(Debug, Clone, Copy)]
pub struct DriftPrediction {
    pub base_point: [f64; 2],
    pub velocity: [f64; 2],
    pub initial_state: [f64; 4],
    /// Predicted strip-exit time from the linear law.
    pub t_exit: f64,
}

/// Predicted drift line, start state and exit time for a channel; errors
/// when the channel is inactive, cannot drift across the strip, or would
/// take longer than [`DRIFT_TIME_BUDGET`].
pub fn drift_prediction(sys: &PerturbedSystem, channel: usize) -> Result<DriftPrediction> {
    let c = sys
        .channel(channel)
        .ok_or_else(|| Error::Search(format!("no channel with index {channel}")))?;
    if !c.active {
        return Err(Error::Search(format!(
            "channel {channel} is inactive (pruned or underflowed)"
        )));
    }
    let kp = c.k_perp();
    let theta0 = resonant_phase_start(kp);
    let coupling = if sys.use_cutoff() {
        sys.epsilon() * c.eps * c.damping.unwrap_or(0.0)
    } else {
        sys.epsilon() * c.eps
    };
    let velocity = [coupling * kp[0], coupling * kp[1]];
    if velocity[0] <= 0.0 {
        return Err(Error::Integration(format!(
            "channel {channel} drift velocity {velocity:?} does not cross the strip"
        )));
    }
    let delta = sys.model().delta() * (1.0 - 1e-6);
    // With the radial cutoff the orbit starts on the line at R1 = 2 y_n,
    // where the ramp has already reached its plateau; without it the line's
    // axis point works.
    let base_point = if sys.use_cutoff() {
        let s = 2.0 * c.y / c.line_dir[0];
        [2.0 * c.y, c.line_point[1] + s * c.line_dir[1]]
    } else {
        c.line_point
    };
    let initial_state = match sys.chart() {
        Chart::ActionAngle => [theta0[0], theta0[1], base_point[0], base_point[1]],
        Chart::Cartesian => polar_map(theta0, base_point)?,
    };
    let t_exit = (delta - base_point[0]) / velocity[0];
    if !(t_exit.is_finite() && t_exit > 0.0 && t_exit < DRIFT_TIME_BUDGET) {
        return Err(Error::Integration(format!(
            "predicted exit time {t_exit:.3e} for channel {channel} is outside the budget"
        )));
    }
    Ok(DriftPrediction {
        base_point,
        velocity,
        initial_state,
        t_exit,
    })
}

/// Integrates the drifting orbit of one channel and measures it against the
/// exact linear law.
pub fn drift_experiment(
    sys: &PerturbedSystem,
    channel: usize,
    cfg: &IntegratorConfig,
) -> Result<DriftReport> {
    let pred = drift_prediction(sys, channel)?;
    let c = sys
        .channel(channel)
        .expect("drift_prediction validated the channel")
        .clone();
    let kp = c.k_perp();
    let theta0 = resonant_phase_start(kp);
    let velocity = pred.velocity;
    let r0 = pred.base_point;
    let z0 = pred.initial_state;
    let t_exit = pred.t_exit;
    // Step so the run takes ~64 accepted steps. Along the channel the phase
    // is frozen and the field varies only through the slow actions, so long
    // steps remain accurate; fewer steps also keeps the transverse round-off
    // walk (which feeds the resonant phase over the full horizon) small.
    let mut run_cfg = *cfg;
    run_cfg.max_step = (t_exit / 64.0).max(1e-6);
    let record = match sys.chart() {
        Chart::ActionAngle => {
            let view = ActionAngleSystem { sys };
            integrate(&view, z0, 1.25 * t_exit, &run_cfg, None)?
        }
        Chart::Cartesian => {
            let view = CartesianSystem { sys };
            integrate(&view, z0, 1.25 * t_exit, &run_cfg, None)?
        }
    };

    let line_dir = c.line_dir;
    let normal = c.normal;
    let mut max_line_distance = 0.0f64;
    let mut max_dev = 0.0f64;
    let mut max_phase = 0.0f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, (state, r)) in record
        .times
        .iter()
        .zip(record.states.iter().zip(record.actions.iter()))
    {
        let d = [r[0] - r0[0], r[1] - r0[1]];
        max_line_distance = max_line_distance.max(dot2(d, normal).abs());
        let pred = [t * velocity[0], t * velocity[1]];
        max_dev = max_dev.max(norm2([d[0] - pred[0], d[1] - pred[1]]));
        let along = dot2(d, line_dir);
        num += t * along;
        den += t * t;
        let theta = match sys.chart() {
            Chart::ActionAngle => [state[0], state[1]],
            Chart::Cartesian => polar_map_inverse(*state)?.0,
        };
        let raw = dot2([theta[0] - theta0[0], theta[1] - theta0[1]], kp);
        let wrapped = raw.rem_euclid(std::f64::consts::TAU);
        max_phase = max_phase.max(wrapped.min(std::f64::consts::TAU - wrapped));
    }
    let fitted_speed = if den > 0.0 { num / den } else { 0.0 };
    let predicted_speed = norm2(velocity);
    let total_displacement = predicted_speed * record.last_time();
    let final_actions = *record.actions.last().expect("non-empty record");

    Ok(DriftReport {
        channel,
        epsilon: sys.epsilon(),
        chart: sys.chart(),
        base_point: r0,
        velocity,
        predicted_speed,
        fitted_speed,
        rel_speed_error: (fitted_speed - predicted_speed).abs() / predicted_speed,
        max_line_distance,
        rel_deviation: if total_displacement > 0.0 {
            max_dev / total_displacement
        } else {
            f64::INFINITY
        },
        max_phase_deviation: max_phase,
        max_energy_drift: record.max_energy_drift(),
        initial_distance: norm2(r0),
        achieved_distance: norm2(final_actions),
        escape_time: record.last_time(),
        reason: record.reason,
        samples: record.times.len(),
    })
}

/// Per-channel escape summary: initial distances shrink while the achieved
/// distance stays bounded below, the finite-resolution instability signature.
#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub rows: Vec<DriftReport>,
    /// Geometric floor `δ/2` the achieved distances are measured against.
    pub distance_floor: f64,
}

impl SweepSummary {
    pub fn min_achieved(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.achieved_distance)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn all_escaped(&self) -> bool {
        self.rows.iter().all(|r| {
            r.reason == StopReason::LeftDomain && r.achieved_distance >= self.distance_floor
        })
    }
}

/// Runs the drift experiment on the given active channels.
pub fn instability_sweep(
    sys: &PerturbedSystem,
    channels: &[usize],
    cfg: &IntegratorConfig,
) -> Result<SweepSummary> {
    let mut rows = Vec::with_capacity(channels.len());
    for &n in channels {
        rows.push(drift_experiment(sys, n, cfg)?);
    }
    Ok(SweepSummary {
        rows,
        distance_floor: 0.5 * sys.model().delta(),
    })
}

// ---------------------------------------------------------------------------
// Poincaré sections.

/// Section `{ state[coordinate] = value }`, crossed with positive velocity.
#[derive(Debug, Clone, Copy)]
pub struct SectionSpec {
    pub coordinate: usize,
    pub value: f64,
}

/// Crossing states of one seed, refined to `|g| < 1e−10` by reparametrizing
/// the flow with the section coordinate as the independent variable (one
/// short step of the same RK8 core per refinement pass).
///
/// Bracketing needs consecutive states closer than half a revolution of the
/// section coordinate, so the step size is capped at 0.5 regardless of the
/// configured maximum.
pub fn poincare_section<S: HamiltonianSystem>(
    sys: &S,
    section: SectionSpec,
    seed: [f64; 4],
    t_max: f64,
    max_crossings: usize,
    cfg: &IntegratorConfig,
) -> Result<Vec<(f64, [f64; 4])>> {
    let cfg = &IntegratorConfig {
        max_step: cfg.max_step.min(0.5),
        ..*cfg
    };
    let angle_like = sys.chart() == Chart::ActionAngle && section.coordinate < 2;
    let gap = |z: &[f64; 4]| -> f64 {
        let raw = z[section.coordinate] - section.value;
        if angle_like {
            // Principal distance on the circle.
            let w = raw.rem_euclid(std::f64::consts::TAU);
            if w > std::f64::consts::PI {
                w - std::f64::consts::TAU
            } else {
                w
            }
        } else {
            raw
        }
    };

    let record = integrate(sys, seed, t_max, cfg, None)?;
    let mut crossings = Vec::new();
    for i in 1..record.states.len() {
        if crossings.len() >= max_crossings {
            break;
        }
        let (za, zb) = (record.states[i - 1], record.states[i]);
        let (ga, gb) = (gap(&za), gap(&zb));
        // Positive-direction transversal crossing within one step.
        if !(ga < 0.0 && gb >= 0.0 && (gb - ga).abs() < std::f64::consts::PI) {
            continue;
        }
        let mut z = za;
        let mut t = record.times[i - 1];
        let mut ok = true;
        for _ in 0..12 {
            let g = gap(&z);
            if g.abs() < 1e-10 {
                break;
            }
            let f = sys.field(&z)?;
            let fc = f[section.coordinate];
            if fc.abs() < 1e-12 {
                ok = false;
                break;
            }
            // One step of dz/dg = f/g', of size −g.
            let mut fg = |w: &[f64; 4]| -> Result<[f64; 4]> {
                let fw = sys.field(w)?;
                let d = fw[section.coordinate];
                if d.abs() < 1e-300 {
                    return Err(Error::Integration("section tangency".into()));
                }
                Ok([fw[0] / d, fw[1] / d, fw[2] / d, fw[3] / d])
            };
            let k1 = fg(&z)?;
            let step = crate::dop853::try_step(&mut fg, &z, &k1, -g, 1e-14, 1e-12)?;
            z = step.z_new;
            t += -g / fc;
        }
        if ok && gap(&z).abs() < 1e-10 {
            crossings.push((t, z));
        }
    }
    Ok(crossings)
}
