//! Command implementations. Every verification command writes one JSON
//! report into the output directory; each report carries the scenario it was
//! produced from and a `checks` array of rows
//! `{criterion, name, value, tolerance, cmp, pass}` that `report` aggregates.
//! Wall-clock budgets are enforced by the acceptance test suite, not here,
//! so the emitted bytes are identical across reruns.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use resodrift_core::flow::{
    drift_experiment, drift_prediction, integrate, poincare_section, toy_flow, ActionAngleSystem,
    CartesianSystem, IntegratorConfig, SectionSpec, ToySystem,
};
use resodrift_core::gevrey::{
    composition_bound_violation, estimate_constants, fit_gevrey, product_bound_violation,
    profile_a_jet, profile_b_jet, BOUNDARY_MARGIN, FIT_ORDER_CAP,
};
use resodrift_core::jet::Jet;
use resodrift_core::perturbation::{
    polar_map, polar_map_inverse, AssemblyOptions, Chart, PerturbedSystem,
};
use resodrift_core::resonances::{claim_gap_bound, claim_gap_check, lattice_bound_constant};
use resodrift_core::IntegrableModel;

use crate::jsonw::{fmt_float, Json};
use crate::scenario::Scenario;

pub enum CmdError {
    Validation(String),
    MissingInputs(String),
    Numeric(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Validation(_) => 2,
            CmdError::MissingInputs(_) => 3,
            CmdError::Numeric(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CmdError::Validation(m) | CmdError::MissingInputs(m) | CmdError::Numeric(m) => m,
        }
    }
}

type CmdResult = Result<(), CmdError>;

fn validation<T>(msg: impl Into<String>) -> Result<T, CmdError> {
    Err(CmdError::Validation(msg.into()))
}

struct Check {
    criterion: &'static str,
    name: String,
    value: f64,
    tolerance: f64,
    cmp: &'static str,
}

impl Check {
    fn below(criterion: &'static str, name: impl Into<String>, value: f64, tol: f64) -> Check {
        Check {
            criterion,
            name: name.into(),
            value,
            tolerance: tol,
            cmp: "<",
        }
    }

    fn at_least(criterion: &'static str, name: impl Into<String>, value: f64, tol: f64) -> Check {
        Check {
            criterion,
            name: name.into(),
            value,
            tolerance: tol,
            cmp: ">=",
        }
    }

    fn pass(&self) -> bool {
        match self.cmp {
            "<" => self.value < self.tolerance,
            ">=" => self.value >= self.tolerance,
            _ => false,
        }
    }

    fn emit(&self) -> Json {
        Json::obj()
            .field("criterion", self.criterion)
            .field("name", self.name.as_str())
            .field("value", self.value)
            .field("tolerance", self.tolerance)
            .field("cmp", self.cmp)
            .field("pass", self.pass())
    }
}

fn emit_checks(checks: &[Check]) -> Json {
    Json::Arr(checks.iter().map(Check::emit).collect())
}

fn write_output(out: &Path, filename: &str, body: &Json) -> CmdResult {
    fs::create_dir_all(out)
        .map_err(|e| CmdError::Validation(format!("cannot create {}: {e}", out.display())))?;
    let path = out.join(filename);
    fs::write(&path, body.to_pretty_string())
        .map_err(|e| CmdError::Validation(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn finish(checks: &[Check]) -> CmdResult {
    let failing: Vec<&Check> = checks.iter().filter(|c| !c.pass()).collect();
    if failing.is_empty() {
        Ok(())
    } else {
        let names: Vec<&str> = failing.iter().map(|c| c.name.as_str()).collect();
        Err(CmdError::Numeric(format!(
            "{} check(s) failed: {}",
            failing.len(),
            names.join(", ")
        )))
    }
}

// ---------------------------------------------------------------------------
// construct

pub fn run_construct(scenario: &Scenario, out: &Path) -> CmdResult {
    let path = scenario.frequency_path().or_else(validation)?;
    let report = path.check_conditions();
    if !report.condv_ok {
        return validation(format!(
            "path violates the non-parallelism condition (min |W| = {:e})",
            report.min_abs_wronskian
        ));
    }
    let model = IntegrableModel::build(&path)
        .map_err(|e| CmdError::Validation(format!("model construction failed: {e}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let (lo, hi) = path.domain();
    let mut worst_axis = 0.0f64;
    for _ in 0..100 {
        let t = lo + (hi - lo) * rng.gen_range(0.02..0.98);
        let g = model.grad_h([0.0, t]).unwrap();
        let v = path.value_unchecked(t);
        worst_axis = worst_axis.max(((g[0] - v[0]).powi(2) + (g[1] - v[1]).powi(2)).sqrt());
    }
    let h = 1e-6;
    let mut worst_fd = 0.0f64;
    for _ in 0..1000 {
        let x = rng.gen_range(-0.9..0.9) * model.delta();
        let y = lo + (hi - lo) * rng.gen_range(0.05..0.95);
        let r = model.forward_chart(x, y).unwrap();
        let g = model.grad_h(r).unwrap();
        let fd0 = (model.eval_h([r[0] + h, r[1]]).unwrap()
            - model.eval_h([r[0] - h, r[1]]).unwrap())
            / (2.0 * h);
        let fd1 = (model.eval_h([r[0], r[1] + h]).unwrap()
            - model.eval_h([r[0], r[1] - h]).unwrap())
            / (2.0 * h);
        worst_fd = worst_fd.max((g[0] - fd0).abs().max((g[1] - fd1).abs()));
    }

    let hess = model.hessian_h_origin();
    let kol = model.kolmogorov_det();
    let iso = model.isoenergetic_det();
    let jets = path.eval(0.0, 1).unwrap();
    let closed_form = if report.kol1_ok {
        Some(-jets[1][0] * jets[1][0])
    } else if report.kol2_ok {
        let phi0 = jets[0][0] / jets[0][1];
        Some(-(jets[1][1] * phi0) * (jets[1][1] * phi0))
    } else {
        None
    };

    let mut checks = vec![
        Check::below(
            "2",
            "max |grad h(0,t) - v(t)| over 100 samples",
            worst_axis,
            1e-10,
        ),
        Check::below(
            "2",
            "max analytic-vs-FD gradient gap over 1000 points",
            worst_fd,
            1e-6,
        ),
    ];
    if let Some(expected) = closed_form {
        checks.push(Check::below(
            "3",
            format!("|kolmogorov_det - ({expected})|"),
            (kol - expected).abs(),
            1e-8,
        ));
    }

    let body = Json::obj()
        .field("scenario", scenario.emit())
        .field(
            "conditions",
            Json::obj()
                .field("condv_ok", report.condv_ok)
                .field("kol1_ok", report.kol1_ok)
                .field("kol2_ok", report.kol2_ok)
                .field("omega", report.omega)
                .field("omega_sign_product", report.omega_sign_product)
                .field("elliptic_admissible", report.elliptic_admissible)
                .field("grid_points", report.grid_points)
                .field("min_abs_wronskian", report.min_abs_wronskian)
                .field("min_abs_v2", report.min_abs_v2),
        )
        .field(
            "model",
            Json::obj()
                .field("beta", model.beta())
                .field("delta0", model.delta0())
                .field("sup_abs_phi_prime", model.sup_abs_phi_prime())
                .field(
                    "hessian_origin",
                    Json::Arr(vec![Json::from(hess[0]), Json::from(hess[1])]),
                )
                .field("kolmogorov_det", kol)
                .field("isoenergetic_det", iso)
                .field(
                    "kolmogorov_closed_form",
                    closed_form.map_or(Json::Null, Json::Float),
                ),
        )
        .field("checks", emit_checks(&checks));
    write_output(out, &format!("construct_{}.json", scenario.name), &body)?;
    finish(&checks)
}

// ---------------------------------------------------------------------------
// resonances

pub fn run_resonances(scenario: &Scenario, out: &Path) -> CmdResult {
    let sys = scenario.assemble().or_else(validation)?;
    let chans = sys.channels();

    let table: Vec<Json> = chans
        .iter()
        .map(|c| {
            Json::obj()
                .field("n", c.index)
                .field("y", c.y)
                .field("k", Json::Arr(vec![Json::Int(c.k[0]), Json::Int(c.k[1])]))
                .field("eps", c.eps)
                .field("r", c.support_halfwidth)
                .field("gamma", c.gamma)
                .field("line_point", c.line_point)
                .field("line_dir", c.line_dir)
                .field("normal", c.normal)
                .field("collinearity_residual", c.collinearity_residual)
                .field("damping", c.damping.map_or(Json::Null, Json::Float))
                .field("active", c.active)
        })
        .collect();

    let mut worst_gap_dev = 0.0f64;
    let mut gap_bound_ok = true;
    let gap_table: Vec<Json> = (1..=64)
        .map(|n| {
            let gap = claim_gap_check(n);
            let bound = claim_gap_bound(n);
            worst_gap_dev = worst_gap_dev.max((gap - bound).abs());
            gap_bound_ok &= gap < 1.0 / n as f64;
            Json::obj()
                .field("n", n)
                .field("max_gap", gap)
                .field("closed_form", bound)
        })
        .collect();

    let worst_collinearity = chans
        .iter()
        .map(|c| c.collinearity_residual)
        .fold(0.0, f64::max);
    let halving_slack = chans
        .windows(2)
        .map(|w| 2.0 * w[1].y - w[0].y)
        .fold(f64::NEG_INFINITY, f64::max);
    let c_bound = lattice_bound_constant(chans);

    let checks = vec![
        Check::below("4", "max collinearity residual", worst_collinearity, 1e-11),
        Check::below(
            "4",
            "max (2 y_{n+1} - y_n), halving slack",
            halving_slack,
            1e-15,
        ),
        Check::below("4", "lattice constant C = max |k| y", c_bound, 2.0 + 1e-12),
        Check::below(
            "4",
            "max |gap - asin(1/sqrt(n^2+1))| for n <= 64",
            worst_gap_dev,
            1e-12,
        ),
        Check::below(
            "4",
            "gap < 1/n for all n <= 64 (0 = yes)",
            if gap_bound_ok { 0.0 } else { 1.0 },
            0.5,
        ),
    ];

    let body = Json::obj()
        .field("scenario", scenario.emit())
        .field("delta0", sys.model().delta0())
        .field("delta_effective", sys.model().delta())
        .field("shrink", sys.model().shrink())
        .field("lattice_constant", c_bound)
        .field("channels", Json::Arr(table))
        .field("claim_gaps", Json::Arr(gap_table))
        .field("checks", emit_checks(&checks));
    write_output(out, &format!("resonances_{}.json", scenario.name), &body)?;
    finish(&checks)
}

// ---------------------------------------------------------------------------
// verify-drift

fn toy_checks(cfg: &IntegratorConfig, checks: &mut Vec<Check>) -> CmdResult {
    let toy = ToySystem {
        k: [1, 1],
        epsilon: 0.1,
    };
    let kp = [-1.0, 1.0];
    let theta0 = resodrift_core::flow::resonant_phase_start(kp);
    let z0 = [theta0[0], theta0[1], 0.0, 0.0];
    let rec = integrate(&toy, z0, 10.0, cfg, None)
        .map_err(|e| CmdError::Numeric(format!("toy integration failed: {e}")))?;
    let mut max_err = 0.0f64;
    for (t, state) in rec.times.iter().zip(&rec.states) {
        let (theta, r) = toy_flow([1, 1], 0.1, theta0, [0.0, 0.0], *t);
        let exact = [theta[0], theta[1], r[0], r[1]];
        for i in 0..4 {
            max_err = max_err.max((state[i] - exact[i]).abs());
        }
    }
    checks.push(Check::below(
        "1",
        "toy flow max error vs closed form over [0,10]",
        max_err,
        1e-9,
    ));
    Ok(())
}

fn roundtrip_checks(sys: &PerturbedSystem, seed: u64, checks: &mut Vec<Check>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b9);
    let m = sys.model();
    let (lo, hi) = m.path().domain();
    let mut worst_chart = 0.0f64;
    for _ in 0..2000 {
        let x = rng.gen_range(-0.98..0.98) * m.delta();
        let y = lo + (hi - lo) * rng.gen_range(0.01..0.99);
        let r = m.forward_chart(x, y).unwrap();
        let back = m.inverse_chart(r[0], r[1]).unwrap();
        worst_chart = worst_chart.max((back[1] - y).abs());
        let fwd = m.forward_chart(back[0], back[1]).unwrap();
        worst_chart = worst_chart.max((fwd[1] - r[1]).abs());
    }
    let mut worst_polar = 0.0f64;
    for _ in 0..2000 {
        let theta = [rng.gen_range(-3.1..3.1), rng.gen_range(-3.1..3.1)];
        let r = [rng.gen_range(0.01..1.5), rng.gen_range(0.01..1.5)];
        let z = polar_map(theta, r).unwrap();
        let (theta2, r2) = polar_map_inverse(z).unwrap();
        let z2 = polar_map(theta2, r2).unwrap();
        for i in 0..4 {
            worst_polar = worst_polar.max((z[i] - z2[i]).abs());
        }
    }
    checks.push(Check::below("9", "chart round trip", worst_chart, 1e-12));
    checks.push(Check::below(
        "9",
        "polar-map round trip",
        worst_polar,
        1e-12,
    ));
}

fn drift_channel_list(sys: &PerturbedSystem, requested: Option<usize>) -> Vec<usize> {
    match requested {
        Some(n) => vec![n],
        None => sys
            .channels()
            .iter()
            .filter(|c| c.active && drift_prediction(sys, c.index).is_ok())
            .map(|c| c.index)
            .collect(),
    }
}

pub fn run_verify_drift(
    scenario: &Scenario,
    out: &Path,
    requested_channel: Option<usize>,
) -> CmdResult {
    let sys = scenario.assemble().or_else(validation)?;
    let cfg = scenario.integrator_config().or_else(validation)?;
    let mut checks = Vec::new();
    toy_checks(&cfg, &mut checks)?;
    roundtrip_checks(&sys, scenario.seed, &mut checks);

    let channels = drift_channel_list(&sys, requested_channel);
    if channels.is_empty() {
        return Err(CmdError::Numeric(
            "no active channel admits a drift run within the time budget".into(),
        ));
    }

    let mut rows = Vec::new();
    let mut max_energy = 0.0f64;
    let mut max_phase = 0.0f64;
    let mut max_line = 0.0f64;
    let delta = sys.model().delta();
    let mut reports = Vec::new();
    for &n in &channels {
        let rep = drift_experiment(&sys, n, &cfg)
            .map_err(|e| CmdError::Numeric(format!("drift on channel {n} failed: {e}")))?;
        max_energy = max_energy.max(rep.max_energy_drift);
        max_phase = max_phase.max(rep.max_phase_deviation);
        max_line = max_line.max(rep.max_line_distance);
        rows.push(
            Json::obj()
                .field("channel", rep.channel)
                .field("epsilon", rep.epsilon)
                .field("base_point", rep.base_point)
                .field("velocity", rep.velocity)
                .field("predicted_speed", rep.predicted_speed)
                .field("fitted_speed", rep.fitted_speed)
                .field("rel_speed_error", rep.rel_speed_error)
                .field("max_line_distance", rep.max_line_distance)
                .field("rel_deviation", rep.rel_deviation)
                .field("max_phase_deviation", rep.max_phase_deviation)
                .field("max_energy_drift", rep.max_energy_drift)
                .field("initial_distance", rep.initial_distance)
                .field("achieved_distance", rep.achieved_distance)
                .field("escape_time", rep.escape_time)
                .field("samples", rep.samples)
                .field("reason", rep.reason.as_str()),
        );
        reports.push(rep);
    }

    match sys.chart() {
        Chart::ActionAngle => {
            for rep in &reports {
                let displacement = rep.predicted_speed * rep.escape_time;
                checks.push(Check::below(
                    "5",
                    format!("channel {} relative transverse deviation", rep.channel),
                    rep.max_line_distance / displacement,
                    1e-6,
                ));
                checks.push(Check::below(
                    "5",
                    format!("channel {} fitted-speed relative error", rep.channel),
                    rep.rel_speed_error,
                    1e-6,
                ));
                checks.push(Check::at_least(
                    "5",
                    format!("channel {} achieved distance (vs delta/2)", rep.channel),
                    rep.achieved_distance,
                    0.5 * delta,
                ));
            }
            if reports.len() >= 2 {
                let halving = reports
                    .windows(2)
                    .map(|w| (w[1].initial_distance - 0.5 * w[0].initial_distance).abs())
                    .fold(0.0, f64::max);
                checks.push(Check::below(
                    "5",
                    "initial distances halve along the sweep",
                    halving,
                    1e-12,
                ));
            }
        }
        Chart::Cartesian => {
            for rep in &reports {
                checks.push(Check::below(
                    "6",
                    format!(
                        "channel {} relative deviation from the damped drift line",
                        rep.channel
                    ),
                    rep.rel_deviation,
                    1e-5,
                ));
            }
            // The origin is a numerical fixed point.
            let field0 = sys
                .vector_field_cartesian([0.0; 4])
                .map_err(|e| CmdError::Numeric(e.to_string()))?;
            let field_norm = field0.iter().map(|a| a * a).sum::<f64>().sqrt();
            checks.push(Check::below(
                "6",
                "|vector field at the origin| (exact zero required)",
                field_norm,
                f64::MIN_POSITIVE,
            ));
            let view = CartesianSystem { sys: &sys };
            let rec = integrate(&view, [0.0; 4], 10.0, &cfg, None)
                .map_err(|e| CmdError::Numeric(e.to_string()))?;
            let max_norm = rec
                .states
                .iter()
                .map(|z| z.iter().map(|a| a * a).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            checks.push(Check::below(
                "6",
                "origin orbit max norm over [0,10]",
                max_norm,
                1e-12,
            ));

            // Conjugacy of the two charts through the polar map.
            let n = channels[0];
            let pred = drift_prediction(&sys, n).map_err(|e| CmdError::Numeric(e.to_string()))?;
            let (theta0, _) = polar_map_inverse(pred.initial_state)
                .map_err(|e| CmdError::Numeric(e.to_string()))?;
            let aa_view = ActionAngleSystem { sys: &sys };
            let cart_view = CartesianSystem { sys: &sys };
            let z0_aa = [theta0[0], theta0[1], pred.base_point[0], pred.base_point[1]];
            let t_end = 20.0;
            let aa = integrate(&aa_view, z0_aa, t_end, &cfg, Some(0.5))
                .map_err(|e| CmdError::Numeric(e.to_string()))?;
            let cart = integrate(&cart_view, pred.initial_state, t_end, &cfg, Some(0.5))
                .map_err(|e| CmdError::Numeric(e.to_string()))?;
            let mut worst = 0.0f64;
            for (za, zc) in aa.states.iter().zip(&cart.states) {
                let mapped = polar_map([za[0], za[1]], [za[2], za[3]]).unwrap();
                for i in 0..4 {
                    worst = worst.max((mapped[i] - zc[i]).abs());
                }
            }
            checks.push(Check::below(
                "9",
                "action-angle vs Cartesian integration conjugacy",
                worst,
                1e-8,
            ));
        }
    }

    checks.push(Check::below(
        "7",
        "max |H(z(t)) - H(z(0))| over drift runs",
        max_energy,
        1e-8,
    ));
    checks.push(Check::below(
        "7",
        "max resonant-phase deviation",
        max_phase,
        1e-8,
    ));
    checks.push(Check::below(
        "7",
        "max distance to the channel line",
        max_line,
        1e-8,
    ));

    let body = Json::obj()
        .field("scenario", scenario.emit())
        .field("delta_effective", delta)
        .field("drifts", Json::Arr(rows))
        .field("checks", emit_checks(&checks));
    write_output(out, &format!("drift_{}.json", scenario.name), &body)?;
    finish(&checks)
}

// ---------------------------------------------------------------------------
// verify-gevrey

pub fn run_verify_gevrey(scenario: &Scenario, out: &Path) -> CmdResult {
    let gamma = 0.5 * scenario.sigma;
    let s = 1.0 + gamma;
    let mut checks = Vec::new();

    // Envelope estimate at the three reference exponents.
    let mut estimate_rows = Vec::new();
    for g in [0.5, 1.0, 2.0] {
        let cs = estimate_constants(g, 30);
        let c_max = cs.iter().fold(0.0f64, |a, &b| a.max(b));
        let tail_slack = (21..=30)
            .map(|k| cs[k] - cs[k - 1])
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check::below(
            "8",
            format!("envelope constant finite for gamma = {g}"),
            if c_max.is_finite() { 0.0 } else { 1.0 },
            0.5,
        ));
        checks.push(Check::below(
            "8",
            format!("envelope tail decreasing for gamma = {g} (max increment)"),
            tail_slack,
            0.0_f64.next_up(),
        ));
        estimate_rows.push(
            Json::obj()
                .field("gamma", g)
                .field("uniform_constant", c_max)
                .field(
                    "per_order",
                    Json::Arr(cs.iter().map(|&c| Json::Float(c)).collect()),
                ),
        );
    }

    // Fitted profile constants and the closure bounds at the quoted forms.
    let grid: Vec<f64> = (1..24)
        .map(|i| -0.5 + BOUNDARY_MARGIN + (1.0 - 2.0 * BOUNDARY_MARGIN) * i as f64 / 24.0)
        .collect();
    let ajets: Vec<Jet> = grid
        .iter()
        .map(|&u| profile_a_jet(gamma, u, FIT_ORDER_CAP).unwrap())
        .collect();
    let bjets: Vec<Jet> = grid
        .iter()
        .map(|&u| profile_b_jet(gamma, u + 0.5, FIT_ORDER_CAP).unwrap())
        .collect();
    let fit_a = fit_gevrey(&ajets, s).unwrap();
    let fit_b = fit_gevrey(&bjets, s).unwrap();
    let products: Vec<Jet> = ajets.iter().zip(&bjets).map(|(a, b)| a.mul(b)).collect();
    let product_violation = product_bound_violation(&fit_a, &fit_b, &products);
    checks.push(Check::below(
        "8",
        "product closure bound log-violation (Gevrey profiles)",
        product_violation,
        0.0_f64.next_up(),
    ));

    let affine = |u: f64| 0.25 * u + 0.5;
    let outer_jets: Vec<Jet> = grid
        .iter()
        .map(|&u| profile_b_jet(gamma, affine(u), FIT_ORDER_CAP).unwrap())
        .collect();
    let fit_outer = fit_gevrey(&outer_jets, s).unwrap();
    let affine_jets: Vec<Jet> = grid
        .iter()
        .map(|&u| {
            let mut c = vec![0.0; FIT_ORDER_CAP + 1];
            c[0] = affine(u);
            c[1] = 0.25;
            Jet::from_coeffs(c).unwrap()
        })
        .collect();
    let fit_affine = fit_gevrey(&affine_jets, s).unwrap();
    let comp_jets: Vec<Jet> = grid
        .iter()
        .map(|&u| {
            let outer = profile_b_jet(gamma, affine(u), FIT_ORDER_CAP).unwrap();
            let mut inner = vec![0.0; FIT_ORDER_CAP + 1];
            inner[1] = 0.25;
            Jet::compose_into(outer.coeffs(), &Jet::from_coeffs(inner).unwrap()).unwrap()
        })
        .collect();
    let comp_violation = composition_bound_violation(&fit_outer, &fit_affine, &comp_jets);
    checks.push(Check::below(
        "8",
        "composition closure bound log-violation (ramp after affine)",
        comp_violation,
        0.0_f64.next_up(),
    ));

    // Flatness ratios on channels deep enough that eps_n/y_n^m is past its
    // peak at 1/y = m for every m <= 8.
    let path = scenario.frequency_path().or_else(validation)?;
    let model = IntegrableModel::build(&path).map_err(|e| CmdError::Validation(e.to_string()))?;
    let default_start = resodrift_core::resonances::default_search_start(
        &path,
        model.delta0(),
        scenario.chart_enum().or_else(validation)? == Chart::Cartesian,
    );
    let mut opts = AssemblyOptions::new(Chart::ActionAngle, 4, scenario.sigma, scenario.epsilon);
    opts.search_start = Some(default_start.min(0.0625));
    let flat_sys =
        PerturbedSystem::assemble(&path, opts).map_err(|e| CmdError::Numeric(e.to_string()))?;
    let flat = flat_sys.flatness_report(8);
    let mut flat_ok = true;
    for m in 1..=8 {
        flat_ok &= flat.decreasing_in_n(m);
    }
    checks.push(Check::below(
        "8",
        "flatness ratios eps_n/y_n^m decreasing over 4 channels, m <= 8 (0 = yes)",
        if flat_ok { 0.0 } else { 1.0 },
        0.5,
    ));
    let flat_rows: Vec<Json> = flat
        .rows
        .iter()
        .map(|r| {
            Json::obj()
                .field("n", r.index)
                .field("y", r.y)
                .field("eps", r.eps)
                .field("sup_f", r.sup_f)
                .field(
                    "ratios",
                    Json::Arr(r.ratios.iter().map(|&x| Json::Float(x)).collect()),
                )
        })
        .collect();

    let fit_json = |name: &str, f: &resodrift_core::GevreyFit| {
        Json::obj()
            .field("name", name)
            .field("s", f.s)
            .field("c", f.c)
            .field("rho", f.rho)
            .field("orders_checked", f.orders_checked)
            .field("max_violation", f.max_violation)
    };

    let body = Json::obj()
        .field("scenario", scenario.emit())
        .field("gamma", gamma)
        .field("estimates", Json::Arr(estimate_rows))
        .field(
            "fits",
            Json::Arr(vec![
                fit_json("profile_a", &fit_a),
                fit_json("profile_b", &fit_b),
                fit_json("ramp_after_affine_outer", &fit_outer),
                fit_json("affine_inner", &fit_affine),
            ]),
        )
        .field("product_bound_log_violation", product_violation)
        .field("composition_bound_log_violation", comp_violation)
        .field("flatness", Json::Arr(flat_rows))
        .field("checks", emit_checks(&checks));
    write_output(out, &format!("gevrey_{}.json", scenario.name), &body)?;
    finish(&checks)
}

// ---------------------------------------------------------------------------
// simulate

pub fn run_simulate(scenario: &Scenario, out: &Path, channel: Option<usize>) -> CmdResult {
    let sys = scenario.assemble().or_else(validation)?;
    let cfg = scenario.integrator_config().or_else(validation)?;
    let n = channel.unwrap_or_else(|| drift_channel_list(&sys, None).first().copied().unwrap_or(1));
    let pred =
        drift_prediction(&sys, n).map_err(|e| CmdError::Numeric(format!("channel {n}: {e}")))?;
    let c = sys.channel(n).unwrap().clone();
    let t_end = 1.25 * pred.t_exit;
    let sample = t_end / 1000.0;
    let rec = match sys.chart() {
        Chart::ActionAngle => {
            let view = ActionAngleSystem { sys: &sys };
            integrate(&view, pred.initial_state, t_end, &cfg, Some(sample))
        }
        Chart::Cartesian => {
            let view = CartesianSystem { sys: &sys };
            integrate(&view, pred.initial_state, t_end, &cfg, Some(sample))
        }
    }
    .map_err(|e| CmdError::Numeric(e.to_string()))?;

    let mut csv = String::from("t,q1,q2,p1,p2,H,d_line\n");
    for i in 0..rec.times.len() {
        let z = rec.states[i];
        let r = rec.actions[i];
        let d_line = c.signed_distance(r).abs();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_float(rec.times[i]),
            fmt_float(z[0]),
            fmt_float(z[1]),
            fmt_float(z[2]),
            fmt_float(z[3]),
            fmt_float(rec.energies[i]),
            fmt_float(d_line),
        ));
    }
    fs::create_dir_all(out)
        .map_err(|e| CmdError::Validation(format!("cannot create {}: {e}", out.display())))?;
    let path = out.join(format!("traj_{}_ch{}.csv", scenario.name, n));
    fs::write(&path, csv)
        .map_err(|e| CmdError::Validation(format!("cannot write {}: {e}", path.display())))?;
    println!(
        "wrote {} ({} samples, stop: {})",
        path.display(),
        rec.times.len(),
        rec.reason.as_str()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// poincare

pub fn run_poincare(
    scenario: &Scenario,
    out: &Path,
    coordinate: usize,
    value: f64,
    seeds: usize,
    t_max: f64,
) -> CmdResult {
    if coordinate > 3 {
        return validation(format!("section coordinate {coordinate} out of range 0..3"));
    }
    let sys = scenario.assemble().or_else(validation)?;
    let cfg = scenario.integrator_config().or_else(validation)?;
    let section = SectionSpec { coordinate, value };
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let m = sys.model();
    let (lo, hi) = m.path().domain();

    let mut points = Vec::new();
    for _ in 0..seeds {
        let x = rng.gen_range(-0.4..0.4) * m.delta();
        let y = (lo + (hi - lo) * rng.gen_range(0.55..0.85)).abs().max(0.01);
        let r = match m.forward_chart(x, y) {
            Ok(r) => r,
            Err(_) => continue,
        };
        let tau = std::f64::consts::TAU;
        let theta = [rng.gen_range(0.0..tau), rng.gen_range(0.0..tau)];
        let crossings = match sys.chart() {
            Chart::ActionAngle => {
                let view = ActionAngleSystem { sys: &sys };
                let z0 = [theta[0], theta[1], r[0], r[1]];
                poincare_section(&view, section, z0, t_max, 1000, &cfg)
            }
            Chart::Cartesian => {
                if r[0] <= 0.0 || r[1] <= 0.0 {
                    continue;
                }
                let view = CartesianSystem { sys: &sys };
                let z0 = polar_map(theta, r).map_err(|e| CmdError::Numeric(e.to_string()))?;
                poincare_section(&view, section, z0, t_max, 1000, &cfg)
            }
        }
        .map_err(|e| CmdError::Numeric(e.to_string()))?;
        // Coordinates of the untouched degree of freedom.
        let (ui, vi) = if coordinate < 2 {
            match sys.chart() {
                Chart::ActionAngle => (1 - coordinate, 3 - coordinate),
                Chart::Cartesian => (2, 3),
            }
        } else {
            (0, 1)
        };
        for (_, z) in crossings {
            points.push((z[ui], z[vi]));
        }
    }

    if points.is_empty() {
        eprintln!("note: no section crossings within the horizon; emitting an empty cloud");
    }
    let mut csv = String::from("u,v\n");
    for (u, v) in &points {
        csv.push_str(&format!("{},{}\n", fmt_float(*u), fmt_float(*v)));
    }
    fs::create_dir_all(out)
        .map_err(|e| CmdError::Validation(format!("cannot create {}: {e}", out.display())))?;
    let path = out.join(format!("poincare_{}_c{}.csv", scenario.name, coordinate));
    fs::write(&path, csv)
        .map_err(|e| CmdError::Validation(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {} ({} crossings)", path.display(), points.len());
    Ok(())
}

// ---------------------------------------------------------------------------
// report

/// `(criterion, name, value, tolerance, cmp, pass)` as read back from a
/// verification output.
type ReportRow = (String, String, Option<f64>, Option<f64>, String, bool);

pub fn run_report(out: &Path) -> CmdResult {
    let entries = fs::read_dir(out).map_err(|e| {
        CmdError::MissingInputs(format!(
            "cannot read output directory {}: {e}",
            out.display()
        ))
    })?;
    // Filesystem iteration order is not deterministic; sort by name so the
    // aggregated report is byte-stable.
    let mut paths: Vec<PathBuf> = entries.flatten().map(|e| e.path()).collect();
    paths.sort();
    let mut rows: Vec<ReportRow> = Vec::new();
    let mut sources = Vec::new();
    for path in paths {
        let name = path
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .to_string();
        if !name.ends_with(".json") || name == "report.json" {
            continue;
        }
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(_) => continue,
        };
        let value: serde_json::Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let Some(checks) = value.get("checks").and_then(|c| c.as_array()) else {
            continue;
        };
        sources.push(name.clone());
        for check in checks {
            let criterion = check
                .get("criterion")
                .and_then(|v| v.as_str())
                .unwrap_or("?")
                .to_string();
            let cname = check
                .get("name")
                .and_then(|v| v.as_str())
                .unwrap_or("?")
                .to_string();
            let val = check.get("value").and_then(|v| v.as_f64());
            let tol = check.get("tolerance").and_then(|v| v.as_f64());
            let cmp = check
                .get("cmp")
                .and_then(|v| v.as_str())
                .unwrap_or("<")
                .to_string();
            let pass = check.get("pass").and_then(|v| v.as_bool()).unwrap_or(false);
            rows.push((criterion, cname, val, tol, cmp, pass));
        }
    }
    if rows.is_empty() {
        return Err(CmdError::MissingInputs(format!(
            "no verification outputs with checks found in {}",
            out.display()
        )));
    }

    let covered: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.0.as_str()).collect();
    let missing: Vec<&str> = ["1", "2", "3", "4", "5", "6", "7", "8", "9"]
        .into_iter()
        .filter(|id| !covered.contains(id))
        .collect();
    if !missing.is_empty() {
        return Err(CmdError::MissingInputs(format!(
            "criteria without verification outputs: {} (run construct/resonances/verify-drift/verify-gevrey on both bundled scenarios)",
            missing.join(", ")
        )));
    }

    rows.sort_by(|a, b| (a.0.as_str(), a.1.as_str()).cmp(&(b.0.as_str(), b.1.as_str())));
    let mut all_pass = true;
    println!("criterion  status  check");
    for (criterion, name, value, tol, cmp, pass) in &rows {
        all_pass &= *pass;
        let detail = match (value, tol) {
            (Some(v), Some(t)) => format!("{name} ({v:.3e} {cmp} {t:.3e})"),
            _ => name.clone(),
        };
        println!(
            "{criterion:>9}  {}  {detail}",
            if *pass { "PASS " } else { "FAIL " }
        );
    }

    let body = Json::obj()
        .field(
            "sources",
            Json::Arr(sources.iter().map(|s| Json::from(s.as_str())).collect()),
        )
        .field("all_pass", all_pass)
        .field(
            "rows",
            Json::Arr(
                rows.iter()
                    .map(|(criterion, name, value, tol, cmp, pass)| {
                        Json::obj()
                            .field("criterion", criterion.as_str())
                            .field("name", name.as_str())
                            .field("value", value.map_or(Json::Null, Json::Float))
                            .field("tolerance", tol.map_or(Json::Null, Json::Float))
                            .field("cmp", cmp.as_str())
                            .field("pass", *pass)
                    })
                    .collect(),
            ),
        );
    write_output(out, "report.json", &body)?;
    if all_pass {
        println!("all criteria PASS");
        Ok(())
    } else {
        Err(CmdError::Numeric("some criteria failed".into()))
    }
}

/// Channel list helper shared with `main` for flag handling.
pub fn out_dir(path: &Option<PathBuf>) -> PathBuf {
    path.clone().unwrap_or_else(|| PathBuf::from("out"))
}
