//! Scenario files: one JSON object holding the path, the perturbation
//! parameters and the integrator configuration. Unknown keys are rejected;
//! command-line flags override file values.

use serde::Deserialize;

use crate::jsonw::Json;
use resodrift_core::flow::{IntegratorConfig, Scheme};
use resodrift_core::path::FrequencyPath;
use resodrift_core::perturbation::{AssemblyOptions, Chart, PerturbedSystem};

pub const BUNDLED: &[(&str, &str)] = &[
    (
        "torus_example",
        include_str!("../../../scenarios/torus_example.json"),
    ),
    (
        "elliptic_example",
        include_str!("../../../scenarios/elliptic_example.json"),
    ),
];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    #[serde(rename = "J", default = "default_interval")]
    pub j: [f64; 2],
}

fn default_interval() -> [f64; 2] {
    [-1.0, 1.0]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_max_step")]
    pub max_step: f64,
    #[serde(default = "default_energy_alarm")]
    pub energy_alarm: f64,
    #[serde(default = "default_fixed_step")]
    pub fixed_step: f64,
}

fn default_scheme() -> String {
    "adaptive_rk8".into()
}
fn default_rel_tol() -> f64 {
    1e-12
}
fn default_abs_tol() -> f64 {
    1e-14
}
fn default_max_step() -> f64 {
    10.0
}
fn default_energy_alarm() -> f64 {
    1e-8
}
fn default_fixed_step() -> f64 {
    1e-2
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self {
            scheme: default_scheme(),
            rel_tol: default_rel_tol(),
            abs_tol: default_abs_tol(),
            max_step: default_max_step(),
            energy_alarm: default_energy_alarm(),
            fixed_step: default_fixed_step(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub path: PathSpec,
    pub sigma: f64,
    pub epsilon: f64,
    pub chart: String,
    #[serde(default)]
    pub cutoff: Option<bool>,
    pub channels: usize,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    /// Loads a scenario from a bundled name or a file path.
    pub fn load(spec: &str) -> Result<Scenario, String> {
        let text = match BUNDLED.iter().find(|(name, _)| *name == spec) {
            Some((_, body)) => (*body).to_string(),
            None => std::fs::read_to_string(spec)
                .map_err(|e| format!("cannot read scenario {spec}: {e}"))?,
        };
        let scenario: Scenario =
            serde_json::from_str(&text).map_err(|e| format!("invalid scenario {spec}: {e}"))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.sigma.is_nan() || self.sigma <= 0.0 {
            return Err(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.channels == 0 {
            return Err("channels must be at least 1".into());
        }
        if self.path.j[0].is_nan() || self.path.j[1].is_nan() || self.path.j[0] >= self.path.j[1] {
            return Err(format!("empty interval J = {:?}", self.path.j));
        }
        self.chart_enum()?;
        self.scheme_enum()?;
        Ok(())
    }

    pub fn chart_enum(&self) -> Result<Chart, String> {
        match self.chart.as_str() {
            "action_angle" => Ok(Chart::ActionAngle),
            "cartesian" => Ok(Chart::Cartesian),
            other => Err(format!(
                "unknown chart {other:?} (expected action_angle or cartesian)"
            )),
        }
    }

    pub fn scheme_enum(&self) -> Result<Scheme, String> {
        match self.integrator.scheme.as_str() {
            "adaptive_rk8" => Ok(Scheme::AdaptiveRk8),
            "implicit_midpoint" => Ok(Scheme::ImplicitMidpoint),
            other => Err(format!(
                "unknown scheme {other:?} (expected adaptive_rk8 or implicit_midpoint)"
            )),
        }
    }

    pub fn use_cutoff(&self) -> Result<bool, String> {
        let chart = self.chart_enum()?;
        Ok(self.cutoff.unwrap_or(chart == Chart::Cartesian))
    }

    pub fn frequency_path(&self) -> Result<FrequencyPath, String> {
        FrequencyPath::new(
            self.path.v1.clone(),
            self.path.v2.clone(),
            self.path.j[0],
            self.path.j[1],
        )
        .map_err(|e| format!("invalid path: {e}"))
    }

    pub fn integrator_config(&self) -> Result<IntegratorConfig, String> {
        Ok(IntegratorConfig {
            scheme: self.scheme_enum()?,
            rel_tol: self.integrator.rel_tol,
            abs_tol: self.integrator.abs_tol,
            max_step: self.integrator.max_step,
            energy_alarm: self.integrator.energy_alarm,
            fixed_step: self.integrator.fixed_step,
            ..IntegratorConfig::default()
        })
    }

    pub fn assemble(&self) -> Result<PerturbedSystem, String> {
        let path = self.frequency_path()?;
        let mut opts =
            AssemblyOptions::new(self.chart_enum()?, self.channels, self.sigma, self.epsilon);
        opts.use_cutoff = self.use_cutoff()?;
        PerturbedSystem::assemble(&path, opts).map_err(|e| format!("assembly failed: {e}"))
    }

    /// Canonical emission; `parse ∘ emit` is the identity thanks to the
    /// 17-digit float format.
    pub fn emit(&self) -> Json {
        Json::obj()
            .field("name", self.name.as_str())
            .field(
                "path",
                Json::obj()
                    .field(
                        "v1",
                        Json::Arr(self.path.v1.iter().map(|&c| Json::Float(c)).collect()),
                    )
                    .field(
                        "v2",
                        Json::Arr(self.path.v2.iter().map(|&c| Json::Float(c)).collect()),
                    )
                    .field("J", self.path.j),
            )
            .field("sigma", self.sigma)
            .field("epsilon", self.epsilon)
            .field("chart", self.chart.as_str())
            .field(
                "cutoff",
                match self.cutoff {
                    Some(b) => Json::Bool(b),
                    None => Json::Null,
                },
            )
            .field("channels", self.channels)
            .field(
                "integrator",
                Json::obj()
                    .field("scheme", self.integrator.scheme.as_str())
                    .field("rel_tol", self.integrator.rel_tol)
                    .field("abs_tol", self.integrator.abs_tol)
                    .field("max_step", self.integrator.max_step)
                    .field("energy_alarm", self.integrator.energy_alarm)
                    .field("fixed_step", self.integrator.fixed_step),
            )
            .field("seed", Json::Int(self.seed as i64))
    }
}
