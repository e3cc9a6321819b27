//! Experiment configuration, read from TOML. Unknown keys are rejected.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{Scheme, StepOptions};
use crate::fluid::PdeOptions;
use crate::gaussian::GaussianSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Lift,
    Rde,
    Burgers,
    CamassaHolm,
    Euler2d,
    WongZakai,
    Audit,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Lift,
        Scenario::Rde,
        Scenario::Burgers,
        Scenario::CamassaHolm,
        Scenario::Euler2d,
        Scenario::WongZakai,
        Scenario::Audit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Lift => "lift",
            Scenario::Rde => "rde",
            Scenario::Burgers => "burgers",
            Scenario::CamassaHolm => "camassa_holm",
            Scenario::Euler2d => "euler2d",
            Scenario::WongZakai => "wong_zakai",
            Scenario::Audit => "audit",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
                Error::Config(format!("unknown scenario '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriverKind {
    Brownian,
    Fbm,
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverConfig {
    pub kind: DriverKind,
    #[serde(rename = "H", default, skip_serializing_if = "Option::is_none")]
    pub hurst: Option<f64>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_fine_resolution")]
    pub fine_resolution: usize,
    /// Analytic drivers: one expression in `t` per component.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<String>>,
}

fn default_fine_resolution() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Spatial resolution of the PDE scenarios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub steps: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Rough fields, one list of component expressions per driver component.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rough: Option<Vec<Vec<String>>>,
    /// 2D rough fields given by stream functions, `ξ = (∂_y ψ, −∂_x ψ)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream: Option<Vec<String>>,
    /// Drift components, expressions in `t` and the coordinates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<Vec<String>>,
    /// Initial velocity (1D) or vorticity (2D).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_ch: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub particles: Option<Vec<Vec<f64>>>,
}

impl FieldsConfig {
    /// Keys set here take precedence over those of `base`.
    pub fn over(self, base: FieldsConfig) -> FieldsConfig {
        let (rough, stream) = if self.rough.is_some() || self.stream.is_some() {
            (self.rough, self.stream)
        } else {
            (base.rough, base.stream)
        };
        FieldsConfig {
            preset: self.preset.or(base.preset),
            rough,
            stream,
            drift: self.drift.or(base.drift),
            initial: self.initial.or(base.initial),
            alpha_ch: self.alpha_ch.or(base.alpha_ch),
            particles: self.particles.or(base.particles),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub ode_substeps: usize,
    pub drift_substeps: usize,
    pub cfl_safety: f64,
    pub rough_safety: f64,
    pub tail_warn: f64,
    pub tail_abort: f64,
    /// Number of evenly spaced snapshot intervals written for PDE runs.
    pub snapshots: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let pde = PdeOptions::default();
        let step = StepOptions::default();
        Self {
            scheme: step.scheme,
            ode_substeps: step.ode_substeps,
            drift_substeps: step.drift_substeps,
            cfl_safety: pde.cfl_safety,
            rough_safety: pde.rough_safety,
            tail_warn: pde.tail_warn,
            tail_abort: pde.tail_abort,
            snapshots: 4,
        }
    }
}

impl SolverConfig {
    pub fn step_options(&self) -> StepOptions {
        StepOptions {
            scheme: self.scheme,
            drift_substeps: self.drift_substeps,
            ode_substeps: self.ode_substeps,
        }
    }

    pub fn pde_options(&self) -> PdeOptions {
        PdeOptions {
            cfl_safety: self.cfl_safety,
            rough_safety: self.rough_safety,
            tail_warn: self.tail_warn,
            tail_abort: self.tail_abort,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    /// Chen and geometricity residuals of the driver.
    pub chen: bool,
    /// Conserved-quantity audit of PDE runs.
    pub invariants: bool,
    pub tolerance: f64,
    /// Circulation around an advected circle (2D runs).
    pub kelvin: bool,
    pub kelvin_vertices: usize,
    pub kelvin_center: [f64; 2],
    pub kelvin_radius: f64,
    pub kelvin_tolerance: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            chen: true,
            invariants: true,
            tolerance: 1e-6,
            kelvin: false,
            kelvin_vertices: 256,
            kelvin_center: [std::f64::consts::PI; 2],
            kelvin_radius: 1.0,
            kelvin_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WongZakaiModel {
    Rde,
    Burgers,
    CamassaHolm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WongZakaiConfig {
    pub model: WongZakaiModel,
    pub levels: usize,
}

impl Default for WongZakaiConfig {
    fn default() -> Self {
        Self {
            model: WongZakaiModel::Rde,
            levels: 4,
        }
    }
}

/// Optional refinement study run alongside the scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    pub csv: bool,
    pub binary: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            csv: true,
            binary: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub seed: u64,
    pub driver: DriverConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub fields: FieldsConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub audit: AuditConfig,
    #[serde(default)]
    pub wong_zakai: WongZakaiConfig,
    #[serde(default)]
    pub study: StudyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    /// Parse and validate.
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(src).map_err(|e| Error::Config(e.to_string().trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn scenario(&self) -> Result<Scenario> {
        self.scenario
            .ok_or_else(|| Error::Config("no scenario given in the configuration or on the command line".into()))
    }

    pub fn driver_seed(&self) -> u64 {
        self.driver.seed.unwrap_or(self.seed)
    }

    /// Gaussian driver description; `None` for analytic drivers.
    pub fn gaussian_spec(&self, default_dim: usize) -> Option<GaussianSpec> {
        let dim = self.driver.dim.unwrap_or(default_dim.max(1));
        let spec = match self.driver.kind {
            DriverKind::Brownian => GaussianSpec::brownian(dim, self.driver_seed()),
            DriverKind::Fbm => GaussianSpec::fbm(self.driver.hurst.unwrap_or(0.5), dim, self.driver_seed()),
            DriverKind::Analytic => return None,
        };
        Some(spec.with_fine_resolution(self.driver.fine_resolution))
    }

    /// Schema checks that need no computation.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let g = &self.grid;
        if g.steps == 0 {
            return bad("grid.steps must be positive".into());
        }
        if !(g.horizon.is_finite() && g.horizon > 0.0) {
            return bad(format!("grid.T must be positive, got {}", g.horizon));
        }
        if let Some(n) = g.n {
            if n < 8 || !n.is_power_of_two() {
                return bad(format!("grid.n must be a power of two ≥ 8, got {n}"));
            }
        }
        let d = &self.driver;
        match d.kind {
            DriverKind::Analytic => {
                if d.components.as_ref().is_none_or(|c| c.is_empty()) {
                    return bad("analytic drivers need driver.components".into());
                }
                if d.hurst.is_some() {
                    return bad("driver.H applies to fbm drivers only".into());
                }
                if let (Some(k), Some(c)) = (d.dim, &d.components) {
                    if k != c.len() {
                        return bad(format!("driver.K = {k} but {} components are given", c.len()));
                    }
                }
            }
            DriverKind::Brownian | DriverKind::Fbm => {
                if d.components.is_some() {
                    return bad("driver.components applies to analytic drivers only".into());
                }
                if d.kind == DriverKind::Brownian && d.hurst.is_some_and(|h| h != 0.5) {
                    return bad("Brownian drivers have H = 0.5".into());
                }
                if let Some(spec) = self.gaussian_spec(1) {
                    if d.kind == DriverKind::Fbm && d.hurst.is_none() {
                        return bad("fbm drivers need driver.H".into());
                    }
                    spec.validate().map_err(|e| Error::Config(e.to_string()))?;
                }
            }
        }
        if d.dim == Some(0) {
            return bad("driver.K must be positive".into());
        }
        let s = &self.solver;
        if s.ode_substeps == 0 || s.drift_substeps == 0 {
            return bad("solver substep counts must be positive".into());
        }
        for (name, v) in [
            ("cfl_safety", s.cfl_safety),
            ("rough_safety", s.rough_safety),
            ("tail_warn", s.tail_warn),
            ("tail_abort", s.tail_abort),
            ("audit.tolerance", self.audit.tolerance),
            ("audit.kelvin_tolerance", self.audit.kelvin_tolerance),
            ("audit.kelvin_radius", self.audit.kelvin_radius),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if s.snapshots == 0 {
            return bad("solver.snapshots must be positive".into());
        }
        if self.audit.kelvin_vertices < 3 {
            return bad("audit.kelvin_vertices must be at least 3".into());
        }
        if self.wong_zakai.levels < 3 {
            return bad(format!("wong_zakai.levels must be at least 3, got {}", self.wong_zakai.levels));
        }
        if let Some(l) = self.study.levels {
            if l < 3 {
                return bad(format!("study.levels must be at least 3, got {l}"));
            }
        }
        if let Some(a) = self.fields.alpha_ch {
            if !(a.is_finite() && a >= 0.0) {
                return bad(format!("fields.alpha_ch must be non-negative, got {a}"));
            }
        }
        if self.fields.rough.is_some() && self.fields.stream.is_some() {
            return bad("give either fields.rough or fields.stream, not both".into());
        }
        Ok(())
    }
}
