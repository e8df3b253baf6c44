//! Run configuration: a TOML file mapping onto the scenario builders, with
//! validation that reports every violated constraint at once.

use std::path::Path;

use anyhow::{Context, Result, bail};
use serde::{Deserialize, Serialize};

use geoheat::flow::VelocityField;
use geoheat::grid::{BoundarySpec, BoundaryTag, Rectangle, build_grid};
use geoheat::integrators::{Scheme, StepperConfig};
use geoheat::phases::{ModelParams, SourceSpec};
use geoheat::scenarios::{Layer, LayeredScenario, TwoPhaseBenchmark};
use geoheat::splitting::{SplitConfig, SplitScheme};
use geoheat::transport::BoundaryValues;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    TwoPhase,
    Layered,
    Convergence,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagConfig {
    Dirichlet,
    Neumann,
    Outflow,
}

impl From<TagConfig> for BoundaryTag {
    fn from(t: TagConfig) -> Self {
        match t {
            TagConfig::Dirichlet => BoundaryTag::Dirichlet,
            TagConfig::Neumann => BoundaryTag::NeumannZero,
            TagConfig::Outflow => BoundaryTag::Outflow,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub left: TagConfig,
    pub right: TagConfig,
    pub bottom: TagConfig,
    pub top: TagConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bottom_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsConfig {
    pub species: usize,
    pub porosity: f64,
    pub exchange_mobile_immobile: f64,
    pub exchange_sorption: f64,
    pub retardation: f64,
    /// Chain rates: species `i` decays at `decay_chain[i]`, feeding `i+1`.
    pub decay_chain: Vec<f64>,
    pub diffusion: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityConfig {
    pub vx: f64,
    pub vy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub y_min: f64,
    pub y_max: f64,
    pub diffusivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKindConfig {
    Point,
    Area,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub kind: SourceKindConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<usize>,
    /// Zero-based species index.
    pub species: usize,
    pub total: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeConfig {
    AdditiveSigma,
    Iterative,
    OneSideA,
    OneSideB,
    Unsplit,
}

impl From<SchemeConfig> for SplitScheme {
    fn from(s: SchemeConfig) -> Self {
        match s {
            SchemeConfig::AdditiveSigma => SplitScheme::AdditiveSigma,
            SchemeConfig::Iterative => SplitScheme::Iterative,
            SchemeConfig::OneSideA => SplitScheme::OneSideA,
            SchemeConfig::OneSideB => SplitScheme::OneSideB,
            SchemeConfig::Unsplit => SplitScheme::Unsplit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerSchemeConfig {
    ExplicitEuler,
    ImplicitEuler,
    ImplicitTrapezoidal,
    Exponential,
}

impl From<InnerSchemeConfig> for Scheme {
    fn from(s: InnerSchemeConfig) -> Self {
        match s {
            InnerSchemeConfig::ExplicitEuler => Scheme::ExplicitEuler,
            InnerSchemeConfig::ImplicitEuler => Scheme::ImplicitEuler,
            InnerSchemeConfig::ImplicitTrapezoidal => Scheme::ImplicitTrapezoidal,
            InnerSchemeConfig::Exponential => Scheme::Exponential,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfigToml {
    pub scheme: SchemeConfig,
    pub sigma: f64,
    pub iterations: usize,
    pub err_tol: f64,
    pub tau: f64,
    pub inner_scheme: InnerSchemeConfig,
    pub inner_dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarchConfig {
    pub n_steps: usize,
    pub cfl_max: f64,
    pub initial_dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseConfig {
    pub points: usize,
    pub diffusion: f64,
    pub velocity: f64,
    pub dx: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub exchange: f64,
    pub tau: f64,
    pub k_max: usize,
    pub n_steps: usize,
    pub inner_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    /// Seed for the fixed stable operator pair.
    pub seed: u64,
    pub t_end: f64,
    pub tau_max: f64,
    /// Number of halvings below `tau_max` (grid size = levels).
    pub levels: usize,
    /// Iteration counts swept for the iterative scheme.
    pub iterations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: String,
    pub snapshot_steps: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<VelocityConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub layers: Vec<LayerConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<SourceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitConfigToml>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub march: Option<MarchConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_phase: Option<TwoPhaseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceConfig>,
    pub output: OutputConfig,
}

/// Parse and fully validate a configuration file. Parse errors carry the
/// TOML location; validation reports every violation at once.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let config: RunConfig =
        toml::from_str(&text).with_context(|| format!("cannot parse config {}", path.display()))?;
    let violations = config.validate();
    if !violations.is_empty() {
        bail!(
            "invalid configuration {}:\n  - {}",
            path.display(),
            violations.join("\n  - ")
        );
    }
    Ok(config)
}

/// Serialize a configuration; `parse` of the result round-trips.
pub fn emit_config(config: &RunConfig) -> Result<String> {
    Ok(toml::to_string_pretty(config)?)
}

impl RunConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        match self.scenario {
            ScenarioKind::TwoPhase => {
                if self.two_phase.is_none() {
                    v.push("two_phase: section required for scenario = \"two_phase\"".into());
                }
            }
            ScenarioKind::Convergence => {
                if self.convergence.is_none() {
                    v.push("convergence: section required for scenario = \"convergence\"".into());
                }
            }
            ScenarioKind::Layered | ScenarioKind::Custom => {
                for (name, present) in [
                    ("grid", self.grid.is_some()),
                    ("params", self.params.is_some()),
                    ("velocity", self.velocity.is_some()),
                    ("split", self.split.is_some()),
                    ("march", self.march.is_some()),
                ] {
                    if !present {
                        v.push(format!("{name}: section required for field scenarios"));
                    }
                }
            }
        }
        if let Some(g) = &self.grid {
            if g.nx == 0 || g.ny == 0 {
                v.push("grid.nx/ny: cell counts must be positive".into());
            }
            if !(g.x1 > g.x0) || !(g.y1 > g.y0) {
                v.push("grid extents: x1 > x0 and y1 > y0 required".into());
            }
            for (side, tag, value) in [
                ("left", g.left, g.left_value),
                ("right", g.right, g.right_value),
                ("bottom", g.bottom, g.bottom_value),
                ("top", g.top, g.top_value),
            ] {
                if tag == TagConfig::Dirichlet && value.is_none() {
                    v.push(format!("grid.{side}_value: required for a dirichlet side"));
                }
                if tag != TagConfig::Dirichlet && value.is_some() {
                    v.push(format!(
                        "grid.{side}_value: only allowed on a dirichlet side"
                    ));
                }
            }
        }
        if let Some(p) = &self.params {
            if p.species == 0 {
                v.push("params.species: must be at least 1".into());
            }
            if !(p.porosity > 0.0 && p.porosity <= 1.0) {
                v.push(format!(
                    "params.porosity: must be in (0, 1], got {}",
                    p.porosity
                ));
            }
            if p.exchange_mobile_immobile < 0.0 {
                v.push("params.exchange_mobile_immobile: must be >= 0".into());
            }
            if p.exchange_sorption < 0.0 {
                v.push("params.exchange_sorption: must be >= 0".into());
            }
            if !(p.retardation > 0.0) {
                v.push("params.retardation: must be > 0".into());
            }
            if p.decay_chain.len() != p.species {
                v.push(format!(
                    "params.decay_chain: {} entries for {} species",
                    p.decay_chain.len(),
                    p.species
                ));
            }
            if p.decay_chain.iter().any(|r| *r < 0.0) {
                v.push("params.decay_chain: rates must be >= 0".into());
            }
            if p.diffusion.len() != p.species {
                v.push(format!(
                    "params.diffusion: {} entries for {} species",
                    p.diffusion.len(),
                    p.species
                ));
            }
            for (i, s) in self.sources.iter().enumerate() {
                if s.species >= p.species {
                    v.push(format!(
                        "sources[{i}].species: index {} out of range for {} species",
                        s.species, p.species
                    ));
                }
            }
        }
        for (i, s) in self.sources.iter().enumerate() {
            match s.kind {
                SourceKindConfig::Point => {
                    if s.x.is_none() || s.y.is_none() {
                        v.push(format!("sources[{i}]: point sources need x and y"));
                    }
                }
                SourceKindConfig::Area => {
                    if s.cells.is_empty() {
                        v.push(format!("sources[{i}]: area sources need a cell list"));
                    }
                }
            }
            if !(s.duration > 0.0) {
                v.push(format!("sources[{i}].duration: must be > 0"));
            }
        }
        for (i, l) in self.layers.iter().enumerate() {
            if !(l.y_max > l.y_min) {
                v.push(format!("layers[{i}]: y_max must exceed y_min"));
            }
            if l.diffusivity < 0.0 {
                v.push(format!("layers[{i}].diffusivity: must be >= 0"));
            }
        }
        if let Some(s) = &self.split {
            if !(0.0..=1.0).contains(&s.sigma) {
                v.push(format!(
                    "split.sigma: sigma must be in [0,1], got {}",
                    s.sigma
                ));
            }
            if s.iterations == 0 {
                v.push("split.iterations: must be at least 1".into());
            }
            if !(s.err_tol > 0.0) {
                v.push("split.err_tol: must be > 0".into());
            }
            if !(s.tau > 0.0) {
                v.push("split.tau: must be > 0".into());
            }
            if !(s.inner_dt > 0.0) {
                v.push("split.inner_dt: must be > 0".into());
            }
        }
        if let Some(m) = &self.march {
            if m.n_steps == 0 {
                v.push("march.n_steps: must be at least 1".into());
            }
            if !(m.cfl_max > 0.0) {
                v.push("march.cfl_max: must be > 0".into());
            }
            if !(m.initial_dt > 0.0) {
                v.push("march.initial_dt: must be > 0".into());
            }
        }
        if let Some(t) = &self.two_phase {
            if t.points < 2 {
                v.push("two_phase.points: need at least 2 spatial points".into());
            }
            if 4 * t.points > 2000 {
                v.push("two_phase.points: dense reference limited to 4*points <= 2000".into());
            }
            if t.k_max == 0 || t.n_steps == 0 || t.inner_nodes == 0 {
                v.push("two_phase: k_max, n_steps, inner_nodes must be positive".into());
            }
            for (key, x) in [("tau", t.tau), ("dx", t.dx)] {
                if !(x > 0.0) {
                    v.push(format!("two_phase.{key}: must be > 0"));
                }
            }
            if t.diffusion < 0.0 || t.exchange < 0.0 || t.lambda1 < 0.0 || t.lambda2 < 0.0 {
                v.push("two_phase: diffusion, exchange, and decay rates must be >= 0".into());
            }
        }
        if let Some(c) = &self.convergence {
            if c.levels < 3 {
                v.push("convergence.levels: need at least 3 step sizes".into());
            }
            if !(c.tau_max > 0.0) || !(c.t_end > 0.0) {
                v.push("convergence.tau_max and t_end: must be > 0".into());
            }
            if c.iterations.is_empty() || c.iterations.contains(&0) {
                v.push("convergence.iterations: nonempty list of counts >= 1".into());
            }
        }
        if self.output.dir.is_empty() {
            v.push("output.dir: must not be empty".into());
        }
        v
    }

    /// Materialize the field-scale scenario (layered or custom).
    pub fn build_layered(&self) -> Result<LayeredScenario> {
        let g = self.grid.as_ref().expect("validated");
        let p = self.params.as_ref().expect("validated");
        let vel = self.velocity.as_ref().expect("validated");
        let s = self.split.as_ref().expect("validated");
        let m = self.march.as_ref().expect("validated");

        let grid = build_grid(
            g.nx,
            g.ny,
            &Rectangle::new(g.x0, g.x1, g.y0, g.y1),
            BoundarySpec {
                left: g.left.into(),
                right: g.right.into(),
                bottom: g.bottom.into(),
                top: g.top.into(),
            },
        )
        .map_err(anyhow::Error::new)?;

        let mut params = ModelParams::inert(p.species).with_decay_chain(&p.decay_chain);
        params.porosity = p.porosity;
        params.exchange_mobile_immobile = p.exchange_mobile_immobile;
        params.exchange_sorption = p.exchange_sorption;
        params.retardation = p.retardation;
        params.diffusion = p.diffusion.clone();

        let mut sources = Vec::with_capacity(self.sources.len());
        for sc in &self.sources {
            let spec = match sc.kind {
                SourceKindConfig::Point => SourceSpec::point_at(
                    &grid,
                    sc.x.expect("validated"),
                    sc.y.expect("validated"),
                    sc.species,
                    sc.total,
                    sc.duration,
                )
                .map_err(anyhow::Error::new)?,
                SourceKindConfig::Area => {
                    SourceSpec::area(sc.cells.clone(), sc.species, sc.total, sc.duration)
                }
            };
            sources.push(spec);
        }

        Ok(LayeredScenario {
            grid,
            params,
            velocity: VelocityField::constant(vel.vx, vel.vy),
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    y_min: l.y_min,
                    y_max: l.y_max,
                    diffusivity: l.diffusivity,
                })
                .collect(),
            sources,
            boundary_values: BoundaryValues {
                left: g.left_value,
                right: g.right_value,
                bottom: g.bottom_value,
                top: g.top_value,
            },
            n_steps: m.n_steps,
            snapshot_steps: self.output.snapshot_steps.clone(),
            split: SplitConfig {
                scheme: s.scheme.into(),
                sigma: s.sigma,
                iterations: s.iterations,
                err_tol: s.err_tol,
                tau: s.tau,
                inner: StepperConfig::new(s.inner_scheme.into(), s.inner_dt),
                max_fixed_point_iterations: 100,
            },
            initial_dt: m.initial_dt,
            cfl_max: m.cfl_max,
        })
    }

    pub fn build_two_phase(&self) -> TwoPhaseBenchmark {
        let t = self.two_phase.as_ref().expect("validated");
        TwoPhaseBenchmark {
            points: t.points,
            diffusion: t.diffusion,
            velocity: t.velocity,
            dx: t.dx,
            lambda1: t.lambda1,
            lambda2: t.lambda2,
            exchange: t.exchange,
            initial: None,
            tau: t.tau,
            k_max: t.k_max,
            n_steps: t.n_steps,
            inner_nodes: t.inner_nodes,
        }
    }
}
