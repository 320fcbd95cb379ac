//! Experiment configuration, read from TOML.

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::fom::{burgers_model, diffusion_model, euler_model, ParameterPoint, SemiDiscreteModel};
use crate::hyper::SamplingMethod;
use crate::integrators::{Scheme, SchemeId};
use crate::rom::{RomMethod, SnsVariant};
use crate::strom::{ResidualSource, StSnsVariant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Diffusion,
    Burgers,
    Euler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    /// Cells (Burgers, Euler) or elements per side (diffusion).
    pub size: usize,
}

impl ProblemConfig {
    pub fn build(&self) -> Result<Box<dyn SemiDiscreteModel>, BenchError> {
        let model: Box<dyn SemiDiscreteModel> = match self.kind {
            ProblemKind::Diffusion => Box::new(diffusion_model(self.size)?),
            ProblemKind::Burgers => Box::new(burgers_model(self.size)?),
            ProblemKind::Euler => Box::new(euler_model(self.size)?),
        };
        Ok(model)
    }

    pub fn n_space(&self) -> usize {
        match self.kind {
            ProblemKind::Diffusion => (self.size + 1) * (self.size + 1),
            ProblemKind::Burgers => self.size,
            ProblemKind::Euler => 3 * self.size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub final_time: f64,
    pub n_steps: usize,
    pub schemes: Vec<Scheme>,
}

impl TimeConfig {
    pub fn scheme(&self, scheme: Scheme) -> SchemeId {
        SchemeId::over(scheme, self.final_time, self.n_steps)
    }

    pub fn dt(&self) -> f64 {
        self.final_time / self.n_steps as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub points: Vec<ParameterPoint>,
    pub target: ParameterPoint,
}

/// A list of widths, or an inclusive stepped range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sweep {
    List(Vec<usize>),
    Range { start: usize, stop: usize, step: usize },
}

impl Sweep {
    pub fn values(&self) -> Vec<usize> {
        match self {
            Sweep::List(v) => v.clone(),
            Sweep::Range { start, stop, step } => (*start..=*stop).step_by((*step).max(1)).collect(),
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_sampling() -> SamplingMethod {
    SamplingMethod::GnatGreedy
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialConfig {
    pub methods: Vec<RomMethod>,
    /// Solution basis width.
    pub n_s: usize,
    /// Nonlinear-term or residual basis widths.
    pub n_basis: Sweep,
    /// Sample count for the least-squares methods; interpolating methods use `n_z = n_basis`.
    #[serde(default)]
    pub n_z: Option<usize>,
    /// Row selection for the least-squares methods.
    #[serde(default = "default_sampling")]
    pub sampling: SamplingMethod,
    /// `equal` uses `M Phi` only; `extended` switches to `M Phi_e` when the sweep is wider than `n_s`.
    #[serde(default = "default_extended")]
    pub sns_variant: SnsVariant,
    #[serde(default = "default_true")]
    pub orthogonalize: bool,
    /// Take singular vectors beyond the numerical rank instead of failing the row.
    #[serde(default)]
    pub allow_rank_deficient: bool,
}

fn default_extended() -> SnsVariant {
    SnsVariant::Extended
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StMethod {
    StLspg,
    StGnat,
    StGnatSns,
}

impl StMethod {
    pub fn name(self) -> &'static str {
        match self {
            StMethod::StLspg => "st_lspg",
            StMethod::StGnat => "st_gnat",
            StMethod::StGnatSns => "st_gnat_sns",
        }
    }
}

fn default_blocks() -> usize {
    1
}

fn default_st_iterations() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceTimeConfig {
    pub methods: Vec<StMethod>,
    /// Spatial and temporal factor widths of the solution decomposition.
    pub spatial_modes: usize,
    pub temporal_modes: usize,
    /// Space-time solution basis width.
    pub n_st: usize,
    /// Residual basis widths.
    pub n_basis: Sweep,
    pub n_z: usize,
    /// Time blocks the sample rows are spread over.
    #[serde(default = "default_blocks")]
    pub time_blocks: usize,
    pub residual_spatial_modes: usize,
    pub residual_temporal_modes: usize,
    #[serde(default)]
    pub residual_source: ResidualSource,
    #[serde(default)]
    pub sns_variant: StSnsVariant,
    #[serde(default = "default_st_iterations")]
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemConfig,
    pub time: TimeConfig,
    pub training: TrainingConfig,
    #[serde(default)]
    pub spatial: Option<SpatialConfig>,
    #[serde(default)]
    pub space_time: Option<SpaceTimeConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    /// Checks dimension chains, schemes and parameter points.
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        let n_space = self.problem.n_space();
        if self.time.n_steps == 0 || !(self.time.final_time > 0.0) {
            return bad("time.final_time and time.n_steps must be positive".into());
        }
        if self.time.schemes.is_empty() {
            return bad("time.schemes is empty".into());
        }
        if self.training.points.is_empty() {
            return bad("training.points is empty".into());
        }
        let model = self.problem.build()?;
        let domain = model.param_domain();
        for mu in self.training.points.iter().chain(std::iter::once(&self.training.target)) {
            if mu.len() != domain.dim() {
                return bad(format!("parameter {mu} has {} entries, expected {}", mu.len(), domain.dim()));
            }
            domain.check(mu).map_err(|e| BenchError::Config(e.to_string()))?;
        }
        if let Some(sp) = &self.spatial {
            let widths = sp.n_basis.values();
            if sp.n_s == 0 || sp.n_s > n_space {
                return bad(format!("spatial.n_s = {} outside 1..={n_space}", sp.n_s));
            }
            let hyper = sp.methods.iter().any(|m| m.is_hyper_reduced());
            if hyper && widths.is_empty() {
                return bad("spatial.n_basis is empty".into());
            }
            for &w in &widths {
                if hyper && (w < sp.n_s || w > n_space) {
                    return bad(format!("basis width {w} outside [{}, {n_space}]", sp.n_s));
                }
                if let Some(n_z) = sp.n_z {
                    let ls = sp.methods.iter().any(|m| matches!(m, RomMethod::Gnat | RomMethod::GnatSns));
                    if ls && (n_z < w || n_z > n_space) {
                        return bad(format!("spatial.n_z = {n_z} must lie in [{w}, {n_space}]"));
                    }
                }
                if sp.sns_variant == SnsVariant::Equal && w != sp.n_s && sp.methods.iter().any(|m| m.is_sns()) {
                    return bad(format!("the equal SNS variant needs n_basis = n_s, got {w}"));
                }
            }
            if sp.n_z.is_none() && sp.methods.iter().any(|m| matches!(m, RomMethod::Gnat | RomMethod::GnatSns)) {
                return bad("spatial.n_z is required for gnat and gnat_sns".into());
            }
        }
        if let Some(st) = &self.space_time {
            if self.time.schemes.iter().any(|&s| s != Scheme::BackwardEuler) {
                return bad("space-time models use backward Euler only".into());
            }
            if st.n_st == 0 || st.n_st > st.spatial_modes * st.temporal_modes {
                return bad(format!("space_time.n_st = {} exceeds the {} available pairs", st.n_st, st.spatial_modes * st.temporal_modes));
            }
            if st.temporal_modes > self.time.n_steps || st.spatial_modes > n_space {
                return bad("space-time factor widths exceed the snapshot dimensions".into());
            }
            let total = n_space * self.time.n_steps;
            for w in st.n_basis.values() {
                if w < st.n_st || w > st.n_z || st.n_z > total {
                    return bad(format!("space-time widths need n_st <= n_basis <= n_z <= {total}, got {} <= {w} <= {}", st.n_st, st.n_z));
                }
                let gnat = st.methods.contains(&StMethod::StGnat);
                if gnat && w > st.residual_spatial_modes * st.residual_temporal_modes {
                    return bad(format!("residual basis width {w} exceeds the residual pairs available"));
                }
                if st.methods.contains(&StMethod::StGnatSns) && w > st.spatial_modes * st.temporal_modes {
                    return bad(format!("SNS residual width {w} exceeds the solution pairs available"));
                }
            }
            if st.time_blocks == 0 || st.time_blocks > self.time.n_steps {
                return bad("space_time.time_blocks must lie in 1..=n_steps".into());
            }
        }
        Ok(())
    }
}
