//! Run configuration: a single declarative TOML file. Unknown keys are
//! rejected so that typos cannot silently corrupt a study.

use num_complex::Complex64;
use serde::Deserialize;
use spinboson::fock::{self, FockBasis};
use spinboson::gsb::{preset, ModelSpec, PresetParams};
use spinboson::modes::{Dispersion, FormFactorSpec, ModeGrid};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub truncation: TruncationConfig,
    #[serde(default)]
    pub cutoffs: CutoffConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
    pub studies: StudiesConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub preset: String,
    pub splittings: Vec<f64>,
    #[serde(default)]
    pub factors: Vec<FormFactorSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub shape: GridShape,
    pub dispersion: Dispersion,
    pub mass_floor: f64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridShape {
    Uniform { k_min: f64, k_max: f64, nodes: usize },
    Geometric { k_min: f64, k_max: f64, nodes: usize },
    Explicit { nodes: Vec<f64>, weights: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub n_max: usize,
    #[serde(default = "default_size_cap")]
    pub size_cap: usize,
}

fn default_size_cap() -> usize {
    fock::DEFAULT_STATE_CAP
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffConfig {
    /// Explicit cutoff schedule; when absent, up to `count` (default 8)
    /// cutoffs are placed at distinct inter-node midpoints.
    pub values: Option<Vec<f64>>,
    pub count: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default = "default_z0")]
    pub z0: f64,
    /// Probe points as (re, im) pairs; defaults to three real points below
    /// the spectrum plus one off-axis point.
    pub z: Option<Vec<(f64, f64)>>,
    #[serde(default = "default_vanish_s")]
    pub vanish_s: Vec<f64>,
    /// z_n = -2^n for n in this inclusive range.
    #[serde(default = "default_vanish_range")]
    pub vanish_exponents: (u32, u32),
}

fn default_z0() -> f64 {
    spinboson::resolvent::DEFAULT_Z0
}

fn default_vanish_s() -> Vec<f64> {
    vec![0.5, 1.0]
}

fn default_vanish_range() -> (u32, u32) {
    (3, 10)
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            z0: default_z0(),
            z: None,
            vanish_s: default_vanish_s(),
            vanish_exponents: default_vanish_range(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudiesConfig {
    pub run: Vec<String>,
    #[serde(default)]
    pub require_assumption: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_out_dir() -> String {
    "out".into()
}

fn default_seed() -> u64 {
    7
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            seed: default_seed(),
        }
    }
}

pub const KNOWN_STUDIES: &[&str] = &[
    "validate",
    "spectrum",
    "resolvent-check",
    "converge",
    "dress",
    "vanish",
];

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let config: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), String> {
        if self.grid.mass_floor <= 0.0 || self.grid.mass_floor.is_nan() {
            return Err("grid.mass_floor must be positive".into());
        }
        match &self.grid.shape {
            GridShape::Uniform { k_min, k_max, nodes }
            | GridShape::Geometric { k_min, k_max, nodes } => {
                if *nodes == 0 || (*nodes > 1 && k_max <= k_min) {
                    return Err("grid.shape: need nodes >= 1 and k_max > k_min".into());
                }
            }
            GridShape::Explicit { nodes, weights } => {
                if nodes.is_empty() || nodes.len() != weights.len() {
                    return Err("grid.shape: explicit nodes and weights must match".into());
                }
            }
        }
        for name in &self.studies.run {
            if !KNOWN_STUDIES.contains(&name.as_str()) {
                return Err(format!(
                    "unknown study `{name}`; known: {}",
                    KNOWN_STUDIES.join(", ")
                ));
            }
        }
        if self.studies.run.iter().any(|s| s == "dress") && self.model.preset != "van_hove" {
            return Err("the dress study requires the van_hove preset".into());
        }
        if self.probe.vanish_exponents.0 >= self.probe.vanish_exponents.1 {
            return Err("probe.vanish_exponents must be an increasing range".into());
        }
        if self.model.splittings.is_empty() {
            return Err("model.splittings must not be empty".into());
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<ModeGrid, String> {
        let g = match &self.grid.shape {
            GridShape::Uniform { k_min, k_max, nodes } => ModeGrid::uniform(
                *k_min,
                *k_max,
                *nodes,
                self.grid.dispersion,
                self.grid.mass_floor,
            ),
            GridShape::Geometric { k_min, k_max, nodes } => ModeGrid::geometric(
                *k_min,
                *k_max,
                *nodes,
                self.grid.dispersion,
                self.grid.mass_floor,
            ),
            GridShape::Explicit { nodes, weights } => ModeGrid::from_nodes(
                nodes.clone(),
                weights.clone(),
                self.grid.dispersion,
                self.grid.mass_floor,
            ),
        };
        g.map_err(|e| e.to_string())
    }

    pub fn build_basis(&self, grid: &ModeGrid) -> Result<FockBasis, String> {
        fock::build_basis_capped(grid.len(), self.truncation.n_max, self.truncation.size_cap)
            .map_err(|e| e.to_string())
    }

    pub fn build_model(&self) -> Result<ModelSpec, String> {
        let grid = self.build_grid()?;
        let basis = self.build_basis(&grid)?;
        let factors = if self.model.factors.is_empty() {
            vec![FormFactorSpec::default_case1()]
        } else {
            self.model.factors.clone()
        };
        let params = PresetParams {
            splittings: self.model.splittings.clone(),
            factors,
        };
        preset(&self.model.preset, &params, grid, basis).map_err(|e| e.to_string())
    }

    /// Cutoff schedule: explicit values when given, otherwise up to `count`
    /// midpoints of distinct inter-node gaps, so every rung truncates a
    /// strictly larger node set than the one before it.
    pub fn cutoff_schedule(&self, grid: &ModeGrid) -> Vec<f64> {
        if let Some(values) = &self.cutoffs.values {
            return values.clone();
        }
        let count = self.cutoffs.count.unwrap_or(8);
        let nodes = grid.nodes();
        if nodes.len() < 2 {
            return vec![nodes[0]];
        }
        let gaps = nodes.len() - 1;
        let take = count.min(gaps);
        (1..=take)
            .map(|i| {
                let j = i * gaps / (take + 1);
                0.5 * (nodes[j] + nodes[j + 1])
            })
            .collect()
    }

    pub fn z_set(&self) -> Vec<Complex64> {
        match &self.probe.z {
            Some(zs) => zs.iter().map(|&(re, im)| Complex64::new(re, im)).collect(),
            None => spinboson::renorm::default_z_set(),
        }
    }

    pub fn vanish_points(&self) -> Vec<Complex64> {
        let (lo, hi) = self.probe.vanish_exponents;
        (lo..=hi)
            .map(|n| Complex64::new(-(2f64.powi(n as i32)), 0.0))
            .collect()
    }
}
