//! Experiment configuration: JSON schema, validation into library types and
//! the built-in presets.

use juryopt_core::audit::AuditGrid;
use juryopt_core::competence::{CompetenceFunction, Density};
use juryopt_core::multi::{CompetenceVector, IndependentIssueDistribution, VoterTypeDistribution};
use juryopt_core::partition::CostModel;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Uniform { a: f64, b: f64 },
    Grid { knots: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessSpec {
    Max,
    UniformMean,
    NoisyMax { weights: Vec<f64> },
    Tabulated { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    Fixed { c0: f64 },
    Polynomial { q1: f64, q2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoterTypeSpec {
    pub weight: f64,
    pub mass: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSpec {
    pub tail_l: [u64; 2],
    pub tail_p: Vec<f64>,
    pub central_l: [u64; 2],
    pub r_bounds_l: [u64; 2],
    pub r_bounds_p: Vec<f64>,
}

impl Default for AuditSpec {
    fn default() -> Self {
        let g = AuditGrid::default();
        AuditSpec {
            tail_l: [g.tail_l.0, g.tail_l.1],
            tail_p: g.tail_p,
            central_l: [g.central_l.0, g.central_l.1],
            r_bounds_l: [g.r_bounds_l.0, g.r_bounds_l.1],
            r_bounds_p: g.r_bounds_p,
        }
    }
}

/// One experiment. Fields a command does not use are ignored by it; fields
/// it needs but that are absent produce a field-level error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<ProcessSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_range: Option<[u64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_range: Option<[u64; 2]>,
    /// Group sizes evaluated individually by `house`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_values: Option<Vec<u64>>,
    /// Representative counts evaluated individually by `house`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_values: Option<Vec<u64>>,
    /// Upper competence bounds scanned by `optk`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_grid: Option<Vec<f64>>,
    /// Reference optimum to compare against; a mismatch is flagged in the
    /// summary, not treated as an error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_k_opt: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voter_types: Option<Vec<VoterTypeSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub independent: Option<Vec<DistributionSpec>>,
    /// Group size whose `ρ(K)` drives the joint-majority curve of `multi`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve_k: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: u64,
}

fn default_samples() -> u64 {
    100_000
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: None,
            distribution: None,
            process: None,
            cost: None,
            k_range: None,
            l_range: None,
            k_values: None,
            l_values: None,
            b_grid: None,
            reference_k_opt: None,
            d: None,
            voter_types: None,
            independent: None,
            curve_k: None,
            audit: None,
            seed: 0,
            samples: default_samples(),
        }
    }
}

fn field_error(field: &str, err: impl std::fmt::Display) -> CliError {
    CliError::Config { field: field.to_string(), message: err.to_string() }
}

fn missing(field: &str) -> CliError {
    field_error(field, "required by this command")
}

impl DistributionSpec {
    pub fn density(&self) -> juryopt_core::Result<Density> {
        match self {
            DistributionSpec::Uniform { a, b } => Density::uniform(*a, *b),
            DistributionSpec::Grid { knots, values } => Density::grid(knots.clone(), values.clone()),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| field_error("config", e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn n(&self) -> Result<u64> {
        match self.n {
            Some(0) => Err(field_error("n", "must be positive")),
            Some(n) => Ok(n),
            None => Err(missing("n")),
        }
    }

    pub fn density(&self) -> Result<Density> {
        self.distribution
            .as_ref()
            .ok_or_else(|| missing("distribution"))?
            .density()
            .map_err(|e| field_error("distribution", e))
    }

    /// Competence function built from `process` and `distribution`.
    pub fn competence(&self) -> Result<CompetenceFunction> {
        self.competence_with(self.distribution.as_ref())
    }

    pub fn competence_with(&self, dist: Option<&DistributionSpec>) -> Result<CompetenceFunction> {
        let process = self.process.as_ref().ok_or_else(|| missing("process"))?;
        if let ProcessSpec::Tabulated { values } = process {
            return CompetenceFunction::tabulated(values.clone()).map_err(|e| field_error("process.values", e));
        }
        let dist = dist.ok_or_else(|| missing("distribution"))?;
        let built = match (process, dist) {
            (ProcessSpec::Max, DistributionSpec::Uniform { a, b }) => CompetenceFunction::max_uniform(*a, *b),
            (ProcessSpec::Max, grid) => grid.density().map(CompetenceFunction::max_general),
            (ProcessSpec::UniformMean, DistributionSpec::Uniform { a, b }) => {
                CompetenceFunction::uniform_mean(*a, *b)
            }
            (ProcessSpec::UniformMean, grid) => {
                grid.density().and_then(|d| CompetenceFunction::tabulated(vec![d.mean()]))
            }
            (ProcessSpec::NoisyMax { weights }, DistributionSpec::Uniform { a, b }) => {
                CompetenceFunction::noisy_max_uniform(*a, *b, weights.clone())
            }
            (ProcessSpec::NoisyMax { .. }, DistributionSpec::Grid { .. }) => {
                return Err(field_error("process", "noisy_max needs a uniform distribution"));
            }
            (ProcessSpec::Tabulated { .. }, _) => unreachable!("handled above"),
        };
        built.map_err(|e| field_error("distribution", e))
    }

    pub fn cost_model(&self) -> Result<CostModel> {
        match self.cost.unwrap_or(CostSpec::Fixed { c0: 0.0 }) {
            CostSpec::Fixed { c0 } => CostModel::fixed(c0),
            CostSpec::Polynomial { q1, q2 } => CostModel::polynomial(q1, q2),
        }
        .map_err(|e| field_error("cost", e))
    }

    fn range(&self, field: &str, r: Option<[u64; 2]>, n: Option<u64>) -> Result<Option<(u64, u64)>> {
        let Some([lo, hi]) = r else {
            return Ok(None);
        };
        if lo == 0 || lo > hi {
            return Err(field_error(field, format!("need 1 ≤ start ≤ end, got [{lo}, {hi}]")));
        }
        if let Some(n) = n {
            if hi > n {
                return Err(field_error(field, format!("end {hi} exceeds n = {n}")));
            }
        }
        Ok(Some((lo, hi)))
    }

    pub fn k_range(&self, n: Option<u64>) -> Result<Option<(u64, u64)>> {
        self.range("k_range", self.k_range, n)
    }

    pub fn l_range(&self, n: Option<u64>) -> Result<Option<(u64, u64)>> {
        self.range("l_range", self.l_range, n)
    }

    pub fn voter_types(&self) -> Result<Option<VoterTypeDistribution>> {
        let Some(specs) = &self.voter_types else {
            return Ok(None);
        };
        let types = specs
            .iter()
            .enumerate()
            .map(|(i, t)| {
                CompetenceVector::from_mass(t.mass.clone())
                    .map(|v| (t.weight, v))
                    .map_err(|e| field_error(&format!("voter_types[{i}].mass"), e))
            })
            .collect::<Result<Vec<_>>>()?;
        let f = VoterTypeDistribution::new(types).map_err(|e| field_error("voter_types", e))?;
        if let Some(d) = self.d {
            if d != f.d() {
                return Err(field_error("d", format!("voter types have {} issues, d = {d}", f.d())));
            }
        }
        Ok(Some(f))
    }

    pub fn independent(&self) -> Result<Option<IndependentIssueDistribution>> {
        let Some(specs) = &self.independent else {
            return Ok(None);
        };
        let dens = specs
            .iter()
            .enumerate()
            .map(|(i, s)| s.density().map_err(|e| field_error(&format!("independent[{i}]"), e)))
            .collect::<Result<Vec<_>>>()?;
        if let Some(d) = self.d {
            if d != dens.len() {
                return Err(field_error("d", format!("{} issue densities given, d = {d}", dens.len())));
            }
        }
        IndependentIssueDistribution::new(dens)
            .map(Some)
            .map_err(|e| field_error("independent", e))
    }

    pub fn audit_grid(&self) -> Result<AuditGrid> {
        let grid = self.audit.clone().unwrap_or_default();
        for (field, [lo, hi]) in [
            ("audit.tail_l", grid.tail_l),
            ("audit.central_l", grid.central_l),
            ("audit.r_bounds_l", grid.r_bounds_l),
        ] {
            if lo < 2 || lo > hi {
                return Err(field_error(field, format!("need 2 ≤ start ≤ end, got [{lo}, {hi}]")));
            }
        }
        if let Some(p) = grid.tail_p.iter().find(|p| !(**p > 0.5 && **p <= 1.0)) {
            return Err(field_error("audit.tail_p", format!("{p} outside (1/2, 1]")));
        }
        if let Some(p) = grid.r_bounds_p.iter().find(|p| !(**p > 0.5 && **p < 1.0)) {
            return Err(field_error("audit.r_bounds_p", format!("{p} outside (1/2, 1)")));
        }
        Ok(AuditGrid {
            tail_l: (grid.tail_l[0], grid.tail_l[1]),
            tail_p: grid.tail_p,
            central_l: (grid.central_l[0], grid.central_l[1]),
            r_bounds_l: (grid.r_bounds_l[0], grid.r_bounds_l[1]),
            r_bounds_p: grid.r_bounds_p,
        })
    }
}

pub const PRESET_NAMES: [&str; 8] =
    ["tradeoff", "house", "optk", "polynomial", "audit", "example4", "example6", "independent2"];

fn uniform(a: f64, b: f64) -> Option<DistributionSpec> {
    Some(DistributionSpec::Uniform { a, b })
}

fn ninths(v: [f64; 4]) -> Vec<f64> {
    v.iter().map(|x| x / 9.0).collect()
}

/// A built-in experiment.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let base = ExperimentConfig::default();
    let cfg = match name {
        "tradeoff" => ExperimentConfig {
            n: Some(2000),
            distribution: uniform(0.44, 0.55),
            process: Some(ProcessSpec::Max),
            cost: Some(CostSpec::Fixed { c0: 0.0 }),
            k_range: Some([1, 100]),
            reference_k_opt: Some(8),
            ..base
        },
        "house" => ExperimentConfig {
            n: Some(235_000_000),
            distribution: uniform(0.45, 0.52),
            process: Some(ProcessSpec::Max),
            cost: Some(CostSpec::Fixed { c0: 0.0 }),
            k_range: Some([1, 200]),
            k_values: Some(vec![1, 3, 9]),
            l_values: Some(vec![2175, 870, 435]),
            reference_k_opt: Some(9),
            ..base
        },
        "optk" => ExperimentConfig {
            n: Some(235_000_000),
            distribution: uniform(0.45, 0.52),
            process: Some(ProcessSpec::Max),
            k_range: Some([1, 200]),
            b_grid: Some(vec![
                0.501, 0.505, 0.51, 0.52, 0.53, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0,
            ]),
            ..base
        },
        "polynomial" => ExperimentConfig {
            n: Some(4096),
            distribution: uniform(0.45, 0.9),
            process: Some(ProcessSpec::Max),
            cost: Some(CostSpec::Polynomial { q1: 1.0, q2: 1.0 }),
            l_range: Some([1, 4096]),
            ..base
        },
        "audit" => ExperimentConfig { audit: Some(AuditSpec::default()), ..base },
        "example4" | "example6" => {
            let second = if name == "example4" { [1.0, 1.0, 4.0, 3.0] } else { [2.0, 1.0, 4.0, 2.0] };
            ExperimentConfig {
                d: Some(2),
                voter_types: Some(vec![
                    VoterTypeSpec { weight: 0.5, mass: ninths([2.0, 4.0, 1.0, 2.0]) },
                    VoterTypeSpec { weight: 0.5, mass: ninths(second) },
                ]),
                k_range: Some([1, 8]),
                l_range: Some([1, 25]),
                curve_k: Some(2),
                ..base
            }
        }
        "independent2" => ExperimentConfig {
            d: Some(2),
            independent: Some(vec![
                DistributionSpec::Uniform { a: 0.51, b: 0.99 },
                DistributionSpec::Uniform { a: 0.51, b: 0.99 },
            ]),
            k_range: Some([1, 16]),
            l_range: Some([1, 25]),
            seed: 1,
            samples: 20_000,
            ..base
        },
        other => {
            return Err(field_error(
                "preset",
                format!("unknown preset {other:?}; expected one of {}", PRESET_NAMES.join(", ")),
            ))
        }
    };
    Ok(cfg)
}
