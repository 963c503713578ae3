//! JSON experiment configuration and its translation into library types.
//!
//! A config is a single JSON document; unknown fields are rejected so a
//! typo cannot silently fall back to a default.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;
use wlsq::sampling::minimal_budget;
use wlsq::sparsify::SplitStrategy;
use wlsq::targets;
use wlsq::{
    BasisId, FunctionSpace, Pipeline, PipelineOptions, RngStream, SplitOptions, TargetFunction,
};

/// Stream id reserved for generating randomized targets, far away from
/// the per-trial streams 0, 1, 2, …
pub const TARGET_STREAM: u64 = u64::MAX;

fn default_target() -> TargetSpec {
    TargetSpec::Name("exp".to_string())
}

fn default_trials() -> usize {
    100
}

fn default_max_redraws() -> usize {
    1000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub space: SpaceConfig,
    /// Builtin target name or an explicit coefficient list; default "exp".
    #[serde(default = "default_target")]
    pub target: TargetSpec,
    /// Single pipeline name; mutually exclusive with `pipelines`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<String>,
    /// Several pipelines run from one config, each to its own output pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipelines: Option<Vec<String>>,
    /// Sample size: an integer or the rule "budget(epsilon)".
    pub m: MRule,
    #[serde(default)]
    pub sparsify: SparsifyConfig,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_max_redraws")]
    pub max_redraws: usize,
    /// Output basename; the --out flag overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    /// legendre, fourier, or piecewise_constant.
    pub basis: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_order: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetSpec {
    Name(String),
    Coeffs(CoeffList),
}

/// Explicit basis coefficients as `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffList {
    pub coeffs: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MRule {
    Count(usize),
    Rule(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparsifyConfig {
    /// Split search: local, randomized, or exhaustive.
    #[serde(default = "default_strategy")]
    pub strategy: String,
    /// Oversampling factor of the twice-barrier stage.
    #[serde(default = "default_c")]
    pub c: f64,
    /// Smallest Gram eigenvalue greedy removal must preserve.
    #[serde(default = "default_lambda_floor")]
    pub lambda_floor: f64,
    /// Candidate bipartitions a split search may examine.
    #[serde(default = "default_trial_budget")]
    pub trial_budget: usize,
    /// Frame-verification relaxation in (0, 1]; one means exact.
    #[serde(default = "default_theta")]
    pub theta: f64,
}

fn default_strategy() -> String {
    "local".to_string()
}

fn default_c() -> f64 {
    2.0
}

fn default_lambda_floor() -> f64 {
    0.5
}

fn default_trial_budget() -> usize {
    10_000
}

fn default_theta() -> f64 {
    1.0
}

impl Default for SparsifyConfig {
    fn default() -> Self {
        SparsifyConfig {
            strategy: default_strategy(),
            c: default_c(),
            lambda_floor: default_lambda_floor(),
            trial_budget: default_trial_budget(),
            theta: default_theta(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }

    pub fn build_space(&self) -> Result<FunctionSpace, String> {
        let basis = parse_basis(&self.space.basis)?;
        FunctionSpace::new(basis, self.space.n, self.space.quadrature_order)
            .map_err(|e| e.to_string())
    }

    pub fn resolve_m(&self) -> Result<usize, String> {
        self.m.resolve(self.space.n)
    }

    pub fn build_target(&self, space: &FunctionSpace, seed: u64) -> Result<TargetFunction, String> {
        self.target.build(space, seed)
    }

    /// Resolves the pipeline list, a command-line override winning over
    /// `pipelines` over `pipeline` over the default "conditioned".
    pub fn pipeline_list(&self, flag: Option<&str>) -> Result<Vec<Pipeline>, String> {
        if let Some(name) = flag {
            return Ok(vec![Pipeline::parse(name).map_err(|e| e.to_string())?]);
        }
        match (&self.pipeline, &self.pipelines) {
            (Some(_), Some(_)) => {
                Err("config sets both 'pipeline' and 'pipelines'; use one".to_string())
            }
            (None, Some(names)) if names.is_empty() => {
                Err("'pipelines' must not be empty".to_string())
            }
            (None, Some(names)) => names
                .iter()
                .map(|name| Pipeline::parse(name).map_err(|e| e.to_string()))
                .collect(),
            (Some(name), None) => Ok(vec![Pipeline::parse(name).map_err(|e| e.to_string())?]),
            (None, None) => Ok(vec![Pipeline::Conditioned]),
        }
    }

    pub fn pipeline_options(&self) -> Result<PipelineOptions, String> {
        let strategy = match self.sparsify.strategy.as_str() {
            "exhaustive" => SplitStrategy::Exhaustive,
            "randomized" => SplitStrategy::Randomized,
            "local" => SplitStrategy::Local,
            other => return Err(format!("unknown split strategy '{other}'")),
        };
        Ok(PipelineOptions {
            max_redraws: self.max_redraws,
            split: SplitOptions {
                strategy,
                trial_budget: self.sparsify.trial_budget,
                theta: self.sparsify.theta,
            },
            bss_c: self.sparsify.c,
            lambda_floor: self.sparsify.lambda_floor,
        })
    }
}

pub fn parse_basis(name: &str) -> Result<BasisId, String> {
    match name {
        "legendre" => Ok(BasisId::Legendre),
        "fourier" => Ok(BasisId::Fourier),
        "piecewise_constant" => Ok(BasisId::PiecewiseConstant),
        other => Err(format!(
            "unknown basis '{other}'; expected legendre, fourier, or piecewise_constant"
        )),
    }
}

impl MRule {
    pub fn resolve(&self, n: usize) -> Result<usize, String> {
        match self {
            MRule::Count(m) => Ok(*m),
            MRule::Rule(rule) => {
                let inner = rule
                    .strip_prefix("budget(")
                    .and_then(|rest| rest.strip_suffix(')'))
                    .ok_or_else(|| {
                        format!("cannot parse m = '{rule}'; use an integer or \"budget(epsilon)\"")
                    })?;
                let epsilon: f64 = inner
                    .trim()
                    .parse()
                    .map_err(|e| format!("bad epsilon in '{rule}': {e}"))?;
                minimal_budget(n, epsilon).map_err(|e| e.to_string())
            }
        }
    }
}

impl TargetSpec {
    pub fn build(&self, space: &FunctionSpace, seed: u64) -> Result<TargetFunction, String> {
        match self {
            TargetSpec::Name(name) => {
                if let Some(rest) = name.strip_prefix("monomial(") {
                    let degree: usize = rest
                        .strip_suffix(')')
                        .ok_or_else(|| format!("cannot parse target '{name}'"))?
                        .trim()
                        .parse()
                        .map_err(|e| format!("bad monomial degree in '{name}': {e}"))?;
                    return targets::monomial_target(space, degree).map_err(|e| e.to_string());
                }
                match name.as_str() {
                    "exp" => Ok(targets::exp_target(space)),
                    "step" => targets::step_target(space).map_err(|e| e.to_string()),
                    "random" => {
                        let mut rng = RngStream::new(seed, TARGET_STREAM).rng();
                        targets::random_element(space, &mut rng).map_err(|e| e.to_string())
                    }
                    "random_double" => {
                        let mut rng = RngStream::new(seed, TARGET_STREAM).rng();
                        targets::random_double_element(space, &mut rng).map_err(|e| e.to_string())
                    }
                    other => Err(format!(
                        "unknown target '{other}'; builtins are exp, step, monomial(k), \
                         random, random_double"
                    )),
                }
            }
            TargetSpec::Coeffs(list) => {
                let coeffs: Vec<Complex64> = list
                    .coeffs
                    .iter()
                    .map(|&[re, im]| Complex64::new(re, im))
                    .collect();
                targets::element_from_coeffs(space, coeffs).map_err(|e| e.to_string())
            }
        }
    }
}
