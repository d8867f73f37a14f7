use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use levyflat::check::{DEFAULT_JUMP_CLOSURE_THRESHOLD, DEFAULT_PATH_THRESHOLD, DEFAULT_TANGENCY_THRESHOLD};
use levyflat::manifold::{DecomposeOptions, FlatnessOptions};
use levyflat::models::{ModelParams, DEFAULT_EPS_MIN, MODEL_NAMES};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SEED_ENV: &str = "LEVYFLAT_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    Tangency,
    JumpClosure,
    PathInvariance,
    Flatness,
    Decompose,
}

impl TestKind {
    pub const ALL: [TestKind; 5] = [
        TestKind::Tangency,
        TestKind::JumpClosure,
        TestKind::PathInvariance,
        TestKind::Flatness,
        TestKind::Decompose,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestKind::Tangency => "tangency",
            TestKind::JumpClosure => "jump-closure",
            TestKind::PathInvariance => "path-invariance",
            TestKind::Flatness => "flatness",
            TestKind::Decompose => "decompose",
        }
    }
}

/// Expands `all` and rejects unknown names; order and duplicates are irrelevant.
pub fn parse_tests(names: &[String]) -> Result<BTreeSet<TestKind>, CliError> {
    let mut out = BTreeSet::new();
    for raw in names {
        let name = raw.trim();
        if name.is_empty() {
            continue;
        }
        if name == "all" {
            out.extend(TestKind::ALL);
            continue;
        }
        match TestKind::ALL.iter().find(|t| t.name() == name) {
            Some(&t) => {
                out.insert(t);
            }
            None => {
                let known: Vec<&str> = TestKind::ALL.iter().map(|t| t.name()).collect();
                return Err(CliError::Config(format!(
                    "unknown test '{name}' in `tests`; expected one of all, {}",
                    known.join(", ")
                )));
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub radius: f64,
    pub n_samples: usize,
    /// Singular-value cutoff of the subspace intersection.
    pub tol: f64,
    pub eps_min: f64,
    /// Jump sizes per coordinate in the jump-closure test.
    pub jump_sizes: usize,
    /// Overrides the model's declared decomposition extent.
    pub decompose_extent: Option<f64>,
    pub shifts_per_axis: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        let flat = FlatnessOptions::default();
        Self {
            dt: 1e-3,
            horizon: 1.0,
            n_paths: 100,
            radius: flat.radius,
            n_samples: flat.n_samples,
            tol: flat.tol,
            eps_min: DEFAULT_EPS_MIN,
            jump_sizes: 20,
            decompose_extent: None,
            shifts_per_axis: DecomposeOptions::default().shifts_per_axis,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub tangency: f64,
    pub jump_closure: f64,
    pub path: f64,
    pub decompose: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            tangency: DEFAULT_TANGENCY_THRESHOLD,
            jump_closure: DEFAULT_JUMP_CLOSURE_THRESHOLD,
            path: DEFAULT_PATH_THRESHOLD,
            decompose: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<String>,
    pub tests: Vec<String>,
    pub seed: Option<u64>,
    pub output: PathBuf,
    pub numerics: Numerics,
    pub thresholds: Thresholds,
    pub params: ModelParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: None,
            tests: vec!["all".into()],
            seed: None,
            output: PathBuf::from("levyflat-out"),
            numerics: Numerics::default(),
            thresholds: Thresholds::default(),
            params: ModelParams::default(),
        }
    }
}

/// Reads a config file: JSON for a `.json` extension, TOML otherwise.
pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Where the seed came from, echoed into the report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedSource {
    Flag,
    ConfigFile,
    Environment,
    Default,
}

pub struct SeedResolution {
    pub seed: u64,
    pub source: SeedSource,
    /// Raw value of the environment variable, whether used or not.
    pub env_value: Option<String>,
}

pub fn resolve_seed(flag: Option<u64>, file: Option<u64>, env_value: Option<String>) -> Result<SeedResolution, CliError> {
    let (seed, source) = if let Some(s) = flag {
        (s, SeedSource::Flag)
    } else if let Some(s) = file {
        (s, SeedSource::ConfigFile)
    } else if let Some(raw) = &env_value {
        let s = raw
            .trim()
            .parse::<u64>()
            .map_err(|_| CliError::Config(format!("{SEED_ENV}='{raw}' is not an unsigned integer")))?;
        (s, SeedSource::Environment)
    } else {
        (0, SeedSource::Default)
    };
    Ok(SeedResolution { seed, source, env_value })
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("`{name}` must be positive and finite, got {v}")))
    }
}

fn at_least_one(name: &str, v: usize) -> Result<(), CliError> {
    if v >= 1 {
        Ok(())
    } else {
        Err(CliError::Config(format!("`{name}` must be at least 1")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        match &self.model {
            None => {
                return Err(CliError::Config(format!(
                    "no model selected; pass --model or set `model` to one of {}",
                    MODEL_NAMES.join(", ")
                )))
            }
            Some(m) if !MODEL_NAMES.contains(&m.as_str()) => {
                return Err(CliError::Config(format!(
                    "unknown model '{m}'; expected one of {}",
                    MODEL_NAMES.join(", ")
                )))
            }
            Some(_) => {}
        }
        parse_tests(&self.tests)?;
        let n = &self.numerics;
        positive("numerics.dt", n.dt)?;
        positive("numerics.horizon", n.horizon)?;
        at_least_one("numerics.n_paths", n.n_paths)?;
        positive("numerics.radius", n.radius)?;
        at_least_one("numerics.n_samples", n.n_samples)?;
        positive("numerics.tol", n.tol)?;
        positive("numerics.eps_min", n.eps_min)?;
        at_least_one("numerics.jump_sizes", n.jump_sizes)?;
        at_least_one("numerics.shifts_per_axis", n.shifts_per_axis)?;
        if let Some(e) = n.decompose_extent {
            positive("numerics.decompose_extent", e)?;
        }
        if n.dt > n.horizon {
            return Err(CliError::Config("`numerics.dt` exceeds `numerics.horizon`".into()));
        }
        let t = &self.thresholds;
        positive("thresholds.tangency", t.tangency)?;
        positive("thresholds.jump_closure", t.jump_closure)?;
        positive("thresholds.path", t.path)?;
        positive("thresholds.decompose", t.decompose)?;
        positive("params.sine_lambda", self.params.sine_lambda)?;
        Ok(())
    }
}
