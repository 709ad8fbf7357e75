use std::fmt;
use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::metrics::default_threshold_grid;
use super::HarnessError;
use crate::generators::{dual_barabasi_albert, ergm_sample, grid_graph, ErgmSpec, GeneratorError, GridParams};
use crate::graph::{pair_count, AdjacencyMatrix};
use crate::schedule::NoiseSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphFamily {
    Grid(GridParams),
    BarabasiAlbert { n: usize, n1: usize, n2: usize, pi: f64 },
    Ergm(ErgmSpec),
}

impl GraphFamily {
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<AdjacencyMatrix, GeneratorError> {
        match self {
            GraphFamily::Grid(p) => grid_graph(rng, p),
            GraphFamily::BarabasiAlbert { n, n1, n2, pi } => dual_barabasi_albert(rng, *n, *n1, *n2, *pi),
            GraphFamily::Ergm(spec) => ergm_sample(spec, rng),
        }
    }
}

/// How many pairs are hidden per instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownPolicy {
    /// Fraction of all pairs, rounded to the nearest integer (at least 1).
    Fraction(f64),
    Count(usize),
    All,
}

impl UnknownPolicy {
    pub fn count(&self, n: usize) -> usize {
        let dim = pair_count(n);
        match *self {
            UnknownPolicy::Fraction(f) => ((f * dim as f64).round() as usize).clamp(1, dim),
            UnknownPolicy::Count(c) => c.min(dim),
            UnknownPolicy::All => dim,
        }
    }
}

/// Observation counts, either absolute or proportional to `|U|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KGrid {
    Absolute(Vec<usize>),
    PerUnknown(Vec<f64>),
}

impl KGrid {
    pub fn len(&self) -> usize {
        match self {
            KGrid::Absolute(v) => v.len(),
            KGrid::PerUnknown(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn resolve(&self, index: usize, unknown: usize) -> usize {
        match self {
            KGrid::Absolute(v) => v[index],
            KGrid::PerUnknown(v) => ((v[index] * unknown as f64).round() as usize).max(1),
        }
    }

    /// The configured value, used as the report key.
    pub fn label(&self, index: usize) -> f64 {
        match self {
            KGrid::Absolute(v) => v[index] as f64,
            KGrid::PerUnknown(v) => v[index],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "lpost")]
    LPost,
    #[serde(rename = "lpr")]
    LPr,
    #[serde(rename = "ll")]
    LL,
    #[serde(rename = "threshold")]
    Threshold,
    #[serde(rename = "wgl")]
    Wgl,
    #[serde(rename = "bgl")]
    Bgl,
    #[serde(rename = "boot_lpost")]
    BootLPost,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::LPost => "LPost",
            Method::LPr => "LPr",
            Method::LL => "LL",
            Method::Threshold => "Threshold",
            Method::Wgl => "WGL",
            Method::Bgl => "BGL",
            Method::BootLPost => "BootLPost",
        }
    }

    pub(crate) fn needs_bootstrap(self) -> bool {
        matches!(self, Method::Bgl | Method::BootLPost)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub b: usize,
    pub p_m: f64,
    pub lambda: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            b: 50,
            p_m: 0.2,
            lambda: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: GraphFamily,
    pub unknown: UnknownPolicy,
    /// Hide equally many edges and non-edges instead of uniform pairs.
    pub balanced_unknown: bool,
    pub k: KGrid,
    /// Posterior samples per instance.
    pub num_samples: usize,
    pub schedule: NoiseSchedule,
    pub methods: Vec<Method>,
    /// Instances per `k` value; must be even.
    pub instances: usize,
    pub splits: usize,
    pub threshold_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub bootstrap: BootstrapConfig,
    /// Prior graphs drawn from `family` when `prior_dir` is unset.
    pub prior_graphs: usize,
    pub prior_dir: Option<PathBuf>,
    pub prior_relabelings: usize,
    pub magnitude_range: (f64, f64),
    pub sign_flip: bool,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            family: GraphFamily::Grid(GridParams::default()),
            unknown: UnknownPolicy::Fraction(0.1),
            balanced_unknown: false,
            k: KGrid::PerUnknown(vec![2.5, 5.0]),
            num_samples: 10,
            schedule: NoiseSchedule::default(),
            methods: vec![Method::LPost, Method::LPr, Method::LL, Method::Threshold],
            instances: 100,
            splits: 10,
            threshold_grid: default_threshold_grid(),
            lambda_grid: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5],
            bootstrap: BootstrapConfig::default(),
            prior_graphs: 200,
            prior_dir: None,
            prior_relabelings: 0,
            magnitude_range: (0.5, 1.0),
            sign_flip: true,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.instances < 2 || !self.instances.is_multiple_of(2) {
            return bad("instances must be even and at least 2");
        }
        if self.splits == 0 {
            return bad("splits must be at least 1");
        }
        if self.k.is_empty() || self.methods.is_empty() || self.threshold_grid.is_empty() {
            return bad("k grid, method list and threshold grid must be non-empty");
        }
        match &self.k {
            KGrid::Absolute(v) if v.contains(&0) => return bad("k values must be positive"),
            KGrid::PerUnknown(v) if v.iter().any(|r| !(*r > 0.0)) => return bad("k ratios must be positive"),
            _ => {}
        }
        if self.methods.contains(&Method::Wgl) && self.lambda_grid.iter().any(|l| !(*l >= 0.0) || l.is_infinite()) {
            return bad("lambda grid must be finite and non-negative");
        }
        if self.methods.contains(&Method::Wgl) && self.lambda_grid.is_empty() {
            return bad("lambda grid must be non-empty");
        }
        if self.num_samples == 0 {
            return bad("num_samples must be at least 1");
        }
        if self.methods.iter().any(|m| m.needs_bootstrap()) && self.unknown != UnknownPolicy::All {
            return bad("bootstrap methods need unknown = \"all\"");
        }
        match self.unknown {
            UnknownPolicy::Fraction(f) if !(f > 0.0 && f <= 1.0) => return bad("unknown fraction must lie in (0, 1]"),
            UnknownPolicy::Count(0) => return bad("unknown count must be positive"),
            _ => {}
        }
        if self.prior_dir.is_none()
            && self.prior_graphs == 0
            && self.methods.iter().any(|m| matches!(m, Method::LPost | Method::LPr | Method::BootLPost))
        {
            return bad("prior-based methods need prior_graphs > 0 or a prior_dir");
        }
        NoiseSchedule::new(
            self.schedule.levels().to_vec(),
            self.schedule.steps_per_level(),
            self.schedule.epsilon(),
        )
        .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }
}
