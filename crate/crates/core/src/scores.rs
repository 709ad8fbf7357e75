//! Annealed score functions: the closed-form likelihood score of the masked
//! precision, the exact score of the noise-smoothed empirical prior, and the
//! denoising score-matching loss used to evaluate score estimators.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Cholesky, DMatrix};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::covsel::{PrecisionEstimate, SampleCovariance};
use crate::graph::{pair_count, pairs, AdjacencyMatrix, GraphError, HalfVector, RelaxedAdjacency};
use crate::schedule::NoiseSchedule;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("masked precision is singular even after ridge (condition estimate {condition:.3e})")]
    Singular { condition: f64 },
    #[error("no graph with {n} nodes in the prior dataset; filter or augment the dataset")]
    NoMatchingSize { n: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("noise level must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("dataset must contain at least one graph")]
    EmptyDataset,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("dataset i/o: {0}")]
    Io(String),
}

/// Lower and upper bound applied to relaxed adjacency entries before they
/// enter the masked precision.
pub const RELAXED_CLAMP: (f64, f64) = (-1.0, 2.0);

/// Relative ridge added to the masked precision when its Cholesky factor
/// fails, as a multiple of `tr(Θ̂)/n`.
pub const DEFAULT_RIDGE: f64 = 1e-4;

/// `Θ̃ = Θ̂ ∘ (Ã + I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedPrecision {
    pub theta_tilde: DMatrix<f64>,
}

impl MaskedPrecision {
    pub fn new(theta_hat: &PrecisionEstimate, a_tilde: &RelaxedAdjacency) -> Result<Self, ScoreError> {
        check_dim(theta_hat.n(), a_tilde.n())?;
        let n = theta_hat.n();
        let theta_tilde = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                theta_hat.get(i, i)
            } else {
                theta_hat.get(i, j) * a_tilde.get(i, j)
            }
        });
        Ok(MaskedPrecision { theta_tilde })
    }

    /// `(k/2)(log det Θ̃ − tr(SΘ̃))`, or `None` outside the positive-definite
    /// cone.
    pub fn log_likelihood(&self, s: &SampleCovariance, k: f64) -> Option<f64> {
        let chol = Cholesky::new(self.theta_tilde.clone())?;
        let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let trace = s.matrix().component_mul(&self.theta_tilde).sum();
        Some(0.5 * k * (logdet - trace))
    }
}

fn check_dim(expected: usize, got: usize) -> Result<(), ScoreError> {
    if expected == got {
        Ok(())
    } else {
        Err(ScoreError::DimensionMismatch { expected, got })
    }
}

/// Gradient of `(k/2)(log det Θ̃ − tr(SΘ̃))` with respect to the half-vector
/// of `Ã`, where each coordinate moves `Ã_ij` and `Ã_ji` together.
///
/// Component `(i, j)` equals `k · Θ̂_ij · (Θ̃⁻¹ − S)_ij`. Entries of `Ã` are
/// clamped to [`RELAXED_CLAMP`] first. If `Θ̃` is not positive definite a ridge
/// of `ridge · tr(Θ̂)/n` is added once before giving up.
pub fn likelihood_score(
    theta_hat: &PrecisionEstimate,
    a_tilde: &RelaxedAdjacency,
    s: &SampleCovariance,
    k: f64,
    ridge: f64,
) -> Result<HalfVector, ScoreError> {
    check_dim(theta_hat.n(), a_tilde.n())?;
    check_dim(theta_hat.n(), s.n())?;
    let mut out = vec![0.0; pair_count(a_tilde.n())];
    let all: Vec<usize> = (0..out.len()).collect();
    likelihood_score_into(theta_hat, &a_tilde.vech().0, s, k, ridge, false, &all, &mut out)?;
    Ok(HalfVector(out))
}

/// Fast path used by the sampler: reads the relaxed state as a half-vector and
/// writes only the requested components of the score into `out`.
///
/// With `shift` set, a `Θ̃` that the ridge cannot repair has its spectrum
/// shifted so that the smallest eigenvalue equals the ridge.
#[allow(clippy::too_many_arguments)]
pub(crate) fn likelihood_score_into(
    theta_hat: &PrecisionEstimate,
    state: &[f64],
    s: &SampleCovariance,
    k: f64,
    ridge: f64,
    shift: bool,
    indices: &[usize],
    out: &mut [f64],
) -> Result<(), ScoreError> {
    if k == 0.0 {
        for &p in indices {
            out[p] = 0.0;
        }
        return Ok(());
    }
    let n = theta_hat.n();
    let th = theta_hat.matrix();
    let mut tilde = th.clone();
    for (p, (i, j)) in pairs(n).enumerate() {
        let a = state[p].clamp(RELAXED_CLAMP.0, RELAXED_CLAMP.1);
        let v = th[(i, j)] * a;
        tilde[(i, j)] = v;
        tilde[(j, i)] = v;
    }
    let sigma = match Cholesky::new(tilde.clone()) {
        Some(c) => c.inverse(),
        None => {
            let delta = ridge * th.trace() / n as f64;
            let mut ridged = tilde.clone();
            for i in 0..n {
                ridged[(i, i)] += delta;
            }
            match Cholesky::new(ridged) {
                Some(c) => c.inverse(),
                None if shift && tilde.iter().all(|v| v.is_finite()) => {
                    let min_eig = tilde.clone().symmetric_eigenvalues().min();
                    let mut shifted = tilde.clone();
                    for i in 0..n {
                        shifted[(i, i)] += delta - min_eig;
                    }
                    Cholesky::new(shifted)
                        .ok_or(ScoreError::Singular {
                            condition: condition_estimate(&tilde),
                        })?
                        .inverse()
                }
                None => {
                    return Err(ScoreError::Singular {
                        condition: condition_estimate(&tilde),
                    })
                }
            }
        }
    };
    let sm = s.matrix();
    let pair_list: Vec<(usize, usize)> = pairs(n).collect();
    for &p in indices {
        let (i, j) = pair_list[p];
        out[p] = k * th[(i, j)] * (sigma[(i, j)] - sm[(i, j)]);
    }
    Ok(())
}

fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Estimate of `∇ log p_σ(ã)`, the score of the noise-smoothed prior.
///
/// Implementations are shared across sampler threads.
pub trait ScoreEstimator: Send + Sync {
    fn evaluate(&self, a_tilde: &HalfVector, sigma: f64) -> Result<HalfVector, ScoreError>;
}

/// The zero score, i.e. a flat prior.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroScore;

impl ScoreEstimator for ZeroScore {
    fn evaluate(&self, a_tilde: &HalfVector, _sigma: f64) -> Result<HalfVector, ScoreError> {
        Ok(HalfVector::zeros(a_tilde.dim()))
    }
}

/// Collection of adjacency matrices acting as samples from the prior. Node
/// counts may differ between graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphDataset {
    graphs: Vec<AdjacencyMatrix>,
}

impl GraphDataset {
    pub fn new(graphs: Vec<AdjacencyMatrix>) -> Result<Self, ScoreError> {
        if graphs.is_empty() {
            return Err(ScoreError::EmptyDataset);
        }
        Ok(GraphDataset { graphs })
    }

    pub fn graphs(&self) -> &[AdjacencyMatrix] {
        &self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn with_node_count(&self, n: usize) -> impl Iterator<Item = &AdjacencyMatrix> {
        self.graphs.iter().filter(move |g| g.n() == n)
    }

    /// Writes `graph_00000.txt`, … in edge-list format plus `manifest.txt`
    /// with one `<file> <node count>` line per graph.
    pub fn save_dir(&self, dir: &Path) -> Result<(), ScoreError> {
        let io = |e: std::io::Error| ScoreError::Io(e.to_string());
        fs::create_dir_all(dir).map_err(io)?;
        let mut manifest = BufWriter::new(fs::File::create(dir.join("manifest.txt")).map_err(io)?);
        for (idx, g) in self.graphs.iter().enumerate() {
            let name = format!("graph_{idx:05}.txt");
            let file = BufWriter::new(fs::File::create(dir.join(&name)).map_err(io)?);
            g.write_edge_list(file)?;
            writeln!(manifest, "{name} {}", g.n()).map_err(io)?;
        }
        manifest.flush().map_err(io)
    }

    pub fn load_dir(dir: &Path) -> Result<Self, ScoreError> {
        let io = |e: std::io::Error| ScoreError::Io(e.to_string());
        let manifest = BufReader::new(fs::File::open(dir.join("manifest.txt")).map_err(io)?);
        let mut graphs = Vec::new();
        for (no, line) in manifest.lines().enumerate() {
            let line = line.map_err(io)?;
            let mut parts = line.split_whitespace();
            let (Some(name), Some(count)) = (parts.next(), parts.next()) else {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(ScoreError::Io(format!("manifest line {}: `{line}`", no + 1)));
            };
            let file = BufReader::new(fs::File::open(dir.join(name)).map_err(io)?);
            let g = AdjacencyMatrix::read_edge_list(file)?;
            if count.parse::<usize>().ok() != Some(g.n()) {
                return Err(ScoreError::Io(format!(
                    "manifest node count {count} disagrees with {name} (n = {})",
                    g.n()
                )));
            }
            graphs.push(g);
        }
        Self::new(graphs)
    }
}

/// Exact score of the Gaussian mixture `p_σ(ã) = mean_i N(ã; a_i, σ²I)` over
/// the dataset graphs of matching size.
#[derive(Debug, Clone)]
pub struct EmpiricalPriorScore {
    by_dim: BTreeMap<usize, Vec<Vec<f64>>>,
}

impl EmpiricalPriorScore {
    pub fn new(dataset: &GraphDataset) -> Self {
        let mut by_dim: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
        for g in dataset.graphs() {
            by_dim.entry(pair_count(g.n())).or_default().push(g.vech().0);
        }
        EmpiricalPriorScore { by_dim }
    }

    /// Adds `relabelings` random node permutations of every dataset graph.
    pub fn with_permutation_augmentation<R: Rng + ?Sized>(
        dataset: &GraphDataset,
        relabelings: usize,
        rng: &mut R,
    ) -> Self {
        let mut graphs = dataset.graphs().to_vec();
        for g in dataset.graphs() {
            let mut perm: Vec<usize> = (0..g.n()).collect();
            for _ in 0..relabelings {
                perm.shuffle(rng);
                graphs.push(g.permuted(&perm));
            }
        }
        Self::new(&GraphDataset { graphs })
    }

    pub fn component_count(&self, n: usize) -> usize {
        self.by_dim.get(&pair_count(n)).map_or(0, Vec::len)
    }
}

impl ScoreEstimator for EmpiricalPriorScore {
    fn evaluate(&self, a_tilde: &HalfVector, sigma: f64) -> Result<HalfVector, ScoreError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(ScoreError::InvalidSigma(sigma));
        }
        let dim = a_tilde.dim();
        let comps = self.by_dim.get(&dim).ok_or_else(|| ScoreError::NoMatchingSize {
            n: crate::graph::node_count_for_dim(dim).unwrap_or(0),
        })?;
        let x = a_tilde.as_slice();
        let inv_two_var = 1.0 / (2.0 * sigma * sigma);
        let logits: Vec<f64> = comps
            .iter()
            .map(|a| {
                -inv_two_var
                    * a.iter()
                        .zip(x)
                        .map(|(ai, xi)| (ai - xi) * (ai - xi))
                        .sum::<f64>()
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut out = vec![0.0; dim];
        for (a, w) in comps.iter().zip(&weights) {
            let w = w / total;
            if w == 0.0 {
                continue;
            }
            for (o, ai) in out.iter_mut().zip(a) {
                *o += w * ai;
            }
        }
        let inv_var = 1.0 / (sigma * sigma);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = (*o - xi) * inv_var;
        }
        Ok(HalfVector(out))
    }
}

/// Convenience wrapper building the mixture on the fly.
pub fn empirical_prior_score(
    dataset: &GraphDataset,
    a_tilde: &HalfVector,
    sigma: f64,
) -> Result<HalfVector, ScoreError> {
    EmpiricalPriorScore::new(dataset).evaluate(a_tilde, sigma)
}

/// Likelihood score plus prior score, over all pairs.
pub fn posterior_score(
    theta_hat: &PrecisionEstimate,
    a_tilde: &RelaxedAdjacency,
    s: &SampleCovariance,
    k: f64,
    prior: &dyn ScoreEstimator,
    sigma: f64,
) -> Result<HalfVector, ScoreError> {
    let like = likelihood_score(theta_hat, a_tilde, s, k, DEFAULT_RIDGE)?;
    let pr = prior.evaluate(&a_tilde.vech(), sigma)?;
    check_dim(like.dim(), pr.dim())?;
    Ok(HalfVector(like.0.iter().zip(&pr.0).map(|(l, p)| l + p).collect()))
}

/// Monte-Carlo estimate of `(1/2L) Σ_l σ_l² E‖g(ã, σ_l) − (a − ã)/σ_l²‖²`
/// with `a` drawn uniformly from the dataset and `ã = a + N(0, σ_l² I)`.
pub fn denoising_loss(
    estimator: &dyn ScoreEstimator,
    dataset: &GraphDataset,
    schedule: &NoiseSchedule,
    mc_samples: usize,
    seed: u64,
) -> Result<f64, ScoreError> {
    denoising_loss_by(dataset, schedule, mc_samples, seed, |_, noisy, sigma| {
        estimator.evaluate(noisy, sigma)
    })
}

/// Same as [`denoising_loss`] for an estimator that also sees the clean
/// sample (useful for reference estimators).
pub fn denoising_loss_by<F>(
    dataset: &GraphDataset,
    schedule: &NoiseSchedule,
    mc_samples: usize,
    seed: u64,
    estimator: F,
) -> Result<f64, ScoreError>
where
    F: Fn(&HalfVector, &HalfVector, f64) -> Result<HalfVector, ScoreError>,
{
    let mc_samples = mc_samples.max(1);
    let clean: Vec<HalfVector> = dataset.graphs().iter().map(|g| g.vech()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = schedule.levels();
    let mut total = 0.0;
    for &sigma in levels {
        let mut acc = 0.0;
        for _ in 0..mc_samples {
            let a = &clean[rng.random_range(0..clean.len())];
            let noisy = HalfVector(
                a.0.iter()
                    .map(|&v| v + sigma * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            );
            let g = estimator(a, &noisy, sigma)?;
            check_dim(a.dim(), g.dim())?;
            let inv_var = 1.0 / (sigma * sigma);
            acc += g
                .0
                .iter()
                .zip(a.0.iter().zip(&noisy.0))
                .map(|(gi, (ai, xi))| {
                    let d = gi - (ai - xi) * inv_var;
                    d * d
                })
                .sum::<f64>();
        }
        total += sigma * sigma * acc / mc_samples as f64;
    }
    Ok(total / (2.0 * levels.len() as f64))
}
