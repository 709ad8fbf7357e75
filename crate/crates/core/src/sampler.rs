//! Annealed Langevin sampling of the unknown adjacency entries.
//!
//! The chain state is the half-vector of the relaxed adjacency. Observed
//! coordinates are pinned to their known values; each unknown coordinate gets
//! its own Gaussian increment, so the relaxed matrix stays exactly symmetric
//! and hollow throughout. The state is carried over from one noise level to
//! the next.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covsel::{PrecisionEstimate, SampleCovariance};
use crate::graph::{pair_count, pairs, AdjacencyMatrix, HalfVector, MaskPartition, RelaxedAdjacency};
use crate::schedule::NoiseSchedule;
use crate::scores::{
    likelihood_score_into, GraphDataset, MaskedPrecision, ScoreError, ScoreEstimator, DEFAULT_RIDGE, RELAXED_CLAMP,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("score evaluation failed at level {level}, step {step}: {source}")]
    Score {
        level: usize,
        step: usize,
        #[source]
        source: ScoreError,
    },
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch between problem inputs")]
    DimensionMismatch,
    #[error("{count} unknown entries exceed the enumeration limit of {max}")]
    TooManyUnknown { count: usize, max: usize },
    #[error("every completion yields a singular masked precision")]
    AllSingular,
}

/// Maximum number of unknown pairs accepted by [`exact_posterior_oracle`].
pub const ORACLE_MAX_UNKNOWN: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub schedule: NoiseSchedule,
    /// Number of posterior samples `M`.
    pub num_samples: usize,
    pub seed: u64,
    /// Threshold applied to the sample mean.
    pub tau: f64,
    pub init_mean: f64,
    pub init_std: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            schedule: NoiseSchedule::default(),
            num_samples: 10,
            seed: 0,
            tau: 0.5,
            init_mean: 0.5,
            // N(0.5, 0.5 I) read as a covariance
            init_std: 0.5f64.sqrt(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.num_samples == 0 {
            return Err(SamplerError::InvalidConfig("num_samples must be >= 1".into()));
        }
        check_tau(self.tau)?;
        if !(self.init_std.is_finite() && self.init_std >= 0.0 && self.init_mean.is_finite()) {
            return Err(SamplerError::InvalidConfig("invalid initialization".into()));
        }
        Ok(())
    }
}

fn check_tau(tau: f64) -> Result<(), SamplerError> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(SamplerError::InvalidConfig(format!("tau must lie in (0, 1], got {tau}")))
    }
}

/// Everything the chain needs besides the schedule and the randomness.
///
/// A likelihood weight `k = 0` drops the likelihood term (prior-only
/// sampling); a [`crate::scores::ZeroScore`] prior gives likelihood-only
/// sampling.
#[derive(Clone, Copy)]
pub struct LangevinProblem<'a> {
    pub theta_hat: &'a PrecisionEstimate,
    pub a_obs: &'a AdjacencyMatrix,
    pub mask: &'a MaskPartition,
    pub s: &'a SampleCovariance,
    pub k: f64,
    pub prior: &'a dyn ScoreEstimator,
    pub ridge: f64,
    /// Shift the spectrum of an indefinite `Θ̃` instead of failing the chain
    /// when the ridge is not enough.
    pub shift_indefinite: bool,
}

impl<'a> LangevinProblem<'a> {
    pub fn new(
        theta_hat: &'a PrecisionEstimate,
        a_obs: &'a AdjacencyMatrix,
        mask: &'a MaskPartition,
        s: &'a SampleCovariance,
        k: f64,
        prior: &'a dyn ScoreEstimator,
    ) -> Result<Self, SamplerError> {
        let n = theta_hat.n();
        if a_obs.n() != n || mask.n() != n || s.n() != n {
            return Err(SamplerError::DimensionMismatch);
        }
        if !(k.is_finite() && k >= 0.0) {
            return Err(SamplerError::InvalidConfig(format!("invalid sample count {k}")));
        }
        Ok(LangevinProblem {
            theta_hat,
            a_obs,
            mask,
            s,
            k,
            prior,
            ridge: DEFAULT_RIDGE,
            shift_indefinite: true,
        })
    }

    pub fn n(&self) -> usize {
        self.theta_hat.n()
    }
}

/// Runs one annealed Langevin chain and returns the relaxed final state as a
/// half-vector (observed coordinates equal to `a_obs`). Unknown coordinates
/// are kept inside [`RELAXED_CLAMP`] after every update.
pub fn run_chain<R: Rng + ?Sized>(
    problem: &LangevinProblem<'_>,
    schedule: &NoiseSchedule,
    init_mean: f64,
    init_std: f64,
    rng: &mut R,
) -> Result<HalfVector, SamplerError> {
    let unknown = problem.mask.unknown_indices();
    let mut state = problem.a_obs.vech();
    if unknown.is_empty() {
        return Ok(state);
    }
    for &p in &unknown {
        state.0[p] = init_mean + init_std * rng.sample::<f64, _>(StandardNormal);
    }
    let mut like = vec![0.0; pair_count(problem.n())];
    for (level, &sigma) in schedule.levels().iter().enumerate() {
        let alpha = schedule.step_size(level);
        let noise_scale = (2.0 * alpha).sqrt();
        for step in 0..schedule.steps_per_level() {
            let wrap = |source| SamplerError::Score { level, step, source };
            likelihood_score_into(
                problem.theta_hat,
                &state.0,
                problem.s,
                problem.k,
                problem.ridge,
                problem.shift_indefinite,
                &unknown,
                &mut like,
            )
            .map_err(wrap)?;
            let prior = problem.prior.evaluate(&state, sigma).map_err(wrap)?;
            if prior.dim() != state.dim() {
                return Err(wrap(ScoreError::DimensionMismatch {
                    expected: state.dim(),
                    got: prior.dim(),
                }));
            }
            for &p in &unknown {
                let z: f64 = rng.sample(StandardNormal);
                let next = state.0[p] + alpha * (like[p] + prior.0[p]) + noise_scale * z;
                state.0[p] = next.clamp(RELAXED_CLAMP.0, RELAXED_CLAMP.1);
            }
        }
    }
    Ok(state)
}

/// One posterior sample: a full chain followed by the projection
/// `1[Ã >= 0.5]` on the unknown entries. Observed entries are copied from
/// `a_obs`.
pub fn sample_one<R: Rng + ?Sized>(
    problem: &LangevinProblem<'_>,
    schedule: &NoiseSchedule,
    init_mean: f64,
    init_std: f64,
    rng: &mut R,
) -> Result<AdjacencyMatrix, SamplerError> {
    let state = run_chain(problem, schedule, init_mean, init_std, rng)?;
    let n = problem.n();
    let mut out = problem.a_obs.clone();
    for ((i, j), (&x, &observed)) in pairs(n).zip(state.0.iter().zip(problem.mask.observed_flags())) {
        if !observed {
            out.set_edge(i, j, x >= 0.5);
        }
    }
    Ok(out)
}

/// Independent random stream for sample `index`, attempt `attempt`.
pub fn sample_rng(seed: u64, index: usize, attempt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((index as u64) << 1) | (attempt & 1));
    rng
}

/// The `M` binary samples and their entry-wise mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    samples: Vec<AdjacencyMatrix>,
    mean: RelaxedAdjacency,
}

impl PosteriorSamples {
    pub fn new(samples: Vec<AdjacencyMatrix>) -> Result<Self, SamplerError> {
        let first = samples
            .first()
            .ok_or_else(|| SamplerError::InvalidConfig("need at least one sample".into()))?;
        let n = first.n();
        if samples.iter().any(|s| s.n() != n) {
            return Err(SamplerError::DimensionMismatch);
        }
        let mut mean = RelaxedAdjacency::zeros(n);
        let m = samples.len() as f64;
        for (i, j) in pairs(n) {
            let count = samples.iter().filter(|s| s.has_edge(i, j)).count();
            mean.set(i, j, count as f64 / m);
        }
        Ok(PosteriorSamples { samples, mean })
    }

    pub fn samples(&self) -> &[AdjacencyMatrix] {
        &self.samples
    }

    pub fn mean(&self) -> &RelaxedAdjacency {
        &self.mean
    }
}

/// Draws `config.num_samples` samples in parallel. Sample `m` uses
/// [`sample_rng`]`(seed, m, 0)`; a failed chain is retried once from a fresh
/// initialization on stream `(seed, m, 1)`.
pub fn draw_samples(
    problem: &LangevinProblem<'_>,
    config: &SamplerConfig,
) -> Result<PosteriorSamples, SamplerError> {
    config.validate()?;
    let samples = (0..config.num_samples)
        .into_par_iter()
        .map(|m| {
            let run = |attempt| {
                let mut rng = sample_rng(config.seed, m, attempt);
                sample_one(problem, &config.schedule, config.init_mean, config.init_std, &mut rng)
            };
            run(0).or_else(|e| {
                log::debug!("sample {m} failed ({e}); retrying with a fresh initialization");
                run(1)
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    PosteriorSamples::new(samples)
}

/// `1[mean >= τ]`. Observed entries are identical in every sample, so their
/// mean is exactly 0 or 1 and they pass through unchanged.
pub fn estimate(samples: &PosteriorSamples, tau: f64) -> Result<AdjacencyMatrix, SamplerError> {
    check_tau(tau)?;
    let mean = samples.mean();
    let n = mean.n();
    let mut out = AdjacencyMatrix::empty(n);
    for (i, j) in pairs(n) {
        out.set_edge(i, j, mean.get(i, j) >= tau);
    }
    Ok(out)
}

/// Exact distribution over the `2^|U|` completions of the unknown entries.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternDistribution {
    /// Unknown pairs; bit `b` of a pattern code is the value of `unknown[b]`.
    pub unknown: Vec<(usize, usize)>,
    pub probabilities: Vec<f64>,
}

impl PatternDistribution {
    pub fn code_of(&self, a: &AdjacencyMatrix) -> usize {
        self.unknown
            .iter()
            .enumerate()
            .filter(|(_, &(i, j))| a.has_edge(i, j))
            .fold(0, |code, (b, _)| code | (1 << b))
    }

    pub fn completion(&self, a_obs: &AdjacencyMatrix, code: usize) -> AdjacencyMatrix {
        let mut a = a_obs.clone();
        for (b, &(i, j)) in self.unknown.iter().enumerate() {
            a.set_edge(i, j, (code >> b) & 1 == 1);
        }
        a
    }

    /// Relative frequency of each pattern among `samples`.
    pub fn frequencies(&self, samples: &[AdjacencyMatrix]) -> Vec<f64> {
        let mut freq = vec![0.0; self.probabilities.len()];
        for s in samples {
            freq[self.code_of(s)] += 1.0;
        }
        let m = samples.len().max(1) as f64;
        freq.iter_mut().for_each(|f| *f /= m);
        freq
    }

    pub fn total_variation(&self, frequencies: &[f64]) -> f64 {
        0.5 * self
            .probabilities
            .iter()
            .zip(frequencies)
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>()
    }
}

/// Brute-force approximate posterior: each completion `A` of the unknown
/// entries gets weight `L_X(Θ̂ ∘ (A + I)) · p̂(A)`, where `p̂` is the empirical
/// frequency of the unknown part among same-size dataset graphs that agree
/// with `a_obs` on the observed pairs (uniform when none agree). A likelihood
/// weight `k = 0` drops the likelihood.
pub fn exact_posterior_oracle(
    theta_hat: &PrecisionEstimate,
    a_obs: &AdjacencyMatrix,
    mask: &MaskPartition,
    s: &SampleCovariance,
    k: f64,
    dataset: &GraphDataset,
) -> Result<PatternDistribution, SamplerError> {
    let n = theta_hat.n();
    if a_obs.n() != n || mask.n() != n || s.n() != n {
        return Err(SamplerError::DimensionMismatch);
    }
    let unknown = mask.unknown_pairs();
    if unknown.len() > ORACLE_MAX_UNKNOWN {
        return Err(SamplerError::TooManyUnknown {
            count: unknown.len(),
            max: ORACLE_MAX_UNKNOWN,
        });
    }
    let observed = mask.observed_pairs();
    let mut dist = PatternDistribution {
        unknown,
        probabilities: vec![0.0; 1 << mask.unknown_count()],
    };

    let mut counts = vec![0usize; dist.probabilities.len()];
    let mut matching = 0usize;
    for g in dataset.with_node_count(n) {
        if observed.iter().all(|&(i, j)| g.has_edge(i, j) == a_obs.has_edge(i, j)) {
            counts[dist.code_of(g)] += 1;
            matching += 1;
        }
    }

    let log_weights: Vec<f64> = (0..dist.probabilities.len())
        .map(|code| {
            let log_prior = if matching == 0 {
                0.0
            } else if counts[code] == 0 {
                return f64::NEG_INFINITY;
            } else {
                (counts[code] as f64 / matching as f64).ln()
            };
            if k == 0.0 {
                return log_prior;
            }
            let a = dist.completion(a_obs, code).to_relaxed();
            match MaskedPrecision::new(theta_hat, &a)
                .ok()
                .and_then(|m| m.log_likelihood(s, k))
            {
                Some(ll) => ll + log_prior,
                None => f64::NEG_INFINITY,
            }
        })
        .collect();
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(SamplerError::AllSingular);
    }
    let total: f64 = log_weights.iter().map(|l| (l - max).exp()).sum();
    for (p, l) in dist.probabilities.iter_mut().zip(&log_weights) {
        *p = (l - max).exp() / total;
    }
    Ok(dist)
}
