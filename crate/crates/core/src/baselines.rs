//! Comparison estimators: thresholded precision, weighted graphical lasso on
//! the unknown pairs, and bootstrap edge fixing for the fully unknown case.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covsel::{
    sample_covariance, weighted_glasso, CovselError, ObservationSet, PenaltyMatrix, PrecisionEstimate,
    SampleCovariance, SolverOptions,
};
use crate::graph::{pairs, AdjacencyMatrix, MaskPartition, RelaxedAdjacency};
use crate::sampler::sample_rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("lambda curve design is rank deficient ({distinct} distinct k values)")]
    RankDeficient { distinct: usize },
    #[error("all {attempted} bootstrap resamples failed: {last}")]
    BootstrapFailed { attempted: usize, last: CovselError },
    #[error(transparent)]
    Covsel(#[from] CovselError),
}

/// Off-diagonal indicator of `|Θ̂_ij| ≥ t`. Entries the estimate was
/// constrained to zero stay absent, also for `t = 0`.
pub fn threshold_baseline(theta_hat: &PrecisionEstimate, t: f64) -> Result<AdjacencyMatrix, BaselineError> {
    if !(t >= 0.0) {
        return Err(BaselineError::InvalidParameter(format!("threshold {t} must be >= 0")));
    }
    let n = theta_hat.n();
    let mut a = AdjacencyMatrix::empty(n);
    for (i, j) in pairs(n) {
        if !theta_hat.is_constrained_zero(i, j) && theta_hat.get(i, j).abs() >= t {
            a.set_edge(i, j, true);
        }
    }
    Ok(a)
}

/// Penalty used by the weighted lasso baseline: `λ` on unknown pairs, a hard
/// zero on observed non-edges and no penalty on observed edges.
pub fn wgl_penalty(a_obs: &AdjacencyMatrix, mask: &MaskPartition, lambda: f64) -> Result<PenaltyMatrix, BaselineError> {
    if !(lambda >= 0.0) || lambda.is_infinite() {
        return Err(BaselineError::InvalidParameter(format!("lambda {lambda} must be finite and >= 0")));
    }
    let n = mask.n();
    if a_obs.n() != n {
        return Err(BaselineError::InvalidParameter("dimension mismatch".into()));
    }
    let mut p = PenaltyMatrix::zeros(n);
    for (i, j) in pairs(n) {
        if !mask.is_observed(i, j) {
            p.set(i, j, lambda)?;
        } else if !a_obs.has_edge(i, j) {
            p.hard_zero(i, j)?;
        }
    }
    Ok(p)
}

pub fn wgl_estimate(
    s: &SampleCovariance,
    a_obs: &AdjacencyMatrix,
    mask: &MaskPartition,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<PrecisionEstimate, BaselineError> {
    let p = wgl_penalty(a_obs, mask, lambda)?;
    Ok(weighted_glasso(s, &p, opts)?)
}

/// Support of the weighted lasso estimate.
pub fn wgl_baseline(
    s: &SampleCovariance,
    a_obs: &AdjacencyMatrix,
    mask: &MaskPartition,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<AdjacencyMatrix, BaselineError> {
    Ok(wgl_estimate(s, a_obs, mask, lambda, opts)?.support())
}

/// `λ(k) = a ln²k + b ln k + c`, clipped at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaCurve {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl LambdaCurve {
    pub fn eval(&self, k: f64) -> f64 {
        let l = k.ln();
        (self.a * l * l + self.b * l + self.c).max(0.0)
    }
}

/// Least-squares fit of a [`LambdaCurve`] through `(k, λ*)` points.
pub fn fit_lambda_curve(points: &[(f64, f64)]) -> Result<LambdaCurve, BaselineError> {
    if points.iter().any(|&(k, l)| !(k > 0.0 && k.is_finite() && l.is_finite())) {
        return Err(BaselineError::InvalidParameter("k must be positive and values finite".into()));
    }
    let mut ks: Vec<f64> = points.iter().map(|p| p.0).collect();
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    if ks.len() < 3 {
        return Err(BaselineError::RankDeficient { distinct: ks.len() });
    }
    let m = points.len();
    let design = DMatrix::from_fn(m, 3, |r, c| {
        let l = points[r].0.ln();
        match c {
            0 => l * l,
            1 => l,
            _ => 1.0,
        }
    });
    let y = DVector::from_iterator(m, points.iter().map(|p| p.1));
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= smax * 1e-12 {
        return Err(BaselineError::RankDeficient { distinct: ks.len() });
    }
    let coef = svd
        .solve(&y, smax * 1e-14)
        .map_err(|e| BaselineError::InvalidParameter(e.to_string()))?;
    Ok(LambdaCurve {
        a: coef[0],
        b: coef[1],
        c: coef[2],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    /// Entry-wise support frequency over the successful resamples.
    pub a_boot: RelaxedAdjacency,
    /// Resamples requested.
    pub b: usize,
    /// Resamples that failed twice and were left out of `a_boot`.
    pub failures: usize,
    pub p_m: f64,
    /// Values of the fixed entries; meaningful where `mask` is observed.
    pub a_obs: AdjacencyMatrix,
    pub mask: MaskPartition,
}

impl BootstrapResult {
    /// `(i, j, value, frequency)` for every fixed entry.
    pub fn fixed_entries(&self) -> Vec<(usize, usize, bool, f64)> {
        self.mask
            .observed_pairs()
            .into_iter()
            .map(|(i, j)| (i, j, self.a_obs.has_edge(i, j), self.a_boot.get(i, j)))
            .collect()
    }
}

fn resample_support(
    obs: &ObservationSet,
    lambda: f64,
    opts: &SolverOptions,
    rng: &mut ChaCha8Rng,
) -> Result<AdjacencyMatrix, CovselError> {
    let k = obs.k();
    let cols: Vec<usize> = (0..k).map(|_| rng.random_range(0..k)).collect();
    let s = sample_covariance(&obs.select_columns(&cols)?);
    let p = PenaltyMatrix::uniform(obs.n(), lambda)?;
    Ok(weighted_glasso(&s, &p, opts)?.support())
}

/// Bootstrapped graphical lasso. Each of the `b` resamples draws `k` columns
/// with replacement and solves a uniformly penalized problem; a failed
/// resample is redrawn once. Entries with frequency below `0.5 − p_m` are
/// fixed to 0, above `0.5 + p_m` to 1, the rest stay unknown.
pub fn bootstrap_fix<R: Rng + ?Sized>(
    obs: &ObservationSet,
    lambda: f64,
    b: usize,
    p_m: f64,
    opts: &SolverOptions,
    rng: &mut R,
) -> Result<BootstrapResult, BaselineError> {
    if b == 0 {
        return Err(BaselineError::InvalidParameter("B must be >= 1".into()));
    }
    if !(0.0..=0.5).contains(&p_m) {
        return Err(BaselineError::InvalidParameter(format!("p_m = {p_m} outside [0, 0.5]")));
    }
    if !(lambda >= 0.0) || lambda.is_infinite() {
        return Err(BaselineError::InvalidParameter(format!("lambda {lambda} must be finite and >= 0")));
    }
    let seed: u64 = rng.random();
    let supports: Vec<Result<AdjacencyMatrix, CovselError>> = (0..b)
        .into_par_iter()
        .map(|idx| {
            resample_support(obs, lambda, opts, &mut sample_rng(seed, idx, 0)).or_else(|err| {
                log::debug!("bootstrap resample {idx} failed ({err}); redrawing");
                resample_support(obs, lambda, opts, &mut sample_rng(seed, idx, 1))
            })
        })
        .collect();

    let n = obs.n();
    let mut counts = vec![0usize; crate::graph::pair_count(n)];
    let mut ok = 0usize;
    let mut last_err = None;
    for s in supports {
        match s {
            Ok(a) => {
                ok += 1;
                for (c, e) in counts.iter_mut().zip(a.vech().as_slice()) {
                    if *e == 1.0 {
                        *c += 1;
                    }
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    if ok == 0 {
        return Err(BaselineError::BootstrapFailed {
            attempted: b,
            last: last_err.expect("b >= 1"),
        });
    }
    let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / ok as f64).collect();
    let a_boot = RelaxedAdjacency::from_half_vector(n, &crate::graph::HalfVector(freq.clone()))
        .expect("dimensions agree");

    let mut a_obs = AdjacencyMatrix::empty(n);
    let mut observed = vec![false; freq.len()];
    for ((idx, (i, j)), f) in pairs(n).enumerate().zip(&freq) {
        if *f < 0.5 - p_m {
            observed[idx] = true;
        } else if *f > 0.5 + p_m {
            observed[idx] = true;
            a_obs.set_edge(i, j, true);
        }
    }
    let mask = MaskPartition::from_observed_flags(n, observed).expect("dimensions agree");
    Ok(BootstrapResult {
        a_boot,
        b,
        failures: b - ok,
        p_m,
        a_obs,
        mask,
    })
}
