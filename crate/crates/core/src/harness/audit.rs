use rand::seq::IndexedRandom;
use rand::Rng;
use serde::Serialize;

use super::experiment::{stream_rng, Stream};
use super::HarnessError;
use crate::covsel::sample_covariance;
use crate::generators::{precision_from_support, sample_observations};
use crate::graph::{pairs, AdjacencyMatrix, RelaxedAdjacency};
use crate::scores::{likelihood_score, MaskedPrecision, DEFAULT_RIDGE};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreAudit {
    pub instances: usize,
    pub components: usize,
    pub max_relative_error: f64,
}

/// Compares the likelihood score with central differences of the masked
/// log-likelihood on random instances (`n ∈ {3, 5, 8}`, `k ∈ {5, 50}`).
///
/// The relative error of a component is measured against the larger of its
/// two values, floored at `1e-3` times the largest score magnitude of the
/// instance so that components that vanish do not dominate.
pub fn likelihood_score_audit(instances: usize, seed: u64) -> Result<ScoreAudit, HarnessError> {
    let mut worst = 0.0f64;
    let mut components = 0;
    for idx in 0..instances {
        let mut rng = stream_rng(seed, Stream::Instance, idx as u64);
        let n = *[3usize, 5, 8].choose(&mut rng).expect("non-empty");
        let k = *[5usize, 50].choose(&mut rng).expect("non-empty");
        let mut a = AdjacencyMatrix::empty(n);
        for (i, j) in pairs(n) {
            a.set_edge(i, j, rng.random_bool(0.5));
        }
        let theta_hat = precision_from_support(&a, &mut rng, (0.5, 1.0), true)?;
        let s = sample_covariance(&sample_observations(&theta_hat, k, &mut rng)?);
        let mut a_tilde = RelaxedAdjacency::zeros(n);
        for (i, j) in pairs(n) {
            a_tilde.set(i, j, rng.random_range(0.2..1.0));
        }
        let g = likelihood_score(&theta_hat, &a_tilde, &s, k as f64, DEFAULT_RIDGE)?;
        let floor = 1e-3 * g.0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let loglik = |at: &RelaxedAdjacency| -> Result<f64, HarnessError> {
            MaskedPrecision::new(&theta_hat, at)?
                .log_likelihood(&s, k as f64)
                .ok_or_else(|| HarnessError::Dimension("perturbed matrix left the positive-definite cone".into()))
        };
        let h = 1e-5;
        for (c, (i, j)) in pairs(n).enumerate() {
            let base = a_tilde.get(i, j);
            let mut up = a_tilde.clone();
            up.set(i, j, base + h);
            let mut down = a_tilde.clone();
            down.set(i, j, base - h);
            let fd = (loglik(&up)? - loglik(&down)?) / (2.0 * h);
            let denom = g.0[c].abs().max(fd.abs()).max(floor);
            if denom > 0.0 {
                worst = worst.max((g.0[c] - fd).abs() / denom);
            }
            components += 1;
        }
    }
    Ok(ScoreAudit {
        instances,
        components,
        max_relative_error: worst,
    })
}
