//! Synthetic graph families, precision synthesis on a given support and
//! Gaussian observation sampling.

use nalgebra::{Cholesky, DMatrix};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covsel::{CovselError, ObservationSet, PrecisionEstimate};
use crate::graph::{pair_count, pairs, AdjacencyMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no n in [{n_min}, {n_max}] factors as h x w with h, w >= 2")]
    NoFactorization { n_min: usize, n_max: usize },
    #[error("precision matrix could not be factorized")]
    Factorization,
    #[error(transparent)]
    Covsel(#[from] CovselError),
}

/// `h × w` lattice, nodes numbered row-major.
pub fn grid(h: usize, w: usize) -> AdjacencyMatrix {
    let mut a = AdjacencyMatrix::empty(h * w);
    for r in 0..h {
        for c in 0..w {
            let v = r * w + c;
            if c + 1 < w {
                a.set_edge(v, v + 1, true);
            }
            if r + 1 < h {
                a.set_edge(v, v + w, true);
            }
        }
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub n_min: usize,
    pub n_max: usize,
    pub extra_min: usize,
    pub extra_max: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            n_min: 40,
            n_max: 50,
            extra_min: 2,
            extra_max: 5,
        }
    }
}

fn factor_pairs(n: usize) -> Vec<(usize, usize)> {
    (2..=n / 2)
        .filter(|h| n.is_multiple_of(*h) && n / h >= 2)
        .map(|h| (h, n / h))
        .collect()
}

/// Random grid: `n` uniform in `[n_min, n_max]` (resampled until it has a
/// factorization with both sides at least 2), a uniform factor pair, then a
/// uniform number of extra edges in `[extra_min, extra_max]` placed uniformly
/// among non-grid pairs.
pub fn grid_graph<R: Rng + ?Sized>(rng: &mut R, params: &GridParams) -> Result<AdjacencyMatrix, GeneratorError> {
    let GridParams {
        n_min,
        n_max,
        extra_min,
        extra_max,
    } = *params;
    if n_min > n_max || extra_min > extra_max {
        return Err(GeneratorError::InvalidParameter(format!("bad grid ranges {params:?}")));
    }
    if (n_min..=n_max).all(|n| factor_pairs(n).is_empty()) {
        return Err(GeneratorError::NoFactorization { n_min, n_max });
    }
    let (h, w) = loop {
        let n = rng.random_range(n_min..=n_max);
        if let Some(&hw) = factor_pairs(n).choose(rng) {
            break hw;
        }
    };
    let mut a = grid(h, w);
    let extras = rng.random_range(extra_min..=extra_max);
    let mut free: Vec<(usize, usize)> = pairs(a.n()).filter(|&(i, j)| !a.has_edge(i, j)).collect();
    if extras > free.len() {
        return Err(GeneratorError::InvalidParameter(format!(
            "cannot add {extras} extra edges to a {h}x{w} grid"
        )));
    }
    let (chosen, _) = free.partial_shuffle(rng, extras);
    for &(i, j) in chosen.iter() {
        a.set_edge(i, j, true);
    }
    Ok(a)
}

/// Dual Barabási–Albert graph on `n` nodes.
///
/// Starts from `max(n1, n2)` isolated nodes. Every arriving node attaches `n1`
/// edges with probability `pi` and `n2` otherwise, choosing distinct targets
/// with probability proportional to their current degree. While no existing
/// node has positive degree, or when the positive-degree nodes run out, the
/// remaining targets are drawn uniformly from the zero-degree nodes.
pub fn dual_barabasi_albert<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    n1: usize,
    n2: usize,
    pi: f64,
) -> Result<AdjacencyMatrix, GeneratorError> {
    let m0 = n1.max(n2);
    if n1 == 0 || n2 == 0 || n <= m0 {
        return Err(GeneratorError::InvalidParameter(format!(
            "need n > max(n1, n2) and n1, n2 >= 1 (n = {n}, n1 = {n1}, n2 = {n2})"
        )));
    }
    if !(0.0..=1.0).contains(&pi) {
        return Err(GeneratorError::InvalidParameter(format!("pi = {pi} outside [0, 1]")));
    }
    let mut a = AdjacencyMatrix::empty(n);
    let mut degree = vec![0usize; n];
    for v in m0..n {
        let m = if rng.random_bool(pi) { n1 } else { n2 };
        let mut chosen: Vec<usize> = Vec::with_capacity(m);
        while chosen.len() < m {
            let total: usize = (0..v)
                .filter(|u| !chosen.contains(u))
                .map(|u| degree[u])
                .sum();
            let target = if total > 0 {
                let mut ticket = rng.random_range(0..total);
                (0..v)
                    .filter(|u| !chosen.contains(u))
                    .find(|&u| {
                        if ticket < degree[u] {
                            true
                        } else {
                            ticket -= degree[u];
                            false
                        }
                    })
                    .expect("ticket falls inside the total")
            } else {
                let zeros: Vec<usize> = (0..v).filter(|u| !chosen.contains(u)).collect();
                *zeros.choose(rng).expect("at least m0 >= m candidates")
            };
            chosen.push(target);
        }
        for u in chosen {
            a.set_edge(u, v, true);
            degree[u] += 1;
            degree[v] += 1;
        }
    }
    Ok(a)
}

/// Contribution of a node with degree `d` to the alternating star statistic:
/// `Σ_{s=2}^{d} (-1)^s C(d, s) / γ^{s-2} = γ² ((1 − 1/γ)^d − 1 + d/γ)`.
pub fn aks_node_term(degree: usize, gamma: f64) -> f64 {
    if degree < 2 {
        return 0.0;
    }
    let d = degree as f64;
    gamma * gamma * ((1.0 - 1.0 / gamma).powi(degree as i32) - 1.0 + d / gamma)
}

/// Alternating `d`-stars statistic `Σ_{d=2}^{n-1} (-1)^d S_d(A) / γ^{d-2}`,
/// where `S_d` counts `d`-stars.
pub fn aks_statistic(a: &AdjacencyMatrix, gamma: f64) -> f64 {
    a.degrees().into_iter().map(|d| aks_node_term(d, gamma)).sum()
}

/// ERGM with statistics `ψ(A) = [AKS_γ(A), Σ_{i≠j} A_ij]` and coefficients
/// `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgmSpec {
    pub beta: [f64; 2],
    pub gamma: f64,
    pub n: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl ErgmSpec {
    pub fn new(beta: [f64; 2], gamma: f64, n: usize) -> Self {
        ErgmSpec {
            beta,
            gamma,
            n,
            burn_in: 100_000,
            thin: 1_000,
        }
    }

    fn validate(&self) -> Result<(), GeneratorError> {
        if !(self.gamma > 0.0) || self.n < 2 || self.beta.iter().any(|b| !b.is_finite()) {
            return Err(GeneratorError::InvalidParameter(format!("bad ERGM spec {self:?}")));
        }
        Ok(())
    }

    /// `βᵀψ(A)`, the unnormalized log-probability.
    pub fn log_weight(&self, a: &AdjacencyMatrix) -> f64 {
        let [aks, edges] = ergm_statistics(a, self.gamma);
        self.beta[0] * aks + self.beta[1] * edges
    }
}

pub fn ergm_statistics(a: &AdjacencyMatrix, gamma: f64) -> [f64; 2] {
    [aks_statistic(a, gamma), 2.0 * a.edge_count() as f64]
}

/// Metropolis chain over graphs, proposing one uniformly chosen pair flip per
/// step.
#[derive(Debug, Clone)]
pub struct ErgmChain {
    spec: ErgmSpec,
    state: AdjacencyMatrix,
    degree: Vec<usize>,
}

impl ErgmChain {
    pub fn new(spec: ErgmSpec) -> Result<Self, GeneratorError> {
        spec.validate()?;
        let n = spec.n;
        Ok(ErgmChain {
            spec,
            state: AdjacencyMatrix::empty(n),
            degree: vec![0; n],
        })
    }

    pub fn state(&self) -> &AdjacencyMatrix {
        &self.state
    }

    /// Log acceptance ratio of flipping `(i, j)`, from the two endpoint
    /// degrees only.
    fn log_ratio(&self, i: usize, j: usize) -> f64 {
        let g = self.spec.gamma;
        let (di, dj) = (self.degree[i], self.degree[j]);
        let (delta_edges, ni, nj) = if self.state.has_edge(i, j) {
            (-2.0, di - 1, dj - 1)
        } else {
            (2.0, di + 1, dj + 1)
        };
        let delta_aks = aks_node_term(ni, g) - aks_node_term(di, g) + aks_node_term(nj, g)
            - aks_node_term(dj, g);
        self.spec.beta[0] * delta_aks + self.spec.beta[1] * delta_edges
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.spec.n;
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let log_r = self.log_ratio(i, j);
        if log_r >= 0.0 || rng.random::<f64>() < log_r.exp() {
            let present = self.state.has_edge(i, j);
            self.state.set_edge(i, j, !present);
            if present {
                self.degree[i] -= 1;
                self.degree[j] -= 1;
            } else {
                self.degree[i] += 1;
                self.degree[j] += 1;
            }
        }
    }

    pub fn run<R: Rng + ?Sized>(&mut self, steps: usize, rng: &mut R) {
        for _ in 0..steps {
            self.step(rng);
        }
    }
}

/// One ERGM draw: `burn_in` flips from the empty graph.
pub fn ergm_sample<R: Rng + ?Sized>(spec: &ErgmSpec, rng: &mut R) -> Result<AdjacencyMatrix, GeneratorError> {
    let mut chain = ErgmChain::new(spec.clone())?;
    chain.run(spec.burn_in, rng);
    Ok(chain.state().clone())
}

/// `count` draws from one chain: `burn_in` flips, then one draw every `thin`
/// flips.
pub fn ergm_samples<R: Rng + ?Sized>(
    spec: &ErgmSpec,
    count: usize,
    rng: &mut R,
) -> Result<Vec<AdjacencyMatrix>, GeneratorError> {
    let mut chain = ErgmChain::new(spec.clone())?;
    chain.run(spec.burn_in, rng);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        chain.run(spec.thin.max(1), rng);
        out.push(chain.state().clone());
    }
    Ok(out)
}

/// Diagonally dominant precision with off-diagonal support exactly `a`:
/// `|Θ_ij| ~ U(magnitude_range)` on edges (random sign if `sign_flip`), and
/// `Θ_ii = Σ_j |Θ_ij| + 0.1`.
pub fn precision_from_support<R: Rng + ?Sized>(
    a: &AdjacencyMatrix,
    rng: &mut R,
    magnitude_range: (f64, f64),
    sign_flip: bool,
) -> Result<PrecisionEstimate, GeneratorError> {
    let (lo, hi) = magnitude_range;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(GeneratorError::InvalidParameter(format!(
            "magnitude range ({lo}, {hi}) must be positive and ordered"
        )));
    }
    let n = a.n();
    let mut theta = DMatrix::zeros(n, n);
    for (i, j) in a.edges() {
        let mag = if lo == hi { lo } else { rng.random_range(lo..hi) };
        let v = if sign_flip && rng.random_bool(0.5) { -mag } else { mag };
        theta[(i, j)] = v;
        theta[(j, i)] = v;
    }
    for i in 0..n {
        theta[(i, i)] = (0..n).map(|j| theta[(i, j)].abs()).sum::<f64>() + 0.1;
    }
    let est = PrecisionEstimate::from_matrix(theta)?;
    debug_assert_eq!(est.support(), *a);
    Ok(est)
}

/// Ground-truth graph and precision of a synthetic experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct GgmInstance {
    pub a0: AdjacencyMatrix,
    pub theta0: PrecisionEstimate,
    pub provenance: String,
}

impl GgmInstance {
    pub fn new(a0: AdjacencyMatrix, theta0: PrecisionEstimate, provenance: impl Into<String>) -> Result<Self, GeneratorError> {
        if theta0.support() != a0 {
            return Err(GeneratorError::InvalidParameter(
                "precision support differs from the adjacency matrix".into(),
            ));
        }
        Ok(GgmInstance {
            a0,
            theta0,
            provenance: provenance.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.a0.n()
    }
}

/// `k` i.i.d. draws from `N(0, Θ₀⁻¹)`: with `Θ₀ = L Lᵀ`, each column solves
/// `Lᵀ x = z` for standard normal `z`.
pub fn sample_observations<R: Rng + ?Sized>(
    theta0: &PrecisionEstimate,
    k: usize,
    rng: &mut R,
) -> Result<ObservationSet, GeneratorError> {
    if k == 0 {
        return Err(GeneratorError::InvalidParameter("k must be >= 1".into()));
    }
    let n = theta0.n();
    let chol = Cholesky::new(theta0.matrix().clone()).ok_or(GeneratorError::Factorization)?;
    let z = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let lt = chol.l().transpose();
    let x = lt.solve_upper_triangular(&z).ok_or(GeneratorError::Factorization)?;
    Ok(ObservationSet::new(x)?)
}

/// `count` pairs drawn uniformly without replacement among the strict-upper
/// pairs of an `n`-node graph, returned in half-vector order.
pub fn choose_unknown_pairs<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Result<Vec<(usize, usize)>, GeneratorError> {
    let mut all: Vec<(usize, usize)> = pairs(n).collect();
    if count > all.len() {
        return Err(GeneratorError::InvalidParameter(format!(
            "{count} unknown pairs requested but only {} exist",
            pair_count(n)
        )));
    }
    let (chosen, _) = all.partial_shuffle(rng, count);
    let mut chosen = chosen.to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Balanced variant: half of the unknown pairs are edges of `a` and half are
/// non-edges (the odd one out is an edge). Fails if either class is too small.
pub fn choose_balanced_unknown_pairs<R: Rng + ?Sized>(
    a: &AdjacencyMatrix,
    count: usize,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>, GeneratorError> {
    let mut ones = a.edges();
    let mut zeros: Vec<(usize, usize)> = pairs(a.n()).filter(|&(i, j)| !a.has_edge(i, j)).collect();
    let want_ones = count.div_ceil(2);
    let want_zeros = count / 2;
    if ones.len() < want_ones || zeros.len() < want_zeros {
        return Err(GeneratorError::InvalidParameter(format!(
            "cannot pick {want_ones} edges and {want_zeros} non-edges"
        )));
    }
    let mut chosen: Vec<(usize, usize)> = ones.partial_shuffle(rng, want_ones).0.to_vec();
    chosen.extend_from_slice(zeros.partial_shuffle(rng, want_zeros).0);
    chosen.sort_unstable();
    Ok(chosen)
}
