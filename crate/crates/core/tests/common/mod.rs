//! Reference implementations used as test oracles. They share no numerical
//! code with the library beyond nalgebra's dense factorizations.
#![allow(dead_code)]

use ggm_langevin::graph::{pairs, AdjacencyMatrix};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_graph<R: Rng>(n: usize, p: f64, rng: &mut R) -> AdjacencyMatrix {
    let mut a = AdjacencyMatrix::empty(n);
    for (i, j) in pairs(n) {
        if rng.random_bool(p) {
            a.set_edge(i, j, true);
        }
    }
    a
}

pub fn log_det(m: &DMatrix<f64>) -> Option<f64> {
    let chol = Cholesky::new(m.clone())?;
    Some(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// `−log det Θ + tr(SΘ)`, `+inf` outside the positive-definite cone.
fn neg_loglik(s: &DMatrix<f64>, theta: &DMatrix<f64>) -> f64 {
    match log_det(theta) {
        Some(ld) => -ld + s.component_mul(theta).sum(),
        None => f64::INFINITY,
    }
}

/// Free parameters of a symmetric matrix: the diagonal plus every pair not in
/// `zeros`.
fn free_params(n: usize, zeros: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut p: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    p.extend(pairs(n).filter(|pr| !zeros.contains(pr)));
    p
}

fn unit_terms(p: (usize, usize)) -> Vec<(usize, usize)> {
    if p.0 == p.1 {
        vec![p]
    } else {
        vec![p, (p.1, p.0)]
    }
}

/// Equality-constrained Newton method for `min −log det Θ + tr(SΘ)` subject
/// to `Θ_ij = 0` on `zeros`, parametrized by the free entries.
pub fn newton_constrained_mle(s: &DMatrix<f64>, zeros: &[(usize, usize)]) -> DMatrix<f64> {
    let n = s.nrows();
    let params = free_params(n, zeros);
    let m = params.len();
    let build = |x: &DVector<f64>| {
        let mut t = DMatrix::zeros(n, n);
        for (k, &(i, j)) in params.iter().enumerate() {
            t[(i, j)] = x[k];
            t[(j, i)] = x[k];
        }
        t
    };
    let mut x = DVector::from_iterator(m, params.iter().map(|&(i, j)| if i == j { 1.0 / s[(i, i)] } else { 0.0 }));
    for _ in 0..200 {
        let theta = build(&x);
        let sigma = theta.clone().try_inverse().expect("iterates stay positive definite");
        let grad = DVector::from_iterator(
            m,
            params.iter().map(|&(i, j)| {
                let g = s[(i, j)] - sigma[(i, j)];
                if i == j {
                    g
                } else {
                    2.0 * g
                }
            }),
        );
        if grad.amax() < 1e-14 * s.amax().max(1.0) {
            break;
        }
        let mut h = DMatrix::zeros(m, m);
        for (p, &pp) in params.iter().enumerate() {
            for (q, &qq) in params.iter().enumerate() {
                let mut v = 0.0;
                for (a, b) in unit_terms(pp) {
                    for (c, d) in unit_terms(qq) {
                        v += sigma[(d, a)] * sigma[(b, c)];
                    }
                }
                h[(p, q)] = v;
            }
        }
        let step = h.cholesky().expect("Hessian is positive definite").solve(&(-&grad));
        let f0 = neg_loglik(s, &theta);
        let slope = grad.dot(&step);
        let mut t = 1.0;
        loop {
            let cand = &x + &step * t;
            let f1 = neg_loglik(s, &build(&cand));
            if f1 <= f0 + 1e-4 * t * slope || t < 1e-12 {
                x = cand;
                break;
            }
            t *= 0.5;
        }
    }
    build(&x)
}

fn soft(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

/// Weighted graphical lasso reference: proximal gradient with backtracking
/// (hard zeros by projection), then a Newton polish on the recovered support
/// with the signs held fixed.
///
/// `lambda` holds finite weights; `zeros` lists hard-zero pairs.
pub fn reference_weighted_glasso(s: &DMatrix<f64>, lambda: &DMatrix<f64>, zeros: &[(usize, usize)]) -> DMatrix<f64> {
    let n = s.nrows();
    let penalty = |t: &DMatrix<f64>| lambda.component_mul(&t.abs()).sum();
    let objective = |t: &DMatrix<f64>| neg_loglik(s, t) + penalty(t);
    let mut theta = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / s[(i, i)] } else { 0.0 });
    let mut step = 1.0;
    for _ in 0..200_000 {
        let sigma = theta.clone().try_inverse().expect("positive definite iterate");
        let grad = s - &sigma;
        let f_smooth = neg_loglik(s, &theta);
        let mut t = step * 2.0;
        let next = loop {
            let mut cand = DMatrix::from_fn(n, n, |i, j| {
                let v = theta[(i, j)] - t * grad[(i, j)];
                if i == j {
                    v
                } else {
                    soft(v, t * lambda[(i, j)])
                }
            });
            for &(i, j) in zeros {
                cand[(i, j)] = 0.0;
                cand[(j, i)] = 0.0;
            }
            let diff = &cand - &theta;
            let bound = f_smooth + grad.component_mul(&diff).sum() + diff.norm_squared() / (2.0 * t);
            if neg_loglik(s, &cand) <= bound {
                break cand;
            }
            t *= 0.5;
        };
        step = t;
        let moved = (&next - &theta).norm() / t;
        theta = next;
        if moved < 1e-10 {
            break;
        }
    }
    debug_assert!(objective(&theta).is_finite());

    // Newton polish: on the support with fixed signs the problem is smooth,
    // equivalent to an unpenalized fit with S shifted by Λ ∘ sign(Θ).
    let mut shifted = s.clone();
    let mut off_support = zeros.to_vec();
    for (i, j) in pairs(n) {
        if theta[(i, j)] == 0.0 {
            if !off_support.contains(&(i, j)) {
                off_support.push((i, j));
            }
        } else {
            let v = lambda[(i, j)] * theta[(i, j)].signum();
            shifted[(i, j)] += v;
            shifted[(j, i)] += v;
        }
    }
    let polished = newton_constrained_mle(&shifted, &off_support);
    let signs_kept = pairs(n).all(|(i, j)| theta[(i, j)] == 0.0 || polished[(i, j)].signum() == theta[(i, j)].signum());
    if signs_kept && objective(&polished) <= objective(&theta) {
        polished
    } else {
        theta
    }
}

/// Explicit log-density (up to a constant) of the mixture
/// `mean_i N(x; a_i, σ² I)`.
pub fn mixture_log_density(components: &[Vec<f64>], x: &[f64], sigma: f64) -> f64 {
    let exps: Vec<f64> = components
        .iter()
        .map(|a| -a.iter().zip(x).map(|(ai, xi)| (ai - xi) * (ai - xi)).sum::<f64>() / (2.0 * sigma * sigma))
        .collect();
    let m = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + exps.iter().map(|e| (e - m).exp()).sum::<f64>().ln()
}

/// Central difference of `f` along coordinate `c`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], c: usize, h: f64) -> f64 {
    let mut up = x.to_vec();
    up[c] += h;
    let mut down = x.to_vec();
    down[c] -= h;
    (f(&up) - f(&down)) / (2.0 * h)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Alternating star statistic from explicit star counts.
pub fn aks_direct(a: &AdjacencyMatrix, gamma: f64) -> f64 {
    let n = a.n();
    let degrees: Vec<usize> = (0..n).map(|v| (0..n).filter(|&u| u != v && a.has_edge(u, v)).count()).collect();
    let mut total = 0.0;
    for d in 2..n.max(2) {
        let stars: f64 = degrees.iter().map(|&deg| binomial(deg, d)).sum();
        let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * stars / gamma.powi(d as i32 - 2);
    }
    total
}

/// All graphs on `n` nodes, indexed by their half-vector bits.
pub fn all_graphs(n: usize) -> Vec<AdjacencyMatrix> {
    let pr: Vec<(usize, usize)> = pairs(n).collect();
    (0..1usize << pr.len())
        .map(|code| {
            let mut a = AdjacencyMatrix::empty(n);
            for (b, &(i, j)) in pr.iter().enumerate() {
                if code >> b & 1 == 1 {
                    a.set_edge(i, j, true);
                }
            }
            a
        })
        .collect()
}

pub fn graph_code(a: &AdjacencyMatrix) -> usize {
    pairs(a.n())
        .enumerate()
        .filter(|&(_, (i, j))| a.has_edge(i, j))
        .map(|(b, _)| 1usize << b)
        .sum()
}

/// Exact ERGM probabilities over all graphs on `n` nodes, with statistics
/// `[AKS, Σ_{i≠j} A_ij]`.
pub fn ergm_exact(n: usize, beta: [f64; 2], gamma: f64) -> Vec<f64> {
    let w: Vec<f64> = all_graphs(n)
        .iter()
        .map(|a| {
            let ordered_edges = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| i != j && a.has_edge(i, j)).count();
            (beta[0] * aks_direct(a, gamma) + beta[1] * ordered_edges as f64).exp()
        })
        .collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|v| v / z).collect()
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}
