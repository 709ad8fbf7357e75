//! Acceptance criteria. Runs as a plain binary (`harness = false`) so that
//! every criterion prints exactly one PASS/FAIL line. Pass criterion numbers
//! as arguments to run a subset, e.g. `cargo test --test acceptance -- 3 9`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use ggm_langevin::baselines::bootstrap_fix;
use ggm_langevin::covsel::{
    constrained_mle, sample_covariance, weighted_glasso, PenaltyMatrix, SampleCovariance, SolverOptions,
};
use ggm_langevin::generators::{
    choose_balanced_unknown_pairs, choose_unknown_pairs, ergm_samples, grid_graph, precision_from_support,
    sample_observations, ErgmChain, ErgmSpec, GridParams,
};
use ggm_langevin::graph::{pair_count, pairs, AdjacencyMatrix, HalfVector, MaskPartition, RelaxedAdjacency};
use ggm_langevin::harness::{
    run_experiment, select_grid_index, tune_and_score, ExperimentConfig, GraphFamily, InstancePredictions, KGrid,
    Method, Metric, UnknownPolicy,
};
use ggm_langevin::nalgebra::DMatrix;
use ggm_langevin::sampler::{draw_samples, estimate, exact_posterior_oracle, LangevinProblem, SamplerConfig};
use ggm_langevin::schedule::NoiseSchedule;
use ggm_langevin::scores::{
    denoising_loss, empirical_prior_score, likelihood_score, EmpiricalPriorScore, GraphDataset, ZeroScore,
    DEFAULT_RIDGE,
};
use rand::seq::IndexedRandom;
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

type Criterion = (u32, &'static str, u64, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (1, "likelihood score vs finite differences", 10, likelihood_score_fd),
        (2, "prior score vs mixture gradient", 5, prior_score_gradient),
        (3, "solver oracle equivalence", 30, solver_oracles),
        (4, "constrained MLE consistency", 60, mle_consistency),
        (5, "posterior sampling fidelity", 600, posterior_fidelity),
        (6, "support recovery at large k", 900, support_recovery),
        (7, "method ordering on small grids", 1800, method_ordering),
        (8, "denoising loss of the zero estimator", 10, denoising_identity),
        (9, "ERGM sampler exactness", 120, ergm_exactness),
        (10, "bootstrap margin monotonicity", 120, bootstrap_monotone),
        (11, "harness trace and determinism", 5, harness_trace),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut all_ok = true;
    for (id, name, budget, f) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let ok = result.passed && in_time;
        all_ok &= ok;
        println!(
            "[{}] {id:>2}. {name}: {} ({:.1}s of {budget}s{})",
            if ok { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            if in_time { "" } else { ", over budget" }
        );
    }
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn likelihood_score_fd() -> Outcome {
    let mut worst = 0.0f64;
    for idx in 0..50u64 {
        let mut r = rng(1000 + idx);
        let n = *[3usize, 5, 8].choose(&mut r).unwrap();
        let k = *[5usize, 50].choose(&mut r).unwrap();
        let theta_hat = precision_from_support(&random_graph(n, 0.5, &mut r), &mut r, (0.5, 1.0), true).unwrap();
        let theta0 = precision_from_support(&random_graph(n, 0.5, &mut r), &mut r, (0.5, 1.0), true).unwrap();
        let s = sample_covariance(&sample_observations(&theta0, k, &mut r).unwrap());
        let x: Vec<f64> = (0..pair_count(n)).map(|_| r.random_range(0.2..1.0)).collect();
        let a_tilde = RelaxedAdjacency::from_half_vector(n, &HalfVector(x.clone())).unwrap();
        let g = likelihood_score(&theta_hat, &a_tilde, &s, k as f64, DEFAULT_RIDGE).unwrap();

        let th = theta_hat.matrix().clone();
        let sm = s.matrix().clone();
        let f = |v: &[f64]| {
            let mut t = th.clone();
            for (c, (i, j)) in pairs(n).enumerate() {
                t[(i, j)] = th[(i, j)] * v[c];
                t[(j, i)] = th[(j, i)] * v[c];
            }
            0.5 * k as f64 * (log_det(&t).unwrap() - sm.component_mul(&t).sum())
        };
        let floor = 1e-3 * g.0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for c in 0..x.len() {
            let fd = central_difference(f, &x, c, 1e-5);
            let denom = g.0[c].abs().max(fd.abs()).max(floor);
            if denom > 0.0 {
                worst = worst.max((g.0[c] - fd).abs() / denom);
            }
        }
    }
    outcome(worst < 1e-5, format!("max relative error {worst:.2e} over 50 instances"))
}

fn prior_score_gradient() -> Outcome {
    let mut worst = 0.0f64;
    for idx in 0..50u64 {
        let mut r = rng(2000 + idx);
        let n = r.random_range(3..=6);
        let size = r.random_range(1..=12);
        let mut graphs: Vec<AdjacencyMatrix> = (0..size).map(|_| random_graph(n, 0.4, &mut r)).collect();
        // Graphs of another size must be ignored.
        graphs.push(random_graph(n + 1, 0.4, &mut r));
        let dataset = GraphDataset::new(graphs.clone()).unwrap();
        let sigma = r.random_range(0.05..1.0);
        let x: Vec<f64> = (0..pair_count(n)).map(|_| r.random_range(-0.5..1.5)).collect();
        let g = empirical_prior_score(&dataset, &HalfVector(x.clone()), sigma).unwrap();
        let comps: Vec<Vec<f64>> = graphs.iter().filter(|a| a.n() == n).map(|a| a.vech().0).collect();
        for c in 0..x.len() {
            let fd = central_difference(|v| mixture_log_density(&comps, v, sigma), &x, c, 1e-5 * sigma);
            worst = worst.max((g.0[c] - fd).abs() / fd.abs().max(1.0));
        }
    }
    outcome(worst < 1e-6, format!("max error {worst:.2e} over 50 triples"))
}

fn solver_oracles() -> Outcome {
    let mut worst_mle = 0.0f64;
    let mut worst_wgl = 0.0f64;
    let opts = SolverOptions::default();
    for idx in 0..20u64 {
        let mut r = rng(3000 + idx);
        let n = r.random_range(3..=6);
        let a0 = random_graph(n, 0.5, &mut r);
        let theta0 = precision_from_support(&a0, &mut r, (0.5, 1.0), true).unwrap();
        let k = r.random_range(3 * n..=40);
        let s = sample_covariance(&sample_observations(&theta0, k, &mut r).unwrap());

        // Constrained MLE: a random subset of the true non-edges is observed.
        let unknown: Vec<(usize, usize)> = pairs(n).filter(|_| r.random_bool(0.4)).collect();
        let mask = MaskPartition::with_unknown(n, &unknown).unwrap();
        let mut a_obs = a0.clone();
        for &(i, j) in &unknown {
            a_obs.set_edge(i, j, false);
        }
        let zeros: Vec<(usize, usize)> =
            mask.observed_pairs().into_iter().filter(|&(i, j)| !a_obs.has_edge(i, j)).collect();
        let est = constrained_mle(&s, &a_obs, &mask, &opts).unwrap();
        let oracle = newton_constrained_mle(s.matrix(), &zeros);
        worst_mle = worst_mle.max((est.matrix() - &oracle).norm());

        // Weighted lasso with random weights and a few hard zeros.
        let mut lambda = DMatrix::zeros(n, n);
        let mut penalty = PenaltyMatrix::zeros(n);
        let mut hard = Vec::new();
        for (i, j) in pairs(n) {
            if r.random_bool(0.15) {
                penalty.hard_zero(i, j).unwrap();
                hard.push((i, j));
            } else {
                let l = r.random_range(0.02..0.3);
                penalty.set(i, j, l).unwrap();
                lambda[(i, j)] = l;
                lambda[(j, i)] = l;
            }
        }
        let est = weighted_glasso(&s, &penalty, &opts).unwrap();
        let oracle = reference_weighted_glasso(s.matrix(), &lambda, &hard);
        worst_wgl = worst_wgl.max((est.matrix() - &oracle).norm());
    }
    outcome(
        worst_mle <= 1e-6 && worst_wgl <= 1e-6,
        format!("max Frobenius gap: constrained {worst_mle:.2e}, weighted {worst_wgl:.2e}"),
    )
}

fn mle_consistency() -> Outcome {
    let n = 10;
    let chain = AdjacencyMatrix::from_edges(n, &(0..n - 1).map(|i| (i, i + 1)).collect::<Vec<_>>()).unwrap();
    let theta0 = precision_from_support(&chain, &mut rng(4000), (0.5, 1.0), true).unwrap();
    let unknown = [(0, 1), (3, 4), (7, 8), (0, 5), (2, 9), (4, 6)];
    let mask = MaskPartition::with_unknown(n, &unknown).unwrap();
    let mut a_obs = chain.clone();
    for &(i, j) in &unknown {
        a_obs.set_edge(i, j, false);
    }
    let ks = [100usize, 1_000, 10_000, 100_000];
    let medians: Vec<f64> = ks
        .iter()
        .map(|&k| {
            let errs = (0..20u64)
                .map(|seed| {
                    let x = sample_observations(&theta0, k, &mut rng(4100 + seed * 7 + k as u64)).unwrap();
                    let est = constrained_mle(&sample_covariance(&x), &a_obs, &mask, &SolverOptions::default()).unwrap();
                    (est.matrix() - theta0.matrix()).norm()
                })
                .collect();
            median(errs)
        })
        .collect();
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    let ratio = medians[3] / medians[0];
    outcome(
        decreasing && ratio < 0.2,
        format!(
            "median errors {} (ratio {ratio:.3})",
            medians.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn posterior_fidelity() -> Outcome {
    let n = 6;
    let k = 200;
    let mut tvs = Vec::new();
    for idx in 0..10u64 {
        let mut r = rng(5000 + idx);
        let a0 = random_graph(n, 0.4, &mut r);
        let theta0 = precision_from_support(&a0, &mut r, (0.5, 1.0), true).unwrap();
        let unknown = choose_balanced_unknown_pairs(&a0, 4, &mut r)
            .or_else(|_| choose_unknown_pairs(n, 4, &mut r))
            .unwrap();
        let mask = MaskPartition::with_unknown(n, &unknown).unwrap();
        let mut a_obs = a0.clone();
        for &(i, j) in &unknown {
            a_obs.set_edge(i, j, false);
        }
        // Dataset graphs agree with the truth on observed pairs and vary on
        // the unknown ones with pair-specific frequencies.
        let freq: Vec<f64> = unknown.iter().map(|_| r.random_range(0.2..0.8)).collect();
        let graphs: Vec<AdjacencyMatrix> = (0..40)
            .map(|_| {
                let mut g = a_obs.clone();
                for (&(i, j), &q) in unknown.iter().zip(&freq) {
                    g.set_edge(i, j, r.random_bool(q));
                }
                g
            })
            .collect();
        let dataset = GraphDataset::new(graphs).unwrap();
        let s = sample_covariance(&sample_observations(&theta0, k, &mut r).unwrap());
        let theta_hat = constrained_mle(&s, &a_obs, &mask, &SolverOptions::default()).unwrap();
        let oracle = exact_posterior_oracle(&theta_hat, &a_obs, &mask, &s, k as f64, &dataset).unwrap();
        let prior = EmpiricalPriorScore::new(&dataset);
        let problem = LangevinProblem::new(&theta_hat, &a_obs, &mask, &s, k as f64, &prior).unwrap();
        let cfg = SamplerConfig {
            num_samples: 2000,
            seed: 5100 + idx,
            ..SamplerConfig::default()
        };
        let samples = draw_samples(&problem, &cfg).unwrap();
        tvs.push(oracle.total_variation(&oracle.frequencies(samples.samples())));
    }
    let good = tvs.iter().filter(|&&tv| tv <= 0.2).count();
    outcome(
        good >= 8,
        format!(
            "{good}/10 instances with TV <= 0.2 (TV: {})",
            tvs.iter().map(|t| format!("{t:.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

struct GridTrial {
    a0: AdjacencyMatrix,
    theta0: ggm_langevin::covsel::PrecisionEstimate,
    a_obs: AdjacencyMatrix,
    mask: MaskPartition,
    unknown: Vec<(usize, usize)>,
}

fn grid_trial(seed: u64, params: &GridParams, unknown_count: usize) -> GridTrial {
    let mut r = rng(seed);
    let a0 = grid_graph(&mut r, params).unwrap();
    let theta0 = precision_from_support(&a0, &mut r, (0.5, 1.0), true).unwrap();
    let unknown = choose_unknown_pairs(a0.n(), unknown_count, &mut r).unwrap();
    let mask = MaskPartition::with_unknown(a0.n(), &unknown).unwrap();
    let mut a_obs = a0.clone();
    for &(i, j) in &unknown {
        a_obs.set_edge(i, j, false);
    }
    GridTrial {
        a0,
        theta0,
        a_obs,
        mask,
        unknown,
    }
}

fn support_recovery() -> Outcome {
    let params = GridParams {
        n_min: 20,
        n_max: 20,
        extra_min: 2,
        extra_max: 5,
    };
    let mut pr = rng(6000);
    let dataset = GraphDataset::new((0..100).map(|_| grid_graph(&mut pr, &params).unwrap()).collect()).unwrap();
    let prior = EmpiricalPriorScore::new(&dataset);
    let ks = [100usize, 1_000, 10_000, 100_000];
    let mut errors = vec![Vec::new(); ks.len()];
    let mut exact = 0;
    let mut failures = 0;
    for t in 0..50u64 {
        let trial = grid_trial(6100 + t, &params, 8);
        for (ki, &k) in ks.iter().enumerate() {
            let x = sample_observations(&trial.theta0, k, &mut rng(6200 + t * 10 + ki as u64)).unwrap();
            let s = sample_covariance(&x);
            let run = || -> Result<AdjacencyMatrix, String> {
                let th = constrained_mle(&s, &trial.a_obs, &trial.mask, &SolverOptions::default())
                    .map_err(|e| e.to_string())?;
                let problem = LangevinProblem::new(&th, &trial.a_obs, &trial.mask, &s, k as f64, &prior)
                    .map_err(|e| e.to_string())?;
                let cfg = SamplerConfig {
                    num_samples: 10,
                    tau: 0.9,
                    seed: 6300 + t * 10 + ki as u64,
                    ..SamplerConfig::default()
                };
                let samples = draw_samples(&problem, &cfg).map_err(|e| e.to_string())?;
                estimate(&samples, cfg.tau).map_err(|e| e.to_string())
            };
            let wrong = match run() {
                Ok(est) => trial.unknown.iter().filter(|&&(i, j)| est.has_edge(i, j) != trial.a0.has_edge(i, j)).count(),
                Err(_) => {
                    failures += 1;
                    trial.unknown.len()
                }
            };
            errors[ki].push(wrong as f64 / trial.unknown.len() as f64);
            if k == 100_000 && wrong == 0 {
                exact += 1;
            }
        }
    }
    let rates: Vec<f64> = errors.iter().map(|e| e.iter().sum::<f64>() / e.len() as f64).collect();
    let decreasing = rates[..3].windows(2).all(|w| w[1] < w[0]);
    outcome(
        exact >= 45 && decreasing,
        format!(
            "exact recovery {exact}/50 at k=1e5; error rates {} for k=1e2..1e5; {failures} failed runs",
            rates.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

/// Out-of-sample F1 per instance: the threshold is tuned on one half of the
/// instances and applied to the other, in both directions.
fn cross_fitted_f1(preds: &[InstancePredictions], grid_len: usize, order: &[usize]) -> Vec<f64> {
    let half = order.len() / 2;
    let (a, b) = order.split_at(half);
    let mut out = vec![0.0; preds.len()];
    for (train, test) in [(a, b), (b, a)] {
        let tr: Vec<&InstancePredictions> = train.iter().map(|&i| &preds[i]).collect();
        let g = select_grid_index(&tr, grid_len, Metric::F1);
        for &i in test {
            out[i] = Metric::F1.evaluate(&preds[i].truth, &preds[i].by_grid[g]);
        }
    }
    out
}

fn method_ordering() -> Outcome {
    let cfg = ExperimentConfig {
        family: GraphFamily::Grid(GridParams {
            n_min: 20,
            n_max: 20,
            extra_min: 2,
            extra_max: 5,
        }),
        unknown: UnknownPolicy::Fraction(0.1),
        k: KGrid::PerUnknown(vec![2.5, 5.0]),
        instances: 40,
        methods: vec![Method::LPost, Method::LL, Method::Threshold, Method::Wgl],
        seed: 7,
        ..ExperimentConfig::default()
    };
    let out = run_experiment(&cfg).unwrap();
    let mut ok = true;
    let mut details = Vec::new();
    for k_label in [2.5, 5.0] {
        let per_method: Vec<_> = out.predictions.iter().filter(|p| p.k_label == k_label).collect();
        // Instances every method completed.
        let common: Vec<usize> = per_method[0]
            .instances
            .iter()
            .copied()
            .filter(|i| per_method.iter().all(|p| p.instances.contains(i)))
            .collect();
        let mut order: Vec<usize> = (0..common.len()).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng(7000));
        let mut f1 = std::collections::BTreeMap::new();
        for p in &per_method {
            let preds: Vec<InstancePredictions> = common
                .iter()
                .map(|i| p.predictions[p.instances.iter().position(|j| j == i).unwrap()].clone())
                .collect();
            f1.insert(p.method, cross_fitted_f1(&preds, p.grid.len(), &order));
        }
        let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
        let lpost = &f1[&Method::LPost];
        let (best, best_f1) = [Method::LL, Method::Threshold, Method::Wgl]
            .iter()
            .map(|m| (*m, &f1[m]))
            .max_by(|a, b| mean(a.1).total_cmp(&mean(b.1)))
            .unwrap();
        let diffs: Vec<f64> = lpost.iter().zip(best_f1).map(|(a, b)| a - b).collect();
        let mut br = rng(7100);
        let mut boot: Vec<f64> = (0..10_000)
            .map(|_| (0..diffs.len()).map(|_| diffs[br.random_range(0..diffs.len())]).sum::<f64>() / diffs.len() as f64)
            .collect();
        boot.sort_by(f64::total_cmp);
        let lower = boot[boot.len() / 20];
        let pass = common.len() >= 40
            && mean(lpost) >= mean(&f1[&Method::LL])
            && mean(lpost) >= mean(&f1[&Method::Threshold])
            && lower >= 0.0;
        ok &= pass;
        let alg2 = |m: &str| {
            out.report
                .summaries
                .iter()
                .find(|s| s.method == m && s.k_label == k_label)
                .and_then(|s| s.f1.as_ref())
                .map_or(f64::NAN, |r| r.mean)
        };
        details.push(format!(
            "k/|U|={k_label}: n={} F1 LPost {:.3} LL {:.3} Thr {:.3} WGL {:.3}, best {best} lower95 {lower:+.3} (split-mean LPost {:.3})",
            common.len(),
            mean(lpost),
            mean(&f1[&Method::LL]),
            mean(&f1[&Method::Threshold]),
            mean(&f1[&Method::Wgl]),
            alg2("LPost"),
        ));
    }
    outcome(ok, details.join("; "))
}

fn denoising_identity() -> Outcome {
    let mut r = rng(8000);
    let n = 10;
    let dataset = GraphDataset::new((0..20).map(|_| random_graph(n, 0.3, &mut r)).collect()).unwrap();
    let schedule = NoiseSchedule::default();
    let per_level = 100_000 / schedule.levels().len();
    let loss = denoising_loss(&ZeroScore, &dataset, &schedule, per_level, 8001).unwrap();
    let target = pair_count(n) as f64 / 2.0;
    let rel = (loss - target).abs() / target;
    outcome(rel <= 0.02, format!("loss {loss:.3} vs dim/2 = {target} (relative gap {rel:.4})"))
}

fn ergm_exactness() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    let n = 10;
    for (idx, beta2) in [-0.5f64, 0.0, 0.4].into_iter().enumerate() {
        let spec = ErgmSpec {
            beta: [0.0, beta2],
            gamma: 0.3,
            n,
            burn_in: 20_000,
            thin: 500,
        };
        let samples = ergm_samples(&spec, 2000, &mut rng(9000 + idx as u64)).unwrap();
        let dens: Vec<f64> = samples.iter().map(|a| a.edge_count() as f64 / pair_count(n) as f64).collect();
        let m = dens.iter().sum::<f64>() / dens.len() as f64;
        let var = dens.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / (dens.len() - 1) as f64;
        let se = (var / dens.len() as f64).sqrt();
        let p = 1.0 / (1.0 + (-2.0 * beta2).exp());
        let pass = (m - p).abs() <= 3.0 * se;
        ok &= pass;
        details.push(format!("beta2={beta2}: {m:.4} vs {p:.4} (se {se:.4})"));
    }
    for (idx, beta) in [[0.7, -2.0], [0.7, -0.3], [-0.4, 0.2]].into_iter().enumerate() {
        let spec = ErgmSpec {
            beta,
            gamma: 0.3,
            n: 4,
            burn_in: 0,
            thin: 1,
        };
        let exact = ergm_exact(4, beta, 0.3);
        let mut chain = ErgmChain::new(spec).unwrap();
        let mut r = rng(9100 + idx as u64);
        chain.run(1_000, &mut r);
        let mut counts = vec![0.0; exact.len()];
        let steps = 1_000_000;
        for _ in 0..steps {
            chain.step(&mut r);
            counts[graph_code(chain.state())] += 1.0;
        }
        let freq: Vec<f64> = counts.iter().map(|c| c / steps as f64).collect();
        let tv = total_variation(&freq, &exact);
        ok &= tv <= 0.05;
        details.push(format!("beta={beta:?}: TV {tv:.4}"));
    }
    outcome(ok, details.join("; "))
}

fn bootstrap_monotone() -> Outcome {
    let mut ok = true;
    let mut sizes_seen = Vec::new();
    for idx in 0..5u64 {
        let mut r = rng(10_000 + idx);
        let a0 = random_graph(10, 0.3, &mut r);
        let theta0 = precision_from_support(&a0, &mut r, (0.5, 1.0), true).unwrap();
        let x = sample_observations(&theta0, 100, &mut r).unwrap();
        let sizes: Vec<usize> = (0..=5)
            .map(|i| {
                let p_m = i as f64 * 0.1;
                bootstrap_fix(&x, 0.1, 50, p_m.min(0.5), &SolverOptions::default(), &mut rng(10_100 + idx))
                    .unwrap()
                    .mask
                    .observed_count()
            })
            .collect();
        ok &= sizes.windows(2).all(|w| w[1] <= w[0]) && sizes[5] == 0;
        sizes_seen.push(format!("{sizes:?}"));
    }
    outcome(ok, format!("|O| over p_m = 0..0.5: {}", sizes_seen.join(" ")))
}

fn harness_trace() -> Outcome {
    // Two instances with truth (1,0,1,0). On the grid {0.5, 0.75}, both give
    // F1 0.8 at 0.5 and less at 0.75, so either split selects 0.5 and scores
    // the held-out instance at 0.8.
    let grid = [0.5, 0.75];
    let truth = vec![true, false, true, false];
    let insts = vec![
        InstancePredictions::from_scores(truth.clone(), &[0.9, 0.8, 0.7, 0.1], &grid),
        InstancePredictions::from_scores(truth, &[0.95, 0.6, 0.55, 0.2], &grid),
    ];
    let rep = tune_and_score(&insts, &grid, 1, Metric::F1, &mut rng(11_000)).unwrap();
    let trace_ok = rep.mean == 0.8 && rep.selected == vec![0.5];

    let cfg = ExperimentConfig {
        family: GraphFamily::BarabasiAlbert {
            n: 8,
            n1: 1,
            n2: 2,
            pi: 0.5,
        },
        unknown: UnknownPolicy::Count(5),
        k: KGrid::Absolute(vec![50]),
        instances: 4,
        splits: 3,
        num_samples: 3,
        schedule: NoiseSchedule::linear(0.5, 0.05, 3, 30, 1e-4).unwrap(),
        methods: vec![Method::LPost, Method::Threshold, Method::Wgl],
        prior_graphs: 20,
        seed: 11,
        ..ExperimentConfig::default()
    };
    let first = run_experiment(&cfg).unwrap();
    let second = run_experiment(&cfg).unwrap();
    let same = first.csv_string().unwrap() == second.csv_string().unwrap()
        && first.summary_json().unwrap() == second.summary_json().unwrap();
    outcome(
        trace_ok && same,
        format!("trace F1 {} with tau* {:?}; repeated runs identical: {same}", rep.mean, rep.selected),
    )
}

#[allow(dead_code)]
fn unused(_: SampleCovariance) {}
