use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use super::metrics::{auc, mean_std, tune_and_score, InstancePredictions, Metric, TuneReport};
use super::HarnessError;
use crate::baselines::{bootstrap_fix, wgl_baseline, BootstrapResult};
use crate::covsel::{constrained_mle, sample_covariance, PrecisionEstimate, SampleCovariance, SolverOptions};
use crate::generators::{
    choose_balanced_unknown_pairs, choose_unknown_pairs, precision_from_support, sample_observations,
};
use crate::graph::{AdjacencyMatrix, MaskPartition};
use crate::sampler::{draw_samples, LangevinProblem, SamplerConfig};
use crate::scores::{EmpiricalPriorScore, GraphDataset, ScoreEstimator, ZeroScore};

/// Independent random streams of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Prior = 1,
    Instance = 2,
    Observations = 3,
    Sampler = 4,
    Bootstrap = 5,
    Splits = 6,
}

/// Generator for `(seed, stream, index)`; parallel scheduling never changes
/// which numbers a given piece of work sees.
pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 56) | index);
    rng
}

/// One CSV line: a method evaluated on one instance at one `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRow {
    pub k_label: f64,
    pub k: usize,
    pub instance: usize,
    pub method: String,
    pub n: usize,
    pub unknown: usize,
    pub positives: usize,
    pub status: String,
    pub auc: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub k_label: f64,
    pub succeeded: usize,
    pub failed: usize,
    /// Instances entering the split procedure (an odd success count drops the
    /// last one).
    pub scored: usize,
    pub f1: Option<TuneReport>,
    pub accuracy: Option<TuneReport>,
    pub auc_mean: Option<f64>,
    pub auc_std: Option<f64>,
    pub auc_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub instances: usize,
    pub splits: usize,
    pub threshold_grid: Vec<f64>,
    pub failures: usize,
    pub summaries: Vec<MethodSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodTiming {
    pub method: String,
    pub runs: usize,
    pub total_seconds: f64,
}

/// Binary predictions of one method at one `k`, for the instances it
/// completed (in instance order).
#[derive(Debug, Clone, PartialEq)]
pub struct MethodPredictions {
    pub method: Method,
    pub k_label: f64,
    /// Tuning grid the predictions are indexed by.
    pub grid: Vec<f64>,
    pub instances: Vec<usize>,
    pub predictions: Vec<InstancePredictions>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<InstanceRow>,
    pub report: ExperimentReport,
    pub predictions: Vec<MethodPredictions>,
    /// Wall-clock times, kept out of the report so that reports are
    /// reproducible byte for byte.
    pub timings: Vec<MethodTiming>,
}

impl ExperimentOutput {
    pub fn csv_string(&self) -> Result<String, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn summary_json(&self) -> Result<String, HarnessError> {
        Ok(serde_json::to_string_pretty(&self.report)?)
    }

    /// Writes `instances.csv`, `summary.json` and `timings.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("instances.csv"), self.csv_string()?)?;
        fs::write(dir.join("summary.json"), self.summary_json()? + "\n")?;
        fs::write(dir.join("timings.json"), serde_json::to_string_pretty(&self.timings)? + "\n")?;
        Ok(())
    }
}

/// Ground truth and hidden pairs of one instance, shared by every `k`.
struct Instance {
    a0: AdjacencyMatrix,
    theta0: PrecisionEstimate,
    a_obs: AdjacencyMatrix,
    mask: MaskPartition,
    unknown: Vec<(usize, usize)>,
}

impl Instance {
    fn generate(cfg: &ExperimentConfig, index: usize) -> Result<Self, String> {
        let mut rng = stream_rng(cfg.seed, Stream::Instance, index as u64);
        let a0 = cfg.family.generate(&mut rng).map_err(|e| e.to_string())?;
        let theta0 = precision_from_support(&a0, &mut rng, cfg.magnitude_range, cfg.sign_flip)
            .map_err(|e| e.to_string())?;
        let count = cfg.unknown.count(a0.n());
        let unknown = if cfg.balanced_unknown {
            choose_balanced_unknown_pairs(&a0, count, &mut rng)
        } else {
            choose_unknown_pairs(a0.n(), count, &mut rng)
        }
        .map_err(|e| e.to_string())?;
        let mask = MaskPartition::with_unknown(a0.n(), &unknown).map_err(|e| e.to_string())?;
        let mut a_obs = a0.clone();
        for &(i, j) in &unknown {
            a_obs.set_edge(i, j, false);
        }
        Ok(Instance {
            a0,
            theta0,
            a_obs,
            mask,
            unknown,
        })
    }

    fn truth(&self) -> Vec<bool> {
        self.unknown.iter().map(|&(i, j)| self.a0.has_edge(i, j)).collect()
    }
}

#[derive(Default)]
struct Collected {
    preds: Vec<InstancePredictions>,
    instances: Vec<usize>,
    aucs: Vec<f64>,
    failed: usize,
}

enum Prediction {
    Scores(Vec<f64>),
    Grid(Vec<Vec<bool>>),
}

struct MethodRun {
    method: Method,
    outcome: Result<Prediction, String>,
    seconds: f64,
}

struct CellResult {
    instance: usize,
    k_index: usize,
    k: usize,
    n: usize,
    truth: Vec<bool>,
    runs: Vec<MethodRun>,
}

fn load_prior(cfg: &ExperimentConfig) -> Result<Option<EmpiricalPriorScore>, HarnessError> {
    let needs_prior = cfg
        .methods
        .iter()
        .any(|m| matches!(m, Method::LPost | Method::LPr | Method::BootLPost));
    if !needs_prior {
        return Ok(None);
    }
    let dataset = match &cfg.prior_dir {
        Some(dir) => GraphDataset::load_dir(dir)?,
        None => {
            let graphs = (0..cfg.prior_graphs)
                .into_par_iter()
                .map(|i| cfg.family.generate(&mut stream_rng(cfg.seed, Stream::Prior, i as u64)))
                .collect::<Result<Vec<_>, _>>()?;
            GraphDataset::new(graphs)?
        }
    };
    let mut rng = stream_rng(cfg.seed, Stream::Prior, u64::MAX >> 8);
    Ok(Some(if cfg.prior_relabelings > 0 {
        EmpiricalPriorScore::with_permutation_augmentation(&dataset, cfg.prior_relabelings, &mut rng)
    } else {
        EmpiricalPriorScore::new(&dataset)
    }))
}

struct Shared<'a> {
    cfg: &'a ExperimentConfig,
    prior: Option<&'a EmpiricalPriorScore>,
    opts: SolverOptions,
}

fn sampler_config(cfg: &ExperimentConfig, seed: u64) -> SamplerConfig {
    SamplerConfig {
        schedule: cfg.schedule.clone(),
        num_samples: cfg.num_samples,
        seed,
        ..SamplerConfig::default()
    }
}

/// Posterior mean of the Langevin samples on `pairs_of_interest`.
fn langevin_scores(
    theta_hat: &PrecisionEstimate,
    a_obs: &AdjacencyMatrix,
    mask: &MaskPartition,
    s: &SampleCovariance,
    k: f64,
    prior: &dyn ScoreEstimator,
    config: &SamplerConfig,
    pairs_of_interest: &[(usize, usize)],
) -> Result<Vec<f64>, String> {
    let problem = LangevinProblem::new(theta_hat, a_obs, mask, s, k, prior).map_err(|e| e.to_string())?;
    let samples = draw_samples(&problem, config).map_err(|e| e.to_string())?;
    Ok(pairs_of_interest.iter().map(|&(i, j)| samples.mean().get(i, j)).collect())
}

fn run_cell(shared: &Shared<'_>, inst: &Instance, instance: usize, k_index: usize) -> CellResult {
    let cfg = shared.cfg;
    let n = inst.a0.n();
    let k = cfg.k.resolve(k_index, inst.unknown.len());
    let cell = (instance * cfg.k.len() + k_index) as u64;
    let truth = inst.truth();
    let done = |runs| CellResult {
        instance,
        k_index,
        k,
        n,
        truth: truth.clone(),
        runs,
    };

    let obs = match sample_observations(&inst.theta0, k, &mut stream_rng(cfg.seed, Stream::Observations, cell)) {
        Ok(x) => x,
        Err(e) => {
            let msg = format!("observations: {e}");
            return done(
                cfg.methods
                    .iter()
                    .map(|&method| MethodRun {
                        method,
                        outcome: Err(msg.clone()),
                        seconds: 0.0,
                    })
                    .collect(),
            );
        }
    };
    let s = sample_covariance(&obs);
    let mut theta_hat: Option<Result<PrecisionEstimate, String>> = None;
    let mut boot: Option<Result<BootstrapResult, String>> = None;
    let mut runs = Vec::with_capacity(cfg.methods.len());

    for (m_idx, &method) in cfg.methods.iter().enumerate() {
        let start = Instant::now();
        let sampler_seed: u64 = stream_rng(cfg.seed, Stream::Sampler, cell * 16 + m_idx as u64).random();
        let scfg = sampler_config(cfg, sampler_seed);
        let needs_theta = matches!(method, Method::LPost | Method::LPr | Method::LL | Method::Threshold);
        if needs_theta && theta_hat.is_none() {
            theta_hat = Some(
                constrained_mle(&s, &inst.a_obs, &inst.mask, &shared.opts).map_err(|e| format!("covariance selection: {e}")),
            );
        }
        if method.needs_bootstrap() && boot.is_none() {
            let b = &cfg.bootstrap;
            boot = Some(
                bootstrap_fix(
                    &obs,
                    b.lambda,
                    b.b,
                    b.p_m,
                    &shared.opts,
                    &mut stream_rng(cfg.seed, Stream::Bootstrap, cell),
                )
                .map_err(|e| format!("bootstrap: {e}")),
            );
        }
        let prior = || shared.prior.ok_or_else(|| "no prior dataset".to_string());
        let outcome: Result<Prediction, String> = match method {
            Method::LPost | Method::LPr | Method::LL => {
                theta_hat.as_ref().expect("computed above").clone().and_then(|th| {
                    let (k_weight, pr): (f64, &dyn ScoreEstimator) = match method {
                        Method::LPost => (k as f64, prior()?),
                        Method::LPr => (0.0, prior()?),
                        _ => (k as f64, &ZeroScore),
                    };
                    langevin_scores(&th, &inst.a_obs, &inst.mask, &s, k_weight, pr, &scfg, &inst.unknown)
                        .map(Prediction::Scores)
                })
            }
            Method::Threshold => theta_hat
                .as_ref()
                .expect("computed above")
                .as_ref()
                .map(|th| Prediction::Scores(inst.unknown.iter().map(|&(i, j)| th.get(i, j).abs()).collect()))
                .map_err(Clone::clone),
            Method::Wgl => cfg
                .lambda_grid
                .iter()
                .map(|&lambda| {
                    wgl_baseline(&s, &inst.a_obs, &inst.mask, lambda, &shared.opts)
                        .map(|a| inst.unknown.iter().map(|&(i, j)| a.has_edge(i, j)).collect::<Vec<bool>>())
                        .map_err(|e| format!("wgl at lambda {lambda}: {e}"))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Prediction::Grid),
            Method::Bgl => boot
                .as_ref()
                .expect("computed above")
                .as_ref()
                .map(|r| Prediction::Scores(inst.unknown.iter().map(|&(i, j)| r.a_boot.get(i, j)).collect()))
                .map_err(Clone::clone),
            Method::BootLPost => boot.as_ref().expect("computed above").clone().and_then(|r| {
                let th = constrained_mle(&s, &r.a_obs, &r.mask, &shared.opts)
                    .map_err(|e| format!("covariance selection: {e}"))?;
                langevin_scores(&th, &r.a_obs, &r.mask, &s, k as f64, prior()?, &scfg, &inst.unknown)
                    .map(Prediction::Scores)
            }),
        };
        runs.push(MethodRun {
            method,
            outcome,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    done(runs)
}

/// Runs every configured method on `instances` generated GGMs per `k` value
/// and tunes thresholds over train/test splits.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    cfg.validate()?;
    let prior = load_prior(cfg)?;
    let shared = Shared {
        cfg,
        prior: prior.as_ref(),
        opts: SolverOptions::default(),
    };

    let instances: Vec<Result<Instance, String>> =
        (0..cfg.instances).into_par_iter().map(|r| Instance::generate(cfg, r)).collect();
    let cells: Vec<(usize, usize)> = (0..cfg.instances)
        .flat_map(|r| (0..cfg.k.len()).map(move |ki| (r, ki)))
        .collect();
    let results: Vec<Result<CellResult, (usize, usize, String)>> = cells
        .par_iter()
        .map(|&(r, ki)| match &instances[r] {
            Ok(inst) => Ok(run_cell(&shared, inst, r, ki)),
            Err(e) => Err((r, ki, format!("instance generation: {e}"))),
        })
        .collect();

    let mut rows = Vec::new();
    let mut timing: BTreeMap<Method, (usize, f64)> = BTreeMap::new();
    // (method, k index) -> instance predictions and AUC values, in instance order.
    let mut collected: BTreeMap<(usize, usize), Collected> = BTreeMap::new();
    let mut failures = 0usize;

    for res in &results {
        match res {
            Err((r, ki, msg)) => {
                for (m_idx, method) in cfg.methods.iter().enumerate() {
                    failures += 1;
                    collected.entry((m_idx, *ki)).or_default().failed += 1;
                    rows.push(InstanceRow {
                        k_label: cfg.k.label(*ki),
                        k: 0,
                        instance: *r,
                        method: method.name().into(),
                        n: 0,
                        unknown: 0,
                        positives: 0,
                        status: "failed".into(),
                        auc: None,
                        error: msg.clone(),
                    });
                }
            }
            Ok(cell) => {
                for (m_idx, run) in cell.runs.iter().enumerate() {
                    let t = timing.entry(run.method).or_insert((0, 0.0));
                    t.0 += 1;
                    t.1 += run.seconds;
                    let entry = collected.entry((m_idx, cell.k_index)).or_default();
                    let mut row = InstanceRow {
                        k_label: cfg.k.label(cell.k_index),
                        k: cell.k,
                        instance: cell.instance,
                        method: run.method.name().into(),
                        n: cell.n,
                        unknown: cell.truth.len(),
                        positives: cell.truth.iter().filter(|&&t| t).count(),
                        status: "ok".into(),
                        auc: None,
                        error: String::new(),
                    };
                    match &run.outcome {
                        Ok(Prediction::Scores(scores)) => {
                            row.auc = auc(&cell.truth, scores);
                            if let Some(a) = row.auc {
                                entry.aucs.push(a);
                            }
                            entry.instances.push(cell.instance);
                            entry
                                .preds
                                .push(InstancePredictions::from_scores(cell.truth.clone(), scores, &cfg.threshold_grid));
                        }
                        Ok(Prediction::Grid(by_grid)) => {
                            entry.instances.push(cell.instance);
                            entry.preds.push(InstancePredictions {
                                truth: cell.truth.clone(),
                                by_grid: by_grid.clone(),
                            });
                        }
                        Err(msg) => {
                            log::warn!(
                                "{} failed on instance {} (k = {}): {msg}",
                                run.method,
                                cell.instance,
                                cell.k
                            );
                            failures += 1;
                            entry.failed += 1;
                            row.status = "failed".into();
                            row.error = msg.clone();
                        }
                    }
                    rows.push(row);
                }
            }
        }
    }

    let mut summaries = Vec::new();
    let mut predictions = Vec::new();
    for (m_idx, &method) in cfg.methods.iter().enumerate() {
        let grid: &[f64] = if method == Method::Wgl {
            &cfg.lambda_grid
        } else {
            &cfg.threshold_grid
        };
        for ki in 0..cfg.k.len() {
            let Collected {
                mut preds,
                instances,
                aucs,
                failed,
            } = collected.remove(&(m_idx, ki)).unwrap_or_default();
            let succeeded = preds.len();
            predictions.push(MethodPredictions {
                method,
                k_label: cfg.k.label(ki),
                grid: grid.to_vec(),
                instances,
                predictions: preds.clone(),
            });
            if preds.len() % 2 == 1 {
                preds.pop();
            }
            let (f1, accuracy) = if preds.len() >= 2 {
                // Every method sees the same split sequence for a given k.
                let f1 = tune_and_score(&preds, grid, cfg.splits, Metric::F1, &mut stream_rng(cfg.seed, Stream::Splits, ki as u64))?;
                let acc = tune_and_score(
                    &preds,
                    grid,
                    cfg.splits,
                    Metric::Accuracy,
                    &mut stream_rng(cfg.seed, Stream::Splits, ki as u64),
                )?;
                (Some(f1), Some(acc))
            } else {
                (None, None)
            };
            let (am, asd) = mean_std(&aucs);
            summaries.push(MethodSummary {
                method: method.name().into(),
                k_label: cfg.k.label(ki),
                succeeded,
                failed,
                scored: preds.len(),
                f1,
                accuracy,
                auc_mean: (!aucs.is_empty()).then_some(am),
                auc_std: (!aucs.is_empty()).then_some(asd),
                auc_count: aucs.len(),
            });
        }
    }

    Ok(ExperimentOutput {
        rows,
        report: ExperimentReport {
            seed: cfg.seed,
            instances: cfg.instances,
            splits: cfg.splits,
            threshold_grid: cfg.threshold_grid.clone(),
            failures,
            summaries,
        },
        predictions,
        timings: timing
            .into_iter()
            .map(|(m, (runs, total))| MethodTiming {
                method: m.name().into(),
                runs,
                total_seconds: total,
            })
            .collect(),
    })
}
