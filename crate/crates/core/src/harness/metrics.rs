use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::graph::HalfVector;

fn restrict(v: &HalfVector, idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v.0[i]).collect()
}

/// F1 of `pred` against `truth` on the entries listed in `restricted_to`,
/// 1 being the positive class. Zero when there are no true positives.
pub fn metric_f1(truth: &HalfVector, pred: &HalfVector, restricted_to: &[usize]) -> Result<f64, HarnessError> {
    check_dims(truth, pred, restricted_to)?;
    let t: Vec<bool> = restrict(truth, restricted_to).iter().map(|&v| v >= 0.5).collect();
    let p: Vec<bool> = restrict(pred, restricted_to).iter().map(|&v| v >= 0.5).collect();
    Ok(f1(&t, &p))
}

pub fn metric_accuracy(truth: &HalfVector, pred: &HalfVector, restricted_to: &[usize]) -> Result<f64, HarnessError> {
    check_dims(truth, pred, restricted_to)?;
    let t: Vec<bool> = restrict(truth, restricted_to).iter().map(|&v| v >= 0.5).collect();
    let p: Vec<bool> = restrict(pred, restricted_to).iter().map(|&v| v >= 0.5).collect();
    Ok(accuracy(&t, &p))
}

/// Rank-based ROC area on `restricted_to`, ties receiving averaged ranks.
/// `None` when the restricted truth holds a single class.
pub fn metric_auc(truth: &HalfVector, scores: &HalfVector, restricted_to: &[usize]) -> Result<Option<f64>, HarnessError> {
    check_dims(truth, scores, restricted_to)?;
    let t: Vec<bool> = restrict(truth, restricted_to).iter().map(|&v| v >= 0.5).collect();
    Ok(auc(&t, &restrict(scores, restricted_to)))
}

fn check_dims(a: &HalfVector, b: &HalfVector, idx: &[usize]) -> Result<(), HarnessError> {
    if a.dim() != b.dim() || idx.iter().any(|&i| i >= a.dim()) {
        return Err(HarnessError::Dimension(format!(
            "vectors of length {} and {} restricted to {} indices",
            a.dim(),
            b.dim(),
            idx.len()
        )));
    }
    Ok(())
}

pub fn f1(truth: &[bool], pred: &[bool]) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fneg = 0usize;
    for (&t, &p) in truth.iter().zip(pred) {
        match (t, p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fneg += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fneg) as f64
}

pub fn accuracy(truth: &[bool], pred: &[bool]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    truth.iter().zip(pred).filter(|(t, p)| t == p).count() as f64 / truth.len() as f64
}

pub fn auc(truth: &[bool], scores: &[f64]) -> Option<f64> {
    let pos = truth.iter().filter(|&&t| t).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &o in &order[start..end] {
            ranks[o] = avg;
        }
        start = end;
    }
    let rank_sum: f64 = truth.iter().zip(&ranks).filter(|(t, _)| **t).map(|(_, r)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Some(u / (pos * neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    F1,
    Accuracy,
}

impl Metric {
    pub fn evaluate(self, truth: &[bool], pred: &[bool]) -> f64 {
        match self {
            Metric::F1 => f1(truth, pred),
            Metric::Accuracy => accuracy(truth, pred),
        }
    }
}

/// Truth of one instance on its unknown entries and the binary prediction
/// made at every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct InstancePredictions {
    pub truth: Vec<bool>,
    pub by_grid: Vec<Vec<bool>>,
}

impl InstancePredictions {
    /// Predictions `score ≥ τ` for each `τ` in `grid`.
    pub fn from_scores(truth: Vec<bool>, scores: &[f64], grid: &[f64]) -> Self {
        let by_grid = grid
            .iter()
            .map(|&tau| scores.iter().map(|&s| s >= tau).collect())
            .collect();
        InstancePredictions { truth, by_grid }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub mean: f64,
    pub std: f64,
    /// Selected grid value per split.
    pub selected: Vec<f64>,
    pub per_split: Vec<f64>,
}

/// Grid index with the best mean metric over `train`; ties go to the lowest
/// index.
pub fn select_grid_index(train: &[&InstancePredictions], grid_len: usize, metric: Metric) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for g in 0..grid_len {
        let value = train
            .iter()
            .map(|inst| metric.evaluate(&inst.truth, &inst.by_grid[g]))
            .sum::<f64>()
            / train.len() as f64;
        if value > best_value {
            best = g;
            best_value = value;
        }
    }
    best
}

/// Splits the instances into random halves `splits` times, selects the grid
/// value on one half and scores it on the other, and averages over splits.
pub fn tune_and_score<R: Rng + ?Sized>(
    instances: &[InstancePredictions],
    grid: &[f64],
    splits: usize,
    metric: Metric,
    rng: &mut R,
) -> Result<TuneReport, HarnessError> {
    let r = instances.len();
    if r < 2 || !r.is_multiple_of(2) {
        return Err(HarnessError::Config(format!("need an even number of instances >= 2, got {r}")));
    }
    if grid.is_empty() || splits == 0 {
        return Err(HarnessError::Config("grid and split count must be non-empty".into()));
    }
    if instances.iter().any(|i| i.by_grid.len() != grid.len() || i.by_grid.iter().any(|p| p.len() != i.truth.len())) {
        return Err(HarnessError::Dimension("predictions do not match the grid".into()));
    }
    let mut order: Vec<usize> = (0..r).collect();
    let mut per_split = Vec::with_capacity(splits);
    let mut selected = Vec::with_capacity(splits);
    for _ in 0..splits {
        order.shuffle(rng);
        let (train_idx, test_idx) = order.split_at(r / 2);
        let train: Vec<&InstancePredictions> = train_idx.iter().map(|&i| &instances[i]).collect();
        let g = select_grid_index(&train, grid.len(), metric);
        let test = test_idx
            .iter()
            .map(|&i| metric.evaluate(&instances[i].truth, &instances[i].by_grid[g]))
            .sum::<f64>()
            / test_idx.len() as f64;
        selected.push(grid[g]);
        per_split.push(test);
    }
    let (mean, std) = mean_std(&per_split);
    Ok(TuneReport {
        mean,
        std,
        selected,
        per_split,
    })
}

/// Mean and (population) standard deviation; `(NaN, NaN)` on empty input.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = values.iter().sum::<f64>() / values.len() as f64;
    let v = values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / values.len() as f64;
    (m, v.sqrt())
}

/// `{0.05, 0.10, …, 0.95}`.
pub fn default_threshold_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}
