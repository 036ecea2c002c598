//! Accuracy and timing evaluation, the config-comparison bench, and a
//! synthetic Gaussian-blob generator for desk-scale experiments.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{check_dims, Error, Result};
use crate::incremental::{inc_train_with, IncOptions, KChoice};
use crate::io::{record_size, split_blocks, BlockSpec};
use crate::kmeans::KMeansOptions;
use crate::linear::{LabeledPoint, SgdParams};
use crate::Classifier;

pub const METRICS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class: u32,
    pub support: u64,
    pub correct: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub n_points: u64,
    pub correct: u64,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[true][predicted]`; omitted above the class-count threshold.
    pub confusion: Option<Vec<Vec<u64>>>,
    pub predict_seconds: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub confusion_max_classes: usize,
    pub chunk: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { confusion_max_classes: 100, chunk: 8192 }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores `model` on a stream of labeled points, predicting one chunk at a
/// time in parallel. All counts are integers.
pub fn evaluate<C, I>(model: &C, source: I, opts: &EvalOptions) -> Result<Metrics>
where
    C: Classifier + ?Sized,
    I: IntoIterator<Item = Result<LabeledPoint>>,
{
    let mut support: Vec<u64> = Vec::new();
    let mut hits: Vec<u64> = Vec::new();
    let mut confusion: Vec<Vec<u64>> = Vec::new();
    let mut n = 0u64;
    let mut predict_seconds = 0.0;
    let mut chunk: Vec<LabeledPoint> = Vec::with_capacity(opts.chunk);
    let mut source = source.into_iter().peekable();

    while source.peek().is_some() {
        chunk.clear();
        while chunk.len() < opts.chunk.max(1) {
            match source.next() {
                Some(p) => chunk.push(p?),
                None => break,
            }
        }
        for p in &chunk {
            check_dims(model.dimensionality(), p.dims())?;
        }
        let xs: Vec<&[f32]> = chunk.iter().map(|p| p.features.as_slice()).collect();
        let start = Instant::now();
        let preds = model.predict_batch(&xs)?;
        predict_seconds += start.elapsed().as_secs_f64();

        for (p, &pred) in chunk.iter().zip(&preds) {
            let (t, q) = (p.label as usize, pred as usize);
            let size = t.max(q) + 1;
            if support.len() < size {
                support.resize(size, 0);
                hits.resize(size, 0);
            }
            support[t] += 1;
            if t == q {
                hits[t] += 1;
            }
            if size <= opts.confusion_max_classes {
                if confusion.len() < size {
                    confusion.resize_with(size, Vec::new);
                }
                let row = &mut confusion[t];
                if row.len() <= q {
                    row.resize(q + 1, 0);
                }
                row[q] += 1;
            }
        }
        n += chunk.len() as u64;
    }
    if n == 0 {
        return Err(Error::NoData);
    }

    let classes = support.len();
    let confusion = (classes <= opts.confusion_max_classes).then(|| {
        confusion.resize_with(classes, Vec::new);
        for row in confusion.iter_mut() {
            row.resize(classes, 0);
        }
        confusion
    });
    let correct: u64 = hits.iter().sum();
    let per_class = (0..classes)
        .filter(|&c| support[c] > 0)
        .map(|c| ClassMetrics {
            class: c as u32,
            support: support[c],
            correct: hits[c],
            accuracy: ratio(hits[c], support[c]),
        })
        .collect();
    Ok(Metrics {
        n_points: n,
        correct,
        accuracy: ratio(correct, n),
        per_class,
        confusion,
        predict_seconds,
    })
}

/// Gaussian blobs with unit variance. Class means lie on a common sphere
/// around the origin at pairwise distance >= `separation`; points are
/// emitted in a seeded random order.
pub fn make_blobs(
    n_classes: usize,
    points_per_class: usize,
    n_dims: usize,
    separation: f64,
    seed: u64,
) -> Result<Vec<LabeledPoint>> {
    if n_classes == 0 || points_per_class == 0 || n_dims == 0 {
        return Err(Error::invalid("class count, points per class and dimensionality must be positive"));
    }
    if !(separation.is_finite() && separation > 0.0) {
        return Err(Error::invalid("separation must be > 0"));
    }
    if n_dims == 1 && n_classes > 2 {
        return Err(Error::invalid("at most two classes fit on a 1-D sphere"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means = blob_means(n_classes, n_dims, separation, &mut rng);
    let mut out = Vec::with_capacity(n_classes * points_per_class);
    for (c, mu) in means.iter().enumerate() {
        for _ in 0..points_per_class {
            let x = mu
                .iter()
                .map(|&m| (m + rng.sample::<f64, _>(StandardNormal)) as f32)
                .collect();
            out.push(LabeledPoint { features: x, label: c as u32 });
        }
    }
    out.shuffle(&mut rng);
    Ok(out)
}

fn blob_means(n_classes: usize, n_dims: usize, separation: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut radius = separation;
    loop {
        let mut means: Vec<Vec<f64>> = Vec::with_capacity(n_classes);
        let mut tries = 0;
        while means.len() < n_classes && tries < 1000 * n_classes {
            tries += 1;
            let dir: Vec<f64> = (0..n_dims).map(|_| rng.sample(StandardNormal)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let cand: Vec<f64> = dir.iter().map(|v| v / norm * radius).collect();
            let far = means.iter().all(|m| {
                m.iter().zip(&cand).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() >= separation * separation
            });
            if far {
                means.push(cand);
            }
        }
        if means.len() == n_classes {
            return means;
        }
        radius *= 1.25;
    }
}

/// Seeded random holdout: the first `round(n * test_fraction)` points of a
/// shuffle form the test set.
pub fn train_test_split(
    mut points: Vec<LabeledPoint>,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledPoint>, Vec<LabeledPoint>)> {
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(Error::invalid("test fraction must be within [0, 1]"));
    }
    points.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (points.len() as f64 * test_fraction).round() as usize;
    let train = points.split_off(n_test);
    Ok((train, points))
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub label: String,
    pub k: KChoice,
    pub blocks: usize,
    pub params: SgdParams,
    pub kmeans: KMeansOptions,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub label: String,
    pub k: String,
    pub blocks: usize,
    pub members: usize,
    pub local_models: usize,
    pub threads: usize,
    pub train_seconds: f64,
    pub predict_seconds: f64,
    pub peak_block_points: usize,
    pub peak_block_bytes: usize,
    pub n_test: u64,
    pub correct: u64,
    pub accuracy: f64,
}

/// Trains every config on the same training set and scores it on the same
/// test set, one row per config.
pub fn bench_compare(
    train: &[LabeledPoint],
    test: &[LabeledPoint],
    configs: &[BenchConfig],
) -> Result<Vec<BenchRow>> {
    if configs.is_empty() {
        return Err(Error::invalid("bench needs at least one config"));
    }
    let first = train.first().ok_or(Error::NoData)?;
    let dims = first.dims();
    configs.iter().map(|cfg| bench_one(train, test, dims, cfg)).collect()
}

fn bench_one(train: &[LabeledPoint], test: &[LabeledPoint], dims: usize, cfg: &BenchConfig) -> Result<BenchRow> {
    if cfg.blocks == 0 {
        return Err(Error::invalid(format!("config {}: blocks must be >= 1", cfg.label)));
    }
    let block_size = train.len().div_ceil(cfg.blocks);
    let opts = IncOptions { k: cfg.k, kmeans: cfg.kmeans, n_classes: None };

    let start = Instant::now();
    let source = split_blocks(train.iter().cloned().map(Ok), BlockSpec::new(block_size)?);
    let (model, reports) = crate::with_threads(cfg.threads, || inc_train_with(source, &cfg.params, &opts))??;
    let train_seconds = start.elapsed().as_secs_f64();

    let metrics = crate::with_threads(cfg.threads, || {
        evaluate(&model, test.iter().cloned().map(Ok), &EvalOptions::default())
    })??;
    let peak = reports.iter().map(|r| r.points as usize).max().unwrap_or(0);
    Ok(BenchRow {
        label: cfg.label.clone(),
        k: match cfg.k {
            KChoice::Fixed(k) => k.to_string(),
            KChoice::ClusterSize(s) => format!("cluster-size:{s}"),
        },
        blocks: reports.len(),
        members: model.members().len(),
        local_models: model.members().iter().map(|m| m.locals().len()).sum(),
        threads: cfg.threads,
        train_seconds,
        predict_seconds: metrics.predict_seconds,
        peak_block_points: peak,
        peak_block_bytes: peak * record_size(dims),
        n_test: metrics.n_points,
        correct: metrics.correct,
        accuracy: metrics.accuracy,
    })
}
