//! kSGD: one one-vs-rest model per k-means cluster of a block, queried
//! through the nearest cluster center.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{check_dims, Error, Result};
use crate::kmeans::{partition_block, CentroidSet, KMeansOptions};
use crate::linear::{ovr_train_refs, LabeledPoint, OvrModel, SgdParams};
use crate::seed::{cluster_seed, kmeans_seed};
use crate::Classifier;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalModel {
    pub center: Vec<f32>,
    pub model: OvrModel,
    pub train_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSgdModel {
    locals: Vec<LocalModel>,
    centers: CentroidSet,
    k_requested: usize,
    params: SgdParams,
}

impl KSgdModel {
    pub fn new(locals: Vec<LocalModel>, k_requested: usize, params: SgdParams) -> Result<Self> {
        if locals.is_empty() {
            return Err(Error::invalid("a kSGD model needs at least one local model"));
        }
        let dims = locals[0].model.dimensionality();
        for l in &locals {
            check_dims(dims, l.model.dimensionality())?;
            check_dims(dims, l.center.len())?;
            if l.train_count == 0 {
                return Err(Error::invalid("local model trained on zero points"));
            }
        }
        let centers = CentroidSet::new(&locals.iter().map(|l| l.center.clone()).collect::<Vec<_>>())?;
        Ok(KSgdModel { locals, centers, k_requested, params })
    }

    pub fn locals(&self) -> &[LocalModel] {
        &self.locals
    }

    pub fn centers(&self) -> &CentroidSet {
        &self.centers
    }

    pub fn k_requested(&self) -> usize {
        self.k_requested
    }

    pub fn params(&self) -> &SgdParams {
        &self.params
    }

    /// Index of the local model a point is routed to.
    pub fn route(&self, x: &[f32]) -> Result<usize> {
        crate::kmeans::nearest_center(x, &self.centers)
    }

    /// Mean classes per local model divided by `p / k`, with `p` the number
    /// of distinct classes across all local models. Diagnostic only.
    pub fn omega(&self) -> f64 {
        let mut all: Vec<u32> = self.locals.iter().flat_map(|l| l.model.classes().iter().copied()).collect();
        all.sort_unstable();
        all.dedup();
        let k = self.locals.len() as f64;
        let mean = self.locals.iter().map(|l| l.model.classes().len()).sum::<usize>() as f64 / k;
        mean / (all.len() as f64 / k)
    }
}

impl Classifier for KSgdModel {
    fn dimensionality(&self) -> usize {
        self.centers.dims()
    }

    fn predict(&self, x: &[f32]) -> Result<u32> {
        let i = self.route(x)?;
        self.locals[i].model.predict(x)
    }
}

/// Wall-clock split of one kSGD training run.
#[derive(Debug, Clone, Copy, Default)]
pub struct KSgdTimings {
    pub partition_seconds: f64,
    pub sgd_seconds: f64,
}

pub fn ksgd_train(block: &[LabeledPoint], k: usize, params: &SgdParams) -> Result<KSgdModel> {
    ksgd_train_with(block, k, params, &KMeansOptions::default()).map(|(m, _)| m)
}

/// Partitions the block and trains the local models in parallel on the
/// current rayon pool. Cluster `i` trains with seed
/// `cluster_seed(params.seed, i)`, so the result does not depend on the
/// number of workers.
pub fn ksgd_train_with(
    block: &[LabeledPoint],
    k: usize,
    params: &SgdParams,
    kmeans: &KMeansOptions,
) -> Result<(KSgdModel, KSgdTimings)> {
    params.validate()?;
    let start = Instant::now();
    let parts = partition_block(block, k, kmeans_seed(params.seed), kmeans)?;
    let partition_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let locals = parts
        .into_par_iter()
        .enumerate()
        .map(|(i, part)| {
            let view: Vec<&LabeledPoint> = part.points(block).collect();
            let model = ovr_train_refs(&view, &params.with_seed(cluster_seed(params.seed, i)))?;
            Ok(LocalModel {
                train_count: part.indices.len() as u64,
                center: part.center,
                model,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sgd_seconds = start.elapsed().as_secs_f64();

    let model = KSgdModel::new(locals, k, *params)?;
    Ok((model, KSgdTimings { partition_seconds, sgd_seconds }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmeans::sq_dist;
    use crate::linear::ovr_train;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blobs(centers: &[[f32; 2]], per: usize, seed: u64) -> Vec<LabeledPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for (c, m) in centers.iter().enumerate() {
            for _ in 0..per {
                let x = vec![m[0] + rng.random_range(-1.0..1.0), m[1] + rng.random_range(-1.0..1.0)];
                out.push(LabeledPoint::new(x, c as u32).unwrap());
            }
        }
        out
    }

    fn mixed(seed: u64) -> Vec<LabeledPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..300)
            .map(|_| {
                let x: Vec<f32> = (0..3).map(|_| rng.random_range(-10.0..10.0)).collect();
                let label = if x[0] > 0.0 { 0 } else if x[1] > 0.0 { 1 } else { 2 };
                LabeledPoint::new(x, label).unwrap()
            })
            .collect()
    }

    #[test]
    fn k1_matches_global_ovr() {
        let data = mixed(1);
        let params = SgdParams { epochs: 5, ..Default::default() };
        let local = ksgd_train(&data, 1, &params).unwrap();
        let global = ovr_train(&data, &params.with_seed(cluster_seed(params.seed, 0))).unwrap();
        assert_eq!(local.locals().len(), 1);
        assert_eq!(local.locals()[0].model, global);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x: Vec<f32> = (0..3).map(|_| rng.random_range(-20.0..20.0)).collect();
            assert_eq!(local.predict(&x).unwrap(), global.predict(&x).unwrap());
        }
    }

    #[test]
    fn separated_blobs_give_pure_locals() {
        let data = blobs(&[[0.0, 0.0], [40.0, 0.0], [0.0, 40.0]], 30, 3);
        let m = ksgd_train(&data, 3, &SgdParams::default()).unwrap();
        assert_eq!(m.locals().len(), 3);
        for l in m.locals() {
            assert_eq!(l.model.classes().len(), 1);
            // a query sitting on the center goes to that center's single class
            assert_eq!(m.predict(&l.center).unwrap(), l.model.classes()[0]);
        }
        assert!((m.omega() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn worker_count_does_not_change_the_model() {
        let data = mixed(4);
        let params = SgdParams { epochs: 3, ..Default::default() };
        let one = crate::with_threads(1, || ksgd_train(&data, 4, &params)).unwrap().unwrap();
        let four = crate::with_threads(4, || ksgd_train(&data, 4, &params)).unwrap().unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn routing_matches_brute_force() {
        let data = mixed(5);
        let m = ksgd_train(&data, 6, &SgdParams { epochs: 3, ..Default::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let x: Vec<f32> = (0..3).map(|_| rng.random_range(-12.0..12.0)).collect();
            let d: Vec<f64> = m.locals().iter().map(|l| sq_dist(&x, &l.center)).collect();
            let best = d.iter().cloned().fold(f64::INFINITY, f64::min);
            let idx = d.iter().position(|&v| v == best).unwrap();
            let model = &m.locals()[idx].model;
            let scores = model.scores(&x).unwrap();
            let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let expected = model.classes()[scores.iter().position(|&s| s == top).unwrap()];
            assert_eq!(m.predict(&x).unwrap(), expected);
        }
    }

    #[test]
    fn batch_matches_single_calls() {
        let data = mixed(7);
        let m = ksgd_train(&data, 3, &SgdParams { epochs: 2, ..Default::default() }).unwrap();
        let xs: Vec<&[f32]> = data.iter().map(|p| p.features.as_slice()).collect();
        let batch = m.predict_batch(&xs).unwrap();
        let seq: Vec<u32> = xs.iter().map(|x| m.predict(x).unwrap()).collect();
        assert_eq!(batch, seq);
        assert_eq!(m.predict_batch(&xs[..1]).unwrap(), vec![m.predict(xs[0]).unwrap()]);
        assert!(m.predict_batch(&[]).unwrap().is_empty());
        assert!(m.predict(&[1.0]).is_err());
    }

    #[test]
    fn too_small_block_is_rejected() {
        let data = mixed(8);
        assert!(ksgd_train(&data[..2], 3, &SgdParams::default()).is_err());
    }

    #[test]
    fn training_points_route_to_their_cluster() {
        let data = mixed(9);
        let params = SgdParams { epochs: 1, ..Default::default() };
        let m = ksgd_train(&data, 5, &params).unwrap();
        let parts = partition_block(&data, 5, kmeans_seed(params.seed), &KMeansOptions::default()).unwrap();
        for (i, part) in parts.iter().enumerate() {
            for p in part.points(&data) {
                assert_eq!(m.route(&p.features).unwrap(), i);
            }
        }
    }
}
