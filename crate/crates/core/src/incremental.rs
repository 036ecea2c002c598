//! Inc-kSGD: train one kSGD model per data block, in stream order, and
//! predict by an unweighted majority vote over the block models.

use serde::Serialize;

use crate::error::{check_dims, Error, Result};
use crate::kmeans::KMeansOptions;
use crate::linear::{LabeledPoint, SgdParams};
use crate::local::{ksgd_train_with, KSgdModel};
use crate::seed::block_seed;
use crate::Classifier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockProvenance {
    pub block_id: u64,
    pub points: u64,
}

/// How many clusters each block is split into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KChoice {
    Fixed(usize),
    /// `ceil(block_points / cluster_size)`
    ClusterSize(usize),
}

pub fn k_from_cluster_size(block_points: usize, cluster_size: usize) -> usize {
    block_points.div_ceil(cluster_size.max(1)).max(1)
}

impl KChoice {
    pub fn resolve(self, block_points: usize) -> usize {
        match self {
            KChoice::Fixed(k) => k,
            KChoice::ClusterSize(s) => k_from_cluster_size(block_points, s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncKSgdModel {
    members: Vec<KSgdModel>,
    provenance: Vec<BlockProvenance>,
    dims: usize,
    labels: Vec<String>,
    params: SgdParams,
}

impl IncKSgdModel {
    /// Labels default to the decimal class ids `0..n_classes`.
    pub fn new(
        members: Vec<KSgdModel>,
        provenance: Vec<BlockProvenance>,
        n_classes: u32,
        params: SgdParams,
    ) -> Result<Self> {
        let labels = (0..n_classes).map(|c| c.to_string()).collect();
        Self::with_parts(members, provenance, labels, params)
    }

    pub(crate) fn with_parts(
        members: Vec<KSgdModel>,
        provenance: Vec<BlockProvenance>,
        labels: Vec<String>,
        params: SgdParams,
    ) -> Result<Self> {
        let first = members.first().ok_or_else(|| Error::invalid("an ensemble needs at least one member"))?;
        let dims = first.dimensionality();
        for m in &members {
            check_dims(dims, m.dimensionality())?;
        }
        check_dims(members.len(), provenance.len())?;
        let model = IncKSgdModel { members, provenance, dims, labels, params };
        model.check_labels(&model.labels)?;
        Ok(model)
    }

    fn check_labels(&self, labels: &[String]) -> Result<()> {
        let max = self
            .members
            .iter()
            .flat_map(|m| m.locals())
            .flat_map(|l| l.model.classes().iter().copied())
            .max()
            .unwrap_or(0);
        if labels.len() <= max as usize {
            return Err(Error::invalid(format!(
                "label vocabulary has {} entries but class id {max} is used",
                labels.len()
            )));
        }
        let mut sorted: Vec<&String> = labels.iter().collect();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("label vocabulary has duplicate entries"));
        }
        Ok(())
    }

    /// Replaces the class-id-to-label vocabulary. Must cover every class id
    /// any member predicts, without duplicates.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        self.check_labels(&labels)?;
        self.labels = labels;
        Ok(self)
    }

    pub fn members(&self) -> &[KSgdModel] {
        &self.members
    }

    pub fn provenance(&self) -> &[BlockProvenance] {
        &self.provenance
    }

    pub fn n_classes(&self) -> u32 {
        self.labels.len() as u32
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, class: u32) -> &str {
        &self.labels[class as usize]
    }

    pub fn params(&self) -> &SgdParams {
        &self.params
    }

    /// Every member's vote for `x`, in member order.
    pub fn votes(&self, x: &[f32]) -> Result<Vec<u32>> {
        check_dims(self.dims, x.len())?;
        self.members.iter().map(|m| m.predict(x)).collect()
    }
}

impl Classifier for IncKSgdModel {
    fn dimensionality(&self) -> usize {
        self.dims
    }

    fn predict(&self, x: &[f32]) -> Result<u32> {
        let votes = self.votes(x)?;
        Ok(majority_vote(&votes).expect("ensemble has members"))
    }
}

/// Most frequent class; among tied classes, the one voted first.
pub fn majority_vote(votes: &[u32]) -> Option<u32> {
    // (class, count) in order of first appearance
    let mut tally: Vec<(u32, usize)> = Vec::new();
    for &v in votes {
        match tally.iter_mut().find(|(c, _)| *c == v) {
            Some(entry) => entry.1 += 1,
            None => tally.push((v, 1)),
        }
    }
    let mut best: Option<(u32, usize)> = None;
    for (c, n) in tally {
        if best.is_none_or(|(_, b)| n > b) {
            best = Some((c, n));
        }
    }
    best.map(|(c, _)| c)
}

#[derive(Debug, Clone)]
pub struct IncOptions {
    pub k: KChoice,
    pub kmeans: KMeansOptions,
    /// Global class count; defaults to one past the largest label seen.
    pub n_classes: Option<u32>,
}

impl IncOptions {
    pub fn fixed_k(k: usize) -> Self {
        IncOptions { k: KChoice::Fixed(k), kmeans: KMeansOptions::default(), n_classes: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockReport {
    pub block_id: u64,
    pub points: u64,
    pub k: usize,
    pub local_models: usize,
    pub local_sizes: Vec<u64>,
    pub local_classes: Vec<usize>,
    pub omega: f64,
    pub partition_seconds: f64,
    pub sgd_seconds: f64,
}

pub fn inc_train<S, B>(source: S, k: usize, params: &SgdParams) -> Result<IncKSgdModel>
where
    S: IntoIterator<Item = Result<B>>,
    B: AsRef<[LabeledPoint]>,
{
    inc_train_with(source, params, &IncOptions::fixed_k(k)).map(|(m, _)| m)
}

/// Pulls blocks one at a time; each block is dropped before the next is
/// requested, so at most one block of training data is resident.
pub fn inc_train_with<S, B>(
    source: S,
    params: &SgdParams,
    opts: &IncOptions,
) -> Result<(IncKSgdModel, Vec<BlockReport>)>
where
    S: IntoIterator<Item = Result<B>>,
    B: AsRef<[LabeledPoint]>,
{
    params.validate()?;
    let mut members = Vec::new();
    let mut provenance = Vec::new();
    let mut reports = Vec::new();
    let mut max_label = 0u32;
    let mut dims = None;

    for (t, block) in source.into_iter().enumerate() {
        let block = block?;
        let points = block.as_ref();
        if points.is_empty() {
            return Err(Error::invalid(format!("block {t} is empty")));
        }
        match dims {
            None => dims = Some(points[0].dims()),
            Some(d) => check_dims(d, points[0].dims())?,
        }
        let k = opts.k.resolve(points.len());
        if points.len() < k || k == 0 {
            return Err(Error::BlockTooSmall { block: t, size: points.len(), k });
        }
        max_label = max_label.max(points.iter().map(|p| p.label).max().unwrap_or(0));

        let member_params = params.with_seed(block_seed(params.seed, t));
        let (member, timings) = ksgd_train_with(points, k, &member_params, &opts.kmeans)?;
        log::debug!(
            "block {t}: {} points, {} local models, {:.3}s",
            points.len(),
            member.locals().len(),
            timings.partition_seconds + timings.sgd_seconds
        );
        reports.push(BlockReport {
            block_id: t as u64,
            points: points.len() as u64,
            k,
            local_models: member.locals().len(),
            local_sizes: member.locals().iter().map(|l| l.train_count).collect(),
            local_classes: member.locals().iter().map(|l| l.model.classes().len()).collect(),
            omega: member.omega(),
            partition_seconds: timings.partition_seconds,
            sgd_seconds: timings.sgd_seconds,
        });
        provenance.push(BlockProvenance { block_id: t as u64, points: points.len() as u64 });
        members.push(member);
    }

    if members.is_empty() {
        return Err(Error::NoData);
    }
    let n_classes = opts.n_classes.unwrap_or(0).max(max_label + 1);
    let model = IncKSgdModel::new(members, provenance, n_classes, *params)?;
    Ok((model, reports))
}
