//! Hinge-loss objective, its subgradient, the binary SGD solver and the
//! one-vs-rest multiclass wrapper built on top of it.
//!
//! Features and stored planes are `f32`; every dot product and every weight
//! update during training is carried out in `f64`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::seed::class_seed;
use crate::Classifier;

/// A dense feature vector with an integer class id.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub features: Vec<f32>,
    pub label: u32,
}

impl LabeledPoint {
    pub fn new(features: Vec<f32>, label: u32) -> Result<Self> {
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("feature {i} is not finite")));
        }
        Ok(LabeledPoint { features, label })
    }

    pub fn dims(&self) -> usize {
        self.features.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// eta_t = eta
    Constant,
    /// eta_t = eta / (1 + lambda * eta * t), t counting every update of the run
    InverseScaling,
}

impl Schedule {
    pub(crate) fn to_byte(self) -> u8 {
        match self {
            Schedule::Constant => 0,
            Schedule::InverseScaling => 1,
        }
    }

    pub(crate) fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Schedule::Constant),
            1 => Some(Schedule::InverseScaling),
            _ => None,
        }
    }
}

/// SGD hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdParams {
    pub lambda: f64,
    pub eta: f64,
    pub epochs: u32,
    pub seed: u64,
    pub schedule: Schedule,
}

impl Default for SgdParams {
    fn default() -> Self {
        SgdParams {
            lambda: 1e-4,
            eta: 0.001,
            epochs: 50,
            seed: 42,
            schedule: Schedule::Constant,
        }
    }
}

impl SgdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::invalid(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SgdParams { seed, ..self }
    }

    fn rate(&self, step: u64) -> f64 {
        match self.schedule {
            Schedule::Constant => self.eta,
            Schedule::InverseScaling => self.eta / (1.0 + self.lambda * self.eta * step as f64),
        }
    }
}

pub(crate) fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// `w . x` with `f32` operands accumulated in `f64`.
pub fn dot_f32(w: &[f32], x: &[f32]) -> f64 {
    w.iter().zip(x).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum()
}

fn dot_mixed(w: &[f64], x: &[f32]) -> f64 {
    w.iter().zip(x).map(|(&a, &b)| a * f64::from(b)).sum()
}

fn check_sign(y: f64) -> Result<()> {
    if y == 1.0 || y == -1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("binary label must be +1 or -1, got {y}")))
    }
}

/// `max(0, 1 - y (w . x))`
pub fn hinge_loss(w: &[f64], x: &[f64], y: f64) -> Result<f64> {
    check_dims(w.len(), x.len())?;
    check_sign(y)?;
    Ok((1.0 - y * dot(w, x)).max(0.0))
}

/// Regularized empirical risk `lambda/2 |w|^2 + mean hinge loss`.
pub fn objective(w: &[f64], data: &[(&[f64], f64)], lambda: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::NoData);
    }
    let mut loss = 0.0;
    for (x, y) in data {
        loss += hinge_loss(w, x, *y)?;
    }
    Ok(0.5 * lambda * dot(w, w) + loss / data.len() as f64)
}

/// Subgradient of `lambda/2 |w|^2 + max(0, 1 - y (w . x))` at `w`.
///
/// At margin exactly 1 the hinge term contributes nothing.
pub fn subgradient(w: &[f64], x: &[f64], y: f64, lambda: f64) -> Result<Vec<f64>> {
    check_dims(w.len(), x.len())?;
    check_sign(y)?;
    let active = y * dot(w, x) < 1.0;
    Ok(w.iter()
        .zip(x)
        .map(|(wi, xi)| if active { lambda * wi - y * xi } else { lambda * wi })
        .collect())
}

/// Trains one separating plane through the origin.
///
/// Weights start at zero. Each epoch visits every point once in an order
/// drawn from a generator seeded with `params.seed`, applying
/// `w <- w - eta_t * subgradient(w, x, y, lambda)` per point.
pub fn sgd_train_binary(xs: &[&[f32]], ys: &[f64], params: &SgdParams) -> Result<Vec<f64>> {
    params.validate()?;
    if xs.is_empty() {
        return Err(Error::NoData);
    }
    check_dims(xs.len(), ys.len())?;
    let dims = xs[0].len();
    for x in xs {
        check_dims(dims, x.len())?;
    }
    for &y in ys {
        check_sign(y)?;
    }

    // w = scale * v keeps the shrink step O(1).
    let mut v = vec![0.0f64; dims];
    let mut scale = 1.0f64;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut step = 0u64;

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (x, y) = (xs[i], ys[i]);
            let eta = params.rate(step);
            step += 1;
            let margin = y * scale * dot_mixed(&v, x);

            let shrink = 1.0 - eta * params.lambda;
            if shrink == 0.0 {
                v.iter_mut().for_each(|vi| *vi = 0.0);
                scale = 1.0;
            } else {
                scale *= shrink;
            }
            if margin < 1.0 {
                let c = eta * y / scale;
                for (vi, &xi) in v.iter_mut().zip(x.iter()) {
                    *vi += c * f64::from(xi);
                }
            }
            if scale.abs() < 1e-100 {
                v.iter_mut().for_each(|vi| *vi *= scale);
                scale = 1.0;
            }
        }
    }
    Ok(v.into_iter().map(|vi| vi * scale).collect())
}

/// One plane per class seen in training. Classes absent from the training
/// data have no plane and are never predicted.
#[derive(Debug, Clone, PartialEq)]
pub struct OvrModel {
    dims: usize,
    classes: Vec<u32>,
    planes: Vec<Vec<f32>>,
}

impl OvrModel {
    pub fn from_planes(dims: usize, mut planes: Vec<(u32, Vec<f32>)>) -> Result<Self> {
        if planes.is_empty() {
            return Err(Error::invalid("a one-vs-rest model needs at least one class"));
        }
        planes.sort_by_key(|(c, _)| *c);
        if planes.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("duplicate class in one-vs-rest model"));
        }
        for (_, p) in &planes {
            check_dims(dims, p.len())?;
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite weight"));
            }
        }
        let (classes, planes) = planes.into_iter().unzip();
        Ok(OvrModel { dims, classes, planes })
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn planes(&self) -> &[Vec<f32>] {
        &self.planes
    }

    pub fn plane(&self, class: u32) -> Option<&[f32]> {
        self.classes
            .binary_search(&class)
            .ok()
            .map(|i| self.planes[i].as_slice())
    }

    pub fn scores(&self, x: &[f32]) -> Result<Vec<f64>> {
        check_dims(self.dims, x.len())?;
        Ok(self.planes.iter().map(|w| dot_f32(w, x)).collect())
    }
}

impl Classifier for OvrModel {
    fn dimensionality(&self) -> usize {
        self.dims
    }

    /// Highest score wins; ties go to the smallest class id.
    fn predict(&self, x: &[f32]) -> Result<u32> {
        check_dims(self.dims, x.len())?;
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, w) in self.planes.iter().enumerate() {
            let s = dot_f32(w, x);
            if s > best_score {
                best = i;
                best_score = s;
            }
        }
        Ok(self.classes[best])
    }
}

pub fn ovr_train(data: &[LabeledPoint], params: &SgdParams) -> Result<OvrModel> {
    let refs: Vec<&LabeledPoint> = data.iter().collect();
    ovr_train_refs(&refs, params)
}

/// One-vs-rest training over a borrowed view of the data. Binary problems
/// run in parallel, each seeded from `params.seed` and its class id alone.
pub fn ovr_train_refs(data: &[&LabeledPoint], params: &SgdParams) -> Result<OvrModel> {
    params.validate()?;
    let first = data.first().ok_or(Error::NoData)?;
    let dims = first.dims();
    for p in data {
        check_dims(dims, p.dims())?;
    }
    let mut classes: Vec<u32> = data.iter().map(|p| p.label).collect();
    classes.sort_unstable();
    classes.dedup();

    let xs: Vec<&[f32]> = data.iter().map(|p| p.features.as_slice()).collect();
    let planes = classes
        .par_iter()
        .map(|&c| {
            let ys: Vec<f64> = data
                .iter()
                .map(|p| if p.label == c { 1.0 } else { -1.0 })
                .collect();
            let p = params.with_seed(class_seed(params.seed, c));
            let w = sgd_train_binary(&xs, &ys, &p)?;
            Ok((c, w.into_iter().map(|v| v as f32).collect()))
        })
        .collect::<Result<Vec<_>>>()?;
    OvrModel::from_planes(dims, planes)
}
