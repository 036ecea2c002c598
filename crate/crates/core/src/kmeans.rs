//! k-means partitioning of a data block (Lloyd and mini-batch variants) and
//! nearest-center routing.
//!
//! Centers are kept as `f32`, the same width as the features they are
//! compared against; sums and distances are accumulated in `f64`.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::linear::LabeledPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KMeansMode {
    Lloyd,
    MiniBatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub mode: KMeansMode,
    pub max_iters: usize,
    /// Only used by [`KMeansMode::MiniBatch`].
    pub batch_size: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            mode: KMeansMode::Lloyd,
            max_iters: 100,
            batch_size: 1024,
        }
    }
}

/// `k` centers of a common dimensionality, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet {
    dims: usize,
    data: Vec<f32>,
}

impl CentroidSet {
    pub fn new(centers: &[Vec<f32>]) -> Result<Self> {
        let first = centers
            .first()
            .ok_or_else(|| Error::invalid("a centroid set needs at least one center"))?;
        let dims = first.len();
        let mut data = Vec::with_capacity(dims * centers.len());
        for c in centers {
            check_dims(dims, c.len())?;
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite center coordinate"));
            }
            data.extend_from_slice(c);
        }
        Ok(CentroidSet { dims, data })
    }

    pub fn k(&self) -> usize {
        self.data.len().checked_div(self.dims).unwrap_or(0)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn center(&self, i: usize) -> &[f32] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dims.max(1))
    }

    fn nearest_unchecked(&self, x: &[f32]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.iter().enumerate() {
            if let Some(d) = sq_dist_below(x, c, best.1) {
                best = (i, d);
            }
        }
        best
    }
}

const LANES: usize = 4;

#[inline]
fn accumulate(acc: &mut [f64; LANES], a: &[f32], b: &[f32]) {
    for j in 0..LANES {
        let d = f64::from(a[j]) - f64::from(b[j]);
        acc[j] += d * d;
    }
}

#[inline]
fn lane_total(acc: &[f64; LANES], a: &[f32], b: &[f32]) -> f64 {
    let mut acc = *acc;
    for (j, (&x, &y)) in a.iter().zip(b).enumerate() {
        let d = f64::from(x) - f64::from(y);
        acc[j] += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

/// Squared Euclidean distance accumulated in f64 over four interleaved lanes.
pub fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = [0.0f64; LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        accumulate(&mut acc, x, y);
    }
    lane_total(&acc, ra, rb)
}

/// `sq_dist(a, b)` if it is strictly below `bound`. Partial sums of
/// non-negative terms never decrease, so abandoning early is exact.
fn sq_dist_below(a: &[f32], b: &[f32], bound: f64) -> Option<f64> {
    let mut acc = [0.0f64; LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (n, (x, y)) in ca.zip(cb).enumerate() {
        accumulate(&mut acc, x, y);
        if n % 4 == 3 && (acc[0] + acc[1]) + (acc[2] + acc[3]) >= bound {
            return None;
        }
    }
    let d = lane_total(&acc, ra, rb);
    (d < bound).then_some(d)
}

/// Index of the center closest to `x` in squared Euclidean distance;
/// ties go to the smallest index.
pub fn nearest_center(x: &[f32], centers: &CentroidSet) -> Result<usize> {
    check_dims(centers.dims(), x.len())?;
    Ok(centers.nearest_unchecked(x).0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partitioning {
    pub assignments: Vec<usize>,
    pub cluster_sizes: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centers: CentroidSet,
    pub partitioning: Partitioning,
    /// Total within-cluster squared distance after seeding and after each iteration.
    pub distortions: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Clusters `points` into at most `k` non-empty groups.
///
/// Clusters that are still empty after repair are dropped, so the returned
/// set may hold fewer than `k` centers when the data has fewer than `k`
/// distinct points.
pub fn kmeans_fit(points: &[&[f32]], k: usize, seed: u64, opts: &KMeansOptions) -> Result<KMeansFit> {
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if points.len() < k {
        return Err(Error::invalid(format!(
            "k-means needs at least k = {k} points, got {}",
            points.len()
        )));
    }
    let dims = points[0].len();
    for p in points {
        check_dims(dims, p.len())?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match opts.mode {
        KMeansMode::Lloyd => lloyd(points, k, &mut rng, opts.max_iters),
        KMeansMode::MiniBatch => minibatch(points, k, &mut rng, opts),
    }
}

fn kmeans_pp(points: &[&[f32]], sample: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let dims = points[0].len();
    let mut centers = Vec::with_capacity(k * dims);
    let first = sample[rng.random_range(0..sample.len())];
    centers.extend_from_slice(points[first]);
    let mut min_d: Vec<f64> = sample.iter().map(|&i| sq_dist(points[i], points[first])).collect();

    for _ in 1..k {
        let total: f64 = min_d.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (j, &d) in min_d.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(j);
                    break;
                }
            }
            // rounding can leave target beyond the last partial sum
            pick.unwrap_or_else(|| min_d.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            rng.random_range(0..sample.len())
        };
        let chosen = points[sample[pick]];
        centers.extend_from_slice(chosen);
        min_d
            .par_iter_mut()
            .zip(sample.par_iter())
            .for_each(|(d, &i)| *d = d.min(sq_dist(points[i], chosen)));
    }
    centers
}

fn assign_all(points: &[&[f32]], centers: &CentroidSet) -> Vec<usize> {
    points.par_iter().map(|p| centers.nearest_unchecked(p).0).collect()
}

fn sizes(assign: &[usize], k: usize) -> Vec<usize> {
    let mut s = vec![0; k];
    for &a in assign {
        s[a] += 1;
    }
    s
}

fn distortion(points: &[&[f32]], centers: &CentroidSet, assign: &[usize]) -> f64 {
    points
        .iter()
        .zip(assign)
        .map(|(p, &a)| sq_dist(p, centers.center(a)))
        .sum()
}

/// Cluster means; an empty cluster keeps its previous center.
fn means(points: &[&[f32]], assign: &[usize], prev: &CentroidSet) -> CentroidSet {
    let (k, dims) = (prev.k(), prev.dims());
    let mut sums = vec![0.0f64; k * dims];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assign) {
        counts[a] += 1;
        for (s, &v) in sums[a * dims..(a + 1) * dims].iter_mut().zip(p.iter()) {
            *s += f64::from(v);
        }
    }
    let mut data = prev.data.clone();
    for c in 0..k {
        if counts[c] > 0 {
            let n = counts[c] as f64;
            for j in 0..dims {
                data[c * dims + j] = (sums[c * dims + j] / n) as f32;
            }
        }
    }
    CentroidSet { dims, data }
}

/// Moves each empty cluster's center onto the point of the largest cluster
/// farthest from that cluster's center, then reassigns every point once.
/// Returns whether anything was moved.
fn repair_empty(points: &[&[f32]], centers: &mut CentroidSet, assign: &mut Vec<usize>) -> bool {
    let k = centers.k();
    let mut counts = sizes(assign, k);
    let mut moved = false;
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let largest = (0..k).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap();
        if counts[largest] < 2 {
            break;
        }
        let donor = centers.center(largest).to_vec();
        let far = assign
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == largest)
            .map(|(i, _)| (i, sq_dist(points[i], &donor)))
            .fold((usize::MAX, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
            .0;
        let d = centers.dims;
        centers.data[empty * d..(empty + 1) * d].copy_from_slice(points[far]);
        assign[far] = empty;
        counts[largest] -= 1;
        counts[empty] = 1;
        moved = true;
    }
    if moved {
        *assign = assign_all(points, centers);
    }
    moved
}

/// Removes empty clusters and renumbers the survivors in order.
fn finish(
    points: &[&[f32]],
    centers: CentroidSet,
    assign: Vec<usize>,
    distortions: Vec<f64>,
    iterations: usize,
    converged: bool,
) -> KMeansFit {
    let k = centers.k();
    let counts = sizes(&assign, k);
    let mut remap = vec![usize::MAX; k];
    let mut data = Vec::new();
    let mut cluster_sizes = Vec::new();
    for c in 0..k {
        if counts[c] > 0 {
            remap[c] = cluster_sizes.len();
            cluster_sizes.push(counts[c]);
            data.extend_from_slice(centers.center(c));
        }
    }
    let assignments: Vec<usize> = assign.iter().map(|&a| remap[a]).collect();
    debug_assert_eq!(assignments.len(), points.len());
    KMeansFit {
        centers: CentroidSet { dims: centers.dims, data },
        partitioning: Partitioning { assignments, cluster_sizes },
        distortions,
        iterations,
        converged,
    }
}

/// Per-point state for bound-pruned assignment: the assigned center, a lower
/// bound on the distance to every other center, and the total slack owed to
/// rounding in that bound.
#[derive(Debug, Clone, Copy)]
struct Bound {
    center: usize,
    lower: f64,
    scale: f64,
}

const SLACK: f64 = 1e-9;

/// Full scan; same result and tie rule as `nearest_unchecked`.
fn bound_scan(x: &[f32], centers: &CentroidSet) -> Bound {
    let (mut center, mut best, mut second) = (0, f64::INFINITY, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        if let Some(d) = sq_dist_below(x, c, second) {
            if d < best {
                second = best;
                best = d;
                center = i;
            } else {
                second = d;
            }
        }
    }
    let lower = second.sqrt();
    Bound { center, lower, scale: lower }
}

fn bound_all(points: &[&[f32]], centers: &CentroidSet) -> Vec<Bound> {
    points.par_iter().map(|p| bound_scan(p, centers)).collect()
}

/// Moves every point to its nearest center in `next`, rescanning only the
/// points whose assignment the triangle inequality cannot settle. The
/// result equals a full rescan.
fn advance(points: &[&[f32]], prev: &CentroidSet, next: &CentroidSet, bounds: &mut [Bound]) {
    let k = next.k();
    let drift = (0..k).map(|j| sq_dist(prev.center(j), next.center(j)).sqrt()).fold(0.0, f64::max);
    let half_gap: Vec<f64> = (0..k)
        .map(|j| {
            let nearest = (0..k)
                .filter(|&o| o != j)
                .map(|o| sq_dist(next.center(j), next.center(o)))
                .fold(f64::INFINITY, f64::min);
            0.5 * nearest.sqrt() * (1.0 - SLACK)
        })
        .collect();
    bounds.par_iter_mut().zip(points.par_iter()).for_each(|(b, x)| {
        b.lower -= drift;
        b.scale += drift;
        let limit = (b.lower - SLACK * b.scale).max(half_gap[b.center]);
        let upper = sq_dist(x, next.center(b.center)).sqrt() * (1.0 + SLACK);
        if upper >= limit {
            *b = bound_scan(x, next);
        }
    });
}

fn lloyd(points: &[&[f32]], k: usize, rng: &mut ChaCha8Rng, max_iters: usize) -> Result<KMeansFit> {
    let dims = points[0].len();
    let all: Vec<usize> = (0..points.len()).collect();
    let mut centers = CentroidSet { dims, data: kmeans_pp(points, &all, k, rng) };
    let mut bounds = bound_all(points, &centers);
    let mut assign: Vec<usize> = bounds.iter().map(|b| b.center).collect();
    if repair_empty(points, &mut centers, &mut assign) {
        bounds = bound_all(points, &centers);
    }
    let mut distortions = vec![distortion(points, &centers, &assign)];

    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let mut next = means(points, &assign, &centers);
        advance(points, &centers, &next, &mut bounds);
        let mut next_assign: Vec<usize> = bounds.iter().map(|b| b.center).collect();
        if repair_empty(points, &mut next, &mut next_assign) {
            bounds = bound_all(points, &next);
        }
        distortions.push(distortion(points, &next, &next_assign));
        centers = next;
        if next_assign == assign {
            converged = true;
            break;
        }
        assign = next_assign;
    }
    Ok(finish(points, centers, assign, distortions, iterations, converged))
}

fn minibatch(points: &[&[f32]], k: usize, rng: &mut ChaCha8Rng, opts: &KMeansOptions) -> Result<KMeansFit> {
    if opts.batch_size == 0 {
        return Err(Error::invalid("batch_size must be >= 1"));
    }
    let n = points.len();
    let dims = points[0].len();
    let init_size = n.min((3 * opts.batch_size).max(k));
    let mut sample = index::sample(rng, n, init_size).into_vec();
    sample.sort_unstable();

    let seeded = kmeans_pp(points, &sample, k, rng);
    let mut centers: Vec<f64> = seeded.iter().map(|&v| f64::from(v)).collect();
    let mut counts = vec![0u64; k];
    let mut batch = vec![0usize; opts.batch_size];

    for _ in 0..opts.max_iters {
        for b in batch.iter_mut() {
            *b = rng.random_range(0..n);
        }
        let snapshot = &centers;
        let nearest: Vec<usize> = batch
            .par_iter()
            .map(|&i| {
                let x = points[i];
                let mut best = (0, f64::INFINITY);
                for c in 0..k {
                    let d: f64 = snapshot[c * dims..(c + 1) * dims]
                        .iter()
                        .zip(x.iter())
                        .map(|(&cv, &xv)| (cv - f64::from(xv)).powi(2))
                        .sum();
                    if d < best.1 {
                        best = (c, d);
                    }
                }
                best.0
            })
            .collect();
        for (&i, &c) in batch.iter().zip(&nearest) {
            counts[c] += 1;
            let lr = 1.0 / counts[c] as f64;
            for (cv, &xv) in centers[c * dims..(c + 1) * dims].iter_mut().zip(points[i].iter()) {
                *cv += lr * (f64::from(xv) - *cv);
            }
        }
    }

    let mut centers = CentroidSet { dims, data: centers.into_iter().map(|v| v as f32).collect() };
    let mut assign = assign_all(points, &centers);
    repair_empty(points, &mut centers, &mut assign);
    let distortions = vec![distortion(points, &centers, &assign)];
    Ok(finish(points, centers, assign, distortions, opts.max_iters, false))
}

/// One cluster of a block: its center and the indices of its members in the block.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub center: Vec<f32>,
    pub indices: Vec<usize>,
}

impl Partition {
    pub fn points<'a>(&'a self, block: &'a [LabeledPoint]) -> impl Iterator<Item = &'a LabeledPoint> + 'a {
        self.indices.iter().map(move |&i| &block[i])
    }
}

/// Clusters a block on its features (labels are ignored) and returns the
/// non-empty clusters. Partitions are disjoint and cover the block; member
/// indices are ascending.
pub fn partition_block(
    block: &[LabeledPoint],
    k: usize,
    seed: u64,
    opts: &KMeansOptions,
) -> Result<Vec<Partition>> {
    let feats: Vec<&[f32]> = block.iter().map(|p| p.features.as_slice()).collect();
    let fit = kmeans_fit(&feats, k, seed, opts)?;
    let mut parts: Vec<Partition> = fit
        .centers
        .iter()
        .zip(&fit.partitioning.cluster_sizes)
        .map(|(c, &n)| Partition { center: c.to_vec(), indices: Vec::with_capacity(n) })
        .collect();
    for (i, &a) in fit.partitioning.assignments.iter().enumerate() {
        parts[a].indices.push(i);
    }
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refs(v: &[Vec<f32>]) -> Vec<&[f32]> {
        v.iter().map(|p| p.as_slice()).collect()
    }

    fn random_points(n: usize, dims: usize, seed: u64) -> Vec<Vec<f32>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..dims).map(|_| rng.random_range(-10.0..10.0)).collect()).collect()
    }

    #[test]
    fn pruned_assignment_matches_full_rescan() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for (k, dims) in [(1, 3), (5, 2), (12, 7), (30, 33)] {
            let pts = random_points(600, dims, k as u64);
            let r = refs(&pts);
            let mut centers = CentroidSet::new(&random_points(k, dims, 100 + k as u64)).unwrap();
            if k > 1 {
                // an exact duplicate exercises the tie rule
                let first = centers.center(0).to_vec();
                centers.data[dims..2 * dims].copy_from_slice(&first);
            }
            let mut bounds = bound_all(&r, &centers);
            for step in 0..25 {
                let scale = if step % 5 == 0 { 3.0 } else { 0.05 };
                let mut next = centers.clone();
                for v in next.data.iter_mut() {
                    *v += rng.random_range(-scale..scale);
                }
                advance(&r, &centers, &next, &mut bounds);
                let pruned: Vec<usize> = bounds.iter().map(|b| b.center).collect();
                assert_eq!(pruned, assign_all(&r, &next), "k={k} step={step}");
                centers = next;
            }
        }
    }

    #[test]
    fn early_exit_distance_agrees() {
        let pts = random_points(200, 11, 5);
        for w in pts.windows(2) {
            let d = sq_dist(&w[0], &w[1]);
            assert_eq!(sq_dist_below(&w[0], &w[1], f64::INFINITY), Some(d));
            assert_eq!(sq_dist_below(&w[0], &w[1], d), None);
            assert_eq!(sq_dist_below(&w[0], &w[1], d * 0.5), None);
        }
    }

    fn brute_nearest(x: &[f32], centers: &[Vec<f32>]) -> usize {
        let d: Vec<f64> = centers.iter().map(|c| sq_dist(x, c)).collect();
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        d.iter().position(|&v| v == min).unwrap()
    }

    #[test]
    fn four_points_two_clusters() {
        let pts = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![10.0, 0.0], vec![10.0, 1.0]];
        for seed in 0..10 {
            let fit = kmeans_fit(&refs(&pts), 2, seed, &KMeansOptions::default()).unwrap();
            let mut centers: Vec<Vec<f32>> = fit.centers.iter().map(|c| c.to_vec()).collect();
            centers.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
            assert_eq!(centers, vec![vec![0.0, 0.5], vec![10.0, 0.5]]);
            assert_eq!(fit.partitioning.cluster_sizes, vec![2, 2]);
            assert!(fit.converged);
        }
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = random_points(50, 3, 1);
        let fit = kmeans_fit(&refs(&pts), 1, 0, &KMeansOptions::default()).unwrap();
        for j in 0..3 {
            let mean = pts.iter().map(|p| f64::from(p[j])).sum::<f64>() / 50.0;
            assert!((f64::from(fit.centers.center(0)[j]) - mean).abs() < 1e-5);
        }
    }

    #[test]
    fn k_equal_n_gives_singletons() {
        let pts = random_points(12, 2, 2);
        let fit = kmeans_fit(&refs(&pts), 12, 5, &KMeansOptions::default()).unwrap();
        assert_eq!(fit.centers.k(), 12);
        assert!(fit.partitioning.cluster_sizes.iter().all(|&s| s == 1));
        assert_eq!(*fit.distortions.last().unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_k() {
        let pts = random_points(3, 2, 0);
        assert!(kmeans_fit(&refs(&pts), 0, 0, &KMeansOptions::default()).is_err());
        assert!(kmeans_fit(&refs(&pts), 4, 0, &KMeansOptions::default()).is_err());
    }

    #[test]
    fn nearest_examples() {
        let c = CentroidSet::new(&[vec![1.0, 0.0], vec![5.0, 0.0]]).unwrap();
        assert_eq!(nearest_center(&[0.0, 0.0], &c).unwrap(), 0);
        let c = CentroidSet::new(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        assert_eq!(nearest_center(&[0.0, 0.0], &c).unwrap(), 0);
        assert!(nearest_center(&[0.0], &c).is_err());
    }

    #[test]
    fn nearest_matches_linear_scan() {
        let pts = random_points(100, 4, 7);
        let centers = random_points(10, 4, 8);
        let set = CentroidSet::new(&centers).unwrap();
        for p in &pts {
            assert_eq!(nearest_center(p, &set).unwrap(), brute_nearest(p, &centers));
        }
    }

    #[test]
    fn lloyd_fixpoint_properties() {
        let pts = random_points(400, 3, 9);
        let fit = kmeans_fit(&refs(&pts), 6, 3, &KMeansOptions::default()).unwrap();
        assert!(fit.converged);
        let centers: Vec<Vec<f32>> = fit.centers.iter().map(|c| c.to_vec()).collect();
        for (p, &a) in pts.iter().zip(&fit.partitioning.assignments) {
            assert_eq!(a, brute_nearest(p, &centers));
        }
        for w in fit.distortions.windows(2) {
            assert!(w[1] <= w[0], "{:?}", fit.distortions);
        }
        assert_eq!(fit.partitioning.cluster_sizes.iter().sum::<usize>(), 400);
    }

    #[test]
    fn duplicates_drop_empty_clusters() {
        let pts = vec![vec![1.0, 1.0]; 5];
        let fit = kmeans_fit(&refs(&pts), 3, 0, &KMeansOptions::default()).unwrap();
        assert_eq!(fit.centers.k(), 1);
        assert_eq!(fit.partitioning.cluster_sizes, vec![5]);
    }

    #[test]
    fn repair_fills_empty_cluster() {
        let pts = vec![vec![0.0f32], vec![1.0], vec![2.0], vec![10.0]];
        let p = refs(&pts);
        // center 1 is far from everything and starts empty
        let mut centers = CentroidSet::new(&[vec![1.0], vec![100.0]]).unwrap();
        let mut assign = assign_all(&p, &centers);
        assert_eq!(sizes(&assign, 2), vec![4, 0]);
        assert!(repair_empty(&p, &mut centers, &mut assign));
        assert_eq!(centers.center(1), &[10.0]);
        assert_eq!(assign, vec![0, 0, 0, 1]);
    }

    #[test]
    fn minibatch_separates_blobs() {
        let mut pts = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for c in [-50.0f32, 0.0, 50.0] {
            for _ in 0..300 {
                pts.push(vec![c + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            }
        }
        let opts = KMeansOptions { mode: KMeansMode::MiniBatch, max_iters: 30, batch_size: 64 };
        let fit = kmeans_fit(&refs(&pts), 3, 1, &opts).unwrap();
        let mut sizes = fit.partitioning.cluster_sizes.clone();
        sizes.sort();
        assert_eq!(sizes, vec![300, 300, 300]);
        let again = kmeans_fit(&refs(&pts), 3, 1, &opts).unwrap();
        assert_eq!(fit.centers, again.centers);
    }

    #[test]
    fn fit_is_deterministic() {
        let pts = random_points(300, 2, 10);
        let a = kmeans_fit(&refs(&pts), 5, 77, &KMeansOptions::default()).unwrap();
        let b = kmeans_fit(&refs(&pts), 5, 77, &KMeansOptions::default()).unwrap();
        assert_eq!(a.centers, b.centers);
        assert_eq!(a.partitioning, b.partitioning);
    }

    fn labeled(pts: &[Vec<f32>], label: impl Fn(usize) -> u32) -> Vec<LabeledPoint> {
        pts.iter().enumerate().map(|(i, p)| LabeledPoint::new(p.clone(), label(i)).unwrap()).collect()
    }

    #[test]
    fn partition_covers_block() {
        let block = labeled(&random_points(10, 2, 3), |i| (i % 3) as u32);
        let parts = partition_block(&block, 2, 1, &KMeansOptions::default()).unwrap();
        let mut all: Vec<usize> = parts.iter().flat_map(|p| p.indices.clone()).collect();
        assert_eq!(parts.iter().map(|p| p.indices.len()).sum::<usize>(), 10);
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());

        let one = partition_block(&block, 1, 1, &KMeansOptions::default()).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].indices, (0..10).collect::<Vec<_>>());
        assert!(partition_block(&block, 11, 1, &KMeansOptions::default()).is_err());
    }

    #[test]
    fn separated_blobs_are_label_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pts: Vec<Vec<f32>> = (0..40)
            .map(|i| {
                let cx = if i < 20 { 0.0 } else { 20.0 };
                vec![cx + rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)]
            })
            .collect();
        let block = labeled(&pts, |i| if i < 20 { 0 } else { 1 });
        let parts = partition_block(&block, 2, 2, &KMeansOptions::default()).unwrap();
        assert_eq!(parts.len(), 2);
        for p in &parts {
            let first = block[p.indices[0]].label;
            assert!(p.points(&block).all(|q| q.label == first));
        }
    }
}
