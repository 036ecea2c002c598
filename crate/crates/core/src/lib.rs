//! Out-of-core multiclass linear classification with incremental local SGD.
//!
//! Training streams the data one block at a time. Each block is clustered
//! with k-means, and one one-vs-rest hinge-loss SGD model is trained per
//! cluster in parallel. A query is routed to the nearest cluster center of
//! every block model, and the per-block answers are combined by majority vote.
//!
//! ```no_run
//! use lsgd::{eval, incremental, io, linear::SgdParams};
//!
//! let data = eval::make_blobs(10, 200, 16, 20.0, 7)?;
//! let blocks = io::split_blocks(data.into_iter().map(Ok), io::BlockSpec::new(1000)?);
//! let model = incremental::inc_train(blocks, 10, &SgdParams::default())?;
//! # Ok::<(), lsgd::Error>(())
//! ```

pub mod error;
pub mod eval;
pub mod incremental;
pub mod io;
pub mod kmeans;
pub mod linear;
pub mod local;
pub mod seed;

pub use error::{Error, Result};
pub use incremental::IncKSgdModel;
pub use linear::{LabeledPoint, OvrModel, Schedule, SgdParams};
pub use local::KSgdModel;

/// Anything that maps a dense feature vector to a class id.
pub trait Classifier: Sync {
    fn dimensionality(&self) -> usize;

    fn predict(&self, x: &[f32]) -> Result<u32>;

    fn predict_batch(&self, points: &[&[f32]]) -> Result<Vec<u32>> {
        use rayon::prelude::*;
        points.par_iter().map(|x| self.predict(x)).collect()
    }
}

/// Runs `f` on a dedicated rayon pool with `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}
