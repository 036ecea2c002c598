//! Dataset ingestion, block splitting and model persistence.
//!
//! Two dataset formats are supported:
//!
//! * sparse text, one point per line: `<label> <idx>:<val> ...` with 1-based
//!   ascending indices (`#` starts a comment);
//! * dense binary (`LSGD`): a fixed header followed by fixed-size records,
//!   so any point can be reached with one seek.
//!
//! Models are written in the versioned `LSGM` binary format. All integers
//! and floats on disk are little-endian.

mod blocks;
mod dense;
mod labels;
mod model;
mod sparse;

pub use blocks::{block_count, default_block_size, record_size, split_blocks, BlockSpec, Blocks, DataBlock, Ordering};
pub use dense::{read_dense_binary, DatasetHeader, DenseBinaryReader, DenseBinaryWriter, DENSE_MAGIC, DENSE_VERSION};
pub use labels::LabelMap;
pub use model::{load_model, model_to_bytes, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use sparse::{read_sparse_text, scan_sparse, write_sparse_text, SparseOptions, SparseScan, SparseTextReader};

use std::fs;
use std::path::Path;

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}
