use std::fs::File;
use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context, Result};

use lsgd::io::{
    read_dense_binary, read_sparse_text, write_sparse_text, DenseBinaryWriter, LabelMap, SparseOptions, DENSE_MAGIC,
};
use lsgd::LabeledPoint;

use crate::args::Format;

pub fn detect(path: &Path, format: Format) -> Result<Format> {
    if format != Format::Auto {
        return Ok(format);
    }
    let mut magic = [0u8; 4];
    let mut f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let n = f.read(&mut magic)?;
    Ok(if n == 4 && magic == DENSE_MAGIC { Format::Dense } else { Format::Sparse })
}

/// A point stream together with what is known about the file up front.
pub struct Source {
    pub points: Box<dyn Iterator<Item = lsgd::Result<LabeledPoint>> + Send>,
    pub n_points: u64,
    pub dims: usize,
    pub labels: LabelMap,
}

/// Opens a labeled dataset. `vocab` pins the class ids of labels already
/// known (e.g. a model's vocabulary).
pub fn open(path: &Path, format: Format, dims: Option<usize>, vocab: Option<&LabelMap>) -> Result<Source> {
    let ctx = || format!("reading {}", path.display());
    match detect(path, format)? {
        Format::Dense => {
            let r = read_dense_binary(path).with_context(ctx)?;
            let h = *r.header();
            if let Some(d) = dims {
                if d != h.n_dims as usize {
                    bail!("{}: dimensionality {} does not match expected {d}", path.display(), h.n_dims);
                }
            }
            let labels = match vocab {
                Some(v) => {
                    let mut v = v.clone();
                    for c in 0..h.n_classes {
                        v.id_or_insert(&c.to_string());
                    }
                    v
                }
                None => LabelMap::identity(h.n_classes),
            };
            Ok(Source { points: Box::new(r), n_points: h.n_points, dims: h.n_dims as usize, labels })
        }
        _ => {
            let opts = SparseOptions { n_dims: dims, labels: vocab.cloned() };
            let r = read_sparse_text(path, &opts).with_context(ctx)?;
            Ok(Source {
                n_points: r.n_points(),
                dims: r.dims(),
                labels: r.labels().clone(),
                points: Box::new(r),
            })
        }
    }
}

pub fn write(path: &Path, format: Format, points: &[LabeledPoint], labels: &LabelMap) -> Result<()> {
    let ctx = || format!("writing {}", path.display());
    match format {
        Format::Sparse => write_sparse_text(path, points, labels).with_context(ctx),
        _ => {
            let dims = points.first().map_or(0, |p| p.dims());
            let mut w = DenseBinaryWriter::create(path, dims as u32, labels.len() as u32).with_context(ctx)?;
            for p in points {
                w.write(p).with_context(ctx)?;
            }
            w.finish().with_context(ctx)?;
            Ok(())
        }
    }
}
