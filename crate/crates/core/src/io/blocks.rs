use crate::error::{Error, Result};
use crate::linear::LabeledPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ordering {
    #[default]
    FileOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSpec {
    pub block_size: usize,
    pub ordering: Ordering,
}

impl BlockSpec {
    pub fn new(block_size: usize) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::invalid("block size must be >= 1"));
        }
        Ok(BlockSpec { block_size, ordering: Ordering::FileOrder })
    }
}

/// Bytes per dense point: a 4-byte label plus `n_dims` 4-byte floats.
pub fn record_size(n_dims: usize) -> usize {
    4 * (n_dims + 1)
}

/// Largest block that fits `memory_budget` bytes of dense records.
pub fn default_block_size(memory_budget: u64, n_dims: usize) -> usize {
    ((memory_budget / record_size(n_dims) as u64) as usize).max(1)
}

pub fn block_count(n_points: u64, block_size: usize) -> u64 {
    n_points.div_ceil(block_size as u64)
}

/// A contiguous run of the training stream.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBlock {
    pub id: usize,
    pub points: Vec<LabeledPoint>,
}

impl AsRef<[LabeledPoint]> for DataBlock {
    fn as_ref(&self) -> &[LabeledPoint] {
        &self.points
    }
}

/// Iterator adapter produced by [`split_blocks`].
pub struct Blocks<I> {
    source: I,
    spec: BlockSpec,
    next_id: usize,
    done: bool,
}

/// Groups a point stream into blocks of `spec.block_size` points (the last
/// one may be shorter). Only the block being filled is held in memory.
pub fn split_blocks<I>(source: I, spec: BlockSpec) -> Blocks<I::IntoIter>
where
    I: IntoIterator<Item = Result<LabeledPoint>>,
{
    Blocks { source: source.into_iter(), spec, next_id: 0, done: false }
}

impl<I> Iterator for Blocks<I>
where
    I: Iterator<Item = Result<LabeledPoint>>,
{
    type Item = Result<DataBlock>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut points = Vec::with_capacity(self.spec.block_size.min(1 << 16));
        while points.len() < self.spec.block_size {
            match self.source.next() {
                Some(Ok(p)) => points.push(p),
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(e));
                }
                None => {
                    self.done = true;
                    break;
                }
            }
        }
        if points.is_empty() {
            return (self.next_id == 0).then_some(Err(Error::NoData));
        }
        let id = self.next_id;
        self.next_id += 1;
        Some(Ok(DataBlock { id, points }))
    }
}
