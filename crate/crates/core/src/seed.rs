//! Stable seed derivation so that parallel work is independent of scheduling.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const KMEANS_SALT: u64 = 0x6b6d_6561_6e73_5f5f;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the `index`-th child of `base` (cluster within a block, block within a run).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    mix64(base ^ mix64(index.wrapping_add(GOLDEN)))
}

/// Seed for the binary problem of class `class` inside a one-vs-rest model.
pub fn class_seed(base: u64, class: u32) -> u64 {
    base ^ mix64(u64::from(class).wrapping_mul(GOLDEN).wrapping_add(1))
}

/// Seed of the t-th member of an incremental ensemble.
pub fn block_seed(base: u64, block: usize) -> u64 {
    derive_seed(base, block as u64)
}

/// Seed of the local model trained on cluster `cluster` of a block.
pub fn cluster_seed(block_seed: u64, cluster: usize) -> u64 {
    derive_seed(block_seed, cluster as u64)
}

pub fn kmeans_seed(block_seed: u64) -> u64 {
    derive_seed(block_seed ^ KMEANS_SALT, 0)
}
