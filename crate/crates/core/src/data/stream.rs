//! Low-memory training source: block-shuffled streaming from a dataset
//! cache.
//!
//! Instead of loading and shuffling the full augmented train split, the
//! id-encoded quads are read from the cache file in fixed-size blocks.
//! Each epoch draws a seeded permutation of block order and shuffles within
//! each block after reciprocal augmentation. Every fact is visited exactly
//! once per epoch.

use std::fs::File;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

use super::cache::{read_layout, read_quads, SplitSpan};
use super::Quadruple;

pub struct BlockShuffleReader {
    path: PathBuf,
    span: SplitSpan,
    n_relations: u32,
    /// Raw (unaugmented) facts per block.
    block_size: usize,
}

impl BlockShuffleReader {
    /// Open the train split of a cache file. `block_size` is the number of
    /// raw facts held in memory at once (each yields two examples).
    pub fn open(cache_path: &Path, block_size: usize) -> Result<Self> {
        let layout = read_layout(cache_path)?;
        Ok(BlockShuffleReader {
            path: cache_path.to_path_buf(),
            span: layout.train,
            n_relations: layout.vocab.n_relations() as u32,
            block_size: block_size.max(1),
        })
    }

    /// Number of raw train facts.
    pub fn n_facts(&self) -> u64 {
        self.span.count
    }

    /// Number of augmented examples per epoch.
    pub fn n_examples(&self) -> u64 {
        self.span.count * 2
    }

    /// Iterate one epoch of augmented, block-shuffled examples.
    pub fn epoch(&self, epoch_seed: u64) -> Result<EpochBlocks<'_>> {
        let file = File::open(&self.path)
            .map_err(|e| Error::io(format!("opening cache {}", self.path.display()), e))?;
        let n_blocks = (self.span.count as usize).div_ceil(self.block_size);
        let mut order: Vec<usize> = (0..n_blocks).collect();
        let mut rng = rng_from_seed(derive_seed(epoch_seed, 0xB10C));
        order.shuffle(&mut rng);
        Ok(EpochBlocks {
            reader: self,
            file,
            order,
            next: 0,
            epoch_seed,
        })
    }
}

/// Iterator over the shuffled blocks of one epoch. Each item is a block of
/// augmented examples, already shuffled within the block.
pub struct EpochBlocks<'a> {
    reader: &'a BlockShuffleReader,
    file: File,
    order: Vec<usize>,
    next: usize,
    epoch_seed: u64,
}

impl EpochBlocks<'_> {
    fn read_block(&mut self, block: usize) -> Result<Vec<Quadruple>> {
        let start = (block * self.reader.block_size) as u64;
        let n = self
            .reader
            .block_size
            .min((self.reader.span.count - start) as usize);
        let raw = read_quads(&mut self.file, self.reader.span, start, n).map_err(|e| {
            Error::io(format!("reading cache {}", self.reader.path.display()), e)
        })?;
        let mut examples = Vec::with_capacity(raw.len() * 2);
        for q in raw {
            examples.push(q);
            examples.push(q.inverse(self.reader.n_relations));
        }
        let mut rng = rng_from_seed(derive_seed(self.epoch_seed, 0xE0 + block as u64));
        examples.shuffle(&mut rng);
        Ok(examples)
    }
}

impl Iterator for EpochBlocks<'_> {
    type Item = Result<Vec<Quadruple>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.order.len() {
            return None;
        }
        let block = self.order[self.next];
        self.next += 1;
        Some(self.read_block(block))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{augment_reciprocal, save_cache, synthetic_dataset, SyntheticSpec};
    use std::collections::HashMap;

    fn example_counts(examples: &[Quadruple]) -> HashMap<Quadruple, usize> {
        let mut m = HashMap::new();
        for q in examples {
            *m.entry(*q).or_insert(0) += 1;
        }
        m
    }

    #[test]
    fn streamed_epoch_covers_the_same_multiset_as_in_memory() {
        let ds = synthetic_dataset(&SyntheticSpec {
            n_entities: 12,
            n_relations: 4,
            n_timestamps: 5,
            n_facts: 57,
            seed: 11,
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.tcd");
        save_cache(&path, &ds).unwrap();

        let reader = BlockShuffleReader::open(&path, 10).unwrap();
        assert_eq!(reader.n_facts(), 57);
        assert_eq!(reader.n_examples(), 114);
        let mut streamed = Vec::new();
        for block in reader.epoch(99).unwrap() {
            streamed.extend(block.unwrap());
        }
        let in_memory =
            augment_reciprocal(&ds.train, ds.vocab.n_relations() as u32).unwrap();
        assert_eq!(streamed.len(), in_memory.len());
        assert_eq!(example_counts(&streamed), example_counts(&in_memory));
    }

    #[test]
    fn epochs_are_seed_deterministic_but_differ_across_seeds() {
        let ds = synthetic_dataset(&SyntheticSpec {
            n_entities: 6,
            n_relations: 2,
            n_timestamps: 3,
            n_facts: 25,
            seed: 2,
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.tcd");
        save_cache(&path, &ds).unwrap();
        let reader = BlockShuffleReader::open(&path, 8).unwrap();
        let collect = |seed: u64| -> Vec<Quadruple> {
            reader
                .epoch(seed)
                .unwrap()
                .flat_map(|b| b.unwrap())
                .collect()
        };
        assert_eq!(collect(1), collect(1));
        assert_ne!(collect(1), collect(2));
    }
}
