//! Partition layer: splitting data into an ordered set of chunks and back.

use std::collections::BTreeMap;

use super::StorageError;

/// Number of partitions for scatter degree `gamma`: one when `gamma` is zero,
/// otherwise `⌊1/γ⌋ + 1` (the set `{d_0, …, d_i}` with `i = ⌊1/γ⌋`).
pub fn partition_count(gamma: f64) -> Result<usize, StorageError> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(StorageError::InvalidScatterDegree(gamma));
    }
    if gamma == 0.0 {
        Ok(1)
    } else {
        Ok((1.0 / gamma).floor() as usize + 1)
    }
}

/// A totally ordered set of chunks `d_0..d_i`. Chunks may be missing while a
/// set is being fetched; [`assemble`] refuses to run on an incomplete set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSet {
    count: usize,
    chunks: BTreeMap<usize, Vec<u8>>,
}

impl PartitionSet {
    pub fn from_ordered(chunks: Vec<Vec<u8>>) -> Self {
        PartitionSet { count: chunks.len(), chunks: chunks.into_iter().enumerate().collect() }
    }

    /// An empty set expecting `count` chunks.
    pub fn expecting(count: usize) -> Self {
        PartitionSet { count, chunks: BTreeMap::new() }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn get(&self, index: usize) -> Option<&[u8]> {
        self.chunks.get(&index).map(Vec::as_slice)
    }

    pub fn insert(&mut self, index: usize, chunk: Vec<u8>) {
        assert!(index < self.count, "partition index {index} out of range");
        self.chunks.insert(index, chunk);
    }

    pub fn remove(&mut self, index: usize) -> Option<Vec<u8>> {
        self.chunks.remove(&index)
    }

    pub fn is_complete(&self) -> bool {
        self.chunks.len() == self.count
    }

    /// Present chunks in order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &[u8])> {
        self.chunks.iter().map(|(i, c)| (*i, c.as_slice()))
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.chunks.values().map(Vec::len).collect()
    }
}

/// Splits `d` into near-equal chunks. The first `|d| mod count` chunks are one
/// byte longer than the rest; when there are more chunks than bytes the
/// trailing chunks are empty.
pub fn partition(d: &[u8], gamma: f64) -> Result<PartitionSet, StorageError> {
    let count = partition_count(gamma)?;
    if d.is_empty() {
        return Err(StorageError::EmptyData);
    }
    let base = d.len() / count;
    let extra = d.len() % count;
    let mut chunks = Vec::with_capacity(count);
    let mut start = 0;
    for k in 0..count {
        let len = base + usize::from(k < extra);
        chunks.push(d[start..start + len].to_vec());
        start += len;
    }
    Ok(PartitionSet::from_ordered(chunks))
}

/// Concatenates the chunks in order.
pub fn assemble(set: &PartitionSet) -> Result<Vec<u8>, StorageError> {
    let mut out = Vec::new();
    for k in 0..set.count {
        let chunk = set.chunks.get(&k).ok_or(StorageError::MissingPartition(k))?;
        out.extend_from_slice(chunk);
    }
    Ok(out)
}
