//! Seeded, reproducible train/eval splitting.
//!
//! The permutation is a Fisher-Yates shuffle driven by xoshiro256++ whose
//! state is filled from SplitMix64(seed). Each swap index for position `i` is
//! `(next_u64() * (i + 1)) >> 64` computed in 128 bits, so any implementation
//! of those two published generators reproduces the same split.

use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::{check_index, DatasetError, DatasetIterator};
use crate::engine::{Annotation, Data};

/// A view of selected indices of a parent dataset.
#[derive(Clone)]
pub struct Subset {
    parent: Arc<dyn DatasetIterator>,
    indices: Vec<usize>,
}

impl Subset {
    pub fn new(parent: Arc<dyn DatasetIterator>, indices: Vec<usize>) -> Self {
        Self { parent, indices }
    }

    /// Indices into the parent dataset.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

impl std::fmt::Debug for Subset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Subset").field("indices", &self.indices).finish()
    }
}

impl DatasetIterator for Subset {
    fn len(&self) -> usize {
        self.indices.len()
    }

    fn get(&self, index: usize) -> Result<(Data, Annotation), DatasetError> {
        check_index(index, self.indices.len())?;
        self.parent.get(self.indices[index])
    }
}

/// The permutation of `0..n` used by [`dataset_split`].
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = ((rng.next_u64() as u128 * (i as u128 + 1)) >> 64) as usize;
        idx.swap(i, j);
    }
    idx
}

/// Splits `ds` into disjoint subsets covering every item.
///
/// Split `k` receives `floor(fractions[k] * n)` items; the remainder goes to
/// the first split.
pub fn dataset_split(
    ds: Arc<dyn DatasetIterator>,
    fractions: &[f64],
    seed: u64,
) -> Result<Vec<Subset>, DatasetError> {
    if fractions.is_empty() {
        return Err(DatasetError::BadFractions("no fractions given".into()));
    }
    if let Some(f) = fractions.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
        return Err(DatasetError::BadFractions(format!("{f} is not positive")));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(DatasetError::BadFractions(format!("fractions sum to {sum}")));
    }

    let n = ds.len();
    let mut sizes: Vec<usize> = fractions.iter().map(|f| (f * n as f64).floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    sizes[0] += n - assigned.min(n);

    let perm = shuffled_indices(n, seed);
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for size in sizes {
        let end = (start + size).min(n);
        out.push(Subset::new(Arc::clone(&ds), perm[start..end].to_vec()));
        start = end;
    }
    Ok(out)
}
