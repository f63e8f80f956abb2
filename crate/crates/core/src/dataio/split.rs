use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;

use crate::dataio::InteractionStore;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Per-user training histories plus one held-out test item each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitDataset {
    pub train: InteractionStore,
    pub test: Vec<usize>,
}

impl SplitDataset {
    pub fn num_users(&self) -> usize {
        self.train.num_users()
    }

    pub fn num_items(&self) -> usize {
        self.train.num_items()
    }
}

/// Holds out each user's latest interaction (largest item id on ties).
pub fn leave_one_out_split(store: &InteractionStore) -> Result<SplitDataset> {
    let mut train = Vec::with_capacity(store.num_users());
    let mut test = Vec::with_capacity(store.num_users());
    for (u, list) in store.iter() {
        if list.len() < 2 {
            return Err(Error::invalid(format!(
                "user {u} has {} interaction(s); leave-one-out needs 2",
                list.len()
            )));
        }
        // Lists are sorted by (timestamp, item), so the last entry wins ties
        // with the larger item id.
        let (held, _) = list[list.len() - 1];
        test.push(held);
        train.push(list[..list.len() - 1].to_vec());
    }
    Ok(SplitDataset {
        train: InteractionStore::new(store.num_items(), train)?,
        test,
    })
}

/// Result of negative sampling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeSample {
    pub items: Vec<usize>,
    /// Set when there were fewer candidates than requested and sampling
    /// fell back to drawing with replacement.
    pub with_replacement: bool,
}

/// Items in `0..num_items` absent from `excluded`, ascending.
pub fn candidate_items(num_items: usize, excluded: &[usize]) -> Vec<usize> {
    let seen: HashSet<usize> = excluded.iter().copied().collect();
    (0..num_items).filter(|i| !seen.contains(i)).collect()
}

/// Draws `n` items from `candidates`, without replacement when possible.
pub fn sample_from_candidates<R: Rng>(candidates: &[usize], n: usize, rng: &mut R) -> NegativeSample {
    if n == 0 || candidates.is_empty() {
        return NegativeSample {
            items: Vec::new(),
            with_replacement: n > 0,
        };
    }
    if n <= candidates.len() {
        let items = index::sample(rng, candidates.len(), n)
            .into_iter()
            .map(|i| candidates[i])
            .collect();
        NegativeSample {
            items,
            with_replacement: false,
        }
    } else {
        let items = (0..n)
            .map(|_| candidates[rng.random_range(0..candidates.len())])
            .collect();
        NegativeSample {
            items,
            with_replacement: true,
        }
    }
}

/// Uniform negatives for `user` among items they never interacted with in `train`.
pub fn sample_negatives(
    train: &InteractionStore,
    user: usize,
    n_neg: usize,
    seed: u64,
) -> NegativeSample {
    let candidates = candidate_items(train.num_items(), &train.items_of(user));
    sample_from_candidates(&candidates, n_neg, &mut rng_from_seed(seed))
}
