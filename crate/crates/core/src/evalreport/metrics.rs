use rayon::prelude::*;

use crate::client::Backbone;
use crate::dataio::SplitDataset;
use crate::error::{Error, Result};

/// 1-based rank of `test_item` among all items not in `excluded`. Items with
/// a higher score rank ahead, and so do tied items with a lower id.
pub fn rank_from_scores(scores: &[f64], test_item: usize, excluded: &[usize]) -> usize {
    let target = scores[test_item];
    let mut skip = vec![false; scores.len()];
    for &i in excluded {
        skip[i] = true;
    }
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(i, &s)| !skip[i] && i != test_item && (s > target || (s == target && i < test_item)))
        .count()
}

/// Ranks `test_item` under `model` with `train_items` removed from the
/// candidates.
pub fn rank_of_test_item<B: Backbone + ?Sized>(model: &B, test_item: usize, train_items: &[usize]) -> usize {
    rank_from_scores(&model.score_all(), test_item, train_items)
}

pub fn hr_at_k(rank: usize, k: usize) -> f64 {
    if rank <= k {
        1.0
    } else {
        0.0
    }
}

pub fn ndcg_at_k(rank: usize, k: usize) -> f64 {
    if rank <= k {
        1.0 / (1.0 + rank as f64).log2()
    } else {
        0.0
    }
}

/// One evaluation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub round: usize,
    pub hr_at_k: f64,
    pub ndcg_at_k: f64,
    pub evaluated_users: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub k: usize,
    pub rows: Vec<MetricsRow>,
}

impl MetricsReport {
    pub fn last(&self) -> Option<&MetricsRow> {
        self.rows.last()
    }
}

/// Mean HR@k and NDCG@k over users. `models[u]` scores user `u`. Training
/// positives are removed from the candidates when `exclude_train` is set.
pub fn evaluate_all<B: Backbone + Sync>(
    models: &[B],
    split: &SplitDataset,
    k: usize,
    exclude_train: bool,
) -> Result<MetricsRow> {
    if models.len() != split.test.len() {
        return Err(Error::invalid(format!(
            "{} models for {} test users",
            models.len(),
            split.test.len()
        )));
    }
    if models.is_empty() || k == 0 {
        return Err(Error::invalid("evaluation needs users and k >= 1"));
    }
    let ranks: Vec<usize> = models
        .par_iter()
        .enumerate()
        .map(|(u, m)| {
            let excluded = if exclude_train { split.train.items_of(u) } else { Vec::new() };
            rank_of_test_item(m, split.test[u], &excluded)
        })
        .collect();
    let n = ranks.len() as f64;
    let (mut hr, mut ndcg) = (0.0, 0.0);
    for &r in &ranks {
        hr += hr_at_k(r, k);
        ndcg += ndcg_at_k(r, k);
    }
    Ok(MetricsRow {
        round: 0,
        hr_at_k: hr / n,
        ndcg_at_k: ndcg / n,
        evaluated_users: ranks.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::InteractionStore;
    use proptest::prelude::*;

    struct Fixed(Vec<f64>);

    impl Backbone for Fixed {
        fn num_items(&self) -> usize {
            self.0.len()
        }
        fn predict(&self, item: usize) -> f64 {
            self.0[item]
        }
    }

    fn sort_oracle(scores: &[f64], test: usize, excluded: &[usize]) -> usize {
        let mut cand: Vec<usize> = (0..scores.len()).filter(|i| !excluded.contains(i)).collect();
        cand.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
        cand.iter().position(|&i| i == test).unwrap() + 1
    }

    #[test]
    fn tie_and_cutoff_rules() {
        assert_eq!(rank_from_scores(&[0.1, 0.9, 0.2], 1, &[]), 1);
        assert_eq!(rank_from_scores(&[0.5; 4], 0, &[]), 1);
        assert_eq!(rank_from_scores(&[0.5; 4], 2, &[0]), 2);
        assert_eq!(hr_at_k(1, 50), 1.0);
        assert_eq!(ndcg_at_k(1, 50), 1.0);
        assert_eq!(hr_at_k(51, 50), 0.0);
        assert_eq!(ndcg_at_k(51, 50), 0.0);
        assert_eq!(ndcg_at_k(3, 50), 0.5);
    }

    #[test]
    fn mean_over_users() {
        let train = InteractionStore::new(200, vec![vec![(5, 0)], vec![(6, 0)]]).unwrap();
        let split = SplitDataset { train, test: vec![0, 0] };
        let mut low = vec![1.0; 200];
        low[0] = 0.0;
        let mut top = vec![0.0; 200];
        top[0] = 1.0;
        let row = evaluate_all(&[Fixed(top), Fixed(low)], &split, 50, true).unwrap();
        assert_eq!((row.hr_at_k, row.ndcg_at_k, row.evaluated_users), (0.5, 0.5, 2));
    }

    proptest! {
        #[test]
        fn rank_matches_full_sort(
            scores in proptest::collection::vec(0u8..6, 20),
            test in 0usize..20,
            excl in proptest::collection::vec(0usize..20, 0..5),
        ) {
            let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
            let excl: Vec<usize> = excl.into_iter().filter(|&i| i != test).collect();
            prop_assert_eq!(rank_from_scores(&scores, test, &excl), sort_oracle(&scores, test, &excl));
        }

        #[test]
        fn ndcg_non_increasing(r in 1usize..200) {
            prop_assert!(ndcg_at_k(r + 1, 50) <= ndcg_at_k(r, 50));
        }
    }
}
