//! Mid-ranks, average ranks and the naive-average method.

use serde::{Deserialize, Serialize};

use crate::data::{dataset_means, PerfTable};
use crate::error::{Error, Result};
use crate::family::{FamilyOfBest, Method};

/// Per-dataset mid-ranks (1 = best) and their column means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankMatrix {
    pub per_dataset_ranks: Vec<Vec<f64>>,
    pub avg_ranks: Vec<f64>,
}

impl RankMatrix {
    pub fn n_datasets(&self) -> usize {
        self.per_dataset_ranks.len()
    }

    pub fn n_models(&self) -> usize {
        self.avg_ranks.len()
    }

    /// Builds the matrix from rank rows, recomputing the averages.
    pub fn from_rows(per_dataset_ranks: Vec<Vec<f64>>) -> Self {
        let k = per_dataset_ranks.first().map_or(0, Vec::len);
        let n = per_dataset_ranks.len() as f64;
        let avg_ranks = (0..k)
            .map(|j| per_dataset_ranks.iter().map(|row| row[j]).sum::<f64>() / n)
            .collect();
        RankMatrix {
            per_dataset_ranks,
            avg_ranks,
        }
    }

    /// Model indices sorted by average rank; ties keep the lower index first.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n_models()).collect();
        idx.sort_by(|&a, &b| self.avg_ranks[a].total_cmp(&self.avg_ranks[b]));
        idx
    }
}

/// Ranks one row of scores; tied scores share the mean of the positions they
/// span.
pub fn mid_ranks(row: &[f64], higher_is_better: bool) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    if higher_is_better {
        idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
    } else {
        idx.sort_by(|&a, &b| row[a].total_cmp(&row[b]));
    }
    let mut ranks = vec![0.0; row.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && row[idx[end]] == row[idx[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let mid = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = mid;
        }
        start = end;
    }
    ranks
}

pub fn rank_matrix(means: &[Vec<f64>], higher_is_better: bool) -> RankMatrix {
    RankMatrix::from_rows(
        means
            .iter()
            .map(|row| mid_ranks(row, higher_is_better))
            .collect(),
    )
}

/// Ranks of a table's fold-averaged scores.
pub fn table_ranks(table: &PerfTable) -> RankMatrix {
    rank_matrix(&dataset_means(table), table.metric().higher_is_better)
}

/// Grand mean of every model over all `N × r` cells.
pub fn overall_means(table: &PerfTable) -> Vec<f64> {
    let cells = (table.n_datasets() * table.n_folds()) as f64;
    (0..table.n_models())
        .map(|j| {
            (0..table.n_datasets())
                .map(|i| table.cell_folds(i, j).iter().sum::<f64>())
                .sum::<f64>()
                / cells
        })
        .collect()
}

/// The single model with the best overall mean.
///
/// Every observed difference is taken at face value, so an exact tie for the
/// top has no principled resolution and is reported as [`Error::NaiveTie`].
pub fn naive_best(table: &PerfTable) -> Result<FamilyOfBest> {
    naive_best_from_means(table.models(), &overall_means(table), table.metric().higher_is_better)
}

pub fn naive_best_from_means(
    models: &[String],
    means: &[f64],
    higher_is_better: bool,
) -> Result<FamilyOfBest> {
    let better = |a: f64, b: f64| if higher_is_better { a > b } else { a < b };
    let mut best = 0;
    for j in 1..means.len() {
        if better(means[j], means[best]) {
            best = j;
        }
    }
    let tied: Vec<String> = (0..means.len())
        .filter(|&j| means[j] == means[best])
        .map(|j| models[j].clone())
        .collect();
    if tied.len() > 1 {
        return Err(Error::NaiveTie(tied));
    }
    Ok(FamilyOfBest::new(Method::Naive, vec![models[best].clone()]))
}
