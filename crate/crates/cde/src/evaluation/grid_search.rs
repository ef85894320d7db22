//! K-fold cross-validated grid search over scalar hyperparameters,
//! scored by mean held-out log-likelihood.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{CdeError, Result};
use crate::estimators::ConditionalDensity;
use crate::evaluation::metrics::avg_log_likelihood;

/// Grid definition: each entry is a parameter name with its candidate
/// values; cells are the cross product in declaration order (the first
/// parameter varies slowest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSearchSpec {
    pub grid: Vec<(String, Vec<f64>)>,
    pub folds: usize,
}

impl Default for GridSearchSpec {
    fn default() -> Self {
        GridSearchSpec { grid: Vec::new(), folds: 10 }
    }
}

impl GridSearchSpec {
    fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(CdeError::InvalidConfig(format!(
                "cross-validation needs at least 2 folds, got {}",
                self.folds
            )));
        }
        if self.grid.is_empty() || self.grid.iter().any(|(_, vs)| vs.is_empty()) {
            return Err(CdeError::InvalidConfig(
                "grid must list at least one parameter, each with at least one value".into(),
            ));
        }
        Ok(())
    }

    fn n_cells(&self) -> usize {
        self.grid.iter().map(|(_, vs)| vs.len()).product()
    }

    /// The `idx`-th assignment in first-grid-order enumeration.
    fn assignment(&self, idx: usize) -> Vec<(String, f64)> {
        let mut rem = idx;
        let mut out = Vec::with_capacity(self.grid.len());
        for (name, values) in self.grid.iter().rev() {
            out.push((name.clone(), values[rem % values.len()]));
            rem /= values.len();
        }
        out.reverse();
        out
    }
}

/// One evaluated grid cell: the parameter assignment, each fold's
/// held-out average log-likelihood, and their mean (the CV score).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub assignment: Vec<(String, f64)>,
    pub fold_scores: Vec<f64>,
    #[serde(with = "crate::evaluation::metrics::flagged_f64")]
    pub score: f64,
}

/// The full CV table plus the index of the winning cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvTable {
    pub cells: Vec<CvCell>,
    pub best: usize,
}

impl CvTable {
    pub fn best_cell(&self) -> &CvCell {
        &self.cells[self.best]
    }
}

/// Held-out index blocks: one seeded shuffle of 0..n, then contiguous
/// chunks (the first `n % folds` folds take one extra index).
pub fn cv_folds(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || n < folds {
        return Err(CdeError::InvalidParameter(format!(
            "need n >= folds >= 2, got n = {n}, folds = {folds}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

/// Scores every grid cell by k-fold CV and returns the table with the
/// best cell marked. A cell whose fit or evaluation fails scores `-inf`
/// (with the failure reason left in that fold's slot as `-inf` too);
/// the search only errors if every cell is `-inf`. Ties keep the
/// earliest cell in grid order.
pub fn grid_search_cv<M, F>(
    spec: &GridSearchSpec,
    factory: F,
    data: &Dataset,
    seed: u64,
) -> Result<CvTable>
where
    M: ConditionalDensity,
    F: Fn(&[(String, f64)], &Dataset) -> Result<M>,
{
    spec.validate()?;
    let blocks = cv_folds(data.n(), spec.folds, seed)?;
    let splits: Vec<(Dataset, Dataset)> = blocks
        .iter()
        .map(|held| {
            let mut train_idx: Vec<usize> = Vec::with_capacity(data.n() - held.len());
            let held_set: std::collections::HashSet<usize> = held.iter().copied().collect();
            train_idx.extend((0..data.n()).filter(|i| !held_set.contains(i)));
            Ok((data.select(&train_idx)?, data.select(held)?))
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(spec.n_cells());
    for c in 0..spec.n_cells() {
        let assignment = spec.assignment(c);
        let mut fold_scores = Vec::with_capacity(spec.folds);
        for (train, held) in &splits {
            let score = factory(&assignment, train)
                .and_then(|model| avg_log_likelihood(&model, held))
                .unwrap_or(f64::NEG_INFINITY);
            fold_scores.push(score);
        }
        let score = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
        cells.push(CvCell { assignment, fold_scores, score });
    }

    let mut best = 0;
    for (i, cell) in cells.iter().enumerate() {
        if cell.score > cells[best].score {
            best = i;
        }
    }
    if cells[best].score == f64::NEG_INFINITY {
        return Err(CdeError::SearchFailure(format!(
            "all {} grid cells scored -inf",
            cells.len()
        )));
    }
    Ok(CvTable { cells, best })
}
