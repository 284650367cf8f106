//! Fold-level performance tables.
//!
//! A [`PerfTable`] is a complete `datasets × models × folds` grid of metric
//! values, read from a long-format CSV with one row per cell:
//!
//! ```text
//! value,resample,dataset,model
//! 0.946,Fold1.Rep1,Digital Democracy,CART(cp=0.01)
//! ```

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Problem, Result};

/// Separator used when a dataset id is assembled from several columns.
pub const DATASET_KEY_SEPARATOR: &str = "::";

/// One cross-validation fold of one repetition, written `Fold<i>.Rep<j>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FoldId {
    // field order gives the (rep, fold) sort order
    pub rep_index: u32,
    pub fold_index: u32,
}

impl FoldId {
    pub fn new(fold_index: u32, rep_index: u32) -> Option<Self> {
        (fold_index >= 1 && rep_index >= 1).then_some(FoldId {
            rep_index,
            fold_index,
        })
    }
}

impl fmt::Display for FoldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fold{}.Rep{}", self.fold_index, self.rep_index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseFoldIdError;

impl fmt::Display for ParseFoldIdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("expected Fold<i>.Rep<j> with i, j >= 1")
    }
}

impl std::error::Error for ParseFoldIdError {}

impl FromStr for FoldId {
    type Err = ParseFoldIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (fold, rep) = s.split_once('.').ok_or(ParseFoldIdError)?;
        let fold = fold.strip_prefix("Fold").ok_or(ParseFoldIdError)?;
        let rep = rep.strip_prefix("Rep").ok_or(ParseFoldIdError)?;
        let digits = |t: &str| -> Result<u32, ParseFoldIdError> {
            if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit()) {
                return Err(ParseFoldIdError);
            }
            t.parse().map_err(|_| ParseFoldIdError)
        };
        FoldId::new(digits(fold)?, digits(rep)?).ok_or(ParseFoldIdError)
    }
}

/// Which CSV columns hold what.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub value: String,
    pub resample: String,
    /// One or more columns; several are joined with `::` into one dataset id.
    pub dataset: Vec<String>,
    pub model: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            value: "value".into(),
            resample: "resample".into(),
            dataset: vec!["dataset".into()],
            model: "model".into(),
        }
    }
}

impl ColumnMapping {
    /// Parses `value,resample,dataset,model`; the dataset slot may hold
    /// several columns joined with `+`, e.g. `AUC,Resample,Course+Session,Model`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
        if parts.len() != 4 || parts.iter().any(|p| p.is_empty()) {
            return Err(Error::InvalidArgument(format!(
                "column mapping `{spec}` must name value,resample,dataset,model"
            )));
        }
        Ok(ColumnMapping {
            value: parts[0].into(),
            resample: parts[1].into(),
            dataset: parts[2].split('+').map(|s| s.trim().to_string()).collect(),
            model: parts[3].into(),
        })
    }
}

/// What the values measure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub name: String,
    pub higher_is_better: bool,
    /// Values must lie in `[0, 1]`.
    pub bounded: bool,
}

impl Default for MetricSpec {
    fn default() -> Self {
        MetricSpec::auc()
    }
}

impl MetricSpec {
    pub fn auc() -> Self {
        MetricSpec {
            name: "AUC".into(),
            higher_is_better: true,
            bounded: true,
        }
    }
}

/// Complete grid of metric values indexed by (dataset, model, fold).
///
/// Immutable once built; every cell is finite and, for bounded metrics, in
/// `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerfTable {
    datasets: Vec<String>,
    models: Vec<String>,
    folds: Vec<FoldId>,
    values: Vec<f64>,
    metric: MetricSpec,
}

impl PerfTable {
    /// Builds a table from a dense `values[dataset][model][fold]` array.
    pub fn from_grid(
        datasets: Vec<String>,
        models: Vec<String>,
        folds: Vec<FoldId>,
        values: Vec<Vec<Vec<f64>>>,
        metric: MetricSpec,
    ) -> Result<Self> {
        let (n, k, r) = (datasets.len(), models.len(), folds.len());
        let mut problems = size_problems(n, k, r);
        let mut flat = Vec::with_capacity(n * k * r);
        if values.len() != n
            || values
                .iter()
                .any(|m| m.len() != k || m.iter().any(|f| f.len() != r))
        {
            return Err(Error::InvalidArgument(format!(
                "grid shape does not match {n} datasets x {k} models x {r} folds"
            )));
        }
        for &v in values.iter().flatten().flatten() {
            // report the line this cell would occupy in canonical CSV form
            let line = (flat.len() + 2) as u64;
            check_value(v, line, &metric, &mut problems);
            flat.push(v);
        }
        if !problems.is_empty() {
            return Err(Error::InvalidTable(problems));
        }
        Ok(PerfTable {
            datasets,
            models,
            folds,
            values: flat,
            metric,
        })
    }

    pub fn datasets(&self) -> &[String] {
        &self.datasets
    }

    pub fn models(&self) -> &[String] {
        &self.models
    }

    pub fn folds(&self) -> &[FoldId] {
        &self.folds
    }

    pub fn metric(&self) -> &MetricSpec {
        &self.metric
    }

    pub fn n_datasets(&self) -> usize {
        self.datasets.len()
    }

    pub fn n_models(&self) -> usize {
        self.models.len()
    }

    pub fn n_folds(&self) -> usize {
        self.folds.len()
    }

    pub fn model_index(&self, id: &str) -> Option<usize> {
        self.models.iter().position(|m| m == id)
    }

    pub fn value(&self, dataset: usize, model: usize, fold: usize) -> f64 {
        self.values[(dataset * self.models.len() + model) * self.folds.len() + fold]
    }

    /// Fold values of one model on one dataset.
    pub fn cell_folds(&self, dataset: usize, model: usize) -> &[f64] {
        let r = self.folds.len();
        let start = (dataset * self.models.len() + model) * r;
        &self.values[start..start + r]
    }

    /// Writes the table in canonical long format
    /// (`value,resample,dataset,model`).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::InvalidTable(vec![Problem::Csv(e.to_string())]);
        w.write_record(["value", "resample", "dataset", "model"])
            .map_err(csv_err)?;
        for (i, d) in self.datasets.iter().enumerate() {
            for (j, m) in self.models.iter().enumerate() {
                for (f, fold) in self.folds.iter().enumerate() {
                    w.write_record([
                        self.value(i, j, f).to_string(),
                        fold.to_string(),
                        d.clone(),
                        m.clone(),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn size_problems(n: usize, k: usize, r: usize) -> Vec<Problem> {
    let mut problems = Vec::new();
    for (what, found, min) in [("datasets", n, 1), ("models", k, 2), ("folds", r, 2)] {
        if found < min {
            problems.push(Problem::TooFew { what, found, min });
        }
    }
    problems
}

fn check_value(v: f64, line: u64, metric: &MetricSpec, problems: &mut Vec<Problem>) {
    if !v.is_finite() {
        problems.push(Problem::NonFinite { line });
    } else if metric.bounded && !(0.0..=1.0).contains(&v) {
        problems.push(Problem::OutOfBounds { line, value: v });
    }
}

fn intern(order: &mut Vec<String>, index: &mut HashMap<String, usize>, key: String) -> usize {
    if let Some(&i) = index.get(&key) {
        return i;
    }
    order.push(key.clone());
    index.insert(key, order.len() - 1);
    order.len() - 1
}

/// Reads a long-format results CSV into a validated [`PerfTable`].
///
/// Row order is irrelevant. Datasets and models keep first-appearance order;
/// folds are sorted by repetition, then fold. Every problem found is reported,
/// including each missing cell of an incomplete grid.
pub fn parse_results_csv<R: Read>(
    reader: R,
    mapping: &ColumnMapping,
    metric: &MetricSpec,
) -> Result<PerfTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::Fields)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::InvalidTable(vec![Problem::Csv(e.to_string())]))?
        .clone();
    let mut problems = Vec::new();
    let mut column = |name: &str| {
        let pos = headers.iter().position(|h| h == name);
        if pos.is_none() {
            problems.push(Problem::MissingColumn(name.to_string()));
        }
        pos
    };
    let value_col = column(&mapping.value);
    let resample_col = column(&mapping.resample);
    let dataset_cols: Vec<Option<usize>> = mapping.dataset.iter().map(|c| column(c)).collect();
    let model_col = column(&mapping.model);
    if !problems.is_empty() {
        return Err(Error::InvalidTable(problems));
    }
    let (value_col, resample_col, model_col) =
        (value_col.unwrap(), resample_col.unwrap(), model_col.unwrap());
    let dataset_cols: Vec<usize> = dataset_cols.into_iter().flatten().collect();

    let mut datasets = Vec::new();
    let mut dataset_index = HashMap::new();
    let mut models = Vec::new();
    let mut model_index = HashMap::new();
    let mut fold_set = BTreeSet::new();
    let mut cells: HashMap<(usize, usize, FoldId), f64> = HashMap::new();

    for record in rdr.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                problems.push(Problem::Csv(e.to_string()));
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        let raw = record.get(value_col).unwrap_or("");
        let value = match raw.parse::<f64>() {
            Ok(v) => v,
            Err(_) => {
                problems.push(Problem::NonNumeric {
                    line,
                    text: raw.to_string(),
                });
                continue;
            }
        };
        let before = problems.len();
        check_value(value, line, metric, &mut problems);
        if problems.len() > before {
            continue;
        }
        let raw_fold = record.get(resample_col).unwrap_or("");
        let fold = match raw_fold.parse::<FoldId>() {
            Ok(f) => f,
            Err(_) => {
                problems.push(Problem::MalformedResample {
                    line,
                    text: raw_fold.to_string(),
                });
                continue;
            }
        };
        let dataset_key = dataset_cols
            .iter()
            .map(|&c| record.get(c).unwrap_or(""))
            .collect::<Vec<_>>()
            .join(DATASET_KEY_SEPARATOR);
        let model_key = record.get(model_col).unwrap_or("").to_string();
        let i = intern(&mut datasets, &mut dataset_index, dataset_key);
        let j = intern(&mut models, &mut model_index, model_key);
        fold_set.insert(fold);
        if cells.insert((i, j, fold), value).is_some() {
            problems.push(Problem::DuplicateCell {
                dataset: datasets[i].clone(),
                model: models[j].clone(),
                fold,
            });
        }
    }

    let folds: Vec<FoldId> = fold_set.into_iter().collect();
    problems.extend(size_problems(datasets.len(), models.len(), folds.len()));

    let mut values = Vec::with_capacity(datasets.len() * models.len() * folds.len());
    for (i, d) in datasets.iter().enumerate() {
        for (j, m) in models.iter().enumerate() {
            for &fold in &folds {
                match cells.get(&(i, j, fold)) {
                    Some(&v) => values.push(v),
                    None => {
                        problems.push(Problem::MissingCell {
                            dataset: d.clone(),
                            model: m.clone(),
                            fold,
                        });
                        values.push(f64::NAN);
                    }
                }
            }
        }
    }
    if !problems.is_empty() {
        return Err(Error::InvalidTable(problems));
    }
    Ok(PerfTable {
        datasets,
        models,
        folds,
        values,
        metric: metric.clone(),
    })
}

/// Train/test sizes of one cross-validation fold (counts or fractions).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvGeometry {
    pub n_train: f64,
    pub n_test: f64,
}

impl CvGeometry {
    pub fn new(n_train: f64, n_test: f64) -> Result<Self> {
        if !(n_train > 0.0 && n_test > 0.0 && n_train.is_finite() && n_test.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "cv geometry needs positive sizes, got train {n_train}, test {n_test}"
            )));
        }
        Ok(CvGeometry { n_train, n_test })
    }

    /// Geometry of `folds`-fold cross-validation on `n` instances.
    pub fn k_fold(folds: u32, n: f64) -> Result<Self> {
        let test = n / f64::from(folds);
        CvGeometry::new(n - test, test)
    }

    pub fn from_train_fraction(train: f64) -> Result<Self> {
        CvGeometry::new(train, 1.0 - train)
    }
}

/// Per-dataset fold differences `x − y`, oriented so positive means `x` is
/// better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDifferences {
    pub model_x: String,
    pub model_y: String,
    pub per_dataset: Vec<Vec<f64>>,
}

impl PairDifferences {
    pub fn n_datasets(&self) -> usize {
        self.per_dataset.len()
    }

    /// The same comparison seen from `y`'s side.
    pub fn swapped(&self) -> PairDifferences {
        PairDifferences {
            model_x: self.model_y.clone(),
            model_y: self.model_x.clone(),
            per_dataset: self
                .per_dataset
                .iter()
                .map(|v| v.iter().map(|d| -d).collect())
                .collect(),
        }
    }
}

pub fn pair_differences(table: &PerfTable, x: &str, y: &str) -> Result<PairDifferences> {
    if x == y {
        return Err(Error::SameModel(x.to_string()));
    }
    let xi = table
        .model_index(x)
        .ok_or_else(|| Error::UnknownModel(x.to_string()))?;
    let yi = table
        .model_index(y)
        .ok_or_else(|| Error::UnknownModel(y.to_string()))?;
    Ok(pair_differences_by_index(table, xi, yi))
}

pub(crate) fn pair_differences_by_index(table: &PerfTable, x: usize, y: usize) -> PairDifferences {
    let sign = if table.metric.higher_is_better { 1.0 } else { -1.0 };
    let per_dataset = (0..table.n_datasets())
        .map(|i| {
            table
                .cell_folds(i, x)
                .iter()
                .zip(table.cell_folds(i, y))
                .map(|(a, b)| sign * (a - b))
                .collect()
        })
        .collect();
    PairDifferences {
        model_x: table.models[x].clone(),
        model_y: table.models[y].clone(),
        per_dataset,
    }
}

/// `N × k` matrix of fold-averaged scores, row per dataset.
pub fn dataset_means(table: &PerfTable) -> Vec<Vec<f64>> {
    let r = table.n_folds() as f64;
    (0..table.n_datasets())
        .map(|i| {
            (0..table.n_models())
                .map(|j| table.cell_folds(i, j).iter().sum::<f64>() / r)
                .collect()
        })
        .collect()
}
