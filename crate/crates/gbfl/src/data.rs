//! Tabular dataset container: CSV ingestion, per-feature bounds and base
//! values, deterministic stratified splitting.
//!
//! Labels are remapped to dense integers `0..K-1` in first-appearance order
//! so the rest of the pipeline only ever sees class ids. The original label
//! strings are kept for round-tripping and for the mapping file written next
//! to reports.

use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GbflError, Result};

/// A numeric feature matrix with dense integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    label_column: String,
    /// Dense class id -> original label text, in first-appearance order.
    label_names: Vec<String>,
}

impl Dataset {
    /// Build a dataset from parts, validating the type invariants
    /// (finite features, labels within `0..n_classes`, non-empty shape).
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        label_column: impl Into<String>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 || d == 0 {
            return Err(GbflError::EmptyDataset(format!(
                "need at least 1 sample and 1 feature, got {n} x {d}"
            )));
        }
        if labels.len() != n {
            return Err(GbflError::DimensionMismatch {
                expected: n,
                got: labels.len(),
            });
        }
        if feature_names.len() != d {
            return Err(GbflError::DimensionMismatch {
                expected: d,
                got: feature_names.len(),
            });
        }
        if let Some(v) = features.iter().find(|v| !v.is_finite()) {
            return Err(GbflError::InvalidArgument(format!(
                "non-finite feature value {v}"
            )));
        }
        let k = label_names.len();
        if k == 0 {
            return Err(GbflError::EmptyDataset("no classes".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(GbflError::InvalidArgument(format!(
                "label id {bad} out of range for {k} classes"
            )));
        }
        Ok(Dataset {
            features,
            labels,
            feature_names,
            label_column: label_column.into(),
            label_names,
        })
    }

    /// Convenience constructor for synthetic data with integer labels
    /// `0..K-1` and generated feature names `x0..x{d-1}`.
    pub fn from_parts(features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        let d = features.ncols();
        let k = labels.iter().copied().max().map_or(0, |m| m + 1);
        Dataset::new(
            features,
            labels,
            (0..d).map(|j| format!("x{j}")).collect(),
            "label",
            (0..k).map(|c| c.to_string()).collect(),
        )
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_column(&self) -> &str {
        &self.label_column
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    /// New dataset holding the given rows (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(GbflError::EmptyDataset("empty subset".into()));
        }
        let d = self.n_features();
        let mut features = Array2::zeros((indices.len(), d));
        let mut labels = Vec::with_capacity(indices.len());
        for (r, &i) in indices.iter().enumerate() {
            features.row_mut(r).assign(&self.features.row(i));
            labels.push(self.labels[i]);
        }
        Ok(Dataset {
            features,
            labels,
            feature_names: self.feature_names.clone(),
            label_column: self.label_column.clone(),
            label_names: self.label_names.clone(),
        })
    }

    /// Label mapping (original text -> dense id) as a JSON string.
    pub fn label_mapping_json(&self) -> String {
        let entries: Vec<serde_json::Value> = self
            .label_names
            .iter()
            .enumerate()
            .map(|(id, name)| serde_json::json!({ "label": name, "id": id }))
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "label_column": self.label_column,
            "mapping": entries,
        }))
        .expect("label mapping serializes")
    }
}

/// Per-feature lower and upper bounds, `lower[j] <= upper[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBounds {
    lower: Array1<f64>,
    upper: Array1<f64>,
}

impl FeatureBounds {
    pub fn new(lower: Array1<f64>, upper: Array1<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(GbflError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for j in 0..lower.len() {
            if !(lower[j] <= upper[j]) {
                return Err(GbflError::InvalidArgument(format!(
                    "lower bound {} exceeds upper bound {} for feature {j}",
                    lower[j], upper[j]
                )));
            }
        }
        Ok(FeatureBounds { lower, upper })
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn lower(&self) -> &Array1<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &Array1<f64> {
        &self.upper
    }

    pub fn range(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    /// A feature whose observed values were all identical.
    pub fn is_degenerate(&self, j: usize) -> bool {
        self.lower[j] == self.upper[j]
    }
}

/// The "least interesting" value per feature; deviation from it carries
/// class signal. Always within the feature bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseValues {
    values: Array1<f64>,
}

impl BaseValues {
    pub fn new(values: Array1<f64>, bounds: &FeatureBounds) -> Result<Self> {
        if values.len() != bounds.len() {
            return Err(GbflError::DimensionMismatch {
                expected: bounds.len(),
                got: values.len(),
            });
        }
        for j in 0..values.len() {
            if values[j] < bounds.lower()[j] || values[j] > bounds.upper()[j] {
                return Err(GbflError::InvalidArgument(format!(
                    "base value {} for feature {j} outside bounds [{}, {}]",
                    values[j],
                    bounds.lower()[j],
                    bounds.upper()[j]
                )));
            }
        }
        Ok(BaseValues { values })
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn get(&self, j: usize) -> f64 {
        self.values[j]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// How base values are derived from data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseValueStrategy {
    /// Per-feature median; for even sample counts the lower of the two
    /// middle values (deterministic, no averaging).
    Median,
    /// All-zero vector, clamped into the feature bounds.
    Zeros,
    /// Caller-provided vector; must have length d and lie within bounds.
    Explicit(Vec<f64>),
}

/// Load a CSV file with a header row. Every column except `label_column`
/// must parse as a real number; labels are remapped to dense ids in
/// first-appearance order. Row order is preserved.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => GbflError::Io {
                path: path_str.clone(),
                source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
            },
            _ => GbflError::CsvParse {
                path: path_str.clone(),
                row: 0,
                column: String::new(),
                message: e.to_string(),
            },
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| GbflError::CsvParse {
            path: path_str.clone(),
            row: 0,
            column: String::new(),
            message: e.to_string(),
        })?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if headers.is_empty() {
        return Err(GbflError::EmptyDataset(path_str));
    }
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| GbflError::MissingLabelColumn(label_column.to_string()))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if feature_names.is_empty() {
        return Err(GbflError::EmptyDataset(format!(
            "{path_str}: no feature columns besides the label"
        )));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut label_names: Vec<String> = Vec::new();
    let mut label_ids: HashMap<String, usize> = HashMap::new();

    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| GbflError::CsvParse {
            path: path_str.clone(),
            row: r + 1,
            column: String::new(),
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(GbflError::CsvParse {
                path: path_str.clone(),
                row: r + 1,
                column: String::new(),
                message: format!("expected {} fields, got {}", headers.len(), record.len()),
            });
        }
        let mut row = Vec::with_capacity(feature_names.len());
        for (c, field) in record.iter().enumerate() {
            if c == label_idx {
                let text = field.to_string();
                let next_id = label_names.len();
                let id = *label_ids.entry(text.clone()).or_insert_with(|| {
                    label_names.push(text);
                    next_id
                });
                labels.push(id);
            } else {
                let v: f64 = field.trim().parse().map_err(|_| GbflError::CsvParse {
                    path: path_str.clone(),
                    row: r + 1,
                    column: headers[c].clone(),
                    message: format!("cannot parse `{field}` as a number"),
                })?;
                if !v.is_finite() {
                    return Err(GbflError::CsvParse {
                        path: path_str.clone(),
                        row: r + 1,
                        column: headers[c].clone(),
                        message: format!("non-finite value `{field}`"),
                    });
                }
                row.push(v);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(GbflError::EmptyDataset(path_str));
    }

    let d = feature_names.len();
    let mut features = Array2::zeros((rows.len(), d));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            features[[i, j]] = v;
        }
    }
    Dataset::new(features, labels, feature_names, label_column, label_names)
}

/// Write a dataset as CSV. Values are printed with 17 significant digits so
/// `load_csv(save_csv(ds))` reproduces the feature matrix bit-exactly.
pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| GbflError::ModelFile {
            path: path_str.clone(),
            message: e.to_string(),
        })?;
    let mut header: Vec<&str> = data.feature_names().iter().map(|s| s.as_str()).collect();
    header.push(data.label_column());
    writer
        .write_record(&header)
        .map_err(|e| GbflError::ModelFile {
            path: path_str.clone(),
            message: e.to_string(),
        })?;
    for i in 0..data.n_samples() {
        let mut record: Vec<String> = data
            .row(i)
            .iter()
            .map(|v| format!("{v:.16e}"))
            .collect();
        record.push(data.label_names()[data.labels()[i]].clone());
        writer
            .write_record(&record)
            .map_err(|e| GbflError::ModelFile {
                path: path_str.clone(),
                message: e.to_string(),
            })?;
    }
    writer.flush().map_err(|e| GbflError::io(path_str, e))?;
    Ok(())
}

/// Column-wise min/max of the feature matrix.
pub fn derive_bounds(data: &Dataset) -> FeatureBounds {
    let d = data.n_features();
    let mut lower = Array1::from_elem(d, f64::INFINITY);
    let mut upper = Array1::from_elem(d, f64::NEG_INFINITY);
    for row in data.features().rows() {
        for j in 0..d {
            lower[j] = lower[j].min(row[j]);
            upper[j] = upper[j].max(row[j]);
        }
    }
    FeatureBounds { lower, upper }
}

/// Derive base values per the chosen strategy.
pub fn derive_base_values(
    data: &Dataset,
    bounds: &FeatureBounds,
    strategy: &BaseValueStrategy,
) -> Result<BaseValues> {
    let d = data.n_features();
    match strategy {
        BaseValueStrategy::Median => {
            let mut values = Array1::zeros(d);
            for j in 0..d {
                let mut column: Vec<f64> = data.features().column(j).to_vec();
                column.sort_by(|a, b| a.total_cmp(b));
                // Lower-middle convention for even n.
                values[j] = column[(column.len() - 1) / 2];
            }
            BaseValues::new(values, bounds)
        }
        BaseValueStrategy::Zeros => {
            let mut values = Array1::zeros(d);
            for j in 0..d {
                values[j] = 0.0_f64.clamp(bounds.lower()[j], bounds.upper()[j]);
            }
            BaseValues::new(values, bounds)
        }
        BaseValueStrategy::Explicit(v) => {
            if v.len() != d {
                return Err(GbflError::DimensionMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
            BaseValues::new(Array1::from_vec(v.clone()), bounds)
        }
    }
}

/// Deterministic stratified split into (train, test). Within each class the
/// row order is shuffled with a seeded RNG and `round(count * test_fraction)`
/// rows (at least 1, at most count-1) go to the test side. Output rows keep
/// their original relative order.
pub fn split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(GbflError::InvalidArgument(format!(
            "test_fraction must be in (0,1), got {test_fraction}"
        )));
    }
    let k = data.n_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &label) in data.labels().iter().enumerate() {
        by_class[label].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (c, indices) in by_class.iter().enumerate() {
        if indices.len() < 2 {
            return Err(GbflError::UnstratifiableClass(
                data.label_names()[c].clone(),
            ));
        }
        let mut shuffled = indices.clone();
        shuffled.shuffle(&mut rng);
        let want = (indices.len() as f64 * test_fraction + 0.5).floor() as usize;
        let n_test = want.clamp(1, indices.len() - 1);
        test_idx.extend_from_slice(&shuffled[..n_test]);
        train_idx.extend_from_slice(&shuffled[n_test..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((data.subset(&train_idx)?, data.subset(&test_idx)?))
}

/// Deterministic stratified fold assignment: returns `folds` disjoint index
/// sets covering `0..n_samples`, each with per-class proportions preserved
/// to rounding.
pub fn stratified_folds(data: &Dataset, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(GbflError::InvalidArgument(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    if data.n_samples() < folds {
        return Err(GbflError::InvalidArgument(format!(
            "dataset of {} samples is too small for {folds} folds",
            data.n_samples()
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); data.n_classes()];
    for (i, &label) in data.labels().iter().enumerate() {
        by_class[label].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![Vec::new(); folds];
    // Rolling cursor across classes keeps overall fold sizes within 1.
    let mut cursor = 0usize;
    for indices in by_class.iter() {
        let mut shuffled = indices.clone();
        shuffled.shuffle(&mut rng);
        for idx in shuffled {
            assignment[cursor % folds].push(idx);
            cursor += 1;
        }
    }
    for fold in &mut assignment {
        fold.sort_unstable();
    }
    Ok(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::io::Write;

    fn write_temp_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn load_csv_remaps_labels_by_first_appearance() {
        let f = write_temp_csv("a,b,y\n1,2,cat\n3,4,dog\n5,6,cat\n");
        let ds = load_csv(f.path(), "y").unwrap();
        assert_eq!(ds.n_samples(), 3);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.n_classes(), 2);
        assert_eq!(ds.labels(), &[0, 1, 0]);
        assert_eq!(ds.label_names(), &["cat".to_string(), "dog".to_string()]);
        assert_eq!(ds.feature_names(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn load_csv_single_row() {
        let f = write_temp_csv("a,y\n1.5,pos\n");
        let ds = load_csv(f.path(), "y").unwrap();
        assert_eq!(ds.n_samples(), 1);
        assert_eq!(ds.n_classes(), 1);
    }

    #[test]
    fn load_csv_reports_bad_cell() {
        let f = write_temp_csv("a,b,y\n1,2,cat\n3,oops,dog\n");
        let err = load_csv(f.path(), "y").unwrap_err();
        match err {
            GbflError::CsvParse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn load_csv_missing_label_column() {
        let f = write_temp_csv("a,b\n1,2\n");
        assert!(matches!(
            load_csv(f.path(), "y").unwrap_err(),
            GbflError::MissingLabelColumn(_)
        ));
    }

    #[test]
    fn load_csv_empty_file() {
        let f = write_temp_csv("a,b,y\n");
        assert!(matches!(
            load_csv(f.path(), "y").unwrap_err(),
            GbflError::EmptyDataset(_)
        ));
    }

    #[test]
    fn csv_round_trip_is_identity() {
        let ds = Dataset::new(
            array![
                [1.0, -2.5e-17],
                [0.1 + 0.2, 3.0],
                [f64::MIN_POSITIVE, 1e300]
            ],
            vec![0, 1, 0],
            vec!["a".into(), "b".into()],
            "y",
            vec!["no".into(), "yes".into()],
        )
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_csv(&ds, f.path()).unwrap();
        let loaded = load_csv(f.path(), "y").unwrap();
        assert_eq!(loaded, ds);
    }

    #[test]
    fn derive_bounds_min_max() {
        let ds = Dataset::from_parts(array![[0.0, 10.0], [4.0, -2.0]], vec![0, 1]).unwrap();
        let b = derive_bounds(&ds);
        assert_eq!(b.lower().to_vec(), vec![0.0, -2.0]);
        assert_eq!(b.upper().to_vec(), vec![4.0, 10.0]);
        assert!(!b.is_degenerate(0));
    }

    #[test]
    fn derive_bounds_flags_constant_column() {
        let ds = Dataset::from_parts(array![[2.0], [2.0]], vec![0, 1]).unwrap();
        let b = derive_bounds(&ds);
        assert_eq!(b.lower()[0], 2.0);
        assert_eq!(b.upper()[0], 2.0);
        assert!(b.is_degenerate(0));
    }

    #[test]
    fn median_lower_middle_convention() {
        let ds =
            Dataset::from_parts(array![[1.0], [2.0], [100.0]], vec![0, 0, 1]).unwrap();
        let bounds = derive_bounds(&ds);
        let b = derive_base_values(&ds, &bounds, &BaseValueStrategy::Median).unwrap();
        assert_eq!(b.get(0), 2.0);

        let ds4 =
            Dataset::from_parts(array![[1.0], [2.0], [3.0], [4.0]], vec![0, 0, 1, 1]).unwrap();
        let bounds4 = derive_bounds(&ds4);
        let b4 = derive_base_values(&ds4, &bounds4, &BaseValueStrategy::Median).unwrap();
        assert_eq!(b4.get(0), 2.0);
    }

    #[test]
    fn zeros_strategy_clamps_into_bounds() {
        let ds = Dataset::from_parts(array![[1.0], [5.0]], vec![0, 1]).unwrap();
        let bounds = derive_bounds(&ds);
        let b = derive_base_values(&ds, &bounds, &BaseValueStrategy::Zeros).unwrap();
        assert_eq!(b.get(0), 1.0);
    }

    #[test]
    fn explicit_base_values_validated() {
        let ds = Dataset::from_parts(array![[1.0], [5.0]], vec![0, 1]).unwrap();
        let bounds = derive_bounds(&ds);
        assert!(derive_base_values(
            &ds,
            &bounds,
            &BaseValueStrategy::Explicit(vec![9.0])
        )
        .is_err());
        assert!(derive_base_values(
            &ds,
            &bounds,
            &BaseValueStrategy::Explicit(vec![2.0, 3.0])
        )
        .is_err());
        let ok =
            derive_base_values(&ds, &bounds, &BaseValueStrategy::Explicit(vec![2.0])).unwrap();
        assert_eq!(ok.get(0), 2.0);
    }

    fn balanced_dataset(n: usize) -> Dataset {
        let features = Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64);
        let labels = (0..n).map(|i| i % 2).collect();
        Dataset::from_parts(features, labels).unwrap()
    }

    #[test]
    fn split_is_deterministic_and_stratified() {
        let ds = balanced_dataset(100);
        let (train_a, test_a) = split(&ds, 0.25, 0).unwrap();
        let (train_b, test_b) = split(&ds, 0.25, 0).unwrap();
        assert_eq!(train_a, train_b);
        assert_eq!(test_a, test_b);
        assert_eq!(train_a.n_samples(), 74);
        assert_eq!(test_a.n_samples(), 26);
        for class in 0..2 {
            let in_test = test_a.labels().iter().filter(|&&l| l == class).count();
            assert!(
                in_test == 12 || in_test == 13,
                "class {class} has {in_test} test samples"
            );
        }
    }

    #[test]
    fn split_is_a_partition() {
        let ds = balanced_dataset(40);
        let (train, test) = split(&ds, 0.3, 7).unwrap();
        assert_eq!(train.n_samples() + test.n_samples(), 40);
        // Features are unique per row in this fixture, so compare as sets.
        let mut seen: Vec<f64> = train
            .features()
            .column(0)
            .iter()
            .chain(test.features().column(0).iter())
            .copied()
            .collect();
        seen.sort_by(|a, b| a.total_cmp(b));
        let expected: Vec<f64> = (0..40).map(|i| (i * 2) as f64).collect();
        assert_eq!(seen, expected);
    }

    #[test]
    fn split_rejects_tiny_class() {
        let ds = Dataset::from_parts(
            array![[0.0], [1.0], [2.0], [3.0]],
            vec![0, 0, 0, 1],
        )
        .unwrap();
        let err = split(&ds, 0.25, 0).unwrap_err();
        match err {
            GbflError::UnstratifiableClass(name) => assert_eq!(name, "1"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn folds_partition_and_stratify() {
        let ds = balanced_dataset(50);
        let folds = stratified_folds(&ds, 10, 3).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        for fold in &folds {
            assert_eq!(fold.len(), 5);
        }
    }
}
