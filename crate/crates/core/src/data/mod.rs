//! Datasets partitioned into category-value cells.

mod flow;
mod identifiability;
mod load;
mod schema;

use rand::seq::index;
use rand::Rng;
use thiserror::Error;

pub use identifiability::{
    check_counts, check_identifiability, IdentifiabilityReport, Requirement, Shortfall,
};
pub use load::{load_csv, read_csv};
pub use schema::{Category, CategorySchema};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column '{0}'")]
    MissingColumn(String),
    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    ParseNumber {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column '{column}': value is not finite")]
    NonFinite { row: usize, column: String },
    #[error("file contains no data rows")]
    Empty,
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("{0}")]
    Shape(String),
}

/// Continuous features, category value indices and target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: CategorySchema,
    feature_names: Vec<String>,
    features: Vec<f64>,
    categories: Vec<usize>,
    combinations: Vec<usize>,
    target: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from row-wise features and category value indices.
    pub fn new(
        schema: CategorySchema,
        feature_names: Vec<String>,
        features: Vec<Vec<f64>>,
        categories: Vec<Vec<usize>>,
        target: Vec<f64>,
    ) -> Result<Self, DataError> {
        let n = target.len();
        let d = feature_names.len();
        if features.len() != n || categories.len() != n {
            return Err(DataError::Shape(format!(
                "row count mismatch: {} feature rows, {} category rows, {} targets",
                features.len(),
                categories.len(),
                n
            )));
        }
        let mut flat_features = Vec::with_capacity(n * d);
        let mut flat_categories = Vec::with_capacity(n * schema.n_categories());
        let mut combinations = Vec::with_capacity(n);
        for (i, (row, cats)) in features.iter().zip(&categories).enumerate() {
            if row.len() != d {
                return Err(DataError::Shape(format!(
                    "row {} has {} features, expected {}",
                    i + 1,
                    row.len(),
                    d
                )));
            }
            if let Some(j) = row.iter().position(|x| !x.is_finite()) {
                return Err(DataError::NonFinite {
                    row: i + 1,
                    column: feature_names[j].clone(),
                });
            }
            if cats.len() != schema.n_categories() {
                return Err(DataError::Shape(format!(
                    "row {} has {} category values, expected {}",
                    i + 1,
                    cats.len(),
                    schema.n_categories()
                )));
            }
            for (c, &v) in cats.iter().enumerate() {
                if v >= schema.n_values(c) {
                    return Err(DataError::Shape(format!(
                        "row {}: value index {} out of range for category '{}'",
                        i + 1,
                        v,
                        schema.categories()[c].name
                    )));
                }
            }
            flat_features.extend_from_slice(row);
            flat_categories.extend_from_slice(cats);
            combinations.push(schema.combination_index(cats));
        }
        if let Some(i) = target.iter().position(|y| !y.is_finite()) {
            return Err(DataError::NonFinite {
                row: i + 1,
                column: "target".into(),
            });
        }
        Ok(Self {
            schema,
            feature_names,
            features: flat_features,
            categories: flat_categories,
            combinations,
            target,
        })
    }

    pub fn schema(&self) -> &CategorySchema {
        &self.schema
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn features(&self, row: usize) -> &[f64] {
        let d = self.n_features();
        &self.features[row * d..(row + 1) * d]
    }

    /// Value index per category for `row`.
    pub fn category_values(&self, row: usize) -> &[usize] {
        let c = self.schema.n_categories();
        &self.categories[row * c..(row + 1) * c]
    }

    pub fn combination(&self, row: usize) -> usize {
        self.combinations[row]
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// Number of rows in each combination cell, indexed by combination.
    pub fn cell_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.schema.n_combinations()];
        for &c in &self.combinations {
            counts[c] += 1;
        }
        counts
    }

    /// Row indices of each combination cell, in row order.
    pub fn cell_rows(&self) -> Vec<Vec<usize>> {
        let mut cells = vec![Vec::new(); self.schema.n_combinations()];
        for (i, &c) in self.combinations.iter().enumerate() {
            cells[c].push(i);
        }
        cells
    }

    /// A new dataset holding the given rows in the given order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let d = self.n_features();
        let c = self.schema.n_categories();
        let mut features = Vec::with_capacity(rows.len() * d);
        let mut categories = Vec::with_capacity(rows.len() * c);
        let mut combinations = Vec::with_capacity(rows.len());
        let mut target = Vec::with_capacity(rows.len());
        for &r in rows {
            features.extend_from_slice(self.features(r));
            categories.extend_from_slice(self.category_values(r));
            combinations.push(self.combinations[r]);
            target.push(self.target[r]);
        }
        Dataset {
            schema: self.schema.clone(),
            feature_names: self.feature_names.clone(),
            features,
            categories,
            combinations,
            target,
        }
    }

    /// Splits every combination cell separately. A cell with `count` rows
    /// sends `count * test_fraction` rows to the test set, rounded to the
    /// nearest integer with ties going to train.
    pub fn stratified_split<R: Rng + ?Sized>(
        &self,
        test_fraction: f64,
        rng: &mut R,
    ) -> (Dataset, Dataset) {
        assert!(
            (0.0..1.0).contains(&test_fraction),
            "test_fraction must lie in [0, 1)"
        );
        let mut is_test = vec![false; self.n_rows()];
        for rows in self.cell_rows() {
            let n_test = stratum_test_count(rows.len(), test_fraction);
            for pick in index::sample(rng, rows.len(), n_test) {
                is_test[rows[pick]] = true;
            }
        }
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..self.n_rows()).partition(|&i| is_test[i]);
        (self.subset(&train), self.subset(&test))
    }
}

pub(crate) fn stratum_test_count(count: usize, test_fraction: f64) -> usize {
    let exact = count as f64 * test_fraction;
    // nearest, ties down
    (exact - 0.5).ceil().max(0.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid_dataset(per_cell: usize) -> Dataset {
        let schema = CategorySchema::new(vec![
            Category::new("u", ["A", "B", "C", "D"]),
            Category::new("l", ["a", "b", "c"]),
        ])
        .unwrap();
        let mut feats = Vec::new();
        let mut cats = Vec::new();
        let mut y = Vec::new();
        for combo in 0..schema.n_combinations() {
            for j in 0..per_cell {
                feats.push(vec![j as f64]);
                cats.push(schema.combination_values(combo));
                y.push(combo as f64);
            }
        }
        Dataset::new(schema, vec!["v1".into()], feats, cats, y).unwrap()
    }

    #[test]
    fn rounding_rule() {
        assert_eq!(stratum_test_count(8, 0.25), 2);
        assert_eq!(stratum_test_count(3, 0.5), 1);
        assert_eq!(stratum_test_count(5, 0.5), 2);
        assert_eq!(stratum_test_count(7, 0.3), 2);
        assert_eq!(stratum_test_count(1, 0.6), 1);
        assert_eq!(stratum_test_count(4, 0.0), 0);
    }

    #[test]
    fn split_takes_two_per_cell_of_eight() {
        let ds = grid_dataset(8);
        assert_eq!(ds.n_rows(), 96);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (train, test) = ds.stratified_split(0.25, &mut rng);
        assert!(test.cell_counts().iter().all(|&c| c == 2));
        assert!(train.cell_counts().iter().all(|&c| c == 6));
    }

    #[test]
    fn zero_fraction_keeps_everything_in_train() {
        let ds = grid_dataset(3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (train, test) = ds.stratified_split(0.0, &mut rng);
        assert!(test.is_empty());
        assert_eq!(train, ds);
    }

    #[test]
    fn split_preserves_membership_and_partition() {
        let ds = grid_dataset(7);
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (train, test) = ds.stratified_split(0.3, &mut rng);
            assert_eq!(train.n_rows() + test.n_rows(), ds.n_rows());
            let expected = stratum_test_count(7, 0.3);
            for (tr, te) in train.cell_counts().iter().zip(test.cell_counts()) {
                assert_eq!(te, expected);
                assert_eq!(tr + te, 7);
            }
            // targets encode the combination, so membership survives the split
            for part in [&train, &test] {
                for i in 0..part.n_rows() {
                    assert_eq!(part.target()[i] as usize, part.combination(i));
                }
            }
            // features within a cell are distinct 0..7, so overlap shows as duplicates
            let mut keys: Vec<(usize, i64)> = (0..train.n_rows())
                .map(|i| (train.combination(i), train.features(i)[0] as i64))
                .chain((0..test.n_rows()).map(|i| (test.combination(i), test.features(i)[0] as i64)))
                .collect();
            keys.sort();
            keys.dedup();
            assert_eq!(keys.len(), ds.n_rows());
        }
    }

    #[test]
    fn empty_dataset_counts_are_zero() {
        let ds = grid_dataset(0);
        assert!(ds.is_empty());
        assert_eq!(ds.cell_counts(), vec![0; 12]);
    }

    #[test]
    fn rejects_non_finite_and_bad_indices() {
        let schema = CategorySchema::new(vec![Category::new("u", ["A"])]).unwrap();
        let err = Dataset::new(
            schema.clone(),
            vec!["x".into()],
            vec![vec![f64::NAN]],
            vec![vec![0]],
            vec![1.0],
        );
        assert!(matches!(err, Err(DataError::NonFinite { .. })));
        let err = Dataset::new(schema, vec!["x".into()], vec![vec![1.0]], vec![vec![1]], vec![1.0]);
        assert!(matches!(err, Err(DataError::Shape(_))));
    }
}
