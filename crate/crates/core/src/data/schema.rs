use std::collections::HashSet;

use super::DataError;

/// One categorical variable and its value labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Category {
    pub name: String,
    pub values: Vec<String>,
}

impl Category {
    pub fn new(name: impl Into<String>, values: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            name: name.into(),
            values: values.into_iter().map(Into::into).collect(),
        }
    }
}

/// The categorical variables of a problem.
///
/// Every row of a dataset falls into exactly one category-value combination.
/// Combinations are numbered by mixed-radix encoding of the per-category value
/// indices, with the first category most significant: for `U = {A,B,C,D}` and
/// `L = {a,b,c}` the order is `Aa, Ab, Ac, Ba, ..., Dc`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategorySchema {
    categories: Vec<Category>,
    n_combinations: usize,
}

impl CategorySchema {
    pub fn new(categories: Vec<Category>) -> Result<Self, DataError> {
        if categories.is_empty() {
            return Err(DataError::InvalidSchema("at least one category is required".into()));
        }
        for cat in &categories {
            if cat.values.is_empty() {
                return Err(DataError::InvalidSchema(format!(
                    "category '{}' has no values",
                    cat.name
                )));
            }
            let mut seen = HashSet::new();
            for v in &cat.values {
                if !seen.insert(v.as_str()) {
                    return Err(DataError::InvalidSchema(format!(
                        "duplicate value '{}' in category '{}'",
                        v, cat.name
                    )));
                }
            }
        }
        let n_combinations = categories.iter().map(|c| c.values.len()).product();
        Ok(Self {
            categories,
            n_combinations,
        })
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn n_values(&self, category: usize) -> usize {
        self.categories[category].values.len()
    }

    pub fn n_combinations(&self) -> usize {
        self.n_combinations
    }

    pub fn value_label(&self, category: usize, value: usize) -> &str {
        &self.categories[category].values[value]
    }

    pub fn value_index(&self, category: usize, label: &str) -> Option<usize> {
        self.categories[category].values.iter().position(|v| v == label)
    }

    /// Mixed-radix index of a tuple of value indices.
    pub fn combination_index(&self, values: &[usize]) -> usize {
        debug_assert_eq!(values.len(), self.categories.len());
        values
            .iter()
            .zip(&self.categories)
            .fold(0, |acc, (&v, cat)| acc * cat.values.len() + v)
    }

    /// Inverse of [`combination_index`](Self::combination_index).
    pub fn combination_values(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.categories.len()];
        for (slot, cat) in out.iter_mut().zip(&self.categories).rev() {
            let n = cat.values.len();
            *slot = index % n;
            index /= n;
        }
        out
    }

    /// Concatenated value labels, e.g. `Aa`.
    pub fn combination_label(&self, index: usize) -> String {
        self.combination_values(index)
            .iter()
            .enumerate()
            .map(|(c, &v)| self.value_label(c, v))
            .collect()
    }

    /// Comma-separated value labels, e.g. `A,a`.
    pub fn combination_label_separated(&self, index: usize) -> String {
        self.combination_values(index)
            .iter()
            .enumerate()
            .map(|(c, &v)| self.value_label(c, v))
            .collect::<Vec<_>>()
            .join(",")
    }
}
