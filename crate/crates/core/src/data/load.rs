use std::io::Read;
use std::path::Path;

use super::{Category, CategorySchema, DataError, Dataset};

/// Loads a comma-separated file with a header row.
///
/// Category values are numbered in order of first appearance.
pub fn load_csv(
    path: impl AsRef<Path>,
    feature_columns: &[&str],
    category_columns: &[&str],
    target_column: &str,
) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path)?;
    read_csv(file, feature_columns, category_columns, target_column)
}

pub fn read_csv<R: Read>(
    reader: R,
    feature_columns: &[&str],
    category_columns: &[&str],
    target_column: &str,
) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let feature_idx = feature_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>, _>>()?;
    let category_idx = category_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>, _>>()?;
    let target_idx = find(target_column)?;

    let mut categories: Vec<Category> = category_columns
        .iter()
        .map(|name| Category::new(*name, Vec::<String>::new()))
        .collect();
    let mut features = Vec::new();
    let mut cat_rows = Vec::new();
    let mut target = Vec::new();

    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let number = |col: usize, name: &str| -> Result<f64, DataError> {
            let raw = record.get(col).unwrap_or("");
            let value: f64 = raw.parse().map_err(|_| DataError::ParseNumber {
                row,
                column: name.to_string(),
                value: raw.to_string(),
            })?;
            if !value.is_finite() {
                return Err(DataError::NonFinite {
                    row,
                    column: name.to_string(),
                });
            }
            Ok(value)
        };
        let feats = feature_idx
            .iter()
            .zip(feature_columns)
            .map(|(&col, name)| number(col, name))
            .collect::<Result<Vec<_>, _>>()?;
        let y = number(target_idx, target_column)?;
        let cats = category_idx
            .iter()
            .zip(categories.iter_mut())
            .map(|(&col, cat)| {
                let label = record.get(col).unwrap_or("");
                match cat.values.iter().position(|v| v == label) {
                    Some(p) => p,
                    None => {
                        cat.values.push(label.to_string());
                        cat.values.len() - 1
                    }
                }
            })
            .collect();
        features.push(feats);
        cat_rows.push(cats);
        target.push(y);
    }
    if target.is_empty() {
        return Err(DataError::Empty);
    }
    let schema = CategorySchema::new(categories)?;
    Dataset::new(
        schema,
        feature_columns.iter().map(|s| s.to_string()).collect(),
        features,
        cat_rows,
        target,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infers_values_in_first_appearance_order() {
        let text = "u,l,v1,y\nB,b,1,2\nA,b,2,3\nB,a,3,4\n";
        let ds = read_csv(text.as_bytes(), &["v1"], &["u", "l"], "y").unwrap();
        assert_eq!(ds.schema().categories()[0].values, vec!["B", "A"]);
        assert_eq!(ds.schema().categories()[1].values, vec!["b", "a"]);
        assert_eq!(ds.category_values(2), &[0, 1]);
        assert_eq!(ds.target(), &[2.0, 3.0, 4.0]);
    }

    #[test]
    fn reports_row_and_column_of_bad_number() {
        let text = "u,v1,y\nA,1,2\nA,2,oops\n";
        let err = read_csv(text.as_bytes(), &["v1"], &["u"], "y").unwrap_err();
        match err {
            DataError::ParseNumber { row, column, value } => {
                assert_eq!(row, 2);
                assert_eq!(column, "y");
                assert_eq!(value, "oops");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn missing_column_and_empty_file() {
        let err = read_csv("u,v1\nA,1\n".as_bytes(), &["v1"], &["u"], "y").unwrap_err();
        assert!(matches!(err, DataError::MissingColumn(c) if c == "y"));
        let err = read_csv("u,v1,y\n".as_bytes(), &["v1"], &["u"], "y").unwrap_err();
        assert!(matches!(err, DataError::Empty));
    }

    #[test]
    fn single_value_category() {
        let ds = read_csv("g,x,y\nonly,1,1\nonly,2,2\n".as_bytes(), &["x"], &["g"], "y").unwrap();
        assert_eq!(ds.schema().n_categories(), 1);
        assert_eq!(ds.schema().n_values(0), 1);
    }
}
