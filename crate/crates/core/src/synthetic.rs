//! The two-category quartic example used throughout the tests and the
//! procession experiment.
//!
//! `ŷ = CS1·v1 + C1_1·v1² + C2_1·v1³ + CI1·v1⁴` over `U = {A,B,C,D}` and
//! `L = {a,b,c}`, with the shared value 100, `U`-values 10..40, `L`-values
//! 1..3 and combination values 0.01..0.12.

use rand::Rng;

use crate::data::{Category, CategorySchema, DataError, Dataset};
use crate::expr::{Expression, ParamKind};
use crate::fit::{predict, ParamLayout, ParameterBinding};

pub const QUARTIC: &str = "CS1 * v1 + C1_1 * square(v1) + C2_1 * (v1 ^ 3) + CI1 * (v1 ^ 4)";

const SHARED: f64 = 100.0;
const BY_UPPER: [f64; 4] = [10.0, 20.0, 30.0, 40.0];
const BY_LOWER: [f64; 3] = [1.0, 2.0, 3.0];
const BY_PAIR: [f64; 12] = [0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.1, 0.11, 0.12];

pub fn schema() -> CategorySchema {
    CategorySchema::new(vec![
        Category::new("u", ["A", "B", "C", "D"]),
        Category::new("l", ["a", "b", "c"]),
    ])
    .expect("static schema")
}

pub fn quartic() -> Expression {
    Expression::parse(QUARTIC, &schema()).expect("static expression")
}

/// Ground-truth values for any expression over [`schema`]: every terminal of
/// a kind receives that kind's reference values.
pub fn truth_binding(expr: &Expression) -> ParameterBinding {
    let s = schema();
    let layout = ParamLayout::new(expr, &s);
    let mut flat = vec![0.0; layout.n_individual()];
    for (t, kind) in expr.terminals().iter().enumerate() {
        let values: &[f64] = match kind {
            ParamKind::Shared => &[SHARED],
            ParamKind::Partial(0) => &BY_UPPER,
            ParamKind::Partial(_) => &BY_LOWER,
            ParamKind::NonShared => &BY_PAIR,
        };
        flat[layout.block(t)].copy_from_slice(values);
    }
    layout.unflatten(&flat).expect("length matches layout")
}

/// One row per combination with `v1 = 1`, targets from the truth binding.
pub fn reference_grid() -> Dataset {
    let s = schema();
    let rows: Vec<Vec<usize>> = (0..s.n_combinations()).map(|c| s.combination_values(c)).collect();
    generate(&quartic(), rows, vec![1.0; s.n_combinations()]).expect("finite targets")
}

/// `per_cell` points per combination with `v1` uniform in `[-range, range]`,
/// noise-free targets from `expr` under [`truth_binding`]. Fails when a
/// target is not finite.
pub fn sample<R: Rng + ?Sized>(
    expr: &Expression,
    per_cell: usize,
    range: f64,
    rng: &mut R,
) -> Result<Dataset, DataError> {
    let s = schema();
    let mut rows = Vec::new();
    let mut xs = Vec::new();
    for c in 0..s.n_combinations() {
        for _ in 0..per_cell {
            rows.push(s.combination_values(c));
            xs.push(rng.random_range(-range..=range));
        }
    }
    generate(expr, rows, xs)
}

fn generate(expr: &Expression, rows: Vec<Vec<usize>>, xs: Vec<f64>) -> Result<Dataset, DataError> {
    let features: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    let n = xs.len();
    let placeholder = Dataset::new(schema(), vec!["v1".into()], features.clone(), rows.clone(), vec![0.0; n])
        .expect("valid rows");
    let y = predict(expr, &truth_binding(expr), &placeholder).expect("layout matches");
    Dataset::new(schema(), vec!["v1".into()], features, rows, y)
}
