//! Reference values and independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sharesr::data::{Category, CategorySchema, Dataset};
use sharesr::expr::{random_expression, Expression};
use sharesr::fit::{predict, sparse_jacobian, ParamLayout, ParameterBinding};
use sharesr::search::Objectives;
use sharesr::synthetic;

/// Published targets of the twelve-row example, combination order Aa..Dc.
pub const REFERENCE_Y: [f64; 12] = [
    111.01, 112.02, 113.03, 121.04, 122.05, 123.06, 131.07, 132.08, 133.09, 141.1, 142.11, 143.12,
];

/// Published 1-based Jacobian column pattern of the twelve-row example.
pub const REFERENCE_PATTERN: [[usize; 4]; 12] = [
    [1, 2, 6, 9],
    [1, 2, 7, 10],
    [1, 2, 8, 11],
    [1, 3, 6, 12],
    [1, 3, 7, 13],
    [1, 3, 8, 14],
    [1, 4, 6, 15],
    [1, 4, 7, 16],
    [1, 4, 8, 17],
    [1, 5, 6, 18],
    [1, 5, 7, 19],
    [1, 5, 8, 20],
];

/// Published procession rows: ID, cell counts Aa..Dc, requirement verdict.
pub const REDUCTION_CASES: [(&str, [usize; 12], bool); 12] = [
    ("1:96", [8, 8, 8, 8, 8, 8, 8, 8, 8, 8, 8, 8], true),
    ("1:90", [8, 7, 8, 8, 8, 8, 5, 8, 8, 8, 6, 8], true),
    ("1:60", [7, 3, 5, 7, 6, 4, 3, 6, 6, 5, 3, 5], true),
    ("1:30", [2, 2, 1, 3, 4, 1, 1, 5, 5, 4, 1, 1], true),
    ("1:22", [2, 1, 1, 2, 3, 1, 1, 2, 5, 2, 1, 1], true),
    ("1:21", [2, 1, 1, 2, 3, 1, 1, 2, 5, 1, 1, 1], false),
    ("2:20", [1, 1, 2, 1, 4, 1, 2, 1, 1, 2, 2, 2], true),
    ("2:19", [1, 1, 2, 1, 4, 1, 2, 1, 1, 1, 2, 2], false),
    ("3:26", [3, 1, 1, 1, 4, 1, 1, 4, 5, 1, 3, 1], true),
    ("3:25", [2, 1, 1, 1, 4, 1, 1, 4, 5, 1, 3, 1], false),
    ("4:48", [5, 6, 3, 5, 6, 7, 4, 5, 3, 1, 1, 2], true),
    ("4:47", [5, 6, 3, 5, 6, 7, 4, 5, 3, 1, 1, 1], false),
];

pub fn grid_with_reference_targets() -> Dataset {
    let s = synthetic::schema();
    Dataset::new(
        s.clone(),
        vec!["v1".into()],
        vec![vec![1.0]; 12],
        (0..12).map(|c| s.combination_values(c)).collect(),
        REFERENCE_Y.to_vec(),
    )
    .unwrap()
}

/// A quartic-schema dataset with the given points per cell and random `v1`.
pub fn dataset_with_counts(counts: &[usize], seed: u64) -> Dataset {
    let s = synthetic::schema();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut feats = Vec::new();
    let mut cats = Vec::new();
    for (c, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            feats.push(vec![rng.random_range(-20.0..20.0)]);
            cats.push(s.combination_values(c));
        }
    }
    let n = feats.len();
    Dataset::new(s, vec!["v1".into()], feats, cats, vec![0.0; n]).unwrap()
}

/// Numerical rank of the column-normalized Jacobian. For a model linear in
/// its parameters, full column rank is exactly identifiability.
pub fn jacobian_rank(expr: &Expression, ds: &Dataset) -> usize {
    let layout = ParamLayout::new(expr, ds.schema());
    let ones = layout.unflatten(&vec![1.0; layout.n_individual()]).unwrap();
    let dense = sparse_jacobian(expr, &ones, ds).unwrap().to_dense();
    let (n, k) = (dense.len(), layout.n_individual());
    let mut m = DMatrix::<f64>::from_fn(n, k, |i, j| dense[i][j]);
    for j in 0..k {
        let norm = m.column(j).norm();
        if norm > 0.0 {
            m.column_mut(j).scale_mut(1.0 / norm);
        }
    }
    // pad so the SVD sees at least k rows
    if n < k {
        m = m.resize_vertically(k, 0.0);
    }
    let sv = m.singular_values();
    let max = sv.max();
    sv.iter().filter(|&&s| s > 1e-9 * max).count()
}

/// A random expression over a 2x3 schema with well-scaled data and
/// parameters of magnitude 0.5..1.5.
pub fn random_jacobian_case(rng: &mut ChaCha8Rng) -> (Expression, ParameterBinding, Dataset) {
    let schema = CategorySchema::new(vec![
        Category::new("u", ["A", "B"]),
        Category::new("l", ["a", "b", "c"]),
    ])
    .unwrap();
    let e = random_expression(&schema, 2, 12, rng);
    let n = 10;
    let feats: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.random_range(0.5..2.0), rng.random_range(0.5..2.0)])
        .collect();
    let cats: Vec<Vec<usize>> = (0..n)
        .map(|_| vec![rng.random_range(0..2), rng.random_range(0..3)])
        .collect();
    let ds = Dataset::new(schema.clone(), vec!["v1".into(), "v2".into()], feats, cats, vec![0.0; n]).unwrap();
    let layout = ParamLayout::new(&e, &schema);
    let flat: Vec<f64> = (0..layout.n_individual())
        .map(|_| rng.random_range(0.5..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    (e, layout.unflatten(&flat).unwrap(), ds)
}

/// Central differences on the flat parameter vector, step
/// `1e-6 * max(1, |p|)`. Columns indexed by parameter, then row.
pub fn finite_difference(e: &Expression, b: &ParameterBinding, ds: &Dataset) -> Option<Vec<Vec<f64>>> {
    let layout = ParamLayout::new(e, ds.schema());
    let base = b.flatten();
    let mut columns = Vec::with_capacity(base.len());
    for j in 0..base.len() {
        let h = 1e-6 * base[j].abs().max(1.0);
        let mut plus = base.clone();
        plus[j] += h;
        let mut minus = base.clone();
        minus[j] -= h;
        let fp = predict(e, &layout.unflatten(&plus).unwrap(), ds).unwrap();
        let fm = predict(e, &layout.unflatten(&minus).unwrap(), ds).unwrap();
        if fp.iter().chain(&fm).any(|v| !v.is_finite()) {
            return None;
        }
        columns.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect());
    }
    Some(columns)
}

/// Worst relative error between analytic and central-difference Jacobians
/// over `cases` random finite-valued cases.
pub fn worst_jacobian_error(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < cases {
        let (e, b, ds) = random_jacobian_case(&mut rng);
        if e.n_terminals() == 0 {
            continue;
        }
        let yhat = predict(&e, &b, &ds).unwrap();
        if yhat.iter().any(|v| !v.is_finite() || v.abs() > 1e4) {
            continue;
        }
        let Some(fd) = finite_difference(&e, &b, &ds) else {
            continue;
        };
        let jac = sparse_jacobian(&e, &b, &ds).unwrap().to_dense();
        if jac.iter().flatten().any(|v| !v.is_finite()) {
            continue;
        }
        for (i, row) in jac.iter().enumerate() {
            for (j, &analytic) in row.iter().enumerate() {
                let numeric = fd[j][i];
                let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0);
                worst = worst.max(err);
            }
        }
        checked += 1;
    }
    worst
}

/// Fronts by repeatedly removing every candidate no other remaining
/// candidate dominates. Each front in ascending index order.
pub fn brute_force_fronts(objs: &[Objectives]) -> Vec<Vec<usize>> {
    let dominates = |a: &Objectives, b: &Objectives| {
        let x = [a.loss, a.complexity as f64, a.k as f64];
        let y = [b.loss, b.complexity as f64, b.k as f64];
        x.iter().zip(&y).all(|(p, q)| p <= q) && x.iter().zip(&y).any(|(p, q)| p < q)
    };
    let mut left: Vec<usize> = (0..objs.len()).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let front: Vec<usize> = left
            .iter()
            .copied()
            .filter(|&i| !left.iter().any(|&j| dominates(&objs[j], &objs[i])))
            .collect();
        left.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

/// Coarse random objectives so that ties occur.
pub fn random_objectives(n: usize, rng: &mut ChaCha8Rng) -> Vec<Objectives> {
    (0..n)
        .map(|_| Objectives::new(rng.random_range(0..20) as f64 / 20.0, rng.random_range(1..16), rng.random_range(0..25)))
        .collect()
}
