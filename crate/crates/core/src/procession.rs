//! Data-reduction processions on the quartic example: points move one at a
//! time from training to test, the perturbed truth is refitted on what is
//! left, and the run stops once the training cells can no longer identify
//! every parameter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{check_identifiability, DataError, Dataset};
use crate::expr::Expression;
use crate::fit::{fit_parameters, mse, perturb, predict, FitError, FitOptions, Init};
use crate::synthetic;

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessionOptions {
    pub processions: usize,
    pub seed: u64,
    /// Scale of the multiplicative perturbation applied to the truth.
    pub perturb_scale: f64,
    pub points_per_cell: usize,
    /// `v1` is drawn uniformly from `[-range, range]`.
    pub range: f64,
    /// Fresh perturbations tried after the first when a refit misses
    /// `refit_tolerance`.
    pub restarts: usize,
    /// Training mse below which a refit counts as converged.
    pub refit_tolerance: f64,
    pub fit: FitOptions,
    /// Threads; 0 uses every available core.
    pub workers: usize,
}

impl Default for ProcessionOptions {
    fn default() -> Self {
        Self {
            processions: 100,
            seed: 0,
            perturb_scale: 0.1,
            points_per_cell: 8,
            range: 20.0,
            restarts: 5,
            refit_tolerance: 1e-10,
            fit: FitOptions::default(),
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessionRow {
    /// 1-based.
    pub procession: usize,
    pub n_train: usize,
    /// Training points per combination.
    pub counts: Vec<usize>,
    /// `None` for the first row, which has no test data.
    pub mse_test: Option<f64>,
    pub mse_train: Option<f64>,
    /// Identifiability verdict, decided before fitting.
    pub feasible: bool,
    /// Refits performed for this row.
    pub attempts: usize,
}

impl ProcessionRow {
    pub fn id(&self) -> String {
        format!("{}:{}", self.procession, self.n_train)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProcessionError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("worker pool: {0}")]
    Pool(String),
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// The shared starting dataset for a seed.
pub fn procession_dataset(expr: &Expression, options: &ProcessionOptions) -> Result<Dataset, DataError> {
    synthetic::sample(expr, options.points_per_cell, options.range, &mut stream(options.seed, 0))
}

/// One procession over `full`; `index` is 0-based.
pub fn run_procession(
    expr: &Expression,
    full: &Dataset,
    index: usize,
    options: &ProcessionOptions,
) -> Result<Vec<ProcessionRow>, FitError> {
    let mut rng = stream(options.seed, index as u64 + 1);
    let truth = synthetic::truth_binding(expr);
    let mut train: Vec<usize> = (0..full.n_rows()).collect();
    let mut test: Vec<usize> = Vec::new();
    let mut rows = Vec::new();

    let first = full.subset(&train);
    rows.push(ProcessionRow {
        procession: index + 1,
        n_train: train.len(),
        counts: first.cell_counts(),
        mse_test: None,
        mse_train: None,
        feasible: check_identifiability(expr, &first).feasible,
        attempts: 0,
    });

    while !train.is_empty() {
        let moved = train.swap_remove(rng.random_range(0..train.len()));
        test.push(moved);
        train.sort_unstable();
        let train_ds = full.subset(&train);
        let test_ds = full.subset(&test);
        let feasible = check_identifiability(expr, &train_ds).feasible;

        let mut best: Option<(f64, f64)> = None;
        let mut attempts = 0;
        if !train_ds.is_empty() {
            for _ in 0..=options.restarts {
                attempts += 1;
                let init = perturb(&truth, options.perturb_scale, &mut rng);
                let Ok(fit) = fit_parameters(expr, &train_ds, &Init::Binding(init), &options.fit, &mut rng) else {
                    continue;
                };
                let train_mse = fit.sse / train_ds.n_rows() as f64;
                let yhat = predict(expr, &fit.binding, &test_ds)?;
                let test_mse = mse(test_ds.target(), &yhat).unwrap_or(f64::NAN);
                if best.is_none_or(|(m, _)| train_mse < m) {
                    best = Some((train_mse, test_mse));
                }
                if train_mse <= options.refit_tolerance {
                    break;
                }
            }
        }
        rows.push(ProcessionRow {
            procession: index + 1,
            n_train: train.len(),
            counts: train_ds.cell_counts(),
            mse_test: Some(best.map_or(f64::NAN, |(_, t)| t)),
            mse_train: best.map(|(m, _)| m),
            feasible,
            attempts,
        });
        if !feasible {
            break;
        }
    }
    Ok(rows)
}

/// Every procession, in index order.
pub fn run_processions(expr: &Expression, options: &ProcessionOptions) -> Result<Vec<Vec<ProcessionRow>>, ProcessionError> {
    let full = procession_dataset(expr, options)?;
    let one = |i: usize| run_procession(expr, &full, i, options);
    let results: Vec<Result<Vec<ProcessionRow>, FitError>> = if options.workers == 1 {
        (0..options.processions).map(one).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(options.workers)
            .build()
            .map_err(|e| ProcessionError::Pool(e.to_string()))?
            .install(|| (0..options.processions).into_par_iter().map(one).collect())
    };
    Ok(results.into_iter().collect::<Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(processions: usize) -> ProcessionOptions {
        ProcessionOptions {
            processions,
            seed: 3,
            ..ProcessionOptions::default()
        }
    }

    #[test]
    fn rows_follow_the_log_structure() {
        let e = synthetic::quartic();
        let runs = run_processions(&e, &quick(2)).unwrap();
        assert_eq!(runs.len(), 2);
        for (p, rows) in runs.iter().enumerate() {
            assert_eq!(rows[0].id(), format!("{}:96", p + 1));
            assert_eq!(rows[0].counts, vec![8; 12]);
            assert_eq!(rows[0].mse_test, None);
            assert!(rows[0].feasible);
            for w in rows.windows(2) {
                assert_eq!(w[1].n_train + 1, w[0].n_train);
                assert!(w[0].counts.iter().zip(&w[1].counts).all(|(a, b)| b <= a));
                assert_eq!(w[1].counts.iter().sum::<usize>(), w[1].n_train);
            }
            let last = rows.last().unwrap();
            assert!(!last.feasible);
            assert!(rows[..rows.len() - 1].iter().all(|r| r.feasible));
            assert!(rows[1..rows.len() - 1].iter().all(|r| r.mse_test.is_some_and(f64::is_finite)));
            assert!(last.n_train >= 19);
        }
    }

    #[test]
    fn exact_start_reaches_round_off() {
        let e = synthetic::quartic();
        let options = ProcessionOptions {
            perturb_scale: 0.0,
            ..quick(1)
        };
        let rows = run_processions(&e, &options).unwrap().remove(0);
        for r in &rows[1..rows.len() - 1] {
            assert!(r.mse_test.unwrap() < 1e-20, "{}: {:?}", r.id(), r.mse_test);
        }
    }

    #[test]
    fn independent_of_worker_count() {
        let e = synthetic::quartic();
        let a = run_processions(&e, &quick(2)).unwrap();
        let b = run_processions(&e, &ProcessionOptions { workers: 2, ..quick(2) }).unwrap();
        assert_eq!(a, b);
    }
}
