//! Parameter bindings, prediction, sparse Jacobians and least-squares fitting.

mod eval;
mod lm;
mod metrics;

use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::data::{CategorySchema, Dataset};
use crate::expr::{kind_width, ExprError, Expression, ParamKind};

pub(crate) use eval::{Program, Workspace};
pub use metrics::{mse, r_squared, MetricError};

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("binding has {found} individual parameters, expression needs {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("residuals are not finite at any initialization")]
    NonFinite,
    #[error(transparent)]
    Expression(#[from] ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct TerminalBlock {
    kind: ParamKind,
    slot: usize,
    offset: usize,
    width: usize,
}

/// Where each terminal's individual parameters live in the flat vector.
///
/// Flat order: shared terminals, then partially-shared terminals grouped by
/// category (value order inside each terminal), then non-shared terminals
/// (combination order inside each terminal).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    blocks: Vec<TerminalBlock>,
    n_values: Vec<usize>,
    n_combinations: usize,
    n_shared: usize,
    n_partial: Vec<usize>,
    n_nonshared: usize,
    n_individual: usize,
}

impl ParamLayout {
    pub fn new(expr: &Expression, schema: &CategorySchema) -> Self {
        let counts = expr.param_counts(schema.n_categories());
        let n_values: Vec<usize> = (0..schema.n_categories()).map(|c| schema.n_values(c)).collect();
        let mut partial_base = Vec::with_capacity(n_values.len());
        let mut next = counts.shared;
        for (c, &n) in counts.partial.iter().enumerate() {
            partial_base.push(next);
            next += n * n_values[c];
        }
        let nonshared_base = next;
        let n_individual = nonshared_base + counts.nonshared * schema.n_combinations();

        let mut seen_shared = 0;
        let mut seen_partial = vec![0; n_values.len()];
        let mut seen_nonshared = 0;
        let blocks = expr
            .terminals()
            .iter()
            .map(|&kind| {
                let width = kind_width(kind, schema);
                let (slot, offset) = match kind {
                    ParamKind::Shared => {
                        seen_shared += 1;
                        (seen_shared - 1, seen_shared - 1)
                    }
                    ParamKind::Partial(c) => {
                        seen_partial[c] += 1;
                        let s = seen_partial[c] - 1;
                        (s, partial_base[c] + s * width)
                    }
                    ParamKind::NonShared => {
                        seen_nonshared += 1;
                        let s = seen_nonshared - 1;
                        (s, nonshared_base + s * width)
                    }
                };
                TerminalBlock {
                    kind,
                    slot,
                    offset,
                    width,
                }
            })
            .collect();
        Self {
            blocks,
            n_values,
            n_combinations: schema.n_combinations(),
            n_shared: counts.shared,
            n_partial: counts.partial,
            n_nonshared: counts.nonshared,
            n_individual,
        }
    }

    /// `k`, the length of the flat parameter vector.
    pub fn n_individual(&self) -> usize {
        self.n_individual
    }

    pub fn n_terminals(&self) -> usize {
        self.blocks.len()
    }

    /// Flat columns belonging to `terminal`.
    pub fn block(&self, terminal: usize) -> Range<usize> {
        let b = self.blocks[terminal];
        b.offset..b.offset + b.width
    }

    /// The one column of `terminal` that is active for a row.
    #[inline]
    pub fn column(&self, terminal: usize, category_values: &[usize], combination: usize) -> usize {
        let b = &self.blocks[terminal];
        match b.kind {
            ParamKind::Shared => b.offset,
            ParamKind::Partial(c) => b.offset + category_values[c],
            ParamKind::NonShared => b.offset + combination,
        }
    }

    pub fn zeros(&self) -> ParameterBinding {
        ParameterBinding {
            shared: vec![0.0; self.n_shared],
            partial: self
                .n_partial
                .iter()
                .zip(&self.n_values)
                .map(|(&n, &w)| vec![vec![0.0; w]; n])
                .collect(),
            nonshared: vec![vec![0.0; self.n_combinations]; self.n_nonshared],
        }
    }

    pub fn matches(&self, binding: &ParameterBinding) -> bool {
        binding.shared.len() == self.n_shared
            && binding.partial.len() == self.n_partial.len()
            && binding
                .partial
                .iter()
                .zip(self.n_partial.iter().zip(&self.n_values))
                .all(|(terms, (&n, &w))| terms.len() == n && terms.iter().all(|v| v.len() == w))
            && binding.nonshared.len() == self.n_nonshared
            && binding.nonshared.iter().all(|v| v.len() == self.n_combinations)
    }

    pub fn unflatten(&self, values: &[f64]) -> Result<ParameterBinding, FitError> {
        if values.len() != self.n_individual {
            return Err(FitError::DimensionMismatch {
                expected: self.n_individual,
                found: values.len(),
            });
        }
        let mut binding = self.zeros();
        let mut it = values.iter().copied();
        for v in binding
            .shared
            .iter_mut()
            .chain(binding.partial.iter_mut().flatten().flatten())
            .chain(binding.nonshared.iter_mut().flatten())
        {
            *v = it.next().expect("length checked");
        }
        Ok(binding)
    }

    fn check(&self, binding: &ParameterBinding) -> Result<Vec<f64>, FitError> {
        if !self.matches(binding) {
            return Err(FitError::DimensionMismatch {
                expected: self.n_individual,
                found: binding.len(),
            });
        }
        Ok(binding.flatten())
    }
}

/// Concrete values behind every parameter terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBinding {
    /// Indexed by shared terminal.
    pub shared: Vec<f64>,
    /// Indexed by category, then partial terminal of that category, then value.
    pub partial: Vec<Vec<Vec<f64>>>,
    /// Indexed by non-shared terminal, then combination.
    pub nonshared: Vec<Vec<f64>>,
}

impl ParameterBinding {
    /// Number of individual parameters.
    pub fn len(&self) -> usize {
        self.shared.len()
            + self.partial.iter().flatten().map(Vec::len).sum::<usize>()
            + self.nonshared.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.shared
            .iter()
            .chain(self.partial.iter().flatten().flatten())
            .chain(self.nonshared.iter().flatten())
            .copied()
            .collect()
    }

    /// Uniform random values in `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(layout: &ParamLayout, rng: &mut R) -> Self {
        let values: Vec<f64> = (0..layout.n_individual())
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        layout.unflatten(&values).expect("length matches layout")
    }
}

/// Human-readable name of every individual parameter in flat order, such as
/// `CS1`, `C1_1[B]` or `CI1[B,a]`.
pub fn parameter_labels(expr: &Expression, schema: &CategorySchema) -> Vec<String> {
    let layout = ParamLayout::new(expr, schema);
    let mut labels = vec![String::new(); layout.n_individual()];
    for t in 0..expr.n_terminals() {
        let token = expr.terminal_token(t);
        let block = layout.block(t);
        for (j, col) in block.enumerate() {
            labels[col] = match expr.terminals()[t] {
                ParamKind::Shared => token.clone(),
                ParamKind::Partial(c) => format!("{token}[{}]", schema.value_label(c, j)),
                ParamKind::NonShared => {
                    format!("{token}[{}]", schema.combination_label_separated(j))
                }
            };
        }
    }
    labels
}

/// An expression bound to a dataset, evaluated on flat parameter vectors.
pub(crate) struct Model<'a> {
    program: Program,
    layout: ParamLayout,
    ds: &'a Dataset,
}

impl<'a> Model<'a> {
    pub(crate) fn new(expr: &Expression, ds: &'a Dataset) -> Self {
        Self {
            program: Program::compile(expr),
            layout: ParamLayout::new(expr, ds.schema()),
            ds,
        }
    }

    pub(crate) fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn active(&self, row: usize, flat: &[f64], out: &mut [f64]) {
        let cats = self.ds.category_values(row);
        let combo = self.ds.combination(row);
        for (t, slot) in out.iter_mut().enumerate() {
            *slot = flat[self.layout.column(t, cats, combo)];
        }
    }

    pub(crate) fn predict(&self, flat: &[f64]) -> Vec<f64> {
        let mut ws = Workspace::default();
        let mut active = vec![0.0; self.layout.n_terminals()];
        (0..self.ds.n_rows())
            .map(|i| {
                self.active(i, flat, &mut active);
                self.program.eval(self.ds.features(i), &active, &mut ws)
            })
            .collect()
    }

    /// Fills `out` with `y - ŷ` and returns the sum of squares.
    pub(crate) fn residuals_into(&self, flat: &[f64], out: &mut [f64]) -> f64 {
        let mut ws = Workspace::default();
        let mut active = vec![0.0; self.layout.n_terminals()];
        let y = self.ds.target();
        let mut sse = 0.0;
        for (i, r) in out.iter_mut().enumerate() {
            self.active(i, flat, &mut active);
            *r = y[i] - self.program.eval(self.ds.features(i), &active, &mut ws);
            sse += *r * *r;
        }
        sse
    }

    /// Jacobian of the predictions plus residuals, in one pass.
    pub(crate) fn jacobian_into(&self, flat: &[f64], residuals: &mut [f64], jac: &mut SparseJacobian) -> f64 {
        let m = self.layout.n_terminals();
        let mut ws = Workspace::default();
        let mut active = vec![0.0; m];
        let y = self.ds.target();
        let mut sse = 0.0;
        for i in 0..self.ds.n_rows() {
            let cats = self.ds.category_values(i);
            let combo = self.ds.combination(i);
            let cols = &mut jac.columns[i * m..(i + 1) * m];
            for (t, (slot, col)) in active.iter_mut().zip(cols.iter_mut()).enumerate() {
                *col = self.layout.column(t, cats, combo);
                *slot = flat[*col];
            }
            let vals = &mut jac.values[i * m..(i + 1) * m];
            let yhat = self.program.eval_gradient(self.ds.features(i), &active, &mut ws, vals);
            residuals[i] = y[i] - yhat;
            sse += residuals[i] * residuals[i];
        }
        sse
    }

    pub(crate) fn empty_jacobian(&self) -> SparseJacobian {
        let n = self.ds.n_rows();
        let m = self.layout.n_terminals();
        SparseJacobian {
            n_rows: n,
            n_cols: self.layout.n_individual(),
            row_width: m,
            columns: vec![0; n * m],
            values: vec![0.0; n * m],
        }
    }
}

/// Row-compressed Jacobian of the predictions with exactly `m` entries per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseJacobian {
    n_rows: usize,
    n_cols: usize,
    row_width: usize,
    columns: Vec<usize>,
    values: Vec<f64>,
}

impl SparseJacobian {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Structural nonzeros per row (`m`).
    pub fn row_width(&self) -> usize {
        self.row_width
    }

    /// Column indices and values of one row, ordered by terminal.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let m = self.row_width;
        (&self.columns[i * m..(i + 1) * m], &self.values[i * m..(i + 1) * m])
    }

    /// Total stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows)
            .map(|i| {
                let mut row = vec![0.0; self.n_cols];
                let (cols, vals) = self.row(i);
                for (&c, &v) in cols.iter().zip(vals) {
                    row[c] += v;
                }
                row
            })
            .collect()
    }
}

pub fn predict(
    expr: &Expression,
    binding: &ParameterBinding,
    ds: &Dataset,
) -> Result<Vec<f64>, FitError> {
    expr.validate(ds.schema(), ds.n_features())?;
    let model = Model::new(expr, ds);
    let flat = model.layout().check(binding)?;
    Ok(model.predict(&flat))
}

/// `y - ŷ` in row order.
pub fn residuals(
    expr: &Expression,
    binding: &ParameterBinding,
    ds: &Dataset,
) -> Result<Vec<f64>, FitError> {
    expr.validate(ds.schema(), ds.n_features())?;
    let model = Model::new(expr, ds);
    let flat = model.layout().check(binding)?;
    let mut out = vec![0.0; ds.n_rows()];
    model.residuals_into(&flat, &mut out);
    Ok(out)
}

pub fn sparse_jacobian(
    expr: &Expression,
    binding: &ParameterBinding,
    ds: &Dataset,
) -> Result<SparseJacobian, FitError> {
    expr.validate(ds.schema(), ds.n_features())?;
    let model = Model::new(expr, ds);
    let flat = model.layout().check(binding)?;
    let mut jac = model.empty_jacobian();
    let mut r = vec![0.0; ds.n_rows()];
    model.jacobian_into(&flat, &mut r, &mut jac);
    Ok(jac)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub step_tol: f64,
    /// Extra runs from fresh random initializations.
    pub restarts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tol: 1e-10,
            step_tol: 1e-12,
            restarts: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Random,
    Binding(ParameterBinding),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub binding: ParameterBinding,
    pub sse: f64,
    /// `None` when the target has zero variance.
    pub r_squared: Option<f64>,
    pub n_iterations: usize,
    pub converged: bool,
}

/// Levenberg-Marquardt least squares over all individual parameters.
///
/// The first run starts from `init`; each restart starts from a fresh
/// uniform draw in `[-1, 1]`. The run with the lowest finite SSE wins.
pub fn fit_parameters<R: Rng + ?Sized>(
    expr: &Expression,
    ds: &Dataset,
    init: &Init,
    options: &FitOptions,
    rng: &mut R,
) -> Result<FitResult, FitError> {
    if ds.is_empty() {
        return Err(FitError::EmptyDataset);
    }
    expr.validate(ds.schema(), ds.n_features())?;
    let model = Model::new(expr, ds);
    let layout = model.layout();
    let first = match init {
        Init::Random => ParameterBinding::random(layout, rng).flatten(),
        Init::Binding(b) => layout.check(b)?,
    };

    let mut best: Option<lm::Outcome> = None;
    let mut start = Some(first);
    for attempt in 0..=options.restarts {
        let x0 = match start.take() {
            Some(x) => x,
            None => ParameterBinding::random(layout, rng).flatten(),
        };
        if let Some(outcome) = lm::minimize(&model, x0, options) {
            if best.as_ref().is_none_or(|b| outcome.sse < b.sse) {
                best = Some(outcome);
            }
        }
        if layout.n_individual() == 0 && attempt == 0 {
            break;
        }
    }
    let best = best.ok_or(FitError::NonFinite)?;
    let r_squared = metrics::r_squared_from_sse(ds.target(), best.sse);
    Ok(FitResult {
        binding: layout.unflatten(&best.x)?,
        sse: best.sse,
        r_squared,
        n_iterations: best.iterations,
        converged: best.converged,
    })
}

/// Multiplicative Gaussian perturbation: `p + scale * p * r`, `r ~ N(0, 1)`.
pub fn perturb<R: Rng + ?Sized>(binding: &ParameterBinding, scale: f64, rng: &mut R) -> ParameterBinding {
    perturb_with(binding, scale, || StandardNormal.sample(rng))
}

/// [`perturb`] with the normal draws supplied by the caller.
pub fn perturb_with(
    binding: &ParameterBinding,
    scale: f64,
    mut draw: impl FnMut() -> f64,
) -> ParameterBinding {
    let mut out = binding.clone();
    for p in out
        .shared
        .iter_mut()
        .chain(out.partial.iter_mut().flatten().flatten())
        .chain(out.nonshared.iter_mut().flatten())
    {
        *p += scale * *p * draw();
    }
    out
}

/// Carries parameter values over from a parent expression: terminal `t` of
/// `next` keeps the parent's values for terminal `t` when both have the same
/// kind; other terminals get fresh uniform values in `[-1, 1]`.
pub fn warm_start<R: Rng + ?Sized>(
    prev: &Expression,
    prev_binding: &ParameterBinding,
    next: &Expression,
    schema: &CategorySchema,
    rng: &mut R,
) -> ParameterBinding {
    let prev_layout = ParamLayout::new(prev, schema);
    let prev_flat = prev_binding.flatten();
    let layout = ParamLayout::new(next, schema);
    let mut flat = vec![0.0; layout.n_individual()];
    for t in 0..next.n_terminals() {
        let block = layout.block(t);
        let reuse = t < prev.n_terminals()
            && prev.terminals()[t] == next.terminals()[t]
            && prev_flat.len() == prev_layout.n_individual();
        if reuse {
            let src = prev_layout.block(t);
            flat[block].copy_from_slice(&prev_flat[src]);
        } else {
            for v in &mut flat[block] {
                *v = rng.random_range(-1.0..=1.0);
            }
        }
    }
    layout.unflatten(&flat).expect("length matches layout")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Category;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_cell(x: &[f64], y: &[f64]) -> Dataset {
        let schema = CategorySchema::new(vec![Category::new("g", ["a"])]).unwrap();
        Dataset::new(
            schema,
            vec!["v1".into()],
            x.iter().map(|&v| vec![v]).collect(),
            vec![vec![0]; x.len()],
            y.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn optimum_is_resolved_below_the_rounding_of_a_large_sse() {
        let ds = one_cell(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 4.0, 6.0, 8.0, 10.0]);
        let e = Expression::parse("CS1", ds.schema()).unwrap();
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fit = fit_parameters(&e, &ds, &Init::Random, &FitOptions::default(), &mut rng).unwrap();
            assert!((fit.binding.shared[0] - 6.0).abs() < 1e-12, "{}", fit.binding.shared[0]);
        }
    }

    #[test]
    fn constant_fits_to_constant_target() {
        let ds = one_cell(&[1.0, 2.0, 3.0, 4.0], &[5.0; 4]);
        let e = Expression::parse("CS1", ds.schema()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fit = fit_parameters(&e, &ds, &Init::Random, &FitOptions::default(), &mut rng).unwrap();
        assert!((fit.binding.shared[0] - 5.0).abs() < 1e-12);
        assert!(fit.sse < 1e-20);
        assert_eq!(fit.r_squared, None);
        assert!(fit.converged);
    }

    #[test]
    fn slope_matches_closed_form() {
        let x = [1.0, 2.0, 3.0];
        let y = [2.0, 4.0, 6.0];
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let ds = one_cell(&x, &y);
        let e = Expression::parse("CS1 * v1", ds.schema()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fit = fit_parameters(&e, &ds, &Init::Random, &FitOptions::default(), &mut rng).unwrap();
        assert!((fit.binding.shared[0] - sxy / sxx).abs() < 1e-12);
        assert_eq!(fit.r_squared.map(|r| (r - 1.0).abs() < 1e-12), Some(true));
    }

    #[test]
    fn shared_offset_residuals() {
        let ds = one_cell(&[1.0, 2.0], &[3.0, 3.0]);
        let e = Expression::parse("CS1", ds.schema()).unwrap();
        let layout = ParamLayout::new(&e, ds.schema());
        let b = layout.unflatten(&[3.25]).unwrap();
        assert_eq!(residuals(&e, &b, &ds).unwrap(), vec![-0.25, -0.25]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let ds = one_cell(&[1.0], &[1.0]);
        let e = Expression::parse("CS1 + CS2", ds.schema()).unwrap();
        let layout = ParamLayout::new(&Expression::parse("CS1", ds.schema()).unwrap(), ds.schema());
        let b = layout.unflatten(&[1.0]).unwrap();
        assert_eq!(
            predict(&e, &b, &ds),
            Err(FitError::DimensionMismatch { expected: 2, found: 1 })
        );
    }

    #[test]
    fn all_nan_initializations_fail() {
        let ds = one_cell(&[1.0, 2.0], &[1.0, 2.0]);
        let e = Expression::parse("log(0 - 1) * CS1", ds.schema()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let opts = FitOptions { restarts: 3, ..FitOptions::default() };
        assert_eq!(
            fit_parameters(&e, &ds, &Init::Random, &opts, &mut rng),
            Err(FitError::NonFinite)
        );
    }

    #[test]
    fn parameter_free_expression_is_evaluated() {
        let ds = one_cell(&[1.0, 2.0], &[1.0, 3.0]);
        let e = Expression::parse("v1", ds.schema()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fit = fit_parameters(&e, &ds, &Init::Random, &FitOptions::default(), &mut rng).unwrap();
        assert_eq!(fit.sse, 1.0);
        assert_eq!(fit.n_iterations, 0);
    }

    #[test]
    fn perturbation_is_multiplicative() {
        let schema = CategorySchema::new(vec![Category::new("g", ["a", "b"])]).unwrap();
        let e = Expression::parse("CS1 + C1_1", &schema).unwrap();
        let layout = ParamLayout::new(&e, &schema);
        let b = layout.unflatten(&[10.0, 0.0, -4.0]).unwrap();
        let p = perturb_with(&b, 0.1, || 1.0);
        assert_eq!(p.flatten(), vec![11.0, 0.0, -4.4]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(perturb(&b, 0.0, &mut rng), b);
        let q = perturb(&b, 0.1, &mut rng);
        assert_eq!(q.partial[0][0][0], 0.0);
    }

    #[test]
    fn labels_follow_flat_order() {
        let schema = CategorySchema::new(vec![
            Category::new("u", ["A", "B"]),
            Category::new("l", ["a"]),
        ])
        .unwrap();
        let e = Expression::parse("CI1 + C2_1 * C1_1 + CS1", &schema).unwrap();
        assert_eq!(
            parameter_labels(&e, &schema),
            vec!["CS1", "C1_1[A]", "C1_1[B]", "C2_1[a]", "CI1[A,a]", "CI1[B,a]"]
        );
    }

    #[test]
    fn warm_start_reuses_matching_terminals() {
        let schema = CategorySchema::new(vec![Category::new("g", ["a", "b"])]).unwrap();
        let prev = Expression::parse("C1_1 * v1 + CS1", &schema).unwrap();
        let b = ParamLayout::new(&prev, &schema).unflatten(&[7.0, 1.0, 2.0]).unwrap();
        let next = Expression::parse("C1_1 * v1 + CI1", &schema).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = warm_start(&prev, &b, &next, &schema, &mut rng);
        assert_eq!(w.partial[0][0], vec![1.0, 2.0]);
        assert!(w.nonshared[0].iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}
