//! Grow-style random expression generation over the adapted terminal set.

use rand::Rng;

use super::{BinaryOp, Expression, Node, ParamKind, UnaryOp};
use crate::data::CategorySchema;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorOptions {
    /// Chance of stopping with a leaf at an inner position.
    pub terminal_probability: f64,
    /// Literals are drawn uniformly from `[-literal_range, literal_range]`.
    pub literal_range: f64,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self {
            terminal_probability: 0.3,
            literal_range: 5.0,
        }
    }
}

pub fn random_expression<R: Rng + ?Sized>(
    schema: &CategorySchema,
    n_features: usize,
    max_complexity: usize,
    rng: &mut R,
) -> Expression {
    random_expression_with(schema, n_features, max_complexity, &GeneratorOptions::default(), rng)
}

pub fn random_expression_with<R: Rng + ?Sized>(
    schema: &CategorySchema,
    n_features: usize,
    max_complexity: usize,
    options: &GeneratorOptions,
    rng: &mut R,
) -> Expression {
    assert!(max_complexity >= 1, "max_complexity must be at least 1");
    let mut root = Node::Literal(1.0);
    // constant-only trees are resampled a bounded number of times
    for _ in 0..32 {
        let budget = rng.random_range(1..=max_complexity);
        let mut next_id = 0;
        root = grow(schema, n_features, budget, options, rng, &mut next_id);
        if root.size() == 1 || Expression::new(root.clone()).is_ok_and(|e| e.has_free_leaf()) {
            break;
        }
    }
    Expression::new(root).expect("generated terminals are never tied")
}

/// A subtree with at most `budget` nodes; parameter ids start at `next_id`.
pub(crate) fn grow<R: Rng + ?Sized>(
    schema: &CategorySchema,
    n_features: usize,
    budget: usize,
    options: &GeneratorOptions,
    rng: &mut R,
    next_id: &mut usize,
) -> Node {
    if budget < 2 || rng.random_bool(options.terminal_probability.clamp(0.0, 1.0)) {
        return random_leaf(schema, n_features, options, rng, next_id);
    }
    let n_choices = if budget >= 3 {
        UnaryOp::ALL.len() + BinaryOp::ALL.len()
    } else {
        UnaryOp::ALL.len()
    };
    let pick = rng.random_range(0..n_choices);
    if pick < UnaryOp::ALL.len() {
        let child = grow(schema, n_features, budget - 1, options, rng, next_id);
        Node::unary(UnaryOp::ALL[pick], child)
    } else {
        let op = BinaryOp::ALL[pick - UnaryOp::ALL.len()];
        let left_budget = rng.random_range(1..=budget - 2);
        let left = grow(schema, n_features, left_budget, options, rng, next_id);
        let right = grow(schema, n_features, budget - 1 - left.size(), options, rng, next_id);
        Node::binary(op, left, right)
    }
}

/// Terminal classes: variable, literal, shared, one partial class per
/// category, non-shared. Each class is equally likely.
pub fn random_leaf<R: Rng + ?Sized>(
    schema: &CategorySchema,
    n_features: usize,
    options: &GeneratorOptions,
    rng: &mut R,
    next_id: &mut usize,
) -> Node {
    let n_classes = 4 + schema.n_categories();
    let first = if n_features == 0 { 1 } else { 0 };
    let class = rng.random_range(first..n_classes);
    let mut param = |kind| {
        let id = *next_id;
        *next_id += 1;
        Node::Param { kind, id }
    };
    match class {
        0 => Node::Variable(rng.random_range(0..n_features)),
        1 => {
            let r = options.literal_range;
            let v: f64 = rng.random_range(-r..=r);
            Node::Literal((v * 1000.0).round() / 1000.0)
        }
        2 => param(ParamKind::Shared),
        3 => param(ParamKind::NonShared),
        c => param(ParamKind::Partial(c - 4)),
    }
}
