//! Variation operators. Every operator returns a re-densified expression
//! within the complexity bound.

use rand::Rng;

use crate::data::CategorySchema;
use crate::expr::{grow, random_leaf, BinaryOp, Expression, GeneratorOptions, Node, UnaryOp};

const MAX_TRIES: usize = 10;

fn next_free_id(node: &Node) -> usize {
    node.max_param_id().map_or(0, |m| m + 1)
}

fn same_leaf(a: &Node, b: &Node) -> bool {
    match (a, b) {
        (Node::Param { kind: x, .. }, Node::Param { kind: y, .. }) => x == y,
        (Node::Literal(x), Node::Literal(y)) => x == y,
        _ => a == b,
    }
}

fn wrap(root: Node) -> Expression {
    Expression::new(root).expect("operators never tie terminals of different kinds")
}

/// Replaces one uniformly chosen node by a different node of the same arity.
/// Operators keep their children; leaves are redrawn from the full terminal
/// set and a new parameter leaf is a fresh terminal.
pub fn point_mutation<R: Rng + ?Sized>(
    expr: &Expression,
    schema: &CategorySchema,
    n_features: usize,
    options: &GeneratorOptions,
    rng: &mut R,
) -> Expression {
    let root = expr.root();
    let index = rng.random_range(0..root.size());
    let target = root.get(index).expect("index within tree");
    let replacement = match target {
        Node::Unary { op, child } => {
            let others: Vec<UnaryOp> = UnaryOp::ALL.iter().copied().filter(|o| o != op).collect();
            Node::unary(others[rng.random_range(0..others.len())], (**child).clone())
        }
        Node::Binary { op, left, right } => {
            let others: Vec<BinaryOp> = BinaryOp::ALL.iter().copied().filter(|o| o != op).collect();
            Node::binary(others[rng.random_range(0..others.len())], (**left).clone(), (**right).clone())
        }
        leaf => {
            let mut next_id = next_free_id(root);
            loop {
                let candidate = random_leaf(schema, n_features, options, rng, &mut next_id);
                if !same_leaf(&candidate, leaf) {
                    break candidate;
                }
            }
        }
    };
    wrap(root.replaced(index, replacement))
}

/// Replaces one uniformly chosen subtree by a freshly grown one sized to fit
/// the remaining complexity allowance.
pub fn subtree_mutation<R: Rng + ?Sized>(
    expr: &Expression,
    schema: &CategorySchema,
    n_features: usize,
    max_complexity: usize,
    options: &GeneratorOptions,
    rng: &mut R,
) -> Expression {
    let root = expr.root();
    let size = root.size();
    if size > max_complexity {
        return expr.clone();
    }
    let index = rng.random_range(0..size);
    let removed = root.get(index).expect("index within tree").size();
    let budget = rng.random_range(1..=max_complexity - (size - removed));
    let mut next_id = next_free_id(root);
    let fresh = grow(schema, n_features, budget, options, rng, &mut next_id);
    wrap(root.replaced(index, fresh))
}

/// Replaces a uniformly chosen subtree of `a` by a uniformly chosen subtree
/// of `b`. Offspring over `max_complexity` are redrawn up to ten times before
/// `a` is returned unchanged.
pub fn subtree_crossover<R: Rng + ?Sized>(
    a: &Expression,
    b: &Expression,
    max_complexity: usize,
    rng: &mut R,
) -> Expression {
    let (ra, rb) = (a.root(), b.root());
    let shift = next_free_id(ra);
    for _ in 0..MAX_TRIES {
        let i = rng.random_range(0..ra.size());
        let j = rng.random_range(0..rb.size());
        let mut donor = rb.get(j).expect("index within tree").clone();
        let removed = ra.get(i).expect("index within tree").size();
        if ra.size() - removed + donor.size() > max_complexity {
            continue;
        }
        donor.shift_param_ids(shift);
        return wrap(ra.replaced(i, donor));
    }
    a.clone()
}
