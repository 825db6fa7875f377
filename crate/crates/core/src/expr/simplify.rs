//! Kind-aware simplification.
//!
//! Rules, applied bottom-up until nothing changes:
//! - a literal-only operation folds to its (finite) value;
//! - `p + q` and `p * q` fold to one terminal when `p` and `q` are distinct,
//!   untied terminals of the same kind and category;
//! - `p + c` and `p * c` (either order, `c` a finite literal, `c != 0` for `*`)
//!   fold to `p` when `p` is untied.
//!
//! Every rule is a reparameterization: any binding of the result can be
//! matched by a binding of the input and vice versa. Terminals of different
//! kinds or categories never merge, so `C1_1 * C2_1` stays as it is.

use super::{BinaryOp, Expression, Node};

pub(super) fn simplify(expr: &Expression) -> Expression {
    let mut root = expr.root().clone();
    loop {
        let mut uses = vec![0usize; root.max_param_id().map_or(0, |m| m + 1)];
        root.visit(&mut |n| {
            if let Node::Param { id, .. } = n {
                uses[*id] += 1;
            }
        });
        let mut changed = false;
        root = rewrite(root, &uses, &mut changed);
        if !changed {
            break;
        }
    }
    Expression::new(root).expect("rewrites keep kinds consistent")
}

fn rewrite(node: Node, uses: &[usize], changed: &mut bool) -> Node {
    match node {
        Node::Binary { op, left, right } => {
            let left = rewrite(*left, uses, changed);
            let right = rewrite(*right, uses, changed);
            if let Some(folded) = fold_binary(op, &left, &right, uses) {
                *changed = true;
                folded
            } else {
                Node::binary(op, left, right)
            }
        }
        Node::Unary { op, child } => {
            let child = rewrite(*child, uses, changed);
            if let Node::Literal(a) = child {
                let v = op.apply(a);
                if v.is_finite() {
                    *changed = true;
                    return Node::Literal(v);
                }
            }
            Node::unary(op, child)
        }
        leaf => leaf,
    }
}

fn fold_binary(op: BinaryOp, left: &Node, right: &Node, uses: &[usize]) -> Option<Node> {
    let untied = |id: usize| uses.get(id).copied() == Some(1);
    match (left, right) {
        (Node::Literal(a), Node::Literal(b)) => {
            let v = op.apply(*a, *b);
            v.is_finite().then_some(Node::Literal(v))
        }
        (Node::Param { kind: ka, id: a }, Node::Param { kind: kb, id: b })
            if matches!(op, BinaryOp::Add | BinaryOp::Mul)
                && ka == kb
                && a != b
                && untied(*a)
                && untied(*b) =>
        {
            Some(left.clone())
        }
        (Node::Param { id, .. }, Node::Literal(c)) | (Node::Literal(c), Node::Param { id, .. })
            if untied(*id) && c.is_finite() =>
        {
            let param = if matches!(left, Node::Param { .. }) { left } else { right };
            match op {
                BinaryOp::Add => Some(param.clone()),
                BinaryOp::Mul if *c != 0.0 => Some(param.clone()),
                _ => None,
            }
        }
        _ => None,
    }
}
