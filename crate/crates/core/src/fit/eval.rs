//! Postfix evaluation with forward-mode tangents over the active terminals.

use crate::expr::{BinaryOp, Expression, Node, UnaryOp};

#[derive(Debug, Clone, Copy)]
enum Instr {
    Var(usize),
    Lit(f64),
    Param(usize),
    Unary(UnaryOp),
    Binary(BinaryOp),
}

#[derive(Debug, Clone)]
pub(crate) struct Program {
    code: Vec<Instr>,
    depth: usize,
    n_terminals: usize,
}

/// Scratch buffers reused across rows.
#[derive(Debug, Default)]
pub(crate) struct Workspace {
    values: Vec<f64>,
    tangents: Vec<f64>,
}

impl Program {
    pub(crate) fn compile(expr: &Expression) -> Self {
        fn emit(node: &Node, code: &mut Vec<Instr>, height: usize, depth: &mut usize) {
            *depth = (*depth).max(height + 1);
            match node {
                Node::Binary { op, left, right } => {
                    emit(left, code, height, depth);
                    emit(right, code, height + 1, depth);
                    code.push(Instr::Binary(*op));
                }
                Node::Unary { op, child } => {
                    emit(child, code, height, depth);
                    code.push(Instr::Unary(*op));
                }
                Node::Variable(i) => code.push(Instr::Var(*i)),
                Node::Literal(v) => code.push(Instr::Lit(*v)),
                Node::Param { id, .. } => code.push(Instr::Param(*id)),
            }
        }
        let mut code = Vec::with_capacity(expr.complexity());
        let mut depth = 0;
        emit(expr.root(), &mut code, 0, &mut depth);
        Self {
            code,
            depth,
            n_terminals: expr.n_terminals(),
        }
    }

    /// Value at one row; `params[t]` is the active value of terminal `t`.
    pub(crate) fn eval(&self, features: &[f64], params: &[f64], ws: &mut Workspace) -> f64 {
        let stack = &mut ws.values;
        stack.clear();
        for instr in &self.code {
            match *instr {
                Instr::Var(i) => stack.push(features[i]),
                Instr::Lit(v) => stack.push(v),
                Instr::Param(t) => stack.push(params[t]),
                Instr::Unary(op) => {
                    let a = stack.last_mut().expect("operand");
                    *a = op.apply(*a);
                }
                Instr::Binary(op) => {
                    let b = stack.pop().expect("operand");
                    let a = stack.last_mut().expect("operand");
                    *a = op.apply(*a, b);
                }
            }
        }
        stack[0]
    }

    /// Value and gradient with respect to each terminal's active value.
    pub(crate) fn eval_gradient(
        &self,
        features: &[f64],
        params: &[f64],
        ws: &mut Workspace,
        gradient: &mut [f64],
    ) -> f64 {
        let m = self.n_terminals;
        debug_assert_eq!(gradient.len(), m);
        ws.values.clear();
        ws.tangents.clear();
        ws.tangents.resize(self.depth * m, 0.0);
        let values = &mut ws.values;
        let tangents = &mut ws.tangents;
        for instr in &self.code {
            match *instr {
                Instr::Var(_) | Instr::Lit(_) | Instr::Param(_) => {
                    let s = values.len();
                    let t = &mut tangents[s * m..(s + 1) * m];
                    t.fill(0.0);
                    values.push(match *instr {
                        Instr::Var(i) => features[i],
                        Instr::Lit(v) => v,
                        Instr::Param(p) => {
                            t[p] = 1.0;
                            params[p]
                        }
                        _ => unreachable!(),
                    });
                }
                Instr::Unary(op) => {
                    let s = values.len() - 1;
                    let a = values[s];
                    let v = op.apply(a);
                    let factor = match op {
                        UnaryOp::Exp => v,
                        UnaryOp::Log => 1.0 / a,
                        UnaryOp::Square => 2.0 * a,
                        UnaryOp::Sqrt => 0.5 / v,
                    };
                    for x in &mut tangents[s * m..(s + 1) * m] {
                        if *x != 0.0 {
                            *x *= factor;
                        }
                    }
                    values[s] = v;
                }
                Instr::Binary(op) => {
                    let sb = values.len() - 1;
                    let sa = sb - 1;
                    let b = values.pop().expect("operand");
                    let a = values[sa];
                    let v = op.apply(a, b);
                    let (ta, tb) = tangents[sa * m..(sb + 1) * m].split_at_mut(m);
                    match op {
                        BinaryOp::Add => {
                            for (x, y) in ta.iter_mut().zip(tb.iter()) {
                                *x += *y;
                            }
                        }
                        BinaryOp::Sub => {
                            for (x, y) in ta.iter_mut().zip(tb.iter()) {
                                *x -= *y;
                            }
                        }
                        BinaryOp::Mul => {
                            for (x, y) in ta.iter_mut().zip(tb.iter()) {
                                *x = chain(*x, b) + chain(*y, a);
                            }
                        }
                        BinaryOp::Div => {
                            let q = a / b;
                            for (x, y) in ta.iter_mut().zip(tb.iter()) {
                                *x = chain(*x, 1.0 / b) - chain(*y, q / b);
                            }
                        }
                        BinaryOp::Pow => {
                            // only evaluate the factors a tangent actually needs;
                            // ln(a) is NaN for negative bases with constant exponents
                            let mut d_base = None;
                            let mut d_exp = None;
                            for (x, y) in ta.iter_mut().zip(tb.iter()) {
                                let mut d = 0.0;
                                if *x != 0.0 {
                                    d += *x * *d_base.get_or_insert_with(|| b * a.powf(b - 1.0));
                                }
                                if *y != 0.0 {
                                    d += *y * *d_exp.get_or_insert_with(|| v * a.ln());
                                }
                                *x = d;
                            }
                        }
                    }
                    values[sa] = v;
                }
            }
        }
        gradient.copy_from_slice(&tangents[..m]);
        values[0]
    }
}

#[inline]
fn chain(tangent: f64, factor: f64) -> f64 {
    if tangent == 0.0 {
        0.0
    } else {
        tangent * factor
    }
}
