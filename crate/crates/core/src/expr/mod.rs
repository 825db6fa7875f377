//! Expression trees with sharing-aware parameter terminals.
//!
//! A parameter terminal stands for one real value (`Shared`), one value per
//! value of a category (`Partial`), or one value per category-value
//! combination (`NonShared`). Terminal ids are dense and numbered by first
//! occurrence in left-to-right leaf order; two leaves with the same id denote
//! the same terminal.

mod generate;
mod simplify;
mod text;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::data::CategorySchema;

pub(crate) use generate::grow;
pub use generate::{random_expression, random_expression_with, random_leaf, GeneratorOptions};
pub use text::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamKind {
    Shared,
    /// Varies with the value of the given category.
    Partial(usize),
    /// Varies with the full category-value combination.
    NonShared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 5] = [Self::Add, Self::Sub, Self::Mul, Self::Div, Self::Pow];

    pub fn symbol(self) -> char {
        match self {
            Self::Add => '+',
            Self::Sub => '-',
            Self::Mul => '*',
            Self::Div => '/',
            Self::Pow => '^',
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            Self::Add | Self::Sub => 1,
            Self::Mul | Self::Div => 2,
            Self::Pow => 3,
        }
    }

    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            Self::Add => a + b,
            Self::Sub => a - b,
            Self::Mul => a * b,
            Self::Div => a / b,
            Self::Pow => a.powf(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Exp,
    Log,
    Square,
    Sqrt,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 4] = [Self::Exp, Self::Log, Self::Square, Self::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            Self::Exp => "exp",
            Self::Log => "log",
            Self::Square => "square",
            Self::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.name() == name)
    }

    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            Self::Exp => a.exp(),
            Self::Log => a.ln(),
            Self::Square => a * a,
            Self::Sqrt => a.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Binary {
        op: BinaryOp,
        left: Box<Node>,
        right: Box<Node>,
    },
    Unary {
        op: UnaryOp,
        child: Box<Node>,
    },
    /// Zero-based continuous feature index.
    Variable(usize),
    Literal(f64),
    Param {
        kind: ParamKind,
        id: usize,
    },
}

impl Node {
    pub fn binary(op: BinaryOp, left: Node, right: Node) -> Self {
        Node::Binary {
            op,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn unary(op: UnaryOp, child: Node) -> Self {
        Node::Unary {
            op,
            child: Box::new(child),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Variable(_) | Node::Literal(_) | Node::Param { .. })
    }

    /// Number of nodes in this subtree.
    pub fn size(&self) -> usize {
        match self {
            Node::Binary { left, right, .. } => 1 + left.size() + right.size(),
            Node::Unary { child, .. } => 1 + child.size(),
            _ => 1,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Binary { left, right, .. } => 1 + left.depth().max(right.depth()),
            Node::Unary { child, .. } => 1 + child.depth(),
            _ => 1,
        }
    }

    /// Preorder traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Node)) {
        f(self);
        match self {
            Node::Binary { left, right, .. } => {
                left.visit(f);
                right.visit(f);
            }
            Node::Unary { child, .. } => child.visit(f),
            _ => {}
        }
    }

    fn visit_mut(&mut self, f: &mut impl FnMut(&mut Node)) {
        f(self);
        match self {
            Node::Binary { left, right, .. } => {
                left.visit_mut(f);
                right.visit_mut(f);
            }
            Node::Unary { child, .. } => child.visit_mut(f),
            _ => {}
        }
    }

    /// The node at preorder position `index`.
    pub fn get(&self, index: usize) -> Option<&Node> {
        if index == 0 {
            return Some(self);
        }
        match self {
            Node::Binary { left, right, .. } => {
                let ls = left.size();
                if index <= ls {
                    left.get(index - 1)
                } else {
                    right.get(index - 1 - ls)
                }
            }
            Node::Unary { child, .. } => child.get(index - 1),
            _ => None,
        }
    }

    /// A copy of this tree with the node at preorder position `index`
    /// replaced by `replacement`.
    pub fn replaced(&self, index: usize, replacement: Node) -> Node {
        if index == 0 {
            return replacement;
        }
        match self {
            Node::Binary { op, left, right } => {
                let ls = left.size();
                if index <= ls {
                    Node::binary(*op, left.replaced(index - 1, replacement), (**right).clone())
                } else {
                    Node::binary(*op, (**left).clone(), right.replaced(index - 1 - ls, replacement))
                }
            }
            Node::Unary { op, child } => Node::unary(*op, child.replaced(index - 1, replacement)),
            _ => panic!("node index out of range"),
        }
    }

    pub(crate) fn max_param_id(&self) -> Option<usize> {
        let mut max = None;
        self.visit(&mut |n| {
            if let Node::Param { id, .. } = n {
                max = Some(max.map_or(*id, |m: usize| m.max(*id)));
            }
        });
        max
    }

    pub(crate) fn shift_param_ids(&mut self, by: usize) {
        self.visit_mut(&mut |n| {
            if let Node::Param { id, .. } = n {
                *id += by;
            }
        });
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExprError {
    #[error("parameter terminal {0} is used with two different kinds")]
    InconsistentTerminal(usize),
    #[error("category index {index} out of range for {n_categories} categories")]
    CategoryOutOfRange { index: usize, n_categories: usize },
    #[error("variable v{} out of range for {n_features} features", index + 1)]
    VariableOutOfRange { index: usize, n_features: usize },
}

/// Number of parameter terminals of each kind.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParamCounts {
    pub shared: usize,
    /// Indexed by category.
    pub partial: Vec<usize>,
    pub nonshared: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    terminals: Vec<ParamKind>,
}

impl Expression {
    /// Wraps a tree, renumbering parameter ids densely by first occurrence.
    /// Leaves sharing an id stay tied.
    pub fn new(mut root: Node) -> Result<Self, ExprError> {
        let mut remap: HashMap<usize, usize> = HashMap::new();
        let mut terminals: Vec<ParamKind> = Vec::new();
        let mut error = None;
        root.visit_mut(&mut |n| {
            if let Node::Param { kind, id } = n {
                let next = terminals.len();
                let new_id = *remap.entry(*id).or_insert(next);
                if new_id == next {
                    terminals.push(*kind);
                } else if terminals[new_id] != *kind && error.is_none() {
                    error = Some(ExprError::InconsistentTerminal(*id));
                }
                *id = new_id;
            }
        });
        match error {
            Some(e) => Err(e),
            None => Ok(Self { root, terminals }),
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn into_root(self) -> Node {
        self.root
    }

    /// Kind of each parameter terminal, indexed by terminal id.
    pub fn terminals(&self) -> &[ParamKind] {
        &self.terminals
    }

    /// Number of distinct parameter terminals (`m`).
    pub fn n_terminals(&self) -> usize {
        self.terminals.len()
    }

    /// Node count: every operator and every operand counts one.
    pub fn complexity(&self) -> usize {
        self.root.size()
    }

    pub fn param_counts(&self, n_categories: usize) -> ParamCounts {
        let mut counts = ParamCounts {
            shared: 0,
            partial: vec![0; n_categories],
            nonshared: 0,
        };
        for kind in &self.terminals {
            match kind {
                ParamKind::Shared => counts.shared += 1,
                ParamKind::Partial(c) => counts.partial[*c] += 1,
                ParamKind::NonShared => counts.nonshared += 1,
            }
        }
        counts
    }

    /// Total number of real values behind the parameter terminals (`k`).
    pub fn count_individual_parameters(&self, schema: &CategorySchema) -> usize {
        self.terminals
            .iter()
            .map(|kind| kind_width(*kind, schema))
            .sum()
    }

    pub fn validate(&self, schema: &CategorySchema, n_features: usize) -> Result<(), ExprError> {
        for kind in &self.terminals {
            if let ParamKind::Partial(c) = kind {
                if *c >= schema.n_categories() {
                    return Err(ExprError::CategoryOutOfRange {
                        index: *c,
                        n_categories: schema.n_categories(),
                    });
                }
            }
        }
        let mut bad = None;
        self.root.visit(&mut |n| {
            if let Node::Variable(i) = n {
                if *i >= n_features && bad.is_none() {
                    bad = Some(*i);
                }
            }
        });
        match bad {
            Some(index) => Err(ExprError::VariableOutOfRange { index, n_features }),
            None => Ok(()),
        }
    }

    /// 1-based occurrence index of a terminal among terminals of the same
    /// kind, as used in its text token.
    pub fn ordinal(&self, terminal: usize) -> usize {
        let kind = self.terminals[terminal];
        1 + self.terminals[..terminal].iter().filter(|k| **k == kind).count()
    }

    /// Text token of a terminal, e.g. `CS1`, `C2_1` or `CI1`.
    pub fn terminal_token(&self, terminal: usize) -> String {
        let j = self.ordinal(terminal);
        match self.terminals[terminal] {
            ParamKind::Shared => format!("CS{j}"),
            ParamKind::Partial(c) => format!("C{}_{j}", c + 1),
            ParamKind::NonShared => format!("CI{j}"),
        }
    }

    pub fn parse(text: &str, schema: &CategorySchema) -> Result<Self, ParseError> {
        text::parse(text, schema.n_categories())
    }

    pub fn simplify(&self) -> Expression {
        simplify::simplify(self)
    }

    /// Whether any leaf is a variable or a parameter.
    pub fn has_free_leaf(&self) -> bool {
        let mut found = false;
        self.root.visit(&mut |n| {
            found |= matches!(n, Node::Variable(_) | Node::Param { .. });
        });
        found
    }
}

pub(crate) fn kind_width(kind: ParamKind, schema: &CategorySchema) -> usize {
    match kind {
        ParamKind::Shared => 1,
        ParamKind::Partial(c) => schema.n_values(c),
        ParamKind::NonShared => schema.n_combinations(),
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&text::render(self))
    }
}
