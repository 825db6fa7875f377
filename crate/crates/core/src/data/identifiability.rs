//! Minimum-data requirements for identifying the parameters of an expression.
//!
//! Each non-shared terminal consumes one point in every cell. Points left over
//! are surplus: a partially-shared terminal on category `c` needs one surplus
//! point among the cells carrying each value of `c`, and a shared terminal needs
//! one surplus point anywhere. A surplus point can serve only one requirement,
//! so the check is a transportation problem solved by max-flow.

use super::flow::{EdgeRef, FlowNetwork};
use super::{CategorySchema, Dataset};
use crate::expr::{Expression, ParamCounts};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Requirement {
    /// Points inside one combination cell for the non-shared terminals.
    Cell { combination: usize },
    /// Surplus points carrying one value of one category.
    Value { category: usize, value: usize },
    /// Surplus points in any cell.
    Shared,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shortfall {
    pub requirement: Requirement,
    pub required: usize,
    pub available: usize,
}

impl Shortfall {
    pub fn missing(&self) -> usize {
        self.required - self.available
    }

    pub fn describe(&self, schema: &CategorySchema) -> String {
        match self.requirement {
            Requirement::Cell { combination } => format!(
                "cell {}: non-shared parameters need {} point(s), {} present",
                schema.combination_label(combination),
                self.required,
                self.available
            ),
            Requirement::Value { category, value } => format!(
                "{} = {}: partially-shared parameters need {} additional point(s), {} assignable",
                schema.categories()[category].name,
                schema.value_label(category, value),
                self.required,
                self.available
            ),
            Requirement::Shared => format!(
                "shared parameters need {} additional point(s) in any cell, {} assignable",
                self.required, self.available
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentifiabilityReport {
    pub feasible: bool,
    /// Points each cell must hold before any surplus exists.
    pub per_cell: usize,
    /// Total surplus demand of partially-shared and shared terminals.
    pub surplus_demand: usize,
    /// Surplus demand that a maximum assignment can satisfy.
    pub surplus_served: usize,
    pub shortfalls: Vec<Shortfall>,
}

pub fn check_identifiability(expr: &Expression, ds: &Dataset) -> IdentifiabilityReport {
    let counts = expr.param_counts(ds.schema().n_categories());
    check_counts(&counts, ds.schema(), &ds.cell_counts())
}

/// The same check on bare per-cell counts.
pub fn check_counts(
    params: &ParamCounts,
    schema: &CategorySchema,
    cell_counts: &[usize],
) -> IdentifiabilityReport {
    assert_eq!(cell_counts.len(), schema.n_combinations());
    assert_eq!(params.partial.len(), schema.n_categories());
    let per_cell = params.nonshared;
    let mut shortfalls = Vec::new();
    for (combination, &count) in cell_counts.iter().enumerate() {
        if count < per_cell {
            shortfalls.push(Shortfall {
                requirement: Requirement::Cell { combination },
                required: per_cell,
                available: count,
            });
        }
    }
    let cells_ok = shortfalls.is_empty();

    // source -> cell -> {value demand, shared demand} -> sink
    let n_cells = schema.n_combinations();
    let value_offsets: Vec<usize> = (0..schema.n_categories())
        .scan(1 + n_cells, |next, c| {
            let start = *next;
            *next += schema.n_values(c);
            Some(start)
        })
        .collect();
    let shared_node = 1 + n_cells + (0..schema.n_categories()).map(|c| schema.n_values(c)).sum::<usize>();
    let sink = shared_node + 1;
    let mut net = FlowNetwork::new(sink + 1);
    let unbounded = cell_counts.iter().sum::<usize>() as u64 + 1;

    for (combination, &count) in cell_counts.iter().enumerate() {
        let residual = count.saturating_sub(per_cell) as u64;
        if residual == 0 {
            continue;
        }
        let node = 1 + combination;
        net.add_edge(0, node, residual);
        for (c, &v) in schema.combination_values(combination).iter().enumerate() {
            if params.partial[c] > 0 {
                net.add_edge(node, value_offsets[c] + v, unbounded);
            }
        }
        if params.shared > 0 {
            net.add_edge(node, shared_node, unbounded);
        }
    }
    let mut demand_edges: Vec<(Requirement, usize, EdgeRef)> = Vec::new();
    for (c, &n) in params.partial.iter().enumerate() {
        if n == 0 {
            continue;
        }
        for v in 0..schema.n_values(c) {
            let e = net.add_edge(value_offsets[c] + v, sink, n as u64);
            demand_edges.push((Requirement::Value { category: c, value: v }, n, e));
        }
    }
    if params.shared > 0 {
        let e = net.add_edge(shared_node, sink, params.shared as u64);
        demand_edges.push((Requirement::Shared, params.shared, e));
    }
    let surplus_demand: usize = demand_edges.iter().map(|(_, n, _)| n).sum();
    let surplus_served = net.max_flow(0, sink) as usize;
    for (requirement, required, edge) in demand_edges {
        let available = net.flow_on(edge) as usize;
        if available < required {
            shortfalls.push(Shortfall {
                requirement,
                required,
                available,
            });
        }
    }
    IdentifiabilityReport {
        feasible: cells_ok && surplus_served == surplus_demand,
        per_cell,
        surplus_demand,
        surplus_served,
        shortfalls,
    }
}
