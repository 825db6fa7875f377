//! Text tables and JSON-lines records.

use std::fmt::Write as _;

use serde::Serialize;
use sharesr::data::{CategorySchema, IdentifiabilityReport};
use sharesr::fit::{parameter_labels, FitResult};
use sharesr::procession::ProcessionRow;
use sharesr::search::Candidate;

use crate::config::ConfigEcho;

#[derive(Debug, Serialize)]
pub struct Parameter {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Serialize)]
pub struct FitRecord {
    pub expression: String,
    pub sse: f64,
    /// `None` when the target has zero variance.
    pub r_squared: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub k: usize,
    pub parameters: Vec<Parameter>,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct ObjectivesRecord {
    pub loss: f64,
    pub complexity: usize,
    pub k: usize,
}

#[derive(Debug, Serialize)]
pub struct CandidateRecord<'a> {
    pub expression: String,
    pub r_squared: f64,
    pub objectives: ObjectivesRecord,
    pub parameters: Vec<Parameter>,
    /// Flat parameter vector: shared, partially shared by category, non-shared.
    pub values: Vec<f64>,
    pub seed: u64,
    pub config: &'a ConfigEcho,
}

pub fn parameters(expr: &sharesr::expr::Expression, schema: &CategorySchema, fit: &FitResult) -> Vec<Parameter> {
    parameter_labels(expr, schema)
        .into_iter()
        .zip(fit.binding.flatten())
        .map(|(label, value)| Parameter { label, value })
        .collect()
}

pub fn candidate_record<'a>(c: &Candidate, schema: &CategorySchema, seed: u64, config: &'a ConfigEcho) -> CandidateRecord<'a> {
    let (parameters, values) = match &c.fit {
        Some(fit) => (parameters(&c.expression, schema, fit), fit.binding.flatten()),
        None => (Vec::new(), Vec::new()),
    };
    CandidateRecord {
        expression: c.expression.to_string(),
        r_squared: c.r_squared(),
        objectives: ObjectivesRecord {
            loss: c.objectives.loss,
            complexity: c.objectives.complexity,
            k: c.objectives.k,
        },
        parameters,
        values,
        seed,
        config,
    }
}

pub fn fit_text(record: &FitRecord, n_rows: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "expression: {}", record.expression);
    let _ = writeln!(s, "rows: {n_rows}");
    let _ = writeln!(s, "sse: {:e}", record.sse);
    match record.r_squared {
        Some(r2) => {
            let _ = writeln!(s, "R²: {r2:.6}");
        }
        None => {
            let _ = writeln!(s, "R²: undefined (target has zero variance)");
        }
    }
    let _ = writeln!(
        s,
        "converged: {} after {} iterations",
        if record.converged { "yes" } else { "no" },
        record.iterations
    );
    let _ = writeln!(s, "individual parameters: {}", record.k);
    let width = record.parameters.iter().map(|p| p.label.len()).max().unwrap_or(0);
    for p in &record.parameters {
        let _ = writeln!(s, "  {:<width$} = {}", p.label, p.value);
    }
    s
}

/// Fixed-width archive table sorted as given.
pub fn pareto_table(candidates: &[Candidate]) -> String {
    let exprs: Vec<String> = candidates.iter().map(|c| c.expression.to_string()).collect();
    let width = exprs.iter().map(|e| e.chars().count()).max().unwrap_or(0).max("expression".len());
    let mut s = String::new();
    let _ = writeln!(s, "{:<width$}  {:>8}  {:>10}  {:>4}", "expression", "R²", "complexity", "k");
    for (c, e) in candidates.iter().zip(&exprs) {
        let pad = width - e.chars().count();
        let _ = writeln!(
            s,
            "{e}{:pad$}  {:>8.6}  {:>10}  {:>4}",
            "",
            c.r_squared(),
            c.objectives.complexity,
            c.objectives.k
        );
    }
    s
}

fn cell_labels(schema: &CategorySchema) -> Vec<String> {
    let short = schema
        .categories()
        .iter()
        .all(|c| c.values.iter().all(|v| v.chars().count() == 1));
    (0..schema.n_combinations())
        .map(|i| {
            if short {
                schema.combination_label(i)
            } else {
                schema.combination_label_separated(i)
            }
        })
        .collect()
}

pub fn check_text(schema: &CategorySchema, counts: &[usize], report: &IdentifiabilityReport) -> String {
    let labels = cell_labels(schema);
    let widths: Vec<usize> = labels
        .iter()
        .zip(counts)
        .map(|(l, c)| l.chars().count().max(c.to_string().len()))
        .collect();
    let mut s = String::new();
    let header: Vec<String> = labels.iter().zip(&widths).map(|(l, w)| format!("{l:>w$}")).collect();
    let row: Vec<String> = counts.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
    let _ = writeln!(s, "{}", header.join(" "));
    let _ = writeln!(s, "{}", row.join(" "));
    let _ = writeln!(s, "points required in every cell: {}", report.per_cell);
    let _ = writeln!(
        s,
        "additional points required: {}, assignable: {}",
        report.surplus_demand, report.surplus_served
    );
    for shortfall in &report.shortfalls {
        let _ = writeln!(s, "shortfall: {}", shortfall.describe(schema));
    }
    let _ = writeln!(s, "req: {}", if report.feasible { "yes" } else { "no" });
    s
}

pub fn procession_csv(schema: &CategorySchema, runs: &[Vec<ProcessionRow>]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "ID,{},mse_test,req", cell_labels(schema).join(","));
    for row in runs.iter().flatten() {
        let counts: Vec<String> = row.counts.iter().map(usize::to_string).collect();
        let mse = row.mse_test.map_or_else(|| "N/A".to_string(), |m| format!("{m:e}"));
        let _ = writeln!(
            s,
            "{},{},{},{}",
            row.id(),
            counts.join(","),
            mse,
            if row.feasible { "yes" } else { "no" }
        );
    }
    s
}
