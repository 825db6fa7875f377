//! Multi-objective genetic programming over expressions with sharing-aware
//! terminals.
//!
//! Candidates are scored on `(1 - R², complexity, k)` and selected by
//! non-dominated sorting with crowding distance. Every candidate is fitted
//! with its own seeded random stream, so a run is reproducible from the
//! configured seed whatever the worker count.

mod operators;
mod pareto;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::data::Dataset;
use crate::expr::{random_expression_with, Expression, GeneratorOptions};
use crate::fit::{fit_parameters, residuals, warm_start, FitOptions, FitResult, Init, ParameterBinding};

pub use operators::{point_mutation, subtree_crossover, subtree_mutation};
pub use pareto::{pareto_rank, rank, Objectives, Ranking};

/// Attempts at drawing an initial candidate with a finite loss.
const INIT_RETRIES: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset is empty")]
    EmptyDataset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub population_size: usize,
    pub generations: usize,
    pub max_complexity: usize,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    pub subtree_mutation_rate: f64,
    pub point_mutation_rate: f64,
    pub generator: GeneratorOptions,
    pub fit: FitOptions,
    pub seed: u64,
    /// Use `k` as the third objective. When off, selection and the archive
    /// look at loss and complexity only.
    pub use_parameter_objective: bool,
    /// Threads for candidate fitting; 0 uses every available core.
    pub workers: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            population_size: 200,
            generations: 100,
            max_complexity: 15,
            tournament_size: 2,
            crossover_rate: 0.5,
            subtree_mutation_rate: 0.3,
            point_mutation_rate: 0.2,
            generator: GeneratorOptions::default(),
            fit: FitOptions::default(),
            seed: 0,
            use_parameter_objective: true,
            workers: 1,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |msg: &str| Err(SearchError::InvalidConfig(msg.to_string()));
        if self.population_size < 2 {
            return bad("population_size must be at least 2");
        }
        if self.max_complexity < 1 {
            return bad("max_complexity must be at least 1");
        }
        if self.tournament_size < 1 {
            return bad("tournament_size must be at least 1");
        }
        let rates = [
            ("crossover_rate", self.crossover_rate),
            ("subtree_mutation_rate", self.subtree_mutation_rate),
            ("point_mutation_rate", self.point_mutation_rate),
            ("terminal_probability", self.generator.terminal_probability),
        ];
        for (name, p) in rates {
            if !(0.0..=1.0).contains(&p) {
                return bad(&format!("{name} must be in [0, 1]"));
            }
        }
        if self.subtree_mutation_rate + self.point_mutation_rate > 1.0 {
            return bad("subtree_mutation_rate + point_mutation_rate must not exceed 1");
        }
        if !(self.generator.literal_range.is_finite() && self.generator.literal_range >= 0.0) {
            return bad("literal_range must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub expression: Expression,
    /// `None` when no finite fit was found.
    pub fit: Option<FitResult>,
    pub objectives: Objectives,
}

impl Candidate {
    pub fn r_squared(&self) -> f64 {
        1.0 - self.objectives.loss
    }

    pub fn binding(&self) -> Option<&ParameterBinding> {
        self.fit.as_ref().map(|f| &f.binding)
    }

    /// Objectives recomputed from the expression and stored binding.
    pub fn recompute(&self, ds: &Dataset) -> Objectives {
        let sse = self
            .binding()
            .and_then(|b| residuals(&self.expression, b, ds).ok())
            .map_or(f64::INFINITY, |r| r.iter().map(|v| v * v).sum());
        objectives(&self.expression, sse, ds)
    }
}

fn total_sum_of_squares(y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - mean) * (v - mean)).sum()
}

/// `sse / sst`; a zero-variance target scores 0 when matched exactly and 1
/// otherwise.
fn loss(sse: f64, y: &[f64]) -> f64 {
    if !sse.is_finite() {
        return f64::INFINITY;
    }
    let sst = total_sum_of_squares(y);
    if sst > 0.0 {
        sse / sst
    } else if sse == 0.0 {
        0.0
    } else {
        1.0
    }
}

fn objectives(expr: &Expression, sse: f64, ds: &Dataset) -> Objectives {
    Objectives::new(
        loss(sse, ds.target()),
        expr.complexity(),
        expr.count_individual_parameters(ds.schema()),
    )
}

/// Fits `expr` from `init` (falling back to a random start if that fails)
/// and scores it.
fn evaluate(expr: Expression, init: Option<ParameterBinding>, ds: &Dataset, options: &FitOptions, seed: u64) -> Candidate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fit = match init {
        Some(b) => fit_parameters(&expr, ds, &Init::Binding(b), options, &mut rng).ok(),
        None => None,
    };
    if fit.as_ref().is_none_or(|f| !f.sse.is_finite()) {
        fit = fit_parameters(&expr, ds, &Init::Random, options, &mut rng).ok();
    }
    let sse = fit.as_ref().map_or(f64::INFINITY, |f| f.sse);
    let objectives = objectives(&expr, sse, ds);
    Candidate {
        expression: expr,
        fit: fit.filter(|_| sse.is_finite()),
        objectives,
    }
}

struct Job {
    expression: Expression,
    init: Option<ParameterBinding>,
    seed: u64,
}

/// Final non-dominated set and run statistics.
#[derive(Debug, Clone)]
pub struct ParetoReport {
    /// Sorted by complexity, then loss.
    pub candidates: Vec<Candidate>,
    /// Best archived loss after initialization and after each generation.
    pub best_loss_history: Vec<f64>,
    pub generations: usize,
    pub seed: u64,
}

/// A search in progress; [`run_search`] drives it to completion.
pub struct Search<'a> {
    ds: &'a Dataset,
    config: SearchConfig,
    rng: ChaCha8Rng,
    pool: Option<rayon::ThreadPool>,
    population: Vec<Candidate>,
    ranking: Ranking,
    archive: Vec<Candidate>,
    history: Vec<f64>,
    generation: usize,
}

impl<'a> Search<'a> {
    /// Validates the configuration and scores the initial population.
    pub fn new(ds: &'a Dataset, config: SearchConfig) -> Result<Self, SearchError> {
        config.validate()?;
        if ds.is_empty() {
            return Err(SearchError::EmptyDataset);
        }
        let pool = (config.workers != 1).then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.workers)
                .build()
                .expect("thread pool")
        });
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut search = Self {
            ds,
            config,
            rng,
            pool,
            population: Vec::new(),
            ranking: rank(&[], true),
            archive: Vec::new(),
            history: Vec::new(),
            generation: 0,
        };
        search.population = search.initialize_population();
        search.ranking = search.rank_population(&search.population);
        for c in search.population.clone() {
            search.offer_to_archive(c);
        }
        search.history.push(search.best_loss());
        Ok(search)
    }

    pub fn population(&self) -> &[Candidate] {
        &self.population
    }

    /// All-time non-dominated candidates, in insertion order.
    pub fn archive(&self) -> &[Candidate] {
        &self.archive
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn best_loss(&self) -> f64 {
        self.archive.iter().map(|c| c.objectives.loss).fold(f64::INFINITY, f64::min)
    }

    pub fn best_loss_history(&self) -> &[f64] {
        &self.history
    }

    fn use_k(&self) -> bool {
        self.config.use_parameter_objective
    }

    fn run_jobs(&self, jobs: Vec<Job>) -> Vec<Candidate> {
        let ds = self.ds;
        let options = self.config.fit;
        let eval = |j: Job| evaluate(j.expression, j.init, ds, &options, j.seed);
        match &self.pool {
            Some(pool) => pool.install(|| jobs.into_par_iter().map(eval).collect()),
            None => jobs.into_iter().map(eval).collect(),
        }
    }

    fn random_expression(&mut self) -> Expression {
        random_expression_with(
            self.ds.schema(),
            self.ds.n_features(),
            self.config.max_complexity,
            &self.config.generator,
            &mut self.rng,
        )
        .simplify()
    }

    fn initialize_population(&mut self) -> Vec<Candidate> {
        let n = self.config.population_size;
        let mut population: Vec<Option<Candidate>> = vec![None; n];
        for attempt in 0..INIT_RETRIES {
            let open: Vec<usize> = (0..n)
                .filter(|&i| population[i].as_ref().is_none_or(|c| !c.objectives.loss.is_finite()))
                .collect();
            if open.is_empty() {
                break;
            }
            let jobs: Vec<Job> = open
                .iter()
                .map(|_| Job {
                    expression: self.random_expression(),
                    init: None,
                    seed: self.rng.random(),
                })
                .collect();
            for (i, c) in open.into_iter().zip(self.run_jobs(jobs)) {
                // later attempts only replace failures
                if attempt == 0 || c.objectives.loss.is_finite() {
                    population[i] = Some(c);
                }
            }
        }
        population.into_iter().map(|c| c.expect("filled")).collect()
    }

    fn rank_population(&self, population: &[Candidate]) -> Ranking {
        let objs: Vec<Objectives> = population.iter().map(|c| c.objectives).collect();
        rank(&objs, self.use_k())
    }

    fn tournament(&mut self, selectable: &[usize]) -> usize {
        let objs: Vec<Objectives> = self.population.iter().map(|c| c.objectives).collect();
        let mut best = selectable[self.rng.random_range(0..selectable.len())];
        for _ in 1..self.config.tournament_size {
            let other = selectable[self.rng.random_range(0..selectable.len())];
            if self.ranking.compare(&objs, other, best).is_lt() {
                best = other;
            }
        }
        best
    }

    fn vary(&mut self, selectable: &[usize]) -> (Expression, usize) {
        let schema = self.ds.schema();
        let n_features = self.ds.n_features();
        let cap = self.config.max_complexity;
        let gen = self.config.generator;
        let parent = self.tournament(selectable);
        let mut child = self.population[parent].expression.clone();
        if self.rng.random_bool(self.config.crossover_rate) {
            let donor = self.tournament(selectable);
            child = subtree_crossover(&child, &self.population[donor].expression, cap, &mut self.rng);
        }
        let r: f64 = self.rng.random();
        if r < self.config.subtree_mutation_rate {
            child = subtree_mutation(&child, schema, n_features, cap, &gen, &mut self.rng);
        } else if r < self.config.subtree_mutation_rate + self.config.point_mutation_rate {
            child = point_mutation(&child, schema, n_features, &gen, &mut self.rng);
        }
        (child.simplify(), parent)
    }

    /// One generation: variation, fitting, environmental selection and the
    /// archive update.
    pub fn step(&mut self) {
        let n = self.config.population_size;
        let finite: Vec<usize> = (0..n).filter(|&i| self.population[i].objectives.loss.is_finite()).collect();
        let selectable: Vec<usize> = if finite.is_empty() { (0..n).collect() } else { finite };

        let mut offspring: Vec<Option<Candidate>> = Vec::with_capacity(n);
        let mut jobs = Vec::new();
        let mut slots = Vec::new();
        for _ in 0..n {
            let (child, parent) = self.vary(&selectable);
            let seed: u64 = self.rng.random();
            let p = &self.population[parent];
            if child == p.expression {
                offspring.push(Some(p.clone()));
                continue;
            }
            let init = p
                .binding()
                .map(|b| warm_start(&p.expression, b, &child, self.ds.schema(), &mut self.rng));
            slots.push(offspring.len());
            offspring.push(None);
            jobs.push(Job {
                expression: child,
                init,
                seed,
            });
        }
        for (slot, c) in slots.into_iter().zip(self.run_jobs(jobs)) {
            offspring[slot] = Some(c);
        }
        let offspring: Vec<Candidate> = offspring.into_iter().map(|c| c.expect("filled")).collect();

        for c in &offspring {
            self.offer_to_archive(c.clone());
        }
        let mut merged = std::mem::take(&mut self.population);
        merged.extend(offspring);
        self.population = self.environmental_selection(merged);
        self.ranking = self.rank_population(&self.population);
        self.generation += 1;
        self.history.push(self.best_loss());
    }

    /// Keeps the best `population_size` of `merged`: distinct finite
    /// candidates by rank and crowding, then duplicates, then failures.
    fn environmental_selection(&self, merged: Vec<Candidate>) -> Vec<Candidate> {
        let n = self.config.population_size;
        let mut seen = std::collections::HashSet::new();
        let mut distinct = Vec::new();
        let mut duplicates = Vec::new();
        let mut failed = Vec::new();
        for c in merged {
            if !c.objectives.loss.is_finite() {
                failed.push(c);
            } else if seen.insert(c.expression.to_string()) {
                distinct.push(c);
            } else {
                duplicates.push(c);
            }
        }
        let ranking = self.rank_population(&distinct);
        let mut order: Vec<Option<Candidate>> = distinct.into_iter().map(Some).collect();
        let mut out: Vec<Candidate> = ranking.order().map(|i| order[i].take().expect("each index once")).collect();
        out.extend(duplicates);
        out.extend(failed);
        out.truncate(n);
        out
    }

    fn offer_to_archive(&mut self, c: Candidate) {
        if !c.objectives.loss.is_finite() {
            return;
        }
        let use_k = self.use_k();
        let o = c.objectives;
        if self
            .archive
            .iter()
            .any(|a| a.objectives.dominates(&o, use_k) || a.objectives.ties(&o, use_k))
        {
            return;
        }
        self.archive.retain(|a| !o.dominates(&a.objectives, use_k));
        self.archive.push(c);
    }

    pub fn finish(self) -> ParetoReport {
        let mut candidates = self.archive;
        candidates.sort_by(|a, b| {
            a.objectives
                .complexity
                .cmp(&b.objectives.complexity)
                .then(a.objectives.loss.total_cmp(&b.objectives.loss))
                .then(a.objectives.k.cmp(&b.objectives.k))
        });
        ParetoReport {
            candidates,
            best_loss_history: self.history,
            generations: self.generation,
            seed: self.config.seed,
        }
    }
}

/// Runs the configured number of generations and returns the archive.
pub fn run_search(ds: &Dataset, config: &SearchConfig) -> Result<ParetoReport, SearchError> {
    let mut search = Search::new(ds, config.clone())?;
    for _ in 0..config.generations {
        search.step();
    }
    Ok(search.finish())
}
