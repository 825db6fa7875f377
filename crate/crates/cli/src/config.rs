//! Flat `key = value` run configuration. Later sources override earlier ones.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use sharesr::fit::FitOptions;
use sharesr::search::SearchConfig;

use crate::CliError;

pub const KEYS: &[&str] = &[
    "data",
    "features",
    "categories",
    "target",
    "seed",
    "population_size",
    "generations",
    "max_complexity",
    "tournament_size",
    "crossover_rate",
    "subtree_mutation_rate",
    "point_mutation_rate",
    "terminal_probability",
    "literal_range",
    "use_parameter_objective",
    "workers",
    "max_iterations",
    "gradient_tol",
    "step_tol",
    "restarts",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut config = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!("line {}: expected `key = value`", lineno + 1)));
            };
            config
                .set(key.trim(), value.trim())
                .map_err(|e| CliError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        if !KEYS.contains(&key) {
            return Err(format!("unknown key `{key}`"));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Sets `key` when `value` is present.
    pub fn set_opt<T: Display>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(key, &v.to_string()).expect("known key");
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Config(format!("invalid value `{v}` for `{key}`: {e}")))
            })
            .transpose()
    }

    pub fn list(&self, key: &str) -> Vec<String> {
        self.raw(key)
            .map(|v| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
            .unwrap_or_default()
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        Ok(self.get("seed")?.unwrap_or(0))
    }

    pub fn fit_options(&self) -> Result<FitOptions, CliError> {
        let d = FitOptions::default();
        Ok(FitOptions {
            max_iterations: self.get("max_iterations")?.unwrap_or(d.max_iterations),
            gradient_tol: self.get("gradient_tol")?.unwrap_or(d.gradient_tol),
            step_tol: self.get("step_tol")?.unwrap_or(d.step_tol),
            restarts: self.get("restarts")?.unwrap_or(d.restarts),
        })
    }

    pub fn search_config(&self) -> Result<SearchConfig, CliError> {
        let d = SearchConfig::default();
        let mut generator = d.generator;
        generator.terminal_probability = self.get("terminal_probability")?.unwrap_or(generator.terminal_probability);
        generator.literal_range = self.get("literal_range")?.unwrap_or(generator.literal_range);
        let config = SearchConfig {
            population_size: self.get("population_size")?.unwrap_or(d.population_size),
            generations: self.get("generations")?.unwrap_or(d.generations),
            max_complexity: self.get("max_complexity")?.unwrap_or(d.max_complexity),
            tournament_size: self.get("tournament_size")?.unwrap_or(d.tournament_size),
            crossover_rate: self.get("crossover_rate")?.unwrap_or(d.crossover_rate),
            subtree_mutation_rate: self.get("subtree_mutation_rate")?.unwrap_or(d.subtree_mutation_rate),
            point_mutation_rate: self.get("point_mutation_rate")?.unwrap_or(d.point_mutation_rate),
            generator,
            fit: self.fit_options()?,
            seed: self.seed()?,
            use_parameter_objective: self.get("use_parameter_objective")?.unwrap_or(d.use_parameter_objective),
            workers: self.get("workers")?.unwrap_or(d.workers),
        };
        config.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(config)
    }
}

/// The resolved search settings, as echoed into reports.
#[derive(Debug, Serialize)]
pub struct ConfigEcho {
    pub population_size: usize,
    pub generations: usize,
    pub max_complexity: usize,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    pub subtree_mutation_rate: f64,
    pub point_mutation_rate: f64,
    pub terminal_probability: f64,
    pub literal_range: f64,
    pub use_parameter_objective: bool,
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub step_tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl From<&SearchConfig> for ConfigEcho {
    fn from(c: &SearchConfig) -> Self {
        Self {
            population_size: c.population_size,
            generations: c.generations,
            max_complexity: c.max_complexity,
            tournament_size: c.tournament_size,
            crossover_rate: c.crossover_rate,
            subtree_mutation_rate: c.subtree_mutation_rate,
            point_mutation_rate: c.point_mutation_rate,
            terminal_probability: c.generator.terminal_probability,
            literal_range: c.generator.literal_range,
            use_parameter_objective: c.use_parameter_objective,
            max_iterations: c.fit.max_iterations,
            gradient_tol: c.fit.gradient_tol,
            step_tol: c.fit.step_tol,
            restarts: c.fit.restarts,
            seed: c.seed,
        }
    }
}
