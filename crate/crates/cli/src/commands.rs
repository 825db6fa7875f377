use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sharesr::data::{check_identifiability, load_csv, Dataset};
use sharesr::expr::Expression;
use sharesr::fit::{fit_parameters, parameter_labels, Init, ParamLayout, ParameterBinding};
use sharesr::procession::{run_processions, ProcessionOptions};
use sharesr::search::Search;
use sharesr::synthetic;

use crate::config::{ConfigEcho, RunConfig};
use crate::report::{self, FitRecord};
use crate::{CheckArgs, CliError, DataArgs, FitArgs, ProcessionArgs, SearchArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INFEASIBLE: u8 = 3;

/// Config file values overridden by the data flags.
fn base_config(args: &DataArgs) -> Result<RunConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.set_opt("data", args.data.as_ref().map(|p| p.display()));
    config.set_opt("features", args.features.as_ref());
    config.set_opt("categories", args.categories.as_ref());
    config.set_opt("target", args.target.as_ref());
    Ok(config)
}

fn load_data(config: &RunConfig) -> Result<Dataset, CliError> {
    let path = config
        .raw("data")
        .ok_or_else(|| CliError::Config("no input data: pass --data or set `data`".into()))?;
    let features = config.list("features");
    let categories = config.list("categories");
    if categories.is_empty() {
        return Err(CliError::Config("no category columns: pass --categories or set `categories`".into()));
    }
    let target = config
        .raw("target")
        .ok_or_else(|| CliError::Config("no target column: pass --target or set `target`".into()))?;
    let f: Vec<&str> = features.iter().map(String::as_str).collect();
    let c: Vec<&str> = categories.iter().map(String::as_str).collect();
    Ok(load_csv(path, &f, &c, target)?)
}

fn parse_expression(text: &str, ds: &Dataset) -> Result<Expression, CliError> {
    let expr = Expression::parse(text, ds.schema())?;
    expr.validate(ds.schema(), ds.n_features())?;
    Ok(expr)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn print(text: &str) {
    let mut out = std::io::stdout().lock();
    // a closed pipe is not an error worth reporting
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}

/// Reads `label = value` lines into a binding; every label must appear once.
fn read_init(path: &Path, expr: &Expression, ds: &Dataset) -> Result<ParameterBinding, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let labels = parameter_labels(expr, ds.schema());
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut values: Vec<Option<f64>> = vec![None; labels.len()];
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| CliError::Config(format!("{}:{}: {msg}", path.display(), lineno + 1));
        let (label, value) = line.split_once('=').ok_or_else(|| err("expected `label = value`".into()))?;
        let label = label.trim();
        let &i = index.get(label).ok_or_else(|| err(format!("unknown parameter `{label}`")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|e| err(format!("invalid value for `{label}`: {e}")))?;
        if values[i].replace(v).is_some() {
            return Err(err(format!("`{label}` given twice")));
        }
    }
    let missing: Vec<&str> = labels
        .iter()
        .zip(&values)
        .filter(|(_, v)| v.is_none())
        .map(|(l, _)| l.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Config(format!(
            "{}: missing initial values for {}",
            path.display(),
            missing.join(", ")
        )));
    }
    let flat: Vec<f64> = values.into_iter().map(|v| v.expect("checked")).collect();
    Ok(ParamLayout::new(expr, ds.schema()).unflatten(&flat)?)
}

pub fn fit(args: &FitArgs) -> Result<u8, CliError> {
    let mut config = base_config(&args.data)?;
    config.set_opt("restarts", args.restarts);
    config.set_opt("seed", args.seed);
    config.set_opt("max_iterations", args.max_iterations);
    let ds = load_data(&config)?;
    let expr = parse_expression(&args.expr, &ds)?;
    let options = config.fit_options()?;
    let seed = config.seed()?;

    let check = check_identifiability(&expr, &ds);
    if !check.feasible {
        eprintln!("warning: the data cannot identify every parameter");
        for s in &check.shortfalls {
            eprintln!("warning: {}", s.describe(ds.schema()));
        }
    }
    let init = match &args.init {
        Some(path) => Init::Binding(read_init(path, &expr, &ds)?),
        None => Init::Random,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fit = fit_parameters(&expr, &ds, &init, &options, &mut rng)?;
    let record = FitRecord {
        expression: expr.to_string(),
        sse: fit.sse,
        r_squared: fit.r_squared,
        converged: fit.converged,
        iterations: fit.n_iterations,
        k: expr.count_individual_parameters(ds.schema()),
        parameters: report::parameters(&expr, ds.schema(), &fit),
        seed,
    };
    print(&report::fit_text(&record, ds.n_rows()));
    if let Some(path) = &args.report {
        let line = serde_json::to_string(&record).expect("serializable record");
        write_file(path, &format!("{line}\n"))?;
    }
    Ok(EXIT_OK)
}

pub fn search(args: &SearchArgs) -> Result<u8, CliError> {
    let mut config = base_config(&args.data)?;
    config.set_opt("population_size", args.population_size);
    config.set_opt("generations", args.generations);
    config.set_opt("max_complexity", args.max_complexity);
    config.set_opt("tournament_size", args.tournament_size);
    config.set_opt("crossover_rate", args.crossover_rate);
    config.set_opt("subtree_mutation_rate", args.subtree_mutation_rate);
    config.set_opt("point_mutation_rate", args.point_mutation_rate);
    config.set_opt("terminal_probability", args.terminal_probability);
    config.set_opt("restarts", args.restarts);
    config.set_opt("max_iterations", args.max_iterations);
    config.set_opt("seed", args.seed);
    config.set_opt("workers", args.workers);
    if args.no_parameter_objective {
        config.set_opt("use_parameter_objective", Some(false));
    }
    let search_config = config.search_config()?;
    let ds = load_data(&config)?;

    let mut search = Search::new(&ds, search_config.clone())?;
    for g in 0..search_config.generations {
        search.step();
        if args.progress {
            eprintln!("generation {}: best loss {:e}", g + 1, search.best_loss());
        }
    }
    let result = search.finish();
    print(&report::pareto_table(&result.candidates));

    if let Some(path) = &args.report {
        let echo = ConfigEcho::from(&search_config);
        let mut out = String::new();
        for c in &result.candidates {
            let record = report::candidate_record(c, ds.schema(), result.seed, &echo);
            out.push_str(&serde_json::to_string(&record).expect("serializable record"));
            out.push('\n');
        }
        write_file(path, &out)?;
    }
    Ok(EXIT_OK)
}

pub fn check(args: &CheckArgs) -> Result<u8, CliError> {
    let config = base_config(&args.data)?;
    let ds = load_data(&config)?;
    let expr = parse_expression(&args.expr, &ds)?;
    let report = check_identifiability(&expr, &ds);
    print(&report::check_text(ds.schema(), &ds.cell_counts(), &report));
    Ok(if report.feasible { EXIT_OK } else { EXIT_INFEASIBLE })
}

pub fn procession(args: &ProcessionArgs) -> Result<u8, CliError> {
    let schema = synthetic::schema();
    let expr = match &args.expr {
        Some(text) => Expression::parse(text, &schema)?,
        None => synthetic::quartic(),
    };
    expr.validate(&schema, 1)?;
    if !(args.perturb_scale.is_finite() && args.perturb_scale >= 0.0) {
        return Err(CliError::Config("--perturb-scale must be finite and non-negative".into()));
    }
    let options = ProcessionOptions {
        processions: args.processions,
        seed: args.seed,
        perturb_scale: args.perturb_scale,
        restarts: args.restarts,
        workers: args.workers,
        ..ProcessionOptions::default()
    };
    let runs = run_processions(&expr, &options)?;
    let csv = report::procession_csv(&schema, &runs);
    match &args.output {
        Some(path) => write_file(path, &csv)?,
        None => print(&csv),
    }
    Ok(EXIT_OK)
}
