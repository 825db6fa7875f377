mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sharesr::data::{Category, CategorySchema, Dataset};
use sharesr::expr::{Expression, Node, ParamKind};
use sharesr::search::{pareto_rank, run_search, Candidate, Search, SearchConfig};
use sharesr::synthetic;

#[test]
fn pareto_rank_matches_pairwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let objs = common::random_objectives(50, &mut rng);
        let mut got = pareto_rank(&objs);
        for f in &mut got {
            f.sort_unstable();
        }
        assert_eq!(got, common::brute_force_fronts(&objs));
    }
}

fn single_cell_line() -> Dataset {
    let schema = CategorySchema::new(vec![Category::new("g", ["a"])]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x: Vec<f64> = (0..20).map(|_| rng.random_range(-5.0..5.0)).collect();
    Dataset::new(
        schema,
        vec!["v1".into()],
        x.iter().map(|&v| vec![v]).collect(),
        vec![vec![0]; 20],
        x.iter().map(|v| 3.7 * v).collect(),
    )
    .unwrap()
}

#[test]
fn recovers_a_scaled_variable() {
    let ds = single_cell_line();
    let hits = (0..5)
        .filter(|&seed| {
            let config = SearchConfig {
                population_size: 100,
                generations: 20,
                seed,
                ..SearchConfig::default()
            };
            let report = run_search(&ds, &config).unwrap();
            report.candidates.iter().any(|c| c.r_squared() >= 0.999)
        })
        .count();
    assert!(hits >= 4, "{hits}/5");
}

fn two_category_data(seed: u64, per_cell: usize) -> Dataset {
    let e = Expression::parse("CS1 * v1 + C1_1 * square(v1)", &synthetic::schema()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synthetic::sample(&e, per_cell, 20.0, &mut rng).unwrap()
}

#[test]
fn invariants_hold_every_generation() {
    let ds = two_category_data(1, 4);
    let config = SearchConfig {
        population_size: 60,
        generations: 0,
        max_complexity: 11,
        seed: 12,
        ..SearchConfig::default()
    };
    let mut search = Search::new(&ds, config).unwrap();
    for _ in 0..12 {
        search.step();
        let archive = search.archive();
        for (i, a) in archive.iter().enumerate() {
            assert!(a.objectives.loss >= 0.0 && a.objectives.loss.is_finite());
            for (j, b) in archive.iter().enumerate() {
                if i != j {
                    assert!(!a.objectives.dominates(&b.objectives, true));
                    assert!(a.objectives != b.objectives);
                }
            }
            let again = a.recompute(&ds);
            assert_eq!(again.complexity, a.objectives.complexity);
            assert_eq!(again.k, a.objectives.k);
            assert!((again.loss - a.objectives.loss).abs() <= 1e-9 * a.objectives.loss.max(1e-12));
        }
        for c in search.population() {
            assert!(c.objectives.complexity <= 11);
            assert_eq!(c.objectives.k, c.expression.count_individual_parameters(ds.schema()));
        }
    }
    let history = search.best_loss_history();
    assert_eq!(history.len(), 13);
    assert!(history.windows(2).all(|w| w[1] <= w[0]));
    let report = search.finish();
    assert!(report.candidates.windows(2).all(|w| w[0].objectives.complexity <= w[1].objectives.complexity));
}

fn has_partial(e: &Expression) -> bool {
    e.terminals().iter().any(|k| matches!(k, ParamKind::Partial(_)))
}

#[test]
fn initial_populations_use_partial_terminals() {
    let ds = two_category_data(2, 2);
    for seed in 0..50 {
        let config = SearchConfig {
            population_size: 20,
            seed,
            ..SearchConfig::default()
        };
        let search = Search::new(&ds, config).unwrap();
        assert!(search.population().iter().any(|c| has_partial(&c.expression)), "seed {seed}");
    }
}

#[test]
fn archived_bindings_cover_every_parameter() {
    let ds = two_category_data(3, 3);
    let config = SearchConfig {
        population_size: 40,
        generations: 5,
        seed: 5,
        ..SearchConfig::default()
    };
    for c in run_search(&ds, &config).unwrap().candidates {
        let b = c.binding().expect("archived candidates have finite fits");
        assert_eq!(b.len(), c.objectives.k);
        let mut leaves = 0;
        c.expression.root().visit(&mut |n| leaves += matches!(n, Node::Param { .. }) as usize);
        assert!(leaves >= c.expression.n_terminals());
    }
}

/// Mean over complexities present in both archives of (min k without the
/// parameter objective) - (min k with it).
fn min_k_gap(a: &[Candidate], b: &[Candidate]) -> Option<f64> {
    let min_k = |set: &[Candidate], c: usize| {
        set.iter().filter(|x| x.objectives.complexity == c).map(|x| x.objectives.k).min()
    };
    let gaps: Vec<f64> = (1..=15)
        .filter_map(|c| Some(min_k(b, c)? as f64 - min_k(a, c)? as f64))
        .collect();
    (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64)
}

#[test]
fn dropping_the_parameter_objective_raises_k() {
    let mut total = 0.0;
    let mut n = 0;
    for seed in 0..20 {
        let ds = two_category_data(100 + seed, 3);
        let base = SearchConfig {
            population_size: 60,
            generations: 10,
            seed,
            ..SearchConfig::default()
        };
        let with = run_search(&ds, &base).unwrap();
        let without = run_search(
            &ds,
            &SearchConfig {
                use_parameter_objective: false,
                ..base
            },
        )
        .unwrap();
        if let Some(gap) = min_k_gap(&with.candidates, &without.candidates) {
            total += gap;
            n += 1;
        }
    }
    assert!(n >= 10);
    let mean = total / n as f64;
    println!("mean min-k gap over {n} seeds: {mean}");
    assert!(mean >= 0.0, "{mean}");
}
