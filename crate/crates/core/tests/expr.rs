use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sharesr::data::Dataset;
use sharesr::expr::{random_expression, Expression, ParamKind};
use sharesr::fit::{fit_parameters, predict, FitOptions, Init, ParamLayout};
use sharesr::synthetic;

#[test]
fn parse_render_round_trip_over_random_trees() {
    let s = synthetic::schema();
    for seed in 0..1000 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_expression(&s, 3, 20, &mut rng);
        let text = e.to_string();
        let back = Expression::parse(&text, &s).unwrap_or_else(|err| panic!("{text}: {err}"));
        assert_eq!(back, e, "{text}");
        assert_eq!(back.to_string(), text);
    }
}

#[test]
fn quartic_counts() {
    let s = synthetic::schema();
    let e = synthetic::quartic();
    assert_eq!(e.n_terminals(), 4);
    assert_eq!(e.count_individual_parameters(&s), 20);
    assert_eq!(
        e.terminals(),
        &[ParamKind::Shared, ParamKind::Partial(0), ParamKind::Partial(1), ParamKind::NonShared]
    );
}

fn grid(per_cell: usize, rng: &mut ChaCha8Rng) -> Dataset {
    let s = synthetic::schema();
    let mut feats = Vec::new();
    let mut cats = Vec::new();
    for c in 0..s.n_combinations() {
        for _ in 0..per_cell {
            feats.push(vec![rng.random_range(0.5..2.0), rng.random_range(0.5..2.0)]);
            cats.push(s.combination_values(c));
        }
    }
    let n = feats.len();
    Dataset::new(s, vec!["v1".into(), "v2".into()], feats, cats, vec![0.0; n]).unwrap()
}

fn with_target(ds: &Dataset, y: Vec<f64>) -> Dataset {
    let n = ds.n_rows();
    Dataset::new(
        ds.schema().clone(),
        ds.feature_names().to_vec(),
        (0..n).map(|i| ds.features(i).to_vec()).collect(),
        (0..n).map(|i| ds.category_values(i).to_vec()).collect(),
        y,
    )
    .unwrap()
}

fn best_sse(e: &Expression, ds: &Dataset, restarts: usize, rng: &mut ChaCha8Rng) -> f64 {
    let opts = FitOptions {
        restarts,
        ..FitOptions::default()
    };
    fit_parameters(e, ds, &Init::Random, &opts, rng).map_or(f64::INFINITY, |f| f.sse)
}

#[test]
fn merged_shared_sum_has_the_same_optimal_loss() {
    let s = synthetic::schema();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let base = grid(4, &mut rng);
    let y: Vec<f64> = (0..base.n_rows()).map(|i| 3.0 * base.features(i)[0] + 0.5 + rng.random_range(-0.1..0.1)).collect();
    let ds = with_target(&base, y);
    let long = Expression::parse("CS1 * v1 + (CS2 + CS3)", &s).unwrap();
    let short = long.simplify();
    assert_eq!(short.to_string(), "CS1 * v1 + CS2");
    let a = best_sse(&long, &ds, 9, &mut rng);
    let b = best_sse(&short, &ds, 9, &mut rng);
    assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{a} vs {b}");
}

/// When the original expression refits its own generated data exactly, the
/// simplified form must as well.
#[test]
fn simplified_form_refits_generated_data() {
    let s = synthetic::schema();
    let mut compared = 0;
    let mut matched = 0;
    let mut seed = 0;
    while compared < 60 {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_expression(&s, 2, 12, &mut rng);
        let simple = e.simplify();
        if simple == e || e.n_terminals() == 0 {
            continue;
        }
        let ds0 = grid(3, &mut rng);
        let layout = ParamLayout::new(&e, &s);
        let flat: Vec<f64> = (0..layout.n_individual()).map(|_| rng.random_range(0.5..1.5)).collect();
        let y = predict(&e, &layout.unflatten(&flat).unwrap(), &ds0).unwrap();
        if y.iter().any(|v| !v.is_finite() || v.abs() > 1e6) {
            continue;
        }
        let tol = 1e-12 * y.iter().map(|v| v * v).sum::<f64>().max(1.0);
        let ds = with_target(&ds0, y);
        if best_sse(&e, &ds, 9, &mut rng) > tol {
            continue;
        }
        compared += 1;
        let sse = best_sse(&simple, &ds, 29, &mut rng);
        if sse <= tol {
            matched += 1;
        } else {
            println!("{e} => {simple}: {sse:e}");
        }
    }
    println!("simplified forms that refit exactly: {matched}/{compared}");
    assert!(matched * 20 >= compared * 19, "{matched}/{compared}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn simplify_is_idempotent_and_never_grows(seed in any::<u64>(), n_features in 1usize..4, cap in 1usize..30) {
        let s = synthetic::schema();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_expression(&s, n_features, cap, &mut rng);
        let once = e.simplify();
        prop_assert!(once.complexity() <= e.complexity());
        prop_assert!(once.count_individual_parameters(&s) <= e.count_individual_parameters(&s));
        prop_assert_eq!(once.simplify(), once.clone());
        prop_assert!(once.validate(&s, n_features).is_ok());
    }

    #[test]
    fn generated_trees_respect_the_cap(seed in any::<u64>(), cap in 1usize..40) {
        let s = synthetic::schema();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_expression(&s, 2, cap, &mut rng);
        prop_assert!(e.complexity() <= cap);
        prop_assert!(e.validate(&s, 2).is_ok());
    }
}
