//! System-level acceptance suite. Each test covers one numbered guarantee of
//! the toolkit and prints a single `[acceptance] criterion N (...): PASS/FAIL`
//! line (visible under `--nocapture`, or via the test name either way).

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use prefarb::graph::VertexClass;
use prefarb::market::dump_panel;
use prefarb::potential::UtilityVector;
use prefarb::report::{dump_daily, dump_positions, dump_samples};
use prefarb::{
    bootstrap_study, build_graph, consistent_preferences, factor_regression, generate_synthetic,
    prune_intermediate, run_backtest, select_vertices, simulate_estimator, solve_utilities,
    summarize, threshold_edges, BacktestConfig, FactorPanel, NoiseModel, PreferenceGraph,
    PreferenceMatrix, PricePanel, SyntheticMarketSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn criterion(number: u32, name: &str, body: impl FnOnce()) {
    let outcome = catch_unwind(AssertUnwindSafe(body));
    let verdict = if outcome.is_ok() { "PASS" } else { "FAIL" };
    println!("[acceptance] criterion {number} ({name}): {verdict}");
    if let Err(payload) = outcome {
        resume_unwind(payload);
    }
}

fn pair_count(n: usize) -> usize {
    n * (n - 1) / 2
}

// --- 1: the matrix-free solver agrees with explicit least squares ---------

#[test]
fn criterion_01_solver_matches_dense_least_squares() {
    criterion(1, "solver matches dense least squares", || {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for case in 0..200 {
            let n = rng.gen_range(3..=8);
            let values: Vec<f64> = (0..pair_count(n)).map(|_| rng.gen_range(-3.0..3.0)).collect();
            // A quarter of the cases leave random pairs unscored (stored as
            // zero), which both solvers must treat identically.
            let prefs = if case % 4 == 0 {
                let scoreable: Vec<bool> = (0..pair_count(n)).map(|_| rng.gen_bool(0.7)).collect();
                let masked = values
                    .iter()
                    .zip(&scoreable)
                    .map(|(&v, &s)| if s { v } else { 0.0 })
                    .collect();
                PreferenceMatrix::from_values(n, masked, scoreable).unwrap()
            } else {
                PreferenceMatrix::from_dense(n, values).unwrap()
            };

            let fast = solve_utilities(&prefs);
            let dense = common::dense_least_squares_utilities(&prefs);
            for (i, (&a, &b)) in fast.as_slice().iter().zip(&dense).enumerate() {
                assert!(
                    (a - b).abs() <= 1e-10,
                    "case {case}, n={n}, u[{i}]: solver {a} vs dense {b}"
                );
            }
        }
        let elapsed = start.elapsed();
        assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    });
}

// --- 2: a perfect contradiction collapses to silence ----------------------

#[test]
fn criterion_02_contradiction_collapses_to_no_trades() {
    criterion(2, "contradiction collapses to no trades", || {
        // Pairwise votes forming a cycle: 0 over 1, 1 over 2, yet 2 over 0.
        // Stored pairs are (0,1), (0,2), (1,2).
        let prefs = PreferenceMatrix::from_dense(3, vec![1.0, -1.0, 1.0]).unwrap();
        let utilities = solve_utilities(&prefs);
        for i in 0..3 {
            assert_eq!(utilities.get(i), 0.0, "u[{i}] must vanish exactly");
        }
        let consistent = consistent_preferences(&utilities);
        let graph = build_graph(&consistent, &utilities).unwrap();
        for kappa in [1e-12, 1e-6, 0.5, 1.0, 100.0] {
            let pruned = prune_intermediate(&threshold_edges(&graph, kappa));
            assert!(pruned.edges().is_empty());
            let signals = select_vertices(&pruned, 20, 20);
            assert!(signals.is_empty(), "kappa={kappa} must yield no trades");
        }
    });
}

// --- 3: threshold + prune preserve the preference structure ----------------

fn edge_set(graph: &PreferenceGraph) -> BTreeSet<(usize, usize)> {
    graph.edges().iter().map(|e| (e.from, e.to)).collect()
}

/// Panics unless the edge set is irreflexive, asymmetric, and transitively
/// closed (every two-step chain also has its direct edge).
fn assert_strict_order(edges: &BTreeSet<(usize, usize)>, n: usize, context: &str) {
    for &(i, j) in edges {
        assert_ne!(i, j, "{context}: self-loop at {i}");
        assert!(!edges.contains(&(j, i)), "{context}: both {i}->{j} and {j}->{i}");
    }
    for &(i, j) in edges {
        for k in 0..n {
            if edges.contains(&(j, k)) {
                assert!(
                    edges.contains(&(i, k)),
                    "{context}: {i}->{j}->{k} without {i}->{k}"
                );
            }
        }
    }
}

#[test]
fn criterion_03_pipeline_preserves_preference_structure() {
    criterion(3, "threshold+prune preserve preference structure", || {
        let mut rng = ChaCha8Rng::seed_from_u64(303);
        for case in 0..1000 {
            let n = rng.gen_range(2..=12);
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let utilities = UtilityVector::centered(raw);
            let spread = utilities
                .as_slice()
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max)
                - utilities.as_slice().iter().cloned().fold(f64::INFINITY, f64::min);
            let kappa = rng.gen_range(0.0..(1.2 * spread.max(1e-6)));

            let consistent = consistent_preferences(&utilities);
            let graph = build_graph(&consistent, &utilities).unwrap();
            let thresholded = threshold_edges(&graph, kappa);
            let pruned = prune_intermediate(&thresholded);

            let kept = edge_set(&thresholded);
            assert_strict_order(&kept, n, &format!("case {case} thresholded"));
            for e in thresholded.edges() {
                assert!(e.weight >= kappa);
                assert_eq!(e.weight, utilities.get(e.from) - utilities.get(e.to));
            }

            let surviving = edge_set(&pruned);
            assert!(
                surviving.is_subset(&kept),
                "case {case}: pruning may only remove edges"
            );
            assert_strict_order(&surviving, n, &format!("case {case} pruned"));
            assert!(pruned.is_bipartite(), "case {case}: pruned graph not bipartite");
            let class = pruned.classify();
            for e in pruned.edges() {
                assert_eq!(class[e.from], VertexClass::Source, "case {case}");
                assert_eq!(class[e.to], VertexClass::Sink, "case {case}");
            }
        }
    });
}

// --- 4: Monte Carlo agreement with the closed-form noise model -------------

#[test]
fn criterion_04_estimator_moments_match_closed_forms() {
    criterion(4, "estimator moments match closed forms", || {
        let model = NoiseModel {
            n_securities: 100,
            sigma: 1.0,
            cov: 0.0,
        };
        let start = Instant::now();
        let run = simulate_estimator(&model, 100_000, 42).unwrap();
        let elapsed = start.elapsed();

        // Independent noise: Var[u_i] = (n-1) sigma^2 / n^2 = 0.0099 and the
        // pairwise differences roughly double it.
        assert!(
            (run.mean_utility_variance - 0.0099).abs() <= 0.05 * 0.0099,
            "utility variance {}",
            run.mean_utility_variance
        );
        assert!(
            (run.mean_preference_variance - 0.0198).abs() <= 0.05 * 0.0198,
            "preference variance {}",
            run.mean_preference_variance
        );
        assert!(
            run.max_abs_standardized_bias < 4.0,
            "standardized bias {}",
            run.max_abs_standardized_bias
        );
        assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");

        // Correlated noise puts a floor of cov/3 under the variance that a
        // larger universe cannot wash out.
        let correlated = NoiseModel {
            n_securities: 500,
            sigma: 1.0,
            cov: 0.5,
        };
        let plateau = simulate_estimator(&correlated, 2_000, 7).unwrap();
        let floor = correlated.cov / 3.0;
        assert!(
            plateau.mean_utility_variance > 0.4 * floor,
            "variance {} collapsed below 0.4 * {floor}",
            plateau.mean_utility_variance
        );
    });
}

// --- 5: every traded book is zero-investment with unit legs ----------------

fn assert_zero_investment(panel: &PricePanel, config: &BacktestConfig) -> usize {
    let report = run_backtest(panel, config).unwrap();
    let mut days_with_both = 0;
    for (t, weights) in &report.weights_by_day {
        let long_sum: f64 = weights.iter().filter(|w| **w > 0.0).sum();
        let short_sum: f64 = weights.iter().filter(|w| **w < 0.0).sum();
        if long_sum > 0.0 && short_sum < 0.0 {
            days_with_both += 1;
            let total: f64 = weights.iter().sum();
            assert!(total.abs() <= 1e-12, "day {t}: net exposure {total}");
            assert!((long_sum - 1.0).abs() <= 1e-12, "day {t}: long leg {long_sum}");
            assert!((short_sum + 1.0).abs() <= 1e-12, "day {t}: short leg {short_sum}");
        }
    }
    days_with_both
}

#[test]
fn criterion_05_books_are_zero_investment() {
    criterion(5, "books are zero-investment with unit legs", || {
        let spec = SyntheticMarketSpec {
            n_securities: 40,
            n_days: 600,
            n_clusters: 5,
            seed: 11,
            ..SyntheticMarketSpec::default()
        };
        let panel = generate_synthetic(&spec).unwrap();
        for scheme in [
            prefarb::WeightScheme::UtilityProportional,
            prefarb::WeightScheme::Equal,
        ] {
            let config = BacktestConfig {
                n_top: 8,
                m_bottom: 8,
                scheme,
                ..BacktestConfig::default()
            };
            let days = assert_zero_investment(&panel, &config);
            assert!(days > 300, "only {days} two-legged days; test is vacuous");
        }
    });
}

// --- 6: future prices cannot leak into past weights -------------------------

#[test]
fn criterion_06_future_mutations_never_change_past_weights() {
    criterion(6, "future mutations never change past weights", || {
        let spec = SyntheticMarketSpec {
            n_securities: 16,
            n_days: 240,
            n_clusters: 4,
            seed: 3,
            ..SyntheticMarketSpec::default()
        };
        let panel = generate_synthetic(&spec).unwrap();
        let config = BacktestConfig {
            lookback: 30,
            kappa: 1.5,
            n_top: 3,
            m_bottom: 3,
            ..BacktestConfig::default()
        };
        let baseline = run_backtest(&panel, &config).unwrap();

        let n = panel.n_securities();
        let days = panel.n_days();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut any_future_change = false;
        for mutation in 0..50 {
            let cutoff = rng.gen_range(config.lookback + 5..days);
            let mut open = vec![0.0; days * n];
            let mut close = vec![0.0; days * n];
            for t in 0..days {
                for i in 0..n {
                    open[t * n + i] = panel.open(t, i);
                    close[t * n + i] = panel.close(t, i);
                }
            }
            let n_touched = rng.gen_range(1..=n);
            for _ in 0..n_touched {
                let i = rng.gen_range(0..n);
                let factor = rng.gen_range(0.5..2.0);
                for t in cutoff..days {
                    open[t * n + i] *= factor;
                    close[t * n + i] *= factor;
                }
            }
            let mutated = PricePanel::new(
                panel.dates().to_vec(),
                panel.tickers().to_vec(),
                open,
                close,
            )
            .unwrap();
            let rerun = run_backtest(&mutated, &config).unwrap();

            assert_eq!(baseline.weights_by_day.len(), rerun.weights_by_day.len());
            for ((t_a, w_a), (t_b, w_b)) in
                baseline.weights_by_day.iter().zip(&rerun.weights_by_day)
            {
                assert_eq!(t_a, t_b);
                if *t_a < cutoff {
                    assert_eq!(
                        w_a, w_b,
                        "mutation {mutation}: weights changed at past day {t_a} (cutoff {cutoff})"
                    );
                } else if w_a != w_b {
                    any_future_change = true;
                }
            }
        }
        assert!(
            any_future_change,
            "no mutation ever moved any weight; the probe has no power"
        );
    });
}

// --- 7: holding positions to utility sign-flip slows the book ---------------

#[test]
fn criterion_07_position_persistence_lengthens_holds_and_cuts_turnover() {
    criterion(7, "persistence lengthens holds and cuts turnover", || {
        let mut longer_holds = 0;
        let mut lower_turnover = 0;
        let seeds = 20;
        for seed in 0..seeds {
            let spec = SyntheticMarketSpec {
                seed,
                ..SyntheticMarketSpec::default()
            };
            let panel = generate_synthetic(&spec).unwrap();
            let with = summarize(
                &run_backtest(
                    &panel,
                    &BacktestConfig {
                        momentum: true,
                        ..BacktestConfig::default()
                    },
                )
                .unwrap(),
            );
            let without = summarize(
                &run_backtest(
                    &panel,
                    &BacktestConfig {
                        momentum: false,
                        ..BacktestConfig::default()
                    },
                )
                .unwrap(),
            );
            if with.median_holding_days > without.median_holding_days {
                longer_holds += 1;
            }
            if with.mean_turnover < without.mean_turnover {
                lower_turnover += 1;
            }
        }
        assert!(longer_holds >= 18, "longer holds on only {longer_holds}/{seeds} seeds");
        assert!(lower_turnover >= 18, "lower turnover on only {lower_turnover}/{seeds} seeds");
    });
}

// --- 8: more securities help pre-cost performance ---------------------------

#[test]
fn criterion_08_wider_subsets_raise_median_gross_returns() {
    criterion(8, "wider subsets raise median gross returns", || {
        let mut improved = 0;
        let seeds = 5;
        for s in 0..seeds {
            let spec = SyntheticMarketSpec {
                n_securities: 100,
                n_days: 600,
                n_clusters: 10,
                seed: 1000 + s,
                ..SyntheticMarketSpec::default()
            };
            let panel = generate_synthetic(&spec).unwrap();
            let config = BacktestConfig {
                kappa: 1.0,
                n_top: 5,
                m_bottom: 5,
                seed: s,
                ..BacktestConfig::default()
            };
            let narrow = bootstrap_study(&panel, &config, 20, 50).unwrap();
            let wide = bootstrap_study(&panel, &config, 60, 50).unwrap();
            if wide.summary.gross_ann_mean.median > narrow.summary.gross_ann_mean.median {
                improved += 1;
            }
        }
        assert!(improved >= 4, "wider subsets won on only {improved}/{seeds} seeds");
    });
}

// --- 9: the factor regression recovers planted loadings ---------------------

#[test]
fn criterion_09_regression_recovers_planted_loadings() {
    criterion(9, "regression recovers planted loadings", || {
        use rand_distr::{Distribution, Normal};
        let n = 400;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
        let dates: Vec<NaiveDate> =
            (0..n).map(|k| start + chrono::Days::new(k as u64)).collect();

        let f1 = Normal::new(0.0, 0.010).unwrap();
        let f2 = Normal::new(0.0, 0.012).unwrap();
        let noise = Normal::new(0.0, 0.002).unwrap();
        let (alpha, beta1, beta2) = (3e-4, 0.9, -0.4);

        let mut values = Vec::with_capacity(2 * n);
        let mut returns = Vec::with_capacity(n);
        for _ in 0..n {
            let (x1, x2) = (f1.sample(&mut rng), f2.sample(&mut rng));
            values.push(x1);
            values.push(x2);
            returns.push(alpha + beta1 * x1 + beta2 * x2 + noise.sample(&mut rng));
        }
        let factors =
            FactorPanel::new(dates.clone(), vec!["MKT".into(), "HML".into()], values).unwrap();
        let fit = factor_regression(&dates, &returns, &factors).unwrap();

        assert_eq!(fit.n_obs, n);
        for (planted, estimate) in [
            (alpha, &fit.intercept),
            (beta1, &fit.betas[0]),
            (beta2, &fit.betas[1]),
        ] {
            assert!(
                (estimate.coefficient - planted).abs() <= 2.0 * estimate.std_error,
                "{}: planted {planted}, got {} +/- {}",
                estimate.name,
                estimate.coefficient,
                estimate.std_error
            );
        }

        let k = fit.betas.len() as f64;
        let recomputed =
            1.0 - (1.0 - fit.r_squared) * (n as f64 - 1.0) / (n as f64 - k - 1.0);
        assert!(
            (fit.adj_r_squared - recomputed).abs() <= 1e-12,
            "adjusted R^2 {} vs recomputed {recomputed}",
            fit.adj_r_squared
        );
    });
}

// --- 10: everything is bit-for-bit reproducible ------------------------------

fn render<T>(value: &T, dump: impl Fn(&T, &mut Vec<u8>)) -> Vec<u8> {
    let mut buf = Vec::new();
    dump(value, &mut buf);
    buf
}

#[test]
fn criterion_10_runs_are_bit_identical_across_threads() {
    criterion(10, "runs are bit-identical across threads", || {
        let spec = SyntheticMarketSpec {
            n_securities: 30,
            n_days: 400,
            n_clusters: 5,
            seed: 21,
            ..SyntheticMarketSpec::default()
        };
        let panel = generate_synthetic(&spec).unwrap();
        let config = BacktestConfig {
            lookback: 40,
            kappa: 1.5,
            n_top: 5,
            m_bottom: 5,
            seed: 9,
            ..BacktestConfig::default()
        };

        // The panel itself round-trips byte-identically.
        let panel_bytes = render(&panel, |p, out| dump_panel(p, out).unwrap());
        assert_eq!(panel_bytes, render(&panel, |p, out| dump_panel(p, out).unwrap()));

        // Two backtest invocations, byte-compared over every artifact.
        let first = run_backtest(&panel, &config).unwrap();
        let second = run_backtest(&panel, &config).unwrap();
        assert_eq!(
            render(&first, |r, out| dump_daily(r, out).unwrap()),
            render(&second, |r, out| dump_daily(r, out).unwrap())
        );
        assert_eq!(
            render(&first, |r, out| dump_positions(r, out).unwrap()),
            render(&second, |r, out| dump_positions(r, out).unwrap())
        );
        assert_eq!(
            serde_json::to_vec(&summarize(&first)).unwrap(),
            serde_json::to_vec(&summarize(&second)).unwrap()
        );

        // Bootstrap inside explicit pools of 1 and 8 threads, twice each.
        let pool = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
        };
        let study = |threads: usize| {
            pool(threads).install(|| bootstrap_study(&panel, &config, 12, 16).unwrap())
        };
        let single_a = study(1);
        let single_b = study(1);
        let wide_a = study(8);
        let wide_b = study(8);
        let bytes = |s: &prefarb::BootstrapStudy| {
            let mut out = render(&s.samples, |v, out| dump_samples(v, out).unwrap());
            out.extend(serde_json::to_vec(&s.summary).unwrap());
            out
        };
        assert_eq!(bytes(&single_a), bytes(&single_b));
        assert_eq!(bytes(&wide_a), bytes(&wide_b));
        assert_eq!(bytes(&single_a), bytes(&wide_a));
    });
}
