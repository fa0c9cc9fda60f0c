//! Module invariants, run through a deterministic proptest runner so each
//! property reports a single verdict.

use std::sync::Arc;

use pgho::config::Config;
use pgho::harness::{aggregate, run_experiment, ExperimentSpec, TrialOutcome};
use pgho::objectives::{central_difference, make_benchmark, BenchmarkKind, EvalCounter, Objective};
use pgho::optimizers::{self, Init, LrSchedule, Method, RunConfig, RunRecord};
use pgho::rng::StreamKey;
use pgho::smoothing::{softmin_gradient_at, softmin_value_at, softmin_weights, NoiseBatch, Schedule};
use pgho::sparse::{self, generate_sparse_problem, smooth_l0, smooth_l0_objective, PathRecord};
use pgho::verify::DyadicShift;
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, RngAlgorithm, TestCaseError, TestRng, TestRunner};

type Outcome = Result<(), String>;

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        RunnerConfig {
            cases,
            failure_persistence: None,
            ..RunnerConfig::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn check<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Outcome {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn kind_strategy() -> impl Strategy<Value = BenchmarkKind> {
    prop::sample::select(BenchmarkKind::ALL.to_vec())
}

fn benchmark(kind: BenchmarkKind, dim: usize) -> pgho::objectives::Benchmark {
    let dim = if kind == BenchmarkKind::LogRosen { 2 } else { dim };
    make_benchmark(kind, dim).unwrap()
}

fn benchmark_optima() -> Outcome {
    for kind in BenchmarkKind::ALL {
        for dim in 1..=20 {
            let obj = benchmark(kind, dim);
            if let Some(opt) = obj.optimum() {
                let v = obj.value(&opt.x);
                ensure((v - opt.f).abs() < 1e-12, || format!("{kind} d={dim}: f(x*) = {v}"))?;
            }
        }
    }
    Ok(())
}

fn benchmarks_non_negative() -> Outcome {
    check(64, (kind_strategy(), 1usize..12, any::<u64>()), |(kind, dim, seed)| {
        let obj = benchmark(kind, dim);
        let mut rng = StreamKey::new(seed, 0).rng();
        for _ in 0..50 {
            let x = obj.bounds().sample_uniform(&mut rng);
            let v = obj.value(&x);
            prop_assert!(kind == BenchmarkKind::LogRosen || v >= 0.0, "{kind} f = {v}");
            prop_assert!(v.is_finite());
        }
        Ok(())
    })
}

fn weights_normalized() -> Outcome {
    check(256, (prop::collection::vec(-1e3..1e3f64, 1..64), -8.0..3.0f64), |(values, log_lambda)| {
        let lambda = 10f64.powf(log_lambda);
        let (w, v) = softmin_weights(&values, lambda);
        let sum: f64 = w.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12, "sum {sum}");
        prop_assert!(w.iter().all(|x| (0.0..=1.0).contains(x)));
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let slack = 1e-9 * (1.0 + mean.abs());
        prop_assert!(v >= min - slack && v <= mean + slack, "{min} <= {v} <= {mean}");
        Ok(())
    })
}

fn weights_concentrate() -> Outcome {
    check(128, (prop::collection::vec(0.1..10.0f64, 1..20), -5.0..5.0f64), |(gaps, base)| {
        let mut values = vec![base];
        values.extend(gaps.iter().map(|g| base + g));
        let mut last = 0.0;
        for lambda in [1.0, 0.1, 0.01, 0.001] {
            let w0 = softmin_weights(&values, lambda).0[0];
            prop_assert!(w0 >= last, "weight fell to {w0} at lambda {lambda}");
            last = w0;
        }
        prop_assert!(last > 1.0 - 1e-6, "{last}");
        Ok(())
    })
}

fn log_sum_exp_stable() -> Outcome {
    check(256, prop::collection::vec(0.0..1e6f64, 1..32), |gaps| {
        let values: Vec<f64> = gaps.iter().map(|g| 1e3 + g).collect();
        let (w, v) = softmin_weights(&values, 1e-8);
        prop_assert!(v.is_finite() && w.iter().all(|x| x.is_finite()));
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!((v - min).abs() <= 1e-7, "{v} vs {min}");
        Ok(())
    })
}

fn collapse_exact() -> Outcome {
    check(128, (kind_strategy(), 1usize..8, 1usize..9, any::<bool>(), any::<u64>()), |(kind, dim, k, anti, seed)| {
        let obj = benchmark(kind, dim);
        let mut rng = StreamKey::new(seed, 0).rng();
        let x = obj.bounds().sample_uniform(&mut rng);
        let noise = NoiseBatch::sample(&mut rng, k, obj.dim(), anti);
        let point = Schedule::canonical(0.7).eval(1.0).unwrap();
        let mut c = EvalCounter::new();
        let est = softmin_gradient_at(&obj, &x, &point, &noise, &mut c).unwrap();
        let value = softmin_value_at(&obj, &x, &point, &noise, &mut c).unwrap();
        let mut g = vec![0.0; obj.dim()];
        let f = obj.value_and_gradient(&x, &mut g);
        prop_assert_eq!(value, f);
        prop_assert_eq!(est.value, f);
        prop_assert_eq!(est.grad, g);
        prop_assert_eq!(c.count(), 2 * k as u64);
        Ok(())
    })
}

fn translation_equivariant() -> Outcome {
    check(128, (kind_strategy(), 1usize..6, 0.0..0.95f64, any::<u64>()), |(kind, dim, t, seed)| {
        let obj = benchmark(kind, dim);
        let base = DyadicShift { inner: &obj, shift: 0.0 };
        let moved = DyadicShift { inner: &obj, shift: 8.0 };
        let mut rng = StreamKey::new(seed, 0).rng();
        let x = obj.bounds().sample_uniform(&mut rng);
        let noise = NoiseBatch::sample(&mut rng, 6, obj.dim(), true);
        let point = Schedule::canonical(1.0).eval(t).unwrap();
        let a = softmin_gradient_at(&base, &x, &point, &noise, &mut EvalCounter::new()).unwrap();
        let b = softmin_gradient_at(&moved, &x, &point, &noise, &mut EvalCounter::new()).unwrap();
        prop_assert_eq!(&a.weights, &b.weights);
        prop_assert_eq!(&a.grad, &b.grad);
        prop_assert!((b.value - a.value - 8.0).abs() <= 1e-15 * (a.value + 8.0).abs().max(1.0));
        Ok(())
    })
}

fn antithetic_pairs() -> Outcome {
    check(64, (1usize..12, 1usize..6, any::<u64>()), |(k, dim, seed)| {
        let noise = NoiseBatch::sample(&mut StreamKey::new(seed, 0).rng(), k, dim, true);
        for i in 0..k / 2 {
            let neg: Vec<f64> = noise.row(2 * i).iter().map(|v| -v).collect();
            prop_assert_eq!(noise.row(2 * i + 1), &neg[..]);
        }
        Ok(())
    })
}

fn schedule_shape() -> Outcome {
    check(64, (0.01..5.0f64, prop::sample::select(vec![0usize, 1, 2])), |(eps, kind)| {
        let mut s = Schedule::canonical(eps);
        s.kind = [
            pgho::smoothing::ScheduleKind::Canonical,
            pgho::smoothing::ScheduleKind::LinearBeta,
            pgho::smoothing::ScheduleKind::Custom,
        ][kind];
        prop_assert_eq!(s.eval(1.0).unwrap().beta, 0.0);
        prop_assert!(s.eval(0.0).unwrap().beta > 0.0);
        let mut prev = f64::INFINITY;
        for i in 0..=20 {
            let p = s.eval(i as f64 / 20.0).unwrap();
            prop_assert!(p.beta <= prev && p.lambda >= s.lambda_min);
            prev = p.beta;
        }
        prop_assert!(s.eval(1.5).is_err() && s.eval(-0.1).is_err());
        Ok(())
    })
}

fn config_strategy() -> impl Strategy<Value = (RunConfig, BenchmarkKind, usize)> {
    (
        prop::sample::select(vec![Method::Pgho, Method::Gh, Method::Gd, Method::Adam, Method::Prs]),
        1usize..4,
        1usize..6,
        100u64..3_000,
        2u64..60,
        any::<bool>(),
        any::<bool>(),
        kind_strategy(),
        1usize..6,
        0..=i64::MAX as u64,
    )
        .prop_map(|(method, particles, samples, budget, steps, early, checks, kind, dim, seed)| {
            let cfg = RunConfig {
                method,
                particles,
                samples,
                budget: budget.max((particles * (samples + 1)) as u64),
                homotopy_steps: steps,
                early_stop: early,
                count_success_checks: checks,
                eta0: 0.3,
                seed,
                ..RunConfig::default()
            };
            (cfg, kind, dim)
        })
}

fn run_accounting() -> Outcome {
    check(96, config_strategy(), |(cfg, kind, dim)| {
        let obj = benchmark(kind, dim);
        let rec = optimizers::run(&obj, &cfg, 3).unwrap();
        prop_assert!(rec.evals_used <= cfg.budget);
        prop_assert!(rec.trace.windows(2).all(|w| w[1].best_f <= w[0].best_f));
        prop_assert!(rec.trace.windows(2).all(|w| w[1].evals_used > w[0].evals_used));
        prop_assert_eq!(rec.trace.last().map(|p| p.evals_used), Some(rec.evals_used));
        for x in rec.final_particles.iter().chain(std::iter::once(&rec.best_x)) {
            prop_assert!(obj.bounds().contains(x));
        }
        prop_assert_eq!(rec.success, rec.evals_at_success.is_some());
        if let Some(e) = rec.evals_at_success {
            prop_assert!(rec.best_f < cfg.success_threshold && e >= cfg.iteration_cost().min(cfg.samples as u64));
        }
        prop_assert_eq!(&optimizers::run(&obj, &cfg, 3).unwrap(), &rec);
        Ok(())
    })
}

fn single_sample_degenerates() -> Outcome {
    check(64, (kind_strategy(), 1usize..6, 0.0..0.99f64, any::<u64>()), |(kind, dim, t, seed)| {
        let obj = benchmark(kind, dim);
        let mut rng = StreamKey::new(seed, 0).rng();
        let x = obj.bounds().sample_uniform(&mut rng);
        let noise = NoiseBatch::sample(&mut rng, 1, obj.dim(), false);
        let point = Schedule::canonical(1.0).eval(t).unwrap();
        let est = softmin_gradient_at(&obj, &x, &point, &noise, &mut EvalCounter::new()).unwrap();
        prop_assert_eq!(&est.weights, &vec![1.0]);
        let y: Vec<f64> = x.iter().zip(noise.row(0)).map(|(a, z)| a + point.beta * z).collect();
        let mut g = vec![0.0; obj.dim()];
        obj.gradient(&y, &mut g);
        prop_assert_eq!(est.grad, g);
        Ok(())
    })
}

fn post_homotopy_matches_baseline() -> Outcome {
    check(32, (kind_strategy(), 1usize..6, any::<u64>(), any::<bool>()), |(kind, dim, seed, adam)| {
        let obj = benchmark(kind, dim);
        let start = obj.bounds().sample_uniform(&mut StreamKey::new(seed, 0).rng());
        let base = RunConfig {
            homotopy_steps: 2,
            lr_schedule: LrSchedule::Constant,
            eta0: 0.01,
            early_stop: false,
            init: Init::Point(start.clone()),
            ..RunConfig::default()
        };
        // From a shared state both runs apply one identical step at t = 1.
        let first = optimizers::pgho_run(&obj, &RunConfig { max_iters: Some(1), ..base.clone() }, 0).unwrap();
        let two = optimizers::pgho_run(&obj, &RunConfig { max_iters: Some(2), ..base.clone() }, 0).unwrap();
        let method = if adam { Method::Adam } else { Method::Gd };
        let update = if adam { optimizers::UpdateKind::Adam } else { optimizers::UpdateKind::Gd };
        let from = first.final_particles[0].clone();
        let mut rule = optimizers::UpdateRule::new(update, obj.dim());
        let mut g = vec![0.0; obj.dim()];
        obj.gradient(&from, &mut g);
        if !adam {
            let mut expected = optimizers::apply_update(&mut rule, &from, &g, 0.01).unwrap();
            obj.bounds().clamp(&mut expected);
            prop_assert_eq!(&two.final_particles[0], &expected);
        }
        let baseline = optimizers::baseline_run(
            &obj,
            &RunConfig { method, init: Init::Point(from), max_iters: Some(1), ..base },
            0,
        )
        .unwrap();
        if !adam {
            prop_assert_eq!(&two.final_particles, &baseline.final_particles);
        }
        Ok(())
    })
}

fn spec(methods: Vec<RunConfig>, trials: u64, seed: u64) -> ExperimentSpec {
    ExperimentSpec {
        objective: "ackley".into(),
        dim: 4,
        methods,
        trials,
        budget: 4_000,
        success_threshold: 5e-2,
        master_seed: seed,
        strict_errors: false,
        checkpoints: vec![1_000, 4_000],
    }
}

fn worker_count_invariance() -> Outcome {
    let s = spec(Config::default().methods, 6, 5);
    let runs: Vec<_> = [1, 2, 5]
        .iter()
        .map(|&n| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
            pool.install(|| run_experiment(&s).unwrap())
        })
        .collect();
    ensure(runs.windows(2).all(|w| w[0] == w[1]), || "results differ across worker counts".into())
}

fn aggregation_audit() -> Outcome {
    check(16, (any::<u64>(), 1u64..8), |(seed, trials)| {
        let s = spec(Config::default().methods, trials, seed);
        let stats = run_experiment(&s).unwrap();
        for m in &stats.methods {
            let records: Vec<&RunRecord> = m.outcomes.iter().filter_map(TrialOutcome::record).collect();
            let succ: Vec<u64> = records.iter().filter_map(|r| r.evals_at_success).collect();
            prop_assert_eq!(m.success_rate, succ.len() as f64 / trials as f64);
            prop_assert!((0.0..=1.0).contains(&m.success_rate));
            if let Some(mean) = m.mean_evals_success {
                let brute = succ.iter().map(|&e| e as f64).sum::<f64>() / succ.len() as f64;
                prop_assert_eq!(mean, brute);
                let floor = if m.config.method == Method::Prs { 1.0 } else { m.config.samples as f64 };
                prop_assert!(mean >= floor);
            } else {
                prop_assert!(succ.is_empty());
            }
            let again = aggregate(m.method.clone(), m.config.clone(), m.outcomes.clone(), false, &s.checkpoints);
            prop_assert_eq!(&again, m);
        }
        Ok(())
    })
}

fn seed_injective() -> Outcome {
    check(512, (any::<[u64; 4]>(), any::<[u64; 4]>()), |(a, b)| {
        let key = |v: [u64; 4]| StreamKey::new(v[0], v[1]).particle(v[2]).slot(v[3]);
        prop_assert_eq!(a == b, key(a).seed_bytes() == key(b).seed_bytes());
        Ok(())
    })
}

fn serialization_round_trips() -> Outcome {
    check(32, config_strategy(), |(cfg, kind, dim)| {
        let mut config = Config::default();
        config.methods = vec![cfg.clone()];
        config.objective = kind.to_string();
        config.dims = vec![dim];
        let text = config.to_toml_string().unwrap();
        prop_assert_eq!(&Config::from_toml_str(&text, &[]).unwrap(), &config);
        let rec = optimizers::run(&benchmark(kind, dim), &RunConfig { budget: 300, ..cfg }, 0).unwrap();
        let back: RunRecord = serde_json::from_str(&serde_json::to_string(&rec).unwrap()).unwrap();
        prop_assert_eq!(back, rec);
        Ok(())
    })?;
    let p = generate_sparse_problem(30, 10, 3, 0.01, 0.05, 1).unwrap();
    let rec = sparse::lambda_path_sweep(
        &p,
        &[RunConfig { max_iters: Some(20), homotopy_steps: 20, ..sparse::default_sparse_methods()[0].clone() }],
        &[0.1, 0.5],
        1,
    )
    .unwrap();
    let back: PathRecord = serde_json::from_str(&serde_json::to_string(&rec).unwrap()).unwrap();
    ensure(back == rec, || "path record changed in JSON round trip".into())
}

fn sparse_objective_properties() -> Outcome {
    check(24, (any::<u64>(), 0.01..1.0f64), |(seed, lambda)| {
        let p = Arc::new(generate_sparse_problem(60, 15, 4, 0.01, 0.05, seed).unwrap());
        let obj = smooth_l0_objective(p.clone(), lambda).unwrap();
        let zero = vec![0.0; 60];
        prop_assert_eq!(obj.value(&zero), 0.5 * p.y.iter().map(|v| v * v).sum::<f64>());
        let mut rng = StreamKey::new(seed, 1).rng();
        for _ in 0..20 {
            let x: Vec<f64> = (0..60).map(|_| rand::Rng::random_range(&mut rng, -0.3..0.3)).collect();
            let mut g = vec![0.0; 60];
            obj.gradient(&x, &mut g);
            let fd = central_difference(|p| obj.value(p), &x, 1e-6);
            let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let err = g.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
            prop_assert!(err < 1e-6, "fd error {err}");
            let s = smooth_l0(&x, 0.05);
            prop_assert!((0.0..=60.0).contains(&s));
        }
        let ternary: Vec<f64> = (0..60).map(|i| [0.0, 1.0, -1.0][i % 3]).collect();
        prop_assert!((smooth_l0(&ternary, 1e-4) - 40.0).abs() < 1e-10);
        Ok(())
    })
}

/// Misfit non-increasing and surrogate non-decreasing as lambda decreases,
/// allowing two violations per series.
fn l_curve_shape() -> Outcome {
    let mut problems = Vec::new();
    for label in ["pgh-gd", "gd"] {
        let (misfit_up, surrogate_down) = super::l_curve_violations(super::sparse_records(), label);
        println!("    {label}: misfit increases {misfit_up}, surrogate decreases {surrogate_down} as lambda falls");
        if misfit_up > 2 || surrogate_down > 2 {
            problems.push(format!("{label}: {misfit_up} misfit and {surrogate_down} surrogate violations"));
        }
    }
    ensure(problems.is_empty(), || problems.join("; "))
}

pub fn run_all() -> Vec<(&'static str, bool)> {
    let props: [(&str, fn() -> Outcome); 19] = [
        ("benchmark optima", benchmark_optima),
        ("benchmarks non-negative on box", benchmarks_non_negative),
        ("weights normalized, soft-min within [min, mean]", weights_normalized),
        ("weights concentrate as lambda falls", weights_concentrate),
        ("log-sum-exp stable at lambda 1e-8, gaps to 1e6", log_sum_exp_stable),
        ("collapse at t = 1 exact", collapse_exact),
        ("translation equivariance", translation_equivariant),
        ("antithetic pairs", antithetic_pairs),
        ("schedule shape", schedule_shape),
        ("budget, monotone best, box, determinism", run_accounting),
        ("single-sample degenerate weights", single_sample_degenerates),
        ("post-homotopy step equals baseline step", post_homotopy_matches_baseline),
        ("worker-count invariance", worker_count_invariance),
        ("aggregation audit", aggregation_audit),
        ("seed derivation injective", seed_injective),
        ("serialization round trips", serialization_round_trips),
        ("sparse objective", sparse_objective_properties),
        ("L-curve shape at desk scale", l_curve_shape),
        ("quadrature posterior mean identity", || {
            let q = pgho::smoothing::GaussHermite::new(128).map_err(|e| e.to_string())?;
            let checks = pgho::verify::posterior_mean_checks(&q).map_err(|e| e.to_string())?;
            ensure(checks.iter().all(|c| c.passed), || format!("{checks:?}"))
        }),
    ];
    props
        .iter()
        .map(|(name, f)| {
            let outcome = f();
            let ok = outcome.is_ok();
            super::report(&format!("property: {name}"), ok, &outcome.err().unwrap_or_else(|| "holds".into()));
            (*name, ok)
        })
        .collect()
}
