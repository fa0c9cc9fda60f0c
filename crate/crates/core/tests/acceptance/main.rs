//! Acceptance suite. Every criterion runs and prints one `PASS`/`FAIL` line;
//! the process exits nonzero if any failed.

mod properties;

use std::process::ExitCode;
use std::sync::OnceLock;

use pgho::config::Config;
use pgho::harness::{run_experiment, success_vs_dimension, ExperimentSpec};
use pgho::optimizers::{Method, RunConfig};
use pgho::smoothing::GaussHermite;
use pgho::sparse::{self, PathEntry, PathRecord, SparseSpec};
use pgho::verify::{self, Check};

pub fn report(name: &str, passed: bool, detail: &str) -> bool {
    println!("[acceptance] {name}: {} ({detail})", if passed { "PASS" } else { "FAIL" });
    passed
}

fn worst(checks: &[Check]) -> String {
    checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} = {:.3e}", c.name, c.achieved))
        .collect::<Vec<_>>()
        .join("; ")
}

fn quad() -> GaussHermite {
    GaussHermite::new(128).unwrap()
}

fn soft_moreau_equivalence_canonical() -> bool {
    let checks = verify::soft_moreau_checks(&quad()).unwrap();
    for c in &checks {
        println!("    {:<52} variance {:.3e}", c.name, c.achieved);
    }
    let passed = checks.iter().all(|c| c.passed);
    let detail = if passed {
        "offset variance < 1e-10 for all f and lambda".to_string()
    } else {
        format!("failing: {}", worst(&checks))
    };
    report("soft Moreau equivalence (beta^2 = lambda)", passed, &detail)
}

fn soft_moreau_equivalence_matched_noise_and_temperature() -> bool {
    let checks = verify::soft_moreau_matched_checks(&quad()).unwrap();
    let max = checks.iter().map(|c| c.achieved).fold(0.0, f64::max);
    let passed = checks.iter().all(|c| c.passed);
    report(
        "soft Moreau equivalence (beta = lambda, companion)",
        passed,
        &format!("max offset variance {max:.3e} < 1e-10")
    )
}

fn posterior_mean_identity() -> bool {
    let checks = verify::posterior_mean_checks(&quad()).unwrap();
    let max = checks.iter().map(|c| c.achieved).fold(0.0, f64::max);
    let passed = checks.iter().all(|c| c.passed);
    report(
        "posterior-mean identity",
        passed,
        &format!("max gap {max:.3e} < 1e-6 over 3 objectives, 5 x, 2 lambda, plus x/(1+lambda)")
    )
}

fn estimator_correctness() -> bool {
    let fd = verify::estimator_gradient_error(50, 17).unwrap();
    let collapse = verify::collapse_error(40, 19).unwrap();
    let (exact, value) = verify::translation_errors(40, 23, 8.0).unwrap();
    let passed = fd < 1e-5 && collapse == 0.0 && exact == 0.0;
    report(
        "estimator correctness",
        passed,
        &format!(
            "fd rel err {fd:.3e} < 1e-5; collapse err {collapse:e}; translation weights/grad diff {exact:e}, value rel {value:.1e}"
        )
    )
}

fn benchmark_spec(dim: usize, budget: u64, methods: Vec<RunConfig>) -> ExperimentSpec {
    ExperimentSpec {
        objective: "ackley".into(),
        dim,
        methods,
        trials: 10,
        budget,
        success_threshold: 5e-2,
        master_seed: 0,
        strict_errors: false,
        checkpoints: Vec::new(),
    }
}

fn benchmark_evals_to_success() -> bool {
    let stats = run_experiment(&benchmark_spec(10, 200_000, Config::default().methods)).unwrap();
    let by = |m: Method| stats.methods.iter().find(|s| s.config.method == m).unwrap();
    let (pgh, gh, prs) = (by(Method::Pgho), by(Method::Gh), by(Method::Prs));
    for m in [pgh, gh, prs] {
        println!(
            "    {:<7} success {:.2} mean evals (successful) {:?}",
            m.method, m.success_rate, m.mean_evals_success
        );
    }
    let pgh_ok = pgh.success_rate >= 0.8 && pgh.mean_evals_success.is_some_and(|e| e < 5_000.0);
    let gh_ok = gh.mean_evals_success.is_some_and(|e| (500.0..=50_000.0).contains(&e));
    let prs_ok = prs.success_rate == 0.0;
    report(
        "ackley d=10 evals-to-success",
        pgh_ok && gh_ok && prs_ok,
        &format!(
            "pgh-gd rate {:.2} mean {:.0}; gh mean {:.0}; prs rate {:.2}",
            pgh.success_rate,
            pgh.mean_evals_success.unwrap_or(f64::NAN),
            gh.mean_evals_success.unwrap_or(f64::NAN),
            prs.success_rate
        )
    )
}

fn success_rate_across_dimensions() -> bool {
    let pgh = Config::default().methods[0].clone();
    let gd = RunConfig {
        method: Method::Gd,
        ..pgh.clone()
    };
    let rows = success_vs_dimension(&benchmark_spec(2, 100_000, vec![pgh, gd]), &[2, 5, 10, 20]).unwrap();
    for r in &rows {
        println!("    d={:<3} {:<7} success {:.2}", r.dim, r.method, r.success_rate);
    }
    let rate = |dim: usize, m: &str| rows.iter().find(|r| r.dim == dim && r.method == m).unwrap().success_rate;
    let all_high = [2, 5, 10, 20].iter().all(|&d| rate(d, "pgh-gd") >= 0.8);
    let beats_gd = rate(20, "pgh-gd") >= rate(20, "gd");
    report(
        "ackley success across dims {2,5,10,20}",
        all_high && beats_gd,
        &format!(
            "pgh-gd min rate {:.2}; d=20 pgh-gd {:.2} vs gd {:.2}",
            [2, 5, 10, 20].iter().map(|&d| rate(d, "pgh-gd")).fold(1.0, f64::min),
            rate(20, "pgh-gd"),
            rate(20, "gd")
        )
    )
}

/// The desk-scale sweep is shared with the property suite's L-curve check.
pub fn sparse_records() -> &'static [PathRecord] {
    static RECORDS: OnceLock<Vec<PathRecord>> = OnceLock::new();
    RECORDS.get_or_init(|| sparse::run_sparse_experiment(&SparseSpec::default()).unwrap())
}

pub const MIDDLE_DECADE: (f64, f64) = (0.031_622_776_601_683_79, 0.316_227_766_016_837_94);

fn sparse_verdict(records: &[PathRecord]) -> (f64, f64, Vec<PathEntry>, Vec<PathEntry>) {
    let pgh = sparse::mean_path(records, "pgh-gd");
    let gd = sparse::mean_path(records, "gd");
    let wins = sparse::objective_win_fraction(&pgh, &gd, MIDDLE_DECADE.0, MIDDLE_DECADE.1);
    let dominance = sparse::frontier_dominance_fraction(&pgh, &gd);
    (wins, dominance, pgh, gd)
}

/// Counts misfit increases and surrogate decreases as lambda falls.
pub fn l_curve_violations(records: &[PathRecord], label: &str) -> (usize, usize) {
    let path = sparse::mean_path(records, label);
    let down: Vec<_> = path.iter().rev().collect();
    let misfit_up = down.windows(2).filter(|w| w[1].misfit > w[0].misfit).count();
    let surrogate_down = down.windows(2).filter(|w| w[1].surrogate < w[0].surrogate).count();
    (misfit_up, surrogate_down)
}

fn sparse_recovery_path() -> bool {
    let (wins, dominance, pgh, gd) = sparse_verdict(sparse_records());
    for (p, g) in pgh.iter().zip(&gd) {
        println!(
            "    lambda {:.4} objective pgh-gd {:>10.4} gd {:>10.4}",
            p.lambda, p.objective, g.objective
        );
    }
    report(
        "sparse recovery path (n=500, m=75, k=10)",
        wins >= 2.0 / 3.0 && dominance >= 0.5,
        &format!("middle-decade objective wins {wins:.3} (need >= 0.667); frontier dominance {dominance:.3} (need >= 0.5)")
    )
}

fn sparse_recovery_path_stable_step() -> bool {
    let spec = SparseSpec {
        lambda_min: MIDDLE_DECADE.0,
        lambda_max: MIDDLE_DECADE.1,
        lambda_count: 15,
        methods: sparse::default_sparse_methods()
            .into_iter()
            .map(|c| RunConfig { eta0: 0.01, ..c })
            .collect(),
        ..SparseSpec::default()
    };
    let records = sparse::run_sparse_experiment(&spec).unwrap();
    let (wins, _, _, _) = sparse_verdict(&records);
    let (pm, ps) = l_curve_violations(&records, "pgh-gd");
    let (gm, gs) = l_curve_violations(&records, "gd");
    report(
        "sparse recovery, step 0.01 for both methods (companion)",
        wins >= 2.0 / 3.0,
        &format!(
            "middle-decade objective wins {wins:.3}; L-curve misfit/surrogate violations pgh-gd {pm}/{ps}, gd {gm}/{gs}"
        )
    )
}

fn property_suite() -> bool {
    let results = properties::run_all();
    let failed: Vec<&str> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    report(
        "property suite",
        failed.is_empty(),
        &format!("{} of {} properties hold; failing: {:?}", results.len() - failed.len(), results.len(), failed)
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> bool); 9] = [
        ("soft_moreau_equivalence_canonical", soft_moreau_equivalence_canonical),
        ("soft_moreau_equivalence_matched_noise_and_temperature", soft_moreau_equivalence_matched_noise_and_temperature),
        ("posterior_mean_identity", posterior_mean_identity),
        ("estimator_correctness", estimator_correctness),
        ("benchmark_evals_to_success", benchmark_evals_to_success),
        ("success_rate_across_dimensions", success_rate_across_dimensions),
        ("sparse_recovery_path", sparse_recovery_path),
        ("sparse_recovery_path_stable_step", sparse_recovery_path_stable_step),
        ("property_suite", property_suite),
    ];
    let failed: Vec<&str> = criteria.iter().filter(|(_, run)| !run()).map(|(name, _)| *name).collect();
    println!(
        "[acceptance] summary: {} of {} criteria pass; failing: {:?}",
        criteria.len() - failed.len(),
        criteria.len(),
        failed
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
