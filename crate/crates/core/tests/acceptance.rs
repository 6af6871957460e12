//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use censored_pathloss::avar::avar_matrix;
use censored_pathloss::model::{
    generate_synthetic, regressor, spaced_distances, to_transformed, CensoredSample, Dataset,
    PathlossParams, Spacing,
};
use censored_pathloss::montecarlo::{
    replicate_seed, run_experiment, DistanceRule, Estimator, ExperimentReport, ExperimentSpec,
};
use censored_pathloss::numerics::{mills_ratio, normal_pdf, normal_sf};
use censored_pathloss::ols::{ols_fit, CensoredHandling};
use censored_pathloss::tobit::{tobit_fit, FitOptions, TobitObjective};
use common::{design_dataset, information_oracle, max_gradient};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Suite {
    failures: usize,
}

impl Suite {
    fn run(&mut self, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) {
        self.run_after(name, limit, Duration::ZERO, f);
    }

    /// As `run`, charging `already` spent time against `limit`.
    fn run_after(
        &mut self,
        name: &str,
        limit: Duration,
        already: Duration,
        f: impl FnOnce() -> Outcome,
    ) {
        let start = Instant::now();
        let out = f();
        let elapsed = already + start.elapsed();
        let in_time = elapsed <= limit;
        let pass = out.pass && in_time;
        if !pass {
            self.failures += 1;
        }
        let timing = if in_time {
            format!("{:.2}s", elapsed.as_secs_f64())
        } else {
            format!(
                "{:.2}s over the {:.0}s limit",
                elapsed.as_secs_f64(),
                limit.as_secs_f64()
            )
        };
        println!(
            "{} {name} [{timing}] {}",
            if pass { "PASS" } else { "FAIL" },
            out.detail
        );
    }
}

fn bias_study_spec() -> ExperimentSpec {
    ExperimentSpec {
        true_params: PathlossParams::new(67.41, 2.0, 4.0).unwrap(),
        d0: 10.0,
        distances: DistanceRule {
            spacing: Spacing::Log,
            d_min: 10.0,
            d_max: 1000.0,
            count: 500,
        },
        c: None,
        target_censored_fraction: Some(0.3),
        replicates: 500,
        seed: 20_240_517,
        estimators: vec![Estimator::OlsSubstituteC, Estimator::Tobit],
    }
}

fn bias_recovery(report: &ExperimentReport) -> Outcome {
    let tobit = report.summary(Estimator::Tobit).unwrap();
    let ols = report.summary(Estimator::OlsSubstituteC).unwrap();
    let truth = report.spec.true_params;
    let tobit_n = (tobit.mean.n - truth.n).abs() <= 3.0 * tobit.se_of_mean.n;
    let tobit_s = (tobit.mean.sigma - truth.sigma).abs() <= 3.0 * tobit.se_of_mean.sigma;
    let ols_n = truth.n - ols.mean.n > 5.0 * ols.se_of_mean.n;
    let ols_s = truth.sigma - ols.mean.sigma > 5.0 * ols.se_of_mean.sigma;
    check(
        tobit_n && tobit_s && ols_n && ols_s && tobit.failures == 0,
        format!(
            "censored {:.3}; tobit n {:.4} (sem {:.4}) sigma {:.4} (sem {:.4}); ols n {:.4} ({:+.1} sem) sigma {:.4} ({:+.1} sem); tobit failures {}",
            report.mean_censored_fraction,
            tobit.mean.n,
            tobit.se_of_mean.n,
            tobit.mean.sigma,
            tobit.se_of_mean.sigma,
            ols.mean.n,
            (ols.mean.n - truth.n) / ols.se_of_mean.n,
            ols.mean.sigma,
            (ols.mean.sigma - truth.sigma) / ols.se_of_mean.sigma,
            tobit.failures
        ),
    )
}

fn calibration(report: &ExperimentReport) -> Outcome {
    let tobit = report.summary(Estimator::Tobit).unwrap();
    match tobit.calibration {
        Some(c) => check(
            (0.9..=1.1).contains(&c.n) && (0.9..=1.1).contains(&c.pl_d0),
            format!("std/mean se: n {:.4}, PL(d0) {:.4}", c.n, c.pl_d0),
        ),
        None => check(false, "no standard errors reported".into()),
    }
}

fn no_censoring(fits: &mut Vec<(Dataset, Vec<f64>, bool)>) -> Outcome {
    let mut worst_alpha: f64 = 0.0;
    let mut worst_var: f64 = 0.0;
    for k in 0..20u64 {
        let n = 1.5 + 0.1 * k as f64;
        let sigma = 2.0 + 0.3 * k as f64;
        let params = PathlossParams::new(40.0 + 2.0 * k as f64, n, sigma).unwrap();
        let d = spaced_distances(Spacing::Log, 1.0, 500.0, 50 + 10 * k as usize).unwrap();
        let raw = generate_synthetic(&params, &d, 1.0, 1000 + k).unwrap();
        let ds = Dataset::from_raw(&raw, 1.0, f64::INFINITY).unwrap();
        let ols = ols_fit(&ds, CensoredHandling::SubstituteC).unwrap();
        let tobit = tobit_fit(&ds, &FitOptions::default()).unwrap();
        worst_alpha = worst_alpha
            .max((tobit.params.pl_d0 - ols.params.pl_d0).abs())
            .max((tobit.params.n - ols.params.n).abs());
        let rss: f64 = ols.residuals.iter().map(|r| r * r).sum();
        let s2 = tobit.params.sigma * tobit.params.sigma;
        worst_var = worst_var.max((s2 / (rss / ds.len() as f64) - 1.0).abs());
        fits.push((ds, tobit.coordinates(), tobit.converged));
    }
    check(
        worst_alpha <= 1e-3 && worst_var <= 0.01,
        format!("max |alpha diff| {worst_alpha:.2e}, max sigma^2 rel diff {worst_var:.2e}"),
    )
}

fn avar_limit() -> Outcome {
    let params = PathlossParams::new(67.41, 2.0, 4.0).unwrap();
    let d = spaced_distances(Spacing::Log, 10.0, 1000.0, 200).unwrap();
    // Largest mean is 107.41 dB; every z is at least 40.
    let c = 107.41 + 40.0 * 4.0;
    let ds = design_dataset(&d, 10.0, c);
    let avar = avar_matrix(&params, &ds).unwrap();
    let xs = ds.regressors();
    let (l, sx, sxx) = (
        xs.len() as f64,
        xs.iter().sum::<f64>(),
        xs.iter().map(|x| x * x).sum::<f64>(),
    );
    let det = l * sxx - sx * sx;
    let want = [16.0 * sxx / det, 16.0 * l / det, 2.0 * 256.0 / l];
    let worst = (0..3)
        .map(|k| (avar.inverse_diag[k] / want[k] - 1.0).abs())
        .fold(0.0, f64::max);
    check(worst <= 1e-6, format!("max rel diff {worst:.2e}"))
}

fn mills_stability() -> Outcome {
    let mut worst_naive: f64 = 0.0;
    for i in -8000..=8000 {
        let z = i as f64 * 1e-3;
        let naive = normal_pdf(z) / normal_sf(z);
        worst_naive = worst_naive.max((mills_ratio(z) / naive - 1.0).abs());
    }
    let mut worst_asym: f64 = 0.0;
    let mut finite = true;
    for z in [20.0, 40.0, 100.0, 300.0] {
        let m = mills_ratio(z);
        finite &= m.is_finite();
        worst_asym = worst_asym.max((m / (z + 1.0 / z) - 1.0).abs());
    }
    check(
        worst_naive <= 1e-9 && worst_asym <= 1e-3 && finite,
        format!("naive rel diff {worst_naive:.2e} on [-8, 8]; vs z+1/z {worst_asym:.2e}"),
    )
}

fn ols_hand_oracle() -> Outcome {
    let samples = [(1.0, 61.0), (10.0, 79.0), (100.0, 103.0)]
        .map(|(distance, value)| CensoredSample {
            distance,
            value,
            censored: false,
        })
        .to_vec();
    let ds = Dataset::new(samples, 1.0, f64::INFINITY).unwrap();
    let fit = ols_fit(&ds, CensoredHandling::SubstituteC).unwrap();
    // Sxx = 200, Sxy = 420, RSS = 6, sigma^2 = RSS / (L - 1)
    let want = [
        ("n", fit.params.n, 2.1),
        ("PL(d0)", fit.params.pl_d0, 60.0),
        ("sigma^2", fit.sigma_sq_hat, 3.0),
        ("se_n", fit.se_n, (3.0f64 / 200.0).sqrt()),
        (
            "se_pl_d0",
            fit.se_pl_d0,
            (3.0f64 * (1.0 / 3.0 + 100.0 / 200.0)).sqrt(),
        ),
    ];
    let worst = want
        .iter()
        .map(|(_, got, exp)| (got - exp).abs())
        .fold(0.0, f64::max);
    let shown: Vec<String> = want
        .iter()
        .map(|(k, got, _)| format!("{k} {got:.6}"))
        .collect();
    check(
        worst <= 1e-9,
        format!("{}; max abs err {worst:.1e}", shown.join(", ")),
    )
}

fn stationarity(report: &ExperimentReport, extra: &[(Dataset, Vec<f64>, bool)]) -> Outcome {
    let spec = &report.spec;
    let d = spec.design().unwrap();
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for rec in report
        .records
        .iter()
        .filter(|r| r.estimator == Estimator::Tobit && r.converged)
    {
        let Some(p) = rec.estimate else { continue };
        assert_eq!(rec.seed, replicate_seed(spec.seed, rec.replicate));
        let raw = generate_synthetic(&spec.true_params, &d, spec.d0, rec.seed).unwrap();
        let ds = Dataset::from_raw(&raw, spec.d0, report.c).unwrap();
        let objective = TobitObjective::new(&ds, None);
        worst = worst.max(max_gradient(&objective, &[p.pl_d0, p.n, p.sigma.ln()]));
        checked += 1;
    }
    for (ds, coords, converged) in extra {
        if *converged {
            worst = worst.max(max_gradient(&TobitObjective::new(ds, None), coords));
            checked += 1;
        }
    }
    check(
        worst < 1e-3 && checked > 0,
        format!("{checked} converged fits, max |gradient| {worst:.2e}"),
    )
}

fn information_matrix() -> Outcome {
    let params = PathlossParams::new(60.0, 2.0, 4.0).unwrap();
    let distances = [1.0, 10.0, 100.0, 1000.0];
    let c = 95.0;
    let ds = design_dataset(&distances, 1.0, c);
    let avar = avar_matrix(&params, &ds).unwrap();
    let xs: Vec<f64> = distances.iter().map(|&d| regressor(d, 1.0)).collect();
    let oracle = information_oracle(&xs, to_transformed(&params, c).alpha_t, params.sigma);
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max(((avar.a_matrix[i][j] - oracle[i][j]) / oracle[i][j]).abs());
        }
    }
    check(
        worst <= 1e-4,
        format!("L=4, max rel entry diff {worst:.2e}"),
    )
}

fn main() {
    let mut suite = Suite { failures: 0 };
    let secs = Duration::from_secs;

    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let report = pool.install(|| run_experiment(&bias_study_spec()));
    let study_time = start.elapsed();
    let report = match report {
        Ok(r) => r,
        Err(e) => {
            println!("FAIL censored_bias_recovery: experiment failed: {e}");
            std::process::exit(1);
        }
    };
    suite.run_after("censored_bias_recovery", secs(60), study_time, || {
        bias_recovery(&report)
    });
    suite.run("se_calibration", secs(60), || calibration(&report));

    let mut fits = Vec::new();
    suite.run("no_censoring_reduction", secs(5), || {
        no_censoring(&mut fits)
    });
    suite.run("avar_limit", secs(1), avar_limit);
    suite.run("mills_stability", secs(1), mills_stability);
    suite.run("ols_hand_oracle", secs(1), ols_hand_oracle);
    suite.run("stationarity", secs(60), || stationarity(&report, &fits));
    suite.run("information_matrix_oracle", secs(10), information_matrix);

    if suite.failures > 0 {
        println!("{} acceptance criteria failed", suite.failures);
        std::process::exit(1);
    }
}
