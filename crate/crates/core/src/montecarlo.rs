//! Repeated synthetic experiments comparing OLS and Tobit estimates.
//!
//! Replicate `r` draws its data from seed `replicate_seed(spec.seed, r)`, so
//! a report depends only on the spec. Replicates run in parallel and are
//! reduced in replicate order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::avar::estimate_standard_errors;
use crate::error::{Error, Result};
use crate::model::{
    censoring_probability, generate_synthetic, spaced_distances, Dataset, PathlossParams, Spacing,
};
use crate::ols::{ols_fit, CensoredHandling};
use crate::tobit::{tobit_fit, FitOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    OlsSubstituteC,
    OlsDrop,
    Tobit,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [
        Estimator::OlsSubstituteC,
        Estimator::OlsDrop,
        Estimator::Tobit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::OlsSubstituteC => "ols_substitute_c",
            Estimator::OlsDrop => "ols_drop",
            Estimator::Tobit => "tobit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceRule {
    #[serde(default)]
    pub spacing: Spacing,
    /// Meters.
    pub d_min: f64,
    /// Meters.
    pub d_max: f64,
    pub count: usize,
}

fn all_estimators() -> Vec<Estimator> {
    Estimator::ALL.to_vec()
}

/// One Monte-Carlo study. Exactly one of `c` and `target_censored_fraction`
/// must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub true_params: PathlossParams,
    /// Reference distance, meters.
    pub d0: f64,
    pub distances: DistanceRule,
    /// Censoring level, dB. May be infinite.
    #[serde(default, with = "crate::io::opt_float_or_inf")]
    pub c: Option<f64>,
    /// Solve for the `c` whose expected censored fraction over the design equals this.
    #[serde(default)]
    pub target_censored_fraction: Option<f64>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "all_estimators")]
    pub estimators: Vec<Estimator>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Spec(m));
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if let Err(e) = self.true_params.validate() {
            return bad(format!("true_params: {e}"));
        }
        if !(self.d0.is_finite() && self.d0 > 0.0) {
            return bad(format!("d0 must be positive, got {}", self.d0));
        }
        let rule = &self.distances;
        if !(rule.d_min >= self.d0) {
            return bad(format!("d_min {} m is below d0 {} m", rule.d_min, self.d0));
        }
        if !(rule.d_max.is_finite() && rule.d_max >= rule.d_min) {
            return bad(format!(
                "d_max {} m must be finite and at least d_min",
                rule.d_max
            ));
        }
        if rule.count < 3 {
            return bad(format!(
                "distance count must be at least 3, got {}",
                rule.count
            ));
        }
        match (self.c, self.target_censored_fraction) {
            (Some(c), None) if c.is_nan() => return bad("c is NaN".into()),
            (Some(_), None) => {}
            (None, Some(f)) if !(f > 0.0 && f < 1.0) => {
                return bad(format!(
                    "target_censored_fraction must be in (0, 1), got {f}"
                ))
            }
            (None, Some(_)) => {}
            _ => return bad("give exactly one of c and target_censored_fraction".into()),
        }
        if self.estimators.is_empty() {
            return bad("no estimators requested".into());
        }
        for (i, e) in self.estimators.iter().enumerate() {
            if self.estimators[..i].contains(e) {
                return bad(format!("estimator {} listed twice", e.name()));
            }
        }
        Ok(())
    }

    pub fn design(&self) -> Result<Vec<f64>> {
        let r = &self.distances;
        spaced_distances(r.spacing, r.d_min, r.d_max, r.count)
    }
}

/// Mean over `distances` of the probability that a sample is censored at `c`.
pub fn expected_censored_fraction(
    params: &PathlossParams,
    distances: &[f64],
    d0: f64,
    c: f64,
) -> Result<f64> {
    let mut sum = 0.0;
    for &d in distances {
        sum += censoring_probability(params, d, d0, c)?;
    }
    Ok(sum / distances.len() as f64)
}

/// Censoring level whose expected censored fraction equals `target`, by bisection.
pub fn censor_level_for_fraction(
    params: &PathlossParams,
    distances: &[f64],
    d0: f64,
    target: f64,
) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Domain(format!(
            "target fraction must be in (0, 1), got {target}"
        )));
    }
    let means = distances
        .iter()
        .map(|&d| crate::model::mean_pathloss(params, d, d0))
        .collect::<Result<Vec<_>>>()?;
    let lo_mu = means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_mu = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo_mu - 40.0 * params.sigma, hi_mu + 40.0 * params.sigma);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if expected_censored_fraction(params, distances, d0, mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Seed for replicate `r`: element `r + 1` of the splitmix64 stream started at `seed`.
pub fn replicate_seed(seed: u64, replicate: usize) -> u64 {
    const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut z = seed.wrapping_add(GAMMA.wrapping_mul(replicate as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamStats {
    pub pl_d0: f64,
    pub n: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub seed: u64,
    pub estimator: Estimator,
    pub censored_fraction: f64,
    /// `None` when the fit failed or did not converge.
    pub estimate: Option<PathlossParams>,
    pub converged: bool,
    pub se_pl_d0: Option<f64>,
    pub se_n: Option<f64>,
    pub se_sigma_sq: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub successes: usize,
    pub failures: usize,
    pub mean: ParamStats,
    /// Sample standard deviation across replicates.
    pub std: ParamStats,
    pub bias: ParamStats,
    /// `std / sqrt(successes)`.
    pub se_of_mean: ParamStats,
    /// Mean of the per-replicate reported standard errors (Tobit only).
    pub mean_reported_se: Option<ReportedSe>,
    /// Empirical std over mean reported SE (Tobit only).
    pub calibration: Option<Calibration>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportedSe {
    pub pl_d0: f64,
    pub n: f64,
    pub sigma_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub pl_d0: f64,
    pub n: f64,
    pub sigma_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    /// Censoring level actually used, dB.
    #[serde(with = "crate::io::float_or_inf")]
    pub c: f64,
    pub mean_censored_fraction: f64,
    pub summaries: Vec<EstimatorSummary>,
    pub records: Vec<ReplicateRecord>,
}

impl ExperimentReport {
    pub fn summary(&self, estimator: Estimator) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| s.estimator == estimator)
    }
}

fn run_replicate(
    spec: &ExperimentSpec,
    distances: &[f64],
    c: f64,
    r: usize,
) -> Vec<ReplicateRecord> {
    let seed = replicate_seed(spec.seed, r);
    let blank = |estimator, fraction| ReplicateRecord {
        replicate: r,
        seed,
        estimator,
        censored_fraction: fraction,
        estimate: None,
        converged: false,
        se_pl_d0: None,
        se_n: None,
        se_sigma_sq: None,
        error: None,
    };
    let dataset = generate_synthetic(&spec.true_params, distances, spec.d0, seed)
        .and_then(|raw| Dataset::from_raw(&raw, spec.d0, c));
    let dataset = match dataset {
        Ok(ds) => ds,
        Err(e) => {
            return spec
                .estimators
                .iter()
                .map(|&est| ReplicateRecord {
                    error: Some(e.to_string()),
                    ..blank(est, f64::NAN)
                })
                .collect()
        }
    };
    let fraction = dataset.censored_fraction();
    spec.estimators
        .iter()
        .map(|&est| {
            let mut rec = blank(est, fraction);
            let mode = match est {
                Estimator::OlsSubstituteC => Some(CensoredHandling::SubstituteC),
                Estimator::OlsDrop => Some(CensoredHandling::DropCensored),
                Estimator::Tobit => None,
            };
            match mode {
                Some(mode) => match ols_fit(&dataset, mode) {
                    Ok(fit) => {
                        rec.estimate = Some(fit.params);
                        rec.converged = true;
                        rec.se_pl_d0 = Some(fit.se_pl_d0);
                        rec.se_n = Some(fit.se_n);
                    }
                    Err(e) => rec.error = Some(e.to_string()),
                },
                None => match tobit_fit(&dataset, &FitOptions::default()) {
                    Ok(fit) if fit.converged => {
                        rec.estimate = Some(fit.params);
                        rec.converged = true;
                        match estimate_standard_errors(&fit, &dataset) {
                            Ok(se) => {
                                rec.se_pl_d0 = se.se_pl_d0;
                                rec.se_n = Some(se.se_n);
                                rec.se_sigma_sq = Some(se.se_sigma_sq);
                            }
                            Err(e) => rec.error = Some(e.to_string()),
                        }
                    }
                    Ok(fit) => {
                        rec.error =
                            Some(format!("not converged after {} iterations", fit.iterations))
                    }
                    Err(e) => rec.error = Some(e.to_string()),
                },
            }
            rec
        })
        .collect()
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (k - 1.0)).sqrt())
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut k) = (0.0, 0usize);
    for v in values {
        sum += v;
        k += 1;
    }
    (k > 0).then(|| sum / k as f64)
}

fn summarize(
    spec: &ExperimentSpec,
    estimator: Estimator,
    records: &[ReplicateRecord],
) -> EstimatorSummary {
    let mine: Vec<&ReplicateRecord> = records
        .iter()
        .filter(|r| r.estimator == estimator)
        .collect();
    let ok: Vec<PathlossParams> = mine.iter().filter_map(|r| r.estimate).collect();
    let column = |f: fn(&PathlossParams) -> f64| mean_std(&ok.iter().map(f).collect::<Vec<_>>());
    let (pl_m, pl_s) = column(|p| p.pl_d0);
    let (n_m, n_s) = column(|p| p.n);
    let (s_m, s_s) = column(|p| p.sigma);
    let sigma_sq: Vec<f64> = ok.iter().map(|p| p.sigma * p.sigma).collect();
    let (_, s2_s) = mean_std(&sigma_sq);
    let root = (ok.len() as f64).sqrt();
    let truth = spec.true_params;

    let (mean_reported_se, calibration) = if estimator == Estimator::Tobit {
        let with_se = || mine.iter().filter(|r| r.estimate.is_some());
        let se = (
            mean_of(with_se().filter_map(|r| r.se_pl_d0)),
            mean_of(with_se().filter_map(|r| r.se_n)),
            mean_of(with_se().filter_map(|r| r.se_sigma_sq)),
        );
        match se {
            (Some(pl), Some(n), Some(s2)) => (
                Some(ReportedSe {
                    pl_d0: pl,
                    n,
                    sigma_sq: s2,
                }),
                Some(Calibration {
                    pl_d0: pl_s / pl,
                    n: n_s / n,
                    sigma_sq: s2_s / s2,
                }),
            ),
            _ => (None, None),
        }
    } else {
        (None, None)
    };

    EstimatorSummary {
        estimator,
        successes: ok.len(),
        failures: mine.len() - ok.len(),
        mean: ParamStats {
            pl_d0: pl_m,
            n: n_m,
            sigma: s_m,
        },
        std: ParamStats {
            pl_d0: pl_s,
            n: n_s,
            sigma: s_s,
        },
        bias: ParamStats {
            pl_d0: pl_m - truth.pl_d0,
            n: n_m - truth.n,
            sigma: s_m - truth.sigma,
        },
        se_of_mean: ParamStats {
            pl_d0: pl_s / root,
            n: n_s / root,
            sigma: s_s / root,
        },
        mean_reported_se,
        calibration,
    }
}

/// Runs every replicate of `spec` and aggregates per estimator.
///
/// Failed or non-converged fits are kept as records with an `error` and
/// left out of the moments.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let distances = spec.design()?;
    let c = match (spec.c, spec.target_censored_fraction) {
        (Some(c), _) => c,
        (None, Some(f)) => censor_level_for_fraction(&spec.true_params, &distances, spec.d0, f)?,
        (None, None) => unreachable!("validated"),
    };
    let records: Vec<ReplicateRecord> = (0..spec.replicates)
        .into_par_iter()
        .map(|r| run_replicate(spec, &distances, c, r))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    let mut fractions = Vec::with_capacity(spec.replicates);
    for r in records.iter().step_by(spec.estimators.len()) {
        if r.censored_fraction.is_finite() {
            fractions.push(r.censored_fraction);
        }
    }
    let summaries: Vec<EstimatorSummary> = spec
        .estimators
        .iter()
        .map(|&e| summarize(spec, e, &records))
        .collect();
    if summaries.iter().all(|s| s.successes == 0) {
        return Err(Error::AllReplicatesFailed(spec.replicates));
    }
    for s in &summaries {
        if s.failures > 0 {
            log::warn!(
                "{}: {} of {} replicates failed",
                s.estimator.name(),
                s.failures,
                spec.replicates
            );
        }
    }
    Ok(ExperimentReport {
        spec: spec.clone(),
        c,
        mean_censored_fraction: mean_of(fractions.into_iter()).unwrap_or(f64::NAN),
        summaries,
        records,
    })
}
