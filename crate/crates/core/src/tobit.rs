//! Censored-normal (Tobit) maximum-likelihood fit of the pathloss model.
//!
//! The negative log-likelihood is minimized with Nelder-Mead over
//! `(PL(d0), n, ln σ)`, or `(n, ln σ)` when the reference pathloss is held
//! fixed. Optimizing `ln σ` keeps every trial point at a valid σ. The search
//! starts from OLS with censored rows substituted at `c`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, PathlossParams};
use crate::numerics::{log_normal_sf, HALF_LN_2PI};
use crate::ols::least_squares_line;
use crate::optim::{nelder_mead, Minimum, NelderMeadOptions};

/// Censored fraction above which a fit is reported with a warning.
pub const HEAVY_CENSORING: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Hold PL(d0) at this value (dB) and estimate only `n` and `σ`.
    pub fixed_pl_d0: Option<f64>,
    pub simplex: NelderMeadOptions,
    /// Restart once from the best point when the first search does not converge.
    pub restart: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            fixed_pl_d0: None,
            simplex: NelderMeadOptions {
                x_tol: 1e-8,
                f_tol: 1e-10,
                max_iter: 2000,
                initial_step: None,
            },
            restart: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitWarning {
    HeavyCensoring { fraction: f64 },
    NotConverged { iterations: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TobitFit {
    pub params: PathlossParams,
    /// Minimized negative log-likelihood.
    pub nll: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_censored: usize,
    pub n_uncensored: usize,
    /// OLS warm start.
    pub init: PathlossParams,
    pub fixed_pl_d0: Option<f64>,
    pub warnings: Vec<FitWarning>,
    /// Best NLL after each simplex iteration, across the restart.
    #[serde(skip)]
    pub best_history: Vec<f64>,
}

impl TobitFit {
    /// The optimum in the coordinates the simplex searched.
    pub fn coordinates(&self) -> Vec<f64> {
        match self.fixed_pl_d0 {
            Some(_) => vec![self.params.n, self.params.sigma.ln()],
            None => vec![self.params.pl_d0, self.params.n, self.params.sigma.ln()],
        }
    }
}

/// Negative log-likelihood over a fixed dataset, with precomputed regressors.
#[derive(Debug, Clone)]
pub struct TobitObjective {
    xs: Vec<f64>,
    ys: Vec<f64>,
    censored: Vec<bool>,
    c: f64,
    fixed_pl_d0: Option<f64>,
}

impl TobitObjective {
    pub fn new(dataset: &Dataset, fixed_pl_d0: Option<f64>) -> Self {
        Self {
            xs: dataset.regressors(),
            ys: dataset.samples().iter().map(|s| s.value).collect(),
            censored: dataset.samples().iter().map(|s| s.censored).collect(),
            c: dataset.c(),
            fixed_pl_d0,
        }
    }

    pub fn dimension(&self) -> usize {
        if self.fixed_pl_d0.is_some() {
            2
        } else {
            3
        }
    }

    /// Maps search coordinates to `(PL(d0), n, σ)`.
    pub fn to_params(&self, coords: &[f64]) -> PathlossParams {
        match self.fixed_pl_d0 {
            Some(pl) => PathlossParams {
                pl_d0: pl,
                n: coords[0],
                sigma: coords[1].exp(),
            },
            None => PathlossParams {
                pl_d0: coords[0],
                n: coords[1],
                sigma: coords[2].exp(),
            },
        }
    }

    pub fn to_coords(&self, params: &PathlossParams) -> Vec<f64> {
        match self.fixed_pl_d0 {
            Some(_) => vec![params.n, params.sigma.ln()],
            None => vec![params.pl_d0, params.n, params.sigma.ln()],
        }
    }

    /// NLL at search coordinates; NaN/∞ for invalid σ.
    pub fn value(&self, coords: &[f64]) -> f64 {
        let p = self.to_params(coords);
        self.nll(p.pl_d0, p.n, p.sigma)
    }

    fn nll(&self, pl_d0: f64, n: f64, sigma: f64) -> f64 {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return f64::NAN;
        }
        let ln_sigma = sigma.ln();
        let mut total = 0.0;
        for ((x, y), censored) in self.xs.iter().zip(&self.ys).zip(&self.censored) {
            let mu = pl_d0 + n * x;
            if *censored {
                total -= log_normal_sf((self.c - mu) / sigma);
            } else {
                let r = (y - mu) / sigma;
                total += ln_sigma + HALF_LN_2PI + 0.5 * r * r;
            }
        }
        total
    }
}

/// `−L(σ, α)`: uncensored rows contribute `ln σ − ln φ(r)`, censored rows
/// `−ln(1 − Φ((c − μ)/σ))`.
pub fn tobit_nll(params: &PathlossParams, dataset: &Dataset) -> Result<f64> {
    if !(params.sigma > 0.0) {
        return Err(Error::Domain(format!(
            "shadowing std must be positive, got {}",
            params.sigma
        )));
    }
    Ok(TobitObjective::new(dataset, None).nll(params.pl_d0, params.n, params.sigma))
}

fn distinct_count(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// OLS on the censored data as recorded (censored rows at `c`).
fn warm_start(dataset: &Dataset, fixed_pl_d0: Option<f64>) -> Result<PathlossParams> {
    let xs = dataset.regressors();
    let ys: Vec<f64> = dataset.samples().iter().map(|s| s.value).collect();
    let len = xs.len() as f64;
    let (pl_d0, n, rss) = match fixed_pl_d0 {
        None => {
            let line = least_squares_line(&xs, &ys)?;
            (line.intercept, line.slope, line.rss)
        }
        Some(pl) => {
            let sxx: f64 = xs.iter().map(|x| x * x).sum();
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * (y - pl)).sum();
            let n = sxy / sxx;
            let rss = xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| (y - pl - n * x).powi(2))
                .sum();
            (pl, n, rss)
        }
    };
    let var = if len > 1.0 { rss / (len - 1.0) } else { 0.0 };
    let sigma = if var > 0.0 && var.is_finite() {
        var.sqrt()
    } else {
        1.0
    };
    Ok(PathlossParams { pl_d0, n, sigma })
}

fn check_identifiable(dataset: &Dataset, fixed_pl_d0: Option<f64>) -> Result<()> {
    let uncensored = || {
        dataset
            .samples()
            .iter()
            .filter(|s| !s.censored)
            .map(|s| crate::model::regressor(s.distance, dataset.d0()))
    };
    if uncensored().next().is_none() {
        return Err(Error::AllCensored);
    }
    match fixed_pl_d0 {
        None if distinct_count(uncensored()) < 2 => Err(Error::DegenerateDesign(
            "need uncensored samples at two or more distinct distances".into(),
        )),
        Some(pl) if !pl.is_finite() => Err(Error::Domain(format!(
            "fixed reference pathloss must be finite, got {pl}"
        ))),
        Some(_) if uncensored().all(|x| x == 0.0) => Err(Error::DegenerateDesign(
            "with PL(d0) fixed, need an uncensored sample beyond d0".into(),
        )),
        _ => Ok(()),
    }
}

/// Maximum-likelihood estimate of `(PL(d0), n, σ)` under censoring at `c`.
pub fn tobit_fit(dataset: &Dataset, options: &FitOptions) -> Result<TobitFit> {
    check_identifiable(dataset, options.fixed_pl_d0)?;
    let objective = TobitObjective::new(dataset, options.fixed_pl_d0);
    let init = warm_start(dataset, options.fixed_pl_d0)?;

    let mut start = init;
    let mut tries = 0;
    while !objective.value(&objective.to_coords(&start)).is_finite() {
        tries += 1;
        if tries > 6 {
            return Err(Error::NonFinite(format!("warm start {init:?}")));
        }
        start.sigma *= 10.0;
    }

    let f = |x: &[f64]| objective.value(x);
    let first = nelder_mead(f, &objective.to_coords(&start), &options.simplex)?;
    let mut iterations = first.iterations;
    let mut history = first.best_history.clone();
    let mut best: Minimum = first;
    if !best.converged && options.restart {
        let second = nelder_mead(f, &best.x, &options.simplex)?;
        iterations += second.iterations;
        history.extend(second.best_history.iter().skip(1));
        if second.f <= best.f {
            best = second;
        } else {
            best.converged = second.converged;
        }
    }

    let n_censored = dataset.n_censored();
    let mut warnings = Vec::new();
    let fraction = dataset.censored_fraction();
    if fraction > HEAVY_CENSORING {
        warn!(
            "{:.0}% of samples are censored; estimates are weakly identified",
            fraction * 100.0
        );
        warnings.push(FitWarning::HeavyCensoring { fraction });
    }
    if !best.converged {
        warn!("simplex search stopped after {iterations} iterations without meeting tolerances");
        warnings.push(FitWarning::NotConverged { iterations });
    }

    Ok(TobitFit {
        params: objective.to_params(&best.x),
        nll: best.f,
        converged: best.converged,
        iterations,
        n_censored,
        n_uncensored: dataset.len() - n_censored,
        init,
        fixed_pl_d0: options.fixed_pl_d0,
        warnings,
        best_history: history,
    })
}
