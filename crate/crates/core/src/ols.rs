//! Ordinary least squares baseline.
//!
//! Fits `y = PL(d0) + n·x` with `x = 10·log10(d/d0)` in closed form and
//! reports sampling-distribution standard errors. The shadowing variance
//! estimate divides the residual sum of squares by `L − 1`, not the usual
//! `L − 2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, PathlossParams};

/// What OLS does with censored rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CensoredHandling {
    /// Censored rows enter the regression with `y = c`.
    #[default]
    SubstituteC,
    /// Censored rows are excluded.
    DropCensored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    /// `sigma` is `sqrt(sigma_sq_hat)` and may be zero for collinear data.
    pub params: PathlossParams,
    pub se_pl_d0: f64,
    pub se_n: f64,
    pub sigma_sq_hat: f64,
    pub residuals: Vec<f64>,
    pub x_bar: f64,
    pub s_xx: f64,
    /// Number of rows that entered the fit.
    pub count: usize,
    pub mode: CensoredHandling,
}

/// Closed-form simple regression on centred sums.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub x_bar: f64,
    pub s_xx: f64,
    pub rss: f64,
}

pub(crate) fn least_squares_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    debug_assert_eq!(xs.len(), ys.len());
    let len = xs.len() as f64;
    let x_bar = xs.iter().sum::<f64>() / len;
    let y_bar = ys.iter().sum::<f64>() / len;
    let (mut s_xx, mut s_xy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - x_bar;
        s_xx += dx * dx;
        s_xy += dx * (y - y_bar);
    }
    let scale: f64 = xs.iter().map(|x| x * x).sum();
    if !(s_xx > f64::EPSILON * scale) {
        return Err(Error::DegenerateDesign(
            "all sample distances are equal (S_xx = 0)".into(),
        ));
    }
    let slope = s_xy / s_xx;
    let intercept = y_bar - slope * x_bar;
    let rss = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(LineFit {
        intercept,
        slope,
        x_bar,
        s_xx,
        rss,
    })
}

/// OLS estimates of `PL(d0)`, `n` and `σ²`, with standard errors.
pub fn ols_fit(dataset: &Dataset, mode: CensoredHandling) -> Result<OlsFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = dataset
        .samples()
        .iter()
        .zip(dataset.regressors())
        .filter(|(s, _)| mode == CensoredHandling::SubstituteC || !s.censored)
        .map(|(s, x)| (x, s.value))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: xs.len(),
        });
    }
    let line = least_squares_line(&xs, &ys)?;
    let count = xs.len();
    let sigma_sq_hat = line.rss / (count as f64 - 1.0);
    let residuals = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - line.intercept - line.slope * x)
        .collect();
    let mut fit = OlsFit {
        params: PathlossParams {
            pl_d0: line.intercept,
            n: line.slope,
            sigma: sigma_sq_hat.sqrt(),
        },
        se_pl_d0: 0.0,
        se_n: 0.0,
        sigma_sq_hat,
        residuals,
        x_bar: line.x_bar,
        s_xx: line.s_xx,
        count,
        mode,
    };
    let (se_pl_d0, se_n) = ols_standard_errors(&fit, count)?;
    fit.se_pl_d0 = se_pl_d0;
    fit.se_n = se_n;
    Ok(fit)
}

/// `(SE(PL(d0)), SE(n))` = `σ̂·√(1/L + x̄²/S_xx)`, `σ̂·√(1/S_xx)`.
pub fn ols_standard_errors(fit: &OlsFit, count: usize) -> Result<(f64, f64)> {
    if !(fit.s_xx > 0.0) {
        return Err(Error::DegenerateDesign("S_xx is not positive".into()));
    }
    if count != fit.count || count == 0 {
        return Err(Error::Domain(format!(
            "sample count {count} does not match the {} rows used in the fit",
            fit.count
        )));
    }
    let sigma = fit.sigma_sq_hat.sqrt();
    let se_n = sigma * (1.0 / fit.s_xx).sqrt();
    let se_pl_d0 = sigma * (1.0 / count as f64 + fit.x_bar * fit.x_bar / fit.s_xx).sqrt();
    Ok((se_pl_d0, se_n))
}
