//! Asymptotic variance of the Tobit ML estimator.
//!
//! The data are flipped to `y_t = c − y`, which turns censoring at or above
//! `c` into censoring at or below zero with parameters
//! `θ_t = [c − PL(d0), −n, σ²]`. For each sample, `z = x·α_t / σ`
//! and the per-sample information block is
//!
//! ```text
//! A_i = | a·xᵀx  b·xᵀ |
//!       | b·x    c    |
//! ```
//!
//! The asymptotic variances are the diagonal of `(Σ A_i)⁻¹`. The sign flip
//! does not change them. The sum runs over every sample, censored or not,
//! because the coefficients depend only on `z`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{regressor, to_transformed, Dataset, PathlossParams};
use crate::numerics::{mills_ratio, normal_cdf, normal_pdf, StandardScore};
use crate::tobit::TobitFit;

/// Condition estimate above which the summed information is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvarCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Per-sample information coefficients at standardized score `z`.
///
/// `φ²/(1 − Φ)` is evaluated as `φ·mills_ratio(z)`.
pub fn avar_coefficients(z: StandardScore, sigma: f64) -> Result<AvarCoefficients> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let z = z.value();
    let pdf = normal_pdf(z);
    let cdf = normal_cdf(z);
    let pdf_sq_over_tail = pdf * mills_ratio(z);
    let s2 = sigma * sigma;
    let a = -(z * pdf - pdf_sq_over_tail - cdf) / s2;
    let b = (z * z * pdf + pdf - z * pdf_sq_over_tail) / (2.0 * s2 * sigma);
    let c = -(z * z * z * pdf + z * pdf - z * z * pdf_sq_over_tail - 2.0 * cdf) / (4.0 * s2 * s2);
    Ok(AvarCoefficients { a, b, c })
}

/// Uncensored limit z → +∞.
fn uncensored_coefficients(sigma: f64) -> AvarCoefficients {
    let s2 = sigma * sigma;
    AvarCoefficients {
        a: 1.0 / s2,
        b: 0.0,
        c: 0.5 / (s2 * s2),
    }
}

pub type Matrix3 = [[f64; 3]; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvarMatrix {
    /// `Σ A_i` over `(α_t0, α_t1, σ²)`.
    pub a_matrix: Matrix3,
    /// Asymptotic variances of `(PL(d0), n, σ²)`. The first entry is zero
    /// when PL(d0) was held fixed.
    pub inverse_diag: [f64; 3],
    /// Square roots of `inverse_diag`.
    pub se: [f64; 3],
    pub fixed_pl_d0: bool,
}

fn summed_information(params: &PathlossParams, dataset: &Dataset) -> Result<Matrix3> {
    params.validate()?;
    let tp = to_transformed(params, dataset.c());
    let sigma = params.sigma;
    let mut m = [[0.0; 3]; 3];
    for s in dataset.samples() {
        let x = [1.0, regressor(s.distance, dataset.d0())];
        let z = (tp.alpha_t[0] + tp.alpha_t[1] * x[1]) / sigma;
        let coef = if z == f64::INFINITY {
            uncensored_coefficients(sigma)
        } else {
            avar_coefficients(StandardScore::new(z)?, sigma)?
        };
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] += coef.a * x[i] * x[j];
            }
            m[i][2] += coef.b * x[i];
        }
        m[2][2] += coef.c;
    }
    m[2][0] = m[0][2];
    m[2][1] = m[1][2];
    Ok(m)
}

fn norm1<const N: usize>(m: &[[f64; N]; N]) -> f64 {
    (0..N)
        .map(|j| (0..N).map(|i| m[i][j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse of a 3×3 matrix by the adjugate formula.
///
/// Fails with `SingularInformation` when the 1-norm condition estimate
/// exceeds [`MAX_CONDITION`] or the determinant is not a usable number.
pub fn invert_3x3(m: &Matrix3) -> Result<Matrix3> {
    let cof =
        |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    // adj[i][j] = cofactor C[j][i]
    let adj = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    let det = m[0][0] * adj[0][0] + m[0][1] * adj[1][0] + m[0][2] * adj[2][0];
    if !(det.is_finite() && det != 0.0) {
        return Err(Error::SingularInformation {
            condition: f64::INFINITY,
        });
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            inv[i][j] = adj[i][j] / det;
        }
    }
    let condition = norm1(m) * norm1(&inv);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularInformation { condition });
    }
    Ok(inv)
}

fn invert_2x2(m: &[[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if !(det.is_finite() && det != 0.0) {
        return Err(Error::SingularInformation {
            condition: f64::INFINITY,
        });
    }
    let inv = [
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ];
    let condition = norm1(m) * norm1(&inv);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularInformation { condition });
    }
    Ok(inv)
}

fn finish(a_matrix: Matrix3, inverse_diag: [f64; 3], fixed_pl_d0: bool) -> Result<AvarMatrix> {
    let free = if fixed_pl_d0 { 1 } else { 0 };
    if inverse_diag[free..]
        .iter()
        .any(|v| !(*v > 0.0 && v.is_finite()))
    {
        return Err(Error::SingularInformation {
            condition: f64::INFINITY,
        });
    }
    Ok(AvarMatrix {
        a_matrix,
        inverse_diag,
        se: inverse_diag.map(f64::sqrt),
        fixed_pl_d0,
    })
}

/// Summed information and asymptotic variances at `params`.
pub fn avar_matrix(params: &PathlossParams, dataset: &Dataset) -> Result<AvarMatrix> {
    let m = summed_information(params, dataset)?;
    let inv = invert_3x3(&m)?;
    finish(m, [inv[0][0], inv[1][1], inv[2][2]], false)
}

/// As [`avar_matrix`] with PL(d0) known: the first row and column are
/// dropped and the `(n, σ²)` block is inverted.
pub fn avar_matrix_fixed_reference(
    params: &PathlossParams,
    dataset: &Dataset,
) -> Result<AvarMatrix> {
    let m = summed_information(params, dataset)?;
    let inv = invert_2x2(&[[m[1][1], m[1][2]], [m[2][1], m[2][2]]])?;
    finish(m, [0.0, inv[0][0], inv[1][1]], true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardErrors {
    /// `None` when PL(d0) was held fixed.
    pub se_pl_d0: Option<f64>,
    pub se_n: f64,
    pub se_sigma_sq: f64,
}

/// Standard errors of a Tobit fit, from the information evaluated at the estimates.
pub fn estimate_standard_errors(fit: &TobitFit, dataset: &Dataset) -> Result<StandardErrors> {
    if !fit.converged {
        log::warn!("standard errors evaluated at a point where the simplex did not converge");
    }
    let avar = match fit.fixed_pl_d0 {
        Some(_) => avar_matrix_fixed_reference(&fit.params, dataset)?,
        None => avar_matrix(&fit.params, dataset)?,
    };
    Ok(StandardErrors {
        se_pl_d0: (!avar.fixed_pl_d0).then_some(avar.se[0]),
        se_n: avar.se[1],
        se_sigma_sq: avar.se[2],
    })
}
