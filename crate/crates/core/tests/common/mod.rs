//! Oracles shared by the integration suites.
#![allow(dead_code)]

use censored_pathloss::model::{CensoredSample, Dataset};
use censored_pathloss::numerics::{log_normal_sf, normal_sf};
use censored_pathloss::tobit::TobitObjective;

const SIMPSON_INTERVALS: usize = 4000;

/// Expected log-likelihood of one sample in the flipped (left-censored at 0)
/// model, evaluated at trial `(α0, α1, σ²)` while the data follow the true
/// mean `m_true` and scale `sigma_true`. The uncensored part is integrated
/// with composite Simpson.
pub fn expected_flipped_loglik(x1: f64, trial: [f64; 3], m_true: f64, sigma_true: f64) -> f64 {
    let m = trial[0] + trial[1] * x1;
    let s2 = trial[2];
    let s = s2.sqrt();
    let p_cens = normal_sf(m_true / sigma_true);
    let mut total = p_cens * log_normal_sf(m / s);
    let hi = m_true + 12.0 * sigma_true;
    if hi > 0.0 {
        let h = hi / SIMPSON_INTERVALS as f64;
        let f = |y: f64| {
            let u = (y - m_true) / sigma_true;
            let dens = (-0.5 * u * u).exp() / (sigma_true * (2.0 * std::f64::consts::PI).sqrt());
            let ll = -0.5 * (2.0 * std::f64::consts::PI * s2).ln() - (y - m) * (y - m) / (2.0 * s2);
            ll * dens
        };
        let mut acc = f(0.0) + f(hi);
        for k in 1..SIMPSON_INTERVALS {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(k as f64 * h);
        }
        total += acc * h / 3.0;
    }
    total
}

/// Negative central-difference Hessian of `f` at `theta`.
pub fn negative_hessian(f: impl Fn([f64; 3]) -> f64, theta: [f64; 3]) -> [[f64; 3]; 3] {
    let h: Vec<f64> = theta.iter().map(|t| 1e-3 * t.abs().max(1.0)).collect();
    let at = |di: [f64; 3]| {
        let mut p = theta;
        for k in 0..3 {
            p[k] += di[k];
        }
        f(p)
    };
    let mut out = [[0.0; 3]; 3];
    let f0 = f(theta);
    for i in 0..3 {
        for j in i..3 {
            let v = if i == j {
                let mut e = [0.0; 3];
                e[i] = h[i];
                let mut en = [0.0; 3];
                en[i] = -h[i];
                (at(e) - 2.0 * f0 + at(en)) / (h[i] * h[i])
            } else {
                let mut pp = [0.0; 3];
                let mut pm = [0.0; 3];
                let mut mp = [0.0; 3];
                let mut mm = [0.0; 3];
                pp[i] = h[i];
                pp[j] = h[j];
                pm[i] = h[i];
                pm[j] = -h[j];
                mp[i] = -h[i];
                mp[j] = h[j];
                mm[i] = -h[i];
                mm[j] = -h[j];
                (at(pp) - at(pm) - at(mp) + at(mm)) / (4.0 * h[i] * h[j])
            };
            out[i][j] = -v;
            out[j][i] = -v;
        }
    }
    out
}

/// Expected information of the flipped model over the design `xs`, with
/// true flipped parameters `(α0, α1, σ)`.
pub fn information_oracle(xs: &[f64], alpha_t: [f64; 2], sigma: f64) -> [[f64; 3]; 3] {
    let theta = [alpha_t[0], alpha_t[1], sigma * sigma];
    let total = |p: [f64; 3]| {
        xs.iter()
            .map(|&x| expected_flipped_loglik(x, p, alpha_t[0] + alpha_t[1] * x, sigma))
            .sum::<f64>()
    };
    negative_hessian(total, theta)
}

/// Dataset carrying only a design; values sit safely below `c`.
pub fn design_dataset(distances: &[f64], d0: f64, c: f64) -> Dataset {
    let samples = distances
        .iter()
        .map(|&distance| CensoredSample {
            distance,
            value: c.min(1e6) - 1.0,
            censored: false,
        })
        .collect();
    Dataset::new(samples, d0, c).unwrap()
}

/// Largest absolute central-difference gradient component of the Tobit
/// objective at `coords`, with step `1e-4·max(|x|, 1)`.
pub fn max_gradient(objective: &TobitObjective, coords: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..coords.len() {
        let h = 1e-4 * coords[k].abs().max(1.0);
        let mut up = coords.to_vec();
        let mut dn = coords.to_vec();
        up[k] += h;
        dn[k] -= h;
        let g = (objective.value(&up) - objective.value(&dn)) / (2.0 * h);
        worst = worst.max(g.abs());
    }
    worst
}
