//! Log-distance pathloss model with log-normal shadowing.
//!
//! `PL(d) = PL(d0) + 10·n·log10(d/d0) + Ψ`, `Ψ ~ N(0, σ²)` in dB, valid for
//! `d ≥ d0`. Samples at or above the censoring level `c` are recorded as `c`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::normal_sf;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Reference pathloss, exponent and shadowing standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathlossParams {
    /// PL(d0), dB.
    pub pl_d0: f64,
    /// Pathloss exponent.
    pub n: f64,
    /// Shadowing standard deviation σ, dB.
    pub sigma: f64,
}

impl PathlossParams {
    pub fn new(pl_d0: f64, n: f64, sigma: f64) -> Result<Self> {
        let params = Self { pl_d0, n, sigma };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pl_d0.is_finite() && self.n.is_finite() && self.sigma.is_finite()) {
            return Err(Error::Domain(format!("non-finite parameters {self:?}")));
        }
        if self.sigma <= 0.0 {
            return Err(Error::Domain(format!(
                "shadowing std must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    /// Mean pathloss at regressor value `x = 10·log10(d/d0)`.
    pub fn mean_at(&self, x: f64) -> f64 {
        self.pl_d0 + self.n * x
    }
}

/// Regressor `10·log10(d/d0)`; zero at the reference distance.
pub fn regressor(d: f64, d0: f64) -> f64 {
    10.0 * (d / d0).log10()
}

fn check_distance(d: f64, d0: f64) -> Result<()> {
    if !(d0.is_finite() && d0 > 0.0) {
        return Err(Error::Domain(format!(
            "reference distance must be positive, got {d0}"
        )));
    }
    if !d.is_finite() || d < d0 {
        return Err(Error::Domain(format!(
            "distance {d} m is below the reference distance {d0} m"
        )));
    }
    Ok(())
}

/// Distance-dependent mean μ(d) = PL(d0) + 10·n·log10(d/d0).
pub fn mean_pathloss(params: &PathlossParams, d: f64, d0: f64) -> Result<f64> {
    check_distance(d, d0)?;
    Ok(params.mean_at(regressor(d, d0)))
}

/// Free-space pathloss 20·log10(4π·d0/λ) at the reference distance.
pub fn fspl_reference(frequency_hz: f64, d0: f64) -> Result<f64> {
    if !(frequency_hz.is_finite() && frequency_hz > 0.0) {
        return Err(Error::Domain(format!(
            "frequency must be positive, got {frequency_hz}"
        )));
    }
    if !(d0.is_finite() && d0 > 0.0) {
        return Err(Error::Domain(format!(
            "reference distance must be positive, got {d0}"
        )));
    }
    let wavelength = SPEED_OF_LIGHT / frequency_hz;
    Ok(20.0 * (4.0 * std::f64::consts::PI * d0 / wavelength).log10())
}

/// Probability that a sample at distance `d` is censored, 1 − Φ((c − μ(d))/σ).
pub fn censoring_probability(params: &PathlossParams, d: f64, d0: f64, c: f64) -> Result<f64> {
    let mu = mean_pathloss(params, d, d0)?;
    Ok(normal_sf((c - mu) / params.sigma))
}

/// An uncensored draw of the pathloss process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub distance: f64,
    pub value: f64,
}

/// Draws `μ(d) + N(0, σ²)` at each distance.
///
/// Uses ChaCha8 seeded from `seed` and the ziggurat normal sampler from
/// `rand_distr`; identical seeds give identical output on a given build.
pub fn generate_synthetic(
    params: &PathlossParams,
    distances: &[f64],
    d0: f64,
    seed: u64,
) -> Result<Vec<RawSample>> {
    params.validate()?;
    let noise = Normal::new(0.0, params.sigma)
        .map_err(|e| Error::Domain(format!("invalid shadowing std: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    distances
        .iter()
        .map(|&d| {
            let mu = mean_pathloss(params, d, d0)?;
            Ok(RawSample {
                distance: d,
                value: mu + noise.sample(&mut rng),
            })
        })
        .collect()
}

/// How synthetic measurement distances are laid out between `d_min` and `d_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

/// `count` distances from `d_min` to `d_max` inclusive.
pub fn spaced_distances(
    spacing: Spacing,
    d_min: f64,
    d_max: f64,
    count: usize,
) -> Result<Vec<f64>> {
    if !(d_min.is_finite() && d_max.is_finite() && d_min > 0.0 && d_max >= d_min) {
        return Err(Error::Domain(format!(
            "need 0 < d_min <= d_max, got d_min={d_min}, d_max={d_max}"
        )));
    }
    if count == 0 {
        return Err(Error::Domain("distance count must be at least 1".into()));
    }
    if count == 1 {
        return Ok(vec![d_min]);
    }
    let steps = (count - 1) as f64;
    let out = (0..count)
        .map(|k| {
            let t = k as f64 / steps;
            match spacing {
                Spacing::Log => d_min * (d_max / d_min).powf(t),
                Spacing::Linear => d_min + (d_max - d_min) * t,
            }
        })
        .collect();
    Ok(out)
}

/// One measurement after censoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensoredSample {
    /// Tx-Rx distance, m.
    pub distance: f64,
    /// Measured pathloss in dB, or the censoring level when `censored`.
    pub value: f64,
    pub censored: bool,
}

/// Censors at `c`: values at or above `c` become `(c, censored)`.
pub fn apply_censoring(values: &[RawSample], c: f64) -> Vec<CensoredSample> {
    values
        .iter()
        .map(|s| {
            if s.value >= c {
                CensoredSample {
                    distance: s.distance,
                    value: c,
                    censored: true,
                }
            } else {
                CensoredSample {
                    distance: s.distance,
                    value: s.value,
                    censored: false,
                }
            }
        })
        .collect()
}

/// Ordered, validated measurement set with a single censoring level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<CensoredSample>,
    d0: f64,
    c: f64,
    frequency_hz: Option<f64>,
}

impl Dataset {
    pub fn new(samples: Vec<CensoredSample>, d0: f64, c: f64) -> Result<Self> {
        if !(d0.is_finite() && d0 > 0.0) {
            return Err(Error::InvalidDataset(format!(
                "reference distance must be positive, got {d0}"
            )));
        }
        if c.is_nan() {
            return Err(Error::InvalidDataset("censoring level is NaN".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvalidDataset("no samples".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            if let Err(msg) = check_sample(s, d0, c) {
                return Err(Error::InvalidDataset(format!("sample {i}: {msg}")));
            }
        }
        Ok(Self {
            samples,
            d0,
            c,
            frequency_hz: None,
        })
    }

    /// Censors raw draws at `c` and wraps them.
    pub fn from_raw(values: &[RawSample], d0: f64, c: f64) -> Result<Self> {
        Self::new(apply_censoring(values, c), d0, c)
    }

    pub fn with_frequency(mut self, frequency_hz: Option<f64>) -> Result<Self> {
        if let Some(f) = frequency_hz {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::InvalidDataset(format!(
                    "frequency must be positive, got {f}"
                )));
            }
        }
        self.frequency_hz = frequency_hz;
        Ok(self)
    }

    pub fn samples(&self) -> &[CensoredSample] {
        &self.samples
    }

    pub fn d0(&self) -> f64 {
        self.d0
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn frequency_hz(&self) -> Option<f64> {
        self.frequency_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_censored(&self) -> usize {
        self.samples.iter().filter(|s| s.censored).count()
    }

    pub fn censored_fraction(&self) -> f64 {
        self.n_censored() as f64 / self.len() as f64
    }

    /// Regressors `10·log10(d/d0)`, one per sample.
    pub fn regressors(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|s| regressor(s.distance, self.d0))
            .collect()
    }

    /// Rows `[1, 10·log10(d/d0)]` of the design matrix.
    pub fn design_rows(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.samples
            .iter()
            .map(|s| [1.0, regressor(s.distance, self.d0)])
    }

    pub fn max_distance(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.distance)
            .fold(self.d0, f64::max)
    }
}

pub(crate) fn check_sample(s: &CensoredSample, d0: f64, c: f64) -> std::result::Result<(), String> {
    if !s.distance.is_finite() || s.distance < d0 {
        return Err(format!(
            "distance {} m is below the reference distance {d0} m",
            s.distance
        ));
    }
    if s.censored {
        if !c.is_finite() {
            return Err("censored sample with an infinite censoring level".into());
        }
        if s.value != c {
            return Err(format!(
                "censored value {} differs from censoring level {c}",
                s.value
            ));
        }
    } else {
        if !s.value.is_finite() {
            return Err(format!("non-finite pathloss {}", s.value));
        }
        if s.value >= c {
            return Err(format!(
                "uncensored value {} is at or above the censoring level {c}",
                s.value
            ));
        }
    }
    Ok(())
}

/// Parameters of the sign-flipped problem `y_t = c − y`, censored at or below 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedParams {
    /// `[c − PL(d0), −n]`
    pub alpha_t: [f64; 2],
    pub sigma: f64,
}

pub fn to_transformed(params: &PathlossParams, c: f64) -> TransformedParams {
    TransformedParams {
        alpha_t: [c - params.pl_d0, -params.n],
        sigma: params.sigma,
    }
}

pub fn from_transformed(tp: &TransformedParams, c: f64) -> PathlossParams {
    PathlossParams {
        pl_d0: c - tp.alpha_t[0],
        n: -tp.alpha_t[1],
        sigma: tp.sigma,
    }
}

/// Transformed observation `c − y`.
pub fn transform_value(y: f64, c: f64) -> f64 {
    c - y
}
