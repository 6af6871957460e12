//! Nelder-Mead simplex minimizer for small smooth problems.
//!
//! Standard coefficients (reflection 1, expansion 2, contractions 0.5,
//! shrink 0.5) and an fminsearch-style initial simplex. Trial points whose
//! objective is not finite are treated as `+∞`, so a caller can reject
//! invalid regions by returning NaN or infinity.
//!
//! A reflected point is only accepted when it is strictly better than the
//! second-worst vertex. Ties go to contraction, so on plateaus where the
//! objective is flat to rounding the simplex keeps shrinking instead of
//! reflecting back and forth.

use crate::error::{Error, Result};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

pub const MAX_DIMENSION: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOptions {
    /// Stop when every vertex is within this max-norm distance of the best one...
    pub x_tol: f64,
    /// ...and every vertex value is within this of the best value.
    pub f_tol: f64,
    pub max_iter: usize,
    /// Per-coordinate initial edge lengths. `None` uses `max(0.05·|x0ᵢ|, 0.00025)`.
    pub initial_step: Option<Vec<f64>>,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            x_tol: 1e-8,
            f_tol: 1e-10,
            max_iter: 2000,
            initial_step: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub point: Vec<f64>,
    pub value: f64,
}

/// Simplex vertices, sorted by value after every step.
#[derive(Debug, Clone)]
pub struct SimplexState {
    pub vertices: Vec<Vertex>,
    pub iteration: usize,
    pub best_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best value after each iteration, starting with the initial simplex.
    pub best_history: Vec<f64>,
}

fn guarded(value: f64) -> f64 {
    if value.is_finite() {
        value
    } else {
        f64::INFINITY
    }
}

/// Default fminsearch-style edge lengths around `x0`.
pub fn default_steps(x0: &[f64]) -> Vec<f64> {
    x0.iter().map(|x| (0.05 * x.abs()).max(0.00025)).collect()
}

impl SimplexState {
    fn new<F: FnMut(&[f64]) -> f64>(
        objective: &mut F,
        x0: &[f64],
        steps: &[f64],
        evaluations: &mut usize,
    ) -> Self {
        let mut vertices = Vec::with_capacity(x0.len() + 1);
        *evaluations += 1;
        vertices.push(Vertex {
            point: x0.to_vec(),
            value: guarded(objective(x0)),
        });
        for (i, step) in steps.iter().enumerate() {
            let mut point = x0.to_vec();
            point[i] += step;
            *evaluations += 1;
            let value = guarded(objective(&point));
            vertices.push(Vertex { point, value });
        }
        let mut state = Self {
            vertices,
            iteration: 0,
            best_history: Vec::new(),
        };
        state.sort();
        state.best_history.push(state.vertices[0].value);
        state
    }

    fn sort(&mut self) {
        // Stable, so ties keep their previous order.
        self.vertices.sort_by(|a, b| a.value.total_cmp(&b.value));
    }

    pub fn best(&self) -> &Vertex {
        &self.vertices[0]
    }

    /// Max-norm distance of the farthest vertex from the best one.
    pub fn diameter(&self) -> f64 {
        let best = &self.vertices[0].point;
        self.vertices[1..]
            .iter()
            .flat_map(|v| v.point.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }

    pub fn value_spread(&self) -> f64 {
        let best = self.vertices[0].value;
        self.vertices[1..]
            .iter()
            .map(|v| (v.value - best).abs())
            .fold(0.0, f64::max)
    }

    fn converged(&self, options: &NelderMeadOptions) -> bool {
        self.diameter() <= options.x_tol && self.value_spread() <= options.f_tol
    }

    fn step<F: FnMut(&[f64]) -> f64>(&mut self, objective: &mut F, evaluations: &mut usize) {
        let dim = self.vertices.len() - 1;
        let mut eval = |p: &[f64]| {
            *evaluations += 1;
            guarded(objective(p))
        };
        let mut centroid = vec![0.0; dim];
        for v in &self.vertices[..dim] {
            for (c, x) in centroid.iter_mut().zip(&v.point) {
                *c += x / dim as f64;
            }
        }
        let worst = self.vertices[dim].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.point)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let best_value = self.vertices[0].value;
        let second_worst = self.vertices[dim - 1].value;

        let reflected = along(REFLECT);
        let fr = eval(&reflected);
        let replacement = if fr < best_value {
            let expanded = along(REFLECT * EXPAND);
            let fe = eval(&expanded);
            if fe < fr {
                Some(Vertex {
                    point: expanded,
                    value: fe,
                })
            } else {
                Some(Vertex {
                    point: reflected,
                    value: fr,
                })
            }
        } else if fr < second_worst {
            Some(Vertex {
                point: reflected,
                value: fr,
            })
        } else if fr < worst.value {
            let outside = along(REFLECT * CONTRACT);
            let fc = eval(&outside);
            (fc <= fr).then_some(Vertex {
                point: outside,
                value: fc,
            })
        } else {
            let inside = along(-CONTRACT);
            let fc = eval(&inside);
            (fc < worst.value).then_some(Vertex {
                point: inside,
                value: fc,
            })
        };

        match replacement {
            Some(v) => self.vertices[dim] = v,
            None => {
                let best = self.vertices[0].point.clone();
                for v in &mut self.vertices[1..] {
                    for (x, b) in v.point.iter_mut().zip(&best) {
                        *x = b + SHRINK * (*x - b);
                    }
                    v.value = eval(&v.point);
                }
            }
        }
        self.sort();
        self.iteration += 1;
        self.best_history.push(self.vertices[0].value);
    }
}

/// Minimizes `objective` starting from `x0`.
///
/// Returns the best vertex found. `converged` is false when `max_iter` ran
/// out before both tolerances were met.
pub fn nelder_mead<F>(mut objective: F, x0: &[f64], options: &NelderMeadOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    if !(1..=MAX_DIMENSION).contains(&dim) {
        return Err(Error::Domain(format!(
            "simplex dimension must be in 1..={MAX_DIMENSION}, got {dim}"
        )));
    }
    if x0.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain(
            "starting point has non-finite coordinates".into(),
        ));
    }
    let steps = match &options.initial_step {
        Some(s) if s.len() == dim && s.iter().all(|v| v.is_finite() && *v != 0.0) => s.clone(),
        Some(_) => {
            return Err(Error::Domain(
                "initial steps must be non-zero and match the dimension".into(),
            ))
        }
        None => default_steps(x0),
    };
    if !objective(x0).is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut evaluations = 1;

    let mut state = SimplexState::new(&mut objective, x0, &steps, &mut evaluations);
    let mut converged = state.converged(options);
    while !converged && state.iteration < options.max_iter {
        state.step(&mut objective, &mut evaluations);
        converged = state.converged(options);
    }
    let best = state.best().clone();
    Ok(Minimum {
        x: best.point,
        f: best.value,
        converged,
        iterations: state.iteration,
        evaluations,
        best_history: state.best_history,
    })
}
