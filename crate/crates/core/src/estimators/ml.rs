//! Maximum-likelihood RSS estimator solved by multi-start Levenberg–Marquardt.

use std::f64::consts::LN_10;
use std::time::Instant;

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::storage::Owned;
use nalgebra::{DVector, Dyn, OMatrix, Vector2, U2};
use rand::Rng;

use super::{check_inputs, EstimateStatus, EstimatorOutput, Method, SolveStats};
use crate::error::{Error, Result};
use crate::model::Point2;

/// Distances below this are clamped in the log residuals.
const MIN_DISTANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlOptions {
    pub restarts: usize,
    pub max_evaluations: usize,
}

impl Default for MlOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_evaluations: 400,
        }
    }
}

/// `Σ_i log10(‖x − ẑ_i‖² / β_i²)²`, the RSS log-likelihood up to scale.
pub fn ml_objective(x: Point2, anchors: &[Point2], betas: &[f64]) -> f64 {
    anchors
        .iter()
        .zip(betas)
        .map(|(&z, &b)| {
            let r = 2.0 * (x.dist(z).max(MIN_DISTANCE) / b).log10();
            r * r
        })
        .sum()
}

struct LogRangeProblem<'a> {
    anchors: &'a [Point2],
    betas: &'a [f64],
    x: Vector2<f64>,
}

impl LeastSquaresProblem<f64, Dyn, U2> for LogRangeProblem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, U2>;
    type ParameterStorage = Owned<f64, U2>;

    fn set_params(&mut self, x: &Vector2<f64>) {
        self.x = *x;
    }

    fn params(&self) -> Vector2<f64> {
        self.x
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let p = Point2::new(self.x[0], self.x[1]);
        Some(DVector::from_iterator(
            self.anchors.len(),
            self.anchors
                .iter()
                .zip(self.betas)
                .map(|(&z, &b)| 2.0 * (p.dist(z).max(MIN_DISTANCE) / b).log10()),
        ))
    }

    fn jacobian(&self) -> Option<OMatrix<f64, Dyn, U2>> {
        let p = Point2::new(self.x[0], self.x[1]);
        let mut j = OMatrix::<f64, Dyn, U2>::zeros(self.anchors.len());
        for (row, &z) in self.anchors.iter().enumerate() {
            let d = p - z;
            let d2 = d.dot(d);
            if d2.sqrt() < MIN_DISTANCE {
                continue;
            }
            let scale = 2.0 / (LN_10 * d2);
            j[(row, 0)] = scale * d.x;
            j[(row, 1)] = scale * d.y;
        }
        Some(j)
    }
}

/// Runs LM from `restarts` uniform starts on the unit square and keeps the
/// best local minimum. The status is `Degraded` when no run reports
/// convergence.
pub fn estimate_ml<R: Rng + ?Sized>(
    anchors: &[Point2],
    betas: &[f64],
    options: &MlOptions,
    rng: &mut R,
) -> Result<EstimatorOutput> {
    let starts: Vec<Point2> = (0..options.restarts)
        .map(|_| Point2::new(rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    estimate_ml_from(anchors, betas, &starts, options.max_evaluations)
}

/// [`estimate_ml`] from explicit starting points.
pub fn estimate_ml_from(
    anchors: &[Point2],
    betas: &[f64],
    starts: &[Point2],
    max_evaluations: usize,
) -> Result<EstimatorOutput> {
    check_inputs(anchors, betas, "betas")?;
    if starts.is_empty() {
        return Err(Error::invalid("maximum likelihood needs at least one start"));
    }
    let clock = Instant::now();
    let lm = LevenbergMarquardt::new().with_patience(max_evaluations.max(1));
    let mut best: Option<(Point2, f64)> = None;
    let mut any_converged = false;
    let mut evaluations = 0usize;
    for &start in starts {
        let problem = LogRangeProblem {
            anchors,
            betas,
            x: Vector2::new(start.x, start.y),
        };
        let (problem, report) = lm.minimize(problem);
        evaluations += report.number_of_evaluations;
        let mut end = Point2::new(problem.x[0], problem.x[1]);
        let mut value = ml_objective(end, anchors, betas);
        let start_value = ml_objective(start, anchors, betas);
        if !(value.is_finite() && end.is_finite()) || value > start_value {
            end = start;
            value = start_value;
        } else if report.termination.was_successful() {
            any_converged = true;
        }
        if best.is_none_or(|(_, v)| value < v) {
            best = Some((end, value));
        }
    }
    let (x_hat, objective) = best.expect("at least one start");
    Ok(EstimatorOutput {
        method: Method::Ml,
        x_hat: Some(x_hat),
        objective,
        status: if any_converged {
            EstimateStatus::Optimal
        } else {
            EstimateStatus::Degraded
        },
        stats: SolveStats {
            iterations: evaluations as u32,
            seconds: clock.elapsed().as_secs_f64(),
        },
    })
}
