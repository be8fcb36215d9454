//! Log-normal shadowing path-loss model and measurement generation.
//!
//! Path loss at distance `d` from the source follows
//! `L = L0 + 10·γ·log10(d / d0) + n` with `n ~ N(0, σ²)` in dB. Estimators
//! mostly work with the equivalent range `β = d0·10^((L − L0)/(10γ))`,
//! which equals the true distance when the link is noiseless.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest range reported by [`measure_distances`]; additive range noise can
/// otherwise produce nonpositive ranges.
pub const RANGE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6})", self.x, self.y)
    }
}

/// Channel constants plus the RSS noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    /// Reference distance (unit lengths).
    pub d0: f64,
    /// Path loss at `d0` (dB).
    pub l0: f64,
    /// Path-loss exponent.
    pub gamma: f64,
    /// Standard deviation of the dB-domain shadowing noise.
    pub sigma: f64,
}

impl Default for PathLossModel {
    /// `d0 = 0.025`, `L0 = 8 dB`, `γ = 3`, noiseless.
    fn default() -> Self {
        Self {
            d0: 0.025,
            l0: 8.0,
            gamma: 3.0,
            sigma: 0.0,
        }
    }
}

impl PathLossModel {
    pub fn new(d0: f64, l0: f64, gamma: f64, sigma: f64) -> Result<Self> {
        let model = Self {
            d0,
            l0,
            gamma,
            sigma,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_sigma(self, sigma: f64) -> Result<Self> {
        Self::new(self.d0, self.l0, self.gamma, sigma)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d0.is_finite() && self.d0 > 0.0) {
            return Err(Error::invalid(format!("d0 must be > 0, got {}", self.d0)));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::invalid(format!(
                "path-loss exponent must be > 0, got {}",
                self.gamma
            )));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::invalid(format!(
                "RSS noise sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        if !self.l0.is_finite() {
            return Err(Error::invalid("L0 must be finite"));
        }
        Ok(())
    }

    /// Path loss over a link of length `distance` with an explicit noise term.
    pub fn loss_at_distance(&self, distance: f64, noise: f64) -> Result<f64> {
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail too
        if !(distance > 0.0) {
            return Err(Error::Domain(format!(
                "path loss undefined at distance {distance}"
            )));
        }
        Ok(self.l0 + 10.0 * self.gamma * (distance / self.d0).log10() + noise)
    }

    pub fn path_loss(&self, source: Point2, anchor: Point2, noise: f64) -> Result<f64> {
        self.loss_at_distance(source.dist(anchor), noise)
            .map_err(|_| Error::Domain(format!("source {source} coincides with anchor {anchor}")))
    }

    /// Range equivalent of a measured path loss.
    pub fn beta_from_loss(&self, loss: f64) -> f64 {
        self.d0 * 10f64.powf((loss - self.l0) / (10.0 * self.gamma))
    }

    /// Draws one path loss per anchor with i.i.d. N(0, σ²) shadowing.
    ///
    /// `anchors` are the true positions; estimators only ever see the
    /// reported ones.
    pub fn measure_rss<R: Rng + ?Sized>(
        &self,
        source: Point2,
        anchors: &[Point2],
        rng: &mut R,
    ) -> Result<RssMeasurements> {
        if anchors.is_empty() {
            return Err(Error::invalid("no anchors to measure"));
        }
        let losses = anchors
            .iter()
            .map(|&a| {
                let g: f64 = rng.sample(StandardNormal);
                self.path_loss(source, a, self.sigma * g)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RssMeasurements::from_losses(self, losses))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssMeasurements {
    pub losses: Vec<f64>,
    pub betas: Vec<f64>,
}

impl RssMeasurements {
    pub fn from_losses(model: &PathLossModel, losses: Vec<f64>) -> Self {
        let betas = losses.iter().map(|&l| model.beta_from_loss(l)).collect();
        Self { losses, betas }
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMeasurements {
    /// Noisy ranges, one per anchor.
    pub s: Vec<f64>,
    pub variance: f64,
}

/// Ranges with additive N(0, variance) noise, floored at [`RANGE_FLOOR`].
pub fn measure_distances<R: Rng + ?Sized>(
    source: Point2,
    anchors: &[Point2],
    variance: f64,
    rng: &mut R,
) -> Result<DistanceMeasurements> {
    if !(variance.is_finite() && variance >= 0.0) {
        return Err(Error::invalid(format!(
            "range variance must be >= 0, got {variance}"
        )));
    }
    let std = variance.sqrt();
    let s = anchors
        .iter()
        .map(|&a| {
            let g: f64 = rng.sample(StandardNormal);
            (source.dist(a) + std * g).max(RANGE_FLOOR)
        })
        .collect();
    Ok(DistanceMeasurements { s, variance })
}
