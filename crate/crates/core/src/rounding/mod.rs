//! Rounding of the relaxed robust solution to a point estimate.
//!
//! Every routine scores a finite candidate set and returns its argmin. The
//! scored set can be retained (`RoundingOptions::trace`) for audit.

mod anchor_aware;

use std::f64::consts::TAU;

use nalgebra::{DMatrix, Matrix2};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use anchor_aware::{permutation_row_count, refine_anchor_aware, row_count, unrank_row};

use crate::conic::{factor_covariance, gaussian_sample_factored, rank_one_extract};
use crate::error::{Error, Result};
use crate::estimators::RobustSolution;
use crate::model::Point2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundingBudget {
    /// Source candidates drawn by the randomized roundings.
    pub tt: usize,
    /// Candidate positions drawn per anchor by the anchor-aware rounding.
    pub anchor_candidates: usize,
    /// Cap on index rows enumerated by the anchor-aware rounding.
    pub max_combinations: usize,
}

impl Default for RoundingBudget {
    fn default() -> Self {
        Self {
            tt: 100,
            anchor_candidates: 4,
            max_combinations: 10_000,
        }
    }
}

impl RoundingBudget {
    pub fn validate(&self) -> Result<()> {
        if self.tt == 0 {
            return Err(Error::invalid("tt must be >= 1"));
        }
        if self.anchor_candidates == 0 {
            return Err(Error::invalid("anchor candidate count N must be >= 1"));
        }
        if self.max_combinations == 0 {
            return Err(Error::invalid("max_combinations must be >= 1"));
        }
        Ok(())
    }
}

/// How the anchor-aware rounding combines per-anchor candidate indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AnchorCombination {
    /// Ordered selections of M distinct indices out of N.
    #[default]
    Permutation,
    /// Every index tuple in N^M.
    Cartesian,
}

impl AnchorCombination {
    pub fn label(self) -> &'static str {
        match self {
            AnchorCombination::Permutation => "permutation",
            AnchorCombination::Cartesian => "cartesian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RoundingOptions {
    pub budget: RoundingBudget,
    pub combination: AnchorCombination,
    /// Take the grid scale from the diagonal of `X*` instead of the
    /// covariance `X* − x*x*ᵀ`.
    pub literal_sigma_d: bool,
    /// Add a fresh N(0, σ²) draw to each predicted loss when scoring
    /// anchor-aware candidates.
    pub literal_footnote5: bool,
    /// Discard candidates outside the unit deployment square.
    pub confine_to_area: bool,
    /// Keep every scored candidate in [`Refinement::trace`].
    pub trace: bool,
}

/// Whether `p` lies in the unit deployment square.
pub fn in_area(p: Point2) -> bool {
    (0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y)
}

/// Result of a rounding routine.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Refinement {
    pub point: Point2,
    /// Score of `point` under the routine's own criterion.
    pub score: f64,
    /// Candidates scored (rejected ones excluded).
    pub evaluated: usize,
    /// Candidates discarded as unscorable.
    pub rejected: usize,
    /// Index rows used by the anchor-aware rounding.
    pub rows: Option<usize>,
    /// `(candidate, score)` pairs when tracing is on.
    pub trace: Vec<(Point2, f64)>,
}

impl Refinement {
    /// Plain-text dump of the traced candidates, one per line.
    pub fn trace_text(&self) -> String {
        self.trace
            .iter()
            .map(|(p, s)| format!("{} {} {}\n", p.x, p.y, s))
            .collect()
    }
}

/// Smallest `k` for which `x` is feasible in the per-candidate min-max
/// problem with `l_i = ‖x − ẑ_i‖`, or `None` within ζ of an anchor.
#[inline]
pub(crate) fn k_of(x: Point2, anchors: &[Point2], betas: &[f64], zeta: f64) -> Option<f64> {
    let mut k: f64 = 0.0;
    for (&z, &b) in anchors.iter().zip(betas) {
        let d = x.dist(z);
        let inner = d - zeta;
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail too
        if !(inner > 0.0) {
            return None;
        }
        let b2 = b * b;
        let outer = d + zeta;
        k = k.max(outer * outer / b2).max(b2 / (inner * inner));
    }
    Some(k)
}

/// `max_i max((d_i + ζ)²/β_i², β_i²/(d_i − ζ)²)` with `d_i = ‖x − ẑ_i‖`.
pub fn compute_k(x: Point2, anchors: &[Point2], betas: &[f64], zeta: f64) -> Result<f64> {
    if anchors.len() != betas.len() || anchors.is_empty() {
        return Err(Error::invalid(format!(
            "{} betas for {} anchors",
            betas.len(),
            anchors.len()
        )));
    }
    if !(zeta.is_finite() && zeta >= 0.0) {
        return Err(Error::invalid(format!("zeta must be >= 0, got {zeta}")));
    }
    if betas.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        return Err(Error::invalid("betas must be finite and positive"));
    }
    k_of(x, anchors, betas, zeta)
        .ok_or_else(|| Error::Rejected(format!("candidate {x} lies within {zeta} of an anchor")))
}

/// Argmin bookkeeping shared by the k-scored roundings.
struct KScorer<'a> {
    anchors: &'a [Point2],
    betas: &'a [f64],
    zeta: f64,
    confine: bool,
    best: Option<(Point2, f64)>,
    evaluated: usize,
    rejected: usize,
    trace: Option<Vec<(Point2, f64)>>,
}

impl<'a> KScorer<'a> {
    fn new(anchors: &'a [Point2], betas: &'a [f64], zeta: f64, options: &RoundingOptions) -> Self {
        Self {
            anchors,
            betas,
            zeta,
            confine: options.confine_to_area,
            best: None,
            evaluated: 0,
            rejected: 0,
            trace: options.trace.then(Vec::new),
        }
    }

    #[inline]
    fn score(&mut self, x: Point2) {
        if self.confine && !in_area(x) {
            self.rejected += 1;
            return;
        }
        match k_of(x, self.anchors, self.betas, self.zeta) {
            Some(k) if k.is_finite() => {
                self.evaluated += 1;
                if let Some(t) = self.trace.as_mut() {
                    t.push((x, k));
                }
                // Ties keep the earliest candidate.
                if self.best.is_none_or(|(_, b)| k < b) {
                    self.best = Some((x, k));
                }
            }
            _ => self.rejected += 1,
        }
    }

    fn finish(self, fallback: Point2) -> Refinement {
        let (point, score) = self.best.unwrap_or((fallback, f64::NAN));
        Refinement {
            point,
            score,
            evaluated: self.evaluated,
            rejected: self.rejected,
            rows: None,
            trace: self.trace.unwrap_or_default(),
        }
    }
}

fn require_usable(sol: &RobustSolution, anchors: &[Point2], betas: &[f64]) -> Result<()> {
    if !sol.x_star.is_finite() {
        return Err(Error::Precondition("relaxed solution has no finite x*".into()));
    }
    if anchors.len() != betas.len() {
        return Err(Error::invalid(format!(
            "{} betas for {} anchors",
            betas.len(),
            anchors.len()
        )));
    }
    Ok(())
}

/// Draws `tt` candidates from `N(x*, X* − x*x*ᵀ)` and keeps the one with the
/// smallest [`compute_k`]. Falls back to `x*` when every draw is rejected.
pub fn refine_randomization<R: Rng + ?Sized>(
    sol: &RobustSolution,
    anchors: &[Point2],
    betas: &[f64],
    zeta: f64,
    options: &RoundingOptions,
    rng: &mut R,
) -> Result<Refinement> {
    require_usable(sol, anchors, betas)?;
    options.budget.validate()?;
    let factor = factor_covariance(&sol.covariance());
    let mut scorer = KScorer::new(anchors, betas, zeta, options);
    for _ in 0..options.budget.tt {
        scorer.score(gaussian_sample_factored(sol.x_star, &factor, rng));
    }
    Ok(scorer.finish(sol.x_star))
}

/// Grid scale: the largest standard deviation of the relaxed spread.
pub fn grid_sigma(sol: &RobustSolution, literal: bool) -> f64 {
    let m: Matrix2<f64> = if literal { sol.x_matrix } else { sol.covariance() };
    m[(0, 0)].max(m[(1, 1)]).max(0.0).sqrt()
}

pub const GRID_START_RADIUS: f64 = 1e-4;
pub const GRID_STEP_FRACTION: f64 = 1e-3;

/// Scores `x*` and concentric rings around it. Ring radius `d` starts at
/// 1e-4 and grows by `1e-3·σ_d` while `d ≤ 3σ_d`; each ring carries `⌊1/d⌋`
/// equally spaced points.
pub fn refine_grid(
    sol: &RobustSolution,
    anchors: &[Point2],
    betas: &[f64],
    zeta: f64,
    options: &RoundingOptions,
) -> Result<Refinement> {
    require_usable(sol, anchors, betas)?;
    let sigma_d = grid_sigma(sol, options.literal_sigma_d);
    let step = GRID_STEP_FRACTION * sigma_d;
    let mut scorer = KScorer::new(anchors, betas, zeta, options);
    let c = sol.x_star;
    scorer.score(c);
    if step > 0.0 && step.is_finite() {
        let limit = 3.0 * sigma_d;
        let mut ring = 0u64;
        loop {
            // Multiplying avoids drift from repeated addition.
            let d = GRID_START_RADIUS + ring as f64 * step;
            if d > limit {
                break;
            }
            let count = (1.0 / d).floor() as usize;
            for j in 0..count {
                let a = TAU * j as f64 / count as f64;
                scorer.score(Point2::new(c.x + d * a.cos(), c.y + d * a.sin()));
            }
            ring += 1;
        }
    }
    Ok(scorer.finish(c))
}

/// `±√λ_max·q` from the top eigenpair of `X*`, with the sign that lands
/// closer to `x*`.
pub fn rank_one_round(sol: &RobustSolution) -> Result<Point2> {
    let m = DMatrix::from_iterator(2, 2, sol.x_matrix.iter().copied());
    let (lambda, q) = rank_one_extract(&m)?;
    let r = lambda.max(0.0).sqrt();
    let p = Point2::new(r * q[0], r * q[1]);
    let n = Point2::new(-p.x, -p.y);
    Ok(if n.dist(sol.x_star) < p.dist(sol.x_star) { n } else { p })
}

#[cfg(test)]
mod tests;
