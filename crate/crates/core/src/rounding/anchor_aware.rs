//! Rounding that also hypothesizes the true anchor positions.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{in_area, AnchorCombination, Refinement, RoundingOptions};
use crate::conic::{factor_covariance, gaussian_sample_factored};
use crate::error::{Error, Result};
use crate::estimators::RobustSolution;
use crate::model::{PathLossModel, Point2};
use crate::scenario::PerturbationLaw;

/// Distances below this make a (source, anchor candidate) pair unscorable.
const COINCIDENT: f64 = 1e-12;

/// `N!/(N − M)!`, or `None` on overflow.
pub fn permutation_row_count(n: usize, m: usize) -> Option<u64> {
    if m > n {
        return Some(0);
    }
    ((n - m + 1)..=n).try_fold(1u64, |acc, f| acc.checked_mul(f as u64))
}

/// Number of index rows for `M` anchors with `N` candidates each.
pub fn row_count(n: usize, m: usize, combination: AnchorCombination) -> Option<u64> {
    match combination {
        AnchorCombination::Permutation => permutation_row_count(n, m),
        AnchorCombination::Cartesian => (n as u64).checked_pow(m as u32),
    }
}

/// Row number `rank` in lexicographic order.
pub fn unrank_row(mut rank: u64, n: usize, m: usize, combination: AnchorCombination) -> Vec<usize> {
    match combination {
        AnchorCombination::Cartesian => {
            let mut row = vec![0; m];
            for slot in row.iter_mut().rev() {
                *slot = (rank % n as u64) as usize;
                rank /= n as u64;
            }
            row
        }
        AnchorCombination::Permutation => {
            let mut pool: Vec<usize> = (0..n).collect();
            let mut row = Vec::with_capacity(m);
            for pos in 0..m {
                let width = permutation_row_count(n - pos - 1, m - pos - 1).unwrap_or(u64::MAX);
                let idx = (rank / width) as usize;
                rank %= width;
                row.push(pool.remove(idx));
            }
            row
        }
    }
}

/// Picks the source candidate whose best anchor hypothesis reproduces the
/// measured losses with the smallest squared error.
///
/// Source candidates come from `N(x*, X* − x*x*ᵀ)`. Each anchor gets `N`
/// positions uniform on its ζ-disk; an index row chooses one per anchor.
/// Rows beyond `max_combinations` are thinned by uniform sampling without
/// replacement. Falls back to `x*` when no pair is scorable.
pub fn refine_anchor_aware<R: Rng + ?Sized>(
    sol: &RobustSolution,
    anchors: &[Point2],
    losses: &[f64],
    model: &PathLossModel,
    zeta: f64,
    options: &RoundingOptions,
    rng: &mut R,
) -> Result<Refinement> {
    let budget = &options.budget;
    budget.validate()?;
    let (m, n) = (anchors.len(), budget.anchor_candidates);
    if losses.len() != m {
        return Err(Error::invalid(format!("{} losses for {m} anchors", losses.len())));
    }
    if options.combination == AnchorCombination::Permutation && n < m {
        return Err(Error::invalid(format!(
            "anchor-aware rounding needs N >= M distinct candidates, got N={n}, M={m}"
        )));
    }
    if !sol.x_star.is_finite() {
        return Err(Error::Precondition("relaxed solution has no finite x*".into()));
    }

    let factor = factor_covariance(&sol.covariance());
    let sources: Vec<Point2> = (0..budget.tt)
        .map(|_| gaussian_sample_factored(sol.x_star, &factor, rng))
        .collect();
    // pool[i * n + j]: candidate j for anchor i.
    let pool: Vec<Point2> = anchors
        .iter()
        .flat_map(|&z| {
            (0..n)
                .map(|_| z + PerturbationLaw::UniformDisk.unit_offset(rng) * zeta)
                .collect::<Vec<_>>()
        })
        .collect();

    let total = row_count(n, m, options.combination)
        .ok_or_else(|| Error::invalid(format!("row count overflows for N={n}, M={m}")))?;
    let ranks: Vec<u64> = if total <= budget.max_combinations as u64 {
        (0..total).collect()
    } else {
        let len = usize::try_from(total)
            .map_err(|_| Error::invalid(format!("row count {total} too large to sample")))?;
        let mut picked: Vec<u64> = index::sample(rng, len, budget.max_combinations)
            .into_iter()
            .map(|r| r as u64)
            .collect();
        picked.sort_unstable();
        picked
    };
    let rows: Vec<usize> = ranks
        .iter()
        .flat_map(|&r| unrank_row(r, n, m, options.combination))
        .collect();

    let noise_sd = if options.literal_footnote5 { model.sigma } else { 0.0 };
    let mut predicted = vec![f64::NAN; m * n];
    let mut best: Option<(Point2, f64)> = None;
    let mut trace = Vec::new();
    let (mut evaluated, mut rejected) = (0usize, 0usize);
    for &x in &sources {
        if options.confine_to_area && !in_area(x) {
            rejected += rows.len() / m;
            continue;
        }
        for (slot, &c) in predicted.iter_mut().zip(&pool) {
            let d = x.dist(c);
            *slot = if d < COINCIDENT {
                f64::NAN
            } else {
                model.l0 + 10.0 * model.gamma * (d / model.d0).log10()
            };
        }
        let mut best_here = f64::INFINITY;
        for row in rows.chunks_exact(m) {
            let mut sre = 0.0;
            for (k, &j) in row.iter().enumerate() {
                let noise = if noise_sd > 0.0 {
                    noise_sd * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                let r = predicted[k * n + j] + noise - losses[k];
                sre += r * r;
            }
            if sre.is_nan() {
                rejected += 1;
                continue;
            }
            evaluated += 1;
            best_here = best_here.min(sre);
        }
        if best_here.is_finite() {
            if options.trace {
                trace.push((x, best_here));
            }
            if best.is_none_or(|(_, b)| best_here < b) {
                best = Some((x, best_here));
            }
        }
    }
    let (point, score) = best.unwrap_or((sol.x_star, f64::NAN));
    Ok(Refinement {
        point,
        score,
        evaluated,
        rejected,
        rows: Some(ranks.len()),
        trace,
    })
}
