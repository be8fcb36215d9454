use approx::assert_relative_eq;
use nalgebra::{DMatrix, Matrix2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::conic::{SolveStatus, SolverSettings};
use crate::estimators::{estimate_robust_sdp, RelaxationVariant, SolveStats};
use crate::model::PathLossModel;

fn synthetic(x_star: Point2, cov: Matrix2<f64>) -> RobustSolution {
    let x = nalgebra::Vector2::new(x_star.x, x_star.y);
    RobustSolution {
        x_star,
        x_matrix: cov + x * x.transpose(),
        l_star: vec![],
        l_matrix: DMatrix::zeros(0, 0),
        k_star: 1.0,
        status: SolveStatus::Optimal,
        primal_residual: 0.0,
        dual_residual: 0.0,
        duality_gap: 0.0,
        stats: SolveStats { iterations: 0, seconds: 0.0 },
        zeta: 0.0,
        variant: RelaxationVariant::default(),
    }
}

fn triangle() -> Vec<Point2> {
    vec![Point2::new(0.1, 0.15), Point2::new(0.9, 0.25), Point2::new(0.4, 0.9)]
}

fn traced() -> RoundingOptions {
    RoundingOptions { trace: true, ..Default::default() }
}

#[test]
fn compute_k_is_one_at_truth() {
    let a = triangle();
    let src = Point2::new(0.45, 0.42);
    let betas: Vec<f64> = a.iter().map(|z| src.dist(*z)).collect();
    assert_relative_eq!(compute_k(src, &a, &betas, 0.0).unwrap(), 1.0, epsilon = 1e-12);
}

#[test]
fn compute_k_single_anchor_example() {
    let k = compute_k(Point2::new(0.5, 0.0), &[Point2::new(0.0, 0.0)], &[0.5], 0.1).unwrap();
    assert_relative_eq!(k, 1.5625, epsilon = 1e-12);
}

#[test]
fn compute_k_rejects_candidates_inside_the_error_disk() {
    let err = compute_k(Point2::new(0.05, 0.0), &[Point2::new(0.0, 0.0)], &[0.5], 0.1).unwrap_err();
    assert!(matches!(err, Error::Rejected(_)));
    assert!(compute_k(Point2::new(0.1, 0.0), &[Point2::new(0.0, 0.0)], &[0.5], 0.1).is_err());
}

proptest! {
    #[test]
    fn compute_k_at_least_one(
        x in (0.0f64..1.0, 0.0f64..1.0),
        b in prop::collection::vec(0.01f64..2.0, 3),
        zeta in 0.0f64..0.05,
    ) {
        let a = triangle();
        if let Ok(k) = compute_k(Point2::new(x.0, x.1), &a, &b, zeta) {
            prop_assert!(k >= 1.0 - 1e-12);
        }
    }
}

#[test]
fn randomization_with_zero_spread_returns_x_star() {
    let a = triangle();
    let sol = synthetic(Point2::new(0.4, 0.5), Matrix2::zeros());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let r = refine_randomization(&sol, &a, &[0.4, 0.5, 0.4], 0.05, &traced(), &mut rng).unwrap();
    assert_eq!(r.point, sol.x_star);
    assert!(r.trace.iter().all(|(p, _)| *p == sol.x_star));
}

#[test]
fn randomization_returns_argmin_of_its_candidates() {
    let a = triangle();
    let sol = synthetic(Point2::new(0.4, 0.5), Matrix2::new(0.01, 0.002, 0.002, 0.02));
    let betas = [0.4, 0.5, 0.4];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let r = refine_randomization(&sol, &a, &betas, 0.05, &traced(), &mut rng).unwrap();
    assert_eq!(r.trace.len() + r.rejected, 100);
    for (p, k) in &r.trace {
        assert_eq!(*k, compute_k(*p, &a, &betas, 0.05).unwrap());
        assert!(r.score <= *k);
    }
    assert_eq!(r.score, compute_k(r.point, &a, &betas, 0.05).unwrap());
}

#[test]
fn more_randomization_candidates_do_not_hurt() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut few, mut many) = (Vec::new(), Vec::new());
    for _ in 0..200 {
        let a = triangle();
        let src = Point2::new(rng.random_range(0.2..0.8), rng.random_range(0.2..0.8));
        let betas: Vec<f64> = a.iter().map(|z| src.dist(*z) * rng.random_range(0.9..1.1)).collect();
        let sol = synthetic(src + Point2::new(0.03, -0.02), Matrix2::new(0.004, 0.0, 0.0, 0.004));
        for (tt, out) in [(10, &mut few), (1000, &mut many)] {
            let opts = RoundingOptions {
                budget: RoundingBudget { tt, ..Default::default() },
                ..Default::default()
            };
            let r = refine_randomization(&sol, &a, &betas, 0.05, &opts, &mut rng).unwrap();
            out.push(r.score);
        }
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    assert!(median(&mut many) <= median(&mut few));
}

#[test]
fn grid_with_zero_spread_returns_x_star() {
    let sol = synthetic(Point2::new(0.4, 0.5), Matrix2::zeros());
    let r = refine_grid(&sol, &triangle(), &[0.4, 0.5, 0.4], 0.05, &traced()).unwrap();
    assert_eq!(r.point, sol.x_star);
    assert_eq!(r.trace.len(), 1);
}

#[test]
fn grid_stays_within_three_sigma_and_beats_x_star() {
    let a = triangle();
    let betas = [0.45, 0.5, 0.42];
    let sol = synthetic(Point2::new(0.45, 0.45), Matrix2::new(0.0004, 0.0, 0.0, 0.0001));
    let r = refine_grid(&sol, &a, &betas, 0.05, &traced()).unwrap();
    let sigma_d = grid_sigma(&sol, false);
    assert_relative_eq!(sigma_d, 0.02, epsilon = 1e-12);
    let reach = 3.0 * sigma_d + GRID_STEP_FRACTION * sigma_d;
    assert!(r.trace.iter().all(|(p, _)| p.dist(sol.x_star) <= reach + 1e-12));
    assert!(r.score <= compute_k(sol.x_star, &a, &betas, 0.05).unwrap());
    let min = r.trace.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    assert_eq!(r.score, min);
    // First ring after the center has floor(1/1e-4) points.
    assert!(r.trace.len() > 10_000);
}

#[test]
fn literal_grid_scale_uses_raw_second_moment() {
    let sol = synthetic(Point2::new(0.5, 0.2), Matrix2::new(0.0004, 0.0, 0.0, 0.0001));
    assert_relative_eq!(grid_sigma(&sol, true), (0.25f64 + 0.0004).sqrt(), epsilon = 1e-12);
}

#[test]
fn rank_one_of_exact_lift_is_x_star() {
    let x = Point2::new(0.3, -0.6);
    let p = rank_one_round(&synthetic(x, Matrix2::zeros())).unwrap();
    assert!(p.dist(x) < 1e-12);
}

#[test]
fn rank_one_sign_follows_x_star() {
    let mut sol = synthetic(Point2::new(-0.5, 0.0), Matrix2::zeros());
    sol.x_matrix = Matrix2::new(0.25, 0.0, 0.0, 0.0);
    let p = rank_one_round(&sol).unwrap();
    assert!(p.dist(Point2::new(-0.5, 0.0)) < 1e-12);
}

#[test]
fn rank_one_within_bound_of_x_star() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let x = Point2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let a: f64 = rng.random_range(0.0..0.1);
        let b: f64 = rng.random_range(0.0..0.1);
        let c = rng.random_range(-1.0..1.0) * (a * b).sqrt();
        let sol = synthetic(x, Matrix2::new(a, c, c, b));
        let p = rank_one_round(&sol).unwrap();
        let lambda = crate::conic::spectral::eigenvalues2(&sol.x_matrix)[1];
        assert!(p.dist(x) <= (2.0 * lambda).sqrt() + 1e-12);
    }
}

#[test]
fn permutation_rows() {
    assert_eq!(permutation_row_count(4, 3), Some(24));
    assert_eq!(permutation_row_count(5, 5), Some(120));
    assert_eq!(row_count(4, 3, AnchorCombination::Cartesian), Some(64));
    assert_eq!(unrank_row(0, 4, 3, AnchorCombination::Permutation), vec![0, 1, 2]);
    assert_eq!(unrank_row(23, 4, 3, AnchorCombination::Permutation), vec![3, 2, 1]);
    assert_eq!(unrank_row(63, 4, 3, AnchorCombination::Cartesian), vec![3, 3, 3]);
    let rows: Vec<Vec<usize>> = (0..24).map(|r| unrank_row(r, 4, 3, AnchorCombination::Permutation)).collect();
    let mut sorted = rows.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted, rows);
    assert!(rows.iter().all(|r| r[0] != r[1] && r[1] != r[2] && r[0] != r[2]));
}

fn noiseless_case() -> (Vec<Point2>, Vec<f64>, PathLossModel, Point2) {
    let a = triangle();
    let model = PathLossModel::default();
    let src = Point2::new(0.5, 0.45);
    let losses = a.iter().map(|z| model.path_loss(src, *z, 0.0).unwrap()).collect();
    (a, losses, model, src)
}

#[test]
fn anchor_aware_uses_24_rows_and_rejects_small_pools() {
    let (a, losses, model, src) = noiseless_case();
    let sol = synthetic(src, Matrix2::new(0.001, 0.0, 0.0, 0.001));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let r = refine_anchor_aware(&sol, &a, &losses, &model, 0.05, &RoundingOptions::default(), &mut rng).unwrap();
    assert_eq!(r.rows, Some(24));
    assert_eq!(r.evaluated, 100 * 24);
    let small = RoundingOptions {
        budget: RoundingBudget { anchor_candidates: 2, ..Default::default() },
        ..Default::default()
    };
    assert!(refine_anchor_aware(&sol, &a, &losses, &model, 0.05, &small, &mut rng).is_err());
    let cart = RoundingOptions { combination: AnchorCombination::Cartesian, ..small };
    let r = refine_anchor_aware(&sol, &a, &losses, &model, 0.05, &cart, &mut rng).unwrap();
    assert_eq!(r.rows, Some(8));
}

#[test]
fn anchor_aware_caps_rows() {
    let (a, losses, model, src) = noiseless_case();
    let sol = synthetic(src, Matrix2::new(0.001, 0.0, 0.0, 0.001));
    let opts = RoundingOptions {
        budget: RoundingBudget { tt: 3, anchor_candidates: 10, max_combinations: 50 },
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let r = refine_anchor_aware(&sol, &a, &losses, &model, 0.05, &opts, &mut rng).unwrap();
    assert_eq!(r.rows, Some(50));
}

#[test]
fn anchor_aware_with_exact_anchors_picks_best_rss_fit() {
    let (a, losses, model, src) = noiseless_case();
    let sol = synthetic(src + Point2::new(0.02, 0.01), Matrix2::new(0.001, 0.0, 0.0, 0.001));
    let opts = RoundingOptions {
        budget: RoundingBudget { anchor_candidates: 3, ..Default::default() },
        trace: true,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let r = refine_anchor_aware(&sol, &a, &losses, &model, 0.0, &opts, &mut rng).unwrap();
    let sre = |x: Point2| -> f64 {
        a.iter()
            .zip(&losses)
            .map(|(z, l)| (model.path_loss(x, *z, 0.0).unwrap() - l).powi(2))
            .sum()
    };
    for (p, s) in &r.trace {
        assert_relative_eq!(*s, sre(*p), epsilon = 1e-9);
        assert!(r.score <= *s);
    }
}

#[test]
fn anchor_aware_is_deterministic() {
    let (a, losses, model, src) = noiseless_case();
    let sol = synthetic(src, Matrix2::new(0.001, 0.0, 0.0, 0.002));
    let opts = RoundingOptions { literal_footnote5: true, ..Default::default() };
    let model = model.with_sigma(2.0).unwrap();
    let run = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        refine_anchor_aware(&sol, &a, &losses, &model, 0.08, &opts, &mut rng).unwrap()
    };
    assert_eq!(run(4), run(4));
}

#[test]
fn rounding_never_beats_the_relaxation() {
    let a = triangle();
    let src = Point2::new(0.55, 0.4);
    let model = PathLossModel::default();
    let losses: Vec<f64> = a.iter().map(|z| model.path_loss(src, *z, 0.0).unwrap() + 0.5).collect();
    let betas: Vec<f64> = losses.iter().map(|l| model.beta_from_loss(*l)).collect();
    let zeta = 0.08;
    let sol = estimate_robust_sdp(&a, &betas, zeta, RelaxationVariant::default(), &SolverSettings::default()).unwrap();
    assert!(sol.is_optimal());
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let opts = traced();
    let mut scored = refine_randomization(&sol, &a, &betas, zeta, &opts, &mut rng).unwrap().trace;
    scored.extend(refine_grid(&sol, &a, &betas, zeta, &opts).unwrap().trace);
    let aware = refine_anchor_aware(&sol, &a, &losses, &model, zeta, &opts, &mut rng).unwrap();
    for (p, _) in scored.iter().chain(&aware.trace) {
        if let Ok(k) = compute_k(*p, &a, &betas, zeta) {
            assert!(sol.k_star <= k + 1e-6, "{} > {k}", sol.k_star);
        }
    }
}

#[test]
fn confined_rounding_stays_in_the_square() {
    let a = triangle();
    let betas = [0.6, 0.5, 0.7];
    let sol = synthetic(Point2::new(0.9, 0.9), Matrix2::new(0.09, 0.0, 0.0, 0.09));
    let opts = RoundingOptions { confine_to_area: true, trace: true, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let r = refine_randomization(&sol, &a, &betas, 0.05, &opts, &mut rng).unwrap();
    assert!(r.rejected > 0);
    assert!(r.trace.iter().all(|(p, _)| in_area(*p)) && in_area(r.point));
    let g = refine_grid(&sol, &a, &betas, 0.05, &opts).unwrap();
    assert!(g.trace.iter().all(|(p, _)| in_area(*p)));
    let model = PathLossModel::default();
    let losses = [60.0, 58.0, 61.0];
    let aa = refine_anchor_aware(&sol, &a, &losses, &model, 0.05, &opts, &mut rng).unwrap();
    assert!(aa.trace.iter().all(|(p, _)| in_area(*p)) && in_area(aa.point));
}
