//! Estimators checked against brute-force grid minimization of the RSS
//! log-likelihood.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rssloc::conic::SolverSettings;
use rssloc::estimators::{estimate_ml, estimate_robust_sdp, ml_objective, MlOptions, RelaxationVariant};
use rssloc::rounding::{compute_k, refine_grid, RoundingOptions};
use rssloc::scenario::{place_designed, place_random};
use rssloc::Point2;

fn grid_argmin(anchors: &[Point2], betas: &[f64], n: usize) -> (Point2, f64) {
    let cell = 1.0 / n as f64;
    let mut best = (Point2::default(), f64::INFINITY);
    for i in 0..n {
        for j in 0..n {
            let p = Point2::new((i as f64 + 0.5) * cell, (j as f64 + 0.5) * cell);
            let v = ml_objective(p, anchors, betas);
            if v < best.1 {
                best = (p, v);
            }
        }
    }
    best
}

#[test]
fn robust_sdp_matches_grid_oracle_on_exact_data() {
    let anchors = place_designed(4).unwrap();
    let src = Point2::new(0.37, 0.61);
    let betas: Vec<f64> = anchors.iter().map(|a| a.dist(src)).collect();
    let (oracle, _) = grid_argmin(&anchors, &betas, 400);
    let sol = estimate_robust_sdp(&anchors, &betas, 1e-4, RelaxationVariant::default(), &SolverSettings::default())
        .unwrap();
    assert!(sol.is_optimal());
    assert!(sol.x_star.dist(src) <= 0.02, "{}", sol.x_star);
    assert!(sol.x_star.dist(oracle) <= 0.02);
    let g = refine_grid(&sol, &anchors, &betas, 1e-4, &RoundingOptions::default()).unwrap();
    assert!(g.point.dist(src) <= 0.02);
    assert!(compute_k(g.point, &anchors, &betas, 1e-4).unwrap() >= sol.k_star - 1e-6);
}

#[test]
fn ml_is_never_worse_than_the_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10 {
        let anchors = place_random(3, &mut rng).unwrap();
        let src = Point2::new(rng.random::<f64>(), rng.random::<f64>());
        if anchors.iter().any(|a| a.dist(src) < 0.025) {
            continue;
        }
        let betas: Vec<f64> = anchors.iter().map(|a| a.dist(src) * rng.random_range(0.9..1.1)).collect();
        let (oracle, best) = grid_argmin(&anchors, &betas, 200);
        let out = estimate_ml(&anchors, &betas, &MlOptions::default(), &mut rng).unwrap();
        assert!(out.objective <= best + 1e-12, "ml {} grid {best} at {oracle}", out.objective);
    }
}
