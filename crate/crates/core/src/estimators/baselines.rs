//! Convex baselines: SDP and SOCP on ranges, SOCP on RSS.

use super::{check_inputs, finite_point, EstimateStatus, EstimatorOutput, Method, SolveStats};
use crate::conic::{solve, ConicProgram, LinExpr, SolverSettings, SolverSolution};
use crate::error::{Error, Result};
use crate::model::Point2;

const X1: usize = 0;
const X2: usize = 1;

fn output(method: Method, sol: &SolverSolution, k_index: usize) -> EstimatorOutput {
    EstimatorOutput {
        method,
        x_hat: finite_point(sol.y[X1], sol.y[X2]),
        objective: sol.y[k_index],
        status: sol.status.into(),
        stats: SolveStats {
            iterations: sol.iterations,
            seconds: sol.solve_seconds,
        },
    }
}

fn rejected(method: Method) -> EstimatorOutput {
    EstimatorOutput {
        method,
        x_hat: None,
        objective: f64::NAN,
        status: EstimateStatus::Rejected,
        stats: SolveStats {
            iterations: 0,
            seconds: 0.0,
        },
    }
}

/// `(x − ẑ)` as two affine rows.
fn offset_rows(z: Point2) -> Vec<LinExpr> {
    vec![
        LinExpr::var(X1).plus_const(-z.x),
        LinExpr::var(X2).plus_const(-z.y),
    ]
}

/// SDP on ranges: minimize `k` with `|tr(X) − 2ẑ_iᵀx + ‖ẑ_i‖² − s_i²| ≤ k` and
/// `[[X, x], [xᵀ, 1]] ⪰ 0`.
///
/// The lifted expression is a squared distance, so it is compared with the
/// squared range.
pub fn estimate_sdp_distance(
    anchors: &[Point2],
    ranges: &[f64],
    settings: &SolverSettings,
) -> Result<EstimatorOutput> {
    check_inputs(anchors, ranges, "ranges")?;
    const XX11: usize = 2;
    const XX21: usize = 3;
    const XX22: usize = 4;
    const K: usize = 5;
    let mut p = ConicProgram::new(6);
    p.set_objective(K, 1.0);
    for (&z, &s) in anchors.iter().zip(ranges) {
        let residual = LinExpr::var(XX11)
            .plus(XX22, 1.0)
            .plus(X1, -2.0 * z.x)
            .plus(X2, -2.0 * z.y)
            .plus_const(z.dot(z) - s * s);
        p.add_nonneg(LinExpr::var(K).plus_expr(&residual.clone().negated()));
        p.add_nonneg(LinExpr::var(K).plus_expr(&residual));
    }
    p.add_psd(3, |r, c| match (r, c) {
        (0, 0) => LinExpr::var(XX11),
        (1, 0) => LinExpr::var(XX21),
        (1, 1) => LinExpr::var(XX22),
        (2, 0) => LinExpr::var(X1),
        (2, 1) => LinExpr::var(X2),
        _ => LinExpr::constant(1.0),
    });
    let sol = solve(&p, settings)?;
    Ok(output(Method::SdpDistance, &sol, K))
}

/// SOCP on RSS: minimize `k` with
/// `‖x − ẑ_i‖ ≤ (kβ_i² − ζ²)/ζ`, `[[k, β_i], [β_i, t_i]] ⪰ 0` and
/// `‖x − ẑ_i‖ ≤ t_i`.
///
/// `ζ = 0` divides by zero in the first family and yields a `Rejected` status.
pub fn estimate_socp_rss(
    anchors: &[Point2],
    betas: &[f64],
    zeta: f64,
    settings: &SolverSettings,
) -> Result<EstimatorOutput> {
    check_inputs(anchors, betas, "betas")?;
    if !(zeta.is_finite() && zeta >= 0.0) {
        return Err(Error::invalid(format!("anchor error bound must be >= 0, got {zeta}")));
    }
    if zeta == 0.0 {
        return Ok(rejected(Method::SocpRss));
    }
    let m = anchors.len();
    const K: usize = 2;
    let t = |i: usize| 3 + i;
    let mut p = ConicProgram::new(3 + m);
    p.set_objective(K, 1.0);
    for (i, (&z, &beta)) in anchors.iter().zip(betas).enumerate() {
        p.add_soc(
            LinExpr::term(K, beta * beta / zeta).plus_const(-zeta),
            offset_rows(z),
        );
        p.add_psd(2, |r, c| match (r, c) {
            (0, 0) => LinExpr::var(K),
            (1, 0) => LinExpr::constant(beta),
            _ => LinExpr::var(t(i)),
        });
        p.add_soc(LinExpr::var(t(i)), offset_rows(z));
    }
    let sol = solve(&p, settings)?;
    Ok(output(Method::SocpRss, &sol, K))
}

/// SOCP on ranges: minimize `k` with `|t_i − s_i| ≤ k`, `t_i ≥ ‖x − ẑ_i‖` and
/// `t_i ≥ 0`.
pub fn estimate_socp_distance(
    anchors: &[Point2],
    ranges: &[f64],
    settings: &SolverSettings,
) -> Result<EstimatorOutput> {
    check_inputs(anchors, ranges, "ranges")?;
    let m = anchors.len();
    const K: usize = 2;
    let t = |i: usize| 3 + i;
    let mut p = ConicProgram::new(3 + m);
    p.set_objective(K, 1.0);
    for (i, (&z, &s)) in anchors.iter().zip(ranges).enumerate() {
        p.add_nonneg(LinExpr::var(K).plus(t(i), -1.0).plus_const(s));
        p.add_nonneg(LinExpr::var(K).plus(t(i), 1.0).plus_const(-s));
        p.add_nonneg(LinExpr::var(t(i)));
        p.add_soc(LinExpr::var(t(i)), offset_rows(z));
    }
    let sol = solve(&p, settings)?;
    Ok(output(Method::SocpDistance, &sol, K))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{estimate_robust_sdp, RelaxationVariant};
    use crate::scenario::place_designed;

    fn exact(src: Point2, anchors: &[Point2]) -> Vec<f64> {
        anchors.iter().map(|a| src.dist(*a)).collect()
    }

    fn settings() -> SolverSettings {
        SolverSettings::default()
    }

    #[test]
    fn sdp_distance_recovers_exact_ranges() {
        let anchors = place_designed(4).unwrap();
        let src = Point2::new(0.3, 0.7);
        let out = estimate_sdp_distance(&anchors, &exact(src, &anchors), &settings()).unwrap();
        assert_eq!(out.status, EstimateStatus::Optimal);
        assert!(out.x_hat.unwrap().dist(src) < 0.02);
        assert!(out.objective.abs() < 1e-6);
    }

    #[test]
    fn socp_distance_recovers_inside_hull() {
        let anchors = place_designed(4).unwrap();
        let src = Point2::new(0.62, 0.41);
        let out = estimate_socp_distance(&anchors, &exact(src, &anchors), &settings()).unwrap();
        assert_eq!(out.status, EstimateStatus::Optimal);
        assert!(out.objective.abs() < 1e-6);
        assert!(out.x_hat.unwrap().dist(src) < 0.05, "{}", out.x_hat.unwrap());
    }

    #[test]
    fn socp_rss_rejects_zero_zeta() {
        let anchors = place_designed(3).unwrap();
        let out = estimate_socp_rss(&anchors, &[0.4, 0.5, 0.6], 0.0, &settings()).unwrap();
        assert_eq!(out.status, EstimateStatus::Rejected);
        assert!(out.x_hat.is_none());
    }

    #[test]
    fn socp_rss_is_looser_than_robust_sdp() {
        let anchors = [Point2::new(0.15, 0.2), Point2::new(0.85, 0.3), Point2::new(0.4, 0.9)];
        let src = Point2::new(0.5, 0.45);
        let betas: Vec<f64> = exact(src, &anchors).iter().map(|b| b * 1.05).collect();
        for zeta in [0.06, 0.1, 0.16] {
            let so = estimate_socp_rss(&anchors, &betas, zeta, &settings()).unwrap();
            let ro = estimate_robust_sdp(&anchors, &betas, zeta, RelaxationVariant::default(), &settings()).unwrap();
            assert_eq!(so.status, EstimateStatus::Optimal);
            assert!(so.objective <= ro.k_star + 1e-6, "{} > {}", so.objective, ro.k_star);
        }
    }

    #[test]
    fn wrong_lengths_are_errors() {
        let anchors = place_designed(3).unwrap();
        assert!(estimate_sdp_distance(&anchors, &[0.1, 0.2], &settings()).is_err());
        assert!(estimate_socp_distance(&anchors[..2], &[0.1, 0.2], &settings()).is_err());
    }
}
