//! Robust min-max SDP relaxation for RSS localization with bounded anchor error.
//!
//! Variables: the source `x`, its lifted second moment `X ⪰ xxᵀ`, the bound
//! `k`, per-anchor distances `l` and their lift `L ⪰ llᵀ`. With
//! `D_i = tr(X) − 2xᵀẑ_i + ‖ẑ_i‖²` (a relaxed squared distance) the program is
//!
//! ```text
//! minimize k
//!   D_i + 2ζ l_i + ζ² ≤ k β_i²
//!   [[D_i − 2ζ l_i + ζ², β_i], [β_i, k]] ⪰ 0
//!   L_ii = D_i,  L_ij ≥ 0
//!   [[X, x], [xᵀ, 1]] ⪰ 0,  [[L, l], [lᵀ, 1]] ⪰ 0,  k ≥ 0
//! ```
//!
//! The first two families bound the worst-case ratios `(d_i + ζ)²/β_i²` and
//! `β_i²/(d_i − ζ)²` from above by `k`.

use nalgebra::{DMatrix, Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

use super::{check_inputs, finite_point, EstimateStatus, EstimatorOutput, Method, SolveStats};
use crate::conic::spectral::min_eigenvalue;
use crate::conic::{packed_index, packed_len, solve, ConicProgram, LinExpr, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::model::Point2;

/// Sign of the `2xᵀẑ_i` cross term in the two bound families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CrossTermSign {
    /// `−2xᵀẑ_i`, the expansion of `‖x − ẑ_i‖²`.
    #[default]
    Minus,
    /// `+2xᵀẑ_i` as typeset in the printed program; kept for comparison only.
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelaxationVariant {
    pub cross_term: CrossTermSign,
    /// Add `l_i ≥ ‖x − ẑ_i‖` (a second-order cone per anchor). Without it the
    /// lifted distances are only tied to `x` through `L ⪰ llᵀ`, which leaves
    /// their sign free.
    pub couple_distances: bool,
}

impl Default for RelaxationVariant {
    fn default() -> Self {
        Self {
            cross_term: CrossTermSign::Minus,
            couple_distances: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustSolution {
    pub x_star: Point2,
    /// Lifted second moment `X*`.
    pub x_matrix: Matrix2<f64>,
    pub l_star: Vec<f64>,
    /// Lifted distance matrix `L*`.
    pub l_matrix: DMatrix<f64>,
    pub k_star: f64,
    pub status: SolveStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub stats: SolveStats,
    pub zeta: f64,
    pub variant: RelaxationVariant,
}

impl RobustSolution {
    /// `X* − x*x*ᵀ`, the spread used by the randomized roundings.
    pub fn covariance(&self) -> Matrix2<f64> {
        let x = nalgebra::Vector2::new(self.x_star.x, self.x_star.y);
        self.x_matrix - x * x.transpose()
    }

    pub fn is_optimal(&self) -> bool {
        self.status.is_optimal()
    }

    pub fn to_output(&self, method: Method) -> EstimatorOutput {
        EstimatorOutput {
            method,
            x_hat: self.x_star.is_finite().then_some(self.x_star),
            objective: self.k_star,
            status: self.status.into(),
            stats: self.stats,
        }
    }
}

/// Variable layout of the robust program.
struct Layout {
    m: usize,
}

impl Layout {
    const X1: usize = 0;
    const X2: usize = 1;
    const XX11: usize = 2;
    const XX21: usize = 3;
    const XX22: usize = 4;
    const K: usize = 5;

    fn l(&self, i: usize) -> usize {
        6 + i
    }

    fn big_l(&self, i: usize, j: usize) -> usize {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        6 + self.m + packed_index(r, c)
    }

    fn num_vars(&self) -> usize {
        6 + self.m + packed_len(self.m)
    }
}

/// `tr(X) + s·2xᵀẑ + ‖ẑ‖²` with `s = ±1`.
fn lifted_sq_distance(z: Point2, sign: f64) -> LinExpr {
    LinExpr::var(Layout::XX11)
        .plus(Layout::XX22, 1.0)
        .plus(Layout::X1, 2.0 * sign * z.x)
        .plus(Layout::X2, 2.0 * sign * z.y)
        .plus_const(z.dot(z))
}

fn build_program(anchors: &[Point2], betas: &[f64], zeta: f64, variant: RelaxationVariant) -> (ConicProgram, Layout) {
    let m = anchors.len();
    let layout = Layout { m };
    let mut p = ConicProgram::new(layout.num_vars());
    p.set_objective(Layout::K, 1.0);

    let bound_sign = match variant.cross_term {
        CrossTermSign::Minus => -1.0,
        CrossTermSign::Plus => 1.0,
    };
    for (i, (&z, &beta)) in anchors.iter().zip(betas).enumerate() {
        let d_bound = lifted_sq_distance(z, bound_sign);
        // k β² − (D + 2ζ l + ζ²) ≥ 0
        let upper = d_bound
            .clone()
            .plus(layout.l(i), 2.0 * zeta)
            .plus_const(zeta * zeta)
            .negated()
            .plus(Layout::K, beta * beta);
        p.add_nonneg(upper);
        // [[D − 2ζ l + ζ², β], [β, k]] ⪰ 0
        let lower = d_bound.plus(layout.l(i), -2.0 * zeta).plus_const(zeta * zeta);
        p.add_psd(2, |r, c| match (r, c) {
            (0, 0) => lower.clone(),
            (1, 0) => LinExpr::constant(beta),
            _ => LinExpr::var(Layout::K),
        });
        // L_ii = ‖x − ẑ_i‖² (lifted)
        p.add_zero(
            LinExpr::var(layout.big_l(i, i)).plus_expr(&lifted_sq_distance(z, -1.0).negated()),
        );
        if variant.couple_distances {
            p.add_soc(
                LinExpr::var(layout.l(i)),
                vec![
                    LinExpr::var(Layout::X1).plus_const(-z.x),
                    LinExpr::var(Layout::X2).plus_const(-z.y),
                ],
            );
        }
    }
    let off_diagonal: Vec<LinExpr> = (0..m)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|(i, j)| LinExpr::var(layout.big_l(i, j)))
        .collect();
    if !off_diagonal.is_empty() {
        p.add_block(crate::conic::Cone::Nonnegative, off_diagonal);
    }
    // [[X, x], [xᵀ, 1]] ⪰ 0
    p.add_psd(3, |r, c| match (r, c) {
        (0, 0) => LinExpr::var(Layout::XX11),
        (1, 0) => LinExpr::var(Layout::XX21),
        (1, 1) => LinExpr::var(Layout::XX22),
        (2, 0) => LinExpr::var(Layout::X1),
        (2, 1) => LinExpr::var(Layout::X2),
        _ => LinExpr::constant(1.0),
    });
    // [[L, l], [lᵀ, 1]] ⪰ 0
    p.add_psd(m + 1, |r, c| {
        if r < m {
            LinExpr::var(layout.big_l(r, c))
        } else if c < m {
            LinExpr::var(layout.l(c))
        } else {
            LinExpr::constant(1.0)
        }
    });
    p.add_nonneg(LinExpr::var(Layout::K));
    (p, layout)
}

/// The robust program as a [`ConicProgram`], e.g. for dumping.
pub fn robust_program(
    anchors: &[Point2],
    betas: &[f64],
    zeta: f64,
    variant: RelaxationVariant,
) -> Result<ConicProgram> {
    check_inputs(anchors, betas, "betas")?;
    if !(zeta.is_finite() && zeta >= 0.0) {
        return Err(Error::invalid(format!("anchor error bound must be >= 0, got {zeta}")));
    }
    Ok(build_program(anchors, betas, zeta, variant).0)
}

/// Solves the robust relaxation for reported anchors `ẑ`, ranges `β` derived
/// from RSS and error bound `ζ`.
pub fn estimate_robust_sdp(
    anchors: &[Point2],
    betas: &[f64],
    zeta: f64,
    variant: RelaxationVariant,
    settings: &SolverSettings,
) -> Result<RobustSolution> {
    let program = robust_program(anchors, betas, zeta, variant)?;
    let layout = Layout { m: anchors.len() };
    let sol = solve(&program, settings)?;
    let y = &sol.y;
    let m = anchors.len();
    let x_matrix = Matrix2::new(
        y[Layout::XX11],
        y[Layout::XX21],
        y[Layout::XX21],
        y[Layout::XX22],
    );
    let l_star = (0..m).map(|i| y[layout.l(i)]).collect();
    let l_matrix = DMatrix::from_fn(m, m, |i, j| y[layout.big_l(i, j)]);
    Ok(RobustSolution {
        x_star: Point2::new(y[Layout::X1], y[Layout::X2]),
        x_matrix,
        l_star,
        l_matrix,
        k_star: y[Layout::K],
        status: sol.status,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        duality_gap: sol.duality_gap,
        stats: SolveStats {
            iterations: sol.iterations,
            seconds: sol.solve_seconds,
        },
        zeta,
        variant,
    })
}

/// Non-robust SDP on RSS: the robust program with `ζ = 0`.
pub fn estimate_sdp_rss(anchors: &[Point2], betas: &[f64], settings: &SolverSettings) -> Result<EstimatorOutput> {
    let sol = estimate_robust_sdp(anchors, betas, 0.0, RelaxationVariant::default(), settings)?;
    let mut out = sol.to_output(Method::SdpRss);
    out.x_hat = out.x_hat.and_then(|p| finite_point(p.x, p.y));
    if out.status != EstimateStatus::Optimal && out.x_hat.is_none() {
        out.objective = f64::NAN;
    }
    Ok(out)
}

/// Constraint re-check of a robust solution, computed directly from the
/// returned matrices rather than through the program builder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustAudit {
    /// Worst violation of the scalar constraints (bounds, `L_ii`, `L_ij ≥ 0`, `k ≥ 0`, coupling).
    pub max_scalar_violation: f64,
    /// Smallest eigenvalue over the per-anchor 2×2 blocks.
    pub min_anchor_lmi_eig: f64,
    /// Smallest eigenvalue of `[[X, x], [xᵀ, 1]]`.
    pub schur_x_min_eig: f64,
    /// Smallest eigenvalue of `[[L, l], [lᵀ, 1]]`.
    pub schur_l_min_eig: f64,
}

impl RobustAudit {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_scalar_violation <= tol
            && self.min_anchor_lmi_eig >= -tol
            && self.schur_x_min_eig >= -tol
            && self.schur_l_min_eig >= -tol
    }
}

pub fn audit_robust_solution(sol: &RobustSolution, anchors: &[Point2], betas: &[f64]) -> RobustAudit {
    let x = sol.x_star;
    let xm = sol.x_matrix;
    let zeta = sol.zeta;
    let k = sol.k_star;
    let trace = xm[(0, 0)] + xm[(1, 1)];
    let sign = match sol.variant.cross_term {
        CrossTermSign::Minus => -1.0,
        CrossTermSign::Plus => 1.0,
    };
    let mut worst: f64 = (-k).max(0.0);
    let mut min_lmi = f64::INFINITY;
    for (i, (&z, &beta)) in anchors.iter().zip(betas).enumerate() {
        let l = sol.l_star[i];
        let d_bound = trace + sign * 2.0 * x.dot(z) + z.dot(z);
        let d_true = trace - 2.0 * x.dot(z) + z.dot(z);
        worst = worst.max(d_bound + 2.0 * zeta * l + zeta * zeta - k * beta * beta);
        let a = d_bound - 2.0 * zeta * l + zeta * zeta;
        let block = DMatrix::from_row_slice(2, 2, &[a, beta, beta, k]);
        min_lmi = min_lmi.min(min_eigenvalue(&block));
        worst = worst.max((sol.l_matrix[(i, i)] - d_true).abs());
        for j in 0..anchors.len() {
            worst = worst.max(-sol.l_matrix[(i, j)]);
        }
        if sol.variant.couple_distances {
            worst = worst.max(x.dist(z) - l);
        }
    }
    let schur_x = Matrix3::new(
        xm[(0, 0)], xm[(0, 1)], x.x,
        xm[(1, 0)], xm[(1, 1)], x.y,
        x.x, x.y, 1.0,
    );
    let m = anchors.len();
    let schur_l = DMatrix::from_fn(m + 1, m + 1, |r, c| match (r < m, c < m) {
        (true, true) => sol.l_matrix[(r, c)],
        (true, false) => sol.l_star[r],
        (false, true) => sol.l_star[c],
        (false, false) => 1.0,
    });
    RobustAudit {
        max_scalar_violation: worst.max(0.0),
        min_anchor_lmi_eig: min_lmi,
        schur_x_min_eig: min_eigenvalue(&DMatrix::from_iterator(3, 3, schur_x.iter().copied())),
        schur_l_min_eig: min_eigenvalue(&schur_l),
    }
}
