//! Interior-point backend for [`ConicProgram`], backed by Clarabel.

use std::fmt;
use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use serde::{Deserialize, Serialize};

use super::program::{Cone, ConicProgram};
use crate::error::{Error, Result};

// Link the system OpenBLAS that backs Clarabel's dense PSD kernels.
extern crate openblas_src;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iterations: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 200,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::invalid(format!(
                "solver tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("solver needs at least one iteration"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl SolveStatus {
    pub fn label(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure => "numerical_failure",
        }
    }

    pub fn is_optimal(self) -> bool {
        self == SolveStatus::Optimal
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSolution {
    pub y: Vec<f64>,
    pub status: SolveStatus,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub iterations: u32,
    pub solve_seconds: f64,
}

fn to_clarabel(program: &ConicProgram) -> (CscMatrix<f64>, Vec<f64>, Vec<SupportedConeT<f64>>) {
    let n = program.num_vars;
    let m = program.num_rows();
    // Clarabel wants `b − A·y ∈ K`; our rows are `coef·y + constant ∈ K`.
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut b = Vec::with_capacity(m);
    let mut cones = Vec::with_capacity(program.blocks.len());
    let mut row = 0;
    for block in &program.blocks {
        for expr in &block.rows {
            for &(j, c) in &expr.terms {
                columns[j].push((row, -c));
            }
            b.push(expr.constant);
            row += 1;
        }
        let len = block.rows.len();
        cones.push(match block.cone {
            Cone::Zero => SupportedConeT::ZeroConeT(len),
            Cone::Nonnegative => SupportedConeT::NonnegativeConeT(len),
            Cone::SecondOrder => SupportedConeT::SecondOrderConeT(len),
            Cone::PsdTriangle(side) => SupportedConeT::PSDTriangleConeT(side),
        });
    }

    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for col in &mut columns {
        col.sort_by_key(|e| e.0);
        let mut last: Option<usize> = None;
        for &(r, v) in col.iter() {
            if last == Some(r) {
                *nzval.last_mut().unwrap() += v;
            } else {
                rowval.push(r);
                nzval.push(v);
                last = Some(r);
            }
        }
        colptr.push(rowval.len());
    }
    (CscMatrix::new(m, n, colptr, rowval, nzval), b, cones)
}

/// Solves `program`. Solver trouble is reported through the status, never
/// as an error; only malformed programs and settings are errors.
pub fn solve(program: &ConicProgram, settings: &SolverSettings) -> Result<SolverSolution> {
    program.validate()?;
    settings.validate()?;

    let start = Instant::now();
    let (a, b, cones) = to_clarabel(program);
    let p = CscMatrix::zeros((program.num_vars, program.num_vars));
    let clarabel_settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(settings.max_iterations)
        .tol_gap_abs(settings.tolerance)
        .tol_gap_rel(settings.tolerance)
        .tol_feas(settings.tolerance)
        .build()
        .map_err(|e| Error::invalid(format!("solver settings: {e}")))?;
    let mut solver = DefaultSolver::new(&p, &program.objective, &a, &b, &cones, clarabel_settings)
        .map_err(|e| Error::invalid(format!("solver setup: {e}")))?;
    solver.solve();

    let info = &solver.info;
    let primal_residual = info.res_primal;
    let dual_residual = info.res_dual;
    let duality_gap = info.gap_abs.min(info.gap_rel);
    let within_tol = |v: f64| v.is_finite() && v <= settings.tolerance;
    let converged = within_tol(primal_residual) && within_tol(dual_residual) && within_tol(duality_gap);
    let y = solver.solution.x.clone();

    let status = match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved if converged => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        _ => SolveStatus::NumericalFailure,
    };
    let status = if status == SolveStatus::Optimal && y.iter().any(|v| !v.is_finite()) {
        SolveStatus::NumericalFailure
    } else {
        status
    };

    Ok(SolverSolution {
        objective: program.objective_value(&y),
        y,
        status,
        primal_residual,
        dual_residual,
        duality_gap,
        iterations: info.iterations,
        solve_seconds: start.elapsed().as_secs_f64(),
    })
}
