//! Solver-agnostic conic programs, the solver adapter, and spectral helpers.

mod program;
mod solve;
pub mod spectral;

pub use program::{
    pack_symmetric, packed_index, packed_len, unpack_symmetric, Cone, ConeBlock, ConicProgram, LinExpr,
    PSD_OFFDIAG_SCALE,
};
pub use solve::{solve, SolveStatus, SolverSettings, SolverSolution};
pub use spectral::{factor_covariance, gaussian_sample, gaussian_sample_factored, psd_check, rank_one_extract};
