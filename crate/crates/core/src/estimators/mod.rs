//! Source-position estimators.
//!
//! The robust min-max SDP ([`estimate_robust_sdp`]) is the centerpiece; the
//! remaining functions are the comparison baselines: ML on RSS, non-robust
//! SDP on RSS, SDP and SOCP on ranges, and SOCP on RSS.

mod baselines;
mod ml;
mod robust;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use baselines::{estimate_sdp_distance, estimate_socp_distance, estimate_socp_rss};
pub use ml::{estimate_ml, ml_objective, MlOptions};
pub use robust::{
    audit_robust_solution, estimate_robust_sdp, estimate_sdp_rss, CrossTermSign, RelaxationVariant,
    RobustAudit, RobustSolution,
};

use crate::conic::SolveStatus;
use crate::error::{Error, Result};
use crate::model::Point2;

/// Estimation methods, labelled as in the benchmark reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Robust SDP without rounding.
    Ro,
    /// Robust SDP + anchor-aware rounding.
    RoundAnchorAware,
    /// Robust SDP + variable-step grid rounding.
    RoundGrid,
    /// Robust SDP + randomized rounding.
    RoundRandom,
    /// Non-robust SDP on RSS.
    SdpRss,
    /// Maximum likelihood on RSS.
    Ml,
    /// SDP on ranges.
    SdpDistance,
    /// SOCP on RSS.
    SocpRss,
    /// SOCP on ranges.
    SocpDistance,
    /// Robust SDP + rank-one extraction.
    RoundRankOne,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Ro,
        Method::RoundAnchorAware,
        Method::RoundGrid,
        Method::RoundRandom,
        Method::SdpRss,
        Method::Ml,
        Method::SdpDistance,
        Method::SocpRss,
        Method::SocpDistance,
        Method::RoundRankOne,
    ];

    /// Methods compared in the standard figure presets.
    pub const STANDARD: [Method; 9] = [
        Method::Ro,
        Method::RoundAnchorAware,
        Method::RoundGrid,
        Method::RoundRandom,
        Method::SdpRss,
        Method::Ml,
        Method::SdpDistance,
        Method::SocpRss,
        Method::SocpDistance,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Ro => "ro",
            Method::RoundAnchorAware => "r-r",
            Method::RoundGrid => "r-g",
            Method::RoundRandom => "r-p",
            Method::SdpRss => "rss",
            Method::Ml => "ml",
            Method::SdpDistance => "p-d",
            Method::SocpRss => "so",
            Method::SocpDistance => "so-d",
            Method::RoundRankOne => "r-1",
        }
    }

    /// Whether the method post-processes the shared robust SDP solve.
    pub fn uses_robust_sdp(self) -> bool {
        matches!(
            self,
            Method::Ro
                | Method::RoundAnchorAware
                | Method::RoundGrid
                | Method::RoundRandom
                | Method::RoundRankOne
        )
    }

    /// Whether the method consumes RSS (as opposed to range) measurements.
    pub fn uses_rss(self) -> bool {
        !matches!(self, Method::SdpDistance | Method::SocpDistance)
    }

    /// Stable tag used to derive the method's random stream.
    pub fn stream_tag(self) -> u64 {
        self as u64 + 1
    }

    pub fn valid_labels() -> String {
        Method::ALL.iter().map(|m| m.label()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown method '{s}' (valid: {})",
                    Method::valid_labels()
                ))
            })
    }
}

/// Outcome of one estimator run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimateStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
    /// Local optimizer did not report convergence from any start.
    Degraded,
    /// Inputs outside the estimator's domain (e.g. `ζ = 0` for SOCP on RSS).
    Rejected,
}

impl EstimateStatus {
    pub fn label(self) -> &'static str {
        match self {
            EstimateStatus::Optimal => "optimal",
            EstimateStatus::Infeasible => "infeasible",
            EstimateStatus::Unbounded => "unbounded",
            EstimateStatus::NumericalFailure => "numerical_failure",
            EstimateStatus::Degraded => "degraded",
            EstimateStatus::Rejected => "rejected",
        }
    }

    pub fn is_ok(self) -> bool {
        self == EstimateStatus::Optimal
    }
}

impl From<SolveStatus> for EstimateStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Optimal => EstimateStatus::Optimal,
            SolveStatus::Infeasible => EstimateStatus::Infeasible,
            SolveStatus::Unbounded => EstimateStatus::Unbounded,
            SolveStatus::NumericalFailure => EstimateStatus::NumericalFailure,
        }
    }
}

impl fmt::Display for EstimateStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EstimateStatus {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            EstimateStatus::Optimal,
            EstimateStatus::Infeasible,
            EstimateStatus::Unbounded,
            EstimateStatus::NumericalFailure,
            EstimateStatus::Degraded,
            EstimateStatus::Rejected,
        ]
        .into_iter()
        .find(|st| st.label() == s.trim())
        .ok_or_else(|| Error::invalid(format!("unknown status '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: u32,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOutput {
    pub method: Method,
    /// `None` when the solver produced no usable point.
    pub x_hat: Option<Point2>,
    pub objective: f64,
    pub status: EstimateStatus,
    pub stats: SolveStats,
}

pub(crate) fn check_inputs(anchors: &[Point2], values: &[f64], what: &str) -> Result<()> {
    if anchors.len() < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 anchors, got {}",
            anchors.len()
        )));
    }
    if values.len() != anchors.len() {
        return Err(Error::invalid(format!(
            "{} {what} for {} anchors",
            values.len(),
            anchors.len()
        )));
    }
    if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::invalid(format!("{what} must be finite and positive")));
    }
    if anchors.iter().any(|a| !a.is_finite()) {
        return Err(Error::invalid("anchor coordinates must be finite"));
    }
    Ok(())
}

pub(crate) fn finite_point(x: f64, y: f64) -> Option<Point2> {
    let p = Point2::new(x, y);
    p.is_finite().then_some(p)
}
