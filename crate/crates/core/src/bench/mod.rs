//! Seeded Monte Carlo sweeps, per-method records and aggregate statistics.
//!
//! A sweep is the Cartesian product of placements, anchor counts, ζ and σ
//! values, each with `trials_per_point` trials. Trials run in parallel, but
//! records come out in canonical order (sweep point, trial, method), so the
//! output depends only on the configuration.

mod io;
mod presets;
mod stats;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use io::{
    export_csv, read_aggregates_csv, read_records_csv, write_aggregates, write_records, AGGREGATE_HEADER,
    RECORD_HEADER,
};
pub use presets::{preset, Preset, PRESETS};
pub use stats::{boxplot_stats, quantile_sorted, rmse, BoxplotStats};

use crate::conic::SolverSettings;
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_ml, estimate_robust_sdp, estimate_sdp_distance, estimate_sdp_rss, estimate_socp_distance,
    estimate_socp_rss, CrossTermSign, EstimateStatus, EstimatorOutput, Method, MlOptions, RelaxationVariant,
    RobustSolution, SolveStats,
};
use crate::model::{PathLossModel, Point2};
use crate::rounding::{
    rank_one_round, refine_anchor_aware, refine_grid, refine_randomization, AnchorCombination, Refinement,
    RoundingBudget, RoundingOptions,
};
use crate::scenario::{
    make_trial, stream_rng, PerturbationLaw, Placement, PlacementKind, Stream, SweepPoint, Trial,
    MAX_DESIGNED_ANCHORS,
};

/// Switches between the repaired defaults and the literal printed variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VariantFlags {
    /// Fresh noise inside the anchor-aware score.
    pub literal_footnote5: bool,
    /// Grid scale from `diag(X*)` instead of the covariance.
    pub literal_sigma_d: bool,
    /// Anchor-aware rows over N^M instead of M-permutations of N.
    pub cartesian_anchors: bool,
    /// `+2xᵀẑ` in the robust bound families.
    pub literal_plus_sign: bool,
    /// Drop `l_i ≥ ‖x − ẑ_i‖` from the robust program.
    pub uncoupled_distances: bool,
    /// Discard rounding candidates outside the unit deployment square.
    pub confine_candidates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub placements: Vec<PlacementKind>,
    pub anchor_counts: Vec<usize>,
    pub zeta_values: Vec<f64>,
    pub sigma_values: Vec<f64>,
    pub range_variance: f64,
    pub methods: Vec<Method>,
    pub trials_per_point: u64,
    pub master_seed: u64,
    pub budget: RoundingBudget,
    /// Channel constants; its σ is replaced by each swept value.
    pub channel: PathLossModel,
    pub perturbation: PerturbationLaw,
    pub ml_restarts: usize,
    pub solver: SolverSettings,
    pub variants: VariantFlags,
}

pub const DEFAULT_TRIALS_PER_POINT: u64 = 500;
pub const DEFAULT_MASTER_SEED: u64 = 20_240_917;
pub const DEFAULT_RANGE_VARIANCE: f64 = 0.15;

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            placements: vec![PlacementKind::Random],
            anchor_counts: vec![3],
            zeta_values: vec![0.1],
            sigma_values: vec![0.0],
            range_variance: DEFAULT_RANGE_VARIANCE,
            methods: Method::STANDARD.to_vec(),
            trials_per_point: DEFAULT_TRIALS_PER_POINT,
            master_seed: DEFAULT_MASTER_SEED,
            budget: RoundingBudget::default(),
            channel: PathLossModel::default(),
            perturbation: PerturbationLaw::UniformDisk,
            ml_restarts: MlOptions::default().restarts,
            solver: SolverSettings::default(),
            variants: VariantFlags::default(),
        }
    }
}

fn check_values(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid(format!("{name} must not be empty")));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::invalid(format!("{name}: {v} is not a finite value >= 0")));
    }
    Ok(())
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.placements.is_empty() {
            return Err(Error::invalid("placements must not be empty"));
        }
        if self.anchor_counts.is_empty() {
            return Err(Error::invalid("M_values must not be empty"));
        }
        for &m in &self.anchor_counts {
            if m < 3 {
                return Err(Error::invalid(format!("M_values: M >= 3 required, got {m}")));
            }
            if self.placements.contains(&PlacementKind::Designed) && m > MAX_DESIGNED_ANCHORS {
                return Err(Error::invalid(format!(
                    "M_values: designed placement supports M <= {MAX_DESIGNED_ANCHORS}, got {m}"
                )));
            }
        }
        check_values("zeta_values", &self.zeta_values)?;
        check_values("sigma_values", &self.sigma_values)?;
        if !(self.range_variance.is_finite() && self.range_variance >= 0.0) {
            return Err(Error::invalid(format!(
                "range_variance must be >= 0, got {}",
                self.range_variance
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("methods must not be empty"));
        }
        if self.trials_per_point == 0 {
            return Err(Error::invalid("trials_per_point must be >= 1"));
        }
        if self.ml_restarts == 0 {
            return Err(Error::invalid("ml_restarts must be >= 1"));
        }
        self.budget.validate()?;
        self.channel.validate()?;
        self.solver.validate()
    }

    /// Methods in canonical order without duplicates.
    pub fn canonical_methods(&self) -> Vec<Method> {
        self.methods.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Sweep points in canonical order: placement, M, ζ, σ.
    pub fn sweep_points(&self) -> Result<Vec<SweepPoint>> {
        self.validate()?;
        let sorted = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let placements: BTreeSet<_> = self.placements.iter().copied().collect();
        let counts: BTreeSet<_> = self.anchor_counts.iter().copied().collect();
        let (zetas, sigmas) = (sorted(&self.zeta_values), sorted(&self.sigma_values));
        let mut points = Vec::new();
        for &kind in &placements {
            for &m in &counts {
                for &zeta in &zetas {
                    for &sigma in &sigmas {
                        points.push(SweepPoint {
                            placement: Placement::new(kind, m)?,
                            zeta,
                            model: self.channel.with_sigma(sigma)?,
                            range_variance: self.range_variance,
                            law: self.perturbation,
                        });
                    }
                }
            }
        }
        Ok(points)
    }

    pub fn estimator_settings(&self) -> EstimatorSettings {
        EstimatorSettings {
            rounding: RoundingOptions {
                budget: self.budget,
                combination: if self.variants.cartesian_anchors {
                    AnchorCombination::Cartesian
                } else {
                    AnchorCombination::Permutation
                },
                literal_sigma_d: self.variants.literal_sigma_d,
                literal_footnote5: self.variants.literal_footnote5,
                confine_to_area: self.variants.confine_candidates,
                trace: false,
            },
            relaxation: RelaxationVariant {
                cross_term: if self.variants.literal_plus_sign {
                    CrossTermSign::Plus
                } else {
                    CrossTermSign::Minus
                },
                couple_distances: !self.variants.uncoupled_distances,
            },
            ml: MlOptions {
                restarts: self.ml_restarts,
                ..MlOptions::default()
            },
            solver: self.solver,
        }
    }
}

/// Everything the estimators need besides the trial itself.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EstimatorSettings {
    pub rounding: RoundingOptions,
    pub relaxation: RelaxationVariant,
    pub ml: MlOptions,
    pub solver: SolverSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub method: Method,
    pub placement: PlacementKind,
    pub m: usize,
    pub zeta: f64,
    pub sigma: f64,
    pub trial: u64,
    pub x_true: f64,
    pub y_true: f64,
    /// `None` when the method produced no point.
    pub estimate: Option<Point2>,
    pub err: Option<f64>,
    pub status: EstimateStatus,
}

/// One method's result with its rounding diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub output: EstimatorOutput,
    pub refinement: Option<Refinement>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    /// The shared robust solve, when any requested method needs it.
    pub robust: Option<RobustSolution>,
    pub results: Vec<MethodResult>,
}

fn failed(method: Method) -> EstimatorOutput {
    EstimatorOutput {
        method,
        x_hat: None,
        objective: f64::NAN,
        status: EstimateStatus::NumericalFailure,
        stats: SolveStats {
            iterations: 0,
            seconds: 0.0,
        },
    }
}

/// Effective anchor-candidate count: permutation rows need `N ≥ M`.
fn budget_for(options: &RoundingOptions, m: usize) -> RoundingOptions {
    let mut o = *options;
    if o.combination == AnchorCombination::Permutation {
        o.budget.anchor_candidates = o.budget.anchor_candidates.max(m);
    }
    o
}

fn round(
    method: Method,
    sol: &RobustSolution,
    trial: &Trial,
    settings: &EstimatorSettings,
) -> Result<MethodResult> {
    let anchors = &trial.reported_anchors;
    let betas = &trial.rss.betas;
    let zeta = trial.zeta;
    let mut rng = stream_rng(trial.seed, Stream::Method(method.stream_tag()));
    let options = budget_for(&settings.rounding, anchors.len());
    let refinement = match method {
        Method::Ro => None,
        Method::RoundRandom => Some(refine_randomization(sol, anchors, betas, zeta, &options, &mut rng)?),
        Method::RoundGrid => Some(refine_grid(sol, anchors, betas, zeta, &options)?),
        Method::RoundAnchorAware => Some(refine_anchor_aware(
            sol,
            anchors,
            &trial.rss.losses,
            trial.model(),
            zeta,
            &options,
            &mut rng,
        )?),
        Method::RoundRankOne => {
            let p = rank_one_round(sol)?;
            Some(Refinement {
                point: p,
                score: f64::NAN,
                evaluated: 1,
                ..Default::default()
            })
        }
        _ => unreachable!("not a rounding method"),
    };
    let mut output = sol.to_output(method);
    if let Some(r) = &refinement {
        output.x_hat = r.point.is_finite().then_some(r.point);
        output.objective = r.score;
    }
    Ok(MethodResult { output, refinement })
}

/// Runs every requested method on one trial. Rounding methods share one
/// robust solve; when that solve is not optimal they report its `x*` and
/// status without rounding.
pub fn run_trial_detailed(trial: &Trial, methods: &[Method], settings: &EstimatorSettings) -> TrialOutcome {
    let anchors = &trial.reported_anchors;
    let betas = &trial.rss.betas;
    let ranges = &trial.ranges.s;
    let robust = methods
        .iter()
        .any(|m| m.uses_robust_sdp())
        .then(|| estimate_robust_sdp(anchors, betas, trial.zeta, settings.relaxation, &settings.solver).ok())
        .flatten();
    let results = methods
        .iter()
        .map(|&method| {
            let result = if method.uses_robust_sdp() {
                match &robust {
                    Some(sol) if sol.is_optimal() => round(method, sol, trial, settings),
                    Some(sol) => Ok(MethodResult {
                        output: sol.to_output(method),
                        refinement: None,
                    }),
                    None => Ok(MethodResult {
                        output: failed(method),
                        refinement: None,
                    }),
                }
            } else {
                let output = match method {
                    Method::SdpRss => estimate_sdp_rss(anchors, betas, &settings.solver),
                    Method::Ml => {
                        let mut rng = stream_rng(trial.seed, Stream::Method(method.stream_tag()));
                        estimate_ml(anchors, betas, &settings.ml, &mut rng)
                    }
                    Method::SdpDistance => estimate_sdp_distance(anchors, ranges, &settings.solver),
                    Method::SocpRss => estimate_socp_rss(anchors, betas, trial.zeta, &settings.solver),
                    Method::SocpDistance => estimate_socp_distance(anchors, ranges, &settings.solver),
                    _ => unreachable!("rounding methods handled above"),
                };
                output.map(|output| MethodResult {
                    output,
                    refinement: None,
                })
            };
            result.unwrap_or_else(|_| MethodResult {
                output: failed(method),
                refinement: None,
            })
        })
        .collect();
    TrialOutcome { robust, results }
}

pub fn record_for(trial: &Trial, output: &EstimatorOutput) -> TrialRecord {
    let estimate = output.x_hat.filter(|p| p.is_finite());
    TrialRecord {
        method: output.method,
        placement: trial.point.placement.kind,
        m: trial.anchor_count(),
        zeta: trial.zeta,
        sigma: trial.model().sigma,
        trial: trial.trial_index,
        x_true: trial.true_source.x,
        y_true: trial.true_source.y,
        estimate,
        err: estimate.map(|p| p.dist(trial.true_source)),
        status: output.status,
    }
}

/// One record per method, in the order given.
pub fn run_trial(trial: &Trial, methods: &[Method], settings: &EstimatorSettings) -> Vec<TrialRecord> {
    run_trial_detailed(trial, methods, settings)
        .results
        .iter()
        .map(|r| record_for(trial, &r.output))
        .collect()
}

/// Summary of one (method, sweep point) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: Method,
    pub placement: PlacementKind,
    pub m: usize,
    pub zeta: f64,
    pub sigma: f64,
    /// NaN when no record in the group has an estimate.
    pub rmse: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    /// Records with an estimate.
    pub n: usize,
    /// Records whose status is not optimal.
    pub failures: usize,
}

impl Aggregate {
    fn from_group(group: &[&TrialRecord]) -> Aggregate {
        let first = group[0];
        let errors: Vec<f64> = group.iter().filter_map(|r| r.err).collect();
        let failures = group.iter().filter(|r| !r.status.is_ok()).count();
        let (rmse, bx) = match (rmse(errors.iter().map(|&e| Some(e))), boxplot_stats(&errors)) {
            (Ok(r), Ok(b)) => (r, Some(b)),
            _ => (f64::NAN, None),
        };
        let pick = |f: fn(&BoxplotStats) -> f64| bx.as_ref().map_or(f64::NAN, f);
        Aggregate {
            method: first.method,
            placement: first.placement,
            m: first.m,
            zeta: first.zeta,
            sigma: first.sigma,
            rmse,
            median: pick(|b| b.median),
            q1: pick(|b| b.q1),
            q3: pick(|b| b.q3),
            whisker_lo: pick(|b| b.whisker_lo),
            whisker_hi: pick(|b| b.whisker_hi),
            n: errors.len(),
            failures,
        }
    }
}

type GroupKey = (Method, PlacementKind, usize, u64, u64);

fn group_key(r: &TrialRecord) -> GroupKey {
    (r.method, r.placement, r.m, r.zeta.to_bits(), r.sigma.to_bits())
}

/// Aggregates per (method, sweep point), ordered by sweep point then method.
pub fn aggregate(records: &[TrialRecord]) -> Vec<Aggregate> {
    let mut groups: Vec<(GroupKey, Vec<&TrialRecord>)> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for r in records {
        let key = group_key(r);
        let slot = *index.entry(key).or_insert_with(|| {
            groups.push((key, Vec::new()));
            groups.len() - 1
        });
        groups[slot].1.push(r);
    }
    let mut out: Vec<Aggregate> = groups.iter().map(|(_, g)| Aggregate::from_group(g)).collect();
    out.sort_by(|a, b| {
        (a.placement, a.m)
            .cmp(&(b.placement, b.m))
            .then(a.zeta.total_cmp(&b.zeta))
            .then(a.sigma.total_cmp(&b.sigma))
            .then(a.method.cmp(&b.method))
    });
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub trials_per_point: u64,
    pub master_seed: u64,
    pub records: Vec<TrialRecord>,
    pub aggregates: Vec<Aggregate>,
}

impl SweepReport {
    pub fn from_records(trials_per_point: u64, master_seed: u64, records: Vec<TrialRecord>) -> Self {
        let aggregates = aggregate(&records);
        Self {
            trials_per_point,
            master_seed,
            records,
            aggregates,
        }
    }

    /// Records of one (method, placement, M, ζ, σ) group.
    pub fn group(&self, method: Method, placement: PlacementKind, m: usize, zeta: f64, sigma: f64) -> Vec<&TrialRecord> {
        self.records
            .iter()
            .filter(|r| group_key(r) == (method, placement, m, zeta.to_bits(), sigma.to_bits()))
            .collect()
    }

    pub fn aggregate_for(
        &self,
        method: Method,
        placement: PlacementKind,
        m: usize,
        zeta: f64,
        sigma: f64,
    ) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| {
            a.method == method && a.placement == placement && a.m == m && a.zeta == zeta && a.sigma == sigma
        })
    }
}

/// Runs a sweep on the current rayon pool.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport> {
    let points = config.sweep_points()?;
    let methods = config.canonical_methods();
    let settings = config.estimator_settings();
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| (0..config.trials_per_point).map(move |t| (p, t)))
        .collect();
    // Indexed collect keeps job order whatever the schedule.
    let per_trial: Vec<Vec<TrialRecord>> = jobs
        .par_iter()
        .map(|&(p, t)| {
            let trial = make_trial(&points[p], config.master_seed, t)?;
            Ok(run_trial(&trial, &methods, &settings))
        })
        .collect::<Result<_>>()?;
    let records = per_trial.into_iter().flatten().collect();
    Ok(SweepReport::from_records(config.trials_per_point, config.master_seed, records))
}

/// [`run_sweep`] on a dedicated pool of `threads` workers (0 picks the
/// rayon default).
pub fn run_sweep_with_threads(config: &SweepConfig, threads: usize) -> Result<SweepReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot build a pool of {threads} threads: {e}")))?;
    pool.install(|| run_sweep(config))
}
