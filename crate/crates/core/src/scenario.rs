//! Anchor and source placement, bounded anchor perturbation and trial generation.
//!
//! Every random quantity of a trial is drawn from its own ChaCha stream keyed
//! by the trial seed. The seed itself depends only on the master seed, the
//! trial index and the geometry (placement kind and anchor count), so points
//! of a sweep that differ only in `ζ` or `σ` reuse the same geometry and the
//! same unit noise draws, scaled by the swept parameter.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{measure_distances, DistanceMeasurements, PathLossModel, Point2, RssMeasurements};

/// Margin of the designed anchor square `[0.05, 0.95]²`.
pub const DESIGN_MARGIN: f64 = 0.05;
/// Largest anchor count supported by the designed layout.
pub const MAX_DESIGNED_ANCHORS: usize = 8;

const MAX_SOURCE_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlacementKind {
    Random,
    Designed,
}

impl PlacementKind {
    pub fn label(self) -> &'static str {
        match self {
            PlacementKind::Random => "random",
            PlacementKind::Designed => "designed",
        }
    }

    fn key(self) -> u64 {
        match self {
            PlacementKind::Random => 1,
            PlacementKind::Designed => 2,
        }
    }
}

impl fmt::Display for PlacementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PlacementKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "random" => Ok(PlacementKind::Random),
            "designed" => Ok(PlacementKind::Designed),
            other => Err(Error::invalid(format!(
                "unknown placement '{other}' (expected random or designed)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Placement {
    pub kind: PlacementKind,
    pub anchors: usize,
}

impl Placement {
    pub fn new(kind: PlacementKind, anchors: usize) -> Result<Self> {
        if anchors < 3 {
            return Err(Error::invalid(format!("need at least 3 anchors, got {anchors}")));
        }
        if kind == PlacementKind::Designed && anchors > MAX_DESIGNED_ANCHORS {
            return Err(Error::invalid(format!(
                "designed placement supports 3..={MAX_DESIGNED_ANCHORS} anchors, got {anchors}"
            )));
        }
        Ok(Self { kind, anchors })
    }

    pub fn place<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Point2>> {
        match self.kind {
            PlacementKind::Random => place_random(self.anchors, rng),
            PlacementKind::Designed => place_designed(self.anchors),
        }
    }
}

/// `M` anchors i.i.d. uniform on the unit square.
pub fn place_random<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<Vec<Point2>> {
    if m < 3 {
        return Err(Error::invalid(format!("need at least 3 anchors, got {m}")));
    }
    Ok((0..m)
        .map(|_| Point2::new(rng.random::<f64>(), rng.random::<f64>()))
        .collect())
}

/// `M` anchors evenly spaced (by arc length) on the boundary of
/// `[0.05, 0.95]²`, counter-clockwise from the lower-left corner.
pub fn place_designed(m: usize) -> Result<Vec<Point2>> {
    if !(3..=MAX_DESIGNED_ANCHORS).contains(&m) {
        return Err(Error::invalid(format!(
            "designed placement supports 3..={MAX_DESIGNED_ANCHORS} anchors, got {m}"
        )));
    }
    let lo = DESIGN_MARGIN;
    let side = 1.0 - 2.0 * DESIGN_MARGIN;
    let perimeter = 4.0 * side;
    Ok((0..m)
        .map(|i| {
            let s = perimeter * i as f64 / m as f64;
            let edge = ((s / side).floor() as usize).min(3);
            let t = s - edge as f64 * side;
            match edge {
                0 => Point2::new(lo + t, lo),
                1 => Point2::new(lo + side, lo + t),
                2 => Point2::new(lo + side - t, lo + side),
                _ => Point2::new(lo, lo + side - t),
            }
        })
        .collect())
}

/// Distribution of the anchor offset inside the disk of radius `ζ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PerturbationLaw {
    #[default]
    UniformDisk,
    /// Offsets of norm exactly `ζ` with uniform direction.
    DiskBoundary,
    /// Isotropic Gaussian with per-axis std `ζ/2`, rejected outside the disk.
    TruncatedGaussian,
}

impl PerturbationLaw {
    pub fn label(self) -> &'static str {
        match self {
            PerturbationLaw::UniformDisk => "uniform_disk",
            PerturbationLaw::DiskBoundary => "disk_boundary",
            PerturbationLaw::TruncatedGaussian => "truncated_gaussian",
        }
    }

    /// An offset in the closed unit disk; scale by `ζ` to get `Δ_i`.
    pub(crate) fn unit_offset<R: Rng + ?Sized>(self, rng: &mut R) -> Point2 {
        match self {
            PerturbationLaw::UniformDisk => {
                let r = rng.random::<f64>().sqrt();
                let theta = 2.0 * PI * rng.random::<f64>();
                Point2::new(r * theta.cos(), r * theta.sin())
            }
            PerturbationLaw::DiskBoundary => {
                let theta = 2.0 * PI * rng.random::<f64>();
                Point2::new(theta.cos(), theta.sin())
            }
            PerturbationLaw::TruncatedGaussian => loop {
                let gx: f64 = rng.sample(StandardNormal);
                let gy: f64 = rng.sample(StandardNormal);
                let p = Point2::new(0.5 * gx, 0.5 * gy);
                if p.norm() <= 1.0 {
                    break p;
                }
            },
        }
    }
}

impl FromStr for PerturbationLaw {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform_disk" => Ok(PerturbationLaw::UniformDisk),
            "disk_boundary" => Ok(PerturbationLaw::DiskBoundary),
            "truncated_gaussian" => Ok(PerturbationLaw::TruncatedGaussian),
            other => Err(Error::invalid(format!(
                "unknown perturbation law '{other}' (expected uniform_disk, disk_boundary or truncated_gaussian)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorErrorModel {
    pub zeta: f64,
    pub law: PerturbationLaw,
}

impl AnchorErrorModel {
    pub fn new(zeta: f64, law: PerturbationLaw) -> Result<Self> {
        if !(zeta.is_finite() && zeta >= 0.0) {
            return Err(Error::invalid(format!("anchor error bound must be >= 0, got {zeta}")));
        }
        Ok(Self { zeta, law })
    }

    pub fn uniform(zeta: f64) -> Result<Self> {
        Self::new(zeta, PerturbationLaw::UniformDisk)
    }
}

/// Reported anchor positions `ẑ_i = z_i − Δ_i` with `‖Δ_i‖ ≤ ζ`.
pub fn perturb_anchors<R: Rng + ?Sized>(
    anchors: &[Point2],
    error: &AnchorErrorModel,
    rng: &mut R,
) -> Vec<Point2> {
    anchors
        .iter()
        .map(|&z| {
            let delta = error.law.unit_offset(rng) * error.zeta;
            // Rounding can push a boundary offset an ulp past ζ; the bound is exact.
            let mut shrink = 1.0;
            loop {
                let reported = z - delta * shrink;
                if z.dist(reported) <= error.zeta {
                    break reported;
                }
                shrink *= 1.0 - 4.0 * f64::EPSILON;
            }
        })
        .collect()
}

/// Uniform source on the unit square, redrawn while closer than `min_separation`
/// to any anchor.
pub fn sample_source<R: Rng + ?Sized>(
    anchors: &[Point2],
    min_separation: f64,
    rng: &mut R,
) -> Result<Point2> {
    for _ in 0..MAX_SOURCE_ATTEMPTS {
        let p = Point2::new(rng.random::<f64>(), rng.random::<f64>());
        if anchors.iter().all(|&a| p.dist(a) >= min_separation) {
            return Ok(p);
        }
    }
    Err(Error::invalid(format!(
        "no source position at least {min_separation} away from all anchors"
    )))
}

/// One point of a sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub placement: Placement,
    pub zeta: f64,
    /// Channel constants; `model.sigma` is the swept RSS noise level.
    pub model: PathLossModel,
    pub range_variance: f64,
    pub law: PerturbationLaw,
}

impl SweepPoint {
    pub fn validate(&self) -> Result<()> {
        Placement::new(self.placement.kind, self.placement.anchors)?;
        AnchorErrorModel::new(self.zeta, self.law)?;
        self.model.validate()?;
        if !(self.range_variance.is_finite() && self.range_variance >= 0.0) {
            return Err(Error::invalid(format!(
                "range variance must be >= 0, got {}",
                self.range_variance
            )));
        }
        Ok(())
    }

    /// Key of the geometry-determining part of the point.
    pub fn geometry_key(&self) -> u64 {
        (self.placement.kind.key() << 32) | self.placement.anchors as u64
    }
}

/// Independent random streams within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Anchors,
    Source,
    Perturbation,
    Rss,
    Ranges,
    /// Per-estimator stream, keyed by a method tag.
    Method(u64),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Anchors => 1,
            Stream::Source => 2,
            Stream::Perturbation => 3,
            Stream::Rss => 4,
            Stream::Ranges => 5,
            Stream::Method(tag) => 0x100 + tag,
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_trial_seed(master_seed: u64, trial_index: u64, geometry_key: u64) -> u64 {
    mix64(master_seed ^ mix64(trial_index) ^ mix64(geometry_key.rotate_left(17)))
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub point: SweepPoint,
    pub true_source: Point2,
    pub true_anchors: Vec<Point2>,
    pub reported_anchors: Vec<Point2>,
    pub zeta: f64,
    /// Generated from the true anchors.
    pub rss: RssMeasurements,
    pub ranges: DistanceMeasurements,
    pub trial_index: u64,
    pub seed: u64,
}

impl Trial {
    pub fn model(&self) -> &PathLossModel {
        &self.point.model
    }

    pub fn anchor_count(&self) -> usize {
        self.true_anchors.len()
    }
}

/// Builds trial `trial_index` of a sweep point; a pure function of its inputs.
pub fn make_trial(point: &SweepPoint, master_seed: u64, trial_index: u64) -> Result<Trial> {
    point.validate()?;
    let seed = derive_trial_seed(master_seed, trial_index, point.geometry_key());

    let true_anchors = point.placement.place(&mut stream_rng(seed, Stream::Anchors))?;
    let true_source = sample_source(&true_anchors, point.model.d0, &mut stream_rng(seed, Stream::Source))?;
    let error = AnchorErrorModel::new(point.zeta, point.law)?;
    let reported_anchors = perturb_anchors(&true_anchors, &error, &mut stream_rng(seed, Stream::Perturbation));
    let rss = point
        .model
        .measure_rss(true_source, &true_anchors, &mut stream_rng(seed, Stream::Rss))?;
    let ranges = measure_distances(
        true_source,
        &true_anchors,
        point.range_variance,
        &mut stream_rng(seed, Stream::Ranges),
    )?;

    Ok(Trial {
        point: *point,
        true_source,
        true_anchors,
        reported_anchors,
        zeta: point.zeta,
        rss,
        ranges,
        trial_index,
        seed,
    })
}
