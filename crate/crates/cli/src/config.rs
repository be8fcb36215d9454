//! Line-based sweep configuration.
//!
//! ```text
//! # comment
//! [sweep]
//! placements = random, designed
//! M_values = 3, 4
//! zeta_values = 0.06, 0.08
//! ```
//!
//! Every key belongs to one section and may also appear before the first
//! section header. Unknown keys, keys in the wrong section and repeated keys
//! are errors.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use rssloc::bench::SweepConfig;
use rssloc::estimators::Method;
use rssloc::scenario::{PerturbationLaw, PlacementKind};
use rssloc::PathLossModel;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub sweep: SweepConfig,
    pub out_dir: PathBuf,
    /// Worker threads; 0 lets rayon decide.
    pub parallelism: usize,
    pub verbosity: u8,
    /// Stem of the output file names.
    pub name: String,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            sweep: SweepConfig::default(),
            out_dir: PathBuf::from("results"),
            parallelism: 0,
            verbosity: 1,
            name: "sweep".into(),
        }
    }
}

/// `(section, key, meaning and default)` for every accepted key.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("sweep", "placements", "anchor layouts: random, designed (default random)"),
    ("sweep", "M_values", "anchor counts, each >= 3 (default 3)"),
    ("sweep", "zeta_values", "anchor error bounds (default 0.1)"),
    ("sweep", "sigma_values", "RSS noise standard deviations in dB (default 0)"),
    ("sweep", "range_variance", "range noise variance for p-d and so-d (default 0.15)"),
    ("sweep", "methods", "estimator labels (default ro, r-r, r-g, r-p, rss, ml, p-d, so, so-d)"),
    ("sweep", "trials_per_point", "Monte Carlo trials per sweep point (default 500)"),
    ("sweep", "master_seed", "64-bit master seed (default 20240917)"),
    ("channel", "d0", "reference distance (default 0.025)"),
    ("channel", "L0", "path loss at d0 in dB (default 8)"),
    ("channel", "gamma", "path loss exponent (default 3)"),
    ("channel", "perturbation", "anchor error law: uniform_disk, disk_boundary, truncated_gaussian"),
    ("rounding", "tt", "source candidates per rounding (default 100)"),
    ("rounding", "N", "candidate positions per anchor (default 4)"),
    ("rounding", "max_combinations", "cap on anchor index rows (default 10000)"),
    ("estimators", "ml_restarts", "ML multi-start count (default 20)"),
    ("estimators", "solver_tolerance", "conic solver tolerance (default 1e-8)"),
    ("estimators", "solver_max_iterations", "conic solver iteration cap (default 200)"),
    ("variants", "literal_footnote5", "fresh noise inside the r-r score (default false)"),
    ("variants", "literal_sigma_d", "r-g scale from diag(X*) (default false)"),
    ("variants", "cartesian_anchors", "r-r rows over N^M (default false)"),
    ("variants", "literal_plus_sign", "+2x'z cross term in the robust program (default false)"),
    ("variants", "uncoupled_distances", "drop l_i >= |x - z_i| (default false)"),
    ("variants", "confine_candidates", "discard rounding candidates outside [0,1]^2 (default false)"),
    ("output", "out_dir", "directory for CSV files (default results)"),
    ("output", "name", "file name stem (default sweep)"),
    ("output", "parallelism", "worker threads, 0 = automatic (default 0)"),
    ("output", "verbosity", "0 quiet, 1 normal, 2 verbose (default 1)"),
];

const SECTIONS: &[&str] = &["sweep", "channel", "rounding", "estimators", "variants", "output"];

fn err(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("line {line}: {msg}"))
}

fn scalar<T: FromStr>(line: usize, key: &str, value: &str, expected: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| err(line, format!("{key} = '{value}': expected {expected}")))
}

fn list<T: FromStr>(line: usize, key: &str, value: &str, expected: &str) -> Result<Vec<T>, CliError> {
    value
        .split(',')
        .map(|v| scalar(line, key, v.trim(), expected))
        .collect()
}

fn boolean(line: usize, key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(err(line, format!("{key} = '{value}': expected true or false"))),
    }
}

fn apply(c: &mut CliConfig, line: usize, key: &str, value: &str) -> Result<(), CliError> {
    const REAL: &str = "a number";
    const COUNT: &str = "a non-negative integer";
    let s = &mut c.sweep;
    match key {
        "placements" => {
            s.placements = value
                .split(',')
                .map(|v| {
                    PlacementKind::from_str(v.trim())
                        .map_err(|_| err(line, format!("placements: '{}' is not random or designed", v.trim())))
                })
                .collect::<Result<_, _>>()?
        }
        "M_values" => s.anchor_counts = list(line, key, value, "integers >= 3")?,
        "zeta_values" => s.zeta_values = list(line, key, value, "numbers >= 0")?,
        "sigma_values" => s.sigma_values = list(line, key, value, "numbers >= 0")?,
        "range_variance" => s.range_variance = scalar(line, key, value, REAL)?,
        "methods" => {
            s.methods = value
                .split(',')
                .map(|v| Method::from_str(v.trim()).map_err(|e| err(line, e.to_string())))
                .collect::<Result<_, _>>()?
        }
        "trials_per_point" => s.trials_per_point = scalar(line, key, value, "an integer >= 1")?,
        "master_seed" => s.master_seed = scalar(line, key, value, "a 64-bit unsigned integer")?,
        "d0" => s.channel.d0 = scalar(line, key, value, "a number > 0")?,
        "L0" => s.channel.l0 = scalar(line, key, value, REAL)?,
        "gamma" => s.channel.gamma = scalar(line, key, value, "a number > 0")?,
        "perturbation" => s.perturbation = PerturbationLaw::from_str(value).map_err(|e| err(line, e))?,
        "tt" => s.budget.tt = scalar(line, key, value, "an integer >= 1")?,
        "N" => s.budget.anchor_candidates = scalar(line, key, value, "an integer >= 1")?,
        "max_combinations" => s.budget.max_combinations = scalar(line, key, value, "an integer >= 1")?,
        "ml_restarts" => s.ml_restarts = scalar(line, key, value, "an integer >= 1")?,
        "solver_tolerance" => s.solver.tolerance = scalar(line, key, value, "a number > 0")?,
        "solver_max_iterations" => s.solver.max_iterations = scalar(line, key, value, COUNT)?,
        "literal_footnote5" => s.variants.literal_footnote5 = boolean(line, key, value)?,
        "literal_sigma_d" => s.variants.literal_sigma_d = boolean(line, key, value)?,
        "cartesian_anchors" => s.variants.cartesian_anchors = boolean(line, key, value)?,
        "literal_plus_sign" => s.variants.literal_plus_sign = boolean(line, key, value)?,
        "uncoupled_distances" => s.variants.uncoupled_distances = boolean(line, key, value)?,
        "confine_candidates" => s.variants.confine_candidates = boolean(line, key, value)?,
        "out_dir" => c.out_dir = PathBuf::from(value),
        "name" => {
            if value.is_empty() || value.contains(['/', '\\']) {
                return Err(err(line, format!("name = '{value}': expected a plain file stem")));
            }
            c.name = value.to_string()
        }
        "parallelism" => c.parallelism = scalar(line, key, value, COUNT)?,
        "verbosity" => c.verbosity = scalar(line, key, value, "0, 1 or 2")?,
        _ => unreachable!("key table and parser disagree on '{key}'"),
    }
    Ok(())
}

/// Parses a configuration; an empty text gives the defaults.
pub fn parse_config(text: &str) -> Result<CliConfig, CliError> {
    let mut config = CliConfig::default();
    let mut section: Option<&str> = None;
    let mut seen = HashSet::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split_once('#').map_or(raw, |(c, _)| c).trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(line, format!("malformed section header '{content}'")))?
                .trim();
            section = Some(
                SECTIONS
                    .iter()
                    .find(|s| **s == name)
                    .ok_or_else(|| err(line, format!("unknown section [{name}] (expected one of {})", SECTIONS.join(", "))))?,
            );
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected 'key = value', found '{content}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let (home, _, _) = KEYS
            .iter()
            .find(|(_, k, _)| *k == key)
            .ok_or_else(|| err(line, format!("unknown key '{key}'")))?;
        if let Some(s) = section {
            if s != *home {
                return Err(err(line, format!("key '{key}' belongs in [{home}], not [{s}]")));
            }
        }
        if !seen.insert(key) {
            return Err(err(line, format!("key '{key}' given twice")));
        }
        if value.is_empty() {
            return Err(err(line, format!("key '{key}' has no value")));
        }
        apply(&mut config, line, key, value)?;
    }
    config.validate()?;
    Ok(config)
}

impl CliConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.sweep.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.verbosity > 2 {
            return Err(CliError::Config(format!("verbosity must be 0, 1 or 2, got {}", self.verbosity)));
        }
        Ok(())
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

/// Writes every key, so the text documents the full configuration.
pub fn serialize_config(c: &CliConfig) -> String {
    let s = &c.sweep;
    let ch: &PathLossModel = &s.channel;
    let v = &s.variants;
    let mut out = String::new();
    let mut section = |name: &str, pairs: Vec<(&str, String)>| {
        let _ = writeln!(out, "[{name}]");
        for (k, val) in pairs {
            let _ = writeln!(out, "{k} = {val}");
        }
        out.push('\n');
    };
    section(
        "sweep",
        vec![
            ("placements", join(&s.placements.iter().map(|p| p.label()).collect::<Vec<_>>())),
            ("M_values", join(&s.anchor_counts)),
            ("zeta_values", join(&s.zeta_values)),
            ("sigma_values", join(&s.sigma_values)),
            ("range_variance", s.range_variance.to_string()),
            ("methods", join(&s.methods.iter().map(|m| m.label()).collect::<Vec<_>>())),
            ("trials_per_point", s.trials_per_point.to_string()),
            ("master_seed", s.master_seed.to_string()),
        ],
    );
    section(
        "channel",
        vec![
            ("d0", ch.d0.to_string()),
            ("L0", ch.l0.to_string()),
            ("gamma", ch.gamma.to_string()),
            ("perturbation", s.perturbation.label().to_string()),
        ],
    );
    section(
        "rounding",
        vec![
            ("tt", s.budget.tt.to_string()),
            ("N", s.budget.anchor_candidates.to_string()),
            ("max_combinations", s.budget.max_combinations.to_string()),
        ],
    );
    section(
        "estimators",
        vec![
            ("ml_restarts", s.ml_restarts.to_string()),
            ("solver_tolerance", s.solver.tolerance.to_string()),
            ("solver_max_iterations", s.solver.max_iterations.to_string()),
        ],
    );
    section(
        "variants",
        vec![
            ("literal_footnote5", v.literal_footnote5.to_string()),
            ("literal_sigma_d", v.literal_sigma_d.to_string()),
            ("cartesian_anchors", v.cartesian_anchors.to_string()),
            ("literal_plus_sign", v.literal_plus_sign.to_string()),
            ("uncoupled_distances", v.uncoupled_distances.to_string()),
            ("confine_candidates", v.confine_candidates.to_string()),
        ],
    );
    section(
        "output",
        vec![
            ("out_dir", c.out_dir.display().to_string()),
            ("name", c.name.clone()),
            ("parallelism", c.parallelism.to_string()),
            ("verbosity", c.verbosity.to_string()),
        ],
    );
    out
}
