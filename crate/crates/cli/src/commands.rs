//! `sweep`, `trial` and `presets`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use rssloc::bench::{export_csv, preset, run_sweep_with_threads, run_trial_detailed, PRESETS};
use rssloc::conic::spectral::eigenvalues2;
use rssloc::estimators::Method;
use rssloc::scenario::make_trial;
use rssloc::Point2;

use crate::config::{parse_config, CliConfig};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "rssloc", version, about = "Robust RSS source localization benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte Carlo sweep and write record and aggregate CSVs.
    Sweep(SweepArgs),
    /// Inspect one trial of a sweep point with one method.
    Trial(TrialArgs),
    /// List the figure presets and their parameter grids.
    Presets {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Args)]
pub struct Source {
    /// Configuration file (`key = value` lines with `[section]` headers).
    #[arg(long, short, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Named figure preset instead of a configuration file.
    #[arg(long)]
    pub preset: Option<String>,
    /// Overrides the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: Source,
    /// Output directory.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = automatic).
    #[arg(long, short = 'j')]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrialArgs {
    #[command(flatten)]
    pub source: Source,
    /// Trial index within the sweep point.
    #[arg(long)]
    pub index: u64,
    /// Sweep point index in canonical order (placement, M, zeta, sigma).
    #[arg(long, default_value_t = 0)]
    pub point: usize,
    /// Estimator label: ro, r-r, r-g, r-p, rss, ml, p-d, so, so-d or r-1.
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    /// Also print the objective, solver counters, k* and the spectrum of X* - x*x*'.
    #[arg(long, short)]
    pub verbose: bool,
    /// Structured JSON output.
    #[arg(long)]
    pub json: bool,
    /// Write the scored rounding candidates to this file.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: rssloc::Error| e.to_string())
}

fn read_config(path: &Path) -> Result<CliConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn load(source: &Source) -> Result<CliConfig, CliError> {
    let mut config = match (&source.config, &source.preset) {
        (Some(path), _) => read_config(path)?,
        (None, Some(name)) => {
            let p = preset(name).ok_or_else(|| {
                let names: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
                CliError::Config(format!("unknown preset '{name}' (valid: {})", names.join(", ")))
            })?;
            CliConfig {
                sweep: p.config(),
                name: p.name.to_string(),
                ..CliConfig::default()
            }
        }
        (None, None) => CliConfig::default(),
    };
    if let Some(seed) = source.seed {
        config.sweep.master_seed = seed;
    }
    config.validate()?;
    Ok(config)
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Sweep(args) => cmd_sweep(args, out),
        Command::Trial(args) => cmd_trial(args, out),
        Command::Presets { json } => cmd_presets(json, out),
    }
}

fn io(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

pub fn cmd_sweep(args: SweepArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut config = load(&args.source)?;
    if let Some(dir) = args.out {
        config.out_dir = dir;
    }
    if let Some(p) = args.parallelism {
        config.parallelism = p;
    }
    let report = run_sweep_with_threads(&config.sweep, config.parallelism)?;
    let (records, aggregates) = export_csv(&report, &config.out_dir, &config.name)?;
    if config.verbosity >= 1 {
        writeln!(out, "{:<6} {:<9} {:>2} {:>6} {:>5} {:>9} {:>9} {:>5} {:>8}", "method", "placement", "M", "zeta", "sigma", "rmse", "median", "n", "failures").map_err(io)?;
        for a in &report.aggregates {
            writeln!(
                out,
                "{:<6} {:<9} {:>2} {:>6} {:>5} {:>9.5} {:>9.5} {:>5} {:>8}",
                a.method.label(),
                a.placement.label(),
                a.m,
                a.zeta,
                a.sigma,
                a.rmse,
                a.median,
                a.n,
                a.failures
            )
            .map_err(io)?;
        }
    }
    writeln!(out, "wrote {}\nwrote {}", records.display(), aggregates.display()).map_err(io)?;
    Ok(())
}

fn pt(p: Point2) -> Value {
    json!([p.x, p.y])
}

pub fn cmd_trial(args: TrialArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = load(&args.source)?;
    let points = config.sweep.sweep_points()?;
    let point = points.get(args.point).ok_or_else(|| {
        CliError::Config(format!("sweep point {} out of range (sweep has {})", args.point, points.len()))
    })?;
    if args.index >= config.sweep.trials_per_point {
        return Err(CliError::Config(format!(
            "trial index {} out of range (trials_per_point = {})",
            args.index, config.sweep.trials_per_point
        )));
    }
    let trial = make_trial(point, config.sweep.master_seed, args.index)?;
    let mut settings = config.sweep.estimator_settings();
    settings.rounding.trace = args.trace_out.is_some();
    let outcome = run_trial_detailed(&trial, &[args.method], &settings);
    let result = &outcome.results[0];
    let est = result.output.x_hat;
    let err = est.map(|p| p.dist(trial.true_source));

    if let (Some(path), Some(r)) = (&args.trace_out, &result.refinement) {
        std::fs::write(path, r.trace_text()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }

    let robust = outcome.robust.as_ref().map(|s| {
        let ev = eigenvalues2(&s.covariance());
        (s, ev)
    });
    let rounding = result.refinement.as_ref().map(|r| {
        json!({
            "point": pt(r.point),
            "score": if r.score.is_finite() { json!(r.score) } else { Value::Null },
            "evaluated": r.evaluated,
            "rejected": r.rejected,
            "rows": r.rows,
        })
    });

    if args.json {
        let v = json!({
            "placement": point.placement.kind.label(),
            "M": trial.anchor_count(),
            "zeta": trial.zeta,
            "sigma": trial.model().sigma,
            "trial": trial.trial_index,
            "seed": trial.seed,
            "source": pt(trial.true_source),
            "true_anchors": trial.true_anchors.iter().copied().map(pt).collect::<Vec<_>>(),
            "reported_anchors": trial.reported_anchors.iter().copied().map(pt).collect::<Vec<_>>(),
            "losses": trial.rss.losses,
            "betas": trial.rss.betas,
            "ranges": trial.ranges.s,
            "method": args.method.label(),
            "estimate": est.map(pt),
            "err": err,
            "status": result.output.status.label(),
            "objective": if result.output.objective.is_finite() { json!(result.output.objective) } else { Value::Null },
            "iterations": result.output.stats.iterations,
            "robust": robust.map(|(s, ev)| json!({
                "k_star": s.k_star,
                "x_star": pt(s.x_star),
                "covariance_eigenvalues": ev,
                "status": s.status.label(),
            })),
            "rounding": rounding,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("json")).map_err(io)?;
        return Ok(());
    }

    let w = &mut *out;
    let mut line = |s: String| writeln!(w, "{s}").map_err(io);
    line(format!(
        "trial {} of {} placement, M={}, zeta={}, sigma={} (seed {:#018x})",
        trial.trial_index,
        point.placement.kind.label(),
        trial.anchor_count(),
        trial.zeta,
        trial.model().sigma,
        trial.seed
    ))?;
    line(format!("source       {}", trial.true_source))?;
    for (i, (t, r)) in trial.true_anchors.iter().zip(&trial.reported_anchors).enumerate() {
        line(format!(
            "anchor {i}     true {t}  reported {r}  loss {:.4} dB  beta {:.5}  range {:.5}",
            trial.rss.losses[i], trial.rss.betas[i], trial.ranges.s[i]
        ))?;
    }
    match est {
        Some(p) => line(format!(
            "{:<12} {}  err {:.6}  status {}",
            args.method.label(),
            p,
            err.unwrap_or(f64::NAN),
            result.output.status
        ))?,
        None => line(format!("{:<12} no estimate  status {}", args.method.label(), result.output.status))?,
    }
    if args.verbose {
        line(format!(
            "objective    {}  iterations {}  time {:.4}s",
            result.output.objective, result.output.stats.iterations, result.output.stats.seconds
        ))?;
        if let Some((s, ev)) = robust {
            line(format!("k*           {}", s.k_star))?;
            line(format!("x*           {}", s.x_star))?;
            line(format!("eig(X*-x*x*') {:.6e} {:.6e}", ev[0], ev[1]))?;
        }
    }
    if let Some(r) = &result.refinement {
        line(format!(
            "rounding     {} candidates scored, {} rejected, best score {}",
            r.evaluated, r.rejected, r.score
        ))?;
        if let Some(rows) = r.rows {
            line(format!("permutations {rows} index rows used"))?;
        }
    }
    Ok(())
}

pub fn cmd_presets(as_json: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let list: Vec<Value> = PRESETS
        .iter()
        .map(|p| {
            let c = p.config();
            json!({
                "name": p.name,
                "description": p.description,
                "placements": c.placements.iter().map(|k| k.label()).collect::<Vec<_>>(),
                "M_values": c.anchor_counts,
                "zeta_values": c.zeta_values,
                "sigma_values": c.sigma_values,
                "trials_per_point": c.trials_per_point,
                "methods": c.methods.iter().map(|m| m.label()).collect::<Vec<_>>(),
            })
        })
        .collect();
    if as_json {
        writeln!(out, "{}", serde_json::to_string_pretty(&list).expect("json")).map_err(io)?;
        return Ok(());
    }
    for p in &PRESETS {
        let c = p.config();
        let fmt = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        writeln!(
            out,
            "{:<6} {}\n       placements={} M={} zeta={} sigma={} trials={}",
            p.name,
            p.description,
            c.placements.iter().map(|k| k.label()).collect::<Vec<_>>().join(","),
            c.anchor_counts.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(","),
            fmt(&c.zeta_values),
            fmt(&c.sigma_values),
            c.trials_per_point
        )
        .map_err(io)?;
    }
    Ok(())
}
