//! CSV export and re-import of sweep reports.
//!
//! Both files start with a `#` comment line carrying the trial count and
//! master seed, followed by the fixed header. Floats use the shortest
//! decimal form that parses back to the same value; missing values are
//! empty fields.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::{Aggregate, SweepReport, TrialRecord};
use crate::error::{Error, Result};
use crate::model::Point2;

pub const RECORD_HEADER: [&str; 12] = [
    "method", "placement", "M", "zeta", "sigma", "trial", "x_true", "y_true", "x_est", "y_est", "err", "status",
];

pub const AGGREGATE_HEADER: [&str; 13] = [
    "method",
    "placement",
    "M",
    "zeta",
    "sigma",
    "rmse",
    "median",
    "q1",
    "q3",
    "whisker_lo",
    "whisker_hi",
    "n",
    "failures",
];

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn comment(report: &SweepReport) -> String {
    format!(
        "# trials_per_point={} master_seed={}\n",
        report.trials_per_point, report.master_seed
    )
}

fn csv_err(e: csv::Error) -> Error {
    Error::csv("<stream>", e)
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stream>", e)
}

pub fn write_records<W: Write>(report: &SweepReport, mut out: W) -> Result<()> {
    out.write_all(comment(report).as_bytes()).map_err(io_err)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER).map_err(csv_err)?;
    for r in &report.records {
        w.write_record([
            r.method.label().to_string(),
            r.placement.label().to_string(),
            r.m.to_string(),
            num(r.zeta),
            num(r.sigma),
            r.trial.to_string(),
            num(r.x_true),
            num(r.y_true),
            opt(r.estimate.map(|p| p.x)),
            opt(r.estimate.map(|p| p.y)),
            opt(r.err),
            r.status.label().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn write_aggregates<W: Write>(report: &SweepReport, mut out: W) -> Result<()> {
    out.write_all(comment(report).as_bytes()).map_err(io_err)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER).map_err(csv_err)?;
    for a in &report.aggregates {
        w.write_record([
            a.method.label().to_string(),
            a.placement.label().to_string(),
            a.m.to_string(),
            num(a.zeta),
            num(a.sigma),
            num(a.rmse),
            num(a.median),
            num(a.q1),
            num(a.q3),
            num(a.whisker_lo),
            num(a.whisker_hi),
            a.n.to_string(),
            a.failures.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::io(path, source),
        Error::Csv { source, .. } => Error::csv(path, source),
        other => other,
    }
}

/// Writes `<stem>_records.csv` and `<stem>_agg.csv` into `dir` and returns
/// their paths.
pub fn export_csv(report: &SweepReport, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let records = dir.join(format!("{stem}_records.csv"));
    let aggregates = dir.join(format!("{stem}_agg.csv"));
    let f = File::create(&records).map_err(|e| Error::io(&records, e))?;
    write_records(report, BufWriter::new(f)).map_err(|e| with_path(e, &records))?;
    let f = File::create(&aggregates).map_err(|e| Error::io(&aggregates, e))?;
    write_aggregates(report, BufWriter::new(f)).map_err(|e| with_path(e, &aggregates))?;
    Ok((records, aggregates))
}

fn parse<T: std::str::FromStr>(field: &str, what: &str, line: u64) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::invalid(format!("line {line}: bad {what} '{field}'")))
}

fn parse_opt(field: &str, what: &str, line: u64) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse(field, what, line).map(Some)
    }
}

fn reader<R: Read>(input: R, header: &[&str]) -> Result<csv::Reader<R>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let found = r.headers().map_err(csv_err)?;
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::invalid(format!(
            "unexpected CSV header '{}'",
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(r)
}

pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<TrialRecord>> {
    let mut out = Vec::new();
    for row in reader(input, &RECORD_HEADER)?.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line());
        let f = |i: usize| row.get(i).unwrap_or("");
        let x = parse_opt(f(8), "x_est", line)?;
        let y = parse_opt(f(9), "y_est", line)?;
        out.push(TrialRecord {
            method: f(0).parse()?,
            placement: f(1).parse()?,
            m: parse(f(2), "M", line)?,
            zeta: parse(f(3), "zeta", line)?,
            sigma: parse(f(4), "sigma", line)?,
            trial: parse(f(5), "trial", line)?,
            x_true: parse(f(6), "x_true", line)?,
            y_true: parse(f(7), "y_true", line)?,
            estimate: x.zip(y).map(|(x, y)| Point2::new(x, y)),
            err: parse_opt(f(10), "err", line)?,
            status: f(11).parse()?,
        });
    }
    Ok(out)
}

pub fn read_aggregates_csv<R: Read>(input: R) -> Result<Vec<Aggregate>> {
    let mut out = Vec::new();
    for row in reader(input, &AGGREGATE_HEADER)?.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line());
        let f = |i: usize| row.get(i).unwrap_or("");
        let g = |i: usize, what: &str| parse_opt(f(i), what, line).map(|v| v.unwrap_or(f64::NAN));
        out.push(Aggregate {
            method: f(0).parse()?,
            placement: f(1).parse()?,
            m: parse(f(2), "M", line)?,
            zeta: parse(f(3), "zeta", line)?,
            sigma: parse(f(4), "sigma", line)?,
            rmse: g(5, "rmse")?,
            median: g(6, "median")?,
            q1: g(7, "q1")?,
            q3: g(8, "q3")?,
            whisker_lo: g(9, "whisker_lo")?,
            whisker_hi: g(10, "whisker_hi")?,
            n: parse(f(11), "n", line)?,
            failures: parse(f(12), "failures", line)?,
        });
    }
    Ok(out)
}
