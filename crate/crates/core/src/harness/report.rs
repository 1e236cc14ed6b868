//! CSV logs and their summaries.

use super::train::EvalRecord;
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const EVAL_HEADER: [&str; 4] = ["step", "seed", "return", "seconds"];

/// Floats print in Rust's shortest round-trip form, independent of locale.
pub fn write_eval_csv(path: &Path, records: &[EvalRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(EVAL_HEADER)?;
    for r in records {
        w.write_record([r.step.to_string(), r.seed.to_string(), format!("{:?}", r.ret), format!("{:?}", r.seconds)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_eval_csv(path: &Path) -> Result<Vec<EvalRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.iter().ne(EVAL_HEADER) {
        return Err(Error::format(format!("{}: expected header {}", path.display(), EVAL_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let bad = |what: &str| Error::format(format!("{}: row {}: bad {what}", path.display(), i + 1));
        out.push(EvalRecord {
            step: row[0].parse().map_err(|_| bad("step"))?,
            seed: row[1].parse().map_err(|_| bad("seed"))?,
            ret: row[2].parse().map_err(|_| bad("return"))?,
            seconds: row[3].parse().map_err(|_| bad("seconds"))?,
        });
    }
    Ok(out)
}

/// `eval.csv` itself, or every `eval.csv` below a directory, sorted.
pub fn find_eval_csvs(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    if !path.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} does not exist", path.display()),
        )));
    }
    let mut found = Vec::new();
    let mut stack = vec![path.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n == "eval.csv") {
                found.push(p);
            }
        }
    }
    found.sort();
    Ok(found)
}

/// Mean and standard error (sample standard deviation over √n) per step.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub step: u64,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

pub fn aggregate(runs: &[Vec<EvalRecord>]) -> Vec<SummaryRow> {
    let mut by_step: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for run in runs {
        for r in run {
            by_step.entry(r.step).or_default().push(r.ret);
        }
    }
    by_step
        .into_iter()
        .map(|(step, xs)| {
            let n = xs.len();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let stderr = if n > 1 {
                let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow { step, mean, stderr, n }
        })
        .collect()
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_summary(std::fs::File::create(path)?, rows)
}

pub fn write_summary(out: impl std::io::Write, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "mean", "stderr", "n"])?;
    for r in rows {
        w.write_record([r.step.to_string(), format!("{:?}", r.mean), format!("{:?}", r.stderr), r.n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Trailing moving average: entry `i` averages `xs[i+1-w ..= i]`, using
/// fewer points at the start.
pub fn trailing_moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    (0..xs.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(w);
            xs[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}

/// Summary with mean and standard error smoothed over `window` evaluations.
pub fn plot_rows(rows: &[SummaryRow], window: usize) -> Vec<SummaryRow> {
    let mean = trailing_moving_average(&rows.iter().map(|r| r.mean).collect::<Vec<_>>(), window);
    let se = trailing_moving_average(&rows.iter().map(|r| r.stderr).collect::<Vec<_>>(), window);
    rows.iter()
        .zip(mean.into_iter().zip(se))
        .map(|(r, (mean, stderr))| SummaryRow { step: r.step, mean, stderr, n: r.n })
        .collect()
}
