use super::config::ExperimentConfig;
use super::report::write_eval_csv;
use super::train::{load_dataset, seed_dir, train_run, EvalRecord};
use crate::agents::AgentConfig;
use crate::error::Result;
use rayon::prelude::*;
use std::fs;
use std::path::Path;

/// Area under the curve: mean return over every evaluation of every seed.
pub fn auc(runs: &[Vec<EvalRecord>]) -> f64 {
    let (sum, n) = runs.iter().flatten().fold((0.0, 0usize), |(s, n), r| (s + r.ret, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Index of the largest finite AUC; ties go to the earlier grid point.
pub fn select_best(aucs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, a) in aucs.iter().enumerate() {
        if a.is_finite() && best.map_or(true, |b| *a > aucs[b]) {
            best = Some(i);
        }
    }
    best
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub critic_lr: f64,
    pub actor_lr_multiplier: f64,
    pub tau: f64,
    pub auc: f64,
    /// Error message when the point failed.
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub best: Option<usize>,
    pub best_runs: Vec<Vec<EvalRecord>>,
}

fn with_point(base: &ExperimentConfig, (lr, m, t): (f64, f64, f64)) -> ExperimentConfig {
    ExperimentConfig { agent: AgentConfig { critic_lr: lr, actor_lr_multiplier: m, tau: t, ..base.agent.clone() }, ..base.clone() }
}

/// Runs every grid point on the sweep seeds under the sweep protocol, picks
/// the best AUC and re-runs it on the best-run seeds under the best-run
/// protocol. A failing point is recorded and skipped.
///
/// Layout: `out/point-I/seed-N/eval.csv`, `out/best/seed-N/eval.csv`,
/// `out/sweep.csv`.
pub fn run_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<SweepReport> {
    let spec = cfg.sweep.clone().ok_or_else(|| crate::Error::config("the config has no [sweep] section"))?;
    let data = load_dataset(cfg)?;
    let grid = spec.points();
    let (si, se) = spec.sweep_eval;
    let sweep_base = ExperimentConfig {
        eval_interval: si,
        eval_episodes: se,
        ..cfg.clone()
    };
    let jobs: Vec<(usize, u64)> =
        (0..grid.len()).flat_map(|p| spec.sweep_seeds.iter().map(move |&s| (p, s))).collect();
    let results: Vec<Result<Vec<EvalRecord>>> = jobs
        .par_iter()
        .map(|&(p, seed)| {
            let c = with_point(&sweep_base, grid[p]);
            let dir = seed_dir(&out.join(format!("point-{p}")), seed);
            fs::create_dir_all(&dir)?;
            let run = train_run(&c, seed, data.as_ref(), |_| true)?;
            write_eval_csv(&dir.join("eval.csv"), &run.records)?;
            Ok(run.records)
        })
        .collect();
    let mut points = Vec::with_capacity(grid.len());
    for (p, &(critic_lr, actor_lr_multiplier, tau)) in grid.iter().enumerate() {
        let mut runs = Vec::new();
        let mut error = None;
        for ((jp, _), r) in jobs.iter().zip(&results) {
            if *jp == p {
                match r {
                    Ok(recs) => runs.push(recs.clone()),
                    Err(e) => error = error.or_else(|| Some(e.to_string())),
                }
            }
        }
        let auc = if error.is_some() { f64::NAN } else { auc(&runs) };
        points.push(SweepPoint { critic_lr, actor_lr_multiplier, tau, auc, error });
    }
    let aucs: Vec<f64> = points.iter().map(|p| p.auc).collect();
    let best = select_best(&aucs);
    let mut best_runs = Vec::new();
    if let Some(b) = best {
        let (bi, be) = spec.best_eval;
        let c = ExperimentConfig { eval_interval: bi, eval_episodes: be, ..with_point(cfg, grid[b]) };
        best_runs = spec
            .best_seeds
            .par_iter()
            .map(|&seed| {
                let dir = seed_dir(&out.join("best"), seed);
                fs::create_dir_all(&dir)?;
                let run = train_run(&c, seed, data.as_ref(), |_| true)?;
                write_eval_csv(&dir.join("eval.csv"), &run.records)?;
                Ok(run.records)
            })
            .collect::<Result<_>>()?;
    }
    write_sweep_csv(&out.join("sweep.csv"), &points, best)?;
    Ok(SweepReport { points, best, best_runs })
}

fn write_sweep_csv(path: &Path, points: &[SweepPoint], best: Option<usize>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["point", "critic_lr", "actor_lr_multiplier", "tau", "auc", "best", "error"])?;
    for (i, p) in points.iter().enumerate() {
        w.write_record([
            i.to_string(),
            format!("{:?}", p.critic_lr),
            format!("{:?}", p.actor_lr_multiplier),
            format!("{:?}", p.tau),
            format!("{:?}", p.auc),
            (best == Some(i)).to_string(),
            p.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
