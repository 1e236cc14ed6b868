//! `qexp`: train, sweep, generate datasets, sample, validate and summarize.
//!
//! Exit status: 0 success, 1 bad usage or configuration, 2 a validation
//! check failed, 3 any other runtime error. `QEXP_THREADS` caps the number
//! of worker threads used for parallel seeds.

use clap::{Args, Parser, Subcommand};
use qexp::distributions::{BetaParams, LocScaleParams, PolicyDistribution, QGaussianParams, StudentTParams};
use qexp::harness::{
    aggregate, behavior_dataset, find_eval_csvs, load_agent, plot_rows, read_eval_csv, run_sweep, run_train,
    run_validation, write_summary, ExperimentConfig, RawConfig, RawPolicy,
};
use qexp::policy::Family;
use qexp::{Error, Rng, StreamPurpose};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qexp", version, about = "q-exponential policies for continuous-control actor-critic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured seed and write `seed-N/{eval.csv, checkpoint.txt, config.toml}`.
    Train(RunArgs),
    /// Grid sweep over critic lr, actor lr multiplier and temperature, then
    /// re-run the best point on fresh seeds.
    Sweep(RunArgs),
    /// Write a binary offline dataset collected by a uniform or checkpointed policy.
    GenDataset(GenArgs),
    /// Draw samples from one policy family and print them as CSV.
    Sample(SampleArgs),
    /// Run the numerical self-checks; exits 2 if any fails.
    Validate(ValidateArgs),
    /// Mean and standard error of evaluation returns per step.
    Aggregate(SummaryArgs),
    /// Aggregate smoothed with a trailing moving average, ready for plotting.
    PlotData(PlotArgs),
}

#[derive(Args)]
struct Overrides {
    /// TOML experiment file; every field has a default.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    agent: Option<String>,
    /// Policy family: gaussian, squashed_gaussian, beta, student_t, q_gaussian.
    #[arg(long)]
    policy: Option<String>,
    /// Entropic index of the q-Gaussian policy.
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
    /// Single seed; may be repeated.
    #[arg(long)]
    seed: Vec<u64>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    dataset: Option<String>,
}

impl Overrides {
    /// Parsed file with command-line values applied, plus whether anything
    /// was overridden.
    fn load(&self) -> Result<(RawConfig, String), Fail> {
        let text = match &self.config {
            Some(p) => fs::read_to_string(p).map_err(|e| Fail::Usage(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        let mut raw = RawConfig::parse(&text)?;
        let mut changed = false;
        let mut set = |slot: &mut Option<String>, v: &Option<String>| {
            if let Some(v) = v {
                *slot = Some(v.clone());
                changed = true;
            }
        };
        set(&mut raw.env, &self.env);
        set(&mut raw.agent, &self.agent);
        set(&mut raw.dataset, &self.dataset);
        if self.policy.is_some() || self.q.is_some() {
            let p = raw.policy.get_or_insert_with(RawPolicy::default);
            if let Some(f) = &self.policy {
                p.family = Some(f.clone());
            }
            if let Some(q) = self.q {
                p.q = Some(q);
            }
            changed = true;
        }
        if let Some(s) = self.steps {
            raw.total_steps = Some(s);
            changed = true;
        }
        if !self.seed.is_empty() || !self.seeds.is_empty() {
            raw.seeds = Some(self.seed.iter().chain(&self.seeds).copied().collect());
            changed = true;
        }
        let text = if changed { raw.to_toml()? } else { text };
        Ok((raw, text))
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Output directory; defaults to `out_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Output file.
    #[arg(long)]
    out: PathBuf,
    /// Number of transitions.
    #[arg(long, default_value_t = 100_000)]
    transitions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `checkpoint.txt` of a trained run; its config comes from `--config`
    /// (or the `config.toml` next to it). Without it actions are uniform.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Environment for uniform datasets.
    #[arg(long, default_value = "pendulum")]
    env: String,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, default_value = "q_gaussian")]
    family: String,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    q: f64,
    /// Student's t degrees of freedom.
    #[arg(long, default_value_t = 3.0)]
    nu: f64,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    /// Beta support.
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    low: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    high: f64,
    /// Dimension of isotropic location-scale families.
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draws per sampler fit.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SummaryArgs {
    /// `eval.csv` files or directories searched recursively.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    summary: SummaryArgs,
    #[arg(long, default_value_t = 10)]
    window: usize,
}

enum Fail {
    Usage(String),
    Validation(usize),
    Runtime(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Fail::Usage(m),
            e => Fail::Runtime(e),
        }
    }
}

impl From<io::Error> for Fail {
    fn from(e: io::Error) -> Self {
        Fail::Runtime(e.into())
    }
}

impl From<csv::Error> for Fail {
    fn from(e: csv::Error) -> Self {
        Fail::Runtime(e.into())
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Fail> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn experiment(overrides: &Overrides, out: &Option<PathBuf>) -> Result<(ExperimentConfig, String, PathBuf), Fail> {
    let (raw, text) = overrides.load()?;
    let cfg = ExperimentConfig::from_raw(&raw)?;
    let out = out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    Ok((cfg, text, out))
}

fn train(args: RunArgs) -> Result<(), Fail> {
    let (cfg, text, out) = experiment(&args.overrides, &args.out)?;
    let runs = run_train(&cfg, &text, &out)?;
    for (seed, run) in cfg.seeds.iter().zip(&runs) {
        if let Some(last) = run.last() {
            println!("seed {seed}: {} evaluations, final return {:.3}", run.len(), last.ret);
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn sweep(args: RunArgs) -> Result<(), Fail> {
    let (cfg, _, out) = experiment(&args.overrides, &args.out)?;
    if cfg.sweep.is_none() {
        return Err(Fail::Usage("sweep needs a [sweep] section".into()));
    }
    let report = run_sweep(&cfg, &out)?;
    for (i, p) in report.points.iter().enumerate() {
        let mark = if Some(i) == report.best { " *" } else { "" };
        match &p.error {
            Some(e) => println!("point {i}: lr {} x{} tau {}: failed: {e}", p.critic_lr, p.actor_lr_multiplier, p.tau),
            None => println!("point {i}: lr {} x{} tau {}: auc {:.3}{mark}", p.critic_lr, p.actor_lr_multiplier, p.tau, p.auc),
        }
    }
    println!("wrote {}", out.join("sweep.csv").display());
    Ok(())
}

fn gen_dataset(args: GenArgs) -> Result<(), Fail> {
    let data = match &args.checkpoint {
        Some(ckpt) => {
            let cfg_path = match &args.config {
                Some(p) => p.clone(),
                None => ckpt.parent().unwrap_or(Path::new(".")).join("config.toml"),
            };
            let text = fs::read_to_string(&cfg_path).map_err(|e| Fail::Usage(format!("{}: {e}", cfg_path.display())))?;
            let cfg = ExperimentConfig::from_toml(&text)?;
            let agent = load_agent(&cfg, ckpt)?;
            behavior_dataset(cfg.env, Some(&agent), args.transitions, args.seed)?
        }
        None => behavior_dataset(args.env.parse()?, None, args.transitions, args.seed)?,
    };
    let mut w = BufWriter::new(fs::File::create(&args.out)?);
    data.write(&mut w)?;
    w.flush()?;
    let mean = data.transitions.iter().map(|t| t.reward).sum::<f64>() / data.transitions.len().max(1) as f64;
    println!("wrote {} transitions to {} (mean reward {mean:.4})", data.transitions.len(), args.out.display());
    Ok(())
}

fn sample(args: SampleArgs) -> Result<(), Fail> {
    let family: Family = args.family.parse()?;
    let n = args.dim.max(1);
    let ls = || LocScaleParams::diagonal(vec![args.mu; n], &vec![args.sigma; n]);
    let dist = match family {
        Family::Gaussian => PolicyDistribution::Gaussian(ls()?),
        Family::SquashedGaussian => PolicyDistribution::SquashedGaussian(ls()?),
        Family::StudentT => PolicyDistribution::StudentT(StudentTParams::new(ls()?, args.nu)?),
        Family::QGaussian => PolicyDistribution::QGaussian(QGaussianParams::new(ls()?, args.q)?),
        Family::Beta => PolicyDistribution::Beta(BetaParams::new(
            vec![args.alpha; n],
            vec![args.beta; n],
            vec![args.low; n],
            vec![args.high; n],
        )?),
    };
    let mut rng = Rng::stream(0, args.seed, StreamPurpose::Other(0));
    let mut w = csv::Writer::from_writer(output(&args.out)?);
    w.write_record((0..n).map(|i| format!("x{i}")))?;
    for _ in 0..args.n {
        w.write_record(dist.sample(&mut rng).iter().map(|x| format!("{x:?}")))?;
    }
    w.flush()?;
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<(), Fail> {
    let rows = run_validation(args.seed, args.samples)?;
    let mut w = csv::Writer::from_writer(output(&args.out)?);
    w.write_record(["check", "statistic", "threshold", "pass"])?;
    for r in &rows {
        w.write_record([r.check.clone(), format!("{:e}", r.statistic), format!("{:e}", r.threshold), r.pass.to_string()])?;
    }
    w.flush()?;
    match rows.iter().filter(|r| !r.pass).count() {
        0 => Ok(()),
        k => Err(Fail::Validation(k)),
    }
}

fn summary(args: &SummaryArgs, window: Option<usize>) -> Result<(), Fail> {
    let mut runs = Vec::new();
    for p in &args.paths {
        for f in find_eval_csvs(p)? {
            runs.push(read_eval_csv(&f)?);
        }
    }
    if runs.is_empty() {
        return Err(Fail::Usage("no eval.csv files found".into()));
    }
    let mut rows = aggregate(&runs);
    if let Some(w) = window {
        rows = plot_rows(&rows, w);
    }
    write_summary(output(&args.out)?, &rows)?;
    Ok(())
}

fn init_threads() -> Result<(), Fail> {
    if let Ok(v) = std::env::var("QEXP_THREADS") {
        let n: usize = v.parse().map_err(|_| Fail::Usage(format!("QEXP_THREADS must be a number, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Fail::Usage(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = init_threads().and_then(|()| match cli.command {
        Command::Train(a) => train(a),
        Command::Sweep(a) => sweep(a),
        Command::GenDataset(a) => gen_dataset(a),
        Command::Sample(a) => sample(a),
        Command::Validate(a) => validate(a),
        Command::Aggregate(a) => summary(&a, None),
        Command::PlotData(a) => summary(&a.summary, Some(a.window)),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Usage(m)) => {
            eprintln!("qexp: {m}");
            ExitCode::from(1)
        }
        Err(Fail::Validation(k)) => {
            eprintln!("qexp: {k} check(s) failed");
            ExitCode::from(2)
        }
        Err(Fail::Runtime(e)) => {
            eprintln!("qexp: {e}");
            ExitCode::from(3)
        }
    }
}
