//! Experiment harness behind the `qexp` command: configuration files,
//! training runs with periodic evaluation, sweeps, and CSV summaries.

mod config;
mod report;
mod sweep;
mod train;
mod validate;

pub use config::{
    EvalPolicy, ExperimentConfig, Protocol, RawConfig, RawHyperparameters, RawPolicy, RawSweep, SweepSpec,
};
pub use report::{
    aggregate, find_eval_csvs, plot_rows, read_eval_csv, trailing_moving_average, write_eval_csv, write_summary,
    write_summary_csv,
    SummaryRow, EVAL_HEADER,
};
pub use sweep::{auc, run_sweep, select_best, SweepPoint, SweepReport};
pub use train::{behavior_dataset, evaluate, load_agent, load_dataset, run_train, seed_dir, train_run, EvalRecord, RunOutcome};
pub use validate::{run_validation, CheckRow};
