//! Episode runner, baseline policy, metrics, configuration and sweeps.

pub mod config;
pub mod episode;
pub mod metrics;
pub mod random_policy;
pub mod sweep;

pub use config::{EpisodeConfig, ExperimentConfig, Policy};
pub use episode::{episode_map, run_episode, run_episode_on, substream, EpisodeRecord, StepRecord};
pub use metrics::{compute_rmse, snapshot, MetricSnapshot};
pub use random_policy::{random_policy_step, Direction, RandomAction, RandomPolicy};
pub use sweep::{mean_sd, summarize, sweep, write_csv, write_csv_file, CellSummary, Stat, CSV_COLUMNS};
