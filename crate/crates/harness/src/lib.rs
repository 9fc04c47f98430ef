//! Experiment harness for `minmax-core`: MNIST IDX ingestion, synthetic
//! datasets, the attack and robustness metrics, TOML experiment configs and
//! the runners behind the `minmax` command.

pub mod config;
mod error;
pub mod experiment;
pub mod idx;
pub mod metrics;
pub mod synthetic;

pub use config::{ExperimentConfig, Task};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, MetricRecord, RunOutput};
pub use idx::{load_idx, load_idx_with_shape};
pub use metrics::{acc_adv, asr_all, asr_group, s_eps};
pub use synthetic::{make_synthetic, SyntheticKind};
