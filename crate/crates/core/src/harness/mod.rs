//! Scenario-driven experiments: plain TCP and tunneled TCP over emulated
//! satellite links, loss sweeps, codec throughput and burst-loss probes.

mod bench;
mod output;
mod scenario;
mod sim;
mod sweep;

use thiserror::Error;

pub use bench::{burst_test, codec_bench, BurstReport, CodecBenchReport};
pub use output::{emit_plot_data, to_csv, PlotRows, ScatterRow, SampleRow};
pub use scenario::{AckPath, FlowMix, Scenario, TunnelSettings, GEO_ONE_WAY, MEO_ONE_WAY};
pub use sim::{run, ClassSummary, DropRecord, FlowClass, RunOutput, Summary};
pub use sweep::sweep_loss;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Process exit status for this error: 1 for configuration, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Runtime(_) | HarnessError::Io { .. } => 2,
        }
    }
}
