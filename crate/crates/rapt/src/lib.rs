//! IO, file formats, synthetic benchmarks, and the experiment harness for
//! retrieval-augmented post-hoc thresholding. The algorithms live in
//! [`rapt_core`]; this crate wires them to datasets and the `rapt` CLI.

pub mod cli;
mod error;
pub mod harness;
pub mod records;
pub mod report;
pub mod store;
pub mod synth;

pub use error::Error;
pub use harness::{
    run_experiment, summarize_winrate, ExperimentConfig, RunReport, StrategySpec, StrategyOutcome,
    WinRateSummary,
};
pub use records::Record;
pub use store::{load_case_base, save_case_base};
pub use synth::{generate, SynthConfig, SynthDataset};
