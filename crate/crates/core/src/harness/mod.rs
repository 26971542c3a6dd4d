//! Experiment configuration, Monte-Carlo BER sweeps, multiplication
//! accounting and CSV output.

mod bench;
mod complexity;
mod config;
mod csv;
mod sweep;

pub use bench::{inversion_bench, EpStyleSystem, InversionBench};
pub use complexity::{analytic_multiplications, complexity_reports, count_multiplications, format_reports, ComplexityReport};
pub use config::{
    ChannelSection, ConfigFile, DetectorAlgo, DetectorKind, DetectorSection, DetectorSpec, ExperimentConfig,
    InversionKind, SweepSection, WaveformSection,
};
pub use csv::{emit_csv, format_float, read_points, write_points, HEADER};
pub use sweep::{frame_seed, noise_variance, run_ber_sweep, run_ber_sweep_with, BerPoint, Frame};
