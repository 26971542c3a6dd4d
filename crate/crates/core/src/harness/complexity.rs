use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::detect::{EpConfig, Inversion};
use crate::waveform::Daft;
use crate::Result;

use super::config::{DetectorAlgo, DetectorSpec, ExperimentConfig};
use super::sweep::{frame_seed, noise_variance, Frame};

/// Closed-form and measured multiplication counts of one detector on one
/// frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexityReport {
    pub detector: String,
    pub n: usize,
    pub analytic: u64,
    pub measured: u64,
}

impl ComplexityReport {
    pub fn ratio(&self) -> f64 {
        self.measured as f64 / self.analytic as f64
    }
}

/// Orders of growth with unit constants, `m = 2N` real unknowns:
///
/// | detector | count |
/// |---|---|
/// | MMSE | `2m³` (Gram, inverse) |
/// | MRC | `T·N·P` |
/// | EP, dense | `(T + 2)·m³` (Gram, `T + 1` inverses) |
/// | EP, quasi-banded | `(T + 1)·N·k²·l_max²`, plus `2T·N·log₂N` for EP-T |
pub fn analytic_multiplications(algo: &DetectorAlgo, n: usize, num_paths: usize) -> u64 {
    let n64 = n as u64;
    let m = 2 * n64;
    let l = num_paths.saturating_sub(1).max(1) as u64;
    let log2 = (n as f64).log2().ceil() as u64;
    let ep = |c: &EpConfig, transforms: bool| {
        let t = c.iterations as u64;
        let core = match c.inversion {
            Inversion::Dense => (t + 2) * m * m * m,
            Inversion::QuasiBanded { k } => (t + 1) * n64 * (k as u64 * l).pow(2),
        };
        core + if transforms { 2 * t * n64 * log2 } else { 0 }
    };
    match algo {
        DetectorAlgo::Mmse => 2 * m * m * m,
        DetectorAlgo::Mrc(c) => c.iterations as u64 * n64 * num_paths as u64,
        DetectorAlgo::EpAf(c) => ep(c, false),
        DetectorAlgo::EpT(c) => ep(c, true),
    }
}

/// Runs `spec` on the first frame drawn at `snr_db` and reports its tally
/// next to the closed form.
pub fn count_multiplications(spec: &DetectorSpec, config: &ExperimentConfig, snr_db: f64) -> Result<ComplexityReport> {
    let daft = Daft::new(&config.waveform)?;
    let constellation = config.waveform.constellation();
    let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(config.seed, 0, 0));
    let frame = Frame::simulate(config, &daft, &constellation, noise_variance(snr_db), &mut rng)?;
    // models are channel knowledge, built outside the detector's tally
    frame.af_model()?;
    frame.time_model()?;
    let out = frame.detect(spec)?;
    let n = config.waveform.n_subcarriers;
    Ok(ComplexityReport {
        detector: spec.id.clone(),
        n,
        analytic: analytic_multiplications(&spec.algo, n, config.channel.num_paths),
        measured: out.mult_count,
    })
}

/// Reports for every configured detector at the middle of the SNR grid.
pub fn complexity_reports(config: &ExperimentConfig) -> Result<Vec<ComplexityReport>> {
    let snr = config.snr_db[config.snr_db.len() / 2];
    config.detectors.iter().map(|d| count_multiplications(d, config, snr)).collect()
}

/// Plain-text table of reports.
pub fn format_reports(reports: &[ComplexityReport]) -> String {
    let mut s = format!("{:<16} {:>6} {:>16} {:>16} {:>8}\n", "detector", "N", "analytic", "measured", "ratio");
    for r in reports {
        let _ = writeln!(
            s,
            "{:<16} {:>6} {:>16} {:>16} {:>8.3}",
            r.detector,
            r.n,
            r.analytic,
            r.measured,
            r.ratio()
        );
    }
    s
}
