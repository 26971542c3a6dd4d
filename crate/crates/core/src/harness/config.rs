use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::channel::{ChannelProfile, DopplerMode};
use crate::detect::{EpConfig, Inversion, MrcConfig};
use crate::waveform::{default_c1, default_c2, AfdmConfig, Modulation};
use crate::{Error, Result};

/// `[waveform]` section.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformSection {
    pub n_subcarriers: usize,
    #[serde(default = "default_modulation")]
    pub modulation: Modulation,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub cpp_len: Option<usize>,
    /// Carrier frequency, kept as metadata only.
    pub carrier_hz: Option<f64>,
}

fn default_modulation() -> Modulation {
    Modulation::Qam4
}

/// `[channel]` section.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub num_paths: usize,
    #[serde(default)]
    pub nu_max: f64,
    pub doppler: Option<DopplerMode>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    Mmse,
    Mrc,
    EpAf,
    EpT,
}

impl DetectorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Mmse => "mmse",
            DetectorKind::Mrc => "mrc",
            DetectorKind::EpAf => "ep-af",
            DetectorKind::EpT => "ep-t",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mmse" => Ok(DetectorKind::Mmse),
            "mrc" => Ok(DetectorKind::Mrc),
            "ep-af" => Ok(DetectorKind::EpAf),
            "ep-t" => Ok(DetectorKind::EpT),
            _ => Err(Error::InvalidConfig(format!("unknown detector kind {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InversionKind {
    Dense,
    QuasiBanded,
}

/// One `[[detectors]]` entry.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub kind: DetectorKind,
    pub id: Option<String>,
    pub iterations: Option<usize>,
    pub damping: Option<f64>,
    pub inversion: Option<InversionKind>,
    pub k: Option<usize>,
}

/// `[sweep]` section.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub snr_db: Vec<f64>,
    #[serde(default = "default_min_frames")]
    pub min_frames: u64,
    #[serde(default = "default_max_frames")]
    pub max_frames: u64,
    #[serde(default = "default_target_errors")]
    pub target_errors: u64,
    #[serde(default)]
    pub seed: u64,
    /// A detector whose BER falls below this is not run at higher SNRs.
    pub min_ber: Option<f64>,
    pub output: Option<PathBuf>,
}

fn default_min_frames() -> u64 {
    10
}

fn default_max_frames() -> u64 {
    10_000
}

fn default_target_errors() -> u64 {
    100
}

/// The configuration file as written.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub waveform: WaveformSection,
    pub channel: ChannelSection,
    pub detectors: Vec<DetectorSection>,
    pub sweep: SweepSection,
}

/// Detector algorithm with its parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DetectorAlgo {
    Mmse,
    Mrc(MrcConfig),
    EpAf(EpConfig),
    EpT(EpConfig),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorSpec {
    pub id: String,
    pub algo: DetectorAlgo,
}

impl DetectorSpec {
    pub fn new(id: impl Into<String>, algo: DetectorAlgo) -> Self {
        Self { id: id.into(), algo }
    }

    pub fn kind(&self) -> DetectorKind {
        match self.algo {
            DetectorAlgo::Mmse => DetectorKind::Mmse,
            DetectorAlgo::Mrc(_) => DetectorKind::Mrc,
            DetectorAlgo::EpAf(_) => DetectorKind::EpAf,
            DetectorAlgo::EpT(_) => DetectorKind::EpT,
        }
    }

    fn from_section(s: &DetectorSection) -> Result<Self> {
        let algo = match s.kind {
            DetectorKind::Mmse | DetectorKind::Mrc => {
                if s.damping.is_some() || s.inversion.is_some() || s.k.is_some() {
                    return Err(Error::InvalidConfig(format!(
                        "detector {} takes no damping, inversion or k",
                        s.kind
                    )));
                }
                match s.kind {
                    DetectorKind::Mmse => DetectorAlgo::Mmse,
                    _ => DetectorAlgo::Mrc(MrcConfig {
                        iterations: s.iterations.unwrap_or(MrcConfig::default().iterations),
                    }),
                }
            }
            DetectorKind::EpAf | DetectorKind::EpT => {
                let base = EpConfig::default();
                let k = s.k.unwrap_or(8);
                let inversion = match s.inversion.unwrap_or(InversionKind::QuasiBanded) {
                    InversionKind::Dense if s.k.is_some() => {
                        return Err(Error::InvalidConfig("k applies to quasi-banded inversion only".into()))
                    }
                    InversionKind::Dense => Inversion::Dense,
                    InversionKind::QuasiBanded => Inversion::QuasiBanded { k },
                };
                let cfg = EpConfig {
                    iterations: s.iterations.unwrap_or(base.iterations),
                    damping: s.damping.unwrap_or(base.damping),
                    inversion,
                };
                cfg.validate()?;
                if s.kind == DetectorKind::EpAf {
                    DetectorAlgo::EpAf(cfg)
                } else {
                    DetectorAlgo::EpT(cfg)
                }
            }
        };
        let id = match &s.id {
            Some(id) => id.clone(),
            None => match algo {
                DetectorAlgo::EpAf(EpConfig {
                    inversion: Inversion::Dense,
                    ..
                })
                | DetectorAlgo::EpT(EpConfig {
                    inversion: Inversion::Dense,
                    ..
                }) => format!("{}-dense", s.kind),
                _ => s.kind.to_string(),
            },
        };
        if id.is_empty() || id.contains([',', '"', '\n']) {
            return Err(Error::InvalidConfig(format!("detector id {id:?} is not a plain label")));
        }
        Ok(Self { id, algo })
    }
}

/// Validated experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub waveform: AfdmConfig,
    pub channel: ChannelProfile,
    pub detectors: Vec<DetectorSpec>,
    pub snr_db: Vec<f64>,
    pub min_frames: u64,
    pub max_frames: u64,
    pub target_errors: u64,
    pub seed: u64,
    pub min_ber: Option<f64>,
    pub output: Option<PathBuf>,
    pub carrier_hz: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_file(file: &ConfigFile) -> Result<Self> {
        let ch = &file.channel;
        let doppler = ch.doppler.unwrap_or(if ch.nu_max > 0.0 {
            DopplerMode::Jakes
        } else {
            DopplerMode::None
        });
        let channel = ChannelProfile::new(ch.num_paths, ch.nu_max, doppler)?;

        let w = &file.waveform;
        let n = w.n_subcarriers;
        let nu = if doppler == DopplerMode::None { 0.0 } else { ch.nu_max };
        let waveform = AfdmConfig::new(
            n,
            w.c1.unwrap_or_else(|| default_c1(n, nu)),
            w.c2.unwrap_or_else(|| default_c2(n.max(1))),
            w.cpp_len.unwrap_or(channel.l_max()),
            w.modulation,
        )?;
        if waveform.cpp_len < channel.l_max() {
            return Err(Error::InvalidConfig(format!(
                "cpp_len {} is shorter than the maximum delay {}",
                waveform.cpp_len,
                channel.l_max()
            )));
        }

        if file.detectors.is_empty() {
            return Err(Error::InvalidConfig("no detectors configured".into()));
        }
        let detectors = file.detectors.iter().map(DetectorSpec::from_section).collect::<Result<Vec<_>>>()?;
        for (i, d) in detectors.iter().enumerate() {
            if detectors[..i].iter().any(|e| e.id == d.id) {
                return Err(Error::InvalidConfig(format!("duplicate detector id {:?}", d.id)));
            }
        }

        let s = &file.sweep;
        if s.snr_db.is_empty() {
            return Err(Error::InvalidConfig("snr_db is empty".into()));
        }
        if s.snr_db.iter().any(|v| !v.is_finite()) || s.snr_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("snr_db must be finite and strictly increasing".into()));
        }
        if s.min_frames == 0 || s.max_frames < s.min_frames {
            return Err(Error::InvalidConfig("need 1 <= min_frames <= max_frames".into()));
        }
        if let Some(b) = s.min_ber {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::InvalidConfig(format!("min_ber must lie in [0, 1], got {b}")));
            }
        }
        Ok(Self {
            waveform,
            channel,
            detectors,
            snr_db: s.snr_db.clone(),
            min_frames: s.min_frames,
            max_frames: s.max_frames,
            target_errors: s.target_errors,
            seed: s.seed,
            min_ber: s.min_ber,
            output: s.output.clone(),
            carrier_hz: w.carrier_hz,
        })
    }
}
