use std::sync::OnceLock;
use std::time::Instant;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{apply_channel, build_af_matrix, build_time_matrix, sample_channel, ChannelRealization};
use crate::detect::{
    ep_af_detect, ep_t_detect, mmse_detect, mrc_detect, to_real_model, DetectorOutput, Domain, RealSystemModel,
};
use crate::waveform::{Constellation, Daft};
use crate::{Error, Result, C64};

use super::config::{DetectorAlgo, DetectorSpec, ExperimentConfig};

/// One Monte-Carlo point.
#[derive(Clone, Debug, PartialEq)]
pub struct BerPoint {
    pub detector: String,
    pub modulation: String,
    pub channel: String,
    pub nu_max: f64,
    pub num_paths: usize,
    pub snr_db: f64,
    pub frames: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub mean_iters: f64,
    /// Mean multiplications per frame, rounded.
    pub mult_count: u64,
    pub seed: u64,
    pub failed_frames: u64,
    pub wall_time_s: f64,
}

/// Per-symbol noise variance `σ_w̄²` of an SNR in dB.
pub fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the stream that draws one frame. It does not depend on the
/// detector, so every detector sees the same channel and noise.
pub fn frame_seed(master: u64, snr_index: usize, frame: u64) -> u64 {
    splitmix(splitmix(splitmix(master) ^ snr_index as u64) ^ frame)
}

/// Everything drawn for one transmitted frame, with the system models built
/// on demand.
pub struct Frame<'a> {
    pub bits: Vec<u8>,
    pub symbols: Vec<C64>,
    pub realization: ChannelRealization,
    /// Received samples after prefix removal.
    pub rx_time: Vec<C64>,
    pub noise_var: f64,
    daft: &'a Daft,
    constellation: &'a Constellation,
    h_t: OnceLock<Mat<C64>>,
    af: OnceLock<Result<RealSystemModel>>,
    time: OnceLock<Result<RealSystemModel>>,
}

impl<'a> Frame<'a> {
    /// Draws bits, channel and noise for one frame from `rng`.
    pub fn simulate<R: Rng + ?Sized>(
        config: &ExperimentConfig,
        daft: &'a Daft,
        constellation: &'a Constellation,
        noise_var: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let n = daft.len();
        let realization = sample_channel(&config.channel, rng);
        let bits: Vec<u8> = (0..n * constellation.bits_per_symbol()).map(|_| rng.random_range(0..2u8)).collect();
        let symbols = constellation.map_bits(&bits)?;
        let tx = daft.modulate(&symbols)?;
        let rx = apply_channel(&tx, &realization, daft, noise_var, rng)?;
        Ok(Self {
            bits,
            symbols,
            realization,
            rx_time: rx[daft.cpp_len()..].to_vec(),
            noise_var,
            daft,
            constellation,
            h_t: OnceLock::new(),
            af: OnceLock::new(),
            time: OnceLock::new(),
        })
    }

    pub fn h_t(&self) -> &Mat<C64> {
        self.h_t
            .get_or_init(|| build_time_matrix(&self.realization, self.daft).expect("prefix checked when the channel was applied"))
    }

    fn model(&self, domain: Domain) -> Result<&RealSystemModel> {
        let cell = match domain {
            Domain::Af => &self.af,
            Domain::Time => &self.time,
        };
        let built = cell.get_or_init(|| match domain {
            Domain::Time => to_real_model(self.h_t(), &self.rx_time, self.noise_var, domain, self.constellation),
            Domain::Af => {
                let h = build_af_matrix(self.h_t(), self.daft)?;
                let y = self.daft.forward(&self.rx_time)?;
                to_real_model(&h, &y, self.noise_var, domain, self.constellation)
            }
        });
        built.as_ref().map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn af_model(&self) -> Result<&RealSystemModel> {
        self.model(Domain::Af)
    }

    pub fn time_model(&self) -> Result<&RealSystemModel> {
        self.model(Domain::Time)
    }

    /// Runs one detector. MMSE and EP-AF use the AF-domain model, MRC and
    /// EP-T the time-domain one.
    pub fn detect(&self, spec: &DetectorSpec) -> Result<DetectorOutput> {
        match &spec.algo {
            DetectorAlgo::Mmse => mmse_detect(self.af_model()?, self.daft),
            DetectorAlgo::Mrc(c) => mrc_detect(self.time_model()?, &self.realization, self.daft, c),
            DetectorAlgo::EpAf(c) => ep_af_detect(self.af_model()?, c),
            DetectorAlgo::EpT(c) => ep_t_detect(self.time_model()?, self.daft, c),
        }
    }

    pub fn bit_errors(&self, decided: &[C64]) -> u64 {
        let bits = self.constellation.hard_demap(decided);
        bits.iter().zip(&self.bits).filter(|(a, b)| a != b).count() as u64
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Outcome {
    ok: bool,
    errors: u64,
    iters: u64,
    mults: u64,
}

#[derive(Clone, Debug, Default)]
struct Tally {
    frames: u64,
    failed: u64,
    errors: u64,
    iters: u64,
    mults: u128,
    done: bool,
    seconds: f64,
}

impl Tally {
    fn push(&mut self, o: &Outcome, config: &ExperimentConfig) {
        if self.done {
            return;
        }
        if o.ok {
            self.frames += 1;
            self.errors += o.errors;
            self.iters += o.iters;
            self.mults += o.mults as u128;
        } else {
            self.failed += 1;
        }
        let attempted = self.frames + self.failed;
        self.done = attempted >= config.max_frames
            || (self.frames >= config.min_frames && self.errors >= config.target_errors);
    }
}

/// Runs every detector over the SNR grid. Frames are simulated in parallel
/// but drawn from per-frame streams and tallied in frame order, so the result
/// is a pure function of the configuration.
pub fn run_ber_sweep(config: &ExperimentConfig) -> Result<Vec<BerPoint>> {
    run_ber_sweep_with(config, |_| {})
}

/// [`run_ber_sweep`] reporting each finished point to `progress`.
pub fn run_ber_sweep_with(config: &ExperimentConfig, mut progress: impl FnMut(&BerPoint)) -> Result<Vec<BerPoint>> {
    let daft = Daft::new(&config.waveform)?;
    let constellation = config.waveform.constellation();
    let bits_per_frame = (daft.len() * constellation.bits_per_symbol()) as u64;
    let nd = config.detectors.len();
    let mut retired = vec![false; nd];
    let mut points = Vec::new();
    let chunk = (rayon::current_num_threads() * 2).max(4) as u64;

    for (si, &snr) in config.snr_db.iter().enumerate() {
        let sigma2 = noise_variance(snr);
        let mut tallies: Vec<Tally> = (0..nd)
            .map(|d| Tally {
                done: retired[d],
                ..Tally::default()
            })
            .collect();
        let mut next = 0u64;
        while tallies.iter().any(|t| !t.done) {
            let active: Vec<usize> = (0..nd).filter(|&d| !tallies[d].done).collect();
            let frames: Vec<u64> = (next..next + chunk).collect();
            next += chunk;
            let results: Vec<Result<Vec<(Outcome, f64)>>> = frames
                .par_iter()
                .map(|&f| {
                    let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(config.seed, si, f));
                    let frame = Frame::simulate(config, &daft, &constellation, sigma2, &mut rng)?;
                    Ok(active
                        .iter()
                        .map(|&d| {
                            let t = Instant::now();
                            let o = match frame.detect(&config.detectors[d]) {
                                Ok(out) => Outcome {
                                    ok: true,
                                    errors: frame.bit_errors(&out.hard_symbols),
                                    iters: out.iterations_used as u64,
                                    mults: out.mult_count,
                                },
                                Err(_) => Outcome::default(),
                            };
                            (o, t.elapsed().as_secs_f64())
                        })
                        .collect())
                })
                .collect();
            for r in results {
                for (&d, (o, secs)) in active.iter().zip(r?) {
                    if !tallies[d].done {
                        tallies[d].seconds += secs;
                    }
                    tallies[d].push(&o, config);
                }
            }
        }
        for (d, t) in tallies.iter().enumerate() {
            if retired[d] {
                continue;
            }
            let spec = &config.detectors[d];
            let attempted = t.frames + t.failed;
            if t.failed * 100 > attempted {
                return Err(Error::FailureThreshold {
                    detector: spec.id.clone(),
                    failed: t.failed,
                    attempted,
                });
            }
            let bits = t.frames * bits_per_frame;
            let ber = if bits == 0 { 0.0 } else { t.errors as f64 / bits as f64 };
            let frames = t.frames.max(1);
            let point = BerPoint {
                detector: spec.id.clone(),
                modulation: config.waveform.modulation.to_string(),
                channel: config.channel.class().to_string(),
                nu_max: config.channel.nu_max,
                num_paths: config.channel.num_paths,
                snr_db: snr,
                frames: t.frames,
                bits,
                bit_errors: t.errors,
                ber,
                mean_iters: t.iters as f64 / frames as f64,
                mult_count: ((t.mults + frames as u128 / 2) / frames as u128) as u64,
                seed: config.seed,
                failed_frames: t.failed,
                wall_time_s: t.seconds,
            };
            if config.min_ber.is_some_and(|m| ber < m) {
                retired[d] = true;
            }
            progress(&point);
            points.push(point);
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelProfile, DopplerMode};
    use crate::detect::{EpConfig, Inversion, MrcConfig};
    use crate::waveform::{AfdmConfig, Modulation};

    fn config(detectors: Vec<DetectorSpec>, snr: Vec<f64>, profile: ChannelProfile) -> ExperimentConfig {
        ExperimentConfig {
            waveform: AfdmConfig::with_defaults(32, profile.nu_max, profile.l_max(), Modulation::Qam4).unwrap(),
            channel: profile,
            detectors,
            snr_db: snr,
            min_frames: 20,
            max_frames: 40,
            target_errors: 50,
            seed: 11,
            min_ber: None,
            output: None,
            carrier_hz: None,
        }
    }

    #[test]
    fn seeds_separate_streams() {
        assert_ne!(frame_seed(1, 0, 0), frame_seed(1, 0, 1));
        assert_ne!(frame_seed(1, 0, 0), frame_seed(1, 1, 0));
        assert_ne!(frame_seed(1, 0, 0), frame_seed(2, 0, 0));
    }

    #[test]
    fn high_snr_single_path_is_error_free() {
        let cfg = config(
            vec![DetectorSpec::new("mmse", DetectorAlgo::Mmse)],
            vec![100.0],
            ChannelProfile::frequency_selective(1).unwrap(),
        );
        let cfg = ExperimentConfig {
            min_frames: 100,
            max_frames: 100,
            ..cfg
        };
        let pts = run_ber_sweep(&cfg).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!((pts[0].frames, pts[0].bit_errors, pts[0].ber), (100, 0, 0.0));
        assert_eq!(pts[0].bits, 100 * 64);
    }

    #[test]
    fn repeated_runs_agree() {
        let ep = EpConfig {
            inversion: Inversion::QuasiBanded { k: 4 },
            ..EpConfig::default()
        };
        let cfg = config(
            vec![
                DetectorSpec::new("mmse", DetectorAlgo::Mmse),
                DetectorSpec::new("ep-t", DetectorAlgo::EpT(ep)),
                DetectorSpec::new("mrc", DetectorAlgo::Mrc(MrcConfig::default())),
            ],
            vec![6.0, 10.0],
            ChannelProfile::new(3, 1.0, DopplerMode::Jakes).unwrap(),
        );
        let strip = |mut v: Vec<BerPoint>| {
            v.iter_mut().for_each(|p| p.wall_time_s = 0.0);
            v
        };
        let a = strip(run_ber_sweep(&cfg).unwrap());
        let b = strip(run_ber_sweep(&cfg).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        for p in &a {
            assert!(p.frames >= 20 && p.frames <= 40);
            assert_eq!(p.ber, p.bit_errors as f64 / p.bits as f64);
        }
    }

    #[test]
    fn detectors_share_frames() {
        // a detector's counts do not depend on which others run beside it
        let profile = ChannelProfile::new(3, 1.0, DopplerMode::Jakes).unwrap();
        let both = config(
            vec![
                DetectorSpec::new("mmse", DetectorAlgo::Mmse),
                DetectorSpec::new("mrc", DetectorAlgo::Mrc(MrcConfig::default())),
            ],
            vec![8.0],
            profile.clone(),
        );
        let alone = config(vec![DetectorSpec::new("mmse", DetectorAlgo::Mmse)], vec![8.0], profile);
        let a = run_ber_sweep(&both).unwrap();
        let b = run_ber_sweep(&alone).unwrap();
        assert_eq!((a[0].frames, a[0].bit_errors), (b[0].frames, b[0].bit_errors));
    }

    #[test]
    fn retired_detectors_skip_higher_snr() {
        let cfg = config(
            vec![DetectorSpec::new("mmse", DetectorAlgo::Mmse)],
            vec![60.0, 70.0],
            ChannelProfile::frequency_selective(1).unwrap(),
        );
        let cfg = ExperimentConfig {
            min_ber: Some(1e-9),
            ..cfg
        };
        let pts = run_ber_sweep(&cfg).unwrap();
        assert_eq!(pts.len(), 1);
    }
}
