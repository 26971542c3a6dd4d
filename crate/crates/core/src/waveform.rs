//! AFDM waveform primitives: Gray-mapped QAM, the discrete affine Fourier
//! transform (DAFT) and chirp-periodic-prefix framing.
//!
//! The DAFT matrix is `A = Λ_c2 · F · Λ_c1` with `Λ_c = diag(e^{-i2πc n²})` and
//! `F` the unitary DFT. Modulation maps affine-frequency (AF) symbols to time
//! samples with `Aᴴ`; demodulation applies `A` after removing the prefix. Both
//! directions run in `O(N log N)` through an FFT.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use faer::Mat;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{flops, Error, Result, C64};

/// `e^{-i2π·turns}` with the argument reduced modulo one turn first.
#[inline]
pub(crate) fn phasor(turns: f64) -> C64 {
    C64::from_polar(1.0, -2.0 * PI * turns.rem_euclid(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "qam4", alias = "QAM4", alias = "4qam", alias = "4QAM")]
    Qam4,
    #[serde(rename = "qam16", alias = "QAM16", alias = "16qam", alias = "16QAM")]
    Qam16,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qam4 => 2,
            Modulation::Qam16 => 4,
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modulation::Qam4 => "qam4",
            Modulation::Qam16 => "qam16",
        })
    }
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qam4" | "4qam" | "qpsk" => Ok(Modulation::Qam4),
            "qam16" | "16qam" => Ok(Modulation::Qam16),
            _ => Err(Error::UnknownConstellation(s.to_owned())),
        }
    }
}

/// Square QAM built from two independent Gray-labelled PAM dimensions.
///
/// Per-dimension labels (before the `1/√2` resp. `1/√10` normalisation):
///
/// | bits | 4QAM | 16QAM |
/// |------|------|-------|
/// | 0    | +1   |       |
/// | 1    | −1   |       |
/// | 00   |      | +1    |
/// | 01   |      | +3    |
/// | 10   |      | −1    |
/// | 11   |      | −3    |
///
/// A symbol's bits are the in-phase label followed by the quadrature label,
/// so 4QAM maps `00, 01, 11, 10` to `(1+i), (1−i), (−1−i), (−1+i)` over `√2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    modulation: Modulation,
    bits_per_dim: usize,
    /// Per-dimension levels, ascending.
    levels: Vec<f64>,
    /// Gray label of `levels[k]`.
    level_labels: Vec<usize>,
    /// Level for each per-dimension label.
    label_levels: Vec<f64>,
    /// Complex points indexed by symbol label.
    points: Vec<C64>,
}

impl Constellation {
    pub fn new(modulation: Modulation) -> Self {
        let (bits_per_dim, scale) = match modulation {
            Modulation::Qam4 => (1, 1.0 / 2f64.sqrt()),
            Modulation::Qam16 => (2, 1.0 / 10f64.sqrt()),
        };
        let m = 1usize << bits_per_dim;
        let label_levels: Vec<f64> = (0..m)
            .map(|label| {
                let sign = if label >> (bits_per_dim - 1) & 1 == 0 { 1.0 } else { -1.0 };
                let magnitude = if bits_per_dim == 1 || label & 1 == 0 { 1.0 } else { 3.0 };
                sign * magnitude * scale
            })
            .collect();
        let mut level_labels: Vec<usize> = (0..m).collect();
        level_labels.sort_by(|&a, &b| label_levels[a].total_cmp(&label_levels[b]));
        let levels = level_labels.iter().map(|&l| label_levels[l]).collect();
        let points = (0..m * m)
            .map(|label| C64::new(label_levels[label >> bits_per_dim], label_levels[label & (m - 1)]))
            .collect();
        Self {
            modulation,
            bits_per_dim,
            levels,
            level_labels,
            label_levels,
            points,
        }
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_dim
    }

    /// Complex points indexed by their bit label.
    pub fn points(&self) -> &[C64] {
        &self.points
    }

    /// The real alphabet of one dimension, ascending.
    pub fn real_alphabet(&self) -> &[f64] {
        &self.levels
    }

    /// Per-dimension variance of a uniformly drawn symbol (½ for unit energy).
    pub fn dimension_variance(&self) -> f64 {
        self.levels.iter().map(|a| a * a).sum::<f64>() / self.levels.len() as f64
    }

    fn nearest_index(&self, v: f64) -> usize {
        // levels are few and sorted, a threshold walk is enough
        let mut k = 0;
        while k + 1 < self.levels.len() && v > 0.5 * (self.levels[k] + self.levels[k + 1]) {
            k += 1;
        }
        k
    }

    /// Nearest per-dimension level.
    pub fn nearest_level(&self, v: f64) -> f64 {
        self.levels[self.nearest_index(v)]
    }

    /// Nearest constellation point, decided independently per dimension.
    pub fn slice(&self, z: C64) -> C64 {
        C64::new(self.nearest_level(z.re), self.nearest_level(z.im))
    }

    pub fn map_bits(&self, bits: &[u8]) -> Result<Vec<C64>> {
        let bps = self.bits_per_symbol();
        if !bits.len().is_multiple_of(bps) {
            return Err(Error::LengthMismatch {
                expected: bits.len().div_ceil(bps) * bps,
                actual: bits.len(),
            });
        }
        let k = self.bits_per_dim;
        Ok(bits
            .chunks_exact(bps)
            .map(|chunk| {
                let label = |b: &[u8]| b.iter().fold(0usize, |acc, &bit| (acc << 1) | (bit & 1) as usize);
                C64::new(self.label_levels[label(&chunk[..k])], self.label_levels[label(&chunk[k..])])
            })
            .collect())
    }

    pub fn hard_demap(&self, symbols: &[C64]) -> Vec<u8> {
        let k = self.bits_per_dim;
        let mut bits = Vec::with_capacity(symbols.len() * 2 * k);
        let mut push_label = |label: usize| {
            for shift in (0..k).rev() {
                bits.push((label >> shift & 1) as u8);
            }
        };
        for z in symbols {
            push_label(self.level_labels[self.nearest_index(z.re)]);
            push_label(self.level_labels[self.nearest_index(z.im)]);
        }
        bits
    }
}

pub fn map_bits(bits: &[u8], constellation: &Constellation) -> Result<Vec<C64>> {
    constellation.map_bits(bits)
}

pub fn hard_demap(symbols: &[C64], constellation: &Constellation) -> Vec<u8> {
    constellation.hard_demap(symbols)
}

/// Waveform parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AfdmConfig {
    pub n_subcarriers: usize,
    /// First chirp rate, cycles per sample².
    pub c1: f64,
    /// Second chirp rate, cycles per sample².
    pub c2: f64,
    pub cpp_len: usize,
    pub modulation: Modulation,
}

impl AfdmConfig {
    pub fn new(n_subcarriers: usize, c1: f64, c2: f64, cpp_len: usize, modulation: Modulation) -> Result<Self> {
        let config = Self {
            n_subcarriers,
            c1,
            c2,
            cpp_len,
            modulation,
        };
        config.validate()?;
        Ok(config)
    }

    /// Default chirp rates for a channel with Doppler up to `nu_max` and
    /// delays up to `l_max`: `c1 = (2⌈ν_max⌉+1)/(2N)`, `c2 = 1/(2N)` and the
    /// shortest legal prefix `N_CPP = l_max`.
    pub fn with_defaults(n_subcarriers: usize, nu_max: f64, l_max: usize, modulation: Modulation) -> Result<Self> {
        Self::new(
            n_subcarriers,
            default_c1(n_subcarriers, nu_max),
            default_c2(n_subcarriers),
            l_max,
            modulation,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_subcarriers;
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!("n_subcarriers must be even and at least 2, got {n}")));
        }
        if !self.c1.is_finite() || !self.c2.is_finite() {
            return Err(Error::InvalidConfig("chirp rates must be finite".into()));
        }
        if self.cpp_len >= n {
            return Err(Error::InvalidConfig(format!(
                "cpp_len {} must be shorter than the frame ({n})",
                self.cpp_len
            )));
        }
        Ok(())
    }

    pub fn constellation(&self) -> Constellation {
        Constellation::new(self.modulation)
    }
}

pub fn default_c1(n: usize, nu_max: f64) -> f64 {
    (2.0 * nu_max.max(0.0).ceil() + 1.0) / (2.0 * n as f64)
}

pub fn default_c2(n: usize) -> f64 {
    1.0 / (2.0 * n as f64)
}

/// Dense DAFT matrix `Λ_c2 F Λ_c1` for any `n ≥ 1`.
pub fn daft_matrix(n: usize, c1: f64, c2: f64) -> Result<Mat<C64>> {
    if n == 0 {
        return Err(Error::InvalidConfig("transform size must be positive".into()));
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok(Mat::from_fn(n, n, |m, k| {
        let turns = c2 * (m * m) as f64 + ((m * k) % n) as f64 / n as f64 + c1 * (k * k) as f64;
        phasor(turns) * scale
    }))
}

/// Dense DAFT matrix of a validated configuration.
pub fn build_daft_matrix(config: &AfdmConfig) -> Result<Mat<C64>> {
    config.validate()?;
    daft_matrix(config.n_subcarriers, config.c1, config.c2)
}

/// Fast DAFT plus prefix handling for one waveform configuration.
#[derive(Clone)]
pub struct Daft {
    n: usize,
    c1: f64,
    c2: f64,
    cpp_len: usize,
    chirp1: Vec<C64>,
    chirp2: Vec<C64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Daft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Daft")
            .field("n", &self.n)
            .field("c1", &self.c1)
            .field("c2", &self.c2)
            .field("cpp_len", &self.cpp_len)
            .finish()
    }
}

impl Daft {
    pub fn new(config: &AfdmConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self::with_params(config.n_subcarriers, config.c1, config.c2, config.cpp_len))
    }

    /// Transform without configuration checks (any `n ≥ 1`).
    pub fn with_params(n: usize, c1: f64, c2: f64, cpp_len: usize) -> Self {
        assert!(n > 0, "transform size must be positive");
        let mut planner = FftPlanner::new();
        Self {
            n,
            c1,
            c2,
            cpp_len,
            chirp1: (0..n).map(|k| phasor(c1 * (k * k) as f64)).collect(),
            chirp2: (0..n).map(|k| phasor(c2 * (k * k) as f64)).collect(),
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn cpp_len(&self) -> usize {
        self.cpp_len
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn matrix(&self) -> Mat<C64> {
        daft_matrix(self.n, self.c1, self.c2).expect("n > 0")
    }

    fn book(&self) {
        let n = self.n as u64;
        let log2 = (self.n as f64).log2().ceil() as u64;
        // two chirp diagonals, radix-2 butterflies, 1/√N scaling
        flops::add(8 * n + 2 * n * log2 + 2 * n);
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: len,
            });
        }
        Ok(())
    }

    /// `A·v` in place.
    pub fn forward_in_place(&self, v: &mut [C64]) -> Result<()> {
        self.check(v.len())?;
        let scale = 1.0 / (self.n as f64).sqrt();
        v.iter_mut().zip(&self.chirp1).for_each(|(x, c)| *x *= c);
        self.fft.process(v);
        v.iter_mut().zip(&self.chirp2).for_each(|(x, c)| *x *= c * scale);
        self.book();
        Ok(())
    }

    /// `Aᴴ·v` in place.
    pub fn inverse_in_place(&self, v: &mut [C64]) -> Result<()> {
        self.check(v.len())?;
        let scale = 1.0 / (self.n as f64).sqrt();
        v.iter_mut().zip(&self.chirp2).for_each(|(x, c)| *x *= c.conj());
        self.ifft.process(v);
        v.iter_mut().zip(&self.chirp1).for_each(|(x, c)| *x *= c.conj() * scale);
        self.book();
        Ok(())
    }

    pub fn forward(&self, v: &[C64]) -> Result<Vec<C64>> {
        let mut out = v.to_vec();
        self.forward_in_place(&mut out)?;
        Ok(out)
    }

    pub fn inverse(&self, v: &[C64]) -> Result<Vec<C64>> {
        let mut out = v.to_vec();
        self.inverse_in_place(&mut out)?;
        Ok(out)
    }

    /// Phase carried by prefix sample `k < cpp_len`, relative to the data
    /// sample it copies.
    pub fn prefix_phase(&self, k: usize) -> C64 {
        let n = self.n as i64;
        let turns = n * n - 2 * n * (self.cpp_len as i64 - k as i64);
        phasor(self.c1 * turns as f64)
    }

    /// Prepends the chirp-periodic prefix to a block of time samples.
    pub fn add_prefix(&self, time_samples: &[C64]) -> Result<Vec<C64>> {
        self.check(time_samples.len())?;
        let (n, cpp) = (self.n, self.cpp_len);
        let mut tx = Vec::with_capacity(n + cpp);
        tx.extend((0..cpp).map(|k| time_samples[n - cpp + k] * self.prefix_phase(k)));
        tx.extend_from_slice(time_samples);
        Ok(tx)
    }

    pub fn modulate(&self, af_symbols: &[C64]) -> Result<Vec<C64>> {
        let s = self.inverse(af_symbols)?;
        self.add_prefix(&s)
    }

    pub fn demodulate(&self, rx_samples: &[C64]) -> Result<Vec<C64>> {
        let expected = self.n + self.cpp_len;
        if rx_samples.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: rx_samples.len(),
            });
        }
        self.forward(&rx_samples[self.cpp_len..])
    }
}

/// One transmitted AFDM block.
#[derive(Clone, Debug, PartialEq)]
pub struct AfdmFrame {
    pub af_symbols: Vec<C64>,
    pub time_samples: Vec<C64>,
    pub tx_samples: Vec<C64>,
}

impl AfdmFrame {
    pub fn new(af_symbols: Vec<C64>, daft: &Daft) -> Result<Self> {
        let time_samples = daft.inverse(&af_symbols)?;
        let tx_samples = daft.add_prefix(&time_samples)?;
        Ok(Self {
            af_symbols,
            time_samples,
            tx_samples,
        })
    }
}

pub fn modulate(af_symbols: &[C64], config: &AfdmConfig) -> Result<Vec<C64>> {
    Daft::new(config)?.modulate(af_symbols)
}

pub fn demodulate(rx_samples: &[C64], config: &AfdmConfig) -> Result<Vec<C64>> {
    Daft::new(config)?.demodulate(rx_samples)
}
