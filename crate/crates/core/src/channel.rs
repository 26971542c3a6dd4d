//! Doubly-selective multipath channels: sampling, matrix-free application,
//! the time-domain matrix `H_T`, the AF-domain matrix `H_AF = A H_T Aᴴ`,
//! band probes and a text dump format.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::str::FromStr;

use faer::Mat;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::waveform::{phasor, Daft};
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DopplerMode {
    /// All paths static (frequency-selective).
    None,
    /// Jakes draw rounded to the nearest integer.
    IntegerOnly,
    /// `ν = ν_max cos ω`, `ω ~ U[−π, π)`.
    Jakes,
}

impl FromStr for DopplerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(DopplerMode::None),
            "integer" | "integer-only" => Ok(DopplerMode::IntegerOnly),
            "jakes" => Ok(DopplerMode::Jakes),
            _ => Err(Error::InvalidConfig(format!("unknown doppler mode {s:?}"))),
        }
    }
}

/// Statistical description of the channel: `P` paths on delays `0..P`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    pub num_paths: usize,
    pub nu_max: f64,
    pub doppler_mode: DopplerMode,
}

impl ChannelProfile {
    pub fn new(num_paths: usize, nu_max: f64, doppler_mode: DopplerMode) -> Result<Self> {
        let p = Self {
            num_paths,
            nu_max,
            doppler_mode,
        };
        p.validate()?;
        Ok(p)
    }

    /// Static multipath, `ν = 0` on every path.
    pub fn frequency_selective(num_paths: usize) -> Result<Self> {
        Self::new(num_paths, 0.0, DopplerMode::None)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_paths == 0 {
            return Err(Error::InvalidConfig("num_paths must be at least 1".into()));
        }
        if !(self.nu_max >= 0.0) || !self.nu_max.is_finite() {
            return Err(Error::InvalidConfig(format!("nu_max must be finite and nonnegative, got {}", self.nu_max)));
        }
        Ok(())
    }

    pub fn l_max(&self) -> usize {
        self.num_paths - 1
    }

    /// Short class label used in reports: `fs` or `ds`.
    pub fn class(&self) -> &'static str {
        if self.doppler_mode == DopplerMode::None || self.nu_max == 0.0 {
            "fs"
        } else {
            "ds"
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Path {
    pub gain: C64,
    pub delay: usize,
    /// Normalized Doppler `ν = α + β`.
    pub doppler: f64,
    pub alpha: i64,
    pub beta: f64,
}

impl Path {
    pub fn new(gain: C64, delay: usize, doppler: f64) -> Self {
        let alpha = (doppler + 0.5).floor();
        Self {
            gain,
            delay,
            doppler,
            alpha: alpha as i64,
            beta: doppler - alpha,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub paths: Vec<Path>,
}

impl ChannelRealization {
    pub fn new(paths: Vec<Path>) -> Result<Self> {
        let mut delays: Vec<usize> = paths.iter().map(|p| p.delay).collect();
        delays.sort_unstable();
        if delays.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("path delays must be distinct".into()));
        }
        Ok(Self { paths })
    }

    /// Single unit path without delay or Doppler.
    pub fn identity() -> Self {
        Self {
            paths: vec![Path::new(C64::new(1.0, 0.0), 0, 0.0)],
        }
    }

    pub fn l_max(&self) -> usize {
        self.paths.iter().map(|p| p.delay).max().unwrap_or(0)
    }

    fn check_prefix(&self, cpp_len: usize) -> Result<()> {
        match self.paths.iter().find(|p| p.delay > cpp_len) {
            Some(p) => Err(Error::DelayExceedsPrefix { delay: p.delay, cpp_len }),
            None => Ok(()),
        }
    }

    /// `(row, coefficient)` pairs of column `m` of `H_T`, one per path.
    pub(crate) fn time_column(&self, daft: &Daft, m: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let n = daft.len();
        let c1 = daft.c1();
        self.paths.iter().map(move |p| {
            let row = (m + p.delay) % n;
            (row, path_coefficient(p, row, n, c1))
        })
    }
}

/// `H_T[row, (row − l) mod N]` for one path.
fn path_coefficient(p: &Path, row: usize, n: usize, c1: f64) -> C64 {
    let doppler = phasor(p.doppler * row as f64 / n as f64);
    let mut coef = p.gain * doppler;
    if row < p.delay {
        let n_ = n as i64;
        let turns = n_ * n_ - 2 * n_ * (p.delay as i64 - row as i64);
        coef *= phasor(c1 * turns as f64);
    }
    coef
}

/// Draws gains `h ~ CN(0, 1/P)` on delays `0..P` and per-path Doppler.
pub fn sample_channel<R: Rng + ?Sized>(profile: &ChannelProfile, rng: &mut R) -> ChannelRealization {
    let p = profile.num_paths;
    let std = (0.5 / p as f64).sqrt();
    let paths = (0..p)
        .map(|i| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let doppler = match profile.doppler_mode {
                DopplerMode::None => 0.0,
                mode => {
                    let omega = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                    let nu = profile.nu_max * omega.cos();
                    if mode == DopplerMode::IntegerOnly {
                        nu.round()
                    } else {
                        nu
                    }
                }
            };
            Path::new(C64::new(re * std, im * std), i, doppler)
        })
        .collect();
    ChannelRealization { paths }
}

/// `H_T = Σ h_i Γ_i Δ_{ν_i} Π^{l_i}`, built entry by entry.
pub fn build_time_matrix(realization: &ChannelRealization, daft: &Daft) -> Result<Mat<C64>> {
    realization.check_prefix(daft.cpp_len())?;
    let n = daft.len();
    let mut h = Mat::<C64>::zeros(n, n);
    for m in 0..n {
        for (row, coef) in realization.time_column(daft, m) {
            h[(row, m)] += coef;
        }
    }
    Ok(h)
}

/// `A H_T Aᴴ` with fast transforms on the columns, then on the rows.
pub fn build_af_matrix(h_t: &Mat<C64>, daft: &Daft) -> Result<Mat<C64>> {
    let n = daft.len();
    if h_t.nrows() != n || h_t.ncols() != n {
        return Err(Error::Shape(format!("expected {n}x{n}, got {}x{}", h_t.nrows(), h_t.ncols())));
    }
    // Z = A H_T by columns, then H_AF = (A Zᴴ)ᴴ
    let mut z = Mat::<C64>::zeros(n, n);
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        buf.iter_mut().enumerate().for_each(|(i, v)| *v = h_t[(i, j)]);
        daft.forward_in_place(&mut buf)?;
        buf.iter().enumerate().for_each(|(i, v)| z[(i, j)] = *v);
    }
    let mut out = Mat::<C64>::zeros(n, n);
    for i in 0..n {
        buf.iter_mut().enumerate().for_each(|(j, v)| *v = z[(i, j)].conj());
        daft.forward_in_place(&mut buf)?;
        buf.iter().enumerate().for_each(|(j, v)| out[(i, j)] = v.conj());
    }
    Ok(out)
}

/// Time-varying convolution of the prefixed frame with the path taps,
/// plus `CN(0, noise_var)` noise on every sample. Doppler phases are
/// referenced to the first data sample.
pub fn apply_channel<R: Rng + ?Sized>(
    tx_samples: &[C64],
    realization: &ChannelRealization,
    daft: &Daft,
    noise_var: f64,
    rng: &mut R,
) -> Result<Vec<C64>> {
    if !(noise_var >= 0.0) {
        return Err(Error::NegativeNoise(noise_var));
    }
    let (n, cpp) = (daft.len(), daft.cpp_len());
    if tx_samples.len() != n + cpp {
        return Err(Error::LengthMismatch {
            expected: n + cpp,
            actual: tx_samples.len(),
        });
    }
    realization.check_prefix(cpp)?;
    let mut rx = vec![C64::new(0.0, 0.0); n + cpp];
    for p in &realization.paths {
        for k in p.delay..n + cpp {
            let ph = phasor(p.doppler * (k as f64 - cpp as f64) / n as f64);
            rx[k] += p.gain * ph * tx_samples[k - p.delay];
        }
    }
    if noise_var > 0.0 {
        let std = (noise_var / 2.0).sqrt();
        for v in rx.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v += C64::new(re * std, im * std);
        }
    }
    Ok(rx)
}

/// Energy and leakage of a matrix relative to a cyclic band.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandProfile {
    pub in_band_energy_fraction: f64,
    pub max_out_of_band: f64,
}

/// Band of cyclic halfwidth `b`: entries with `min(|i−j|, n−|i−j|) ≤ b`.
pub fn band_profile(m: &Mat<C64>, b: usize) -> Result<BandProfile> {
    let b = b as isize;
    band_window_profile(m, -b, b)
}

/// Band on the cyclic offsets `(j − i) mod n ∈ [lo, hi]`.
pub fn band_window_profile(m: &Mat<C64>, lo: isize, hi: isize) -> Result<BandProfile> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Shape(format!("expected a square matrix, got {}x{}", n, m.ncols())));
    }
    let (mut inside, mut total, mut leak) = (0.0, 0.0, 0f64);
    for i in 0..n {
        for j in 0..n {
            let e = m[(i, j)].norm_sqr();
            total += e;
            let d = (j as isize - i as isize).rem_euclid(n as isize);
            let in_band = (d - lo).rem_euclid(n as isize) <= hi - lo;
            if in_band {
                inside += e;
            } else {
                leak = leak.max(e.sqrt());
            }
        }
    }
    Ok(BandProfile {
        in_band_energy_fraction: if total > 0.0 { inside / total } else { 1.0 },
        max_out_of_band: leak,
    })
}

/// Narrowest cyclic offset window holding every entry above `tol`.
pub fn complex_window(m: &Mat<C64>, tol: f64) -> Option<(isize, isize)> {
    crate::banded::cyclic_window(m.nrows(), tol, |i, j| m[(i, j)].norm())
}

fn format_entry(out: &mut String, z: C64) {
    let _ = write!(out, "{}{}{}i", z.re, if z.im.is_sign_negative() { "-" } else { "+" }, z.im.abs());
}

/// One line per row, comma-separated `re±imi` entries.
pub fn write_matrix_csv<W: Write>(m: &Mat<C64>, mut w: W) -> Result<()> {
    let mut line = String::new();
    for i in 0..m.nrows() {
        line.clear();
        for j in 0..m.ncols() {
            if j > 0 {
                line.push(',');
            }
            format_entry(&mut line, m[(i, j)]);
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

fn parse_entry(s: &str) -> Result<C64> {
    let s = s.trim();
    let body = s.strip_suffix('i').ok_or_else(|| Error::Parse(format!("entry {s:?} lacks imaginary unit")))?;
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'))
        .ok_or_else(|| Error::Parse(format!("entry {s:?} lacks a sign between parts")))?;
    let re: f64 = body[..split].parse().map_err(|_| Error::Parse(format!("bad real part in {s:?}")))?;
    let im: f64 = body[split..].parse().map_err(|_| Error::Parse(format!("bad imaginary part in {s:?}")))?;
    Ok(C64::new(re, im))
}

pub fn read_matrix_csv<R: BufRead>(r: R) -> Result<Mat<C64>> {
    let mut rows: Vec<Vec<C64>> = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(line.split(',').map(parse_entry).collect::<Result<_>>()?);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("ragged matrix rows".into()));
    }
    Ok(Mat::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{AfdmConfig, Modulation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn daft(n: usize, nu_max: f64, l_max: usize) -> Daft {
        Daft::new(&AfdmConfig::with_defaults(n, nu_max, l_max, Modulation::Qam4).unwrap()).unwrap()
    }

    fn max_diff(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn mat_vec(m: &Mat<C64>, v: &[C64]) -> Vec<C64> {
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum()).collect()
    }

    #[test]
    fn profile_validation() {
        assert!(ChannelProfile::new(0, 0.0, DopplerMode::None).is_err());
        assert!(ChannelProfile::new(2, -1.0, DopplerMode::Jakes).is_err());
        assert_eq!(ChannelProfile::new(9, 0.0, DopplerMode::None).unwrap().l_max(), 8);
        assert!("sideways".parse::<DopplerMode>().is_err());
    }

    #[test]
    fn doppler_split() {
        for (nu, a, b) in [(0.3, 0, 0.3), (0.7, 1, -0.3), (-0.5, 0, -0.5), (0.5, 1, -0.5), (-1.2, -1, -0.2)] {
            let p = Path::new(C64::new(1.0, 0.0), 0, nu);
            assert_eq!(p.alpha, a, "nu={nu}");
            assert!((p.beta - b).abs() < 1e-12);
            assert!((-0.5..0.5).contains(&p.beta));
        }
    }

    #[test]
    fn static_profile_has_no_doppler() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = sample_channel(&ChannelProfile::frequency_selective(4).unwrap(), &mut rng);
        assert!(r.paths.iter().all(|p| p.doppler == 0.0));
        assert_eq!(r.paths.iter().map(|p| p.delay).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn jakes_bounds_and_gain_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let profile = ChannelProfile::new(8, 1.0, DopplerMode::Jakes).unwrap();
        let draws = 100_000;
        let mut energy = 0.0;
        let mut energy_sq = 0.0;
        for _ in 0..draws {
            let r = sample_channel(&profile, &mut rng);
            assert!(r.paths.iter().all(|p| p.doppler.abs() <= 1.0));
            let e = r.paths[3].gain.norm_sqr();
            energy += e;
            energy_sq += e * e;
        }
        let mean = energy / draws as f64;
        let sd = ((energy_sq / draws as f64 - mean * mean) / draws as f64).sqrt();
        assert!((mean - 0.125).abs() < 3.0 * sd, "mean {mean} sd {sd}");
        let integer = ChannelProfile::new(3, 2.0, DopplerMode::IntegerOnly).unwrap();
        let r = sample_channel(&integer, &mut rng);
        assert!(r.paths.iter().all(|p| p.doppler.fract() == 0.0 && p.beta == 0.0));
    }

    #[test]
    fn single_path_time_matrices() {
        let d = daft(16, 1.0, 0);
        let h = build_time_matrix(&ChannelRealization::identity(), &d).unwrap();
        assert!((h - Mat::<C64>::identity(16, 16)).norm_max() < 1e-15);
        let r = ChannelRealization::new(vec![Path::new(C64::new(1.0, 0.0), 0, 1.0)]).unwrap();
        let h = build_time_matrix(&r, &d).unwrap();
        for i in 0..16 {
            let e = C64::from_polar(1.0, -2.0 * std::f64::consts::PI * i as f64 / 16.0);
            assert!((h[(i, i)] - e).norm() < 1e-12);
        }
    }

    #[test]
    fn delay_beyond_prefix_is_rejected() {
        let d = Daft::new(&AfdmConfig::new(16, 0.1, 0.0, 1, Modulation::Qam4).unwrap()).unwrap();
        let r = ChannelRealization::new(vec![Path::new(C64::new(1.0, 0.0), 2, 0.0)]).unwrap();
        assert!(matches!(build_time_matrix(&r, &d), Err(Error::DelayExceedsPrefix { delay: 2, cpp_len: 1 })));
    }

    #[test]
    fn matrix_free_agrees_with_time_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // non-integer 2N·c1 so the prefix phases are not trivial
        let cfg = AfdmConfig::new(32, 0.0371, 0.011, 5, Modulation::Qam4).unwrap();
        let d = Daft::new(&cfg).unwrap();
        let profile = ChannelProfile::new(5, 1.3, DopplerMode::Jakes).unwrap();
        for _ in 0..5 {
            let r = sample_channel(&profile, &mut rng);
            let x: Vec<C64> = (0..32).map(|i| C64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
            let tx = d.modulate(&x).unwrap();
            let rx = apply_channel(&tx, &r, &d, 0.0, &mut rng).unwrap();
            let h = build_time_matrix(&r, &d).unwrap();
            let s = d.inverse(&x).unwrap();
            assert!(max_diff(&rx[5..], &mat_vec(&h, &s)) < 1e-10);
            let h_af = build_af_matrix(&h, &d).unwrap();
            assert!(max_diff(&d.demodulate(&rx).unwrap(), &mat_vec(&h_af, &x)) < 1e-9);
        }
    }

    #[test]
    fn af_matrix_of_identity() {
        let d = daft(16, 1.0, 2);
        let h = build_af_matrix(&Mat::<C64>::identity(16, 16), &d).unwrap();
        assert!((h - Mat::<C64>::identity(16, 16)).norm_max() < 1e-12);
    }

    #[test]
    fn noise_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 100_000;
        let d = Daft::with_params(n, 0.0, 0.0, 0);
        let rx = apply_channel(&vec![C64::new(0.0, 0.0); n], &ChannelRealization::identity(), &d, 1.0, &mut rng).unwrap();
        let var = rx.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        // var of |w|² for unit complex Gaussian is 1
        assert!((var - 1.0).abs() < 3.0 / (n as f64).sqrt(), "{var}");
        assert!(matches!(
            apply_channel(&rx, &ChannelRealization::identity(), &d, -1.0, &mut rng),
            Err(Error::NegativeNoise(_))
        ));
    }

    #[test]
    fn identity_channel_passes_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = daft(16, 0.0, 2);
        let tx: Vec<C64> = (0..18).map(|i| C64::new(i as f64, 1.0)).collect();
        let rx = apply_channel(&tx, &ChannelRealization::identity(), &d, 0.0, &mut rng).unwrap();
        assert_eq!(rx, tx);
    }

    #[test]
    fn band_profile_of_identity() {
        let p = band_profile(&Mat::<C64>::identity(8, 8), 0).unwrap();
        assert_eq!(p.in_band_energy_fraction, 1.0);
        assert_eq!(p.max_out_of_band, 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let m = Mat::from_fn(3, 2, |i, j| C64::new(i as f64 - 1.5e-7, -(j as f64) * 0.1 + 1e-300));
        let mut buf = Vec::new();
        write_matrix_csv(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().contains("i,"));
        let back = read_matrix_csv(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert_eq!(parse_entry("1e-5-2E+3i").unwrap(), C64::new(1e-5, -2e3));
        assert!(parse_entry("1.0").is_err());
    }
}
