use faer::Mat;

use crate::banded::{block_psi_inverse_with, dense_inverse, spd_inverse, BlockInverseOptions, QuasiBandedMatrix};
use crate::waveform::Daft;
use crate::{flops, Error, Result};

use super::real_model::{Domain, RealSystemModel};
use super::transform::{transform_stats_af_to_time, transform_stats_time_to_af};
use super::DetectorOutput;

/// Cavities with `1 − σ²λ` at or below this are treated as invalid.
pub const CAVITY_THRESHOLD: f64 = 1e-9;
/// Floor on discrete-moment variances.
pub const VARIANCE_FLOOR: f64 = 1e-12;
/// Relative residual at which the refined banded solve for `μ` stops.
const REFINE_TOL: f64 = 1e-6;
const REFINE_MAX_STEPS: usize = 30;
/// First-pass relative residual above which the truncation windows double.
const WIDEN_RESIDUAL: f64 = 0.05;

/// How `Ψ⁻¹` is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Inversion {
    /// Full `2N × 2N` inverse.
    Dense,
    /// Quasi-banded block inverse with triangular inverses truncated at
    /// `φ = k·l_max`, where `l_max` is the halfwidth of the Gram band.
    QuasiBanded { k: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpConfig {
    pub iterations: usize,
    pub damping: f64,
    pub inversion: Inversion,
}

impl Default for EpConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            damping: 0.2,
            inversion: Inversion::QuasiBanded { k: 8 },
        }
    }
}

impl EpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidConfig(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if let Inversion::QuasiBanded { k: 0 } = self.inversion {
            return Err(Error::InvalidConfig("band parameter k must be positive".into()));
        }
        Ok(())
    }
}

/// Natural parameters of the Gaussian site factors, one per real unknown.
#[derive(Clone, Debug, PartialEq)]
pub struct EpSiteParams {
    pub lambda: Vec<f64>,
    pub gamma: Vec<f64>,
    pub iteration: usize,
}

impl EpSiteParams {
    /// Prior-matched start: `λ = 1/prior_var`, `γ = 0`.
    pub fn new(len: usize, prior_var: f64) -> Self {
        Self {
            lambda: vec![1.0 / prior_var; len],
            gamma: vec![0.0; len],
            iteration: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StatsRole {
    Posterior,
    Cavity,
    DiscreteMoments,
}

/// Means and diagonal variances of a factorized Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub role: StatsRole,
    pub domain: Domain,
}

/// Cavity statistics with the per-site validity flags.
#[derive(Clone, Debug, PartialEq)]
pub struct Cavity {
    pub stats: GaussianStats,
    pub valid: Vec<bool>,
}

#[derive(Clone, Debug)]
enum Kernel {
    Dense {
        gram: Mat<f64>,
    },
    Banded {
        re: QuasiBandedMatrix,
        im: QuasiBandedMatrix,
        options: BlockInverseOptions,
    },
}

/// Per-frame state of the Gaussian posterior: the scaled Gram `σ⁻²HᵀH` and
/// `σ⁻²Hᵀy`, built once and reused by every EP iteration.
#[derive(Clone, Debug)]
pub struct PosteriorEngine {
    kernel: Kernel,
    hty: Vec<f64>,
    domain: Domain,
}

impl PosteriorEngine {
    pub fn new(model: &RealSystemModel, inversion: Inversion) -> Result<Self> {
        let s = 1.0 / model.noise_var();
        let n = model.n();
        let (kernel, mut hty) = match inversion {
            Inversion::Dense => {
                let mut gram = model.gram_dense();
                gram *= faer::Scale(s);
                flops::add((4 * n * n) as u64);
                (Kernel::Dense { gram }, model.hty_dense())
            }
            Inversion::QuasiBanded { k } => {
                let (mut re, mut im) = model.gram_banded();
                re.scale(s);
                im.scale(s);
                let band = re.halfwidth().max(im.halfwidth());
                let phi = k.saturating_mul(band.max(1));
                let options = BlockInverseOptions::new(n, phi, band);
                (Kernel::Banded { re, im, options }, model.hty_banded())
            }
        };
        hty.iter_mut().for_each(|v| *v *= s);
        flops::add(2 * n as u64);
        Ok(Self {
            kernel,
            hty,
            domain: model.domain(),
        })
    }

    pub fn len(&self) -> usize {
        self.hty.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hty.is_empty()
    }

    /// `Σ = Ψ⁻¹` with `Ψ = σ⁻²HᵀH + diag(λ)`; returns `μ = Σ(σ⁻²Hᵀy + γ)` and
    /// `diag Σ`.
    pub fn posterior(&self, sites: &EpSiteParams) -> Result<GaussianStats> {
        let m = self.len();
        if sites.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                actual: sites.len(),
            });
        }
        if let Some(i) = sites.lambda.iter().position(|&l| !(l > 0.0)) {
            return Err(Error::InvalidConfig(format!("site precision {i} is not positive")));
        }
        let v: Vec<f64> = self.hty.iter().zip(&sites.gamma).map(|(a, b)| a + b).collect();
        let (mean, var) = match &self.kernel {
            Kernel::Dense { gram } => {
                let mut psi = gram.clone();
                for (i, l) in sites.lambda.iter().enumerate() {
                    psi[(i, i)] += l;
                }
                let sigma = match spd_inverse(&psi) {
                    Ok(s) => s,
                    Err(_) => dense_inverse(&psi)?,
                };
                let mean: Vec<f64> = (0..m).map(|i| (0..m).map(|j| sigma[(i, j)] * v[j]).sum()).collect();
                flops::add((m * m) as u64);
                (mean, (0..m).map(|i| sigma[(i, i)]).collect())
            }
            Kernel::Banded { re, im, options } => {
                let n = m / 2;
                let (lh, lc) = sites.lambda.split_at(n);
                let mut b = re.clone();
                b.add_diagonal(lh);
                let d: Vec<f64> = lc.iter().zip(lh).map(|(c, h)| c - h).collect();
                // near-singular channels decay too slowly for the windows;
                // the first residual exposes them and the windows grow
                let mut options = *options;
                let (inv, start) = loop {
                    let inv = block_psi_inverse_with(&b, im, &d, options)?;
                    let start = inv.start(&v)?;
                    if start.relative_residual <= WIDEN_RESIDUAL || options.is_exact(n) {
                        break (inv, start);
                    }
                    options = options.widened(n);
                };
                let (mean, _) = inv.refine(&v, start, REFINE_TOL, REFINE_MAX_STEPS)?;
                // 1/Ψᵢᵢ ≤ Σᵢᵢ ≤ 1/λᵢ holds exactly; an approximation outside
                // that range carries no information, so it reports the site
                // variance and leaves the site untouched
                let var = inv
                    .diag()
                    .iter()
                    .enumerate()
                    .map(|(i, &s2)| {
                        let psi = if i < n { b.get(i, i) } else { b.get(i - n, i - n) + d[i - n] };
                        let upper = 1.0 / sites.lambda[i];
                        if s2 * psi >= 1.0 && s2 <= upper {
                            s2
                        } else {
                            upper
                        }
                    })
                    .collect();
                flops::add(2 * m as u64);
                (mean, var)
            }
        };
        Ok(GaussianStats {
            mean,
            var,
            role: StatsRole::Posterior,
            domain: self.domain,
        })
    }
}

/// Gaussian posterior of the model under the given sites.
pub fn ep_posterior(model: &RealSystemModel, sites: &EpSiteParams, inversion: Inversion) -> Result<GaussianStats> {
    PosteriorEngine::new(model, inversion)?.posterior(sites)
}

/// Removes each site from its posterior marginal:
/// `ζ² = σ²/(1 − σ²λ)`, `η = ζ²(μ/σ² − γ)`. Sites with
/// `1 − σ²λ ≤` [`CAVITY_THRESHOLD`] are flagged and fall back to the
/// posterior marginal itself.
pub fn ep_cavity(posterior: &GaussianStats, sites: &EpSiteParams) -> Result<Cavity> {
    let m = posterior.mean.len();
    if sites.len() != m || posterior.var.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            actual: sites.len(),
        });
    }
    let mut mean = Vec::with_capacity(m);
    let mut var = Vec::with_capacity(m);
    let mut valid = Vec::with_capacity(m);
    for i in 0..m {
        let (mu, s2, l, g) = (posterior.mean[i], posterior.var[i], sites.lambda[i], sites.gamma[i]);
        let gap = 1.0 - s2 * l;
        if gap > CAVITY_THRESHOLD && s2 > 0.0 {
            let z2 = s2 / gap;
            let eta = z2 * (mu / s2 - g);
            debug_assert!(
                (1.0 / z2 + l - 1.0 / s2).abs() <= 1e-8 * (1.0 / s2).max(1.0),
                "cavity precision identity violated at {i}"
            );
            debug_assert!(
                (eta / z2 + g - mu / s2).abs() <= 1e-8 * (mu / s2).abs().max(1.0),
                "cavity mean identity violated at {i}"
            );
            mean.push(eta);
            var.push(z2);
            valid.push(true);
        } else {
            mean.push(mu);
            var.push(s2.max(VARIANCE_FLOOR));
            valid.push(false);
        }
    }
    flops::add(6 * m as u64);
    Ok(Cavity {
        stats: GaussianStats {
            mean,
            var,
            role: StatsRole::Cavity,
            domain: posterior.domain,
        },
        valid,
    })
}

/// Mean and variance of each cavity restricted to the alphabet:
/// `p(a) ∝ exp(−(a − η)²/(2ζ²))`.
pub fn discrete_moments(cavity: &GaussianStats, alphabet: &[f64]) -> Result<GaussianStats> {
    if alphabet.is_empty() {
        return Err(Error::InvalidConfig("empty alphabet".into()));
    }
    let m = cavity.mean.len();
    let mut mean = Vec::with_capacity(m);
    let mut var = Vec::with_capacity(m);
    let mut logw = vec![0.0; alphabet.len()];
    for (&eta, &z2) in cavity.mean.iter().zip(&cavity.var) {
        if !(z2 > 0.0) {
            return Err(Error::InvalidConfig(format!("cavity variance must be positive, got {z2}")));
        }
        for (w, a) in logw.iter_mut().zip(alphabet) {
            *w = -(a - eta) * (a - eta) / (2.0 * z2);
        }
        let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mut s0, mut s1) = (0.0, 0.0);
        for (w, a) in logw.iter_mut().zip(alphabet) {
            *w = (*w - top).exp();
            s0 += *w;
            s1 += *w * a;
        }
        let k = s1 / s0;
        // central second moment avoids cancelling E[a²] against k²
        let s2: f64 = logw.iter().zip(alphabet).map(|(p, a)| p * (a - k) * (a - k)).sum();
        mean.push(k);
        var.push((s2 / s0).max(VARIANCE_FLOOR));
    }
    flops::add((m * 6 * alphabet.len()) as u64);
    Ok(GaussianStats {
        mean,
        var,
        role: StatsRole::DiscreteMoments,
        domain: cavity.domain,
    })
}

/// Damped moment-matching update. Sites whose cavity was flagged or whose
/// new precision is not positive keep their previous parameters.
pub fn ep_update_sites(
    sites: &EpSiteParams,
    cavity: &Cavity,
    moments: &GaussianStats,
    damping: f64,
) -> Result<EpSiteParams> {
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::InvalidConfig(format!("damping must lie in (0, 1], got {damping}")));
    }
    let m = sites.len();
    for len in [cavity.valid.len(), cavity.stats.mean.len(), moments.mean.len(), moments.var.len()] {
        if len != m {
            return Err(Error::LengthMismatch { expected: m, actual: len });
        }
    }
    let mut next = sites.clone();
    next.iteration += 1;
    for i in 0..m {
        if !cavity.valid[i] {
            continue;
        }
        let (eta, z2) = (cavity.stats.mean[i], cavity.stats.var[i]);
        let (k, c2) = (moments.mean[i], moments.var[i]);
        let l = damping * (1.0 / c2 - 1.0 / z2) + (1.0 - damping) * sites.lambda[i];
        if l > 0.0 {
            next.lambda[i] = l;
            next.gamma[i] = damping * (k / c2 - eta / z2) + (1.0 - damping) * sites.gamma[i];
        }
    }
    flops::add(10 * m as u64);
    Ok(next)
}

fn prior_sites(model: &RealSystemModel) -> EpSiteParams {
    EpSiteParams::new(2 * model.n(), model.constellation().dimension_variance())
}

/// EP detection with the discrete prior imposed directly on the AF-domain
/// unknowns. Decisions slice the final posterior mean.
pub fn ep_af_detect(model: &RealSystemModel, config: &EpConfig) -> Result<DetectorOutput> {
    config.validate()?;
    if model.domain() != Domain::Af {
        return Err(Error::InvalidConfig("AF-domain EP needs an AF-domain model".into()));
    }
    let (res, mults) = flops::measure(|| -> Result<_> {
        let engine = PosteriorEngine::new(model, config.inversion)?;
        let mut sites = prior_sites(model);
        for _ in 0..config.iterations {
            let post = engine.posterior(&sites)?;
            let cavity = ep_cavity(&post, &sites)?;
            let moments = discrete_moments(&cavity.stats, model.alphabet())?;
            sites = ep_update_sites(&sites, &cavity, &moments, config.damping)?;
        }
        let post = engine.posterior(&sites)?;
        Ok(model.decide(&post.mean))
    });
    Ok(DetectorOutput {
        hard_symbols: res?,
        iterations_used: config.iterations,
        mult_count: mults,
    })
}

/// Dual-domain EP: the Gaussian posterior lives in the time domain, the
/// discrete prior is imposed after moving the cavities to the AF domain.
pub fn ep_t_detect(model: &RealSystemModel, daft: &Daft, config: &EpConfig) -> Result<DetectorOutput> {
    config.validate()?;
    if model.domain() != Domain::Time {
        return Err(Error::InvalidConfig("time-domain EP needs a time-domain model".into()));
    }
    if daft.len() != model.n() {
        return Err(Error::LengthMismatch {
            expected: model.n(),
            actual: daft.len(),
        });
    }
    let (res, mults) = flops::measure(|| -> Result<_> {
        let engine = PosteriorEngine::new(model, config.inversion)?;
        let mut sites = prior_sites(model);
        for _ in 0..config.iterations {
            let post = engine.posterior(&sites)?;
            let cavity = ep_cavity(&post, &sites)?;
            let (eta, zeta) = transform_stats_time_to_af(&cavity.stats.mean, &cavity.stats.var, daft)?;
            let af = GaussianStats {
                mean: eta,
                var: zeta,
                role: StatsRole::Cavity,
                domain: Domain::Af,
            };
            let moments = discrete_moments(&af, model.alphabet())?;
            let (kappa, chi) = transform_stats_af_to_time(&moments.mean, &moments.var, daft)?;
            let moments = GaussianStats {
                mean: kappa,
                var: chi,
                role: StatsRole::DiscreteMoments,
                domain: Domain::Time,
            };
            sites = ep_update_sites(&sites, &cavity, &moments, config.damping)?;
        }
        let post = engine.posterior(&sites)?;
        let (mean, _) = transform_stats_time_to_af(&post.mean, &post.var, daft)?;
        Ok(model.decide(&mean))
    });
    Ok(DetectorOutput {
        hard_symbols: res?,
        iterations_used: config.iterations,
        mult_count: mults,
    })
}
