use std::time::{Duration, Instant};

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::banded::{
    assemble_quasi_banded_inverse, block_psi_inverse, dense_inverse, lu_factor_quasi_banded, QuasiBandedMatrix,
};
use crate::channel::{build_af_matrix, build_time_matrix, sample_channel, ChannelProfile};
use crate::detect::{to_real_model, Domain};
use crate::waveform::{AfdmConfig, Daft, Modulation};
use crate::{Result, C64};

/// Blocks of `Ψ = [[B, −C], [C, B + D]]` built from one frequency-selective
/// AF-domain channel: `B = σ⁻²Re Φ + λI`, `C = σ⁻²Im Φ`, `D = 0`.
#[derive(Clone, Debug)]
pub struct EpStyleSystem {
    pub b: QuasiBandedMatrix,
    pub c: QuasiBandedMatrix,
    pub d: Vec<f64>,
}

impl EpStyleSystem {
    pub fn new(n: usize, num_paths: usize, noise_var: f64, lambda: f64, seed: u64) -> Result<Self> {
        let config = AfdmConfig::with_defaults(n, 0.0, num_paths.saturating_sub(1), Modulation::Qam4)?;
        let daft = Daft::new(&config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let realization = sample_channel(&ChannelProfile::frequency_selective(num_paths)?, &mut rng);
        let h_t = build_time_matrix(&realization, &daft)?;
        let h_af = build_af_matrix(&h_t, &daft)?;
        let y = vec![C64::new(0.0, 0.0); n];
        let model = to_real_model(&h_af, &y, noise_var, Domain::Af, &config.constellation())?;
        let (mut b, mut c) = model.gram_banded();
        b.scale(1.0 / noise_var);
        c.scale(1.0 / noise_var);
        b.add_diagonal(&vec![lambda; n]);
        Ok(Self { b, c, d: vec![0.0; n] })
    }

    pub fn n(&self) -> usize {
        self.b.n()
    }

    pub fn psi_dense(&self) -> Mat<f64> {
        let n = self.n();
        let (b, c) = (self.b.to_dense(), self.c.to_dense());
        Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) => b[(i, j)],
            (true, false) => -c[(i, j - n)],
            (false, true) => c[(i - n, j)],
            (false, false) => b[(i - n, j - n)] + if i == j { self.d[i - n] } else { 0.0 },
        })
    }
}

/// Accuracy and timing of the truncated inverses against dense inversion.
#[derive(Clone, Debug)]
pub struct InversionBench {
    pub n: usize,
    pub l_max: usize,
    pub k: usize,
    pub phi: usize,
    /// `‖B̂⁻¹ − B⁻¹‖_F / ‖B⁻¹‖_F`
    pub b_error: f64,
    /// `‖Ψ̂⁻¹ − Ψ⁻¹‖_F / ‖Ψ⁻¹‖_F`
    pub psi_error: f64,
    /// Largest relative error on `diag Ψ⁻¹`.
    pub diag_error: f64,
    pub dense_time: Duration,
    pub banded_time: Duration,
}

fn rel_frobenius(approx: &Mat<f64>, exact: &Mat<f64>) -> f64 {
    (approx - exact).norm_l2() / exact.norm_l2()
}

/// Inverts the EP-style system of a `P = l_max + 1` path channel with
/// `φ = k·l_max` and compares against the dense oracle.
pub fn inversion_bench(n: usize, l_max: usize, k: usize, noise_var: f64, seed: u64) -> Result<InversionBench> {
    let sys = EpStyleSystem::new(n, l_max + 1, noise_var, 1.0, seed)?;
    let phi = k * l_max.max(1);

    let t = Instant::now();
    let psi_inv = dense_inverse(&sys.psi_dense())?;
    let dense_time = t.elapsed();

    let t = Instant::now();
    let res = block_psi_inverse(&sys.b, &sys.c, &sys.d, phi)?;
    let banded_time = t.elapsed();

    let b_inv = dense_inverse(&sys.b.to_dense())?;
    let b_hat = assemble_quasi_banded_inverse(&lu_factor_quasi_banded(&sys.b)?, phi)?.to_dense();
    let diag_error = res
        .diag()
        .iter()
        .enumerate()
        .map(|(i, v)| ((v - psi_inv[(i, i)]) / psi_inv[(i, i)]).abs())
        .fold(0.0, f64::max);
    Ok(InversionBench {
        n,
        l_max,
        k,
        phi,
        b_error: rel_frobenius(&b_hat, &b_inv),
        psi_error: rel_frobenius(&res.to_dense()?, &psi_inv),
        diag_error,
        dense_time,
        banded_time,
    })
}
