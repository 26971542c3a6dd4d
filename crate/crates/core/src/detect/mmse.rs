use crate::banded::dense_inverse;
use crate::waveform::Daft;
use crate::{flops, Error, Result};

use super::real_model::{stack, unstack, Domain, RealSystemModel};
use super::DetectorOutput;

/// Linear MMSE estimate `(HᵀH + σ_w²/σ_x² I)⁻¹ Hᵀy` in the model's domain,
/// with the per-dimension prior variance `σ_x²` of the constellation.
pub fn mmse_estimate(model: &RealSystemModel) -> Result<Vec<f64>> {
    let mut g = model.gram_dense();
    let ridge = model.noise_var() / model.constellation().dimension_variance();
    let m = g.nrows();
    for i in 0..m {
        g[(i, i)] += ridge;
    }
    let inv = dense_inverse(&g)?;
    let hty = model.hty_dense();
    flops::add((m * m) as u64);
    Ok((0..m).map(|i| (0..m).map(|j| inv[(i, j)] * hty[j]).sum()).collect())
}

/// MMSE detection. Time-domain estimates are moved to the AF domain before
/// slicing.
pub fn mmse_detect(model: &RealSystemModel, daft: &Daft) -> Result<DetectorOutput> {
    if daft.len() != model.n() {
        return Err(Error::LengthMismatch {
            expected: model.n(),
            actual: daft.len(),
        });
    }
    let (res, mults) = flops::measure(|| -> Result<_> {
        let x = mmse_estimate(model)?;
        let x = match model.domain() {
            Domain::Af => x,
            Domain::Time => stack(&daft.forward(&unstack(&x))?),
        };
        Ok(model.decide(&x))
    });
    Ok(DetectorOutput {
        hard_symbols: res?,
        iterations_used: 1,
        mult_count: mults,
    })
}
