use crate::waveform::Daft;
use crate::{flops, Error, Result};

use super::real_model::{stack, unstack};

fn check(daft: &Daft, mean: &[f64], var: &[f64]) -> Result<()> {
    for len in [mean.len(), var.len()] {
        if len != 2 * daft.len() {
            return Err(Error::LengthMismatch {
                expected: 2 * daft.len(),
                actual: len,
            });
        }
    }
    Ok(())
}

/// `diag(A diag(v) Aᴴ)` for each half of `var`. Every entry of `A` has
/// magnitude `1/√N`, so each half maps to its own mean.
fn spread(var: &[f64]) -> Vec<f64> {
    let n = var.len() / 2;
    flops::add(2);
    var.chunks(n)
        .flat_map(|half| {
            let m = half.iter().sum::<f64>() / n as f64;
            std::iter::repeat_n(m, n)
        })
        .collect()
}

/// Moves stacked `[hat; check]` means and variances from the time domain to
/// the AF domain: means through `A`, variances through `|A|²`.
pub fn transform_stats_time_to_af(mean: &[f64], var: &[f64], daft: &Daft) -> Result<(Vec<f64>, Vec<f64>)> {
    check(daft, mean, var)?;
    let m = daft.forward(&unstack(mean))?;
    Ok((stack(&m), spread(var)))
}

/// Inverse of [`transform_stats_time_to_af`], through `Aᴴ`.
pub fn transform_stats_af_to_time(mean: &[f64], var: &[f64], daft: &Daft) -> Result<(Vec<f64>, Vec<f64>)> {
    check(daft, mean, var)?;
    let m = daft.inverse(&unstack(mean))?;
    Ok((stack(&m), spread(var)))
}
