use crate::channel::ChannelRealization;
use crate::waveform::Daft;
use crate::{flops, Error, Result, C64};

use super::real_model::{Domain, RealSystemModel};
use super::DetectorOutput;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MrcConfig {
    pub iterations: usize,
}

impl Default for MrcConfig {
    fn default() -> Self {
        Self { iterations: 50 }
    }
}

/// Delay-branch maximal-ratio combining with decision feedback, run on the
/// time-domain samples. Each sweep visits every transmitted sample, cancels
/// the other samples' contributions from the branches it reaches, combines
/// those branches with weights `h*` and updates the estimate in place. The
/// estimate is then sliced in the AF domain and fed back. Stops after
/// `iterations` sweeps or when the decisions no longer change.
pub fn mrc_detect(
    model: &RealSystemModel,
    realization: &ChannelRealization,
    daft: &Daft,
    config: &MrcConfig,
) -> Result<DetectorOutput> {
    if model.domain() != Domain::Time {
        return Err(Error::InvalidConfig("MRC runs on a time-domain model".into()));
    }
    let n = model.n();
    if daft.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: daft.len(),
        });
    }
    let (res, mults) = flops::measure(|| -> Result<_> {
        let cols: Vec<Vec<(usize, C64)>> = (0..n).map(|m| realization.time_column(daft, m).collect()).collect();
        let energy: Vec<f64> = cols.iter().map(|c| c.iter().map(|(_, g)| g.norm_sqr()).sum()).collect();
        let taps = cols.first().map_or(0, Vec::len) as u64;
        flops::add(2 * n as u64 * taps);
        let r = model.y_complex();
        let constellation = model.constellation();
        let zero = C64::new(0.0, 0.0);

        let mut s = vec![zero; n];
        let mut resid = r.to_vec();
        let mut decisions: Option<Vec<C64>> = None;
        let mut used = 0;
        for it in 0..config.iterations.max(1) {
            used = it + 1;
            for m in 0..n {
                if energy[m] == 0.0 {
                    continue;
                }
                let combined: C64 = cols[m].iter().map(|&(row, g)| g.conj() * resid[row]).sum();
                let delta = combined / energy[m];
                s[m] += delta;
                for &(row, g) in &cols[m] {
                    resid[row] -= g * delta;
                }
            }
            flops::add_complex(2 * n as u64 * taps + n as u64);

            let x = daft.forward(&s)?;
            let hard: Vec<C64> = x.iter().map(|&z| constellation.slice(z)).collect();
            let settled = decisions.as_ref() == Some(&hard);
            decisions = Some(hard);
            if settled {
                break;
            }
            // restart the next sweep from the sliced symbols
            s = daft.inverse(decisions.as_deref().unwrap_or_default())?;
            resid.copy_from_slice(r);
            for (m, col) in cols.iter().enumerate() {
                for &(row, g) in col {
                    resid[row] -= g * s[m];
                }
            }
            flops::add_complex(n as u64 * taps);
        }
        Ok((decisions.unwrap_or_default(), used))
    });
    let (hard_symbols, iterations_used) = res?;
    Ok(DetectorOutput {
        hard_symbols,
        iterations_used,
        mult_count: mults,
    })
}
