use std::fmt;

use faer::Mat;

use crate::banded::{cyclic_window, QuasiBandedMatrix};
use crate::waveform::Constellation;
use crate::{flops, Error, Result, C64};

/// Domain of the unknowns of a system model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Af,
    Time,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Af => "af",
            Domain::Time => "time",
        })
    }
}

/// `[Re v; Im v]`.
pub fn stack(v: &[C64]) -> Vec<f64> {
    v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)).collect()
}

/// Inverse of [`stack`].
pub fn unstack(v: &[f64]) -> Vec<C64> {
    let n = v.len() / 2;
    (0..n).map(|i| C64::new(v[i], v[n + i])).collect()
}

/// Complex matrix stored on a cyclic window of offsets `lo..=hi`.
#[derive(Clone, Debug)]
struct ComplexBand {
    n: usize,
    lo: isize,
    data: Vec<C64>,
    width: usize,
}

impl ComplexBand {
    fn from_dense(h: &Mat<C64>, tol: f64) -> Self {
        let n = h.nrows();
        let (lo, hi) = cyclic_window(n, tol, |i, j| h[(i, j)].norm()).unwrap_or((0, 0));
        let width = (hi - lo + 1) as usize;
        let mut data = vec![C64::new(0.0, 0.0); n * width];
        for i in 0..n {
            for s in 0..width {
                data[i * width + s] = h[(i, Self::col(n, lo, i, s))];
            }
        }
        Self { n, lo, data, width }
    }

    fn col(n: usize, lo: isize, i: usize, s: usize) -> usize {
        (i as isize + lo + s as isize).rem_euclid(n as isize) as usize
    }

    /// `Hᴴ H` on its natural window, split into real and imaginary parts.
    #[allow(clippy::needless_range_loop)]
    fn gram(&self) -> (QuasiBandedMatrix, QuasiBandedMatrix) {
        let (n, w) = (self.n, self.width);
        let reach = (w - 1) as isize;
        let mut re = QuasiBandedMatrix::zeros(n, -reach, reach);
        let mut im = QuasiBandedMatrix::zeros(n, -reach, reach);
        for r in 0..n {
            let row = &self.data[r * w..(r + 1) * w];
            for a in 0..w {
                let i = Self::col(n, self.lo, r, a);
                let hi = row[a].conj();
                for b in 0..w {
                    let z = hi * row[b];
                    let j = Self::col(n, self.lo, r, b);
                    re.add_at(i, j, z.re);
                    im.add_at(i, j, z.im);
                }
            }
        }
        flops::add_complex((n * w * w) as u64);
        (re, im)
    }

    /// `Hᴴ y`.
    fn adjoint_mul(&self, y: &[C64]) -> Vec<C64> {
        let w = self.width;
        let mut out = vec![C64::new(0.0, 0.0); self.n];
        for (r, yr) in y.iter().enumerate() {
            for (s, h) in self.data[r * w..(r + 1) * w].iter().enumerate() {
                out[Self::col(self.n, self.lo, r, s)] += h.conj() * yr;
            }
        }
        flops::add_complex((self.n * w) as u64);
        out
    }
}

/// Real embedding `y = H x + w` of a complex model `ȳ = H̄ x̄ + w̄`, with
/// `x = [Re x̄; Im x̄]`, `H = [[Re H̄, −Im H̄], [Im H̄, Re H̄]]` and per-dimension
/// noise variance `σ_w² = σ_w̄²/2`.
#[derive(Clone, Debug)]
pub struct RealSystemModel {
    h_complex: Mat<C64>,
    y_complex: Vec<C64>,
    y: Vec<f64>,
    noise_var: f64,
    domain: Domain,
    constellation: Constellation,
    band: ComplexBand,
}

/// Builds the real model from the complex channel matrix and observation.
/// `noise_var` is the complex noise variance `σ_w̄²`.
pub fn to_real_model(
    h: &Mat<C64>,
    y: &[C64],
    noise_var: f64,
    domain: Domain,
    constellation: &Constellation,
) -> Result<RealSystemModel> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::Shape(format!("channel matrix is {}x{}", n, h.ncols())));
    }
    if y.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: y.len(),
        });
    }
    if !(noise_var > 0.0) {
        return Err(Error::InvalidConfig(format!("noise variance must be positive, got {noise_var}")));
    }
    // entries below this are treated as structural zeros of the band
    let tol = 1e-12 * h.norm_max().max(f64::MIN_POSITIVE);
    Ok(RealSystemModel {
        band: ComplexBand::from_dense(h, tol),
        h_complex: h.clone(),
        y_complex: y.to_vec(),
        y: stack(y),
        noise_var: 0.5 * noise_var,
        domain,
        constellation: constellation.clone(),
    })
}

impl RealSystemModel {
    /// Model from an explicit real matrix, which must have the
    /// `[[R, −I], [I, R]]` structure.
    pub fn from_real(
        h: &Mat<f64>,
        y: &[f64],
        noise_var: f64,
        domain: Domain,
        constellation: &Constellation,
    ) -> Result<Self> {
        let m = h.nrows();
        if !m.is_multiple_of(2) || h.ncols() != m || y.len() != m {
            return Err(Error::Shape(format!(
                "expected a square even-order system, got {}x{} with {} observations",
                m,
                h.ncols(),
                y.len()
            )));
        }
        let n = m / 2;
        let tol = 1e-12 * h.norm_max().max(1.0);
        for i in 0..n {
            for j in 0..n {
                if (h[(i, j)] - h[(n + i, n + j)]).abs() > tol || (h[(i, n + j)] + h[(n + i, j)]).abs() > tol {
                    return Err(Error::Shape("real matrix lacks the [[R, -I], [I, R]] structure".into()));
                }
            }
        }
        let hc = Mat::from_fn(n, n, |i, j| C64::new(h[(i, j)], h[(n + i, j)]));
        to_real_model(&hc, &unstack(y), 2.0 * noise_var, domain, constellation)
    }

    /// Number of complex unknowns `N`.
    pub fn n(&self) -> usize {
        self.y_complex.len()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Per-dimension noise variance `σ_w²`.
    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn y_complex(&self) -> &[C64] {
        &self.y_complex
    }

    pub fn h_complex(&self) -> &Mat<C64> {
        &self.h_complex
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    /// Real levels `𝒜` of one dimension.
    pub fn alphabet(&self) -> &[f64] {
        self.constellation.real_alphabet()
    }

    /// Cyclic offsets `(lo, hi)` holding the nonzero entries of `H̄`.
    pub fn band_window(&self) -> (isize, isize) {
        (self.band.lo, self.band.lo + self.band.width as isize - 1)
    }

    /// The `2N × 2N` real matrix `H`.
    pub fn h(&self) -> Mat<f64> {
        let n = self.n();
        let h = &self.h_complex;
        Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) => h[(i, j)].re,
            (true, false) => -h[(i, j - n)].im,
            (false, true) => h[(i - n, j)].im,
            (false, false) => h[(i - n, j - n)].re,
        })
    }

    /// Dense `HᵀH`, booked as a `(2N)³` product.
    pub fn gram_dense(&self) -> Mat<f64> {
        let h = self.h();
        let m = h.nrows() as u64;
        flops::add(m * m * m);
        h.transpose() * &h
    }

    /// Dense `Hᵀ y`, booked as `(2N)²`.
    pub fn hty_dense(&self) -> Vec<f64> {
        let h = self.h();
        let m = h.nrows();
        flops::add((m * m) as u64);
        (0..m).map(|j| (0..m).map(|i| h[(i, j)] * self.y[i]).sum()).collect()
    }

    /// `(Re Φ, Im Φ)` of `Φ = H̄ᴴH̄` on the band implied by the band of `H̄`,
    /// so that `HᵀH = [[Re Φ, −Im Φ], [Im Φ, Re Φ]]`.
    pub fn gram_banded(&self) -> (QuasiBandedMatrix, QuasiBandedMatrix) {
        self.band.gram()
    }

    /// `Hᵀ y` through the band of `H̄`.
    pub fn hty_banded(&self) -> Vec<f64> {
        stack(&self.band.adjoint_mul(&self.y_complex))
    }

    /// Per-dimension nearest-level decisions of a stacked real estimate.
    pub fn decide(&self, x: &[f64]) -> Vec<C64> {
        decide(&self.constellation, x)
    }
}

pub(crate) fn decide(constellation: &Constellation, x: &[f64]) -> Vec<C64> {
    let n = x.len() / 2;
    (0..n)
        .map(|i| C64::new(constellation.nearest_level(x[i]), constellation.nearest_level(x[n + i])))
        .collect()
}
