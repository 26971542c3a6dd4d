use faer::Mat;

use super::{QuasiBandedMatrix, TriangularBand};
use crate::{flops, Error, Result};

/// Pivot-free LU of a quasi-banded matrix split at `θ = n − m`:
///
/// ```text
/// [T Q]   [L 0] [U E]
/// [J S] = [V W] [0 G]
/// ```
///
/// `T` is purely banded, `Q`/`J` carry the wrap-around corners, `m` is the
/// larger of the lower and upper halfwidths. `L` and `W` have unit diagonal.
#[derive(Clone, Debug)]
pub struct QuasiBandedLu {
    pub(crate) n: usize,
    pub(crate) theta: usize,
    pub(crate) l: TriangularBand,
    pub(crate) u: TriangularBand,
    /// `L⁻¹Q`, θ×m.
    pub(crate) e: Mat<f64>,
    /// `J U⁻¹`, m×θ.
    pub(crate) v: Mat<f64>,
    /// Unit lower factor of `S − VE`.
    pub(crate) w: Mat<f64>,
    /// Upper factor of `S − VE`.
    pub(crate) g: Mat<f64>,
    /// The factored matrix was exactly symmetric, so `U = diag(U)·Lᵀ`.
    pub(crate) symmetric: bool,
}

impl QuasiBandedLu {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Split index θ.
    pub fn theta(&self) -> usize {
        self.theta
    }

    /// Corner size `m = n − θ`.
    pub fn corner(&self) -> usize {
        self.n - self.theta
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Pivot `k` of the factorization (diagonal of the upper factor).
    pub fn pivot(&self, k: usize) -> f64 {
        if k < self.theta {
            self.u.get(k, k)
        } else {
            self.g[(k - self.theta, k - self.theta)]
        }
    }

    pub fn lower_band(&self) -> &TriangularBand {
        &self.l
    }

    pub fn upper_band(&self) -> &TriangularBand {
        &self.u
    }

    /// Full lower factor `[[L, 0], [V, W]]`.
    pub fn lower_dense(&self) -> Mat<f64> {
        let (n, t) = (self.n, self.theta);
        Mat::from_fn(n, n, |i, j| match (i < t, j < t) {
            (true, true) => self.l.get(i, j),
            (true, false) => 0.0,
            (false, true) => self.v[(i - t, j)],
            (false, false) => self.w[(i - t, j - t)],
        })
    }

    /// Full upper factor `[[U, E], [0, G]]`.
    pub fn upper_dense(&self) -> Mat<f64> {
        let (n, t) = (self.n, self.theta);
        Mat::from_fn(n, n, |i, j| match (i < t, j < t) {
            (true, true) => self.u.get(i, j),
            (true, false) => self.e[(i, j - t)],
            (false, true) => 0.0,
            (false, false) => self.g[(i - t, j - t)],
        })
    }

    /// `L·U` as a dense matrix.
    pub fn reconstruct(&self) -> Mat<f64> {
        self.lower_dense() * self.upper_dense()
    }

    /// Solves `B x = r`.
    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        assert_eq!(r.len(), self.n);
        let (t, m) = (self.theta, self.corner());
        let mut x = r.to_vec();
        let (lbw, ubw) = (self.l.bandwidth(), self.u.bandwidth());
        let mut mults = 0u64;
        // z1 = L⁻¹ r1
        for i in 0..t {
            let mut acc = x[i];
            for k in i.saturating_sub(lbw)..i {
                acc -= self.l.get(i, k) * x[k];
            }
            x[i] = acc;
            mults += (i - i.saturating_sub(lbw)) as u64;
        }
        // z2 = W⁻¹ (r2 − V z1)
        for a in 0..m {
            let mut acc = x[t + a];
            for k in 0..t {
                acc -= self.v[(a, k)] * x[k];
            }
            for c in 0..a {
                acc -= self.w[(a, c)] * x[t + c];
            }
            x[t + a] = acc;
        }
        // x2 = G⁻¹ z2
        for a in (0..m).rev() {
            let mut acc = x[t + a];
            for c in a + 1..m {
                acc -= self.g[(a, c)] * x[t + c];
            }
            x[t + a] = acc / self.g[(a, a)];
        }
        // x1 = U⁻¹ (z1 − E x2)
        for i in (0..t).rev() {
            let mut acc = x[i];
            for c in 0..m {
                acc -= self.e[(i, c)] * x[t + c];
            }
            for k in i + 1..(i + ubw + 1).min(t) {
                acc -= self.u.get(i, k) * x[k];
            }
            x[i] = acc / self.u.get(i, i);
            mults += ((i + ubw + 1).min(t) - i) as u64;
        }
        mults += (2 * m * t + m * m) as u64;
        flops::add(mults);
        x
    }
}

/// Structured LU without pivoting.
///
/// Fails with [`Error::Singular`] when a pivot falls below
/// `1e-12 · max|B|`.
pub fn lu_factor_quasi_banded(b: &QuasiBandedMatrix) -> Result<QuasiBandedLu> {
    let n = b.n();
    let (lo, hi) = (b.lo(), b.hi());
    let m = ((-lo).max(hi) as usize).min(n);
    let theta = n - m;
    let (lbw, ubw) = ((-lo) as usize, hi as usize);
    let tol = 1e-12 * b.max_abs();
    let mut mults = 0u64;

    // banded elimination of T in a scratch band covering offsets [-lbw, ubw]
    let mut l = TriangularBand::zeros(theta, lbw, true);
    let mut u = TriangularBand::zeros(theta, ubw, false);
    let lbw = l.bandwidth();
    let ubw = u.bandwidth();
    let width = lbw + ubw + 1;
    let mut a = vec![0.0; theta * width];
    for i in 0..theta {
        for j in i.saturating_sub(lbw)..(i + ubw + 1).min(theta) {
            a[i * width + (j + lbw - i)] = b.get(i, j);
        }
    }
    for k in 0..theta {
        let pivot = a[k * width + lbw];
        if !(pivot.abs() > tol) {
            return Err(Error::Singular { index: k, pivot });
        }
        for i in k + 1..(k + lbw + 1).min(theta) {
            let f = a[i * width + (k + lbw - i)] / pivot;
            a[i * width + (k + lbw - i)] = f;
            for j in k + 1..(k + ubw + 1).min(theta) {
                a[i * width + (j + lbw - i)] -= f * a[k * width + (j + lbw - k)];
            }
            mults += ((k + ubw + 1).min(theta) - k) as u64;
        }
    }
    for i in 0..theta {
        l.set(i, i, 1.0);
        for j in i.saturating_sub(lbw)..i {
            l.set(i, j, a[i * width + (j + lbw - i)]);
        }
        for j in i..(i + ubw + 1).min(theta) {
            u.set(i, j, a[i * width + (j + lbw - i)]);
        }
    }

    // E = L⁻¹ Q by forward substitution per corner column
    let mut e = Mat::<f64>::zeros(theta, m);
    for c in 0..m {
        for i in 0..theta {
            let mut acc = b.get(i, theta + c);
            for k in i.saturating_sub(lbw)..i {
                acc -= l.get(i, k) * e[(k, c)];
            }
            e[(i, c)] = acc;
        }
    }
    // V = J U⁻¹, i.e. solve v U = j row by row
    let mut v = Mat::<f64>::zeros(m, theta);
    for r in 0..m {
        for k in 0..theta {
            let mut acc = b.get(theta + r, k);
            for i in k.saturating_sub(ubw)..k {
                acc -= v[(r, i)] * u.get(i, k);
            }
            v[(r, k)] = acc / u.get(k, k);
        }
    }
    mults += (theta * m * (lbw + ubw + 1)) as u64;

    // Schur complement S − V E, then a pivot-free dense LU of it
    let mut s = Mat::<f64>::from_fn(m, m, |r, c| b.get(theta + r, theta + c));
    for r in 0..m {
        for c in 0..m {
            let mut acc = 0.0;
            for k in 0..theta {
                acc += v[(r, k)] * e[(k, c)];
            }
            s[(r, c)] -= acc;
        }
    }
    mults += (m * m * theta) as u64;
    let mut w = Mat::<f64>::identity(m, m);
    for k in 0..m {
        let pivot = s[(k, k)];
        if !(pivot.abs() > tol) {
            return Err(Error::Singular { index: theta + k, pivot });
        }
        for i in k + 1..m {
            let f = s[(i, k)] / pivot;
            w[(i, k)] = f;
            s[(i, k)] = 0.0;
            for j in k + 1..m {
                s[(i, j)] -= f * s[(k, j)];
            }
        }
    }
    mults += (m * m * m / 3) as u64;
    flops::add(mults);

    Ok(QuasiBandedLu {
        n,
        theta,
        l,
        u,
        e,
        v,
        w,
        g: s,
        symmetric: b.asymmetry() == 0.0,
    })
}
