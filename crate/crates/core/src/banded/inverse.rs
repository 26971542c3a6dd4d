use faer::Mat;

use super::{QuasiBandedLu, QuasiBandedMatrix, TriangularBand};
use crate::{flops, Error, Result};

/// Inverse of a banded triangular matrix keeping only the `φ` diagonals
/// next to the main one.
///
/// Entries within the band depend only on entries closer to the diagonal in
/// the same column, so the kept entries are exact; everything further out is
/// dropped. `φ ≥ n − 1` gives the exact inverse.
pub fn invert_triangular_banded(t: &TriangularBand, phi: usize) -> Result<TriangularBand> {
    let n = t.n();
    for i in 0..n {
        let d = t.get(i, i);
        if d == 0.0 || !d.is_finite() {
            return Err(Error::Singular { index: i, pivot: d });
        }
    }
    let bw = t.bandwidth();
    let mut x = TriangularBand::zeros(n, phi.max(bw), t.is_lower());
    let phi = x.bandwidth();
    let mut mults = 0u64;
    if t.is_lower() {
        for j in 0..n {
            x.set(j, j, 1.0 / t.get(j, j));
            for i in j + 1..(j + phi + 1).min(n) {
                let k0 = j.max(i.saturating_sub(bw));
                let mut acc = 0.0;
                for k in k0..i {
                    acc += t.get(i, k) * x.get(k, j);
                }
                mults += (i - k0 + 1) as u64;
                x.set(i, j, -acc / t.get(i, i));
            }
        }
    } else {
        for j in 0..n {
            x.set(j, j, 1.0 / t.get(j, j));
            for i in (j.saturating_sub(phi)..j).rev() {
                let k1 = j.min(i + bw);
                let mut acc = 0.0;
                for k in i + 1..=k1 {
                    acc += t.get(i, k) * x.get(k, j);
                }
                mults += (k1 - i + 1) as u64;
                x.set(i, j, -acc / t.get(i, i));
            }
        }
    }
    flops::add(mults);
    Ok(x)
}

/// The pieces of `B⁻¹` that every assembly variant shares.
struct InverseParts {
    theta: usize,
    m: usize,
    l_inv: TriangularBand,
    u_inv: TriangularBand,
    /// `G⁻¹W⁻¹`
    b4: Mat<f64>,
    /// `U⁻¹E B4` on the kept rows (zero elsewhere), θ×m.
    ueb4: Mat<f64>,
    /// `V L⁻¹` on the kept columns (zero elsewhere), m×θ.
    vl: Mat<f64>,
    /// Whether row/column `i < θ` lies in the first or last φ.
    edge: Vec<bool>,
}

fn parts(lu: &QuasiBandedLu, phi: usize) -> Result<InverseParts> {
    let (theta, m) = (lu.theta, lu.corner());
    let l_inv = invert_triangular_banded(&lu.l, phi)?;
    let mut mults = 0u64;
    let u_inv = if lu.symmetric {
        // U = diag(U)·Lᵀ, so U⁻¹[i, k] = L⁻¹[k, i] / U[k, k]
        let bw = l_inv.bandwidth();
        mults += (theta * (bw + 1)) as u64;
        TriangularBand::from_fn(theta, bw, false, |i, k| l_inv.get(k, i) / lu.u.get(k, k))
    } else {
        invert_triangular_banded(&lu.u, phi)?
    };
    let edge: Vec<bool> = (0..theta).map(|i| i < phi || i + phi >= theta).collect();

    // B4 = G⁻¹ W⁻¹ through two small triangular solves on the identity
    let mut winv = Mat::<f64>::identity(m, m);
    for c in 0..m {
        for r in c + 1..m {
            let mut acc = 0.0;
            for k in c..r {
                acc += lu.w[(r, k)] * winv[(k, c)];
            }
            winv[(r, c)] = -acc;
        }
    }
    let mut b4 = Mat::<f64>::zeros(m, m);
    for c in 0..m {
        for r in (0..m).rev() {
            let mut acc = winv[(r, c)];
            for k in r + 1..m {
                acc -= lu.g[(r, k)] * b4[(k, c)];
            }
            b4[(r, c)] = acc / lu.g[(r, r)];
        }
    }
    mults += (m * m * m) as u64;

    // V L⁻¹: solve y L = v from the right
    let lbw = lu.l.bandwidth();
    let mut vl = Mat::<f64>::zeros(m, theta);
    for r in 0..m {
        for k in (0..theta).rev() {
            let mut acc = lu.v[(r, k)];
            for i in k + 1..(k + lbw + 1).min(theta) {
                acc -= vl[(r, i)] * lu.l.get(i, k);
            }
            vl[(r, k)] = acc;
        }
    }
    mults += (theta * m * (lbw + 1)) as u64;
    // U⁻¹E by back substitution, or (V L⁻¹)ᵀ for symmetric input
    let ue = if lu.symmetric {
        vl.transpose().to_owned()
    } else {
        let ubw = lu.u.bandwidth();
        let mut ue = Mat::<f64>::zeros(theta, m);
        for c in 0..m {
            for i in (0..theta).rev() {
                let mut acc = lu.e[(i, c)];
                for k in i + 1..(i + ubw + 1).min(theta) {
                    acc -= lu.u.get(i, k) * ue[(k, c)];
                }
                ue[(i, c)] = acc / lu.u.get(i, i);
            }
        }
        mults += (theta * m * (ubw + 1)) as u64;
        ue
    };

    let mut ueb4 = Mat::<f64>::zeros(theta, m);
    for i in (0..theta).filter(|&i| edge[i]) {
        for c in 0..m {
            let mut acc = 0.0;
            for k in 0..m {
                acc += ue[(i, k)] * b4[(k, c)];
            }
            ueb4[(i, c)] = acc;
        }
        mults += (m * m) as u64;
    }
    for k in (0..theta).filter(|&k| !edge[k]) {
        for r in 0..m {
            vl[(r, k)] = 0.0;
        }
    }
    flops::add(mults);
    Ok(InverseParts {
        theta,
        m,
        l_inv,
        u_inv,
        b4,
        ueb4,
        vl,
        edge,
    })
}

impl InverseParts {
    /// Entry `(i, j)` of the assembled approximation.
    fn entry(&self, i: usize, j: usize, phi: usize, mults: &mut u64) -> f64 {
        let (t, m) = (self.theta, self.m);
        match (i < t, j < t) {
            (true, true) => {
                let mut acc = 0.0;
                if i.abs_diff(j) <= phi {
                    // U⁻¹ reaches φ right of the diagonal, L⁻¹ φ below it
                    let k1 = (i + self.u_inv.bandwidth()).min(j + self.l_inv.bandwidth()).min(t - 1);
                    for k in i.max(j)..=k1 {
                        acc += self.u_inv.get(i, k) * self.l_inv.get(k, j);
                    }
                    *mults += (k1 + 1).saturating_sub(i.max(j)) as u64;
                }
                if self.edge[i] && self.edge[j] {
                    for c in 0..m {
                        acc += self.ueb4[(i, c)] * self.vl[(c, j)];
                    }
                    *mults += m as u64;
                }
                acc
            }
            (true, false) => -self.ueb4[(i, j - t)],
            (false, true) => {
                *mults += m as u64;
                -(0..m).map(|c| self.b4[(i - t, c)] * self.vl[(c, j)]).sum::<f64>()
            }
            (false, false) => self.b4[(i - t, j - t)],
        }
    }
}

/// Approximate `B⁻¹` from its structured LU with truncation parameter `φ`,
/// kept on the cyclic window `[-out_halfwidth, out_halfwidth]`.
///
/// `B₁₁ = U⁻¹L⁻¹` uses the φ-truncated triangular inverses, the corner terms
/// `B₁₂`, `B₂`, `B₃` are restricted to the first and last φ rows/columns and
/// `B₄ = G⁻¹W⁻¹` is exact.
pub fn assemble_quasi_banded_inverse_window(lu: &QuasiBandedLu, phi: usize, out_halfwidth: usize) -> Result<QuasiBandedMatrix> {
    let n = lu.n;
    let p = parts(lu, phi)?;
    let mut out = QuasiBandedMatrix::with_halfwidth(n, out_halfwidth);
    let (lo, hi) = (out.lo(), out.hi());
    let mut mults = 0u64;
    if lu.symmetric {
        // the approximation inherits the symmetry: fill (i, i+d) and its mirror
        for i in 0..n {
            for d in 0..=hi.max(-lo) {
                let j = (i as isize + d).rem_euclid(n as isize) as usize;
                if out.slot(i, j).is_none() && out.slot(j, i).is_none() {
                    continue;
                }
                let v = p.entry(i, j, phi, &mut mults);
                if out.slot(i, j).is_some() {
                    out.set(i, j, v);
                }
                if out.slot(j, i).is_some() {
                    out.set(j, i, v);
                }
            }
        }
    } else {
        let w = out.width();
        for i in 0..n {
            let row = out.row_mut(i);
            for (s, slot) in row.iter_mut().enumerate().take(w) {
                let j = (i as isize + lo + s as isize).rem_euclid(n as isize) as usize;
                *slot = p.entry(i, j, phi, &mut mults);
            }
        }
    }
    flops::add(mults);
    Ok(out)
}

/// Approximate `B⁻¹` on its natural window: halfwidth `φ + m`, which holds
/// `B₁₁`, `B₂`, `B₃`, `B₄` completely and the near corners of `B₁₂`.
pub fn assemble_quasi_banded_inverse(lu: &QuasiBandedLu, phi: usize) -> Result<QuasiBandedMatrix> {
    assemble_quasi_banded_inverse_window(lu, phi, phi + lu.corner())
}

/// Diagonal of the assembled approximation only.
pub fn assemble_inverse_diagonal(lu: &QuasiBandedLu, phi: usize) -> Result<Vec<f64>> {
    let p = parts(lu, phi)?;
    let mut mults = 0u64;
    let d = (0..lu.n).map(|i| p.entry(i, i, phi, &mut mults)).collect();
    flops::add(mults);
    Ok(d)
}
