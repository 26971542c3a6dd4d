//! Real quasi-banded matrices: cyclic band storage, pivot-free structured LU,
//! truncated triangular inversion and the 2×2 block inverse used by EP.

mod block;
mod dense;
mod inverse;
mod lu;

pub use block::{block_psi_inverse, block_psi_inverse_with, BlockInverseOptions, BlockInverseResult, SolveStart};
pub use dense::{dense_inverse, spd_inverse};
pub use inverse::{assemble_inverse_diagonal, assemble_quasi_banded_inverse, assemble_quasi_banded_inverse_window, invert_triangular_banded};
pub use lu::{lu_factor_quasi_banded, QuasiBandedLu};

use faer::Mat;

use crate::flops;

/// Smallest cyclic window `[lo, hi]` of offsets `(j − i) mod n` holding every
/// entry whose magnitude exceeds `tol`. Offsets are returned as signed values
/// with `lo ≤ hi`, `hi − lo < n`. `None` if nothing exceeds `tol`.
pub fn cyclic_window(n: usize, tol: f64, magnitude: impl Fn(usize, usize) -> f64) -> Option<(isize, isize)> {
    let mut used = vec![false; n];
    for i in 0..n {
        for j in 0..n {
            if magnitude(i, j) > tol {
                used[(j + n - i) % n] = true;
            }
        }
    }
    window_from_offsets(&used)
}

/// Minimal cyclic window covering the `true` offsets: the complement of the
/// longest cyclic run of unused offsets.
pub(crate) fn window_from_offsets(used: &[bool]) -> Option<(isize, isize)> {
    let n = used.len();
    let first = used.iter().position(|&u| u)?;
    // walk the ring starting at a used offset, tracking the longest gap
    let (mut best_gap, mut best_end) = (0usize, first);
    let mut gap = 0usize;
    for step in 1..=n {
        let d = (first + step) % n;
        if used[d] {
            if gap > best_gap {
                best_gap = gap;
                best_end = d;
            }
            gap = 0;
        } else {
            gap += 1;
        }
    }
    // window starts right after the longest gap and spans n - gap offsets
    let lo = best_end as isize;
    let width = (n - best_gap) as isize;
    let mut lo = if lo > n as isize / 2 { lo - n as isize } else { lo };
    let mut hi = lo + width - 1;
    // keep the window anchored near zero so that it contains the diagonal when possible
    while hi >= n as isize {
        lo -= n as isize;
        hi -= n as isize;
    }
    Some((lo, hi))
}

/// Square real matrix whose nonzeros lie on the cyclic diagonals
/// `lo..=hi` (offset `d` holds entries `(i, (i + d) mod n)`).
///
/// Stored row-major, one slot per diagonal. A window as wide as the matrix
/// is plain dense storage.
#[derive(Clone, Debug, PartialEq)]
pub struct QuasiBandedMatrix {
    n: usize,
    lo: isize,
    hi: isize,
    data: Vec<f64>,
}

impl QuasiBandedMatrix {
    /// Zero matrix on the window `[lo, hi]`, widened to include the diagonal
    /// and clamped to `n` diagonals.
    pub fn zeros(n: usize, lo: isize, hi: isize) -> Self {
        assert!(n > 0, "matrix order must be positive");
        let (lo, hi) = normalize_window(n, lo.min(0), hi.max(0));
        let width = (hi - lo + 1) as usize;
        Self {
            n,
            lo,
            hi,
            data: vec![0.0; n * width],
        }
    }

    /// Zero matrix with symmetric cyclic halfwidth `b` (bandwidth `2b + 1`).
    pub fn with_halfwidth(n: usize, b: usize) -> Self {
        Self::zeros(n, -(b.min(n) as isize), b.min(n) as isize)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0, 0);
        m.data.iter_mut().for_each(|x| *x = 1.0);
        m
    }

    pub fn from_fn(n: usize, lo: isize, hi: isize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n, lo, hi);
        let w = m.width();
        for i in 0..n {
            for s in 0..w {
                let j = m.col(i, s);
                m.data[i * w + s] = f(i, j);
            }
        }
        m
    }

    /// Copies the entries of `dense` inside the window, dropping the rest.
    pub fn from_dense(dense: &Mat<f64>, lo: isize, hi: isize) -> Self {
        assert_eq!(dense.nrows(), dense.ncols(), "matrix must be square");
        Self::from_fn(dense.nrows(), lo, hi, |i, j| dense[(i, j)])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lo(&self) -> isize {
        self.lo
    }

    pub fn hi(&self) -> isize {
        self.hi
    }

    pub fn width(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn halfwidth(&self) -> usize {
        (-self.lo).max(self.hi) as usize
    }

    pub fn is_dense(&self) -> bool {
        self.width() == self.n
    }

    #[inline]
    fn col(&self, i: usize, slot: usize) -> usize {
        (i as isize + self.lo + slot as isize).rem_euclid(self.n as isize) as usize
    }

    /// Storage slot of `(i, j)` if it lies in the window.
    #[inline]
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let n = self.n as isize;
        let d = (j as isize - i as isize).rem_euclid(n);
        let s = (d - self.lo).rem_euclid(n);
        (s < self.width() as isize).then_some(s as usize)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[i * self.width() + s])
    }

    /// Sets an entry inside the window. Panics outside it.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).unwrap_or_else(|| panic!("({i}, {j}) outside band [{}, {}]", self.lo, self.hi));
        let w = self.width();
        self.data[i * w + s] = v;
    }

    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).unwrap_or_else(|| panic!("({i}, {j}) outside band [{}, {}]", self.lo, self.hi));
        let w = self.width();
        self.data[i * w + s] += v;
    }

    /// Row `i` as a slice over offsets `lo..=hi`.
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let w = self.width();
        &mut self.data[i * w..(i + 1) * w]
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut out = Mat::zeros(self.n, self.n);
        let w = self.width();
        for i in 0..self.n {
            for s in 0..w {
                out[(i, self.col(i, s))] = self.data[i * w + s];
            }
        }
        out
    }

    /// Same entries on a new window; anything outside it is dropped.
    pub fn truncated(&self, lo: isize, hi: isize) -> Self {
        let mut out = Self::zeros(self.n, lo, hi);
        let w = out.width();
        for i in 0..self.n {
            for s in 0..w {
                let j = out.col(i, s);
                out.data[i * w + s] = self.get(i, j);
            }
        }
        out
    }

    pub fn truncated_halfwidth(&self, b: usize) -> Self {
        self.truncated(-(b as isize), b as isize)
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.n, -self.hi, -self.lo);
        let w = self.width();
        for i in 0..self.n {
            for s in 0..w {
                out.set(self.col(i, s), i, self.data[i * w + s]);
            }
        }
        out
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn add_diagonal(&mut self, d: &[f64]) {
        assert_eq!(d.len(), self.n);
        let s0 = (-self.lo) as usize;
        let w = self.width();
        for (i, v) in d.iter().enumerate() {
            self.data[i * w + s0] += v;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
        flops::add(self.data.len() as u64);
    }

    /// `self + other` on the union window.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut out = Self::zeros(self.n, self.lo.min(other.lo), self.hi.max(other.hi));
        for m in [self, other] {
            let w = m.width();
            for i in 0..m.n {
                for s in 0..w {
                    out.add_at(i, m.col(i, s), m.data[i * w + s]);
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest `|M_ij − M_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let w = self.width();
        let mut worst = 0f64;
        for i in 0..self.n {
            for s in 0..w {
                let j = self.col(i, s);
                worst = worst.max((self.data[i * w + s] - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let w = self.width();
        let n = self.n as isize;
        let out = (0..self.n)
            .map(|i| {
                let row = &self.data[i * w..(i + 1) * w];
                let start = i as isize + self.lo;
                if start >= 0 && start + w as isize <= n {
                    let s = start as usize;
                    row.iter().zip(&x[s..s + w]).map(|(a, b)| a * b).sum()
                } else {
                    row.iter()
                        .enumerate()
                        .map(|(k, a)| a * x[(start + k as isize).rem_euclid(n) as usize])
                        .sum()
                }
            })
            .collect();
        flops::add((self.n * w) as u64);
        out
    }

    /// `a · b`, computing only the entries on the window `[lo, hi]`.
    pub fn product_in_window(a: &Self, b: &Self, lo: isize, hi: isize) -> Self {
        assert_eq!(a.n, b.n, "order mismatch");
        let n = a.n;
        let mut out = Self::zeros(n, lo, hi);
        let (wa, wb, wo) = (a.width(), b.width(), out.width());
        let mut mults = 0u64;
        if wa + wb - 1 <= n {
            // product offsets e + f are distinct modulo n, so every output slot
            // maps to one integer offset and an interval of inner offsets e
            let (plo, phi) = (a.lo + b.lo, a.hi + b.hi);
            for so in 0..wo {
                let dmod = out.lo + so as isize;
                let d = [dmod, dmod - n as isize, dmod + n as isize]
                    .into_iter()
                    .find(|d| (plo..=phi).contains(d));
                let Some(d) = d else { continue };
                let elo = a.lo.max(d - b.hi);
                let ehi = a.hi.min(d - b.lo);
                if elo > ehi {
                    continue;
                }
                let len = (ehi - elo + 1) as usize;
                mults += (len * n) as u64;
                for i in 0..n {
                    let arow = &a.data[i * wa..(i + 1) * wa];
                    let mut acc = 0.0;
                    for e in elo..=ehi {
                        let k = (i as isize + e).rem_euclid(n as isize) as usize;
                        acc += arow[(e - a.lo) as usize] * b.data[k * wb + (d - e - b.lo) as usize];
                    }
                    out.data[i * wo + so] = acc;
                }
            }
        } else {
            for i in 0..n {
                for sa in 0..wa {
                    let av = a.data[i * wa + sa];
                    let k = a.col(i, sa);
                    for sb in 0..wb {
                        let j = b.col(k, sb);
                        if let Some(so) = out.slot(i, j) {
                            out.data[i * wo + so] += av * b.data[k * wb + sb];
                        }
                    }
                }
            }
            mults += (n * wa * wb) as u64;
        }
        flops::add(mults);
        out
    }

    /// Full product on the combined window.
    pub fn product(a: &Self, b: &Self) -> Self {
        Self::product_in_window(a, b, a.lo + b.lo, a.hi + b.hi)
    }
}

/// Widen-to-dense rule: a window of `n` or more diagonals becomes
/// `[-(n/2), n - 1 - n/2]`.
fn normalize_window(n: usize, lo: isize, hi: isize) -> (isize, isize) {
    if hi - lo + 1 >= n as isize {
        let lo = -((n / 2) as isize);
        (lo, lo + n as isize - 1)
    } else {
        (lo, hi)
    }
}

/// Lower or upper triangular matrix with `bw` off-diagonals, not cyclic.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangularBand {
    n: usize,
    bw: usize,
    lower: bool,
    data: Vec<f64>,
}

impl TriangularBand {
    pub fn zeros(n: usize, bw: usize, lower: bool) -> Self {
        let bw = bw.min(n.saturating_sub(1));
        Self {
            n,
            bw,
            lower,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn identity(n: usize, lower: bool) -> Self {
        let mut t = Self::zeros(n, 0, lower);
        t.data.iter_mut().for_each(|x| *x = 1.0);
        t
    }

    pub fn from_fn(n: usize, bw: usize, lower: bool, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(n, bw, lower);
        for i in 0..n {
            for k in 0..=t.bw {
                if let Some(j) = t.col_of(i, k) {
                    t.data[i * (t.bw + 1) + k] = f(i, j);
                }
            }
        }
        t
    }

    #[inline]
    fn col_of(&self, i: usize, k: usize) -> Option<usize> {
        if self.lower {
            (i + k).checked_sub(self.bw)
        } else {
            Some(i + k).filter(|&j| j < self.n)
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn is_lower(&self) -> bool {
        self.lower
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let k = if self.lower {
            if j > i || i - j > self.bw {
                return 0.0;
            }
            self.bw - (i - j)
        } else {
            if j < i || j - i > self.bw {
                return 0.0;
            }
            j - i
        };
        self.data[i * (self.bw + 1) + k]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = if self.lower { self.bw - (i - j) } else { j - i };
        self.data[i * (self.bw + 1) + k] = v;
    }

    pub fn to_dense(&self) -> Mat<f64> {
        Mat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_product(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
        a * b
    }

    #[test]
    fn window_detection() {
        let n = 10;
        // offsets -2..=1
        let w = cyclic_window(n, 0.0, |i, j| {
            let d = (j + n - i) % n;
            if d <= 1 || d >= n - 2 {
                1.0
            } else {
                0.0
            }
        });
        assert_eq!(w, Some((-2, 1)));
        assert_eq!(cyclic_window(n, 0.5, |_, _| 0.0), None);
        assert_eq!(cyclic_window(4, 0.0, |_, _| 1.0).map(|(lo, hi)| hi - lo + 1), Some(4));
        // single superdiagonal only
        assert_eq!(cyclic_window(6, 0.0, |i, j| if j == (i + 2) % 6 { 1.0 } else { 0.0 }), Some((2, 2)));
    }

    #[test]
    fn storage_round_trip_and_wrap() {
        let n = 7;
        let m = QuasiBandedMatrix::from_fn(n, -2, 1, |i, j| (10 * i + j) as f64 + 1.0);
        let d = m.to_dense();
        assert_eq!(d[(0, 5)], 6.0); // wraps to offset -2
        assert_eq!(d[(6, 0)], 61.0); // wraps to offset +1
        assert_eq!(d[(0, 3)], 0.0);
        assert_eq!(QuasiBandedMatrix::from_dense(&d, -2, 1), m);
        let t = m.transpose();
        assert_eq!(t.to_dense(), d.transpose().to_owned());
    }

    #[test]
    fn wide_window_becomes_dense() {
        let m = QuasiBandedMatrix::with_halfwidth(6, 5);
        assert!(m.is_dense());
        assert_eq!(m.width(), 6);
        let id = QuasiBandedMatrix::identity(1);
        assert_eq!(id.get(0, 0), 1.0);
    }

    proptest! {
        #[test]
        fn windowed_product_matches_dense(
            n in 3usize..24,
            alo in 0isize..4, ahi in 0isize..4,
            blo in 0isize..4, bhi in 0isize..4,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut draw = |lo: isize, hi: isize| {
                let vals: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
                QuasiBandedMatrix::from_fn(n, -lo, hi, |i, j| vals[i * n + j])
            };
            let a = draw(alo, ahi);
            let b = draw(blo, bhi);
            let full = dense_product(&a.to_dense(), &b.to_dense());
            let c = QuasiBandedMatrix::product(&a, &b);
            let expect = QuasiBandedMatrix::from_dense(&full, c.lo(), c.hi());
            for i in 0..n {
                for j in 0..n {
                    prop_assert!((c.get(i, j) - expect.get(i, j)).abs() < 1e-12);
                    // nothing of the exact product lives outside the window
                    if c.slot(i, j).is_none() {
                        prop_assert!(full[(i, j)].abs() < 1e-12);
                    }
                }
            }
            let narrow = QuasiBandedMatrix::product_in_window(&a, &b, -1, 1);
            let expect = QuasiBandedMatrix::from_dense(&full, -1, 1);
            for i in 0..n {
                for j in 0..n {
                    prop_assert!((narrow.get(i, j) - expect.get(i, j)).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn mul_vec_matches_dense(n in 2usize..20, lo in 0isize..5, hi in 0isize..5, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m = QuasiBandedMatrix::from_fn(n, -lo, hi, |i, j| vals[i * n + j]);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let d = m.to_dense();
            let y = m.mul_vec(&x);
            for i in 0..n {
                let e: f64 = (0..n).map(|j| d[(i, j)] * x[j]).sum();
                prop_assert!((y[i] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn triangular_band_access() {
        let l = TriangularBand::from_fn(5, 2, true, |i, j| (i * 10 + j) as f64);
        assert_eq!(l.get(3, 1), 31.0);
        assert_eq!(l.get(3, 0), 0.0);
        assert_eq!(l.get(1, 2), 0.0);
        let u = TriangularBand::from_fn(5, 1, false, |i, j| (i * 10 + j) as f64);
        assert_eq!(u.get(2, 3), 23.0);
        assert_eq!(u.get(2, 4), 0.0);
        assert_eq!(u.get(4, 4), 44.0);
    }
}
