use faer::Mat;

use super::{
    assemble_quasi_banded_inverse, assemble_quasi_banded_inverse_window, lu_factor_quasi_banded,
    QuasiBandedLu, QuasiBandedMatrix,
};
use crate::{flops, Error, Result};

/// Truncation knobs of [`block_psi_inverse_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockInverseOptions {
    /// Band limit of the triangular inverses.
    pub phi: usize,
    /// Halfwidth kept for `P = B + D + C·B̂⁻¹·C` before its factorization.
    pub p_halfwidth: usize,
    /// Halfwidth kept for `X = B̂⁻¹C` and `Y = C·B̂⁻¹`.
    pub x_halfwidth: usize,
}

impl BlockInverseOptions {
    /// Defaults for inputs of halfwidth `band`: `P`, `X` and `Y` keep twice
    /// the input band. Any `φ ≥ n` switches every truncation off.
    pub fn new(n: usize, phi: usize, band: usize) -> Self {
        if phi >= n {
            return Self::exact(n);
        }
        Self {
            phi,
            p_halfwidth: (2 * band).min(n),
            x_halfwidth: (2 * band).min(n),
        }
    }

    pub fn exact(n: usize) -> Self {
        Self {
            phi: n,
            p_halfwidth: n,
            x_halfwidth: n,
        }
    }

    /// Every window doubled, capped at `n`.
    pub fn widened(self, n: usize) -> Self {
        Self {
            phi: (2 * self.phi).min(n),
            p_halfwidth: (2 * self.p_halfwidth).min(n),
            x_halfwidth: (2 * self.x_halfwidth).min(n),
        }
    }

    pub fn is_exact(self, n: usize) -> bool {
        self.phi >= n && self.p_halfwidth >= n && self.x_halfwidth >= n
    }
}

/// Preconditioned first pass of an iterative solve.
#[derive(Clone, Debug)]
pub struct SolveStart {
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    /// `‖v − Ψx‖ / ‖v‖`
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    flops::add(a.len() as u64);
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Factored form of
///
/// ```text
/// Ψ = [B  −C ]      Ψ⁻¹ = [B⁻¹ − X P⁻¹ Y   X P⁻¹]
///     [C  B+D]            [−P⁻¹ Y           P⁻¹ ]
/// ```
///
/// with `X = B⁻¹C`, `Y = C B⁻¹` and `P = B + D + C B⁻¹ C`.
#[derive(Clone, Debug)]
pub struct BlockInverseResult {
    options: BlockInverseOptions,
    b: QuasiBandedMatrix,
    c: QuasiBandedMatrix,
    d: Vec<f64>,
    lu_b: QuasiBandedLu,
    lu_p: QuasiBandedLu,
    diag: Vec<f64>,
}

impl BlockInverseResult {
    pub fn phi(&self) -> usize {
        self.options.phi
    }

    pub fn options(&self) -> BlockInverseOptions {
        self.options
    }

    pub fn n(&self) -> usize {
        self.c.n()
    }

    /// `diag(Ψ̂⁻¹)`, length `2n`.
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != 2 * self.n() {
            return Err(Error::LengthMismatch {
                expected: 2 * self.n(),
                actual: v.len(),
            });
        }
        Ok(())
    }

    /// `Ψ̂⁻¹ v` through the two factorizations (exact `B`, truncated `P`).
    pub fn solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        let n = self.n();
        let (v1, v2) = v.split_at(n);
        let t = self.lu_b.solve(v1);
        let ct = self.c.mul_vec(&t);
        let rhs: Vec<f64> = v2.iter().zip(&ct).map(|(a, b)| a - b).collect();
        let mu2 = self.lu_p.solve(&rhs);
        let cm = self.c.mul_vec(&mu2);
        let rhs: Vec<f64> = v1.iter().zip(&cm).map(|(a, b)| a + b).collect();
        let mut mu = self.lu_b.solve(&rhs);
        mu.extend(mu2);
        Ok(mu)
    }

    /// `Ψ v` with the exact blocks.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        let n = self.n();
        let (v1, v2) = v.split_at(n);
        let (b1, b2) = (self.b.mul_vec(v1), self.b.mul_vec(v2));
        let (c1, c2) = (self.c.mul_vec(v1), self.c.mul_vec(v2));
        let mut out: Vec<f64> = (0..n).map(|i| b1[i] - c2[i]).collect();
        out.extend((0..n).map(|i| c1[i] + b2[i] + self.d[i] * v2[i]));
        flops::add(n as u64);
        Ok(out)
    }

    /// First preconditioned pass `x₀ = Ψ̂⁻¹ v` with its residual. The relative
    /// residual measures how well the truncation captures `Ψ⁻¹` for this `Ψ`.
    pub fn start(&self, v: &[f64]) -> Result<SolveStart> {
        let x = self.solve(v)?;
        let ax = self.apply(&x)?;
        let r: Vec<f64> = v.iter().zip(&ax).map(|(a, b)| a - b).collect();
        let norm_v = norm(v);
        let relative_residual = if norm_v == 0.0 { 0.0 } else { norm(&r) / norm_v };
        Ok(SolveStart {
            x,
            r,
            relative_residual,
        })
    }

    /// `Ψ⁻¹ v` by conjugate gradients preconditioned with [`Self::solve`],
    /// stopping at relative residual `tol` or after `max_iter` steps.
    /// Returns the solution and the number of steps taken.
    pub fn solve_refined(&self, v: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
        let start = self.start(v)?;
        self.refine(v, start, tol, max_iter)
    }

    /// Continues [`Self::solve_refined`] from a computed start.
    pub fn refine(&self, v: &[f64], start: SolveStart, tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
        self.check_len(v)?;
        let norm_v = norm(v);
        let SolveStart { mut x, mut r, .. } = start;
        if norm_v == 0.0 {
            return Ok((x, 0));
        }
        let mut z = self.solve(&r)?;
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        for step in 0..max_iter {
            if norm(&r) <= tol * norm_v {
                return Ok((x, step));
            }
            let ap = self.apply(&p)?;
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let alpha = rz / pap;
            x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
            r.iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= alpha * ai);
            z = self.solve(&r)?;
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
            flops::add(3 * x.len() as u64);
        }
        Ok((x, max_iter))
    }

    /// Dense blocks `[TL, TR, BL, BR]` of the approximate inverse, each from
    /// the fully assembled φ-truncated `B̂⁻¹` and `P̂⁻¹`.
    pub fn blocks(&self) -> Result<[Mat<f64>; 4]> {
        let phi = self.options.phi;
        let binv = assemble_quasi_banded_inverse(&self.lu_b, phi)?.to_dense();
        let pinv = assemble_quasi_banded_inverse(&self.lu_p, phi)?.to_dense();
        let c = self.c.to_dense();
        let x = &binv * &c;
        let y = &c * &binv;
        let xp = &x * &pinv;
        let tl = &binv - &xp * &y;
        let bl = -(&pinv * &y);
        Ok([tl, xp, bl, pinv])
    }

    /// The assembled `2n × 2n` approximation.
    pub fn to_dense(&self) -> Result<Mat<f64>> {
        let n = self.n();
        let [tl, tr, bl, br] = self.blocks()?;
        Ok(Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) => tl[(i, j)],
            (true, false) => tr[(i, j - n)],
            (false, true) => bl[(i - n, j)],
            (false, false) => br[(i - n, j - n)],
        }))
    }
}

/// Block inverse of `Ψ = [[B, −C], [C, B + D]]` with default truncation.
pub fn block_psi_inverse(b: &QuasiBandedMatrix, c: &QuasiBandedMatrix, d: &[f64], phi: usize) -> Result<BlockInverseResult> {
    let band = b.halfwidth().max(c.halfwidth());
    block_psi_inverse_with(b, c, d, BlockInverseOptions::new(b.n(), phi, band))
}

pub fn block_psi_inverse_with(
    b: &QuasiBandedMatrix,
    c: &QuasiBandedMatrix,
    d: &[f64],
    options: BlockInverseOptions,
) -> Result<BlockInverseResult> {
    let n = b.n();
    if c.n() != n || d.len() != n {
        return Err(Error::Shape(format!(
            "block sizes disagree: B {n}, C {}, D {}",
            c.n(),
            d.len()
        )));
    }
    let BlockInverseOptions {
        phi,
        p_halfwidth,
        x_halfwidth,
    } = options;
    let lu_b = lu_factor_quasi_banded(b)?;
    // symmetric B with antisymmetric C gives Y = −Xᵀ and a symmetric P
    let skew = lu_b.is_symmetric() && c.add(&c.transpose()).max_abs() == 0.0;
    let binv = assemble_quasi_banded_inverse_window(&lu_b, phi, x_halfwidth + c.halfwidth())?;
    let (xlo, xhi) = (-(x_halfwidth as isize), x_halfwidth as isize);
    let x = QuasiBandedMatrix::product_in_window(&binv, c, xlo, xhi);

    let (plo, phi_) = (-(p_halfwidth as isize), p_halfwidth as isize);
    let mut p = QuasiBandedMatrix::product_in_window(c, &x, plo, phi_);
    p = p.add(&b.truncated(plo, phi_));
    p.add_diagonal(d);
    if skew {
        p = p.add(&p.transpose());
        p.scale(0.5);
    }
    let lu_p = lu_factor_quasi_banded(&p)?;

    // the quadratic term of diag(TL) reads P̂⁻¹ within reach of X and Y
    let pinv = assemble_quasi_banded_inverse_window(&lu_p, phi, 2 * x_halfwidth)?;
    let mut diag: Vec<f64> = binv.diagonal();
    let mut mults = 0u64;
    if skew {
        // −X P⁻¹ Y = X P⁻¹ Xᵀ, a symmetric quadratic form per row
        let mut cols: Vec<(usize, f64)> = Vec::with_capacity(x.width());
        for (i, di) in diag.iter_mut().enumerate() {
            cols.clear();
            cols.extend(x.row(i).iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(s, &v)| {
                ((i as isize + x.lo() + s as isize).rem_euclid(n as isize) as usize, v)
            }));
            let mut acc = 0.0;
            for (a, &(ka, va)) in cols.iter().enumerate() {
                let mut inner = 0.5 * va * pinv.get(ka, ka);
                for &(kb, vb) in &cols[a + 1..] {
                    inner += vb * pinv.get(ka, kb);
                }
                acc += va * inner;
            }
            let w = cols.len() as u64;
            mults += w * (w + 1) / 2 + 2 * w;
            *di += 2.0 * acc;
        }
    } else {
        let y = QuasiBandedMatrix::product_in_window(c, &binv, xlo, xhi);
        let yw = y.width();
        for (i, di) in diag.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (sx, &xv) in x.row(i).iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let k = (i as isize + x.lo() + sx as isize).rem_euclid(n as isize) as usize;
                let mut inner = 0.0;
                for sy in 0..yw {
                    // Y[l, i] with l = i − (y.lo + sy)
                    let l = (i as isize - y.lo() - sy as isize).rem_euclid(n as isize) as usize;
                    let yv = y.get(l, i);
                    if yv != 0.0 {
                        inner += pinv.get(k, l) * yv;
                    }
                }
                acc += xv * inner;
            }
            mults += (x.width() * (yw + 1)) as u64;
            *di -= acc;
        }
    }
    diag.extend(pinv.diagonal());
    flops::add(mults);

    Ok(BlockInverseResult {
        options,
        b: b.clone(),
        c: c.clone(),
        d: d.to_vec(),
        lu_b,
        lu_p,
        diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::banded::dense_inverse;

    fn psi_dense(b: &QuasiBandedMatrix, c: &QuasiBandedMatrix, d: &[f64]) -> Mat<f64> {
        let n = b.n();
        let (bd, cd) = (b.to_dense(), c.to_dense());
        Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) => bd[(i, j)],
            (true, false) => -cd[(i, j - n)],
            (false, true) => cd[(i - n, j)],
            (false, false) => bd[(i - n, j - n)] + if i == j { d[i - n] } else { 0.0 },
        })
    }

    #[test]
    fn widening_reaches_exact() {
        let mut o = BlockInverseOptions::new(100, 12, 4);
        assert_eq!((o.phi, o.p_halfwidth, o.x_halfwidth), (12, 8, 8));
        let mut steps = 0;
        while !o.is_exact(100) {
            o = o.widened(100);
            steps += 1;
        }
        assert_eq!(steps, 4);
        assert_eq!(o, BlockInverseOptions::exact(100));
    }

    #[test]
    fn start_residual_tracks_truncation() {
        let n = 48;
        // slowly decaying inverse: weak diagonal dominance
        let b = QuasiBandedMatrix::from_fn(n, -2, 2, |i, j| if i == j { 2.05 } else if i.abs_diff(j) == 1 || i.abs_diff(j) == n - 1 { -0.5 } else { -0.02 });
        let c = QuasiBandedMatrix::from_fn(n, -1, 1, |i, j| if i == j { 0.0 } else if (j + n - i) % n == 1 { 0.3 } else { -0.3 });
        let d = vec![0.1; n];
        let v: Vec<f64> = (0..2 * n).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let tight = block_psi_inverse_with(&b, &c, &d, BlockInverseOptions { phi: 2, p_halfwidth: 2, x_halfwidth: 2 }).unwrap();
        let exact = block_psi_inverse_with(&b, &c, &d, BlockInverseOptions::exact(n)).unwrap();
        let (rt, re) = (tight.start(&v).unwrap().relative_residual, exact.start(&v).unwrap().relative_residual);
        assert!(re < 1e-12 && rt > 1e-3, "{rt} {re}");
        let (x, _) = tight.refine(&v, tight.start(&v).unwrap(), 1e-10, 200).unwrap();
        let want = dense_inverse(&psi_dense(&b, &c, &d)).unwrap();
        for i in 0..2 * n {
            let wi: f64 = (0..2 * n).map(|j| want[(i, j)] * v[j]).sum();
            assert!((x[i] - wi).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_coupling_is_block_diagonal() {
        let b = QuasiBandedMatrix::from_fn(10, -1, 1, |i, j| if i == j { 3.0 } else { 0.7 });
        let c = QuasiBandedMatrix::zeros(10, -1, 1);
        let res = block_psi_inverse(&b, &c, &[0.0; 10], 10).unwrap();
        let binv = dense_inverse(&b.to_dense()).unwrap();
        let [tl, tr, bl, br] = res.blocks().unwrap();
        assert!((&tl - &binv).norm_max() < 1e-12);
        assert!((&br - &binv).norm_max() < 1e-12);
        assert!(tr.norm_max() < 1e-15 && bl.norm_max() < 1e-15);
    }

    #[test]
    fn scalar_blocks() {
        let n = 6;
        let mut b = QuasiBandedMatrix::identity(n);
        b.scale(2.0);
        let c = QuasiBandedMatrix::identity(n);
        let res = block_psi_inverse(&b, &c, &vec![0.0; n], 2).unwrap();
        let [tl, tr, bl, br] = res.blocks().unwrap();
        for i in 0..n {
            assert!((tl[(i, i)] - 0.4).abs() < 1e-14);
            assert!((tr[(i, i)] - 0.2).abs() < 1e-14);
            assert!((bl[(i, i)] + 0.2).abs() < 1e-14);
            assert!((br[(i, i)] - 0.4).abs() < 1e-14);
        }
        assert!(res.diag().iter().all(|&x| (x - 0.4).abs() < 1e-14));
    }

    #[test]
    fn exact_at_full_phi() {
        let n = 20;
        let b = QuasiBandedMatrix::from_fn(n, -2, 2, |i, j| if i == j { 5.0 } else { 0.3 + 0.01 * (i + j) as f64 });
        let c = QuasiBandedMatrix::from_fn(n, -2, 2, |i, j| 0.2 * (j as f64 - i as f64).sin());
        let d: Vec<f64> = (0..n).map(|i| 0.1 * i as f64).collect();
        let res = block_psi_inverse(&b, &c, &d, n).unwrap();
        let psi = psi_dense(&b, &c, &d);
        let oracle = dense_inverse(&psi).unwrap();
        let got = res.to_dense().unwrap();
        assert!((&got - &oracle).norm_l2() / oracle.norm_l2() < 1e-12);
        for i in 0..2 * n {
            assert!((res.diag()[i] - oracle[(i, i)]).abs() < 1e-12, "{i} {} {}", res.diag()[i], oracle[(i, i)]);
        }
        let v: Vec<f64> = (0..2 * n).map(|i| (i as f64).cos()).collect();
        let mu = res.solve(&v).unwrap();
        for i in 0..2 * n {
            let e: f64 = (0..2 * n).map(|j| oracle[(i, j)] * v[j]).sum();
            assert!((mu[i] - e).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch() {
        let b = QuasiBandedMatrix::identity(4);
        let c = QuasiBandedMatrix::identity(5);
        assert!(matches!(block_psi_inverse(&b, &c, &[0.0; 4], 4), Err(Error::Shape(_))));
    }
}
