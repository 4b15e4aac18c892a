//! Deterministic discrete-signal primitives: unitary DFT/IDFT, circular
//! convolution, cyclic-prefix handling and the small matrix decompositions
//! the transmit/receive chains need.
//!
//! # Scaling convention
//!
//! Both transform directions are unitary (a `1/sqrt(N)` factor each way), so
//! Parseval holds with no bookkeeping: `norm(dft(x)) == norm(x)`.
//!
//! Under this convention an N-point circular convolution in time maps to
//! per-bin multiplication by the *unnormalized* tap response
//! `C[k] = sum_b h[b] exp(-2 pi i k b / N)`, i.e.
//!
//! ```text
//! dft(circular_convolve(h, s)) == sqrt(N) * dft(h) .* dft(s)
//! ```
//!
//! Channel code therefore publishes `sqrt(N) * dft(taps)` as the
//! per-subcarrier frequency response so that frequency-domain processing and
//! the time-domain signal path agree exactly.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::{Result, SimError};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unitary forward DFT. `x.len()` must equal `size`.
pub fn dft(x: &[Complex64], size: usize) -> Result<Vec<Complex64>> {
    if size == 0 {
        return Err(SimError::param("dft size must be >= 1"));
    }
    if x.len() != size {
        return Err(SimError::dim(format!(
            "dft input length {} != size {}",
            x.len(),
            size
        )));
    }
    let mut buf = x.to_vec();
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_forward(size);
        fft.process(&mut buf);
    });
    let norm = 1.0 / (size as f64).sqrt();
    for v in &mut buf {
        *v *= norm;
    }
    Ok(buf)
}

/// Unitary inverse DFT, the exact inverse of [`dft`].
pub fn idft(x: &[Complex64], size: usize) -> Result<Vec<Complex64>> {
    if size == 0 {
        return Err(SimError::param("idft size must be >= 1"));
    }
    if x.len() != size {
        return Err(SimError::dim(format!(
            "idft input length {} != size {}",
            x.len(),
            size
        )));
    }
    let mut buf = x.to_vec();
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_inverse(size);
        fft.process(&mut buf);
    });
    let norm = 1.0 / (size as f64).sqrt();
    for v in &mut buf {
        *v *= norm;
    }
    Ok(buf)
}

/// N-point circular convolution `y[n] = sum_b h[b] s[(n-b) mod N]`.
///
/// Evaluated as the direct sum in time (zero taps are skipped, which leaves
/// the arithmetic identical to the full double sum). `h` and `s` must have
/// equal length.
pub fn circular_convolve(h: &[Complex64], s: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = s.len();
    if h.len() != n {
        return Err(SimError::dim(format!(
            "circular_convolve lengths differ: {} vs {}",
            h.len(),
            n
        )));
    }
    if n == 0 {
        return Err(SimError::param("circular_convolve needs length >= 1"));
    }
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for (b, &tap) in h.iter().enumerate() {
        if tap.re == 0.0 && tap.im == 0.0 {
            continue;
        }
        for (idx, out) in y.iter_mut().enumerate() {
            // (idx - b) mod n without signed arithmetic; b < n always
            let src = (idx + n - b) % n;
            *out += tap * s[src];
        }
    }
    Ok(y)
}

/// Prepends the last `cp_len` samples of `s` as a cyclic prefix.
pub fn cp_add(s: &[Complex64], cp_len: usize) -> Result<Vec<Complex64>> {
    if cp_len >= s.len() {
        return Err(SimError::param(format!(
            "cyclic prefix {} must be shorter than the symbol ({})",
            cp_len,
            s.len()
        )));
    }
    let mut out = Vec::with_capacity(s.len() + cp_len);
    out.extend_from_slice(&s[s.len() - cp_len..]);
    out.extend_from_slice(s);
    Ok(out)
}

/// Drops the first `cp_len` samples (the cyclic prefix).
pub fn cp_strip(r: &[Complex64], cp_len: usize) -> Result<Vec<Complex64>> {
    if r.len() <= cp_len {
        return Err(SimError::param(format!(
            "cannot strip a {}-sample prefix from a {}-sample block",
            cp_len,
            r.len()
        )));
    }
    Ok(r[cp_len..].to_vec())
}

/// SVD of a single channel row `h` (1 x n), `h = u * sigma * v^H`.
#[derive(Debug, Clone)]
pub struct RowSvd {
    /// Left singular scalar, unit modulus.
    pub u: Complex64,
    /// The lone singular value, `norm(h)`.
    pub sigma: f64,
    /// Right singular vector, unit norm, length `h.len()`.
    pub v: Vec<Complex64>,
}

/// Decomposes a nonzero 1 x n channel row as `u * sigma * v^H`.
///
/// `u` carries the phase of the first nonzero entry so that `v` has a real
/// nonnegative component there; this makes the decomposition deterministic.
pub fn row_svd(h: &[Complex64]) -> Result<RowSvd> {
    let sigma = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if sigma == 0.0 {
        return Err(SimError::DegenerateChannel(
            "row_svd of an all-zero row".into(),
        ));
    }
    let first = h
        .iter()
        .find(|z| z.norm_sqr() > 0.0)
        .expect("nonzero row has a nonzero entry");
    let u = first / first.norm();
    // h = u * sigma * v^H  =>  v = conj(h / (u * sigma))
    let v: Vec<Complex64> = h.iter().map(|z| (z / (u * sigma)).conj()).collect();
    Ok(RowSvd { u, sigma, v })
}

// ---------------------------------------------------------------------------
// Small complex matrices
// ---------------------------------------------------------------------------

/// Dense row-major complex matrix. Only the handful of operations the
/// beamforming and equalization chains need.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            *m.at_mut(i, i) = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from rows. All rows must be equally long and every
    /// entry finite.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(SimError::param("matrix needs at least one row and column"));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(SimError::dim("ragged rows in matrix constructor"));
            }
            for &z in row {
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(SimError::param("non-finite matrix entry"));
                }
                data.push(z);
            }
        }
        Ok(ComplexMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }

    /// Copies column `c` out as a vector.
    pub fn col(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self.at(r, c)).collect()
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> ComplexMatrix {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                *out.at_mut(c, r) = self.at(r, c).conj();
            }
        }
        out
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != rhs.rows {
            return Err(SimError::dim(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(r, k);
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for c in 0..rhs.cols {
                    *out.at_mut(r, c) += a * rhs.at(k, c);
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.cols != x.len() {
            return Err(SimError::dim(format!(
                "cannot apply {}x{} to a length-{} vector",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for r in 0..self.rows {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..self.cols {
                acc += self.at(r, c) * x[c];
            }
            out[r] = acc;
        }
        Ok(out)
    }
}

/// Eigendecomposition of a small Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, q)` with `a == q * diag(eigenvalues) * q^H`.
/// Eigenvalues are not sorted. Intended for the K x K and N_e x N_e Gram
/// matrices of this crate (order <= 8 or so).
pub fn hermitian_eigen(a: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if a.rows() != a.cols() {
        return Err(SimError::dim("hermitian_eigen needs a square matrix"));
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut q = ComplexMatrix::identity(n);

    let off = |m: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for r in 0..n {
            for c in 0..n {
                if r != c {
                    s += m.at(r, c).norm_sqr();
                }
            }
        }
        s
    };
    let scale: f64 = m
        .data
        .iter()
        .map(|z| z.norm())
        .fold(1e-300, f64::max);

    for _sweep in 0..64 {
        if off(&m) <= 1e-30 * scale * scale {
            break;
        }
        for p in 0..n {
            for qi in (p + 1)..n {
                let apq = m.at(p, qi);
                if apq.norm_sqr() <= 1e-34 * scale * scale {
                    continue;
                }
                let app = m.at(p, p).re;
                let aqq = m.at(qi, qi).re;
                let mag = apq.norm();
                let phase = apq / mag;
                // Rotation angle for the phase-aligned real 2x2 block.
                let theta = 0.5 * (2.0 * mag).atan2(app - aqq);
                let (s, c) = theta.sin_cos();
                let sp = phase * s;
                // Columns p and q of both m and q are updated: G is the
                // identity except G[p][p]=c, G[p][q]=-conj(sp) ... applied as
                // m <- G^H m G, q <- q G.
                for r in 0..n {
                    let mrp = m.at(r, p);
                    let mrq = m.at(r, qi);
                    *m.at_mut(r, p) = mrp * c + mrq * sp.conj();
                    *m.at_mut(r, qi) = -mrp * sp + mrq * c;
                }
                for cc in 0..n {
                    let mpc = m.at(p, cc);
                    let mqc = m.at(qi, cc);
                    *m.at_mut(p, cc) = mpc * c + mqc * sp;
                    *m.at_mut(qi, cc) = -mpc * sp.conj() + mqc * c;
                }
                for r in 0..n {
                    let qrp = q.at(r, p);
                    let qrq = q.at(r, qi);
                    *q.at_mut(r, p) = qrp * c + qrq * sp.conj();
                    *q.at_mut(r, qi) = -qrp * sp + qrq * c;
                }
            }
        }
    }

    let eigs: Vec<f64> = (0..n).map(|i| m.at(i, i).re).collect();
    Ok((eigs, q))
}

/// Right pseudo-inverse `A^+ = A^H (A A^H)^-1` of a fat full-row-rank matrix.
///
/// `a` must be K x N with K <= N. Rank is checked through the singular values
/// of `a`: the call fails if the smallest falls below `1e-10` times the
/// largest, rather than returning an amplified-noise result.
pub fn pseudo_inverse(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.rows() > a.cols() {
        return Err(SimError::dim(format!(
            "pseudo_inverse expects a fat matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let gram = a.mul(&a.hermitian())?;
    let (eigs, q) = hermitian_eigen(&gram)?;
    let max_eig = eigs.iter().cloned().fold(0.0_f64, f64::max);
    let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    // Singular values of `a` are sqrt(eigenvalues of a a^H).
    let rank_tol = 1e-10 * max_eig.max(0.0).sqrt();
    if max_eig <= 0.0 || min_eig.max(0.0).sqrt() <= rank_tol {
        return Err(SimError::Singular(format!(
            "rank-deficient matrix in pseudo_inverse (sigma_min {:.3e}, sigma_max {:.3e})",
            min_eig.max(0.0).sqrt(),
            max_eig.max(0.0).sqrt()
        )));
    }
    // gram^-1 = q diag(1/eig) q^H
    let k = gram.rows();
    let mut inv = ComplexMatrix::zeros(k, k);
    for r in 0..k {
        for c in 0..k {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..k {
                acc += q.at(r, j) * q.at(c, j).conj() / eigs[j];
            }
            *inv.at_mut(r, c) = acc;
        }
    }
    a.hermitian().mul(&inv)
}

/// Solves `r x = b` for Hermitian positive definite `r` via Cholesky.
///
/// Fails with a singularity error when `r` is not positive definite (for the
/// receiver this happens exactly when the noise floor is set to zero).
pub fn herm_solve(r: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    if r.rows() != r.cols() {
        return Err(SimError::dim("herm_solve needs a square matrix"));
    }
    let n = r.rows();
    if b.len() != n {
        return Err(SimError::dim(format!(
            "herm_solve rhs length {} != order {}",
            b.len(),
            n
        )));
    }
    // Lower-triangular Cholesky factor.
    let mut l = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = r.at(i, j);
            for k in 0..j {
                acc -= l.at(i, k) * l.at(j, k).conj();
            }
            if i == j {
                let d = acc.re;
                if d <= 0.0 || !d.is_finite() {
                    return Err(SimError::Singular(
                        "covariance not positive definite (zero noise floor?)".into(),
                    ));
                }
                *l.at_mut(i, i) = Complex64::new(d.sqrt(), 0.0);
            } else {
                *l.at_mut(i, j) = acc / l.at(j, j);
            }
        }
    }
    // Forward then back substitution.
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        let mut acc = b[i];
        for k in 0..i {
            acc -= l.at(i, k) * y[k];
        }
        y[i] = acc / l.at(i, i);
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut acc = y[i];
        for k in (i + 1)..n {
            acc -= l.at(k, i).conj() * x[k];
        }
        x[i] = acc / l.at(i, i);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn test_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        crate::trial_rng(seed, 0)
    }

    fn random_block(rng: &mut impl Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect()
    }

    /// Independent O(N^2) direct-sum DFT used as the oracle for the fast path.
    fn dft_direct(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        let norm = 1.0 / (n as f64).sqrt();
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, &xi) in x.iter().enumerate() {
                    let ang = -2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
                    acc += xi * Complex64::new(ang.cos(), ang.sin());
                }
                acc * norm
            })
            .collect()
    }

    fn idft_direct(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        let norm = 1.0 / (n as f64).sqrt();
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, &xi) in x.iter().enumerate() {
                    let ang = 2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
                    acc += xi * Complex64::new(ang.cos(), ang.sin());
                }
                acc * norm
            })
            .collect()
    }

    fn max_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn dft_impulse_is_flat() {
        let mut x = vec![Complex64::new(0.0, 0.0); 4];
        x[0] = Complex64::new(1.0, 0.0);
        let y = dft(&x, 4).unwrap();
        for v in y {
            assert!((v - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn dft_all_ones_is_dc() {
        let x = vec![Complex64::new(1.0, 0.0); 4];
        let y = dft(&x, 4).unwrap();
        assert!((y[0] - Complex64::new(2.0, 0.0)).norm() < 1e-12);
        for v in &y[1..] {
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn dft_matches_direct_sum_256() {
        let mut rng = test_rng(11);
        let x = random_block(&mut rng, 256);
        let fast = dft(&x, 256).unwrap();
        let slow = dft_direct(&x);
        assert!(max_err(&fast, &slow) < 1e-12);
    }

    #[test]
    fn idft_matches_direct_sum_180() {
        // 180 = 2^2 * 3^2 * 5 exercises the non-power-of-two path.
        let mut rng = test_rng(12);
        let x = random_block(&mut rng, 180);
        let fast = idft(&x, 180).unwrap();
        let slow = idft_direct(&x);
        assert!(max_err(&fast, &slow) < 1e-12);
    }

    #[test]
    fn idft_inverts_dft() {
        let mut rng = test_rng(13);
        let x = random_block(&mut rng, 180);
        let back = idft(&dft(&x, 180).unwrap(), 180).unwrap();
        assert!(max_err(&back, &x) < 1e-12);
    }

    #[test]
    fn idft_of_dc() {
        let mut x = vec![Complex64::new(0.0, 0.0); 4];
        x[0] = Complex64::new(2.0, 0.0);
        let y = idft(&x, 4).unwrap();
        for v in y {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn dft_parseval() {
        let mut rng = test_rng(14);
        for &n in &[7usize, 64, 180, 256] {
            let x = random_block(&mut rng, n);
            let y = dft(&x, n).unwrap();
            let ex: f64 = x.iter().map(|v| v.norm_sqr()).sum();
            let ey: f64 = y.iter().map(|v| v.norm_sqr()).sum();
            assert!((ex - ey).abs() < 1e-12 * ex.max(1.0));
        }
    }

    #[test]
    fn dft_rejects_length_mismatch() {
        let x = vec![Complex64::new(1.0, 0.0); 4];
        assert!(matches!(dft(&x, 8), Err(SimError::Dimension(_))));
        assert!(matches!(dft(&x, 0), Err(SimError::Parameter(_))));
        assert!(matches!(idft(&x, 5), Err(SimError::Dimension(_))));
    }

    #[test]
    fn convolve_identity_kernel() {
        let mut rng = test_rng(15);
        let s = random_block(&mut rng, 16);
        let mut h = vec![Complex64::new(0.0, 0.0); 16];
        h[0] = Complex64::new(1.0, 0.0);
        let y = circular_convolve(&h, &s).unwrap();
        assert!(max_err(&y, &s) < 1e-15);
    }

    #[test]
    fn convolve_delay_kernel() {
        let mut rng = test_rng(16);
        let s = random_block(&mut rng, 16);
        let mut h = vec![Complex64::new(0.0, 0.0); 16];
        h[1] = Complex64::new(1.0, 0.0);
        let y = circular_convolve(&h, &s).unwrap();
        for i in 0..16 {
            assert!((y[i] - s[(i + 16 - 1) % 16]).norm() < 1e-15);
        }
    }

    #[test]
    fn convolve_matches_direct_double_sum() {
        let mut rng = test_rng(17);
        let n = 256;
        let s = random_block(&mut rng, n);
        let mut h = vec![Complex64::new(0.0, 0.0); n];
        for tap in h.iter_mut().take(7) {
            *tap = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        }
        let y = circular_convolve(&h, &s).unwrap();
        // Oracle: the full O(N*L) double sum, written independently.
        let mut expect = vec![Complex64::new(0.0, 0.0); n];
        for (idx, e) in expect.iter_mut().enumerate() {
            for (b, &tap) in h.iter().enumerate() {
                *e += tap * s[(idx + n - b) % n];
            }
        }
        assert!(max_err(&y, &expect) < 1e-12);
    }

    #[test]
    fn convolution_theorem_scaling() {
        // dft(h (*) s) == sqrt(N) * dft(h) .* dft(s)
        let mut rng = test_rng(18);
        let n = 64;
        let s = random_block(&mut rng, n);
        let h = random_block(&mut rng, n);
        let lhs = dft(&circular_convolve(&h, &s).unwrap(), n).unwrap();
        let hf = dft(&h, n).unwrap();
        let sf = dft(&s, n).unwrap();
        let scale = (n as f64).sqrt();
        let rhs: Vec<Complex64> = hf.iter().zip(&sf).map(|(a, b)| a * b * scale).collect();
        assert!(max_err(&lhs, &rhs) < 1e-10);
    }

    #[test]
    fn cp_round_trip() {
        let mut rng = test_rng(19);
        let s = random_block(&mut rng, 32);
        for &g in &[0usize, 1, 7, 31] {
            let with_cp = cp_add(&s, g).unwrap();
            assert_eq!(with_cp.len(), 32 + g);
            assert_eq!(&with_cp[g..], &s[..]);
            if g > 0 {
                assert_eq!(&with_cp[..g], &s[32 - g..]);
            }
            let back = cp_strip(&with_cp, g).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn cp_definition_example() {
        let s: Vec<Complex64> = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|&r| Complex64::new(r, 0.0))
            .collect();
        let out = cp_add(&s, 2).unwrap();
        let expect: Vec<f64> = vec![3.0, 4.0, 1.0, 2.0, 3.0, 4.0];
        for (o, e) in out.iter().zip(&expect) {
            assert_eq!(o.re, *e);
        }
        let stripped = cp_strip(&out, 2).unwrap();
        assert_eq!(stripped, s);
    }

    #[test]
    fn cp_rejects_bad_lengths() {
        let s = vec![Complex64::new(1.0, 0.0); 4];
        assert!(matches!(cp_add(&s, 4), Err(SimError::Parameter(_))));
        assert!(matches!(cp_strip(&s, 4), Err(SimError::Parameter(_))));
        assert!(matches!(cp_strip(&s, 9), Err(SimError::Parameter(_))));
    }

    #[test]
    fn row_svd_unit_row() {
        let h = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ];
        let svd = row_svd(&h).unwrap();
        assert!((svd.u - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((svd.sigma - 1.0).abs() < 1e-15);
        assert!((svd.v[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn row_svd_pythagorean() {
        let h = [Complex64::new(3.0, 0.0), Complex64::new(4.0, 0.0)];
        let svd = row_svd(&h).unwrap();
        assert!((svd.sigma - 5.0).abs() < 1e-12);
        for (j, &hj) in h.iter().enumerate() {
            let rec = svd.u * svd.sigma * svd.v[j].conj();
            assert!((rec - hj).norm() < 1e-12);
        }
    }

    #[test]
    fn row_svd_random_reconstruction() {
        let mut rng = test_rng(20);
        for _ in 0..50 {
            let h = random_block(&mut rng, 4);
            let svd = row_svd(&h).unwrap();
            let norm: f64 = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((svd.sigma - norm).abs() <= 1e-12 * norm);
            assert!((svd.u.norm() - 1.0).abs() < 1e-12);
            let vnorm: f64 = svd.v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((vnorm - 1.0).abs() < 1e-12);
            let err: f64 = h
                .iter()
                .enumerate()
                .map(|(j, &hj)| (svd.u * svd.sigma * svd.v[j].conj() - hj).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(err <= 1e-12 * norm);
        }
    }

    #[test]
    fn row_svd_rejects_zero_row() {
        let h = [Complex64::new(0.0, 0.0); 3];
        assert!(matches!(row_svd(&h), Err(SimError::DegenerateChannel(_))));
    }

    #[test]
    fn pseudo_inverse_identity_padded() {
        // A = [I_2 | 0] => A+ = [I_2; 0]
        let a = ComplexMatrix::from_rows(&[
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
            vec![
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        ])
        .unwrap();
        let p = pseudo_inverse(&a).unwrap();
        assert_eq!(p.rows(), 4);
        assert_eq!(p.cols(), 2);
        for r in 0..4 {
            for c in 0..2 {
                let expect = if r == c { 1.0 } else { 0.0 };
                assert!((p.at(r, c) - Complex64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn pseudo_inverse_scaling() {
        let a = ComplexMatrix::from_rows(&[
            vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.0)],
            vec![Complex64::new(0.0, 0.0), Complex64::new(2.0, 0.0)],
        ])
        .unwrap();
        let p = pseudo_inverse(&a).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                let expect = if r == c { 0.5 } else { 0.0 };
                assert!((p.at(r, c) - Complex64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn pseudo_inverse_defining_property() {
        let mut rng = test_rng(21);
        for _ in 0..50 {
            let rows: Vec<Vec<Complex64>> = (0..2).map(|_| random_block(&mut rng, 4)).collect();
            let a = ComplexMatrix::from_rows(&rows).unwrap();
            let p = pseudo_inverse(&a).unwrap();
            let prod = a.mul(&p).unwrap();
            for r in 0..2 {
                for c in 0..2 {
                    let expect = if r == c { 1.0 } else { 0.0 };
                    assert!(
                        (prod.at(r, c) - Complex64::new(expect, 0.0)).norm() < 1e-9,
                        "A*A+ not identity"
                    );
                }
            }
        }
    }

    #[test]
    fn pseudo_inverse_rejects_rank_deficiency() {
        let row = vec![
            Complex64::new(1.0, 0.5),
            Complex64::new(-0.3, 0.2),
            Complex64::new(0.8, -0.1),
            Complex64::new(0.0, 0.9),
        ];
        let doubled: Vec<Complex64> = row.iter().map(|z| z * 2.0).collect();
        let a = ComplexMatrix::from_rows(&[row, doubled]).unwrap();
        assert!(matches!(pseudo_inverse(&a), Err(SimError::Singular(_))));
    }

    #[test]
    fn hermitian_eigen_reconstructs() {
        let mut rng = test_rng(22);
        for n in 2..=4usize {
            let rows: Vec<Vec<Complex64>> = (0..n).map(|_| random_block(&mut rng, n)).collect();
            let b = ComplexMatrix::from_rows(&rows).unwrap();
            let a = b.mul(&b.hermitian()).unwrap(); // Hermitian PSD
            let (eigs, q) = hermitian_eigen(&a).unwrap();
            // q diag(eigs) q^H == a
            for r in 0..n {
                for c in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j in 0..n {
                        acc += q.at(r, j) * q.at(c, j).conj() * eigs[j];
                    }
                    assert!((acc - a.at(r, c)).norm() < 1e-9, "eigen reconstruction");
                }
            }
        }
    }

    #[test]
    fn herm_solve_matches_direct() {
        let mut rng = test_rng(23);
        for _ in 0..20 {
            let rows: Vec<Vec<Complex64>> = (0..4).map(|_| random_block(&mut rng, 4)).collect();
            let b = ComplexMatrix::from_rows(&rows).unwrap();
            let mut a = b.mul(&b.hermitian()).unwrap();
            for i in 0..4 {
                *a.at_mut(i, i) += Complex64::new(0.1, 0.0);
            }
            let x_true = random_block(&mut rng, 4);
            let rhs = a.mul_vec(&x_true).unwrap();
            let x = herm_solve(&a, &rhs).unwrap();
            assert!(max_err(&x, &x_true) < 1e-9);
        }
    }

    #[test]
    fn herm_solve_rejects_singular() {
        let a = ComplexMatrix::zeros(3, 3);
        let b = vec![Complex64::new(1.0, 0.0); 3];
        assert!(matches!(herm_solve(&a, &b), Err(SimError::Singular(_))));
    }
}
