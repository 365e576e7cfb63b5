//! Complex Hermitian matrices and their real symmetric embedding.
//!
//! A Hermitian `H = A + iB` is represented in real arithmetic by
//! `embed(H) = [[A, -B], [B, A]]`, which is symmetric, has the spectrum of
//! `H` with every eigenvalue doubled, and satisfies
//! `Tr(H W) = ½ Tr(embed(H) embed(W))`. The conic solver only ever sees
//! embedded blocks.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Tolerance on `|H_kl - conj(H_lk)|` accepted at construction.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Default relative eigenvalue threshold for declaring numeric rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-5;

const JACOBI_SWEEPS: usize = 100;

/// Dense complex Hermitian matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    entries: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, entries: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut h = Self::zeros(n);
        for k in 0..n {
            h.entries[k * n + k] = Complex64::new(1.0, 0.0);
        }
        h
    }

    /// `1_k 1_kᵀ`: picks out `|V_k|²` as a quadratic form.
    pub fn unit(n: usize, k: usize) -> Self {
        let mut h = Self::zeros(n);
        h.entries[k * n + k] = Complex64::new(1.0, 0.0);
        h
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut h = Self::zeros(n);
        for (k, d) in diag.iter().enumerate() {
            h.entries[k * n + k] = Complex64::new(*d, 0.0);
        }
        h
    }

    /// `V Vᴴ`.
    pub fn outer(v: &[Complex64]) -> Self {
        let n = v.len();
        let mut h = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                h.entries[i * n + j] = v[i] * v[j].conj();
            }
        }
        h
    }

    /// Builds from row-major entries, rejecting matrices that are not
    /// Hermitian within [`HERMITIAN_TOL`]. The stored matrix is the exact
    /// Hermitian part.
    pub fn from_entries(n: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: entries.len() });
        }
        let mut asym = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                let d = entries[i * n + j] - entries[j * n + i].conj();
                asym = asym.max(d.norm());
            }
        }
        if asym > HERMITIAN_TOL {
            return Err(Error::NotHermitian { asymmetry: asym });
        }
        let mut h = Self { n, entries };
        h.hermitize();
        Ok(h)
    }

    fn hermitize(&mut self) {
        let n = self.n;
        for i in 0..n {
            let d = self.entries[i * n + i];
            self.entries[i * n + i] = Complex64::new(d.re, 0.0);
            for j in (i + 1)..n {
                let avg = 0.5 * (self.entries[i * n + j] + self.entries[j * n + i].conj());
                self.entries[i * n + j] = avg;
                self.entries[j * n + i] = avg.conj();
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Adds `value` at `(i, j)` and its conjugate at `(j, i)`; on the
    /// diagonal only the real part is used.
    pub fn add_entry(&mut self, i: usize, j: usize, value: Complex64) {
        let n = self.n;
        if i == j {
            self.entries[i * n + i] += Complex64::new(value.re, 0.0);
        } else {
            self.entries[i * n + j] += value;
            self.entries[j * n + i] += value.conj();
        }
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &HermitianMatrix) {
        assert_eq!(self.n, other.n, "hermitian dimensions");
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += b * alpha;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { n: self.n, entries: self.entries.iter().map(|e| e * alpha).collect() }
    }

    pub fn sub(&self, other: &HermitianMatrix) -> Self {
        let mut out = self.clone();
        out.add_scaled(-1.0, other);
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.entries.iter().map(|e| e.norm_sqr()).sum())
    }

    /// `Re Tr(self · other)`; the trace of a product of Hermitian matrices
    /// is real.
    pub fn trace_product(&self, other: &HermitianMatrix) -> f64 {
        assert_eq!(self.n, other.n, "hermitian dimensions");
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (self.entries[i * n + j] * other.entries[j * n + i]).re;
            }
        }
        acc
    }

    /// `H V`.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: v.len() });
        }
        let n = self.n;
        Ok((0..n)
            .map(|i| (0..n).map(|j| self.entries[i * n + j] * v[j]).sum())
            .collect())
    }

    /// `Re(Vᴴ H V)`.
    pub fn quadratic_form(&self, v: &[Complex64]) -> Result<f64> {
        let hv = self.apply(v)?;
        Ok(v.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum())
    }

    /// Full complex value of `Vᴴ H V`; the imaginary part is round-off.
    pub fn quadratic_form_complex(&self, v: &[Complex64]) -> Result<Complex64> {
        let hv = self.apply(v)?;
        Ok(v.iter().zip(&hv).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn real_embed(&self) -> SymmetricEmbedding {
        let n = self.n;
        let mut m = Matrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let h = self.entries[i * n + j];
                m[(i, j)] = h.re;
                m[(n + i, n + j)] = h.re;
                m[(i, n + j)] = -h.im;
                m[(n + i, j)] = h.im;
            }
        }
        SymmetricEmbedding { n, matrix: m }
    }

    /// Eigenvalues, descending, each counted once.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.eigen()?.0)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let values = self.eigenvalues()?;
        Ok(values.last().copied().unwrap_or(0.0))
    }

    /// Descending eigenvalues with the unit eigenvector of the largest one.
    fn eigen(&self) -> Result<(Vec<f64>, Vec<Complex64>)> {
        let n = self.n;
        if n == 0 {
            return Ok((Vec::new(), Vec::new()));
        }
        let emb = self.real_embed();
        let eig = linalg::symmetric_eigen(&emb.matrix, JACOBI_SWEEPS).ok_or(Error::EigenNoConvergence)?;
        // Embedded spectrum is the Hermitian one with every value doubled.
        let mut values: Vec<f64> = eig.values.iter().rev().step_by(2).copied().collect();
        values.truncate(n);
        let top = 2 * n - 1;
        let top_vec = (0..n)
            .map(|r| Complex64::new(eig.vectors[(r, top)], eig.vectors[(n + r, top)]))
            .collect();
        Ok((values, top_vec))
    }

    /// `√λ₁ u₁`, phase-normalised: the best rank-one approximation factor.
    pub fn leading_vector(&self) -> Result<Vec<Complex64>> {
        let (values, top) = self.eigen()?;
        let scale = libm::sqrt(values.first().copied().unwrap_or(0.0).max(0.0));
        let mut v: Vec<Complex64> = top.iter().map(|u| u * scale).collect();
        normalize_phase(&mut v);
        Ok(v)
    }

    /// Spectral rank test and rank-one recovery `W ≈ V Vᴴ`.
    pub fn rank1_decompose(&self, rank_tol: f64) -> Result<Rank1Decomposition> {
        let (values, top) = self.eigen()?;
        let lead = values.first().copied().unwrap_or(0.0);
        let min = values.last().copied().unwrap_or(0.0);
        if lead <= 0.0 {
            if min < 0.0 {
                return Err(Error::NotPsd { min_eigenvalue: min });
            }
            return Ok(Rank1Decomposition { eigenvalues: values, rank: 0, voltage: None });
        }
        if min < -10.0 * rank_tol * lead {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        let rank = values.iter().filter(|&&v| v > rank_tol * lead).count();
        let voltage = (rank == 1).then(|| {
            let scale = libm::sqrt(lead);
            let mut v: Vec<Complex64> = top.iter().map(|u| u * scale).collect();
            normalize_phase(&mut v);
            v
        });
        Ok(Rank1Decomposition { eigenvalues: values, rank, voltage })
    }
}

/// Rotates `v` by a global phase so its first non-negligible entry is real
/// and nonnegative.
pub fn normalize_phase(v: &mut [Complex64]) {
    let scale = v.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    if scale == 0.0 {
        return;
    }
    if let Some(first) = v.iter().find(|z| z.norm() > 1e-12 * scale).copied() {
        let rot = first.conj() / first.norm();
        for z in v.iter_mut() {
            *z *= rot;
        }
    }
}

/// Outcome of [`HermitianMatrix::rank1_decompose`].
#[derive(Debug, Clone, PartialEq)]
pub struct Rank1Decomposition {
    /// Descending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Count of eigenvalues above `rank_tol · λ₁`.
    pub rank: usize,
    /// `√λ₁ u₁`, phase-normalised, present iff `rank == 1`.
    pub voltage: Option<Vec<Complex64>>,
}

/// Real symmetric `2n × 2n` image of a Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEmbedding {
    n: usize,
    matrix: Matrix,
}

impl SymmetricEmbedding {
    /// Wraps an arbitrary real symmetric `2n × 2n` matrix.
    pub fn from_matrix(matrix: Matrix) -> Result<Self> {
        if matrix.rows() != matrix.cols() || matrix.rows() % 2 != 0 {
            return Err(Error::DimensionMismatch { expected: matrix.rows() + matrix.rows() % 2, found: matrix.cols() });
        }
        Ok(Self { n: matrix.rows() / 2, matrix })
    }

    pub fn complex_dim(&self) -> usize {
        self.n
    }

    pub fn n_real(&self) -> usize {
        2 * self.n
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn trace_product(&self, other: &SymmetricEmbedding) -> f64 {
        linalg::dot(self.matrix.as_slice(), other.matrix.as_slice())
    }

    /// Projects onto the embedded-Hermitian subspace and returns the
    /// Hermitian matrix: `A = (X₁₁ + X₂₂)/2`, `B = (X₂₁ − X₁₂)/2`. This is a
    /// left inverse of `real_embed` and maps PSD matrices to PSD matrices.
    pub fn to_hermitian(&self) -> HermitianMatrix {
        let n = self.n;
        let m = &self.matrix;
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let a = 0.5 * (m[(i, j)] + m[(n + i, n + j)]);
                let b = 0.5 * (m[(n + i, j)] - m[(i, n + j)]);
                entries[i * n + j] = Complex64::new(a, b);
            }
        }
        let mut h = HermitianMatrix { n, entries };
        h.hermitize();
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn phi_unit_line() -> HermitianMatrix {
        // Φ_kl for y = 1 between buses 0 and 1.
        HermitianMatrix::from_entries(2, vec![c(1.0, 0.0), c(-0.5, 0.0), c(-0.5, 0.0), c(0.0, 0.0)]).unwrap()
    }

    #[test]
    fn quadratic_form_examples() {
        let phi = phi_unit_line();
        assert_abs_diff_eq!(phi.quadratic_form(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(phi.quadratic_form(&[c(1.0, 0.0), c(0.9, 0.0)]).unwrap(), 0.1, epsilon = 1e-15);
        let unit = HermitianMatrix::unit(3, 1);
        let v = [c(1.0, 0.0), c(0.95, 0.0), c(0.3, -0.2)];
        assert_abs_diff_eq!(unit.quadratic_form(&v).unwrap(), 0.9025, epsilon = 1e-15);
    }

    #[test]
    fn quadratic_form_dimension_mismatch() {
        let err = phi_unit_line().quadratic_form(&[c(1.0, 0.0)]).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 2, found: 1 });
    }

    #[test]
    fn rejects_non_hermitian() {
        let err = HermitianMatrix::from_entries(2, vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(0.0, 0.0)]);
        assert!(matches!(err, Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn embed_examples() {
        let id = HermitianMatrix::identity(2).real_embed();
        assert_eq!(id.matrix(), &Matrix::identity(4));
        let h = HermitianMatrix::from_entries(2, vec![c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)]).unwrap();
        let expected = Matrix::from_row_major(
            4,
            4,
            vec![0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0],
        );
        assert_eq!(h.real_embed().matrix(), &expected);
    }

    #[test]
    fn min_eigenvalue_examples() {
        assert_abs_diff_eq!(HermitianMatrix::identity(3).min_eigenvalue().unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(HermitianMatrix::diagonal(&[3.0, -2.0]).min_eigenvalue().unwrap(), -2.0, epsilon = 1e-14);
        let v = [c(1.0, 0.2), c(-0.3, 0.7), c(0.5, 0.0)];
        assert_abs_diff_eq!(HermitianMatrix::outer(&v).min_eigenvalue().unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn rank1_exact_recovery() {
        let v = [c(1.0, 0.0), Complex64::from_polar(1.0, -0.1)];
        let w = HermitianMatrix::outer(&v);
        let d = w.rank1_decompose(DEFAULT_RANK_TOL).unwrap();
        assert_eq!(d.rank, 1);
        let got = d.voltage.unwrap();
        for (a, b) in got.iter().zip(&v) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rank1_rejects_full_rank_and_indefinite() {
        let d = HermitianMatrix::identity(2).rank1_decompose(DEFAULT_RANK_TOL).unwrap();
        assert_eq!(d.rank, 2);
        assert!(d.voltage.is_none());
        let err = HermitianMatrix::diagonal(&[1.0, -0.5]).rank1_decompose(DEFAULT_RANK_TOL);
        assert!(matches!(err, Err(Error::NotPsd { .. })));
    }

    fn arb_complex() -> impl Strategy<Value = Complex64> {
        (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b)| c(a, b))
    }

    fn arb_hermitian(n: usize) -> impl Strategy<Value = HermitianMatrix> {
        proptest::collection::vec(arb_complex(), n * n).prop_map(move |raw| {
            let mut h = HermitianMatrix::zeros(n);
            for i in 0..n {
                for j in i..n {
                    h.add_entry(i, j, raw[i * n + j]);
                }
            }
            h
        })
    }

    proptest! {
        #[test]
        fn trace_identity_holds(h in arb_hermitian(4), w in arb_hermitian(4)) {
            let lhs = h.trace_product(&w);
            let rhs = 0.5 * h.real_embed().trace_product(&w.real_embed());
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn quadratic_form_imaginary_part_vanishes(h in arb_hermitian(5), v in proptest::collection::vec(arb_complex(), 5)) {
            let q = h.quadratic_form_complex(&v).unwrap();
            let vnorm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!(q.im.abs() <= 1e-10 * h.frobenius_norm() * vnorm + 1e-300);
        }

        #[test]
        fn embedding_is_linear(h in arb_hermitian(3), g in arb_hermitian(3), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let mut combo = h.scaled(a);
            combo.add_scaled(b, &g);
            let lhs = combo.real_embed();
            let (eh, eg) = (h.real_embed(), g.real_embed());
            for i in 0..6 {
                for j in 0..6 {
                    let rhs = a * eh.get(i, j) + b * eg.get(i, j);
                    prop_assert!((lhs.get(i, j) - rhs).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn embedding_round_trips(h in arb_hermitian(4)) {
            let back = h.real_embed().to_hermitian();
            prop_assert!(back.sub(&h).frobenius_norm() <= 1e-14);
        }

        #[test]
        fn rank1_reconstruction(v in proptest::collection::vec(arb_complex(), 4)) {
            let w = HermitianMatrix::outer(&v);
            prop_assume!(w.frobenius_norm() > 1e-3);
            let d = w.rank1_decompose(DEFAULT_RANK_TOL).unwrap();
            prop_assert_eq!(d.rank, 1);
            let rec = HermitianMatrix::outer(d.voltage.as_ref().unwrap());
            prop_assert!(rec.sub(&w).frobenius_norm() <= 10.0 * DEFAULT_RANK_TOL * w.frobenius_norm());
            let first = d.voltage.unwrap()[0];
            prop_assert!(first.im.abs() <= 1e-12 * (1.0 + first.re.abs()) && first.re >= 0.0);
        }

        #[test]
        fn embedded_spectrum_doubles(h in arb_hermitian(3)) {
            let values = h.eigenvalues().unwrap();
            let emb = crate::linalg::symmetric_eigen(h.real_embed().matrix(), 100).unwrap();
            let mut desc = emb.values.clone();
            desc.reverse();
            for (k, v) in values.iter().enumerate() {
                prop_assert!((desc[2 * k] - v).abs() <= 1e-10);
                prop_assert!((desc[2 * k + 1] - v).abs() <= 1e-10);
            }
        }
    }
}
