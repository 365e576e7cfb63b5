//! Cone arithmetic, Jordan products and Nesterov–Todd scalings.
//!
//! PSD blocks are stored as `svec`: the lower triangle, column-major, with
//! off-diagonal entries multiplied by `√2` so the Euclidean inner product
//! of two svecs equals the trace inner product of the matrices.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{self, Cholesky, Matrix};

const SQRT2: f64 = core::f64::consts::SQRT_2;

pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Position of entry `(i, j)` of an `n × n` symmetric matrix in its svec.
pub fn svec_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    j * n - j * j.saturating_sub(1) / 2 + (i - j)
}

pub fn svec(m: &Matrix) -> Vec<f64> {
    let n = m.rows();
    let mut out = Vec::with_capacity(svec_len(n));
    for j in 0..n {
        out.push(m[(j, j)]);
        for i in (j + 1)..n {
            out.push(SQRT2 * 0.5 * (m[(i, j)] + m[(j, i)]));
        }
    }
    out
}

pub fn smat(n: usize, v: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        m[(j, j)] = v[k];
        k += 1;
        for i in (j + 1)..n {
            let e = v[k] / SQRT2;
            m[(i, j)] = e;
            m[(j, i)] = e;
            k += 1;
        }
    }
    m
}

/// Cone block in the slack space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    Nonneg(usize),
    Soc(usize),
    /// Matrix order; the block holds `svec_len(n)` entries.
    Psd(usize),
}

impl ConeKind {
    pub fn len(&self) -> usize {
        match *self {
            ConeKind::Nonneg(d) | ConeKind::Soc(d) => d,
            ConeKind::Psd(n) => svec_len(n),
        }
    }

    /// Barrier degree.
    pub fn degree(&self) -> usize {
        match *self {
            ConeKind::Nonneg(d) => d,
            ConeKind::Soc(_) => 1,
            ConeKind::Psd(n) => n,
        }
    }

    pub fn identity(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.len()];
        match *self {
            ConeKind::Nonneg(_) => e.iter_mut().for_each(|v| *v = 1.0),
            ConeKind::Soc(_) => e[0] = 1.0,
            ConeKind::Psd(n) => {
                for j in 0..n {
                    e[svec_index(n, j, j)] = 1.0;
                }
            }
        }
        e
    }

    /// Smallest Jordan eigenvalue; `u ∈ int K` iff this is positive.
    pub fn min_eigenvalue(&self, u: &[f64]) -> f64 {
        match *self {
            ConeKind::Nonneg(_) => u.iter().copied().fold(f64::INFINITY, f64::min),
            ConeKind::Soc(_) => u[0] - linalg::norm2(&u[1..]),
            ConeKind::Psd(n) => {
                linalg::min_symmetric_eigenvalue(&smat(n, u)).unwrap_or(f64::NEG_INFINITY)
            }
        }
    }

    /// Jordan product `u ∘ v`.
    pub fn product(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        match *self {
            ConeKind::Nonneg(_) => u.iter().zip(v).map(|(a, b)| a * b).collect(),
            ConeKind::Soc(_) => soc_product(u, v),
            ConeKind::Psd(n) => {
                let (a, b) = (smat(n, u), smat(n, v));
                let mut ab = a.matmul(&b);
                let ba = b.matmul(&a);
                for i in 0..n {
                    for j in 0..n {
                        ab[(i, j)] = 0.5 * (ab[(i, j)] + ba[(i, j)]);
                    }
                }
                svec(&ab)
            }
        }
    }
}

fn soc_product(u: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(u.len());
    out.push(linalg::dot(u, v));
    for i in 1..u.len() {
        out.push(u[0] * v[i] + v[0] * u[i]);
    }
    out
}

/// Largest `α ≥ 0` with `u + α d` inside a second-order cone, given `u`
/// interior.
fn soc_max_step(u: &[f64], d: &[f64]) -> f64 {
    let a = d[0] * d[0] - linalg::dot(&d[1..], &d[1..]);
    let b = u[0] * d[0] - linalg::dot(&u[1..], &d[1..]);
    let c = u[0] * u[0] - linalg::dot(&u[1..], &u[1..]);
    let disc = b * b - a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let denom = -b + libm::sqrt(disc);
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        c / denom
    }
}

/// Nesterov–Todd scaling of one block: `W z = W⁻ᵀ s = λ`.
#[derive(Debug, Clone)]
pub struct BlockScaling {
    op: ScalingOp,
    /// `λ` in the block's own coordinates.
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone)]
enum ScalingOp {
    /// `W = diag(d)`.
    Nonneg { d: Vec<f64> },
    /// `W` symmetric.
    Soc { w: Matrix, w_inv: Matrix },
    /// `W(X) = RᵀXR`; eigenvalues of `λ` kept for the diagonal products.
    Psd { r: Matrix, r_inv: Matrix, eig: Vec<f64> },
}

impl BlockScaling {
    /// Returns `None` if `s` or `z` is not strictly interior.
    pub fn new(kind: ConeKind, s: &[f64], z: &[f64]) -> Option<Self> {
        match kind {
            ConeKind::Nonneg(_) => {
                if s.iter().chain(z).any(|&v| !(v > 0.0)) {
                    return None;
                }
                let d = s.iter().zip(z).map(|(a, b)| libm::sqrt(a / b)).collect();
                let lambda = s.iter().zip(z).map(|(a, b)| libm::sqrt(a * b)).collect();
                Some(Self { op: ScalingOp::Nonneg { d }, lambda })
            }
            ConeKind::Soc(dim) => {
                let sjs = s[0] * s[0] - linalg::dot(&s[1..], &s[1..]);
                let zjz = z[0] * z[0] - linalg::dot(&z[1..], &z[1..]);
                if !(sjs > 0.0 && zjz > 0.0 && s[0] > 0.0 && z[0] > 0.0) {
                    return None;
                }
                let (sn, zn) = (libm::sqrt(sjs), libm::sqrt(zjz));
                let sb: Vec<f64> = s.iter().map(|v| v / sn).collect();
                let zb: Vec<f64> = z.iter().map(|v| v / zn).collect();
                let gamma = libm::sqrt(0.5 * (1.0 + linalg::dot(&sb, &zb)));
                let mut wb: Vec<f64> = (0..dim).map(|i| if i == 0 { sb[0] + zb[0] } else { sb[i] - zb[i] }).collect();
                wb.iter_mut().for_each(|v| *v /= 2.0 * gamma);
                let eta = libm::sqrt(sn / zn);
                let denom = libm::sqrt(2.0 * (wb[0] + 1.0));
                let mut v = wb;
                v[0] += 1.0;
                v.iter_mut().for_each(|e| *e /= denom);
                let mut w = Matrix::zeros(dim, dim);
                let mut w_inv = Matrix::zeros(dim, dim);
                for i in 0..dim {
                    let ji = if i == 0 { 1.0 } else { -1.0 };
                    for j in 0..dim {
                        let jj = if j == 0 { 1.0 } else { -1.0 };
                        let jdelta = if i == j { ji } else { 0.0 };
                        w[(i, j)] = eta * (2.0 * v[i] * v[j] - jdelta);
                        w_inv[(i, j)] = (2.0 * ji * v[i] * v[j] * jj - jdelta) / eta;
                    }
                }
                let lambda = w.matvec(z);
                Some(Self { op: ScalingOp::Soc { w, w_inv }, lambda })
            }
            ConeKind::Psd(n) => {
                let sm = smat(n, s);
                let zm = smat(n, z);
                let ls = Cholesky::factor(&sm).ok()?;
                let l = ls.lower();
                let ltzl = l.transpose().matmul(&zm).matmul(l);
                let eig = linalg::symmetric_eigen(&ltzl, 100)?;
                if eig.values.iter().any(|&v| !(v > 0.0)) {
                    return None;
                }
                let lam: Vec<f64> = eig.values.iter().map(|&v| libm::sqrt(v)).collect();
                // R = L V Λ^{-1/2}, R⁻¹ = Λ^{1/2} Vᵀ L⁻¹
                let mut lv = l.matmul(&eig.vectors);
                for i in 0..n {
                    for j in 0..n {
                        lv[(i, j)] /= libm::sqrt(lam[j]);
                    }
                }
                let l_inv = lower_inverse(l);
                let mut r_inv = eig.vectors.transpose().matmul(&l_inv);
                for i in 0..n {
                    let f = libm::sqrt(lam[i]);
                    for j in 0..n {
                        r_inv[(i, j)] *= f;
                    }
                }
                let lambda = svec(&Matrix::from_row_major(
                    n,
                    n,
                    (0..n * n).map(|k| if k / n == k % n { lam[k / n] } else { 0.0 }).collect(),
                ));
                Some(Self { op: ScalingOp::Psd { r: lv, r_inv, eig: lam }, lambda })
            }
        }
    }

    pub fn apply_w(&self, v: &[f64]) -> Vec<f64> {
        match &self.op {
            ScalingOp::Nonneg { d } => v.iter().zip(d).map(|(a, b)| a * b).collect(),
            ScalingOp::Soc { w, .. } => w.matvec(v),
            ScalingOp::Psd { r, .. } => congruence(r, v),
        }
    }

    pub fn apply_wt(&self, v: &[f64]) -> Vec<f64> {
        match &self.op {
            ScalingOp::Nonneg { d } => v.iter().zip(d).map(|(a, b)| a * b).collect(),
            ScalingOp::Soc { w, .. } => w.matvec(v),
            ScalingOp::Psd { r, .. } => congruence(&r.transpose(), v),
        }
    }

    pub fn apply_winv(&self, v: &[f64]) -> Vec<f64> {
        match &self.op {
            ScalingOp::Nonneg { d } => v.iter().zip(d).map(|(a, b)| a / b).collect(),
            ScalingOp::Soc { w_inv, .. } => w_inv.matvec(v),
            ScalingOp::Psd { r_inv, .. } => congruence(r_inv, v),
        }
    }

    pub fn apply_winv_t(&self, v: &[f64]) -> Vec<f64> {
        match &self.op {
            ScalingOp::Nonneg { d } => v.iter().zip(d).map(|(a, b)| a / b).collect(),
            ScalingOp::Soc { w_inv, .. } => w_inv.matvec(v),
            ScalingOp::Psd { r_inv, .. } => congruence(&r_inv.transpose(), v),
        }
    }

    /// `WᵀW v`.
    #[cfg(test)]
    pub fn apply_wtw(&self, v: &[f64]) -> Vec<f64> {
        self.apply_wt(&self.apply_w(v))
    }

    /// Dense matrix of `(WᵀW)⁻¹` in block coordinates.
    pub fn d_matrix(&self) -> Matrix {
        match &self.op {
            ScalingOp::Nonneg { d } => {
                let mut m = Matrix::zeros(d.len(), d.len());
                for (i, di) in d.iter().enumerate() {
                    m[(i, i)] = 1.0 / (di * di);
                }
                m
            }
            ScalingOp::Soc { w_inv, .. } => w_inv.matmul(w_inv),
            ScalingOp::Psd { r_inv, .. } => {
                // (WᵀW)⁻¹(X) = M X M with M = R⁻ᵀR⁻¹.
                let m = r_inv.transpose().matmul(r_inv);
                congruence_operator(&m)
            }
        }
    }

    /// `λ ∘ u`.
    pub fn lambda_product(&self, u: &[f64]) -> Vec<f64> {
        match &self.op {
            ScalingOp::Nonneg { .. } => u.iter().zip(&self.lambda).map(|(a, b)| a * b).collect(),
            ScalingOp::Soc { .. } => soc_product(&self.lambda, u),
            ScalingOp::Psd { eig, .. } => psd_diag_scale(eig, u, |a, b| 0.5 * (a + b)),
        }
    }

    /// Solves `λ ∘ x = u` for `x`.
    pub fn lambda_divide(&self, u: &[f64]) -> Vec<f64> {
        match &self.op {
            ScalingOp::Nonneg { .. } => u.iter().zip(&self.lambda).map(|(a, b)| a / b).collect(),
            ScalingOp::Soc { .. } => {
                let l = &self.lambda;
                let det = l[0] * l[0] - linalg::dot(&l[1..], &l[1..]);
                let x0 = (l[0] * u[0] - linalg::dot(&l[1..], &u[1..])) / det;
                let mut x = Vec::with_capacity(u.len());
                x.push(x0);
                for i in 1..u.len() {
                    x.push((u[i] - x0 * l[i]) / l[0]);
                }
                x
            }
            ScalingOp::Psd { eig, .. } => psd_diag_scale(eig, u, |a, b| 2.0 / (a + b)),
        }
    }

    /// Largest step `α` keeping `λ + α d` in the cone.
    pub fn max_step(&self, d: &[f64]) -> f64 {
        match &self.op {
            ScalingOp::Nonneg { .. } => d
                .iter()
                .zip(&self.lambda)
                .filter(|(di, _)| **di < 0.0)
                .map(|(di, li)| -li / di)
                .fold(f64::INFINITY, f64::min),
            ScalingOp::Soc { .. } => soc_max_step(&self.lambda, d),
            ScalingOp::Psd { eig, .. } => {
                let n = eig.len();
                let mut m = smat(n, d);
                for i in 0..n {
                    for j in 0..n {
                        m[(i, j)] /= libm::sqrt(eig[i] * eig[j]);
                    }
                }
                match linalg::min_symmetric_eigenvalue(&m) {
                    Some(v) if v < 0.0 => -1.0 / v,
                    Some(_) => f64::INFINITY,
                    None => 0.0,
                }
            }
        }
    }
}

fn psd_diag_scale(eig: &[f64], u: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let n = eig.len();
    let mut out = u.to_vec();
    for j in 0..n {
        for i in j..n {
            out[svec_index(n, i, j)] *= f(eig[i], eig[j]);
        }
    }
    out
}

/// `svec(Bᵀ X B)` for `X = smat(v)`.
fn congruence(b: &Matrix, v: &[f64]) -> Vec<f64> {
    let n = b.rows();
    let x = smat(n, v);
    svec(&b.transpose().matmul(&x).matmul(b))
}

/// svec matrix of `X ↦ M X M` for symmetric `M`.
fn congruence_operator(m: &Matrix) -> Matrix {
    let n = m.rows();
    let len = svec_len(n);
    let mut pairs = Vec::with_capacity(len);
    for j in 0..n {
        for i in j..n {
            pairs.push((i, j));
        }
    }
    let scale = |i: usize, j: usize| if i == j { 1.0 } else { SQRT2 };
    let mut out = Matrix::zeros(len, len);
    for (row, &(i, j)) in pairs.iter().enumerate() {
        for (col, &(k, l)) in pairs.iter().enumerate().skip(row) {
            let v = 0.5 * scale(i, j) * scale(k, l) * (m[(i, k)] * m[(j, l)] + m[(i, l)] * m[(j, k)]);
            out[(row, col)] = v;
            out[(col, row)] = v;
        }
    }
    out
}

fn lower_inverse(l: &Matrix) -> Matrix {
    let n = l.rows();
    let mut inv = Matrix::zeros(n, n);
    for col in 0..n {
        inv[(col, col)] = 1.0 / l[(col, col)];
        for i in (col + 1)..n {
            let mut s = 0.0;
            for k in col..i {
                s += l[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = -s / l[(i, i)];
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
    }

    #[test]
    fn svec_layout() {
        assert_eq!(svec_index(3, 0, 0), 0);
        assert_eq!(svec_index(3, 1, 0), 1);
        assert_eq!(svec_index(3, 2, 0), 2);
        assert_eq!(svec_index(3, 1, 1), 3);
        assert_eq!(svec_index(3, 2, 1), 4);
        assert_eq!(svec_index(3, 2, 2), 5);
        assert_eq!(svec_index(3, 0, 2), 2);
        let m = Matrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 3.0]);
        let v = svec(&m);
        assert!(close(&v, &[1.0, 2.0 * SQRT2, 3.0], 1e-15));
        assert_eq!(smat(2, &v), m);
    }

    #[test]
    fn svec_inner_product_is_trace() {
        let a = Matrix::from_row_major(3, 3, vec![1.0, 0.5, -0.2, 0.5, 2.0, 0.3, -0.2, 0.3, 1.5]);
        let b = Matrix::from_row_major(3, 3, vec![0.1, -0.4, 0.7, -0.4, 0.2, 0.9, 0.7, 0.9, -1.0]);
        let tr: f64 = (0..3).map(|i| (0..3).map(|j| a[(i, j)] * b[(j, i)]).sum::<f64>()).sum();
        assert!((linalg::dot(&svec(&a), &svec(&b)) - tr).abs() < 1e-14);
    }

    fn interior(kind: ConeKind, raw: &[f64]) -> Vec<f64> {
        // Shift a raw vector deep into the cone.
        let mut v = raw.to_vec();
        let shift = 1.0 - kind.min_eigenvalue(&v).min(0.0);
        for (vi, ei) in v.iter_mut().zip(kind.identity()) {
            *vi += shift * ei;
        }
        v
    }

    fn check_scaling(kind: ConeKind, s: &[f64], z: &[f64]) {
        let sc = BlockScaling::new(kind, s, z).unwrap();
        let wz = sc.apply_w(z);
        let wis = sc.apply_winv_t(s);
        assert!(close(&wz, &sc.lambda, 1e-9), "Wz = λ");
        assert!(close(&wis, &sc.lambda, 1e-9), "W⁻ᵀs = λ");
        let back = sc.apply_wtw(&sc.d_matrix().matvec(s));
        assert!(close(&back, s, 1e-8), "WᵀW D = I");
        let u: Vec<f64> = (0..s.len()).map(|i| 0.3 * i as f64 - 0.5).collect();
        let prod = sc.lambda_product(&sc.lambda_divide(&u));
        assert!(close(&prod, &u, 1e-9), "λ∘(λ⋄u) = u");
        let direct = kind.product(&sc.lambda, &u);
        assert!(close(&direct, &sc.lambda_product(&u), 1e-9), "λ∘u consistent");
    }

    proptest! {
        #[test]
        fn nonneg_scaling(s in proptest::collection::vec(0.1f64..5.0, 4), z in proptest::collection::vec(0.1f64..5.0, 4)) {
            check_scaling(ConeKind::Nonneg(4), &s, &z);
        }

        #[test]
        fn soc_scaling(s in proptest::collection::vec(-2.0f64..2.0, 4), z in proptest::collection::vec(-2.0f64..2.0, 4)) {
            let k = ConeKind::Soc(4);
            check_scaling(k, &interior(k, &s), &interior(k, &z));
        }

        #[test]
        fn psd_scaling(s in proptest::collection::vec(-1.0f64..1.0, 6), z in proptest::collection::vec(-1.0f64..1.0, 6)) {
            let k = ConeKind::Psd(3);
            check_scaling(k, &interior(k, &s), &interior(k, &z));
        }

        #[test]
        fn soc_step_hits_boundary(u in proptest::collection::vec(-2.0f64..2.0, 3), d in proptest::collection::vec(-3.0f64..3.0, 3)) {
            let k = ConeKind::Soc(3);
            let u = interior(k, &u);
            let a = soc_max_step(&u, &d);
            if a.is_finite() {
                let p: Vec<f64> = u.iter().zip(&d).map(|(x, y)| x + a * y).collect();
                prop_assert!(k.min_eigenvalue(&p).abs() <= 1e-8 * (1.0 + linalg::norm2(&p)));
            } else {
                let p: Vec<f64> = u.iter().zip(&d).map(|(x, y)| x + 1e6 * y).collect();
                prop_assert!(k.min_eigenvalue(&p) >= -1e-6 * linalg::norm2(&p));
            }
        }
    }
}
