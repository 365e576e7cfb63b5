//! Reduced Newton system of the interior-point iteration.
//!
//! Solves
//!
//! ```text
//! [ P   Aᵀ  Gᵀ  ] [dx]   [bx]
//! [ A   0   0   ] [dy] = [by]
//! [ G   0  -WᵀW ] [dz]   [bz]
//! ```
//!
//! with `G = -E`, `E` the selector of cone coordinates, in the scaled
//! variable `dz̃ = W dz`. Eliminating `dz̃` leaves `H = P + EᵀDE`,
//! `D = (WᵀW)⁻¹`. The `(1,1)` block is regularised
//! to `H + AᵀA`, which leaves the solution unchanged but makes it positive
//! definite whenever the original system is nonsingular; `dy` then comes
//! from the Schur complement `A (H + AᵀA)⁻¹ Aᵀ`. A few rounds of iterative
//! refinement against the unregularised system follow.

use alloc::vec;
use alloc::vec::Vec;

use super::cones::{BlockScaling, ConeKind};
use crate::linalg::{self, Cholesky, Matrix};

/// Position of one cone block in `x` and in the slack vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Slot {
    pub x_off: usize,
    pub s_off: usize,
    pub kind: ConeKind,
}

impl Slot {
    pub fn len(&self) -> usize {
        self.kind.len()
    }
}

/// Program data in dense form.
#[derive(Debug, Clone)]
pub(crate) struct Dense {
    pub p: Matrix,
    pub a: Matrix,
    /// `AᵀA`, fixed for the whole solve.
    pub ata: Matrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub slots: Vec<Slot>,
    pub ns: usize,
}

impl Dense {
    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    /// `E x`.
    pub fn select(&self, x: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.ns];
        for sl in &self.slots {
            s[sl.s_off..sl.s_off + sl.len()].copy_from_slice(&x[sl.x_off..sl.x_off + sl.len()]);
        }
        s
    }

    /// `out += alpha Eᵀ v`.
    pub fn scatter(&self, alpha: f64, v: &[f64], out: &mut [f64]) {
        for sl in &self.slots {
            linalg::axpy(alpha, &v[sl.s_off..sl.s_off + sl.len()], &mut out[sl.x_off..sl.x_off + sl.len()]);
        }
    }
}

const STATIC_REG: f64 = 1e-10;
const REFINE_STEPS: usize = 10;

pub(crate) struct Kkt<'a> {
    data: &'a Dense,
    scalings: &'a [BlockScaling],
    h: Cholesky,
    schur: Cholesky,
    /// Row `r` is `H⁻¹ aᵣ`.
    hinv_at: Matrix,
}

impl<'a> Kkt<'a> {
    /// Fails when either Cholesky factorisation breaks down even after
    /// escalating the static regularisation.
    pub fn factor(data: &'a Dense, scalings: &'a [BlockScaling]) -> Option<Self> {
        let n = data.n();
        let m = data.m();
        let d: Vec<Matrix> = scalings.iter().map(|s| s.d_matrix()).collect();
        let mut h = data.p.clone();
        for (sl, dm) in data.slots.iter().zip(&d) {
            for i in 0..sl.len() {
                for j in 0..sl.len() {
                    h[(sl.x_off + i, sl.x_off + j)] += dm[(i, j)];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] += data.ata[(i, j)];
            }
        }
        h.symmetrize();
        let mut reg = STATIC_REG;
        loop {
            let mut hr = h.clone();
            for i in 0..n {
                hr[(i, i)] += reg;
            }
            if let Ok(hc) = Cholesky::factor(&hr) {
                let mut hinv_at = Matrix::zeros(m, n);
                for r in 0..m {
                    let sol = hc.solve(data.a.row(r));
                    for (j, v) in sol.into_iter().enumerate() {
                        hinv_at[(r, j)] = v;
                    }
                }
                let mut s = Matrix::zeros(m, m);
                for r in 0..m {
                    for q in 0..=r {
                        let v = linalg::dot(data.a.row(r), hinv_at.row(q));
                        s[(r, q)] = v;
                        s[(q, r)] = v;
                    }
                }
                let sscale = (0..m).fold(1e-300_f64, |acc, i| acc.max(s[(i, i)]));
                for i in 0..m {
                    s[(i, i)] += reg * sscale;
                }
                if let Ok(sc) = Cholesky::factor(&s) {
                    return Some(Self { data, scalings, h: hc, schur: sc, hinv_at });
                }
            }
            reg *= 100.0;
            if reg > 1e-5 {
                return None;
            }
        }
    }

    fn blockwise(&self, v: &[f64], f: impl Fn(&BlockScaling, &[f64]) -> Vec<f64>) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (sl, sc) in self.data.slots.iter().zip(self.scalings) {
            let r = sl.s_off..sl.s_off + sl.len();
            out[r.clone()].copy_from_slice(&f(sc, &v[r]));
        }
        out
    }

    fn solve_once(&self, bx: &[f64], by: &[f64], bz: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let data = self.data;
        let mut r1 = bx.to_vec();
        data.scatter(-1.0, &self.blockwise(bz, |b, v| b.apply_winv(v)), &mut r1);
        let aty = data.a.matvec_t(by);
        linalg::axpy(1.0, &aty, &mut r1);
        let t = self.h.solve(&r1);
        let mut rhs = data.a.matvec(&t);
        linalg::axpy(-1.0, by, &mut rhs);
        let dy = self.schur.solve(&rhs);
        let mut dx = t;
        for (r, &v) in dy.iter().enumerate() {
            linalg::axpy(-v, self.hinv_at.row(r), &mut dx);
        }
        let mut dz = self.blockwise(&data.select(&dx), |b, v| b.apply_winv_t(v));
        for (d, b) in dz.iter_mut().zip(bz) {
            *d = -*d - b;
        }
        (dx, dy, dz)
    }

    /// Solves the scaled system
    ///
    /// ```text
    /// P dx + Aᵀdy + GᵀW⁻¹ dz̃ = bx,   A dx = by,   W⁻ᵀG dx − dz̃ = bz̃
    /// ```
    ///
    /// returning `(dx, dy, dz̃)` with `dz̃ = W dz`.
    pub fn solve(&self, bx: &[f64], by: &[f64], bz: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let data = self.data;
        let (mut dx, mut dy, mut dz) = self.solve_once(bx, by, bz);
        for _ in 0..REFINE_STEPS {
            let mut e1 = bx.to_vec();
            linalg::axpy(-1.0, &data.p.matvec(&dx), &mut e1);
            linalg::axpy(-1.0, &data.a.matvec_t(&dy), &mut e1);
            data.scatter(1.0, &self.blockwise(&dz, |b, v| b.apply_winv(v)), &mut e1);
            let mut e2 = by.to_vec();
            linalg::axpy(-1.0, &data.a.matvec(&dx), &mut e2);
            let mut e3 = bz.to_vec();
            linalg::axpy(1.0, &self.blockwise(&data.select(&dx), |b, v| b.apply_winv_t(v)), &mut e3);
            linalg::axpy(1.0, &dz, &mut e3);
            let err = linalg::norm_inf(&e1).max(linalg::norm_inf(&e2)).max(linalg::norm_inf(&e3));
            let size = 1.0 + linalg::norm_inf(bx).max(linalg::norm_inf(by)).max(linalg::norm_inf(bz));
            // Third-block error in unscaled form.
            let err_s = linalg::norm_inf(&self.blockwise(&e3, |b, v| b.apply_wt(v)));
            let size_s = 1.0 + linalg::norm_inf(&self.blockwise(bz, |b, v| b.apply_wt(v)));
            if err <= 1e-14 * size && err_s <= 1e-14 * size_s {
                break;
            }
            let (cx, cy, cz) = self.solve_once(&e1, &e2, &e3);
            linalg::axpy(1.0, &cx, &mut dx);
            linalg::axpy(1.0, &cy, &mut dy);
            linalg::axpy(1.0, &cz, &mut dz);
        }
        (dx, dy, dz)
    }
}
