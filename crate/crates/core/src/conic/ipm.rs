//! Primal–dual path following with Nesterov–Todd scaling and Mehrotra
//! predictor–corrector steps.
//!
//! The iteration works on the standard form
//!
//! ```text
//! minimize ½ xᵀPx + cᵀx   s.t.  Ax = b,  Gx + s = h,  s ∈ K
//! ```
//!
//! with `G = -E`, `h = 0`, where `E` picks the cone coordinates of `x`.
//! Internally the equality multipliers have the opposite sign to the
//! public convention.

use alloc::vec;
use alloc::vec::Vec;

use super::cones::BlockScaling;
use super::kkt::{Dense, Kkt, Slot};
use super::{ConeProgram, ConeSolution, SolveStatus};
use crate::error::{Error, Result};
use crate::linalg;

const STEP_FRACTION: f64 = 0.99;
const DIVERGENCE: f64 = 1e10;

fn densify(prog: &ConeProgram) -> Dense {
    let (a, b) = prog.equality_matrix();
    let ata = a.transpose().matmul(&a);
    let mut slots = Vec::new();
    let mut ns = 0;
    for (blk, kind) in prog.cone_kinds() {
        slots.push(Slot { x_off: blk.offset, s_off: ns, kind });
        ns += kind.len();
    }
    Dense { p: prog.quadratic_matrix(), a, ata, b, c: prog.linear().to_vec(), slots, ns }
}

fn scalings(data: &Dense, s: &[f64], z: &[f64]) -> Option<Vec<BlockScaling>> {
    data.slots
        .iter()
        .map(|sl| {
            let r = sl.s_off..sl.s_off + sl.len();
            BlockScaling::new(sl.kind, &s[r.clone()], &z[r])
        })
        .collect()
}

fn identity_scalings(data: &Dense) -> Vec<BlockScaling> {
    data.slots
        .iter()
        .map(|sl| {
            let e = sl.kind.identity();
            BlockScaling::new(sl.kind, &e, &e).expect("identity is interior")
        })
        .collect()
}

/// Shifts `u` along the identity so that its smallest Jordan eigenvalue is
/// at least one.
fn push_interior(data: &Dense, u: &mut [f64]) {
    for sl in &data.slots {
        let r = sl.s_off..sl.s_off + sl.len();
        let t = -sl.kind.min_eigenvalue(&u[r.clone()]);
        let nrm = linalg::norm2(&u[r.clone()]);
        if t >= -1e-8 * nrm.max(1.0) {
            linalg::axpy(1.0 + t, &sl.kind.identity(), &mut u[r]);
        }
    }
}

/// Per-block map over the slack space.
fn blockwise(data: &Dense, sc: &[BlockScaling], v: &[f64], f: impl Fn(&BlockScaling, &[f64]) -> Vec<f64>) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for (sl, b) in data.slots.iter().zip(sc) {
        let r = sl.s_off..sl.s_off + sl.len();
        out[r.clone()].copy_from_slice(&f(b, &v[r]));
    }
    out
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<f64>,
    ds: Vec<f64>,
    /// `W⁻ᵀ ds` and `W dz`.
    ds_scaled: Vec<f64>,
    dz_scaled: Vec<f64>,
}

/// Newton direction for complementarity target `λ ∘ (W dz + W⁻ᵀ ds) = rc`.
fn direction(data: &Dense, kkt: &Kkt, sc: &[BlockScaling], bx: &[f64], by: &[f64], bz: &[f64], rc: &[f64]) -> Direction {
    let u = blockwise(data, sc, rc, |b, v| b.lambda_divide(v));
    // Third block right-hand side in scaled form: W⁻ᵀ(bz − Wᵀu).
    let mut bz_scaled = blockwise(data, sc, bz, |b, v| b.apply_winv_t(v));
    linalg::axpy(-1.0, &u, &mut bz_scaled);
    let (dx, dy, _) = kkt.solve(bx, by, &bz_scaled);
    // dz and ds from the unscaled equations P dx + Aᵀdy − Eᵀdz = bx and
    // ds − E dx = bz.
    let mut r = data.p.matvec(&dx);
    linalg::axpy(1.0, &data.a.matvec_t(&dy), &mut r);
    linalg::axpy(-1.0, bx, &mut r);
    let dz = data.select(&r);
    let dz_scaled = blockwise(data, sc, &dz, |b, v| b.apply_w(v));
    let mut ds = data.select(&dx);
    linalg::axpy(1.0, bz, &mut ds);
    let ds_scaled = blockwise(data, sc, &ds, |b, v| b.apply_winv_t(v));
    Direction { dx, dy, dz, ds, ds_scaled, dz_scaled }
}

fn max_step(data: &Dense, sc: &[BlockScaling], dir: &Direction) -> f64 {
    let mut alpha = f64::INFINITY;
    for (sl, b) in data.slots.iter().zip(sc) {
        let r = sl.s_off..sl.s_off + sl.len();
        alpha = alpha.min(b.max_step(&dir.ds_scaled[r.clone()]));
        alpha = alpha.min(b.max_step(&dir.dz_scaled[r]));
    }
    alpha
}

/// Solves `prog` to relative tolerance `tol`.
///
/// Returns an error only for malformed input or a numerically singular
/// Newton system; infeasibility and the iteration cap are reported through
/// [`SolveStatus`].
pub fn solve(prog: &ConeProgram, tol: f64, max_iter: usize) -> Result<ConeSolution> {
    prog.check_well_formed()?;
    if !(tol > 0.0) {
        return Err(Error::MalformedProgram("tolerance must be positive".into()));
    }
    let data = densify(prog);
    let (n, ns) = (data.n(), data.ns);
    let degree: usize = data.slots.iter().map(|s| s.kind.degree()).sum();

    // Initial point: least-squares solution of the KKT system with W = I,
    // then both slack and cone dual shifted into the interior.
    let id = identity_scalings(&data);
    let kkt0 = Kkt::factor(&data, &id).ok_or(Error::SingularKkt { iteration: 0 })?;
    let neg_c: Vec<f64> = data.c.iter().map(|v| -v).collect();
    let (mut x, mut y, mut z) = kkt0.solve(&neg_c, &data.b, &vec![0.0; ns]);
    let mut s: Vec<f64> = z.iter().map(|v| -v).collect();
    push_interior(&data, &mut s);
    push_interior(&data, &mut z);

    let bnorm = linalg::norm2(&data.b).max(1.0);
    let cnorm = linalg::norm2(&data.c).max(1.0);

    let mut iter = 0;
    loop {
        let px = data.p.matvec(&x);
        // rx = Px + c + Aᵀy + Gᵀz, ry = Ax − b, rz = Gx + s − h
        let mut rx = px.clone();
        linalg::axpy(1.0, &data.c, &mut rx);
        linalg::axpy(1.0, &data.a.matvec_t(&y), &mut rx);
        data.scatter(-1.0, &z, &mut rx);
        let mut ry = data.a.matvec(&x);
        linalg::axpy(-1.0, &data.b, &mut ry);
        let mut rz = s.clone();
        linalg::axpy(-1.0, &data.select(&x), &mut rz);
        let gap = linalg::dot(&s, &z);
        let pcost = 0.5 * linalg::dot(&x, &px) + linalg::dot(&data.c, &x);
        let dcost = pcost + linalg::dot(&y, &ry) + linalg::dot(&z, &rz) - gap;
        let pres = (linalg::norm2(&ry) / bnorm).max(linalg::norm2(&rz));
        let dres = linalg::norm2(&rx) / cnorm;

        let status = if pres <= tol && dres <= tol && gap <= tol * pcost.abs().max(1.0) {
            Some(SolveStatus::Optimal)
        } else if linalg::norm_inf(&y).max(linalg::norm_inf(&z)) > DIVERGENCE {
            Some(SolveStatus::PrimalInfeasible)
        } else if linalg::norm_inf(&x) > DIVERGENCE {
            Some(SolveStatus::DualInfeasible)
        } else if iter >= max_iter {
            Some(SolveStatus::IterationLimit)
        } else {
            None
        };
        if let Some(status) = status {
            let mut zx = vec![0.0; n];
            data.scatter(1.0, &z, &mut zx);
            return Ok(ConeSolution {
                status,
                x,
                y: y.iter().map(|v| -v).collect(),
                z: zx,
                primal_objective: pcost,
                dual_objective: dcost,
                gap,
                primal_residual: pres,
                dual_residual: dres,
                iterations: iter,
            });
        }

        let sc = scalings(&data, &s, &z).ok_or(Error::SingularKkt { iteration: iter })?;
        let kkt = Kkt::factor(&data, &sc).ok_or(Error::SingularKkt { iteration: iter })?;
        let mu = if degree > 0 { gap / degree as f64 } else { 0.0 };

        let neg = |v: &[f64], f: f64| -> Vec<f64> { v.iter().map(|e| -f * e).collect() };
        let mut lam_sq = vec![0.0; ns];
        for (sl, b) in data.slots.iter().zip(&sc) {
            lam_sq[sl.s_off..sl.s_off + sl.len()].copy_from_slice(&b.lambda_product(&b.lambda));
        }

        // Predictor.
        let rc_aff = neg(&lam_sq, 1.0);
        let aff = direction(&data, &kkt, &sc, &neg(&rx, 1.0), &neg(&ry, 1.0), &neg(&rz, 1.0), &rc_aff);
        let alpha_aff = max_step(&data, &sc, &aff).min(1.0);
        let t = 1.0 - alpha_aff;
        let sigma = t * t * t;

        // Corrector.
        let mut rc = rc_aff;
        for sl in &data.slots {
            let r = sl.s_off..sl.s_off + sl.len();
            let cross = sl.kind.product(&aff.ds_scaled[r.clone()], &aff.dz_scaled[r.clone()]);
            let e = sl.kind.identity();
            for ((out, c), ei) in rc[r].iter_mut().zip(cross).zip(e) {
                *out += sigma * mu * ei - c;
            }
        }
        let f = 1.0 - sigma;
        let dir = direction(&data, &kkt, &sc, &neg(&rx, f), &neg(&ry, f), &neg(&rz, f), &rc);
        let alpha = (STEP_FRACTION * max_step(&data, &sc, &dir)).min(1.0);

        linalg::axpy(alpha, &dir.dx, &mut x);
        linalg::axpy(alpha, &dir.dy, &mut y);
        linalg::axpy(alpha, &dir.dz, &mut z);
        linalg::axpy(alpha, &dir.ds, &mut s);
        iter += 1;
    }
}
