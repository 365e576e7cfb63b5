use alloc::vec;
use alloc::vec::Vec;

use super::{Cone, ConeProgram};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

const SQRT2: f64 = core::f64::consts::SQRT_2;

/// Rewrites `½ xᵀPx` as a sum of epigraph variables.
///
/// `P` is split into rank-one terms `σ uuᵀ`; each term gets one
/// three-dimensional second-order block `(a₀, a₁, a₂)` with
/// `a₀ − a₂ = 2` and `a₁ = √2 ℓᵀx`, `ℓ = √σ u`, so that
/// `a₀ + a₂ ≥ (ℓᵀx)²`, and the objective gains `½(a₀ + a₂)`. This is the
/// rotated cone `(t, 1, ℓᵀx)` written in standard form. The original
/// equalities keep their row indices, so their multipliers carry over.
pub fn quadratic_to_epigraph(prog: &ConeProgram) -> Result<ConeProgram> {
    let mut out = prog.clone();
    out.quad.clear();
    if !prog.has_quadratic() {
        return Ok(out);
    }
    let n = prog.n_vars();
    let p = prog.quadratic_matrix();
    let support: Vec<usize> = (0..n).filter(|&i| (0..n).any(|j| p[(i, j)] != 0.0)).collect();
    let k = support.len();
    let mut sub = Matrix::zeros(k, k);
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            sub[(a, b)] = p[(i, j)];
        }
    }
    let scale = sub.max_abs();
    let diagonal = (0..k).all(|a| (0..k).all(|b| a == b || sub[(a, b)] == 0.0));
    let terms: Vec<(f64, Vec<f64>)> = if diagonal {
        (0..k)
            .map(|a| {
                let mut u = vec![0.0; k];
                u[a] = 1.0;
                (sub[(a, a)], u)
            })
            .collect()
    } else {
        let eig = linalg::symmetric_eigen(&sub, 100).ok_or(Error::EigenNoConvergence)?;
        (0..k).map(|c| (eig.values[c], (0..k).map(|r| eig.vectors[(r, c)]).collect())).collect()
    };
    if let Some(&(sigma, _)) = terms.iter().find(|(s, _)| *s < -1e-12 * scale.max(1.0)) {
        return Err(Error::NonConvexQuadratic { eigenvalue: sigma });
    }
    for (sigma, u) in terms {
        if sigma <= 1e-14 * scale {
            continue;
        }
        let root = libm::sqrt(sigma);
        let blk = out.add_block(Cone::SecondOrder(3));
        out.add_equality(vec![(blk.var(0), 1.0), (blk.var(2), -1.0)], 2.0);
        let mut row = vec![(blk.var(1), 1.0)];
        for (a, &i) in support.iter().enumerate() {
            if u[a] != 0.0 {
                row.push((i, -SQRT2 * root * u[a]));
            }
        }
        out.add_equality(row, 0.0);
        out.add_linear(blk.var(0), 0.5);
        out.add_linear(blk.var(2), 0.5);
    }
    Ok(out)
}
