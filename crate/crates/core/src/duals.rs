//! Multiplier sets shared by the AC point, the semidefinite relaxation and
//! the settlement audits.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::hermitian::HermitianMatrix;
use crate::network::{build_branch_matrices, build_injection_matrices, NetworkCase};

/// Prices and inequality multipliers of a dispatch problem.
///
/// `mu_flow` follows the directed-branch order of
/// [`build_branch_matrices`]: entry `2i` is line `i` from → to, `2i + 1` the
/// reverse.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Multipliers {
    pub lmp_p: Vec<f64>,
    pub lmp_q: Vec<f64>,
    pub mu_flow: Vec<f64>,
    pub mu_v_hi: Vec<f64>,
    pub mu_v_lo: Vec<f64>,
    pub mu_p_hi: Vec<f64>,
    pub mu_p_lo: Vec<f64>,
    pub mu_q_hi: Vec<f64>,
    pub mu_q_lo: Vec<f64>,
}

impl Multipliers {
    pub fn zeros(n_buses: usize, n_lines: usize) -> Self {
        let z = vec![0.0; n_buses];
        Self {
            lmp_p: z.clone(),
            lmp_q: z.clone(),
            mu_flow: vec![0.0; 2 * n_lines],
            mu_v_hi: z.clone(),
            mu_v_lo: z.clone(),
            mu_p_hi: z.clone(),
            mu_p_lo: z.clone(),
            mu_q_hi: z.clone(),
            mu_q_lo: z,
        }
    }

    /// Most negative inequality multiplier, or 0 if none is negative.
    pub fn min_inequality(&self) -> f64 {
        [&self.mu_flow, &self.mu_v_hi, &self.mu_v_lo, &self.mu_p_hi, &self.mu_p_lo, &self.mu_q_hi, &self.mu_q_lo]
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0_f64, |m, &v| m.min(v))
    }
}

/// `Σ Λᵖ_k Φ_k + Λᑫ_k Ψ_k + (μ̄ᵛ_k − μ̲ᵛ_k) 𝟙_k𝟙_kᵀ + Σ μ_kℓ Φ_kℓ`.
///
/// The matrix whose product with `V` is the voltage stationarity residual,
/// and which is the dual of `W ⪰ 0` in the relaxation.
pub fn assemble_u(case: &NetworkCase, duals: &Multipliers) -> HermitianMatrix {
    let n = case.n_buses();
    let branches = build_branch_matrices(case);
    let inj = build_injection_matrices(case, &branches);
    let mut u = HermitianMatrix::zeros(n);
    for (k, m) in inj.iter().enumerate() {
        u.add_scaled(duals.lmp_p[k], &m.phi);
        u.add_scaled(duals.lmp_q[k], &m.psi);
        u.add_entry(k, k, Complex64::new(duals.mu_v_hi[k] - duals.mu_v_lo[k], 0.0));
    }
    for (br, &mu) in branches.iter().zip(&duals.mu_flow) {
        u.add_scaled(mu, &br.phi);
    }
    u
}
