//! Semidefinite relaxation of the dispatch problem.
//!
//! The voltage outer product `VVᴴ` is replaced by a Hermitian `W ⪰ 0`,
//! which enters the cone program through its real `2n × 2n` embedding.
//! Balance rows are written `p_k − Tr(Φ_k W) = p^D_k`, so their
//! multipliers are the marginal cost of one more unit of demand.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use core::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::conic::{self, Block, Cone, ConeProgram, ConeSolution, SolveStatus};
use crate::duals::{assemble_u, Multipliers};
use crate::error::{Error, Result};
use crate::hermitian::{HermitianMatrix, SymmetricEmbedding, DEFAULT_RANK_TOL};
use crate::linalg::Matrix;
use crate::network::{build_branch_matrices, build_injection_matrices, NetworkCase};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpSettings {
    pub tol: f64,
    pub rank_tol: f64,
    pub max_iter: usize,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self { tol: conic::DEFAULT_TOL, rank_tol: DEFAULT_RANK_TOL, max_iter: conic::DEFAULT_MAX_ITER }
    }
}

/// How a two-sided bound `lo ≤ a(x) ≤ hi` was encoded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum BoundRows {
    /// `lo == hi`: one equality row whose multiplier splits by sign.
    Fixed { row: usize },
    /// Slack variables `a − s_lo = lo`, `a + s_hi = hi`.
    Range { lo: usize, hi: usize },
}

impl BoundRows {
    /// `(μ̄, μ̲)` from a cone solution.
    pub(crate) fn multipliers(&self, sol: &ConeSolution) -> (f64, f64) {
        match *self {
            BoundRows::Fixed { row } => {
                let y = sol.y[row];
                (y.min(0.0).abs(), y.max(0.0))
            }
            BoundRows::Range { lo, hi } => (sol.z[hi], sol.z[lo]),
        }
    }
}

/// Sequential allocator over one nonnegative block.
pub(crate) struct Slacks {
    block: Block,
    next: usize,
}

impl Slacks {
    pub(crate) fn new(prog: &mut ConeProgram, count: usize) -> Self {
        Self { block: prog.add_block(Cone::Nonnegative(count)), next: 0 }
    }

    pub(crate) fn take(&mut self) -> usize {
        let v = self.block.var(self.next);
        self.next += 1;
        v
    }

    pub(crate) fn bound(&mut self, prog: &mut ConeProgram, coeffs: &[(usize, f64)], lo: f64, hi: f64) -> BoundRows {
        if lo == hi {
            return BoundRows::Fixed { row: prog.add_equality(coeffs.to_vec(), lo) };
        }
        let (s_lo, s_hi) = (self.take(), self.take());
        let mut row = coeffs.to_vec();
        row.push((s_lo, -1.0));
        prog.add_equality(row, lo);
        let mut row = coeffs.to_vec();
        row.push((s_hi, 1.0));
        prog.add_equality(row, hi);
        BoundRows::Range { lo: s_lo, hi: s_hi }
    }
}

pub(crate) fn bound_slack_count(pairs: impl Iterator<Item = (f64, f64)>) -> usize {
    pairs.filter(|(lo, hi)| lo != hi).count() * 2
}

/// The relaxation together with the row and variable map needed to read
/// its solution.
#[derive(Debug, Clone)]
pub struct SdpProgram {
    program: ConeProgram,
    dispatch: Block,
    psd: Block,
    p_balance: Vec<usize>,
    q_balance: Vec<usize>,
    flow_slacks: Vec<usize>,
    voltage: Vec<BoundRows>,
    p_box: Vec<BoundRows>,
    q_box: Vec<BoundRows>,
}

impl SdpProgram {
    pub fn program(&self) -> &ConeProgram {
        &self.program
    }

    pub fn n_buses(&self) -> usize {
        self.p_balance.len()
    }

    /// Rows or slack pairs encoding flow limits, one per directed branch.
    pub fn n_flow_limits(&self) -> usize {
        self.flow_slacks.len()
    }

    /// Voltage inequalities: two per bus with a range, none for a fixed
    /// magnitude.
    pub fn n_voltage_inequalities(&self) -> usize {
        self.voltage.iter().filter(|b| matches!(b, BoundRows::Range { .. })).count() * 2
    }

    pub fn psd_dim(&self) -> usize {
        match self.psd.cone {
            Cone::Psd(d) => d,
            _ => unreachable!(),
        }
    }

    /// Variable vector for a given `(W, p, q)` with every slack set to its
    /// implied value. Useful for evaluating the program at a known point.
    pub fn point(&self, case: &NetworkCase, w: &HermitianMatrix, p: &[f64], q: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.program.n_vars()];
        x[self.dispatch.range()].copy_from_slice(&[p, q].concat());
        x[self.psd.range()].copy_from_slice(&conic::svec(w.real_embed().matrix()));
        let branches = build_branch_matrices(case);
        for (br, &s) in branches.iter().zip(&self.flow_slacks) {
            x[s] = case.lines[br.line].flow_limit - br.phi.trace_product(w);
        }
        let fill = |x: &mut Vec<f64>, b: &BoundRows, value: f64, lo: f64, hi: f64| {
            if let BoundRows::Range { lo: sl, hi: sh } = *b {
                x[sl] = value - lo;
                x[sh] = hi - value;
            }
        };
        for (k, bus) in case.buses.iter().enumerate() {
            fill(&mut x, &self.voltage[k], w.get(k, k).re, bus.v_min_sq, bus.v_max_sq);
            fill(&mut x, &self.p_box[k], p[k], bus.p_min, bus.p_max);
            fill(&mut x, &self.q_box[k], q[k], bus.q_min, bus.q_max);
        }
        x
    }
}

/// `Tr(M W)` as coefficients on the embedded block: `½⟨embed(M), X⟩`.
pub(crate) fn trace_row(psd: &Block, m: &HermitianMatrix) -> Vec<(usize, f64)> {
    let e = m.real_embed();
    let src = e.matrix();
    let d = src.rows();
    let mut half = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            half[(i, j)] = 0.5 * src[(i, j)];
        }
    }
    psd.trace_coeffs(&half)
}

/// Rows forcing the embedded block into the form `[[A, −B], [B, A]]` with
/// `Bᵀ = −B`. Without them optimal points are not unique and the Newton
/// system degenerates near the solution.
fn add_hermitian_structure(prog: &mut ConeProgram, psd: &Block, n: usize) {
    // svec stores off-diagonal entries scaled by √2.
    let coef = |i: usize, j: usize| if i == j { 1.0 } else { FRAC_1_SQRT_2 };
    let at = |i: usize, j: usize| if i >= j { psd.entry(i, j) } else { psd.entry(j, i) };
    for j in 0..n {
        for i in j..n {
            prog.add_equality(vec![(at(i, j), coef(i, j)), (at(n + i, n + j), -coef(i, j))], 0.0);
            if i == j {
                prog.add_equality(vec![(at(n + i, i), FRAC_1_SQRT_2)], 0.0);
            } else {
                prog.add_equality(vec![(at(n + i, j), FRAC_1_SQRT_2), (at(n + j, i), FRAC_1_SQRT_2)], 0.0);
            }
        }
    }
}

pub(crate) fn add_costs(prog: &mut ConeProgram, case: &NetworkCase, dispatch: &Block) {
    let n = case.n_buses();
    for (k, bus) in case.buses.iter().enumerate() {
        let (p, q) = (dispatch.var(k), dispatch.var(n + k));
        let [[a, b], [c, d]] = bus.cost.quadratic;
        prog.add_quadratic(p, p, a);
        prog.add_quadratic(p, q, b + c);
        prog.add_quadratic(q, q, d);
        prog.add_linear(p, bus.cost.linear[0]);
        prog.add_linear(q, bus.cost.linear[1]);
    }
}

/// Assembles the relaxation. Flow limits apply to both orientations of
/// every line.
pub fn build_sdp(case: &NetworkCase) -> SdpProgram {
    let n = case.n_buses();
    let branches = build_branch_matrices(case);
    let inj = build_injection_matrices(case, &branches);
    let mut prog = ConeProgram::new();
    let dispatch = prog.add_block(Cone::Free(2 * n));
    let n_slacks = branches.len()
        + bound_slack_count(case.buses.iter().flat_map(|b| {
            [(b.v_min_sq, b.v_max_sq), (b.p_min, b.p_max), (b.q_min, b.q_max)]
        }));
    let mut slacks = Slacks::new(&mut prog, n_slacks);
    let psd = prog.add_block(Cone::Psd(2 * n));

    add_hermitian_structure(&mut prog, &psd, n);

    let mut p_balance = Vec::with_capacity(n);
    let mut q_balance = Vec::with_capacity(n);
    for (k, bus) in case.buses.iter().enumerate() {
        let mut row = vec![(dispatch.var(k), 1.0)];
        row.extend(trace_row(&psd, &inj[k].phi).into_iter().map(|(i, v)| (i, -v)));
        p_balance.push(prog.add_equality(row, bus.p_demand));
        let mut row = vec![(dispatch.var(n + k), 1.0)];
        row.extend(trace_row(&psd, &inj[k].psi).into_iter().map(|(i, v)| (i, -v)));
        q_balance.push(prog.add_equality(row, bus.q_demand));
    }
    let mut flow_slacks = Vec::with_capacity(branches.len());
    for br in &branches {
        let s = slacks.take();
        let mut row = trace_row(&psd, &br.phi);
        row.push((s, 1.0));
        prog.add_equality(row, case.lines[br.line].flow_limit);
        flow_slacks.push(s);
    }
    let mut voltage = Vec::with_capacity(n);
    let mut p_box = Vec::with_capacity(n);
    let mut q_box = Vec::with_capacity(n);
    for (k, bus) in case.buses.iter().enumerate() {
        let diag = trace_row(&psd, &HermitianMatrix::unit(n, k));
        voltage.push(slacks.bound(&mut prog, &diag, bus.v_min_sq, bus.v_max_sq));
        p_box.push(slacks.bound(&mut prog, &[(dispatch.var(k), 1.0)], bus.p_min, bus.p_max));
        q_box.push(slacks.bound(&mut prog, &[(dispatch.var(n + k), 1.0)], bus.q_min, bus.q_max));
    }
    add_costs(&mut prog, case, &dispatch);
    SdpProgram { program: prog, dispatch, psd, p_balance, q_balance, flow_slacks, voltage, p_box, q_box }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub w: HermitianMatrix,
    pub p_gen: Vec<f64>,
    pub q_gen: Vec<f64>,
    pub duals: Multipliers,
    /// Dual matrix of `W ⪰ 0`.
    pub u: HermitianMatrix,
    pub objective: f64,
    pub rank: usize,
    /// Descending eigenvalues of `W`.
    pub eigenvalues: Vec<f64>,
    /// Present iff `rank == 1`.
    pub recovered_v: Option<Vec<Complex64>>,
    pub iterations: usize,
    /// Largest of the independently recomputed cone KKT residuals.
    pub residual: f64,
    /// `Tr(U W)`.
    pub complementarity: f64,
}

pub fn solve_sdp(case: &NetworkCase, settings: &SdpSettings) -> Result<SdpSolution> {
    let violations = case.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidCase(violations));
    }
    let built = build_sdp(case);
    let sol = conic::solve(&built.program, settings.tol, settings.max_iter)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::NotOptimal { status: sol.status });
    }
    let residual = built.program.kkt_residuals(&sol.x, &sol.y, &sol.z)?.max();
    let n = case.n_buses();
    let x = SymmetricEmbedding::from_matrix(sol.psd(&built.psd))?;
    let w = x.to_hermitian();
    let z = sol.psd_dual(&built.psd);
    let mut z2 = Matrix::zeros(2 * n, 2 * n);
    for i in 0..2 * n {
        for j in 0..2 * n {
            z2[(i, j)] = 2.0 * z[(i, j)];
        }
    }
    let u = SymmetricEmbedding::from_matrix(z2)?.to_hermitian();

    let dispatch = sol.block(&built.dispatch);
    let (p_gen, q_gen) = (dispatch[..n].to_vec(), dispatch[n..].to_vec());
    let mut duals = Multipliers::zeros(n, case.n_lines());
    for k in 0..n {
        duals.lmp_p[k] = sol.y[built.p_balance[k]];
        duals.lmp_q[k] = sol.y[built.q_balance[k]];
        (duals.mu_v_hi[k], duals.mu_v_lo[k]) = built.voltage[k].multipliers(&sol);
        (duals.mu_p_hi[k], duals.mu_p_lo[k]) = built.p_box[k].multipliers(&sol);
        (duals.mu_q_hi[k], duals.mu_q_lo[k]) = built.q_box[k].multipliers(&sol);
    }
    for (i, &s) in built.flow_slacks.iter().enumerate() {
        duals.mu_flow[i] = sol.z[s];
    }
    let decomposition = w.rank1_decompose(settings.rank_tol)?;
    Ok(SdpSolution {
        objective: case.total_cost(&p_gen, &q_gen),
        complementarity: u.trace_product(&w),
        w,
        p_gen,
        q_gen,
        duals,
        u,
        rank: decomposition.rank,
        eigenvalues: decomposition.eigenvalues,
        recovered_v: decomposition.voltage,
        iterations: sol.iterations,
        residual,
    })
}

/// Comparison of the relaxation against a local AC solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactnessReport {
    pub exact: bool,
    pub rank: usize,
    /// `|J_SDP − J_AC|` when an AC point was supplied.
    pub objective_gap: Option<f64>,
    /// `‖λ − Λ‖∞` over both price vectors when an AC point was supplied.
    pub price_gap: Option<f64>,
    /// False iff the relaxation is exact and the AC point disagrees with it
    /// beyond tolerance.
    pub consistent: bool,
}

pub fn exactness_report(
    sol: &SdpSolution,
    ac: Option<&crate::ac::AcSolution>,
    tol: f64,
    price_tol: f64,
) -> ExactnessReport {
    let exact = sol.rank == 1;
    let objective_gap = ac.map(|a| (sol.objective - a.objective).abs());
    let price_gap = ac.map(|a| {
        let d = |x: &[f64], y: &[f64]| x.iter().zip(y).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        d(&sol.duals.lmp_p, &a.duals.lmp_p).max(d(&sol.duals.lmp_q, &a.duals.lmp_q))
    });
    let consistent = !exact
        || (objective_gap.map_or(true, |g| g <= tol * (1.0 + sol.objective.abs()))
            && price_gap.map_or(true, |g| g <= price_tol));
    ExactnessReport { exact, rank: sol.rank, objective_gap, price_gap, consistent }
}

/// `Û` rebuilt from the scalar multipliers and the dual function value at
/// those multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub u_hat: HermitianMatrix,
    /// `‖Û − U‖_F`.
    pub u_mismatch: f64,
    /// Infimum over the dispatch box of the Lagrangian remainder.
    pub zeta: f64,
    /// Equal to `zeta` when `Û ⪰ 0`, which is checked.
    pub dual_objective: f64,
}

/// Infimum over the dispatch boxes of the Lagrangian once the `W` term has
/// been eliminated.
pub fn dual_function_value(case: &NetworkCase, duals: &Multipliers) -> f64 {
    let mut value = 0.0;
    for (k, bus) in case.buses.iter().enumerate() {
        let price = [duals.lmp_p[k], duals.lmp_q[k]];
        let (profit, _) = bus.best_response(price);
        value += -profit + price[0] * bus.p_demand + price[1] * bus.q_demand;
        value += -duals.mu_v_hi[k] * bus.v_max_sq + duals.mu_v_lo[k] * bus.v_min_sq;
    }
    for (i, &mu) in duals.mu_flow.iter().enumerate() {
        value -= mu * case.lines[i / 2].flow_limit;
    }
    value
}

pub fn dual_certificate(sol: &SdpSolution, case: &NetworkCase, tol: f64) -> Result<DualCertificate> {
    let n = case.n_buses();
    if sol.w.dim() != n || sol.duals.mu_flow.len() != 2 * case.n_lines() {
        return Err(Error::DimensionMismatch { expected: n, found: sol.w.dim() });
    }
    if sol.duals.min_inequality() < 0.0 {
        return Err(Error::DualInfeasible(format!("negative multiplier {:.3e}", sol.duals.min_inequality())));
    }
    let u_hat = assemble_u(case, &sol.duals);
    let scale = u_hat.frobenius_norm().max(1.0);
    let u_mismatch = u_hat.sub(&sol.u).frobenius_norm();
    if u_mismatch > 10.0 * tol * scale {
        return Err(Error::CertificateMismatch(format!("‖Û − U‖_F = {u_mismatch:.3e}")));
    }
    let min_eig = u_hat.min_eigenvalue()?;
    if min_eig < -tol * scale {
        return Err(Error::DualInfeasible(format!("Û has eigenvalue {min_eig:.3e}")));
    }
    let zeta = dual_function_value(case, &sol.duals);
    if (zeta - sol.objective).abs() > 10.0 * tol * (1.0 + sol.objective.abs()) {
        return Err(Error::CertificateMismatch(format!(
            "dual value {zeta:.9} differs from primal {:.9}",
            sol.objective
        )));
    }
    Ok(DualCertificate { u_hat, u_mismatch, zeta, dual_objective: zeta })
}
