//! Branch-flow second-order cone relaxation for radial networks.
//!
//! Each line is given a direction `k → ℓ` and carries sending-end flows
//! `P, Q`, squared current `J`, and the rotated cone `P² + Q² ≤ J w_k`,
//! written as `‖(2P, 2Q, J − w_k)‖ ≤ J + w_k`. Balance multipliers use the
//! same sign as the semidefinite relaxation, so the two price vectors are
//! directly comparable.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::conic::{self, Block, Cone, ConeProgram, SolveStatus};
use crate::duals::Multipliers;
use crate::error::{Error, Result};
use crate::network::NetworkCase;
use crate::sdp::{add_costs, bound_slack_count, solve_sdp, BoundRows, SdpSettings, SdpSolution, Slacks};

/// Direction assigned to every line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    /// Away from bus 1, found by breadth-first search.
    #[default]
    FromRoot,
    /// Towards bus 1.
    TowardRoot,
    /// Each line's own `from → to`.
    AsListed,
}

/// A line with its assigned direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub line: usize,
    pub from: usize,
    pub to: usize,
}

impl Edge {
    /// Index of this direction in the directed-branch order.
    fn branch(&self, case: &NetworkCase) -> usize {
        2 * self.line + usize::from(case.lines[self.line].from != self.from)
    }
}

pub fn orient(case: &NetworkCase, orientation: Orientation) -> Result<Vec<Edge>> {
    if !case.is_radial() {
        return Err(Error::NonRadial);
    }
    let listed = |i: usize| Edge { line: i, from: case.lines[i].from, to: case.lines[i].to };
    let mut edges: Vec<Edge> = (0..case.n_lines()).map(listed).collect();
    if orientation == Orientation::AsListed {
        return Ok(edges);
    }
    let adj = case.adjacency();
    let mut seen = vec![false; case.n_buses()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(k) = queue.pop_front() {
        for &(l, i) in &adj[k] {
            if !seen[l] {
                seen[l] = true;
                edges[i] = match orientation {
                    Orientation::FromRoot => Edge { line: i, from: k, to: l },
                    _ => Edge { line: i, from: l, to: k },
                };
                queue.push_back(l);
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::NonRadial);
    }
    Ok(edges)
}

#[derive(Debug, Clone)]
pub struct SocpProgram {
    program: ConeProgram,
    edges: Vec<Edge>,
    dispatch: Block,
    /// `w`, then `P`, `Q`, `J` per edge.
    branch: Block,
    cones: Vec<Block>,
    p_balance: Vec<usize>,
    q_balance: Vec<usize>,
    /// `(P ≤ f, rJ − P ≤ f)` slacks per edge.
    flow_slacks: Vec<(usize, usize)>,
    voltage: Vec<BoundRows>,
    p_box: Vec<BoundRows>,
    q_box: Vec<BoundRows>,
}

impl SocpProgram {
    pub fn program(&self) -> &ConeProgram {
        &self.program
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_cones(&self) -> usize {
        self.cones.len()
    }

    pub fn n_balance_rows(&self) -> usize {
        self.p_balance.len() + self.q_balance.len()
    }

    fn w(&self, k: usize) -> usize {
        self.branch.var(k)
    }

    fn flow(&self, e: usize, which: usize) -> usize {
        self.branch.var(self.p_balance.len() + 3 * e + which)
    }
}

/// Fails on meshed networks and on nonzero shunts.
pub fn build_socp(case: &NetworkCase, orientation: Orientation) -> Result<SocpProgram> {
    if let Some(bus) = case.buses.iter().position(|b| b.shunt != Complex64::new(0.0, 0.0)) {
        return Err(Error::NonzeroShunt { bus });
    }
    let edges = orient(case, orientation)?;
    let n = case.n_buses();
    let m = edges.len();
    let mut prog = ConeProgram::new();
    let dispatch = prog.add_block(Cone::Free(2 * n));
    let branch = prog.add_block(Cone::Free(n + 3 * m));
    let n_slacks = 2 * m
        + bound_slack_count(case.buses.iter().flat_map(|b| {
            [(b.v_min_sq, b.v_max_sq), (b.p_min, b.p_max), (b.q_min, b.q_max)]
        }));
    let mut slacks = Slacks::new(&mut prog, n_slacks);
    let cones: Vec<Block> = (0..m).map(|_| prog.add_block(Cone::SecondOrder(4))).collect();

    let w = |k: usize| branch.var(k);
    let pv = |e: usize| branch.var(n + 3 * e);
    let qv = |e: usize| branch.var(n + 3 * e + 1);
    let jv = |e: usize| branch.var(n + 3 * e + 2);

    let mut p_balance = Vec::with_capacity(n);
    let mut q_balance = Vec::with_capacity(n);
    for (k, bus) in case.buses.iter().enumerate() {
        let mut p_row = vec![(dispatch.var(k), 1.0)];
        let mut q_row = vec![(dispatch.var(n + k), 1.0)];
        for (e, edge) in edges.iter().enumerate() {
            let line = &case.lines[edge.line];
            if edge.from == k {
                p_row.push((pv(e), -1.0));
                q_row.push((qv(e), -1.0));
            } else if edge.to == k {
                p_row.extend([(pv(e), 1.0), (jv(e), -line.r)]);
                q_row.extend([(qv(e), 1.0), (jv(e), -line.x)]);
            }
        }
        p_balance.push(prog.add_equality(p_row, bus.p_demand));
        q_balance.push(prog.add_equality(q_row, bus.q_demand));
    }
    let mut flow_slacks = Vec::with_capacity(m);
    for (e, edge) in edges.iter().enumerate() {
        let line = &case.lines[edge.line];
        let (s_fwd, s_rev) = (slacks.take(), slacks.take());
        prog.add_equality(vec![(pv(e), 1.0), (s_fwd, 1.0)], line.flow_limit);
        prog.add_equality(vec![(jv(e), line.r), (pv(e), -1.0), (s_rev, 1.0)], line.flow_limit);
        flow_slacks.push((s_fwd, s_rev));

        let (wk, wl) = (w(edge.from), w(edge.to));
        prog.add_equality(
            vec![
                (wl, 1.0),
                (wk, -1.0),
                (pv(e), 2.0 * line.r),
                (qv(e), 2.0 * line.x),
                (jv(e), -(line.r * line.r + line.x * line.x)),
            ],
            0.0,
        );

        let cone = cones[e];
        prog.add_equality(vec![(cone.var(0), 1.0), (jv(e), -1.0), (wk, -1.0)], 0.0);
        prog.add_equality(vec![(cone.var(1), 1.0), (pv(e), -2.0)], 0.0);
        prog.add_equality(vec![(cone.var(2), 1.0), (qv(e), -2.0)], 0.0);
        prog.add_equality(vec![(cone.var(3), 1.0), (jv(e), -1.0), (wk, 1.0)], 0.0);
    }
    let mut voltage = Vec::with_capacity(n);
    let mut p_box = Vec::with_capacity(n);
    let mut q_box = Vec::with_capacity(n);
    for (k, bus) in case.buses.iter().enumerate() {
        voltage.push(slacks.bound(&mut prog, &[(w(k), 1.0)], bus.v_min_sq, bus.v_max_sq));
        p_box.push(slacks.bound(&mut prog, &[(dispatch.var(k), 1.0)], bus.p_min, bus.p_max));
        q_box.push(slacks.bound(&mut prog, &[(dispatch.var(n + k), 1.0)], bus.q_min, bus.q_max));
    }
    add_costs(&mut prog, case, &dispatch);
    Ok(SocpProgram {
        program: prog,
        edges,
        dispatch,
        branch,
        cones,
        p_balance,
        q_balance,
        flow_slacks,
        voltage,
        p_box,
        q_box,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocpSolution {
    pub edges: Vec<Edge>,
    /// Squared voltage magnitude per bus.
    pub w: Vec<f64>,
    /// Sending-end flows and squared current per edge.
    pub p_flow: Vec<f64>,
    pub q_flow: Vec<f64>,
    pub current_sq: Vec<f64>,
    pub p_gen: Vec<f64>,
    pub q_gen: Vec<f64>,
    /// `lmp_p`/`lmp_q` hold the distribution prices; flow multipliers are
    /// mapped onto directed branches.
    pub duals: Multipliers,
    pub objective: f64,
    /// `J w_k − P² − Q²` per edge.
    pub exactness_residuals: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

pub fn solve_socp(case: &NetworkCase, tol: f64) -> Result<SocpSolution> {
    solve_socp_oriented(case, Orientation::default(), tol)
}

pub fn solve_socp_oriented(case: &NetworkCase, orientation: Orientation, tol: f64) -> Result<SocpSolution> {
    let violations = case.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidCase(violations));
    }
    let built = build_socp(case, orientation)?;
    let sol = conic::solve(&built.program, tol, conic::DEFAULT_MAX_ITER)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::NotOptimal { status: sol.status });
    }
    let residual = built.program.kkt_residuals(&sol.x, &sol.y, &sol.z)?.max();
    let n = case.n_buses();
    let m = built.edges.len();
    let dispatch = sol.block(&built.dispatch);
    let (p_gen, q_gen) = (dispatch[..n].to_vec(), dispatch[n..].to_vec());
    let w: Vec<f64> = (0..n).map(|k| sol.x[built.w(k)]).collect();
    let pick = |which| (0..m).map(|e| sol.x[built.flow(e, which)]).collect::<Vec<f64>>();
    let (p_flow, q_flow, current_sq) = (pick(0), pick(1), pick(2));

    let mut duals = Multipliers::zeros(n, case.n_lines());
    for k in 0..n {
        duals.lmp_p[k] = sol.y[built.p_balance[k]];
        duals.lmp_q[k] = sol.y[built.q_balance[k]];
        (duals.mu_v_hi[k], duals.mu_v_lo[k]) = built.voltage[k].multipliers(&sol);
        (duals.mu_p_hi[k], duals.mu_p_lo[k]) = built.p_box[k].multipliers(&sol);
        (duals.mu_q_hi[k], duals.mu_q_lo[k]) = built.q_box[k].multipliers(&sol);
    }
    for (edge, &(fwd, rev)) in built.edges.iter().zip(&built.flow_slacks) {
        let b = edge.branch(case);
        duals.mu_flow[b] = sol.z[fwd];
        duals.mu_flow[b ^ 1] = sol.z[rev];
    }
    let exactness_residuals = cone_residuals(&built.edges, &w, &p_flow, &q_flow, &current_sq);
    Ok(SocpSolution {
        edges: built.edges,
        objective: case.total_cost(&p_gen, &q_gen),
        w,
        p_flow,
        q_flow,
        current_sq,
        p_gen,
        q_gen,
        duals,
        exactness_residuals,
        iterations: sol.iterations,
        residual,
    })
}

/// `J w_k − P² − Q²` per edge, `k` the sending bus.
pub fn cone_residuals(edges: &[Edge], w: &[f64], p: &[f64], q: &[f64], j: &[f64]) -> Vec<f64> {
    edges.iter().enumerate().map(|(e, edge)| j[e] * w[edge.from] - p[e] * p[e] - q[e] * q[e]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocpExactness {
    pub exact: bool,
    /// `J w_k − P² − Q²` per edge, recomputed.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Exact iff every cone is tight to `tol`. Vacuously exact without edges.
pub fn exactness_check(sol: &SocpSolution, tol: f64) -> SocpExactness {
    let residuals = cone_residuals(&sol.edges, &sol.w, &sol.p_flow, &sol.q_flow, &sol.current_sq);
    let max_residual = residuals.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    SocpExactness { exact: max_residual <= tol, residuals, max_residual }
}

/// Phasors implied by the branch variables, bus 1 at zero angle.
///
/// Walks each edge from its sending end with `V_ℓ = V_k − z (S / V_k)*`;
/// this uniquely inverts the branch-flow model when the cones are tight.
pub fn reconstruct_voltages(case: &NetworkCase, sol: &SocpSolution) -> Result<Vec<Complex64>> {
    let n = case.n_buses();
    if sol.w.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: sol.w.len() });
    }
    let mut v: Vec<Option<Complex64>> = vec![None; n];
    v[0] = Some(Complex64::new(libm::sqrt(sol.w[0].max(0.0)), 0.0));
    // Each sweep fixes at least one new bus on a connected tree.
    for _ in 0..n {
        let mut changed = false;
        for (e, edge) in sol.edges.iter().enumerate() {
            let line = &case.lines[edge.line];
            let z = Complex64::new(line.r, line.x);
            let s = Complex64::new(sol.p_flow[e], sol.q_flow[e]);
            match (v[edge.from], v[edge.to]) {
                (Some(vk), None) => {
                    v[edge.to] = Some(vk - z * (s / vk).conj());
                    changed = true;
                }
                (None, Some(vl)) => {
                    // Receiving-end power is S − z|I|², with |I|² = J.
                    let s_recv = s - z * sol.current_sq[e];
                    v[edge.from] = Some(vl + z * (s_recv / vl).conj());
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }
    v.into_iter().collect::<Option<Vec<_>>>().ok_or(Error::NonRadial)
}

/// Relaxation gaps between the semidefinite and branch-flow programs.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialComparison {
    pub objective_gap: f64,
    pub price_gap_p: f64,
    pub price_gap_q: f64,
    pub passed: bool,
    pub sdp_objective: f64,
    pub socp_objective: f64,
}

pub fn compare_sdp_socp(case: &NetworkCase, tol: f64) -> Result<RadialComparison> {
    if !case.is_radial() {
        return Err(Error::NonRadial);
    }
    let socp = solve_socp(case, conic::DEFAULT_TOL)?;
    let sdp = solve_sdp(case, &SdpSettings::default())?;
    Ok(compare_solutions(&sdp, &socp, tol))
}

/// Compares two solutions already computed for the same radial case.
pub fn compare_solutions(sdp: &SdpSolution, socp: &SocpSolution, tol: f64) -> RadialComparison {
    let gap = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    let objective_gap = (sdp.objective - socp.objective).abs();
    let price_gap_p = gap(&sdp.duals.lmp_p, &socp.duals.lmp_p);
    let price_gap_q = gap(&sdp.duals.lmp_q, &socp.duals.lmp_q);
    RadialComparison {
        passed: objective_gap <= tol && price_gap_p <= tol && price_gap_q <= tol,
        objective_gap,
        price_gap_p,
        price_gap_q,
        sdp_objective: sdp.objective,
        socp_objective: socp.objective,
    }
}

#[cfg(test)]
mod tests;
