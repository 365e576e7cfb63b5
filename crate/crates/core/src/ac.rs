//! Local solution of the nonconvex AC dispatch problem.
//!
//! Variables are `x = (Re V, Im V, p, q)`. Every network quantity is a
//! quadratic form `xᵥᵀ E xᵥ`, with `E` the real embedding of the Hermitian
//! matrix that defines it, so gradients and Hessians are exact and cheap.
//! Balance rows are `VᴴΦ_kV − p_k + p^D_k = 0`, whose multipliers are the
//! AC prices directly. The angle is fixed by `Im V₁ = 0`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::duals::{assemble_u, Multipliers};
use crate::error::{Error, Result};
use crate::hermitian::{normalize_phase, HermitianMatrix};
use crate::linalg::{self, Lu, Matrix};
use crate::network::{build_branch_matrices, build_injection_matrices, NetworkCase};
use crate::sdp::SdpSolution;

/// Certification tolerance on KKT residuals.
pub const DEFAULT_CERT_TOL: f64 = 1e-6;
/// Primal feasibility tolerance.
pub const DEFAULT_FEAS_TOL: f64 = 1e-8;

const FRACTION_TO_BOUNDARY: f64 = 0.99995;
const GAMMA_MIN: f64 = 1e-10;
const MAX_INNER: usize = 60;
/// Dispatch movement beyond which a re-solve counts as a different basin.
const BASIN_DISTANCE: f64 = 1e-2;
const POLISH_STEPS: usize = 20;
const POLISH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcSettings {
    pub tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for AcSettings {
    fn default() -> Self {
        Self { tol: DEFAULT_CERT_TOL, feas_tol: DEFAULT_FEAS_TOL, max_iter: 400 }
    }
}

/// Initial point for the local solver.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    /// Mid-range magnitudes at zero angle, dispatch at the box midpoint.
    Flat,
    Point { v: Vec<Complex64>, p: Vec<f64>, q: Vec<f64> },
}

impl Start {
    /// Rounds a relaxation optimum: its recovered voltages when exact,
    /// otherwise the leading eigenvector of `W` with magnitudes clipped
    /// into the voltage bounds.
    pub fn from_sdp(case: &NetworkCase, sol: &SdpSolution) -> Result<Self> {
        let mut v = match &sol.recovered_v {
            Some(v) => v.clone(),
            None => sol.w.leading_vector()?,
        };
        for (vk, bus) in v.iter_mut().zip(&case.buses) {
            let m = vk.norm();
            let target = m.clamp(libm::sqrt(bus.v_min_sq), libm::sqrt(bus.v_max_sq));
            *vk = if m > 0.0 { *vk * (target / m) } else { Complex64::new(target, 0.0) };
        }
        let clip = |x: &[f64], lo: fn(&crate::Bus) -> f64, hi: fn(&crate::Bus) -> f64| -> Vec<f64> {
            x.iter().zip(&case.buses).map(|(v, b)| v.clamp(lo(b), hi(b))).collect()
        };
        Ok(Start::Point {
            v,
            p: clip(&sol.p_gen, |b| b.p_min, |b| b.p_max),
            q: clip(&sol.q_gen, |b| b.q_min, |b| b.q_max),
        })
    }
}

/// Independently recomputed KKT residuals, grouped as in the optimality
/// system; each is an infinity norm.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktReport {
    /// `‖Û V‖∞`.
    pub stationarity_v: f64,
    /// `∇c − Λ + μ̄ − μ̲` over real and reactive dispatch.
    pub stationarity_pq: f64,
    pub complementarity: f64,
    /// Primal constraint violations and negative multipliers.
    pub feasibility: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity_v.max(self.stationarity_pq).max(self.complementarity).max(self.feasibility)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcSolution {
    pub v: Vec<Complex64>,
    pub p_gen: Vec<f64>,
    pub q_gen: Vec<f64>,
    /// `lmp_p`/`lmp_q` hold the AC prices.
    pub duals: Multipliers,
    pub objective: f64,
    pub report: KktReport,
    pub kkt_residual: f64,
    pub certified: bool,
    pub iterations: usize,
}

impl AcSolution {
    /// Pairs recovered voltages of an exact relaxation with its dispatch
    /// and multipliers, refined by [`polish_kkt_point`]. `None` unless the
    /// relaxation has rank one.
    pub fn from_sdp(case: &NetworkCase, sdp: &SdpSolution, tol: f64) -> Result<Option<Self>> {
        let Some(v) = sdp.recovered_v.as_ref() else {
            return Ok(None);
        };
        let settings = AcSettings { tol, ..AcSettings::default() };
        polish_kkt_point(case, v, &sdp.p_gen, &sdp.q_gen, &sdp.duals, &settings).map(Some)
    }

    pub fn voltage_sq(&self) -> Vec<f64> {
        self.v.iter().map(|v| v.norm_sqr()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tag {
    BalanceP(usize),
    BalanceQ(usize),
    Pin,
    FixedV(usize),
    FixedP(usize),
    FixedQ(usize),
    Flow(usize),
    VHi(usize),
    VLo(usize),
    PHi(usize),
    PLo(usize),
    QHi(usize),
    QLo(usize),
}

/// `coef · xᵥᵀ E xᵥ + Σ lin + constant`.
struct Row {
    quad: Option<(usize, f64)>,
    lin: Vec<(usize, f64)>,
    constant: f64,
    tag: Tag,
}

struct Model {
    n: usize,
    forms: Vec<Matrix>,
    eq: Vec<Row>,
    ineq: Vec<Row>,
    case: NetworkCase,
}

impl Model {
    fn new(case: &NetworkCase) -> Self {
        let n = case.n_buses();
        let branches = build_branch_matrices(case);
        let inj = build_injection_matrices(case, &branches);
        let mut forms = Vec::new();
        let mut form = |m: &HermitianMatrix| {
            forms.push(m.real_embed().matrix().clone());
            forms.len() - 1
        };
        let (p, q) = (|k: usize| 2 * n + k, |k: usize| 3 * n + k);
        let mut eq = Vec::new();
        let mut ineq = Vec::new();
        for (k, bus) in case.buses.iter().enumerate() {
            let fp = form(&inj[k].phi);
            eq.push(Row { quad: Some((fp, 1.0)), lin: vec![(p(k), -1.0)], constant: bus.p_demand, tag: Tag::BalanceP(k) });
            let fq = form(&inj[k].psi);
            eq.push(Row { quad: Some((fq, 1.0)), lin: vec![(q(k), -1.0)], constant: bus.q_demand, tag: Tag::BalanceQ(k) });
        }
        eq.push(Row { quad: None, lin: vec![(n, 1.0)], constant: 0.0, tag: Tag::Pin });
        for (i, br) in branches.iter().enumerate() {
            let f = form(&br.phi);
            let limit = case.lines[br.line].flow_limit;
            ineq.push(Row { quad: Some((f, 1.0)), lin: Vec::new(), constant: -limit, tag: Tag::Flow(i) });
        }
        for (k, bus) in case.buses.iter().enumerate() {
            let fu = form(&HermitianMatrix::unit(n, k));
            let quad = |c: f64| Some((fu, c));
            if bus.v_min_sq == bus.v_max_sq {
                eq.push(Row { quad: quad(1.0), lin: Vec::new(), constant: -bus.v_max_sq, tag: Tag::FixedV(k) });
            } else {
                ineq.push(Row { quad: quad(1.0), lin: Vec::new(), constant: -bus.v_max_sq, tag: Tag::VHi(k) });
                ineq.push(Row { quad: quad(-1.0), lin: Vec::new(), constant: bus.v_min_sq, tag: Tag::VLo(k) });
            }
            let boxes = [
                (p(k), bus.p_min, bus.p_max, Tag::FixedP(k), Tag::PHi(k), Tag::PLo(k)),
                (q(k), bus.q_min, bus.q_max, Tag::FixedQ(k), Tag::QHi(k), Tag::QLo(k)),
            ];
            for (var, lo, hi, fixed, t_hi, t_lo) in boxes {
                if lo == hi {
                    eq.push(Row { quad: None, lin: vec![(var, 1.0)], constant: -hi, tag: fixed });
                } else {
                    ineq.push(Row { quad: None, lin: vec![(var, 1.0)], constant: -hi, tag: t_hi });
                    ineq.push(Row { quad: None, lin: vec![(var, -1.0)], constant: lo, tag: t_lo });
                }
            }
        }
        Model { n, forms, eq, ineq, case: case.clone() }
    }

    fn nx(&self) -> usize {
        4 * self.n
    }

    fn value(&self, row: &Row, x: &[f64]) -> f64 {
        let xv = &x[..2 * self.n];
        let mut v = row.constant + row.lin.iter().map(|&(i, c)| c * x[i]).sum::<f64>();
        if let Some((f, c)) = row.quad {
            v += c * linalg::dot(xv, &self.forms[f].matvec(xv));
        }
        v
    }

    fn gradient(&self, row: &Row, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.nx()];
        for &(i, c) in &row.lin {
            g[i] += c;
        }
        if let Some((f, c)) = row.quad {
            let ex = self.forms[f].matvec(&x[..2 * self.n]);
            for (gi, e) in g.iter_mut().zip(ex) {
                *gi += 2.0 * c * e;
            }
        }
        g
    }

    fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        (&x[2 * self.n..3 * self.n], &x[3 * self.n..])
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let (p, q) = self.split(x);
        self.case.total_cost(p, q)
    }

    fn objective_gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let (p, q) = self.split(x);
        let mut g = vec![0.0; self.nx()];
        for (k, bus) in self.case.buses.iter().enumerate() {
            let d = bus.cost.gradient(p[k], q[k]);
            g[2 * n + k] = d[0];
            g[3 * n + k] = d[1];
        }
        g
    }

    /// Hessian of `f + λᵀg + μᵀh`.
    fn lagrangian_hessian(&self, lam: &[f64], mu: &[f64]) -> Matrix {
        let n = self.n;
        let mut h = Matrix::zeros(self.nx(), self.nx());
        for (k, bus) in self.case.buses.iter().enumerate() {
            let c = bus.cost.hessian();
            let idx = [2 * n + k, 3 * n + k];
            for a in 0..2 {
                for b in 0..2 {
                    h[(idx[a], idx[b])] += c[a][b];
                }
            }
        }
        let mut weights = vec![0.0; self.forms.len()];
        for (row, &m) in self.eq.iter().zip(lam).chain(self.ineq.iter().zip(mu)) {
            if let Some((f, c)) = row.quad {
                weights[f] += 2.0 * c * m;
            }
        }
        for (f, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let e = &self.forms[f];
            for i in 0..2 * n {
                for j in 0..2 * n {
                    h[(i, j)] += w * e[(i, j)];
                }
            }
        }
        h
    }

    fn jacobian(&self, rows: &[Row], x: &[f64]) -> Matrix {
        let nx = self.nx();
        let mut j = Matrix::zeros(rows.len(), nx);
        for (r, row) in rows.iter().enumerate() {
            for (c, v) in self.gradient(row, x).into_iter().enumerate() {
                j[(r, c)] = v;
            }
        }
        j
    }

    fn start_point(&self, start: &Start) -> Result<Vec<f64>> {
        let n = self.n;
        let mut x = vec![0.0; self.nx()];
        match start {
            Start::Flat => {
                for (k, b) in self.case.buses.iter().enumerate() {
                    x[k] = libm::sqrt(0.5 * (b.v_min_sq + b.v_max_sq));
                    x[2 * n + k] = 0.5 * (b.p_min + b.p_max);
                    x[3 * n + k] = 0.5 * (b.q_min + b.q_max);
                }
            }
            Start::Point { v, p, q } => {
                for len in [v.len(), p.len(), q.len()] {
                    if len != n {
                        return Err(Error::DimensionMismatch { expected: n, found: len });
                    }
                }
                let mut v = v.clone();
                normalize_phase(&mut v);
                for k in 0..n {
                    x[k] = v[k].re;
                    x[n + k] = v[k].im;
                    x[2 * n + k] = p[k];
                    x[3 * n + k] = q[k];
                }
            }
        }
        Ok(x)
    }

    fn multipliers(&self, lam: &[f64], mu: &[f64]) -> Multipliers {
        let mut d = Multipliers::zeros(self.n, self.case.n_lines());
        let split = |v: f64| (v.max(0.0), (-v).max(0.0));
        for (row, &l) in self.eq.iter().zip(lam) {
            match row.tag {
                Tag::BalanceP(k) => d.lmp_p[k] = l,
                Tag::BalanceQ(k) => d.lmp_q[k] = l,
                Tag::FixedV(k) => (d.mu_v_hi[k], d.mu_v_lo[k]) = split(l),
                Tag::FixedP(k) => (d.mu_p_hi[k], d.mu_p_lo[k]) = split(l),
                Tag::FixedQ(k) => (d.mu_q_hi[k], d.mu_q_lo[k]) = split(l),
                _ => {}
            }
        }
        for (row, &m) in self.ineq.iter().zip(mu) {
            match row.tag {
                Tag::Flow(i) => d.mu_flow[i] = m,
                Tag::VHi(k) => d.mu_v_hi[k] = m,
                Tag::VLo(k) => d.mu_v_lo[k] = m,
                Tag::PHi(k) => d.mu_p_hi[k] = m,
                Tag::PLo(k) => d.mu_p_lo[k] = m,
                Tag::QHi(k) => d.mu_q_hi[k] = m,
                Tag::QLo(k) => d.mu_q_lo[k] = m,
                _ => {}
            }
        }
        d
    }

    /// Inverse of [`Model::multipliers`]; the pin row gets zero.
    fn row_multipliers(&self, d: &Multipliers) -> (Vec<f64>, Vec<f64>) {
        let lam = self
            .eq
            .iter()
            .map(|row| match row.tag {
                Tag::BalanceP(k) => d.lmp_p[k],
                Tag::BalanceQ(k) => d.lmp_q[k],
                Tag::FixedV(k) => d.mu_v_hi[k] - d.mu_v_lo[k],
                Tag::FixedP(k) => d.mu_p_hi[k] - d.mu_p_lo[k],
                Tag::FixedQ(k) => d.mu_q_hi[k] - d.mu_q_lo[k],
                _ => 0.0,
            })
            .collect();
        let mu = self
            .ineq
            .iter()
            .map(|row| match row.tag {
                Tag::Flow(i) => d.mu_flow[i],
                Tag::VHi(k) => d.mu_v_hi[k],
                Tag::VLo(k) => d.mu_v_lo[k],
                Tag::PHi(k) => d.mu_p_hi[k],
                Tag::PLo(k) => d.mu_p_lo[k],
                Tag::QHi(k) => d.mu_q_hi[k],
                Tag::QLo(k) => d.mu_q_lo[k],
                _ => 0.0,
            })
            .collect();
        (lam, mu)
    }
}

struct Iterate {
    x: Vec<f64>,
    lam: Vec<f64>,
    mu: Vec<f64>,
    z: Vec<f64>,
}

/// Solves `[M Jᵀ; J −δI] [dx; dλ] = [rx; rg]` after symmetric diagonal
/// equilibration. Barrier terms make `M` badly scaled near the solution.
fn solve_augmented(m: &Matrix, jg: &Matrix, rhs_x: &[f64], rhs_g: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let (nx, ne) = (m.rows(), jg.rows());
    let dim = nx + ne;
    for delta in [0.0, 1e-10, 1e-8, 1e-6] {
        let mut k = Matrix::zeros(dim, dim);
        for i in 0..nx {
            for j in 0..nx {
                k[(i, j)] = m[(i, j)];
            }
            k[(i, i)] += delta;
        }
        for r in 0..ne {
            for c in 0..nx {
                k[(nx + r, c)] = jg[(r, c)];
                k[(c, nx + r)] = jg[(r, c)];
            }
            k[(nx + r, nx + r)] = -delta;
        }
        let d: Vec<f64> = (0..dim)
            .map(|i| {
                let big = k.row(i).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                if big > 0.0 { 1.0 / libm::sqrt(big) } else { 1.0 }
            })
            .collect();
        for i in 0..dim {
            for j in 0..dim {
                k[(i, j)] *= d[i] * d[j];
            }
        }
        if let Ok(lu) = Lu::factor(&k) {
            let rhs: Vec<f64> = rhs_x.iter().chain(rhs_g).zip(&d).map(|(r, di)| r * di).collect();
            let sol: Vec<f64> = lu.solve(&rhs).iter().zip(&d).map(|(s, di)| s * di).collect();
            if sol.iter().all(|v| v.is_finite()) {
                return Some((sol[..nx].to_vec(), sol[nx..].to_vec()));
            }
        }
    }
    None
}

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .fold(1.0_f64, |a, (vi, di)| a.min(-FRACTION_TO_BOUNDARY * vi / di))
}

/// Primal–dual barrier method. The barrier weight starts at 1 and is
/// divided by ten once the barrier subproblem is solved to within that
/// weight.
///
/// Hitting the iteration cap is not an error: the best iterate is returned
/// with `certified == false`.
pub fn solve_ac_local(case: &NetworkCase, start: &Start, settings: &AcSettings) -> Result<AcSolution> {
    let violations = case.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidCase(violations));
    }
    let model = Model::new(case);
    let x0 = model.start_point(start)?;
    let h0: Vec<f64> = model.ineq.iter().map(|r| model.value(r, &x0)).collect();
    let z: Vec<f64> = h0.iter().map(|h| (-h).max(1.0)).collect();
    let mut gamma = 1.0;
    let mut it = Iterate { mu: z.iter().map(|zi| gamma / zi).collect(), z, lam: vec![0.0; model.eq.len()], x: x0 };

    let mut best: Option<(f64, AcSolution)> = None;
    let mut iterations = 0;
    'outer: loop {
        for _ in 0..MAX_INNER {
            let g: Vec<f64> = model.eq.iter().map(|r| model.value(r, &it.x)).collect();
            let h: Vec<f64> = model.ineq.iter().map(|r| model.value(r, &it.x)).collect();
            let jg = model.jacobian(&model.eq, &it.x);
            let jh = model.jacobian(&model.ineq, &it.x);
            let mut lx = model.objective_gradient(&it.x);
            linalg::axpy(1.0, &jg.matvec_t(&it.lam), &mut lx);
            linalg::axpy(1.0, &jh.matvec_t(&it.mu), &mut lx);
            let slack_res = h.iter().zip(&it.z).fold(0.0_f64, |m, (a, b)| m.max((a + b).abs()));
            let comp_res = it.z.iter().zip(&it.mu).fold(0.0_f64, |m, (a, b)| m.max((a * b - gamma).abs()));
            let barrier_res = linalg::norm_inf(&lx).max(linalg::norm_inf(&g)).max(slack_res).max(comp_res);

            let candidate = finish(&model, &it, iterations, settings)?;
            if best.as_ref().map_or(true, |(r, _)| candidate.kkt_residual < *r) {
                best = Some((candidate.kkt_residual, candidate));
            }
            if barrier_res <= gamma.max(0.1 * GAMMA_MIN) {
                break;
            }
            if iterations >= settings.max_iter {
                break 'outer;
            }
            iterations += 1;

            let lxx = model.lagrangian_hessian(&it.lam, &it.mu);
            let nx = model.nx();
            let mut m = lxx;
            let mut n_rhs = lx.clone();
            for (r, row_h) in h.iter().enumerate() {
                let w = it.mu[r] / it.z[r];
                let t = (gamma + it.mu[r] * row_h) / it.z[r];
                let row = jh.row(r);
                for i in 0..nx {
                    if row[i] == 0.0 {
                        continue;
                    }
                    n_rhs[i] += row[i] * t;
                    for j in 0..nx {
                        m[(i, j)] += w * row[i] * row[j];
                    }
                }
            }
            let neg_n: Vec<f64> = n_rhs.iter().map(|v| -v).collect();
            let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
            let (dx, dlam) =
                solve_augmented(&m, &jg, &neg_n, &neg_g).ok_or(Error::SingularKkt { iteration: iterations })?;
            let jdx = jh.matvec(&dx);
            let dz: Vec<f64> = (0..h.len()).map(|r| -h[r] - it.z[r] - jdx[r]).collect();
            let dmu: Vec<f64> = (0..h.len()).map(|r| -it.mu[r] + (gamma - it.mu[r] * dz[r]) / it.z[r]).collect();
            let ap = max_step(&it.z, &dz);
            let ad = max_step(&it.mu, &dmu);
            linalg::axpy(ap, &dx, &mut it.x);
            linalg::axpy(ap, &dz, &mut it.z);
            linalg::axpy(ad, &dlam, &mut it.lam);
            linalg::axpy(ad, &dmu, &mut it.mu);
        }
        if gamma <= GAMMA_MIN {
            break;
        }
        gamma = (gamma / 10.0).max(GAMMA_MIN);
    }
    let final_point = finish(&model, &it, iterations, settings)?;
    let (_, best) = best.expect("at least one iterate is evaluated");
    Ok(if final_point.kkt_residual <= best.kkt_residual { final_point } else { best })
}

fn finish(model: &Model, it: &Iterate, iterations: usize, settings: &AcSettings) -> Result<AcSolution> {
    let n = model.n;
    let mut v: Vec<Complex64> = (0..n).map(|k| Complex64::new(it.x[k], it.x[n + k])).collect();
    if v[0].re < 0.0 {
        for vk in v.iter_mut() {
            *vk = -*vk;
        }
    }
    let (p, q) = model.split(&it.x);
    let duals = model.multipliers(&it.lam, &it.mu);
    let report = audit_point(&model.case, &v, p, q, &duals)?;
    let kkt_residual = report.max();
    Ok(AcSolution {
        v,
        p_gen: p.to_vec(),
        q_gen: q.to_vec(),
        duals,
        objective: model.objective(&it.x),
        report,
        kkt_residual,
        certified: kkt_residual <= settings.tol,
        iterations,
    })
}

/// Refines a KKT point with its active set held fixed.
///
/// Inequalities whose multiplier exceeds their slack are treated as
/// equalities, the rest are dropped. Interior-point output is accurate only
/// to the square root of its gap in `V`; Levenberg-Marquardt steps on the
/// resulting square system recover full precision even when the active
/// constraints are linearly dependent. Returns the starting point unchanged
/// if refinement does not lower the audited residual.
pub fn polish_kkt_point(
    case: &NetworkCase,
    v: &[Complex64],
    p: &[f64],
    q: &[f64],
    duals: &Multipliers,
    settings: &AcSettings,
) -> Result<AcSolution> {
    let model = Model::new(case);
    let x0 = model.start_point(&Start::Point { v: v.to_vec(), p: p.to_vec(), q: q.to_vec() })?;
    let (lam0, mu_all) = model.row_multipliers(duals);
    let active: Vec<usize> =
        (0..model.ineq.len()).filter(|&r| mu_all[r] > -model.value(&model.ineq[r], &x0)).collect();
    let rows: Vec<&Row> = model.eq.iter().chain(active.iter().map(|&r| &model.ineq[r])).collect();
    let (nx, n_eq, nr) = (model.nx(), model.eq.len(), rows.len());

    // u = (x, multipliers of eq rows, multipliers of active rows).
    let unpack = |u: &[f64]| {
        let mut mu = vec![0.0; model.ineq.len()];
        for (&r, &m) in active.iter().zip(&u[nx + n_eq..]) {
            mu[r] = m;
        }
        Iterate { x: u[..nx].to_vec(), lam: u[nx..nx + n_eq].to_vec(), mu, z: Vec::new() }
    };
    let residual = |it: &Iterate| -> (Vec<f64>, Matrix) {
        let mut jac = Matrix::zeros(nr, nx);
        for (r, row) in rows.iter().enumerate() {
            for (c, g) in model.gradient(row, &it.x).into_iter().enumerate() {
                jac[(r, c)] = g;
            }
        }
        let mult: Vec<f64> = it.lam.iter().chain(active.iter().map(|&r| &it.mu[r])).copied().collect();
        let mut f = model.objective_gradient(&it.x);
        linalg::axpy(1.0, &jac.matvec_t(&mult), &mut f);
        f.extend(rows.iter().map(|row| model.value(row, &it.x)));
        (f, jac)
    };

    let mut u: Vec<f64> = x0.iter().chain(&lam0).chain(active.iter().map(|&r| &mu_all[r])).copied().collect();
    let start = finish(&model, &unpack(&u), 0, settings)?;
    let dim = nx + nr;
    for _ in 0..POLISH_STEPS {
        let it = unpack(&u);
        let (f, jac) = residual(&it);
        let norm = linalg::norm2(&f);
        if norm <= POLISH_TOL {
            break;
        }
        let hess = model.lagrangian_hessian(&it.lam, &it.mu);
        let mut k = Matrix::zeros(dim, dim);
        for i in 0..nx {
            for j in 0..nx {
                k[(i, j)] = hess[(i, j)];
            }
        }
        for r in 0..nr {
            for c in 0..nx {
                k[(nx + r, c)] = jac[(r, c)];
                k[(c, nx + r)] = jac[(r, c)];
            }
        }
        let mut normal = k.matmul(&k);
        let grad = k.matvec(&f);
        let mut damping = norm * norm;
        let mut improved = false;
        while damping < 1e6 {
            for i in 0..dim {
                normal[(i, i)] += damping;
            }
            if let Ok(ch) = linalg::Cholesky::factor(&normal) {
                let step = ch.solve(&grad);
                let trial: Vec<f64> = u.iter().zip(&step).map(|(a, d)| a - d).collect();
                if linalg::norm2(&residual(&unpack(&trial)).0) < norm {
                    u = trial;
                    improved = true;
                    break;
                }
            }
            for i in 0..dim {
                normal[(i, i)] -= damping;
            }
            damping *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let polished = finish(&model, &unpack(&u), 0, settings)?;
    Ok(if polished.kkt_residual < start.kkt_residual { polished } else { start })
}

/// Audits an arbitrary candidate point and multiplier set from scratch.
pub fn audit_point(
    case: &NetworkCase,
    v: &[Complex64],
    p: &[f64],
    q: &[f64],
    duals: &Multipliers,
) -> Result<KktReport> {
    let n = case.n_buses();
    let m2 = 2 * case.n_lines();
    for len in [v.len(), p.len(), q.len(), duals.lmp_p.len(), duals.lmp_q.len(), duals.mu_v_hi.len(), duals.mu_p_hi.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    if duals.mu_flow.len() != m2 {
        return Err(Error::DimensionMismatch { expected: m2, found: duals.mu_flow.len() });
    }
    let branches = build_branch_matrices(case);
    let inj = build_injection_matrices(case, &branches);
    let u = assemble_u(case, duals);
    let uv = u.apply(v)?;
    let stationarity_v = uv.iter().fold(0.0_f64, |m, z| m.max(z.norm()));

    let mut stationarity_pq = 0.0_f64;
    let mut complementarity = 0.0_f64;
    let mut feasibility = -duals.min_inequality();
    for (k, bus) in case.buses.iter().enumerate() {
        let g = bus.cost.gradient(p[k], q[k]);
        stationarity_pq = stationarity_pq
            .max((g[0] - duals.lmp_p[k] + duals.mu_p_hi[k] - duals.mu_p_lo[k]).abs())
            .max((g[1] - duals.lmp_q[k] + duals.mu_q_hi[k] - duals.mu_q_lo[k]).abs());
        let vsq = v[k].norm_sqr();
        let pairs = [
            (duals.mu_v_hi[k], vsq - bus.v_max_sq),
            (duals.mu_v_lo[k], bus.v_min_sq - vsq),
            (duals.mu_p_hi[k], p[k] - bus.p_max),
            (duals.mu_p_lo[k], bus.p_min - p[k]),
            (duals.mu_q_hi[k], q[k] - bus.q_max),
            (duals.mu_q_lo[k], bus.q_min - q[k]),
        ];
        for (mu, h) in pairs {
            complementarity = complementarity.max((mu * h).abs());
            feasibility = feasibility.max(h);
        }
        feasibility = feasibility
            .max((p[k] - bus.p_demand - inj[k].phi.quadratic_form(v)?).abs())
            .max((q[k] - bus.q_demand - inj[k].psi.quadratic_form(v)?).abs());
    }
    for (br, &mu) in branches.iter().zip(&duals.mu_flow) {
        let h = br.phi.quadratic_form(v)? - case.lines[br.line].flow_limit;
        complementarity = complementarity.max((mu * h).abs());
        feasibility = feasibility.max(h);
    }
    Ok(KktReport { stationarity_v, stationarity_pq, complementarity, feasibility })
}

pub fn kkt_residual_report(case: &NetworkCase, sol: &AcSolution) -> Result<KktReport> {
    audit_point(case, &sol.v, &sol.p_gen, &sol.q_gen, &sol.duals)
}

/// AC prices of a certified point.
pub fn extract_ac_lmps(sol: &AcSolution, tol: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(sol.kkt_residual <= tol) {
        return Err(Error::Uncertified { residual: sol.kkt_residual });
    }
    Ok((sol.duals.lmp_p.clone(), sol.duals.lmp_q.clone()))
}

/// Finite-difference estimate of `∂J/∂p^D` at one bus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceSensitivity {
    pub bus: usize,
    pub lmp: f64,
    /// Central difference.
    pub estimate: f64,
    pub left_slope: f64,
    pub right_slope: f64,
    /// One-sided slopes disagree: the optimal cost has a kink here.
    pub kink: bool,
}

impl PriceSensitivity {
    pub fn mismatch(&self) -> f64 {
        (self.estimate - self.lmp).abs()
    }
}

pub fn price_sensitivity_check(
    case: &NetworkCase,
    sol: &AcSolution,
    bus: usize,
    delta: f64,
    settings: &AcSettings,
) -> Result<PriceSensitivity> {
    if bus >= case.n_buses() {
        return Err(Error::DimensionMismatch { expected: case.n_buses(), found: bus });
    }
    if !sol.certified {
        return Err(Error::Uncertified { residual: sol.kkt_residual });
    }
    let start = Start::Point { v: sol.v.clone(), p: sol.p_gen.clone(), q: sol.q_gen.clone() };
    let resolve = |d: f64| -> Result<f64> {
        let mut c = case.clone();
        c.buses[bus].p_demand += d;
        let s = solve_ac_local(&c, &start, settings)?;
        if !s.certified {
            return Err(Error::Uncertified { residual: s.kkt_residual });
        }
        let distance = s
            .p_gen
            .iter()
            .chain(&s.q_gen)
            .zip(sol.p_gen.iter().chain(&sol.q_gen))
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if distance > BASIN_DISTANCE.max(100.0 * delta) {
            return Err(Error::BasinJump { distance });
        }
        Ok(s.objective)
    };
    let up = resolve(delta)?;
    let down = resolve(-delta)?;
    let left_slope = (sol.objective - down) / delta;
    let right_slope = (up - sol.objective) / delta;
    let estimate = (up - down) / (2.0 * delta);
    let kink = (right_slope - left_slope).abs() > 1e-2 * (1.0 + estimate.abs());
    Ok(PriceSensitivity { bus, lmp: sol.duals.lmp_p[bus], estimate, left_slope, right_slope, kink })
}
