//! Network data and the Hermitian matrices that express flows and
//! injections as quadratic forms in the bus voltage vector.
//!
//! Buses are indexed from 0 in code. Diagnostics render them 1-based,
//! which is how case files and reports number them.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::hermitian::HermitianMatrix;

/// Jointly convex quadratic cost `c(p, q) = [p q] Q [p q]ᵀ + l·[p q]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorCost {
    pub quadratic: [[f64; 2]; 2],
    pub linear: [f64; 2],
}

impl GeneratorCost {
    pub const ZERO: Self = Self { quadratic: [[0.0; 2]; 2], linear: [0.0; 2] };

    /// `c2·p² + c1·p`, no reactive cost.
    pub fn real_power(c2: f64, c1: f64) -> Self {
        Self { quadratic: [[c2, 0.0], [0.0, 0.0]], linear: [c1, 0.0] }
    }

    pub fn value(&self, p: f64, q: f64) -> f64 {
        let [[a, b], [c, d]] = self.quadratic;
        a * p * p + (b + c) * p * q + d * q * q + self.linear[0] * p + self.linear[1] * q
    }

    pub fn gradient(&self, p: f64, q: f64) -> [f64; 2] {
        let h = self.hessian();
        [h[0][0] * p + h[0][1] * q + self.linear[0], h[1][0] * p + h[1][1] * q + self.linear[1]]
    }

    /// Hessian of `c`, i.e. `Q + Qᵀ`.
    pub fn hessian(&self) -> [[f64; 2]; 2] {
        let [[a, b], [c, d]] = self.quadratic;
        [[2.0 * a, b + c], [b + c, 2.0 * d]]
    }

    pub fn is_convex(&self, tol: f64) -> bool {
        let [[a, b], [_, d]] = self.hessian();
        a >= -tol && d >= -tol && a * d - b * b >= -tol * (1.0 + a.abs() + d.abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub p_demand: f64,
    pub q_demand: f64,
    pub v_min_sq: f64,
    pub v_max_sq: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub cost: GeneratorCost,
    pub shunt: Complex64,
}

impl Default for Bus {
    fn default() -> Self {
        Self {
            p_demand: 0.0,
            q_demand: 0.0,
            v_min_sq: 0.0,
            v_max_sq: 0.0,
            p_min: 0.0,
            p_max: 0.0,
            q_min: 0.0,
            q_max: 0.0,
            cost: GeneratorCost::ZERO,
            shunt: Complex64::new(0.0, 0.0),
        }
    }
}

impl Bus {
    /// Maximises `γᵖp + γᑫq − c(p, q)` over the dispatch box.
    ///
    /// Returns the optimal profit and one maximiser. A convex quadratic on a
    /// rectangle attains its minimum either at an interior stationary point
    /// or on an edge, so those candidates are enumerated in closed form.
    pub fn best_response(&self, price: [f64; 2]) -> (f64, [f64; 2]) {
        let h = self.cost.hessian();
        let g = [self.cost.linear[0] - price[0], self.cost.linear[1] - price[1]];
        let f = |x: [f64; 2]| self.cost.value(x[0], x[1]) - price[0] * x[0] - price[1] * x[1];
        let lo = [self.p_min, self.q_min];
        let hi = [self.p_max, self.q_max];
        let mut best: Option<(f64, [f64; 2])> = None;
        let mut consider = |x: [f64; 2]| {
            let v = f(x);
            if best.map_or(true, |(b, _)| v < b) {
                best = Some((v, x));
            }
        };
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if h[0][0] > 0.0 && det > 1e-14 * (1.0 + h[0][0] * h[1][1]).abs() {
            let x = [(-h[1][1] * g[0] + h[0][1] * g[1]) / det, (h[1][0] * g[0] - h[0][0] * g[1]) / det];
            if (0..2).all(|i| x[i] >= lo[i] && x[i] <= hi[i]) {
                consider(x);
            }
        }
        for fixed in 0..2 {
            let free = 1 - fixed;
            for bound in [lo[fixed], hi[fixed]] {
                // Along the edge: ½ h_ff t² + (h_fx·bound + g_f) t + const.
                let slope = h[free][fixed] * bound + g[free];
                let mut x = [0.0; 2];
                x[fixed] = bound;
                if h[free][free] > 0.0 {
                    x[free] = (-slope / h[free][free]).clamp(lo[free], hi[free]);
                    consider(x);
                } else {
                    for t in [lo[free], hi[free]] {
                        x[free] = t;
                        consider(x);
                    }
                }
            }
        }
        let (v, x) = best.expect("box has at least one candidate");
        (-v, x)
    }
}

/// Series branch with impedance `r + ix` and a real-power limit applied
/// in both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    pub flow_limit: f64,
}

impl Line {
    pub fn admittance(&self) -> Complex64 {
        Complex64::new(1.0, 0.0) / Complex64::new(self.r, self.x)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkCase {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
}

/// What a [`Violation`] refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subject {
    Bus(usize),
    Line(usize),
    Network,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub subject: Subject,
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.subject {
            Subject::Bus(k) => write!(f, "bus {}: {}: {}", k + 1, self.field, self.message),
            Subject::Line(i) => write!(f, "line {}: {}: {}", i + 1, self.field, self.message),
            Subject::Network => write!(f, "network: {}: {}", self.field, self.message),
        }
    }
}

/// Φ and Ψ for one orientation of a line.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedBranch {
    pub line: usize,
    pub from: usize,
    pub to: usize,
    pub phi: HermitianMatrix,
    pub psi: HermitianMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Injection {
    pub phi: HermitianMatrix,
    pub psi: HermitianMatrix,
}

impl NetworkCase {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    /// Tree test by edge count; assumes the case is connected.
    pub fn is_radial(&self) -> bool {
        self.lines.len() + 1 == self.buses.len()
    }

    /// Neighbour lists as `(bus, line index)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.buses.len()];
        for (i, line) in self.lines.iter().enumerate() {
            if line.from < adj.len() && line.to < adj.len() {
                adj[line.from].push((line.to, i));
                adj[line.to].push((line.from, i));
            }
        }
        adj
    }

    pub fn total_cost(&self, p: &[f64], q: &[f64]) -> f64 {
        self.buses.iter().zip(p.iter().zip(q)).map(|(b, (&p, &q))| b.cost.value(p, q)).sum()
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_case(self)
    }
}

fn push(out: &mut Vec<Violation>, subject: Subject, field: &'static str, message: impl Into<String>) {
    out.push(Violation { subject, field, message: message.into() });
}

/// Checks every structural and numeric invariant of a case.
pub fn validate_case(case: &NetworkCase) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = case.buses.len();
    if n == 0 {
        push(&mut out, Subject::Network, "buses", "case has no buses");
        return out;
    }
    for (k, b) in case.buses.iter().enumerate() {
        let s = Subject::Bus(k);
        let values = [
            b.p_demand, b.q_demand, b.v_min_sq, b.v_max_sq, b.p_min, b.p_max, b.q_min, b.q_max, b.shunt.re, b.shunt.im,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            push(&mut out, s, "values", "non-finite entry");
        }
        if b.v_min_sq < 0.0 {
            push(&mut out, s, "v_min_sq", "must be nonnegative");
        }
        if b.v_min_sq > b.v_max_sq {
            push(&mut out, s, "v_min_sq", "exceeds v_max_sq");
        }
        if b.p_min > b.p_max {
            push(&mut out, s, "p_min", "exceeds p_max");
        }
        if b.q_min > b.q_max {
            push(&mut out, s, "q_min", "exceeds q_max");
        }
        let c = &b.cost;
        if (c.quadratic[0][1] - c.quadratic[1][0]).abs() > 1e-12 {
            push(&mut out, s, "cost.quadratic", "must be symmetric");
        }
        if !c.is_convex(1e-12) {
            push(&mut out, s, "cost.quadratic", "not positive semidefinite");
        }
    }
    let mut seen = BTreeSet::new();
    for (i, line) in case.lines.iter().enumerate() {
        let s = Subject::Line(i);
        if line.from >= n || line.to >= n {
            push(&mut out, s, "bus", "references a missing bus");
            continue;
        }
        if line.from == line.to {
            push(&mut out, s, "bus", "endpoints must differ");
            continue;
        }
        if !(line.r >= 0.0) {
            push(&mut out, s, "r", "must be nonnegative");
        }
        if line.r == 0.0 && line.x == 0.0 {
            push(&mut out, s, "x", "impedance must be nonzero");
        }
        if !(line.flow_limit > 0.0) {
            push(&mut out, s, "flow_limit", "must be positive");
        }
        let key = (line.from.min(line.to), line.from.max(line.to));
        if !seen.insert(key) {
            push(&mut out, s, "bus", "duplicate line between the same buses");
        }
    }
    if !is_connected(case) {
        push(&mut out, Subject::Network, "lines", "network is not connected");
    }
    out
}

fn is_connected(case: &NetworkCase) -> bool {
    let n = case.buses.len();
    let adj = case.adjacency();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(k) = stack.pop() {
        for &(l, _) in &adj[k] {
            if !seen[l] {
                seen[l] = true;
                stack.push(l);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// `[Φ]_kk = ½(y + ȳ)`, `[Φ]_kℓ = −y/2`; `[Ψ]_kk = (ȳ − y)/2i`,
/// `[Ψ]_kℓ = y/2i`; mirrored entries conjugate.
fn branch_pair(n: usize, k: usize, l: usize, y: Complex64) -> (HermitianMatrix, HermitianMatrix) {
    let two_i = Complex64::new(0.0, 2.0);
    let mut phi = HermitianMatrix::zeros(n);
    phi.add_entry(k, k, Complex64::new(y.re, 0.0));
    phi.add_entry(k, l, -y * 0.5);
    let mut psi = HermitianMatrix::zeros(n);
    psi.add_entry(k, k, (y.conj() - y) / two_i);
    psi.add_entry(k, l, y / two_i);
    (phi, psi)
}

/// Both orientations of every line; entry `2i` is `from → to` of line `i`,
/// entry `2i + 1` the reverse.
pub fn build_branch_matrices(case: &NetworkCase) -> Vec<DirectedBranch> {
    let n = case.n_buses();
    let mut out = Vec::with_capacity(2 * case.lines.len());
    for (i, line) in case.lines.iter().enumerate() {
        let y = line.admittance();
        for (k, l) in [(line.from, line.to), (line.to, line.from)] {
            let (phi, psi) = branch_pair(n, k, l, y);
            out.push(DirectedBranch { line: i, from: k, to: l, phi, psi });
        }
    }
    out
}

/// `Φ_k = Re(y_kk) 𝟙_k𝟙_kᵀ + Σ_ℓ Φ_kℓ`, and likewise for Ψ with `−Im(y_kk)`.
pub fn build_injection_matrices(case: &NetworkCase, branches: &[DirectedBranch]) -> Vec<Injection> {
    let n = case.n_buses();
    let mut out: Vec<Injection> = case
        .buses
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let mut phi = HermitianMatrix::zeros(n);
            let mut psi = HermitianMatrix::zeros(n);
            phi.add_entry(k, k, Complex64::new(b.shunt.re, 0.0));
            psi.add_entry(k, k, Complex64::new(-b.shunt.im, 0.0));
            Injection { phi, psi }
        })
        .collect();
    for br in branches {
        out[br.from].phi.add_scaled(1.0, &br.phi);
        out[br.from].psi.add_scaled(1.0, &br.psi);
    }
    out
}
