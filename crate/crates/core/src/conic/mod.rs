//! Conic programs over products of free, nonnegative, second-order and
//! PSD blocks, and a primal–dual interior-point solver for them.
//!
//! A program is
//!
//! ```text
//! minimize    ½ xᵀPx + cᵀx
//! subject to  A x = b,   x ∈ K = K₁ × … × K_B
//! ```
//!
//! Its dual variables are `y` (one per equality) and `z ∈ K*` with
//! stationarity `c + Px − Aᵀy − z = 0`. Under this convention `y_i` is the
//! sensitivity of the optimal value to `b_i`.

mod cones;
mod epigraph;
mod ipm;
mod kkt;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

pub use cones::{smat, svec, svec_index, svec_len};
pub use epigraph::quadratic_to_epigraph;
pub use ipm::solve;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use cones::ConeKind;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Free(usize),
    Nonnegative(usize),
    /// `x₀ ≥ ‖x₁..‖` of the given total dimension.
    SecondOrder(usize),
    /// Symmetric matrix of the given order, stored as svec.
    Psd(usize),
}

impl Cone {
    pub fn len(&self) -> usize {
        match *self {
            Cone::Free(d) | Cone::Nonnegative(d) | Cone::SecondOrder(d) => d,
            Cone::Psd(n) => svec_len(n),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn kind(&self) -> Option<ConeKind> {
        match *self {
            Cone::Free(_) => None,
            Cone::Nonnegative(d) => Some(ConeKind::Nonneg(d)),
            Cone::SecondOrder(d) => Some(ConeKind::Soc(d)),
            Cone::Psd(n) => Some(ConeKind::Psd(n)),
        }
    }
}

/// Handle to a variable block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub offset: usize,
    pub cone: Cone,
}

impl Block {
    pub fn len(&self) -> usize {
        self.cone.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cone.is_empty()
    }

    /// Global index of the block's `i`-th scalar.
    pub fn var(&self, i: usize) -> usize {
        debug_assert!(i < self.len());
        self.offset + i
    }

    /// Global index of entry `(i, j)` of a PSD block.
    pub fn entry(&self, i: usize, j: usize) -> usize {
        match self.cone {
            Cone::Psd(n) => self.offset + svec_index(n, i, j),
            _ => panic!("entry() on a non-PSD block"),
        }
    }

    pub fn range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }

    /// Coefficients expressing `Tr(C X)` for this PSD block.
    pub fn trace_coeffs(&self, c: &Matrix) -> Vec<(usize, f64)> {
        svec(c)
            .into_iter()
            .enumerate()
            .filter(|(_, v)| *v != 0.0)
            .map(|(k, v)| (self.offset + k, v))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equality {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConeProgram {
    blocks: Vec<Block>,
    n: usize,
    equalities: Vec<Equality>,
    c: Vec<f64>,
    /// Upper-triangular entries of `P`.
    quad: BTreeMap<(usize, usize), f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// One multiplier per equality.
    pub y: Vec<f64>,
    /// Cone dual, laid out like `x`; zero on free blocks.
    pub z: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `xᵀz` over the cone blocks.
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
}

impl ConeSolution {
    pub fn block<'a>(&'a self, b: &Block) -> &'a [f64] {
        &self.x[b.range()]
    }

    pub fn block_dual<'a>(&'a self, b: &Block) -> &'a [f64] {
        &self.z[b.range()]
    }

    pub fn psd(&self, b: &Block) -> Matrix {
        match b.cone {
            Cone::Psd(n) => smat(n, self.block(b)),
            _ => panic!("psd() on a non-PSD block"),
        }
    }

    pub fn psd_dual(&self, b: &Block) -> Matrix {
        match b.cone {
            Cone::Psd(n) => smat(n, self.block_dual(b)),
            _ => panic!("psd_dual() on a non-PSD block"),
        }
    }
}

/// Independently recomputed optimality residuals, all infinity norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `‖c + Px − Aᵀy − z‖∞`.
    pub stationarity: f64,
    /// `‖Ax − b‖∞`.
    pub primal: f64,
    /// Largest violation of `x ∈ K` (negative Jordan eigenvalue).
    pub cone_primal: f64,
    /// Largest violation of `z ∈ K*`, including nonzero `z` on free blocks.
    pub cone_dual: f64,
    /// `|xᵀz|`.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.cone_primal).max(self.cone_dual).max(self.complementarity)
    }
}

impl ConeProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, cone: Cone) -> Block {
        let block = Block { offset: self.n, cone };
        self.n += cone.len();
        self.c.resize(self.n, 0.0);
        self.blocks.push(block);
        block
    }

    /// Adds `Σ coeffs · x = rhs` and returns its row index.
    pub fn add_equality(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.equalities.push(Equality { coeffs, rhs });
        self.equalities.len() - 1
    }

    /// Adds `coef · x_var` to the objective.
    pub fn add_linear(&mut self, var: usize, coef: f64) {
        self.c[var] += coef;
    }

    /// Adds `coef · x_i · x_j` to the objective.
    pub fn add_quadratic(&mut self, i: usize, j: usize, coef: f64) {
        let key = (i.min(j), i.max(j));
        let scale = if i == j { 2.0 } else { 1.0 };
        *self.quad.entry(key).or_insert(0.0) += scale * coef;
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn equalities(&self) -> &[Equality] {
        &self.equalities
    }

    pub fn n_equalities(&self) -> usize {
        self.equalities.len()
    }

    pub fn linear(&self) -> &[f64] {
        &self.c
    }

    pub fn has_quadratic(&self) -> bool {
        self.quad.values().any(|v| *v != 0.0)
    }

    /// Dense `P` with objective `½ xᵀPx`.
    pub fn quadratic_matrix(&self) -> Matrix {
        let mut p = Matrix::zeros(self.n, self.n);
        for (&(i, j), &v) in &self.quad {
            p[(i, j)] += v;
            if i != j {
                p[(j, i)] += v;
            }
        }
        p
    }

    pub fn equality_matrix(&self) -> (Matrix, Vec<f64>) {
        let mut a = Matrix::zeros(self.equalities.len(), self.n);
        let mut b = Vec::with_capacity(self.equalities.len());
        for (r, eq) in self.equalities.iter().enumerate() {
            for &(j, v) in &eq.coeffs {
                a[(r, j)] += v;
            }
            b.push(eq.rhs);
        }
        (a, b)
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut quad = 0.0;
        for (&(i, j), &v) in &self.quad {
            let f = if i == j { 0.5 } else { 1.0 };
            quad += f * v * x[i] * x[j];
        }
        quad + linalg::dot(&self.c, x)
    }

    /// Every structural check the solver relies on.
    pub fn check_well_formed(&self) -> Result<()> {
        for (r, eq) in self.equalities.iter().enumerate() {
            if let Some(&(j, v)) = eq.coeffs.iter().find(|(j, v)| *j >= self.n || !v.is_finite()) {
                return Err(Error::MalformedProgram(format!("equality {r} references variable {j} with coefficient {v}")));
            }
            if !eq.rhs.is_finite() {
                return Err(Error::MalformedProgram(format!("equality {r} has a non-finite right-hand side")));
            }
        }
        if self.c.iter().any(|v| !v.is_finite()) {
            return Err(Error::MalformedProgram("non-finite linear objective".into()));
        }
        for (&(i, j), v) in &self.quad {
            if i >= self.n || j >= self.n || !v.is_finite() {
                return Err(Error::MalformedProgram(format!("quadratic entry ({i}, {j}) out of range")));
            }
            for idx in [i, j] {
                let blk = self.block_of(idx);
                if !matches!(blk.cone, Cone::Free(_) | Cone::Nonnegative(_)) {
                    return Err(Error::MalformedProgram(format!("quadratic term on conic variable {idx}")));
                }
            }
        }
        Ok(())
    }

    fn block_of(&self, var: usize) -> Block {
        *self.blocks.iter().find(|b| b.range().contains(&var)).expect("variable outside every block")
    }

    /// Independent recheck of a candidate primal–dual triple.
    pub fn kkt_residuals(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<KktResiduals> {
        if x.len() != self.n || z.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: x.len().min(z.len()) });
        }
        if y.len() != self.equalities.len() {
            return Err(Error::DimensionMismatch { expected: self.equalities.len(), found: y.len() });
        }
        let mut stat = self.c.clone();
        for (&(i, j), &v) in &self.quad {
            stat[i] += v * x[j];
            if i != j {
                stat[j] += v * x[i];
            }
        }
        let mut primal = 0.0_f64;
        for (eq, &yr) in self.equalities.iter().zip(y) {
            let mut ax = -eq.rhs;
            for &(j, v) in &eq.coeffs {
                ax += v * x[j];
                stat[j] -= v * yr;
            }
            primal = primal.max(ax.abs());
        }
        for (s, zi) in stat.iter_mut().zip(z) {
            *s -= zi;
        }
        let mut cone_primal = 0.0_f64;
        let mut cone_dual = 0.0_f64;
        let mut comp = 0.0;
        for b in &self.blocks {
            let (xb, zb) = (&x[b.range()], &z[b.range()]);
            match b.cone.kind() {
                None => cone_dual = cone_dual.max(linalg::norm_inf(zb)),
                Some(kind) if !b.is_empty() => {
                    cone_primal = cone_primal.max(-kind.min_eigenvalue(xb));
                    cone_dual = cone_dual.max(-kind.min_eigenvalue(zb));
                    comp += linalg::dot(xb, zb);
                }
                Some(_) => {}
            }
        }
        Ok(KktResiduals {
            stationarity: linalg::norm_inf(&stat),
            primal,
            cone_primal: cone_primal.max(0.0),
            cone_dual: cone_dual.max(0.0),
            complementarity: libm::fabs(comp),
        })
    }

    pub(crate) fn cone_kinds(&self) -> Vec<(Block, ConeKind)> {
        self.blocks.iter().filter_map(|b| b.cone.kind().map(|k| (*b, k))).filter(|(b, _)| !b.is_empty()).collect()
    }
}
