//! Persisted results of one solve.
//!
//! A record stores enough of the solution to recompute its residuals, so
//! a reloaded record can be checked against the case it claims to solve.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use gridprice_core::ac::audit_point;
use gridprice_core::duals::{assemble_u, Multipliers};
use gridprice_core::network::NetworkCase;
use gridprice_core::pricing::{GapDecomposition, SettlementReport};
use gridprice_core::socp::{cone_residuals, Edge, RadialComparison};
use gridprice_core::sdp::dual_function_value;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Ac,
    Sdp,
    Socp,
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formulation::Ac => "ac",
            Formulation::Sdp => "sdp",
            Formulation::Socp => "socp",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingsRecord {
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualsRecord {
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

impl From<&Multipliers> for DualsRecord {
    fn from(m: &Multipliers) -> Self {
        DualsRecord {
            lmp_p: m.lmp_p.clone(),
            lmp_q: m.lmp_q.clone(),
            mu_flow: m.mu_flow.clone(),
            mu_v_hi: m.mu_v_hi.clone(),
            mu_v_lo: m.mu_v_lo.clone(),
            mu_p_hi: m.mu_p_hi.clone(),
            mu_p_lo: m.mu_p_lo.clone(),
            mu_q_hi: m.mu_q_hi.clone(),
            mu_q_lo: m.mu_q_lo.clone(),
        }
    }
}

impl From<&DualsRecord> for Multipliers {
    fn from(d: &DualsRecord) -> Self {
        Multipliers {
            lmp_p: d.lmp_p.clone(),
            lmp_q: d.lmp_q.clone(),
            mu_flow: d.mu_flow.clone(),
            mu_v_hi: d.mu_v_hi.clone(),
            mu_v_lo: d.mu_v_lo.clone(),
            mu_p_hi: d.mu_p_hi.clone(),
            mu_p_lo: d.mu_p_lo.clone(),
            mu_q_hi: d.mu_q_hi.clone(),
            mu_q_lo: d.mu_q_lo.clone(),
        }
    }
}

/// Branch variables of a branch-flow solution, one entry per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchFlows {
    pub line: Vec<usize>,
    pub from: Vec<usize>,
    pub to: Vec<usize>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub current_sq: Vec<f64>,
}

impl BranchFlows {
    pub fn edges(&self) -> Vec<Edge> {
        (0..self.line.len()).map(|e| Edge { line: self.line[e], from: self.from[e], to: self.to[e] }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub objective: f64,
    pub p_gen: Vec<f64>,
    pub q_gen: Vec<f64>,
    pub duals: DualsRecord,
    /// Squared voltage magnitudes: `|V|²`, `diag W` or `w`.
    pub v_sq: Vec<f64>,
    /// Phasors as `[re, im]`, when the formulation yields them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branches: Option<BranchFlows>,
    /// Whether the relaxation is exact, or for AC whether it is certified.
    pub exact: bool,
    pub iterations: usize,
    pub residuals: BTreeMap<String, f64>,
}

impl SolutionSummary {
    pub fn phasors(&self) -> Option<Vec<Complex64>> {
        self.v.as_ref().map(|v| v.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
    }
}

pub fn phasor_pairs(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettlementSummary {
    pub pay_gen: Vec<f64>,
    pub pay_dem: Vec<f64>,
    pub ms: f64,
    pub ms_formula: f64,
    pub loc: f64,
    pub profit_so: Vec<f64>,
    pub profit_opt: Vec<f64>,
    pub side_payments: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revenue_adequacy: Option<String>,
}

impl From<&SettlementReport> for SettlementSummary {
    fn from(r: &SettlementReport) -> Self {
        SettlementSummary {
            pay_gen: r.pay_gen.clone(),
            pay_dem: r.pay_dem.clone(),
            ms: r.ms,
            ms_formula: r.ms_formula,
            loc: r.loc,
            profit_so: r.profit_so.clone(),
            profit_opt: r.profit_opt.clone(),
            side_payments: r.side_payments.clone(),
            revenue_adequacy: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub ac_objective: f64,
    pub sdp_objective: f64,
    pub gap: f64,
    pub loc: f64,
    pub prs: f64,
    pub residual: f64,
    pub consistent: bool,
    /// Per-bus profits at the relaxation's prices with the AC dispatch.
    pub profit_so: Vec<f64>,
    pub profit_opt: Vec<f64>,
    pub best_dispatch: Vec<[f64; 2]>,
    pub side_payments: Vec<f64>,
}

impl GapSummary {
    pub fn new(d: &GapDecomposition, ac_objective: f64, sdp_objective: f64) -> Self {
        GapSummary {
            ac_objective,
            sdp_objective,
            gap: d.gap,
            loc: d.loc,
            prs: d.prs,
            residual: d.residual,
            consistent: d.consistent,
            profit_so: d.lost_opportunity.profit_so.clone(),
            profit_opt: d.lost_opportunity.profit_opt.clone(),
            best_dispatch: d.lost_opportunity.best_dispatch.clone(),
            side_payments: d.lost_opportunity.profit_opt.iter().zip(&d.lost_opportunity.profit_so).map(|(o, s)| (o - s).max(0.0)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSummary {
    pub sdp_objective: f64,
    pub socp_objective: f64,
    pub objective_gap: f64,
    pub price_gap_p: f64,
    pub price_gap_q: f64,
    pub passed: bool,
}

impl From<&RadialComparison> for RadialSummary {
    fn from(c: &RadialComparison) -> Self {
        RadialSummary {
            sdp_objective: c.sdp_objective,
            socp_objective: c.socp_objective,
            objective_gap: c.objective_gap,
            price_gap_p: c.price_gap_p,
            price_gap_q: c.price_gap_q,
            passed: c.passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub case: String,
    pub formulation: Formulation,
    pub settings: SettingsRecord,
    pub certified: bool,
    /// Set when the solve failed; the other result fields are then empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<SolutionSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settlement: Option<SettlementSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radial: Option<RadialSummary>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("stored residual {name} = {stored:.3e} but recomputed {recomputed:.3e}")]
    Mismatch { name: String, stored: f64, recomputed: f64 },
    #[error(transparent)]
    Core(#[from] gridprice_core::error::Error),
    #[error("record is missing {0}")]
    Missing(&'static str),
}

pub fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Residuals that can be rebuilt from what a summary stores.
pub fn recompute_residuals(
    case: &NetworkCase,
    formulation: Formulation,
    s: &SolutionSummary,
) -> Result<BTreeMap<String, f64>, RecordError> {
    let duals = Multipliers::from(&s.duals);
    let mut out = BTreeMap::new();
    out.insert("cost".to_string(), (case.total_cost(&s.p_gen, &s.q_gen) - s.objective).abs());
    match formulation {
        Formulation::Ac => {
            let v = s.phasors().ok_or(RecordError::Missing("voltage phasors"))?;
            let r = audit_point(case, &v, &s.p_gen, &s.q_gen, &duals)?;
            out.insert("kkt".to_string(), r.max());
            out.insert("stationarity_v".to_string(), r.stationarity_v);
            out.insert("stationarity_pq".to_string(), r.stationarity_pq);
            out.insert("complementarity".to_string(), r.complementarity);
            out.insert("feasibility".to_string(), r.feasibility);
        }
        Formulation::Sdp => {
            out.insert("duality_gap".to_string(), (s.objective - dual_function_value(case, &duals)).abs());
            let min_eig = assemble_u(case, &duals).min_eigenvalue().unwrap_or(f64::NAN);
            out.insert("u_min_eigenvalue".to_string(), min_eig);
        }
        Formulation::Socp => {
            let b = s.branches.as_ref().ok_or(RecordError::Missing("branch flows"))?;
            let r = cone_residuals(&b.edges(), &s.v_sq, &b.p, &b.q, &b.current_sq);
            out.insert("exactness".to_string(), max_abs(&r));
        }
    }
    Ok(out)
}

impl RunRecord {
    pub fn failed(case: &str, formulation: Formulation, settings: SettingsRecord, error: String) -> Self {
        RunRecord {
            case: case.to_string(),
            formulation,
            settings,
            certified: false,
            error: Some(error),
            solution: None,
            settlement: None,
            gap: None,
            radial: None,
            timestamp: now(),
        }
    }

    /// Recomputes every stored residual from the stored solution.
    pub fn verify(&self, case: &NetworkCase) -> Result<(), RecordError> {
        let Some(s) = &self.solution else {
            return Ok(());
        };
        let fresh = recompute_residuals(case, self.formulation, s)?;
        for (name, &stored) in &s.residuals {
            let Some(&recomputed) = fresh.get(name) else {
                return Err(RecordError::Mismatch { name: name.clone(), stored, recomputed: f64::NAN });
            };
            if (stored - recomputed).abs() > 1e-9 * (1.0 + stored.abs()) || recomputed.is_nan() {
                return Err(RecordError::Mismatch { name: name.clone(), stored, recomputed });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("record serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self, RecordError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| RecordError::Io { path: path.display().to_string(), source })?;
        serde_json::from_str(&text).map_err(|source| RecordError::Json { path: path.display().to_string(), source })
    }

    /// Writes to a fresh file in `dir`; existing records are never touched.
    pub fn persist(&self, dir: &Path) -> Result<PathBuf, RecordError> {
        let io = |source| RecordError::Io { path: dir.display().to_string(), source };
        std::fs::create_dir_all(dir).map_err(io)?;
        for n in 1.. {
            let path = dir.join(format!("{}-{}-{:03}.json", self.case, self.formulation, n));
            match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    use std::io::Write;
                    f.write_all(self.to_json().as_bytes()).map_err(io)?;
                    return Ok(path);
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(io(e)),
            }
        }
        unreachable!("record numbering exhausted")
    }
}
