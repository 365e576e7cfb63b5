//! Runs the requested solves on one case and settles each result.

use std::collections::BTreeMap;

use gridprice_core::ac::{solve_ac_local, AcSettings, AcSolution, Start, DEFAULT_CERT_TOL};
use gridprice_core::network::NetworkCase;
use gridprice_core::pricing::{gap_decomposition, revenue_adequacy_check, RevenueAdequacy, SettlementReport, VOLTAGE_SLACK};
use gridprice_core::hermitian::DEFAULT_RANK_TOL;
use gridprice_core::sdp::{dual_certificate, solve_sdp, SdpSettings, SdpSolution};
use gridprice_core::socp::{compare_solutions, exactness_check, solve_socp, SocpSolution};

use crate::record::{
    now, phasor_pairs, recompute_residuals, BranchFlows, DualsRecord, Formulation, GapSummary, RadialSummary,
    RunRecord, SettingsRecord, SettlementSummary, SolutionSummary,
};

/// Tightest cone residual accepted as an exact branch-flow solution.
pub const EXACTNESS_TOL: f64 = 1e-6;
/// Largest SDP/SOCP price difference accepted on a radial case.
pub const RADIAL_PRICE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StartChoice {
    Flat,
    SdpWarm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineSettings {
    /// Conic solver tolerance. Certificates are checked at ten times this.
    pub tol: f64,
    pub rank_tol: f64,
    /// `None` warm-starts AC from the SDP when both are requested.
    pub start: Option<StartChoice>,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings { tol: 1e-8, rank_tol: DEFAULT_RANK_TOL, start: None }
    }
}

impl PipelineSettings {
    pub fn sdp(&self) -> SdpSettings {
        SdpSettings { tol: self.tol, rank_tol: self.rank_tol, ..SdpSettings::default() }
    }

    pub fn ac(&self) -> AcSettings {
        AcSettings { tol: DEFAULT_CERT_TOL.max(self.tol), ..AcSettings::default() }
    }

    pub fn cert_tol(&self) -> f64 {
        10.0 * self.tol
    }

    fn record(&self, formulation: Formulation, start: Option<StartChoice>) -> SettingsRecord {
        match formulation {
            Formulation::Ac => SettingsRecord {
                tol: self.ac().tol,
                rank_tol: None,
                start: start.map(|s| match s {
                    StartChoice::Flat => "flat".to_string(),
                    StartChoice::SdpWarm => "sdp-warm".to_string(),
                }),
            },
            Formulation::Sdp => SettingsRecord { tol: self.tol, rank_tol: Some(self.rank_tol), start: None },
            Formulation::Socp => SettingsRecord { tol: self.tol, rank_tol: None, start: None },
        }
    }
}

fn with_residuals(case: &NetworkCase, formulation: Formulation, mut s: SolutionSummary) -> SolutionSummary {
    // Stored residuals are exactly what a reload recomputes.
    s.residuals = recompute_residuals(case, formulation, &s).unwrap_or_default();
    s
}

fn settlement(case: &NetworkCase, s: &SolutionSummary) -> Option<SettlementSummary> {
    let duals = (&s.duals).into();
    SettlementReport::new(case, &s.p_gen, &s.q_gen, &duals).ok().map(|r| SettlementSummary::from(&r))
}

pub fn sdp_record(name: &str, case: &NetworkCase, settings: &PipelineSettings) -> (RunRecord, Option<SdpSolution>) {
    let rs = settings.record(Formulation::Sdp, None);
    let sol = match solve_sdp(case, &settings.sdp()) {
        Ok(sol) => sol,
        Err(e) => return (RunRecord::failed(name, Formulation::Sdp, rs, e.to_string()), None),
    };
    let cert = dual_certificate(&sol, case, settings.cert_tol());
    let summary = with_residuals(
        case,
        Formulation::Sdp,
        SolutionSummary {
            objective: sol.objective,
            p_gen: sol.p_gen.clone(),
            q_gen: sol.q_gen.clone(),
            duals: DualsRecord::from(&sol.duals),
            v_sq: (0..case.n_buses()).map(|k| sol.w.get(k, k).re).collect(),
            v: sol.recovered_v.as_deref().map(phasor_pairs),
            rank: Some(sol.rank),
            eigenvalues: Some(sol.eigenvalues.clone()),
            branches: None,
            exact: sol.rank == 1,
            iterations: sol.iterations,
            residuals: BTreeMap::new(),
        },
    );
    let record = RunRecord {
        case: name.to_string(),
        formulation: Formulation::Sdp,
        settings: rs,
        certified: cert.is_ok(),
        error: cert.err().map(|e| e.to_string()),
        settlement: settlement(case, &summary),
        solution: Some(summary),
        gap: None,
        radial: None,
        timestamp: now(),
    };
    (record, Some(sol))
}

pub fn socp_record(name: &str, case: &NetworkCase, settings: &PipelineSettings) -> (RunRecord, Option<SocpSolution>) {
    let rs = settings.record(Formulation::Socp, None);
    let sol = match solve_socp(case, settings.tol) {
        Ok(sol) => sol,
        Err(e) => return (RunRecord::failed(name, Formulation::Socp, rs, e.to_string()), None),
    };
    let exact = exactness_check(&sol, EXACTNESS_TOL.max(settings.tol)).exact;
    let summary = with_residuals(
        case,
        Formulation::Socp,
        SolutionSummary {
            objective: sol.objective,
            p_gen: sol.p_gen.clone(),
            q_gen: sol.q_gen.clone(),
            duals: DualsRecord::from(&sol.duals),
            v_sq: sol.w.clone(),
            v: None,
            rank: None,
            eigenvalues: None,
            branches: Some(BranchFlows {
                line: sol.edges.iter().map(|e| e.line).collect(),
                from: sol.edges.iter().map(|e| e.from).collect(),
                to: sol.edges.iter().map(|e| e.to).collect(),
                p: sol.p_flow.clone(),
                q: sol.q_flow.clone(),
                current_sq: sol.current_sq.clone(),
            }),
            exact,
            iterations: sol.iterations,
            residuals: BTreeMap::new(),
        },
    );
    let record = RunRecord {
        case: name.to_string(),
        formulation: Formulation::Socp,
        settings: rs,
        certified: exact,
        error: (!exact).then(|| "branch-flow relaxation is not exact".to_string()),
        settlement: settlement(case, &summary),
        solution: Some(summary),
        gap: None,
        radial: None,
        timestamp: now(),
    };
    (record, Some(sol))
}

pub fn ac_record(
    name: &str,
    case: &NetworkCase,
    start: &Start,
    choice: Option<StartChoice>,
    settings: &PipelineSettings,
) -> (RunRecord, Option<AcSolution>) {
    let rs = settings.record(Formulation::Ac, choice);
    let sol = match solve_ac_local(case, start, &settings.ac()) {
        Ok(sol) => sol,
        Err(e) => return (RunRecord::failed(name, Formulation::Ac, rs, e.to_string()), None),
    };
    let summary = with_residuals(
        case,
        Formulation::Ac,
        SolutionSummary {
            objective: sol.objective,
            p_gen: sol.p_gen.clone(),
            q_gen: sol.q_gen.clone(),
            duals: DualsRecord::from(&sol.duals),
            v_sq: sol.voltage_sq(),
            v: Some(phasor_pairs(&sol.v)),
            rank: None,
            eigenvalues: None,
            branches: None,
            exact: sol.certified,
            iterations: sol.iterations,
            residuals: BTreeMap::new(),
        },
    );
    let mut settle = sol.certified.then(|| settlement(case, &summary)).flatten();
    if let Some(s) = settle.as_mut() {
        s.revenue_adequacy = Some(match revenue_adequacy_check(case, &sol, VOLTAGE_SLACK) {
            Ok(RevenueAdequacy::Guaranteed { .. }) => "guaranteed".to_string(),
            Ok(RevenueAdequacy::NotGuaranteed { .. }) => "not-guaranteed".to_string(),
            Err(e) => format!("violated: {e}"),
        });
    }
    let record = RunRecord {
        case: name.to_string(),
        formulation: Formulation::Ac,
        settings: rs,
        certified: sol.certified,
        error: (!sol.certified).then(|| format!("KKT residual {:.3e} above tolerance", sol.kkt_residual)),
        settlement: settle,
        solution: Some(summary),
        gap: None,
        radial: None,
        timestamp: now(),
    };
    (record, Some(sol))
}

/// Records of one pipeline run, in solve order.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub case: String,
    pub records: Vec<RunRecord>,
}

impl Pipeline {
    pub fn record(&self, f: Formulation) -> Option<&RunRecord> {
        self.records.iter().find(|r| r.formulation == f)
    }

    /// True iff every solve succeeded and passed its certificate.
    pub fn all_certified(&self) -> bool {
        self.records.iter().all(|r| r.certified)
    }
}

/// Solves SDP first so that it can warm-start AC, then SOCP, then AC.
pub fn run_pipeline(name: &str, case: &NetworkCase, formulations: &[Formulation], settings: &PipelineSettings) -> Pipeline {
    let wants = |f| formulations.contains(&f);
    let mut records = Vec::new();
    let mut sdp = None;
    if wants(Formulation::Sdp) {
        let (r, s) = sdp_record(name, case, settings);
        records.push(r);
        sdp = s;
    }
    if wants(Formulation::Socp) {
        let (mut r, socp) = socp_record(name, case, settings);
        if let (Some(socp), Some(sdp)) = (&socp, &sdp) {
            let cmp = compare_solutions(sdp, socp, RADIAL_PRICE_TOL);
            r.radial = Some(RadialSummary::from(&cmp));
        }
        records.push(r);
    }
    if wants(Formulation::Ac) {
        let choice = settings.start.unwrap_or(if sdp.is_some() { StartChoice::SdpWarm } else { StartChoice::Flat });
        let start = match choice {
            StartChoice::Flat => Ok(Start::Flat),
            StartChoice::SdpWarm => match &sdp {
                Some(s) => Start::from_sdp(case, s),
                None => solve_sdp(case, &settings.sdp()).and_then(|s| Start::from_sdp(case, &s)),
            },
        };
        let (mut r, ac) = match start {
            Ok(start) => ac_record(name, case, &start, Some(choice), settings),
            Err(e) => (RunRecord::failed(name, Formulation::Ac, settings.record(Formulation::Ac, Some(choice)), e.to_string()), None),
        };
        if let (Some(ac), Some(sdp)) = (&ac, &sdp) {
            if ac.certified {
                match gap_decomposition(case, ac, sdp, settings.cert_tol()) {
                    Ok(d) => r.gap = Some(GapSummary::new(&d, ac.objective, sdp.objective)),
                    Err(e) => r.error = Some(format!("gap decomposition: {e}")),
                }
            }
        }
        records.push(r);
    }
    Pipeline { case: name.to_string(), records }
}
