//! Market settlement and price audits.
//!
//! Every function takes a dispatch and a price vector and is agnostic to
//! which formulation produced them. Merchandising surplus is signed as
//! demand payments minus generator payments: positive means the operator
//! collects more than it pays out.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::ac::AcSolution;
use crate::duals::Multipliers;
use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::network::{build_branch_matrices, Bus, NetworkCase};
use crate::sdp::{dual_certificate, SdpSolution};

/// Profit gap below which a dispatch counts as individually rational.
pub const RATIONALITY_TOL: f64 = 1e-8;
/// Tolerance for `|MS − formula|` at a certified point.
pub const MS_TOL: f64 = 1e-6;
/// Margin above the lower voltage limit for the adequacy guarantee.
pub const VOLTAGE_SLACK: f64 = 1e-6;
const TIE_TOL: f64 = 1e-12;

fn check_len(expected: usize, lens: &[usize]) -> Result<()> {
    match lens.iter().find(|&&l| l != expected) {
        Some(&found) => Err(Error::DimensionMismatch { expected, found }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Payments {
    pub pay_gen: Vec<f64>,
    pub pay_dem: Vec<f64>,
}

pub fn settle(case: &NetworkCase, p: &[f64], q: &[f64], price_p: &[f64], price_q: &[f64]) -> Result<Payments> {
    check_len(case.n_buses(), &[p.len(), q.len(), price_p.len(), price_q.len()])?;
    let pay_gen = (0..case.n_buses()).map(|k| price_p[k] * p[k] + price_q[k] * q[k]).collect();
    let pay_dem = case.buses.iter().enumerate().map(|(k, b)| price_p[k] * b.p_demand + price_q[k] * b.q_demand).collect();
    Ok(Payments { pay_gen, pay_dem })
}

/// `Σ μ f + Σ μ̄ᵛ v̄² − Σ μ̲ᵛ v̲²`, equal to the surplus at a KKT point.
pub fn ms_formula(case: &NetworkCase, duals: &Multipliers) -> f64 {
    let flows: f64 = duals.mu_flow.iter().enumerate().map(|(i, mu)| mu * case.lines[i / 2].flow_limit).sum();
    let volts: f64 = case
        .buses
        .iter()
        .enumerate()
        .map(|(k, b)| duals.mu_v_hi[k] * b.v_max_sq - duals.mu_v_lo[k] * b.v_min_sq)
        .sum();
    flows + volts
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MerchandisingSurplus {
    pub ms: f64,
    pub ms_formula: f64,
}

/// Surplus of a dispatch priced at its own multipliers.
pub fn merchandising_surplus(case: &NetworkCase, p: &[f64], q: &[f64], duals: &Multipliers) -> Result<MerchandisingSurplus> {
    let pay = settle(case, p, q, &duals.lmp_p, &duals.lmp_q)?;
    let ms = pay.pay_dem.iter().sum::<f64>() - pay.pay_gen.iter().sum::<f64>();
    Ok(MerchandisingSurplus { ms, ms_formula: ms_formula(case, duals) })
}

/// Surplus at a certified AC point, with the closed form checked.
pub fn ac_merchandising_surplus(case: &NetworkCase, sol: &AcSolution) -> Result<MerchandisingSurplus> {
    if !sol.certified {
        return Err(Error::Uncertified { residual: sol.kkt_residual });
    }
    let out = merchandising_surplus(case, &sol.p_gen, &sol.q_gen, &sol.duals)?;
    if (out.ms - out.ms_formula).abs() > MS_TOL {
        return Err(Error::CertificateMismatch(format!("MS {:.9} vs closed form {:.9}", out.ms, out.ms_formula)));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RevenueAdequacy {
    /// No lower voltage limit binds, so the surplus is nonnegative.
    Guaranteed { ms: f64 },
    NotGuaranteed { ms: f64 },
}

impl RevenueAdequacy {
    pub fn ms(&self) -> f64 {
        match *self {
            RevenueAdequacy::Guaranteed { ms } | RevenueAdequacy::NotGuaranteed { ms } => ms,
        }
    }
}

pub fn revenue_adequacy_check(case: &NetworkCase, sol: &AcSolution, slack: f64) -> Result<RevenueAdequacy> {
    let ms = ac_merchandising_surplus(case, sol)?.ms;
    let clear = sol.v.iter().zip(&case.buses).all(|(v, b)| v.norm() > libm::sqrt(b.v_min_sq) + slack);
    if !clear {
        return Ok(RevenueAdequacy::NotGuaranteed { ms });
    }
    if ms < -1e-8 {
        return Err(Error::CertificateMismatch(format!("surplus {ms:.3e} negative with no binding lower voltage limit")));
    }
    Ok(RevenueAdequacy::Guaranteed { ms })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfitMax {
    pub profit: f64,
    pub dispatch: [f64; 2],
}

/// Most profitable dispatch in the bus's box at the given prices.
///
/// Where the profit is flat in a coordinate, that coordinate is taken from
/// `incumbent` if doing so loses nothing.
pub fn profit_max(bus: &Bus, price: [f64; 2], incumbent: Option<[f64; 2]>) -> ProfitMax {
    let (profit, mut dispatch) = bus.best_response(price);
    if let Some(so) = incumbent {
        let value = |x: [f64; 2]| price[0] * x[0] + price[1] * x[1] - bus.cost.value(x[0], x[1]);
        let tol = TIE_TOL * (1.0 + profit.abs());
        for i in 0..2 {
            let mut trial = dispatch;
            trial[i] = so[i];
            let inside = so[i] >= [bus.p_min, bus.q_min][i] && so[i] <= [bus.p_max, bus.q_max][i];
            if inside && value(trial) >= profit - tol {
                dispatch = trial;
            }
        }
    }
    ProfitMax { profit, dispatch }
}

fn profit_at(bus: &Bus, price: [f64; 2], x: [f64; 2]) -> f64 {
    price[0] * x[0] + price[1] * x[1] - bus.cost.value(x[0], x[1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct LostOpportunity {
    pub loc: f64,
    pub profit_so: Vec<f64>,
    pub profit_opt: Vec<f64>,
    pub best_dispatch: Vec<[f64; 2]>,
}

pub fn lost_opportunity_cost(
    case: &NetworkCase,
    p: &[f64],
    q: &[f64],
    price_p: &[f64],
    price_q: &[f64],
) -> Result<LostOpportunity> {
    check_len(case.n_buses(), &[p.len(), q.len(), price_p.len(), price_q.len()])?;
    let mut out = LostOpportunity { loc: 0.0, profit_so: Vec::new(), profit_opt: Vec::new(), best_dispatch: Vec::new() };
    for (k, bus) in case.buses.iter().enumerate() {
        let price = [price_p[k], price_q[k]];
        let so = profit_at(bus, price, [p[k], q[k]]);
        let best = profit_max(bus, price, Some([p[k], q[k]]));
        out.loc += best.profit - so;
        out.profit_so.push(so);
        out.profit_opt.push(best.profit);
        out.best_dispatch.push(best.dispatch);
    }
    Ok(out)
}

/// `VᴴUV + Σ μ(f − VᴴΦV) + Σ μ̄ᵛ(v̄² − |V|²) + Σ μ̲ᵛ(|V|² − v̲²)`.
///
/// Rejects negative multipliers and a `U` with an eigenvalue below
/// `−tol·max(1, ‖U‖_F)`.
pub fn product_revenue_shortfall(
    case: &NetworkCase,
    v: &[Complex64],
    duals: &Multipliers,
    u: &HermitianMatrix,
    tol: f64,
) -> Result<f64> {
    let n = case.n_buses();
    check_len(n, &[v.len(), u.dim(), duals.mu_v_hi.len(), duals.mu_v_lo.len()])?;
    check_len(2 * case.n_lines(), &[duals.mu_flow.len()])?;
    let worst = duals.min_inequality();
    if worst < 0.0 {
        return Err(Error::DualInfeasible(format!("negative multiplier {worst:.3e}")));
    }
    let min_eig = u.min_eigenvalue()?;
    if min_eig < -tol * u.frobenius_norm().max(1.0) {
        return Err(Error::DualInfeasible(format!("U has eigenvalue {min_eig:.3e}")));
    }
    let mut prs = u.quadratic_form(v)?;
    for (br, &mu) in build_branch_matrices(case).iter().zip(&duals.mu_flow) {
        prs += mu * (case.lines[br.line].flow_limit - br.phi.quadratic_form(v)?);
    }
    for (k, b) in case.buses.iter().enumerate() {
        let m = v[k].norm_sqr();
        prs += duals.mu_v_hi[k] * (b.v_max_sq - m) + duals.mu_v_lo[k] * (m - b.v_min_sq);
    }
    Ok(prs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapDecomposition {
    /// `J_AC − J_SDP`.
    pub gap: f64,
    pub loc: f64,
    pub prs: f64,
    /// `|gap − (loc + prs)|`.
    pub residual: f64,
    /// `residual ≤ 10·tol·(1 + |gap|)`.
    pub consistent: bool,
    pub lost_opportunity: LostOpportunity,
}

/// Splits the duality gap into lost opportunity cost at the relaxation's
/// prices and product revenue shortfall at its optimal duals.
pub fn gap_decomposition(case: &NetworkCase, ac: &AcSolution, sdp: &SdpSolution, tol: f64) -> Result<GapDecomposition> {
    if !ac.certified {
        return Err(Error::Uncertified { residual: ac.kkt_residual });
    }
    dual_certificate(sdp, case, tol)?;
    let gap = ac.objective - sdp.objective;
    let lost = lost_opportunity_cost(case, &ac.p_gen, &ac.q_gen, &sdp.duals.lmp_p, &sdp.duals.lmp_q)?;
    let prs = product_revenue_shortfall(case, &ac.v, &sdp.duals, &sdp.u, tol)?;
    let residual = (gap - (lost.loc + prs)).abs();
    Ok(GapDecomposition {
        gap,
        loc: lost.loc,
        prs,
        residual,
        consistent: residual <= 10.0 * tol * (1.0 + gap.abs()),
        lost_opportunity: lost,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusEquilibrium {
    pub profit_so: f64,
    pub profit_opt: f64,
    pub rational: bool,
    pub side_payment: f64,
}

pub fn equilibrium_audit(
    case: &NetworkCase,
    p: &[f64],
    q: &[f64],
    price_p: &[f64],
    price_q: &[f64],
) -> Result<Vec<BusEquilibrium>> {
    let lost = lost_opportunity_cost(case, p, q, price_p, price_q)?;
    Ok(lost
        .profit_so
        .iter()
        .zip(&lost.profit_opt)
        .map(|(&so, &opt)| {
            let diff = opt - so;
            BusEquilibrium { profit_so: so, profit_opt: opt, rational: diff <= RATIONALITY_TOL, side_payment: diff.max(0.0) }
        })
        .collect())
}

/// Settlement of one dispatch at one set of prices.
#[derive(Debug, Clone, PartialEq)]
pub struct SettlementReport {
    pub price_p: Vec<f64>,
    pub price_q: Vec<f64>,
    pub pay_gen: Vec<f64>,
    pub pay_dem: Vec<f64>,
    pub ms: f64,
    pub ms_formula: f64,
    pub loc: f64,
    pub profit_so: Vec<f64>,
    pub profit_opt: Vec<f64>,
    pub side_payments: Vec<f64>,
    /// Filled from a gap decomposition.
    pub prs: Option<f64>,
    pub gap: Option<f64>,
}

impl SettlementReport {
    pub fn new(case: &NetworkCase, p: &[f64], q: &[f64], duals: &Multipliers) -> Result<Self> {
        let pay = settle(case, p, q, &duals.lmp_p, &duals.lmp_q)?;
        let ms = merchandising_surplus(case, p, q, duals)?;
        let audit = equilibrium_audit(case, p, q, &duals.lmp_p, &duals.lmp_q)?;
        Ok(SettlementReport {
            price_p: duals.lmp_p.clone(),
            price_q: duals.lmp_q.clone(),
            pay_gen: pay.pay_gen,
            pay_dem: pay.pay_dem,
            ms: ms.ms,
            ms_formula: ms.ms_formula,
            loc: audit.iter().map(|b| b.profit_opt - b.profit_so).sum(),
            profit_so: audit.iter().map(|b| b.profit_so).collect(),
            profit_opt: audit.iter().map(|b| b.profit_opt).collect(),
            side_payments: audit.iter().map(|b| b.side_payment).collect(),
            prs: None,
            gap: None,
        })
    }

    pub fn with_gap(mut self, d: &GapDecomposition) -> Self {
        self.prs = Some(d.prs);
        self.gap = Some(d.gap);
        self
    }
}

#[cfg(test)]
mod tests;
