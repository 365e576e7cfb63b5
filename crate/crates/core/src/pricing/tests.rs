use alloc::vec::Vec;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;
use crate::ac::{solve_ac_local, AcSettings, Start};
use crate::reference;
use crate::sdp::{solve_sdp, SdpSettings};

#[test]
fn settle_multiplies_prices_by_quantities() {
    let case = reference::exp4();
    let pay = settle(&case, &[1.0, 2.0, 0.0], &[0.5, 0.0, 1.0], &[2.0, 3.0, 4.0], &[1.0, 1.0, -1.0]).unwrap();
    for (got, want) in pay.pay_gen.iter().zip([2.5, 6.0, -1.0]) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
    }
    for (got, want) in pay.pay_dem.iter().zip([3.2, 4.3, 2.8]) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
    }
}

#[test]
fn settle_checks_lengths() {
    let case = reference::single_bus();
    assert!(matches!(settle(&case, &[1.0], &[0.0], &[1.0, 2.0], &[0.0]), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn flat_reactive_cost_keeps_incumbent() {
    let bus = &reference::exp4().buses[1];
    let best = profit_max(bus, [1.58, 0.0], Some([2.2, 1.2]));
    assert_abs_diff_eq!(best.dispatch[0], 2.9, epsilon = 1e-12);
    assert_eq!(best.dispatch[1], 1.2);
    assert_abs_diff_eq!(best.profit, 1.58 * 2.9 - 0.1 * 2.9 * 2.9 - 2.9, epsilon = 1e-12);
}

#[test]
fn flat_coordinate_without_incumbent_sits_at_lower_bound() {
    let bus = &reference::exp4().buses[1];
    let best = profit_max(bus, [1.58, 0.0], None);
    assert_abs_diff_eq!(best.dispatch[0], 2.9, epsilon = 1e-12);
    assert_eq!(best.dispatch[1], 0.0);
}

#[test]
fn incumbent_is_ignored_when_worse() {
    let bus = &reference::single_bus().buses[0];
    let best = profit_max(bus, [12.0, 0.0], Some([0.5, 0.0]));
    assert_abs_diff_eq!(best.dispatch[0], 1.0, epsilon = 1e-12);
}

#[test]
fn underpaid_generator_gets_side_payment() {
    let case = reference::exp4();
    let audit = equilibrium_audit(&case, &[0.97, 2.2, 0.0], &[1.09, 1.2, 1.26], &[10.2, 1.58, 18.0], &[0.0; 3]).unwrap();
    let gen2 = audit[1];
    assert_abs_diff_eq!(gen2.profit_so, 1.58 * 2.2 - 0.1 * 2.2 * 2.2 - 2.2, epsilon = 1e-12);
    assert_abs_diff_eq!(gen2.side_payment, gen2.profit_opt - gen2.profit_so, epsilon = 1e-15);
    assert!(!gen2.rational);
    assert!(audit[2].rational && audit[2].side_payment == 0.0);
}

#[test]
fn single_bus_settles_at_zero_surplus() {
    let case = reference::single_bus();
    let ac = solve_ac_local(&case, &Start::Flat, &AcSettings::default()).unwrap();
    let ms = ac_merchandising_surplus(&case, &ac).unwrap();
    assert!(ms.ms.abs() < 1e-6 && ms.ms_formula.abs() < 1e-6);
    let verdict = revenue_adequacy_check(&case, &ac, VOLTAGE_SLACK).unwrap();
    assert!(matches!(verdict, RevenueAdequacy::Guaranteed { .. }));
}

#[test]
fn surplus_matches_closed_form_on_meshed_case() {
    let case = reference::meshed3();
    let ac = solve_ac_local(&case, &Start::Flat, &AcSettings::default()).unwrap();
    let ms = ac_merchandising_surplus(&case, &ac).unwrap();
    assert!((ms.ms - ms.ms_formula).abs() <= MS_TOL);
}

#[test]
fn uncertified_point_is_refused() {
    let case = reference::single_bus();
    let mut ac = solve_ac_local(&case, &Start::Flat, &AcSettings::default()).unwrap();
    ac.certified = false;
    assert!(matches!(ac_merchandising_surplus(&case, &ac), Err(Error::Uncertified { .. })));
    let sdp = solve_sdp(&case, &SdpSettings::default()).unwrap();
    assert!(matches!(gap_decomposition(&case, &ac, &sdp, 1e-7), Err(Error::Uncertified { .. })));
}

#[test]
fn shortfall_rejects_dual_infeasible_input() {
    let case = reference::exp1();
    let sdp = solve_sdp(&case, &SdpSettings::default()).unwrap();
    let v = sdp.recovered_v.clone().unwrap();
    let mut duals = sdp.duals.clone();
    duals.mu_v_lo[0] = -1.0;
    assert!(matches!(product_revenue_shortfall(&case, &v, &duals, &sdp.u, 1e-7), Err(Error::DualInfeasible(_))));
    let indefinite = HermitianMatrix::diagonal(&[1.0, -1.0, 1.0]);
    assert!(matches!(
        product_revenue_shortfall(&case, &v, &sdp.duals, &indefinite, 1e-7),
        Err(Error::DualInfeasible(_))
    ));
}

#[test]
fn exact_case_has_no_gap() {
    let case = reference::exp1();
    let sdp = solve_sdp(&case, &SdpSettings::default()).unwrap();
    let ac = solve_ac_local(&case, &Start::Flat, &AcSettings::default()).unwrap();
    let d = gap_decomposition(&case, &ac, &sdp, 1e-7).unwrap();
    assert!(d.consistent, "{d:?}");
    assert!(d.gap.abs() < 1e-5 && d.loc < 1e-5 && d.prs.abs() < 1e-5, "{d:?}");
}

#[test]
fn report_collects_settlement() {
    let case = reference::exp2();
    let sdp = solve_sdp(&case, &SdpSettings::default()).unwrap();
    let r = SettlementReport::new(&case, &sdp.p_gen, &sdp.q_gen, &sdp.duals).unwrap();
    assert_abs_diff_eq!(r.ms, r.pay_dem.iter().sum::<f64>() - r.pay_gen.iter().sum::<f64>(), epsilon = 1e-12);
    assert_abs_diff_eq!(r.ms, r.ms_formula, epsilon = 1e-5);
    assert!(r.loc.abs() < 1e-6 && r.side_payments.iter().all(|&s| s < 1e-6));
    assert_eq!(r.gap, None);
}

fn exp2_dispatch_and_duals() -> (NetworkCase, Vec<f64>, Vec<f64>, Multipliers) {
    let case = reference::exp2();
    let sol = solve_sdp(&case, &SdpSettings::default()).unwrap();
    (case, sol.p_gen, sol.q_gen, sol.duals)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lost_opportunity_is_nonnegative(
        fp in prop::collection::vec(0.0..=1.0f64, 3),
        fq in prop::collection::vec(0.0..=1.0f64, 3),
        gp in prop::collection::vec(-5.0..25.0f64, 3),
        gq in prop::collection::vec(-5.0..5.0f64, 3),
    ) {
        let case = reference::exp4();
        let mix = |f: &[f64], lo: fn(&Bus) -> f64, hi: fn(&Bus) -> f64| -> Vec<f64> {
            case.buses.iter().zip(f).map(|(b, t)| lo(b) + t * (hi(b) - lo(b))).collect()
        };
        let p = mix(&fp, |b| b.p_min, |b| b.p_max);
        let q = mix(&fq, |b| b.q_min, |b| b.q_max);
        let lost = lost_opportunity_cost(&case, &p, &q, &gp, &gq).unwrap();
        prop_assert!(lost.loc >= -1e-12);
        for k in 0..3 {
            prop_assert!(lost.profit_opt[k] >= lost.profit_so[k] - 1e-12);
        }
    }

    #[test]
    fn surplus_scales_with_prices(t in -3.0..3.0f64) {
        let (case, p, q, duals) = exp2_dispatch_and_duals();
        let base = merchandising_surplus(&case, &p, &q, &duals).unwrap().ms;
        let mut scaled = duals.clone();
        scaled.lmp_p.iter_mut().chain(scaled.lmp_q.iter_mut()).for_each(|x| *x *= t);
        let ms = merchandising_surplus(&case, &p, &q, &scaled).unwrap().ms;
        prop_assert!((ms - t * base).abs() <= 1e-9 * (1.0 + base.abs()));
    }

    #[test]
    fn shortfall_is_nonnegative_at_feasible_points(t in 0.0..2.0f64, s in 0.0..5.0f64) {
        let case = reference::exp2();
        let sdp = solve_sdp(&case, &SdpSettings::default()).unwrap();
        let v = sdp.recovered_v.clone().unwrap();
        let mut duals = sdp.duals.clone();
        for x in duals.mu_flow.iter_mut().chain(duals.mu_v_hi.iter_mut()).chain(duals.mu_v_lo.iter_mut()) {
            *x *= t;
        }
        let u = HermitianMatrix::identity(3).scaled(s);
        let prs = product_revenue_shortfall(&case, &v, &duals, &u, 1e-7).unwrap();
        prop_assert!(prs >= -1e-6);
    }
}
