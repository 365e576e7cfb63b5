//! Three-bus experiments and the radial feeders, end to end.

use approx::assert_abs_diff_eq;
use gridprice_core::ac::{solve_ac_local, AcSettings, AcSolution, Start, DEFAULT_CERT_TOL};
use gridprice_core::network::NetworkCase;
use gridprice_core::pricing::{
    ac_merchandising_surplus, gap_decomposition, merchandising_surplus, revenue_adequacy_check, RevenueAdequacy,
    VOLTAGE_SLACK,
};
use gridprice_core::reference;
use gridprice_core::sdp::{solve_sdp, SdpSettings, SdpSolution};
use gridprice_core::socp::{compare_sdp_socp, exactness_check, solve_socp};

struct Row {
    p: [f64; 3],
    q: [f64; 3],
    lmp_p: [f64; 3],
    v_sq: [f64; 3],
    ms: f64,
}

fn close(got: &[f64], want: &[f64], tol: f64) {
    for (g, w) in got.iter().zip(want) {
        assert_abs_diff_eq!(*g, *w, epsilon = tol);
    }
}

fn solve(case: &NetworkCase) -> (SdpSolution, AcSolution) {
    let sdp = solve_sdp(case, &SdpSettings::default()).unwrap();
    let ac = AcSolution::from_sdp(case, &sdp, DEFAULT_CERT_TOL).unwrap().unwrap();
    (sdp, ac)
}

fn check_row(case: NetworkCase, row: Row) {
    let (sdp, ac) = solve(&case);
    assert_eq!(sdp.rank, 1);
    assert!(ac.certified);
    close(&sdp.p_gen, &row.p, 0.02);
    close(&sdp.q_gen, &row.q, 0.02);
    close(&sdp.duals.lmp_p, &row.lmp_p, 0.02);
    close(&ac.duals.lmp_p, &row.lmp_p, 0.02);
    let v_sq: Vec<f64> = ac.v.iter().map(|v| v.norm_sqr()).collect();
    close(&v_sq, &row.v_sq, 0.02);
    let ms = merchandising_surplus(&case, &sdp.p_gen, &sdp.q_gen, &sdp.duals).unwrap();
    assert_abs_diff_eq!(ms.ms, row.ms, epsilon = 0.05);
    assert_abs_diff_eq!(ac_merchandising_surplus(&case, &ac).unwrap().ms, row.ms, epsilon = 0.05);
    let d = gap_decomposition(&case, &ac, &sdp, 1e-7).unwrap();
    assert!(d.gap.abs() <= 1e-5 && d.loc.abs() <= 1e-5 && d.prs.abs() <= 1e-5, "{d:?}");
}

#[test]
fn exp1_matches_table() {
    check_row(
        reference::exp1(),
        Row {
            p: [0.39, 0.31, 1.99],
            q: [0.0, 0.0, 0.50],
            lmp_p: [10.77, 10.63, 13.99],
            v_sq: [0.98, 0.99, 0.99],
            ms: -2.44,
        },
    );
}

#[test]
fn exp2_matches_table() {
    check_row(
        reference::exp2(),
        Row { p: [0.92, 0.23, 1.63], q: [0.10, 0.0, 0.0], lmp_p: [11.85, 10.47, 13.27], v_sq: [1.01; 3], ms: 0.83 },
    );
}

#[test]
fn exp3_matches_table() {
    check_row(
        reference::exp3(),
        Row {
            p: [1.19, 0.40, 1.20],
            q: [0.50, 0.0, 0.0],
            lmp_p: [12.38, 10.80, 12.41],
            v_sq: [1.01, 1.01, 1.00],
            ms: 0.62,
        },
    );
}

#[test]
fn exp4_relaxation_has_rank_two() {
    let case = reference::exp4();
    let sdp = solve_sdp(&case, &SdpSettings::default()).unwrap();
    assert_abs_diff_eq!(sdp.objective, 6.86, epsilon = 0.05);
    assert_eq!(sdp.rank, 2);
    close(&sdp.duals.lmp_p, &[10.06, 1.58, 11.52], 0.05);
    close(&sdp.p_gen, &[0.31, 2.90, 0.0], 0.05);
    assert!(sdp.recovered_v.is_none());
}

#[test]
fn exp4_local_point_satisfies_properties() {
    let case = reference::exp4();
    let sdp = solve_sdp(&case, &SdpSettings::default()).unwrap();
    let ac = solve_ac_local(&case, &Start::Flat, &AcSettings::default()).unwrap();
    assert!(ac.certified && ac.kkt_residual <= 1e-6);
    assert!(ac.objective >= sdp.objective - 1e-6);
    let d = gap_decomposition(&case, &ac, &sdp, 1e-7).unwrap();
    assert!(d.gap > 0.1 && d.consistent, "{d:?}");
    assert!(d.loc > 0.0 && d.prs >= -1e-6);
    if let RevenueAdequacy::Guaranteed { ms } = revenue_adequacy_check(&case, &ac, VOLTAGE_SLACK).unwrap() {
        assert!(ms >= -1e-8);
    }
}

#[test]
fn radial15_relaxations_agree() {
    let case = reference::radial15();
    let socp = solve_socp(&case, 1e-8).unwrap();
    let exact = exactness_check(&socp, 1e-6);
    assert!(exact.exact, "{exact:?}");
    let ms = merchandising_surplus(&case, &socp.p_gen, &socp.q_gen, &socp.duals).unwrap();
    assert!(ms.ms >= 0.0, "{ms:?}");
    let cmp = compare_sdp_socp(&case, 1e-4).unwrap();
    assert!(cmp.objective_gap <= 1e-6 && cmp.passed, "{cmp:?}");
}
