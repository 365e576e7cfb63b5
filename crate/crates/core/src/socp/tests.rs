use alloc::vec;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;
use crate::ac::audit_point;
use crate::network::{Bus, GeneratorCost, Line};
use crate::reference;

const TOL: f64 = 1e-8;

/// Root generator `p² + 10p` feeding a leaf with demand `d` and nothing else.
fn leaf_without_generation(d: f64) -> NetworkCase {
    let root = Bus {
        v_min_sq: 0.9025,
        v_max_sq: 1.1025,
        p_max: 3.0,
        q_min: -2.0,
        q_max: 2.0,
        cost: GeneratorCost::real_power(1.0, 10.0),
        ..Bus::default()
    };
    let leaf = Bus { p_demand: d, v_min_sq: 0.9025, v_max_sq: 1.1025, ..Bus::default() };
    NetworkCase { buses: vec![root, leaf], lines: vec![Line { from: 0, to: 1, r: 0.01, x: 0.01, flow_limit: 2.0 }] }
}

/// Cheapest AC operating point of [`leaf_without_generation`] by search
/// over the leaf voltage magnitude. With the leaf phasor real, the line
/// current is `d / √w` and everything else follows.
fn brute_force_cost(d: f64) -> f64 {
    let (r, x) = (0.01, 0.01);
    let eval = |w: f64| -> Option<f64> {
        let vl = libm::sqrt(w);
        let i = d / vl;
        let v0 = Complex64::new(vl + r * i, x * i);
        let p0 = (v0 * i).re;
        let q0 = (v0 * i).im;
        let ok = (0.9025..=1.1025).contains(&v0.norm_sqr()) && (0.0..=3.0).contains(&p0) && q0.abs() <= 2.0;
        ok.then(|| p0 * p0 + 10.0 * p0)
    };
    let (lo, hi) = (0.9025, 1.1025);
    let steps = 20_000;
    let mut best = (f64::INFINITY, lo);
    for s in 0..=steps {
        let w = lo + (hi - lo) * s as f64 / steps as f64;
        if let Some(c) = eval(w) {
            if c < best.0 {
                best = (c, w);
            }
        }
    }
    // Refine around the grid optimum, which sits on the root voltage limit.
    let h = (hi - lo) / steps as f64;
    let (mut a, mut b) = ((best.1 - h).max(lo), (best.1 + h).min(hi));
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        if eval(mid).is_some() {
            a = mid;
        } else {
            b = mid;
        }
    }
    eval(a).unwrap_or(best.0).min(best.0)
}

#[test]
fn feeder_layout() {
    let built = build_socp(&reference::two_bus_feeder(), Orientation::FromRoot).unwrap();
    assert_eq!(built.n_cones(), 1);
    assert_eq!(built.n_balance_rows(), 4);
    assert_eq!(built.edges(), &[Edge { line: 0, from: 0, to: 1 }]);
}

#[test]
fn meshed_case_is_refused() {
    assert!(matches!(build_socp(&reference::meshed3(), Orientation::FromRoot), Err(Error::NonRadial)));
    assert!(matches!(compare_sdp_socp(&reference::meshed3(), 1e-6), Err(Error::NonRadial)));
}

#[test]
fn shunt_is_refused() {
    let mut case = reference::two_bus_feeder();
    case.buses[1].shunt = Complex64::new(0.0, 0.01);
    assert!(matches!(build_socp(&case, Orientation::FromRoot), Err(Error::NonzeroShunt { bus: 1 })));
}

#[test]
fn toward_root_orientation_reverses_edges() {
    let edges = orient(&reference::radial15(), Orientation::TowardRoot).unwrap();
    assert!(edges.iter().all(|e| e.from != 0));
    let e1 = edges.iter().find(|e| e.line == 0).unwrap();
    assert_eq!((e1.from, e1.to), (1, 0));
}

#[test]
fn single_bus_price_is_marginal_cost() {
    let sol = solve_socp(&reference::single_bus(), TOL).unwrap();
    assert_abs_diff_eq!(sol.duals.lmp_p[0], 12.0, epsilon = 1e-6);
    let check = exactness_check(&sol, 1e-6);
    assert!(check.exact && check.residuals.is_empty());
}

#[test]
fn orientation_does_not_change_objective() {
    let case = reference::two_bus_feeder();
    let fwd = solve_socp_oriented(&case, Orientation::FromRoot, TOL).unwrap();
    let rev = solve_socp_oriented(&case, Orientation::TowardRoot, TOL).unwrap();
    assert_abs_diff_eq!(fwd.objective, rev.objective, epsilon = 1e-8 * (1.0 + fwd.objective.abs()));
    assert!(fwd.p_flow[0] > 0.0 && rev.p_flow[0] < 0.0);
    for k in 0..2 {
        assert_abs_diff_eq!(fwd.duals.lmp_p[k], rev.duals.lmp_p[k], epsilon = 1e-4);
    }
}

#[test]
fn lossless_line_equalises_voltage() {
    let mut case = reference::two_bus_feeder();
    case.lines[0].r = 1e-7;
    case.lines[0].x = 1e-7;
    let sol = solve_socp(&case, TOL).unwrap();
    assert_abs_diff_eq!(sol.w[0], sol.w[1], epsilon = 1e-5);
}

#[test]
fn inflated_current_breaks_exactness() {
    let mut sol = solve_socp(&reference::two_bus_feeder(), TOL).unwrap();
    assert!(exactness_check(&sol, 1e-6).exact);
    sol.current_sq[0] += 0.1;
    let check = exactness_check(&sol, 1e-6);
    assert!(!check.exact);
    assert_abs_diff_eq!(check.max_residual, 0.1 * sol.w[0], epsilon = 1e-6);
}

#[test]
fn reconstructed_point_is_an_ac_kkt_point() {
    let case = reference::two_bus_feeder();
    for orientation in [Orientation::FromRoot, Orientation::TowardRoot] {
        let sol = solve_socp_oriented(&case, orientation, TOL).unwrap();
        let v = reconstruct_voltages(&case, &sol).unwrap();
        let report = audit_point(&case, &v, &sol.p_gen, &sol.q_gen, &sol.duals).unwrap();
        assert!(report.feasibility <= 1e-6, "{orientation:?} {report:?}");
        assert!(report.stationarity_pq <= 1e-6, "{report:?}");
    }
}

#[test]
fn leaf_price_exceeds_root_price() {
    let d = 1.0;
    let case = leaf_without_generation(d);
    let sol = solve_socp(&case, TOL).unwrap();
    assert!(exactness_check(&sol, 1e-6).exact);
    let exact = brute_force_cost(d);
    assert_abs_diff_eq!(sol.objective, exact, epsilon = 1e-5);
    let h = 1e-3;
    let slope = (brute_force_cost(d + h) - brute_force_cost(d - h)) / (2.0 * h);
    assert_abs_diff_eq!(sol.duals.lmp_p[1], slope, epsilon = 1e-3);
    assert_abs_diff_eq!(sol.duals.lmp_p[0], 2.0 * sol.p_gen[0] + 10.0, epsilon = 1e-6);
    assert!(sol.duals.lmp_p[1] > sol.duals.lmp_p[0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn feeder_relaxations_agree(d in 0.2..1.6f64, qd in -0.2..0.4f64) {
        let mut case = reference::two_bus_feeder();
        case.buses[1].p_demand = d;
        case.buses[1].q_demand = qd;
        let socp = solve_socp(&case, TOL).unwrap();
        prop_assert!(exactness_check(&socp, 1e-6).exact);
        let cmp = compare_sdp_socp(&case, 1e-4).unwrap();
        prop_assert!(cmp.objective_gap <= 1e-6, "{cmp:?}");
        prop_assert!(cmp.passed, "{cmp:?}");
    }
}
