//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs without the test harness so that every line prints; exits nonzero
//! if any criterion fails.

use std::fmt::Write as _;
use std::process::ExitCode;
use std::time::Instant;

use gridprice::bundled;
use gridprice::pipeline::{run_pipeline, PipelineSettings, StartChoice};
use gridprice::record::{Formulation, RunRecord, SolutionSummary};
use gridprice_core::ac::{solve_ac_local, AcSettings, AcSolution, Start, DEFAULT_CERT_TOL};
use gridprice_core::network::NetworkCase;
use gridprice_core::pricing::{equilibrium_audit, lost_opportunity_cost, profit_max};
use gridprice_core::sdp::{solve_sdp, SdpSettings};
use gridprice_core::socp::{compare_solutions, exactness_check, solve_socp};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, detail: String::new() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.pass = false;
            let _ = write!(self.detail, " [{}]", what());
        }
    }

    fn note(&mut self, s: impl AsRef<str>) {
        let _ = write!(self.detail, " {}", s.as_ref());
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

fn solution<'a>(r: Option<&'a RunRecord>) -> Option<&'a SolutionSummary> {
    r.and_then(|r| r.solution.as_ref())
}

fn expected(name: &str, key: &str) -> Vec<f64> {
    bundled::generate(name).unwrap().meta.unwrap().expected[key].clone()
}

fn case(name: &str) -> NetworkCase {
    bundled::network(name).unwrap()
}

fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    for name in ["exp1", "exp2", "exp3"] {
        let started = Instant::now();
        let p = run_pipeline(name, &case(name), &[Formulation::Sdp, Formulation::Ac], &PipelineSettings::default());
        let elapsed = started.elapsed().as_secs_f64();
        let (Some(sdp), Some(ac)) = (solution(p.record(Formulation::Sdp)), solution(p.record(Formulation::Ac))) else {
            o.check(false, || format!("{name}: solve failed"));
            continue;
        };
        o.check(p.all_certified(), || format!("{name}: not certified"));
        let groups: [(&str, &[f64], f64); 8] = [
            ("sdp_p_gen", &sdp.p_gen, 0.02),
            ("sdp_q_gen", &sdp.q_gen, 0.02),
            ("ac_p_gen", &ac.p_gen, 0.02),
            ("ac_q_gen", &ac.q_gen, 0.02),
            ("sdp_lmp_p", &sdp.duals.lmp_p, 0.02),
            ("ac_lmp_p", &ac.duals.lmp_p, 0.02),
            ("ac_v_sq", &ac.v_sq, 0.02),
            ("ac_ms", &[p.record(Formulation::Ac).unwrap().settlement.as_ref().map_or(f64::NAN, |s| s.ms)], 0.05),
        ];
        for (key, got, tol) in groups {
            let d = max_diff(got, &expected(name, key));
            o.check(d <= tol, || format!("{name} {key} off by {d:.4}"));
        }
        o.check(max_diff(&sdp.duals.lmp_p, &ac.duals.lmp_p) <= 0.02, || format!("{name}: lambda_p != Lambda_p"));
        for key in ["sdp_lmp_q", "ac_lmp_q"] {
            let got = if key == "sdp_lmp_q" { &sdp.duals.lmp_q } else { &ac.duals.lmp_q };
            let d = max_diff(got, &expected(name, key));
            if d > 0.02 {
                o.note(format!("{name} {key} differs by {d:.3} (reactive bound degenerate, multiplier not unique)"));
            }
        }
        o.check(elapsed <= 10.0, || format!("{name} took {elapsed:.1} s"));
        o.note(format!("{name} {elapsed:.2}s"));
    }
    o
}

fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    let sol = solve_sdp(&case("exp4"), &SdpSettings { rank_tol: 1e-5, ..SdpSettings::default() }).unwrap();
    o.check((sol.objective - 6.86).abs() <= 0.05, || format!("J_SDP {:.4}", sol.objective));
    o.check(sol.rank == 2, || format!("rank {}", sol.rank));
    let d = max_diff(&sol.duals.lmp_p, &[10.06, 1.58, 11.52]);
    o.check(d <= 0.05, || format!("lambda_p off by {d:.4}"));
    let d = max_diff(&sol.p_gen, &[0.31, 2.90, 0.0]);
    o.check(d <= 0.05, || format!("p_gen off by {d:.4}"));
    o.note(format!("J_SDP {:.4} rank {}", sol.objective, sol.rank));
    o
}

fn criterion_3() -> Outcome {
    let mut o = Outcome::new();
    let case = case("exp4");
    let settings = PipelineSettings { start: Some(StartChoice::Flat), ..PipelineSettings::default() };
    let p = run_pipeline("exp4", &case, &[Formulation::Sdp, Formulation::Ac], &settings);
    let (Some(sdp), Some(ac_rec)) = (solution(p.record(Formulation::Sdp)), p.record(Formulation::Ac)) else {
        o.check(false, || "solve failed".into());
        return o;
    };
    let Some(ac) = &ac_rec.solution else {
        o.check(false, || "AC solve failed".into());
        return o;
    };
    let ms = ac_rec.settlement.as_ref().map_or(f64::NAN, |s| s.ms);
    let reference_basin = (ac.objective - 12.51).abs() <= 0.05
        && max_diff(&ac.duals.lmp_p, &[10.20, 1.44, 18.78]) <= 0.05
        && (ms - 17.55).abs() <= 0.1;
    if reference_basin {
        o.note(format!("published basin: J_AC {:.4}, MS {ms:.4}", ac.objective));
        return o;
    }
    o.note(format!(
        "other basin found (J_AC {:.4}, Lambda_p {:.2?}, MS {ms:.4}); property acceptance:",
        ac.objective, ac.duals.lmp_p
    ));
    let kkt = ac.residuals["kkt"];
    o.check(ac_rec.certified && kkt <= 1e-6, || format!("kkt residual {kkt:.3e}"));
    let loc = lost_opportunity_cost(&case, &ac.p_gen, &ac.q_gen, &ac.duals.lmp_p, &ac.duals.lmp_q).unwrap().loc;
    o.check(loc.abs() <= 1e-8, || format!("LOC at own prices {loc:.3e}"));
    match ac_rec.settlement.as_ref().and_then(|s| s.revenue_adequacy.as_deref()) {
        Some("guaranteed") => o.check(ms >= 0.0, || format!("MS {ms:.4} < 0")),
        Some("not-guaranteed") => o.note("lower voltage limit binds, MS sign not guaranteed;"),
        other => o.check(false, || format!("adequacy {other:?}")),
    }
    o.check(ac.objective >= sdp.objective - 1e-6, || "J_AC < J_SDP".into());
    o.note(format!("kkt {kkt:.1e}, LOC {loc:.1e}"));
    o
}

fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    let case = case("exp4");
    let bus = &case.buses[1];
    let dispatch = [2.20, 1.20];
    let best = profit_max(bus, [1.58, 0.0], None);
    let so = 1.58 * dispatch[0] - bus.cost.value(dispatch[0], dispatch[1]);
    o.check((so - 0.79).abs() <= 0.01, || format!("profit_so {so:.4}"));
    o.check((best.profit - 0.84).abs() <= 0.01, || format!("profit_opt {:.4}", best.profit));
    o.check(max_diff(&best.dispatch, &[2.90, 0.0]) <= 0.01, || format!("argmax {:?}", best.dispatch));
    let p = [0.97, dispatch[0], 0.0];
    let q = [1.09, dispatch[1], 1.26];
    let audit = equilibrium_audit(&case, &p, &q, &[10.20, 1.44, 18.78], &[0.0; 3]).unwrap();
    let diff = audit[1].profit_opt - audit[1].profit_so;
    o.check(diff <= 1e-6, || format!("bus 2 at 1.44 forgoes {diff:.3e}"));
    o.note(format!("profit_so {so:.4}, profit_opt {:.4} at {:.2?}; at 1.44 gap {diff:.1e}", best.profit, best.dispatch));
    o
}

fn criterion_5() -> Outcome {
    let mut o = Outcome::new();
    for name in bundled::NAMES {
        let p = run_pipeline(name, &case(name), &[Formulation::Sdp, Formulation::Ac], &PipelineSettings::default());
        let ac = p.record(Formulation::Ac).unwrap();
        if !ac.certified {
            o.note(format!("{name}: no certified AC point, skipped;"));
            continue;
        }
        let Some(g) = &ac.gap else {
            o.check(false, || format!("{name}: no decomposition ({:?})", ac.error));
            continue;
        };
        let bound = 1e-5 * (1.0 + g.gap.abs());
        o.check(g.residual <= bound, || format!("{name}: residual {:.3e}", g.residual));
        if name.starts_with("exp") && name != "exp4" {
            let worst = g.gap.abs().max(g.loc.abs()).max(g.prs.abs());
            o.check(worst <= 1e-5, || format!("{name}: gap/LOC/PRS {worst:.3e}"));
        }
        o.note(format!("{name} {:.1e}", g.residual));
    }
    o
}

fn criterion_6() -> Outcome {
    let mut o = Outcome::new();
    for name in ["two_bus_feeder", "radial15"] {
        let case = case(name);
        let sdp = solve_sdp(&case, &SdpSettings::default()).unwrap();
        let socp = solve_socp(&case, 1e-8).unwrap();
        let cmp = compare_solutions(&sdp, &socp, 1e-4);
        o.check(cmp.objective_gap <= 1e-6, || format!("{name}: |dJ| {:.3e}", cmp.objective_gap));
        let dp = cmp.price_gap_p.max(cmp.price_gap_q);
        o.check(dp <= 1e-4, || format!("{name}: price gap {dp:.3e}"));
        o.note(format!("{name} |dJ| {:.1e} |d price| {dp:.1e};", cmp.objective_gap));
        if name == "radial15" {
            let exact = exactness_check(&socp, 1e-6);
            o.check(exact.exact, || format!("cone residual {:.3e}", exact.max_residual));
            let p = run_pipeline(name, &case, &[Formulation::Socp], &PipelineSettings::default());
            let ms = p.record(Formulation::Socp).and_then(|r| r.settlement.as_ref()).map_or(f64::NAN, |s| s.ms);
            o.check(ms >= 0.0, || format!("MS {ms:.4}"));
            o.note(format!("cone residual {:.1e}, MS {ms:.4};", exact.max_residual));

            // Raising the bus 11 demand should lift prices most around bus 11.
            let mut heavier = case.clone();
            heavier.buses[10].p_demand = 0.350;
            let after = solve_socp(&heavier, 1e-8).unwrap();
            let rise: Vec<f64> = after.duals.lmp_p.iter().zip(&socp.duals.lmp_p).map(|(a, b)| a - b).collect();
            let peak = (0..rise.len()).max_by(|&a, &b| rise[a].total_cmp(&rise[b])).unwrap();
            let near: Vec<usize> = std::iter::once(10)
                .chain(case.lines.iter().filter_map(|l| match (l.from, l.to) {
                    (10, k) | (k, 10) => Some(k),
                    _ => None,
                }))
                .collect();
            o.check(near.contains(&peak) && rise[10] > rise[0] + 1e-6, || format!("price rise peaks at bus {}", peak + 1));
            o.note(format!("rise at bus 11 {:.3}, at root {:.3}", rise[10], rise[0]));
        }
    }
    o
}

/// Power injections of a two-bus network from Ohm's law.
fn two_bus_injections(line: &gridprice_core::network::Line, v: [Complex64; 2]) -> [Complex64; 2] {
    let y = Complex64::new(1.0, 0.0) / Complex64::new(line.r, line.x);
    let i0 = y * (v[0] - v[1]);
    [v[0] * i0.conj(), v[1] * (-i0).conj()]
}

fn criterion_7() -> Outcome {
    let mut o = Outcome::new();
    let case = case("two_bus_feeder");
    let line = &case.lines[0];
    let (b0, b1) = (&case.buses[0], &case.buses[1]);
    let ac = solve_ac_local(&case, &Start::Flat, &AcSettings::default()).unwrap();
    let sdp = solve_sdp(&case, &SdpSettings::default()).unwrap();
    let eps = 1e-12;
    let inside = |x: f64, lo: f64, hi: f64| x >= lo - eps && x <= hi + eps;
    let mags: Vec<f64> = {
        let (lo, hi) = (b0.v_min_sq.sqrt(), b0.v_max_sq.sqrt());
        let steps = ((hi - lo) / 1e-3).round() as usize;
        (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect()
    };
    let mut best = f64::INFINITY;
    for &m0 in &mags {
        for &m1 in &mags {
            for t in -100..=100 {
                let theta = t as f64 * 1e-3;
                let v = [Complex64::new(m0, 0.0), Complex64::from_polar(m1, theta)];
                let s = two_bus_injections(line, v);
                let (p0, q0) = (s[0].re + b0.p_demand, s[0].im + b0.q_demand);
                let (p1, q1) = (s[1].re + b1.p_demand, s[1].im + b1.q_demand);
                let ok = inside(p0, b0.p_min, b0.p_max)
                    && inside(q0, b0.q_min, b0.q_max)
                    && inside(p1, b1.p_min, b1.p_max)
                    && inside(q1, b1.q_min, b1.q_max)
                    && inside(m0 * m0, b0.v_min_sq, b0.v_max_sq)
                    && inside(m1 * m1, b1.v_min_sq, b1.v_max_sq)
                    && s[0].re <= line.flow_limit + eps
                    && s[1].re <= line.flow_limit + eps;
                if ok {
                    best = best.min(b0.cost.value(p0, q0) + b1.cost.value(p1, q1));
                }
            }
        }
    }
    let lower = best - 1e-2;
    o.check(ac.certified && ac.objective >= lower && ac.objective <= best + 1e-2, || {
        format!("J_AC {:.5} outside [{lower:.5}, {:.5}]", ac.objective, best + 1e-2)
    });
    o.check(sdp.objective <= lower + 1e-2, || format!("J_SDP {:.5} above {:.5}", sdp.objective, lower + 1e-2));
    o.note(format!("grid {best:.5}, J_AC {:.5}, J_SDP {:.5}", ac.objective, sdp.objective));
    o
}

fn criterion_8() -> Outcome {
    let mut o = Outcome::new();
    let sdp_opts = SdpSettings::default();

    // Weak duality on every bundled case.
    for name in bundled::NAMES {
        let case = case(name);
        let sdp = solve_sdp(&case, &sdp_opts).unwrap();
        let ac = solve_ac_local(&case, &Start::Flat, &AcSettings::default()).unwrap();
        o.check(sdp.objective <= ac.objective + 1e-6, || format!("{name}: J_SDP > J_AC"));
    }
    o.note("weak duality on 8 cases;");

    // Midpoint convexity of the optimal cost in the demands.
    let base = case("exp2");
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let with_demand = |d: &[f64; 6]| {
        let mut c = base.clone();
        for k in 0..3 {
            c.buses[k].p_demand = d[k];
            c.buses[k].q_demand = d[3 + k];
        }
        solve_sdp(&c, &sdp_opts).map(|s| s.objective)
    };
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10 {
        let mut draw = || {
            let mut d = [0.0; 6];
            for k in 0..3 {
                d[k] = base.buses[k].p_demand * rng.gen_range(0.8..1.1);
                d[3 + k] = base.buses[k].q_demand * rng.gen_range(0.8..1.1);
            }
            d
        };
        let (a, b) = (draw(), draw());
        let mid: [f64; 6] = std::array::from_fn(|i| 0.5 * (a[i] + b[i]));
        match (with_demand(&a), with_demand(&b), with_demand(&mid)) {
            (Ok(ja), Ok(jb), Ok(jm)) => worst = worst.max(jm - 0.5 * (ja + jb)),
            (ra, rb, rm) => o.check(false, || format!("convexity sample failed: {:?} {:?} {:?}", ra.err(), rb.err(), rm.err())),
        }
    }
    o.check(worst <= 1e-6, || format!("midpoint excess {worst:.3e}"));
    o.note(format!("convexity worst {worst:.1e};"));

    // Finite differences of the optimal cost against the prices.
    let sol = solve_sdp(&base, &sdp_opts).unwrap();
    let h = 1e-3;
    let mut worst_fd = 0.0_f64;
    for k in 0..3 {
        let shifted = |s: f64| {
            let mut c = base.clone();
            c.buses[k].p_demand += s;
            solve_sdp(&c, &sdp_opts).unwrap().objective
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        worst_fd = worst_fd.max((fd - sol.duals.lmp_p[k]).abs());
    }
    o.check(worst_fd <= 0.05, || format!("finite difference off by {worst_fd:.4}"));
    o.note(format!("price FD {worst_fd:.1e};"));

    // Recovered voltages of the exact experiments pass the KKT audit.
    for name in ["exp1", "exp2", "exp3"] {
        let case = case(name);
        let sdp = solve_sdp(&case, &sdp_opts).unwrap();
        match AcSolution::from_sdp(&case, &sdp, DEFAULT_CERT_TOL) {
            Ok(Some(ac)) => {
                o.check(ac.kkt_residual <= 1e-6, || format!("{name}: audit {:.3e}", ac.kkt_residual));
                o.note(format!("{name} audit {:.1e}", ac.kkt_residual));
            }
            other => o.check(false, || format!("{name}: no recovered point ({other:?})")),
        }
    }
    o
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("three-bus tables, experiments 1-3", criterion_1),
        ("experiment 4, relaxation", criterion_2),
        ("experiment 4, local AC point", criterion_3),
        ("side-payment vignette", criterion_4),
        ("gap decomposition", criterion_5),
        ("radial equivalence", criterion_6),
        ("brute-force oracle", criterion_7),
        ("property suites", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let o = run();
        failed += usize::from(!o.pass);
        println!(
            "criterion {} ({name}): {} in {:.1}s:{}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64(),
            o.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
