//! Small reference networks used throughout the tests and shipped as
//! case files by the command-line tool.

use alloc::vec;
use alloc::vec::Vec;

use crate::network::{Bus, GeneratorCost, Line, NetworkCase};

struct Row {
    p_demand: f64,
    q_demand: f64,
    p_max: f64,
    q_max: f64,
    v_min_sq: f64,
    v_max_sq: f64,
    c2: f64,
    c1: f64,
}

fn triangle(rows: [Row; 3], f: f64, r: f64, x: f64) -> NetworkCase {
    let buses = rows
        .into_iter()
        .map(|w| Bus {
            p_demand: w.p_demand,
            q_demand: w.q_demand,
            v_min_sq: w.v_min_sq,
            v_max_sq: w.v_max_sq,
            p_max: w.p_max,
            q_max: w.q_max,
            cost: GeneratorCost::real_power(w.c2, w.c1),
            ..Bus::default()
        })
        .collect();
    let lines = [(0, 1), (1, 2), (0, 2)]
        .into_iter()
        .map(|(from, to)| Line { from, to, r, x, flow_limit: f })
        .collect();
    NetworkCase { buses, lines }
}

fn exp_1_to_3(f: f64, p_demand: [f64; 3], q_demand: [f64; 3], v_min_sq: [f64; 3], v_max_sq: [f64; 3]) -> NetworkCase {
    let p_max = [2.0, 1.2, 2.0];
    let q_max = [0.9, 0.21, 2.0];
    let rows = core::array::from_fn(|k| Row {
        p_demand: p_demand[k],
        q_demand: q_demand[k],
        p_max: p_max[k],
        q_max: q_max[k],
        v_min_sq: v_min_sq[k],
        v_max_sq: v_max_sq[k],
        c2: 1.0,
        c1: 10.0,
    });
    triangle(rows, f, 0.01, 0.01)
}

/// Three-bus triangle, experiment 1: the lower voltage limit binds at bus 3.
pub fn exp1() -> NetworkCase {
    exp_1_to_3(0.24, [0.79, 0.0, 1.9], [0.5, 0.0, 0.0], [0.95, 0.98, 0.99], [0.98, 1.01, 1.01])
}

pub fn exp2() -> NetworkCase {
    exp_1_to_3(0.20, [0.79, 0.0, 2.0], [0.1, 0.0, 0.0], [0.95, 0.98, 0.95], [1.05, 1.01, 1.01])
}

pub fn exp3() -> NetworkCase {
    exp_1_to_3(0.40, [0.79, 0.0, 2.0], [0.5, 0.0, 0.0], [1.01, 0.98, 0.99], [1.05, 1.01, 1.01])
}

/// Experiment 4: the relaxation is not exact.
pub fn exp4() -> NetworkCase {
    let p_demand = [1.1, 1.1, 0.95];
    let p_max = [1.0, 3.0, 0.0];
    let v_min_sq = [0.98, 0.99, 0.95];
    let v_max_sq = [1.01, 1.01, 1.02];
    let c2 = [0.1, 0.1, 0.0];
    let c1 = [10.0, 1.0, 0.0];
    let rows = core::array::from_fn(|k| Row {
        p_demand: p_demand[k],
        q_demand: 1.0,
        p_max: p_max[k],
        q_max: 2.0,
        v_min_sq: v_min_sq[k],
        v_max_sq: v_max_sq[k],
        c2: c2[k],
        c1: c1[k],
    });
    triangle(rows, 0.9, 0.03, 0.75)
}

/// One bus, demand 1, cost `p² + 10p` on `[0, 2]`.
pub fn single_bus() -> NetworkCase {
    let bus = Bus {
        p_demand: 1.0,
        v_min_sq: 0.9025,
        v_max_sq: 1.1025,
        p_max: 2.0,
        q_min: -1.0,
        q_max: 1.0,
        cost: GeneratorCost::real_power(1.0, 10.0),
        ..Bus::default()
    };
    NetworkCase { buses: vec![bus], lines: Vec::new() }
}

/// Root with a cheap generator feeding a leaf that has a dearer one; both
/// are dispatched strictly inside their boxes.
pub fn two_bus_feeder() -> NetworkCase {
    let root = Bus {
        v_min_sq: 0.9025,
        v_max_sq: 1.1025,
        p_max: 3.0,
        q_min: -2.0,
        q_max: 2.0,
        cost: GeneratorCost::real_power(1.0, 10.0),
        ..Bus::default()
    };
    let leaf = Bus {
        p_demand: 1.0,
        q_demand: 0.3,
        v_min_sq: 0.9025,
        v_max_sq: 1.1025,
        p_max: 1.0,
        q_min: -0.5,
        q_max: 0.5,
        cost: GeneratorCost::real_power(0.5, 11.0),
        ..Bus::default()
    };
    let line = Line { from: 0, to: 1, r: 0.01, x: 0.01, flow_limit: 2.0 };
    NetworkCase { buses: vec![root, leaf], lines: vec![line] }
}

/// Uncongested three-bus loop.
pub fn meshed3() -> NetworkCase {
    let rows = [
        Row { p_demand: 0.3, q_demand: 0.1, p_max: 2.0, q_max: 1.0, v_min_sq: 0.9025, v_max_sq: 1.1025, c2: 0.5, c1: 8.0 },
        Row { p_demand: 0.6, q_demand: 0.2, p_max: 1.0, q_max: 0.5, v_min_sq: 0.9025, v_max_sq: 1.1025, c2: 1.0, c1: 9.0 },
        Row { p_demand: 0.5, q_demand: 0.2, p_max: 0.0, q_max: 0.0, v_min_sq: 0.9025, v_max_sq: 1.1025, c2: 0.0, c1: 0.0 },
    ];
    let mut case = triangle(rows, 1.5, 0.02, 0.06);
    for b in &mut case.buses {
        b.q_min = -b.q_max;
    }
    case
}

/// Fifteen-bus distribution feeder rooted at bus 1.
///
/// The line into bus 11 is tight, so the local generator at bus 12 sets
/// prices in that pocket of the feeder.
pub fn radial15() -> NetworkCase {
    // (p^D, q^D) per bus.
    let demand = [
        (0.0, 0.0),
        (0.06, 0.02),
        (0.08, 0.03),
        (0.05, 0.02),
        (0.07, 0.02),
        (0.09, 0.03),
        (0.06, 0.02),
        (0.10, 0.04),
        (0.04, 0.01),
        (0.08, 0.03),
        (0.250, 0.073),
        (0.06, 0.02),
        (0.07, 0.03),
        (0.05, 0.02),
        (0.06, 0.02),
    ];
    let mut buses: Vec<Bus> = demand
        .iter()
        .map(|&(p, q)| Bus { p_demand: p, q_demand: q, v_min_sq: 0.9025, v_max_sq: 1.1025, ..Bus::default() })
        .collect();
    buses[0] = Bus {
        v_min_sq: 1.0,
        v_max_sq: 1.0,
        p_max: 3.0,
        q_min: -2.0,
        q_max: 2.0,
        cost: GeneratorCost::real_power(0.5, 10.0),
        ..buses[0].clone()
    };
    let der = |b: &Bus, p_max: f64, q_max: f64, c2: f64, c1: f64| Bus {
        p_max,
        q_min: -q_max,
        q_max,
        cost: GeneratorCost::real_power(c2, c1),
        ..b.clone()
    };
    buses[7] = der(&buses[7], 0.2, 0.1, 1.0, 11.0);
    buses[11] = der(&buses[11], 0.3, 0.15, 4.0, 12.0);
    buses[12] = der(&buses[12], 0.2, 0.1, 1.5, 11.5);
    // (from, to, r, x, f), 1-based.
    let lines = [
        (1, 2, 0.010, 0.020, 2.0),
        (2, 3, 0.012, 0.024, 1.5),
        (3, 4, 0.015, 0.030, 1.0),
        (4, 5, 0.015, 0.030, 0.8),
        (5, 6, 0.020, 0.040, 0.5),
        (3, 7, 0.015, 0.025, 0.6),
        (7, 8, 0.020, 0.030, 0.4),
        (8, 9, 0.020, 0.030, 0.2),
        (4, 10, 0.018, 0.030, 0.6),
        (10, 11, 0.025, 0.040, 0.2),
        (11, 12, 0.025, 0.040, 0.3),
        (6, 13, 0.020, 0.035, 0.3),
        (13, 14, 0.020, 0.035, 0.2),
        (2, 15, 0.015, 0.025, 0.3),
    ];
    let lines = lines
        .into_iter()
        .map(|(from, to, r, x, flow_limit)| Line { from: from - 1, to: to - 1, r, x, flow_limit })
        .collect();
    NetworkCase { buses, lines }
}
