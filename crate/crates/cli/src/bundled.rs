//! Case files shipped with the crate.

use std::collections::BTreeMap;

use gridprice_core::network::NetworkCase;
use gridprice_core::reference;

use crate::case_file::{CaseFile, Meta};

pub const NAMES: [&str; 8] = ["exp1", "exp2", "exp3", "exp4", "single_bus", "two_bus_feeder", "meshed3", "radial15"];

pub fn text(name: &str) -> Option<&'static str> {
    Some(match name {
        "exp1" => include_str!("../cases/exp1.json"),
        "exp2" => include_str!("../cases/exp2.json"),
        "exp3" => include_str!("../cases/exp3.json"),
        "exp4" => include_str!("../cases/exp4.json"),
        "single_bus" => include_str!("../cases/single_bus.json"),
        "two_bus_feeder" => include_str!("../cases/two_bus_feeder.json"),
        "meshed3" => include_str!("../cases/meshed3.json"),
        "radial15" => include_str!("../cases/radial15.json"),
        _ => return None,
    })
}

/// The in-code network each bundled file was generated from.
pub fn network(name: &str) -> Option<NetworkCase> {
    Some(match name {
        "exp1" => reference::exp1(),
        "exp2" => reference::exp2(),
        "exp3" => reference::exp3(),
        "exp4" => reference::exp4(),
        "single_bus" => reference::single_bus(),
        "two_bus_feeder" => reference::two_bus_feeder(),
        "meshed3" => reference::meshed3(),
        "radial15" => reference::radial15(),
        _ => return None,
    })
}

type Expected = [(&'static str, &'static [f64]); 10];

/// Published three-bus outputs, two decimals.
fn published(name: &str) -> Option<Expected> {
    Some(match name {
        "exp1" => [
            ("sdp_p_gen", &[0.39, 0.31, 1.99]),
            ("sdp_q_gen", &[0.0, 0.0, 0.50]),
            ("ac_p_gen", &[0.39, 0.31, 1.99]),
            ("ac_q_gen", &[0.0, 0.0, 0.50]),
            ("sdp_lmp_p", &[10.77, 10.63, 13.99]),
            ("sdp_lmp_q", &[-4.33, -2.16, 0.0]),
            ("ac_lmp_p", &[10.77, 10.63, 13.99]),
            ("ac_lmp_q", &[-4.33, -2.16, 0.0]),
            ("ac_v_sq", &[0.98, 0.99, 0.99]),
            ("ac_ms", &[-2.44]),
        ],
        "exp2" => [
            ("sdp_p_gen", &[0.92, 0.23, 1.63]),
            ("sdp_q_gen", &[0.10, 0.0, 0.0]),
            ("ac_p_gen", &[0.92, 0.23, 1.63]),
            ("ac_q_gen", &[0.10, 0.0, 0.0]),
            ("sdp_lmp_p", &[11.85, 10.47, 13.27]),
            ("sdp_lmp_q", &[0.0, 0.0, 0.0]),
            ("ac_lmp_p", &[11.85, 10.47, 13.27]),
            ("ac_lmp_q", &[0.0, 0.0, 0.0]),
            ("ac_v_sq", &[1.01, 1.01, 1.01]),
            ("ac_ms", &[0.83]),
        ],
        "exp3" => [
            ("sdp_p_gen", &[1.19, 0.40, 1.20]),
            ("sdp_q_gen", &[0.50, 0.0, 0.0]),
            ("ac_p_gen", &[1.19, 0.40, 1.20]),
            ("ac_q_gen", &[0.50, 0.0, 0.0]),
            ("sdp_lmp_p", &[12.38, 10.80, 12.41]),
            ("sdp_lmp_q", &[0.0, -1.09, -0.55]),
            ("ac_lmp_p", &[12.38, 10.80, 12.41]),
            ("ac_lmp_q", &[0.0, -1.09, -0.55]),
            ("ac_v_sq", &[1.01, 1.01, 1.00]),
            ("ac_ms", &[0.62]),
        ],
        "exp4" => [
            ("sdp_p_gen", &[0.31, 2.90, 0.0]),
            ("sdp_q_gen", &[1.44, 1.70, 1.37]),
            ("ac_p_gen", &[0.97, 2.20, 0.0]),
            ("ac_q_gen", &[1.09, 1.20, 1.26]),
            ("sdp_lmp_p", &[10.06, 1.58, 11.52]),
            ("sdp_lmp_q", &[0.0, 0.0, 0.0]),
            ("ac_lmp_p", &[10.20, 1.44, 18.78]),
            ("ac_lmp_q", &[0.0, 0.0, 0.0]),
            ("ac_v_sq", &[1.01, 1.01, 1.02]),
            ("ac_ms", &[17.55]),
        ],
        _ => return None,
    })
}

fn description(name: &str) -> &'static str {
    match name {
        "exp1" => "three-bus triangle, experiment 1",
        "exp2" => "three-bus triangle, experiment 2",
        "exp3" => "three-bus triangle, experiment 3",
        "exp4" => "three-bus triangle, experiment 4 (relaxation not exact)",
        "single_bus" => "one bus, demand 1, cost p^2 + 10p",
        "two_bus_feeder" => "root and leaf generator on one line",
        "meshed3" => "small meshed network",
        "radial15" => "15-bus radial feeder with three distributed generators",
        _ => "",
    }
}

/// Case file for a bundled name, with its metadata.
pub fn generate(name: &str) -> Option<CaseFile> {
    let mut file = CaseFile::from_network(name, &network(name)?);
    let mut expected = BTreeMap::new();
    if let Some(rows) = published(name) {
        expected.extend(rows.iter().map(|(k, v)| (k.to_string(), v.to_vec())));
        if name == "exp4" {
            expected.insert("sdp_objective".to_string(), vec![6.86]);
            expected.insert("ac_objective".to_string(), vec![12.51]);
        }
    }
    file.meta = Some(Meta { name: name.to_string(), description: description(name).to_string(), expected });
    Some(file)
}
