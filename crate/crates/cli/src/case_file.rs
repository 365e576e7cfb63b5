//! Versioned JSON case files.
//!
//! Buses and line endpoints are numbered from 1 in files. Voltage limits
//! are squared magnitudes, all quantities per unit.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use gridprice_core::network::{validate_case, Bus, GeneratorCost, Line, NetworkCase, Violation};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub schema_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
    pub buses: Vec<BusRecord>,
    #[serde(default)]
    pub lines: Vec<LineRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    /// Published outputs keyed by quantity, one entry per bus where that
    /// applies.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub expected: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusRecord {
    pub id: usize,
    #[serde(default)]
    pub p_demand: f64,
    #[serde(default)]
    pub q_demand: f64,
    pub v_min_sq: f64,
    pub v_max_sq: f64,
    #[serde(default)]
    pub p_min: f64,
    #[serde(default)]
    pub p_max: f64,
    #[serde(default)]
    pub q_min: f64,
    #[serde(default)]
    pub q_max: f64,
    #[serde(default)]
    pub cost: CostRecord,
    /// Shunt admittance `[g, b]`.
    #[serde(default, skip_serializing_if = "is_zero_pair")]
    pub shunt: [f64; 2],
}

/// `c(p, q) = [p q] quadratic [p q]ᵀ + linear · [p q]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostRecord {
    pub quadratic: [[f64; 2]; 2],
    pub linear: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineRecord {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    pub flow_limit: f64,
}

fn is_zero_pair(v: &[f64; 2]) -> bool {
    v[0] == 0.0 && v[1] == 0.0
}

#[derive(Debug, thiserror::Error)]
pub enum CaseError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("schema version {found:?} is not supported (expected {SCHEMA_VERSION:?})")]
    SchemaVersion { found: String },
    #[error("{}", Diagnostics(.0))]
    Invalid(Vec<String>),
}

struct Diagnostics<'a>(&'a [String]);

impl fmt::Display for Diagnostics<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} validation error(s)", self.0.len())?;
        for d in self.0 {
            write!(f, "\n  {d}")?;
        }
        Ok(())
    }
}

impl CaseFile {
    pub fn from_network(name: &str, case: &NetworkCase) -> Self {
        let buses = case
            .buses
            .iter()
            .enumerate()
            .map(|(k, b)| BusRecord {
                id: k + 1,
                p_demand: b.p_demand,
                q_demand: b.q_demand,
                v_min_sq: b.v_min_sq,
                v_max_sq: b.v_max_sq,
                p_min: b.p_min,
                p_max: b.p_max,
                q_min: b.q_min,
                q_max: b.q_max,
                cost: CostRecord { quadratic: b.cost.quadratic, linear: b.cost.linear },
                shunt: [b.shunt.re, b.shunt.im],
            })
            .collect();
        let lines = case
            .lines
            .iter()
            .map(|l| LineRecord { from: l.from + 1, to: l.to + 1, r: l.r, x: l.x, flow_limit: l.flow_limit })
            .collect();
        CaseFile {
            schema_version: SCHEMA_VERSION.to_string(),
            meta: Some(Meta { name: name.to_string(), description: String::new(), expected: BTreeMap::new() }),
            buses,
            lines,
        }
    }

    pub fn name(&self) -> Option<&str> {
        self.meta.as_ref().map(|m| m.name.as_str())
    }

    /// Converts to a validated network, collecting every problem found.
    pub fn to_network(&self) -> Result<NetworkCase, CaseError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CaseError::SchemaVersion { found: self.schema_version.clone() });
        }
        let n = self.buses.len();
        let mut problems = Vec::new();
        for (k, b) in self.buses.iter().enumerate() {
            if b.id != k + 1 {
                problems.push(format!("buses[{k}]: id: expected {}, found {}", k + 1, b.id));
            }
        }
        for (i, l) in self.lines.iter().enumerate() {
            for (field, end) in [("from", l.from), ("to", l.to)] {
                if end == 0 || end > n {
                    problems.push(format!("lines[{i}]: {field}: bus {end} does not exist"));
                }
            }
        }
        if !problems.is_empty() {
            return Err(CaseError::Invalid(problems));
        }
        let case = NetworkCase {
            buses: self
                .buses
                .iter()
                .map(|b| Bus {
                    p_demand: b.p_demand,
                    q_demand: b.q_demand,
                    v_min_sq: b.v_min_sq,
                    v_max_sq: b.v_max_sq,
                    p_min: b.p_min,
                    p_max: b.p_max,
                    q_min: b.q_min,
                    q_max: b.q_max,
                    cost: GeneratorCost { quadratic: b.cost.quadratic, linear: b.cost.linear },
                    shunt: Complex64::new(b.shunt[0], b.shunt[1]),
                })
                .collect(),
            lines: self
                .lines
                .iter()
                .map(|l| Line { from: l.from - 1, to: l.to - 1, r: l.r, x: l.x, flow_limit: l.flow_limit })
                .collect(),
        };
        let violations = validate_case(&case);
        if !violations.is_empty() {
            return Err(CaseError::Invalid(violations.iter().map(Violation::to_string).collect()));
        }
        Ok(case)
    }

    pub fn from_json(text: &str) -> Result<Self, CaseError> {
        serde_json::from_str(text).map_err(|e| CaseError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// Canonical form: pretty-printed with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("case file serializes");
        s.push('\n');
        s
    }
}

pub fn parse_case_str(text: &str) -> Result<(CaseFile, NetworkCase), CaseError> {
    let file = CaseFile::from_json(text)?;
    let case = file.to_network()?;
    Ok((file, case))
}

pub fn parse_case(path: &Path) -> Result<(CaseFile, NetworkCase), CaseError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| CaseError::Io { path: path.display().to_string(), source })?;
    parse_case_str(&text)
}
