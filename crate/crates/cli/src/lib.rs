//! Case files, run records, pipeline orchestration and reports for
//! `gridprice-core`.

pub mod bundled;
pub mod case_file;
pub mod pipeline;
pub mod record;
pub mod report;

use std::path::Path;

use gridprice_core::network::NetworkCase;

use crate::case_file::{parse_case, parse_case_str, CaseError, CaseFile};

/// Loads a case from a path, or by name from the bundled set.
pub fn load_case(arg: &str) -> Result<(String, CaseFile, NetworkCase), CaseError> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(text) = bundled::text(arg) {
            let (file, case) = parse_case_str(text)?;
            return Ok((arg.to_string(), file, case));
        }
    }
    let (file, case) = parse_case(path)?;
    let name = file
        .name()
        .map(str::to_string)
        .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "case".to_string());
    Ok((name, file, case))
}
