use gridprice::bundled;
use gridprice::case_file::{parse_case_str, CaseError, CaseFile};

fn cases_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("cases")
}

/// Set `GRIDPRICE_WRITE_CASES=1` to regenerate the bundled files.
#[test]
fn bundled_files_are_canonical() {
    let write = std::env::var_os("GRIDPRICE_WRITE_CASES").is_some();
    for name in bundled::NAMES {
        let canonical = bundled::generate(name).unwrap().to_json();
        let path = cases_dir().join(format!("{name}.json"));
        if write {
            std::fs::write(&path, &canonical).unwrap();
        } else {
            assert_eq!(std::fs::read_to_string(&path).unwrap(), canonical, "{name} is stale");
        }
    }
}

#[test]
fn bundled_files_match_reference_networks() {
    for name in bundled::NAMES {
        let (_, case) = parse_case_str(bundled::text(name).unwrap()).unwrap();
        assert_eq!(case, bundled::network(name).unwrap(), "{name}");
    }
}

#[test]
fn round_trip_is_identical() {
    for name in bundled::NAMES {
        let text = bundled::text(name).unwrap();
        let (file, _) = parse_case_str(text).unwrap();
        assert_eq!(file.to_json(), text);
        let (again, _) = parse_case_str(&file.to_json()).unwrap();
        assert_eq!(again, file);
    }
}

#[test]
fn exp1_matches_table_one() {
    let (_, case) = parse_case_str(bundled::text("exp1").unwrap()).unwrap();
    assert_eq!(case.n_buses(), 3);
    for line in &case.lines {
        assert_eq!((line.flow_limit, line.r, line.x), (0.24, 0.01, 0.01));
    }
    let demand: Vec<f64> = case.buses.iter().map(|b| b.p_demand).collect();
    assert_eq!(demand, [0.79, 0.0, 1.90]);
}

fn exp2_file() -> CaseFile {
    CaseFile::from_json(bundled::text("exp2").unwrap()).unwrap()
}

#[test]
fn negative_flow_limit_is_diagnosed() {
    let mut file = exp2_file();
    file.lines[1].flow_limit = -1.0;
    match file.to_network() {
        Err(CaseError::Invalid(d)) => {
            assert_eq!(d.len(), 1);
            assert!(d[0].contains("line 2") && d[0].contains("flow_limit"), "{d:?}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn every_problem_is_listed() {
    let mut file = exp2_file();
    file.buses[0].v_min_sq = 2.0;
    file.lines[0].r = -0.1;
    file.lines[2].to = 9;
    let Err(CaseError::Invalid(d)) = file.to_network() else { panic!() };
    assert!(d.iter().any(|m| m.contains("lines[2]") && m.contains("to")), "{d:?}");
    file.lines[2].to = 1;
    let Err(CaseError::Invalid(d)) = file.to_network() else { panic!() };
    assert!(d.len() >= 2, "{d:?}");
}

#[test]
fn schema_version_is_checked() {
    let text = bundled::text("single_bus").unwrap().replace("\"schema_version\": \"1\"", "\"schema_version\": \"7\"");
    assert!(matches!(parse_case_str(&text), Err(CaseError::SchemaVersion { found }) if found == "7"));
}

#[test]
fn syntax_error_reports_position() {
    let text = "{\n  \"schema_version\": \"1\",\n  \"buses\": [,]\n}";
    match parse_case_str(text) {
        Err(CaseError::Syntax { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_field_is_rejected() {
    let text = bundled::text("single_bus").unwrap().replace("\"p_demand\"", "\"p_dmd\"");
    assert!(matches!(parse_case_str(&text), Err(CaseError::Syntax { .. })));
}
